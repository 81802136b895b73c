"""Secure full-duplex RIS-assisted ISAC network: simulation and optimization.

Subpackages follow the processing chain: scenario (configuration and
geometry), channel (random channel synthesis), metrics (SINRs, secrecy,
sensing), conic (complex SDP modeling layer), optimizer (alternating
optimization), harness (experiments and CLI).
"""

__version__ = "0.1.0"
