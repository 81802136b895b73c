"""Performance evaluation: SINRs, secrecy capacities, beampatterns, echo SINR.

Every function here is a pure map from (ChannelSet, DesignState) to linear-
scale numbers. Nothing is regularized: a zero denominator or an infeasible
state must show up in the output, not be papered over.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelSet, DirectLinkSet, EffectiveChannels, \
    effective_channels, ris_steering


@dataclass(frozen=True)
class DesignState:
    """One candidate design: beamformers, AN, powers, combiners, phases."""

    W: np.ndarray           # (J, N_t, N_t) Hermitian PSD per-user covariances
    C_z: np.ndarray         # (N_t, N_t) Hermitian PSD artificial-noise covariance
    p: np.ndarray           # (K,) uplink transmit powers, W
    r: np.ndarray           # (K, N_r) receive combiners
    q: np.ndarray | None    # (N,) unit-modulus reflect phases; None = no panel
    alpha: float = 0.0      # achieved sensing slack, W

    @property
    def C_s(self) -> np.ndarray:
        return self.C_z + self.W.sum(axis=0)

    @property
    def total_power(self) -> float:
        return float(np.trace(self.C_s).real + self.p.sum())


@dataclass(frozen=True)
class MetricsReport:
    gamma_dl: np.ndarray       # (J,)
    gamma_eve_dl: np.ndarray   # (L, J)
    gamma_ul: np.ndarray       # (K,)
    gamma_eve_ul: np.ndarray   # (L, K)
    sc_dl: float               # bps/Hz, worst pair
    sc_ul: float
    sensing_power: np.ndarray  # (L,) W
    echo_sinr: np.ndarray      # (L,) at the optimal radar filters
    total_power: float         # W

    def to_flat_dict(self) -> dict[str, float]:
        """Stable scalar-keyed representation for JSON rows."""
        out: dict[str, float] = {}
        for j, v in enumerate(self.gamma_dl):
            out[f"gamma_dl_{j}"] = float(v)
        for (l, j), v in np.ndenumerate(self.gamma_eve_dl):
            out[f"gamma_eve_dl_{l}_{j}"] = float(v)
        for k, v in enumerate(self.gamma_ul):
            out[f"gamma_ul_{k}"] = float(v)
        for (l, k), v in np.ndenumerate(self.gamma_eve_ul):
            out[f"gamma_eve_ul_{l}_{k}"] = float(v)
        out["sc_dl"] = float(self.sc_dl)
        out["sc_ul"] = float(self.sc_ul)
        for l, v in enumerate(self.sensing_power):
            out[f"sensing_power_{l}"] = float(v)
        for l, v in enumerate(self.echo_sinr):
            out[f"echo_sinr_{l}"] = float(v)
        out["total_power"] = float(self.total_power)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_flat_dict(), sort_keys=True)


def _eff(ch: ChannelSet, st: DesignState,
         direct: DirectLinkSet | None) -> EffectiveChannels:
    return effective_channels(ch, st.q, direct)


def _quad(h: np.ndarray, M: np.ndarray) -> float:
    # h is a row channel; value is Tr[(h^H h) M] = h M h^H, real for Hermitian M
    return float(np.real(h @ M @ h.conj()))


def sinr_dl_user(ch: ChannelSet, st: DesignState, j: int,
                 direct: DirectLinkSet | None = None) -> float:
    eff = _eff(ch, st, direct)
    return _sinr_dl(eff.h_bu[j], eff.h_vu[:, j], ch.sigma2, st, j)


def sinr_dl_eve(ch: ChannelSet, st: DesignState, j: int, l: int,
                direct: DirectLinkSet | None = None) -> float:
    eff = _eff(ch, st, direct)
    return _sinr_dl(eff.h_be[l], eff.h_ve[:, l], ch.sigma2, st, j)


def _sinr_dl(h_row: np.ndarray, h_ul_cross: np.ndarray, sigma2: float,
             st: DesignState, j: int) -> float:
    sig = _quad(h_row, st.W[j])
    inter = sum(_quad(h_row, st.W[jp]) for jp in range(st.W.shape[0]) if jp != j)
    inter += _quad(h_row, st.C_z)
    inter += float((st.p * np.abs(h_ul_cross) ** 2).sum())
    return sig / (inter + sigma2)


def ul_interference_matrix(ch: ChannelSet, st: DesignState,
                           direct: DirectLinkSet | None = None,
                           exclude_ul: int | None = None,
                           exclude_target: int | None = None,
                           lump_targets: bool = True) -> np.ndarray:
    """Receive-side covariance of everything that is not the wanted signal.

    lump_targets=True sums the round-trip channels before the quadratic (the
    decoding-side model); False keeps per-target quadratics and drops target
    exclude_target (the radar-side model).
    """
    eff = _eff(ch, st, direct)
    n_r = eff.h_vb.shape[1] if eff.h_vb.size else ch.n_rx
    c_s = st.C_s
    m = np.zeros((n_r, n_r), dtype=complex)
    for k in range(eff.h_vb.shape[0]):
        if k == exclude_ul:
            continue
        hv = eff.h_vb[k]
        m += st.p[k] * np.outer(hv, hv.conj())
    if lump_targets:
        h_sum = eff.H_belb.sum(axis=0)
        m += h_sum @ c_s @ h_sum.conj().T
    else:
        for l in range(eff.H_belb.shape[0]):
            if l == exclude_target:
                continue
            hb = eff.H_belb[l]
            m += hb @ c_s @ hb.conj().T
    m += ch.xi_si * (eff.H_bb @ c_s @ eff.H_bb.conj().T)
    m += (ch.clutter_w + ch.sigma2) * np.eye(n_r)
    return 0.5 * (m + m.conj().T)


def sinr_ul_bs(ch: ChannelSet, st: DesignState, k: int,
               direct: DirectLinkSet | None = None) -> float:
    r = st.r[k]
    if not np.any(r):
        raise ValueError("combiner must be nonzero")
    eff = _eff(ch, st, direct)
    num = st.p[k] * abs(r.conj() @ eff.h_vb[k]) ** 2
    den = np.real(r.conj() @ ul_interference_matrix(ch, st, direct,
                                                    exclude_ul=k) @ r)
    return float(num / den)


def sinr_ul_eve(ch: ChannelSet, st: DesignState, k: int, l: int,
                direct: DirectLinkSet | None = None) -> float:
    eff = _eff(ch, st, direct)
    num = st.p[k] * abs(eff.h_ve[k, l]) ** 2
    den = sum(st.p[kp] * abs(eff.h_ve[kp, l]) ** 2
              for kp in range(eff.h_ve.shape[0]) if kp != k)
    den += _quad(eff.h_be[l], st.C_s) + ch.sigma2
    return float(num / den)


def secrecy_capacities(gamma_dl: np.ndarray, gamma_eve_dl: np.ndarray,
                       gamma_ul: np.ndarray, gamma_eve_ul: np.ndarray,
                       ) -> tuple[float, float]:
    """Worst-pair secrecy rates: min over pairs of the clamped rate gaps."""

    def worst(legit: np.ndarray, eve: np.ndarray) -> float:
        best = math.inf
        for li in range(eve.shape[0]):
            for xi in range(legit.shape[0]):
                gap = math.log2(1.0 + legit[xi]) - math.log2(1.0 + eve[li, xi])
                best = min(best, max(gap, 0.0))
        return best if best != math.inf else 0.0

    return worst(gamma_dl, gamma_eve_dl), worst(gamma_ul, gamma_eve_ul)


def beampattern(ch: ChannelSet, st: DesignState, phi0: float) -> float:
    """Reflected signal power toward azimuth phi0 (radians, panel frame).

    Small-scale quantity: no path loss, so it characterizes the panel's
    angular energy distribution rather than any receiver's power.
    """
    if st.q is None:
        return 0.0
    a_dir = ris_steering(0.0, phi0, ch.geom)
    h_b = (a_dir * st.q) @ ch.H_br  # a_R(0, phi0) diag(q) H_br, (N_t,) row
    return _quad(h_b, st.C_s)


def sensing_power(ch: ChannelSet, st: DesignState, l: int,
                  direct: DirectLinkSet | None = None) -> float:
    """Signal power arriving at target l's plane, W."""
    eff = _eff(ch, st, direct)
    return _quad(eff.h_be[l], st.C_s)


def optimal_radar_filter(ch: ChannelSet, st: DesignState, l: int,
                         direct: DirectLinkSet | None = None) -> np.ndarray:
    """Max-SINR receive filter for target l: dominant generalized eigenvector."""
    eff = _eff(ch, st, direct)
    hb = eff.H_belb[l]
    num = hb @ st.C_s @ hb.conj().T
    den = ul_interference_matrix(ch, st, direct, exclude_target=l,
                                 lump_targets=False)
    vals, vecs = scipy.linalg.eigh(0.5 * (num + num.conj().T), den)
    f = vecs[:, -1]
    return f / np.linalg.norm(f)


def echo_sinr(ch: ChannelSet, st: DesignState, l: int, f: np.ndarray,
              direct: DirectLinkSet | None = None) -> float:
    """Round-trip echo SINR for target l at receive filter f."""
    if not np.any(f):
        raise ValueError("radar filter must be nonzero")
    eff = _eff(ch, st, direct)
    hb = eff.H_belb[l]
    g = f.conj() @ hb
    num = float(np.real(g @ st.C_s @ g.conj()))
    den = float(np.real(f.conj() @ ul_interference_matrix(
        ch, st, direct, exclude_target=l, lump_targets=False) @ f))
    return num / den


def echo_sinr_factored(ch: ChannelSet, st: DesignState, l: int,
                       f: np.ndarray) -> float:
    """Algebraically factored echo SINR; valid for the reflect-only model.

    rho_l Tr[(h_be^H h_be) C_s] |f^H h_eb~|^2 / (L_bre_l f^H R f): separates
    the target-plane power from the return-path array gain.
    """
    if st.q is None:
        raise ValueError("factored form requires a reflect vector")
    eff = _eff(ch, st, None)
    h_eb_ss = ch.equivalent.Hbar_eb_ss[l] @ st.q
    ps = _quad(eff.h_be[l], st.C_s)
    gain = abs(f.conj() @ h_eb_ss) ** 2
    den = float(np.real(f.conj() @ ul_interference_matrix(
        ch, st, None, exclude_target=l, lump_targets=False) @ f))
    return float(ch.rho[l]) * ps * gain / (float(ch.pathloss["bre"][l]) * den)


def compute_report(ch: ChannelSet, st: DesignState,
                   direct: DirectLinkSet | None = None) -> MetricsReport:
    """Evaluate every metric once, sharing the effective-channel assembly."""
    jd, kd, ld = ch.n_dl, ch.n_ul, ch.n_eves
    gamma_dl = np.array([sinr_dl_user(ch, st, j, direct) for j in range(jd)])
    gamma_eve_dl = np.array([[sinr_dl_eve(ch, st, j, l, direct)
                              for j in range(jd)] for l in range(ld)])
    gamma_ul = np.array([sinr_ul_bs(ch, st, k, direct) for k in range(kd)])
    gamma_eve_ul = np.array([[sinr_ul_eve(ch, st, k, l, direct)
                              for k in range(kd)] for l in range(ld)])
    sc_dl, sc_ul = secrecy_capacities(gamma_dl, gamma_eve_dl,
                                      gamma_ul, gamma_eve_ul)
    ps = np.array([sensing_power(ch, st, l, direct) for l in range(ld)])
    echo = np.zeros(ld)
    for l in range(ld):
        f = optimal_radar_filter(ch, st, l, direct)
        echo[l] = echo_sinr(ch, st, l, f, direct)
    return MetricsReport(
        gamma_dl=gamma_dl, gamma_eve_dl=gamma_eve_dl, gamma_ul=gamma_ul,
        gamma_eve_ul=gamma_eve_ul, sc_dl=sc_dl, sc_ul=sc_ul,
        sensing_power=ps, echo_sinr=echo, total_power=st.total_power,
    )


def validate_state(st: DesignState, p_max_w: float, tol: float = 1e-6) -> None:
    """Raise if the state violates its structural invariants."""
    for j in range(st.W.shape[0]):
        _check_psd(st.W[j], f"W[{j}]", tol)
    _check_psd(st.C_z, "C_z", tol)
    if np.any(st.p < -tol):
        raise ValueError("uplink powers must be nonnegative")
    if st.q is not None:
        mod = np.abs(st.q)
        if np.max(np.abs(mod - 1.0)) > tol:
            raise ValueError("reflect phases must be unit-modulus")
    if st.total_power > p_max_w * (1.0 + tol):
        raise ValueError("total power exceeds the budget")


def _check_psd(m: np.ndarray, name: str, tol: float) -> None:
    if np.max(np.abs(m - m.conj().T)) > tol * max(1.0, float(np.abs(m).max())):
        raise ValueError(f"{name} is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    scale = max(1.0, float(w.max()) if w.size else 1.0)
    if w.size and w.min() < -tol * scale:
        raise ValueError(f"{name} is not positive semidefinite")
