"""Network configuration: arrays, node placement, link budgets, thresholds, budgets.

All angles are degrees, distances meters and powers/gains dB(i) in configs and
scenario files; conversion to linear scale happens exactly once, in
:func:`linearize`. Everything downstream of it works in linear units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

BOLTZMANN = 1.380649e-23  # J/K

# Rician K-factor map keys, fixed vocabulary. "ris_eve" defaults to the
# pure-LoS sentinel (inf); "direct" only matters in direct-link mode.
RICIAN_CLASSES = ("bs_ris", "ris_user", "ul_ris", "ris_eve", "direct")


class ScenarioError(ValueError):
    """Invalid scenario content; message names the offending key."""


class DegenerateGeometry(ScenarioError):
    """Node placement collapses a link distance to zero."""


def db2lin(x_db: float) -> float:
    return float(10.0 ** (x_db / 10.0))


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x)


# ---------------------------------------------------------------------------
# config dataclasses


@dataclass(frozen=True)
class ArrayGeometry:
    """BS array and RIS panel dimensions."""

    n_tx: int = 8
    n_rx: int = 8
    n_ris_h: int = 5
    n_ris_v: int = 5
    spacing_bs: float = 0.0425   # m
    spacing_ris: float = 0.0425  # m
    wavelength: float = 0.085    # m

    @property
    def n_ris(self) -> int:
        return self.n_ris_h * self.n_ris_v


@dataclass(frozen=True)
class RisPlacement:
    distance_from_bs: float = 22.0
    azimuth_from_bs: float = -40.0
    # Panel normal direction in the world frame (degrees, BS-polar convention).
    # +90 points the panel at the service area for the default layout.
    broadside_azimuth: float = 90.0


@dataclass(frozen=True)
class NodePlacement:
    distance: float
    azimuth: float


@dataclass(frozen=True)
class EvePlacement:
    distance: float
    azimuth: float
    rcs: float = 0.1  # m^2


@dataclass(frozen=True)
class NodeLayout:
    bs_position: tuple[float, float] = (0.0, 0.0)
    ris: RisPlacement = field(default_factory=RisPlacement)
    dl_users: tuple[NodePlacement, ...] = ()
    ul_users: tuple[NodePlacement, ...] = ()
    eves: tuple[EvePlacement, ...] = ()


@dataclass(frozen=True)
class NoiseSpec:
    noise_figure: float = 5.0    # dB
    bandwidth: float = 50e6      # Hz
    temperature: float = 298.0   # K


@dataclass(frozen=True)
class SelfInterference:
    residual_db: float = -110.0
    si_steer_angle: float = 0.0  # degrees, fixes the deterministic SI matrix


@dataclass(frozen=True)
class LinkBudget:
    gain_tx_bs: float = 25.0   # dBi
    gain_rx_bs: float = 25.0
    gain_rx_user: float = 12.0
    gain_rx_eve: float = 12.0
    gain_tx_ul: float = 17.0
    rician_k: dict[str, float] = field(default_factory=lambda: {
        "bs_ris": 20.0, "ris_user": 20.0, "ul_ris": 20.0,
        "ris_eve": math.inf, "direct": 20.0,
    })
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    self_interference: SelfInterference = field(default_factory=SelfInterference)
    clutter_power: float = 0.0  # W, scales an identity clutter covariance


@dataclass(frozen=True)
class Thresholds:
    gamma_dl_min: float = 10.0      # dB
    gamma_ul_min: float = 5.0       # dB
    gamma_eve_dl_max: float = 5.0   # dB
    gamma_eve_ul_max: float = 5.0   # dB
    p_max: float = 25.0             # dB relative to 1 W


@dataclass(frozen=True)
class Budgets:
    ao_iters: int = 10
    sca_iters: int = 3
    ris_iters: int = 2
    randomization_draws: int = 50
    solver_tol: float = 1e-7
    seed: int = 0
    # Optional relative-improvement early stop for the outer loop (None disables).
    early_stop_rel: float | None = 1e-4
    # Keep the best metrics-verified state across outer iterations.
    monotone_guard: bool = True
    # Refresh combiners after each channel recomputation.
    refresh_combiners: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    arrays: ArrayGeometry = field(default_factory=ArrayGeometry)
    layout: NodeLayout = field(default_factory=NodeLayout)
    link: LinkBudget = field(default_factory=LinkBudget)
    thresholds: Thresholds = field(default_factory=Thresholds)
    budgets: Budgets = field(default_factory=Budgets)
    direct_links: bool = False

    @property
    def n_dl(self) -> int:
        return len(self.layout.dl_users)

    @property
    def n_ul(self) -> int:
        return len(self.layout.ul_users)

    @property
    def n_eves(self) -> int:
        return len(self.layout.eves)


@dataclass(frozen=True)
class LinearParams:
    """All scalar link-budget quantities in linear units. Built once per config."""

    noise_w: float
    p_max_w: float
    gamma_dl_min: float
    gamma_ul_min: float
    gamma_eve_dl_max: float
    gamma_eve_ul_max: float
    gain_tx_bs: float
    gain_rx_bs: float
    gain_rx_user: float
    gain_rx_eve: float
    gain_tx_ul: float
    kappa: dict[str, float]
    xi_si: float
    clutter_w: float


def equidistant_azimuths(lo: float, hi: float, n: int) -> list[float]:
    """n azimuths on [lo, hi] with equal consecutive gaps; midpoint when n=1."""
    if n < 1:
        raise ScenarioError("node count must be >= 1")
    if n == 1:
        return [(lo + hi) / 2.0]
    return [lo + i * (hi - lo) / (n - 1) for i in range(n)]


def default_scenario() -> ScenarioConfig:
    """Baseline configuration: 5x5 RIS, 8x8 BS arrays, J=L=2, K=3."""
    dl = tuple(NodePlacement(30.0, az) for az in equidistant_azimuths(-15.0, 5.0, 2))
    ul = tuple(NodePlacement(20.0, az) for az in equidistant_azimuths(20.0, 30.0, 3))
    ev = tuple(EvePlacement(20.0, az) for az in equidistant_azimuths(-35.0, -15.0, 2))
    return ScenarioConfig(layout=NodeLayout(dl_users=dl, ul_users=ul, eves=ev))


def noise_power(budget: LinkBudget) -> float:
    """Thermal noise power N_F*k_B*T*B in watts."""
    n = budget.noise
    if n.bandwidth <= 0 or n.temperature <= 0:
        raise ScenarioError("noise.bandwidth and noise.temperature must be > 0")
    return db2lin(n.noise_figure) * BOLTZMANN * n.temperature * n.bandwidth


def linearize(cfg: ScenarioConfig) -> LinearParams:
    """Convert every dB quantity to linear scale. The only dB->linear site."""
    lb, th = cfg.link, cfg.thresholds
    kappa = {}
    for cls in RICIAN_CLASSES:
        k_db = lb.rician_k[cls]
        kappa[cls] = math.inf if math.isinf(k_db) else db2lin(k_db)
    return LinearParams(
        noise_w=noise_power(lb),
        p_max_w=db2lin(th.p_max),
        gamma_dl_min=db2lin(th.gamma_dl_min),
        gamma_ul_min=db2lin(th.gamma_ul_min),
        gamma_eve_dl_max=db2lin(th.gamma_eve_dl_max),
        gamma_eve_ul_max=db2lin(th.gamma_eve_ul_max),
        gain_tx_bs=db2lin(lb.gain_tx_bs),
        gain_rx_bs=db2lin(lb.gain_rx_bs),
        gain_rx_user=db2lin(lb.gain_rx_user),
        gain_rx_eve=db2lin(lb.gain_rx_eve),
        gain_tx_ul=db2lin(lb.gain_tx_ul),
        kappa=kappa,
        xi_si=db2lin(lb.self_interference.residual_db),
        clutter_w=lb.clutter_power,
    )


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class GeometryTables:
    """Cartesian positions plus every distance/azimuth channel synthesis needs.

    Azimuths are degrees. az_r* are measured from the RIS broadside normal,
    az_b* from the BS broadside (+x axis); both counterclockwise-positive.
    """

    pos_bs: np.ndarray
    pos_ris: np.ndarray
    pos_dl: np.ndarray   # (J, 2)
    pos_ul: np.ndarray   # (K, 2)
    pos_eves: np.ndarray  # (L, 2)
    d_br: float
    d_ru: np.ndarray     # (J,)
    d_re: np.ndarray     # (L,)
    d_vr: np.ndarray     # (K,)
    d_bu: np.ndarray
    d_be: np.ndarray
    d_bv: np.ndarray
    d_vu: np.ndarray     # (K, J)
    d_ve: np.ndarray     # (K, L)
    az_rb: float
    az_ru: np.ndarray
    az_re: np.ndarray
    az_rv: np.ndarray
    az_bu: np.ndarray
    az_be: np.ndarray
    az_bv: np.ndarray
    az_br: float


def _polar(origin: np.ndarray, dist: float, az_deg: float) -> np.ndarray:
    a = math.radians(az_deg)
    return origin + dist * np.array([math.cos(a), math.sin(a)])


def _rel_azimuth(broadside_deg: float, origin: np.ndarray, target: np.ndarray) -> float:
    """Signed angle (deg) of target seen from origin, relative to broadside."""
    v = target - origin
    b = math.radians(broadside_deg)
    bx, by = math.cos(b), math.sin(b)
    return math.degrees(math.atan2(bx * v[1] - by * v[0], bx * v[0] + by * v[1]))


def derive_geometry(cfg: ScenarioConfig) -> GeometryTables:
    """Place every node in the plane and tabulate distances and RIS-frame azimuths."""
    lay = cfg.layout
    bs = np.asarray(lay.bs_position, dtype=float)
    ris = _polar(bs, lay.ris.distance_from_bs, lay.ris.azimuth_from_bs)
    pos_dl = np.array([_polar(bs, u.distance, u.azimuth) for u in lay.dl_users]).reshape(-1, 2)
    pos_ul = np.array([_polar(bs, u.distance, u.azimuth) for u in lay.ul_users]).reshape(-1, 2)
    pos_ev = np.array([_polar(bs, e.distance, e.azimuth) for e in lay.eves]).reshape(-1, 2)

    def dists(pts: np.ndarray, ref: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - ref, axis=1) if len(pts) else np.zeros(0)

    d_ru, d_re, d_vr = dists(pos_dl, ris), dists(pos_ev, ris), dists(pos_ul, ris)
    for name, arr in (("dl_users", d_ru), ("eves", d_re), ("ul_users", d_vr)):
        if arr.size and float(arr.min()) < 1e-9:
            raise DegenerateGeometry(f"layout.{name}: node coincides with the RIS")
    d_br = float(np.linalg.norm(ris - bs))
    if d_br < 1e-9:
        raise DegenerateGeometry("layout.ris: RIS coincides with the BS")

    bside = lay.ris.broadside_azimuth
    return GeometryTables(
        pos_bs=bs, pos_ris=ris, pos_dl=pos_dl, pos_ul=pos_ul, pos_eves=pos_ev,
        d_br=d_br, d_ru=d_ru, d_re=d_re, d_vr=d_vr,
        d_bu=dists(pos_dl, bs), d_be=dists(pos_ev, bs), d_bv=dists(pos_ul, bs),
        d_vu=np.array([[np.linalg.norm(u - v) for u in pos_dl] for v in pos_ul]).reshape(len(pos_ul), len(pos_dl)),
        d_ve=np.array([[np.linalg.norm(e - v) for e in pos_ev] for v in pos_ul]).reshape(len(pos_ul), len(pos_ev)),
        az_rb=_rel_azimuth(bside, ris, bs),
        az_ru=np.array([_rel_azimuth(bside, ris, p) for p in pos_dl]),
        az_re=np.array([_rel_azimuth(bside, ris, p) for p in pos_ev]),
        az_rv=np.array([_rel_azimuth(bside, ris, p) for p in pos_ul]),
        az_bu=np.array([u.azimuth for u in lay.dl_users], dtype=float),
        az_be=np.array([e.azimuth for e in lay.eves], dtype=float),
        az_bv=np.array([u.azimuth for u in lay.ul_users], dtype=float),
        az_br=lay.ris.azimuth_from_bs,
    )


# ---------------------------------------------------------------------------
# file round trip

def _require_keys(d: dict, allowed: tuple[str, ...], section: str) -> None:
    for key in d:
        if key not in allowed:
            raise ScenarioError(f"unknown key '{key}' in section '{section}'")


def _num(d: dict, key: str, section: str, default=None):
    if key not in d:
        if default is None:
            raise ScenarioError(f"missing key '{key}' in section '{section}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"key '{section}.{key}' must be a number")
    return v


def config_to_dict(cfg: ScenarioConfig) -> dict:
    a, lay, lb, th, bg = cfg.arrays, cfg.layout, cfg.link, cfg.thresholds, cfg.budgets
    return {
        "arrays": {
            "n_tx": a.n_tx, "n_rx": a.n_rx, "n_ris_h": a.n_ris_h, "n_ris_v": a.n_ris_v,
            "spacing_bs": a.spacing_bs, "spacing_ris": a.spacing_ris,
            "wavelength": a.wavelength,
        },
        "layout": {
            "bs_position": list(lay.bs_position),
            "ris": {
                "distance_from_bs": lay.ris.distance_from_bs,
                "azimuth_from_bs": lay.ris.azimuth_from_bs,
                "broadside_azimuth": lay.ris.broadside_azimuth,
            },
            "dl_users": [{"distance": u.distance, "azimuth": u.azimuth} for u in lay.dl_users],
            "ul_users": [{"distance": u.distance, "azimuth": u.azimuth} for u in lay.ul_users],
            "eves": [{"distance": e.distance, "azimuth": e.azimuth, "rcs": e.rcs} for e in lay.eves],
        },
        "link": {
            "gain_tx_bs": lb.gain_tx_bs, "gain_rx_bs": lb.gain_rx_bs,
            "gain_rx_user": lb.gain_rx_user, "gain_rx_eve": lb.gain_rx_eve,
            "gain_tx_ul": lb.gain_tx_ul,
            "rician_k": dict(lb.rician_k),
            "noise": {
                "noise_figure": lb.noise.noise_figure,
                "bandwidth": lb.noise.bandwidth,
                "temperature": lb.noise.temperature,
            },
            "self_interference": {
                "residual_db": lb.self_interference.residual_db,
                "si_steer_angle": lb.self_interference.si_steer_angle,
            },
            "clutter_power": lb.clutter_power,
        },
        "thresholds": {
            "gamma_dl_min": th.gamma_dl_min, "gamma_ul_min": th.gamma_ul_min,
            "gamma_eve_dl_max": th.gamma_eve_dl_max,
            "gamma_eve_ul_max": th.gamma_eve_ul_max, "p_max": th.p_max,
        },
        "budgets": {
            "ao_iters": bg.ao_iters, "sca_iters": bg.sca_iters,
            "ris_iters": bg.ris_iters, "randomization_draws": bg.randomization_draws,
            "solver_tol": bg.solver_tol, "seed": bg.seed,
            "early_stop_rel": bg.early_stop_rel,
            "monotone_guard": bg.monotone_guard,
            "refresh_combiners": bg.refresh_combiners,
        },
        "direct_links": cfg.direct_links,
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    _require_keys(data, ("arrays", "layout", "link", "thresholds", "budgets", "direct_links"), "<root>")
    base = default_scenario()

    a = data.get("arrays", {})
    _require_keys(a, ("n_tx", "n_rx", "n_ris_h", "n_ris_v", "spacing_bs", "spacing_ris", "wavelength"), "arrays")
    ad = base.arrays
    arrays = ArrayGeometry(
        n_tx=int(_num(a, "n_tx", "arrays", ad.n_tx)),
        n_rx=int(_num(a, "n_rx", "arrays", ad.n_rx)),
        n_ris_h=int(_num(a, "n_ris_h", "arrays", ad.n_ris_h)),
        n_ris_v=int(_num(a, "n_ris_v", "arrays", ad.n_ris_v)),
        spacing_bs=float(_num(a, "spacing_bs", "arrays", ad.spacing_bs)),
        spacing_ris=float(_num(a, "spacing_ris", "arrays", ad.spacing_ris)),
        wavelength=float(_num(a, "wavelength", "arrays", ad.wavelength)),
    )

    lay = data.get("layout", {})
    _require_keys(lay, ("bs_position", "ris", "dl_users", "ul_users", "eves"), "layout")
    rd = lay.get("ris", {})
    _require_keys(rd, ("distance_from_bs", "azimuth_from_bs", "broadside_azimuth"), "layout.ris")
    rb = base.layout.ris
    ris = RisPlacement(
        distance_from_bs=float(_num(rd, "distance_from_bs", "layout.ris", rb.distance_from_bs)),
        azimuth_from_bs=float(_num(rd, "azimuth_from_bs", "layout.ris", rb.azimuth_from_bs)),
        broadside_azimuth=float(_num(rd, "broadside_azimuth", "layout.ris", rb.broadside_azimuth)),
    )

    def nodes(key: str, cls, extra=()):
        raw = lay.get(key)
        if raw is None:
            return getattr(base.layout, key)
        out = []
        for i, nd in enumerate(raw):
            sec = f"layout.{key}[{i}]"
            _require_keys(nd, ("distance", "azimuth") + extra, sec)
            kw = {"distance": float(_num(nd, "distance", sec)),
                  "azimuth": float(_num(nd, "azimuth", sec))}
            if "rcs" in extra:
                kw["rcs"] = float(_num(nd, "rcs", sec, EvePlacement.rcs))
            out.append(cls(**kw))
        return tuple(out)

    bs_pos = lay.get("bs_position", list(base.layout.bs_position))
    if not (isinstance(bs_pos, (list, tuple)) and len(bs_pos) == 2):
        raise ScenarioError("layout.bs_position must be a 2-element list")
    layout = NodeLayout(
        bs_position=(float(bs_pos[0]), float(bs_pos[1])),
        ris=ris,
        dl_users=nodes("dl_users", NodePlacement),
        ul_users=nodes("ul_users", NodePlacement),
        eves=nodes("eves", EvePlacement, extra=("rcs",)),
    )

    lb = data.get("link", {})
    _require_keys(lb, ("gain_tx_bs", "gain_rx_bs", "gain_rx_user", "gain_rx_eve", "gain_tx_ul",
                       "rician_k", "noise", "self_interference", "clutter_power"), "link")
    kd = lb.get("rician_k", dict(base.link.rician_k))
    _require_keys(kd, RICIAN_CLASSES, "link.rician_k")
    rician = dict(base.link.rician_k)
    for cls in RICIAN_CLASSES:
        if cls in kd:
            rician[cls] = float(kd[cls])
    nz = lb.get("noise", {})
    _require_keys(nz, ("noise_figure", "bandwidth", "temperature"), "link.noise")
    nb = base.link.noise
    si = lb.get("self_interference", {})
    _require_keys(si, ("residual_db", "si_steer_angle"), "link.self_interference")
    sb = base.link.self_interference
    link = LinkBudget(
        gain_tx_bs=float(_num(lb, "gain_tx_bs", "link", base.link.gain_tx_bs)),
        gain_rx_bs=float(_num(lb, "gain_rx_bs", "link", base.link.gain_rx_bs)),
        gain_rx_user=float(_num(lb, "gain_rx_user", "link", base.link.gain_rx_user)),
        gain_rx_eve=float(_num(lb, "gain_rx_eve", "link", base.link.gain_rx_eve)),
        gain_tx_ul=float(_num(lb, "gain_tx_ul", "link", base.link.gain_tx_ul)),
        rician_k=rician,
        noise=NoiseSpec(
            noise_figure=float(_num(nz, "noise_figure", "link.noise", nb.noise_figure)),
            bandwidth=float(_num(nz, "bandwidth", "link.noise", nb.bandwidth)),
            temperature=float(_num(nz, "temperature", "link.noise", nb.temperature)),
        ),
        self_interference=SelfInterference(
            residual_db=float(_num(si, "residual_db", "link.self_interference", sb.residual_db)),
            si_steer_angle=float(_num(si, "si_steer_angle", "link.self_interference", sb.si_steer_angle)),
        ),
        clutter_power=float(_num(lb, "clutter_power", "link", base.link.clutter_power)),
    )

    th = data.get("thresholds", {})
    _require_keys(th, ("gamma_dl_min", "gamma_ul_min", "gamma_eve_dl_max", "gamma_eve_ul_max", "p_max"), "thresholds")
    tb = base.thresholds
    thresholds = Thresholds(
        gamma_dl_min=float(_num(th, "gamma_dl_min", "thresholds", tb.gamma_dl_min)),
        gamma_ul_min=float(_num(th, "gamma_ul_min", "thresholds", tb.gamma_ul_min)),
        gamma_eve_dl_max=float(_num(th, "gamma_eve_dl_max", "thresholds", tb.gamma_eve_dl_max)),
        gamma_eve_ul_max=float(_num(th, "gamma_eve_ul_max", "thresholds", tb.gamma_eve_ul_max)),
        p_max=float(_num(th, "p_max", "thresholds", tb.p_max)),
    )

    bg = data.get("budgets", {})
    _require_keys(bg, ("ao_iters", "sca_iters", "ris_iters", "randomization_draws",
                       "solver_tol", "seed", "early_stop_rel", "monotone_guard",
                       "refresh_combiners"), "budgets")
    bb = base.budgets
    early = bg.get("early_stop_rel", bb.early_stop_rel)
    budgets = Budgets(
        ao_iters=int(_num(bg, "ao_iters", "budgets", bb.ao_iters)),
        sca_iters=int(_num(bg, "sca_iters", "budgets", bb.sca_iters)),
        ris_iters=int(_num(bg, "ris_iters", "budgets", bb.ris_iters)),
        randomization_draws=int(_num(bg, "randomization_draws", "budgets", bb.randomization_draws)),
        solver_tol=float(_num(bg, "solver_tol", "budgets", bb.solver_tol)),
        seed=int(_num(bg, "seed", "budgets", bb.seed)),
        early_stop_rel=None if early is None else float(early),
        monotone_guard=bool(bg.get("monotone_guard", bb.monotone_guard)),
        refresh_combiners=bool(bg.get("refresh_combiners", bb.refresh_combiners)),
    )

    cfg = ScenarioConfig(arrays=arrays, layout=layout, link=link,
                         thresholds=thresholds, budgets=budgets,
                         direct_links=bool(data.get("direct_links", False)))
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    """Raise ScenarioError naming the first offending key."""
    a = cfg.arrays
    for key in ("n_tx", "n_rx", "n_ris_h", "n_ris_v"):
        if getattr(a, key) < 1:
            raise ScenarioError(f"arrays.{key} must be >= 1")
    for key in ("spacing_bs", "spacing_ris", "wavelength"):
        if getattr(a, key) <= 0:
            raise ScenarioError(f"arrays.{key} must be > 0")
    lay = cfg.layout
    if len(lay.dl_users) < 1:
        raise ScenarioError("layout.dl_users must contain at least one node")
    if len(lay.ul_users) < 1:
        raise ScenarioError("layout.ul_users must contain at least one node")
    if len(lay.eves) < 1:
        raise ScenarioError("layout.eves must contain at least one node")
    if lay.ris.distance_from_bs <= 0:
        raise ScenarioError("layout.ris.distance_from_bs must be > 0")
    for name, group in (("dl_users", lay.dl_users), ("ul_users", lay.ul_users), ("eves", lay.eves)):
        for i, nd in enumerate(group):
            if nd.distance <= 0:
                raise ScenarioError(f"layout.{name}[{i}].distance must be > 0")
    for i, e in enumerate(lay.eves):
        if e.rcs <= 0:
            raise ScenarioError(f"layout.eves[{i}].rcs must be > 0")
    nz = cfg.link.noise
    if nz.bandwidth <= 0:
        raise ScenarioError("link.noise.bandwidth must be > 0")
    if nz.temperature <= 0:
        raise ScenarioError("link.noise.temperature must be > 0")
    for cls in RICIAN_CLASSES:
        if cls not in cfg.link.rician_k:
            raise ScenarioError(f"link.rician_k.{cls} is missing")
    th = cfg.thresholds
    for key in ("gamma_dl_min", "gamma_ul_min", "gamma_eve_dl_max", "gamma_eve_ul_max", "p_max"):
        if not math.isfinite(getattr(th, key)):
            raise ScenarioError(f"thresholds.{key} must be finite")
    bg = cfg.budgets
    for key in ("ao_iters", "sca_iters", "ris_iters", "randomization_draws"):
        if getattr(bg, key) < 1:
            raise ScenarioError(f"budgets.{key} must be >= 1")
    if bg.solver_tol <= 0:
        raise ScenarioError("budgets.solver_tol must be > 0")


def save_scenario(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def load_scenario(path: str) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data if data is not None else {})


def scenario_yaml(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
