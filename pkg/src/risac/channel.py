"""Channel synthesis: steering vectors, Rician fading, cascaded reflect links.

One call to :func:`synthesize` produces a frozen :class:`ChannelSet` holding
every propagation object a single network realization needs, in two forms:
the raw per-hop matrices and the reflect-combined "bar" matrices that are
linear in the reflect-phase vector q. For any unit-modulus q,

    row form      q @ Hbar_bz      == sqrt(L) * h_rz @ diag(q) @ H_br
    column form   Hbar_vb @ q      == sqrt(L) * H_rb @ diag(q) @ h_vr

so downstream quadratic forms in q never touch path-loss scalars again. The
round-trip target channels are the exception: their bars stay small-scale and
pair with the explicit two-way coefficient rho.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import (
    ArrayGeometry,
    GeometryTables,
    LinkBudget,
    ScenarioConfig,
    db2lin,
    derive_geometry,
    linearize,
)

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class RngStream:
    """Named, reproducible random stream: same (seed, label) -> same draws."""

    seed: int
    label: str = "root"

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}")

    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(self.label.encode()).digest()
        tag = int.from_bytes(digest[:8], "big")
        return np.random.default_rng(np.random.SeedSequence([self.seed, tag]))


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def steering(theta: float, phi: float, delta: float, m: int,
             wavelength: float) -> np.ndarray:
    """Uniform linear array response; angles in radians, unit-modulus entries."""
    if m < 1:
        raise ValueError("steering vector length must be >= 1")
    k = np.arange(m)
    return np.exp(-2j * math.pi * delta * k * math.cos(theta) * math.sin(phi)
                  / wavelength)


def ris_steering(theta: float, phi: float, geom: ArrayGeometry) -> np.ndarray:
    """Planar reflect-array response: vertical x horizontal Kronecker factors."""
    vert = steering(0.0, theta, geom.spacing_ris, geom.n_ris_v, geom.wavelength)
    horiz = steering(theta, phi, geom.spacing_ris, geom.n_ris_h, geom.wavelength)
    return np.kron(vert, horiz)


def path_loss_cascaded(gain_tx: float, gain_rx: float, d1: float, d2: float,
                       delta_r: float) -> float:
    """Two-hop reflect path loss, linear gains in, linear power ratio out."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("cascaded path loss requires positive distances")
    return gain_tx * gain_rx * delta_r**4 / (d1**2 * d2**2 * FOUR_PI**2)


def echo_coefficient(d_br: float, d_re: float, rcs: float, gains: LinkBudget,
                     geom: ArrayGeometry) -> float:
    """Two-way reflect echo power coefficient for one target."""
    if d_br <= 0 or d_re <= 0 or rcs <= 0:
        raise ValueError("echo coefficient requires positive distances and rcs")
    g_t = db2lin(gains.gain_tx_bs)
    g_r = db2lin(gains.gain_rx_bs)
    num = (geom.spacing_ris * geom.wavelength) ** 2 / (d_br * d_re)
    return num**2 * g_t * g_r * rcs / FOUR_PI**5


def draw_rician_matrix(los: np.ndarray, k_factor: float,
                       rng: RngStream | np.random.Generator) -> np.ndarray:
    """LoS/NLoS mixture with i.i.d. unit-variance complex Gaussian NLoS part."""
    if k_factor < 0:
        raise ValueError("k_factor must be >= 0 (linear scale)")
    if math.isinf(k_factor):
        return np.array(los, dtype=complex, copy=True)
    g = _as_generator(rng)
    nlos = (g.standard_normal(los.shape) + 1j * g.standard_normal(los.shape)) \
        / math.sqrt(2.0)
    return math.sqrt(k_factor / (k_factor + 1.0)) * los \
        + math.sqrt(1.0 / (k_factor + 1.0)) * nlos


@dataclass(frozen=True)
class EquivalentChannels:
    """Reflect-combined matrices, linear in q.

    Path loss is folded in everywhere except the *_ss pair, which stay
    small-scale because the echo composition carries sqrt(rho) explicitly.
    """

    Hbar_bu: np.ndarray    # (J, N, N_t), h_bu[j] = q @ Hbar_bu[j]
    Hbar_be: np.ndarray    # (L, N, N_t)
    Hbar_vb: np.ndarray    # (K, N_r, N), h_vb[k] = Hbar_vb[k] @ q
    hbar_vu: np.ndarray    # (K, J, N), h_vu[k,j] = q @ hbar_vu[k,j]
    hbar_ve: np.ndarray    # (K, L, N)
    Hbar_eb_ss: np.ndarray  # (L, N_r, N), target->BS small-scale cascade
    Hbar_be_ss: np.ndarray  # (L, N, N_t), BS->target small-scale cascade


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel object, immutable and shareable."""

    H_br: np.ndarray       # (N, N_t)
    H_rb: np.ndarray       # (N_r, N)
    h_ru: np.ndarray       # (J, N) rows
    h_re: np.ndarray       # (L, N) rows
    h_vr: np.ndarray       # (K, N), row k holds the length-N uplink vector
    H_er: np.ndarray       # (N, L)
    H_re: np.ndarray       # (L, N)
    pathloss: dict[str, np.ndarray | float]
    rho: np.ndarray        # (L,) two-way echo coefficients
    H_bb_dl: np.ndarray    # (N_r, N_t) deterministic leakage phase matrix
    equivalent: EquivalentChannels
    sigma2: float          # thermal noise power, W
    xi_si: float           # residual leakage power fraction, linear
    clutter_w: float       # clutter covariance scale, W
    geom: ArrayGeometry = field(default_factory=ArrayGeometry)
    ris_enabled: bool = True
    seed: int = 0

    @property
    def n_dl(self) -> int:
        return self.h_ru.shape[0]

    @property
    def n_ul(self) -> int:
        return self.h_vr.shape[0]

    @property
    def n_eves(self) -> int:
        return self.h_re.shape[0]

    @property
    def n_tx(self) -> int:
        return self.H_br.shape[1]

    @property
    def n_rx(self) -> int:
        return self.H_rb.shape[0]

    @property
    def n_ris(self) -> int:
        return self.H_br.shape[0]


@dataclass(frozen=True)
class DirectLinkSet:
    """Non-reflected channels for the benchmark modes, path loss folded in."""

    h_bu: np.ndarray       # (J, N_t)
    h_be: np.ndarray       # (L, N_t)
    h_vb: np.ndarray       # (K, N_r)
    h_vu: np.ndarray       # (K, J)
    h_ve: np.ndarray       # (K, L)
    rho: np.ndarray        # (L,) direct two-way echo coefficients
    a_echo_rx: np.ndarray  # (L, N_r) arrival responses at the target azimuths
    a_echo_tx: np.ndarray  # (L, N_t)


def synthesize(cfg: ScenarioConfig, geom_tables: GeometryTables,
               rng: RngStream) -> ChannelSet:
    """Draw one full channel realization. Pure function of (cfg, rng seed)."""
    a = cfg.arrays
    lin = linearize(cfg)
    gt = geom_tables
    lam, dr, da = a.wavelength, a.spacing_ris, a.spacing_bs
    n_t, n_r, n = a.n_tx, a.n_rx, a.n_ris
    jd, kd, ld = cfg.n_dl, cfg.n_ul, cfg.n_eves
    rad = math.radians

    a_ris_bs = ris_steering(0.0, rad(gt.az_rb), a)
    a_bs_ris_t = steering(0.0, rad(gt.az_br), da, n_t, lam)
    a_bs_ris_r = steering(0.0, rad(gt.az_br), da, n_r, lam)

    h_br = draw_rician_matrix(np.outer(a_ris_bs, a_bs_ris_t),
                              lin.kappa["bs_ris"], rng.child("H_BR"))
    h_rb = draw_rician_matrix(np.outer(a_bs_ris_r, a_ris_bs),
                              lin.kappa["bs_ris"], rng.child("H_RB"))

    g_ru = rng.child("h_RU").generator()
    h_ru = np.stack([
        draw_rician_matrix(ris_steering(0.0, rad(gt.az_ru[j]), a),
                           lin.kappa["ris_user"], g_ru)
        for j in range(jd)
    ])
    g_re = rng.child("h_RE").generator()
    h_re = np.stack([
        draw_rician_matrix(ris_steering(0.0, rad(gt.az_re[l]), a),
                           lin.kappa["ris_eve"], g_re)
        for l in range(ld)
    ])
    g_vr = rng.child("h_VR").generator()
    h_vr = np.stack([
        draw_rician_matrix(ris_steering(0.0, rad(gt.az_rv[k]), a),
                           lin.kappa["ul_ris"], g_vr)
        for k in range(kd)
    ])
    h_re_mat = h_re            # (L, N): RIS -> targets
    h_er_mat = h_re.T.copy()   # (N, L): targets -> RIS, reciprocal transpose

    pl = {
        "bru": np.array([path_loss_cascaded(lin.gain_tx_bs, lin.gain_rx_user,
                                            gt.d_br, gt.d_ru[j], dr)
                         for j in range(jd)]),
        "bre": np.array([path_loss_cascaded(lin.gain_tx_bs, lin.gain_rx_eve,
                                            gt.d_br, gt.d_re[l], dr)
                         for l in range(ld)]),
        "vrb": np.array([path_loss_cascaded(lin.gain_tx_ul, lin.gain_rx_bs,
                                            gt.d_vr[k], gt.d_br, dr)
                         for k in range(kd)]),
        "vru": np.array([[path_loss_cascaded(lin.gain_tx_ul, lin.gain_rx_user,
                                             gt.d_vr[k], gt.d_ru[j], dr)
                          for j in range(jd)] for k in range(kd)]),
        "vre": np.array([[path_loss_cascaded(lin.gain_tx_ul, lin.gain_rx_eve,
                                             gt.d_vr[k], gt.d_re[l], dr)
                          for l in range(ld)] for k in range(kd)]),
        "brb": path_loss_cascaded(lin.gain_tx_bs, lin.gain_rx_bs,
                                  gt.d_br, gt.d_br, dr),
    }
    rho = np.array([
        echo_coefficient(gt.d_br, gt.d_re[l], cfg.layout.eves[l].rcs,
                         cfg.link, a)
        for l in range(ld)
    ])

    phi0 = rad(cfg.link.self_interference.si_steer_angle)
    m_idx, n_idx = np.meshgrid(np.arange(n_r), np.arange(n_t), indexing="ij")
    h_bb_dl = np.exp(-2j * math.pi * da * m_idx * n_idx * math.sin(phi0) / lam)

    eq = EquivalentChannels(
        Hbar_bu=np.stack([math.sqrt(pl["bru"][j]) * (h_ru[j][:, None] * h_br)
                          for j in range(jd)]),
        Hbar_be=np.stack([math.sqrt(pl["bre"][l]) * (h_re[l][:, None] * h_br)
                          for l in range(ld)]),
        Hbar_vb=np.stack([math.sqrt(pl["vrb"][k]) * (h_rb * h_vr[k][None, :])
                          for k in range(kd)]),
        hbar_vu=np.stack([np.stack([math.sqrt(pl["vru"][k][j]) * h_ru[j] * h_vr[k]
                                    for j in range(jd)]) for k in range(kd)]),
        hbar_ve=np.stack([np.stack([math.sqrt(pl["vre"][k][l]) * h_re[l] * h_vr[k]
                                    for l in range(ld)]) for k in range(kd)]),
        Hbar_eb_ss=np.stack([h_rb * h_er_mat[:, l][None, :] for l in range(ld)]),
        Hbar_be_ss=np.stack([h_re_mat[l][:, None] * h_br for l in range(ld)]),
    )
    return ChannelSet(
        H_br=h_br, H_rb=h_rb, h_ru=h_ru, h_re=h_re, h_vr=h_vr,
        H_er=h_er_mat, H_re=h_re_mat, pathloss=pl, rho=rho, H_bb_dl=h_bb_dl,
        equivalent=eq, sigma2=lin.noise_w, xi_si=lin.xi_si,
        clutter_w=lin.clutter_w, geom=a, ris_enabled=True, seed=rng.seed,
    )


def _free_space(gain_tx: float, gain_rx: float, d: float, lam: float) -> float:
    return gain_tx * gain_rx * (lam / (FOUR_PI * d)) ** 2


def synthesize_direct_links(cfg: ScenarioConfig, geom_tables: GeometryTables,
                            rng: RngStream) -> DirectLinkSet:
    """Draw the non-reflected channels used by the benchmark experiments."""
    a = cfg.arrays
    lin = linearize(cfg)
    gt = geom_tables
    lam, da = a.wavelength, a.spacing_bs
    jd, kd, ld = cfg.n_dl, cfg.n_ul, cfg.n_eves
    rad = math.radians
    g = rng.child("direct").generator()
    kap_u = lin.kappa["direct"]
    kap_e = lin.kappa["ris_eve"]

    h_bu = np.stack([
        math.sqrt(_free_space(lin.gain_tx_bs, lin.gain_rx_user, gt.d_bu[j], lam))
        * draw_rician_matrix(steering(0.0, rad(gt.az_bu[j]), da, a.n_tx, lam),
                             kap_u, g)
        for j in range(jd)
    ])
    h_be = np.stack([
        math.sqrt(_free_space(lin.gain_tx_bs, lin.gain_rx_eve, gt.d_be[l], lam))
        * draw_rician_matrix(steering(0.0, rad(gt.az_be[l]), da, a.n_tx, lam),
                             kap_e, g)
        for l in range(ld)
    ])
    h_vb = np.stack([
        math.sqrt(_free_space(lin.gain_tx_ul, lin.gain_rx_bs, gt.d_bv[k], lam))
        * draw_rician_matrix(steering(0.0, rad(gt.az_bv[k]), da, a.n_rx, lam),
                             kap_u, g)
        for k in range(kd)
    ])
    h_vu = np.array([[
        math.sqrt(_free_space(lin.gain_tx_ul, lin.gain_rx_user, gt.d_vu[k, j], lam))
        * complex(draw_rician_matrix(np.ones(1, dtype=complex), kap_u, g)[0])
        for j in range(jd)] for k in range(kd)
    ])
    h_ve = np.array([[
        math.sqrt(_free_space(lin.gain_tx_ul, lin.gain_rx_eve, gt.d_ve[k, l], lam))
        * complex(draw_rician_matrix(np.ones(1, dtype=complex), kap_e, g)[0])
        for l in range(ld)] for k in range(kd)
    ])
    rho_dir = np.array([
        lin.gain_tx_bs * lin.gain_rx_bs * lam**2 * cfg.layout.eves[l].rcs
        / (FOUR_PI**3 * gt.d_be[l] ** 4)
        for l in range(ld)
    ])
    a_rx = np.stack([steering(0.0, rad(gt.az_be[l]), da, a.n_rx, lam)
                     for l in range(ld)])
    a_tx = np.stack([steering(0.0, rad(gt.az_be[l]), da, a.n_tx, lam)
                     for l in range(ld)])
    return DirectLinkSet(h_bu=h_bu, h_be=h_be, h_vb=h_vb, h_vu=h_vu, h_ve=h_ve,
                         rho=rho_dir, a_echo_rx=a_rx, a_echo_tx=a_tx)


@dataclass(frozen=True)
class EffectiveChannels:
    """End-to-end channels at a fixed reflect vector q (plus direct parts)."""

    h_bu: np.ndarray     # (J, N_t)
    h_be: np.ndarray     # (L, N_t)
    h_vb: np.ndarray     # (K, N_r)
    h_vu: np.ndarray     # (K, J)
    h_ve: np.ndarray     # (K, L)
    H_bb: np.ndarray     # (N_r, N_t)
    H_belb: np.ndarray   # (L, N_r, N_t) round-trip target channels


def effective_channels(ch: ChannelSet, q: np.ndarray | None,
                       direct: DirectLinkSet | None = None) -> EffectiveChannels:
    """Compose reflected (q given) and direct contributions per link.

    q=None models an absent reflect panel: its contributions are zero.
    """
    eq = ch.equivalent
    jd, kd, ld = ch.n_dl, ch.n_ul, ch.n_eves
    n_t, n_r = ch.n_tx, ch.n_rx

    if q is not None:
        q = np.asarray(q, dtype=complex)
        if q.shape != (ch.n_ris,):
            raise ValueError(f"q must have shape ({ch.n_ris},)")
        h_bu = np.stack([q @ eq.Hbar_bu[j] for j in range(jd)])
        h_be = np.stack([q @ eq.Hbar_be[l] for l in range(ld)])
        h_vb = np.stack([eq.Hbar_vb[k] @ q for k in range(kd)])
        h_vu = np.array([[q @ eq.hbar_vu[k, j] for j in range(jd)]
                         for k in range(kd)])
        h_ve = np.array([[q @ eq.hbar_ve[k, l] for l in range(ld)]
                         for k in range(kd)])
        h_bb = ch.H_bb_dl + math.sqrt(ch.pathloss["brb"]) \
            * (ch.H_rb * q[None, :]) @ ch.H_br
        h_belb = np.stack([
            math.sqrt(ch.rho[l])
            * np.outer(eq.Hbar_eb_ss[l] @ q, q @ eq.Hbar_be_ss[l])
            for l in range(ld)
        ])
    else:
        h_bu = np.zeros((jd, n_t), dtype=complex)
        h_be = np.zeros((ld, n_t), dtype=complex)
        h_vb = np.zeros((kd, n_r), dtype=complex)
        h_vu = np.zeros((kd, jd), dtype=complex)
        h_ve = np.zeros((kd, ld), dtype=complex)
        h_bb = ch.H_bb_dl.astype(complex)
        h_belb = np.zeros((ld, n_r, n_t), dtype=complex)

    if direct is not None:
        h_bu = h_bu + direct.h_bu
        h_be = h_be + direct.h_be
        h_vb = h_vb + direct.h_vb
        h_vu = h_vu + direct.h_vu
        h_ve = h_ve + direct.h_ve
        h_belb = h_belb + np.stack([
            math.sqrt(direct.rho[l])
            * np.outer(direct.a_echo_rx[l], direct.a_echo_tx[l])
            for l in range(ld)
        ])
    return EffectiveChannels(h_bu=h_bu, h_be=h_be, h_vb=h_vb, h_vu=h_vu,
                             h_ve=h_ve, H_bb=h_bb, H_belb=h_belb)


CHANNEL_DUMP_VERSION = 1


def save_channels(ch: ChannelSet, path: str) -> None:
    """Persist a realization for regression fixtures; format is versioned."""
    eq = ch.equivalent
    np.savez(
        path,
        version=np.array(CHANNEL_DUMP_VERSION),
        H_br=ch.H_br, H_rb=ch.H_rb, h_ru=ch.h_ru, h_re=ch.h_re, h_vr=ch.h_vr,
        H_er=ch.H_er, H_re=ch.H_re, rho=ch.rho, H_bb_dl=ch.H_bb_dl,
        pl_bru=ch.pathloss["bru"], pl_bre=ch.pathloss["bre"],
        pl_vrb=ch.pathloss["vrb"], pl_vru=ch.pathloss["vru"],
        pl_vre=ch.pathloss["vre"], pl_brb=np.array(ch.pathloss["brb"]),
        Hbar_bu=eq.Hbar_bu, Hbar_be=eq.Hbar_be, Hbar_vb=eq.Hbar_vb,
        hbar_vu=eq.hbar_vu, hbar_ve=eq.hbar_ve,
        Hbar_eb_ss=eq.Hbar_eb_ss, Hbar_be_ss=eq.Hbar_be_ss,
        scalars=np.array([ch.sigma2, ch.xi_si, ch.clutter_w,
                          float(ch.ris_enabled), float(ch.seed)]),
        geom=np.array([ch.geom.n_tx, ch.geom.n_rx, ch.geom.n_ris_h,
                       ch.geom.n_ris_v, ch.geom.spacing_bs,
                       ch.geom.spacing_ris, ch.geom.wavelength]),
    )


def load_channels(path: str) -> ChannelSet:
    with np.load(path) as d:
        version = int(d["version"])
        if version != CHANNEL_DUMP_VERSION:
            raise ValueError(f"unsupported channel dump version {version}")
        scal = d["scalars"]
        gm = d["geom"]
        geom = ArrayGeometry(n_tx=int(gm[0]), n_rx=int(gm[1]),
                             n_ris_h=int(gm[2]), n_ris_v=int(gm[3]),
                             spacing_bs=float(gm[4]), spacing_ris=float(gm[5]),
                             wavelength=float(gm[6]))
        eq = EquivalentChannels(
            Hbar_bu=d["Hbar_bu"], Hbar_be=d["Hbar_be"], Hbar_vb=d["Hbar_vb"],
            hbar_vu=d["hbar_vu"], hbar_ve=d["hbar_ve"],
            Hbar_eb_ss=d["Hbar_eb_ss"], Hbar_be_ss=d["Hbar_be_ss"],
        )
        return ChannelSet(
            H_br=d["H_br"], H_rb=d["H_rb"], h_ru=d["h_ru"], h_re=d["h_re"],
            h_vr=d["h_vr"], H_er=d["H_er"], H_re=d["H_re"],
            pathloss={"bru": d["pl_bru"], "bre": d["pl_bre"],
                      "vrb": d["pl_vrb"], "vru": d["pl_vru"],
                      "vre": d["pl_vre"], "brb": float(d["pl_brb"])},
            rho=d["rho"], H_bb_dl=d["H_bb_dl"], equivalent=eq,
            sigma2=float(scal[0]), xi_si=float(scal[1]),
            clutter_w=float(scal[2]), geom=geom, ris_enabled=bool(scal[3]),
            seed=int(scal[4]),
        )


def synthesize_from_config(cfg: ScenarioConfig,
                           seed: int | None = None) -> ChannelSet:
    """Convenience wrapper: geometry plus a root stream from the config seed."""
    s = cfg.budgets.seed if seed is None else seed
    return synthesize(cfg, derive_geometry(cfg), RngStream(s))
