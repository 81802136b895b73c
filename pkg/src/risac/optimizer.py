"""Alternating-optimization engine: combiners, beamforming SCA, reflect-phase SDR.

The design problem maximizes the worst per-target sensing power subject to
downlink/uplink SINR floors, eavesdropper SINR caps, and a total transmit
power budget.  It alternates between two conic subproblems:

* beamforming step: downlink covariances, jamming covariance, and uplink
  powers, with the uplink SINR constraint convexified around the previous
  iterate (first-order surrogate of the interference matrix plus an exact
  2x2 epigraph block for the threshold/power ratio);
* reflect step: the unit-modulus phase vector lifted to a PSD matrix with
  unit diagonal (rank relaxed), then snapped back to a phase vector by
  Gaussian randomization scored through the metrics module.

Uplink receive combiners have a closed form and are computed outside the
conic machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la

from .channel import (ChannelSet, DirectLinkSet, RngStream,
                      effective_channels, ris_steering,
                      synthesize_direct_links, synthesize_from_config)
from .conic import ConicProblem, TraceAffine, herm, solve
from .metrics import (DesignState, MetricsReport, compute_report,
                      sensing_power, sinr_dl_eve, sinr_dl_user, sinr_ul_eve,
                      ul_interference_matrix)
from .scenario import (Budgets, LinearParams, ScenarioConfig,
                       derive_geometry, linearize)

# Lower bound on uplink powers; keeps the threshold/power ratio finite.
P_FLOOR_W = 1e-9
# Feasibility margin when scoring randomization candidates (relative).
# Slightly tighter than the 1e-5 audit slack so accepted candidates pass it.
_CAND_RTOL = 5e-6


class SubproblemInfeasible(Exception):
    """First beamforming subproblem of a loop admitted no solution."""


@dataclass(frozen=True)
class SubproblemTrace:
    """One inner-iteration record of either conic subproblem."""

    kind: str  # "beamforming" | "reflect"
    outer_iteration: int
    iteration: int
    status: str
    objective: float | None
    slacks: dict[str, float]
    rank_one_ratios: dict[str, float]


@dataclass(frozen=True)
class RandomizationResult:
    q: np.ndarray
    feasible: bool
    objective: float
    violation: float
    index: int


@dataclass(frozen=True)
class AoResult:
    """Outcome of one alternating-optimization run."""

    state: DesignState
    report: MetricsReport
    objective: float  # achieved min-over-targets sensing power, W
    feasible: bool
    termination: str  # "converged" | "budget_exhausted" | "infeasible"
    outer_reports: tuple[MetricsReport, ...]
    objective_trace: tuple[float, ...]
    sca_traces: tuple[SubproblemTrace, ...]
    ris_traces: tuple[SubproblemTrace, ...]
    audits: tuple[dict, ...]
    flags: tuple[str, ...]


# ---------------------------------------------------------------------------
# quadratic-form coefficients
#
# The conic layer pairs Tr[C X].  Two outer-product builders cover both vector
# conventions in use: channels acting on the left of a covariance (rows) and
# filtered channel columns.
# ---------------------------------------------------------------------------

def _row_outer(h: np.ndarray) -> np.ndarray:
    """C with Tr[C X] = h X h^H for a row-convention channel h."""
    return np.outer(h.conj(), h)


def _col_outer(v: np.ndarray) -> np.ndarray:
    """C with Tr[C X] = v^H X v for a column vector v."""
    return np.outer(v, v.conj())


def _rank_one_ratio(m: np.ndarray) -> float:
    tr = float(np.real(np.trace(m)))
    if tr <= 0.0:
        return 0.0
    return float(la.eigvalsh(herm(m))[-1]) / tr


def _family_slacks(problem: ConicProblem,
                   values: dict[str, np.ndarray | float]) -> dict[str, float]:
    """Minimum feasibility slack per constraint family (label prefix)."""
    slacks: dict[str, float] = {}
    for c in problem.constraints:
        value = c.expr.evaluate(values)
        if c.sense == "<=":
            s = -value
        elif c.sense == ">=":
            s = value
        else:
            s = -abs(value)
        family = c.label.split("_")[0] if c.label else "unlabeled"
        slacks[family] = min(slacks.get(family, math.inf), s)
    return slacks


# ---------------------------------------------------------------------------
# closed-form uplink combiners
# ---------------------------------------------------------------------------

def optimal_combiners(ch: ChannelSet, st: DesignState,
                      direct: DirectLinkSet | None = None) -> np.ndarray:
    """Max-SINR receive combiners, one row per uplink user.

    r_k solves the interference-whitened matched filter D_k^-1 h_k; any
    rescaling leaves the SINR unchanged.  A user whose channel vanishes
    (no reflect panel and no direct link) gets a basis vector so that
    downstream ratios stay defined.
    """
    eff = effective_channels(ch, st.q, direct)
    out = np.zeros((ch.n_ul, ch.n_rx), dtype=complex)
    for k in range(ch.n_ul):
        d_k = ul_interference_matrix(ch, st, direct, exclude_ul=k)
        h = eff.h_vb[k]
        if not np.any(h):
            out[k, 0] = 1.0
            continue
        out[k] = la.solve(d_k, h, assume_a="pos")
    return out


def _optimal_ul_sinrs(ch: ChannelSet, st: DesignState,
                      direct: DirectLinkSet | None = None) -> np.ndarray:
    """Per-user uplink SINR at the optimal combiner, p_k h^H D_k^-1 h.

    Shares one factorization: with D the all-user interference matrix,
    D_k = D - p_k h_k h_k^H, and the rank-one downdate gives
    h^H D_k^-1 h = x / (1 - p_k x) for x = h^H D^-1 h (p_k x < 1 always).
    """
    eff = effective_channels(ch, st.q, direct)
    d_all = ul_interference_matrix(ch, st, direct, exclude_ul=None)
    factor = la.cho_factor(d_all)
    out = np.zeros(ch.n_ul)
    for k in range(ch.n_ul):
        h = eff.h_vb[k]
        if not np.any(h):
            continue
        x = float(np.real(np.vdot(h, la.cho_solve(factor, h))))
        denom = max(1.0 - st.p[k] * x, 1e-300)
        out[k] = st.p[k] * x / denom
    return out


# ---------------------------------------------------------------------------
# beamforming subproblem (covariances, jamming, uplink powers)
# ---------------------------------------------------------------------------

def c3_linearization(ch: ChannelSet, st_prev: DesignState,
                     direct: DirectLinkSet | None = None) -> list[dict]:
    """Per-user pieces of the convexified uplink SINR constraint.

    Freezes the interference matrix at the previous iterate and expands the
    whitened SINR to first order.  For user k with u = D_prev^-1 h and
    c = h^H u, the surrogate constraint reads

        t_k - 2 c + u^H D(p, W, C_z) u <= 0,   t_k >= gamma / p_k,

    which is tight at the previous iterate (u^H D_prev u = c).  Returns, per
    user: u, c, the covariance coefficient A (echo plus self-interference
    quadratics), cross-power coefficients, and the constant noise term.
    """
    eff = effective_channels(ch, st_prev.q, direct)
    h_beb = eff.H_belb.sum(axis=0)
    pieces = []
    for k in range(ch.n_ul):
        d_prev = ul_interference_matrix(ch, st_prev, direct, exclude_ul=k)
        h = eff.h_vb[k]
        u = la.solve(d_prev, h, assume_a="pos")
        c = float(np.real(np.vdot(h, u)))
        v = h_beb.conj().T @ u
        w = eff.H_bb.conj().T @ u
        a = herm(_col_outer(v) + ch.xi_si * _col_outer(w))
        cross = np.array([abs(np.vdot(u, eff.h_vb[kp])) ** 2
                          for kp in range(ch.n_ul)])
        noise = (ch.sigma2 + ch.clutter_w) * float(np.real(np.vdot(u, u)))
        pieces.append({"u": u, "c": c, "cov_coeff": a,
                       "cross": cross, "noise": noise})
    return pieces


def build_subproblem_w(ch: ChannelSet, st_prev: DesignState,
                       thresholds: LinearParams,
                       direct: DirectLinkSet | None = None) -> ConicProblem:
    """Conic program over downlink covariances, jamming, and uplink powers.

    Reflect phases are frozen at st_prev.q.  Constraint families: downlink
    user SINR floors, eavesdropper downlink caps, the convexified uplink
    floors (surrogate plus epigraph block), eavesdropper uplink caps, the
    power budget, per-target sensing floors tied to the objective, and the
    uplink power floor.
    """
    eff = effective_channels(ch, st_prev.q, direct)
    jd, kd, ld = ch.n_dl, ch.n_ul, ch.n_eves
    s2 = ch.sigma2
    t = thresholds

    p = ConicProblem(direction="max")
    w_names = [p.add_psd(f"W_{j}", ch.n_tx) for j in range(jd)]
    cz = p.add_psd("C_z", ch.n_tx)
    t_names = [p.add_psd(f"T_{k}", 2) for k in range(kd)]
    p_names = [p.add_scalar(f"p_{k}", nonneg=True) for k in range(kd)]
    alpha = p.add_scalar("alpha")

    cov_names = list(w_names) + [cz]

    # downlink user SINR floors
    for j in range(jd):
        outer = _row_outer(eff.h_bu[j])
        expr = TraceAffine().add_trace(w_names[j], outer)
        for name in cov_names:
            if name != w_names[j]:
                expr.add_trace(name, -t.gamma_dl_min * outer)
        for k in range(kd):
            expr.add_scalar(p_names[k],
                            -t.gamma_dl_min * abs(eff.h_vu[k, j]) ** 2)
        expr.add_const(-t.gamma_dl_min * s2)
        p.add_constraint(expr, ">=", f"dlfloor_j{j}")

    # eavesdropper downlink caps, per (eve, stream)
    for l in range(ld):
        outer = _row_outer(eff.h_be[l])
        for j in range(jd):
            expr = TraceAffine().add_trace(w_names[j], outer)
            for name in cov_names:
                if name != w_names[j]:
                    expr.add_trace(name, -t.gamma_eve_dl_max * outer)
            for k in range(kd):
                expr.add_scalar(p_names[k],
                                -t.gamma_eve_dl_max * abs(eff.h_ve[k, l]) ** 2)
            expr.add_const(-t.gamma_eve_dl_max * s2)
            p.add_constraint(expr, "<=", f"dlcap_l{l}_j{j}")

    # uplink SINR floors: surrogate + epigraph
    sqrt_g = math.sqrt(t.gamma_ul_min)
    e00 = np.array([[1.0, 0.0], [0.0, 0.0]])
    e11 = np.array([[0.0, 0.0], [0.0, 1.0]])
    e01_re = np.array([[0.0, 1.0], [1.0, 0.0]])
    e01_im = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
    for k, piece in enumerate(c3_linearization(ch, st_prev, direct)):
        expr = TraceAffine().add_trace(t_names[k], e00)
        for name in cov_names:
            expr.add_trace(name, piece["cov_coeff"])
        for kp in range(kd):
            if kp != k:
                expr.add_scalar(p_names[kp], piece["cross"][kp])
        expr.add_const(piece["noise"] - 2.0 * piece["c"])
        p.add_constraint(expr, "<=", f"ulfloor_k{k}")
        # ties pinning T_k = [[t, sqrt(gamma)], [sqrt(gamma), p_k]]
        p.add_constraint(TraceAffine().add_trace(t_names[k], e01_re)
                         .add_const(-2.0 * sqrt_g), "==", f"ultie_k{k}_re")
        p.add_constraint(TraceAffine().add_trace(t_names[k], e01_im),
                         "==", f"ultie_k{k}_im")
        p.add_constraint(TraceAffine().add_trace(t_names[k], e11)
                         .add_scalar(p_names[k], -1.0), "==", f"ultie_k{k}_p")

    # eavesdropper uplink caps, per (eve, uplink user)
    for l in range(ld):
        outer = _row_outer(eff.h_be[l])
        for k in range(kd):
            expr = TraceAffine().add_scalar(p_names[k],
                                            abs(eff.h_ve[k, l]) ** 2)
            for kp in range(kd):
                if kp != k:
                    expr.add_scalar(p_names[kp],
                                    -t.gamma_eve_ul_max
                                    * abs(eff.h_ve[kp, l]) ** 2)
            for name in cov_names:
                expr.add_trace(name, -t.gamma_eve_ul_max * outer)
            expr.add_const(-t.gamma_eve_ul_max * s2)
            p.add_constraint(expr, "<=", f"ulcap_l{l}_k{k}")

    # total power budget
    eye = np.eye(ch.n_tx)
    expr = TraceAffine()
    for name in cov_names:
        expr.add_trace(name, eye)
    for k in range(kd):
        expr.add_scalar(p_names[k], 1.0)
    expr.add_const(-t.p_max_w)
    p.add_constraint(expr, "<=", "power")

    # per-target sensing floors driving the objective
    for l in range(ld):
        outer = _row_outer(eff.h_be[l])
        expr = TraceAffine().add_scalar(alpha, 1.0)
        for name in cov_names:
            expr.add_trace(name, -outer)
        p.add_constraint(expr, "<=", f"sense_l{l}")

    # uplink power floor
    for k in range(kd):
        p.add_constraint(TraceAffine().add_scalar(p_names[k], -1.0)
                         .add_const(P_FLOOR_W), "<=", f"pfloor_k{k}")

    p.set_objective(TraceAffine().add_scalar(alpha, 1.0))
    return p


def _psd_clip(m: np.ndarray) -> np.ndarray:
    vals, vecs = la.eigh(herm(m))
    vals = np.maximum(vals, 0.0)
    return herm((vecs * vals) @ vecs.conj().T)


def _parse_w_solution(ch: ChannelSet,
                      values: dict[str, np.ndarray | float],
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    w = np.stack([_psd_clip(values[f"W_{j}"]) for j in range(ch.n_dl)])
    c_z = _psd_clip(values["C_z"])
    p = np.array([max(float(values[f"p_{k}"]), 0.0) for k in range(ch.n_ul)])
    return w, c_z, p, float(values["alpha"])


def sca_loop_w(ch: ChannelSet, st: DesignState, budgets: Budgets,
               thresholds: LinearParams,
               direct: DirectLinkSet | None = None,
               outer_iteration: int = 0,
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float,
                          list[SubproblemTrace]]:
    """Successive convex refinement of the beamforming subproblem.

    Re-anchors the uplink surrogate at each solution; keeps the last
    solvable iterate.  Raises SubproblemInfeasible when even the first
    iteration fails, so the caller can mark the run.
    """
    traces: list[SubproblemTrace] = []
    anchor = st
    last: tuple | None = None
    for n in range(budgets.sca_iters):
        prob = build_subproblem_w(ch, anchor, thresholds, direct)
        out = solve(prob, tol=budgets.solver_tol)
        if not out.ok:
            traces.append(SubproblemTrace(
                "beamforming", outer_iteration, n, out.status, None, {}, {}))
            if last is None:
                raise SubproblemInfeasible(
                    f"beamforming subproblem {out.status} at first iteration")
            break
        w, c_z, p, alpha = _parse_w_solution(ch, out.values)
        ratios = {f"W_{j}": _rank_one_ratio(w[j]) for j in range(ch.n_dl)}
        traces.append(SubproblemTrace(
            "beamforming", outer_iteration, n, out.status, alpha,
            _family_slacks(prob, out.values), ratios))
        last = (w, c_z, p, alpha)
        anchor = replace(anchor, W=w, C_z=c_z, p=p, alpha=alpha)
    assert last is not None
    w, c_z, p, alpha = last
    return w, c_z, p, alpha, traces


def extract_rank_one(w_opt: np.ndarray) -> tuple[np.ndarray, float]:
    """Principal-component beamformer and the retained-energy ratio.

    Returns (w, lambda_max / trace); the rank-one replacement is w w^H.
    """
    w_opt = np.asarray(w_opt, dtype=complex)
    tr = float(np.real(np.trace(w_opt)))
    if not np.any(w_opt) or tr <= 0.0:
        raise ValueError("rank-one extraction needs a nonzero PSD matrix")
    vals, vecs = la.eigh(herm(w_opt))
    lam = max(float(vals[-1]), 0.0)
    return math.sqrt(lam) * vecs[:, -1], lam / tr


# ---------------------------------------------------------------------------
# reflect-phase subproblem
# ---------------------------------------------------------------------------

def _augmented_bars(ch: ChannelSet, direct: DirectLinkSet | None):
    """Per-link composition bars, extended by one entry when direct links
    are present (the lifted phase vector is then [q, 1])."""
    eq = ch.equivalent
    jd, kd, ld = ch.n_dl, ch.n_ul, ch.n_eves
    if direct is None:
        bu = [eq.Hbar_bu[j] for j in range(jd)]
        be = [eq.Hbar_be[l] for l in range(ld)]
        vb = [eq.Hbar_vb[k] for k in range(kd)]
        vu = eq.hbar_vu
        ve = eq.hbar_ve
    else:
        bu = [np.vstack([eq.Hbar_bu[j], direct.h_bu[j][None, :]])
              for j in range(jd)]
        be = [np.vstack([eq.Hbar_be[l], direct.h_be[l][None, :]])
              for l in range(ld)]
        vb = [np.hstack([eq.Hbar_vb[k], direct.h_vb[k][:, None]])
              for k in range(kd)]
        vu = np.concatenate([eq.hbar_vu, direct.h_vu[:, :, None]], axis=2)
        ve = np.concatenate([eq.hbar_ve, direct.h_ve[:, :, None]], axis=2)
    return bu, be, vb, vu, ve


def build_subproblem_q(ch: ChannelSet, st: DesignState,
                       thresholds: LinearParams, q_prev: np.ndarray,
                       direct: DirectLinkSet | None = None) -> ConicProblem:
    """SDR of the reflect-phase step: lifted matrix Q with unit diagonal.

    Beamformers, jamming, and powers are frozen from st.  All SINR and
    sensing terms become trace pairings with precomputed Gram matrices of
    the composition bars.  Row-convention quadratics pair through the
    conjugated Gram matrix; whitened uplink quadratics pair directly.  The
    uplink floor freezes its interference matrix at q_prev.  With direct
    links present the variable is the lifted [q, 1] of size N+1.
    """
    bu, be, vb, vu, ve = _augmented_bars(ch, direct)
    jd, kd, ld = ch.n_dl, ch.n_ul, ch.n_eves
    nq = ch.n_ris + (1 if direct is not None else 0)
    s2 = ch.sigma2
    t = thresholds
    c_s = st.C_s

    def row_gram(bar: np.ndarray, cov: np.ndarray) -> np.ndarray:
        # Tr[Q . ] equals (q bar) cov (q bar)^H for row-acting bars.
        return herm((bar @ cov @ bar.conj().T).conj())

    g_bu = [[row_gram(bu[j], st.W[jp]) for jp in range(jd)] for j in range(jd)]
    r_bu = [row_gram(bu[j], st.C_z) for j in range(jd)]
    g_be = [[row_gram(be[l], st.W[jp]) for jp in range(jd)] for l in range(ld)]
    r_be = [row_gram(be[l], st.C_z) for l in range(ld)]
    s_be = [row_gram(be[l], c_s) for l in range(ld)]

    p = ConicProblem(direction="max")
    qv = p.add_psd("Q", nq)
    alpha = p.add_scalar("alpha")

    # downlink user SINR floors
    for j in range(jd):
        coeff = g_bu[j][j] - t.gamma_dl_min * r_bu[j]
        for jp in range(jd):
            if jp != j:
                coeff = coeff - t.gamma_dl_min * g_bu[j][jp]
        for k in range(kd):
            coeff = coeff - (t.gamma_dl_min * st.p[k]
                             * _row_outer(vu[k, j]))
        expr = TraceAffine().add_trace(qv, herm(coeff))
        expr.add_const(-t.gamma_dl_min * s2)
        p.add_constraint(expr, ">=", f"dlfloor_j{j}")

    # eavesdropper downlink caps
    for l in range(ld):
        for j in range(jd):
            coeff = g_be[l][j] - t.gamma_eve_dl_max * r_be[l]
            for jp in range(jd):
                if jp != j:
                    coeff = coeff - t.gamma_eve_dl_max * g_be[l][jp]
            for k in range(kd):
                coeff = coeff - (t.gamma_eve_dl_max * st.p[k]
                                 * _row_outer(ve[k, l]))
            expr = TraceAffine().add_trace(qv, herm(coeff))
            expr.add_const(-t.gamma_eve_dl_max * s2)
            p.add_constraint(expr, "<=", f"dlcap_l{l}_j{j}")

    # uplink SINR floors, interference frozen at q_prev
    st_frozen = replace(st, q=q_prev)
    for k in range(kd):
        e_k = ul_interference_matrix(ch, st_frozen, direct,
                                     exclude_ul=k, lump_targets=False)
        m_k = herm(vb[k].conj().T @ la.solve(e_k, vb[k], assume_a="pos"))
        expr = TraceAffine().add_trace(qv, st.p[k] * m_k)
        expr.add_const(-t.gamma_ul_min)
        p.add_constraint(expr, ">=", f"ulfloor_k{k}")

    # eavesdropper uplink caps
    for l in range(ld):
        for k in range(kd):
            coeff = st.p[k] * _row_outer(ve[k, l])
            for kp in range(kd):
                if kp != k:
                    coeff = coeff - (t.gamma_eve_ul_max * st.p[kp]
                                     * _row_outer(ve[kp, l]))
            coeff = coeff - t.gamma_eve_ul_max * s_be[l]
            expr = TraceAffine().add_trace(qv, herm(coeff))
            expr.add_const(-t.gamma_eve_ul_max * s2)
            p.add_constraint(expr, "<=", f"ulcap_l{l}_k{k}")

    # per-target sensing floors
    for l in range(ld):
        expr = (TraceAffine().add_trace(qv, s_be[l])
                .add_scalar(alpha, -1.0))
        p.add_constraint(expr, ">=", f"sense_l{l}")

    # unit-modulus diagonal
    for n in range(nq):
        e_nn = np.zeros((nq, nq))
        e_nn[n, n] = 1.0
        p.add_constraint(TraceAffine().add_trace(qv, e_nn).add_const(-1.0),
                         "==", f"diag_n{n}")

    p.set_objective(TraceAffine().add_scalar(alpha, 1.0))
    return p


def _candidate_feasibility(ch: ChannelSet, st: DesignState, q: np.ndarray,
                           thresholds: LinearParams,
                           direct: DirectLinkSet | None,
                           ) -> tuple[bool, float, float]:
    """(feasible, min-target sensing power, aggregate relative violation)."""
    t = thresholds
    st_c = replace(st, q=q)
    viol = 0.0

    def need_floor(value: float, floor: float) -> None:
        nonlocal viol
        if floor > 0.0 and value < floor * (1.0 - _CAND_RTOL):
            viol += (floor - value) / floor

    def need_cap(value: float, cap: float) -> None:
        nonlocal viol
        if value > cap * (1.0 + _CAND_RTOL):
            viol += (value - cap) / cap

    for j in range(ch.n_dl):
        need_floor(sinr_dl_user(ch, st_c, j, direct), t.gamma_dl_min)
    for l in range(ch.n_eves):
        for j in range(ch.n_dl):
            need_cap(sinr_dl_eve(ch, st_c, j, l, direct), t.gamma_eve_dl_max)
    ul = _optimal_ul_sinrs(ch, st_c, direct)
    for k in range(ch.n_ul):
        need_floor(ul[k], t.gamma_ul_min)
    for l in range(ch.n_eves):
        for k in range(ch.n_ul):
            need_cap(sinr_ul_eve(ch, st_c, k, l, direct), t.gamma_eve_ul_max)
    obj = min(sensing_power(ch, st_c, l, direct) for l in range(ch.n_eves))
    return viol == 0.0, obj, viol


def gaussian_randomize(q_opt: np.ndarray, draws: int, ch: ChannelSet,
                       st: DesignState, thresholds: LinearParams,
                       rng: np.random.Generator | RngStream,
                       direct: DirectLinkSet | None = None,
                       ) -> RandomizationResult:
    """Snap a lifted PSD solution back to a unit-modulus phase vector.

    Draws candidates U sqrt(Sigma) exp(i d) with d uniform on [-pi, pi],
    projects each entry to the unit circle, and scores P2 feasibility and
    the min-target sensing power through the metrics module.  The incumbent
    st.q joins the pool when more than one draw is requested.  Best feasible
    candidate wins; ties go to the smallest index; with no feasible
    candidate the least-violating one is returned flagged.
    """
    if isinstance(rng, RngStream):
        rng = rng.generator()
    q_opt = np.asarray(q_opt, dtype=complex)
    nq = q_opt.shape[0]
    lifted = nq == ch.n_ris + 1
    vals, vecs = la.eigh(herm(q_opt))
    root = np.sqrt(np.maximum(vals, 0.0))

    candidates: list[np.ndarray] = []
    if draws > 1 and st.q is not None:
        candidates.append(np.asarray(st.q, dtype=complex))
    for _ in range(draws):
        d = rng.uniform(-math.pi, math.pi, size=nq)
        c = vecs @ (root * np.exp(1j * d))
        if lifted:
            pivot = c[-1]
            c = c[:-1]
            if abs(pivot) > 1e-300:
                c = c * np.exp(-1j * np.angle(pivot))
        mag = np.abs(c)
        safe = np.where(mag > 0.0, mag, 1.0)
        candidates.append(np.where(mag > 0.0, c / safe, 1.0 + 0j))

    best: RandomizationResult | None = None
    fallback: RandomizationResult | None = None
    for i, cand in enumerate(candidates):
        ok, obj, viol = _candidate_feasibility(ch, st, cand, thresholds,
                                               direct)
        res = RandomizationResult(cand, ok, obj, viol, i)
        if ok:
            if best is None or res.objective > best.objective:
                best = res
        elif fallback is None or res.violation < fallback.violation:
            fallback = res
    if best is not None:
        return best
    assert fallback is not None
    return fallback


# ---------------------------------------------------------------------------
# full-state audit
# ---------------------------------------------------------------------------

def audit_state(ch: ChannelSet, st: DesignState, thresholds: LinearParams,
                direct: DirectLinkSet | None = None, rtol: float = 1e-5,
                alpha: float | None = None) -> tuple[bool, dict]:
    """Recompute every design constraint through the metrics module.

    Returns (all satisfied within rtol relative slack, per-family detail).
    alpha defaults to the state's recorded sensing floor.
    """
    t = thresholds
    if alpha is None:
        alpha = st.alpha
    detail: dict[str, float] = {}

    gamma_dl = [sinr_dl_user(ch, st, j, direct) for j in range(ch.n_dl)]
    detail["dl_floor_margin"] = (min(gamma_dl) / t.gamma_dl_min - 1.0
                                 if t.gamma_dl_min > 0 else math.inf)
    eve_dl = [sinr_dl_eve(ch, st, j, l, direct)
              for l in range(ch.n_eves) for j in range(ch.n_dl)]
    detail["dl_cap_margin"] = 1.0 - max(eve_dl) / t.gamma_eve_dl_max
    ul = _optimal_ul_sinrs(ch, st, direct)
    detail["ul_floor_margin"] = (float(ul.min()) / t.gamma_ul_min - 1.0
                                 if t.gamma_ul_min > 0 else math.inf)
    eve_ul = [sinr_ul_eve(ch, st, k, l, direct)
              for l in range(ch.n_eves) for k in range(ch.n_ul)]
    detail["ul_cap_margin"] = 1.0 - max(eve_ul) / t.gamma_eve_ul_max
    detail["power_margin"] = 1.0 - st.total_power / t.p_max_w
    sense = [sensing_power(ch, st, l, direct) for l in range(ch.n_eves)]
    detail["sense_margin"] = (min(sense) / alpha - 1.0 if alpha > 0
                              else math.inf)

    ok = all(v >= -rtol for v in detail.values())
    return ok, detail


# ---------------------------------------------------------------------------
# alternating-optimization driver
# ---------------------------------------------------------------------------

def _zero_forcing_init(eff_h_bu: np.ndarray, p0: np.ndarray,
                       p_max_w: float) -> np.ndarray:
    """Zero-forcing covariances rescaled to fit inside the power budget."""
    jd, n_t = eff_h_bu.shape
    gram = eff_h_bu @ eff_h_bu.conj().T
    zf = eff_h_bu.conj().T @ la.pinv(gram)
    w = np.stack([_col_outer(zf[:, j]) for j in range(jd)])
    tr = float(np.real(np.trace(w.sum(axis=0))))
    budget = max(p_max_w - float(p0.sum()), 0.0)
    if tr > 0.0:
        w *= 0.5 * budget / tr
    return w


def _initial_state(cfg: ScenarioConfig, ch: ChannelSet,
                   direct: DirectLinkSet | None, lin: LinearParams,
                   use_ris: bool) -> DesignState:
    kd = ch.n_ul
    if use_ris:
        gt = derive_geometry(cfg)
        a_rb = ris_steering(0.0, math.radians(gt.az_rb), ch.geom)
        q0 = a_rb.conj()
    else:
        q0 = None
    p0 = np.full(kd, min(1.0, lin.p_max_w / (2.0 * kd)))
    eff = effective_channels(ch, q0, direct)
    w0 = _zero_forcing_init(eff.h_bu, p0, lin.p_max_w)
    st = DesignState(W=w0, C_z=np.zeros((ch.n_tx, ch.n_tx), dtype=complex),
                     p=p0, r=np.zeros((kd, ch.n_rx), dtype=complex), q=q0)
    return replace(st, r=optimal_combiners(ch, st, direct))


def ao_solve(cfg: ScenarioConfig, ch: ChannelSet | None = None,
             direct: DirectLinkSet | None = None,
             use_ris: bool = True) -> AoResult:
    """Alternating optimization over beamformers, jamming, powers, phases.

    Starts from zero jamming, power-rescaled zero-forcing beamformers, unit
    uplink powers, and phases conjugate-matched to the panel-to-transmitter
    steering vector.  Each outer iteration runs the beamforming SCA, snaps
    the covariances to rank one, improves the reflect phases through the
    SDR plus randomization, then refreshes combiners against the updated
    composite channels.  The returned state is the best audited iterate
    (or the last one when the monotone guard is off).
    """
    lin = linearize(cfg)
    budgets = cfg.budgets
    if ch is None:
        ch = synthesize_from_config(cfg)
    if direct is None and cfg.direct_links:
        direct = synthesize_direct_links(cfg, derive_geometry(cfg),
                                         RngStream(budgets.seed))

    rng = RngStream(budgets.seed, "randomization").generator()
    st = _initial_state(cfg, ch, direct, lin, use_ris)

    sca_traces: list[SubproblemTrace] = []
    ris_traces: list[SubproblemTrace] = []
    outer_reports: list[MetricsReport] = []
    audits: list[dict] = []
    flags: list[str] = []
    obj_trace: list[float] = []

    best: tuple[float, DesignState, MetricsReport] | None = None
    termination = "budget_exhausted"
    feasible_run = True
    last_audit_ok = False

    for m in range(budgets.ao_iters):
        # beamforming step
        try:
            w, c_z, p_ul, alpha_sdp, traces = sca_loop_w(
                ch, st, budgets, lin, direct, outer_iteration=m)
        except SubproblemInfeasible:
            if m == 0:
                termination = "infeasible"
                feasible_run = False
            else:
                flags.append(f"beamforming_infeasible_outer{m}")
            break
        sca_traces.extend(traces)
        st = replace(st, W=w, C_z=c_z, p=p_ul, alpha=alpha_sdp)

        # rank-one extraction
        w1 = np.zeros_like(w)
        for j in range(ch.n_dl):
            if float(np.real(np.trace(w[j]))) <= 1e-18:
                continue
            vec, ratio = extract_rank_one(w[j])
            w1[j] = _col_outer(vec)
            if ratio < 0.99:
                flags.append(f"rank_one_ratio_W{j}_outer{m}_{ratio:.3f}")
        st = replace(st, W=w1)
        ok_ext, _ = audit_state(ch, st, lin, direct, rtol=0.10,
                                alpha=alpha_sdp)
        if not ok_ext:
            flags.append(f"post_extraction_audit_outer{m}")

        # reflect step
        if st.q is not None:
            for g in range(budgets.ris_iters):
                prob = build_subproblem_q(ch, st, lin, st.q, direct)
                out = solve(prob, tol=budgets.solver_tol)
                if not out.ok:
                    flags.append(f"reflect_{out.status}_outer{m}_g{g}")
                    ris_traces.append(SubproblemTrace(
                        "reflect", m, g, out.status, None, {}, {}))
                    break
                q_mat = out.values["Q"]
                ris_traces.append(SubproblemTrace(
                    "reflect", m, g, out.status,
                    float(out.objective_value),
                    _family_slacks(prob, out.values),
                    {"Q": _rank_one_ratio(q_mat)}))
                res = gaussian_randomize(q_mat, budgets.randomization_draws,
                                         ch, st, lin, rng, direct)
                if not res.feasible:
                    flags.append(f"randomization_infeasible_outer{m}_g{g}")
                st = replace(st, q=res.q)

        # combiner refresh against the updated composite channels
        if budgets.refresh_combiners:
            st = replace(st, r=optimal_combiners(ch, st, direct))

        report = compute_report(ch, st, direct)
        objective = float(report.sensing_power.min())
        st = replace(st, alpha=objective)
        ok_audit, detail = audit_state(ch, st, lin, direct, rtol=1e-5)
        last_audit_ok = ok_audit

        # Keep-best iterate policy: under the monotone guard a proposal is
        # adopted only when it audits clean and does not regress, so the
        # recorded trace is nondecreasing; without the guard every proposal
        # is adopted as-is.
        adopted = True
        if ok_audit and (best is None or objective >= best[0]):
            best = (objective, st, report)
        elif budgets.monotone_guard:
            adopted = False
        if budgets.monotone_guard and best is not None:
            st = best[1]
            traced = best[0]
        else:
            traced = objective
        audits.append({"outer_iteration": m, "final_ok": ok_audit,
                       "post_extraction_ok": ok_ext, "adopted": adopted,
                       **detail})
        outer_reports.append(report)
        obj_trace.append(traced)

        if (budgets.early_stop_rel is not None and m > 0
                and abs(obj_trace[-1] - obj_trace[-2])
                <= budgets.early_stop_rel * max(abs(obj_trace[-2]), 1e-30)):
            termination = "converged"
            break

    if termination == "infeasible" or not outer_reports:
        report = compute_report(ch, st, direct)
        final_st, final_report = st, report
        feasible_run = False
        if termination != "infeasible":
            termination = "infeasible"
    elif budgets.monotone_guard:
        if best is not None:
            _, final_st, final_report = best
        else:
            final_st, final_report = st, outer_reports[-1]
            feasible_run = False
            flags.append("no_audited_iterate")
    else:
        final_st, final_report = st, outer_reports[-1]
        if not last_audit_ok:
            feasible_run = False
            flags.append("final_audit_failed")

    return AoResult(
        state=final_st,
        report=final_report,
        objective=float(final_report.sensing_power.min()),
        feasible=feasible_run,
        termination=termination,
        outer_reports=tuple(outer_reports),
        objective_trace=tuple(obj_trace),
        sca_traces=tuple(sca_traces),
        ris_traces=tuple(ris_traces),
        audits=tuple(audits),
        flags=tuple(flags),
    )


def ao_solve_benchmark(cfg: ScenarioConfig, ch: ChannelSet | None = None,
                       direct: DirectLinkSet | None = None,
                       mode: str = "ris-less") -> AoResult:
    """Benchmark variants of the alternating optimization.

    "ris-less": the reflect panel is absent; only direct links carry
    signal, q stays None and the reflect subproblem never runs.
    "with-direct": the full pipeline with direct links superposed; the
    reflect SDR is lifted by one dimension to absorb the constant part.
    """
    if mode not in ("ris-less", "with-direct"):
        raise ValueError(f"unknown benchmark mode '{mode}'")
    if ch is None:
        ch = synthesize_from_config(cfg)
    return ao_solve(cfg, ch, direct, use_ris=(mode == "with-direct"))
