"""Complex semidefinite programs over Hermitian blocks, and their real lowering.

The subproblem builders write constraints in complex trace algebra; this
module owns the one place where Hermitian blocks become real symmetric ones.

Embedding convention: a Hermitian X = A + iB maps to the real symmetric
Y = [[A, -B], [B, A]], and a Hermitian coefficient M pairs through
E(M) = 0.5*[[Re M, -Im M], [Im M, Re M]] so that Tr[E(M) Y] = Re Tr[M X]
exactly. The backend sees only the real problem; solutions de-embed by
averaging the two diagonal blocks (exact for any real PSD Y, structured or
not, because the pairing reads only the structured part).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

HERM_RTOL = 1e-10


class ConicError(ValueError):
    pass


def herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _check_hermitian(m: np.ndarray, label: str) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConicError(f"{label}: coefficient must be square")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.conj().T).max()) > HERM_RTOL * scale:
        raise ConicError(f"{label}: coefficient is not Hermitian")
    return herm(m)


@dataclass
class TraceAffine:
    """Real-valued affine expression: sum Re Tr[A_v X_v] + sum c_s x_s + const."""

    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)
    const: float = 0.0

    def add_trace(self, var: str, coeff: np.ndarray) -> "TraceAffine":
        coeff = _check_hermitian(coeff, f"coefficient of '{var}'")
        if var in self.matrices:
            self.matrices[var] = self.matrices[var] + coeff
        else:
            self.matrices[var] = coeff
        return self

    def add_scalar(self, var: str, coeff: float) -> "TraceAffine":
        self.scalars[var] = self.scalars.get(var, 0.0) + float(coeff)
        return self

    def add_const(self, value: float) -> "TraceAffine":
        self.const += float(value)
        return self

    def evaluate(self, values: dict[str, np.ndarray | float]) -> float:
        total = self.const
        for var, coeff in self.matrices.items():
            total += float(np.real(np.trace(coeff @ values[var])))
        for var, coeff in self.scalars.items():
            total += coeff * float(values[var])
        return total


@dataclass(frozen=True)
class Constraint:
    expr: TraceAffine
    sense: str  # "<=", ">=", "==" against zero
    label: str = ""


@dataclass
class ConicProblem:
    """Linear objective over Hermitian PSD blocks and signed scalars."""

    direction: str = "max"
    psd_vars: dict[str, int] = field(default_factory=dict)
    scalar_vars: dict[str, str] = field(default_factory=dict)  # name -> nonneg|free
    constraints: list[Constraint] = field(default_factory=list)
    objective: TraceAffine = field(default_factory=TraceAffine)

    def add_psd(self, name: str, n: int) -> str:
        if name in self.psd_vars or name in self.scalar_vars:
            raise ConicError(f"duplicate variable '{name}'")
        if n < 1:
            raise ConicError("PSD block dimension must be >= 1")
        self.psd_vars[name] = int(n)
        return name

    def add_scalar(self, name: str, nonneg: bool = False) -> str:
        if name in self.psd_vars or name in self.scalar_vars:
            raise ConicError(f"duplicate variable '{name}'")
        self.scalar_vars[name] = "nonneg" if nonneg else "free"
        return name

    def add_constraint(self, expr: TraceAffine, sense: str,
                       label: str = "") -> None:
        if sense not in ("<=", ">=", "=="):
            raise ConicError(f"unknown constraint sense '{sense}'")
        self._check_vars(expr)
        self.constraints.append(Constraint(expr, sense, label))

    def set_objective(self, expr: TraceAffine) -> None:
        self._check_vars(expr)
        self.objective = expr

    def _check_vars(self, expr: TraceAffine) -> None:
        for var, coeff in expr.matrices.items():
            if var not in self.psd_vars:
                raise ConicError(f"unknown PSD variable '{var}'")
            if coeff.shape != (self.psd_vars[var], self.psd_vars[var]):
                raise ConicError(f"coefficient shape mismatch for '{var}'")
        for var in expr.scalars:
            if var not in self.scalar_vars:
                raise ConicError(f"unknown scalar variable '{var}'")


@dataclass(frozen=True)
class SolveOutcome:
    status: str  # optimal | infeasible | numerical_failure | iteration_limit
    values: dict[str, np.ndarray | float]
    objective_value: float
    solver_stats: dict[str, float | str]

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def embed_coefficient(m: np.ndarray) -> np.ndarray:
    """E(M): real symmetric pairing matrix with Tr[E(M) Y] = Re Tr[M X]."""
    m = _check_hermitian(m, "embedding input")
    a, b = m.real, m.imag
    return 0.5 * np.block([[a, -b], [b, a]])


def embed_matrix(x: np.ndarray) -> np.ndarray:
    """Y(X): the embedded point itself (twice the coefficient scaling)."""
    x = np.asarray(x, dtype=complex)
    a, b = x.real, x.imag
    return np.block([[a, -b], [b, a]])


def deembed_matrix(y: np.ndarray) -> np.ndarray:
    """Average the two diagonal blocks back into a Hermitian matrix."""
    n = y.shape[0] // 2
    a = 0.5 * (y[:n, :n] + y[n:, n:])
    b = 0.5 * (y[n:, :n] - y[:n, n:])
    return herm(a + 1j * b)


@dataclass(frozen=True)
class RealifiedProblem:
    """Real-symmetric form: everything the backend needs, numpy only."""

    direction: str
    psd_dims: dict[str, int]          # name -> embedded dimension 2n
    scalar_kinds: dict[str, str]
    constraints: list[tuple[dict[str, np.ndarray], dict[str, float], float, str]]
    objective: tuple[dict[str, np.ndarray], dict[str, float], float]


def realify(p: ConicProblem) -> RealifiedProblem:
    """Lower the complex problem to its real symmetric embedding."""

    def lower_expr(e: TraceAffine):
        mats = {v: embed_coefficient(c) for v, c in sorted(e.matrices.items())}
        sca = {v: float(c) for v, c in sorted(e.scalars.items())}
        return mats, sca, float(e.const)

    cons = []
    for c in p.constraints:
        mats, sca, const = lower_expr(c.expr)
        cons.append((mats, sca, const, c.sense))
    return RealifiedProblem(
        direction=p.direction,
        psd_dims={name: 2 * n for name, n in sorted(p.psd_vars.items())},
        scalar_kinds=dict(sorted(p.scalar_vars.items())),
        constraints=cons,
        objective=lower_expr(p.objective),
    )


def lowered_bytes(p: ConicProblem) -> bytes:
    """Canonical digest of the lowered form; equal problems hash equal."""
    r = realify(p)
    h = hashlib.sha256()
    h.update(r.direction.encode())
    for name, dim in r.psd_dims.items():
        h.update(f"psd:{name}:{dim}".encode())
    for name, kind in r.scalar_kinds.items():
        h.update(f"scalar:{name}:{kind}".encode())

    def feed(mats, sca, const):
        for name, coeff in mats.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(coeff, dtype=np.float64).tobytes())
        for name, coeff in sca.items():
            h.update(name.encode())
            h.update(np.float64(coeff).tobytes())
        h.update(np.float64(const).tobytes())

    for mats, sca, const, sense in r.constraints:
        h.update(sense.encode())
        feed(mats, sca, const)
    feed(*r.objective)
    return h.digest()


# SCS below this accuracy stalls on the embedded SDPs; tighter targets go to
# the fallback backend instead.
_SCS_EPS_FLOOR = 1e-7

_STATUS_MAP = {
    "optimal": "optimal",
    "infeasible": "infeasible",
    "unbounded": "numerical_failure",
    "optimal_inaccurate": "iteration_limit",
    "infeasible_inaccurate": "infeasible",
    "unbounded_inaccurate": "numerical_failure",
}


def solve(p: ConicProblem, tol: float = 1e-7) -> SolveOutcome:
    """Solve via the realified form. Never raises on backend failure."""
    import cvxpy as cp

    r = realify(p)
    cvars: dict[str, "cp.Variable"] = {}
    cp_cons = []
    for name, dim in r.psd_dims.items():
        cvars[name] = cp.Variable((dim, dim), name=name, PSD=True)
    for name, kind in r.scalar_kinds.items():
        cvars[name] = cp.Variable(name=name, nonneg=(kind == "nonneg"))

    def build(mats, sca, const):
        expr = const
        for name, coeff in mats.items():
            expr = expr + cp.sum(cp.multiply(coeff, cvars[name]))
        for name, coeff in sca.items():
            expr = expr + coeff * cvars[name]
        return expr

    for mats, sca, const, sense in r.constraints:
        e = build(mats, sca, const)
        if sense == "<=":
            cp_cons.append(e <= 0)
        elif sense == ">=":
            cp_cons.append(e >= 0)
        else:
            cp_cons.append(e == 0)
    obj_expr = build(*r.objective)
    objective = cp.Maximize(obj_expr) if r.direction == "max" \
        else cp.Minimize(obj_expr)
    problem = cp.Problem(objective, cp_cons)

    stats: dict[str, float | str] = {}
    status = None
    # Interior-point backend first: the link budgets put constraint
    # coefficients 12+ orders of magnitude apart, which first-order
    # backends handle poorly. SCS serves as fallback and as the
    # second opinion on infeasibility verdicts.
    for backend in ("CLARABEL", "SCS"):
        try:
            if backend == "SCS":
                eps = max(tol, _SCS_EPS_FLOOR)
                problem.solve(solver=cp.SCS, eps=eps, max_iters=50_000,
                              verbose=False)
            else:
                problem.solve(solver=cp.CLARABEL, verbose=False)
        except Exception as exc:  # backend must never abort the process
            stats[f"{backend}_error"] = str(exc)[:200]
            status = "numerical_failure"
            continue
        status = _STATUS_MAP.get(problem.status, "numerical_failure")
        stats[f"{backend}_status"] = str(problem.status)
        if status == "optimal":
            stats["backend"] = backend
            break
        if status == "infeasible" and backend == "SCS":
            break

    if status != "optimal":
        # A failed confirmation pass must not mask a clean verdict.
        if stats.get("CLARABEL_status") in ("infeasible",
                                            "infeasible_inaccurate"):
            status = "infeasible"
        return SolveOutcome(status=status or "numerical_failure", values={},
                            objective_value=math.nan, solver_stats=stats)

    values: dict[str, np.ndarray | float] = {}
    for name, dim in r.psd_dims.items():
        values[name] = deembed_matrix(np.asarray(cvars[name].value))
    for name in r.scalar_kinds:
        values[name] = float(cvars[name].value)
    try:
        stats["iterations"] = float(problem.solver_stats.num_iters or 0)
        stats["runtime_s"] = float(problem.solver_stats.solve_time or 0.0)
    except (AttributeError, TypeError):
        pass
    return SolveOutcome(status="optimal", values=values,
                        objective_value=float(problem.value),
                        solver_stats=stats)


def problem_text(p: ConicProblem) -> str:
    """Readable dump of the complex-form problem for solver debugging."""
    lines = [f"direction: {p.direction}"]
    for name, n in sorted(p.psd_vars.items()):
        lines.append(f"psd {name}: {n}x{n}")
    for name, kind in sorted(p.scalar_vars.items()):
        lines.append(f"scalar {name}: {kind}")

    def fmt(e: TraceAffine) -> str:
        parts = [f"Tr[{name}; fro={np.linalg.norm(c):.6e}]"
                 for name, c in sorted(e.matrices.items())]
        parts += [f"{coeff:+.6e}*{name}" for name, coeff in sorted(e.scalars.items())]
        parts.append(f"{e.const:+.6e}")
        return " + ".join(parts)

    lines.append(f"objective: {fmt(p.objective)}")
    for i, c in enumerate(p.constraints):
        tag = f" [{c.label}]" if c.label else ""
        lines.append(f"c{i}{tag}: {fmt(c.expr)} {c.sense} 0")
    return "\n".join(lines)
