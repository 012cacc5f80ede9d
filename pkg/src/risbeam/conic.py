"""Typed conic-program layer: the optimizers assemble problems out of
countable constraint records (affine trace rows, convex quadratic rows, LMI
blocks) and this module compiles them for a semidefinite solver.

The records, not the backend, are the contract: constraint labels follow the
pattern "name[index]" so callers can count what a builder emitted. Solving
uses cvxpy with CLARABEL (deterministic interior point) and falls back to SCS
when the first solver reports a numerical failure. Every solve compiles a
fresh backend problem, which keeps repeated runs bit-identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

_HERM_TOL = 1e-10


def _as_hermitian(matrix: np.ndarray) -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {a.shape}")
    skew = np.abs(a - a.conj().T).max()
    scale = max(1.0, np.abs(a).max())
    if skew > _HERM_TOL * scale:
        raise ValueError("coefficient matrix must be Hermitian")
    return (a + a.conj().T) / 2.0


@dataclass(frozen=True)
class TraceTerm:
    """Re Tr(matrix @ X) for the PSD variable named var."""

    var: str
    matrix: np.ndarray


@dataclass
class AffExpr:
    """const + sum(coeff * scalar_var) + sum(Re Tr(A @ psd_var))."""

    const: float = 0.0
    scalars: dict = field(default_factory=dict)
    traces: tuple = ()

    def __add__(self, other):
        if np.isscalar(other):
            return AffExpr(self.const + float(other), dict(self.scalars),
                           self.traces)
        scalars = dict(self.scalars)
        for name, c in other.scalars.items():
            scalars[name] = scalars.get(name, 0.0) + c
        return AffExpr(self.const + other.const, scalars,
                       self.traces + other.traces)

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        return AffExpr(self.const * c,
                       {k: v * c for k, v in self.scalars.items()},
                       tuple(TraceTerm(t.var, t.matrix * c) for t in self.traces))

    __rmul__ = __mul__

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-float(other))
        return self + (other * -1.0)


def scalar(name: str, coeff: float = 1.0) -> AffExpr:
    return AffExpr(0.0, {name: float(coeff)}, ())


def trace_of(var: str, matrix: np.ndarray, coeff: float = 1.0) -> AffExpr:
    return AffExpr(0.0, {}, (TraceTerm(var, _as_hermitian(matrix) * coeff),))


def constant(c: float) -> AffExpr:
    return AffExpr(float(c), {}, ())


@dataclass(frozen=True)
class LinCon:
    """expr (sense) 0, sense one of '<=', '==', '>='."""

    label: str
    expr: AffExpr
    sense: str


@dataclass(frozen=True)
class QuadCon:
    """lhs + sum(coeff_j * quad_expr_j^2) <= rhs, all coeff_j > 0 (convex)."""

    label: str
    lhs: AffExpr
    quads: tuple  # of (coeff, AffExpr)
    rhs: AffExpr


@dataclass(frozen=True)
class LmiCon:
    """Square matrix of affine entries constrained PSD (entries real-valued)."""

    label: str
    entries: tuple  # of rows, each a tuple of AffExpr


@dataclass
class SdpProblem:
    psd_vars: tuple    # of (name, dim)
    scalar_vars: tuple  # of (name, lower, upper); bound None means free
    maximize: AffExpr
    constraints: tuple

    def count_labels(self) -> dict:
        """Constraint count per label family ('beam_floor[3]' -> 'beam_floor')."""
        out: dict = {}
        for con in self.constraints:
            family = con.label.split("[", 1)[0]
            out[family] = out.get(family, 0) + 1
        return out


@dataclass
class SdpSolution:
    status: str              # optimal | infeasible | unbounded | numerical_failure
    values: dict             # var name -> ndarray (psd) or float (scalar)
    objective: float | None
    solver: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _compile(problem: SdpProblem):
    cvx_vars = {}
    cons = []
    for name, dim in problem.psd_vars:
        X = cp.Variable((dim, dim), hermitian=True, name=name)
        cvx_vars[name] = X
        cons.append(X >> 0)
    for name, lo, hi in problem.scalar_vars:
        s = cp.Variable(name=name)
        cvx_vars[name] = s
        if lo is not None:
            cons.append(s >= lo)
        if hi is not None:
            cons.append(s <= hi)

    def aff(e: AffExpr):
        out = e.const
        for var, c in e.scalars.items():
            out = out + c * cvx_vars[var]
        for t in e.traces:
            out = out + cp.real(cp.trace(t.matrix @ cvx_vars[t.var]))
        return out

    for con in problem.constraints:
        if isinstance(con, LinCon):
            expr = aff(con.expr)
            if con.sense == "<=":
                cons.append(expr <= 0)
            elif con.sense == ">=":
                cons.append(expr >= 0)
            elif con.sense == "==":
                cons.append(expr == 0)
            else:
                raise ValueError(f"unknown sense {con.sense!r}")
        elif isinstance(con, QuadCon):
            total = aff(con.lhs)
            for coeff, q in con.quads:
                if coeff <= 0:
                    raise ValueError("quadratic coefficients must be positive")
                total = total + coeff * cp.square(aff(q))
            cons.append(total <= aff(con.rhs))
        elif isinstance(con, LmiCon):
            rows = [[aff(e) for e in row] for row in con.entries]
            cons.append(cp.bmat(rows) >> 0)
        else:
            raise TypeError(f"unknown constraint record {type(con)!r}")

    return cp.Maximize(aff(problem.maximize)), cons, cvx_vars


_STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.INFEASIBLE: "infeasible",
    cp.UNBOUNDED: "unbounded",
}


def solve(problem: SdpProblem, tolerance: float = 1e-8,
          fallback: bool = True) -> SdpSolution:
    """Solve the program. 'numerical_failure' is a reportable status, not an
    exception: the sequential rank-relaxation loop treats it as a rejected
    step, and passes fallback=False so a borderline round is rejected in one
    interior-point attempt instead of ground through a second solver."""
    objective, cons, cvx_vars = _compile(problem)
    prob = cp.Problem(objective, cons)
    attempts = (
        ("CLARABEL", {"tol_gap_abs": tolerance, "tol_gap_rel": tolerance,
                      "tol_feas": max(tolerance, 1e-10)}),
        ("SCS", {"eps_abs": tolerance, "eps_rel": tolerance,
                 "max_iters": 50_000}),
    )
    if not fallback:
        attempts = attempts[:1]
    last = "numerical_failure"
    for solver_name, opts in attempts:
        try:
            with warnings.catch_warnings():
                # inaccurate-solution chatter; statuses are handled below
                warnings.simplefilter("ignore")
                prob.solve(solver=solver_name, verbose=False, **opts)
        except (cp.SolverError, ValueError, ArithmeticError):
            last = "numerical_failure"
            continue
        status = _STATUS_MAP.get(prob.status, "numerical_failure")
        if status == "optimal":
            values = {}
            for name, _dim in problem.psd_vars:
                X = cvx_vars[name].value
                values[name] = (X + X.conj().T) / 2.0
            for name, _lo, _hi in problem.scalar_vars:
                values[name] = float(cvx_vars[name].value)
            return SdpSolution(status="optimal", values=values,
                               objective=float(prob.value), solver=solver_name)
        if status in ("infeasible", "unbounded"):
            return SdpSolution(status=status, values={}, objective=None,
                               solver=solver_name)
        last = "numerical_failure"
    return SdpSolution(status=last, values={}, objective=None, solver=None)


def principal_eigpair(X: np.ndarray):
    """(largest eigenvalue, unit eigenvector) of a Hermitian matrix."""
    H = (np.asarray(X, dtype=complex) + np.asarray(X, dtype=complex).conj().T) / 2
    lam, vec = np.linalg.eigh(H)
    return float(lam[-1]), vec[:, -1]
