"""Box-constrained QP with an anchored weighted l1 term.

Solves::

    minimize   F(v) = 1/2 v'Av + b'v + d'|v - v0|
    subject to 0 <= v <= l

by multiplicative updates.  Every iterate stays inside the box and the
objective never increases; the KKT residual certifies the final point.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels

__all__ = [
    "QpProblem",
    "SolverOptions",
    "QpSolution",
    "split_matrix",
    "objective",
    "mu_update",
    "update_roots",
    "solve_qp",
    "kkt_residual",
    "auxiliary_g",
    "problem_from_dict",
    "problem_to_dict",
    "solution_to_dict",
]


def _as_vector(x, p, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = np.full(p, float(x))
    if x.shape != (p,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({p},)")
    return np.ascontiguousarray(x)


@dataclass
class QpProblem:
    """Data ``(A, b, d, v0, l)`` of the box QP.

    ``A`` is symmetrized on construction and checked for positive
    semi-definiteness by a Cholesky factorization, allowing a diagonal
    jitter of at most ``1e-10 * trace(A) / p``.  The jitter actually
    needed is kept in ``psd_jitter``.
    """

    A: np.ndarray
    b: np.ndarray
    d: np.ndarray
    v0: np.ndarray
    l: np.ndarray
    sym_tol: float = 1e-10
    check_psd: bool = True
    psd_jitter: float = field(default=0.0, init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ValueError(f"A must be a non-empty square matrix, got shape {A.shape}")
        p = A.shape[0]
        if not np.all(np.isfinite(A)):
            raise ValueError("A has non-finite entries")
        scale = max(1.0, float(np.abs(A).max()))
        asym = float(np.abs(A - A.T).max())
        if asym > self.sym_tol * scale:
            raise ValueError(f"A is not symmetric (max asymmetry {asym:.3g})")
        self.A = np.ascontiguousarray(0.5 * (A + A.T))
        self.b = _as_vector(self.b, p, "b")
        self.d = _as_vector(self.d, p, "d")
        self.v0 = _as_vector(self.v0, p, "v0")
        self.l = _as_vector(self.l, p, "l")
        for name in ("b", "d", "v0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(self.d < 0):
            raise ValueError("d must be nonnegative")
        if np.any(self.v0 < 0):
            raise ValueError("v0 must be nonnegative")
        if np.any(np.isnan(self.l)) or np.any(self.l <= 0):
            raise ValueError("l must be strictly positive (inf allowed)")
        if self.check_psd:
            self.psd_jitter = _psd_jitter(self.A)

    @property
    def p(self):
        return self.A.shape[0]

    @cached_property
    def parts(self):
        """``(A_plus, A_minus)`` as contiguous arrays."""
        Ap, Am = split_matrix(self.A)
        return np.ascontiguousarray(Ap), np.ascontiguousarray(Am)


def _psd_jitter(A):
    p = A.shape[0]
    trace = float(np.trace(A))
    if trace < 0:
        raise ValueError("A is not positive semi-definite (negative trace)")
    cap = 1e-10 * trace / p
    eye = np.eye(p)
    for jitter in (0.0, cap * 1e-4, cap * 1e-2, cap):
        try:
            np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        return jitter
    if trace == 0.0 and not np.any(A):
        return 0.0
    raise ValueError("A is not positive semi-definite")


@dataclass
class SolverOptions:
    """Stopping and start-point controls.

    ``kkt_tol`` is scaled by ``1 + max|b|``; ``active_tol`` is the
    distance (relative to ``max(1, max v)``) within which a coordinate
    may be treated as sitting on a bound or on the kink.  ``init=None``
    starts from the midpoint of ``[tol, min(l, 1 + v0)]``.
    """

    tol: float = 1e-10
    max_iter: int = 200_000
    init: np.ndarray = None
    epsilon_floor: float = 1e-300
    kkt_tol: float = 1e-8
    active_tol: float = 1e-8
    polish: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        self.max_iter = int(self.max_iter)
        if self.epsilon_floor < 0:
            raise ValueError("epsilon_floor must be nonnegative")

    def start(self, problem):
        if self.init is None:
            return 0.5 * (self.tol + np.minimum(problem.l, 1.0 + problem.v0))
        v = _as_vector(self.init, problem.p, "init").copy()
        if np.any(v <= 0) or np.any(v > problem.l):
            raise ValueError("init must be strictly positive and at most l")
        return v


@dataclass
class QpSolution:
    v: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool
    trace: np.ndarray = None


def split_matrix(A):
    """Positive and negative parts, ``A = A_plus - A_minus``."""
    A = np.asarray(A, dtype=np.float64)
    return np.maximum(A, 0.0), np.maximum(-A, 0.0)


def objective(problem, v):
    """``F(v)``, summed per coordinate with compensated summation."""
    v = _as_vector(v, problem.p, "v")
    terms = _kernels.objective_terms(problem.A, problem.b, problem.d, problem.v0, v)
    return math.fsum(terms)


def _step(problem, v):
    v = _as_vector(v, problem.p, "v")
    if not np.all(np.isfinite(v)):
        raise ValueError("v has non-finite entries")
    Ap, Am = problem.parts
    out = np.empty_like(v)
    r1 = np.empty_like(v)
    r2 = np.empty_like(v)
    with np.errstate(all="ignore"):
        _kernels.mu_step(Ap, Am, problem.b, problem.d, problem.v0, problem.l, v, out, r1, r2)
    return out, r1, r2


def mu_update(problem, v):
    """One multiplicative update of every coordinate.

    Raises
    ------
    FloatingPointError
        If the update produces a non-finite value (ill-conditioned input).
    """
    out, _, _ = _step(problem, v)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite value in multiplicative update")
    return out


def update_roots(problem, v):
    """The two candidate roots ``(r1, r2)`` computed by :func:`mu_update`.

    ``r1`` is the stationary point of the majorizer on the side
    ``u >= v0`` and ``r2`` on the side ``u <= v0``; before clamping to
    ``l``.
    """
    _, r1, r2 = _step(problem, v)
    return r1, r2


def kkt_residual(problem, v, active_tol=0.0):
    """Sup-norm distance of the bound-projected subdifferential from 0.

    With ``active_tol=0`` only exact bound/kink membership counts; a
    positive value lets coordinates within that distance use the bound's
    (or kink's) optimality condition.
    """
    v = _as_vector(v, problem.p, "v")
    res = _kernels.kkt_vector(problem.A, problem.b, problem.d, problem.v0,
                              problem.l, v, float(active_tol))
    return float(res.max())


def _polish(problem, v, act):
    """Snap coordinates that are certified at a bound or kink onto it."""
    res_free = _kernels.kkt_vector(problem.A, problem.b, problem.d, problem.v0,
                                   problem.l, v, 0.0)
    w = v.copy()
    for target in (np.zeros_like(v), problem.v0, problem.l):
        near = np.isfinite(target) & (np.abs(v - target) <= act) & (v != target)
        if not near.any():
            continue
        trial = w.copy()
        trial[near] = np.minimum(target[near], problem.l[near])
        res_trial = _kernels.kkt_vector(problem.A, problem.b, problem.d, problem.v0,
                                        problem.l, trial, 0.0)
        keep = near & (res_trial <= np.maximum(res_free, 0.0) + 1e-15)
        w[keep] = trial[keep]
    if objective(problem, w) <= objective(problem, v) + 1e-12 * (1.0 + abs(objective(problem, v))):
        return w
    return v


def _finish(problem, v, kkt_tol):
    """Exact minimizer on the face suggested by ``v``, if it certifies.

    Coordinates close to ``0``, ``l`` or the kink ``v0`` are fixed there
    and the rest solve the reduced linear system with the sign pattern
    of ``v``.  Returns the candidate only when it is feasible, satisfies
    the exact KKT conditions to ``kkt_tol`` and does not raise ``F``.
    """
    A, b, d, v0, l = problem.A, problem.b, problem.d, problem.v0, problem.l
    scale = max(1.0, float(v.max()))
    f_ref = objective(problem, v)
    for rel in (1e-2, 1e-4, 1e-6, 1e-8):
        gap = rel * scale
        at_l = np.isfinite(l) & (l - v <= gap)
        at0 = (v <= gap) & ~at_l
        at_k = (np.abs(v - v0) <= gap) & (v0 > 0) & ~at0 & ~at_l
        free = ~(at0 | at_l | at_k)
        w = np.where(at_l, l, np.where(at_k, v0, 0.0))
        if free.any():
            sign = np.where(v > v0, 1.0, -1.0)[free]
            rhs = -(b[free] + d[free] * sign + A[np.ix_(free, ~free)] @ w[~free])
            try:
                x = np.linalg.solve(A[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
            if not (np.all(np.isfinite(x)) and np.all(x > 0) and np.all(x < l[free])
                    and np.all((x - v0[free]) * sign >= 0)):
                continue
            w[free] = x
        if kkt_residual(problem, w) > kkt_tol:
            continue
        if objective(problem, w) <= f_ref + 1e-12 * (1.0 + abs(f_ref)):
            return w
    return None


def solve_qp(problem, options=None):
    """Minimize ``F`` over ``[0, l]`` by multiplicative updates.

    The iteration stops once the relative sup-norm change of ``v`` is at
    most ``options.tol`` and the KKT residual (with the active-set
    tolerance) is at most ``options.kkt_tol * (1 + max|b|)``.  Hitting
    ``max_iter`` returns the last iterate with ``converged=False``.

    With ``options.polish`` the iterate is also checked at iterations
    500, 1500, 3500, ... for an exact face solution (see ``_finish``);
    MU alone converges sublinearly when a coordinate's optimal
    multiplier is zero.
    """
    if options is None:
        options = SolverOptions()
    v = options.start(problem)
    Ap, Am = problem.parts
    kkt_tol = options.kkt_tol * (1.0 + float(np.abs(problem.b).max()))
    trace = np.empty(options.max_iter + 1 if options.record_trace else 0)
    iterations, converged, chunk = 0, False, 500
    while iterations < options.max_iter and not converged:
        n = min(chunk, options.max_iter - iterations) if options.polish else options.max_iter
        view = trace[iterations: iterations + n + 1] if options.record_trace else trace
        with np.errstate(all="ignore"):
            done, converged = _kernels.mu_loop(
                problem.A, Ap, Am, problem.b, problem.d, problem.v0, problem.l, v,
                options.tol, kkt_tol, options.active_tol, n, options.epsilon_floor, view)
        iterations += done
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("non-finite iterate; the problem is ill-conditioned")
        if options.polish and not converged:
            w = _finish(problem, v, kkt_tol)
            if w is not None:
                v, converged = w, True
        chunk *= 2
    if options.record_trace:
        trace = trace[: iterations + 1].copy()
    if converged and options.polish:
        # the stopping rule is relative, so large shifts leave absolute slack
        w = _finish(problem, v, min(kkt_tol, kkt_residual(problem, v)))
        if w is not None:
            v = w
        act = options.active_tol * max(1.0, float(v.max()))
        v = _polish(problem, v, act)
    act = options.active_tol * max(1.0, float(v.max()))
    return QpSolution(
        v=v,
        objective=objective(problem, v),
        iterations=int(iterations),
        kkt_residual=kkt_residual(problem, v, act),
        converged=bool(converged),
        trace=trace if options.record_trace else None,
    )


def auxiliary_g(problem, u, v):
    """Majorizer ``G(u, v)`` of ``F(u)``, tight at ``u = v``.

    ``v`` must be positive wherever the corresponding row of ``A`` is
    nonzero; ``u`` may touch zero, in which case the log term makes
    ``G`` infinite.
    """
    u = _as_vector(u, problem.p, "u")
    v = _as_vector(v, problem.p, "v")
    Ap, Am = problem.parts
    rows = np.abs(problem.A).sum(axis=1) > 0
    if np.any(v[rows] <= 0):
        raise ValueError("auxiliary_g needs v > 0 on every coordinate with a nonzero row of A")
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    vs = np.where(rows, v, 1.0)
    quad = (Ap * np.outer(u ** 2 / vs, v)).sum()
    mask = Am > 0
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    logv = np.log(vs)
    L = (logu[:, None] + logu[None, :]) - (logv[:, None] + logv[None, :])
    vv = np.outer(v, v)
    neg = np.where(mask, Am * vv * (1.0 + np.where(mask, L, 0.0)), 0.0).sum()
    lin = math.fsum(problem.b * u + problem.d * np.abs(u - problem.v0))
    return 0.5 * (quad - neg) + lin


def _encode_bound(x):
    return "inf" if np.isposinf(x) else float(x)


def problem_to_dict(problem):
    return {
        "A": problem.A.tolist(),
        "b": problem.b.tolist(),
        "d": problem.d.tolist(),
        "v0": problem.v0.tolist(),
        "l": [_encode_bound(x) for x in problem.l],
    }


def problem_from_dict(obj):
    """Build a :class:`QpProblem` from its JSON object form."""
    missing = [k for k in ("A", "b", "d", "v0", "l") if k not in obj]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    l = [math.inf if (isinstance(x, str) and x.lower() in ("inf", "+inf")) else x
         for x in obj["l"]]
    for i, x in enumerate(l):
        if isinstance(x, str):
            raise ValueError(f"l[{i}]: unrecognized value {x!r}")
    return QpProblem(A=obj["A"], b=obj["b"], d=obj["d"], v0=obj["v0"], l=l)


def solution_to_dict(sol):
    return {
        "v": sol.v.tolist(),
        "objective": sol.objective,
        "iterations": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "converged": sol.converged,
    }
