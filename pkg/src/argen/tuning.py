"""Hyper-parameter selection for the named estimators.

Two tools: :func:`random_search` draws configurations from the integer
grids (or log-uniform ranges) and keeps the one with the lowest
validation MSE; :func:`bisection_lambda1` finds an l1 strength giving a
requested number of nonzero coefficients.
"""

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    ArgenConfig,
    PresetTemplate,
    config_to_dict,
    fit,
    make_preset,
    predict,
)

__all__ = [
    "SearchSpace",
    "TrialRecord",
    "BisectionResult",
    "mse_score",
    "oracle_mse",
    "grid_size",
    "grid_points",
    "random_search",
    "bisection_lambda1",
    "search_report",
]


@dataclass
class SearchSpace:
    """Where each tunable hyper-parameter is drawn from.

    ``lambda1_up``/``lambda2_up`` give the integer grids ``{0..up}``;
    setting ``lambda1_range``/``lambda2_range`` to ``(lo, hi)`` switches
    that axis to log-uniform sampling instead.  Weight vectors are
    integer vectors in ``{0..w_up}^p`` normalized to sum one, and the
    interaction matrix is ``P diag(D) P'`` with ``D`` in ``{0..d_up}^p``
    (``P`` defaults to the identity).
    """

    lambda1_up: int = 100
    lambda2_up: int = 100
    w_up: int = 2
    d_up: int = 2
    lambda1_range: tuple = None
    lambda2_range: tuple = None
    P: np.ndarray = None
    n_calls: int = 100
    seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        for name in ("lambda1_up", "lambda2_up", "w_up", "d_up"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be >= 0")
            setattr(self, name, int(getattr(self, name)))
        if self.w_up < 1:
            raise ValueError("w_up must be >= 1 (all-zero weights are rejected)")
        if int(self.n_calls) < 1:
            raise ValueError("n_calls must be >= 1")
        self.n_calls = int(self.n_calls)
        for name in ("lambda1_range", "lambda2_range"):
            rng = getattr(self, name)
            if rng is not None:
                lo, hi = map(float, rng)
                if not 0 < lo < hi:
                    raise ValueError(f"{name} must satisfy 0 < lo < hi")
                setattr(self, name, (lo, hi))


@dataclass
class TrialRecord:
    config: ArgenConfig
    validation_mse: float
    rank: int = 0
    converged: bool = True
    params: dict = field(default_factory=dict)


@dataclass
class BisectionResult:
    lambda1: float
    n_nonzero: int
    reached: bool
    trace: list


def mse_score(model, data):
    """Mean squared prediction error over the rows of ``data``."""
    if data.n == 0:
        raise ValueError("empty data slice")
    resid = data.Y - predict(model, data.X)
    return float(np.mean(resid ** 2))


def oracle_mse(beta_hat, beta_star, X):
    """``(b - b*)' (X'X / n) (b - b*)`` for a known true coefficient vector."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty design")
    diff = np.asarray(beta_hat, dtype=np.float64) - np.asarray(beta_star, dtype=np.float64)
    return float(np.mean((X @ diff) ** 2))


def _template(preset, p, bounds):
    if isinstance(preset, PresetTemplate):
        return preset
    return make_preset(preset, p, bounds)


def grid_size(preset, space, p):
    """Number of grid values for ``preset`` (``inf`` for continuous axes).

    A preset with nothing to tune has an empty grid (size 0) and is
    evaluated exactly once.
    """
    tunable = _template(preset, p, None).tunable
    if not tunable:
        return 0
    size = 1
    for name in tunable:
        size *= _axis_size(name, space, p)
    return size


def _axis_size(name, space, p):
    if name == "lambda1":
        return math.inf if space.lambda1_range else space.lambda1_up + 1
    if name == "lambda2":
        return math.inf if space.lambda2_range else space.lambda2_up + 1
    if name == "w":
        return (space.w_up + 1) ** p
    return (space.d_up + 1) ** p


def _axis_values(name, space, p):
    if name == "lambda1":
        return range(space.lambda1_up + 1)
    if name == "lambda2":
        return range(space.lambda2_up + 1)
    if name == "w":
        return itertools.product(range(space.w_up + 1), repeat=p)
    return itertools.product(range(space.d_up + 1), repeat=p)


def grid_points(preset, space, p):
    """Iterate over the raw grid as dicts of integer values.

    Weight tuples include the all-zero vector, which the search skips.
    """
    tunable = _template(preset, p, None).tunable
    if any(math.isinf(_axis_size(n, space, p)) for n in tunable):
        raise ValueError("grid is continuous")
    axes = [list(_axis_values(n, space, p)) for n in tunable]
    for combo in itertools.product(*axes):
        yield dict(zip(tunable, combo))


def _draw(name, space, p, rng):
    if name in ("lambda1", "lambda2"):
        rng_range = getattr(space, f"{name}_range")
        if rng_range is not None:
            lo, hi = rng_range
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        return int(rng.integers(0, getattr(space, f"{name}_up") + 1))
    if name == "w":
        while True:
            w = tuple(int(x) for x in rng.integers(0, space.w_up + 1, size=p))
            if any(w):
                return w
    return tuple(int(x) for x in rng.integers(0, space.d_up + 1, size=p))


def _to_config(template, params, space):
    p = template.config.p
    values = {}
    for name, raw in params.items():
        if name in ("lambda1", "lambda2"):
            values[name] = float(raw)
        elif name == "w":
            w = np.asarray(raw, dtype=np.float64)
            values["w"] = w / w.sum()
        else:
            P = np.eye(p) if space.P is None else np.asarray(space.P, dtype=np.float64)
            values["sigma"] = P @ np.diag(np.asarray(raw, dtype=np.float64)) @ P.T
    return template.instantiate(**values)


def _plan(template, space):
    """Deterministic list of parameter dicts to evaluate."""
    p = template.config.p
    tunable = template.tunable
    if not tunable:
        return [{}]
    size = grid_size(template, space, p)
    if space.exhaustive or space.n_calls >= size:
        if math.isinf(size):
            raise ValueError("exhaustive search needs a finite grid")
        return [g for g in grid_points(template, space, p) if "w" not in g or any(g["w"])]
    rng = np.random.default_rng(space.seed)
    return [{name: _draw(name, space, p, rng) for name in tunable} for _ in range(space.n_calls)]


def random_search(data, space, preset, options=None, bounds=None, jobs=1, score=None):
    """Fit each drawn configuration on train, score it on validation.

    With ``n_calls`` at least the grid size (or ``space.exhaustive``)
    the whole grid is enumerated; otherwise ``n_calls`` points are drawn
    with replacement from ``space.seed``.  ``jobs > 1`` evaluates trials
    on a thread pool; the records come back in plan order either way.
    ``score(model, validation_data)`` replaces the validation MSE as the
    criterion to minimize (stored in ``validation_mse``).

    Returns
    -------
    best : TrialRecord
        Lowest validation MSE, first-seen on ties.
    records : list of TrialRecord
        All trials in evaluation order, each with its rank.
    """
    template = _template(preset, data.p, bounds)
    val = data.validation
    if data.train.n == 0 or val.n == 0:
        raise ValueError("data needs both train and validation rows")
    plan = _plan(template, space)
    score = mse_score if score is None else score

    def run(params):
        config = _to_config(template, params, space)
        model = fit(data, config, options)
        return TrialRecord(config=config, validation_mse=float(score(model, val)),
                           converged=model.converged, params=params)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, plan))
    else:
        records = [run(params) for params in plan]

    order = sorted(range(len(records)), key=lambda i: (records[i].validation_mse, i))
    for rank, i in enumerate(order, start=1):
        records[i].rank = rank
    if not any(r.converged for r in records):
        warnings.warn("no trial converged; returning the best unconverged fit", RuntimeWarning)
    return records[order[0]], records


def bisection_lambda1(data, base_config, target_nonzero, options=None,
                      max_iter=100, max_expand=60):
    """l1 strength giving ``target_nonzero`` nonzero coefficients.

    Starts from ``[0, 1]``, doubles the upper end until the fit has at
    most ``target_nonzero`` nonzeros, then bisects.  If the count cannot
    be hit exactly within ``max_iter`` halvings, the probed value whose
    count is closest to the target is returned (smaller lambda on ties)
    with ``reached=False``.  Training rows are used.
    """
    p = base_config.p
    target = int(target_nonzero)
    if not 0 <= target <= p:
        raise ValueError(f"target_nonzero must be in [0, {p}]")
    trace = []

    def count(lam):
        model = fit(data, replace(base_config, lambda1=float(lam)), options)
        trace.append((float(lam), model.n_nonzero))
        return model.n_nonzero

    lo, hi = 0.0, 1.0
    n_lo = count(lo)
    if n_lo == target:
        return BisectionResult(lo, n_lo, True, trace)
    if n_lo < target:
        return _closest(trace, target)
    n_hi = count(hi)
    for _ in range(max_expand):
        if n_hi <= target:
            break
        lo, n_lo = hi, n_hi
        hi *= 2.0
        n_hi = count(hi)
    if n_hi == target:
        return BisectionResult(hi, n_hi, True, trace)
    if n_hi > target:
        return _closest(trace, target)
    # invariant: count(hi) <= target <= count(lo)
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        n = count(lam)
        if n == target:
            return BisectionResult(lam, n, True, trace)
        if n > target:
            lo = lam
        else:
            hi = lam
    return _closest(trace, target)


def _closest(trace, target):
    lam, n = min(trace, key=lambda item: (abs(item[1] - target), item[0]))
    return BisectionResult(lam, n, n == target, trace)


def search_report(best, records):
    """JSON-ready dict: every trial plus the winning configuration."""
    return {
        "trials": [
            {
                "rank": r.rank,
                "validation_mse": r.validation_mse,
                "converged": r.converged,
                "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in r.params.items()},
            }
            for r in records
        ],
        "best": {
            "rank": best.rank,
            "validation_mse": best.validation_mse,
            "config": config_to_dict(best.config),
        },
    }
