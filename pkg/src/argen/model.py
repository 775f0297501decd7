"""The box-constrained generalized elastic net estimator.

For data ``(X, Y)`` and a configuration ``(lambda1, lambda2, w, Sigma, s, t)``
the estimator is::

    argmin_{s <= beta <= t}  ||Y - X beta||^2 + lambda1 * w'|beta|
                             + lambda2 * beta' Sigma beta

It is computed by shifting to ``v = beta - s`` and handing the resulting
box QP to :func:`argen.qp.solve_qp`.  No intercept is fitted; center the
data beforehand.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .qp import QpProblem, SolverOptions, solve_qp

__all__ = [
    "ArgenConfig",
    "Dataset",
    "FittedModel",
    "PresetTemplate",
    "PRESETS",
    "transform_to_qp",
    "fit",
    "predict",
    "make_preset",
    "penalized_objective",
    "objective_constant",
    "count_nonzero",
    "read_dataset_csv",
    "write_dataset_csv",
    "config_from_dict",
    "config_to_dict",
]

SPLITS = ("train", "validation", "test")
ZERO_TOL = 1e-8


@dataclass
class ArgenConfig:
    """Regularization and box of one estimator.

    ``weight_entry`` records how ``w`` was supplied: ``"raw"`` uses it
    as given, ``"normalized"`` rescales it to sum to one.
    """

    lambda1: float
    lambda2: float
    w: np.ndarray
    sigma: np.ndarray
    s: np.ndarray
    t: np.ndarray
    weight_entry: str = "raw"

    def __post_init__(self):
        self.lambda1 = float(self.lambda1)
        self.lambda2 = float(self.lambda2)
        if not (self.lambda1 >= 0 and self.lambda2 >= 0):
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        s = np.asarray(self.s, dtype=np.float64).ravel()
        p = s.size
        if p == 0:
            raise ValueError("empty configuration")
        t = np.asarray(self.t, dtype=np.float64).ravel()
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if w.size == 1 and p > 1:
            w = np.full(p, w.item())
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if t.shape != (p,) or w.shape != (p,) or sigma.shape != (p, p):
            raise ValueError("dimension mismatch among s, t, w, sigma")
        if not np.all(np.isfinite(s)):
            raise ValueError("lower bounds s must be finite (use a large finite value, e.g. -1000)")
        if np.any(np.isnan(t)) or np.any(t == -np.inf):
            raise ValueError("upper bounds t must be finite or +inf")
        if np.any(s >= t):
            raise ValueError("need s < t elementwise")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("penalty weights w must be finite and nonnegative")
        if self.weight_entry not in ("raw", "normalized"):
            raise ValueError("weight_entry must be 'raw' or 'normalized'")
        if self.weight_entry == "normalized":
            total = w.sum()
            if total <= 0:
                raise ValueError("cannot normalize an all-zero weight vector")
            w = w / total
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-10 * max(1.0, np.abs(sigma).max())):
            raise ValueError("sigma must be symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        if np.linalg.eigvalsh(sigma).min() < -1e-10 * max(1.0, np.abs(sigma).max()):
            raise ValueError("sigma must be positive semi-definite")
        self.s, self.t, self.w, self.sigma = s, t, w, sigma

    @property
    def p(self):
        return self.s.size


@dataclass
class Dataset:
    """Design matrix, response and a per-row split label."""

    X: np.ndarray
    Y: np.ndarray
    split: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.asarray(self.Y, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("X must be a 2-D array with at least one column")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if self.split is None:
            split = np.full(X.shape[0], "train", dtype=object)
        else:
            split = np.asarray(self.split, dtype=object).ravel()
            if split.shape[0] != X.shape[0]:
                raise ValueError("split labels must match the number of rows")
            bad = set(split) - set(SPLITS)
            if bad:
                raise ValueError(f"unknown split label(s): {sorted(bad)}")
        self.X, self.Y, self.split = X, Y, split

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, label):
        rows = self.split == label
        return Dataset(self.X[rows], self.Y[rows], self.split[rows])

    @cached_property
    def train(self):
        if np.all(self.split == "train"):
            return self
        return self.subset("train")

    @cached_property
    def validation(self):
        return self.subset("validation")

    @cached_property
    def test(self):
        return self.subset("test")

    @cached_property
    def gram(self):
        """``(X'X, X'Y)`` over all rows of this dataset."""
        return self.X.T @ self.X, self.X.T @ self.Y


@dataclass
class FittedModel:
    beta: np.ndarray
    config: ArgenConfig
    iterations: int
    kkt_residual: float
    converged: bool
    n_nonzero: int
    zero_tol: float = ZERO_TOL


def count_nonzero(beta, zero_tol=ZERO_TOL):
    """Entries with ``|beta_i| > zero_tol * max(1, max|beta|)``."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.size == 0:
        return 0
    cut = zero_tol * max(1.0, float(np.abs(beta).max()))
    return int(np.count_nonzero(np.abs(beta) > cut))


def _check_dims(data, config):
    if data.p != config.p:
        raise ValueError(f"data has {data.p} predictors but config has {config.p}")


def transform_to_qp(data, config, check_psd=True):
    """Shift ``beta = v + s`` and build the equivalent box QP.

    Uses the training rows of ``data``.
    """
    _check_dims(data, config)
    xtx, xty = data.train.gram
    A = 2.0 * (xtx + config.lambda2 * config.sigma)
    s = config.s
    return QpProblem(
        A=A,
        b=A @ s - 2.0 * xty,
        d=config.lambda1 * config.w,
        v0=np.maximum(0.0, -s),
        l=config.t - s,
        check_psd=check_psd,
    )


def objective_constant(problem, config):
    """Constant ``c`` with ``penalized_objective(beta) = F(beta - s) + c``."""
    s = config.s
    return float(problem.d @ np.maximum(s, 0.0) + problem.b @ s - 0.5 * s @ problem.A @ s)


def penalized_objective(data, config, beta):
    """``beta'(X'X + lambda2 Sigma) beta - 2 (X'Y)'beta + lambda1 w'|beta|``.

    Differs from the full criterion ``||Y - X beta||^2 + ...`` only by
    the constant ``Y'Y``.  Training rows are used.
    """
    _check_dims(data, config)
    beta = np.asarray(beta, dtype=np.float64)
    xtx, xty = data.train.gram
    H = xtx + config.lambda2 * config.sigma
    return float(beta @ H @ beta - 2.0 * xty @ beta + config.lambda1 * config.w @ np.abs(beta))


def fit(data, config, options=None):
    """Fit on the training rows; non-convergence is flagged, not raised."""
    if data.train.n < 1:
        raise ValueError("no training rows")
    problem = transform_to_qp(data, config)
    sol = solve_qp(problem, options or SolverOptions())
    beta = np.clip(sol.v + config.s, config.s, config.t)
    return FittedModel(
        beta=beta,
        config=config,
        iterations=sol.iterations,
        kkt_residual=sol.kkt_residual,
        converged=sol.converged,
        n_nonzero=count_nonzero(beta),
    )


def predict(model, X_new):
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    if X_new.shape[1] != model.beta.size:
        raise ValueError(f"X_new has {X_new.shape[1]} columns, model has {model.beta.size}")
    return X_new @ model.beta


# name -> (fixed values, tunable fields); Nones are tunable
_TABLE = {
    "ARLS": dict(lambda1=0.0, lambda2=0.0, w="uniform", sigma="identity"),
    "ARL": dict(lambda1=None, lambda2=0.0, w="uniform", sigma="identity"),
    "ARGL": dict(lambda1=None, lambda2=0.0, w=None, sigma="identity"),
    "ARR": dict(lambda1=0.0, lambda2=None, w="uniform", sigma="identity"),
    "ARGR": dict(lambda1=0.0, lambda2=None, w="uniform", sigma=None),
    "AREN": dict(lambda1=None, lambda2=None, w="uniform", sigma="identity"),
    "ARLEN": dict(lambda1=None, lambda2=None, w=None, sigma="identity"),
    "ARREN": dict(lambda1=None, lambda2=None, w="uniform", sigma=None),
    "ARGEN": dict(lambda1=None, lambda2=None, w=None, sigma=None),
}
PRESETS = tuple(_TABLE)


@dataclass
class PresetTemplate:
    """A named special case: fixed fields plus the list of tunable ones.

    ``config`` holds the fixed values, with neutral placeholders
    (``0``, ``1/p``, ``I``) in the tunable slots.
    """

    name: str
    config: ArgenConfig
    tunable: tuple = field(default=())

    def instantiate(self, **values):
        extra = set(values) - set(self.tunable)
        if extra:
            raise ValueError(f"{self.name}: {sorted(extra)} not tunable")
        return replace(self.config, **values)


def make_preset(name, p, bounds=None):
    """Template for one of the nine named estimators.

    ``bounds`` is ``(s, t)``; scalars broadcast.  Defaults to a wide
    finite box ``[-1e6, inf)``.
    """
    key = str(name).upper()
    if key not in _TABLE:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    p = int(p)
    if p < 1:
        raise ValueError("p must be positive")
    s, t = bounds if bounds is not None else (-1e6, math.inf)
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (p,)).copy()
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (p,)).copy()
    spec = _TABLE[key]
    tunable = tuple(k for k in ("lambda1", "lambda2", "w", "sigma") if spec[k] is None)
    config = ArgenConfig(
        lambda1=spec["lambda1"] or 0.0,
        lambda2=spec["lambda2"] or 0.0,
        w=np.full(p, 1.0 / p),
        sigma=np.eye(p),
        s=s,
        t=t,
        weight_entry="raw",
    )
    return PresetTemplate(name=key, config=config, tunable=tunable)


def read_dataset_csv(path):
    """Read ``y, x1..xp[, split]`` with a header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "y":
            raise ValueError(f"{path}: first column must be 'y'")
        has_split = header[-1] == "split"
        xcols = header[1:-1] if has_split else header[1:]
        if not xcols:
            raise ValueError(f"{path}: no predictor columns")
        ys, xs, splits = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ys.append(float(row[0]))
                xs.append([float(x) for x in row[1:1 + len(xcols)]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            splits.append(row[-1].strip() if has_split else "train")
    return Dataset(np.array(xs).reshape(len(ys), len(xcols)), np.array(ys), np.array(splits, dtype=object))


def write_dataset_csv(path, data):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(data.p)] + ["split"])
        for y, x, sp in zip(data.Y, data.X, data.split):
            writer.writerow([repr(float(y))] + [repr(float(v)) for v in x] + [sp])


def _bound_list(x):
    return [("inf" if v == math.inf else "-inf" if v == -math.inf else float(v)) for v in x]


def _parse_bounds(x):
    return [float(v) if not isinstance(v, str) else float(v.replace("+", "")) for v in x]


def config_to_dict(config):
    return {
        "lambda1": config.lambda1,
        "lambda2": config.lambda2,
        "w": config.w.tolist(),
        "sigma": config.sigma.tolist(),
        "s": _bound_list(config.s),
        "t": _bound_list(config.t),
        "weight_entry": config.weight_entry,
    }


def config_from_dict(obj, p=None):
    """Parse the JSON form; ``sigma`` may be a matrix, ``"identity"`` or ``{"P", "D"}``."""
    s = _parse_bounds(obj["s"])
    p = len(s) if p is None else p
    sigma = obj.get("sigma", "identity")
    if isinstance(sigma, str):
        if sigma != "identity":
            raise ValueError(f"unknown sigma shorthand {sigma!r}")
        sigma = np.eye(p)
    elif isinstance(sigma, dict):
        P = np.asarray(sigma["P"], dtype=np.float64)
        D = np.asarray(sigma["D"], dtype=np.float64)
        sigma = P @ np.diag(D) @ P.T
    w = obj.get("w", [1.0 / p] * p)
    return ArgenConfig(
        lambda1=obj.get("lambda1", 0.0),
        lambda2=obj.get("lambda2", 0.0),
        w=w,
        sigma=sigma,
        s=s,
        t=_parse_bounds(obj["t"]),
        weight_entry=obj.get("weight_entry", "raw"),
    )
