"""Seeded data generators and the replicate benchmark harness.

Covers the eight regression scenarios (``gen_example``), the sparse
spike recovery problem (``gen_signal_recovery``) and the loop that
tunes each named estimator on validation data and records its test MSE
(``run_benchmark``).
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ArgenConfig, Dataset, fit, make_preset
from .tuning import SearchSpace, oracle_mse, random_search

__all__ = [
    "SimScenario",
    "ReplicateReport",
    "BenchmarkResult",
    "FREE_LOWER",
    "DEFAULT_N_CALLS",
    "correlation_matrix",
    "latent_factor_design",
    "gen_example",
    "gen_signal_recovery",
    "signal_recovery_config",
    "run_signal_recovery",
    "orthonormalize_rows",
    "center",
    "median_with_se",
    "run_benchmark",
    "estimation_errors",
]

# finite stand-in for an absent lower bound
FREE_LOWER = -1000.0

DEFAULT_N_CALLS = {
    "ARLS": 1,
    "ARL": 100,
    "ARR": 100,
    "AREN": 500,
    "ARGL": 1280,
    "ARGR": 1280,
    "ARLEN": 2560,
    "ARREN": 2560,
    "ARGEN": 6554,
}


@dataclass
class SimScenario:
    """Recipe for one simulated regression problem.

    ``corr`` is ``("power", rho)`` for ``rho**|i-j|``, ``("constant", rho)``
    or ``("latent", noise_var)`` for the three-factor grouped design.
    """

    beta_star: np.ndarray
    noise_std: float
    corr: tuple
    n_train: int
    n_val: int
    n_test: int
    bounds: tuple
    example: int = 0

    def __post_init__(self):
        self.beta_star = np.asarray(self.beta_star, dtype=np.float64)
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    @property
    def p(self):
        return self.beta_star.size

    @property
    def q(self):
        return int(np.count_nonzero(self.beta_star))

    def fit_bounds(self):
        """Bounds usable by the estimator: an absent lower bound becomes ``FREE_LOWER``."""
        s, t = self.bounds
        s = np.where(np.isfinite(s), s, FREE_LOWER)
        return s, np.asarray(t, dtype=np.float64)


@dataclass
class ReplicateReport:
    mses: list
    median: float
    se: float
    n_failed: int = 0


@dataclass
class BenchmarkResult:
    example: int
    rows: list
    reports: dict
    meta: dict = field(default_factory=dict)

    def rows_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["example", "method", "replicate", "test_mse"])
        for ex, method, rep, mse in self.rows:
            writer.writerow([ex, method, rep, format(mse, ".17g")])
        return buf.getvalue()

    def summary(self):
        return {
            "example": self.example,
            "methods": {
                m: {"median": r.median, "se": r.se, "n_ok": len(r.mses), "n_failed": r.n_failed}
                for m, r in self.reports.items()
            },
            **self.meta,
        }


def correlation_matrix(p, kind, rho):
    idx = np.arange(p)
    if kind == "power":
        return rho ** np.abs(idx[:, None] - idx[None, :])
    if kind == "constant":
        C = np.full((p, p), float(rho))
        np.fill_diagonal(C, 1.0)
        return C
    raise ValueError(f"unknown correlation kind {kind!r}")


def latent_factor_design(n, p, rng, noise_var=0.01):
    """Three latent factors shared by pairs (x1,x2), (x3,x4), (x5,x6); the rest iid."""
    if p < 6:
        raise ValueError("latent design needs p >= 6")
    Z = rng.standard_normal((n, 3))
    X = rng.standard_normal((n, p))
    X[:, :6] = np.repeat(Z, 2, axis=1) + math.sqrt(noise_var) * rng.standard_normal((n, 6))
    return X


def _design(scenario, n, rng):
    kind, param = scenario.corr
    if kind == "latent":
        return latent_factor_design(n, scenario.p, rng, param)
    C = correlation_matrix(scenario.p, kind, param)
    L = np.linalg.cholesky(C)
    return rng.standard_normal((n, scenario.p)) @ L.T


def _scenario(k, scenario_seed=0):
    free = (np.full(8, -np.inf), np.full(8, np.inf))
    ex1 = dict(noise_std=3.0, corr=("power", 0.5), n_train=20, n_val=20, n_test=200)
    if k == 1:
        return SimScenario([3, 1.5, 0, 0, 2, 0, 0, 0], bounds=free, example=1, **ex1)
    if k == 2:
        return SimScenario(np.full(8, 0.85), bounds=free, example=2, **ex1)
    if k == 3:
        beta = np.r_[np.zeros(10), np.full(10, 2.0), np.zeros(10), np.full(10, 2.0)]
        return SimScenario(beta, 15.0, ("constant", 0.5), 100, 100, 400,
                           (np.full(40, -np.inf), np.full(40, np.inf)), example=3)
    if k in (4, 8):
        sign = 1.0 if k == 4 else -1.0
        beta = np.r_[np.full(6, 3.0 * sign), np.zeros(9)]
        sizes = (40, 40, 100) if k == 4 else (5, 5, 50)
        lower = -np.inf if k == 4 else -1000.0
        return SimScenario(beta, 15.0, ("latent", 0.01), *sizes,
                           (np.full(15, lower), np.full(15, np.inf)), example=k)
    if k == 5:
        return SimScenario([-3, -1.5, 0, 0, 2, 0, 0, 0],
                           bounds=(np.full(8, -1000.0), np.full(8, np.inf)), example=5, **ex1)
    if k == 6:
        beta = np.random.default_rng(np.random.SeedSequence([6, scenario_seed])).uniform(-5, 5, 8)
        return SimScenario(beta, bounds=(np.full(8, -5.0), np.full(8, 5.0)), example=6, **ex1)
    if k == 7:
        return SimScenario([-6, -8, 0, 0, 7, 0, 0, 0],
                           bounds=(np.full(8, -5.0), np.full(8, 5.0)), example=7, **ex1)
    raise ValueError(f"example must be in 1..8, got {k}")


def gen_example(k, seed, n_train=None, scenario_seed=0):
    """Draw train/validation/test data for scenario ``k`` (1..8).

    ``n_train`` overrides the scenario's training size.  Example 6's
    random coefficients come from ``scenario_seed`` so that they stay
    fixed across replicates.
    """
    scenario = _scenario(int(k), scenario_seed)
    if n_train is not None:
        scenario.n_train = int(n_train)
    rng = np.random.default_rng(seed)
    sizes = (scenario.n_train, scenario.n_val, scenario.n_test)
    n = sum(sizes)
    X = _design(scenario, n, rng)
    Y = X @ scenario.beta_star + scenario.noise_std * rng.standard_normal(n)
    split = np.repeat(np.array(["train", "validation", "test"], dtype=object), sizes)
    return Dataset(X, Y, split), scenario


def orthonormalize_rows(X):
    """Gram-Schmidt on the rows of ``X`` (``n <= p``), via Householder QR.

    Column signs are fixed so the result matches classical Gram-Schmidt.
    """
    Q, R = np.linalg.qr(X.T)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return (Q * signs).T.copy()


def gen_signal_recovery(variant="constant", seed=0, n=1024, p=4096, n_spikes=160,
                        noise_std=0.1, reduced=False):
    """Sparse spike recovery: ``n x p`` design with orthonormal rows.

    ``variant="constant"`` gives unit spikes, ``"uniform"`` spikes with
    amplitudes drawn from ``U[0, 1)``.  ``reduced=True`` shrinks the
    problem to ``n=256, p=1024`` with 40 spikes.
    """
    if reduced:
        n, p, n_spikes = 256, 1024, 40
    if variant not in ("constant", "uniform"):
        raise ValueError("variant must be 'constant' or 'uniform'")
    rng = np.random.default_rng(seed)
    support = rng.choice(p, size=n_spikes, replace=False)
    beta = np.zeros(p)
    beta[support] = 1.0 if variant == "constant" else rng.uniform(0.0, 1.0, n_spikes)
    X = orthonormalize_rows(rng.standard_normal((n, p)))
    Y = X @ beta + noise_std * rng.standard_normal(n)
    scenario = SimScenario(beta, noise_std, ("orthonormal-rows", None), n, 0, 0,
                           (np.full(p, -1.0), np.full(p, 1.0)))
    return Dataset(X, Y), scenario


def signal_recovery_config(scenario, lambda1=10.0):
    """Oracle-weighted l1 fit: zero weight on the true support, one elsewhere.

    Uses knowledge of the true support by construction.
    """
    p = scenario.p
    w = np.where(scenario.beta_star != 0, 0.0, 1.0)
    s, t = scenario.bounds
    return ArgenConfig(lambda1=lambda1, lambda2=0.0, w=w, sigma=np.eye(p), s=s, t=t)


def run_signal_recovery(variant="constant", seed=0, options=None, **kwargs):
    """Generate, fit and score one spike-recovery problem.

    Returns a dict with the coefficient MSE ``mean((b - b*)^2)``, the
    design-weighted MSE, solver diagnostics and both coefficient vectors.
    """
    data, scenario = gen_signal_recovery(variant, seed, **kwargs)
    model = fit(data, signal_recovery_config(scenario), options)
    diff = model.beta - scenario.beta_star
    return {
        "variant": variant,
        "mse": float(np.mean(diff ** 2)),
        "oracle_mse": oracle_mse(model.beta, scenario.beta_star, data.X),
        "iterations": model.iterations,
        "converged": model.converged,
        "kkt_residual": model.kkt_residual,
        "beta_true": scenario.beta_star,
        "beta_hat": model.beta,
    }


def center(data, fit_rows):
    """Shift all rows by the means of ``fit_rows`` (X and Y)."""
    xm = data.X[fit_rows].mean(axis=0)
    ym = data.Y[fit_rows].mean()
    return Dataset(data.X - xm, data.Y - ym, data.split)


def median_with_se(values, n_boot=1000, seed=0):
    """Median and its bootstrap standard error."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return math.nan, math.nan
    med = float(np.median(values))
    if values.size == 1:
        return med, 0.0
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    return med, float(np.std(np.median(values[idx], axis=1), ddof=1))


def _replicate(example, rep, methods, n_calls, space, seed, options, refit):
    ss = np.random.SeedSequence([seed, rep])
    data_seed, tune_seed = ss.spawn(2)
    raw, scenario = gen_example(example, np.random.default_rng(data_seed))
    s, t = scenario.fit_bounds()
    tuning_data = center(raw, raw.split == "train")
    fit_rows = np.isin(raw.split, ["train", "validation"]) if refit else raw.split == "train"
    final = center(raw, fit_rows)
    final = Dataset(final.X, final.Y, np.where(fit_rows, "train", "test"))
    X_test = raw.test.X
    out = []
    tune_seeds = tune_seed.generate_state(len(methods))
    for j, method in enumerate(methods):
        try:
            template = make_preset(method, scenario.p, (s, t))
            calls = n_calls[method] if isinstance(n_calls, dict) else int(n_calls)
            sp = SearchSpace(**{**space, "n_calls": calls, "seed": int(tune_seeds[j])})
            best, _ = random_search(tuning_data, sp, template, options)
            model = fit(final, best.config, options)
            out.append((method, oracle_mse(model.beta, scenario.beta_star, X_test)))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            out.append((method, None))
    return out


def run_benchmark(example, methods, replicates, n_calls=None, seed=0, space=None,
                  options=None, refit=True, jobs=1):
    """Tune each method per replicate and collect its test MSE.

    For each replicate a fresh dataset is drawn from ``(seed, replicate)``;
    every method is tuned by random search (fit on train, scored on
    validation), then refit with the chosen configuration on train plus
    validation (``refit=True``) or train only, and scored on the test
    rows by ``(b - b*)' X'X/n (b - b*)``.  Failed fits are counted and
    left out of the medians.
    """
    if int(replicates) < 1:
        raise ValueError("replicates must be >= 1")
    methods = [m.upper() for m in methods]
    n_calls = DEFAULT_N_CALLS if n_calls is None else n_calls
    space = {} if space is None else dict(space)
    space.pop("n_calls", None)
    space.pop("seed", None)

    def job(rep):
        return _replicate(example, rep, methods, n_calls, space, seed, options, refit)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, range(replicates)))
    else:
        results = [job(rep) for rep in range(replicates)]

    rows = []
    per_method = {m: [] for m in methods}
    failed = {m: 0 for m in methods}
    for rep, res in enumerate(results):
        for method, mse in res:
            if mse is None:
                failed[method] += 1
                continue
            rows.append((example, method, rep, mse))
            per_method[method].append(mse)
    reports = {}
    for j, m in enumerate(methods):
        med, se = median_with_se(per_method[m], seed=seed + j)
        reports[m] = ReplicateReport(per_method[m], med, se, failed[m])
    meta = {"replicates": int(replicates), "seed": int(seed), "refit": bool(refit),
            "n_calls": {m: (n_calls[m] if isinstance(n_calls, dict) else int(n_calls)) for m in methods}}
    return BenchmarkResult(example, rows, reports, meta)


def estimation_errors(example, config, n_train, replicates, seed=0, options=None):
    """``||b_hat - b*||_2`` for a fixed configuration over fresh datasets."""
    errs = []
    for rep in range(replicates):
        raw, scenario = gen_example(example, np.random.default_rng([seed, rep]), n_train=n_train)
        data = center(raw, raw.split == "train")
        model = fit(data, config, options)
        errs.append(float(np.linalg.norm(model.beta - scenario.beta_star)))
    return errs
