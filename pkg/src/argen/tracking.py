"""Sparse index tracking with bounded, normalized ARGEN weights.

Workflow: read prices, turn them into simple returns, pick a universe
of ``N`` assets by bisecting on the l1 strength, tune ARGEN on that
universe, normalize the fitted coefficients into a long-only portfolio
and score it out of sample against an ARLS baseline.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .model import ArgenConfig, Dataset, config_to_dict, fit, make_preset
from .tuning import SearchSpace, bisection_lambda1, random_search

__all__ = [
    "INDEX_TICKER",
    "PriceFrame",
    "Portfolio",
    "read_prices_csv",
    "write_prices_csv",
    "compute_returns",
    "check_bound_feasibility",
    "uniform_lower_bound",
    "normalize_weights",
    "portfolio_returns",
    "select_universe",
    "track_metrics",
    "synthetic_index",
    "tracking_space",
    "run_tracking",
]

INDEX_TICKER = "INDEX"
TRADING_DAYS = 252
# finite stand-in for an unbounded upper limit during universe selection
SELECTION_UPPER = 1e6


class InfeasibleBoundsError(ValueError):
    pass


@dataclass
class PriceFrame:
    """Aligned price history: one row per date, one column per asset."""

    dates: list
    index_prices: np.ndarray
    asset_prices: np.ndarray
    tickers: list

    def __post_init__(self):
        self.dates = list(self.dates)
        self.tickers = list(self.tickers)
        self.index_prices = np.asarray(self.index_prices, dtype=np.float64)
        self.asset_prices = np.asarray(self.asset_prices, dtype=np.float64)
        T = len(self.dates)
        if self.index_prices.shape != (T,) or self.asset_prices.shape != (T, len(self.tickers)):
            raise ValueError("price shapes do not match dates/tickers")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if not (np.all(np.isfinite(self.index_prices)) and np.all(np.isfinite(self.asset_prices))):
            raise ValueError("prices must be finite")
        if np.any(self.index_prices <= 0) or np.any(self.asset_prices <= 0):
            raise ValueError("prices must be positive")

    @property
    def n_assets(self):
        return len(self.tickers)

    def take(self, columns):
        columns = list(columns)
        return PriceFrame(self.dates, self.index_prices, self.asset_prices[:, columns],
                          [self.tickers[j] for j in columns])


@dataclass
class Portfolio:
    weights: np.ndarray
    tickers: list
    bounds_used: tuple

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("portfolio weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("portfolio weights must sum to 1")


def read_prices_csv(path, max_missing=0.01):
    """Long-format prices (``date,ticker,adj_close``) into a ``PriceFrame``.

    Tickers missing more than ``max_missing`` of the dates are dropped,
    then any date with a remaining gap is dropped.  The index series
    uses ticker ``INDEX``.
    """
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "ticker", "adj_close"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"price file lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            raw = (row["adj_close"] or "").strip()
            if raw == "" or raw.lower() == "nan":
                continue
            try:
                price = float(raw)
            except ValueError:
                raise ValueError(f"line {lineno}: bad adj_close {raw!r}") from None
            table.setdefault(row["ticker"].strip(), {})[row["date"].strip()] = price
    if INDEX_TICKER not in table:
        raise ValueError(f"price file has no {INDEX_TICKER} rows")
    dates = sorted(set().union(*(d.keys() for d in table.values())))
    keep = [k for k in sorted(table) if k != INDEX_TICKER
            and len(dates) - len(table[k]) <= max_missing * len(dates)]
    cols = [INDEX_TICKER] + keep
    rows = [d for d in dates if all(d in table[k] for k in cols)]
    if len(rows) < 2:
        raise ValueError("fewer than two complete dates after filtering")
    index = [table[INDEX_TICKER][d] for d in rows]
    assets = [[table[k][d] for k in keep] for d in rows]
    return PriceFrame(rows, index, np.asarray(assets).reshape(len(rows), len(keep)), keep)


def write_prices_csv(frame, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "ticker", "adj_close"])
        for i, date in enumerate(frame.dates):
            writer.writerow([date, INDEX_TICKER, format(frame.index_prices[i], ".17g")])
            for j, tk in enumerate(frame.tickers):
                writer.writerow([date, tk, format(frame.asset_prices[i, j], ".17g")])


def compute_returns(prices):
    """Simple returns ``P_t / P_{t-1} - 1`` for the assets and the index.

    Accepts a ``PriceFrame`` or a bare price array (returned alone).
    """
    if isinstance(prices, PriceFrame):
        if len(prices.dates) < 2:
            raise ValueError("need at least two dates")
        return compute_returns(prices.asset_prices), compute_returns(prices.index_prices)
    P = np.asarray(prices, dtype=np.float64)
    if P.shape[0] < 2:
        raise ValueError("need at least two dates")
    if np.any(P <= 0):
        raise ValueError("prices must be positive")
    return P[1:] / P[:-1] - 1.0


def check_bound_feasibility(s, t):
    """Whether normalized weights are guaranteed to stay below ``t``.

    Holds when ``t_i + sum_{j != i} s_j >= 1`` for every ``i``.

    Returns
    -------
    ok : bool
    violations : list of int
        Indices where the inequality fails.
    """
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if s.shape != t.shape:
        raise ValueError("s and t must have the same shape")
    if np.any(s < 0):
        raise ValueError("long-only bounds need s >= 0")
    slack = t + (s.sum() - s) - 1.0
    bad = [int(i) for i in np.flatnonzero(slack < -1e-12)]
    return not bad, bad


def uniform_lower_bound(t0, p):
    """Smallest common lower bound that keeps ``[s0, t0]`` feasible for ``p`` assets."""
    if p < 2:
        return 0.0
    return (1.0 - t0) / (p - 1)


def normalize_weights(beta, t=None, tickers=None, s=None):
    """Scale nonnegative coefficients to sum one."""
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta < 0):
        raise ValueError("coefficients must be nonnegative")
    total = math.fsum(beta)
    if not total > 0:
        raise ValueError("coefficients must have a positive sum")
    w = beta / total
    # one correction pass so the sum is 1 to rounding
    w[np.argmax(w)] += 1.0 - math.fsum(w)
    tickers = list(range(beta.size)) if tickers is None else list(tickers)
    return Portfolio(w, tickers, (s, t))


def portfolio_returns(weights, returns, drift=False):
    """Daily portfolio returns for fixed initial weights.

    ``drift=False`` applies the same weights every day.  ``drift=True``
    lets holdings drift with prices (no rebalancing).
    """
    weights = np.asarray(weights, dtype=np.float64)
    R = np.asarray(returns, dtype=np.float64)
    if not drift:
        return R @ weights
    growth = np.vstack([np.ones(R.shape[1]), np.cumprod(1.0 + R, axis=0)[:-1]])
    value = growth * weights
    return (value * R).sum(axis=1) / value.sum(axis=1)


def track_metrics(portfolio_returns, benchmark_returns):
    """Tracking error, annualized volatility and cumulative return.

    Standard deviations use the population form (divide by ``T``).
    """
    rp = np.asarray(portfolio_returns, dtype=np.float64)
    rb = np.asarray(benchmark_returns, dtype=np.float64)
    if rp.shape != rb.shape or rp.ndim != 1:
        raise ValueError("return series must be 1-D with equal lengths")
    if rp.size == 0:
        raise ValueError("empty return series")
    te = float(np.std(rp - rb))
    arv = float(math.sqrt(TRADING_DAYS) * np.std(rp))
    cr = float(np.prod(1.0 + rp) - 1.0)
    return te, arv, cr


def select_universe(returns, index_returns, n_select, options=None, tickers=None):
    """Pick ``n_select`` assets by bisecting the l1 strength of a long-only fit.

    Uses equal weights, no quadratic penalty and bounds ``[0, 1e6]``.
    When no probed strength gives exactly ``n_select`` nonzeros, the
    largest strength with at least that many is used and its
    ``n_select`` largest coefficients are kept (ties, including zeros
    when even the unpenalized fit is too sparse, go to the lower column).
    Returns the selected tickers (column indices if ``tickers`` is None)
    and the bisection result.
    """
    X = np.asarray(returns, dtype=np.float64)
    p = X.shape[1]
    n_select = int(n_select)
    if not 1 <= n_select <= p:
        raise ValueError(f"n_select must be in [1, {p}]")
    tickers = list(range(p)) if tickers is None else list(tickers)
    if n_select == p:
        return tickers, None
    config = ArgenConfig(lambda1=0.0, lambda2=0.0, w=np.full(p, 1.0 / p), sigma=np.eye(p),
                         s=np.zeros(p), t=np.full(p, SELECTION_UPPER))
    data = Dataset(X, index_returns)
    result = bisection_lambda1(data, config, n_select, options)
    lam = result.lambda1
    if not result.reached:
        # count skipped over the target: use the sparsest fit with enough nonzeros
        dense = [l for l, n in result.trace if n >= n_select]
        lam = max(dense) if dense else 0.0
    model = fit(data, replace(config, lambda1=lam), options)
    order = np.argsort(-model.beta, kind="stable")
    chosen = sorted(int(j) for j in order[:n_select])
    return [tickers[j] for j in chosen], result


def synthetic_index(n_assets=20, true_k=5, noise_std=0.0, n_dates=400, seed=0):
    """Asset prices from a one-factor model and an index tracking ``true_k`` of them.

    The index return each day is a fixed convex combination of the
    constituents' returns plus ``N(0, noise_std^2)`` noise.

    Returns
    -------
    frame : PriceFrame
    constituents : list of str
    true_weights : ndarray
        Weights of the constituents, in the order of ``constituents``.
    """
    if not 1 <= true_k <= n_assets:
        raise ValueError("need 1 <= true_k <= n_assets")
    rng = np.random.default_rng(seed)
    T = n_dates - 1
    market = 0.01 * rng.standard_normal(T)
    beta = rng.uniform(0.5, 1.5, n_assets)
    R = 2e-4 + market[:, None] * beta + 0.015 * rng.standard_normal((T, n_assets))
    members = np.sort(rng.choice(n_assets, size=true_k, replace=False))
    weights = rng.uniform(0.5, 1.5, true_k)
    weights /= weights.sum()
    rb = R[:, members] @ weights + noise_std * rng.standard_normal(T)
    asset_prices = 100.0 * np.vstack([np.ones(n_assets), np.cumprod(1.0 + R, axis=0)])
    index_prices = 1000.0 * np.r_[1.0, np.cumprod(1.0 + rb)]
    tickers = [f"A{j:03d}" for j in range(n_assets)]
    dates = [f"d{i:05d}" for i in range(n_dates)]
    frame = PriceFrame(dates, index_prices, asset_prices, tickers)
    return frame, [tickers[j] for j in members], weights


def tracking_space(n_calls=200, seed=0):
    """Log-uniform strengths and binary weight/interaction grids."""
    return SearchSpace(lambda1_range=(1e-8, 5e-2), lambda2_range=(1e-8, 1e2),
                       w_up=1, d_up=1, n_calls=n_calls, seed=seed)


def run_tracking(prices, n_stocks, bounds=None, space=None, options=None,
                 window=TRADING_DAYS, val_fraction=0.2, drift=False, refit=True):
    """Full tracking pipeline on a ``PriceFrame``.

    The first ``window`` returns form the in-sample block: the last
    ``val_fraction`` of it is validation, the rest training.  Everything
    after is the test period, held with the weights fixed at the end of
    the in-sample block.

    ``bounds`` is ``(s, t)`` for the selected assets (scalars broadcast);
    the default is ``[(1 - 0.6)/(N - 1), 0.6]``.

    Returns
    -------
    dict
        ``universe``, ``weights``, ``TE``, ``ARV``, ``CR``, ``baseline``
        (same metrics for ARLS) and ``config``.
    """
    R, rb = compute_returns(prices)
    if R.shape[0] <= window:
        raise ValueError(f"need more than {window} returns, got {R.shape[0]}")
    n_val = int(round(val_fraction * window))
    if not 1 <= n_val < window:
        raise ValueError("val_fraction leaves an empty split")
    N = int(n_stocks)
    if bounds is None:
        bounds = (uniform_lower_bound(0.6, N), 0.6)
    s = np.broadcast_to(np.asarray(bounds[0], dtype=np.float64), (N,)).copy()
    t = np.broadcast_to(np.asarray(bounds[1], dtype=np.float64), (N,)).copy()
    ok, bad = check_bound_feasibility(s, t)
    if not ok:
        raise InfeasibleBoundsError(f"bounds violate t_i + sum_(j!=i) s_j >= 1 at {bad}")

    universe, _ = select_universe(R[:window], rb[:window], N, options, prices.tickers)
    cols = [prices.tickers.index(tk) for tk in universe]
    Xin, Xout = R[:window, cols], R[window:, cols]
    split = np.array(["train"] * (window - n_val) + ["validation"] * n_val, dtype=object)
    tune_data = Dataset(Xin, rb[:window], split)
    final_data = Dataset(Xin, rb[:window], np.where(split == "train", "train",
                                                    "train" if refit else "validation"))
    space = tracking_space() if space is None else space

    def evaluate(config):
        model = fit(final_data, config, options)
        port = normalize_weights(np.maximum(model.beta, 0.0), t, universe, s)
        te, arv, cr = track_metrics(portfolio_returns(port.weights, Xout, drift), rb[window:])
        return port, {"TE": te, "ARV": arv, "CR": cr}

    def val_te(model, val):
        beta = np.maximum(model.beta, 0.0)
        if not beta.sum() > 0:
            return math.inf
        w = beta / beta.sum()
        return track_metrics(portfolio_returns(w, val.X, drift), val.Y)[0]

    best, _ = random_search(tune_data, space, make_preset("ARGEN", N, (s, t)), options,
                            score=val_te)
    port, metrics = evaluate(best.config)
    base_config = make_preset("ARLS", N, (s, t)).config
    base_port, base_metrics = evaluate(base_config)
    return {
        "universe": universe,
        "weights": [float(x) for x in port.weights],
        **metrics,
        "baseline": {"method": "ARLS", "weights": [float(x) for x in base_port.weights],
                     **base_metrics},
        "config": {
            "argen": config_to_dict(best.config),
            "window": int(window),
            "n_validation": n_val,
            "n_test": int(R.shape[0] - window),
            "returns": "simple",
            "drift": bool(drift),
        },
    }
