"""Residual-fading trading strategy on top of the streaming regression.

Pipeline per day: express the target stream's return on the explanatory
returns (optionally compressed to a few tracked factor scores), take the
regression residual as the day's mispricing, and trade against its sign.
Position size is the whole endowment divided by the contract's dollar value,
orders are the integer-contract difference from the held book, and the day's
profit applies yesterday's position to today's price move, so nothing in the
ledger looks ahead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .eigentrack import EigenTracker
from .estimator import (
    DEFAULT_PRIOR_SCALE,
    FlsEstimator,
    KalmanEstimator,
    Smoothing,
)
from .ingest import ReturnMatrix
from .util import fmt_g17, write_rows

RULES = ("mean-reversion", "buy-hold")
ENGINES = ("kalman", "fls")
FEATURE_MODES = ("raw", "svd")


@dataclass(frozen=True)
class SizingConfig:
    """Contract sizing: endowment committed per day and contract multiplier.

    ``cost_per_contract`` is charged on every contract traded (default
    zero, matching a frictionless account).
    """

    multiplier: float = 250.0
    endowment: float = 1e8
    cost_per_contract: float = 0.0

    def __post_init__(self) -> None:
        if not (self.multiplier > 0.0):
            raise ValueError(f"multiplier must be positive, got {self.multiplier}")
        if not (self.endowment > 0.0):
            raise ValueError(f"endowment must be positive, got {self.endowment}")
        if self.cost_per_contract < 0.0:
            raise ValueError("cost_per_contract must be >= 0")


@dataclass(frozen=True)
class EstimatorConfig:
    """Regression engine selection for the backtest."""

    delta: float
    prior_scale: float = DEFAULT_PRIOR_SCALE
    veps: float = 1.0
    engine: str = "kalman"

    def __post_init__(self) -> None:
        Smoothing(self.delta)   # validates the range
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not (self.prior_scale > 0.0):
            raise ValueError("prior_scale must be positive")
        if not (self.veps > 0.0):
            raise ValueError("veps must be positive")


@dataclass(frozen=True)
class FeatureConfig:
    """Feature pipeline: raw explanatory returns, or tracked factor scores."""

    mode: str = "raw"
    k: int = 3
    amnesia: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in FEATURE_MODES:
            raise ValueError(
                f"mode must be one of {FEATURE_MODES}, got {self.mode!r}"
            )
        if self.mode == "svd" and self.k < 1:
            raise ValueError("k must be >= 1 in svd mode")


def spread(target_return: float, features, beta) -> float:
    """Residual of the target return against the fitted combination."""
    features = np.asarray(features, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return float(target_return) - float(features @ beta)


def signal(spread_value: float) -> int:
    """Trade against the residual: -1 rich, +1 cheap, 0 on the knife edge."""
    if math.isnan(spread_value):
        raise ValueError("spread is NaN")
    if spread_value > 0.0:
        return -1
    if spread_value < 0.0:
        return 1
    return 0


def position(sig: int, index_price: float, sizing: SizingConfig) -> float:
    """Suggested (real-valued) contract count for a signal at today's price."""
    if sig not in (-1, 0, 1):
        raise ValueError(f"signal must be -1, 0 or 1, got {sig!r}")
    if not (index_price > 0.0):
        raise ValueError(f"index price must be positive, got {index_price}")
    return sig * sizing.endowment / (sizing.multiplier * index_price)


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0.0 else int(math.ceil(v - 0.5))


def order_size(suggested: float, held: int) -> int:
    """Contracts to trade so the integer book tracks the suggestion.

    Rounds half away from zero, which is odd-symmetric: mirroring every
    spread flips every order exactly.  Keeping the book within half a
    contract of the running suggestion bounds the drift at one contract.
    """
    return _round_half_away(suggested - held)


def daily_pnl(
    price_now: float, price_prev: float, held_suggested: float, sizing: SizingConfig
) -> float:
    """Mark-to-market profit of yesterday's position over today's move."""
    return sizing.multiplier * (price_now - price_prev) * held_suggested


@dataclass
class SpreadPath:
    """Per-day estimation record from one pass over the returns.

    ``active`` marks rows where the estimator actually ran; during feature
    warm-up the residual falls back to the raw target return and the
    coefficient row stays NaN.  ``innovations`` and ``forecast_vars`` are
    filled only by the Kalman engine.
    """

    spreads: NDArray[np.float64]
    betas: NDArray[np.float64]
    innovations: NDArray[np.float64]
    forecast_vars: NDArray[np.float64]
    active: NDArray[np.bool_]

    def __len__(self) -> int:
        return len(self.spreads)


def estimate_spreads(
    returns: ReturnMatrix,
    estimator: EstimatorConfig,
    features: FeatureConfig = FeatureConfig(),
) -> SpreadPath:
    """Run the regression over the return rows and record the residuals.

    Each row first updates the feature pipeline, then the estimator with
    that row's feature vector and target return; the residual uses the
    just-updated coefficients.  Everything consumed at row ``i`` is known
    at row ``i``, so downstream trading sees no future data.
    """
    n = len(returns)
    n_raw = returns.features.shape[1]
    if features.mode == "svd":
        if features.k > n_raw:
            raise ValueError(
                f"k={features.k} factor scores from {n_raw} streams"
            )
        dim = features.k
        tracker = EigenTracker(n_raw, features.k, amnesia=features.amnesia)
    else:
        dim = n_raw
        tracker = None

    smoothing = Smoothing(estimator.delta)
    if estimator.engine == "kalman":
        engine = KalmanEstimator.from_smoothing(
            dim, smoothing, veps=estimator.veps, prior_scale=estimator.prior_scale
        )
    else:
        engine = FlsEstimator(dim, smoothing, s0_scale=1.0 / estimator.prior_scale)

    spreads = np.empty(n)
    betas = np.full((n, dim), np.nan)
    innovations = np.full(n, np.nan)
    forecast_vars = np.full(n, np.nan)
    active = np.zeros(n, dtype=bool)

    for i in range(n):
        raw = returns.features[i]
        a = float(returns.target[i])
        if tracker is not None:
            tracker.update(raw)
            if not tracker.ready:
                spreads[i] = a
                continue
            f = tracker.project(raw)
        else:
            f = raw
        if isinstance(engine, KalmanEstimator):
            diag = engine.update(f, a)
            innovations[i] = diag.innovation
            forecast_vars[i] = diag.forecast_var
            beta = engine.beta
        else:
            beta = engine.update(f, a)
        betas[i] = beta
        spreads[i] = a - float(f @ beta)
        active[i] = True

    return SpreadPath(
        spreads=spreads,
        betas=betas,
        innovations=innovations,
        forecast_vars=forecast_vars,
        active=active,
    )


@dataclass
class TradeLedger:
    """Day-by-day record of one backtest.

    ``position`` is the real-valued suggestion; ``order`` the integer
    contracts actually traded that day.  ``pnl`` applies the previous day's
    suggestion to the day's price move, minus any per-contract cost on the
    day's order.
    """

    dates: list
    spread: NDArray[np.float64]
    signal: NDArray[np.int64]
    position: NDArray[np.float64]
    order: NDArray[np.int64]
    pnl: NDArray[np.float64]
    index_price: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = len(self.dates)
        for name in ("spread", "signal", "position", "order", "pnl", "index_price"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"ledger column {name} misaligned")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def cum_pnl(self) -> NDArray[np.float64]:
        return np.cumsum(self.pnl)


def simulate_trading(
    dates,
    spreads,
    index_prices,
    sizing: SizingConfig = SizingConfig(),
    warmup: int = 0,
    rule: str = "mean-reversion",
    active=None,
) -> TradeLedger:
    """Fold residuals and prices into a trade ledger.

    ``index_prices`` has one more entry than ``spreads``: the leading price
    anchors the first day's move.  Rows before ``warmup`` (and rows flagged
    inactive) are forced flat.  ``rule`` is ``mean-reversion`` (trade
    against the residual) or ``buy-hold`` (always long, the baseline).
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    spreads = np.asarray(spreads, dtype=float)
    index_prices = np.asarray(index_prices, dtype=float)
    n = len(spreads)
    if len(dates) != n:
        raise ValueError(f"{len(dates)} dates for {n} spread rows")
    if index_prices.shape != (n + 1,):
        raise ValueError(
            f"index_prices must have length {n + 1} (one leading anchor price), "
            f"got {len(index_prices)}"
        )
    if not (warmup >= 0):
        raise ValueError("warmup must be >= 0")

    signals = np.zeros(n, dtype=np.int64)
    positions = np.zeros(n)
    orders = np.zeros(n, dtype=np.int64)
    pnl = np.zeros(n)

    held = 0            # integer contracts on the book
    prev_suggested = 0.0
    for i in range(n):
        if i < warmup or (active is not None and not active[i]):
            sig = 0
        elif rule == "buy-hold":
            sig = 1
        else:
            sig = signal(float(spreads[i]))
        price = float(index_prices[i + 1])
        suggested = position(sig, price, sizing)
        traded = order_size(suggested, held)
        held += traded
        day = daily_pnl(price, float(index_prices[i]), prev_suggested, sizing)
        if sizing.cost_per_contract:
            day -= sizing.cost_per_contract * abs(traded)
        signals[i] = sig
        positions[i] = suggested
        orders[i] = traded
        pnl[i] = day
        prev_suggested = suggested

    return TradeLedger(
        dates=list(dates),
        spread=spreads.copy(),
        signal=signals,
        position=positions,
        order=orders,
        pnl=pnl,
        index_price=index_prices[1:].copy(),
    )


def run_backtest(
    returns: ReturnMatrix,
    index_prices,
    estimator: EstimatorConfig,
    features: FeatureConfig = FeatureConfig(),
    sizing: SizingConfig = SizingConfig(),
    warmup: int = 0,
    rule: str = "mean-reversion",
) -> tuple[TradeLedger, SpreadPath]:
    """Estimate residuals, then trade them.  Returns (ledger, spread path).

    ``index_prices`` must align with the return rows plus a leading anchor
    price (length ``len(returns) + 1``).
    """
    path = estimate_spreads(returns, estimator, features)
    ledger = simulate_trading(
        returns.dates,
        path.spreads,
        index_prices,
        sizing=sizing,
        warmup=warmup,
        rule=rule,
        active=path.active,
    )
    return ledger, path


def write_ledger_csv(path, ledger: TradeLedger) -> None:
    """Write a ledger as CSV with a running cumulative profit column."""
    header = [
        "date",
        "spread",
        "signal",
        "position",
        "order",
        "pnl",
        "cum_pnl",
        "index_price",
    ]
    cum = ledger.cum_pnl

    def rows():
        for i in range(len(ledger)):
            yield [
                ledger.dates[i].isoformat(),
                fmt_g17(ledger.spread[i]),
                str(int(ledger.signal[i])),
                fmt_g17(ledger.position[i]),
                str(int(ledger.order[i])),
                fmt_g17(ledger.pnl[i]),
                fmt_g17(cum[i]),
                fmt_g17(ledger.index_price[i]),
            ]

    write_rows(path, header, rows())
