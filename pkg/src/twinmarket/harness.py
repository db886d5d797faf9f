"""Incomplete-model simulators and indistinguishability experiments."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import RoundedToZero
from .market import (
    CompleteTwin,
    PriceSeries,
    WeightConfig,
    build_twin,
)

__all__ = [
    "IncompleteModelSpec",
    "ExperimentReport",
    "HypothesisRow",
    "simulate_incomplete",
    "round_to_tick",
    "tick_counts",
    "indistinguishability_experiment",
    "hypothesis_report",
    "predictability_demo",
    "future_divergence",
    "GOLDEN_SPEC",
]

KINDS = ("random_size_binomial", "iid_uniform_magnitude")


@dataclass(frozen=True)
class IncompleteModelSpec:
    """A binomial model whose step sizes are random and not predictable.

    ``random_size_binomial``: at each step a size ``d`` uniform on
    ``[low, high]`` and an independent fair sign; ``xi = +-d``.

    ``iid_uniform_magnitude``: independent up and down sizes, each uniform on
    ``[low, high]``; the up move is taken with the probability
    ``d_down / (d_up + d_down)`` that makes the discounted price a martingale.
    """

    magnitude_low: float = 0.005
    magnitude_high: float = 0.05
    horizon: int = 64
    seed: int = 42
    rho: float = 1.0
    initial_price: float = 100.0
    kind: str = "random_size_binomial"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not (0 < self.magnitude_low <= self.magnitude_high < 1):
            raise ValueError("need 0 < magnitude_low <= magnitude_high < 1")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if not self.initial_price > 0:
            raise ValueError("initial_price must be > 0")


GOLDEN_SPEC = IncompleteModelSpec(0.005, 0.05, 64, 42, 1.0, 100.0)


def _simulate_returns(spec: IncompleteModelSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    n = spec.horizon
    lo, hi = spec.magnitude_low, spec.magnitude_high
    if spec.kind == "random_size_binomial":
        d = rng.uniform(lo, hi, n)
        up = rng.random(n) < 0.5
        return np.where(up, d, -d)
    d_up = rng.uniform(lo, hi, n)
    d_dn = rng.uniform(lo, hi, n)
    up = rng.random(n) < d_dn / (d_up + d_dn)
    return np.where(up, d_up, -d_dn)


def simulate_incomplete(spec: IncompleteModelSpec) -> PriceSeries:
    """Price path on ``t = -N..0`` starting from ``initial_price`` at ``-N``.

    Deterministic given ``spec`` (seeded ``numpy.random.default_rng``).
    """
    xi = _simulate_returns(spec)
    disc = (spec.initial_price / spec.rho ** -spec.horizon) * np.concatenate(
        ([1.0], np.cumprod(1.0 + xi))
    )
    bond = spec.rho ** np.arange(-spec.horizon, 1, dtype=float)
    prices = disc * bond
    prices[0] = spec.initial_price
    return PriceSeries(prices, spec.rho, 1.0)


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def tick_counts(prices, tick: float) -> np.ndarray:
    """Nearest tick multiple for each price, as an integer count (half-up)."""
    if not tick > 0:
        raise ValueError("tick must be > 0")
    dt = _dec(tick)
    return np.array(
        [int((_dec(p) / dt).quantize(Decimal(1), rounding=ROUND_HALF_UP)) for p in prices],
        dtype=np.int64,
    )


def round_to_tick(prices: PriceSeries, tick: float) -> PriceSeries:
    """Round every price to the nearest multiple of ``tick``, halves up."""
    k = tick_counts(prices.prices, tick)
    dt = _dec(tick)
    rounded = np.array([float(int(n) * dt) for n in k])
    bad = np.flatnonzero(rounded <= 0)
    if bad.size:
        i = int(bad[0])
        raise RoundedToZero(prices.tau + i, float(prices.prices[i]), tick)
    return PriceSeries(rounded, prices.rho, prices.bond_base)


@dataclass(frozen=True)
class ExperimentReport:
    """Outcome of one indistinguishability run.

    ``per_time_rounded_gap`` maps each time to ``|round(S) - round(S_eps)|``
    counted in ticks. ``h_a_rejectable`` is true only when no complete twin
    within epsilon was exhibited.
    """

    seed: int
    epsilon: float
    tick: float
    sup_price_error: float
    sup_return_error: float
    combined_error: float
    omega_used: float
    per_time_rounded_gap: dict
    fraction_rounded_equal: float
    within_epsilon: bool
    twin_valid: bool
    violations: tuple
    h_a_rejectable: bool
    warnings: tuple = ()
    search: tuple = ()
    twin: CompleteTwin | None = field(default=None, repr=False, compare=False)

    @property
    def max_gap_ticks(self) -> int:
        return max(self.per_time_rounded_gap.values())


def _rounded_gaps(times, s, s_eps, tick):
    gaps = np.abs(tick_counts(s, tick) - tick_counts(s_eps, tick))
    return {int(t): int(g) for t, g in zip(times, gaps)}


def indistinguishability_experiment(
    spec: IncompleteModelSpec,
    epsilon: float,
    tick: float,
    weights: WeightConfig = WeightConfig(),
    omega_grid=None,
    lam: float = 0.0,
) -> ExperimentReport:
    """Simulate an incomplete path, build its twin and compare both after rounding.

    When the twin's sup price error is below ``tick/2`` every rounded gap is
    at most one tick. The Ha verdict ("magnitudes form a predictable path")
    cannot be rejected whenever a valid twin within ``epsilon`` exists.
    """
    prices = simulate_incomplete(spec)
    return _experiment_on(prices, spec.seed, epsilon, tick, weights, omega_grid, lam)


def _experiment_on(prices, seed, epsilon, tick, weights, omega_grid, lam):
    if not tick > 0:
        raise ValueError("tick must be > 0")
    round_to_tick(prices, tick)
    warnings = []
    if epsilon > tick / 2:
        warnings.append("epsilon_exceeds_half_tick")
    twin = build_twin(prices, epsilon, weights, omega_grid, lam)
    if twin.failure is not None:
        warnings.append("not_within_epsilon")
    if not twin.valid:
        warnings.append("twin_invalid")
    gaps = _rounded_gaps(prices.times, prices.prices, twin.s_eps, tick)
    equal = sum(1 for g in gaps.values() if g == 0)
    witness = twin.within_epsilon and twin.valid
    return ExperimentReport(
        seed=seed,
        epsilon=float(epsilon),
        tick=float(tick),
        sup_price_error=twin.sup_price_error,
        sup_return_error=twin.sup_return_error,
        combined_error=twin.combined_error,
        omega_used=twin.omega,
        per_time_rounded_gap=gaps,
        fraction_rounded_equal=equal / len(gaps),
        within_epsilon=twin.within_epsilon,
        twin_valid=twin.valid,
        violations=twin.violations,
        h_a_rejectable=not witness,
        warnings=tuple(warnings),
        search=twin.search,
        twin=twin,
    )


@dataclass(frozen=True)
class HypothesisRow:
    epsilon: float
    feasible: bool
    omega: float
    combined_error: float
    twin_valid: bool


def hypothesis_report(
    prices: PriceSeries,
    epsilons,
    weights: WeightConfig = WeightConfig(),
    omega_grid=None,
    lam: float = 0.0,
) -> list[HypothesisRow]:
    """Twin feasibility for each epsilon, given in descending order.

    Feasibility is monotone: a feasible epsilon makes every larger one
    feasible, so infeasible rows may only form a suffix. This is asserted.
    """
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(b > a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be sorted descending")
    rows = []
    for e in eps:
        twin = build_twin(prices, e, weights, omega_grid, lam)
        rows.append(HypothesisRow(e, twin.within_epsilon, twin.omega, twin.combined_error, twin.valid))
    feas = [r.feasible for r in rows]
    if True in feas:
        last = len(feas) - 1 - feas[::-1].index(True)
        assert all(feas[: last + 1]), "feasibility is not monotone in epsilon"
    return rows


def predictability_demo(twin: CompleteTwin, horizon: int) -> dict[int, float]:
    """Future magnitudes ``a_eps(t)`` for ``t = 1..horizon`` from the twin's past."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return {}
    t = np.arange(1, horizon + 1)
    return {int(k): float(v) for k, v in zip(t, twin.magnitude(t))}


def future_divergence(prices: PriceSeries, twin: CompleteTwin, future_xi) -> float:
    """Sup over the horizon of ``| |xi(t)| - a_eps(t) |`` for realised future returns.

    No threshold applies; past closeness does not make futures close.
    """
    future_xi = np.asarray(future_xi, dtype=float)
    if future_xi.size == 0:
        return 0.0
    pred = twin.magnitude(np.arange(1, future_xi.size + 1))
    return float(np.max(np.abs(np.abs(future_xi) - pred)))
