"""Price and return model, and the complete-twin construction.

Given observed prices on a window ``tau..0``, the twin keeps the signs of
the discounted returns and replaces their magnitudes with a band-limited
sequence. Band-limited sequences are determined by their past, so the twin's
return magnitudes are predictable and its price tree is conditionally
two-point, i.e. complete.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .banlim import (
    BandLimitedExtension,
    BandSpec,
    SampledSignal,
    evaluate,
    interpolate_bandlimited,
)
from .errors import NotWithinEpsilon, ReturnOutOfRange

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "WeightConfig",
    "CompleteTwin",
    "TwinReport",
    "discount",
    "decompose",
    "build_twin",
    "verify_twin",
    "weighted_norm",
    "default_omega_grid",
    "sign",
]


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def sign(x):
    """+1 for x >= 0, -1 otherwise (so sign(0) = +1)."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class PriceSeries:
    """Stock prices ``S(t)`` on the contiguous window ``tau..0``.

    The bond is ``B(t) = bond_base * rho**t`` so that ``B(0) = bond_base``.
    """

    prices: np.ndarray
    rho: float = 1.0
    bond_base: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need at least two prices")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(p) & (p > 0)))[0]) - (p.size - 1)
            raise ValueError(f"prices must be positive and finite (t={bad})")
        if not (self.rho >= 1.0 and math.isfinite(self.rho)):
            raise ValueError("rho must be >= 1")
        if not self.bond_base > 0:
            raise ValueError("bond_base must be > 0")
        object.__setattr__(self, "prices", _frozen(p))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "bond_base", float(self.bond_base))

    @classmethod
    def from_mapping(cls, prices: dict[int, float], rho: float = 1.0, bond_base: float = 1.0):
        times = sorted(prices)
        if times[-1] != 0 or times != list(range(times[0], 1)):
            raise ValueError("price times must be contiguous integers ending at 0")
        return cls(np.array([prices[t] for t in times]), rho, bond_base)

    @property
    def tau(self) -> int:
        return -(self.prices.size - 1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.tau, 1)

    def bond(self, t=None):
        t = self.times if t is None else np.asarray(t)
        return self.bond_base * self.rho ** t.astype(float)

    def discounted(self) -> np.ndarray:
        return self.prices / self.bond()

    def tail(self, n: int) -> "PriceSeries":
        """The last ``n + 1`` prices, i.e. the window ``-n..0``."""
        if n < 1:
            raise ValueError("window must be >= 1")
        return PriceSeries(self.prices[-(n + 1):], self.rho, self.bond_base)

    def __len__(self) -> int:
        return int(self.prices.size)


@dataclass(frozen=True)
class ReturnSeries:
    """Discounted returns ``xi(t)`` for ``t = tau+1..0`` and the anchor ``S~(tau)``."""

    xi: np.ndarray
    reference_price: float

    def __post_init__(self):
        object.__setattr__(self, "xi", _frozen(self.xi))
        object.__setattr__(self, "reference_price", float(self.reference_price))

    @property
    def tau(self) -> int:
        return -int(self.xi.size)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.tau + 1, 1)

    def discounted_prices(self) -> np.ndarray:
        """``S~(t)`` for ``t = tau..0`` rebuilt from the returns."""
        return self.reference_price * np.concatenate(([1.0], np.cumprod(1.0 + self.xi)))


@dataclass(frozen=True)
class WeightConfig:
    """Polynomial weight ``(1 + |t|)**M``; ``M = 0`` for the finite-window case."""

    M: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.M) and self.M >= 0):
            raise ValueError("M must be finite and >= 0")
        object.__setattr__(self, "M", float(self.M))

    def weight(self, t) -> np.ndarray:
        return (1.0 + np.abs(np.asarray(t, dtype=float))) ** self.M

    def tail_bound(self, tau: int) -> float:
        """Upper bound on ``sum_{t < tau} (1+|t|)^(-2M) * xi(t)**2`` given ``|xi| < 1``.

        Infinite when ``M <= 1/2``.
        """
        s = 2.0 * self.M
        if s <= 1.0:
            return math.inf
        return float(special.zeta(s, abs(tau) + 2))


def discount(prices: PriceSeries) -> ReturnSeries:
    """Discounted returns ``xi(t) = S~(t)/S~(t-1) - 1``.

    Raises :class:`ReturnOutOfRange` at the first ``t`` with ``|xi(t)| >= 1``.
    """
    sd = prices.discounted()
    xi = sd[1:] / sd[:-1] - 1.0
    bad = np.flatnonzero(~(np.abs(xi) < 1.0))
    if bad.size:
        i = int(bad[0])
        raise ReturnOutOfRange(prices.tau + 1 + i, float(xi[i]))
    return ReturnSeries(xi, sd[0])


def decompose(returns: ReturnSeries, weights: WeightConfig = WeightConfig()):
    """Split returns into signs and weighted magnitudes.

    Returns ``(zeta, x)`` where ``zeta`` is an int8 array of +-1 aligned with
    ``returns.times`` and ``x`` is the :class:`SampledSignal`
    ``(1+|t|)^(-M) |xi(t)|``.
    """
    t = returns.times
    zeta = sign(returns.xi)
    x = np.abs(returns.xi) / weights.weight(t)
    return zeta, SampledSignal(t, x)


def weighted_norm(x: SampledSignal, weights: WeightConfig = WeightConfig()) -> float:
    """``(sum_t (1+|t|)^(-2M) x(t)^2) ** 0.5``."""
    w = weights.weight(x.times)
    return float(np.sqrt(np.sum((x.values / w) ** 2)))


def default_omega_grid() -> list[float]:
    """``0.5*pi, 0.545*pi, ..., 0.995*pi``."""
    return [math.pi * (0.5 + 0.045 * k) for k in range(12)]


@dataclass(frozen=True)
class CompleteTwin:
    """An approximating complete model on the observation window.

    Arrays are indexed by time; ``times`` covers the return times
    ``tau+1..0`` and ``s_eps``/``price_times`` cover ``tau..0``.
    """

    times: np.ndarray
    zeta: np.ndarray
    a_eps: np.ndarray
    xi_eps: np.ndarray
    s_eps: np.ndarray
    extension: BandLimitedExtension
    weights: WeightConfig
    rho: float
    bond_base: float
    epsilon: float
    sup_price_error: float
    sup_return_error: float
    combined_error: float
    weighted_l2_error: float
    ratio_error: float
    weighted_tail_bound: float
    violations: tuple = ()
    within_epsilon: bool = True
    search: tuple = field(default=())
    failure: NotWithinEpsilon | None = None

    @property
    def omega(self) -> float:
        return self.extension.omega

    @property
    def tau(self) -> int:
        return int(self.times[0]) - 1

    @property
    def price_times(self) -> np.ndarray:
        return np.arange(self.tau, 1)

    @property
    def valid(self) -> bool:
        """All magnitudes lie in (0, 1)."""
        return not self.violations

    def price_series(self) -> PriceSeries:
        return PriceSeries(self.s_eps, self.rho, self.bond_base)

    def discounted_prices(self) -> np.ndarray:
        return self.s_eps / (self.bond_base * self.rho ** self.price_times.astype(float))

    def magnitude(self, t):
        """``a_eps(t)`` at any integer time, using the band-limited extension.

        For ``t > 0`` this is the predicted future magnitude.
        """
        t = np.asarray(t)
        return self.weights.weight(t) * evaluate(self.extension, t)

    def raise_for_status(self) -> "CompleteTwin":
        if self.failure is not None:
            raise self.failure
        return self


def _validity(ext: BandLimitedExtension, times: np.ndarray, a_eps: np.ndarray, w: np.ndarray):
    # magnitudes within evaluation round-off of zero have no resolvable sign
    zero_tol = w * ext.roundoff_bound(times)
    bad = (a_eps <= zero_tol) | (a_eps >= 1.0) | ~np.isfinite(a_eps)
    return tuple((int(t), float(a)) for t, a in zip(times[bad], a_eps[bad]))


def _assemble(prices, returns, zeta, x, ext, weights, epsilon, search=()):
    t = returns.times
    w = weights.weight(t)
    xhat = evaluate(ext, t)
    a_eps = w * xhat
    xi_eps = zeta * a_eps
    sd0 = returns.reference_price
    bond = prices.bond()
    sd_eps = sd0 * np.concatenate(([1.0], np.cumprod(1.0 + xi_eps)))
    s_eps = sd_eps * bond
    s_eps[0] = prices.prices[0]

    dS = np.abs(s_eps - prices.prices)
    dxi = np.abs(xi_eps - returns.xi)
    sup_price = float(dS.max())
    sup_ret = float(dxi.max())
    combined = float(max(dS[0], np.max(dS[1:] + dxi)))
    wl2 = float(np.sum((dxi / w) ** 2))
    ratio = float(np.max(np.abs(s_eps / s_eps[0] - prices.prices / prices.prices[0])))
    return CompleteTwin(
        times=_frozen(t, np.int64),
        zeta=_frozen(zeta, np.int8),
        a_eps=_frozen(a_eps),
        xi_eps=_frozen(xi_eps),
        s_eps=_frozen(s_eps),
        extension=ext,
        weights=weights,
        rho=prices.rho,
        bond_base=prices.bond_base,
        epsilon=float(epsilon),
        sup_price_error=sup_price,
        sup_return_error=sup_ret,
        combined_error=combined,
        weighted_l2_error=wl2,
        ratio_error=ratio,
        weighted_tail_bound=weights.tail_bound(prices.tau),
        violations=_validity(ext, t, a_eps, w),
        within_epsilon=combined < epsilon,
        search=tuple(search),
    )


def build_twin(
    prices: PriceSeries,
    epsilon: float,
    weights: WeightConfig = WeightConfig(),
    omega_grid=None,
    lam: float = 0.0,
    *,
    window: int | None = None,
    raise_on_failure: bool = False,
) -> CompleteTwin:
    """Build the complete twin with the smallest grid bandwidth meeting ``epsilon``.

    The closeness target is ``sup_t (|S_eps - S| + |xi_eps - xi|) < epsilon``.
    Each grid bandwidth is tried in ascending order; the search stops at the
    first success. If none succeeds, the twin with the smallest achieved error
    is returned with ``within_epsilon=False`` and ``failure`` set to a
    :class:`NotWithinEpsilon`, or that exception is raised when
    ``raise_on_failure`` is true.

    ``window`` truncates the input to its last ``window + 1`` prices.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    grid = default_omega_grid() if omega_grid is None else [float(o) for o in omega_grid]
    if not grid:
        raise ValueError("omega_grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("omega_grid must be sorted ascending")
    if window is not None and window < len(prices) - 1:
        prices = prices.tail(window)

    returns = discount(prices)
    zeta, x = decompose(returns, weights)

    best = None
    trace = []
    for om in grid:
        ext = interpolate_bandlimited(x, BandSpec(om), lam, tol=None)
        twin = _assemble(prices, returns, zeta, x, ext, weights, epsilon)
        trace.append((om, twin.combined_error, twin.within_epsilon))
        if twin.within_epsilon:
            return _with_search(twin, trace)
        if best is None or twin.combined_error < best.combined_error:
            best = twin

    best = _with_search(best, trace)
    err = NotWithinEpsilon(epsilon, best.combined_error, best.omega, None)
    best = dataclasses.replace(best, failure=err)
    err.twin = best
    if raise_on_failure:
        raise err
    return best


def _with_search(twin, trace):
    return dataclasses.replace(twin, search=tuple(trace))


@dataclass(frozen=True)
class TwinReport:
    """Closeness verdicts for both certificates.

    Case (i): sup of ``|S_eps - S| + |xi_eps - xi|`` over the window.
    Case (ii): weighted squared return error and the price-ratio error
    relative to ``tau``.
    """

    epsilon: float
    tau: int
    sup_error: float
    weighted_sq_error: float
    ratio_error: float
    sup_pass: bool
    weighted_pass: bool
    ratio_pass: bool

    @property
    def case_i(self) -> bool:
        return self.sup_pass

    @property
    def case_ii(self) -> bool:
        return self.weighted_pass and self.ratio_pass

    @property
    def passed(self) -> bool:
        return self.case_i and self.case_ii


def verify_twin(
    twin: CompleteTwin,
    prices: PriceSeries,
    epsilon: float,
    tau: int | None = None,
    weights: WeightConfig | None = None,
) -> TwinReport:
    """Recompute the closeness bounds from scratch and report pass/fail for each.

    ``tau`` restricts the ratio bound to ``tau <= t <= 0`` (default: the
    whole window).
    """
    weights = twin.weights if weights is None else weights
    if len(prices) != twin.s_eps.size:
        prices = prices.tail(twin.s_eps.size - 1)
    times = prices.times
    sd = prices.discounted()
    xi = sd[1:] / sd[:-1] - 1.0
    sd_eps = twin.discounted_prices()
    xi_eps = sd_eps[1:] / sd_eps[:-1] - 1.0

    dS = np.abs(twin.s_eps - prices.prices)
    dxi = np.abs(xi_eps - xi)
    sup_err = float(max(dS[0], np.max(dS[1:] + dxi)))
    w = weights.weight(times[1:])
    wsq = float(np.sum((dxi / w) ** 2))

    tau = prices.tau if tau is None else int(tau)
    if not prices.tau <= tau <= 0:
        raise ValueError(f"tau={tau} outside the window")
    i0 = tau - prices.tau
    ratio = float(
        np.max(np.abs(twin.s_eps[i0:] / twin.s_eps[i0] - prices.prices[i0:] / prices.prices[i0]))
    )
    return TwinReport(
        epsilon=float(epsilon),
        tau=tau,
        sup_error=sup_err,
        weighted_sq_error=wsq,
        ratio_error=ratio,
        sup_pass=sup_err < epsilon,
        weighted_pass=wsq < epsilon,
        ratio_pass=ratio < epsilon,
    )
