"""Exception types shared across the package."""

from __future__ import annotations


class TwinMarketError(Exception):
    """Base class for all domain errors raised by this package."""


class SingularSystem(TwinMarketError):
    """The truncated Gram solve cannot reproduce the samples to the requested residual."""

    def __init__(self, rank: int, size: int, residual: float, tol: float):
        self.rank = rank
        self.size = size
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"Gram system rank-deficient (effective rank {rank} of {size}); "
            f"residual {residual:.3e} exceeds {tol:.3e}. "
            "Bandwidth too small or anchors too dense."
        )


class ReturnOutOfRange(TwinMarketError):
    """A discounted one-step return falls outside the open interval (-1, 1)."""

    def __init__(self, t: int, value: float):
        self.t = t
        self.value = value
        super().__init__(f"return at t={t} is {value!r}, outside (-1, 1)")


class NotWithinEpsilon(TwinMarketError):
    """No bandwidth on the grid produced a twin within the requested epsilon.

    Carries the best twin found so callers can still inspect achieved errors.
    """

    def __init__(self, epsilon: float, best_error: float, best_omega: float, twin=None):
        self.epsilon = epsilon
        self.best_error = best_error
        self.best_omega = best_omega
        self.twin = twin
        super().__init__(
            f"no grid bandwidth met epsilon={epsilon:g}; best error {best_error:.6g} "
            f"at omega={best_omega:.6g}"
        )


class InvalidMagnitude(TwinMarketError):
    """A predictable magnitude lies outside (0, 1)."""

    def __init__(self, times, values):
        self.times = list(times)
        self.values = list(values)
        pairs = ", ".join(f"t={t}: {v!r}" for t, v in zip(self.times, self.values))
        super().__init__(f"magnitudes outside (0, 1): {pairs}")


class DegenerateSpread(TwinMarketError):
    """Up and down successor prices coincide, so the hedge ratio is undefined."""


class RoundedToZero(TwinMarketError):
    """Rounding to the tick grid produced a nonpositive price."""

    def __init__(self, t: int, price: float, tick: float):
        self.t = t
        self.price = price
        self.tick = tick
        super().__init__(f"price {price!r} at t={t} rounds to <= 0 on tick {tick!r}")
