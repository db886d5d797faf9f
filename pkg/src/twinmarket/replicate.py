"""Pricing and exact replication in a binomial model with predictable step sizes.

Between times ``s`` and ``q`` the discounted price moves by
``S~(t) = S~(t-1) * (1 + sign * a(t))`` where the magnitudes ``a(t)`` are
known at ``s`` and the sign is the only randomness. The returns take two
values symmetric about zero, so the martingale measure gives each sign
probability 1/2 and every claim is replicable.

Tree nodes are indexed by ``(k, prefix)`` where ``k = t - s`` is the number
of steps taken and ``prefix`` is an integer whose ``k`` bits, most
significant first, record the signs so far (1 = up). Children of ``prefix``
are ``2*prefix`` (down) and ``2*prefix + 1`` (up).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateSpread, InvalidMagnitude

__all__ = [
    "PredictableMagnitudes",
    "Claim",
    "ReplicationPlan",
    "CompletenessVerdict",
    "martingale_prob",
    "price",
    "replicate",
    "verify_replication",
    "check_crr_completeness",
    "sign_paths",
    "terminal_prices",
    "MAX_DEPTH",
]

MAX_DEPTH = 24


@dataclass(frozen=True)
class PredictableMagnitudes:
    """Step sizes ``a(t)`` for ``t = s+1..q``, all known at time ``s``."""

    s: int
    q: int
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if self.q < self.s:
            raise ValueError("need s <= q")
        if a.shape != (self.q - self.s,):
            raise ValueError(f"expected {self.q - self.s} magnitudes, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def from_mapping(cls, s: int, q: int, a: dict[int, float]) -> "PredictableMagnitudes":
        return cls(s, q, [a[t] for t in range(s + 1, q + 1)])

    @property
    def depth(self) -> int:
        return self.q - self.s

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.s + 1, self.q + 1)

    def violations(self) -> list[tuple[int, float]]:
        bad = ~((self.a > 0) & (self.a < 1))
        return [(int(t), float(v)) for t, v in zip(self.times[bad], self.a[bad])]

    def validate(self) -> "PredictableMagnitudes":
        bad = self.violations()
        if bad:
            raise InvalidMagnitude(*zip(*bad))
        return self


@dataclass(frozen=True)
class Claim:
    """A payoff ``psi`` in discounted units at time ``q``.

    In ``terminal`` mode ``payoff`` receives an array of terminal discounted
    prices ``S~(q)``. In ``path`` mode it receives the sign paths as an
    ``(2**n, n)`` array of +-1 (rows ordered by prefix index) together with
    the terminal discounted prices. Either way it returns one value per path.
    """

    payoff: Callable
    mode: str = "terminal"
    name: str = "custom"

    def __post_init__(self):
        if self.mode not in ("terminal", "path"):
            raise ValueError("mode must be 'terminal' or 'path'")

    def values(self, signs: np.ndarray, terminal: np.ndarray) -> np.ndarray:
        if self.mode == "terminal":
            out = self.payoff(terminal)
        else:
            out = self.payoff(signs, terminal)
        out = np.broadcast_to(np.asarray(out, dtype=float), terminal.shape).copy()
        if not np.all(np.isfinite(out)):
            raise ValueError("claim payoff is not finite on every path")
        return out

    @classmethod
    def call(cls, strike: float) -> "Claim":
        return cls(lambda s: np.maximum(s - strike, 0.0), name=f"call({strike:g})")

    @classmethod
    def put(cls, strike: float) -> "Claim":
        return cls(lambda s: np.maximum(strike - s, 0.0), name=f"put({strike:g})")

    @classmethod
    def forward(cls) -> "Claim":
        return cls(lambda s: s, name="forward")

    @classmethod
    def constant(cls, c: float) -> "Claim":
        return cls(lambda s: np.full_like(s, c), name=f"constant({c:g})")

    @classmethod
    def table(cls, values) -> "Claim":
        """Path claim given by one payoff per path, indexed by prefix."""
        v = np.asarray(values, dtype=float)

        def payoff(signs, terminal):
            if v.shape != terminal.shape:
                raise ValueError(f"payoff table has {v.size} entries, tree has {terminal.size} paths")
            return v

        return cls(payoff, mode="path", name="table")


def sign_paths(depth: int) -> np.ndarray:
    """All ``2**depth`` sign paths as +-1 rows; row ``i`` spells ``i`` in binary, MSB first."""
    idx = np.arange(2**depth)[:, None]
    shifts = np.arange(depth - 1, -1, -1)[None, :]
    bits = (idx >> shifts) & 1
    return (2 * bits - 1).astype(np.int8)


def terminal_prices(mags: PredictableMagnitudes, s_price: float) -> np.ndarray:
    """Discounted prices at ``q`` for every path, in prefix order."""
    level = np.array([float(s_price)])
    for a in mags.a:
        level = np.stack((level * (1 - a), level * (1 + a)), axis=1).ravel()
    return level


def _check_depth(mags: PredictableMagnitudes, max_depth: int):
    if mags.depth > max_depth:
        raise ValueError(f"tree depth {mags.depth} exceeds the cap {max_depth}")


def martingale_prob(mags: PredictableMagnitudes) -> dict[int, float]:
    """Per-step up-probability of the martingale measure, keyed by time.

    For returns ``+a`` and ``-a`` the equation ``p*a - (1-p)*a = 0`` has the
    single root ``p = 1/2``; uniqueness of that root is what makes the
    model complete.
    """
    mags.validate()
    return {int(t): 0.5 for t in mags.times}


def price(
    claim: Claim,
    mags: PredictableMagnitudes,
    s_price: float,
    *,
    max_depth: int = MAX_DEPTH,
) -> float:
    """Fair price ``E*[psi]`` at time ``s`` by backward induction."""
    mags.validate()
    if not s_price > 0:
        raise ValueError("s_price must be > 0")
    _check_depth(mags, max_depth)
    terminal = terminal_prices(mags, s_price)
    v = claim.values(sign_paths(mags.depth), terminal)
    while v.size > 1:
        v = 0.5 * (v[0::2] + v[1::2])
    return float(v[0])


@dataclass(frozen=True)
class ReplicationPlan:
    """Hedging table on the full sign tree.

    ``wealth[k]``, ``beta[k]``, ``gamma[k]`` and ``stock[k]`` are arrays of
    length ``2**k`` giving, at time ``s + k`` and each prefix, the wealth
    ``X``, bond units, stock units and undiscounted stock price. The last
    level holds only terminal wealth and prices (no holdings).
    """

    s: int
    q: int
    wealth: tuple
    beta: tuple
    gamma: tuple
    stock: tuple
    bond: np.ndarray

    @property
    def depth(self) -> int:
        return self.q - self.s

    @property
    def initial_wealth(self) -> float:
        return float(self.wealth[0][0])

    def node(self, t: int, prefix: int) -> tuple[float, float, float]:
        """``(X, beta, gamma)`` at time ``t`` after the sign prefix ``prefix``."""
        k = t - self.s
        if not 0 <= k < self.depth:
            raise KeyError(f"no trading node at t={t}")
        if not 0 <= prefix < 2**k:
            raise KeyError(f"prefix {prefix} out of range at t={t}")
        return (float(self.wealth[k][prefix]), float(self.beta[k][prefix]), float(self.gamma[k][prefix]))

    @property
    def nodes(self) -> dict:
        return {
            (self.s + k, p): self.node(self.s + k, p)
            for k in range(self.depth)
            for p in range(2**k)
        }

    def with_gamma(self, t: int, prefix: int, value: float) -> "ReplicationPlan":
        """A copy with one hedge ratio overwritten (for testing broken hedges)."""
        k = t - self.s
        gammas = list(self.gamma)
        g = gammas[k].copy()
        g[prefix] = value
        gammas[k] = g
        return ReplicationPlan(self.s, self.q, self.wealth, self.beta, tuple(gammas), self.stock, self.bond)


def replicate(
    claim: Claim,
    mags: PredictableMagnitudes,
    s_price: float,
    bond_base: float = 1.0,
    rho: float = 1.0,
    *,
    max_depth: int = MAX_DEPTH,
) -> ReplicationPlan:
    """Self-financing strategy whose terminal wealth is ``B(q)/B(s) * psi``.

    ``bond_base`` is ``B(s)``; the bond grows by ``rho`` per step.
    """
    mags.validate()
    if not s_price > 0:
        raise ValueError("s_price must be > 0")
    if rho < 1 or bond_base <= 0:
        raise ValueError("need rho >= 1 and bond_base > 0")
    _check_depth(mags, max_depth)
    n = mags.depth
    bond = bond_base * float(rho) ** np.arange(n + 1)

    disc = [np.array([float(s_price)])]
    for a in mags.a:
        prev = disc[-1]
        disc.append(np.stack((prev * (1 - a), prev * (1 + a)), axis=1).ravel())
    stock = [d * b for d, b in zip(disc, bond)]

    # V = discounted wealth normalised by B(s); it is a martingale with p = 1/2
    v = claim.values(sign_paths(n), disc[-1])
    wealth = [None] * (n + 1)
    beta = [None] * n
    gamma = [None] * n
    wealth[n] = v * bond[n] / bond_base
    for k in range(n - 1, -1, -1):
        x_dn, x_up = wealth[k + 1][0::2], wealth[k + 1][1::2]
        s_dn, s_up = stock[k + 1][0::2], stock[k + 1][1::2]
        spread = s_up - s_dn
        if np.any(spread == 0):
            raise DegenerateSpread(f"equal successor prices at t={mags.s + k}")
        v = 0.5 * (v[0::2] + v[1::2])
        wealth[k] = v * bond[k] / bond_base
        gamma[k] = (x_up - x_dn) / spread
        beta[k] = (wealth[k] - gamma[k] * stock[k]) / bond[k]

    return ReplicationPlan(
        mags.s,
        mags.q,
        tuple(_ro(w) for w in wealth),
        tuple(_ro(b) for b in beta),
        tuple(_ro(g) for g in gamma),
        tuple(_ro(s) for s in stock),
        _ro(bond),
    )


def _ro(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def verify_replication(
    plan: ReplicationPlan,
    claim: Claim,
    mags: PredictableMagnitudes,
    s_price: float,
    bond_base: float = 1.0,
    rho: float = 1.0,
) -> float:
    """Max over all sign paths of ``|X(q) - B(q)/B(s) * psi|``.

    Wealth is simulated forward from the plan's initial wealth using only
    the self-financing increment
    ``X(t+1) = X(t) + beta*(B(t+1)-B(t)) + gamma*(S(t+1)-S(t))``; the stock
    path is regenerated from the magnitudes, not read from the plan.
    """
    n = mags.depth
    b = bond_base * float(rho) ** np.arange(n + 1)
    x = np.array([plan.initial_wealth])
    s = np.array([float(s_price) * b[0]])
    for k, a in enumerate(mags.a):
        beta = np.repeat(plan.beta[k], 2)
        gamma = np.repeat(plan.gamma[k], 2)
        x = np.repeat(x, 2)
        s_prev = np.repeat(s, 2)
        moves = np.tile([1 - a, 1 + a], s.size)
        s = s_prev / b[k] * moves * b[k + 1]
        x = x + beta * (b[k + 1] - b[k]) + gamma * (s - s_prev)
    target = claim.values(sign_paths(n), s / b[n]) * b[n] / bond_base
    return float(np.max(np.abs(x - target)))


@dataclass(frozen=True)
class CompletenessVerdict:
    passed: bool
    first_violation: tuple[int, float] | None = None

    def __bool__(self) -> bool:
        return self.passed


def check_crr_completeness(mags: PredictableMagnitudes) -> CompletenessVerdict:
    """Check the two-point structure: every step size known at ``s`` and inside (0, 1).

    An empty horizon passes vacuously.
    """
    bad = mags.violations()
    if bad:
        return CompletenessVerdict(False, bad[0])
    return CompletenessVerdict(True)
