"""Band-limited sequences on the integer grid.

A band-limited sequence is stored as a finite sum of shifted ideal low-pass
kernels ``K(t) = sin(omega * t) / (pi * t)``, so it is band-limited by
construction and can be evaluated at any integer, including future times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SingularSystem

__all__ = [
    "BandSpec",
    "SampledSignal",
    "BandLimitedExtension",
    "sinc_kernel",
    "gram_matrix",
    "interpolate_bandlimited",
    "lowpass_project",
    "evaluate",
    "projection_error",
    "DEFAULT_CUTOFF",
]

#: relative eigenvalue cutoff for the Gram solve
DEFAULT_CUTOFF = 1e-12
#: residual tolerance (relative to 1 + max|x|) for an exact interpolation
DEFAULT_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BandSpec:
    """Cutoff frequency in radians per sample, strictly inside (0, pi)."""

    omega: float

    def __post_init__(self):
        om = float(self.omega)
        if not (0.0 < om < math.pi):
            raise ValueError(f"omega must lie in (0, pi), got {self.omega!r}")
        object.__setattr__(self, "omega", om)


@dataclass(frozen=True)
class SampledSignal:
    """Observations ``x(t)`` at strictly increasing nonpositive integer times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size < 1:
            raise ValueError("need at least one observation")
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise ValueError("times must be integers")
        t = t.astype(np.int64)
        if np.any(t > 0):
            raise ValueError("observation times must be <= 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_mapping(cls, obs: Mapping[int, float]) -> "SampledSignal":
        items = sorted(obs.items())
        return cls(np.array([k for k, _ in items]), np.array([v for _, v in items]))

    @classmethod
    def window(cls, values: Sequence[float]) -> "SampledSignal":
        """Samples on the contiguous window ``{-(n-1), ..., 0}``."""
        v = np.asarray(values, dtype=float)
        return cls(np.arange(-(v.size - 1), 1), v)

    @property
    def is_contiguous(self) -> bool:
        return bool(np.all(np.diff(self.times) == 1))

    def as_dict(self) -> dict[int, float]:
        return {int(t): float(x) for t, x in zip(self.times, self.values)}

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class BandLimitedExtension:
    """A band-limited sequence ``sum_m c_m K(t - m)``.

    ``residual`` is the largest absolute misfit at the anchors of the solve
    that produced the coefficients; ``rank`` is the number of Gram
    eigenvalues retained (equal to the number of anchors for a full solve).
    """

    spec: BandSpec
    anchors: np.ndarray
    coefficients: np.ndarray
    regularization: float = 0.0
    residual: float = 0.0
    rank: int = field(default=-1)

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=np.int64)
        c = np.asarray(self.coefficients, dtype=float)
        if a.shape != c.shape or a.ndim != 1:
            raise ValueError("anchors and coefficients must be 1-d of equal length")
        if np.unique(a).size != a.size:
            raise ValueError("anchors must be distinct")
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")
        object.__setattr__(self, "anchors", _frozen(a))
        object.__setattr__(self, "coefficients", _frozen(c))
        if self.rank < 0:
            object.__setattr__(self, "rank", int(a.size))

    @property
    def omega(self) -> float:
        return self.spec.omega

    def __call__(self, t):
        return evaluate(self, t)

    def roundoff_bound(self, t) -> np.ndarray:
        """Floating-point error bound for evaluating the extension at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=np.int64))
        k = np.abs(sinc_kernel(self.spec, t[:, None] - self.anchors[None, :]))
        n = max(int(self.anchors.size), 1)
        return 4.0 * n * np.finfo(float).eps * (k @ np.abs(self.coefficients))

    @classmethod
    def zero(cls, spec: BandSpec, anchors: Iterable[int] = (0,)) -> "BandLimitedExtension":
        a = np.asarray(list(anchors), dtype=np.int64)
        return cls(spec, a, np.zeros(a.size))


def _omega(spec) -> float:
    return spec.omega if isinstance(spec, BandSpec) else BandSpec(spec).omega


def sinc_kernel(spec, u):
    """Impulse response of the ideal low-pass filter with cutoff ``spec.omega``.

    ``sin(omega*u) / (pi*u)`` for ``u != 0`` and ``omega/pi`` at ``u = 0``.
    Accepts scalars or integer arrays; returns the same shape.
    """
    om = _omega(spec)
    u_arr = np.asarray(u)
    uf = u_arr.astype(float)
    # odd symmetry of sin is exact in IEEE arithmetic only if we evaluate |u|
    au = np.abs(uf)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(au == 0, om / math.pi, np.sin(om * au) / (math.pi * au))
    if u_arr.ndim == 0:
        return float(out)
    return out


def gram_matrix(spec, times) -> np.ndarray:
    """``G[i, j] = K(t_i - t_j)``, the Gram matrix of the shifted kernels."""
    t = np.asarray(times, dtype=np.int64)
    return sinc_kernel(spec, t[:, None] - t[None, :])


def _solve_gram(G: np.ndarray, x: np.ndarray, lam: float, cutoff: float):
    w, V = np.linalg.eigh(G)
    wmax = w.max() if w.size else 0.0
    keep = w > cutoff * wmax
    if not np.any(keep):
        return np.zeros_like(x), 0
    Vk = V[:, keep]
    c = Vk @ ((Vk.T @ x) / (w[keep] + lam))
    return c, int(keep.sum())


def interpolate_bandlimited(
    samples: SampledSignal,
    spec: BandSpec,
    lam: float = 0.0,
    extra_anchor: tuple[int, float] | None = None,
    *,
    tol: float | None = DEFAULT_TOL,
    cutoff: float = DEFAULT_CUTOFF,
) -> BandLimitedExtension:
    """Fit a band-limited sequence through the samples.

    Solves ``(G + lam*I) c = x`` over the anchor times (sample times plus an
    optional ``extra_anchor = (q, x_q)``) by eigendecomposition of the Gram
    matrix, discarding eigenvalues below ``cutoff * max_eigenvalue``.

    Parameters
    ----------
    samples : SampledSignal
    spec : BandSpec
    lam : float
        Tikhonov weight added to the retained eigenvalues.
    extra_anchor : (int, float), optional
        An additional anchor time ``q <= 0`` not among the sample times and
        the value imposed there. Different values give different extensions
        that agree on the samples.
    tol : float or None
        With ``lam == 0``, raise :class:`SingularSystem` when truncation
        leaves a residual above ``tol * (1 + max|x|)``. ``None`` accepts the
        least-squares fit whatever its residual.
    cutoff : float
        Relative eigenvalue cutoff.

    Returns
    -------
    BandLimitedExtension
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    times = samples.times
    values = samples.values
    if extra_anchor is not None:
        q, xq = int(extra_anchor[0]), float(extra_anchor[1])
        if q > 0:
            raise ValueError("extra anchor time must be <= 0")
        if q in set(times.tolist()):
            raise ValueError(f"extra anchor {q} coincides with a sample time")
        order = np.argsort(np.append(times, q), kind="stable")
        times = np.append(times, q)[order]
        values = np.append(values, xq)[order]

    if not np.any(values):
        return BandLimitedExtension(spec, times, np.zeros(times.size), lam, 0.0)

    G = gram_matrix(spec, times)
    c, rank = _solve_gram(G, values, lam, cutoff)
    residual = float(np.max(np.abs(G @ c - values)))
    if tol is not None and lam == 0 and rank < times.size:
        limit = tol * (1.0 + float(np.max(np.abs(values))))
        if residual > limit:
            raise SingularSystem(rank, int(times.size), residual, limit)
    return BandLimitedExtension(spec, times, c, lam, residual, rank)


def lowpass_project(samples: SampledSignal, spec: BandSpec) -> BandLimitedExtension:
    """Ideal low-pass filtering of the zero-extended samples.

    The result is ``sum_s x(s) K(t - s)``: anchors are the sample times and
    coefficients the sample values. No fitting takes place, so the residual
    at the anchors is generally nonzero.
    """
    if not samples.is_contiguous:
        raise ValueError("lowpass_project needs samples on a contiguous window")
    ext = BandLimitedExtension(spec, samples.times, samples.values)
    residual = float(np.max(np.abs(evaluate(ext, samples.times) - samples.values)))
    return BandLimitedExtension(spec, samples.times, samples.values, 0.0, residual)


def evaluate(ext: BandLimitedExtension, t):
    """Value of the extension at integer time(s) ``t``; any sign of ``t`` is allowed."""
    t_arr = np.asarray(t)
    flat = np.atleast_1d(t_arr).ravel().astype(np.int64)
    k = sinc_kernel(ext.spec, flat[:, None] - ext.anchors[None, :])
    out = k @ ext.coefficients
    if t_arr.ndim == 0:
        return float(out[0])
    return out.reshape(t_arr.shape)


def projection_error(
    samples: SampledSignal,
    ext: BandLimitedExtension,
    weight_M: float = 0.0,
    norm: str = "l2",
) -> float:
    """Distance between samples and extension over the sample times.

    ``norm="l2"`` gives the weighted norm with weights ``(1+|t|)^(-M)``;
    ``norm="sup"`` gives the unweighted maximum deviation.
    """
    diff = samples.values - evaluate(ext, samples.times)
    norm = norm.lower()
    if norm == "sup":
        return float(np.max(np.abs(diff)))
    if norm == "l2":
        w = (1.0 + np.abs(samples.times)) ** (-float(weight_M))
        return float(np.sqrt(np.sum((w * diff) ** 2)))
    raise ValueError(f"unknown norm {norm!r}; use 'l2' or 'sup'")
