"""Volume orderings: right-continuous decreasing step functions on [0, 1].

A volume ordering ``v`` maps a number fraction ``phi`` to the volume of the
particle at that rank, largest particles first.  Finite particle systems give
step functions, which is the only kind of state stored here:

    v(phi) = values[j]   for breakpoints[j] <= phi < breakpoints[j + 1]
    v(phi) = 0           for breakpoints[-1] <= phi <= 1

The module also holds the generalized inverse of increasing functions (used
to pass between orderings and distribution functions), quantization of
arbitrary decreasing functions onto a volume grid, and the sup / L^p
distances between orderings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "StepOrdering",
    "MonotoneFn",
    "make_ordering",
    "sample_ordering",
    "evaluate",
    "generalized_inverse",
    "quantize",
    "sup_distance",
    "lp_distance",
    "MERGE_RTOL",
    "DEFAULT_GRID",
]

#: relative tolerance under which two volumes are treated as one component
MERGE_RTOL = 1e-12
#: number of sample points used when quantizing a callable
DEFAULT_GRID = 2**14

_WEIGHT_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StepOrdering:
    """Piecewise-constant volume ordering.

    Parameters
    ----------
    values : array_like, shape (K,)
        Plateau volumes, strictly decreasing and strictly positive.
    breakpoints : array_like, shape (K + 1,)
        Strictly increasing fractions with ``breakpoints[0] == 0`` and
        ``breakpoints[-1] <= 1``.  The interval ``[breakpoints[-1], 1]``
        carries volume zero (particles that have vanished).
    """

    values: np.ndarray
    breakpoints: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values).reshape(-1)
        bps = _frozen(self.breakpoints).reshape(-1)
        if bps.size != values.size + 1:
            raise ValueError(
                f"need len(breakpoints) == len(values) + 1, got {bps.size} and {values.size}"
            )
        if bps[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if bps[-1] > 1.0:
            raise ValueError(f"last breakpoint {bps[-1]!r} exceeds 1")
        if np.any(np.diff(bps) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if values.size:
            if not np.all(np.isfinite(values)) or values[-1] <= 0:
                raise ValueError("values must be finite and strictly positive")
            if np.any(np.diff(values) >= 0):
                raise ValueError("values must be strictly decreasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def empty(cls) -> "StepOrdering":
        return cls(np.empty(0), np.zeros(1))

    @property
    def n_components(self) -> int:
        return int(self.values.size)

    @property
    def weights(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def phi_bar(self) -> float:
        """Fraction of particles with positive volume."""
        return float(self.breakpoints[-1])

    @property
    def v_max(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0

    @property
    def total_volume(self) -> float:
        return float(self.values @ self.weights)

    def atoms(self) -> list[tuple[float, float]]:
        """Return ``(volume, weight)`` pairs, largest volume first."""
        return [(float(y), float(w)) for y, w in zip(self.values, self.weights)]

    def __call__(self, x):
        return evaluate(self, x)

    def __eq__(self, other):
        if not isinstance(other, StepOrdering):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.breakpoints, other.breakpoints
        )

    def __hash__(self):
        return hash((self.values.tobytes(), self.breakpoints.tobytes()))

    def __repr__(self):
        return f"StepOrdering(values={self.values.tolist()}, breakpoints={self.breakpoints.tolist()})"


def make_ordering(pairs: Iterable[Sequence[float]], rtol: float = MERGE_RTOL) -> StepOrdering:
    """Build a canonical ordering from ``(volume, weight)`` pairs.

    Zero volumes are dropped, volumes within ``rtol`` of each other are merged
    into one component (weights summed, volume averaged by weight so the total
    volume is unchanged), and components are sorted largest first.  The total
    weight may be below one; the remainder is the vanished fraction.
    """
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    vol, wt = arr[:, 0], arr[:, 1]
    if not np.all(np.isfinite(arr)):
        raise ValueError("volumes and weights must be finite")
    if np.any(vol < 0):
        raise ValueError("negative volume")
    if np.any(wt <= 0):
        raise ValueError("weights must be positive")
    total = math.fsum(wt)
    if total > 1.0 + _WEIGHT_TOL:
        raise ValueError(f"weights sum to {total!r} > 1")

    keep = vol > 0
    vol, wt = vol[keep], wt[keep]
    order = np.argsort(-vol, kind="stable")
    vol, wt = vol[order], wt[order]

    values: list[float] = []
    weights: list[float] = []
    i = 0
    while i < vol.size:
        j = i + 1
        while j < vol.size and vol[i] - vol[j] <= rtol * vol[i]:
            j += 1
        w = math.fsum(wt[i:j])
        values.append(vol[i] if j == i + 1 else math.fsum(vol[i:j] * wt[i:j]) / w)
        weights.append(w)
        i = j

    bps = np.concatenate([[0.0], np.cumsum(weights)])
    if bps[-1] > 1.0:
        bps[-1] = 1.0
    return StepOrdering(np.array(values), bps)


def sample_ordering(samples: Sequence[float] | np.ndarray) -> StepOrdering:
    """Step ordering from samples of a decreasing function on a uniform grid.

    ``samples[i]`` is taken as the value on ``[i/n, (i+1)/n)``.  Sampling a
    decreasing function at left endpoints dominates it pointwise.
    """
    y = np.asarray(samples, dtype=float).reshape(-1)
    n = y.size
    if n == 0:
        raise ValueError("no samples")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError("samples must be finite and nonnegative")
    if np.any(np.diff(y) > 0):
        raise ValueError("samples are not decreasing")
    starts = np.flatnonzero(np.concatenate([[True], y[1:] != y[:-1]]))
    ends = np.concatenate([starts[1:], [n]])
    levels = y[starts]
    pos = levels > 0
    bps = np.concatenate([[0], ends[pos]]) / n
    return StepOrdering(levels[pos], bps)


def evaluate(v: StepOrdering, x):
    """Evaluate ``v`` at fractions ``x`` in [0, 1] (right continuous, ``v(1) = 0``)."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0) | (xa > 1)) or np.any(np.isnan(xa)):
        raise ValueError("fraction outside [0, 1]")
    idx = np.searchsorted(v.breakpoints, xa, side="right") - 1
    padded = np.append(v.values, 0.0)
    out = padded[np.minimum(idx, v.n_components)]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class MonotoneFn:
    """Increasing function on ``[0, b]`` with ``w(0) = 0``.

    ``kind="step"``: ``values[i]`` is the value on ``(x[i], x[i+1]]`` so the
    function is left continuous.  ``kind="linear"``: ``values[i]`` is the
    value at node ``x[i]`` with linear interpolation in between.
    """

    x: np.ndarray
    values: np.ndarray
    kind: str = "step"

    def __post_init__(self):
        x = _frozen(self.x).reshape(-1)
        vals = _frozen(self.values).reshape(-1)
        if self.kind not in ("step", "linear"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if x.size < 2 or x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        expected = x.size - 1 if self.kind == "step" else x.size
        if vals.size != expected:
            raise ValueError(f"{self.kind} function needs {expected} values, got {vals.size}")
        full = np.concatenate([[0.0], vals]) if self.kind == "step" else vals
        if full[0] != 0.0 and self.kind == "linear":
            raise ValueError("w(0) must be 0")
        if np.any(np.diff(full) < 0):
            raise ValueError("function is not increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", vals)

    @property
    def b(self) -> float:
        return float(self.x[-1])

    @property
    def end_value(self) -> float:
        return float(self.values[-1])

    def __call__(self, t):
        ta = np.asarray(t, dtype=float)
        if np.any((ta < 0) | (ta > self.b)):
            raise ValueError(f"argument outside [0, {self.b}]")
        if self.kind == "linear":
            out = np.interp(ta, self.x, self.values)
        else:
            idx = np.searchsorted(self.x, ta, side="left") - 1
            out = np.where(ta == 0, 0.0, self.values[np.maximum(idx, 0)])
        return float(out) if np.ndim(out) == 0 else out


def generalized_inverse(w: MonotoneFn) -> MonotoneFn:
    """Return ``y -> sup{x | w(x) < y}`` on ``[0, w(b)]``, with value 0 at 0.

    The result is left continuous and increasing.  Applying the inverse twice
    reproduces ``w`` on the domain of the double inverse, ``[0, w^-(w(b))]``;
    this is all of ``[0, b]`` unless ``w`` is constant on a final interval.
    """
    if w.end_value <= 0:
        raise ValueError("w vanishes identically; inverse has empty domain")
    if w.kind == "linear":
        if np.any(np.diff(w.values) <= 0):
            raise ValueError("piecewise-linear inverse needs a strictly increasing function")
        return MonotoneFn(w.values, w.x, kind="linear")
    levels = np.unique(np.concatenate([[0.0], w.values]))
    # on (levels[l-1], levels[l]] the set {w < y} is [0, x[k]], k = #{values <= levels[l-1]}
    k = np.searchsorted(w.values, levels[:-1], side="right")
    return MonotoneFn(levels, w.x[k], kind="step")


def quantize(v0: StepOrdering | Callable, eps: float, grid: int = DEFAULT_GRID) -> StepOrdering:
    """Least dominating step function with values on the grid ``{eps*j/2}``.

    ``v0`` is either a :class:`StepOrdering` (quantized exactly) or a
    vectorized callable of a decreasing function on [0, 1], which is first
    sampled at ``grid`` left endpoints.  The result ``v`` satisfies
    ``v >= v0`` and ``||v - v0|| < eps`` (for a callable, up to the change of
    ``v0`` across one grid cell).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not isinstance(v0, StepOrdering):
        phi = np.arange(grid) / grid
        v0 = sample_ordering(np.asarray(v0(phi), dtype=float))
    h = 0.5 * eps
    k = np.ceil(v0.values / h)
    k[(k - 1) * h >= v0.values] -= 1
    k[k * h < v0.values] += 1
    # k is nonincreasing; collapse runs of equal levels
    keep = np.concatenate([[True], k[1:] != k[:-1]]) if k.size else np.zeros(0, bool)
    starts = np.flatnonzero(keep)
    bps = np.append(v0.breakpoints[starts], v0.phi_bar)
    return StepOrdering(k[starts] * h, bps)


def _plateaus(v1: StepOrdering, v2: StepOrdering):
    cuts = np.union1d(v1.breakpoints, v2.breakpoints)
    cuts = np.union1d(cuts, [1.0])
    left = cuts[:-1]
    diff = np.abs(evaluate(v1, left) - evaluate(v2, left))
    return np.atleast_1d(diff), np.diff(cuts)


def sup_distance(v1: StepOrdering, v2: StepOrdering) -> float:
    """``sup_phi |v1(phi) - v2(phi)|``, exact over the merged plateaus."""
    diff, _ = _plateaus(v1, v2)
    return float(diff.max()) if diff.size else 0.0


def lp_distance(v1: StepOrdering, v2: StepOrdering, p: float) -> float:
    """``(int_0^1 |v1 - v2|^p dphi)^(1/p)``; ``p = inf`` gives :func:`sup_distance`."""
    if p == math.inf or p == "inf":
        return sup_distance(v1, v2)
    if not p >= 1:
        raise ValueError("p must be >= 1")
    diff, length = _plateaus(v1, v2)
    scale = diff.max() if diff.size else 0.0
    if scale == 0:
        return 0.0
    # scale out the max so large p does not underflow
    return float(scale * (np.sum((diff / scale) ** p * length)) ** (1.0 / p))
