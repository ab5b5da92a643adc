"""Discrete volume distributions and their correspondence with orderings.

A probability measure ``nu`` on ``[0, inf)`` with finitely many atoms is the
distribution-side view of a step ordering.  The ordering is recovered from
the distribution function ``F(x) = nu([0, x))`` through its generalized
inverse, ``v(phi) = F^-(1 - phi)``, and the map is an isometry between the
sup distance on orderings and the L-infinity Wasserstein distance on
measures (L^p likewise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ordering import (
    MonotoneFn,
    StepOrdering,
    generalized_inverse,
    lp_distance,
    sup_distance,
)

__all__ = [
    "DiscreteMeasure",
    "make_measure",
    "distribution_function",
    "measure_to_ordering",
    "ordering_to_measure",
    "wasserstein",
    "critical_radius",
    "theta_from_radius",
    "MASS_TOL",
]

#: tolerance on total mass for a valid probability measure
MASS_TOL = 1e-12

_RADIUS_FACTOR = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure given by atoms at ``locations`` with ``masses``.

    Locations are stored strictly increasing; use :func:`make_measure` to
    canonicalize unsorted or repeated atoms.
    """

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float).reshape(-1)
        mass = np.array(self.masses, dtype=float).reshape(-1)
        if loc.size != mass.size or loc.size == 0:
            raise ValueError("need the same, nonzero, number of locations and masses")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(mass))):
            raise ValueError("atoms must be finite")
        if loc[0] < 0 or np.any(np.diff(loc) <= 0):
            raise ValueError("locations must be nonnegative and strictly increasing")
        if np.any(mass <= 0):
            raise ValueError("masses must be positive")
        total = math.fsum(mass)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} is not 1; call renormalize() explicitly")
        loc.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(m)) for x, m in zip(self.locations, self.masses)]

    @property
    def mean(self) -> float:
        return float(self.locations @ self.masses)

    def renormalize(self) -> "DiscreteMeasure":
        m = self.masses / math.fsum(self.masses)
        return DiscreteMeasure(self.locations, m)

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.locations, other.locations) and np.array_equal(
            self.masses, other.masses
        )

    def __hash__(self):
        return hash((self.locations.tobytes(), self.masses.tobytes()))

    def __repr__(self):
        return f"DiscreteMeasure(atoms={self.atoms()})"


def make_measure(atoms: Iterable[Sequence[float]], renormalize: bool = False) -> DiscreteMeasure:
    """Canonicalize ``(location, mass)`` pairs: sort and merge repeated locations."""
    arr = np.asarray(list(atoms), dtype=float).reshape(-1, 2)
    if np.any(arr[:, 1] <= 0):
        raise ValueError("masses must be positive")
    loc, inv = np.unique(arr[:, 0], return_inverse=True)
    mass = np.zeros(loc.size)
    np.add.at(mass, inv, arr[:, 1])
    if renormalize:
        mass = mass / math.fsum(mass)
    return DiscreteMeasure(loc, mass)


def distribution_function(nu: DiscreteMeasure) -> MonotoneFn:
    """``F(x) = nu([0, x))`` as a left-continuous step function on ``[0, max + 1]``."""
    loc = nu.locations
    positive = loc[loc > 0]
    x = np.concatenate([[0.0], positive, [loc[-1] + 1.0]])
    cum = np.cumsum(nu.masses)
    # value on (x[j], x[j+1]] is the mass of atoms at locations <= x[j]
    below = np.searchsorted(loc, x[:-1], side="right")
    values = np.where(below > 0, cum[np.maximum(below - 1, 0)], 0.0)
    values[-1] = 1.0
    return MonotoneFn(x, np.minimum(values, 1.0), kind="step")


def measure_to_ordering(nu: DiscreteMeasure) -> StepOrdering:
    """Volume ordering ``v(phi) = sup{y | F(y) < 1 - phi}`` of ``nu``."""
    inv = generalized_inverse(distribution_function(nu))
    # inv is inv.values[l] on (inv.x[l], inv.x[l+1]]; reflect phi = 1 - mass level
    levels, vals = inv.x, inv.values
    phis = 1.0 - levels[::-1]
    vols = vals[::-1]
    pos = vols > 0
    n = int(pos.sum())
    return StepOrdering(vols[:n], phis[: n + 1] if n else np.zeros(1))


def ordering_to_measure(v: StepOrdering) -> DiscreteMeasure:
    """Atoms at the plateau values, plus the vanished fraction at volume zero."""
    loc = v.values[::-1]
    mass = v.weights[::-1]
    tail = 1.0 - v.phi_bar
    if tail > 0:
        loc = np.concatenate([[0.0], loc])
        mass = np.concatenate([[tail], mass])
    return DiscreteMeasure(loc, mass)


def wasserstein(nu1: DiscreteMeasure, nu2: DiscreteMeasure, p: float | str = math.inf) -> float:
    """L^p Wasserstein distance, computed from the two volume orderings.

    ``p`` may be any real ``>= 1`` or ``math.inf`` / ``"inf"``.
    """
    v1, v2 = measure_to_ordering(nu1), measure_to_ordering(nu2)
    if p == "inf" or p == math.inf:
        return sup_distance(v1, v2)
    if isinstance(p, str) or not p >= 1:
        raise ValueError("p must be >= 1 or inf")
    return lp_distance(v1, v2, p)


def critical_radius(theta: float) -> float:
    """Radius of the particle with zero growth rate, from the mean field ``theta``."""
    if not theta > 0:
        raise ValueError("critical radius is undefined for theta <= 0")
    return _RADIUS_FACTOR / theta


def theta_from_radius(radius: float) -> float:
    if not radius > 0:
        raise ValueError("radius must be positive")
    return _RADIUS_FACTOR / radius
