"""Mean-field evolution of volume orderings.

Every particle volume obeys ``dv/dt = v**(1/3) * theta(t) - 1``.  For a step
ordering this is a finite ODE system, one equation per plateau, coupled only
through the scalar mean field ``theta``.  The system is integrated with an
embedded Dormand-Prince 5(4) pair; when the smallest plateau reaches the
vanish threshold the crossing is located on the dense output, the plateau is
dropped and integration restarts with one component fewer.

Two closure laws for ``theta`` are provided:

``VolumeConserving``
    ``theta = phi_bar / sum_j y_j**(1/3) w_j``, which makes the total volume
    a linear invariant of the ODE (and hence of any Runge-Kutta step).
``QConserving(a, Q)``
    ``theta = (Q - total_volume) / a`` so that ``a*theta + total_volume = Q``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .ordering import StepOrdering

logger = logging.getLogger(__name__)

__all__ = [
    "VolumeConserving",
    "QConserving",
    "MeanFieldLaw",
    "SimConfig",
    "Trajectory",
    "Event",
    "InvalidStateError",
    "IntegrationError",
    "theta",
    "rhs",
    "small_volume_threshold",
    "vanishing_bracket",
    "integrate",
]


class InvalidStateError(ValueError):
    """State for which the mean field or the rates are not defined."""


class IntegrationError(RuntimeError):
    """Step-size underflow; ``state`` holds ``(t, values, breakpoints, h)``."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class VolumeConserving:
    name = "volume"

    def theta_of(self, values, weights, phi_bar):
        if values.size == 0:
            raise InvalidStateError("volume-conserving mean field needs a nonempty ordering")
        return phi_bar / float(np.cbrt(values) @ weights)


@dataclass(frozen=True)
class QConserving:
    a: float
    Q: float
    name = "q"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("QConserving needs a > 0")
        if not math.isfinite(self.Q):
            raise ValueError("Q must be finite")

    def theta_of(self, values, weights, phi_bar):
        return (self.Q - float(values @ weights)) / self.a


MeanFieldLaw = VolumeConserving | QConserving


def theta(v: StepOrdering, law: MeanFieldLaw) -> float:
    """Mean field of the ordering ``v`` under ``law``."""
    return law.theta_of(v.values, v.weights, v.phi_bar)


def rhs(v: StepOrdering, law: MeanFieldLaw) -> np.ndarray:
    """Growth rates ``y_j**(1/3) * theta - 1`` of the plateaus of ``v``."""
    if v.n_components == 0:
        return np.empty(0)
    return np.cbrt(v.values) * theta(v, law) - 1.0


def small_volume_threshold(theta_sup: float) -> float:
    """Volume below which every rate is below -1/2.

    ``v**(1/3) * theta < 1/2`` requires ``v < 1 / (8 theta**3)``; for
    ``theta <= 1`` the weaker ``1 / (8 theta)`` is used.
    """
    if not theta_sup > 0:
        raise ValueError("theta_sup must be positive")
    return 1.0 / (8.0 * max(theta_sup, theta_sup**3))


def vanishing_bracket(v_now: float, theta_sup: float) -> tuple[float, float]:
    """Bounds on the time left before a particle of volume ``v_now`` vanishes.

    Below the small-volume threshold the rate lies in ``[-1, -1/2)`` as long
    as ``theta >= 0``, so the remaining time is in ``[v_now, 2 v_now]``.
    """
    eps0 = small_volume_threshold(theta_sup)
    if not 0 <= v_now < eps0:
        raise ValueError(f"v_now={v_now!r} is not below the threshold {eps0!r}")
    return (v_now, 2.0 * v_now)


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    ``vanish_tol`` defaults to ``1e-12 * v_max(0)``; ``snapshot_interval``
    defaults to ``horizon / 100``.  ``keep_dense`` stores the interpolant of
    every accepted step so the trajectory can be evaluated at any time.
    """

    initial: StepOrdering
    law: MeanFieldLaw = field(default_factory=VolumeConserving)
    horizon: float = 1.0
    rtol: float = 1e-10
    atol: float = 1e-13
    initial_step: Optional[float] = None
    max_step: float = math.inf
    vanish_tol: Optional[float] = None
    snapshot_interval: Optional[float] = None
    keep_dense: bool = False
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (isinstance(self.horizon, (int, float)) and self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be a positive finite time")
        for name in ("rtol", "atol", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("initial_step", "vanish_tol", "snapshot_interval"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if isinstance(self.law, VolumeConserving) and self.initial.n_components == 0:
            raise InvalidStateError("volume-conserving run needs a nonempty initial ordering")

    @property
    def tol_v(self) -> float:
        if self.vanish_tol is not None:
            return self.vanish_tol
        return 1e-12 * (self.initial.v_max or 1.0)

    @property
    def cadence(self) -> float:
        return self.snapshot_interval or self.horizon / 100


@dataclass(frozen=True)
class Event:
    t: float
    components_before: int
    components_after: int
    discarded_volume: float


@dataclass(frozen=True)
class _Segment:
    # y(t0 + x*h) = y0 + h * coef @ [x, x^2, x^3, x^4] on the components alive in the step
    t0: float
    h: float
    y0: np.ndarray
    coef: np.ndarray
    breakpoints: np.ndarray

    def at(self, t: float) -> np.ndarray:
        x = (t - self.t0) / self.h if self.h > 0 else 0.0
        return self.y0 + self.h * (self.coef @ np.array([x, x * x, x**3, x**4]))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Output of :func:`integrate`.

    ``steps`` is a structured array with one row per accepted step (plus the
    initial state and every post-event state) and fields ``t, theta,
    total_volume, n_components, v_max, phi_bar``.  ``snapshots`` holds the
    ordering at every cadence tick and every event time.
    """

    law: MeanFieldLaw
    horizon: float
    snapshots: tuple[tuple[float, StepOrdering], ...]
    steps: np.ndarray
    events: tuple[Event, ...]
    segments: Optional[tuple[_Segment, ...]] = None
    _starts: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def theta_series(self) -> np.ndarray:
        return np.column_stack([self.steps["t"], self.steps["theta"]])

    @property
    def initial(self) -> StepOrdering:
        return self.snapshots[0][1]

    @property
    def final(self) -> StepOrdering:
        return self.snapshots[-1][1]

    @property
    def event_times(self) -> np.ndarray:
        return np.array([e.t for e in self.events])

    def at(self, t: float, side: str = "right") -> StepOrdering:
        """Ordering at time ``t``; needs ``keep_dense``.

        At an event time ``side="right"`` gives the state after the vanished
        plateau was removed and ``side="left"`` the state just before.
        """
        seg = self._segment(t, side)
        return StepOrdering(seg.at(t), seg.breakpoints)

    def theta_at(self, t: float, side: str = "right") -> float:
        seg = self._segment(t, side)
        y = seg.at(t)
        if y.size == 0 and isinstance(self.law, QConserving):
            return self.law.Q / self.law.a
        return self.law.theta_of(y, np.diff(seg.breakpoints), float(seg.breakpoints[-1]))

    def _segment(self, t, side):
        if self.segments is None:
            raise ValueError("trajectory was integrated without keep_dense=True")
        if not 0 <= t <= self.horizon:
            raise ValueError("time outside [0, horizon]")
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self._starts is None:
            object.__setattr__(self, "_starts", np.array([s.t0 for s in self.segments]))
        i = int(np.searchsorted(self._starts, t, side=side)) - 1
        return self.segments[max(i, 0)]


STEP_DTYPE = np.dtype(
    [
        ("t", float),
        ("theta", float),
        ("total_volume", float),
        ("n_components", int),
        ("v_max", float),
        ("phi_bar", float),
    ]
)

# Dormand-Prince 5(4) tableau with Hairer's 4th-order continuous extension
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


class _System:
    """The plateau ODE for a fixed set of weights."""

    def __init__(self, law, breakpoints):
        self.law = law
        self.breakpoints = breakpoints
        self.weights = np.diff(breakpoints)
        self.phi_bar = float(breakpoints[-1])

    def theta(self, y):
        return self.law.theta_of(y, self.weights, self.phi_bar)

    def __call__(self, y):
        # cbrt is odd, so trial stages that overshoot zero stay finite
        return np.cbrt(y) * self.theta(y) - 1.0


def _dp_step(f, y, k1, h):
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 6):
        K[s] = f(y + h * (np.asarray(_A[s]) @ K[:s]))
    y_new = y + h * (_B @ K[:6])
    K[6] = f(y_new)
    err = h * (_E @ K)
    return y_new, err, K


def _initial_step(f, y, k1, rtol, atol, T):
    scale = atol + rtol * np.abs(y)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(k1) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y + h0 * k1
    d2 = np.max(np.abs(f(y1) - k1) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, T)


class _Recorder:
    def __init__(self, config: SimConfig):
        self.config = config
        self.rows: list[tuple] = []
        self.snapshots: list[tuple[float, StepOrdering]] = []
        self.events: list[Event] = []
        self.segments: list[_Segment] | None = [] if config.keep_dense else None
        T, dt = config.horizon, config.cadence
        n = int(math.floor(T / dt + 1e-9))
        ticks = [k * dt for k in range(n + 1)]
        if T - ticks[-1] > 1e-12 * T:
            ticks.append(T)
        else:
            ticks[-1] = T
        self.ticks = ticks
        self.next_tick = 0

    def row(self, t, y, bps, th):
        w = np.diff(bps)
        self.rows.append(
            (t, th, float(y @ w), y.size, float(y[0]) if y.size else 0.0, float(bps[-1]))
        )

    def snapshot(self, t, y, bps):
        if self.snapshots and t <= self.snapshots[-1][0]:
            return
        self.snapshots.append((t, StepOrdering(y, bps)))

    def ticks_until(self, t_end, inclusive=True):
        out = []
        while self.next_tick < len(self.ticks):
            tk = self.ticks[self.next_tick]
            if tk < t_end or (inclusive and tk == t_end):
                out.append(tk)
                self.next_tick += 1
            else:
                break
        return out


def _merge_ties(y, bps):
    """Merge neighbours that lost strict order to rounding."""
    if y.size < 2 or np.all(np.diff(y) < 0):
        return y, bps
    keep = np.concatenate([[True], np.diff(y) < 0])
    starts = np.flatnonzero(keep)
    w = np.diff(bps)
    wsum = np.add.reduceat(w, starts)
    vol = np.add.reduceat(y * w, starts)
    logger.debug("merging %d tied components", y.size - starts.size)
    return vol / wsum, np.append(bps[starts], bps[-1])


def integrate(config: SimConfig) -> Trajectory:
    """Integrate the plateau system on ``[0, horizon]`` with the vanishing cascade."""
    law = config.law
    T = config.horizon
    rtol, atol, tol_v = config.rtol, config.atol, config.tol_v
    rec = _Recorder(config)

    t = 0.0
    y = config.initial.values.copy()
    bps = config.initial.breakpoints.copy()
    sys_ = _System(law, bps)
    k1 = sys_(y) if y.size else np.empty(0)
    th = sys_.theta(y) if y.size else law.Q / law.a
    rec.row(t, y, bps, th)
    for tk in rec.ticks_until(0.0):
        rec.snapshot(tk, y, bps)
    h = config.initial_step or (_initial_step(sys_, y, k1, rtol, atol, T) if y.size else T)
    h = min(h, config.max_step)
    h_floor = 1e-15 * max(1.0, T)
    n_steps = 0

    while t < T:
        if y.size == 0:
            if isinstance(law, VolumeConserving):
                raise InvalidStateError(f"all components vanished at t={t} under volume conservation")
            # nothing left to evolve: theta = Q / a from here on
            for tk in rec.ticks_until(T):
                rec.snapshot(tk, y, bps)
            if rec.segments is not None:
                rec.segments.append(_Segment(t, T - t, y, np.zeros((0, 4)), bps))
            t = T
            rec.row(t, y, bps, law.Q / law.a)
            break

        n_steps += 1
        if n_steps > config.max_steps:
            raise IntegrationError("maximum number of steps exceeded", (t, y, bps, h))

        if y[-1] < 0.5 and th > 0:
            eps0 = small_volume_threshold(th)
            if y[-1] < eps0:
                h = min(h, vanishing_bracket(y[-1], th)[1])
        h = min(h, config.max_step)
        last = t + h >= T * (1 - 1e-15)
        if last:
            h = T - t
        y_new, err, K = _dp_step(sys_, y, k1, h)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale))
        if not np.isfinite(err_norm) or err_norm > 1.0:
            factor = 0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            h *= factor
            if h < h_floor:
                raise IntegrationError(
                    f"step size underflow at t={t!r} with {y.size} components "
                    f"(smallest {y[-1]!r})",
                    (t, y.copy(), bps.copy(), h),
                )
            continue

        h_next = h * min(10.0, max(0.2, 0.9 * err_norm ** -0.2 if err_norm > 0 else 10.0))
        t_new = T if last else t + h
        crossed = y_new[-1] <= tol_v

        if crossed:
            coef = K.T @ _P

            def gap(x):
                return y[-1] + h * (coef[-1] @ np.array([x, x * x, x**3, x**4])) - tol_v

            if gap(1.0) > 0:
                # interpolant and step end disagree in sign at round-off level
                x_e = 1.0
            else:
                x_e = brentq(gap, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
            t_e = t + x_e * h
            seg = _Segment(t, h, y, coef, bps)
            for tk in rec.ticks_until(t_e, inclusive=False):
                rec.snapshot(tk, seg.at(tk), bps)
            if rec.segments is not None:
                rec.segments.append(seg)
            y_e = seg.at(t_e)
            gone = y_e <= 2 * tol_v
            gone[-1] = True
            w = np.diff(bps)
            discarded = float(np.sum(y_e[gone] * w[gone]))
            before = y.size
            if np.all(gone[np.argmax(gone):]):
                n_keep = int(np.argmax(gone))
                y, bps = y_e[:n_keep].copy(), bps[: n_keep + 1].copy()
            else:
                bps = np.concatenate([[0.0], np.cumsum(w[~gone])])
                y = y_e[~gone].copy()
            y, bps = _merge_ties(y, bps)
            t = t_e
            rec.events.append(Event(t, before, y.size, discarded))
            logger.debug("t=%.12g: %d -> %d components", t, before, y.size)
            sys_ = _System(law, bps)
            if y.size:
                k1 = sys_(y)
                th = sys_.theta(y)
                h = _initial_step(sys_, y, k1, rtol, atol, T)
            else:
                th = law.Q / law.a if isinstance(law, QConserving) else th
            rec.row(t, y, bps, th)
            rec.snapshot(t, y, bps)
            continue

        if rec.segments is not None or rec.next_tick < len(rec.ticks):
            coef = K.T @ _P
            seg = _Segment(t, h, y, coef, bps)
            ticks = rec.ticks_until(t_new)
            for tk in ticks:
                rec.snapshot(tk, y_new if tk == t_new else seg.at(tk), bps)
            if rec.segments is not None:
                rec.segments.append(seg)
        y, k1, t = y_new, K[6], t_new
        if np.any(np.diff(y) >= 0):
            y, bps = _merge_ties(y, bps)
            sys_ = _System(law, bps)
            k1 = sys_(y)
        th = sys_.theta(y)
        rec.row(t, y, bps, th)
        h = h_next

    for tk in rec.ticks_until(T):
        rec.snapshot(tk, y, bps)
    steps = np.array(rec.rows, dtype=STEP_DTYPE)
    return Trajectory(
        law=law,
        horizon=T,
        snapshots=tuple(rec.snapshots),
        steps=steps,
        events=tuple(rec.events),
        segments=tuple(rec.segments) if rec.segments is not None else None,
    )
