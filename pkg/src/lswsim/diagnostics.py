"""Invariant checks and empirical studies on integrated trajectories.

* :func:`check_invariants` audits a trajectory against the conservation law,
  the mean-field and growth bounds, and the monotone structure of the
  cascade.
* :func:`lipschitz_study` measures how far perturbed runs drift from a base
  run, relative to the initial perturbation.
* :func:`convergence_study` integrates successively finer quantizations of
  one initial datum and reports the distance between consecutive runs.
* :func:`weak_residual` evaluates the space-time weak form of the transport
  equation for the particle distribution along a trajectory.

The Lipschitz constant is only ever reported.  Its dependence on the horizon
and the initial volume bound can be traced through the chain
``C3 = exp(C1*C2) * C1 * (1 + C2)``, ``C4 = C3 * (1 + 4*C_*^3)``, but no
closed form is available, so nothing here compares against one.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .dynamics import (
    QConserving,
    SimConfig,
    Trajectory,
    VolumeConserving,
    integrate,
    small_volume_threshold,
    theta,
)
from .ordering import DEFAULT_GRID, StepOrdering, quantize, sample_ordering, sup_distance

__all__ = [
    "Tolerances",
    "CheckResult",
    "InvariantReport",
    "check_invariants",
    "LipschitzRow",
    "lipschitz_study",
    "shift_all",
    "perturb_smallest",
    "ConvergenceRow",
    "convergence_study",
    "TestFunction",
    "bump",
    "weak_residual",
    "render_table",
]


@dataclass(frozen=True)
class Tolerances:
    conservation: float = 1e-9
    bound_rtol: float = 1e-9


@dataclass(frozen=True)
class CheckResult:
    """One invariant.  ``worst`` is the largest violation measure observed
    (deviation for conservation checks, ``lhs/rhs - 1`` for bounds) and
    ``margin = tolerance - worst``."""

    name: str
    passed: bool
    worst: float
    margin: float
    time: float
    detail: str = ""


@dataclass(frozen=True)
class InvariantReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        rows = [
            ("PASS" if c.passed else "FAIL", c.name, repr(c.worst), repr(c.margin), repr(c.time))
            for c in self.checks
        ]
        return render_table(("status", "check", "worst", "margin", "t"), rows)


def render_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    rows = [tuple(str(x) for x in r) for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(x.ljust(w) for x, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _worst(name, excess, times, tol, detail=""):
    """``excess`` <= 0 passes; report the largest entry."""
    excess = np.asarray(excess, dtype=float)
    if excess.size == 0:
        return CheckResult(name, True, 0.0, tol, 0.0, detail)
    i = int(np.argmax(excess))
    worst = float(excess[i])
    return CheckResult(name, bool(worst <= tol), worst, tol - worst, float(times[i]), detail)


def check_invariants(
    traj: Trajectory,
    law=None,
    tolerances: Tolerances = Tolerances(),
) -> InvariantReport:
    """Audit ``traj`` against the invariants of its mean-field law.

    Checks that use the recorded step table and the snapshots are both run,
    so a corrupted snapshot is caught even if the step table is intact.
    """
    law = law if law is not None else traj.law
    steps = traj.steps
    snap_t = traj.times
    snaps = [v for _, v in traj.snapshots]
    snap_vol = np.array([v.total_volume for v in snaps])
    checks = []

    if isinstance(law, VolumeConserving):
        v0 = snaps[0].total_volume
        dev = np.concatenate([np.abs(steps["total_volume"] - v0), np.abs(snap_vol - v0)])
        times = np.concatenate([steps["t"], snap_t])
        checks.append(_worst("volume_conservation", dev, times, tolerances.conservation))

        # the textbook forms theta <= v_max^(2/3), v_max(t) <= e^t v_max(0)
        # assume unit total volume; these are their scale-covariant versions
        th, vbar, phib = steps["theta"], steps["v_max"], steps["phi_bar"]
        rel = th * v0 / (phib * vbar ** (2.0 / 3.0)) - 1.0
        pos = np.where(th > 0, -np.inf, np.inf)
        checks.append(
            _worst("theta_bound", np.maximum(rel, pos), steps["t"], tolerances.bound_rtol,
                   "0 < theta <= phi_bar v_max^(2/3) / V")
        )
        growth = vbar / (np.exp(steps["t"] / v0) * vbar[0]) - 1.0
        checks.append(
            _worst("growth_bound", growth, steps["t"], tolerances.bound_rtol,
                   "v_max(t) <= e^(t/V) v_max(0)")
        )
    elif isinstance(law, QConserving):
        dev_steps = np.abs(law.a * steps["theta"] + steps["total_volume"] - law.Q)
        snap_theta = np.array([
            theta(v, law) for v in snaps
        ])
        dev_snaps = np.abs(law.a * snap_theta + snap_vol - law.Q)
        checks.append(
            _worst("q_conservation", np.concatenate([dev_steps, dev_snaps]),
                   np.concatenate([steps["t"], snap_t]), tolerances.conservation)
        )
        checks.append(
            _worst("theta_upper_bound", steps["theta"] - law.Q / law.a, steps["t"],
                   tolerances.bound_rtol * max(1.0, abs(law.Q / law.a)), "theta <= Q/a")
        )

    # monotone structure
    dt = np.diff(snap_t)
    checks.append(_worst("times_increasing", -dt if dt.size else [], snap_t[1:], 0.0))
    dsteps = np.diff(steps["t"])
    checks.append(_worst("step_times_nondecreasing", -dsteps, steps["t"][1:], 0.0))
    order_gap = [float(np.max(np.diff(v.values))) if v.n_components > 1 else -np.inf for v in snaps]
    checks.append(_worst("strict_ordering", order_gap, snap_t, -0.0, "values strictly decreasing"))
    ncomp = np.array([v.n_components for v in snaps], dtype=float)
    checks.append(
        _worst("components_nonincreasing", np.diff(ncomp), snap_t[1:], 0.0)
    )
    checks.append(
        _worst("phi_bar_nonincreasing", np.diff([v.phi_bar for v in snaps]), snap_t[1:], 0.0)
    )

    # small particles shrink at rate below -1/2
    th_sup = float(np.max(steps["theta"]))
    if th_sup > 0:
        eps0 = small_volume_threshold(th_sup)
        excess, times = [], []
        for t, v in traj.snapshots:
            if v.n_components == 0:
                continue
            th = theta(v, law)
            small = v.values < eps0
            if np.any(small):
                excess.append(float(np.max(np.cbrt(v.values[small]) * th - 1.0 + 0.5)))
                times.append(t)
        checks.append(
            _worst("small_particle_decay", excess, times, 0.0, f"rate < -1/2 below v={eps0:.6g}")
        )
    return InvariantReport(tuple(checks))


# --- continuous dependence -------------------------------------------------

@dataclass(frozen=True)
class LipschitzRow:
    delta: float
    initial_distance: float
    max_distance: float
    ratio: float


def shift_all(v: StepOrdering, delta: float) -> StepOrdering:
    """Add ``delta`` to every positive plateau."""
    return StepOrdering(v.values + delta, v.breakpoints)


def perturb_smallest(v: StepOrdering, delta: float) -> StepOrdering:
    """Move the smallest plateau by ``delta`` (either sign)."""
    vals = v.values.copy()
    vals[-1] += delta
    return StepOrdering(vals, v.breakpoints)


_FAMILIES = {
    "shift": shift_all,
    "smallest": perturb_smallest,
    "smallest_down": lambda v, d: perturb_smallest(v, -d),
}


def _comparison_times(*trajs: Trajectory, n_uniform: int = 201) -> np.ndarray:
    T = trajs[0].horizon
    parts = [np.linspace(0.0, T, n_uniform)]
    for tr in trajs:
        parts.append(tr.steps["t"])
        parts.append(tr.event_times)
    return np.unique(np.concatenate(parts))


def max_distance(a: Trajectory, b: Trajectory) -> tuple[float, float]:
    """``(sup_t ||a(t) - b(t)||, argmax t)`` over a grid that contains every
    accepted step and event time of both runs; both sides of each event are
    inspected."""
    best, t_best = 0.0, 0.0
    for t in _comparison_times(a, b):
        for side in ("left", "right"):
            d = sup_distance(a.at(t, side), b.at(t, side))
            if d > best:
                best, t_best = d, float(t)
    return best, t_best


def lipschitz_study(
    base: StepOrdering,
    law=None,
    horizon: float = 1.0,
    family: str | Callable[[StepOrdering, float], StepOrdering] = "shift",
    deltas: Sequence[float] = (1e-2, 1e-3, 1e-4),
    **config_kwargs,
) -> list[LipschitzRow]:
    """Sup-in-time distance between a base run and perturbed runs.

    ``ratio = max_distance / initial_distance`` and is 0 for ``delta == 0``.
    The largest ratio is the empirical Lipschitz constant of the solution map
    on ``[0, horizon]``.  Rows are sorted by ``delta``.
    """
    law = law if law is not None else VolumeConserving()
    perturb = _FAMILIES[family] if isinstance(family, str) else family
    cfg = SimConfig(base, law=law, horizon=horizon, keep_dense=True, **config_kwargs)
    ref = integrate(cfg)
    rows = []
    for delta in sorted(deltas):
        if delta == 0:
            rows.append(LipschitzRow(0.0, 0.0, 0.0, 0.0))
            continue
        pert = perturb(base, delta)
        d0 = sup_distance(base, pert)
        run = integrate(replace(cfg, initial=pert))
        m, _ = max_distance(ref, run)
        rows.append(LipschitzRow(float(delta), d0, m, m / d0 if d0 > 0 else math.inf))
    return rows


# --- quantization convergence -----------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    eps: float
    eps_next: float
    distance: float


def convergence_study(
    v0,
    law=None,
    horizon: float = 1.0,
    eps_list: Sequence[float] = (0.1, 0.05, 0.025, 0.0125),
    grid: int = DEFAULT_GRID,
    **config_kwargs,
) -> list[ConvergenceRow]:
    """Distance between runs started from consecutive quantizations of ``v0``.

    ``v0`` is a :class:`StepOrdering` or a vectorized decreasing callable on
    [0, 1].  With ``horizon == 0`` only the quantized initial data are
    compared.
    """
    law = law if law is not None else VolumeConserving()
    eps_list = sorted(eps_list, reverse=True)
    if isinstance(v0, StepOrdering):
        base = v0
    else:
        phi = np.arange(grid) / grid
        base = sample_ordering(np.asarray(v0(phi), dtype=float))
    initial = [quantize(base, e) for e in eps_list]
    if horizon == 0:
        dists = [sup_distance(a, b) for a, b in zip(initial, initial[1:])]
    else:
        runs = [
            integrate(SimConfig(q, law=law, horizon=horizon, keep_dense=True, **config_kwargs))
            for q in initial
        ]
        dists = [max_distance(a, b)[0] for a, b in zip(runs, runs[1:])]
    return [ConvergenceRow(e, f, d) for e, f, d in zip(eps_list, eps_list[1:], dists)]


# --- weak form ---------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth test function with analytic partial derivatives.

    ``support = (t_lo, t_hi, v_lo, v_hi)`` bounds the closed support.
    """

    value: Callable
    dt: Callable
    dv: Callable
    support: tuple[float, float, float, float]

    __test__ = False  # not a pytest class


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    d = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    q = 1.0 - si * si
    out[inside] = np.exp(-1.0 / q)
    d[inside] = out[inside] * (-2.0 * si / (q * q))
    return out, d


def bump(t_lo: float, t_hi: float, v_lo: float, v_hi: float) -> TestFunction:
    """Product of C-infinity bumps supported on ``[t_lo, t_hi] x [v_lo, v_hi]``."""
    if not (t_hi > t_lo and v_hi > v_lo):
        raise ValueError("empty support box")
    tc, tw = 0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo)
    vc, vw = 0.5 * (v_lo + v_hi), 0.5 * (v_hi - v_lo)

    def parts(t, v):
        xi, dxi = _bump((np.asarray(t) - tc) / tw)
        eta, deta = _bump((np.asarray(v) - vc) / vw)
        return xi, dxi / tw, eta, deta / vw

    def value(t, v):
        xi, _, eta, _ = parts(t, v)
        return xi * eta

    def dt(t, v):
        _, dxi, eta, _ = parts(t, v)
        return dxi * eta

    def dv(t, v):
        xi, _, _, deta = parts(t, v)
        return xi * deta

    return TestFunction(value, dt, dv, (t_lo, t_hi, v_lo, v_hi))


def _integrand(zeta, t, y, w, th):
    if y.size == 0:
        return 0.0
    rate = np.cbrt(y) * th - 1.0
    return float(np.sum(w * (zeta.dt(t, y) + rate * zeta.dv(t, y))))


def weak_residual(
    traj: Trajectory,
    test_functions: Sequence[TestFunction],
    n_nodes: Optional[int] = 10_000,
) -> np.ndarray:
    """``int_0^T sum_j w_j (d_t zeta + vdot d_v zeta)(t, y_j(t)) dt`` per test function.

    The time integral uses composite Simpson on each interval between event
    times, so the jump of the mean field at events is never straddled.  With
    a dense trajectory ``n_nodes`` nodes are spread over ``[0, T]`` in
    proportion to interval length and both one-sided limits are used at the
    event ends; otherwise (``n_nodes=None`` or no dense output) the snapshot
    times are the nodes.
    """
    T = traj.horizon
    for z in test_functions:
        t_lo, t_hi, v_lo, v_hi = z.support
        if t_lo <= 0 or v_lo <= 0:
            raise ValueError("test function support must stay away from t=0 and v=0")
        if t_hi >= T:
            raise ValueError("test function support must end before the horizon")
    cuts = np.unique(np.concatenate([[0.0, T], traj.event_times]))
    dense = traj.segments is not None and n_nodes is not None
    out = np.zeros(len(test_functions))

    if dense:
        events = set(traj.event_times.tolist())
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(3, int(round(n_nodes * (b - a) / T)))
            n += 1 - n % 2
            r = np.linspace(0.0, 1.0, n)
            if b in events:
                # theta has a (b - t)^(1/3) cusp as the last plateau vanishes;
                # t = b - (b - a) r^3 makes the integrand smooth in r
                nodes = b - (b - a) * r**3
                jac = 3.0 * (b - a) * r**2
            else:
                nodes = a + (b - a) * r
                jac = np.full(n, b - a)
            states = []
            for t in nodes:
                side = "left" if t == b else "right"
                v = traj.at(t, side)
                states.append((v.values, v.weights, traj.theta_at(t, side)))
            for k, z in enumerate(test_functions):
                g = [_integrand(z, t, y, w, th) for t, (y, w, th) in zip(nodes, states)]
                out[k] += simpson(np.asarray(g) * jac, x=r)
        return out

    times = traj.times
    snaps = [v for _, v in traj.snapshots]
    for a, b in zip(cuts[:-1], cuts[1:]):
        idx = np.flatnonzero((times >= a) & (times <= b))
        if idx.size < 2:
            continue
        nodes = times[idx]
        for k, z in enumerate(test_functions):
            g = []
            for i in idx:
                v = snaps[i]
                th = theta(v, traj.law) if v.n_components else (
                    traj.law.Q / traj.law.a if isinstance(traj.law, QConserving) else 0.0
                )
                g.append(_integrand(z, times[i], v.values, v.weights, th))
            out[k] += simpson(g, x=nodes)
    return out
