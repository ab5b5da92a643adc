"""File formats: ordering / measure JSON, run configs, CSV exports.

All floats are written with ``repr`` so values round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .dynamics import QConserving, SimConfig, Trajectory, VolumeConserving
from .measures import DiscreteMeasure, make_measure
from .ordering import StepOrdering, make_ordering, sample_ordering

__all__ = [
    "ConfigError",
    "SCHEMA_VERSION",
    "ordering_from_dict",
    "load_ordering",
    "save_ordering",
    "ordering_to_csv",
    "load_measure",
    "save_measure",
    "parse_law",
    "parse_sim_config",
    "load_json",
    "write_trajectory",
]

SCHEMA_VERSION = 1
LOAD_MASS_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid input file; the message names the offending field."""


def load_json(path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _dump(obj, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def ordering_from_dict(d: Mapping, field: str = "initial") -> StepOrdering:
    """``{"atoms": [[volume, weight], ...]}`` or ``{"samples": [v0, v1, ...]}``.

    Samples are values of a decreasing function on the uniform grid
    ``i / n`` (left endpoints).
    """
    if not isinstance(d, Mapping):
        raise ConfigError(f"{field}: expected an object with 'atoms' or 'samples'")
    extra = set(d) - {"atoms", "samples", "t"}
    if extra:
        raise ConfigError(f"{field}: unknown fields {sorted(extra)}")
    try:
        if "atoms" in d:
            return make_ordering(d["atoms"])
        if "samples" in d:
            return sample_ordering(d["samples"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field}: {exc}") from exc
    raise ConfigError(f"{field}: expected 'atoms' or 'samples'")


def load_ordering(path) -> StepOrdering:
    return ordering_from_dict(load_json(path), field=str(path))


def save_ordering(path, v: StepOrdering, t: float | None = None) -> None:
    obj: dict[str, Any] = {"atoms": [[y, w] for y, w in v.atoms()]}
    if t is not None:
        obj["t"] = t
    _dump(obj, path)


def ordering_to_csv(path, v: StepOrdering) -> None:
    """Rows ``phi_lo, phi_hi, volume``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["phi_lo", "phi_hi", "volume"])
        bp = v.breakpoints
        for j, y in enumerate(v.values):
            wr.writerow([repr(float(bp[j])), repr(float(bp[j + 1])), repr(float(y))])


def load_measure(path) -> DiscreteMeasure:
    d = load_json(path)
    if not isinstance(d, Mapping) or "atoms" not in d:
        raise ConfigError(f"{path}: expected an object with 'atoms'")
    try:
        atoms = np.asarray(d["atoms"], dtype=float).reshape(-1, 2)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: atoms: {exc}") from exc
    total = math.fsum(atoms[:, 1]) if atoms.size else 0.0
    if abs(total - 1.0) > LOAD_MASS_TOL:
        raise ConfigError(f"{path}: atoms: total mass {total!r} is not 1")
    try:
        return make_measure(atoms, renormalize=True)
    except ValueError as exc:
        raise ConfigError(f"{path}: atoms: {exc}") from exc


def save_measure(path, nu: DiscreteMeasure) -> None:
    _dump({"atoms": [[x, m] for x, m in nu.atoms()]}, path)


def parse_law(d: Mapping | None, field: str = "law"):
    if d is None:
        return VolumeConserving()
    if not isinstance(d, Mapping) or "type" not in d:
        raise ConfigError(f"{field}: expected an object with 'type'")
    kind = d["type"]
    if kind == "volume":
        if set(d) - {"type"}:
            raise ConfigError(f"{field}: unknown fields {sorted(set(d) - {'type'})}")
        return VolumeConserving()
    if kind == "q":
        extra = set(d) - {"type", "a", "Q"}
        if extra:
            raise ConfigError(f"{field}: unknown fields {sorted(extra)}")
        try:
            return QConserving(float(d["a"]), float(d["Q"]))
        except KeyError as exc:
            raise ConfigError(f"{field}.{exc.args[0]}: missing") from exc
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{field}: {exc}") from exc
    raise ConfigError(f"{field}.type: unknown law {kind!r}")


INTEGRATOR_FIELDS = ("rtol", "atol", "initial_step", "max_step", "vanish_tol")
SIM_FIELDS = {"schema_version", "initial", "law", "horizon", "snapshot_interval", *INTEGRATOR_FIELDS}


def check_schema(d: Any, allowed: set[str], required: tuple[str, ...]) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError("config: expected a JSON object")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {d.get('schema_version')!r}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown fields {sorted(extra)}")
    for name in required:
        if name not in d:
            raise ConfigError(f"{name}: missing")


def _number(d, name, positive=True):
    val = d[name]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {val!r}")
    val = float(val)
    if positive and not (val > 0 and math.isfinite(val)):
        raise ConfigError(f"{name}: must be positive and finite, got {val!r}")
    return val


def integrator_kwargs(d: Mapping) -> dict:
    return {name: _number(d, name) for name in INTEGRATOR_FIELDS if d.get(name) is not None}


def parse_sim_config(d: Any) -> SimConfig:
    """Build a :class:`SimConfig` from a decoded ``simulate`` config."""
    check_schema(d, SIM_FIELDS, ("initial", "horizon"))
    horizon = _number(d, "horizon")
    initial = ordering_from_dict(d["initial"])
    law = parse_law(d.get("law"))
    kwargs = integrator_kwargs(d)
    if d.get("snapshot_interval") is not None:
        kwargs["snapshot_interval"] = _number(d, "snapshot_interval")
    try:
        return SimConfig(initial, law=law, horizon=horizon, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from exc


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_trajectory(traj: Trajectory, out_dir) -> None:
    """Write ``trajectory.csv``, ``events.csv`` and ``snapshots/*.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        names = traj.steps.dtype.names
        wr.writerow(names)
        for row in traj.steps:
            wr.writerow([_fmt(row[n]) for n in names])
    with open(out / "events.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_event", "components_before", "components_after", "discarded_volume"])
        for e in traj.events:
            wr.writerow([_fmt(float(e.t)), e.components_before, e.components_after, _fmt(e.discarded_volume)])
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, (t, v) in enumerate(traj.snapshots):
        save_ordering(snap_dir / f"snapshot_{i:05d}.json", v, t=float(t))
