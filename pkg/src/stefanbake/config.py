"""TOML run configuration.

A config is a plain mapping; :func:`build` turns it into a
:class:`ProblemSetup`, a :class:`CouplingConfig` and certification
:class:`Tolerances`.  Layout::

    schema = 1
    horizon = 0.5
    preset = "classical_stefan"        # optional, see below

    [params]        # PhysicalParams fields, defaults for the rest
    [sorption]      # breakpoints = [[r, p], ...] or value = p; cap; smoothing_halfwidth; convention
    [oven]          # samples = [[t, u_b], ...] or temperature = u_b
    [init]          # kind = "arrays" | "csv" | "compatible" | "equilibrium", e0, ...
    [setup]         # compat_tol, delta_1, radiation_guard
    [solver]        # CouplingConfig fields (grid size, dt, Picard settings, ...)
    [tolerances]    # certification constants
    [classical]     # stefan_number, crust_width, e_end (preset only)

``init.kind``:

* ``arrays``: ``u0`` and ``w0`` lists on a uniform grid of [0, 1];
* ``csv``: ``path`` to a file with ``u0,w0`` columns (relative to the config);
* ``compatible``: quadratic profiles built to satisfy the sign and
  compatibility conditions for the oven temperature at ``t = 0``
  (``crumb_amplitude``, ``crust_fraction``, ``w_base``, ``w_amplitude``,
  ``w_modes``, ``samples``);
* ``equilibrium``: ``u0 = 0``, ``w0 = w`` (``samples``).
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib
import tomli_w

from .errors import ConfigurationError, MalformedInputError
from .front import CouplingConfig
from .problem import (
    InitialData,
    OvenSchedule,
    PhysicalParams,
    ProblemSetup,
    SorptionFunction,
    compatible_profile,
)
from .verify import Tolerances, classical_stefan_config

CONFIG_SCHEMA = 1
_PARAM_FIELDS = {f.name for f in fields(PhysicalParams)}
_SOLVER_FIELDS = {f.name for f in fields(CouplingConfig)}
_INT_SOLVER_FIELDS = {"picard_max_iter", "n_l", "n_a", "newton_max_iter", "max_steps", "grow_after"}


@dataclass
class RunConfig:
    setup: ProblemSetup
    coupling: CouplingConfig
    tolerances: Tolerances
    data: dict  # resolved mapping; what the snapshot and hash are built from

    @property
    def hash(self) -> str:
        return config_hash(self.data)


def load(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML ({exc})") from None
    return resolve(data, base=path.parent)


def loads(text: str, base=".") -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML ({exc})") from None
    return resolve(data, base=Path(base))


def resolve(data: dict, base=Path(".")) -> dict:
    """Inline external references so the mapping is self-contained."""
    data = copy.deepcopy(dict(data))
    schema = data.setdefault("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigurationError(f"config schema {schema!r} is not supported (expected {CONFIG_SCHEMA})")
    init = data.get("init", {})
    if init.get("kind") == "csv":
        src = Path(base) / init["path"]
        u0, w0 = _read_init_csv(src)
        data["init"] = {"kind": "arrays", "e0": init["e0"], "u0": u0, "w0": w0}
    return data


def _read_init_csv(path: Path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise ConfigurationError(f"initial-data file not found: {path}") from None
    if not rows or "u0" not in rows[0] or "w0" not in rows[0]:
        raise MalformedInputError(f"{path}: expected columns u0,w0")
    try:
        return [float(r["u0"]) for r in rows], [float(r["w0"]) for r in rows]
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"{path}: {exc}") from None


def dumps(data: dict) -> str:
    return tomli_w.dumps(_canonical(data))


def dump(data: dict, path) -> None:
    Path(path).write_text(dumps(data))


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def config_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, shortest float repr)."""
    text = json.dumps(_canonical(data), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def _section(data, name) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return sec


def _params(data) -> PhysicalParams:
    sec = _section(data, "params")
    unknown = set(sec) - _PARAM_FIELDS
    if unknown:
        raise ConfigurationError(f"unknown [params] keys: {sorted(unknown)}")
    return PhysicalParams(**{k: float(v) for k, v in sec.items()})


def _sorption(data) -> SorptionFunction:
    sec = _section(data, "sorption")
    cap = float(sec.get("cap", 1.0))
    if "breakpoints" in sec:
        return SorptionFunction.from_pairs(sec["breakpoints"], cap, float(sec.get("smoothing_halfwidth", 0.0)))
    return SorptionFunction.constant(float(sec.get("value", 0.0)), cap)


def _oven(data) -> OvenSchedule:
    sec = _section(data, "oven")
    if "samples" in sec:
        pairs = sec["samples"]
        if not pairs:
            raise MalformedInputError("[oven] samples is empty")
        return OvenSchedule(tuple(float(t) for t, _ in pairs), tuple(float(v) for _, v in pairs))
    if "temperature" in sec:
        return OvenSchedule.constant_at(float(sec["temperature"]))
    raise ConfigurationError("[oven] needs samples or temperature")


def _init(data, params, oven) -> InitialData:
    sec = _section(data, "init")
    kind = sec.get("kind", "equilibrium")
    try:
        e0 = float(sec["e0"])
    except KeyError:
        raise ConfigurationError("[init] needs e0") from None
    n = int(sec.get("samples", 2001))
    if kind == "arrays":
        return InitialData(e0, np.asarray(sec["u0"], dtype=float), np.asarray(sec["w0"], dtype=float))
    if kind == "equilibrium":
        w = float(sec.get("w", 1.0))
        return InitialData.from_functions(e0, np.zeros_like, lambda x: np.full_like(x, w), n=n)
    if kind == "compatible":
        u_fn = compatible_profile(params, float(oven(0.0)), e0, float(sec.get("crumb_amplitude", 0.0)),
                                  float(sec.get("crust_fraction", 0.9)))
        base = float(sec.get("w_base", 1.0))
        amp = float(sec.get("w_amplitude", 0.0))
        modes = int(sec.get("w_modes", 1))
        return InitialData.from_functions(e0, u_fn, lambda x: base + amp * np.cos(modes * np.pi * x), n=n)
    raise ConfigurationError(f"unknown [init] kind {kind!r}")


def _coupling(data) -> CouplingConfig:
    sec = _section(data, "solver")
    unknown = set(sec) - _SOLVER_FIELDS
    if unknown:
        raise ConfigurationError(f"unknown [solver] keys: {sorted(unknown)}")
    kw = {}
    for k, v in sec.items():
        if k in _INT_SOLVER_FIELDS:
            kw[k] = int(v)
        elif k in ("mode",):
            kw[k] = str(v)
        elif k == "adaptive":
            kw[k] = bool(v)
        else:
            kw[k] = float(v)
    return CouplingConfig(**kw)


def build(data: dict) -> RunConfig:
    """Setup, solver settings and tolerances from a resolved mapping."""
    data = resolve(data)
    preset = data.get("preset")
    if "horizon" not in data and preset is None:
        raise ConfigurationError("config needs a horizon")
    setup_sec = _section(data, "setup")
    if preset == "classical_stefan":
        cl = _section(data, "classical")
        params = _params(data) if data.get("params") else None
        setup = classical_stefan_config(
            params,
            stefan_number=float(cl.get("stefan_number", 1.0)),
            crust_width=float(cl.get("crust_width", 0.1)),
            e_end=float(cl.get("e_end", 0.2)),
            samples=int(cl.get("samples", 20001)),
        )
        if "horizon" in data:
            # never run past the window where the similarity law applies
            setup = setup.replace(horizon=min(float(data["horizon"]), setup.horizon))
    elif preset is not None:
        raise ConfigurationError(f"unknown preset {preset!r}")
    else:
        params = _params(data)
        oven = _oven(data)
        setup = ProblemSetup(
            params,
            _sorption(data),
            oven,
            _init(data, params, oven),
            horizon=float(data["horizon"]),
            sorption_convention=_section(data, "sorption").get("convention", "shifted"),
            radiation_guard=bool(setup_sec.get("radiation_guard", False)),
            compat_tol=float(setup_sec.get("compat_tol", 1e-6)),
            delta_1=setup_sec.get("delta_1"),
        )
    coupling = _coupling(data)
    tol = Tolerances.from_dict(_section(data, "tolerances"))
    return RunConfig(setup, coupling, tol, data)


def set_path(data: dict, dotted: str, value) -> dict:
    """Copy of ``data`` with ``a.b.c = value``."""
    out = copy.deepcopy(data)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {dotted}: {k} is not a table")
    node[keys[-1]] = value
    return out
