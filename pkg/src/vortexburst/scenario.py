"""YAML scenarios for the command-line front end.

Example::

    geometry: plane
    vortices:
      - {intensity: 1.0, position: [0.0, 0.0]}
      - {intensity: -0.5, position: [6.0, 0.0]}
    burst: {vortex: 0, time: 0.0}
    solver: {T: 0.01, grid_nodes: 512}
    time: {end: 0.05}
    output: {trajectory: out.pvtraj}

Every section is optional except ``vortices``; unknown keys anywhere are
an error. Complex numbers are written as ``[re, im]`` or as a plain real.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np
import yaml

from .burst_solver import GammaConfig
from .core import VortexConfiguration
from .dynamics import IntegrationConfig
from .fields import FieldSpec, affine_field, constant_field, zero_field

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario document."""


def _check_keys(doc, allowed, where: str) -> dict:
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")
    return doc


def _complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ScenarioError(f"{where}: expected a number or [re, im]")


def _dataclass_section(cls, doc, where: str, **overrides):
    names = [f.name for f in fields(cls)]
    doc = _check_keys(doc, names, where)
    try:
        return cls(**{**doc, **overrides})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class Tolerances:
    """Certificate thresholds; defaults match the library functions."""

    weak_residual: float = 1e-5
    energy_rtol: float = 1e-6
    invariant_rtol: float = 1e-8
    outer_tol: float | None = None


@dataclass(frozen=True)
class BurstRequest:
    vortex: int = 0
    time: float = 0.0
    rho: float | None = None


@dataclass(frozen=True)
class MarkovSection:
    rate: float = 1.0
    horizon: float = 1.0
    burst_T: float = 1e-2
    isolated_rho: float = 1.0
    samples: int = 100
    workers: int = 1


@dataclass(frozen=True)
class Outputs:
    trajectory: str | None = None
    report: str | None = None
    figures: str | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    config: VortexConfiguration
    geometry: str = "plane"
    field: FieldSpec = dc_field(default_factory=zero_field)
    field_doc: dict | None = None
    burst: BurstRequest | None = None
    solver: GammaConfig = dc_field(default_factory=GammaConfig)
    integration: IntegrationConfig = dc_field(default_factory=IntegrationConfig)
    tolerances: Tolerances = dc_field(default_factory=Tolerances)
    t_end: float | None = None
    markov: MarkovSection | None = None
    seed: int = 0
    output: Outputs = dc_field(default_factory=Outputs)
    source: str | None = None


TOP_KEYS = ("version", "geometry", "vortices", "field", "burst", "solver", "integration",
            "tolerances", "time", "markov", "seed", "output")


def _field(doc) -> FieldSpec:
    doc = _check_keys(doc, ("kind", "c", "beta", "kappa", "radius", "T"), "field")
    kind = doc.get("kind", "zero")
    if kind == "zero":
        _check_keys(doc, ("kind",), "field (zero)")
        return zero_field()
    if kind == "constant":
        _check_keys(doc, ("kind", "c"), "field (constant)")
        return constant_field(_complex(doc.get("c", 0.0), "field.c"))
    if kind == "affine":
        return affine_field(_complex(doc.get("c", 0.0), "field.c"),
                            _complex(doc.get("beta", 0.0), "field.beta"),
                            _complex(doc.get("kappa", 0.0), "field.kappa"),
                            float(doc.get("radius", 1.0)), float(doc.get("T", 1.0)))
    raise ScenarioError(f"field.kind must be zero, constant or affine (got {kind!r})")


def _vortices(items) -> VortexConfiguration:
    if not isinstance(items, list) or not items:
        raise ScenarioError("vortices: expected a non-empty list")
    xi, pos = [], []
    for k, item in enumerate(items):
        item = _check_keys(item, ("intensity", "position"), f"vortices[{k}]")
        if "intensity" not in item or "position" not in item:
            raise ScenarioError(f"vortices[{k}]: intensity and position are required")
        xi.append(float(item["intensity"]))
        pos.append(_complex(item["position"], f"vortices[{k}].position"))
    try:
        return VortexConfiguration(np.array(xi), np.array(pos))
    except ValueError as exc:
        raise ScenarioError(f"vortices: {exc}") from exc


def parse_scenario(doc: dict, source: str | None = None) -> Scenario:
    doc = _check_keys(doc, TOP_KEYS, "scenario")
    version = doc.get("version", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"unsupported scenario version {version}")
    if "vortices" not in doc:
        raise ScenarioError("scenario: 'vortices' is required")
    geometry = doc.get("geometry", "plane")
    if geometry not in ("plane", "disk"):
        raise ScenarioError("geometry must be 'plane' or 'disk'")
    config = _vortices(doc["vortices"])
    fspec = _field(doc.get("field"))
    if geometry == "disk" and not fspec.is_zero:
        raise ScenarioError("external fields are only supported on the plane")
    burst = _dataclass_section(BurstRequest, doc["burst"], "burst") if "burst" in doc else None
    if burst is not None and not 0 <= burst.vortex < config.n:
        raise ScenarioError(f"burst.vortex must index one of the {config.n} vortices")
    time = _check_keys(doc.get("time"), ("end",), "time")
    markov = _dataclass_section(MarkovSection, doc["markov"], "markov") if "markov" in doc else None
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ScenarioError("seed must be a 64-bit unsigned integer")
    return Scenario(
        config=config,
        geometry=geometry,
        field=fspec,
        field_doc=doc.get("field"),
        burst=burst,
        solver=_dataclass_section(GammaConfig, doc.get("solver"), "solver"),
        integration=_dataclass_section(IntegrationConfig, doc.get("integration"), "integration"),
        tolerances=_dataclass_section(Tolerances, doc.get("tolerances"), "tolerances"),
        t_end=None if time.get("end") is None else float(time["end"]),
        markov=markov,
        seed=seed,
        output=_dataclass_section(Outputs, doc.get("output"), "output"),
        source=source,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    scenario = parse_scenario(doc, str(path))
    out = scenario.output
    base = path.parent
    resolved = {name: (None if getattr(out, name) is None else str(base / getattr(out, name)))
                for name in ("trajectory", "report", "figures")}
    return replace(scenario, output=Outputs(**resolved))
