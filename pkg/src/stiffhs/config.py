"""Scenario files (YAML or JSON) and their canonical hash.

Top-level keys mirror :class:`stiffhs.model.Scenario`; ``omega0``,
``exterior`` and ``growth`` are nested mappings.  See ``scenarios/`` for
commented examples.  Unknown keys are errors.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioError, TruncationWarning
from .model import GrowthLaw, Omega0, RadialShape, Scenario

SCHEMA_VERSION = 1

_NESTED = {"omega0": Omega0, "exterior": RadialShape, "growth": GrowthLaw}
_SCALARS = {f.name for f in fields(Scenario)} - set(_NESTED)
_EXTRA = {"schema_version", "output_count"}


def _number(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", ".inf", "infinity"):
        return math.inf
    return v


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a Scenario; collects every problem before raising."""
    if not isinstance(data, dict):
        raise ScenarioError("configuration root must be a mapping")
    problems = []
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")
    unknown = sorted(set(data) - _SCALARS - set(_NESTED) - _EXTRA)
    for key in unknown:
        problems.append(f"unknown key {key!r}")

    kwargs = {}
    for key, cls in _NESTED.items():
        if key not in data:
            continue
        sub = data[key]
        if not isinstance(sub, dict):
            problems.append(f"{key} must be a mapping")
            continue
        allowed = {f.name for f in fields(cls)}
        bad = sorted(set(sub) - allowed)
        for k in bad:
            problems.append(f"unknown key {key}.{k}")
        try:
            clean = {k: _number(v) for k, v in sub.items() if k in allowed}
            if "center" in clean:
                clean["center"] = tuple(float(c) for c in clean["center"])
            kwargs[key] = cls(**clean)
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: {exc}")

    for key in _SCALARS & set(data):
        v = data[key]
        if key in ("m_list", "output_times"):
            v = tuple(float(x) for x in v)
        kwargs[key] = _number(v)
    if "output_count" in data and "output_times" not in data:
        count = int(data["output_count"])
        if count < 2:
            problems.append("output_count must be at least 2")
        else:
            horizon = float(data.get("horizon", Scenario.horizon))
            kwargs["output_times"] = tuple(float(t) for t in np.linspace(0.0, horizon, count))

    if "exterior" in data and isinstance(data["exterior"], dict):
        v = data["exterior"].get("value", 0.0)
        if isinstance(v, (int, float)) and not 0 <= v < 1:
            problems.append("exterior density must satisfy 0 <= rho_E0 < 1")
    if problems:
        raise ScenarioError(problems)

    explicit_outer = "outer_radius" in data
    scenario = Scenario(**kwargs)
    scenario = enforce_truncation(scenario, warn=explicit_outer)
    return scenario.validate()


def enforce_truncation(scenario: Scenario, warn=True) -> Scenario:
    """Expand the outer radius to the finite-propagation bound if needed."""
    bound = scenario.truncation_radius()
    if not math.isfinite(bound):
        raise ScenarioError("exterior density must vanish toward the outer edge "
                            "(finite plateau radius when rho_E0 >= 1/2)")
    if scenario.outer_radius >= bound:
        return scenario
    dx = scenario.dx
    new = math.ceil(bound / dx - 1e-9) * dx
    if warn:
        warnings.warn(f"outer radius {scenario.outer_radius:g} is below the truncation bound "
                      f"{bound:g}; expanded to {new:g}", TruncationWarning, stacklevel=3)
    return replace(scenario, outer_radius=new)


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return yaml.safe_load(text)


def parse_scenario(path) -> Scenario:
    return scenario_from_dict(load_config(path))


def scenario_to_dict(scenario: Scenario) -> dict:
    d = asdict(scenario)
    d["schema_version"] = SCHEMA_VERSION
    d["m_list"] = list(d["m_list"])
    d["output_times"] = list(d["output_times"])
    d["omega0"]["center"] = list(d["omega0"]["center"])
    return d


def _canonical(obj):
    if isinstance(obj, float):
        return "inf" if math.isinf(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def scenario_hash(scenario: Scenario) -> str:
    """Short content digest of the canonicalised scenario."""
    text = json.dumps(_canonical(scenario_to_dict(scenario)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]
