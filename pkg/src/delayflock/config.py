"""Strict JSON configuration: unknown keys are fatal and every error names
the offending key path, since silent typos in scientific configs corrupt
results."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .delay import DelaySpec
from .errors import ConfigError
from .experiments import ConsensusCriteria
from .integrator import BallisticInit, ExplicitInit, Scenario
from .model import ModelParams, PotentialSpec

_MISSING = object()


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    return node


def _check_keys(node, path, allowed):
    for key in node:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _get(node, path, key, kind, default=_MISSING):
    if key not in node:
        if default is not _MISSING:
            return default
        raise ConfigError(f"{path}.{key}: missing required key")
    value = node[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}.{key}: expected a list")
        return value
    raise AssertionError(kind)


def _parse_potential(node):
    node = _require_mapping(node, "model.potential")
    kind = _get(node, "model.potential", "kind", str)
    if kind == "cucker_smale":
        _check_keys(node, "model.potential", {"kind", "beta"})
        return PotentialSpec.cucker_smale(_get(node, "model.potential", "beta", float))
    if kind == "constant":
        _check_keys(node, "model.potential", {"kind", "psi0"})
        return PotentialSpec.constant(_get(node, "model.potential", "psi0", float))
    if kind == "table":
        _check_keys(node, "model.potential", {"kind", "distances", "weights"})
        return PotentialSpec.table(_get(node, "model.potential", "distances", list),
                                   _get(node, "model.potential", "weights", list))
    raise ConfigError(f"model.potential.kind: unknown kind {kind!r}")


def _parse_model(node):
    node = _require_mapping(node, "model")
    _check_keys(node, "model", {"n", "d", "lambda", "variant", "potential"})
    if "potential" not in node:
        raise ConfigError("model.potential: missing required key")
    return ModelParams(n=_get(node, "model", "n", int),
                       d=_get(node, "model", "d", int),
                       lam=_get(node, "model", "lambda", float),
                       variant=_get(node, "model", "variant", str),
                       potential=_parse_potential(node["potential"]))


def _parse_delay(node):
    node = _require_mapping(node, "delay")
    kind = _get(node, "delay", "kind", str)
    if kind == "constant":
        _check_keys(node, "delay", {"kind", "tau"})
        return DelaySpec.constant(_get(node, "delay", "tau", float))
    if kind == "sinusoidal":
        _check_keys(node, "delay", {"kind", "a", "b", "omega"})
        return DelaySpec.sinusoidal(_get(node, "delay", "a", float),
                                    _get(node, "delay", "b", float),
                                    _get(node, "delay", "omega", float))
    raise ConfigError(f"delay.kind: unknown kind {kind!r}")


def _parse_array(value, path, shape):
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"{path}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: non-finite entries")
    return arr


def _parse_initial(node, params):
    node = _require_mapping(node, "initial")
    mode = _get(node, "initial", "mode", str)
    shape = (params.n, params.d)
    if mode == "ballistic":
        _check_keys(node, "initial", {"mode", "x0", "v0"})
        return BallisticInit(x0=_parse_array(_get(node, "initial", "x0", list), "initial.x0", shape),
                             v0=_parse_array(_get(node, "initial", "v0", list), "initial.v0", shape))
    if mode == "explicit":
        _check_keys(node, "initial", {"mode", "samples"})
        samples = _get(node, "initial", "samples", list)
        if not samples:
            raise ConfigError("initial.samples: must be nonempty")
        xs, vs = [], []
        for i, entry in enumerate(samples):
            prefix = f"initial.samples[{i}]"
            entry = _require_mapping(entry, prefix)
            _check_keys(entry, prefix, {"x", "v"})
            xs.append(_parse_array(_get(entry, prefix, "x", list), prefix + ".x", shape))
            vs.append(_parse_array(_get(entry, prefix, "v", list), prefix + ".v", shape))
        return ExplicitInit(x=np.stack(xs), v=np.stack(vs))
    raise ConfigError(f"initial.mode: unknown mode {mode!r}")


def parse_config(path):
    """Load and validate a scenario plus consensus criteria from JSON."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    doc = _require_mapping(doc, "config")
    _check_keys(doc, "config", {"model", "delay", "initial", "integration", "criteria"})
    for key in ("model", "delay", "initial", "integration"):
        if key not in doc:
            raise ConfigError(f"config.{key}: missing required section")
    params = _parse_model(doc["model"])
    delay = _parse_delay(doc["delay"])
    initial = _parse_initial(doc["initial"], params)
    integ = _require_mapping(doc["integration"], "integration")
    _check_keys(integ, "integration", {"h", "t_end", "sample_stride"})
    scenario = Scenario(params=params, delay=delay, initial=initial,
                        h=_get(integ, "integration", "h", float),
                        t_end=_get(integ, "integration", "t_end", float),
                        sample_stride=_get(integ, "integration", "sample_stride", int, 10))
    crit_node = _require_mapping(doc.get("criteria", {}), "criteria")
    _check_keys(crit_node, "criteria", {"eps_v", "x_growth_factor"})
    criteria = ConsensusCriteria(eps_v=_get(crit_node, "criteria", "eps_v", float, 1e-3),
                                 x_growth_factor=_get(crit_node, "criteria", "x_growth_factor", float, 5.0),
                                 horizon=scenario.t_end, h=scenario.h)
    return scenario, criteria


def serialize_config(scenario: Scenario, criteria: ConsensusCriteria) -> dict:
    """Inverse of parse_config up to field equality (round-trip contract)."""
    pot = scenario.params.potential
    if pot.kind == "cucker_smale":
        pot_doc = {"kind": pot.kind, "beta": pot.beta}
    elif pot.kind == "constant":
        pot_doc = {"kind": pot.kind, "psi0": pot.psi0}
    else:
        pot_doc = {"kind": pot.kind, "distances": list(pot.distances),
                   "weights": list(pot.weights)}
    if scenario.delay.kind == "constant":
        delay_doc = {"kind": "constant", "tau": scenario.delay.tau}
    else:
        delay_doc = {"kind": "sinusoidal", "a": scenario.delay.a,
                     "b": scenario.delay.b, "omega": scenario.delay.omega}
    init = scenario.initial
    if isinstance(init, BallisticInit):
        init_doc = {"mode": "ballistic", "x0": np.asarray(init.x0).tolist(),
                    "v0": np.asarray(init.v0).tolist()}
    else:
        init_doc = {"mode": "explicit",
                    "samples": [{"x": x.tolist(), "v": v.tolist()}
                                for x, v in zip(init.x, init.v)]}
    return {
        "model": {"n": scenario.params.n, "d": scenario.params.d,
                  "lambda": scenario.params.lam, "variant": scenario.params.variant,
                  "potential": pot_doc},
        "delay": delay_doc,
        "initial": init_doc,
        "integration": {"h": scenario.h, "t_end": scenario.t_end,
                        "sample_stride": scenario.sample_stride},
        "criteria": {"eps_v": criteria.eps_v,
                     "x_growth_factor": criteria.x_growth_factor},
    }
