"""YAML run/sweep configuration.

A document is a mapping whose keys mirror ``SimConfig`` fields::

    K: 20
    network: cycle          # cycle | complete
    n: 10
    epsilon: 0.05
    k: 10                   # default: K
    curation: selective_sharing
    seed: 42

``curation`` is either a mode name (``none``, ``selective_sharing``) or a
mapping with a ``mode`` key plus ``resources``/``study_size`` for
``biased_production`` or ``journalist_mode`` (fair | random | all) for
``journalist``.

Any value given as a list is swept; the document then describes the
Cartesian product of all listed values (a ``SweepSpec``). Curation mode
names and curation fields may be listed too.

Defaults: num_policy_makers 10, listener_pattern random_distinct,
dedup false, certainty_threshold 0.99, max_rounds 1000000, reps 1000, seed 0.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Any

import yaml

from .agents import (
    BiasedProduction,
    Journalist,
    JournalistMode,
    NoCuration,
    SelectiveSharing,
)
from .engine import SimConfig


class ConfigError(ValueError):
    pass


REQUIRED = ("K", "network", "n", "epsilon")

# order of columns in sweep output and of keys in canonical encodings
FLAT_KEYS = (
    "K",
    "network",
    "n",
    "epsilon",
    "k",
    "num_policy_makers",
    "listener_pattern",
    "curation",
    "resources",
    "study_size",
    "journalist_mode",
    "dedup",
    "certainty_threshold",
    "max_rounds",
    "reps",
    "seed",
)
CURATION_KEYS = ("mode", "resources", "study_size", "journalist_mode")
CURATION_MODES = ("none", "selective_sharing", "biased_production", "journalist")

_INT_KEYS = {"K", "n", "k", "num_policy_makers", "resources", "study_size", "max_rounds", "reps", "seed"}
_FLOAT_KEYS = {"epsilon", "certainty_threshold"}


@dataclass(frozen=True)
class SweepSpec:
    base: dict[str, Any]
    axes: dict[str, list[Any]]

    def combinations(self) -> list[dict[str, Any]]:
        """Flat parameter dicts for every distinct combination, in product order."""
        names = list(self.axes)
        out, seen = [], set()
        for values in itertools.product(*(self.axes[k] for k in names)):
            flat = config_to_flat(flat_to_config({**self.base, **dict(zip(names, values))}))
            key = canonical(flat)
            if key not in seen:
                seen.add(key)
                out.append(flat)
        return out

    def configs(self) -> list[SimConfig]:
        return [flat_to_config(f) for f in self.combinations()]


def _coerce(key: str, value: Any) -> Any:
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if key == "dedup":
        if isinstance(value, str) and value.lower() in ("on", "off"):
            return value.lower() == "on"
        if not isinstance(value, bool):
            raise ConfigError(f"dedup: expected true/false, got {value!r}")
    return value


def flat_to_config(flat: dict[str, Any]) -> SimConfig:
    """Build and validate a SimConfig from flat parameters."""
    missing = [k for k in REQUIRED if flat.get(k) is None]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    f = {k: _coerce(k, v) for k, v in flat.items() if v is not None and v != ""}
    mode = f.pop("curation", "none")
    resources = f.pop("resources", None)
    study_size = f.pop("study_size", None)
    jmode = f.pop("journalist_mode", None)
    try:
        if mode == "none":
            curation = NoCuration()
        elif mode == "selective_sharing":
            curation = SelectiveSharing()
        elif mode == "biased_production":
            if resources is None or study_size is None:
                raise ConfigError("curation: biased_production needs resources and study_size")
            curation = BiasedProduction(resources, study_size)
        elif mode == "journalist":
            if jmode is None:
                raise ConfigError("curation: journalist needs journalist_mode")
            curation = Journalist(JournalistMode(jmode))
        else:
            raise ConfigError(f"curation: unknown mode {mode!r}")
        return SimConfig(curation=curation, **f)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_flat(cfg: SimConfig) -> dict[str, Any]:
    cur = cfg.curation
    return {
        "K": cfg.K,
        "network": cfg.network.value,
        "n": cfg.n,
        "epsilon": cfg.epsilon,
        "k": cfg.k,
        "num_policy_makers": cfg.num_policy_makers,
        "listener_pattern": cfg.listener_pattern.value,
        "curation": cur.name,
        "resources": cur.resources if isinstance(cur, BiasedProduction) else None,
        "study_size": cur.study_size if isinstance(cur, BiasedProduction) else None,
        "journalist_mode": cur.mode.value if isinstance(cur, Journalist) else None,
        "dedup": cfg.dedup,
        "certainty_threshold": cfg.certainty_threshold,
        "max_rounds": cfg.max_rounds,
        "reps": cfg.reps,
        "seed": cfg.seed,
    }


def canonical(flat: dict[str, Any]) -> str:
    return json.dumps({k: flat.get(k) for k in FLAT_KEYS}, sort_keys=True)


def combination_seed(master_seed: int, flat: dict[str, Any]) -> int:
    """Seed of one sweep combination; independent of the other combinations."""
    body = {k: v for k, v in flat.items() if k not in ("seed", "reps")}
    digest = hashlib.sha256(f"{master_seed}|{canonical(body)}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _flatten_document(doc: dict[str, Any]) -> dict[str, Any]:
    unknown = sorted(set(doc) - set(FLAT_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    flat = {k: v for k, v in doc.items() if k != "curation"}
    cur = doc.get("curation", "none")
    if isinstance(cur, dict):
        bad = sorted(set(cur) - set(CURATION_KEYS))
        if bad:
            raise ConfigError(f"curation: unknown key(s): {', '.join(bad)}")
        if "mode" not in cur:
            raise ConfigError("curation: missing 'mode'")
        flat["curation"] = cur["mode"]
        for key in CURATION_KEYS[1:]:
            if key in cur:
                flat[key] = cur[key]
    elif isinstance(cur, list):
        modes = []
        for item in cur:
            if isinstance(item, dict):
                raise ConfigError("curation: list items must be mode names; put fields in a mapping")
            modes.append(item)
        flat["curation"] = modes
    else:
        flat["curation"] = cur
    modes = flat["curation"] if isinstance(flat["curation"], list) else [flat["curation"]]
    for m in modes:
        if m not in CURATION_MODES:
            raise ConfigError(f"curation: unknown mode {m!r}")
    return flat


def parse_config(text: str) -> SimConfig | SweepSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of keys to values")
    flat = _flatten_document(doc)
    axes = {k: v for k, v in flat.items() if isinstance(v, list)}
    for key, values in axes.items():
        if not values:
            raise ConfigError(f"{key}: empty value list")
    base = {k: v for k, v in flat.items() if k not in axes}
    if not axes:
        return flat_to_config(base)
    missing = [k for k in REQUIRED if k not in base and k not in axes]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    spec = SweepSpec(base, axes)
    spec.configs()  # fail fast on any invalid combination
    return spec


def load_config(path: str) -> SimConfig | SweepSpec:
    with open(path) as fh:
        return parse_config(fh.read())
