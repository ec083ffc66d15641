"""Flat ``section.key=value`` configuration files.

Sections map onto the config dataclasses: ``frontend`` (FrontendConfig),
``model`` (ModelConfig), ``train`` (TrainConfig) and ``synth`` (SynthConfig).
Unknown sections or keys are rejected. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import ast
import dataclasses
from pathlib import Path

from .dataio import SynthConfig
from .dsp import FrontendConfig
from .nn.model import ModelConfig
from .train import TrainConfig

SECTIONS = {
    "frontend": FrontendConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
}


class ConfigError(ValueError):
    pass


def _coerce(raw: str, current):
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, (tuple, list, dict)):
        value = ast.literal_eval(raw)
        if not isinstance(value, type(current)) and not (
                isinstance(current, tuple) and isinstance(value, list)):
            raise ValueError(f"expected a {type(current).__name__}")
        return tuple(value) if isinstance(current, tuple) else value
    return raw


def parse_assignments(lines, source="<config>"):
    """``{section: {key: raw string}}`` from ``section.key=value`` lines."""
    out = {name: {} for name in SECTIONS}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected section.key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, field = key.partition(".")
        if section not in SECTIONS or not field:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        names = {f.name for f in dataclasses.fields(SECTIONS[section])}
        if field not in names:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[section][field] = value
    return out


def build_configs(assignments):
    """Instantiate each section's dataclass with defaults overridden by ``assignments``."""
    configs = {}
    for section, cls in SECTIONS.items():
        defaults = cls()
        kwargs = {}
        for field, raw in assignments.get(section, {}).items():
            try:
                kwargs[field] = _coerce(raw, getattr(defaults, field))
            except (ValueError, SyntaxError) as exc:
                raise ConfigError(f"{section}.{field}: {exc}") from None
        try:
            configs[section] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from None
    return configs


def load_config(path=None, overrides=()):
    """Read ``path`` (optional) then apply ``overrides`` (``section.key=value`` strings)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines() if path else []
    merged = parse_assignments(lines, str(path) if path else "<config>")
    extra = parse_assignments(list(overrides), "<command line>")
    for section, values in extra.items():
        merged[section].update(values)
    return build_configs(merged)


def dump_config(configs) -> str:
    lines = []
    for section, cfg in configs.items():
        for f in dataclasses.fields(cfg):
            lines.append(f"{section}.{f.name}={getattr(cfg, f.name)!r}"
                         if isinstance(getattr(cfg, f.name), (tuple, dict, list))
                         else f"{section}.{f.name}={getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
