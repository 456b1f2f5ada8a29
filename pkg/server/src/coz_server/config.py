"""Server configuration: mode, roles, stub canned values, real model paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

ROLES = ("sr", "prompt", "critic", "metric")
MODES = ("stub", "real")


class ConfigError(ValueError):
    pass


@dataclass
class ServerConfig:
    mode: str = "stub"
    host: str = "127.0.0.1"
    port: int = 8900
    roles: tuple[str, ...] = ROLES
    max_concurrent: int = 4
    device: str = "cpu"
    # real mode: model identifier or path per role
    models: dict[str, str] = field(default_factory=dict)
    # stub mode knobs
    stub_prompt_text: str = "fur"
    stub_critic_text: str = "87"
    stub_metrics: dict[str, float] = field(default_factory=dict)
    stub_default_metric: float = 3.0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.port <= 65535:
            raise ConfigError(f"port out of range: {self.port}")
        if self.max_concurrent < 1:
            raise ConfigError(f"max_concurrent must be >= 1, got {self.max_concurrent}")
        unknown = [r for r in self.roles if r not in ROLES]
        if unknown:
            raise ConfigError(f"unknown roles {unknown}; choose from {ROLES}")
        if not self.roles:
            raise ConfigError("at least one role must be enabled")
        if self.mode == "real":
            missing = [r for r in self.roles if not self.models.get(r)]
            if missing:
                raise ConfigError(
                    f"real mode requires a model per enabled role; missing: {missing}"
                )
        for name, val in self.stub_metrics.items():
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"stub metric {name!r} must be numeric, got {val!r}")

    def enabled(self, role: str) -> bool:
        return role in self.roles


def load_config(path) -> ServerConfig:
    """Read a JSON or TOML config file into a ServerConfig."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        data = tomllib.loads(raw)
    else:
        data = json.loads(raw)
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    kwargs = {}
    for key in ("mode", "host", "port", "max_concurrent", "device",
                "stub_prompt_text", "stub_critic_text", "stub_default_metric"):
        if key in data:
            kwargs[key] = data[key]
    if "roles" in data:
        kwargs["roles"] = tuple(data["roles"])
    if "models" in data:
        kwargs["models"] = dict(data["models"])
    if "stub_metrics" in data:
        kwargs["stub_metrics"] = {k: float(v) for k, v in data["stub_metrics"].items()}
    try:
        cfg = ServerConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc
    cfg.validate()
    return cfg
