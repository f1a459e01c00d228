"""Flat ``key=value`` configuration with per-profile defaults.

The ``full`` profile carries the published training constants (256 px input,
ResNet-50 channel widths, Adam at 1e-4 decayed x0.1 every 60 of 150 epochs,
batch 3). The ``toy`` profile shrinks widths and resolution for desk-scale
runs and gradient checking.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


PROFILES = {
    "toy": dict(
        input_size=64, level_channels=(8, 16, 32, 48, 64), transition_channels=8,
        embed_dim=32, reduction=4, ppa_window=7, lr=1e-3, decay_period=120,
        epochs=300, batch_size=4, augment=False,
    ),
    "full": dict(
        input_size=256, level_channels=(64, 256, 512, 1024, 2048), transition_channels=64,
        embed_dim=64, reduction=16, ppa_window=31, lr=1e-4, decay_period=60,
        epochs=150, batch_size=3, augment=True,
    ),
}


@dataclass
class Config:
    profile: str = "toy"
    input_size: int = 64
    level_channels: tuple[int, ...] = (8, 16, 32, 48, 64)
    transition_channels: int = 8
    embed_dim: int = 32
    heads: int = 4
    layers: int = 2
    mlp_ratio: int = 4
    reduction: int = 4
    sa_kernel: int = 7
    purify_rounds: int = 1
    ppa_window: int = 7
    final_head: str = "s1"  # s1 | mean
    lr: float = 1e-3
    decay_factor: float = 0.1
    decay_period: int = 120
    epochs: int = 300
    batch_size: int = 4
    augment: bool = False
    seed: int = 0
    data: str = ""
    checkpoint: str = ""

    @classmethod
    def for_profile(cls, profile: str = "toy", **overrides) -> "Config":
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r} (expected toy or full)")
        cfg = cls(profile=profile, **PROFILES[profile])
        return cfg.replace(**overrides) if overrides else cfg.validated()

    def replace(self, **changes) -> "Config":
        unknown = set(changes) - _FIELDS.keys()
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
        return dataclasses.replace(self, **changes).validated()

    @property
    def grid_high(self) -> int:
        return self.input_size // 16

    @property
    def grid_mid(self) -> int:
        return self.input_size // 8

    def validated(self) -> "Config":
        ch = self.level_channels
        if self.input_size <= 0 or self.input_size % 32:
            raise ConfigError(f"input_size must be a positive multiple of 32, got {self.input_size}")
        if len(ch) != 5 or any(b <= a for a, b in zip(ch, ch[1:])) or ch[0] <= 0:
            raise ConfigError(f"level_channels must be 5 strictly increasing ints, got {ch}")
        if any(c % self.reduction for c in ch):
            raise ConfigError(f"reduction {self.reduction} must divide every level channel count")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if self.final_head not in ("s1", "mean"):
            raise ConfigError(f"final_head must be s1 or mean, got {self.final_head!r}")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError("decay_factor must lie in (0, 1]")
        if self.batch_size < 1 or self.lr <= 0 or self.purify_rounds < 1:
            raise ConfigError("batch_size, lr and purify_rounds must be positive")
        if self.ppa_window % 2 == 0:
            raise ConfigError("ppa_window must be odd")
        return self

    def to_text(self) -> str:
        lines = []
        for name in _FIELDS:
            value = getattr(self, name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{name}={value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _coerce(key: str, raw: str):
    kind = Config.__dataclass_fields__[key].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind.startswith("tuple"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> Config:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key}")
        pairs[key] = value
    profile = pairs.pop("profile", "toy")
    return Config.for_profile(profile, **{k: _coerce(k, v) for k, v in pairs.items()})


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())
