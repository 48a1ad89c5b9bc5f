"""Architecture configs and their canonical ``key=value`` text form."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..errors import InvalidConfigError


@dataclass
class MwcnnConfig:
    scales: int = 3
    # half the filters of the original MWCNN
    filters: tuple = (32, 64, 128)
    blocks: int = 2
    kernel: int = 3

    def __post_init__(self):
        self.filters = tuple(int(f) for f in self.filters)
        if self.scales < 1 or len(self.filters) != self.scales:
            raise InvalidConfigError(f"need one filter count per scale, got {self.filters} for {self.scales} scales")
        if any(f <= 0 for f in self.filters) or self.blocks < 1 or self.kernel % 2 == 0:
            raise InvalidConfigError("filters and blocks must be positive and the kernel odd")


@dataclass
class UnetConfig:
    depth: int = 3
    base_filters: int = 8
    kernel: int = 3

    def __post_init__(self):
        if self.depth < 1 or self.base_filters < 1 or self.kernel % 2 == 0:
            raise InvalidConfigError("unet depth and filters must be positive and the kernel odd")


@dataclass
class XpdnetConfig:
    n_unrolled: int = 6
    buffer_size: int = 5
    refine_maps: bool = True
    alpha_init: float = 0.5
    mwcnn: MwcnnConfig = field(default_factory=MwcnnConfig)
    unet: UnetConfig = field(default_factory=UnetConfig)

    def __post_init__(self):
        if self.n_unrolled < 1 or self.buffer_size < 1:
            raise InvalidConfigError("n_unrolled and buffer_size must be >= 1")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def flatten(cfg, prefix=""):
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out.update(flatten(value, f"{prefix}{f.name}."))
        else:
            out[f"{prefix}{f.name}"] = _fmt(value)
    return out


def to_text(cfg):
    """Sorted ``key=value`` lines; identical configs give identical bytes."""
    return "".join(f"{k}={v}\n" for k, v in sorted(flatten(cfg).items()))


def parse_value(raw, current):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise InvalidConfigError(f"cannot parse {raw!r} as {type(current).__name__}") from None
    return raw


def apply_overrides(cfg, items):
    """Return a copy of ``cfg`` with dotted ``key -> raw string`` overrides applied."""
    values = {}
    nested = {}
    for key, raw in items.items():
        head, _, rest = key.partition(".")
        names = {f.name for f in dataclasses.fields(cfg)}
        if head not in names:
            raise InvalidConfigError(f"unknown config key {key!r}")
        current = getattr(cfg, head)
        if rest:
            if not dataclasses.is_dataclass(current):
                raise InvalidConfigError(f"{head!r} has no sub-keys")
            nested.setdefault(head, {})[rest] = raw
        else:
            if dataclasses.is_dataclass(current):
                raise InvalidConfigError(f"{key!r} needs a sub-key")
            values[head] = parse_value(raw, current)
    for head, sub in nested.items():
        values[head] = apply_overrides(getattr(cfg, head), sub)
    return dataclasses.replace(cfg, **values)


def parse_text(text):
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        items[key.strip()] = raw.strip()
    return items


def from_text(text, cls=XpdnetConfig):
    return apply_overrides(cls(), parse_text(text))
