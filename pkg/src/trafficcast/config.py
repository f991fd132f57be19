"""Plain-text ``key = value`` configuration files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Mapping


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    """One ``key = value`` per line; ``#`` starts a comment; later keys win.

    An indented line continues the previous value.
    """
    out: dict[str, str] = {}
    last = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if raw[0] in " \t" and last is not None:
            out[last] = f"{out[last]} {line}".strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
        last = key
    return out


def load_config(path) -> dict[str, str]:
    """Read a config file; the name ``benchmark`` selects the bundled benchmark config."""
    if str(path) == "benchmark":
        return parse_config(benchmark_config_text(), "benchmark.cfg")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def benchmark_config_text() -> str:
    return resources.files("trafficcast").joinpath("data/benchmark.cfg").read_text(encoding="utf-8")


def section(config: Mapping[str, str], prefix: str) -> dict[str, str]:
    """Keys under ``prefix.`` with the prefix stripped."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in config.items() if k.startswith(p)}


def parse_value(text: str):
    """Best-effort literal: int, float, bool, none, tuple of numbers, else the string."""
    t = text.strip()
    low = t.lower()
    if low in ("none", "null", ""):
        return None
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if t.startswith("(") and t.endswith(")"):
        return tuple(parse_value(x) for x in t[1:-1].split(",") if x.strip())
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t
