"""Versioned JSON model files.

Floats are written as ``float.hex`` strings so weights and thresholds
survive a save/load cycle bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_NAME = "trafficcast-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def hex_array(a) -> list:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0:
        return float(a).hex()
    return [hex_array(x) for x in a] if a.ndim > 1 else [float(x).hex() for x in a]


def unhex_array(data) -> np.ndarray:
    def conv(x):
        return [conv(v) for v in x] if isinstance(x, list) else float.fromhex(x)
    return np.asarray(conv(data), dtype=np.float64)


def dumps(kind: str, payload: dict) -> str:
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "kind": kind, "model": payload}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads(text: str) -> tuple[str, dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a trafficcast model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')}")
    return doc["kind"], doc["model"]


def save(path, kind: str, payload: dict) -> None:
    Path(path).write_text(dumps(kind, payload), encoding="utf-8")


def load(path) -> tuple[str, dict]:
    return loads(Path(path).read_text(encoding="utf-8"))
