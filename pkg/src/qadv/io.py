"""Serialization helpers: complex matrices as [re, im] pairs, JSON I/O."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .qmat import Povm, validate_density, validate_povm


def complex_to_pairs(m) -> list:
    """Nested lists with every complex entry encoded as [re, im]."""
    a = np.asarray(m, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def pairs_to_complex(obj) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
        if a.ndim != 3 or a.shape[-1] != 2:
            raise ValueError
    except (TypeError, ValueError):
        raise ValidationError("expected a matrix of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def povm_to_dict(povm: Povm) -> dict:
    return {
        "num_classes": povm.num_classes,
        "dim": povm.dim,
        "elements": [complex_to_pairs(e) for e in povm.elements],
    }


def povm_from_dict(obj: dict) -> Povm:
    if "elements" not in obj:
        raise ValidationError("POVM JSON needs an 'elements' key")
    return validate_povm([pairs_to_complex(e) for e in obj["elements"]])


def write_json(path, obj) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"file not found: {p}")
    return json.loads(p.read_text())


def load_state(path):
    """Density matrix from a JSON file holding [re, im]-pair entries
    (either bare or under a 'state' key)."""
    obj = read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("state", obj.get("matrix"))
    if obj is None:
        raise ValidationError(f"no state found in {path}")
    return validate_density(pairs_to_complex(obj))


def load_povm(path) -> Povm:
    obj = read_json(path)
    if isinstance(obj, list):
        return validate_povm([pairs_to_complex(e) for e in obj])
    return povm_from_dict(obj)


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return repr(float(x))
