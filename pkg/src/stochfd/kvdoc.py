"""Plain-text ``key = value`` documents used for models and fitted GPs.

Floats are written with ``repr`` (shortest round-tripping form) so a
write/read cycle is bit-exact. Arrays are written flat, row-major, with a
companion ``<key>_shape`` entry.
"""

from __future__ import annotations

import numpy as np

__all__ = ["DocumentError", "format_kv", "parse_kv", "get_float", "get_array"]


class DocumentError(ValueError):
    pass


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_kv(items) -> str:
    """Render ``(key, value)`` pairs; ndarray values expand to data + shape."""
    lines = []
    for key, value in items:
        if isinstance(value, np.ndarray):
            arr = np.asarray(value, dtype=float)
            lines.append(f"{key}_shape = {' '.join(str(s) for s in arr.shape)}")
            lines.append(f"{key} = {' '.join(repr(float(x)) for x in arr.ravel())}")
        else:
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DocumentError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise DocumentError(f"line {lineno}: empty key")
        if key in out:
            raise DocumentError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def get_float(doc, key):
    try:
        return float(doc[key])
    except KeyError:
        raise DocumentError(f"missing key {key!r}") from None
    except ValueError:
        raise DocumentError(f"key {key!r} is not a number: {doc[key]!r}") from None


def get_array(doc, key):
    try:
        shape = tuple(int(s) for s in doc[f"{key}_shape"].split())
        flat = [float(x) for x in doc[key].split()]
    except KeyError as exc:
        raise DocumentError(f"missing key {exc.args[0]!r}") from None
    except ValueError:
        raise DocumentError(f"array {key!r} is malformed") from None
    if int(np.prod(shape)) != len(flat):
        raise DocumentError(f"array {key!r} does not match its shape {shape}")
    return np.array(flat, dtype=float).reshape(shape)
