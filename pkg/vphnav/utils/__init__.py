"""
Utility functions and helpers.
"""

import json
import math
from typing import Any, Dict, Tuple

import numpy as np


def wrap_angle(angle):
    """
    Wrap an angle (or array of angles) to the interval (-pi, pi].

    Args:
        angle: Angle in radians, scalar or numpy array

    Returns:
        Wrapped angle of the same shape
    """
    wrapped = math.pi - np.mod(math.pi - np.asarray(angle, dtype=float), 2.0 * math.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """
    Recursively merge ``update`` into a copy of ``base``.
    Nested dicts are merged key by key; any other value replaces.

    Args:
        base: Lower-priority mapping
        update: Higher-priority mapping

    Returns:
        New merged dict (inputs are not modified)
    """
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_override(expression: str) -> Tuple[str, Any]:
    """
    Parse a ``key=value`` override.
    The value is decoded as JSON when possible (numbers, booleans, lists),
    otherwise kept as a plain string.

    Args:
        expression: Text such as ``mpc.N_p=20``

    Returns:
        (dotted_key, value) tuple

    Raises:
        ValueError: If there is no ``=`` or the key is empty
    """
    if "=" not in expression:
        raise ValueError(f"override '{expression}' is not of the form key=value")
    key, raw = expression.split("=", 1)
    key = key.strip()
    if not key:
        raise ValueError(f"override '{expression}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def dotted_to_nested(key: str, value: Any) -> Dict[str, Any]:
    """Turn ``a.b.c`` and a value into ``{"a": {"b": {"c": value}}}``."""
    nested: Any = value
    for part in reversed(key.split(".")):
        nested = {part: nested}
    return nested
