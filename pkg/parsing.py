"""Parsing utilities for command-line specs.

This module provides functions for:
- Parsing K grid specs of the form MIN:MAX:N
- Validating parameter paths (block.field) with close-match suggestions
- Parsing one-at-a-time sweep specs of the form PATH=V1,V2,...
"""

from dataclasses import fields
from difflib import get_close_matches

from dynamics import GridSpec
from primitives import EnvParams, SharedParams

PARAM_BLOCKS = {"shared": SharedParams, "ho": EnvParams, "ai": EnvParams}


def known_param_paths() -> list[str]:
    """Every addressable parameter path, with `lambda` for the depreciation rate."""
    paths = []
    for block, cls in PARAM_BLOCKS.items():
        for f in fields(cls):
            name = "lambda" if f.name == "lam" else f.name
            paths.append(f"{block}.{name}")
    return paths


def parse_grid_spec(text: str) -> GridSpec:
    """Parse a K grid spec.

    Args:
        text: "MIN:MAX:N", e.g. "0.001:4:400".

    Returns:
        GridSpec.

    Raises:
        ValueError: If the spec is malformed or violates grid invariants.
    """
    parts = str(text or "").split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like MIN:MAX:N, got {text!r}")
    try:
        k_min, k_max, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ValueError(f"grid must look like MIN:MAX:N, got {text!r}") from e
    return GridSpec(k_min=k_min, k_max=k_max, n=n)


def parse_param_path(path: str) -> str:
    """Validate a parameter path and return it normalised.

    Raises:
        ValueError: If the path is unknown; the message suggests the closest
            known path when one is similar enough.
    """
    path = str(path or "").strip()
    known = known_param_paths()
    if path in known:
        return path
    matches = get_close_matches(path, known, n=1, cutoff=0.6)
    hint = f" (did you mean '{matches[0]}'?)" if matches else ""
    raise ValueError(f"unknown parameter '{path}'{hint}")


def parse_vary(text: str) -> tuple[str, list[float]]:
    """Parse a sweep spec "PATH=V1,V2,..." into (path, values)."""
    path, sep, values = str(text or "").partition("=")
    if not sep or not values.strip():
        raise ValueError(f"sweep must look like PATH=V1,V2, got {text!r}")
    path = parse_param_path(path)
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise ValueError(f"sweep values for '{path}' must be numbers, got {values!r}") from e
    if not parsed:
        raise ValueError(f"sweep for '{path}' has no values")
    return path, parsed


__all__ = ["PARAM_BLOCKS", "known_param_paths", "parse_grid_spec", "parse_param_path", "parse_vary"]
