"""Simplex lattice enumeration shared by the grid solver and successor sampling."""

from __future__ import annotations

import numpy as np

from .errors import StructureError


def simplex_lattice(num_actions: int, grid_step: float) -> list[np.ndarray]:
    """All probability vectors with entries on the grid {0, grid_step, ..., 1}.

    ``grid_step`` is snapped to ``1/k`` with ``k = round(1/grid_step)``.
    Points come out in ascending lexicographic order, so for two actions the
    first coordinate runs 0, grid_step, ..., 1.
    """
    if not 0.0 < grid_step <= 1.0:
        raise StructureError(f"grid_step must be in (0, 1], got {grid_step}")
    k = max(1, round(1.0 / grid_step))
    points: list[np.ndarray] = []
    comp = [0] * num_actions

    def rec(pos: int, remaining: int) -> None:
        if pos == num_actions - 1:
            comp[pos] = remaining
            points.append(np.asarray(comp, dtype=np.float64) / k)
            return
        for c in range(remaining + 1):
            comp[pos] = c
            rec(pos + 1, remaining - c)

    rec(0, k)
    return points


def lattice_size(num_actions: int, grid_step: float) -> int:
    """Number of points ``simplex_lattice`` would return, without enumerating."""
    from math import comb

    k = max(1, round(1.0 / grid_step))
    return comb(k + num_actions - 1, num_actions - 1)
