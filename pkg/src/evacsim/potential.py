"""Walking-cost fields and the upwind generalized distance transform.

The potential of a cost field is the minimal accumulated cost to the exit
set: zero on exits, solving the first-order upwind discretization of
``||grad(potential)|| = cost`` elsewhere.  Solved by fast marching on a binary
heap with (value, cell index) tie-breaking, so results are deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, gradient_many


class NoExitError(ValueError):
    """The exit set is empty."""


class AllUnreachableError(ValueError):
    """No free cell can reach any exit."""


@dataclass(frozen=True)
class CostParams:
    """Parameters of the marginal cost: base effort, fire term on/off, repulsion range."""

    walk_effort: float
    fire_aware: bool
    obstacle_range: float

    def __post_init__(self):
        if self.walk_effort <= 0:
            raise ValueError("walk_effort must be > 0")
        if self.obstacle_range <= 0:
            raise ValueError("obstacle_range must be > 0")


def obstacle_cost(distance: ScalarField, obstacle_range: float) -> ScalarField:
    """Repulsive cost from the obstacle distance field.

    +inf on obstacles (distance 0), 1/distance within obstacle_range, 0 beyond.
    """
    d = distance.values
    out = np.zeros_like(d)
    with np.errstate(divide="ignore"):
        near = (d > 0) & (d <= obstacle_range)
        out[near] = 1.0 / d[near]
    out[d == 0] = np.inf
    return ScalarField(distance.nx, distance.ny, distance.h, out)


def marginal_cost(params: CostParams, obstacle_field: ScalarField,
                  fire_field: ScalarField) -> ScalarField:
    """Cellwise walking cost: effort + obstacle cost (+ fire cost when aware)."""
    obstacle_field.require_same_grid(fire_field)
    w = 1.0 if params.fire_aware else 0.0
    values = params.walk_effort + obstacle_field.values + w * fire_field.values
    return ScalarField(obstacle_field.nx, obstacle_field.ny, obstacle_field.h, values)


def _godunov_update(a: float, b: float, fh: float) -> float:
    """Solve the two-sided quadratic (phi-a)+^2 + (phi-b)+^2 = (f h)^2."""
    if a > b:
        a, b = b, a
    if b - a >= fh:                 # only the smaller neighbor is upwind
        return a + fh
    return 0.5 * (a + b + np.sqrt(2.0 * fh * fh - (a - b) ** 2))


def solve_eikonal(cost: ScalarField, exit_cells) -> ScalarField:
    """Minimal path cost to the exit set under the given cost field.

    Obstacle cells (cost +inf) never enter the narrow band; cells no path
    reaches keep +inf.  Raises NoExitError / AllUnreachableError.
    """
    exit_cells = list(exit_cells)
    if not exit_cells:
        raise NoExitError("exit set is empty")
    nx, ny, h = cost.nx, cost.ny, cost.h
    u = cost.values
    if np.any(np.isfinite(u) & (u <= 0)):
        raise ValueError("cost must be positive on passable cells")
    phi = np.full((nx, ny), np.inf)
    known = np.zeros((nx, ny), dtype=bool)
    heap = []
    for i, j in exit_cells:
        phi[i, j] = 0.0
        heapq.heappush(heap, (0.0, i * ny + j))
    blocked = ~np.isfinite(u)

    while heap:
        value, flat = heapq.heappop(heap)
        i, j = divmod(flat, ny)
        if known[i, j]:
            continue
        known[i, j] = True
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if not (0 <= ni < nx and 0 <= nj < ny):
                continue
            if known[ni, nj] or blocked[ni, nj]:
                continue
            a = np.inf            # accepted upwind neighbor along x
            if ni > 0 and known[ni - 1, nj]:
                a = phi[ni - 1, nj]
            if ni < nx - 1 and known[ni + 1, nj]:
                a = min(a, phi[ni + 1, nj])
            b = np.inf            # along y
            if nj > 0 and known[ni, nj - 1]:
                b = phi[ni, nj - 1]
            if nj < ny - 1 and known[ni, nj + 1]:
                b = min(b, phi[ni, nj + 1])
            fh = u[ni, nj] * h
            if np.isinf(a) and np.isinf(b):
                continue
            if np.isinf(a):
                cand = b + fh
            elif np.isinf(b):
                cand = a + fh
            else:
                cand = _godunov_update(a, b, fh)
            if cand < phi[ni, nj]:
                phi[ni, nj] = cand
                heapq.heappush(heap, (cand, ni * ny + nj))

    free = ~blocked
    exit_mask = np.zeros((nx, ny), dtype=bool)
    for i, j in exit_cells:
        exit_mask[i, j] = True
    interior = free & ~exit_mask
    if interior.any() and not np.isfinite(phi[interior]).any():
        raise AllUnreachableError("no free cell can reach the exit set")
    return ScalarField(nx, ny, h, phi)


def gradient_at(field: ScalarField, point) -> np.ndarray:
    """Interpolated central-difference gradient at one point.

    Falls back to one-sided differences away from +inf cells; raises
    OutOfDomainError outside the domain.
    """
    return gradient_many(field, np.asarray(point, dtype=float)[None, :])[0]


def descend_path(phi: ScalarField, start, step: float, max_steps: int = 10_000) -> np.ndarray:
    """Steepest-descent polyline on the potential, for planned-path inspection.

    Stops when the gradient vanishes or the path leaves the domain; returns an
    (n, 2) array of points including the start.
    """
    pts = [np.asarray(start, dtype=float)]
    for _ in range(max_steps):
        g = gradient_at(phi, pts[-1])
        norm = float(np.hypot(g[0], g[1]))
        if norm < 1e-12:
            break
        nxt = pts[-1] - step * g / norm
        if not phi.contains(nxt[0], nxt[1]):
            break
        pts.append(nxt)
    return np.array(pts)
