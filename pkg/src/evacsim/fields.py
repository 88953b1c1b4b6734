"""Cell-centered 2D scalar grids and the ASCII matrix format shared by all field outputs."""

from __future__ import annotations

import numpy as np

# Header format: three lines "nx <int>", "ny <int>", "h <float>", then ny rows of
# nx values (row j holds values[:, j]).  %.17g makes float64 round-trip bitwise.
_FLOAT_FMT = "%.17g"


class OutOfDomainError(ValueError):
    """Sample point lies outside the field's domain."""


class DimensionMismatchError(ValueError):
    """Fields that must share a grid do not."""


class ScalarField:
    """Real values on a uniform grid with spacing ``h``.

    ``values[i, j]`` sits at the cell center ``((i + 0.5) h, (j + 0.5) h)``.
    ``+inf`` is the sentinel for blocked or unreachable cells.
    """

    __slots__ = ("nx", "ny", "h", "values")

    def __init__(self, nx: int, ny: int, h: float, values: np.ndarray | None = None):
        if nx < 1 or ny < 1:
            raise ValueError("field needs at least one cell")
        if h <= 0:
            raise ValueError("grid spacing must be positive")
        self.nx = int(nx)
        self.ny = int(ny)
        self.h = float(h)
        if values is None:
            self.values = np.zeros((self.nx, self.ny))
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != (self.nx, self.ny):
                raise DimensionMismatchError(
                    f"values shape {values.shape} != grid ({self.nx}, {self.ny})"
                )
            self.values = values

    @classmethod
    def full_like(cls, other: "ScalarField", fill: float) -> "ScalarField":
        return cls(other.nx, other.ny, other.h, np.full((other.nx, other.ny), float(fill)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.nx, self.ny, self.h, self.values.copy())

    @property
    def width(self) -> float:
        return self.nx * self.h

    @property
    def height(self) -> float:
        return self.ny * self.h

    def same_grid(self, other: "ScalarField") -> bool:
        return (self.nx, self.ny) == (other.nx, other.ny) and self.h == other.h

    def require_same_grid(self, other: "ScalarField") -> None:
        if not self.same_grid(other):
            raise DimensionMismatchError(
                f"grids differ: ({self.nx},{self.ny},h={self.h}) vs "
                f"({other.nx},{other.ny},h={other.h})"
            )

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (cx, cy) of cell-center coordinates, shaped like values."""
        cx = (np.arange(self.nx) + 0.5) * self.h
        cy = (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(cx, cy, indexing="ij")

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Index of the cell containing (x, y); clamped to the grid at the outer edges."""
        i = min(max(int(x / self.h), 0), self.nx - 1)
        j = min(max(int(y / self.h), 0), self.ny - 1)
        return i, j

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


def write_field(field: ScalarField, path) -> None:
    """Write a field in the shared ASCII matrix format (bitwise round-trip safe)."""
    with open(path, "w") as fh:
        fh.write(f"nx {field.nx}\n")
        fh.write(f"ny {field.ny}\n")
        fh.write(f"h {_FLOAT_FMT % field.h}\n")
        for j in range(field.ny):
            fh.write(" ".join(_FLOAT_FMT % v for v in field.values[:, j]))
            fh.write("\n")


def read_field(path) -> ScalarField:
    """Parse a field written by :func:`write_field`."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise ValueError(f"{path}: truncated field file")
    try:
        nx = int(lines[0].split()[1])
        ny = int(lines[1].split()[1])
        h = float(lines[2].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: bad field header") from exc
    if len(lines) != 3 + ny:
        raise ValueError(f"{path}: expected {ny} data rows, found {len(lines) - 3}")
    values = np.empty((nx, ny))
    for j in range(ny):
        row = np.array([float(tok) for tok in lines[3 + j].split()])
        if row.size != nx:
            raise ValueError(f"{path}: row {j} has {row.size} values, expected {nx}")
        values[:, j] = row
    return ScalarField(nx, ny, h, values)


def _check_inside(field: ScalarField, pts: np.ndarray) -> None:
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > field.width) or \
       np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > field.height):
        raise OutOfDomainError("point outside the field's domain")


def sample_many(field: ScalarField, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the field at an (n, 2) array of points.

    Outside the outermost ring of cell centers the value is clamped to the
    edge cell (constant extrapolation over the half-cell margin).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    _check_inside(field, pts)
    gx = pts[:, 0] / field.h - 0.5
    gy = pts[:, 1] / field.h - 0.5
    i0 = np.clip(np.floor(gx).astype(int), 0, field.nx - 2) if field.nx > 1 else np.zeros(len(pts), int)
    j0 = np.clip(np.floor(gy).astype(int), 0, field.ny - 2) if field.ny > 1 else np.zeros(len(pts), int)
    tx = np.clip(gx - i0, 0.0, 1.0) if field.nx > 1 else np.zeros(len(pts))
    ty = np.clip(gy - j0, 0.0, 1.0) if field.ny > 1 else np.zeros(len(pts))
    i1 = np.minimum(i0 + 1, field.nx - 1)
    j1 = np.minimum(j0 + 1, field.ny - 1)
    v = field.values
    return ((1 - tx) * (1 - ty) * v[i0, j0] + tx * (1 - ty) * v[i1, j0]
            + (1 - tx) * ty * v[i0, j1] + tx * ty * v[i1, j1])


def _corner_gradients(field: ScalarField) -> np.ndarray:
    """Per-cell gradient by central differences, one-sided next to +inf or the border.

    Returns an (nx, ny, 2) array; cells with no finite neighbor on either side
    of an axis get 0 on that axis.  Infinite cells themselves get gradient 0.
    """
    v = field.values
    h = field.h
    finite = np.isfinite(v)
    grad = np.zeros(v.shape + (2,))
    for axis in range(2):
        plus = np.full_like(v, np.inf)
        minus = np.full_like(v, np.inf)
        if axis == 0:
            plus[:-1, :] = v[1:, :]
            minus[1:, :] = v[:-1, :]
        else:
            plus[:, :-1] = v[:, 1:]
            minus[:, 1:] = v[:, :-1]
        ok_p = np.isfinite(plus)
        ok_m = np.isfinite(minus)
        g = np.zeros_like(v)
        both = ok_p & ok_m & finite
        g[both] = (plus[both] - minus[both]) / (2 * h)
        only_p = ok_p & ~ok_m & finite
        g[only_p] = (plus[only_p] - v[only_p]) / h
        only_m = ok_m & ~ok_p & finite
        g[only_m] = (v[only_m] - minus[only_m]) / h
        grad[:, :, axis] = g
    return grad


def gradient_many(field: ScalarField, pts: np.ndarray) -> np.ndarray:
    """Interpolated gradient of the field at an (n, 2) array of points.

    Corner gradients use central differences, falling back to one-sided
    differences away from +inf cells; the four corner gradients are blended
    bilinearly, renormalizing over corners whose own value is finite.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    _check_inside(field, pts)
    grads = _corner_gradients(field)
    finite = np.isfinite(field.values)
    gx = pts[:, 0] / field.h - 0.5
    gy = pts[:, 1] / field.h - 0.5
    i0 = np.clip(np.floor(gx).astype(int), 0, max(field.nx - 2, 0))
    j0 = np.clip(np.floor(gy).astype(int), 0, max(field.ny - 2, 0))
    tx = np.clip(gx - i0, 0.0, 1.0)
    ty = np.clip(gy - j0, 0.0, 1.0)
    i1 = np.minimum(i0 + 1, field.nx - 1)
    j1 = np.minimum(j0 + 1, field.ny - 1)
    w00 = (1 - tx) * (1 - ty) * finite[i0, j0]
    w10 = tx * (1 - ty) * finite[i1, j0]
    w01 = (1 - tx) * ty * finite[i0, j1]
    w11 = tx * ty * finite[i1, j1]
    total = w00 + w10 + w01 + w11
    out = (w00[:, None] * grads[i0, j0] + w10[:, None] * grads[i1, j0]
           + w01[:, None] * grads[i0, j1] + w11[:, None] * grads[i1, j1])
    ok = total > 0
    out[ok] /= total[ok, None]
    out[~ok] = 0.0
    return out
