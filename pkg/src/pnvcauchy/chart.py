"""Coordinate charts on uniform grids and fourth-order finite differences.

Array convention used throughout the package: tensor component axes come
first, the ``dim`` grid axes come last.  A scalar on a 2D chart has shape
``(N1, N2)``, a covector ``(2, N1, N2)``, a symmetric 2-tensor
``(2, 2, N1, N2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidSpec

MIN_POINTS = 8

# one-sided 4th-order first-derivative weights for the first two nodes
_LEFT0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_LEFT1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN = "open"


@dataclass(frozen=True)
class ChartSpec:
    dim: int
    extents: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    boundary: tuple[Boundary, ...]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "extents": [list(e) for e in self.extents],
            "points": list(self.points),
            "boundary": [b.value for b in self.boundary],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChartSpec":
        return make_spec(d["extents"], d["points"], d["boundary"])

    def refined(self, factor: int) -> "ChartSpec":
        """Same chart with the spacing divided by ``factor``."""
        pts = []
        for n, b in zip(self.points, self.boundary):
            pts.append(n * factor if b is Boundary.PERIODIC else (n - 1) * factor + 1)
        return ChartSpec(self.dim, self.extents, tuple(pts), self.boundary)


def make_spec(extents, points, boundary) -> ChartSpec:
    """Convenience constructor accepting plain lists / strings."""
    extents = tuple((float(a), float(b)) for a, b in extents)
    if isinstance(points, int):
        points = (points,) * len(extents)
    if isinstance(boundary, (str, Boundary)):
        boundary = (boundary,) * len(extents)
    bnd = tuple(Boundary(b.value if isinstance(b, Boundary) else str(b).lower()) for b in boundary)
    return ChartSpec(len(extents), extents, tuple(int(p) for p in points), bnd)


@dataclass
class Chart:
    spec: ChartSpec
    axes: tuple[np.ndarray, ...]
    spacing: tuple[float, ...]
    coords: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.points

    @property
    def h(self) -> float:
        """Largest grid spacing; the refinement parameter in error bounds."""
        return max(self.spacing)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(b is Boundary.PERIODIC for b in self.spec.boundary)

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Fourth-order partial derivative of ``f`` along grid ``axis``."""
        return partial_derivative(self, f, axis)

    def grad(self, f: np.ndarray) -> np.ndarray:
        """All first partials, stacked on a new leading axis."""
        return np.stack([self.d(f, i) for i in range(self.dim)])


def build_chart(spec: ChartSpec) -> Chart:
    if spec.dim < 1 or len(spec.extents) != spec.dim or len(spec.points) != spec.dim:
        raise InvalidSpec("chart dimension does not match extents/points")
    axes, spacing = [], []
    for (a, b), n, bnd in zip(spec.extents, spec.points, spec.boundary):
        if n < MIN_POINTS:
            raise InvalidSpec(f"need at least {MIN_POINTS} points per axis, got {n}")
        if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
            raise InvalidSpec(f"degenerate interval [{a}, {b}]")
        if bnd is Boundary.PERIODIC:
            h = (b - a) / n
            axes.append(a + h * np.arange(n))
        else:
            h = (b - a) / (n - 1)
            axes.append(a + h * np.arange(n))
        spacing.append(h)
    coords = tuple(np.meshgrid(*axes, indexing="ij"))
    return Chart(spec, tuple(axes), tuple(spacing), coords)


def partial_derivative(chart: Chart, f: np.ndarray, axis: int) -> np.ndarray:
    if not 0 <= axis < chart.dim:
        raise IndexError(f"axis {axis} out of range for {chart.dim}D chart")
    f = np.asarray(f)
    ax = f.ndim - chart.dim + axis
    if ax < 0 or f.shape[ax] != chart.shape[axis]:
        raise ValueError("array does not match chart grid")
    h = chart.spacing[axis]
    if chart.periodic[axis]:
        out = (np.roll(f, 2, ax) - 8.0 * np.roll(f, 1, ax)
               + 8.0 * np.roll(f, -1, ax) - np.roll(f, -2, ax))
        return out / (12.0 * h)

    fm = np.moveaxis(f, ax, 0)
    n = fm.shape[0]
    out = np.empty_like(fm, dtype=np.result_type(fm, 1.0))
    out[2:n - 2] = (fm[0:n - 4] - 8.0 * fm[1:n - 3] + 8.0 * fm[3:n - 1] - fm[4:n]) / 12.0
    out[0] = np.tensordot(_LEFT0, fm[0:5], axes=1)
    out[1] = np.tensordot(_LEFT1, fm[0:5], axes=1)
    out[n - 1] = -np.tensordot(_LEFT0, fm[n - 1:n - 6:-1], axes=1)
    out[n - 2] = -np.tensordot(_LEFT1, fm[n - 1:n - 6:-1], axes=1)
    return np.moveaxis(out / h, 0, ax)


def interior_mask(chart: Chart, width: int) -> np.ndarray:
    """Nodes at least ``width`` nodes away from every OPEN boundary."""
    if width < 0:
        raise ValueError("width must be non-negative")
    mask = np.ones(chart.shape, dtype=bool)
    for axis, n in enumerate(chart.shape):
        if chart.periodic[axis] or width == 0:
            continue
        idx = np.arange(n)
        keep = (idx >= width) & (idx <= n - 1 - width)
        shape = [1] * chart.dim
        shape[axis] = n
        mask &= keep.reshape(shape)
    return mask


class SubChart:
    """View of a subset of a chart's axes as an independent derivative operator.

    Used to run spatial geometry on every time level of a spacetime block at
    once: spatial axis ``i`` maps to block axis ``offset + i``.
    """

    def __init__(self, parent: Chart, offset: int, dim: int):
        self.parent = parent
        self.offset = offset
        self.dim = dim
        self.shape = parent.shape
        self.h = max(parent.spacing[offset:offset + dim])

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        return self.parent.d(f, self.offset + axis)

    def grad(self, f: np.ndarray) -> np.ndarray:
        return np.stack([self.d(f, i) for i in range(self.dim)])
