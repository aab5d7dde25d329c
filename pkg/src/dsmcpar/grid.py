"""Cell grid and wall geometry shared by both kernel backends."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

OPEN = 0
SPECULAR = 1
DIFFUSE = 2

SURFACE_KINDS = {"open": OPEN, "specular": SPECULAR, "diffuse": DIFFUSE}
FACE_NAMES = ("x_lo", "x_hi", "y_lo", "y_hi")


@dataclass(frozen=True)
class CellGrid:
    """Uniform Cartesian grid over ``[lo, hi]`` in one or two dimensions.

    Cells are half-open ``[edge_k, edge_k+1)``; a position exactly on an
    interior edge belongs to the higher-index cell and the upper domain
    face belongs to the last cell.  Reduced dimensions have unit depth.
    """

    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        if not 1 <= len(self.counts) <= 2:
            raise ConfigError("only 1-D and 2-D grids are supported")
        if not len(self.lo) == len(self.hi) == len(self.counts):
            raise ConfigError("lo, hi and counts must have one entry per axis")
        for a, c in enumerate(self.counts):
            if int(c) < 1:
                raise ConfigError(f"cell count on axis {a} must be >= 1, got {c}")
            if not self.hi[a] > self.lo[a]:
                raise ConfigError(f"extent on axis {a} must be positive")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi, float) - np.asarray(self.lo, float)) / np.asarray(self.counts, float)

    @property
    def nx(self) -> int:
        return int(self.counts[0])

    @property
    def ny(self) -> int:
        return int(self.counts[1]) if self.dim == 2 else 1

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def lo2(self) -> np.ndarray:
        out = np.zeros(2)
        out[: self.dim] = self.lo
        return out

    def hi2(self) -> np.ndarray:
        out = np.ones(2)
        out[: self.dim] = self.hi
        return out

    def dx2(self) -> np.ndarray:
        out = np.ones(2)
        out[: self.dim] = self.spacing
        return out

    def cell_of(self, pos: np.ndarray) -> np.ndarray:
        """Cell id (``iy * nx + ix``) of each row of ``pos``; no range checks."""
        pos = np.atleast_2d(pos)
        ix = np.floor((pos[:, 0] - self.lo[0]) / self.spacing[0]).astype(np.int64)
        ix = np.minimum(ix, self.nx - 1)
        if self.dim == 1:
            return ix
        iy = np.floor((pos[:, 1] - self.lo[1]) / self.spacing[1]).astype(np.int64)
        iy = np.minimum(iy, self.ny - 1)
        return iy * self.nx + ix

    def cell_centers(self) -> np.ndarray:
        dx = self.spacing
        xs = self.lo[0] + (np.arange(self.nx) + 0.5) * dx[0]
        if self.dim == 1:
            return xs[:, None]
        ys = self.lo[1] + (np.arange(self.ny) + 0.5) * dx[1]
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class Body:
    """Axis-aligned rectangular obstacle (2-D only)."""

    lo: tuple
    hi: tuple
    kind: int = SPECULAR
    temperature: float = 1.0

    def contains(self, pos: np.ndarray) -> np.ndarray:
        pos = np.atleast_2d(pos)
        return (
            (pos[:, 0] > self.lo[0]) & (pos[:, 0] < self.hi[0])
            & (pos[:, 1] > self.lo[1]) & (pos[:, 1] < self.hi[1])
        )


@dataclass(frozen=True)
class Geometry:
    """Wall behaviour of the domain faces and the optional body.

    Faces are ordered ``x_lo, x_hi, y_lo, y_hi``; the y faces are unused on
    1-D grids.
    """

    grid: CellGrid
    face_kind: tuple = (SPECULAR, SPECULAR, SPECULAR, SPECULAR)
    face_temp: tuple = (1.0, 1.0, 1.0, 1.0)
    body: Body | None = None
    _packed: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.body is not None and self.grid.dim != 2:
            raise ConfigError("a body requires a 2-D grid")
        for k, t in zip(self.face_kind, self.face_temp):
            if k == DIFFUSE and not t > 0:
                raise ConfigError("diffuse walls need a positive temperature")
        object.__setattr__(self, "_packed", self._pack())

    def _pack(self) -> dict:
        g = self.grid
        body = np.zeros(4)
        if self.body is not None:
            body[:] = (self.body.lo[0], self.body.hi[0], self.body.lo[1], self.body.hi[1])
        return dict(
            dim=g.dim,
            lo=g.lo2(),
            hi=g.hi2(),
            face_kind=np.asarray(self.face_kind, dtype=np.int32),
            face_temp=np.asarray(self.face_temp, dtype=np.float64),
            has_body=int(self.body is not None),
            body=body,
            body_kind=int(self.body.kind if self.body else SPECULAR),
            body_temp=float(self.body.temperature if self.body else 1.0),
        )

    @property
    def packed(self) -> dict:
        return self._packed

    @property
    def closed(self) -> bool:
        return all(k != OPEN for k in self.face_kind[: 2 * self.grid.dim])

    def cell_volumes(self) -> np.ndarray:
        """Gas volume of every cell, excluding any overlap with the body."""
        g = self.grid
        vol = np.full(g.n_cells, g.cell_volume)
        if self.body is None:
            return vol
        dx = g.spacing
        x0 = g.lo[0] + np.arange(g.nx) * dx[0]
        y0 = g.lo[1] + np.arange(g.ny) * dx[1]
        ox = np.clip(np.minimum(x0 + dx[0], self.body.hi[0]) - np.maximum(x0, self.body.lo[0]), 0, None)
        oy = np.clip(np.minimum(y0 + dx[1], self.body.hi[1]) - np.maximum(y0, self.body.lo[1]), 0, None)
        overlap = np.outer(oy, ox).ravel()
        return np.maximum(vol - overlap, 0.0)
