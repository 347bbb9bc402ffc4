"""Uniform cell-centered grid on a rectangle with DOOR/WALL boundary faces.

Cell fields are arrays of shape (nx, ny) indexed [i, j] with cell center
((i + 1/2) hx, (j + 1/2) hy).  x-faces have shape (nx + 1, ny) and sit at
x = i hx; y-faces have shape (nx, ny + 1) and sit at y = j hy.  Flat cell
index is i * ny + j (C order).
"""

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError


class FaceTag(enum.Enum):
    DOOR = "door"
    WALL = "wall"


SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class DoorSegment:
    side: str
    start: float
    end: float


class FaceField(NamedTuple):
    x: np.ndarray  # (nx + 1, ny)
    y: np.ndarray  # (nx, ny + 1)


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    lx: float
    ly: float
    door_left: np.ndarray = field(repr=False)
    door_right: np.ndarray = field(repr=False)
    door_bottom: np.ndarray = field(repr=False)
    door_top: np.ndarray = field(repr=False)

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.hy

    def cell_centers(self):
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def xface_centers(self):
        return np.meshgrid(np.arange(self.nx + 1) * self.hx, self.yc, indexing="ij")

    def yface_centers(self):
        return np.meshgrid(self.xc, np.arange(self.ny + 1) * self.hy, indexing="ij")

    def door_mask(self, side):
        return getattr(self, f"door_{side}")

    def boundary_faces(self):
        """List of (side, k, FaceTag) for all 2 (nx + ny) boundary faces."""
        out = []
        for side in SIDES:
            for k, is_door in enumerate(self.door_mask(side)):
                out.append((side, k, FaceTag.DOOR if is_door else FaceTag.WALL))
        return out

    def door_counts(self):
        """Per-cell number of adjacent DOOR faces normal to x and to y."""
        cx = np.zeros(self.shape)
        cy = np.zeros(self.shape)
        cx[0, :] += self.door_left
        cx[-1, :] += self.door_right
        cy[:, 0] += self.door_bottom
        cy[:, -1] += self.door_top
        return cx, cy

    def door_length(self):
        return self.hy * (self.door_left.sum() + self.door_right.sum()) + self.hx * (
            self.door_bottom.sum() + self.door_top.sum()
        )

    # index helpers -------------------------------------------------------

    def cell_index(self, i, j):
        return i * self.ny + j

    def cell_ij(self, k):
        return divmod(k, self.ny)

    def xface_index(self, i, j):
        return i * self.ny + j

    def xface_ij(self, k):
        return divmod(k, self.ny)

    def yface_index(self, i, j):
        return i * (self.ny + 1) + j

    def yface_ij(self, k):
        return divmod(k, self.ny + 1)

    def mirrored(self, axis):
        """Grid reflected about the midline normal to ``axis`` ("x" or "y")."""
        if axis == "x":
            return Grid(self.nx, self.ny, self.lx, self.ly, self.door_right, self.door_left,
                        self.door_bottom[::-1].copy(), self.door_top[::-1].copy())
        return Grid(self.nx, self.ny, self.lx, self.ly, self.door_left[::-1].copy(),
                    self.door_right[::-1].copy(), self.door_top, self.door_bottom)


def build_grid(nx, ny, lx, ly, doors, require_door=True):
    """Tag boundary faces whose centers fall inside a door interval.

    ``doors`` is an iterable of DoorSegment (or (side, start, end) tuples);
    intervals are measured along the side (x for bottom/top, y for left/right).
    ``require_door=False`` admits closed boxes for density-only use.
    """
    errors = []
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        errors.append(f"geometry: nx, ny must be integers >= 2, got nx={nx}, ny={ny}")
    if not (lx > 0 and ly > 0):
        errors.append(f"geometry: lx, ly must be positive, got lx={lx}, ly={ly}")
    if errors:
        raise ConfigError(errors)
    nx, ny = int(nx), int(ny)
    segs = [d if isinstance(d, DoorSegment) else DoorSegment(*d) for d in doors]
    masks = {
        "left": np.zeros(ny, bool),
        "right": np.zeros(ny, bool),
        "bottom": np.zeros(nx, bool),
        "top": np.zeros(nx, bool),
    }
    centers = {
        "left": (np.arange(ny) + 0.5) * ly / ny,
        "right": (np.arange(ny) + 0.5) * ly / ny,
        "bottom": (np.arange(nx) + 0.5) * lx / nx,
        "top": (np.arange(nx) + 0.5) * lx / nx,
    }
    for k, d in enumerate(segs):
        if d.side not in SIDES:
            errors.append(f"geometry.doors[{k}].side: unknown side {d.side!r}")
            continue
        if not d.start < d.end:
            errors.append(f"geometry.doors[{k}]: start must be < end")
            continue
        length = ly if d.side in ("left", "right") else lx
        if d.start < 0 or d.end > length:
            errors.append(f"geometry.doors[{k}]: interval [{d.start}, {d.end}] leaves the "
                          f"{d.side} wall [0, {length}]")
            continue
        c = centers[d.side]
        masks[d.side] |= (c >= d.start) & (c <= d.end)
    for side in SIDES:
        on_side = sorted((d.start, d.end) for d in segs if d.side == side)
        for (a0, a1), (b0, b1) in zip(on_side, on_side[1:]):
            if b0 < a1:
                errors.append(f"geometry.doors: overlapping intervals on side {side!r}")
    if require_door and not errors and not any(m.any() for m in masks.values()):
        errors.append("geometry.doors: at least one boundary face must be a door "
                      "(the exit part of the boundary needs positive length)")
    if errors:
        raise ConfigError(errors)
    return Grid(nx, ny, float(lx), float(ly), masks["left"], masks["right"], masks["bottom"], masks["top"])


def integrate_cell_field(f, g):
    """Midpoint-rule integral over the domain."""
    return float(np.sum(f) * g.hx * g.hy)


# ---------------------------------------------------------------------------
# sparse operators
# ---------------------------------------------------------------------------


def neumann_laplacian(g):
    """5-point -Laplacian with zero-flux rows on every boundary face (n_cells square)."""
    n = g.n_cells
    idx = np.arange(n).reshape(g.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(g.shape)
    cx, cy = 1.0 / g.hx**2, 1.0 / g.hy**2
    a, b = idx[:-1, :].ravel(), idx[1:, :].ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [np.full(a.size, -cx)] * 2
    diag[:-1, :] += cx
    diag[1:, :] += cx
    a, b = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [np.full(a.size, -cy)] * 2
    diag[:, :-1] += cy
    diag[:, 1:] += cy
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def ghost_padding(g):
    """Sparse map from cell values to the (nx + 2, ny + 2) ghost-padded array.

    Ghosts mirror the adjacent cell: -1 (value 0 on the face) at doors, +1
    (zero normal derivative) at walls.  Corner ghosts are zero and unused.
    """
    nx, ny = g.shape
    pad = np.arange((nx + 2) * (ny + 2)).reshape(nx + 2, ny + 2)
    cell = np.arange(nx * ny).reshape(nx, ny)
    rows = [pad[1:-1, 1:-1].ravel()]
    cols = [cell.ravel()]
    vals = [np.ones(nx * ny)]
    for prow, crow, mask in (
        (pad[0, 1:-1], cell[0, :], g.door_left),
        (pad[-1, 1:-1], cell[-1, :], g.door_right),
        (pad[1:-1, 0], cell[:, 0], g.door_bottom),
        (pad[1:-1, -1], cell[:, -1], g.door_top),
    ):
        rows.append(prow)
        cols.append(crow)
        vals.append(np.where(mask, -1.0, 1.0))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=((nx + 2) * (ny + 2), nx * ny),
    )
