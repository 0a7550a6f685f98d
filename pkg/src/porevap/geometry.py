"""Periodic unit-cell geometry with solid masking.

The unit cell is Y = [0,1]^d discretized into ``resolution`` cubic cells per
axis.  Each cell is either pore (fluid) or solid.  The pore region must be
edge-connected under periodic wrapping; the faces separating pore from solid
cells form the internal boundary on which wall conditions (no-slip, zero
flux) are applied.
"""

from __future__ import annotations

import hashlib

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid geometry descriptors or disconnected pore space."""


class UnitCellGeometry:
    """Uniform periodic grid over the unit cell with an immutable solid mask.

    Parameters
    ----------
    resolution : int
        Cells per axis (>= 8 for pore geometries; smaller grids are only
        used internally by coarse macro domains).
    solid_mask : ndarray of bool, optional
        True marks solid cells.  Defaults to all-pore.
    dim : int
        Spatial dimension, 1, 2 or 3.  Homogenization cell problems require
        2 or 3; dim=1 exists for profile-relaxation and planar experiments.
    """

    def __init__(self, resolution, solid_mask=None, dim=2, check_connectivity=True):
        resolution = int(resolution)
        if resolution < 2:
            raise GeometryError(f"resolution must be >= 2, got {resolution}")
        if dim not in (1, 2, 3):
            raise GeometryError(f"dim must be 1, 2 or 3, got {dim}")
        self.dim = dim
        self.resolution = resolution
        self.shape = (resolution,) * dim
        self.h = 1.0 / resolution
        self.cell_volume = self.h**dim
        if solid_mask is None:
            solid_mask = np.zeros(self.shape, dtype=bool)
        else:
            solid_mask = np.asarray(solid_mask, dtype=bool)
            if solid_mask.shape != self.shape:
                raise GeometryError(
                    f"solid_mask shape {solid_mask.shape} does not match grid {self.shape}"
                )
        solid_mask = solid_mask.copy()
        solid_mask.setflags(write=False)
        self.solid_mask = solid_mask
        self.pore_mask = ~solid_mask
        self.pore_mask.setflags(write=False)
        if not self.pore_mask.any():
            raise GeometryError("pore region is empty (all-solid cell)")
        if check_connectivity and solid_mask.any():
            ncomp = self._pore_component_count()
            if ncomp > 1:
                raise GeometryError(
                    f"pore space is disconnected: {ncomp} components under periodic wrapping"
                )

    # -- derived quantities ------------------------------------------------

    @property
    def porosity(self):
        return float(self.pore_mask.sum()) / self.pore_mask.size

    def cell_centers(self, axis):
        """1D array of cell-center coordinates along ``axis``."""
        return (np.arange(self.resolution) + 0.5) * self.h

    def meshgrid(self):
        axes = [self.cell_centers(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def interface_faces(self):
        """Per-axis boolean arrays marking pore/solid faces.

        ``faces[a][idx]`` is the face between cell ``idx`` and its periodic
        neighbor ``idx + e_a``; True where exactly one side is solid.
        """
        out = []
        for a in range(self.dim):
            nbr = np.roll(self.solid_mask, -1, axis=a)
            out.append(self.solid_mask ^ nbr)
        return out

    def interface_face_count(self):
        return int(sum(f.sum() for f in self.interface_faces()))

    def content_hash(self):
        """Stable hash of the mask and resolution, for tensor provenance."""
        m = hashlib.sha256()
        m.update(f"dim={self.dim};n={self.resolution};".encode())
        m.update(np.packbits(self.solid_mask.ravel()).tobytes())
        return m.hexdigest()[:16]

    # -- connectivity ------------------------------------------------------

    def _pore_component_count(self):
        pore = self.pore_mask
        remaining = pore.copy()
        count = 0
        while remaining.any():
            count += 1
            seed = np.zeros(self.shape, dtype=bool)
            seed[np.unravel_index(np.argmax(remaining), self.shape)] = True
            comp = seed
            while True:
                grown = comp.copy()
                for a in range(self.dim):
                    grown |= np.roll(comp, 1, axis=a)
                    grown |= np.roll(comp, -1, axis=a)
                grown &= remaining
                if grown.sum() == comp.sum():
                    break
                comp = grown
            remaining &= ~comp
        return count


# -- geometry builders -----------------------------------------------------


def build_geometry(spec, resolution, dim=2):
    """Construct a :class:`UnitCellGeometry` from a descriptor.

    ``spec`` is either a string kind or a dict ``{"kind": ..., ...}`` with
    kind one of ``no-solid``, ``centered-disk``, ``stripes``, ``channel``,
    ``raster-image``.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    n = int(resolution)
    if kind == "no-solid":
        mask = None
    elif kind == "centered-disk":
        r = float(spec.get("radius", 0.25))
        if not 0 < r < 0.5:
            raise GeometryError(f"disk radius must lie in (0, 0.5), got {r}")
        mask = _centered_ball_mask(n, dim, r)
    elif kind == "stripes":
        axis = int(spec.get("axis", 0))
        frac = float(spec.get("solid_fraction", 0.5))
        if not 0 < frac < 1:
            raise GeometryError(f"solid_fraction must lie in (0,1), got {frac}")
        mask = _stripes_mask(n, dim, axis, frac)
    elif kind == "channel":
        width = float(spec.get("width", 0.5))
        axis = int(spec.get("axis", 0))
        if not 0 < width < 1:
            raise GeometryError(f"channel width must lie in (0,1), got {width}")
        mask = _channel_mask(n, dim, axis, width)
    elif kind == "raster-image":
        mask = load_pgm_mask(spec["path"])
        if mask.shape != (n,) * mask.ndim:
            n = mask.shape[0]
        dim = mask.ndim
    else:
        raise GeometryError(f"unknown geometry kind: {kind!r}")
    return UnitCellGeometry(n, solid_mask=mask, dim=dim)


def _centered_ball_mask(n, dim, r):
    h = 1.0 / n
    axes = [(np.arange(n) + 0.5) * h - 0.5 for _ in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum(g**2 for g in grids)
    return r2 <= r**2


def _stripes_mask(n, dim, axis, solid_fraction):
    # Solid slab occupies the trailing fraction of the axis so that the
    # pore slab starts at coordinate 0.
    n_solid = int(round(solid_fraction * n))
    line = np.zeros(n, dtype=bool)
    line[n - n_solid :] = True
    shape = [1] * dim
    shape[axis] = n
    return np.broadcast_to(line.reshape(shape), (n,) * dim).copy()


def _channel_mask(n, dim, axis, width):
    """Open channel of ``width`` along ``axis``; solid slabs elsewhere.

    The channel is bounded in the last transverse axis and centered.
    """
    if dim < 2:
        raise GeometryError("channel geometry requires dim >= 2")
    trans = dim - 1 if axis != dim - 1 else dim - 2
    n_open = int(round(width * n))
    lo = (n - n_open) // 2
    line = np.ones(n, dtype=bool)
    line[lo : lo + n_open] = False
    shape = [1] * dim
    shape[trans] = n
    return np.broadcast_to(line.reshape(shape), (n,) * dim).copy()


# -- raster import (plain PGM, P2) ------------------------------------------


def load_pgm_mask(path):
    """Read a plain-text PGM (P2): 0 = solid, 255 = pore, others rejected."""
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    tokens = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise GeometryError("raster import supports plain PGM (magic 'P2') only")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        pixels = np.array([int(t) for t in tokens[4:]], dtype=int)
    except (IndexError, ValueError) as exc:
        raise GeometryError(f"malformed PGM header or payload: {exc}") from exc
    if maxval != 255:
        raise GeometryError(f"PGM maxval must be 255, got {maxval}")
    if pixels.size != width * height:
        raise GeometryError(
            f"PGM payload has {pixels.size} pixels, expected {width * height}"
        )
    bad = ~np.isin(pixels, (0, 255))
    if bad.any():
        raise GeometryError(
            f"PGM contains {int(bad.sum())} pixel(s) not in {{0, 255}}"
        )
    if width != height:
        raise GeometryError("raster geometry must be square")
    img = pixels.reshape(height, width)
    # Row-major image rows map to the second grid axis: flip so that row 0
    # is the top of the image at y=1.
    return (img[::-1, :].T == 0).copy()
