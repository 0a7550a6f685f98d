"""Scalar and vector fields on the periodic unit-cell grid.

Scalars are cell-centered.  Vector data comes in two storage layouts:
cell-centered (one d-vector per cell, used for gradients and diagnostics)
and staggered face storage (normal components on cell faces, used for
velocities so that discrete divergences telescope exactly).
"""

from __future__ import annotations

import numpy as np

BC_PERIODIC = "periodic"
BC_SOLID_NEUMANN = "zero-normal-gradient-at-solid"
BC_SOLID_DIRICHLET = "fixed-value-at-solid"

_VALID_BCS = (BC_PERIODIC, BC_SOLID_NEUMANN, BC_SOLID_DIRICHLET)


class FieldError(ValueError):
    pass


class ScalarField:
    """One value per cell plus boundary-condition metadata.

    ``bc`` selects how discrete operators treat pore/solid faces:
    ``periodic`` ignores the mask entirely (whole-cell fields such as the
    conjugate temperature), ``zero-normal-gradient-at-solid`` mirrors ghost
    values across wall faces, ``fixed-value-at-solid`` holds ``solid_value``
    on the wall.
    """

    def __init__(self, geom, values=None, bc=BC_PERIODIC, solid_value=0.0, units=""):
        if bc not in _VALID_BCS:
            raise FieldError(f"unknown bc {bc!r}; expected one of {_VALID_BCS}")
        self.geom = geom
        if values is None:
            values = np.zeros(geom.shape)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != geom.shape:
                raise FieldError(
                    f"values shape {values.shape} does not match grid {geom.shape}"
                )
            values = values.copy()
        if not np.all(np.isfinite(values)):
            raise FieldError("field contains non-finite entries")
        self.values = values
        self.bc = bc
        self.solid_value = float(solid_value)
        self.units = units

    def copy(self, values=None):
        return ScalarField(
            self.geom,
            self.values if values is None else values,
            bc=self.bc,
            solid_value=self.solid_value,
            units=self.units,
        )

    def check_finite(self, context=""):
        if not np.all(np.isfinite(self.values)):
            where = np.argwhere(~np.isfinite(self.values))[0]
            raise FieldError(f"non-finite value at cell {tuple(where)} {context}")

    def __repr__(self):
        return f"ScalarField(shape={self.values.shape}, bc={self.bc!r}, units={self.units!r})"


class VectorField:
    """Cell-centered vector field: ``components[a]`` has one value per cell."""

    def __init__(self, geom, components=None, bc=BC_PERIODIC):
        self.geom = geom
        self.bc = bc
        if components is None:
            components = [np.zeros(geom.shape) for _ in range(geom.dim)]
        else:
            components = [np.asarray(c, dtype=float).copy() for c in components]
            if len(components) != geom.dim:
                raise FieldError(
                    f"expected {geom.dim} components, got {len(components)}"
                )
            for c in components:
                if c.shape != geom.shape:
                    raise FieldError("component shape does not match grid")
        self.components = components

    def magnitude(self):
        return np.sqrt(sum(c**2 for c in self.components))

    def copy(self):
        return VectorField(self.geom, self.components, bc=self.bc)


class FaceField:
    """Staggered (MAC) vector field: normal components on cell faces.

    ``normal[a][idx]`` lives on the face between cell ``idx`` and its
    periodic neighbor ``idx + e_a``.  Velocities are stored this way; faces
    touching a solid cell carry zero (no-slip/no-penetration).
    """

    def __init__(self, geom, normal=None):
        self.geom = geom
        if normal is None:
            normal = [np.zeros(geom.shape) for _ in range(geom.dim)]
        else:
            normal = [np.asarray(c, dtype=float).copy() for c in normal]
            if len(normal) != geom.dim:
                raise FieldError(f"expected {geom.dim} face arrays, got {len(normal)}")
            for c in normal:
                if c.shape != geom.shape:
                    raise FieldError("face array shape does not match grid")
        self.normal = normal

    def is_zero(self):
        return all(not np.any(c) for c in self.normal)

    def enforce_wall_zero(self):
        """Zero every face touching a solid cell (in place)."""
        solid = self.geom.solid_mask
        for a in range(self.geom.dim):
            wall = solid | np.roll(solid, -1, axis=a)
            self.normal[a][wall] = 0.0

    def max_wall_violation(self):
        solid = self.geom.solid_mask
        worst = 0.0
        for a in range(self.geom.dim):
            wall = solid | np.roll(solid, -1, axis=a)
            if wall.any():
                worst = max(worst, float(np.abs(self.normal[a][wall]).max()))
        return worst

    def cell_centered(self):
        """Average the two faces of each cell into a VectorField."""
        comps = [
            0.5 * (c + np.roll(c, 1, axis=a)) for a, c in enumerate(self.normal)
        ]
        return VectorField(self.geom, comps)

    def copy(self):
        return FaceField(self.geom, self.normal)
