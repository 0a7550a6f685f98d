"""Quasi-static Stokes solves on a 2D staggered (MAC) grid.

Solves  -div( mu (grad w + grad w^T) + xi (div w) I ) + grad q = F  with the
mass constraint  div(rho w) = g_src,  no-slip on pore/solid walls and
periodicity across the cell boundary.  Velocities live on faces, pressure at
cell centers; variable viscosity uses cell values for the normal stresses
and pore-harmonic corner values for the shear stress.  Tangential no-slip is
enforced to second order by mirror ghosts across wall faces.

The saddle-point system is assembled sparse and solved with a direct
factorization; pressure (and, in an all-fluid cell, the velocity means) are
pinned through Lagrange multipliers.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .fields import BC_SOLID_NEUMANN, FaceField, ScalarField
from .linsolve import SolverError
from .operators import gradient


class StokesResult:
    def __init__(self, velocity, pressure, div_residual, force_projected, meta=None):
        self.velocity = velocity          # FaceField
        self.pressure = pressure          # cell array, zero mean over pore
        self.div_residual = div_residual  # max |div(rho w) - g_src|
        self.force_projected = force_projected
        self.meta = meta or {}


def capillary_stress_divergence(phi: ScalarField, lam, sigma):
    """Cell-centered divergence of the capillary stress lam*sigma grad phi (x) grad phi."""
    geom = phi.geom
    g = gradient(phi).components
    force = []
    for a in range(geom.dim):
        div = np.zeros(geom.shape)
        for b in range(geom.dim):
            tab = lam * sigma * g[a] * g[b]
            div += (np.roll(tab, -1, axis=b) - np.roll(tab, 1, axis=b)) / (2 * geom.h)
        force.append(div)
    return force


def solve_stokes(geom, mu, xi=None, rho=None, force=None, g_src=None,
                 require_wall=False):
    """Solve the saddle-point problem; returns a :class:`StokesResult`.

    Parameters
    ----------
    mu, xi : cell arrays (xi defaults to 0)
    rho : cell array entering the mass constraint div(rho w) = g_src;
        defaults to 1 (plain incompressibility).
    force : pair of cell-centered force component arrays.
    g_src : cell array, right-hand side of the mass constraint.
    require_wall : refuse all-fluid geometries (used by the permeability
        cell problem, which needs the no-slip anchor).
    """
    if geom.dim != 2:
        raise NotImplementedError(
            "staggered Stokes solves are implemented for dim=2 only"
        )
    if not geom.pore_mask.any():
        raise ValueError("all-solid geometry: no fluid region to solve on")
    has_wall = bool(geom.solid_mask.any())
    if require_wall and not has_wall:
        raise ValueError(
            "all-fluid geometry refused: the no-slip anchor on the "
            "pore/solid wall is required for a well-posed permeability solve"
        )
    n = geom.resolution
    h = geom.h
    ncell = n * n
    mu = np.broadcast_to(np.asarray(mu, dtype=float), geom.shape)
    xi = np.zeros(geom.shape) if xi is None else np.broadcast_to(np.asarray(xi, dtype=float), geom.shape)
    rho = np.ones(geom.shape) if rho is None else np.broadcast_to(np.asarray(rho, dtype=float), geom.shape)
    if force is None:
        force = [np.zeros(geom.shape), np.zeros(geom.shape)]
    fx = np.broadcast_to(np.asarray(force[0], dtype=float), geom.shape).copy()
    fy = np.broadcast_to(np.asarray(force[1], dtype=float), geom.shape).copy()
    g_src = np.zeros(geom.shape) if g_src is None else np.asarray(g_src, dtype=float)

    pore = geom.pore_mask
    solid = geom.solid_mask

    force_projected = False
    if not has_wall:
        # Without walls a uniform body force has no periodic pressure
        # potential; remove the mean so the system stays consistent.
        mfx, mfy = fx.mean(), fy.mean()
        if abs(mfx) > 0 or abs(mfy) > 0:
            fx -= mfx
            fy -= mfy
            force_projected = bool(abs(mfx) > 1e-300 or abs(mfy) > 1e-300)

    def roll2(arr, di, dj):
        return np.roll(np.roll(arr, -di, axis=0), -dj, axis=1)

    idx = np.arange(ncell).reshape(n, n)

    def sh(di, dj):
        return roll2(idx, di, dj)

    # dof layout: u | v | p | multipliers
    U0, V0, P0 = 0, ncell, 2 * ncell
    nmult = 1 + (2 if not has_wall else 0)
    ndof = 3 * ncell + nmult

    u_active = pore & roll2(pore, 1, 0)          # face (i,j)-(i+1,j)
    v_active = pore & roll2(pore, 0, 1)          # face (i,j)-(i,j+1)
    u_interior_solid = solid & roll2(solid, 1, 0)
    v_interior_solid = solid & roll2(solid, 0, 1)

    # corner viscosity: harmonic mean over adjacent pore cells
    def corner_mu():
        cells = [roll2(mu, di, dj) for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1))]
        pores = [roll2(pore, di, dj) for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1))]
        inv_sum = np.zeros(geom.shape)
        count = np.zeros(geom.shape)
        for c, pm in zip(cells, pores):
            inv_sum += np.where(pm, 1.0 / c, 0.0)
            count += pm
        return np.where(count > 0, count / np.where(inv_sum > 0, inv_sum, 1.0), 0.0)

    mu_c = corner_mu()  # corner (i+1/2, j+1/2) indexed by (i,j)

    rows, cols, vals = [], [], []

    def add(r, c, v, mask):
        rows.append(r[mask])
        cols.append(c[mask])
        vals.append(np.broadcast_to(v, r.shape)[mask])

    inv_h2 = 1.0 / h**2

    # ---- x-momentum on active u-faces --------------------------------------
    m = u_active
    r = U0 + idx
    a_E = 2 * roll2(mu, 1, 0) + roll2(xi, 1, 0)
    a_C = 2 * mu + xi
    # -(1/h^2)[aE*(u(i+1,j)-u(i,j)) - aC*(u(i,j)-u(i-1,j))]
    add(r, U0 + sh(1, 0), -inv_h2 * a_E, m)
    add(r, U0 + idx, inv_h2 * (a_E + a_C), m)
    add(r, U0 + sh(-1, 0), -inv_h2 * a_C, m)
    # -(1/h^2)[xiE*(v(i+1,j)-v(i+1,j-1)) - xiC*(v(i,j)-v(i,j-1))]
    add(r, V0 + sh(1, 0), -inv_h2 * roll2(xi, 1, 0), m)
    add(r, V0 + sh(1, -1), inv_h2 * roll2(xi, 1, 0), m)
    add(r, V0 + idx, inv_h2 * xi, m)
    add(r, V0 + sh(0, -1), -inv_h2 * xi, m)
    # corner shear: -(1/h^2)[mu_ne*(u(i,j+1)-u(i,j)+v(i+1,j)-v(i,j))
    #                       - mu_se*(u(i,j)-u(i,j-1)+v(i+1,j-1)-v(i,j-1))]
    mu_ne = mu_c
    mu_se = roll2(mu_c, 0, -1)
    # u(i,j+1): mirror to -u(i,j) where strictly inside solid
    up_mirror = roll2(u_interior_solid, 0, 1)
    add(r, U0 + sh(0, 1), -inv_h2 * mu_ne * (~up_mirror), m)
    add(r, U0 + idx, inv_h2 * mu_ne * up_mirror, m)
    # u(i,j-1): mirror similarly
    dn_mirror = roll2(u_interior_solid, 0, -1)
    add(r, U0 + sh(0, -1), -inv_h2 * mu_se * (~dn_mirror), m)
    add(r, U0 + idx, inv_h2 * mu_se * dn_mirror, m)
    add(r, U0 + idx, inv_h2 * (mu_ne + mu_se), m)
    add(r, V0 + sh(1, 0), -inv_h2 * mu_ne, m)
    add(r, V0 + idx, inv_h2 * mu_ne, m)
    add(r, V0 + sh(1, -1), inv_h2 * mu_se, m)
    add(r, V0 + sh(0, -1), -inv_h2 * mu_se, m)
    # pressure gradient
    add(r, P0 + sh(1, 0), 1.0 / h, m)
    add(r, P0 + idx, -1.0 / h, m)

    # ---- y-momentum on active v-faces --------------------------------------
    m = v_active
    r = V0 + idx
    a_N = 2 * roll2(mu, 0, 1) + roll2(xi, 0, 1)
    a_C = 2 * mu + xi
    add(r, V0 + sh(0, 1), -inv_h2 * a_N, m)
    add(r, V0 + idx, inv_h2 * (a_N + a_C), m)
    add(r, V0 + sh(0, -1), -inv_h2 * a_C, m)
    add(r, U0 + sh(0, 1), -inv_h2 * roll2(xi, 0, 1), m)
    add(r, U0 + sh(-1, 1), inv_h2 * roll2(xi, 0, 1), m)
    add(r, U0 + idx, inv_h2 * xi, m)
    add(r, U0 + sh(-1, 0), -inv_h2 * xi, m)
    # corner shear: -(1/h^2)[mu_ne*(v(i+1,j)-v(i,j)+u(i,j+1)-u(i,j))
    #                       - mu_nw*(v(i,j)-v(i-1,j)+u(i-1,j+1)-u(i-1,j))]
    mu_ne = mu_c
    mu_nw = roll2(mu_c, -1, 0)
    rt_mirror = roll2(v_interior_solid, 1, 0)
    add(r, V0 + sh(1, 0), -inv_h2 * mu_ne * (~rt_mirror), m)
    add(r, V0 + idx, inv_h2 * mu_ne * rt_mirror, m)
    lf_mirror = roll2(v_interior_solid, -1, 0)
    add(r, V0 + sh(-1, 0), -inv_h2 * mu_nw * (~lf_mirror), m)
    add(r, V0 + idx, inv_h2 * mu_nw * lf_mirror, m)
    add(r, V0 + idx, inv_h2 * (mu_ne + mu_nw), m)
    add(r, U0 + sh(0, 1), -inv_h2 * mu_ne, m)
    add(r, U0 + idx, inv_h2 * mu_ne, m)
    add(r, U0 + sh(-1, 1), inv_h2 * mu_nw, m)
    add(r, U0 + sh(-1, 0), -inv_h2 * mu_nw, m)
    add(r, P0 + sh(0, 1), 1.0 / h, m)
    add(r, P0 + idx, -1.0 / h, m)

    # ---- continuity at pore cells ------------------------------------------
    m = pore
    r = P0 + idx
    rho_e = 0.5 * (rho + roll2(rho, 1, 0))
    rho_w = roll2(rho_e, -1, 0)
    rho_n = 0.5 * (rho + roll2(rho, 0, 1))
    rho_s = roll2(rho_n, 0, -1)
    add(r, U0 + idx, rho_e / h, m)
    add(r, U0 + sh(-1, 0), -rho_w / h, m)
    add(r, V0 + idx, rho_n / h, m)
    add(r, V0 + sh(0, -1), -rho_s / h, m)
    # pressure-mean multiplier enters continuity rows
    add(r, np.full_like(idx, 3 * ncell), np.ones(geom.shape), m)

    # ---- pinned dofs (identity rows) ----------------------------------------
    for base, active in ((U0, u_active), (V0, v_active), (P0, pore)):
        mm = ~active
        add(base + idx, base + idx, np.ones(geom.shape), mm)

    rows = [np.asarray(a).ravel() for a in rows]
    cols = [np.asarray(a).ravel() for a in cols]
    vals = [np.asarray(a).ravel() for a in vals]

    # ---- multiplier rows -----------------------------------------------------
    extra_r, extra_c, extra_v = [], [], []
    # mean pressure over pore cells = 0
    pc = (P0 + idx)[pore].ravel()
    extra_r.append(np.full(pc.size, 3 * ncell))
    extra_c.append(pc)
    extra_v.append(np.full(pc.size, h * h))
    if not has_wall:
        # pin mean velocity; multipliers feed back into momentum rows
        for k, (base, active) in enumerate(((U0, u_active), (V0, v_active))):
            mrow = 3 * ncell + 1 + k
            fc = (base + idx)[active].ravel()
            extra_r.append(np.full(fc.size, mrow))
            extra_c.append(fc)
            extra_v.append(np.full(fc.size, h * h))
            extra_r.append(fc)
            extra_c.append(np.full(fc.size, mrow))
            extra_v.append(np.full(fc.size, 1.0))

    rows = np.concatenate(rows + extra_r)
    cols = np.concatenate(cols + extra_c)
    vals = np.concatenate(vals + extra_v)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(ndof, ndof))

    rhs = np.zeros(ndof)
    fx_face = 0.5 * (fx + roll2(fx, 1, 0))
    fy_face = 0.5 * (fy + roll2(fy, 0, 1))
    rhs[U0:V0][u_active.ravel()] = fx_face[u_active]
    rhs[V0:P0][v_active.ravel()] = fy_face[v_active]
    rhs[P0:3 * ncell][pore.ravel()] = g_src[pore]

    try:
        x = spsolve(A.tocsc(), rhs)
    except Exception as exc:  # pragma: no cover - factorization failure
        raise SolverError(f"Stokes factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("Stokes solve produced non-finite values")

    u = x[U0:V0].reshape(n, n)
    v = x[V0:P0].reshape(n, n)
    p = x[P0:3 * ncell].reshape(n, n)
    w = FaceField(geom, [u, v])
    w.enforce_wall_zero()

    div = (rho_e * u - rho_w * np.roll(u, 1, axis=0)) / h + (
        rho_n * v - rho_s * np.roll(v, 1, axis=1)
    ) / h
    div_res = float(np.abs((div - g_src)[pore]).max()) if pore.any() else 0.0
    return StokesResult(
        w,
        p,
        div_res,
        force_projected,
        meta={"multipliers": x[3 * ncell :].tolist()},
    )
