"""Periodic cell problems and effective tensors.

Four problems are solved on a unit cell: scalar vapor diffusion in the pore
space with zero wall flux, DIFFUSION->tensor D; Stokes with unit body force
per direction -> permeability K; Stokes with the gravity + capillary body
force -> drift vector G; and conjugate scalar conduction over the whole
cell (pore coefficient k(phi), solid coefficient k_S) -> tensor A.  The
conduction solve uses one conservative variable-coefficient problem over Y,
which enforces temperature and flux continuity across the wall by
construction.

Tensor entries are assembled from the same face fluxes the solver uses, so
the discrete tensors inherit the symmetry of the underlying bilinear form
and reproduce laminate harmonic/arithmetic means exactly on aligned
stripes.
"""

from __future__ import annotations

import numpy as np

from .fields import BC_PERIODIC, BC_SOLID_NEUMANN, ScalarField
from .linsolve import LinearSystem, solve_linear
from .operators import face_coefficients, laplacian
from .stokes import capillary_stress_divergence, solve_stokes

COEFF_FLOOR = 1e-6


class EffectiveTensors:
    """Effective matrices with provenance.

    ``D`` vapor diffusion, ``K`` permeability, ``G`` body-force drift,
    ``A`` heat conduction; any of them may be None if the corresponding
    cell problem was not run.
    """

    def __init__(self, dim, geometry_hash=""):
        self.dim = dim
        self.D = None
        self.K = None
        self.G = None
        self.A = None
        self.geometry_hash = geometry_hash
        self.corrector_residuals = {}
        self.asymmetry = {}

    def __repr__(self):
        parts = [f"{n}={'set' if getattr(self, n) is not None else '-'}" for n in "DKGA"]
        return f"EffectiveTensors({', '.join(parts)}, hash={self.geometry_hash})"


class CorrectorSet:
    """Cell-problem solutions: scalar correctors, velocities, pressures."""

    def __init__(self):
        self.diff_corrector = []    # d scalar fields (zero mean over P)
        self.w = []                 # d FaceFields, permeability velocities
        self.pressure = []          # d cell arrays (paper sign, zero mean)
        self.w0 = None              # forcing velocity FaceField
        self.pressure0 = None
        self.conduction = []        # d whole-cell scalar fields (psi in P, eta in S)


def _check_spd(M, name, tol=1e-8):
    sym = 0.5 * (M + M.T)
    asym = np.linalg.norm(M - M.T) / max(np.linalg.norm(M), 1e-300)
    if asym > tol:
        raise ValueError(f"{name} asymmetry {asym:.2e} exceeds {tol:g}")
    eig = np.linalg.eigvalsh(sym)
    if eig.min() <= tol * max(eig.max(), 1e-300) - 1e-300:
        raise ValueError(f"{name} is not positive definite: eigenvalues {eig}")
    return sym, asym


def _voigt_reuss_check(M, coeff, name):
    """harmonic mean <= directional coefficient <= arithmetic mean."""
    c = np.asarray(coeff, dtype=float).ravel()
    arith = c.mean()
    harm = 0.0 if (c <= 0).any() else 1.0 / np.mean(1.0 / c)
    slack = 1e-10 * max(arith, 1.0)
    for i in range(M.shape[0]):
        if not (harm - slack <= M[i, i] <= arith + slack):
            raise ValueError(
                f"{name}[{i},{i}] = {M[i, i]:.6g} violates Voigt-Reuss bounds "
                f"[{harm:.6g}, {arith:.6g}]"
            )
    return harm, arith


def _scalar_cell_solve(geom, coeff, bc, mask, rel_tol=1e-11):
    """Solve div(c (e_j + grad kappa^j)) = 0 for each direction j.

    Returns (correctors, tensor, residuals).  The tensor is assembled from
    face fluxes: M_ij = h^d * sum over axis-i faces of
    c_face * (D_i kappa^j + delta_ij).
    """
    coeff = np.asarray(coeff, dtype=float)
    cf = face_coefficients(coeff, geom, bc=bc)
    d = geom.dim
    correctors, residuals = [], []
    M = np.zeros((d, d))
    diag = sum(
        (cf[a] + np.roll(cf[a], 1, axis=a)) for a in range(d)
    ) / geom.h**2

    for j in range(d):
        rhs = -(cf[j] - np.roll(cf[j], 1, axis=j)) / geom.h
        if mask is not None:
            rhs = np.where(mask, rhs, 0.0)

        def apply(x, _bc=bc):
            xf = ScalarField(geom, x, bc=_bc)
            out = laplacian(xf, coeff).values
            if mask is not None:
                out = np.where(mask, out, 0.0)
            return out

        system = LinearSystem(
            geom, apply, rhs, mask=mask, symmetric=True,
            nullspace="constants", diag=diag,
        )
        kappa, info = solve_linear(system, rel_tol=rel_tol)
        correctors.append(kappa)
        residuals.append(info.residual)
        for i in range(d):
            flux = cf[i] * (np.roll(kappa, -1, axis=i) - kappa) / geom.h
            if i == j:
                flux = flux + cf[i]
            M[i, j] = flux.sum() * geom.cell_volume
    return correctors, M, residuals


def cell_diffusion(geom, phi0, rho_g0, d_gv, rel_tol=1e-11):
    """Vapor-diffusion cell problem; returns (correctors, D, residuals).

    Coefficient ``D_g^v rho_g (1 - phi0)`` on the pore space, floored at
    1e-6 of its maximum for solvability; zero flux on the walls.
    """
    phi = phi0.values if isinstance(phi0, ScalarField) else np.asarray(phi0, dtype=float)
    phi = np.broadcast_to(phi, geom.shape)
    c_raw = d_gv * rho_g0 * (1.0 - np.clip(phi, 0.0, 1.0)) * geom.pore_mask
    cmax = float(c_raw.max())
    if cmax <= 0.0:
        raise ValueError(
            "degenerate cell: vapor diffusion coefficient vanishes everywhere "
            "(all-liquid pore space)"
        )
    coeff = np.where(geom.pore_mask, np.maximum(c_raw, COEFF_FLOOR * cmax), 0.0)
    correctors, D, residuals = _scalar_cell_solve(
        geom, coeff, BC_SOLID_NEUMANN, geom.pore_mask, rel_tol
    )
    _voigt_reuss_check(D, c_raw, "D")
    D_sym, asym = _check_spd(D, "D")
    return correctors, D_sym, {"residuals": residuals, "asymmetry": asym}


def cell_conduction(geom, k0, k_s, rel_tol=1e-11):
    """Conjugate-conduction cell problem; returns (correctors, A, residuals).

    One conservative solve over the whole cell with the piecewise
    coefficient (k0 in the pore space, k_s in the solid); harmonic face
    coefficients enforce flux continuity across the wall.
    """
    k0 = np.asarray(k0, dtype=float)
    k0 = np.broadcast_to(k0, geom.shape)
    if (k0 <= 0).any() or k_s <= 0:
        raise ValueError("conductivities must be strictly positive")
    coeff = np.where(geom.pore_mask, k0, float(k_s))
    correctors, A, residuals = _scalar_cell_solve(
        geom, coeff, BC_PERIODIC, None, rel_tol
    )
    _voigt_reuss_check(A, coeff, "A")
    A_sym, asym = _check_spd(A, "A")
    return correctors, A_sym, {"residuals": residuals, "asymmetry": asym}


def _integrate_velocity(geom, w):
    """Pore-volume integral of each velocity component (cell-averaged)."""
    out = np.zeros(geom.dim)
    for a, face in enumerate(w.normal):
        cell = 0.5 * (face + np.roll(face, 1, axis=a))
        out[a] = (cell * geom.pore_mask).sum() * geom.cell_volume
    return out


def cell_permeability(geom, mu0, xi0=None, rho0=None, rel_tol=None):
    """Permeability cell problem; returns (w, pressures, K, info).

    One Stokes solve per direction with unit body force e_j and the mass
    constraint div(rho0 w) = 0.  Refuses all-fluid cells (no wall anchor).
    """
    d = geom.dim
    K = np.zeros((d, d))
    ws, pressures, divres = [], [], []
    for j in range(d):
        force = [np.zeros(geom.shape) for _ in range(d)]
        force[j] = np.ones(geom.shape)
        res = solve_stokes(geom, mu0, xi=xi0, rho=rho0, force=force, require_wall=True)
        ws.append(res.velocity)
        # paper sign convention: (e_j + grad Pi^j) + div tau = 0
        pressures.append(-res.pressure)
        divres.append(res.div_residual)
        K[:, j] = _integrate_velocity(geom, res.velocity)
    asym = np.linalg.norm(K - K.T) / max(np.linalg.norm(K), 1e-300)
    eig = np.linalg.eigvalsh(0.5 * (K + K.T))
    if eig.min() < -1e-10 * max(eig.max(), 1e-300):
        raise ValueError(f"permeability not positive semi-definite: eigenvalues {eig}")
    return ws, pressures, K, {"div_residuals": divres, "asymmetry": asym}


def cell_forcing(geom, phi0, params, drho0_dt=None, rho0=None):
    """Forcing cell problem; returns (w0, pressure0, G, info).

    Body force rho0 g minus the capillary stress divergence of the current
    phase field; the compressibility source d(rho0)/dt defaults to zero.
    """
    phi_field = phi0 if isinstance(phi0, ScalarField) else ScalarField(
        geom, np.broadcast_to(np.asarray(phi0, dtype=float), geom.shape),
        bc=BC_SOLID_NEUMANN,
    )
    if rho0 is None:
        from .constitutive import mixture

        rho0 = mixture(phi_field.values, params).rho
    g_vec = params.gravity_vector(geom.dim)
    cap = capillary_stress_divergence(phi_field, params.lam, params.sigma)
    force = [rho0 * g_vec[a] - cap[a] for a in range(geom.dim)]
    g_src = None
    if drho0_dt is not None:
        g_src = np.asarray(drho0_dt, dtype=float)
        total = (g_src * geom.pore_mask).sum() * geom.cell_volume
        if abs(total) > 1e-10 * max(np.abs(g_src).max(), 1.0):
            raise ValueError(
                f"compressibility source must integrate to zero over P, got {total:g}"
            )
    res = solve_stokes(geom, mu=mixture_mu(phi_field.values, params),
                       xi=mixture_xi(phi_field.values, params),
                       rho=rho0, force=force, g_src=g_src, require_wall=True)
    G = _integrate_velocity(geom, res.velocity)
    return res.velocity, res.pressure, G, {
        "div_residual": res.div_residual,
        "force_projected": res.force_projected,
    }


def mixture_mu(phi, params):
    p = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    return p * params.mu_l + (1.0 - p) * params.mu_g


def mixture_xi(phi, params):
    p = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    return p * params.xi_l + (1.0 - p) * params.xi_g


def compute_effective_tensors(geom, phi0, params, rho_g0=None, with_flow=True,
                              drho0_dt=None):
    """Solve the requested cell problems and bundle the tensors."""
    phi = phi0.values if isinstance(phi0, ScalarField) else np.asarray(phi0, dtype=float)
    phi = np.broadcast_to(phi, geom.shape)
    rho_g0 = params.rho_g if rho_g0 is None else rho_g0
    tensors = EffectiveTensors(geom.dim, geometry_hash=geom.content_hash())
    correctors = CorrectorSet()

    kd, D, dinfo = cell_diffusion(geom, phi, rho_g0, params.d_gv)
    correctors.diff_corrector = kd
    tensors.D = D
    tensors.corrector_residuals["diffusion"] = dinfo["residuals"]
    tensors.asymmetry["D"] = dinfo["asymmetry"]

    from .constitutive import mixture

    k0 = mixture(phi, params).k
    kc, A, ainfo = cell_conduction(geom, k0, params.k_s)
    correctors.conduction = kc
    tensors.A = A
    tensors.corrector_residuals["conduction"] = ainfo["residuals"]
    tensors.asymmetry["A"] = ainfo["asymmetry"]

    if with_flow:
        rho0 = mixture(phi, params).rho
        ws, prs, K, kinfo = cell_permeability(
            geom, mixture_mu(phi, params), mixture_xi(phi, params), rho0
        )
        correctors.w = ws
        correctors.pressure = prs
        tensors.K = K
        tensors.corrector_residuals["permeability"] = kinfo["div_residuals"]
        tensors.asymmetry["K"] = kinfo["asymmetry"]

        w0, p0, G, ginfo = cell_forcing(geom, phi, params, drho0_dt=drho0_dt, rho0=rho0)
        correctors.w0 = w0
        correctors.pressure0 = p0
        tensors.G = G
        tensors.corrector_residuals["forcing"] = [ginfo["div_residual"]]
    return tensors, correctors
