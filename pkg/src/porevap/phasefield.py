"""Allen-Cahn phase-field dynamics with evaporation reaction.

One semi-implicit step treats the interfacial diffusion implicitly and the
double-well derivative, reaction and advection explicitly; the mixture
density multiplying the material derivative is lagged one step.  The module
also provides the analytic tanh equilibrium profile and the inner-units
gradient-energy integral used by the verification experiments.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .constitutive import double_well, evaporation_rate, mixture
from .fields import BC_SOLID_NEUMANN, FaceField, ScalarField
from .linsolve import LinearSystem, solve_linear
from .operators import laplacian, upwind_advection

SQRT2 = math.sqrt(2.0)


class PhaseFieldState:
    """Phase field on the pore region plus simulation time."""

    def __init__(self, phi: ScalarField, t=0.0, overshoot=0.0):
        self.phi = phi
        self.t = float(t)
        self.overshoot = float(overshoot)

    def liquid_volume(self):
        geom = self.phi.geom
        return float((self.phi.values * geom.pore_mask).sum() * geom.cell_volume)

    def copy(self):
        return PhaseFieldState(self.phi.copy(), self.t, self.overshoot)


def stable_dt(params, phi_values=None):
    """Advertised bound for the explicitly treated double-well term."""
    if phi_values is None:
        rho_min = params.rho_g
    else:
        rho_min = float(mixture(phi_values, params).rho.min())
    return 0.4 * params.lam**2 * params.nu * rho_min / params.gamma


def check_resolution(params, geom):
    ratio = params.lam / geom.h
    if ratio < 4.0:
        warnings.warn(
            f"interface width under-resolved: lambda/h = {ratio:.2f} < 4 "
            "(>= 8 recommended)",
            stacklevel=3,
        )
    return ratio


def allen_cahn_step(state: PhaseFieldState, v, chi, dt, params, geom=None):
    """Advance the phase field by one semi-implicit step.

    ``v`` is a FaceField (or None for zero velocity); ``chi`` a ScalarField,
    array, or scalar mole fraction in [0, 1].  Refuses dt beyond the
    explicit-term stability bound and aborts on overshoots beyond 0.1.
    """
    phi = state.phi
    geom = phi.geom if geom is None else geom
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dt_max = stable_dt(params, phi.values[geom.pore_mask])
    if dt > dt_max:
        raise ValueError(
            f"dt = {dt:g} exceeds the stability bound dt_max = {dt_max:g} "
            "= 0.4 * lambda^2 * nu * min(rho) / gamma for the explicit "
            "double-well term"
        )
    check_resolution(params, geom)
    chi_vals = chi.values if isinstance(chi, ScalarField) else np.asarray(chi, dtype=float)
    chi_vals = np.broadcast_to(chi_vals, geom.shape)
    if chi_vals.min() < -1e-8 or chi_vals.max() > 1.0 + 1e-8:
        raise ValueError(
            f"mole fraction outside [0,1]: range [{chi_vals.min():g}, {chi_vals.max():g}]"
        )

    rho_old = mixture(phi.values, params).rho
    _, dP = double_well(phi.values)
    f = evaporation_rate(np.clip(chi_vals, 0.0, 1.0), params)
    mob = params.gamma / params.nu

    rhs = rho_old * phi.values / dt
    rhs -= mob / params.lam**2 * dP
    rhs -= SQRT2 / params.lam * phi.values * (1.0 - phi.values) * f
    if v is not None and not v.is_zero():
        wall = v.max_wall_violation()
        if wall > 1e-12:
            raise ValueError(f"velocity violates no-slip at walls by {wall:g}")
        rhs -= rho_old * upwind_advection(phi.values, v)
    rhs = np.where(geom.pore_mask, rhs, 0.0)

    def apply(x):
        xf = ScalarField(geom, x, bc=BC_SOLID_NEUMANN)
        return np.where(
            geom.pore_mask,
            rho_old / dt * x - mob * laplacian(xf).values,
            0.0,
        )

    diag = rho_old / dt + mob * 2.0 * geom.dim / geom.h**2
    system = LinearSystem(
        geom, apply, rhs, mask=geom.pore_mask, symmetric=True, diag=diag
    )
    phi_new, _ = solve_linear(system, rel_tol=1e-10, x0=phi.values)
    overshoot = float(np.maximum(np.maximum(phi_new - 1.0, -phi_new), 0.0).max())
    if overshoot > 0.1:
        raise RuntimeError(
            f"phase-field overshoot {overshoot:.3f} exceeds 0.1; aborting "
            f"(t = {state.t:g})"
        )
    return PhaseFieldState(
        phi.copy(values=phi_new), t=state.t + dt, overshoot=overshoot
    )


def relax_to_equilibrium(phi0: ScalarField, params, steps, dt=None, chi=None):
    """Run reaction-free relaxation (chi at saturation) for ``steps`` steps."""
    state = PhaseFieldState(phi0)
    if chi is None:
        chi = params.chi_sat
    if dt is None:
        dt = 0.5 * stable_dt(params)
    for _ in range(steps):
        state = allen_cahn_step(state, None, chi, dt, params)
    return state


# -- analytic references -----------------------------------------------------


def equilibrium_profile(lam, coords, center=0.5, into_gas=+1):
    """Tanh profile of width ``lam``: 1 in the liquid, 0 in the gas.

    ``into_gas`` selects the direction of increasing coordinate toward the
    gas side; phi(center) = 1/2 exactly.
    """
    if lam <= 0:
        raise ValueError(f"interface width must be positive, got {lam}")
    z = into_gas * (np.asarray(coords, dtype=float) - center)
    return 0.5 * (1.0 - np.tanh(z / (SQRT2 * lam)))


def profile_from_signed_distance(lam, signed_distance):
    """Tanh profile from a signed distance (positive in the gas)."""
    return 0.5 * (1.0 - np.tanh(np.asarray(signed_distance) / (SQRT2 * lam)))


def slab_profile(lam, coords, center=0.5, width=0.5):
    """Periodic liquid slab of ``width`` centered at ``center``."""
    x = np.asarray(coords, dtype=float)
    d = np.abs((x - center + 0.5) % 1.0 - 0.5)
    return profile_from_signed_distance(lam, d - 0.5 * width)


def disk_profile(lam, geom, center=None, radius=0.3):
    """Liquid disk/ball of ``radius`` in the unit cell."""
    if center is None:
        center = (0.5,) * geom.dim
    grids = geom.meshgrid()
    r = np.sqrt(sum((g - c) ** 2 for g, c in zip(grids, center)))
    return profile_from_signed_distance(lam, r - radius)


def gradient_energy_integral(phi, lam, h=None):
    """Midpoint sum of (dphi/dz)^2 dz in inner coordinates z = x / lam.

    The 1D input is treated as a window around one interface (not
    periodic); equals sqrt(2)/6 for the equilibrium profile of width
    ``lam``.  Errors if the interface touches either end of the window.
    """
    if isinstance(phi, ScalarField):
        if phi.geom.dim != 1:
            raise ValueError("gradient-energy integral requires a 1D field")
        values = phi.values
        h = phi.geom.h
    else:
        values = np.asarray(phi, dtype=float)
        if values.ndim != 1:
            raise ValueError("gradient-energy integral requires a 1D field")
        if h is None:
            h = 1.0 / values.size
    if lam / h < 8.0:
        warnings.warn(f"interface resolution lambda/h = {lam / h:.2f} < 8", stacklevel=2)
    dphi = np.diff(values) / h
    peak = np.abs(dphi).max()
    edge = max(abs(dphi[0]), abs(dphi[-1]))
    if peak > 0 and edge > 1e-3 * peak:
        raise ValueError(
            "interface touches the domain boundary: edge slope "
            f"{edge:g} vs peak {peak:g}"
        )
    return float(lam * np.sum(dphi**2) * h)


def interface_crossings_1d(values, coords):
    """Linear-interpolated positions where the field crosses 1/2."""
    values = np.asarray(values, dtype=float)
    coords = np.asarray(coords, dtype=float)
    s = values - 0.5
    out = []
    for i in np.where(np.sign(s[:-1]) * np.sign(s[1:]) < 0)[0]:
        frac = s[i] / (s[i] - s[i + 1])
        out.append(float(coords[i] + frac * (coords[i + 1] - coords[i])))
    return out
