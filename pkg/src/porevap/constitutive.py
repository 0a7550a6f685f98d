"""Physical parameters, closures, and the dimensionless-regime audit.

Holds the double-well potential, the quadratic evaporation-rate law, linear
mixture rules between liquid and gas properties, the linear calorific
equations of state, and the audit that checks a set of reference scales
against the diffusion-dominated regime targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """All physical and phase-field constants.

    Densities, viscosities, conductivities and heat capacities come in
    liquid/gas pairs; the solid carries its own density, heat capacity and
    conductivity.  ``gamma`` (kg s^-2) and ``nu`` (m s^-1) are the
    phase-field mobility pair, ``lam`` the diffuse-interface width,
    ``reaction_rate`` the evaporation reaction constant (kg m^-2 s^-1) and
    ``chi_sat`` the saturated vapor mole fraction.
    """

    rho_l: float = 1.0
    rho_g: float = 0.1
    mu_l: float = 1.0
    mu_g: float = 0.1
    xi_l: float = 0.0
    xi_g: float = 0.0
    k_l: float = 1.0
    k_g: float = 0.1
    k_s: float = 1.0
    c_l: float = 1.0
    c_g: float = 1.0
    c_ps: float = 1.0
    d_gv: float = 1.0
    sigma: float = 1.0
    lam: float = 0.05
    gamma: float = 1.0
    nu: float = 1.0
    reaction_rate: float = 1.0
    chi_sat: float = 0.5
    rho_s: float = 1.0
    gravity: tuple = (0.0, 0.0)

    def __post_init__(self):
        positive = (
            "rho_l", "rho_g", "mu_l", "mu_g", "k_l", "k_g", "k_s",
            "c_l", "c_g", "c_ps", "d_gv", "sigma", "lam", "gamma", "nu",
            "reaction_rate", "rho_s",
        )
        for name in positive:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be strictly positive, got {v}")
        for name in ("xi_l", "xi_g"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be >= 0, got {v}")
        if not 0.0 < self.chi_sat <= 1.0:
            raise ParameterError(f"chi_sat must lie in (0, 1], got {self.chi_sat}")
        if self.rho_l <= self.rho_g:
            raise ParameterError(
                f"rho_l must exceed rho_g, got {self.rho_l} <= {self.rho_g}"
            )
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    @classmethod
    def from_json(cls, text):
        """Parse a flat key-value JSON object; unknown keys rejected."""
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ParameterError("parameter file must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown parameter keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def gravity_vector(self, dim):
        g = np.zeros(dim)
        g[: min(dim, len(self.gravity))] = self.gravity[:dim]
        return g


# -- closures ----------------------------------------------------------------


def double_well(phi):
    """Double-well potential ``P = phi^2 (1-phi)^2`` and its derivative."""
    phi = np.asarray(phi, dtype=float)
    p = phi**2 * (1.0 - phi) ** 2
    dp = 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)
    if p.ndim == 0:
        return float(p), float(dp)
    return p, dp


def evaporation_rate(chi, params: ModelParams, chi_sat_law=None):
    """Reaction-rate drive ``R ((chi/chi_sat)^2 - 1)``.

    Vanishes at saturation; the optional ``chi_sat_law(T)`` hook replaces
    the constant saturation mole fraction.
    """
    chi = np.asarray(chi, dtype=float)
    chi_sat = params.chi_sat if chi_sat_law is None else chi_sat_law
    f = params.reaction_rate * ((chi / chi_sat) ** 2 - 1.0)
    if f.ndim == 0:
        return float(f)
    return f


@dataclass
class MixtureProps:
    rho: np.ndarray
    mu: np.ndarray
    xi: np.ndarray
    k: np.ndarray
    c: np.ndarray
    overshoot: float = 0.0


def mixture(phi, params: ModelParams) -> MixtureProps:
    """Linear mixture rules; phi clamped to [0,1] for evaluation only.

    The clamp magnitude is reported so overshoots can be tracked without
    ever producing negative densities.
    """
    phi = np.asarray(phi, dtype=float)
    overshoot = float(np.maximum(np.maximum(phi - 1.0, -phi), 0.0).max()) if phi.size else 0.0
    p = np.clip(phi, 0.0, 1.0)
    return MixtureProps(
        rho=p * params.rho_l + (1.0 - p) * params.rho_g,
        mu=p * params.mu_l + (1.0 - p) * params.mu_g,
        xi=p * params.xi_l + (1.0 - p) * params.xi_g,
        k=p * params.k_l + (1.0 - p) * params.k_g,
        c=p * params.c_l + (1.0 - p) * params.c_g,
        overshoot=overshoot,
    )


def internal_energy(phi, T, params: ModelParams):
    """Mixture internal energy per unit mass with linear EOS u_a = c_a T."""
    p = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    c = p * params.c_l + (1.0 - p) * params.c_g
    return c * np.asarray(T, dtype=float)


def enthalpy(phi, T, pressure, rho, params: ModelParams):
    """Mixture enthalpy ``h = u + p/rho``."""
    u = internal_energy(phi, T, params)
    return u + np.asarray(pressure, dtype=float) / np.asarray(rho, dtype=float)


# -- dimensionless audit ------------------------------------------------------


@dataclass(frozen=True)
class ScaleSet:
    """Reference quantities defining the nondimensionalization."""

    L: float
    l: float
    t_ref: float
    rho_ref: float
    v_ref: float
    p_ref: float
    mu_ref: float
    xi_ref: float
    d_ref: float
    lam_ref: float
    sigma_ref: float
    g_ref: float
    gamma_ref: float
    nu_ref: float
    u_ref: float
    k_ref: float
    t_emp_ref: float
    c_ref: float
    r_ref: float

    def __post_init__(self):
        for f_ in fields(self):
            v = getattr(self, f_.name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"scale {f_.name} must be positive, got {v}")
        if not self.l < self.L:
            raise ParameterError("micro scale l must be smaller than macro scale L")

    @property
    def eps(self):
        return self.l / self.L

    @classmethod
    def regime(cls, eps=0.1, L=1.0):
        """Scales sitting on the diffusion-dominated targets.

        Every independent group equals its target exactly; the Schmidt
        number is the dependent combination Pe/Re and lands at eps, on the
        low edge of the audit band when eps = 0.1.
        """
        if not 0 < eps < 1:
            raise ParameterError(f"eps must lie in (0,1), got {eps}")
        rho = 1.0
        v = 1.0  # Re = rho v L / mu = 1 with mu = rho L v
        mu = rho * v * L
        d = L * v / eps  # Pe = eps
        return cls(
            L=L,
            l=eps * L,
            t_ref=L**2 / d,
            rho_ref=rho,
            v_ref=v,
            p_ref=rho * v**2 / eps**2,  # Eu = eps^-2
            mu_ref=mu,
            xi_ref=mu,  # xi/mu = 1
            d_ref=d,
            lam_ref=eps * L,  # Ch = eps
            sigma_ref=mu * v / eps**2,  # Ca = eps^2
            g_ref=v**2 / (eps**2 * L),  # Fr = eps
            gamma_ref=eps * mu,  # gamma/(nu mu) = eps with nu_ref = 1
            nu_ref=1.0,
            u_ref=1.0,
            k_ref=1.0,  # Pr = u mu/(k T) = 1 with T = mu u
            t_emp_ref=mu * 1.0,
            c_ref=1.0,
            r_ref=rho * v,  # Da = 1
        )


@dataclass
class DimensionlessNumber:
    name: str
    value: float
    target_order: int
    ratio: float
    passed: bool


@dataclass
class DimensionlessReport:
    eps: float
    numbers: list = field(default_factory=list)

    @property
    def all_pass(self):
        return all(n.passed for n in self.numbers)

    def __getitem__(self, name):
        for n in self.numbers:
            if n.name == name:
                return n
        raise KeyError(name)

    def summary_rows(self):
        return [
            (n.name, n.value, n.target_order, n.ratio, "pass" if n.passed else "fail")
            for n in self.numbers
        ]


# Target order in eps for each group in the diffusion-dominated regime.
_TARGETS = {
    "Re": 0, "Eu": -2, "Pe": 1, "Da": 0, "Ch": 1,
    "Pr": 0, "Sc": 0, "Fr": 1, "Ca": 2, "xi/mu": 0, "gamma/(nu mu)": 1,
}

_BAND = (0.1, 10.0)


def dimensionless_audit(scales: ScaleSet) -> DimensionlessReport:
    """Compute every regime group and compare against its eps target.

    Failures are reported, never raised; callers that require the regime
    (the Darcy driver) inspect the report themselves.
    """
    eps = scales.eps
    values = {
        "Re": scales.rho_ref * scales.v_ref * scales.L / scales.mu_ref,
        "Eu": scales.p_ref / (scales.rho_ref * scales.v_ref**2),
        "Pe": scales.L * scales.v_ref / scales.d_ref,
        "Da": scales.r_ref / (scales.rho_ref * scales.v_ref),
        "Ch": scales.lam_ref / scales.L,
        "Pr": scales.u_ref * scales.mu_ref / (scales.k_ref * scales.t_emp_ref),
        "Sc": scales.mu_ref / (scales.rho_ref * scales.d_ref),
        "Fr": scales.v_ref / math.sqrt(scales.g_ref * scales.L),
        "Ca": scales.mu_ref * scales.v_ref / scales.sigma_ref,
        "xi/mu": scales.xi_ref / scales.mu_ref,
        "gamma/(nu mu)": scales.gamma_ref / (scales.nu_ref * scales.mu_ref),
    }
    report = DimensionlessReport(eps=eps)
    for name, value in values.items():
        target = _TARGETS[name]
        ratio = value / eps**target
        passed = _BAND[0] <= ratio <= _BAND[1]
        report.numbers.append(
            DimensionlessNumber(name, float(value), target, float(ratio), bool(passed))
        )
    return report
