"""Pointwise model physics.

Everything here is a pure function of cell densities and a :class:`ModelConfig`
and broadcasts over numpy arrays, so the same code evaluates one cell or a
whole grid.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "ModelConfig",
    "ReceptorState",
    "receptor_equilibrium",
    "receptor_ode_rhs",
    "diffusion_coeff",
    "taxis_sensitivities",
    "transition_rates",
    "proliferation_rate",
    "reaction_terms",
    "ph_level",
    "wellposedness_margin",
]

CHOICES = {
    "sensitivity_kind": ("EquilibriumValues", "EquilibriumDerivatives", "SimplifiedRational"),
    "rate_kind": ("Constant", "Dynamic"),
    "diffusion_kind": ("NonDegenerate", "Degenerate", "Constant"),
    "denominator_form": ("Section2", "AppendixB"),
    "remodeling_kind": ("TissueDriven", "CellDriven"),
    "proliferation_kind": ("Standard", "Anoikis", "AcidityDependent"),
    "repellent_target": ("ProliferatingCells", "Acidity"),
    "model_family": ("Full", "SimplifiedAnalysis"),
    "acidity_growth_form": ("AboveThreshold", "BelowThreshold"),
}


@dataclass
class ModelConfig:
    """Rate constants and variant selectors.

    Defaults are the base parameter set of the numerical experiments with
    constant switch rates; :func:`doubletaxis.driver.preset` layers the
    experiment-specific changes on top.
    """

    # motility
    D_c: float = 0.001
    xi1: float = 0.4
    xi2: float = 0.1
    k_D: float = 1.0
    # growth and tissue
    mu: float = 0.1
    mu_v: float = 0.15
    delta: float = 0.3
    # constant switch rates (PMT lambda, MPT gamma)
    lambda0: float = 0.01
    gamma0: float = 0.002
    # receptor-dependent switch rates
    gamma0_dyn: float = 0.1
    b: float = 2.0
    p_shape: float = 2.0
    mu_y: float = 2.0
    mu_zeta: float = 2.0
    sigma_y: float = 0.5
    sigma_zeta: float = 0.3
    y_ref: float = 0.6
    # acidity model
    D_h: float = 0.07
    alpha_h: float = 0.55
    beta_h: float = 0.05
    h_T_exponent: float = 6.4
    mu0: float = 0.1
    # reduced model used for the existence analysis
    c1: float = 1.0
    c2: float = 0.05
    eta1: float = 1.0
    alpha_s: float = 0.3
    beta_s: float = 0.3
    # variant selectors
    sensitivity_kind: str = "EquilibriumDerivatives"
    rate_kind: str = "Constant"
    diffusion_kind: str = "NonDegenerate"
    denominator_form: str = "Section2"
    remodeling_kind: str = "TissueDriven"
    proliferation_kind: str = "Standard"
    repellent_target: str = "ProliferatingCells"
    model_family: str = "Full"
    acidity_growth_form: str = "AboveThreshold"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name, allowed in CHOICES.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        for f in fields(self):
            if f.name in CHOICES:
                continue
            val = getattr(self, f.name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ValueError(f"{f.name} must be a finite number, got {val!r}")
            if val < 0 and f.name != "h_T_exponent":
                raise ValueError(f"{f.name} must be non-negative, got {val!r}")
        for name in ("k_D", "sigma_y", "sigma_zeta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.proliferation_kind == "AcidityDependent" and not self.has_acidity:
            raise ValueError("AcidityDependent proliferation needs repellent_target='Acidity'")

    @property
    def has_acidity(self) -> bool:
        return self.repellent_target == "Acidity"

    def set(self, key: str, value) -> None:
        """Override one parameter from a string or number, with type coercion."""
        names = {f.name for f in fields(self)}
        if key not in names:
            raise KeyError(f"unknown model parameter {key!r}")
        if key in CHOICES:
            setattr(self, key, str(value))
        else:
            setattr(self, key, float(value))
        self.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class ReceptorState(NamedTuple):
    """Bound-receptor fractions: ``y`` to tissue, ``zeta`` to cells."""

    y: np.ndarray
    zeta: np.ndarray


def _equilibrium(m, p, v, k_D):
    denom = k_D + m + p + v
    return ReceptorState(v / denom, (m + p) / denom)


def _check_nonneg(**arrays):
    for name, a in arrays.items():
        if np.any(np.asarray(a) < 0):
            raise ValueError(f"{name} must be non-negative")


def receptor_equilibrium(m, p, v, k_D: float = 1.0) -> ReceptorState:
    """Steady state of the receptor binding kinetics for given densities."""
    _check_nonneg(m=m, p=p, v=v)
    if k_D <= 0:
        raise ValueError("k_D must be positive")
    return _equilibrium(np.asarray(m, float), np.asarray(p, float), np.asarray(v, float), k_D)


def receptor_ode_rhs(s: ReceptorState, m, p, v, k_plus: float = 1.0, k_minus: float = 1.0):
    free = 1.0 - s.y - s.zeta
    dy = k_plus * free * v - k_minus * s.y
    dzeta = k_plus * free * (m + p) - k_minus * s.zeta
    return dy, dzeta


def diffusion_coeff(m, p, v, cfg: ModelConfig):
    """Motility of migrating cells for the selected diffusion law."""
    kind = cfg.diffusion_kind
    if kind == "Constant":
        return cfg.D_c * np.ones_like(np.asarray(m + p + v, dtype=float))
    mp, mv, pv = m * p, m * v, p * v
    if kind == "Degenerate":
        d = cfg.D_c * (mv + mp + pv) / (1.0 + mv + pv)
    elif cfg.denominator_form == "Section2":
        d = cfg.D_c * (1.0 + mp + mv + pv) / (1.0 + m * (p + v))
    else:
        d = cfg.D_c * (1.0 + mp + mv + pv) / (1.0 + mv + pv)
    return np.maximum(d, 0.0)


def taxis_sensitivities(m, p, v, cfg: ModelConfig):
    """Return ``(chi1, chi2)``: haptotactic and repellent sensitivities."""
    kind = cfg.sensitivity_kind
    if kind == "SimplifiedRational":
        chi1 = cfg.c1 * v / (1.0 + v)
        return chi1, cfg.c2 * np.ones_like(chi1)
    if kind == "EquilibriumValues":
        s = _equilibrium(m, p, v, cfg.k_D)
        return s.y, s.zeta
    denom2 = (cfg.k_D + m + p + v) ** 2
    chi1 = cfg.xi1 * (cfg.k_D + m + p) / denom2
    chi2 = cfg.xi2 * (cfg.k_D + v) / denom2
    return chi1, chi2


def transition_rates(s: ReceptorState, cfg: ModelConfig):
    """Return ``(lambda, gamma)``: PMT (p -> m) and MPT (m -> p) rates."""
    y = np.asarray(s.y, dtype=float)
    zeta = np.asarray(s.zeta, dtype=float)
    if cfg.rate_kind == "Constant":
        ones = np.ones(np.broadcast(y, zeta).shape)
        return cfg.lambda0 * ones, cfg.gamma0 * ones
    g0, b, k = cfg.gamma0_dyn, cfg.b, cfg.p_shape
    y_pos = np.maximum(y, 0.0)
    gamma_dist = g0 * b ** k / math.gamma(k) * y_pos ** (k - 1.0) * np.exp(-b * y_pos)
    gauss = g0 / (2.0 * math.pi * cfg.sigma_y * cfg.sigma_zeta) * np.exp(
        -(y - cfg.mu_y) ** 2 / (2.0 * cfg.sigma_y ** 2)
        - (zeta - cfg.mu_zeta) ** 2 / (2.0 * cfg.sigma_zeta ** 2)
    )
    gamma = gamma_dist + gauss
    mx = np.maximum(zeta - y, y - cfg.y_ref)
    lam = 2.0 * gamma / (1.0 + np.exp(-mx))
    return lam, gamma


def proliferation_rate(v, h, cfg: ModelConfig):
    """Effective proliferation rate; anoikis' v factor is applied in :func:`reaction_terms`."""
    if cfg.proliferation_kind != "AcidityDependent":
        return cfg.mu
    if cfg.acidity_growth_form == "AboveThreshold":
        return cfg.mu0 * np.maximum(h - 1.0, 0.0)
    return cfg.mu0 * np.maximum(1.0 - h, 0.0)


def reaction_terms(m, p, v, cfg: ModelConfig, h=None, receptors: Optional[ReceptorState] = None):
    """Source terms ``(Rm, Rp, Rv)``, plus ``Rh`` for the acidity model."""
    if receptors is None:
        receptors = _equilibrium(m, p, v, cfg.k_D)
    lam, gamma = transition_rates(receptors, cfg)
    switch = lam * p - gamma * m
    cells = m + p
    if cfg.model_family == "SimplifiedAnalysis":
        rp = cfg.mu * p * (1.0 - cells - cfg.eta1 * v) - switch
        rv = -cfg.alpha_s * m * v - cfg.beta_s * p * v + cfg.mu_v * v * (1.0 - v)
        return switch, rp, rv

    free = 1.0 - cells - v
    growth = proliferation_rate(v, h, cfg) * p * free
    if cfg.proliferation_kind == "Anoikis":
        growth = growth * v
    rp = growth - switch
    if cfg.has_acidity:
        if h is None:
            raise ValueError("acidity model needs the h field")
        rv = -cfg.delta * h * v + cfg.mu_v * v * free
        rh = cfg.alpha_h * cells - cfg.beta_h * h
        return switch, rp, rv, rh
    remodel = m if cfg.remodeling_kind == "CellDriven" else v
    rv = -cfg.delta * cells * v + cfg.mu_v * remodel * free
    return switch, rp, rv


def ph_level(h, h_T_exponent: float = 6.4):
    """pH of the rescaled proton concentration ``h * 10**-h_T_exponent``."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("pH needs strictly positive acidity")
    return h_T_exponent - np.log10(h)


def wellposedness_margin(cfg: ModelConfig, state) -> float:
    """Ratio ``c2 mu A^2 / (4 gamma C2)`` of the reduced model; below 1 the existence condition holds.

    ``C2`` is taken as the smallest motility over the current state's cells.
    """
    if cfg.model_family != "SimplifiedAnalysis" or cfg.rate_kind != "Constant":
        raise ValueError("margin is defined for the reduced model with constant switch rates")
    if cfg.c2 == 0:
        return 0.0
    A = max(float(np.max(state.p)), 1.0 - cfg.lambda0 / cfg.mu, cfg.gamma0 / cfg.mu)
    C2 = float(np.min(diffusion_coeff(state.m, state.p, state.v, cfg)))
    if C2 <= 0 or cfg.gamma0 == 0:
        return math.inf
    return cfg.c2 * cfg.mu * A ** 2 / (4.0 * cfg.gamma0 * C2)
