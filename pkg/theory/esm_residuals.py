"""
Residuals of the generalized Einstein-Scalar-Maxwell equations.

Einstein:          G(g) - kappa T = 0
Scalar:            theta_Sigma - 1/2 (*V, Psi V) = 0
Electromagnetic:   d_D V = 0   (with the polarization *V = V as a fourth diagnostic)

All curvature is built from nested second-order central differences of the
metric samples. Norms are reported over interior nodes, which exclude a
two-node margin next to non-periodic boundaries.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence

import numpy as np

from algebra.symplectic_core import EsmParameters
from geometry.finite_differences import PLAIN, derivative, gradient, interior_mask, second_derivative
from geometry.spacetime_fields import (
    NDIM,
    HodgeContext,
    LorentzMetricField,
    ScalarMapField,
    SpacetimeGrid,
    TwistedTwoForm,
    inner_contraction,
    pulled_back_psi,
    polarization_violation,
    q_norm2,
    scalar_pairing,
    twisted_d,
)
from geometry.target_geometry import (
    ScalarTarget,
    TamingField,
    fundamental_field,
    fundamental_form,
)
from utils.errors import DimensionError, EsmError, GridTooCoarse, PolarizationError

logger = logging.getLogger("esm.theory.residuals")

MARGIN = 2


@dataclass(frozen=True, eq=False)
class EsmConfiguration:
    """A discretized configuration (g, phi, V) over a scalar-electromagnetic structure."""

    grid: SpacetimeGrid
    g: LorentzMetricField
    phi: ScalarMapField
    v: TwistedTwoForm
    target: ScalarTarget
    taming: TamingField
    params: EsmParameters = field(default_factory=EsmParameters)
    target_step: float = 1e-3

    def __post_init__(self):
        if self.v.rank != self.target.sp.dim:
            raise DimensionError(f"two-form has fiber rank {self.v.rank}, fiber is {self.target.sp.dim}")
        if self.phi.dim != self.target.dim:
            raise DimensionError("scalar map dimension does not match the target")

    def context(self) -> HodgeContext:
        return HodgeContext.build(self.g, self.taming, self.phi)

    def validate(self) -> float:
        """
        Check the positive polarization of V.

        Returns:
            Max pointwise violation

        Raises:
            PolarizationError
        """
        violation = float(np.max(polarization_violation(self.v, self.context()), initial=0.0))
        if violation > self.params.tol("field_tol"):
            raise PolarizationError(f"two-form is not positively polarized (violation {violation:.3e})")
        return violation

    def with_fields(self, **changes: Any) -> "EsmConfiguration":
        return replace(self, **changes)


@dataclass
class ResidualReport:
    """Norms and optional fields of the three residuals plus polarization."""

    norms: Dict[str, Dict[str, float]]
    status: Dict[str, str]
    grid: Dict[str, Any]
    fields: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s == "pass" for s in self.status.values())

    def to_dict(self, dump_fields: bool = False) -> Dict[str, Any]:
        out = {"norms": self.norms, "status": self.status, "grid": self.grid}
        if dump_fields:
            out["fields"] = self.fields
        return out


# Geometry of the spacetime metric

def christoffel(g: LorentzMetricField) -> np.ndarray:
    """Gamma^l_{mn}, shape (..., 4, 4, 4)."""
    grid = g.grid
    dg = gradient(g.g, grid.spacing, grid.periodic)  # [..., d, i, j] = d_d g_ij
    lower = (
        np.einsum("...msn->...smn", dg)
        + np.einsum("...nsm->...smn", dg)
        - dg
    )
    return 0.5 * np.einsum("...ls,...smn->...lmn", g.g_inv, lower)


def _check_curvature_grid(grid: SpacetimeGrid) -> None:
    for axis, (n, per) in enumerate(zip(grid.shape, grid.periodic)):
        if not per and n < 5:
            raise GridTooCoarse(f"direction {axis} has {n} nodes; curvature needs at least 5")


def ricci_tensor(g: LorentzMetricField, gamma: Optional[np.ndarray] = None) -> np.ndarray:
    """R_{sn} from nested central differences of the Christoffel symbols."""
    grid = g.grid
    _check_curvature_grid(grid)
    gamma = christoffel(g) if gamma is None else gamma
    dgamma = gradient(gamma, grid.spacing, grid.periodic)  # [..., d, l, m, n]
    ric = (
        np.einsum("...rrns->...sn", dgamma)
        - np.einsum("...nrrs->...sn", dgamma)
        + np.einsum("...rrl,...lns->...sn", gamma, gamma)
        - np.einsum("...rnl,...lrs->...sn", gamma, gamma)
    )
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def einstein_tensor(g: LorentzMetricField) -> np.ndarray:
    """
    G_{mn} = R_{mn} - R g_{mn} / 2 at every node (boundary layers use one-sided stencils).

    Raises:
        GridTooCoarse: fewer than 5 nodes along a non-periodic direction
    """
    ric = ricci_tensor(g)
    scalar = np.einsum("...mn,...mn->...", g.g_inv, ric)
    einstein = ric - 0.5 * scalar[..., None, None] * g.g
    return 0.5 * (einstein + np.swapaxes(einstein, -1, -2))


def bianchi_residual(g: LorentzMetricField) -> np.ndarray:
    """Contracted Bianchi diagnostic nabla^m G_{mn}, shape (..., 4)."""
    grid = g.grid
    gamma = christoffel(g)
    einstein = einstein_tensor(g)
    dG = gradient(einstein, grid.spacing, grid.periodic)  # [..., a, m, n]
    cov = (
        dG
        - np.einsum("...lam,...ln->...amn", gamma, einstein)
        - np.einsum("...lan,...ml->...amn", gamma, einstein)
    )
    return np.einsum("...am,...amn->...n", g.g_inv, cov)


# Scalar sector

def _target_metric(cfg: EsmConfiguration) -> np.ndarray:
    return cfg.target.metric_at(cfg.phi.phi)


def modified_density(cfg: EsmConfiguration) -> np.ndarray:
    """e = 1/2 g^{mn} d_m phi^i d_n phi^j G_ij(phi) + Phi(phi)."""
    dphi = cfg.phi.derivatives()
    kinetic = np.einsum("...mn,...mi,...nj,...ij->...", cfg.g.g_inv, dphi, dphi, _target_metric(cfg))
    return 0.5 * kinetic + cfg.target.potential_at(cfg.phi.phi)


def _hessian(phi: ScalarMapField) -> np.ndarray:
    """d_m d_n phi^k, shape (..., 4, 4, d)."""
    grid = phi.grid
    dphi = phi.derivatives()
    hess = np.empty(tuple(grid.shape) + (NDIM, NDIM, phi.dim))
    for m in range(NDIM):
        for n in range(NDIM):
            if m == n:
                hess[..., m, n, :] = second_derivative(phi.phi, m, grid.spacing[m], grid.periodic[m], phi.cut(m))
            else:
                hess[..., m, n, :] = derivative(dphi[..., n, :], m, grid.spacing[m], grid.periodic[m], PLAIN)
    return 0.5 * (hess + np.swapaxes(hess, NDIM, NDIM + 1))


def tension_field(cfg: EsmConfiguration) -> np.ndarray:
    """
    theta^k = g^{mn} (d_m d_n phi^k - Gamma^l_{mn} d_l phi^k + Gamma^k_ij(phi) d_m phi^i d_n phi^j).
    """
    dphi = cfg.phi.derivatives()
    hess = _hessian(cfg.phi)
    gamma = christoffel(cfg.g)
    target_gamma = cfg.target.christoffel_at(cfg.phi.phi)
    inner = (
        hess
        - np.einsum("...lmn,...lk->...mnk", gamma, dphi)
        + np.einsum("...kij,...mi,...nj->...mnk", target_gamma, dphi, dphi)
    )
    return np.einsum("...mn,...mnk->...k", cfg.g.g_inv, inner)


def modified_tension(cfg: EsmConfiguration) -> np.ndarray:
    """theta_Sigma = theta - grad_G Phi at phi."""
    return tension_field(cfg) - cfg.target.sharp_gradient_at(cfg.phi.phi)


def psi_at_nodes(cfg: EsmConfiguration) -> np.ndarray:
    """Psi^k(phi(x)), shape (..., d, 2n, 2n)."""
    ff = fundamental_form(cfg.target, cfg.taming, cfg.target_step)
    return pulled_back_psi(fundamental_field(cfg.target, ff), cfg.phi)


def scalar_residual(cfg: EsmConfiguration, ctx: Optional[HodgeContext] = None) -> np.ndarray:
    ctx = cfg.context() if ctx is None else ctx
    return modified_tension(cfg) - scalar_pairing(cfg.v, psi_at_nodes(cfg), ctx)


# Einstein sector

def stress_tensor(cfg: EsmConfiguration, ctx: Optional[HodgeContext] = None) -> np.ndarray:
    """T = g e + 2 V (/) V - phi^*(G)."""
    ctx = cfg.context() if ctx is None else ctx
    dphi = cfg.phi.derivatives()
    pullback = np.einsum("...mi,...nj,...ij->...mn", dphi, dphi, _target_metric(cfg))
    contraction = inner_contraction(cfg.v, cfg.v, cfg.g, ctx.q)
    stress = cfg.g.g * modified_density(cfg)[..., None, None] + 2.0 * contraction - pullback
    return 0.5 * (stress + np.swapaxes(stress, -1, -2))


def einstein_residual(cfg: EsmConfiguration, ctx: Optional[HodgeContext] = None) -> np.ndarray:
    return einstein_tensor(cfg.g) - cfg.params.kappa * stress_tensor(cfg, ctx)


# Report

def _aggregate(pointwise: np.ndarray, mask: np.ndarray) -> Dict[str, float]:
    values = pointwise[mask]
    if values.size == 0 or not np.all(np.isfinite(values)):
        return {"max": float(np.max(values, initial=0.0)), "rms": float("nan") if values.size else 0.0}
    return {"max": float(np.max(values)), "rms": float(np.sqrt(np.sum(values * values) / values.size))}


def pointwise_norms(
    cfg: EsmConfiguration, fields: Dict[str, np.ndarray], ctx: Optional[HodgeContext] = None
) -> Dict[str, np.ndarray]:
    """Duality-invariant pointwise norms of whichever residual fields are present."""
    ctx = cfg.context() if ctx is None else ctx
    out = {}
    if "einstein" in fields:
        out["einstein"] = np.sqrt(np.sum(fields["einstein"] ** 2, axis=(-1, -2)))
    if "scalar" in fields:
        s = fields["scalar"]
        out["scalar"] = np.sqrt(np.abs(np.einsum("...k,...kl,...l->...", s, _target_metric(cfg), s)))
    if "em" in fields:
        out["em"] = q_norm2(ctx.q, fields["em"])
    if "polarization" in fields:
        out["polarization"] = fields["polarization"]
    return out


def residual_report(cfg: EsmConfiguration, tol: Optional[float] = None) -> ResidualReport:
    """
    Evaluate every residual and aggregate max and RMS norms over interior nodes.

    A failure while evaluating one equation is recorded in its status and the
    remaining equations are still reported.
    """
    tol = cfg.params.tol("field_tol") if tol is None else tol
    mask = interior_mask(cfg.grid.shape, cfg.grid.periodic, MARGIN)
    ctx = cfg.context()
    fields: Dict[str, np.ndarray] = {}
    status: Dict[str, str] = {}
    norms: Dict[str, Dict[str, float]] = {}

    evaluators = {
        "einstein": lambda: einstein_residual(cfg, ctx),
        "scalar": lambda: scalar_residual(cfg, ctx),
        "em": lambda: twisted_d(cfg.v),
        "polarization": lambda: polarization_violation(cfg.v, ctx),
    }
    for name, evaluate in evaluators.items():
        try:
            fields[name] = evaluate()
        except EsmError as e:
            logger.error(f"{name} residual failed: {e}")
            status[name] = f"error: {e.code}"
            norms[name] = {"max": float("nan"), "rms": float("nan")}

    for name, values in pointwise_norms(cfg, fields, ctx).items():
        norms[name] = _aggregate(values, mask)
        status[name] = "pass" if norms[name]["max"] <= tol else "fail"
    logger.debug(f"residual norms: {norms}")
    return ResidualReport(norms, status, cfg.grid.describe(), fields)


def convergence_order(coarse: ResidualReport, fine: ResidualReport, factor: int, equation: str) -> Dict[str, float]:
    """Observed order log(r_coarse / r_fine) / log(factor) on the max and RMS norms."""
    out = {}
    for key in ("max", "rms"):
        a, b = coarse.norms[equation][key], fine.norms[equation][key]
        if not (np.isfinite(a) and np.isfinite(b)):
            out[f"ratio_{key}"] = out[f"order_{key}"] = float("nan")
            continue
        out[f"ratio_{key}"] = a / b if b > 0 else float("inf")
        out[f"order_{key}"] = float(np.log(a / b) / np.log(factor)) if a > 0 and b > 0 else float("nan")
    return out


# Discrete covariance

def _is_even(perm: Sequence[int]) -> bool:
    inversions = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return inversions % 2 == 0


def relabel_axes(cfg: EsmConfiguration, perm: Sequence[int]) -> EsmConfiguration:
    """
    Relabel grid axes: new axis k is old axis perm[k].

    Only orientation-preserving (even) permutations keep the Hodge operator,
    and hence the polarization condition, unchanged.

    Raises:
        DimensionError: odd or malformed permutation
    """
    perm = list(perm)
    if sorted(perm) != list(range(NDIM)) or not _is_even(perm):
        raise DimensionError(f"{perm} is not an even permutation of the four axes")
    grid = cfg.grid
    new_grid = SpacetimeGrid(
        tuple(grid.shape[p] for p in perm),
        tuple(grid.spacing[p] for p in perm),
        tuple(grid.periodic[p] for p in perm),
        tuple(grid.origin[p] for p in perm),
        tuple(grid.phi_winding[p] for p in perm),
    )
    tail = list(range(NDIM, NDIM + 2))
    g = np.transpose(cfg.g.g, perm + tail)[..., perm, :][..., :, perm]
    metric = LorentzMetricField.build(new_grid, g)
    phi = ScalarMapField(
        np.transpose(cfg.phi.phi, perm + [NDIM]),
        tuple(cfg.phi.shifts[p] for p in perm),
        new_grid,
    )
    v = np.transpose(cfg.v.v, perm + [NDIM, NDIM + 1, NDIM + 2])[..., perm, :][..., :, perm]
    form = TwistedTwoForm(v, tuple(cfg.v.transitions[p] for p in perm), new_grid)
    return replace(cfg, grid=new_grid, g=metric, phi=phi, v=form)
