"""
Thermodynamic bookkeeping for the exact and the effective (observable) Gibbs states.

The observable entropy and energy are computed from the pinched Gibbs state
and the exact effective Hamiltonian; their excess over the true values is the
information loss ``dS`` and the hidden energy ``dU = dS / beta``. Both are
obtained twice: as differences of entropies/energies, and from the
temperature derivative of the effective Hamiltonian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bohr import BohrDecomposition, bohr_decompose, free_average
from .cumulant import effective_hamiltonian_perturbative, second_order_beta_derivative, second_order_term
from .exact import effective_gibbs, effective_hamiltonian_exact, gibbs
from .exceptions import DomainError, NumericalError
from .operators import as_hermitian, eigh, expectation, maxabs
from .pinching import SpectralDecomposition, pinch, spectral_decompose

TRACE_TOL = 1e-8
CLIP = 1e-15
FD_REL_STEP = 1e-4


def _spectrum(rho, trace_tol: float = TRACE_TOL) -> tuple[np.ndarray, np.ndarray]:
    rho = as_hermitian(rho, herm_tol=1e-10)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > trace_tol:
        raise DomainError(f"density matrix has trace {tr!r}, expected 1 within {trace_tol:g}")
    return eigh(rho)


def von_neumann_entropy(rho, trace_tol: float = TRACE_TOL, clip: float = CLIP) -> float:
    """``-Tr rho ln rho``; eigenvalues below ``clip`` count as zero."""
    w, _ = _spectrum(rho, trace_tol)
    p = w[w > clip]
    return float(max(0.0, -np.sum(p * np.log(p))))


def internal_energy(H, rho) -> float:
    """``Tr H rho`` (real part)."""
    return float(expectation(np.asarray(H), np.asarray(rho)).real)


def observable_quantities(H_tilde, rho_tilde) -> tuple[float, float]:
    """Observable entropy and energy ``(S_tilde, U_tilde)`` of the effective pair."""
    return von_neumann_entropy(rho_tilde), internal_energy(H_tilde, rho_tilde)


def relative_entropy(rho, sigma, clip: float = CLIP) -> float:
    """
    ``S(rho || sigma) = Tr rho (ln rho - ln sigma)``.

    ``sigma`` must be positive definite; a zero or negative eigenvalue of
    ``sigma`` raises :class:`DomainError`.
    """
    wr, vr = _spectrum(rho)
    ws, vs = _spectrum(sigma)
    if ws[0] <= 0:
        raise DomainError(f"sigma is singular: smallest eigenvalue {ws[0]!r}")
    keep = wr > clip
    p = wr[keep]
    # Tr rho ln sigma = sum_ij p_i |<r_i|s_j>|^2 ln s_j
    overlap = np.abs(vr[:, keep].conj().T @ vs) ** 2
    cross = float(p @ overlap @ np.log(ws))
    return float(np.sum(p * np.log(p)) - cross)


# --------------------------------------------------------------------------- derivatives


def richardson_derivative(fn: Callable[[float], np.ndarray], x: float, step: float):
    """
    Central difference with one Richardson step: ``(4 D(h/2) - D(h)) / 3``.

    ``fn`` may return scalars or arrays.
    """
    if step <= 0 or x - step == x:
        raise NumericalError(f"finite-difference step {step!r} underflows at x={x!r}")

    def central(h):
        return (np.asarray(fn(x + h)) - np.asarray(fn(x - h))) / (2.0 * h)

    return (4.0 * central(0.5 * step) - central(step)) / 3.0


def effective_hamiltonian_beta_derivative(H, sd: SpectralDecomposition, beta: float, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """``d H_eff / d beta`` of the exact effective Hamiltonian (fixed ``H``)."""
    H = as_hermitian(H)
    return richardson_derivative(lambda b: effective_hamiltonian_exact(H, sd, b), beta, rel_step * beta)


def log_partition(H, beta: float) -> float:
    return gibbs(H, beta).log_z


def entropy_from_free_energy(H, beta: float, rel_step: float = FD_REL_STEP) -> float:
    """``S = beta^2 dF/dbeta`` with ``F = -ln Z / beta``, by finite differences."""
    H = as_hermitian(H)
    dF = richardson_derivative(lambda b: -log_partition(H, b) / b, beta, rel_step * beta)
    return float(beta**2 * dF)


# --------------------------------------------------------------------------- losses


@dataclass(frozen=True)
class Losses:
    """Information and energy loss from the two independent routes."""

    dS: float
    dU: float
    dS_derivative: float
    dU_derivative: float

    @property
    def route_gap(self) -> float:
        """Disagreement of the two routes for ``dS``, relative to ``max(|dS|, 1e-6)``."""
        return abs(self.dS - self.dS_derivative) / max(abs(self.dS), 1e-6)


def losses(H, sd: SpectralDecomposition, beta: float, rel_step: float = FD_REL_STEP) -> Losses:
    """
    ``dS = S_tilde - S`` and ``dU = U_tilde - U``, plus the derivative route
    ``dS = -beta^2 <dH_eff/dbeta>_~``, ``dU = -beta <dH_eff/dbeta>_~``.
    """
    H = as_hermitian(H)
    pair = gibbs(H, beta)
    rho_t, _ = effective_gibbs(H, sd, beta)
    h_t = effective_hamiltonian_exact(H, sd, beta)
    S, U = von_neumann_entropy(pair.rho), internal_energy(H, pair.rho)
    St, Ut = observable_quantities(h_t, rho_t)
    dh = effective_hamiltonian_beta_derivative(H, sd, beta, rel_step)
    avg = internal_energy(dh, rho_t)
    return Losses(St - S, Ut - U, -beta**2 * avg, -beta * avg)


@dataclass(frozen=True)
class PerturbativeLosses:
    """Second-order predictions for the losses and the averaged-correction identity."""

    dS: float
    dU: float
    dS_from_H2: float
    dS_from_dH2: float
    avg_H2: float
    avg_dH2: float

    @property
    def identity_deviation(self) -> float:
        """``|<dH2/dbeta>_0 - <H2>_0 / beta|`` (times beta)."""
        return abs(self.dS_from_H2 - self.dS_from_dH2)


def perturbative_losses(bd: BohrDecomposition, h0, beta: float, lam: float, check: bool = True) -> PerturbativeLosses:
    """
    ``dS = lam^2 beta sum_{w>0} (1 - exp(-beta w)) / w <D_w D_w^H>_0``.

    Also returns ``-lam^2 beta <H2>_0`` and ``-lam^2 beta^2 <dH2/dbeta>_0``;
    with ``check=True`` their mismatch beyond ``1e-10`` (relative) raises
    :class:`NumericalError`.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    h0 = as_hermitian(h0)
    total = 0.0
    for w, d in bd.positive():
        weight = -math.expm1(-beta * w) / w
        total += weight * free_average(d @ d.conj().T, h0, beta).real
    avg_h2 = free_average(second_order_term(bd, beta), h0, beta).real
    avg_dh2 = free_average(second_order_beta_derivative(bd, beta), h0, beta).real
    out = PerturbativeLosses(
        dS=lam**2 * beta * total,
        dU=lam**2 * total,
        dS_from_H2=-(lam**2) * beta * avg_h2,
        dS_from_dH2=-(lam**2) * beta**2 * avg_dh2,
        avg_H2=avg_h2,
        avg_dH2=avg_dh2,
    )
    if check:
        scale = max(abs(avg_h2) / beta, 1e-300)
        dev = abs(avg_dh2 - avg_h2 / beta)
        if dev > 1e-10 * max(1.0, scale):
            raise NumericalError(
                f"<dH2/dbeta>_0 = {avg_dh2!r} differs from <H2>_0/beta = {avg_h2 / beta!r}"
            )
    return out


# --------------------------------------------------------------------------- free energies


@dataclass(frozen=True)
class FreeEnergies:
    F: float
    F_rho: float
    F_tilde_rho: float
    dF_rho: float
    dF_relative_entropy: float  # beta^{-1} (S(rho||rho_b) - S(P rho||P rho_b))
    definition_gap: float  # mismatch between the mean-value and relative-entropy forms


def nonequilibrium_free_energies(rho, H, H_tilde, sd: SpectralDecomposition, beta: float) -> FreeEnergies:
    """
    Exact and observable nonequilibrium free energies of ``rho``.

    ``F_rho = F + S(rho || rho_b) / beta`` and
    ``F_tilde_rho = F + S(P rho || rho_tilde_b) / beta``. The mean-value forms
    ``<H> - S(rho)/beta`` and ``<H_tilde>_P - S(P rho)/beta`` are evaluated
    too; ``definition_gap`` is the larger of the two mismatches.
    """
    H = as_hermitian(H)
    H_tilde = as_hermitian(H_tilde)
    pair = gibbs(H, beta)
    F = -pair.log_z / beta
    rho_t = 0.5 * (pinch(pair.rho, sd) + pinch(pair.rho, sd).conj().T)
    p_rho = pinch(rho, sd)
    p_rho = 0.5 * (p_rho + p_rho.conj().T)
    s_exact = relative_entropy(rho, pair.rho)
    s_obs = relative_entropy(p_rho, rho_t)
    F_rho = F + s_exact / beta
    F_tilde = F + s_obs / beta
    mean_exact = internal_energy(H, rho) - von_neumann_entropy(rho) / beta
    mean_obs = internal_energy(H_tilde, p_rho) - von_neumann_entropy(p_rho) / beta
    gap = max(abs(mean_exact - F_rho), abs(mean_obs - F_tilde))
    return FreeEnergies(F, F_rho, F_tilde, F_rho - F_tilde, (s_exact - s_obs) / beta, gap)


def rwa_hamiltonian(h0, bd: BohrDecomposition, lam: float) -> np.ndarray:
    """``H0 + lam D_0``."""
    return as_hermitian(h0) + lam * bd.d0


# --------------------------------------------------------------------------- report


@dataclass(frozen=True)
class ThermoReport:
    beta: float
    lam: float
    log_z: float
    F: float
    S: float
    U: float
    S_tilde: float
    U_tilde: float
    dS: float
    dU: float
    dS_derivative: float
    dU_derivative: float
    dF_at_rho_tilde: float
    dF_rwa_form: float
    dS_pert: float
    dU_pert: float
    order: int
    H_exact: np.ndarray = field(repr=False)
    H_pert_terms: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def Z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709.0 else math.inf

    @property
    def term_norms(self) -> list[float]:
        """Spectral norms of the per-order terms of the perturbative effective Hamiltonian."""
        return [float(np.linalg.norm(t, 2)) for t in self.H_pert_terms]

    @property
    def H_pert(self) -> np.ndarray:
        return sum(self.lam**k * t for k, t in enumerate(self.H_pert_terms))

    def scalars(self) -> dict[str, float]:
        keys = [
            "beta", "lam", "log_z", "F", "S", "U", "S_tilde", "U_tilde", "dS", "dU",
            "dS_derivative", "dU_derivative", "dF_at_rho_tilde", "dF_rwa_form", "dS_pert", "dU_pert",
        ]
        return {k: float(getattr(self, k)) for k in keys}


def thermo_report(
    h0,
    h_i,
    lam: float,
    beta: float,
    order: int = 2,
    sd: SpectralDecomposition | None = None,
    bd: BohrDecomposition | None = None,
) -> ThermoReport:
    """Assemble every exact and perturbative thermodynamic quantity at one ``(lam, beta)``."""
    h0 = as_hermitian(h0)
    h_i = as_hermitian(h_i)
    if sd is None:
        sd = spectral_decompose(h0)
    if bd is None:
        bd = bohr_decompose(h_i, sd)
    H = h0 + lam * h_i
    pair = gibbs(H, beta)
    rho_t, _ = effective_gibbs(H, sd, beta)
    h_t = effective_hamiltonian_exact(H, sd, beta)
    S, U = von_neumann_entropy(pair.rho), internal_energy(H, pair.rho)
    St, Ut = observable_quantities(h_t, rho_t)
    if lam == 0:
        dS_d = dU_d = 0.0
    else:
        dh = effective_hamiltonian_beta_derivative(H, sd, beta)
        avg = internal_energy(dh, rho_t)
        dS_d, dU_d = -beta**2 * avg, -beta * avg
    fe = nonequilibrium_free_energies(rho_t, H, h_t, sd, beta)
    dF_rwa = internal_energy(rwa_hamiltonian(h0, bd, lam) - h_t, rho_t)
    pl = perturbative_losses(bd, h0, beta, lam)
    expansion = effective_hamiltonian_perturbative(h0, h_i, lam, beta, order, sd=sd, bd=bd)
    return ThermoReport(
        beta=float(beta),
        lam=float(lam),
        log_z=pair.log_z,
        F=-pair.log_z / beta,
        S=S,
        U=U,
        S_tilde=St,
        U_tilde=Ut,
        dS=St - S,
        dU=Ut - U,
        dS_derivative=dS_d,
        dU_derivative=dU_d,
        dF_at_rho_tilde=fe.dF_rho,
        dF_rwa_form=dF_rwa,
        dS_pert=pl.dS,
        dU_pert=pl.dU,
        order=order,
        H_exact=h_t,
        H_pert_terms=expansion.terms,
    )
