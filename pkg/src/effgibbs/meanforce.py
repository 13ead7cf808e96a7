"""
Mean force Hamiltonian of the effective Gibbs state for a bipartite system.

The reservoir is the second tensor factor ``B``. The exact route traces the
pinched Gibbs operator over ``B`` and takes a spectral logarithm; the
perturbative route averages the full-space moments over the free reservoir
Gibbs state and feeds them through the same cumulant combiner as the
effective Hamiltonian. For a product coupling ``H_I = A (x) B`` the second
order is also available in terms of the eigenoperators of ``A`` and ``B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bohr import BohrDecomposition, bohr_decompose
from .cumulant import (
    MAX_ORDER,
    EffectiveHamiltonianExpansion,
    cumulant_combine,
    f,
    moment_explicit,
)
from .exact import _check_beta, gibbs
from .exceptions import DimensionError, DomainError, NumericalError
from .operators import ProductSpace, as_hermitian, eigh, embed, kron, maxabs, partial_trace
from .pinching import SpectralDecomposition, pinch, spectral_decompose


@dataclass(frozen=True)
class BipartiteModel:
    """
    ``H = H_A (x) I + I (x) H_B + lam H_I`` with ``B`` as the reservoir.

    ``coupling`` optionally records Hermitian factors ``(A, B)`` with
    ``H_I = A (x) B``; it is required only for the eigenoperator form of the
    second order.
    """

    H_A: np.ndarray
    H_B: np.ndarray
    H_I: np.ndarray
    lam: float
    beta: float
    coupling: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        ha, hb, hi = as_hermitian(self.H_A), as_hermitian(self.H_B), as_hermitian(self.H_I)
        object.__setattr__(self, "H_A", ha)
        object.__setattr__(self, "H_B", hb)
        object.__setattr__(self, "H_I", hi)
        n = ha.shape[0] * hb.shape[0]
        if hi.shape != (n, n):
            raise DimensionError(f"H_I of shape {hi.shape} does not match dims {ha.shape[0]} x {hb.shape[0]}")
        _check_beta(self.beta)
        if self.coupling is not None:
            a, b = (as_hermitian(x) for x in self.coupling)
            if a.shape != ha.shape or b.shape != hb.shape:
                raise DimensionError("coupling factors do not match H_A and H_B")
            if maxabs(kron(a, b) - hi) > 1e-12 * max(1.0, maxabs(hi)):
                raise DomainError("coupling factors do not reproduce H_I = A (x) B")
            object.__setattr__(self, "coupling", (a, b))

    @property
    def space(self) -> ProductSpace:
        return ProductSpace((self.H_A.shape[0], self.H_B.shape[0]))

    @property
    def H0(self) -> np.ndarray:
        return embed(self.H_A, self.space, 0) + embed(self.H_B, self.space, 1)

    @property
    def H(self) -> np.ndarray:
        return self.H0 + self.lam * self.H_I

    @property
    def log_z_B(self) -> float:
        return gibbs(self.H_B, self.beta).log_z

    @property
    def rho_B(self) -> np.ndarray:
        return gibbs(self.H_B, self.beta).rho


def reservoir_average(x: np.ndarray, model: BipartiteModel) -> np.ndarray:
    """``<X>_B = Tr_B(X (I (x) rho_B))``."""
    weight = embed(model.rho_B, model.space, 1)
    return partial_trace(np.asarray(x) @ weight, model.space, 1)


def _shifted(H: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    w, v = eigh(H)
    e0 = float(w.min())
    return (v * np.exp(-beta * (w - e0))) @ v.conj().T, e0


def _log_pd(m: np.ndarray, what: str) -> np.ndarray:
    w, v = eigh(0.5 * (m + m.conj().T))
    if w[0] <= 0:
        raise NumericalError(f"{what} is not positive definite: smallest eigenvalue {w[0]:.3e}")
    return (v * np.log(w)) @ v.conj().T


@dataclass(frozen=True)
class MeanForce:
    """Mean force Hamiltonian on ``A`` and its partition function ``Z_mf`` (as a log)."""

    H_mf: np.ndarray
    log_z_mf: float


def mean_force_exact(model: BipartiteModel, sd: SpectralDecomposition | None = None) -> MeanForce:
    """
    ``-beta^{-1} log(Tr_B P exp(-beta H) / Z_B)``.

    Computed with the ground energy of ``H`` factored out; ``log_z_mf`` is
    ``log Tr exp(-beta H_mf)``, which equals ``log Z - log Z_B``.
    """
    beta = model.beta
    if sd is None:
        sd = spectral_decompose(model.H0)
    g, e0 = _shifted(model.H, beta)
    reduced = partial_trace(pinch(g, sd), model.space, 1)
    h = e0 * np.eye(reduced.shape[0]) - _log_pd(reduced, "reduced pinched Gibbs operator") / beta
    h = h + model.log_z_B / beta * np.eye(reduced.shape[0])
    h = 0.5 * (h + h.conj().T)
    return MeanForce(h, gibbs(h, beta).log_z)


def mean_force_standard(model: BipartiteModel) -> MeanForce:
    """Conventional mean force Hamiltonian ``-beta^{-1} log(Tr_B exp(-beta H) / Z_B)`` (no pinching)."""
    beta = model.beta
    g, e0 = _shifted(model.H, beta)
    reduced = partial_trace(g, model.space, 1)
    h = e0 * np.eye(reduced.shape[0]) - _log_pd(reduced, "reduced Gibbs operator") / beta
    h = h + model.log_z_B / beta * np.eye(reduced.shape[0])
    h = 0.5 * (h + h.conj().T)
    return MeanForce(h, gibbs(h, beta).log_z)


def mean_force_perturbative(
    model: BipartiteModel,
    order: int,
    bd: BohrDecomposition | None = None,
    max_order: int = MAX_ORDER,
    check: bool = True,
) -> EffectiveHamiltonianExpansion:
    """
    Expansion of the effective mean force Hamiltonian up to ``lam**order``.

    Full-space moments are averaged over the reservoir state and combined
    exactly as for the effective Hamiltonian; ``terms[0] = H_A``. With
    ``check=True`` the second-order term is compared with the closed form
    :func:`mean_force_order2_closed` and a mismatch raises
    :class:`NumericalError`.
    """
    if order < 0 or order > max_order:
        raise ValueError(f"order must be in [0, {max_order}], got {order}")
    beta = model.beta
    if bd is None:
        bd = bohr_decompose(model.H_I, spectral_decompose(model.H0))
    terms = [model.H_A]
    if order >= 1:
        avg = [reservoir_average(moment_explicit(k, beta, bd), model) for k in range(1, order + 1)]
        for c in cumulant_combine(avg, order):
            t = -c / beta
            terms.append(0.5 * (t + t.conj().T))
    if check and order >= 2:
        closed = mean_force_order2_closed(model, bd)
        dev = maxabs(terms[2] - closed)
        if dev > 1e-10 * max(1.0, maxabs(closed)):
            raise NumericalError(f"mean force second order disagrees with the closed form by {dev:.3e}")
    return EffectiveHamiltonianExpansion(float(beta), float(model.lam), tuple(terms), None, bd)


def mean_force_order2_closed(model: BipartiteModel, bd: BohrDecomposition) -> np.ndarray:
    """
    ``-(beta/2)(sum_{w != 0} f(beta w) <D_w D_w^H>_B + <D_0^2>_B - <D_0>_B^2)``.
    """
    beta = model.beta
    acc = np.zeros_like(model.H_A)
    for w, d in bd.nonzero():
        acc += float(f(beta * w)) * reservoir_average(d @ d.conj().T, model)
    d0 = bd.d0
    m0 = reservoir_average(d0, model)
    acc += reservoir_average(d0 @ d0, model) - m0 @ m0
    return -0.5 * beta * acc


# --------------------------------------------------------------------------- eigenoperator form


@dataclass(frozen=True)
class SubsystemBohr:
    """Eigenoperators of ``[H_A, .]`` acting on ``A`` and of ``[H_B, .]`` acting on ``B``."""

    A_terms: BohrDecomposition
    B_terms: BohrDecomposition

    def reconstruct_D(self, omega: float, tol: float) -> np.ndarray:
        """``D_w = sum_{w1} A_{w1}^H (x) B_{w1 + w}``."""
        dim = self.A_terms.dim * self.B_terms.dim
        out = np.zeros((dim, dim), dtype=complex)
        for w1, a in self.A_terms:
            j = self.B_terms.index(w1 + omega, tol=tol)
            if j is not None:
                out += kron(a.conj().T, self.B_terms.operators[j])
        return out


def subsystem_bohr(model: BipartiteModel) -> SubsystemBohr:
    """Factor-wise Bohr decompositions of the coupling ``H_I = A (x) B``."""
    if model.coupling is None:
        raise DomainError("subsystem_bohr needs a product coupling (A, B)")
    a, b = model.coupling
    return SubsystemBohr(
        bohr_decompose(a, spectral_decompose(model.H_A)),
        bohr_decompose(b, spectral_decompose(model.H_B)),
    )


def _thermal(op: np.ndarray, model: BipartiteModel) -> complex:
    return complex(np.einsum("ij,ji->", op, model.rho_B))


def mean_force_explicit_order2(sb: SubsystemBohr, model: BipartiteModel) -> EffectiveHamiltonianExpansion:
    """
    Second-order mean force Hamiltonian from the factor eigenoperators.

    ``H_A + lam <B_0> A_0 - lam^2 (beta/2)[sum_{w1 != 0} (sum_v f(beta (v - w1)) <B_v B_v^H>) A_{w1}^H A_{w1}
    + (sum_v f(beta v) <B_v B_v^H> - <B_0>^2) A_0^2]``, where ``v`` runs over the
    Bohr frequencies of ``H_B`` and ``f(0) = 1``.
    """
    beta = model.beta
    A, B = sb.A_terms, sb.B_terms
    bb = [(v, _thermal(d @ d.conj().T, model).real) for v, d in B]
    b0 = _thermal(B.d0, model)
    a0 = A.d0
    second = np.zeros_like(model.H_A)
    for w1, a in A.nonzero():
        coef = sum(float(f(beta * (v - w1))) * val for v, val in bb)
        second += coef * (a.conj().T @ a)
    coef0 = sum(float(f(beta * v)) * val for v, val in bb) - (b0 * b0).real
    second += coef0 * (a0 @ a0)
    second = -0.5 * beta * second
    first = b0 * a0
    terms = (model.H_A, 0.5 * (first + first.conj().T), 0.5 * (second + second.conj().T))
    return EffectiveHamiltonianExpansion(float(beta), float(model.lam), terms, None, None)


def thermal_selection_rules(B: BohrDecomposition, model: BipartiteModel) -> dict[str, float]:
    """
    Deviations from ``<B_w>_B = delta_{w,0} <B_0>_B`` and
    ``<B_w1 B_w2^H>_B = delta_{w1,w2} <B_w1 B_w1^H>_B``.
    """
    single = 0.0
    pair = 0.0
    for w, d in B:
        if abs(w) > B.freq_tol:
            single = max(single, abs(_thermal(d, model)))
    for i, (w1, d1) in enumerate(B):
        for j, (w2, d2) in enumerate(B):
            if i != j:
                pair = max(pair, abs(_thermal(d1 @ d2.conj().T, model)))
    return {"single": single, "pair": pair}
