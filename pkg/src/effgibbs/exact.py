"""
Nonperturbative effective Gibbs state and effective Hamiltonian.

``H_eff = -beta^{-1} log P(exp(-beta H))`` is evaluated block by block in the
eigenspaces of ``H0``: the pinched Gibbs operator is block diagonal, so its
logarithm is the direct sum of the blockwise spectral logarithms. A
quadrature of the integral representation
``log M = int_0^1 (M - I)(t (M - I) + I)^{-1} dt`` serves as an independent
check of the matrix logarithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, NumericalError
from .operators import as_hermitian, eigh, maxabs
from .pinching import SpectralDecomposition, pinch, pinch_blocks

BETA_CAP = 1e4


@dataclass(frozen=True)
class GibbsPair:
    """Gibbs state ``rho = exp(-beta H) / Z`` together with ``log Z``."""

    beta: float
    H: np.ndarray
    rho: np.ndarray
    log_z: float

    @property
    def Z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709.0 else math.inf

    @property
    def free_energy(self) -> float:
        return -self.log_z / self.beta


def _check_beta(beta: float, allow_negative: bool = False) -> float:
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    if beta == 0 or (beta < 0 and not allow_negative):
        raise ValueError(f"beta must be positive, got {beta}")
    if abs(beta) > BETA_CAP:
        raise ValueError(f"|beta| = {abs(beta):.3e} exceeds the cap {BETA_CAP:.0e}")
    return beta


def _shift(w: np.ndarray, beta: float) -> float:
    """Energy offset that keeps ``exp(-beta (w - shift))`` at most 1."""
    return float(w.min() if beta > 0 else w.max())


def gibbs(H, beta: float, allow_negative: bool = False) -> GibbsPair:
    """
    Gibbs state of ``H`` at inverse temperature ``beta``.

    Exponentials are taken after subtracting the ground energy (the top
    energy for negative ``beta``, which requires ``allow_negative=True``), so
    ``log Z`` is exact even when ``Z`` itself would overflow.
    """
    beta = _check_beta(beta, allow_negative)
    H = as_hermitian(H)
    w, v = eigh(H)
    e0 = _shift(w, beta)
    p = np.exp(-beta * (w - e0))
    total = p.sum()
    rho = (v * (p / total)) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    log_z = math.log(total) - beta * e0
    return GibbsPair(beta, H, rho, log_z)


def _shifted_gibbs_operator(H: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """``exp(-beta (H - e0))`` and the offset ``e0``."""
    w, v = eigh(H)
    e0 = _shift(w, beta)
    return (v * np.exp(-beta * (w - e0))) @ v.conj().T, e0


def effective_gibbs(H, sd: SpectralDecomposition, beta: float, allow_negative: bool = False):
    """
    Pinched Gibbs state ``P rho_beta`` and the (shared) partition function.

    Returns ``(rho_tilde, Z)``.
    """
    pair = gibbs(H, beta, allow_negative)
    rho_t = pinch(pair.rho, sd)
    return 0.5 * (rho_t + rho_t.conj().T), pair.Z


def effective_hamiltonian_exact(H, sd: SpectralDecomposition, beta: float, allow_negative: bool = False) -> np.ndarray:
    """
    ``-beta^{-1} log P(exp(-beta H))`` by blockwise spectral logarithm.

    The principal (Hermitian) logarithm of each positive definite block is
    used. Raises :class:`NumericalError` if a block has lost positive
    definiteness in floating point (deep low-temperature underflow).
    """
    beta = _check_beta(beta, allow_negative)
    H = as_hermitian(H)
    if H.shape != (sd.dim, sd.dim):
        raise DomainError(f"H of shape {H.shape} does not match H0 of dim {sd.dim}")
    g, e0 = _shifted_gibbs_operator(H, beta)
    out = np.zeros_like(H)
    for c, (v, block) in enumerate(zip(sd.bases, pinch_blocks(g, sd))):
        bw, bv = eigh(0.5 * (block + block.conj().T))
        if bw[0] <= 0:
            raise NumericalError(
                f"pinched Gibbs block {c} (energy {sd.energies[c]:.6g}, size {len(bw)}) "
                f"has nonpositive eigenvalue {bw[0]:.3e} at beta={beta:.6g}"
            )
        logb = (bv * np.log(bw)) @ bv.conj().T
        out += v @ logb @ v.conj().T
    h_eff = e0 * np.eye(sd.dim) - out / beta
    return 0.5 * (h_eff + h_eff.conj().T)


def _graded_panels(depth: int) -> np.ndarray:
    """Breakpoints on [0, 1] refined geometrically toward both ends."""
    inner = [2.0 ** -k for k in range(depth, 0, -1)]
    return np.unique(np.array([0.0] + inner + [1.0 - x for x in inner[::-1]] + [1.0]))


def richter_log_oracle(M, n_grid: int = 64) -> np.ndarray:
    """
    ``log M = int_0^1 (M - I)(t (M - I) + I)^{-1} dt`` by composite Gauss-Legendre quadrature.

    ``M`` is first rescaled by ``c = 1 / sqrt(lmin * lmax)`` so that its
    spectrum is centred on 1 multiplicatively; ``log c`` is added back
    afterwards. The integrand of an eigenvalue ``mu`` varies on a scale
    ``min(mu, 1/mu)`` near the ends of the interval, so panels are refined
    geometrically down to that scale and each panel gets ``n_grid`` nodes.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    M = as_hermitian(M, herm_tol=1e-10)
    w = np.linalg.eigvalsh(M)
    if w[0] <= 0:
        raise DomainError(f"log of matrix with nonpositive eigenvalue {w[0]!r}")
    c = math.sqrt(w[0] * w[-1])
    eye = np.eye(M.shape[0])
    A = M / c - eye
    depth = max(1, math.ceil(0.5 * math.log2(w[-1] / w[0])) + 2)
    edges = _graded_panels(depth)
    x, wt = np.polynomial.legendre.leggauss(n_grid)
    acc = np.zeros_like(M)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        for xi, wi in zip(x, wt):
            t = lo + half * (xi + 1.0)
            acc += (half * wi) * np.linalg.solve((t * A + eye).T, A.T).T
    out = acc + math.log(c) * eye
    return 0.5 * (out + out.conj().T)


def spectral_vs_richter(H, sd: SpectralDecomposition, beta: float, n_grid: int = 64) -> float:
    """Max-norm gap between the spectral and integral logarithms of ``P exp(-beta (H - e0))``."""
    g, _ = _shifted_gibbs_operator(as_hermitian(H), _check_beta(beta))
    m = pinch(g, sd)
    w, v = eigh(0.5 * (m + m.conj().T))
    spectral = (v * np.log(w)) @ v.conj().T
    return maxabs(spectral - richter_log_oracle(m, n_grid)) / max(1.0, maxabs(spectral))
