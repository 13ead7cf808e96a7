"""
Eigenoperators of the commutator superoperator ``[H0, .]``.

``H_I = sum_w D_w`` with ``[H0, D_w] = -w D_w``, so ``D_w`` lowers the energy
by ``w`` and ``D_{-w} = D_w^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .exceptions import DimensionError
from .operators import as_hermitian, expectation
from .pinching import SpectralDecomposition, cluster_values

DROP_REL = 1e-13


@dataclass(frozen=True)
class BohrDecomposition:
    """Bohr frequencies (ascending) and their eigenoperators."""

    frequencies: np.ndarray
    operators: tuple[np.ndarray, ...]
    freq_tol: float
    dim: int

    def __len__(self) -> int:
        return len(self.frequencies)

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return iter(zip(self.frequencies.tolist(), self.operators))

    def items(self) -> list[tuple[float, np.ndarray]]:
        return list(self)

    def index(self, omega: float, tol: float | None = None) -> int | None:
        """Position of the stored frequency matching ``omega`` within ``tol`` (default ``freq_tol``)."""
        tol = self.freq_tol if tol is None else tol
        freqs = self.frequencies
        i = int(np.searchsorted(freqs, omega))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(freqs) and abs(freqs[j] - omega) <= tol:
                if best is None or abs(freqs[j] - omega) < abs(freqs[best] - omega):
                    best = j
        return best

    def get(self, omega: float, default=None):
        i = self.index(omega)
        return default if i is None else self.operators[i]

    @property
    def d0(self) -> np.ndarray:
        """The secular part ``D_0`` (zero matrix if absent)."""
        d = self.get(0.0)
        return np.zeros((self.dim, self.dim), dtype=complex) if d is None else d

    def nonzero(self) -> list[tuple[float, np.ndarray]]:
        return [(w, d) for w, d in self if abs(w) > self.freq_tol]

    def positive(self) -> list[tuple[float, np.ndarray]]:
        return [(w, d) for w, d in self if w > self.freq_tol]

    def total(self) -> np.ndarray:
        return sum(self.operators)


def bohr_decompose(h_i, sd: SpectralDecomposition, freq_tol: float | None = None) -> BohrDecomposition:
    """
    Split ``h_i`` into ``D_w = sum_{e' - e = w} P_e H_I P_e'``.

    Energy differences are clustered with ``freq_tol`` (default: the
    decomposition's ``cluster_tol``); eigenoperators with Frobenius norm below
    ``1e-13 * ||H_I||`` are dropped.
    """
    h_i = as_hermitian(h_i)
    if h_i.shape != (sd.dim, sd.dim):
        raise DimensionError(f"H_I of shape {h_i.shape} does not match H0 of dim {sd.dim}")
    if freq_tol is None:
        freq_tol = sd.cluster_tol
    if freq_tol < 0:
        raise ValueError("freq_tol must be nonnegative")

    v = np.hstack(sd.bases)
    labels = np.concatenate([np.full(b.shape[1], i) for i, b in enumerate(sd.bases)])
    he = v.conj().T @ h_i @ v
    eps = sd.energies[labels]
    omega = eps[None, :] - eps[:, None]  # entry (i, j) lowers energy by e_j - e_i

    norm_hi = float(np.linalg.norm(h_i))
    support = np.abs(he) > 1e-15 * max(norm_hi, 1e-300)
    if not np.any(support):
        return BohrDecomposition(np.array([]), (), float(freq_tol), sd.dim)

    # cluster |w| on the nonnegative axis, then mirror, so w and -w always pair up
    absvals = np.unique(np.abs(omega[support]))
    groups = cluster_values(absvals, freq_tol)
    centers = []
    for g in groups:
        vals = absvals[g]
        centers.append(0.0 if vals[0] <= freq_tol else float(vals.mean()))
    centers = np.array(centers)
    edges = np.array([absvals[g][-1] for g in groups])
    idx = np.searchsorted(edges, np.abs(omega))
    idx = np.minimum(idx, len(centers) - 1)
    signed = np.sign(omega) * centers[idx]

    freqs, ops = [], []
    for w in np.unique(signed[support]):
        mask = support & (signed == w)
        block = np.where(mask, he, 0.0)
        if np.linalg.norm(block) <= DROP_REL * norm_hi:
            continue
        freqs.append(float(w))
        ops.append(v @ block @ v.conj().T)
    order = np.argsort(freqs)
    return BohrDecomposition(
        np.asarray(freqs)[order], tuple(ops[i] for i in order), float(freq_tol), sd.dim
    )


def free_average(op: np.ndarray, h0: np.ndarray, beta: float) -> complex:
    """``Tr(op exp(-beta H0)) / Tr exp(-beta H0)``."""
    w, v = np.linalg.eigh(h0)
    p = np.exp(-beta * (w - (w.min() if beta >= 0 else w.max())))
    p /= p.sum()
    rho0 = (v * p) @ v.conj().T
    return expectation(op, rho0)


def kms_check(bd: BohrDecomposition, h0, beta: float) -> float:
    """
    Largest violation of ``<D_w^H D_w>_0 = exp(-beta w) <D_w D_w^H>_0``.

    Averages are over the free Gibbs state of ``h0``. For ``w < 0`` the
    equivalent form with ``exp(beta w)`` on the left is used to avoid overflow.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    h0 = as_hermitian(h0)
    worst = 0.0
    for w, d in bd:
        lhs = free_average(d.conj().T @ d, h0, beta)
        rhs = free_average(d @ d.conj().T, h0, beta)
        if w >= 0:
            dev = abs(lhs - np.exp(-beta * w) * rhs)
        else:
            dev = abs(np.exp(beta * w) * lhs - rhs)
        worst = max(worst, float(dev))
    return worst
