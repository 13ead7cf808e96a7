"""
Spectral projectors of the free Hamiltonian and the pinching (dephasing) map.

The pinching ``X -> sum_e P_e X P_e`` is the infinite-time average of
``exp(i H0 t) X exp(-i H0 t)``; :func:`time_average` evaluates the finite-T
average by quadrature so the two can be compared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .operators import as_hermitian, commutator, eigh, hs_inner, maxabs, random_hermitian

PROPERTY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """
    Distinct eigenvalues of ``H0`` with orthonormal bases of their eigenspaces.

    ``bases[c]`` is a ``dim x r_c`` matrix with orthonormal columns; the
    projector onto level ``c`` is ``bases[c] @ bases[c]^H``.
    """

    energies: np.ndarray
    bases: tuple[np.ndarray, ...]
    cluster_tol: float

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def projectors(self) -> list[np.ndarray]:
        return [v @ v.conj().T for v in self.bases]

    @property
    def levels(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.energies.tolist(), self.projectors))

    @property
    def multiplicities(self) -> list[int]:
        return [v.shape[1] for v in self.bases]

    def __len__(self) -> int:
        return len(self.energies)

    def hamiltonian(self) -> np.ndarray:
        """Reassemble ``sum_e e P_e``."""
        return sum(e * p for e, p in self.levels)

    def drop_level(self, index: int) -> "SpectralDecomposition":
        """Copy with one level removed (used as a negative control)."""
        keep = [i for i in range(len(self)) if i != index]
        return SpectralDecomposition(
            self.energies[keep], tuple(self.bases[i] for i in keep), self.cluster_tol
        )


def default_cluster_tol(h0: np.ndarray) -> float:
    w = np.linalg.eigvalsh(h0)
    return 1e-9 * max(1.0, float(np.max(np.abs(w))))


def cluster_values(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """
    Group sorted values so that each group spans at most ``tol``.

    Returns index arrays into ``values`` (which must be ascending).
    """
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[start] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def spectral_decompose(h0, cluster_tol: float | None = None) -> SpectralDecomposition:
    """
    Cluster the eigenvalues of ``h0`` into distinct levels.

    Eigenvalues within ``cluster_tol`` of the first member of a cluster are
    merged; the level energy is the cluster mean. A ``cluster_tol`` larger
    than half the smallest genuine gap silently merges levels.
    """
    h0 = as_hermitian(h0)
    if cluster_tol is None:
        cluster_tol = default_cluster_tol(h0)
    if cluster_tol < 0:
        raise ValueError(f"cluster_tol must be nonnegative, got {cluster_tol}")
    w, v = eigh(h0)
    groups = cluster_values(w, cluster_tol)
    energies = np.array([w[g].mean() for g in groups])
    bases = tuple(v[:, g] for g in groups)
    return SpectralDecomposition(energies, bases, float(cluster_tol))


def _check_dim(x: np.ndarray, sd: SpectralDecomposition) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (sd.dim, sd.dim):
        raise DimensionError(f"matrix of shape {x.shape} does not match H0 of dim {sd.dim}")
    return x


def pinch(x, sd: SpectralDecomposition) -> np.ndarray:
    """``sum_e P_e X P_e``."""
    x = _check_dim(x, sd)
    out = np.zeros((sd.dim, sd.dim), dtype=complex)
    for v in sd.bases:
        out += v @ (v.conj().T @ x @ v) @ v.conj().T
    return out


def pinch_blocks(x, sd: SpectralDecomposition) -> list[np.ndarray]:
    """The diagonal blocks ``V_e^H X V_e`` in the stored eigenbases."""
    x = _check_dim(x, sd)
    return [v.conj().T @ x @ v for v in sd.bases]


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def time_average(x, h0, T: float, n_steps: int | None = None) -> np.ndarray:
    """
    ``(1/T) int_0^T exp(i H0 t) X exp(-i H0 t) dt`` by composite Simpson.

    The integrand is evaluated in the eigenbasis of ``h0``, where it is
    ``X_ij exp(i (e_i - e_j) t)``. By default ``n_steps`` gives at least 40
    points per period of the fastest Bohr frequency.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    h0 = as_hermitian(h0)
    x = np.asarray(x, dtype=complex)
    if x.shape != h0.shape:
        raise DimensionError(f"shapes {x.shape} and {h0.shape} differ")
    w, v = eigh(h0)
    xe = v.conj().T @ x @ v
    omega = (w[:, None] - w[None, :]).ravel()
    wmax = float(np.max(np.abs(omega)))
    if n_steps is None:
        n_steps = max(2, math.ceil(40 * T * wmax / (2 * math.pi)))
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    n_steps += n_steps % 2
    t = np.linspace(0.0, T, n_steps + 1)
    weights = _simpson_weights(n_steps, T / n_steps)
    avg = np.zeros(omega.size, dtype=complex)
    chunk = max(1, 2_000_000 // max(1, omega.size))
    for s in range(0, t.size, chunk):
        ts = t[s : s + chunk]
        avg += weights[s : s + chunk] @ np.exp(1j * np.outer(ts, omega))
    avg /= T
    return v @ (xe * avg.reshape(xe.shape)) @ v.conj().T


def choi_matrix(sd: SpectralDecomposition) -> np.ndarray:
    """``sum_ij |i><j| (x) P(|i><j|)``."""
    d = sd.dim
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            choi[i * d : (i + 1) * d, j * d : (j + 1) * d] = pinch(e, sd)
    return choi


def projector_property_report(
    sd: SpectralDecomposition, n_random_trials: int = 20, seed=0, tol: float = PROPERTY_TOL
) -> dict[str, dict]:
    """
    Check the conditional-expectation properties of the pinching on random inputs.

    Each entry maps a property name to ``{"deviation", "tolerance", "passed"}``;
    failures are reported, never raised. Deviations are relative to the size
    of the random inputs.
    """
    rng = np.random.default_rng(seed)
    d = sd.dim
    h0 = sd.hamiltonian()
    scale_h = max(1.0, maxabs(h0))
    dev = {
        "completeness": maxabs(sum(sd.projectors) - np.eye(d)),
        "trace_preservation": 0.0,
        "idempotence": 0.0,
        "self_adjointness": 0.0,
        "unitality": maxabs(pinch(np.eye(d), sd) - np.eye(d)),
        "commutes_with_H0": 0.0,
        "hermiticity_preservation": 0.0,
        "choi_positivity": max(0.0, -float(np.linalg.eigvalsh(choi_matrix(sd))[0])),
        "positivity_on_doubled_space": 0.0,
    }
    for _ in range(n_random_trials):
        seeds = rng.integers(0, 2**63 - 1, size=3)
        x = random_hermitian(d, seeds[0]) + 1j * random_hermitian(d, seeds[1])
        y = random_hermitian(d, seeds[2])
        nx = max(1.0, maxabs(x))
        px = pinch(x, sd)
        dev["trace_preservation"] = max(dev["trace_preservation"], abs(np.trace(px) - np.trace(x)) / nx)
        dev["idempotence"] = max(dev["idempotence"], maxabs(pinch(px, sd) - px) / nx)
        lhs = hs_inner(x, pinch(y, sd))
        rhs = hs_inner(px, y)
        dev["self_adjointness"] = max(dev["self_adjointness"], abs(lhs - rhs) / (nx * max(1.0, maxabs(y)) * d))
        dev["commutes_with_H0"] = max(dev["commutes_with_H0"], maxabs(commutator(h0, px)) / (nx * scale_h))
        py = pinch(y, sd)
        dev["hermiticity_preservation"] = max(dev["hermiticity_preservation"], maxabs(py - py.conj().T))
        vec = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
        vec /= np.linalg.norm(vec)
        # (P (x) id)(|v><v|) with v reshaped as a d x d coefficient matrix
        m = vec.reshape(d, d)
        blocks = [b @ (b.conj().T @ m) for b in sd.bases]
        out = sum(np.outer(bm.ravel(), bm.ravel().conj()) for bm in blocks)
        dev["positivity_on_doubled_space"] = max(
            dev["positivity_on_doubled_space"], max(0.0, -float(np.linalg.eigvalsh(out)[0]))
        )
    return {
        name: {"deviation": float(val), "tolerance": tol, "passed": bool(val <= tol)}
        for name, val in dev.items()
    }
