"""
Dense complex matrix substrate.

Hermitian operators are plain ``numpy.ndarray`` objects that have passed
through :func:`as_hermitian`; everything here is a pure function of its
inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionError, DomainError, NotHermitianError, NumericalError

HERM_TOL = 1e-12


def maxabs(a: np.ndarray) -> float:
    """Max-norm (largest entry modulus)."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    return a


def as_hermitian(a, herm_tol: float = HERM_TOL) -> np.ndarray:
    """
    Validate and symmetrize a Hermitian matrix.

    Accepts ``a`` if ``max|a - a^H| <= herm_tol * max(1, max|a|)`` and returns
    ``(a + a^H) / 2`` as a complex array. Raises :class:`NotHermitianError`
    otherwise.
    """
    a = _check_square(np.asarray(a, dtype=complex))
    if herm_tol < 0:
        raise ValueError("herm_tol must be nonnegative")
    dev = maxabs(a - a.conj().T)
    if dev > herm_tol * max(1.0, maxabs(a)):
        raise NotHermitianError(
            f"matrix of dim {a.shape[0]} is not Hermitian: max|A - A^H| = {dev:.3e}"
        )
    return 0.5 * (a + a.conj().T)


def check_same_dim(*mats: np.ndarray) -> int:
    dims = {np.shape(m) for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")
    shape = dims.pop()
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError(f"expected square matrices, got shape {shape}")
    return shape[0]


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix.

    Returns ascending eigenvalues ``w`` and a unitary ``v`` with
    ``a = v @ diag(w) @ v^H``.
    """
    a = _check_square(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver did not converge (dim={a.shape[0]}, max|A|={maxabs(a):.3e})"
        ) from exc
    return w, v


def herm_func(a: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a real scalar function spectrally: ``V f(w) V^H``."""
    w, v = eigh(a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fw = np.asarray(f(w), dtype=float)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(
            f"function not finite at eigenvalue {w[bad][0]!r} (dim={a.shape[0]})"
        )
    out = (v * fw) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def expmh(a: np.ndarray) -> np.ndarray:
    return herm_func(a, np.exp)


def logmh(a: np.ndarray) -> np.ndarray:
    """Principal logarithm of a Hermitian positive definite matrix."""
    w = np.linalg.eigvalsh(_check_square(a))
    if w[0] <= 0:
        raise DomainError(f"log of matrix with nonpositive eigenvalue {w[0]!r}")
    return herm_func(a, np.log)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hs_inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``Tr(x^H y)``."""
    check_same_dim(x, y)
    return complex(np.vdot(x, y))


@dataclass(frozen=True)
class ProductSpace:
    """Ordered tensor product of finite-dimensional factors."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self) -> int:
        return len(self.dims)


def kron(*ops: np.ndarray) -> np.ndarray:
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def embed(a: np.ndarray, space: ProductSpace, slot: int) -> np.ndarray:
    """Place ``a`` on factor ``slot`` with identities on every other factor."""
    if not 0 <= slot < len(space):
        raise DimensionError(f"slot {slot} out of range for {len(space)} factors")
    a = np.asarray(a)
    if a.shape != (space.dims[slot], space.dims[slot]):
        raise DimensionError(
            f"operator of shape {a.shape} does not fit factor {slot} of dim {space.dims[slot]}"
        )
    factors = [np.eye(d) for d in space.dims]
    factors[slot] = a
    return kron(*factors)


def partial_trace(x: np.ndarray, space: ProductSpace, traced_slot: int) -> np.ndarray:
    """Trace out one factor; the remaining factors keep their order."""
    x = np.asarray(x)
    n = space.total_dim
    if x.shape != (n, n):
        raise DimensionError(f"matrix of shape {x.shape} does not match space of dim {n}")
    if not 0 <= traced_slot < len(space):
        raise DimensionError(f"slot {traced_slot} out of range for {len(space)} factors")
    k = len(space)
    t = x.reshape(space.dims + space.dims)
    t = np.trace(t, axis1=traced_slot, axis2=traced_slot + k)
    rest = [d for i, d in enumerate(space.dims) if i != traced_slot]
    m = int(np.prod(rest)) if rest else 1
    return t.reshape(m, m)


def random_hermitian(dim: int, seed=None, scale: float = 1.0) -> np.ndarray:
    """Gaussian random Hermitian matrix ``(G + G^H)/2``, deterministic for a fixed seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (g + g.conj().T)


def random_density_matrix(dim: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Random full- or reduced-rank density matrix (Ginibre construction)."""
    rng = np.random.default_rng(seed)
    r = dim if rank is None else rank
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_unitary(dim: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    """``Tr(op rho)``."""
    check_same_dim(op, rho)
    return complex(np.einsum("ij,ji->", op, rho))


def direct_sum_blocks(blocks: Sequence[tuple[np.ndarray, np.ndarray]], dim: int) -> np.ndarray:
    """Assemble ``sum_c V_c B_c V_c^H`` from (basis, block) pairs."""
    out = np.zeros((dim, dim), dtype=complex)
    for v, b in blocks:
        out += v @ b @ v.conj().T
    return out
