"""
Perturbative effective Hamiltonian.

The pinched Dyson series ``P V(beta) = I + sum_k lam^k M_k(beta)`` is
converted into ``log P V(beta)`` by summing over ordered compositions, and
``H_eff = H0 - beta^{-1} log P V(beta)``. The moments ``M_k`` are built from
the Bohr decomposition of ``H_I`` with closed-form coefficients ``g_k``; an
independent nested-quadrature route is kept for cross-checks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import expm

from .bohr import BohrDecomposition, bohr_decompose
from .exceptions import NumericalError
from .operators import as_hermitian, maxabs
from .pinching import SpectralDecomposition, pinch, spectral_decompose

MAX_ORDER = 4
MAX_QUADRATURE_ORDER = 4
# closed forms are used only when every pair of exponent nodes satisfies beta*|s_i - s_j| >= SEPARATION
SEPARATION = 0.05
SERIES_RADIUS = 0.5
_SERIES_TERMS = 24

# Test hook: -1.0 flips the sign of the closed second-order term (negative control for verify).
_SECOND_ORDER_SIGN = 1.0


def _set_second_order_corruption(enabled: bool) -> None:
    global _SECOND_ORDER_SIGN
    _SECOND_ORDER_SIGN = -1.0 if enabled else 1.0


# --------------------------------------------------------------------------- f, f1


_F_COEF = np.array([2.0 * (-1) ** n / math.factorial(n + 2) for n in range(_SERIES_TERMS)])
_F1_COEF = np.array(
    [2.0 * (-1) ** m * (m - 1) / math.factorial(m) for m in range(2, _SERIES_TERMS + 2)]
)


def _series(x: np.ndarray, coef: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(x, coef)


def f(x):
    """
    ``2 (x + exp(-x) - 1) / x^2``, with ``f(0) = 1``.

    Strictly positive for every real ``x``; small arguments use the Taylor
    series to avoid cancellation.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_RADIUS
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = 2.0 * (x + np.expm1(-x)) / x**2
    out = np.where(small, _series(x, _F_COEF), direct)
    return out[()] if out.ndim == 0 else out


def f1(x):
    """``2 (1 - exp(-x)(1 + x)) / x^2``, with ``f1(0) = 1``; equals ``d(x f(x))/dx``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_RADIUS
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = 2.0 * (-np.expm1(-x) - x * np.exp(-x)) / x**2
    out = np.where(small, _series(x, _F1_COEF), direct)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------- h_n, g_k


def _separated(nodes: Sequence[float], beta: float) -> bool:
    s = np.sort(np.asarray(nodes, dtype=float))
    return bool(np.all(beta * np.diff(s) >= SEPARATION))


def _exp_divided_difference(beta: float, nodes: Sequence[float]) -> float:
    """
    ``int_{simplex} exp(-sum_j t_j s_j)`` over ``{t >= 0, sum t = beta}``.

    This is the corner entry of ``expm(beta * B)`` for the bidiagonal matrix
    with diagonal ``-s`` and unit superdiagonal; it stays accurate when nodes
    coincide. Nodes are centred first, which only rescales the result.
    """
    s = np.asarray(nodes, dtype=float)
    n = len(s) - 1
    shift = 0.5 * (s.max() + s.min())
    b = np.diag(-(s - shift)) + np.diag(np.ones(n), 1)
    return float(expm(beta * b)[0, n] * math.exp(-beta * shift))


def h_n(beta: float, omegas: Sequence[float]) -> float:
    """
    Nested exponential integral
    ``int_0^beta db1 ... int_0^{b_{n-1}} db_n exp(-sum_j b_j w_j)``.

    Uses the closed product formula when the partial sums of ``omegas`` (with
    a leading 0) are pairwise well separated; otherwise the confluent limit is
    taken through :func:`_exp_divided_difference`.
    """
    omegas = [float(w) for w in omegas]
    n = len(omegas)
    if n == 0:
        return 1.0
    if beta == 0:
        return 0.0
    s = [0.0] + list(itertools.accumulate(omegas))
    if not _separated(s, beta):
        return _exp_divided_difference(beta, s)
    total = 1.0 / math.prod(s[1:])
    for p in range(1, n + 1):
        left = math.prod(s[p] - s[m - 1] for m in range(1, p + 1))
        right = math.prod(s[k] - s[p] for k in range(p + 1, n + 1))
        total += (-1) ** p * math.exp(-beta * s[p]) / (left * right)
    return total


def g_k(beta: float, omegas: Sequence[float]) -> float:
    """
    Coefficient of ``D_{w1} ... D_{w_{k-1}} D_{-w1-...-w_{k-1}}`` in ``(-1)^k M_k``.

    ``omegas`` has ``k - 1`` entries. Equals ``h_k(beta; w_1..w_{k-1}, -sum w)``;
    the closed form holds when the partial sums are nonzero and distinct,
    otherwise the analytic limit is evaluated. ``g_2`` goes through ``f``.
    """
    omegas = [float(w) for w in omegas]
    k = len(omegas) + 1
    if beta == 0:
        return 0.0
    if k == 1:
        return float(beta)
    if k == 2:
        return 0.5 * beta**2 * float(f(beta * omegas[0]))
    s = list(itertools.accumulate(omegas))
    if not _separated([0.0] + s, beta):
        return h_n(beta, omegas + [-s[-1]])
    first = (beta - sum(1.0 / x for x in s)) / math.prod(s)
    rest = 0.0
    for p in range(1, k):
        left = math.prod(s[p - 1] - s[m - 2] for m in range(2, p + 1))
        right = math.prod(s[q - 1] - s[p - 1] for q in range(p + 1, k))
        rest += (-1) ** p * math.exp(-beta * s[p - 1]) / (left * s[p - 1] ** 2 * right)
    return first - rest


# --------------------------------------------------------------------------- moments


@dataclass(frozen=True)
class MomentSeries:
    """Pinched Dyson moments ``M_1 .. M_order`` at inverse temperature ``beta``."""

    beta: float
    moments: tuple[np.ndarray, ...]

    @property
    def order(self) -> int:
        return len(self.moments)


def moment_explicit(k: int, beta: float, bd: BohrDecomposition) -> np.ndarray:
    """
    ``M_k = (-1)^k sum g_k(beta; w_1..w_{k-1}) D_{w1} ... D_{w_{k-1}} D_{-sum w}``.

    Tuples whose completing frequency is not present contribute nothing.
    Summation order is fixed, so results are reproducible bit for bit.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    dim = bd.dim
    if k == 1:
        return -beta * bd.d0
    freqs = bd.frequencies
    ops = bd.operators
    acc = np.zeros((dim, dim), dtype=complex)
    for tup in itertools.product(range(len(bd)), repeat=k - 1):
        ws = freqs[list(tup)]
        last = bd.index(-float(ws.sum()), tol=k * bd.freq_tol)
        if last is None:
            continue
        prod = ops[tup[0]]
        for i in tup[1:]:
            prod = prod @ ops[i]
        acc += g_k(beta, ws) * (prod @ ops[last])
    return (-1) ** k * acc


@lru_cache(maxsize=32)
def _gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def moment_quadrature(
    k: int, beta: float, h0, h_i, sd: SpectralDecomposition, n_grid: int = 24
) -> np.ndarray:
    """
    ``(-1)^k int_{beta >= b1 >= ... >= bk >= 0} P H_I(b1) ... H_I(bk)`` by nested Gauss-Legendre.

    ``H_I(b) = exp(b H0) H_I exp(-b H0)``. Each nested variable is mapped to
    ``[0, b_prev]``, so the cost is ``n_grid**k`` matrix products.
    """
    if k > MAX_QUADRATURE_ORDER:
        raise ValueError(f"moment_quadrature is limited to k <= {MAX_QUADRATURE_ORDER}, got {k}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_grid < 8:
        raise ValueError("n_grid must be >= 8")
    h0 = as_hermitian(h0)
    h_i = as_hermitian(h_i)
    dim = h0.shape[0]
    if beta == 0:
        return np.zeros((dim, dim), dtype=complex)
    w, v = np.linalg.eigh(h0)
    he = v.conj().T @ h_i @ v
    diff = w[:, None] - w[None, :]
    nodes, weights = _gauss_legendre_unit(n_grid)

    def interaction(b: float) -> np.ndarray:
        return np.exp(b * diff) * he

    def nested(level: int, upper: float) -> np.ndarray:
        acc = np.zeros((dim, dim), dtype=complex)
        for u, wt in zip(nodes, weights):
            b = upper * u
            term = interaction(b)
            if level < k:
                term = term @ nested(level + 1, b)
            acc += (wt * upper) * term
        return acc

    full = v @ nested(1, float(beta)) @ v.conj().T
    return (-1) ** k * pinch(full, sd)


def moment_series(beta: float, bd: BohrDecomposition, order: int) -> MomentSeries:
    return MomentSeries(float(beta), tuple(moment_explicit(k, beta, bd) for k in range(1, order + 1)))


# --------------------------------------------------------------------------- cumulants


def compositions(n: int) -> Iterator[tuple[int, ...]]:
    """Ordered compositions of ``n`` into positive parts, in lexicographic order."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest


def cumulant_combine(ms: MomentSeries | Sequence[np.ndarray], order: int) -> list[np.ndarray]:
    """
    Coefficients ``C_1 .. C_order`` of ``log(I + sum_k lam^k M_k)``.

    ``C_n = sum over compositions k_0 + ... + k_m = n of
    (-1)^m / (m + 1) M_{k_0} ... M_{k_m}``.
    """
    moments = ms.moments if isinstance(ms, MomentSeries) else tuple(ms)
    if order > len(moments):
        raise ValueError(f"order {order} exceeds the {len(moments)} available moments")
    out = []
    for n in range(1, order + 1):
        acc = None
        for comp in compositions(n):
            m = len(comp) - 1
            prod = moments[comp[0] - 1]
            for part in comp[1:]:
                prod = prod @ moments[part - 1]
            term = ((-1) ** m / (m + 1)) * prod
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


# --------------------------------------------------------------------------- effective Hamiltonian


@dataclass(frozen=True)
class EffectiveHamiltonianExpansion:
    """``H_eff = sum_k lam^k terms[k]`` with ``terms[0] = H0`` and ``terms[1] = D_0``."""

    beta: float
    lam: float
    terms: tuple[np.ndarray, ...]
    sd: SpectralDecomposition | None = field(default=None, repr=False, compare=False)
    bd: BohrDecomposition | None = field(default=None, repr=False, compare=False)

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    @property
    def assembled(self) -> np.ndarray:
        return self.truncated(self.order)

    def truncated(self, order: int) -> np.ndarray:
        return sum(self.lam**k * self.terms[k] for k in range(order + 1))


def second_order_term(bd: BohrDecomposition, beta: float) -> np.ndarray:
    """``-(beta/2) sum_{w != 0} f(beta w) D_w D_w^H``."""
    acc = np.zeros((bd.dim, bd.dim), dtype=complex)
    for w, d in bd.nonzero():
        acc -= 0.5 * beta * float(f(beta * w)) * (d @ d.conj().T)
    return _SECOND_ORDER_SIGN * acc


def second_order_beta_derivative(bd: BohrDecomposition, beta: float) -> np.ndarray:
    """``d/dbeta`` of :func:`second_order_term`: ``-(1/2) sum_{w != 0} f1(beta w) D_w D_w^H``."""
    acc = np.zeros((bd.dim, bd.dim), dtype=complex)
    for w, d in bd.nonzero():
        acc -= 0.5 * float(f1(beta * w)) * (d @ d.conj().T)
    return acc


def effective_hamiltonian_perturbative(
    h0,
    h_i,
    lam: float,
    beta: float,
    order: int,
    sd: SpectralDecomposition | None = None,
    bd: BohrDecomposition | None = None,
    check: bool = False,
    max_order: int = MAX_ORDER,
) -> EffectiveHamiltonianExpansion:
    """
    Expansion of the effective Hamiltonian up to ``lam**order``.

    With ``check=True`` the second-order term from the moment pipeline is
    compared with the closed ``f``-form and a mismatch raises
    :class:`NumericalError`.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > max_order:
        raise ValueError(f"order {order} exceeds the cap {max_order}")
    if beta <= 0:
        raise ValueError("beta must be positive")
    h0 = as_hermitian(h0)
    h_i = as_hermitian(h_i)
    if sd is None:
        sd = spectral_decompose(h0)
    if bd is None:
        bd = bohr_decompose(h_i, sd)
    terms = [h0]
    if order >= 1:
        ms = moment_series(beta, bd, order)
        for c in cumulant_combine(ms, order):
            t = -c / beta
            terms.append(0.5 * (t + t.conj().T))
    if check and order >= 2:
        closed = second_order_term(bd, beta)
        dev = maxabs(terms[2] - closed)
        scale = max(1.0, maxabs(closed))
        if dev > 1e-10 * scale:
            raise NumericalError(
                f"second-order term disagrees with the closed form by {dev:.3e}"
            )
    return EffectiveHamiltonianExpansion(float(beta), float(lam), tuple(terms), sd, bd)
