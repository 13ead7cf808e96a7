"""
Builders for the example systems and their closed-form second-order results.

Three families are supported, each with an off-resonance variant
(``omega_a != omega_b``) and a resonance variant where the free Hamiltonian is
``omega_a (n_a + n_b)`` and the detuning term ``delta_omega n_b`` is part of
the perturbation:

* ``two_tls``: two two-level systems,
* ``two_osc``: two harmonic oscillators (truncated Fock spaces),
* ``tls_osc``: a two-level system ``a`` and an oscillator ``b``.

The coupling is ``(s_a + s_a^H)(conj(g) s_b + g s_b^H)`` with ``s`` the
lowering operator of each factor. A ``custom`` family carries user matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .cumulant import f
from .exceptions import DimensionError, DomainError
from .operators import ProductSpace, as_hermitian, embed, kron

FAMILIES = ("two_tls", "two_osc", "tls_osc", "custom")
DEFAULT_CUTOFF = 20
MIN_OSC_BETA_OMEGA = 0.1
LARGE_CUTOFF = 40
EDGE_LAYERS = 2


@dataclass(frozen=True)
class ModelSpec:
    family: str
    omega_a: float = 1.0
    omega_b: float = 1.0
    g: complex = 1.0
    delta_omega: float = 0.0
    lam: float = 0.1
    cutoff: int = DEFAULT_CUTOFF
    resonant: bool = False
    custom: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "g", complex(self.g))
        if self.family == "custom":
            if not self.custom:
                raise ValueError("custom family needs a 'custom' block with dims, H0 and HI")
            return
        if not (self.omega_a > 0 and self.omega_b > 0):
            raise ValueError(f"omega_a and omega_b must be positive, got {self.omega_a}, {self.omega_b}")
        if self.family != "two_tls" and int(self.cutoff) < 2:
            raise ValueError(f"cutoff must be >= 2, got {self.cutoff}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @property
    def factor_kinds(self) -> tuple[str, str]:
        return {
            "two_tls": ("tls", "tls"),
            "two_osc": ("osc", "osc"),
            "tls_osc": ("tls", "osc"),
        }[self.family]

    @property
    def dims(self) -> tuple[int, int]:
        if self.family == "custom":
            return tuple(int(d) for d in self.custom["dims"])
        return tuple(2 if k == "tls" else self.cutoff for k in self.factor_kinds)

    @property
    def effective_omega_b(self) -> float:
        """The frequency of ``b`` entering the free Hamiltonian."""
        return self.omega_a if self.resonant else self.omega_b

    def replace(self, **changes) -> "ModelSpec":
        data = {**self.__dict__, **changes}
        return ModelSpec(**data)

    # ------------------------------------------------------------------ JSON

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["g"] = [self.g.real, self.g.imag]
        if d["custom"] is None:
            d.pop("custom")
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSpec":
        d = dict(d)
        known = {"family", "omega_a", "omega_b", "g", "delta_omega", "lambda", "lam", "cutoff", "resonant", "custom"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        if "family" not in d:
            raise ValueError("model needs a 'family'")
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        g = d.get("g", 1.0)
        if isinstance(g, (list, tuple)):
            if len(g) != 2:
                raise ValueError("g must be a number or a [re, im] pair")
            g = complex(float(g[0]), float(g[1]))
        d["g"] = g
        for key in ("omega_a", "omega_b", "delta_omega", "lam"):
            if key in d:
                d[key] = float(d[key])
        if "resonant" in d and not isinstance(d["resonant"], bool):
            raise ValueError("resonant must be a boolean")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------- factors


def lowering(kind: str, cutoff: int) -> np.ndarray:
    """Lowering operator: ``[[0, 1], [0, 0]]`` for a two-level system, truncated ``a`` otherwise."""
    if kind == "tls":
        return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def number(kind: str, cutoff: int) -> np.ndarray:
    n = 2 if kind == "tls" else cutoff
    return np.diag(np.arange(n, dtype=float)).astype(complex)


@dataclass(frozen=True)
class BuiltModel:
    """Matrices of one model on its product space (``a`` is slot 0, ``b`` is slot 1)."""

    spec: ModelSpec
    H0: np.ndarray
    H_I: np.ndarray
    space: ProductSpace
    H_A: np.ndarray | None = None
    H_B: np.ndarray | None = None
    coupling: tuple[np.ndarray, np.ndarray] | None = None
    n_a: np.ndarray | None = None
    n_b: np.ndarray | None = None
    lower_a: np.ndarray | None = None
    lower_b: np.ndarray | None = None

    def H(self, lam: float | None = None) -> np.ndarray:
        return self.H0 + (self.spec.lam if lam is None else lam) * self.H_I


def _parse_matrix(data, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise DimensionError(f"{name} must be a matrix of numbers or of [re, im] pairs")


def build(spec: ModelSpec) -> BuiltModel:
    """Assemble ``H0`` and ``H_I`` for ``spec``."""
    if spec.family == "custom":
        c = spec.custom
        space = ProductSpace(tuple(c["dims"]))
        h0 = as_hermitian(_parse_matrix(c["H0"], "H0"))
        hi = as_hermitian(_parse_matrix(c["HI"], "HI"))
        if h0.shape != (space.total_dim,) * 2 or hi.shape != h0.shape:
            raise DimensionError(
                f"custom matrices {h0.shape}, {hi.shape} do not match dims {space.dims}"
            )
        return BuiltModel(spec, h0, hi, space)
    ka, kb = spec.factor_kinds
    space = ProductSpace(spec.dims)
    sa, sb = lowering(ka, spec.cutoff), lowering(kb, spec.cutoff)
    na, nb = number(ka, spec.cutoff), number(kb, spec.cutoff)
    g = spec.g
    a_fac = sa + sa.conj().T
    b_fac = np.conj(g) * sb + g * sb.conj().T
    h_a = spec.omega_a * na
    h_b = spec.effective_omega_b * nb
    h0 = embed(h_a, space, 0) + embed(h_b, space, 1)
    hi = kron(a_fac, b_fac)
    if spec.resonant:
        hi = hi + spec.delta_omega * embed(nb, space, 1)
    coupling = None if spec.resonant and spec.delta_omega != 0 else (a_fac, b_fac)
    return BuiltModel(
        spec,
        as_hermitian(h0),
        as_hermitian(hi),
        space,
        H_A=h_a,
        H_B=h_b,
        coupling=coupling,
        n_a=embed(na, space, 0),
        n_b=embed(nb, space, 1),
        lower_a=embed(sa, space, 0),
        lower_b=embed(sb, space, 1),
    )


def check_truncation(spec: ModelSpec, beta: float) -> None:
    """Reject oscillator models whose thermal occupation the Fock cutoff cannot hold."""
    if spec.family in ("two_osc", "tls_osc"):
        if beta * min(spec.omega_a, spec.effective_omega_b) < MIN_OSC_BETA_OMEGA and spec.cutoff < LARGE_CUTOFF:
            raise DomainError(
                f"beta*omega < {MIN_OSC_BETA_OMEGA} needs cutoff >= {LARGE_CUTOFF}, got {spec.cutoff}"
            )


def interior_mask(spec: ModelSpec, edge_layers: int = EDGE_LAYERS) -> np.ndarray:
    """Basis states whose oscillator occupations stay below the top ``edge_layers`` Fock layers."""
    if spec.family == "custom":
        raise DomainError("interior_mask is defined for the built-in families only")
    masks = []
    for kind in spec.factor_kinds:
        if kind == "tls":
            masks.append(np.ones(2, dtype=bool))
        else:
            m = np.ones(spec.cutoff, dtype=bool)
            m[spec.cutoff - edge_layers :] = False
            masks.append(m)
    return np.kron(masks[0], masks[1]).astype(bool)


def restrict(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.asarray(x)[np.ix_(mask, mask)]


# --------------------------------------------------------------------------- closed forms


def _require_family(spec: ModelSpec) -> None:
    if spec.family == "custom":
        raise DomainError("closed forms exist only for the built-in families")


def _raise_lower(built: BuiltModel, slot: str) -> np.ndarray:
    """``s s^H`` in number-operator form: ``1 - n`` for a two-level system, ``1 + n`` for an oscillator."""
    kind = built.spec.factor_kinds[0 if slot == "a" else 1]
    n = built.n_a if slot == "a" else built.n_b
    eye = np.eye(n.shape[0])
    return eye - n if kind == "tls" else eye + n


def closed_form_H1(spec: ModelSpec) -> np.ndarray:
    """First-order term: zero off resonance, the secular exchange plus detuning on resonance."""
    _require_family(spec)
    b = build(spec)
    if not spec.resonant:
        return np.zeros_like(b.H0)
    x = spec.g * b.lower_a @ b.lower_b.conj().T
    return x + x.conj().T + spec.delta_omega * b.n_b


def closed_form_H2(spec: ModelSpec, beta: float) -> np.ndarray:
    """
    Second-order term of the effective Hamiltonian in number-operator form.

    Off resonance the four channels carry ``f(beta(wa - wb))``,
    ``f(beta(wa + wb))``, ``f(beta(wb - wa))`` and ``f(-beta(wa + wb))``; on
    resonance only the two counter-rotating channels survive. On a truncated
    oscillator the result is exact away from the top Fock layers.
    """
    _require_family(spec)
    b = build(spec)
    ra, rb = _raise_lower(b, "a"), _raise_lower(b, "b")
    na, nb = b.n_a, b.n_b
    wa = spec.omega_a
    g2 = abs(spec.g) ** 2
    fb = lambda x: float(f(beta * x))
    if spec.resonant:
        acc = fb(2 * wa) * ra @ rb + fb(-2 * wa) * na @ nb
    else:
        wb = spec.omega_b
        acc = (
            fb(wa - wb) * ra @ nb
            + fb(wa + wb) * ra @ rb
            + fb(wb - wa) * na @ rb
            + fb(-wa - wb) * na @ nb
        )
    return -0.5 * beta * g2 * acc


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


def closed_form_dS(spec: ModelSpec, beta: float, lam: float | None = None) -> float:
    """Leading-order information loss of each family and variant."""
    _require_family(spec)
    lam = spec.lam if lam is None else lam
    wa, wb = spec.omega_a, spec.omega_b
    pref = lam**2 * beta * abs(spec.g) ** 2
    ha, hb = 0.5 * beta * wa, 0.5 * beta * wb
    if spec.resonant:
        return pref * {
            "two_tls": math.tanh(ha),
            "two_osc": _coth(ha),
            "tls_osc": 1.0,
        }[spec.family] / (2.0 * wa)
    if wa == wb:
        raise DomainError("off-resonance formulas need omega_a != omega_b")
    den = wa**2 - wb**2
    num = {
        "two_tls": wa * math.tanh(ha) - wb * math.tanh(hb),
        "two_osc": wa * _coth(hb) - wb * _coth(ha),
        "tls_osc": wa * math.tanh(ha) * _coth(hb) - wb,
    }[spec.family]
    return pref * num / den


def resonance_gap(spec: ModelSpec, beta: float, lam: float | None = None) -> float:
    """
    Excess of the off-resonance loss in the limit ``omega_b -> omega_a`` over the resonance loss.
    """
    _require_family(spec)
    lam = spec.lam if lam is None else lam
    x = beta * spec.omega_a
    bg = beta * abs(spec.g)
    return lam**2 * {
        "two_tls": (bg / (2.0 * math.cosh(0.5 * x))) ** 2,
        "two_osc": (bg / (2.0 * math.sinh(0.5 * x))) ** 2,
        "tls_osc": bg**2 / (2.0 * math.sinh(x)),
    }[spec.family]


def resonance_gap_extrapolated(spec: ModelSpec, beta: float, lam: float | None = None, eta: float = 1e-3) -> float:
    """
    Limit of ``dS_off(omega_b) - dS_res`` as ``omega_b -> omega_a``.

    The off-resonance formula is a removable 0/0 at ``omega_b = omega_a``; it
    is sampled symmetrically at relative offsets ``eta`` and ``eta/2`` and the
    ``O(eta^2)`` error is removed by one Richardson step.
    """
    lam = spec.lam if lam is None else lam
    off = spec.replace(resonant=False)
    res = spec.replace(resonant=True)
    wa = spec.omega_a

    def sym(e):
        up = closed_form_dS(off.replace(omega_b=wa * (1 + e)), beta, lam)
        down = closed_form_dS(off.replace(omega_b=wa * (1 - e)), beta, lam)
        return 0.5 * (up + down)

    limit = (4.0 * sym(0.5 * eta) - sym(eta)) / 3.0
    return limit - closed_form_dS(res, beta, lam)


def figure1_coefficient(family: str, beta_omega_a: float) -> float:
    """``dS * omega_a / (lam^2 beta |g|^2)`` for the resonance variant."""
    h = 0.5 * beta_omega_a
    return {
        "two_tls": 0.5 * math.tanh(h),
        "two_osc": 0.5 * _coth(h),
        "tls_osc": 0.5,
    }[family]
