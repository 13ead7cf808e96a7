"""
Self-verification suites.

Each suite runs a set of oracles and invariants on seeded random or example
models and returns one :class:`Check` per property. Nothing here raises on a
failed property; failures are data.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .bohr import bohr_decompose, kms_check
from .cumulant import (
    cumulant_combine,
    effective_hamiltonian_perturbative,
    f,
    f1,
    g_k,
    moment_explicit,
    moment_quadrature,
    moment_series,
    second_order_beta_derivative,
    second_order_term,
)
from .exact import effective_gibbs, effective_hamiltonian_exact, gibbs, spectral_vs_richter
from .meanforce import (
    BipartiteModel,
    mean_force_exact,
    mean_force_explicit_order2,
    mean_force_perturbative,
    subsystem_bohr,
    thermal_selection_rules,
)
from .models import (
    ModelSpec,
    build,
    closed_form_H2,
    figure1_coefficient,
    interior_mask,
    resonance_gap,
    resonance_gap_extrapolated,
    restrict,
)
from .operators import commutator, maxabs, random_density_matrix, random_hermitian
from .pinching import pinch, projector_property_report, spectral_decompose, time_average
from .thermo import (
    entropy_from_free_energy,
    losses,
    nonequilibrium_free_energies,
    perturbative_losses,
    relative_entropy,
    rwa_hamiltonian,
    von_neumann_entropy,
)

SUITES = ("pinching", "bohr", "cumulant", "exact", "thermo", "meanforce", "models")


@dataclass(frozen=True)
class Check:
    name: str
    deviation: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name: str, deviation: float, tolerance: float) -> Check:
    deviation = float(deviation)
    ok = bool(np.isfinite(deviation) and deviation <= tolerance)
    return Check(name, deviation, float(tolerance), ok)


def _rel(a, b) -> float:
    return maxabs(np.asarray(a) - np.asarray(b)) / max(1.0, maxabs(b))


def _random_h0(dim: int, rng: np.random.Generator, degenerate: bool) -> np.ndarray:
    """Random H0 in a random basis; degenerate spectra repeat integer levels."""
    if degenerate:
        levels = rng.permutation(np.arange(dim) // 2).astype(float)
    else:
        levels = np.sort(rng.uniform(0.0, 3.0, size=dim))
    u = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0]
    return (u * levels) @ u.conj().T


def _random_model(dim: int, rng: np.random.Generator, degenerate: bool = False):
    h0 = _random_h0(dim, rng, degenerate)
    hi = random_hermitian(dim, int(rng.integers(2**32)), scale=0.5)
    return h0, hi


# --------------------------------------------------------------------------- suites


def suite_pinching(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    worst: dict[str, float] = {}
    for degenerate in (False, True):
        for _ in range(3):
            sd = spectral_decompose(_random_h0(6, rng, degenerate))
            rep = projector_property_report(sd, n_random_trials=5, seed=int(rng.integers(2**32)))
            for name, r in rep.items():
                worst[name] = max(worst.get(name, 0.0), r["deviation"])
    out += [_check(f"pinching.{k}", v, 1e-10) for k, v in worst.items()]
    h0 = np.diag([0.0, 1.0, 1.0 + math.sqrt(2.0)])
    sd = spectral_decompose(h0)
    x = random_hermitian(3, int(rng.integers(2**32)))
    e1 = np.linalg.norm(time_average(x, h0, 200 * math.pi) - pinch(x, sd))
    e2 = np.linalg.norm(time_average(x, h0, 400 * math.pi) - pinch(x, sd))
    out.append(_check("pinching.time_average_limit", e2, 1e-2))
    out.append(_check("pinching.time_average_decay_ratio", e2 / e1, 0.55))
    return out


def suite_bohr(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    recon = eig = adj = kms = 0.0
    for degenerate in (False, True):
        for _ in range(3):
            h0, hi = _random_model(5, rng, degenerate)
            sd = spectral_decompose(h0)
            bd = bohr_decompose(hi, sd)
            recon = max(recon, _rel(bd.total(), hi))
            for w, d in bd:
                eig = max(eig, maxabs(commutator(h0, d) + w * d) / max(1.0, maxabs(d)))
                partner = bd.get(-w)
                adj = max(adj, maxabs(partner - d.conj().T) if partner is not None else math.inf)
            kms = max(kms, kms_check(bd, h0, float(rng.uniform(0.3, 3.0))))
    return [
        _check("bohr.reconstruction", recon, 1e-10),
        _check("bohr.eigenoperator_relation", eig, 1e-10),
        _check("bohr.adjoint_pairing", adj, 1e-12),
        _check("bohr.kms_identity", kms, 1e-12),
    ]


def suite_cumulant(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    oracle = h2 = c2 = m1 = 0.0
    for _ in range(2):
        h0, hi = _random_model(4, rng)
        sd = spectral_decompose(h0)
        bd = bohr_decompose(hi, sd)
        for beta in (0.3, 1.0, 3.0):
            for k in (1, 2, 3):
                a = moment_explicit(k, beta, bd)
                q = moment_quadrature(k, beta, h0, hi, sd, n_grid=16)
                oracle = max(oracle, _rel(a, q))
            ms = moment_series(beta, bd, 2)
            m1 = max(m1, _rel(ms.moments[0], -beta * bd.d0))
            c = cumulant_combine(ms, 2)
            c2 = max(c2, _rel(c[1], ms.moments[1] - 0.5 * ms.moments[0] @ ms.moments[0]))
            exp = effective_hamiltonian_perturbative(h0, hi, 0.1, beta, 2, sd=sd, bd=bd)
            h2 = max(h2, _rel(exp.terms[2], second_order_term(bd, beta)))
    out.append(_check("cumulant.moment_explicit_vs_quadrature", oracle, 1e-7))
    out.append(_check("cumulant.first_moment", m1, 1e-12))
    out.append(_check("cumulant.second_cumulant_structure", c2, 1e-10))
    out.append(_check("cumulant.second_order_closed_form", h2, 1e-10))
    g2 = 0.0
    for beta, w in ((0.7, 1.3), (2.0, -0.4), (1.0, 3.0), (0.5, 0.0)):
        ref = (beta * w + math.expm1(-beta * w)) / w**2 if w != 0 else beta**2 / 2
        g2 = max(g2, abs(g_k(beta, [w]) - ref) / max(1.0, abs(ref)))
    out.append(_check("cumulant.g2_closed_form", g2, 1e-12))
    xs = np.linspace(-30, 30, 601)
    out.append(_check("cumulant.f_positive", max(0.0, -min(float(np.min(f(xs))), float(np.min(f1(xs))))), 0.0))
    return out


def suite_exact(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    rt = zeq = comm = rich = 0.0
    for degenerate in (False, True):
        h0, hi = _random_model(5, rng, degenerate)
        sd = spectral_decompose(h0)
        for beta in (0.5, 2.0):
            H = h0 + 0.3 * hi
            ht = effective_hamiltonian_exact(H, sd, beta)
            rho_t, Z = effective_gibbs(H, sd, beta)
            pair_t = gibbs(ht, beta)
            rt = max(rt, maxabs(pair_t.rho - rho_t))
            zeq = max(zeq, abs(math.exp(pair_t.log_z - gibbs(H, beta).log_z) - 1.0))
            comm = max(comm, maxabs(commutator(h0, ht)) / max(1.0, maxabs(h0)))
            rich = max(rich, spectral_vs_richter(H, sd, beta))
    return [
        _check("exact.round_trip", rt, 1e-10),
        _check("exact.partition_function", zeq, 1e-10),
        _check("exact.commutes_with_H0", comm, 1e-9),
        _check("exact.richter_vs_spectral", rich, 1e-7),
    ]


def suite_thermo(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    neg_ds = ident = route = neg_df = ftil = rwa = appd = dpi = sfd = defgap = 0.0
    for degenerate in (False, True):
        h0, hi = _random_model(5, rng, degenerate)
        sd = spectral_decompose(h0)
        bd = bohr_decompose(hi, sd)
        beta, lam = float(rng.uniform(0.5, 2.0)), 0.2
        H = h0 + lam * hi
        L = losses(H, sd, beta)
        neg_ds = max(neg_ds, -L.dS, -L.dU)
        ident = max(ident, abs(L.dU - L.dS / beta) / max(1.0, abs(L.dU)))
        route = max(route, L.route_gap)
        ht = effective_hamiltonian_exact(H, sd, beta)
        for _ in range(5):
            rho = random_density_matrix(5, int(rng.integers(2**32)))
            fe = nonequilibrium_free_energies(rho, H, ht, sd, beta)
            neg_df = max(neg_df, -fe.dF_rho)
            defgap = max(defgap, fe.definition_gap, abs(fe.dF_rho - fe.dF_relative_entropy))
            sigma = random_density_matrix(5, int(rng.integers(2**32)))
            dpi = max(dpi, relative_entropy(pinch(rho, sd), pinch(sigma, sd)) - relative_entropy(rho, sigma))
        rho_t, _ = effective_gibbs(H, sd, beta)
        fe = nonequilibrium_free_energies(rho_t, H, ht, sd, beta)
        ftil = max(ftil, abs(fe.F_tilde_rho - fe.F))
        rwa_val = float(np.einsum("ij,ji->", rwa_hamiltonian(h0, bd, lam) - ht, rho_t).real)
        rwa = max(rwa, abs(fe.dF_rho - rwa_val))
        pl = perturbative_losses(bd, h0, beta, lam, check=False)
        appd = max(appd, abs(pl.avg_dH2 - pl.avg_H2 / beta) / max(1.0, abs(pl.avg_H2 / beta)))
        sfd = max(sfd, abs(entropy_from_free_energy(H, beta) - von_neumann_entropy(gibbs(H, beta).rho)))
    return [
        _check("thermo.losses_nonnegative", neg_ds, 1e-10),
        _check("thermo.dU_equals_dS_over_beta", ident, 1e-9),
        _check("thermo.dual_route_losses", route, 1e-6),
        _check("thermo.dF_nonnegative", neg_df, 1e-10),
        _check("thermo.free_energy_definitions", defgap, 1e-9),
        _check("thermo.data_processing", dpi, 1e-10),
        _check("thermo.observable_free_energy_at_effective_state", ftil, 1e-10),
        _check("thermo.dF_rwa_form", rwa, 1e-9),
        _check("thermo.averaged_second_order_identity", appd, 1e-10),
        _check("thermo.entropy_from_free_energy", sfd, 1e-6),
    ]


def suite_meanforce(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    ha = np.diag([0.0, 0.7, 1.9])
    hb = np.diag([0.0, 1.1, 1.5, 2.6])
    a = random_hermitian(3, int(rng.integers(2**32)), scale=0.5)
    b = random_hermitian(4, int(rng.integers(2**32)), scale=0.5)
    beta = 0.9
    zid = comm = route = 0.0
    ratios = []
    for lam in (0.04, 0.02, 0.01):
        m = BipartiteModel(ha, hb, np.kron(a, b), lam, beta, coupling=(a, b))
        ex = mean_force_exact(m)
        pe = mean_force_perturbative(m, 2, check=False)
        zid = max(zid, abs(ex.log_z_mf - (gibbs(m.H, beta).log_z - m.log_z_B)))
        comm = max(comm, maxabs(commutator(ha, ex.H_mf)) / max(1.0, maxabs(ha)))
        e48 = mean_force_explicit_order2(subsystem_bohr(m), m)
        route = max(route, maxabs(e48.assembled - pe.assembled))
        ratios.append(np.linalg.norm(ex.H_mf - pe.assembled, 2) / lam**3)
    sel = thermal_selection_rules(subsystem_bohr(m).B_terms, m)
    return [
        _check("meanforce.partition_function_identity", zid, 1e-10),
        _check("meanforce.commutes_with_H_A", comm, 1e-9),
        _check("meanforce.averaged_moments_vs_eigenoperator_form", route, 1e-9),
        _check("meanforce.remainder_band", max(ratios) / min(ratios), 2.0),
        _check("meanforce.selection_rules", max(sel.values()), 1e-12),
    ]


def suite_models(seed: int) -> list[Check]:
    h2dev = gapdev = 0.0
    for fam in ("two_tls", "two_osc", "tls_osc"):
        for res in (False, True):
            spec = ModelSpec(fam, omega_a=1.0, omega_b=1.7, g=0.5 * np.exp(0.3j), delta_omega=0.4, resonant=res, cutoff=10)
            b = build(spec)
            sd = spectral_decompose(b.H0)
            bd = bohr_decompose(b.H_I, sd)
            for beta in (0.5, 2.0):
                mask = interior_mask(spec)
                h2dev = max(h2dev, _rel(restrict(second_order_term(bd, beta), mask), restrict(closed_form_H2(spec, beta), mask)))
                gapdev = max(gapdev, abs(resonance_gap_extrapolated(spec, beta) / resonance_gap(spec, beta) - 1.0))
    coeffs = [figure1_coefficient(fam, 10.0) for fam in ("two_tls", "two_osc", "tls_osc")]
    spread = max(coeffs) / min(coeffs) - 1.0
    return [
        _check("models.second_order_closed_forms", h2dev, 1e-10),
        _check("models.resonance_gap", gapdev, 1e-6),
        _check("models.asymptotic_coincidence", spread, 1e-2),
    ]


_SUITE_FUNCS: dict[str, Callable[[int], list[Check]]] = {
    "pinching": suite_pinching,
    "bohr": suite_bohr,
    "cumulant": suite_cumulant,
    "exact": suite_exact,
    "thermo": suite_thermo,
    "meanforce": suite_meanforce,
    "models": suite_models,
}


def run_suite(name: str, seed: int = 42) -> list[Check]:
    """Run one suite, or every suite for ``name == "all"``."""
    if name == "all":
        return [c for s in SUITES for c in _SUITE_FUNCS[s](seed)]
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES + ('all',)}")
    return _SUITE_FUNCS[name](seed)
