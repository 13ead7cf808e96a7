import json
import math

import numpy as np
import pytest

from effgibbs.bohr import bohr_decompose
from effgibbs.cumulant import effective_hamiltonian_perturbative, second_order_term
from effgibbs.exceptions import DimensionError, DomainError
from effgibbs.models import (
    ModelSpec,
    build,
    check_truncation,
    closed_form_dS,
    closed_form_H1,
    closed_form_H2,
    figure1_coefficient,
    interior_mask,
    lowering,
    number,
    resonance_gap,
    resonance_gap_extrapolated,
    restrict,
)
from effgibbs.operators import maxabs
from effgibbs.pinching import spectral_decompose
from effgibbs.thermo import perturbative_losses

FAMILIES = ("two_tls", "two_osc", "tls_osc")


def spec(family, resonant, cutoff=12):
    return ModelSpec(family, omega_a=1.0, omega_b=1.7, g=0.6 * np.exp(0.4j), delta_omega=0.3, lam=0.05, cutoff=cutoff, resonant=resonant)


def test_ladder_operators():
    a = lowering("osc", 5)
    n = number("osc", 5)
    assert maxabs(a.conj().T @ a - n) < 1e-14
    comm = a @ a.conj().T - a.conj().T @ a
    assert maxabs(comm[:4, :4] - np.eye(4)) < 1e-14
    s = lowering("tls", 0)
    assert maxabs(s.conj().T @ s - number("tls", 0)) == 0


@pytest.mark.parametrize("family", FAMILIES)
def test_build_shapes_and_coupling(family):
    b = build(spec(family, False))
    dims = spec(family, False).dims
    assert b.H0.shape == (dims[0] * dims[1],) * 2
    a_fac, b_fac = b.coupling
    assert maxabs(np.kron(a_fac, b_fac) - b.H_I) < 1e-14
    assert maxabs(b.H0 - np.kron(b.H_A, np.eye(dims[1])) - np.kron(np.eye(dims[0]), b.H_B)) < 1e-14


def test_resonant_variant_moves_detuning_into_interaction():
    b = build(spec("two_tls", True))
    assert np.allclose(np.linalg.eigvalsh(b.H0), [0, 1, 1, 2])
    assert b.coupling is None
    assert maxabs(b.H(0.0) - b.H0) == 0


def test_spec_round_trip_and_validation():
    s = spec("tls_osc", True)
    again = ModelSpec.from_json(json.dumps(s.to_dict()))
    assert again == s
    with pytest.raises(ValueError):
        ModelSpec.from_dict({"family": "two_tls", "bogus": 1})
    with pytest.raises(ValueError):
        ModelSpec("three_tls")
    with pytest.raises(ValueError):
        ModelSpec("two_tls", omega_a=-1.0)
    with pytest.raises(ValueError):
        ModelSpec("two_osc", cutoff=1)
    with pytest.raises(ValueError):
        ModelSpec.from_dict({"family": "two_tls", "g": [1, 2, 3]})


def test_custom_model():
    h0 = [[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 2, 0], [0, 0, 0, 3]]
    hi = [[[0, 0], [1, 0.5], [0, 0], [0, 0]], [[1, -0.5], [0, 0], [0, 0], [0, 0]], [[0, 0]] * 4, [[0, 0]] * 4]
    b = build(ModelSpec("custom", custom={"dims": [2, 2], "H0": h0, "HI": hi}))
    assert b.H_I[0, 1] == 1 + 0.5j
    with pytest.raises(DimensionError):
        build(ModelSpec("custom", custom={"dims": [2, 3], "H0": h0, "HI": hi}))
    with pytest.raises(ValueError):
        ModelSpec("custom")


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("resonant", [False, True])
@pytest.mark.parametrize("beta", [0.3, 1.0, 4.0])
def test_second_order_closed_forms(family, resonant, beta):
    s = spec(family, resonant)
    b = build(s)
    sd = spectral_decompose(b.H0)
    bd = bohr_decompose(b.H_I, sd)
    mask = interior_mask(s)
    numeric = restrict(second_order_term(bd, beta), mask)
    assert maxabs(numeric - restrict(closed_form_H2(s, beta), mask)) < 1e-10 * max(1.0, maxabs(numeric))
    exp = effective_hamiltonian_perturbative(b.H0, b.H_I, s.lam, beta, 1, sd=sd, bd=bd)
    assert maxabs(restrict(exp.terms[1] - closed_form_H1(s), mask)) < 1e-12


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("resonant", [False, True])
@pytest.mark.parametrize("beta", [1.0, 3.0])
def test_loss_closed_forms_match_second_order_average(family, resonant, beta):
    # Fock tail weight exp(-beta * cutoff) is negligible at these temperatures
    s = spec(family, resonant, cutoff=24)
    b = build(s)
    bd = bohr_decompose(b.H_I, spectral_decompose(b.H0))
    pl = perturbative_losses(bd, b.H0, beta, s.lam)
    assert pl.dS == pytest.approx(closed_form_dS(s, beta), rel=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("beta", [0.4, 1.0, 3.0])
def test_resonance_gap_matches_limit(family, beta):
    s = spec(family, True)
    assert resonance_gap_extrapolated(s, beta) == pytest.approx(resonance_gap(s, beta), rel=1e-6)
    assert resonance_gap(s, beta) > 0


def test_off_resonance_loss_needs_distinct_frequencies():
    with pytest.raises(DomainError):
        closed_form_dS(ModelSpec("two_tls", omega_a=1.0, omega_b=1.0), 1.0)


def test_closed_forms_reject_custom():
    s = ModelSpec("custom", custom={"dims": [1, 1], "H0": [[0]], "HI": [[0]]})
    with pytest.raises(DomainError):
        closed_form_H2(s, 1.0)


def test_truncation_guard():
    check_truncation(spec("two_osc", False), 1.0)
    with pytest.raises(DomainError):
        check_truncation(spec("two_osc", False), 0.05)
    check_truncation(spec("two_osc", False, cutoff=40), 0.05)
    check_truncation(spec("two_tls", False), 1e-3)


def test_interior_mask_excludes_top_layers():
    s = spec("tls_osc", False, cutoff=6)
    mask = interior_mask(s)
    assert mask.shape == (12,) and mask.sum() == 8
    assert interior_mask(spec("two_tls", False)).all()


def test_figure1_coefficients():
    assert figure1_coefficient("tls_osc", 0.3) == 0.5
    assert figure1_coefficient("two_tls", 1.0) == pytest.approx(0.5 * math.tanh(0.5))
    assert figure1_coefficient("two_osc", 0.2) > figure1_coefficient("two_tls", 0.2)
    vals = [figure1_coefficient(f, 10.0) for f in FAMILIES]
    assert max(vals) / min(vals) - 1 < 1e-2
