import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonmarkov.qcore import ValidationError, is_ppt, max_entangled, random_density, random_unitary
from nonmarkov.robustness import (
    RELAXATION_LABEL,
    check_result,
    generalized_robustness,
    negativity_bound,
    pure_state_robustness,
    rg_dual_witness,
    rg_primal,
)


def isotropic(d, f):
    phi = max_entangled(d).data
    return f * phi + (1 - f) * (np.eye(d * d) - phi) / (d * d - 1)


@pytest.mark.parametrize("d,expected", [(2, 1.0), (3, 2.0), (4, 3.0)])
def test_maximally_entangled(d, expected):
    for fn in (rg_primal, rg_dual_witness):
        assert abs(fn(max_entangled(d)).value - expected) < 1e-6


def test_pure_state_formula_two_qubits(rng):
    for _ in range(5):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        expected = pure_state_robustness(psi, (2, 2))
        assert abs(rg_dual_witness(rho, (2, 2)).value - expected) < 1e-6


@pytest.mark.parametrize("d,f", [(2, 0.8), (2, 0.6), (3, 0.7), (3, 0.5)])
def test_isotropic_states(d, f):
    # generalized robustness of an isotropic state is d F - 1 above F = 1/d
    assert abs(rg_dual_witness(isotropic(d, f), (d, d)).value - (d * f - 1)) < 1e-6


def test_separable_states_have_zero_robustness(rng):
    for _ in range(3):
        rho = np.kron(random_density(2, rng), random_density(2, rng))
        res = rg_dual_witness(rho, (2, 2))
        assert res.value < 1e-8
        assert res.value >= 0.0


def test_witness_certificate(rng):
    rho = random_density(4, rng)
    res = rg_dual_witness(rho, (2, 2))
    w = res.witness
    assert w.certificate_defect < 1e-8
    assert np.linalg.eigvalsh(w.p).min() > -1e-8
    assert np.linalg.eigvalsh(w.q).min() > -1e-8
    assert np.linalg.eigvalsh(w.w).max() < 1 + 1e-8
    assert abs(-w.expectation(rho) - res.raw) < 1e-12


def test_mixing_state_makes_ppt(rng):
    rho = random_density(4, rng, rank=1)
    for fn in (rg_primal, rg_dual_witness):
        res = fn(rho, (2, 2))
        diag = check_result(res, rho)
        assert max(diag.values()) < 1e-6
        mixed = (rho + res.mixing) / (1 + np.trace(res.mixing).real)
        assert is_ppt(mixed, (2, 2), tol=1e-6)


def test_negativity_upper_bound(rng):
    # twice the negativity caps the PPT-relaxed robustness
    for _ in range(4):
        rho = random_density(4, rng, rank=2)
        assert rg_dual_witness(rho, (2, 2)).value <= negativity_bound(rho, (2, 2)) + 1e-7


def test_local_unitary_invariance(rng):
    rho = random_density(4, rng, rank=1)
    u = np.kron(random_unitary(2, rng), random_unitary(2, rng))
    a = rg_dual_witness(rho, (2, 2)).value
    b = rg_dual_witness(u @ rho @ u.conj().T, (2, 2)).value
    assert abs(a - b) < 1e-6


def test_split_required():
    with pytest.raises(ValidationError):
        rg_dual_witness(np.eye(4) / 4)


def test_unknown_method():
    with pytest.raises(ValueError):
        generalized_robustness(max_entangled(2), method="nope")


def test_result_labels_relaxation():
    res = rg_primal(max_entangled(2))
    assert res.relaxation == RELAXATION_LABEL
    assert res.to_dict()["relaxation"] == RELAXATION_LABEL


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_strong_duality_property(seed):
    rho = random_density(4, np.random.default_rng(seed))
    assert abs(rg_primal(rho, (2, 2)).value - rg_dual_witness(rho, (2, 2)).value) < 1e-6


def test_explicit_bell_witness_is_optimal():
    phi = max_entangled(2).data
    w = np.eye(4) - 2 * phi
    assert np.allclose(np.sort(np.linalg.eigvalsh(w)), [-1, 1, 1, 1])
    assert np.isclose(-np.trace(w @ phi).real, 1.0)
    assert abs(rg_dual_witness(phi, (2, 2)).value - 1.0) < 1e-6


def test_duality_on_many_two_qubit_states(rng):
    for _ in range(50):
        rho = random_density(4, rng)
        assert abs(rg_primal(rho, (2, 2)).value - rg_dual_witness(rho, (2, 2)).value) <= 1e-6
