import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qma_forge import toys
from qma_forge.errors import ContractError, ShapeError, SizeLimitError, StateIndexError
from qma_forge.prover_opt import (
    ProductSearchConfig,
    SoundnessCertificate,
    basis_product_tuples,
    brute_force_product,
    certify_soundness,
    effective_operator,
    quadratic_form,
    random_acceptance_operator,
    seesaw,
)
from qma_forge.states import make_rng, random_pure_vector
from qma_forge.verifier import acceptance_operator

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _psd(d, rng):
    w = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = w @ w.conj().T
    return m / np.linalg.eigvalsh(m)[-1]


def test_effective_operator_on_product():
    rng = make_rng(1)
    a, b = _psd(2, rng), _psd(3, rng)
    psi = random_pure_vector(3, rng)
    eff = effective_operator(np.kron(a, b), [None, psi], 0, [2, 3])
    np.testing.assert_allclose(eff, a * np.real(psi.conj() @ b @ psi), atol=1e-14)


def test_effective_operator_identity():
    rng = make_rng(2)
    proofs = [random_pure_vector(2, rng) for _ in range(3)]
    np.testing.assert_allclose(effective_operator(np.eye(8), proofs, 1, [2, 2, 2]), np.eye(2), atol=1e-14)


@pytest.mark.parametrize("dims", [[2, 2], [2, 3, 2]])
def test_effective_operator_matches_joint_form(dims):
    m = random_acceptance_operator(dims, 3)
    rng = make_rng(3, 1)
    for trial in range(100):
        proofs = [random_pure_vector(d, rng) for d in dims]
        i = trial % len(dims)
        eff = effective_operator(m, proofs, i)
        local = np.real(proofs[i].conj() @ eff @ proofs[i])
        assert local == pytest.approx(quadratic_form(m, proofs), abs=1e-12)


def test_effective_operator_errors():
    m = random_acceptance_operator([2, 2], 0)
    with pytest.raises(StateIndexError):
        effective_operator(m, [np.ones(2), np.ones(2)], 2)
    with pytest.raises(ShapeError):
        seesaw(m, [2, 3])


def test_config_validation():
    with pytest.raises(ContractError):
        ProductSearchConfig(restarts=0)
    with pytest.raises(ContractError):
        ProductSearchConfig(convergence_tol=0.0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_seesaw_on_product_operator(seed):
    rng = make_rng(seed)
    a, b = _psd(2, rng) * rng.uniform(0.2, 1), _psd(4, rng) * rng.uniform(0.2, 1)
    out = seesaw(np.kron(a, b), [2, 4], ProductSearchConfig(restarts=3, seed=seed))
    expected = np.linalg.eigvalsh(a)[-1] * np.linalg.eigvalsh(b)[-1]
    assert out.value == pytest.approx(expected, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from([[2, 2], [2, 2, 2], [3, 2]]))
def test_seesaw_monotone_and_bounded(seed, dims):
    m = random_acceptance_operator(dims, seed)
    out = seesaw(m, dims, ProductSearchConfig(restarts=4, seed=seed))
    for trace in out.traces:
        assert np.all(np.diff(trace) >= -1e-12)
    assert out.value <= m.lambda_max + 1e-9
    assert out.value == pytest.approx(quadratic_form(m, out.proofs), abs=1e-12)
    assert out.value == max(out.restart_values)


def test_seesaw_deterministic_across_thread_counts(monkeypatch):
    m = random_acceptance_operator([2, 2, 2], 7)
    config = ProductSearchConfig(restarts=6, seed=7)
    monkeypatch.setenv("QMA_FORGE_THREADS", "1")
    one = seesaw(m, [2, 2, 2], config)
    monkeypatch.setenv("QMA_FORGE_THREADS", "4")
    four = seesaw(m, [2, 2, 2], config)
    assert one.restart_values == four.restart_values
    assert one.trace == four.trace


def test_ghz_product_optimum_is_half():
    op = acceptance_operator(toys.ghz_verifier())
    assert seesaw(op, [2, 2, 2], ProductSearchConfig(restarts=8)).value == pytest.approx(0.5, abs=1e-12)
    assert op.lambda_max == pytest.approx(1.0)


def test_basis_tuples_cover_diagonal():
    m = random_acceptance_operator([2, 3], 4)
    values = [quadratic_form(m, t) for t in basis_product_tuples([2, 3])]
    np.testing.assert_allclose(sorted(values), sorted(np.real(np.diagonal(m.matrix))), atol=1e-14)
    assert brute_force_product(m, [2, 3], 0, 0) == pytest.approx(max(values))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_brute_force_agrees_with_seesaw(seed):
    m = random_acceptance_operator([2, 2], seed)
    ss = seesaw(m, [2, 2], ProductSearchConfig(restarts=8, seed=seed)).value
    brute = brute_force_product(m, [2, 2], 200_000, seed, profile_last=True)
    assert brute <= ss + 1e-9
    assert brute == pytest.approx(ss, abs=1e-4)


def test_brute_force_prefix_monotone():
    m = random_acceptance_operator([2, 2, 2], 5)
    small = brute_force_product(m, [2, 2, 2], 1_000, 5)
    large = brute_force_product(m, [2, 2, 2], 50_000, 5)
    assert large >= small


def test_brute_force_size_limit():
    m = random_acceptance_operator([4, 4, 8], 0)
    with pytest.raises(SizeLimitError):
        brute_force_product(m, [4, 4, 8], 10, 0)


def test_certificate_conclusive_on_no_toy():
    cert = certify_soundness(toys.threshold_verifier(0.4), 0.5)
    assert cert.conclusive and cert.certified and cert.bound_used == "entangled"
    data = cert.to_json()
    for key in ("product_lower_bound", "entangled_upper_bound", "conclusive", "threshold", "restarts", "seed"):
        assert key in data


def test_certificate_cross_checked_product_soundness():
    # GHZ verifier: entangled optimum 1, product optimum 1/2
    cert = certify_soundness(toys.ghz_verifier(), 0.5, ProductSearchConfig(restarts=8), brute_samples=100_000)
    assert not cert.conclusive
    assert cert.bound_used == "product-cross-checked"
    assert cert.certified
    assert certify_soundness(toys.ghz_verifier(), 0.4).refuted


def test_certificate_without_oracle_is_not_certified():
    cert = certify_soundness(toys.ghz_verifier(), 0.5)
    assert cert.bound_used == "product-lower-bound" and not cert.certified


def test_certificate_invariant():
    with pytest.raises(ContractError):
        SoundnessCertificate(0.9, 0.5, 0.6, 1, 0)
