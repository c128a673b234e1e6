import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qma_forge import protocols, toys
from qma_forge.errors import HypothesisError, ShapeError, SizeLimitError
from qma_forge.linalg import RegisterLayout
from qma_forge.states import DensityOperator, make_rng, random_density, random_pure_vector
from qma_forge.verifier import (
    SystemParams,
    accept_probability,
    accept_probability_mixed,
    acceptance_operator,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _proofs(v, seed):
    rng = make_rng(seed, 7)
    return [random_pure_vector(d, rng) for d in v.slot_dims]


# --- swap test ------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_swap_test_examples(n):
    v = protocols.swap_test_verifier(n)
    d = 2**n
    e0, e1 = np.eye(d)[0], np.eye(d)[1]
    assert accept_probability(v, [e0, e0]) == pytest.approx(1.0, abs=1e-14)
    assert accept_probability(v, [e0, e1]) == pytest.approx(0.5, abs=1e-14)
    mixed = np.eye(d) / d
    assert accept_probability_mixed(v, [mixed, mixed]) == pytest.approx(0.5 + 0.5 / d, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3))
def test_swap_test_formula(seed, n):
    layout = RegisterLayout.of(("q", n))
    rho, sigma = random_density(layout, seed), random_density(layout, seed + 1, 1)
    circuit = accept_probability_mixed(protocols.swap_test_verifier(n), [rho, sigma])
    assert circuit == pytest.approx(protocols.swap_test_analytic(rho, sigma), abs=1e-12)


def test_swap_test_errors():
    with pytest.raises(ShapeError):
        protocols.swap_test_verifier(0)
    with pytest.raises(SizeLimitError):
        protocols.swap_test_verifier(6)


# --- amplification --------------------------------------------------------

def test_amplify_reference_point():
    amp = protocols.amplify(SystemParams(1, 2 / 3, 1 / 3), 3, 10)
    assert (amp.n_attempts, amp.threshold) == (180, 90)
    assert amp.completeness == 1 - 2**-10
    assert amp.soundness == pytest.approx(2 / 3, abs=1e-15)
    assert amp.relaxed_soundness == pytest.approx(5 / 6, abs=1e-15)
    assert protocols.amplified_accept_honest(2 / 3, amp) >= amp.completeness


def test_amplify_threshold_is_at_least():
    # N (c+s)/2 integral: the threshold is exactly that value, not one more
    amp = protocols.amplify(SystemParams(1, 0.75, 0.25), 2, 1)
    assert (amp.n_attempts, amp.threshold) == (8, 4)
    amp = protocols.amplify(SystemParams(1, 0.7, 0.2), 2, 1)
    assert amp.threshold == math.ceil(8 * 0.45)


def test_amplify_gap_hypothesis():
    with pytest.raises(HypothesisError):
        protocols.amplify(SystemParams(1, 0.6, 0.4), 3, 10)


@pytest.mark.parametrize("n,t", [(1, 1), (2, 1), (5, 3), (12, 7), (30, 0), (4, 5)])
def test_binomial_tail_exact(n, t):
    p = Fraction(2, 3)
    exact = sum(math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(max(t, 0), n + 1))
    assert protocols.binomial_tail(n, t, 2 / 3) == pytest.approx(float(exact), abs=1e-14)


def test_binomial_tail_large_n_is_stable():
    val = protocols.binomial_tail(180, 90, 2 / 3)
    assert 0.99999 < val <= 1.0
    assert protocols.binomial_tail(10_000, 5_000, 0.4) < 1e-80


@pytest.mark.parametrize("n,t", [(2, 1), (2, 2), (3, 2), (3, 3)])
def test_parallel_repetition_matches_binomial(n, t):
    v = toys.random_verifier(1, 1, 1, 17)
    proof = _proofs(v, 17)
    p = accept_probability(v, proof)
    rep = protocols.parallel_repetition(v, n, t)
    assert rep.k == n
    assert accept_probability(rep, proof * n) == pytest.approx(protocols.binomial_tail(n, t, p), abs=1e-10)


def test_parallel_repetition_two_proof_verifier():
    v = toys.random_verifier(1, 1, 2, 3)
    proofs = _proofs(v, 3)
    p = accept_probability(v, proofs)
    rep = protocols.parallel_repetition(v, 2, 1)
    assert accept_probability(rep, proofs * 2) == pytest.approx(1 - (1 - p) ** 2, abs=1e-10)


# --- reduction bookkeeping ------------------------------------------------

def test_split_proof_count():
    assert protocols.split_proof_count(3) == (1, 0)
    assert protocols.split_proof_count(4) == (1, 1)
    assert protocols.split_proof_count(5) == (1, 2)
    assert protocols.split_proof_count(9) == (3, 0)
    with pytest.raises(ShapeError):
        protocols.split_proof_count(2)


def test_reduction_bounds():
    rep = protocols.reduction_bounds(3, 0.05, 0.6)
    assert (rep.output_k, rep.output_epsilon) == (2, 0.025)
    assert rep.output_delta == pytest.approx(0.03)
    data = rep.to_json()
    assert data["completeness_bound"] == pytest.approx(0.975)
    assert data["soundness_bound"] == pytest.approx(0.97)
    with pytest.raises(HypothesisError):
        protocols.reduction_bounds(3, 0.05, 0.5)


def test_chain_schedule_stage_counts():
    assert protocols.chain_schedule(2, 0.01, 0.5) == []
    assert [s.output_k for s in protocols.chain_schedule(3, 1e-6, 0.5)] == [2]
    stages = protocols.chain_schedule(9, 1e-9, 0.5)
    assert [s.input_k for s in stages] == [9, 6, 4, 3]
    assert stages[-1].output_delta == pytest.approx(0.5 / 20**4)
    assert stages[-1].output_epsilon == pytest.approx(1e-9 / 16)


def test_chain_schedule_reports_failing_stage():
    with pytest.raises(HypothesisError, match="stage 3"):
        protocols.chain_schedule(9, 2**-10, 1 / 6)


# --- 3 -> 2 ---------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(seeds)
def test_reduce_3_to_2_honest_is_half_plus_half(seed):
    v = toys.random_verifier(1, 1, 3, seed)
    phis = _proofs(v, seed)
    p = accept_probability(v, phis)
    w = protocols.reduce_3_to_2(v)
    assert w.k == 2 and w.proof_qubits == 2
    reduced = accept_probability(w, protocols.honest_reduced_proofs(phis, 1, 0))
    assert reduced == pytest.approx(0.5 + p / 2, abs=1e-12)
    vals = np.linalg.eigvalsh(acceptance_operator(w).matrix)
    assert vals.min() >= -1e-10 and vals.max() <= 1 + 1e-10


def test_reduce_3_to_2_toys():
    w = protocols.reduce_3_to_2(toys.threshold_verifier(0.95))
    p = accept_probability(w, protocols.honest_reduced_proofs(toys.threshold_honest_proofs(), 1, 0))
    assert p >= 0.975 - 1e-10
    assert acceptance_operator(protocols.reduce_3_to_2(toys.threshold_verifier(0.4))).lambda_max == pytest.approx(0.7)


def test_reduce_3_to_2_separability_branch():
    # S1 and S2 orthogonal: the swap test half accepts with probability 1/2
    v = toys.always_accept_verifier(1, 1, 3)
    zero, one = np.array([1, 0]), np.array([0, 1])
    w = protocols.reduce_3_to_2(v)
    assert accept_probability(w, [np.kron(zero, zero), np.kron(zero, one)]) == pytest.approx(0.75)


def test_reduce_3_to_2_wrong_k():
    with pytest.raises(ShapeError):
        protocols.reduce_3_to_2(toys.random_verifier(1, 1, 2, 0))


# --- (3k+r) -> (2k+r) -----------------------------------------------------

def test_specialisation_k1_r0():
    v = toys.random_verifier(1, 1, 3, 23)
    a = acceptance_operator(protocols.reduce_3_to_2(v)).matrix
    b = acceptance_operator(protocols.reduce_3kr_to_2kr(v, 1, 0)).matrix
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("r", [1, 2])
def test_honest_with_remainder(r):
    v = toys.random_verifier(1, 1, 3 + r, 29 + r)
    phis = _proofs(v, r)
    p = accept_probability(v, phis)
    w = protocols.reduce_3kr_to_2kr(v, 1, r)
    assert w.k == 2 + r
    reduced = accept_probability(w, protocols.honest_reduced_proofs(phis, 1, r))
    assert reduced == pytest.approx(0.5 + p / 2, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_ancilla_check_rejects(seed):
    w = protocols.reduce_3kr_to_2kr(toys.always_accept_verifier(1, 1, 4), 1, 1)
    rng = make_rng(seed)
    proofs = [random_pure_vector(4, rng), random_pure_vector(4, rng)]
    proofs.append(np.kron(random_pure_vector(2, rng), [0, 1]))
    assert accept_probability(w, proofs) == pytest.approx(0.0, abs=1e-14)


def test_reduce_3kr_shape_errors():
    v = toys.random_verifier(1, 1, 4, 0)
    with pytest.raises(ShapeError):
        protocols.reduce_3kr_to_2kr(v, 1, 0)
    with pytest.raises(ShapeError):
        protocols.reduce_3kr_to_2kr(v, 1, 3)
    with pytest.raises(ShapeError):
        protocols.honest_reduced_proofs([np.array([1, 0])] * 3, 1, 1)


# --- chain ----------------------------------------------------------------

def test_reduce_chain_k2_is_bookkeeping_only():
    v = toys.random_verifier(1, 1, 2, 0)
    chain = protocols.reduce_chain(v, SystemParams(2, 2 / 3, 1 / 3), 3, 10)
    assert chain.stages == [] and chain.verifier is v
    assert chain.final_epsilon == 2**-10
    assert chain.final_delta == pytest.approx(1 / 6)


def test_reduce_chain_k3():
    v = toys.threshold_verifier(2 / 3)
    chain = protocols.reduce_chain(v, SystemParams(3, 2 / 3, 1 / 3), 3, 10)
    assert len(chain.stages) == 1 and chain.verifier.k == 2
    assert chain.final_epsilon == 2**-11
    assert chain.final_delta == pytest.approx(1 / 120)
    assert chain.to_json()["final"]["q_prime"] == pytest.approx(120)


def test_reduce_chain_budget_reports_stage():
    v = toys.random_verifier(1, 1, 4, 0)
    with pytest.raises(SizeLimitError) as info:
        protocols.reduce_chain(v, SystemParams(4, 2 / 3, 1 / 3), 3, 20)
    assert info.value.stage == 2
    assert "stage 2" in str(info.value)


# --- perfect soundness ----------------------------------------------------

def test_concat_preserves_operator_and_probabilities():
    v = toys.random_verifier(1, 1, 3, 31)
    single = protocols.concat_proofs(v)
    assert single.k == 1 and single.proof_qubits == 3
    np.testing.assert_array_equal(acceptance_operator(v).matrix, acceptance_operator(single).matrix)
    phis = _proofs(v, 31)
    joint = np.kron(np.kron(phis[0], phis[1]), phis[2])
    assert accept_probability(single, [joint]) == pytest.approx(accept_probability(v, phis), abs=1e-14)


def test_nqp_examples():
    reject = protocols.nqp_simulation(toys.identity_verifier())
    assert reject.acceptance == 0.0 and reject.zero_verdict
    accept = protocols.nqp_simulation(toys.always_accept_verifier(1, 2, 1))
    assert accept.acceptance == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        protocols.nqp_simulation(toys.random_verifier(1, 1, 2, 0))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_nqp_matches_trace(seed):
    v = toys.random_verifier(1, 2, 1, seed)
    m = acceptance_operator(v)
    out = protocols.nqp_simulation(v)
    assert out.acceptance == pytest.approx(np.trace(m.matrix).real / 4, abs=1e-12)
    assert out.zero_verdict == (m.lambda_max <= 1e-12)


def test_nqp_perfect_soundness_toy():
    no = protocols.concat_proofs(toys.never_accept_verifier(1, 1, 3, 5))
    yes = protocols.concat_proofs(toys.threshold_verifier(0.5))
    assert protocols.nqp_simulation(no).zero_verdict
    assert not protocols.nqp_simulation(yes).zero_verdict
