"""Exit criteria of the workbench, runnable from tests and from ``qma-forge all``.

Each criterion returns a list of :class:`CheckResult`; the last entry of
every list is its runtime budget check.
"""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import indist, protocols, toys
from .linalg import RegisterLayout, tensor
from .prover_opt import (
    ProductSearchConfig,
    certify_soundness,
    random_acceptance_operator,
    seesaw,
)
from .report import CheckResult, check_at_least, check_at_most, check_close, check_true
from .states import DensityOperator, fidelity, make_rng, random_density
from .verifier import SystemParams, accept_probability, acceptance_operator

SWAP_CLAIM = "controlled-swap test accepts with probability 1/2 + tr(rho sigma)/2"
PRODUCT_FIDELITY_CLAIM = "F(r1 (x) r2, s1 (x) s2) = F(r1, s1) F(r2, s2)"
CHAIN_CLAIM = "F(r, s)^2 + F(s, x)^2 <= 1 + F(r, x)"
REDUCE_CLAIM = "(3, 1-eps, 1-delta) -> (2, 1-eps/2, 1-delta/20) for delta > 10 eps"
REDUCE_K_CLAIM = "(3k+r, 1-eps, 1-delta) -> (2k+r, 1-eps/2, 1-delta/20)"
AMPLIFY_CLAIM = "N = 2pq^2 parallel attempts: completeness 1 - 2^-p, soundness 2s/(c+s)"
PERFECT_CLAIM = "perfect soundness: k proofs collapse to one; NQP acceptance is tr(M)/2^q"
INDIST_CLAIM = "product and maximally entangled ensembles both average to I/d^2"
OPT_CLAIM = "see-saw is monotone and bounded by the entangled optimum"


def _timed(limit: float, fn: Callable[[], list[CheckResult]], name: str) -> list[CheckResult]:
    t0 = time.perf_counter()
    results = fn()
    elapsed = time.perf_counter() - t0
    results.append(check_at_most(f"{name} runtime (s)", elapsed, limit))
    return results


def random_state_pair(n: int, seed: int) -> tuple[DensityOperator, DensityOperator]:
    layout = RegisterLayout.of(("q", n))
    d = layout.dim
    rng = make_rng(seed)
    r1, r2 = (int(x) for x in rng.integers(1, d + 1, size=2))
    return random_density(layout, seed * 2 + 1, r1), random_density(layout, seed * 2 + 2, r2)


def swap_test_deviations(n: int, trials: int, seed: int) -> np.ndarray:
    from .verifier import accept_probability_mixed

    v = protocols.swap_test_verifier(n)
    out = np.empty(trials)
    for t in range(trials):
        rho, sigma = random_state_pair(n, seed * 100_003 + t)
        out[t] = accept_probability_mixed(v, [rho, sigma]) - protocols.swap_test_analytic(rho, sigma)
    return out


def criterion_swap_test(seed: int = 1, trials: int = 200) -> list[CheckResult]:
    def run():
        res = []
        for n in (1, 2, 3):
            dev = np.max(np.abs(swap_test_deviations(n, trials, seed + n)))
            res.append(check_at_most(f"swap test {n}-qubit, max |circuit - formula| over {trials}", dev, 1e-12, claim=SWAP_CLAIM))
        return res

    return _timed(10.0, run, "swap test")


def criterion_fidelity_identities(seed: int = 2, cases: int = 1000) -> list[CheckResult]:
    def run():
        res = []
        for d in (2, 4, 8):
            n = int(np.log2(d))
            layout = RegisterLayout.of(("q", n))
            rng = make_rng(seed, d)
            mult_err = 0.0
            slack = np.inf
            for _ in range(cases):
                s = [int(x) for x in rng.integers(0, 2**62, size=5)]
                ranks = [int(x) for x in rng.integers(1, d + 1, size=5)]
                r1, s1, r2, s2, xi = (random_density(layout, si, rk).matrix for si, rk in zip(s, ranks))
                lhs = fidelity(np.kron(r1, r2), np.kron(s1, s2))
                mult_err = max(mult_err, abs(lhs - fidelity(r1, s1) * fidelity(r2, s2)))
                f_rs, f_sx, f_rx = fidelity(r1, s1), fidelity(s1, xi), fidelity(r1, xi)
                slack = min(slack, 1 + f_rx - f_rs**2 - f_sx**2)
            res.append(check_at_most(f"fidelity multiplicativity d={d}, max error over {cases}", mult_err, 1e-7, claim=PRODUCT_FIDELITY_CLAIM))
            res.append(check_at_least(f"fidelity chain inequality d={d}, min slack over {cases}", slack, -1e-9, claim=CHAIN_CLAIM))
        return res

    return _timed(30.0, run, "fidelity identities")


def criterion_reduce_3_to_2(seed: int = 3, epsilon: float = 0.05, delta: float = 0.6) -> list[CheckResult]:
    def run():
        res = []
        yes = toys.threshold_verifier(1 - epsilon)
        honest = toys.threshold_honest_proofs()
        p_orig = accept_probability(yes, honest)
        res.append(check_at_least("toy yes-instance honest acceptance", p_orig, 1 - epsilon, 1e-10, REDUCE_CLAIM))
        w = protocols.reduce_3_to_2(yes)
        p_new = accept_probability(w, protocols.honest_reduced_proofs(honest, 1, 0))
        res.append(check_at_least("reduced honest acceptance >= 1 - eps/2", p_new, 1 - epsilon / 2, 1e-10, REDUCE_CLAIM))
        res.append(check_close("reduced honest acceptance = 1/2 + p/2", p_new, 0.5 + p_orig / 2, 1e-12, REDUCE_CLAIM))

        no = toys.threshold_verifier(1 - delta)
        lam = acceptance_operator(no).lambda_max
        res.append(check_at_most("toy no-instance entangled optimum", lam, 1 - delta, 1e-12, REDUCE_CLAIM))
        res.append(check_true("delta > 10 eps", delta > 10 * epsilon, REDUCE_CLAIM))
        config = ProductSearchConfig(restarts=32, seed=seed)
        cert = certify_soundness(protocols.reduce_3_to_2(no), 1 - delta / 20, config, brute_samples=10**6)
        res.append(check_at_most(f"soundness certificate ({cert.bound_used})", cert.value, 1 - delta / 20, claim=REDUCE_CLAIM))
        res.append(check_true("certificate is certified", cert.certified, REDUCE_CLAIM))

        # entangled-prover no-instance: product optimum 1/2, entangled optimum 1
        ghz = toys.ghz_verifier()
        ghz_delta = 0.5
        cert = certify_soundness(protocols.reduce_3_to_2(ghz), 1 - ghz_delta / 20, config)
        res.append(check_at_most(f"GHZ no-instance certificate ({cert.bound_used})", cert.value, 1 - ghz_delta / 20, claim=REDUCE_CLAIM))
        res.append(check_true("GHZ certificate is certified", cert.certified, REDUCE_CLAIM))
        return res

    return _timed(120.0, run, "3-to-2 reduction")


def criterion_remainder_specialisation(seed: int = 4, trials: int = 20) -> list[CheckResult]:
    def run():
        res = []
        for label, v in (("toy", toys.threshold_verifier(0.95)), ("random", toys.random_verifier(1, 1, 3, seed))):
            a = acceptance_operator(protocols.reduce_3_to_2(v)).matrix
            b = acceptance_operator(protocols.reduce_3kr_to_2kr(v, 1, 0)).matrix
            res.append(check_at_most(f"k=1 r=0 operator equals 3-to-2 ({label})", float(np.max(np.abs(a - b))), 1e-12, claim=REDUCE_K_CLAIM))

        v4 = toys.random_verifier(1, 1, 4, seed + 1)
        w = protocols.reduce_3kr_to_2kr(v4, 1, 1)
        rng = make_rng(seed, 2)
        worst = 0.0
        one = np.array([0, 1], dtype=complex)
        for _ in range(trials):
            proofs = []
            for _ in range(2):
                z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
                proofs.append(z / np.linalg.norm(z))
            r3 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            proofs.append(np.kron(r3 / np.linalg.norm(r3), one))
            worst = max(worst, accept_probability(w, proofs))
        res.append(check_at_most(f"ancilla S3 = |1> rejected (max acceptance over {trials})", worst, 0.0, 1e-14, REDUCE_K_CLAIM))

        yes4 = toys.threshold_verifier(0.95, k=4)
        w = protocols.reduce_3kr_to_2kr(yes4, 1, 1)
        p = accept_probability(w, protocols.honest_reduced_proofs(toys.threshold_honest_proofs(4), 1, 1))
        res.append(check_at_least("k=1 r=1 honest acceptance >= 1 - eps/2", p, 0.975, 1e-10, REDUCE_K_CLAIM))
        return res

    return _timed(60.0, run, "(3k+r)-to-(2k+r) reduction")


def criterion_amplification() -> list[CheckResult]:
    def run():
        res = []
        amp = protocols.amplify(SystemParams(1, 2 / 3, 1 / 3), 3, 10)
        res.append(check_true("N = 180", amp.n_attempts == 180, AMPLIFY_CLAIM))
        res.append(check_true("T = 90", amp.threshold == 90, AMPLIFY_CLAIM))
        res.append(check_close("completeness bound", amp.completeness, 1 - 2**-10, 0.0, AMPLIFY_CLAIM))
        res.append(check_close("soundness bound", amp.soundness, 2 / 3, 1e-15, AMPLIFY_CLAIM))
        honest = protocols.amplified_accept_honest(2 / 3, amp)
        res.append(check_at_least("binomial honest acceptance at p=2/3", honest, amp.completeness, claim=AMPLIFY_CLAIM))

        base = toys.threshold_verifier(2 / 3, k=1)
        proof = toys.threshold_honest_proofs(1)[:1]
        p = accept_probability(base, proof)
        for n, t in ((2, 1), (2, 2), (3, 2)):
            rep = protocols.parallel_repetition(base, n, t)
            sim = accept_probability(rep, proof * n)
            res.append(check_close(f"{n}-attempt circuit vs binomial (T={t})", sim, protocols.binomial_tail(n, t, p), 1e-10, AMPLIFY_CLAIM))
        return res

    return _timed(10.0, run, "amplification")


def criterion_perfect_soundness(seed: int = 6, trials: int = 50) -> list[CheckResult]:
    def run():
        res = []
        concat_err = 0.0
        trace_err = 0.0
        verdict_ok = True
        zeros = 0
        for t in range(trials):
            k = 1 + t % 2
            maker = toys.never_accept_verifier if t % 4 >= 2 else toys.random_verifier
            v = maker(1, 1, k, seed * 1000 + t)
            single = protocols.concat_proofs(v)
            m = acceptance_operator(v)
            concat_err = max(concat_err, float(np.max(np.abs(m.matrix - acceptance_operator(single).matrix))))
            nqp = protocols.nqp_simulation(single)
            tr = float(np.real(np.trace(m.matrix))) / 2**single.proof_qubits
            trace_err = max(trace_err, abs(nqp.acceptance - tr))
            verdict_ok &= nqp.zero_verdict == (m.lambda_max <= 1e-12)
            zeros += nqp.zero_verdict
        res.append(check_at_most(f"concat preserves acceptance operator (max over {trials})", concat_err, 1e-14, claim=PERFECT_CLAIM))
        res.append(check_at_most(f"NQP acceptance = tr(M)/2^q (max over {trials})", trace_err, 1e-12, claim=PERFECT_CLAIM))
        res.append(check_true(f"zero verdict matches lambda_max <= 1e-12 ({zeros} zero of {trials})", verdict_ok, PERFECT_CLAIM))
        no = toys.never_accept_verifier(1, 1, 3, seed)
        yes = toys.threshold_verifier(0.5)
        res.append(check_true("perfect-soundness no-instance: zero verdict", protocols.nqp_simulation(protocols.concat_proofs(no)).zero_verdict, PERFECT_CLAIM))
        res.append(check_true("yes-instance: nonzero verdict", not protocols.nqp_simulation(protocols.concat_proofs(yes)).zero_verdict, PERFECT_CLAIM))
        return res

    return _timed(30.0, run, "perfect soundness")


def indist_checks(d: int, seed: int, povm_trials: int = 100, floor_trials: int = 100) -> list[CheckResult]:
    res = []
    target = np.eye(d * d) / d**2
    mix0 = indist.product_basis_mixture(d)
    mix1 = indist.bell_mixture(d)
    res.append(check_at_most(f"product mixture = I/d^2 (d={d})", float(np.max(np.abs(mix0.matrix - target))), 1e-12, claim=INDIST_CLAIM))
    res.append(check_at_most(f"Bell mixture = I/d^2 (d={d})", float(np.max(np.abs(mix1.matrix - target))), 1e-12, claim=INDIST_CLAIM))
    gram = indist.bell_gram(d)
    res.append(check_at_most(f"Bell family Gram = I (d={d})", float(np.max(np.abs(gram - np.eye(d * d)))), 1e-12, claim=INDIST_CLAIM))
    worst = 0.0
    for t in range(povm_trials):
        p01, p10 = indist.povm_error_pair(indist.random_binary_povm(d, seed * 10_007 + t), mix0, mix1)
        worst = max(worst, abs(p01 + p10 - 1))
    res.append(check_at_most(f"POVM p01 + p10 = 1 (d={d}, {povm_trials} POVMs)", worst, 1e-10, claim=INDIST_CLAIM))
    res.extend(indist.fidelity_floor_check(d, floor_trials, seed))
    return res


def criterion_indistinguishability(seed: int = 7) -> list[CheckResult]:
    return _timed(30.0, lambda: [r for d in (2, 4) for r in indist_checks(d, seed + d)], "indistinguishability")


def criterion_optimizer(seed: int = 8, operators: int = 200) -> list[CheckResult]:
    def run():
        res = []
        config = lambda s: ProductSearchConfig(restarts=4, max_iterations=100, seed=s)
        for dims in ([2, 2], [2, 2, 2]):
            mono = True
            excess = -np.inf
            for t in range(operators):
                m = random_acceptance_operator(dims, seed * 100_000 + t)
                out = seesaw(m, dims, config(t))
                for tr in out.traces:
                    mono &= bool(np.all(np.diff(tr) >= -1e-12))
                excess = max(excess, out.value - m.lambda_max)
            label = "x".join(map(str, dims))
            res.append(check_true(f"see-saw monotone on every trace ({label}, {operators} operators)", mono, OPT_CLAIM))
            res.append(check_at_most(f"see-saw - lambda_max ({label})", excess, 1e-9, claim=OPT_CLAIM))
        worst = 0.0
        rng = make_rng(seed, 3)
        for t in range(50):
            a = random_acceptance_operator([2], int(rng.integers(2**62))).matrix
            b = random_acceptance_operator([4], int(rng.integers(2**62))).matrix
            out = seesaw(tensor(a, b), [2, 4], config(t))
            expected = np.linalg.eigvalsh(a)[-1] * np.linalg.eigvalsh(b)[-1]
            worst = max(worst, abs(out.value - expected))
        res.append(check_at_most("product operator recovers lambda(A) lambda(B)", worst, 1e-8, claim=OPT_CLAIM))
        return res

    return _timed(120.0, run, "optimizer")


CRITERIA: dict[str, Callable[[int], list[CheckResult]]] = {
    "1 swap-test formula": lambda seed: criterion_swap_test(seed + 1),
    "2 fidelity identities": lambda seed: criterion_fidelity_identities(seed + 2),
    "3 three-to-two reduction": lambda seed: criterion_reduce_3_to_2(seed + 3),
    "4 (3k+r)-to-(2k+r) specialisation": lambda seed: criterion_remainder_specialisation(seed + 4),
    "5 amplification": lambda seed: criterion_amplification(),
    "6 perfect soundness and NQP": lambda seed: criterion_perfect_soundness(seed + 6),
    "7 indistinguishability": lambda seed: criterion_indistinguishability(seed + 7),
    "8 optimizer sanity": lambda seed: criterion_optimizer(seed + 8),
}
