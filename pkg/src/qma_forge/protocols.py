"""Verifier-to-verifier compilers and the bound arithmetic that goes with them.

Every compiler returns a fresh :class:`~qma_forge.verifier.Verifier`; none
of them mutate their input. Random test selection between two branches is
implemented coherently: a selector qubit ``C`` is put in |+>, each branch
acts conditioned on ``C``, and a reversible predicate writes the combined
accept condition into a fresh output qubit ``OUT``. Since nothing acts on
``C`` afterwards, the acceptance probability is the 1/2-1/2 mixture of the
branch probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HypothesisError, LayoutError, ShapeError, SizeLimitError
from .linalg import RegisterLayout, apply_local, check_budget, controlled, embed, register_values, tensor
from .states import DensityOperator
from .verifier import H, X, SystemParams, Verifier, apply_predicate_flip, compose, swap_operator


# --- controlled-swap test -------------------------------------------------

def swap_test_verifier(n_qubits: int) -> Verifier:
    """Two-proof verifier: H on B, B-controlled swap of R1/R2, H on B, accept iff B = 0.

    The final X on B turns "B = 0" into the standard "output qubit reads 1".
    """
    if n_qubits < 1:
        raise ShapeError("swap test needs registers of at least one qubit")
    check_budget(2 ** (2 * (2 * n_qubits + 1)), "swap-test circuit")
    layout = RegisterLayout.of(("B", 1), ("R1", n_qubits), ("R2", n_qubits))
    u = compose(
        layout,
        [
            (H, ["B"]),
            (controlled(swap_operator(n_qubits)), ["B", "R1", "R2"]),
            (H, ["B"]),
            (X, ["B"]),
        ],
    )
    return Verifier(u, layout, ("R1", "R2"), output_qubit=0)


def swap_test_analytic(rho: DensityOperator, sigma: DensityOperator) -> float:
    if rho.layout != sigma.layout:
        raise LayoutError("swap test of states on different layouts")
    return 0.5 + 0.5 * float(np.real(np.trace(rho.matrix @ sigma.matrix)))


# --- parallel repetition --------------------------------------------------

@dataclass(frozen=True)
class AmplifiedParams:
    n_attempts: int
    threshold: int
    completeness: float
    soundness: float
    relaxed_soundness: float  # 1 - (c - s)/2
    gap_soundness: float  # 1 - 1/(2q)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def amplify(params: SystemParams, gap_q: int, target_p: int) -> AmplifiedParams:
    """Bound bookkeeping for N = 2 p q^2 parallel attempts with a majority-style threshold."""
    c, s = params.c, params.s
    if c - s < 1 / gap_q - 1e-12:
        raise HypothesisError(f"c - s = {c - s:.6g} is below 1/q = {1 / gap_q:.6g}")
    n = 2 * target_p * gap_q**2
    threshold = math.ceil(n * (c + s) / 2 - 1e-9)
    return AmplifiedParams(
        n_attempts=n,
        threshold=threshold,
        completeness=1 - 2.0**-target_p,
        soundness=2 * s / (c + s),
        relaxed_soundness=1 - (c - s) / 2,
        gap_soundness=1 - 1 / (2 * gap_q),
    )


def binomial_tail(n: int, threshold: int, p: float) -> float:
    """P[Bin(n, p) >= threshold], summed in log space."""
    if threshold <= 0:
        return 1.0
    if threshold > n:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    lp, lq = math.log(p), math.log1p(-p)
    logs = [
        math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) + j * lp + (n - j) * lq
        for j in range(threshold, n + 1)
    ]
    top = max(logs)
    return min(1.0, math.exp(top) * math.fsum(math.exp(x - top) for x in logs))


def amplified_accept_honest(per_attempt_p: float, amp: AmplifiedParams) -> float:
    return binomial_tail(amp.n_attempts, amp.threshold, per_attempt_p)


def parallel_repetition(v: Verifier, n_attempts: int, threshold: int) -> Verifier:
    """Materialise ``n_attempts`` independent copies of ``v`` with an at-least-``threshold`` rule.

    Each copy gets its own work space and its own k proofs. Only feasible for
    very small ``n_attempts``.
    """
    work = v.work_layout
    regs: list[tuple[str, int]] = [("OUT", 1)]
    for i in range(n_attempts):
        regs += [(f"{name}#{i}", q) for name, q in work.registers]
    proofs = []
    for i in range(n_attempts):
        for name in v.proof_registers:
            regs.append((f"{name}#{i}", v.proof_qubits))
            proofs.append(f"{name}#{i}")
    layout = RegisterLayout(tuple(regs))
    check_budget(layout.dim**2, "repeated verifier")
    steps = []
    for i in range(n_attempts):
        targets = [f"{n}#{i}" for n in work.names] + [f"{n}#{i}" for n in v.proof_registers]
        steps.append((v.circuit, targets))
    u = compose(layout, steps)
    idx = np.arange(layout.dim)
    count = np.zeros(layout.dim, dtype=int)
    for i in range(n_attempts):
        qubit = layout.qubit_offset(f"{work.names[0]}#{i}") + v.output_qubit
        count += (idx >> (layout.num_qubits - 1 - qubit)) & 1
    u = apply_predicate_flip(layout, "OUT", count >= threshold, u)
    return Verifier(u, layout, tuple(proofs), output_qubit=0)


# --- proof-count reductions ----------------------------------------------

@dataclass(frozen=True)
class ReductionReport:
    input_k: int
    input_epsilon: float
    input_delta: float
    output_k: int
    output_epsilon: float
    output_delta: float
    constructed: Verifier | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "input": {"k": self.input_k, "epsilon": self.input_epsilon, "delta": self.input_delta},
            "output": {"k": self.output_k, "epsilon": self.output_epsilon, "delta": self.output_delta},
            "completeness_bound": 1 - self.output_epsilon,
            "soundness_bound": 1 - self.output_delta,
        }


def split_proof_count(k: int) -> tuple[int, int]:
    """Write k = 3a + r with r in {0, 1, 2} and a >= 1."""
    if k < 3:
        raise ShapeError(f"cannot reduce {k} proofs; need at least 3")
    return k // 3, k % 3


def reduction_bounds(k: int, epsilon: float, delta: float) -> ReductionReport:
    """(3a+r, 1-eps, 1-delta) -> (2a+r, 1-eps/2, 1-delta/20), requiring delta > 10 eps."""
    a, r = split_proof_count(k)
    if not delta > 10 * epsilon:
        raise HypothesisError(f"need delta > 10 epsilon, got delta={delta}, epsilon={epsilon}")
    return ReductionReport(k, epsilon, delta, 2 * a + r, epsilon / 2, delta / 20)


def _work_names(v: Verifier) -> list[tuple[str, int]]:
    return [(f"V.{name}", q) for name, q in v.work_layout.registers]


def _select_and_flip(layout: RegisterLayout, u_sep, u_cons, accept_sep, accept_cons, gate=None):
    """Coherent uniform choice between two branches, accept predicate written into OUT."""
    c_val = register_values(layout, "C")
    sel0 = np.where(c_val == 0, 1.0, 0.0)
    u_sel = sel0[:, None] * u_sep + (1 - sel0)[:, None] * u_cons
    # H on C acts first: right-multiply via (G^T applied to U^T)^T
    u = apply_local(H.T, ["C"], layout, u_sel.T).T
    accept = np.where(c_val == 0, accept_sep, accept_cons)
    if gate is not None:
        accept &= gate
    return apply_predicate_flip(layout, "OUT", accept, u)


def _output_bit(layout: RegisterLayout, v: Verifier) -> np.ndarray:
    first = f"V.{v.work_layout.names[0]}"
    qubit = layout.qubit_offset(first) + v.output_qubit
    return ((np.arange(layout.dim) >> (layout.num_qubits - 1 - qubit)) & 1).astype(bool)


def reduce_3_to_2(v: Verifier) -> Verifier:
    """Three proofs to two: proofs (R1 S1) and (R2 S2) of 2 q_M qubits each.

    With probability 1/2 swap-test S1 against S2 (accept iff B = 0); otherwise
    run the original circuit on (V, R1, R2, S1).
    """
    if v.k != 3:
        raise ShapeError(f"reduce_3_to_2 needs a 3-proof verifier, got {v.k}")
    q = v.proof_qubits
    work = _work_names(v)
    layout = RegisterLayout(
        tuple(work + [("B", 1), ("C", 1), ("OUT", 1), ("R1", q), ("S1", q), ("R2", q), ("S2", q)])
    )
    check_budget(layout.dim**2, "reduced verifier")
    vnames = [n for n, _ in work]
    u_sep = compose(
        layout, [(H, ["B"]), (controlled(swap_operator(q)), ["B", "S1", "S2"]), (H, ["B"])]
    )
    u_cons = embed(v.circuit, vnames + ["R1", "R2", "S1"], layout)
    b_zero = register_values(layout, "B") == 0
    u = _select_and_flip(layout, u_sep, u_cons, b_zero, _output_bit(layout, v))
    merged = layout.merged(["R1", "S1"], "P1").merged(["R2", "S2"], "P2")
    out = merged.qubit_offset("OUT")
    return Verifier(u, merged, ("P1", "P2"), output_qubit=out)


def reduce_3kr_to_2kr(v: Verifier, k: int, r: int) -> Verifier:
    """(3k + r) proofs to (2k + r) proofs.

    Proof registers, in order: (R1_j S1_j) for j = 1..k, (R2_j S2_j) for
    j = 1..k, (R3_j S3_j) for j = 1..r. Every S3_j must be all-zero or the
    verifier rejects. The separability branch swap-tests (S1_1..S1_k) against
    (S2_1..S2_k); the consistency branch feeds (V, R1_*, R2_*, S1_*, R3_*) to
    the original circuit in that order.
    """
    if r not in (0, 1, 2) or k < 1:
        raise ShapeError(f"need k >= 1 and r in {{0, 1, 2}}, got k={k}, r={r}")
    if v.k != 3 * k + r:
        raise ShapeError(f"verifier has {v.k} proofs, expected 3k + r = {3 * k + r}")
    q = v.proof_qubits
    work = _work_names(v)
    groups = [(1, j) for j in range(1, k + 1)] + [(2, j) for j in range(1, k + 1)]
    groups += [(3, j) for j in range(1, r + 1)]
    regs = list(work) + [("B", 1), ("C", 1), ("OUT", 1)]
    for i, j in groups:
        regs += [(f"R{i}_{j}", q), (f"S{i}_{j}", q)]
    layout = RegisterLayout(tuple(regs))
    check_budget(layout.dim**2, "reduced verifier")

    s1 = [f"S1_{j}" for j in range(1, k + 1)]
    s2 = [f"S2_{j}" for j in range(1, k + 1)]
    u_sep = compose(
        layout, [(H, ["B"]), (controlled(swap_operator(k * q)), ["B", *s1, *s2]), (H, ["B"])]
    )
    order = [n for n, _ in work]
    order += [f"R1_{j}" for j in range(1, k + 1)] + [f"R2_{j}" for j in range(1, k + 1)]
    order += s1 + [f"R3_{j}" for j in range(1, r + 1)]
    u_cons = embed(v.circuit, order, layout)

    ancilla_clear = np.ones(layout.dim, dtype=bool)
    for j in range(1, r + 1):
        ancilla_clear &= register_values(layout, f"S3_{j}") == 0
    b_zero = register_values(layout, "B") == 0
    u = _select_and_flip(layout, u_sep, u_cons, b_zero, _output_bit(layout, v), ancilla_clear)

    merged = layout
    proofs = []
    for i, j in groups:
        merged = merged.merged([f"R{i}_{j}", f"S{i}_{j}"], f"P{i}_{j}")
        proofs.append(f"P{i}_{j}")
    return Verifier(u, merged, tuple(proofs), output_qubit=merged.qubit_offset("OUT"))


def honest_reduced_proofs(phis: Sequence[np.ndarray], k: int, r: int) -> list[np.ndarray]:
    """Structured proofs for the reduced verifier built from original proofs phi_1..phi_{3k+r}."""
    phis = [np.asarray(p, dtype=complex) for p in phis]
    if len(phis) != 3 * k + r:
        raise ShapeError(f"expected {3 * k + r} proofs, got {len(phis)}")
    zero = np.zeros_like(phis[0])
    zero[0] = 1
    out = [np.kron(phis[j], phis[2 * k + j]) for j in range(k)]
    out += [np.kron(phis[k + j], phis[2 * k + j]) for j in range(k)]
    out += [np.kron(phis[3 * k + j], zero) for j in range(r)]
    return out


def chain_schedule(k: int, epsilon: float, delta: float) -> list[ReductionReport]:
    """Stage-by-stage (k, eps, delta) ledger for reducing k proofs down to two."""
    stages = []
    stage = 0
    while k > 2:
        stage += 1
        try:
            rep = reduction_bounds(k, epsilon, delta)
        except HypothesisError as exc:
            raise HypothesisError(f"stage {stage}: {exc}") from None
        stages.append(rep)
        k, epsilon, delta = rep.output_k, rep.output_epsilon, rep.output_delta
    return stages


@dataclass(frozen=True)
class ChainResult:
    verifier: Verifier
    amplified: AmplifiedParams
    stages: list[ReductionReport]

    @property
    def final_epsilon(self) -> float:
        return self.stages[-1].output_epsilon if self.stages else 1 - self.amplified.completeness

    @property
    def final_delta(self) -> float:
        return self.stages[-1].output_delta if self.stages else 1 - self.amplified.relaxed_soundness

    def to_json(self) -> dict:
        return {
            "amplified": self.amplified.to_json(),
            "stages": [s.to_json() for s in self.stages],
            "final": {
                "k": self.verifier.k,
                "completeness_bound": 1 - self.final_epsilon,
                "soundness_bound": 1 - self.final_delta,
                "q_prime": 1 / self.final_delta,
            },
        }


def reduce_chain(v: Verifier, params: SystemParams, gap_q: int, target_p: int) -> ChainResult:
    """Amplification bookkeeping followed by repeated (3a+r) -> (2a+r) reductions.

    The amplified system is tracked through its bounds only (eps = 2^-p,
    delta = (c - s)/2); the reductions themselves are materialised on ``v``.
    """
    if v.k < 2:
        raise ShapeError("reduce_chain needs at least two proofs")
    if params.k != v.k:
        raise ShapeError(f"params are for {params.k} proofs, verifier takes {v.k}")
    amp = amplify(params, gap_q, target_p)
    stages = chain_schedule(v.k, 1 - amp.completeness, 1 - amp.relaxed_soundness)
    current = v
    built = []
    for i, rep in enumerate(stages, start=1):
        a, r = split_proof_count(current.k)
        try:
            current = reduce_3kr_to_2kr(current, a, r)
        except SizeLimitError as exc:
            raise SizeLimitError(str(exc), stage=i) from None
        built.append(
            ReductionReport(
                rep.input_k, rep.input_epsilon, rep.input_delta,
                rep.output_k, rep.output_epsilon, rep.output_delta, current,
            )
        )
    return ChainResult(current, amp, built)


# --- perfect soundness and NQP -------------------------------------------

def concat_proofs(v: Verifier) -> Verifier:
    """Same circuit, with all proof registers fused into one proof register ``P``."""
    if v.k == 0:
        raise ShapeError("verifier has no proof registers")
    if v.k == 1:
        return v
    layout = v.layout.merged(list(v.proof_registers), "P")
    return Verifier(v.circuit, layout, ("P",), v.output_qubit)


@dataclass(frozen=True)
class NqpResult:
    acceptance: float
    zero_verdict: bool

    def to_json(self) -> dict:
        return {"acceptance": self.acceptance, "zero_verdict": self.zero_verdict}


def nqp_circuit(v: Verifier) -> tuple[np.ndarray, RegisterLayout, int]:
    """Hadamards on S1, copy S1 into S2, then the verifier on (R, S1)."""
    if v.k != 1:
        raise ShapeError(f"NQP simulation needs a single proof register, got {v.k}; concat first")
    q = v.proof_qubits
    work = [(f"R.{n}", qq) for n, qq in v.work_layout.registers]
    layout = RegisterLayout(tuple(work + [("S1", q), ("S2", q)]))
    check_budget(layout.dim**2, "NQP circuit")
    d = 2**q
    idx = np.arange(d * d)
    a, b = idx // d, idx % d
    copy = np.zeros((d * d, d * d), dtype=complex)
    copy[a * d + (a ^ b), idx] = 1
    hs = tensor(*([H] * q))
    u = compose(layout, [(hs, ["S1"]), (copy, ["S1", "S2"]), (v.circuit, [n for n, _ in work] + ["S1"])])
    return u, layout, v.output_qubit


def nqp_simulation(v: Verifier, zero_tol: float = 1e-12) -> NqpResult:
    u, layout, out_qubit = nqp_circuit(v)
    final = u[:, 0]
    bit = (np.arange(layout.dim) >> (layout.num_qubits - 1 - out_qubit)) & 1
    p = float(np.sum(np.abs(final[bit == 1]) ** 2))
    return NqpResult(p, p <= zero_tol)
