"""Small hand-built and random verifiers used by the CLI and the test-suite."""

from __future__ import annotations

import numpy as np

from .linalg import RegisterLayout, controlled, embed, tensor
from .states import haar_unitary, make_rng
from .verifier import H, X, Verifier, compose, ry


def _layout(work_qubits: int, proof_qubits: int, k: int) -> RegisterLayout:
    regs = [("W", work_qubits)] + [(f"P{i + 1}", proof_qubits) for i in range(k)]
    return RegisterLayout(tuple(regs))


def threshold_verifier(accept: float, k: int = 3) -> Verifier:
    """One work qubit, k one-qubit proofs.

    Rotates the output qubit by RY(theta), sin^2(theta/2) = ``accept``, when
    proofs 1 and 3.. read 1 and proof 2 (if any) reads |+> (an H is applied
    to it first). The honest proofs are therefore (|1>, |+>, |1>, ...), and the
    acceptance operator has a single nonzero eigenvalue equal to ``accept``.
    """
    layout = _layout(1, 1, k)
    theta = 2 * np.arcsin(np.sqrt(accept))
    gate = ry(theta)
    for _ in range(k):
        gate = controlled(gate)
    proofs = [f"P{i + 1}" for i in range(k)]
    if k == 1:
        return Verifier(compose(layout, [(gate, proofs + ["W"])]), layout, tuple(proofs), output_qubit=0)
    flip2 = X @ H  # |+> -> |1>
    u = compose(layout, [(flip2, ["P2"]), (gate, proofs + ["W"]), (flip2.conj().T, ["P2"])])
    return Verifier(u, layout, tuple(proofs), output_qubit=0)


def threshold_honest_proofs(k: int = 3) -> list[np.ndarray]:
    one = np.array([0, 1], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    return ([one, plus] + [one] * (k - 2))[:k]


def ghz_verifier(k: int = 3) -> Verifier:
    """Accepts exactly the k-qubit GHZ component of the joint proof.

    Entangled optimum 1, product optimum 1/2.
    """
    layout = _layout(1, 1, k)
    d = 2**k
    # CNOT fan-out from the first proof qubit, H on it, then X everywhere: GHZ -> |1...1>
    idx = np.arange(d)
    lead = idx >> (k - 1)
    fan = np.zeros((d, d), dtype=complex)
    fan[idx ^ (lead * (2 ** (k - 1) - 1)), idx] = 1
    to_ones = tensor(*([X] * k)) @ tensor(H, np.eye(d // 2)) @ fan
    proofs = [f"P{i + 1}" for i in range(k)]
    flip = X
    for _ in range(k):
        flip = controlled(flip)
    u = compose(layout, [(to_ones, proofs), (flip, proofs + ["W"]), (to_ones.conj().T, proofs)])
    return Verifier(u, layout, tuple(proofs), output_qubit=0)


def random_verifier(work_qubits: int, proof_qubits: int, k: int, seed: int) -> Verifier:
    """Haar-random circuit on the whole layout; output is the first work qubit."""
    layout = _layout(work_qubits, proof_qubits, k)
    u = haar_unitary(layout.dim, make_rng(seed))
    return Verifier(u, layout, tuple(f"P{i + 1}" for i in range(k)), output_qubit=0)


def never_accept_verifier(work_qubits: int, proof_qubits: int, k: int, seed: int) -> Verifier:
    """Random circuit that never touches the output qubit (perfect soundness, M = 0)."""
    layout = _layout(work_qubits, proof_qubits, k)
    rest = haar_unitary(layout.dim // 2, make_rng(seed))
    u = tensor(np.eye(2), rest)
    return Verifier(u, layout, tuple(f"P{i + 1}" for i in range(k)), output_qubit=0)


def identity_verifier(work_qubits: int = 1, proof_qubits: int = 1, k: int = 1) -> Verifier:
    layout = _layout(work_qubits, proof_qubits, k)
    return Verifier(np.eye(layout.dim), layout, tuple(f"P{i + 1}" for i in range(k)))


def always_accept_verifier(work_qubits: int = 1, proof_qubits: int = 1, k: int = 1) -> Verifier:
    """X on the output qubit, identity elsewhere."""
    layout = _layout(work_qubits, proof_qubits, k)
    x_out = tensor(X, np.eye(2 ** (work_qubits - 1))) if work_qubits > 1 else X
    u = embed(x_out, ["W"], layout)
    return Verifier(u, layout, tuple(f"P{i + 1}" for i in range(k)))
