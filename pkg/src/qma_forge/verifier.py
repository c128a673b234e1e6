"""Executable k-proof verifiers: acceptance probabilities and acceptance operators.

A verifier is an explicit unitary on a register layout whose leading
registers form the work space (initialised to |0...0>) and whose trailing
registers are the proof registers, in proof order. Acceptance means the
designated output qubit of the work space reads 1 after the circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CompatibilityError, ContractError, LayoutError
from .linalg import (
    RegisterLayout,
    apply_local,
    as_matrix,
    check_budget,
    eig_hermitian,
    is_unitary,
    matrix_from_json,
    matrix_to_json,
    register_values,
)
from .states import DensityOperator, PureState

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def swap_operator(n_qubits: int) -> np.ndarray:
    """SWAP of two n-qubit registers, as a 2^(2n) permutation matrix."""
    d = 2**n_qubits
    check_budget(d**4, "swap operator")
    idx = np.arange(d * d)
    a, b = idx // d, idx % d
    out = np.zeros((d * d, d * d), dtype=complex)
    out[b * d + a, idx] = 1
    return out


def compose(layout: RegisterLayout, steps: Sequence[tuple[np.ndarray, Sequence[str]]]) -> np.ndarray:
    """Product of gates applied in sequence; each step is (operator, target registers)."""
    check_budget(layout.dim**2, "circuit")
    u = np.eye(layout.dim, dtype=complex)
    for op, targets in steps:
        u = apply_local(op, targets, layout, u)
    return u


def _flip_index(layout: RegisterLayout, target: str, mask: np.ndarray) -> np.ndarray:
    if layout.qubits(target) != 1:
        raise LayoutError(f"predicate target {target!r} must be a single qubit")
    mask = np.asarray(mask, dtype=bool)
    bit = 1 << (layout.num_qubits - 1 - layout.qubit_offset(target))
    idx = np.arange(layout.dim)
    if np.any(mask != mask[idx ^ bit]):
        raise ContractError("predicate depends on its own target qubit")
    return np.where(mask, idx ^ bit, idx)


def predicate_flip(layout: RegisterLayout, target: str, mask: np.ndarray) -> np.ndarray:
    """Permutation flipping the 1-qubit register ``target`` on basis states where ``mask`` holds.

    ``mask`` is indexed by basis index and must not depend on ``target``.
    """
    new = _flip_index(layout, target, mask)
    check_budget(layout.dim**2, "predicate gate")
    out = np.zeros((layout.dim, layout.dim), dtype=complex)
    out[new, np.arange(layout.dim)] = 1
    return out


def apply_predicate_flip(layout: RegisterLayout, target: str, mask: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``predicate_flip(layout, target, mask) @ u`` as a row permutation."""
    # the flip is an involution, so row new[i] of the product is row i of u
    return np.asarray(u)[_flip_index(layout, target, mask)]


@dataclass(frozen=True, eq=False)
class Verifier:
    """Unitary circuit plus register roles.

    ``output_qubit`` indexes the qubits of the work block, 0 being the most
    significant one.
    """

    circuit: np.ndarray = field(repr=False)
    layout: RegisterLayout
    proof_registers: tuple[str, ...]
    output_qubit: int = 0

    def __post_init__(self):
        u = as_matrix(self.circuit)
        proofs = tuple(self.proof_registers)
        object.__setattr__(self, "proof_registers", proofs)
        names = self.layout.names
        k = len(proofs)
        if k and names[len(names) - k :] != list(proofs):
            raise LayoutError(
                f"proof registers {list(proofs)} must be the trailing registers of {names}"
            )
        if len({self.layout.qubits(p) for p in proofs}) > 1:
            raise LayoutError("proof registers must all have the same size")
        if not 0 <= self.output_qubit < self.work_layout.num_qubits:
            raise LayoutError(f"output qubit {self.output_qubit} outside the work space")
        if u.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(f"circuit shape {u.shape} does not match layout dim {self.layout.dim}")
        if not is_unitary(u):
            raise ContractError("verifier circuit is not unitary")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "circuit", u)

    @property
    def k(self) -> int:
        return len(self.proof_registers)

    @property
    def work_layout(self) -> RegisterLayout:
        return self.layout.without(self.proof_registers)

    @property
    def proof_layout(self) -> RegisterLayout:
        return self.layout.subset(self.proof_registers)

    @property
    def proof_qubits(self) -> int:
        return self.layout.qubits(self.proof_registers[0]) if self.proof_registers else 0

    @property
    def slot_dims(self) -> list[int]:
        return self.proof_layout.dims

    def accept_mask(self) -> np.ndarray:
        shift = self.layout.num_qubits - 1 - self.output_qubit
        return ((np.arange(self.layout.dim) >> shift) & 1).astype(bool)

    def to_json(self) -> dict:
        return {
            "circuit": matrix_to_json(self.circuit),
            "layout": self.layout.to_json(),
            "output_qubit": self.output_qubit,
            "proof_registers": list(self.proof_registers),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Verifier":
        return cls(
            matrix_from_json(data["circuit"]),
            RegisterLayout.from_json(data["layout"]),
            tuple(data["proof_registers"]),
            int(data["output_qubit"]),
        )


@dataclass(frozen=True, eq=False)
class AcceptanceOperator:
    """PSD operator M on the joint proof space with p_acc = <proof|M|proof>."""

    matrix: np.ndarray = field(repr=False)
    slot_dims: tuple[int, ...]

    def __post_init__(self):
        m = as_matrix(self.matrix)
        dims = tuple(int(d) for d in self.slot_dims)
        if m.shape != (int(np.prod(dims)),) * 2:
            raise LayoutError(f"operator shape {m.shape} does not match slots {dims}")
        vals = eig_hermitian(m)[0]
        if vals[-1] < -1e-10 or vals[0] > 1 + 1e-10:
            raise ContractError(f"acceptance operator spectrum [{vals[-1]:.3g}, {vals[0]:.3g}]")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "slot_dims", dims)

    @property
    def lambda_max(self) -> float:
        return float(eig_hermitian(self.matrix)[0][0])


@dataclass(frozen=True)
class SystemParams:
    k: int
    c: float
    s: float
    q: int | None = None  # gap witness: c - s >= 1/q

    def __post_init__(self):
        if not (0 <= self.s <= 1 and 0 <= self.c <= 1):
            raise ContractError(f"c={self.c}, s={self.s} must lie in [0, 1]")
        if self.c <= self.s:
            raise ContractError(f"need c > s, got c={self.c}, s={self.s}")
        if self.q is not None and self.c - self.s < 1 / self.q - 1e-12:
            raise ContractError(f"gap c - s = {self.c - self.s} is below 1/q = {1 / self.q}")


@dataclass(frozen=True)
class SystemVerdict:
    completeness: float
    soundness_bound: float
    c: float
    s: float

    @property
    def completeness_ok(self) -> bool:
        return self.completeness >= self.c

    @property
    def soundness_ok(self) -> bool:
        return self.soundness_bound <= self.s

    def to_json(self) -> dict:
        return {
            "completeness": self.completeness,
            "soundness_bound": self.soundness_bound,
            "c": self.c,
            "s": self.s,
            "completeness_ok": self.completeness_ok,
            "soundness_ok": self.soundness_ok,
        }


def _proof_vectors(v: Verifier, proofs) -> list[np.ndarray]:
    proofs = list(proofs)
    if len(proofs) != v.k:
        raise CompatibilityError(f"verifier takes {v.k} proofs, got {len(proofs)}")
    d = 2**v.proof_qubits
    out = []
    for i, p in enumerate(proofs):
        vec = p.amplitudes if isinstance(p, PureState) else np.asarray(p, dtype=complex).reshape(-1)
        if vec.shape != (d,):
            raise CompatibilityError(f"proof {i} has dimension {vec.size}, register needs {d}")
        out.append(vec)
    return out


def accept_probability(v: Verifier, proofs) -> float:
    """Run the circuit on |0_work> (x) proofs and read the output qubit."""
    joint = np.ones(1, dtype=complex)
    for vec in _proof_vectors(v, proofs):
        joint = np.kron(joint, vec)
    start = np.kron(np.eye(v.work_layout.dim)[0], joint)
    out = v.circuit @ start
    return float(np.sum(np.abs(out[v.accept_mask()]) ** 2))


def accept_probability_joint(v: Verifier, joint) -> float:
    """Acceptance for a possibly entangled proof vector on the joint proof space."""
    joint = joint.amplitudes if isinstance(joint, PureState) else np.asarray(joint, dtype=complex)
    if joint.shape != (v.proof_layout.dim,):
        raise CompatibilityError(f"joint proof has dimension {joint.size}")
    out = v.circuit @ np.kron(np.eye(v.work_layout.dim)[0], joint)
    return float(np.sum(np.abs(out[v.accept_mask()]) ** 2))


def accept_probability_mixed(v: Verifier, proofs) -> float:
    """Density-matrix simulation with (possibly mixed) proofs, one per register."""
    d = 2**v.proof_qubits
    mats = []
    for i, p in enumerate(proofs):
        m = p.matrix if isinstance(p, DensityOperator) else np.asarray(p, dtype=complex)
        if m.ndim == 1:
            m = np.outer(m, m.conj())
        if m.shape != (d, d):
            raise CompatibilityError(f"proof {i} has shape {m.shape}, register needs {d}")
        mats.append(m)
    if len(mats) != v.k:
        raise CompatibilityError(f"verifier takes {v.k} proofs, got {len(mats)}")
    w = v.work_layout.dim
    rho = np.zeros((w, w), dtype=complex)
    rho[0, 0] = 1
    for m in mats:
        rho = np.kron(rho, m)
    out = v.circuit @ rho @ v.circuit.conj().T
    return float(np.real(np.sum(np.diagonal(out)[v.accept_mask()])))


def acceptance_operator(v: Verifier) -> AcceptanceOperator:
    """M = (<0_work| (x) I) U^dagger Pi_acc U (|0_work> (x) I)."""
    dp = v.proof_layout.dim
    # work registers lead, so |0_work> (x) |p> is basis column p
    a = v.circuit[:, :dp][v.accept_mask()]
    m = a.conj().T @ a
    return AcceptanceOperator((m + m.conj().T) / 2, tuple(v.slot_dims))


def optimal_entangled_proof(v: Verifier) -> tuple[float, PureState]:
    m = acceptance_operator(v)
    vals, vecs = eig_hermitian(m.matrix)
    return float(vals[0]), PureState(v.proof_layout, vecs[:, 0] / np.linalg.norm(vecs[:, 0]))


def check_system(v: Verifier, yes_proofs, params: SystemParams, soundness_bound: float) -> SystemVerdict:
    if params.k != v.k:
        raise CompatibilityError(f"params are for {params.k} proofs, verifier takes {v.k}")
    p = accept_probability(v, yes_proofs)
    return SystemVerdict(p, float(soundness_bound), params.c, params.s)


def work_register_mask(layout: RegisterLayout, name: str, value: int) -> np.ndarray:
    return register_values(layout, name) == value
