"""Dense complex linear algebra over qubit register spaces.

Conventions: a :class:`RegisterLayout` lists registers from most to least
significant, so the basis index of a joint state is the big-endian reading
of the register contents in layout order. ``tensor(a, b)`` therefore lines
up with concatenating the layouts of ``a`` and ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError, CutError, LayoutError, NotPSDError, SizeLimitError

MAX_AMPLITUDES = 2**24
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
PSD_TOL = 1e-10


def check_budget(entries: int, what: str = "matrix") -> None:
    if entries > MAX_AMPLITUDES:
        raise SizeLimitError(
            f"{what} needs {entries} amplitudes, budget is {MAX_AMPLITUDES}"
        )


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named qubit registers."""

    registers: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        regs = tuple((str(name), int(q)) for name, q in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [name for name, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, q in regs:
            if q < 1:
                raise LayoutError(f"register {name!r} has {q} qubits")

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(registers))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.registers]

    @property
    def num_qubits(self) -> int:
        return sum(q for _, q in self.registers)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @property
    def dims(self) -> list[int]:
        return [2**q for _, q in self.registers]

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.registers)

    def qubits(self, name: str) -> int:
        for reg, q in self.registers:
            if reg == name:
                return q
        raise LayoutError(f"unknown register {name!r}; layout has {self.names}")

    def position(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}; layout has {self.names}") from None

    def qubit_offset(self, name: str) -> int:
        """Index of the register's most significant qubit (0 = leftmost)."""
        offset = 0
        for reg, q in self.registers:
            if reg == name:
                return offset
            offset += q
        raise LayoutError(f"unknown register {name!r}; layout has {self.names}")

    def subset(self, names: Iterable[str]) -> "RegisterLayout":
        """Sub-layout with the given registers, in the order given."""
        return RegisterLayout(tuple((n, self.qubits(n)) for n in names))

    def without(self, names: Iterable[str]) -> "RegisterLayout":
        drop = set(names)
        for n in drop:
            self.position(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))

    def reordered(self, order: Sequence[str]) -> "RegisterLayout":
        _check_permutation(self, order)
        return self.subset(order)

    def merged(self, names: Sequence[str], new_name: str) -> "RegisterLayout":
        """Fuse adjacent registers into one; the matrix representation is unchanged."""
        idx = [self.position(n) for n in names]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise LayoutError(f"registers {list(names)} are not adjacent in order")
        q = sum(self.qubits(n) for n in names)
        regs = list(self.registers)
        regs[idx[0] : idx[-1] + 1] = [(new_name, q)]
        return RegisterLayout(tuple(regs))

    def to_json(self) -> dict:
        return {"registers": [{"name": n, "qubits": q} for n, q in self.registers]}

    @classmethod
    def from_json(cls, data: dict) -> "RegisterLayout":
        return cls(tuple((r["name"], r["qubits"]) for r in data["registers"]))


def _check_permutation(layout: RegisterLayout, order: Sequence[str]) -> None:
    if sorted(order) != sorted(layout.names) or len(set(order)) != len(order):
        raise LayoutError(f"{list(order)} is not a permutation of {layout.names}")


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ContractError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix has non-finite entries")
    return m


def tensor(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors)."""
    if not factors:
        return np.ones((1, 1), dtype=complex)
    size = 1
    arrays = []
    for f in factors:
        a = np.asarray(f, dtype=complex)
        if not np.all(np.isfinite(a)):
            raise ContractError("tensor factor has non-finite entries")
        size *= a.size
        arrays.append(a)
    check_budget(size, "tensor product")
    out = arrays[0]
    for a in arrays[1:]:
        out = np.kron(out, a)
    return out


def partial_trace(rho, layout: RegisterLayout, traced: Iterable[str]) -> np.ndarray:
    rho = as_matrix(rho)
    traced = list(dict.fromkeys(traced))
    for name in traced:
        layout.position(name)
    if rho.shape != (layout.dim, layout.dim):
        raise LayoutError(f"matrix shape {rho.shape} does not match layout dim {layout.dim}")
    keep = [n for n in layout.names if n not in traced]
    n = len(layout)
    t = rho.reshape(layout.dims * 2)
    keep_ax = [layout.position(k) for k in keep]
    tr_ax = [layout.position(k) for k in traced]
    t = t.transpose(keep_ax + tr_ax + [n + a for a in keep_ax] + [n + a for a in tr_ax])
    dk = layout.subset(keep).dim
    dt = layout.subset(traced).dim
    return np.einsum("aibi->ab", t.reshape(dk, dt, dk, dt))


def _check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    if h.shape[0] != h.shape[1]:
        raise ContractError(f"expected a square matrix, got {h.shape}")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > tol:
        raise ContractError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    return (h + h.conj().T) / 2


def eig_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvector columns."""
    h = _check_hermitian(as_matrix(h))
    vals, vecs = np.linalg.eigh(h)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def psd_sqrt(rho) -> np.ndarray:
    vals, vecs = eig_hermitian(rho)
    if vals.size and vals[-1] < -PSD_TOL:
        raise NotPSDError(f"minimum eigenvalue {vals[-1]:.3g} below -{PSD_TOL}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.conj().T


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


class Schmidt(NamedTuple):
    coefficients: np.ndarray
    left: np.ndarray  # columns are states on the cut registers
    right: np.ndarray  # columns are states on the complement
    left_layout: RegisterLayout
    right_layout: RegisterLayout


def _split(layout: RegisterLayout, cut: Iterable[str]) -> tuple[list[str], list[str]]:
    cut = set(cut)
    for name in cut:
        if name not in layout:
            raise CutError(f"unknown register {name!r} in cut")
    left = [n for n in layout.names if n in cut]
    right = [n for n in layout.names if n not in cut]
    if not left or not right:
        raise CutError("cut must be a nonempty proper subset of the registers")
    return left, right


def schmidt(psi, layout: RegisterLayout, cut: Iterable[str]) -> Schmidt:
    """Schmidt decomposition of a pure state across ``cut`` | complement.

    Left vectors live on the cut registers (in layout order), right vectors
    on the remaining registers.
    """
    left, right = _split(layout, cut)
    vec = permute_state(psi, layout, left + right)
    ll, rl = layout.subset(left), layout.subset(right)
    u, s, vh = np.linalg.svd(vec.reshape(ll.dim, rl.dim), full_matrices=False)
    return Schmidt(s, u, vh.T, ll, rl)


def permute_state(vec, layout: RegisterLayout, new_order: Sequence[str]) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    _check_permutation(layout, new_order)
    if vec.shape != (layout.dim,):
        raise LayoutError(f"vector length {vec.shape} does not match layout dim {layout.dim}")
    axes = [layout.position(n) for n in new_order]
    return vec.reshape(layout.dims).transpose(axes).reshape(-1)


def permute_registers(op, layout: RegisterLayout, new_order: Sequence[str]) -> np.ndarray:
    """Express ``op`` in the register order ``new_order``.

    Equivalent to ``P @ op @ P.conj().T`` where ``P`` maps each basis state of
    ``layout`` to the same register contents listed in ``new_order``.
    """
    op = as_matrix(op)
    _check_permutation(layout, new_order)
    if op.shape != (layout.dim, layout.dim):
        raise LayoutError(f"matrix shape {op.shape} does not match layout dim {layout.dim}")
    n = len(layout)
    axes = [layout.position(name) for name in new_order]
    t = op.reshape(layout.dims * 2).transpose(axes + [n + a for a in axes])
    return t.reshape(layout.dim, layout.dim)


def controlled(op) -> np.ndarray:
    """|0><0| (x) I + |1><1| (x) op, with the control as the leading qubit."""
    op = as_matrix(op)
    if not is_unitary(op):
        raise ContractError("controlled() needs a unitary operator")
    d = op.shape[0]
    check_budget(4 * d * d, "controlled gate")
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = np.eye(d)
    out[d:, d:] = op
    return out


def embed(op, targets: Sequence[str], layout: RegisterLayout) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in that order) to the whole layout."""
    op = as_matrix(op)
    targets = list(targets)
    sub = layout.subset(targets)
    if op.shape != (sub.dim, sub.dim):
        raise LayoutError(
            f"operator shape {op.shape} does not match registers {targets} (dim {sub.dim})"
        )
    rest = [n for n in layout.names if n not in targets]
    check_budget(layout.dim**2, "embedded operator")
    full = np.kron(op, np.eye(layout.subset(rest).dim))
    staged = layout.reordered(targets + rest)
    return permute_registers(full, staged, layout.names)


def apply_local(op, targets: Sequence[str], layout: RegisterLayout, u) -> np.ndarray:
    """``embed(op, targets, layout) @ u`` without forming the embedded operator."""
    op = as_matrix(op)
    targets = list(targets)
    sub = layout.subset(targets)
    if op.shape != (sub.dim, sub.dim):
        raise LayoutError(
            f"operator shape {op.shape} does not match registers {targets} (dim {sub.dim})"
        )
    u = np.asarray(u, dtype=complex)
    if u.shape[0] != layout.dim:
        raise LayoutError(f"{u.shape[0]} rows for layout of dim {layout.dim}")
    n = len(layout)
    cols = u.shape[1]
    axes = [layout.position(t) for t in targets]
    order = axes + [i for i in range(n) if i not in axes] + [n]
    t = u.reshape(layout.dims + [cols]).transpose(order)
    shape = t.shape
    t = (op @ t.reshape(sub.dim, -1)).reshape(shape)
    return t.transpose(np.argsort(order)).reshape(layout.dim, cols)


def basis_bits(layout: RegisterLayout) -> np.ndarray:
    """Bit table of shape (dim, num_qubits); column 0 is the leading qubit."""
    n = layout.num_qubits
    idx = np.arange(layout.dim)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)


def register_values(layout: RegisterLayout, name: str) -> np.ndarray:
    """Integer content of register ``name`` for every basis index."""
    off = layout.qubit_offset(name)
    q = layout.qubits(name)
    shift = layout.num_qubits - off - q
    return (np.arange(layout.dim) >> shift) & (2**q - 1)


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def matrix_from_json(data: dict) -> np.ndarray:
    rows, cols = int(data["rows"]), int(data["cols"])
    entries = data["entries"]
    if len(entries) != rows * cols:
        raise ContractError(f"{len(entries)} entries for a {rows}x{cols} matrix")
    check_budget(rows * cols)
    flat = np.array([complex(re, im) for re, im in entries], dtype=complex)
    return as_matrix(flat.reshape(rows, cols))
