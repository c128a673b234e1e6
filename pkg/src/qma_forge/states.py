"""Pure and mixed states, seeded sampling, fidelity and entanglement helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, CutError, LayoutError, NotPSDError, StateIndexError
from .linalg import (
    HERMITIAN_TOL,
    PSD_TOL,
    RegisterLayout,
    as_matrix,
    check_budget,
    eig_hermitian,
    matrix_from_json,
    matrix_to_json,
    permute_state,
    psd_sqrt,
    schmidt,
)

NORM_TOL = 1e-10


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and an optional sub-stream path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _log2(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise LayoutError(f"dimension {dim} is not a power of two")
    return n


def default_layout(dim: int, name: str = "q") -> RegisterLayout:
    n = _log2(dim)
    return RegisterLayout(((name, n),)) if n else RegisterLayout()


@dataclass(frozen=True, eq=False)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.layout.dim,):
            raise LayoutError(f"{amps.size} amplitudes for layout of dim {self.layout.dim}")
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or abs(norm - 1) > NORM_TOL:
            raise ContractError(f"state norm is {norm}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, layout: RegisterLayout | None = None, normalize: bool = False) -> "PureState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(layout if layout is not None else default_layout(vec.size), vec)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_json(self) -> dict:
        return {**matrix_to_json(self.amplitudes), "layout": self.layout.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "PureState":
        return cls(RegisterLayout.from_json(data["layout"]), matrix_from_json(data).reshape(-1))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: RegisterLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        d = self.layout.dim
        if m.shape != (d, d):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dim {d}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ContractError("density operator is not Hermitian")
        if abs(np.trace(m) - 1) > NORM_TOL:
            raise ContractError(f"density operator trace is {np.trace(m).real}")
        lo = eig_hermitian(m)[0][-1]
        if lo < -PSD_TOL:
            raise NotPSDError(f"density operator has eigenvalue {lo:.3g}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m, layout: RegisterLayout | None = None) -> "DensityOperator":
        m = np.asarray(m, dtype=complex)
        return cls(layout if layout is not None else default_layout(m.shape[0]), m)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_json(self) -> dict:
        return {**matrix_to_json(self.matrix), "layout": self.layout.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "DensityOperator":
        return cls(RegisterLayout.from_json(data["layout"]), matrix_from_json(data))


@dataclass(frozen=True, eq=False)
class Povm:
    layout: RegisterLayout
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.layout.dim
        elems = tuple(as_matrix(e) for e in self.elements)
        total = np.zeros((d, d), dtype=complex)
        for e in elems:
            if e.shape != (d, d):
                raise LayoutError(f"POVM element shape {e.shape}, layout dim {d}")
            if eig_hermitian(e)[0][-1] < -PSD_TOL:
                raise NotPSDError("POVM element is not PSD")
            total += e
        if np.max(np.abs(total - np.eye(d))) > 1e-9:
            raise ContractError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elems)


def density_of(psi: PureState) -> DensityOperator:
    a = psi.amplitudes
    return DensityOperator(psi.layout, np.outer(a, a.conj()))


def haar_random_pure(layout: RegisterLayout, seed: int) -> PureState:
    rng = make_rng(seed)
    check_budget(layout.dim, "state")
    z = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return PureState(layout, z / np.linalg.norm(z))


def random_pure_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def random_density(layout: RegisterLayout, seed: int, rank: int | None = None) -> DensityOperator:
    """rho = W W^dagger / tr(W W^dagger) with a complex Gaussian W of the given rank."""
    rng = make_rng(seed)
    d = layout.dim
    rank = d if rank is None else rank
    w = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = w @ w.conj().T
    return DensityOperator(layout, rho / np.trace(rho).real)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with the phase fix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def _matrix_of(state) -> tuple[np.ndarray, RegisterLayout | None]:
    if isinstance(state, DensityOperator):
        return state.matrix, state.layout
    if isinstance(state, PureState):
        a = state.amplitudes
        return np.outer(a, a.conj()), state.layout
    m = np.asarray(state, dtype=complex)
    if m.ndim == 1:
        m = np.outer(m, m.conj())
    return m, None


def fidelity(rho, sigma) -> float:
    """F(rho, sigma) = tr sqrt(sqrt(rho) sigma sqrt(rho)), in [0, 1].

    Accepts :class:`DensityOperator`, :class:`PureState`, or raw arrays
    (vectors are treated as pure states).
    """
    a, la = _matrix_of(rho)
    b, lb = _matrix_of(sigma)
    if la is not None and lb is not None and la != lb:
        raise LayoutError("fidelity of states on different layouts")
    if a.shape != b.shape:
        raise LayoutError(f"fidelity of shapes {a.shape} and {b.shape}")
    root = psd_sqrt(a)
    inner = root @ b @ root
    vals = eig_hermitian((inner + inner.conj().T) / 2)[0]
    f = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    return min(max(f, 0.0), 1.0)


def bell_state(d: int, k: int, l: int) -> PureState:
    """Generalized Bell state g_{k,l} on registers A and B of dimension ``d`` each.

    g_{k,l} = d^{-1/2} sum_j exp(2 pi i jk/d) |e_j> (x) |e_{(j+l) mod d}>,
    with j, k, l in 1..d and e_m identified with basis index (m - 1) mod d.
    """
    n = _log2(d)
    if n == 0:
        raise LayoutError("bell_state needs d >= 2")
    if not (1 <= k <= d and 1 <= l <= d):
        raise StateIndexError(f"indices k={k}, l={l} outside 1..{d}")
    vec = np.zeros(d * d, dtype=complex)
    for j in range(1, d + 1):
        a = (j - 1) % d
        b = ((j + l) % d - 1) % d
        vec[a * d + b] += np.exp(2j * np.pi * j * k / d)
    return PureState(RegisterLayout((("A", n), ("B", n))), vec / np.sqrt(d))


def nearest_product_state(psi: PureState, cut: Iterable[str]) -> tuple[PureState, float]:
    """Closest product state across the cut and its fidelity |<psi|phi (x) chi>|."""
    dec = schmidt(psi.amplitudes, psi.layout, cut)
    prod = np.kron(dec.left[:, 0], dec.right[:, 0])
    order = dec.left_layout.names + dec.right_layout.names
    staged = psi.layout.reordered(order)
    vec = permute_state(prod, staged, psi.layout.names)
    return PureState(psi.layout, vec / np.linalg.norm(vec)), float(dec.coefficients[0])


def is_maximally_entangled(psi: PureState, cut: Iterable[str], tol: float = 1e-9) -> bool:
    dec = schmidt(psi.amplitudes, psi.layout, cut)
    d = dec.left_layout.dim
    if d != dec.right_layout.dim:
        raise CutError(f"unequal cut dimensions {d} and {dec.right_layout.dim}")
    sq = np.zeros(d)
    sq[: dec.coefficients.size] = dec.coefficients**2
    return bool(np.all(np.abs(sq - 1 / d) <= tol))


def product_state(factors: Sequence, layout: RegisterLayout | None = None) -> PureState:
    """Tensor product of pure factors (vectors or PureState)."""
    vecs = [f.amplitudes if isinstance(f, PureState) else np.asarray(f, dtype=complex) for f in factors]
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return PureState.from_vector(out, layout)
