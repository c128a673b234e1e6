"""Adversarial provers: product-proof maximisation and soundness certificates.

The product maximum max <phi_1..phi_k| M |phi_1..phi_k> is non-convex. The
see-saw search only ever reports a value it has actually attained, so it is
a lower bound; the top eigenvalue of M is an upper bound. Certificates keep
the two apart.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, ShapeError, SizeLimitError, StateIndexError
from .linalg import eig_hermitian
from .states import haar_unitary, make_rng, random_pure_vector
from .verifier import AcceptanceOperator, Verifier, acceptance_operator

ORACLE_MAX_DIM = 64
AGREEMENT_TOL = 1e-4
THRESHOLD_SLACK = 1e-12  # rounding allowance when comparing a bound to its threshold
_BATCH = 1 << 15


@dataclass(frozen=True)
class ProductSearchConfig:
    restarts: int = 8
    max_iterations: int = 200
    convergence_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ContractError("need at least one restart")
        if self.convergence_tol <= 0:
            raise ContractError("convergence tolerance must be positive")


@dataclass
class SeesawResult:
    value: float
    proofs: list[np.ndarray]
    trace: list[float]  # objective of the winning restart, one entry per slot update
    restart_values: list[float] = field(default_factory=list)
    traces: list[list[float]] = field(default_factory=list, repr=False)


def _matrix(m) -> np.ndarray:
    return m.matrix if isinstance(m, AcceptanceOperator) else np.asarray(m, dtype=complex)


def _check_dims(mat: np.ndarray, slot_dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in slot_dims]
    if mat.shape != (int(np.prod(dims)),) * 2:
        raise ShapeError(f"operator of shape {mat.shape} does not factor as {dims}")
    return dims


def quadratic_form(m, proofs: Sequence[np.ndarray]) -> float:
    joint = np.ones(1, dtype=complex)
    for p in proofs:
        joint = np.kron(joint, p)
    return float(np.real(joint.conj() @ _matrix(m) @ joint))


def effective_operator(m, proofs: Sequence[np.ndarray], hold_out: int, slot_dims: Sequence[int] | None = None) -> np.ndarray:
    """Contract M against every proof except slot ``hold_out``.

    ``proofs[hold_out]`` is ignored and may be ``None``.
    """
    mat = _matrix(m)
    if slot_dims is None:
        if isinstance(m, AcceptanceOperator):
            slot_dims = m.slot_dims
        else:
            slot_dims = [len(p) if p is not None else None for p in proofs]
            missing = mat.shape[0] // int(np.prod([d for d in slot_dims if d is not None]))
            slot_dims = [missing if d is None else d for d in slot_dims]
    dims = _check_dims(mat, slot_dims)
    k = len(dims)
    if not 0 <= hold_out < k:
        raise StateIndexError(f"hold-out slot {hold_out} outside 0..{k - 1}")
    t = mat.reshape(dims + dims)
    operands: list = [t, list(range(2 * k))]
    for j in range(k):
        if j == hold_out:
            continue
        p = np.asarray(proofs[j], dtype=complex)
        operands += [p.conj(), [j], p, [k + j]]
    out = np.einsum(*operands, [hold_out, k + hold_out])
    return (out + out.conj().T) / 2


def _top_vector(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Top eigenpair; ties broken by the lexicographically largest phase-normalised vector."""
    vals, vecs = eig_hermitian(h)
    top = vals[0]
    candidates = []
    for i in np.flatnonzero(vals >= top - 1e-12):
        v = vecs[:, i]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size:
            v = v * (abs(v[nz[0]]) / v[nz[0]])
        candidates.append(v)
    best = max(candidates, key=lambda v: tuple(np.round(v.real, 12)))
    return float(top), best


def marginal_start(mat: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    """Top eigenvector of each slot's marginal of M / tr M."""
    tr = np.real(np.trace(mat))
    if tr <= 1e-15:
        return [np.eye(d, dtype=complex)[0] for d in dims]
    k = len(dims)
    t = (mat / tr).reshape(list(dims) * 2)
    out = []
    for i in range(k):
        cols = [k + j if j == i else j for j in range(k)]
        marg = np.einsum(t, list(range(k)) + cols, [i, k + i])
        out.append(_top_vector((marg + marg.conj().T) / 2)[1])
    return out


def _run_restart(mat, dims, start, config) -> tuple[float, list[np.ndarray], list[float]]:
    proofs = [p / np.linalg.norm(p) for p in start]
    value = quadratic_form(mat, proofs)
    trace = [value]
    for _ in range(config.max_iterations):
        before = value
        for i in range(len(dims)):
            value, proofs[i] = _top_vector(effective_operator(mat, proofs, i, dims))
            trace.append(value)
        if abs(value - before) < config.convergence_tol:
            break
    return value, proofs, trace


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QMA_FORGE_THREADS", "1")))
    except ValueError:
        return 1


def seesaw(m, slot_dims: Sequence[int], config: ProductSearchConfig | None = None) -> SeesawResult:
    """Alternating top-eigenvector maximisation over product proofs.

    Restart 0 starts from the marginal heuristic; restart i >= 1 from a
    Haar-random product tuple drawn with seed ``config.seed + i``.
    """
    config = config or ProductSearchConfig()
    mat = _matrix(m)
    dims = _check_dims(mat, slot_dims)

    def start(i: int) -> list[np.ndarray]:
        if i == 0:
            return marginal_start(mat, dims)
        rng = make_rng(config.seed + i)
        return [random_pure_vector(d, rng) for d in dims]

    def run(i: int):
        return _run_restart(mat, dims, start(i), config)

    workers = min(_workers(), config.restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, range(config.restarts)))
    else:
        runs = [run(i) for i in range(config.restarts)]
    values = [r[0] for r in runs]
    best = int(np.argmax(values))
    return SeesawResult(values[best], runs[best][1], runs[best][2], values, [r[2] for r in runs])


def brute_force_product(m, slot_dims: Sequence[int], samples: int, seed: int, profile_last: bool = False) -> float:
    """Max of the quadratic form over all basis product tuples and ``samples`` Haar product tuples.

    Random tuples are drawn row by row from a single stream, so a run with
    more samples sees a superset of the tuples of a shorter run. With
    ``profile_last`` the last slot is not sampled but maximised exactly for
    each sampled prefix (top eigenvalue of the contracted operator), which
    removes one slot's worth of sampling error.
    """
    mat = _matrix(m)
    dims = _check_dims(mat, slot_dims)
    total = int(np.prod(dims))
    if total > ORACLE_MAX_DIM:
        raise SizeLimitError(f"brute force limited to joint dimension {ORACLE_MAX_DIM}, got {total}")
    best = float(np.max(np.real(np.diagonal(mat))))
    sampled = dims[:-1] if profile_last else dims
    if profile_last:
        last = dims[-1]
        head = total // last
        t = mat.reshape(head, last, head, last)
        if len(dims) == 1:
            return float(eig_hermitian(mat)[0][0])
    rng = make_rng(seed)
    width = 2 * sum(sampled)
    done = 0
    while done < samples:
        b = min(_BATCH, samples - done)
        raw = rng.standard_normal((b, width))
        joint = np.ones((b, 1), dtype=complex)
        col = 0
        for d in sampled:
            z = raw[:, col : col + d] + 1j * raw[:, col + d : col + 2 * d]
            col += 2 * d
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            joint = (joint[:, :, None] * z[:, None, :]).reshape(b, -1)
        if profile_last:
            eff = np.einsum("bi,ixjy,bj->bxy", joint.conj(), t, joint)
            vals = np.linalg.eigvalsh((eff + np.conj(np.swapaxes(eff, 1, 2))) / 2)[:, -1]
        else:
            vals = np.real(np.einsum("bi,ij,bj->b", joint.conj(), mat, joint))
        best = max(best, float(vals.max()))
        done += b
    return best


@dataclass(frozen=True)
class SoundnessCertificate:
    product_lower_bound: float
    entangled_upper_bound: float
    threshold: float
    restarts: int
    seed: int
    brute_force_value: float | None = None
    seesaw_value: float | None = None

    def __post_init__(self):
        if self.product_lower_bound > self.entangled_upper_bound + 1e-9:
            raise ContractError("product value exceeds the entangled bound")

    @property
    def conclusive(self) -> bool:
        """The entangled optimum alone proves soundness at ``threshold``."""
        return self.entangled_upper_bound <= self.threshold + THRESHOLD_SLACK

    @property
    def cross_checked(self) -> bool:
        return (
            self.brute_force_value is not None
            and self.seesaw_value is not None
            and abs(self.brute_force_value - self.seesaw_value) <= AGREEMENT_TOL
        )

    @property
    def bound_used(self) -> str:
        if self.conclusive:
            return "entangled"
        return "product-cross-checked" if self.cross_checked else "product-lower-bound"

    @property
    def value(self) -> float:
        return self.entangled_upper_bound if self.conclusive else self.product_lower_bound

    @property
    def certified(self) -> bool:
        return self.value <= self.threshold + THRESHOLD_SLACK and self.bound_used != "product-lower-bound"

    @property
    def refuted(self) -> bool:
        """Some product strategy was found that beats the threshold."""
        return self.product_lower_bound > self.threshold + THRESHOLD_SLACK

    def to_json(self) -> dict:
        return {
            "product_lower_bound": self.product_lower_bound,
            "entangled_upper_bound": self.entangled_upper_bound,
            "conclusive": self.conclusive,
            "threshold": self.threshold,
            "restarts": self.restarts,
            "seed": self.seed,
            "bound_used": self.bound_used,
            "value": self.value,
            "certified": self.certified,
            "brute_force_value": self.brute_force_value,
            "seesaw_value": self.seesaw_value,
        }


def certify_soundness(
    v: Verifier,
    threshold: float,
    config: ProductSearchConfig | None = None,
    slot_dims: Sequence[int] | None = None,
    brute_samples: int = 0,
    profile_last: bool = True,
) -> SoundnessCertificate:
    """Bound the best acceptance any proof tuple achieves against ``threshold``.

    With ``brute_samples > 0`` and a joint proof dimension within the oracle
    scale, the see-saw value is cross-checked against random sampling.
    """
    config = config or ProductSearchConfig()
    m = acceptance_operator(v)
    dims = list(slot_dims) if slot_dims is not None else list(m.slot_dims)
    lam = m.lambda_max
    ss = seesaw(m, dims, config)
    brute = None
    if brute_samples > 0 and int(np.prod(dims)) <= ORACLE_MAX_DIM:
        brute = brute_force_product(m, dims, brute_samples, config.seed, profile_last)
    lower = max(ss.value, brute if brute is not None else -np.inf)
    return SoundnessCertificate(
        product_lower_bound=min(lower, lam),
        entangled_upper_bound=lam,
        threshold=threshold,
        restarts=config.restarts,
        seed=config.seed,
        brute_force_value=brute,
        seesaw_value=ss.value,
    )


def random_acceptance_operator(slot_dims: Sequence[int], seed: int, rank: int | None = None) -> AcceptanceOperator:
    """M = W diag(p) W^dagger with Haar W and eigenvalues uniform in [0, 1]."""
    rng = make_rng(seed)
    d = int(np.prod(slot_dims))
    u = haar_unitary(d, rng)
    p = rng.uniform(0, 1, size=d)
    if rank is not None:
        p[rank:] = 0
    m = (u * p) @ u.conj().T
    return AcceptanceOperator((m + m.conj().T) / 2, tuple(slot_dims))


def basis_product_tuples(slot_dims: Sequence[int]):
    for idx in itertools.product(*(range(d) for d in slot_dims)):
        yield [np.eye(d, dtype=complex)[i] for d, i in zip(slot_dims, idx)]
