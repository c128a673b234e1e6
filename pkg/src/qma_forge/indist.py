"""Product states versus maximally entangled states: why no measurement separates them.

The uniform mixture over computational product states and the uniform
mixture over the generalized Bell basis are both I/d^2, so any binary POVM
has the same outcome statistics on the two ensembles.
"""

from __future__ import annotations

import numpy as np

from .linalg import RegisterLayout
from .report import CheckResult, check_at_least, check_close
from .states import (
    DensityOperator,
    Povm,
    PureState,
    _log2,
    bell_state,
    haar_random_pure,
    haar_unitary,
    make_rng,
    nearest_product_state,
)
from .errors import ShapeError


def _pair_layout(d: int) -> RegisterLayout:
    n = _log2(d)
    return RegisterLayout((("A", n), ("B", n)))


def product_basis_mixture(d: int) -> DensityOperator:
    """(1/d^2) sum_{i,j} |e_i e_j><e_i e_j|."""
    layout = _pair_layout(d)
    rho = np.zeros((d * d, d * d), dtype=complex)
    eye = np.eye(d)
    for i in range(d):
        for j in range(d):
            v = np.kron(eye[i], eye[j])
            rho += np.outer(v, v)
    return DensityOperator(layout, rho / d**2)


def bell_mixture(d: int) -> DensityOperator:
    """(1/d^2) sum_{k,l} |g_{k,l}><g_{k,l}|."""
    layout = _pair_layout(d)
    rho = np.zeros((d * d, d * d), dtype=complex)
    for k in range(1, d + 1):
        for l in range(1, d + 1):
            g = bell_state(d, k, l).amplitudes
            rho += np.outer(g, g.conj())
    return DensityOperator(layout, rho / d**2)


def bell_gram(d: int) -> np.ndarray:
    vecs = np.array([bell_state(d, k, l).amplitudes for k in range(1, d + 1) for l in range(1, d + 1)])
    return vecs.conj() @ vecs.T


def povm_error_pair(m: Povm, mix0: DensityOperator, mix1: DensityOperator) -> tuple[float, float]:
    """(P[say 1 | ensemble 0], P[say 0 | ensemble 1])."""
    if len(m.elements) != 2:
        raise ShapeError(f"need a two-outcome POVM, got {len(m.elements)} elements")
    m0, m1 = m.elements
    p01 = float(np.real(np.trace(m1 @ mix0.matrix)))
    p10 = float(np.real(np.trace(m0 @ mix1.matrix)))
    return p01, p10


def random_binary_povm(d: int, seed: int) -> Povm:
    """{E, I - E} with E = W W^dagger rescaled to spectral norm at most 1."""
    rng = make_rng(seed)
    dim = d * d
    w = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    e = w @ w.conj().T
    e = e / (np.linalg.eigvalsh(e)[-1] * rng.uniform(1.0, 2.0))
    e = (e + e.conj().T) / 2
    return Povm(_pair_layout(d), (e, np.eye(dim) - e))


def random_maximally_entangled(d: int, rng: np.random.Generator) -> PureState:
    """(U (x) I)|g_{d,d}> with Haar-random U."""
    g = bell_state(d, d, d)
    u = haar_unitary(d, rng)
    return PureState(g.layout, np.kron(u, np.eye(d)) @ g.amplitudes)


def fidelity_floor_check(d: int, trials: int, seed: int, tol: float = 1e-9) -> list[CheckResult]:
    """Best product fidelity equals 1/sqrt(d) on maximally entangled states, and is never lower."""
    floor = 1 / np.sqrt(d)
    rng = make_rng(seed, 1)
    entangled = [nearest_product_state(random_maximally_entangled(d, rng), ["A"])[1] for _ in range(trials)]
    layout = _pair_layout(d)
    generic = [
        nearest_product_state(haar_random_pure(layout, seed * 1_000_003 + i), ["A"])[1]
        for i in range(trials)
    ]
    worst = max(entangled, key=lambda f: abs(f - floor))
    claim = "max product fidelity of a maximally entangled state is 1/sqrt(d)"
    return [
        check_close(f"maximally entangled product fidelity (d={d}, worst of {trials})", worst, floor, tol, claim),
        check_at_least(
            f"generic product fidelity >= 1/sqrt(d) (d={d}, min of {trials})",
            min(generic), floor, tol, "1/sqrt(d) is the minimum over all pure states",
        ),
    ]
