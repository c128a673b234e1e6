import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qma_forge.errors import ContractError, CutError, LayoutError, NotPSDError, SizeLimitError
from qma_forge.linalg import (
    RegisterLayout,
    apply_local,
    basis_bits,
    controlled,
    eig_hermitian,
    embed,
    is_unitary,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    permute_registers,
    permute_state,
    psd_sqrt,
    register_values,
    schmidt,
    tensor,
)
from qma_forge.states import haar_unitary, make_rng

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _rand(shape, rng):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _density(dim, rng):
    w = _rand((dim, dim), rng)
    rho = w @ w.conj().T
    return rho / np.trace(rho)


def _permutation_matrix(layout, new_order):
    # basis state |x_1 .. x_n> (layout order) -> |x_new_order>
    dims = layout.dims
    new_dims = [layout.subset([n]).dim for n in new_order]
    pos = [layout.names.index(n) for n in new_order]
    p = np.zeros((layout.dim, layout.dim))
    for digits in itertools.product(*(range(d) for d in dims)):
        src = np.ravel_multi_index(digits, dims)
        dst = np.ravel_multi_index([digits[i] for i in pos], new_dims)
        p[dst, src] = 1
    return p


def test_tensor_matches_index_formula():
    rng = make_rng(1)
    a, b = _rand((2, 3), rng), _rand((4, 2), rng)
    t = tensor(a, b)
    assert t.shape == (8, 6)
    for i, j, k, l in itertools.product(range(2), range(3), range(4), range(2)):
        assert t[i * 4 + k, j * 2 + l] == pytest.approx(a[i, j] * b[k, l], abs=1e-15)


def test_tensor_is_big_endian():
    zero, one = np.array([1, 0]), np.array([0, 1])
    # |10> is index 2: the first factor is the most significant bit
    np.testing.assert_array_equal(tensor(one, zero), [0, 0, 1, 0])


def test_tensor_budget():
    with pytest.raises(SizeLimitError):
        tensor(np.eye(2**12), np.eye(2))


def test_partial_trace_sum_definition():
    rng = make_rng(2)
    layout = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
    rho = _density(layout.dim, rng)
    # Tr_B rho = sum_k (I_A (x) <k| (x) I_C) rho (I_A (x) |k> (x) I_C)
    expected = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        e = np.eye(4)[:, [k]]
        proj = np.kron(np.kron(np.eye(2), e), np.eye(2))
        expected += proj.conj().T @ rho @ proj
    np.testing.assert_allclose(partial_trace(rho, layout, ["B"]), expected, atol=1e-14)


def test_partial_trace_of_product_state():
    rng = make_rng(3)
    a, b = _density(2, rng), _density(4, rng)
    layout = RegisterLayout.of(("A", 1), ("B", 2))
    np.testing.assert_allclose(partial_trace(np.kron(a, b), layout, ["B"]), a, atol=1e-14)
    np.testing.assert_allclose(partial_trace(np.kron(a, b), layout, ["A"]), b, atol=1e-14)


def test_partial_trace_everything_is_trace():
    rho = _density(4, make_rng(4))
    layout = RegisterLayout.of(("A", 1), ("B", 1))
    out = partial_trace(rho, layout, ["A", "B"])
    np.testing.assert_allclose(out, [[1.0]], atol=1e-14)


def test_partial_trace_rejects_unknown_register():
    with pytest.raises(LayoutError):
        partial_trace(np.eye(4) / 4, RegisterLayout.of(("A", 1), ("B", 1)), ["Z"])


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_partial_trace_preserves_trace_and_positivity(seed):
    rng = make_rng(seed)
    layout = RegisterLayout.of(("A", 1), ("B", 1), ("C", 1))
    rho = _density(8, rng)
    red = partial_trace(rho, layout, ["A", "C"])
    assert np.trace(red).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(red).min() > -1e-12


def test_permute_registers_against_permutation_matrix():
    rng = make_rng(5)
    layout = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
    op = _rand((16, 16), rng)
    order = ["C", "A", "B"]
    p = _permutation_matrix(layout, order)
    np.testing.assert_allclose(permute_registers(op, layout, order), p @ op @ p.T, atol=1e-13)
    vec = _rand(16, rng)
    np.testing.assert_allclose(permute_state(vec, layout, order), p @ vec, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(seeds, st.permutations(["A", "B", "C"]))
def test_permute_round_trip(seed, order):
    rng = make_rng(seed)
    layout = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
    op = _rand((16, 16), rng)
    there = permute_registers(op, layout, order)
    back = permute_registers(there, layout.reordered(order), layout.names)
    np.testing.assert_allclose(back, op, atol=1e-13)


def test_permute_rejects_non_permutation():
    layout = RegisterLayout.of(("A", 1), ("B", 1))
    with pytest.raises(LayoutError):
        permute_registers(np.eye(4), layout, ["A", "A"])


def test_embed_matches_explicit_construction():
    rng = make_rng(6)
    layout = RegisterLayout.of(("A", 1), ("B", 1), ("C", 1))
    u = haar_unitary(4, rng)
    # op on (C, A): conjugate kron(u, I_B) from order (C, A, B) into (A, B, C)
    p = _permutation_matrix(layout, ["C", "A", "B"])
    expected = p.T @ np.kron(u, np.eye(2)) @ p
    np.testing.assert_allclose(embed(u, ["C", "A"], layout), expected, atol=1e-13)
    np.testing.assert_allclose(embed(u, ["A", "B"], layout), np.kron(u, np.eye(2)), atol=1e-13)


def test_embed_shape_mismatch():
    with pytest.raises(LayoutError):
        embed(np.eye(2), ["A", "B"], RegisterLayout.of(("A", 1), ("B", 1)))


def test_controlled_is_block_diagonal():
    u = haar_unitary(2, make_rng(7))
    c = controlled(u)
    np.testing.assert_allclose(c[:2, :2], np.eye(2))
    np.testing.assert_allclose(c[2:, 2:], u)
    np.testing.assert_allclose(c[:2, 2:], 0)
    with pytest.raises(ContractError):
        controlled(np.diag([1.0, 2.0]))


def test_eig_hermitian_descending_and_reconstructs():
    h = _density(6, make_rng(8))
    vals, vecs = eig_hermitian(h)
    assert np.all(np.diff(vals) <= 0)
    np.testing.assert_allclose((vecs * vals) @ vecs.conj().T, h, atol=1e-13)
    with pytest.raises(ContractError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_psd_sqrt():
    rho = _density(4, make_rng(9))
    r = psd_sqrt(rho)
    np.testing.assert_allclose(r @ r, rho, atol=1e-13)
    with pytest.raises(NotPSDError):
        psd_sqrt(np.diag([1.0, -1e-6]))
    # tiny negative eigenvalues from rounding are clamped
    np.testing.assert_allclose(psd_sqrt(np.diag([1.0, -1e-12])), np.diag([1.0, 0.0]))


def test_is_unitary():
    assert is_unitary(haar_unitary(8, make_rng(10)))
    assert not is_unitary(np.diag([1.0, 1.0 + 1e-8]))


def test_schmidt_reconstructs_state():
    rng = make_rng(11)
    layout = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
    psi = _rand(16, rng)
    psi /= np.linalg.norm(psi)
    sd = schmidt(psi, layout, ["A", "C"])
    assert np.all(np.diff(sd.coefficients) <= 1e-15)
    assert np.sum(sd.coefficients**2) == pytest.approx(1.0, abs=1e-12)
    joint = (sd.left * sd.coefficients) @ sd.right.T
    expected = permute_state(psi, layout, ["A", "C", "B"]).reshape(4, 4)
    np.testing.assert_allclose(joint, expected, atol=1e-13)
    assert sd.left_layout.names == ["A", "C"]


def test_schmidt_bad_cut():
    layout = RegisterLayout.of(("A", 1), ("B", 1))
    with pytest.raises(CutError):
        schmidt(np.eye(4)[0], layout, ["A", "B"])
    with pytest.raises(CutError):
        schmidt(np.eye(4)[0], layout, ["Q"])


def test_layout_queries_and_errors():
    layout = RegisterLayout.of(("W", 2), ("P1", 1), ("P2", 3))
    assert layout.num_qubits == 6 and layout.dim == 64
    assert layout.qubit_offset("P2") == 3
    assert layout.merged(["P1", "P2"], "P").registers == (("W", 2), ("P", 4))
    with pytest.raises(LayoutError):
        layout.merged(["W", "P2"], "X")
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", 1), ("A", 2))
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", 0))
    with pytest.raises(LayoutError):
        layout.qubits("nope")


def test_layout_json_round_trip():
    layout = RegisterLayout.of(("W", 2), ("P1", 1))
    data = json.loads(json.dumps(layout.to_json()))
    assert data == {"registers": [{"name": "W", "qubits": 2}, {"name": "P1", "qubits": 1}]}
    assert RegisterLayout.from_json(data) == layout


def test_matrix_json_is_bit_exact():
    m = _rand((3, 2), make_rng(12))
    data = json.loads(json.dumps(matrix_to_json(m)))
    assert data["rows"] == 3 and data["cols"] == 2 and len(data["entries"]) == 6
    np.testing.assert_array_equal(matrix_from_json(data), m)


def test_basis_bits_and_register_values():
    layout = RegisterLayout.of(("A", 1), ("B", 2))
    bits = basis_bits(layout)
    np.testing.assert_array_equal(bits[5], [1, 0, 1])
    np.testing.assert_array_equal(register_values(layout, "B"), np.arange(8) % 4)
    np.testing.assert_array_equal(register_values(layout, "A"), np.arange(8) // 4)


@settings(max_examples=20, deadline=None)
@given(seeds, st.permutations(["A", "B", "C"]), st.integers(1, 3))
def test_apply_local_matches_embed(seed, order, n_targets):
    rng = make_rng(seed)
    layout = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
    targets = list(order[:n_targets])
    op = _rand((layout.subset(targets).dim,) * 2, rng)
    u = _rand((16, 5), rng)
    np.testing.assert_allclose(apply_local(op, targets, layout, u), embed(op, targets, layout) @ u, atol=1e-12)
