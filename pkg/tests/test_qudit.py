import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherent_qudit.qudit import (
    PSEUDO_NUMBER,
    PSEUDO_PHASE,
    ClusterGraph,
    MultiQuditState,
    QuditDims,
    apply_site_gate,
    basis_state,
    byproduct_word,
    correction_ops,
    cz_apply,
    entanglement_entropy,
    fidelity,
    gate_matrix,
    ideal_bell_pair,
    ideal_cluster,
    ideal_measure,
    product_state,
    random_state,
    schmidt_coefficients,
    stabilizer_expectations,
    uniform_state,
    word_matrix,
)
from coherent_qudit.rng import derive_rng

from oracles import dense_cz, dft_matrix, reduced_entropy_eig

TOL = 1e-12


def gm(kind, d, power=1):
    return gate_matrix(kind, QuditDims(d), power).entries


class TestDims:
    @pytest.mark.parametrize("d", [1, 2, 5, 32])
    def test_omega(self, d):
        dims = QuditDims(d)
        assert abs(abs(dims.omega) - 1) < 1e-15
        assert abs(dims.omega**d - 1) < 1e-14

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            QuditDims(0)


class TestGates:
    def test_qubit_hadamard(self):
        np.testing.assert_allclose(gm("H", 2), np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-15)

    @pytest.mark.parametrize("d", range(2, 17))
    def test_hadamard_matches_dft(self, d):
        np.testing.assert_allclose(gm("H", d), dft_matrix(d), atol=1e-13)

    @pytest.mark.parametrize("d", range(2, 17))
    def test_square_and_conjugation_identities(self, d):
        h, z, x, r = gm("H", d), gm("Z", d), gm("X", d), gm("R", d)
        np.testing.assert_allclose(h @ h, r, atol=TOL)
        np.testing.assert_allclose(h @ z @ h.conj().T, x, atol=TOL)
        np.testing.assert_allclose(h.conj().T @ z @ h, np.linalg.inv(x), atol=TOL)

    @pytest.mark.parametrize("d", [2, 3, 4, 7, 16, 32])
    def test_orders(self, d):
        eye = np.eye(d)
        np.testing.assert_allclose(np.linalg.matrix_power(gm("X", d), d), eye, atol=TOL)
        np.testing.assert_allclose(np.linalg.matrix_power(gm("Z", d), d), eye, atol=TOL)
        np.testing.assert_allclose(np.linalg.matrix_power(gm("H", d), 4), eye, atol=TOL)
        np.testing.assert_allclose(gm("R", d) @ gm("R", d), eye, atol=TOL)

    @pytest.mark.parametrize("d", range(2, 33))
    def test_weyl_commutation(self, d):
        w = QuditDims(d).omega
        np.testing.assert_allclose(gm("X", d) @ gm("Z", d), w * gm("Z", d) @ gm("X", d), atol=TOL)

    @pytest.mark.parametrize("kind", ["X", "Z", "H", "R"])
    @pytest.mark.parametrize("m", [-7, -1, 0, 2, 5, 13])
    def test_powers_are_exact_products(self, kind, m):
        d = 5
        base = gm(kind, d)
        expected = np.linalg.matrix_power(base if m >= 0 else np.linalg.inv(base), abs(m))
        np.testing.assert_allclose(gm(kind, d, m), expected, atol=TOL)

    def test_pow_aliases(self):
        np.testing.assert_array_equal(gm("Z_pow", 3, 2), gm("Z", 3, 2))
        np.testing.assert_array_equal(gm("X_pow", 3, 2), gm("X", 3, 2))

    def test_shift_and_reverse_action(self):
        d = 5
        for k in range(d):
            e = np.eye(d)[k]
            np.testing.assert_array_equal(gm("X", d) @ e, np.eye(d)[(k - 1) % d])
            np.testing.assert_array_equal(gm("R", d) @ e, np.eye(d)[(-k) % d])

    @pytest.mark.parametrize("kind", ["H", "Z", "X", "R"])
    @pytest.mark.parametrize("d", [2, 6, 11])
    def test_unitary(self, kind, d):
        assert gate_matrix(kind, QuditDims(d)).unitarity_error() < TOL

    def test_unknown_gate(self):
        with pytest.raises(ValueError):
            gate_matrix("Y", QuditDims(3))


class TestCorrections:
    def test_trivial_branch_is_reversal(self):
        dims = QuditDims(4)
        ops = correction_ops(0, 0, dims)
        np.testing.assert_allclose(word_matrix(byproduct_word(0, 0), dims).entries, gm("R", 4), atol=TOL)
        np.testing.assert_allclose(word_matrix(ops.exact_inverse, dims).entries, gm("R", 4), atol=TOL)

    @pytest.mark.parametrize("d", range(2, 9))
    def test_inverse_times_byproduct_is_identity(self, d):
        dims = QuditDims(d)
        for k in range(d):
            for s in range(d):
                ops = correction_ops(k, s, dims)
                prod = word_matrix(ops.exact_inverse, dims).entries @ word_matrix(byproduct_word(k, s), dims).entries
                np.testing.assert_allclose(prod, np.eye(d), atol=TOL)

    @pytest.mark.parametrize("d", range(2, 9))
    def test_stated_order_equals_exact_inverse(self, d):
        dims = QuditDims(d)
        for k in range(d):
            for s in range(d):
                ops = correction_ops(k, s, dims)
                a = word_matrix(ops.exact_inverse, dims).entries
                b = word_matrix(ops.stated_order, dims).entries
                np.testing.assert_allclose(a, b, atol=TOL)

    def test_range_check(self):
        with pytest.raises(ValueError):
            correction_ops(4, 0, QuditDims(4))


class TestControlledZ:
    def test_power_zero_identity(self):
        dims = QuditDims(3)
        st_ = product_state([random_state(dims, 1), random_state(dims, 2)])
        np.testing.assert_array_equal(cz_apply(st_, 0, 1, 0).amplitudes, st_.amplitudes)

    def test_qubit_bell_schmidt(self):
        dims = QuditDims(2)
        plus = uniform_state(dims)
        state = cz_apply(product_state([plus, plus]), 0, 1)
        # brute force: dense 4x4 CZ on |++>
        brute = dense_cz(2, 2, 0, 1) @ np.full(4, 0.5)
        np.testing.assert_allclose(state.amplitudes.ravel(), brute, atol=1e-15)
        np.testing.assert_allclose(schmidt_coefficients(brute.reshape(2, 2)), [1 / math.sqrt(2)] * 2, atol=1e-15)

    @pytest.mark.parametrize("d,n,a,b,p", [(3, 3, 0, 2, 1), (2, 4, 3, 1, 1), (4, 2, 1, 0, 3), (5, 3, 1, 2, -2)])
    def test_matches_dense(self, d, n, a, b, p):
        dims = QuditDims(d)
        st_ = product_state([random_state(dims, i) for i in range(n)])
        got = cz_apply(st_, a, b, p).amplitudes.ravel()
        np.testing.assert_allclose(got, dense_cz(d, n, a, b, p) @ st_.amplitudes.ravel(), atol=1e-13)

    def test_symmetric(self):
        dims = QuditDims(5)
        st_ = product_state([random_state(dims, i) for i in range(3)])
        np.testing.assert_array_equal(cz_apply(st_, 0, 2).amplitudes, cz_apply(st_, 2, 0).amplitudes)

    @settings(max_examples=60, deadline=None)
    @given(
        d=st.integers(2, 5),
        e1=st.tuples(st.integers(0, 3), st.integers(0, 3)).filter(lambda e: e[0] != e[1]),
        e2=st.tuples(st.integers(0, 3), st.integers(0, 3)).filter(lambda e: e[0] != e[1]),
        seed=st.integers(0, 2**32),
    )
    def test_commute(self, d, e1, e2, seed):
        dims = QuditDims(d)
        st_ = product_state([random_state(dims, derive_rng(seed, i)) for i in range(4)])
        ab = cz_apply(cz_apply(st_, *e1), *e2).amplitudes
        ba = cz_apply(cz_apply(st_, *e2), *e1).amplitudes
        np.testing.assert_allclose(ab, ba, rtol=0, atol=1e-14)

    def test_errors(self):
        st_ = product_state([uniform_state(QuditDims(2))] * 2)
        with pytest.raises(ValueError):
            cz_apply(st_, 1, 1)
        with pytest.raises(IndexError):
            cz_apply(st_, 0, 2)


class TestCluster:
    def test_empty_graph_is_product(self):
        dims = QuditDims(3)
        state = ideal_cluster(ClusterGraph(2, frozenset()), dims)
        np.testing.assert_allclose(state.amplitudes, np.full((3, 3), 1 / 3), atol=1e-15)

    def test_qubit_path_stabilizers(self):
        graph = ClusterGraph.path(3)
        state = ideal_cluster(graph, QuditDims(2))
        x = np.array([[0, 1], [1, 0]])
        z = np.diag([1, -1])
        i2 = np.eye(2)
        v = state.amplitudes.ravel()
        for op in (np.kron(np.kron(x, z), i2), np.kron(np.kron(z, x), z), np.kron(np.kron(i2, z), x)):
            assert np.vdot(v, op @ v).real == pytest.approx(1, abs=1e-12)

    def test_qubit_path_is_ghz_equivalent(self):
        # H on the middle qubit of a 3-qubit linear cluster gives GHZ up to local H on the ends
        state = ideal_cluster(ClusterGraph.path(3), QuditDims(2))
        h = gate_matrix("H", QuditDims(2))
        for site in (0, 2):
            state = apply_site_gate(state, h, site)
        ghz = np.zeros(8)
        ghz[0] = ghz[7] = 1 / math.sqrt(2)
        assert fidelity(state, ghz) == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("d", [3, 4, 5])
    @pytest.mark.parametrize("graph", [ClusterGraph.path(3), ClusterGraph.complete(3), ClusterGraph.path(4)])
    def test_qudit_stabilizers(self, d, graph):
        state = ideal_cluster(graph, QuditDims(d))
        for val in stabilizer_expectations(state, graph):
            assert val == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("d", [2, 3, 4, 8])
    def test_single_edge_is_bell_pair(self, d):
        dims = QuditDims(d)
        cluster = ideal_cluster(ClusterGraph.path(2), dims)
        np.testing.assert_allclose(cluster.amplitudes, ideal_bell_pair(dims).amplitudes, atol=1e-14)
        np.testing.assert_allclose(schmidt_coefficients(cluster.amplitudes), [1 / math.sqrt(d)] * d, atol=1e-14)
        assert entanglement_entropy(cluster.amplitudes, base=d) == pytest.approx(1, abs=1e-12)
        assert reduced_entropy_eig(cluster.amplitudes, d) == pytest.approx(1, abs=1e-12)

    def test_graph_validation(self):
        with pytest.raises(ValueError):
            ClusterGraph(2, frozenset({(0, 0)}))
        with pytest.raises(ValueError):
            ClusterGraph(2, frozenset({(0, 2)}))

    def test_size_cap(self):
        with pytest.raises(ValueError):
            ideal_cluster(ClusterGraph.path(13), QuditDims(4))


class TestIdealMeasure:
    def test_number_basis_certain(self):
        dims = QuditDims(4)
        state = product_state([basis_state(2, dims), uniform_state(dims)])
        res = ideal_measure(state, 0, PSEUDO_NUMBER, rng=3)
        assert res.outcome == 2
        assert res.probs[2] == pytest.approx(1, abs=1e-15)

    @pytest.mark.parametrize("k", range(5))
    def test_phase_basis_uniform_on_number_state(self, k):
        dims = QuditDims(5)
        state = MultiQuditState(dims, basis_state(k, dims).amplitudes)
        res = ideal_measure(state, 0, PSEUDO_PHASE, rng=0)
        np.testing.assert_allclose(res.probs, np.full(5, 0.2), atol=1e-12)
        assert res.post_state is None

    @pytest.mark.parametrize("d", [2, 3, 4, 6])
    def test_bell_collapse(self, d):
        dims = QuditDims(d)
        bell = ideal_bell_pair(dims)
        u = uniform_state(dims)
        for k in range(d):
            res = ideal_measure(bell, 0, PSEUDO_PHASE, forced=k)
            expected = word_matrix(byproduct_word(k), dims) @ u
            assert fidelity(res.post_state, expected) == pytest.approx(1, abs=1e-12)
            assert res.post_state.norm() == pytest.approx(1, abs=1e-12)

    def test_probabilities_normalized(self):
        dims = QuditDims(3)
        state = ideal_cluster(ClusterGraph.path(3), dims)
        for site in range(3):
            for basis in (PSEUDO_NUMBER, PSEUDO_PHASE):
                res = ideal_measure(state, site, basis, rng=site)
                assert res.probs.sum() == pytest.approx(1, abs=1e-12)
                assert res.post_state.norm() == pytest.approx(1, abs=1e-12)

    def test_forced_zero_probability(self):
        dims = QuditDims(3)
        state = MultiQuditState(dims, basis_state(1, dims).amplitudes)
        with pytest.raises(ValueError):
            ideal_measure(state, 0, PSEUDO_NUMBER, forced=0)

    def test_sampling_is_seeded(self):
        dims = QuditDims(6)
        state = ideal_cluster(ClusterGraph.path(2), dims)
        a = [ideal_measure(state, 0, PSEUDO_NUMBER, rng=derive_rng(5, i)).outcome for i in range(20)]
        b = [ideal_measure(state, 0, PSEUDO_NUMBER, rng=derive_rng(5, i)).outcome for i in range(20)]
        assert a == b
