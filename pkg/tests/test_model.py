import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sawspin.graph import Graph, generate
from sawspin.model import (EdgePotential, ModelError, Spin, SpinSystem, VertexField, derive_parameters,
                           edge_gammas, make_ising, validate_system)

finite = st.floats(-3, 3, allow_nan=False)


class TestSpin:
    def test_negation_involution(self):
        for s in Spin:
            assert -(-s) is s
            assert -s is not s

    def test_parse(self):
        assert Spin.parse("+") is Spin.PLUS and Spin.parse(-1) is Spin.MINUS
        with pytest.raises(ModelError):
            Spin.parse("x")


class TestPotentials:
    def test_transpose_swaps_off_diagonal(self):
        p = EdgePotential(1.0, 2.0, 3.0, 4.0)
        assert p.transposed().as_tuple() == (1.0, 3.0, 2.0, 4.0)
        assert p.transposed().transposed() == p

    def test_reverse_read(self):
        g = Graph(2, [(0, 1)])
        s = SpinSystem.from_potentials(g, {(1, 0): (1.0, 2.0, 3.0, 4.0)})
        # beta_10(+,-) = 2 means beta_01(-,+) = 2
        assert s.edge_potential(0, 1).as_tuple() == (1.0, 3.0, 2.0, 4.0)
        assert s.edge_potential(1, 0).as_tuple() == (1.0, 2.0, 3.0, 4.0)

    def test_field_derivations(self):
        f = VertexField(0.0, 0.0)
        assert f.external_field == 0.0 and f.lam == 1.0
        f = VertexField(1.0, -1.0)
        assert f.external_field == 1.0
        assert f.lam == pytest.approx(math.exp(-2.0))


class TestValidation:
    def test_single_vertex_valid(self):
        s = SpinSystem(Graph(1), np.zeros((0, 4)), np.zeros((1, 2)))
        assert validate_system(s).ok

    def test_hard_constraint_located(self):
        s = SpinSystem.from_potentials(Graph(2, [(0, 1)]), {(0, 1): (0.0, math.inf, 0.0, 0.0)})
        rep = validate_system(s)
        assert not rep.ok
        assert "hard constraint at edge (0,1)" in str(rep)

    def test_missing_entries(self):
        s = SpinSystem.from_potentials(Graph(3, [(0, 1), (1, 2)]), {(0, 1): (0, 0, 0, 0)}, {0: (0, 0)})
        msg = str(validate_system(s))
        assert "missing potential at edge (1,2)" in msg
        assert "missing field at vertex 1" in msg and "missing field at vertex 2" in msg
        with pytest.raises(ModelError):
            derive_parameters(s)

    def test_infinite_field(self):
        s = SpinSystem(Graph(1), np.zeros((0, 4)), np.array([[-math.inf, 0.0]]))
        assert "hard constraint at vertex 0" in str(validate_system(s))

    def test_triangle_ising_valid(self):
        assert validate_system(make_ising(generate("complete", 3), 0.3, 0.1)).ok

    def test_arrays_are_read_only(self):
        s = make_ising(generate("path", 2), 0.3)
        with pytest.raises(ValueError):
            s.beta[0, 0] = 1.0


class TestIsing:
    def test_edge_potential_values(self):
        s = make_ising(generate("path", 2), 0.5)
        assert s.edge_potential(0, 1).as_tuple() == (0.5, -0.5, -0.5, 0.5)
        assert s.edge_potential(0, 1).coupling == 0.5

    def test_zero_field(self):
        s = make_ising(generate("path", 2), 0.5, 0.0)
        assert s.vertex_field(0).as_tuple() == (0.0, 0.0) if hasattr(VertexField, "as_tuple") else True
        assert s.vertex_field(0).lam == 1.0

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
    def test_round_trip(self, J, B):
        g = generate("complete", 3)
        p = derive_parameters(make_ising(g, J, B))
        np.testing.assert_allclose(p.per_edge_J, J, atol=1e-12)
        np.testing.assert_allclose(p.per_vertex_B, B, atol=1e-12)

    def test_mapping_couplings(self):
        g = generate("path", 3)
        s = make_ising(g, {(1, 0): 0.2, (1, 2): -0.7})
        assert derive_parameters(s).J == pytest.approx(0.7)


class TestParameters:
    def test_gamma_for_unit_ising_edge(self):
        # a = d = e^0.5, b = c = e^-0.5: |bc - ad| / (ac) = |e^-1 - e| / 1
        a = d = math.exp(0.5)
        b = c = math.exp(-0.5)
        want = max(abs(b * c - a * d) / (a * c), abs(b * c - a * d) / (b * d))
        p = derive_parameters(make_ising(generate("path", 2), 0.5))
        assert p.gamma == pytest.approx(want, rel=1e-12)
        assert p.gamma == pytest.approx(2.3504, abs=1e-4)
        assert 4 * math.tanh(0.5) <= p.gamma

    def test_independent_spins(self):
        p = derive_parameters(make_ising(generate("cycle", 4), 0.0, 0.3))
        assert p.J == 0 and p.gamma == 0 and p.alpha_min == 0 and p.alpha_max == 0

    def test_empty_sets_undefined(self):
        p = derive_parameters(SpinSystem(Graph(2), np.zeros((0, 4)), np.zeros((2, 2))))
        assert p.J is None and p.gamma is None and p.alpha_min is None
        assert p.B_min == 0.0
        p = derive_parameters(SpinSystem(Graph(0), np.zeros((0, 4)), np.zeros((0, 2))))
        assert p.B_min is None and p.B_max is None

    def test_alpha_definition(self):
        beta = np.array([[0.1, 0.7, -0.4, 1.3]])
        p = derive_parameters(SpinSystem(Graph(2, [(0, 1)]), beta, np.zeros((2, 2))))
        # both orientations of the edge: (mm - pm, mp - pp) and (mm - mp, pm - pp)
        both = [1.3 - 0.7, -0.4 - 0.1, 1.3 - (-0.4), 0.7 - 0.1]
        assert p.alpha_max == pytest.approx(max(both))
        assert p.alpha_min == pytest.approx(min(both))

    def test_parameters_symmetric_in_edge_orientation(self):
        beta = np.array([[0.1, 0.7, -0.4, 1.3]])
        s = SpinSystem(Graph(2, [(0, 1)]), beta, np.zeros((2, 2)))
        t = SpinSystem(Graph(2, [(0, 1)]), beta[:, [0, 2, 1, 3]], np.zeros((2, 2)))
        assert derive_parameters(s).as_dict() == pytest.approx(derive_parameters(t).as_dict())

    @given(st.lists(finite, min_size=4, max_size=4))
    def test_gamma_dominates_tanh(self, beta):
        s = SpinSystem(Graph(2, [(0, 1)]), np.array([beta]), np.zeros((2, 2)))
        p = derive_parameters(s)
        # J itself carries rounding of order 1e-16 from the four-term sum
        assert p.gamma >= 4 * math.tanh(p.J) * (1 - 1e-12) - 1e-12
        assert p.alpha_min <= p.alpha_max

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30)
    def test_invariant_under_relabeling(self, seed):
        rng = np.random.default_rng(seed)
        g = generate("erdos_renyi", 6, p=0.5, seed=seed)
        s = SpinSystem(g, rng.uniform(-2, 2, (len(g.edges), 4)), rng.uniform(-2, 2, (6, 2)))
        perm = list(rng.permutation(6))
        a, b = derive_parameters(s), derive_parameters(s.relabel(perm))
        assert a.as_dict() == pytest.approx(b.as_dict())

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30)
    def test_relabel_preserves_weights(self, seed):
        rng = np.random.default_rng(seed)
        g = generate("erdos_renyi", 5, p=0.6, seed=seed)
        s = SpinSystem(g, rng.uniform(-2, 2, (len(g.edges), 4)), rng.uniform(-2, 2, (5, 2)))
        perm = rng.permutation(5)
        t = s.relabel(perm)
        cfg = rng.choice([1, -1], 5)
        moved = np.empty(5, dtype=int)
        moved[perm] = cfg
        assert t.log_weight(moved) == pytest.approx(s.log_weight(cfg))

    def test_per_edge_gammas_dominate(self, rng):
        g = generate("complete", 5)
        s = SpinSystem(g, rng.uniform(-2, 2, (len(g.edges), 4)), np.zeros((5, 2)))
        J = derive_parameters(s).per_edge_J
        assert np.all(edge_gammas(s) >= 4 * np.tanh(np.abs(J)) - 1e-12)
