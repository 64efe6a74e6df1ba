"""Tests for tree bookkeeping: distances, candidates, builders, audits."""

import pytest

from treetn.errors import InvariantViolation
from treetn.topology import (
    Topology,
    audit_topology,
    build_initial_topology,
    build_mpn,
    build_pbt,
    candidate_edge_indices,
    local_two_tensor,
    region_sites,
    set_distance,
    subtree_sites,
)


def flags_all_physical(topo):
    return {e: 1 if topo.is_physical(e) else 0 for e in topo.bonds}


class TestSetDistance:
    def test_two_tensor_tree(self):
        topo = Topology(n_sites=4, edges=[[0, 1, 4], [2, 3, 4]], center=4)
        d = set_distance(topo, 4)
        assert d == {4: 0, 0: 1, 1: 1, 2: 1, 3: 1}

    def test_mpn_six_from_center(self):
        topo = build_mpn(6)
        d = set_distance(topo, topo.center)
        ends = [0, 1, 4, 5]
        assert all(d[e] == max(d.values()) for e in ends)

    def test_root_on_physical_bond(self):
        topo = Topology(n_sites=4, edges=[[0, 1, 4], [2, 3, 4]], center=4)
        d = set_distance(topo, 0)
        assert d[0] == 0
        assert d[1] == d[4] == 1
        assert d[2] == d[3] == 2

    def test_disconnected_detected(self):
        topo = Topology(n_sites=4, edges=[[0, 1, 4], [2, 3, 4]], center=4)
        topo.edges[1] = [2, 3, 3]  # mangles connectivity
        with pytest.raises(InvariantViolation):
            set_distance(topo, 4)


class TestCandidates:
    def test_all_flagged_empty(self):
        topo = Topology(n_sites=4, edges=[[0, 1, 4], [2, 3, 4]], center=4)
        assert candidate_edge_indices(topo, 4, flags_all_physical(topo)) == []

    def test_single_unflagged(self):
        topo = Topology(n_sites=4, edges=[[0, 1, 4], [2, 3, 4]], center=4)
        flags = flags_all_physical(topo)
        flags[2] = 0
        assert candidate_edge_indices(topo, 4, flags) == [2]

    def test_pbt_center_children(self):
        topo = build_pbt(8)
        flags = {e: 0 for e in topo.bonds}
        p, q = topo.center_tensors()
        expected = sorted(topo.edges[p][:2] + topo.edges[q][:2])
        assert candidate_edge_indices(topo, topo.center, flags) == expected


class TestLocalTwoTensor:
    def test_max_distance_wins(self):
        topo = build_mpn(6)
        flags = flags_all_physical(topo)
        d = set_distance(topo, topo.center)
        # pretend one candidate is nearer by flagging nothing: candidates are
        # the two auxiliary children at equal distance; force asymmetry
        d = dict(d)
        cands = candidate_edge_indices(topo, topo.center, flags)
        d[cands[0]] = 2
        d[cands[1]] = 3
        e_new, t, t_conn, t_prev = local_two_tensor(topo, topo.center, flags, d)
        assert e_new == cands[1]

    def test_tie_breaks_to_smaller_label(self):
        topo = build_mpn(6)
        flags = flags_all_physical(topo)
        d = set_distance(topo, topo.center)
        cands = candidate_edge_indices(topo, topo.center, flags)
        assert d[cands[0]] == d[cands[1]]
        e_new, *_ = local_two_tensor(topo, topo.center, flags, d)
        assert e_new == min(cands)

    def test_roles_resolved_by_membership(self):
        topo = build_mpn(6)
        flags = flags_all_physical(topo)
        d = set_distance(topo, topo.center)
        e_new, t, t_conn, t_prev = local_two_tensor(topo, topo.center, flags, d)
        assert e_new in topo.edges[t] and topo.center in topo.edges[t]
        assert e_new in topo.edges[t_conn] and topo.center not in topo.edges[t_conn]
        assert topo.center in topo.edges[t_prev] and e_new not in topo.edges[t_prev]

    def test_empty_candidates_rejected(self):
        topo = build_mpn(6)
        flags = {e: 1 for e in topo.bonds}
        with pytest.raises(InvariantViolation):
            local_two_tensor(topo, topo.center, flags, set_distance(topo, topo.center))


class TestBuilders:
    def test_smallest_mpn(self):
        topo = build_mpn(4)
        assert [list(e) for e in topo.edges] == [[0, 1, 4], [2, 3, 4]]
        assert topo.center == 4
        audit_topology(topo)

    @pytest.mark.parametrize("n", [4, 5, 6, 9, 12, 17])
    def test_mpn_valid(self, n):
        topo = build_mpn(n)
        audit_topology(topo)
        assert topo.n_tensors == n - 2

    def test_pbt_eight(self):
        topo = build_pbt(8)
        audit_topology(topo)
        d = set_distance(topo, topo.center)
        phys_d = [d[b] for b in range(8)]
        aux_d = [d[b] for b in topo.auxiliary_bonds() if b != topo.center]
        assert set(phys_d) == {max(d.values())}
        assert max(aux_d) < max(phys_d)

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    def test_pbt_valid(self, n):
        audit_topology(build_pbt(n))

    def test_pbt_fallback_to_mpn(self):
        topo = build_initial_topology(6, "pbt")
        assert topo.snapshot() == build_mpn(6).snapshot()

    def test_pbt_requested_power_of_two(self):
        topo = build_initial_topology(8, "pbt")
        assert topo.snapshot() == build_pbt(8).snapshot()

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            build_initial_topology(3, "mpn")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            build_initial_topology(8, "ring")


class TestSiteSets:
    def test_mpn_regions(self):
        topo = build_mpn(6)
        # tensor 0 renormalizes sites {0, 1} into its third bond
        assert region_sites(topo, topo.edges[0][2]) == (0, 1)
        assert region_sites(topo, 3) == (3,)

    def test_subtree_sides(self):
        topo = build_mpn(6)
        b = topo.center
        t_left, t_right = topo.tensors_of_bond(b)
        left = subtree_sites(topo, b, t_left)
        right = subtree_sites(topo, b, t_right)
        assert sorted(left + right) == list(range(6))
        assert not set(left) & set(right)


class TestGraphSerialization:
    def test_round_trip(self):
        topo = build_pbt(8)
        text = topo.to_graph_lines()
        back = Topology.from_graph_lines(text, n_sites=8)
        assert back.snapshot() == topo.snapshot()
        assert back.center == topo.center

    def test_format_exact(self):
        assert build_mpn(4).to_graph_lines() == "0 1 4\n2 3 4\n"


class TestAudit:
    def test_detects_wrong_center(self):
        topo = build_mpn(6)
        topo.center = topo.center + 1
        with pytest.raises(InvariantViolation):
            audit_topology(topo)

    def test_detects_duplicate_label(self):
        topo = build_mpn(6)
        topo.edges[0][0] = topo.edges[0][1]
        with pytest.raises(InvariantViolation):
            audit_topology(topo)
