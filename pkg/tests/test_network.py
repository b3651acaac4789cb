import math

import numpy as np
import pytest

from dsc_rd import (
    BASE,
    InfeasibleDistortionError,
    LinearObservation,
    ModelError,
    NetworkSpec,
    NodeSpec,
    Validity,
    evaluate,
    fixture_path,
    load_config,
    rd_rate,
    sweep,
    topo_order,
)
from dsc_rd.errors import DimensionError
from dsc_rd.network import node_state, walk

from oracles import estimate_view, family_rate_bits, posterior_cov, random_invertible, random_spd


def scalar_node(nid, parent=BASE, alpha=0.5, a=1.0, s=1.0, distortion=None):
    if distortion is not None:
        return NodeSpec(nid, [[a]], [[s]], parent, distortion=[[distortion]])
    return NodeSpec(nid, [[a]], [[s]], parent, alpha=alpha)


def random_tree(rng, n_nodes=None, dim=None, max_depth=3, base=True):
    n = int(dim or rng.integers(1, 4))
    k = int(n_nodes or rng.integers(1, 7))
    depth = {}
    nodes = []
    for i in range(k):
        parents = [BASE] + [p for p in depth if depth[p] < max_depth]
        parent = parents[int(rng.integers(len(parents)))]
        depth[f"n{i}"] = 1 if parent == BASE else depth[parent] + 1
        nodes.append(NodeSpec(f"n{i}", random_invertible(rng, n), random_spd(rng, n), parent,
                              alpha=float(rng.uniform(0.1, 0.95))))
    b = LinearObservation(random_invertible(rng, n), random_spd(rng, n)) if base else None
    return NetworkSpec(random_spd(rng, n), nodes, b)


class TestTopoOrder:
    def test_chain(self):
        nodes = [scalar_node("a"), scalar_node("b", "a"), scalar_node("c", "b")]
        assert topo_order(nodes) == ["c", "b", "a"]

    def test_star_ties_lexicographic(self):
        nodes = [scalar_node("d"), scalar_node("c", "d"), scalar_node("a", "d"),
                 scalar_node("b", "d")]
        assert topo_order(nodes) == ["a", "b", "c", "d"]

    def test_cycle(self):
        with pytest.raises(ModelError, match="cycle"):
            topo_order([scalar_node("a", "b"), scalar_node("b", "a")])

    def test_orphan(self):
        with pytest.raises(ModelError, match="unknown parent"):
            topo_order([scalar_node("a", "zz")])

    def test_accepts_network(self):
        net = NetworkSpec([[1.0]], [scalar_node("a"), scalar_node("b", "a")])
        assert topo_order(net) == ["b", "a"] == list(net.order)


class TestSpecValidation:
    def test_alpha_xor_distortion(self):
        with pytest.raises(ModelError):
            NodeSpec("a", [[1.0]], [[1.0]])
        with pytest.raises(ModelError):
            NodeSpec("a", [[1.0]], [[1.0]], alpha=0.5, distortion=[[0.3]])

    @pytest.mark.parametrize("alpha", [0.0, 1.2, -1.0])
    def test_alpha_range(self, alpha):
        with pytest.raises(ModelError):
            NodeSpec("a", [[1.0]], [[1.0]], alpha=alpha)

    def test_singular_mixing(self):
        with pytest.raises(ModelError, match="singular"):
            NodeSpec("a", [[1.0, 2.0], [2.0, 4.0]], np.eye(2), alpha=0.5)

    def test_non_square_mixing(self):
        with pytest.raises(DimensionError):
            NodeSpec("a", np.ones((1, 2)), [[1.0]], alpha=0.5)

    def test_reserved_and_duplicate_ids(self):
        with pytest.raises(ModelError):
            NodeSpec(BASE, [[1.0]], [[1.0]], alpha=0.5)
        with pytest.raises(ModelError, match="duplicate"):
            NetworkSpec([[1.0]], [scalar_node("a"), scalar_node("a")])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            NetworkSpec(np.eye(2), [scalar_node("a")])


class TestEvaluate:
    def test_single_node_half_bit(self):
        net = NetworkSpec([[1.0]], [scalar_node("j", alpha=0.5)],
                          LinearObservation([[1.0]], [[1.0]]))
        r = evaluate(net).report("j")
        assert r.sigma_x_side[0, 0] == pytest.approx(0.5, abs=1e-15)
        assert r.sigma_x_stat_side[0, 0] == pytest.approx(1 / 3, abs=1e-15)
        assert r.D[0, 0] == pytest.approx(5 / 12, abs=1e-15)
        assert r.rate_bits == pytest.approx(0.5, abs=1e-12)
        assert r.validity is Validity.STRICT and r.scheme_attached

    def test_s1_fixture(self):
        net = load_config(fixture_path("setup_s1.json"))
        res = evaluate(net)
        i, j = res.report("i"), res.report("j")
        assert i.D[0, 0] == pytest.approx(0.25, abs=1e-15)
        assert i.rate_bits == pytest.approx(1.0, abs=1e-12)
        assert j.statistic_mixing[0, 0] == pytest.approx(4.0, abs=1e-13)
        assert j.statistic_noise[0, 0] == pytest.approx(4.0, abs=1e-13)
        assert j.rate_bits == pytest.approx(0.5 * math.log2(2.5), abs=1e-12)
        assert res.sum_rate_bits == pytest.approx(1.0 + 0.5 * math.log2(2.5), abs=1e-12)
        assert j.children == ("i",)

    def test_all_boundary(self, rng):
        net = random_tree(rng, n_nodes=5)
        net = NetworkSpec(net.source_cov, [NodeSpec(n.id, n.mixing, n.noise_cov, n.parent,
                                                    alpha=1.0) for n in net.nodes], net.base)
        res = evaluate(net)
        assert res.sum_rate_bits == 0.0
        assert all(r.validity is Validity.ZERO_RATE_BOUNDARY and not r.scheme_attached
                   for r in res.reports)

    def test_infeasible_reports_node(self):
        net = NetworkSpec([[1.0]], [scalar_node("a", distortion=0.01)],
                          LinearObservation([[1.0]], [[1.0]]))
        with pytest.raises(InfeasibleDistortionError) as info:
            evaluate(net)
        assert info.value.node_id == "a"
        assert "lower bound" in str(info.value)

    def test_no_base_measurement(self):
        net = load_config(fixture_path("chain3.json"))
        root = node_state(net, "c")
        assert root.ctx.side is None
        np.testing.assert_array_equal(root.ctx.sigma_x_side, net.source_cov)

    def test_end_to_end_sufficiency(self, rng):
        for _ in range(25):
            net = random_tree(rng)
            resolved = {}
            for st in walk(net):
                sx = net.source_cov
                views = [(st.node.mixing, st.node.noise_cov)]
                views += [estimate_view(sx, resolved[k]) for k in st.children
                          if np.abs(resolved[k] - sx).max() > 0]
                side = net.side_for(st.node)
                side_views = [] if side is None else [(side.mixing, side.noise_cov)]
                full = posterior_cov(sx, *views, *side_views)
                assert np.abs(st.ctx.sigma_x_stat_side - full).max() <= 1e-9 * np.abs(sx).max()
                resolved[st.node.id] = st.D

    def test_family_rates(self, rng):
        for _ in range(10):
            net = random_tree(rng)
            for r in evaluate(net).reports:
                assert abs(r.rate_bits - family_rate_bits(r.D.shape[0], r.alpha)) <= 1e-9

    def test_sum_rate_is_exact_sum(self, rng):
        net = random_tree(rng, n_nodes=6)
        res = evaluate(net)
        total = 0.0
        for nid in net.order:
            st = node_state(net, nid)
            total += rd_rate(st.ctx, st.D)
        assert res.sum_rate_bits == total

    def test_more_informative_children_never_cost_more(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 4))
            sx = random_spd(rng, n)
            a, s = random_invertible(rng, n), random_spd(rng, n)
            ca, cs = random_invertible(rng, n), random_spd(rng, n)
            side = LinearObservation(random_invertible(rng, n), random_spd(rng, n))

            def parent_ctx(child_alpha):
                # D(α) grows with α in the Loewner order, so a smaller α is a sharper child
                child = NodeSpec("c", ca, cs, "p", alpha=child_alpha)
                parent = NodeSpec("p", a, s, BASE, alpha=1.0)
                return node_state(NetworkSpec(sx, [child, parent], side), "p").ctx

            ctx_loose, ctx_tight = parent_ctx(0.8), parent_ctx(0.2)
            # a target strictly inside the looser (smaller) interval
            d = 0.5 * (ctx_loose.sigma_x_stat_side + ctx_loose.sigma_x_side)
            assert rd_rate(ctx_tight, d) <= rd_rate(ctx_loose, d) + 1e-12


class TestSweep:
    def test_boundary_only(self):
        net = load_config(fixture_path("setup_s1.json"))
        rows = sweep(net, "j", [1.0])
        assert len(rows) == 1 and rows[0].rate_bits == 0.0

    def test_third(self):
        net = load_config(fixture_path("setup_s1.json"))
        row = sweep(net, "j", [1 / 3])[0]
        assert row.rate_bits == pytest.approx(0.5 * math.log2(3.0), abs=1e-12)
        assert row.D[0, 0] == pytest.approx(5 / 18, abs=1e-15)

    def test_strictly_decreasing(self):
        net = load_config(fixture_path("chain3.json"))
        for nid in net.order:
            rates = [r.rate_bits for r in sweep(net, nid, np.linspace(0.02, 1.0, 50))]
            assert all(x > y for x, y in zip(rates, rates[1:]))

    def test_unknown_node(self):
        net = load_config(fixture_path("setup_s1.json"))
        with pytest.raises(ModelError):
            sweep(net, "zz", [0.5])
