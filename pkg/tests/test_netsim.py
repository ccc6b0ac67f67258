import numpy as np
import pytest

from cpconsensus import (AffineMax, CommGraph, FaultPlan, PerturbedObjective, Schedule, StopRule,
                         check_joint_connectivity, diameter, run)
from cpconsensus.netsim import GraphError
from cpconsensus.problems.reference import reference_solve

from _helpers import ToyInstance


def polytope_instance(seed, n, d=3, rows=3, M=10.0):
    rng = np.random.default_rng(seed)
    blocks = [(rng.normal(size=(rows, d)), rng.uniform(0.5, 1.5, rows)) for _ in range(n)]
    # a bounded intersection: node 0 also holds a box of half-width 2
    A0 = np.vstack([blocks[0][0], np.eye(d), -np.eye(d)])
    b0 = np.concatenate([blocks[0][1], np.full(2 * d, 2.0)])
    blocks[0] = (A0, b0)
    facs = [lambda A=A, b=b: AffineMax(A, b) for A, b in blocks]
    return ToyInstance(facs, rng.normal(size=d), M), blocks


class TestGraphs:
    def test_complete(self):
        assert check_joint_connectivity(CommGraph.complete(3), 1)
        assert diameter(CommGraph.complete(5)) == 1

    def test_ring(self):
        g = CommGraph.ring(4)
        assert check_joint_connectivity(g, 1) and diameter(g) == 3
        assert diameter(CommGraph.ring(5)) == 4

    def test_disconnected_cliques(self):
        e = [(0, 1), (1, 0), (2, 3), (3, 2)]
        g = CommGraph.static(4, e)
        assert not check_joint_connectivity(g, 1)
        with pytest.raises(GraphError):
            diameter(g)

    def test_circulant(self):
        g = CommGraph.circulant(10, 5)
        assert diameter(g) == 2
        assert len(g.edges(0)) == 50
        assert all(len(x) == 5 for x in g.in_neighbors(0))

    def test_regular_lattice(self):
        g = CommGraph.regular(101, 8)
        e = {tuple(p) for p in g.edges(0).tolist()}
        assert all((b, a) in e for a, b in e)
        assert all(len(x) == 8 for x in g.in_neighbors(0))
        with pytest.raises(GraphError):
            CommGraph.regular(10, 3)

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError):
            CommGraph.static(3, [(1, 1)])
        with pytest.raises(GraphError):
            CommGraph.static(3, [(0, 3)])

    def test_erdos_renyi(self):
        g = CommGraph.erdos_renyi(50, seed=4)
        assert g.params["p"] == pytest.approx(1.2 * np.log(50) / 50)
        assert not np.array_equal(g.edges(1), g.edges(2))
        h = CommGraph.erdos_renyi(50, seed=4)
        assert np.array_equal(g.edges(7), h.edges(7))
        assert np.all(g.edges(3)[:, 0] != g.edges(3)[:, 1])
        fixed = CommGraph.erdos_renyi(50, seed=4, resample=False)
        assert np.array_equal(fixed.edges(1), fixed.edges(9))
        # density matches p on average
        m = np.mean([len(g.edges(t)) for t in range(200)])
        assert m == pytest.approx(g.params["p"] * 50 * 49, rel=0.05)

    def test_erdos_renyi_jointly_connected(self):
        assert check_joint_connectivity(CommGraph.erdos_renyi(20, seed=1), window=20)

    def test_script_windows(self):
        a, b = [(0, 1), (1, 2)], [(2, 0)]
        g = CommGraph.script(3, [a, b], loop_from=0)
        assert not check_joint_connectivity(g, 1)
        assert check_joint_connectivity(g, 2)
        assert np.array_equal(g.edges(5), g.edges(1))


class TestSchedule:
    def test_all(self):
        assert Schedule().active(3, 5, 0).all()

    def test_round_robin_covers(self):
        s = Schedule("round_robin", per_round=2)
        seen = np.zeros(5, int)
        for t in range(1, 6):
            seen += s.active(t, 5, 0)
        assert np.all(seen == 2)

    def test_random_nonempty_and_seeded(self):
        s = Schedule("random", fraction=0.1)
        for t in range(1, 50):
            assert s.active(t, 4, 9).any()
            assert np.array_equal(s.active(t, 4, 9), s.active(t, 4, 9))

    @pytest.mark.parametrize("kw", [{"kind": "x"}, {"kind": "random", "fraction": 0.0},
                                    {"kind": "round_robin", "per_round": 0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            Schedule(**kw)

    def test_fault_plan(self):
        with pytest.raises(ValueError):
            FaultPlan(((0, 0),))
        with pytest.raises(ValueError):
            FaultPlan(((7, 3),)).validate(5)
        assert FaultPlan(((1, 4), (1, 2))).fail_round(1) == 2


class TestRun:
    def test_single_node_halfline(self):
        inst = ToyInstance([lambda: AffineMax([[1.0]], [0.0])], [1.0], M=1.0)
        log = run(inst, CommGraph.static(1, []), stop=StopRule.all_within(1e-6, [0.0]))
        assert log.stop_round == 2 and log.stop_reason == "all_within"

    def test_two_nodes(self):
        inst = ToyInstance([lambda: AffineMax([[1.0]], [0.0])] * 2, [1.0], M=1.0)
        log = run(inst, CommGraph.ring(2), stop=StopRule.all_within(1e-9, [0.0], 3))
        assert log.stop_round <= 3 and np.allclose(log.final_queries, 0.0)

    def test_message_latency(self):
        # node 1 has no constraint; it only learns z <= 0 one round after node 0 finds it
        inst = ToyInstance([lambda: AffineMax([[1.0]], [0.0]), lambda: AffineMax([[1.0]], [5.0])],
                           [1.0], M=1.0)
        log = run(inst, CommGraph.static(2, [(0, 1)]), stop=StopRule(4))
        q = log.queries[:, :, 0]
        assert q[1, 0] == pytest.approx(1.0) and q[1, 1] == pytest.approx(1.0)
        assert q[2, 0] == pytest.approx(0.0) and q[2, 1] == pytest.approx(0.0)

    def test_deterministic(self):
        inst, _ = polytope_instance(2, 6)
        g = CommGraph.erdos_renyi(6, 0.4, seed=3)
        sched = Schedule("random", 0.6)
        a = run(inst, g, sched, stop=StopRule(30), seed=5)
        b = run(inst, g, sched, stop=StopRule(30), seed=5)
        assert a.to_csv() == b.to_csv()
        assert np.array_equal(a.queries, b.queries)

    def test_converges_and_agrees(self):
        for seed in range(5):
            inst, _ = polytope_instance(seed, 5)
            ref = reference_solve(inst)
            eps = 1e-3
            log = run(inst, CommGraph.ring(5), stop=StopRule.all_within(eps, ref.z, 300))
            assert log.stop_reason == "all_within"
            q = log.final_queries
            spread = max(np.linalg.norm(q[i] - q[j]) for i in range(5) for j in range(5))
            assert spread <= 2 * eps
            # the query objective upper-bounds the optimum throughout
            assert np.nanmin(log.gammas) >= ref.gamma - 1e-7

    def test_async_schedules_converge(self):
        inst, _ = polytope_instance(11, 5)
        ref = reference_solve(inst)
        for sched in (Schedule("random", 0.3), Schedule("round_robin", per_round=1)):
            log = run(inst, CommGraph.erdos_renyi(5, 0.5, seed=2), sched,
                      stop=StopRule.all_within(1e-4, ref.z, 1000), seed=8)
            assert log.stop_reason == "all_within"

    def test_ring_propagation_bound(self):
        eps = 1e-4
        for seed in range(4):
            inst, _ = polytope_instance(20 + seed, 6)
            g = CommGraph.ring(6)
            D = diameter(g)
            log = run(inst, g, stop=StopRule(40))
            J = PerturbedObjective(inst.c, eps)
            vals = np.array([[J(z) for z in row] for row in log.queries])
            for t in range(vals.shape[0] - D):
                assert vals[t + D].max() <= vals[t].min() + 1e-9

    def test_monotone_and_outer(self):
        inst, blocks = polytope_instance(30, 6)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-2, 2, size=(20000, 3))
        for A, b in blocks:
            pts = pts[np.all(pts @ A.T <= b + 1e-12, axis=1)]
        assert len(pts) > 10
        J = PerturbedObjective(inst.c, 1e-4)
        prev = None

        def check(t, nodes):
            nonlocal prev
            vals = np.array([J(nd.query) for nd in nodes])
            if prev is not None:
                assert np.all(vals <= prev + 1e-9)
            prev = vals
            for nd in nodes:
                assert np.all(pts @ nd.basis.cuts.A.T <= nd.basis.cuts.b + 1e-8)

        run(inst, CommGraph.erdos_renyi(6, 0.3, seed=1), stop=StopRule(40), callback=check)

    def test_fault_redundant_node(self):
        # node 2 repeats node 1's constraint, so dropping it changes nothing
        A = np.vstack([np.eye(2), -np.eye(2)])
        facs = [lambda: AffineMax(A, [1, 1, 1, 1]), lambda: AffineMax([[1.0, 1.0]], [1.0]),
                lambda: AffineMax([[1.0, 1.0]], [1.0]), lambda: AffineMax([[1.0, -1.0]], [1.5])]
        inst = ToyInstance(facs, [1.0, 0.2], M=10.0)
        ref = reference_solve(inst)
        g = CommGraph.ring(4, bidirectional=True)
        clean = run(inst, g, stop=StopRule.all_within(1e-6, ref.z, 100))
        log = run(inst, g, faults=FaultPlan(((2, 2),)), stop=StopRule.all_within(1e-6, ref.z, 100))
        assert log.stop_reason == "all_within"
        assert np.allclose(np.delete(log.final_queries, 2, 0), ref.z, atol=1e-6)
        assert 2 in log.fail_gamma and np.isnan(log.gammas[-1, 2])
        after = log.gammas[2:]
        assert np.nanmax(after) <= log.fail_gamma[2] + 1e-7
        assert clean.stop_reason == "all_within"

    def test_failed_node_never_sends(self):
        inst, _ = polytope_instance(5, 4)
        seen = []

        def spy(t, nodes):
            seen.append(nodes[3].round_count)

        run(inst, CommGraph.complete(4), faults=FaultPlan(((3, 3),)), stop=StopRule(10), callback=spy)
        assert max(seen) == 3

    def test_extra_rounds(self):
        inst, _ = polytope_instance(8, 4)
        ref = reference_solve(inst)
        base = run(inst, CommGraph.ring(4), stop=StopRule.all_within(1e-3, ref.z, 200))
        more = run(inst, CommGraph.ring(4), stop=StopRule.all_within(1e-3, ref.z, 200, extra_rounds=5))
        assert more.stop_round == base.stop_round
        assert more.total_rounds == base.stop_round + 5
        assert more.gammas.shape[0] == base.gammas.shape[0] + 5

    def test_plateau_stop(self):
        inst, _ = polytope_instance(9, 4)
        log = run(inst, CommGraph.ring(4), stop=StopRule.objective_plateau(1e-12, 5, 500))
        assert log.stop_reason == "objective_plateau" and log.stop_round < 500

    def test_size_mismatch(self):
        inst, _ = polytope_instance(9, 4)
        with pytest.raises(GraphError):
            run(inst, CommGraph.ring(5))


class TestRunLog:
    def test_csv_and_json(self, tmp_path):
        inst, _ = polytope_instance(3, 3)
        ref = reference_solve(inst)
        log = run(inst, CommGraph.complete(3), stop=StopRule.all_within(0.1, ref.z, 100))
        text = log.to_csv(tmp_path / "log.csv")
        lines = text.strip().splitlines()
        assert lines[0] == "round,node,gamma,dist_to_ref,basis_size,verdict,slack"
        assert len(lines) == 1 + 3 * log.stop_round
        import json
        js = json.loads(log.to_json(tmp_path / "s.json"))
        assert js["stop_round"] == log.stop_round and len(js["final_z"]) == 3
        assert (tmp_path / "log.csv").read_text() == text
