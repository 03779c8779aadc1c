from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest

from liabnet.generators import random_dag, random_losses
from liabnet.graph import (
    Dag,
    GraphError,
    Path,
    build_dag,
    enumerate_paths,
    efficient_paths,
    path_loss,
)
from liabnet.rules import (
    MODE_GENERAL,
    MODE_OWN_EDGE,
    MODE_TOTALS,
    LiabilityVector,
    RuleSpec,
    RuleSpecError,
    apply_rule,
    fixed_rule,
    irreducible_extension,
    make_rule,
)
from liabnet.weights import WeightsError, WeightVector

GRAMMAR = [
    "fixed:wstar",
    "fixed:equal",
    "fixed:file=weights.json",
    "local",
    "phi1",
    "phi2",
    "phi3",
    "phi5",
    "punish-first",
]


def path_of(dag: Dag, *labels: str) -> Path:
    return Path(tuple(dag.index(x) for x in labels))


def fork_losses(dag: Dag, **by_label):
    # keys like si=2 name the edge (s, i)
    out = {}
    for key, val in by_label.items():
        out[(dag.index(key[0]), dag.index(key[1]))] = val
    return out


class TestSpecGrammar:
    def test_round_trip(self):
        for text in GRAMMAR:
            assert RuleSpec.parse(text).to_string() == text

    def test_unknown_spec_rejected(self):
        with pytest.raises(RuleSpecError):
            RuleSpec.parse("fixed:shapley")
        with pytest.raises(RuleSpecError):
            RuleSpec.parse("phi4")
        with pytest.raises(RuleSpecError):
            RuleSpec.parse("fixed:file=")

    def test_make_rule_accepts_spec_or_string(self, fork):
        a = make_rule("phi1", fork)
        b = make_rule(RuleSpec.parse("phi1"), fork)
        assert a.spec_string == b.spec_string == "phi1"

    def test_solver_modes(self, fork):
        losses = {e: 1 for e in fork.edges}
        assert make_rule("fixed:wstar", fork).bind(losses).mode == MODE_TOTALS
        assert make_rule("phi2", fork).bind(losses).mode == MODE_TOTALS
        assert make_rule("phi3", fork).bind(losses).mode == MODE_TOTALS
        assert make_rule("phi5", fork).bind(losses).mode == MODE_TOTALS
        assert make_rule("local", fork).bind(losses).mode == MODE_OWN_EDGE
        assert make_rule("punish-first", fork).bind(losses).mode == MODE_GENERAL

    def test_fixed_cares_follow_weights(self, fork):
        w = WeightVector((Fraction(0), Fraction(0), Fraction(1, 2), Fraction(1, 2), Fraction(0)))
        bound = fixed_rule(fork, w).bind({e: 1 for e in fork.edges})
        assert bound.cares == (False, False, True, True, False)


class TestFixedFamily:
    def test_equal_split(self):
        dag, _ = _line4()
        losses = {
            (dag.index("s"), dag.index("a")): 3,
            (dag.index("a"), dag.index("b")): 2,
            (dag.index("b"), dag.index("t")): 3,
            (dag.index("s"), dag.index("t")): 1,
        }
        rule = make_rule("fixed:equal", dag)
        vec = apply_rule(rule, path_of(dag, "s", "a", "b", "t"), losses)
        assert vec.values == (Fraction(2),) * 4
        assert vec.total == 8

    def test_wstar_on_fork(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        rule = make_rule("fixed:wstar", fork)
        vec = apply_rule(rule, path_of(fork, "s", "i", "t"), losses)
        # w* = (4/9, 1/6, 5/18, 1/9, 0), total 6
        expect = (Fraction(8, 3), Fraction(1), Fraction(5, 3), Fraction(2, 3), Fraction(0))
        assert vec.values == expect

    def test_source_all(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        vec = apply_rule(make_rule("phi1", fork), path_of(fork, "s", "j", "t"), losses)
        assert vec.values == (Fraction(1), 0, 0, 0, 0)
        assert vec[fork.index("s")] == 1

    def test_file_weights(self, fork, tmp_path):
        wfile = tmp_path / "w.json"
        wfile.write_text(json.dumps({"s": 0.5, "i": 0.25, "j": 0.25}))
        rule = make_rule(f"fixed:file={wfile}", fork)
        losses = fork_losses(fork, si=1, sj=1, jk=1, it=3, jt=1, kt=1)
        vec = apply_rule(rule, path_of(fork, "s", "i", "t"), losses)
        assert vec.as_floats() == (2.0, 1.0, 1.0, 0.0, 0.0)

    def test_bad_weights_rejected(self, fork):
        heavy = WeightVector((Fraction(1), Fraction(1), 0, 0, 0))
        with pytest.raises(WeightsError):
            fixed_rule(fork, heavy)
        short = WeightVector((Fraction(1),))
        with pytest.raises(RuleSpecError):
            fixed_rule(fork, short)


class TestMaxOutWeights:
    def test_weights_from_largest_outgoing(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        # offset u=5; marks (7, 9, 8, 10, 0), sum 34; path total 6
        vec = apply_rule(make_rule("phi2", fork), path_of(fork, "s", "i", "t"), losses)
        expect = tuple(Fraction(6 * m, 34) for m in (7, 9, 8, 10, 0))
        assert vec.values == expect

    def test_scale_invariant_split_exactly(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        lam = Fraction(7, 3)
        scaled = {e: lam * v for e, v in losses.items()}
        p = path_of(fork, "s", "i", "t")
        rule = make_rule("phi2", fork)
        base = apply_rule(rule, p, losses).values
        big = apply_rule(rule, p, scaled).values
        assert big == tuple(lam * x for x in base)

    def test_depends_on_off_path_losses(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        tweaked = dict(losses)
        tweaked[(fork.index("k"), fork.index("t"))] = 11
        p = path_of(fork, "s", "i", "t")
        rule = make_rule("phi2", fork)
        assert path_loss(losses, p) == path_loss(tweaked, p)
        assert apply_rule(rule, p, losses).values != apply_rule(rule, p, tweaked).values

    def test_zero_losses_zero_vector(self, fork):
        losses = {e: 0 for e in fork.edges}
        vec = apply_rule(make_rule("phi2", fork), path_of(fork, "s", "j", "k", "t"), losses)
        assert all(x == 0 for x in vec.values)


class TestOnPathAlpha:
    def test_fork_shares(self, fork):
        # longest path has 4 nodes, so each on-path agent pays T/4
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        vec = apply_rule(make_rule("phi3", fork), path_of(fork, "s", "i", "t"), losses)
        on = Fraction(6, 4)
        off = (1 - 3 * Fraction(1, 4)) / 2 * 6
        assert vec.as_dict(fork) == pytest.approx(
            {"s": float(on), "i": float(on), "t": float(on), "j": float(off), "k": float(off)}
        )
        assert vec[fork.index("j")] == Fraction(3, 4)

    def test_sink_on_path_pays(self, fork):
        losses = {e: 1 for e in fork.edges}
        vec = apply_rule(make_rule("phi3", fork), path_of(fork, "s", "j", "t"), losses)
        assert vec[fork.index("t")] == Fraction(2, 4)

    def test_full_cover_path_leaves_no_remainder(self):
        dag = build_dag(["s", "a", "t"], [("s", "a"), ("a", "t")])
        losses = {e: 5 for e in dag.edges}
        vec = apply_rule(make_rule("phi3", dag), path_of(dag, "s", "a", "t"), losses)
        assert vec.values == (Fraction(10, 3),) * 3
        assert vec.total == 10


class TestSqrtSource:
    def test_formula(self, fork):
        losses = fork_losses(fork, si=2, sj=1, jk=3, it=4, jt=0, kt=5)
        vec = apply_rule(make_rule("phi5", fork), path_of(fork, "s", "i", "t"), losses)
        w = 1 / (7.0) ** 0.5  # total 6
        assert vec[fork.index("s")] == pytest.approx(w * 6)
        for label in ("i", "j", "k", "t"):
            assert vec[fork.index(label)] == pytest.approx((1 - w) * 6 / 4)

    def test_source_payment_tracks_total(self, fork):
        rule = make_rule("phi5", fork)
        small = apply_rule(rule, path_of(fork, "s", "i", "t"), {e: 1 for e in fork.edges})
        big = apply_rule(rule, path_of(fork, "s", "i", "t"), {e: 4 for e in fork.edges})
        assert big[fork.index("s")] > small[fork.index("s")]


class TestLocal:
    def test_each_pays_own_edge(self, chain3):
        dag, losses = chain3
        vec = apply_rule(make_rule("local", dag), path_of(dag, "s", "n1", "n2", "t"), losses)
        assert vec.as_dict(dag) == {"s": 1.0, "n1": 1.0, "n2": 1.0, "t": 0.0}

    def test_shortcut_path(self, chain3):
        dag, losses = chain3
        vec = apply_rule(make_rule("local", dag), path_of(dag, "s", "t"), losses)
        assert vec.as_dict(dag) == {"s": 1.5, "n1": 0.0, "n2": 0.0, "t": 0.0}


class TestPunishFirst:
    def test_efficient_path_split_equally(self, chain3):
        dag, losses = chain3
        vec = apply_rule(make_rule("punish-first", dag), path_of(dag, "s", "t"), losses)
        assert vec.as_floats() == (0.375, 0.375, 0.375, 0.375)

    def test_first_inefficient_step_blamed(self, chain3):
        dag, losses = chain3
        vec = apply_rule(
            make_rule("punish-first", dag), path_of(dag, "s", "n1", "n2", "t"), losses
        )
        assert vec.as_dict(dag) == {"s": 3.0, "n1": 0.0, "n2": 0.0, "t": 0.0}

    def test_blame_lands_mid_path(self):
        # s->a efficient, then a picks the strictly worse branch
        dag = build_dag(
            ["s", "a", "t1", "t2"],
            [("s", "a"), ("a", "t1"), ("a", "t2")],
        )
        losses = {
            (dag.index("s"), dag.index("a")): 1,
            (dag.index("a"), dag.index("t1")): 0,
            (dag.index("a"), dag.index("t2")): 5,
        }
        vec = apply_rule(make_rule("punish-first", dag), path_of(dag, "s", "a", "t2"), losses)
        assert vec.as_dict(dag) == {"s": 0.0, "a": 6.0, "t1": 0.0, "t2": 0.0}


class TestApplyRuleValidation:
    def test_rejects_wrong_start(self, fork):
        losses = {e: 1 for e in fork.edges}
        bad = Path((fork.index("i"), fork.index("t")))
        with pytest.raises(GraphError):
            apply_rule(make_rule("fixed:equal", fork), bad, losses)

    def test_rejects_missing_edge(self, fork):
        losses = {e: 1 for e in fork.edges}
        bad = Path((fork.index("s"), fork.index("k"), fork.index("t")))
        with pytest.raises(GraphError):
            apply_rule(make_rule("fixed:equal", fork), bad, losses)

    def test_rejects_non_sink_end(self, fork):
        losses = {e: 1 for e in fork.edges}
        bad = Path((fork.index("s"), fork.index("j")))
        with pytest.raises(GraphError):
            apply_rule(make_rule("fixed:equal", fork), bad, losses)

    def test_rejects_partial_losses(self, fork):
        losses = {e: 1 for e in fork.edges}
        losses.pop((fork.index("k"), fork.index("t")))
        with pytest.raises(GraphError):
            apply_rule(make_rule("fixed:equal", fork), path_of(fork, "s", "i", "t"), losses)


class TestBalanceEverywhere:
    def test_all_rules_balanced_nonnegative_on_randoms(self):
        rng = random.Random(4021)
        specs = ["fixed:wstar", "fixed:equal", "phi1", "phi2", "phi3", "phi5", "local", "punish-first"]
        for _ in range(40):
            dag = random_dag(rng)
            losses = random_losses(rng, dag)
            paths = enumerate_paths(dag)
            for spec in specs:
                rule = make_rule(spec, dag)
                for p in paths:
                    vec = apply_rule(rule, p, losses)  # asserts internally
                    assert all(float(x) >= -1e-12 for x in vec.values)
                    assert float(vec.total) == pytest.approx(
                        float(path_loss(losses, p)), abs=1e-9
                    )


class TestIrreducibleExtension:
    def test_fork_example(self, fork):
        losses = fork_losses(fork, si=1, sj=9, jk=9, it=1, jt=9, kt=9)
        path = path_of(fork, "s", "i", "t")
        ext = irreducible_extension(fork, path, losses)
        expect = fork_losses(fork, si=1, it=1, sj=0, jk=0, jt=2, kt=2)
        assert ext == expect

    def test_agrees_on_path_and_ties_everything(self):
        rng = random.Random(515)
        for _ in range(60):
            dag = random_dag(rng)
            losses = random_losses(rng, dag)
            paths = enumerate_paths(dag)
            path = rng.choice(paths)
            total = path_loss(losses, path)
            ext = irreducible_extension(dag, path, losses)
            assert set(ext) == set(dag.edges)
            assert all(v >= 0 for v in ext.values())
            for q in paths:
                assert path_loss(ext, q) == total
            res = efficient_paths(dag, ext)
            assert res.min_cost == total
            assert res.path_set() == {q.nodes for q in paths}

    def test_path_edges_preserved_between_interior_nodes(self, fork):
        # prefix potentials reproduce the original losses on interior steps
        losses = fork_losses(fork, si=1, sj=2, jk=3, it=4, jt=5, kt=6)
        path = path_of(fork, "s", "j", "k", "t")
        ext = irreducible_extension(fork, path, losses)
        sj = (fork.index("s"), fork.index("j"))
        jk = (fork.index("j"), fork.index("k"))
        assert ext[sj] == losses[sj]
        assert ext[jk] == losses[jk]

    def test_invalid_path_rejected(self, fork):
        losses = {e: 1 for e in fork.edges}
        with pytest.raises(GraphError):
            irreducible_extension(fork, Path((fork.index("s"), fork.index("k"))), losses)


def _line4():
    dag = build_dag(
        ["s", "a", "b", "t"],
        [("s", "a"), ("a", "b"), ("b", "t"), ("s", "t")],
    )
    return dag, None
