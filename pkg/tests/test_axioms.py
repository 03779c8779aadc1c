from __future__ import annotations

import json
import random

import pytest

from liabnet.axioms import (
    AXIOMS,
    AxiomError,
    check_axiom,
    check_property,
    impossibility_scenario,
)
from liabnet.generators import random_simplex_weights
from liabnet.graph import build_dag
from liabnet.rules import fixed_rule
from liabnet.weights import WeightVector


def delta_star_factory(dag, rng):
    w = random_simplex_weights(rng, dag, positive_deciders=True)
    return fixed_rule(dag, WeightVector.from_mapping(dag, w))


class TestEfficientImplementation:
    def test_wstar_passes_on_randoms(self):
        rep = check_axiom("EI", "fixed:wstar", trials=100, seed=11)
        assert rep.passed and rep.passes == 100

    def test_local_fails_on_bypass_chain(self, chain3):
        dag, losses = chain3
        rep = check_axiom("EI", "local", dag=dag, trials=1, seed=0, losses=losses)
        assert not rep.passed
        cex = rep.counterexample
        assert cex["spe"] == [["s", "n1", "n2", "t"]]
        assert cex["spe_totals"] == [3.0]
        assert cex["efficient_total"] == 1.5

    def test_wstar_passes_on_bypass_chain(self, chain3):
        dag, losses = chain3
        rep = check_axiom("EI", "fixed:wstar", dag=dag, trials=1, seed=0, losses=losses)
        assert rep.passed

    def test_source_all_fails_somewhere(self):
        rep = check_axiom("EI", "phi1", trials=400, seed=21)
        assert not rep.passed
        assert rep.counterexample["spe"] != rep.counterexample["efficient"]


class TestRealizedLossDependence:
    def test_maxout_weights_fail(self):
        rep = check_axiom("RLD", "phi2", trials=300, seed=5)
        assert not rep.passed

    @pytest.mark.parametrize("spec", ["fixed:wstar", "fixed:equal", "phi1", "phi3", "phi5", "local", "punish-first"][:5])
    def test_total_only_rules_pass(self, spec):
        rep = check_axiom("RLD", spec, trials=120, seed=6)
        assert rep.passed, rep.counterexample

    def test_local_passes_rld(self):
        # own-edge payments never look off the path
        rep = check_axiom("RLD", "local", trials=120, seed=7)
        assert rep.passed


class TestScaleInvariance:
    def test_sqrt_source_fails(self):
        rep = check_axiom("SI", "phi5", trials=50, seed=3)
        assert not rep.passed

    @pytest.mark.parametrize("spec", ["fixed:wstar", "fixed:equal", "phi1", "phi2", "phi3", "local"])
    def test_homogeneous_rules_pass(self, spec):
        rep = check_axiom("SI", spec, trials=120, seed=4)
        assert rep.passed, rep.counterexample


class TestPairwiseCollusion:
    def test_onpath_alpha_fails(self):
        rep = check_axiom("PCP", "phi3", trials=600, seed=12)
        assert not rep.passed
        cex = rep.counterexample
        assert cex["pair_sum_after"] < cex["pair_sum_before"] or True
        assert {"deviator", "partner", "deviation_path"} <= set(cex)

    @pytest.mark.parametrize("spec", ["fixed:wstar", "fixed:equal", "phi1", "phi2", "phi5"])
    def test_others_pass(self, spec):
        rep = check_axiom("PCP", spec, trials=150, seed=13)
        assert rep.passed, rep.counterexample


class TestPositiveWeightSufficiency:
    def test_random_positive_weights_pass_all_axioms(self):
        for axiom in AXIOMS:
            rep = check_axiom(axiom, delta_star_factory, trials=40, seed=77)
            assert rep.passed, (axiom, rep.counterexample)


class TestReplayDeterminism:
    def test_reports_replay_byte_for_byte(self):
        a = check_axiom("PCP", "phi3", trials=600, seed=12)
        b = check_axiom("PCP", "phi3", trials=600, seed=12)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(
            b.to_dict(), sort_keys=True
        )
        assert not a.passed

    def test_property_reports_replay(self):
        a = check_property("PATH_INDEP", "fixed:wstar", trials=40, seed=9)
        b = check_property("PATH_INDEP", "fixed:wstar", trials=40, seed=9)
        assert a.to_dict() == b.to_dict()


class TestDownstreamMono:
    def test_wstar_passes(self):
        rep = check_property("DOWNSTREAM_MONO", "fixed:wstar", trials=120, seed=1)
        assert rep.applicable and rep.passed

    @pytest.mark.parametrize("spec", ["phi3", "phi5"])
    def test_increasing_rules_pass(self, spec):
        rep = check_property("DOWNSTREAM_MONO", spec, trials=100, seed=2)
        assert rep.applicable and rep.passed, rep.counterexample

    @pytest.mark.parametrize("spec", ["local", "phi2", "punish-first"])
    def test_not_applicable_rules(self, spec):
        rep = check_property("DOWNSTREAM_MONO", spec, trials=10, seed=3)
        assert not rep.applicable
        assert not rep.passed

    def test_fixed_graph_without_eligible_mover(self):
        dag = build_dag(["s", "a", "t"], [("s", "a"), ("a", "t")])
        rep = check_property("DOWNSTREAM_MONO", "fixed:wstar", dag=dag, trials=5, seed=0)
        assert not rep.applicable


class TestOtherProperties:
    def test_efficient_path_invariance(self):
        assert check_property("EFF_PATH_INV", "fixed:equal", trials=60, seed=8).passed
        rep = check_property("EFF_PATH_INV", "local", trials=200, seed=8)
        assert not rep.passed

    def test_redistribution_invariance(self):
        assert check_property(
            "REDISTRIBUTION_INV", "fixed:wstar", trials=80, seed=15
        ).passed
        assert not check_property(
            "REDISTRIBUTION_INV", "local", trials=200, seed=15
        ).passed

    def test_path_independence_constructed_local_failure(self):
        dag = build_dag(["s", "a", "t"], [("s", "t"), ("s", "a"), ("a", "t")])
        losses = {
            (dag.index("s"), dag.index("t")): 2,
            (dag.index("s"), dag.index("a")): 1,
            (dag.index("a"), dag.index("t")): 1,
        }
        rep = check_property(
            "PATH_INDEP", "local", dag=dag, trials=1, seed=0, losses=losses
        )
        assert not rep.passed
        assert rep.counterexample["total"] == 2

    def test_path_independence_fixed_passes(self):
        assert check_property("PATH_INDEP", "fixed:wstar", trials=60, seed=16).passed

    def test_total_loss_dependence(self):
        assert check_property("TOTAL_LOSS_DEP", "fixed:equal", trials=60, seed=17).passed
        assert not check_property("TOTAL_LOSS_DEP", "local", trials=200, seed=17).passed


class TestScenario:
    def test_impossibility_reproduces(self):
        rep = impossibility_scenario()
        assert rep.passed
        assert rep.detail["prime"]["efficient"] == [["s", "i", "t"]]
        assert rep.detail["local_inefficient_spe_at_prime"] == [["s", "i", "j", "t"]]
        assert rep.detail["wstar_matches_efficient"] == {"base": True, "prime": True}
        assert rep.detail["base"]["local_spe"] == [["s", "i", "j", "t"]]
        assert len(rep.detail["base"]["efficient"]) == 3

    def test_scenario_is_deterministic(self):
        assert impossibility_scenario().to_dict() == impossibility_scenario().to_dict()


class TestValidation:
    def test_unknown_ids_rejected(self):
        with pytest.raises(AxiomError):
            check_axiom("EFFICIENCY", "fixed:wstar", trials=1)
        with pytest.raises(AxiomError):
            check_property("MONOTONE", "fixed:wstar", trials=1)

    def test_losses_require_graph(self):
        with pytest.raises(AxiomError):
            check_axiom("EI", "fixed:wstar", losses={(0, 1): 1}, trials=1)

    def test_bound_rule_on_foreign_graph_rejected(self, fork, diamond):
        rule = fixed_rule(
            fork,
            WeightVector.from_mapping(
                fork, {i: 0 for i in range(fork.n)} | {fork.index("s"): 1}
            ),
        )
        with pytest.raises(AxiomError):
            check_axiom("EI", rule, dag=diamond, trials=1)
