import json

import numpy as np
import pytest

from dstruct import io
from dstruct.checker import (
    AXIOMS,
    FAILS,
    HOLDS,
    LOCALITY,
    SKIPPED,
    CheckReport,
    audit_implications,
    check_axiom,
    check_calculus_Du,
    check_locality,
    lattice_contradictions,
    recheck,
    reproduce_counterexample,
)
from dstruct.generators import path_graph
from dstruct.space import IntervalGridSpace
from dstruct.structures import NotPointwiseLocalError


def test_report_invariant():
    with pytest.raises(ValueError):
        CheckReport("L1", "graph", 1, 0, FAILS, None)
    with pytest.raises(ValueError):
        CheckReport("L1", "graph", 1, 1, HOLDS, {"margin": 1.0})


class TestGraphOnP2:
    """The fixed probes on the two-vertex path."""

    def test_l1_holds(self, p2):
        assert check_locality("graph", p2, "L1", trials=20).verdict == HOLDS

    def test_l2_witness(self, p2):
        rep = check_locality("graph", p2, "L2", trials=5)
        assert rep.verdict == FAILS
        w = rep.witness
        assert w["trial"] == 0
        assert io.decode(w["inputs"]["u"]).tolist() == [0.0, 1.0]
        assert w["inputs"]["B"]["indices"] == [0]
        assert w["margin"] == pytest.approx(0.5, abs=1e-8)

    def test_l5_witness(self, p2):
        rep = check_locality("graph", p2, "L5", trials=5)
        assert io.decode(rep.witness["inputs"]["g"]).tolist() == [1.0, 0.0]
        assert rep.witness["margin"] == pytest.approx(0.5, abs=1e-8)

    def test_shanmugalingam_witness(self, p2):
        rep = check_locality("graph", p2, "shanmugalingam", trials=5)
        inputs = {k: io.decode(v) for k, v in rep.witness["inputs"].items()}
        assert inputs["g2"] == pytest.approx([0.5, 0.5], abs=1e-8)
        assert rep.witness["margin"] == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("prop", ["L3", "L4", "timoshin"])
    def test_other_witnesses(self, p2, prop):
        rep = check_locality("graph", p2, prop, trials=5)
        assert rep.verdict == FAILS
        assert rep.witness["margin"] >= 0.1


@pytest.mark.parametrize("prop", LOCALITY[1:])
def test_witness_replays_from_json(prop):
    rep = check_locality("graph", None, prop, trials=10, seed=3)
    payload = json.loads(io.dumps(rep.to_json()))
    assert recheck(payload) >= payload["witness"]["margin"] - 1e-9
    assert payload["witness"]["rechecked_margin"] >= payload["witness"]["tol"]


@pytest.mark.parametrize("axiom", AXIOMS)
@pytest.mark.parametrize("kind", ["graph", "hajlasz", "trivial", "interval_derivative"])
def test_axioms_hold_small(kind, axiom):
    rep = check_axiom(kind, None, axiom, trials=15, seed=11)
    assert rep.verdict == HOLDS, rep.witness


def test_axiom_a4_constant_targets(p2):
    # u1 = (0, 1), u2 = (1, 0): max and min are constant
    rep = check_axiom("graph", p2, "A4", trials=30, seed=0)
    assert rep.verdict == HOLDS


def test_interval_locality_on_given_grid():
    grid = IntervalGridSpace.uniform(5)
    for prop in LOCALITY:
        assert check_locality("interval_derivative", grid, prop, trials=20).verdict == HOLDS


def test_unknown_names():
    with pytest.raises(ValueError):
        check_axiom("graph", None, "A6")
    with pytest.raises(ValueError):
        check_locality("graph", None, "L6")


def test_determinism():
    a = check_locality("hajlasz", None, "L4", trials=20, seed=5).to_json()
    b = check_locality("hajlasz", None, "L4", trials=20, seed=5).to_json()
    assert io.dumps(a) == io.dumps(b)


def test_threads_do_not_change_verdicts(monkeypatch):
    serial = check_locality("graph", None, "L3", trials=16, seed=9).to_json()
    monkeypatch.setenv("DSTRUCT_THREADS", "4")
    threaded = check_locality("graph", None, "L3", trials=16, seed=9).to_json()
    assert io.dumps(serial) == io.dumps(threaded)


class TestLattice:
    def test_synthetic_contradiction(self):
        verdicts = {"L3": HOLDS, "L2": FAILS}
        assert lattice_contradictions(verdicts) == [{"premises": ["L3"], "conclusion": "L2"}]

    def test_l4_l5_equivalence_both_ways(self):
        assert lattice_contradictions({"L4": HOLDS, "L5": FAILS})
        assert lattice_contradictions({"L5": HOLDS, "L4": FAILS})

    def test_graph_audit(self):
        audit = audit_implications("graph", None, trials=10)
        v = audit.verdicts()
        assert v["L1"] == HOLDS
        assert all(v[k] == FAILS for k in LOCALITY[1:])
        assert audit.consistent

    @pytest.mark.parametrize("kind", ["interval_derivative", "trivial"])
    def test_pointwise_audit(self, kind):
        audit = audit_implications(kind, None, trials=10)
        assert set(audit.verdicts().values()) == {HOLDS}
        assert audit.consistent


class TestCounterexample:
    def test_default(self):
        rep = reproduce_counterexample()
        assert rep.verdict == HOLDS
        assert rep.details["Du_on_B"] == pytest.approx(0.5, abs=1e-6)
        assert rep.details["energy_on_B_explicit"] == 0.0

    def test_p3(self):
        rep = reproduce_counterexample(p=3)
        assert rep.verdict == HOLDS and rep.details["Du_on_B"] > 0

    def test_single_vertex(self):
        rep = reproduce_counterexample(n_vertices=1)
        assert rep.verdict == SKIPPED
        assert rep.details["note"] == "V must contain more than one vertex"

    def test_longer_path(self):
        assert reproduce_counterexample(n_vertices=4).verdict == HOLDS


class TestCalculusDu:
    def test_rules_hold(self):
        reps = check_calculus_Du(trials=30, seed=1)
        assert {k: r.verdict for k, r in reps.items()} == {
            "null_preimage": HOLDS, "chain_rule": HOLDS, "leibniz": HOLDS}

    def test_rejects_constraint_structures(self):
        with pytest.raises(NotPointwiseLocalError):
            check_calculus_Du("graph")


def test_l1_explicit_construction_on_larger_graph():
    rep = check_locality("graph", path_graph(5), "L1", trials=30, seed=2)
    assert rep.verdict == HOLDS
    assert rep.details["max_margin"] <= 1e-12
