from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfsim.errors import CapExceededError, StructuralError, UndefinedConditionalError
from cfsim.measurement import (
    MonitoringSchedule,
    MonitorPoint,
    blocking_equivalence,
    found_any,
    monitored_marginals,
    never_found_branch,
    project,
    run_monitored,
    terminal_is,
    tree_conditional,
)
from cfsim.optics import PhotonState, detector_distribution, evolve
from cfsim.protocol import ChainedConfig, Fig1Config, build_chained, build_fig1, channel_schedule

from oracles import fig1_monitored_leaves
from strategies import random_network, random_schedule

MID = MonitoringSchedule((MonitorPoint("s_mid", "C"),))


def _tree(r=0.9):
    return run_monitored(build_fig1(Fig1Config(r)), MID)


# -- project -----------------------------------------------------------------


def test_project_channel_amplitude():
    state = evolve(build_fig1(Fig1Config(0.9))).state_at("s_mid")
    found, rest, p = project(state, "C")
    assert abs(p - 0.05) < 1e-15
    assert found.amp("C") == state.amp("C") and rest.amp("C") == 0
    assert abs(found.probability() + rest.probability() - state.probability()) < 1e-15


def test_project_zero_amplitude():
    s = PhotonState.from_dict(("A", "C"), {"A": 1.0})
    _, rest, p = project(s, "C")
    assert p == 0 and np.array_equal(rest.vector, s.vector)


def test_project_all_on_mode():
    s = PhotonState.from_dict(("A", "C"), {"C": 1j})
    _, rest, p = project(s, "C")
    assert p == 1 and not rest.vector.any()


def test_project_idempotent_on_found_branch():
    s = PhotonState.from_dict(("A", "C"), {"A": 0.6, "C": 0.8j})
    found, _, _ = project(s, "C")
    again, rest, p = project(found, "C")
    assert np.array_equal(again.vector, found.vector) and not rest.vector.any()
    assert abs(p - 0.64) < 1e-15


def test_project_unknown_mode():
    with pytest.raises(StructuralError):
        project(PhotonState.from_dict(("A",), {"A": 1}), "Q")


# -- run_monitored ------------------------------------------------------------


def test_single_probe_tree_shape():
    tree = _tree()
    kids = tree.root.children
    assert [c.outcome for c in kids] == ["found:C@s_mid", "not-found:C@s_mid"]
    assert abs(kids[0].p - 0.05) < 1e-15
    assert abs(kids[1].p - 0.95) < 1e-15


def test_empty_schedule_leaves_equal_distribution():
    net = build_fig1(Fig1Config(0.8))
    tree = run_monitored(net, MonitoringSchedule())
    dist = detector_distribution(net)
    marg = tree.marginals()
    assert all(abs(marg[d] - dist[d]) < 1e-15 for d in net.detectors)
    assert tree.root.children and all(c.terminal for c in tree.root.children)


@pytest.mark.parametrize("r", [0.5, 0.9, 0.99])
def test_leaves_match_enumeration_oracle(r):
    tree = _tree(r)
    ref = fig1_monitored_leaves(r)
    for leaf in tree.leaves():
        tag = leaf.path[0].split(":")[0]
        assert abs(leaf.p - ref[(tag, leaf.terminal)]) < 1e-14


def test_tree_children_sum_to_parent():
    tree = run_monitored(build_chained(ChainedConfig(3, 2, monitoring=True)))
    for node in tree.nodes():
        if node.children:
            assert abs(sum(c.p for c in node.children) - node.p) < 1e-12


def test_schedule_out_of_order():
    net = build_fig1()
    sched = MonitoringSchedule.parse(["C@s_mid", "D@s_AD"])
    with pytest.raises(StructuralError):
        run_monitored(net, sched)


def test_schedule_missing_slice():
    with pytest.raises(StructuralError):
        run_monitored(build_fig1(), MonitoringSchedule.parse(["C@nowhere"]))


def test_cap_guard():
    net = build_chained(ChainedConfig(4, 2, monitoring=True))
    with pytest.raises(CapExceededError):
        run_monitored(net, cap=16)


def test_schedule_from_monitor_elements():
    net = build_fig1(Fig1Config(0.9, monitor_channel=True))
    assert [str(p) for p in MonitoringSchedule.from_network(net).points] == ["C@s_mid"]


def test_tree_json_shape():
    obj = _tree().to_json_obj()
    assert obj["outcome"] == "root"
    found = obj["children"][0]
    assert {"outcome", "p", "children"} == set(found)
    assert {"outcome", "p", "leaf"} == set(found["children"][0])


# -- conditionals -------------------------------------------------------------


def test_found_given_d1_matches_enumeration():
    r = 0.9
    ref = fig1_monitored_leaves(r)
    tree = _tree(r)
    p_joint = tree.probability(lambda lf: found_any(lf) and terminal_is("D1")(lf))
    p_d1 = ref[("found", "D1")] + ref[("not-found", "D1")]
    assert abs(p_joint - ref[("found", "D1")]) < 1e-15
    cond = tree_conditional(tree, found_any, terminal_is("D1"))
    assert abs(cond - ref[("found", "D1")] / p_d1) < 1e-14


def test_found_and_d1_closed_form():
    t = 0.1
    tree = _tree(0.9)
    p_joint = tree.probability(lambda lf: found_any(lf) and terminal_is("D1")(lf))
    assert abs(p_joint - t * t / 4) < 1e-15


def test_superset_target_is_one():
    tree = _tree()
    d1 = terminal_is("D1")
    assert abs(tree_conditional(tree, lambda lf: True, d1) - 1) < 1e-15


def test_certain_given_is_unconditional():
    tree = _tree()
    p = tree_conditional(tree, found_any, lambda lf: True)
    assert abs(p - 0.05) < 1e-15


def test_zero_probability_conditioning():
    with pytest.raises(UndefinedConditionalError):
        tree_conditional(_tree(), found_any, terminal_is("nope"))


# -- monitoring vs blocking ---------------------------------------------------


def test_fig1_blocking_equivalence():
    rep = blocking_equivalence(build_fig1(), MID)
    assert rep.equivalent
    (_, pf, ab), = rep.points
    assert abs(pf - ab) < 1e-15 and abs(pf - 0.05) < 1e-15


def test_zero_amplitude_point_is_trivial():
    sched = MonitoringSchedule.parse(["E@s_N1"])
    rep = blocking_equivalence(build_fig1(), sched)
    assert rep.equivalent and rep.points[0][1] == 0


def test_chained_m10_equivalent_each_cycle():
    net = build_chained(ChainedConfig(10, 4))
    sched = channel_schedule(net)
    rep = blocking_equivalence(net, sched)
    assert len(rep.points) == 40
    assert rep.max_fidelity_gap <= 1e-12 and rep.max_probability_gap <= 1e-12


def test_monitoring_changes_d1():
    net = build_fig1(Fig1Config(0.9))
    plain = detector_distribution(net)["D1"]
    mon = monitored_marginals(net, MID).total["D1"]
    assert abs(mon - plain) > 1e-3
    assert abs(mon - 0.725) < 1e-14


def test_marginals_agree_with_tree():
    net = build_chained(ChainedConfig(3, 2))
    sched = channel_schedule(net)
    tree = run_monitored(net, sched)
    mm = monitored_marginals(net, sched)
    for d, p in tree.marginals().items():
        if d == "absorbed":
            continue
        assert abs(mm.total[d] - p) < 1e-13
    found = tree.probability(found_any)
    assert abs(mm.found_any.total() - found) < 1e-13


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_never_found_matches_blocked_random(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    sched = random_schedule(rng, net)
    if not sched.points:
        return
    rep = blocking_equivalence(net, sched)
    assert rep.max_fidelity_gap <= 1e-12
    assert rep.max_probability_gap <= 1e-12


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_branch_completeness_random(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    tree = run_monitored(net, random_schedule(rng, net))
    assert abs(sum(lf.p for lf in tree.leaves()) - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_never_found_branch_weight(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    sched = random_schedule(rng, net)
    nf = never_found_branch(net, sched)
    tree = run_monitored(net, sched)
    p_never = tree.probability(lambda lf: not found_any(lf))
    assert abs(nf.distribution.total() - p_never) <= 1e-12
    assert abs(sum(nf.p_found) + p_never - 1) <= 1e-12
