from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings

from cfsim.errors import NetworkValidationError, ParameterRangeError, StructuralError
from cfsim.optics import (
    Absorber,
    BeamSplitter,
    Detector,
    Monitor,
    Network,
    PhaseShift,
    PhotonState,
    Slice,
    apply_element,
    bs_unitary,
    detector_distribution,
    embed,
    run_vectors,
    evolve,
    transfer_matrix,
    validate,
)
from cfsim.protocol import Fig1Config, build_fig1

from oracles import fig1_distribution, fig1_forward
from strategies import networks

R_GRID = [0.05, 0.3, 0.5, 0.7, 0.9, 0.99]


# -- bs_unitary ----------------------------------------------------------------


def test_bs_full_reflection_is_identity():
    assert np.allclose(bs_unitary(1.0), np.eye(2), atol=0)


def test_bs_transparent_swaps_with_i():
    assert np.array_equal(bs_unitary(0.0), np.array([[0, 1j], [1j, 0]]))


def test_bs_balanced():
    h = math.sqrt(0.5)
    assert np.allclose(bs_unitary(0.5), [[h, 1j * h], [1j * h, h]], atol=1e-16)


@pytest.mark.parametrize("r", [0.0, 1e-9, 0.25, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("convention", ["symmetric", "real"])
def test_bs_unitary_within_1e15(r, convention):
    u = bs_unitary(r, convention)
    assert np.max(np.abs(u.conj().T @ u - np.eye(2))) <= 1e-15


@pytest.mark.parametrize("r", [-0.1, 1.2, float("nan")])
def test_bs_rejects_out_of_range(r):
    with pytest.raises(ParameterRangeError):
        bs_unitary(r)


# -- apply_element -----------------------------------------------------------


def _two(a=1.0, b=0.0):
    return PhotonState(("A", "B"), np.array([a, b], dtype=complex))


def test_apply_balanced_bs():
    out, rec = apply_element(_two(), BeamSplitter(0.5, "A", "B"))
    h = math.sqrt(0.5)
    assert np.allclose(out.vector, [h, 1j * h], atol=1e-16)
    assert rec is None


def test_apply_phase_pi():
    out, _ = apply_element(_two(), PhaseShift("A", math.pi))
    assert abs(out.amp("A") + 1) < 1e-15


def test_apply_absorber_records_probability():
    t = 0.1
    amp = 1j * math.sqrt(t / 2)
    out, rec = apply_element(_two(0, amp), Absorber("B"))
    assert out.amp("B") == 0
    assert rec.kind == "absorbed"
    assert abs(rec.probability - t / 2) < 1e-15


def test_apply_detector_moves_amplitude():
    out, rec = apply_element(_two(0.6, 0.8j), Detector("B", "DX"))
    assert out.amp("B") == 0 and rec.key == "DX" and rec.amplitude == 0.8j


def test_apply_monitor_is_inert():
    s = _two(0.6, 0.8j)
    out, rec = apply_element(s, Monitor("A"))
    assert np.array_equal(out.vector, s.vector) and rec is None


def test_apply_unknown_mode():
    with pytest.raises(StructuralError):
        apply_element(_two(), PhaseShift("Z", 1.0))


# -- evolve ------------------------------------------------------------------


def test_outer_split_amplitudes():
    traj = evolve(build_fig1(Fig1Config(0.9)))
    s = traj.state_at("s_AD")
    assert abs(s.amp("A") - math.sqrt(0.9)) < 1e-15
    assert abs(s.amp("D") - 1j * math.sqrt(0.1)) < 1e-15


def test_zero_slices_is_identity():
    net = Network(("A", "B"), "A", ())
    traj = evolve(net)
    assert len(traj.states) == 1
    assert np.array_equal(traj.final[:2], [1, 0])


@pytest.mark.parametrize("r", [0.5, 0.9, 0.99])
def test_injected_inside_inner_interferometer_reaches_d3(r):
    net = build_fig1(Fig1Config(r)).after("s_AD")
    amps = evolve(net, net.unit_state("D")).detector_amplitudes
    assert abs(abs(amps["D3"]) ** 2 - 1) < 1e-12


def test_trajectory_length_and_conservation():
    net = build_fig1(Fig1Config(0.7, blockade=True))
    traj = evolve(net)
    assert len(traj.states) == len(net.slices) + 1
    for k in range(len(traj.vectors)):
        assert abs(traj.total_probability(k) - 1) < 1e-12


def test_evolve_rejects_unnormalized_input():
    net = build_fig1()
    with pytest.raises(ParameterRangeError):
        evolve(net, PhotonState.from_dict(net.modes, {"A": 0.5}))


def test_evolve_validates_first():
    net = Network(("A",), "A", (Slice("s", (BeamSplitter(0.5, "A", "A"),)),))
    with pytest.raises(NetworkValidationError):
        evolve(net)


@pytest.mark.parametrize("r", R_GRID)
def test_fig1_states_match_matrix_oracle(r):
    traj = evolve(build_fig1(Fig1Config(r)))
    ref = fig1_forward(r)
    for label in ("s_AD", "s_mid", "s_AE", "s_det"):
        state = traj.state_at(label)
        for m in "ABCDE":
            assert abs(state.amp(m) - ref[label][["A", "B", "C", "D", "E"].index(m)]) < 1e-14


# -- detector_distribution -------------------------------------------------


@pytest.mark.parametrize("r", R_GRID)
@pytest.mark.parametrize("blockade", [False, True])
def test_fig1_distribution_matches_oracle(r, blockade):
    dist = detector_distribution(build_fig1(Fig1Config(r, blockade=blockade)))
    ref = fig1_distribution(r, blockade=blockade)
    for k in ("D1", "D2", "D3"):
        assert abs(dist[k] - ref[k]) < 1e-14
    assert abs(dist.absorbed - ref["absorbed"]) < 1e-14


@pytest.mark.parametrize("r", R_GRID)
def test_fig1_closed_forms(r):
    t = 1 - r
    dist = detector_distribution(build_fig1(Fig1Config(r)))
    assert abs(dist["D1"] - r * r) < 1e-12
    assert abs(dist["D2"] - r * t) < 1e-12
    assert abs(dist["D3"] - t) < 1e-12


def test_full_reflection_all_to_d1():
    dist = detector_distribution(build_fig1(Fig1Config(1.0, allow_degenerate=True)))
    assert abs(dist["D1"] - 1) < 1e-15
    assert dist["D2"] < 1e-30 and dist["D3"] < 1e-30


def test_as_dict_orders_detectors():
    d = detector_distribution(build_fig1()).as_dict()
    assert list(d) == ["D1", "D2", "D3", "absorbed"]


# -- validate --------------------------------------------------------------


def test_fig1_validates_clean():
    rep = validate(build_fig1())
    assert rep.ok and rep.violations == ()


def test_disjointness_violation():
    net = Network(
        ("A", "B", "C"), "A",
        (Slice("s", (BeamSplitter(0.5, "A", "B"), BeamSplitter(0.5, "A", "C"))),
         Slice("d", (Detector("A", "D1"), Detector("B", "D2"), Detector("C", "D3")))),
    )
    assert "disjointness" in validate(net).kinds()


def test_range_violation():
    net = Network(("A", "B"), "A", (Slice("s", (BeamSplitter(1.2, "A", "B"),)),))
    assert "range" in validate(net).kinds()


def test_unknown_mode_violation():
    net = Network(("A",), "A", (Slice("s", (PhaseShift("Q", 0.1),)),))
    assert "unknown-mode" in validate(net).kinds()


def test_terminality_violation():
    net = Network(
        ("A", "B"), "A",
        (Slice("d", (Detector("A", "D1"),)), Slice("s", (BeamSplitter(0.5, "A", "B"),))),
    )
    assert "terminality" in validate(net).kinds()


def test_duplicate_labels_and_detectors():
    net = Network(
        ("A", "B"), "A",
        (Slice("s", ()), Slice("s", (Detector("A", "D"), Detector("B", "D")))),
    )
    assert {"duplicate"} <= validate(net).kinds()


def test_source_must_be_declared():
    assert "source" in validate(Network(("A",), "Z", ())).kinds()


# -- properties ------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(networks)
def test_slices_are_unitary(net):
    for k in range(len(net.slices)):
        u = transfer_matrix(net, k)
        assert np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(networks)
def test_norm_conserved_every_boundary(net):
    traj = evolve(net)
    for k in range(len(traj.vectors)):
        assert abs(traj.total_probability(k) - 1) <= 1e-12
    assert abs(detector_distribution(net).total() - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(networks)
def test_composition(net):
    cut = len(net.slices) // 2
    head = net.with_slices(net.slices[:cut])
    tail = net.with_slices(net.slices[cut:])
    whole = evolve(net).final
    mid = evolve(head).final
    live = PhotonState(net.modes, mid[: len(net.modes)])
    end = run_vectors(tail, embed(tail, live))[-1]
    for key, i in net.index.items():
        if key in head.index and not isinstance(key, str):
            got = mid[head.index[key]]
        else:
            got = end[tail.index[key]]
        assert abs(got - whole[i]) <= 1e-13


def test_balanced_pair_acts_as_swap():
    net = Network(
        ("A", "B"), "A",
        (Slice("b1", (BeamSplitter(0.5, "A", "B"),)), Slice("b2", (BeamSplitter(0.5, "A", "B"),))),
    )
    s = evolve(net).final
    assert abs(s[0]) < 1e-15 and abs(abs(s[1]) - 1) < 1e-15


@pytest.mark.parametrize("r", [0.3, 0.9])
def test_real_convention_same_probabilities_for_balanced_swap(r):
    net = Network(
        ("A", "B"), "A",
        (Slice("b1", (BeamSplitter(r, "A", "B"),)), Slice("d", (Detector("A", "X"), Detector("B", "Y")))),
    )
    a = detector_distribution(net)
    b = detector_distribution(net, convention="real")
    assert abs(a["X"] - b["X"]) < 1e-15
