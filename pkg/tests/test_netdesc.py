from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings

from cfsim import netdesc
from cfsim.netdesc import NetParseError, equivalent, parse, serialize
from cfsim.optics import detector_distribution
from cfsim.protocol import Fig1Config, build_fig1

from strategies import networks

FIX = Path(__file__).parent / "fixtures"

ERROR_CORPUS = {
    "broken.net": ("syntax", 5),
    "bad_range.net": ("range", 5),
    "bad_disjoint.net": ("disjointness", 7),
    "bad_terminal.net": ("terminality", 8),
    "bad_unknown.net": ("unknown-mode", 5),
    "crlf.net": ("syntax", 1),
    "no_final_lf.net": ("syntax", 5),
}

HEAD = "network t\nmode A source\nmode B\n"
TAIL = "slice z\ndetect A as D1\ndetect B as D2\nend\n"


def _errors(text):
    with pytest.raises(NetParseError) as info:
        parse(text)
    return info.value


def test_fixture_matches_builder():
    net = netdesc.load(FIX / "fig1.net")
    a = detector_distribution(net)
    b = detector_distribution(build_fig1(Fig1Config(0.9)))
    for d in ("D1", "D2", "D3"):
        assert abs(a[d] - b[d]) < 1e-15
    assert net.channel == "C" and net.source == "A"


def test_fixture_is_builder_network():
    assert equivalent(netdesc.load(FIX / "fig1.net"), build_fig1(Fig1Config(0.9)))


@pytest.mark.parametrize("name", sorted(ERROR_CORPUS))
def test_error_corpus(name):
    kind, line = ERROR_CORPUS[name]
    with pytest.raises(NetParseError) as info:
        netdesc.load(FIX / name)
    err = info.value
    assert err.kinds == {kind}
    assert err.errors[0].line == line


def test_range_error_location():
    err = _errors(HEAD + "slice s\nbs r=1.5 A B\nend\n" + TAIL)
    (e,) = err.errors
    assert (e.kind, e.line, e.column) == ("range", 5, 4)


def test_disjointness_error():
    err = _errors(HEAD + "mode C\nslice s\nbs r=0.5 A B\nbs r=0.5 A C\nend\n" + TAIL)
    assert "disjointness" in err.kinds


def test_one_error_per_kind():
    text = HEAD + "slice s\nbs r=1.5 A B\nbs r=2.5 A B\nphase phi=x A\nfoo\nend\n" + TAIL
    err = _errors(text)
    kinds = [e.kind for e in err.errors]
    assert sorted(kinds) == sorted(set(kinds))
    assert {"range", "syntax"} <= err.kinds


@pytest.mark.parametrize(
    "text",
    [
        "mode A source\nslice s\ndetect A as D1\nend\n",  # no header
        "network t\nmode A\nslice s\ndetect A as D1\nend\n",  # no source
        "network t\nmode A source\nmode B source\nslice s\nend\n",
        "network t\nmode A source\n",  # no slice
        "network t\nmode A source\nslice s\ndetect A as D1\n",  # unclosed
        "network t\nmode A source\nslice s\ndetect A D1\nend\n",
        "network t\nmode A source\nslice s\nbs r=1e A A\nend\n",
        "network t\nmode A source\nmode A\nslice s\nend\n",
        "network t\nmode A source\nslice s\nend\nmode B\n",
        "network t\nmode A source \xe9\nslice s\nend\n",
        "network t\nmode A source\nend\n",
    ],
)
def test_syntax_errors(text):
    assert "syntax" in _errors(text).kinds


def test_comments_and_blank_lines():
    text = "# hi\nnetwork t # name\n\nmode A source   # src\nslice s\n  phase phi=-1.5e-1 A\nend\nslice z\ndetect A as D1\nend\n"
    net = parse(text)
    assert net.labels == ("s", "z")
    assert net.slices[0].elements[0].phi == -0.15


def test_serialize_sorted_and_deterministic():
    net = build_fig1()
    a, b = serialize(net), serialize(net)
    assert a == b
    modes = [ln.split()[1] for ln in a.splitlines() if ln.startswith("mode ")]
    assert modes == sorted(modes)
    assert "bs r=0.90000000000000002 A D" in a


def test_round_trip_preserves_labels():
    net = build_fig1(Fig1Config(0.37, blockade=True))
    assert parse(serialize(net)).labels == net.labels


def test_serialize_rejects_nonfinite():
    from cfsim.optics import PhaseShift, Slice
    net = build_fig1().with_slices((Slice("s", (PhaseShift("A", float("nan")),)),))
    with pytest.raises(ValueError):
        serialize(net)


@settings(max_examples=300, deadline=None)
@given(networks)
def test_round_trip_random(net):
    back = parse(serialize(net))
    assert equivalent(net, back)
    a, b = detector_distribution(net), detector_distribution(back)
    assert all(abs(a[d] - b[d]) <= 1e-14 for d in net.detectors)
    assert serialize(back) == serialize(net)
