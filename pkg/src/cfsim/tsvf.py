"""Backward-evolved post-selection states and weak values of path projectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import IllConditionedPostselection, StructuralError
from .optics import (
    Network,
    Trajectory,
    detector_sink,
    embed,
    evolve,
    require_valid,
    sink_name,
    transfer_matrix,
)

# threshold on |<post|pre>|, an amplitude (not a probability)
POSTSELECTION_THRESHOLD = 1e-10


@dataclass(frozen=True)
class WeakValueQuery:
    projector_modes: frozenset[str]
    at: str
    post: str

    def __post_init__(self):
        object.__setattr__(self, "projector_modes", frozenset(self.projector_modes))

    @classmethod
    def parse(cls, text: str, post: str) -> WeakValueQuery:
        """``C@s_mid`` or ``A+C@s_mid`` (union of modes)."""
        modes, sep, label = text.partition("@")
        if not sep or not modes or not label:
            raise ValueError(f"expected MODE[+MODE...]@SLICE, got {text!r}")
        return cls(frozenset(modes.split("+")), label, post)


@dataclass(frozen=True)
class WeakValueResult:
    query: WeakValueQuery
    value: complex
    forward_amp: dict[str, complex]
    backward_amp: dict[str, complex]
    postselection_amp: complex

    def to_json_obj(self) -> dict:
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return {
            "projector": sorted(self.query.projector_modes),
            "slice": self.query.at,
            "post": self.query.post,
            "re": self.value.real,
            "im": self.value.imag,
            "forward": {m: pair(a) for m, a in sorted(self.forward_amp.items())},
            "backward": {m: pair(a) for m, a in sorted(self.backward_amp.items())},
            "postamp": pair(self.postselection_amp),
        }


def backward_trajectory(net: Network, post: str, convention: str = "symmetric") -> Trajectory:
    """Post-selected detector state evolved back through every slice adjoint.

    The last boundary holds unit amplitude on the detector's sink; the boundary
    just before its detection slice therefore holds unit amplitude on the
    detector's mode.
    """
    require_valid(net, convention)
    if post not in net.detectors:
        raise StructuralError(f"unknown detector {post!r}")
    phi = np.zeros(len(net.basis), dtype=complex)
    phi[net.index[detector_sink(post)]] = 1.0
    out = [phi]
    for k in range(len(net.slices) - 1, -1, -1):
        u = transfer_matrix(net, k, convention)
        out.append(u.conj().T @ out[-1])
    return Trajectory(net, tuple(reversed(out)))


def _boundary(net: Network, at: str) -> int:
    return 0 if at == "start" else net.boundary(at)


def _pair(net, post, convention, forward, backward):
    fw = forward if forward is not None else evolve(net, convention=convention)
    bw = backward if backward is not None else backward_trajectory(net, post, convention)
    return fw, bw


def _check_post(amp: complex):
    if abs(amp) <= POSTSELECTION_THRESHOLD:
        raise IllConditionedPostselection(abs(amp), POSTSELECTION_THRESHOLD)


def weak_value(
    net: Network,
    q: WeakValueQuery,
    convention: str = "symmetric",
    forward: Trajectory | None = None,
    backward: Trajectory | None = None,
) -> WeakValueResult:
    for m in q.projector_modes:
        net.mode_index(m)
    k = _boundary(net, q.at)
    fw, bw = _pair(net, q.post, convention, forward, backward)
    psi, phi = fw.vectors[k], bw.vectors[k]
    post_amp = complex(np.vdot(phi, psi))
    _check_post(post_amp)
    idx = [net.index[m] for m in sorted(q.projector_modes)]
    num = complex(sum(np.conj(phi[i]) * psi[i] for i in idx))
    return WeakValueResult(
        q,
        num / post_amp,
        {m: complex(psi[net.index[m]]) for m in q.projector_modes},
        {m: complex(phi[net.index[m]]) for m in q.projector_modes},
        post_amp,
    )


def weak_value_cut(
    net: Network,
    at: str,
    post: str,
    convention: str = "symmetric",
    forward: Trajectory | None = None,
    backward: Trajectory | None = None,
) -> dict[str, complex]:
    """Weak value of every occupied basis entry at one boundary.

    Occupied means nonzero forward amplitude; absorbed/detected sinks are
    included under ``abs:...``/``det:...`` keys so the values always sum to 1.
    """
    k = _boundary(net, at)
    fw, bw = _pair(net, post, convention, forward, backward)
    psi, phi = fw.vectors[k], bw.vectors[k]
    post_amp = complex(np.vdot(phi, psi))
    _check_post(post_amp)
    return {
        sink_name(key): complex(np.conj(phi[i]) * psi[i] / post_amp)
        for i, key in enumerate(net.basis)
        if psi[i] != 0
    }


def weak_values(
    net: Network, queries: Iterable[WeakValueQuery], convention: str = "symmetric"
) -> list[WeakValueResult]:
    """Batch form that shares forward/backward trajectories per detector."""
    fw = evolve(net, convention=convention)
    cache: dict[str, Trajectory] = {}
    out = []
    for q in queries:
        if q.post not in cache:
            cache[q.post] = backward_trajectory(net, q.post, convention)
        out.append(weak_value(net, q, convention, fw, cache[q.post]))
    return out
