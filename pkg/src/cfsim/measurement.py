"""Projective nondemolition monitoring, outcome trees and blockade comparison.

A probe {P_m, 1 - P_m} fires immediately after a labelled slice. The found
branch keeps the photon alive in mode ``m`` and keeps evolving. Branches are
left un-normalized so a node's ``p`` is the joint probability of its path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import CapExceededError, StructuralError, UndefinedConditionalError
from .optics import (
    TOL,
    Absorber,
    DetectorDistribution,
    Monitor,
    Network,
    PhotonState,
    Slice,
    _apply_slice,
    absorber_sink,
    detector_sink,
    distribution_from_vector,
    embed,
    require_valid,
)

DEFAULT_CAP = 2**20
# joint probabilities at or below this are treated as impossible conditions
CONDITION_FLOOR = 1e-20


@dataclass(frozen=True)
class MonitorPoint:
    label: str
    mode: str

    def __str__(self):
        return f"{self.mode}@{self.label}"

    @classmethod
    def parse(cls, text: str) -> MonitorPoint:
        mode, sep, label = text.partition("@")
        if not sep or not mode or not label:
            raise ValueError(f"expected MODE@SLICE, got {text!r}")
        return cls(label, mode)


@dataclass(frozen=True)
class MonitoringSchedule:
    points: tuple[MonitorPoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @classmethod
    def from_network(cls, net: Network) -> MonitoringSchedule:
        return cls(tuple(
            MonitorPoint(s.label, e.m)
            for s in net.slices
            for e in s.elements
            if isinstance(e, Monitor)
        ))

    @classmethod
    def parse(cls, items: Iterable[str]) -> MonitoringSchedule:
        return cls(tuple(MonitorPoint.parse(t) for t in items))

    def check(self, net: Network) -> list[int]:
        """Boundary index of each point; raises on unknown or out-of-order points."""
        out = []
        for pt in self.points:
            net.mode_index(pt.mode)
            out.append(net.boundary(pt.label))
        if any(b < a for a, b in zip(out, out[1:])):
            raise StructuralError("monitoring points are not in slice order")
        return out


def project(state: PhotonState, m: str) -> tuple[PhotonState, PhotonState, float]:
    a = state.amp(m)
    i = state.modes.index(m)
    found = np.zeros_like(state.vector)
    found[i] = a
    rest = state.vector.copy()
    rest[i] = 0
    return PhotonState(state.modes, found), PhotonState(state.modes, rest), abs(a) ** 2


# -- outcome trees ------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeNode:
    outcome: str
    p: float
    children: tuple[OutcomeNode, ...] = ()
    terminal: str | None = None

    def to_json_obj(self) -> dict:
        if self.terminal is not None:
            return {"outcome": self.outcome, "p": self.p, "leaf": self.terminal}
        return {
            "outcome": self.outcome,
            "p": self.p,
            "children": [c.to_json_obj() for c in self.children],
        }


@dataclass(frozen=True)
class Leaf:
    path: tuple[str, ...]
    terminal: str
    p: float


@dataclass(frozen=True)
class OutcomeTree:
    root: OutcomeNode
    schedule: MonitoringSchedule

    def leaves(self) -> Iterator[Leaf]:
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if node.terminal is not None:
                yield Leaf(path, node.terminal, node.p)
                continue
            sub = path if node is self.root else path + (node.outcome,)
            for c in reversed(node.children):
                stack.append((c, sub))

    def nodes(self) -> Iterator[OutcomeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    def probability(self, pred: Callable[[Leaf], bool]) -> float:
        return float(sum(lf.p for lf in self.leaves() if pred(lf)))

    def marginals(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for lf in self.leaves():
            out[lf.terminal] = out.get(lf.terminal, 0.0) + lf.p
        return out

    def monitoring_depth(self) -> int:
        return len(self.schedule.points)

    def to_json_obj(self) -> dict:
        return self.root.to_json_obj()


def found_any(leaf: Leaf) -> bool:
    return any(step.startswith("found:") for step in leaf.path)


def found_at(point: MonitorPoint) -> Callable[[Leaf], bool]:
    tag = f"found:{point}"
    return lambda leaf: tag in leaf.path


def terminal_is(name: str) -> Callable[[Leaf], bool]:
    return lambda leaf: leaf.terminal == name


def _terminal_nodes(net: Network, v: np.ndarray) -> tuple[OutcomeNode, ...]:
    dist = distribution_from_vector(net, v)
    nodes = [OutcomeNode(d, p, (), d) for d, p in dist.probabilities.items()]
    if any(k[0] == "abs" for k in net.sinks):
        nodes.append(OutcomeNode("absorbed", dist.absorbed, (), "absorbed"))
    return tuple(nodes)


def run_monitored(
    net: Network,
    sched: MonitoringSchedule | None = None,
    cap: int = DEFAULT_CAP,
    convention: str = "symmetric",
) -> OutcomeTree:
    require_valid(net, convention)
    sched = MonitoringSchedule.from_network(net) if sched is None else sched
    bounds = sched.check(net)
    if 2 ** len(bounds) > cap:
        raise CapExceededError(f"2^{len(bounds)} branches exceeds cap {cap}")
    pts = sched.points

    def grow(v: np.ndarray, k: int, pi: int) -> tuple[OutcomeNode, ...]:
        v = v.copy()
        stop = bounds[pi] if pi < len(pts) else len(net.slices)
        for sl in net.slices[k:stop]:
            _apply_slice(v, net, sl, convention)
        if pi == len(pts):
            return _terminal_nodes(net, v)
        pt = pts[pi]
        i = net.index[pt.mode]
        found = np.zeros_like(v)
        found[i] = v[i]
        rest = v
        rest[i] = 0
        out = []
        for tag, branch in (("found", found), ("not-found", rest)):
            p = float(np.vdot(branch, branch).real)
            kids = grow(branch, stop, pi + 1) if p > 0 else ()
            out.append(OutcomeNode(f"{tag}:{pt}", p, kids))
        return tuple(out)

    v0 = embed(net, net.unit_state())
    root = OutcomeNode("root", 1.0, grow(v0, 0, 0))
    return OutcomeTree(root, sched)


def tree_conditional(
    tree: OutcomeTree,
    target: Callable[[Leaf], bool],
    given: Callable[[Leaf], bool],
) -> float:
    p_given = tree.probability(given)
    if p_given <= CONDITION_FLOOR:
        raise UndefinedConditionalError(f"conditioning event has probability {p_given:.3e}")
    p_both = tree.probability(lambda lf: target(lf) and given(lf))
    return p_both / p_given


# -- shortcuts that avoid the full tree ---------------------------------------


@dataclass(frozen=True, eq=False)
class NeverFoundBranch:
    net: Network
    vectors: tuple[np.ndarray, ...]  # per boundary, after any probe at that boundary
    p_found: tuple[float, ...]  # joint probability of a first detection at each point

    @property
    def distribution(self) -> DetectorDistribution:
        return distribution_from_vector(self.net, self.vectors[-1])


def never_found_branch(
    net: Network, sched: MonitoringSchedule, convention: str = "symmetric"
) -> NeverFoundBranch:
    require_valid(net, convention)
    bounds = sched.check(net)
    by_boundary: dict[int, list[MonitorPoint]] = {}
    for b, pt in zip(bounds, sched.points):
        by_boundary.setdefault(b, []).append(pt)
    v = embed(net, net.unit_state())
    vectors = [v.copy()]
    p_found = []
    for k, sl in enumerate(net.slices, start=1):
        _apply_slice(v, net, sl, convention)
        for pt in by_boundary.get(k, ()):
            i = net.index[pt.mode]
            p_found.append(float(abs(v[i]) ** 2))
            v[i] = 0
        vectors.append(v.copy())
    return NeverFoundBranch(net, tuple(vectors), tuple(p_found))


@dataclass(frozen=True)
class MonitoredMarginals:
    total: DetectorDistribution
    found_any: DetectorDistribution  # joint with "found at least once"
    never_found: DetectorDistribution


def _diag_distribution(net: Network, diag: np.ndarray) -> DetectorDistribution:
    idx = net.index
    probs = {d: float(diag[idx[detector_sink(d)]]) for d in net.detectors}
    absorbed = float(sum(diag[idx[k]] for k in net.sinks if k[0] == "abs"))
    return DetectorDistribution(probs, absorbed)


def _conjugate_by_slice(rho: np.ndarray, net: Network, sl: Slice, convention: str) -> np.ndarray:
    _apply_slice(rho, net, sl, convention)
    rho = rho.conj().T
    _apply_slice(rho, net, sl, convention)
    return rho.conj().T


def monitored_marginals(
    net: Network, sched: MonitoringSchedule, convention: str = "symmetric"
) -> MonitoredMarginals:
    """Detector marginals with unread probes, without enumerating the tree.

    The never-found branch stays pure; everything found at least once is
    carried as a density matrix that each later probe dephases. Cost is
    polynomial in the number of probes, so long chained schedules are fine.
    """
    require_valid(net, convention)
    bounds = sched.check(net)
    by_boundary: dict[int, list[int]] = {}
    for b, pt in zip(bounds, sched.points):
        by_boundary.setdefault(b, []).append(net.index[pt.mode])
    v = embed(net, net.unit_state())
    rho = np.zeros((len(v), len(v)), dtype=complex)
    for k, sl in enumerate(net.slices, start=1):
        _apply_slice(v, net, sl, convention)
        rho = _conjugate_by_slice(rho, net, sl, convention)
        for i in by_boundary.get(k, ()):
            keep = rho[i, i]
            rho[i, :] = 0
            rho[:, i] = 0
            rho[i, i] = keep + abs(v[i]) ** 2
            v[i] = 0
    found = _diag_distribution(net, np.clip(np.diag(rho).real, 0.0, None))
    never = _diag_distribution(net, np.abs(v) ** 2)
    total = DetectorDistribution(
        {d: found.probabilities[d] + never.probabilities[d] for d in net.detectors},
        found.absorbed + never.absorbed,
    )
    return MonitoredMarginals(total, found, never)


# -- monitoring vs blocking ---------------------------------------------------


def blocked_variant(
    net: Network, sched: MonitoringSchedule
) -> tuple[Network, dict[MonitorPoint, tuple], list[int]]:
    """Replace each probe by an absorber.

    Returns the blocked network, the absorber sink key per point, and for each
    boundary of ``net`` the matching boundary index in the blocked network.
    """
    sched.check(net)
    pending: dict[str, list[str]] = {}
    for pt in sched.points:
        pending.setdefault(pt.label, []).append(pt.mode)
    slices: list[Slice] = []
    sinks: dict[MonitorPoint, tuple] = {}
    boundary_map = [0]
    for sl in net.slices:
        modes = pending.get(sl.label, [])
        in_place = [
            m for m in modes if any(isinstance(e, Monitor) and e.m == m for e in sl.elements)
        ]
        elements = tuple(
            Absorber(e.m) if isinstance(e, Monitor) and e.m in in_place else e
            for e in sl.elements
        )
        slices.append(Slice(sl.label, elements))
        for m in in_place:
            sinks[MonitorPoint(sl.label, m)] = absorber_sink(sl.label, m)
        for m in modes:
            if m in in_place:
                continue
            label = f"{sl.label}.block.{m}"
            slices.append(Slice(label, (Absorber(m),)))
            sinks[MonitorPoint(sl.label, m)] = absorber_sink(label, m)
        boundary_map.append(len(slices))
    return net.with_slices(slices), sinks, boundary_map


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.vdot(a, a).real)
    nb = float(np.vdot(b, b).real)
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(abs(np.vdot(a, b)) ** 2 / (na * nb))


@dataclass(frozen=True)
class EquivalenceReport:
    fidelities: tuple[tuple[str, float], ...]
    norm_gaps: tuple[float, ...]
    points: tuple[tuple[str, float, float], ...]  # (point, p_found, absorbed)
    tolerance: float = TOL

    @property
    def max_fidelity_gap(self) -> float:
        return max((abs(1.0 - f) for _, f in self.fidelities), default=0.0)

    @property
    def max_probability_gap(self) -> float:
        gaps = [abs(p - a) for _, p, a in self.points] + list(self.norm_gaps)
        return max(gaps, default=0.0)

    @property
    def equivalent(self) -> bool:
        return self.max_fidelity_gap <= self.tolerance and self.max_probability_gap <= self.tolerance

    def to_json_obj(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "fidelities": [{"boundary": b, "fidelity": f} for b, f in self.fidelities],
            "points": [
                {"point": p, "p_found": pf, "absorbed": ab} for p, pf, ab in self.points
            ],
        }


def blocking_equivalence(
    net: Network, sched: MonitoringSchedule, convention: str = "symmetric"
) -> EquivalenceReport:
    monitored = never_found_branch(net, sched, convention)
    blocked_net, sinks, bmap = blocked_variant(net, sched)
    require_valid(blocked_net, convention)
    v = embed(blocked_net, blocked_net.unit_state())
    blocked = [v.copy()]
    for sl in blocked_net.slices:
        _apply_slice(v, blocked_net, sl, convention)
        blocked.append(v.copy())

    n = len(net.modes)
    names = ("start",) + net.labels
    fids = []
    gaps = []
    for k, name in enumerate(names):
        a = monitored.vectors[k][:n]
        b = blocked[bmap[k]][:n]
        fids.append((name, fidelity(a, b)))
        gaps.append(abs(float(np.vdot(a, a).real) - float(np.vdot(b, b).real)))
    final = blocked[-1]
    points = []
    for pt, pf in zip(sched.points, monitored.p_found):
        absorbed = float(abs(final[blocked_net.index[sinks[pt]]]) ** 2)
        points.append((str(pt), pf, absorbed))
    return EquivalenceReport(tuple(fids), tuple(gaps), tuple(points))
