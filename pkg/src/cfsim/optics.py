"""Single-photon amplitude evolution through time-sliced linear-optical networks.

A network is a list of slices; each slice holds elements acting on disjoint
modes. Absorbers and detectors move amplitude out of the live modes into
sink entries, so the state over (modes + sinks) evolves unitarily and the
probability bookkeeping stays exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Union

import numpy as np

from .errors import NetworkValidationError, ParameterRangeError, StructuralError

TOL = 1e-12

CONVENTIONS = ("symmetric", "real")


def bs_unitary(r: float, convention: str = "symmetric") -> np.ndarray:
    """2x2 beam-splitter matrix for reflectivity ``r``.

    The symmetric convention puts ``i`` on transmission; ``"real"`` is the
    alternative ``[[sqrt r, sqrt t], [-sqrt t, sqrt r]]`` used to check that
    observable quantities do not depend on the choice.
    """
    if not (0.0 <= r <= 1.0):
        raise ParameterRangeError(f"reflectivity {r!r} outside [0, 1]")
    a = math.sqrt(r)
    b = math.sqrt(1.0 - r)
    if convention == "symmetric":
        return np.array([[a, 1j * b], [1j * b, a]], dtype=complex)
    if convention == "real":
        return np.array([[a, b], [-b, a]], dtype=complex)
    raise ParameterRangeError(f"unknown beam-splitter convention {convention!r}")


# -- elements -----------------------------------------------------------------


@dataclass(frozen=True)
class BeamSplitter:
    r: float
    m1: str
    m2: str

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.m1, self.m2)


@dataclass(frozen=True)
class PhaseShift:
    m: str
    phi: float

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.m,)


@dataclass(frozen=True)
class Absorber:
    m: str

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.m,)


@dataclass(frozen=True)
class Monitor:
    m: str

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.m,)


@dataclass(frozen=True)
class Detector:
    m: str
    name: str

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.m,)


Element = Union[BeamSplitter, PhaseShift, Absorber, Monitor, Detector]


@dataclass(frozen=True)
class Slice:
    label: str
    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))


# Sink keys live beside mode names in the extended basis; they are tuples so
# they can never collide with a mode name.
def detector_sink(name: str) -> tuple:
    return ("det", name)


def absorber_sink(label: str, mode: str) -> tuple:
    return ("abs", label, mode)


def sink_name(key) -> str:
    if isinstance(key, str):
        return key
    if key[0] == "det":
        return f"det:{key[1]}"
    return f"abs:{key[1]}:{key[2]}"


@dataclass(frozen=True)
class Network:
    modes: tuple[str, ...]
    source: str
    slices: tuple[Slice, ...]
    channel: str | None = None
    name: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "slices", tuple(self.slices))

    @property
    def detectors(self) -> tuple[str, ...]:
        return tuple(
            e.name for s in self.slices for e in s.elements if isinstance(e, Detector)
        )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.slices)

    @cached_property
    def sinks(self) -> tuple[tuple, ...]:
        out = []
        for s in self.slices:
            for e in s.elements:
                if isinstance(e, Detector):
                    out.append(detector_sink(e.name))
                elif isinstance(e, Absorber):
                    out.append(absorber_sink(s.label, e.m))
        return tuple(out)

    @cached_property
    def basis(self) -> tuple:
        return self.modes + self.sinks

    @cached_property
    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.basis)}

    def mode_index(self, mode: str) -> int:
        if mode not in self.modes:
            raise StructuralError(f"unknown mode {mode!r}")
        return self.index[mode]

    def slice_position(self, label: str) -> int:
        for k, s in enumerate(self.slices):
            if s.label == label:
                return k
        raise StructuralError(f"unknown slice label {label!r}")

    def boundary(self, label: str) -> int:
        """Index of the slice boundary immediately after slice ``label``."""
        return self.slice_position(label) + 1

    def detector_mode(self, name: str) -> str:
        for s in self.slices:
            for e in s.elements:
                if isinstance(e, Detector) and e.name == name:
                    return e.m
        raise StructuralError(f"unknown detector {name!r}")

    def unit_state(self, mode: str | None = None) -> PhotonState:
        return PhotonState.unit(self.modes, self.source if mode is None else mode)

    def with_slices(self, slices: Iterable[Slice]) -> Network:
        return replace(self, slices=tuple(slices))

    def after(self, label: str) -> Network:
        """The network seen by a photon entering right after slice ``label``."""
        return self.with_slices(self.slices[self.boundary(label):])


# -- states -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhotonState:
    """Complex amplitude per mode; may be sub-normalized after branching."""

    modes: tuple[str, ...]
    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def unit(cls, modes: Iterable[str], mode: str) -> PhotonState:
        modes = tuple(modes)
        if mode not in modes:
            raise StructuralError(f"unknown mode {mode!r}")
        v = np.zeros(len(modes), dtype=complex)
        v[modes.index(mode)] = 1.0
        return cls(modes, v)

    @classmethod
    def from_dict(cls, modes: Iterable[str], amps: dict) -> PhotonState:
        modes = tuple(modes)
        v = np.zeros(len(modes), dtype=complex)
        for m, a in amps.items():
            if m not in modes:
                raise StructuralError(f"unknown mode {m!r}")
            v[modes.index(m)] = a
        return cls(modes, v)

    def amp(self, mode: str) -> complex:
        if mode not in self.modes:
            raise StructuralError(f"unknown mode {mode!r}")
        return complex(self.vector[self.modes.index(mode)])

    @property
    def amplitudes(self) -> dict[str, complex]:
        return {m: complex(a) for m, a in zip(self.modes, self.vector)}

    def probability(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)


@dataclass(frozen=True)
class SinkRecord:
    kind: str  # "absorbed" or "detected"
    key: str  # detector name, or mode for absorbers
    amplitude: complex

    @property
    def probability(self) -> float:
        return abs(self.amplitude) ** 2


def apply_element(
    state: PhotonState, e: Element, convention: str = "symmetric"
) -> tuple[PhotonState, SinkRecord | None]:
    for m in e.modes:
        if m not in state.modes:
            raise StructuralError(f"element {e!r} references unknown mode {m!r}")
    v = state.vector.copy()
    pos = state.modes.index
    record = None
    if isinstance(e, BeamSplitter):
        u = bs_unitary(e.r, convention)
        i, j = pos(e.m1), pos(e.m2)
        v[i], v[j] = u[0, 0] * v[i] + u[0, 1] * v[j], u[1, 0] * v[i] + u[1, 1] * v[j]
    elif isinstance(e, PhaseShift):
        v[pos(e.m)] *= np.exp(1j * e.phi)
    elif isinstance(e, Absorber):
        record = SinkRecord("absorbed", e.m, complex(v[pos(e.m)]))
        v[pos(e.m)] = 0
    elif isinstance(e, Detector):
        record = SinkRecord("detected", e.name, complex(v[pos(e.m)]))
        v[pos(e.m)] = 0
    return PhotonState(state.modes, v), record


def _apply_slice(v: np.ndarray, net: Network, sl: Slice, convention: str) -> None:
    """In-place slice action on an extended-basis array.

    ``v`` may carry trailing axes (e.g. a pointer register); element actions
    only index the leading basis axis.
    """
    idx = net.index
    for e in sl.elements:
        if isinstance(e, BeamSplitter):
            u = bs_unitary(e.r, convention)
            i, j = idx[e.m1], idx[e.m2]
            a, b = v[i].copy(), v[j].copy()
            v[i] = u[0, 0] * a + u[0, 1] * b
            v[j] = u[1, 0] * a + u[1, 1] * b
        elif isinstance(e, PhaseShift):
            v[idx[e.m]] *= np.exp(1j * e.phi)
        elif isinstance(e, (Absorber, Detector)):
            # swap with the (always empty) sink keeps the slice exactly unitary
            k = idx[absorber_sink(sl.label, e.m) if isinstance(e, Absorber) else detector_sink(e.name)]
            i = idx[e.m]
            a, b = v[i].copy(), v[k].copy()
            v[i], v[k] = b, a


def transfer_matrix(net: Network, k: int, convention: str = "symmetric") -> np.ndarray:
    """Matrix of slice ``k`` on the extended (modes + sinks) basis."""
    u = np.eye(len(net.basis), dtype=complex)
    _apply_slice(u, net, net.slices[k], convention)
    return u


def embed(net: Network, state: PhotonState) -> np.ndarray:
    v = np.zeros(len(net.basis), dtype=complex)
    for m, a in zip(state.modes, state.vector):
        v[net.mode_index(m)] = a
    return v


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    slice: int | None = None
    element: int | None = None

    def __str__(self):
        where = "" if self.slice is None else f" (slice {self.slice}"
        if self.element is not None:
            where += f", element {self.element}"
        if where:
            where += ")"
        return f"{self.kind}: {self.message}{where}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _bad_name(name) -> bool:
    return not isinstance(name, str) or not name or any(c.isspace() for c in name)


def _local_block(e: Element, convention: str) -> np.ndarray:
    if isinstance(e, BeamSplitter):
        return bs_unitary(e.r, convention)
    if isinstance(e, PhaseShift):
        return np.array([[np.exp(1j * e.phi)]])
    if isinstance(e, (Absorber, Detector)):
        # (mode, sink) swap: the sink is empty when the element fires
        return np.array([[0, 1], [1, 0]], dtype=complex)
    return np.eye(1, dtype=complex)


def validate(net: Network, convention: str = "symmetric") -> ValidationReport:
    out: list[Violation] = []
    seen = set()
    for m in net.modes:
        if _bad_name(m):
            out.append(Violation("declaration", f"bad mode name {m!r}"))
        if m in seen:
            out.append(Violation("duplicate", f"mode {m!r} declared twice"))
        seen.add(m)
    if net.source not in seen:
        out.append(Violation("source", f"source {net.source!r} not declared"))
    if net.channel is not None and net.channel not in seen:
        out.append(Violation("unknown-mode", f"channel {net.channel!r} not declared"))

    labels = set()
    detectors = set()
    detected: dict[str, str] = {}
    for k, sl in enumerate(net.slices):
        if _bad_name(sl.label):
            out.append(Violation("declaration", f"bad slice label {sl.label!r}", k))
        if sl.label in labels:
            out.append(Violation("duplicate", f"slice label {sl.label!r} repeated", k))
        labels.add(sl.label)
        used: set[str] = set()
        for j, e in enumerate(sl.elements):
            known = True
            for m in e.modes:
                if m not in seen:
                    out.append(Violation("unknown-mode", f"mode {m!r} not declared", k, j))
                    known = False
            if isinstance(e, BeamSplitter):
                if not (isinstance(e.r, (int, float)) and 0.0 <= e.r <= 1.0):
                    out.append(Violation("range", f"reflectivity {e.r!r} outside [0, 1]", k, j))
                if e.m1 == e.m2:
                    out.append(Violation("disjointness", f"beam splitter uses {e.m1!r} twice", k, j))
            if isinstance(e, PhaseShift) and not math.isfinite(e.phi):
                out.append(Violation("range", f"phase {e.phi!r} not finite", k, j))
            for m in set(e.modes):
                if m in used:
                    out.append(Violation("disjointness", f"mode {m!r} touched twice in slice {sl.label!r}", k, j))
                used.add(m)
                if known and m in detected:
                    out.append(Violation(
                        "terminality", f"mode {m!r} used after detection by {detected[m]!r}", k, j
                    ))
            if isinstance(e, Detector):
                if _bad_name(e.name):
                    out.append(Violation("declaration", f"bad detector label {e.name!r}", k, j))
                if e.name in detectors:
                    out.append(Violation("duplicate", f"detector label {e.name!r} repeated", k, j))
                detectors.add(e.name)
        for e in sl.elements:
            if isinstance(e, Detector):
                detected.setdefault(e.m, e.name)

    if not out:
        # disjoint elements: slice unitarity reduces to per-element blocks
        for k, sl in enumerate(net.slices):
            for j, e in enumerate(sl.elements):
                b = _local_block(e, convention)
                err = np.max(np.abs(b.conj().T @ b - np.eye(len(b))))
                if err > TOL:
                    out.append(Violation("isometry", f"element deviates by {err:.2e}", k, j))
    return ValidationReport(tuple(out))


def require_valid(net: Network, convention: str = "symmetric") -> None:
    report = validate(net, convention)
    if not report.ok:
        raise NetworkValidationError(report.violations)


# -- evolution ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    net: Network
    vectors: tuple[np.ndarray, ...]  # extended basis, one per slice boundary

    @property
    def states(self) -> list[PhotonState]:
        n = len(self.net.modes)
        return [PhotonState(self.net.modes, v[:n]) for v in self.vectors]

    def state_at(self, label: str) -> PhotonState:
        n = len(self.net.modes)
        return PhotonState(self.net.modes, self.vectors[self.net.boundary(label)][:n])

    @property
    def final(self) -> np.ndarray:
        return self.vectors[-1]

    @property
    def detector_amplitudes(self) -> dict[str, complex]:
        idx = self.net.index
        return {d: complex(self.final[idx[detector_sink(d)]]) for d in self.net.detectors}

    @property
    def absorbed(self) -> dict[tuple[str, str], float]:
        idx = self.net.index
        return {
            (k[1], k[2]): float(abs(self.final[idx[k]]) ** 2)
            for k in self.net.sinks
            if k[0] == "abs"
        }

    def total_probability(self, boundary: int = -1) -> float:
        v = self.vectors[boundary]
        return float(np.vdot(v, v).real)


def run_vectors(
    net: Network, v0: np.ndarray, convention: str = "symmetric", start: int = 0
) -> list[np.ndarray]:
    vs = [np.array(v0, dtype=complex)]
    for sl in net.slices[start:]:
        v = vs[-1].copy()
        _apply_slice(v, net, sl, convention)
        vs.append(v)
    return vs


def evolve(
    net: Network, input: PhotonState | None = None, convention: str = "symmetric"
) -> Trajectory:
    require_valid(net, convention)
    state = net.unit_state() if input is None else input
    p = state.probability()
    if abs(p - 1.0) > TOL:
        raise ParameterRangeError(f"input state norm^2 {p!r} is not 1")
    return Trajectory(net, tuple(run_vectors(net, embed(net, state), convention)))


def natural_key(label: str) -> list:
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", label)]


@dataclass(frozen=True)
class DetectorDistribution:
    probabilities: dict[str, float]
    absorbed: float

    def total(self) -> float:
        return sum(self.probabilities.values()) + self.absorbed

    def as_dict(self) -> dict[str, float]:
        """Detectors in natural label order (D3.c2 before D3.c10), then ``absorbed``."""
        out = {k: self.probabilities[k] for k in sorted(self.probabilities, key=natural_key)}
        out["absorbed"] = self.absorbed
        return out

    def __getitem__(self, name: str) -> float:
        return self.probabilities[name]

    def grouped(self) -> dict[str, float]:
        """Merge per-cycle labels such as ``D3.c1``, ``D3.c2`` into ``D3``."""
        out: dict[str, float] = {}
        for k, p in self.probabilities.items():
            base = k.split(".", 1)[0]
            out[base] = out.get(base, 0.0) + p
        return out


def distribution_from_vector(net: Network, v: np.ndarray) -> DetectorDistribution:
    idx = net.index
    probs = {d: float(abs(v[idx[detector_sink(d)]]) ** 2) for d in net.detectors}
    absorbed = float(sum(abs(v[idx[k]]) ** 2 for k in net.sinks if k[0] == "abs"))
    return DetectorDistribution(probs, absorbed)


def detector_distribution(
    net: Network, input: PhotonState | None = None, convention: str = "symmetric"
) -> DetectorDistribution:
    traj = evolve(net, input, convention)
    return distribution_from_vector(net, traj.final)


def channel_amplitudes(traj: Trajectory, mode: str) -> np.ndarray:
    i = traj.net.mode_index(mode)
    return np.array([v[i] for v in traj.vectors])


__all__ = [
    "TOL",
    "Absorber",
    "BeamSplitter",
    "Detector",
    "DetectorDistribution",
    "Element",
    "Monitor",
    "Network",
    "PhaseShift",
    "PhotonState",
    "SinkRecord",
    "Slice",
    "Trajectory",
    "ValidationReport",
    "Violation",
    "apply_element",
    "bs_unitary",
    "detector_distribution",
    "evolve",
    "transfer_matrix",
    "validate",
]
