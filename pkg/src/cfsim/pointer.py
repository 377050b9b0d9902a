"""Von Neumann meter coupled to one path mode at one slice boundary.

The photon-at-mode component of the state rotates a qubit meter by ``g``
(``|0> -> cos g |0> + sin g |1>``) or translates a discretized Gaussian
wavepacket by ``g``. The joint (basis x meter) state is carried as a 2-D
array whose rows are the photon's extended basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import IllConditionedPostselection, ParameterRangeError, StructuralError
from .optics import (
    TOL,
    Network,
    _apply_slice,
    detector_sink,
    embed,
    require_valid,
)
from .measurement import CONDITION_FLOOR


@dataclass(frozen=True)
class PointerModel:
    kind: str = "qubit"
    g: float = 0.0
    sigma: float = 1.0
    npoints: int = 256
    half_width: float = 12.0

    def check(self):
        if not (math.isfinite(self.g) and self.g >= 0):
            raise ParameterRangeError(f"coupling g={self.g!r} must be finite and >= 0")
        if self.kind == "gauss":
            if self.npoints < 32:
                raise ParameterRangeError("Gaussian meter needs npoints >= 32")
            if not (self.sigma > 0 and self.half_width >= 8 * self.sigma):
                raise ParameterRangeError("Gaussian grid half-width must be >= 8 sigma")
        elif self.kind != "qubit":
            raise ParameterRangeError(f"unknown meter kind {self.kind!r}")

    def with_g(self, g: float) -> PointerModel:
        return replace(self, g=float(g))

    @property
    def dim(self) -> int:
        return 2 if self.kind == "qubit" else self.npoints

    def grid(self) -> np.ndarray:
        n = self.npoints
        return -self.half_width + 2 * self.half_width * np.arange(n) / n

    def initial(self) -> np.ndarray:
        if self.kind == "qubit":
            return np.array([1.0, 0.0], dtype=complex)
        x = self.grid()
        psi = np.exp(-(x**2) / (4 * self.sigma**2)).astype(complex)
        return psi / np.linalg.norm(psi)

    def couple(self, rows: np.ndarray) -> np.ndarray:
        """Meter unitary applied along the last axis."""
        if self.kind == "qubit":
            c, s = math.cos(self.g), math.sin(self.g)
            out = np.empty_like(rows)
            out[..., 0] = c * rows[..., 0] - s * rows[..., 1]
            out[..., 1] = s * rows[..., 0] + c * rows[..., 1]
            return out
        # translation x -> x + g as a phase ramp in momentum space (exactly unitary)
        dx = 2 * self.half_width / self.npoints
        k = 2 * np.pi * np.fft.fftfreq(self.npoints, d=dx)
        return np.fft.ifft(np.fft.fft(rows, axis=-1) * np.exp(-1j * k * self.g), axis=-1)


@dataclass(frozen=True, eq=False)
class PointerState:
    model: PointerModel
    vector: np.ndarray

    def norm2(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)


def mean_shift(ps: PointerState) -> float:
    """Meter reading in the units of ``g``.

    Qubit: the rotation angle implied by the Bloch vector,
    ``atan2(<sigma_x>, <sigma_z>) / 2``; a fully flipped meter reads pi/2.
    Gaussian: position mean.
    """
    n2 = ps.norm2()
    if n2 <= 0.0:
        raise ParameterRangeError("pointer state has zero norm")
    v = ps.vector
    if ps.model.kind == "qubit":
        sx = 2 * (np.conj(v[0]) * v[1]).real
        sz = abs(v[0]) ** 2 - abs(v[1]) ** 2
        return 0.5 * math.atan2(sx, sz)
    x = ps.model.grid()
    return float(np.sum(x * np.abs(v) ** 2) / n2)


@dataclass(frozen=True, eq=False)
class PointerSystem:
    net: Network
    mode: str
    at: str
    model: PointerModel
    convention: str = "symmetric"

    @property
    def coupling_boundary(self) -> int:
        return self.net.boundary(self.at)

    def initial(self) -> np.ndarray:
        v = embed(self.net, self.net.unit_state())
        return np.outer(v, self.model.initial())

    def run_from(self, psi: np.ndarray, k: int) -> list[np.ndarray]:
        """States at boundaries k..end; ``psi`` is taken as already at boundary k."""
        out = [psi.copy()]
        b = self.coupling_boundary
        i = self.net.index[self.mode]
        cur = psi.copy()
        for pos in range(k, len(self.net.slices)):
            _apply_slice(cur, self.net, self.net.slices[pos], self.convention)
            if pos + 1 == b:
                cur[i] = self.model.couple(cur[i])
            out.append(cur.copy())
        return out

    def run(self) -> list[np.ndarray]:
        psi = self.initial()
        if self.coupling_boundary == 0:
            psi[self.net.index[self.mode]] = self.model.couple(psi[self.net.index[self.mode]])
        return self.run_from(psi, 0)

    def extended_matrix(self) -> np.ndarray:
        """Full evolution on (basis x meter); only sensible for small meters."""
        n, d = len(self.net.basis), self.model.dim
        cols = []
        for j in range(n * d):
            e = np.zeros(n * d, dtype=complex)
            e[j] = 1.0
            psi = e.reshape(n, d)
            if self.coupling_boundary == 0:
                psi[self.net.index[self.mode]] = self.model.couple(psi[self.net.index[self.mode]])
            cols.append(self.run_from(psi, 0)[-1].reshape(-1))
        return np.array(cols).T


def attach_pointer(
    net: Network, m: str, at: str, p: PointerModel, convention: str = "symmetric"
) -> PointerSystem:
    require_valid(net, convention)
    p.check()
    net.mode_index(m)
    net.boundary(at)
    return PointerSystem(net, m, at, p, convention)


def detector_pointer(system: PointerSystem, final: np.ndarray, post: str) -> np.ndarray:
    if post not in system.net.detectors:
        raise StructuralError(f"unknown detector {post!r}")
    return final[system.net.index[detector_sink(post)]]


def postselect_pointer(
    system: PointerSystem, post: str, states: list[np.ndarray] | None = None
) -> tuple[PointerState, float]:
    states = system.run() if states is None else states
    vec = detector_pointer(system, states[-1], post)
    prob = float(np.vdot(vec, vec).real)
    if prob <= CONDITION_FLOOR:
        raise IllConditionedPostselection(math.sqrt(prob), math.sqrt(CONDITION_FLOOR))
    return PointerState(system.model, vec.copy()), prob


def marginals(system: PointerSystem, states: list[np.ndarray] | None = None) -> dict[str, float]:
    """Detector probabilities summed over meter readings, plus ``absorbed``."""
    states = system.run() if states is None else states
    final = states[-1]
    net = system.net
    out = {
        d: float(np.vdot(final[net.index[detector_sink(d)]], final[net.index[detector_sink(d)]]).real)
        for d in net.detectors
    }
    out["absorbed"] = float(sum(
        np.vdot(final[net.index[k]], final[net.index[k]]).real for k in net.sinks if k[0] == "abs"
    ))
    return out


@dataclass(frozen=True, eq=False)
class DisturbanceRow:
    g: float
    amp_probe: np.ndarray  # meter vector on the probe mode
    p_probe: float
    probe_along_initial: complex  # meter left unmoved
    p_probe_moved: float  # weight orthogonal to the unmoved meter
    d1: np.ndarray
    d1_direct: np.ndarray  # split-mode-only contribution (path A)
    d1_excursion: np.ndarray  # complement contribution (path D-C-E)
    p_d1: float
    d1_along_initial: complex
    direct_along_initial: complex
    excursion_along_initial: complex
    mean_shift: float | None
    readout: float | None  # mean_shift / g

    @property
    def decomposition_error(self) -> float:
        return float(np.max(np.abs(self.d1_direct + self.d1_excursion - self.d1)))

    def record(self) -> dict:
        return {
            "g": self.g,
            "reD1": self.d1_along_initial.real,
            "imD1": self.d1_along_initial.imag,
            "pD1": self.p_d1,
            "pE": self.p_probe,
            "mean_shift": self.mean_shift,
            "re_wc_readout": self.readout,
        }

    def to_json_obj(self) -> dict:
        along = lambda z: [z.real, z.imag]  # noqa: E731
        out = self.record()
        out.update({
            "pE_moved": self.p_probe_moved,
            "E_along_initial": along(self.probe_along_initial),
            "D1_direct_along_initial": along(self.direct_along_initial),
            "D1_excursion_along_initial": along(self.excursion_along_initial),
            "decomposition_error": self.decomposition_error,
        })
        return out


def disturbance_profile(
    net: Network,
    m: str,
    at: str,
    gs: Sequence[float],
    model: PointerModel | None = None,
    post: str = "D1",
    probe: tuple[str, str] = ("E", "s_AE"),
    split: tuple[str, str] = ("A", "s_AD"),
    convention: str = "symmetric",
) -> list[DisturbanceRow]:
    """Sweep the coupling and record what reaches the probe mode and ``post``.

    The ``post`` amplitude is decomposed at ``split``: the run keeping only
    the split mode (the direct path) plus the run with that mode zeroed (the
    excursion through the inner interferometer) sum to the full amplitude.
    """
    model = PointerModel() if model is None else model
    probe_mode, probe_at = probe
    split_mode, split_at = split
    kp = net.boundary(probe_at)
    ks = net.boundary(split_at)
    ip = net.mode_index(probe_mode)
    isplit = net.mode_index(split_mode)
    rows = []
    for g in gs:
        system = attach_pointer(net, m, at, model.with_g(g), convention)
        if ks >= system.coupling_boundary:
            raise StructuralError("split boundary must precede the coupling")
        chi0 = model.initial()
        states = system.run()
        amp_probe = states[kp][ip].copy()
        along = complex(np.vdot(chi0, amp_probe))
        p_probe = float(np.vdot(amp_probe, amp_probe).real)
        d1 = detector_pointer(system, states[-1], post).copy()

        direct = np.zeros_like(states[ks])
        direct[isplit] = states[ks][isplit]
        excursion = states[ks].copy()
        excursion[isplit] = 0
        d1_direct = detector_pointer(system, system.run_from(direct, ks)[-1], post).copy()
        d1_exc = detector_pointer(system, system.run_from(excursion, ks)[-1], post).copy()

        p_d1 = float(np.vdot(d1, d1).real)
        shift = readout = None
        if p_d1 > CONDITION_FLOOR:
            shift = mean_shift(PointerState(model, d1))
            readout = shift / g if g > 0 else None
        rows.append(DisturbanceRow(
            g=float(g),
            amp_probe=amp_probe,
            p_probe=p_probe,
            probe_along_initial=along,
            p_probe_moved=max(p_probe - abs(along) ** 2, 0.0),
            d1=d1,
            d1_direct=d1_direct,
            d1_excursion=d1_exc,
            p_d1=p_d1,
            d1_along_initial=complex(np.vdot(chi0, d1)),
            direct_along_initial=complex(np.vdot(chi0, d1_direct)),
            excursion_along_initial=complex(np.vdot(chi0, d1_exc)),
            mean_shift=shift,
            readout=readout,
        ))
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


def is_isometry(system: PointerSystem, tol: float = TOL) -> bool:
    u = system.extended_matrix()
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))) <= tol)
