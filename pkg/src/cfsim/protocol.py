"""Canonical networks and the consolidated counterfactuality report.

Fig-1 geometry (outer splitters reflectivity ``r_m``, inner splitters 50/50)::

    s_AD   bs r_m (A, D)        outer split: A keeps sqrt(r_m), D gets i sqrt(1-r_m)
    s_DC   bs 0   (D, C)        D enters the channel arm C
    s_N1   bs 0.5 (C, B)        inner split
    s_mid  [absorb|monitor C]   the channel passage (blockade / probe slot)
    s_N2   bs 0.5 (C, B)        inner recombination: C-input exits entirely on B
    s_AE   bs 0 (C, E); detect B as D3
    s_M2   bs r_m (A, E)        outer recombination
    s_det  detect A as D1; detect E as D2

Chained layout, outer cycle ``i`` with ``n`` inner cycles ``j``::

    c{i}.s_AD         bs cos^2(theta_outer) (A, S)
    c{i}.n{j}.s_bs    bs cos^2(theta_inner) (S, C)
    c{i}.n{j}.s_mid   [absorb|monitor C]
    c{i}.s_out        bs 0 (C, c{i}.P)
    c{i}.s_AE         detect c{i}.P as D3.c{i}
    s_det             detect A as D1; detect S as D2
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import measurement, tsvf
from .errors import (
    CapExceededError,
    IllConditionedPostselection,
    ParameterRangeError,
    StructuralError,
)
from .optics import (
    Absorber,
    BeamSplitter,
    Detector,
    Monitor,
    Network,
    Slice,
    detector_distribution,
    evolve,
    require_valid,
)

SCHEMA_VERSION = "cfsim.report/1"

FIG1_LABELS = ("s_AD", "s_DC", "s_N1", "s_mid", "s_N2", "s_AE", "s_M2", "s_det")


@dataclass(frozen=True)
class Fig1Config:
    r_m: float = 0.9
    blockade: bool = False
    monitor_channel: bool = False
    allow_degenerate: bool = False

    def check(self):
        lo_ok = 0.0 <= self.r_m <= 1.0 if self.allow_degenerate else 0.0 < self.r_m < 1.0
        if not (isinstance(self.r_m, (int, float)) and lo_ok):
            raise ParameterRangeError(f"r_m={self.r_m!r} outside the allowed interval")
        if self.blockade and self.monitor_channel:
            raise ParameterRangeError("blockade and monitor_channel both occupy C at s_mid")


@dataclass(frozen=True)
class ChainedConfig:
    m: int = 10
    n: int = 4
    theta_outer: float | None = None
    theta_inner: float | None = None
    blockade: bool = False
    monitoring: bool = False
    cap: int = 100_000

    @property
    def outer_angle(self) -> float:
        return math.pi / (2 * self.m) if self.theta_outer is None else self.theta_outer

    @property
    def inner_angle(self) -> float:
        return math.pi / (2 * self.n) if self.theta_inner is None else self.theta_inner

    def check(self):
        if not (isinstance(self.m, int) and isinstance(self.n, int) and self.m >= 1 and self.n >= 1):
            raise ParameterRangeError(f"cycle counts must be >= 1, got m={self.m!r}, n={self.n!r}")
        for name, th in (("theta_outer", self.outer_angle), ("theta_inner", self.inner_angle)):
            if not (0.0 < th <= math.pi / 2):
                raise ParameterRangeError(f"{name}={th!r} outside (0, pi/2]")
        if self.blockade and self.monitoring:
            raise ParameterRangeError("blockade and monitoring both occupy the channel slot")
        if self.m * self.n > self.cap:
            raise CapExceededError(f"m*n={self.m * self.n} exceeds cap {self.cap}")


def _reflectivity(theta: float) -> float:
    # cos^2 rounds to ~1e-33 at pi/2; the transparent limit should be exact
    r = math.cos(theta) ** 2
    return 0.0 if r < 1e-30 else r


def _channel_slot(label: str, cfg_blockade: bool, cfg_monitor: bool, mode: str = "C") -> Slice:
    if cfg_blockade:
        return Slice(label, (Absorber(mode),))
    if cfg_monitor:
        return Slice(label, (Monitor(mode),))
    return Slice(label, ())


def build_fig1(cfg: Fig1Config = Fig1Config()) -> Network:
    cfg.check()
    r = float(cfg.r_m)
    slices = [
        Slice("s_AD", (BeamSplitter(r, "A", "D"),)),
        Slice("s_DC", (BeamSplitter(0.0, "D", "C"),)),
        Slice("s_N1", (BeamSplitter(0.5, "C", "B"),)),
        _channel_slot("s_mid", cfg.blockade, cfg.monitor_channel),
        Slice("s_N2", (BeamSplitter(0.5, "C", "B"),)),
        Slice("s_AE", (BeamSplitter(0.0, "C", "E"), Detector("B", "D3"))),
        Slice("s_M2", (BeamSplitter(r, "A", "E"),)),
        Slice("s_det", (Detector("A", "D1"), Detector("E", "D2"))),
    ]
    net = Network(("A", "B", "C", "D", "E"), "A", tuple(slices), channel="C", name="fig1")
    require_valid(net)
    return net


def build_chained(cfg: ChainedConfig = ChainedConfig()) -> Network:
    cfg.check()
    r_out = _reflectivity(cfg.outer_angle)
    r_in = _reflectivity(cfg.inner_angle)
    modes = ["A", "S", "C"] + [f"c{i}.P" for i in range(1, cfg.m + 1)]
    slices: list[Slice] = []
    for i in range(1, cfg.m + 1):
        slices.append(Slice(f"c{i}.s_AD", (BeamSplitter(r_out, "A", "S"),)))
        for j in range(1, cfg.n + 1):
            slices.append(Slice(f"c{i}.n{j}.s_bs", (BeamSplitter(r_in, "S", "C"),)))
            slices.append(_channel_slot(f"c{i}.n{j}.s_mid", cfg.blockade, cfg.monitoring))
        slices.append(Slice(f"c{i}.s_out", (BeamSplitter(0.0, "C", f"c{i}.P"),)))
        slices.append(Slice(f"c{i}.s_AE", (Detector(f"c{i}.P", f"D3.c{i}"),)))
    slices.append(Slice("s_det", (Detector("A", "D1"), Detector("S", "D2"))))
    net = Network(tuple(modes), "A", tuple(slices), channel="C", name=f"chained_m{cfg.m}_n{cfg.n}")
    require_valid(net)
    return net


def build(cfg) -> Network:
    if isinstance(cfg, Fig1Config):
        return build_fig1(cfg)
    if isinstance(cfg, ChainedConfig):
        return build_chained(cfg)
    raise TypeError(f"not a protocol config: {cfg!r}")


def channel_occupancy(net: Network, mode: str | None = None) -> float:
    """Largest |amplitude| on the channel mode over all slice boundaries."""
    mode = net.channel if mode is None else mode
    if mode is None:
        raise StructuralError("network has no designated channel mode")
    traj = evolve(net)
    i = net.mode_index(mode)
    return float(max(abs(v[i]) for v in traj.vectors))


def channel_schedule(net: Network) -> measurement.MonitoringSchedule:
    """Probe points on the channel after every channel-passage slot."""
    if net.channel is None:
        raise StructuralError("network has no designated channel mode")
    pts = [
        measurement.MonitorPoint(s.label, net.channel)
        for s in net.slices
        if s.label == "s_mid" or s.label.endswith(".s_mid")
    ]
    return measurement.MonitoringSchedule(tuple(pts))


def weak_value_labels(net: Network, cfg) -> dict[str, tuple[str, str]]:
    """Path name -> (mode, slice) used for the report's weak-value pattern."""
    if isinstance(cfg, Fig1Config):
        return {
            "A": ("A", "s_mid"),
            "B": ("B", "s_mid"),
            "C": ("C", "s_mid"),
            "D": ("D", "s_AD"),
            "E": ("E", "s_AE"),
        }
    return {
        "A": ("A", "c1.n1.s_mid"),
        "B": ("S", "c1.n1.s_mid"),
        "C": ("C", "c1.n1.s_mid"),
        "D": ("S", "c1.s_AD"),
        "E": ("S", "c1.s_AE"),
    }


@dataclass(frozen=True)
class CounterfactualityReport:
    config: dict
    kind: str
    probabilities: dict[str, float]
    absorbed: float
    max_channel_amplitude: float
    weak_values: dict[str, complex] | None
    weak_value_error: str | None
    p_d1_monitored: float
    p_found_and_d1: float
    p_found_given_d1: float | None
    p_found_single_and_d1: float
    p_found_single_given_d1: float | None
    p_found_any: float
    blocking_equivalent: bool
    zeno_survival: float
    schema: str = SCHEMA_VERSION

    def total_probability(self) -> float:
        return sum(self.probabilities.values()) + self.absorbed

    def to_json_obj(self) -> dict:
        wv = None
        if self.weak_values is not None:
            wv = {k: {"re": v.real, "im": v.imag} for k, v in self.weak_values.items()}
        return {
            "schema": self.schema,
            "kind": self.kind,
            "config": self.config,
            "probabilities": dict(self.probabilities),
            "absorbed": self.absorbed,
            "max_channel_amplitude": self.max_channel_amplitude,
            "weak_values": wv,
            "weak_value_error": self.weak_value_error,
            "monitored": {
                "p_d1": self.p_d1_monitored,
                "p_found_any": self.p_found_any,
                "p_found_and_d1": self.p_found_and_d1,
                "p_found_given_d1": self.p_found_given_d1,
                "single_probe_p_found_and_d1": self.p_found_single_and_d1,
                "single_probe_p_found_given_d1": self.p_found_single_given_d1,
            },
            "blocking_equivalent": self.blocking_equivalent,
            "zeno_survival": self.zeno_survival,
        }

    def to_csv_row(self) -> dict:
        row = {"schema": self.schema, "kind": self.kind}
        for k, v in self.config.items():
            row[f"cfg_{k}"] = v
        for k, v in self.probabilities.items():
            row[f"p_{k}"] = v
        row["absorbed"] = self.absorbed
        row["max_channel_amplitude"] = self.max_channel_amplitude
        for name in "ABCDE":
            w = None if self.weak_values is None else self.weak_values[name]
            row[f"re_W{name}"] = None if w is None else w.real
            row[f"im_W{name}"] = None if w is None else w.imag
        row["p_d1_monitored"] = self.p_d1_monitored
        row["p_found_any"] = self.p_found_any
        row["p_found_and_d1"] = self.p_found_and_d1
        row["p_found_given_d1"] = self.p_found_given_d1
        row["single_probe_p_found_and_d1"] = self.p_found_single_and_d1
        row["single_probe_p_found_given_d1"] = self.p_found_single_given_d1
        row["blocking_equivalent"] = self.blocking_equivalent
        row["zeno_survival"] = self.zeno_survival
        return row


def _ratio(num: float, den: float) -> float | None:
    return None if den <= measurement.CONDITION_FLOOR else num / den


def counterfactuality_report(cfg) -> CounterfactualityReport:
    if isinstance(cfg, Fig1Config) and cfg.monitor_channel:
        # the report places its own probes; a Monitor element would be redundant
        cfg = Fig1Config(cfg.r_m, cfg.blockade, False, cfg.allow_degenerate)
    if isinstance(cfg, ChainedConfig) and cfg.monitoring:
        cfg = ChainedConfig(cfg.m, cfg.n, cfg.theta_outer, cfg.theta_inner, cfg.blockade, False, cfg.cap)
    net = build(cfg)
    dist = detector_distribution(net)

    weak = None
    weak_err = None
    try:
        weak = {}
        for name, (mode, label) in weak_value_labels(net, cfg).items():
            q = tsvf.WeakValueQuery(frozenset({mode}), label, "D1")
            weak[name] = tsvf.weak_value(net, q).value
    except IllConditionedPostselection as exc:
        weak, weak_err = None, str(exc)

    sched = channel_schedule(net)
    d1 = measurement.terminal_is("D1")
    mon = measurement.monitored_marginals(net, sched)
    p_d1_mon = mon.total.probabilities["D1"]
    p_found_d1 = mon.found_any.probabilities["D1"]
    p_found_any = mon.found_any.total()

    single = measurement.MonitoringSchedule(sched.points[:1])
    tree = measurement.run_monitored(net, single)
    found = measurement.found_any
    p_single_d1 = tree.probability(lambda lf: found(lf) and d1(lf))
    p_single_given = _ratio(p_single_d1, tree.probability(d1))

    eq = measurement.blocking_equivalence(net, sched)

    probs = dist.probabilities
    d3 = sum(p for k, p in probs.items() if k.startswith("D3"))
    return CounterfactualityReport(
        config={k: v for k, v in asdict(cfg).items() if k != "cap"},
        kind="fig1" if isinstance(cfg, Fig1Config) else "chained",
        probabilities=dict(probs),
        absorbed=dist.absorbed,
        max_channel_amplitude=channel_occupancy(net),
        weak_values=weak,
        weak_value_error=weak_err,
        p_d1_monitored=p_d1_mon,
        p_found_and_d1=p_found_d1,
        p_found_given_d1=_ratio(p_found_d1, p_d1_mon),
        p_found_single_and_d1=p_single_d1,
        p_found_single_given_d1=p_single_given,
        p_found_any=p_found_any,
        blocking_equivalent=eq.equivalent,
        zeno_survival=float(np.clip(1.0 - dist.absorbed - d3, 0.0, 1.0)),
    )


def parse_builder_spec(text: str):
    """``fig1:r_m=0.9`` or ``chained:m=10,n=4`` -> config object."""
    kind, _, rest = text.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            key, eq, val = part.partition("=")
            if not eq or not key:
                raise ValueError(f"malformed builder parameter {part!r}")
            params[key.strip()] = val.strip()
    try:
        if kind == "fig1":
            unknown = set(params) - {"r_m"}
            if unknown:
                raise ValueError(f"unknown fig1 parameter(s) {sorted(unknown)}")
            return Fig1Config(r_m=float(params.get("r_m", 0.9)))
        if kind == "chained":
            unknown = set(params) - {"m", "n", "theta_outer", "theta_inner"}
            if unknown:
                raise ValueError(f"unknown chained parameter(s) {sorted(unknown)}")
            to = params.get("theta_outer")
            ti = params.get("theta_inner")
            return ChainedConfig(
                m=int(params.get("m", 10)),
                n=int(params.get("n", 4)),
                theta_outer=None if to is None else float(to),
                theta_inner=None if ti is None else float(ti),
            )
    except ValueError as exc:
        raise ValueError(f"bad builder input {text!r}: {exc}") from None
    raise ValueError(f"unknown builder {kind!r}")
