"""Command-line entry point: ``cfsim simulate|weak|sweep|report``.

stdout carries data only; diagnostics go to stderr. Exit codes: 0 success,
1 runtime/numerical failure, 2 input/parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import measurement, netdesc, pointer, protocol, tsvf
from .errors import (
    CapExceededError,
    IllConditionedPostselection,
    NetworkValidationError,
    ParameterRangeError,
    SimulationError,
    StructuralError,
    UndefinedConditionalError,
)
from .optics import detector_distribution, natural_key

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


# -- output formatting --------------------------------------------------------


def fmt_float(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def dump_json(obj) -> str:
    """JSON with every float printed at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dump_json(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dump_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = list(rows[0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        out = []
        for k in fields:
            v = row.get(k)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                out.append("" if not math.isfinite(v) else fmt_float(v))
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def emit(obj, rows, fmt: str) -> None:
    sys.stdout.write(dump_json(obj) + "\n" if fmt == "json" else dump_csv(rows))


# -- input handling -----------------------------------------------------------


def _is_builder(text: str) -> bool:
    return text.startswith("fig1:") or text.startswith("chained:") or text in ("fig1", "chained")


def load_config(text: str, blockade: bool = False):
    try:
        cfg = protocol.parse_builder_spec(text)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        if isinstance(cfg, protocol.Fig1Config):
            cfg = protocol.Fig1Config(cfg.r_m, blockade=blockade)
        else:
            cfg = protocol.ChainedConfig(
                cfg.m, cfg.n, cfg.theta_outer, cfg.theta_inner, blockade=blockade
            )
        cfg.check()
    except (ParameterRangeError, CapExceededError) as exc:
        raise InputError(str(exc)) from None
    return cfg


def load_network(text: str, blockade: bool = False):
    if _is_builder(text):
        return protocol.build(load_config(text, blockade))
    if blockade:
        raise InputError("--blockade applies to builder inputs only")
    try:
        return netdesc.load(text)
    except OSError as exc:
        raise InputError(f"cannot read {text!r}: {exc.strerror}") from None
    except netdesc.NetParseError as exc:
        raise InputError(f"{text}:\n{exc}") from None


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


# -- commands -----------------------------------------------------------------


def cmd_simulate(args) -> None:
    net = load_network(args.input, args.blockade)
    dist = detector_distribution(net)
    obj = dist.as_dict()
    try:
        if args.monitor:
            sched = measurement.MonitoringSchedule.parse(args.monitor)
        else:
            # monitor elements written into the network count as probes
            sched = measurement.MonitoringSchedule.from_network(net)
        if sched.points:
            tree = measurement.run_monitored(net, sched)
    except (ValueError, StructuralError) as exc:
        raise InputError(str(exc)) from None
    if sched.points:
        marg = tree.marginals()
        obj = {
            "distribution": dist.as_dict(),
            "monitored": {k: marg[k] for k in sorted(marg, key=natural_key)},
            "tree": tree.to_json_obj(),
        }
        rows = [
            {"path": "/".join(lf.path), "terminal": lf.terminal, "p": lf.p}
            for lf in tree.leaves()
        ]
        emit(obj, rows, args.format)
        return
    emit(obj, [obj], args.format)


def cmd_weak(args) -> None:
    net = load_network(args.input)
    if args.post not in net.detectors:
        raise InputError(f"unknown detector {args.post!r}")
    try:
        queries = [tsvf.WeakValueQuery.parse(p, args.post) for p in args.proj]
        for q in queries:
            for m in q.projector_modes:
                net.mode_index(m)
            if q.at != "start":
                net.boundary(q.at)
        for c in args.cut:
            if c != "start":
                net.boundary(c)
    except (ValueError, StructuralError) as exc:
        raise InputError(str(exc)) from None

    results = tsvf.weak_values(net, queries)
    cuts = []
    for label in args.cut:
        vals = tsvf.weak_value_cut(net, label, args.post)
        total = sum(vals.values())
        cuts.append({
            "slice": label,
            "post": args.post,
            "values": {k: {"re": v.real, "im": v.imag} for k, v in vals.items()},
            "sum": {"re": total.real, "im": total.imag},
        })
    obj = {"post": args.post, "queries": [r.to_json_obj() for r in results], "cuts": cuts}
    rows = [
        {"kind": "proj", "projector": "+".join(sorted(r.query.projector_modes)),
         "slice": r.query.at, "post": r.query.post, "re": r.value.real, "im": r.value.imag}
        for r in results
    ]
    for c in cuts:
        for k, v in c["values"].items():
            rows.append({"kind": "cut", "projector": k, "slice": c["slice"], "post": args.post,
                         "re": v["re"], "im": v["im"]})
        rows.append({"kind": "cut-sum", "projector": "*", "slice": c["slice"], "post": args.post,
                     "re": c["sum"]["re"], "im": c["sum"]["im"]})
    emit(obj, rows, args.format)


def parse_g_range(parts: list[str]) -> np.ndarray:
    """``LO..HI [log|lin] N``."""
    if len(parts) not in (2, 3):
        raise RuntimeFailure("--g-range expects LO..HI [log|lin] N")
    lo_s, sep, hi_s = parts[0].partition("..")
    scale = parts[1] if len(parts) == 3 else "log"
    n_s = parts[-1]
    try:
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError:
        raise RuntimeFailure(f"malformed --g-range {' '.join(parts)!r}") from None
    if not sep or scale not in ("log", "lin"):
        raise RuntimeFailure(f"malformed --g-range {' '.join(parts)!r}")
    if n < 2 or not (math.isfinite(lo) and math.isfinite(hi)) or not (0 <= lo < hi):
        raise RuntimeFailure(f"degenerate g range {lo}..{hi} with {n} points")
    if scale == "log":
        if lo <= 0:
            raise RuntimeFailure("log-spaced g range needs LO > 0")
        return np.logspace(math.log10(lo), math.log10(hi), n)
    return np.linspace(lo, hi, n)


def _point(text: str, flag: str) -> tuple[str, str]:
    mode, sep, label = text.partition("@")
    if not sep or not mode or not label:
        raise InputError(f"{flag} expects MODE@SLICE, got {text!r}")
    return mode, label


def cmd_sweep(args) -> None:
    net = load_network(args.input)
    mode, at = _point(args.couple, "--couple")
    probe = _point(args.probe, "--probe")
    split = _point(args.split, "--split")
    if args.g is not None and args.g_range is not None:
        raise InputError("give either --g or --g-range, not both")
    if args.g is not None:
        gs = np.array(args.g, dtype=float)
        if np.any(gs < 0) or not np.all(np.isfinite(gs)):
            raise RuntimeFailure("coupling values must be finite and >= 0")
    elif args.g_range is not None:
        gs = parse_g_range(args.g_range)
    else:
        raise InputError("one of --g or --g-range is required")
    if args.post not in net.detectors:
        raise InputError(f"unknown detector {args.post!r}")
    model = pointer.PointerModel("gauss" if args.meter == "gauss" else "qubit")
    try:
        rows = pointer.disturbance_profile(
            net, mode, at, gs, model, post=args.post, probe=probe, split=split
        )
    except StructuralError as exc:
        raise InputError(str(exc)) from None
    obj = {
        "couple": args.couple,
        "meter": model.kind,
        "post": args.post,
        "probe": args.probe,
        "split": args.split,
        "rows": [r.to_json_obj() for r in rows],
    }
    emit(obj, [r.record() for r in rows], args.format)


def cmd_report(args) -> None:
    if not _is_builder(args.input):
        raise InputError("report needs a builder input (fig1:... or chained:...)")
    cfg = load_config(args.input, args.blockade)
    rep = protocol.counterfactuality_report(cfg)
    emit(rep.to_json_obj(), [rep.to_csv_row()], args.format)


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfsim", description="Single-photon nested interferometer simulator.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, blockade=True):
        sp.add_argument("input", help="path to a .net file, or fig1:r_m=F / chained:m=I,n=I")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if blockade:
            sp.add_argument("--blockade", type=_on_off, default=False, metavar="on|off")

    s = sub.add_parser("simulate", help="detector distribution (and outcome tree when monitored)")
    common(s)
    s.add_argument("--monitor", action="append", default=[], metavar="MODE@SLICE")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("weak", help="weak values of path projectors")
    common(w, blockade=False)
    w.add_argument("--post", default="D1")
    w.add_argument("--proj", action="append", default=[], metavar="MODE[+MODE]@SLICE")
    w.add_argument("--cut", action="append", default=[], metavar="SLICE")
    w.set_defaults(func=cmd_weak)

    sw = sub.add_parser("sweep", help="pointer coupling sweep")
    common(sw, blockade=False)
    sw.add_argument("--couple", default="C@s_mid", metavar="MODE@SLICE")
    sw.add_argument("--meter", choices=("qubit", "gauss"), default="qubit")
    sw.add_argument("--g-range", nargs="+", metavar="LO..HI [log|lin] N")
    sw.add_argument("--g", action="append", type=float)
    sw.add_argument("--post", default="D1")
    sw.add_argument("--probe", default="E@s_AE", metavar="MODE@SLICE")
    sw.add_argument("--split", default="A@s_AD", metavar="MODE@SLICE")
    sw.set_defaults(func=cmd_sweep, format="csv")

    r = sub.add_parser("report", help="consolidated counterfactuality report")
    common(r)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InputError, NetworkValidationError) as exc:
        sys.stderr.write(f"cfsim: input error: {exc}\n")
        return EXIT_INPUT
    except (
        RuntimeFailure,
        IllConditionedPostselection,
        UndefinedConditionalError,
        CapExceededError,
        SimulationError,
    ) as exc:
        sys.stderr.write(f"cfsim: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
