"""Line-oriented ``.net`` network description: parser and canonical writer.

::

    network NAME
    mode NAME [source|channel]
    slice LABEL
    bs r=FLOAT NAME NAME
    phase phi=FLOAT NAME
    absorb NAME
    monitor NAME
    detect NAME as NAME
    end

``#`` starts a comment. Declarations precede slices; exactly one source mode
and at most one channel mode.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .optics import (
    Absorber,
    BeamSplitter,
    Detector,
    Monitor,
    Network,
    PhaseShift,
    Slice,
    validate,
)

KINDS = ("syntax", "unknown-mode", "range", "disjointness", "terminality")

_FLOAT = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    kind: str
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.kind}: {self.message}"


class NetParseError(Exception):
    def __init__(self, errors: list[ParseError]):
        self.errors = sorted(errors, key=lambda e: (e.line, e.column))
        super().__init__("\n".join(str(e) for e in self.errors))

    @property
    def kinds(self) -> set[str]:
        return {e.kind for e in self.errors}


@dataclass(frozen=True)
class _Tok:
    text: str
    col: int


def _tokens(line: str) -> list[_Tok]:
    line = line.split("#", 1)[0]
    return [_Tok(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]


def _float(tok: _Tok, prefix: str, lineno: int, errors: list) -> float | None:
    if not tok.text.startswith(prefix):
        errors.append(ParseError(lineno, tok.col, "syntax", f"expected {prefix}FLOAT, got {tok.text!r}"))
        return None
    body = tok.text[len(prefix):]
    if not _FLOAT.match(body):
        errors.append(ParseError(lineno, tok.col, "syntax", f"malformed number {body!r}"))
        return None
    return float(body)


def parse(text: str) -> Network:
    errors: list[ParseError] = []
    if "\r" in text:
        ln = text[: text.index("\r")].count("\n") + 1
        errors.append(ParseError(ln, 1, "syntax", "carriage return; lines must end with LF"))
    try:
        text.encode("ascii")
    except UnicodeEncodeError as exc:
        ln = text[: exc.start].count("\n") + 1
        errors.append(ParseError(ln, 1, "syntax", "non-ASCII character"))
    if errors:
        raise NetParseError(errors)

    name = None
    modes: list[str] = []
    mode_pos: dict[str, tuple[int, int]] = {}
    source = channel = None
    slices: list[Slice] = []
    # (slice index, element index) -> (line, column of each mode token, column of range token)
    where: dict[tuple[int, int], tuple[int, dict[str, int], int]] = {}
    slice_pos: dict[int, tuple[int, int]] = {}
    current: list | None = None
    current_label = None
    phase = "header"

    for lineno, raw in enumerate(text.split("\n"), start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        head = toks[0].text
        nargs = len(toks) - 1

        def bad(msg, tok=toks[0], kind="syntax"):
            errors.append(ParseError(lineno, tok.col, kind, msg))

        if phase == "header":
            if head != "network" or nargs != 1:
                bad("file must start with 'network NAME'")
                phase = "decl"
                continue
            name = toks[1].text
            phase = "decl"
            continue

        if current is not None:
            if head == "end":
                if nargs:
                    bad("'end' takes no arguments", toks[1])
                slices.append(Slice(current_label, tuple(e for e, _ in current)))
                k = len(slices) - 1
                for j, (_, info) in enumerate(current):
                    where[(k, j)] = info
                current = None
                continue
            elem = _element(toks, lineno, errors)
            if elem is not None:
                e, info = elem
                current.append((e, info))
            continue

        if head == "mode":
            if phase != "decl":
                bad("mode declarations must precede slices")
            if nargs not in (1, 2):
                bad("expected 'mode NAME [source|channel]'")
                continue
            m = toks[1].text
            if m in mode_pos:
                bad(f"mode {m!r} declared twice", toks[1])
                continue
            modes.append(m)
            mode_pos[m] = (lineno, toks[1].col)
            if nargs == 2:
                flag = toks[2].text
                if flag == "source":
                    if source is not None:
                        bad("more than one source mode", toks[2])
                    source = m
                elif flag == "channel":
                    if channel is not None:
                        bad("more than one channel mode", toks[2])
                    channel = m
                else:
                    bad(f"unknown mode flag {flag!r}", toks[2])
        elif head == "slice":
            phase = "slices"
            if nargs != 1:
                bad("expected 'slice LABEL'")
                current_label = f"?{lineno}"
            else:
                current_label = toks[1].text
            slice_pos[len(slices)] = (lineno, toks[0].col)
            current = []
        elif head == "end":
            bad("'end' outside a slice")
        else:
            bad(f"unexpected {head!r}")

    last_line = text.count("\n") + 1
    if name is None and not any(e.line == 1 for e in errors):
        errors.append(ParseError(1, 1, "syntax", "missing 'network NAME' header"))
    if current is not None:
        errors.append(ParseError(last_line, 1, "syntax", f"slice {current_label!r} not closed by 'end'"))
    if not slices and current is None:
        errors.append(ParseError(last_line, 1, "syntax", "at least one slice is required"))
    if source is None:
        errors.append(ParseError(1, 1, "syntax", "exactly one 'source' mode is required"))
    if text and not text.endswith("\n"):
        errors.append(ParseError(last_line, 1, "syntax", "file must end with a line feed"))

    net = Network(tuple(modes), source or "", tuple(slices), channel=channel, name=name or "")
    for v in validate(net).violations:
        kind = v.kind if v.kind in KINDS else "syntax"
        if v.kind == "source" and source is None:
            continue
        line, col = 1, 1
        if v.slice is not None and v.element is not None and (v.slice, v.element) in where:
            line, mode_cols, range_col = where[(v.slice, v.element)]
            col = range_col if kind == "range" else min(mode_cols.values(), default=1)
            if kind in ("unknown-mode", "disjointness", "terminality"):
                for m, c in mode_cols.items():
                    if repr(m) in v.message:
                        col = c
                        break
        elif v.slice is not None and v.slice in slice_pos:
            line, col = slice_pos[v.slice]
        errors.append(ParseError(line, col, kind, v.message))

    if errors:
        first: dict[str, ParseError] = {}
        for e in sorted(errors, key=lambda e: (e.line, e.column)):
            first.setdefault(e.kind, e)
        raise NetParseError(list(first.values()))
    return net


def _element(toks: list[_Tok], lineno: int, errors: list):
    head = toks[0].text
    args = toks[1:]

    def bad(msg, tok=toks[0]):
        errors.append(ParseError(lineno, tok.col, "syntax", msg))
        return None

    if head == "bs":
        if len(args) != 3:
            return bad("expected 'bs r=FLOAT NAME NAME'")
        r = _float(args[0], "r=", lineno, errors)
        if r is None:
            return None
        e = BeamSplitter(r, args[1].text, args[2].text)
        cols = {args[1].text: args[1].col}
        cols.setdefault(args[2].text, args[2].col)
        return e, (lineno, cols, args[0].col)
    if head == "phase":
        if len(args) != 2:
            return bad("expected 'phase phi=FLOAT NAME'")
        phi = _float(args[0], "phi=", lineno, errors)
        if phi is None:
            return None
        return PhaseShift(args[1].text, phi), (lineno, {args[1].text: args[1].col}, args[0].col)
    if head in ("absorb", "monitor"):
        if len(args) != 1:
            return bad(f"expected '{head} NAME'")
        cls = Absorber if head == "absorb" else Monitor
        return cls(args[0].text), (lineno, {args[0].text: args[0].col}, args[0].col)
    if head == "detect":
        if len(args) != 3 or args[1].text != "as":
            return bad("expected 'detect NAME as NAME'")
        return Detector(args[0].text, args[2].text), (lineno, {args[0].text: args[0].col}, args[0].col)
    if head == "slice":
        return bad("nested 'slice' (missing 'end')")
    return bad(f"unknown element {head!r}")


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(float(x), ".17g")


def serialize(net: Network) -> str:
    if net.channel is not None and net.channel == net.source:
        raise ValueError("a mode cannot be both source and channel in the text format")
    lines = [f"network {net.name or 'network'}"]
    for m in sorted(net.modes):
        flag = " source" if m == net.source else " channel" if m == net.channel else ""
        lines.append(f"mode {m}{flag}")
    for sl in net.slices:
        lines.append(f"slice {sl.label}")
        for e in sl.elements:
            if isinstance(e, BeamSplitter):
                lines.append(f"bs r={_num(e.r)} {e.m1} {e.m2}")
            elif isinstance(e, PhaseShift):
                lines.append(f"phase phi={_num(e.phi)} {e.m}")
            elif isinstance(e, Absorber):
                lines.append(f"absorb {e.m}")
            elif isinstance(e, Monitor):
                lines.append(f"monitor {e.m}")
            elif isinstance(e, Detector):
                lines.append(f"detect {e.m} as {e.name}")
        lines.append("end")
    return "\n".join(lines) + "\n"


def equivalent(a: Network, b: Network) -> bool:
    """Same network up to the order of mode declarations."""
    return (
        sorted(a.modes) == sorted(b.modes)
        and a.source == b.source
        and a.channel == b.channel
        and a.slices == b.slices
    )


def load(path) -> Network:
    # latin-1 never fails to decode, so parse() reports non-ASCII with a location
    with open(path, "rb") as fh:
        return parse(fh.read().decode("latin-1"))
