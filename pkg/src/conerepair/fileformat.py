"""Line-oriented text format for parametrized repair problems.

A file looks like::

    conerepair-problem 1
    dims 2 3 1            # n m k
    cones
      zero 1
      nonneg 2
    end
    base
      A 0 0 1.0           # row col value (0-based)
      b 1.0 0.0 0.0       # dense, m values
      c 0.0 1.0           # dense, n values
    end
    param 0
      b 0.0 1.0 0.0       # each of A / b / c optional
    end
    theta0 0.5
    regularizer
      sum
        l1
          weights 1.0
          center 0.5
        end
        box
          lower 0.0
          upper inf
        end
      end
    end

Floats are written with ``repr`` so parsing the output of :func:`dumps`
reproduces every value bit for bit. ``#`` starts a comment. Every
structural problem raises :class:`ParseError` with a line and column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConeRepairError, ParseError
from .problem import ConeBlock, ConeDescriptor, ConeKind, ParamConeProgram, ParamIncrement
from .regularizers import Box, Regularizer, ScaledL1, ScaledL2Sq, Sum
from .sparse import SparseMatrix

MAGIC = "conerepair-problem"
VERSION = 1

_TOKEN = re.compile(r"\S+")


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec_line(key: str, v) -> str:
    return " ".join([key, *(_fmt(x) for x in np.asarray(v, dtype=np.float64))])


def _triplet_lines(M: SparseMatrix, indent: str) -> list[str]:
    return [f"{indent}A {i} {j} {_fmt(x)}" for i, j, x in M.triplets()]


def _reg_lines(r: Regularizer, indent: str) -> list[str]:
    inner = indent + "  "
    if isinstance(r, Sum):
        out = [f"{indent}sum"]
        for ch in r.children:
            out += _reg_lines(ch, inner)
    elif isinstance(r, (ScaledL1, ScaledL2Sq)):
        name = "l1" if isinstance(r, ScaledL1) else "l2sq"
        out = [f"{indent}{name}", inner + _vec_line("weights", r.weights), inner + _vec_line("center", r.center)]
    elif isinstance(r, Box):
        out = [f"{indent}box", inner + _vec_line("lower", r.lower), inner + _vec_line("upper", r.upper)]
    else:
        raise TypeError(f"not a regularizer: {type(r).__name__}")
    return out + [f"{indent}end"]


def dumps(pcp: ParamConeProgram, theta0, regularizer: Regularizer) -> str:
    """Serialize a problem, its starting point and its metric to text."""
    lines = [f"{MAGIC} {VERSION}", f"dims {pcp.n} {pcp.m} {pcp.k}", "cones"]
    lines += [f"  {blk.kind.value} {blk.dim}" for blk in pcp.cones.blocks]
    lines += ["end", "base"]
    lines += _triplet_lines(pcp.A0, "  ")
    lines += ["  " + _vec_line("b", pcp.b0), "  " + _vec_line("c", pcp.c0), "end"]
    for i, p in enumerate(pcp.params):
        lines.append(f"param {i}")
        if p.A is not None:
            lines += _triplet_lines(p.A, "  ")
        if p.b is not None:
            lines.append("  " + _vec_line("b", p.b))
        if p.c is not None:
            lines.append("  " + _vec_line("c", p.c))
        lines.append("end")
    lines.append(_vec_line("theta0", pcp.check_theta(theta0)))
    lines.append("regularizer")
    lines += _reg_lines(regularizer, "  ")
    lines.append("end")
    return "\n".join(lines) + "\n"


def serialize(path, pcp: ParamConeProgram, theta0, regularizer: Regularizer) -> None:
    Path(path).write_text(dumps(pcp, theta0, regularizer))


@dataclass
class _Line:
    number: int
    tokens: list[tuple[int, str]]  # (1-based column, text)

    @property
    def key(self) -> str:
        return self.tokens[0][1]


class _Reader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.lines: list[_Line] = []
        for no, raw in enumerate(text.splitlines(), start=1):
            raw = raw.split("#", 1)[0]
            toks = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(raw)]
            if toks:
                self.lines.append(_Line(no, toks))
        self.pos = 0
        self.last = self.lines[-1].number if self.lines else 1

    def error(self, msg: str, line: _Line | None = None, tok: int = 0) -> ParseError:
        if line is None:
            return ParseError(msg, self.last, 1, self.source)
        col = line.tokens[min(tok, len(line.tokens) - 1)][0]
        return ParseError(msg, line.number, col, self.source)

    def next(self, what: str) -> _Line:
        if self.pos >= len(self.lines):
            raise self.error(f"unexpected end of file, expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self) -> _Line | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def expect(self, key: str, nargs: int | None = None) -> _Line:
        line = self.next(f"'{key}'")
        if line.key != key:
            raise self.error(f"expected '{key}', found '{line.key}'", line)
        if nargs is not None and len(line.tokens) - 1 != nargs:
            raise self.error(f"'{key}' takes {nargs} argument(s), got {len(line.tokens) - 1}", line)
        return line

    def int_at(self, line: _Line, i: int, lo: int = 0, hi: int | None = None) -> int:
        text = line.tokens[i][1]
        try:
            v = int(text)
        except ValueError:
            raise self.error(f"expected an integer, found '{text}'", line, i) from None
        if v < lo or (hi is not None and v >= hi):
            bound = f"[{lo}, {hi})" if hi is not None else f">= {lo}"
            raise self.error(f"integer {v} out of range {bound}", line, i)
        return v

    def float_at(self, line: _Line, i: int) -> float:
        text = line.tokens[i][1]
        try:
            return float(text)
        except ValueError:
            raise self.error(f"expected a number, found '{text}'", line, i) from None

    def vector(self, line: _Line, size: int) -> np.ndarray:
        if len(line.tokens) - 1 != size:
            raise self.error(
                f"'{line.key}' needs {size} value(s), got {len(line.tokens) - 1}", line
            )
        return np.array([self.float_at(line, i) for i in range(1, size + 1)], dtype=np.float64)


def _read_data_block(rd: _Reader, opener: _Line, n: int, m: int, dense_required: bool):
    """Read ``A``/``b``/``c`` lines up to ``end``."""
    rows, cols, vals = [], [], []
    seen: dict[str, _Line] = {}
    b = c = None
    while True:
        line = rd.next("'end'")
        key = line.key
        if key == "end":
            if len(line.tokens) != 1:
                raise rd.error("'end' takes no arguments", line, 1)
            break
        if key == "A":
            if len(line.tokens) != 4:
                raise rd.error("'A' takes row, column and value", line)
            rows.append(rd.int_at(line, 1, 0, m))
            cols.append(rd.int_at(line, 2, 0, n))
            vals.append(rd.float_at(line, 3))
            seen["A"] = line
        elif key in ("b", "c"):
            if key in seen:
                raise rd.error(f"duplicate '{key}' line", line)
            seen[key] = line
            if key == "b":
                b = rd.vector(line, m)
            else:
                c = rd.vector(line, n)
        else:
            raise rd.error(f"unknown key '{key}' in '{opener.key}' section", line)
    if dense_required:
        for key in ("b", "c"):
            if key not in seen:
                raise rd.error(f"'{opener.key}' section is missing '{key}'", opener)
    A = SparseMatrix(m, n, rows, cols, vals) if "A" in seen or dense_required else None
    return A, b, c


_ATOMS = {"l1": ("weights", "center"), "l2sq": ("weights", "center"), "box": ("lower", "upper")}


def _read_regularizer(rd: _Reader, k: int) -> Regularizer:
    head = rd.next("a regularizer atom")
    if len(head.tokens) != 1:
        raise rd.error(f"'{head.key}' takes no arguments", head, 1)
    if head.key == "sum":
        children = []
        while True:
            nxt = rd.peek()
            if nxt is None:
                raise rd.error("unexpected end of file inside 'sum'")
            if nxt.key == "end":
                rd.pos += 1
                return Sum(tuple(children))
            children.append(_read_regularizer(rd, k))
    if head.key not in _ATOMS:
        raise rd.error(f"unknown regularizer atom '{head.key}'", head)
    fields = {}
    while True:
        line = rd.next("'end'")
        if line.key == "end":
            break
        if line.key not in _ATOMS[head.key]:
            raise rd.error(f"unknown key '{line.key}' in '{head.key}'", line)
        if line.key in fields:
            raise rd.error(f"duplicate '{line.key}' line", line)
        fields[line.key] = rd.vector(line, k)
    for name in _ATOMS[head.key]:
        if name not in fields:
            raise rd.error(f"'{head.key}' is missing '{name}'", head)
    a, b = (fields[name] for name in _ATOMS[head.key])
    try:
        if head.key == "l1":
            return ScaledL1(a, b)
        if head.key == "l2sq":
            return ScaledL2Sq(a, b)
        return Box(a, b)
    except ConeRepairError as exc:
        raise rd.error(str(exc), head) from None


def loads(text: str, source: str = "<string>"):
    """Parse text produced by :func:`dumps` (or written by hand).

    Returns
    -------
    (ParamConeProgram, numpy.ndarray, Regularizer)
    """
    rd = _Reader(text, source)
    line = rd.expect(MAGIC, 1)
    if rd.int_at(line, 1) != VERSION:
        raise rd.error(f"unsupported format version {line.tokens[1][1]}", line, 1)

    line = rd.expect("dims", 3)
    n, m, k = (rd.int_at(line, i) for i in (1, 2, 3))

    opener = rd.expect("cones", 0)
    blocks = []
    while True:
        line = rd.next("'end'")
        if line.key == "end":
            break
        if line.key not in {kind.value for kind in ConeKind}:
            raise rd.error(f"unknown cone kind '{line.key}'", line)
        if len(line.tokens) != 2:
            raise rd.error("cone line takes a kind and a dimension", line)
        dim = rd.int_at(line, 1)
        if dim < 1:
            raise rd.error(f"cone dimension must be at least 1, got {dim}", line, 1)
        blocks.append(ConeBlock(ConeKind(line.key), dim))
    cones = ConeDescriptor(tuple(blocks))
    if cones.dim != m:
        raise rd.error(f"cone dimensions sum to {cones.dim}, expected m = {m}", opener)

    opener = rd.expect("base", 0)
    A0, b0, c0 = _read_data_block(rd, opener, n, m, dense_required=True)

    params = []
    for i in range(k):
        opener = rd.expect("param", 1)
        idx = rd.int_at(opener, 1)
        if idx != i:
            raise rd.error(f"expected 'param {i}', found 'param {idx}'", opener, 1)
        params.append(ParamIncrement(*_read_data_block(rd, opener, n, m, dense_required=False)))

    line = rd.expect("theta0")
    theta0 = rd.vector(line, k)

    rd.expect("regularizer", 0)
    reg = _read_regularizer(rd, k)
    rd.expect("end", 0)
    extra = rd.peek()
    if extra is not None:
        raise rd.error(f"unexpected '{extra.key}' after end of problem", extra)

    try:
        pcp = ParamConeProgram(A0, b0, c0, cones, tuple(params))
    except ConeRepairError as exc:
        raise ParseError(str(exc), 1, 1, source) from None
    return pcp, theta0, reg


def parse_problem(path):
    """Read a problem file; see :func:`loads`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", 0, 0, str(path)) from None
    return loads(text, source=str(path))
