"""Word-level term language with explicit bitwidth/signage annotations.

Every operator carries an output annotation plus one annotation per operand.
Evaluation is exact integer arithmetic on operand values (after coercing each
child result into its operand annotation), followed by truncation to the
output width and reinterpretation under the output signage.  This makes the
term language self-contained: no context-dependent sizing remains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

UNSIGNED = "unsigned"
SIGNED = "signed"

# opcode -> arity; 'slice' additionally carries (hi, lo) literals in the node
ARITY = {
    "+": 2, "-": 2, "*": 2, "neg": 1,
    "<<": 2, ">>": 2, ">>>": 2,
    "&": 2, "|": 2, "^": 2, "~": 1,
    "mux": 3, "concat": 2, "slice": 1,
    "==": 2, "<": 2, "zext": 1, "sext": 1,
}

OPCODES = frozenset(ARITY)

# operand positions interpreted as an unsigned shift amount
SHIFT_OPS = frozenset({"<<", ">>", ">>>"})


class IrError(Exception):
    """Malformed term, annotation or environment."""


class UnboundVariableError(IrError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable: {name}")
        self.name = name


@dataclass(frozen=True, order=True)
class Annotation:
    """Bitwidth and signage of a signal."""

    width: int
    signed: bool = False

    def __post_init__(self):
        if self.width < 1:
            raise IrError(f"annotation width must be >= 1, got {self.width}")

    @property
    def lo(self) -> int:
        return -(1 << (self.width - 1)) if self.signed else 0

    @property
    def hi(self) -> int:
        return (1 << (self.width - 1)) - 1 if self.signed else (1 << self.width) - 1

    def contains(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    @property
    def signage(self) -> str:
        return SIGNED if self.signed else UNSIGNED

    def __str__(self) -> str:
        return f"{self.width} {self.signage}"


def ann(width: int, signed: bool = False) -> Annotation:
    return Annotation(width, signed)


def from_bits(bits: int, a: Annotation) -> int:
    """Reinterpret a bit pattern (0 <= bits < 2^width) under an annotation."""
    if a.signed and bits >= 1 << (a.width - 1):
        return bits - (1 << a.width)
    return bits


def to_bits(value: int, a: Annotation) -> int:
    """Two's-complement bit pattern of a representable value."""
    return value & ((1 << a.width) - 1)


def coerce(value: int, src: Annotation, dst: Annotation) -> int:
    """Resize a value: extend per the source signage, reinterpret per the
    destination signage, truncating to the low destination bits if narrower.

    Total: any representable input yields a representable output.  Masking a
    Python int is simultaneously sign-extension (negative values) and
    zero-extension (non-negative values), so one mask covers both directions.
    """
    return from_bits(value & ((1 << dst.width) - 1), dst)


@dataclass(frozen=True)
class Term:
    """An expression tree node.

    kind is 'var', 'const' or an opcode.  operands pair each child with the
    annotation the child's value is coerced into before the opcode's exact
    arithmetic is applied.  'slice' keeps its (hi, lo) indices structurally in
    `indices` rather than as operand terms.
    """

    kind: str
    out: Annotation
    name: str | None = None
    value: int | None = None
    operands: tuple[tuple[Annotation, "Term"], ...] = ()
    indices: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind == "var":
            if not self.name or self.operands:
                raise IrError("var terms need a name and no operands")
        elif self.kind == "const":
            if self.value is None or self.operands:
                raise IrError("const terms need a value and no operands")
            if not self.out.contains(self.value):
                raise IrError(
                    f"constant {self.value} not representable in ({self.out})")
        elif self.kind in ARITY:
            if len(self.operands) != ARITY[self.kind]:
                raise IrError(
                    f"{self.kind} expects {ARITY[self.kind]} operands, "
                    f"got {len(self.operands)}")
            if self.kind == "slice":
                if self.indices is None:
                    raise IrError("slice needs (hi, lo) indices")
                hi, lo = self.indices
                if not (hi >= lo >= 0):
                    raise IrError(f"bad slice indices {self.indices}")
        else:
            raise IrError(f"unknown opcode: {self.kind}")

    def free_vars(self) -> set[str]:
        if self.kind == "var":
            return {self.name}
        out: set[str] = set()
        for _, t in self.operands:
            out |= t.free_vars()
        return out

    def size(self) -> int:
        return 1 + sum(t.size() for _, t in self.operands)

    def at(self, position: tuple[int, ...]) -> "Term":
        t = self
        for i in position:
            t = t.operands[i][1]
        return t

    def replace(self, position: tuple[int, ...], sub: "Term") -> "Term":
        if not position:
            return sub
        i, rest = position[0], position[1:]
        ops = list(self.operands)
        slot_ann, child = ops[i]
        ops[i] = (slot_ann, child.replace(rest, sub))
        return Term(self.kind, self.out, self.name, self.value,
                    tuple(ops), self.indices)


def var(name: str, out: Annotation) -> Term:
    return Term("var", out, name=name)


def const(value: int, out: Annotation) -> Term:
    return Term("const", out, value=value)


def op(kind: str, out: Annotation,
       *operands: tuple[Annotation, Term],
       indices: tuple[int, int] | None = None) -> Term:
    return Term(kind, out, operands=tuple(operands), indices=indices)


Environment = Mapping[str, int]


def _exact_op(kind: str, vals: list[int], slots: tuple[Annotation, ...],
              indices: tuple[int, int] | None) -> int:
    """Exact integer result of an opcode on slot-coerced operand values."""
    if kind == "+":
        return vals[0] + vals[1]
    if kind == "-":
        return vals[0] - vals[1]
    if kind == "*":
        return vals[0] * vals[1]
    if kind == "neg":
        return -vals[0]
    if kind == "~":
        return ~vals[0]
    if kind in ("&", "|", "^"):
        a, b = vals
        return a & b if kind == "&" else (a | b if kind == "|" else a ^ b)
    if kind in SHIFT_OPS:
        amt = to_bits(vals[1], slots[1])  # shift amounts always unsigned
        if kind == "<<":
            return vals[0] << amt
        if kind == ">>":
            return to_bits(vals[0], slots[0]) >> amt  # logical: shift the pattern
        return vals[0] >> amt  # arithmetic: floor-shift the value
    if kind == "mux":
        return vals[1] if vals[0] != 0 else vals[2]
    if kind == "concat":
        return (to_bits(vals[0], slots[0]) << slots[1].width) | to_bits(vals[1], slots[1])
    if kind == "slice":
        hi, lo = indices
        return (to_bits(vals[0], slots[0]) >> lo) & ((1 << (hi - lo + 1)) - 1)
    if kind == "==":
        return int(vals[0] == vals[1])
    if kind == "<":
        return int(vals[0] < vals[1])
    if kind == "zext":
        return to_bits(vals[0], slots[0])
    if kind == "sext":
        return from_bits(to_bits(vals[0], slots[0]),
                         Annotation(slots[0].width, True))
    raise IrError(f"unknown opcode: {kind}")


def evaluate(t: Term, env: Environment) -> int:
    """Evaluate a term: exact arithmetic on coerced operands, result truncated
    to the output width and reinterpreted under the output signage."""
    if t.kind == "var":
        if t.name not in env:
            raise UnboundVariableError(t.name)
        return coerce(env[t.name], t.out, t.out)
    if t.kind == "const":
        return t.value
    vals = [coerce(evaluate(child, env), child.out, slot)
            for slot, child in t.operands]
    slots = tuple(slot for slot, _ in t.operands)
    exact = _exact_op(t.kind, vals, slots, t.indices)
    return from_bits(exact & ((1 << t.out.width) - 1), t.out)


# ---------------------------------------------------------------------------
# Vectorized evaluation (int64).  Only usable when every intermediate exact
# result fits in 62 bits; callers check vectorizable() first.
# ---------------------------------------------------------------------------

def _range_bound(t: Term) -> int:
    """Max bits any exact intermediate of `t` can need (pre-truncation)."""
    worst = t.out.width + 1  # +1: signed magnitude
    for slot, child in t.operands:
        worst = max(worst, _range_bound(child))
    if t.kind in ARITY:
        slots = tuple(slot for slot, _ in t.operands)
        lohi = [(s.lo, s.hi) for s in slots]
        lo, hi = op_value_range(t.kind, slots, lohi, t.indices)
        worst = max(worst, max(abs(lo), abs(hi)).bit_length() + 1)
    return worst


def vectorizable(t: Term) -> bool:
    return _range_bound(t) <= 62


def evaluate_many(t: Term, env: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized `evaluate` over int64 arrays of input values."""
    def mask(w: int) -> int:
        return (1 << w) - 1

    def fb(bits: np.ndarray, a: Annotation) -> np.ndarray:
        if a.signed:
            half = np.int64(1) << np.int64(a.width - 1)
            return np.where(bits >= half, bits - (half << 1), bits)
        return bits

    def co(v: np.ndarray, dst: Annotation) -> np.ndarray:
        return fb(v & np.int64(mask(dst.width)), dst)

    def go(t: Term) -> np.ndarray:
        if t.kind == "var":
            if t.name not in env:
                raise UnboundVariableError(t.name)
            return env[t.name].astype(np.int64)
        if t.kind == "const":
            return np.int64(t.value)
        vals = [co(go(child), slot) for slot, child in t.operands]
        slots = [slot for slot, _ in t.operands]
        k = t.kind
        if k == "+":
            r = vals[0] + vals[1]
        elif k == "-":
            r = vals[0] - vals[1]
        elif k == "*":
            r = vals[0] * vals[1]
        elif k == "neg":
            r = -vals[0]
        elif k == "~":
            r = ~vals[0]
        elif k == "&":
            r = vals[0] & vals[1]
        elif k == "|":
            r = vals[0] | vals[1]
        elif k == "^":
            r = vals[0] ^ vals[1]
        elif k in SHIFT_OPS:
            amt = vals[1] & np.int64(mask(slots[1].width))
            if k == "<<":
                # np shifts are modular in the shift count; clamp over-shifts
                big = amt >= 62
                r = np.where(big, np.int64(0),
                             vals[0] << np.minimum(amt, np.int64(61)))
            elif k == ">>":
                pat = vals[0] & np.int64(mask(slots[0].width))
                r = pat >> np.minimum(amt, np.int64(62))
            else:
                r = vals[0] >> np.minimum(amt, np.int64(62))
        elif k == "mux":
            r = np.where(vals[0] != 0, vals[1], vals[2])
        elif k == "concat":
            r = ((vals[0] & np.int64(mask(slots[0].width)))
                 << np.int64(slots[1].width)) | (vals[1] & np.int64(mask(slots[1].width)))
        elif k == "slice":
            hi, lo = t.indices
            pat = vals[0] & np.int64(mask(slots[0].width))
            r = (pat >> np.int64(lo)) & np.int64(mask(hi - lo + 1))
        elif k == "==":
            r = (vals[0] == vals[1]).astype(np.int64)
        elif k == "<":
            r = (vals[0] < vals[1]).astype(np.int64)
        elif k == "zext":
            r = vals[0] & np.int64(mask(slots[0].width))
        elif k == "sext":
            r = fb(vals[0] & np.int64(mask(slots[0].width)),
                   Annotation(slots[0].width, True))
        else:
            raise IrError(f"unknown opcode: {k}")
        return fb(r & np.int64(mask(t.out.width)), t.out)

    return go(t)


# ---------------------------------------------------------------------------
# Width arithmetic: exact value ranges per opcode, shared with the interval
# analysis.  Ranges are over slot-coerced operand values.
# ---------------------------------------------------------------------------

def _corners(f, *ranges: tuple[int, int]) -> tuple[int, int]:
    vals = []
    combos = [()]
    for lo, hi in ranges:
        pts = {lo, hi}
        if lo < 0 < hi:
            pts |= {-1, 0}  # sign-boundary corners for products
        combos = [c + (p,) for c in combos for p in pts]
    for c in combos:
        vals.append(f(*c))
    return min(vals), max(vals)


def op_value_range(kind: str, slots: tuple[Annotation, ...],
                   operand_ranges: list[tuple[int, int]],
                   indices: tuple[int, int] | None = None) -> tuple[int, int]:
    """Sound (and where easy, exact) range of the pre-truncation result of an
    opcode, given ranges of the slot-coerced operand values."""
    r = operand_ranges
    if kind == "+":
        return r[0][0] + r[1][0], r[0][1] + r[1][1]
    if kind == "-":
        return r[0][0] - r[1][1], r[0][1] - r[1][0]
    if kind == "*":
        return _corners(lambda a, b: a * b, r[0], r[1])
    if kind == "neg":
        return -r[0][1], -r[0][0]
    if kind == "~":
        return ~r[0][1], ~r[0][0]
    if kind in ("&", "|", "^"):
        w = max(slots[0].width, slots[1].width)
        if slots[0].signed or slots[1].signed:
            return -(1 << (w - 1)), (1 << (w - 1)) - 1
        return 0, (1 << w) - 1
    if kind in SHIFT_OPS:
        # effective amount: unsigned reinterpretation of the amount slot
        amt_lo, amt_hi = r[1]
        if amt_lo < 0:  # pattern reinterpretation can reach the full range
            amt_lo, amt_hi = 0, (1 << slots[1].width) - 1
        if kind == "<<":
            return _corners(lambda a, s: a << s, r[0], (amt_lo, amt_hi))
        if kind == ">>":
            if r[0][0] >= 0:
                return r[0][0] >> amt_hi, r[0][1] >> amt_lo
            return 0, (1 << slots[0].width) - 1
        return _corners(lambda a, s: a >> s, r[0], (amt_lo, amt_hi))
    if kind == "mux":
        return min(r[1][0], r[2][0]), max(r[1][1], r[2][1])
    if kind == "concat":
        wb = slots[1].width
        if r[0][0] >= 0 and r[1][0] >= 0:
            return (r[0][0] << wb) | 0, (r[0][1] << wb) | r[1][1]
        return 0, (1 << (slots[0].width + wb)) - 1
    if kind == "slice":
        hi, lo = indices
        full = (1 << (hi - lo + 1)) - 1
        if r[0][0] >= 0 and r[0][1] >> lo <= full:
            return r[0][0] >> lo, r[0][1] >> lo
        return 0, full
    if kind in ("==", "<"):
        return 0, 1
    if kind == "zext":
        if r[0][0] >= 0:
            return r[0]
        return 0, (1 << slots[0].width) - 1
    if kind == "sext":
        if slots[0].signed:
            return r[0]
        half = 1 << (slots[0].width - 1)
        if r[0][1] < half:
            return r[0]
        return -half, half - 1
    raise IrError(f"unknown opcode: {kind}")


def min_width(lo: int, hi: int, signed: bool) -> int:
    """Smallest width representing every value in [lo, hi] under a signage."""
    if signed:
        w = 1
        while not (-(1 << (w - 1)) <= lo and hi <= (1 << (w - 1)) - 1):
            w += 1
        return w
    if lo < 0:
        raise IrError("negative range cannot be unsigned")
    return max(1, hi.bit_length())


def exact_width(kind: str, slots: tuple[Annotation, ...],
                indices: tuple[int, int] | None = None) -> Annotation:
    """Smallest output annotation under which `evaluate` never truncates,
    over all representable operand values."""
    ranges = [(s.lo, s.hi) for s in slots]
    lo, hi = op_value_range(kind, tuple(slots), ranges, indices)
    signed = lo < 0
    return Annotation(min_width(lo, hi, signed), signed)
