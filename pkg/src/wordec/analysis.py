"""Interval e-class analysis and bitwidth-reduction rewriting.

Each class carries a sound interval over its output value space.  Merging
intersects (all members of a class compute the same value, so both intervals
must contain it).  When a class's interval fits a narrower width, a
zext/sext-wrapped narrow copy of each operator node is added, normalizing
operators toward their minimum storage width.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .ir import Annotation, min_width, op_value_range

if TYPE_CHECKING:
    from .egraph import EGraph, NodeRec

WIDTH_REDUCE_RULE = "width-reduce"


class AnalysisError(Exception):
    """Empty interval intersection: an unsound rewrite or analysis bug."""


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise AnalysisError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, v: int) -> bool:
        return self.lo <= v <= self.hi


def _full(a: Annotation) -> Interval:
    return Interval(a.lo, a.hi)


def _coerce_interval(iv: Interval, dst: Annotation) -> Interval:
    """Interval of coerce(v, src, dst) for v in iv.  Coercion is the identity
    exactly on values representable in dst; otherwise widen to dst's range."""
    if dst.lo <= iv.lo and iv.hi <= dst.hi:
        return iv
    return _full(dst)


def interval_make(node: "NodeRec", child_intervals: list[Interval]) -> Interval:
    """Sound output interval of one node from its child class intervals."""
    if node.op == "var":
        return _full(node.out)
    if node.op == "const":
        return Interval(node.value, node.value)
    slot_ivs = [_coerce_interval(iv, slot)
                for iv, slot in zip(child_intervals, node.slots)]
    lo, hi = op_value_range(node.op, node.slots,
                            [(iv.lo, iv.hi) for iv in slot_ivs], node.indices)
    out = node.out
    if out.lo <= lo and hi <= out.hi:
        return Interval(lo, hi)
    return _full(out)  # truncation possible: wraparound widens to full range


def interval_merge(a: Interval, b: Interval) -> Interval:
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        raise AnalysisError(
            f"disjoint intervals [{a.lo},{a.hi}] and [{b.lo},{b.hi}]: "
            "unsound rewrite or analysis bug")
    return Interval(lo, hi)


def refine_intervals(g: "EGraph") -> None:
    """Iterate make/merge over all classes to the greatest fixpoint."""
    changed = True
    while changed:
        changed = False
        for cid in sorted(g.classes):
            cls = g.classes[cid]
            iv = cls.interval
            for nid in cls.node_ids:
                n = g.nodes[nid]
                kids = [g.classes[g.find(c)].interval for c in n.children]
                iv = interval_merge(iv, interval_make(n, kids))
            if iv != cls.interval:
                cls.interval = iv
                changed = True


def width_reduction_pass(g: "EGraph") -> int:
    """For every operator class whose interval fits a narrower width, add a
    zext/sext of the narrowed operator to the class.  Returns the number of
    narrowing unions performed."""
    from .egraph import NodeRec, RuleJust, Skeleton

    applied = 0
    for cid in sorted(g.classes):
        if g.find(cid) != cid:
            continue  # merged away by an earlier narrowing this pass
        cls = g.classes[cid]
        out = None
        for nid in list(cls.node_ids):
            n = g.nodes[nid]
            if n.op in ("var", "const", "zext", "sext"):
                continue
            out = n.out
            iv = cls.interval
            narrow_w = min_width(iv.lo, iv.hi, out.signed)
            if narrow_w >= out.width:
                continue
            narrow = Annotation(narrow_w, out.signed)
            ncid, nnid = g.add_node(NodeRec(
                n.op, narrow, n.slots, n.children,
                name=n.name, value=n.value, indices=n.indices))
            wrap_op = "sext" if out.signed else "zext"
            wcid, wnid = g.add_node(NodeRec(
                wrap_op, out, (narrow,), (ncid,)))
            if g.find(wcid) != g.find(cid):
                just = RuleJust(
                    WIDTH_REDUCE_RULE,
                    lhs=Skeleton(nid, tuple(None for _ in n.children)),
                    rhs=Skeleton(wnid, (Skeleton(
                        nnid, tuple(None for _ in n.children)),)),
                    lhs_node=nid, rhs_node=wnid)
                g.merge(cid, wcid, just, edge=(nid, wnid))
                applied += 1
    return applied
