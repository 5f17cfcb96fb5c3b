"""Two-rooted e-graph over annotated word-level terms.

Nodes are hash-consed; classes live in a union-find.  Congruence repair is
deferred to rebuild().  Every union records a justification edge between two
concrete nodes in an explanation forest, from which single-rewrite proof
steps are later reconstructed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import analysis
from .ir import Annotation, IrError, Term, ARITY


class EGraphError(Exception):
    pass


@dataclass(frozen=True)
class NodeRec:
    """One e-node as originally added.  Children are class ids that may have
    been merged since; canonicalize through the union-find before comparing."""

    op: str                      # opcode, 'var' or 'const'
    out: Annotation
    slots: tuple[Annotation, ...]
    children: tuple[int, ...]
    name: str | None = None
    value: int | None = None
    indices: tuple[int, int] | None = None


@dataclass(frozen=True)
class Skeleton:
    """Concrete instantiation of one side of a rewrite: the node at each
    structured pattern position.  `subs[i]` is None where the pattern had a
    variable (the child class stands for itself)."""

    node: int
    subs: tuple["Skeleton | None", ...]


@dataclass(frozen=True)
class Leaf:
    """One side of a rewrite that is a bare class variable: the whole class
    stands for itself, witnessed by one of its concrete nodes."""

    node: int


@dataclass(frozen=True)
class RuleJust:
    rule_id: str
    lhs: Skeleton | Leaf
    rhs: Skeleton | Leaf
    lhs_node: int
    rhs_node: int


CONGRUENCE = "congruence"


@dataclass
class EClass:
    id: int
    node_ids: list[int] = field(default_factory=list)
    interval: "analysis.Interval | None" = None


@dataclass
class SaturationReport:
    iterations: int = 0
    node_counts: list[int] = field(default_factory=list)
    class_counts: list[int] = field(default_factory=list)
    stop_reason: str = ""
    roots_merged: bool = False
    redundant_applications: int = 0


class EGraph:
    def __init__(self):
        self.nodes: list[NodeRec] = []
        self.node_class: list[int] = []          # class at add time (stale ok)
        self.hashcons: dict[tuple, int] = {}     # canonical key -> node id
        self.parent: list[int] = []              # union-find
        self.classes: dict[int, EClass] = {}     # canonical id -> class
        self.proof_parent: dict[int, tuple[int, object]] = {}  # explanation forest
        self.unions = 0
        self.roots: tuple[int, int] | None = None       # (root_S cid, root_I cid)
        self.root_nodes: tuple[int, int] | None = None  # node ids of the roots

    # -- union-find ---------------------------------------------------------

    def find(self, cid: int) -> int:
        while self.parent[cid] != cid:
            self.parent[cid] = self.parent[self.parent[cid]]
            cid = self.parent[cid]
        return cid

    def class_of(self, node_id: int) -> int:
        return self.find(self.node_class[node_id])

    # -- node insertion -----------------------------------------------------

    def _key(self, n: NodeRec) -> tuple:
        return (n.op, n.out, n.slots, tuple(self.find(c) for c in n.children),
                n.name, n.value, n.indices)

    def add_node(self, n: NodeRec) -> tuple[int, int]:
        """Insert a node, returning (class id, node id).  Deduplicated: an
        existing canonical node is returned unchanged."""
        key = self._key(n)
        if key in self.hashcons:
            nid = self.hashcons[key]
            return self.class_of(nid), nid
        nid = len(self.nodes)
        self.nodes.append(n)
        cid = len(self.parent)
        self.parent.append(cid)
        self.node_class.append(cid)
        self.hashcons[key] = nid
        cls = EClass(cid, [nid])
        children_ivs = [self.classes[self.find(c)].interval for c in n.children]
        cls.interval = analysis.interval_make(n, children_ivs)
        self.classes[cid] = cls
        return cid, nid

    def add_term(self, t: Term) -> tuple[int, int]:
        """Insert a term bottom-up; returns (class id, node id) of the root."""
        if t.kind == "var":
            cid, nid = self.add_node(NodeRec("var", t.out, (), (), name=t.name))
        elif t.kind == "const":
            cid, nid = self.add_node(NodeRec("const", t.out, (), (), value=t.value))
        else:
            kids = []
            slots = []
            for slot, child in t.operands:
                ccid, _ = self.add_term(child)
                kids.append(ccid)
                slots.append(slot)
            cid, nid = self.add_node(NodeRec(
                t.kind, t.out, tuple(slots), tuple(kids), indices=t.indices))
        return cid, nid

    # -- merging and the explanation forest ---------------------------------

    def _forest_link(self, a: int, b: int, just: object) -> None:
        """Attach edge a--b by rerooting b's proof tree at b."""
        path = []
        cur = b
        while cur in self.proof_parent:
            nxt, j = self.proof_parent[cur]
            path.append((cur, nxt, j))
            cur = nxt
        for child, par, j in reversed(path):
            del self.proof_parent[child]
            self.proof_parent[par] = (child, j)
        self.proof_parent[b] = (a, just)

    def merge(self, c1: int, c2: int, justification: object = None,
              edge: tuple[int, int] | None = None) -> int:
        """Union two classes.  `edge` names the two concrete nodes whose
        equality justifies the union; required whenever c1 != c2."""
        c1, c2 = self.find(c1), self.find(c2)
        if c1 == c2:
            return c1
        if edge is None:
            raise EGraphError("merge of distinct classes needs a witness edge")
        keep, drop = (c1, c2) if c1 < c2 else (c2, c1)
        self.parent[drop] = keep
        kc, dc = self.classes[keep], self.classes.pop(drop)
        kc.node_ids.extend(dc.node_ids)
        kc.interval = analysis.interval_merge(kc.interval, dc.interval)
        self._forest_link(edge[0], edge[1], justification)
        self.unions += 1
        return keep

    # -- rebuild ------------------------------------------------------------

    def rebuild(self) -> None:
        """Restore congruence and the dedup table to a fixpoint, then refine
        intervals to their fixpoint."""
        changed = True
        while changed:
            changed = False
            table: dict[tuple, int] = {}
            for nid, n in enumerate(self.nodes):
                key = self._key(n)
                other = table.get(key)
                if other is None:
                    table[key] = nid
                elif self.class_of(other) != self.class_of(nid):
                    self.merge(self.class_of(other), self.class_of(nid),
                               CONGRUENCE, edge=(other, nid))
                    changed = True
            self.hashcons = table
        # drop within-class canonical duplicates from the member lists
        for cls in self.classes.values():
            seen: dict[tuple, int] = {}
            uniq = []
            for nid in cls.node_ids:
                key = self._key(self.nodes[nid])
                if key not in seen:
                    seen[key] = nid
                    uniq.append(self.hashcons[key])
            cls.node_ids = sorted(set(uniq))
        analysis.refine_intervals(self)

    # -- queries ------------------------------------------------------------

    def canonical_classes(self) -> list[EClass]:
        return [self.classes[c] for c in sorted(self.classes)]

    def num_nodes(self) -> int:
        return len(self.hashcons)

    def num_classes(self) -> int:
        return len(self.classes)

    def class_nodes(self, cid: int) -> list[NodeRec]:
        return [self.nodes[i] for i in self.classes[self.find(cid)].node_ids]

    def roots_merged(self) -> bool:
        return self.find(self.roots[0]) == self.find(self.roots[1])

    # -- representative extraction (cheapest finite term per class) ---------

    def chosen_nodes(self) -> dict[int, int]:
        """Per canonical class, the node heading the smallest finite term.
        Deterministic; cycle members are never chosen while an acyclic
        alternative exists."""
        INF = float("inf")
        size: dict[int, float] = {c: INF for c in self.classes}
        pick: dict[int, int] = {}
        changed = True
        while changed:
            changed = False
            for cid in sorted(self.classes):
                for nid in self.classes[cid].node_ids:
                    n = self.nodes[nid]
                    s = 1.0
                    ok = True
                    for ch in n.children:
                        cs = size[self.find(ch)]
                        if cs == INF:
                            ok = False
                            break
                        s += cs
                    if ok and (s < size[cid]
                               or (s == size[cid] and nid < pick.get(cid, 1 << 60))):
                        if size[cid] != s or pick.get(cid) != nid:
                            size[cid], pick[cid] = s, nid
                            changed = True
        missing = [c for c in self.classes if c not in pick]
        if missing:
            raise EGraphError(f"classes with no finite representative: {missing}")
        return pick

    def node_to_term(self, nid: int, pick: dict[int, int]) -> Term:
        n = self.nodes[nid]
        if n.op == "var":
            return Term("var", n.out, name=n.name)
        if n.op == "const":
            return Term("const", n.out, value=n.value)
        ops = tuple(
            (slot, self.node_to_term(pick[self.find(ch)], pick))
            for slot, ch in zip(n.slots, n.children))
        return Term(n.op, n.out, operands=ops, indices=n.indices)

    def class_term(self, cid: int, pick: dict[int, int]) -> Term:
        return self.node_to_term(pick[self.find(cid)], pick)

    # -- dumping ------------------------------------------------------------

    def dump(self, shared_sets=None) -> dict:
        """JSON-friendly dump: classes, nodes, annotations, roots, intervals,
        and spec/impl/shared coloring when shared sets are given."""
        color = {}
        if shared_sets is not None:
            for c in shared_sets.c_spec:
                color[c] = "spec"
            for c in shared_sets.c_impl:
                color[c] = "impl"
            for c in shared_sets.c_shared:
                color[c] = "shared"
        classes = []
        for cls in self.canonical_classes():
            nodes = []
            for nid in cls.node_ids:
                n = self.nodes[nid]
                nodes.append({
                    "op": n.op, "out": str(n.out),
                    "slots": [str(s) for s in n.slots],
                    "children": [self.find(c) for c in n.children],
                    "name": n.name, "value": n.value, "indices": n.indices,
                })
            entry = {"id": cls.id, "nodes": nodes,
                     "interval": [cls.interval.lo, cls.interval.hi]}
            if cls.id in color:
                entry["color"] = color[cls.id]
            classes.append(entry)
        return {
            "classes": classes,
            "roots": {"spec": self.find(self.roots[0]),
                      "impl": self.find(self.roots[1])},
        }


def init_pair(spec, impl) -> EGraph:
    """Initialize an e-graph holding both designs, sharing structure.

    The designs must declare identical input ports (names and annotations).
    """
    if spec.inputs != impl.inputs:
        raise EGraphError(
            f"port mismatch between designs: {spec.inputs} vs {impl.inputs}")
    g = EGraph()
    cs, ns = g.add_term(spec.body)
    ci, ni = g.add_term(impl.body)
    g.roots = (cs, ci)
    g.root_nodes = (ns, ni)
    g.rebuild()
    return g


def saturate(g: EGraph, rules: Sequence, limits: dict | None = None,
             stop_on_merge: bool = True) -> SaturationReport:
    """Equality saturation: each iteration matches every rule against the
    pre-iteration graph, applies all matches constructively, runs the
    width-reduction analysis pass, then rebuilds."""
    limits = dict(limits or {})
    iter_limit = limits.get("iter", 5)
    node_limit = limits.get("nodes", 50_000)
    time_limit = limits.get("time", 60.0)
    if iter_limit <= 0 or node_limit <= 0 or time_limit <= 0:
        raise EGraphError("saturation limits must be positive")
    report = SaturationReport()
    start = time.monotonic()
    report.node_counts.append(g.num_nodes())
    report.class_counts.append(g.num_classes())
    reason = "iter-limit"
    for it in range(iter_limit):
        if g.num_nodes() > node_limit:
            reason = "node-limit"
            break
        if time.monotonic() - start > time_limit:
            reason = "timeout"
            break
        before = (g.num_nodes(), g.num_classes(), g.unions)
        matches = []
        for r in rules:
            matches.extend(r.matches(g))
        for m in matches:
            if not m.apply(g):
                report.redundant_applications += 1
        analysis.width_reduction_pass(g)
        g.rebuild()
        report.iterations = it + 1
        report.node_counts.append(g.num_nodes())
        report.class_counts.append(g.num_classes())
        if stop_on_merge and g.roots is not None and g.roots_merged():
            reason = "roots-merged"
            break
        if (g.num_nodes(), g.num_classes(), g.unions) == before:
            reason = "saturated"
            break
    else:
        reason = "iter-limit"
    report.stop_reason = reason
    report.roots_merged = g.roots is not None and g.roots_merged()
    return report
