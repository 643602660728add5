"""Combinatorial-map model of mixed (pseudo) knotoid diagrams in the annulus.

A diagram lives on the 2-sphere and is encoded as a combinatorial map:

* nodes are either 4-valent crossings or 1-valent endpoints (``leg``, ``head``);
* crossing ports are indexed 0..3 in counterclockwise cyclic order, the strand
  through ports 0-2 is one strand and 1-3 the other, and ``over`` records which
  strand is the over-strand (``"02"`` / ``"13"``) or that the crossing carries
  no crossing information at all (``"pre"``);
* edges are directed (direction = strand orientation, leg to head on the open
  segment) and carry an integer ``marker``: the net signed number of times the
  edge crosses an implicit reference ray joining the two punctures;
* the annulus structure is recorded by two marked faces ``p1`` and ``p2`` (the
  two points where the axis of the complementary solid torus pierces the
  sphere).  ``p1 == p2`` with vanishing face sums is "spherical mode": an
  ordinary knotoid diagram in S^2 with no annulus structure.

Closed components with no crossings on them at all cannot be expressed as
rotation-system data, so they get their own representation, ``FreeLoop``: a
single closed curve whose ``marker`` is its winding number around the puncture
axis.  A free loop with marker +-1 is a mixed-unknot.

Faces are traced with the face kept on the *left* of the walk direction: the
face of a directed edge's tail dart is the face to its left.  The face sum of a
face adds ``+marker`` for each boundary edge traversed along its direction and
``-marker`` against.  A valid diagram satisfies, on every connected component,
either all face sums zero, or exactly one face with sum +1 and one with -1
(the faces pierced by the puncture axis on that component).
"""

from __future__ import annotations

import hashlib
import re
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    EndpointInMarkedFace,
    NoRoute,
    OpenWalk,
    ParseError,
    ValidationError,
)

# A dart is one end of an edge, addressed as (node id, port index).  The same
# (id, index) shape doubles as a face designator for free loops, where the
# index is the side (0 = left of the loop orientation, 1 = right).
Dart = Tuple[str, int]

# Face keys.  Node-bounded faces are keyed by their smallest dart, free-loop
# sides by the loop id and side; the leading tag keeps the two sortable.
FaceKey = Tuple[str, str, int]

KIND_CROSSING = "crossing"
KIND_LEG = "leg"
KIND_HEAD = "head"

OVER_02 = "02"
OVER_13 = "13"
OVER_PRE = "pre"


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    over: Optional[str] = None  # "02" | "13" | "pre" for crossings

    def ports(self) -> range:
        return range(4) if self.kind == KIND_CROSSING else range(1)


@dataclass(frozen=True)
class Edge:
    id: str
    tail: Dart  # (node, port) the edge leaves from
    head: Dart  # (node, port) the edge arrives at
    marker: int = 0


@dataclass(frozen=True)
class FreeLoop:
    id: str
    marker: int = 0


@dataclass
class PuncturedDiagram:
    """Immutable by convention: operations return fresh diagrams."""

    nodes: Dict[str, Node]
    edges: Dict[str, Edge]
    loops: Dict[str, FreeLoop] = field(default_factory=dict)
    p1: Dart = ("", 0)
    p2: Dart = ("", 0)

    def crossings(self) -> List[Node]:
        return [n for n in self.nodes.values() if n.kind == KIND_CROSSING]

    def real_crossings(self) -> List[Node]:
        return [n for n in self.crossings() if n.over != OVER_PRE]

    def pre_crossings(self) -> List[Node]:
        return [n for n in self.crossings() if n.over == OVER_PRE]

    def endpoints(self) -> List[Node]:
        return [n for n in self.nodes.values() if n.kind != KIND_CROSSING]

    def is_spherical(self) -> bool:
        return self.p1 == self.p2


# ---------------------------------------------------------------------------
# dart bookkeeping and faces


def dart_map(d: PuncturedDiagram) -> Dict[Dart, Tuple[str, str]]:
    """dart -> (edge id, "tail" | "head")."""
    out: Dict[Dart, Tuple[str, str]] = {}
    for e in d.edges.values():
        out[e.tail] = (e.id, "tail")
        out[e.head] = (e.id, "head")
    return out


def _face_step(d: PuncturedDiagram, dm: Dict[Dart, Tuple[str, str]],
               exit_dart: Dart) -> Dart:
    """Next exit dart of the face walk that leaves through ``exit_dart``.

    The walk traverses the edge at ``exit_dart`` (forward when it is the tail),
    arrives at the opposite end, and turns to keep the face on the left: at a
    crossing, arriving through port p it exits through port p-1 (mod 4); at an
    endpoint it bounces back through the single port.
    """
    eid, end = dm[exit_dart]
    e = d.edges[eid]
    arrive = e.head if end == "tail" else e.tail
    node = d.nodes[arrive[0]]
    if node.kind == KIND_CROSSING:
        return (arrive[0], (arrive[1] - 1) % 4)
    return arrive


def node_faces(d: PuncturedDiagram) -> List[Tuple[Dart, ...]]:
    """All faces bounded by edges, as tuples of exit darts in walk order.

    Each tuple is rotated so its smallest dart comes first; the list is sorted
    by that dart, which makes face enumeration fully deterministic.
    """
    dm = dart_map(d)
    seen: set = set()
    faces: List[Tuple[Dart, ...]] = []
    for start in sorted(dm):
        if start in seen:
            continue
        orbit = [start]
        seen.add(start)
        cur = _face_step(d, dm, start)
        while cur != start:
            orbit.append(cur)
            seen.add(cur)
            cur = _face_step(d, dm, cur)
        k = orbit.index(min(orbit))
        faces.append(tuple(orbit[k:] + orbit[:k]))
    return faces


def face_key_of(orbit: Tuple[Dart, ...]) -> FaceKey:
    return ("d",) + orbit[0]


def loop_face_key(loop_id: str, side: int) -> FaceKey:
    return ("l", loop_id, side)


def all_faces(d: PuncturedDiagram) -> Dict[FaceKey, Tuple[Dart, ...]]:
    out: Dict[FaceKey, Tuple[Dart, ...]] = {}
    for orbit in node_faces(d):
        out[face_key_of(orbit)] = orbit
    for lid in sorted(d.loops):
        out[loop_face_key(lid, 0)] = ()
        out[loop_face_key(lid, 1)] = ()
    return out


def face_of(d: PuncturedDiagram, ref: Dart,
            faces: Optional[Dict[FaceKey, Tuple[Dart, ...]]] = None) -> FaceKey:
    """Face designated by a dart (the face whose walk exits through it), or by
    a (loop id, side) pair."""
    if ref[0] in d.loops:
        if ref[1] not in (0, 1):
            raise ValidationError("loop face side must be 0 or 1: %r" % (ref,))
        return loop_face_key(ref[0], ref[1])
    if faces is None:
        faces = all_faces(d)
    for key, orbit in faces.items():
        if ref in orbit:
            return key
    raise ValidationError("dangling face designator %r" % (ref,))


def face_sums(d: PuncturedDiagram,
              faces: Optional[Dict[FaceKey, Tuple[Dart, ...]]] = None
              ) -> Dict[FaceKey, int]:
    """Signed marker sum around every face (+ along edge direction)."""
    if faces is None:
        faces = all_faces(d)
    dm = dart_map(d)
    sums: Dict[FaceKey, int] = {}
    for key, orbit in faces.items():
        if key[0] == "l":
            m = d.loops[key[1]].marker
            sums[key] = m if key[2] == 0 else -m
            continue
        s = 0
        for dart in orbit:
            eid, end = dm[dart]
            s += d.edges[eid].marker if end == "tail" else -d.edges[eid].marker
        sums[key] = s
    return sums


def components(d: PuncturedDiagram) -> List[Tuple[frozenset, frozenset]]:
    """Connected components as (node id set, loop id set), sorted."""
    parent: Dict[str, str] = {nid: nid for nid in d.nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in d.edges.values():
        a, b = find(e.tail[0]), find(e.head[0])
        if a != b:
            parent[a] = b
    groups: Dict[str, set] = {}
    for nid in d.nodes:
        groups.setdefault(find(nid), set()).add(nid)
    comps = [(frozenset(g), frozenset()) for g in groups.values()]
    comps += [(frozenset(), frozenset([lid])) for lid in d.loops]
    return sorted(comps, key=lambda c: sorted(c[0]) + sorted(c[1]))


def _component_of_face(key: FaceKey) -> str:
    """Representative element id for grouping faces by component."""
    return key[1]


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def validate(d: PuncturedDiagram) -> ValidationReport:
    rep = ValidationReport()
    say = rep.problems.append

    for nid, n in d.nodes.items():
        if nid != n.id:
            say("node key %r does not match id %r" % (nid, n.id))
        if n.kind == KIND_CROSSING:
            if n.over not in (OVER_02, OVER_13, OVER_PRE):
                say("crossing %s has bad over field %r" % (nid, n.over))
        elif n.kind in (KIND_LEG, KIND_HEAD):
            if n.over is not None:
                say("endpoint %s must not carry an over field" % nid)
        else:
            say("node %s has unknown kind %r" % (nid, n.kind))

    seen: Dict[Dart, str] = {}
    for eid, e in d.edges.items():
        if eid != e.id:
            say("edge key %r does not match id %r" % (eid, e.id))
        if eid in d.loops:
            say("id %r used by both an edge and a loop" % eid)
        for dart in (e.tail, e.head):
            nid, port = dart
            if nid not in d.nodes:
                say("edge %s references missing node %r" % (eid, nid))
                continue
            if port not in d.nodes[nid].ports():
                say("edge %s references bad port %r.%d" % (eid, nid, port))
                continue
            if dart in seen:
                say("dart %r.%d used by edges %s and %s"
                    % (nid, port, seen[dart], eid))
            seen[dart] = eid
    if rep.problems:
        return rep  # structural damage; later checks would only cascade

    for n in d.nodes.values():
        for p in n.ports():
            if (n.id, p) not in seen:
                say("dart %r.%d is not used by any edge" % (n.id, p))
    if rep.problems:
        return rep

    # orientation flows through every node
    dm = dart_map(d)
    for n in d.nodes.values():
        if n.kind == KIND_CROSSING:
            for pair in ((0, 2), (1, 3)):
                ends = sorted(dm[(n.id, p)][1] for p in pair)
                if ends != ["head", "tail"]:
                    say("crossing %s: strand %d-%d does not flow through"
                        % (n.id, *pair))
        elif n.kind == KIND_LEG:
            if dm[(n.id, 0)][1] != "tail":
                say("leg %s has an incoming edge" % n.id)
        else:
            if dm[(n.id, 0)][1] != "head":
                say("head %s has an outgoing edge" % n.id)

    legs = sum(1 for n in d.nodes.values() if n.kind == KIND_LEG)
    heads = sum(1 for n in d.nodes.values() if n.kind == KIND_HEAD)
    if (legs, heads) not in ((1, 1), (0, 0)):
        say("endpoint census (%d legs, %d heads); need (1,1) or (0,0)"
            % (legs, heads))

    faces = all_faces(d)
    sums = face_sums(d, faces)
    comps = components(d)

    # Euler formula per connected component (a free loop counts an implicit
    # vertex: V=1, E=1, F=2).
    for nodeset, loopset in comps:
        if loopset:
            continue  # 1 - 1 + 2 == 2 always
        v = len(nodeset)
        e = sum(1 for ed in d.edges.values() if ed.tail[0] in nodeset)
        f = sum(1 for key in faces if key[0] == "d" and key[1] in nodeset)
        if v - e + f != 2:
            say("component %s: Euler V-E+F = %d-%d+%d != 2"
                % (sorted(nodeset)[0], v, e, f))

    # cochain condition per component
    comp_of: Dict[str, int] = {}
    for i, (nodeset, loopset) in enumerate(comps):
        for x in nodeset | loopset:
            comp_of[x] = i
    comp_sums: Dict[int, List[int]] = {i: [] for i in range(len(comps))}
    for key, s in sums.items():
        comp_sums[comp_of[_component_of_face(key)]].append(s)
    nonzero_comps = set()
    for i, vals in comp_sums.items():
        nz = sorted(v for v in vals if v != 0)
        if nz == []:
            continue
        if nz != [-1, 1]:
            say("component %d: face sums %s violate the cochain condition"
                % (i, sorted(vals)))
        nonzero_comps.add(i)

    # puncture designators
    for label, ref, want in (("p1", d.p1, 1), ("p2", d.p2, -1)):
        try:
            key = face_of(d, ref, faces)
        except ValidationError as exc:
            say("%s: %s" % (label, exc))
            continue
        s = sums[key]
        ci = comp_of[_component_of_face(key)]
        if ci in nonzero_comps and s != want:
            say("%s designates a face with sum %d (want %d)" % (label, s, want))
        elif s not in (0, want):
            say("%s designates a face with sum %d" % (label, s))
    if d.p1 == d.p2 and nonzero_comps:
        say("p1 == p2 (spherical mode) but some face sums are nonzero")

    return rep


def require_valid(d: PuncturedDiagram, what: str = "diagram") -> None:
    rep = validate(d)
    if not rep.ok:
        raise ValidationError("%s invalid: %s" % (what, "; ".join(rep.problems)))


# ---------------------------------------------------------------------------
# winding and writhe


def winding(d: PuncturedDiagram, walk: Sequence[Tuple[str, int]]) -> int:
    """Signed ray crossings of a closed directed walk.

    ``walk`` is a sequence of (edge id, +1 | -1) traversals; +1 follows the
    edge direction.  A single free-loop traversal (loop id, +-1) is allowed.
    """
    if not walk:
        raise OpenWalk("empty walk")
    if len(walk) == 1 and walk[0][0] in d.loops:
        lid, s = walk[0]
        if s not in (1, -1):
            raise OpenWalk("bad traversal direction %r" % (s,))
        return s * d.loops[lid].marker
    total = 0
    nodes_in: List[str] = []
    nodes_out: List[str] = []
    for eid, s in walk:
        if eid not in d.edges:
            raise OpenWalk("unknown edge %r in walk" % eid)
        if s not in (1, -1):
            raise OpenWalk("bad traversal direction %r" % (s,))
        e = d.edges[eid]
        start, end = (e.tail[0], e.head[0]) if s == 1 else (e.head[0], e.tail[0])
        nodes_out.append(start)
        nodes_in.append(end)
        total += s * e.marker
    for i in range(len(walk)):
        if nodes_in[i] != nodes_out[(i + 1) % len(walk)]:
            raise OpenWalk("walk breaks between steps %d and %d"
                           % (i, (i + 1) % len(walk)))
    return total


def crossing_sign(d: PuncturedDiagram, node_id: str) -> int:
    """+1 / -1 for a real crossing, 0 for a pre-crossing.

    With ports counterclockwise and arriving ports over_in / under_in, the
    crossing is positive exactly when under_in = over_in + 1 (mod 4), i.e. the
    under direction is a counterclockwise quarter turn of the over direction.
    A positive kink contributes the raw bracket factor -A^3, and the positive
    trefoil gets the published Jones polynomial under A = t^(-1/4).
    """
    n = d.nodes[node_id]
    if n.kind != KIND_CROSSING:
        raise ValidationError("%s is not a crossing" % node_id)
    if n.over == OVER_PRE:
        return 0
    dm = dart_map(d)
    ins = {p for p in range(4) if dm[(node_id, p)][1] == "head"}
    over_in = next(p for p in ins if (p % 2 == 0) == (n.over == OVER_02))
    under_in = next(p for p in ins if p != over_in)
    return 1 if under_in == (over_in + 1) % 4 else -1


def writhe(d: PuncturedDiagram) -> int:
    return sum(crossing_sign(d, n.id) for n in d.crossings())


# ---------------------------------------------------------------------------
# KDX serialization


_ID = r"[A-Za-z_][A-Za-z0-9_]*"
_RE_NODE = re.compile(r"^node\s+(%s)\s+(crossing\s+over=(02|13|pre)|leg|head)$" % _ID)
_RE_EDGE = re.compile(
    r"^edge\s+(%s)\s+(%s)\.(\d+)\s*->\s*(%s)\.(\d+)(?:\s+m=(-?\d+))?$"
    % (_ID, _ID, _ID))
_RE_LOOP = re.compile(r"^edge\s+(%s)\s+loop(?:\s+m=(-?\d+))?$" % _ID)
_RE_MARK = re.compile(r"^mark\s+(p1|p2)\s+(%s)\.(\d+)$" % _ID)


def parse_kdx(text: str) -> PuncturedDiagram:
    nodes: Dict[str, Node] = {}
    edges: Dict[str, Edge] = {}
    loops: Dict[str, FreeLoop] = {}
    marks: Dict[str, Dart] = {}
    lines = text.splitlines()
    if not lines or lines[0].split("#")[0].strip() != "kdx 1":
        raise ParseError("line 1: expected header 'kdx 1'")
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        m = _RE_NODE.match(line)
        if m:
            nid, rest, over = m.group(1), m.group(2), m.group(3)
            if nid in nodes:
                raise ParseError("line %d: duplicate node id %r" % (ln, nid))
            if rest.startswith("crossing"):
                nodes[nid] = Node(nid, KIND_CROSSING, over)
            else:
                nodes[nid] = Node(nid, rest)
            continue
        m = _RE_LOOP.match(line)
        if m:
            lid = m.group(1)
            if lid in loops or lid in edges:
                raise ParseError("line %d: duplicate edge id %r" % (ln, lid))
            loops[lid] = FreeLoop(lid, int(m.group(2) or 0))
            continue
        m = _RE_EDGE.match(line)
        if m:
            eid = m.group(1)
            if eid in edges or eid in loops:
                raise ParseError("line %d: duplicate edge id %r" % (ln, eid))
            tail = (m.group(2), int(m.group(3)))
            head = (m.group(4), int(m.group(5)))
            for nid, port in (tail, head):
                if nid not in nodes:
                    raise ParseError("line %d: unknown node %r" % (ln, nid))
                if port not in nodes[nid].ports():
                    raise ParseError("line %d: node %r has no port %d"
                                     % (ln, nid, port))
            edges[eid] = Edge(eid, tail, head, int(m.group(6) or 0))
            continue
        m = _RE_MARK.match(line)
        if m:
            label = m.group(1)
            if label in marks:
                raise ParseError("line %d: duplicate mark %s" % (ln, label))
            ref = (m.group(2), int(m.group(3)))
            if ref[0] not in nodes and ref[0] not in loops:
                raise ParseError("line %d: mark references unknown id %r"
                                 % (ln, ref[0]))
            marks[label] = ref
            continue
        raise ParseError("line %d: cannot parse %r" % (ln, raw))
    for label in ("p1", "p2"):
        if label not in marks:
            raise ParseError("missing 'mark %s' line" % label)
    return PuncturedDiagram(nodes, edges, loops, marks["p1"], marks["p2"])


def serialize_kdx(d: PuncturedDiagram) -> str:
    out = ["kdx 1"]
    for nid in sorted(d.nodes):
        n = d.nodes[nid]
        if n.kind == KIND_CROSSING:
            out.append("node %s crossing over=%s" % (nid, n.over))
        else:
            out.append("node %s %s" % (nid, n.kind))
    for eid in sorted(set(d.edges) | set(d.loops)):
        if eid in d.loops:
            lp = d.loops[eid]
            suffix = " m=%d" % lp.marker if lp.marker else ""
            out.append("edge %s loop%s" % (eid, suffix))
        else:
            e = d.edges[eid]
            suffix = " m=%d" % e.marker if e.marker else ""
            out.append("edge %s %s.%d -> %s.%d%s"
                       % (eid, e.tail[0], e.tail[1], e.head[0], e.head[1], suffix))
    out.append("mark p1 %s.%d" % d.p1)
    out.append("mark p2 %s.%d" % d.p2)
    return "\n".join(out) + "\n"


def fingerprint(d: PuncturedDiagram) -> str:
    return hashlib.sha256(serialize_kdx(d).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# marker (re)computation


def solve_markers(d: PuncturedDiagram,
                  targets: Dict[FaceKey, int]) -> PuncturedDiagram:
    """Recompute every edge and loop marker to realize given face sums.

    ``targets`` must assign a sum to every face; sums must cancel on every
    connected component.  On a sphere component the face sums determine the
    winding number of every embedded cycle, so any marker assignment with the
    requested sums represents the same mixed diagram; this one sets markers on
    a spanning tree of the dual graph and zero elsewhere.
    """
    faces = all_faces(d)
    if set(targets) != set(faces):
        raise ValidationError("targets must cover all faces exactly")
    dm = dart_map(d)

    new_loops = {}
    for lid, lp in d.loops.items():
        t0 = targets[loop_face_key(lid, 0)]
        if t0 + targets[loop_face_key(lid, 1)] != 0:
            raise ValidationError("loop %s: face targets do not cancel" % lid)
        new_loops[lid] = FreeLoop(lid, t0)

    # dual graph on node-bounded faces: one dual edge per diagram edge,
    # oriented from the head-dart face (right) to the tail-dart face (left)
    side: Dict[str, Tuple[FaceKey, FaceKey]] = {}
    key_of_dart: Dict[Dart, FaceKey] = {}
    for key, orbit in faces.items():
        for dart in orbit:
            key_of_dart[dart] = key
    for e in d.edges.values():
        side[e.id] = (key_of_dart[e.tail], key_of_dart[e.head])

    markers: Dict[str, int] = {eid: 0 for eid in d.edges}
    incident: Dict[FaceKey, List[str]] = {k: [] for k in faces if k[0] == "d"}
    for eid, (fl, fr) in side.items():
        incident[fl].append(eid)
        if fr != fl:
            incident[fr].append(eid)

    visited: set = set()
    for root in sorted(incident):
        if root in visited:
            continue
        # BFS spanning tree of this component's dual graph
        order: List[FaceKey] = [root]
        tree_edge: Dict[FaceKey, str] = {}
        visited.add(root)
        q = deque([root])
        while q:
            f = q.popleft()
            for eid in sorted(incident[f]):
                fl, fr = side[eid]
                other = fr if fl == f else fl
                if other == f or other in visited:
                    continue
                visited.add(other)
                tree_edge[other] = eid
                order.append(other)
                q.append(other)
        if sum(targets[f] for f in order) != 0:
            raise ValidationError(
                "face targets do not cancel on the component of %s" % (root,))
        # peel leaves upward: each non-root face fixes its tree edge
        for f in reversed(order[1:]):
            eid = tree_edge[f]
            fl, fr = side[eid]
            s = 0
            for other_eid in incident[f]:
                if other_eid == eid:
                    continue
                ofl, ofr = side[other_eid]
                if ofl == f:
                    s += markers[other_eid]
                if ofr == f:
                    s -= markers[other_eid]
            need = targets[f] - s
            markers[eid] = need if fl == f else -need

    new_edges = {eid: replace(e, marker=markers[eid])
                 for eid, e in d.edges.items()}
    out = PuncturedDiagram(dict(d.nodes), new_edges, new_loops, d.p1, d.p2)
    check = face_sums(out)
    bad = {k: (check[k], targets[k]) for k in targets if check[k] != targets[k]}
    if bad:
        raise ValidationError("marker solve failed on faces %s" % sorted(bad))
    return out


# ---------------------------------------------------------------------------
# closure


def _fresh_ids(taken: Iterable[str], prefix: str, count: int) -> List[str]:
    taken = set(taken)
    out: List[str] = []
    i = 1
    while len(out) < count:
        cand = "%s%d" % (prefix, i)
        if cand not in taken:
            out.append(cand)
            taken.add(cand)
        i += 1
    return out


def closure(d: PuncturedDiagram, mode: str = "under") -> PuncturedDiagram:
    """Close the open segment with an arc from the head back to the leg.

    The arc follows a shortest dual-graph route between the faces holding the
    two endpoints, never entering a marked face (a puncture face, or any face
    with nonzero marker sum); ties break toward smaller face ids.  Every edge
    the arc crosses becomes a new crossing whose over-strand is the arc
    (``mode="over"``), the crossed edge (``"under"``), or undetermined
    (``"pseudo"``).
    """
    if mode not in ("under", "over", "pseudo"):
        raise ValidationError("unknown closure mode %r" % mode)
    legs = [n for n in d.nodes.values() if n.kind == KIND_LEG]
    heads = [n for n in d.nodes.values() if n.kind == KIND_HEAD]
    if len(legs) != 1 or len(heads) != 1:
        raise ValidationError("closure needs exactly one leg and one head")
    leg, head = legs[0], heads[0]

    faces = all_faces(d)
    sums = face_sums(d, faces)
    spherical = d.is_spherical()
    marked: set = set()
    if not spherical:
        marked = {k for k, s in sums.items() if s != 0}
        marked.add(face_of(d, d.p1, faces))
        marked.add(face_of(d, d.p2, faces))

    f_start = face_of(d, (head.id, 0), faces)
    f_goal = face_of(d, (leg.id, 0), faces)
    if f_start in marked or f_goal in marked:
        raise EndpointInMarkedFace(
            "an endpoint lies in a puncture face; closure arc cannot start")

    # dual BFS, deterministic by sorted face keys
    key_of_dart: Dict[Dart, FaceKey] = {}
    for key, orbit in faces.items():
        for dart in orbit:
            key_of_dart[dart] = key
    neighbors: Dict[FaceKey, List[Tuple[FaceKey, str, Dart]]] = {}
    for e in d.edges.values():
        fl, fr = key_of_dart[e.tail], key_of_dart[e.head]
        # crossing e from its left face enters at port 1; from the right, 3
        neighbors.setdefault(fl, []).append((fr, e.id, e.tail))
        neighbors.setdefault(fr, []).append((fl, e.id, e.head))
    prev: Dict[FaceKey, Tuple[FaceKey, str, Dart]] = {}
    seen = {f_start}
    q = deque([f_start])
    while q and f_goal not in seen:
        f = q.popleft()
        for other, eid, via in sorted(neighbors.get(f, [])):
            if other in seen or other in marked:
                continue
            seen.add(other)
            prev[other] = (f, eid, via)
            q.append(other)
    if f_goal not in seen:
        raise NoRoute("no unmarked dual route from head face to leg face")

    hops: List[Tuple[str, Dart]] = []  # (crossed edge, dart seen from f_{i-1})
    f = f_goal
    while f != f_start:
        pf, eid, via = prev[f]
        hops.append((eid, via))
        f = pf
    hops.reverse()
    k = len(hops)

    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    del nodes[leg.id]
    del nodes[head.id]

    over = {"over": OVER_02, "under": OVER_13, "pseudo": OVER_PRE}[mode]
    xids = _fresh_ids(nodes, "x", k)
    eids = _fresh_ids(set(edges) | set(loops), "a", k + 1)
    dmap = dart_map(d)

    # split each crossed edge at its new crossing
    for (eid, via), xid in zip(hops, xids):
        nodes[xid] = Node(xid, KIND_CROSSING, over)
        e = edges.pop(eid)
        in_port = 1 if dmap[via][1] == "tail" else 3
        a, b = _fresh_ids(set(edges) | set(loops) | set(eids), eid + "_", 2)
        edges[a] = Edge(a, e.tail, (xid, in_port), e.marker)
        edges[b] = Edge(b, (xid, (in_port + 2) % 4), e.head, 0)

    e_h = next(e for e in edges.values() if e.head == (head.id, 0))
    e_l = next(e for e in edges.values() if e.tail == (leg.id, 0))

    p1, p2 = d.p1, d.p2
    if k == 0:
        if e_h.id == e_l.id:
            del edges[e_h.id]
            lid = _fresh_ids(set(edges) | set(loops), "o", 1)[0]
            loops[lid] = FreeLoop(lid, 0)
            if spherical:
                p1 = p2 = (lid, 0)
            out = PuncturedDiagram(nodes, edges, loops, p1, p2)
        else:
            del edges[e_h.id]
            del edges[e_l.id]
            eid = eids[0]
            edges[eid] = Edge(eid, e_h.tail, e_l.head, e_h.marker + e_l.marker)
            if spherical:
                p1 = p2 = _any_dart(edges)
            out = PuncturedDiagram(nodes, edges, loops, p1, p2)
        require_valid(out, "closure output")
        return out

    chain: List[Tuple[Dart, Dart]] = []
    if e_h.id == e_l.id:
        del edges[e_h.id]
        chain.append(((xids[-1], 2), (xids[0], 0)))
    else:
        del edges[e_h.id]
        del edges[e_l.id]
        edges[e_h.id] = Edge(e_h.id, e_h.tail, (xids[0], 0), e_h.marker)
        chain.append(((xids[-1], 2), e_l.head))
    for i in range(k - 1):
        chain.append(((xids[i], 2), (xids[i + 1], 0)))
    for eid, (tail, hd) in zip(eids, chain):
        edges[eid] = Edge(eid, tail, hd, 0)

    out = PuncturedDiagram(nodes, edges, loops, p1, p2)

    # restore the annulus structure: every new face inherits the sum of the
    # old face any of its surviving darts belonged to (split faces were
    # unmarked, so both halves get 0)
    new_faces = all_faces(out)
    old_key_of_dart = key_of_dart
    targets: Dict[FaceKey, int] = {}
    for key, orbit in new_faces.items():
        if key[0] == "l":
            targets[key] = sums.get(key, 0)
            continue
        old = next((old_key_of_dart[dart] for dart in orbit
                    if dart in old_key_of_dart), None)
        targets[key] = sums[old] if old is not None else 0
    out = solve_markers(out, targets)
    if spherical:
        p = _any_dart(out.edges) if out.edges else (sorted(out.loops)[0], 0)
        out = PuncturedDiagram(out.nodes, out.edges, out.loops, p, p)
    require_valid(out, "closure output")
    return out


def _any_dart(edges: Dict[str, Edge]) -> Dart:
    eid = sorted(edges)[0]
    return edges[eid].tail


# ---------------------------------------------------------------------------
# crossing smoothing surgery


def a_pairs(node: Node) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Port pairing of the A-smoothing.

    The A-regions are the two corners swept when the over-strand rotates
    counterclockwise onto the under-strand; the A-smoothing is the
    reconnection whose channel merges those two corners.  With the
    over-strand through ports 0-2 the A-regions are the (0,1) and (2,3)
    corners, and the channel between them is opened by the arcs joining
    ports (1,2) and (3,0).
    """
    if node.over == OVER_02:
        return ((1, 2), (3, 0))
    if node.over == OVER_13:
        return ((0, 1), (2, 3))
    raise ValidationError("pre-crossing %s has no A/B smoothing" % node.id)


def b_pairs(node: Node) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    if node.over == OVER_02:
        return ((0, 1), (2, 3))
    if node.over == OVER_13:
        return ((1, 2), (3, 0))
    raise ValidationError("pre-crossing %s has no A/B smoothing" % node.id)


def oriented_pairs(d: PuncturedDiagram, nid: str) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """The unique smoothing compatible with both strand orientations: each
    pair joins one arriving and one leaving port."""
    dm = dart_map(d)
    for pairs in (((0, 1), (2, 3)), ((1, 2), (3, 0))):
        if all(sorted(dm[(nid, p)][1] for p in pair) == ["head", "tail"]
               for pair in pairs):
            return pairs
    raise ValidationError("crossing %s has no oriented smoothing" % nid)


def smooth_crossing(d: PuncturedDiagram, nid: str,
                    pairs: Tuple[Tuple[int, int], Tuple[int, int]]
                    ) -> PuncturedDiagram:
    """Delete crossing ``nid``, reconnecting the strands along ``pairs``.

    Merged edge chains accumulate markers with traversal signs, and a chain
    that closes up becomes a FreeLoop whose marker is its winding.  A
    non-oriented smoothing can flip strand directions, so the result need not
    pass orientation-flow validation; callers that require a valid diagram
    (the move engine) repair orientation and designators themselves.  If a
    puncture designator sits on a removed dart it is re-pointed at a surviving
    dart of the old face, which preserves the designated face whenever that
    face survives the smoothing.
    """
    nodes = dict(d.nodes)
    if nodes.pop(nid).kind != KIND_CROSSING:
        raise ValidationError("%s is not a crossing" % nid)
    edges = dict(d.edges)
    loops = dict(d.loops)

    old_faces = all_faces(d)
    refs = {}
    for label, ref in (("p1", d.p1), ("p2", d.p2)):
        if ref[0] in d.loops:
            refs[label] = ref
        else:
            refs[label] = face_of(d, ref, old_faces)

    for pair in pairs:
        dm: Dict[Dart, Tuple[str, str]] = {}
        for e in edges.values():
            dm[e.tail] = (e.id, "tail")
            dm[e.head] = (e.id, "head")
        a, b = (nid, pair[0]), (nid, pair[1])
        ea_id, _ = dm[a]
        eb_id, _ = dm[b]
        if ea_id == eb_id:
            e = edges.pop(ea_id)
            lid = _fresh_ids(set(edges) | set(loops), "o", 1)[0]
            loops[lid] = FreeLoop(lid, e.marker)
            continue
        ea, eb = edges.pop(ea_id), edges.pop(eb_id)
        sign_a = 1 if a == ea.head else -1  # traverse ea into the junction
        sign_b = 1 if b == eb.tail else -1  # and out along eb
        tail = ea.tail if sign_a == 1 else ea.head
        head = eb.head if sign_b == 1 else eb.tail
        mid = _fresh_ids(set(edges) | set(loops), "s", 1)[0]
        edges[mid] = Edge(mid, tail, head,
                          sign_a * ea.marker + sign_b * eb.marker)

    out = PuncturedDiagram(nodes, edges, loops, d.p1, d.p2)
    live = set(dart_map(out))
    new_refs = {}
    for label in ("p1", "p2"):
        ref = refs[label]
        if not isinstance(ref, tuple) or len(ref) != 3:
            new_refs[label] = ref  # loop designator, untouched
            continue
        old = (d.p1 if label == "p1" else d.p2)
        if old in live:
            new_refs[label] = old
            continue
        orbit = old_faces[ref]
        keep = next((dt for dt in orbit if dt in live), None)
        if keep is None:
            keep = _any_dart(edges) if edges else (sorted(loops)[0], 0)
        new_refs[label] = keep
    out.p1 = new_refs["p1"]
    out.p2 = new_refs["p2"]
    return out
