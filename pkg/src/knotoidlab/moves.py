"""Rewriting moves on punctured diagrams.

Classical Reidemeister moves R1/R2/R3, their pseudo-crossing variants
PR1/PR3, and two annulus-specific rewrites: the marker slide (MSlide), which
adds the coboundary of a node to the edge markers, and the ray reroute
(RayReroute), which re-derives all markers from the face sums.  Every move
preserves the mixed diagram up to ambient isotopy of the punctured disk, so
the normalized bracket is invariant under all of them (the plain bracket
picks up -A^{+-3} under R1).

A move is located by a MoveSite; ``find_moves`` enumerates the legal sites
of one kind and ``apply_move`` performs one.  Sites are plain data and can
outlive the diagram they were found on; applying a site that no longer
matches raises StaleSite.  ``random_walk`` drives a seeded, reproducible
sequence of moves and records a replayable trace.

Legality of the collapsing moves (R1-, R2-, R3, PR1-, PR3) requires the
collapsing face to be empty: marker sum zero and not a puncture face.  A
bigon collapses only when the same strand is on top at both crossings, and a
triangle slides only when the moving strand is over both or under both of
its crossings; with a pre-crossing in the triangle, the pre-crossing must be
the stationary one (there is no PR2, and R2 never involves pre-crossings).
"""

import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .diagram import (
    Dart,
    Edge,
    FaceKey,
    FreeLoop,
    KIND_CROSSING,
    Node,
    OVER_02,
    OVER_13,
    OVER_PRE,
    PuncturedDiagram,
    _fresh_ids,
    all_faces,
    dart_map,
    face_of,
    face_sums,
    fingerprint,
    require_valid,
    solve_markers,
    validate,
)
from .errors import IllegalMove, StaleSite, ValidationError

MOVE_KINDS = ("R1+", "R1-", "R2+", "R2-", "R3",
              "PR1+", "PR1-", "PR3", "MSlide", "RayReroute")

GROWTH_KINDS = ("R1+", "PR1+", "R2+")

# crossing sign produced by a kink insertion, by (over, loop_port)
R1_SIGNS = {(OVER_02, 1): 1, (OVER_02, 3): -1,
            (OVER_13, 1): -1, (OVER_13, 3): 1}


@dataclass(frozen=True)
class MoveSite:
    """A located move: ``kind`` plus kind-specific site data."""

    kind: str
    data: tuple

    def signature(self) -> str:
        parts = []
        for item in self.data:
            if isinstance(item, tuple):
                parts.append("%s.%s" % (item[0], item[1]))
            else:
                parts.append(str(item))
        return "%s[%s]" % (self.kind, ",".join(parts))


# ---------------------------------------------------------------------------
# low-level surgery helpers


def _strand_of(port: int) -> str:
    return OVER_02 if port % 2 == 0 else OVER_13


def _dm_of(edges: Dict[str, Edge]) -> Dict[Dart, Tuple[str, str]]:
    dm: Dict[Dart, Tuple[str, str]] = {}
    for e in edges.values():
        dm[e.tail] = (e.id, "tail")
        dm[e.head] = (e.id, "head")
    return dm


def _merge_pair(edges: Dict[str, Edge], loops: Dict[str, FreeLoop],
                a: Dart, b: Dart) -> None:
    """Join the strand through darts ``a`` and ``b`` of a vanishing node.

    The two edge ends are fused respecting orientation; a chain that closes
    on itself becomes a free loop whose marker is the accumulated winding.
    """
    dm = _dm_of(edges)
    ea_id = dm[a][0]
    eb_id = dm[b][0]
    if ea_id == eb_id:
        e = edges.pop(ea_id)
        lid = _fresh_ids(set(edges) | set(loops), "o", 1)[0]
        loops[lid] = FreeLoop(lid, e.marker)
        return
    ea, eb = edges.pop(ea_id), edges.pop(eb_id)
    if ea.head == a and eb.tail == b:
        tail, head = ea.tail, eb.head
    elif ea.tail == a and eb.head == b:
        tail, head = eb.tail, ea.head
    else:
        raise ValidationError(
            "orientation does not flow through %r/%r" % (a, b))
    mid = _fresh_ids(set(edges) | set(loops), "s", 1)[0]
    edges[mid] = Edge(mid, tail, head, ea.marker + eb.marker)


def _straighten(nodes: Dict[str, Node], edges: Dict[str, Edge],
                loops: Dict[str, FreeLoop], nid: str) -> None:
    """Delete a crossing, letting both strands run straight through."""
    _merge_pair(edges, loops, (nid, 0), (nid, 2))
    _merge_pair(edges, loops, (nid, 1), (nid, 3))
    del nodes[nid]


def _split_corner(edges: Dict[str, Edge], z_dart: Dart, nid: str) -> None:
    """Split the edge at ``z_dart`` by a new crossing ``nid``, attaching the
    ``z_dart``-side piece at port 3 and the far piece at port 1."""
    dm = _dm_of(edges)
    e = edges.pop(dm[z_dart][0])
    na, nb = _fresh_ids(set(edges), "s", 2)
    if e.head == z_dart:
        edges[na] = Edge(na, (nid, 3), z_dart, 0)
        edges[nb] = Edge(nb, e.tail, (nid, 1), e.marker)
    else:
        edges[na] = Edge(na, z_dart, (nid, 3), 0)
        edges[nb] = Edge(nb, (nid, 1), e.head, e.marker)


def _designator_candidates(old: PuncturedDiagram,
                           old_faces: Dict[FaceKey, Tuple[Dart, ...]],
                           old_sums: Dict[FaceKey, int],
                           new: PuncturedDiagram,
                           new_sums: Dict[FaceKey, int],
                           ref) -> list:
    dmn = dart_map(new)
    if ref[0] in old.loops and ref[1] in (0, 1):
        if ref[0] in new.loops:
            return [ref]
    elif ref in dmn:
        return [ref]
    out = []
    okey = face_of(old, ref, old_faces)
    for dt in sorted(old_faces.get(okey, ())):
        if dt in dmn:
            out.append(dt)
            break
    s = old_sums[okey]
    for k in sorted(new_sums):
        if new_sums[k] == s:
            cand = (k[1], k[2])
            if cand not in out:
                out.append(cand)
    if not out:
        out.append(min((k[1], k[2]) for k in new_sums))
    return out


def _finish(old: PuncturedDiagram, nodes: Dict[str, Node],
            edges: Dict[str, Edge], loops: Dict[str, FreeLoop],
            overrides: Sequence[Tuple[Dart, int]] = ()) -> PuncturedDiagram:
    """Assemble a post-surgery diagram: re-solve markers against face-sum
    targets inherited from the surviving darts, re-point any designator that
    lost its dart, and validate.

    The target of a new face is the sum of the old sums of the distinct old
    faces its surviving darts belonged to; faces created from scratch get
    zero unless overridden.  Every move only merges zero-sum faces into their
    neighbours (legality), so this reproduces the geometric face sums.
    """
    new = PuncturedDiagram(nodes, edges, loops, old.p1, old.p2)
    old_faces = all_faces(old)
    old_sums = face_sums(old, old_faces)
    old_key_of: Dict[Dart, FaceKey] = {}
    for key, orbit in old_faces.items():
        for dt in orbit:
            old_key_of[dt] = key

    new_faces = all_faces(new)
    targets: Dict[FaceKey, int] = {}
    for key, orbit in new_faces.items():
        if key[0] == "l":
            lid = key[1]
            if lid in old.loops:
                targets[key] = old_sums[key]
            else:
                m = loops[lid].marker
                targets[key] = m if key[2] == 0 else -m
            continue
        seen = set()
        s = 0
        for dt in orbit:
            ok = old_key_of.get(dt)
            if ok is not None and ok not in seen:
                seen.add(ok)
                s += old_sums[ok]
        targets[key] = s
    for ref, value in overrides:
        targets[face_of(new, ref, new_faces)] = value

    new = solve_markers(new, targets)
    new_sums = face_sums(new)

    c1 = _designator_candidates(old, old_faces, old_sums, new, new_sums,
                                old.p1)
    if old.p1 == old.p2:
        pairs = [(r, r) for r in c1]
    else:
        c2 = _designator_candidates(old, old_faces, old_sums, new, new_sums,
                                    old.p2)
        pairs = [(r1, r2) for r1 in c1[:6] for r2 in c2[:6]]
    last = None
    for r1, r2 in pairs:
        cand = PuncturedDiagram(new.nodes, new.edges, new.loops, r1, r2)
        rep = validate(cand)
        if rep.ok:
            return cand
        last = rep
    raise ValidationError("move result is invalid: %s" %
                          "; ".join(last.problems if last else ["no faces"]))


# ---------------------------------------------------------------------------
# site checks (shared between find_moves and apply_move)


def _face_orbit_from(d: PuncturedDiagram, dart: Dart,
                     faces: Dict[FaceKey, Tuple[Dart, ...]]
                     ) -> Optional[Tuple[Dart, ...]]:
    for orbit in faces.values():
        if orbit and dart in orbit:
            return orbit
    return None


def _marked_keys(d: PuncturedDiagram,
                 faces: Dict[FaceKey, Tuple[Dart, ...]]) -> set:
    return {face_of(d, d.p1, faces), face_of(d, d.p2, faces)}


def _check_r1_minus(d: PuncturedDiagram, data: tuple, pre: bool):
    if len(data) != 2:
        raise StaleSite("malformed R1- site %r" % (data,))
    c, p = data
    node = d.nodes.get(c)
    if node is None or node.kind != KIND_CROSSING:
        raise StaleSite("no crossing %r" % c)
    if (node.over == OVER_PRE) != pre:
        raise StaleSite("crossing %r has the wrong over kind" % c)
    dm = dart_map(d)
    if (c, p) not in dm or dm[(c, p)][0] != dm[(c, (p + 1) % 4)][0]:
        raise StaleSite("no kink loop at %s.%d" % (c, p))
    faces = all_faces(d)
    orbit = _face_orbit_from(d, (c, p), faces)
    if orbit != ((c, p),):
        raise StaleSite("face at %s.%d is not a monogon" % (c, p))
    key = ("d", c, p)
    if face_sums(d, faces)[key] != 0 or key in _marked_keys(d, faces):
        raise IllegalMove("kink loop at %s.%d encloses the puncture" % (c, p))


def _check_r2_minus(d: PuncturedDiagram, data: tuple):
    if len(data) != 4:
        raise StaleSite("malformed R2- site %r" % (data,))
    c1, a, c2, b = data
    for c in (c1, c2):
        node = d.nodes.get(c)
        if node is None or node.kind != KIND_CROSSING or node.over == OVER_PRE:
            raise StaleSite("no real crossing %r" % c)
    if c1 == c2:
        raise StaleSite("bigon needs two distinct crossings")
    faces = all_faces(d)
    orbit = _face_orbit_from(d, (c1, a), faces)
    if orbit is None or set(orbit) != {(c1, a), (c2, b)} or len(orbit) != 2:
        raise StaleSite("no bigon on %s.%d/%s.%d" % (c1, a, c2, b))
    # the strand through the exit-side bigon edge must be on top at both
    # crossings, or under at both; otherwise the bigon is a clasp
    u_over_1 = d.nodes[c1].over == _strand_of(a)
    u_over_2 = d.nodes[c2].over == _strand_of(b + 1)
    if u_over_1 != u_over_2:
        raise IllegalMove("bigon %s/%s is a clasp" % (c1, c2))
    key = ("d",) + min((c1, a), (c2, b))
    if face_sums(d, faces)[key] != 0 or key in _marked_keys(d, faces):
        raise IllegalMove("bigon %s/%s holds the puncture" % (c1, c2))


def _check_r3(d: PuncturedDiagram, data: tuple, pre: bool):
    if len(data) != 3:
        raise StaleSite("malformed R3 site %r" % (data,))
    (x, tx), (y, ty), (z, tz) = data
    names = {x, y, z}
    if len(names) != 3:
        raise StaleSite("triangle corners must be distinct")
    for c in (x, y, z):
        node = d.nodes.get(c)
        if node is None or node.kind != KIND_CROSSING:
            raise StaleSite("no crossing %r" % c)
    if (d.nodes[x].over == OVER_PRE) or (d.nodes[y].over == OVER_PRE):
        raise StaleSite("sliding strand crossings must be real")
    if (d.nodes[z].over == OVER_PRE) != pre:
        raise StaleSite("stationary crossing has the wrong over kind")
    faces = all_faces(d)
    orbit = _face_orbit_from(d, (x, tx), faces)
    want = ((x, tx), (y, ty), (z, tz))
    if orbit is None or len(orbit) != 3 or set(orbit) != set(want):
        raise StaleSite("no triangle on %r" % (want,))
    # orbit order must match the walk x -> y -> z
    i = orbit.index((x, tx))
    if (orbit[(i + 1) % 3], orbit[(i + 2) % 3]) != ((y, ty), (z, tz)):
        raise StaleSite("triangle %r has the wrong cyclic order" % (want,))
    m_over_x = d.nodes[x].over == _strand_of(tx)
    m_over_y = d.nodes[y].over == _strand_of(ty + 1)
    if m_over_x != m_over_y:
        raise IllegalMove("sliding strand is not over-both or under-both")
    key = ("d",) + min(want)
    if face_sums(d, faces)[key] != 0 or key in _marked_keys(d, faces):
        raise IllegalMove("triangle %r holds the puncture" % (want,))
    # outer legs of the vanishing crossings must attach elsewhere
    dm = dart_map(d)
    for o in ((x, (tx + 2) % 4), (x, (tx + 3) % 4),
              (y, (ty + 2) % 4), (y, (ty + 3) % 4)):
        e = d.edges[dm[o][0]]
        other = e.head if e.tail == o else e.tail
        if other[0] in (x, y):
            raise IllegalMove("outer leg at %s.%d loops back into the "
                              "triangle" % o)
    return m_over_x, m_over_y


def _check_r2_plus(d: PuncturedDiagram, data: tuple):
    if len(data) != 3:
        raise StaleSite("malformed R2+ site %r" % (data,))
    dart_e, dart_f, mode = data
    if mode not in ("over", "under"):
        raise StaleSite("R2+ mode must be over or under")
    dm = dart_map(d)
    if dart_e not in dm or dart_f not in dm:
        raise StaleSite("dangling R2+ darts %r/%r" % (dart_e, dart_f))
    if dm[dart_e][0] == dm[dart_f][0]:
        raise IllegalMove("R2+ needs two distinct edges")
    faces = all_faces(d)
    orbit = _face_orbit_from(d, dart_e, faces)
    if orbit is None or dart_f not in orbit or dart_e == dart_f:
        raise StaleSite("R2+ darts are not on a common face")
    key = ("d",) + min(orbit)
    if face_sums(d, faces)[key] != 0 or key in _marked_keys(d, faces):
        raise IllegalMove("R2+ across a puncture face")


# ---------------------------------------------------------------------------
# move application


def _apply_r1_plus(d: PuncturedDiagram, data: tuple) -> PuncturedDiagram:
    eid, over, loop_port = data
    if eid not in d.edges:
        raise StaleSite("no edge %r" % eid)
    if over not in (OVER_02, OVER_13, OVER_PRE) or loop_port not in (1, 3):
        raise StaleSite("malformed R1+ site %r" % (data,))
    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    e = edges.pop(eid)
    x = _fresh_ids(set(nodes), "c", 1)[0]
    nodes[x] = Node(x, KIND_CROSSING, over)
    e1, le, e2 = _fresh_ids(set(edges) | set(loops), "s", 3)
    edges[e1] = Edge(e1, e.tail, (x, 0), e.marker)
    if loop_port == 1:
        edges[le] = Edge(le, (x, 2), (x, 1), 0)
        edges[e2] = Edge(e2, (x, 3), e.head, 0)
    else:
        edges[le] = Edge(le, (x, 2), (x, 3), 0)
        edges[e2] = Edge(e2, (x, 1), e.head, 0)
    return _finish(d, nodes, edges, loops)


def _apply_r1_minus(d: PuncturedDiagram, data: tuple,
                    pre: bool) -> PuncturedDiagram:
    _check_r1_minus(d, data, pre)
    c = data[0]
    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    _straighten(nodes, edges, loops, c)
    return _finish(d, nodes, edges, loops)


def _apply_r2_plus(d: PuncturedDiagram, data: tuple) -> PuncturedDiagram:
    _check_r2_plus(d, data)
    dart_e, dart_f, mode = data
    dm = dart_map(d)
    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    e = edges.pop(dm[dart_e][0])
    f = edges.pop(dm[dart_f][0])
    c1, c2 = _fresh_ids(set(nodes), "c", 2)
    # the finger strand runs through ports 1-3 of both new crossings
    over = OVER_13 if mode == "over" else OVER_02
    nodes[c1] = Node(c1, KIND_CROSSING, over)
    nodes[c2] = Node(c2, KIND_CROSSING, over)
    fa, fm, fb, ea, g, eb = _fresh_ids(set(edges) | set(loops), "s", 6)
    if dart_f == f.tail:  # f runs with the face walk
        edges[fa] = Edge(fa, f.tail, (c1, 2), f.marker)
        edges[fm] = Edge(fm, (c1, 0), (c2, 2), 0)
        edges[fb] = Edge(fb, (c2, 0), f.head, 0)
    else:
        edges[fa] = Edge(fa, f.tail, (c2, 0), f.marker)
        edges[fm] = Edge(fm, (c2, 2), (c1, 0), 0)
        edges[fb] = Edge(fb, (c1, 2), f.head, 0)
    if dart_e == e.head:  # e runs against the face walk
        edges[ea] = Edge(ea, e.tail, (c1, 1), e.marker)
        edges[g] = Edge(g, (c1, 3), (c2, 3), 0)
        edges[eb] = Edge(eb, (c2, 1), e.head, 0)
    else:
        edges[ea] = Edge(ea, e.tail, (c2, 1), e.marker)
        edges[g] = Edge(g, (c2, 3), (c1, 3), 0)
        edges[eb] = Edge(eb, (c1, 1), e.head, 0)
    return _finish(d, nodes, edges, loops)


def _apply_r2_minus(d: PuncturedDiagram, data: tuple) -> PuncturedDiagram:
    _check_r2_minus(d, data)
    c1, _, c2, _ = data
    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    _straighten(nodes, edges, loops, c1)
    _straighten(nodes, edges, loops, c2)
    return _finish(d, nodes, edges, loops)


def _apply_r3(d: PuncturedDiagram, data: tuple, pre: bool) -> PuncturedDiagram:
    m_over_x, m_over_y = _check_r3(d, data, pre)
    (x, tx), (y, ty), (z, tz) = data
    faces = all_faces(d)
    sums = face_sums(d, faces)
    s_north = sums[face_of(d, (z, (tz + 2) % 4), faces)]

    nodes = dict(d.nodes)
    edges = dict(d.edges)
    loops = dict(d.loops)
    # straighten the two strands the moving strand used to cross
    _merge_pair(edges, loops, (x, (tx + 1) % 4), (x, (tx + 3) % 4))
    _merge_pair(edges, loops, (y, ty), (y, (ty + 2) % 4))
    # new crossings on the far side of the stationary crossing; the moving
    # strand runs through their ports 0-2
    xp, yp = _fresh_ids(set(nodes), "c", 2)
    nodes[xp] = Node(xp, KIND_CROSSING, OVER_02 if m_over_x else OVER_13)
    nodes[yp] = Node(yp, KIND_CROSSING, OVER_02 if m_over_y else OVER_13)
    _split_corner(edges, (z, (tz + 2) % 4), xp)
    _split_corner(edges, (z, (tz + 3) % 4), yp)
    # fuse the moving strand straight through the vanishing crossings,
    # remembering which far end it used to reach first
    dm = _dm_of(edges)
    axe = edges[dm[(x, (tx + 2) % 4)][0]]
    w = axe.tail if axe.head == (x, (tx + 2) % 4) else axe.head
    _merge_pair(edges, loops, (x, tx), (x, (tx + 2) % 4))
    _merge_pair(edges, loops, (y, (ty + 1) % 4), (y, (ty + 3) % 4))
    del nodes[x]
    del nodes[y]
    # reroute the moving strand through the new crossings: coming from the
    # w side it now meets the stationary crossing's far strands in the
    # opposite order
    dm = _dm_of(edges)
    em = edges.pop(dm[w][0])
    m1, m2, m3 = _fresh_ids(set(edges) | set(loops), "s", 3)
    if em.tail == w:
        edges[m1] = Edge(m1, em.tail, (yp, 2), em.marker)
        edges[m2] = Edge(m2, (yp, 0), (xp, 2), 0)
        edges[m3] = Edge(m3, (xp, 0), em.head, 0)
    else:
        edges[m1] = Edge(m1, em.tail, (xp, 0), em.marker)
        edges[m2] = Edge(m2, (xp, 2), (yp, 0), 0)
        edges[m3] = Edge(m3, (yp, 2), em.head, 0)
    # the rebuilt triangle is swept clean; the region beyond it keeps
    # whatever the old face north of the stationary crossing held
    return _finish(d, nodes, edges, loops,
                   overrides=[((xp, 2), 0), ((xp, 1), s_north)])


def _apply_mslide(d: PuncturedDiagram, data: tuple) -> PuncturedDiagram:
    nid, k = data
    if nid not in d.nodes:
        raise StaleSite("no node %r" % nid)
    if k not in (1, -1):
        raise StaleSite("marker slide amount must be +-1")
    edges = {}
    for e in d.edges.values():
        m = e.marker
        if e.tail[0] == nid:
            m += k
        if e.head[0] == nid:
            m -= k
        edges[e.id] = replace(e, marker=m)
    out = PuncturedDiagram(dict(d.nodes), edges, dict(d.loops), d.p1, d.p2)
    require_valid(out, "marker slide result")
    return out


def reroute_ray(d: PuncturedDiagram, seed: int) -> PuncturedDiagram:
    """Re-derive all edge and loop markers from the face sums.

    The result represents the same mixed diagram with the measuring ray
    pushed along a different route: markers are rebuilt over a dual spanning
    tree and then perturbed by a seeded run of marker slides, so distinct
    seeds explore distinct cohomologous assignments deterministically.
    """
    rng = random.Random(seed)
    out = solve_markers(d, face_sums(d))
    nids = sorted(out.nodes)
    if nids:
        for _ in range(rng.randint(2, 6)):
            out = _apply_mslide(out, (rng.choice(nids), rng.choice((1, -1))))
    require_valid(out, "ray reroute result")
    return out


def apply_move(d: PuncturedDiagram, site: MoveSite) -> PuncturedDiagram:
    if site.kind == "R1+":
        if site.data[1] == OVER_PRE:
            raise IllegalMove("R1+ cannot insert a pre-crossing")
        return _apply_r1_plus(d, site.data)
    if site.kind == "PR1+":
        if site.data[1] != OVER_PRE:
            raise IllegalMove("PR1+ inserts a pre-crossing")
        return _apply_r1_plus(d, site.data)
    if site.kind == "R1-":
        return _apply_r1_minus(d, site.data, pre=False)
    if site.kind == "PR1-":
        return _apply_r1_minus(d, site.data, pre=True)
    if site.kind == "R2+":
        return _apply_r2_plus(d, site.data)
    if site.kind == "R2-":
        return _apply_r2_minus(d, site.data)
    if site.kind == "R3":
        return _apply_r3(d, site.data, pre=False)
    if site.kind == "PR3":
        return _apply_r3(d, site.data, pre=True)
    if site.kind == "MSlide":
        return _apply_mslide(d, site.data)
    if site.kind == "RayReroute":
        return reroute_ray(d, site.data[0])
    raise IllegalMove("unknown move kind %r" % site.kind)


# ---------------------------------------------------------------------------
# site enumeration


def find_moves(d: PuncturedDiagram,
               kind: Optional[str] = None) -> List[MoveSite]:
    """All legal sites of one kind (or of every kind), deterministically
    ordered."""
    if kind is None:
        out: List[MoveSite] = []
        for k in MOVE_KINDS:
            out.extend(find_moves(d, k))
        return out
    if kind in ("R1+", "PR1+"):
        overs = (OVER_PRE,) if kind == "PR1+" else (OVER_02, OVER_13)
        return [MoveSite(kind, (eid, over, port))
                for eid in sorted(d.edges)
                for over in overs
                for port in (1, 3)]
    if kind in ("R1-", "PR1-"):
        sites = []
        for nid in sorted(d.nodes):
            for p in range(4):
                try:
                    _check_r1_minus(d, (nid, p), pre=(kind == "PR1-"))
                except IllegalMove:
                    continue
                sites.append(MoveSite(kind, (nid, p)))
        return sites
    if kind == "R2+":
        sites = []
        faces = all_faces(d)
        sums = face_sums(d, faces)
        marked = _marked_keys(d, faces)
        dm = dart_map(d)
        for key in sorted(k for k in faces if k[0] == "d"):
            if sums[key] != 0 or key in marked:
                continue
            orbit = faces[key]
            for de in orbit:
                for df in orbit:
                    if de == df or dm[de][0] == dm[df][0]:
                        continue
                    for mode in ("over", "under"):
                        sites.append(MoveSite(kind, (de, df, mode)))
        return sorted(sites, key=lambda s: s.data)
    if kind == "R2-":
        sites = []
        faces = all_faces(d)
        for key in sorted(k for k in faces if k[0] == "d"):
            orbit = faces[key]
            if len(orbit) != 2:
                continue
            (c1, a), (c2, b) = orbit
            try:
                _check_r2_minus(d, (c1, a, c2, b))
            except IllegalMove:
                continue
            sites.append(MoveSite(kind, (c1, a, c2, b)))
        return sites
    if kind in ("R3", "PR3"):
        sites = []
        faces = all_faces(d)
        for key in sorted(k for k in faces if k[0] == "d"):
            orbit = faces[key]
            if len(orbit) != 3:
                continue
            for i in range(3):
                rot = (orbit[i], orbit[(i + 1) % 3], orbit[(i + 2) % 3])
                try:
                    _check_r3(d, rot, pre=(kind == "PR3"))
                except IllegalMove:
                    continue
                sites.append(MoveSite(kind, rot))
        return sorted(sites, key=lambda s: s.data)
    if kind == "MSlide":
        return [MoveSite(kind, (nid, k))
                for nid in sorted(d.nodes) for k in (1, -1)]
    if kind == "RayReroute":
        return [MoveSite(kind, (0,))]
    raise IllegalMove("unknown move kind %r" % kind)


# ---------------------------------------------------------------------------
# random walks


@dataclass(frozen=True)
class TraceStep:
    index: int
    kind: str
    signature: str
    fp_before: str
    fp_after: str


@dataclass
class MoveTrace:
    """Replayable record of a seeded walk through move space."""

    seed: int
    steps: List[TraceStep] = field(default_factory=list)
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    def render(self) -> str:
        lines = []
        events = {s.index: s for s in self.steps}
        skips = dict(self.skipped)
        for i in sorted(set(events) | set(skips)):
            if i in events:
                s = events[i]
                lines.append("step %d %s %s %s %s" %
                             (s.index, s.kind, s.signature,
                              s.fp_before, s.fp_after))
            else:
                lines.append("skip %d %s" % (i, skips[i]))
        return "\n".join(lines) + ("\n" if lines else "")


def random_walk(d: PuncturedDiagram, steps: int, seed: int,
                kinds: Sequence[str] = MOVE_KINDS
                ) -> Tuple[PuncturedDiagram, MoveTrace]:
    """A deterministic seeded sequence of moves.

    Growth moves are preferred on even steps and the rest on odd steps, and
    growth is cut off entirely once the diagram holds twice its initial
    number of crossings plus six, so walks cannot blow up.  Steps whose
    chosen kind has no legal site are recorded as skips.
    """
    rng = random.Random(seed)
    cap = 2 * len(d.crossings()) + 6
    trace = MoveTrace(seed)
    cur = d
    for i in range(steps):
        n = len(cur.crossings())
        allowed = [k for k in kinds
                   if k in MOVE_KINDS and (n < cap or k not in GROWTH_KINDS)]
        if not allowed:
            trace.skipped.append((i, "(none)"))
            continue
        grow = i % 2 == 0
        pool = [k for k in allowed if (k in GROWTH_KINDS) == grow] or allowed
        kind = rng.choice(pool)
        if kind == "RayReroute":
            site = MoveSite(kind, (rng.randrange(1 << 30),))
        else:
            sites = find_moves(cur, kind)
            if not sites:
                trace.skipped.append((i, kind))
                continue
            site = rng.choice(sites)
        fpb = fingerprint(cur)
        cur = apply_move(cur, site)
        trace.steps.append(TraceStep(i, kind, site.signature(),
                                     fpb, fingerprint(cur)))
    return cur, trace
