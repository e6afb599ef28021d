"""Canonical decomposition of a solved triangulation via tilts.

Every vertex of a geometric tetrahedron has a dual point in Minkowski
4-space: the unit space-like pole of its truncation plane, or a
light-cone point (a horoball choice) when the vertex is ideal.  The
four dual points of a tetrahedron span an affine hyperplane, encoded by
the vector w with <q_i, w> = 1; the tilt of a face is

    t(tet, face) = <w, n_face>

with n_face the outward unit normal.  Across a glued face the two
hyperplanes meet convexly (as seen from the dual hull of the whole
manifold) exactly when the tilt sum of the two sides is negative; a
zero sum means the hyperplanes agree and the two cells merge into one
convex block, and a positive sum means the triangulation is not
canonical there.  Canonicalization flips positive
faces with 2-3 moves and re-solves until every sum is non-positive,
then merges blocks across zero-tilt faces and emits a canonical
combinatorial signature of the resulting complex of polyhedra.

Cusped solutions carry one light-cone dual per ideal vertex, defined
only up to a horoball choice.  The canonical decomposition is the one
obtained in the limit of shrinking horoballs, so each tilt sum is
split as t(eps) = b + eps * a, where b collects the truncation-plane
duals and a the light-cone duals; the decisive quantity is the sign of
t(eps) for small eps > 0, i.e. the sign of b with ties broken by the
sign of a.  This is independent of the horoball scales.  A reference
scale (each cusp's horoball family expanded to its first tangency with
a truncation plane) fixes concrete coordinates and the reported sums.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .solver import GeometricSolution, solve_with_cusp_handoff
from .triangulation import EDGE_SLOT, EDGE_VERTS, Triangulation, trace_edge

#: Tilt sums within this band of zero merge blocks; above it they flip.
EPS_TILT = 1e-8
#: Vertex angle sums within this of pi mark ideal vertices.
IDEAL_TOL = 1e-6
#: Face-matching isometries must be Lorentz to this accuracy.
LORENTZ_TOL = 1e-7
#: Wedge angles within this of pi make adjacent block faces coplanar.
FLAT_TOL = 1e-7
#: Maximum number of 2-3 flips before giving up.
FLIP_CAP = 100
#: Fallback move search: maximum triangulations expanded.
SEARCH_NODE_CAP = 400
#: Fallback move search: headroom above the starting tetrahedron count.
SEARCH_EXTRA_TETS = 4
#: Fallback move search: Newton restarts when assessing a node.
SEARCH_RESTARTS = 4


class InconsistentSolutionError(ValueError):
    """The solution does not glue up within tolerance."""


class CanonicalizationError(ValueError):
    """The flip loop failed (re-solve failure or flip cap)."""

    def __init__(self, message: str, triangulation: Triangulation | None = None):
        super().__init__(message)
        self.triangulation = triangulation


@dataclass(frozen=True)
class FaceTilt:
    face: tuple[int, int]  # lexicographically smaller side (t, f)
    other: tuple[int, int]
    t1: float
    t2: float
    #: truncation-plane part of the tilt sum (the eps -> 0 limit)
    b: float = 0.0
    #: light-cone part of the tilt sum at the reference horoball scale
    a: float = 0.0

    @property
    def sum(self) -> float:
        return self.t1 + self.t2

    @property
    def limit_sign(self) -> int:
        """Sign of the tilt sum b + eps * a for small eps > 0: the sign
        of b, with ties broken by the sign of a.  For compact solutions
        a = 0 and this is just the sign of the tilt sum."""
        if self.b > EPS_TILT:
            return 1
        if self.b < -EPS_TILT:
            return -1
        if self.a > EPS_TILT:
            return 1
        if self.a < -EPS_TILT:
            return -1
        return 0


@dataclass(frozen=True)
class GluedRealization:
    triangulation: Triangulation
    angles: np.ndarray  # (n, 6)
    duals: np.ndarray  # (n, 4, 4) vertex duals, cusp scales applied
    normals: np.ndarray  # (n, 4, 4) outward unit face normals
    tilt_points: np.ndarray  # (n, 4) dual w of the affine span: <q_i, w> = 1
    plane_points: np.ndarray  # (n, 4) <q_i, w> = 1 on material, 0 on ideal
    cusp_points: np.ndarray  # (n, 4) <q_i, w> = 0 on material, 1 on ideal
    ideal_vertices: frozenset[tuple[int, int]]
    base: int = 0

    def face_isometry(self, t: int, f: int) -> np.ndarray:
        """Lorentz map taking the glued neighbour of face (t, f) onto its
        position against tetrahedron t."""
        return _face_isometry(self, t, f)


@dataclass(frozen=True)
class KojimaDecomposition:
    triangulation: Triangulation  # final, possibly flipped
    angles: np.ndarray
    tilts: tuple[FaceTilt, ...]
    blocks: tuple[frozenset[int], ...]
    merged_faces: frozenset[tuple[int, int]]
    block_shapes: tuple[str, ...]
    signature: bytes
    converged: bool
    flip_trace: tuple[tuple[int, int], ...]
    #: True when the greedy flip loop stalled and the final triangulation
    #: was found by the bounded search over 2-3/3-2 moves instead.
    searched: bool = False


@dataclass(frozen=True)
class ManifoldId:
    signature: bytes
    cusps: int
    genus_vector: tuple[int, ...]

    def as_text(self) -> str:
        return (
            f"{self.signature.hex()}:c{self.cusps}:g"
            + ",".join(map(str, self.genus_vector))
        )


# ---------------------------------------------------------------------------
# glued realization


def _ideal_vertex_set(angles: np.ndarray) -> frozenset[tuple[int, int]]:
    out = set()
    for t in range(angles.shape[0]):
        sums = geo.vertex_angle_sums(angles[t])
        for v in range(4):
            if abs(sums[v] - math.pi) <= IDEAL_TOL:
                out.add((t, v))
    return frozenset(out)


def _cusp_scale_factors(
    tri: Triangulation,
    duals: np.ndarray,
    ideal: frozenset[tuple[int, int]],
) -> dict[tuple[int, int], float]:
    """Per ideal vertex, the factor making light-cone duals match across
    every glued face, normalized per cusp by first horoball tangency.

    The face-matching isometries preserve Minkowski products, so for
    each glued face and each pair of its corners the product of the two
    (scaled) duals must agree between the two sides.  In logarithms this
    is a linear system in the unknown scales, consistent up to one free
    global factor per cusp; the least-squares solution is exact.
    """
    if not ideal:
        return {}
    index = {tv: i for i, tv in enumerate(sorted(ideal))}
    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def product(t: int, u: int, w: int) -> float:
        return geo.minkowski_dot(duals[t, u], duals[t, w])

    for t in range(tri.tet_count):
        for f in range(4):
            t2, f2, perm = tri.gluing(t, f)
            if (t2, f2) < (t, f):
                continue
            corners = [v for v in range(4) if v != f]
            for i in range(3):
                for j in range(i + 1, 3):
                    u, w = corners[i], corners[j]
                    coeffs = np.zeros(len(index))
                    involved = False
                    for tv, sign in (
                        ((t, u), 1.0),
                        ((t, w), 1.0),
                        ((t2, perm[u]), -1.0),
                        ((t2, perm[w]), -1.0),
                    ):
                        if tv in index:
                            coeffs[index[tv]] += sign
                            involved = True
                    if not involved:
                        continue
                    lhs = product(t, u, w)
                    rhs_val = product(t2, perm[u], perm[w])
                    if abs(lhs) < 1e-13 or abs(rhs_val) < 1e-13:
                        raise InconsistentSolutionError(
                            "degenerate dual product while scaling cusp duals"
                        )
                    rows.append(coeffs)
                    rhs.append(math.log(abs(rhs_val)) - math.log(abs(lhs)))
    logs = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    scales = {tv: math.exp(logs[i]) for tv, i in index.items()}
    # one free factor per cusp: expand until the first tangency with a
    # truncation plane (|<light point, unit pole>| = 1)
    for tvs in tri.boundary_membership():
        members = [tv for tv in tvs if tv in scales]
        if not members:
            continue
        tangency = 0.0
        for t, v in members:
            for u in range(4):
                if u == v or (t, u) in ideal:
                    continue
                tangency = max(
                    tangency,
                    abs(geo.minkowski_dot(scales[(t, v)] * duals[t, v], duals[t, u])),
                )
        if tangency <= 0.0:
            raise InconsistentSolutionError(
                "cusp has no adjacent truncation plane to normalize against"
            )
        for tv in members:
            scales[tv] /= tangency
    return scales


def glue_realizations(tri: Triangulation, sol: GeometricSolution) -> GluedRealization:
    """Realize every tetrahedron and certify that the face gluings are
    Minkowski isometries (the geometric consistency of the solution)."""
    if not sol.success:
        raise InconsistentSolutionError("solution did not converge")
    n = tri.tet_count
    angles = np.asarray(sol.angles, dtype=float)
    duals = np.empty((n, 4, 4))
    normals = np.empty((n, 4, 4))
    for t in range(n):
        r = geo.realize(angles[t])
        duals[t] = r.vertex_duals
        normals[t] = r.face_normals
    ideal = _ideal_vertex_set(angles)
    for (t, v), s in _cusp_scale_factors(tri, duals, ideal).items():
        duals[t, v] *= s
    # the point w dual to the affine hyperplane carrying the four dual
    # points; two glued tetrahedra have a zero tilt sum exactly when
    # their hyperplanes agree (one convex block).  The split into a
    # plane part and a cusp part tracks how the tilt varies when the
    # horoballs shrink: scaling a cusp's light duals by s divides its
    # contribution to w by s, so tilts are b + a / s with b from the
    # plane part and a from the cusp part at the reference scale.
    tilt_points = np.empty((n, 4))
    plane_points = np.empty((n, 4))
    cusp_points = np.empty((n, 4))
    for t in range(n):
        system = duals[t] @ geo.MINKOWSKI
        light = np.array([1.0 if (t, v) in ideal else 0.0 for v in range(4)])
        plane_points[t] = np.linalg.solve(system, 1.0 - light)
        cusp_points[t] = np.linalg.solve(system, light)
        tilt_points[t] = plane_points[t] + cusp_points[t]
    glued = GluedRealization(
        tri, angles, duals, normals, tilt_points, plane_points, cusp_points, ideal
    )
    for t in range(n):
        for f in range(4):
            t2, f2, _perm = tri.gluing(t, f)
            if (t2, f2) < (t, f):
                continue
            iso = _face_isometry(glued, t, f)
            err = np.abs(iso.T @ geo.MINKOWSKI @ iso - geo.MINKOWSKI).max()
            if err > LORENTZ_TOL:
                raise InconsistentSolutionError(
                    f"face ({t},{f}) gluing is not a Lorentz map (error {err:.2e})"
                )
    return glued


def _face_isometry(g: GluedRealization, t: int, f: int) -> np.ndarray:
    """The Lorentz map placing the neighbour across face (t, f) next to
    tetrahedron t: corner duals onto corner duals, outward normal onto
    the inward normal."""
    t2, f2, perm = g.triangulation.gluing(t, f)
    corners = [v for v in range(4) if v != f]
    ours = np.column_stack([g.duals[t, v] for v in corners] + [-g.normals[t, f]])
    theirs = np.column_stack(
        [g.duals[t2, perm[v]] for v in corners] + [g.normals[t2, f2]]
    )
    return ours @ np.linalg.inv(theirs)


# ---------------------------------------------------------------------------
# tilts


def _tilt(g: GluedRealization, t: int, f: int) -> float:
    return geo.minkowski_dot(g.tilt_points[t], g.normals[t, f])


def compute_tilts(g: GluedRealization) -> list[FaceTilt]:
    """One FaceTilt per glued face pair; limit_sign < 0 is locally
    canonical, 0 merges the two hulls, > 0 demands a flip."""
    tri = g.triangulation
    out = []
    for t in range(tri.tet_count):
        for f in range(4):
            t2, f2, _perm = tri.gluing(t, f)
            if (t2, f2) < (t, f):
                continue
            b = geo.minkowski_dot(g.plane_points[t], g.normals[t, f]) + (
                geo.minkowski_dot(g.plane_points[t2], g.normals[t2, f2])
            )
            a = geo.minkowski_dot(g.cusp_points[t], g.normals[t, f]) + (
                geo.minkowski_dot(g.cusp_points[t2], g.normals[t2, f2])
            )
            out.append(
                FaceTilt((t, f), (t2, f2), _tilt(g, t, f), _tilt(g, t2, f2), b, a)
            )
    return out


# ---------------------------------------------------------------------------
# block assembly


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _merged_face_set(
    tri: Triangulation, tilts: list[FaceTilt]
) -> frozenset[tuple[int, int]]:
    merged = set()
    for ft in tilts:
        if ft.limit_sign == 0:
            merged.add(ft.face)
            merged.add(ft.other)
    return frozenset(merged)


@dataclass(frozen=True)
class _BlockComplex:
    """Boundary combinatorics of the merged blocks.

    ``side_partner`` glues the directed sides of external (non-merged)
    faces to each other around the polyhedron edges; ``flat`` marks the
    gluings whose wedge is a straight angle (coplanar faces, interior to
    a polygon of the block).  A directed side is (tet, face, a, b): the
    edge from vertex a to vertex b on face (tet, face).
    """

    tri: Triangulation
    blocks: tuple[frozenset[int], ...]
    merged: frozenset[tuple[int, int]]
    side_partner: dict[tuple[int, int, int, int], tuple[int, int, int, int]]
    flat: frozenset[frozenset[tuple[int, int, int, int]]]

    def is_flat(self, side_a, side_b) -> bool:
        return frozenset((side_a, side_b)) in self.flat


def _assemble_blocks(
    tri: Triangulation,
    angles: np.ndarray,
    merged: frozenset[tuple[int, int]],
) -> _BlockComplex:
    n = tri.tet_count
    uf = _UnionFind(range(n))
    for t, f in merged:
        uf.union(t, tri.gluing(t, f)[0])
    groups: dict[int, set[int]] = {}
    for t in range(n):
        groups.setdefault(uf.find(t), set()).add(t)
    blocks = tuple(frozenset(g) for _root, g in sorted(groups.items()))

    # walk every edge class once; split its cycle into runs separated by
    # external (non-merged) crossings
    side_partner: dict[tuple[int, int, int, int], tuple[int, int, int, int]] = {}
    flat: set[frozenset[tuple[int, int, int, int]]] = set()
    seen_slots: set[tuple[int, int]] = set()
    for t0 in range(n):
        for s0 in range(6):
            if (t0, s0) in seen_slots:
                continue
            a0, b0 = EDGE_VERTS[s0]
            cycle = trace_edge(tri._glu, t0, a0, b0)
            if cycle is None:
                raise InconsistentSolutionError("open edge class")
            for t, a, b, _x in cycle:
                seen_slots.add((t, EDGE_SLOT[(a, b)]))
            external = [
                i for i, (t, a, b, x) in enumerate(cycle) if (t, x) not in merged
            ]
            if not external:
                continue  # edge interior to one block
            m = len(cycle)
            for pos, i in enumerate(external):
                j = external[(pos + 1) % len(external)]
                # run from the face after crossing i to the crossing j
                t_i, a_i, b_i, x_i = cycle[i]
                t_j, a_j, b_j, x_j = cycle[j]
                wedge = 0.0
                k = (i + 1) % m
                while True:
                    tt, aa, bb, _xx = cycle[k]
                    wedge += angles[tt, EDGE_SLOT[(aa, bb)]]
                    if k == j:
                        break
                    k = (k + 1) % m
                # the run glues side (a, b) of the face we crossed out of
                # at i to side (a, b) of the face we cross out of at j
                entry = _entry_side(tri, cycle[i])
                exit_ = (t_j, x_j, a_j, b_j)
                side_partner[entry] = exit_
                side_partner[exit_] = entry
                side_partner[_rev(entry)] = _rev(exit_)
                side_partner[_rev(exit_)] = _rev(entry)
                if abs(wedge - math.pi) <= FLAT_TOL:
                    flat.add(frozenset((entry, exit_)))
                    flat.add(frozenset((_rev(entry), _rev(exit_))))
    return _BlockComplex(tri, blocks, merged, side_partner, frozenset(flat))


def _rev(side):
    t, f, a, b = side
    return (t, f, b, a)


def _entry_side(tri: Triangulation, state) -> tuple[int, int, int, int]:
    """The directed side on the far copy of the external face crossed by
    a trace step, carrying the edge direction along."""
    t, a, b, x = state
    t2, x2, perm = tri.gluing(t, x)
    return (t2, x2, perm[a], perm[b])


def _polygons(bc: _BlockComplex) -> dict[tuple[int, int], int]:
    """Map each external face to a polygon id (coplanar faces merged)."""
    tri = bc.tri
    external = [
        (t, f)
        for t in range(tri.tet_count)
        for f in range(4)
        if (t, f) not in bc.merged
    ]
    uf = _UnionFind(external)
    for pair in bc.flat:
        (t1, f1, _a1, _b1), (t2, f2, _a2, _b2) = sorted(pair)
        uf.union((t1, f1), (t2, f2))
    roots = sorted({uf.find(x) for x in external})
    root_id = {r: i for i, r in enumerate(roots)}
    return {x: root_id[uf.find(x)] for x in external}


def _next_side(bc: _BlockComplex, side) -> tuple[int, int, int, int]:
    """Successor of a directed side along its polygon boundary: rotate
    around the end vertex through coplanar gluings until the next
    genuinely bent side."""
    t, f, a, b = side
    pivot, other = b, 6 - f - a - b  # rotate around the end vertex b
    for _guard in range(64):
        candidate = (t, f, pivot, other)
        partner = bc.side_partner[candidate]
        if not bc.is_flat(candidate, partner):
            return candidate
        t, f, pivot, crossed = partner
        other = 6 - f - pivot - crossed
    raise InconsistentSolutionError("polygon walk failed to close")


def _shape_tag(sizes: list[int], tets: int) -> str:
    sizes = sorted(sizes)
    if tets == 1 and sizes == [3, 3, 3, 3]:
        return "tetrahedron"
    if tets == 2 and sizes == [3, 3, 3, 3, 4]:
        return "square pyramid"
    if tets == 4 and sizes == [3, 3, 3, 3, 3, 3, 3, 3]:
        return "octahedron"
    return "other(" + ",".join(map(str, sizes)) + f";{tets}t)"


def _block_signature(bc: _BlockComplex) -> bytes:
    """Canonical byte encoding of the complex of blocks.

    Flags are the directed sides of polygon boundaries.  Four
    deterministic moves connect them: reversal, the polygon-boundary
    successor, the wedge partner around a polyhedron edge, and the face
    pairing of the original gluing.  A breadth-first relabeling from
    every possible start flag encodes the four moves as index tables;
    the lexicographically smallest encoding is invariant under any
    relabeling of the triangulation.
    """
    tri = bc.tri
    flags = sorted(s for s in bc.side_partner if not bc.is_flat(s, bc.side_partner[s]))
    if not flags:
        return b"closed"

    def pair_move(side):
        t, f, a, b = side
        t2, f2, perm = tri.gluing(t, f)
        return (t2, f2, perm[a], perm[b])

    def succ(s):
        return _next_side(bc, s)

    def pred(s):
        # a mirror homeomorphism turns the boundary successor into the
        # predecessor; minimizing over both makes the signature invariant
        # under orientation reversal
        return _rev(_next_side(bc, _rev(s)))

    best: bytes | None = None
    for walker in (succ, pred):
        moves = (_rev, walker, lambda s: bc.side_partner[s], pair_move)
        for start in flags:
            order: dict[tuple[int, int, int, int], int] = {start: 0}
            queue = [start]
            code: list[int] = []
            qi = 0
            while qi < len(queue):
                s = queue[qi]
                qi += 1
                for mv in moves:
                    target = mv(s)
                    if target not in order:
                        order[target] = len(queue)
                        queue.append(target)
                    code.append(order[target])
            enc = len(flags).to_bytes(4, "big") + b"".join(
                c.to_bytes(2, "big") for c in code
            )
            if best is None or enc < best:
                best = enc
    return best


# ---------------------------------------------------------------------------
# canonicalization


def _flat_four_four(
    tri: Triangulation, g: GluedRealization, t: int, f: int
) -> Triangulation | None:
    """Resolve a degenerate 2-3 flip by a 4-4 move.

    When the line between the two apexes of the bipyramid over face
    (t, f) crosses one of the three equator edges, the middle
    tetrahedron of the 2-3 flip is flat (its four duals are linearly
    dependent) and the flipped triangulation is not geometric.  The
    remedy is to retriangulate the bipyramid pair across the crossed
    edge: perform the 2-3 move combinatorially, then collapse the flat
    tetrahedron with a 3-2 move around its apex-apex edge.  Returns
    None when no equator edge is flat or the 3-2 move is not available.
    """
    t2, f2, _perm = tri.gluing(t, f)
    far = _face_isometry(g, t, f) @ g.duals[t2, f2]
    corners = sorted(v for v in range(4) if v != f)
    flat_corner = None
    for w in corners:
        x, y = (v for v in corners if v != w)
        quad = np.array([g.duals[t, f], far, g.duals[t, x], g.duals[t, y]])
        if abs(np.linalg.det(quad)) < EPS_TILT:
            flat_corner = w
    if flat_corner is None:
        return None
    flipped = tri.move_2_3(t, f)
    # the three new tetrahedra sit at sorted([t, t2]) + [n], one per
    # equator vertex in corner order; the flat one omits flat_corner,
    # and its apex-apex edge is vertices (2, 3) by the move's labeling
    slots = sorted([t, t2]) + [tri.tet_count]
    flat_tet = slots[corners.index(flat_corner)]
    target = (flat_tet, EDGE_SLOT[(2, 3)])
    for ec in flipped.edge_classes():
        if any((tt, ss) == target for tt, ss, _fl in ec.incidences):
            if ec.valence != 3 or len({tt for tt, _ss, _fl in ec.incidences}) != 3:
                return None
            return flipped.move_3_2(ec)
    return None


def _assemble_decomposition(
    current: Triangulation,
    glued: GluedRealization,
    tilts: list[FaceTilt],
    trace: list[tuple[int, int]],
    searched: bool = False,
) -> KojimaDecomposition:
    merged = _merged_face_set(current, tilts)
    bc = _assemble_blocks(current, glued.angles, merged)
    polygon_of = _polygons(bc)
    block_of_face = {}
    block_index = {}
    for i, blk in enumerate(bc.blocks):
        for t in blk:
            block_index[t] = i
    poly_sizes: dict[int, set] = {}
    for side in bc.side_partner:
        t, f, a, b = side
        pid = polygon_of[(t, f)]
        if not bc.is_flat(side, bc.side_partner[side]):
            poly_sizes.setdefault(pid, set()).add((t, f, frozenset((a, b))))
    sizes_per_block: dict[int, list[int]] = {}
    for (t, f), pid in polygon_of.items():
        block_of_face[pid] = block_index[t]
    for pid, sides in poly_sizes.items():
        sizes_per_block.setdefault(block_of_face[pid], []).append(len(sides))
    shapes = tuple(
        _shape_tag(sizes_per_block.get(i, []), len(blk))
        for i, blk in enumerate(bc.blocks)
    )
    return KojimaDecomposition(
        current,
        glued.angles,
        tuple(tilts),
        bc.blocks,
        merged,
        shapes,
        _block_signature(bc),
        True,
        tuple(trace),
        searched,
    )


def _assess_node(tri: Triangulation, vol0: float):
    """(count of limit-positive faces, solution, realization, tilts) for
    a combinatorial move-search node, or Nones when the node has no
    consistent geometric solution of the expected volume."""
    sol = solve_with_cusp_handoff(tri, restarts=SEARCH_RESTARTS)
    if not sol.success or abs(sol.volume() - vol0) > 1e-7:
        return None, None, None, None
    try:
        glued = glue_realizations(tri, sol)
    except InconsistentSolutionError:
        return None, None, None, None
    tilts = compute_tilts(glued)
    return sum(1 for ft in tilts if ft.limit_sign > 0), sol, glued, tilts


def _move_search(tri: Triangulation, sol: GeometricSolution):
    """Bounded best-first search over 2-3/3-2 moves for a triangulation
    with no limit-positive tilts.

    The greedy flip loop can stall when every positive face has a
    degenerate bipyramid (the apex-apex segment leaves through an
    equator edge or vertex): the canonical decomposition still has a
    subdividing triangulation, but every path of moves to it passes
    through non-geometric triangulations.  Moves preserve the manifold
    combinatorially, so intermediate nodes need not be geometric; nodes
    are prioritized by their count of limit-positive faces (non-geometric
    nodes last), and the first node with none is the answer, certified
    by its own tilt signs independently of the path.  Returns
    (triangulation, realization, tilts) or None if the budget runs out.
    """
    vol0 = sol.volume()
    max_tets = tri.tet_count + SEARCH_EXTRA_TETS
    counter = itertools.count()
    seen = {tri.iso_signature().canonical_form}
    heap = [((0, tri.tet_count), next(counter), tri)]
    expanded = 0
    while heap and expanded < SEARCH_NODE_CAP:
        _prio, _c, cur = heapq.heappop(heap)
        expanded += 1
        neighbours = []
        if cur.tet_count < max_tets:
            for t in range(cur.tet_count):
                for f in range(4):
                    t2, f2, _perm = cur.gluing(t, f)
                    if (t2, f2) <= (t, f) or t2 == t:
                        continue
                    neighbours.append(cur.move_2_3(t, f))
        for ec in cur.edge_classes():
            if ec.valence == 3 and len({tt for tt, _s, _fl in ec.incidences}) == 3:
                neighbours.append(cur.move_3_2(ec))
        for nxt in neighbours:
            key = nxt.iso_signature().canonical_form
            if key in seen:
                continue
            seen.add(key)
            pos, _ns, glued, tilts = _assess_node(nxt, vol0)
            if pos == 0:
                return nxt, glued, tilts
            prio = (99, nxt.tet_count) if pos is None else (pos, nxt.tet_count)
            heapq.heappush(heap, (prio, next(counter), nxt))
    return None


def canonicalize(
    tri: Triangulation,
    sol: GeometricSolution,
    *,
    solver=solve_with_cusp_handoff,
) -> KojimaDecomposition:
    """Flip positive-tilt faces until the triangulation subdivides the
    canonical decomposition, then merge zero-tilt faces into blocks."""
    current = tri
    current_sol = sol
    trace: list[tuple[int, int]] = []
    for _step in range(FLIP_CAP + 1):
        glued = glue_realizations(current, current_sol)
        tilts = compute_tilts(glued)
        positive = [ft for ft in tilts if ft.limit_sign > 0]
        if not positive:
            return _assemble_decomposition(current, glued, tilts, trace)
        flipped = None
        failure = "positive tilt on a self-glued face cannot be flipped"
        for ft in sorted(positive, key=lambda x: (x.b, x.a, x.face), reverse=True):
            t, f = ft.face
            t2, _f2, _perm = current.gluing(t, f)
            if t2 == t:
                continue
            candidate = current.move_2_3(t, f)
            new_sol = solver(candidate)
            if not new_sol.success:
                # a flat middle tetrahedron makes the flipped
                # triangulation non-geometric; retriangulate with a 4-4
                # move across the flat diagonal instead
                failure = f"re-solve failed after flipping ({t},{f}): {new_sol.failure}"
                alt = _flat_four_four(current, glued, t, f)
                if alt is None:
                    continue
                candidate = alt
                new_sol = solver(candidate)
                if not new_sol.success:
                    continue
            if abs(new_sol.volume() - current_sol.volume()) > 1e-7:
                failure = "volume drifted across a flip; solutions inconsistent"
                continue
            flipped = candidate
            trace.append((t, f))
            break
        if flipped is None:
            found = _move_search(current, current_sol)
            if found is None:
                raise CanonicalizationError(failure, current)
            final, glued, tilts = found
            return _assemble_decomposition(final, glued, tilts, trace, searched=True)
        current, current_sol = flipped, new_sol
    raise CanonicalizationError(
        f"no canonical decomposition after {FLIP_CAP} flips", current
    )


def manifold_id(k: KojimaDecomposition, tri: Triangulation | None = None) -> ManifoldId:
    """Equality certificate: equal ids exactly for homeomorphic manifolds."""
    if not k.converged:
        raise CanonicalizationError("cannot derive an id from a non-converged run")
    source = tri if tri is not None else k.triangulation
    b = source.boundary()
    genus = tuple(
        sorted((c.genus for c in b.components if c.euler_characteristic < 0), reverse=True)
    )
    cusps = sum(1 for c in b.components if c.euler_characteristic == 0)
    return ManifoldId(k.signature, cusps, genus)
