"""Combinatorial ideal triangulations given by face pairings.

A triangulation of ``n`` tetrahedra glues all ``4n`` triangular faces in
pairs.  Faces are indexed by the opposite vertex: face ``f`` of a
tetrahedron is the triangle spanned by the three vertices other than
``f``.  A gluing of face ``(t, f)`` to ``(t2, f2)`` carries a vertex
bijection ``perm`` of {0,1,2,3} with ``perm[f] == f2``; its restriction
to the face corners is the actual simplicial identification.

The compact manifold is obtained by truncating all tetrahedron vertices,
so the boundary surface is tiled by the ``4n`` truncation triangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .perms import (
    ALL,
    EVEN,
    IDENTITY,
    ODD,
    INDEX,
    PARITY,
    Perm,
    compose,
    invert,
)

#: Vertex pairs of the six edges of a tetrahedron, in slot order.
EDGE_VERTS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

#: Slot of the edge joining two distinct vertices.
EDGE_SLOT: dict[tuple[int, int], int] = {}
for _s, (_a, _b) in enumerate(EDGE_VERTS):
    EDGE_SLOT[(_a, _b)] = _s
    EDGE_SLOT[(_b, _a)] = _s

#: Slot of the opposite edge (disjoint vertex pair).
OPPOSITE_EDGE: tuple[int, ...] = (5, 4, 3, 2, 1, 0)

#: For each face nf, a fixed odd permutation fixing nf, used to normalize
#: gluing perms when canonicalizing oriented triangulations.
_FORCED_ODD: tuple[Perm, ...] = ((0, 2, 1, 3), (2, 1, 0, 3), (1, 0, 2, 3), (1, 0, 2, 3))


class TriangulationError(ValueError):
    """Raised for malformed gluing data or inapplicable moves."""


Gluing = tuple[int, int, Perm]  # (target tet, target face, vertex bijection)


@dataclass(frozen=True)
class EdgeClass:
    """One edge of the glued manifold.

    ``incidences`` lists the tetrahedron edge slots around the edge in
    cyclic order; ``flip`` is True when the slot is traversed against
    its (low vertex -> high vertex) direction.  ``valence`` is the
    incidence count.
    """

    incidences: tuple[tuple[int, int, bool], ...]  # (tet, slot, flip)

    @property
    def valence(self) -> int:
        return len(self.incidences)

    def tets(self) -> set[int]:
        return {t for t, _, _ in self.incidences}


@dataclass(frozen=True)
class BoundaryComponent:
    euler_characteristic: int
    genus: int
    triangle_count: int
    orientable: bool


@dataclass(frozen=True)
class BoundarySurface:
    components: tuple[BoundaryComponent, ...]

    @property
    def total_chi(self) -> int:
        return sum(c.euler_characteristic for c in self.components)

    def genus_vector(self) -> tuple[int, ...]:
        """Genera of the non-torus components, descending."""
        return tuple(sorted((c.genus for c in self.components if c.genus != 1), reverse=True))

    def cusp_candidates(self) -> int:
        """Number of torus components (chi = 0)."""
        return sum(1 for c in self.components if c.euler_characteristic == 0)


@dataclass(frozen=True)
class IsoSignature:
    canonical_form: bytes

    def hex(self) -> str:
        return self.canonical_form.hex()


class Triangulation:
    """An ideal triangulation with all faces glued in pairs.

    Immutable after construction; all derived data is cached.
    """

    def __init__(self, tet_count: int, gluings: dict[tuple[int, int], Gluing]):
        if tet_count < 1:
            raise TriangulationError("tet_count must be positive")
        self.tet_count = tet_count
        glu: list[list[Gluing | None]] = [[None] * 4 for _ in range(tet_count)]
        for (t, f), (t2, f2, perm) in gluings.items():
            if not (0 <= t < tet_count and 0 <= f < 4):
                raise TriangulationError(f"face ({t},{f}) out of range")
            if not (0 <= t2 < tet_count and 0 <= f2 < 4):
                raise TriangulationError(f"face ({t2},{f2}) out of range")
            if perm not in INDEX:
                raise TriangulationError(f"invalid permutation {perm!r}")
            if perm[f] != f2:
                raise TriangulationError(
                    f"gluing ({t},{f})->({t2},{f2}): perm {perm} does not map {f} to {f2}"
                )
            if (t, f) == (t2, f2):
                raise TriangulationError(f"face ({t},{f}) glued to itself")
            glu[t][f] = (t2, f2, perm)
        for t in range(tet_count):
            for f in range(4):
                g = glu[t][f]
                if g is None:
                    raise TriangulationError(f"face ({t},{f}) is unglued")
                t2, f2, perm = g
                back = glu[t2][f2]
                if back is None or back[:2] != (t, f) or back[2] != invert(perm):
                    raise TriangulationError(
                        f"gluing of ({t},{f}) is not matched by an inverse gluing of ({t2},{f2})"
                    )
        self._glu: tuple[tuple[Gluing, ...], ...] = tuple(tuple(row) for row in glu)  # type: ignore[arg-type]
        if not self._connected():
            raise TriangulationError("triangulation is not connected")
        self._edge_classes: tuple[EdgeClass, ...] | None = None
        self._boundary: BoundarySurface | None = None
        self._boundary_membership: tuple[tuple[tuple[int, int], ...], ...] | None = None
        self._signatures: dict[bool, IsoSignature] = {}

    # -- basic access -------------------------------------------------

    def gluing(self, tet: int, face: int) -> Gluing:
        return self._glu[tet][face]

    def gluing_table(self) -> dict[tuple[int, int], Gluing]:
        return {(t, f): self._glu[t][f] for t in range(self.tet_count) for f in range(4)}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Triangulation) and self._glu == other._glu

    def __hash__(self) -> int:
        return hash(self._glu)

    def __repr__(self) -> str:
        return f"Triangulation(n={self.tet_count})"

    def _connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            t = stack.pop()
            for f in range(4):
                t2 = self._glu[t][f][0]
                if t2 not in seen:
                    seen.add(t2)
                    stack.append(t2)
        return len(seen) == self.tet_count

    # -- edge classes ---------------------------------------------------

    def edge_classes(self) -> tuple[EdgeClass, ...]:
        """Partition of the 6n tetrahedron edge slots into manifold edges.

        Raises TriangulationError if some edge is identified with itself
        in reverse (the gluing does not yield a manifold).
        """
        if self._edge_classes is not None:
            return self._edge_classes
        classes = []
        seen: set[tuple[int, int]] = set()
        for t0 in range(self.tet_count):
            for s0 in range(6):
                if (t0, s0) in seen:
                    continue
                a0, b0 = EDGE_VERTS[s0]
                cyc = trace_edge(self._glu, t0, a0, b0)
                if cyc is None:
                    raise TriangulationError(
                        f"edge slot ({t0},{s0}) is identified with itself in reverse"
                    )
                inc = []
                for t, a, b, _x in cyc:
                    slot = EDGE_SLOT[(a, b)]
                    if (t, slot) in seen:
                        raise TriangulationError(
                            f"edge slot ({t},{slot}) appears twice around one edge"
                        )
                    seen.add((t, slot))
                    inc.append((t, slot, a > b))
                classes.append(EdgeClass(tuple(inc)))
        self._edge_classes = tuple(classes)
        return self._edge_classes

    def edge_class_of(self) -> dict[tuple[int, int], int]:
        """Map (tet, slot) -> index into edge_classes()."""
        out = {}
        for i, ec in enumerate(self.edge_classes()):
            for t, s, _ in ec.incidences:
                out[(t, s)] = i
        return out

    # -- orientability ----------------------------------------------------

    def orientation_signs(self) -> tuple[int, ...] | None:
        """Per-tetrahedron signs +-1 making all gluings orientation
        reversing on faces, or None if impossible."""
        sign = [0] * self.tet_count
        sign[0] = 1
        stack = [0]
        while stack:
            t = stack.pop()
            for f in range(4):
                t2, _, perm = self._glu[t][f]
                # odd vertex bijection <=> compatible equal signs
                want = sign[t] if PARITY[INDEX[perm]] == 1 else -sign[t]
                if sign[t2] == 0:
                    sign[t2] = want
                    stack.append(t2)
                elif sign[t2] != want:
                    return None
        return tuple(sign)

    def is_orientable(self) -> bool:
        return self.orientation_signs() is not None

    # -- boundary surface -------------------------------------------------

    def boundary(self) -> BoundarySurface:
        """The truncation boundary surface, one triangle per (tet, vertex)."""
        if self._boundary is not None:
            return self._boundary
        n = self.tet_count
        tri_ids = {(t, v): i for i, (t, v) in enumerate((t, v) for t in range(n) for v in range(4))}
        parent = list(range(4 * n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x: int, y: int) -> None:
            parent[find(x)] = find(y)

        # Corner of the truncation triangle at vertex v toward vertex w.
        corner_ids: dict[tuple[int, int, int], int] = {}
        for t in range(n):
            for v in range(4):
                for w in range(4):
                    if w != v:
                        corner_ids[(t, v, w)] = len(corner_ids)
        cparent = list(range(len(corner_ids)))

        def cfind(x: int) -> int:
            while cparent[x] != x:
                cparent[x] = cparent[cparent[x]]
                x = cparent[x]
            return x

        def cunion(x: int, y: int) -> None:
            cparent[cfind(x)] = cfind(y)

        # Sides: the side of triangle (t, v) lying in face f (f != v) is
        # glued to the side of (t2, perm[v]) lying in face perm[f].
        side_seen: set[tuple[int, int, int]] = set()
        side_count = 0
        for t in range(n):
            for f in range(4):
                t2, f2, perm = self._glu[t][f]
                for v in range(4):
                    if v == f:
                        continue
                    union(tri_ids[(t, v)], tri_ids[(t2, perm[v])])
                    key = min((t, v, f), (t2, perm[v], f2))
                    if key not in side_seen:
                        side_seen.add(key)
                        side_count += 1
                    for w in range(4):
                        if w != v and w != f:
                            cunion(corner_ids[(t, v, w)], corner_ids[(t2, perm[v], perm[w])])
        assert side_count == 6 * n

        # Orientability per component: orient triangle (t, v) by the even
        # cyclic order of its three corners; a side gluing between faces
        # must reverse the induced side orientation.
        orient: dict[int, int] = {}
        comp_orientable: dict[int, bool] = {}
        for root in {find(i) for i in range(4 * n)}:
            comp_orientable[root] = True
        order = {}
        for t in range(n):
            for v in range(4):
                others = [w for w in range(4) if w != v]
                order[(t, v)] = others  # reference cyclic order of corners
        start_done: set[int] = set()
        for t0 in range(n):
            for v0 in range(4):
                i0 = tri_ids[(t0, v0)]
                if find(i0) in start_done:
                    continue
                start_done.add(find(i0))
                orient[i0] = 1
                stack = [(t0, v0)]
                while stack:
                    t, v = stack.pop()
                    i = tri_ids[(t, v)]
                    for f in range(4):
                        if f == v:
                            continue
                        t2, _, perm = self._glu[t][f]
                        v2 = perm[v]
                        j = tri_ids[(t2, v2)]
                        # induced orientation: map corners w -> perm[w]
                        cyc = order[(t, v)]
                        img = [perm[w] for w in cyc]
                        ref = order[(t2, v2)]
                        # parity of img as arrangement of ref
                        pos = [ref.index(x) for x in img]
                        even = pos in ([0, 1, 2], [1, 2, 0], [2, 0, 1])
                        want = -orient[i] if even else orient[i]
                        if j not in orient:
                            orient[j] = want
                            stack.append((t2, v2))
                        elif orient[j] != want:
                            comp_orientable[find(j)] = False

        comps: dict[int, list[int]] = {}
        for t in range(n):
            for v in range(4):
                comps.setdefault(find(tri_ids[(t, v)]), []).append(tri_ids[(t, v)])
        comp_of_corner: dict[int, set[int]] = {}
        for (t, v, w), cid in corner_ids.items():
            comp_of_corner.setdefault(find(tri_ids[(t, v)]), set()).add(cfind(cid))
        comp_sides: dict[int, int] = {}
        for t, v, f in side_seen:
            root = find(tri_ids[(t, v)])
            comp_sides[root] = comp_sides.get(root, 0) + 1

        out = []
        membership = []
        for root, tris in sorted(comps.items(), key=lambda kv: (-len(kv[1]), min(kv[1]))):
            F = len(tris)
            E = comp_sides[root]
            V = len(comp_of_corner[root])
            chi = V - E + F
            ori = comp_orientable[root]
            genus = (2 - chi) // 2 if ori else (2 - chi)
            out.append(BoundaryComponent(chi, genus, F, ori))
            membership.append(tuple(sorted((i // 4, i % 4) for i in tris)))
        self._boundary = BoundarySurface(tuple(out))
        self._boundary_membership = tuple(membership)
        return self._boundary

    def boundary_membership(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """(tet, vertex) truncation triangles of each boundary component,
        aligned with ``boundary().components``."""
        if self._boundary_membership is None:
            self.boundary()
        assert self._boundary_membership is not None
        return self._boundary_membership

    # -- signatures ---------------------------------------------------------

    def iso_signature(self, respect_orientation: bool = False) -> IsoSignature:
        """Canonical form of the gluing map over all relabelings.

        With ``respect_orientation=False`` (the census default) two
        triangulations get equal signatures iff they are related by any
        relabeling; with True, only orientation-preserving relabelings
        are considered, so a chiral triangulation and its mirror differ.
        """
        if respect_orientation in self._signatures:
            return self._signatures[respect_orientation]
        best: bytes | None = None
        signs = self.orientation_signs() if respect_orientation else None
        for t0 in range(self.tet_count):
            if signs is None:
                roots = ALL
            else:
                # The canonical form has all gluing permutations odd, hence
                # consistent orientation signs.  Restricting the root
                # relabeling's parity by the tet's sign keeps only the
                # orientation-preserving isomorphisms onto it.
                roots = EVEN if signs[t0] > 0 else ODD
            for p0 in roots:
                enc = self._bfs_encoding(t0, p0, respect_orientation)
                if best is None or enc < best:
                    best = enc
        assert best is not None
        sig = IsoSignature(best)
        self._signatures[respect_orientation] = sig
        return sig

    def _bfs_encoding(self, t0: int, p0: Perm, oriented: bool) -> bytes:
        n = self.tet_count
        relab: list[Perm | None] = [None] * n  # old vertex labels -> new
        new_of_old = [-1] * n
        old_of_new = [-1] * n
        relab[t0] = p0
        new_of_old[t0] = 0
        old_of_new[0] = t0
        assigned = 1
        out = bytearray()
        k = 0
        while k < assigned:
            t = old_of_new[k]
            pt = relab[t]
            assert pt is not None
            ipt = invert(pt)
            for nf in range(4):
                of = ipt[nf]
                t2, _, sigma = self._glu[t][of]
                if new_of_old[t2] < 0:
                    # force the rewritten gluing perm to a fixed value
                    target = _FORCED_ODD[nf] if oriented else IDENTITY
                    # relab[t2] = target o pt o sigma^-1
                    relab[t2] = compose(invert(sigma), compose(pt, target))
                    new_of_old[t2] = assigned
                    old_of_new[assigned] = t2
                    assigned += 1
                p2 = relab[t2]
                assert p2 is not None
                sig_new = compose(compose(ipt, sigma), p2)
                out.append(new_of_old[t2])
                out.append(INDEX[sig_new])
            k += 1
        return bytes(out)

    # -- moves ----------------------------------------------------------------

    def move_2_3(self, tet: int, face: int) -> "Triangulation":
        """Replace the two tetrahedra glued along ``(tet, face)`` by three
        around a new valence-3 edge.  Represents the same manifold."""
        t0, f0 = tet, face
        t1, f1, sigma = self._glu[t0][f0]
        if t1 == t0:
            raise TriangulationError("move inapplicable: face glues a tetrahedron to itself")
        n = self.tet_count
        a0, a1 = f0, f1
        p, q, r = sorted(v for v in range(4) if v != f0)

        # New tetrahedra indexed by the omitted equator vertex, labelled
        # (0: apex a0, 1: apex a1, 2: low kept vertex, 3: high kept vertex).
        keep = {p: (q, r), q: (p, r), r: (p, q)}
        new_index = {p: 0, q: 1, r: 2}

        def tet_of(w: int) -> int:
            base = new_index[w]
            return _remap_new(base, t0, t1, n)

        # label map from t0's labels into new tet N_w
        maps0 = {}
        maps1 = {}
        for w in (p, q, r):
            x, y = keep[w]
            m0 = [0] * 4
            m0[a0], m0[w], m0[x], m0[y] = 0, 1, 2, 3
            maps0[w] = tuple(m0)
            m1 = [0] * 4
            m1[a1] = 1
            m1[sigma[w]], m1[sigma[x]], m1[sigma[y]] = 0, 2, 3
            maps1[w] = tuple(m1)

        gluings: dict[tuple[int, int], Gluing] = {}

        def add(t_a: int, f_a: int, t_b: int, f_b: int, perm: Perm) -> None:
            gluings[(t_a, f_a)] = (t_b, f_b, perm)
            gluings[(t_b, f_b)] = (t_a, f_a, invert(perm))

        # internal gluings between the three new tetrahedra
        add(tet_of(p), 2, tet_of(q), 2, (0, 1, 2, 3))
        add(tet_of(p), 3, tet_of(r), 2, (0, 1, 3, 2))
        add(tet_of(q), 3, tet_of(r), 3, (0, 1, 2, 3))

        # registry of the six external faces: old (tet, face) -> (new tet, new face, label map)
        registry: dict[tuple[int, int], tuple[int, int, Perm]] = {}
        for w in (p, q, r):
            registry[(t0, w)] = (tet_of(w), 1, maps0[w])
            registry[(t1, sigma[w])] = (tet_of(w), 0, maps1[w])

        def translate(t: int, f: int, lab: Perm) -> tuple[int, int, Perm]:
            """Rewrite a gluing endpoint (t, f) with incoming label map."""
            if (t, f) in registry:
                nt, nf, m = registry[(t, f)]
                return nt, nf, compose(lab, m)
            return _remap_old(t, t0, t1, n), f, lab

        done: set[tuple[int, int]] = set()
        # external faces of the bipyramid
        for (ot, of), (nt, nf, m) in registry.items():
            if (ot, of) in done:
                continue
            tt, tf, tau = self._glu[ot][of]
            t_b, f_b, lab = translate(tt, tf, compose(invert(m), tau))
            add(nt, nf, t_b, f_b, lab)
            done.add((ot, of))
            if (tt, tf) in registry:
                done.add((tt, tf))
        # untouched gluings
        for t in range(n):
            if t in (t0, t1):
                continue
            for f in range(4):
                tt, tf, tau = self._glu[t][f]
                if tt in (t0, t1):
                    continue  # already added from the registry side
                key = (_remap_old(t, t0, t1, n), f)
                if key not in gluings:
                    gluings[key] = (_remap_old(tt, t0, t1, n), tf, tau)
        return Triangulation(n + 1, gluings)

    def move_3_2(self, edge: EdgeClass) -> "Triangulation":
        """Collapse a valence-3 edge surrounded by three distinct
        tetrahedra into two tetrahedra.  Inverse of move_2_3."""
        if edge.valence != 3:
            raise TriangulationError("move inapplicable: edge valence is not 3")
        if len(edge.tets()) != 3:
            raise TriangulationError("move inapplicable: tetrahedra around edge not distinct")
        n = self.tet_count
        # recover directed incidences (T_i, A0_i, A1_i) in cyclic order
        t_i, s_i, flip = edge.incidences[0]
        a, b = EDGE_VERTS[s_i]
        if flip:
            a, b = b, a
        cyc = trace_edge(self._glu, t_i, a, b)
        assert cyc is not None and len(cyc) == 3
        tets = [c[0] for c in cyc]
        A0 = {c[0]: c[1] for c in cyc}
        A1 = {c[0]: c[2] for c in cyc}
        # Equator vertex e_i is shared between T_i and T_{i+1}, carried
        # across the leaving face x_i of the trace; locally e_i is the
        # fourth vertex w_i of T_i and the leaving face label x_{i+1} of
        # T_{i+1}.
        eq_local: list[dict[int, int]] = [dict() for _ in range(3)]  # per tet: eq index -> local label
        glu = self._glu
        for i, (t, av, bv, x) in enumerate(cyc):
            w = 6 - av - bv - x
            eq_local[i][i] = w
            eq_local[(i + 1) % 3][i] = cyc[(i + 1) % 3][3]
        for i in range(3):
            assert set(eq_local[i].keys()) == {(i - 1) % 3, i}
            assert len(set(eq_local[i].values())) == 2

        # two new tetrahedra: D0 (apex side A0) and D1 (apex side A1),
        # labels (0: apex, 1: e0, 2: e1, 3: e2)
        d0, d1 = 0, 1
        gluings: dict[tuple[int, int], Gluing] = {}

        def add(t_a: int, f_a: int, t_b: int, f_b: int, perm: Perm) -> None:
            gluings[(t_a, f_a)] = (t_b, f_b, perm)
            gluings[(t_b, f_b)] = (t_a, f_a, invert(perm))

        add(d0, 0, d1, 0, (0, 1, 2, 3))

        old_tets = set(tets)
        remap_old: dict[int, int] = {}
        nxt = 2
        for t in range(n):
            if t not in old_tets:
                remap_old[t] = nxt
                nxt += 1

        # registry: old external faces -> new placement
        registry = {}
        for i in range(3):
            t = tets[i]
            missing = next(j for j in range(3) if j not in eq_local[i])
            # face of T_i opposite A0 -> D1 face opposite (1 + missing)
            m1 = [0] * 4
            m1[A1[t]] = 0
            m1[A0[t]] = 1 + missing
            for j, loc in eq_local[i].items():
                m1[loc] = 1 + j
            registry[(t, A0[t])] = (d1, 1 + missing, tuple(m1))
            m0 = [0] * 4
            m0[A0[t]] = 0
            m0[A1[t]] = 1 + missing
            for j, loc in eq_local[i].items():
                m0[loc] = 1 + j
            registry[(t, A1[t])] = (d0, 1 + missing, tuple(m0))

        def translate(t: int, f: int, lab: Perm) -> tuple[int, int, Perm]:
            if (t, f) in registry:
                nt, nf, m = registry[(t, f)]
                return nt, nf, compose(lab, m)
            return remap_old[t], f, lab

        done: set[tuple[int, int]] = set()
        for (ot, of), (nt, nf, m) in registry.items():
            if (ot, of) in done:
                continue
            tt, tf, tau = glu[ot][of]
            if (tt, tf) not in registry and tt in old_tets:
                raise TriangulationError("move inapplicable: external face glued to internal face")
            t_b, f_b, lab = translate(tt, tf, compose(invert(m), tau))
            add(nt, nf, t_b, f_b, lab)
            done.add((ot, of))
            if (tt, tf) in registry:
                done.add((tt, tf))
        for t in range(n):
            if t in old_tets:
                continue
            for f in range(4):
                tt, tf, tau = glu[t][f]
                if tt in old_tets:
                    continue  # handled via registry side
                key = (remap_old[t], f)
                if key not in gluings:
                    gluings[key] = (remap_old[tt], tf, tau)
        return Triangulation(n - 1, gluings)

    # -- relabeling (test/fuzz helper) ----------------------------------------

    def relabel(self, tet_perm: list[int], vertex_perms: list[Perm]) -> "Triangulation":
        """Rebuild with tetrahedron t renamed tet_perm[t] and its vertices
        relabeled by vertex_perms[t]."""
        gluings: dict[tuple[int, int], Gluing] = {}
        for t in range(self.tet_count):
            pt = vertex_perms[t]
            for f in range(4):
                t2, _, sigma = self._glu[t][f]
                p2 = vertex_perms[t2]
                new_sigma = compose(compose(invert(pt), sigma), p2)
                gluings[(tet_perm[t], pt[f])] = (tet_perm[t2], new_sigma[pt[f]], new_sigma)
        return Triangulation(self.tet_count, gluings)

    def mirror(self) -> "Triangulation":
        """Reverse orientation by relabeling every tetrahedron with a
        fixed odd permutation."""
        tau: Perm = (0, 1, 3, 2)
        return self.relabel(list(range(self.tet_count)), [tau] * self.tet_count)

    # -- text format --------------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"tets {self.tet_count}"]
        for t in range(self.tet_count):
            for f in range(4):
                t2, f2, perm = self._glu[t][f]
                word = "".join(str(x) for x in perm)
                lines.append(f"{t} {f} -> {t2} {f2} {word}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Triangulation":
        tris = parse_blocks(text)
        if len(tris) != 1:
            raise TriangulationError(f"expected exactly one block, found {len(tris)}")
        return tris[0]


def _remap_new(base: int, t0: int, t1: int, n: int) -> int:
    """Indices of the three new tetrahedra in move_2_3: they reuse the
    slots of t0, t1 plus the appended slot n."""
    lo, hi = min(t0, t1), max(t0, t1)
    return (lo, hi, n)[base]


def _remap_old(t: int, t0: int, t1: int, n: int) -> int:
    """Old tetrahedra keep their indices in move_2_3."""
    return t


def trace_edge(glu, t0: int, a0: int, b0: int) -> list[tuple[int, int, int, int]] | None:
    """Walk around the edge (a0, b0) of tetrahedron t0.

    Returns the cyclic list of directed states (tet, a, b, leaving_face),
    or None if the walk hits the start slot with reversed direction (the
    edge is identified with itself in reverse: not a manifold).
    """
    c, d = (v for v in range(4) if v not in (a0, b0))
    x0 = min(c, d)
    state = (t0, a0, b0, x0)
    out = []
    while True:
        t, a, b, x = state
        out.append(state)
        t2, _, sig = glu[t][x]
        a2, b2, x2 = sig[a], sig[b], sig[x]
        y = 6 - a2 - b2 - x2
        state = (t2, a2, b2, y)
        if (t2, a2, b2) == (t0, b0, a0):
            return None
        if state == (t0, a0, b0, x0):
            return out
        if (t2, a2, b2) == (t0, a0, b0):
            raise TriangulationError("edge trace revisited start slot without closing")
        if len(out) > 12 * len(glu):
            raise TriangulationError("edge trace failed to close")


def parse_blocks(text: str) -> list[Triangulation]:
    """Parse one or more triangulation blocks from the text format.

    Grammar per block: a line ``tets <n>`` followed by exactly 4n lines
    ``<tet> <face> -> <tet'> <face'> <perm>`` where ``<perm>`` is a
    4-character permutation word such as ``0132``.  Lines starting with
    ``#`` and blank lines separate blocks and are ignored.
    """
    out = []
    cur_n: int | None = None
    cur: dict[tuple[int, int], Gluing] = {}
    expect = 0

    def flush(lineno: int) -> None:
        nonlocal cur_n, cur, expect
        if cur_n is None:
            return
        if len(cur) != 4 * cur_n:
            raise TriangulationError(
                f"line {lineno}: block has {len(cur)} gluing lines, expected {4 * cur_n}"
            )
        out.append(Triangulation(cur_n, cur))
        cur_n, cur, expect = None, {}, 0

    lines = text.splitlines()
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("tets "):
            flush(i)
            try:
                cur_n = int(line.split()[1])
            except (IndexError, ValueError):
                raise TriangulationError(f"line {i}: malformed header {line!r}") from None
            if cur_n < 1:
                raise TriangulationError(f"line {i}: tets count must be positive")
            continue
        if cur_n is None:
            raise TriangulationError(f"line {i}: gluing line before 'tets' header")
        parts = line.split()
        if len(parts) != 6 or parts[2] != "->":
            raise TriangulationError(f"line {i}: malformed gluing line {line!r}")
        try:
            t, f, t2, f2 = int(parts[0]), int(parts[1]), int(parts[3]), int(parts[4])
            word = parts[5]
            perm = tuple(int(ch) for ch in word)
        except ValueError:
            raise TriangulationError(f"line {i}: malformed gluing line {line!r}") from None
        if sorted(perm) != [0, 1, 2, 3]:
            raise TriangulationError(f"line {i}: {word!r} is not a permutation of 0123")
        if (t, f) in cur:
            raise TriangulationError(f"line {i}: duplicate gluing for face ({t},{f})")
        cur[(t, f)] = (t2, f2, perm)  # full validation happens in the constructor
    flush(len(lines) + 1)
    return out


def blocks_to_text(tris: list[Triangulation]) -> str:
    return "\n".join(t.to_text() for t in tris)
