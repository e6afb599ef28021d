"""Enumeration of candidate minimal ideal triangulations.

Depth-first search over face pairings, always extending the
lowest-indexed unglued face.  Only odd gluing permutations are used
(all-odd gluings are exactly the orientable ones for connected
triangulations), and a gluing to a previously untouched tetrahedron is
generated in a single normalized way (the fresh tetrahedron's labels
are ours to choose).  Edge classes that close during the search are
checked immediately so dead branches are cut near the root; completed
gluings pass through the minimality and boundary filters and are
deduplicated by isomorphism signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .perms import ODD_SENDING, Perm, invert
from .triangulation import (
    EDGE_SLOT,
    EDGE_VERTS,
    Triangulation,
    TriangulationError,
)

#: Filters enabled by default, in application order.
DEFAULT_FILTERS = ("low_valence", "geometric_valence", "angle_budget", "boundary")


@dataclass(frozen=True)
class EnumerationConfig:
    n: int
    filters: tuple[str, ...] = DEFAULT_FILTERS
    budget_nodes: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        unknown = set(self.filters) - set(DEFAULT_FILTERS)
        if unknown:
            raise ValueError(f"unknown filters: {sorted(unknown)}")


@dataclass(frozen=True)
class CandidateStream:
    triangulations: tuple[Triangulation, ...]
    complete: bool
    nodes_explored: int


# ---------------------------------------------------------------------------
# filters


def filter_low_valence(t: Triangulation) -> tuple[bool, str | None]:
    """Minimality test: discard triangulations that an elementary move
    obviously simplifies."""
    for ec in t.edge_classes():
        if ec.valence == 1:
            return False, "valence-1 edge"
        if ec.valence == 2 and len(ec.tets()) == 2:
            return False, "valence-2 edge through two tetrahedra"
        if ec.valence == 3 and len(ec.tets()) == 3:
            return False, "3-2 reducible"
    return True, None


def filter_geometric_valence(t: Triangulation) -> tuple[bool, str | None]:
    """Discard edge classes of valence at most 2: dihedral angles are in
    (0, pi), so fewer than three of them cannot sum to 2*pi and no
    hyperbolicity solution can exist."""
    for ec in t.edge_classes():
        if ec.valence <= 2:
            return False, "valence too low for angle sum 2*pi"
    return True, None


def _vertex_cover_size(slots: frozenset[int]) -> int:
    """Minimum number of tetrahedron vertices needed so that every edge
    slot in `slots` contains a chosen vertex (tiny set cover, <= 6 slots
    over 4 vertices)."""
    from itertools import combinations

    for size in range(1, 5):
        for verts in combinations(range(4), size):
            if all(
                EDGE_VERTS[s][0] in verts or EDGE_VERTS[s][1] in verts
                for s in slots
            ):
                return size
    raise AssertionError("four vertices always cover")


def _angle_budget_ok(incidences) -> bool:
    """Feasibility of the 2*pi dihedral-angle sum around a closed edge
    class against the vertex-angle budget.

    At every truncated or ideal vertex of a hyperbolic tetrahedron the
    three dihedral angles sum to at most pi.  Group the edge class's
    incident slots by (tetrahedron, vertex): if all slots can be covered
    by at most two such groups, the angle sum around the edge is at most
    2*pi, with equality only if both groups consist of all three slots
    at an ideal vertex.  Otherwise some angle would have to vanish, so
    no geometric solution exists and the class is rejected."""
    per_tet: dict[int, set[int]] = {}
    for tt, slot, _flip in incidences:
        per_tet.setdefault(tt, set()).add(slot)
    covers = {tt: _vertex_cover_size(frozenset(s)) for tt, s in per_tet.items()}
    if sum(covers.values()) > 2:
        return True
    # two complete vertex stars (two ideal vertices) reach exactly 2*pi;
    # only then is the budget not strictly exceeded.
    return all(
        covers[tt] == 1 and len(s) == 3 for tt, s in per_tet.items()
    ) and len(per_tet) == 2


def filter_angle_budget(t: Triangulation) -> tuple[bool, str | None]:
    """Discard triangulations with an edge class whose 2*pi angle sum
    cannot fit into the vertex-angle budget (see _angle_budget_ok)."""
    for ec in t.edge_classes():
        if not _angle_budget_ok(ec.incidences):
            return False, "edge class exceeds vertex-angle budget"
    return True, None


def filter_boundary(t: Triangulation) -> tuple[bool, str | None]:
    """Keep only candidates whose truncation boundary can be geodesic
    plus cusps: orientable, no sphere components, at least one component
    of negative Euler characteristic."""
    b = t.boundary()
    if any(not c.orientable for c in b.components):
        return False, "non-orientable boundary component"
    if any(c.euler_characteristic > 0 for c in b.components):
        return False, "sphere boundary component"
    if not any(c.euler_characteristic < 0 for c in b.components):
        return False, "no boundary component of negative Euler characteristic"
    return True, None


_FILTERS = {
    "low_valence": filter_low_valence,
    "geometric_valence": filter_geometric_valence,
    "angle_budget": filter_angle_budget,
    "boundary": filter_boundary,
}


# ---------------------------------------------------------------------------
# partial edge tracing


def _trace_partial(
    glu: dict[tuple[int, int], tuple[int, int, Perm]],
    t0: int,
    a0: int,
    b0: int,
    x0: int,
):
    """Walk the directed edge (a0, b0) of tet t0 forward through face x0.

    Returns ("closed", incidences) when the walk returns to the start
    state, ("open", k) when it reaches an unglued face, and
    ("reversed", None) when the edge meets itself in reverse (a
    non-manifold identification no further gluing can repair).
    """
    t, a, b, x = t0, a0, b0, x0
    incidences = []
    while True:
        incidences.append((t, a, b))
        g = glu.get((t, x))
        if g is None:
            return "open", incidences
        t2, _f2, sig = g
        a2, b2, x2 = sig[a], sig[b], sig[x]
        y = 6 - a2 - b2 - x2
        t, a, b, x = t2, a2, b2, y
        if (t, a, b, x) == (t0, a0, b0, x0):
            return "closed", incidences
        if (t, b, a) == (t0, a0, b0) or (t, a, b) == (t0, b0, a0):
            # meets the start edge with opposite direction
            return "reversed", None
        if len(incidences) > 12 * len(glu) + 12:
            raise RuntimeError("partial edge trace failed to terminate")


def _edges_ok_after_gluing(
    glu: dict[tuple[int, int], tuple[int, int, Perm]],
    t: int,
    f: int,
    minimal: bool,
    geometric: bool,
    budget: bool,
) -> bool:
    """Check the three edge classes touched by a new gluing of (t, f).

    Always rejects non-manifold (reversed) edge identifications; the
    remaining prunes mirror the enabled filters so that disabling all
    filters yields the raw face-pairing space."""
    for s in range(6):
        a, b = EDGE_VERTS[s]
        if a == f or b == f:
            continue  # edge not in face f
        state, cycle = _trace_partial(glu, t, a, b, f)
        if state == "reversed":
            return False
        if state != "closed":
            continue
        valence = len(cycle)
        tets = {c[0] for c in cycle}
        if minimal and valence == 1:
            return False
        if geometric and valence <= 2:
            return False
        if minimal and valence == 2 and len(tets) == 2:
            return False
        if minimal and valence == 3 and len(tets) == 3:
            return False
        if budget and not _angle_budget_ok(
            [(tt, EDGE_SLOT[(aa, bb)], False) for tt, aa, bb in cycle]
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# search


def enumerate_candidates(cfg: EnumerationConfig) -> CandidateStream:
    """All candidate triangulations with cfg.n tetrahedra, up to
    isomorphism, deterministically ordered by signature."""
    n = cfg.n
    minimal = "low_valence" in cfg.filters
    geometric = "geometric_valence" in cfg.filters
    budget = "angle_budget" in cfg.filters
    final_filters = [_FILTERS[name] for name in DEFAULT_FILTERS if name in cfg.filters]
    found: dict[bytes, Triangulation] = {}
    nodes = 0
    budget_hit = False

    glu: dict[tuple[int, int], tuple[int, int, Perm]] = {}

    def candidates_for(t: int, f: int, touched: int):
        # pair with an unglued face of an already-touched tetrahedron ...
        for t2 in range(t, touched):
            for f2 in range(4):
                if t2 == t and f2 <= f:
                    continue
                if (t2, f2) in glu:
                    continue
                for perm in ODD_SENDING[(f, f2)]:
                    yield t2, f2, perm
        # ... or open a fresh tetrahedron (one normalized labeling)
        if touched < n:
            yield touched, 0, ODD_SENDING[(f, 0)][0]

    def dfs(touched: int) -> None:
        nonlocal nodes, budget_hit
        if budget_hit:
            return
        nodes += 1
        if cfg.budget_nodes is not None and nodes > cfg.budget_nodes:
            budget_hit = True
            return
        target = next(
            ((t, f) for t in range(touched) for f in range(4) if (t, f) not in glu),
            None,
        )
        if target is None:
            if touched < n:
                return  # closed up before using all tetrahedra
            try:
                tri = Triangulation(n, dict(glu))
                tri.edge_classes()
            except TriangulationError:
                return
            for flt in final_filters:
                keep, _reason = flt(tri)
                if not keep:
                    return
            sig = tri.iso_signature().canonical_form
            found.setdefault(sig, tri)
            return
        t, f = target
        for t2, f2, perm in candidates_for(t, f, touched):
            glu[(t, f)] = (t2, f2, perm)
            glu[(t2, f2)] = (t, f, invert(perm))
            if _edges_ok_after_gluing(glu, t, f, minimal, geometric, budget):
                dfs(max(touched, t2 + 1))
            del glu[(t, f)], glu[(t2, f2)]

    dfs(1)
    ordered = tuple(tri for _sig, tri in sorted(found.items()))
    return CandidateStream(ordered, complete=not budget_hit, nodes_explored=nodes)
