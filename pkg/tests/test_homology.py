"""Tests for first homology.

The production code computes H_1 from the 2-complex dual to the
triangulation.  The oracle here is an entirely independent construction:
the CW complex of the *truncated* tetrahedra (corner vertices, shortened
tetrahedron edges, truncation segments, hexagonal faces and link
triangles), whose underlying space is the same compact manifold.  The
torsion pipeline is additionally cross-checked against sympy's Smith
normal form.
"""

import random

import pytest
from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from hypcensus.enumeration import EnumerationConfig, enumerate_candidates
from hypcensus.homology import compute_homology, smith_normal_form
from hypcensus.triangulation import Triangulation

from test_solver import CUSPED_N3, ONE_EDGED_N2, ONE_EDGED_N3


# ---------------------------------------------------------------------------
# Smith normal form

def test_snf_small_examples():
    assert smith_normal_form([[2, 4], [4, 8]]) == [2]
    assert smith_normal_form([[1, 0], [0, 1]]) == [1, 1]
    assert smith_normal_form([[0, 0], [0, 0]]) == []
    # invariant factors must divide each other
    assert smith_normal_form([[2, 0], [0, 3]]) == [1, 6]


def test_snf_matches_sympy_on_random_matrices():
    rng = random.Random(3)
    for _ in range(60):
        r, c = rng.randint(1, 6), rng.randint(1, 6)
        m = [[rng.randint(-5, 5) for _ in range(c)] for _ in range(r)]
        mine = [x for x in smith_normal_form(m) if x != 0]
        s = sympy_snf(Matrix(m))
        theirs = [abs(s[i, i]) for i in range(min(r, c)) if s[i, i] != 0]
        assert mine == theirs
        for a, b in zip(mine, mine[1:]):
            assert b % a == 0


# ---------------------------------------------------------------------------
# truncated-complex oracle


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _corners(f):
    return [v for v in range(4) if v != f]


def _truncated_h1(tri: Triangulation):
    """H_1 of the truncated cell structure: corner vertices, shortened
    edges + truncation segments, hexagons + link triangles."""
    n = tri.tet_count

    # vertices: corners (t, v, (a, b)) with v in {a, b}, identified
    # whenever both endpoints of the edge lie in a glued face
    uf = _UnionFind()
    for t in range(n):
        for f in range(4):
            t2, _f2, perm = tri.gluing(t, f)
            for v in _corners(f):
                for w in _corners(f):
                    if v == w:
                        continue
                    e = tuple(sorted((v, w)))
                    e2 = tuple(sorted((perm[v], perm[w])))
                    uf.union((t, v, e), (t2, perm[v], e2))
    corner_cls = {}
    for t in range(n):
        for v in range(4):
            for w in range(4):
                if v == w:
                    continue
                key = (t, v, tuple(sorted((v, w))))
                root = uf.find(key)
                corner_cls.setdefault(root, len(corner_cls))
    corner_idx = lambda t, v, e: corner_cls[uf.find((t, v, e))]

    # shortened edges: directed slots (t, a, b) -> (class, sign) by BFS
    # over the gluings that carry the whole edge
    edge_dir = {}
    n_edges = 0
    for t0 in range(n):
        for a0 in range(4):
            for b0 in range(4):
                if a0 == b0 or (t0, a0, b0) in edge_dir:
                    continue
                idx = n_edges
                n_edges += 1
                queue = [(t0, a0, b0, 1)]
                while queue:
                    t, a, b, s = queue.pop()
                    if (t, a, b) in edge_dir:
                        assert edge_dir[(t, a, b)] == (idx, s)
                        continue
                    edge_dir[(t, a, b)] = (idx, s)
                    edge_dir[(t, b, a)] = (idx, -s)
                    for f in range(4):
                        if f in (a, b):
                            continue
                        t2, _f2, perm = tri.gluing(t, f)
                        queue.append((t2, perm[a], perm[b], s))

    # truncation segments (t, v, f): glued once through face f; the
    # canonical direction runs between the two corners in index order
    seg_dir = {}
    n_segs = 0
    for t in range(n):
        for v in range(4):
            for f in range(4):
                if f == v or (t, v, f) in seg_dir:
                    continue
                idx = n_segs
                n_segs += 1
                a, b = sorted(x for x in range(4) if x not in (v, f))
                seg_dir[(t, v, f)] = (idx, 1)
                t2, f2, perm = tri.gluing(t, f)
                a2, b2 = sorted(x for x in range(4) if x not in (perm[v], f2))
                sign = 1 if perm[a] == a2 else -1
                seg_dir[(t2, perm[v], f2)] = (idx, sign)

    n1 = n_edges + n_segs  # segments indexed after edges

    d1_cols = [None] * n1
    for (t, a, b), (idx, s) in edge_dir.items():
        if s == 1 and d1_cols[idx] is None:
            e = tuple(sorted((a, b)))
            d1_cols[idx] = (corner_idx(t, b, e), corner_idx(t, a, e))
    for (t, v, f), (idx, s) in seg_dir.items():
        if s == 1 and d1_cols[n_edges + idx] is None:
            a, b = sorted(x for x in range(4) if x not in (v, f))
            d1_cols[n_edges + idx] = (
                corner_idx(t, v, tuple(sorted((v, b)))),
                corner_idx(t, v, tuple(sorted((v, a)))),
            )
    n0 = len(corner_cls)
    d1 = [[0] * n1 for _ in range(n0)]
    for j, (head, tail) in enumerate(d1_cols):
        d1[head][j] += 1
        d1[tail][j] -= 1

    d2_cols = []
    # link triangles: cycle a -> b -> c -> a through three segments
    for t in range(n):
        for v in range(4):
            a, b, c = [x for x in range(4) if x != v]
            col = [0] * n1
            for x, y in ((a, b), (b, c), (c, a)):
                f = 6 - v - x - y
                idx, s = seg_dir[(t, v, f)]
                col[n_edges + idx] += s if x < y else -s
            d2_cols.append(col)
    # hexagons: one per face pair, alternating edges and segments
    done = set()
    for t in range(n):
        for f in range(4):
            t2, f2, _perm = tri.gluing(t, f)
            if (t2, f2) in done or (t, f) in done:
                continue
            done.add((t, f))
            done.add((t2, f2))
            a, b, c = _corners(f)
            col = [0] * n1
            for x, y in ((a, b), (b, c), (c, a)):
                idx, s = edge_dir[(t, x, y)]
                col[idx] += s
                # segment at vertex y inside this hexagon runs between
                # the corners on edges (x, y) and (y, z)
                z = 6 - f - x - y
                sidx, ss = seg_dir[(t, y, f)]
                col[n_edges + sidx] += ss if x < z else -ss
            d2_cols.append(col)
    d2 = [[c[i] for c in d2_cols] for i in range(n1)]

    f1 = smith_normal_form(d1)
    f2_factors = smith_normal_form(d2)
    rank1 = sum(1 for x in f1 if x != 0)
    rank2 = sum(1 for x in f2_factors if x != 0)
    return n1 - rank1 - rank2, sorted(x for x in f2_factors if x > 1)


# ---------------------------------------------------------------------------
# agreement and expected values


@pytest.mark.parametrize("text", [ONE_EDGED_N2, ONE_EDGED_N3, CUSPED_N3])
def test_reference_triangulations_match_oracle(text):
    tri = Triangulation.from_text(text)
    assert compute_homology(tri) == _truncated_h1(tri)


def test_reference_triangulations_expected_groups():
    assert compute_homology(Triangulation.from_text(ONE_EDGED_N2)) == (2, [])
    assert compute_homology(Triangulation.from_text(ONE_EDGED_N3)) == (3, [])


ALLOWED = {(2, ()), (3, ()), (4, ()), (2, (2, 2))}
ALLOWED |= {(2, (k,)) for k in range(2, 9)}
ALLOWED |= {(3, (k,)) for k in (2, 3, 5)}


def test_n2_census_homology_in_family_and_matches_oracle():
    for tri in enumerate_candidates(EnumerationConfig(2)).triangulations:
        h = compute_homology(tri)
        assert (h[0], tuple(h[1])) in ALLOWED
        assert h == _truncated_h1(tri)


@pytest.mark.slow
def test_n3_census_homology_in_family_and_matches_oracle():
    hist = {}
    for tri in enumerate_candidates(EnumerationConfig(3)).triangulations:
        h = compute_homology(tri)
        key = (h[0], tuple(h[1]))
        assert key in ALLOWED
        assert h == _truncated_h1(tri)
        hist[key] = hist.get(key, 0) + 1
    assert sum(hist.values()) == 151


def test_homology_invariant_under_relabeling():
    rng = random.Random(7)
    tri = Triangulation.from_text(ONE_EDGED_N3)
    base = compute_homology(tri)
    for _ in range(10):
        tet_perm = list(range(tri.tet_count))
        rng.shuffle(tet_perm)
        vperms = [tuple(sorted(range(4), key=lambda _: rng.random()))
                  for _ in range(tri.tet_count)]
        assert compute_homology(tri.relabel(tet_perm, vperms)) == base
