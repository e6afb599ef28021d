"""First homology of the compact manifold underlying a triangulation.

The manifold deformation-retracts onto the 2-complex dual to its ideal
triangulation: one 0-cell per tetrahedron, one 1-cell per glued face
pair, one 2-cell per edge class (attached along the cycle of faces
crossed when walking around the edge).  H_1 of that complex is
H_1 of the manifold, computed with exact integer arithmetic via the
Smith normal form:

    free rank = #(1-cells) - rank d1 - rank d2
    torsion   = invariant factors of d2 greater than one.
"""

from __future__ import annotations

from .triangulation import EDGE_SLOT, EDGE_VERTS, Triangulation, trace_edge


def smith_normal_form(matrix: list[list[int]]) -> list[int]:
    """Diagonal invariant factors (non-negative, each dividing the next)
    of an integer matrix, by exact row/column reduction."""
    m = [row[:] for row in matrix]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    out: list[int] = []
    r = 0
    while r < min(rows, cols):
        # find a pivot of minimal absolute value in the remaining block
        pivot = None
        for i in range(r, rows):
            for j in range(r, cols):
                if m[i][j] != 0 and (pivot is None or abs(m[i][j]) < abs(m[pivot[0]][pivot[1]])):
                    pivot = (i, j)
        if pivot is None:
            break
        i, j = pivot
        m[r], m[i] = m[i], m[r]
        for row in m:
            row[r], row[j] = row[j], row[r]
        # clear the pivot row and column; restart if a remainder shrinks
        # the pivot (standard SNF loop, terminates by descent on |pivot|)
        dirty = True
        while dirty:
            dirty = False
            p = m[r][r]
            for i in range(r + 1, rows):
                q = m[i][r] // p
                if q:
                    for j2 in range(r, cols):
                        m[i][j2] -= q * m[r][j2]
                if m[i][r]:
                    m[r], m[i] = m[i], m[r]
                    dirty = True
                    break
            if dirty:
                continue
            for j in range(r + 1, cols):
                q = m[r][j] // p
                if q:
                    for i2 in range(r, rows):
                        m[i2][j] -= q * m[i2][r]
                if m[r][j]:
                    for i2 in range(r, rows):
                        m[i2][r], m[i2][j] = m[i2][j], m[i2][r]
                    dirty = True
                    break
        # divisibility: fold in any entry the pivot does not divide
        p = m[r][r]
        culprit = None
        for i in range(r + 1, rows):
            for j in range(r + 1, cols):
                if m[i][j] % p:
                    culprit = i
                    break
            if culprit is not None:
                break
        if culprit is not None:
            for j2 in range(r, cols):
                m[r][j2] += m[culprit][j2]
            continue  # redo this pivot position
        out.append(abs(p))
        r += 1
    return out


def _dual_boundary_matrices(
    tri: Triangulation,
) -> tuple[list[list[int]], list[list[int]]]:
    n = tri.tet_count
    # 1-cells: one per face pair, oriented from its smaller side
    pairs: dict[tuple[int, int], int] = {}
    orient: dict[tuple[int, int], int] = {}
    for t in range(n):
        for f in range(4):
            t2, f2, _perm = tri.gluing(t, f)
            if (t2, f2) < (t, f):
                continue
            idx = len(set(pairs.values()))
            pairs[(t, f)] = idx
            pairs[(t2, f2)] = idx
            orient[(t, f)] = 1  # crossing out of the smaller side is +
            orient[(t2, f2)] = -1 if (t2, f2) != (t, f) else 1
    n1 = len(set(pairs.values()))
    d1 = [[0] * n1 for _ in range(n)]
    seen = set()
    for t in range(n):
        for f in range(4):
            idx = pairs[(t, f)]
            if idx in seen:
                continue
            seen.add(idx)
            t2 = tri.gluing(t, f)[0]
            d1[t2][idx] += 1
            d1[t][idx] -= 1
    # 2-cells: one per edge class; attaching cycle = faces crossed
    d2_cols: list[list[int]] = []
    seen_slots: set[tuple[int, int]] = set()
    for t0 in range(n):
        for s0 in range(6):
            if (t0, s0) in seen_slots:
                continue
            a0, b0 = EDGE_VERTS[s0]
            cycle = trace_edge(tri._glu, t0, a0, b0)
            col = [0] * n1
            for t, a, b, x in cycle:
                seen_slots.add((t, EDGE_SLOT[(a, b)]))
                col[pairs[(t, x)]] += orient[(t, x)]
            d2_cols.append(col)
    d2 = [[d2_cols[j][i] for j in range(len(d2_cols))] for i in range(n1)]
    return d1, d2


def compute_homology(tri: Triangulation) -> tuple[int, list[int]]:
    """H_1 of the compact manifold: (free rank, torsion coefficients).

    Torsion coefficients are sorted and each divides the next; trivial
    factors are omitted.
    """
    d1, d2 = _dual_boundary_matrices(tri)
    f1 = smith_normal_form(d1)
    f2 = smith_normal_form(d2)
    rank1 = sum(1 for x in f1 if x != 0)
    rank2 = sum(1 for x in f2 if x != 0)
    n1 = len(d1[0]) if d1 else 0
    free = n1 - rank1 - rank2
    torsion = sorted(x for x in f2 if x > 1)
    return free, torsion
