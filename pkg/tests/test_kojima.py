"""Tests for the canonical-decomposition pipeline: tilt computation,
gluing consistency, the flip loop, block assembly, and the resulting
manifold identifier's invariance properties."""

import dataclasses
import random

import numpy as np
import pytest

from hypcensus import kojima as kj
from hypcensus import solver as slv
from hypcensus.enumeration import EnumerationConfig, enumerate_candidates
from hypcensus.triangulation import Triangulation

from test_solver import CUSPED_N3, ONE_EDGED_N2, ONE_EDGED_N3

# A census triangulation that is not itself canonical: one face pair has
# positive tilt sum and a single 2-3 flip produces the four-tetrahedron
# canonical decomposition (volume 7.758268).
FLIPPING_N3 = """\
tets 3
0 0 -> 1 0 0132
0 1 -> 1 1 2103
0 2 -> 2 0 1302
0 3 -> 2 1 0321
1 0 -> 0 0 0132
1 1 -> 0 1 2103
1 2 -> 2 3 2031
1 3 -> 2 2 1302
2 0 -> 0 2 2031
2 1 -> 0 3 0321
2 2 -> 1 3 2031
2 3 -> 1 2 1302
"""


# A cusped four-tetrahedron candidate whose canonical decomposition is two
# square pyramids: two face pairs carry exactly zero tilt in both the
# truncation-plane and the light-cone part, so the tetrahedra merge in
# pairs across the pyramids' diagonal squares.
CUSPED_PYRAMIDS_N4 = """\
tets 4
0 0 -> 0 1 1230
0 1 -> 0 0 3012
0 2 -> 1 0 1302
0 3 -> 2 0 1230
1 0 -> 0 2 2031
1 1 -> 1 3 2310
1 2 -> 3 0 1302
1 3 -> 1 1 3201
2 0 -> 0 3 3012
2 1 -> 3 2 0213
2 2 -> 3 3 0132
2 3 -> 3 1 0321
3 0 -> 1 2 2031
3 1 -> 2 3 0321
3 2 -> 2 1 0213
3 3 -> 2 2 0132
"""

# Another triangulation of the same manifold: here the faces to flip have
# a negative tilt sum at the reference horoball scale but a positive
# truncation-plane part, so only the shrinking-horoball limit
# classification finds the flip leading to the two pyramids.
CUSPED_PYRAMIDS_FLIP_N4 = """\
tets 4
0 0 -> 1 0 0132
0 1 -> 1 1 2103
0 2 -> 2 0 1302
0 3 -> 3 0 1230
1 0 -> 0 0 0132
1 1 -> 0 1 2103
1 2 -> 2 1 2310
1 3 -> 3 3 0213
2 0 -> 0 2 2031
2 1 -> 1 2 3201
2 2 -> 3 1 3012
2 3 -> 3 2 0132
3 0 -> 0 3 3012
3 1 -> 2 2 1230
3 2 -> 2 3 0132
3 3 -> 1 3 0213
"""

# A compact candidate where the first 2-3 flip of the canonicalization
# has a flat middle tetrahedron (the apex-apex segment of the bipyramid
# crosses an equator edge), exercising the 4-4 fallback.
COMPACT_FLAT_FLIP_N4 = """\
tets 4
0 0 -> 0 1 1230
0 1 -> 0 0 3012
0 2 -> 1 0 1302
0 3 -> 2 0 1230
1 0 -> 0 2 2031
1 1 -> 1 3 2310
1 2 -> 3 0 1302
1 3 -> 1 1 3201
2 0 -> 0 3 3012
2 1 -> 2 2 1230
2 2 -> 2 1 3012
2 3 -> 3 1 0321
3 0 -> 1 2 2031
3 1 -> 2 3 0321
3 2 -> 3 3 1230
3 3 -> 3 2 3012
"""


def solved(text: str):
    tri = Triangulation.from_text(text)
    sol = slv.solve_with_cusp_handoff(tri)
    assert sol.success
    return tri, sol


# ---------------------------------------------------------------------------
# tilts


def test_regular_one_edged_tilt_sums_are_negative():
    for text in (ONE_EDGED_N2, ONE_EDGED_N3):
        tri, sol = solved(text)
        tilts = kj.compute_tilts(kj.glue_realizations(tri, sol))
        assert len(tilts) == 2 * tri.tet_count
        for ft in tilts:
            # regular tetrahedra: both sides carry the same tilt
            assert ft.t1 == pytest.approx(ft.t2, abs=1e-9)
            assert -2.0 < ft.sum < -1.4


def test_cusped_candidate_tilt_sums_are_negative():
    tri, sol = solved(CUSPED_N3)
    for ft in kj.compute_tilts(kj.glue_realizations(tri, sol)):
        assert ft.sum < -kj.EPS_TILT


def test_tilts_invariant_under_relabeling():
    tri, sol = solved(ONE_EDGED_N3)
    base = {ft.face: ft.sum for ft in kj.compute_tilts(kj.glue_realizations(tri, sol))}
    rng = random.Random(5)
    for _ in range(5):
        tet_perm = list(range(tri.tet_count))
        rng.shuffle(tet_perm)
        vperms = [tuple(rng.sample(range(4), 4)) for _ in range(tri.tet_count)]
        other = tri.relabel(tet_perm, vperms)
        sol2 = slv.solve_with_cusp_handoff(other)
        got = {}
        for ft in kj.compute_tilts(kj.glue_realizations(other, sol2)):
            got[ft.face] = ft.sum
            got[ft.other] = ft.sum
        for (t, f), s in base.items():
            t2 = tet_perm[t]
            f2 = vperms[t][f]
            # base tetrahedron of the realization differs: this is the
            # gauge-invariance check on every face
            assert got[(t2, f2)] == pytest.approx(s, abs=1e-9)


def test_inconsistent_solution_rejected():
    tri, sol = solved(ONE_EDGED_N2)
    # a lopsided perturbation: one tetrahedron no longer matches its
    # neighbours across the gluings (a uniform shift would not do, since
    # it maps the regular solution to another consistent regular one)
    angles = sol.angles.copy()
    angles[0, 0] += 1e-4
    bad = dataclasses.replace(sol, angles=angles)
    with pytest.raises(kj.InconsistentSolutionError):
        kj.glue_realizations(tri, bad)


def test_tilt_signs_stable_under_tiny_perturbation():
    for text in (ONE_EDGED_N3, CUSPED_N3, FLIPPING_N3):
        tri, sol = solved(text)
        ref = [ft.sum for ft in kj.compute_tilts(kj.glue_realizations(tri, sol))]
        wiggled = dataclasses.replace(sol, angles=sol.angles + 1e-9)
        per = [ft.sum for ft in kj.compute_tilts(kj.glue_realizations(tri, wiggled))]
        for a, b in zip(ref, per):
            assert abs(a - b) < 1e-6
            if abs(a) > kj.EPS_TILT:
                assert (a > 0) == (b > 0)


def test_limit_sign_classification():
    ft = lambda b, a: kj.FaceTilt((0, 0), (1, 0), 0.0, 0.0, b, a)
    assert ft(1e-6, -1.0).limit_sign == 1  # plane part decides
    assert ft(-1e-6, 1.0).limit_sign == -1
    assert ft(0.0, 1e-6).limit_sign == 1  # light-cone part breaks ties
    assert ft(0.0, -1e-6).limit_sign == -1
    assert ft(1e-10, 1e-10).limit_sign == 0
    # for compact solutions the light-cone part vanishes identically
    tri, sol = solved(ONE_EDGED_N3)
    for f in kj.compute_tilts(kj.glue_realizations(tri, sol)):
        assert f.a == 0.0
        assert f.b == pytest.approx(f.sum, abs=1e-9)


# ---------------------------------------------------------------------------
# canonicalization


def test_one_edged_triangulations_are_already_canonical():
    for text in (ONE_EDGED_N2, ONE_EDGED_N3, CUSPED_N3):
        tri, sol = solved(text)
        k = kj.canonicalize(tri, sol)
        assert k.converged
        assert k.flip_trace == ()
        assert not k.merged_faces
        assert len(k.blocks) == tri.tet_count
        assert set(k.block_shapes) == {"tetrahedron"}


def test_flipping_candidate_flips_once_to_four_tetrahedra():
    tri, sol = solved(FLIPPING_N3)
    k = kj.canonicalize(tri, sol)
    assert k.converged
    assert len(k.flip_trace) == 1
    assert k.triangulation.tet_count == 4
    assert k.block_shapes == ("tetrahedron",) * 4
    # the flip preserved the manifold: volume drift within 1e-8
    final = slv.solve_with_cusp_handoff(k.triangulation)
    assert abs(final.volume() - sol.volume()) <= 1e-8
    assert final.volume() == pytest.approx(7.758268, abs=1e-5)


def test_cusped_pyramid_merge():
    tri, sol = solved(CUSPED_PYRAMIDS_N4)
    k = kj.canonicalize(tri, sol)
    assert k.converged
    assert k.flip_trace == ()
    assert len(k.merged_faces) == 4
    assert k.block_shapes == ("square pyramid", "square pyramid")
    assert sorted(len(b) for b in k.blocks) == [2, 2]
    for ft in k.tilts:
        if ft.face not in k.merged_faces:
            assert ft.limit_sign < 0


def test_limit_classification_flips_reference_negative_face():
    tri, sol = solved(CUSPED_PYRAMIDS_FLIP_N4)
    tilts = kj.compute_tilts(kj.glue_realizations(tri, sol))
    # all tilt sums at the reference horoball scale are negative, yet the
    # triangulation is not canonical: the faces to flip show up only in
    # the shrinking-horoball limit
    assert all(ft.sum < -kj.EPS_TILT for ft in tilts)
    assert any(ft.limit_sign > 0 for ft in tilts)
    k = kj.canonicalize(tri, sol)
    assert len(k.flip_trace) == 1
    assert k.block_shapes == ("square pyramid", "square pyramid")
    # same manifold as the directly merging triangulation
    direct = solved(CUSPED_PYRAMIDS_N4)
    assert kj.manifold_id(k, tri) == kj.manifold_id(
        kj.canonicalize(*direct), direct[0]
    )


def test_flat_flip_resolved_by_four_four_move():
    tri, sol = solved(COMPACT_FLAT_FLIP_N4)
    k = kj.canonicalize(tri, sol)
    assert k.converged
    assert k.triangulation.tet_count == 5
    assert k.block_shapes == ("tetrahedron",) * 5
    final = slv.solve_with_cusp_handoff(k.triangulation)
    assert abs(final.volume() - sol.volume()) <= 1e-8


def test_manifold_id_requires_convergence():
    tri, sol = solved(ONE_EDGED_N2)
    k = kj.canonicalize(tri, sol)
    broken = dataclasses.replace(k, converged=False)
    with pytest.raises(kj.CanonicalizationError):
        kj.manifold_id(broken)


# ---------------------------------------------------------------------------
# manifold identifier


def _id_of(tri: Triangulation) -> kj.ManifoldId:
    sol = slv.solve_with_cusp_handoff(tri)
    assert sol.success
    return kj.manifold_id(kj.canonicalize(tri, sol), tri)


@pytest.mark.parametrize("text", [ONE_EDGED_N2, CUSPED_N3, FLIPPING_N3])
def test_manifold_id_invariant_under_relabeling_and_mirror(text):
    tri = Triangulation.from_text(text)
    base = _id_of(tri)
    rng = random.Random(17)
    for _ in range(8):
        tet_perm = list(range(tri.tet_count))
        rng.shuffle(tet_perm)
        vperms = [tuple(rng.sample(range(4), 4)) for _ in range(tri.tet_count)]
        assert _id_of(tri.relabel(tet_perm, vperms)) == base
    assert _id_of(tri.mirror()) == base


def test_manifold_id_boundary_data():
    mid = _id_of(Triangulation.from_text(CUSPED_N3))
    assert mid.cusps == 1
    assert mid.genus_vector == (2,)
    assert ":c1:g2" in mid.as_text()
    mid2 = _id_of(Triangulation.from_text(ONE_EDGED_N2))
    assert mid2.cusps == 0
    assert mid2.genus_vector == (2,)


def test_n2_census_has_eight_distinct_ids():
    ids = set()
    for tri in enumerate_candidates(EnumerationConfig(2)).triangulations:
        ids.add(_id_of(tri).as_text())
    assert len(ids) == 8


def test_distinct_manifolds_have_distinct_ids():
    a = _id_of(Triangulation.from_text(ONE_EDGED_N2))
    b = _id_of(Triangulation.from_text(ONE_EDGED_N3))
    c = _id_of(Triangulation.from_text(CUSPED_N3))
    d = _id_of(Triangulation.from_text(FLIPPING_N3))
    assert len({a.as_text(), b.as_text(), c.as_text(), d.as_text()}) == 4
