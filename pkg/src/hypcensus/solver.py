"""Assembly and solution of the hyperbolicity equations.

Compact regime: for each edge class one angle-sum equation (total
dihedral angle 2*pi) and, per consecutive pair of incidences, one
matching equation on cosh of the edge length — a square 6n x 6n system
solved by damped Newton with the analytic Jacobian.

Cusped regime (some boundary tori become cusps): the length equations
touching ideal vertices lose meaning, so the system is rebuilt from
local face-matching and completeness conditions:

* angle sums 2*pi around every edge class,
* angle sum pi at every ideal vertex,
* matching truncation-segment lengths at every truncated corner of
  every glued face pair (equivalent to the length equations when no
  corner is ideal),
* trivial derivative of the similarity holonomy of each cusp torus,
  one complex condition per non-tree side of the dual graph of the
  cusp's link triangulation (these force the Euclidean developing of
  the link to close up around vertices and to be complete).

The cusped residual is consistent but intentionally redundant; the
Newton step is computed in the least-squares sense, which agrees with
the square solve when the system is square and nonsingular.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .triangulation import EDGE_SLOT, Triangulation

NEWTON_TOL = 1e-11
MAX_ITERATIONS = 50
CUSP_SUM_THRESHOLD = math.pi - 1e-4
CUSP_STALL_RATIO = 0.9
CUSP_STREAK = 3
INIT_CLAMP = 1e-3
HANDOFF_RESTARTS = 16

#: Slots incident to each vertex (same table as geometry.VERTEX_SLOTS).
_VSLOTS = geo.VERTEX_SLOTS


class SystemError_(ValueError):
    pass


@dataclass(frozen=True)
class CuspLink:
    """The triangulated torus link of one cusp.

    ``triangles`` are the (tet, vertex) pairs; ``cycles`` gives each
    triangle's corners (the three vertices sharing an edge with the
    ideal vertex) in the cyclic order induced by the manifold
    orientation, so every developed link triangle is consistently
    oriented in the plane.
    """

    triangles: tuple[tuple[int, int], ...]
    cycles: dict[tuple[int, int], tuple[int, int, int]]


@dataclass(frozen=True)
class EquationSystem:
    triangulation: Triangulation
    regime: str  # "compact" | "cusped"
    ideal_vertices: frozenset[tuple[int, int]] = frozenset()
    cusps: tuple[CuspLink, ...] = ()

    @property
    def unknown_count(self) -> int:
        return 6 * self.triangulation.tet_count


@dataclass(frozen=True)
class GeometricSolution:
    angles: np.ndarray  # (n, 6)
    residual_norm: float
    regime: str
    iterations: int
    classification: str  # "compact" | "cusped" | "failed"
    cusp_count: int = 0
    failure: str | None = None
    cusp_suspects: tuple[tuple[int, int], ...] = ()

    @property
    def success(self) -> bool:
        return self.classification != "failed"

    def volume(self) -> float:
        return sum(geo.volume_closed_form(row) for row in self.angles)


# ---------------------------------------------------------------------------
# system construction


def _oriented_corner_cycle(sign: int, v: int) -> tuple[int, int, int]:
    """Cyclic order of the corners of the link triangle at vertex ``v`` of
    a tetrahedron with orientation sign ``sign``, counterclockwise in the
    induced boundary orientation."""
    a, b, c = (w for w in range(4) if w != v)
    perm = (v, a, b, c)
    inversions = sum(
        1
        for i in range(4)
        for j in range(i + 1, 4)
        if perm[i] > perm[j]
    )
    even = inversions % 2 == 0
    if even == (sign > 0):
        return (a, b, c)
    return (a, c, b)


def _build_cusp_links(
    tri: Triangulation, ideal: frozenset[tuple[int, int]]
) -> tuple[CuspLink, ...]:
    signs = tri.orientation_signs()
    if signs is None:
        raise SystemError_("cusped system requires an orientable triangulation")
    components = []
    for comp, tris in zip(tri.boundary().components, tri.boundary_membership()):
        members = set(tris)
        if not (members & ideal):
            continue
        if not members <= ideal:
            raise SystemError_("ideal vertices must fill whole boundary components")
        if comp.euler_characteristic != 0 or not comp.orientable:
            raise SystemError_("only torus boundary components can become cusps")
        cycles = {(t, v): _oriented_corner_cycle(signs[t], v) for t, v in tris}
        components.append(CuspLink(tris, cycles))
    if not components:
        raise SystemError_("cusped regime with no torus boundary component")
    return tuple(components)


def build_system(
    tri: Triangulation,
    regime: str,
    ideal_vertices: frozenset[tuple[int, int]] | None = None,
) -> EquationSystem:
    """Assemble the hyperbolicity equations for a triangulation.

    For the cusped regime ``ideal_vertices`` selects which truncation
    triangles become ideal; it defaults to all torus boundary
    components, and must consist of whole torus components.
    """
    tri.edge_classes()  # validates the edge structure
    if regime == "compact":
        return EquationSystem(tri, "compact")
    if regime != "cusped":
        raise SystemError_(f"unknown regime {regime!r}")
    if ideal_vertices is None:
        ideal_vertices = frozenset(
            tv
            for comp, tvs in zip(tri.boundary().components, tri.boundary_membership())
            if comp.euler_characteristic == 0
            for tv in tvs
        )
    ideal_vertices = frozenset(ideal_vertices)
    cusps = _build_cusp_links(tri, ideal_vertices)
    return EquationSystem(tri, "cusped", ideal_vertices, cusps)


# ---------------------------------------------------------------------------
# residuals


def _angles_matrix(x: np.ndarray, n: int) -> np.ndarray:
    return x.reshape(n, 6)


def point_is_admissible(system: EquationSystem, x: np.ndarray) -> bool:
    """Whether every tetrahedron shape is inside the moduli domain.

    Ideal vertices are allowed to overshoot an angle sum of pi slightly
    while Newton converges onto the constraint."""
    n = system.triangulation.tet_count
    th = _angles_matrix(x, n)
    if np.any(th <= 0.0) or np.any(th >= math.pi):
        return False
    for t in range(n):
        sums = geo.vertex_angle_sums(th[t])
        for v in range(4):
            slack = 1e-2 if (t, v) in system.ideal_vertices else 1e-9
            if sums[v] > math.pi + slack:
                return False
        if np.linalg.det(geo.gram_matrix(th[t])) >= 0.0:
            return False
    return True


def _compact_residual_jacobian(
    system: EquationSystem, x: np.ndarray, *, with_jacobian: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    tri = system.triangulation
    n = tri.tet_count
    th = _angles_matrix(x, n)
    cosh_vals = np.empty((n, 6))
    cosh_jacs = np.empty((n, 6, 6)) if with_jacobian else None
    # near-ideal vertices send cosh lengths to inf and differences to
    # nan; such trial points are rejected by the line search, so the
    # IEEE warnings carry no information.
    rows: list[float] = []
    jac_rows: list[np.ndarray] = []
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for t in range(n):
            if with_jacobian:
                cosh_vals[t], cosh_jacs[t] = geo.cosh_edge_lengths_jacobian(th[t])
            else:
                cosh_vals[t] = geo.cosh_edge_lengths(th[t])
        for ec in tri.edge_classes():
            total = sum(th[t, s] for t, s, _ in ec.incidences)
            rows.append(total - 2.0 * math.pi)
            if with_jacobian:
                jr = np.zeros(6 * n)
                for t, s, _ in ec.incidences:
                    jr[6 * t + s] += 1.0
                jac_rows.append(jr)
            inc = ec.incidences
            for (t1, s1, _), (t2, s2, _) in zip(inc, inc[1:]):
                rows.append(cosh_vals[t1, s1] - cosh_vals[t2, s2])
                if with_jacobian:
                    jr = np.zeros(6 * n)
                    jr[6 * t1 : 6 * t1 + 6] += cosh_jacs[t1][s1]
                    jr[6 * t2 : 6 * t2 + 6] -= cosh_jacs[t2][s2]
                    jac_rows.append(jr)
    res = np.array(rows)
    return res, (np.array(jac_rows) if with_jacobian else None)


def _develop_cusp(
    link: CuspLink, tri: Triangulation, th: np.ndarray
) -> list[tuple[complex, complex, complex, complex]]:
    """Develop the link triangulation in the plane along a BFS tree and
    return, per non-tree side, the would-be and actual coordinates
    (P_a, P_b, Q_a, Q_b) of the two shared corners."""

    def angle(t: int, v: int, w: int) -> float:
        return th[t, EDGE_SLOT[(v, w)]]

    def place_third(
        t: int,
        v: int,
        known: dict[int, complex],
        missing: int,
    ) -> complex:
        cyc = link.cycles[(t, v)]
        others = [w for w in cyc if w != missing]
        a, b = others
        # first -> second must run counterclockwise in the cycle
        idx = cyc.index(a)
        if cyc[(idx + 1) % 3] != b:
            a, b = b, a
        alpha = angle(t, v, a)
        beta = angle(t, v, b)
        pa, pb = known[a], known[b]
        return pa + (pb - pa) * (
            math.sin(beta) / math.sin(alpha + beta)
        ) * cmath.exp(1j * alpha)

    coords: dict[tuple[int, int], dict[int, complex]] = {}
    root = link.triangles[0]
    t0, v0 = root
    c0 = link.cycles[root]
    base = {c0[0]: 0j, c0[1]: 1 + 0j}
    base[c0[2]] = place_third(t0, v0, base, c0[2])
    coords[root] = base

    crossings: list[tuple[complex, complex, complex, complex]] = []
    visited_sides: set[tuple[tuple[int, int], int]] = set()
    queue = [root]
    qi = 0
    while qi < len(queue):
        t, v = queue[qi]
        qi += 1
        for f in sorted(w for w in range(4) if w != v):
            if ((t, v), f) in visited_sides:
                continue
            t2, f2, perm = tri.gluing(t, f)
            v2 = perm[v]
            visited_sides.add(((t, v), f))
            visited_sides.add(((t2, v2), f2))
            x, y = (w for w in range(4) if w != v and w != f)
            px, py = coords[(t, v)][x], coords[(t, v)][y]
            if (t2, v2) not in coords:
                known = {perm[x]: px, perm[y]: py}
                known[f2] = place_third(t2, v2, known, f2)
                coords[(t2, v2)] = known
                queue.append((t2, v2))
            else:
                qa = coords[(t2, v2)][perm[x]]
                qb = coords[(t2, v2)][perm[y]]
                crossings.append((px, py, qa, qb))
    return crossings


def _cusped_residual(system: EquationSystem, x: np.ndarray) -> np.ndarray:
    tri = system.triangulation
    n = tri.tet_count
    th = _angles_matrix(x, n)
    rows: list[float] = []
    # angle sums around edges
    for ec in tri.edge_classes():
        rows.append(sum(th[t, s] for t, s, _ in ec.incidences) - 2.0 * math.pi)
    # ideal vertex sums
    for t, v in sorted(system.ideal_vertices):
        rows.append(sum(th[t, s] for s in _VSLOTS[v]) - math.pi)
    # truncation-segment matching at truncated face corners
    for t in range(n):
        for f in range(4):
            t2, f2, perm = tri.gluing(t, f)
            if (t2, f2) < (t, f):
                continue  # handle each face pair once
            for v in range(4):
                if v == f or (t, v) in system.ideal_vertices:
                    continue
                rows.append(
                    geo.truncation_segment_cosh(th[t], v, f)
                    - geo.truncation_segment_cosh(th[t2], perm[v], perm[f])
                )
    # similarity holonomy of each cusp link
    for link in system.cusps:
        for pa, pb, qa, qb in _develop_cusp(link, tri, th):
            a = (pb - pa) / (qb - qa)
            rows.append(math.log(abs(a)))
            rows.append(math.atan2(a.imag, a.real))
    return np.array(rows)


def _cusped_jacobian(system: EquationSystem, x: np.ndarray) -> np.ndarray:
    eps = 1e-7
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        cols.append((_cusped_residual(system, xp) - _cusped_residual(system, xm)) / (2 * eps))
    return np.stack(cols, axis=1)


def residual(system: EquationSystem, x: np.ndarray) -> np.ndarray:
    if system.regime == "compact":
        return _compact_residual_jacobian(system, x, with_jacobian=False)[0]
    return _cusped_residual(system, x)


def jacobian(system: EquationSystem, x: np.ndarray) -> np.ndarray:
    if system.regime == "compact":
        return _compact_residual_jacobian(system, x, with_jacobian=True)[1]
    return _cusped_jacobian(system, x)


# ---------------------------------------------------------------------------
# initial guesses


def default_init(system: EquationSystem) -> np.ndarray:
    """Each angle 2*pi / valence of its edge class, clamped into
    (1e-3, pi - 1e-3), then scaled down if needed to enter the moduli
    domain (large valence-3 angles can start with vertex sums over pi)."""
    tri = system.triangulation
    n = tri.tet_count
    class_of = tri.edge_class_of()
    classes = tri.edge_classes()
    x = np.empty(6 * n)
    for t in range(n):
        for s in range(6):
            val = 2.0 * math.pi / classes[class_of[(t, s)]].valence
            x[6 * t + s] = min(max(val, INIT_CLAMP), math.pi - INIT_CLAMP)
    scale = 1.0
    for _ in range(120):
        if point_is_admissible(system, scale * x):
            return scale * x
        scale *= 0.97
    return x  # let the solver report the domain failure


def perturbed_init(init: np.ndarray, index: int, magnitude: float = 1e-3) -> np.ndarray:
    """Deterministic restart perturbation: a fixed counter-based sequence
    (no random state anywhere in the pipeline)."""
    k = np.arange(init.size) + init.size * (index + 1)
    return init + magnitude * np.sin(1e4 * (k + 1).astype(float))


# ---------------------------------------------------------------------------
# Newton iteration


def _norm2(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def newton_solve(
    system: EquationSystem,
    init: np.ndarray,
    *,
    tol: float = NEWTON_TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> GeometricSolution:
    """Damped (Gauss-)Newton iteration.

    The linear step uses LAPACK partial pivoting for square systems and a
    least-squares solve for the (redundant, consistent) cusped systems;
    both are deterministic.  Backtracking halves the step until the
    iterate stays inside the moduli domain and the residual decreases.
    In the compact regime a vertex angle sum pressing against pi for
    several iterations while the residual stalls aborts the solve with a
    "cusp suspected" hint for the handoff driver.
    """
    tri = system.triangulation
    n = tri.tet_count
    x = np.asarray(init, dtype=float).copy()
    if not point_is_admissible(system, x):
        return GeometricSolution(
            _angles_matrix(x, n).copy(),
            math.inf,
            system.regime,
            0,
            "failed",
            failure="left moduli domain",
            cusp_suspects=_suspect_vertices(system, x),
        )
    f = residual(system, x)
    if not np.all(np.isfinite(f)):
        # admissible but on the ideal boundary of the moduli domain
        return GeometricSolution(
            _angles_matrix(x, n).copy(),
            math.inf,
            system.regime,
            0,
            "failed",
            failure="left moduli domain",
            cusp_suspects=_suspect_vertices(system, x),
        )
    norm = _norm2(f)
    streaks: dict[tuple[int, int], int] = {}
    square = system.regime == "compact"

    def finish_success(iterations: int) -> GeometricSolution:
        classification = "compact" if system.regime == "compact" else "cusped"
        return GeometricSolution(
            _angles_matrix(x, n).copy(),
            float(np.max(np.abs(f))),
            system.regime,
            iterations,
            classification,
            cusp_count=len(system.cusps),
        )

    for it in range(max_iterations):
        if np.max(np.abs(f)) <= tol:
            return finish_success(it)
        jac = jacobian(system, x)
        if square:
            try:
                step = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                return GeometricSolution(
                    _angles_matrix(x, n).copy(),
                    float(np.max(np.abs(f))),
                    system.regime,
                    it,
                    "failed",
                    failure="diverged",
                    cusp_suspects=_suspect_vertices(system, x),
                )
        else:
            step = np.linalg.lstsq(jac, -f, rcond=None)[0]
        lam = 1.0
        accepted = False
        for _ in range(40):
            xn = x + lam * step
            if point_is_admissible(system, xn):
                fn = residual(system, xn)
                if _norm2(fn) <= (1.0 - 1e-4 * lam) * norm:
                    x, f = xn, fn
                    new_norm = _norm2(fn)
                    stalled = new_norm > CUSP_STALL_RATIO * norm
                    norm = new_norm
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return GeometricSolution(
                _angles_matrix(x, n).copy(),
                float(np.max(np.abs(f))),
                system.regime,
                it,
                "failed",
                failure="left moduli domain",
                cusp_suspects=_suspect_vertices(system, x),
            )
        if system.regime == "compact":
            suspects = _suspect_vertices(system, x)
            for tv in suspects:
                streaks[tv] = streaks.get(tv, 0) + 1
            for tv in list(streaks):
                if tv not in suspects:
                    del streaks[tv]
            if stalled and any(c >= CUSP_STREAK for c in streaks.values()):
                return GeometricSolution(
                    _angles_matrix(x, n).copy(),
                    float(np.max(np.abs(f))),
                    system.regime,
                    it + 1,
                    "failed",
                    failure="cusp suspected",
                    cusp_suspects=suspects,
                )
    if np.max(np.abs(f)) <= tol:
        return finish_success(max_iterations)
    return GeometricSolution(
        _angles_matrix(x, n).copy(),
        float(np.max(np.abs(f))),
        system.regime,
        max_iterations,
        "failed",
        failure="diverged",
        cusp_suspects=_suspect_vertices(system, x),
    )


def _suspect_vertices(
    system: EquationSystem, x: np.ndarray
) -> tuple[tuple[int, int], ...]:
    n = system.triangulation.tet_count
    th = _angles_matrix(x, n)
    out = []
    for t in range(n):
        sums = geo.vertex_angle_sums(th[t])
        for v in range(4):
            if sums[v] > CUSP_SUM_THRESHOLD:
                out.append((t, v))
    return tuple(out)


def solve_with_cusp_handoff(
    tri: Triangulation, restarts: int = HANDOFF_RESTARTS
) -> GeometricSolution:
    """Solve the compact system; on a cusp-suspected failure, promote the
    drifting boundary components to cusps and re-solve the cusped system
    from the limiting angles.

    A failed attempt is retried from the fixed counter-based perturbation
    sequence (deterministic, no random state); the diagnostics of the
    unperturbed attempt are reported if every attempt fails."""
    system = build_system(tri, "compact")
    base = default_init(system)
    first_failure: GeometricSolution | None = None
    for attempt in range(restarts + 1):
        init = base if attempt == 0 else perturbed_init(base, attempt - 1)
        sol = _handoff_attempt(tri, system, init)
        if sol.success:
            return sol
        if first_failure is None:
            first_failure = sol
    assert first_failure is not None
    return first_failure


def _handoff_attempt(
    tri: Triangulation, system: EquationSystem, init: np.ndarray
) -> GeometricSolution:
    sol = newton_solve(system, init)
    if sol.success or not sol.cusp_suspects:
        return sol
    suspects = set(sol.cusp_suspects)
    ideal: set[tuple[int, int]] = set()
    for comp, tvs in zip(tri.boundary().components, tri.boundary_membership()):
        if suspects & set(tvs):
            if comp.euler_characteristic != 0:
                return GeometricSolution(
                    sol.angles,
                    sol.residual_norm,
                    "compact",
                    sol.iterations,
                    "failed",
                    failure=(sol.failure or "") + "; non-torus boundary drifted to ideal",
                    cusp_suspects=sol.cusp_suspects,
                )
            ideal.update(tvs)
    try:
        cusped = build_system(tri, "cusped", frozenset(ideal))
    except SystemError_ as exc:
        return GeometricSolution(
            sol.angles,
            sol.residual_norm,
            "compact",
            sol.iterations,
            "failed",
            failure=(sol.failure or "") + f"; {exc}",
            cusp_suspects=sol.cusp_suspects,
        )
    sol2 = newton_solve(cusped, sol.angles.reshape(-1))
    if sol2.success:
        return sol2
    return GeometricSolution(
        sol2.angles,
        sol2.residual_norm,
        "cusped",
        sol.iterations + sol2.iterations,
        "failed",
        failure=f"compact: {sol.failure}; cusped: {sol2.failure}",
        cusp_suspects=sol.cusp_suspects,
    )
