"""Geometry of a single hyperbolic truncated (or partially ideal) tetrahedron.

A shape assigns a dihedral angle to each of the six edges of a
tetrahedron, indexed by edge slot as in :mod:`hypcensus.triangulation`
(slot ``s`` is the edge with vertex pair ``EDGE_VERTS[s]``).  From the
angles we derive, in closed form:

* the Gram matrix of the four face planes,
* the lengths of the edges between truncation triangles (with an
  analytic Jacobian with respect to the angles),
* a realization of the tetrahedron in Minkowski space ``E^{3,1}``,
* the hyperbolic volume, both via a dilogarithm closed form and via
  numerical integration of the volume differential
  ``dV = -1/2 * sum_e len(e) d(angle_e)``.

Vertices whose three incident angles sum to ``pi`` are ideal (they sit
on the sphere at infinity instead of being truncated).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .triangulation import EDGE_SLOT, EDGE_VERTS, OPPOSITE_EDGE

#: Volume of the regular ideal tetrahedron (all dihedral angles pi/3).
REGULAR_IDEAL_VOLUME = 1.0149416064096536

#: Minkowski metric diag(+,+,+,-); the last coordinate is time-like.
MINKOWSKI = np.diag([1.0, 1.0, 1.0, -1.0])

#: Slots of the three edges meeting at each vertex.
VERTEX_SLOTS: tuple[tuple[int, int, int], ...] = tuple(
    tuple(s for s in range(6) if v in EDGE_VERTS[s]) for v in range(4)
)


def minkowski_dot(x, y):
    """Inner product of signature (3,1): x.y with the last coordinate negated."""
    return x[0] * y[0] + x[1] * y[1] + x[2] * y[2] - x[3] * y[3]


# ---------------------------------------------------------------------------
# Gram matrix and edge lengths


def gram_matrix(theta: np.ndarray) -> np.ndarray:
    """Gram matrix of the four face planes.

    Faces are indexed by opposite vertex.  Faces ``i`` and ``j`` meet
    along the edge spanned by the other two vertices, so the (i, j)
    entry is ``-cos`` of the angle at the slot opposite to ``{i, j}``.
    """
    g = np.eye(4)
    for s in range(6):
        i, j = EDGE_VERTS[s]
        g[i, j] = g[j, i] = -math.cos(theta[OPPOSITE_EDGE[s]])
    return g


def gram_derivatives(theta: np.ndarray) -> np.ndarray:
    """d(gram)/d(theta_s) for each slot s, as a (6, 4, 4) array."""
    out = np.zeros((6, 4, 4))
    for s in range(6):
        i, j = EDGE_VERTS[OPPOSITE_EDGE[s]]
        out[s, i, j] = out[s, j, i] = math.sin(theta[s])
    return out


def vertex_angle_sums(theta: np.ndarray) -> np.ndarray:
    """Sum of the three dihedral angles incident to each vertex."""
    return np.array([sum(theta[s] for s in VERTEX_SLOTS[v]) for v in range(4)])


def shape_is_admissible(
    theta: np.ndarray, *, ideal_slack: float = 1e-9
) -> bool:
    """Whether the angles describe a hyperbolic tetrahedron whose vertices
    are each truncated or ideal.

    Requires every angle in (0, pi), negative Gram determinant, and every
    vertex angle sum at most pi (equality meaning an ideal vertex)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0) or np.any(theta >= math.pi):
        return False
    if np.any(vertex_angle_sums(theta) > math.pi + ideal_slack):
        return False
    return np.linalg.det(gram_matrix(theta)) < 0.0


def cosh_edge_lengths(theta: np.ndarray) -> np.ndarray:
    """cosh of the length of each edge segment between truncation planes.

    With ``h = gram^{-1}``, the edge joining vertices k and l has
    ``cosh len = -h_kl / sqrt(h_kk * h_ll)``.  Edges with an ideal
    endpoint have infinite length; the value returned is ``inf``.
    """
    h = np.linalg.inv(gram_matrix(theta))
    out = np.empty(6)
    d = np.diag(h)
    for s in range(6):
        k, l = EDGE_VERTS[s]
        denom = d[k] * d[l]
        out[s] = -h[k, l] / math.sqrt(denom) if denom > 0 else math.inf
    return out


def edge_lengths(theta: np.ndarray) -> np.ndarray:
    c = cosh_edge_lengths(theta)
    return np.array([math.acosh(x) if math.isfinite(x) else math.inf for x in c])


def cosh_edge_lengths_jacobian(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(values, jacobian) of cosh edge lengths with respect to the angles.

    ``jacobian[s, t]`` is the derivative of the cosh length at slot ``s``
    with respect to the angle at slot ``t``.
    """
    g = gram_matrix(theta)
    h = np.linalg.inv(g)
    dgs = gram_derivatives(theta)
    # dh = -h dg h for each angle
    dhs = np.array([-h @ dg @ h for dg in dgs])
    d = np.diag(h)
    values = np.empty(6)
    jac = np.empty((6, 6))
    for s in range(6):
        k, l = EDGE_VERTS[s]
        denom = d[k] * d[l]
        if denom <= 0.0:
            # an endpoint is ideal (or past ideal): infinite length, and
            # the caller's line search rejects the point on the residual
            values[s] = math.inf
            jac[s] = 0.0
            continue
        root = math.sqrt(denom)
        values[s] = -h[k, l] / root
        for t in range(6):
            dh = dhs[t]
            jac[s, t] = (
                -dh[k, l] / root
                - values[s] * 0.5 * (dh[k, k] / d[k] + dh[l, l] / d[l])
            )
    return values, jac


def truncation_segment_cosh(theta: np.ndarray, v: int, f: int) -> float:
    """cosh length of the side of the truncation triangle at vertex ``v``
    that lies in face ``f`` (``f != v``).

    The truncation triangle at a vertex is a hyperbolic triangle whose
    corner angles are the dihedral angles of the three incident edges;
    the side in face ``f`` is opposite the corner at edge ``{v, f}``, so
    its length follows from the law of cosines for angles.  At an ideal
    vertex (angle sum pi) the value degenerates to 1 (zero length).
    """
    a, b = (w for w in range(4) if w != v and w != f)
    t_f = theta[EDGE_SLOT[(v, f)]]
    t_a = theta[EDGE_SLOT[(v, a)]]
    t_b = theta[EDGE_SLOT[(v, b)]]
    return (math.cos(t_f) + math.cos(t_a) * math.cos(t_b)) / (
        math.sin(t_a) * math.sin(t_b)
    )


# ---------------------------------------------------------------------------
# Minkowski realization


@dataclass(frozen=True)
class Realization:
    """A truncated tetrahedron placed in Minkowski space.

    ``face_normals[i]`` is the unit space-like normal of face ``i``
    (the face opposite vertex ``i``), oriented towards the interior.
    ``vertex_duals[k]`` is the polar vector of vertex ``k``: space-like
    of unit norm for a truncated vertex (the pole of the truncation
    plane, on the far side from the interior), light-like for an ideal
    vertex.  ``vertex_norms[k]`` is the Minkowski norm of the raw dual
    before normalization, negative for truncated vertices and zero (to
    numerical precision) for ideal ones.  ``center`` is a unit time-like
    interior point with positive time coordinate.
    """

    face_normals: np.ndarray
    vertex_duals: np.ndarray
    vertex_norms: np.ndarray
    center: np.ndarray


def realize(theta: np.ndarray, *, ideal_tol: float = 1e-9) -> Realization:
    """Place the tetrahedron with the given angles in ``E^{3,1}``.

    The placement is produced from an eigendecomposition of the Gram
    matrix, so it is deterministic but not otherwise canonical; all
    quantities consumed downstream are Minkowski inner products, which
    do not depend on the choice.
    """
    g = gram_matrix(theta)
    evals, evecs = np.linalg.eigh(g)
    if evals[0] >= 0 or np.any(evals[1:] <= 0):
        raise ValueError("Gram matrix does not have signature (3, 1)")
    # rows n_i with <n_i, n_j> = g_ij; eigh sorts the negative eigenvalue
    # first, so column 0 carries the time coordinate.
    scaled = evecs * np.sqrt(np.abs(evals))
    normals = np.empty((4, 4))
    normals[:, :3] = scaled[:, 1:]
    normals[:, 3] = scaled[:, 0]

    h = np.linalg.inv(g)
    # raw dual of vertex k: the row of h @ normals with <dual_k, n_i> = delta_ki
    raw = h @ normals
    norms = np.diag(h).copy()  # <raw_k, raw_k> = h_kk

    center = raw.sum(axis=0)
    c2 = minkowski_dot(center, center)
    if c2 >= 0:
        raise ValueError("tetrahedron has no interior point")
    center = center / math.sqrt(-c2)
    if center[3] < 0:
        center = -center
        normals = -normals
        raw = -raw

    duals = np.empty((4, 4))
    for k in range(4):
        if norms[k] > ideal_tol:
            dual = raw[k] / math.sqrt(norms[k])
            # truncation pole lies on the far side from the interior
            if minkowski_dot(dual, center) > 0:
                dual = -dual
        else:
            dual = raw[k]
            if minkowski_dot(dual, center) > 0:
                dual = -dual
        duals[k] = dual
    return Realization(normals, duals, norms, center)


# ---------------------------------------------------------------------------
# complex dilogarithm

def _bernoulli_coefficients(count: int) -> list[float]:
    """B_k / (k+1)! for k = 0..count-1, via the defining recurrence."""
    bern = [Fraction(1)]
    for m in range(1, count):
        s = Fraction(0)
        for k in range(m):
            s += Fraction(math.comb(m + 1, k)) * bern[k]
        bern.append(-s / (m + 1))
    coeffs = []
    fact = 1
    for k in range(count):
        fact *= k + 1  # (k+1)!
        coeffs.append(float(bern[k] / fact))
    return coeffs


_DILOG_COEFFS = _bernoulli_coefficients(34)
_PI2_6 = math.pi * math.pi / 6.0


def dilog(z: complex) -> complex:
    """Complex dilogarithm Li_2(z), principal branch."""
    z = complex(z)
    if z == 0:
        return 0j
    if z == 1:
        return complex(_PI2_6)
    shift = 0j
    sign = 1.0
    if abs(z) > 1.0:
        # Li2(z) = -pi^2/6 - log(-z)^2 / 2 - Li2(1/z)
        lg = cmath.log(-z)
        shift = -_PI2_6 - 0.5 * lg * lg
        sign = -1.0
        z = 1.0 / z
    if z.real > 0.5:
        # Li2(z) = pi^2/6 - log(z) log(1-z) - Li2(1-z)
        shift += sign * (_PI2_6 - cmath.log(z) * cmath.log(1.0 - z))
        sign = -sign
        z = 1.0 - z
    # Bernoulli series in u = -log(1-z); after the reductions |u| < 2pi
    u = -cmath.log(1.0 - z)
    total = 0j
    power = 1.0 + 0j
    for c in _DILOG_COEFFS:
        power *= u
        total += c * power
    return shift + sign * total


# ---------------------------------------------------------------------------
# volume


def _u_function(z: complex, units: tuple[complex, ...]) -> complex:
    a, b, c, d, e, f = units
    return 0.5 * (
        dilog(z)
        + dilog(z * a * b * d * e)
        + dilog(z * a * c * d * f)
        + dilog(z * b * c * e * f)
        - dilog(-z * a * b * c)
        - dilog(-z * a * e * f)
        - dilog(-z * b * d * f)
        - dilog(-z * c * d * e)
    )


def volume_closed_form(theta: np.ndarray) -> float:
    """Hyperbolic volume of the truncated tetrahedron, in closed form.

    Uses the dilogarithm formula of Murakami-Yano (extended to the
    truncated case by Ushijima): with ``a = exp(i A)`` etc. for the
    angles ``A, B, C`` at one vertex and opposite angles ``D, E, F``,
    the volume is ``|Im(U(z+) - U(z-))| / 2`` where ``z+-`` solve the
    quadratic obtained from ``dU/dz = 0``.
    """
    theta = np.asarray(theta, dtype=float)
    big_a, big_b, big_c = theta[0], theta[1], theta[2]
    big_d, big_e, big_f = theta[5], theta[4], theta[3]
    a, b, c, d, e, f = (
        cmath.exp(1j * x) for x in (big_a, big_b, big_c, big_d, big_e, big_f)
    )
    units = (a, b, c, d, e, f)
    # (1-z)(1-z*abde)(1-z*acdf)(1-z*bcef) = (1+z*abc)(1+z*aef)(1+z*bdf)(1+z*cde)
    pos = (1.0 + 0j, a * b * d * e, a * c * d * f, b * c * e * f)
    neg = (a * b * c, a * e * f, b * d * f, c * d * e)
    lhs = np.array([1.0 + 0j])
    for u in pos:
        lhs = np.convolve(lhs, np.array([1.0, -u]))
    rhs = np.array([1.0 + 0j])
    for w in neg:
        rhs = np.convolve(rhs, np.array([1.0, w]))
    poly = lhs - rhs  # coefficients of z^0 .. z^4
    if abs(poly[0]) > 1e-9 or abs(poly[4]) > 1e-9:
        raise ValueError("volume quadratic did not degenerate as expected")
    # poly = z * (q2 z^2 + q1 z + q0); coefficients are poly[3], poly[2], poly[1]
    q2, q1, q0 = poly[3], poly[2], poly[1]
    disc = cmath.sqrt(q1 * q1 - 4.0 * q2 * q0)
    z_plus = (-q1 + disc) / (2.0 * q2)
    z_minus = (-q1 - disc) / (2.0 * q2)
    return abs((_u_function(z_plus, units) - _u_function(z_minus, units)).imag) / 2.0


def _reduced_edge_lengths(theta: np.ndarray, ideal: np.ndarray) -> np.ndarray:
    """Edge lengths with the divergence at marked ideal vertices removed.

    For an edge with an ideal endpoint ``k`` the geodesic length is
    infinite; subtracting ``-1/2 * log(-cof_kk)`` (which depends on the
    vertex, not on the edge) leaves a finite horosphere-truncated length
    ``log(2 cof_kl) - 1/2 log(-cof_ll)`` (or ``log(2 cof_kl)`` when both
    ends are ideal).  The dropped terms contribute nothing to the volume
    integral along paths on which the angle sum at each ideal vertex is
    constant.
    """
    g = gram_matrix(theta)
    det = np.linalg.det(g)
    cof = det * np.linalg.inv(g)  # adjugate: cof[k, l] is the (k, l) cofactor
    d = np.diag(cof)
    out = np.empty(6)
    for s in range(6):
        k, l = EDGE_VERTS[s]
        if not (ideal[k] or ideal[l]):
            out[s] = math.acosh(max(1.0, cof[k, l] / math.sqrt(d[k] * d[l])))
            continue
        val = math.log(2.0 * cof[k, l])
        if not ideal[k]:
            val -= 0.5 * math.log(-d[k])
        if not ideal[l]:
            val -= 0.5 * math.log(-d[l])
        out[s] = val
    return out


def volume_schlafli(
    theta: np.ndarray, *, quad_limit: int = 200, ideal_tol: float = 1e-9
) -> float:
    """Hyperbolic volume by integrating ``dV = -1/2 sum_e len_e d(theta_e)``
    along the straight path from the regular ideal tetrahedron (all angles
    pi/3, volume known) to the given angles.

    Slower and less accurate than the closed form; used as an independent
    cross-check.  Vertices that are ideal at the target stay ideal along
    the whole path (angle sums are linear in the path parameter), so their
    edges use horosphere-reduced lengths; the remaining vertices are ideal
    only at the path start, an integrable endpoint singularity.
    """
    theta = np.asarray(theta, dtype=float)
    start = np.full(6, math.pi / 3.0)
    delta = theta - start
    if not np.any(delta):
        return REGULAR_IDEAL_VOLUME
    ideal = np.abs(vertex_angle_sums(theta) - math.pi) <= ideal_tol

    def integrand(t: float) -> float:
        lengths = _reduced_edge_lengths(start + t * delta, ideal)
        return -0.5 * float(lengths @ delta)

    value, _err = quad(integrand, 0.0, 1.0, limit=quad_limit, points=[0.0, 1.0])
    return REGULAR_IDEAL_VOLUME + value
