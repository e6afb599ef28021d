"""Census assembly: run the whole pipeline for a given complexity,
deduplicate by canonical-decomposition identifier, back-check against
lower complexities, and persist the results.

All numeric persistence uses full-precision hex floats alongside a
decimal rendering; only the report rounds decimals.  The pipeline is
fully deterministic: identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .enumeration import EnumerationConfig, enumerate_candidates
from .homology import compute_homology
from .kojima import (
    CanonicalizationError,
    InconsistentSolutionError,
    KojimaDecomposition,
    canonicalize,
    manifold_id,
)
from .solver import GeometricSolution, solve_with_cusp_handoff
from .triangulation import Triangulation

VOLUME_GROUP_TOL = 1e-5


@dataclass(frozen=True)
class CensusRecord:
    manifold_id: str  # textual id (decomposition signature + boundary data)
    complexity: int
    boundary: tuple[int, ...]  # genus vector of the negative-chi components
    cusps: int
    volume: float
    block_shapes: tuple[str, ...]
    homology: tuple[int, tuple[int, ...]]  # (free rank, torsion)
    representative: Triangulation
    all_triangulations: int


@dataclass(frozen=True)
class Unresolved:
    triangulation: Triangulation
    stage: str  # "solve" | "canonical"
    failure: str
    classification: str
    residual_norm: float


@dataclass(frozen=True)
class CensusResult:
    n: int
    records: tuple[CensusRecord, ...]
    unresolved: tuple[Unresolved, ...]
    certified: bool
    nodes_explored: int
    config: EnumerationConfig
    # retained intermediate products, in candidate order
    candidates: tuple[Triangulation, ...]
    solutions: tuple[GeometricSolution | None, ...]
    decompositions: tuple[KojimaDecomposition | None, ...]


def config_hash(cfg: EnumerationConfig) -> str:
    text = f"n={cfg.n};filters={','.join(cfg.filters)};budget={cfg.budget_nodes}"
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def run_census(
    n: int,
    cfg: EnumerationConfig | None = None,
    *,
    back_check: bool = True,
) -> CensusResult:
    """Full pipeline at complexity n.

    Candidates that fail to solve or to canonicalize are carried as
    unresolved with their diagnostics.  When ``back_check`` is set,
    manifolds whose identifier already occurs at a lower complexity are
    dropped (they are not minimal at complexity n).
    """
    cfg = cfg or EnumerationConfig(n)
    if cfg.n != n:
        raise ValueError("configuration complexity does not match n")
    stream = enumerate_candidates(cfg)
    certified = stream.complete

    solutions: list[GeometricSolution | None] = []
    decomps: list[KojimaDecomposition | None] = []
    unresolved: list[Unresolved] = []
    by_id: dict[str, list[tuple[Triangulation, GeometricSolution, KojimaDecomposition]]] = {}
    for tri in stream.triangulations:
        sol = solve_with_cusp_handoff(tri)
        solutions.append(sol)
        if not sol.success:
            decomps.append(None)
            unresolved.append(
                Unresolved(tri, "solve", sol.failure or "solver failed",
                           sol.classification, sol.residual_norm)
            )
            continue
        try:
            k = canonicalize(tri, sol)
        except (CanonicalizationError, InconsistentSolutionError) as exc:
            decomps.append(None)
            unresolved.append(
                Unresolved(tri, "canonical", str(exc), sol.classification,
                           sol.residual_norm)
            )
            continue
        decomps.append(k)
        mid = manifold_id(k, tri).as_text()
        by_id.setdefault(mid, []).append((tri, sol, k))

    lower_ids: set[str] = set()
    if back_check and n > 1:
        lower = run_census(n - 1, back_check=True)
        lower_ids = {r.manifold_id for r in lower.records}
        # identifiers from every lower complexity, transitively
        lower_ids |= getattr(lower, "_all_lower_ids", set())

    records = []
    for mid, members in by_id.items():
        if mid in lower_ids:
            continue
        tri, sol, k = members[0]
        b = tri.boundary()
        genus = tuple(sorted(
            (c.genus for c in b.components if c.euler_characteristic < 0),
            reverse=True,
        ))
        cusps = sum(1 for c in b.components if c.euler_characteristic == 0)
        free, torsion = compute_homology(tri)
        records.append(
            CensusRecord(
                manifold_id=mid,
                complexity=n,
                boundary=genus,
                cusps=cusps,
                volume=sol.volume(),
                block_shapes=tuple(sorted(k.block_shapes)),
                homology=(free, tuple(torsion)),
                representative=tri,
                all_triangulations=len(members),
            )
        )
    records.sort(key=lambda r: (r.volume, r.manifold_id))
    result = CensusResult(
        n,
        tuple(records),
        tuple(unresolved),
        certified,
        stream.nodes_explored,
        cfg,
        stream.triangulations,
        tuple(solutions),
        tuple(decomps),
    )
    object.__setattr__(result, "_all_lower_ids", lower_ids | set(by_id))
    return result


# ---------------------------------------------------------------------------
# persistence


def _hexfloat(x: float) -> str:
    return float(x).hex()


def _angles_payload(angles) -> dict:
    return {
        "angles_hex": [[_hexfloat(a) for a in row] for row in angles],
        "angles": [[float(a) for a in row] for row in angles],
    }


def candidates_text(stream_tris, cfg: EnumerationConfig, complete: bool) -> str:
    lines = [f"# census candidates config={config_hash(cfg)} complete={str(complete).lower()}"]
    for tri in stream_tris:
        lines.append("")
        lines.append(tri.to_text().rstrip("\n"))
    return "\n".join(lines) + "\n"


def parse_candidates_text(text: str) -> tuple[list[Triangulation], bool]:
    lines = text.splitlines()
    complete = True
    if lines and lines[0].startswith("#"):
        complete = "complete=true" in lines[0]
        lines = lines[1:]
    blocks: list[list[str]] = []
    for line in lines:
        if line.startswith("tets "):
            blocks.append([line])
        elif line.strip():
            blocks[-1].append(line)
    return [Triangulation.from_text("\n".join(b) + "\n") for b in blocks], complete


def solution_record(tri: Triangulation, sol: GeometricSolution) -> dict:
    rec = {
        "signature": tri.iso_signature().hex(),
        "triangulation": tri.to_text(),
        "regime": sol.regime,
        "classification": sol.classification,
        "residual_hex": _hexfloat(sol.residual_norm),
        "residual": sol.residual_norm,
        "iterations": sol.iterations,
        "cusp_count": sol.cusp_count,
    }
    rec.update(_angles_payload(sol.angles))
    if sol.failure:
        rec["failure"] = sol.failure
    if sol.success:
        rec["volume_hex"] = _hexfloat(sol.volume())
        rec["volume"] = sol.volume()
    return rec


def kojima_record(tri: Triangulation, k: KojimaDecomposition) -> dict:
    return {
        "signature": tri.iso_signature().hex(),
        "flip_trace": [list(step) for step in k.flip_trace],
        "block_shapes": sorted(k.block_shapes),
        "decomposition_signature": k.signature.hex(),
        "converged": k.converged,
    }


def census_record_json(r: CensusRecord) -> dict:
    return {
        "manifold_id": r.manifold_id,
        "complexity": r.complexity,
        "boundary_genus": list(r.boundary),
        "cusps": r.cusps,
        "volume_hex": _hexfloat(r.volume),
        "volume": r.volume,
        "block_shapes": list(r.block_shapes),
        "homology": {"free_rank": r.homology[0], "torsion": list(r.homology[1])},
        "representative": r.representative.to_text(),
        "all_triangulations": r.all_triangulations,
    }


def unresolved_record(u: Unresolved) -> dict:
    return {
        "signature": u.triangulation.iso_signature().hex(),
        "triangulation": u.triangulation.to_text(),
        "stage": u.stage,
        "failure": u.failure,
        "classification": u.classification,
        "residual_hex": _hexfloat(u.residual_norm),
        "residual": u.residual_norm,
    }


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


# ---------------------------------------------------------------------------
# report


def group_volumes(volumes: list[float]) -> list[tuple[float, int]]:
    """Histogram of volumes grouped with tolerance VOLUME_GROUP_TOL;
    each group is keyed by its smallest member."""
    groups: list[tuple[float, int]] = []
    for v in sorted(volumes):
        if groups and v - groups[-1][0] <= VOLUME_GROUP_TOL:
            groups[-1] = (groups[-1][0], groups[-1][1] + 1)
        else:
            groups.append((v, 1))
    return groups


def _bucket_key(r: CensusRecord) -> tuple:
    boundary = "+".join(f"genus-{g}" for g in r.boundary) or "none"
    shapes = ", ".join(
        f"{c}x {s}" if c > 1 else s
        for s, c in sorted(
            (s, r.block_shapes.count(s)) for s in dict.fromkeys(r.block_shapes)
        )
    )
    return (r.cusps, boundary, shapes)


def render_report(result: CensusResult) -> str:
    lines = []
    banner = "CERTIFIED" if result.certified else "UNCERTIFIED"
    lines.append(f"# Census of complexity {result.n} — {banner}")
    lines.append("")
    if not result.certified:
        lines.append(
            "**UNCERTIFIED**: the enumeration budget was exhausted before the"
        )
        lines.append("candidate stream was complete; counts below are lower bounds.")
        lines.append("")
    lines.append(f"- candidates: {len(result.candidates)}")
    lines.append(f"- manifolds: {len(result.records)}")
    lines.append(f"- unresolved: {len(result.unresolved)}")
    lines.append(f"- enumeration nodes explored: {result.nodes_explored}")
    lines.append(f"- enumeration config: {config_hash(result.config)}")
    lines.append("")
    buckets: dict[tuple, list[CensusRecord]] = {}
    for r in result.records:
        buckets.setdefault(_bucket_key(r), []).append(r)
    for key in sorted(buckets):
        cusps, boundary, shapes = key
        recs = buckets[key]
        cusp_txt = f", cusps: {cusps}" if cusps else ""
        lines.append(f"## boundary: {boundary}{cusp_txt} — blocks: {shapes}")
        lines.append("")
        lines.append(f"manifolds: {len(recs)}")
        lines.append("")
        lines.append("| volume | count |")
        lines.append("|--------|-------|")
        hist = group_volumes([r.volume for r in recs])
        for v, c in hist:
            lines.append(f"| {v:.6f} | {c} |")
        mult = max(c for _v, c in hist)
        lines.append("")
        lines.append(
            f"volume values: {len(hist)}, range [{hist[0][0]:.6f}, "
            f"{hist[-1][0]:.6f}], max multiplicity {mult}"
        )
        lines.append("")
    if result.unresolved:
        lines.append("## unresolved candidates")
        lines.append("")
        for u in result.unresolved:
            sig = u.triangulation.iso_signature().hex()
            lines.append(f"- `{sig}` [{u.stage}] {u.failure}")
        lines.append("")
    return "\n".join(lines) + "\n"


def write_outputs(result: CensusResult, outdir: str | Path) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "candidates.tri").write_text(
        candidates_text(result.candidates, result.config, result.certified)
    )
    (out / "solutions.jsonl").write_text(
        _jsonl(
            solution_record(t, s)
            for t, s in zip(result.candidates, result.solutions)
        )
    )
    (out / "kojima.jsonl").write_text(
        _jsonl(
            kojima_record(t, k)
            for t, k in zip(result.candidates, result.decompositions)
            if k is not None
        )
    )
    (out / "census.jsonl").write_text(
        _jsonl(census_record_json(r) for r in result.records)
    )
    (out / "unresolved.jsonl").write_text(
        _jsonl(unresolved_record(u) for u in result.unresolved)
    )
    (out / "report.md").write_text(render_report(result))
