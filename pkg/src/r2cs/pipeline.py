"""Stage runner: configuration, cached stages, self-describing reports and replay."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .cache import Cache, make_header
from .conic import ConicFrame, GroupElement
from .field import format_polynomial, make_tower, prime_power
from .linearsets import (
    Classifier,
    LinearSet,
    all_internal,
    clique_size,
    compatible,
    enumerate_rank3,
    find_higher_rank,
    materialize,
    search_subplanes,
    subline_inventory,
    subplanes_of,
)
from .semifields import (
    cg_pair_check,
    cohen_ganley,
    family_pair,
    flock_from_pair,
    has_zero_divisors,
    linear_set_W,
    make_family,
    penttila_williams,
    verify_flock,
)
from .sublines import (
    HOSTS,
    compute_B,
    enumerate_subline_pairs,
    feasible_q_range,
    subline_points,
)

log = logging.getLogger(__name__)

STAGES = ("bounds", "sublines", "subplanes", "rank4", "rank5", "verify")
EXIT_OK, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3


class InfeasibleError(ValueError):
    """Parameters outside the feasible range (or an unusable field)."""


class HeaderError(ValueError):
    """A report replayed against a field it was not produced for."""


@dataclass
class RunConfig:
    stage: str
    p: int = 3
    e: int = 1
    n: int = 4
    modulus: list[int] | None = None  # lowest coefficient first
    eta_log: int | None = None
    threads: int = 1
    cache_dir: str | None = None
    use_cache: bool = True
    output_format: str = "json"
    force: bool = False
    secant: bool = False
    family: str | None = None
    m_log: int | None = None
    sigma: int = 1
    samples: int = 10**7
    block: int = 256

    @property
    def q(self) -> int:
        return self.p**self.e


@dataclass
class ReportEnvelope:
    tool: str
    version: str
    stage: str
    field: dict | None
    params: dict
    elapsed: float
    counts: dict
    witnesses: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ReportEnvelope":
        return cls(**d)

    @property
    def ok(self) -> bool:
        return all(v is not False for v in self.checks.values())


COUNTING_CONVENTION = "sublines = (b, mu) pairs / q; each subline through x has q choices of y_b"


def build_frame(cfg: RunConfig) -> ConicFrame:
    try:
        F = make_tower(cfg.p, cfg.e, cfg.n, cfg.modulus)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc
    eta = None if cfg.eta_log is None else F.alpha(cfg.eta_log)
    try:
        return ConicFrame(F, eta)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc


def _check_feasible(cfg: RunConfig) -> None:
    if cfg.p == 2:
        raise InfeasibleError("characteristic 2 is not supported")
    if cfg.force:
        return
    if cfg.n >= 2 and cfg.q not in feasible_q_range(cfg.n):
        raise InfeasibleError(
            f"q = {cfg.q} is excluded by the subline bounds for n = {cfg.n} (use --force)")


def _envelope(cfg: RunConfig, frame: ConicFrame | None, params: dict, elapsed: float,
              counts: dict, **kw) -> ReportEnvelope:
    return ReportEnvelope("r2cs", __version__, cfg.stage,
                          None if frame is None else frame.describe(), params,
                          round(float(elapsed), 3), counts, **kw)


# -- stages ----------------------------------------------------------------------------


def stage_bounds(cfg: RunConfig) -> ReportEnvelope:
    t0 = time.perf_counter()
    qs = feasible_q_range(cfg.n)
    return _envelope(cfg, None, {"n": cfg.n}, time.perf_counter() - t0,
                     {"feasible_q": qs, "largest": max(qs)})


def subline_pairs(frame: ConicFrame, host: str, cache: Cache, threads: int = 1,
                  block: int = 256) -> tuple[list[tuple[int, int]], float]:
    """All (b, mu) pairs of a host line, from cache or computed with per-block checkpoints."""
    header = make_header("sublines", frame.describe(), {"host": host})
    body = cache.load(header)
    if body is not None:
        return [tuple(p) for p in body["pairs"]], body["elapsed"]  # type: ignore[misc]
    B = compute_B(frame, host)
    bs = [b for b in np.flatnonzero(B).tolist() if b != 0]
    state = cache.load_checkpoint(header) or {"done": 0, "pairs": [], "elapsed": 0.0}
    done = state["done"]
    pairs = [tuple(p) for p in state["pairs"]]
    t0 = time.perf_counter() - state["elapsed"]
    chunks = [bs[i:i + block] for i in range(done, len(bs), block)]

    def work(chunk):
        return enumerate_subline_pairs(frame, host, block=block, b_values=chunk)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for chunk, got in zip(chunks, pool.map(work, chunks)):
            pairs.extend(got)
            done += len(chunk)
            cache.store_checkpoint(header, {"done": done, "pairs": [list(p) for p in pairs],
                                            "elapsed": time.perf_counter() - t0})
    pairs.sort()
    elapsed = time.perf_counter() - t0
    cache.store(header, {"pairs": [list(p) for p in pairs], "elapsed": round(elapsed, 3)})
    cache.clear_checkpoint(header)
    return pairs, round(elapsed, 3)


def stage_sublines(cfg: RunConfig, cache: Cache) -> ReportEnvelope:
    _check_feasible(cfg)
    frame = build_frame(cfg)
    host = "secant" if cfg.secant else "external"
    pairs, elapsed = subline_pairs(frame, host, cache, cfg.threads, cfg.block)
    q = frame.F.q
    if len(pairs) % q:
        raise AssertionError(f"{len(pairs)} pairs is not a multiple of q")
    F = frame.F
    return _envelope(
        cfg, frame, {"p": cfg.p, "e": cfg.e, "n": cfg.n, "host": host,
                     "modulus": format_polynomial(F.modulus)},
        elapsed, {"pair_count": len(pairs), "subline_count": len(pairs) // q},
        witnesses={"pairs": [list(p) for p in pairs],
                   "pairs_alpha": [[F.fmt(b), F.fmt(m)] for b, m in pairs]},
        conventions={"counting": COUNTING_CONVENTION, "host": host},
    )


def _class_witnesses(frame: ConicFrame, sets: Sequence[LinearSet], semilinear: bool) -> tuple[Any, dict]:
    cl = Classifier(frame, semilinear)
    c = cl.classify([s.points for s in sets])
    reps = []
    for lab, i in enumerate(c.representatives()):
        reps.append({"class": lab, "set": sets[i].to_json(),
                     "canonical": list(c.canonical_forms[lab]),
                     "element": c.witnesses[i].to_json()})
    return c, {"classes": reps, "labels": c.labels,
               "elements": [w.to_json() for w in c.witnesses],
               "set_points": [list(s.points) for s in sets]}


def _pairs_for(frame: ConicFrame, cache: Cache, cfg: RunConfig) -> dict[str, list]:
    return {h: subline_pairs(frame, h, cache, cfg.threads, cfg.block)[0] for h in HOSTS}


def stage_subplanes(cfg: RunConfig, cache: Cache) -> ReportEnvelope:
    _check_feasible(cfg)
    frame = build_frame(cfg)
    pairs = _pairs_for(frame, cache, cfg)
    header = make_header("subplanes", frame.describe())
    body = cache.load(header)
    if body is None:
        t0 = time.perf_counter()
        res = search_subplanes(frame, pairs)
        body = {"sets": [s.to_json() for s in res.subplanes], "tested": res.tested,
                "representatives": {h: res.representatives[h].tolist() for h in HOSTS},
                "elapsed": round(time.perf_counter() - t0, 3)}
        cache.store(header, body)
    sets = [LinearSet.from_json(d) for d in body["sets"]]
    counts: dict[str, Any] = {"subplane_count": len(sets), "pairs_tested": body["tested"],
                              "representative_sublines": {h: len(v) for h, v in body["representatives"].items()}}
    witnesses: dict[str, Any] = {}
    for semi in (False, True):
        tag = "semilinear" if semi else "linear"
        c, w = _class_witnesses(frame, sets, semi)
        counts[f"classes_{tag}"] = c.class_count
        witnesses[tag] = w
        if _cg_available(frame) and sets:
            W = linear_set_W(frame, cohen_ganley(frame.F).pair())
            cl = Classifier(frame, semi)
            emb = {cl.canonical(sp)[0] for sp in subplanes_of(frame, W.linear_set)}
            counts[f"embed_cg_{tag}"] = len(emb & set(c.canonical_forms))
    return _envelope(cfg, frame, {"p": cfg.p, "e": cfg.e, "n": cfg.n}, body["elapsed"], counts,
                     witnesses=witnesses,
                     conventions={"equivalence": "conic stabiliser; semilinear adds the p-power Frobenius",
                                  "search": "first subline runs over G_x-orbit representatives"})


def _cg_available(frame: ConicFrame) -> bool:
    return frame.F.q == 3 and frame.F.n >= 2


def stage_rank(cfg: RunConfig, cache: Cache, rank: int) -> ReportEnvelope:
    _check_feasible(cfg)
    frame = build_frame(cfg)
    F = frame.F
    pairs = _pairs_for(frame, cache, cfg)
    header = make_header(f"rank{rank}", frame.describe())
    body = cache.load(header)
    if body is None:
        t0 = time.perf_counter()
        inv = subline_inventory(frame, pairs)
        r3 = enumerate_rank3(frame, inv)
        res = find_higher_rank(frame, rank, r3)
        cliques = []
        for first, cl in res.cliques.items():
            g = res.graphs[first]
            for c in cl:
                cliques.append([list(map(int, inv.gens[first]))]
                               + [list(map(int, inv.gens[g.vertices[v]])) for v in c])
        body = {"sets": [s.to_json() for s in res.sets], "cliques": cliques,
                "graph_count": len(res.graphs), "rejected": res.rejected_cliques,
                "sublines_through_x": len(inv), "rank3_pairs": sum(len(v) for v in r3.pairs.values()),
                "elapsed": round(time.perf_counter() - t0, 3)}
        cache.store(header, body)
    sets = [LinearSet.from_json(d) for d in body["sets"]]
    counts: dict[str, Any] = {"set_count": len(sets), "clique_count": len(body["cliques"]),
                              "graph_count": body["graph_count"], "clique_size": clique_size(F.q, rank),
                              "rejected_cliques": body["rejected"],
                              "sublines_through_x": body["sublines_through_x"],
                              "rank3_pairs": body["rank3_pairs"]}
    witnesses: dict[str, Any] = {"cliques": body["cliques"]}
    refs = _reference_sets(frame)
    for semi in (False, True):
        tag = "semilinear" if semi else "linear"
        c, w = _class_witnesses(frame, sets, semi)
        counts[f"classes_{tag}"] = c.class_count
        witnesses[tag] = w
        cl = Classifier(frame, semi)
        forms = set(c.canonical_forms)
        for name, ls in refs.items():
            counts[f"{name}_match_{tag}"] = cl.canonical(ls.points)[0] in forms
    return _envelope(cfg, frame, {"p": cfg.p, "e": cfg.e, "n": cfg.n, "rank": rank}, body["elapsed"],
                     counts, witnesses=witnesses,
                     conventions={"counting": "distinct point sets from cliques of all graphs of sublines on ell_e, ell_s",
                                  "equivalence": "conic stabiliser; semilinear adds the p-power Frobenius"})


def _reference_sets(frame: ConicFrame) -> dict[str, LinearSet]:
    F = frame.F
    out = {}
    if _cg_available(frame):
        out["cg"] = linear_set_W(frame, cohen_ganley(F).pair()).linear_set
    if F.q == 3 and F.n == 5:
        out["pw"] = linear_set_W(frame, penttila_williams(F).pair()).linear_set
    return out


def stage_verify(cfg: RunConfig) -> ReportEnvelope:
    if cfg.family is None:
        raise ValueError("verify needs --family")
    frame = build_frame(cfg)
    F = frame.F
    t0 = time.perf_counter()
    m = None if cfg.m_log is None else F.alpha(cfg.m_log)
    try:
        S = make_family(F, cfg.family, m, cfg.sigma)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc
    pair = family_pair(S)
    checks: dict[str, Any] = {}
    checks["no_zero_divisors"] = not has_zero_divisors(S, samples=cfg.samples)
    checks["cg_condition"] = cg_pair_check(F, pair)
    W = linear_set_W(frame, pair)
    checks["W_internal"] = W.all_internal
    info: dict[str, Any] = {"W_in_line": W.in_line, "W_points": len(W.linear_set.points)}
    # rank-n W spans at most a line when n <= 2
    checks["W_in_line_expected"] = W.in_line == (cfg.family in ("dickson", "kk") or F.n <= 2)
    if F.order <= 3**7:
        checks["flock"] = verify_flock(flock_from_pair(F, pair))
    if cfg.family == "pw" or (cfg.family == "cg" and F.n == 5):
        other = cohen_ganley(F) if cfg.family == "pw" else penttila_williams(F)
        Wo = linear_set_W(frame, other.pair())
        cl = Classifier(frame, True)
        info["W_inequivalent_to_other"] = cl.canonical(W.linear_set.points)[0] != cl.canonical(Wo.linear_set.points)[0]
        checks["W_inequivalent_to_other"] = info["W_inequivalent_to_other"]
    return _envelope(cfg, frame, {"family": cfg.family, "p": cfg.p, "e": cfg.e, "n": cfg.n},
                     time.perf_counter() - t0, info,
                     witnesses={"pair": pair.to_json(F), "W": W.linear_set.to_json(),
                                "multiplication": S.describe()},
                     conventions={"pair": "(f, g) = (-G, F) for the product (xv+yu+F(xu), yv+G(xu))"},
                     checks=checks)


def run(cfg: RunConfig) -> ReportEnvelope:
    if cfg.stage not in STAGES:
        raise ValueError(f"unknown stage {cfg.stage!r}")
    cache = Cache(cfg.cache_dir, enabled=cfg.use_cache)
    if cfg.stage == "bounds":
        return stage_bounds(cfg)
    if cfg.stage == "sublines":
        return stage_sublines(cfg, cache)
    if cfg.stage == "subplanes":
        return stage_subplanes(cfg, cache)
    if cfg.stage in ("rank4", "rank5"):
        return stage_rank(cfg, cache, int(cfg.stage[-1]))
    return stage_verify(cfg)


# -- replay ------------------------------------------------------------------------------


@dataclass
class ReplayResult:
    ok: bool
    failures: list[str]

    def __bool__(self) -> bool:
        return self.ok


def frame_for_report(report: ReportEnvelope) -> ConicFrame:
    d = report.field
    if d is None:
        raise HeaderError("report carries no field description")
    F = make_tower(d["p"], d["e"], d["n"], d["modulus"])
    return ConicFrame(F, F.alpha(d["eta_log"]))


def replay_verify(report: ReportEnvelope, frame: ConicFrame | None = None) -> ReplayResult:
    """Re-check every witness of a report without searching again."""
    if frame is None:
        frame = frame_for_report(report)
    elif report.field is not None and frame.describe() != report.field:
        raise HeaderError(f"report field {report.field} does not match frame {frame.describe()}")
    fails: list[str] = []
    w = report.witnesses
    F = frame.F
    if report.stage == "sublines":
        host = report.params["host"]
        for k, (b, mu) in enumerate(w.get("pairs", [])):
            pts = subline_points(frame, b, mu, host)
            if len(pts) != F.q + 1 or not all_internal(frame, pts) or frame.x_index not in pts:
                fails.append(f"pairs[{k}] = ({b}, {mu})")
        if len(w.get("pairs", [])) != report.counts["pair_count"]:
            fails.append("pair_count")
    if report.stage in ("subplanes", "rank4", "rank5"):
        for tag in ("linear", "semilinear"):
            if tag in w:
                fails.extend(_replay_classes(frame, w[tag], tag))
    if "cliques" in w:
        fails.extend(_replay_cliques(frame, w["cliques"]))
    if report.stage == "verify":
        W = LinearSet.from_json(w["W"])
        if not _set_ok(frame, W):
            fails.append("W")
        fails.extend(k for k, v in report.checks.items() if v is False)
    return ReplayResult(not fails, fails)


def _set_ok(frame: ConicFrame, ls: LinearSet) -> bool:
    try:
        again = materialize(frame, ls.generators)
    except ValueError:
        return False
    return again.points == tuple(ls.points) and all_internal(frame, ls.points)


def _replay_classes(frame: ConicFrame, w: dict, tag: str) -> list[str]:
    F = frame.F
    fails = []
    forms = set()
    for c in w["classes"]:
        ls = LinearSet.from_json(c["set"])
        if not _set_ok(frame, ls):
            fails.append(f"{tag} class {c['class']}: set")
            continue
        g = GroupElement.from_json(c["element"])
        img = sorted(g.apply_indices(F, np.asarray(ls.points)).tolist())
        if img != c["canonical"]:
            fails.append(f"{tag} class {c['class']}: element")
        forms.add(tuple(c["canonical"]))
    if len(forms) != len(w["classes"]):
        fails.append(f"{tag}: repeated canonical form")
    canon = {c["class"]: c["canonical"] for c in w["classes"]}
    for k, (pts, lab, el) in enumerate(zip(w.get("set_points", []), w["labels"], w["elements"])):
        if not all_internal(frame, pts):
            fails.append(f"{tag} set {k}: not internal")
        g = GroupElement.from_json(el)
        if sorted(g.apply_indices(F, np.asarray(pts)).tolist()) != canon.get(lab):
            fails.append(f"{tag} set {k}: element")
    return fails


def _replay_cliques(frame: ConicFrame, cliques: list) -> list[str]:
    fails = []
    for k, cl in enumerate(cliques):
        gens = np.asarray(cl, dtype=np.int64)
        first, rest = gens[0], gens[1:]
        if not np.all(compatible(frame, first[None, :], rest)):
            fails.append(f"cliques[{k}]: first line")
            continue
        I, J = np.triu_indices(len(rest), 1)
        if not np.all(compatible(frame, rest[I], rest[J])):
            fails.append(f"cliques[{k}]: adjacency")
    return fails


def count_table(ns: Sequence[int], qs: Sequence[int], cache: Cache, threads: int = 1) -> list[dict]:
    """Rows q, one column per n: external subline counts (None where q^n is too large)."""
    rows = []
    for q in qs:
        pe = prime_power(q)
        if pe is None or pe[0] == 2:
            raise InfeasibleError(f"{q} is not an odd prime power")
        row: dict[str, Any] = {"q": q}
        for n in ns:
            try:
                frame = build_frame(RunConfig("sublines", pe[0], pe[1], n))
            except InfeasibleError:
                row[f"n{n}"] = None
                continue
            pairs, _ = subline_pairs(frame, "external", cache, threads)
            row[f"n{n}"] = len(pairs) // q
        rows.append(row)
    return rows
