from __future__ import annotations

import copy
import csv
import io
import json
from pathlib import Path

import pytest

from r2cs import pipeline
from r2cs.cache import Cache, CacheError, make_header
from r2cs.cli import main, parse_args
from r2cs.conic import ConicFrame
from r2cs.field import make_tower
from r2cs.sublines import compute_B, subline_condition
from r2cs.pipeline import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_VERIFY,
    HeaderError,
    InfeasibleError,
    ReportEnvelope,
    RunConfig,
    replay_verify,
    run,
    subline_pairs,
)

from conftest import frame_for


def run_cli(args, capsys):
    code = main(args)
    return code, capsys.readouterr().out


def test_bounds(capsys):
    code, out = run_cli(["bounds", "--n", "4"], capsys)
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["counts"]["feasible_q"] == [3, 5, 7, 9, 11, 13, 17, 19, 23, 25, 27, 29]


def test_sublines_formats(cache_dir, capsys):
    code, out = run_cli(["--cache-dir", cache_dir, "sublines", "--n", "3"], capsys)
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["counts"]["subline_count"] == 12
    assert d["field"]["modulus"] == list(make_tower(3, 1, 3).modulus)
    code, out = run_cli(["sublines", "--n", "3", "--cache-dir", cache_dir, "--format", "csv"], capsys)
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["subline_count"] == "12" and row["host"] == "external"
    code, out = run_cli(["--format", "text", "sublines", "--n", "3", "--cache-dir", cache_dir], capsys)
    assert "subline_count: 12" in out


def test_parse_defaults():
    a = parse_args(["sublines"])
    assert (a.p, a.e, a.n, a.output_format, a.no_cache) == (3, 1, 4, "json", False)
    a = parse_args(["--no-cache", "sublines", "--modulus", "1,2,0,0,2"])
    assert a.no_cache and a.modulus == [2, 0, 0, 2, 1]


def test_infeasible(capsys, cache_dir):
    assert main(["sublines", "--p", "31", "--n", "4", "--cache-dir", cache_dir]) == EXIT_INFEASIBLE
    assert main(["sublines", "--p", "2", "--n", "4", "--cache-dir", cache_dir]) == EXIT_INFEASIBLE
    assert main(["verify", "--family", "dickson", "--n", "2", "--m", "2"]) == EXIT_INFEASIBLE
    with pytest.raises(InfeasibleError):
        run(RunConfig("sublines", p=3, e=1, n=4, modulus=[1, 0, 1, 0, 1]))
    capsys.readouterr()


def test_force_allows_out_of_range(cache_dir, capsys):
    code, out = run_cli(["sublines", "--p", "17", "--n", "3", "--force", "--cache-dir", cache_dir], capsys)
    assert code == EXIT_OK and json.loads(out)["counts"]["subline_count"] == 0


def test_verify_families(capsys):
    for args in (["--family", "kk", "--n", "2"], ["--family", "dickson", "--p", "5", "--n", "2"],
                 ["--family", "cg", "--n", "3"]):
        code, out = run_cli(["verify", *args], capsys)
        d = json.loads(out)
        assert code == EXIT_OK, d["checks"]
        assert d["checks"]["no_zero_divisors"] and d["checks"]["cg_condition"] and d["checks"]["flock"]


def test_replay_sublines(cache_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["sublines", "--n", "4", "--cache-dir", cache_dir, "--out", str(out)]) == EXIT_OK
    assert main(["replay", str(out)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["ok"]
    # swap one witness for a pair whose subline leaves I(C)
    frame = frame_for(3, 1, 4)
    B = compute_B(frame)
    b = next(b for b in range(1, 81) if B[b])
    mu = next(m for m in frame.F.quotient_transversal() if not subline_condition(frame, b, m, B=B))
    d = json.loads(out.read_text())
    d["witnesses"]["pairs"][3] = [b, mu]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    res = replay_verify(ReportEnvelope.from_json(d))
    assert not res.ok and res.failures == [f"pairs[3] = ({b}, {mu})"]
    assert main(["replay", str(bad)]) == EXIT_VERIFY
    assert main(["verify-set", str(out)]) == EXIT_OK
    capsys.readouterr()


def test_replay_header_mismatch(cache_dir):
    rep = run(RunConfig("sublines", n=3, cache_dir=cache_dir))
    other = _other_primitive(3, 3, rep.field["modulus"])
    F = make_tower(3, 1, 3, other)
    with pytest.raises(HeaderError):
        replay_verify(rep, ConicFrame(F))
    assert replay_verify(rep).ok


def _other_primitive(p, d, default):
    import itertools

    for tail in itertools.product(range(p), repeat=d):
        coeffs = list(tail) + [1]
        if coeffs == list(default):
            continue
        try:
            make_tower(p, 1, d, coeffs)
        except ValueError:
            continue
        return coeffs
    raise AssertionError("no other primitive polynomial")


def test_rank4_replay_and_tamper(cache_dir):
    rep = run(RunConfig("rank4", cache_dir=cache_dir))
    assert rep.counts["set_count"] > 0
    assert replay_verify(rep).ok
    d = copy.deepcopy(rep.to_json())
    pts = d["witnesses"]["semilinear"]["classes"][0]["set"]["points"]
    pts[0] = (pts[0] + 1)
    res = replay_verify(ReportEnvelope.from_json(d))
    assert not res.ok and any("class 0" in f for f in res.failures)
    d = copy.deepcopy(rep.to_json())
    d["witnesses"]["cliques"][0][1][0] = d["witnesses"]["cliques"][0][2][0]
    d["witnesses"]["cliques"][0][1][1] = (d["witnesses"]["cliques"][0][1][1] % 80) + 1
    assert not replay_verify(ReportEnvelope.from_json(d)).ok


def test_warm_cache_is_byte_identical(cache_dir, capsys):
    args = ["subplanes", "--n", "3", "--cache-dir", cache_dir]
    code, a = run_cli(args, capsys)
    code2, b = run_cli(args, capsys)
    assert code == code2 == EXIT_OK and a == b
    code, a = run_cli(["sublines", "--n", "4", "--cache-dir", cache_dir], capsys)
    code, b = run_cli(["sublines", "--n", "4", "--cache-dir", cache_dir], capsys)
    assert a == b


class Stop(Exception):
    pass


def test_checkpoint_resume(tmp_path, monkeypatch):
    frame = frame_for(3, 1, 4)
    ref, _ = subline_pairs(frame, "external", Cache(tmp_path / "ref"), block=4)
    cache = Cache(tmp_path / "resume")
    real = pipeline.enumerate_subline_pairs
    calls = {"n": 0}

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] > 3:
            raise Stop()
        return real(*a, **kw)

    monkeypatch.setattr(pipeline, "enumerate_subline_pairs", flaky)
    with pytest.raises(Stop):
        subline_pairs(frame, "external", cache, block=4)
    header = make_header("sublines", frame.describe(), {"host": "external"})
    state = cache.load_checkpoint(header)
    assert state is not None and state["done"] == 12
    monkeypatch.setattr(pipeline, "enumerate_subline_pairs", real)
    got, _ = subline_pairs(frame, "external", cache, block=4)
    assert got == ref
    assert cache.load_checkpoint(header) is None
    assert cache.load(header)["pairs"] == [list(p) for p in ref]


def test_corrupt_cache(tmp_path, capsys):
    d = tmp_path / "c"
    assert main(["sublines", "--n", "3", "--cache-dir", str(d)]) == EXIT_OK
    f = next(Path(d).glob("sublines-*.json"))
    doc = json.loads(f.read_text())
    doc["body"]["pairs"] = doc["body"]["pairs"][1:]
    f.write_text(json.dumps(doc))
    with pytest.raises(CacheError):
        Cache(d).load(doc["header"])
    assert main(["sublines", "--n", "3", "--cache-dir", str(d)]) == EXIT_VERIFY
    capsys.readouterr()


def test_table(cache_dir, capsys):
    code, out = run_cli(["table", "--n", "3", "4", "--q", "3", "5", "--cache-dir", cache_dir], capsys)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows == [{"q": "3", "n3": "12", "n4": "120"}, {"q": "5", "n3": "12", "n4": "600"}]
