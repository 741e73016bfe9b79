"""Acceptance suite: one test per shipped guarantee, one verdict line each.

Run with `pytest -v tests/test_acceptance.py`; the verdict lines are
repeated in a terminal-summary block after the run.
"""

import csv
import json
import pathlib
import time
from fractions import Fraction

import numpy as np
import pytest

import conftest
from oracles import (
    average_precision_fraction,
    map_exhaustive,
    project_scalar,
    solve_soft_margin_step,
)
from streamhash import (
    CodeIndex,
    average_precision,
    encode,
    encode_batch,
    fit_pca_itq,
    gen_synthetic_multilabel,
    init_projection_state,
    load_bundle,
    mean_average_precision,
    mean_relevant_fraction,
    mistake_bound,
    read_features,
    read_labels,
    run_streaming_pipeline,
    sign,
    split_queries,
    unpack_rows,
    update_code_projection,
    update_feature_projection,
)
from streamhash.cli import main

FIXTURE = pathlib.Path(__file__).parent / "fixtures" / "toy_retrieval_50.json"


def verdict(num: int, ok: bool, detail: str):
    line = f"[acceptance] criterion {num:2d} {'PASS' if ok else 'FAIL'} {detail}"
    conftest.acceptance_lines.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def recorded_ten_k():
    """A 10,000-point recorded stream (after a 300-point warm start)."""
    ds = gen_synthetic_multilabel(10_300, 64, 8, seed=7)
    pipe = run_streaming_pipeline(
        ds.features, ds.labels, 8, 32, seed=7, record_stream=True
    )
    assert pipe.state.ledger.rounds == 10_000
    return pipe


def test_criterion_01_updates_match_numeric_solver():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        k = 8
        w = rng.standard_normal(k)
        code = np.where(rng.random(k) < 0.5, -1, 1).astype(np.int8)
        target = -1 if rng.random() < 0.5 else 1
        c = float(10 ** rng.uniform(-3, 1))
        w_new, _ = update_code_projection(w, code, target, c)
        w_ref = solve_soft_margin_step(w, code.astype(float), target, c)
        worst = max(worst, float(np.linalg.norm(w_new - w_ref)))
    for _ in range(200):
        d = int(rng.integers(2, 25))
        w = rng.standard_normal(d)
        x = rng.standard_normal(d) * float(10 ** rng.uniform(-1, 1))
        target = -1 if rng.random() < 0.5 else 1
        c = float(10 ** rng.uniform(-3, 1))
        w_new, _ = update_feature_projection(w, x, target, c)
        w_ref = solve_soft_margin_step(w, x, target, c)
        worst = max(worst, float(np.linalg.norm(w_new - w_ref)))
    elapsed = time.perf_counter() - t0
    verdict(
        1,
        worst <= 1e-6 and elapsed < 60.0,
        f"400 instances, worst deviation {worst:.2e} (tol 1e-6), {elapsed:.1f}s (limit 60s)",
    )


def test_criterion_02_margin_closure_and_passive_identity():
    rng = np.random.default_rng(202)
    worst = 0.0
    done = 0
    attempts = 0
    while done < 10_000 and attempts < 100_000:
        attempts += 1
        k = 8
        w = rng.standard_normal(k) * 0.3
        code = np.where(rng.random(k) < 0.5, -1, 1).astype(np.int8)
        target = -1 if rng.random() < 0.5 else 1
        c = float(10 ** rng.uniform(-0.3, 2))
        margin = target * float(w @ code)
        if margin >= 1.0:
            target = -target
            margin = -margin
        if (1.0 - margin) / k > c:
            continue
        w_new, tau = update_code_projection(w, code, target, c)
        worst = max(worst, abs(target * float(w_new @ code) - 1.0))
        done += 1
    assert done == 10_000
    done = 0
    while done < 10_000 and attempts < 300_000:
        attempts += 1
        d = int(rng.integers(2, 17))
        w = rng.standard_normal(d) * 0.3
        x = rng.standard_normal(d)
        target = -1 if rng.random() < 0.5 else 1
        c = float(10 ** rng.uniform(-0.3, 2))
        margin = target * float(w @ x)
        if margin >= 1.0:
            target = -target
            margin = -margin
        sq = float(x @ x)
        if sq == 0.0 or (1.0 - margin) / sq > c:
            continue
        w_new, tau = update_feature_projection(w, x, target, c)
        worst = max(worst, abs(target * float(w_new @ x) - 1.0))
        done += 1
    assert done == 10_000

    passive_ok = True
    for _ in range(1_000):
        k = 8
        code = np.where(rng.random(k) < 0.5, -1, 1).astype(np.int8)
        target = -1 if rng.random() < 0.5 else 1
        w = rng.standard_normal(k)
        w = w * (1.5 / abs(float(w @ code))) * (target * np.sign(w @ code))
        before = w.tobytes()
        w_new, tau = update_code_projection(w, code, target, 0.1)
        passive_ok &= w_new is w and w.tobytes() == before and tau == 0.0
        x = rng.standard_normal(k)
        w2 = rng.standard_normal(k)
        w2 = w2 * (1.5 / abs(float(w2 @ x))) * (target * np.sign(w2 @ x))
        before2 = w2.tobytes()
        w2_new, tau2 = update_feature_projection(w2, x, target, 0.1)
        passive_ok &= w2_new is w2 and w2.tobytes() == before2 and tau2 == 0.0
    verdict(
        2,
        worst <= 1e-9 and passive_ok,
        f"20,000 aggressive updates, worst |margin-1| {worst:.2e} (tol 1e-9); "
        f"2,000 passive rounds bit-identical: {passive_ok}",
    )


def _bound_check(ledger, inputs, targets, mode, rng):
    mistakes = ledger.code_mistakes if mode == "code" else ledger.feature_mistakes
    dim = inputs.shape[1]
    checks = 0
    ok = True
    tightest = np.inf
    ok &= bool(np.all(mistakes <= mistake_bound(ledger, np.zeros(dim), mode)))
    checks += 1
    lsq = np.linalg.lstsq(inputs.astype(np.float64), targets.astype(np.float64), rcond=None)[0]
    for j in range(targets.shape[1]):
        bound_j = mistake_bound(ledger, lsq[:, j], mode)[j]
        ok &= bool(mistakes[j] <= bound_j)
        if bound_j > 0:
            tightest = min(tightest, bound_j / max(int(mistakes[j]), 1))
    checks += 1
    for _ in range(20):
        u = rng.standard_normal(dim)
        ok &= bool(np.all(mistakes <= mistake_bound(ledger, u, mode)))
        checks += 1
    return ok, checks, tightest


def test_criterion_03_code_side_mistake_bound(recorded_ten_k):
    ledger = recorded_ten_k.state.ledger
    codes, targets = ledger.code_stream()
    ok, checks, tight = _bound_check(ledger, codes, targets, "code", np.random.default_rng(33))
    verdict(
        3,
        ok,
        f"10,000 rounds at 32 bits: {checks} competitors hold exactly "
        f"(tightest bound/mistakes {tight:.1f}x)",
    )


def test_criterion_04_feature_side_mistake_bound(recorded_ten_k):
    ledger = recorded_ten_k.state.ledger
    feats, targets = ledger.feature_stream()
    ok, checks, tight = _bound_check(ledger, feats, targets, "feature", np.random.default_rng(44))
    verdict(
        4,
        ok,
        f"10,000 rounds, max feature norm {ledger.r_max:.2f}: {checks} competitors "
        f"hold exactly (tightest bound/mistakes {tight:.1f}x)",
    )


def test_criterion_05_rotation_fit_monotone_and_orthogonal():
    rng = np.random.default_rng(42)
    hm = fit_pca_itq(rng.standard_normal((500, 16)), 8, iters=50, seed=42)
    diffs = np.diff(hm.itq_errors)
    worst_rise = float(diffs.max()) if diffs.size else 0.0
    worst_orth = float(hm.itq_orth_devs.max())
    verdict(
        5,
        hm.itq_errors.size == 51 and worst_rise <= 1e-9 and worst_orth <= 1e-8,
        f"51-point error trace, worst rise {worst_rise:.2e} (slack 1e-9), "
        f"worst orthogonality deviation {worst_orth:.2e} (tol 1e-8)",
    )


def test_criterion_06_map_matches_exhaustive_oracle():
    with open(FIXTURE) as f:
        raw = json.load(f)
    db_f = np.array(raw["db_features"])
    q_f = np.array(raw["query_features"])
    db_l = [frozenset(s) for s in raw["db_labels"]]
    q_l = [frozenset(s) for s in raw["query_labels"]]
    nbits, seed = raw["nbits"], raw["seed"]
    hm = fit_pca_itq(db_f, nbits, seed=seed)
    state = init_projection_state(nbits, db_f.shape[1], seed=seed + 2)
    index = CodeIndex(nbits)
    index.insert_many(encode_batch(hm, db_f))
    index.refresh_projected_codes(state.P)

    # The fixture was screened so every sign decision has slack; confirm
    # that here so oracle and package can never disagree on a bit.
    guard = np.inf
    for x in np.vstack([db_f, q_f]):
        guard = min(guard, float(np.abs(hm.W.T @ x + hm.b).min()))
    H = encode_batch(hm, db_f).astype(np.float64)
    guard = min(guard, float(np.abs(H @ state.P).min()))
    for q in q_f:
        h_q = encode(hm, q).astype(np.float64)
        guard = min(guard, float(np.abs(state.P.T @ h_q).min()))
        guard = min(guard, float(np.abs(state.R.T @ q).min()))
    assert guard > 1e-6

    cached = unpack_rows(index._projected, nbits)
    relevances = [
        [bool(set(ql) & set(dl)) for dl in raw["db_labels"]] for ql in raw["query_labels"]
    ]
    worst = 0.0
    for mode in ("sym", "asym"):
        if mode == "sym":
            q_codes = [project_scalar(state.P, encode(hm, q).astype(float)) for q in q_f]
        else:
            q_codes = [project_scalar(state.R, q) for q in q_f]
        want = map_exhaustive(cached, q_codes, relevances)
        got = mean_average_precision(index, hm, state, q_f, q_l, db_l, mode).mean_ap
        worst = max(worst, abs(got - want))

    frac_exact = average_precision_fraction([0, 1, 2], [True, False, True]) == Fraction(5, 6)
    ap_float = average_precision([0, 1, 2], [True, False, True])
    float_ulps = abs(ap_float - 5 / 6) / float(np.spacing(5 / 6))
    verdict(
        6,
        worst <= 1e-12 and frac_exact and float_ulps <= 1.0,
        f"both modes within {worst:.1e} of the oracle (tol 1e-12); "
        f"AP(rel,irrel,rel) = 5/6 exactly in rationals, float off by {float_ulps:.0f} ulp",
    )


def test_criterion_07_asymmetric_beats_symmetric_on_average():
    diffs = []
    slowest = 0.0
    for seed in range(5):
        t0 = time.perf_counter()
        ds = gen_synthetic_multilabel(5000, 64, 8, seed=seed)
        db_f, db_l, q_f, q_l = split_queries(ds.features, ds.labels, 500, seed=seed)
        pipe = run_streaming_pipeline(db_f, db_l, 8, 32, seed=seed)
        by_mode = {
            mode: mean_average_precision(
                pipe.index, pipe.hash_model, pipe.state, q_f, q_l, pipe.db_labels, mode
            ).mean_ap
            for mode in ("sym", "asym")
        }
        slowest = max(slowest, time.perf_counter() - t0)
        diffs.append(by_mode["asym"] - by_mode["sym"])
    mean_diff = float(np.mean(diffs))
    per_seed = " ".join(f"{d:+.4f}" for d in diffs)
    verdict(
        7,
        mean_diff >= 0.0 and slowest < 300.0,
        f"mean asym-sym gap {mean_diff:+.4f} over 5 seeds ({per_seed}); "
        f"slowest run {slowest:.1f}s (limit 300s)",
    )


def _timed_refresh(index, P, reps=3):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        index.refresh_projected_codes(P)
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_08_feature_free_refresh_scales():
    rng = np.random.default_rng(88)
    feats = rng.standard_normal((100_000, 64))
    hm = fit_pca_itq(feats[:500], 64, seed=88)
    codes = encode_batch(hm, feats)
    del feats  # refresh must not need the raw features
    P = rng.standard_normal((64, 64)) / 8.0

    index = CodeIndex(64)
    index.insert_many(codes)
    t_100 = _timed_refresh(index, P)
    assert index.n_projected == 100_000

    index.insert_many(codes)
    t_200 = _timed_refresh(index, P)
    ratio = t_200 / t_100

    sim = CodeIndex(64)
    sim_codes = np.where(rng.random((100_000, 64)) < 0.5, -1, 1).astype(np.int8)
    sim.insert_many(sim_codes)
    t_sim = _timed_refresh(sim, P)
    dim_dev = abs(t_sim / t_100 - 1.0)

    verdict(
        8,
        1.6 <= ratio <= 2.6 and dim_dev <= 0.2,
        f"100k refresh {t_100 * 1e3:.0f}ms with features deleted; 200k/100k ratio "
        f"{ratio:.2f} (want 1.6-2.6); origin-dimension deviation {dim_dev * 100:.0f}% (tol 20%)",
    )


def _cli_protocol(base, bits):
    d = base / f"k{bits}"
    d.mkdir()
    paths = {
        "db_f": str(d / "db.feat"), "db_l": str(d / "db.labels"),
        "q_f": str(d / "q.feat"), "q_l": str(d / "q.labels"),
        "bundle": str(d / "model.bundle"), "index": str(d / "model.bundle.index"),
        "eval": str(d / "eval.csv"), "curve": str(d / "curve.csv"),
    }
    assert main([
        "gen-synth", "--out-features", paths["db_f"], "--out-labels", paths["db_l"],
        "--n", "5000", "--dim", "64", "--classes", "8", "--seed", "0",
        "--n-queries", "500", "--query-features", paths["q_f"], "--query-labels", paths["q_l"],
    ]) == 0
    assert main([
        "init", "--features", paths["db_f"], "--labels", paths["db_l"],
        "--out", paths["bundle"], "--bits", str(bits),
        "--init-size", "300", "--chunk", "1000", "--seed", "0",
    ]) == 0
    assert main([
        "stream", "--bundle", paths["bundle"],
        "--features", paths["db_f"], "--labels", paths["db_l"],
    ]) == 0
    assert main([
        "eval", "--bundle", paths["bundle"], "--index", paths["index"],
        "--query-features", paths["q_f"], "--query-labels", paths["q_l"],
        "--db-labels", paths["db_l"], "--out", paths["eval"],
    ]) == 0
    assert main([
        "eval", "--bundle", paths["bundle"], "--db-features", paths["db_f"],
        "--query-features", paths["q_f"], "--query-labels", paths["q_l"],
        "--db-labels", paths["db_l"], "--checkpoints", "1000,2000,3000,4200",
        "--out", paths["curve"],
    ]) == 0
    with open(paths["eval"], newline="") as f:
        final_map = float(list(csv.reader(f))[1][4])
    with open(paths["curve"], newline="") as f:
        curve = [(int(r[0]), float(r[4])) for r in list(csv.reader(f))[1:]]
    q_l, _ = read_labels(paths["q_l"])
    db_l, _ = read_labels(paths["db_l"])
    baseline = mean_relevant_fraction(q_l, db_l[300:])
    return final_map, baseline, curve


def test_criterion_09_end_to_end_beats_random_baseline(tmp_path):
    summary = []
    ok = True
    for bits in (32, 64):
        final_map, baseline, curve = _cli_protocol(tmp_path, bits)
        margin = final_map - baseline
        ok &= margin >= 0.05
        trend = " ".join(f"{p}:{m:.4f}" for p, m in curve)
        print(f"[acceptance] criterion  9 trend bits={bits} {trend}")
        summary.append(f"bits={bits} mAP {final_map:.4f} vs baseline {baseline:.4f} (+{margin:.4f})")
    verdict(9, ok, "; ".join(summary) + "; margin required 0.05")


def _determinism_run(d):
    d.mkdir()
    p = {name: str(d / name) for name in (
        "db.feat", "db.labels", "q.feat", "q.labels", "model.bundle",
        "model.bundle.index", "metrics.csv", "hits.csv", "eval.csv",
    )}
    assert main([
        "gen-synth", "--out-features", p["db.feat"], "--out-labels", p["db.labels"],
        "--n", "1200", "--dim", "16", "--classes", "4", "--seed", "3",
        "--n-queries", "100", "--query-features", p["q.feat"], "--query-labels", p["q.labels"],
    ]) == 0
    assert main([
        "init", "--features", p["db.feat"], "--labels", p["db.labels"],
        "--out", p["model.bundle"], "--bits", "16",
        "--init-size", "150", "--chunk", "200", "--seed", "3",
    ]) == 0
    assert main([
        "stream", "--bundle", p["model.bundle"], "--features", p["db.feat"],
        "--labels", p["db.labels"], "--metrics-out", p["metrics.csv"],
    ]) == 0
    assert main([
        "query", "--bundle", p["model.bundle"], "--index", p["model.bundle.index"],
        "--features", p["q.feat"], "--k", "10", "--out", p["hits.csv"],
    ]) == 0
    assert main([
        "eval", "--bundle", p["model.bundle"], "--index", p["model.bundle.index"],
        "--query-features", p["q.feat"], "--query-labels", p["q.labels"],
        "--db-labels", p["db.labels"], "--out", p["eval.csv"],
    ]) == 0
    return p


def test_criterion_10_identical_seeds_identical_bytes(tmp_path):
    a = _determinism_run(tmp_path / "a")
    b = _determinism_run(tmp_path / "b")
    identical = []
    ok = True
    for name in ("db.feat", "db.labels", "q.feat", "q.labels",
                 "model.bundle", "model.bundle.index", "hits.csv", "eval.csv"):
        same = open(a[name], "rb").read() == open(b[name], "rb").read()
        ok &= same
        identical.append(f"{name}:{'=' if same else '!'}")
    # The metrics file carries wall-clock columns; the data columns must match.
    with open(a["metrics.csv"], newline="") as f:
        rows_a = [r[:2] for r in csv.reader(f)]
    with open(b["metrics.csv"], newline="") as f:
        rows_b = [r[:2] for r in csv.reader(f)]
    ok &= rows_a == rows_b
    identical.append(f"metrics.csv(data cols):{'=' if rows_a == rows_b else '!'}")
    verdict(10, ok, " ".join(identical))
