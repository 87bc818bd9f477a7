"""Acceptance checks, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line; the lines are also collected
and repeated in the pytest terminal summary. Run standalone with
``python3 tests/test_acceptance.py`` to get just the report.
"""

import math
import time

import numpy as np
from scipy.stats import ortho_group

from batchmn import cli, lemmas, theory
from batchmn.estimators import EstimatorSpec, batch_min_norm, min_norm, shrunk_batch_min_norm
from batchmn.lemmas import ModifiedNoiseScenario, ProjectionScenario
from batchmn.model import BetaMode, ModelParams, generate_instance, make_params
from batchmn.montecarlo import RiskEstimate, trial_risks

REPORT = []


def report(number, title, ok, detail, started):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail} | {time.perf_counter() - started:.1f}s"
    REPORT.append(line)
    print(line)
    assert ok, line


def mc(spec, n, gamma, xi, trials, seed=0):
    params = make_params(n, gamma, xi)
    risks = trial_risks([EstimatorSpec.parse(spec)], params, BetaMode.UNIFORM_SPHERE, trials, seed)[:, 0]
    return RiskEstimate.from_samples(risks)


def test_criterion_01_b1_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(2, 65))
        p = int(rng.integers(n + 1, 129))
        xi = (0.5, 0.9)[i % 2]
        inst = generate_instance(ModelParams(n, p, 1.0, math.sqrt((1 - xi) / xi)), BetaMode.UNIFORM_SPHERE, 1, (i,))
        mn = min_norm(inst.X, inst.Y)
        worst = max(worst, np.linalg.norm(batch_min_norm(inst.X, inst.Y, 1) - mn) / np.linalg.norm(mn))
    report(1, "BMN(b=1) equals MN", worst <= 1e-8, f"max rel diff {worst:.2e} <= 1e-8", t0)


def test_criterion_02_orthogonal_rows():
    t0 = time.perf_counter()
    n, p = 24, 48
    X = ortho_group.rvs(p, random_state=2)[:n]
    y = np.random.default_rng(2).standard_normal(n)
    mn = min_norm(X, y)
    worst = max(np.linalg.norm(batch_min_norm(X, y, b) - mn) / np.linalg.norm(mn)
                for b in range(1, n + 1) if n % b == 0)
    report(2, "orthogonal rows: BMN(b) equals MN for every b | n", worst <= 1e-8,
           f"max rel diff {worst:.2e} <= 1e-8", t0)


def test_criterion_03_mn_risk():
    t0 = time.perf_counter()
    est = mc("mn", 400, 2.0, 0.8, 200)
    target = theory.mn_asymptotic_risk(2.0, 0.8)
    z = abs(est.mean - target) / est.stderr
    report(3, "MN risk matches asymptote", z <= 3, f"{est.mean:.4f} +/- {est.stderr:.4f} vs {target:.4f} ({z:.2f} se)",
           t0)


def test_criterion_04_sandwich():
    t0 = time.perf_counter()
    bad = []
    worst = -math.inf
    for gamma in (1.5, 2.0, 3.0):
        for xi in (0.6, 0.8, 0.95):
            params = make_params(300, gamma, xi)
            risks = trial_risks([EstimatorSpec("bmn", b=2), EstimatorSpec("bmn", b=4)], params, trials=100, seed=4)
            for k, b in enumerate((2, 4)):
                est = RiskEstimate.from_samples(risks[:, k])
                lb = theory.bmn_lower_bound(b, gamma, xi).total
                ub = theory.bmn_upper_bound(b, gamma, xi).total
                slack = min(est.mean - (lb - 3 * est.stderr), ub + 3 * est.stderr - est.mean)
                worst = max(worst, -slack)
                if slack < 0:
                    bad.append(f"(g={gamma}, xi={xi}, b={b}): {est.mean:.4f} not in [{lb:.4f}, {ub:.4f}]")
    report(4, "BMN risk within [LB, UB] +/- 3 se on 18 cells", not bad,
           "; ".join(bad) if bad else f"all inside, max violation {worst:.4f} (negative = margin)", t0)


def test_criterion_05_ub_tight():
    t0 = time.perf_counter()
    est = mc("bmn:2", 400, 2.0, 0.8, 200)
    ub = theory.bmn_upper_bound(2, 2.0, 0.8).total
    rel = abs(est.mean - ub) / ub
    report(5, "UB tight at b=2", rel <= 0.10, f"{est.mean:.4f} vs UB {ub:.4f}, rel {rel:.3%} <= 10%", t0)


def test_criterion_06_sbmn_scaling():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(50):
        b = int(rng.integers(1, 5))
        n = b * int(rng.integers(2, 12))
        p = int(rng.integers(n + 1, 3 * n + 2))
        xi = float(rng.uniform(0.05, 1.0))
        X, y = rng.standard_normal((n, p)), rng.standard_normal(n)
        ref = xi * batch_min_norm(X, y, b)
        worst = max(worst, float(np.max(np.abs(shrunk_batch_min_norm(X, y, b, xi) - ref) / np.abs(ref))))
    report(6, "exact SBMN equals xi * BMN entrywise", worst <= 1e-12, f"max entrywise rel diff {worst:.2e}", t0)


def test_criterion_07_threshold():
    t0 = time.perf_counter()
    root = theory.bmn_snr_threshold()
    bs = np.arange(1, 10_001)
    monotone = {}
    for gamma in (1.1, 2.0, 10.0):
        ub = np.array([theory.bmn_upper_bound(b, gamma, 0.6).total for b in bs])
        monotone[gamma] = bool(np.all(np.diff(ub) < 0))
    ok = abs(root - 0.6478) <= 5e-4 and all(monotone.values())
    report(7, "SNR threshold root and monotone UB at xi=0.6", ok,
           f"root {root:.6f}; strictly decreasing on [1, 1e4]: {monotone}", t0)


def test_criterion_08_opt_batch_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    bs = np.arange(1, 201)
    bad = []
    for _ in range(50):
        gamma, xi = float(rng.uniform(1, 4)), float(rng.uniform(0.66, 0.99))
        choice = theory.bmn_optimal_batch(gamma, xi)
        lim = theory.bmn_upper_bound_limit(gamma, xi).total
        val = lim if choice.is_infinite else theory.bmn_upper_bound(choice.value, gamma, xi).total
        scan = min(theory.bmn_upper_bound(b, gamma, xi).total for b in bs)
        if val > scan + 1e-12 or val > lim + 1e-9:
            bad.append(f"(g={gamma:.3f}, xi={xi:.3f}) -> {choice}")
    report(8, "optimal batch beats every b in [1, 200] and the limit", not bad,
           "; ".join(bad) if bad else "50/50 draws consistent", t0)


# reduced-sampler trials for the decay comparison; see README
DECAY_TRIALS = 20_000_000


def test_criterion_09_lemma1():
    t0 = time.perf_counter()
    base = dict(b=3, delta=0.7, alpha=0.5)
    res = lemmas.check_noisy_projection(ProjectionScenario.from_xi(0.8, p=2000, trials=2000, seed=0, **base))
    err = {p: lemmas.check_noisy_projection(
        ProjectionScenario.from_xi(0.8, p=p, trials=DECAY_TRIALS, seed=9, **base), method="reduced")
        for p in (500, 4000)}
    ok = res.rel_err <= 0.05 and err[4000].rel_err < err[500].rel_err
    report(9, "projection statistic", ok,
           f"p=2000: {res.empirical:.4f} vs {res.predicted:.4f} ({res.rel_err:.2%}); "
           f"rel err p=500 {err[500].rel_err:.2e} (se {err[500].stderr / res.predicted:.1e}), "
           f"p=4000 {err[4000].rel_err:.2e}", t0)


def test_criterion_10_q_covariance():
    t0 = time.perf_counter()
    res = lemmas.check_q_covariance(ModifiedNoiseScenario(b=1, r=1.0, sigma=1.0, trials=100_000, seed=0))
    q_err = max(abs(lemmas.chi_mean(b) - lemmas.chi_mean_monte_carlo(b)) / lemmas.chi_mean(b) for b in range(1, 11))
    ok = res.diag.rel_err <= 0.02 and res.offdiag.rel_err <= 0.03 and q_err <= 0.01
    report(10, "modified-noise covariance", ok,
           f"diag {res.diag.empirical:.4f} ({res.diag.rel_err:.2%}), offdiag {res.offdiag.empirical:.4f} vs "
           f"{res.offdiag.predicted:.4f} ({res.offdiag.rel_err:.2%}), q max rel err {q_err:.2e}", t0)


def test_criterion_11_server_average():
    t0 = time.perf_counter()
    big = mc("avg:100", 400, 2.0, 0.8, 200)
    pred = theory.server_avg_asymptotic_risk(2.0, 0.8, 800 / 100)
    small = mc("avg:2", 400, 2.0, 0.8, 200)
    rel_big, rel_small = abs(big.mean - pred) / pred, abs(small.mean - 1.0)
    report(11, "server averaging", rel_big <= 0.05 and rel_small <= 0.05,
           f"b=100: {big.mean:.4f} vs {pred:.4f} ({rel_big:.2%}); b=2: {small.mean:.4f} vs 1 ({rel_small:.2%})",
           t0)


def test_criterion_12_iterative():
    t0 = time.perf_counter()
    params = make_params(400, 2.0, 0.8)
    risks = trial_risks([EstimatorSpec.parse("ibmn:2x2"), EstimatorSpec.parse("bmn:4")], params, trials=200, seed=12)
    a, b = RiskEstimate.from_samples(risks[:, 0]), RiskEstimate.from_samples(risks[:, 1])
    se = math.hypot(a.stderr, b.stderr)
    gap = abs(a.mean - b.mean)
    report(12, "iterative [2,2] vs BMN(b=4)", gap <= 3 * se,
           f"{a.mean:.4f} vs {b.mean:.4f}, gap {gap:.4f} <= {3 * se:.4f}", t0)


def test_criterion_13_determinism(tmp_path):
    t0 = time.perf_counter()
    args = ["risk-curve", "--estimators", "mn,bmn:2,sbmn,avg:4,ibmn:2x2", "--b-grid", "1,4", "--gamma-grid", "1.5,2",
            "--xi-grid", "0.6,0.9", "--n", "48", "--trials", "10", "--seed", "13"]
    blobs = []
    for run, threads in enumerate(("1", "1", "4", "auto")):
        out = tmp_path / f"run{run}.csv"
        assert cli.run(args + ["--threads", threads, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    same = all(b == blobs[0] for b in blobs)
    report(13, "byte-identical CSV across reruns and thread counts", same,
           f"{len(blobs)} runs, {len(blobs[0])} bytes each", t0)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    raise SystemExit(1 if failed else 0)
