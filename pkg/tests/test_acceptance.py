"""Acceptance criteria, each at its stated tolerance.

Every test records a verdict line; the terminal summary prints one
PASS/FAIL line per criterion after the run.
"""

import math
import time

import numpy as np
import pytest

from oracles import brute_count, chunked_recount, generic_points, image_table
from percolab import (Angle, IntervalPair, IntervalSet, ProbabilityMatrix, ProjectionFrame, SquareCode,
                      apply_F, build_tent, certify_A, column_row_condition, extinction_probability,
                      fixed_point_coverage, growth_rate_estimate, hoeffding_tail, level_codes, project_square,
                      replay_single_angle, sample_tree, self_similarity_test, success_lower_bound)
from percolab.core import survival_flags
from percolab.harness import column_extinction
from percolab.operator import CertificateA, LevelProfile, condition_B_ratio, sweep_min
from percolab.replay import build_net
from percolab.rng import trial_seed

SIERPINSKI_GRID_BUDGET = 2 ** 26
GRID = [(k + 0.5) * math.pi / 50 for k in range(50)]


@pytest.fixture(scope="module")
def grids():
    out = {}
    for name, m, budget in [("uniform 0.75", ProbabilityMatrix.uniform(2, 0.75), 2 ** 24),
                            ("sierpinski 0.55", ProbabilityMatrix.sierpinski(0.55), SIERPINSKI_GRID_BUDGET)]:
        t0 = time.perf_counter()
        out[name] = ([certify_A(m, ProjectionFrame.at(a), budget=budget) for a in GRID],
                     time.perf_counter() - t0)
    return out


@pytest.mark.parametrize("p", [0.2, 0.3, 0.9])
def test_1_survival_criterion(p, verdict):
    m = ProbabilityMatrix.uniform(2, p)
    trials = 10_000
    t0 = time.perf_counter()
    alive = survival_flags(m, 25, [trial_seed(0, k) for k in range(trials)])
    ext = 1.0 - float(np.mean(alive))
    q = extinction_probability(m)
    tol = 3 * math.sqrt(q * (1 - q) / trials)
    ok = abs(ext - q) <= tol
    verdict(1, ok, f"p={p}: extinction {ext:.4f} vs q={q:.6f} (tol {tol:.4f}, {time.perf_counter() - t0:.1f}s)")
    assert ok


def test_2_growth_rate(verdict):
    m = ProbabilityMatrix.uniform(2, 0.9)
    trees, seed = [], 0
    while sum(t.count(10) > 0 for t in trees) < 200:
        trees.append(sample_tree(m, 10, trial_seed(1, seed)))
        seed += 1
    est = growth_rate_estimate(trees, 10)
    ok = est.surviving >= 200 and abs(est.estimate - math.log(3.6)) <= 0.05 * math.log(2)
    verdict(2, ok, f"mean log#E_10/10 = {est.estimate:.4f} vs log 3.6 = {math.log(3.6):.4f} "
                   f"over {est.surviving} survivors")
    assert ok


def test_3_eigen_identity(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for M in (2, 3):
        for p in (0.6, 0.9):
            m = ProbabilityMatrix.uniform(M, p)
            for _ in range(20):
                a = float(rng.choice([rng.uniform(0.01, math.pi / 2 - 0.01),
                                      rng.uniform(math.pi / 2 + 0.01, math.pi - 0.01)]))
                fr = ProjectionFrame.at(a)
                tent = build_tent(fr)
                g = apply_F(m, fr, tent)
                u = np.unique(np.r_[g.xs, tent.xs])
                worst = max(worst, float(np.max(np.abs(g(u) - M * p * tent(u)))))
    ok = worst <= 1e-9
    verdict(3, ok, f"max |F tent - Mp tent| = {worst:.2e} over 80 (M, p, angle) cases")
    assert ok


def _recount(cert, rng):
    """Brute count at 1000 generic points of I2, and the profile value there."""
    m, fr, r, I1, I2 = cert.matrix, cert.frame, cert.r, cert.pair.I1, cert.pair.I2
    if m.M ** (2 * r) <= 4 ** 6:
        table = image_table(m, fr, r, I1)
        x = generic_points(table, I2[0], I2[1], 1000, rng)
        brute = brute_count(table, x)
    else:
        x, brute = chunked_recount(m, fr, r, I1, I2[0], I2[1], 1000, rng)
    prof = LevelProfile(m, fr, r, budget=SIERPINSKI_GRID_BUDGET)
    return x, brute, prof.count(x, *I1)


def test_4_certificate_soundness(grids, cert_09, cert_075, cert_full, verdict):
    certs = [c for cs, _ in grids.values() for c in cs if isinstance(c, CertificateA)]
    certs += [cert_09, cert_075, cert_full]
    rng = np.random.default_rng(4)
    worst, low, bad = 0.0, math.inf, 0
    t0 = time.perf_counter()
    for cert in certs:
        x, brute, swept = _recount(cert, rng)
        assert len(x) == 1000
        d = float(np.max(np.abs(brute - swept)))
        worst, low = max(worst, d), min(low, float(brute.min()))
        bad += d > 1e-9 or brute.min() < 2 or brute.min() < cert.min_value - 1e-9
    ok = bad == 0
    verdict(4, ok, f"{len(certs)} certificates x 1000 points: max |brute - sweep| = {worst:.1e}, "
                   f"min count {low:.4f} ({time.perf_counter() - t0:.0f}s)")
    assert ok


def test_5_certificate_existence(grids, verdict):
    ok = True
    for name, (certs, secs) in grids.items():
        good = [c for c in certs if isinstance(c, CertificateA) and c.r <= 8]
        rs = sorted({c.r for c in good})
        part = len(good) == len(GRID)
        ok &= part
        verdict(5, part, f"{name}: {len(good)}/50 angles certified, r in {rs} ({secs:.0f}s)")
    assert ok


def test_6_sharpness_witness(verdict):
    m = ProbabilityMatrix.sierpinski(0.45)
    ratio = condition_B_ratio(m, ProjectionFrame(Angle.pi_times(1, 4)), 0.5)
    ok = not column_row_condition(m) and abs(ratio - 0.9) <= 1e-9
    verdict(6, ok, f"column_row_condition={column_row_condition(m)}, tent ratio at pi/4, u=1/2: {ratio:.12f}")
    assert ok


def test_7_replay_consistency(cert_full, cert_09, verdict):
    full = ProbabilityMatrix.uniform(2, 1.0)
    tree = sample_tree(full, 4 * cert_full.r, 0)
    rep = replay_single_angle(tree, cert_full, 4)
    sweep = []
    for n in range(1, 5):
        prof = LevelProfile(full, cert_full.frame, n * cert_full.r)
        net = build_net(cert_full.pair, n, cert_full.r, 2)
        sweep.append(int(prof.count(net.points, *cert_full.pair.I1).min()))
    det_ok = rep.passed and rep.minima == sweep
    passed = contained = 0
    for seed in range(20):
        t = sample_tree(cert_09.matrix, 2 * cert_09.r, seed)
        r = replay_single_angle(t, cert_09, 2)
        if r.passed:
            passed += 1
            # shadow rebuilt square by square, independent of the vectorized projection
            shadow = IntervalSet(project_square(cert_09.frame, c) for c in level_codes(t, 2 * cert_09.r))
            contained += shadow.contains_interval(*cert_09.pair.I1) and bool(r.containment)
    ok = det_ok and passed > 0 and contained == passed
    verdict(7, ok, f"p=1 minima {rep.minima} == sweep {sweep}; "
                   f"containment on {contained}/{passed} passed stochastic replays")
    assert ok


def test_8_column_coverage(baselines, verdict):
    u = 1 / math.pi
    sup = fixed_point_coverage(ProbabilityMatrix.uniform(2, 0.9), u, "vertical", 20, 10_000, seed=8)
    q = column_extinction(ProbabilityMatrix.uniform(2, 0.9), 0)
    sigma = math.sqrt(q * (1 - q) / 10_000)
    crit = fixed_point_coverage(ProbabilityMatrix.uniform(2, 0.5), u, "vertical", 20, 10_000, seed=8)
    threshold = baselines["critical_column"]["threshold"]
    ok = abs(sup.frequency - (1 - q)) <= 3 * sigma and crit.frequency < threshold
    verdict(8, ok, f"p=0.9: {sup.frequency:.4f} vs 1-q_col={1 - q:.5f} (3 sigma {3 * sigma:.4f}); "
                   f"p=0.5: {crit.frequency:.4f} < {threshold}")
    assert ok


def test_9_self_similarity(verdict):
    m = ProbabilityMatrix.uniform(2, 0.7)
    code = SquareCode(2, (1,), (0,))
    null = self_similarity_test(m, 2, 100_000, code, seed=9)
    power = self_similarity_test(m, 2, 100_000, code, seed=9, reference_matrix=ProbabilityMatrix.uniform(2, 0.65))
    ok = null.passes and power.tv > power.radius
    verdict(9, ok, f"TV {null.tv:.4f} <= 3 x {null.radius:.4f}; perturbed TV {power.tv:.4f} > {power.radius:.4f}")
    assert ok


def test_10_hoeffding_product(cert_09, cert_full, verdict):
    b = success_lower_bound(cert_09, 1.0, 30)
    d = success_lower_bound(cert_full, 1.0, 30)
    tuples = [(9, 8, 2, 13.5), (4, 16, 2, 3.0), (27, 32, 2, 40.5)]
    err = max(abs(hoeffding_tail(k, B, mu, s).value - math.exp(-2 * (k * mu - s) ** 2 / (k * B * B)))
              for k, B, mu, s in tuples)
    ok = 0 < b.value <= 1 and d.value == 1 and err <= 1e-12
    verdict(10, ok, f"p=0.9 bound exp({float(b.log_value):.4g}) > 0, p=1 bound {float(d.value)}, "
                    f"tuple error {err:.1e}")
    assert ok


def test_11_performance(verdict):
    m = ProbabilityMatrix.uniform(2, 0.9)
    sample_tree(m, 4, 0)
    t0 = time.perf_counter()
    sample_tree(m, 12, 2024)
    t_tree = time.perf_counter() - t0
    fr = ProjectionFrame(Angle.pi_times(1, 3))
    t0 = time.perf_counter()
    sweep_min(m, fr, IntervalPair((0.3, 0.7), (0.2, 0.8)), 8)
    t_sweep = time.perf_counter() - t0
    ok = t_tree < 1.0 and t_sweep < 5.0
    verdict(11, ok, f"sample_tree depth 12: {t_tree:.3f}s (< 1); r=8 sweep, 65536 codes: {t_sweep:.3f}s (< 5)")
    assert ok
