import json
import math

import numpy as np
import pytest

from percolab import (Angle, CampaignConfig, ProbabilityMatrix, SquareCode, fixed_point_coverage,
                      run_campaign, self_similarity_test)
from percolab.core import extinction_by_depth
from percolab.errors import DomainError, InsufficientSampleError, ValidationError
from percolab.harness import (aggregate, column_extinction, column_survival_probability, is_m_adic,
                              read_csv, to_csv, to_jsonl)


def small_config(**kw):
    base = dict(matrix=ProbabilityMatrix.uniform(2, 0.7), depth=6, trials=40, seed=11,
                angles=[Angle.pi_times(1, 3), 2.0, "vertical"], thresholds=[0.1, 0.5])
    base.update(kw)
    return CampaignConfig(**base)


class TestCampaign:
    def test_full_single_trial(self):
        cfg = CampaignConfig(ProbabilityMatrix.uniform(2, 1.0), 4, 1,
                             angles=[0.4, Angle.pi_times(3, 4), "horizontal", "vertical"])
        res = run_campaign(cfg)
        assert res.summary["survival_frequency"] == 1.0
        for lab in cfg.angle_labels():
            assert res.records[0][f"longest[{lab}]"] == pytest.approx(1.0, abs=1e-12)

    def test_deterministic_bytes(self):
        a, b = run_campaign(small_config()), run_campaign(small_config())
        assert to_csv(a) == to_csv(b) and to_jsonl(a) == to_jsonl(b)
        c = run_campaign(small_config(seed=12))
        assert to_csv(c) != to_csv(a)

    def test_csv_round_trip(self):
        cfg = small_config(condition_on_survival=True, matrix=ProbabilityMatrix.uniform(2, 0.5))
        res = run_campaign(cfg)
        back = read_csv(to_csv(res), cfg)
        assert json.dumps(aggregate(back, cfg), sort_keys=True) == json.dumps(res.summary, sort_keys=True)

    def test_jsonl_header(self):
        res = run_campaign(small_config(trials=3))
        lines = to_jsonl(res).splitlines()
        assert json.loads(lines[0])["format"] == "percolab-campaign/1" and len(lines) == 4

    def test_rejection_conditioning(self):
        cfg = small_config(matrix=ProbabilityMatrix.uniform(2, 0.45), condition_on_survival=True, trials=30)
        s = run_campaign(cfg).summary
        assert s["kept"] == 30 and s["discarded"] > 0
        assert s["attempts"] == s["kept"] + s["discarded"]

    def test_truncation_marker(self):
        cfg = small_config(matrix=ProbabilityMatrix.uniform(2, 1.0), depth=8, trials=2, max_codes=1000)
        res = run_campaign(cfg)
        assert res.truncated and all(r["truncated"] for r in res.records)
        assert res.records[0]["longest[vertical]"] is None
        assert res.summary["truncated"] == 2

    def test_replay_pass_rate(self, cert_09):
        cfg = small_config(matrix=cert_09.matrix, depth=2 * cert_09.r, trials=10, certificate=cert_09,
                           replay_levels=2, condition_on_survival=True)
        res = run_campaign(cfg)
        assert 0.0 <= res.summary["replay_pass_rate"] <= 1.0
        back = read_csv(to_csv(res), cfg)
        assert [r["replay"] for r in back] == [r["replay"] for r in res.records]

    def test_writes_files(self, tmp_path):
        cfg = small_config(trials=2, csv_path=str(tmp_path / "a.csv"), jsonl_path=str(tmp_path / "a.jsonl"))
        res = run_campaign(cfg)
        assert (tmp_path / "a.csv").read_text() == to_csv(res)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            small_config(trials=0)
        with pytest.raises(ValidationError):
            small_config(angles=[Angle.pi_times(1, 2)])

    def test_subcritical_against_finite_depth(self):
        m = ProbabilityMatrix.uniform(2, 0.2)
        res = run_campaign(CampaignConfig(m, 25, 10_000, seed=0))
        f = res.summary["survival_frequency"]
        oracle = 1.0 - extinction_by_depth(m, 25)
        assert abs(f - oracle) <= 3 * math.sqrt(oracle * (1 - oracle) / 10_000)

    def test_shadow_baseline(self, baselines):
        pin = baselines["shadow_fraction"]
        c = pin["config"]
        cfg = CampaignConfig(ProbabilityMatrix.uniform(c["M"], c["p"]), c["depth"], c["trials"], c["seed"],
                             angles=[Angle.pi_times(1, 3)], thresholds=[c["threshold"]],
                             condition_on_survival=True, max_codes=c["max_codes"])
        s = run_campaign(cfg).summary
        assert s["kept"] == c["trials"] and s["truncated"] == 0
        frac = s["shadows"][cfg.angle_labels()[0]][f"frac>={c['threshold']:g}"]
        assert abs(frac - pin["value"]) <= pin["tolerance"]


class TestColumns:
    def test_m_adic(self):
        assert is_m_adic(0.5, 2) and is_m_adic(0.375, 2) and not is_m_adic(1 / math.pi, 2)
        assert is_m_adic(1 / 3, 3) and not is_m_adic(1 / 3, 2)

    def test_m_adic_raises(self):
        with pytest.raises(DomainError):
            fixed_point_coverage(ProbabilityMatrix.uniform(2, 0.9), 0.25, "vertical", 5, 10)

    def test_full(self):
        est = fixed_point_coverage(ProbabilityMatrix.uniform(2, 1.0), 1 / math.pi, "vertical", 10, 50)
        assert est.frequency == 1.0 and est.oracle == 1.0 and est.within

    def test_oracle_limit(self):
        m = ProbabilityMatrix.uniform(2, 0.9)
        q = (0.82 - math.sqrt(0.82 ** 2 - 4 * 0.81 * 0.01)) / (2 * 0.81)  # q = (0.1 + 0.9 q)^2
        assert column_extinction(m, 0) == pytest.approx(q, abs=1e-12)
        assert column_survival_probability(m, 1 / math.pi, "vertical", 60) == pytest.approx(1 - q, abs=1e-12)

    def test_rows_and_columns_differ(self):
        # only the left column survives: any column through x >= 1/2 dies at once
        m = ProbabilityMatrix(np.array([[1.0, 1.0], [0.0, 0.0]]))
        assert fixed_point_coverage(m, 0.7, "vertical", 5, 20).frequency == 0.0
        assert fixed_point_coverage(m, 0.7, "horizontal", 5, 20).frequency == 1.0

    def test_supercritical_within(self):
        est = fixed_point_coverage(ProbabilityMatrix.uniform(2, 0.9), 1 / math.pi, "vertical", 20, 4000, seed=5)
        assert est.within

    def test_critical_below_threshold(self, baselines):
        pin = baselines["critical_column"]
        m = ProbabilityMatrix.uniform(2, 0.5)
        assert column_survival_probability(m, 1 / math.pi, "vertical", 20) == pytest.approx(
            pin["oracle_survival_depth20"], abs=1e-12)


class TestSelfSimilarity:
    def test_full_is_point_mass(self):
        rep = self_similarity_test(ProbabilityMatrix.uniform(2, 1.0), 2, 200, SquareCode(2, (0,), (0,)))
        assert rep.tv == 0.0 and rep.root_law[4] == 1.0 and rep.passes

    def test_null_passes(self):
        rep = self_similarity_test(ProbabilityMatrix.uniform(2, 0.7), 2, 20_000, SquareCode(2, (1,), (0,)), seed=3)
        assert rep.passes

    def test_power(self):
        rep = self_similarity_test(ProbabilityMatrix.uniform(2, 0.7), 2, 20_000, SquareCode(2, (0,), (0,)),
                                   reference_matrix=ProbabilityMatrix.uniform(2, 0.6))
        assert rep.tv > 3 * rep.radius

    def test_insufficient(self):
        with pytest.raises(InsufficientSampleError):
            self_similarity_test(ProbabilityMatrix.uniform(2, 0.01), 2, 100, SquareCode(2, (0,), (0,)))

    def test_child_law_binomial(self):
        rep = self_similarity_test(ProbabilityMatrix.uniform(2, 0.7), 2, 20_000, SquareCode(2, (0,), (1,)))
        binom = np.array([math.comb(4, k) * 0.7 ** k * 0.3 ** (4 - k) for k in range(5)])
        assert np.max(np.abs(rep.root_law - binom)) < 0.015
