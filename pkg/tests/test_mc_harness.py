from __future__ import annotations

import json

import numpy as np
import pytest
from scipy import stats

from monoboot.errors import ReplicationFailed
from monoboot.mc_harness import (
    COLUMNS,
    MODELS,
    SimConfig,
    SimReport,
    emit_report,
    generate_dgp,
    ks_distance,
    method_plan,
    report_from_json,
    run_replication,
    run_simulation,
    summary_lines,
)


def _trapezoid(f, s):
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(s)))


def test_theta0_constants():
    assert MODELS[1].regression(0.5) == 2.0
    assert MODELS[2].regression(0.5) == 0.0
    assert MODELS[3].regression(0.5) == 24.0
    for m in MODELS.values():
        assert float(m.regression(0.5)) == m.theta0_at_half


@pytest.mark.parametrize("mid, q, coef", [(1, 1, 1.0), (2, 1, 1.0), (3, 3, 1.0)])
def test_drift_coefficients_match_local_expansion(mid, q, coef):
    # with f_X = 1 the mean function is the integral of theta0(s) - theta0(0.5),
    # which behaves like D_q v^{q+1} near zero
    m = MODELS[mid]
    assert m.q_true == q and m.d_true == coef
    for v in (1e-2, -1e-2):
        s = np.linspace(0.5, 0.5 + v, 2001)
        val = _trapezoid(m.regression(s) - m.theta0_at_half, s)
        assert val / v ** (q + 1) == pytest.approx(coef, rel=2e-2)


def test_generate_dgp_moments():
    x, y = generate_dgp(1, 10**6, np.random.default_rng(0))
    assert abs(x.mean() - 0.5) < 1e-3
    assert abs(x.var() - 1 / 12) < 1e-3
    assert stats.kstest(x[:20000], "uniform").pvalue > 1e-3
    resid = y - MODELS[1].regression(x)
    assert abs(resid.mean()) < 5e-3 and abs(resid.std() - 1) < 5e-3


def test_generate_dgp_heteroscedastic_and_small_noise():
    x, y = generate_dgp(2, 200_000, np.random.default_rng(1))
    e = (y - MODELS[2].regression(x)) / np.exp(x)
    assert abs(e.std() - 1) < 1e-2
    x, y = generate_dgp(3, 200_000, np.random.default_rng(2))
    assert abs((y - MODELS[3].regression(x)).std() - 0.1) < 1e-3


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(model=4)
    with pytest.raises(ValueError):
        SimConfig(n=10)
    with pytest.raises(ValueError):
        SimConfig(methods=("bogus",))
    with pytest.raises(ValueError):
        SimConfig.from_dict({"model": 1, "colour": "red"})
    cfg = SimConfig.from_dict({"model": 2, "n": 100, "S": 3, "B": 5, "methods": ["naive"]})
    assert cfg.methods == ("naive",)


def test_method_plans():
    cfg = SimConfig(model=3, n=100, S=1, B=10, methods=("oracle", "nd_known", "nd_robust", "naive", "moon"))
    assert method_plan("oracle", cfg, 0).d_override == {3: 1.0}
    assert method_plan("nd_known", cfg, 0).q_mode.known
    assert method_plan("nd_robust", cfg, 0).q_mode.robust
    assert method_plan("naive", cfg, 0).mode == "naive"
    assert method_plan("moon", cfg, 0).m == 10


def test_single_replication_smoke():
    cfg = SimConfig(model=1, n=100, S=1, B=20, methods=("oracle", "nd_known", "nd_robust", "naive", "moon"))
    out = run_replication(cfg, 0)
    for method in cfg.methods:
        covered, length, d1, d3 = out[method]
        assert isinstance(covered, bool) and length >= 0


def test_simulation_report_rows():
    cfg = SimConfig(model=1, n=100, S=3, B=20)
    rep = run_simulation(cfg)
    assert [r["method"] for r in rep.rows] == list(cfg.methods)
    oracle = rep.row("oracle")
    assert oracle["D1_avg"] == 1.0 and oracle["D3_avg"] is None
    for r in rep.rows:
        assert 0 <= r["coverage"] <= 1 and r["failures"] == 0


def test_simulation_deterministic_across_threads():
    cfg = SimConfig(model=2, n=100, S=6, B=20, methods=("nd_robust", "naive"))
    a = emit_report(run_simulation(cfg, workers=1))
    b = emit_report(run_simulation(cfg, workers=3))
    assert a == b


def test_strict_mode_raises_and_lenient_counts(monkeypatch):
    from monoboot import mc_harness
    from monoboot.errors import BoundaryEvaluation

    real = mc_harness.ci_for_model

    def flaky(model, plan):
        if plan.mode == "naive":
            raise BoundaryEvaluation("forced")
        return real(model, plan)

    monkeypatch.setattr(mc_harness, "ci_for_model", flaky)
    cfg = SimConfig(model=1, n=100, S=2, B=10, methods=("oracle", "naive"))
    with pytest.raises(ReplicationFailed):
        run_simulation(cfg)
    rep = run_simulation(SimConfig(model=1, n=100, S=2, B=10, methods=("oracle", "naive"), strict=False))
    assert rep.row("naive")["failures"] == 2 and rep.row("naive")["coverage"] is None
    assert "NA" in emit_report(rep, "csv")


def test_emit_formats():
    empty = SimReport([], {"model": 1})
    assert emit_report(empty, "csv").strip() == ",".join(COLUMNS)
    rep = SimReport([{"method": "oracle", "D1_avg": 1.0, "D3_avg": None, "coverage": 0.95,
                      "avg_length": 0.4, "failures": 0}], {"model": 1})
    csv = emit_report(rep, "csv").splitlines()
    assert len(csv) == 2 and len(csv[1].split(",")) == 5
    assert csv[1] == "oracle,1.000,NA,0.950,0.400"
    md = emit_report(rep, "markdown").splitlines()
    assert md[0].count("|") == 6 and len(md) == 3
    back = report_from_json(emit_report(rep, "json"))
    assert back.rows == rep.rows and back.metadata == rep.metadata
    with pytest.raises(ValueError):
        emit_report(rep, "xml")


def test_json_has_no_timing():
    rep = run_simulation(SimConfig(model=1, n=100, S=1, B=5, methods=("naive",)))
    payload = json.loads(emit_report(rep))
    assert set(payload) == {"metadata", "rows"}
    assert "seconds" not in json.dumps(payload)
    assert len(summary_lines(rep)) == 1


def test_ks_distance_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b = rng.normal(size=57), rng.normal(0.3, 1.2, size=91)
        assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
    a = np.array([0.0, 0.0, 1.0])
    assert ks_distance(a, a) == 0.0
