import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from conftest import base_doc, build
from vaxchain import analysis, formats, optimizer, oracle
from vaxchain.scenario import compute_cost

samples = st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=2, max_size=25)


def test_t_test_examples():
    r = analysis.paired_t_test([1, 2, 3, 4], [1, 2, 3, 4])
    assert (r.t, r.p) == (0.0, 1.0)
    r = analysis.paired_t_test([2, 3, 4], [1, 2, 3])
    assert r.t == math.inf and r.p == 0.0 and r.degenerate
    r = analysis.paired_t_test([5.0, 7.0, 9.0, 4.0], [3.0, 6.0, 6.0, 4.0])
    assert r.df == 3
    assert r.t == pytest.approx(1.5 / math.sqrt(5 / 3 / 4), rel=1e-12)
    with pytest.raises(ValueError):
        analysis.paired_t_test([1.0], [2.0])
    with pytest.raises(ValueError):
        analysis.paired_t_test([1.0, 2.0], [2.0])


@given(samples, st.randoms(use_true_random=False))
def test_t_test_antisymmetric(a, rnd):
    b = [x + rnd.uniform(-5, 5) for x in a]
    ab, ba = analysis.paired_t_test(a, b), analysis.paired_t_test(b, a)
    assert ab.t == pytest.approx(-ba.t, rel=1e-12) or (math.isinf(ab.t) and ab.t == -ba.t)
    assert ab.p == pytest.approx(ba.p, rel=1e-12)


@settings(max_examples=300)
@given(st.floats(-60, 60), st.integers(1, 300))
def test_p_value_against_reference(t, df):
    assert abs(analysis.t_two_sided_p(t, df) - 2 * stats.t.sf(abs(t), df)) < 1e-10


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 1))
def test_incomplete_beta_against_reference(a, b, x):
    assert analysis.regularized_incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-11)


def test_unit_multiplier_reproduces_baseline(midsize):
    table = analysis.run_sensitivity(midsize, "budget", (1.0,))
    row = table.row(1.0)
    plan, traj, _ = optimizer.run_knapsack_decomposition(midsize, cross_check=False)
    assert row.infections == table.baseline.infections == pytest.approx(traj.new_infections.sum(), rel=0)
    assert row.infections_change == 0.0 and row.vaccinations_change == 0.0


def test_sensitivity_deterministic(midsize):
    a = analysis.run_sensitivity(midsize, "capacity", (0.9, 1.1))
    b = analysis.run_sensitivity(midsize, "capacity", (0.9, 1.1))
    assert a == b


def test_parallel_matches_serial(midsize):
    serial = analysis.run_sensitivity(midsize, "supply", (0.8, 1.2))
    parallel = analysis.run_sensitivity(midsize, "supply", (0.8, 1.2), workers=2)
    assert serial == parallel


@pytest.mark.parametrize("parameter,m,encoding,sign", [
    ("supply", 0.8, "ratio", 1),
    ("infection_rate", 1.2, "ratio", 1),
    ("demand", 0.8, "ratio", 1),
    ("vaccine_effectiveness", 1.2, "effectiveness", -1),
    ("vaccine_effectiveness", 0.8, "ratio", -1),
])
def test_midsize_directions(midsize, parameter, m, encoding, sign):
    change = analysis.run_sensitivity(midsize, parameter, (m,), encoding=encoding).row(m).infections_change
    assert sign * change > 0


def test_effectiveness_encodings_meet_at_unit_multiplier(midsize):
    for enc in analysis.ENCODINGS:
        s = analysis.perturb(midsize, "vaccine_effectiveness", 1.0, enc)
        np.testing.assert_array_equal(s.epidemic.beta_vax, midsize.epidemic.beta_vax)
    capped = analysis.perturb(midsize, "vaccine_effectiveness", 100.0, "ratio")
    assert np.all(capped.epidemic.beta_vax <= capped.epidemic.beta)


def test_table_encoding_values():
    s = build(base_doc(T=2, beta=1e-4))
    np.testing.assert_allclose(analysis.perturb(s, "vaccine_effectiveness", 0.8, "table").epidemic.beta_vax,
                               0.64 * s.epidemic.beta, rtol=1e-12)
    np.testing.assert_allclose(analysis.perturb(s, "vaccine_effectiveness", 1.2, "table").epidemic.beta_vax,
                               0.96 * s.epidemic.beta, rtol=1e-12)
    assert analysis.perturb(s, "vaccine_effectiveness", 1.0, "table") is s


def test_perturb_rejects_bad_input(midsize):
    with pytest.raises(ValueError):
        analysis.perturb(midsize, "weather", 1.1)
    with pytest.raises(ValueError):
        analysis.perturb(midsize, "budget", 0.0)
    with pytest.raises(ValueError):
        analysis.perturb(midsize, "vaccine_effectiveness", 1.1, "odds")


def test_failed_run_is_flagged(midsize, monkeypatch):
    real = analysis.run_knapsack_decomposition

    def flaky(s, cross_check=True):
        if s.costs.budget > midsize.costs.budget * 1.1:
            raise RuntimeError("master LP at period 0 is infeasible")
        return real(s, cross_check)

    monkeypatch.setattr(analysis, "run_knapsack_decomposition", flaky)
    table = analysis.run_sensitivity(midsize, "budget", (0.8, 1.2))
    bad = table.row(1.2)
    assert bad.failed and "infeasible" in bad.error and math.isnan(bad.infections)
    assert not table.row(0.8).failed


def test_sensitivity_table_file(tmp_path, midsize):
    t = analysis.run_sensitivity(midsize, "demand", (0.8, 1.2))
    analysis.write_sensitivity(tmp_path / "s.tsv", [t])
    header, rows = formats.read_table(tmp_path / "s.tsv")
    assert tuple(header) == analysis.SENSITIVITY_HEADER
    assert [r[1] for r in rows] == ["0.8", "1.2"]
    assert all(r[-1] == "ok" for r in rows)


def test_infections_averted():
    assert analysis.infections_averted(1000, 750.5) == 249.5


def test_report_round_trip(tmp_path, tiny):
    plan, traj, diag = optimizer.run_knapsack_decomposition(tiny)
    cmp = oracle.compare_with_oracle(tiny, plan, grid=oracle.GridSpec(step=tuple(
        tiny.supply.supplier_capacity.sum(axis=0) / 2)))
    bundle = analysis.assemble_report(tmp_path / "out", tiny, plan, traj, diag, oracle=cmp,
                                      reference_cases=traj.new_infections.sum() * 1.5, method="knapsack")
    assert set(bundle.files) >= {"plan.tsv", "trajectory.tsv", "ledger.tsv", "diagnostics.txt", "summary.txt"}
    back = formats.read_plan(bundle.directory / "plan.tsv", tiny)
    for name, value in plan.as_dict().items():
        np.testing.assert_array_equal(getattr(back, name), value, err_msg=name)
    tr = formats.read_trajectory(bundle.directory / "trajectory.tsv", tiny)
    np.testing.assert_array_equal(tr.S, traj.S)
    np.testing.assert_array_equal(tr.new_infections, traj.new_infections)
    ledger = formats.read_ledger(bundle.directory / "ledger.tsv")
    np.testing.assert_array_equal(ledger.per_period, compute_cost(tiny, plan).per_period)
    summary = analysis.read_summary(bundle.directory / "summary.txt")
    assert summary["method"] == "knapsack"
    assert float(summary["infections_averted"]) == pytest.approx(traj.new_infections.sum() * 0.5)
    assert float(summary["optimality_gap_percent"]) == pytest.approx(cmp.gap)
    assert analysis.read_summary(bundle.directory / "diagnostics.txt")["termination"] == diag.termination


def test_optional_sections_omitted(tmp_path):
    s = build(base_doc(T=3, beta=1e-4))
    plan, traj, _ = optimizer.run_knapsack_decomposition(s)
    bundle = analysis.assemble_report(tmp_path, s, plan, traj)
    assert "diagnostics.txt" not in bundle.files and "sensitivity.tsv" not in bundle.files
    summary = analysis.read_summary(tmp_path / "summary.txt")
    assert "oracle_objective" not in summary and "infections_averted" not in summary
    assert "method" not in summary


def test_unwritable_directory_named(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    s = build(base_doc(T=2))
    plan, traj, _ = optimizer.run_knapsack_decomposition(s)
    with pytest.raises(OSError, match="file"):
        analysis.assemble_report(blocker / "sub", s, plan, traj)
