import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invop.errors import ConfigInvalid, DegenerateFit
from invop.fem import ProblemKind, ProblemTag
from invop.studies import (
    RateTable,
    StudyConfig,
    analytic_cases,
    calibrate_fem_rho,
    fem_rho,
    fit_slope,
    run_study,
)

# -- fit_slope --------------------------------------------------------------


def test_fit_slope_exact_power_law():
    slope, stderr = fit_slope([1, 2, 4], [1, 4, 16])
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-10)


def test_fit_slope_constant():
    slope, _ = fit_slope([1, 2, 4], [1, 1, 1])
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_fit_slope_synthetic_self_test():
    ns = [16, 32, 64, 128, 256]
    errs = [3.0 * n ** -2 for n in ns]
    slope, stderr = fit_slope(ns, errs)
    assert slope == pytest.approx(-2.0, abs=1e-12)


def test_fit_slope_degenerate_abscissae():
    with pytest.raises(DegenerateFit):
        fit_slope([2, 2, 2], [1, 2, 3])


def test_fit_slope_needs_three_positive_points():
    with pytest.raises(DegenerateFit):
        fit_slope([1, 2, 4], [1.0, -1.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(
    p=st.floats(-3, 3),
    c=st.floats(0.1, 10),
)
def test_fit_slope_recovers_any_power(p, c):
    xs = [1.0, 2.0, 4.0, 8.0]
    ys = [c * x ** p for x in xs]
    slope, _ = fit_slope(xs, ys)
    assert slope == pytest.approx(p, abs=1e-8)


# -- configuration validation -----------------------------------------------


def test_unknown_study_rejected():
    with pytest.raises(ConfigInvalid):
        StudyConfig("bogus")


def test_short_ladder_rejected():
    with pytest.raises(ConfigInvalid):
        StudyConfig("fem_rate", ladder=(16, 32, 64))


def test_non_monotone_ladder_rejected():
    with pytest.raises(ConfigInvalid):
        StudyConfig("fem_rate", ladder=(16, 64, 32, 128))
    with pytest.raises(ConfigInvalid):
        StudyConfig("fem_rate", ladder=(16, 16, 32, 64))


def test_bad_problem_rejected():
    with pytest.raises(ConfigInvalid):
        StudyConfig("reg_rate", problem="z")


def test_default_ladders_validate():
    for study in ("fem_rate", "surrogate_error", "reg_rate", "mollify_rate"):
        cfg = StudyConfig(study)
        assert len(cfg.ladder) >= 4


# -- studies ----------------------------------------------------------------


def test_fem_rate_slopes_in_window():
    table = run_study(StudyConfig("fem_rate"))
    assert len(table.case_slopes) == 3
    for label, slope, stderr in table.case_slopes:
        assert -2.3 < slope < -1.7, label


def test_quadrature_rate_near_minus_two():
    table = run_study(StudyConfig("surrogate_error"))
    assert -2.3 < table.fitted_slope < -1.7


def test_mollify_rate_near_two():
    table = run_study(StudyConfig("mollify_rate"))
    assert 1.7 < table.fitted_slope < 2.3


def test_slope_recomputable_from_rows():
    table = run_study(StudyConfig("mollify_rate"))
    xs = [r[0] for r in table.rows]
    ys = [r[1] for r in table.rows]
    slope, _ = fit_slope(xs, ys)
    assert slope == pytest.approx(table.fitted_slope, abs=1e-12)


def test_calibrated_rho_bounds_measured_errors():
    for tag in ProblemTag:
        prob = ProblemKind(tag)
        c = calibrate_fem_rho(prob)
        assert c > 0
        assert fem_rho(prob, 256) == pytest.approx(c / 256 ** 2, rel=1e-14)
        assert fem_rho(prob, 256) < 1e-4


def test_csv_written_and_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_study(StudyConfig("fem_rate", out=str(out1)))
    run_study(StudyConfig("fem_rate", out=str(out2)))
    assert out1.read_text() == out2.read_text()
    header = out1.read_text().splitlines()[0]
    assert header == "case,n,error_L2"


def test_reg_rate_jobs_matches_serial(tmp_path):
    ladder = (0.0125, 0.00625, 0.003125, 0.0015625)
    base = dict(problem="a", ladder=ladder, n_cells=64)
    t1 = run_study(StudyConfig("reg_rate", **base, jobs=1))
    t2 = run_study(StudyConfig("reg_rate", **base, jobs=3))

    def strip_runtime(rows):
        out = []
        for r in rows:
            cells = r.split(",")
            cells[11] = ""
            out.append(",".join(cells))
        return out

    assert strip_runtime(t1.rows) == strip_runtime(t2.rows)


def test_abort_preserves_partial_rows(tmp_path, monkeypatch):
    import invop.studies as studies

    calls = {"n": 0}
    orig = studies._fem_case_error

    def boom(case, n):
        calls["n"] += 1
        if calls["n"] > 4:
            raise RuntimeError("injected failure")
        return orig(case, n)

    monkeypatch.setattr(studies, "_fem_case_error", boom)
    out = tmp_path / "partial.csv"
    with pytest.raises(RuntimeError):
        run_study(StudyConfig("fem_rate", out=str(out)))
    text = out.read_text()
    assert "aborted" in text
    assert len(text.splitlines()) >= 5  # header + 4 completed rows + flag


def test_rate_table_csv_lines_format():
    t = RateTable(("n", "error"), ((16, 0.125), (32, 0.03125)), -2.0, 0.0)
    lines = list(t.csv_lines())
    assert lines[0] == "n,error"
    assert lines[1] == "16,0.125"
