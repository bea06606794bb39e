import warnings
from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from asymverify.bench import (
    CostModel,
    DegenerateDesignWarning,
    LinearCostRegressor,
    MeasurementRow,
    effort_ratio,
    estimate,
    fit,
    load_rows,
    ratio_table,
    rows_to_arrays,
)
from asymverify.exceptions import UnderdeterminedFitError
from asymverify.verify import CostLedger

from oracles import simple_ols

# closed-form OLS on the four verification rows (tests/oracles.simple_ols)
OVERHEAD = Fraction(511, 2300)      # 0.222173913...
DECODE_RATE = Fraction(14111, 287500)  # 0.049081739...


@pytest.fixture(scope="module")
def rows():
    return load_rows()


@pytest.fixture(scope="module")
def verification_rows(rows):
    return [r for r in rows if r.kind == "verification"]


def test_fixture_contents(rows):
    assert [(r.label, r.decode_tokens, r.seconds) for r in rows] == [
        ("Full 792 tokens", 792, 32.13),
        ("Last 50 tokens", 50, 2.59),
        ("Last 100 tokens", 100, 5.25),
        ("Last 200 tokens", 200, 10.01),
        ("Last 400 tokens", 400, 19.85),
    ]
    assert all(r.prefill_extra_tokens + r.decode_tokens == 792 for r in rows)


def test_oracle_reproduces_frozen_coefficients(verification_rows):
    a, b = simple_ols([r.decode_tokens for r in verification_rows], [str(r.seconds) for r in verification_rows])
    assert (a, b) == (OVERHEAD, DECODE_RATE)


def test_fit_verification_rows(verification_rows):
    model = fit(verification_rows)
    assert model.fixed_overhead_s == pytest.approx(float(OVERHEAD), abs=1e-12)
    assert model.decode_rate_s == pytest.approx(float(DECODE_RATE), abs=1e-12)
    assert model.prefill_rate_s == 0.0
    assert model.report.r2 > 0.999
    assert model.report.max_relative_residual < 0.05
    assert not model.report.degenerate


def test_forward_estimate_200_tokens(verification_rows):
    model = fit(verification_rows)
    assert estimate(model, CostLedger(0, 200)) == pytest.approx(10.0385, abs=1e-4)
    assert estimate(model, CostLedger(0, 200)) == pytest.approx(10.01, rel=0.005)


def test_estimate_linearity():
    m = CostModel(0.5, 0.04, 0.0)
    assert estimate(m, CostLedger()) == 0.5
    assert estimate(m, CostLedger(10, 400)) - estimate(m, CostLedger(10, 200)) == pytest.approx(0.04 * 200)
    assert estimate(CostModel(1.0, 0.1, 0.01), CostLedger(100, 10)) == pytest.approx(3.0)


def test_two_rows_interpolate_exactly():
    rows = [MeasurementRow("a", 0, 10, 1.5), MeasurementRow("b", 0, 30, 3.5)]
    model = fit(rows)
    assert model.fixed_overhead_s == pytest.approx(0.5)
    assert model.decode_rate_s == pytest.approx(0.1)
    assert model.report.max_relative_residual < 1e-12


def test_collinear_design_detected(rows):
    model = fit(rows, include_prefill=True)
    assert model.report.degenerate
    assert model.prefill_rate_s == 0.0


def test_regressor_warns_on_collinearity(rows):
    X, y = rows_to_arrays(rows)
    with pytest.warns(DegenerateDesignWarning):
        reg = LinearCostRegressor(include_prefill=True).fit(X, y)
    assert reg.degenerate_ and reg.rank_ == 2


def test_separable_prefill_rate():
    # prefill and decode vary independently here, so both rates are identifiable
    true = CostModel(0.3, 0.05, 0.002)
    rows = [MeasurementRow(f"r{i}", p, d, estimate(true, CostLedger(p, d)))
            for i, (p, d) in enumerate([(0, 10), (100, 10), (50, 40), (300, 80)])]
    model = fit(rows, include_prefill=True)
    assert not model.report.degenerate
    assert model.prefill_rate_s == pytest.approx(0.002)
    assert model.decode_rate_s == pytest.approx(0.05)


def test_underdetermined():
    with pytest.raises(UnderdeterminedFitError):
        fit([MeasurementRow("a", 0, 10, 1.0)])
    rows = [MeasurementRow("a", 5, 10, 1.0), MeasurementRow("b", 6, 20, 2.0)]
    with pytest.raises(UnderdeterminedFitError):
        fit(rows, include_prefill=True)
    with pytest.raises(UnderdeterminedFitError):
        fit([MeasurementRow("a", 0, 10, 1.0), MeasurementRow("b", 0, 10, 2.0)])


def test_sklearn_protocol(verification_rows):
    X, y = rows_to_arrays(verification_rows)
    reg = LinearCostRegressor()
    assert reg.get_params() == {"include_prefill": False}
    assert clone(reg).set_params(include_prefill=True).include_prefill
    reg.fit(X[:, :1], y)
    assert reg.score(X[:, :1], y) > 0.999
    pipe = make_pipeline(FunctionTransformer(lambda a: a[:, :1]), LinearCostRegressor())
    assert pipe.fit(X, y).predict(X) == pytest.approx(reg.predict(X[:, :1]))


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        LinearCostRegressor().predict(np.ones((2, 1)))


@pytest.mark.parametrize("verify,expected", [(2.59, 12.41), (5.25, 6.12), (10.01, 3.21), (19.85, 1.62)])
def test_reported_ratios(verify, expected):
    assert effort_ratio(32.13, verify) == pytest.approx(expected, abs=0.01)


def test_ratio_identity_and_errors():
    assert effort_ratio(7.5, 7.5) == 1.0
    with pytest.raises(ValueError):
        effort_ratio(1.0, 0.0)


def test_ratio_table(rows):
    table = ratio_table(rows)
    assert [t.label for t in table] == ["Last 50 tokens", "Last 100 tokens", "Last 200 tokens", "Last 400 tokens"]
    for t in table:
        assert abs(t.ratio - t.reported_ratio) <= 0.01


def test_measurement_validation():
    with pytest.raises(ValueError):
        MeasurementRow("x", 0, 1, 0.0)
    with pytest.raises(ValueError):
        CostModel(-1.0, 0.1)


def test_fit_is_silent(verification_rows):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit(verification_rows)
