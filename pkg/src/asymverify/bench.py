"""Cost modeling: turn token ledgers into seconds and measure effort asymmetry.

The model is linear, ``seconds = overhead + decode_rate * decode + prefill_rate * prefill``.
:class:`LinearCostRegressor` is a scikit-learn compatible estimator for it,
so it drops into pipelines, ``cross_val_score`` and friends; :func:`fit`
is the row-oriented convenience wrapper.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import UnderdeterminedFitError
from .verify import CostLedger


class DegenerateDesignWarning(UserWarning):
    """The prefill column is collinear with the others and was dropped."""


@dataclass(frozen=True)
class MeasurementRow:
    label: str
    prefill_extra_tokens: int
    decode_tokens: int
    seconds: float
    kind: str = "verification"
    reported_ratio: Optional[float] = None

    def __post_init__(self):
        if self.seconds <= 0:
            raise ValueError(f"{self.label}: seconds must be positive")
        if self.prefill_extra_tokens < 0 or self.decode_tokens < 0:
            raise ValueError(f"{self.label}: token counts must be non-negative")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "decode_tokens": self.decode_tokens,
            "prefill_extra_tokens": self.prefill_extra_tokens,
            "seconds": self.seconds,
            "reported_ratio": self.reported_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementRow":
        return cls(d["label"], int(d.get("prefill_extra_tokens", 0)), int(d["decode_tokens"]), float(d["seconds"]),
                   d.get("kind", "verification"), d.get("reported_ratio"))


@dataclass(frozen=True)
class FitReport:
    n_rows: int
    degenerate: bool
    r2: float
    relative_residuals: tuple[float, ...]

    @property
    def max_relative_residual(self) -> float:
        return max(abs(x) for x in self.relative_residuals)

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "degenerate": self.degenerate,
            "r2": self.r2,
            "relative_residuals": list(self.relative_residuals),
            "max_relative_residual": self.max_relative_residual,
        }


@dataclass(frozen=True)
class CostModel:
    fixed_overhead_s: float
    decode_rate_s: float
    prefill_rate_s: float = 0.0
    report: Optional[FitReport] = field(default=None, compare=False)

    def __post_init__(self):
        if min(self.fixed_overhead_s, self.decode_rate_s, self.prefill_rate_s) < 0:
            raise ValueError(f"cost model coefficients must be non-negative: {self}")

    def to_dict(self) -> dict:
        d = {
            "fixed_overhead_s": self.fixed_overhead_s,
            "decode_rate_s": self.decode_rate_s,
            "prefill_rate_s": self.prefill_rate_s,
        }
        if self.report is not None:
            d["fit"] = self.report.to_dict()
        return d


def estimate(model: CostModel, ledger: CostLedger) -> float:
    return (model.fixed_overhead_s
            + model.prefill_rate_s * ledger.prefill_tokens
            + model.decode_rate_s * ledger.decode_tokens)


class LinearCostRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares of seconds on token counts.

    ``X`` has one column (decode tokens) or two (decode tokens, extra
    prefill tokens). With ``include_prefill=True`` and a rank-deficient
    design, the prefill column is dropped, ``degenerate_`` is set and a
    :class:`DegenerateDesignWarning` is emitted.

    Parameters
    ----------
    include_prefill : bool, default=False
        Fit a separate per-token prefill rate from the second column.
    """

    def __init__(self, include_prefill: bool = False):
        self.include_prefill = include_prefill

    def _design(self, X: np.ndarray, use_prefill: bool) -> np.ndarray:
        cols = [np.ones(X.shape[0]), X[:, 0]]
        if use_prefill:
            cols.append(X[:, 1])
        return np.column_stack(cols)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.include_prefill and X.shape[1] < 2:
            raise ValueError("include_prefill needs a second column of prefill token counts")
        n_params = 3 if self.include_prefill else 2
        if X.shape[0] < n_params:
            raise UnderdeterminedFitError(f"{X.shape[0]} rows cannot determine {n_params} coefficients")

        use_prefill = self.include_prefill
        A = self._design(X, use_prefill)
        self.rank_ = int(np.linalg.matrix_rank(A))
        self.degenerate_ = use_prefill and self.rank_ < A.shape[1]
        if self.degenerate_:
            warnings.warn("prefill column is collinear with decode tokens and intercept; dropped it",
                          DegenerateDesignWarning, stacklevel=2)
            use_prefill = False
            A = self._design(X, False)
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise UnderdeterminedFitError("decode token counts do not vary; the rate is not identifiable")

        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        self.intercept_ = float(coef[0])
        self.decode_rate_ = float(coef[1])
        self.prefill_rate_ = float(coef[2]) if use_prefill else 0.0
        self.coef_ = np.array([self.decode_rate_, self.prefill_rate_])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        out = self.intercept_ + self.decode_rate_ * X[:, 0]
        if X.shape[1] > 1:
            out = out + self.prefill_rate_ * X[:, 1]
        return out

    def to_cost_model(self, report: Optional[FitReport] = None) -> CostModel:
        check_is_fitted(self, "coef_")
        return CostModel(self.intercept_, self.decode_rate_, self.prefill_rate_, report)


def rows_to_arrays(rows: Sequence[MeasurementRow]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[r.decode_tokens, r.prefill_extra_tokens] for r in rows], dtype=np.float64)
    y = np.array([r.seconds for r in rows], dtype=np.float64)
    return X, y


def fit(rows: Sequence[MeasurementRow], include_prefill: bool = False) -> CostModel:
    """Least-squares cost model from measurements.

    Collinearity is reported on ``model.report.degenerate`` rather than
    raised, so a caller can still use the reduced model.
    """
    rows = list(rows)
    X, y = rows_to_arrays(rows)
    reg = LinearCostRegressor(include_prefill=include_prefill)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDesignWarning)
        reg.fit(X, y)
    pred = reg.predict(X)
    resid = tuple(float(v) for v in (pred - y) / y)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return reg.to_cost_model(FitReport(len(rows), reg.degenerate_, r2, resid))


def effort_ratio(full_cost: float, verify_cost: float) -> float:
    """Full generation time over verification time."""
    if verify_cost <= 0:
        raise ValueError("verification cost must be positive")
    return full_cost / verify_cost


@dataclass(frozen=True)
class RatioRow:
    label: str
    seconds: float
    ratio: float
    reported_ratio: Optional[float]

    def to_dict(self) -> dict:
        return {"label": self.label, "seconds": self.seconds, "ratio": self.ratio,
                "reported_ratio": self.reported_ratio}


def ratio_table(rows: Sequence[MeasurementRow]) -> list[RatioRow]:
    """Effort ratio of every verification row against the generation row."""
    gens = [r for r in rows if r.kind == "generation"]
    if len(gens) != 1:
        raise ValueError("ratio table needs exactly one generation row")
    full = gens[0].seconds
    return [RatioRow(r.label, r.seconds, effort_ratio(full, r.seconds), r.reported_ratio)
            for r in rows if r.kind != "generation"]


def load_rows(path: str | Path | None = None) -> list[MeasurementRow]:
    """Measurement rows from a JSON file; the bundled reference timings by default."""
    if path is None:
        text = resources.files("asymverify").joinpath("data/reference_timings.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    items = data["rows"] if isinstance(data, dict) else data
    return [MeasurementRow.from_dict(d) for d in items]
