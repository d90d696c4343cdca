"""Rolling one-step-ahead evaluation and RMSE comparison reports."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .dataset import WindSeries
from .errors import ForecastError, InvalidInputError

log = logging.getLogger(__name__)

STEP_COLUMNS = ("t", "actual", "predicted", "rmse_t", "switched", "mode_converged",
                "pred_mean", "pred_var")


class Forecaster(Protocol):
    """One-step-ahead forecaster driven by the harness.

    ``forecast`` must only use the training series and observations already
    passed to ``step``. ``last_diagnostics`` (optional) is a dict describing
    the most recent forecast.
    """

    name: str
    total: bool

    def init(self, train: WindSeries) -> None: ...

    def forecast(self) -> float: ...

    def step(self, observation: float) -> None: ...


@dataclass
class EvalResult:
    method: str
    actual: np.ndarray
    predictions: np.ndarray
    rmse_curve: np.ndarray
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def final_rmse(self) -> float:
        return float(self.rmse_curve[-1])

    @property
    def n_failures(self) -> int:
        return sum(1 for d in self.diagnostics if d.get("failed"))

    @property
    def n_switched(self) -> int:
        return sum(1 for d in self.diagnostics if d.get("switched"))


def rmse_curve(actual, predicted) -> np.ndarray:
    """``RMSE(t) = sqrt(mean_{i<=t} (actual_i - predicted_i)^2)`` for every t."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1 or a.size == 0:
        raise InvalidInputError("actual and predicted must be equal-length nonempty vectors")
    return np.sqrt(np.cumsum((a - p) ** 2) / np.arange(1, a.size + 1))


def rolling_evaluate(f: Forecaster, train: WindSeries, test: WindSeries) -> EvalResult:
    """Forecast every test point from the training series and the test prefix.

    The observation ``test[t]`` is handed to the forecaster only after its
    forecast has been recorded. A failing step of a non-total forecaster is
    recorded (``failed=True``) and scored with the previous observation.
    """
    f.init(train)
    x = test.values
    preds = np.empty(x.size)
    diags: list[dict] = []
    last = float(train.values[-1])
    for t in range(x.size):
        try:
            pred = float(f.forecast())
            if not math.isfinite(pred):
                raise ForecastError("non-finite forecast")
            diag = dict(getattr(f, "last_diagnostics", None) or {})
            diag["failed"] = False
        except ForecastError as exc:
            if getattr(f, "total", False):
                raise type(exc)(f"step {t + 1}: {exc}") from exc
            log.warning("%s: step %d failed (%s); scoring persistence", f.name, t + 1, exc)
            pred = last
            diag = {"failed": True, "error": str(exc)}
        preds[t] = pred
        diags.append(diag)
        f.step(float(x[t]))
        last = float(x[t])
    return EvalResult(method=f.name, actual=x.copy(), predictions=preds,
                      rmse_curve=rmse_curve(x, preds), diagnostics=diags)


@dataclass
class ComparisonRow:
    turbine_id: str
    results: dict[str, EvalResult]

    @property
    def final(self) -> dict[str, float]:
        return {name: r.final_rmse for name, r in self.results.items()}

    @property
    def best(self) -> str:
        """Method with the lowest final RMSE (first column on ties)."""
        scores = self.final
        return min(scores, key=lambda k: scores[k])


@dataclass
class ComparisonTable:
    methods: list[str]
    rows: list[ComparisonRow]


def compare(methods: Sequence[Forecaster], train: WindSeries, test: WindSeries) -> ComparisonRow:
    if not methods:
        raise InvalidInputError("at least one method is required")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise InvalidInputError("method names must be unique")
    return ComparisonRow(train.turbine_id, {m.name: rolling_evaluate(m, train, test) for m in methods})


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_steps_csv(result: EvalResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        for t in range(result.actual.size):
            d = result.diagnostics[t] if t < len(result.diagnostics) else {}
            w.writerow([t + 1, _cell(result.actual[t]), _cell(result.predictions[t]),
                        _cell(result.rmse_curve[t]), _cell(d.get("switched")),
                        _cell(d.get("mode_converged")), _cell(d.get("pred_mean")),
                        _cell(d.get("pred_var"))])


def read_steps_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in STEP_COLUMNS}


def markdown_table(table: ComparisonTable) -> str:
    lines = ["| Turbine | " + " | ".join(table.methods) + " |",
             "|" + "---:|" * (len(table.methods) + 1)]
    for row in table.rows:
        best = row.best
        cells = []
        for name in table.methods:
            txt = f"{row.results[name].final_rmse:.3f}"
            cells.append(f"**{txt}**" if name == best else txt)
        lines.append(f"| {row.turbine_id} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(table: ComparisonTable, fmt: str, path) -> list[Path]:
    """Write the comparison.

    ``csv``: ``path`` is a directory receiving ``summary.csv`` plus one
    per-step file ``<turbine>__<method>.csv`` per evaluation.
    ``markdown``: ``path`` is the table file.
    """
    path = Path(path)
    if fmt == "markdown":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(markdown_table(table))
        return [path]
    if fmt != "csv":
        raise InvalidInputError(f"unknown report format {fmt!r}")
    path.mkdir(parents=True, exist_ok=True)
    written = []
    summary = path / "summary.csv"
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["turbine", *table.methods, "best"])
        for row in table.rows:
            w.writerow([row.turbine_id, *(_cell(row.results[m].final_rmse) for m in table.methods), row.best])
    written.append(summary)
    for row in table.rows:
        for name in table.methods:
            p = path / f"{_safe(row.turbine_id)}__{_safe(name)}.csv"
            write_steps_csv(row.results[name], p)
            written.append(p)
    return written
