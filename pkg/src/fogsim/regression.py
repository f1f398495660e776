"""Multiple linear regression for execution-time and energy prediction.

Three predictor schemas are supported:

* ``EXEC_TIME_BASE``: utilisation, mobility, network time, response time.
* ``EXEC_TIME_FULL``: the above plus power availability and energy usage.
* ``ENERGY_FULL``: the base four plus power availability and execution time,
  predicting energy consumed instead of execution time.

Fitting is ordinary least squares through the normal equations, solved by
Gaussian elimination with complete pivoting on the equilibrated Gram matrix.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import FogDevice, TelemetryRecord

EPSILON_TIME_S = 1e-3
EPSILON_ENERGY_J = 1e-3
PIVOT_RTOL = 1e-10


class RegressionError(ValueError):
    pass


class InsufficientData(RegressionError):
    pass


class RankDeficient(RegressionError):
    pass


class SchemaMismatch(RegressionError):
    pass


_BASE = ("cpu_utilization", "mobility_m", "net_comm_s", "response_time_s")


class Schema(enum.Enum):
    EXEC_TIME_BASE = "ExecTimeBase"
    EXEC_TIME_FULL = "ExecTimeFull"
    ENERGY_FULL = "EnergyFull"

    @property
    def features(self) -> tuple[str, ...]:
        if self is Schema.EXEC_TIME_BASE:
            return _BASE
        if self is Schema.EXEC_TIME_FULL:
            return _BASE + ("power_available", "energy_usage_j")
        return _BASE + ("power_available", "exec_time_s")

    @property
    def target(self) -> str:
        return "energy_consumed_j" if self is Schema.ENERGY_FULL else "exec_time_s"

    @property
    def arity(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class RegressionModel:
    schema: Schema
    intercept: float
    coefficients: tuple[float, ...]
    residual_rmse: float = 0.0
    n_observations: int = 0

    def __post_init__(self):
        if len(self.coefficients) != self.schema.arity:
            raise SchemaMismatch(
                f"{self.schema.value} needs {self.schema.arity} coefficients, got {len(self.coefficients)}")

    @functools.cached_property
    def beta(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Raw affine evaluation of rows of ``X`` (no clamping)."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.schema.arity:
            raise SchemaMismatch(f"expected {self.schema.arity} features, got {X.shape[-1]}")
        return self.intercept + X @ self.beta


_RECORD_COLUMNS = ("cpu_utilization", "mobility_m", "net_comm_s", "response_time_s", "power_available",
                   "energy_usage_j", "exec_time_s", "energy_consumed_j")


class TrainingWindow:
    """FIFO of the most recent telemetry records."""

    def __init__(self, capacity: int = 500, records: Iterable[TelemetryRecord] = ()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.records: deque[TelemetryRecord] = deque(maxlen=capacity)
        self._rows: deque[tuple[float, ...]] = deque(maxlen=capacity)
        self._matrix: np.ndarray | None = None
        for r in records:
            self.add(r)

    def add(self, record: TelemetryRecord) -> None:
        self.records.append(record)
        self._rows.append(tuple(getattr(record, c) for c in _RECORD_COLUMNS))
        self._matrix = None

    def __len__(self) -> int:
        return len(self.records)

    def design(self, schema: Schema) -> tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            self._matrix = np.array(self._rows, dtype=float).reshape(len(self._rows), len(_RECORD_COLUMNS))
        cols = [_RECORD_COLUMNS.index(c) for c in schema.features]
        return self._matrix[:, cols], self._matrix[:, _RECORD_COLUMNS.index(schema.target)]


def _solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by complete-pivot elimination; raise on negligible pivots."""
    n = A.shape[0]
    M = np.hstack([A.astype(float), b.reshape(-1, 1).astype(float)])
    perm = np.arange(n)
    ref = None
    for col in range(n):
        sub = np.abs(M[col:, col:n])
        r, c = np.unravel_index(np.argmax(sub), sub.shape)
        r += col
        c += col
        pivot = M[r, c]
        if ref is None:
            ref = abs(pivot)
        if ref == 0 or abs(pivot) < PIVOT_RTOL * ref:
            raise RankDeficient(f"pivot {abs(pivot):.3g} below {PIVOT_RTOL:g} x {ref:.3g}")
        if r != col:
            M[[col, r]] = M[[r, col]]
        if c != col:
            M[:, [col, c]] = M[:, [c, col]]
            perm[[col, c]] = perm[[c, col]]
        factors = M[col + 1:, col] / M[col, col]
        M[col + 1:, col:] -= np.outer(factors, M[col, col:])
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (M[i, n] - M[i, i + 1:n] @ x[i + 1:]) / M[i, i]
    out = np.empty(n)
    out[perm] = x
    return out


def ols(X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Return (intercept, coefficients, rmse) of the least-squares fit with intercept."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n < k + 1:
        raise InsufficientData(f"need at least {k + 1} observations, have {n}")
    X1 = np.column_stack([np.ones(n), X])
    A = X1.T @ X1
    rhs = X1.T @ y
    d = np.sqrt(np.diag(A))
    if np.any(d == 0):
        raise RankDeficient("all-zero predictor column")
    z = _solve_spd(A / np.outer(d, d), rhs / d)
    beta = z / d
    resid = y - X1 @ beta
    dof = n - k - 1
    sse = float(resid @ resid)
    rmse = math.sqrt(sse / dof) if dof > 0 else 0.0
    return float(beta[0]), beta[1:], rmse


def fit(window: TrainingWindow | Sequence[TelemetryRecord], schema: Schema,
        drop_constant: bool = False) -> RegressionModel:
    """Least-squares fit of ``schema`` over the window.

    With ``drop_constant`` a predictor that never varies in the window is
    removed and given a zero coefficient instead of raising ``RankDeficient``.
    """
    if not isinstance(window, TrainingWindow):
        window = TrainingWindow(max(1, len(window)), window)
    X, y = window.design(schema)
    keep = np.ones(schema.arity, dtype=bool)
    if drop_constant and len(y):
        keep = X.max(axis=0) > X.min(axis=0)
    if len(y) < int(keep.sum()) + 1:
        raise InsufficientData(f"need at least {int(keep.sum()) + 1} observations, have {len(y)}")
    b0, b, rmse = ols(X[:, keep], y)
    coefs = np.zeros(schema.arity)
    coefs[keep] = b
    return RegressionModel(schema, b0, tuple(float(c) for c in coefs), rmse, len(y))


def _features_vector(model: RegressionModel, features) -> np.ndarray:
    if isinstance(features, Mapping):
        missing = [f for f in model.schema.features if f not in features]
        if missing:
            raise SchemaMismatch(f"missing features {missing}")
        x = np.array([features[f] for f in model.schema.features], dtype=float)
    else:
        x = np.asarray(features, dtype=float)
        if x.shape != (model.schema.arity,):
            raise SchemaMismatch(f"expected {model.schema.arity} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    return x


def predict_exec_time(model: RegressionModel, features) -> float:
    if model.schema is Schema.ENERGY_FULL:
        raise SchemaMismatch("execution-time prediction needs an ExecTime schema")
    return max(EPSILON_TIME_S, float(model.evaluate(_features_vector(model, features))))


def predict_energy(model: RegressionModel, features) -> float:
    if model.schema is not Schema.ENERGY_FULL:
        raise SchemaMismatch("energy prediction needs the EnergyFull schema")
    return max(EPSILON_ENERGY_J, float(model.evaluate(_features_vector(model, features))))


def cold_start_model(schema: Schema, devices: Sequence[FogDevice],
                     task_length_mi: float = 3000.0) -> RegressionModel:
    """Bootstrap model used until enough telemetry has been seen; error term zero."""
    coefs = [0.0] * schema.arity
    if schema is Schema.ENERGY_FULL:
        idle = float(np.mean([d.power_idle_w for d in devices])) if devices else 0.0
        coefs[schema.features.index("exec_time_s")] = idle
    else:
        mips = float(np.mean([d.mips_capacity for d in devices])) if devices else 0.0
        coefs[0] = task_length_mi / mips if mips > 0 else 0.0
    return RegressionModel(schema, 0.0, tuple(coefs), 0.0, 0)


MODEL_CSV_MAX_ARITY = max(s.arity for s in Schema)


def models_to_csv(models: Iterable[RegressionModel]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema", "beta0"] + [f"beta{i}" for i in range(1, MODEL_CSV_MAX_ARITY + 1)] + ["rmse", "n"])
    for m in models:
        betas = [repr(c) for c in m.coefficients] + [""] * (MODEL_CSV_MAX_ARITY - m.schema.arity)
        w.writerow([m.schema.value, repr(m.intercept)] + betas + [repr(m.residual_rmse), m.n_observations])
    return buf.getvalue()


def models_from_csv(text: str) -> list[RegressionModel]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        schema = Schema(row["schema"])
        coefs = tuple(float(row[f"beta{i}"]) for i in range(1, schema.arity + 1))
        out.append(RegressionModel(schema, float(row["beta0"]), coefs, float(row["rmse"]), int(row["n"])))
    return out
