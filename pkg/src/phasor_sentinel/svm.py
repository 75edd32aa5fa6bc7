"""Two-class soft-margin SVM trained from scratch with SMO.

Pipeline: per-feature standardization (population std), RBF kernel,
Platt-style sequential minimal optimization with an error cache and an
LRU kernel-row cache, plus a small grid-search driver.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

MODEL_SCHEMA_VERSION = "1.0"

NORMAL = -1
SPOOFED = 1


class ConvergenceError(RuntimeError):
    """SMO failed to reach the KKT tolerance; carries best-so-far state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class Standardizer:
    """Per-feature shift/scale learned on training data.

    Uses the population standard deviation (divide by n). Zero-variance
    features pass through with scale 1 and a warning.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValueError("need a 2-D array with at least 2 examples")
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        dead = scale == 0.0
        if np.any(dead):
            warnings.warn(f"zero-variance feature(s) at columns {np.flatnonzero(dead).tolist()}; passing through")
            scale = np.where(dead, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.mean


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = x - y
    return math.exp(-gamma * float(d @ d))

def rbf_gram(x: np.ndarray, y: np.ndarray, gamma: float, out_dtype=np.float64) -> np.ndarray:
    """Kernel matrix K[i, j] = exp(-gamma * ||x_i - y_j||^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[1] != y.shape[1]:
        raise ValueError("dimension mismatch")
    sq = (x * x).sum(axis=1)[:, None] + (y * y).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(np.asarray(-gamma * sq, dtype=out_dtype))


@dataclass
class SvmModel:
    standardizer: Standardizer
    gamma: float
    C: float
    support_vectors: np.ndarray  # standardized feature space
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    metadata: dict = field(default_factory=dict)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    def margins(self, x: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """Decision values for raw (unstandardized) feature rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValueError("dimension mismatch")
        xs = self.standardizer.transform(x)
        out = np.empty(xs.shape[0])
        for lo in range(0, xs.shape[0], chunk):
            k = rbf_gram(xs[lo : lo + chunk], self.support_vectors, self.gamma)
            out[lo : lo + chunk] = k @ self.dual_coef + self.bias
        return out

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "kernel": "rbf",
            "gamma": self.gamma,
            "C": self.C,
            "standardizer": {
                "mean": self.standardizer.mean.tolist(),
                "scale": self.standardizer.scale.tolist(),
            },
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        major = str(d.get("schema_version", "")).split(".")[0]
        if major != MODEL_SCHEMA_VERSION.split(".")[0]:
            raise ValueError(f"unsupported model schema version {d.get('schema_version')!r}")
        return cls(
            standardizer=Standardizer(
                mean=np.array(d["standardizer"]["mean"]),
                scale=np.array(d["standardizer"]["scale"]),
            ),
            gamma=d["gamma"],
            C=d["C"],
            support_vectors=np.array(d["support_vectors"], dtype=float).reshape(len(d["support_vectors"]), -1),
            dual_coef=np.array(d["dual_coef"], dtype=float),
            bias=d["bias"],
            metadata=d.get("metadata", {}),
        )

    @classmethod
    def load(cls, path) -> "SvmModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def decide(model: SvmModel, x) -> tuple[int, float]:
    """(label, margin) for one example; margin exactly 0 counts as Normal."""
    margin = float(model.margins(np.atleast_2d(x))[0])
    return (SPOOFED if margin > 0 else NORMAL), margin


class _KernelRows:
    """LRU cache of RBF kernel rows over the training set."""

    def __init__(self, x: np.ndarray, gamma: float, capacity: int):
        self.x = x
        self.gamma = gamma
        self.sq = (x * x).sum(axis=1)
        self.capacity = capacity
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d = self.sq[i] + self.sq - 2.0 * (self.x @ self.x[i])
        np.clip(d, 0.0, None, out=d)
        r = np.exp(-self.gamma * d)
        self._rows[i] = r
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return r


def dual_objective(alphas: np.ndarray, y: np.ndarray, gram: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ gram @ ay)


def train_svm(
    x: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    gamma: float = 0.2,
    tol: float = 1e-3,
    max_passes: int = 200,
    class_weight: dict | None = None,
    cache_rows: int = 2048,
    metadata: dict | None = None,
    seed: int = 0,
) -> SvmModel:
    """Train a soft-margin RBF SVM by SMO.

    max_passes caps the number of full examine-all sweeps; exceeding it
    raises ConvergenceError with best-so-far diagnostics.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("x must be (n, d) with matching labels")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")

    std = Standardizer.fit(x)
    xs = std.transform(x)
    n = xs.shape[0]
    if class_weight:
        c_i = np.array([C * class_weight.get(int(lbl), 1.0) for lbl in y])
    else:
        c_i = np.full(n, float(C))

    kernel = _KernelRows(xs, gamma, cache_rows)
    alphas = np.zeros(n)
    b = 0.0
    errors = -y.copy()  # f(x) = 0 initially
    rng = np.random.default_rng(seed)

    def take_step(i1: int, i2: int) -> bool:
        nonlocal b, errors
        if i1 == i2:
            return False
        a1, a2 = alphas[i1], alphas[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = errors[i1], errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - c_i[i1]), min(c_i[i2], a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(c_i[i2], c_i[i1] + a2 - a1)
        if lo >= hi:
            return False
        row1 = kernel.row(i1)
        row2 = kernel.row(i2)
        k11, k22, k12 = row1[i1], row2[i2], row1[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(hi, max(lo, a2_new))
        else:
            # Degenerate curvature: pick the better bound by objective.
            ay = alphas * y
            f1 = y1 * (e1 + b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + b) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12
            obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12
            if obj_lo < obj_hi - 1e-12:
                a2_new = lo
            elif obj_lo > obj_hi + 1e-12:
                a2_new = hi
            else:
                return False
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        d1 = a1_new - a1
        d2 = a2_new - a2

        b1 = b - e1 - y1 * d1 * k11 - y2 * d2 * k12
        b2 = b - e2 - y1 * d1 * k12 - y2 * d2 * k22
        if 0 < a1_new < c_i[i1]:
            b_new = b1
        elif 0 < a2_new < c_i[i2]:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        alphas[i1], alphas[i2] = a1_new, a2_new
        errors += y1 * d1 * row1 + y2 * d2 * row2 + (b_new - b)
        b = b_new
        return True

    def examine(i2: int) -> bool:
        y2, a2, e2 = y[i2], alphas[i2], errors[i2]
        r2 = e2 * y2
        if (r2 < -tol and a2 < c_i[i2]) or (r2 > tol and a2 > 0):
            non_bound = np.flatnonzero((alphas > 0) & (alphas < c_i))
            if len(non_bound) > 1:
                i1 = int(non_bound[np.argmax(np.abs(errors[non_bound] - e2))])
                if take_step(i1, i2):
                    return True
            for i1 in rng.permutation(non_bound):
                if take_step(int(i1), i2):
                    return True
            for i1 in rng.permutation(n):
                if take_step(int(i1), i2):
                    return True
        return False

    examine_all = True
    num_changed = 1
    sweeps = 0
    while num_changed > 0 or examine_all:
        num_changed = 0
        if examine_all:
            sweeps += 1
            if sweeps > max_passes:
                raise ConvergenceError(
                    f"SMO did not converge within {max_passes} sweeps",
                    diagnostics={
                        "sweeps": sweeps,
                        "sum_alpha_y": float(alphas @ y),
                        "n_support": int(np.count_nonzero(alphas > 1e-8)),
                    },
                )
            indices = range(n)
        else:
            indices = np.flatnonzero((alphas > 0) & (alphas < c_i))
        for i in indices:
            if examine(int(i)):
                num_changed += 1
        if examine_all:
            examine_all = False
        elif num_changed == 0:
            examine_all = True

    keep = alphas > 1e-8
    meta = dict(metadata or {})
    meta.setdefault("n_training_examples", n)
    if class_weight:
        meta.setdefault("class_weight", {str(k): v for k, v in class_weight.items()})
    return SvmModel(
        standardizer=std,
        gamma=gamma,
        C=C,
        support_vectors=xs[keep].copy(),
        dual_coef=(alphas * y)[keep].copy(),
        bias=b,
        metadata=meta,
    )


def _f1_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(np.count_nonzero((y_true == SPOOFED) & (y_pred == SPOOFED)))
    fp = int(np.count_nonzero((y_true == NORMAL) & (y_pred == SPOOFED)))
    fn = int(np.count_nonzero((y_true == SPOOFED) & (y_pred == NORMAL)))
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("degenerate validation set: F1 undefined, reporting 0")
        return 0.0
    return 2.0 * tp / denom


@dataclass
class GridCell:
    C: float
    gamma: float
    feature_set: str
    f1: float
    model: SvmModel


def grid_search(
    train,
    validate,
    C_grid=(0.1, 1.0, 10.0),
    gamma_grid=(0.05, 0.2, 1.0),
    feature_sets: dict[str, list[int]] | None = None,
    **train_kwargs,
) -> list[GridCell]:
    """Train one model per (C, gamma, feature subset) and score F1 on the
    validation split. train/validate expose .X, .y and .minute_ids."""
    train_minutes = set(np.unique(train.minute_ids).tolist())
    validate_minutes = set(np.unique(validate.minute_ids).tolist())
    if train_minutes & validate_minutes:
        raise ValueError(f"train/validate minutes overlap: {sorted(train_minutes & validate_minutes)}")
    if feature_sets is None:
        feature_sets = {"all": list(range(train.X.shape[1]))}
    cells = []
    for name, cols in feature_sets.items():
        for c_val in C_grid:
            for g_val in gamma_grid:
                model = train_svm(train.X[:, cols], train.y, C=c_val, gamma=g_val, **train_kwargs)
                preds = np.where(model.margins(validate.X[:, cols]) > 0, SPOOFED, NORMAL)
                cells.append(GridCell(c_val, g_val, name, _f1_from_predictions(validate.y, preds), model))
    return cells


def best_cell(cells: list[GridCell]) -> GridCell:
    return max(cells, key=lambda c: c.f1)
