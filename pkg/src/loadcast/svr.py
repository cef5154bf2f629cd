"""Epsilon-insensitive support vector regression with an RBF kernel.

Training solves the dual

    max  -1/2 beta'K beta - eps * sum|beta| + y'beta
    s.t. sum(beta) = 0,  |beta_i| <= C_i

with SMO (see ``_smo``), then certifies the result with the duality gap
against the primal ``1/2 beta'K beta + sum C_i * max(0, |y_i - f(x_i)| - eps)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import _smo
from .features import FeatureMatrix, Preprocessor, as_matrix

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
DEFAULT_CACHE_MB = 512.0
TOL_FLOOR = 1e-10
_CHUNK = 2048


@dataclass(frozen=True)
class SvrParams:
    c: float
    epsilon: float
    gamma: float
    tol: float = 1e-3
    max_iter: int = 1_000_000
    second_order: bool = True
    cache_mb: float = DEFAULT_CACHE_MB

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"C must be positive, got {self.c}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class TrainingMeta:
    iterations: int
    duality_gap: float
    dual_objective: float
    primal_objective: float
    max_violation: float
    final_tol: float
    n_support: int
    converged: bool


@dataclass(frozen=True, eq=False)
class SvrModel:
    params: SvrParams
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    preprocessing: Preprocessor | None = None
    training_meta: TrainingMeta | None = None
    input_names: tuple[str, ...] | None = None

    @property
    def n_support(self) -> int:
        return int(self.dual_coefs.size)

    def decision_function(self, Z) -> np.ndarray:
        """Evaluate ``sum_i beta_i K(sv_i, z) + b`` on already preprocessed rows."""
        Z = as_matrix(Z)
        out = np.full(Z.shape[0], self.bias, dtype=float)
        if self.n_support == 0:
            return out
        for start in range(0, Z.shape[0], _CHUNK):
            block = rbf_kernel_matrix(Z[start:start + _CHUNK], self.support_vectors, self.params.gamma)
            out[start:start + _CHUNK] += block @ self.dual_coefs
        return out

    def design_matrix(self, X) -> np.ndarray:
        if isinstance(X, FeatureMatrix) and self.input_names is not None:
            if tuple(X.column_names) != self.input_names:
                raise ValueError("feature columns differ from the training layout")
        values = as_matrix(X)
        expected = len(self.input_names) if self.input_names is not None else self.support_vectors.shape[1]
        if values.shape[1] != expected:
            raise ValueError(f"expected {expected} feature columns, got {values.shape[1]}")
        if self.preprocessing is None:
            return values
        if not isinstance(X, FeatureMatrix):
            X = FeatureMatrix(self.preprocessing.input_names, values)
        return self.preprocessing.transform(X).values


def rbf_kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {z.size}")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = x - z
    return math.exp(-gamma * float(d @ d))


def rbf_kernel_matrix(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(as_matrix(A), as_matrix(B), "sqeuclidean"))


def dual_objective(beta, K_beta, y, epsilon: float) -> float:
    return float(-0.5 * beta @ K_beta - epsilon * np.abs(beta).sum() + y @ beta)


def primal_objective(beta, K_beta, y, bias: float, epsilon: float, upper) -> float:
    slack = np.maximum(0.0, np.abs(y - K_beta - bias) - epsilon)
    return float(0.5 * beta @ K_beta + np.sum(upper * slack))


def gap_threshold(dual: float) -> float:
    return max(1e-6, 1e-6 * abs(dual))


def _box(n: int, c: float, sample_weight) -> np.ndarray:
    if sample_weight is None:
        return np.full(n, float(c))
    w = np.asarray(sample_weight, dtype=float)
    if w.shape != (n,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample_weight must be positive, finite and one per sample")
    return c * w


def train_svr(X, y, params: SvrParams, preprocessor: Preprocessor | None = None,
              sample_weight=None) -> SvrModel:
    """Fit an epsilon-SVR.

    ``preprocessor`` (already fitted) is applied to ``X`` before solving and is
    stored in the model so :func:`predict` can take raw features.
    ``sample_weight`` scales the box constraint per sample (``C_i = C * w_i``).

    If the solver stops on ``max_iter`` or cannot push the duality gap under
    ``max(1e-6, 1e-6 * |dual|)`` the model is still returned, with
    ``training_meta.converged`` set to False.
    """
    input_names = tuple(X.column_names) if isinstance(X, FeatureMatrix) else None
    Z = preprocessor.transform(X).values if preprocessor is not None else as_matrix(X)
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64).ravel())
    n = Z.shape[0]
    if n < 2:
        raise ValueError("need at least two training samples")
    if y.shape != (n,):
        raise ValueError(f"{n} rows but {y.size} targets")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    if input_names is None:
        input_names = (preprocessor.input_names if preprocessor is not None
                       else tuple(f"x{j}" for j in range(Z.shape[1])))

    box = _box(n, params.c, sample_weight)
    upper = np.concatenate([box, box])
    a = np.zeros(2 * n)
    G = np.concatenate([params.epsilon - y, params.epsilon + y])
    sqnorm = np.einsum("ij,ij->i", Z, Z)

    n_slots = int(params.cache_mb * 1024 * 1024 // (8 * n))
    n_slots = max(2, min(n, n_slots))
    rows = np.empty((n_slots, n))
    slot_of = np.full(n, -1, dtype=np.int64)
    owner = np.full(n_slots, -1, dtype=np.int64)
    stamp = np.zeros(n_slots, dtype=np.int64)

    clock = 0
    iterations = 0
    tol = params.tol
    while True:
        it, violation, clock = _smo.smo_solve(
            Z, sqnorm, params.gamma, a, G, upper, tol, params.max_iter - iterations,
            params.second_order, rows, slot_of, owner, stamp, clock)
        iterations += it
        beta = a[:n] - a[n:]
        K_beta = G[:n] - params.epsilon + y
        bias = float(_smo.bias_from_gradient(a, G, upper))
        dual = dual_objective(beta, K_beta, y, params.epsilon)
        primal = primal_objective(beta, K_beta, y, bias, params.epsilon, box)
        gap = primal - dual
        hit_cap = iterations >= params.max_iter
        if gap <= gap_threshold(dual) or hit_cap or tol <= TOL_FLOOR:
            break
        tol = max(tol * 0.1, TOL_FLOOR)

    converged = violation <= tol and gap <= gap_threshold(dual)
    if not converged:
        logger.warning("SVR solver did not converge (C=%g, eps=%g, gamma=%g): violation %.3g, gap %.3g",
                       params.c, params.epsilon, params.gamma, violation, gap)

    support = np.flatnonzero(beta != 0.0)
    meta = TrainingMeta(
        iterations=int(iterations), duality_gap=float(gap), dual_objective=dual,
        primal_objective=primal, max_violation=float(violation), final_tol=float(tol),
        n_support=int(support.size), converged=bool(converged))
    return SvrModel(params=params, support_vectors=Z[support].copy(), dual_coefs=beta[support].copy(),
                    bias=bias, preprocessing=preprocessor, training_meta=meta, input_names=input_names)


def predict(model: SvrModel, X_raw) -> np.ndarray:
    """Apply the stored preprocessing, then the kernel expansion."""
    return model.decision_function(model.design_matrix(X_raw))


def duality_gap(model: SvrModel, X, y, sample_weight=None) -> float:
    """Primal minus dual objective for ``model`` on its training data ``(X, y)``.

    Both objectives are recomputed from the stored coefficients and bias;
    training points that are not support vectors carry a zero coefficient.
    """
    Z = model.design_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    K_beta = model.decision_function(Z) - model.bias
    beta = _expand_coefs(model, Z)
    box = _box(Z.shape[0], model.params.c, sample_weight)
    dual = dual_objective(beta, K_beta, y, model.params.epsilon)
    primal = primal_objective(beta, K_beta, y, model.bias, model.params.epsilon, box)
    return primal - dual


def _expand_coefs(model: SvrModel, Z: np.ndarray) -> np.ndarray:
    """Scatter the support-vector coefficients back onto the training rows."""
    beta = np.zeros(Z.shape[0])
    if model.n_support == 0:
        return beta
    remaining = {}
    for k, sv in enumerate(model.support_vectors):
        remaining.setdefault(sv.tobytes(), []).append(k)
    for i, row in enumerate(Z):
        ks = remaining.get(row.tobytes())
        if ks:
            beta[i] = model.dual_coefs[ks.pop(0)]
    if any(remaining.values()):
        raise ValueError("support vectors are not rows of the given training matrix")
    return beta


def model_to_dict(model: SvrModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "params": asdict(model.params),
        "input_names": list(model.input_names) if model.input_names is not None else None,
        "preprocessing": model.preprocessing.to_dict() if model.preprocessing is not None else None,
        "design_width": int(model.support_vectors.shape[1]),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "bias": model.bias,
        "training_meta": asdict(model.training_meta) if model.training_meta is not None else None,
    }


def model_from_dict(d: dict) -> SvrModel:
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    coefs = np.asarray(d["dual_coefs"], dtype=float)
    svs = np.asarray(d["support_vectors"], dtype=float).reshape(coefs.size, int(d["design_width"]))
    return SvrModel(
        params=SvrParams(**d["params"]),
        support_vectors=svs,
        dual_coefs=coefs,
        bias=float(d["bias"]),
        preprocessing=Preprocessor.from_dict(d["preprocessing"]) if d["preprocessing"] else None,
        training_meta=TrainingMeta(**d["training_meta"]) if d["training_meta"] else None,
        input_names=tuple(d["input_names"]) if d["input_names"] is not None else None,
    )


def save_model(model: SvrModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1) + "\n")
    return path


def load_model(path) -> SvrModel:
    return model_from_dict(json.loads(Path(path).read_text()))
