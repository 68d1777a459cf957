"""Soft-margin binary SVM trained in the dual by SMO, with Platt calibration.

The solver works on a precomputed Gram matrix and always updates the
maximal violating pair (first-order working-set selection).  Decision values
are mapped to probabilities by a sigmoid fit on the training decisions; the
sigmoid slope is kept negative so probabilities rank like decision values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from miml.errors import ConfigError, ConvergenceError, DataError

KERNELS = ("polynomial", "gaussian")
PROBA_CLIP = (0.01, 0.99)
TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """``polynomial``: ``(gamma * u.v + coef0) ** degree``;
    ``gaussian``: ``exp(-gamma * |u - v|^2)``.

    ``gamma`` defaults to 1, which gives the plain ``(u.v + c)^d`` polynomial.
    ``gamma="scale"`` is resolved at training time to
    ``1 / (n_features * X.var())`` of the training matrix.
    """

    kind: str = "polynomial"
    degree: int = 3
    coef0: float = 0.0
    gamma: float | str = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kind!r}")
        if self.kind == "polynomial" and int(self.degree) < 1:
            raise ConfigError("polynomial degree must be >= 1")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ConfigError(f"kernel gamma must be a positive number or 'scale', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise ConfigError("kernel gamma must be > 0")

    def resolved(self, X: np.ndarray) -> KernelSpec:
        """Copy with a numeric ``gamma`` (``"scale"`` evaluated on ``X``)."""
        if not isinstance(self.gamma, str):
            return self
        var = float(np.asarray(X, dtype=np.float64).var())
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return replace(self, gamma=gamma)

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise DataError(f"kernel inputs have widths {a.shape[1]} and {b.shape[1]}")
        if isinstance(self.gamma, str):
            raise ConfigError("kernel gamma 'scale' must be resolved before evaluation")
        if self.kind == "polynomial":
            return (self.gamma * (a @ b.T) + self.coef0) ** int(self.degree)
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def to_dict(self) -> dict:
        gamma = self.gamma if isinstance(self.gamma, str) else float(self.gamma)
        return {"kind": self.kind, "degree": int(self.degree), "coef0": float(self.coef0),
                "gamma": gamma}


def kernel_eval(spec: KernelSpec, u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DataError(f"kernel inputs have lengths {u.size} and {v.size}")
    return float(spec.gram(u[None, :], v[None, :])[0, 0])


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    rho: float
    objective: float
    gradient: np.ndarray
    n_iter: int
    converged: bool


@numba.njit(cache=True)
def _smo_loop(K, y, C, tol, max_iter):  # pragma: no cover - compiled
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.empty(n)
    for t in range(n):
        diag[t] = K[t, t]
    it = 0
    converged = False
    while it < max_iter:
        # i: maximal violator among the "up" set; g_min over the "low" set
        i = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            s = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if s > g_max:
                    g_max = s
                    i = t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                if s < g_min:
                    g_min = s
        if i < 0 or g_min == np.inf or g_max - g_min < tol:
            converged = True
            break
        # j: the violating partner with the largest guaranteed decrease
        j = -1
        best = -np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                b = g_max + y[t] * grad[t]
                if b > 0:
                    a = diag[i] + diag[t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = TAU
                    gain = b * b / a
                    if gain > best:
                        best = gain
                        j = t
        if j < 0:
            converged = True
            break
        it += 1
        old_i = alpha[i]
        old_j = alpha[j]
        qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(n):
            grad[t] += y[t] * (y[i] * K[t, i] * di + y[j] * K[t, j] * dj)
    return alpha, grad, it, converged


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int = 100_000) -> DualSolution:
    """Minimize ``0.5 a'Qa - sum(a)`` with ``Q = yy' * K``, ``0 <= a <= C``, ``y'a = 0``.

    Each step takes the maximal violating index ``i`` and pairs it with the
    violating ``j`` of largest second-order gain.  Stops when the maximal
    KKT violation drops below ``tol`` or after ``max_iter`` pair updates.
    ``objective`` is reported in the maximization convention
    ``sum(a) - 0.5 a'Qa``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    alpha, grad, it, converged = _smo_loop(K, y, float(C), float(tol), int(max_iter))
    rho = _rho(alpha, grad, y, C)
    objective = float(alpha.sum() - 0.5 * alpha @ (grad + 1.0))
    return DualSolution(alpha, rho, objective, grad, int(it), bool(converged))


def _rho(alpha, grad, y, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    upper = alpha >= C
    # bound constraints on rho coming from alphas stuck at 0 or C
    ub_mask = (upper & (y < 0)) | (~upper & (y > 0))
    lb_mask = (upper & (y > 0)) | (~upper & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float(0.5 * (ub + lb))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    calibration: tuple | None = None
    constant_proba: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "n_features": self.n_features,
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "calibration": list(self.calibration) if self.calibration is not None else None,
            "constant_proba": self.constant_proba,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvmModel:
        sv = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, d["n_features"])
        cal = d["calibration"]
        return cls(sv, np.array(d["dual_coefs"], dtype=np.float64), float(d["bias"]),
                   KernelSpec(**d["kernel"]), float(d["C"]),
                   tuple(float(v) for v in cal) if cal is not None else None,
                   d["constant_proba"], dict(d.get("meta", {})))


def svm_train(X, y, C: float = 1.0, kernel: KernelSpec | None = None, tol: float = 1e-3,
              max_iter: int = 100_000) -> SvmModel:
    """Train on rows ``X`` with labels in {-1, +1} (0 is read as -1).

    A single-class problem yields a constant model (no support vectors) whose
    probability is the clipped prior 0.99 or 0.01.
    """
    kernel = kernel or KernelSpec()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.where(np.asarray(y).ravel() > 0, 1.0, -1.0)
    if X.shape[0] == 0:
        raise DataError("cannot train an SVM on zero rows")
    if X.shape[0] != y.size:
        raise DataError(f"{X.shape[0]} rows but {y.size} labels")
    if not C > 0:
        raise ConfigError(f"C must be > 0, got {C}")
    kernel = kernel.resolved(X)
    if np.all(y == y[0]):
        p = PROBA_CLIP[1] if y[0] > 0 else PROBA_CLIP[0]
        return SvmModel(np.zeros((0, X.shape[1])), np.zeros(0), float(y[0]), kernel, float(C),
                        constant_proba=p, meta={"degenerate": True})
    K = kernel.gram(X, X)
    if not np.all(np.isfinite(K)):
        raise ConvergenceError("kernel matrix has non-finite entries")
    sol = smo_solve(K, y, C, tol, max_iter)
    sv = sol.alpha > 0
    return SvmModel(X[sv].copy(), (sol.alpha * y)[sv], -sol.rho, kernel, float(C),
                    meta={"n_iter": sol.n_iter, "converged": sol.converged,
                          "objective": sol.objective})


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {X.shape[1]}")
    if model.dual_coefs.size == 0:
        return np.full(X.shape[0], model.bias)
    return model.kernel.gram(X, model.support_vectors) @ model.dual_coefs + model.bias


def svm_decision(model: SvmModel, x) -> float:
    return float(decision_function(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def fit_sigmoid(f: np.ndarray, y: np.ndarray, max_iter: int = 100,
                min_step: float = 1e-10, sigma: float = 1e-12,
                eps: float = 1e-5) -> tuple[float, float]:
    """Platt's sigmoid ``1 / (1 + exp(A f + B))`` by Newton's method with backtracking.

    Uses regularized targets ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``.  Raises
    :class:`ConvergenceError` when the line search stalls or the iteration
    budget runs out.
    """
    f = np.asarray(f, dtype=np.float64)
    pos = np.asarray(y).ravel() > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))

    def loss(a, b):
        fab = f * a + b
        return float(np.sum(np.where(fab >= 0, t * fab + np.log1p(np.exp(-fab)),
                                     (t - 1.0) * fab + np.log1p(np.exp(fab)))))

    fval = loss(A, B)
    for _ in range(max_iter):
        fab = f * A + B
        e = np.exp(-np.abs(fab))
        p = np.where(fab >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            return A, B
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = loss(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            raise ConvergenceError("sigmoid fit: line search failed")
    raise ConvergenceError("sigmoid fit: iteration budget exhausted")


def calibrate(model: SvmModel, X, y) -> SvmModel:
    """Attach sigmoid parameters fit on ``model``'s decisions over ``(X, y)``.

    Falls back to ``A=-1, B=0`` when the fit fails or yields a non-negative
    slope; the outcome is recorded in ``meta["calibration"]``.
    """
    if model.constant_proba is not None:
        return model
    f = decision_function(model, X)
    y = np.asarray(y).ravel() > 0
    status = "platt"
    try:
        A, B = fit_sigmoid(f, y)
        if not A < 0:
            A, B, status = -1.0, 0.0, "fallback:non-negative-slope"
    except (ConvergenceError, FloatingPointError, ZeroDivisionError):
        A, B, status = -1.0, 0.0, "fallback:no-convergence"
    return replace(model, calibration=(float(A), float(B)),
                   meta={**model.meta, "calibration": status})


def proba(model: SvmModel, X) -> np.ndarray:
    """Vectorized :func:`predict_proba` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.constant_proba is not None:
        if X.shape[1] != model.n_features:
            raise DataError(f"expected {model.n_features} features, got {X.shape[1]}")
        return np.full(X.shape[0], model.constant_proba)
    if model.calibration is None:
        raise ConfigError("model is not calibrated")
    A, B = model.calibration
    fab = A * decision_function(model, X) + B
    e = np.exp(-np.abs(fab))
    p = np.where(fab >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return np.clip(p, *PROBA_CLIP)


def predict_proba(model: SvmModel, x) -> float:
    return float(proba(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def train_calibrated(X, y, C: float = 1.0, kernel: KernelSpec | None = None,
                     tol: float = 1e-3) -> SvmModel:
    """``svm_train`` followed by ``calibrate`` on the same rows."""
    return calibrate(svm_train(X, y, C, kernel, tol), X, y)
