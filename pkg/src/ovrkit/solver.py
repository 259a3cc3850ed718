"""Cost-weighted L2-regularized logistic regression for one binary problem.

The objective over label-sign pairs ``(y_i, x_i)`` with per-class loss
weights ``c_pos``/``c_neg`` is

    0.5 * u.u  +  sum_i cost_i * log(1 + exp(-y_i * u.x_i))

where ``u`` is the weight vector, optionally augmented with a constant-1
coordinate acting as a (regularized) bias.  Class weights come from the
``(C, t)`` parametrization ``c_pos = C * (2 - t)``, ``c_neg = C * t``;
``t = 1`` recovers the plain ``C``-weighted problem.

The minimizer is scipy's trust-region Newton-CG with the analytic gradient
and Hessian-vector products below.  Every returned model certifies the
relative-gradient stopping rule

    ||grad(u*)|| <= tolerance * max(1, ||grad(0)||)

and training fails hard if the rule cannot be met within ``max_iter``
iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse import linalg as splinalg
from scipy.special import expit

DEFAULT_TOLERANCE = 1e-4
DEFAULT_MAX_ITER = 1000


class ConvergenceError(RuntimeError):
    """Solver could not certify the gradient stopping rule."""


@dataclass
class BinaryProblem:
    """One label's binary view of a dataset.

    ``features`` is shared read-only across problems; ``y`` holds per-instance
    signs in {+1, -1}.
    """

    features: sparse.csr_matrix
    y: np.ndarray
    label_index: int | None = None
    c_pos: float = 1.0
    c_neg: float = 1.0

    @classmethod
    def for_label(cls, dataset, label_index: int) -> "BinaryProblem":
        return cls(dataset.feature_matrix(), dataset.y_for_label(label_index),
                   label_index=label_index)

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.y > 0))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.y < 0))


@dataclass
class BinaryModel:
    """Trained weights for one label, plus the decision-shift and hyperparameters.

    ``delta`` is an additive shift applied to decision values at prediction
    time (0 except for threshold-calibrated models).  ``always_negative``
    marks the degenerate constant-negative model used when a label has no
    positive training instances.
    """

    w: np.ndarray
    bias: float = 0.0
    delta: float = 0.0
    C: float = 1.0
    t: float = 1.0
    always_negative: bool = False
    n_iter: int = 0
    grad_norm: float = 0.0

    def decision_values(self, X: sparse.csr_matrix) -> np.ndarray:
        if self.always_negative:
            return np.full(X.shape[0], -np.inf)
        return np.asarray(X @ self.w).ravel() + self.bias + self.delta

    def with_delta(self, delta: float) -> "BinaryModel":
        return BinaryModel(self.w, self.bias, delta, self.C, self.t,
                           self.always_negative, self.n_iter, self.grad_norm)


def decision_value(model: BinaryModel, x: list[tuple[int, float]] | np.ndarray) -> float:
    """w.x + bias + delta for one sparse row (list of (index, value) pairs)."""
    if model.always_negative:
        return -np.inf
    if isinstance(x, np.ndarray):
        if x.shape[0] != model.w.shape[0]:
            raise ValueError("feature dimension mismatch")
        return float(model.w @ x) + model.bias + model.delta
    acc = 0.0
    for idx, val in x:
        if idx >= model.w.shape[0]:
            raise ValueError(f"feature index {idx} out of range")
        acc += model.w[idx] * val
    return acc + model.bias + model.delta


class _WeightedLogistic:
    """Objective/gradient/Hessian-vector oracle over u = [w] or [w; bias].

    The bias acts as an implicit constant-1 feature column (its coefficient
    is regularized like any weight) so the feature matrix is never copied.
    Margins are cached per iterate.
    """

    def __init__(self, X, y, costs, fit_bias: bool):
        self.X = X
        self.y = y
        self.costs = costs
        self.fit_bias = fit_bias
        self.dim = X.shape[1] + (1 if fit_bias else 0)
        self._cached_u = None
        self._cached_z = None

    def _split(self, u):
        if self.fit_bias:
            return u[:-1], u[-1]
        return u, 0.0

    def _margins(self, u):
        if self._cached_u is None or not np.array_equal(u, self._cached_u):
            w, b = self._split(u)
            self._cached_u = u.copy()
            self._cached_z = self.y * (np.asarray(self.X @ w).ravel() + b)
        return self._cached_z

    def value_and_grad(self, u):
        u = np.asarray(u, dtype=np.float64)
        z = self._margins(u)
        value = 0.5 * float(u @ u) + float(np.sum(self.costs * np.logaddexp(0.0, -z)))
        coef = -self.costs * self.y * expit(-z)
        grad = u.copy()
        grad[: self.X.shape[1]] += self.X.T @ coef
        if self.fit_bias:
            grad[-1] += float(np.sum(coef))
        return value, grad

    def hessp(self, u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = self._margins(u)
        s = expit(z)
        d = self.costs * s * (1.0 - s)
        vw, vb = self._split(v)
        span = np.asarray(self.X @ vw).ravel() + vb
        out = v.copy()
        out[: self.X.shape[1]] += self.X.T @ (d * span)
        if self.fit_bias:
            out[-1] += float(np.sum(d * span))
        return out


def _costs(y: np.ndarray, c_pos: float, c_neg: float) -> np.ndarray:
    return np.where(y > 0, c_pos, c_neg)


def objective_and_gradient(problem: BinaryProblem, w: np.ndarray, bias: float,
                           C: float, t: float) -> tuple[float, np.ndarray, float]:
    """Objective value and its exact gradient (weight part, bias part).

    The bias is treated as a regularized augmented coordinate, so it
    contributes ``bias**2 / 2`` to the regularization term.
    """
    c_pos, c_neg = C * (2.0 - t), C * t
    u = np.concatenate([np.asarray(w, dtype=np.float64), [bias]])
    oracle = _WeightedLogistic(problem.features, problem.y,
                               _costs(problem.y, c_pos, c_neg), fit_bias=True)
    value, grad = oracle.value_and_grad(u)
    return value, grad[:-1], float(grad[-1])


def train_binary(problem: BinaryProblem, C: float = 1.0, t: float = 1.0,
                 tolerance: float = DEFAULT_TOLERANCE,
                 warm_start: BinaryModel | None = None,
                 fit_bias: bool = True,
                 max_iter: int = DEFAULT_MAX_ITER) -> BinaryModel:
    """Train one binary model to the certified gradient tolerance.

    A label with zero positive instances short-circuits to the constant
    always-negative model; an empty problem is an error.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    if not 0.0 < t <= 1.0:
        raise ValueError("t must be in (0, 1]")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if problem.y.shape[0] == 0:
        raise ValueError("binary problem has no instances")
    if not np.all(np.isfinite(problem.features.data)):
        raise ValueError("non-finite feature values")

    n_features = problem.features.shape[1]
    if problem.n_positive == 0:
        return BinaryModel(np.zeros(n_features), C=C, t=t, always_negative=True)

    c_pos, c_neg = C * (2.0 - t), C * t
    oracle = _WeightedLogistic(problem.features, problem.y,
                               _costs(problem.y, c_pos, c_neg), fit_bias)

    dim = oracle.dim
    if warm_start is not None and not warm_start.always_negative:
        u0 = np.concatenate([warm_start.w, [warm_start.bias]]) if fit_bias else warm_start.w.copy()
    else:
        u0 = np.zeros(dim)

    _, g0 = oracle.value_and_grad(np.zeros(dim))
    target = tolerance * max(1.0, float(np.linalg.norm(g0)))

    result = minimize(oracle.value_and_grad, u0, jac=True, hessp=oracle.hessp,
                      method="trust-ncg", options={"gtol": target, "maxiter": max_iter})
    u, n_iter = result.x, int(result.nit)
    u, n_iter, grad_norm = _newton_polish(oracle, u, target, n_iter, max_iter)
    if grad_norm > target:
        raise ConvergenceError(
            f"gradient norm {grad_norm:.3e} above target {target:.3e} "
            f"after {n_iter} iterations (label {problem.label_index})")
    if fit_bias:
        w, bias = u[:-1], float(u[-1])
    else:
        w, bias = u, 0.0
    return BinaryModel(w, bias, 0.0, C, t, False, n_iter, grad_norm)


def _newton_polish(oracle: _WeightedLogistic, u: np.ndarray, target: float,
                   n_iter: int, max_iter: int) -> tuple[np.ndarray, int, float]:
    """Damped Newton-CG steps until the gradient certificate holds.

    The trust-region solver can stall just above a tight target when its
    radius collapses near the optimum; plain Newton steps converge
    quadratically there.  Stops early if the gradient norm no longer drops
    (float noise floor).
    """
    value, grad = oracle.value_and_grad(u)
    grad_norm = float(np.linalg.norm(grad))
    while grad_norm > target and n_iter < max_iter:
        op = splinalg.LinearOperator((u.shape[0], u.shape[0]),
                                     matvec=lambda v: oracle.hessp(u, v))
        step, _ = splinalg.cg(op, -grad, maxiter=200)
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        while scale > 1e-12:
            new_value, new_grad = oracle.value_and_grad(u + scale * step)
            if new_value <= value:
                break
            scale *= 0.5
        else:
            break
        new_norm = float(np.linalg.norm(new_grad))
        n_iter += 1
        if new_norm >= grad_norm:
            break
        u = u + scale * step
        value, grad, grad_norm = new_value, new_grad, new_norm
    return u, n_iter, grad_norm
