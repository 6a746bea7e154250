"""Multinomial logistic regression by full-batch gradient descent.

Minimises the mean negative log-likelihood of a softmax model plus an
L2 penalty on the slopes (intercepts unpenalised), taking plain
gradient steps with Armijo backtracking so the recorded loss history is
non-increasing across accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import MissingClass, ShapeMismatch
from .base import Standardizer, validate_features


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class LogisticFit:
    intercept: np.ndarray
    coef: np.ndarray
    l2: float
    n_iter: int
    converged: bool
    loss_history: np.ndarray
    std: Standardizer

    @property
    def n_classes(self) -> int:
        return self.intercept.size

    def predict_proba(self, X) -> np.ndarray:
        X = validate_features(X, p=self.coef.shape[1])
        return softmax(self.std.transform(X) @ self.coef.T + self.intercept)


def _validate_labels(d: np.ndarray, n_classes: int | None) -> int:
    if d.ndim != 1:
        raise ShapeMismatch("labels must be 1-d")
    if not np.all(np.isfinite(d)) or np.any(d != d.astype(int)):
        raise ValueError("labels must be integers")
    labels = d.astype(int)
    if labels.min() < 0:
        raise ValueError("labels must be >= 0")
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    present = np.bincount(labels, minlength=k) > 0
    if labels.max() >= k or not present.all():
        missing = [i for i in range(k) if i >= present.size or not present[i]]
        raise MissingClass(f"classes absent from the training labels: {missing}")
    return k


def fit_logistic(
    X,
    d,
    n_classes: int | None = None,
    l2: float = 1e-4,
    max_iter: int = 2000,
    tol: float = 1e-6,
) -> LogisticFit:
    """Fit the softmax model; stops when the gradient max-norm falls below tol."""
    X = validate_features(X)
    d = np.asarray(d)
    if d.shape != (X.shape[0],):
        raise ShapeMismatch("labels must match X rows")
    k = _validate_labels(d, n_classes)
    labels = d.astype(int)
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    n, p = X.shape
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0

    W = np.zeros((k, p))
    b = np.zeros(k)

    def loss_and_grad(W, b):
        P = softmax(Xs @ W.T + b)
        # Clip only inside the log; P itself feeds the exact gradient.
        nll = -np.mean(np.log(np.clip(P[np.arange(n), labels], 1e-300, None)))
        nll += 0.5 * l2 * float((W * W).sum())
        R = P - onehot
        gW = R.T @ Xs / n + l2 * W
        gb = R.mean(axis=0)
        return nll, gW, gb

    loss, gW, gb = loss_and_grad(W, b)
    history = [loss]
    eta = 1.0
    converged = False
    n_iter = 0
    armijo = 1e-4
    for n_iter in range(1, max_iter + 1):
        gnorm2 = float((gW * gW).sum() + (gb * gb).sum())
        if np.sqrt(gnorm2) < tol or max(np.abs(gW).max(), np.abs(gb).max()) < tol:
            converged = True
            break
        eta = min(eta * 2.0, 1e4)
        while True:
            W_new = W - eta * gW
            b_new = b - eta * gb
            loss_new, gW_new, gb_new = loss_and_grad(W_new, b_new)
            if loss_new <= loss - armijo * eta * gnorm2:
                break
            eta *= 0.5
            if eta < 1e-14:
                break
        if eta < 1e-14:
            break
        W, b, loss, gW, gb = W_new, b_new, loss_new, gW_new, gb_new
        history.append(loss)
    return LogisticFit(
        intercept=b,
        coef=W,
        l2=l2,
        n_iter=n_iter,
        converged=converged,
        loss_history=np.asarray(history),
        std=std,
    )
