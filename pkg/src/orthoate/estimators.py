"""Average-potential-outcome estimators over a single sample split.

Three estimators share one protocol: nuisances are fit on the training
fold only, all sums below run over the estimation fold only.

* direct regression (DR): the fold mean of the outcome predictions;
* first-order debiased (DML): DR plus inverse-propensity-weighted
  factual residuals;
* higher-order (r, k): DR plus the correction-factor-weighted factual
  residual term plus a resampled counterfactual residual term, averaged
  over R independent resampling repetitions.

The resampling draws, for every estimation-fold unit outside a
treatment arm, one factual residual of that arm uniformly with
replacement; the stream for repetition u of treatment i derives from
the master seed as SeedSequence(seed, spawn_key=(i, u)), so results are
reproducible and independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    EmptyFold,
    EmptyResidualSet,
    NonFinite,
    ShapeMismatch,
    ZeroDenominator,
)
from .score import Moments, compute_coefficients, correction_values


@dataclass(frozen=True)
class Dataset:
    """Observed sample: outcomes y, integer treatments d, covariates Z.

    ``truth`` optionally carries the true per-treatment outcome means
    (one column per arm) for benchmark data where they are known.
    """

    y: np.ndarray
    d: np.ndarray
    Z: np.ndarray
    truth: np.ndarray | None = None
    n_treatments: int | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        d_raw = np.asarray(self.d)
        if y.ndim != 1 or Z.ndim != 2 or y.size != Z.shape[0] or d_raw.shape != y.shape:
            raise ShapeMismatch("y, d must be 1-d of equal length and Z 2-d with matching rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(Z))):
            raise NonFinite("y and Z must be finite")
        d = d_raw.astype(int)
        if np.any(d != d_raw) or d.size and d.min() < 0:
            raise ValueError("treatments must be non-negative integers")
        n_treat = self.n_treatments if self.n_treatments is not None else int(d.max()) + 1
        if d.size and d.max() >= n_treat:
            raise ValueError(f"treatment label {d.max()} outside 0..{n_treat - 1}")
        truth = self.truth
        if truth is not None:
            truth = np.asarray(truth, dtype=float)
            if truth.shape != (y.size, n_treat):
                raise ShapeMismatch("truth must be (n, n_treatments)")
            if not np.all(np.isfinite(truth)):
                raise NonFinite("truth must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "n_treatments", n_treat)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class SplitPlan:
    """Index sets of the estimation fold and its complement."""

    estimation_idx: np.ndarray
    training_idx: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        est = np.asarray(self.estimation_idx, dtype=np.int64)
        tr = np.asarray(self.training_idx, dtype=np.int64)
        if est.size == 0 or tr.size == 0:
            raise EmptyFold("both folds must be non-empty")
        if np.intersect1d(est, tr).size:
            raise ValueError("folds must be disjoint")
        object.__setattr__(self, "estimation_idx", est)
        object.__setattr__(self, "training_idx", tr)


def make_split(n: int, ratios=(0.56, 0.14, 0.30), seed: int = 0) -> SplitPlan:
    """Random train/validation/test split; the test fold is the estimation fold.

    Fold sizes are round(n * test) and round(n * train), the validation
    fold takes the remainder; train and validation together form the
    training fold handed to the learners.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_test = int(round(n * ratios[2]))
    n_train = int(round(n * ratios[0]))
    n_valid = n - n_train - n_test
    if min(n_train, n_valid, n_test) <= 0:
        raise EmptyFold(f"n={n} with ratios {ratios} leaves an empty fold")
    perm = np.random.default_rng(np.random.SeedSequence(seed)).permutation(n)
    return SplitPlan(
        estimation_idx=np.sort(perm[n_train + n_valid:]),
        training_idx=np.sort(perm[: n_train + n_valid]),
        seed=seed,
    )


def estimate_moments(d, pi_hat, treatment: int, max_order: int) -> Moments:
    """Empirical residual moments m_q = mean((1{d=i} - pi_hat)**q), q = 1..max_order."""
    d = np.asarray(d)
    pi_hat = np.asarray(pi_hat, dtype=float)
    if d.shape != pi_hat.shape or d.ndim != 1 or d.size == 0:
        raise ShapeMismatch("d and pi_hat must be matching non-empty 1-d arrays")
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    resid = (d == treatment).astype(float) - pi_hat
    vals = [float(np.mean(resid**q)) for q in range(1, max_order + 1)]
    return Moments(np.asarray(vals))


@dataclass(frozen=True)
class Diagnostics:
    n_floored: int = 0
    infinite: bool = False
    nan: bool = False


@dataclass(frozen=True)
class EstimateReport:
    """One estimator's per-treatment estimates on one dataset."""

    estimator: str
    theta: np.ndarray
    ate_pairwise: np.ndarray
    diagnostics: Diagnostics
    moments_used: tuple | None = None
    r_reps: int = 0


def _finish_report(estimator, theta, n_floored, moments_used=None, r_reps=0) -> EstimateReport:
    theta = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        pairwise = theta[:, None] - theta[None, :]
    return EstimateReport(
        estimator=estimator,
        theta=theta,
        ate_pairwise=pairwise,
        diagnostics=Diagnostics(
            n_floored=n_floored,
            infinite=bool(np.isinf(theta).any()),
            nan=bool(np.isnan(theta).any()),
        ),
        moments_used=moments_used,
        r_reps=r_reps,
    )


def estimate_dr(ds: Dataset, split: SplitPlan, fits) -> EstimateReport:
    """Direct regression: fold means of the outcome predictions."""
    idx = split.estimation_idx
    G = fits.outcome_matrix(ds.Z[idx])
    return _finish_report("dr", G.mean(axis=0), 0)


def estimate_dml(ds: Dataset, split: SplitPlan, fits) -> EstimateReport:
    """First-order debiased estimator.

    theta_i = mean(g_i) + (1/N) sum over factual units of
    (y - g_i) / pi_i.  A zero estimated propensity on a factual unit
    produces an infinite estimate; it is recorded in the diagnostics,
    never masked here.
    """
    idx = split.estimation_idx
    N = idx.size
    y = ds.y[idx]
    d = ds.d[idx]
    G = fits.outcome_matrix(ds.Z[idx])
    P, n_floored = fits.propensity_matrix(ds.Z[idx])
    theta = np.zeros(ds.n_treatments)
    for i in range(ds.n_treatments):
        mask = d == i
        resid = y[mask] - G[mask, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = resid / P[mask, i]
        theta[i] = G[:, i].mean() + contrib.sum() / N
    return _finish_report("dml", theta, n_floored)


def single_resample_pass(pool: np.ndarray, corrections: np.ndarray, n_fold: int, rng) -> float:
    """One resampling repetition of the counterfactual term.

    Draws len(corrections) values from ``pool`` uniformly with
    replacement, weights them by the corrections and divides by the
    fold size.
    """
    draws = pool[rng.integers(0, pool.size, size=corrections.size)]
    return float((draws * corrections).sum() / n_fold)


def estimate_higher_order(
    ds: Dataset,
    split: SplitPlan,
    fits,
    r: int,
    k: int,
    R: int = 100,
    seed: int = 0,
    moments=None,
    moments_from: str = "estimation",
    resampler=None,
) -> EstimateReport:
    """Debiased estimator built on the order-(r, k) orthogonal score.

    Per treatment i, with N the estimation-fold size:

    * factual term: mean of g_i plus (1/N) sum over units with d = i of
      (y - g_i) * A;
    * counterfactual term: for units with d != i, residuals resampled
      from the factual residual pool, weighted by their A values,
      averaged over R repetitions.

    ``moments`` overrides the residual-moment estimation (one Moments
    per treatment), e.g. with exact model moments.  ``moments_from``
    selects the fold the moments are estimated on.  ``resampler`` is a
    test hook replacing the uniform draws; it receives
    (rng, pool, target_rows, treatment) and must return one residual
    per target row.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if moments_from not in ("estimation", "training"):
        raise ValueError("moments_from must be 'estimation' or 'training'")
    idx = split.estimation_idx
    N = idx.size
    y = ds.y[idx]
    d = ds.d[idx]
    G = fits.outcome_matrix(ds.Z[idx])
    P, n_floored = fits.propensity_matrix(ds.Z[idx])
    if moments is None and moments_from == "training":
        d_mom = ds.d[split.training_idx]
        P_mom, _ = fits.propensity_matrix(ds.Z[split.training_idx])
    else:
        d_mom, P_mom = d, P

    theta = np.zeros(ds.n_treatments)
    moments_used = []
    for i in range(ds.n_treatments):
        mom = moments[i] if moments is not None else estimate_moments(d_mom, P_mom[:, i], i, r)
        moments_used.append(mom)
        coeffs = compute_coefficients(r, k, mom)
        t_ind = (d == i).astype(float)
        A = correction_values(t_ind, P[:, i], coeffs, mom)
        factual = d == i
        if not factual.any():
            raise EmptyResidualSet(f"no factual units for treatment {i} on the estimation fold")
        pool = y[factual] - G[factual, i]
        term_a = float(G[:, i].mean())
        term_b = float((pool * A[factual]).sum() / N)
        counter = ~factual
        if counter.any():
            A_c = A[counter]
            rows_c = idx[counter]
            acc = 0.0
            for u in range(R):
                rng_u = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, u)))
                if resampler is None:
                    acc += single_resample_pass(pool, A_c, N, rng_u)
                else:
                    draws = np.asarray(resampler(rng_u, pool, rows_c, i), dtype=float)
                    acc += float((draws * A_c).sum() / N)
            term_c = acc / R
        else:
            term_c = 0.0
        theta[i] = term_a + term_b + term_c
    return _finish_report(
        f"ho({r},{k})", theta, n_floored, moments_used=tuple(moments_used), r_reps=R
    )


def pairwise_from_theta(theta) -> np.ndarray:
    """Antisymmetric matrix of pairwise effects theta_i - theta_k."""
    theta = np.asarray(theta, dtype=float)
    return theta[:, None] - theta[None, :]


def relative_ate_error(ate_hat: np.ndarray, ate_true: np.ndarray) -> float:
    """Sum of |error| over ordered pairs divided by the sum of |truth|."""
    ate_hat = np.asarray(ate_hat, dtype=float)
    ate_true = np.asarray(ate_true, dtype=float)
    if ate_hat.shape != ate_true.shape or ate_hat.ndim != 2:
        raise ShapeMismatch("pairwise matrices must share a square shape")
    off = ~np.eye(ate_true.shape[0], dtype=bool)
    denom = float(np.abs(ate_true[off]).sum())
    if denom == 0.0:
        raise ZeroDenominator("all true pairwise effects are zero")
    return float(np.abs(ate_hat[off] - ate_true[off]).sum() / denom)


def epsilon_ate(estimates, truths) -> float:
    """Mean over datasets of the per-dataset relative pairwise-ATE error.

    ``estimates`` holds EstimateReports (or pairwise matrices) and
    ``truths`` the matching true pairwise matrices.
    """
    if len(estimates) != len(truths) or not estimates:
        raise ShapeMismatch("need equally many (non-zero) estimates and truths")
    total = 0.0
    for est, true in zip(estimates, truths):
        ate_hat = est.ate_pairwise if isinstance(est, EstimateReport) else est
        total += relative_ate_error(ate_hat, true)
    return total / len(estimates)
