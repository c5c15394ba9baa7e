"""Robust re-estimation of the power-law fit: Huber IRLS and RANSAC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, NoConsensus
from .graph import Graph, derive_rng
from .oddball import AnomalyReport, EgoFeatures, RegressionFit, _masked_logs, anomaly_scores, ego_features, fit_ols


@dataclass(frozen=True)
class RobustConfig:
    huber_k: float = 1.345
    huber_iters: int = 100
    huber_tol: float = 1e-8
    ransac_iters: int = 200
    ransac_inlier_tol: float | None = None  # None: 1.5 * median |OLS residual|
    seed: int = 0


def huber_loss(r: np.ndarray, k: float) -> np.ndarray:
    """Quadratic within |r| <= k, linear beyond."""
    r = np.abs(r)
    return np.where(r <= k, 0.5 * r**2, k * r - 0.5 * k**2)


def fit_huber(features: EgoFeatures, config: RobustConfig = RobustConfig()) -> RegressionFit:
    """Huber-loss line fit by iteratively reweighted least squares.

    Starts from the OLS solution; weights are min(1, k/|residual|).
    Stops when both coefficients move less than huber_tol.
    """
    start = fit_ols(features)
    if start.degenerate:
        return RegressionFit(start.beta0, start.beta1, "huber", start.fit_mask, degenerate=True)
    mask, x, y = _masked_logs(features)
    beta0, beta1 = start.beta0, start.beta1
    k = config.huber_k
    for _ in range(config.huber_iters):
        resid = y - beta0 - beta1 * x
        absr = np.maximum(np.abs(resid), 1e-12)
        w = np.minimum(1.0, k / absr)
        sw = w.sum()
        xw = (w * x).sum() / sw
        yw = (w * y).sum() / sw
        sxx = (w * (x - xw) ** 2).sum()
        if sxx <= 0:
            raise DegenerateFit("weighted design became singular")
        new_beta1 = float((w * (x - xw) * (y - yw)).sum() / sxx)
        new_beta0 = float(yw - new_beta1 * xw)
        if abs(new_beta0 - beta0) < config.huber_tol and abs(new_beta1 - beta1) < config.huber_tol:
            beta0, beta1 = new_beta0, new_beta1
            break
        beta0, beta1 = new_beta0, new_beta1
    return RegressionFit(beta0, beta1, "huber", mask)


def fit_ransac(features: EgoFeatures, config: RobustConfig = RobustConfig()) -> RegressionFit:
    """Random-sample-consensus line fit on the log-log features.

    Seeded two-point minimal samples with distinct ln N each propose a
    line; the candidate with the largest inlier consensus wins (ties by
    smaller summed Huber loss, k = 1, over its inliers) and is refit by
    least squares on the consensus set.
    """
    mask, x, y = _masked_logs(features)
    if len(np.unique(x)) < 2:
        raise DegenerateFit("need at least 2 distinct ln N values")
    tol = config.ransac_inlier_tol
    if tol is None:
        start = fit_ols(features)
        tol = 1.5 * float(np.median(np.abs(y - start.beta0 - start.beta1 * x)))
        tol = max(tol, 1e-9)
    rng = derive_rng(config.seed, "ransac")
    m = len(x)
    best = None  # (consensus size, -huber sum, beta0, beta1, inliers)
    for _ in range(config.ransac_iters):
        i, j = rng.choice(m, size=2, replace=False)
        if x[i] == x[j]:
            continue
        b1 = (y[j] - y[i]) / (x[j] - x[i])
        b0 = y[i] - b1 * x[i]
        resid = y - b0 - b1 * x
        inliers = np.abs(resid) <= tol
        size = int(inliers.sum())
        if size < 2:
            continue
        hub = float(huber_loss(resid[inliers], 1.0).sum())
        key = (size, -hub)
        if best is None or key > best[0]:
            best = (key, b0, b1, inliers)
    if best is None:
        raise NoConsensus("no candidate line had at least 2 inliers")
    _, _, _, inliers = best
    xi, yi = x[inliers], y[inliers]
    sxx = float(np.sum((xi - xi.mean()) ** 2))
    if sxx == 0:
        raise NoConsensus("consensus set has no ln N spread")
    beta1 = float(np.sum((xi - xi.mean()) * (yi - yi.mean())) / sxx)
    beta0 = float(yi.mean() - beta1 * xi.mean())
    return RegressionFit(beta0, beta1, "ransac", mask[inliers])


def robust_rescore(graph: Graph, fitter: str, config: RobustConfig = RobustConfig()) -> AnomalyReport:
    """Egonet features -> robust fit -> deviation scores for all nodes."""
    feats = ego_features(graph)
    if fitter == "huber":
        fit = fit_huber(feats, config)
    elif fitter == "ransac":
        fit = fit_ransac(feats, config)
    elif fitter == "ols":
        fit = fit_ols(feats)
    else:
        raise ValueError(f"unknown fitter {fitter!r}")
    if fitter == "ransac":
        # score every non-isolated node against the consensus line
        full_fit = RegressionFit(fit.beta0, fit.beta1, "ransac", _masked_logs(feats)[0])
        return anomaly_scores(feats, full_fit)
    return anomaly_scores(feats, fit)
