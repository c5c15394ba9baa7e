"""OddBall egonet-feature anomaly detector and its attack surrogate.

The detector extracts per-node egonet features (N_i, E_i), fits the
power law ln E = beta0 + beta1 * ln N by least squares, and scores each
node by its deviation from the fitted line.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit
from .graph import Graph


@dataclass(frozen=True)
class EgoFeatures:
    """Per-node egonet node count N (= degree) and edge count E."""

    N: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        if self.N.shape != self.E.shape:
            raise ValueError("N and E must have the same length")


@dataclass(frozen=True)
class RegressionFit:
    """Fitted log-log line ln E = beta0 + beta1 * ln N."""

    beta0: float
    beta1: float
    fitter: str  # "ols" | "huber" | "ransac"
    fit_mask: np.ndarray  # node ids used in the fit
    degenerate: bool = False

    def predict_E(self, N: np.ndarray) -> np.ndarray:
        """Fitted edge count e^{beta0} * N^{beta1}; zero degree maps to 0."""
        N = np.asarray(N, dtype=float)
        out = np.zeros_like(N)
        pos = N > 0
        out[pos] = np.exp(self.beta0) * N[pos] ** self.beta1
        return out


@dataclass(frozen=True)
class AnomalyReport:
    """Per-node anomaly scores together with the fit that produced them."""

    scores: np.ndarray
    fit: RegressionFit
    features: EgoFeatures = field(repr=False, default=None)

    def target_sum(self, targets) -> float:
        return float(self.scores[np.asarray(sorted(targets))].sum())


def ego_features(graph: Graph) -> EgoFeatures:
    """Egonet features: N_i = degree(i), E_i = N_i + (1/2) diag(A^3)_i."""
    N = graph.degrees().astype(float)
    E = N + 0.5 * graph.triangle_diagonal()
    return EgoFeatures(N=N, E=E)


def _masked_logs(features: EgoFeatures):
    mask = np.flatnonzero(features.N >= 1)
    x = np.log(features.N[mask])
    y = np.log(features.E[mask])
    return mask, x, y


def fit_ols(features: EgoFeatures) -> RegressionFit:
    """Ordinary least squares of ln E on [1, ln N] over nodes with N >= 1.

    When all masked ln N coincide the normal matrix is singular; the
    minimum-norm solution (beta1 = 0, beta0 = mean ln E) is returned
    with the degenerate flag set.
    """
    mask, x, y = _masked_logs(features)
    if len(mask) < 2:
        raise DegenerateFit(f"need at least 2 nodes with N >= 1, have {len(mask)}")
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        return RegressionFit(float(y.mean()), 0.0, "ols", mask, degenerate=True)
    beta1 = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    beta0 = float(y.mean() - beta1 * x.mean())
    return RegressionFit(beta0, beta1, "ols", mask)


def anomaly_scores(features: EgoFeatures, fit: RegressionFit) -> AnomalyReport:
    """Deviation score per node; excluded (isolated) nodes score 0.

    S_i = max(E_i, Ehat_i)/min(E_i, Ehat_i) * ln(|E_i - Ehat_i| + 1)
    with Ehat_i the fitted edge count.
    """
    scores = np.zeros(len(features.N))
    mask = fit.fit_mask
    E = features.E[mask]
    Ehat = fit.predict_E(features.N[mask])
    ratio = np.maximum(E, Ehat) / np.minimum(E, Ehat)
    scores[mask] = ratio * np.log(np.abs(E - Ehat) + 1.0)
    return AnomalyReport(scores=scores, fit=fit, features=features)


def surrogate_objective(features: EgoFeatures, targets) -> float:
    """Sum over targets of squared residuals (E_i - Ehat_i)^2.

    The fit is re-derived from the given features, so moving any edge
    moves the regression line too (the bi-level coupling).
    """
    targets = sorted(targets)
    if not targets:
        warnings.warn("surrogate_objective called with an empty target set")
        return 0.0
    fit = fit_ols(features)
    mask_set = set(fit.fit_mask.tolist())
    missing = [t for t in targets if t not in mask_set]
    if missing:
        raise ValueError(f"targets outside fit mask (isolated nodes): {missing}")
    idx = np.asarray(targets)
    resid = features.E[idx] - fit.predict_E(features.N[idx])
    return float(np.sum(resid**2))


def rank_top_k(report: AnomalyReport, k: int) -> list[int]:
    """Top-k node ids by descending score, ties broken by ascending id."""
    n = len(report.scores)
    if k > n:
        raise ValueError(f"k={k} exceeds node count {n}")
    order = np.lexsort((np.arange(n), -report.scores))
    return order[:k].tolist()


def score_graph(graph: Graph) -> AnomalyReport:
    """Convenience: features -> OLS fit -> scores in one call."""
    feats = ego_features(graph)
    return anomaly_scores(feats, fit_ols(feats))


def write_report_csv(report: AnomalyReport, path) -> None:
    """CSV schema: node_id, N, E, fitted_E, score, fitter."""
    feats = report.features
    fitted = report.fit.predict_E(feats.N)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "N", "E", "fitted_E", "score", "fitter"])
        for i in range(len(report.scores)):
            writer.writerow(
                [i, feats.N[i], feats.E[i], f"{fitted[i]:.10g}", f"{report.scores[i]:.10g}", report.fit.fitter]
            )
