"""Correlation-captured and estimation-accuracy criteria, oracle and CV forms.

Naming follows a fixed vocabulary: r2s{k} / R2s{k} for sums of squared
successive / subspace correlations, wt-/vt- prefixes for weight- and
variate-space squared sin-Theta quantities, u{k} / U{k} for single pairs
versus leading-k subspaces, and a -cv suffix for the cross-validated forms.
"""

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from .cca_core import CcaEstimate, empirical_canonical_correlations
from .datamodel import CovarianceModel, FoldPlan, PairedDataset, split_fold
from .linalg import canonical_angles, gram_schmidt_reduce, sym_matrix_power

__all__ = [
    "AGGREGATIONS",
    "aggregate",
    "oracle_corr",
    "succ_cc_agg",
    "subsp_cc_agg",
    "cv_cc_agg",
    "estimation_error",
    "cv_instability",
    "mutual_information",
    "gauss_mutual_info",
    "MetricRecord",
    "MetricReport",
    "metric_name",
]

RHO_CLAMP = 1.0 - 1e-9


def mutual_information(rho):
    """Gaussian mutual information implied by canonical correlations.

    Correlations are clamped just below one so degenerate sample CCA keeps
    the metric finite.
    """
    r = np.clip(np.abs(np.asarray(rho, dtype=float)), 0.0, RHO_CLAMP)
    return float(-0.5 * np.sum(np.log1p(-(r**2))))


AGGREGATIONS = {
    "l1_sum": lambda rho: float(np.sum(np.abs(rho))),
    "sq_sum": lambda rho: float(np.sum(np.asarray(rho) ** 2)),
    "mutual_info": mutual_information,
}


def aggregate(kind, rho):
    """Map a correlation vector to a scalar with a coordinate-wise
    increasing aggregation."""
    try:
        f = AGGREGATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown aggregation {kind!r}") from None
    return f(np.asarray(rho, dtype=float))


def gauss_mutual_info(cov: CovarianceModel):
    """Mutual information of a joint Gaussian from determinants:
    0.5 * log(|Sxx| |Syy| / |S|)."""
    sx = np.linalg.slogdet(cov.sxx)
    sy = np.linalg.slogdet(cov.syy)
    sj = np.linalg.slogdet(cov.joint())
    if sx[0] <= 0 or sy[0] <= 0 or sj[0] <= 0:
        raise ValueError("covariance model must be positive definite")
    return float(0.5 * (sx[1] + sy[1] - sj[1]))


def oracle_corr(cov: CovarianceModel, u, v):
    """Population correlation of the projections u.X and v.Y under cov."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    vu = float(u @ cov.sxx @ u)
    vv = float(v @ cov.syy @ v)
    if vu <= 0 or vv <= 0:
        raise ValueError("projection has zero variance under the model")
    return float(u @ cov.sxy @ v / np.sqrt(vu * vv))


def succ_cc_agg(kind, cov: CovarianceModel, u_dirs, v_dirs):
    """Aggregated oracle correlations of successive direction pairs."""
    u_dirs = np.atleast_2d(np.asarray(u_dirs, dtype=float))
    v_dirs = np.atleast_2d(np.asarray(v_dirs, dtype=float))
    rhos = [oracle_corr(cov, u_dirs[:, k], v_dirs[:, k]) for k in range(u_dirs.shape[1])]
    return aggregate(kind, rhos)


def subsp_cc_agg(kind, cov: CovarianceModel, u_dirs, v_dirs, K):
    """Aggregated canonical correlations of the projected pair
    (U_K.X, V_K.Y); invariant to the basis chosen within each subspace.

    Rank-deficient blocks are Gram-Schmidt reduced first; the effective
    dimension is whatever survives.
    """
    from .cca_core import cca_from_covariance

    uk = np.asarray(u_dirs, dtype=float)[:, :K]
    vk = np.asarray(v_dirs, dtype=float)[:, :K]
    uk, _ = gram_schmidt_reduce(uk)
    vk, _ = gram_schmidt_reduce(vk)
    if uk.shape[1] == 0 or vk.shape[1] == 0:
        raise ValueError("projection blocks are rank zero")
    proj = CovarianceModel(
        sxx=uk.T @ cov.sxx @ uk,
        sxy=uk.T @ cov.sxy @ vk,
        syy=vk.T @ cov.syy @ vk,
    )
    rho = cca_from_covariance(proj, min(uk.shape[1], vk.shape[1])).rho
    return aggregate(kind, rho)


def _signed_corr(z, w):
    nz = np.linalg.norm(z)
    nw = np.linalg.norm(w)
    if nz == 0.0 or nw == 0.0:
        return 0.0
    return float(z @ w / (nz * nw))


def cv_cc_agg(mode, kind, data: PairedDataset, fold_estimates, folds: FoldPlan, K,
              return_dispersion=False):
    """Cross-validated correlation criterion, averaged over folds.

    mode='successive': aggregate the per-pair validation correlations of
    each fold's estimate (signs kept; the aggregation sees the raw values).
    mode='subspace': aggregate the canonical correlations of the validation
    variate blocks.  Validation columns are shifted by training-fold means.

    With ``return_dispersion`` the across-fold standard deviation comes
    back alongside the mean.
    """
    if mode not in ("successive", "subspace"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(fold_estimates) != folds.V:
        raise ValueError(
            f"need one estimate per fold: got {len(fold_estimates)} for V={folds.V}"
        )
    vals = []
    for v, est in enumerate(fold_estimates):
        if est is None:
            raise ValueError(f"missing estimate for fold {v}")
        if est.k < K:
            raise ValueError(f"fold {v} estimate has {est.k} pairs, need {K}")
        _, val = split_fold(data, folds, v)
        z = val.x @ est.u_dirs[:, :K]
        w = val.y @ est.v_dirs[:, :K]
        if mode == "successive":
            corr = [_signed_corr(z[:, k], w[:, k]) for k in range(K)]
            vals.append(aggregate(kind, corr))
        else:
            vals.append(aggregate(kind, empirical_canonical_correlations(z, w)))
    if return_dispersion:
        return float(np.mean(vals)), float(np.std(vals))
    return float(np.mean(vals))


def _vector_sin2(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero vector in angle computation")
    cos = float(a @ b / (na * nb))
    return max(0.0, 1.0 - cos**2)


def _subspace_sin2(a, b):
    """Squared sin-Theta after orthonormalising (and if needed reducing)
    both blocks; returns (value, effective dimension)."""
    qa, _ = gram_schmidt_reduce(np.asarray(a, dtype=float))
    qb, _ = gram_schmidt_reduce(np.asarray(b, dtype=float))
    keff = min(qa.shape[1], qb.shape[1])
    if keff == 0:
        raise ValueError("zero-dimensional subspace in angle computation")
    ang = canonical_angles(qa, qb)
    return float(keff - np.sum(ang.cosines[:keff] ** 2)), keff


def estimation_error(cov: CovarianceModel, truth: CcaEstimate, est: CcaEstimate, k):
    """Squared sin-Theta errors of the k-th pair and leading-k subspaces.

    wt_* compares raw weight vectors, vt_* compares them after
    pre-multiplication by Sxx^{1/2} (variate space).
    """
    if k > min(truth.k, est.k):
        raise ValueError(f"k={k} exceeds available pairs")
    half = sym_matrix_power(cov.sxx, 0.5)
    u_t, u_e = truth.u_dirs[:, k - 1], est.u_dirs[:, k - 1]
    out = {
        "wt_uk": _vector_sin2(u_t, u_e),
        "vt_uk": _vector_sin2(half @ u_t, half @ u_e),
    }
    out["wt_Uk"], _ = _subspace_sin2(truth.u_dirs[:, :k], est.u_dirs[:, :k])
    out["vt_Uk"], out["effective_k"] = _subspace_sin2(
        half @ truth.u_dirs[:, :k], half @ est.u_dirs[:, :k]
    )
    return out


def cv_instability(data: PairedDataset, fold_estimates, k):
    """Average squared sin-Theta between estimates from different training
    folds; the variate versions project both estimates through the full
    data matrix."""
    ests = [e for e in fold_estimates if e is not None]
    if len(ests) < 2:
        raise ValueError("need at least 2 fold estimates")
    wt_u, vt_u, wt_big, vt_big = [], [], [], []
    for i in range(len(ests)):
        for j in range(i + 1, len(ests)):
            a, b = ests[i], ests[j]
            wt_u.append(_vector_sin2(a.u_dirs[:, k - 1], b.u_dirs[:, k - 1]))
            vt_u.append(
                _vector_sin2(data.x @ a.u_dirs[:, k - 1], data.x @ b.u_dirs[:, k - 1])
            )
            wt_big.append(_subspace_sin2(a.u_dirs[:, :k], b.u_dirs[:, :k])[0])
            vt_big.append(
                _subspace_sin2(data.x @ a.u_dirs[:, :k], data.x @ b.u_dirs[:, :k])[0]
            )
    return {
        "wt_uk_cv": float(np.mean(wt_u)),
        "vt_uk_cv": float(np.mean(vt_u)),
        "wt_Uk_cv": float(np.mean(wt_big)),
        "vt_Uk_cv": float(np.mean(vt_big)),
    }


# ---------------------------------------------------------------------------
# long-format reporting
# ---------------------------------------------------------------------------

_METRIC_NAME_RE = re.compile(r"^(r2s\d+|R2s\d+|(wt|vt)-(u|U)\d+)(-cv)?$")


def metric_name(family, k, cv=False):
    """Canonical metric identifier, e.g. ('r2s', 3, cv=True) -> 'r2s3-cv'."""
    if family in ("r2s", "R2s"):
        name = f"{family}{k}"
    elif family in ("wt-u", "vt-u", "wt-U", "vt-U"):
        name = f"{family}{k}"
    else:
        raise ValueError(f"unknown metric family {family!r}")
    return name + ("-cv" if cv else "")


@dataclass
class MetricRecord:
    algorithm: str
    penalty: float
    fold: object
    metric: str
    k: int
    value: float
    dispersion: float = None

    def __post_init__(self):
        if not _METRIC_NAME_RE.match(self.metric):
            raise ValueError(f"metric name {self.metric!r} outside the vocabulary")


@dataclass
class MetricReport:
    records: list = field(default_factory=list)

    def add(self, **kwargs):
        self.records.append(MetricRecord(**kwargs))

    def to_csv(self, path):
        """Long-format CSV with columns (algorithm, penalty, fold, metric, k, value)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "penalty", "fold", "metric", "k", "value"])
            for r in self.records:
                writer.writerow(
                    [r.algorithm, repr(float(r.penalty)), r.fold, r.metric, r.k,
                     repr(float(r.value))]
                )
