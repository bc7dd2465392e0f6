"""Graphical Lasso by ADMM with a KKT stationarity certificate.

Solves, for symmetric input C and penalty lam > 0,

    maximise_{Omega PD}  log det(Omega) - trace(C @ Omega) - lam * ||offdiag(Omega)||_1

Diagonal entries are never penalised.  The log-det proximal step is exact
(symmetric eigendecomposition); the penalty step is elementwise off-diagonal
soft-thresholding.  Convergence is certified by the first-order optimality
residual rather than by ADMM residuals alone.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PrecisionEstimate", "GlassoConvergenceError", "glasso_fit", "kkt_residual"]


class GlassoError(ValueError):
    """Invalid input to the graphical lasso."""


class GlassoConvergenceError(RuntimeError):
    """Solver hit max_iter before the KKT residual reached tolerance."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class PrecisionEstimate:
    """GLasso output: precision matrix, its inverse and solver diagnostics."""

    omega: np.ndarray
    sigma: np.ndarray
    lam: float
    diagnostics: dict = field(default_factory=dict)


def _soft_threshold_offdiag(a, thr):
    out = np.sign(a) * np.maximum(np.abs(a) - thr, 0.0)
    np.fill_diagonal(out, np.diagonal(a))
    return out


def kkt_residual(c, omega, lam):
    """Max entrywise violation of the GLasso stationarity conditions.

    With G = inv(omega) - C the conditions are: G_ii = 0 on the diagonal;
    |G_ij| <= lam where omega_ij = 0; G_ij = lam * sign(omega_ij) on
    nonzero off-diagonal entries.
    """
    c = np.asarray(c, dtype=float)
    omega = np.asarray(omega, dtype=float)
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise GlassoError("omega is not positive definite") from exc
    g = np.linalg.inv(omega) - c
    g = 0.5 * (g + g.T)
    res = float(np.max(np.abs(np.diagonal(g))))
    off = ~np.eye(omega.shape[0], dtype=bool)
    zero = off & (omega == 0.0)
    nonzero = off & (omega != 0.0)
    if np.any(zero):
        res = max(res, float(np.max(np.abs(g[zero]) - lam)))
    if np.any(nonzero):
        res = max(res, float(np.max(np.abs(g[nonzero] - lam * np.sign(omega[nonzero])))))
    return max(res, 0.0)


def glasso_fit(c, lam, tol=1e-7, max_iter=5000, rho=1.0):
    """ADMM solve of the off-diagonal l1-penalised Gaussian log-likelihood.

    Parameters
    ----------
    c : symmetric PSD matrix
        Sample covariance (or any symmetric PSD surrogate).
    lam : float
        Positive penalty on off-diagonal entries.
    tol : float
        Target on the KKT residual; reaching it certifies optimality.
    max_iter : int
        Iteration cap; exceeding it raises GlassoConvergenceError.
    rho : float
        Initial ADMM penalty parameter; rescaled adaptively by residual
        balancing (factor 2 when one residual exceeds the other tenfold).
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise GlassoError(f"C must be square, got {c.shape}")
    scale = max(1.0, float(np.max(np.abs(c))))
    if float(np.max(np.abs(c - c.T))) > 1e-8 * scale:
        raise GlassoError("C must be symmetric")
    if not np.all(np.isfinite(c)):
        raise GlassoError("C contains non-finite entries")
    if lam <= 0:
        raise GlassoError("lam must be positive")
    c = 0.5 * (c + c.T)
    d = c.shape[0]

    diag = np.maximum(np.diagonal(c), 1e-12)
    x = np.diag(1.0 / diag)
    z = x.copy()
    u = np.zeros_like(c)

    primal = dual = np.inf
    kkt = np.inf
    it = 0
    check_every = 10
    for it in range(1, max_iter + 1):
        # log-det proximal step: exact via eigendecomposition
        w, q = np.linalg.eigh(rho * (z - u) - c)
        xi = (w + np.sqrt(w**2 + 4.0 * rho)) / (2.0 * rho)
        x = (q * xi) @ q.T
        x = 0.5 * (x + x.T)

        z_old = z
        z = _soft_threshold_offdiag(x + u, lam / rho)
        u = u + x - z

        primal = float(np.linalg.norm(x - z))
        dual = float(np.linalg.norm(rho * (z - z_old)))

        if it % check_every == 0 or (primal < tol * 10 and dual < tol * 10):
            try:
                kkt = kkt_residual(c, 0.5 * (z + z.T), lam)
            except GlassoError:
                kkt = np.inf
            if kkt <= tol:
                break

        # residual balancing keeps the two ADMM residuals comparable
        if primal > 10.0 * dual:
            rho *= 2.0
            u /= 2.0
        elif dual > 10.0 * primal:
            rho /= 2.0
            u *= 2.0

    omega = 0.5 * (z + z.T)
    diagnostics = {
        "iterations": it,
        "primal_residual": primal,
        "dual_residual": dual,
        "kkt_residual": kkt,
        "rho": rho,
        "converged": kkt <= tol,
    }
    if kkt > tol:
        raise GlassoConvergenceError(
            f"glasso did not certify in {max_iter} iterations "
            f"(kkt_residual={kkt:.3e} > tol={tol:.1e})",
            diagnostics,
        )
    w = np.linalg.eigvalsh(omega)
    if w[0] <= 0:
        raise GlassoConvergenceError(
            f"converged iterate is not PD (min eigenvalue {w[0]:.3e})", diagnostics
        )
    sigma = np.linalg.inv(omega)
    sigma = 0.5 * (sigma + sigma.T)
    return PrecisionEstimate(omega=omega, sigma=sigma, lam=float(lam), diagnostics=diagnostics)
