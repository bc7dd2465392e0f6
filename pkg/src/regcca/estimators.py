"""The four regularised CCA estimators behind one interface, plus sweeps.

rcca   ridge-regularised CCA: plug-in CCA on (1-c)*C + c*I within-view blocks;
       c=0 is sample CCA, c=1 is PLS (an SVD of the cross-covariance).
spls   penalised matrix decomposition with Euclidean-metric constraints and
       rank-one deflation; not a true CCA method.
scca   l1-penalised CCA with covariance-metric constraints, solved by
       interleaved linearised-ADMM blocks with dual recycling.
gcca   graphical-lasso plug-in: estimate the joint precision, invert, run
       exact CCA on the implied covariance.

All estimators return direction columns rescaled to unit empirical variance
of the training variates (degenerate zero columns excepted), so estimates
are directly comparable across methods.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cca_core import CcaEstimate, Provenance, cca_from_covariance
from .datamodel import CovarianceModel, FoldPlan, PairedDataset, center_and_covariance, split_fold
from .glasso import GlassoConvergenceError, glasso_fit
from .linalg import thin_svd

__all__ = [
    "EstimatorSpec",
    "TrajectoryResult",
    "rcca_fit",
    "spls_fit",
    "scca_fit",
    "gcca_fit",
    "fit_estimator",
    "sweep_trajectory",
    "save_estimate",
    "load_estimate",
]

KINDS = ("rcca", "spls", "scca", "gcca")

_PENALTY_RANGES = {
    "rcca": (0.0, 1.0),
    "spls": (1.0, np.inf),
    "scca": (0.0, np.inf),
    "gcca": (0.0, np.inf),
}


@dataclass
class EstimatorSpec:
    """One estimator: kind, tied penalty, number of pairs and solver knobs."""

    kind: str
    penalty: float
    K: int
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        lo, hi = _PENALTY_RANGES[self.kind]
        if not lo <= self.penalty <= hi:
            raise ValueError(
                f"{self.kind} penalty {self.penalty} outside [{lo}, {hi}]"
            )
        if self.kind == "gcca" and self.penalty <= 0:
            raise ValueError("gcca penalty must be strictly positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")


def _require_centred(data: PairedDataset):
    if not data.centred:
        raise ValueError("estimator expects centred data; run center_and_covariance first")


def _unit_variance_columns(dirs, data_matrix):
    """Rescale columns so the training variates have unit empirical variance
    (divisor n)."""
    n = data_matrix.shape[0]
    out = dirs.copy()
    for k in range(out.shape[1]):
        var = float(np.sum((data_matrix @ out[:, k]) ** 2)) / n
        if var > 0:
            out[:, k] /= np.sqrt(var)
    return out


def _empirical_corr(z, w):
    nz = np.linalg.norm(z)
    nw = np.linalg.norm(w)
    if nz == 0.0 or nw == 0.0:
        return 0.0
    return float(z @ w / (nz * nw))


# ---------------------------------------------------------------------------
# ridge CCA
# ---------------------------------------------------------------------------

def rcca_fit(data: PairedDataset, c, K, floor_eps=None):
    """Ridge-regularised CCA with tied penalty c in [0, 1].

    Plug-in CCA on the covariance model with within-view blocks
    (1-c)*Cxx + c*I; rho holds the singular values of the regularised
    whitened target (sample canonical correlations at c=0, singular values
    of Cxy at c=1).
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"rcca penalty must lie in [0, 1], got {c}")
    _require_centred(data)
    _, cov = center_and_covariance(data)
    reg = CovarianceModel(
        sxx=(1.0 - c) * cov.sxx + c * np.eye(data.p),
        sxy=cov.sxy,
        syy=(1.0 - c) * cov.syy + c * np.eye(data.q),
    )
    est = cca_from_covariance(reg, K, floor_eps, algorithm="rcca")
    u = _unit_variance_columns(est.u_dirs, data.x)
    v = _unit_variance_columns(est.v_dirs, data.y)
    return CcaEstimate(
        u_dirs=u,
        v_dirs=v,
        rho=est.rho,
        provenance=Provenance(algorithm="rcca", penalty=float(c)),
    )


# ---------------------------------------------------------------------------
# sparse PLS (penalised matrix decomposition)
# ---------------------------------------------------------------------------

def _l1_ball_unit_vector(z, s, bisect_iters=100):
    """argmax u.z subject to ||u||_2 <= 1 and ||u||_1 <= s.

    The solution is a soft-threshold of z renormalised to the unit sphere,
    with the threshold found by bisection so the l1 constraint binds (or is
    already slack at threshold zero).
    """
    z = np.asarray(z, dtype=float)
    zmax = float(np.max(np.abs(z)))
    if zmax == 0.0:
        return np.zeros_like(z)

    def candidate(delta):
        u = np.sign(z) * np.maximum(np.abs(z) - delta, 0.0)
        nrm = np.linalg.norm(u)
        return u / nrm if nrm > 0 else u

    u0 = candidate(0.0)
    if np.sum(np.abs(u0)) <= s:
        return u0
    lo, hi = 0.0, zmax
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if np.sum(np.abs(candidate(mid))) > s:
            lo = mid
        else:
            hi = mid
    return candidate(hi)


def _pmd_pair(cmat, s, max_sweeps=200, tol=1e-9):
    """Leading penalised singular pair of cmat by alternating maximisation."""
    dec = thin_svd(cmat)
    if dec.singular_values.size == 0 or dec.singular_values[0] == 0.0:
        p, q = cmat.shape
        return np.zeros(p), np.zeros(q), 0.0, True
    v = dec.right[:, 0].copy()
    u = np.zeros(cmat.shape[0])
    converged = False
    for _ in range(max_sweeps):
        u_new = _l1_ball_unit_vector(cmat @ v, s)
        v_new = _l1_ball_unit_vector(cmat.T @ u_new, s)
        if np.linalg.norm(u_new - u) < tol and np.linalg.norm(v_new - v) < tol:
            u, v = u_new, v_new
            converged = True
            break
        u, v = u_new, v_new
    d = float(u @ cmat @ v)
    return u, v, d, converged


def spls_fit(data: PairedDataset, s, K, max_sweeps=200, tol=1e-9):
    """Sparse PLS: penalised rank-one fits of the deflated cross-covariance.

    Each pair maximises u.Cxy.v under unit l2 norms and l1 radius s, then the
    fitted rank-one term d*u*v' is subtracted before extracting the next
    pair.  rho records the empirical correlation of the fitted variates, not
    the deflation scalar, so correlation metrics compare like-for-like with
    the CCA methods.
    """
    if s < 1.0:
        raise ValueError(f"spls l1 radius must be >= 1, got {s}")
    _require_centred(data)
    _, cov = center_and_covariance(data)
    cmat = cov.sxy.copy()
    us, vs, rhos = [], [], []
    all_converged = True
    degenerate = False
    for _ in range(K):
        u, v, d, ok = _pmd_pair(cmat, s, max_sweeps, tol)
        all_converged &= ok
        if np.all(u == 0.0) or np.all(v == 0.0):
            degenerate = True
        us.append(u)
        vs.append(v)
        rhos.append(_empirical_corr(data.x @ u, data.y @ v))
        cmat = cmat - d * np.outer(u, v)
    u_mat = np.column_stack(us)
    v_mat = np.column_stack(vs)
    u_scaled = _unit_variance_columns(u_mat, data.x)
    v_scaled = _unit_variance_columns(v_mat, data.y)
    return CcaEstimate(
        u_dirs=u_scaled,
        v_dirs=v_scaled,
        rho=np.asarray(rhos),
        provenance=Provenance(
            algorithm="spls",
            penalty=float(s),
            degenerate=degenerate,
            converged=all_converged,
        ),
    )


# ---------------------------------------------------------------------------
# sparse CCA by interleaved linearised ADMM
# ---------------------------------------------------------------------------

def _operator_norm_sq(mat, tol=1e-8, max_iter=500):
    """Top eigenvalue of mat.T @ mat by power iteration, deterministic start."""
    p = mat.shape[1]
    b = np.ones(p) / np.sqrt(p)
    val = 0.0
    for _ in range(max_iter):
        w = mat.T @ (mat @ b)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_val = float(b @ w)
        b = w / nw
        if abs(new_val - val) <= tol * max(new_val, 1.0):
            return new_val
        val = new_val
    return val


def _soft(x, thr):
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def _ladmm_block(u, z, xi, xt, xdata, c, tau, lam_step, mu, n_steps):
    """n_steps linearised-ADMM updates for one weight vector.

    xt stacks the data rows with the orthogonality-constraint rows; xdata is
    the plain data block (first n rows of xt).  The dual update uses the
    full constraint residual, which reduces to x.u - z for the first pair.
    """
    n = xdata.shape[0]
    coef = mu / lam_step
    for _ in range(n_steps):
        r = xt @ u
        r[:n] -= z
        u = _soft(u - coef * (xt.T @ (r + xi)) + mu * c, mu * tau)
        w = xdata @ u + xi[:n]
        nw = np.linalg.norm(w)
        z = w / nw if nw > 1.0 else w
        r = xt @ u
        r[:n] -= z
        xi = xi + r
    return u, z, xi


def _scca_init(cxy, tau, k):
    """k-th singular pair of the soft-thresholded cross-covariance.

    Falls back to the unthresholded SVD when thresholding leaves too little
    rank behind.
    """
    thresholded = _soft(cxy, tau)
    dec = thin_svd(thresholded)
    if dec.singular_values.size > k - 1 and dec.singular_values[k - 1] > 0:
        return dec.left[:, k - 1].copy(), dec.right[:, k - 1].copy()
    dec = thin_svd(cxy)
    return dec.left[:, k - 1].copy(), dec.right[:, k - 1].copy()


def scca_fit(
    data: PairedDataset,
    tau,
    K,
    lambda_step=1.0,
    n_steps_admm=5,
    tol=1e-6,
    max_outer=2000,
    recycle_duals=True,
):
    """l1-penalised CCA with covariance-metric orthogonality constraints.

    Pair k minimises ``-u.Cxy.v + tau*(||u||_1 + ||v||_1)`` subject to unit
    variance and orthogonality to the previous pairs, by alternating short
    linearised-ADMM blocks for u and v.  Data matrices are downscaled by
    sqrt(n) internally so covariances are plain Gram matrices.  Dual
    variables persist across outer iterations (``recycle_duals``); the outer
    loop stops when both weight vectors move less than ``tol`` in l2.

    Diagnostics in provenance record total inner iterations, for comparing
    solver configurations.
    """
    if tau < 0:
        raise ValueError(f"scca penalty must be nonnegative, got {tau}")
    _require_centred(data)
    n = data.n
    xd = data.x / np.sqrt(n)
    yd = data.y / np.sqrt(n)
    cxx = xd.T @ xd
    cyy = yd.T @ yd
    cxy = xd.T @ yd

    us, vs, rhos = [], [], []
    total_inner = 0
    all_converged = True
    degenerate = False
    last_moves = []
    for k in range(1, K + 1):
        u_prev = np.column_stack(us) if us else np.zeros((data.p, 0))
        v_prev = np.column_stack(vs) if vs else np.zeros((data.q, 0))
        xt = np.vstack([xd, (cxx @ u_prev).T])
        yt = np.vstack([yd, (cyy @ v_prev).T])
        mu_x = lambda_step / (2.0 * max(_operator_norm_sq(xt), 1e-30))
        mu_y = lambda_step / (2.0 * max(_operator_norm_sq(yt), 1e-30))

        u, v = _scca_init(cxy, tau, k)
        nu = np.linalg.norm(xd @ u)
        if nu > 0:
            u = u / nu
        nv = np.linalg.norm(yd @ v)
        if nv > 0:
            v = v / nv

        def fresh_duals(weight, stacked, block):
            zz = block @ weight
            nz = np.linalg.norm(zz)
            if nz > 1.0:
                zz = zz / nz
            res = stacked @ weight
            res[:n] -= zz
            return zz, res

        z_u, xi_u = fresh_duals(u, xt, xd)
        z_v, xi_v = fresh_duals(v, yt, yd)

        converged = False
        last_move = (np.inf, np.inf)
        for _ in range(max_outer):
            u_old, v_old = u, v
            if not recycle_duals:
                z_u, xi_u = fresh_duals(u, xt, xd)
            u, z_u, xi_u = _ladmm_block(
                u, z_u, xi_u, xt, xd, cxy @ v, tau, lambda_step, mu_x, n_steps_admm
            )
            if not recycle_duals:
                z_v, xi_v = fresh_duals(v, yt, yd)
            v, z_v, xi_v = _ladmm_block(
                v, z_v, xi_v, yt, yd, cxy.T @ u, tau, lambda_step, mu_y, n_steps_admm
            )
            total_inner += 2 * n_steps_admm
            last_move = (
                float(np.linalg.norm(u - u_old)),
                float(np.linalg.norm(v - v_old)),
            )
            if last_move[0] < tol and last_move[1] < tol:
                converged = True
                break
        all_converged &= converged
        last_moves.append(last_move)

        if np.all(u == 0.0) or np.all(v == 0.0):
            degenerate = True
        nu = np.linalg.norm(xd @ u)
        if nu > 0:
            u = u / nu
        nv = np.linalg.norm(yd @ v)
        if nv > 0:
            v = v / nv
        us.append(u)
        vs.append(v)
        rhos.append(_empirical_corr(data.x @ u, data.y @ v))

    return CcaEstimate(
        u_dirs=np.column_stack(us),
        v_dirs=np.column_stack(vs),
        rho=np.asarray(rhos),
        provenance=Provenance(
            algorithm="scca",
            penalty=float(tau),
            degenerate=degenerate,
            converged=all_converged,
            info={
                "total_inner_iterations": total_inner,
                "n_steps_admm": n_steps_admm,
                "recycle_duals": recycle_duals,
                "last_outer_moves": last_moves,
            },
        ),
    )


# ---------------------------------------------------------------------------
# graphical CCA
# ---------------------------------------------------------------------------

def gcca_fit(data: PairedDataset, lam, K, glasso_tol=1e-7, glasso_max_iter=5000):
    """Graphical-lasso plug-in CCA.

    Fits a sparse joint precision to the sample covariance, inverts it and
    runs exact CCA on the implied covariance blocks.  When the penalty kills
    every cross-view entry the correlations are all zero and the estimate is
    flagged degenerate.
    """
    if lam <= 0:
        raise ValueError(f"gcca penalty must be positive, got {lam}")
    _require_centred(data)
    _, cov = center_and_covariance(data)
    prec = glasso_fit(cov.joint(), lam, tol=glasso_tol, max_iter=glasso_max_iter)
    p = data.p
    sig = prec.sigma
    model = CovarianceModel(sxx=sig[:p, :p], sxy=sig[:p, p:], syy=sig[p:, p:])
    est = cca_from_covariance(model, K, algorithm="gcca")
    u = _unit_variance_columns(est.u_dirs, data.x)
    v = _unit_variance_columns(est.v_dirs, data.y)
    return CcaEstimate(
        u_dirs=u,
        v_dirs=v,
        rho=est.rho,
        provenance=Provenance(
            algorithm="gcca",
            penalty=float(lam),
            degenerate=bool(est.rho.size == 0 or est.rho[0] <= 1e-10),
            info={"glasso": prec.diagnostics},
        ),
    )


# ---------------------------------------------------------------------------
# dispatch and sweeps
# ---------------------------------------------------------------------------

def fit_estimator(spec: EstimatorSpec, data: PairedDataset):
    if spec.kind == "rcca":
        return rcca_fit(data, spec.penalty, spec.K, **spec.options)
    if spec.kind == "spls":
        return spls_fit(data, spec.penalty, spec.K, **spec.options)
    if spec.kind == "scca":
        return scca_fit(data, spec.penalty, spec.K, **spec.options)
    if spec.kind == "gcca":
        return gcca_fit(data, spec.penalty, spec.K, **spec.options)
    raise ValueError(f"unknown estimator kind {spec.kind!r}")


@dataclass
class TrajectoryResult:
    """Grid of estimates indexed by (penalty index, fold or full sample)."""

    kind: str
    grid: list
    folds: FoldPlan
    estimates: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def cell(self, penalty_index, fold="full"):
        return self.estimates.get((penalty_index, fold))

    def fold_estimates(self, penalty_index):
        return [self.estimates.get((penalty_index, v)) for v in range(self.folds.V)]

    def full_estimate(self, penalty_index):
        return self.estimates.get((penalty_index, "full"))


def _cell_seed(seed, kind, penalty_index, fold):
    fold_code = -1 if fold == "full" else int(fold)
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(KINDS.index(kind), int(penalty_index), fold_code + 1)
    )
    return int(ss.generate_state(1)[0])


def _fit_cell(args):
    kind, penalty, K, options, data, folds, penalty_index, fold, seed = args
    if fold == "full":
        train = data
    else:
        train, _ = split_fold(data, folds, fold)
    spec = EstimatorSpec(kind=kind, penalty=penalty, K=K, options=options)
    est = fit_estimator(spec, train)
    est.provenance.fold = fold
    est.provenance.seed = _cell_seed(seed, kind, penalty_index, fold)
    return est


def sweep_trajectory(kind, data: PairedDataset, grid, folds: FoldPlan, K,
                     options=None, seed=0, jobs=1):
    """Fit one estimator kind at every (penalty, training fold) and on the
    full sample.

    Per-cell solver failures are recorded in ``failures`` and never abort
    the sweep.  Cells are independent; results do not depend on execution
    order, and each cell's derived RNG seed is recorded in its provenance.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("penalty grid must be nonempty")
    diffs = np.diff(np.asarray(grid, dtype=float))
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("penalty grid must be strictly monotone")
    _require_centred(data)
    options = dict(options or {})

    cells = []
    for i, penalty in enumerate(grid):
        for fold in list(range(folds.V)) + ["full"]:
            cells.append((kind, penalty, K, options, data, folds, i, fold, seed))

    result = TrajectoryResult(kind=kind, grid=grid, folds=folds)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_try_fit_cell, cells))
    else:
        outcomes = [_try_fit_cell(args) for args in cells]

    for args, (est, err) in zip(cells, outcomes):
        key = (args[6], args[7])
        if est is not None:
            result.estimates[key] = est
        else:
            result.failures[key] = err
    return result


def _try_fit_cell(args):
    try:
        return _fit_cell(args), None
    except (GlassoConvergenceError, np.linalg.LinAlgError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# persistence: JSON manifest plus CSV direction matrices
# ---------------------------------------------------------------------------

def _write_matrix_csv(path, mat, row_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable"] + [f"comp_{k + 1}" for k in range(mat.shape[1])])
        for name, row in zip(row_names, mat):
            writer.writerow([name] + [repr(float(v)) for v in row])


def _read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = [r[0] for r in rows[1:]]
    mat = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return names, mat


def save_estimate(est: CcaEstimate, outdir, stem, x_names=None, y_names=None):
    """Persist an estimate as {stem}.json + {stem}_U.csv + {stem}_V.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prov = est.provenance
    manifest = {
        "algorithm": prov.algorithm,
        "penalty": prov.penalty,
        "fold": prov.fold,
        "seed": prov.seed,
        "degenerate": prov.degenerate,
        "converged": prov.converged,
        "K": est.k,
        "rho": [float(r) for r in est.rho],
    }
    with open(outdir / f"{stem}.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    x_names = x_names or [f"x{i + 1}" for i in range(est.u_dirs.shape[0])]
    y_names = y_names or [f"y{j + 1}" for j in range(est.v_dirs.shape[0])]
    _write_matrix_csv(outdir / f"{stem}_U.csv", est.u_dirs, x_names)
    _write_matrix_csv(outdir / f"{stem}_V.csv", est.v_dirs, y_names)


def load_estimate(outdir, stem):
    outdir = Path(outdir)
    with open(outdir / f"{stem}.json") as fh:
        manifest = json.load(fh)
    _, u = _read_matrix_csv(outdir / f"{stem}_U.csv")
    _, v = _read_matrix_csv(outdir / f"{stem}_V.csv")
    prov = Provenance(
        algorithm=manifest["algorithm"],
        penalty=manifest["penalty"],
        fold=manifest["fold"],
        seed=manifest["seed"],
        degenerate=manifest["degenerate"],
        converged=manifest["converged"],
    )
    return CcaEstimate(u_dirs=u, v_dirs=v, rho=np.asarray(manifest["rho"]), provenance=prov)
