import numpy as np
import pytest

from regcca.datamodel import CovarianceModel


def random_pd(rng, d, cond_floor=0.05):
    """Well-conditioned random PD matrix."""
    a = rng.standard_normal((d, d + 3))
    m = a @ a.T / (d + 3)
    return m + cond_floor * np.eye(d)


def random_joint_covariance(rng, p, q, corr_scale=0.6):
    """Random PD joint covariance with a nontrivial cross block.

    Built as a Gram matrix of a random factor, so positive definiteness is
    automatic; corr_scale shrinks the cross block to keep correlations away
    from one.
    """
    d = p + q
    a = rng.standard_normal((d, d + 4)) / np.sqrt(d + 4)
    joint = a @ a.T + 0.1 * np.eye(d)
    joint[:p, p:] *= corr_scale
    joint[p:, :p] *= corr_scale
    return CovarianceModel(sxx=joint[:p, :p], sxy=joint[:p, p:], syy=joint[p:, p:])


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q[:, :k]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
