import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).parent))

from iplr.problem import (CompletionOperator, GeneralOperator, SdpProblem,
                          build_mc_problem, sample_omega)


def make_completion_problem(nhat=4, m=6, seed=0, values=None):
    """Small completion SDP with random observed values."""
    rng = np.random.default_rng(seed)
    pairs = sample_omega(nhat, m, seed + 11)
    if values is None:
        values = rng.standard_normal(m)
    entries = [(int(s), int(t), float(v)) for (s, t), v in zip(pairs, values)]
    return build_mc_problem(entries, nhat)


def make_general_problem(n=6, m=4, seed=0, density=0.4, spd_cost=True):
    """Small general-operator SDP with random sparse symmetric constraints."""
    rng = np.random.default_rng(seed)
    mats = []
    for i in range(m):
        M = sp.random(n, n, density=density, random_state=seed + 7 * i + 1)
        mats.append(M + M.T)
    op = GeneralOperator(mats, n)
    if spd_cost:
        G = rng.standard_normal((n, n))
        C = sp.csr_matrix(G @ G.T / n + 2.0 * np.eye(n))
    else:
        C = sp.csr_matrix(rng.standard_normal((n, n)))
        C = sp.csr_matrix(0.5 * (C + C.T))
    b = rng.standard_normal(m)
    return SdpProblem(n=n, m=m, constraints=op, C=C, b=b)


def random_point(problem, r=2, seed=3, scale=1.0):
    rng = np.random.default_rng(seed)
    U = scale * rng.standard_normal((problem.n, r))
    y = scale * rng.standard_normal(problem.m)
    return U, y


@pytest.fixture
def rng():
    return np.random.default_rng(0)
