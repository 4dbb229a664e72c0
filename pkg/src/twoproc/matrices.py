"""Finite truncations of the queue's generator and its norm machinery.

`build_A` assembles the transposed intensity matrix A(t) of the forward
Kolmogorov system dp/dt = A(t) p on the first n states.  `build_B` assembles
the reduced system dz/dt = B(t) z + f(t) obtained by eliminating the empty
state through the normalization p00 = 1 - sum(z).  `build_transformed`
assembles D T B(t) T^-1 D^-1 where T is the upper-triangular all-ones matrix
(suffix sums) and D = diag(d) a positive weight sequence; in that similarity
frame the off-diagonals are nonnegative and column sums give decay bounds.

Truncation convention: the plain truncations simply cut the infinite pattern,
so the last column of A loses the arrival outflow (probability mass leaks at
the boundary) and checks on transformed matrices exclude the last two
columns.  `build_A(..., conservative=True)` removes the arrival rate from the
last state instead, which keeps the truncated chain honest; the solver
integrates that variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec


@dataclass(frozen=True)
class WeightSequence:
    """Weights d1=1, d2=epsilon, d3=1, d4=delta1, d_{k+1} = delta*d_k (k>=4)."""

    epsilon: float
    delta1: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.delta1 <= 1.0:
            raise ValueError("delta1 must exceed 1")
        if self.delta <= 1.0:
            raise ValueError("delta must exceed 1")

    def d(self, m: int) -> np.ndarray:
        """The first m weights as an array (d[0] is d1)."""
        if m < 1:
            raise ValueError("need at least one weight")
        out = np.ones(m)
        if m > 1:
            out[1] = self.epsilon
        if m > 3:
            out[3:] = self.delta1 * self.delta ** np.arange(m - 3)
        return out


def _require_size(n: int) -> None:
    if n < 5:
        raise ValueError("truncation must keep at least 5 states")


def build_A(spec: ModelSpec, t: float, n: int, conservative: bool = False) -> np.ndarray:
    """Truncated A(t) on states 0..n-1.

    Columns hold the outflows of each state: arrivals move 0->1, 1->3, 2->3
    and k->k+1 for k >= 3; the main server returns 1->0 and 3->2, the backup
    2->0 and 3->1; above state 3 any completion moves k->k-1 at rate
    mu = mu1 + mu2.  With `conservative=True` the last state's arrival rate
    is dropped so every column sums to zero.
    """
    _require_size(n)
    lam, mu1, mu2, mu = spec.eval_rates(t)
    A = np.zeros((n, n))
    A[0, 0] = -lam
    A[1, 0] = lam
    A[0, 1] = mu1
    A[1, 1] = -(lam + mu1)
    A[3, 1] = lam
    A[0, 2] = mu2
    A[2, 2] = -(lam + mu2)
    A[3, 2] = lam
    A[1, 3] = mu2
    A[2, 3] = mu1
    A[3, 3] = -(lam + mu)
    A[4, 3] = lam
    for k in range(4, n):
        A[k - 1, k] = mu
        A[k, k] = -(lam + mu)
        if k + 1 < n:
            A[k + 1, k] = lam
    if conservative:
        A[n - 1, n - 1] += lam
    return A


def build_B(spec: ModelSpec, t: float, n: int):
    """Truncated reduced matrix B(t) on n states plus forcing vector f(t).

    Reduced coordinates are z = (p10, p01, p11, p12, ...).  Row 0 is dense:
    eliminating p00 spreads -lambda across the whole row.
    """
    _require_size(n)
    lam, mu1, mu2, mu = spec.eval_rates(t)
    B = np.zeros((n, n))
    B[0, :] = -lam
    B[0, 0] = -(2.0 * lam + mu1)
    B[0, 2] = mu2 - lam
    B[1, 1] = -(lam + mu2)
    B[1, 2] = mu1
    B[2, 0] = lam
    B[2, 1] = lam
    B[2, 2] = -(lam + mu)
    B[2, 3] = mu
    for i in range(3, n):
        B[i, i - 1] = lam
        B[i, i] = -(lam + mu)
        if i + 1 < n:
            B[i, i + 1] = mu
    B[1, 0] = 0.0
    f = np.zeros(n)
    f[0] = lam
    return B, f


def upper_ones(n: int) -> np.ndarray:
    """The suffix-sum operator T (upper triangular, all ones)."""
    return np.triu(np.ones((n, n)))


def upper_ones_inv(n: int) -> np.ndarray:
    """T^-1: unit diagonal, -1 on the superdiagonal."""
    return np.eye(n) - np.diag(np.ones(n - 1), k=1)


def build_transformed(spec: ModelSpec, weights: WeightSequence, t: float, n: int) -> np.ndarray:
    """Closed-form D T B(t) T^-1 D^-1 truncation on n states.

    The pattern: head block

        [-(l+m1)   r12*(m1-m2)  r13*m2   .        ]
        [r21*l     -(l+m2)      .        r24*m2   ]
        [r31*l     .            -(l+m)   r34*m    ]
        [.         .            r43*l    -(l+m)   r45*m ]

    with r_ij = d_i/d_j, then a tridiagonal tail with sub-diagonal
    r_{k,k-1}*lambda and super-diagonal r_{k,k+1}*mu.
    """
    _require_size(n)
    lam, mu1, mu2, mu = spec.eval_rates(t)
    d = weights.d(n)
    M = np.zeros((n, n))
    M[0, 0] = -(lam + mu1)
    M[0, 1] = (d[0] / d[1]) * (mu1 - mu2)
    M[0, 2] = (d[0] / d[2]) * mu2
    M[1, 0] = (d[1] / d[0]) * lam
    M[1, 1] = -(lam + mu2)
    M[1, 3] = (d[1] / d[3]) * mu2
    M[2, 0] = (d[2] / d[0]) * lam
    M[2, 2] = -(lam + mu)
    M[2, 3] = (d[2] / d[3]) * mu
    for k in range(3, n):
        M[k, k - 1] = (d[k] / d[k - 1]) * lam
        M[k, k] = -(lam + mu)
        if k + 1 < n:
            M[k, k + 1] = (d[k] / d[k + 1]) * mu
    return M


def transform_product(spec: ModelSpec, weights: WeightSequence, t: float, n: int) -> np.ndarray:
    """The explicit product D T B(t) T^-1 D^-1 from the truncated B.

    Serves as the independent construction path for `build_transformed`;
    the two agree entrywise away from the last two columns, where the
    truncated T picks up boundary effects.
    """
    B, _ = build_B(spec, t, n)
    T = upper_ones(n)
    Tinv = upper_ones_inv(n)
    d = weights.d(n)
    M = T @ B @ Tinv
    return d[:, None] * M / d[None, :]


def weighted_norm(x, weights: WeightSequence) -> float:
    """The weighted l1 norm ||D T x||_1 = sum_i d_i |sum_{j>=i} x_j|."""
    x = np.asarray(x, dtype=float)
    suffix = np.cumsum(x[::-1])[::-1]
    return float(np.sum(weights.d(len(x)) * np.abs(suffix)))


def log_norm_l1(M: np.ndarray) -> float:
    """Logarithmic norm in l1: max over columns of diag + abs off-diag sum."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("log_norm_l1 expects a square matrix")
    col = np.sum(np.abs(M), axis=0) - np.abs(np.diag(M)) + np.diag(M)
    return float(np.max(col))


def log_norm_columns(M: np.ndarray) -> np.ndarray:
    """Per-column terms of the l1 logarithmic norm (max of these is the norm)."""
    M = np.asarray(M, dtype=float)
    return np.sum(np.abs(M), axis=0) - np.abs(np.diag(M)) + np.diag(M)


def format_matrix(M: np.ndarray) -> str:
    """Plain-text dense dump, row-major, 17 significant digits."""
    rows = [" ".join(f"{v:.17g}" for v in row) for row in np.asarray(M, dtype=float)]
    return "\n".join(rows) + "\n"
