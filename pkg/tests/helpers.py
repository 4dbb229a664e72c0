"""Independent oracles and randomized model generators shared by the tests."""

import numpy as np

from twoproc.matrices import WeightSequence
from twoproc.model import ModelSpec, RateFunction


def expm_series(M: np.ndarray, tol: float = 1e-16) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of the Taylor series.

    Independent of the RK4 path; accuracy well below 1e-13 for the small
    generators it is used on.
    """
    nrm = float(np.max(np.sum(np.abs(M), axis=0)))
    s = max(0, int(np.ceil(np.log2(max(nrm, 1e-300)))) + 1)
    T = M / (2.0 ** s)
    n = M.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    k = 1
    while True:
        term = term @ T / k
        out = out + term
        if float(np.max(np.abs(term))) < tol:
            break
        k += 1
    for _ in range(s):
        out = out @ out
    return out


def simpson_mean(fn, panels: int = 10_000) -> float:
    """Composite-Simpson average of fn over [0, 1]."""
    ts = np.linspace(0.0, 1.0, panels + 1)
    ys = np.asarray(fn(ts), dtype=float)
    if ys.shape == ():
        ys = np.full(panels + 1, float(ys))
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.sum(w * ys) / (3.0 * panels))


def random_trig_rate(rng: np.random.Generator, lo: float = 0.5, hi: float = 4.0) -> RateFunction:
    """Random nonnegative trigonometric rate (amplitudes below the constant)."""
    c = rng.uniform(lo, hi)
    n_terms = rng.integers(0, 3)
    budget = 0.9 * c
    harmonics = []
    for _ in range(n_terms):
        a = rng.uniform(-budget / 2, budget / 2)
        budget -= abs(a)
        harmonics.append((a, rng.choice(["sin", "cos"]), int(rng.integers(1, 3))))
    return RateFunction.trig(c, harmonics)


def random_equal_mu_spec(rng: np.random.Generator, dominated: bool = False) -> ModelSpec:
    """Random model with mu1 = mu2; dominated=True forces min mu > max lambda."""
    lam = random_trig_rate(rng, 0.5, 2.0)
    mu = random_trig_rate(rng, 0.5, 3.0)
    if dominated:
        grid = np.linspace(0.0, 1.0, 2048, endpoint=False)
        lam_max = float(np.max(lam(grid)))
        mu_min = float(np.min(mu(grid)))
        scale = (lam_max + 0.5) / max(mu_min, 1e-9)
        mu = RateFunction.trig(mu.constant * scale, [(h.amplitude * scale, h.kind, h.harmonic) for h in mu.harmonics])
    return ModelSpec(lam=lam, mu1=mu, mu2=mu)


def random_general_spec(rng: np.random.Generator) -> ModelSpec:
    """Random model with mu2 a pointwise fraction of mu1."""
    lam = random_trig_rate(rng)
    mu1 = random_trig_rate(rng, 1.0, 5.0)
    s = rng.uniform(0.3, 1.0)
    mu2 = RateFunction.trig(mu1.constant * s, [(h.amplitude * s, h.kind, h.harmonic) for h in mu1.harmonics])
    return ModelSpec(lam=lam, mu1=mu1, mu2=mu2)


def random_hetero_constants(rng: np.random.Generator):
    """Random (lambda, mu2, chi) for the constant-rate heterogeneous case."""
    lam = float(rng.uniform(0.5, 6.0))
    mu2 = float(rng.uniform(0.5, 4.0))
    chi = float(rng.uniform(0.05, 1.0))
    return lam, mu2, chi


def random_weights(rng: np.random.Generator) -> WeightSequence:
    return WeightSequence(
        epsilon=float(rng.uniform(0.02, 0.8)),
        delta1=float(rng.uniform(1.05, 2.5)),
        delta=float(rng.uniform(1.05, 2.5)),
    )


def dense_weighted_norm(x: np.ndarray, weights: WeightSequence) -> float:
    """||D T x||_1 via explicit dense matrices (oracle for the cumsum path)."""
    m = len(x)
    T = np.triu(np.ones((m, m)))
    D = np.diag(weights.d(m))
    return float(np.sum(np.abs(D @ T @ x)))


def stationary_vector(A: np.ndarray) -> np.ndarray:
    """Brute-force stationary distribution of a conservative generator."""
    n = A.shape[0]
    M = A.copy()
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(M, b)
