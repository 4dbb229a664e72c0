"""Model definition for a Markovian two-processor heterogeneous service system.

The system has a fast ("main") server with rate mu1(t), a slow ("backup")
server with rate mu2(t) <= mu1(t), Poisson arrivals with rate lambda(t), and
fastest-server-first dispatch.  All rates are either constant or 1-periodic.

States are enumerated as

    0 <-> (0, 0)   empty system
    1 <-> (1, 0)   main busy
    2 <-> (0, 1)   backup busy
    k <-> (1, k-2) for k >= 3: main busy plus k-2 jobs on backup/queue

so index k >= 3 carries k-1 jobs in total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Resolution of the construction-time validation grid.  Nonnegativity and the
# service-rate ordering are checked on this grid, not symbolically.
VALIDATION_GRID = 10_000

_KINDS = ("sin", "cos")


@dataclass(frozen=True)
class Harmonic:
    """One trigonometric term `amplitude * sin/cos(2*pi*harmonic*t)`."""

    amplitude: float
    kind: str
    harmonic: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"harmonic kind must be one of {_KINDS}, got {self.kind!r}")
        if self.harmonic < 1 or self.harmonic != int(self.harmonic):
            raise ValueError("harmonic index must be a positive integer")


@dataclass(frozen=True)
class RateFunction:
    """A nonnegative, 1-periodic (or constant) rate.

    Two families are supported:

    * constant + finite trigonometric polynomial with integer harmonics,
      so the mean over one period is exactly the constant term;
    * piecewise-constant 1-periodic table `((breakpoint, value), ...)` with
      breakpoints in [0, 1) starting at 0, so the mean is an exact weighted
      average.

    Values are validated to be >= 0 on a dense grid at construction.
    """

    constant: float = 0.0
    harmonics: tuple[Harmonic, ...] = ()
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.table is not None:
            if self.constant != 0.0 or self.harmonics:
                raise ValueError("table form excludes constant/harmonics form")
            breaks = [b for b, _ in self.table]
            values = [v for _, v in self.table]
            if not breaks or breaks[0] != 0.0:
                raise ValueError("table breakpoints must start at 0.0")
            if any(b < 0.0 or b >= 1.0 for b in breaks):
                raise ValueError("table breakpoints must lie in [0, 1)")
            if sorted(set(breaks)) != breaks:
                raise ValueError("table breakpoints must be strictly increasing")
            if any(v < 0.0 for v in values):
                raise ValueError("table values must be nonnegative")
            return
        if self.constant < 0.0 and not self.harmonics:
            raise ValueError("constant rate must be nonnegative")
        grid = np.linspace(0.0, 1.0, VALIDATION_GRID, endpoint=False)
        lo = float(np.min(self(grid)))
        if lo < 0.0:
            raise ValueError(f"rate is negative on [0,1): min value {lo:g}")

    # -- constructors ---------------------------------------------------

    @classmethod
    def fixed(cls, value: float) -> "RateFunction":
        return cls(constant=float(value))

    @classmethod
    def trig(cls, constant: float, harmonics) -> "RateFunction":
        terms = tuple(
            h if isinstance(h, Harmonic) else Harmonic(float(h[0]), str(h[1]), int(h[2]))
            for h in harmonics
        )
        return cls(constant=float(constant), harmonics=terms)

    @classmethod
    def piecewise(cls, pairs) -> "RateFunction":
        return cls(table=tuple((float(b), float(v)) for b, v in pairs))

    # -- evaluation ------------------------------------------------------

    def __call__(self, t):
        """Evaluate at scalar or array `t >= 0`."""
        if self.table is not None:
            frac = np.asarray(t, dtype=float) % 1.0
            breaks = np.array([b for b, _ in self.table])
            values = np.array([v for _, v in self.table])
            idx = np.searchsorted(breaks, frac, side="right") - 1
            out = values[idx]
            return float(out) if np.isscalar(t) else out
        out = self.constant
        if self.harmonics:
            tt = np.asarray(t, dtype=float)
            acc = np.full_like(tt, float(self.constant))
            for h in self.harmonics:
                fn = np.sin if h.kind == "sin" else np.cos
                acc = acc + h.amplitude * fn(2.0 * math.pi * h.harmonic * tt)
            return float(acc) if np.isscalar(t) else acc
        return float(out) if np.isscalar(t) else np.full_like(np.asarray(t, dtype=float), out)

    def mean(self) -> float:
        """Exact mean over one period."""
        if self.table is None:
            return float(self.constant)
        breaks = [b for b, _ in self.table] + [1.0]
        return float(sum(v * (breaks[i + 1] - breaks[i]) for i, (_, v) in enumerate(self.table)))

    @property
    def is_constant(self) -> bool:
        if self.table is not None:
            return len(self.table) == 1
        return not self.harmonics


@dataclass(frozen=True)
class ModelSpec:
    """The rate triple (lambda, mu1, mu2) with mu2(t) <= mu1(t)."""

    lam: RateFunction
    mu1: RateFunction
    mu2: RateFunction

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, VALIDATION_GRID, endpoint=False)
        gap = np.asarray(self.mu1(grid)) - np.asarray(self.mu2(grid))
        worst = float(np.min(gap))
        if worst < -1e-12:
            raise ValueError(f"mu2(t) must not exceed mu1(t); violated by {-worst:g}")

    def eval_rates(self, t):
        """Return (lambda, mu1, mu2, mu) at time t; mu = mu1 + mu2."""
        lam = self.lam(t)
        m1 = self.mu1(t)
        m2 = self.mu2(t)
        return lam, m1, m2, m1 + m2

    def mean_rates(self):
        """Exact period means (lambda*, mu1*, mu2*, mu*)."""
        lam = self.lam.mean()
        m1 = self.mu1.mean()
        m2 = self.mu2.mean()
        return lam, m1, m2, m1 + m2

    @property
    def is_periodic(self) -> bool:
        return not (self.lam.is_constant and self.mu1.is_constant and self.mu2.is_constant)

    @property
    def is_equal_service(self) -> bool:
        """Whether mu1 and mu2 are structurally the same function."""
        return self.mu1 == self.mu2

    def averaged(self) -> "ModelSpec":
        """The homogeneous model with each rate replaced by its mean."""
        return ModelSpec(
            lam=RateFunction.fixed(self.lam.mean()),
            mu1=RateFunction.fixed(self.mu1.mean()),
            mu2=RateFunction.fixed(self.mu2.mean()),
        )

    def traffic_ok(self) -> bool:
        """Averaged traffic condition lambda* < mu1* + mu2*."""
        lam, _, _, mu = self.mean_rates()
        return lam < mu


# -- state enumeration ---------------------------------------------------


def state_encode(state) -> int:
    """Map a state pair (main-busy flag, backup/queue count) to its index."""
    busy, rest = state
    if busy not in (0, 1) or rest < 0:
        raise ValueError(f"invalid state {state!r}")
    if busy == 0:
        if rest > 1:
            raise ValueError(f"invalid state {state!r}: queue requires a busy main server")
        return 0 if rest == 0 else 2
    return 1 if rest == 0 else rest + 2


def state_decode(index: int):
    if index < 0:
        raise ValueError("state index must be nonnegative")
    if index == 0:
        return (0, 0)
    if index == 1:
        return (1, 0)
    if index == 2:
        return (0, 1)
    return (1, index - 2)


def job_count(index: int) -> int:
    """Number of jobs in the system for a state index."""
    if index < 0:
        raise ValueError("state index must be nonnegative")
    if index == 0:
        return 0
    if index <= 2:
        return 1
    return index - 1


def job_counts(n: int) -> np.ndarray:
    """Vector of job counts for indices 0..n-1."""
    counts = np.arange(n, dtype=float) - 1.0
    counts[0] = 0.0
    if n > 1:
        counts[1] = 1.0
    if n > 2:
        counts[2] = 1.0
    return counts


def state_label(index: int) -> str:
    busy, rest = state_decode(index)
    return f"p{busy}{rest}"
