import math

import pytest

from twoproc.matrices import WeightSequence
from twoproc.model import ModelSpec, RateFunction


@pytest.fixture(scope="session")
def ex1_spec() -> ModelSpec:
    """Light traffic: lambda = 1 + sin(2 pi t), mu1 = mu2 = 2."""
    return ModelSpec(
        lam=RateFunction.trig(1.0, [(1.0, "sin", 1)]),
        mu1=RateFunction.fixed(2.0),
        mu2=RateFunction.fixed(2.0),
    )


@pytest.fixture(scope="session")
def ex2_spec() -> ModelSpec:
    """Heavier traffic: lambda = 3(1 + sin(2 pi t)), mu1 = mu2 = 2."""
    return ModelSpec(
        lam=RateFunction.trig(3.0, [(3.0, "sin", 1)]),
        mu1=RateFunction.fixed(2.0),
        mu2=RateFunction.fixed(2.0),
    )


@pytest.fixture(scope="session")
def ex3_spec() -> ModelSpec:
    """Heterogeneous servers: mu1 = 6(1+cos), mu2 = 5(1+cos), lambda = 8(1+sin)."""
    return ModelSpec(
        lam=RateFunction.trig(8.0, [(8.0, "sin", 1)]),
        mu1=RateFunction.trig(6.0, [(6.0, "cos", 1)]),
        mu2=RateFunction.trig(5.0, [(5.0, "cos", 1)]),
    )


@pytest.fixture(scope="session")
def ex1_weights() -> WeightSequence:
    return WeightSequence(epsilon=0.01, delta1=2.0, delta=2.0)


@pytest.fixture(scope="session")
def ex2_weights() -> WeightSequence:
    d = 2.0 / math.sqrt(3.0)
    return WeightSequence(epsilon=0.001, delta1=d, delta=d)


@pytest.fixture(scope="session")
def ex3_weights() -> WeightSequence:
    return WeightSequence(epsilon=1.0 / 12.0, delta1=13.0 / 8.0, delta=math.sqrt(11.0 / 8.0))
