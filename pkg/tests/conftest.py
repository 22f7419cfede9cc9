import numpy as np
import pytest

from mmou import GeneratorMatrix, MmouSpec


@pytest.fixture
def chain_a() -> GeneratorMatrix:
    return GeneratorMatrix([[-1.0, 1.0], [2.0, -2.0]])


@pytest.fixture
def model_a(chain_a) -> MmouSpec:
    # two-state reference model: alpha=(1,3), gamma=(1,1), sigma2=(0.5,2),
    # m0=0, chain started in equilibrium
    return MmouSpec(chain_a, alpha=[1.0, 3.0], gamma=[1.0, 1.0], sigma2=[0.5, 2.0], m0=0.0)


@pytest.fixture
def model_1d() -> MmouSpec:
    return MmouSpec(GeneratorMatrix([[0.0]]), alpha=[2.0], gamma=[1.0], sigma2=[4.0], m0=0.0)


def random_irreducible_generator(rng: np.random.Generator, d: int) -> GeneratorMatrix:
    """Dense positive off-diagonal rates: strongly connected by construction."""
    q = rng.uniform(0.1, 2.0, size=(d, d))
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return GeneratorMatrix(q)
