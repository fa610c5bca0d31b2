"""Shared fixtures and independent oracles."""

import math

import numpy as np
import pytest

from rfexperts import channel, data, expert
from rfexperts.mcp import Registry, make_input_schema


def bessel_j0(x, terms: int = 60):
    """Series-expansion J0 oracle: sum_k (-1)^k (x^2/4)^k / (k!)^2."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    term = np.ones_like(x)
    quarter_sq = (x * x) / 4.0
    for k in range(terms):
        if k > 0:
            term = term * (-quarter_sq) / (k * k)
        acc = acc + term
    return acc


def constant_expert(n: int, logit: float) -> expert.MlpWeights:
    """Weights whose forward output is sigmoid(logit) for every input."""
    return expert.MlpWeights(
        W1=np.zeros((2, n)),
        b1=np.zeros(2),
        W2=np.zeros((2, 2)),
        b2=np.zeros(2),
        W3=np.zeros((1, 2)),
        b3=np.array([float(logit)]),
    )


def make_registry(n: int = 8, logits=None) -> Registry:
    """Registry with one constant expert per attribute."""
    logits = logits or {name: 0.0 for name in channel.ATTRIBUTES}
    registry = Registry()
    for name in channel.ATTRIBUTES:
        registry.register_expert(
            name=name,
            description=f"{name} test stub",
            input_schema=make_input_schema(n),
            weights=constant_expert(n, logits.get(name, 0.0)),
        )
    return registry


def toy_level_dataset(
    count: int, n: int = 8, seed: int = 0, attribute_id: str = "detect_los"
) -> data.AttributeDataset:
    """Linearly separable toy set: positive windows sit above magnitude 1,
    negative windows below 0.5."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(count):
        label = i % 2
        base = 1.2 if label else 0.3
        features = base + 0.1 * rng.uniform(size=n)
        examples.append(
            data.LabeledExample(
                features=features,
                label=label,
                scene=channel.SceneSpec(
                    k_factor=0.0, doppler_norm=0.1, seed=seed + i, n=n
                ),
            )
        )
    return data.AttributeDataset(attribute_id=attribute_id, examples=tuple(examples))


@pytest.fixture(scope="session")
def scene_pool_small():
    """Shared 600-scene labeled pool for dataset construction tests."""
    return channel.build_scene_pool(600, seed=404)


@pytest.fixture()
def stub_registry():
    return make_registry()


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))
