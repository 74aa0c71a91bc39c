import numpy as np
import pytest

from blockrdh.image import GrayImage


def synthetic_cover(h, w, sigma=1.0, seed=0, lo=20, hi=230):
    """Gradient plus texture plus gaussian noise, clipped to 8 bits."""
    rng = np.random.default_rng(seed)
    base = np.add.outer(np.linspace(lo, hi, h), np.linspace(0, 25, w))
    tex = 8 * np.sin(np.add.outer(np.arange(h) / 11.0, np.arange(w) / 7.0))
    data = np.clip(base + tex + rng.normal(0, sigma, (h, w)), 0, 255)
    return GrayImage(w, h, 8, data.astype(np.int32))


def noise_cover(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return GrayImage(w, h, 8, rng.integers(0, 256, (h, w)).astype(np.int32))


@pytest.fixture
def cover96():
    return synthetic_cover(96, 96, sigma=1.2, seed=42)


@pytest.fixture
def cover128():
    return synthetic_cover(128, 128, sigma=2.0, seed=9)
