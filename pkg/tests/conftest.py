import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_heatmap(rng, height, width):
    """Normalized random heatmap (independent of the library softmax path)."""
    raw = rng.uniform(0.1, 1.0, size=(height, width))
    return raw / raw.sum()


def random_psd(rng, eig_low, eig_high):
    """Random symmetric PSD 2x2 with eigenvalues drawn in [eig_low, eig_high]."""
    theta = rng.uniform(0.0, np.pi)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    eigs = rng.uniform(eig_low, eig_high, size=2)
    mat = rot @ np.diag(eigs) @ rot.T
    sym = (mat + mat.T) / 2.0
    sym[1, 0] = sym[0, 1]
    return sym


def media_frames(frames):
    """Quantize float frames through the 8-bit media representation."""
    from vcmcodec.imageio import from_uint8, to_uint8

    return np.stack([from_uint8(to_uint8(f)) for f in frames])
