import numpy as np
import pytest
from scipy import ndimage

from camlens.synth import SynthSpec, synthesize


def smooth_image(rng, w, h, channels=3, sigma=2.0, contrast=0.2):
    """Band-limited random texture centred on 0.5."""
    noise = rng.normal(size=(h, w, channels))
    img = ndimage.gaussian_filter(noise, (sigma, sigma, 0), mode="wrap")
    img = 0.5 + contrast * img / img.std()
    return np.clip(img, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sweep_data():
    """Synthetic scenes with hidden Gaussian (5, 1.2) and phase-0 decimation."""
    ds, _, _ = synthesize(SynthSpec(n_scenes=4, gauss=(5, 1.2), seed=5))
    return ds


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
