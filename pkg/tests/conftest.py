import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qtbtc.imageio import GrayImage  # noqa: E402

DATA = Path(__file__).parent / "data"

ACCEPTANCE_LINES: list[str] = []


def to_gray(arr) -> GrayImage:
    arr = np.asarray(arr)
    if arr.ndim == 3:
        from skimage.color import rgb2gray

        arr = np.floor(rgb2gray(arr[..., :3]) * 255 + 0.5)
    elif arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    return GrayImage.from_array(arr.astype(np.uint8))


def natural_image(name: str) -> GrayImage:
    skdata = pytest.importorskip("skimage.data")
    return to_gray(getattr(skdata, name)())


@pytest.fixture(scope="session")
def camera() -> GrayImage:
    return natural_image("camera")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
