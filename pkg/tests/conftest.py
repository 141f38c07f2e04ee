import numpy as np
import pytest

from sentiscore.textprep import Preprocessor


@pytest.fixture
def toy_prep():
    return Preprocessor(frozenset({"充电", "充电桩", "很", "方便", "好用", "太慢"}), frozenset({"的", "是", "在"}))


@pytest.fixture
def rng64():
    return np.random.default_rng(20240607)
