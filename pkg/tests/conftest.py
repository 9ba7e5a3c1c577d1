"""optdes 測試共用 fixture"""

import numpy as np
import pytest

from optdes_core import DispersionSpec
from optdes_core.config import TOL_ENV_VAR, clear_config_cache


@pytest.fixture(autouse=True)
def _default_config(monkeypatch):
    """每個測試都從 config.json 的預設值開始"""
    monkeypatch.delenv(TOL_ENV_VAR, raising=False)
    yield
    clear_config_cache()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec_k2():
    return DispersionSpec(k=2, d0=1.0, d1=2.0, d2=0.5)


@pytest.fixture
def spec_k3():
    return DispersionSpec(k=3, d0=1.0, d1=2.0, d2=0.4)
