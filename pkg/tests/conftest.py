import numpy as np
import pytest

from ccbox import build_table, builtin_family


@pytest.fixture(scope="session")
def families():
    return {name: builtin_family(name)
            for name in ("heisenberg", "grushin", "martinet", "wright",
                         "nonsmooth_step2")}


@pytest.fixture(scope="session")
def tables(families):
    return {name: build_table(fam) for name, fam in families.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.Philox(key=42))
