import numpy as np
import pytest

from ehrlich import EhrlichParams, generate


@pytest.fixture(scope="session")
def inst_4_16():
    """Small instance used across solver tests: Ehr(4,16)-2-2-2, seed 5."""
    return generate(EhrlichParams.from_name("Ehr(4,16)-2-2-2", seed=5))


@pytest.fixture(scope="session")
def inst_32_32():
    """Mid-size instance: Ehr(32,32)-4-4-4, seed 7."""
    return generate(EhrlichParams.from_name("Ehr(32,32)-4-4-4", seed=7))


@pytest.fixture(scope="session")
def inst_4_8():
    """Tiny exhaustively-enumerable instance: Ehr(4,8)-2-2-2, seed 3."""
    return generate(EhrlichParams.from_name("Ehr(4,8)-2-2-2", seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240816)
