import pytest

from coexqkd import experiments as ex


@pytest.fixture(scope="session")
def system():
    return ex.SystemModel()


@pytest.fixture(scope="session")
def cal(system):
    return ex.calibrate_all(system)


@pytest.fixture(scope="session")
def fiber_sweep(system, cal):
    return ex.run_coexistence_sweep(system, cal, ex.rop_grid(), ex.FIBER)


@pytest.fixture(scope="session")
def b2b_sweep(system, cal):
    return ex.run_coexistence_sweep(system, cal, ex.rop_grid(), ex.BACK_TO_BACK)
