import numpy as np
import pytest

from delaywarp import DdeSystem, sinusoid_delay

GU_A0 = np.array([[-2.0, 0.0], [0.0, -0.9]])
GU_A1 = np.array([[-1.0, 0.0], [-1.0, -1.0]])


def make_sin_delay(eps, tau0=3.0, omega=5.0):
    return sinusoid_delay(tau0, eps, omega)


@pytest.fixture
def sin_delay():
    return make_sin_delay


@pytest.fixture
def gu_system():
    return DdeSystem(A0=GU_A0, A1=GU_A1, history=lambda t: np.ones(2))
