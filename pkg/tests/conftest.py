import numpy as np
import pytest

from roughcal.kernels import SoeApprox, generate_soe

#: Published N=8 node/weight set (H=0.07, tau=1/128, T=1).
TABLE_N8_NODES = np.array(
    [0.161212, 0.025989, 0.004190, 1.0, 6.203015, 38.477401, 238.675916, 1480.51040]
)
TABLE_N8_WEIGHTS = np.array(
    [0.404082, 0.184353, 0.084107, 0.885703, 1.941367, 4.255266, 9.327086, 20.443970]
)

#: Published N=4 node/weight set for the same configuration.
TABLE_N4_NODES = np.array([0.047108, 1.0, 21.227784, 450.618823])
TABLE_N4_WEIGHTS = np.array([0.398569, 1.482765, 5.516218, 20.521561])


@pytest.fixture(scope="session")
def soe_n8():
    return SoeApprox(TABLE_N8_NODES, TABLE_N8_WEIGHTS)


@pytest.fixture(scope="session")
def soe_n4():
    return SoeApprox(TABLE_N4_NODES, TABLE_N4_WEIGHTS)


@pytest.fixture(scope="session")
def soe_smile():
    """Certified kernel for quick simulation tests (H=0.07, coarse eps)."""
    return generate_soe(0.07, 1 / 64, 0.5, 1e-2)
