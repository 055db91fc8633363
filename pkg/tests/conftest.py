import numpy as np
import pytest

from ccflab.ring import SUPPORTED_D


@pytest.fixture(params=SUPPORTED_D)
def d(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_ball(d, R):
    """Oracle: plain double loop over a generous coordinate box, floating modulus."""
    import math

    w = complex(0.5, math.sqrt(d) / 2) if d % 4 == 3 else complex(0, math.sqrt(d))
    lim = int(2 * R / math.sqrt(d)) + 3 + int(2 * R)
    out = set()
    for a in range(-lim, lim + 1):
        for b in range(-lim, lim + 1):
            if abs(a + b * w) <= R + 1e-9:
                out.add((a, b))
    return out


def lattice_array(d, R):
    """Oracle: complex values of all lattice points with |alpha| <= R, via a numpy grid."""
    import math

    import numpy as np

    w = complex(0.5, math.sqrt(d) / 2) if d % 4 == 3 else complex(0, math.sqrt(d))
    lim = int(2 * R / math.sqrt(d)) + 3 + int(2 * R)
    a, b = np.meshgrid(np.arange(-lim, lim + 1), np.arange(-lim, lim + 1))
    z = (a + b * w).ravel()
    return z[np.abs(z) <= R + 1e-9]
