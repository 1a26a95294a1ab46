import pytest

from quintic_cascade import genset
from quintic_cascade.genset import build_combinatorial_model, dilate_to_integers


@pytest.fixture(scope="session")
def gset3():
    """Certified integer generation set with three generations."""
    model = build_combinatorial_model(3)
    rational = genset.perturb_to_nondegenerate(model, seed=1)
    integral, _ = dilate_to_integers(rational)
    return integral


@pytest.fixture(scope="session")
def gset4():
    model = build_combinatorial_model(4)
    rational = genset.perturb_to_nondegenerate(model, seed=1)
    integral, _ = dilate_to_integers(rational)
    return integral


@pytest.fixture(scope="session")
def gset5():
    model = build_combinatorial_model(5)
    rational = genset.perturb_to_nondegenerate(model, seed=1)
    integral, _ = dilate_to_integers(rational)
    return integral
