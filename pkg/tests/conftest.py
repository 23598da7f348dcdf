import numpy as np
import pytest

from hermflow import GaussianFrame, ScalarField, VectorField, build_frame


@pytest.fixture(scope="session")
def frame_1d():
    """Unit-scale 1D frame (a=1, kappa=1, lam=2 gives sigma=1)."""
    return build_frame(a=1.0, kappa=1.0, lam=2.0, dim=1, degree=16)


@pytest.fixture(scope="session")
def frame_1d_fine():
    return build_frame(a=1.0, kappa=1.0, lam=2.0, dim=1, degree=24)


@pytest.fixture(scope="session")
def frame_2d():
    return build_frame(a=1.0, kappa=1.0, lam=2.0, dim=2, degree=10)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def unit_field(frame: GaussianFrame) -> ScalarField:
    coeffs = np.zeros(frame.n_basis)
    coeffs[0] = 1.0
    return ScalarField(frame, coeffs=coeffs)


def mode(frame: GaussianFrame, index: int, amplitude: float = 1.0) -> ScalarField:
    coeffs = np.zeros(frame.n_basis)
    coeffs[index] = amplitude
    return ScalarField(frame, coeffs=coeffs)


def zero_velocity(frame: GaussianFrame) -> VectorField:
    return VectorField.zero(frame)
