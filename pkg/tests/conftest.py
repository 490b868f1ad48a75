import numpy as np
import pytest

from deltabox.dynamics import TimeGrid, compute_trace
from deltabox.overlaps import build_overlap_set
from deltabox.spectral import BarrierConfig, solve_spectrum


@pytest.fixture(scope="session")
def small_asym():
    """Cheap asymmetric configuration used across module tests."""
    cfg = BarrierConfig(v0=10.0, kappa=0.4, box_half_length=20.0, n_modes=150)
    spectrum = solve_spectrum(cfg)
    return cfg, spectrum, build_overlap_set(spectrum)


@pytest.fixture(scope="session")
def small_sym():
    """Cheap symmetric configuration (kappa = 1) used across module tests."""
    cfg = BarrierConfig(
        v0=5.0, kappa=1.0, box_half_length=20.0, n_modes=150,
        scan_points_per_mode=128,
    )
    spectrum = solve_spectrum(cfg)
    return cfg, spectrum, build_overlap_set(spectrum)


@pytest.fixture(scope="session")
def small_asym_trace(small_asym):
    _, _, ov = small_asym
    return compute_trace(ov, TimeGrid(0.0, 10.0, 501))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
