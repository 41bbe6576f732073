"""Pytest configuration and fixtures."""
import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.main import app
from app.services.optics_sim import OpticsParams
from app.services.session import SessionConfig

REFERENCE_MU = 0.1
REFERENCE_M = 1024


@pytest.fixture(scope="function")
def client():
    """Create a test client; the lifespan runs startup validation."""
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture(scope="function")
def rng():
    """Seeded generator, fresh per test."""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def reference_optics():
    """mu = 0.1, eta_d = 0.8, p_d = 1e-8."""
    return OpticsParams(mu=REFERENCE_MU, eta_d=0.8, p_d=1e-8)


@pytest.fixture(scope="session")
def small_session_config(reference_optics):
    """Fast session at the reference operating point."""
    return SessionConfig(N=20000, m=16, optics=reference_optics, s=256, master_seed=7)
