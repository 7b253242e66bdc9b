"""
Pytest fixtures and configuration
"""

import shutil
import tempfile
from pathlib import Path

import pytest

from aoinf.config import ExperimentConfig
from aoinf.model import ModelParams, StateSpace
from aoinf.solver import SolveConfig, rvi_solve
from aoinf.transform import build_smdp_kernel


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing"""
    tmp = tempfile.mkdtemp()
    yield Path(tmp)
    shutil.rmtree(tmp)


@pytest.fixture
def default_params():
    """Baseline numerical setting with p_T=0.6, p_O=0.7"""
    return ModelParams()


@pytest.fixture(scope="session")
def mini_params():
    """Δ̂=5, P=4, W=2, unit durations, L_O=2"""
    return ModelParams(
        aoinf_cap=5,
        period=4,
        window=2,
        compute_dur=1,
        tx_dur=1,
        upload_dur=1,
        ground_infer_dur=1,
        p_tx=0.6,
        p_offload=0.7,
    )


@pytest.fixture
def mini_config(mini_params, temp_dir):
    """Default configuration on the mini instance, writing into temp_dir"""
    config = ExperimentConfig.default()
    config.model = mini_params
    config.output_dir = temp_dir / "out"
    config.simulation.horizon = 2000
    config.sweep.p_tx = [0.2, 0.8]
    config.sweep.p_offload = [0.4]
    return config


@pytest.fixture(scope="session")
def mini_solution(mini_params):
    return rvi_solve(mini_params, SolveConfig())


@pytest.fixture(scope="session")
def default_kernel():
    """SMDP kernel of the 50,400-state baseline instance (built once per session)"""
    return build_smdp_kernel(StateSpace(ModelParams()))


@pytest.fixture(scope="session")
def default_solution(default_kernel):
    """Optimal solve of the baseline instance at θ=0.5, ε=1e-9 (run once per session)"""
    return rvi_solve(ModelParams(), SolveConfig(), kernel=default_kernel)
