"""Shared fixtures. The compiled simulation kernels JIT on first use, so
timed tests request ``jit_warm`` to keep compilation out of their budget."""

import numpy as np
import pytest


@pytest.fixture(scope="session")
def jit_warm():
    from gaitforge.gait import GaitParams
    from gaitforge.sim import LocomotionEnv

    env = LocomotionEnv()
    env.run_fixed_gait_episode(GaitParams(), seed=0, steps=3)
    env.run_fixed_gait_episode(
        GaitParams(frequency_hz=2.0, swing_ratio=0.0,
                   phase_offsets=(0.0, 0.0, 0.0)),
        seed=0, steps=2)
    return True


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
