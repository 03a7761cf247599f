import numpy as np
import pytest

from nvmbench.profiles import (
    CbramCurrent,
    EccConfig,
    EnduranceModel,
    EraseModel,
    LatencyModel,
    LogisticCurve,
    TechnologyProfile,
    Technology,
    default_profile,
)


@pytest.fixture(scope="session")
def profiles():
    return {t.value: default_profile(t) for t in Technology}


def make_hot_profile(p_max=0.02, steepness=0.012, midpoint=2800.0, ecc=True,
                     wvw=False, noise_sigma=0.15):
    """CBRAM-like profile whose error onset sits at tiny wear, for fast tests.

    The curve is steep enough that runs up to half the rated cycles stay
    error-free while onset-region runs err generously."""
    return TechnologyProfile(
        technology=Technology.CBRAM,
        current=CbramCurrent(base=1.0, slope_per_bit=0.48, noise_sigma=noise_sigma),
        latency=LatencyModel(
            base_write_cycles=100,
            read_cycles=10,
            wvw_enabled=wvw,
            retry_prob=LogisticCurve(p_max=0.5, steepness=1e-3, midpoint_cycles=3000.0) if wvw else None,
            wvw_attempt_cycles=100 if wvw else 0,
            max_attempts=8 if wvw else 1,
        ),
        endurance=EnduranceModel(
            rated_cycles=4000,
            flip_prob=LogisticCurve(p_max=p_max, steepness=steepness, midpoint_cycles=midpoint),
        ),
        erase=EraseModel(),
        ecc=EccConfig(enabled=ecc),
    ).validate()


@pytest.fixture
def hot_profile():
    return make_hot_profile()


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
