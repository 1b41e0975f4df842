import hypothesis
import numpy as np
import pytest

from flsched.model import ClientProfile, Population, SystemConfig

hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def example_profile():
    # 1 GHz client with the reference radio numbers: G(h2=1e-10) ~ 6.658e7 bit/s
    return ClientProfile(cpu_freq=1e9, cycles_per_bit=10.0, capacitance=1e-28,
                         tx_power=0.1, model_size=2.4e5, data_size=1.2e6,
                         energy_budget=1.5, local_iters=5)


@pytest.fixture
def example_config():
    return SystemConfig(num_clients=2, num_rounds=300, frame_len=30, num_frames=10,
                        bandwidth=1e7, min_ratio=0.01, noise_power=1e-13,
                        accuracy_coeff=1.7e-8)


@pytest.fixture
def twin_population(example_profile):
    return Population([example_profile, example_profile])


def random_profile(rng: np.random.Generator) -> ClientProfile:
    return ClientProfile(
        cpu_freq=rng.uniform(1e7, 1e9),
        cycles_per_bit=rng.uniform(1.0, 10.0),
        capacitance=1e-28,
        tx_power=rng.uniform(0.01, 0.1),
        model_size=2.4e5,
        data_size=rng.uniform(1.2e6, 6.0e6),
        energy_budget=1.5,
        local_iters=5,
    )
