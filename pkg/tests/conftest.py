import numpy as np
import pytest

from filacwe.synth import SynthSpec, generate, write_case


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """A default-size synthetic case written to disk once per session."""
    out = tmp_path_factory.mktemp("synth")
    case = generate(SynthSpec(seed=11))
    write_case(case, out)
    return out, case
