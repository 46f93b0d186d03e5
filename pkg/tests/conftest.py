import pytest

from lazyb.model_graph import build_model, shipped_catalog
from lazyb.traffic import LengthDistribution, shipped_length_cdf


@pytest.fixture(scope="session")
def catalog():
    return shipped_catalog()


@pytest.fixture(scope="session")
def length_cdf():
    return shipped_length_cdf()


@pytest.fixture(scope="session")
def tiny_model():
    """2 encoder timesteps at 100 us, decoder cell at 200 us, saturation 2."""
    return build_model({
        "name": "tiny", "kind": "dynamic", "enc_timesteps": 2,
        "max_dec_timesteps": 4, "calibration_dec_timesteps": 2,
        "nodes": [
            {"kind": "encoder", "base_latency_us": 100, "saturation_batch": 2,
             "weight_group": 0},
            {"kind": "decoder", "base_latency_us": 200, "saturation_batch": 2,
             "weight_group": 1},
        ],
    })


@pytest.fixture(scope="session")
def rnn_model():
    """Single shared-weight recurrent cell: encoder and decoder in one
    weight group, so cross-timestep (cellular) batching is possible."""
    return build_model({
        "name": "rnn", "kind": "dynamic", "enc_timesteps": 1,
        "max_dec_timesteps": 4, "calibration_dec_timesteps": 2,
        "nodes": [
            {"kind": "encoder", "base_latency_us": 100, "saturation_batch": 2,
             "weight_group": 0},
            {"kind": "decoder", "base_latency_us": 100, "saturation_batch": 2,
             "weight_group": 0},
        ],
    })


@pytest.fixture(scope="session")
def mixed_model():
    """Static prologue + recurrent middle + static epilogue; no two distinct
    nodes share a weight group, so no cross-entry batching is ever legal."""
    return build_model({
        "name": "mixed", "kind": "dynamic", "enc_timesteps": 2,
        "max_dec_timesteps": 4, "calibration_dec_timesteps": 2,
        "nodes": [
            {"kind": "static", "base_latency_us": 120, "saturation_batch": 4},
            {"kind": "encoder", "base_latency_us": 80, "saturation_batch": 4,
             "weight_group": 0},
            {"kind": "decoder", "base_latency_us": 90, "saturation_batch": 4,
             "weight_group": 1},
            {"kind": "static", "base_latency_us": 60, "saturation_batch": 4},
        ],
    })


@pytest.fixture(scope="session")
def small_cdf():
    return LengthDistribution(((2, 0.5), (4, 1.0)))
