import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mefeel.errors import ConfigurationError
from mefeel.nncore import ArchConfig
from mefeel.radio import (INFEASIBLE, CostModel, DeviceProfile, latency, rate, required_bandwidth,
                          sample_alphas, sample_channels, t_local, t_up)


def snr_profile(snr, alpha=0.001, size=600, batch=10):
    # tx_power / noise_var chosen so that P|h|^2/sigma^2 == snr at unit gain
    return DeviceProfile(alpha, size, batch, tx_power=snr * 1e-3, noise_var=1e-3)


def test_channel_mean_and_support():
    ch = sample_channels(100_000, seed=3, round_index=0)
    assert abs(ch.gain.mean() - 1.0) < 0.02
    assert np.all(ch.gain > 0)


def test_channel_determinism():
    a, b = sample_channels(50, 1, 7), sample_channels(50, 1, 7)
    np.testing.assert_array_equal(a.gain, b.gain)
    assert not np.array_equal(a.gain, sample_channels(50, 1, 8).gain)


def test_rate_examples():
    assert rate(1.0, snr_profile(1.0), 1.0) == pytest.approx(1.0)
    assert rate(1.0, snr_profile(3.0), 1.0) == pytest.approx(2.0)
    assert rate(0.0, snr_profile(3.0), 1.0) == 0.0


def test_t_local_examples():
    cost = CostModel((0.25, 0.5), (1e5, 2e5))
    p = DeviceProfile(0.001, 600, 10)
    assert t_local(p, cost, 1) == pytest.approx(0.015)
    doubled = CostModel((0.5, 1.0), (1e5, 2e5))
    assert t_local(p, doubled, 1) == pytest.approx(2 * t_local(p, cost, 1))
    assert t_local(p, cost, 2) > t_local(p, cost, 1)
    with pytest.raises(ValueError):
        t_local(p, cost, 3)


def test_t_up_examples():
    cost = CostModel((0.5, 1.0), (1e6, 2e6))
    assert t_up(cost, 1, 1e6) == pytest.approx(1.0)
    assert t_up(cost, 1, 0.0) == INFEASIBLE
    assert t_up(cost, 2, 1e6) > t_up(cost, 1, 1e6)


def test_required_bandwidth_examples():
    # compute time = 0.5 * 10 * 1.0 / 1 = 5 s
    cost = CostModel((1.0,), (1e6,))
    p = snr_profile(3.0, alpha=0.5, size=10, batch=1)
    assert t_local(p, cost, 1) == 5.0
    assert required_bandwidth(p, cost, 1.0, 1, 15.0) == pytest.approx(50_000.0)
    assert required_bandwidth(p, cost, 1.0, 1, 5.0) == INFEASIBLE
    cost2 = CostModel((1.0,), (2e6,))
    assert required_bandwidth(p, cost2, 1.0, 1, 15.0) == pytest.approx(100_000.0)


def test_required_bandwidth_boundary_exactly_at_threshold():
    cost = CostModel((1.0,), (1e6,))
    p = DeviceProfile(0.25, 60, 1)  # 15 s of compute
    assert t_local(p, cost, 1) == 15.0
    assert required_bandwidth(p, cost, 1.0, 1, 15.0) == INFEASIBLE


profiles = st.builds(DeviceProfile, alpha=st.floats(1e-4, 0.1), dataset_size=st.integers(1, 2000),
                     batch_size=st.integers(1, 64), tx_power=st.floats(0.01, 10),
                     noise_var=st.floats(1e-5, 1e-1))
costs = st.lists(st.floats(0.01, 2.0), min_size=1, max_size=6).map(
    lambda inc: CostModel(tuple(np.cumsum(inc)), tuple(np.cumsum(inc) * 1e6)))


@given(profiles, costs, st.floats(1e-3, 10), st.floats(0.1, 100), st.data())
def test_feasibility_roundtrip(p, cost, gain, gamma, data):
    m = data.draw(st.integers(1, cost.num_exits))
    b = required_bandwidth(p, cost, gain, m, gamma)
    assume(math.isfinite(b))
    assert latency(p, cost, gain, m, b) == pytest.approx(gamma, rel=1e-9)


@given(profiles, costs, st.floats(1e-3, 10), st.floats(0.1, 100))
def test_required_bandwidth_monotone_in_exit(p, cost, gain, gamma):
    bs = [required_bandwidth(p, cost, gain, m, gamma) for m in range(1, cost.num_exits + 1)]
    for a, b in zip(bs, bs[1:]):
        if math.isfinite(b):
            assert a <= b


@given(profiles, costs, st.floats(1e-3, 10), st.floats(0.1, 100))
def test_required_bandwidth_decreasing_in_gain(p, cost, gain, gamma):
    b1 = required_bandwidth(p, cost, gain, 1, gamma)
    b2 = required_bandwidth(p, cost, gain * 2, 1, gamma)
    assume(math.isfinite(b1))
    assert b2 < b1


def test_cost_model_from_arch():
    arch = ArchConfig(10, (8, 8, 8), (1, 2, 3), 4)
    cost = CostModel.from_arch(arch)
    assert cost.g1[-1] == 1.0
    # exit 1: trunk.1 (10*8+8) + head.1 (8*4+4)
    assert cost.g2[0] == 32 * (88 + 36)
    assert cost.g2[-1] == 32 * arch.param_count()
    assert all(b > a for a, b in zip(cost.g1, cost.g1[1:]))


@pytest.mark.parametrize("g1,g2", [((1.0, 1.0), (1.0, 2.0)), ((1.0,), (1.0, 2.0)),
                                   ((0.0, 1.0), (1.0, 2.0)), ((), ())])
def test_cost_model_invalid(g1, g2):
    with pytest.raises(ConfigurationError):
        CostModel(g1, g2)


def test_profile_invalid():
    with pytest.raises(ConfigurationError):
        DeviceProfile(0.0, 10)
    with pytest.raises(ConfigurationError):
        DeviceProfile(0.1, 10, batch_size=0)


def test_alphas_log_uniform_range():
    a = sample_alphas(10_000, 0.001, 0.05, seed=1)
    assert a.min() >= 0.001 and a.max() <= 0.05
    # median of a log-uniform draw sits at the geometric mean
    assert np.median(a) == pytest.approx(math.sqrt(0.001 * 0.05), rel=0.05)
