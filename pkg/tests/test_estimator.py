import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selzip.estimator import (
    EstimatorState,
    InvalidSampleError,
    ThroughputEstimator,
    ThroughputSample,
    add_sample,
    current_estimate,
    reset,
)


def test_first_sample_seeds():
    s = add_sample(EstimatorState(), ThroughputSample(250_000, 1.0))
    assert current_estimate(s) == 250_000
    assert s.sample_count == 1


def test_one_step_ewma():
    s = EstimatorState(ewma=100_000.0, sample_count=5, decay=0.05)
    s = add_sample(s, ThroughputSample(200_000, 1.0))
    assert current_estimate(s) == pytest.approx(105_000)


def test_constant_stream_fixed_point():
    s = EstimatorState()
    for k in range(50):
        s = add_sample(s, ThroughputSample(131_072, 0.5))
        assert current_estimate(s) == 262_144


def test_prior_until_warmup():
    s = EstimatorState(prior=625_000, warmup=3)
    assert current_estimate(s) == 625_000
    s = add_sample(s, ThroughputSample(1000, 1))
    s = add_sample(s, ThroughputSample(1000, 1))
    assert current_estimate(s) == 625_000
    s = add_sample(s, ThroughputSample(1000, 1))
    assert current_estimate(s) == 1000


@pytest.mark.parametrize("b,e", [(100, 0), (100, -1), (0, 1)])
def test_rejects_bad_samples(b, e):
    with pytest.raises(InvalidSampleError):
        add_sample(EstimatorState(), ThroughputSample(b, e))


def test_reset_keeps_params():
    s = add_sample(EstimatorState(decay=0.2, prior=9.0), ThroughputSample(10, 1))
    r = reset(s)
    assert r.ewma is None and r.sample_count == 0 and r.decay == 0.2 and r.prior == 9.0
    assert current_estimate(r) == 9.0


@pytest.mark.parametrize("decay", [0.0, -0.1, 1.5])
def test_decay_range(decay):
    with pytest.raises(ValueError):
        EstimatorState(decay=decay)


@given(st.floats(1e3, 1e8), st.lists(st.tuples(st.integers(1, 10**7), st.floats(1e-4, 10)), max_size=40),
       st.floats(0.01, 1.0))
def test_bounded_by_prior_and_samples(prior, samples, decay):
    s = EstimatorState(prior=prior, decay=decay)
    rates = [prior]
    for b, e in samples:
        sample = ThroughputSample(b, e)
        s = add_sample(s, sample)
        rates.append(sample.rate)
        est = current_estimate(s)
        assert min(rates) * (1 - 1e-12) <= est <= max(rates) * (1 + 1e-12)


@pytest.mark.parametrize("n", [1, 5, 30, 100])
def test_step_response(n):
    b, decay = 250_000.0, 0.05
    s = EstimatorState(decay=decay)
    for _ in range(10):
        s = add_sample(s, ThroughputSample(b, 1.0))
    for _ in range(n):
        s = add_sample(s, ThroughputSample(2 * b, 1.0))
    assert current_estimate(s) == pytest.approx(b * (2 - (1 - decay) ** n), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_converges_under_noise(seed):
    rng = np.random.default_rng(seed)
    b = 625_000.0
    s = EstimatorState(decay=0.05)
    for _ in range(30):
        s = add_sample(s, ThroughputSample(b * (1 + rng.uniform(-0.1, 0.1)), 1.0))
    assert abs(current_estimate(s) - b) <= 0.1 * b


def test_shared_estimator_threadsafe():
    est = ThroughputEstimator(decay=0.5)

    def worker():
        for _ in range(500):
            est.observe(1000, 0.001)
            assert est.estimate() == pytest.approx(1e6)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert est.state.sample_count == 2000
    assert not est.observe(10, 0.0)
    assert est.rejected == 1
    est.reset()
    assert est.state.sample_count == 0 and est.estimate() == est.state.prior
