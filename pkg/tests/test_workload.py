import math

import pytest

from deskml.errors import ValidationError
from deskml.types import GIB, Dataset, MetricOrder
from deskml.workload import (
    WorkloadProfile,
    checkpoint_digest,
    evaluation_score,
    infer_latency_ms,
    infer_output,
)


def test_curve_starts_at_zero():
    p = WorkloadProfile(a_max=0.9, rate_k=0.3, noise_sigma=0.0)
    assert p.curve(0) == 0.0
    assert p.metric_value(0, seed=1) == 0.0


def test_curve_approaches_ceiling():
    p = WorkloadProfile(a_max=0.9, rate_k=0.3, noise_sigma=0.0, steps_total=40)
    final = p.curve(p.steps_total)
    assert abs(p.a_max - final) <= math.exp(-p.rate_k * p.steps_total)


def test_curve_monotone():
    p = WorkloadProfile(a_max=1.0, rate_k=0.1)
    values = [p.curve(s) for s in range(50)]
    assert values == sorted(values)
    assert all(0 <= v <= 1 for v in values)


def test_noise_is_keyed_by_seed_and_step():
    p = WorkloadProfile(noise_sigma=0.1)
    assert p.metric_value(3, seed=5) == p.metric_value(3, seed=5)
    assert p.metric_value(3, seed=5) != p.metric_value(3, seed=6)
    assert p.metric_value(3, seed=5) != p.metric_value(4, seed=5)


def test_memory_ramp_and_oom_step():
    p = WorkloadProfile(peak_memory=5 * GIB, steps_total=20)
    assert p.memory_at(0) == 0
    assert p.memory_at(20) == 5 * GIB

    def oracle(peak, alloc, steps):
        for s in range(1, steps + 1):
            if (peak * s) // steps > alloc:
                return s
        return None

    assert p.oom_step(4 * GIB) == oracle(5 * GIB, 4 * GIB, 20)
    assert p.oom_step(5 * GIB) is None
    assert WorkloadProfile(peak_memory=3 * GIB, steps_total=20).oom_step(4 * GIB) is None


def test_profile_validation():
    with pytest.raises(ValidationError):
        WorkloadProfile(a_max=0.0)
    with pytest.raises(ValidationError):
        WorkloadProfile(a_max=1.2)
    with pytest.raises(ValidationError):
        WorkloadProfile(rate_k=0.0)
    with pytest.raises(ValidationError):
        WorkloadProfile(steps_total=0)


def test_payload_round_trip():
    p = WorkloadProfile(a_max=0.7, rate_k=0.2, steps_total=15, pause_every=3,
                        response={"param": "lr", "best": 0.1})
    q = WorkloadProfile.from_payload(p.to_payload())
    assert q == p


def test_response_degrades_off_best():
    p = WorkloadProfile(a_max=0.9, response={"param": "lr", "best": 0.1,
                                             "penalty": 0.2})
    best = p.effective_a_max({"lr": 0.1})
    off = p.effective_a_max({"lr": 0.001})
    assert best == 0.9
    assert off < best
    # unknown/absent param keeps the ceiling
    assert p.effective_a_max({}) == 0.9


def test_checkpoint_digest_pure():
    a = checkpoint_digest(1, {"lr": 0.1}, 10)
    assert a == checkpoint_digest(1, {"lr": 0.1}, 10)
    assert a != checkpoint_digest(2, {"lr": 0.1}, 10)
    assert a != checkpoint_digest(1, {"lr": 0.2}, 10)
    assert a != checkpoint_digest(1, {"lr": 0.1}, 11)


def make_dataset(order):
    return Dataset(dataset_id="d", owner="o", size=GIB, created_at=0,
                   last_access=0, metric_name="m", metric_order=order)


def test_evaluation_monotone_in_quality():
    desc = make_dataset(MetricOrder.DESCENDING)
    asc = make_dataset(MetricOrder.ASCENDING)
    lo = evaluation_score(desc, "digest-x", 0.2)
    hi = evaluation_score(desc, "digest-x", 0.9)
    assert hi > lo
    lo_err = evaluation_score(asc, "digest-x", 0.9)
    hi_err = evaluation_score(asc, "digest-x", 0.2)
    assert lo_err < hi_err  # better training, lower error


def test_evaluation_deterministic_but_dataset_keyed():
    d1 = make_dataset(MetricOrder.DESCENDING)
    d2 = Dataset(dataset_id="other", owner="o", size=GIB, created_at=0,
                 last_access=0)
    assert evaluation_score(d1, "dg", 0.5) == evaluation_score(d1, "dg", 0.5)
    assert evaluation_score(d1, "dg", 0.5) != evaluation_score(d2, "dg", 0.5)


def test_infer_deterministic():
    out1 = infer_output("digest", {"x": [1, 2]})
    out2 = infer_output("digest", {"x": [1, 2]})
    assert out1 == out2
    assert infer_output("digest", {"x": [1, 3]}) != out1
    assert 1 <= infer_latency_ms("digest", {"x": [1, 2]}) <= 20
