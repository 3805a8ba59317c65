import pytest

from deskml import GIB, Platform


def small_scenario(**sim_overrides):
    """Two small nodes, fast workloads, generous credit."""
    sim = {"seed": 7}
    sim.update(sim_overrides)
    return {
        "sim": sim,
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 100000,
             "token": "tok-admin"},
            {"user_id": "u1", "credits": 100000, "teams": ["t1"], "token": "tok-u1"},
            {"user_id": "u2", "credits": 100000, "teams": ["t1"], "token": "tok-u2"},
            {"user_id": "outsider", "credits": 100000, "token": "tok-out"},
        ],
        "datasets": [
            {"dataset_id": "d1", "owner": "admin", "size_gb": 2,
             "metric_name": "accuracy", "metric_order": "desc"},
            {"dataset_id": "mse-d", "owner": "admin", "size_gb": 1,
             "metric_name": "mse", "metric_order": "asc"},
            {"dataset_id": "secret", "owner": "u1", "team": "t1", "size_gb": 1},
        ],
        "nodes": [
            {"node_id": "n1", "gpus": 4, "memory_gb": 16},
            {"node_id": "n2", "gpus": 4, "memory_gb": 16},
        ],
        "workloads": {
            "quick": {"a_max": 0.9, "rate_k": 0.3, "noise_sigma": 0.0,
                      "steps_total": 10, "step_ms": 200, "peak_memory": GIB,
                      "metric_name": "accuracy"},
            "noisy": {"a_max": 0.9, "rate_k": 0.3, "noise_sigma": 0.05,
                      "steps_total": 10, "step_ms": 200, "peak_memory": GIB,
                      "metric_name": "accuracy"},
        },
    }


@pytest.fixture
def platform():
    return Platform(small_scenario())


def run_session(p, user="u1", dataset="d1", image="quick", config=None,
                gpus=1, memory=GIB, **kw):
    return p.plane.run(user, dataset, image, config or {"lr": 0.1},
                       gpus=gpus, memory=memory, **kw)
