"""Placement policy against an independent brute-force oracle."""

import random

from deskml.placement import locality_score, place, placement_key
from deskml.types import GIB, Liveness, NodeDescriptor, ResourceRequest


def oracle_place(request, nodes):
    """Independent re-derivation: filter feasible, sort by the full key,
    take the head. Kept deliberately naive."""
    feasible = []
    for n in nodes:
        if n.liveness != Liveness.ALIVE:
            continue
        if n.available_gpus < request.gpus:
            continue
        if n.available_memory < request.memory:
            continue
        loc = 0
        if request.dataset_id in n.cached_datasets:
            loc += 2
        if request.image_id in n.cached_images:
            loc += 1
        feasible.append(((n.available_gpus, -loc, n.node_id), n.node_id))
    if not feasible:
        return None
    feasible.sort()
    return feasible[0][1]


def node(nid, avail, total=8, mem=256 * GIB, avail_mem=None, ds=(), img=(),
         alive=True):
    return NodeDescriptor(
        node_id=nid, total_gpus=total, available_gpus=avail,
        total_memory=mem, available_memory=mem if avail_mem is None else avail_mem,
        cached_datasets=set(ds), cached_images=set(img),
        liveness=Liveness.ALIVE if alive else Liveness.DEAD,
    )


def req(gpus=1, memory=GIB, ds="d", img="i"):
    return ResourceRequest(gpus=gpus, memory=memory, dataset_id=ds, image_id=img)


def test_smallest_fit_preserves_big_block():
    nodes = [node("A", 1), node("B", 4), node("C", 8)]
    request = req(gpus=1)
    assert place(request, nodes) == "A"
    assert oracle_place(request, nodes) == "A"


def test_locality_breaks_ties():
    nodes = [node("A", 2), node("B", 2, ds={"d"})]
    request = req(gpus=2)
    assert place(request, nodes) == "B"
    assert oracle_place(request, nodes) == "B"


def test_no_capacity_returns_none():
    assert place(req(gpus=1), [node("A", 0)]) is None


def test_memory_is_a_filter_not_a_sort_key():
    # A has fewer GPUs free but not enough memory: B wins
    nodes = [node("A", 1, avail_mem=GIB // 2), node("B", 4)]
    assert place(req(gpus=1, memory=GIB), nodes) == "B"


def test_dead_nodes_excluded():
    nodes = [node("A", 8, alive=False), node("B", 8)]
    assert place(req(gpus=1), nodes) == "B"


def test_dataset_cache_outweighs_image_cache():
    nodes = [node("A", 2, img={"i"}), node("B", 2, ds={"d"})]
    assert place(req(gpus=2), nodes) == "B"
    # both caches beats dataset-only
    nodes = [node("A", 2, ds={"d"}, img={"i"}), node("B", 2, ds={"d"})]
    assert place(req(gpus=2), nodes) == "A"


def test_node_id_is_final_tiebreak():
    nodes = [node("B", 2), node("A", 2)]
    assert place(req(gpus=1), nodes) == "A"


def test_placement_is_deterministic_and_pure():
    nodes = [node("A", 3, ds={"d"}), node("B", 3), node("C", 5)]
    request = req(gpus=2)
    before = [(n.node_id, n.available_gpus) for n in nodes]
    choices = {place(request, nodes) for _ in range(10)}
    assert choices == {"A"}
    assert [(n.node_id, n.available_gpus) for n in nodes] == before


def test_key_orders_locality_descending():
    a = node("A", 2, ds={"d"}, img={"i"})
    b = node("B", 2)
    request = req()
    assert placement_key(a, request) < placement_key(b, request)
    assert locality_score(a, request) == 3
    assert locality_score(b, request) == 0


def test_randomized_oracle_equivalence_small():
    rnd = random.Random(1234)
    for _ in range(2000):
        nodes = []
        for i in range(rnd.randint(1, 12)):
            total = rnd.choice([1, 2, 4, 8])
            mem = rnd.choice([GIB, 4 * GIB, 16 * GIB])
            nodes.append(node(
                f"n{i:02d}", rnd.randint(0, total), total=total, mem=mem,
                avail_mem=rnd.randint(0, mem),
                ds={"d"} if rnd.random() < 0.4 else (),
                img={"i"} if rnd.random() < 0.4 else (),
                alive=rnd.random() > 0.1,
            ))
        request = req(gpus=rnd.randint(0, 8),
                      memory=rnd.randint(1, 8 * GIB))
        assert place(request, nodes) == oracle_place(request, nodes)
