"""Locality-aware, defragmenting placement.

Candidates are filtered on capacity (GPUs and memory), then ordered by
(available_gpus ascending, locality descending, node_id ascending) and the
first is taken. Packing onto the fullest feasible node keeps large
contiguous GPU blocks free for big requests; locality only breaks ties
between equally-loaded nodes, with a cached dataset worth more than a
cached image.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .types import NodeDescriptor, ResourceRequest

DATASET_CACHE_WEIGHT = 2
IMAGE_CACHE_WEIGHT = 1


def locality_score(node: NodeDescriptor, request: ResourceRequest) -> int:
    score = 0
    if request.dataset_id in node.cached_datasets:
        score += DATASET_CACHE_WEIGHT
    if request.image_id in node.cached_images:
        score += IMAGE_CACHE_WEIGHT
    return score


def placement_key(node: NodeDescriptor, request: ResourceRequest) -> tuple[int, int, str]:
    return (node.available_gpus, -locality_score(node, request), node.node_id)


def feasible(node: NodeDescriptor, request: ResourceRequest) -> bool:
    return (
        node.alive
        and node.available_gpus >= request.gpus
        and node.available_memory >= request.memory
    )


def place(request: ResourceRequest, nodes: Iterable[NodeDescriptor]) -> Optional[str]:
    """Pure choice of target node; returns None when nothing fits."""
    candidates = [n for n in nodes if feasible(n, request)]
    if not candidates:
        return None
    best = min(candidates, key=lambda n: placement_key(n, request))
    return best.node_id
