"""Domain types: nodes, sessions, datasets, accounts, events.

Validators run in __post_init__ and again via validate() whenever the state
reducer mutates an entity, so invariant breaks surface at the mutation site.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .errors import ValidationError

GIB = 1024 ** 3
MIB = 1024 ** 2


class Liveness(str, Enum):
    ALIVE = "alive"
    DEAD = "dead"


class Role(str, Enum):
    ADMIN = "admin"
    USER = "user"


class MetricOrder(str, Enum):
    ASCENDING = "asc"    # lower is better (MSE-style)
    DESCENDING = "desc"  # higher is better (accuracy-style)


class SessionState(str, Enum):
    QUEUED = "queued"
    PREPARING = "preparing"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    STOPPED = "stopped"
    KILLED_OOM = "killed_oom"
    SERVING = "serving"


TERMINAL_STATES = frozenset(
    {SessionState.DONE, SessionState.FAILED, SessionState.STOPPED, SessionState.KILLED_OOM}
)
# states in which the session occupies a node
BOUND_STATES = frozenset(
    {SessionState.PREPARING, SessionState.RUNNING, SessionState.SERVING}
)

LIFECYCLE: dict[SessionState, frozenset[SessionState]] = {
    SessionState.QUEUED: frozenset({SessionState.PREPARING, SessionState.STOPPED}),
    SessionState.PREPARING: frozenset(
        {SessionState.RUNNING, SessionState.STOPPED, SessionState.FAILED, SessionState.QUEUED}
    ),
    SessionState.RUNNING: frozenset(
        {SessionState.DONE, SessionState.FAILED, SessionState.STOPPED, SessionState.KILLED_OOM}
    ),
    SessionState.DONE: frozenset({SessionState.SERVING}),
    SessionState.SERVING: frozenset({SessionState.STOPPED, SessionState.FAILED}),
    # resume re-queues a stopped or failed session
    SessionState.STOPPED: frozenset({SessionState.QUEUED}),
    SessionState.FAILED: frozenset({SessionState.QUEUED}),
    SessionState.KILLED_OOM: frozenset(),
}


def can_transition(a: SessionState, b: SessionState) -> bool:
    return b in LIFECYCLE[a]


class RejectReason(str, Enum):
    CREDIT_EXHAUSTED = "credit_exhausted"
    INFEASIBLE = "infeasible"
    PERMISSION_DENIED = "permission_denied"


@dataclass(frozen=True)
class AdmissionDecision:
    accepted: bool
    queue_position: Optional[int] = None
    reason: Optional[RejectReason] = None

    @classmethod
    def accept(cls, position: int) -> "AdmissionDecision":
        return cls(accepted=True, queue_position=position)

    @classmethod
    def reject(cls, reason: RejectReason) -> "AdmissionDecision":
        return cls(accepted=False, reason=reason)


@dataclass(frozen=True)
class ResourceRequest:
    gpus: int
    memory: int  # bytes; the per-session cap enforced by the node
    dataset_id: str
    image_id: str

    def __post_init__(self):
        if self.gpus < 0:
            raise ValidationError("gpus must be >= 0")
        if self.memory <= 0:
            raise ValidationError("memory must be > 0")
        if not self.dataset_id or not self.image_id:
            raise ValidationError("dataset_id and image_id are required")


@dataclass
class NodeDescriptor:
    node_id: str
    total_gpus: int
    available_gpus: int
    total_memory: int
    available_memory: int
    cached_datasets: set[str] = field(default_factory=set)
    cached_images: set[str] = field(default_factory=set)
    liveness: Liveness = Liveness.ALIVE
    last_heartbeat: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.total_gpus < 0 or self.total_memory <= 0:
            raise ValidationError(f"node {self.node_id}: nonpositive capacity")
        if not (0 <= self.available_gpus <= self.total_gpus):
            raise ValidationError(
                f"node {self.node_id}: available_gpus {self.available_gpus} "
                f"outside [0, {self.total_gpus}]"
            )
        if not (0 <= self.available_memory <= self.total_memory):
            raise ValidationError(
                f"node {self.node_id}: available_memory {self.available_memory} "
                f"outside [0, {self.total_memory}]"
            )

    @property
    def alive(self) -> bool:
        return self.liveness == Liveness.ALIVE


SESSION_ID_RE = re.compile(r"^[^/\s]+/[^/\s]+/[1-9][0-9]*$")


@dataclass
class Session:
    session_id: str  # {user}/{dataset}/{seq}
    owner: str
    dataset_id: str
    image_id: str
    config: dict[str, Any]
    resources: ResourceRequest
    state: SessionState
    seed: int
    created_at: int
    team: Optional[str] = None
    node_id: Optional[str] = None
    parent: Optional[str] = None
    started_at: Optional[int] = None
    finished_at: Optional[int] = None
    profile: dict[str, Any] = field(default_factory=dict)
    start_step: int = 0          # resume/fork warm-start position
    sweep_id: Optional[str] = None
    memo: str = ""
    command: str = ""
    serving_checkpoint: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not SESSION_ID_RE.match(self.session_id):
            raise ValidationError(f"malformed session id {self.session_id!r}")
        if (self.node_id is not None) != (self.state in BOUND_STATES):
            raise ValidationError(
                f"session {self.session_id}: node_id must be present exactly in "
                f"bound states (state={self.state.value}, node={self.node_id})"
            )
        if not (0 <= self.seed < 2 ** 64):
            raise ValidationError("seed must fit in 64 bits")
        if self.parent == self.session_id:
            raise ValidationError("session cannot be its own parent")

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


@dataclass
class Dataset:
    dataset_id: str
    owner: str
    size: int  # bytes
    created_at: int
    last_access: int
    team: Optional[str] = None  # None means public
    metric_name: str = "accuracy"
    metric_order: MetricOrder = MetricOrder.DESCENDING

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.size <= 0:
            raise ValidationError(f"dataset {self.dataset_id}: size must be > 0")

    @property
    def public(self) -> bool:
        return self.team is None

    def readable_by(self, user: "UserAccount") -> bool:
        if self.public or user.role == Role.ADMIN or user.user_id == self.owner:
            return True
        return self.team in user.teams


@dataclass
class UserAccount:
    user_id: str
    role: Role = Role.USER
    credit_balance: int = 0
    teams: set[str] = field(default_factory=set)
    gpu_ms_consumed: int = 0  # lifetime usage, feeds the charge accumulator

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.credit_balance < 0:
            raise ValidationError(f"user {self.user_id}: negative credit balance")


@dataclass(frozen=True)
class MetricEvent:
    session_id: str
    step: int
    name: str
    value: float
    ts: int

    def __post_init__(self):
        if self.step < 0:
            raise ValidationError("metric step must be >= 0")


@dataclass(frozen=True)
class TelemetrySample:
    node_id: str
    gpu_index: int
    utilization_pct: float
    memory_used: int
    ts: int
    session_id: Optional[str] = None

    def __post_init__(self):
        if not (0 <= self.utilization_pct <= 100):
            raise ValidationError("utilization_pct outside [0, 100]")


@dataclass(frozen=True)
class Checkpoint:
    checkpoint_id: str
    session_id: str
    step: int
    digest: str
    created_at: int


@dataclass(frozen=True)
class Submission:
    submission_id: str
    dataset_id: str
    user_id: str
    session_id: str
    checkpoint_id: str
    metric_name: str
    order: MetricOrder
    score: float
    ts: int


class NotifyKind(str, Enum):
    FAILED = "failed"
    KILLED_OOM = "killed_oom"
    NODE_DEAD = "node_dead"
    CREDIT_STOP = "credit_stop"


@dataclass(frozen=True)
class Notification:
    recipient: str
    session_id: str
    kind: NotifyKind
    detail: str
    ts: int


class SweepStrategy(str, Enum):
    GRID = "grid"
    RANDOM = "random"
    PBT = "pbt"


@dataclass
class SweepSpec:
    strategy: SweepStrategy
    dataset_id: str
    image_id: str
    base_config: dict[str, Any]
    space: dict[str, Any]  # param -> list of values, or {"min":, "max":, "log": bool}
    seed: int
    gpus: int = 1
    memory: int = GIB
    n: int = 0                          # Random: number of draws
    population: int = 0                 # PBT
    truncation_fraction: float = 0.25   # PBT
    perturb_factors: tuple[float, ...] = (0.8, 1.2)  # PBT

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.space:
            raise ValidationError("sweep space is empty")
        if self.strategy == SweepStrategy.RANDOM and self.n < 1:
            raise ValidationError("random sweep needs n >= 1")
        if self.strategy == SweepStrategy.GRID:
            for param, values in self.space.items():
                if not isinstance(values, list) or not values:
                    raise ValidationError(f"grid space for {param!r} must be a nonempty list")
        if self.strategy == SweepStrategy.PBT:
            if self.population < 2:
                raise ValidationError("pbt population must be >= 2")
            if not (0 < self.truncation_fraction <= 0.5):
                raise ValidationError("truncation_fraction must be in (0, 0.5]")
            if not self.perturb_factors:
                raise ValidationError("perturb_factors must be nonempty")


class SweepStatus(str, Enum):
    RUNNING = "running"
    DONE = "done"


@dataclass
class SweepState:
    sweep_id: str
    owner: str
    strategy: SweepStrategy
    dataset_id: str
    members: list[str]
    status: SweepStatus = SweepStatus.RUNNING
    generation: int = 0
    spec_payload: dict[str, Any] = field(default_factory=dict)
