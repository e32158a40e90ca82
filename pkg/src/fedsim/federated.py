"""Client/server round machinery and the training drivers.

Three drivers share the same skeleton: broadcast the global weights, let
every client train locally, combine the results by sample-weighted
averaging, and evaluate on a fixed cadence. ``run_fedmmb`` trains each
client on a sliding window of ``batch_count`` batches per round (batch
count 1 is the single-mini-batch special case), ``run_fedavg`` runs whole
local epochs, and ``run_centralized`` is the single-site baseline.

Within a round the client updates are mutually independent; passing
``max_workers`` runs them in a thread pool. Results are bit-identical to
sequential ascending-index execution because every client draws from its
own derived seed stream and aggregation order is fixed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import BatchSchedule, ClientDataset, Dataset, batch_window, make_schedule
from .errors import ConfigError, ContractError
from .metrics import MetricsLog, MetricsRow, comm_cost
from .nn import (
    Batch,
    ModelWeights,
    NetworkSpec,
    compute_gradients,
    evaluate,
    init_weights,
    map_params,
    sgd_step,
    zeros_like,
)

MODES = ("fedmmb", "fedavg", "centralized")

RoundHook = Callable[[int, ModelWeights], None]


@dataclass(frozen=True)
class Seeds:
    """The three independent seed roots of a run."""

    init: int
    shuffle: int
    partition: int


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for one training run.

    ``batch_size`` is the client batch size for federated modes and the
    plain mini-batch size for centralized runs. Exactly the mode-relevant
    knobs may be set: ``batch_count`` for fedmmb, ``local_epochs`` for
    fedavg, and ``clients`` for the two federated modes.
    """

    mode: str
    learning_rate: float
    max_rounds: int
    batch_size: int
    seeds: Seeds
    eval_every: int = 1
    clients: int | None = None
    batch_count: int | None = None
    local_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.eval_every < 1 or self.max_rounds % self.eval_every != 0:
            raise ConfigError("eval_every must be >= 1 and divide max_rounds")
        if self.mode == "fedmmb":
            self._require(batch_count=True, local_epochs=False, clients=True)
            if self.batch_count is not None and self.batch_count < 1:
                raise ConfigError("batch_count must be at least 1")
        elif self.mode == "fedavg":
            self._require(batch_count=False, local_epochs=True, clients=True)
            if self.local_epochs is not None and self.local_epochs < 1:
                raise ConfigError("local_epochs must be at least 1")
        else:
            self._require(batch_count=False, local_epochs=False, clients=False)

    def _require(self, *, batch_count: bool, local_epochs: bool, clients: bool) -> None:
        checks = (
            ("batch_count", self.batch_count, batch_count),
            ("local_epochs", self.local_epochs, local_epochs),
            ("clients", self.clients, clients),
        )
        for name, value, wanted in checks:
            if wanted and value is None:
                raise ConfigError(f"mode {self.mode!r} requires {name}")
            if not wanted and value is not None:
                raise ConfigError(f"mode {self.mode!r} does not accept {name}")


@dataclass
class ServerState:
    round_index: int
    global_weights: ModelWeights


@dataclass
class ClientState:
    """Per-client training state: local data, batch schedule, update counter."""

    client_index: int
    data: ClientDataset
    schedule: BatchSchedule
    local_updates: int = 0


@dataclass(frozen=True)
class RoundReport:
    """What a client returns to the server each round."""

    client_index: int
    local_weights: ModelWeights
    samples_used: int
    local_updates: int

    def __post_init__(self) -> None:
        if self.samples_used < 1:
            raise ContractError("a round report must cover at least one sample")


def client_update_mmb(
    spec: NetworkSpec,
    round_index: int,
    global_weights: ModelWeights,
    client: ClientState,
    eta: float,
) -> RoundReport:
    """Train on this round's batch window, one SGD step per batch in order.

    Starts from the broadcast global weights; reports the samples consumed.
    Reshuffles the client's schedule after the window that completes a full
    sweep of its batch list.
    """
    p, q, reshuffle_after = batch_window(client.schedule, round_index)
    weights = global_weights
    samples = 0
    for batch in client.schedule.batches[p : q + 1]:
        _, grads = compute_gradients(spec, weights, batch)
        weights = sgd_step(weights, grads, eta)
        samples += batch.size
    client.local_updates += q - p + 1
    if reshuffle_after:
        client.schedule.reshuffle()
    return RoundReport(client.client_index, weights, samples, q - p + 1)


def client_update_fedavg(
    spec: NetworkSpec,
    global_weights: ModelWeights,
    client: ClientState,
    local_epochs: int,
    eta: float,
) -> RoundReport:
    """Run ``local_epochs`` full passes of mini-batch SGD on the client.

    Each epoch consumes the whole shuffled batch list and then reshuffles,
    so epoch k of round i trains on permutation ``i * E + k`` of the
    client's seed stream.
    """
    if local_epochs < 1:
        raise ContractError("local_epochs must be at least 1")
    weights = global_weights
    samples = 0
    updates = 0
    for _ in range(local_epochs):
        for batch in client.schedule.batches:
            _, grads = compute_gradients(spec, weights, batch)
            weights = sgd_step(weights, grads, eta)
            samples += batch.size
            updates += 1
        client.schedule.reshuffle()
    client.local_updates += updates
    return RoundReport(client.client_index, weights, samples, updates)


def aggregate(reports: list[RoundReport]) -> ModelWeights:
    """Sample-weighted average of the clients' local weights.

    Accumulation runs in ascending client-index order, anchored at the
    first report (``W_0 + sum n_j (W_j - W_0) / sum n_j``), which is
    algebraically the plain weighted average but keeps the all-identical
    case exact and the result well inside the clients' coordinate range.
    """
    if not reports:
        raise ContractError("cannot aggregate an empty report list")
    ordered = sorted(reports, key=lambda r: r.client_index)
    anchor = ordered[0].local_weights
    total = sum(r.samples_used for r in ordered)
    acc = zeros_like(anchor)
    for r in ordered:
        scale = float(r.samples_used)
        acc = map_params(
            lambda a, w, ref: a + scale * (w - ref), acc, r.local_weights, anchor
        )
    result = map_params(lambda ref, a: ref + a / total, anchor, acc)
    for arr in result.arrays():
        if not np.isfinite(arr).all():
            raise ContractError("aggregated weights are non-finite; training diverged")
    return result


def _client_states(
    clients: list[ClientDataset], batch_size: int, batch_count: int, shuffle_seed: int
) -> list[ClientState]:
    ordered = sorted(clients, key=lambda c: c.client_index)
    return [
        ClientState(c.client_index, c, make_schedule(c, batch_size, batch_count, shuffle_seed))
        for c in ordered
    ]


def _run_rounds(
    config: TrainingConfig,
    spec: NetworkSpec,
    states: list[ClientState],
    test_set: Dataset,
    update_one: Callable[[int, ModelWeights, ClientState], RoundReport],
    max_workers: int | None,
    round_hook: RoundHook | None,
) -> MetricsLog:
    server = ServerState(0, init_weights(spec, config.seeds.init))
    cost = comm_cost(config, spec)
    log = MetricsLog(metadata=_run_metadata(config, spec))
    pool = ThreadPoolExecutor(max_workers) if max_workers and max_workers > 1 else None
    try:
        for i in range(config.max_rounds):
            if pool is not None:
                reports = list(pool.map(lambda s: update_one(i, server.global_weights, s), states))
            else:
                reports = [update_one(i, server.global_weights, s) for s in states]
            if len(reports) != len(states):
                raise ContractError("every client must report every round")
            server.global_weights = aggregate(reports)
            server.round_index = i + 1
            if (i + 1) % config.eval_every == 0:
                loss, accuracy = evaluate(spec, server.global_weights, test_set)
                log.append(
                    MetricsRow(
                        round=i + 1,
                        test_loss=loss,
                        test_accuracy=accuracy,
                        train_loss=None,
                        cum_local_updates=sum(s.local_updates for s in states),
                        cum_bytes=cost.cumulative_after(i + 1),
                    )
                )
            if round_hook is not None:
                round_hook(i + 1, server.global_weights)
    finally:
        if pool is not None:
            pool.shutdown()
    return log


def run_fedmmb(
    config: TrainingConfig,
    spec: NetworkSpec,
    clients: list[ClientDataset],
    test_set: Dataset,
    max_workers: int | None = None,
    round_hook: RoundHook | None = None,
) -> MetricsLog:
    """Federated training on a window of ``batch_count`` batches per round.

    All clients participate every round. ``batch_count=1`` trains each
    client on a single mini-batch per round.
    """
    if config.mode != "fedmmb":
        raise ConfigError(f"run_fedmmb needs mode 'fedmmb', got {config.mode!r}")
    _check_clients(config, clients)
    assert config.batch_count is not None
    states = _client_states(clients, config.batch_size, config.batch_count, config.seeds.shuffle)

    def update_one(i: int, weights: ModelWeights, state: ClientState) -> RoundReport:
        return client_update_mmb(spec, i, weights, state, config.learning_rate)

    return _run_rounds(config, spec, states, test_set, update_one, max_workers, round_hook)


def run_fedavg(
    config: TrainingConfig,
    spec: NetworkSpec,
    clients: list[ClientDataset],
    test_set: Dataset,
    max_workers: int | None = None,
    round_hook: RoundHook | None = None,
) -> MetricsLog:
    """Federated averaging: every client runs ``local_epochs`` epochs per round."""
    if config.mode != "fedavg":
        raise ConfigError(f"run_fedavg needs mode 'fedavg', got {config.mode!r}")
    _check_clients(config, clients)
    assert config.local_epochs is not None
    states = [
        ClientState(c.client_index, c, _fedavg_schedule(c, config))
        for c in sorted(clients, key=lambda c: c.client_index)
    ]

    def update_one(i: int, weights: ModelWeights, state: ClientState) -> RoundReport:
        return client_update_fedavg(spec, weights, state, config.local_epochs, config.learning_rate)

    return _run_rounds(config, spec, states, test_set, update_one, max_workers, round_hook)


def _fedavg_schedule(client: ClientDataset, config: TrainingConfig) -> BatchSchedule:
    # Window math is unused by epoch training; a whole-list window keeps the
    # schedule identical to a fedmmb schedule covering all batches at once.
    num_batches = -(-client.data.n // config.batch_size)
    return make_schedule(client, config.batch_size, num_batches, config.seeds.shuffle)


def _check_clients(config: TrainingConfig, clients: list[ClientDataset]) -> None:
    if not clients:
        raise ConfigError("at least one client is required")
    if config.clients != len(clients):
        raise ConfigError(f"config names {config.clients} clients but {len(clients)} were given")
    indices = sorted(c.client_index for c in clients)
    if indices != list(range(len(clients))):
        raise ConfigError("client indices must be 0..K-1 without gaps")


@dataclass(frozen=True)
class LockstepPlan:
    """Test-only batch source for exact federated/centralized comparisons.

    Each centralized iteration trains on the concatenation (ascending client
    index) of the single batches the corresponding single-mini-batch
    federated clients would consume that round, reproducing their seed
    streams exactly.
    """

    clients: list[ClientDataset]
    batch_size: int


def run_centralized(
    config: TrainingConfig,
    spec: NetworkSpec,
    train_set: Dataset | None,
    test_set: Dataset,
    lockstep: LockstepPlan | None = None,
    round_hook: RoundHook | None = None,
) -> MetricsLog:
    """Single-site mini-batch gradient descent, one update per iteration.

    In the default (free-running) mode the train set is shuffled and split
    into batches of ``config.batch_size``, consumed one per iteration with a
    reshuffle after each full sweep. With a ``lockstep`` plan the batches
    come from the plan's clients instead and ``train_set`` is ignored.
    """
    if config.mode != "centralized":
        raise ConfigError(f"run_centralized needs mode 'centralized', got {config.mode!r}")

    if lockstep is not None:
        shadow = _client_states(lockstep.clients, lockstep.batch_size, 1, config.seeds.shuffle)

        def next_batch(i: int) -> Batch:
            parts = []
            for state in shadow:
                p, q, reshuffle_after = batch_window(state.schedule, i)
                parts.extend(state.schedule.batches[p : q + 1])
                if reshuffle_after:
                    state.schedule.reshuffle()
            return Batch(
                np.concatenate([b.features for b in parts]),
                np.concatenate([b.labels for b in parts]),
            )

    else:
        if train_set is None:
            raise ConfigError("centralized training requires a train set")
        schedule = make_schedule(
            ClientDataset(0, train_set), config.batch_size, 1, config.seeds.shuffle
        )

        def next_batch(i: int) -> Batch:
            p, _, reshuffle_after = batch_window(schedule, i)
            batch = schedule.batches[p]
            if reshuffle_after:
                schedule.reshuffle()
            return batch

    weights = init_weights(spec, config.seeds.init)
    cost = comm_cost(config, spec)
    log = MetricsLog(metadata=_run_metadata(config, spec))
    for i in range(config.max_rounds):
        batch = next_batch(i)
        _, grads = compute_gradients(spec, weights, batch)
        weights = sgd_step(weights, grads, config.learning_rate)
        if (i + 1) % config.eval_every == 0:
            loss, accuracy = evaluate(spec, weights, test_set)
            log.append(
                MetricsRow(
                    round=i + 1,
                    test_loss=loss,
                    test_accuracy=accuracy,
                    train_loss=None,
                    cum_local_updates=i + 1,
                    cum_bytes=cost.cumulative_after(i + 1),
                )
            )
        if round_hook is not None:
            round_hook(i + 1, weights)
    return log


def _run_metadata(config: TrainingConfig, spec: NetworkSpec) -> dict:
    return {
        "mode": config.mode,
        "learning_rate": config.learning_rate,
        "max_rounds": config.max_rounds,
        "eval_every": config.eval_every,
        "batch_size": config.batch_size,
        "batch_count": config.batch_count,
        "local_epochs": config.local_epochs,
        "clients": config.clients,
        "seeds": {
            "init": config.seeds.init,
            "shuffle": config.seeds.shuffle,
            "partition": config.seeds.partition,
        },
        "model": {
            "input_dim": spec.input_dim,
            "hidden": list(spec.hidden),
            "output_dim": spec.output_dim,
        },
    }
