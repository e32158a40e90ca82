"""Datasets, client partitioners, and per-client batch schedules.

Partitioners split one dataset across clients either homogeneously (iid)
or with label skew (noniid_l: every client holds samples of exactly L
distinct labels). A batch schedule is a client's current shuffled batch
list plus the windowing state that decides which batches a round consumes
and when to reshuffle. All functions are pure in (inputs, seed).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError
from .nn import Batch
from .rng import Xoshiro256PP, derive_seed

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``[N, input_dim]`` plus integer labels ``[N]``."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError("features must be a non-empty 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must be a vector with one entry per sample")
        if self.num_classes < 1:
            raise DataError("num_classes must be positive")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise DataError("labels out of range [0, num_classes)")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass(frozen=True)
class ClientDataset:
    """One client's local training data."""

    client_index: int
    data: Dataset


@dataclass(frozen=True)
class PartitionPlan:
    """How to split a dataset across ``clients`` participants.

    ``kind`` is one of ``iid``, ``noniid_l`` (requires ``labels_per_client``)
    or ``manual`` (requires ``assignment``: client index -> sample indices).
    """

    kind: str
    clients: int
    seed: int
    labels_per_client: int | None = None
    assignment: dict[int, list[int]] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("iid", "noniid_l", "manual"):
            raise DataError(f"unknown partition kind: {self.kind!r}")
        if self.clients < 1:
            raise DataError("client count must be at least 1")
        if self.kind == "noniid_l":
            if self.labels_per_client is None or self.labels_per_client < 1:
                raise DataError("noniid_l requires labels_per_client >= 1")
        elif self.labels_per_client is not None:
            raise DataError("labels_per_client only applies to noniid_l partitions")
        if self.kind == "manual":
            if not self.assignment:
                raise DataError("manual partitions require an assignment map")
        elif self.assignment is not None:
            raise DataError("assignment only applies to manual partitions")


def load_idx(images_path: str, labels_path: str, num_classes: int | None = None) -> Dataset:
    """Load an IDX image/label file pair (big-endian, MNIST-style).

    Pixels are scaled to [0, 1] by dividing by 255 and images flattened
    row-major. When ``num_classes`` is omitted it is inferred as
    ``max(label) + 1``.
    """
    try:
        with open(images_path, "rb") as f:
            raw_images = f.read()
        with open(labels_path, "rb") as f:
            raw_labels = f.read()
    except OSError as exc:
        raise DataError(f"cannot read IDX files: {exc}") from exc

    if len(raw_images) < 16:
        raise DataError(f"{images_path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack(">iiii", raw_images[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataError(f"{images_path}: bad IDX image magic {magic:#010x}")
    if len(raw_images) != 16 + count * rows * cols:
        raise DataError(f"{images_path}: pixel payload does not match header counts")

    if len(raw_labels) < 8:
        raise DataError(f"{labels_path}: truncated IDX label header")
    lmagic, lcount = struct.unpack(">ii", raw_labels[:8])
    if lmagic != IDX_LABEL_MAGIC:
        raise DataError(f"{labels_path}: bad IDX label magic {lmagic:#010x}")
    if len(raw_labels) != 8 + lcount:
        raise DataError(f"{labels_path}: label payload does not match header count")
    if count != lcount:
        raise DataError(f"image count {count} does not match label count {lcount}")

    pixels = np.frombuffer(raw_images, dtype=np.uint8, offset=16)
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(raw_labels, dtype=np.uint8, offset=8).astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if count else 0
    return Dataset(features, labels, num_classes)


def load_csv(path: str, num_classes: int, header: bool = False) -> Dataset:
    """Load a label-first CSV: each row is ``label, feature_1, ..., feature_d``."""
    rows: list[list[float]] = []
    labels: list[int] = []
    try:
        f = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read CSV {path}: {exc}") from exc
    with f:
        reader = csv.reader(f)
        for lineno, cells in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not cells:
                continue
            if len(cells) < 2:
                raise DataError(f"{path}:{lineno}: need a label and at least one feature")
            try:
                label = int(cells[0])
                values = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
            if not (0 <= label < num_classes):
                raise DataError(f"{path}:{lineno}: label {label} out of range")
            if rows and len(values) != len(rows[0]):
                raise DataError(
                    f"{path}:{lineno}: ragged row ({len(values)} features, expected {len(rows[0])})"
                )
            rows.append(values)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64), num_classes)


def synthetic(seed: int, n: int, input_dim: int, num_classes: int) -> Dataset:
    """Class-conditional Gaussian blobs for desk-scale experiments.

    Class ``c`` is centered at a seeded random unit-norm direction scaled by
    2.0, with isotropic unit noise. Labels are assigned round-robin, so
    class counts are balanced to within one sample.
    """
    if n < num_classes:
        raise DataError("need at least one sample per class")
    rng = Xoshiro256PP(derive_seed(seed, 0xDA7A))
    centers = np.empty((num_classes, input_dim), dtype=np.float64)
    for c in range(num_classes):
        direction = rng.normal_array(input_dim)
        centers[c] = 2.0 * direction / np.linalg.norm(direction)
    labels = np.arange(n, dtype=np.int64) % num_classes
    noise = rng.normal_array(n * input_dim).reshape(n, input_dim)
    features = centers[labels] + noise
    return Dataset(features, labels, num_classes)


def synthetic_split(
    seed: int, n_train: int, n_test: int, input_dim: int, num_classes: int
) -> tuple[Dataset, Dataset]:
    """Train/test pair drawn from one synthetic generator call.

    Both sides share the same class centers (one draw of ``n_train + n_test``
    samples, sliced), and both stay label-balanced whenever each size is a
    multiple of ``num_classes``, which the label-skew partitioner needs.
    """
    full = synthetic(seed, n_train + n_test, input_dim, num_classes)
    idx = np.arange(full.n)
    return full.subset(idx[:n_train]), full.subset(idx[n_train:])


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split into (train, test); both sides must be non-empty."""
    if not (0.0 < test_fraction < 1.0):
        raise DataError("test_fraction must lie strictly between 0 and 1")
    n_test = int(dataset.n * test_fraction)
    if n_test < 1 or n_test >= dataset.n:
        raise DataError("split would leave an empty train or test set")
    perm = Xoshiro256PP(derive_seed(seed, 0x5B117)).permutation(dataset.n)
    return dataset.subset(perm[n_test:]), dataset.subset(perm[:n_test])


def partition_iid(dataset: Dataset, clients: int, seed: int) -> list[ClientDataset]:
    """Shuffle and split into ``clients`` equal contiguous chunks."""
    if clients < 1:
        raise DataError("client count must be at least 1")
    if dataset.n % clients != 0:
        raise DataError(f"client count {clients} does not divide {dataset.n} samples")
    perm = Xoshiro256PP(derive_seed(seed, 0x11D)).permutation(dataset.n)
    per_client = dataset.n // clients
    return [
        ClientDataset(j, dataset.subset(perm[j * per_client : (j + 1) * per_client]))
        for j in range(clients)
    ]


def partition_noniid_l(
    dataset: Dataset, clients: int, labels_per_client: int, seed: int
) -> list[ClientDataset]:
    """Label-skewed split: every client receives exactly ``labels_per_client`` labels.

    Samples are grouped by label, each group is split into
    ``clients * labels_per_client / num_classes`` shards, and shards are
    dealt round-robin to clients with the label groups visited in a seeded
    order. Contiguous dealing guarantees no client sees the same label twice.
    """
    num_classes = dataset.num_classes
    lpc = labels_per_client
    if not (1 <= lpc <= num_classes):
        raise DataError(f"labels_per_client must be in [1, {num_classes}]")
    if (clients * lpc) % num_classes != 0:
        raise DataError(
            f"clients * labels_per_client ({clients}*{lpc}) must be divisible by {num_classes}"
        )
    shards_per_label = (clients * lpc) // num_classes
    if shards_per_label > clients:
        raise DataError("infeasible assignment: more shards per label than clients")

    rng = Xoshiro256PP(derive_seed(seed, 0x901))
    groups: list[np.ndarray] = []
    for label in range(num_classes):
        group = np.flatnonzero(dataset.labels == label)
        if group.size == 0 or group.size % shards_per_label != 0:
            raise DataError(
                f"label {label} has {group.size} samples, not divisible into "
                f"{shards_per_label} shards"
            )
        groups.append(group[rng.permutation(group.size)])

    label_order = rng.permutation(num_classes)
    client_indices: list[list[np.ndarray]] = [[] for _ in range(clients)]
    slot = 0
    for label in label_order:
        group = groups[label]
        shard_size = group.size // shards_per_label
        for s in range(shards_per_label):
            client_indices[slot % clients].append(group[s * shard_size : (s + 1) * shard_size])
            slot += 1

    result = []
    for j in range(clients):
        idx = np.concatenate(client_indices[j])
        client = ClientDataset(j, dataset.subset(idx))
        if len(np.unique(client.data.labels)) != lpc:
            raise DataError("infeasible assignment: distinct-label constraint violated")
        result.append(client)
    return result


def partition_manual(dataset: Dataset, assignment: dict[int, list[int]]) -> list[ClientDataset]:
    """Explicit index map: client index -> list of sample indices.

    The assignment must cover every sample exactly once.
    """
    seen = np.zeros(dataset.n, dtype=bool)
    for j, idx in assignment.items():
        arr = np.asarray(idx, dtype=np.int64)
        if arr.size == 0:
            raise DataError(f"client {j}: empty assignment")
        if arr.min() < 0 or arr.max() >= dataset.n:
            raise DataError(f"client {j}: sample index out of range")
        if seen[arr].any():
            raise DataError(f"client {j}: overlapping assignment")
        seen[arr] = True
    if not seen.all():
        raise DataError("assignment does not cover every sample")
    return [
        ClientDataset(j, dataset.subset(np.asarray(assignment[j], dtype=np.int64)))
        for j in sorted(assignment)
    ]


def apply_partition(plan: PartitionPlan, dataset: Dataset) -> list[ClientDataset]:
    if plan.kind == "iid":
        return partition_iid(dataset, plan.clients, plan.seed)
    if plan.kind == "noniid_l":
        assert plan.labels_per_client is not None
        return partition_noniid_l(dataset, plan.clients, plan.labels_per_client, plan.seed)
    assert plan.assignment is not None
    return partition_manual(dataset, plan.assignment)


@dataclass
class BatchSchedule:
    """A client's shuffled batch list plus its windowing state.

    ``num_batches`` (the batch total T) is ``ceil(N / batch_size)``;
    ``window_span`` (f) is ``ceil(T / batch_count)``, the number of rounds
    needed to sweep the whole list once. ``reshuffle`` rebuilds the batch
    list with the next permutation of this client's seed stream; the stream
    is the pure function ``derive_seed(base_seed, client_index, count)``,
    so reshuffles never depend on call or thread order.
    """

    source: Dataset
    batch_size: int
    batch_count: int
    base_seed: int
    client_index: int
    reshuffle_count: int = 0
    batches: list[Batch] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.batch_count < 1:
            raise ContractError("batch size and batch count must be positive")
        if not self.batches:
            self.batches = self._build()

    def _build(self) -> list[Batch]:
        perm = Xoshiro256PP(
            derive_seed(self.base_seed, self.client_index, self.reshuffle_count)
        ).permutation(self.source.n)
        chunks = range(0, self.source.n, self.batch_size)
        return [
            Batch(
                self.source.features[perm[start : start + self.batch_size]],
                self.source.labels[perm[start : start + self.batch_size]],
            )
            for start in chunks
        ]

    @property
    def num_batches(self) -> int:
        return len(self.batches)

    @property
    def window_span(self) -> int:
        return math.ceil(self.num_batches / self.batch_count)

    def reshuffle(self) -> None:
        self.reshuffle_count += 1
        self.batches = self._build()


def make_schedule(client: ClientDataset, batch_size: int, batch_count: int, seed: int) -> BatchSchedule:
    """Shuffle and split a client's data into batches of ``batch_size``.

    All batches have exactly ``batch_size`` samples except possibly the
    last, which may be smaller.
    """
    if client.data.n < 1:
        raise DataError("cannot schedule an empty client dataset")
    return BatchSchedule(
        source=client.data,
        batch_size=batch_size,
        batch_count=batch_count,
        base_seed=seed,
        client_index=client.client_index,
    )


def batch_window(schedule: BatchSchedule, round_index: int) -> tuple[int, int, bool]:
    """Inclusive batch-index window ``(p, q)`` for a round, plus the reshuffle flag.

    Successive rounds slide a window of ``batch_count`` batches across the
    shuffled list; the last window of a sweep is clipped to the list end and
    triggers a reshuffle once the round completes.
    """
    span = schedule.window_span
    p = (round_index % span) * schedule.batch_count
    q = min(p + schedule.batch_count - 1, schedule.num_batches - 1)
    reshuffle_after = (round_index + 1) % span == 0
    return p, q, reshuffle_after
