"""Deterministic federated-learning simulator.

A small, fully seeded stack: a dense neural-network engine (float64,
analytic backprop, finite-difference oracle), dataset partitioners for
homogeneous and label-skewed clients, batch schedules with sliding-window
consumption, and drivers for windowed federated training, federated
averaging, and a centralized mini-batch baseline, plus the metrics needed
to compare them (test-loss discordance, communication accounting).
"""

from .data import (
    BatchSchedule,
    ClientDataset,
    Dataset,
    PartitionPlan,
    apply_partition,
    batch_window,
    load_csv,
    load_idx,
    make_schedule,
    partition_iid,
    partition_manual,
    partition_noniid_l,
    split_dataset,
    synthetic,
    synthetic_split,
)
from .errors import ConfigError, ContractError, DataError, FedsimError
from .federated import (
    ClientState,
    LockstepPlan,
    RoundReport,
    Seeds,
    ServerState,
    TrainingConfig,
    aggregate,
    client_update_fedavg,
    client_update_mmb,
    run_centralized,
    run_fedavg,
    run_fedmmb,
)
from .metrics import (
    CommCost,
    CSV_HEADER,
    DiscordanceReport,
    MetricsLog,
    MetricsRow,
    comm_cost,
    discordance,
)
from .nn import (
    Batch,
    Gradients,
    ModelWeights,
    NetworkSpec,
    compute_gradients,
    evaluate,
    finite_diff_grad,
    forward,
    init_weights,
    map_params,
    max_abs_diff,
    sgd_step,
)
from .rng import Xoshiro256PP, derive_seed

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchSchedule",
    "CSV_HEADER",
    "ClientDataset",
    "ClientState",
    "CommCost",
    "ConfigError",
    "ContractError",
    "DataError",
    "Dataset",
    "DiscordanceReport",
    "FedsimError",
    "Gradients",
    "LockstepPlan",
    "MetricsLog",
    "MetricsRow",
    "ModelWeights",
    "NetworkSpec",
    "PartitionPlan",
    "RoundReport",
    "Seeds",
    "ServerState",
    "TrainingConfig",
    "Xoshiro256PP",
    "aggregate",
    "apply_partition",
    "batch_window",
    "client_update_fedavg",
    "client_update_mmb",
    "comm_cost",
    "compute_gradients",
    "derive_seed",
    "discordance",
    "evaluate",
    "finite_diff_grad",
    "forward",
    "init_weights",
    "load_csv",
    "load_idx",
    "make_schedule",
    "map_params",
    "max_abs_diff",
    "partition_iid",
    "partition_manual",
    "partition_noniid_l",
    "run_centralized",
    "run_fedavg",
    "run_fedmmb",
    "sgd_step",
    "split_dataset",
    "synthetic",
    "synthetic_split",
]
