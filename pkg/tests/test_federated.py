import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fedsim as fs
from fedsim.data import synthetic_split


SEEDS = fs.Seeds(init=1, shuffle=2, partition=3)


def make_client(n: int, input_dim: int = 4, classes: int = 5, seed: int = 0, index: int = 0):
    return fs.ClientDataset(index, fs.synthetic(seed, n, input_dim, classes))


def make_state(n: int, batch_size: int, batch_count: int, seed: int = 2, index: int = 0):
    client = make_client(n, index=index)
    schedule = fs.make_schedule(client, batch_size, batch_count, seed)
    return fs.ClientState(client.client_index, client, schedule)


def weights_equal(a: fs.ModelWeights, b: fs.ModelWeights) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))


# --- training config --------------------------------------------------------


def test_config_mode_exclusivity():
    with pytest.raises(fs.ConfigError):
        fs.TrainingConfig(
            mode="fedmmb", learning_rate=0.1, max_rounds=2, batch_size=4, seeds=SEEDS,
            clients=2, batch_count=1, local_epochs=1,
        )
    with pytest.raises(fs.ConfigError):
        fs.TrainingConfig(
            mode="fedavg", learning_rate=0.1, max_rounds=2, batch_size=4, seeds=SEEDS, clients=2,
        )
    with pytest.raises(fs.ConfigError):
        fs.TrainingConfig(
            mode="centralized", learning_rate=0.1, max_rounds=2, batch_size=4, seeds=SEEDS, clients=2,
        )
    with pytest.raises(fs.ConfigError):
        fs.TrainingConfig(
            mode="fedmmb", learning_rate=0.1, max_rounds=5, batch_size=4, seeds=SEEDS,
            clients=2, batch_count=1, eval_every=2,  # 2 does not divide 5
        )
    with pytest.raises(fs.ConfigError):
        fs.TrainingConfig(
            mode="fedmmb", learning_rate=0.0, max_rounds=2, batch_size=4, seeds=SEEDS,
            clients=2, batch_count=1,
        )


# --- client updates ---------------------------------------------------------


def test_mmb_update_whole_epoch_when_count_covers_list():
    state = make_state(40, batch_size=10, batch_count=4)
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    report = fs.client_update_mmb(spec, 0, w, state, 0.05)
    assert report.local_updates == 4
    assert report.samples_used == 40
    assert state.local_updates == 4


def test_mmb_update_single_batch_mode():
    state = make_state(40, batch_size=10, batch_count=1)
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    report = fs.client_update_mmb(spec, 0, w, state, 0.05)
    assert report.local_updates == 1
    assert report.samples_used == 10


def test_mmb_update_zero_eta_returns_broadcast_weights():
    state = make_state(20, batch_size=5, batch_count=2)
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    report = fs.client_update_mmb(spec, 0, w, state, 0.0)
    assert weights_equal(report.local_weights, w)
    assert report.samples_used == 10


def test_mmb_update_counts_short_last_window():
    # T=ceil(25/10)=3, C=2 -> windows (0,1) then (2,2) with 5 samples.
    state = make_state(25, batch_size=10, batch_count=2)
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    first = fs.client_update_mmb(spec, 0, w, state, 0.01)
    second = fs.client_update_mmb(spec, 1, w, state, 0.01)
    assert (first.local_updates, first.samples_used) == (2, 20)
    assert (second.local_updates, second.samples_used) == (1, 5)


def test_fedavg_update_accounting():
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    state = make_state(100, batch_size=10, batch_count=10)
    report = fs.client_update_fedavg(spec, w, state, 1, 0.05)
    assert report.local_updates == 10
    assert report.samples_used == 100

    state = make_state(95, batch_size=10, batch_count=10)
    report = fs.client_update_fedavg(spec, w, state, 2, 0.05)
    assert report.local_updates == 20
    assert report.samples_used == 190


def test_fedavg_update_count_large_client():
    # One epoch at batch size 10 over a 10000-sample client: 1000 updates.
    spec = fs.NetworkSpec(4, (), 5)
    w = fs.init_weights(spec, 1)
    state = make_state(10000, batch_size=10, batch_count=1000)
    report = fs.client_update_fedavg(spec, w, state, 1, 0.05)
    assert report.local_updates == 1000
    assert report.samples_used == 10000


def test_fedavg_single_epoch_equals_mmb_full_window():
    spec = fs.NetworkSpec(4, (6,), 5)
    w = fs.init_weights(spec, 1)
    a = make_state(40, batch_size=10, batch_count=4, seed=7)
    b = make_state(40, batch_size=10, batch_count=4, seed=7)
    for i in range(3):  # stays identical across rounds, reshuffles included
        r_avg = fs.client_update_fedavg(spec, w, a, 1, 0.05)
        r_mmb = fs.client_update_mmb(spec, i, w, b, 0.05)
        assert weights_equal(r_avg.local_weights, r_mmb.local_weights)
        assert r_avg.samples_used == r_mmb.samples_used


# --- aggregation ------------------------------------------------------------


def report(index: int, weights: fs.ModelWeights, n: int) -> fs.RoundReport:
    return fs.RoundReport(index, weights, n, 1)


def test_aggregate_identical_weights_fixed_point():
    spec = fs.NetworkSpec(3, (4,), 3)
    w = fs.init_weights(spec, 5)
    merged = fs.aggregate([report(j, w, 7 + j) for j in range(10)])
    assert weights_equal(merged, w)


def test_aggregate_two_client_arithmetic():
    a = fs.ModelWeights([np.array([[0.0]])], [np.array([0.0])])
    b = fs.ModelWeights([np.array([[4.0]])], [np.array([4.0])])
    merged = fs.aggregate([report(0, a, 1), report(1, b, 3)])
    assert merged.weights[0][0, 0] == 3.0
    assert merged.biases[0][0] == 3.0


def test_aggregate_equal_counts_is_mean():
    spec = fs.NetworkSpec(3, (4,), 3)
    ws = [fs.init_weights(spec, s) for s in range(4)]
    merged = fs.aggregate([report(j, w, 5) for j, w in enumerate(ws)])
    for idx, arrays in enumerate(zip(*(w.arrays() for w in ws))):
        mean = sum(arrays) / 4
        got = list(merged.arrays())[idx]
        np.testing.assert_allclose(got, mean, atol=1e-15)


def test_aggregate_empty_raises():
    with pytest.raises(fs.ContractError):
        fs.aggregate([])


def test_aggregate_order_independent_of_report_order():
    spec = fs.NetworkSpec(3, (4,), 3)
    reports = [report(j, fs.init_weights(spec, j), j + 1) for j in range(5)]
    forward_order = fs.aggregate(reports)
    shuffled = fs.aggregate(list(reversed(reports)))
    assert weights_equal(forward_order, shuffled)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 1000),
    counts=st.lists(st.integers(1, 50), min_size=1, max_size=6),
)
def test_aggregate_convexity_property(seed, counts):
    spec = fs.NetworkSpec(2, (), 2)
    ws = [fs.init_weights(spec, seed + j) for j in range(len(counts))]
    merged = fs.aggregate([report(j, w, n) for j, (w, n) in enumerate(zip(ws, counts))])
    stacked = np.stack([w.weights[0] for w in ws])
    assert np.all(merged.weights[0] >= stacked.min(axis=0))
    assert np.all(merged.weights[0] <= stacked.max(axis=0))


# --- drivers ----------------------------------------------------------------


def small_fed_setup(classes: int = 5, clients: int = 4, n: int = 80):
    train, test = synthetic_split(11, n, 40, 4, classes)
    client_data = fs.partition_iid(train, clients, SEEDS.partition)
    spec = fs.NetworkSpec(4, (8,), classes)
    return spec, client_data, test


def test_run_fedmmb_one_round_one_row():
    spec, clients, test = small_fed_setup()
    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=1, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=1,
    )
    log = fs.run_fedmmb(cfg, spec, clients, test)
    assert len(log.rows) == 1
    assert log.rows[0].round == 1


def test_run_fedmmb_rejects_wrong_mode_or_clients():
    spec, clients, test = small_fed_setup()
    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=1, batch_size=5, seeds=SEEDS,
        clients=3, batch_count=1,
    )
    with pytest.raises(fs.ConfigError):
        fs.run_fedmmb(cfg, spec, clients, test)  # 4 clients given, 3 configured
    cfg_central = fs.TrainingConfig(
        mode="centralized", learning_rate=0.05, max_rounds=1, batch_size=5, seeds=SEEDS,
    )
    with pytest.raises(fs.ConfigError):
        fs.run_fedmmb(cfg_central, spec, clients, test)


def test_single_client_full_window_equals_centralized_steps():
    # One client consuming its whole batch list per round walks the exact
    # same batch sequence as a centralized run at the same batch size, so
    # the evaluated metrics coincide at matched cadence.
    train, test = synthetic_split(13, 100, 40, 4, 5)
    spec = fs.NetworkSpec(4, (8,), 5)
    client = [fs.ClientDataset(0, train)]
    fed_cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=5, batch_size=10, seeds=SEEDS,
        clients=1, batch_count=10,
    )
    fed_log = fs.run_fedmmb(fed_cfg, spec, client, test)
    cent_cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.05, max_rounds=50, batch_size=10, seeds=SEEDS,
        eval_every=10,
    )
    cent_log = fs.run_centralized(cent_cfg, spec, train, test)
    assert fed_log.test_losses() == cent_log.test_losses()
    assert [r.test_accuracy for r in fed_log.rows] == [r.test_accuracy for r in cent_log.rows]


def test_fedavg_equals_fedmmb_full_window_run():
    spec, clients, test = small_fed_setup()
    mmb_cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=6, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=4,  # covers T = 20/5 = 4 batches
    )
    avg_cfg = fs.TrainingConfig(
        mode="fedavg", learning_rate=0.05, max_rounds=6, batch_size=5, seeds=SEEDS,
        clients=4, local_epochs=1,
    )
    log_mmb = fs.run_fedmmb(mmb_cfg, spec, clients, test)
    log_avg = fs.run_fedavg(avg_cfg, spec, clients, test)
    assert log_mmb.rows == log_avg.rows


def test_lockstep_single_batch_equals_centralized_union():
    train, _ = synthetic_split(17, 200, 80, 6, 5)
    test = synthetic_split(17, 200, 80, 6, 5)[1]
    clients = fs.partition_iid(train, 4, SEEDS.partition)
    spec = fs.NetworkSpec(6, (10,), 5)
    fed_cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=60, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=1,
    )
    cent_cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.05, max_rounds=60, batch_size=20, seeds=SEEDS,
    )
    fed_weights, cent_weights = [], []
    fs.run_fedmmb(fed_cfg, spec, clients, test, round_hook=lambda r, w: fed_weights.append(w))
    fs.run_centralized(
        cent_cfg, spec, None, test,
        lockstep=fs.LockstepPlan(clients, 5),
        round_hook=lambda r, w: cent_weights.append(w),
    )
    gaps = [fs.max_abs_diff(a, b) for a, b in zip(fed_weights, cent_weights)]
    assert len(gaps) == 60
    assert max(gaps) <= 1e-10


def test_free_running_single_batch_concordance_desk_scale():
    train, test = synthetic_split(19, 400, 100, 10, 5)
    clients = fs.partition_iid(train, 4, SEEDS.partition)
    spec = fs.NetworkSpec(10, (16,), 5)
    fed_cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.02, max_rounds=400, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=1, eval_every=4,
    )
    cent_cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.02, max_rounds=400, batch_size=20, seeds=SEEDS,
        eval_every=4,
    )
    fed_log = fs.run_fedmmb(fed_cfg, spec, clients, test)
    cent_log = fs.run_centralized(cent_cfg, spec, train, test)
    verdict = fs.discordance(fed_log, cent_log, epsilon=0.01)
    assert verdict.concordant
    assert verdict.delta < 0.01


def test_centralized_full_batch_convex_loss_non_increasing():
    train, test = synthetic_split(23, 200, 100, 6, 4)
    spec = fs.NetworkSpec(6, (), 4)  # softmax regression: convex objective
    cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.01, max_rounds=80, batch_size=200, seeds=SEEDS,
    )
    log = fs.run_centralized(cfg, spec, train, train)  # loss on the training set itself
    losses = log.test_losses()
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_local_update_counters():
    spec, clients, test = small_fed_setup()  # client size 20
    cfg = fs.TrainingConfig(
        mode="fedavg", learning_rate=0.05, max_rounds=3, batch_size=5, seeds=SEEDS,
        clients=4, local_epochs=2,
    )
    log = fs.run_fedavg(cfg, spec, clients, test)
    # mu_j = I_max * E * ceil(N_j / B) = 3 * 2 * 4 per client, summed over 4 clients.
    assert log.rows[-1].cum_local_updates == 3 * 2 * 4 * 4

    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=6, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=1,
    )
    log = fs.run_fedmmb(cfg, spec, clients, test)
    assert log.rows[-1].cum_local_updates == 6 * 4  # one update per client per round


def test_concurrent_clients_match_sequential():
    spec, clients, test = small_fed_setup(clients=4)
    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=8, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=2,
    )
    sequential = fs.run_fedmmb(cfg, spec, clients, test)
    threaded = fs.run_fedmmb(cfg, spec, clients, test, max_workers=4)
    assert sequential.rows == threaded.rows


def test_runs_are_deterministic():
    spec, clients, test = small_fed_setup()
    cfg = fs.TrainingConfig(
        mode="fedavg", learning_rate=0.05, max_rounds=4, batch_size=5, seeds=SEEDS,
        clients=4, local_epochs=1,
    )
    first = fs.run_fedavg(cfg, spec, clients, test)
    second = fs.run_fedavg(cfg, spec, clients, test)
    assert first.rows == second.rows
    assert first.to_csv_string() == second.to_csv_string()


# --- discordance ------------------------------------------------------------


def make_log(losses, rounds=None) -> fs.MetricsLog:
    log = fs.MetricsLog()
    for i, loss in enumerate(losses):
        log.append(
            fs.MetricsRow(
                round=(rounds[i] if rounds else i + 1),
                test_loss=loss,
                test_accuracy=0.5,
                train_loss=None,
                cum_local_updates=i + 1,
                cum_bytes=0,
            )
        )
    return log


def test_discordance_identical_logs():
    log = make_log([2.0, 1.5, 1.2])
    verdict = fs.discordance(log, log, epsilon=1e-9)
    assert verdict.delta == 0.0
    assert verdict.concordant


def test_discordance_arithmetic():
    a = make_log([1.0, 2.0])
    b = make_log([1.0, 1.0])
    verdict = fs.discordance(a, b, epsilon=0.01)
    assert verdict.delta == 0.5
    assert not verdict.concordant
    assert verdict.rounds_compared == 2


def test_discordance_mismatched_rounds_raise():
    a = make_log([1.0, 2.0])
    b = make_log([1.0, 2.0], rounds=[1, 3])
    with pytest.raises(fs.DataError):
        fs.discordance(a, b, epsilon=0.01)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12))
def test_discordance_symmetric_and_zero_iff_identical(losses):
    a = make_log(losses)
    shifted = make_log([v + 0.25 for v in losses])
    assert fs.discordance(a, shifted, 1.0).delta == fs.discordance(shifted, a, 1.0).delta
    assert fs.discordance(a, a, 1.0).delta == 0.0
    assert fs.discordance(a, shifted, 1.0).delta > 0.0


# --- communication accounting -----------------------------------------------


def test_comm_cost_formula():
    spec = fs.NetworkSpec(9, (), 10)  # 9*10 + 10 = 100 parameters
    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.1, max_rounds=3, batch_size=2, seeds=SEEDS,
        clients=10, batch_count=1,
    )
    cost = fs.comm_cost(cfg, spec)
    assert cost.bytes_per_round == 100 * 8 * 2 * 10
    assert cost.cumulative_after(3) == 3 * 16000
    assert cost.schedule == (16000, 32000, 48000)


def test_comm_cost_linear_in_clients():
    spec = fs.NetworkSpec(9, (), 10)
    base = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.1, max_rounds=1, batch_size=2, seeds=SEEDS,
        clients=10, batch_count=1,
    )
    doubled = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.1, max_rounds=1, batch_size=2, seeds=SEEDS,
        clients=20, batch_count=1,
    )
    assert fs.comm_cost(doubled, spec).bytes_per_round == 2 * fs.comm_cost(base, spec).bytes_per_round


def test_comm_cost_centralized_is_zero():
    spec = fs.NetworkSpec(9, (), 10)
    cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.1, max_rounds=4, batch_size=2, seeds=SEEDS,
    )
    assert fs.comm_cost(cfg, spec).bytes_per_round == 0


# --- metrics CSV round-trip -------------------------------------------------


def test_metrics_csv_roundtrip():
    spec, clients, test = small_fed_setup()
    cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=4, batch_size=5, seeds=SEEDS,
        clients=4, batch_count=1,
    )
    log = fs.run_fedmmb(cfg, spec, clients, test)
    text = log.to_csv_string()
    parsed = fs.MetricsLog.from_csv_string(text)
    assert parsed.rows == log.rows
    assert text.splitlines()[0] == fs.CSV_HEADER


def test_metrics_csv_rejects_bad_header():
    with pytest.raises(fs.DataError):
        fs.MetricsLog.from_csv_string("round,loss\n1,2.0\n")
