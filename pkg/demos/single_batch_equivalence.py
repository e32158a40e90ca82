"""Exact equivalence of single-mini-batch federated training and MBGD.

When every client takes one SGD step on one batch per round and the
centralized run consumes the concatenation of those same batches (the
lockstep oracle), the two weight trajectories coincide to floating-point
roundoff - not approximately, but at the 1e-15 level, round after round.
This is the mechanism behind the federated/centralized concordance: the
sample-weighted average of one-step updates equals one step on the union
batch.
"""

import fedsim as fs


def main() -> None:
    train = fs.synthetic(seed=5, n=800, input_dim=20, num_classes=10)
    test = fs.synthetic(seed=6, n=400, input_dim=20, num_classes=10)
    spec = fs.NetworkSpec(20, (32,), 10)
    seeds = fs.Seeds(init=1, shuffle=2, partition=55)
    clients = fs.partition_iid(train, 4, seeds.partition)

    fed_cfg = fs.TrainingConfig(
        mode="fedmmb", learning_rate=0.05, max_rounds=100, batch_size=10,
        seeds=seeds, clients=4, batch_count=1,
    )
    cent_cfg = fs.TrainingConfig(
        mode="centralized", learning_rate=0.05, max_rounds=100, batch_size=40, seeds=seeds,
    )

    fed_weights, cent_weights = [], []
    fs.run_fedmmb(fed_cfg, spec, clients, test, round_hook=lambda r, w: fed_weights.append(w))
    fs.run_centralized(
        cent_cfg, spec, None, test,
        lockstep=fs.LockstepPlan(clients, batch_size=10),
        round_hook=lambda r, w: cent_weights.append(w),
    )

    print("4 clients, batch size 10, one batch per round vs centralized batch 40 (lockstep)")
    print()
    print("round   max |W_fed - W_cent|")
    gaps = []
    for i, (a, b) in enumerate(zip(fed_weights, cent_weights), start=1):
        gaps.append(fs.max_abs_diff(a, b))
        if i % 20 == 0 or i == 1:
            print(f"{i:5d}   {gaps[-1]:.3e}")
    print()
    print(f"worst gap over {len(gaps)} rounds: {max(gaps):.3e}  (tolerance 1e-10)")


if __name__ == "__main__":
    main()
