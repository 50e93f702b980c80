"""The three training modes side by side, on the same synthetic federation.

100 single-label clients train the same MLP under (a) clustered sequential
training with one upload per cluster, (b) classic federated averaging with
full and 10% participation, and (c) a centralized pool.  Prints a per-round
accuracy table plus what each mode paid in uplink traffic.

The ``semifl train`` command line wraps exactly this loop; see README.

Run:  python3 demos/03_federated_modes.py
"""

from semifl import checkpoint, clustering, data, federation, metrics, nn

ROUNDS = 6
SEED = 0


def main():
    source = data.generate_synthetic(classes=10, per_class=120, seed=SEED)
    test = data.generate_synthetic(classes=10, per_class=40, seed=SEED + 1)
    clients = data.partition(source,
                             data.PartitionPlan("noniid_shards", 100, 12, seed=SEED))
    assignment = clustering.build_pattern("c3", clients)
    pool = federation.pool_clients(clients)

    local = nn.LocalTrainConfig(epochs=1, batch_size=12, learning_rate=0.05)
    model_bytes = len(checkpoint.checkpoint_bytes(nn.init_mlp(SEED)))

    runs = {
        "semifl c3": ("semifl", 1.0),
        "fl 100%": ("fl", 1.0),
        "fl 10%": ("fl", 0.1),
        "central": ("cl", 1.0),
    }
    models = {name: nn.init_mlp(SEED) for name in runs}
    ledgers = {name: federation.CommLedger() for name in runs}

    print(f"round  " + "".join(f"{name:>12}" for name in runs))
    for t in range(1, ROUNDS + 1):
        row = []
        for name, (mode, frac) in runs.items():
            cfg = federation.FederationConfig(
                mode=mode, rounds=ROUNDS, client_fraction=frac, local=local,
                cl_batch_size=120, master_seed=SEED, model_bytes=model_bytes)
            if mode == "semifl":
                models[name], rec = federation.run_round_semifl(
                    models[name], clients, assignment, cfg, t)
            elif mode == "fl":
                models[name], rec = federation.run_round_fedavg(
                    models[name], clients, cfg, t)
            else:
                models[name], rec = federation.run_round_cl(
                    models[name], pool, cfg, t)
            ledgers[name].record(t, rec.uplink_models, rec.uplink_bytes, 1)
            acc = metrics.evaluate_accuracy(models[name], test.images, test.labels)
            row.append(f"{acc:>12.3f}")
        print(f"{t:>5}  " + "".join(row))

    print("\nuplink over the whole run:")
    for name, ledger in ledgers.items():
        print(f"  {name:>10}: {ledger.total_uplink_models:>4} model uploads, "
              f"{ledger.total_uplink_bytes / 1e6:.1f} MB")


if __name__ == "__main__":
    main()
