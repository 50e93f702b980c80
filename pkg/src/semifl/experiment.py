"""End-to-end experiment orchestration.

``run_experiment`` takes a resolved :class:`ExperimentConfig` plus an output
directory and produces:

* ``config.resolved`` -- the full configuration echoed back (re-parseable)
* ``metrics.csv``     -- one row per evaluation round
* ``ledger.csv``      -- per-round communication accounting
* ``model_final.sfl1`` (and optional periodic checkpoints)

Two runs with the same configuration produce identical outputs apart from
the ``elapsed_ms`` column.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

from . import clustering, federation
from .checkpoint import checkpoint_bytes, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, render_config, resolve_data_dir, validate_config
from .data import LabeledSet, PartitionPlan, generate_synthetic, load_idx, partition
from .errors import ConfigError, DataError
from .federation import CommLedger, FederationConfig, RoundRecord
from .metrics import DivergenceReport, evaluate_accuracy, layer_divergence
from .nn import LocalTrainConfig, init_model

METRICS_COLUMNS = ("round", "mode", "pattern", "test_accuracy", "train_loss",
                   "uplink_models", "uplink_bytes", "elapsed_ms")

_MNIST_NAMES = {
    "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}


def _find_idx_file(role: str, cfg: ExperimentConfig) -> str:
    explicit = getattr(cfg, role)
    if explicit:
        if not os.path.exists(explicit):
            raise DataError(f"{role}: file not found: {explicit}")
        return explicit
    root = resolve_data_dir(cfg)
    if not root:
        raise DataError(
            f"{role}: no path configured; set data_dir, the {role} key, or "
            f"the SEMIFL_DATA_DIR environment variable")
    candidates = []
    for name in _MNIST_NAMES[role]:
        candidates += [os.path.join(root, name), os.path.join(root, name + ".gz")]
    for cand in candidates:
        if os.path.exists(cand):
            return cand
    raise DataError(f"{role}: none of {', '.join(candidates)} exist")


def load_mnist(cfg: ExperimentConfig) -> tuple[LabeledSet, LabeledSet]:
    """Locate and read the train/test IDX pairs for an mnist-mode run."""
    train = load_idx(_find_idx_file("train_images", cfg),
                     _find_idx_file("train_labels", cfg))
    test = load_idx(_find_idx_file("test_images", cfg),
                    _find_idx_file("test_labels", cfg))
    return train, test


def load_datasets(cfg: ExperimentConfig) -> tuple[LabeledSet, LabeledSet]:
    """Train and test sets according to ``cfg.dataset``."""
    kind, synth = cfg.dataset_kind()
    if kind == "mnist":
        return load_mnist(cfg)
    classes, per_class = synth
    seed = cfg.effective_partition_seed
    train = generate_synthetic(classes, per_class, seed)
    test = generate_synthetic(classes, max(10, per_class // 4), seed + 1_000_003)
    return train, test


def build_clients(cfg: ExperimentConfig, train: LabeledSet):
    plan = PartitionPlan(
        mode="iid" if cfg.partition == "iid" else "noniid_shards",
        num_clients=cfg.clients, per_client=cfg.per_client,
        seed=cfg.effective_partition_seed)
    return partition(train, plan)


def build_assignment(cfg: ExperimentConfig, clients) -> clustering.ClusterAssignment:
    """Cluster assignment for a semifl run (pattern or explicit file + ordering)."""
    if cfg.pattern == "explicit":
        assignment = clustering.load_assignment(cfg.assignment_file)
        problems = clustering.validate(assignment, clients)
        if problems:
            raise DataError(f"{cfg.assignment_file}: " + "; ".join(problems))
    else:
        assignment = clustering.build_pattern(cfg.pattern, clients)
    kind, seed = cfg.order_spec()
    if kind == "shuffled":
        assignment = clustering.shuffle_within_clusters(assignment, seed)
    return assignment


def federation_config(cfg: ExperimentConfig, model_bytes: int) -> FederationConfig:
    return FederationConfig(
        mode=cfg.mode, rounds=cfg.rounds, client_fraction=cfg.client_fraction,
        local=LocalTrainConfig(epochs=cfg.local_epochs, batch_size=cfg.local_batch,
                               learning_rate=cfg.learning_rate),
        cl_batch_size=cfg.cl_batch, eval_every=cfg.eval_every,
        master_seed=cfg.master_seed, model_bytes=model_bytes)


def _format_row(rec: RoundRecord) -> dict:
    return {
        "round": rec.round,
        "mode": rec.mode,
        "pattern": rec.pattern,
        "test_accuracy": f"{rec.test_accuracy:.10g}",
        "train_loss": f"{rec.train_loss:.10g}",
        "uplink_models": rec.uplink_models,
        "uplink_bytes": rec.uplink_bytes,
        "elapsed_ms": rec.elapsed_ms,
    }


def run_experiment(cfg: ExperimentConfig, out_dir) -> list[RoundRecord]:
    """Execute one full run and write its artifacts into ``out_dir``."""
    validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(render_config(cfg), encoding="utf-8")

    train, test = load_datasets(cfg)
    clients = build_clients(cfg, train)
    assignment = build_assignment(cfg, clients) if cfg.mode == "semifl" else None
    pool = federation.pool_clients(clients) if cfg.mode == "cl" else None

    model = init_model(cfg.arch, cfg.master_seed)
    model_bytes = len(checkpoint_bytes(model))
    fed = federation_config(cfg, model_bytes)

    records: list[RoundRecord] = []
    ledger = CommLedger()
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for t in range(1, cfg.rounds + 1):
            if cfg.mode == "semifl":
                model, rec = federation.run_round_semifl(model, clients, assignment, fed, t)
                downlink = assignment.num_clusters
            elif cfg.mode == "fl":
                model, rec = federation.run_round_fedavg(model, clients, fed, t)
                downlink = rec.uplink_models
            else:
                model, rec = federation.run_round_cl(model, pool, fed, t)
                downlink = 0
            ledger.record(t, rec.uplink_models, rec.uplink_bytes, downlink)
            if t % cfg.eval_every == 0 or t == cfg.rounds:
                rec.test_accuracy = evaluate_accuracy(model, test.images, test.labels)
                writer.writerow(_format_row(rec))
                fh.flush()
            if cfg.checkpoint_every and t % cfg.checkpoint_every == 0:
                save_checkpoint(model, out / f"checkpoint_r{t:04d}.sfl1")
            records.append(rec)

    with open(out / "ledger.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "uplink_models", "uplink_bytes", "downlink_models"])
        writer.writerows(ledger.entries)

    save_checkpoint(model, out / "model_final.sfl1")
    return records


def compare_checkpoints(subject_path, reference_path) -> DivergenceReport:
    """Per-layer ACS/RED of one checkpoint against another (the reference)."""
    subject = load_checkpoint(subject_path)
    reference = load_checkpoint(reference_path)
    return layer_divergence(subject, reference,
                            subject_id=str(subject_path),
                            reference_id=str(reference_path))


def summarize_run(run_dir) -> dict:
    """Digest of one run directory's metrics.csv/ledger.csv for reporting."""
    run = Path(run_dir)
    metrics_path = run / "metrics.csv" if run.is_dir() else run
    if not metrics_path.exists():
        raise DataError(f"no metrics.csv under {run_dir}")
    rows = []
    with open(metrics_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    if not rows:
        raise DataError(f"{metrics_path}: no evaluation rows")
    last = rows[-1]
    best = max(float(r["test_accuracy"]) for r in rows)
    summary = {
        "run": str(run_dir),
        "mode": last["mode"],
        "pattern": last["pattern"],
        "rounds": int(last["round"]),
        "final_accuracy": float(last["test_accuracy"]),
        "best_accuracy": best,
    }
    ledger_path = metrics_path.parent / "ledger.csv"
    if ledger_path.exists():
        with open(ledger_path, newline="", encoding="utf-8") as fh:
            entries = list(csv.DictReader(fh))
        summary["total_uplink_models"] = sum(int(e["uplink_models"]) for e in entries)
        summary["total_uplink_bytes"] = sum(int(e["uplink_bytes"]) for e in entries)
    return summary
