"""Round drivers for the three training modes.

* ``semifl`` -- clients inside each cluster train sequentially (each starts
  from its predecessor's weights); the cluster's last model is its head; the
  server averages the N heads.
* ``fl``     -- classic FedAvg: sample max(1, round(C*K)) clients, each
  trains from the same global snapshot, uniform average of the results.
* ``cl``     -- centralized pooled minibatch SGD; one round is one epoch.

Every random draw is keyed by (master_seed, purpose, round, id) through
``SeedSequence``, so a client's training stream depends only on who it is
and which round it is -- not on scheduling order.  Aggregation folds models
in ascending index order and accumulates in float64, so averaging N copies
of the same model reproduces it bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterAssignment
from .data import ClientDataset, LabeledSet
from .errors import ConfigError
from .nn import LocalTrainConfig, ModelParams, LayerParams, train_local_with_loss

MODES = ("semifl", "fl", "cl")

# stream purposes
_KIND_TRAIN = 0   # per-client local training (shuffles)
_KIND_SAMPLE = 1  # per-round FedAvg client sampling
_KIND_CL = 2      # per-round centralized epoch shuffle


def stream(master_seed: int, kind: int, round_idx: int, ident: int = 0) -> np.random.Generator:
    """Independent generator for one (purpose, round, id) slot."""
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, kind, round_idx, ident]))


@dataclass(frozen=True)
class FederationConfig:
    """Run-wide knobs shared by all round drivers."""

    mode: str = "semifl"
    rounds: int = 200
    client_fraction: float = 1.0
    local: LocalTrainConfig = field(default_factory=LocalTrainConfig)
    cl_batch_size: int = 200
    eval_every: int = 5
    master_seed: int = 0
    model_bytes: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 < self.client_fraction <= 1.0:
            raise ConfigError(f"client_fraction must be in (0, 1], got {self.client_fraction}")
        if self.cl_batch_size < 1:
            raise ConfigError(f"cl_batch_size must be >= 1, got {self.cl_batch_size}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")


@dataclass
class RoundRecord:
    """Per-round facts destined for the metrics CSV."""

    round: int
    mode: str
    pattern: str
    test_accuracy: float = float("nan")
    train_loss: float = float("nan")
    uplink_models: int = 0
    uplink_bytes: int = 0
    elapsed_ms: int = 0


@dataclass
class CommLedger:
    """Cumulative communication accounting across rounds."""

    entries: list[tuple[int, int, int, int]] = field(default_factory=list)

    def record(self, round_idx: int, uplink_models: int, uplink_bytes: int,
               downlink_models: int) -> None:
        self.entries.append((round_idx, uplink_models, uplink_bytes, downlink_models))

    @property
    def total_uplink_models(self) -> int:
        return sum(e[1] for e in self.entries)

    @property
    def total_uplink_bytes(self) -> int:
        return sum(e[2] for e in self.entries)


def uplink_cost(mode: str, num_clients: int, client_fraction: float,
                num_clusters: int, model_bytes: int) -> int:
    """Bytes sent client->server in one round of the given mode."""
    return num_uplink_models(mode, num_clients, client_fraction, num_clusters) * model_bytes


def num_uplink_models(mode: str, num_clients: int, client_fraction: float,
                      num_clusters: int) -> int:
    """Model uploads per round: N for semifl, max(1, round(C*K)) for fl, 0 for cl."""
    if mode == "semifl":
        return num_clusters
    if mode == "fl":
        return max(1, round(client_fraction * num_clients))
    if mode == "cl":
        return 0
    raise ConfigError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# aggregation


def aggregate_mean(models: list[ModelParams]) -> ModelParams:
    """Unweighted layer-wise mean, folding in ascending list order.

    Sums are accumulated in float64 and cast back to the input dtype, so the
    mean of N identical models is bit-identical to the input.
    """
    if not models:
        raise ValueError("cannot aggregate an empty model list")
    first = models[0]
    out_dtype = first.dtype
    sums = [(np.zeros_like(lp.weights, dtype=np.float64),
             np.zeros_like(lp.bias, dtype=np.float64)) for lp in first.layers]
    for m in models:
        if m.arch != first.arch or len(m.layers) != len(first.layers):
            raise ValueError(f"cannot average {first.arch} with {m.arch}")
        for (ws, bs), lp in zip(sums, m.layers):
            if ws.shape != lp.weights.shape or bs.shape != lp.bias.shape:
                raise ValueError(f"layer {lp.name}: shape mismatch in aggregation")
            ws += lp.weights
            bs += lp.bias
    n = len(models)
    layers = tuple(
        LayerParams(lp.name, (ws / n).astype(out_dtype), (bs / n).astype(out_dtype))
        for (ws, bs), lp in zip(sums, first.layers)
    )
    return ModelParams(first.arch, layers)


# ---------------------------------------------------------------------------
# round drivers


def train_cluster_sequential(global_model: ModelParams,
                             cluster: list[ClientDataset],
                             cfg: LocalTrainConfig,
                             streams) -> ModelParams:
    """Chain local training through the cluster; the last client's model is the head.

    ``streams`` maps a client id to that client's round generator.  Client k
    initialises from client k-1's output (the first from the global model).
    """
    head, _ = _train_cluster(global_model, cluster, cfg, streams)
    return head


def _train_cluster(global_model, cluster, cfg, streams):
    if not cluster:
        raise ConfigError("empty cluster")
    model = global_model
    losses = []
    for client in cluster:
        model, loss = train_local_with_loss(
            model, client.examples.images, client.examples.labels,
            cfg, streams(client.client_id))
        losses.append(loss)
    return model, losses


def run_round_semifl(model: ModelParams, clients: list[ClientDataset],
                     assignment: ClusterAssignment, cfg: FederationConfig,
                     round_idx: int) -> tuple[ModelParams, RoundRecord]:
    """One global round: every cluster trains from the same snapshot, then average."""
    t0 = time.perf_counter()
    by_id = {c.client_id: c for c in clients}

    def streams(cid):
        return stream(cfg.master_seed, _KIND_TRAIN, round_idx, cid)

    heads = []
    losses = []
    for ci, cluster_ids in enumerate(assignment.clusters):
        try:
            cluster = [by_id[cid] for cid in cluster_ids]
        except KeyError as exc:
            raise ConfigError(f"cluster {ci} references unknown client {exc}") from exc
        try:
            head, cluster_losses = _train_cluster(model, cluster, cfg.local, streams)
        except (ConfigError, ValueError) as exc:
            raise type(exc)(f"cluster {ci}: {exc}") from exc
        heads.append(head)
        losses.extend(cluster_losses)

    new_model = aggregate_mean(heads)
    n = len(heads)
    rec = RoundRecord(
        round=round_idx, mode="semifl", pattern=assignment.pattern,
        train_loss=float(np.mean(losses)),
        uplink_models=n, uplink_bytes=n * cfg.model_bytes,
        elapsed_ms=int((time.perf_counter() - t0) * 1000))
    return new_model, rec


def run_round_fedavg(model: ModelParams, clients: list[ClientDataset],
                     cfg: FederationConfig, round_idx: int) -> tuple[ModelParams, RoundRecord]:
    """One FedAvg round over a sampled client subset (all start from the snapshot)."""
    t0 = time.perf_counter()
    ids = np.array(sorted(c.client_id for c in clients))
    by_id = {c.client_id: c for c in clients}
    m = max(1, round(cfg.client_fraction * len(ids)))
    if m < len(ids):
        sampler = stream(cfg.master_seed, _KIND_SAMPLE, round_idx)
        chosen = np.sort(sampler.choice(ids, size=m, replace=False))
    else:
        chosen = ids

    updates = []
    losses = []
    for cid in chosen:
        client = by_id[int(cid)]
        trained, loss = train_local_with_loss(
            model, client.examples.images, client.examples.labels,
            cfg.local, stream(cfg.master_seed, _KIND_TRAIN, round_idx, int(cid)))
        updates.append(trained)
        losses.append(loss)

    new_model = aggregate_mean(updates)
    rec = RoundRecord(
        round=round_idx, mode="fl", pattern="-",
        train_loss=float(np.mean(losses)),
        uplink_models=m, uplink_bytes=m * cfg.model_bytes,
        elapsed_ms=int((time.perf_counter() - t0) * 1000))
    return new_model, rec


def run_round_cl(model: ModelParams, pool: LabeledSet, cfg: FederationConfig,
                 round_idx: int) -> tuple[ModelParams, RoundRecord]:
    """One epoch of pooled minibatch SGD (the centralized baseline)."""
    t0 = time.perf_counter()
    epoch_cfg = LocalTrainConfig(epochs=1, batch_size=cfg.cl_batch_size,
                                 learning_rate=cfg.local.learning_rate)
    new_model, loss = train_local_with_loss(
        model, pool.images, pool.labels, epoch_cfg,
        stream(cfg.master_seed, _KIND_CL, round_idx))
    rec = RoundRecord(
        round=round_idx, mode="cl", pattern="-", train_loss=loss,
        uplink_models=0, uplink_bytes=0,
        elapsed_ms=int((time.perf_counter() - t0) * 1000))
    return new_model, rec


def run_cl(model: ModelParams, pool: LabeledSet, cfg: FederationConfig,
           eval_fn=None) -> tuple[ModelParams, list[RoundRecord]]:
    """Run the centralized baseline for ``cfg.rounds`` epochs.

    ``eval_fn(model) -> float`` is invoked on the federated evaluation cadence
    (every ``eval_every`` rounds and at the end) to fill in test accuracy.
    """
    records = []
    for t in range(1, cfg.rounds + 1):
        model, rec = run_round_cl(model, pool, cfg, t)
        if eval_fn is not None and (t % cfg.eval_every == 0 or t == cfg.rounds):
            rec.test_accuracy = float(eval_fn(model))
        records.append(rec)
    return model, records


def pool_clients(clients: list[ClientDataset]) -> LabeledSet:
    """Union of all client shards, concatenated in ascending client-id order."""
    ordered = sorted(clients, key=lambda c: c.client_id)
    images = np.concatenate([c.examples.images for c in ordered], axis=0)
    labels = np.concatenate([c.examples.labels for c in ordered], axis=0)
    return LabeledSet(images, labels)
