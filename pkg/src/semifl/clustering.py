"""Grouping clients into clusters.

Four built-in label patterns (all assume ten digit classes):

* ``c1`` -- one cluster per label; cluster n holds every label-n client.
* ``c2`` -- ten clusters; cluster n holds the first half of label n's
  clients followed by the second half of label (n+1) mod 10's clients.
* ``c3`` -- clusters of ten clients, one client per label, labels ascending.
* ``c4`` -- label-agnostic: consecutive groups of ten clients by id.

Explicit assignments can also be loaded from a text file with one cluster
per line (space-separated client ids).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClientDataset
from .errors import DataError

PATTERNS = ("c1", "c2", "c3", "c4")
NUM_LABELS = 10


@dataclass(frozen=True)
class ClusterAssignment:
    """An ordered grouping of client ids into clusters."""

    pattern: str
    clusters: tuple[tuple[int, ...], ...]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def all_clients(self) -> tuple[int, ...]:
        return tuple(cid for cluster in self.clusters for cid in cluster)


def _clients_by_label(clients: list[ClientDataset]) -> dict[int, list[int]]:
    """Map label -> ascending client ids, for single-label clients only."""
    by_label: dict[int, list[int]] = {}
    for c in sorted(clients, key=lambda c: c.client_id):
        distinct = c.distinct_labels
        if len(distinct) != 1:
            raise DataError(f"client {c.client_id} holds labels {distinct}; "
                            f"label patterns require single-label clients")
        by_label.setdefault(distinct[0], []).append(c.client_id)
    return by_label


def build_pattern(pattern: str, clients: list[ClientDataset]) -> ClusterAssignment:
    """Construct one of the built-in patterns over the given clients.

    Clients of equal label are consumed in ascending client-id order.  Raises
    :class:`DataError` when the client population cannot realise the pattern.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")

    if pattern == "c4":
        ids = sorted(c.client_id for c in clients)
        if len(ids) % NUM_LABELS:
            raise DataError(f"c4 needs a multiple of {NUM_LABELS} clients, got {len(ids)}")
        size = NUM_LABELS
        groups = tuple(tuple(ids[i:i + size]) for i in range(0, len(ids), size))
        return ClusterAssignment("c4", groups)

    by_label = _clients_by_label(clients)
    missing = sorted(set(range(NUM_LABELS)) - set(by_label))
    if missing:
        raise DataError(f"pattern {pattern} needs clients for every label 0..9; "
                        f"missing labels {missing}")
    counts = {l: len(v) for l, v in by_label.items()}
    if len(set(counts.values())) != 1:
        raise DataError(f"pattern {pattern} needs equally many clients per label, "
                        f"got {counts}")
    per_label = counts[0]

    if pattern == "c1":
        groups = tuple(tuple(by_label[l]) for l in range(NUM_LABELS))
        return ClusterAssignment("c1", groups)

    if pattern == "c2":
        if per_label % 2:
            raise DataError(f"c2 splits each label's clients in half; "
                            f"{per_label} per label is odd")
        half = per_label // 2
        groups = []
        for n in range(NUM_LABELS):
            own = by_label[n][:half]
            borrowed = by_label[(n + 1) % NUM_LABELS][half:]
            groups.append(tuple(own + borrowed))
        return ClusterAssignment("c2", tuple(groups))

    # c3: the k-th client of each label forms cluster k
    groups = tuple(
        tuple(by_label[l][k] for l in range(NUM_LABELS)) for k in range(per_label)
    )
    return ClusterAssignment("c3", groups)


def validate(assignment: ClusterAssignment, clients: list[ClientDataset]) -> list[str]:
    """Return human-readable violations (empty list when the assignment is sound).

    Checks that clusters are disjoint, cover exactly the given clients, and --
    for c1/c2/c3 -- that each cluster's label composition matches the pattern.
    """
    problems: list[str] = []
    known = {c.client_id: c for c in clients}
    seen: dict[int, int] = {}
    for ci, cluster in enumerate(assignment.clusters):
        if not cluster:
            problems.append(f"cluster {ci} is empty")
        for cid in cluster:
            if cid in seen:
                problems.append(f"client {cid} appears in clusters {seen[cid]} and {ci}")
            seen[cid] = ci
            if cid not in known:
                problems.append(f"cluster {ci} references unknown client {cid}")
    uncovered = sorted(set(known) - set(seen))
    if uncovered:
        problems.append(f"clients not in any cluster: {uncovered}")
    if problems:
        return problems

    def labels_of(cid: int) -> tuple[int, ...]:
        return known[cid].distinct_labels

    if assignment.pattern in ("c1", "c2", "c3"):
        for ci, cluster in enumerate(assignment.clusters):
            if any(len(labels_of(cid)) != 1 for cid in cluster):
                problems.append(f"cluster {ci} contains a multi-label client")
                continue
            labels = [labels_of(cid)[0] for cid in cluster]
            if assignment.pattern == "c1" and len(set(labels)) != 1:
                problems.append(f"cluster {ci} mixes labels {sorted(set(labels))}, "
                                f"c1 wants one label per cluster")
            elif assignment.pattern == "c2":
                uniq = sorted(set(labels))
                adjacent = len(uniq) == 2 and \
                    ((uniq[0] + 1) % NUM_LABELS == uniq[1] or uniq == [0, 9])
                balanced = len(labels) % 2 == 0 and \
                    labels.count(uniq[0]) == len(labels) // 2
                if not (adjacent and balanced):
                    problems.append(f"cluster {ci} labels {sorted(labels)} are not an "
                                    f"even split of two adjacent labels")
            elif assignment.pattern == "c3":
                if sorted(labels) != list(range(NUM_LABELS)):
                    problems.append(f"cluster {ci} labels {sorted(labels)} are not "
                                    f"one of each digit")
    return problems


def shuffle_within_clusters(assignment: ClusterAssignment, seed: int) -> ClusterAssignment:
    """Permute the training order inside each cluster (cluster list order kept)."""
    rng = np.random.default_rng(seed)
    shuffled = tuple(
        tuple(np.asarray(cluster)[rng.permutation(len(cluster))].tolist())
        for cluster in assignment.clusters
    )
    return ClusterAssignment(assignment.pattern, shuffled)


def load_assignment(path) -> ClusterAssignment:
    """Read an explicit assignment file: one cluster per line, ids space-separated."""
    clusters = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    clusters.append(tuple(int(tok) for tok in line.split()))
                except ValueError as exc:
                    raise DataError(f"{path}:{ln}: not a client id list: {line!r}") from exc
    except OSError as exc:
        raise DataError(f"cannot read assignment file {path}: {exc}") from exc
    if not clusters:
        raise DataError(f"assignment file {path} defines no clusters")
    return ClusterAssignment("explicit", tuple(clusters))


def save_assignment(assignment: ClusterAssignment, path) -> None:
    """Write the explicit one-line-per-cluster format that load_assignment reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for cluster in assignment.clusters:
            fh.write(" ".join(str(cid) for cid in cluster) + "\n")
