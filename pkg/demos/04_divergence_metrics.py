"""Measuring how far a federated model drifts from a centralized one.

Trains a centralized reference and three increasingly data-starved variants
on synthetic blobs, then compares each against the reference with the two
layer-wise divergence measures: averaged cosine similarity over weight
fibers (1.0 = identical direction) and relative Euclidean distance
(0.0 = identical).  Also shows the checkpoint format the comparison
normally reads from disk.

Run:  python3 demos/04_divergence_metrics.py
"""

import os
import tempfile

import numpy as np

from semifl import checkpoint, data, metrics, nn


def train(examples, seed, epochs):
    cfg = nn.LocalTrainConfig(epochs=epochs, batch_size=20, learning_rate=0.05)
    return nn.train_local(nn.init_mlp(0), examples.images, examples.labels,
                          cfg, np.random.default_rng(seed))


def main():
    full = data.generate_synthetic(classes=10, per_class=80, seed=0)
    reference = train(full, seed=1, epochs=8)

    variants = {
        "all 10 classes": full,
        "5 classes": full.take(np.flatnonzero(full.labels < 5)),
        "1 class": full.take(np.flatnonzero(full.labels == 3)),
    }
    print(f"{'subject':>16}  {'fc1 acs':>8}  {'fc1 red':>8}")
    for name, subset in variants.items():
        model = train(subset, seed=2, epochs=8)
        report = metrics.layer_divergence(model, reference,
                                          subject_id=name, reference_id="central")
        e = report.entry("fc1")
        print(f"{name:>16}  {e.acs:>8.3f}  {e.red:>8.3f}")

    # the same comparison straight from checkpoint files
    tmp = tempfile.mkdtemp()
    ref_path = os.path.join(tmp, "reference.sfl1")
    sub_path = os.path.join(tmp, "subject.sfl1")
    checkpoint.save_checkpoint(reference, ref_path)
    checkpoint.save_checkpoint(train(variants["1 class"], seed=2, epochs=8), sub_path)
    report = metrics.layer_divergence(checkpoint.load_checkpoint(sub_path),
                                      checkpoint.load_checkpoint(ref_path),
                                      subject_id="subject.sfl1",
                                      reference_id="reference.sfl1")
    print("\ncsv form (what `semifl compare` writes):")
    print(report.to_csv())
    print(f"checkpoint size on disk: {os.path.getsize(ref_path)} bytes")


if __name__ == "__main__":
    main()
