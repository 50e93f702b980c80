"""Tour of the plain-numpy network engine.

Builds the two supported architectures, verifies the analytic gradients
against a finite-difference oracle, then trains a small MLP on synthetic
digit-like blobs to show that the engine actually learns something.

Run:  python3 demos/01_backprop_engine.py
"""

import numpy as np

from semifl import data, metrics, nn


def main():
    for arch in ("mlp", "cnn"):
        model = nn.init_model(arch, seed=0)
        print(f"{arch}: {model.num_params()} parameters, "
              f"layers {[l.name for l in model.layers]}")

    # gradient check on shrunken models (cheap, still covers every layer kind)
    rng = np.random.default_rng(7)
    tiny_mlp = nn.init_mlp(1, in_dim=12, hidden=5, out_dim=10)
    err = nn.grad_check(tiny_mlp, rng.random((4, 12)).astype(np.float32),
                        rng.integers(0, 10, 4))
    print(f"mlp grad check: max relative error {err:.2e}")

    tiny_cnn = nn.init_cnn(2, conv1=2, conv2=3, hidden=4, image_size=16)
    err = nn.grad_check(tiny_cnn, rng.random((2, 1, 16, 16)).astype(np.float32),
                        rng.integers(0, 10, 2), step=1e-4)
    print(f"cnn grad check: max relative error {err:.2e}")

    # learn a 10-class synthetic problem
    train = data.generate_synthetic(classes=10, per_class=60, seed=3)
    test = data.generate_synthetic(classes=10, per_class=20, seed=4)
    model = nn.init_mlp(5)
    cfg = nn.LocalTrainConfig(epochs=8, batch_size=20, learning_rate=0.05)
    before = metrics.evaluate_accuracy(model, test.images, test.labels)
    model, loss = nn.train_local_with_loss(model, train.images, train.labels,
                                           cfg, np.random.default_rng(6))
    after = metrics.evaluate_accuracy(model, test.images, test.labels)
    print(f"synthetic blobs: accuracy {before:.2f} -> {after:.2f} "
          f"(mean step loss {loss:.3f})")


if __name__ == "__main__":
    main()
