"""Acceptance suite: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion.  Criterion 6 trains on real IDX digit files when
CCGAE_MNIST_DIR points at them; otherwise it falls back to the bundled
scikit-learn 8x8 digits (1797 examples).
"""
import functools
import os
import struct
import time
from pathlib import Path

import numpy as np
import numpy.testing as npt

from ccgae import (
    Activation,
    ChainConfig,
    CorruptionKind,
    CorruptionSpec,
    Dataset,
    GaeParams,
    LossKind,
    NaiveGatedParams,
    binarize,
    corrupt,
    dae_finite_diff_errors,
    fit,
    gae_backward,
    gae_finite_diff_errors,
    gae_reconstruct,
    init_gae,
    load_gae,
    load_idx_images,
    load_idx_labels,
    naive_gated_encode,
    run_chain,
    save_gae,
    walkback_losses,
    write_idx_images,
)
from ccgae.cli import EXIT_OK, main
from ccgae.gradients import random_dae_instance, random_gae_instance
from ccgae.models import gae_encode_preact
from ccgae.rng import RngStream
from ccgae.training import Hyperparams

from helpers import STRIPE_PROTOS, make_stripes, write_demo

SP = CorruptionKind.SALT_PEPPER


def criterion(number, name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {number} ({name}): FAIL")
                raise
            print(f"\nACCEPTANCE {number} ({name}): PASS")
            return result

        return run

    return wrap


@criterion(1, "gradient correctness")
def test_gradients_match_finite_differences_everywhere():
    start = time.perf_counter()
    worst = 0.0
    root = RngStream.from_seed(1001)
    for seed_idx in range(20):
        for kind in (LossKind.SQUARED_ERROR, LossKind.CROSS_ENTROPY):
            for hidden in (Activation.RELU, Activation.LOGISTIC):
                rng = root.split("gae", seed_idx, kind.value, hidden.value)
                p, x_tilde, y, target = random_gae_instance(
                    7, 3, 5, 4, kind, hidden, Activation.LOGISTIC, rng
                )
                errors = gae_finite_diff_errors(p, x_tilde, y, target, kind, epsilon=1e-5)
                worst = max(worst, max(errors.values()))

                rng = root.split("dae", seed_idx, kind.value, hidden.value)
                dp, dx_tilde, dtarget = random_dae_instance(
                    6, 4, kind, hidden, Activation.LOGISTIC, rng, tied=True
                )
                derrors = dae_finite_diff_errors(dp, dx_tilde, dtarget, kind, epsilon=1e-5)
                worst = max(worst, max(derrors.values()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-4, f"max relative error {worst:.3e}"
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


@criterion(2, "factored/naive equivalence")
def test_factored_encoder_equals_naive_tensor():
    start = time.perf_counter()
    root = RngStream.from_seed(1002)
    for i in range(50):
        rng = root.split(i)
        n_x, n_y, n_h = (int(v) for v in 1 + rng.gen.integers(7, size=3))
        n_f = int(1 + rng.gen.integers(7))
        p = GaeParams(
            wx=rng.normal(0, 1, (n_f, n_x)),
            wy=rng.normal(0, 1, (n_f, n_y)),
            wh=rng.normal(0, 1, (n_f, n_h)),
            b_h=rng.normal(0, 1, n_h),
            b_x=np.zeros(n_x),
            hidden_act=Activation.IDENTITY,
            output_act=Activation.IDENTITY,
        )
        tensor = np.einsum("fc,fi,fj->jci", p.wh, p.wx, p.wy)
        naive = NaiveGatedParams(w=tensor, b=p.b_h, hidden_act=Activation.IDENTITY)
        x = rng.normal(0, 1, n_x)
        y = rng.normal(0, 1, n_y)
        npt.assert_allclose(
            naive_gated_encode(naive, x, y), gae_encode_preact(p, x, y), atol=1e-10
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.1f}s"


@criterion(3, "corruption statistics")
def test_corruption_statistics():
    n = 100_000
    x = np.full(n, 0.3)
    out = corrupt(CorruptionSpec(SP, 0.5), x, RngStream.from_seed(1003))
    hit = out != 0.3
    assert abs(hit.mean() - 0.5) <= 0.01
    assert set(np.unique(out[hit])) <= {0.0, 1.0}
    assert abs(out[hit].mean() - 0.5) <= 0.01

    positive = np.full(n, 0.7)
    masked = corrupt(CorruptionSpec(CorruptionKind.MASKING, 0.3), positive, RngStream.from_seed(1004))
    assert np.all((masked == 0.0) | (masked == positive))
    assert abs((masked == 0.0).mean() - 0.3) <= 0.01


@criterion(4, "walkback oracle equivalence")
def test_walkback_matches_straight_line_oracle():
    rng = RngStream.from_seed(1005)
    p = init_gae(10, 3, 8, 5, Activation.RELU, Activation.LOGISTIC, rng.split("init"))
    x = (rng.random(10) < 0.5).astype(float)
    y = np.eye(3)[1]
    hp = Hyperparams(
        corruption=CorruptionSpec(SP, 0.4), walkback_k=5, lr0=0.1, anneal=1.0,
        momentum=0.9, batch_size=1, epochs=1, loss=LossKind.CROSS_ENTROPY,
        seed=9, resample_reconstructions=True,
    )
    loss, grads = walkback_losses(p, x, y, hp, RngStream.from_seed(9).split("wb"))

    stream = RngStream.from_seed(9).split("wb")
    state = x
    losses, grad_sets = [], []
    for step in range(5):
        x_tilde = corrupt(hp.corruption, state, stream)
        step_loss, step_grads = gae_backward(p, x_tilde, y, x, hp.loss)
        losses.append(step_loss)
        grad_sets.append(step_grads.blocks())
        if step < 4:
            state = stream.bernoulli(gae_reconstruct(p, x_tilde, y))
    npt.assert_allclose(loss, np.mean(losses), atol=1e-12, rtol=0)
    for name, block in grads.blocks().items():
        npt.assert_allclose(block, np.mean([g[name] for g in grad_sets], axis=0),
                            atol=1e-12, rtol=0)

    # degenerate walkback: k = 1 is exactly one denoising step
    hp1 = Hyperparams(
        corruption=CorruptionSpec(SP, 0.4), walkback_k=1, lr0=0.1, anneal=1.0,
        momentum=0.9, batch_size=1, epochs=1, loss=LossKind.CROSS_ENTROPY,
        seed=9, resample_reconstructions=True,
    )
    loss1, grads1 = walkback_losses(p, x, y, hp1, RngStream.from_seed(9).split("wb"))
    x_tilde = corrupt(hp1.corruption, x, RngStream.from_seed(9).split("wb"))
    plain_loss, plain_grads = gae_backward(p, x_tilde, y, x, hp1.loss)
    assert loss1 == plain_loss
    for name, block in grads1.blocks().items():
        npt.assert_array_equal(block, plain_grads.blocks()[name])


@criterion(5, "synthetic conditional generation")
def test_stripes_chains_track_the_conditioned_class():
    dataset = make_stripes(seed=12, per_class=200)
    hp = Hyperparams(
        corruption=CorruptionSpec(SP, 0.3), walkback_k=3, lr0=0.05, anneal=0.995,
        momentum=0.9, batch_size=20, epochs=50, loss=LossKind.CROSS_ENTROPY,
        seed=11, resample_reconstructions=True,
    )
    params = init_gae(16, 2, 32, 16, Activation.RELU, Activation.LOGISTIC,
                      RngStream.from_seed(11).split("init"))
    start = time.perf_counter()
    log = fit(params, dataset, hp)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"training took {elapsed:.1f}s"
    assert log[-1].mean_loss < log[0].mean_loss

    for label in (0, 1):
        cfg = ChainConfig(steps=100, corruption=CorruptionSpec(SP, 0.3), seed=5)
        trace = run_chain(params, label, cfg)
        states = trace.state[20:]  # post burn-in: steps 21..100
        dist = np.stack([np.abs(states - proto).sum(axis=1) for proto in STRIPE_PROTOS])
        nearest = dist.argmin(axis=0)
        frac = (nearest == label).mean()
        assert frac >= 0.90, f"label {label}: only {frac:.2%} of states near its prototype"


def _load_desk_scale_digits():
    mnist_dir = os.environ.get("CCGAE_MNIST_DIR")
    if mnist_dir:
        root = Path(mnist_dir)
        images = labels = None
        for name in ("train-images-idx3-ubyte.gz", "train-images-idx3-ubyte"):
            if (root / name).exists():
                images = load_idx_images(root / name)[:2000]
        for name in ("train-labels-idx1-ubyte.gz", "train-labels-idx1-ubyte"):
            if (root / name).exists():
                labels = load_idx_labels(root / name)[:2000]
        if images is not None and labels is not None:
            return Dataset(binarize(images, 0.5), labels, n_classes=10)
    from sklearn.datasets import load_digits

    raw = load_digits()
    flat = raw.images.reshape(len(raw.images), -1) / 16.0
    return Dataset(binarize(flat, 0.5), raw.target, n_classes=10)


@criterion(6, "desk-scale digit generation")
def test_desk_scale_digits():
    dataset = _load_desk_scale_digits()
    hp = Hyperparams(
        corruption=CorruptionSpec(SP, 0.5), walkback_k=5, lr0=0.1, anneal=0.995,
        momentum=0.9, batch_size=100, epochs=20, loss=LossKind.CROSS_ENTROPY,
        seed=77, resample_reconstructions=True,
    )
    params = init_gae(dataset.n_x, 10, 256, 128, Activation.RELU, Activation.LOGISTIC,
                      RngStream.from_seed(77).split("init"))
    log = fit(params, dataset, hp)
    assert log[-1].mean_loss < 0.7 * log[0].mean_loss, (
        f"final {log[-1].mean_loss:.3f} vs first {log[0].mean_loss:.3f}"
    )

    centroids = np.stack([
        dataset.examples[dataset.labels == c].mean(axis=0) for c in range(10)
    ])
    matches = []
    for label in range(10):
        cfg = ChainConfig(steps=100, corruption=CorruptionSpec(SP, 0.5), seed=5)
        trace = run_chain(params, label, cfg)
        expected = trace.expected[20:]
        dists = ((expected[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        matches.append((dists.argmin(axis=1) == label).mean())
    overall = float(np.mean(matches))
    assert overall >= 0.60, f"centroid match only {overall:.2%} (per class: {matches})"


@criterion(7, "determinism")
def test_cli_runs_are_byte_identical(tmp_path):
    config_a, values_a = write_demo(tmp_path, checkpoint_out=str(tmp_path / "a.ccgae"))
    assert main(["train", "--config", str(config_a)]) == EXIT_OK
    config_b, values_b = write_demo(tmp_path, checkpoint_out=str(tmp_path / "b.ccgae"))
    assert main(["train", "--config", str(config_b)]) == EXIT_OK
    blob_a = Path(values_a["checkpoint_out"]).read_bytes()
    blob_b = Path(values_b["checkpoint_out"]).read_bytes()
    assert blob_a == blob_b

    for out in ("s1.pgm", "s2.pgm"):
        assert main([
            "sample", "--checkpoint", values_a["checkpoint_out"], "--label", "1",
            "--steps", "25", "--seed", "3", "--out", str(tmp_path / out),
        ]) == EXIT_OK
    assert (tmp_path / "s1.pgm").read_bytes() == (tmp_path / "s2.pgm").read_bytes()


@criterion(8, "format fidelity")
def test_container_formats_are_bit_exact(tmp_path):
    # IDX round trip through the writer, byte for byte
    raw = struct.pack(">4I", 2051, 2, 2, 2) + bytes(range(8))
    src = tmp_path / "img.idx"
    src.write_bytes(raw)
    write_idx_images(tmp_path / "copy.idx", load_idx_images(src), 2, 2)
    assert (tmp_path / "copy.idx").read_bytes() == raw

    # PGM payload length is exactly width x height
    ckpt_cfg, values = write_demo(tmp_path)
    assert main(["train", "--config", str(ckpt_cfg)]) == EXIT_OK
    out = tmp_path / "grid.pgm"
    assert main(["sample", "--checkpoint", values["checkpoint_out"], "--label", "0",
                 "--steps", "12", "--out", str(out)]) == EXIT_OK
    blob = out.read_bytes()
    dims = blob.split(b"\n")[1]
    width, height = (int(t) for t in dims.split())
    payload = blob.split(b"\n", 3)[3]
    assert len(payload) == width * height

    # checkpoint round trip preserves every parameter bit
    rng = RngStream.from_seed(1008)
    p = init_gae(9, 4, 6, 5, Activation.RELU, Activation.LOGISTIC, rng)
    path = tmp_path / "model.ccgae"
    save_gae(path, p, LossKind.CROSS_ENTROPY)
    loaded, loss = load_gae(path)
    assert loss is LossKind.CROSS_ENTROPY
    for name, block in p.blocks().items():
        npt.assert_array_equal(loaded.blocks()[name], block)
