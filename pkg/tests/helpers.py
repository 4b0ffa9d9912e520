"""Shared fixtures: synthetic datasets and demo configs used across test modules."""
import numpy as np

from ccgae import Dataset, save_raw_dataset
from ccgae.rng import RngStream

# Two complementary 16-dim stripe patterns, one per class.
STRIPE_PROTOS = (
    np.array([1.0, 0.0] * 8),
    np.array([0.0, 1.0] * 8),
)


def make_stripes(seed: int = 12, per_class: int = 200, flip: float = 0.05) -> Dataset:
    """Binary stripes with a few random bit flips around each prototype."""
    rng = RngStream.from_seed(seed)
    examples, labels = [], []
    for c, proto in enumerate(STRIPE_PROTOS):
        for _ in range(per_class):
            flips = (rng.random(16) < flip).astype(np.float64)
            examples.append(np.abs(proto - flips))
            labels.append(c)
    return Dataset(np.array(examples), np.array(labels), n_classes=2)


def write_demo(tmp_path, **overrides):
    """A small trainable config + CCRAW dataset under tmp_path."""
    dataset = make_stripes(per_class=20)
    raw = tmp_path / "demo.ccraw"
    save_raw_dataset(raw, dataset)
    values = dict(
        model="gae", n_x=16, n_y=2, n_f=8, n_h=4,
        hidden_activation="relu", output_activation="logistic",
        loss="cross-entropy", corruption="salt-pepper", corruption_level=0.3,
        walkback=2, lr=0.05, anneal=0.995, momentum=0.9,
        batch_size=20, epochs=2, seed=11,
        train_raw=str(raw), image_rows=4, image_cols=4,
        checkpoint_out=str(tmp_path / "demo.ccgae"),
        log_out=str(tmp_path / "demo.csv"),
    )
    values.update(overrides)
    text = "\n".join(f"{k} = {v}" for k, v in values.items()) + "\n"
    config = tmp_path / "demo.cfg"
    config.write_text(text)
    return config, values
