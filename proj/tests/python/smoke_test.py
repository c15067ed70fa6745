"""Smoke tests for the drsl_lab python module: a quick pass over every
exposed operation with known-value checks. Run via ctest or directly with
PYTHONPATH pointing at the built extension."""

import math
import os
import sys
import tempfile

import numpy as np

import drsl_lab as dl


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def test_softmax_and_distances():
    p = dl.softmax(np.array([1.0, 2.0, 3.0]))
    approx(p[0], 0.09003057, 1e-7)
    approx(p[2], 0.66524096, 1e-7)
    approx(p.sum(), 1.0, 1e-12)

    u = dl.uniform_distribution(4)
    assert np.allclose(u, 0.25)
    approx(dl.euclidean_distance(np.array([1.0, 0, 0, 0]), u), math.sqrt(3) / 2, 1e-12)
    approx(dl.cosine_distance(np.array([1.0, 0, 0, 0]), u), 0.5, 1e-12)


def test_losses():
    logits = np.array([[1.0, 2.0, 3.0]])
    labels = np.array([2])
    approx(dl.loss_value(logits, labels, kind="CE"), 0.40760596, 1e-7)
    approx(dl.loss_value(logits, labels, kind="GCE", q=0.7), 0.354613, 1e-5)
    approx(dl.loss_value(logits, labels, kind="DRSL", tau=0.5), 0.618086, 1e-5)
    # tau = 0 is exactly CE
    assert dl.loss_value(logits, labels, kind="DRSL", tau=0.0) == dl.loss_value(
        logits, labels, kind="CE"
    )
    # CE gradient is softmax minus one-hot
    value, grad = dl.loss_grad(logits, labels, kind="CE")
    expected = dl.softmax(logits[0]) - np.array([0.0, 0.0, 1.0])
    assert np.allclose(grad[0], expected, atol=1e-12)
    try:
        dl.loss_value(logits, labels, kind="GCE", q=2.0)
        raise AssertionError("expected ValueError for q out of range")
    except ValueError:
        pass


def test_model_and_attacks():
    model = dl.Model(architecture="MLP", input_shape=[1, 8, 8], hidden=[16, 12], seed=1)
    assert model.param_count() == (64 * 16 + 16) + (16 * 12 + 12) + (12 * 10 + 10)
    model.freeze()
    assert model.frozen()

    rng = np.random.default_rng(0)
    batch = rng.random((6, 1, 8, 8))
    labels = rng.integers(0, 10, size=6)
    logits = model.forward(batch)
    assert logits.shape == (6, 10)

    adv = dl.run_attack(model, batch, labels, kind="PGD", epsilon=0.1, steps=5)
    delta = np.abs(adv["adversarial"] - batch).max()
    assert delta <= 0.1 + 1e-7
    assert adv["adversarial"].min() >= 0.0 and adv["adversarial"].max() <= 1.0

    ident = dl.run_attack(model, batch, labels, kind="FGSM", epsilon=0.0)
    assert np.array_equal(ident["adversarial"], batch.clip(0.0, 1.0))


def test_dataset_noise_and_analysis():
    ds = dl.make_synthetic_mnist(400, seed=3)
    assert len(ds) == 400
    assert ds.images.shape == (400, 1, 28, 28)

    noisy, mask = dl.inject_label_noise(ds, rate=1.0, seed=5)
    assert len(mask) == 400
    assert (noisy.labels != ds.labels).all()

    model = dl.Model(seed=2)
    model.freeze()
    acc = dl.accuracy(model, ds)
    assert 0.0 <= acc <= 0.35  # untrained: near chance

    rep = dl.stochasticity(model, ds, metric="euclidean")
    approx(rep["max_possible"], math.sqrt(0.9), 1e-12)
    approx(rep["mean"], float(np.mean(rep["distances"])), 1e-12)

    ev = dl.evaluate_attack(model, ds.subset(100), kind="PGD", epsilon=0.1, steps=4)
    assert ev["robust_accuracy"] == ev["clean_accuracy"] * (1 - ev["attack_success_rate"])


def test_pca_and_pearson():
    approx(
        dl.pearson_correlation(
            np.array([1.0, 2.0, 3.0, 4.0]), np.array([1.0, 3.0, 2.0, 4.0])
        ),
        0.8,
        1e-12,
    )
    t = np.linspace(0.0, 1.0, 20)
    line = np.stack([3 * t, -t, 2 * t + 1], axis=1)
    scores, ratios = dl.pca_project(line, out_dims=2)
    assert scores.shape == (20, 2)
    approx(ratios[0], 1.0, 1e-9)


def test_checkpoint_roundtrip():
    model = dl.Model(hidden=[32, 16], seed=9)
    model.freeze()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.drsl")
        model.save(path)
        loaded = dl.Model.load(path)
        batch = np.zeros((1, 1, 28, 28))
        assert np.array_equal(model.forward(batch), loaded.forward(batch))


def test_experiment_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = os.path.join(tmp, "data")
        dl.generate_synthetic_mnist_files(data_dir, n_train=500, n_test=150, seed=1)
        config = os.path.join(tmp, "exp.cfg")
        out_dir = os.path.join(tmp, "out")
        with open(config, "w") as fh:
            fh.write(
                "\n".join(
                    [
                        "data.name = MNIST",
                        f"data.dir = {data_dir}",
                        "data.subset_size = 400",
                        "data.test_subset_size = 100",
                        "loss.kind = CE,DRSL",
                        "loss.tau = 0.5",
                        "train.epochs = 1",
                        "attack.epsilon = 0.1,0.2",
                        "attack.steps = 3",
                        "attack.subset_size = 50",
                        "seeds = 0",
                        f"output.dir = {out_dir}",
                    ]
                )
            )
        run_id = dl.run_experiment(config)
        assert len(run_id) == 16
        with open(os.path.join(out_dir, "metrics.csv")) as fh:
            header = fh.readline().strip()
        assert header == (
            "run_id,seed,loss_kind,tau,metric,epoch_or_eps,phase,clean_acc,"
            "robust_acc,asr,stoch_mean,second_argmax_rate,noise_rate"
        )
        import xml.etree.ElementTree as ET

        svg = os.path.join(out_dir, "robust_accuracy_vs_eps.svg")
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")


def main():
    tests = [
        test_softmax_and_distances,
        test_losses,
        test_model_and_attacks,
        test_dataset_noise_and_analysis,
        test_pca_and_pearson,
        test_checkpoint_roundtrip,
        test_experiment_pipeline,
    ]
    for test in tests:
        test()
        print(f"ok: {test.__name__}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    sys.exit(main())
