"""End-to-end check on real handwritten digits (the 8x8 set bundled with
scikit-learn, so no files or network are needed). Exercises the whole
pipeline at realistic signal levels: quantization, training, extraction,
packed inference, serialization, and the trained-versus-random margin."""

import numpy as np
import pytest

sklearn_datasets = pytest.importorskip("sklearn.datasets")

from ldc import harness, hdc, network, store
from ldc.data import RawDataset, quantize
from ldc.network import LdcConfig, LdcNetwork, extract, network_forward, predict_binary
from ldc.train import TrainConfig, fit


@pytest.fixture(scope="module")
def digits():
    X, y = sklearn_datasets.load_digits(return_X_y=True)
    perm = np.random.default_rng(0).permutation(len(y))
    X, y = X[perm], y[perm]
    raw_train = RawDataset(X[:-450], y[:-450])
    raw_test = RawDataset(X[-450:], y[-450:])
    train = quantize(raw_train, n_classes=10, split="train")
    test = quantize(raw_test, norm=train.norm_params, n_classes=10, split="test")
    return train, test


@pytest.fixture(scope="module")
def trained(digits):
    train, _ = digits
    cfg = LdcConfig(n_features=64, n_classes=10, dim_value=4, dim_feature=64, seed=0)
    net = LdcNetwork.init(cfg)
    fit(net, train, TrainConfig(lr=3e-3, weight_decay=1e-4, epochs=100,
                                schedule="linear-decay", seed=0))
    return net, extract(net)


def test_trained_accuracy_beats_basic_hdc(digits, trained):
    train, test = digits
    _, model = trained
    ldc_acc = harness.evaluate(model, test).accuracy
    assert ldc_acc >= 0.88
    hcfg = hdc.HdcConfig(n_features=64, n_classes=10, dim=8000, seed=0)
    basic = harness.evaluate(hdc.train_hdc(hcfg, train), test).accuracy
    assert ldc_acc >= basic - 0.02  # 64 bits vs 8000, near parity or better


def test_equivalence_on_real_inputs(digits, trained):
    _, test = digits
    net, model = trained
    logits = network_forward(net, test.levels)
    batch = model.predict_batch(test.levels)
    np.testing.assert_array_equal(np.argmax(logits, axis=1), batch)
    singles = np.array([predict_binary(model, lv) for lv in test.levels[:100]])
    np.testing.assert_array_equal(singles, batch[:100])


def test_model_roundtrip_on_real_data(tmp_path, digits, trained):
    _, test = digits
    _, model = trained
    path = tmp_path / "digits.ldc"
    store.save(model, path)
    loaded = store.load(path)
    assert harness.evaluate(loaded, test).accuracy == harness.evaluate(model, test).accuracy


def test_robustness_degrades_gracefully(digits, trained):
    _, test = digits
    _, model = trained
    report = harness.robustness_sweep(model, test, [0.0, 1e-3, 1e-1, 0.5],
                                      runs=3, seed=0)
    assert report.means[0] >= 0.88
    # heavy corruption must cost accuracy; light corruption must not zero it
    assert report.means[-1] < report.means[0] - 0.2
    assert report.means[1] > 0.5
