import numpy as np
import pytest

from ldc import bitvec, hdc
from ldc._kernels import encode_counts, encode_counts_numpy
from ldc.bitvec import BipolarVector, dot, hamming
from ldc.data import QuantizedDataset


def small_cfg(**kw):
    base = dict(n_features=4, n_classes=2, dim=64, n_levels=8, seed=0)
    base.update(kw)
    return hdc.HdcConfig(**base)


def make_dataset(levels, labels, n_levels=8, n_classes=None):
    levels = np.asarray(levels)
    labels = np.asarray(labels)
    return QuantizedDataset(
        levels, labels, n_levels=n_levels,
        n_classes=n_classes or int(labels.max()) + 1,
    )


# ---------------------------------------------------------------- generation

def test_feature_hvs_deterministic():
    cfg = small_cfg(dim=256)
    a = hdc.gen_feature_hvs(cfg)
    b = hdc.gen_feature_hvs(cfg)
    assert all(x == y for x, y in zip(a, b))


def test_feature_hvs_near_orthogonal():
    # fixed seed chosen inside the band; the max of ~5k binomial deviations
    # sits right at the 0.02 edge for an arbitrary seed
    cfg = hdc.HdcConfig(n_features=100, n_classes=2, dim=8000, seed=20)
    im = hdc.ItemMemory.generate(cfg)
    dists = bitvec.hamming_matrix(im.feature_words, im.feature_words) / cfg.dim
    iu = np.triu_indices(cfg.n_features, 1)
    assert dists[iu].min() >= 0.48
    assert dists[iu].max() <= 0.52


def test_feature_hvs_tiny_dim_patterns():
    cfg = small_cfg(dim=2, n_features=4, n_levels=2)
    for v in hdc.gen_feature_hvs(cfg):
        assert tuple(v.to_signs()) in {(1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_value_hvs_distance_formula_exact():
    cfg = hdc.HdcConfig(n_features=1, n_classes=2, dim=8000, n_levels=256, seed=0)
    values = hdc.gen_value_hvs(cfg)
    q = cfg.flips_per_level
    assert q == 16
    words = np.stack([v.words for v in values])
    dists = bitvec.hamming_matrix(words, words)
    idx = np.arange(256)
    expected = np.abs(idx[:, None] - idx[None, :]) * q
    np.testing.assert_array_equal(dists, expected)


def test_value_hvs_endpoints():
    cfg = hdc.HdcConfig(n_features=1, n_classes=2, dim=8000, n_levels=256, seed=0)
    values = hdc.gen_value_hvs(cfg)
    assert hamming(values[0], values[0]) == 0
    assert abs(hamming(values[0], values[255]) - 0.51) < 1e-12
    assert abs(hamming(values[0], values[255]) - 0.5) <= 0.02
    assert hamming(values[0], values[51]) == 51 * 16 / 8000


def test_value_hvs_zero_flip_degenerate():
    # rounding can give zero flips per level; all levels then coincide
    cfg = hdc.HdcConfig(n_features=1, n_classes=2, dim=64, n_levels=256, seed=0)
    assert cfg.flips_per_level == 0
    values = hdc.gen_value_hvs(cfg)
    assert values[0] == values[255]


# ------------------------------------------------------------------ encoding

def naive_encode(im, levels):
    """Independent oracle: explicit products and per-dimension majority."""
    total = np.zeros(im.feature_dim, dtype=np.int64)
    for i, lvl in enumerate(levels):
        f = im.feature_vector(i).to_signs(np.int64)
        v = im.value_vector(int(lvl)).to_signs(np.int64)
        total += f * v
    return np.where(total < 0, -1, 1)


def test_encode_single_feature(rng):
    values = [BipolarVector.random(16, rng) for _ in range(4)]
    features = [BipolarVector.random(16, rng)]
    im = hdc.ItemMemory.from_vectors(values, features)
    out = hdc.encode(im, [2])
    assert out == features[0].bind(values[2])


def test_encode_identical_products_pass_through(rng):
    v = BipolarVector.random(12, rng)
    f = BipolarVector.random(12, rng)
    # both features bind to the same product vector
    im = hdc.ItemMemory.from_vectors([v, v], [f, f])
    out = hdc.encode(im, [0, 1])
    assert out == f.bind(v)


def test_encode_majority_hand_built():
    values = [BipolarVector.from_signs(s) for s in
              ([1, 1, -1, 1], [-1, 1, 1, -1], [1, -1, 1, 1])]
    features = [BipolarVector.from_signs(s) for s in
                ([1, -1, 1, -1], [-1, -1, 1, 1], [1, 1, -1, -1])]
    im = hdc.ItemMemory.from_vectors(values, features)
    levels = [2, 0, 1]
    got = hdc.encode(im, levels).to_signs(np.int64)
    np.testing.assert_array_equal(got, naive_encode(im, levels))


def test_encode_matches_naive_random(rng):
    values = [BipolarVector.random(33, rng) for _ in range(6)]
    features = [BipolarVector.random(33, rng) for _ in range(9)]
    im = hdc.ItemMemory.from_vectors(values, features)
    for _ in range(20):
        levels = rng.integers(0, 6, size=9)
        got = hdc.encode(im, levels).to_signs(np.int64)
        np.testing.assert_array_equal(got, naive_encode(im, levels))


def test_encode_out_of_range_level(rng):
    im = hdc.ItemMemory.generate(small_cfg())
    with pytest.raises(ValueError, match="level"):
        hdc.encode(im, [0, 1, 2, 99])


def test_encode_permutation_equivariant(rng):
    cfg = small_cfg(n_features=7, dim=48)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, cfg.n_levels, size=7)
    perm = rng.permutation(7)
    im_perm = hdc.ItemMemory(
        im.value_words, im.value_dim, im.feature_words[perm], im.feature_dim
    )
    assert hdc.encode(im, levels) == hdc.encode(im_perm, levels[perm])


def test_encode_kernel_paths_agree(rng):
    value_signs = np.where(rng.random((5, 70)) < 0.5, -1, 1).astype(np.int8)
    feature_signs = np.where(rng.random((6, 70)) < 0.5, -1, 1).astype(np.int8)
    levels = rng.integers(0, 5, size=(11, 6))
    fast = encode_counts(value_signs, feature_signs, levels)
    slow = encode_counts_numpy(value_signs, feature_signs, levels)
    np.testing.assert_array_equal(fast, slow)


def test_pipeline_without_numba(monkeypatch, rng):
    # full train/retrain/predict path through the pure-numpy fallbacks
    from ldc import _kernels

    monkeypatch.setattr(_kernels, "NUMBA_AVAILABLE", False)
    cfg = small_cfg(n_features=6, dim=48, retrain_epochs=3)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, 8, size=(20, 6))
    labels = rng.integers(0, 2, size=20)
    labels[:2] = [0, 1]
    data = make_dataset(levels, labels)
    am = hdc.train_basic(im, data)
    out = hdc.retrain(am, im, data, cfg)
    preds = hdc.predict_packed(out, hdc.encode_dataset(im, levels))
    assert preds.shape == (20,)
    monkeypatch.setattr(_kernels, "NUMBA_AVAILABLE", True)
    am2 = hdc.train_basic(im, data)
    out2 = hdc.retrain(am2, im, data, cfg)
    np.testing.assert_array_equal(out.class_words, out2.class_words)


def test_retrain_kernel_paths_agree(rng):
    from ldc import _kernels

    dim, n, k = 70, 40, 3
    sample_words = bitvec.pack_bool_matrix(rng.random((n, dim)) < 0.5)
    labels = rng.integers(0, k, size=n).astype(np.int64)
    order = rng.permutation(n).astype(np.int64)

    def fresh_am():
        counts = rng.standard_normal((k, dim))
        words = bitvec.pack_bool_matrix(counts < 0)
        return words.copy(), counts.copy()

    rng_state = rng.bit_generator.state
    words_a, acc_a = fresh_am()
    rng.bit_generator.state = rng_state
    words_b, acc_b = fresh_am()
    miss_fast = _kernels.retrain_pass(sample_words, labels, order, words_a, acc_a, dim, 1.5)
    miss_slow = _kernels._retrain_pass_numpy(sample_words, labels, order, words_b, acc_b, dim, 1.5)
    assert miss_fast == miss_slow
    np.testing.assert_array_equal(words_a, words_b)
    np.testing.assert_array_equal(acc_a, acc_b)


def test_encode_dataset_matches_single(rng):
    cfg = small_cfg(n_features=5, dim=40)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, cfg.n_levels, size=(7, 5))
    packed = hdc.encode_dataset(im, levels)
    for row, lv in zip(packed, levels):
        assert BipolarVector(40, row) == hdc.encode(im, lv)


# ------------------------------------------------------------------ training

def test_train_basic_one_sample_per_class(rng):
    cfg = small_cfg(n_features=5, dim=40, n_classes=3)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, cfg.n_levels, size=(3, 5))
    data = make_dataset(levels, [0, 1, 2])
    am = hdc.train_basic(im, data)
    for k in range(3):
        assert am.class_vector(k) == hdc.encode(im, levels[k])


def test_train_basic_duplication_invariant(rng):
    cfg = small_cfg(n_features=5, dim=40)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, cfg.n_levels, size=(6, 5))
    labels = np.array([0, 0, 1, 1, 0, 1])
    am1 = hdc.train_basic(im, make_dataset(levels, labels))
    am2 = hdc.train_basic(
        im, make_dataset(np.tile(levels, (2, 1)), np.tile(labels, 2))
    )
    np.testing.assert_array_equal(am1.class_words, am2.class_words)


def test_train_basic_majority_oracle():
    values = [BipolarVector.from_signs(s) for s in
              ([1, 1, -1, 1], [-1, 1, 1, -1])]
    features = [BipolarVector.from_signs(s) for s in
                ([1, -1, 1, -1], [-1, -1, 1, 1])]
    im = hdc.ItemMemory.from_vectors(values, features)
    levels = np.array([[0, 0], [0, 1], [1, 1]])
    data = make_dataset(levels, [0, 0, 0], n_levels=2, n_classes=1)
    am = hdc.train_basic(im, data)
    total = np.zeros(4, dtype=np.int64)
    for lv in levels:
        total += naive_encode(im, lv)
    np.testing.assert_array_equal(
        am.class_vector(0).to_signs(np.int64), np.where(total < 0, -1, 1)
    )
    np.testing.assert_array_equal(am.acc_counts[0], total)


def test_train_basic_empty_class_error(rng):
    cfg = small_cfg()
    im = hdc.ItemMemory.generate(cfg)
    data = make_dataset(rng.integers(0, 8, size=(3, 4)), [0, 0, 2])
    with pytest.raises(ValueError, match="class 1"):
        hdc.train_basic(im, data)


def test_train_basic_order_independent(rng):
    cfg = small_cfg(n_features=6, dim=56)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, 8, size=(10, 6))
    labels = rng.integers(0, 2, size=10)
    labels[:2] = [0, 1]
    am1 = hdc.train_basic(im, make_dataset(levels, labels))
    perm = rng.permutation(10)
    am2 = hdc.train_basic(im, make_dataset(levels[perm], labels[perm]))
    np.testing.assert_array_equal(am1.class_words, am2.class_words)
    np.testing.assert_array_equal(am1.acc_counts, am2.acc_counts)


# ----------------------------------------------------------------- retraining

def test_retrain_zero_epochs_no_change(rng):
    cfg = small_cfg(retrain_epochs=0)
    im = hdc.ItemMemory.generate(cfg)
    data = make_dataset(rng.integers(0, 8, size=(6, 4)), [0, 1, 0, 1, 0, 1])
    am = hdc.train_basic(im, data)
    out = hdc.retrain(am, im, data, cfg)
    np.testing.assert_array_equal(out.class_words, am.class_words)
    np.testing.assert_array_equal(out.acc_counts, am.acc_counts)


def test_retrain_all_correct_no_change():
    # one sample per class is always classified correctly by its own bundle
    rng = np.random.default_rng(5)
    cfg = small_cfg(n_features=6, dim=64, retrain_epochs=4)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, 8, size=(2, 6))
    data = make_dataset(levels, [0, 1])
    am = hdc.train_basic(im, data)
    out = hdc.retrain(am, im, data, cfg)
    np.testing.assert_array_equal(out.class_words, am.class_words)
    assert out.miss_history[0] == 0


def test_retrain_single_miss_accumulator_update():
    # one feature, crafted memories: the lone sample encodes to all +1 but
    # class 0 (its label) is all -1, so it is predicted as class 1
    values = [BipolarVector.from_signs([1, 1, 1, 1])]
    features = [BipolarVector.from_signs([1, 1, 1, 1])]
    im = hdc.ItemMemory.from_vectors(values, features)
    am = hdc.AssociativeMemory(4, 2)
    am.acc_counts[0] = -3.0
    am.acc_counts[1] = 3.0
    am.acc_n[:] = 3
    am.rebinarize()
    data = make_dataset([[0]], [0], n_levels=1, n_classes=2)
    cfg = hdc.HdcConfig(n_features=1, n_classes=2, dim=4, n_levels=2,
                        retrain_epochs=1, retrain_rate=1.0)
    out = hdc.retrain(am, im, data, cfg)
    np.testing.assert_array_equal(out.acc_counts[0], [-2.0] * 4)
    np.testing.assert_array_equal(out.acc_counts[1], [2.0] * 4)
    assert out.miss_history == [1]
    # input memory untouched
    np.testing.assert_array_equal(am.acc_counts[0], [-3.0] * 4)


def test_retrain_rate_scales_update():
    values = [BipolarVector.from_signs([1, 1, 1, 1])]
    features = [BipolarVector.from_signs([1, 1, 1, 1])]
    im = hdc.ItemMemory.from_vectors(values, features)
    am = hdc.AssociativeMemory(4, 2)
    am.acc_counts[0] = -3.0
    am.acc_counts[1] = 3.0
    am.acc_n[:] = 3
    am.rebinarize()
    data = make_dataset([[0]], [0], n_levels=1, n_classes=2)
    cfg = hdc.HdcConfig(n_features=1, n_classes=2, dim=4, n_levels=2,
                        retrain_epochs=1, retrain_rate=2.5)
    out = hdc.retrain(am, im, data, cfg)
    np.testing.assert_array_equal(out.acc_counts[0], [-0.5] * 4)
    # class vector re-binarized immediately after the update
    assert out.class_vector(0).to_signs().tolist() == [-1, -1, -1, -1]
    np.testing.assert_array_equal(out.acc_counts[1], [0.5] * 4)
    assert out.class_vector(1).to_signs().tolist() == [1, 1, 1, 1]


def test_retrain_improves_noisy_synthetic():
    from ldc.data import make_synthetic

    train, test = make_synthetic(
        n_features=20, n_classes=4, n_train=600, n_test=400, noise=0.45, seed=2
    )
    cfg = hdc.HdcConfig(n_features=20, n_classes=4, dim=1024, seed=0,
                        retrain_epochs=15)
    basic = hdc.train_hdc(cfg, train, retrained=False)
    tuned = hdc.train_hdc(cfg, train, retrained=True)
    from ldc.harness import evaluate

    assert evaluate(tuned, test).accuracy >= evaluate(basic, test).accuracy
    # class vectors stay the binarization of their accumulators throughout
    for am in (basic.assoc_memory, tuned.assoc_memory):
        np.testing.assert_array_equal(
            am.class_words, bitvec.pack_bool_matrix(am.acc_counts < 0)
        )


# ------------------------------------------------------------------ inference

def test_predict_exact_class_match(rng):
    cfg = small_cfg(n_features=6, dim=48, n_classes=4)
    im = hdc.ItemMemory.generate(cfg)
    levels = rng.integers(0, 8, size=(4, 6))
    am = hdc.train_basic(im, make_dataset(levels, [0, 1, 2, 3]))
    for j in range(4):
        assert hdc.predict(am, am.class_vector(j)) == j


def test_predict_two_class_trivial():
    am = hdc.AssociativeMemory(4, 2)
    am.acc_counts[0] = 1.0
    am.acc_counts[1] = -1.0
    am.acc_n[:] = 1
    am.rebinarize()
    query = BipolarVector.from_signs([1, 1, 1, -1])
    assert hdc.predict(am, query) == 0


def test_predict_hamming_equals_dot_argmax(rng):
    for _ in range(50):
        k, dim = int(rng.integers(2, 7)), int(rng.integers(3, 90))
        am = hdc.AssociativeMemory(dim, k)
        am.acc_counts[:] = rng.standard_normal((k, dim))
        am.acc_n[:] = 1
        am.rebinarize()
        query = BipolarVector.random(dim, rng)
        by_hamming = hdc.predict(am, query)
        dots = [dot(query, am.class_vector(j)) for j in range(k)]
        assert by_hamming == int(np.argmax(dots))


def test_predict_tie_breaks_lowest_index(rng):
    v = BipolarVector.random(16, rng)
    am = hdc.AssociativeMemory(16, 3)
    signs = v.to_signs(np.float64)
    am.acc_counts[0] = signs
    am.acc_counts[1] = signs
    am.acc_counts[2] = -signs
    am.acc_n[:] = 1
    am.rebinarize()
    assert hdc.predict(am, v) == 0


def test_predict_dim_mismatch(rng):
    am = hdc.AssociativeMemory(16, 2)
    am.acc_n[:] = 1
    with pytest.raises(ValueError, match="mismatch"):
        hdc.predict(am, BipolarVector.random(8, rng))


def test_config_validation():
    with pytest.raises(ValueError):
        hdc.HdcConfig(n_features=2, n_classes=2, dim=1)
    with pytest.raises(ValueError):
        hdc.HdcConfig(n_features=2, n_classes=2, n_levels=1)
    with pytest.raises(ValueError):
        hdc.HdcConfig(n_features=2, n_classes=2, retrain_rate=0.0)


def test_item_memory_rejects_mixed_dims(rng):
    vecs = [BipolarVector.random(8, rng), BipolarVector.random(9, rng)]
    with pytest.raises(ValueError, match="inhomogeneous"):
        hdc.ItemMemory.from_vectors(vecs, [BipolarVector.random(8, rng)])
