import os

import numpy as np
import pytest

from deepsight.pt.deepsight_classifier import (CentroidClassifier,
                                               ChannelMean,
                                               ConvNetClassifier,
                                               LabelFileError,
                                               LabelSet,
                                               MissingClassError,
                                               ModelFormatError,
                                               ModelNotLoadedError,
                                               confidence_scores,
                                               histogram_feature,
                                               load_classifier,
                                               load_labels,
                                               predict_top_k,
                                               save_labels,
                                               set_worker_count,
                                               subtract_mean,
                                               top_k_from_scores,
                                               train_reference_classifier)
from deepsight.pt.deepsight_image import Image
from deepsight.pt.deepsight_layers import ConvSpec, FullSpec, PoolSpec

from common import BLUE, RED, solid_image, train_red_blue


def _labels_file(tmpdir, text, name="labels.txt"):
    path = os.path.join(str(tmpdir), name)
    with open(path, "w") as fd:
        fd.write(text)
    return path


def test_load_labels(tmpdir):
    assert load_labels(_labels_file(tmpdir, "red\nblue\n")).labels == ("red", "blue")
    assert load_labels(_labels_file(tmpdir, "a\nb\n\n\n", "t.txt")).labels == ("a", "b")


def test_load_labels_thousand(tmpdir):
    text = "".join("class {}\n".format(i) for i in range(1000))
    labels = load_labels(_labels_file(tmpdir, text))
    assert len(labels) == 1000
    assert labels[999] == "class 999"


def test_load_labels_errors(tmpdir):
    with pytest.raises(LabelFileError):
        load_labels(_labels_file(tmpdir, ""))
    with pytest.raises(LabelFileError):
        load_labels(os.path.join(str(tmpdir), "missing.txt"))


def test_save_labels_round_trip(tmpdir):
    labels = LabelSet(["tabby cat", "coffee mug"])
    path = os.path.join(str(tmpdir), "labels.txt")
    save_labels(labels, path)
    assert load_labels(path) == labels


def test_subtract_mean():
    img = solid_image(2, 2, (100, 50, 25))
    planes = subtract_mean(img, ChannelMean(0, 0, 0))
    assert [p.data[0, 0] for p in planes] == [100, 50, 25]
    planes = subtract_mean(img, ChannelMean(100, 50, 25))
    assert all(not p.data.any() for p in planes)
    planes = subtract_mean(img, ChannelMean(104.5, 0, 0))
    assert planes[0].data[1, 1] == -4.5


def test_channel_mean_range():
    with pytest.raises(ValueError):
        ChannelMean(-1, 0, 0)
    with pytest.raises(ValueError):
        ChannelMean(0, 256, 0)


def test_top_k_matches_sort_oracle():
    rng = np.random.RandomState(9)
    for _ in range(200):
        n = rng.randint(1, 12)
        scores = rng.randint(0, 5, size=n) / 4.0
        k = rng.randint(1, n + 1)
        expected = sorted(range(n), key=lambda i: (-scores[i], i))[:k]
        assert [p.index for p in top_k_from_scores(scores, k)] == expected


def test_top_k_ties_go_to_lower_index():
    assert [p.index for p in top_k_from_scores([0.2, 0.4, 0.4], 3)] == [1, 2, 0]


@pytest.mark.parametrize('k', [0, 4, -1])
def test_top_k_range(k):
    with pytest.raises(ValueError):
        top_k_from_scores([0.2, 0.3, 0.5], k)


def test_red_blue_centroids():
    clf = train_red_blue()
    top = predict_top_k(clf, solid_image(5, 5, RED), 1)
    assert clf.labels[top[0].index] == "red"
    assert clf.predict_top_k(solid_image(3, 3, BLUE), 1)[0].index == 1


def test_equidistant_query():
    clf = train_red_blue()
    data = np.zeros((2, 2, 3), dtype=np.uint8)
    data[0] = RED
    data[1] = BLUE
    np.testing.assert_allclose(confidence_scores(clf, Image(data)), [0.5, 0.5], atol=1e-12)


def test_scores_are_distributions():
    clf = train_red_blue()
    rng = np.random.RandomState(6)
    for _ in range(20):
        img = Image(rng.randint(0, 256, size=(6, 7, 3)).astype(np.uint8))
        scores = clf.confidence_scores(img)
        assert abs(scores.sum() - 1.0) <= 1e-6
        assert np.all((scores >= 0) & (scores <= 1))
        assert int(np.argmax(scores)) == clf.predict_top_k(img, 1)[0].index
        assert clf.predict_image(img) == [p.index for p in clf.predict_top_k(img, 2)]


def test_worker_count_does_not_change_scores():
    rng = np.random.RandomState(12)
    img = Image(rng.randint(0, 256, size=(37, 23, 3)).astype(np.uint8))
    clf = train_red_blue()
    results = []
    for n in (1, 2, 4):
        set_worker_count(clf, n)
        results.append(clf.confidence_scores(img))
        assert np.array_equal(histogram_feature(img, n), histogram_feature(img, 1))
    assert all(np.array_equal(results[0], r) for r in results[1:])


def test_batch_keeps_order():
    clf = train_red_blue(workers=4)
    images = [solid_image(4, 4, RED if i % 3 else BLUE) for i in range(9)]
    batch = clf.confidence_scores_batch(images)
    assert all(np.array_equal(b, clf.confidence_scores(img)) for b, img in zip(batch, images))


def test_worker_count_validation():
    clf = train_red_blue()
    with pytest.raises(ValueError):
        clf.set_worker_count(0)
    assert CentroidClassifier(LabelSet(["a"])).workers == 4


def test_single_class():
    labels = LabelSet(["only"])
    clf = train_reference_classifier([(solid_image(3, 3, RED), 0)], labels)
    scores = clf.confidence_scores(solid_image(4, 4, BLUE))
    assert scores.tolist() == [1.0]


def test_training_is_deterministic():
    assert np.array_equal(train_red_blue().centroids, train_red_blue().centroids)


def test_missing_class():
    labels = LabelSet(["red", "blue", "green"])
    with pytest.raises(MissingClassError):
        train_reference_classifier([(solid_image(2, 2, RED), 0), (solid_image(2, 2, BLUE), 1)],
                                   labels)


def test_model_not_loaded():
    clf = CentroidClassifier(LabelSet(["a", "b"]))
    with pytest.raises(ModelNotLoadedError):
        clf.confidence_scores(solid_image(2, 2, RED))


def test_centroid_save_load(tmpdir):
    clf = train_red_blue()
    model = os.path.join(str(tmpdir), "model.pt")
    labels = os.path.join(str(tmpdir), "labels.txt")
    clf.save(model)
    save_labels(clf.labels, labels)

    loaded = load_classifier(model, labels, workers=2)
    assert isinstance(loaded, CentroidClassifier)
    assert loaded.workers == 2
    assert np.array_equal(loaded.centroids, clf.centroids)

    fresh = CentroidClassifier(clf.labels).load_model(model)
    assert np.array_equal(fresh.centroids, clf.centroids)


def test_model_label_count_mismatch(tmpdir):
    model = os.path.join(str(tmpdir), "model.pt")
    train_red_blue().save(model)
    with pytest.raises(ModelFormatError):
        load_classifier(model, _labels_file(tmpdir, "red\nblue\ngreen\n"))


def test_bad_model_files(tmpdir):
    labels = _labels_file(tmpdir, "red\nblue\n")
    with pytest.raises(FileNotFoundError):
        load_classifier(os.path.join(str(tmpdir), "none.pt"), labels)
    garbage = os.path.join(str(tmpdir), "garbage.pt")
    with open(garbage, "wb") as fd:
        fd.write(b"not a model")
    with pytest.raises(ModelFormatError):
        load_classifier(garbage, labels)


def _tiny_convnet(labels, seed=0):
    rng = np.random.RandomState(seed)
    layers = [ConvSpec(3, 1, 0, 2), PoolSpec(2, 1), FullSpec(len(labels))]
    params = [(rng.randn(2, 3, 3, 3) * 0.01, rng.randn(2)),
              (rng.randn(len(labels), 2), rng.randn(len(labels)))]
    return ConvNetClassifier(labels, layers, params, input_shape=(4, 4), workers=1)


def test_convnet_scores():
    clf = _tiny_convnet(LabelSet(["a", "b", "c"]))
    clf.set_mean((104.0, 117.0, 123.0))
    img = Image(np.random.RandomState(1).randint(0, 256, size=(9, 7, 3)).astype(np.uint8))
    scores = clf.confidence_scores(img)
    assert scores.shape == (3, )
    assert abs(scores.sum() - 1.0) <= 1e-6
    assert np.array_equal(scores, clf.confidence_scores(img))


def test_convnet_save_load(tmpdir):
    labels = LabelSet(["a", "b", "c"])
    clf = _tiny_convnet(labels)
    clf.set_mean((10.0, 20.0, 30.0))
    model = os.path.join(str(tmpdir), "net.pt")
    clf.save(model)
    save_labels(labels, os.path.join(str(tmpdir), "labels.txt"))

    loaded = load_classifier(model, os.path.join(str(tmpdir), "labels.txt"))
    assert isinstance(loaded, ConvNetClassifier)
    assert loaded.mean == ChannelMean(10, 20, 30)
    img = solid_image(6, 6, (30, 60, 90))
    assert np.array_equal(loaded.confidence_scores(img), clf.confidence_scores(img))


def test_convnet_output_mismatch():
    with pytest.raises(ModelFormatError):
        ConvNetClassifier(LabelSet(["a", "b"]),
                          [ConvSpec(1, 1, 0, 1), FullSpec(3)],
                          [(np.ones((1, 3, 1, 1)), None), (np.ones((3, 1)), None)],
                          input_shape=(1, 1))


def test_load_model_wrong_kind(tmpdir):
    model = os.path.join(str(tmpdir), "model.pt")
    train_red_blue().save(model)
    with pytest.raises(ModelFormatError):
        ConvNetClassifier(LabelSet(["red", "blue"])).load_model(model)
