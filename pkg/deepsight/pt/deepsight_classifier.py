"""
Image classifiers.

Every classifier follows the same life cycle: construct with a label set, load a
model (or train one), optionally set the channel mean and worker count, then ask
for confidence scores or the top-k predictions of an image.
"""

import os
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil
import torch
from PIL import Image as PILImage

from deepsight.pt.deepsight_constants import CLASSIFIER_WORKERS_DEFAULT
from deepsight.pt.deepsight_image import GrayPlane, Image
from deepsight.pt.deepsight_layers import ConvSpec, FullSpec, PoolSpec, forward_network, softmax
from deepsight.pt.log_utils import logger

MODEL_FORMAT_VERSION = 1
MODEL_KIND_CENTROID = "centroid"
MODEL_KIND_CONVNET = "convnet"

HISTOGRAM_BINS = 8
_BIN_SHIFT = 5  # 256 / 8 levels per bin


class LabelFileError(OSError):
    pass


class ModelNotLoadedError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


class MissingClassError(ValueError):
    pass


Prediction = namedtuple("Prediction", ["index", "score"])


class LabelSet(object):
    """Ordered class descriptions; a label's position is its class index."""
    def __init__(self, labels):
        labels = tuple(str(l) for l in labels)
        if len(labels) == 0:
            raise ValueError("A label set needs at least one label")
        self._labels = labels

    @property
    def labels(self):
        return self._labels

    def index(self, label):
        return self._labels.index(label)

    def __len__(self):
        return len(self._labels)

    def __getitem__(self, i):
        return self._labels[i]

    def __iter__(self):
        return iter(self._labels)

    def __eq__(self, other):
        if not isinstance(other, LabelSet):
            return NotImplemented
        return self._labels == other._labels

    def __repr__(self):
        return "LabelSet({} labels)".format(len(self._labels))


def load_labels(path):
    """One label per line; trailing blank lines are ignored."""
    if not os.path.isfile(path):
        raise LabelFileError("Label file not found: {}".format(path))
    with open(path, "r", encoding="utf-8") as fd:
        lines = [line.rstrip("\r\n") for line in fd]
    while lines and lines[-1].strip() == "":
        lines.pop()
    if not lines:
        raise LabelFileError("Label file {} is empty".format(path))
    return LabelSet(lines)


def save_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fd:
        for label in labels:
            fd.write("{}\n".format(label))


class ChannelMean(namedtuple("ChannelMean", ["r", "g", "b"])):
    __slots__ = ()

    def __new__(cls, r, g, b):
        for v in (r, g, b):
            if not 0 <= v <= 255:
                raise ValueError("Channel means must lie in [0, 255], got {}".format((r, g, b)))
        return super(ChannelMean, cls).__new__(cls, float(r), float(g), float(b))


ZERO_MEAN = ChannelMean(0, 0, 0)


def subtract_mean(img, mean):
    """Per-channel planes with the dataset mean removed; values may go negative."""
    return tuple(
        GrayPlane(img.data[:, :, c].astype(np.float64) - mean[c]) for c in range(3))


def top_k_from_scores(scores, k):
    """Indices of the k best scores, descending, ties to the lower index."""
    n = len(scores)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValueError("k must lie in [1, {}], got {!r}".format(n, k))
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return [Prediction(i, float(scores[i])) for i in order[:k]]


def _check_worker_count(n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("Worker count must be a positive integer, got {!r}".format(n))
    cpus = psutil.cpu_count(logical=True)
    if cpus is not None and n > cpus:
        logger.warning("{} workers requested but only {} CPUs available".format(n, cpus))
    return int(n)


class Classifier(object):
    """Base class of all classifiers.

    Arguments:
        labels: LabelSet naming the classes
        workers: Optional: upper bound on parallel inference workers
    """
    kind = None

    def __init__(self, labels, workers=CLASSIFIER_WORKERS_DEFAULT):
        self.labels = labels
        self.workers = _check_worker_count(workers)
        self.mean = ZERO_MEAN

    @property
    def num_classes(self):
        return len(self.labels)

    @property
    def loaded(self):
        raise NotImplementedError

    def set_worker_count(self, n):
        self.workers = _check_worker_count(n)

    def set_mean(self, mean):
        self.mean = mean if isinstance(mean, ChannelMean) else ChannelMean(*mean)

    def _check_loaded(self):
        if not self.loaded:
            raise ModelNotLoadedError("{} has no model loaded".format(type(self).__name__))

    def _scores(self, img, workers):
        raise NotImplementedError

    def confidence_scores(self, img):
        """Probability of every class for one image."""
        self._check_loaded()
        return self._scores(img, self.workers)

    def confidence_scores_batch(self, images):
        """confidence_scores of many images, in input order."""
        self._check_loaded()
        images = list(images)
        if self.workers == 1 or len(images) <= 1:
            return [self._scores(img, 1) for img in images]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(lambda img: self._scores(img, 1), images))

    def predict_top_k(self, img, k):
        return top_k_from_scores(self.confidence_scores(img), k)

    def predict_image(self, img, k=None):
        """Class indices sorted by decreasing confidence."""
        k = self.num_classes if k is None else k
        return [p.index for p in self.predict_top_k(img, k)]

    def save(self, path):
        self._check_loaded()
        torch.save(self.state_dict(), path)
        logger.info("Saved {} model with {} classes to {}".format(
            self.kind,
            self.num_classes,
            path))

    def state_dict(self):
        raise NotImplementedError

    def load_state_dict(self, state):
        raise NotImplementedError

    def load_model(self, path):
        state = read_model_file(path)
        if state["kind"] != self.kind:
            raise ModelFormatError("{} holds a {} model, expected {}".format(
                path,
                state["kind"],
                self.kind))
        self.load_state_dict(state)
        return self


def histogram_feature(img, workers=1):
    """Joint 8x8x8 color histogram, L1 normalized.

    Rows are split between workers and the integer counts summed, so the result
    does not depend on the worker count.
    """
    data = img.data
    bins = ((data[:, :, 0] >> _BIN_SHIFT).astype(np.int64) * HISTOGRAM_BINS * HISTOGRAM_BINS +
            (data[:, :, 1] >> _BIN_SHIFT).astype(np.int64) * HISTOGRAM_BINS +
            (data[:, :, 2] >> _BIN_SHIFT).astype(np.int64))
    size = HISTOGRAM_BINS**3

    def count(rows):
        return np.bincount(rows.reshape(-1), minlength=size)

    chunks = np.array_split(bins, min(workers, bins.shape[0]), axis=0)
    if len(chunks) == 1:
        counts = count(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            counts = sum(pool.map(count, chunks))
    return counts.astype(np.float64) / float(bins.size)


class CentroidClassifier(Classifier):
    """Nearest centroid over color histograms.

    Scores are the softmax of negative euclidean distances between the image
    feature and each class centroid.
    """
    kind = MODEL_KIND_CENTROID

    def __init__(self, labels, centroids=None, workers=CLASSIFIER_WORKERS_DEFAULT):
        super(CentroidClassifier, self).__init__(labels, workers)
        self.centroids = None
        if centroids is not None:
            self._set_centroids(centroids)

    def _set_centroids(self, centroids):
        centroids = np.array(centroids, dtype=np.float64)
        expected = (len(self.labels), HISTOGRAM_BINS**3)
        if centroids.shape != expected:
            raise ModelFormatError("Centroid matrix has shape {}, expected {}".format(
                centroids.shape,
                expected))
        centroids.setflags(write=False)
        self.centroids = centroids

    @property
    def loaded(self):
        return self.centroids is not None

    def _scores(self, img, workers):
        feature = histogram_feature(img, workers)
        distances = np.sqrt(((self.centroids - feature)**2).sum(axis=1))
        return softmax(-distances)

    def state_dict(self):
        return {
            "kind": self.kind,
            "version": MODEL_FORMAT_VERSION,
            "num_labels": len(self.labels),
            "bins": HISTOGRAM_BINS,
            "centroids": torch.from_numpy(np.array(self.centroids)),
        }

    def load_state_dict(self, state):
        if state.get("bins") != HISTOGRAM_BINS:
            raise ModelFormatError("Unsupported histogram bin count {}".format(state.get("bins")))
        _check_num_labels(state, self.labels)
        self._set_centroids(state["centroids"].numpy())


def train_reference_classifier(samples, labels, workers=CLASSIFIER_WORKERS_DEFAULT):
    """Fit one histogram centroid per class.

    Arguments:
        samples: iterable of (Image, class index)
        labels: LabelSet

    Raises:
        MissingClassError if any class has no sample
    """
    features = [[] for _ in range(len(labels))]
    for img, index in samples:
        if not 0 <= index < len(labels):
            raise ValueError("Class index {} outside the {} labels".format(index, len(labels)))
        features[index].append(histogram_feature(img, workers))

    missing = [labels[i] for i, f in enumerate(features) if len(f) == 0]
    if missing:
        raise MissingClassError("No training samples for classes: {}".format(missing))

    centroids = np.stack([np.mean(np.stack(f), axis=0) for f in features])
    logger.info("Trained centroid classifier on {} samples, {} classes".format(
        sum(len(f) for f in features),
        len(labels)))
    return CentroidClassifier(labels, centroids, workers=workers)


def _layer_to_list(layer):
    if isinstance(layer, ConvSpec):
        return ["conv"] + list(layer)
    if isinstance(layer, PoolSpec):
        return ["pool"] + list(layer)
    return ["full"] + list(layer)


def _layer_from_list(entry):
    kind, values = entry[0], [int(v) for v in entry[1:]]
    if kind == "conv":
        return ConvSpec(*values)
    if kind == "pool":
        return PoolSpec(*values)
    if kind == "full":
        return FullSpec(*values)
    raise ModelFormatError("Unknown layer kind '{}'".format(kind))


class ConvNetClassifier(Classifier):
    """Forward-only convolutional network with injected weights.

    Images are resized to input_shape (height, width), mean subtracted and run
    through the layer list; the last layer must have one output per label.
    """
    kind = MODEL_KIND_CONVNET

    def __init__(self,
                 labels,
                 layers=None,
                 params=None,
                 input_shape=None,
                 workers=CLASSIFIER_WORKERS_DEFAULT):
        super(ConvNetClassifier, self).__init__(labels, workers)
        self.layers = None
        self.params = None
        self.input_shape = None
        if layers is not None:
            self._set_network(layers, params, input_shape)

    def _set_network(self, layers, params, input_shape):
        layers = list(layers)
        params = [(np.asarray(w, dtype=np.float64), None if b is None else np.asarray(b, dtype=np.float64))
                  for w, b in params]
        outputs = layers[-1].outputs if isinstance(layers[-1], FullSpec) else None
        if outputs is not None and outputs != len(self.labels):
            raise ModelFormatError("Network has {} outputs for {} labels".format(
                outputs,
                len(self.labels)))
        self.layers = layers
        self.params = params
        self.input_shape = tuple(int(v) for v in input_shape)

    @property
    def loaded(self):
        return self.layers is not None

    def _preprocess(self, img):
        height, width = self.input_shape
        if (img.height, img.width) != (height, width):
            resized = PILImage.fromarray(np.ascontiguousarray(img.data)).resize(
                (width, height), PILImage.BILINEAR)
            img = Image(np.asarray(resized))
        return np.stack([p.data for p in subtract_mean(img, self.mean)])

    def _scores(self, img, workers):
        scores = forward_network(self._preprocess(img), self.layers, self.params)
        if scores.shape[0] != len(self.labels):
            raise ModelFormatError("Network produced {} scores for {} labels".format(
                scores.shape[0],
                len(self.labels)))
        return scores

    def state_dict(self):
        params = []
        for w, b in self.params:
            params.append([torch.from_numpy(np.array(w)), None if b is None else torch.from_numpy(np.array(b))])
        return {
            "kind": self.kind,
            "version": MODEL_FORMAT_VERSION,
            "num_labels": len(self.labels),
            "input_shape": list(self.input_shape),
            "layers": [_layer_to_list(l) for l in self.layers],
            "params": params,
            "mean": list(self.mean),
        }

    def load_state_dict(self, state):
        _check_num_labels(state, self.labels)
        layers = [_layer_from_list(entry) for entry in state["layers"]]
        params = [(w.numpy(), None if b is None else b.numpy()) for w, b in state["params"]]
        self._set_network(layers, params, state["input_shape"])
        self.set_mean(state.get("mean", list(ZERO_MEAN)))


def _check_num_labels(state, labels):
    if state.get("num_labels") != len(labels):
        raise ModelFormatError("Model was built for {} labels, label file has {}".format(
            state.get("num_labels"),
            len(labels)))


def read_model_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError("Model file not found: {}".format(path))
    try:
        state = torch.load(path, map_location="cpu")
    except Exception as err:
        raise ModelFormatError("Cannot read model file {}: {}".format(path, err))
    if not isinstance(state, dict) or "kind" not in state:
        raise ModelFormatError("{} is not a DeepSight model file".format(path))
    if state.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError("Unsupported model version {} in {}".format(
            state.get("version"),
            path))
    return state


_MODEL_KINDS = {
    MODEL_KIND_CENTROID: CentroidClassifier,
    MODEL_KIND_CONVNET: ConvNetClassifier,
}


def load_classifier(model_path, labels_path, workers=CLASSIFIER_WORKERS_DEFAULT, mean=None):
    """Load labels and a model file of any supported kind."""
    labels = load_labels(labels_path)
    state = read_model_file(model_path)
    if state["kind"] not in _MODEL_KINDS:
        raise ModelFormatError("Unknown model kind '{}' in {}".format(state["kind"], model_path))
    clf = _MODEL_KINDS[state["kind"]](labels, workers=workers)
    clf.load_state_dict(state)
    if mean is not None:
        clf.set_mean(mean)
    logger.info("Loaded {} classifier from {} ({} classes, {} workers)".format(
        clf.kind,
        model_path,
        clf.num_classes,
        clf.workers))
    return clf


def predict_top_k(clf, img, k):
    return clf.predict_top_k(img, k)


def confidence_scores(clf, img):
    return clf.confidence_scores(img)


def set_worker_count(clf, n):
    clf.set_worker_count(n)
