import numpy as np

from deepsight.pt.deepsight_classifier import LabelSet, train_reference_classifier
from deepsight.pt.deepsight_segmentation import segment_or_passthrough
from deepsight.pt.deepsight_segmentation_config import DeepSightSegmentationConfig

from common import solid_image, textured_scene

COLORS = [(200, 30, 30), (30, 200, 30), (30, 30, 200)]


def _color_classifier():
    labels = LabelSet(["red", "green", "blue"])
    samples = [(solid_image(16, 16, rgb), i) for i, rgb in enumerate(COLORS)]
    return train_reference_classifier(samples, labels, workers=1)


def test_segmenting_first_raises_true_class_score():
    rng = np.random.RandomState(2020)
    clf = _color_classifier()
    cfg = DeepSightSegmentationConfig()
    not_worse = 0
    improved = 0
    for case in range(10):
        truth = case % 3
        w, h = rng.randint(50, 81, size=2)
        x = rng.randint(10, 160 - w - 10)
        y = rng.randint(10, 160 - h - 10)
        img = textured_scene(160, 160, (x, y, w, h), COLORS[truth], rng, spread=3)

        before = clf.confidence_scores(img)[truth]
        segmented, _, _ = segment_or_passthrough(img, cfg)
        after = clf.confidence_scores(segmented)[truth]
        not_worse += int(after >= before)
        improved += int(after > before)
    assert not_worse >= 9
    assert improved >= 5


def test_uniform_image_scores_unchanged():
    clf = _color_classifier()
    img = solid_image(40, 40, COLORS[1])
    segmented, rect, fell_back = segment_or_passthrough(img)
    assert fell_back and rect is None
    assert np.array_equal(clf.confidence_scores(segmented), clf.confidence_scores(img))
