import numpy as np
import pytest

from deepsight.pt.deepsight_image import GrayPlane
from deepsight.pt.deepsight_segmentation import filter_contours, find_contours

from common import nesting_oracle


def _random_binary(rng):
    height, width = rng.randint(1, 17, size=2)
    density = rng.uniform(0.2, 0.8)
    return (rng.random_sample((height, width)) < density).astype(np.float64)


def _check_against_oracle(binary):
    contours = find_contours(GrayPlane(binary))
    labels, areas, parents = nesting_oracle(binary.astype(bool))

    assert len(contours) == len(areas)
    component_of = []
    for contour in contours:
        x, y = contour.points[0]
        component = labels[y, x]
        assert component >= 0
        assert all(labels[py, px] == component for px, py in contour.points)
        component_of.append(component)
    assert sorted(component_of) == list(range(len(areas)))

    for contour, component in zip(contours, component_of):
        assert contour.area == areas[component]
        if parents[component] is None:
            assert contour.parent is None
        else:
            assert contour.parent is not None
            assert component_of[contour.parent] == parents[component]


def test_hierarchy_matches_oracle():
    rng = np.random.RandomState(1234)
    for _ in range(250):
        _check_against_oracle(_random_binary(rng))


def test_sparse_images_match_oracle():
    rng = np.random.RandomState(99)
    for _ in range(100):
        height, width = rng.randint(3, 17, size=2)
        binary = (rng.random_sample((height, width)) < 0.15).astype(np.float64)
        _check_against_oracle(binary)


@pytest.mark.parametrize('levels', [1, 2, 3, 4])
def test_nested_rings(levels):
    size = 4 * levels + 3
    data = np.zeros((size, size))
    for level in range(levels):
        lo, hi = 1 + 2 * level, size - 1 - 2 * level
        data[lo:hi, lo:hi] = 1
        data[lo + 1:hi - 1, lo + 1:hi - 1] = 0
    contours = find_contours(GrayPlane(data))
    assert len(contours) == levels
    by_area = sorted(range(levels), key=lambda i: -contours[i].area)
    assert contours[by_area[0]].parent is None
    for outer, inner in zip(by_area, by_area[1:]):
        assert contours[inner].parent == outer
    _check_against_oracle(data)


def test_diagonal_ring_encloses_hole():
    data = np.zeros((5, 5))
    for x, y in [(2, 1), (1, 2), (3, 2), (2, 3)]:
        data[y, x] = 1
    contours = find_contours(GrayPlane(data))
    assert len(contours) == 1
    assert contours[0].area == 5


def test_areas_are_translation_invariant():
    rng = np.random.RandomState(7)
    shape = (rng.random_sample((6, 6)) < 0.5).astype(np.float64)
    small = np.zeros((16, 16))
    small[1:7, 2:8] = shape
    moved = np.zeros((16, 16))
    moved[8:14, 9:15] = shape

    first = find_contours(GrayPlane(small))
    second = find_contours(GrayPlane(moved))
    assert sorted(c.area for c in first) == sorted(c.area for c in second)
    assert sorted(c.bounding_rect().translate(7, 7) for c in first) == \
        sorted(c.bounding_rect() for c in second)


def test_filter_then_parents_still_enclose():
    rng = np.random.RandomState(3)
    for _ in range(50):
        binary = (rng.random_sample((16, 16)) < 0.55).astype(np.float64)
        kept = filter_contours(find_contours(GrayPlane(binary)), binary.size, 0.02)
        for contour in kept:
            if contour.parent is not None:
                parent = kept[contour.parent]
                assert parent.area > contour.area
                outer = parent.bounding_rect()
                inner = contour.bounding_rect()
                assert outer.x <= inner.x and outer.y <= inner.y
                assert outer.right >= inner.right and outer.bottom >= inner.bottom
