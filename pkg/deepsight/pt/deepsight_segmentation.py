"""
Edge based object segmentation.

The pipeline blurs every color channel, takes the Sobel gradient magnitude of
each, keeps the per-pixel maximum, suppresses responses below the mean, traces the
contour hierarchy of what remains and returns the bounding box of the largest
contour covering enough of the image.
"""

from collections import namedtuple

import cv2
import numpy as np

from deepsight.pt.deepsight_constants import SEG_OUTPUT_MODE_CROP, SEG_OUTPUT_MODE_MASK
from deepsight.pt.deepsight_image import GrayPlane, Image, Rect, crop, plane_mean, split_channels
from deepsight.pt.deepsight_segmentation_config import DeepSightSegmentationConfig
from deepsight.pt.log_utils import logger

MIN_SEGMENT_SIZE = 3


class NonBinaryPlaneError(ValueError):
    pass


class NoObjectFoundError(RuntimeError):
    """No contour survived area filtering; callers fall back to the full image."""


class GaussianKernel(namedtuple("GaussianKernel", ["size", "sigma", "weights"])):
    __slots__ = ()


class Contour(namedtuple("Contour", ["points", "parent", "area"])):
    """Outer border of one 8-connected foreground component.

    points is an ordered tuple of (x, y) pixels, parent the index of the enclosing
    contour in the same list or None, area the number of pixels inside the border
    including any holes.
    """
    __slots__ = ()

    def bounding_rect(self):
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return Rect(min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)

    def translate(self, dx, dy):
        return self._replace(points=tuple((x + dx, y + dy) for x, y in self.points))


SegmentationResult = namedtuple("SegmentationResult", ["image", "rect", "contour"])


def default_sigma(size):
    return 0.3 * ((size - 1) * 0.5 - 1) + 0.8


def make_gaussian_kernel(size, sigma=None):
    """Normalized 1-D Gaussian taps; sigma follows from size unless given."""
    if isinstance(size, bool) or not isinstance(size, (int, np.integer)):
        raise ValueError("Gaussian kernel size must be an integer, got {!r}".format(size))
    if size < 1 or size % 2 == 0:
        raise ValueError("Gaussian kernel size must be odd and positive, got {}".format(size))
    if sigma is None:
        sigma = default_sigma(size)
    if sigma <= 0:
        raise ValueError("Gaussian sigma must be positive, got {}".format(sigma))

    # numpy rather than cv2.getGaussianKernel, which uses fixed tables below size 7
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    weights /= weights.sum()
    weights = (weights + weights[::-1]) / 2.0
    weights.setflags(write=False)
    return GaussianKernel(int(size), float(sigma), weights)


def _as_cv(plane):
    return np.array(plane.data, dtype=np.float64, order="C")


def gaussian_blur(plane, kernel):
    if plane.size == 0:
        raise ValueError("Cannot blur an empty plane")
    if kernel.size == 1:
        return plane
    taps = np.array(kernel.weights, dtype=np.float64).reshape(-1, 1)
    blurred = cv2.sepFilter2D(_as_cv(plane),
                              cv2.CV_64F,
                              taps,
                              taps,
                              borderType=cv2.BORDER_REPLICATE)
    return GrayPlane(blurred)


def sobel_edges(plane):
    """Gradient magnitude sqrt(Gx^2 + Gy^2) of the 3x3 Sobel operator."""
    if plane.width < MIN_SEGMENT_SIZE or plane.height < MIN_SEGMENT_SIZE:
        raise ValueError("Sobel needs at least a 3x3 plane, got {}x{}".format(
            plane.width,
            plane.height))
    src = _as_cv(plane)
    gx = cv2.Sobel(src, cv2.CV_64F, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(src, cv2.CV_64F, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE)
    return GrayPlane(np.hypot(gx, gy))


def combine_channel_edges(r, g, b):
    if not (r.data.shape == g.data.shape == b.data.shape):
        raise ValueError("Edge planes differ in size: {}, {}, {}".format(
            r.data.shape,
            g.data.shape,
            b.data.shape))
    return GrayPlane(np.maximum(np.maximum(r.data, g.data), b.data))


def suppress_below_mean(plane):
    mean = plane_mean(plane)
    out = np.array(plane.data)
    out[out < mean] = 0.0
    return GrayPlane(out)


def binarize(plane):
    return GrayPlane((plane.data > 0).astype(np.float64))


def _contour_area(points):
    if len(points) == 1:
        return 1
    # lattice polygon through boundary pixel centres: pixels = area + steps / 2 + 1
    polygon = np.asarray(points, dtype=np.float64).reshape(-1, 1, 2)
    return int(round(abs(cv2.contourArea(polygon.astype(np.float32))) + len(points) / 2.0 + 1))


def find_contours(plane):
    """Trace the outer border of every 8-connected component.

    Hole borders are used only to link an enclosed component to the component
    surrounding its hole, which becomes its parent.
    """
    data = plane.data
    if not np.all((data == 0) | (data == 1)):
        raise NonBinaryPlaneError("find_contours expects a plane of 0/1 values")
    if not data.any():
        return []

    padded = np.pad(data.astype(np.uint8), 1, mode="constant", constant_values=0)
    found = cv2.findContours(padded,
                             cv2.RETR_TREE,
                             cv2.CHAIN_APPROX_NONE,
                             offset=(-1,
                                     -1))
    cv_contours, hierarchy = found[-2:]
    if hierarchy is None:
        return []
    hierarchy = hierarchy.reshape(-1, 4)

    depth = [None] * len(cv_contours)
    for i in range(len(cv_contours)):
        chain = []
        j = i
        while j >= 0 and depth[j] is None:
            chain.append(j)
            j = hierarchy[j][3]
        base = -1 if j < 0 else depth[j]
        for k in reversed(chain):
            base += 1
            depth[k] = base

    outer = [i for i in range(len(cv_contours)) if depth[i] % 2 == 0]
    new_index = {cv_index: n for n, cv_index in enumerate(outer)}

    contours = []
    for cv_index in outer:
        hole = hierarchy[cv_index][3]
        parent = None
        if hole >= 0:
            parent = new_index[hierarchy[hole][3]]
        points = tuple((int(x), int(y)) for x, y in cv_contours[cv_index].reshape(-1, 2))
        contours.append(Contour(points, parent, _contour_area(points)))
    return contours


def filter_contours(contours, image_area, min_fraction):
    """Keep contours covering at least min_fraction of the image, remapping parents."""
    threshold = min_fraction * image_area
    keep = [i for i, c in enumerate(contours) if c.area >= threshold]
    new_index = {old: new for new, old in enumerate(keep)}

    filtered = []
    for old in keep:
        parent = contours[old].parent
        while parent is not None and parent not in new_index:
            parent = contours[parent].parent
        filtered.append(contours[old]._replace(
            parent=None if parent is None else new_index[parent]))
    return filtered


def largest_contour(contours):
    if len(contours) == 0:
        raise NoObjectFoundError("No contour large enough to segment")
    best = 0
    for i in range(1, len(contours)):
        if contours[i].area > contours[best].area:
            best = i
    return contours[best]


def edge_plane(img, kernel):
    """Blurred per-channel Sobel magnitude combined by maximum."""
    edges = [sobel_edges(gaussian_blur(p, kernel)) for p in split_channels(img)]
    return combine_channel_edges(*edges)


def mask_outside(img, rect):
    out = np.zeros_like(img.data)
    out[rect.y:rect.bottom, rect.x:rect.right] = img.data[rect.y:rect.bottom, rect.x:rect.right]
    return Image(out)


def segment(img, cfg=None):
    """Segment the dominant object of an image.

    Arguments:
        img: Image of at least 3x3 pixels
        cfg: Optional: DeepSightSegmentationConfig, defaults when None

    Returns:
        SegmentationResult of the output image, bounding Rect and winning Contour

    Raises:
        NoObjectFoundError when no contour passes the area filter
    """
    cfg = cfg or DeepSightSegmentationConfig()
    if img.width < MIN_SEGMENT_SIZE or img.height < MIN_SEGMENT_SIZE:
        raise ValueError("Segmentation needs at least a 3x3 image, got {}x{}".format(
            img.width,
            img.height))

    kernel = make_gaussian_kernel(cfg.blur_kernel_size)
    binary = binarize(suppress_below_mean(edge_plane(img, kernel)))
    contours = find_contours(binary)
    survivors = filter_contours(contours, img.area, cfg.min_area_fraction)
    logger.debug("segment: {} contours, {} above {:.3f} of the image".format(
        len(contours),
        len(survivors),
        cfg.min_area_fraction))

    contour = largest_contour(survivors)
    rect = contour.bounding_rect()
    if cfg.output_mode == SEG_OUTPUT_MODE_MASK:
        out = mask_outside(img, rect)
    else:
        assert cfg.output_mode == SEG_OUTPUT_MODE_CROP
        out = crop(img, rect)
    return SegmentationResult(out, rect, contour)


def segment_or_passthrough(img, cfg=None):
    """Return (image, rect, fell_back); the original image when nothing is found."""
    try:
        result = segment(img, cfg)
    except NoObjectFoundError:
        logger.warning("No object found, using the unsegmented {}x{} image".format(
            img.width,
            img.height))
        return img, None, True
    return result.image, result.rect, False
