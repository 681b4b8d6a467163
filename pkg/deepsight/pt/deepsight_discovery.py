"""
Object discovery over an ordered sequence of frames.

A frame source stands in for a video scan: a list of image files in temporal
order, one every nominal_interval seconds.
"""

import logging
import os
from collections import namedtuple

import numpy as np

from deepsight.pt.deepsight_classifier import top_k_from_scores
from deepsight.pt.deepsight_constants import DISCOVERY_FRAME_INTERVAL_DEFAULT, DISCOVERY_TOP_K_DEFAULT
from deepsight.pt.deepsight_image import IMAGE_EXTENSIONS, load_image
from deepsight.pt.deepsight_timer import ThroughputTimer
from deepsight.pt.log_utils import logger


class EmptyFrameSourceError(ValueError):
    pass


class FrameSource(object):
    """Ordered frame files of a scan.

    Arguments:
        frames: list of image paths in temporal order
        nominal_interval: seconds between consecutive frames
    """
    def __init__(self, frames, nominal_interval=DISCOVERY_FRAME_INTERVAL_DEFAULT):
        if nominal_interval <= 0:
            raise ValueError("nominal_interval must be positive, got {}".format(nominal_interval))
        self.frames = [str(f) for f in frames]
        self.nominal_interval = float(nominal_interval)

    @classmethod
    def from_directory(cls, directory, nominal_interval=DISCOVERY_FRAME_INTERVAL_DEFAULT):
        """Every loadable image in a directory, in lexicographic filename order."""
        if not os.path.isdir(directory):
            raise FileNotFoundError("Frame directory not found: {}".format(directory))
        names = sorted(name for name in os.listdir(directory)
                       if os.path.splitext(name)[1].lower() in IMAGE_EXTENSIONS
                       and os.path.isfile(os.path.join(directory, name)))
        return cls([os.path.join(directory, name) for name in names], nominal_interval)

    def stride_for_interval(self, seconds):
        """Frames to step over so that samples lie about `seconds` apart."""
        if seconds <= 0:
            raise ValueError("Sampling interval must be positive, got {}".format(seconds))
        return max(1, int(round(seconds / self.nominal_interval)))

    def __len__(self):
        return len(self.frames)

    def __repr__(self):
        return "FrameSource({} frames, every {}s)".format(len(self.frames), self.nominal_interval)


def select_frame_indices(src, count, stride):
    """Source indices 0, stride, 2*stride, ... at most count of them."""
    if count < 1 or stride < 1:
        raise ValueError("count and stride must be positive, got count={}, stride={}".format(
            count,
            stride))
    if len(src) == 0:
        raise EmptyFrameSourceError("Frame source has no frames")
    return list(range(0, len(src), stride))[:count]


def extract_frames(src, count, stride):
    """Load the sampled frames; fewer than count when the source runs out."""
    indices = select_frame_indices(src, count, stride)
    if len(indices) < count:
        logger.info("Frame source exhausted after {} of {} frames".format(len(indices), count))
    return [load_image(src.frames[i]) for i in indices]


class DiscoveryResult(
        namedtuple("DiscoveryResult",
                   ["found",
                    "frame_index",
                    "class_index",
                    "score",
                    "label"])):
    """Best frame for a query; every field but found is None when nothing matched."""
    __slots__ = ()


NOT_FOUND = DiscoveryResult(False, None, None, None, None)


def _score_frames(clf, frames):
    frames = list(frames)
    timer = ThroughputTimer(batch_size=len(frames),
                            steps_per_output=1,
                            monitor_memory=logger.isEnabledFor(logging.DEBUG),
                            logging_fn=logger.debug)
    timer.start()
    scores = clf.confidence_scores_batch(frames)
    timer.stop()
    return scores


def label_matches(label, query, case_sensitive=True):
    if case_sensitive:
        return query in label
    return query.lower() in label.lower()


def discover(clf, frames, query, k=DISCOVERY_TOP_K_DEFAULT, case_sensitive=True):
    """Find the frame where a label containing `query` scores highest.

    For each frame only the highest ranked top-k label containing the query is
    considered. A later frame replaces the best one only with a strictly greater
    score, so ties go to the earliest frame.
    """
    if not query:
        raise ValueError("Discovery query must be non-empty")
    if k < 1:
        raise ValueError("k must be at least 1, got {}".format(k))
    k = min(k, clf.num_classes)
    frames = list(frames)

    best = NOT_FOUND
    for frame_index, scores in enumerate(_score_frames(clf, frames)):
        for prediction in top_k_from_scores(scores, k):
            label = clf.labels[prediction.index]
            if not label_matches(label, query, case_sensitive):
                continue
            if not best.found or prediction.score > best.score:
                best = DiscoveryResult(True,
                                       frame_index,
                                       prediction.index,
                                       float(scores[prediction.index]),
                                       label)
            break

    if best.found:
        logger.info("'{}' best seen in frame {} as '{}' ({:.4f})".format(
            query,
            best.frame_index,
            best.label,
            best.score))
    else:
        logger.info("'{}' not found in {} frames".format(query, len(frames)))
    return best


def scan_top_objects(clf, frames, k=DISCOVERY_TOP_K_DEFAULT):
    """The k classes with the highest confidence reached in any frame."""
    frames = list(frames)
    if len(frames) == 0:
        raise EmptyFrameSourceError("Cannot scan an empty frame list")
    maxima = np.max(np.stack(_score_frames(clf, frames)), axis=0)
    return top_k_from_scores(maxima, min(k, clf.num_classes))
