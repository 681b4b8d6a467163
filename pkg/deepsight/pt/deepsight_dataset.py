"""
Labeled dataset capture from frame sources.

Frames are saved as IMG_<label>_<yyyyMMdd_HHmmss>_<n>.<ext>, n being the next
free sequence number for that label and second, and listed in a tab separated
manifest.tsv next to them.
"""

import csv
import datetime
import os
import re
import tempfile
from collections import namedtuple

from tqdm import tqdm

from deepsight.pt.deepsight_classifier import LabelSet
from deepsight.pt.deepsight_constants import *
from deepsight.pt.deepsight_discovery import select_frame_indices
from deepsight.pt.deepsight_image import extension_for_format, load_image, save_image
from deepsight.pt.log_utils import logger

_UNSAFE_LABEL_CHARS = re.compile(r"[^A-Za-z0-9_-]")


class CaptureError(OSError):
    pass


class InvalidLabelError(ValueError):
    pass


class ManifestError(ValueError):
    pass


ManifestEntry = namedtuple("ManifestEntry", ["path", "label", "frame_index", "timestamp"])


def sanitize_label(label):
    safe = _UNSAFE_LABEL_CHARS.sub("_", label or "")
    if not safe:
        raise InvalidLabelError("Label {!r} is empty after sanitization".format(label))
    return safe


def capture_filename(label, timestamp, sequence, image_format):
    return "{}_{}_{}_{}{}".format(CAPTURE_PREFIX,
                                  label,
                                  timestamp,
                                  sequence,
                                  extension_for_format(image_format))


def capture_filename_pattern(label):
    return re.compile(r"^{}_{}_(\d{{8}}_\d{{6}})_(\d+)\.(ppm|png|jpg)$".format(
        CAPTURE_PREFIX,
        re.escape(label)))


def _next_sequence(out_dir, label, timestamp):
    pattern = capture_filename_pattern(label)
    used = [-1]
    for name in os.listdir(out_dir):
        match = pattern.match(name)
        if match and match.group(1) == timestamp:
            used.append(int(match.group(2)))
    return max(used) + 1


class CaptureManifest(object):
    """Rows of captured files; paths are relative to the manifest's directory."""
    def __init__(self, root, entries=None):
        self.root = str(root)
        self.entries = list(entries or [])

    @property
    def path(self):
        return os.path.join(self.root, MANIFEST_NAME)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def absolute_path(self, entry):
        return os.path.join(self.root, entry.path)

    @classmethod
    def load(cls, path):
        """Read a manifest file, or the manifest inside a directory."""
        path = str(path)
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        if not os.path.isfile(path):
            raise FileNotFoundError("Manifest not found: {}".format(path))
        entries = []
        with open(path, "r", newline="", encoding="utf-8") as fd:
            reader = csv.reader(fd, delimiter="\t")
            header = next(reader, None)
            if header != MANIFEST_COLUMNS:
                raise ManifestError("{} does not start with the header {}".format(
                    path,
                    "\t".join(MANIFEST_COLUMNS)))
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(MANIFEST_COLUMNS):
                    raise ManifestError("{}:{}: expected {} columns, got {}".format(
                        path,
                        lineno,
                        len(MANIFEST_COLUMNS),
                        len(row)))
                entries.append(ManifestEntry(row[0], row[1], int(row[2]), row[3]))
        return cls(os.path.dirname(os.path.abspath(path)), entries)

    def save(self):
        """Atomically replace manifest.tsv in the root directory."""
        fd, tmp_path = tempfile.mkstemp(prefix=".manifest-", suffix=".tsv", dir=self.root)
        try:
            with os.fdopen(fd, "w", newline="", encoding="utf-8") as out:
                writer = csv.writer(out, delimiter="\t", lineterminator="\n")
                writer.writerow(MANIFEST_COLUMNS)
                for entry in self.entries:
                    writer.writerow(list(entry))
            os.replace(tmp_path, self.path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise


def _prepare_out_dir(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as err:
        raise CaptureError("Cannot create output directory {}: {}".format(out_dir, err))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK | os.X_OK):
        raise CaptureError("Output directory {} is not writable".format(out_dir))


def capture_views(src,
                  label,
                  out_dir,
                  count=DISCOVERY_FRAME_COUNT_DEFAULT,
                  stride=DISCOVERY_FRAME_STRIDE_DEFAULT,
                  image_format=DATASET_IMAGE_FORMAT_DEFAULT,
                  now=None):
    """Save sampled frames of a scan under a label and record them in the manifest.

    Either every frame and its manifest row is written or none is: images written
    before a failure are removed again and the manifest is only replaced once all
    images are on disk.

    Returns:
        CaptureManifest of the whole output directory, earlier captures included
    """
    safe_label = sanitize_label(label)
    indices = select_frame_indices(src, count, stride)
    out_dir = str(out_dir)
    _prepare_out_dir(out_dir)

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if os.path.isfile(manifest_path):
        manifest = CaptureManifest.load(manifest_path)
    else:
        manifest = CaptureManifest(os.path.abspath(out_dir))

    timestamp = (now or datetime.datetime.now()).strftime(CAPTURE_TIMESTAMP_FORMAT)
    sequence = _next_sequence(out_dir, safe_label, timestamp)

    written = []
    new_entries = []
    try:
        for frame_index in tqdm(indices, desc="capture {}".format(safe_label), unit="frame"):
            img = load_image(src.frames[frame_index])
            name = capture_filename(safe_label, timestamp, sequence, image_format)
            sequence += 1
            target = os.path.join(out_dir, name)
            save_image(img, target, image_format)
            written.append(target)
            new_entries.append(ManifestEntry(name, safe_label, frame_index, timestamp))

        manifest.entries.extend(new_entries)
        manifest.save()
    except BaseException as err:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        if isinstance(err, OSError) and not isinstance(err, CaptureError):
            raise CaptureError("Capture into {} failed: {}".format(out_dir, err))
        raise

    logger.info("Captured {} views of '{}' into {}".format(len(new_entries), safe_label, out_dir))
    return manifest


def load_training_samples(manifests, labels=None):
    """Images and class indices of captured manifests.

    Arguments:
        manifests: iterable of CaptureManifest or manifest paths
        labels: Optional: LabelSet; derived from the manifests in first-seen order when None

    Returns:
        (samples, labels) with samples a list of (Image, class index)
    """
    manifests = [m if isinstance(m, CaptureManifest) else CaptureManifest.load(m) for m in manifests]
    if labels is None:
        seen = []
        for manifest in manifests:
            for entry in manifest:
                if entry.label not in seen:
                    seen.append(entry.label)
        labels = LabelSet(seen)

    samples = []
    for manifest in manifests:
        for entry in manifest:
            if entry.label not in labels.labels:
                raise ManifestError("Label '{}' of {} is not in the label set".format(
                    entry.label,
                    entry.path))
            samples.append((load_image(manifest.absolute_path(entry)), labels.index(entry.label)))
    return samples, labels
