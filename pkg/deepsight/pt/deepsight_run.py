"""
deepsight command line.

Settings resolve as flags > DEEPSIGHT_* environment > JSON config file > defaults.
Exit codes: 0 success (including discovery misses and segmentation fallback),
1 usage, 2 I/O, 3 remote segmentation failure.

Machine readable output (--format tsv) starts with a header row:
    classify, classify-seg, discover without query: rank, index, label, score
    segment:  status, x, y, w, h, output
    discover: found, frame_index, frame, class_index, label, score
    capture:  manifest, rows, captured
    train:    model, labels, classes, samples
    evaluate: label, images, plain_hits, seg_hits
"""

import argparse
import os
import shutil
import sys
from collections import namedtuple, OrderedDict

from tqdm import tqdm

from deepsight.pt.deepsight_classifier import (LabelFileError,
                                               ModelFormatError,
                                               MissingClassError,
                                               load_classifier,
                                               save_labels,
                                               train_reference_classifier)
from deepsight.pt.deepsight_config import DeepSightConfig
from deepsight.pt.deepsight_constants import *
from deepsight.pt.deepsight_dataset import (CaptureManifest,
                                            InvalidLabelError,
                                            ManifestError,
                                            capture_views,
                                            load_training_samples)
from deepsight.pt.deepsight_discovery import (EmptyFrameSourceError,
                                              FrameSource,
                                              discover,
                                              scan_top_objects,
                                              select_frame_indices)
from deepsight.pt.deepsight_image import ImageError, load_image, save_image
from deepsight.pt.deepsight_segmentation import segment_or_passthrough
from deepsight.pt.deepsight_segserve import RemoteSegmentationError, SegmentationClient, SegmentationServer
from deepsight.pt.log_utils import logger

CliConfig = namedtuple(
    "CliConfig",
    ["model_path",
     "labels_path",
     "workers",
     "mean",
     "segmentation",
     "server_url",
     "timeout",
     "output_format",
     "settings"])


class UsageError(Exception):
    pass


class DeepSightArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with EXIT_USAGE."""
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "{}: error: {}\n".format(self.prog, message))


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer, got '{}'".format(value))
    if number < 1:
        raise argparse.ArgumentTypeError("expected a positive integer, got {}".format(number))
    return number


def positive_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, got '{}'".format(value))
    if number <= 0:
        raise argparse.ArgumentTypeError("expected a positive number, got {}".format(number))
    return number


def _add_segmentation_arguments(parser):
    group = parser.add_argument_group("segmentation")
    group.add_argument("--blur-kernel-size",
                       type=int,
                       default=None,
                       help="Gaussian blur taps, odd and positive (default {})".format(
                           SEG_BLUR_KERNEL_SIZE_DEFAULT))
    group.add_argument("--min-area-fraction",
                       type=float,
                       default=None,
                       help="Smallest contour area as a fraction of the image (default {})".format(
                           SEG_MIN_AREA_FRACTION_DEFAULT))
    group.add_argument("--output-mode",
                       choices=SEG_OUTPUT_MODES,
                       default=None,
                       help="Crop to the object or zero everything around it")


def _add_remote_argument(parser):
    parser.add_argument("--remote",
                        metavar="URL",
                        default=None,
                        help="Segment on a deepsight server instead of locally")


def _add_sampling_arguments(parser):
    parser.add_argument("--count",
                        type=positive_int,
                        default=None,
                        help="Frames to sample (default {})".format(DISCOVERY_FRAME_COUNT_DEFAULT))
    sampling = parser.add_mutually_exclusive_group()
    sampling.add_argument("--stride",
                          type=positive_int,
                          default=None,
                          help="Frames between samples (default {})".format(
                              DISCOVERY_FRAME_STRIDE_DEFAULT))
    sampling.add_argument("--every",
                          type=positive_float,
                          metavar="SECONDS",
                          default=None,
                          help="Seconds between samples, mapped to a stride")


def parse_args(args=None):
    parser = DeepSightArgumentParser(
        prog="deepsight",
        description="Segment, classify and discover objects in images and frame scans.")

    parser.add_argument("--model", default=None, help="Classifier model file")
    parser.add_argument("--labels", default=None, help="Label file, one label per line")
    parser.add_argument("--config", default=None, help="DeepSight JSON configuration file")
    parser.add_argument("--workers",
                        type=positive_int,
                        default=None,
                        help="Parallel inference workers (default {})".format(
                            CLASSIFIER_WORKERS_DEFAULT))
    parser.add_argument("--format",
                        dest="output_format",
                        choices=OUTPUT_FORMATS,
                        default=FORMAT_HUMAN,
                        help="Output format")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    classify = subparsers.add_parser("classify", help="Top-k classes of an image")
    classify.add_argument("image")
    classify.add_argument("-k", type=positive_int, default=None, help="Number of classes to list")

    seg = subparsers.add_parser("segment", help="Segment the main object of an image")
    seg.add_argument("image")
    seg.add_argument("output")
    _add_remote_argument(seg)
    _add_segmentation_arguments(seg)

    classify_seg = subparsers.add_parser("classify-seg",
                                         help="Segment an image, then classify the segment")
    classify_seg.add_argument("image")
    classify_seg.add_argument("-k", type=positive_int, default=None)
    _add_remote_argument(classify_seg)
    _add_segmentation_arguments(classify_seg)

    disc = subparsers.add_parser("discover",
                                 help="Find the frame showing an object best, or list the scene")
    disc.add_argument("frames", help="Directory of frames in filename order")
    disc.add_argument("query", nargs="?", default=None, help="Label substring to look for")
    disc.add_argument("-k", type=positive_int, default=None)
    disc.add_argument("--out", default=None, help="Copy the best frame here")
    disc.add_argument("--ignore-case", action="store_true", help="Case-insensitive matching")
    _add_sampling_arguments(disc)

    capture = subparsers.add_parser("capture", help="Save labeled views of a frame scan")
    capture.add_argument("frames")
    capture.add_argument("label")
    capture.add_argument("out_dir")
    capture.add_argument("--image-format", choices=["ppm", "png", "jpeg"], default=None)
    _add_sampling_arguments(capture)

    serve = subparsers.add_parser("serve", help="Run the segmentation server")
    serve.add_argument("--bind", default=None)
    serve.add_argument("--port", type=int, default=None)
    _add_segmentation_arguments(serve)

    train = subparsers.add_parser(
        "train",
        help="Train the reference classifier from capture manifests into --model/--labels")
    train.add_argument("manifests", nargs="+")

    evaluate = subparsers.add_parser("evaluate",
                                     help="Compare plain and segmented top-1 hits per label")
    evaluate.add_argument("manifest")
    _add_remote_argument(evaluate)
    _add_segmentation_arguments(evaluate)

    return parser.parse_args(args=args)


def resolve_config(args, environ=None):
    environ = os.environ if environ is None else environ
    config_path = args.config or environ.get(ENV_CONFIG)
    settings = DeepSightConfig(json_file=config_path, environ=environ)

    seg_cfg = settings.segmentation_config.replace(
        blur_kernel_size=getattr(args, "blur_kernel_size", None),
        min_area_fraction=getattr(args, "min_area_fraction", None),
        output_mode=getattr(args, "output_mode", None))

    return CliConfig(model_path=args.model or settings.model_path,
                     labels_path=args.labels or settings.labels_path,
                     workers=args.workers or settings.workers,
                     mean=settings.mean,
                     segmentation=seg_cfg,
                     server_url=getattr(args, "remote", None) or settings.server_url,
                     timeout=settings.server_timeout,
                     output_format=args.output_format,
                     settings=settings)


def _require_model(cfg):
    if not cfg.model_path or not cfg.labels_path:
        raise UsageError("a model and a label file are required (--model/--labels or {} config)".format(
            CLASSIFIER))


def _load_classifier(cfg):
    _require_model(cfg)
    return load_classifier(cfg.model_path, cfg.labels_path, workers=cfg.workers, mean=cfg.mean)


def _top_k(k, clf, default=DISCOVERY_TOP_K_DEFAULT):
    if k is None:
        return min(default, clf.num_classes)
    if k > clf.num_classes:
        raise UsageError("k={} exceeds the {} known classes".format(k, clf.num_classes))
    return k


def _print_table(cfg, predictions, labels):
    if cfg.output_format == FORMAT_TSV:
        print("rank\tindex\tlabel\tscore")
        for rank, p in enumerate(predictions, start=1):
            print("{}\t{}\t{}\t{:.6f}".format(rank, p.index, labels[p.index], p.score))
    else:
        for rank, p in enumerate(predictions, start=1):
            print("{}. {} {:.4f}".format(rank, labels[p.index], p.score))


def _segment(cfg, img, name, remote_fallback):
    """(image, rect, fell_back) from the server when configured, else locally."""
    if not cfg.server_url:
        return segment_or_passthrough(img, cfg.segmentation)
    try:
        remote = SegmentationClient(cfg.server_url, cfg.timeout).segment(img, name=name)
    except RemoteSegmentationError as err:
        if not remote_fallback:
            raise
        logger.warning("Remote segmentation failed, using the unsegmented image: {}".format(err))
        return img, None, True
    if remote.fallback:
        logger.warning("Server found no object, using the unsegmented image")
    return remote.image, remote.rect, remote.fallback


def cmd_classify(args, cfg):
    clf = _load_classifier(cfg)
    k = _top_k(args.k, clf)
    img = load_image(args.image)
    _print_table(cfg, clf.predict_top_k(img, k), clf.labels)
    return EXIT_OK


def cmd_segment(args, cfg):
    img = load_image(args.image)
    out, rect, fell_back = _segment(cfg, img, os.path.basename(args.image), remote_fallback=False)
    save_image(out, args.output)

    if cfg.output_format == FORMAT_TSV:
        print("status\tx\ty\tw\th\toutput")
        if fell_back:
            print("fallback\t\t\t\t\t{}".format(args.output))
        else:
            print("segmented\t{}\t{}\t{}\t{}\t{}".format(rect.x, rect.y, rect.w, rect.h, args.output))
    elif fell_back:
        print("warning: no object found, wrote the input unchanged to {}".format(args.output))
    else:
        print("rect x={} y={} w={} h={} -> {}".format(rect.x, rect.y, rect.w, rect.h, args.output))
    return EXIT_OK


def cmd_classify_seg(args, cfg):
    clf = _load_classifier(cfg)
    k = _top_k(args.k, clf)
    img = load_image(args.image)
    segmented, _, _ = _segment(cfg, img, os.path.basename(args.image), remote_fallback=True)
    _print_table(cfg, clf.predict_top_k(segmented, k), clf.labels)
    return EXIT_OK


def _sampled_frames(args, cfg):
    settings = cfg.settings
    src = FrameSource.from_directory(args.frames, settings.frame_interval)
    if args.every is not None:
        stride = src.stride_for_interval(args.every)
    else:
        stride = args.stride or settings.frame_stride
    indices = select_frame_indices(src, args.count or settings.frame_count, stride)
    return src, indices, stride


def cmd_discover(args, cfg):
    clf = _load_classifier(cfg)
    src, indices, _ = _sampled_frames(args, cfg)
    frames = [load_image(src.frames[i]) for i in indices]
    k = args.k or cfg.settings.top_k

    if args.query is None:
        _print_table(cfg, scan_top_objects(clf, frames, k), clf.labels)
        return EXIT_OK

    case_sensitive = cfg.settings.case_sensitive and not args.ignore_case
    result = discover(clf, frames, args.query, k, case_sensitive=case_sensitive)
    frame_path = src.frames[indices[result.frame_index]] if result.found else None
    if result.found and args.out:
        shutil.copyfile(frame_path, args.out)

    if cfg.output_format == FORMAT_TSV:
        print("found\tframe_index\tframe\tclass_index\tlabel\tscore")
        if result.found:
            print("1\t{}\t{}\t{}\t{}\t{:.6f}".format(indices[result.frame_index],
                                                     os.path.basename(frame_path),
                                                     result.class_index,
                                                     result.label,
                                                     result.score))
        else:
            print("0\t\t\t\t\t")
    elif result.found:
        print("found '{}' in frame {} ({}): {} {:.4f}".format(args.query,
                                                             indices[result.frame_index],
                                                             os.path.basename(frame_path),
                                                             result.label,
                                                             result.score))
    else:
        print("not found: '{}' in {} frames".format(args.query, len(frames)))
    return EXIT_OK


def cmd_capture(args, cfg):
    src, _, stride = _sampled_frames(args, cfg)
    image_format = args.image_format or cfg.settings.image_format
    before = 0
    manifest_path = os.path.join(args.out_dir, MANIFEST_NAME)
    if os.path.isfile(manifest_path):
        before = len(CaptureManifest.load(manifest_path))
    manifest = capture_views(src,
                             args.label,
                             args.out_dir,
                             args.count or cfg.settings.frame_count,
                             stride,
                             image_format)
    captured = len(manifest) - before

    if cfg.output_format == FORMAT_TSV:
        print("manifest\trows\tcaptured")
        print("{}\t{}\t{}".format(manifest.path, len(manifest), captured))
    else:
        print("captured {} views, manifest {} ({} rows)".format(captured, manifest.path, len(manifest)))
    return EXIT_OK


def cmd_serve(args, cfg):
    settings = cfg.settings
    server = SegmentationServer(cfg.segmentation,
                                bind=args.bind or settings.server_bind,
                                port=settings.server_port if args.port is None else args.port)
    server.serve_forever()
    return EXIT_OK


def cmd_train(args, cfg):
    _require_model(cfg)
    samples, labels = load_training_samples(args.manifests)
    clf = train_reference_classifier(samples, labels, workers=cfg.workers)
    clf.save(cfg.model_path)
    save_labels(labels, cfg.labels_path)

    if cfg.output_format == FORMAT_TSV:
        print("model\tlabels\tclasses\tsamples")
        print("{}\t{}\t{}\t{}".format(cfg.model_path, cfg.labels_path, len(labels), len(samples)))
    else:
        print("trained {} classes on {} images -> {}, {}".format(len(labels),
                                                                 len(samples),
                                                                 cfg.model_path,
                                                                 cfg.labels_path))
    return EXIT_OK


def cmd_evaluate(args, cfg):
    clf = _load_classifier(cfg)
    manifest = CaptureManifest.load(args.manifest)
    counts = OrderedDict()
    for entry in tqdm(manifest.entries, desc="evaluate", unit="image"):
        if entry.label not in clf.labels.labels:
            raise ManifestError("Label '{}' is unknown to the classifier".format(entry.label))
        truth = clf.labels.index(entry.label)
        img = load_image(manifest.absolute_path(entry))
        segmented, _, _ = _segment(cfg, img, entry.path, remote_fallback=True)
        row = counts.setdefault(entry.label, [0, 0, 0])
        row[0] += 1
        row[1] += int(clf.predict_top_k(img, 1)[0].index == truth)
        row[2] += int(clf.predict_top_k(segmented, 1)[0].index == truth)

    if cfg.output_format == FORMAT_TSV:
        print("label\timages\tplain_hits\tseg_hits")
        for label, (images, plain, seg) in counts.items():
            print("{}\t{}\t{}\t{}".format(label, images, plain, seg))
    else:
        for label, (images, plain, seg) in counts.items():
            print("{}: {}/{} plain, {}/{} segmented".format(label, plain, images, seg, images))
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "segment": cmd_segment,
    "classify-seg": cmd_classify_seg,
    "discover": cmd_discover,
    "capture": cmd_capture,
    "serve": cmd_serve,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
}

_USAGE_ERRORS = (UsageError, InvalidLabelError, MissingClassError)
_IO_ERRORS = (ImageError,
              LabelFileError,
              ModelFormatError,
              ManifestError,
              EmptyFrameSourceError,
              OSError)


def main(args=None):
    args = parse_args(args)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except RemoteSegmentationError as err:
        logger.error(str(err))
        return EXIT_REMOTE
    except _USAGE_ERRORS as err:
        logger.error(str(err))
        return EXIT_USAGE
    except _IO_ERRORS as err:
        logger.error(str(err))
        return EXIT_IO
    except ValueError as err:
        logger.error("Invalid configuration: {}".format(err))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
