'''
DeepSight: segmentation, classification and object discovery for images and frame scans.
'''

from deepsight.pt.log_utils import logger
from deepsight.pt.deepsight_config import DeepSightConfig
from deepsight.pt.deepsight_segmentation_config import DeepSightSegmentationConfig, SegmentationConfig
from deepsight.pt.deepsight_image import Image, GrayPlane, Rect, load_image, save_image
from deepsight.pt.deepsight_segmentation import segment, NoObjectFoundError
from deepsight.pt.deepsight_classifier import (LabelSet,
                                               ChannelMean,
                                               CentroidClassifier,
                                               ConvNetClassifier,
                                               load_labels,
                                               load_classifier,
                                               train_reference_classifier)
from deepsight.pt.deepsight_discovery import FrameSource, extract_frames, discover, scan_top_objects
from deepsight.pt.deepsight_dataset import CaptureManifest, capture_views
from deepsight.pt.deepsight_segserve import SegmentationClient, SegmentationServer, client_segment

try:
    from deepsight.git_version_info import git_hash, git_branch
except ImportError:
    git_hash = None
    git_branch = None

# Export version information
__version_major__ = 0
__version_minor__ = 1
__version_patch__ = 0
__version__ = '.'.join(
    map(str,
        [__version_major__,
         __version_minor__,
         __version_patch__]))
__git_hash__ = git_hash
__git_branch__ = git_branch


def _add_core_arguments(parser):
    r"""Helper (internal) function adding the DeepSight argument group to a parser.

    Arguments:
        parser: argument parser
    Return:
        parser: Updated Parser
    """
    group = parser.add_argument_group('DeepSight', 'DeepSight configurations')

    group.add_argument('--deepsight_config',
                       default=None,
                       type=str,
                       help='DeepSight json configuration file.')

    group.add_argument('--deepsight_model',
                       default=None,
                       type=str,
                       help='Classifier model file, overrides the configuration.')

    group.add_argument('--deepsight_labels',
                       default=None,
                       type=str,
                       help='Label file, overrides the configuration.')

    return parser


def add_config_arguments(parser):
    r"""Update the argument parser to enable parsing of DeepSight command line arguments.
        The set of DeepSight arguments include the following:
        1) --deepsight_config <json file path>: path of a json configuration file
        2) --deepsight_model / --deepsight_labels: classifier files

    Arguments:
        parser: argument parser
    Return:
        parser: Updated Parser
    """
    parser = _add_core_arguments(parser)

    return parser


def config_from_args(args, environ=None):
    """DeepSightConfig from arguments added by add_config_arguments."""
    config = DeepSightConfig(json_file=args.deepsight_config, environ=environ)
    if args.deepsight_model is not None:
        config.model_path = args.deepsight_model
    if args.deepsight_labels is not None:
        config.labels_path = args.deepsight_labels
    logger.info("DeepSight info: version={}, git-hash={}, git-branch={}".format(
        __version__,
        __git_hash__,
        __git_branch__))
    return config
