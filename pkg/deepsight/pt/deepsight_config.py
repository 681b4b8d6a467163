"""
DeepSight JSON configuration with environment overrides.
"""

import copy
import json
import os

from deepsight.pt.deepsight_constants import *
from deepsight.pt.deepsight_config_utils import get_scalar_param, get_section, dict_raise_error_on_duplicate_keys
from deepsight.pt.deepsight_segmentation_config import DeepSightSegmentationConfig
from deepsight.pt.log_utils import logger

DEEPSIGHT_SECTIONS = [CLASSIFIER, SEGMENTATION, DISCOVERY, DATASET, SERVER]


def load_config_file(json_file):
    if not os.path.isfile(json_file):
        raise FileNotFoundError("DeepSight config file not found: {}".format(json_file))
    with open(json_file, 'r') as fd:
        try:
            return json.load(fd, object_pairs_hook=dict_raise_error_on_duplicate_keys)
        except json.JSONDecodeError as err:
            raise ValueError("DeepSight config {} is not valid JSON: {}".format(
                json_file,
                err))


def _convert_env_value(name, raw, value_type):
    try:
        return value_type(raw)
    except ValueError:
        raise ValueError("Environment variable {}={!r} is not a valid {}".format(
            name,
            raw,
            value_type.__name__))


def apply_env_overrides(param_dict, environ):
    """Return a copy of param_dict with DEEPSIGHT_* variables applied."""
    param_dict = copy.deepcopy(param_dict)
    for name, (section, key, value_type) in sorted(ENV_OVERRIDES.items()):
        if name not in environ:
            continue
        value = _convert_env_value(name, environ[name], value_type)
        param_dict.setdefault(section, {})
        if not isinstance(param_dict[section], dict):
            raise ValueError("DeepSight config section '{}' must be a JSON object".format(
                section))
        param_dict[section][key] = value
    return param_dict


def get_classifier_model(param_dict):
    return get_scalar_param(get_section(param_dict,
                                        CLASSIFIER),
                            CLASSIFIER_MODEL,
                            CLASSIFIER_MODEL_DEFAULT)


def get_classifier_labels(param_dict):
    return get_scalar_param(get_section(param_dict,
                                        CLASSIFIER),
                            CLASSIFIER_LABELS,
                            CLASSIFIER_LABELS_DEFAULT)


def get_classifier_workers(param_dict):
    return get_scalar_param(get_section(param_dict,
                                        CLASSIFIER),
                            CLASSIFIER_WORKERS,
                            CLASSIFIER_WORKERS_DEFAULT)


def get_classifier_mean(param_dict):
    return get_scalar_param(get_section(param_dict,
                                        CLASSIFIER),
                            CLASSIFIER_MEAN,
                            CLASSIFIER_MEAN_DEFAULT)


def get_discovery_param(param_dict, name, default):
    return get_scalar_param(get_section(param_dict, DISCOVERY), name, default)


def get_dataset_image_format(param_dict):
    return get_scalar_param(get_section(param_dict,
                                        DATASET),
                            DATASET_IMAGE_FORMAT,
                            DATASET_IMAGE_FORMAT_DEFAULT)


def get_server_param(param_dict, name, default):
    return get_scalar_param(get_section(param_dict, SERVER), name, default)


class DeepSightConfig(object):
    """All DeepSight settings resolved from defaults, a JSON file and the environment.

    Arguments:
        json_file: Optional: path of a JSON config file
        param_dict: Optional: already parsed config, takes the place of json_file
        environ: Optional: mapping consulted for DEEPSIGHT_* overrides, os.environ if None
    """
    def __init__(self, json_file=None, param_dict=None, environ=None):
        super(DeepSightConfig, self).__init__()

        if param_dict is None:
            param_dict = load_config_file(json_file) if json_file is not None else {}
        if not isinstance(param_dict, dict):
            raise ValueError("DeepSight config must be a JSON object")

        environ = os.environ if environ is None else environ
        self._param_dict = apply_env_overrides(param_dict, environ)

        self._initialize_params(self._param_dict)
        self._do_sanity_check()

    def _initialize_params(self, param_dict):
        for section in param_dict.keys():
            if section not in DEEPSIGHT_SECTIONS:
                logger.warning("DeepSightConfig: ignoring unknown section '{}'".format(
                    section))

        self.model_path = get_classifier_model(param_dict)
        self.labels_path = get_classifier_labels(param_dict)
        self.workers = get_classifier_workers(param_dict)
        self.mean = get_classifier_mean(param_dict)

        self.segmentation_config = DeepSightSegmentationConfig.from_dict(param_dict)

        self.top_k = get_discovery_param(param_dict,
                                         DISCOVERY_TOP_K,
                                         DISCOVERY_TOP_K_DEFAULT)
        self.frame_count = get_discovery_param(param_dict,
                                               DISCOVERY_FRAME_COUNT,
                                               DISCOVERY_FRAME_COUNT_DEFAULT)
        self.frame_stride = get_discovery_param(param_dict,
                                                DISCOVERY_FRAME_STRIDE,
                                                DISCOVERY_FRAME_STRIDE_DEFAULT)
        self.frame_interval = get_discovery_param(param_dict,
                                                  DISCOVERY_FRAME_INTERVAL,
                                                  DISCOVERY_FRAME_INTERVAL_DEFAULT)
        self.case_sensitive = get_discovery_param(param_dict,
                                                  DISCOVERY_CASE_SENSITIVE,
                                                  DISCOVERY_CASE_SENSITIVE_DEFAULT)

        self.image_format = get_dataset_image_format(param_dict)

        self.server_bind = get_server_param(param_dict, SERVER_BIND, SERVER_BIND_DEFAULT)
        self.server_port = get_server_param(param_dict, SERVER_PORT, SERVER_PORT_DEFAULT)
        self.server_url = get_server_param(param_dict, SERVER_URL, SERVER_URL_DEFAULT)
        self.server_timeout = get_server_param(param_dict,
                                               SERVER_TIMEOUT,
                                               SERVER_TIMEOUT_DEFAULT)

    def _do_sanity_check(self):
        self._do_error_check()

    def _do_error_check(self):
        for name in ("workers", "top_k", "frame_count", "frame_stride", "server_port"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError("DeepSightConfig: {} must be an integer, got {!r}".format(
                    name,
                    value))
        if self.workers < 1:
            raise ValueError("DeepSightConfig: {} must be at least 1, got {}".format(
                CLASSIFIER_WORKERS,
                self.workers))
        if self.top_k < 1 or self.frame_count < 1 or self.frame_stride < 1:
            raise ValueError(
                "DeepSightConfig: discovery top_k, frame_count and frame_stride must be positive"
            )
        if not 0 <= self.server_port <= 65535:
            raise ValueError("DeepSightConfig: {} out of range: {}".format(
                SERVER_PORT,
                self.server_port))
        if self.frame_interval <= 0 or self.server_timeout <= 0:
            raise ValueError(
                "DeepSightConfig: frame_interval and timeout must be positive")
        if self.mean is not None and len(self.mean) != 3:
            raise ValueError("DeepSightConfig: {} needs one value per channel, got {}".format(
                CLASSIFIER_MEAN,
                self.mean))
        if self.image_format not in ("ppm", "png", "jpeg"):
            raise ValueError("DeepSightConfig: unsupported {} '{}'".format(
                DATASET_IMAGE_FORMAT,
                self.image_format))

    def print(self, name):
        logger.info('{}:'.format(name))
        for arg in sorted(vars(self)):
            if arg != '_param_dict':
                dots = '.' * (29 - len(arg))
                logger.info('  {} {} {}'.format(arg, dots, getattr(self, arg)))

        logger.info('  json = {}'.format(
            json.dumps(self._param_dict,
                       sort_keys=True,
                       indent=4,
                       separators=(',',
                                   ':'))))
