"""
Configuration keys, defaults and wire constants shared across DeepSight.
"""

#############################################
# Exit codes
#############################################
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_REMOTE = 3

#############################################
# Output formats
#############################################
FORMAT_HUMAN = "human"
FORMAT_TSV = "tsv"
OUTPUT_FORMATS = [FORMAT_HUMAN, FORMAT_TSV]

#########################################
# Classifier
#########################################
# Users can configure in deepsight_config.json as below example:
CLASSIFIER_FORMAT = '''
Classifier should be configured as:
"classifier": {
  "model": "model.pt",
  "labels": "labels.txt",
  "workers": 4,
  "mean": [104.0, 117.0, 123.0]
}
'''
CLASSIFIER = "classifier"

CLASSIFIER_MODEL = "model"
CLASSIFIER_MODEL_DEFAULT = None

CLASSIFIER_LABELS = "labels"
CLASSIFIER_LABELS_DEFAULT = None

# Number of inference workers
CLASSIFIER_WORKERS = "workers"
CLASSIFIER_WORKERS_DEFAULT = 4

CLASSIFIER_MEAN = "mean"
CLASSIFIER_MEAN_DEFAULT = None

#########################################
# Segmentation
#########################################
SEGMENTATION_FORMAT = '''
Segmentation should be configured as:
"segmentation": {
  "blur_kernel_size": 5,
  "min_area_fraction": 0.05,
  "output_mode": "crop" | "mask"
}
'''
SEGMENTATION = "segmentation"

SEG_BLUR_KERNEL_SIZE = "blur_kernel_size"
SEG_BLUR_KERNEL_SIZE_DEFAULT = 5

SEG_MIN_AREA_FRACTION = "min_area_fraction"
SEG_MIN_AREA_FRACTION_DEFAULT = 0.05

SEG_OUTPUT_MODE = "output_mode"
SEG_OUTPUT_MODE_CROP = "crop"
SEG_OUTPUT_MODE_MASK = "mask"
SEG_OUTPUT_MODES = [SEG_OUTPUT_MODE_CROP, SEG_OUTPUT_MODE_MASK]
SEG_OUTPUT_MODE_DEFAULT = SEG_OUTPUT_MODE_CROP

#########################################
# Discovery
#########################################
DISCOVERY_FORMAT = '''
Discovery should be configured as:
"discovery": {
  "top_k": 5,
  "frame_count": 5,
  "frame_stride": 1,
  "frame_interval": 1.0,
  "case_sensitive": true
}
'''
DISCOVERY = "discovery"

DISCOVERY_TOP_K = "top_k"
DISCOVERY_TOP_K_DEFAULT = 5

DISCOVERY_FRAME_COUNT = "frame_count"
DISCOVERY_FRAME_COUNT_DEFAULT = 5

DISCOVERY_FRAME_STRIDE = "frame_stride"
DISCOVERY_FRAME_STRIDE_DEFAULT = 1

# Seconds between consecutive frames of a frame directory
DISCOVERY_FRAME_INTERVAL = "frame_interval"
DISCOVERY_FRAME_INTERVAL_DEFAULT = 1.0

DISCOVERY_CASE_SENSITIVE = "case_sensitive"
DISCOVERY_CASE_SENSITIVE_DEFAULT = True

#########################################
# Dataset capture
#########################################
DATASET = "dataset"

DATASET_IMAGE_FORMAT = "image_format"
DATASET_IMAGE_FORMAT_DEFAULT = "ppm"

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ["path", "label", "frame_index", "timestamp"]
CAPTURE_PREFIX = "IMG"
CAPTURE_TIMESTAMP_FORMAT = "%Y%m%d_%H%M%S"

#########################################
# Segmentation server
#########################################
SERVER_FORMAT = '''
Server should be configured as:
"server": {
  "bind": "127.0.0.1",
  "port": 5000,
  "url": "http://127.0.0.1:5000/",
  "timeout": 30.0
}
'''
SERVER = "server"

SERVER_BIND = "bind"
SERVER_BIND_DEFAULT = "127.0.0.1"

SERVER_PORT = "port"
SERVER_PORT_DEFAULT = 5000

SERVER_URL = "url"
SERVER_URL_DEFAULT = None

SERVER_TIMEOUT = "timeout"
SERVER_TIMEOUT_DEFAULT = 30.0

#############################################
# Wire protocol
#############################################
ROUTE_SEGMENT = "/"
REQUEST_CONTENT_TYPE = "application/json;charset=UTF-8"
FIELD_IMAGE_STRING = "imageString"
FIELD_IMAGE_NAME = "imageName"
HEADER_FALLBACK = "X-Seg-Fallback"
HEADER_RECT = "X-Seg-Rect"

#############################################
# Environment overrides
#############################################
ENV_CONFIG = "DEEPSIGHT_CONFIG"

# env var -> (section, key, type)
ENV_OVERRIDES = {
    "DEEPSIGHT_MODEL": (CLASSIFIER,
                        CLASSIFIER_MODEL,
                        str),
    "DEEPSIGHT_LABELS": (CLASSIFIER,
                         CLASSIFIER_LABELS,
                         str),
    "DEEPSIGHT_WORKERS": (CLASSIFIER,
                          CLASSIFIER_WORKERS,
                          int),
    "DEEPSIGHT_BLUR_KERNEL_SIZE": (SEGMENTATION,
                                   SEG_BLUR_KERNEL_SIZE,
                                   int),
    "DEEPSIGHT_MIN_AREA_FRACTION": (SEGMENTATION,
                                    SEG_MIN_AREA_FRACTION,
                                    float),
    "DEEPSIGHT_OUTPUT_MODE": (SEGMENTATION,
                              SEG_OUTPUT_MODE,
                              str),
    "DEEPSIGHT_SERVER_URL": (SERVER,
                             SERVER_URL,
                             str),
    "DEEPSIGHT_BIND": (SERVER,
                       SERVER_BIND,
                       str),
    "DEEPSIGHT_PORT": (SERVER,
                       SERVER_PORT,
                       int),
    "DEEPSIGHT_TIMEOUT": (SERVER,
                          SERVER_TIMEOUT,
                          float),
}
