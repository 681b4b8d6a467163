"""
Segmentation section of the DeepSight config.
"""

from deepsight.pt.deepsight_constants import *
from deepsight.pt.deepsight_config_utils import get_scalar_param, get_section


class DeepSightSegmentationConfig(object):
    """Blur size, area threshold and output mode of the segmentation pipeline.

    Values are validated on construction and must not be mutated afterwards; the
    server shares one instance across all request threads.
    """
    def __init__(self,
                 blur_kernel_size=SEG_BLUR_KERNEL_SIZE_DEFAULT,
                 min_area_fraction=SEG_MIN_AREA_FRACTION_DEFAULT,
                 output_mode=SEG_OUTPUT_MODE_DEFAULT):
        super(DeepSightSegmentationConfig, self).__init__()

        self.blur_kernel_size = blur_kernel_size
        self.min_area_fraction = min_area_fraction
        self.output_mode = output_mode

        self._do_sanity_check()

    @classmethod
    def from_dict(cls, param_dict):
        """Build from a full config dict holding a "segmentation" section."""
        seg_dict = get_section(param_dict, SEGMENTATION)
        return cls(blur_kernel_size=get_scalar_param(seg_dict,
                                                     SEG_BLUR_KERNEL_SIZE,
                                                     SEG_BLUR_KERNEL_SIZE_DEFAULT),
                   min_area_fraction=get_scalar_param(seg_dict,
                                                      SEG_MIN_AREA_FRACTION,
                                                      SEG_MIN_AREA_FRACTION_DEFAULT),
                   output_mode=get_scalar_param(seg_dict,
                                                SEG_OUTPUT_MODE,
                                                SEG_OUTPUT_MODE_DEFAULT))

    def replace(self, **overrides):
        values = self.repr()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return DeepSightSegmentationConfig(**values)

    """
    For json serialization
    """

    def repr(self):
        return dict(self.__dict__)

    def _do_sanity_check(self):
        size = self.blur_kernel_size
        if isinstance(size, bool) or not isinstance(size, int):
            raise ValueError("DeepSightConfig: {} must be an integer, got {!r}".format(
                SEG_BLUR_KERNEL_SIZE,
                size))
        if size < 1 or size % 2 == 0:
            raise ValueError("DeepSightConfig: {} must be odd and positive, got {}".format(
                SEG_BLUR_KERNEL_SIZE,
                size))

        fraction = self.min_area_fraction
        if isinstance(fraction, bool) or not isinstance(fraction, (int, float)):
            raise ValueError("DeepSightConfig: {} must be a number, got {!r}".format(
                SEG_MIN_AREA_FRACTION,
                fraction))
        if not 0 <= fraction < 1:
            raise ValueError("DeepSightConfig: {} must lie in [0, 1), got {}".format(
                SEG_MIN_AREA_FRACTION,
                fraction))
        self.min_area_fraction = float(fraction)

        if self.output_mode not in SEG_OUTPUT_MODES:
            raise ValueError("DeepSightConfig: {} must be one of {}, got {!r}".format(
                SEG_OUTPUT_MODE,
                SEG_OUTPUT_MODES,
                self.output_mode))

    def __eq__(self, other):
        if not isinstance(other, DeepSightSegmentationConfig):
            return NotImplemented
        return self.repr() == other.repr()

    def __repr__(self):
        return "DeepSightSegmentationConfig({})".format(", ".join(
            "{}={!r}".format(k, v) for k, v in sorted(self.repr().items())))


SegmentationConfig = DeepSightSegmentationConfig
