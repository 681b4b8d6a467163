"""
Raster types and image file I/O.

An Image is an H x W x 3 uint8 array in R,G,B order, a GrayPlane an H x W float64
array. Both are read-only once constructed. Binary PPM (P6) is parsed and written
here byte for byte; PNG and JPEG go through Pillow.
"""

import io
import os
import tempfile
from collections import namedtuple

import numpy as np
from PIL import Image as PILImage

FORMAT_PPM = "ppm"
FORMAT_PNG = "png"
FORMAT_JPEG = "jpeg"

_EXTENSION_FORMATS = {
    ".ppm": FORMAT_PPM,
    ".pnm": FORMAT_PPM,
    ".png": FORMAT_PNG,
    ".jpg": FORMAT_JPEG,
    ".jpeg": FORMAT_JPEG,
}
IMAGE_EXTENSIONS = tuple(sorted(_EXTENSION_FORMATS.keys()))

PPM_MAGIC = b"P6"
PPM_MAXVAL = 255
_PPM_WHITESPACE = b" \t\n\r\x0b\x0c"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8"


class ImageError(Exception):
    """Base class of image loading and manipulation failures."""


class ImageNotFoundError(ImageError, FileNotFoundError):
    pass


class MalformedHeaderError(ImageError, ValueError):
    pass


class TruncatedImageError(ImageError, ValueError):
    pass


class UnwritablePathError(ImageError, OSError):
    pass


class RectOutOfBoundsError(ImageError, ValueError):
    pass


class Image(object):
    """Interleaved 8-bit RGB raster.

    Arguments:
        data: array-like of shape (height, width, 3), values in [0, 255]
    """
    def __init__(self, data):
        array = np.asarray(data)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ValueError("Image data must have shape (height, width, 3), got {}".format(
                array.shape))
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError("Image must be at least 1x1, got {}x{}".format(
                array.shape[1],
                array.shape[0]))
        if array.dtype != np.uint8:
            if array.dtype.kind == "f" and not np.all(np.isfinite(array)):
                raise ValueError("Image samples must be finite")
            if array.size and (array.min() < 0 or array.max() > 255):
                raise ValueError("Image samples must lie in [0, 255]")
            array = array.astype(np.uint8)
        array = np.array(array, dtype=np.uint8, copy=True)
        array.setflags(write=False)
        self._data = array

    @classmethod
    def from_raw(cls, width, height, raw):
        """Build an image from row-major interleaved RGB bytes."""
        expected = width * height * 3
        if len(raw) != expected:
            raise ValueError("Expected {} bytes for a {}x{} image, got {}".format(
                expected,
                width,
                height,
                len(raw)))
        return cls(np.frombuffer(bytes(raw), dtype=np.uint8).reshape(height, width, 3))

    @classmethod
    def filled(cls, width, height, rgb):
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[...] = np.asarray(rgb, dtype=np.uint8)
        return cls(data)

    @property
    def data(self):
        return self._data

    @property
    def width(self):
        return self._data.shape[1]

    @property
    def height(self):
        return self._data.shape[0]

    @property
    def area(self):
        return self.width * self.height

    def full_rect(self):
        return Rect(0, 0, self.width, self.height)

    def tobytes(self):
        return self._data.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        return "Image(width={}, height={})".format(self.width, self.height)


class GrayPlane(object):
    """Single channel floating point raster."""
    def __init__(self, data):
        array = np.array(data, dtype=np.float64, copy=True)
        if array.ndim != 2:
            raise ValueError("GrayPlane data must be 2-dimensional, got shape {}".format(
                array.shape))
        if not np.all(np.isfinite(array)):
            raise ValueError("GrayPlane values must be finite")
        array.setflags(write=False)
        self._data = array

    @property
    def data(self):
        return self._data

    @property
    def width(self):
        return self._data.shape[1]

    @property
    def height(self):
        return self._data.shape[0]

    @property
    def size(self):
        return self._data.size

    def __eq__(self, other):
        if not isinstance(other, GrayPlane):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        return "GrayPlane(width={}, height={})".format(self.width, self.height)


class Rect(namedtuple("Rect", ["x", "y", "w", "h"])):
    """Axis-aligned pixel rectangle, (x, y) is the top-left corner."""
    __slots__ = ()

    def __new__(cls, x, y, w, h):
        if w < 1 or h < 1:
            raise ValueError("Rect extent must be at least 1x1, got {}x{}".format(w, h))
        return super(Rect, cls).__new__(cls, int(x), int(y), int(w), int(h))

    @property
    def right(self):
        return self.x + self.w

    @property
    def bottom(self):
        return self.y + self.h

    def inside(self, width, height):
        return self.x >= 0 and self.y >= 0 and self.right <= width and self.bottom <= height

    def translate(self, dx, dy):
        return Rect(self.x + dx, self.y + dy, self.w, self.h)


def split_channels(img):
    """Return the R, G and B planes of an image."""
    return tuple(GrayPlane(img.data[:, :, c]) for c in range(3))


def merge_channels(r, g, b):
    """Inverse of split_channels; planes are rounded and clipped to 8 bits."""
    if not (r.data.shape == g.data.shape == b.data.shape):
        raise ValueError("Channel planes differ in size: {}, {}, {}".format(
            r.data.shape,
            g.data.shape,
            b.data.shape))
    stacked = np.stack([r.data, g.data, b.data], axis=-1)
    return Image(np.clip(np.rint(stacked), 0, 255).astype(np.uint8))


def crop(img, rect):
    if not rect.inside(img.width, img.height):
        raise RectOutOfBoundsError("Rect {} exceeds {}x{} image".format(
            tuple(rect),
            img.width,
            img.height))
    return Image(img.data[rect.y:rect.bottom, rect.x:rect.right])


def plane_mean(plane):
    if plane.size == 0:
        raise ValueError("Cannot take the mean of an empty plane")
    return float(np.mean(plane.data))


def sniff_format(buf):
    if buf[:2] == PPM_MAGIC:
        return FORMAT_PPM
    if buf[:8] == _PNG_MAGIC:
        return FORMAT_PNG
    if buf[:2] == _JPEG_MAGIC:
        return FORMAT_JPEG
    return None


def format_for_path(path):
    ext = os.path.splitext(str(path))[1].lower()
    return _EXTENSION_FORMATS.get(ext, FORMAT_PPM)


def extension_for_format(fmt):
    return {FORMAT_PPM: ".ppm", FORMAT_PNG: ".png", FORMAT_JPEG: ".jpg"}[fmt]


def _skip_whitespace_and_comments(buf, pos):
    start = pos
    while pos < len(buf):
        byte = buf[pos:pos + 1]
        if byte == b"#":
            end = buf.find(b"\n", pos)
            pos = len(buf) if end < 0 else end + 1
        elif byte in _PPM_WHITESPACE:
            pos += 1
        else:
            break
    return pos, pos > start


def _parse_ppm_header(buf):
    if len(buf) < 2 or buf[:2] != PPM_MAGIC:
        raise MalformedHeaderError("Missing P6 magic number")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        pos, separated = _skip_whitespace_and_comments(buf, pos)
        if not separated:
            raise MalformedHeaderError("Expected whitespace before PPM {}".format(name))
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise MalformedHeaderError("Missing PPM {}".format(name))
        fields.append(int(buf[start:pos]))
    if pos >= len(buf) or buf[pos:pos + 1] not in _PPM_WHITESPACE:
        raise MalformedHeaderError("PPM header must end with a single whitespace byte")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeaderError("PPM dimensions must be positive, got {}x{}".format(
            width,
            height))
    if maxval != PPM_MAXVAL:
        raise MalformedHeaderError("Only maxval {} is supported, got {}".format(
            PPM_MAXVAL,
            maxval))
    return width, height, pos + 1


def decode_ppm(buf):
    buf = bytes(buf)
    width, height, offset = _parse_ppm_header(buf)
    expected = width * height * 3
    payload = buf[offset:offset + expected]
    if len(payload) < expected:
        raise TruncatedImageError("PPM payload holds {} of {} bytes".format(
            len(payload),
            expected))
    return Image.from_raw(width, height, payload)


def encode_ppm(img):
    header = "P6\n{} {}\n{}\n".format(img.width, img.height, PPM_MAXVAL).encode("ascii")
    return header + img.tobytes()


def _decode_with_pillow(buf):
    try:
        with PILImage.open(io.BytesIO(buf)) as pil_img:
            pil_img.load()
            return Image(np.asarray(pil_img.convert("RGB")))
    except OSError as err:
        if "truncated" in str(err).lower():
            raise TruncatedImageError(str(err))
        raise MalformedHeaderError("Unrecognised image data: {}".format(err))
    except (ValueError, SyntaxError) as err:
        raise MalformedHeaderError("Unrecognised image data: {}".format(err))


def decode_image(buf):
    """Decode PPM, PNG or JPEG bytes into an Image."""
    buf = bytes(buf)
    if len(buf) == 0:
        raise MalformedHeaderError("Empty image data")
    if sniff_format(buf) in (None, FORMAT_PPM):
        return decode_ppm(buf)
    return _decode_with_pillow(buf)


def encode_image(img, fmt=FORMAT_PPM):
    if fmt == FORMAT_PPM:
        return encode_ppm(img)
    out = io.BytesIO()
    pil_img = PILImage.fromarray(np.ascontiguousarray(img.data), mode="RGB")
    if fmt == FORMAT_PNG:
        pil_img.save(out, format="PNG")
    elif fmt == FORMAT_JPEG:
        pil_img.save(out, format="JPEG", quality=100)
    else:
        raise ValueError("Unsupported image format '{}'".format(fmt))
    return out.getvalue()


def load_image(path):
    path = str(path)
    if not os.path.isfile(path):
        raise ImageNotFoundError("Image file not found: {}".format(path))
    with open(path, "rb") as fd:
        buf = fd.read()
    return decode_image(buf)


def save_image(img, path, fmt=None):
    """Write an image; the format follows the extension unless given."""
    path = str(path)
    fmt = fmt or format_for_path(path)
    payload = encode_image(img, fmt)
    tmp_path = None
    try:
        fd, tmp_path = tempfile.mkstemp(prefix=".image-", dir=os.path.dirname(path) or ".")
        with os.fdopen(fd, "wb") as out:
            out.write(payload)
        os.chmod(tmp_path, 0o644)
        os.replace(tmp_path, path)
    except OSError as err:
        if tmp_path is not None and os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise UnwritablePathError("Cannot write image to {}: {}".format(path, err))
