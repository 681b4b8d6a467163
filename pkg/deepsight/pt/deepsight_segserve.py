"""
Segmentation over HTTP.

Request: POST / with Content-Type application/json;charset=UTF-8 and the body
{"imageName": <name>, "imageString": <base64 image file bytes>}.
Response: 200 with the base64 text of the segmented image file as the whole body,
in the payload's own image format. X-Seg-Rect carries the bounding box as x,y,w,h;
X-Seg-Fallback: 1 marks a response holding the unsegmented image because no object
was found. Errors are 4xx/5xx with a short text reason.
"""

import base64
import binascii
import json
import signal
import threading
from collections import namedtuple

import requests
from flask import Flask, Response, request
from werkzeug.serving import make_server

from deepsight.pt.deepsight_constants import *
from deepsight.pt.deepsight_image import FORMAT_PPM, ImageError, Rect, decode_image, encode_image, sniff_format
from deepsight.pt.deepsight_segmentation import MIN_SEGMENT_SIZE, NoObjectFoundError, segment
from deepsight.pt.deepsight_segmentation_config import DeepSightSegmentationConfig
from deepsight.pt.deepsight_timer import RequestTimer
from deepsight.pt.log_utils import logger

HTTP_OK = 200
HTTP_BAD_REQUEST = 400
HTTP_METHOD_NOT_ALLOWED = 405
HTTP_INTERNAL_ERROR = 500


class ProtocolError(ValueError):
    status = HTTP_BAD_REQUEST


class MalformedMessageError(ProtocolError):
    pass


class MissingFieldError(ProtocolError):
    pass


class InvalidBase64Error(ProtocolError):
    pass


class EmptyPayloadError(ProtocolError):
    pass


class RemoteSegmentationError(RuntimeError):
    """Remote segmentation failed; callers continue with the unsegmented image."""


class RemoteConnectionError(RemoteSegmentationError):
    pass


class RemoteStatusError(RemoteSegmentationError):
    def __init__(self, status, reason):
        super(RemoteStatusError, self).__init__("Server answered {}: {}".format(status, reason))
        self.status = status
        self.reason = reason


class RemoteResponseError(RemoteSegmentationError):
    pass


class ServerStartError(OSError):
    pass


SegmentationRequest = namedtuple("SegmentationRequest", ["image_string", "image_name"])
SegmentationResponse = namedtuple("SegmentationResponse", ["status", "body", "headers"])
RemoteSegmentation = namedtuple("RemoteSegmentation", ["image", "rect", "fallback"])


def b64_encode(data):
    """Standard alphabet, padded, without line breaks."""
    return base64.b64encode(bytes(data)).decode("ascii")


def b64_decode(text):
    """Inverse of b64_encode; line breaks anywhere in the input are ignored."""
    if isinstance(text, str):
        try:
            text = text.encode("ascii")
        except UnicodeEncodeError:
            raise InvalidBase64Error("Base64 text contains non-ASCII characters")
    text = bytes(text).replace(b"\r", b"").replace(b"\n", b"")
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as err:
        raise InvalidBase64Error("Invalid Base64: {}".format(err))


def encode_request(img_bytes, name):
    """Compact JSON request body for an image file's bytes."""
    if not img_bytes:
        raise EmptyPayloadError("Refusing to send an empty image payload")
    if not name:
        raise MissingFieldError("Image name must be non-empty")
    return json.dumps({
        FIELD_IMAGE_NAME: name,
        FIELD_IMAGE_STRING: b64_encode(img_bytes)
    },
                      sort_keys=True,
                      separators=(',',
                                  ':'))


def parse_request(message):
    """JSON text to a SegmentationRequest, fields still encoded."""
    if isinstance(message, bytes):
        try:
            message = message.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedMessageError("Request body is not UTF-8")
    try:
        data = json.loads(message)
    except (ValueError, RecursionError) as err:
        raise MalformedMessageError("Request body is not valid JSON: {}".format(err))
    if not isinstance(data, dict):
        raise MalformedMessageError("Request body must be a JSON object")
    for field in (FIELD_IMAGE_STRING, FIELD_IMAGE_NAME):
        if field not in data:
            raise MissingFieldError("Request is missing '{}'".format(field))
        if not isinstance(data[field], str):
            raise MalformedMessageError("'{}' must be a string".format(field))
    if not data[FIELD_IMAGE_NAME]:
        raise MissingFieldError("'{}' must be non-empty".format(FIELD_IMAGE_NAME))
    return SegmentationRequest(data[FIELD_IMAGE_STRING], data[FIELD_IMAGE_NAME])


def _request_bytes(req):
    img_bytes = b64_decode(req.image_string)
    if not img_bytes:
        raise EmptyPayloadError("'{}' decodes to no bytes".format(FIELD_IMAGE_STRING))
    return img_bytes


def decode_request(message):
    """(image bytes, name) of a JSON request body."""
    req = parse_request(message)
    return _request_bytes(req), req.image_name


def _text_response(status, reason):
    return SegmentationResponse(status, reason, {})


def handle_request(req, cfg):
    """Segment the image of a decoded request.

    Returns:
        SegmentationResponse; 400 for undecodable payloads, 500 for pipeline failures
    """
    try:
        img_bytes = _request_bytes(req)
        img = decode_image(img_bytes)
    except ProtocolError as err:
        return _text_response(err.status, str(err))
    except ImageError as err:
        return _text_response(HTTP_BAD_REQUEST, "Undecodable image: {}".format(err))
    if img.width < MIN_SEGMENT_SIZE or img.height < MIN_SEGMENT_SIZE:
        return _text_response(HTTP_BAD_REQUEST,
                              "Image must be at least 3x3, got {}x{}".format(img.width, img.height))

    fmt = sniff_format(img_bytes) or FORMAT_PPM
    try:
        result = segment(img, cfg)
    except NoObjectFoundError:
        return SegmentationResponse(HTTP_OK, b64_encode(encode_image(img, fmt)), {HEADER_FALLBACK: "1"})
    except Exception as err:
        logger.error("Segmentation of '{}' failed: {}".format(req.image_name, err))
        return _text_response(HTTP_INTERNAL_ERROR, "Segmentation failed")

    rect = ",".join(str(v) for v in result.rect)
    return SegmentationResponse(HTTP_OK, b64_encode(encode_image(result.image, fmt)), {HEADER_RECT: rect})


def handle_http(method, body, cfg):
    if method != "POST":
        return SegmentationResponse(HTTP_METHOD_NOT_ALLOWED, "Method Not Allowed", {"Allow": "POST"})
    try:
        req = parse_request(body)
    except ProtocolError as err:
        return _text_response(err.status, str(err))
    return handle_request(req, cfg)


def create_app(cfg=None):
    """Flask application serving the segmentation route.

    cfg is shared by all request threads and never modified.
    """
    cfg = cfg or DeepSightSegmentationConfig()
    app = Flask("deepsight")

    @app.route(ROUTE_SEGMENT, methods=["GET", "POST", "PUT", "PATCH", "DELETE"])
    def upload_file():
        with RequestTimer() as timer:
            response = handle_http(request.method, request.get_data(cache=False), cfg)
        logger.info("{} {} {} {:.1f} ms".format(request.method,
                                                request.path,
                                                response.status,
                                                timer.elapsed_ms))
        return Response(response.body,
                        status=response.status,
                        headers=response.headers,
                        mimetype="text/plain")

    return app


class SegmentationServer(object):
    """Threaded HTTP server around create_app.

    Arguments:
        cfg: DeepSightSegmentationConfig
        bind: address to listen on
        port: port, 0 picks a free one
    """
    def __init__(self, cfg=None, bind=SERVER_BIND_DEFAULT, port=SERVER_PORT_DEFAULT):
        self.cfg = cfg or DeepSightSegmentationConfig()
        try:
            self._server = make_server(bind, port, create_app(self.cfg), threaded=True)
        except (OSError, SystemExit) as err:
            # werkzeug exits instead of raising when the port is taken
            raise ServerStartError("Cannot listen on {}:{}: {}".format(bind, port, err))
        self._thread = None

    @property
    def port(self):
        return self._server.server_port

    @property
    def url(self):
        host = self._server.server_address[0]
        return "http://{}:{}{}".format(host, self.port, ROUTE_SEGMENT)

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        logger.info("Segmentation server listening on {}".format(self.url))
        return self

    def serve_forever(self):
        logger.info("Segmentation server listening on {}".format(self.url))
        previous = signal.signal(signal.SIGTERM, _raise_interrupt)
        try:
            self._server.serve_forever()
        except KeyboardInterrupt:
            logger.info("Segmentation server shutting down")
        finally:
            signal.signal(signal.SIGTERM, previous)
            self._server.server_close()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
        return False


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt()


def _parse_rect(value):
    if value is None:
        return None
    try:
        return Rect(*(int(v) for v in value.split(",")))
    except (TypeError, ValueError):
        raise RemoteResponseError("Malformed {} header '{}'".format(HEADER_RECT, value))


class SegmentationClient(object):
    """Sends images to a segmentation server.

    Arguments:
        url: server URL, e.g. http://127.0.0.1:5000/
        timeout: seconds to wait for connection and response
    """
    def __init__(self, url, timeout=SERVER_TIMEOUT_DEFAULT):
        self.url = url
        self.timeout = timeout

    def segment(self, img, name="image.ppm", fmt=FORMAT_PPM):
        body = encode_request(encode_image(img, fmt), name)
        try:
            response = requests.post(self.url,
                                     data=body.encode("utf-8"),
                                     headers={"Content-Type": REQUEST_CONTENT_TYPE},
                                     timeout=self.timeout)
        except requests.exceptions.RequestException as err:
            raise RemoteConnectionError("Cannot reach {}: {}".format(self.url, err))

        if response.status_code != HTTP_OK:
            raise RemoteStatusError(response.status_code, response.text.strip())

        try:
            segmented = decode_image(b64_decode(response.content))
        except (ProtocolError, ImageError) as err:
            raise RemoteResponseError("Undecodable response from {}: {}".format(self.url, err))

        fallback = response.headers.get(HEADER_FALLBACK) == "1"
        rect = _parse_rect(response.headers.get(HEADER_RECT))
        return RemoteSegmentation(segmented, rect, fallback)


def client_segment(server_url, img, timeout=SERVER_TIMEOUT_DEFAULT):
    """Segment remotely, returning only the image."""
    return SegmentationClient(server_url, timeout).segment(img).image
