import json
import os
from collections import deque

import numpy as np

from deepsight.pt.deepsight_classifier import Classifier, LabelSet, top_k_from_scores
from deepsight.pt.deepsight_image import Image, save_image

RED = (255, 0, 0)
BLUE = (0, 0, 255)
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)


def solid_image(width, height, rgb):
    return Image.filled(width, height, rgb)


def rect_scene(width, height, rect, fg=WHITE, bg=BLACK, noise_sigma=0.0, rng=None):
    """Uniform background with one filled axis-aligned rectangle (x, y, w, h)."""
    data = np.empty((height, width, 3), dtype=np.float64)
    data[...] = bg
    x, y, w, h = rect
    data[y:y + h, x:x + w] = fg
    if noise_sigma > 0:
        rng = rng or np.random.RandomState(0)
        data += rng.normal(0.0, noise_sigma, size=data.shape)
    return Image(np.clip(np.rint(data), 0, 255).astype(np.uint8))


def square_scene(size=200, square=80, origin=60, fg=WHITE, bg=BLACK):
    return rect_scene(size, size, (origin, origin, square, square), fg, bg)


def textured_scene(width, height, rect, fg, rng, base=128, spread=6):
    """Object on a grey background with small per-pixel texture."""
    data = rng.randint(base - spread, base + spread + 1, size=(height, width, 1))
    data = np.repeat(data, 3, axis=2).astype(np.uint8)
    x, y, w, h = rect
    data[y:y + h, x:x + w] = fg
    return Image(data)


def write_frames(directory, images, ext=".ppm"):
    paths = []
    for i, img in enumerate(images):
        path = os.path.join(str(directory), "frame_{:04d}{}".format(i, ext))
        save_image(img, path)
        paths.append(path)
    return paths


class MockClassifier(Classifier):
    """Classifier answering from a fixed score table.

    Frames are tiny images whose top-left red sample is the row of the table.
    """
    kind = "mock"

    def __init__(self, labels, table, workers=1):
        super(MockClassifier, self).__init__(LabelSet(labels), workers)
        self.table = np.asarray(table, dtype=np.float64)

    @property
    def loaded(self):
        return True

    def _scores(self, img, workers):
        return self.table[int(img.data[0, 0, 0])]


def frame_for_row(row):
    return Image.filled(3, 3, (row, 0, 0))


def random_distribution(rng, n, ties=False):
    if ties:
        raw = rng.randint(1, 4, size=n).astype(np.float64)
    else:
        raw = rng.random_sample(n) + 1e-3
    return raw / raw.sum()


def brute_force_discover(labels, table, query, k):
    """Every (frame, top-k slot) pair; first matching slot per frame, strict improvement."""
    best = None
    for frame_index, scores in enumerate(table):
        ranked = top_k_from_scores(scores, k)
        matches = [p for p in ranked if query in labels[p.index]]
        if not matches:
            continue
        hit = matches[0]
        if best is None or hit.score > best[2]:
            best = (frame_index, hit.index, hit.score)
    return best


def naive_conv(volume, filters, stride, pad):
    depth, height, width = volume.shape
    num_filters, _, size, _ = filters.shape
    padded = np.zeros((depth, height + 2 * pad, width + 2 * pad))
    padded[:, pad:pad + height, pad:pad + width] = volume
    out_h = (height - size + 2 * pad) // stride + 1
    out_w = (width - size + 2 * pad) // stride + 1
    out = np.zeros((num_filters, out_h, out_w))
    for k in range(num_filters):
        for i in range(out_h):
            for j in range(out_w):
                total = 0.0
                for d in range(depth):
                    for u in range(size):
                        for v in range(size):
                            total += padded[d, i * stride + u, j * stride + v] * filters[k, d, u, v]
                out[k, i, j] = total
    return out


def naive_max_pool(volume, window, stride):
    depth, height, width = volume.shape
    out_h = (height - window) // stride + 1
    out_w = (width - window) // stride + 1
    out = np.zeros((depth, out_h, out_w))
    for d in range(depth):
        for i in range(out_h):
            for j in range(out_w):
                out[d, i, j] = volume[d, i * stride:i * stride + window, j * stride:j * stride + window].max()
    return out


def label_components(binary):
    """8-connected foreground components, -1 for background."""
    height, width = binary.shape
    labels = -np.ones((height, width), dtype=np.int64)
    count = 0
    for y in range(height):
        for x in range(width):
            if binary[y, x] and labels[y, x] < 0:
                queue = deque([(y, x)])
                labels[y, x] = count
                while queue:
                    cy, cx = queue.popleft()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < height and 0 <= nx < width and binary[ny, nx] and labels[ny, nx] < 0:
                                labels[ny, nx] = count
                                queue.append((ny, nx))
                count += 1
    return labels, count


def enclosed_region(component_mask):
    """Pixels a 4-connected walk from outside the image cannot reach past the component."""
    height, width = component_mask.shape
    walls = np.pad(component_mask, 1, mode="constant", constant_values=False)
    outside = np.zeros_like(walls)
    queue = deque([(0, 0)])
    outside[0, 0] = True
    while queue:
        y, x = queue.popleft()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < height + 2 and 0 <= nx < width + 2 and not outside[ny, nx] and not walls[ny, nx]:
                outside[ny, nx] = True
                queue.append((ny, nx))
    return ~outside[1:-1, 1:-1]


def nesting_oracle(binary):
    """Component labels, enclosed areas and innermost enclosing component of each."""
    labels, count = label_components(binary)
    regions = [enclosed_region(labels == c) for c in range(count)]
    areas = [int(r.sum()) for r in regions]
    parents = []
    for c in range(count):
        members = labels == c
        enclosing = [d for d in range(count) if d != c and np.all(regions[d][members])]
        parents.append(min(enclosing, key=lambda d: areas[d]) if enclosing else None)
    return labels, areas, parents


def train_red_blue(workers=1):
    from deepsight.pt.deepsight_classifier import train_reference_classifier

    labels = LabelSet(["red", "blue"])
    samples = [(solid_image(8, 8, RED), 0), (solid_image(8, 8, BLUE), 1)]
    return train_reference_classifier(samples, labels, workers=workers)


def create_config_from_dict(tmpdir, config_dict):
    config_path = os.path.join(str(tmpdir), 'temp_config.json')
    with open(config_path, 'w') as fd:
        json.dump(config_dict, fd)
    return config_path
