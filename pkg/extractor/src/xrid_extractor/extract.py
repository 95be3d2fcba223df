"""Walk a ``<label>/<image>`` folder, run the backbone, write features.

Output order is sorted by (label, filename) so repeated runs produce the
same file; inference runs in eval mode with gradients off. A sidecar
``<out>.meta.txt`` records the backbone, layer and exact preprocessing.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbone import Backbone, build_backbone
from .errors import ExtractorError, UnreadableImage
from .writer import write_feature_file

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".ppm", ".webp"}


def list_images(image_dir) -> list[tuple[str, Path]]:
    """(label, path) pairs sorted by (label, filename); labels are the
    immediate subdirectory names."""
    root = Path(image_dir)
    if not root.is_dir():
        raise ExtractorError(f"image directory not found: {root}")
    pairs = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        for img in sorted(sub.iterdir()):
            if img.is_file() and img.suffix.lower() in IMAGE_SUFFIXES:
                pairs.append((sub.name, img))
    if not pairs:
        raise ExtractorError(f"no images under {root} (expected <label>/<image> layout)")
    return pairs


def _load_batch(batch: list[tuple[str, Path]], backbone: Backbone) -> torch.Tensor:
    tensors = []
    for _label, path in batch:
        try:
            with Image.open(path) as img:
                tensors.append(backbone.preprocess(img.convert("RGB")))
        except (UnidentifiedImageError, OSError) as exc:
            raise UnreadableImage(path, str(exc)) from exc
    return torch.stack(tensors)


def extract(image_dir, out, backbone: str = "alexnet", layer: str = "fc7",
            weights: str = "pretrained", batch: int = 16, seed: int = 0) -> int:
    """Extract features for every image and write the binary feature file
    plus its preprocessing sidecar. Returns the number of images."""
    if batch < 1:
        raise ExtractorError(f"batch must be >= 1, got {batch}")
    net = build_backbone(backbone, layer, weights=weights, seed=seed)
    pairs = list_images(image_dir)
    rows = np.empty((len(pairs), net.dim), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(pairs), batch):
            chunk = pairs[start : start + batch]
            features = net.model(_load_batch(chunk, net))
            rows[start : start + len(chunk)] = features.double().cpu().numpy()
    labels = [label for label, _ in pairs]
    write_feature_file(out, labels, rows)
    sidecar = Path(str(out) + ".meta.txt")
    meta = dict(net.metadata(), count=str(len(pairs)), source_dir=str(Path(image_dir)))
    sidecar.write_text(
        "".join(f"{k}={v}\n" for k, v in sorted(meta.items())), encoding="utf-8"
    )
    return len(pairs)
