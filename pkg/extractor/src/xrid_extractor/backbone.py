"""Backbone assembly: a torchvision classifier truncated at a flat
fully-connected layer, plus its canonical preprocessing.

Supported pairings (layer -> feature width):

* alexnet: fc6 (4096), fc7 (4096, the default), fc8 (1000)
* vgg16:   fc6 (4096), fc7 (4096), fc8 (1000)

``fc6``/``fc7`` are the post-activation outputs of the corresponding
fully-connected layers. Weights come from torchvision's pretrained
channel (``--weights pretrained``), a local state-dict file, or a seeded
random initialization (``--weights random``) for fully offline,
deterministic runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from torchvision import models, transforms

from .errors import LayerNotFound, UnknownBackbone, WeightsUnavailable

# classifier truncation index per (backbone, layer)
_LAYER_CUT = {
    "alexnet": {"fc6": 3, "fc7": 6, "fc8": 7},
    "vgg16": {"fc6": 2, "fc7": 5, "fc8": 7},
}
_FACTORY = {"alexnet": models.alexnet, "vgg16": models.vgg16}

# torchvision's ImageNet preprocessing constants
RESIZE = 256
CROP = 224
MEAN = (0.485, 0.456, 0.406)
STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class Backbone:
    name: str
    layer: str
    dim: int
    weights: str
    model: nn.Module
    preprocess: transforms.Compose

    def metadata(self) -> dict[str, str]:
        return {
            "backbone": self.name,
            "layer": self.layer,
            "dim": str(self.dim),
            "weights": self.weights,
            "resize": str(RESIZE),
            "center_crop": str(CROP),
            "normalize_mean": ",".join(f"{v:g}" for v in MEAN),
            "normalize_std": ",".join(f"{v:g}" for v in STD),
        }


def _layer_width(full: nn.Module, name: str, cut: int) -> int:
    tail = list(full.classifier.children())[:cut]
    for module in reversed(tail):
        if isinstance(module, nn.Linear):
            return module.out_features
    raise LayerNotFound(f"no linear layer before cut {cut} in {name}")


def build_backbone(name: str = "alexnet", layer: str = "fc7",
                   weights: str = "pretrained", seed: int = 0) -> Backbone:
    """Assemble a truncated, eval-mode backbone on the CPU.

    ``weights`` is ``pretrained`` (torchvision download channel),
    ``random`` (deterministic seeded init), or a path to a state dict.
    """
    if name not in _FACTORY:
        raise UnknownBackbone(f"unknown backbone {name!r}; supported: {sorted(_FACTORY)}")
    cuts = _LAYER_CUT[name]
    if layer not in cuts:
        raise LayerNotFound(f"backbone {name!r} has no layer {layer!r}; "
                            f"supported: {sorted(cuts)}")
    if weights == "random":
        torch.manual_seed(seed)
        full = _FACTORY[name](weights=None)
        weights_id = f"random(seed={seed})"
    elif weights == "pretrained":
        try:
            full = _FACTORY[name](weights="DEFAULT")
        except Exception as exc:  # download channel unreachable, no cache
            raise WeightsUnavailable(
                f"pretrained weights for {name!r} are not available locally and "
                f"could not be fetched ({exc}); pass --weights random or a "
                "state-dict path"
            ) from exc
        weights_id = "torchvision-default"
    else:
        path = Path(weights)
        if not path.is_file():
            raise WeightsUnavailable(f"weights file not found: {path}")
        full = _FACTORY[name](weights=None)
        state = torch.load(path, map_location="cpu", weights_only=True)
        full.load_state_dict(state)
        weights_id = f"file:{path.name}"
    dim = _layer_width(full, name, cuts[layer])
    full.classifier = nn.Sequential(*list(full.classifier.children())[: cuts[layer]])
    full.eval()
    for p in full.parameters():
        p.requires_grad_(False)
    preprocess = transforms.Compose([
        transforms.Resize(RESIZE),
        transforms.CenterCrop(CROP),
        transforms.ToTensor(),
        transforms.Normalize(mean=MEAN, std=STD),
    ])
    return Backbone(name=name, layer=layer, dim=dim, weights=weights_id,
                    model=full, preprocess=preprocess)
