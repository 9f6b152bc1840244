"""Registry of supported backbones and headless feature extractors.

Each entry names a torchvision constructor, the input size inference runs
at, and the feature dimension the headless network emits (the width of the
removed final fully connected layer). Models are built without weights by
default, which is enough for dimension and pipeline contracts; pass a
state-dict path for real pretrained features.

"efficientnetv2" maps to torchvision's efficientnet_b7: the published
vector size for that extractor is 2560, which is the B7 width, while every
torchvision efficientnet_v2 variant emits 1280.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models


@dataclass(frozen=True)
class NetworkInfo:
    name: str
    builder: str  # torchvision constructor name
    feature_dim: int
    input_size: int


NETWORKS: dict[str, NetworkInfo] = {
    info.name: info
    for info in (
        NetworkInfo("resnet18", "resnet18", 512, 224),
        NetworkInfo("resnet50", "resnet50", 2048, 224),
        NetworkInfo("resnet101", "resnet101", 2048, 224),
        NetworkInfo("resnet152", "resnet152", 2048, 224),
        NetworkInfo("resnext101", "resnext101_32x8d", 2048, 224),
        NetworkInfo("regnety", "regnet_y_16gf", 3024, 224),
        NetworkInfo("efficientnetv2", "efficientnet_b7", 2560, 600),
        NetworkInfo("vit_b_16", "vit_b_16", 768, 224),
        NetworkInfo("vit_l_16", "vit_l_16", 1024, 224),
    )
}

# accepted spellings for the --network flag
ALIASES = {
    "resnet-18": "resnet18",
    "resnet-50": "resnet50",
    "resnet-101": "resnet101",
    "resnet-152": "resnet152",
    "resnext-101": "resnext101",
    "regnet_y_16gf": "regnety",
    "efficientnet_v2": "efficientnetv2",
    "vit-b/16": "vit_b_16",
    "vit-l/16": "vit_l_16",
}


def resolve_network(name: str) -> NetworkInfo:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in NETWORKS:
        known = ", ".join(sorted(NETWORKS))
        raise ValueError(f"unsupported network {name!r}; expected one of: {known}")
    return NETWORKS[key]


def _strip_classifier(model: nn.Module) -> nn.Module:
    """Replace the final fully connected layer with the identity."""
    if hasattr(model, "fc"):  # resnet/resnext/regnet
        model.fc = nn.Identity()
    elif hasattr(model, "classifier"):  # efficientnet
        model.classifier = nn.Identity()
    elif hasattr(model, "heads"):  # vision transformer
        model.heads = nn.Identity()
    else:
        raise ValueError(f"do not know how to behead {type(model).__name__}")
    return model


def build_feature_extractor(
    info: NetworkInfo, weights_path: str | None = None, init_seed: int = 0
) -> nn.Module:
    """Headless backbone in eval mode, on CPU.

    weights_path, when given, is a torch state dict for the full classifier
    (loaded before the head is removed). Without it the random
    initialization is drawn under a fixed seed (in a forked RNG scope), so
    repeated builds produce identical weights and extraction runs are
    reproducible even weightless.
    """
    builder = getattr(models, info.builder)
    with torch.random.fork_rng():
        torch.manual_seed(init_seed)
        model = builder(weights=None)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model = _strip_classifier(model)
    model.eval()
    return model
