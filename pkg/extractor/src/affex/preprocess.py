"""Image standardization: zero-pad to square, then resize to the model input.

Dataset images come in mixed sizes and aspect ratios. Rather than the
classifiers' usual center crop (which can cut the object away), the
shorter image dimension is zero-padded symmetrically to make the image
square, and the square is rescaled to the network's input size.
"""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def pad_to_square(image: np.ndarray) -> np.ndarray:
    """Zero-pad the shorter dimension symmetrically (extra pixel trails)."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {image.shape}")
    h, w = image.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("empty image")
    side = max(h, w)
    top = (side - h) // 2
    left = (side - w) // 2
    out = np.zeros((side, side, 3), dtype=image.dtype)
    out[top : top + h, left : left + w] = image
    return out


def standardize_image(image: np.ndarray, target_size: int) -> np.ndarray:
    """Square zero-padded image resized to (target_size, target_size, 3) uint8."""
    square = pad_to_square(np.asarray(image))
    pil = Image.fromarray(square.astype(np.uint8))
    resized = pil.resize((target_size, target_size), Image.BILINEAR)
    return np.asarray(resized)


def to_model_batch(images: list[np.ndarray]) -> torch.Tensor:
    """Stack standardized uint8 images into a normalized NCHW float tensor."""
    arr = np.stack(images).astype(np.float32) / 255.0
    arr = (arr - IMAGENET_MEAN) / IMAGENET_STD
    return torch.from_numpy(arr.transpose(0, 3, 1, 2)).contiguous()


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))
