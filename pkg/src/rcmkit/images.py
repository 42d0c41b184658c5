"""PNG and raw-depth image I/O with deterministic byte output."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image


def load_png_rgb(path) -> np.ndarray:
    """Load a PNG as (H, W, 3) uint8; alpha, palette, and grayscale are converted."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def save_png_rgb(image: np.ndarray, path) -> None:
    image = np.asarray(image, dtype=np.uint8)
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def load_mask(path, threshold: int = 128) -> np.ndarray:
    """Load a grayscale PNG as a boolean mask; pixels >= threshold are foreground."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"), dtype=np.uint8)
    return gray >= threshold


def save_mask(mask: np.ndarray, path) -> None:
    gray = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")


def save_depth_raw(depth: np.ndarray, path) -> None:
    """Write row-major little-endian float32 plus a JSON sidecar <path>.json."""
    depth = np.asarray(depth, dtype="<f4")
    path = Path(path)
    path.write_bytes(depth.tobytes())
    sidecar = {"width": depth.shape[1], "height": depth.shape[0], "units": "model"}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def load_depth_raw(path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    w, h = int(sidecar["width"]), int(sidecar["height"])
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    if data.size != w * h:
        raise ValueError(f"{path}: depth payload does not match {w}x{h}")
    return data.reshape(h, w).copy()
