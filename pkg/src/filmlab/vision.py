"""Defect-density estimation from bright- and dark-background sample
photographs: crop, grayscale, fixed-threshold binarization, area fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale frame, row-major."""

    pixels: np.ndarray  # (h, w) uint8

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.uint8 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("pixels must be a nonempty 2-D uint8 array")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class VisionConfig:
    """Thresholds and crop for defect analysis; thresholds sit between the
    synthetic background and defect intensity levels with wide margins."""

    threshold_bright: int = 140   # defects darker than a bright background
    threshold_dark: int = 90      # defects brighter than a dark background
    crop_rect: tuple[int, int, int, int] | None = None  # (x, y, w, h); None = full frame
    median_radius: int = 0        # optional pre-filter, off by default


@dataclass(frozen=True)
class DefectReport:
    background: str
    defect_fraction: float
    defect_pixel_count: int
    active_area_pixels: int
    threshold_used: int

    def to_json_dict(self) -> dict:
        return {
            "background": self.background,
            "defect_fraction": self.defect_fraction,
            "defect_pixel_count": self.defect_pixel_count,
            "active_area_pixels": self.active_area_pixels,
            "threshold_used": self.threshold_used,
        }


def to_grayscale(pixels: np.ndarray) -> GrayImage:
    """Accepts (h, w) or (h, w, 3) uint8; color uses fixed luminance
    weights 0.299/0.587/0.114."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 3:
        gray = np.clip(np.round(pixels.astype(float) @ LUMA_WEIGHTS), 0, 255).astype(np.uint8)
        return GrayImage(gray)
    return GrayImage(pixels.astype(np.uint8))


def crop_active_area(img: GrayImage, rect: tuple[int, int, int, int]) -> GrayImage:
    x, y, w, h = rect
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ValueError(f"crop rect {rect} outside image {img.width}x{img.height}")
    return GrayImage(img.pixels[y:y + h, x:x + w].copy())


def binarize(img: GrayImage, threshold: int, polarity: str) -> np.ndarray:
    """Boolean defect mask. 'defects-below' marks intensity < threshold,
    'defects-above' marks intensity > threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError("threshold must lie in [0, 255]")
    if polarity == "defects-below":
        return img.pixels < threshold
    if polarity == "defects-above":
        return img.pixels > threshold
    raise ValueError(f"unknown polarity {polarity!r}")


def defect_fraction(mask: np.ndarray) -> float:
    """Marked pixels as a percentage of the mask area."""
    if mask.size == 0:
        raise ValueError("empty mask")
    return 100.0 * float(np.count_nonzero(mask)) / mask.size


def analyze_defects(pixels: np.ndarray | GrayImage, background: str,
                    cfg: VisionConfig = VisionConfig()) -> DefectReport:
    """Crop -> grayscale -> binarize -> area fraction.

    Bright backgrounds mark defects below the threshold, dark backgrounds
    above it.
    """
    if background == "bright":
        threshold, polarity = cfg.threshold_bright, "defects-below"
    elif background == "dark":
        threshold, polarity = cfg.threshold_dark, "defects-above"
    else:
        raise ValueError(f"background must be 'bright' or 'dark', got {background!r}")
    img = pixels if isinstance(pixels, GrayImage) else to_grayscale(pixels)
    if cfg.crop_rect is not None:
        img = crop_active_area(img, cfg.crop_rect)
    if cfg.median_radius > 0:
        from scipy.ndimage import median_filter
        img = GrayImage(median_filter(img.pixels, size=2 * cfg.median_radius + 1))
    mask = binarize(img, threshold, polarity)
    count = int(np.count_nonzero(mask))
    return DefectReport(background=background,
                        defect_fraction=100.0 * count / mask.size,
                        defect_pixel_count=count,
                        active_area_pixels=int(mask.size),
                        threshold_used=threshold)


# ---------------------------------------------------------------------------
# Binary PGM (P5) / PPM (P6) ingest, 8-bit only.

def write_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(img.pixels.tobytes())


def _read_header_tokens(f, count):
    tokens = []
    while len(tokens) < count:
        line = f.readline()
        if not line:
            raise ValueError("truncated netpbm header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return tokens


def read_netpbm(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6); returns (h, w) or (h, w, 3) uint8."""
    with open(Path(path), "rb") as f:
        magic = f.readline().strip()
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"unsupported netpbm magic {magic!r} (need P5 or P6)")
        w, h, maxval = (int(t) for t in _read_header_tokens(f, 3))
        if maxval != 255:
            raise ValueError("only 8-bit netpbm images are supported")
        channels = 1 if magic == b"P5" else 3
        data = f.read(w * h * channels)
        if len(data) != w * h * channels:
            raise ValueError("truncated netpbm payload")
    arr = np.frombuffer(data, dtype=np.uint8)
    return arr.reshape((h, w)) if channels == 1 else arr.reshape((h, w, 3))
