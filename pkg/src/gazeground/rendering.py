"""Visual grounding artifacts: box overlays and fixation heatmaps.

Both renderers are pure: they return a new RGB image and never touch the
input. All choices (stroke, font size, sigma, alpha, palette) live in
RenderSpec so a run config fully determines the pixels.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .corpus import BoundingBox, Fixation

# High-contrast colors for box strokes and labels; index chosen from the
# label hash so the same finding gets the same color everywhere.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 57, 70),
    (29, 53, 87),
    (42, 157, 143),
    (233, 196, 106),
    (244, 162, 97),
    (38, 70, 83),
    (106, 76, 147),
    (0, 119, 182),
    (214, 40, 40),
    (82, 183, 136),
)

DEFAULT_HEATMAP_SIGMA_FRACTION = 0.05  # of image width, when sigma not given
DEFAULT_HEATMAP_ALPHA = 0.4


@dataclass(frozen=True)
class RenderSpec:
    box_stroke_px: int = 3
    label_font_px: int = 16
    heatmap_sigma_px: Optional[float] = None  # None: 5% of image width
    heatmap_alpha: float = DEFAULT_HEATMAP_ALPHA
    palette_seed: int = 0
    heatmap_weight: str = "duration"  # or "count"

    def __post_init__(self) -> None:
        if self.box_stroke_px < 1:
            raise ValueError("box_stroke_px must be >= 1")
        if self.heatmap_sigma_px is not None and self.heatmap_sigma_px <= 0:
            raise ValueError("heatmap_sigma_px must be positive")
        if not (0.0 <= self.heatmap_alpha <= 1.0):
            raise ValueError("heatmap_alpha must be in [0, 1]")
        if self.heatmap_weight not in ("duration", "count"):
            raise ValueError("heatmap_weight must be 'duration' or 'count'")

    def sigma_for(self, image_width: int) -> float:
        if self.heatmap_sigma_px is not None:
            return self.heatmap_sigma_px
        return DEFAULT_HEATMAP_SIGMA_FRACTION * image_width


def label_color(label: str, palette_seed: int) -> tuple[int, int, int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    index = (int.from_bytes(digest[:4], "big") + palette_seed) % len(PALETTE)
    return PALETTE[index]


def _font(size: int) -> ImageFont.ImageFont:
    # The bundled bitmap/vector default avoids a system font dependency, which
    # keeps output bytes identical across hosts.
    return ImageFont.load_default(size=size)


def label_anchor(box: BoundingBox, spec: RenderSpec) -> tuple[int, int]:
    """Top-left text position: above the box when it fits, else just inside it."""
    x = int(round(box.x1))
    y = int(round(box.y1)) - spec.label_font_px - 2
    if y < 0:
        y = int(round(box.y1)) + spec.box_stroke_px + 1
    return x, y


def render_box_overlay(
    image: Image.Image, boxes: Sequence[BoundingBox], spec: RenderSpec
) -> Image.Image:
    out = image.convert("RGB")
    if out is image:
        out = image.copy()
    draw = ImageDraw.Draw(out)
    font = _font(spec.label_font_px)
    for box in boxes:
        color = label_color(box.label, spec.palette_seed)
        draw.rectangle(
            (box.x1, box.y1, box.x2, box.y2), outline=color, width=spec.box_stroke_px
        )
        draw.text(label_anchor(box, spec), box.label, fill=color, font=font)
    return out


def fixation_intensity(
    width: int,
    height: int,
    fixations: Sequence[Fixation],
    sigma: float,
    weight: str = "duration",
) -> np.ndarray:
    """Raw (pre-normalization) intensity field: sum of Gaussian splats.

    Each fixation contributes a Gaussian of the given sigma centered at its
    coordinates, scaled by its duration ("duration" weighting) or by 1
    ("count"). Splats are truncated at 4 sigma, which is negligible mass.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    field = np.zeros((height, width), dtype=np.float64)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    radius = 4.0 * sigma
    for f in fixations:
        w = f.t if weight == "duration" else 1.0
        x_lo = max(0, int(np.floor(f.x - radius)))
        x_hi = min(width, int(np.ceil(f.x + radius)) + 1)
        y_lo = max(0, int(np.floor(f.y - radius)))
        y_hi = min(height, int(np.ceil(f.y + radius)) + 1)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue  # entirely off-image
        gx = np.exp(-((xs[x_lo:x_hi] - f.x) ** 2) / (2.0 * sigma * sigma))
        gy = np.exp(-((ys[y_lo:y_hi] - f.y) ** 2) / (2.0 * sigma * sigma))
        field[y_lo:y_hi, x_lo:x_hi] += w * np.outer(gy, gx)
    return field


def render_fixation_heatmap(
    image: Image.Image, fixations: Sequence[Fixation], spec: RenderSpec
) -> Image.Image:
    """Blend a duration-weighted gaze heatmap over the image.

    The intensity field is peak-normalized and colormapped; each pixel is
    blended with opacity ``heatmap_alpha * intensity``, so untouched regions
    keep the original pixels and the hottest point gets the full alpha.
    """
    out = image.convert("RGB")
    if out is image:
        out = image.copy()
    if not fixations:
        return out
    width, height = out.size
    field = fixation_intensity(
        width, height, fixations, spec.sigma_for(width), weight=spec.heatmap_weight
    )
    peak = field.max()
    if peak <= 0:
        return out
    norm = field / peak

    import matplotlib

    cmap = matplotlib.colormaps["jet"]
    heat_rgb = np.asarray(cmap(norm))[:, :, :3] * 255.0
    base = np.asarray(out, dtype=np.float64)
    alpha = (spec.heatmap_alpha * norm)[:, :, np.newaxis]
    blended = base * (1.0 - alpha) + heat_rgb * alpha
    return Image.fromarray(np.clip(np.rint(blended), 0, 255).astype(np.uint8), mode="RGB")
