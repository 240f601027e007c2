"""Deterministic augmentation and enhancement operators for 8-bit images.

An image is a numpy ``uint8`` array of shape ``(height, width, channels)``
with 1 (grayscale) or 3 (RGB) channels. All operators are pure functions on
such arrays and are bit-deterministic: float work happens in float64, the
only rounding rule is round-half-up (``floor(x + 0.5)``), and quantization
back to 8 bits happens exactly once per operator.

Stochastic operators take an explicit generator so the draw order is part of
the interchange contract:

* ``random_crop`` consumes two bounded draws, row offset first, then column.
* ``additive_gaussian_noise`` consumes one standard normal per sample in
  row-major (C-contiguous) order over ``(height, width, channels)``, drawn
  pair-wise, and always consumes the stream even when ``scale`` is 0.

Crop fractions are interpreted as decimal literals (``0.9`` means exactly
9/10) so output dimensions are platform-independent.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image as PILImage

from .errors import DataError
from .rng import SplitMix64, derive_seed

# Defaults for operators used without an explicit parameter; every one is
# overridable in an AugmentStep.
DEFAULT_CROP_FRACTION = 0.9
DEFAULT_SIGMA = 1.0
DEFAULT_ALPHA = 1.5
DEFAULT_NOISE_SCALE = 10.0
DEFAULT_MEDIAN_K = 3
DEFAULT_GAMMA = 0.8

# Operator name -> parameter key (None for parameterless operators).
PARAM_KEYS = {
    "random_crop": "fraction",
    "center_crop": "fraction",
    "hflip": None,
    "vflip": None,
    "gaussian_blur": "sigma",
    "linear_contrast": "alpha",
    "additive_gaussian_noise": "scale",
    "median_filter": "k",
    "contrast_enhance": "gamma",
}

DEFAULT_PARAMS = {
    "random_crop": DEFAULT_CROP_FRACTION,
    "center_crop": DEFAULT_CROP_FRACTION,
    "gaussian_blur": DEFAULT_SIGMA,
    "linear_contrast": DEFAULT_ALPHA,
    "additive_gaussian_noise": DEFAULT_NOISE_SCALE,
    "median_filter": DEFAULT_MEDIAN_K,
    "contrast_enhance": DEFAULT_GAMMA,
}

_MASK64 = 0xFFFFFFFFFFFFFFFF


def as_image(arr) -> np.ndarray:
    """Validate and normalize an array to (H, W, C) uint8 with C in {1, 3}."""
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        raise DataError(f"images must be uint8, got {a.dtype}")
    if a.ndim == 2:
        a = a[:, :, np.newaxis]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise DataError(f"images must be (H, W) or (H, W, 1|3), got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DataError(f"image dimensions must be >= 1, got shape {a.shape}")
    return a


def round_half_up(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer with halves toward +infinity."""
    return np.floor(x + 0.5)


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.clip(round_half_up(x), 0, 255).astype(np.uint8)


def hflip(img: np.ndarray) -> np.ndarray:
    """Mirror columns: x -> width - 1 - x."""
    return np.flip(as_image(img), axis=1).copy()


def vflip(img: np.ndarray) -> np.ndarray:
    """Mirror rows: y -> height - 1 - y."""
    return np.flip(as_image(img), axis=0).copy()


def _check_fraction(fraction: float) -> Fraction:
    frac = Fraction(str(fraction))
    if not 0 < frac <= 1:
        raise DataError(f"crop fraction must be in (0, 1], got {fraction}")
    return frac


def crop_size(dim: int, fraction: float) -> int:
    """Output length for one axis: round-half-up(fraction * dim), at least 1."""
    frac = _check_fraction(fraction)
    return max(1, math.floor(frac * dim + Fraction(1, 2)))


def center_crop(img: np.ndarray, fraction: float) -> np.ndarray:
    """Crop to the centered window; offsets are floor((dim - out) / 2)."""
    img = as_image(img)
    h, w = img.shape[:2]
    out_h, out_w = crop_size(h, fraction), crop_size(w, fraction)
    top, left = (h - out_h) // 2, (w - out_w) // 2
    return img[top:top + out_h, left:left + out_w].copy()


def random_crop(img: np.ndarray, fraction: float, rng: SplitMix64) -> np.ndarray:
    """Crop to a uniformly placed window, row offset drawn before column."""
    img = as_image(img)
    h, w = img.shape[:2]
    out_h, out_w = crop_size(h, fraction), crop_size(w, fraction)
    top = rng.randbelow(h - out_h + 1)
    left = rng.randbelow(w - out_w + 1)
    return img[top:top + out_h, left:left + out_w].copy()


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps over radius ceil(3 * sigma), normalized to sum 1."""
    if sigma <= 0:
        raise DataError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _convolve_axis(data: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * data.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(data, pad, mode="edge")
    out = np.zeros(data.shape, dtype=np.float64)
    index = [slice(None)] * data.ndim
    # Taps accumulate left to right so the float64 sum order is fixed.
    for i, weight in enumerate(kernel):
        index[axis] = slice(i, i + data.shape[axis])
        out += weight * padded[tuple(index)]
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication.

    Horizontal pass first, then vertical, all in float64; the result is
    quantized once at the end.
    """
    img = as_image(img)
    kernel = gaussian_kernel(sigma)
    blurred = _convolve_axis(img.astype(np.float64), kernel, axis=1)
    blurred = _convolve_axis(blurred, kernel, axis=0)
    return _quantize(blurred)


def linear_contrast(img: np.ndarray, alpha: float) -> np.ndarray:
    """Scale sample values around mid-gray: v -> 127.5 + alpha * (v - 127.5)."""
    if alpha <= 0:
        raise DataError(f"alpha must be > 0, got {alpha}")
    img = as_image(img)
    levels = np.arange(256, dtype=np.float64)
    lut = _quantize(127.5 + alpha * (levels - 127.5))
    return lut[img]


def additive_gaussian_noise(img: np.ndarray, scale: float,
                            rng: SplitMix64) -> np.ndarray:
    """Add i.i.d. Gaussian(0, scale^2) noise per sample, then quantize.

    The generator is consumed even when scale is 0 so pipelines keep a
    stable draw sequence.
    """
    if scale < 0:
        raise DataError(f"noise scale must be >= 0, got {scale}")
    img = as_image(img)
    noise = rng.normals(img.size).reshape(img.shape) * scale
    return _quantize(img.astype(np.float64) + noise)


def median_filter(img: np.ndarray, k: int) -> np.ndarray:
    """Replace each sample by the median of its k x k neighborhood.

    Edges replicate; channels filter independently. k odd keeps the median
    an exact order statistic, so no rounding is involved.
    """
    if not isinstance(k, int) or k < 3 or k % 2 == 0:
        raise DataError(f"median window must be an odd integer >= 3, got {k}")
    img = as_image(img)
    radius = k // 2
    padded = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, (k, k), axis=(0, 1))
    return np.median(windows, axis=(-2, -1)).astype(np.uint8)


def contrast_enhance(img: np.ndarray, gamma: float) -> np.ndarray:
    """Gamma-map sample values: v -> 255 * (v / 255) ** gamma."""
    if gamma <= 0:
        raise DataError(f"gamma must be > 0, got {gamma}")
    img = as_image(img)
    levels = np.arange(256, dtype=np.float64)
    lut = _quantize(255.0 * (levels / 255.0) ** gamma)
    return lut[img]


@dataclass(frozen=True)
class AugmentStep:
    """One operator invocation: a name plus its single optional parameter."""

    name: str
    value: float | int | None = None

    def __post_init__(self):
        if self.name not in PARAM_KEYS:
            raise DataError(f"unknown operator {self.name!r}")
        key = PARAM_KEYS[self.name]
        if key is None:
            if self.value is not None:
                raise DataError(f"{self.name} takes no parameter")
            return
        value = self.value if self.value is not None else DEFAULT_PARAMS[self.name]
        if self.name == "median_filter":
            value = int(value)
            if value < 3 or value % 2 == 0:
                raise DataError(f"median window must be an odd integer >= 3, got {value}")
        else:
            value = float(value)
            if self.name in ("random_crop", "center_crop"):
                _check_fraction(value)
            elif self.name == "additive_gaussian_noise":
                if value < 0:
                    raise DataError(f"noise scale must be >= 0, got {value}")
            elif value <= 0:
                raise DataError(f"{key} must be > 0, got {value}")
        object.__setattr__(self, "value", value)

    @property
    def param_key(self) -> str | None:
        return PARAM_KEYS[self.name]


@dataclass(frozen=True)
class AugmentSpec:
    """An ordered operator pipeline plus the seed for stochastic draws."""

    steps: tuple[AugmentStep, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not 0 <= self.seed <= _MASK64:
            raise DataError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def apply_step(img: np.ndarray, step: AugmentStep, rng: SplitMix64) -> np.ndarray:
    if step.name == "hflip":
        return hflip(img)
    if step.name == "vflip":
        return vflip(img)
    if step.name == "center_crop":
        return center_crop(img, step.value)
    if step.name == "random_crop":
        return random_crop(img, step.value, rng)
    if step.name == "gaussian_blur":
        return gaussian_blur(img, step.value)
    if step.name == "linear_contrast":
        return linear_contrast(img, step.value)
    if step.name == "additive_gaussian_noise":
        return additive_gaussian_noise(img, step.value, rng)
    if step.name == "median_filter":
        return median_filter(img, step.value)
    if step.name == "contrast_enhance":
        return contrast_enhance(img, step.value)
    raise DataError(f"unknown operator {step.name!r}")


def pipeline_rng(spec: AugmentSpec, image_index: int = 0) -> SplitMix64:
    """Independent generator stream for one image of a batch."""
    return SplitMix64(derive_seed(spec.seed, image_index))


def apply_pipeline(img: np.ndarray, spec: AugmentSpec,
                   rng: SplitMix64 | None = None) -> np.ndarray:
    """Apply the spec's operators in order, sharing one generator stream."""
    source = as_image(img)
    if rng is None:
        rng = SplitMix64(spec.seed)
    out = source
    for step in spec.steps:
        out = apply_step(out, step, rng)
    # Every operator copies, so only the zero-step case can alias the input.
    return out.copy() if out is source else out


def _format_value(step: AugmentStep) -> str:
    if isinstance(step.value, int):
        return str(step.value)
    return repr(float(step.value))


def serialize_augment_spec(spec: AugmentSpec) -> str:
    """Render the key-value text form, e.g. ``op=gaussian_blur sigma=1.0``."""
    lines = [f"seed={spec.seed}"]
    for step in spec.steps:
        if step.param_key is None:
            lines.append(f"op={step.name}")
        else:
            lines.append(f"op={step.name} {step.param_key}={_format_value(step)}")
    return "\n".join(lines) + "\n"


def parse_augment_spec(text: str) -> AugmentSpec:
    """Parse the key-value text form written by :func:`serialize_augment_spec`.

    Lines are ``seed=N`` or ``op=<name> [<key>=<value>]``; blank lines and
    lines starting with ``#`` are skipped.
    """
    seed = 0
    seen_seed = False
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        pairs = []
        for token in tokens:
            if "=" not in token:
                raise DataError(f"line {lineno}: expected key=value, got {token!r}")
            key, _, value = token.partition("=")
            pairs.append((key, value))
        key0, value0 = pairs[0]
        if key0 == "seed":
            if seen_seed:
                raise DataError(f"line {lineno}: duplicate seed line")
            if len(pairs) > 1:
                raise DataError(f"line {lineno}: seed line takes no other fields")
            try:
                seed = int(value0)
            except ValueError:
                raise DataError(f"line {lineno}: seed must be an integer") from None
            seen_seed = True
            continue
        if key0 != "op":
            raise DataError(f"line {lineno}: expected op=<name> or seed=<int>")
        name = value0
        if name not in PARAM_KEYS:
            raise DataError(f"line {lineno}: unknown operator {name!r}")
        param_key = PARAM_KEYS[name]
        value = None
        if len(pairs) > 2:
            raise DataError(f"line {lineno}: {name} takes at most one parameter")
        if len(pairs) == 2:
            key, raw_value = pairs[1]
            if param_key is None or key != param_key:
                raise DataError(f"line {lineno}: {name} does not take {key!r}")
            try:
                value = int(raw_value) if name == "median_filter" else float(raw_value)
            except ValueError:
                raise DataError(f"line {lineno}: bad value {raw_value!r} for {key}") from None
        try:
            steps.append(AugmentStep(name, value))
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    return AugmentSpec(tuple(steps), seed)


def parse_augment_spec_file(path) -> AugmentSpec:
    return parse_augment_spec(Path(path).read_text(encoding="utf-8"))


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG into (H, W, C) uint8.

    Only 8-bit grayscale (L) and RGB files are accepted; anything else is
    rejected rather than silently converted.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            mode = pil.mode
            if mode not in ("L", "RGB"):
                raise DataError(
                    f"{path}: unsupported image mode {mode!r} (expected L or RGB)"
                )
            arr = np.asarray(pil, dtype=np.uint8)
    except DataError:
        raise
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except Exception as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from None
    return as_image(arr)


def encode_image(img: np.ndarray, format: str = "png") -> bytes:
    """Encode (H, W, C) uint8 to PNG or JPEG bytes."""
    img = as_image(img)
    fmt = format.lower().lstrip(".")
    if fmt == "jpg":
        fmt = "jpeg"
    if fmt not in ("png", "jpeg"):
        raise DataError(f"unsupported image format {format!r}")
    data = img[:, :, 0] if img.shape[2] == 1 else img
    buf = io.BytesIO()
    PILImage.fromarray(data).save(buf, format=fmt)
    return buf.getvalue()


def save_image(img: np.ndarray, path) -> None:
    """Encode (H, W, C) uint8 to PNG or JPEG chosen by file extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".jpg", ".jpeg"):
        raise DataError(f"{path}: unsupported image extension {suffix!r}")
    path.write_bytes(encode_image(img, suffix))
