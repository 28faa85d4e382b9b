"""Grayscale image I/O, degradation, resampling, and the patch pipeline.

Images are 2-D float64 arrays indexed [row, col] with nominal intensities in
[0, 255]; clamping and quantization happen only when writing PGM files.
Patches are vectorized in row-major pixel order, one column per patch.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PgmFormatError",
    "CoverageError",
    "FeatureSpec",
    "GRAD4_V1",
    "PatchGrid",
    "read_pgm",
    "write_pgm",
    "degrade",
    "bicubic_resize",
    "extract_patches",
    "assemble_patches",
    "lr_features",
]


class PgmFormatError(ValueError):
    """Input bytes are not the binary PGM we read (P5, maxval 255)."""


class CoverageError(ValueError):
    """A patch grid leaves output pixels uncovered during assembly."""


@dataclass(frozen=True)
class FeatureSpec:
    """Named filter bank applied to the mid-resolution image.

    ``filters`` holds (kernel, axis) pairs: axis 1 means the 1-D kernel runs
    along rows (horizontal), axis 0 along columns. Dictionaries record the id
    and reconstruction refuses a mismatch.
    """

    id: str
    filters: tuple

    @property
    def count(self) -> int:
        return len(self.filters)


# first- and second-order gradient filters, horizontal and vertical
GRAD4_V1 = FeatureSpec(
    id="grad4-v1",
    filters=(
        ((-1.0, 0.0, 1.0), 1),
        ((-1.0, 0.0, 1.0), 0),
        ((1.0, 0.0, -2.0, 0.0, 1.0), 1),
        ((1.0, 0.0, -2.0, 0.0, 1.0), 0),
    ),
)


@dataclass
class PatchGrid:
    """Vectorized patches plus the origins needed to put them back."""

    patch_size: int
    stride: int
    origins: list  # (row, col) per patch, row-major over origins
    patches: np.ndarray  # (patch_size**2, n_patches)


def _as_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    return img


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, maxval 255) into a float array."""
    data = Path(path).read_bytes()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":  # comment runs to end of line
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmFormatError(f"{path}: truncated header")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise PgmFormatError(f"{path}: unsupported magic {magic!r} (need binary P5)")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise PgmFormatError(f"{path}: malformed header") from exc
    if width < 1 or height < 1:
        raise PgmFormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmFormatError(f"{path}: maxval {maxval} unsupported (need 255)")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise PgmFormatError(f"{path}: pixel data short by {width * height - len(raster)} bytes")
    return np.frombuffer(raster, dtype=np.uint8).astype(np.float64).reshape(height, width)


def write_pgm(img, path) -> None:
    """Write a binary PGM; rounds half away from zero, clamps to [0, 255]."""
    img = _as_image(img)
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite pixels")
    # half-away-from-zero == floor(v + 0.5) once values land in [0, 255]
    quant = np.clip(np.floor(img + 0.5), 0.0, 255.0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + quant.tobytes())


def quantize(img) -> np.ndarray:
    """The exact pixel values write_pgm would store, as floats."""
    img = _as_image(img)
    return np.clip(np.floor(img + 0.5), 0.0, 255.0)


def degrade(hr, scale: int) -> np.ndarray:
    """Anti-aliased decimation: mean over each scale x scale block.

    Dimensions not divisible by the scale are cropped at the bottom/right
    first.
    """
    hr = _as_image(hr)
    if scale < 2:
        raise ValueError("scale must be >= 2")
    h = (hr.shape[0] // scale) * scale
    w = (hr.shape[1] // scale) * scale
    if h == 0 or w == 0:
        raise ValueError(f"image {hr.shape} too small for scale {scale}")
    blocks = hr[:h, :w].reshape(h // scale, scale, w // scale, scale)
    return blocks.mean(axis=(1, 3))


def _catmull_rom(u: np.ndarray) -> np.ndarray:
    # cubic convolution kernel with a = -0.5
    u = np.abs(u)
    near = (1.5 * u - 2.5) * u * u + 1.0
    far = ((-0.5 * u + 2.5) * u - 4.0) * u + 2.0
    return np.where(u <= 1.0, near, np.where(u < 2.0, far, 0.0))


def _resample_axis(length_in: int, length_out: int):
    i = np.arange(length_out)
    src = (i + 0.5) * (length_in / length_out) - 0.5
    base = np.floor(src).astype(np.int64)
    t = src - base
    taps = np.stack([base - 1, base, base + 1, base + 2])
    weights = np.stack([_catmull_rom(t + 1.0), _catmull_rom(t), _catmull_rom(1.0 - t), _catmull_rom(2.0 - t)])
    return np.clip(taps, 0, length_in - 1), weights


def bicubic_resize(img, out_w: int, out_h: int) -> np.ndarray:
    """Catmull-Rom bicubic resampling with edge-clamped, pixel-center taps."""
    img = _as_image(img)
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    taps, weights = _resample_axis(img.shape[1], out_w)
    tmp = sum(weights[j] * img[:, taps[j]] for j in range(4))
    taps, weights = _resample_axis(img.shape[0], out_h)
    return sum(weights[j][:, None] * tmp[taps[j], :] for j in range(4))


def _axis_origins(extent: int, patch: int, stride: int) -> list:
    origins = list(range(0, extent - patch + 1, stride))
    if origins[-1] != extent - patch:
        origins.append(extent - patch)  # flush with the edge so every pixel is covered
    return origins


def extract_patches(img, patch_size: int, stride: int) -> PatchGrid:
    """All patch_size x patch_size patches on a stride grid, plus flush-edge
    patches whenever the stride does not reach the last row/column."""
    img = _as_image(img)
    h, w = img.shape
    if patch_size > min(h, w):
        raise ValueError(f"patch size {patch_size} exceeds image dims {w}x{h}")
    if not 1 <= stride <= patch_size:
        raise ValueError(f"stride must lie in [1, patch_size], got {stride}")
    rows = _axis_origins(h, patch_size, stride)
    cols = _axis_origins(w, patch_size, stride)
    origins = [(r, c) for r in rows for c in cols]
    patches = np.empty((patch_size * patch_size, len(origins)))
    for i, (r, c) in enumerate(origins):
        patches[:, i] = img[r : r + patch_size, c : c + patch_size].ravel()
    return PatchGrid(patch_size, stride, origins, patches)


def assemble_patches(grid: PatchGrid, out_w: int, out_h: int) -> np.ndarray:
    """Recombine a patch grid by uniform averaging of overlapping values."""
    p = grid.patch_size
    acc = np.zeros((out_h, out_w))
    cnt = np.zeros((out_h, out_w))
    for i, (r, c) in enumerate(grid.origins):
        if r < 0 or c < 0 or r + p > out_h or c + p > out_w:
            raise ValueError(f"patch origin {(r, c)} falls outside {out_w}x{out_h}")
        acc[r : r + p, c : c + p] += grid.patches[:, i].reshape(p, p)
        cnt[r : r + p, c : c + p] += 1.0
    if (cnt == 0.0).any():
        n_missing = int((cnt == 0.0).sum())
        raise CoverageError(f"{n_missing} output pixels not covered by any patch")
    return acc / cnt


def _filter_1d(img: np.ndarray, kernel, axis: int) -> np.ndarray:
    """Correlate with a centered 1-D kernel along an axis, edges clamped."""
    kernel = np.asarray(kernel, dtype=np.float64)
    half = kernel.size // 2
    if axis == 0:
        padded = np.pad(img, ((half, half), (0, 0)), mode="edge")
        return sum(kernel[k] * padded[k : k + img.shape[0], :] for k in range(kernel.size))
    padded = np.pad(img, ((0, 0), (half, half)), mode="edge")
    return sum(kernel[k] * padded[:, k : k + img.shape[1]] for k in range(kernel.size))


def lr_features(mid, patch_size: int, stride: int, spec: FeatureSpec = GRAD4_V1) -> np.ndarray:
    """Gradient-feature columns for each patch of the mid-resolution image.

    Applies the spec's filter bank to the whole image, then stacks the
    co-located patch of every response: 4 * patch_size**2 rows per column.
    """
    mid = _as_image(mid)
    blocks = []
    for kernel, axis in spec.filters:
        response = _filter_1d(mid, kernel, axis)
        blocks.append(extract_patches(response, patch_size, stride).patches)
    return np.vstack(blocks)
