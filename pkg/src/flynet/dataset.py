"""Image ingestion, preprocessing and seeded synthetic traverses."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .rng import Rng, derive_seed

FRAME_HEIGHT = 32
FRAME_WIDTH = 64
FRAME_SIZE = FRAME_HEIGHT * FRAME_WIDTH

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".pgm", ".ppm", ".pnm", ".bmp", ".tif", ".tiff"}


class ImageFormatError(ValueError):
    """An image file could not be decoded."""


class DatasetError(ValueError):
    """A traverse source is empty or inconsistent."""


class Appearance(str, enum.Enum):
    NONE = "none"
    MILD = "mild"
    EXTREME = "extreme"


@dataclass
class Traverse:
    """Ordered frames (one row per frame) with their place labels."""

    frames: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64).reshape(-1, FRAME_SIZE)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.frames) != len(self.labels):
            raise DatasetError(f"{len(self.frames)} frames but {len(self.labels)} labels")

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class SynthConfig:
    num_places: int = 200
    seed: int = 0
    appearance: Appearance = Appearance.NONE
    viewpoint_jitter_px: int = 0
    noise_sigma: float = 0.0
    occluder_count: int = 0
    # lattice spacing of the coarse noise octave; the fine octave uses half of it
    lattice_px: int = 4

    def __post_init__(self):
        object.__setattr__(self, "appearance", Appearance(self.appearance))
        if self.num_places < 1:
            raise ValueError("num_places must be >= 1")
        if self.viewpoint_jitter_px < 0 or self.occluder_count < 0:
            raise ValueError("jitter and occluder_count must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.lattice_px < 2:
            raise ValueError("lattice_px must be >= 2")


def check_frame(frame: np.ndarray) -> None:
    frame = np.asarray(frame)
    if frame.shape != (FRAME_SIZE,):
        raise ValueError(f"frame must have {FRAME_SIZE} values, got shape {frame.shape}")
    if not np.all((frame >= 0.0) & (frame <= 1.0)):
        raise ValueError("frame values must lie in [0, 1]")


def to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] in (3, 4):
        r, g, b = LUMA_WEIGHTS
        return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]
    if img.ndim == 3 and img.shape[2] == 1:
        return img[..., 0]
    raise ValueError(f"unsupported image shape {img.shape}")


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centre alignment, source coordinate clamped to the valid range
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    y0, y1, wy = _axis_weights(img.shape[0], height)
    x0, x1, wx = _axis_weights(img.shape[1], width)
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy)[:, None] + bot * wy[:, None]


def preprocess_image(image) -> np.ndarray:
    """Grayscale (ITU-R 601 luma), bilinear resize to 32x64, scale to [0, 1].

    ``image`` is a PIL image or an array of 0..255 intensities, (H, W) or
    (H, W, C).  Returns the flattened row-major frame.
    """
    if isinstance(image, Image.Image):
        if image.mode not in ("L", "RGB", "RGBA"):
            image = image.convert("RGB")
        image = np.asarray(image)
    arr = np.asarray(image)
    if arr.ndim < 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must have at least one pixel per dimension, got {arr.shape}")
    gray = to_gray(arr)
    small = resize_bilinear(gray, FRAME_HEIGHT, FRAME_WIDTH)
    return np.clip(small / 255.0, 0.0, 1.0).ravel()


def load_image(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return preprocess_image(im)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"cannot decode image {path}: {exc}") from exc


def list_images(path) -> list[Path]:
    path = Path(path)
    if not path.is_dir():
        raise DatasetError(f"{path} is not a directory")
    return sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def ingest_directory(path, name: str | None = None) -> Traverse:
    """Load every image in ``path`` in lexicographic filename order."""
    files = list_images(path)
    if not files:
        raise DatasetError(f"no images found in {path}")
    frames = np.stack([load_image(f) for f in files])
    return Traverse(frames, np.arange(len(files)), name or Path(path).name)


# --- synthetic traverses -------------------------------------------------

def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def value_noise(rng: Rng, height: int, width: int, spacing: int) -> np.ndarray:
    gh = height // spacing + 2
    gw = width // spacing + 2
    lattice = rng.uniform_array((gh, gw))
    ys = np.arange(height) / spacing
    xs = np.arange(width) / spacing
    iy, ix = ys.astype(np.int64), xs.astype(np.int64)
    ty, tx = _smoothstep(ys - iy)[:, None], _smoothstep(xs - ix)[None, :]
    a = lattice[iy][:, ix]
    b = lattice[iy][:, ix + 1]
    c = lattice[iy + 1][:, ix]
    d = lattice[iy + 1][:, ix + 1]
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty


def panorama(cfg: SynthConfig) -> np.ndarray:
    """Two-octave value-noise strip, 32 rows by num_places + 64 (+ jitter margin) columns."""
    width = cfg.num_places + FRAME_WIDTH + 2 * cfg.viewpoint_jitter_px
    rng = Rng(derive_seed(cfg.seed, 1))
    coarse = value_noise(rng, FRAME_HEIGHT, width, cfg.lattice_px)
    fine = value_noise(rng, FRAME_HEIGHT, width, max(1, cfg.lattice_px // 2))
    strip = (coarse + 0.5 * fine) / 1.5
    lo, hi = strip.min(), strip.max()
    return (strip - lo) / (hi - lo) if hi > lo else np.zeros_like(strip)


def apply_appearance(frames: np.ndarray, appearance, noise_sigma: float,
                     occluder_count: int, rng: Rng) -> np.ndarray:
    """Photometric change of a stack of frames; returns a new array in [0, 1].

    mild: gamma 1.3 plus gaussian noise.  extreme: gamma 3.0 with brightness
    crushed to 35%, noise, and ``occluder_count`` dark rectangles per frame.
    """
    appearance = Appearance(appearance)
    out = np.array(frames, dtype=np.float64).reshape(-1, FRAME_HEIGHT, FRAME_WIDTH)
    if appearance is Appearance.NONE:
        return out.reshape(len(out), FRAME_SIZE)
    if appearance is Appearance.MILD:
        out = out ** 1.3
    else:
        out = 0.35 * out ** 3.0
    if noise_sigma > 0:
        out = out + noise_sigma * rng.normal_array(out.shape)
    if appearance is Appearance.EXTREME:
        for frame in out:
            for _ in range(occluder_count):
                h = rng.randint(4, 16)
                w = rng.randint(4, 24)
                y = rng.randbelow(FRAME_HEIGHT - h + 1)
                x = rng.randbelow(FRAME_WIDTH - w + 1)
                frame[y:y + h, x:x + w] = 0.02 * rng.uniform()
    return np.clip(out, 0.0, 1.0).reshape(len(out), FRAME_SIZE)


def generate_synthetic(cfg: SynthConfig) -> tuple[Traverse, Traverse]:
    """Seeded reference/query pair; query frame i depicts reference place i."""
    strip = panorama(cfg)
    j = cfg.viewpoint_jitter_px
    places = np.arange(cfg.num_places)
    ref = np.stack([strip[:, j + i:j + i + FRAME_WIDTH].ravel() for i in places])

    rng = Rng(derive_seed(cfg.seed, 2))
    starts = [j + i + (rng.randint(-j, j) if j else 0) for i in places]
    query = np.stack([strip[:, s:s + FRAME_WIDTH].ravel() for s in starts])
    query = apply_appearance(query, cfg.appearance, cfg.noise_sigma, cfg.occluder_count, rng)
    return (Traverse(ref, places.copy(), "synthetic-reference"),
            Traverse(query, places.copy(), f"synthetic-query-{cfg.appearance.value}"))


def frame_to_image(frame: np.ndarray) -> Image.Image:
    pixels = np.rint(np.asarray(frame).reshape(FRAME_HEIGHT, FRAME_WIDTH) * 255.0)
    return Image.fromarray(pixels.astype(np.uint8), mode="L")


def export_traverse(traverse: Traverse, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(traverse) - 1)))
    for i, frame in enumerate(traverse.frames):
        frame_to_image(frame).save(directory / f"{i:0{width}d}.pgm")


def export_pair(reference: Traverse, query: Traverse, directory,
                ground_truth=None, header: str | None = None) -> None:
    """Write ``reference/`` and ``query/`` PGM directories plus ground_truth.csv."""
    directory = Path(directory)
    export_traverse(reference, directory / "reference")
    export_traverse(query, directory / "query")
    gt = query.labels if ground_truth is None else ground_truth
    with open(directory / "ground_truth.csv", "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query_index", "reference_index"])
        for q, r in enumerate(gt):
            writer.writerow([q, int(r)])


def read_ground_truth(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        for row in csv.DictReader(lines):
            rows.append((int(row["query_index"]), int(row["reference_index"])))
    rows.sort()
    if [q for q, _ in rows] != list(range(len(rows))):
        raise DatasetError(f"{path}: query indices must be 0..N-1")
    return np.array([r for _, r in rows], dtype=np.int64)
