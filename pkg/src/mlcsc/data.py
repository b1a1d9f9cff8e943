"""Corpus loading and preprocessing: PGM files, resizing, contrast normalization.

The canonical pipeline is load -> bilinear resize -> local contrast
normalization, applied per image. A corpus is any directory tree of PGM
files (one subdirectory per subject in the face-database layout, but a
flat directory works too) or an explicit manifest of paths.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as _sig

from .errors import DataError, PgmParseError


def load_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM file as a float64 plane in [0, 1].

    Supports maxval up to 65535 (two-byte samples are big-endian, per the
    format). Malformed input raises :class:`PgmParseError` carrying the
    byte offset of the problem.
    """
    data = Path(path).read_bytes()
    pos = 0

    def skip_separators(pos: int) -> int:
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        return pos

    def read_token(pos: int) -> tuple[bytes, int]:
        pos = skip_separators(pos)
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmParseError("unexpected end of header", start)
        return data[start:pos], pos

    magic, pos = read_token(pos)
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"unsupported magic {magic!r} (want P2 or P5)", 0)

    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = read_token(pos)
        if not token.isdigit():
            raise PgmParseError(f"non-numeric {name} field {token!r}", pos - len(token))
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmParseError(f"bad dimensions {width}x{height}", 0)
    if not 0 < maxval <= 65535:
        raise PgmParseError(f"maxval {maxval} out of range (1..65535)", 0)

    if magic == b"P5":
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise PgmParseError("missing whitespace before binary payload", pos)
        pos += 1
        bytes_per = 2 if maxval > 255 else 1
        needed = width * height * bytes_per
        payload = data[pos : pos + needed]
        if len(payload) < needed:
            raise PgmParseError(
                f"truncated payload: expected {needed} bytes, got {len(payload)}",
                pos + len(payload),
            )
        dtype = ">u2" if bytes_per == 2 else np.uint8
        pixels = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        tokens = []
        while len(tokens) < width * height:
            try:
                token, pos = read_token(pos)
            except PgmParseError:
                raise PgmParseError(
                    f"truncated payload: expected {width * height} samples, "
                    f"got {len(tokens)}",
                    pos,
                ) from None
            if not token.isdigit():
                raise PgmParseError(f"non-numeric sample {token!r}", pos - len(token))
            tokens.append(int(token))
        pixels = np.asarray(tokens, dtype=np.float64)

    if pixels.max(initial=0.0) > maxval:
        raise PgmParseError(f"sample exceeds maxval {maxval}", pos)
    return (pixels / maxval).reshape(height, width)


def write_pgm(path, plane: np.ndarray, maxval: int = 255) -> None:
    """Write a plane (values clipped to [0, 1]) as a binary P5 file."""
    if not 0 < maxval <= 65535:
        raise ValueError(f"maxval {maxval} out of range (1..65535)")
    plane = np.clip(np.asarray(plane, dtype=np.float64), 0.0, 1.0)
    quantized = np.rint(plane * maxval).astype(">u2" if maxval > 255 else np.uint8)
    height, width = plane.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + quantized.tobytes())


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling.

    Output pixel (i, j) samples the input at
    ``(i * (H - 1) / (out_h - 1), j * (W - 1) / (out_w - 1))``, so corners
    map to corners and every output value is a convex combination of
    input values (the output range stays inside the input range).
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = img.shape
    if (out_h, out_w) == (h, w):
        return img.copy()

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if n_out == 1:
            coords = np.zeros(1)
        else:
            coords = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.minimum(coords.astype(int), n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = coords - lo
        return lo, hi, frac

    r_lo, r_hi, r_frac = axis_coords(h, out_h)
    c_lo, c_hi, c_frac = axis_coords(w, out_w)
    rows = img[r_lo, :] * (1.0 - r_frac)[:, None] + img[r_hi, :] * r_frac[:, None]
    return rows[:, c_lo] * (1.0 - c_frac)[None, :] + rows[:, c_hi] * c_frac[None, :]


def gaussian_window(window: int, sigma: float | None = None) -> np.ndarray:
    """Square Gaussian weight window normalized to sum 1 (sigma = window / 4)."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    sigma = window / 4.0 if sigma is None else sigma
    half = window // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (x / sigma) ** 2)
    g2 = np.outer(g1, g1)
    return g2 / g2.sum()


def gaussian_local_mean(img: np.ndarray, window: int) -> np.ndarray:
    """Gaussian-weighted local mean with edge renormalization.

    Zero padding would bias means toward zero near borders, so the weight
    mass falling inside the image is renormalized to 1 at every pixel.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = gaussian_window(window)
    num = _sig.correlate2d(img, kernel, mode="same", boundary="fill")
    den = _sig.correlate2d(np.ones_like(img), kernel, mode="same", boundary="fill")
    return num / den


def local_contrast_normalize(
    img: np.ndarray, window: int = 9, epsilon: float = 1e-8
) -> np.ndarray:
    """Subtractive then divisive normalization over a Gaussian neighborhood.

    Subtract the Gaussian-weighted local mean, then divide by the local
    Gaussian-weighted standard deviation floored at its image-wide mean
    (and at ``epsilon``, so all-zero inputs stay finite). Constant images
    map to (numerically) zero.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    img = np.asarray(img, dtype=np.float64)
    centered = img - gaussian_local_mean(img, window)
    variance = gaussian_local_mean(centered * centered, window)
    sd = np.sqrt(np.maximum(variance, 0.0))
    floor = max(float(sd.mean()), epsilon)
    return centered / np.maximum(sd, floor)


def make_batches(n_images: int, batch_size: int, seed: int) -> list[list[int]]:
    """Deterministic shuffle of ``range(n_images)`` chunked into index batches.

    Every index appears exactly once; the last batch may be short.
    """
    if n_images < 1:
        raise ValueError("corpus is empty")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.random.default_rng(seed).permutation(n_images)
    return [
        [int(i) for i in perm[start : start + batch_size]]
        for start in range(0, n_images, batch_size)
    ]


@dataclass(frozen=True)
class Corpus:
    """Preprocessed images plus subject labels and source paths."""

    images: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    provenance: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.images)


def _natural_key(path: Path):
    parts = re.split(r"(\d+)", str(path))
    return [int(p) if p.isdigit() else p for p in parts]


def find_pgm_files(source, manifest=None) -> list[Path]:
    """PGM paths under a directory tree, or the paths listed in a manifest.

    Directory scans are sorted with numeric-aware ordering so ``s2/`` comes
    before ``s10/``. Manifests are text files with one path per line
    (relative paths resolve against the manifest's directory; ``#`` starts
    a comment); manifest order is preserved.
    """
    if manifest is not None:
        manifest = Path(manifest)
        if not manifest.is_file():
            raise DataError(f"manifest not found: {manifest}")
        base = manifest.parent
        paths = []
        for line in manifest.read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            p = Path(line)
            paths.append(p if p.is_absolute() else base / p)
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise DataError(f"manifest lists missing files: {missing[:5]}")
        if not paths:
            raise DataError(f"manifest {manifest} lists no files")
        return paths
    root = Path(source)
    if not root.is_dir():
        raise DataError(f"data directory not found: {root}")
    paths = sorted(
        (p for p in root.rglob("*") if p.suffix.lower() == ".pgm" and p.is_file()),
        key=_natural_key,
    )
    if not paths:
        raise DataError(f"no PGM files under {root}")
    return paths


def load_corpus(
    source,
    manifest=None,
    image_size: tuple[int, int] = (64, 64),
    lcn_window: int = 9,
    lcn_epsilon: float = 1e-8,
) -> Corpus:
    """Load, resize, and contrast-normalize every PGM under ``source``.

    The label of an image is its parent directory name (the subject
    subdirectory in the face-database layout).
    """
    paths = find_pgm_files(source, manifest=manifest)
    images, labels, provenance = [], [], []
    for path in paths:
        try:
            plane = load_pgm(path)
        except (OSError, PgmParseError) as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        plane = resize_bilinear(plane, image_size[0], image_size[1])
        plane = local_contrast_normalize(plane, window=lcn_window, epsilon=lcn_epsilon)
        images.append(plane)
        labels.append(path.parent.name)
        provenance.append(str(path))
    return Corpus(images=tuple(images), labels=tuple(labels), provenance=tuple(provenance))


def preprocess_image(
    path,
    image_size: tuple[int, int] = (64, 64),
    lcn_window: int = 9,
    lcn_epsilon: float = 1e-8,
) -> np.ndarray:
    """The per-image pipeline (load, resize, LCN) for a single file."""
    try:
        plane = load_pgm(path)
    except (OSError, PgmParseError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    plane = resize_bilinear(plane, image_size[0], image_size[1])
    return local_contrast_normalize(plane, window=lcn_window, epsilon=lcn_epsilon)


def default_data_dir() -> str | None:
    """Data directory from the MLCSC_DATA_DIR environment variable, if set."""
    value = os.environ.get("MLCSC_DATA_DIR", "").strip()
    return value or None
