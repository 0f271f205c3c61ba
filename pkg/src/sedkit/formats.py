"""File formats: PFM float maps, binary PGM images, CSV tables.

PFM layout: a ``Pf`` (grayscale) or ``PF`` (3-channel) magic line, an
ASCII ``width height`` line, a scale line whose sign encodes endianness
(negative = little-endian), then float32 rows stored bottom-up. Arrays
here are top-down, so rows are flipped on the way in and out; sample
payloads round-trip bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass
class PfmImage:
    samples: np.ndarray  # float32, (H, W) or (H, W, 3), top-down rows
    scale: float = 1.0   # magnitude only; sign is the file's endianness

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 2 else self.samples.shape[2]


def _read_token(f) -> bytes:
    """Whitespace-delimited token, skipping leading whitespace."""
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            break
        if ch.isspace():
            if tok:
                break
            continue
        tok += ch
    if not tok:
        raise ValueError("truncated PFM header")
    return tok


def pfm_read(path) -> PfmImage:
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise ValueError("not a PFM file")
        try:
            width = int(_read_token(f))
            height = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as e:
            raise ValueError(f"malformed PFM header: {e}") from e
        if width <= 0 or height <= 0 or width * height > 10 ** 9:
            raise ValueError(f"bad PFM dimensions {width}x{height}")
        if scale == 0:
            raise ValueError("PFM scale must be nonzero")
        count = width * height * channels
        dtype = "<f4" if scale < 0 else ">f4"
        payload = f.read(4 * count)
        if len(payload) != 4 * count:
            raise ValueError("truncated PFM payload")
        if f.read(1):
            raise ValueError("trailing bytes after PFM payload")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return PfmImage(samples=np.flipud(data.reshape(shape)).copy(), scale=abs(scale))


def pfm_write(path, img) -> None:
    """Write little-endian PFM; accepts a PfmImage or a bare array."""
    if isinstance(img, PfmImage):
        samples, scale = img.samples, img.scale
    else:
        samples, scale = np.asarray(img), 1.0
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim == 2:
        magic = b"Pf"
    elif samples.ndim == 3 and samples.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM needs (H, W) or (H, W, 3) samples, got {samples.shape}")
    h, w = samples.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(f"{-abs(scale)}\n".encode("ascii"))
        f.write(np.ascontiguousarray(np.flipud(samples), dtype="<f4").tobytes())


def pgm_write(path, img) -> None:
    """Binary PGM (P5, maxval 255). Floats are taken as [0, 1] intensities."""
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2-D image")
    if a.dtype != np.uint8:
        a = np.clip(np.round(np.asarray(a, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(a.tobytes())


def pgm_read(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic != b"P5":
            raise ValueError("not a binary PGM file")
        width = int(_read_token(f))
        height = int(_read_token(f))
        maxval = int(_read_token(f))
        if maxval != 255:
            raise ValueError("only maxval 255 PGM is supported")
        payload = f.read(width * height)
        if len(payload) != width * height:
            raise ValueError("truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form; identical floats give identical text."""
    return repr(float(x))


def write_csv(path_or_file, header, rows) -> None:
    """RFC-4180-style CSV with a header row; floats via fmt_float."""

    def emit(f):
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])

    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", encoding="ascii", newline="") as f:
            emit(f)
    else:
        emit(path_or_file)


def csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    write_csv(buf, header, rows)
    return buf.getvalue()
