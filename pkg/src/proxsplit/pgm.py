"""Grayscale image I/O: PGM (ASCII P2 and binary P5) and raw CSV grids.

PGM pixels are linearly scaled: byte value k maps to the real k / maxval on
read, and reals are clipped to [0, 1] and rounded to k = round(255 x) on
write.  CSV grids carry untouched real values, one image row per line.
"""

from __future__ import annotations

import numpy as np

__all__ = ["read_pgm", "write_pgm", "read_csv_image", "write_csv_image",
           "read_image", "write_image_outputs"]

_MAXVAL = 255


def _tokens(data):
    """Yield whitespace-separated header tokens, skipping comment lines."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(path):
    """Read a P2/P5 PGM file into a float image with values in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    end = 0
    for token, pos in _tokens(data):
        fields.append(token)
        end = pos
        if len(fields) == 4:
            break
    if len(fields) < 4:
        raise ValueError(f"{path}: truncated PGM header")
    magic = fields[0]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    width, height, maxval = (int(t) for t in fields[1:4])
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= _MAXVAL:
        raise ValueError(f"{path}: unsupported maxval {maxval} (8-bit only)")
    count = width * height
    if magic == b"P5":
        raster = data[end + 1:end + 1 + count]  # single whitespace byte then raster
        if len(raster) < count:
            raise ValueError(f"{path}: truncated raster")
        values = np.frombuffer(raster, dtype=np.uint8, count=count).astype(float)
    else:
        values = np.array([int(t) for t, _ in _tokens(data[end:])], dtype=float)
        if values.size < count:
            raise ValueError(f"{path}: truncated raster")
        values = values[:count]
    if np.any(values > maxval):
        raise ValueError(f"{path}: sample exceeds maxval")
    return (values / maxval).reshape(height, width)


def write_pgm(path, image, fmt="P5"):
    """Write a float image (clipped to [0, 1]) as an 8-bit PGM file."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    samples = np.rint(np.clip(img, 0.0, 1.0) * _MAXVAL).astype(np.uint8)
    h, w = img.shape
    if fmt == "P5":
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n{_MAXVAL}\n".encode("ascii"))
            f.write(samples.tobytes())
    elif fmt == "P2":
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write(f"P2\n{w} {h}\n{_MAXVAL}\n")
            for row in samples:
                f.write(" ".join(str(int(s)) for s in row) + "\n")
    else:
        raise ValueError(f"unknown PGM format {fmt!r}")


def read_csv_image(path):
    """Read a real-valued image from a CSV grid (one row per line)."""
    img = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(img)):
        raise ValueError(f"{path}: image has non-finite entries")
    return img


def write_csv_image(path, image):
    """Write a real-valued image as a CSV grid with round-trippable floats."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for row in img:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_image(path):
    """Dispatch on suffix: .pgm via PGM, anything else as a CSV grid."""
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_csv_image(path)


def write_image_outputs(stem, image):
    """Write both PGM and CSV renditions; returns the two paths."""
    pgm_path = f"{stem}.pgm"
    csv_path = f"{stem}.csv"
    write_pgm(pgm_path, image)
    write_csv_image(csv_path, image)
    return pgm_path, csv_path
