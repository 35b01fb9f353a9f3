"""Reader for the MNIST IDX file format.

Image files::

    [offset] [type]          [value]
    0000     32 bit integer  0x00000803 (2051) magic number (big-endian)
    0004     32 bit integer  number of images
    0008     32 bit integer  number of rows
    0012     32 bit integer  number of columns
    0016     unsigned byte   pixels, row-major

Label files::

    0000     32 bit integer  0x00000801 (2049) magic number
    0004     32 bit integer  number of items
    0008     unsigned byte   labels

Files may be gzip-compressed.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .symbols import SourceKind, SymbolSource, TaskDataError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(TaskDataError):
    """Raised for malformed IDX files.

    Attributes:
        path: File being parsed.
        offset: Byte offset of the problem.
    """

    def __init__(self, path: Path | str, offset: int, message: str) -> None:
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: {message} at byte offset {offset}")


def _read_bytes(path: Path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as f:
        return f.read()


def _header(data: bytes, path: Path, fmt: str) -> tuple[int, ...]:
    size = struct.calcsize(fmt)
    if len(data) < size:
        raise IdxFormatError(
            path, len(data), f"truncated header, expected {size} bytes"
        )
    return struct.unpack(fmt, data[:size])


def read_idx_images(path: Path | str) -> np.ndarray:
    """Images scaled to [0, 1], shape (n, rows, cols).

    Raises:
        IdxFormatError: On a bad magic number or truncated pixel data.
    """
    path = Path(path)
    data = _read_bytes(path)
    magic, count, rows, cols = _header(data, path, ">IIII")
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(
            path, 0, f"bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"
        )
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise IdxFormatError(
            path, len(data), f"truncated pixel data, expected {expected} bytes"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols).astype(np.float64) / 255.0


def read_idx_labels(path: Path | str) -> np.ndarray:
    """Labels as int64, shape (n,).

    Raises:
        IdxFormatError: On a bad magic number or truncated label data.
    """
    path = Path(path)
    data = _read_bytes(path)
    magic, count = _header(data, path, ">II")
    if magic != LABELS_MAGIC:
        raise IdxFormatError(
            path, 0, f"bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"
        )
    if len(data) < 8 + count:
        raise IdxFormatError(
            path, len(data), f"truncated labels, expected {8 + count} bytes"
        )
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path: Path | str, labels_path: Path | str) -> SymbolSource:
    """Digit pools from an MNIST image/label file pair.

    Raises:
        IdxFormatError: If either file is malformed, the image size is not
            28x28, the counts differ, or a label is not a digit.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[1:] != (28, 28):
        raise IdxFormatError(
            images_path, 8, f"images are {images.shape[1]}x{images.shape[2]}, "
            "expected 28x28"
        )
    if len(images) != len(labels):
        raise IdxFormatError(
            labels_path,
            4,
            f"{len(labels)} labels for {len(images)} images",
        )
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxFormatError(
            labels_path, 8 + int(bad[0]), f"label {int(labels[bad[0]])} is not a digit"
        )
    flat = images.reshape(len(images), -1)
    pools = {digit: flat[labels == digit] for digit in range(10)}
    return SymbolSource(SourceKind.MNIST_IDX, "train", pools)


def write_idx(
    images_path: Path | str,
    labels_path: Path | str,
    images: np.ndarray,
    labels: np.ndarray,
) -> None:
    """Write images (n, rows, cols) in [0, 1] and labels as IDX files."""
    images = np.asarray(images)
    pixels = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    n, rows, cols = pixels.shape
    Path(images_path).write_bytes(
        struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + pixels.tobytes()
    )
    Path(labels_path).write_bytes(
        struct.pack(">II", LABELS_MAGIC, len(labels))
        + np.asarray(labels, dtype=np.uint8).tobytes()
    )
