"""The shared library of learnable functions and its binary file format.

File layout (little-endian)::

    header    "NTPT" | version u32 | function count u32
    function  record length u32 | record | CRC32 of record u32
    record    name str | created task str | train steps u64 | spec |
              array count u32 | per array: ndim u32, dims u32*, float64 data
    str       byte length u32 | UTF-8 bytes
    spec      input count u32 | slots | output slot | hidden count u32 | sizes u32*
    slot      kind u8 (0 integer, 1 tensor) | ndim u32 | dims u32*
"""

from __future__ import annotations

import copy
import logging
import struct
import zlib
from collections.abc import Iterator
from pathlib import Path

import numpy as np

from src.terpret import IntDomain

from .functions import (
    LibraryError,
    NeuralFunction,
    NeuralFunctionSpec,
    Slot,
)

logger = logging.getLogger(__name__)

MAGIC = b"NTPT"
FORMAT_VERSION = 1


class UntrainedNetworkError(LibraryError):
    """Raised when declaring a function while another is still untrained."""

    pass


class DuplicateFunctionError(LibraryError):
    """Raised when a function name is declared twice."""

    pass


class LibraryFormatError(LibraryError):
    """Raised for corrupt, truncated or incompatible library files.

    Attributes:
        offset: Byte offset at which the problem was detected.
    """

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class Library:
    """Named learnable functions shared by every task model.

    At most one function may be untrained (zero training steps) at any time:
    a new network can only be introduced once every earlier network has been
    trained, so each task adds at most one fresh network.
    """

    def __init__(self) -> None:
        self._functions: dict[str, NeuralFunction] = {}

    def declare(
        self,
        name: str,
        spec: NeuralFunctionSpec,
        rng: np.random.Generator | None = None,
        created_task: str = "",
    ) -> NeuralFunction:
        """Register a new function.

        Raises:
            DuplicateFunctionError: If ``name`` is already declared.
            UntrainedNetworkError: If another function has not been trained yet.
        """
        if name in self._functions:
            raise DuplicateFunctionError(f"Library already has a function {name!r}")
        untrained = [f.name for f in self._functions.values() if f.train_steps == 0]
        if untrained:
            raise UntrainedNetworkError(
                f"Cannot declare {name!r}: {untrained[0]!r} is still untrained, and "
                "no more than one new untrained network may be introduced at a time"
            )
        fn = NeuralFunction(name, spec, rng=rng, created_task=created_task)
        self._functions[name] = fn
        logger.info("declared %s for task %s", fn, created_task or "-")
        return fn

    def __getitem__(self, name: str) -> NeuralFunction:
        try:
            return self._functions[name]
        except KeyError as e:
            raise LibraryError(f"Library has no function {name!r}") from e

    def __contains__(self, name: object) -> bool:
        return name in self._functions

    def __iter__(self) -> Iterator[NeuralFunction]:
        return iter(self._functions.values())

    def __len__(self) -> int:
        return len(self._functions)

    @property
    def names(self) -> list[str]:
        """Function names in declaration order."""
        return list(self._functions)

    def get(self, name: str) -> NeuralFunction | None:
        """Function by name, or None."""
        return self._functions.get(name)

    def mark_trained(self, names: list[str] | set[str]) -> None:
        """Count one training step for each named function."""
        for name in names:
            self[name].train_steps += 1

    def clone(self) -> Library:
        """Independent deep copy (for read-only snapshots)."""
        return copy.deepcopy(self)

    # -------------------------------------------------------------------------
    # Persistence
    # -------------------------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize to the library file format."""
        out = bytearray(MAGIC)
        out += struct.pack("<II", FORMAT_VERSION, len(self._functions))
        for fn in self._functions.values():
            record = _encode_function(fn)
            out += struct.pack("<I", len(record))
            out += record
            out += struct.pack("<I", zlib.crc32(record))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> Library:
        """Parse the library file format.

        Raises:
            LibraryFormatError: On bad magic, unsupported version, truncation
                or checksum mismatch.
        """
        reader = _Reader(data)
        magic = reader.take(4)
        if magic != MAGIC:
            raise LibraryFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}", 0)
        version, count = reader.unpack("<II")
        if version != FORMAT_VERSION:
            raise LibraryFormatError(
                f"Unsupported library version {version} (this build reads "
                f"{FORMAT_VERSION})",
                4,
            )
        library = cls()
        for _ in range(count):
            (length,) = reader.unpack("<I")
            start = reader.offset
            record = reader.take(length)
            (checksum,) = reader.unpack("<I")
            if zlib.crc32(record) != checksum:
                raise LibraryFormatError("Checksum mismatch in function record", start)
            fn = _decode_function(_Reader(record, base=start))
            library._functions[fn.name] = fn
        if reader.offset != len(data):
            raise LibraryFormatError(
                "Trailing bytes after last function", reader.offset
            )
        return library

    def save(self, path: str | Path) -> None:
        """Write the library to ``path``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.debug("saved library with %d functions to %s", len(self), path)

    @classmethod
    def load(cls, path: str | Path) -> Library:
        """Read a library written by :meth:`save`.

        Raises:
            LibraryFormatError: If the file is not a valid library.
            OSError: If the file cannot be read.
        """
        return cls.from_bytes(Path(path).read_bytes())

    def describe(self) -> list[str]:
        """One line per function: name, architecture, task, step count."""
        lines = []
        for fn in self._functions.values():
            spec = fn.spec
            lines.append(
                f"{fn.name}: {spec.input_width} -> {_slot_text(spec.output)} "
                f"hidden={list(spec.hidden)} task={fn.created_task or '-'} "
                f"steps={fn.train_steps}"
            )
        return lines


def _slot_text(slot: Slot) -> str:
    if isinstance(slot, IntDomain):
        return f"int[{slot.size}]"
    return "x".join(str(d) for d in slot)


class _Reader:
    """Cursor over a byte buffer that reports offsets on truncation."""

    def __init__(self, data: bytes, base: int = 0) -> None:
        self.data = data
        self.offset = 0
        self.base = base

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise LibraryFormatError(
                f"Truncated file: needed {n} bytes, "
                f"{len(self.data) - self.offset} left",
                self.base + self.offset,
            )
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")

    def dims(self) -> tuple[int, ...]:
        (ndim,) = self.unpack("<I")
        return self.unpack(f"<{ndim}I") if ndim else ()


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_dims(dims: tuple[int, ...]) -> bytes:
    return struct.pack(f"<I{len(dims)}I", len(dims), *dims)


def _pack_slot(slot: Slot) -> bytes:
    if isinstance(slot, IntDomain):
        return struct.pack("<B", 0) + _pack_dims((slot.size,))
    return struct.pack("<B", 1) + _pack_dims(tuple(slot))


def _read_slot(reader: _Reader) -> Slot:
    (kind,) = reader.unpack("<B")
    dims = reader.dims()
    if kind == 0:
        return IntDomain(dims[0])
    if kind == 1:
        return tuple(dims)
    raise LibraryFormatError(f"Unknown slot kind {kind}", reader.base + reader.offset)


def _encode_function(fn: NeuralFunction) -> bytes:
    spec = fn.spec
    out = bytearray()
    out += _pack_str(fn.name)
    out += _pack_str(fn.created_task)
    out += struct.pack("<Q", fn.train_steps)
    out += struct.pack("<I", len(spec.inputs))
    for slot in spec.inputs:
        out += _pack_slot(slot)
    out += _pack_slot(spec.output)
    out += _pack_dims(spec.hidden)
    arrays = fn.arrays()
    out += struct.pack("<I", len(arrays))
    for array in arrays:
        out += _pack_dims(array.shape)
        out += np.ascontiguousarray(array, dtype="<f8").tobytes()
    return bytes(out)


def _decode_function(reader: _Reader) -> NeuralFunction:
    name = reader.string()
    created_task = reader.string()
    (steps,) = reader.unpack("<Q")
    (n_inputs,) = reader.unpack("<I")
    inputs = tuple(_read_slot(reader) for _ in range(n_inputs))
    output = _read_slot(reader)
    hidden = reader.dims()
    try:
        spec = NeuralFunctionSpec(inputs=inputs, output=output, hidden=tuple(hidden))
    except LibraryError as e:
        raise LibraryFormatError(f"Invalid spec for {name!r}: {e}", reader.base) from e
    fn = NeuralFunction(name, spec, created_task=created_task)
    fn.train_steps = steps
    (count,) = reader.unpack("<I")
    arrays = []
    for _ in range(count):
        shape = reader.dims()
        size = int(np.prod(shape)) if shape else 1
        raw = reader.take(8 * size)
        arrays.append(np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64))
    try:
        fn.load_arrays(arrays)
    except LibraryError as e:
        raise LibraryFormatError(f"Weights do not match spec of {name!r}: {e}") from e
    return fn
