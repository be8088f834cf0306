#!/usr/bin/env python3
"""
container.py

The FSVM model container: named, versioned sections of named arrays.

Layout (little-endian)::

    b"FSVM" u16 nsections
    per section: str name, str version, u16 narrays
        per array: str key, u8 dtype code, u8 ndim, u32 shape[ndim], payload

where str is a u16 byte length followed by UTF-8 bytes.

"""

from __future__ import annotations

import struct
from typing import BinaryIO, Optional

import numpy as np
from packaging.version import InvalidVersion, Version

from farfieldsv.exceptions import FormatError
from farfieldsv.suite import Suite

message = Suite.message

MAGIC = b"FSVM"

DTYPES = {
    0: np.dtype("<f8"),
    1: np.dtype("<f4"),
    2: np.dtype("<i8"),
    3: np.dtype("u1"),
    4: np.dtype("<c16"),
}


def _code(a: np.ndarray) -> int:
    if a.dtype.kind == "f":
        return 0 if a.dtype.itemsize == 8 else 1
    if a.dtype.kind in "ib":
        return 2
    if a.dtype.kind == "u":
        return 3 if a.dtype.itemsize == 1 else 2
    if a.dtype.kind == "c":
        return 4
    raise FormatError(f"Unsupported array dtype: {a.dtype}")


def _write_str(f: BinaryIO, s: str) -> None:
    b = s.encode("utf-8")
    f.write(struct.pack("<H", len(b)))
    f.write(b)


def _read_str(f: BinaryIO) -> str:
    (n,) = struct.unpack("<H", f.read(2))
    return f.read(n).decode("utf-8")


def text_array(s: str) -> np.ndarray:
    """
    Encode a string as a uint8 array.

    """
    return np.frombuffer(s.encode("utf-8"), dtype=np.uint8).copy()


def array_text(a: np.ndarray) -> str:
    return bytes(np.asarray(a, dtype=np.uint8)).decode("utf-8")


def write_container(
    filename: str,
    sections: dict[str, dict[str, np.ndarray]],
    versions: dict[str, str],
    verbose: bool = False,
) -> None:
    """
    Write sections to an FSVM file.

    Parameters:
        filename : str
        sections : dict
            Section name to a dictionary of named arrays.
        versions : dict
            Section name to version string.

    """
    with open(filename, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", len(sections)))
        for name, arrays in sections.items():
            _write_str(f, name)
            _write_str(f, str(Version(versions[name])))
            f.write(struct.pack("<H", len(arrays)))
            for key, value in arrays.items():
                a = np.asarray(value)
                code = _code(a)
                a = a.astype(DTYPES[code], copy=False)
                _write_str(f, key)
                f.write(struct.pack("<BB", code, a.ndim))
                f.write(struct.pack(f"<{a.ndim}I", *a.shape))
                f.write(np.ascontiguousarray(a).tobytes())

    if verbose:
        message(f"WRITTEN: {filename}")


def read_container(
    filename: str, supported: Optional[dict[str, str]] = None
) -> dict[str, dict[str, np.ndarray]]:
    """
    Read an FSVM file.

    Parameters:
        filename : str
        supported : dict
            Section name to the supported version. A section whose major
            version differs is rejected.

    Returns:
        Section name to a dictionary of named arrays.

    """
    supported = supported or dict()
    sections: dict[str, dict[str, np.ndarray]] = dict()

    with open(filename, "rb") as f:
        if f.read(4) != MAGIC:
            raise FormatError(f"{filename}: Format not recognized")

        (nsections,) = struct.unpack("<H", f.read(2))
        for _ in range(nsections):
            name = _read_str(f)
            try:
                version = Version(_read_str(f))
            except InvalidVersion as e:
                raise FormatError(f"{filename}: invalid version in section {name}") from e

            if name in supported and version.major != Version(supported[name]).major:
                raise FormatError(
                    f"{filename}: section {name} version {version} "
                    f"incompatible with {supported[name]}"
                )

            (narrays,) = struct.unpack("<H", f.read(2))
            arrays = dict()
            for _ in range(narrays):
                key = _read_str(f)
                code, ndim = struct.unpack("<BB", f.read(2))
                if code not in DTYPES:
                    raise FormatError(f"{filename}: unknown dtype code {code}")
                shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
                dtype = DTYPES[code]
                count = int(np.prod(shape)) if ndim else 1
                arrays[key] = np.frombuffer(
                    f.read(count * dtype.itemsize), dtype=dtype
                ).reshape(shape).copy()
            sections[name] = arrays

    missing = [name for name in supported if name not in sections]
    if missing:
        raise FormatError(f"{filename}: missing section(s) {missing}")

    return sections
