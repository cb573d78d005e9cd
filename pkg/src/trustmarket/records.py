"""Append-only record files.

Framing: every record is a 4-byte big-endian unsigned length followed by
that many bytes of UTF-8 JSON (keys sorted, no whitespace).  Byte-valued
fields are base64 encoded by the caller.  A file is a plain concatenation
of records with no header; a truncated trailing record is an error.
"""

from __future__ import annotations

import base64
import json
import struct
from pathlib import Path
from typing import Any, Iterator

_LEN = struct.Struct(">I")


def encode_record(obj: dict[str, Any]) -> bytes:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _LEN.pack(len(payload)) + payload


def iter_records(data: bytes) -> Iterator[dict[str, Any]]:
    pos = 0
    while pos < len(data):
        if pos + _LEN.size > len(data):
            raise ValueError(f"truncated record header at offset {pos}")
        (n,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        if pos + n > len(data):
            raise ValueError(f"truncated record body at offset {pos}")
        yield json.loads(data[pos : pos + n].decode("utf-8"))
        pos += n


def b64e(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64d(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


class RecordFile:
    """An append-only file of framed JSON records.

    With ``path=None`` records are kept only in memory, which is what unit
    tests and throwaway simulations use.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._buffer = bytearray()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                self._buffer += self.path.read_bytes()
            else:
                self.path.touch()

    def append(self, obj: dict[str, Any]) -> None:
        frame = encode_record(obj)
        self._buffer += frame
        if self.path is not None:
            with self.path.open("ab") as fh:
                fh.write(frame)

    def __iter__(self) -> Iterator[dict[str, Any]]:
        return iter_records(bytes(self._buffer))

    def __len__(self) -> int:
        return sum(1 for _ in self)

    def raw(self) -> bytes:
        return bytes(self._buffer)
