"""Versioned, checksummed engine checkpoints.

A checkpoint file holds a magic line, a one-line JSON header carrying the
format version and a SHA-256 of the payload, then the pickled engine
(which owns the agent, queues, twins and every random stream). Restoring
one and training on is bit-identical to never having stopped.
"""

from __future__ import annotations

import hashlib
import json
import os
import pickle
from pathlib import Path

from . import __version__

MAGIC = b"VECDT-CHECKPOINT\n"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, engine) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = pickle.dumps(engine, protocol=4)
    header = {
        "format": FORMAT_VERSION,
        "package": __version__,
        "sha256": hashlib.sha256(payload).hexdigest(),
        "bytes": len(payload),
        "epochs": len(engine.epoch_rows),
        "slot": engine.slot,
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    os.replace(tmp, path)
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _header(fh, path)


def _header(fh, path) -> dict:
    if fh.readline() != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    try:
        header = json.loads(fh.readline())
    except ValueError:
        raise CheckpointError(f"{path}: corrupted header") from None
    if header.get("format") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format {header.get('format')} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    return header


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header = _header(fh, path)
        payload = fh.read()
    if len(payload) != header["bytes"] or hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch (truncated or corrupted)")
    return pickle.loads(payload)
