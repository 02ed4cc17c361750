"""Versioned binary container for toy planner and value weights.

Layout (little endian): magic ``ARGW``, one format-version byte, feature dim
and action count as uint32, temperature as float64, then theta (row-major)
followed by phi, all float64.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import WeightsFormatError
from .policy.toy import ToyPlannerPolicy, ValueEstimator

MAGIC = b"ARGW"
VERSION = 1
_HEADER = struct.Struct("<4sBIId")


def dumps(policy: ToyPlannerPolicy, value: ValueEstimator) -> bytes:
    dim, actions = policy.theta.shape
    if value.phi.shape != (dim,):
        raise WeightsFormatError(f"value weights have shape {value.phi.shape}, expected ({dim},)")
    header = _HEADER.pack(MAGIC, VERSION, dim, actions, policy.temperature)
    return header + policy.theta.astype("<f8").tobytes() + value.phi.astype("<f8").tobytes()


def loads(blob: bytes) -> tuple[ToyPlannerPolicy, ValueEstimator]:
    if len(blob) < _HEADER.size:
        raise WeightsFormatError("file too short for a weights header")
    magic, version, dim, actions, temperature = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise WeightsFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WeightsFormatError(f"unsupported weights version {version}")
    expected = _HEADER.size + 8 * (dim * actions + dim)
    if len(blob) != expected:
        raise WeightsFormatError(f"expected {expected} bytes, got {len(blob)}")
    payload = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    theta = payload[: dim * actions].reshape(dim, actions).astype(float)
    phi = payload[dim * actions:].astype(float)
    return ToyPlannerPolicy(dim, temperature, theta), ValueEstimator(dim, phi)


def save_weights(path: Union[str, Path], policy: ToyPlannerPolicy, value: ValueEstimator) -> None:
    Path(path).write_bytes(dumps(policy, value))


def load_weights(path: Union[str, Path]) -> tuple[ToyPlannerPolicy, ValueEstimator]:
    return loads(Path(path).read_bytes())
