"""In-memory raster types and the single-file raster container.

The container layout is one JSON header line (UTF-8, newline terminated)
followed by raw little-endian, row-major sample data:

    {"magic": "CVB1", "kind": "depth", "width": W, "height": H,
     "channels": C, "dtype": "f32"}\\n<W*H*C samples>

* depth:  1 channel f32, NaN marks invalid pixels
* normal: 3 channels f32, unit vectors, NaN triple marks invalid pixels
* covis:  1 channel u8 with the CovisLabel encoding below
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = "CVB1"

_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1")}
_KINDS = {"depth": (1, "f32"), "normal": (3, "f32"), "covis": (1, "u8")}


class CovisLabel(IntEnum):
    """Per-pixel co-visibility classification. Values are the file encoding."""

    INVALID = 0
    CO_VISIBLE = 1
    OCCLUDED = 2
    OUT_OF_VIEW = 3


@dataclass
class DepthMap:
    """Z-depth raster in meters; ``valid`` marks pixels with usable depth."""

    values: np.ndarray  # (H, W) float64, NaN where invalid
    valid: np.ndarray  # (H, W) bool

    @classmethod
    def from_array(cls, values: np.ndarray) -> "DepthMap":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError(f"depth array must be 2-D, got shape {v.shape}")
        valid = np.isfinite(v) & (v > 0.0)
        out = np.where(valid, v, np.nan)
        return cls(values=out, valid=valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class NormalMap:
    """Per-pixel unit surface normals in the camera frame."""

    values: np.ndarray  # (H, W, 3) float64, NaN rows where invalid
    valid: np.ndarray  # (H, W) bool

    @classmethod
    def from_array(cls, values: np.ndarray) -> "NormalMap":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise DataError(f"normal array must be (H, W, 3), got shape {v.shape}")
        valid = np.all(np.isfinite(v), axis=2)
        out = np.where(valid[..., None], v, np.nan)
        return cls(values=out, valid=valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class CovisibilityMap:
    """Per-pixel CovisLabel raster for one warp direction."""

    labels: np.ndarray  # (H, W) uint8

    @classmethod
    def from_array(cls, labels: np.ndarray) -> "CovisibilityMap":
        arr = np.asarray(labels)
        if arr.ndim != 2:
            raise DataError(f"label array must be 2-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > max(CovisLabel)):
            raise DataError("label array contains values outside the CovisLabel range")
        return cls(labels=arr.astype(np.uint8))

    def count(self, label: CovisLabel) -> int:
        return int(np.count_nonzero(self.labels == label))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def write_raster(path: str | Path, kind: str, data: np.ndarray) -> None:
    """Write one raster to ``path``. ``data`` layout must match ``kind``."""
    if kind not in _KINDS:
        raise DataError(f"unknown raster kind {kind!r}")
    channels, dtype_name = _KINDS[kind]
    arr = np.asarray(data)
    if channels == 1 and arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[2] != channels:
        raise DataError(f"{kind} raster needs {channels} channel(s), got shape {arr.shape}")
    height, width = arr.shape[:2]
    header = {
        "magic": MAGIC,
        "kind": kind,
        "width": int(width),
        "height": int(height),
        "channels": channels,
        "dtype": dtype_name,
    }
    payload = np.ascontiguousarray(arr.astype(_DTYPES[dtype_name], copy=False))
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def read_raster(path: str | Path, expect_kind: str | None = None) -> tuple[dict, np.ndarray]:
    """Read a raster file, returning (header, array of shape (H, W, C))."""
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        body = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: unreadable raster header: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise DataError(f"{path}: missing {MAGIC} magic")
    for key in ("kind", "width", "height", "channels", "dtype"):
        if key not in header:
            raise DataError(f"{path}: header lacks {key!r}")
    kind = header["kind"]
    if kind not in _KINDS:
        raise DataError(f"{path}: unknown kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise DataError(f"{path}: expected kind {expect_kind!r}, found {kind!r}")
    channels, dtype_name = _KINDS[kind]
    if header["channels"] != channels or header["dtype"] != dtype_name:
        raise DataError(f"{path}: header inconsistent with kind {kind!r}")
    width, height = int(header["width"]), int(header["height"])
    if width <= 0 or height <= 0:
        raise DataError(f"{path}: bad raster size {width}x{height}")
    dtype = _DTYPES[dtype_name]
    expected = width * height * channels * dtype.itemsize
    if len(body) != expected:
        raise DataError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    arr = np.frombuffer(body, dtype=dtype).reshape(height, width, channels)
    return header, arr


def write_depth(path: str | Path, depth: DepthMap) -> None:
    write_raster(path, "depth", depth.values)


def read_depth(path: str | Path) -> DepthMap:
    _, arr = read_raster(path, expect_kind="depth")
    return DepthMap.from_array(arr[..., 0].astype(np.float64))


def write_normals(path: str | Path, normals: NormalMap) -> None:
    write_raster(path, "normal", normals.values)


def read_normals(path: str | Path) -> NormalMap:
    _, arr = read_raster(path, expect_kind="normal")
    return NormalMap.from_array(arr.astype(np.float64))


def write_covis(path: str | Path, covis: CovisibilityMap) -> None:
    write_raster(path, "covis", covis.labels)


def read_covis(path: str | Path) -> CovisibilityMap:
    _, arr = read_raster(path, expect_kind="covis")
    return CovisibilityMap.from_array(arr[..., 0])
