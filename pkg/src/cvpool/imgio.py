"""Image decoding/encoding, dataset manifests and load-time preprocessing.

Images are held planar, as a ``(3, H, W)`` float64 array normalised to [0, 1],
together with an ``(H, W)`` boolean mask of pixels usable for pooling.
PNM (P2/P3/P5/P6, 8 or 16 bit) is parsed here; PNG decoding goes through OpenCV.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import AllPixelsInvalidError, ImageFormatError, ManifestError

DEFAULT_SATURATION = 0.98

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True, eq=False)
class Image:
    channels: np.ndarray  # (3, H, W) float64 in [0, 1]
    valid_mask: np.ndarray  # (H, W) bool, True = usable for pooling
    bit_depth_origin: int = 8

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        mask = np.asarray(self.valid_mask, dtype=bool)
        if channels.ndim != 3 or channels.shape[0] != 3:
            raise ValueError(f"expected planar (3, H, W) channels, got {channels.shape}")
        if mask.shape != channels.shape[1:]:
            raise ValueError(f"mask shape {mask.shape} != raster shape {channels.shape[1:]}")
        if channels.shape[1] < 1 or channels.shape[2] < 1:
            raise ValueError("image must be at least 1x1")
        channels.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]

    @classmethod
    def from_hwc(cls, rgb, valid_mask=None, bit_depth_origin=8) -> "Image":
        """Build from an interleaved ``(H, W, 3)`` array; all pixels valid unless a mask is given."""
        rgb = np.asarray(rgb, dtype=np.float64)
        if valid_mask is None:
            valid_mask = np.ones(rgb.shape[:2], dtype=bool)
        return cls(np.moveaxis(rgb, -1, 0).copy(), valid_mask, bit_depth_origin)

    def to_hwc(self) -> np.ndarray:
        return np.moveaxis(self.channels, 0, -1).copy()


@dataclass(frozen=True)
class PreprocessSpec:
    black_level: float = 0.0
    saturation_threshold: float = DEFAULT_SATURATION
    mask_path: Path | None = None
    gamma_decode: float | None = None

    def __post_init__(self):
        if not self.black_level >= 0:
            raise ValueError(f"black_level must be >= 0, got {self.black_level}")
        if not 0 < self.saturation_threshold <= 1:
            raise ValueError(f"saturation threshold must lie in (0, 1], got {self.saturation_threshold}")
        if self.gamma_decode is not None and not self.gamma_decode > 0:
            raise ValueError(f"gamma_decode must be > 0, got {self.gamma_decode}")


@dataclass(frozen=True, eq=False)
class ManifestEntry:
    image_path: Path
    ground_truth: np.ndarray  # unit-norm RGB
    black_level: float = 0.0
    saturation_threshold: float = DEFAULT_SATURATION
    mask_path: Path | None = None

    def preprocess_spec(self) -> PreprocessSpec:
        return PreprocessSpec(self.black_level, self.saturation_threshold, self.mask_path)


# ---------------------------------------------------------------------------
# raw decoding
# ---------------------------------------------------------------------------


def _pnm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that ends the header.
    """
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ImageFormatError("truncated PNM header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def decode_pnm(data: bytes) -> tuple[np.ndarray, int]:
    """Decode PGM/PPM bytes into ``(H, W, C)`` integer samples and the maxval."""
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"unsupported PNM variant {magic!r}")
    tokens, pos = _pnm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ImageFormatError(f"bad PNM header: {exc}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"bad PNM geometry {width}x{height} maxval {maxval}")
    nchan = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * nchan
    if magic in (b"P2", b"P3"):
        body = _strip_comments(data[pos:])
        values = np.array(body.split()[:count], dtype=np.int64)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos + 1 : pos + 1 + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise ImageFormatError("truncated PNM raster")
        values = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if values.size < count:
        raise ImageFormatError("truncated PNM raster")
    if values.max(initial=0) > maxval:
        raise ImageFormatError("PNM sample exceeds maxval")
    return values.reshape(height, width, nchan), maxval


def _strip_comments(body: bytes) -> bytes:
    return b"\n".join(line.split(b"#")[0] for line in body.splitlines())


def read_raw(path) -> tuple[np.ndarray, int]:
    """Return ``(H, W, C)`` integer samples (C = 1 or 3, RGB order) and the maximum raw value."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from None
    if data.startswith(PNG_MAGIC):
        arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise ImageFormatError(f"cannot decode PNG {path}")
        maxval = 65535 if arr.dtype == np.uint16 else 255
        if arr.ndim == 2:
            arr = arr[..., None]
        elif arr.shape[2] == 4:
            arr = arr[..., 2::-1]  # BGRA -> RGB, alpha dropped
        else:
            arr = arr[..., ::-1]
        return np.ascontiguousarray(arr).astype(np.int64), maxval
    if data[:1] == b"P":
        return decode_pnm(data)
    raise ImageFormatError(f"unsupported image format: {path}")


def load_mask(path, shape) -> np.ndarray:
    """Exclusion mask: True where the mask image is nonzero in any channel."""
    raw, _ = read_raw(path)
    if raw.shape[:2] != tuple(shape):
        raise ImageFormatError(
            f"mask {path} is {raw.shape[1]}x{raw.shape[0]}, image is {shape[1]}x{shape[0]}"
        )
    return raw.any(axis=2)


def load_image(path, spec: PreprocessSpec | None = None) -> Image:
    """Decode and preprocess an image.

    Order: saturation flagging on raw values, black-level subtraction and
    normalisation by ``max_raw - black_level``, mask exclusion, then gamma decoding.
    Raises AllPixelsInvalidError (carrying the image) if nothing survives.
    """
    spec = spec or PreprocessSpec()
    raw, max_raw = read_raw(path)
    if raw.shape[2] == 1:
        raw = np.repeat(raw, 3, axis=2)
    if spec.black_level >= max_raw:
        raise ImageFormatError(f"black level {spec.black_level} >= max raw value {max_raw}")

    saturated = (raw >= spec.saturation_threshold * max_raw).any(axis=2)
    values = np.clip(raw - spec.black_level, 0, None) / (max_raw - spec.black_level)
    valid = ~saturated
    if spec.mask_path is not None:
        valid &= ~load_mask(spec.mask_path, raw.shape[:2])
    if spec.gamma_decode is not None:
        values = values**spec.gamma_decode

    img = Image.from_hwc(values, valid, bit_depth_origin=16 if max_raw > 255 else 8)
    if not valid.any():
        raise AllPixelsInvalidError(f"all pixels invalid in {path}", image=img)
    return img


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def quantize8(values) -> np.ndarray:
    """Clamp to [0, 1] and quantise by round-half-up of ``v * 255``."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_pnm(path, samples, maxval=255, comment=None):
    """Write binary PGM (2-D input) or PPM (``(H, W, 3)`` input)."""
    samples = np.asarray(samples)
    magic = b"P5" if samples.ndim == 2 else b"P6"
    height, width = samples.shape[:2]
    header = magic + b"\n"
    if comment:
        header += b"# " + comment.encode("ascii") + b"\n"
    header += f"{width} {height}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    Path(path).write_bytes(header + np.ascontiguousarray(samples, dtype=dtype).tobytes())


def _png_chunk(kind: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + kind
        + payload
        + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
    )


def write_png(path, samples, text=None):
    """Write an 8- or 16-bit RGB PNG, one unfiltered scanline at a time."""
    samples = np.asarray(samples)
    height, width = samples.shape[:2]
    depth = 16 if samples.dtype == np.uint16 else 8
    rows = np.ascontiguousarray(samples, dtype=">u2" if depth == 16 else "u1").reshape(height, -1)
    scanlines = b"".join(b"\x00" + row.tobytes() for row in rows)
    out = PNG_MAGIC + _png_chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, depth, 2, 0, 0, 0))
    for key, value in (text or {}).items():
        out += _png_chunk(b"tEXt", key.encode("latin-1") + b"\x00" + value.encode("latin-1"))
    out += _png_chunk(b"IDAT", zlib.compress(scanlines, 6)) + _png_chunk(b"IEND", b"")
    Path(path).write_bytes(out)


def save_image(img: Image, path, illum_applied=None):
    """Write an 8-bit PNG or PPM (chosen by suffix).

    ``illum_applied`` is provenance only: the illuminant the pixels were already
    corrected with, recorded as a PNG text chunk or a PPM comment.
    """
    path = Path(path)
    rgb8 = quantize8(img.to_hwc())
    note = None
    if illum_applied is not None:
        note = "illuminant " + " ".join(f"{float(c):.9g}" for c in illum_applied)
    try:
        if path.suffix.lower() == ".png":
            write_png(path, rgb8, text={"Comment": note} if note else None)
        else:
            write_pnm(path, rgb8, 255, comment=note)
    except OSError as exc:
        raise ImageFormatError(f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

_MANIFEST_KEYS = {"image", "illuminant", "black_level", "saturation", "mask"}


def _entry_from_record(rec, index: int, base: Path) -> ManifestEntry:
    where = f"manifest entry {index}"
    if not isinstance(rec, dict):
        raise ManifestError(f"{where}: expected an object, got {type(rec).__name__}")
    unknown = set(rec) - _MANIFEST_KEYS
    if unknown:
        raise ManifestError(f"{where}: unknown field(s) {sorted(unknown)}")
    for key in ("image", "illuminant"):
        if key not in rec:
            raise ManifestError(f"{where}: missing required field '{key}'")
    illum = rec["illuminant"]
    if (
        not isinstance(illum, list)
        or len(illum) != 3
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in illum)
    ):
        raise ManifestError(f"{where}: 'illuminant' must be a list of three numbers")
    gt = np.array(illum, dtype=np.float64)
    if not np.all(np.isfinite(gt)) or np.any(gt <= 0):
        raise ManifestError(f"{where}: illuminant components must be strictly positive, got {illum}")

    black_level = rec.get("black_level", 0.0)
    saturation = rec.get("saturation", DEFAULT_SATURATION)
    if not isinstance(black_level, (int, float)) or black_level < 0:
        raise ManifestError(f"{where}: 'black_level' must be a number >= 0")
    if not isinstance(saturation, (int, float)) or not 0 < saturation <= 1:
        raise ManifestError(f"{where}: 'saturation' must lie in (0, 1]")
    mask = rec.get("mask")
    if mask is not None and not isinstance(mask, str):
        raise ManifestError(f"{where}: 'mask' must be a path string")
    if not isinstance(rec["image"], str):
        raise ManifestError(f"{where}: 'image' must be a path string")

    return ManifestEntry(
        image_path=base / rec["image"],
        ground_truth=gt / np.linalg.norm(gt),
        black_level=float(black_level),
        saturation_threshold=float(saturation),
        mask_path=base / mask if mask is not None else None,
    )


def load_manifest(path) -> list[ManifestEntry]:
    """Parse a JSON manifest. Relative paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(records, list):
        raise ManifestError(f"{path}: manifest must be a JSON array")
    return [_entry_from_record(rec, i, path.parent) for i, rec in enumerate(records)]


def write_manifest(path, entries: list[ManifestEntry]):
    """Serialise entries back to JSON, with paths relative to the manifest when possible."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: Path) -> str:
        try:
            return str(Path(p).resolve().relative_to(base))
        except ValueError:
            return str(p)

    records = []
    for e in entries:
        rec = {"image": rel(e.image_path), "illuminant": [float(c) for c in e.ground_truth]}
        if e.black_level:
            rec["black_level"] = e.black_level
        if e.saturation_threshold != DEFAULT_SATURATION:
            rec["saturation"] = e.saturation_threshold
        if e.mask_path is not None:
            rec["mask"] = rel(e.mask_path)
        records.append(rec)
    path.write_text(json.dumps(records, indent=2) + "\n")


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = math.sqrt(float(np.dot(v, v)))
    if not norm > 0:
        raise ValueError("cannot normalise a zero vector")
    return v / norm
