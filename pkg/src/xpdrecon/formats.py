"""Binary containers: k-space volumes (KSP1), masks (MSK1), maps (SMP1),
checkpoints (CKPT1), plus 16-bit PGM export.

All multi-byte fields are little-endian except the PGM samples, which
follow the Netpbm convention (most significant byte first).
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import BadMagicError, FormatError, IntegrityError, TruncatedFileError, VersionError
from .physics import SamplingMask

KSP_MAGIC = b"KSP1"
MSK_MAGIC = b"MSK1"
SMP_MAGIC = b"SMP1"
CKPT_MAGIC = b"CKPT"
CKPT_VERSION = 1

CONTRAST_TAGS = {"T1": 0, "T2": 1, "FLAIR": 2, "T1POST": 3, "synthetic": 255}
CONTRAST_NAMES = {v: k for k, v in CONTRAST_TAGS.items()}

_COMPLEX_TAGS = {0: np.dtype("<c8"), 1: np.dtype("<c16")}
_REAL_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class _Reader:
    def __init__(self, buf, what):
        self.buf = memoryview(buf)
        self.pos = 0
        self.what = what

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"{self.what}: file ends after {len(self.buf)} bytes, needed {self.pos + n}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count):
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype, count=count).copy()

    def string(self):
        (n,) = self.unpack("<I")
        return bytes(self.take(n)).decode("utf-8")

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what}: {len(self.buf) - self.pos} unexpected trailing bytes")


def _check_magic(raw, magic, what):
    if len(raw) < 4:
        raise TruncatedFileError(f"{what}: file too short for its magic number")
    head = bytes(raw[:4])
    if head == magic:
        return
    if magic != CKPT_MAGIC and head[:3] == magic[:3]:
        raise VersionError(f"{what}: unsupported format version {head!r}")
    raise BadMagicError(f"{what}: bad magic {head!r}, expected {magic!r}")


def _complex_tag(arr):
    if arr.dtype == np.complex64:
        return 0
    if arr.dtype == np.complex128:
        return 1
    raise FormatError(f"unsupported sample type {arr.dtype}; use complex64 or complex128")


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


# ----------------------------------------------------------------- k-space

@dataclass
class KSpaceVolume:
    """``data`` has shape ``(slices, coils, H, W)``."""

    data: np.ndarray
    contrast: str = "synthetic"

    @property
    def shape(self):
        return self.data.shape


def encode_kspace(data, contrast="synthetic"):
    data = np.asarray(data)
    if data.ndim != 4:
        raise FormatError(f"k-space volume must be (slices, coils, H, W), got {data.shape}")
    if contrast not in CONTRAST_TAGS:
        raise FormatError(f"unknown contrast {contrast!r}")
    tag = _complex_tag(data)
    slices, coils, h, w = data.shape
    head = KSP_MAGIC + struct.pack("<IIIIBB", coils, h, w, slices, tag, CONTRAST_TAGS[contrast])
    return head + np.ascontiguousarray(data, dtype=_COMPLEX_TAGS[tag]).tobytes()


def decode_kspace(raw):
    _check_magic(raw, KSP_MAGIC, "KSP1")
    r = _Reader(raw, "KSP1")
    r.take(4)
    coils, h, w, slices, tag, ctag = r.unpack("<IIIIBB")
    if tag not in _COMPLEX_TAGS:
        raise FormatError(f"KSP1: unknown dtype tag {tag}")
    if ctag not in CONTRAST_NAMES:
        raise FormatError(f"KSP1: unknown contrast tag {ctag}")
    data = r.array(_COMPLEX_TAGS[tag], slices * coils * h * w).reshape(slices, coils, h, w)
    r.finish()
    return KSpaceVolume(data, CONTRAST_NAMES[ctag])


def write_kspace(path, data, contrast="synthetic"):
    with open(path, "wb") as fh:
        fh.write(encode_kspace(data, contrast))


def read_kspace(path):
    return decode_kspace(_read_bytes(path))


def write_image(path, img, contrast="synthetic"):
    """Single complex image stored as a one-slice, one-coil KSP1 container."""
    img = np.asarray(img)
    if not np.iscomplexobj(img):
        img = img.astype(np.complex128)
    write_kspace(path, img[None, None], contrast)


def read_image(path):
    vol = read_kspace(path)
    if vol.data.shape[:2] != (1, 1):
        raise FormatError(f"{path}: expected a single image, got {vol.data.shape[:2]} slices/coils")
    return vol.data[0, 0]


# ----------------------------------------------------------------- masks

def encode_mask(mask):
    head = MSK_MAGIC + struct.pack("<IIII", mask.height, mask.width, mask.acs_count, mask.acceleration)
    return head + mask.line_selected.astype(np.uint8).tobytes()


def decode_mask(raw):
    _check_magic(raw, MSK_MAGIC, "MSK1")
    r = _Reader(raw, "MSK1")
    r.take(4)
    h, w, acs, accel = r.unpack("<IIII")
    flags = r.array(np.dtype(np.uint8), h)
    r.finish()
    if np.any(flags > 1):
        raise FormatError("MSK1: line flags must be 0 or 1")
    return SamplingMask(h, w, flags.astype(bool), acs, accel)


def write_mask(path, mask):
    with open(path, "wb") as fh:
        fh.write(encode_mask(mask))


def read_mask(path):
    return decode_mask(_read_bytes(path))


# ----------------------------------------------------------------- maps

def encode_maps(maps):
    maps = np.asarray(maps)
    if maps.ndim != 3:
        raise FormatError(f"maps must be (coils, H, W), got {maps.shape}")
    tag = _complex_tag(maps)
    head = SMP_MAGIC + struct.pack("<IIIB", *maps.shape, tag)
    return head + np.ascontiguousarray(maps, dtype=_COMPLEX_TAGS[tag]).tobytes()


def decode_maps(raw):
    _check_magic(raw, SMP_MAGIC, "SMP1")
    r = _Reader(raw, "SMP1")
    r.take(4)
    coils, h, w, tag = r.unpack("<IIIB")
    if tag not in _COMPLEX_TAGS:
        raise FormatError(f"SMP1: unknown dtype tag {tag}")
    maps = r.array(_COMPLEX_TAGS[tag], coils * h * w).reshape(coils, h, w)
    r.finish()
    return maps


def write_maps(path, maps):
    with open(path, "wb") as fh:
        fh.write(encode_maps(maps))


def read_maps(path):
    return decode_maps(_read_bytes(path))


# ----------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    config_text: str
    params: dict
    optimizer: dict | None = None


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def _pack_array(arr):
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        tag = 0
    elif arr.dtype == np.float64:
        tag = 1
    else:
        raise FormatError(f"unsupported parameter dtype {arr.dtype}")
    dt = _REAL_TAGS[tag]
    return (
        struct.pack("<BI", tag, arr.ndim)
        + struct.pack(f"<{arr.ndim}I", *arr.shape)
        + np.ascontiguousarray(arr, dtype=dt).tobytes()
    )


def _unpack_array(r):
    tag, ndim = r.unpack("<BI")
    if tag not in _REAL_TAGS:
        raise FormatError(f"CKPT1: unknown array dtype tag {tag}")
    shape = r.unpack(f"<{ndim}I") if ndim else ()
    return r.array(_REAL_TAGS[tag], int(np.prod(shape, dtype=np.int64))).reshape(shape)


def encode_checkpoint(ckpt):
    parts = [CKPT_MAGIC, struct.pack("<I", CKPT_VERSION), _pack_str(ckpt.config_text)]
    parts.append(struct.pack("<I", len(ckpt.params)))
    for name, value in ckpt.params.items():
        parts.append(_pack_str(name))
        parts.append(_pack_array(value))
    opt = ckpt.optimizer
    if opt is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<ddddQ", opt["lr"], opt["beta1"], opt["beta2"], opt["eps"], opt["t"]))
        names = list(opt["m"])
        parts.append(struct.pack("<I", len(names)))
        for name in names:
            parts.append(_pack_str(name))
            parts.append(_pack_array(opt["m"][name]))
            parts.append(_pack_array(opt["v"][name]))
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def decode_checkpoint(raw):
    _check_magic(raw, CKPT_MAGIC, "CKPT1")
    r = _Reader(raw, "CKPT1")
    r.take(4)
    (version,) = r.unpack("<I")
    if version != CKPT_VERSION:
        raise VersionError(f"CKPT1: unsupported checkpoint version {version}")
    config_text = r.string()
    (n,) = r.unpack("<I")
    params = {}
    for _ in range(n):
        name = r.string()
        params[name] = _unpack_array(r)
    (has_opt,) = r.unpack("<B")
    optimizer = None
    if has_opt:
        lr, b1, b2, eps, t = r.unpack("<ddddQ")
        (count,) = r.unpack("<I")
        m, v = {}, {}
        for _ in range(count):
            name = r.string()
            m[name] = _unpack_array(r)
            v[name] = _unpack_array(r)
        optimizer = {"lr": lr, "beta1": b1, "beta2": b2, "eps": eps, "t": t, "m": m, "v": v}
    body_end = r.pos
    (crc,) = r.unpack("<I")
    r.finish()
    if zlib.crc32(bytes(raw[:body_end])) != crc:
        raise IntegrityError("CKPT1: CRC mismatch, checkpoint is corrupted")
    return Checkpoint(config_text, params, optimizer)


def write_checkpoint(path, ckpt):
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(ckpt))


def read_checkpoint(path):
    return decode_checkpoint(_read_bytes(path))


# ----------------------------------------------------------------- images

def encode_pgm16(img):
    """Magnitude scaled to ``[0, 65535]`` by its own max."""
    mag = np.abs(np.asarray(img))
    if mag.ndim != 2:
        raise FormatError("PGM export needs a 2D image")
    peak = mag.max()
    scaled = np.zeros_like(mag) if peak == 0 else mag / peak * 65535.0
    vals = np.clip(np.rint(scaled), 0, 65535).astype(">u2")
    h, w = mag.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + vals.tobytes()


def decode_pgm16(raw):
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFileError("PGM: header ends early")
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise BadMagicError(f"PGM: bad magic {fields[0]!r}")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 65535:
        raise FormatError("PGM: only 16-bit images are supported")
    pos += 1
    body = raw[pos:]
    if len(body) < 2 * w * h:
        raise TruncatedFileError("PGM: pixel data truncated")
    return np.frombuffer(body[:2 * w * h], dtype=">u2").reshape(h, w).astype(np.uint16)


def write_pgm16(path, img):
    with open(path, "wb") as fh:
        fh.write(encode_pgm16(img))


def read_pgm16(path):
    return decode_pgm16(_read_bytes(path))


def fastmri_to_ksp1(h5_path, out_path):
    """Placeholder for fastMRI HDF5 ingestion.

    The mapping would be: dataset ``kspace`` with shape (slices, coils, H, W)
    copies straight into a KSP1 volume (complex64); the ``acquisition``
    attribute (AXT1, AXT2, AXFLAIR, AXT1POST) selects the contrast tag; the
    readout oversampling stays in the data.  Not implemented because HDF5
    inputs are not part of this toolkit.
    """
    raise NotImplementedError("fastMRI HDF5 conversion is not provided; see the docstring for the field mapping")
