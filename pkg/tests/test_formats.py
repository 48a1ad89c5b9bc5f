import struct
import zlib

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpdrecon import formats
from xpdrecon.errors import BadMagicError, FormatError, IntegrityError, TruncatedFileError, VersionError
from xpdrecon.physics import make_mask

from conftest import crandn


def _same_bits(a, b):
    assert a.dtype == b.dtype and a.shape == b.shape
    assert a.tobytes() == b.tobytes()


# ----------------------------------------------------------------- KSP1

@pytest.mark.parametrize("dtype", [np.complex64, np.complex128])
@pytest.mark.parametrize("contrast", sorted(formats.CONTRAST_TAGS))
def test_kspace_round_trip(rng, tmp_path, dtype, contrast):
    data = crandn(rng, 2, 3, 5, 4).astype(dtype)
    path = tmp_path / "k.ksp"
    formats.write_kspace(path, data, contrast)
    vol = formats.read_kspace(path)
    _same_bits(vol.data, data)
    assert vol.contrast == contrast


def test_kspace_header_layout():
    data = np.zeros((2, 3, 5, 7), dtype=np.complex64)
    raw = formats.encode_kspace(data, "FLAIR")
    assert raw[:4] == b"KSP1"
    assert struct.unpack("<IIIIBB", raw[4:22]) == (3, 5, 7, 2, 0, 2)
    assert len(raw) == 22 + data.size * 8


def test_kspace_samples_little_endian():
    data = np.array([[[[1.0 + 2.0j]]]], dtype=np.complex128)
    raw = formats.encode_kspace(data)
    assert raw[22:] == struct.pack("<dd", 1.0, 2.0)


@settings(max_examples=30, deadline=None)
@given(
    shape=st.tuples(*[st.integers(1, 3)] * 4),
    seed=st.integers(0, 2**32 - 1),
    wide=st.booleans(),
)
def test_kspace_round_trip_random(shape, seed, wide):
    rng = np.random.default_rng(seed)
    data = crandn(rng, *shape).astype(np.complex128 if wide else np.complex64)
    _same_bits(formats.decode_kspace(formats.encode_kspace(data)).data, data)


def test_kspace_rejects_bad_input():
    with pytest.raises(FormatError):
        formats.encode_kspace(np.zeros((2, 2, 2), dtype=np.complex64))
    with pytest.raises(FormatError):
        formats.encode_kspace(np.zeros((1, 1, 2, 2)))  # real samples
    with pytest.raises(FormatError):
        formats.encode_kspace(np.zeros((1, 1, 2, 2), dtype=np.complex64), "PD")


def test_image_round_trip(tmp_path):
    img = np.arange(12.0).reshape(3, 4)
    formats.write_image(tmp_path / "i.ksp", img)
    out = formats.read_image(tmp_path / "i.ksp")
    npt.assert_array_equal(out, img.astype(np.complex128))


def test_read_image_rejects_volume(tmp_path, rng):
    formats.write_kspace(tmp_path / "v.ksp", crandn(rng, 2, 1, 3, 3).astype(np.complex64))
    with pytest.raises(FormatError):
        formats.read_image(tmp_path / "v.ksp")


# ----------------------------------------------------------------- MSK1 / SMP1

@pytest.mark.parametrize("accel,acs", [(1, 0), (4, 8), (8, 4), (5, 2)])
def test_mask_round_trip(tmp_path, accel, acs):
    mask = make_mask(40, 24, accel, acs, offset=accel // 2)
    formats.write_mask(tmp_path / "m.msk", mask)
    back = formats.read_mask(tmp_path / "m.msk")
    assert (back.height, back.width, back.acs_count, back.acceleration) == (40, 24, acs, accel)
    npt.assert_array_equal(back.line_selected, mask.line_selected)


def test_mask_header_layout():
    mask = make_mask(8, 6, 2, 2)
    raw = formats.encode_mask(mask)
    assert raw[:4] == b"MSK1"
    assert struct.unpack("<IIII", raw[4:20]) == (8, 6, 2, 2)
    assert list(raw[20:]) == mask.line_selected.astype(int).tolist()


def test_mask_rejects_non_binary_flags():
    raw = bytearray(formats.encode_mask(make_mask(8, 8, 2, 2)))
    raw[20] = 2
    with pytest.raises(FormatError):
        formats.decode_mask(bytes(raw))


@pytest.mark.parametrize("dtype", [np.complex64, np.complex128])
def test_maps_round_trip(rng, tmp_path, dtype):
    maps = crandn(rng, 4, 6, 5).astype(dtype)
    formats.write_maps(tmp_path / "s.smp", maps)
    _same_bits(formats.read_maps(tmp_path / "s.smp"), maps)


def test_maps_rejects_wrong_rank():
    with pytest.raises(FormatError):
        formats.encode_maps(np.zeros((4, 4), dtype=np.complex64))


# ----------------------------------------------------------------- CKPT1

def _ckpt(rng, with_opt=True):
    params = {
        "a.weight": rng.standard_normal((2, 3, 3, 3)).astype(np.float32),
        "a.bias": rng.standard_normal(2).astype(np.float32),
        "alpha.k": np.array(0.5, dtype=np.float32),
        "b": rng.standard_normal((4,)),
    }
    opt = None
    if with_opt:
        opt = {
            "lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "t": 17,
            "m": {k: rng.standard_normal(np.shape(v)) for k, v in params.items()},
            "v": {k: rng.random(np.shape(v)) for k, v in params.items()},
        }
    return formats.Checkpoint("n_unrolled = 3\nbuffer_size = 5\n", params, opt)


@pytest.mark.parametrize("with_opt", [True, False])
def test_checkpoint_round_trip(rng, tmp_path, with_opt):
    ck = _ckpt(rng, with_opt)
    formats.write_checkpoint(tmp_path / "c.ckpt", ck)
    back = formats.read_checkpoint(tmp_path / "c.ckpt")
    assert back.config_text == ck.config_text
    assert list(back.params) == list(ck.params)
    for k in ck.params:
        _same_bits(back.params[k], np.asarray(ck.params[k]))
    if not with_opt:
        assert back.optimizer is None
        return
    for key in ("lr", "beta1", "beta2", "eps", "t"):
        assert back.optimizer[key] == ck.optimizer[key]
    for k in ck.params:
        _same_bits(back.optimizer["m"][k], ck.optimizer["m"][k])
        _same_bits(back.optimizer["v"][k], ck.optimizer["v"][k])


def test_checkpoint_crc_trailer(rng):
    raw = formats.encode_checkpoint(_ckpt(rng))
    assert raw[:4] == b"CKPT" and struct.unpack("<I", raw[4:8]) == (1,)
    assert struct.unpack("<I", raw[-4:])[0] == zlib.crc32(raw[:-4])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), pos=st.integers(8, 10_000))
def test_checkpoint_any_flip_is_detected(seed, pos):
    rng = np.random.default_rng(seed)
    raw = bytearray(formats.encode_checkpoint(_ckpt(rng)))
    pos = pos % (len(raw) - 8) + 8
    raw[pos] ^= 0x01
    # a flip in a length field may surface as a structural error instead
    with pytest.raises(FormatError):
        formats.decode_checkpoint(bytes(raw))


def test_checkpoint_payload_flip_is_integrity_error(rng):
    raw = bytearray(formats.encode_checkpoint(_ckpt(rng)))
    raw[-10] ^= 0xFF  # inside the last float64 array
    with pytest.raises(IntegrityError):
        formats.decode_checkpoint(bytes(raw))


def test_checkpoint_version_error(rng):
    raw = bytearray(formats.encode_checkpoint(_ckpt(rng)))
    raw[4:8] = struct.pack("<I", 2)
    with pytest.raises(VersionError):
        formats.decode_checkpoint(bytes(raw))


def test_checkpoint_rejects_integer_params():
    with pytest.raises(FormatError):
        formats.encode_checkpoint(formats.Checkpoint("", {"w": np.arange(3)}))


# ----------------------------------------------------------------- corruption

def _encoded_samples(rng):
    return {
        "ksp": (formats.encode_kspace(crandn(rng, 1, 2, 4, 4).astype(np.complex64)), formats.decode_kspace),
        "msk": (formats.encode_mask(make_mask(8, 8, 2, 2)), formats.decode_mask),
        "smp": (formats.encode_maps(crandn(rng, 2, 4, 4).astype(np.complex64)), formats.decode_maps),
        "ckpt": (formats.encode_checkpoint(_ckpt(rng)), formats.decode_checkpoint),
    }


@pytest.mark.parametrize("kind", ["ksp", "msk", "smp", "ckpt"])
def test_bad_magic(rng, kind):
    raw, decode = _encoded_samples(rng)[kind]
    with pytest.raises(BadMagicError):
        decode(b"JUNK" + raw[4:])


@pytest.mark.parametrize("kind", ["ksp", "msk", "smp"])
def test_unknown_version_digit(rng, kind):
    raw, decode = _encoded_samples(rng)[kind]
    with pytest.raises(VersionError):
        decode(raw[:3] + b"2" + raw[4:])


@pytest.mark.parametrize("kind", ["ksp", "msk", "smp", "ckpt"])
@pytest.mark.parametrize("keep", [0, 2, 6, -1])
def test_truncated(rng, kind, keep):
    raw, decode = _encoded_samples(rng)[kind]
    cut = raw[:keep] if keep >= 0 else raw[:-1]
    with pytest.raises(TruncatedFileError):
        decode(cut)


@pytest.mark.parametrize("kind", ["ksp", "msk", "smp", "ckpt"])
def test_trailing_bytes(rng, kind):
    raw, decode = _encoded_samples(rng)[kind]
    with pytest.raises(FormatError):
        decode(raw + b"\0")


def test_errors_map_to_data_exit_code():
    for cls in (BadMagicError, VersionError, TruncatedFileError, IntegrityError):
        assert issubclass(cls, FormatError) and cls.exit_code == 3


# ----------------------------------------------------------------- PGM

def test_pgm_header_and_big_endian():
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    raw = formats.encode_pgm16(img)
    head = b"P5\n2 2\n65535\n"
    assert raw.startswith(head)
    body = raw[len(head):]
    assert body[2:4] == b"\xff\xff"  # max sample, most significant byte first
    assert struct.unpack(">4H", body) == (0, 65535, 32768, 16384)


def test_pgm_round_trip(rng, tmp_path):
    vals = rng.integers(0, 65536, size=(7, 5)).astype(np.uint16)
    vals[0, 0] = 65535
    formats.write_pgm16(tmp_path / "x.pgm", vals.astype(float))
    npt.assert_array_equal(formats.read_pgm16(tmp_path / "x.pgm"), vals)


def test_pgm_uses_magnitude(rng):
    img = crandn(rng, 4, 4)
    npt.assert_array_equal(formats.decode_pgm16(formats.encode_pgm16(img)),
                           formats.decode_pgm16(formats.encode_pgm16(np.abs(img))))


def test_pgm_all_zero_image():
    npt.assert_array_equal(formats.decode_pgm16(formats.encode_pgm16(np.zeros((3, 3)))), 0)


def test_pgm_errors():
    with pytest.raises(FormatError):
        formats.encode_pgm16(np.zeros((2, 2, 2)))
    raw = formats.encode_pgm16(np.ones((3, 3)))
    with pytest.raises(BadMagicError):
        formats.decode_pgm16(b"P2" + raw[2:])
    with pytest.raises(TruncatedFileError):
        formats.decode_pgm16(raw[:-1])
    with pytest.raises(TruncatedFileError):
        formats.decode_pgm16(b"P5\n3")


def test_fastmri_stub():
    with pytest.raises(NotImplementedError):
        formats.fastmri_to_ksp1("in.h5", "out.ksp")
