import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pricetag.pnm import CodecError, decode_pnm, encode_pnm, read_image, write_image


def test_pgm_bytes_are_exact():
    img = np.array([[0, 255], [7, 8]], np.uint8)
    assert encode_pnm(img) == b"P5\n2 2\n255\n\x00\xff\x07\x08"


def test_binary_images_store_as_0_255():
    data = encode_pnm(np.array([[True, False]]))
    assert data.endswith(b"\xff\x00")


def test_header_comments_are_skipped():
    data = b"P5 # made by hand\n2 1\n# max\n255\n\x01\x02"
    assert decode_pnm(data).tolist() == [[1, 2]]


@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20), st.sampled_from([1, 3]))))
def test_round_trip(img):
    img = img[..., 0] if img.shape[2] == 1 else img
    assert np.array_equal(decode_pnm(encode_pnm(img)), img)


def test_rejects_bad_files():
    for bad in (b"P3\n1 1\n255\n0 0 0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00", b"P5\nx"):
        with pytest.raises(CodecError):
            decode_pnm(bad)


def test_files_and_png(tmp_path, rng):
    img = rng.integers(0, 256, (9, 11, 3), dtype=np.uint8)
    for name in ("a.ppm", "a.png"):
        write_image(tmp_path / name, img)
        assert np.array_equal(read_image(tmp_path / name), img)
    (tmp_path / "junk.bin").write_bytes(b"hello")
    with pytest.raises(CodecError):
        read_image(tmp_path / "junk.bin")
