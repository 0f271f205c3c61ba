import struct

import numpy as np
import pytest

from sedkit.formats import (PfmImage, csv_text, fmt_float, pfm_read,
                            pfm_write, pgm_read, pgm_write)


class TestPfm:
    def test_round_trip_grayscale(self, tmp_path):
        data = np.arange(6, dtype=np.float32).reshape(2, 3)
        path = tmp_path / "map.pfm"
        pfm_write(path, data)
        out = pfm_read(path)
        assert out.channels == 1
        assert (out.width, out.height) == (3, 2)
        np.testing.assert_array_equal(out.samples, data)

    def test_round_trip_color(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(4, 5, 3)).astype(np.float32)
        path = tmp_path / "rgb.pfm"
        pfm_write(path, PfmImage(samples=data, scale=2.5))
        out = pfm_read(path)
        assert out.channels == 3
        assert out.scale == 2.5
        np.testing.assert_array_equal(out.samples, data)

    def test_round_trip_preserves_bits(self, tmp_path):
        # denormals, negatives, exact binary fractions
        data = np.array([[1e-40, -0.0, 3.14159], [1.5, -2.75, 1e30]], dtype=np.float32)
        path = tmp_path / "bits.pfm"
        pfm_write(path, data)
        out = pfm_read(path).samples
        assert out.tobytes() == data.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n3 2\n255\n" + b"\x00" * 18)
        with pytest.raises(ValueError, match="not a PFM"):
            pfm_read(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pfm"
        path.write_bytes(b"Pf\n3 2\n-1.0\n" + b"\x00" * 10)
        with pytest.raises(ValueError, match="truncated"):
            pfm_read(path)

    def test_little_endian_golden_bytes(self, tmp_path):
        # hand-assembled file: negative scale means little-endian floats,
        # rows stored bottom-up
        values_bottom_row = [1.0, 2.0]
        values_top_row = [3.0, 4.0]
        payload = b"".join(struct.pack("<f", v)
                           for v in values_bottom_row + values_top_row)
        path = tmp_path / "golden.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + payload)
        out = pfm_read(path)
        np.testing.assert_array_equal(out.samples,
                                      np.array([[3.0, 4.0], [1.0, 2.0]], dtype=np.float32))

    def test_big_endian_golden_bytes(self, tmp_path):
        payload = b"".join(struct.pack(">f", v) for v in [5.0, 6.0])
        path = tmp_path / "be.pfm"
        path.write_bytes(b"Pf\n2 1\n1.0\n" + payload)
        out = pfm_read(path)
        np.testing.assert_array_equal(out.samples, np.array([[5.0, 6.0]], dtype=np.float32))

    def test_header_junk(self, tmp_path):
        path = tmp_path / "junk.pfm"
        path.write_bytes(b"Pf\nxx 2\n-1.0\n" + b"\x00" * 8)
        with pytest.raises(ValueError, match="malformed"):
            pfm_read(path)

    def test_bad_shape_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError, match="samples"):
            pfm_write(tmp_path / "x.pfm", np.zeros((2, 2, 2)))


class TestPgm:
    def test_round_trip_uint8(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        path = tmp_path / "img.pgm"
        pgm_write(path, img)
        np.testing.assert_array_equal(pgm_read(path), img)

    def test_float_scaling(self, tmp_path):
        img = np.array([[0.0, 0.5, 1.0]])
        path = tmp_path / "f.pgm"
        pgm_write(path, img)
        np.testing.assert_array_equal(pgm_read(path), [[0, 128, 255]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(ValueError, match="not a binary PGM"):
            pgm_read(path)


class TestCsv:
    def test_header_and_crlf(self):
        text = csv_text(["a", "b"], [[1, 2.5]])
        assert text == "a,b\r\n1,2.5\r\n"

    def test_float_formatting_round_trips(self):
        x = 0.1 + 0.2
        assert float(fmt_float(x)) == x
        assert fmt_float(1.0) == "1.0"
