import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volseg.errors import FileFormatError
from volseg.volume import (
    LabelVolume,
    VoxelVolume,
    orientation_transform,
    read_volume,
    reorient,
    validate_orientation,
    write_volume,
)

from oracles import reorient_map


def _orientation_codes():
    import itertools

    codes = []
    for fams in itertools.permutations(["LR", "AP", "SI"]):
        for a in fams[0]:
            for b in fams[1]:
                for c in fams[2]:
                    codes.append(a + b + c)
    return codes


ORIENTATION_CODES = _orientation_codes()


def make_vol(rng, shape=(3, 4, 5), dtype=np.float32, orientation="LPI"):
    if dtype == np.float32:
        data = rng.standard_normal(shape).astype(np.float32)
    elif dtype == np.int16:
        data = rng.integers(-500, 500, size=shape, dtype=np.int16)
    else:
        data = rng.integers(0, 5, size=shape, dtype=np.uint8)
    return VoxelVolume(data=data, spacing=(1.0, 2.0, 3.0), origin=(0.5, 1.5, 2.5), orientation=orientation)


class TestOrientationCodes:
    def test_valid_codes(self):
        assert len(ORIENTATION_CODES) == 48
        for code in ORIENTATION_CODES:
            assert validate_orientation(code) == code

    @pytest.mark.parametrize("bad", ["LPX", "LLI", "LP", "", "LAP", "PPI", 7])
    def test_invalid_codes(self, bad):
        with pytest.raises(ValueError):
            validate_orientation(bad)

    def test_transform_composes_to_identity(self):
        for src in ("LPI", "RAS", "PIR", "SLA"):
            perm, flip = orientation_transform(src, src)
            assert perm == (0, 1, 2)
            assert flip == (False, False, False)


class TestVolumeTypes:
    def test_shape_and_spacing_invariants(self, rng):
        with pytest.raises(ValueError):
            VoxelVolume(data=np.zeros((2, 2), dtype=np.float32), spacing=(1, 1, 1))
        with pytest.raises(ValueError):
            VoxelVolume(data=np.zeros((2, 2, 2), dtype=np.float32), spacing=(1.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            VoxelVolume(data=np.zeros((2, 2, 2), dtype=np.float64), spacing=(1, 1, 1))

    def test_label_range_rejected(self):
        bad = np.full((2, 2, 2), 9, dtype=np.uint8)
        with pytest.raises(ValueError, match="labels"):
            LabelVolume(data=bad, spacing=(1, 1, 1))


class TestSvfIO:
    def test_trivial_size_arithmetic(self, tmp_path, rng):
        vol = make_vol(rng, shape=(2, 2, 2))
        path = tmp_path / "tiny.svf"
        write_volume(vol, path)
        assert (tmp_path / "tiny.raw").stat().st_size == 8 * 4
        back = read_volume(path)
        assert back.shape == (2, 2, 2)

    def test_size_mismatch_error(self, tmp_path, rng):
        vol = make_vol(rng, shape=(2, 2, 2))
        path = tmp_path / "short.svf"
        write_volume(vol, path)
        raw = tmp_path / "short.raw"
        raw.write_bytes(raw.read_bytes()[:-1])  # 31 bytes
        with pytest.raises(FileFormatError, match="size mismatch"):
            read_volume(path)

    def test_roundtrip_i16_bit_identical(self, tmp_path, rng):
        vol = make_vol(rng, shape=(5, 7, 3), dtype=np.int16)
        path = tmp_path / "v.svf"
        write_volume(vol, path)
        original_bytes = (tmp_path / "v.raw").read_bytes()
        back = read_volume(path)
        write_volume(back, tmp_path / "w.svf")
        assert (tmp_path / "w.raw").read_bytes() == original_bytes
        assert np.array_equal(back.data, vol.data)
        assert back.spacing == vol.spacing
        assert back.orientation == vol.orientation

    def test_label_roundtrip(self, tmp_path, rng):
        lbl = LabelVolume(
            data=rng.integers(0, 5, size=(4, 3, 2), dtype=np.uint8),
            spacing=(1.5, 1.5, 3.0),
        )
        write_volume(lbl, tmp_path / "m.svf")
        back = read_volume(tmp_path / "m.svf")
        assert isinstance(back, LabelVolume)
        assert np.array_equal(back.data, lbl.data)

    def test_f32_nonfinite_preserved(self, tmp_path):
        data = np.array(
            [[-0.0, np.nan], [np.inf, -np.inf], [1.0, -1.0], [325.0, -325.0]],
            dtype=np.float32,
        ).reshape(2, 2, 2)
        vol = VoxelVolume(data=data, spacing=(1, 1, 1))
        write_volume(vol, tmp_path / "nf.svf")
        back = read_volume(tmp_path / "nf.svf")
        assert back.data.tobytes() == data.tobytes()

    def test_big_volume_raw_size(self, tmp_path):
        # 160^3 f32 -> exactly 16,384,000 bytes
        vol = VoxelVolume(data=np.zeros((160, 160, 160), dtype=np.float32), spacing=(1, 1, 1))
        write_volume(vol, tmp_path / "big.svf")
        assert (tmp_path / "big.raw").stat().st_size == 16_384_000

    def test_header_errors(self, tmp_path):
        path = tmp_path / "h.svf"
        path.write_text("{ not json")
        with pytest.raises(FileFormatError, match="corrupt"):
            read_volume(path)
        path.write_text(json.dumps({"svf_version": 1, "shape": [2, 2, 2]}))
        with pytest.raises(FileFormatError, match="missing field"):
            read_volume(path)
        header = {
            "svf_version": 1,
            "shape": [2, 2, 2],
            "spacing": [1, 1, 1],
            "dtype": "f64",
            "data": "h.raw",
        }
        path.write_text(json.dumps(header))
        with pytest.raises(FileFormatError, match="unknown dtype"):
            read_volume(path)
        header["dtype"] = "f32"
        header["spacing"] = [1, -1, 1]
        path.write_text(json.dumps(header))
        with pytest.raises(FileFormatError, match="spacing"):
            read_volume(path)
        with pytest.raises(FileNotFoundError):
            read_volume(tmp_path / "absent.svf")

    def test_raw_layout_w_fastest(self, tmp_path):
        data = np.arange(24, dtype=np.int16).reshape(2, 3, 4)
        vol = VoxelVolume(data=data, spacing=(1, 1, 1))
        write_volume(vol, tmp_path / "lay.svf")
        raw = np.frombuffer((tmp_path / "lay.raw").read_bytes(), dtype="<i2")
        # voxel (d, h, w) at offset d*H*W + h*W + w
        assert raw[1 * 12 + 2 * 4 + 3] == data[1, 2, 3]


class TestReorient:
    def test_identity(self, rng):
        vol = make_vol(rng, orientation="RAS")
        assert reorient(vol, "RAS") is vol

    def test_ras_to_lpi_matches_index_map_oracle(self, rng):
        data = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
        vol = VoxelVolume(data=data, spacing=(1, 2, 3), orientation="RAS")
        out = reorient(vol, "LPI")
        expected = reorient_map(data, "RAS", "LPI")
        assert np.array_equal(out.data, expected)

    @pytest.mark.parametrize("src", ["LPI", "RAS", "AIL", "SPR", "IRP"])
    @pytest.mark.parametrize("dst", ["LPI", "RAS", "PSL"])
    def test_matches_index_map_oracle(self, rng, src, dst):
        data = rng.standard_normal((3, 4, 5)).astype(np.float32)
        vol = VoxelVolume(data=data, spacing=(1, 2, 3), orientation=src)
        out = reorient(vol, dst)
        assert np.array_equal(out.data, reorient_map(data, src, dst))
        assert out.orientation == dst

    def test_roundtrip_voxel_identical(self, rng):
        vol = make_vol(rng, shape=(4, 5, 6), orientation="RAS")
        back = reorient(reorient(vol, "LPI"), "RAS")
        assert np.array_equal(back.data, vol.data)
        assert back.spacing == vol.spacing
        assert back.origin == vol.origin

    def test_spacing_permutes_with_axes(self, rng):
        vol = make_vol(rng, shape=(2, 3, 4), orientation="LPI")
        out = reorient(vol, "PIL")  # target axis 0 takes source axis 1, etc.
        assert out.shape == (3, 4, 2)
        assert out.spacing == (2.0, 3.0, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        src=st.sampled_from(ORIENTATION_CODES),
        dst=st.sampled_from(ORIENTATION_CODES),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_multiset_preserved_and_involutive(self, src, dst, seed):
        r = np.random.default_rng(seed)
        shape = tuple(int(v) for v in r.integers(1, 5, size=3))
        data = r.standard_normal(shape).astype(np.float32)
        vol = VoxelVolume(data=data, spacing=(1.0, 2.0, 3.0), orientation=src)
        out = reorient(vol, dst)
        assert sorted(out.data.ravel().tolist()) == sorted(data.ravel().tolist())
        back = reorient(out, src)
        assert np.array_equal(back.data, data)
