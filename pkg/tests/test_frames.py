import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorprint.frames import (
    FrameError,
    FrameSequence,
    load_frames,
    read_pgm,
    read_raw,
    sample_frames,
    sample_indices,
    write_pgm,
    write_pgm_sequence,
    write_raw,
)


def random_sequence(rng, count=5, h=7, w=9):
    return FrameSequence(rng.integers(0, 256, size=(count, h, w), dtype=np.uint8))


class TestSampling:
    def test_seven_to_four(self):
        assert list(sample_indices(7, 4)) == [0, 2, 4, 6]

    def test_ten_to_two(self):
        assert list(sample_indices(10, 2)) == [0, 9]

    def test_half_rounds_up(self):
        # 0, 1.5, 3 -> 0, 2, 3
        assert list(sample_indices(4, 3)) == [0, 2, 3]

    @given(st.integers(1, 300), st.integers(2, 80))
    def test_endpoints_and_monotone(self, count, target):
        idx = sample_indices(count, target)
        assert idx[0] == 0 and idx[-1] == count - 1
        assert np.all(np.diff(idx) >= 0)
        expected = [int(np.floor(j * (count - 1) / (target - 1) + 0.5)) for j in range(target)]
        assert list(idx) == expected

    def test_target_must_be_two(self):
        with pytest.raises(FrameError):
            sample_indices(5, 1)

    def test_identity_sampling(self, rng):
        seq = random_sequence(rng)
        assert sample_frames(seq, 5) is seq
        assert sample_frames(seq, 3).frame_count == 3


class TestSequence:
    def test_rejects_out_of_range(self):
        with pytest.raises(FrameError):
            FrameSequence(np.full((2, 3, 3), 300.0))

    def test_rejects_single_frame(self):
        with pytest.raises(FrameError):
            FrameSequence(np.zeros((1, 3, 3), dtype=np.uint8))

    def test_float_input_rounds(self):
        seq = FrameSequence(np.full((2, 2, 2), 3.6))
        assert seq.frames.dtype == np.uint8 and seq.frames[0, 0, 0] == 4

    def test_frames_read_only(self, rng):
        seq = random_sequence(rng)
        with pytest.raises(ValueError):
            seq.frames[0, 0, 0] = 1


class TestIO:
    def test_pgm_round_trip(self, tmp_path, rng):
        frame = rng.integers(0, 256, size=(6, 11), dtype=np.uint8)
        write_pgm(tmp_path / "a.pgm", frame)
        assert np.array_equal(read_pgm(tmp_path / "a.pgm"), frame)

    def test_pgm_header_comments(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
        assert read_pgm(tmp_path / "c.pgm").tolist() == [[1, 2]]

    def test_pgm_rejects_ascii_and_truncation(self, tmp_path):
        (tmp_path / "p2.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        (tmp_path / "short.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
        for name in ("p2.pgm", "short.pgm"):
            with pytest.raises(FrameError):
                read_pgm(tmp_path / name)

    def test_directory_round_trip(self, tmp_path, rng):
        seq = random_sequence(rng)
        write_pgm_sequence(tmp_path / "video", seq)
        assert load_frames(tmp_path / "video") == seq

    def test_raw_round_trip(self, tmp_path, rng):
        seq = random_sequence(rng)
        write_raw(tmp_path / "clip", seq)
        assert read_raw(tmp_path / "clip") == seq
        assert load_frames(tmp_path / "clip.raw") == seq

    def test_raw_size_mismatch(self, tmp_path, rng):
        write_raw(tmp_path / "clip", random_sequence(rng))
        (tmp_path / "clip.raw").write_bytes(b"\x00" * 3)
        with pytest.raises(FrameError):
            read_raw(tmp_path / "clip")

    def test_inconsistent_directory(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.zeros((2, 2), dtype=np.uint8))
        write_pgm(tmp_path / "b.pgm", np.zeros((3, 2), dtype=np.uint8))
        with pytest.raises(FrameError):
            load_frames(tmp_path)

    def test_missing_input(self, tmp_path):
        with pytest.raises(FrameError):
            load_frames(tmp_path / "nothing")
