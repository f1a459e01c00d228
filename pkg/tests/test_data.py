import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grouptransnet.data import (CodecError, DataError, SamplePair, augment, decode_pnm, encode_pnm, flip,
                                gen_synthetic, load_dataset, load_sample, read_manifest, resize_input,
                                save_sample, synth_sample)


@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_round_trip(img):
    raw, maxval = decode_pnm(encode_pnm(img))
    assert maxval == 255 and np.array_equal(raw, img)


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3))))
def test_ppm_round_trip(img):
    assert np.array_equal(decode_pnm(encode_pnm(img))[0], img)


def test_header_comments_and_16_bit():
    raw, maxval = decode_pnm(b"P5 # c\n2 1\n# x\n65535\n\x01\x00\xff\xff")
    assert maxval == 65535 and raw.tolist() == [[256, 65535]]


@pytest.mark.parametrize("blob,offset", [
    (b"P3\n1 1\n255\n\x00", 0),
    (b"P5\n1 x\n255\n\x00", 5),
    (b"P5\n2 2\n255\n\x00\x00", 13),
    (b"P5\n1 1\n0\n\x00", 7),
    (b"P5\n0 1\n255\n", 3),
])
def test_malformed_rejected_with_offset(blob, offset):
    with pytest.raises(CodecError) as err:
        decode_pnm(blob)
    assert err.value.offset == offset and "byte offset" in str(err.value)


def test_scaling_rule(tmp_path):
    (tmp_path / "rgb.ppm").write_bytes(encode_pnm(np.full((2, 2, 3), 128, np.uint8)))
    (tmp_path / "d.pgm").write_bytes(encode_pnm(np.full((2, 2), 128, np.uint8)))
    (tmp_path / "g.pgm").write_bytes(encode_pnm(np.array([[127, 128], [0, 255]], np.uint8)))
    pair = load_sample((tmp_path / "rgb.ppm", tmp_path / "d.pgm", tmp_path / "g.pgm"))
    assert np.all(pair.depth == 128 / 255) and pair.rgb.shape == (3, 2, 2)
    assert pair.gt[0].tolist() == [[0.0, 1.0], [0.0, 1.0]]


def test_generator_deterministic_and_complete(tmp_path):
    a = gen_synthetic(tmp_path / "a", 3, 64, seed=11)
    b = gen_synthetic(tmp_path / "b", 3, 64, seed=11)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 10
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert a.name == "manifest.txt" and read_manifest(a.parent).names == ["syn_00000", "syn_00001", "syn_00002"]
    c = gen_synthetic(tmp_path / "c", 3, 64, seed=12)
    assert (c.parent / "gt/syn_00000.pgm").read_bytes() != (b.parent / "gt/syn_00000.pgm").read_bytes()


@pytest.mark.parametrize("seed", range(30))
def test_generator_constraints(seed):
    pair = synth_sample(np.random.default_rng(seed), 64)
    fg = pair.gt[0] > 0.5
    assert 0 < fg.mean() < 0.5
    assert pair.depth[0][fg].min() > pair.depth[0][~fg].max()
    assert set(np.unique(pair.gt)) <= {0.0, 1.0}
    assert pair.rgb.shape == (3, 64, 64)


def test_sample_on_disk_equals_generated(tmp_path):
    pair = synth_sample(np.random.default_rng(0), 32)
    save_sample(tmp_path, "x", pair)
    (tmp_path / "manifest.txt").write_text("x\n")
    _, [back] = load_dataset(tmp_path)
    for a, b in ((pair.rgb, back.rgb), (pair.depth, back.depth), (pair.gt, back.gt)):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("count,size", [(0, 64), (2, 48)])
def test_generator_preconditions(tmp_path, count, size):
    with pytest.raises(ValueError):
        gen_synthetic(tmp_path, count, size, 0)


def test_unwritable_root(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(DataError):
        gen_synthetic(blocker / "sub", 1, 32, 0)


def test_manifest_problems(tmp_path):
    with pytest.raises(DataError, match="manifest"):
        read_manifest(tmp_path)
    gen_synthetic(tmp_path, 2, 32, 0)
    (tmp_path / "depth/syn_00001.pgm").unlink()
    with pytest.raises(DataError, match="syn_00001"):
        read_manifest(tmp_path)
    (tmp_path / "manifest.txt").write_text("syn_00000\nsyn_00000\n")
    with pytest.raises(DataError, match="duplicate"):
        read_manifest(tmp_path)


def marker_pair(size=32):
    r = np.random.default_rng(0)
    rgb, depth, gt = r.random((3, size, size)), r.random((1, size, size)), np.zeros((1, size, size))
    # a unique marker in every channel at the same pixel
    for arr in (rgb, depth):
        arr[:, 20, 6] = 5.0
    gt[0, 18:23, 4:9] = 1.0
    return SamplePair(rgb, depth, gt)


def test_forced_flip_twice_is_identity():
    p = marker_pair()
    twice = augment(augment(p, 0, crop=1.0, force_flip=True, rotation=0), 1, crop=1.0, force_flip=True, rotation=0)
    assert all(np.array_equal(a, b) for a, b in ((p.rgb, twice.rgb), (p.depth, twice.depth), (p.gt, twice.gt)))
    assert np.array_equal(flip(flip(p)).rgb, p.rgb)


@pytest.mark.parametrize("seed", range(12))
def test_augment_binary_and_aligned(seed):
    p = marker_pair()
    out = augment(p, seed)
    assert set(np.unique(out.gt)) <= {0.0, 1.0}
    # the marker pixel sits at the centre of the gt square; its image must still land inside gt
    peak = np.unravel_index(np.argmax(out.depth[0]), out.depth[0].shape)
    assert np.argmax(out.rgb[1]) == np.ravel_multi_index(peak, out.depth[0].shape)
    assert out.gt[0][peak] == 1.0


def test_augment_deterministic():
    p = marker_pair()
    a, b = augment(p, [3, 1, 2]), augment(p, [3, 1, 2])
    assert np.array_equal(a.rgb, b.rgb) and np.array_equal(a.gt, b.gt)


def test_rotation_without_crop_or_flip_is_rot90():
    p = marker_pair()
    out = augment(p, 0, crop=1.0, force_flip=False, rotation=1)
    assert np.array_equal(out.rgb, np.rot90(p.rgb, 1, axes=(1, 2)))


def test_resize_input():
    p = marker_pair(64)
    same = resize_input(p, 64)
    assert np.array_equal(same.rgb, p.rgb) and np.array_equal(same.gt, p.gt)
    const = SamplePair(np.full((3, 64, 64), 0.3), np.full((1, 64, 64), 0.7), p.gt)
    big = resize_input(const, 96)
    np.testing.assert_allclose(big.rgb, 0.3, rtol=1e-14)
    np.testing.assert_allclose(big.depth, 0.7, rtol=1e-14)
    assert set(np.unique(resize_input(p, 32).gt)) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        resize_input(p, 50)
