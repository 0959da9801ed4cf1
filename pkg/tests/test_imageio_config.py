import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mambafusion.config import RunConfig, apply_overrides, load_config, parse_config, serialize_config
from mambafusion.imageio import (
    ImageIOError,
    from_unit,
    read_image,
    resize_bilinear,
    rgb_to_ycbcr,
    to_unit,
    write_image,
    ycbcr_to_rgb,
)

rng = np.random.default_rng(31)


# ---------------------------------------------------------------------------
# codecs
# ---------------------------------------------------------------------------


@settings(max_examples=15, derandomize=True, deadline=None)
@given(st.integers(min_value=1, max_value=17), st.integers(min_value=1, max_value=17), st.booleans())
def test_codec_roundtrip_random_images(tmp_path_factory, h, w, use_pgm):
    tmp = tmp_path_factory.mktemp("img")
    data = np.random.default_rng(h * 100 + w).integers(0, 256, (h, w), dtype=np.uint8)
    path = tmp / ("x.pgm" if use_pgm else "x.png")
    write_image(path, data)
    back = read_image(path)
    assert back.mode == "gray"
    assert np.array_equal(back.data, data)


def test_png_rgb_roundtrip(tmp_path):
    data = rng.integers(0, 256, (9, 7, 3), dtype=np.uint8)
    path = tmp_path / "c.png"
    write_image(path, data)
    back = read_image(path)
    assert back.mode == "rgb"
    assert np.array_equal(back.data, data)


def test_pgm_rejects_rgb(tmp_path):
    with pytest.raises(ValueError):
        write_image(tmp_path / "c.pgm", rng.integers(0, 256, (4, 4, 3), dtype=np.uint8))


def test_pgm_header_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    payload = bytes(range(6))
    path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + payload)
    img = read_image(path)
    assert img.data.shape == (2, 3)
    assert img.data.tobytes() == payload


def test_read_missing_file():
    with pytest.raises(ImageIOError):
        read_image("/nonexistent/image.png")


def test_unit_conversions_roundtrip():
    data = rng.integers(0, 256, (5, 5), dtype=np.uint8)
    assert np.array_equal(from_unit(to_unit(data)), data)


def test_resize_identity_and_constant():
    img = rng.uniform(0, 1, (8, 8))
    assert np.abs(resize_bilinear(img, (8, 8)) - img).max() <= 1e-12
    const = np.full((6, 10), 0.4)
    assert np.abs(resize_bilinear(const, (3, 5)) - 0.4).max() <= 1e-12


def test_ycbcr_roundtrip():
    rgb = rng.uniform(0, 1, (6, 6, 3))
    y, cb, cr = rgb_to_ycbcr(rgb)
    back = ycbcr_to_rgb(y, cb, cr)
    assert np.abs(back - rgb).max() <= 1e-6
    gray = np.ones((4, 4)) * 0.3
    y2, cb2, cr2 = rgb_to_ycbcr(np.stack([gray] * 3, axis=-1))
    assert np.abs(y2 - 0.3).max() <= 1e-12
    assert np.abs(cb2 - 0.5).max() <= 1e-10 and np.abs(cr2 - 0.5).max() <= 1e-10


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


def test_config_defaults_match_published_hyperparameters():
    cfg = RunConfig()
    assert cfg.train.lr == 1e-3
    assert cfg.train.weight_decay == 1e-2
    assert cfg.train.warmup_iters == 800
    assert cfg.train.warmup_start_lr == 1e-5
    assert cfg.train.epochs == 30
    assert cfg.train.batch == 20
    assert cfg.model.groups == 3
    assert cfg.model.blocks_per_group == 2
    assert cfg.model.channels == 32
    assert cfg.model.input_size == 128
    assert (cfg.loss.a1, cfg.loss.a2, cfg.loss.a3, cfg.loss.a4) == (0.5, 0.5, 1.0, 1.0)


def test_config_parse_values_and_comments():
    cfg = parse_config("channels = 16  # narrow\n\nlr = 5e-4\nuse_ir_heads = false\nmax_iters = none\n")
    assert cfg.model.channels == 16
    assert cfg.train.lr == 5e-4
    assert cfg.model.use_ir_heads is False
    assert cfg.train.max_iters is None


def test_config_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown key"):
        parse_config("chanels = 16\n")


def test_config_bad_line_rejected():
    with pytest.raises(ValueError, match="expected"):
        parse_config("just some words\n")


def test_config_serialize_parse_fixed_point():
    cfg = RunConfig()
    cfg.model.channels = 24
    cfg.train.lr = 2e-4
    text = serialize_config(cfg)
    again = serialize_config(parse_config(text))
    assert text == again


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "run.cfg"
    cfg = RunConfig()
    cfg.model.seed = 9
    path.write_text(serialize_config(cfg))
    loaded = load_config(path)
    assert loaded.model.seed == 9
    assert loaded.train.seed == 9  # mirrored shared key


def test_overrides_validate():
    cfg = RunConfig()
    apply_overrides(cfg, {"batch": "4"})
    assert cfg.train.batch == 4
    with pytest.raises(ValueError):
        apply_overrides(cfg, {"batch": "0"})
    with pytest.raises(ValueError):
        apply_overrides(cfg, {"fusion_mode": "bogus"})
