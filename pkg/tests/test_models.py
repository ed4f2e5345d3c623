import numpy as np
import pytest
import torch

from textcolorize import models as md
from textcolorize import text as te
from textcolorize.errors import CheckpointError, ConfigError, ValidationError

SMALL_GEN = md.GeneratorConfig(
    image_size=32, base_filters=8, rrdb=md.RrdbConfig(growth_channels=4)
)
SMALL_DISC = md.DiscriminatorConfig(base_filters=8)


def params_equal(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return set(sa) == set(sb) and all(torch.equal(sa[k], sb[k]) for k in sa)


class TestConfigs:
    def test_default_generator_config_arithmetic(self):
        cfg = md.GeneratorConfig()
        assert cfg.bottleneck_size == 64
        assert cfg.text_fc_sizes == (256, 4096)
        assert cfg.fusion_shape == (1, 64, 64)
        assert cfg.decoder_filters == (64, 32)

    def test_fusion_matches_fc_width(self):
        for size in (16, 32, 64, 128, 256):
            cfg = md.GeneratorConfig(image_size=size, base_filters=8)
            h = cfg.fusion_shape[1]
            assert cfg.text_fc_sizes[1] == h * h == cfg.bottleneck_size**2

    def test_bad_image_size_rejected(self):
        with pytest.raises(ConfigError):
            md.GeneratorConfig(image_size=30)

    def test_beta_range(self):
        with pytest.raises(ConfigError):
            md.RrdbConfig(beta=1.5)
        md.RrdbConfig(beta=0.0)  # degenerate but legal

    def test_patch_map_size_default(self):
        cfg = md.DiscriminatorConfig()
        assert cfg.patch_map_size(256) == 62

    def test_patch_map_too_small_rejected(self):
        with pytest.raises(ConfigError):
            md.DiscriminatorConfig().patch_map_size(8)


class TestInit:
    def test_same_seed_bitwise_identical(self):
        a = md.build_generator(SMALL_GEN, seed=5)
        b = md.build_generator(SMALL_GEN, seed=5)
        assert params_equal(a, b)

    def test_different_seed_differs(self):
        a = md.build_generator(SMALL_GEN, seed=5)
        b = md.build_generator(SMALL_GEN, seed=6)
        assert not params_equal(a, b)

    def test_all_parameters_finite(self):
        gen = md.build_generator(SMALL_GEN, seed=1)
        disc = md.build_discriminator(SMALL_DISC, seed=1)
        for module in (gen, disc):
            for p in module.parameters():
                assert torch.isfinite(p).all()

    def test_discriminator_first_conv_shape(self):
        disc = md.build_discriminator(md.DiscriminatorConfig(), seed=0)
        first = disc.blocks[0]
        assert tuple(first.weight.shape) == (64, 3, 4, 4)


@pytest.fixture(scope="module")
def gen():
    return md.build_generator(SMALL_GEN, seed=2).eval()


@pytest.fixture(scope="module")
def disc():
    return md.build_discriminator(SMALL_DISC, seed=3).eval()


class TestGeneratorForward:
    def test_shape_contract(self, gen):
        l = torch.zeros(2, 1, 32, 32)
        s = torch.zeros(2, 256)
        out = gen(l, s)
        assert out.shape == (2, 2, 32, 32)

    def test_output_bounded(self, gen):
        torch.manual_seed(0)
        out = gen(torch.rand(2, 1, 32, 32) * 2 - 1, torch.randn(2, 256))
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_zero_embedding_zeroes_fused_bottleneck(self, gen):
        captured = {}
        handle = gen.rrdb.register_forward_hook(
            lambda mod, args, out: captured.setdefault("in", args[0].detach().clone())
        )
        try:
            out = gen(torch.rand(1, 1, 32, 32) * 2 - 1, torch.zeros(1, 256))
        finally:
            handle.remove()
        assert torch.all(captured["in"] == 0)
        assert torch.isfinite(out).all()
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_eval_deterministic(self, gen):
        torch.manual_seed(3)
        l = torch.rand(1, 1, 32, 32) * 2 - 1
        s = torch.randn(1, 256)
        assert torch.equal(gen(l, s), gen(l, s))

    def test_text_sensitivity(self, gen):
        l = torch.full((1, 1, 32, 32), 0.25)
        out1 = gen(l, torch.ones(1, 256))
        out2 = gen(l, 2 * torch.ones(1, 256))
        assert (out1 - out2).abs().max() > 0

    def test_shape_validation(self, gen):
        with pytest.raises(ValidationError):
            gen(torch.zeros(1, 1, 16, 16), torch.zeros(1, 256))
        with pytest.raises(ValidationError):
            gen(torch.zeros(1, 1, 32, 32), torch.zeros(1, 128))

    def test_train_mode_uses_batch_stats(self):
        gen = md.build_generator(SMALL_GEN, seed=2).train()
        torch.manual_seed(0)
        l = torch.rand(2, 1, 32, 32) * 2 - 1
        s = torch.randn(2, 256)
        before = gen.encoder_levels[0][0][1].running_mean.clone()
        gen(l, s)
        after = gen.encoder_levels[0][0][1].running_mean
        assert not torch.equal(before, after)


class TestRrdb:
    def test_shape_preserved(self):
        block = md.init_parameters(md.Rrdb(8, md.RrdbConfig(growth_channels=4)), 0).eval()
        x = torch.randn(1, 8, 16, 16)
        assert block(x).shape == x.shape

    def test_beta_zero_is_bitwise_identity(self):
        cfg = md.RrdbConfig(growth_channels=4, beta=0.0)
        block = md.init_parameters(md.Rrdb(8, cfg), 0).eval()
        x = torch.randn(2, 8, 16, 16)
        assert torch.equal(block(x), x)

    def test_finite_at_init(self):
        block = md.init_parameters(md.Rrdb(8, md.RrdbConfig(growth_channels=4)), 1).train()
        x = torch.randn(4, 8, 16, 16)
        assert torch.isfinite(block(x)).all()


class TestDiscriminatorForward:
    def test_patch_map_and_scalar(self, disc):
        torch.manual_seed(1)
        l = torch.rand(2, 1, 64, 64) * 2 - 1
        ab = torch.rand(2, 2, 64, 64) * 2 - 1
        logits, patch_map = disc(l, ab)
        expected = SMALL_DISC.patch_map_size(64)
        assert patch_map.shape == (2, 1, expected, expected)
        assert logits.shape == (2,)
        assert torch.allclose(logits, patch_map.mean(dim=(1, 2, 3)))

    def test_eval_deterministic(self, disc):
        torch.manual_seed(2)
        l = torch.rand(1, 1, 64, 64)
        ab = torch.rand(1, 2, 64, 64)
        out1, _ = disc(l, ab)
        out2, _ = disc(l, ab)
        assert torch.equal(out1, out2)

    def test_shape_validation(self, disc):
        with pytest.raises(ValidationError):
            disc(torch.zeros(1, 1, 64, 64), torch.zeros(1, 2, 32, 32))
        with pytest.raises(ValidationError):
            disc(torch.zeros(1, 2, 64, 64), torch.zeros(1, 2, 64, 64))

    def test_patch_locality(self, disc):
        """A single-pixel perturbation only moves patches whose receptive
        field covers it (eval mode, frozen statistics)."""
        torch.manual_seed(4)
        l = torch.rand(1, 1, 64, 64)
        ab = torch.rand(1, 2, 64, 64)
        _, base = disc(l, ab)

        # receptive-field interval per patch index from the conv stack
        k = SMALL_DISC.kernel_size
        stack = [(k, s, 1) for s in SMALL_DISC.block_strides] + [(k, 1, 1)]
        jump, start, rf = 1, 0, 1
        for kk, ss, pp in stack:
            start = start - pp * jump
            rf = rf + (kk - 1) * jump
            jump *= ss

        py, px = 31, 17
        l2 = l.clone()
        l2[0, 0, py, px] += 0.5
        _, pert = disc(l2, ab)
        changed = (pert - base)[0, 0].abs() > 0
        idx = changed.nonzero()
        assert len(idx) > 0
        for iy, ix in idx.tolist():
            y0 = start + iy * jump
            x0 = start + ix * jump
            assert y0 <= py <= y0 + rf - 1
            assert x0 <= px <= x0 + rf - 1


class TestCheckpoint:
    def make_vocab(self):
        return te.fallback_vocabulary({"red", "blue", "circle"}, seed=1)

    def test_round_trip_bitwise(self, tmp_path):
        gen = md.build_generator(SMALL_GEN, seed=7)
        disc = md.build_discriminator(SMALL_DISC, seed=8)
        vocab = self.make_vocab()
        path = tmp_path / "ckpt.pt"
        md.save_checkpoint(
            path, generator=gen, vocab=vocab, discriminator=disc,
            trainer_state={"iteration": 42},
        )
        loaded = md.load_checkpoint(path)
        assert params_equal(loaded.generator, gen)
        assert params_equal(loaded.discriminator, disc)
        assert loaded.generator_config == SMALL_GEN
        assert loaded.trainer_state["iteration"] == 42
        assert np.array_equal(loaded.vocab.table, vocab.table)
        assert loaded.vocab.index == vocab.index
        assert loaded.vocab.source == "jointly-seeded"

    def test_truncated_file_errors(self, tmp_path):
        gen = md.build_generator(SMALL_GEN, seed=7)
        path = tmp_path / "ckpt.pt"
        md.save_checkpoint(path, generator=gen)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointError):
            md.load_checkpoint(path)

    def test_not_a_checkpoint_errors(self, tmp_path):
        path = tmp_path / "junk.pt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointError):
            md.load_checkpoint(path)

    def test_version_mismatch_errors(self, tmp_path):
        gen = md.build_generator(SMALL_GEN, seed=7)
        path = tmp_path / "ckpt.pt"
        payload = {
            "format_version": 999,
            "generator": {"config": {}, "state": gen.state_dict()},
        }
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="version"):
            md.load_checkpoint(path)

    def test_config_echo_shape_mismatch_errors(self, tmp_path):
        gen = md.build_generator(SMALL_GEN, seed=7)
        path = tmp_path / "ckpt.pt"
        md.save_checkpoint(path, generator=gen)
        payload = torch.load(path, weights_only=True)
        payload["generator"]["config"]["base_filters"] = 16
        torch.save(payload, path)
        with pytest.raises(CheckpointError):
            md.load_checkpoint(path)

    def test_unknown_config_key_errors(self, tmp_path):
        gen = md.build_generator(SMALL_GEN, seed=7)
        path = tmp_path / "ckpt.pt"
        md.save_checkpoint(path, generator=gen)
        payload = torch.load(path, weights_only=True)
        payload["generator"]["config"]["mystery_knob"] = 3
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="mystery_knob"):
            md.load_checkpoint(path)
