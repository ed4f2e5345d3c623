"""Alternating adversarial training with Adam, checkpointing and resume.

Each iteration updates the discriminator on a (real, fake) pair of stacks
with the generator frozen, then updates the generator on the weighted
adversarial + perceptual + pixel objective with the discriminator frozen.
Gradients are taken explicitly per network (``torch.autograd.grad``), so
the frozen side of each half-step never accumulates anything.

Data order is a pure function of (data seed, epoch): each epoch draws a
fresh permutation from a seeded generator, which is what makes
checkpoint/resume reproduce an uninterrupted run bitwise.  Checkpoints are
written atomically every ``checkpoint_every`` iterations; the last
``keep_checkpoints`` plus the best-by-validation-L1 survive pruning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np
import torch
from filelock import FileLock, Timeout
from torch import Tensor

from .colorspace import assemble_rgb
from .config import OptimizerConfig, RunConfig, SynthSpec
from .data import (
    EncodedDataset,
    Sample,
    encode_samples,
    iter_batches,
    load_dataset,
    load_manifest,
    load_palette,
    synth_generate,
)
from .errors import ConfigError, DataError, TrainingAborted
from .losses import (
    LossWeights,
    adv_discriminator_loss,
    adv_generator_loss,
    l1_loss,
    perceptual_loss,
    total_generator_loss,
)
from .models import (
    Discriminator,
    Generator,
    build_discriminator,
    build_generator,
    load_checkpoint,
    save_checkpoint,
)
from .text import Vocabulary, fallback_vocabulary, load_embeddings, tokenize
from .vgg import load_extractor

log = logging.getLogger(__name__)

Moments = dict[str, tuple[Tensor, Tensor]]

METRIC_COLUMNS = ("iteration", "d_gan", "g_gan", "g_perceptual", "g_l1")


def adam_update(
    param: Tensor, grad: Tensor, moments: tuple[Tensor, Tensor], step: int, cfg: OptimizerConfig
) -> tuple[Tensor, tuple[Tensor, Tensor]]:
    """One bias-corrected Adam step; returns the new parameter and moments.

    ``step`` counts updates starting at 1.  Purely functional: inputs are
    never mutated.
    """
    if cfg.weight_decay:
        grad = grad + cfg.weight_decay * param
    m, v = moments
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**step)
    v_hat = v / (1.0 - cfg.beta2**step)
    new_param = param - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps)
    return new_param, (m, v)


def _zero_moments(module: torch.nn.Module) -> Moments:
    return {
        name: (torch.zeros_like(p), torch.zeros_like(p))
        for name, p in module.named_parameters()
    }


def _apply_adam(module: torch.nn.Module, grads: dict[str, Tensor], moments: Moments,
                step: int, cfg: OptimizerConfig) -> None:
    with torch.no_grad():
        for name, p in module.named_parameters():
            new_p, new_m = adam_update(p, grads[name], moments[name], step, cfg)
            p.copy_(new_p)
            moments[name] = new_m


@dataclass
class TrainState:
    generator: Generator
    discriminator: Discriminator
    gen_moments: Moments
    disc_moments: Moments
    iteration: int = 0
    data_seed: int = 0
    history: list[dict[str, float]] = field(default_factory=list)


def new_train_state(config: RunConfig) -> TrainState:
    gen = build_generator(config.model, seed=config.param_seed)
    disc = build_discriminator(config.discriminator, seed=config.param_seed + 1)
    return TrainState(
        generator=gen,
        discriminator=disc,
        gen_moments=_zero_moments(gen),
        disc_moments=_zero_moments(disc),
        data_seed=config.data_seed,
    )


def _named_grads(loss: Tensor, module: torch.nn.Module) -> dict[str, Tensor]:
    names, params = zip(*module.named_parameters())
    grads = torch.autograd.grad(loss, params)
    return dict(zip(names, grads))


def _update_discriminator(state: TrainState, l: Tensor, ab_real: Tensor, fake: Tensor,
                          opt: OptimizerConfig) -> float:
    """Discriminator half-step on detached fakes; generator untouched."""
    logit_real, _ = state.discriminator(l, ab_real)
    logit_fake, _ = state.discriminator(l, fake.detach())
    d_loss = adv_discriminator_loss(logit_real, logit_fake)
    grads = _named_grads(d_loss, state.discriminator)
    _apply_adam(state.discriminator, grads, state.disc_moments, state.iteration + 1, opt)
    return float(d_loss.detach())


def _update_generator(state: TrainState, l: Tensor, ab_real: Tensor, fake: Tensor,
                      weights: LossWeights, extractor, opt: OptimizerConfig) -> dict[str, float]:
    """Generator half-step; gradients flow through the frozen discriminator."""
    logit_fake, _ = state.discriminator(l, fake)
    adv = adv_generator_loss(logit_fake)
    fake_rgb = assemble_rgb(l, fake)
    real_rgb = assemble_rgb(l, ab_real)
    perceptual = perceptual_loss(fake_rgb, real_rgb, extractor, weights.perceptual_layer)
    pixel = l1_loss(fake, ab_real)
    g_loss = total_generator_loss(adv, perceptual, pixel, weights)
    grads = _named_grads(g_loss, state.generator)
    _apply_adam(state.generator, grads, state.gen_moments, state.iteration + 1, opt)
    return {
        "g_gan": float(adv.detach()),
        "g_perceptual": float(perceptual.detach()),
        "g_l1": float(pixel.detach()),
        "g_total": float(g_loss.detach()),
    }


def train_step(
    batch: tuple[Tensor, Tensor, Tensor],
    state: TrainState,
    weights: LossWeights,
    extractor,
    opt: OptimizerConfig,
    *,
    ablate_text: bool = False,
) -> dict[str, float]:
    """One alternating update of D then G; mutates ``state`` in place.

    With ``ablate_text`` the embeddings are replaced by zeros everywhere,
    which silences the fused bottleneck conditioning.
    """
    l, ab_real, emb = batch
    if ablate_text:
        emb = torch.zeros_like(emb)
    state.generator.train()
    state.discriminator.train()

    fake = state.generator(l, emb)
    d_gan = _update_discriminator(state, l, ab_real, fake, opt)
    g_metrics = _update_generator(state, l, ab_real, fake, weights, extractor, opt)

    state.iteration += 1
    metrics = {"iteration": float(state.iteration), "d_gan": d_gan, **g_metrics}
    bad = [k for k, v in metrics.items() if not math.isfinite(v)]
    if bad:
        raise TrainingAborted(f"non-finite loss at iteration {state.iteration}: {bad}")
    state.history.append(metrics)
    return metrics


def validation_l1(generator: Generator, encoded: EncodedDataset, batch_size: int = 32) -> float:
    """Mean absolute chroma error (model units) in eval mode."""
    was_training = generator.training
    generator.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(encoded), batch_size):
            l = encoded.l[start : start + batch_size]
            ab = encoded.ab[start : start + batch_size]
            emb = encoded.embeddings[start : start + batch_size]
            pred = generator(l, emb)
            total += float((pred - ab).abs().sum())
            count += ab.numel()
    if was_training:
        generator.train()
    return total / count


def _epoch_stream(encoded: EncodedDataset, batch_size: int, data_seed: int,
                  start_iteration: int) -> Iterator[tuple[Tensor, Tensor, Tensor]]:
    """Endless batch stream whose order depends only on (seed, epoch).

    Resuming at iteration k replays epoch ``k // batches_per_epoch`` from
    position ``k % batches_per_epoch``, so interrupted and uninterrupted
    runs see identical data.
    """
    per_epoch = math.ceil(len(encoded) / batch_size)
    epoch, skip = divmod(start_iteration, per_epoch)
    while True:
        for i, batch in enumerate(iter_batches(encoded, batch_size, seed=[data_seed, epoch])):
            if i >= skip:
                yield batch
        skip = 0
        epoch += 1


@dataclass
class TrainResult:
    final_checkpoint: Path
    best_checkpoint: Path
    metrics_log: Path
    iterations: int
    final_val_l1: float
    history: list[dict[str, float]]


def _load_train_samples(config: RunConfig) -> tuple[list[Sample], list[Sample]]:
    data = config.data
    if data.synth is not None:
        spec: SynthSpec = data.synth
        palette = load_palette(spec.palette_file) if spec.palette_file else None
        train = synth_generate(spec.n, spec.seed, palette, image_size=spec.image_size)
        val = synth_generate(
            spec.test_n, spec.seed + 1, palette, image_size=spec.image_size, split="test"
        )
        return train, val
    manifest = load_manifest(data.manifest)
    samples, report = load_dataset(manifest, image_size=data.image_size)
    if report.errors:
        log.warning("dataset load: %s", report)
    train = [s for s in samples if s.split == "train"]
    val = [s for s in samples if s.split == "test"]
    if not train:
        raise DataError(f"manifest {data.manifest} yielded no train samples")
    return train, val or train[: config.val_samples]


def _build_vocab(config: RunConfig, samples: list[Sample]) -> Vocabulary:
    if config.vocab.embeddings_file:
        return load_embeddings(config.vocab.embeddings_file)
    tokens: set[str] = set()
    for sample in samples:
        tokens.update(tokenize(sample.description))
    return fallback_vocabulary(tokens, seed=config.vocab.fallback_seed)


class _CheckpointKeeper:
    """Retention: last N checkpoints plus the best-by-validation one."""

    def __init__(self, run_dir: Path, keep: int):
        self.run_dir = run_dir
        self.keep = keep
        self.recent: list[Path] = []
        self.best_path: Path | None = None
        self.best_val = float("inf")

    def add(self, path: Path, val: float) -> None:
        self.recent.append(path)
        if val < self.best_val:
            self.best_val = val
            self.best_path = path
        while len(self.recent) > self.keep:
            stale = self.recent.pop(0)
            if stale != self.best_path and stale.exists():
                stale.unlink()


def train(config: RunConfig, *, resume_from: str | Path | None = None) -> TrainResult:
    """Run the full training loop described by ``config``.

    The run directory is locked for exclusive use.  Returns paths to the
    final and best checkpoints and the metrics log.  Raises
    TrainingAborted (after writing a diagnostic snapshot) if a loss goes
    non-finite.
    """
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(run_dir / ".lock")
    try:
        lock.acquire(timeout=0.5)
    except Timeout as exc:
        raise ConfigError(f"run directory {run_dir} is locked by another trainer") from exc

    try:
        train_samples, val_samples = _load_train_samples(config)
        vocab = _build_vocab(config, train_samples)
        extractor = load_extractor(config.perceptual)

        if resume_from is not None:
            state = restore_train_state(resume_from, config)
        else:
            state = new_train_state(config)

        if config.model.image_size != train_samples[0].image.shape[0]:
            raise ConfigError(
                f"model image_size {config.model.image_size} does not match "
                f"dataset image size {train_samples[0].image.shape[0]}"
            )

        encoded = encode_samples(train_samples, vocab)
        encoded_val = encode_samples(val_samples, vocab) if val_samples else encoded

        metrics_log = run_dir / "metrics.tsv"
        new_log = not metrics_log.exists() or resume_from is None
        log_fh = open(metrics_log, "w" if new_log else "a", encoding="utf-8")
        if new_log:
            log_fh.write("\t".join(METRIC_COLUMNS) + "\n")

        keeper = _CheckpointKeeper(run_dir, config.keep_checkpoints)

        def write_checkpoint() -> tuple[Path, float]:
            val = validation_l1(state.generator, encoded_val)
            path = run_dir / f"ckpt-{state.iteration:07d}.pt"
            save_checkpoint(
                path,
                generator=state.generator,
                vocab=vocab,
                discriminator=state.discriminator,
                trainer_state={
                    "iteration": state.iteration,
                    "gen_moments": state.gen_moments,
                    "disc_moments": state.disc_moments,
                    "data_seed": state.data_seed,
                    "val_l1": val,
                },
            )
            keeper.add(path, val)
            return path, val

        stream = _epoch_stream(encoded, config.batch_size, state.data_seed, state.iteration)
        last_path: Path | None = None
        val = float("nan")
        try:
            while state.iteration < config.iterations:
                batch = next(stream)
                metrics = train_step(
                    batch, state, config.loss, extractor, config.optimizer,
                    ablate_text=config.ablate_text,
                )
                log_fh.write(
                    "\t".join(
                        f"{int(metrics['iteration'])}" if c == "iteration" else f"{metrics[c]:.6f}"
                        for c in METRIC_COLUMNS
                    )
                    + "\n"
                )
                log_fh.flush()
                if state.iteration % config.checkpoint_every == 0:
                    last_path, val = write_checkpoint()
        except TrainingAborted:
            snapshot = run_dir / f"abort-{state.iteration:07d}.pt"
            save_checkpoint(
                snapshot, generator=state.generator, vocab=vocab,
                discriminator=state.discriminator,
                trainer_state={"iteration": state.iteration, "aborted": True,
                               "gen_moments": state.gen_moments,
                               "disc_moments": state.disc_moments,
                               "data_seed": state.data_seed},
            )
            log.error("training aborted; diagnostic snapshot at %s", snapshot)
            raise
        finally:
            log_fh.close()

        if last_path is None or state.iteration % config.checkpoint_every != 0:
            last_path, val = write_checkpoint()

        return TrainResult(
            final_checkpoint=last_path,
            best_checkpoint=keeper.best_path or last_path,
            metrics_log=metrics_log,
            iterations=state.iteration,
            final_val_l1=val,
            history=state.history,
        )
    finally:
        lock.release()


def restore_train_state(path: str | Path, config: RunConfig) -> TrainState:
    """Rebuild a TrainState (models, moments, counters) from a checkpoint."""
    ckpt = load_checkpoint(path)
    if ckpt.discriminator is None or ckpt.trainer_state is None:
        raise ConfigError(f"{path} lacks trainer state and cannot be resumed from")
    if ckpt.generator_config != config.model:
        raise ConfigError(
            f"checkpoint model config {ckpt.generator_config} differs from run config"
        )
    ts: dict[str, Any] = ckpt.trainer_state
    ckpt.generator.train()
    ckpt.discriminator.train()
    return TrainState(
        generator=ckpt.generator,
        discriminator=ckpt.discriminator,
        gen_moments={k: tuple(v) for k, v in ts["gen_moments"].items()},
        disc_moments={k: tuple(v) for k, v in ts["disc_moments"].items()},
        iteration=int(ts["iteration"]),
        data_seed=int(ts["data_seed"]),
    )
