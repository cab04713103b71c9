#!/usr/bin/env python3
"""
Training loop for the straightening translator

Validation L1 is checked a fixed number of times per epoch. The best
weights are kept, the learning rate is reduced after a run of stale
checks, and training stops after a longer run of them.
"""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch.optim.lr_scheduler import ReduceLROnPlateau
from torch.utils.data import DataLoader, TensorDataset

from straightkit.processing.imgcore import to_model_range
from straightkit.translator.checkpoint import Checkpoint
from straightkit.translator.losses import backward, discriminator_loss, generator_loss, l1_loss
from straightkit.translator.networks import (
    PatchDiscriminator,
    UNetGenerator,
    discriminator_forward,
    generator_forward,
    init_weights,
)
from straightkit.utils import config, seeds
from straightkit.utils.errors import InvalidArgumentError, TrainingAborted
from straightkit.utils.logs import thread_cap

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = config.LEARNING_RATE
    l1_weight: float = config.L1_WEIGHT
    batch_size: int = config.BATCH_SIZE
    checks_per_epoch: int = config.CHECKS_PER_EPOCH
    decay_patience: int = config.DECAY_PATIENCE
    decay_factor: float = config.DECAY_FACTOR
    stop_patience: int = config.STOP_PATIENCE
    max_epochs: int = config.MAX_EPOCHS
    max_steps: int = 0  # 0 = no cap
    seed: int = config.DEFAULT_SEED
    dropout: float = config.DROPOUT_RATE
    betas: tuple = config.ADAM_BETAS
    depth: int = config.UNET_DEPTH
    base_channels: int = config.BASE_CHANNELS
    norm: str = "batch"
    init_std: float = config.INIT_STD
    deterministic: bool = True
    threads: int = 0  # 0 = STRAIGHTKIT_THREADS

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidArgumentError(f"lr must be positive, got {self.lr}")
        if not 0 < self.decay_factor < 1:
            raise InvalidArgumentError(f"decay_factor must lie in (0, 1), got {self.decay_factor}")
        if self.stop_patience < self.decay_patience:
            raise InvalidArgumentError("stop_patience must be >= decay_patience")
        if self.decay_patience < 1:
            raise InvalidArgumentError("decay_patience must be >= 1")
        if self.l1_weight < 0:
            raise InvalidArgumentError(f"lambda must be >= 0, got {self.l1_weight}")
        if self.batch_size < 1 or self.checks_per_epoch < 1:
            raise InvalidArgumentError("batch_size and checks_per_epoch must be >= 1")
        self.betas = tuple(self.betas)

    def as_dict(self):
        return asdict(self)


class ValidationMonitor:
    """
    Plateau schedule over validation checks.

    The learning rate of every optimizer is multiplied by decay_factor at
    each decay_patience-th consecutive stale check; should_stop turns true
    at the stop_patience-th.
    """

    def __init__(self, optimizers, decay_factor=config.DECAY_FACTOR,
                 decay_patience=config.DECAY_PATIENCE, stop_patience=config.STOP_PATIENCE):
        self.optimizers = list(optimizers)
        self.stop_patience = stop_patience
        # ReduceLROnPlateau decays once more than `patience` stale checks accumulate
        self.schedulers = [
            ReduceLROnPlateau(
                opt,
                mode="min",
                factor=decay_factor,
                patience=decay_patience - 1,
                threshold=0.0,
                threshold_mode="abs",
                cooldown=0,
                min_lr=0.0,
                eps=0.0,
            )
            for opt in self.optimizers
        ]
        self.best = math.inf
        self.stale = 0
        self.checks = 0

    @property
    def lr(self):
        return self.optimizers[0].param_groups[0]["lr"]

    @property
    def should_stop(self):
        return self.stale >= self.stop_patience

    def step(self, val_loss):
        """Record one validation check; returns True when it is a new best"""
        self.checks += 1
        improved = val_loss < self.best
        if improved:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
        for scheduler in self.schedulers:
            scheduler.step(val_loss)
        return improved


class TrainingLog:
    """Append-only check log: check_idx, epoch, lr, train_L1, val_L1[, train_adv]"""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.records = []
        if self.path and not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as f:
                f.write("# check_idx, epoch, lr, train_L1, val_L1[, train_adv]\n")

    def log_check(self, check_idx, epoch, lr, train_l1, val_l1, train_adv=None):
        record = dict(check_idx=check_idx, epoch=epoch, lr=lr, train_l1=train_l1, val_l1=val_l1, train_adv=train_adv)
        self.records.append(record)
        line = f"{check_idx}, {epoch}, {lr:.6e}, {train_l1:.6f}, {val_l1:.6f}"
        if train_adv is not None:
            line += f", {train_adv:.6f}"
        if self.path:
            with open(self.path, "a") as f:
                f.write(line + "\n")
        return line


def check_steps(steps_per_epoch, checks_per_epoch):
    """1-based in-epoch step numbers after which validation runs"""
    return sorted({max(1, round((j + 1) * steps_per_epoch / checks_per_epoch)) for j in range(checks_per_epoch)})


def _to_tensor(images):
    return torch.from_numpy(to_model_range(images)).unsqueeze(1)


class Trainer:
    def __init__(self, dataset, train_config=None, mode="u_net_only", log_path=None):
        if mode not in config.TRAIN_MODES:
            raise InvalidArgumentError(f"mode must be one of {config.TRAIN_MODES}, got '{mode}'")
        if not dataset.train_indices or not dataset.val_indices:
            raise TrainingAborted("training and validation splits must both be non-empty")

        self.dataset = dataset
        self.config = train_config or TrainConfig()
        self.mode = mode
        self.log = TrainingLog(log_path)
        self.image_size = tuple(dataset.image_shape)

        cfg = self.config
        torch.set_num_threads(cfg.threads or thread_cap())
        if cfg.deterministic:
            torch.use_deterministic_algorithms(True, warn_only=True)
        torch.manual_seed(seeds.derive_seed(cfg.seed, seeds.DROPOUT))

        self.generator = UNetGenerator(
            depth=cfg.depth, base_channels=cfg.base_channels, dropout=cfg.dropout, norm=cfg.norm
        )
        init_weights(self.generator, cfg.init_std, seeds.derive_seed(cfg.seed, seeds.INIT_GENERATOR))
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=cfg.lr, betas=cfg.betas)
        optimizers = [self.opt_g]

        self.discriminator = None
        self.opt_d = None
        if mode == "pix2pix":
            self.discriminator = PatchDiscriminator(base_channels=cfg.base_channels, norm=cfg.norm)
            init_weights(self.discriminator, cfg.init_std, seeds.derive_seed(cfg.seed, seeds.INIT_DISCRIMINATOR))
            self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=cfg.lr, betas=cfg.betas)
            optimizers.append(self.opt_d)

        self.monitor = ValidationMonitor(optimizers, cfg.decay_factor, cfg.decay_patience, cfg.stop_patience)

        xs, ys = dataset.arrays(dataset.train_indices)
        self.train_set = TensorDataset(_to_tensor(xs), _to_tensor(ys))
        xs, ys = dataset.arrays(dataset.val_indices)
        self.val_set = TensorDataset(_to_tensor(xs), _to_tensor(ys))
        self.loader = DataLoader(
            self.train_set,
            batch_size=cfg.batch_size,
            shuffle=True,
            generator=torch.Generator().manual_seed(seeds.derive_seed(cfg.seed, seeds.BATCH_ORDER)),
        )

        self.step_count = 0
        self.best_checkpoint = None

    def evaluate(self, tensor_set=None, batch_size=16):
        """Mean per-pixel L1 (model range) of the generator in inference mode"""
        tensor_set = tensor_set if tensor_set is not None else self.val_set
        total, count = 0.0, 0
        with torch.no_grad():
            for x, y in DataLoader(tensor_set, batch_size=batch_size, shuffle=False):
                total += float((generator_forward(self.generator, x, training=False) - y).abs().sum())
                count += y.numel()
        return total / count

    def _update(self, x, y):
        """One optimisation step; returns (l1, adv or None)"""
        fake = generator_forward(self.generator, x, training=True)

        if self.mode == "u_net_only":
            loss = l1_loss(fake, y)
            self._check_finite(loss, "L1")
            self.opt_g.zero_grad()
            backward(loss, self.generator)
            self.opt_g.step()
            return float(loss), None

        self.discriminator.train()
        d_loss = discriminator_loss(
            discriminator_forward(self.discriminator, x, y),
            discriminator_forward(self.discriminator, x, fake.detach()),
        )
        self._check_finite(d_loss, "discriminator")
        self.opt_d.zero_grad()
        backward(d_loss, self.discriminator)
        self.opt_d.step()

        d_fake = discriminator_forward(self.discriminator, x, fake)
        g_loss, parts = generator_loss(d_fake, fake, y, self.config.l1_weight)
        self._check_finite(g_loss, "generator")
        self.opt_g.zero_grad()
        backward(g_loss, self.generator)
        self.opt_g.step()
        return float(parts["l1"]), float(parts["adv"])

    def _check_finite(self, loss, what):
        if not torch.isfinite(loss):
            raise TrainingAborted(
                f"non-finite {what} loss ({float(loss)}) at step {self.step_count}, lr {self.monitor.lr:.3e}"
            )

    def _validate(self, epoch, l1_sum, adv_sum, n_batches):
        val_l1 = self.evaluate()
        if not math.isfinite(val_l1):
            raise TrainingAborted(f"non-finite validation loss at step {self.step_count}")
        lr_used = self.monitor.lr
        improved = self.monitor.step(val_l1)
        if improved:
            self.best_checkpoint = Checkpoint.from_generator(
                self.generator,
                self.image_size,
                best_val_loss=val_l1,
                check_index=self.monitor.checks,
                epoch=epoch,
                lr=lr_used,
                config=dict(self.config.as_dict(), mode=self.mode),
            )
        train_l1 = l1_sum / max(n_batches, 1)
        train_adv = adv_sum / max(n_batches, 1) if self.mode == "pix2pix" else None
        line = self.log.log_check(self.monitor.checks, epoch, lr_used, train_l1, val_l1, train_adv)
        logger.info("🧪 check %s%s", line, "  ✅ best" if improved else "")

    def fit(self):
        cfg = self.config
        steps_per_epoch = len(self.loader)
        checkpoints_at = set(check_steps(steps_per_epoch, cfg.checks_per_epoch))
        logger.info(
            "🚀 Training %s: %d train / %d val pairs, %d steps per epoch",
            self.mode, len(self.train_set), len(self.val_set), steps_per_epoch,
        )

        stop = False
        epoch = 0
        l1_sum, adv_sum, n_batches = 0.0, 0.0, 0
        for epoch in range(1, cfg.max_epochs + 1):
            for in_epoch, (x, y) in enumerate(self.loader, start=1):
                l1, adv = self._update(x, y)
                self.step_count += 1
                l1_sum += l1
                adv_sum += adv or 0.0
                n_batches += 1

                capped = bool(cfg.max_steps) and self.step_count >= cfg.max_steps
                if in_epoch in checkpoints_at or capped:
                    self._validate(epoch, l1_sum, adv_sum, n_batches)
                    l1_sum, adv_sum, n_batches = 0.0, 0.0, 0
                    if self.monitor.should_stop:
                        logger.info("⏹️ No improvement for %d checks, stopping", self.monitor.stale)
                        stop = True
                if capped:
                    stop = True
                if stop:
                    break
            if stop:
                break

        if n_batches:
            self._validate(epoch, l1_sum, adv_sum, n_batches)
        logger.info(
            "✅ Training finished after %d steps; best val L1 %.6f at check %d",
            self.step_count, self.best_checkpoint.best_val_loss, self.best_checkpoint.check_index,
        )
        return self.best_checkpoint


def train(dataset, train_config=None, mode="u_net_only", log_path=None):
    """Train on an augmented dataset and return the best checkpoint"""
    return Trainer(dataset, train_config, mode, log_path).fit()


def evaluate_checkpoint(checkpoint, dataset, indices):
    """Re-evaluate a checkpoint's mean L1 (model range) on the given pairs"""
    generator = checkpoint.build_generator()
    xs, ys = dataset.arrays(indices)
    with torch.no_grad():
        pred = generator(_to_tensor(xs))
    return float((pred - _to_tensor(ys)).abs().mean())
