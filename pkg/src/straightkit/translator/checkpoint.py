"""
Best-weights checkpoint

Stored with torch.save as {"generator": state_dict, "meta": {...}}. The
metadata holds only plain Python values so the file loads with
weights_only=True.
"""

import copy
import pickle
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from straightkit.translator.networks import UNetGenerator
from straightkit.utils.errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    generator_state: dict
    architecture: dict
    image_size: tuple
    best_val_loss: float = float("inf")
    check_index: int = 0
    epoch: int = 0
    lr: float = 0.0
    config: dict = field(default_factory=dict)

    @classmethod
    def from_generator(cls, generator, image_size, **meta):
        state = copy.deepcopy({k: v.detach().cpu() for k, v in generator.state_dict().items()})
        return cls(state, dict(generator.architecture), tuple(image_size), **meta)

    def build_generator(self):
        generator = UNetGenerator(**self.architecture)
        generator.load_state_dict(self.generator_state)
        generator.eval()
        return generator

    def meta(self):
        return {
            "architecture": dict(self.architecture),
            "image_size": list(self.image_size),
            "best_val_loss": float(self.best_val_loss),
            "check_index": int(self.check_index),
            "epoch": int(self.epoch),
            "lr": float(self.lr),
            "config": dict(self.config),
        }


def save_checkpoint(checkpoint, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"generator": checkpoint.generator_state, "meta": checkpoint.meta()}, path)
    logger.info("💾 Checkpoint saved: %s (val L1 %.6f)", path, checkpoint.best_val_loss)
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
        meta = blob["meta"]
        return Checkpoint(
            generator_state=blob["generator"],
            architecture=dict(meta["architecture"]),
            image_size=tuple(meta["image_size"]),
            best_val_loss=meta["best_val_loss"],
            check_index=meta["check_index"],
            epoch=meta["epoch"],
            lr=meta["lr"],
            config=dict(meta.get("config", {})),
        )
    except (OSError, RuntimeError, KeyError, TypeError, pickle.UnpicklingError) as e:
        raise DataError(f"cannot load checkpoint {path}: {e}") from e
