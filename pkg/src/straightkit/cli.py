#!/usr/bin/env python3
"""
straightkit command line

Subcommands wire the straightening pipeline together:

    backbone     chromosome image -> curved and vertical backbone figures
    augment      chromosome image -> augmented (backbone, chromosome) dataset
    train        dataset -> best-weights checkpoint
    straighten   checkpoint + vertical backbone -> straightened chromosome
    synthesize   checkpoint + control points -> chromosomes at new curvatures
    baseline     chromosome image -> geometric cut-and-stitch result
    synth        -> synthetic (straight, bent, profile) oracle cases
    eval         case directory -> comparison report
    pipeline     all of the above for one chromosome

Settings come from flags, then a flat key=value --config file, then the
defaults in straightkit.utils.config.
"""

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from straightkit.baseline.geobase import geometric_straighten
from straightkit.evaluation.evalkit import (
    EvalCase,
    band_profile,
    clean_background,
    evaluate_methods,
    load_cases,
    save_profile_figure,
)
from straightkit.processing.augment import build_augmented_dataset, load_dataset, save_dataset
from straightkit.processing.backbone import extract_backbone, load_control_points, save_control_points
from straightkit.processing.imgcore import load_image, save_image
from straightkit.synth.synthgen import make_synthetic_case
from straightkit.translator.checkpoint import load_checkpoint, save_checkpoint
from straightkit.translator.inference import make_curvature_variants, straighten, synthesize
from straightkit.translator.trainer import TrainConfig, train
from straightkit.utils import config
from straightkit.utils.errors import ConfigError, DataError, StraightkitError
from straightkit.utils.keyvalue import read_key_values, write_key_values
from straightkit.utils.logs import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (
    "backbone", "augment", "train", "straighten", "synthesize", "baseline", "synth", "eval", "pipeline",
)

# Paths each command cannot run without
REQUIRED_PATHS = {
    "backbone": ("input",),
    "augment": ("input",),
    "train": ("data",),
    "straighten": ("checkpoint", "backbone"),
    "synthesize": ("checkpoint", "input"),
    "baseline": ("input",),
    "synth": (),
    "eval": ("cases",),
    "pipeline": ("input",),
}


@dataclass
class RunConfig:
    command: str = "pipeline"
    input: str = ""
    out: str = "out"
    checkpoint: str = ""
    backbone: str = ""
    data: str = ""
    cases: str = ""
    truth: str = ""
    seed: int = config.DEFAULT_SEED
    canvas: int = config.CANVAS_SIZE
    invert: bool = config.INVERT_INPUT
    window: int = config.SMOOTH_WINDOW
    stick_width: int = config.STICK_WIDTH
    k: int = config.AUGMENT_PAIRS
    points: int = config.DEFORM_POINTS
    sigma: float = config.DEFORM_SIGMA
    max_angle: float = config.MAX_ROTATION
    mode: str = "pix2pix"
    lr: float = config.LEARNING_RATE
    l1_weight: float = config.L1_WEIGHT
    batch_size: int = config.BATCH_SIZE
    checks_per_epoch: int = config.CHECKS_PER_EPOCH
    decay_patience: int = config.DECAY_PATIENCE
    decay_factor: float = config.DECAY_FACTOR
    stop_patience: int = config.STOP_PATIENCE
    max_epochs: int = config.MAX_EPOCHS
    max_steps: int = 0
    dropout: float = config.DROPOUT_RATE
    depth: int = config.UNET_DEPTH
    base_channels: int = config.BASE_CHANNELS
    count: int = 10
    bends: int = 1
    curvature: float = 0.35
    length: int = 0
    angles: str = "-30,-15,15,30"
    threads: int = 0
    verbose: bool = False

    def train_config(self):
        return TrainConfig(
            lr=self.lr,
            l1_weight=self.l1_weight,
            batch_size=self.batch_size,
            checks_per_epoch=self.checks_per_epoch,
            decay_patience=self.decay_patience,
            decay_factor=self.decay_factor,
            stop_patience=self.stop_patience,
            max_epochs=self.max_epochs,
            max_steps=self.max_steps,
            seed=self.seed,
            dropout=self.dropout,
            depth=self.depth,
            base_channels=self.base_channels,
            threads=self.threads,
        )

    def angle_list(self):
        try:
            return [float(a) for a in self.angles.split(",") if a.strip()]
        except ValueError as e:
            raise ConfigError(f"angles must be comma-separated numbers, got '{self.angles}'") from e


FIELD_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def _coerce(key, raw, source):
    """Convert a config-file string to the field's type"""
    kind = FIELD_TYPES[key]
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{source}: '{key}' expects true/false, got '{raw}'")
    try:
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"{source}: '{key}' expects {kind.__name__}, got '{raw}'") from e


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = _ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", dest="config_file", help="flat key=value settings file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--out", help="output directory")
    common.add_argument("--input", help="input image (or control points for synthesize)")
    common.add_argument("--checkpoint", help="checkpoint file")
    common.add_argument("--backbone", help="vertical backbone image")
    common.add_argument("--data", help="augmented dataset directory")
    common.add_argument("--cases", help="directory of evaluation cases")
    common.add_argument("--truth", help="ground-truth straight chromosome (pipeline report)")
    common.add_argument("--seed", type=int)
    common.add_argument("--canvas", type=int, help="square canvas size in pixels")
    common.add_argument("--invert", action=argparse.BooleanOptionalAction, help="invert dark-on-light input")
    common.add_argument("--window", type=int, help="axis smoothing window")
    common.add_argument("--stick-width", dest="stick_width", type=int)
    common.add_argument("--k", type=int, help="number of augmented pairs")
    common.add_argument("--points", type=int, help="deformation control points per axis")
    common.add_argument("--sigma", type=float, help="deformation displacement std (pixels)")
    common.add_argument("--max-angle", dest="max_angle", type=float, help="rotation range (degrees)")
    common.add_argument("--mode", choices=config.TRAIN_MODES)
    common.add_argument("--lr", type=float)
    common.add_argument("--lambda", dest="l1_weight", type=float, help="L1 loss weight")
    common.add_argument("--batch-size", dest="batch_size", type=int)
    common.add_argument("--checks-per-epoch", dest="checks_per_epoch", type=int)
    common.add_argument("--decay-patience", dest="decay_patience", type=int)
    common.add_argument("--decay-factor", dest="decay_factor", type=float)
    common.add_argument("--stop-patience", dest="stop_patience", type=int)
    common.add_argument("--max-epochs", dest="max_epochs", type=int)
    common.add_argument("--max-steps", dest="max_steps", type=int, help="0 = no cap")
    common.add_argument("--dropout", type=float)
    common.add_argument("--depth", type=int, help="generator levels")
    common.add_argument("--base-channels", dest="base_channels", type=int)
    common.add_argument("--count", type=int, help="synthetic cases to generate")
    common.add_argument("--bends", type=int, choices=(1, 2))
    common.add_argument("--curvature", type=float)
    common.add_argument("--length", type=int, help="synthetic chromosome length (0 = automatic)")
    common.add_argument("--angles", help="comma-separated bend angles for synthesize")
    common.add_argument("--threads", type=int, help="overrides STRAIGHTKIT_THREADS")

    parser = _ArgumentParser(prog="straightkit", description="Chromosome straightening toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} step")
    return parser


def parse(argv=None):
    """Flags override the config file, which overrides the defaults"""
    args = vars(build_parser().parse_args(argv))
    values = {}

    config_file = args.pop("config_file", None)
    if config_file:
        for key, raw in read_key_values(config_file).items():
            if key not in FIELD_TYPES or key == "command":
                raise ConfigError(f"{config_file}: unknown key '{key}'")
            values[key] = _coerce(key, raw, config_file)

    values.update(args)
    cfg = RunConfig(**values)

    missing = [name for name in REQUIRED_PATHS[cfg.command] if not getattr(cfg, name)]
    if missing:
        raise ConfigError(f"{cfg.command}: missing required path(s): {', '.join('--' + m for m in missing)}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {cfg.seed}")
    return cfg


def _out_dir(cfg, *parts):
    path = Path(cfg.out, *parts)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create output directory {path}: {e}") from e
    return path


def write_manifest(out_dir, cfg, **results):
    values = asdict(cfg)
    values.update(results)
    write_key_values(Path(out_dir) / config.MANIFEST_NAME, values, header="straightkit run manifest")


def _load_chromosome(cfg, path=None):
    return load_image(path or cfg.input, invert=cfg.invert, canvas=cfg.canvas or None)


def run_backbone(cfg, out_dir=None):
    out_dir = out_dir or _out_dir(cfg)
    img = _load_chromosome(cfg)
    cp, pair = extract_backbone(img, cfg.stick_width, cfg.window)
    save_image(img, out_dir / "chromosome.png")
    save_image(pair.curved, out_dir / "curved_backbone.png")
    save_image(pair.vertical, out_dir / "vertical_backbone.png")
    save_control_points(cp, out_dir / "control_points.txt")
    write_manifest(out_dir, cfg, total_stick_length=float(pair.lengths.sum()))
    logger.info("✅ Backbone figures written to %s", out_dir)
    return img, cp, pair


def run_augment(cfg, out_dir=None, img=None, pair=None):
    out_dir = out_dir or _out_dir(cfg)
    if img is None:
        img = _load_chromosome(cfg)
        _, pair = extract_backbone(img, cfg.stick_width, cfg.window)
    dataset = build_augmented_dataset(
        img, pair.curved, cfg.k, cfg.seed, cfg.points, cfg.sigma, cfg.max_angle, cfg.threads or None
    )
    extra = {f"run_{key}": value for key, value in asdict(cfg).items()}
    save_dataset(dataset, out_dir, extra=extra)
    return dataset


def run_train(cfg, out_dir=None, dataset=None):
    out_dir = out_dir or _out_dir(cfg)
    dataset = dataset or load_dataset(cfg.data)
    logger.info("🧪 Training %s on %d pairs", cfg.mode, dataset.k)
    checkpoint = train(dataset, cfg.train_config(), cfg.mode, log_path=out_dir / config.TRAIN_LOG_NAME)
    path = save_checkpoint(checkpoint, out_dir / config.CHECKPOINT_NAME)
    write_manifest(
        out_dir, cfg, best_val_loss=checkpoint.best_val_loss, best_check=checkpoint.check_index, checkpoint_file=path.name
    )
    return checkpoint


def run_straighten(cfg, out_dir=None, checkpoint=None, vertical=None):
    out_dir = out_dir or _out_dir(cfg)
    checkpoint = checkpoint or load_checkpoint(cfg.checkpoint)
    if vertical is None:
        vertical = load_image(cfg.backbone)
    result = straighten(checkpoint, vertical)
    save_image(result, out_dir / "straightened.png")
    write_manifest(out_dir, cfg)
    logger.info("✅ Straightened chromosome written to %s", out_dir / "straightened.png")
    return result


def run_synthesize(cfg):
    out_dir = _out_dir(cfg)
    checkpoint = load_checkpoint(cfg.checkpoint)
    cp = load_control_points(cfg.input)
    angles = cfg.angle_list()
    backbones = make_curvature_variants(cp, checkpoint.image_size, angles, cfg.stick_width)
    for angle, backbone, image in zip(angles, backbones, synthesize(checkpoint, backbones)):
        save_image(backbone, out_dir / f"variant_{angle:+.0f}_backbone.png")
        save_image(image, out_dir / f"variant_{angle:+.0f}.png")
    write_manifest(out_dir, cfg, variants=len(angles))
    logger.info("✅ %d curvature variant(s) written to %s", len(angles), out_dir)


def run_baseline(cfg, out_dir=None, img=None):
    out_dir = out_dir or _out_dir(cfg)
    img = _load_chromosome(cfg) if img is None else img
    result, bend = geometric_straighten(img)
    save_image(result, out_dir / "baseline.png")
    write_manifest(out_dir, cfg, bend_row=bend.bend_row, bend_col=round(bend.bend_col, 3), bend_angle=round(bend.angle, 3))
    logger.info("✅ Geometric result written to %s (bend %.1f deg at row %d)", out_dir, bend.angle, bend.bend_row)
    return result


def run_synth(cfg):
    out_dir = _out_dir(cfg)
    for index in range(cfg.count):
        case = make_synthetic_case(
            cfg.seed, index, cfg.canvas, cfg.bends, cfg.curvature, length=cfg.length or None
        )
        case.save(out_dir / case.name)
    write_manifest(out_dir, cfg)
    logger.info("✅ %d synthetic case(s) written to %s", cfg.count, out_dir)


def _write_report(out_dir, report, profiles_by_case):
    table = report.to_table()
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    report.to_csv(out_dir / "report.csv")
    for name, profiles in profiles_by_case.items():
        save_profile_figure(profiles, out_dir / f"{name}_profiles.png", title=name)
    print(table)


def _profiles(case):
    profiles = {"truth": band_profile(clean_background(case.truth))}
    for method, output in case.outputs.items():
        try:
            profiles[method] = band_profile(clean_background(output))
        except StraightkitError:
            continue
    return profiles


def run_eval(cfg):
    out_dir = _out_dir(cfg)
    cases = load_cases(cfg.cases)
    report = evaluate_methods(cases)
    _write_report(out_dir, report, {case.name: _profiles(case) for case in cases})
    write_manifest(out_dir, cfg, cases=len(cases))
    return report


def run_pipeline(cfg):
    out_dir = _out_dir(cfg)
    img, cp, pair = run_backbone(cfg, _out_dir(cfg, "backbone"))
    dataset = run_augment(cfg, _out_dir(cfg, "dataset"), img=img, pair=pair)
    checkpoint = run_train(cfg, _out_dir(cfg, "train"), dataset=dataset)
    straightened = run_straighten(cfg, _out_dir(cfg, "straighten"), checkpoint=checkpoint, vertical=pair.vertical)
    save_image(straightened, out_dir / "straightened.png")

    outputs = {"pipeline": straightened}
    try:
        outputs["baseline"] = run_baseline(cfg, _out_dir(cfg, "baseline"), img=img)
    except StraightkitError as e:
        logger.warning("⚠️ Geometric baseline failed: %s", e)

    results = dict(best_val_loss=checkpoint.best_val_loss)
    if cfg.truth:
        truth = _load_chromosome(cfg, cfg.truth)
        case = EvalCase(Path(cfg.input).stem, img, truth, outputs)
        report = evaluate_methods([case])
        _write_report(out_dir, report, {case.name: _profiles(case)})
    else:
        summary = [f"best validation L1: {checkpoint.best_val_loss:.6f} (check {checkpoint.check_index})"]
        files = {"pipeline": out_dir / "straightened.png", "baseline": out_dir / "baseline" / "baseline.png"}
        summary.extend(f"{name}: {files[name]}" for name in outputs)
        (out_dir / "report.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    write_manifest(out_dir, cfg, **results)
    logger.info("✅ Pipeline finished, results in %s", out_dir)


HANDLERS = {
    "backbone": run_backbone,
    "augment": run_augment,
    "train": run_train,
    "straighten": run_straighten,
    "synthesize": run_synthesize,
    "baseline": run_baseline,
    "synth": run_synth,
    "eval": run_eval,
    "pipeline": run_pipeline,
}


def execute(cfg):
    """Run one subcommand; returns the process exit status"""
    try:
        HANDLERS[cfg.command](cfg)
    except StraightkitError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    return 0


def main(argv=None):
    try:
        cfg = parse(argv)
    except StraightkitError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    setup_logging(cfg.verbose)
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
