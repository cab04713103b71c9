import numpy as np
import pytest
import torch
import torch.nn.functional as F
from numpy.testing import assert_allclose, assert_array_equal
from torch.autograd import gradcheck
from torch.func import functional_call

from straightkit.processing.augment import build_augmented_dataset
from straightkit.processing.backbone import ControlPoints, extract_backbone, make_vertical_backbone
from straightkit.translator import trainer as trainer_module
from straightkit.translator.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from straightkit.translator.inference import bend_points, make_curvature_variants, straighten, synthesize
from straightkit.translator.losses import (
    adversarial_loss,
    backward,
    discriminator_loss,
    generator_loss,
    l1_loss,
)
from straightkit.translator.networks import (
    PatchDiscriminator,
    UNetGenerator,
    generator_forward,
    init_weights,
    patch_map_size,
)
from straightkit.translator.trainer import (
    TrainConfig,
    Trainer,
    TrainingLog,
    ValidationMonitor,
    check_steps,
    evaluate_checkpoint,
    train,
)
from straightkit.utils.errors import DataError, InvalidArgumentError, ResolutionMismatchError, TrainingAborted

GRAD_TOL = dict(eps=1e-3, atol=1e-5, rtol=1e-3)


def _zero_parameters(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


@pytest.fixture
def tiny_dataset(small_chromosome):
    _, pair = extract_backbone(small_chromosome, stick_width=9)
    return build_augmented_dataset(small_chromosome, pair.curved, k=20, seed=0, sigma=4.5)


# Generator and discriminator


def test_generator_preserves_shape():
    gen = init_weights(UNetGenerator(), seed=0)
    out = generator_forward(gen, torch.rand(1, 1, 64, 64) * 2 - 1, training=True)
    assert out.shape == (1, 1, 64, 64)


def test_generator_zero_parameters_give_zero():
    gen = _zero_parameters(UNetGenerator()).eval()
    assert torch.count_nonzero(gen(torch.rand(2, 1, 64, 64))) == 0


def test_generator_inference_is_deterministic_and_bounded():
    gen = init_weights(UNetGenerator(), seed=1)
    x = torch.rand(2, 1, 64, 64) * 2 - 1
    a = generator_forward(gen, x, training=False)
    b = generator_forward(gen, x, training=False)
    assert torch.equal(a, b)
    assert a.abs().max() < 1.0


def test_generator_input_errors():
    gen = UNetGenerator()
    with pytest.raises(InvalidArgumentError):
        gen(torch.zeros(1, 1, 60, 64))
    with pytest.raises(InvalidArgumentError):
        gen(torch.zeros(1, 2, 64, 64))
    with pytest.raises(InvalidArgumentError):
        gen(torch.zeros(1, 64, 64))


def test_dropout_is_the_only_noise():
    gen = init_weights(UNetGenerator(), seed=2)
    x = torch.rand(1, 1, 64, 64)
    torch.manual_seed(0)
    a = generator_forward(gen, x, training=True)
    torch.manual_seed(1)
    b = generator_forward(gen, x, training=True)
    assert not torch.equal(a, b)


def test_patch_map_shape():
    """Test 3 strided + 2 flat layers map 64x64 to a 6x6 patch grid"""
    disc = init_weights(PatchDiscriminator(), seed=0)
    x = torch.rand(1, 1, 64, 64)
    assert disc(x, x).shape == (1, 1, 6, 6)
    assert patch_map_size(64) == 6


def test_discriminator_zero_parameters_and_batch_independence():
    x, y = torch.rand(3, 1, 64, 64), torch.rand(3, 1, 64, 64)
    assert torch.count_nonzero(_zero_parameters(PatchDiscriminator()).eval()(x, y)) == 0

    disc = init_weights(PatchDiscriminator(), seed=3).eval()
    perm = torch.tensor([2, 0, 1])
    with torch.no_grad():
        assert torch.allclose(disc(x, y)[perm], disc(x[perm], y[perm]), atol=1e-6)
    with pytest.raises(InvalidArgumentError):
        disc(x, y[:, :, :32])


# Losses


def test_discriminator_loss_examples():
    ones, zeros = torch.ones(1, 1, 6, 6), torch.zeros(1, 1, 6, 6)
    assert discriminator_loss(ones, zeros).item() == 0.0
    assert discriminator_loss(zeros, ones).item() == 2.0


def test_discriminator_loss_matches_elementwise_loop():
    gen = torch.Generator().manual_seed(0)
    real, fake = torch.randn(2, 1, 5, 5, generator=gen), torch.randn(2, 1, 5, 5, generator=gen)
    expected = sum((v - 1.0) ** 2 for v in real.flatten().tolist()) / real.numel()
    expected += sum(v ** 2 for v in fake.flatten().tolist()) / fake.numel()
    assert discriminator_loss(real, fake).item() == pytest.approx(expected, rel=1e-6)


def test_generator_loss_examples():
    ones = torch.ones(1, 1, 6, 6)
    y = torch.zeros(1, 1, 4, 4)
    total, parts = generator_loss(ones, y.clone(), y, 100.0)
    assert total.item() == 0.0
    total, parts = generator_loss(ones, y + 0.25, y, 1.0)
    assert total.item() == pytest.approx(0.25)
    assert parts["l1"].item() == pytest.approx(0.25)

    d_fake = torch.rand(1, 1, 6, 6)
    total, _ = generator_loss(d_fake, torch.rand(1, 1, 4, 4), y, 0.0)
    assert total.item() == pytest.approx(adversarial_loss(d_fake).item())


def test_l1_gradient_sign():
    """Test d mean|y - y_hat| / d y_hat = +1/N where y_hat > y"""
    y = torch.zeros(1, 1, 4, 4)
    y_hat = torch.full((1, 1, 4, 4), 0.5, requires_grad=True)
    l1_loss(y_hat, y).backward()
    assert torch.allclose(y_hat.grad, torch.full_like(y_hat, 1 / 16))


def test_backward_requires_a_recorded_forward():
    with pytest.raises(InvalidArgumentError):
        backward(torch.tensor(1.0), UNetGenerator(depth=2))


def test_zero_loss_gives_zero_gradients():
    gen = init_weights(UNetGenerator(depth=2, base_channels=4), seed=0).eval()
    x = torch.rand(1, 1, 16, 16)
    target = gen(x).detach()
    grads = backward(l1_loss(gen(x), target), gen)
    assert set(grads) == {name for name, _ in gen.named_parameters()}
    assert all(torch.count_nonzero(g) == 0 for g in grads.values())


# Gradient checks (64-bit, central differences with eps = 1e-3)


def _rand(*shape, seed=0, away_from_zero=False):
    gen = torch.Generator().manual_seed(seed)
    t = torch.randn(*shape, generator=gen, dtype=torch.float64)
    if away_from_zero:
        t = torch.sign(t) * (0.1 + t.abs())
    return t.requires_grad_()


def test_gradcheck_convolutions():
    x, w, b = _rand(1, 2, 8, 8, seed=1), _rand(3, 2, 4, 4, seed=2), _rand(3, seed=3)
    assert gradcheck(lambda x, w, b: F.conv2d(x, w, b, stride=2, padding=1), (x, w, b), **GRAD_TOL)
    wt = _rand(2, 3, 4, 4, seed=4)
    assert gradcheck(lambda x, w, b: F.conv_transpose2d(x, w, b, stride=2, padding=1), (x, wt, b), **GRAD_TOL)


def test_gradcheck_activations():
    x = _rand(2, 3, 4, 4, seed=5, away_from_zero=True)
    assert gradcheck(lambda t: F.leaky_relu(t, 0.2), (x,), **GRAD_TOL)
    assert gradcheck(F.relu, (x,), **GRAD_TOL)
    assert gradcheck(torch.tanh, (x,), **GRAD_TOL)


def test_gradcheck_dropout_concat_and_norm():
    def fixed_dropout(t):
        torch.manual_seed(0)
        return F.dropout(t, 0.5, training=True)

    a, b = _rand(2, 3, 4, 4, seed=6), _rand(2, 2, 4, 4, seed=7)
    assert gradcheck(fixed_dropout, (a,), **GRAD_TOL)
    assert gradcheck(lambda p, q: torch.cat([p, q], dim=1), (a, b), **GRAD_TOL)
    weight, bias = _rand(3, seed=8), _rand(3, seed=9)
    assert gradcheck(lambda t, w, c: F.batch_norm(t, None, None, w, c, training=True), (a, weight, bias), **GRAD_TOL)


def test_gradcheck_losses():
    real, fake = _rand(2, 1, 3, 3, seed=10), _rand(2, 1, 3, 3, seed=11)
    assert gradcheck(discriminator_loss, (real, fake), **GRAD_TOL)
    y = _rand(2, 1, 4, 4, seed=12).detach()
    y_pred = (y + _rand(2, 1, 4, 4, seed=13, away_from_zero=True)).detach().requires_grad_()
    assert gradcheck(lambda d, p: generator_loss(d, p, y, 100.0)[0], (fake, y_pred), **GRAD_TOL)


def _kink_margin(gen, x):
    """Smallest |pre-activation| at a ReLU / LeakyReLU in one forward pass"""
    margins = []
    hooks = [
        m.register_forward_hook(lambda mod, inp, out: margins.append(inp[0].abs().min().item()))
        for m in gen.modules()
        if isinstance(m, (torch.nn.ReLU, torch.nn.LeakyReLU))
    ]
    with torch.no_grad():
        gen(x)
    for h in hooks:
        h.remove()
    return min(margins)


def test_gradcheck_whole_generator():
    """Test every parameter gradient of a 2-level net on an 8x8 input"""
    for seed in range(100):
        gen = init_weights(UNetGenerator(depth=2, base_channels=4, dropout=0.0, norm="none"), std=0.5, seed=seed)
        gen = gen.double()
        x = _rand(1, 1, 8, 8, seed=seed).detach()
        if _kink_margin(gen, x) > 1e-2:
            break
    else:
        pytest.fail("no seed kept every pre-activation away from the ReLU kinks")

    names = [name for name, _ in gen.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_() for p in gen.parameters())

    def forward(*tensors):
        return functional_call(gen, dict(zip(names, tensors)), (x,))

    assert gradcheck(forward, params, **GRAD_TOL)


# Training protocol


def test_monitor_decays_at_ninth_stale_check_and_stops_at_27th():
    param = torch.nn.Parameter(torch.zeros(1))
    opt = torch.optim.Adam([param], lr=4e-5)
    monitor = ValidationMonitor([opt])
    assert monitor.step(1.0)
    lrs = []
    for stale in range(1, 28):
        assert not monitor.step(1.0)
        lrs.append(monitor.lr)
        assert monitor.should_stop == (stale >= 27)
    assert lrs[7] == pytest.approx(4e-5)
    assert lrs[8] == pytest.approx(3.2e-5)
    assert lrs[17] == pytest.approx(4e-5 * 0.8 ** 2)
    assert lrs[26] == pytest.approx(4e-5 * 0.8 ** 3)


def test_monitor_resets_on_improvement():
    opt = torch.optim.Adam([torch.nn.Parameter(torch.zeros(1))], lr=1.0)
    monitor = ValidationMonitor([opt], decay_patience=2, stop_patience=3)
    monitor.step(1.0)
    monitor.step(2.0)
    assert monitor.step(0.5)
    assert monitor.stale == 0 and not monitor.should_stop


def test_check_steps():
    assert check_steps(10, 3) == [3, 7, 10]
    assert check_steps(2, 3) == [1, 2]


def test_train_config_validation():
    for bad in (dict(lr=0.0), dict(decay_factor=1.0), dict(stop_patience=5), dict(l1_weight=-1.0)):
        with pytest.raises(InvalidArgumentError):
            TrainConfig(**bad)


def test_training_log_lines(tmp_path):
    log = TrainingLog(tmp_path / "log.txt")
    log.log_check(1, 1, 4e-5, 0.5, 0.25)
    log.log_check(2, 1, 4e-5, 0.4, 0.2, train_adv=0.9)
    lines = (tmp_path / "log.txt").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "1, 1, 4.000000e-05, 0.500000, 0.250000"
    assert lines[2].endswith(", 0.900000")
    TrainingLog(tmp_path / "log.txt").log_check(3, 2, 4e-5, 0.3, 0.2)
    assert len((tmp_path / "log.txt").read_text().splitlines()) == 4


def _fast_config(**overrides):
    values = dict(lr=5e-4, batch_size=4, decay_patience=1000, stop_patience=1000, max_epochs=1000, threads=1)
    values.update(overrides)
    return TrainConfig(**values)


def test_overfit_smoke(tiny_dataset):
    """Test 200 u_net_only steps halve the training L1"""
    run = Trainer(tiny_dataset, _fast_config(max_steps=200), mode="u_net_only")
    initial = run.evaluate(run.train_set)
    run.fit()
    assert run.step_count == 200
    assert run.evaluate(run.train_set) <= 0.5 * initial


def test_single_pair_l1_falls_window_by_window(small_chromosome):
    """Test training L1 on one repeated pair does not rise across 50-step windows"""
    _, pair = extract_backbone(small_chromosome, stick_width=9)
    repeated = build_augmented_dataset(small_chromosome, pair.curved, k=10, seed=0, sigma=0.0, max_angle=0.0)
    run = Trainer(repeated, _fast_config(dropout=0.0), mode="u_net_only")
    x, y = run.train_set.tensors
    losses = [run._update(x[:4], y[:4])[0] for _ in range(200)]
    windows = np.asarray(losses).reshape(4, 50).mean(axis=1)
    assert np.all(np.diff(windows) <= 0.0)


def test_updates_go_through_the_forward_operations(tiny_dataset, monkeypatch):
    calls = {"generator": 0, "discriminator": 0}

    def counted(name, forward):
        def wrapper(*args, **kwargs):
            calls[name] += 1
            return forward(*args, **kwargs)
        return wrapper

    monkeypatch.setattr(trainer_module, "generator_forward", counted("generator", trainer_module.generator_forward))
    monkeypatch.setattr(
        trainer_module, "discriminator_forward", counted("discriminator", trainer_module.discriminator_forward)
    )
    run = Trainer(tiny_dataset, _fast_config(max_steps=2), mode="pix2pix")
    x, y = run.train_set.tensors
    run._update(x[:4], y[:4])
    assert calls == {"generator": 1, "discriminator": 3}
    run.evaluate()
    assert calls["generator"] == 2


def test_training_is_deterministic(tiny_dataset):
    a = train(tiny_dataset, _fast_config(max_steps=6), mode="pix2pix")
    b = train(tiny_dataset, _fast_config(max_steps=6), mode="pix2pix")
    assert a.best_val_loss == b.best_val_loss
    for key in a.generator_state:
        assert torch.equal(a.generator_state[key], b.generator_state[key])


def test_checkpoint_loss_matches_reevaluation(tiny_dataset, tmp_path):
    ckpt = train(tiny_dataset, _fast_config(max_steps=10), mode="u_net_only", log_path=tmp_path / "log.txt")
    assert evaluate_checkpoint(ckpt, tiny_dataset, tiny_dataset.val_indices) == pytest.approx(
        ckpt.best_val_loss, abs=1e-6
    )
    assert (tmp_path / "log.txt").read_text().count("\n") >= 2


def test_stale_validation_stops_with_first_check_best(tiny_dataset, monkeypatch):
    """Test 27 stale checks end training and keep the first check"""
    monkeypatch.setattr(Trainer, "evaluate", lambda self, *args, **kwargs: 1.0)
    run = Trainer(tiny_dataset, _fast_config(lr=4e-5, decay_patience=9, stop_patience=27, base_channels=4))
    ckpt = run.fit()
    assert run.monitor.checks == 28
    assert ckpt.check_index == 1 and ckpt.epoch == 1
    assert run.monitor.lr == pytest.approx(4e-5 * 0.8 ** 3)
    assert run.log.records[9]["lr"] == pytest.approx(4e-5)
    assert run.log.records[10]["lr"] == pytest.approx(3.2e-5)


def test_non_finite_loss_aborts(tiny_dataset, monkeypatch):
    monkeypatch.setattr(trainer_module, "l1_loss", lambda a, b: (a - b).abs().mean() * float("nan"))
    with pytest.raises(TrainingAborted, match="non-finite"):
        train(tiny_dataset, _fast_config(max_steps=3), mode="u_net_only")


def test_empty_split_aborts(tiny_dataset):
    tiny_dataset.val_indices = []
    with pytest.raises(TrainingAborted):
        train(tiny_dataset, _fast_config(max_steps=3))


# Checkpoint and inference


def _checkpoint(size=64, zero=False):
    gen = UNetGenerator(depth=2, base_channels=4)
    gen = _zero_parameters(gen) if zero else init_weights(gen, seed=0)
    return Checkpoint.from_generator(gen, (size, size), best_val_loss=0.5, check_index=3, epoch=1, lr=4e-5)


def test_checkpoint_roundtrip(tmp_path):
    ckpt = _checkpoint()
    save_checkpoint(ckpt, tmp_path / "c.pt")
    loaded = load_checkpoint(tmp_path / "c.pt")
    assert loaded.meta() == ckpt.meta()
    for key, value in ckpt.generator_state.items():
        assert torch.equal(loaded.generator_state[key], value)
    (tmp_path / "bad.pt").write_bytes(b"garbage")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "bad.pt")


def test_straighten_with_zero_parameters_is_mid_gray():
    out = straighten(_checkpoint(zero=True), np.zeros((64, 64), dtype=np.float32))
    assert_allclose(out, 0.5)


def test_straighten_rejects_other_resolution():
    with pytest.raises(ResolutionMismatchError):
        straighten(_checkpoint(64), np.zeros((128, 128), dtype=np.float32))


def test_synthesize_batches_backbones():
    ckpt = _checkpoint()
    backbones = [np.zeros((64, 64), dtype=np.float32), np.full((64, 64), 0.5, dtype=np.float32)]
    outs = synthesize(ckpt, backbones)
    assert len(outs) == 2
    assert_allclose(outs[0], straighten(ckpt, backbones[0]), atol=1e-6)
    assert synthesize(ckpt, []) == []


def test_curvature_variants():
    cp = ControlPoints(np.column_stack([np.linspace(20, 44, 10), np.full(10, 32.0)]))
    straight, bent = make_curvature_variants(cp, 64, [0.0, 40.0], stick_width=5)
    assert_array_equal(straight, make_vertical_backbone(cp, 64, stick_width=5))
    assert not np.array_equal(straight, bent)
    points = bend_points(np.column_stack([np.arange(10.0), np.zeros(10)]), 90.0)
    assert_allclose(points[:6, 1], 0.0)
    assert_allclose(points[6:, 0], 5.0, atol=1e-9)
    assert_allclose(points[6:, 1], np.arange(1.0, 5.0), atol=1e-9)
