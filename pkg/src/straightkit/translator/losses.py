"""
Training objective: least-squares adversarial loss plus weighted L1

D is pushed towards 1 on real pairs and 0 on generated ones; G is pushed
towards 1 on its own output. The printed objective of the source swaps the
two targets; the usual convention is used here.
"""

import torch

from straightkit.utils.errors import InvalidArgumentError


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def discriminator_loss(d_real, d_fake):
    _same_shape(d_real, d_fake, "discriminator_loss")
    return ((d_real - 1.0) ** 2).mean() + (d_fake ** 2).mean()


def l1_loss(y_pred, y):
    _same_shape(y_pred, y, "l1_loss")
    return (y - y_pred).abs().mean()


def adversarial_loss(d_fake):
    return ((d_fake - 1.0) ** 2).mean()


def generator_loss(d_fake, y_pred, y, l1_weight):
    """Returns (total, {"adv": ..., "l1": ...}); total = adv + lambda * l1"""
    l1 = l1_loss(y_pred, y)
    adv = adversarial_loss(d_fake)
    return adv + l1_weight * l1, {"adv": adv, "l1": l1}


def backward(loss, module):
    """
    Back-propagate loss and return {parameter name: gradient} for module.

    Parameters the loss does not reach get an all-zero gradient.
    """
    if not torch.is_tensor(loss) or loss.grad_fn is None:
        raise InvalidArgumentError("backward called before a forward pass was recorded")
    loss.backward()
    grads = {}
    for name, param in module.named_parameters():
        if param.grad is None:
            param.grad = torch.zeros_like(param)
        grads[name] = param.grad
    return grads
