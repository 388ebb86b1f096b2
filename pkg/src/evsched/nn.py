"""Minimal dense-network substrate: float64 forward/backward passes, Adam,
and Polyak averaging. No autodiff; the few gradient paths the schedulers
need are written out by hand and checked against finite differences."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class DenseNet:
    """Fully connected ReLU network with a linear output layer.

    Parameters live in one flat float64 vector; per-layer weight and bias
    views alias into it so optimizer updates and checkpoints can treat the
    network as a single array.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, final_scale: float = 1.0):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"need at least input and output sizes >= 1, got {sizes}")
        self.sizes = sizes
        n_params = sum((i + 1) * o for i, o in zip(sizes[:-1], sizes[1:]))
        self.params = np.zeros(n_params, dtype=np.float64)
        self._views = []
        offset = 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = self.params[offset : offset + n_in * n_out].reshape(n_in, n_out)
            offset += n_in * n_out
            b = self.params[offset : offset + n_out]
            offset += n_out
            self._views.append((w, b))
        if rng is not None:
            for k, (w, b) in enumerate(self._views):
                bound = 1.0 / np.sqrt(w.shape[0])
                w[...] = rng.uniform(-bound, bound, size=w.shape)
                b[...] = rng.uniform(-bound, bound, size=b.shape)
            if final_scale != 1.0:
                w, b = self._views[-1]
                w *= final_scale
                b *= final_scale

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def n_layers(self) -> int:
        return len(self._views)

    def copy(self) -> "DenseNet":
        clone = DenseNet(self.sizes)
        clone.params[:] = self.params
        return clone

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x, keep=False)
        return out

    def forward_cached(self, x: np.ndarray, keep: bool = True):
        """Run the network; optionally keep activations for backward().

        Accepts (n_in,) or (batch, n_in); output shape mirrors the input.
        """
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {a.shape[1]} != expected {self.sizes[0]}")
        inputs = []
        masks = []
        last = self.n_layers - 1
        for k, (w, b) in enumerate(self._views):
            if keep:
                inputs.append(a)
            z = a @ w + b
            if k < last:
                mask = z > 0.0
                a = np.where(mask, z, 0.0)
                if keep:
                    masks.append(mask)
            else:
                a = z
        out = a[0] if squeeze else a
        return out, ((inputs, masks) if keep else None)

    def backward(self, cache, upstream: np.ndarray, need_input_grad: bool = False):
        """Backpropagate ``upstream`` (d loss / d output, summed over batch).

        Returns (flat parameter gradients, input gradient or None). The
        parameter gradient is the sum over the batch; scale the upstream for
        means.
        """
        inputs, masks = cache
        delta = np.asarray(upstream, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        grads = np.zeros_like(self.params)
        offset = self.params.size
        input_grad = None
        for k in range(self.n_layers - 1, -1, -1):
            w, b = self._views[k]
            a_prev = inputs[k]
            offset -= b.size
            grads[offset : offset + b.size] = delta.sum(axis=0)
            offset -= w.size
            grads[offset : offset + w.size] = (a_prev.T @ delta).ravel()
            if k > 0:
                delta = (delta @ w.T) * masks[k - 1]
            elif need_input_grad:
                input_grad = delta @ w.T
        return grads, input_grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam update, in place.

    Non-finite gradients are reported and the step is skipped (state
    untouched) so a single bad batch cannot poison the moments.
    """
    if params.shape != grads.shape:
        raise ValueError("params and grads must have matching shapes")
    if not np.all(np.isfinite(grads)):
        logger.warning("adam_step: non-finite gradient, skipping update")
        return params
    state.step += 1
    state.m += (1.0 - state.beta1) * (grads - state.m)
    state.v += (1.0 - state.beta2) * (grads * grads - state.v)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def soft_update(target_params: np.ndarray, online_params: np.ndarray, eta: float) -> None:
    """Polyak average: target <- eta * online + (1 - eta) * target, in place."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    target_params *= 1.0 - eta
    target_params += eta * online_params
