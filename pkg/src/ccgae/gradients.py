"""Hand-derived backward passes and the finite-difference checker.

The backward functions return the loss plus exact gradients for every
parameter block.  Tied weights receive both their encode-side and decode-side
contributions summed, since tying is a constraint.  Conventions:

* ReLU derivative at exactly 0 is 0;
* the cross-entropy clip is treated as identity in the backward pass (it only
  activates in saturation);
* with a logistic output under cross-entropy the output delta collapses to
  (x_hat - target).

The finite-difference side evaluates the loss through the forward pass only,
so the two routes stay independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EPS_CLIP, Activation, LossKind, activate, loss_value
from .errors import DivergenceError
from .models import (
    DaeParams,
    GaeParams,
    dae_encode,
    dae_reconstruct,
    gae_decode_x_preact,
    gae_encode,
    gae_encode_preact,
    gae_reconstruct,
)
from .rng import RngStream


@dataclass
class GaeGradients:
    dwx: np.ndarray
    dwy: np.ndarray
    dwh: np.ndarray
    db_h: np.ndarray
    db_x: np.ndarray

    def blocks(self) -> dict[str, np.ndarray]:
        return {
            "wx": self.dwx,
            "wy": self.dwy,
            "wh": self.dwh,
            "b_h": self.db_h,
            "b_x": self.db_x,
        }


@dataclass
class DaeGradients:
    dw: np.ndarray
    db_h: np.ndarray
    db_out: np.ndarray
    dw_out: np.ndarray | None = None

    def blocks(self) -> dict[str, np.ndarray]:
        out = {"w": self.dw, "b_h": self.db_h, "b_out": self.db_out}
        if self.dw_out is not None:
            out["w_out"] = self.dw_out
        return out


def _act_deriv(act: Activation, preact: np.ndarray, output: np.ndarray) -> np.ndarray:
    if act is Activation.IDENTITY:
        return np.ones_like(preact)
    if act is Activation.LOGISTIC:
        return output * (1.0 - output)
    if act is Activation.RELU:
        return (preact > 0.0).astype(np.float64)
    raise ValueError(f"unknown activation {act!r}")


def _output_delta(
    kind: LossKind, output_act: Activation, target: np.ndarray, xhat: np.ndarray, a_o: np.ndarray
) -> np.ndarray:
    """d loss / d output-preactivation."""
    if kind is LossKind.SQUARED_ERROR:
        dloss = 2.0 * (xhat - target)
        return dloss * _act_deriv(output_act, a_o, xhat)
    if kind is LossKind.CROSS_ENTROPY:
        p = np.clip(xhat, EPS_CLIP, 1.0 - EPS_CLIP)
        if output_act is Activation.LOGISTIC:
            return p - target
        dloss = -target / p + (1.0 - target) / (1.0 - p)
        return dloss * _act_deriv(output_act, a_o, xhat)
    raise ValueError(f"unknown loss kind {kind!r}")


def _require_finite(loss: float) -> float:
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss!r} (exploded parameters?)")
    return loss


def gae_forward_backward(
    p: GaeParams,
    x_tilde: np.ndarray,
    y: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
) -> tuple[float, np.ndarray, GaeGradients]:
    """Loss, reconstruction, and exact parameter gradients in one pass."""
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    # encode
    fx = p.wx @ x_tilde  # (n_f,)
    fy = p.wy @ y  # (n_f,)
    m = fx * fy
    a_h = p.wh.T @ m + p.b_h
    h = activate(p.hidden_act, a_h)
    # decode (tied: same three matrices, transposed roles)
    fh = p.wh @ h
    d = fh * fy
    a_o = p.wx.T @ d + p.b_x
    xhat = activate(p.output_act, a_o)

    loss = _require_finite(loss_value(kind, target, xhat))

    delta_o = _output_delta(kind, p.output_act, np.asarray(target, dtype=np.float64), xhat, a_o)
    db_x = delta_o.copy()
    dd = p.wx @ delta_o  # through a_o = wx^T d
    dwx_dec = np.outer(d, delta_o)
    dfh = dd * fy
    dfy = dd * fh
    dwh_dec = np.outer(dfh, h)
    dh = p.wh.T @ dfh
    delta_h = dh * _act_deriv(p.hidden_act, a_h, h)
    db_h = delta_h.copy()
    dm = p.wh @ delta_h  # through a_h = wh^T m
    dwh_enc = np.outer(m, delta_h)
    dfx = dm * fy
    dfy += dm * fx
    dwx_enc = np.outer(dfx, x_tilde)
    grads = GaeGradients(
        dwx=dwx_enc + dwx_dec,
        dwy=np.outer(dfy, y),
        dwh=dwh_enc + dwh_dec,
        db_h=db_h,
        db_x=db_x,
    )
    return loss, xhat, grads


def gae_backward(
    p: GaeParams,
    x_tilde: np.ndarray,
    y: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
) -> tuple[float, GaeGradients]:
    loss, _, grads = gae_forward_backward(p, x_tilde, y, target, kind)
    return loss, grads


def dae_forward_backward(
    p: DaeParams,
    x_tilde: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
) -> tuple[float, np.ndarray, DaeGradients]:
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    a_h = p.w @ x_tilde + p.b_h
    h = activate(p.hidden_act, a_h)
    w_dec = p.w.T if p.tied else p.w_out
    a_o = w_dec @ h + p.b_out
    xhat = activate(p.output_act, a_o)

    loss = _require_finite(loss_value(kind, target, xhat))

    delta_o = _output_delta(kind, p.output_act, np.asarray(target, dtype=np.float64), xhat, a_o)
    db_out = delta_o.copy()
    dw_dec = np.outer(delta_o, h)  # (n_x, n_h)
    dh = w_dec.T @ delta_o
    delta_h = dh * _act_deriv(p.hidden_act, a_h, h)
    db_h = delta_h.copy()
    dw_enc = np.outer(delta_h, x_tilde)  # (n_h, n_x)
    if p.tied:
        grads = DaeGradients(dw=dw_enc + dw_dec.T, db_h=db_h, db_out=db_out)
    else:
        grads = DaeGradients(dw=dw_enc, db_h=db_h, db_out=db_out, dw_out=dw_dec)
    return loss, xhat, grads


def dae_backward(
    p: DaeParams,
    x_tilde: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
) -> tuple[float, DaeGradients]:
    loss, _, grads = dae_forward_backward(p, x_tilde, target, kind)
    return loss, grads


# -- batched kernels -------------------------------------------------------------
#
# Row-stacked versions of the backward passes, used by the training loop so a
# whole minibatch runs through a handful of matrix products.  Gradients come
# back summed over the rows; semantics match the per-example functions (the
# test suite pins the two routes together).


def _loss_rows(kind: LossKind, targets: np.ndarray, predictions: np.ndarray) -> np.ndarray:
    if kind is LossKind.SQUARED_ERROR:
        diff = targets - predictions
        return np.sum(diff * diff, axis=1)
    if kind is LossKind.CROSS_ENTROPY:
        p = np.clip(predictions, EPS_CLIP, 1.0 - EPS_CLIP)
        return -np.sum(targets * np.log(p) + (1.0 - targets) * np.log1p(-p), axis=1)
    raise ValueError(f"unknown loss kind {kind!r}")


def _activate_rows(act: Activation, preact: np.ndarray) -> np.ndarray:
    if act is Activation.IDENTITY:
        return preact
    if act is Activation.LOGISTIC:
        z = np.exp(-np.abs(preact))
        out = np.where(preact >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
        return np.clip(out, np.finfo(np.float64).tiny, 1.0 - np.finfo(np.float64).epsneg)
    if act is Activation.RELU:
        return np.maximum(preact, 0.0)
    raise ValueError(f"unknown activation {act!r}")


def gae_forward_backward_batch(
    p: GaeParams,
    x_tilde_rows: np.ndarray,
    y_rows: np.ndarray,
    target_rows: np.ndarray,
    kind: LossKind,
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Per-row losses, reconstructions, and gradients summed over rows."""
    fx = x_tilde_rows @ p.wx.T  # (b, n_f)
    fy = y_rows @ p.wy.T
    m = fx * fy
    a_h = m @ p.wh + p.b_h  # (b, n_h)
    h = _activate_rows(p.hidden_act, a_h)
    fh = h @ p.wh.T
    d = fh * fy
    a_o = d @ p.wx + p.b_x  # (b, n_x)
    xhat = _activate_rows(p.output_act, a_o)

    losses = _loss_rows(kind, target_rows, xhat)
    if not np.all(np.isfinite(losses)):
        raise DivergenceError("non-finite loss in batch (exploded parameters?)")

    delta_o = _output_delta(kind, p.output_act, target_rows, xhat, a_o)
    dd = delta_o @ p.wx.T
    dwx = d.T @ delta_o  # decode side
    dfh = dd * fy
    dfy = dd * fh
    dwh = dfh.T @ h  # decode side
    dh = dfh @ p.wh
    delta_h = dh * _act_deriv(p.hidden_act, a_h, h)
    dm = delta_h @ p.wh.T
    dwh += m.T @ delta_h  # encode side
    dfx = dm * fy
    dfy += dm * fx
    dwx += dfx.T @ x_tilde_rows  # encode side
    grads = {
        "wx": dwx,
        "wy": dfy.T @ y_rows,
        "wh": dwh,
        "b_h": delta_h.sum(axis=0),
        "b_x": delta_o.sum(axis=0),
    }
    return losses, xhat, grads


def dae_forward_backward_batch(
    p: DaeParams,
    x_tilde_rows: np.ndarray,
    target_rows: np.ndarray,
    kind: LossKind,
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    a_h = x_tilde_rows @ p.w.T + p.b_h  # (b, n_h)
    h = _activate_rows(p.hidden_act, a_h)
    w_dec = p.w.T if p.tied else p.w_out
    a_o = h @ w_dec.T + p.b_out  # (b, n_x)
    xhat = _activate_rows(p.output_act, a_o)

    losses = _loss_rows(kind, target_rows, xhat)
    if not np.all(np.isfinite(losses)):
        raise DivergenceError("non-finite loss in batch (exploded parameters?)")

    delta_o = _output_delta(kind, p.output_act, target_rows, xhat, a_o)
    dw_dec = delta_o.T @ h  # (n_x, n_h)
    dh = delta_o @ w_dec
    delta_h = dh * _act_deriv(p.hidden_act, a_h, h)
    dw_enc = delta_h.T @ x_tilde_rows  # (n_h, n_x)
    grads = {"b_h": delta_h.sum(axis=0), "b_out": delta_o.sum(axis=0)}
    if p.tied:
        grads["w"] = dw_enc + dw_dec.T
    else:
        grads["w"] = dw_enc
        grads["w_out"] = dw_dec
    return losses, xhat, grads


# -- finite-difference oracle --------------------------------------------------


def central_differences(loss_at, params: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """Numerical gradient (L(p + eps e_i) - L(p - eps e_i)) / 2 eps per coordinate."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    params = np.asarray(params, dtype=np.float64)
    work = params.copy()
    num = np.empty_like(work)
    for i in range(work.shape[0]):
        orig = work[i]
        work[i] = orig + epsilon
        up = loss_at(work)
        work[i] = orig - epsilon
        down = loss_at(work)
        work[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise DivergenceError(f"non-finite loss during finite differences at coordinate {i}")
        num[i] = (up - down) / (2.0 * epsilon)
    return num


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def finite_diff_check(loss_at, params: np.ndarray, grad: np.ndarray, epsilon: float = 1e-5) -> float:
    """Max relative error of the analytic gradient against central differences."""
    grad = np.asarray(grad, dtype=np.float64)
    numeric = central_differences(loss_at, params, epsilon)
    return float(relative_errors(grad, numeric).max())


def _flatten_blocks(blocks: dict[str, np.ndarray], names) -> np.ndarray:
    return np.concatenate([np.ravel(blocks[name]) for name in names])


def _block_layout(params) -> list[tuple[str, slice, tuple[int, ...]]]:
    layout = []
    offset = 0
    for name, arr in params.blocks().items():
        size = arr.size
        layout.append((name, slice(offset, offset + size), arr.shape))
        offset += size
    return layout


def _rebuild(params, vec: np.ndarray):
    blocks = {}
    for name, sl, shape in _block_layout(params):
        blocks[name] = vec[sl].reshape(shape).copy()
    return params.with_blocks(blocks)


def gae_finite_diff_errors(
    p: GaeParams,
    x_tilde: np.ndarray,
    y: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
    epsilon: float = 1e-5,
) -> dict[str, float]:
    """Per-block max relative error of gae_backward against central differences."""

    def loss_at(vec):
        return loss_value(kind, target, gae_reconstruct(_rebuild(p, vec), x_tilde, y))

    _, grads = gae_backward(p, x_tilde, y, target, kind)
    flat = _flatten_blocks(p.blocks(), p.block_names())
    analytic = _flatten_blocks(grads.blocks(), p.block_names())
    rel = relative_errors(analytic, central_differences(loss_at, flat, epsilon))
    return {name: float(rel[sl].max()) for name, sl, _ in _block_layout(p)}


def dae_finite_diff_errors(
    p: DaeParams,
    x_tilde: np.ndarray,
    target: np.ndarray,
    kind: LossKind,
    epsilon: float = 1e-5,
) -> dict[str, float]:
    """Per-block max relative error of dae_backward against central differences."""

    def loss_at(vec):
        return loss_value(kind, target, dae_reconstruct(_rebuild(p, vec), x_tilde))

    _, grads = dae_backward(p, x_tilde, target, kind)
    flat = _flatten_blocks(p.blocks(), p.block_names())
    analytic = _flatten_blocks(grads.blocks(), p.block_names())
    rel = relative_errors(analytic, central_differences(loss_at, flat, epsilon))
    return {name: float(rel[sl].max()) for name, sl, _ in _block_layout(p)}


# -- seeded random instances for gradient checking ------------------------------

_KINK_MARGIN = 1e-3  # finite differences stay this far from ReLU kinks

# Central differences at eps=1e-5 carry ~1e-10 absolute rounding noise, so a
# true gradient coordinate below this cannot be certified at the 1e-4 relative
# threshold; instances containing one are resampled.  Exact zeros are fine
# (a parameter with no influence leaves the loss bit-identical on both sides).
_TINY_GRAD = 3e-5


def _binary_or_unit(rng: RngStream, n: int, kind: LossKind) -> np.ndarray:
    if kind is LossKind.CROSS_ENTROPY:
        return (rng.random(n) < 0.5).astype(np.float64)
    return rng.uniform(0.0, 1.0, n)


def _has_uncheckable_coordinate(grad_blocks: dict[str, np.ndarray]) -> bool:
    for block in grad_blocks.values():
        mags = np.abs(block)
        if np.any((mags > 0.0) & (mags < _TINY_GRAD)):
            return True
    return False


def random_gae_instance(
    n_x: int,
    n_y: int,
    n_f: int,
    n_h: int,
    kind: LossKind,
    hidden_act: Activation,
    output_act: Activation,
    rng: RngStream,
) -> tuple[GaeParams, np.ndarray, np.ndarray, np.ndarray]:
    """Random params/input/label/target, resampled until finite differences
    can certify every coordinate (clear of ReLU kinks, the loss clip, and the
    tiny-gradient noise floor)."""
    for _ in range(200):
        p = GaeParams(
            wx=rng.normal(0.0, 0.6, (n_f, n_x)),
            wy=rng.normal(0.0, 0.6, (n_f, n_y)),
            wh=rng.normal(0.0, 0.6, (n_f, n_h)),
            b_h=rng.normal(0.0, 0.1, n_h),
            b_x=rng.normal(0.0, 0.1, n_x),
            hidden_act=hidden_act,
            output_act=output_act,
        )
        x_tilde = rng.uniform(0.0, 1.0, n_x)
        hot = int(rng.gen.integers(n_y))
        y = np.zeros(n_y)
        y[hot] = 1.0
        target = _binary_or_unit(rng, n_x, kind)
        a_h = gae_encode_preact(p, x_tilde, y)
        a_o = gae_decode_x_preact(p, gae_encode(p, x_tilde, y), y)
        if hidden_act is Activation.RELU and np.abs(a_h).min() < _KINK_MARGIN:
            continue
        if output_act is Activation.RELU and np.abs(a_o).min() < _KINK_MARGIN:
            continue
        if kind is LossKind.CROSS_ENTROPY and np.abs(a_o).max() > 14.0:
            continue  # keep the loss clip inactive
        _, grads = gae_backward(p, x_tilde, y, target, kind)
        if _has_uncheckable_coordinate(grads.blocks()):
            continue
        return p, x_tilde, y, target
    raise RuntimeError("could not sample an instance clear of activation kinks")


def random_dae_instance(
    n_x: int,
    n_h: int,
    kind: LossKind,
    hidden_act: Activation,
    output_act: Activation,
    rng: RngStream,
    tied: bool = True,
) -> tuple[DaeParams, np.ndarray, np.ndarray]:
    for _ in range(200):
        p = DaeParams(
            w=rng.normal(0.0, 0.6, (n_h, n_x)),
            b_h=rng.normal(0.0, 0.1, n_h),
            b_out=rng.normal(0.0, 0.1, n_x),
            hidden_act=hidden_act,
            output_act=output_act,
            w_out=None if tied else rng.normal(0.0, 0.6, (n_x, n_h)),
        )
        x_tilde = rng.uniform(0.0, 1.0, n_x)
        target = _binary_or_unit(rng, n_x, kind)
        a_h = p.w @ x_tilde + p.b_h
        h = dae_encode(p, x_tilde)
        w_dec = p.w.T if tied else p.w_out
        a_o = w_dec @ h + p.b_out
        if hidden_act is Activation.RELU and np.abs(a_h).min() < _KINK_MARGIN:
            continue
        if output_act is Activation.RELU and np.abs(a_o).min() < _KINK_MARGIN:
            continue
        if kind is LossKind.CROSS_ENTROPY and np.abs(a_o).max() > 14.0:
            continue
        _, grads = dae_backward(p, x_tilde, target, kind)
        if _has_uncheckable_coordinate(grads.blocks()):
            continue
        return p, x_tilde, target
    raise RuntimeError("could not sample an instance clear of activation kinks")
