"""Reference LSTM layer with utterance-wise recurrent dropout.

Gates::

    i = sigmoid(W_i dx_i(x_t) + U_i dh_i(h_{t-1}) + b_i)     (same for f, o)
    g = tanh   (W_g dx_g(x_t) + U_g dh_g(h_{t-1}) + b_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

The four ``dh_*`` masks are drawn once per utterance and reused at every
frame; the four ``dx_*`` masks are redrawn every frame. Kept units are scaled
by ``1 / (1 - rate)``. Everything is float64 numpy and meant for small
models and gradient checks, not training.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import DimMismatch

GATES = ("i", "f", "o", "g")
DEFAULT_DROPOUT = 0.2


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LstmParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        hidden, inp = np.shape(self.W_i)
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name), dtype=np.float64)
            want = {"W": (hidden, inp), "U": (hidden, hidden), "b": (hidden,)}[f.name[0]]
            if arr.shape != want:
                raise DimMismatch(f"{f.name} has shape {arr.shape}, expected {want}")
            setattr(self, f.name, arr)

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_i.shape[0]

    def names(self) -> list[str]:
        return [f.name for f in fields(self)]

    def copy(self) -> "LstmParams":
        return LstmParams(**{n: getattr(self, n).copy() for n in self.names()})

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        shapes = {"W": (hidden_dim, input_dim), "U": (hidden_dim, hidden_dim), "b": (hidden_dim,)}
        return cls(**{f"{k}_{g}": np.zeros(shapes[k]) for k in "WUb" for g in GATES})

    @classmethod
    def random(cls, input_dim: int, hidden_dim: int, scale: float = 0.5, seed: int = 0) -> "LstmParams":
        rng = np.random.default_rng(seed)
        p = cls.zeros(input_dim, hidden_dim)
        for n in p.names():
            setattr(p, n, rng.uniform(-scale, scale, size=getattr(p, n).shape))
        return p


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


@dataclass
class DropoutPlan:
    """Pre-sampled dropout masks for one utterance.

    Masks hold ``0`` for dropped units and ``1 / (1 - rate)`` for kept ones.
    ``recurrent_masks`` has shape (4, hidden); ``input_masks`` has shape
    (frames, 4, input), gate order i, f, o, g.
    """

    rate: float
    recurrent_masks: np.ndarray
    input_masks: np.ndarray
    seed: Optional[int] = None

    @property
    def scale(self) -> float:
        return 1.0 / (1.0 - self.rate)

    @property
    def frames(self) -> int:
        return self.input_masks.shape[0]

    @classmethod
    def sample(cls, rate: float, frames: int, input_dim: int, hidden_dim: int, seed: int) -> "DropoutPlan":
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        rng = np.random.default_rng(seed)
        keep = 1.0 - rate
        scale = 1.0 / keep
        rec = (rng.random((4, hidden_dim)) < keep) * scale
        inp = (rng.random((frames, 4, input_dim)) < keep) * scale
        return cls(rate, rec.astype(np.float64), inp.astype(np.float64), seed)


def _check(p: LstmParams, x: np.ndarray, state: LstmState) -> None:
    if x.shape != (p.input_dim,):
        raise DimMismatch(f"input has shape {x.shape}, expected ({p.input_dim},)")
    if state.h.shape != (p.hidden_dim,) or state.c.shape != (p.hidden_dim,):
        raise DimMismatch(f"state does not match hidden size {p.hidden_dim}")


def _step(p: LstmParams, xs, hs, c_prev):
    """One step given per-gate (already masked) inputs and hidden vectors."""
    pre = {
        g: getattr(p, f"W_{g}") @ xs[k] + getattr(p, f"U_{g}") @ hs[k] + getattr(p, f"b_{g}")
        for k, g in enumerate(GATES)
    }
    i, f, o = sigmoid(pre["i"]), sigmoid(pre["f"]), sigmoid(pre["o"])
    g = np.tanh(pre["g"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (i, f, o, g, tc)


def lstm_step(p: LstmParams, x_t, state: LstmState) -> LstmState:
    x_t = np.asarray(x_t, dtype=np.float64)
    _check(p, x_t, state)
    h, c, _ = _step(p, (x_t,) * 4, (state.h,) * 4, state.c)
    return LstmState(h, c)


def _masked(plan: DropoutPlan, x_t, h_prev, t: int):
    xs = tuple(x_t * plan.input_masks[t, k] for k in range(4))
    hs = tuple(h_prev * plan.recurrent_masks[k] for k in range(4))
    return xs, hs


def lstm_step_dropout(p: LstmParams, x_t, state: LstmState, plan: DropoutPlan, t: int) -> LstmState:
    x_t = np.asarray(x_t, dtype=np.float64)
    _check(p, x_t, state)
    if plan.recurrent_masks.shape != (4, p.hidden_dim) or plan.input_masks.shape[1:] != (4, p.input_dim):
        raise DimMismatch("dropout plan does not match layer dimensions")
    if not 0 <= t < plan.frames:
        raise DimMismatch(f"frame {t} outside plan of {plan.frames} frames")
    xs, hs = _masked(plan, x_t, state.h, t)
    h, c, _ = _step(p, xs, hs, state.c)
    return LstmState(h, c)


def lstm_forward(p: LstmParams, sequence, plan: Optional[DropoutPlan] = None) -> np.ndarray:
    """Run the layer over ``sequence`` (frames x input) from a zero state."""
    return _forward(p, sequence, plan)[0]


def _forward(p: LstmParams, sequence, plan):
    seq = np.asarray(sequence, dtype=np.float64).reshape(-1, p.input_dim)
    if plan is not None and plan.frames < seq.shape[0]:
        raise DimMismatch(f"plan covers {plan.frames} frames, sequence has {seq.shape[0]}")
    state = LstmState.zeros(p.hidden_dim)
    out = np.zeros((seq.shape[0], p.hidden_dim))
    cache = []
    for t, x_t in enumerate(seq):
        if plan is None:
            xs, hs = (x_t,) * 4, (state.h,) * 4
        else:
            xs, hs = _masked(plan, x_t, state.h, t)
        h, c, acts = _step(p, xs, hs, state.c)
        cache.append((xs, hs, state.c, acts))
        state = LstmState(h, c)
        out[t] = h
    return out, cache


def lstm_backward(p: LstmParams, sequence, d_out, plan: Optional[DropoutPlan] = None):
    """Backpropagation through time.

    ``d_out`` is dL/dh_t for every frame. Returns ``(grads, d_sequence)``
    where ``grads`` maps parameter names to arrays. Dropout masks are treated
    as constants.
    """
    seq = np.asarray(sequence, dtype=np.float64).reshape(-1, p.input_dim)
    _, cache = _forward(p, seq, plan)
    grads = {n: np.zeros_like(getattr(p, n)) for n in p.names()}
    d_seq = np.zeros_like(seq)
    dh_next = np.zeros(p.hidden_dim)
    dc_next = np.zeros(p.hidden_dim)
    for t in range(seq.shape[0] - 1, -1, -1):
        xs, hs, c_prev, (i, f, o, g, tc) = cache[t]
        dh = d_out[t] + dh_next
        dc = dh * o * (1.0 - tc**2) + dc_next
        da = {
            "i": dc * g * i * (1.0 - i),
            "f": dc * c_prev * f * (1.0 - f),
            "o": dh * tc * o * (1.0 - o),
            "g": dc * i * (1.0 - g**2),
        }
        dh_next = np.zeros(p.hidden_dim)
        for k, gate in enumerate(GATES):
            grads[f"W_{gate}"] += np.outer(da[gate], xs[k])
            grads[f"U_{gate}"] += np.outer(da[gate], hs[k])
            grads[f"b_{gate}"] += da[gate]
            dx = getattr(p, f"W_{gate}").T @ da[gate]
            dhk = getattr(p, f"U_{gate}").T @ da[gate]
            if plan is not None:
                dx = dx * plan.input_masks[t, k]
                dhk = dhk * plan.recurrent_masks[k]
            d_seq[t] += dx
            dh_next += dhk
        dc_next = dc * f
    return grads, d_seq


def sum_squares_loss(p: LstmParams, sequence, plan: Optional[DropoutPlan] = None) -> float:
    return float(np.sum(lstm_forward(p, sequence, plan) ** 2))


def analytic_gradients(p: LstmParams, sequence, plan: Optional[DropoutPlan] = None):
    out = lstm_forward(p, sequence, plan)
    return lstm_backward(p, sequence, 2.0 * out, plan)


def gradient_check(
    p: LstmParams,
    sequence,
    plan: Optional[DropoutPlan] = None,
    n_samples: int = 200,
    eps: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates are drawn from every parameter entry and every input entry.
    All coordinates are visited once; if ``n_samples`` exceeds their number
    the remainder is drawn at random with replacement. The relative error is
    ``|analytic - numeric| / max(|numeric|, 1e-8)``.
    """
    return gradient_check_details(p, sequence, plan, n_samples, eps, seed)["max_rel_error"]


def gradient_check_details(p, sequence, plan=None, n_samples=200, eps=1e-5, seed=0) -> dict:
    seq = np.asarray(sequence, dtype=np.float64).reshape(-1, p.input_dim)
    grads, d_seq = analytic_gradients(p, seq, plan)
    coords = [(n, idx) for n in p.names() for idx in np.ndindex(getattr(p, n).shape)]
    coords += [("x", idx) for idx in np.ndindex(seq.shape)]
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(coords)))
    if n_samples > len(order):
        order += list(rng.integers(0, len(coords), n_samples - len(order)))
    else:
        order = order[:n_samples]

    worst = 0.0
    for j in order:
        name, idx = coords[j]
        q, x = p.copy(), seq.copy()
        target = x if name == "x" else getattr(q, name)
        orig = target[idx]
        target[idx] = orig + eps
        up = sum_squares_loss(q, x, plan)
        target[idx] = orig - eps
        down = sum_squares_loss(q, x, plan)
        numeric = (up - down) / (2.0 * eps)
        analytic = d_seq[idx] if name == "x" else grads[name][idx]
        worst = max(worst, abs(analytic - numeric) / max(abs(numeric), 1e-8))
    return {"max_rel_error": float(worst), "checked": len(order), "distinct": len(set(order))}
