"""Small dense networks in numpy with hand-written backprop.

Parameters of a network live in one flat float64 vector; per-layer weights
and biases are views into it. That keeps Adam, target blending and
serialization to a single vector operation each.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"NAACPRM\x01"
KIND_DENSE, KIND_CRITIC, KIND_TABLE = 0, 1, 2


class StaleCacheError(RuntimeError):
    pass


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class _Cache:
    version: int
    inputs: list
    preacts: list
    squeeze: bool


class DenseNetwork:
    """Fully connected net: affine layers, ReLU on hidden layers.

    The output layer is linear unless ``output_relu`` is set (used for the
    critic's state branch). Weights are stored as (fan_in, fan_out).
    """

    def __init__(
        self,
        layer_dims,
        rng: np.random.Generator | None = None,
        *,
        output_relu: bool = False,
        init: str = "uniform",
        params: np.ndarray | None = None,
    ):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"need at least an input and an output width, got {dims}")
        self.layer_dims = tuple(dims)
        self.output_relu = output_relu
        n = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
        if params is None:
            params = np.zeros(n)
        elif params.shape != (n,):
            raise ValueError(f"parameter buffer has shape {params.shape}, need ({n},)")
        self.params = params
        self.weights, self.biases = self._views(self.params)
        self._act = [l < len(self.weights) - 1 or output_relu for l in range(len(self.weights))]
        self.version = 0
        if init == "uniform":
            if rng is None:
                raise ValueError("uniform init needs an rng")
            for W in self.weights:
                bound = 1.0 / np.sqrt(W.shape[0])
                W[...] = rng.uniform(-bound, bound, size=W.shape)
        elif init != "zeros":
            raise ValueError(f"unknown init {init!r}")

    def _views(self, flat):
        Ws, bs, off = [], [], 0
        for a, b in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            Ws.append(flat[off : off + a * b].reshape(a, b))
            off += a * b
            bs.append(flat[off : off + b])
            off += b
        return Ws, bs

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arch(self):
        return ("dense", self.layer_dims, self.output_relu)

    def bump(self):
        self.version += 1

    def copy(self) -> "DenseNetwork":
        net = DenseNetwork(self.layer_dims, output_relu=self.output_relu, init="zeros")
        net.params[:] = self.params
        return net

    def forward(self, x):
        a = np.asarray(x, dtype=float)
        squeeze = a.ndim == 1
        if squeeze:
            a = a[None, :]
        if a.shape[-1] != self.layer_dims[0]:
            raise ValueError(f"input width {a.shape[-1]} != {self.layer_dims[0]}")
        inputs, preacts = [], []
        for W, b, act in zip(self.weights, self.biases, self._act):
            inputs.append(a)
            z = a @ W
            z += b
            preacts.append(z)
            a = np.maximum(z, 0.0) if act else z
        out = a[0] if squeeze else a
        return out, _Cache(self.version, inputs, preacts, squeeze)

    def backward(self, cache: _Cache, grad_out):
        """Gradients of ``sum(output * grad_out)`` w.r.t. parameters and input."""
        if cache.version != self.version:
            raise StaleCacheError("parameters changed since the forward pass")
        g = np.asarray(grad_out, dtype=float)
        if cache.squeeze:
            g = g[None, :]
        grads = np.zeros_like(self.params)
        dWs, dbs = self._views(grads)
        for l in range(self.n_layers - 1, -1, -1):
            if self._act[l]:
                g = g * (cache.preacts[l] > 0)
            np.matmul(cache.inputs[l].T, g, out=dWs[l])
            dbs[l][...] = g.sum(axis=0)
            g = g @ self.weights[l].T
        return grads, (g[0] if cache.squeeze else g)


class CriticNetwork:
    """Q(s, a) with the state entering one hidden layer before the action joins.

    Layout: ``s -> FC(hidden) -> ReLU``, concatenate ``a``, then ``head``
    widths with ReLU, then a scalar. Parameters are [state layer | head].
    """

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator | None = None,
        *,
        hidden: int = 64,
        head=(64,),
        init: str = "uniform",
    ):
        self.state_dim, self.action_dim, self.hidden = int(state_dim), int(action_dim), int(hidden)
        self.head_widths = tuple(int(h) for h in head)
        s_dims = [self.state_dim, self.hidden]
        h_dims = [self.hidden + self.action_dim, *self.head_widths, 1]
        n_s = self.state_dim * self.hidden + self.hidden
        n_h = sum(a * b + b for a, b in zip(h_dims[:-1], h_dims[1:]))
        self.params = np.zeros(n_s + n_h)
        self.state_net = DenseNetwork(
            s_dims, rng, output_relu=True, init=init, params=self.params[:n_s]
        )
        self.head_net = DenseNetwork(h_dims, rng, init=init, params=self.params[n_s:])
        self._n_state = n_s

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def version(self) -> int:
        return self.state_net.version

    def arch(self):
        return ("critic", self.state_dim, self.action_dim, self.hidden, self.head_widths)

    def bump(self):
        self.state_net.bump()
        self.head_net.bump()

    def copy(self) -> "CriticNetwork":
        net = CriticNetwork(
            self.state_dim, self.action_dim, hidden=self.hidden, head=self.head_widths, init="zeros"
        )
        net.params[:] = self.params
        return net

    def forward(self, s, a):
        h, c_s = self.state_net.forward(s)
        z = np.concatenate([h, np.asarray(a, dtype=float)], axis=-1)
        q, c_h = self.head_net.forward(z)
        return q[..., 0], (c_s, c_h)

    def backward(self, cache, grad_q):
        """Returns (parameter gradient, d/ds, d/da) of ``sum(q * grad_q)``."""
        c_s, c_h = cache
        g_head, g_z = self.head_net.backward(c_h, np.asarray(grad_q)[..., None])
        g_h, g_a = g_z[..., : self.hidden], g_z[..., self.hidden :]
        g_state, g_s = self.state_net.backward(c_s, g_h)
        return np.concatenate([g_state, g_head]), g_s, g_a


@dataclass
class AdamState:
    lr: float
    m: np.ndarray
    v: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params: np.ndarray, lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=np.zeros_like(params), v=np.zeros_like(params), **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> None:
    """In-place Adam update with bias correction."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes must match")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * np.square(grads)
    # lr * m_hat / (sqrt(v_hat) + eps), computed with two temporaries
    denom = np.sqrt(state.v / (1.0 - b2**state.t))
    denom += state.eps
    step = state.m * (state.lr / (1.0 - b1**state.t))
    step /= denom
    params -= step


def apply_adam(net, grads: np.ndarray, state: AdamState) -> None:
    adam_step(net.params, grads, state)
    net.bump()


def soft_update(target, source, tau: float):
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.arch() != source.arch():
        raise ValueError(f"architecture mismatch: {target.arch()} vs {source.arch()}")
    target.params[:] = (1.0 - tau) * target.params + tau * source.params
    target.bump()
    return target


def softmax(z, axis=-1):
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def sample_gumbel(shape, stream: np.random.Generator) -> np.ndarray:
    u = np.clip(stream.random(shape), np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return -np.log(-np.log(u))


def gumbel_softmax(logits, noise, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return softmax((np.asarray(logits) + noise) / temperature)


def gumbel_softmax_backward(y, grad_y, temperature: float) -> np.ndarray:
    """d/dlogits of ``sum(y * grad_y)`` given the relaxed sample ``y``."""
    inner = np.sum(grad_y * y, axis=-1, keepdims=True)
    return y * (grad_y - inner) / temperature


def gumbel_softmax_sample(logits, temperature: float, stream: np.random.Generator):
    """Relaxed one-hot sample; returns ``(y, noise)`` so the draw can be replayed."""
    noise = sample_gumbel(np.shape(logits), stream)
    return gumbel_softmax(logits, noise, temperature), noise


def finite_diff_check(net, loss_fn, h: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences.

    ``loss_fn(net)`` must return ``(loss, flat_gradient)``. The relative error
    of coordinate j is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    """
    if net.n_params == 0:
        raise ValueError("network has no parameters")
    _, analytic = loss_fn(net)
    analytic = np.array(analytic, copy=True)
    numeric = np.empty_like(analytic)
    for j in range(net.n_params):
        orig = net.params[j]
        net.params[j] = orig + h
        net.bump()
        lp, _ = loss_fn(net)
        net.params[j] = orig - h
        net.bump()
        lm, _ = loss_fn(net)
        net.params[j] = orig
        net.bump()
        numeric[j] = (lp - lm) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


# serialization ---------------------------------------------------------------


def _pack(kind: int, flags: int, dims, values: np.ndarray) -> bytes:
    values = np.ascontiguousarray(values, dtype="<f8").ravel()
    head = _MAGIC + struct.pack("<BBHI", kind, flags, 0, len(dims))
    head += struct.pack(f"<{len(dims)}I", *dims) + struct.pack("<Q", values.size)
    return head + values.tobytes()


def _unpack(blob: bytes):
    if blob[:8] != _MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    kind, flags, _, n_dims = struct.unpack_from("<BBHI", blob, 8)
    off = 16
    dims = struct.unpack_from(f"<{n_dims}I", blob, off)
    off += 4 * n_dims
    (n_vals,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if len(blob) != off + 8 * n_vals:
        raise ValueError("parameter file truncated or padded")
    values = np.frombuffer(blob, dtype="<f8", count=n_vals, offset=off).astype(float)
    return kind, flags, list(dims), values


def to_bytes(obj) -> bytes:
    if isinstance(obj, DenseNetwork):
        return _pack(KIND_DENSE, int(obj.output_relu), obj.layer_dims, obj.params)
    if isinstance(obj, CriticNetwork):
        dims = [obj.state_dim, obj.action_dim, obj.hidden, *obj.head_widths]
        return _pack(KIND_CRITIC, 0, dims, obj.params)
    table = np.asarray(obj, dtype=float)
    if table.ndim != 2:
        raise TypeError("expected a network or a 2-D table")
    return _pack(KIND_TABLE, 0, table.shape, table)


def from_bytes(blob: bytes):
    kind, flags, dims, values = _unpack(blob)
    if kind == KIND_DENSE:
        obj = DenseNetwork(dims, output_relu=bool(flags & 1), init="zeros")
    elif kind == KIND_CRITIC:
        obj = CriticNetwork(dims[0], dims[1], hidden=dims[2], head=dims[3:], init="zeros")
    elif kind == KIND_TABLE:
        return values.reshape(dims)
    else:
        raise ValueError(f"unknown parameter kind {kind}")
    if values.size != obj.n_params:
        raise ValueError("parameter count does not match the stored dimensions")
    obj.params[:] = values
    return obj


def save_params(obj, path) -> None:
    with open(path, "wb") as f:
        f.write(to_bytes(obj))


def load_params(path):
    with open(path, "rb") as f:
        return from_bytes(f.read())
