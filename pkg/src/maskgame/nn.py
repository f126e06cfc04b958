"""Small fully connected networks with hand-written reverse mode, and Adam."""

from __future__ import annotations

import json
import struct

import numpy as np

OUTPUTS = ("sigmoid", "softmax", "linear")


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


class Mlp:
    """ReLU hidden layers followed by a sigmoid, softmax or linear output."""

    def __init__(self, sizes, output="sigmoid", rng=None, dtype=np.float64):
        if output not in OUTPUTS:
            raise ValueError(f"unknown output activation {output!r}")
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = tuple(int(s) for s in sizes)
        self.output = output
        self.dtype = np.dtype(dtype)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = np.sqrt(2.0 / fan_in) if fan_in else 0.0
            self.weights.append((rng.standard_normal((fan_in, fan_out)) * scale).astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))
        # keep the last layer small so initial outputs sit near the activation's center
        self.weights[-1] *= 0.1

    @property
    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def zero_(self):
        for p in self.params:
            p[...] = 0

    def forward(self, X):
        """Returns (output, cache) where cache holds what backward needs."""
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if i < last:
                h = np.maximum(z, 0)
            elif self.output == "sigmoid":
                h = sigmoid(z)
            elif self.output == "softmax":
                h = softmax(z)
            else:
                h = z
            acts.append(h)
        return h, acts

    def __call__(self, X):
        return self.forward(X)[0]

    def backward(self, acts, grad_out, need_input=True):
        """Reverse pass.

        Args:
          acts: cache from ``forward``.
          grad_out: dL/d(output), same shape as the output.

        Returns:
          (grads, grad_input): grads aligned with ``params``; grad_input is
          dL/dX or None when ``need_input`` is False.
        """
        out = acts[-1]
        if self.output == "sigmoid":
            g = grad_out * out * (1 - out)
        elif self.output == "softmax":
            g = out * (grad_out - (grad_out * out).sum(axis=1, keepdims=True))
        else:
            g = grad_out
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = acts[i]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i == 0 and not need_input:
                return grads, None
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (acts[i] > 0)
        return grads, g

    def flat(self):
        return np.concatenate([p.ravel() for p in self.params]) if self.params else np.zeros(0)

    def set_flat(self, vec):
        i = 0
        for p in self.params:
            p[...] = vec[i:i + p.size].reshape(p.shape)
            i += p.size

    def header(self):
        return {"sizes": list(self.sizes), "output": self.output, "hidden": "relu"}


class Adam:
    """Adam on a fixed list of arrays, updated in place."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads, ascend=False):
        self.t += 1
        b1, b2 = self.b1, self.b2
        step = self.lr * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        sign = 1.0 if ascend else -1.0
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p += (sign * step) * m / (np.sqrt(v) + self.eps)


# -- parameter archive -------------------------------------------------------
# layout: b"MGNP" | uint32 header length | JSON header | float64 little-endian params

MAGIC = b"MGNP"


def save_nets(path, nets: dict, meta: dict | None = None) -> None:
    header = {"nets": {name: net.header() for name, net in nets.items()}, "meta": meta or {}}
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for net in nets.values():
            fh.write(net.flat().astype("<f8").tobytes())


def load_nets(path):
    """Returns ({name: Mlp}, meta)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a parameter archive")
        (length,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(length))
        data = np.frombuffer(fh.read(), dtype="<f8")
    nets, i = {}, 0
    for name, h in header["nets"].items():
        net = Mlp(h["sizes"], h["output"])
        size = sum(p.size for p in net.params)
        net.set_flat(data[i:i + size])
        i += size
        nets[name] = net
    if i != data.size:
        raise ValueError(f"{path}: parameter count mismatch")
    return nets, header["meta"]
