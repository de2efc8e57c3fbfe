"""Small numpy feedforward networks with softmax heads and manual backprop."""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

NET_FORMAT_VERSION = 1


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class MLP:
    """tanh MLP ``in -> hidden... -> out`` producing action logits."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, zero_output: bool = True):
        self.sizes = tuple(int(s) for s in sizes)
        self.params: dict[str, np.ndarray] = {}
        rng = rng if rng is not None else np.random.default_rng(0)
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            fan_in, fan_out = self.sizes[i], self.sizes[i + 1]
            if i == n_layers - 1 and zero_output:
                W = np.zeros((fan_in, fan_out))
            else:
                W = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
            self.params[f"W{i}"] = W
            self.params[f"b{i}"] = np.zeros(fan_out)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = self.sizes
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def forward(self, X: np.ndarray):
        acts = [X]
        h = X
        for i in range(self.n_layers):
            z = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            if i < self.n_layers - 1:
                h = np.tanh(z)
                acts.append(h)
            else:
                h = z
        return h, acts

    def logits(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[0]

    def probs(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def backward(self, acts, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        grads = {}
        delta = dlogits
        for i in reversed(range(self.n_layers)):
            h = acts[i]
            grads[f"W{i}"] = h.T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[f"W{i}"].T) * (1.0 - h * h)
        return grads

    def grad_logp(self, X: np.ndarray, actions: np.ndarray, weights: np.ndarray | None = None,
                  entropy: float = 0.0):
        """Gradient of ``sum_i w_i log pi(a_i | x_i) + entropy * sum_i H(pi(. | x_i))``.

        Also returns the log-probabilities of the taken actions.
        """
        z, acts = self.forward(X)
        logp = log_softmax(z)
        p = np.exp(logp)
        actions = np.asarray(actions, dtype=np.int64)
        w = np.ones(len(actions)) if weights is None else np.asarray(weights, dtype=np.float64)
        d = -p
        d[np.arange(len(actions)), actions] += 1.0
        d *= w[:, None]
        if entropy:
            H = -(p * logp).sum(axis=1, keepdims=True)
            d -= entropy * p * (logp + H)
        grads = self.backward(acts, d)
        return grads, logp[np.arange(len(actions)), actions]

    def apply(self, grads: dict[str, np.ndarray], step: float) -> None:
        for k, g in grads.items():
            self.params[k] += step * g

    # serialization: versioned flat tensor list with named shapes
    def to_bytes(self, meta: dict | None = None) -> bytes:
        """``.npz`` bytes; zip entries carry a fixed timestamp so equal nets give equal bytes."""
        header = {
            "format": "attrplan.mlp",
            "version": NET_FORMAT_VERSION,
            "sizes": list(self.sizes),
            "tensors": [[k, list(v.shape)] for k, v in self.params.items()],
            "meta": meta or {},
        }
        arrays = {"header": np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **self.params}
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                body = io.BytesIO()
                np.lib.format.write_array(body, np.ascontiguousarray(arr), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), body.getvalue())
        return buf.getvalue()

    @staticmethod
    def read_header(data: bytes) -> dict:
        z = np.load(io.BytesIO(data))
        header = json.loads(bytes(z["header"]).decode())
        if header.get("format") != "attrplan.mlp" or header.get("version") != NET_FORMAT_VERSION:
            raise ValueError("unsupported network file")
        return header

    @classmethod
    def from_bytes(cls, data: bytes) -> "MLP":
        header = cls.read_header(data)
        z = np.load(io.BytesIO(data))
        net = cls.__new__(cls)
        net.sizes = tuple(header["sizes"])
        net.params = {}
        for name, shape in header["tensors"]:
            arr = np.array(z[name], dtype=np.float64)
            if list(arr.shape) != shape:
                raise ValueError(f"tensor {name} has shape {arr.shape}, header says {shape}")
            net.params[name] = arr
        return net


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Descent step on ``grads`` (gradients of a loss)."""
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
