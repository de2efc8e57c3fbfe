"""Attribute detectors: exact pass-through, learned linear, and noise-injected.

All detectors expose ``detect(state) -> AttributeVector`` and the cheaper
``detect_bits(state) -> int`` used inside rollout loops.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .core import AttributeVector, ContractError
from .envs import Env
from .nets import Adam

DETECTOR_FORMAT_VERSION = 1
THRESHOLD = 0.5


class Detector:
    mode: str
    env: Env

    def detect_bits(self, state) -> int:
        raise NotImplementedError

    def detect(self, state) -> AttributeVector:
        return AttributeVector(self.detect_bits(state), self.env.n_attributes)

    def to_dict(self) -> dict:
        return {"format": "attrplan.detector", "version": DETECTOR_FORMAT_VERSION, "mode": self.mode}


class ExactDetector(Detector):
    mode = "exact"

    def __init__(self, env: Env):
        self.env = env

    def detect_bits(self, state) -> int:
        return self.env.attribute_bits(state)


class NoisyDetector(Detector):
    """Ground truth with independent per-bit flips at rate ``eps``.

    Flips are a fixed pseudo-random function of ``(seed, state)``, so the
    detector behaves like a fixed imperfect classifier: a state always maps to
    the same (possibly wrong) attributes.
    """

    mode = "noisy"

    def __init__(self, env: Env, eps: float, seed: int = 0):
        if not 0.0 <= eps <= 1.0:
            raise ContractError("flip probability must lie in [0, 1]")
        self.env = env
        self.eps = float(eps)
        self.seed = int(seed)
        self._cache: dict = {}

    def flip_mask(self, state) -> int:
        if self.eps == 0.0:
            return 0
        mask = self._cache.get(state)
        if mask is not None:
            return mask
        digest = hashlib.blake2b(repr(state).encode(), digest_size=16, key=str(self.seed).encode()).digest()
        u = np.random.default_rng(int.from_bytes(digest, "little")).random(self.env.n_attributes)
        mask = 0
        for i in np.flatnonzero(u < self.eps):
            mask |= 1 << int(i)
        if len(self._cache) < 500_000:
            self._cache[state] = mask
        return mask

    def detect_bits(self, state) -> int:
        return self.env.attribute_bits(state) ^ self.flip_mask(state)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "eps": self.eps, "seed": self.seed}


@dataclass
class LearnedDetector(Detector):
    """One independent logistic classifier per attribute over feature vectors."""

    env: Env
    weights: np.ndarray  # (feature_dim, n_attributes)
    bias: np.ndarray  # (n_attributes,)
    constant: np.ndarray  # -1 for trained bits, else the fixed 0/1 label
    heldout_error: float = float("nan")
    per_bit_error: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode: str = "learned"

    def predict_bits_matrix(self, X: np.ndarray) -> np.ndarray:
        z = X @ self.weights + self.bias
        out = (z > 0.0).astype(np.int64)  # sigmoid(z) > 0.5
        fixed = self.constant >= 0
        out[:, fixed] = self.constant[fixed]
        return out

    def detect_bits(self, state) -> int:
        row = self.predict_bits_matrix(self.env.features(state)[None, :])[0]
        bits = 0
        for i in np.flatnonzero(row):
            bits |= 1 << int(i)
        return bits

    def to_dict(self) -> dict:
        return {
            **super().to_dict(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "constant": self.constant.tolist(),
            "heldout_error": self.heldout_error,
        }


def fit(
    labeled,
    env: Env,
    heldout_fraction: float = 0.2,
    epochs: int = 300,
    lr: float = 0.2,
    l2: float = 1e-6,
    seed: int = 0,
) -> LearnedDetector:
    """Fit per-attribute logistic classifiers on ``(features, AttributeVector)`` pairs.

    Attributes whose training labels are constant are pinned to that label.
    The held-out per-bit error rate is stored on the returned detector.
    """
    labeled = list(labeled)
    if not labeled:
        raise ContractError("fit needs a nonempty training set")
    n = env.n_attributes
    X = np.asarray([np.asarray(f, dtype=np.float64) for f, _ in labeled])
    if X.shape[1] != env.feature_dim:
        raise ContractError(f"feature length {X.shape[1]} != {env.feature_dim}")
    for _, rho in labeled:
        if rho.n != n:
            raise ContractError("attribute vector length does not match schema")
    Y = np.asarray([rho.to_array() for _, rho in labeled])

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(X))
    n_hold = int(round(heldout_fraction * len(X))) if len(X) > 1 else 0
    hold, train = order[:n_hold], order[n_hold:]
    Xt, Yt = X[train], Y[train]

    constant = np.full(n, -1, dtype=np.int64)
    col_mean = Yt.mean(axis=0)
    constant[col_mean == 0.0] = 0
    constant[col_mean == 1.0] = 1

    params = {"W": np.zeros((X.shape[1], n)), "b": np.zeros(n)}
    opt = Adam(params, lr=lr)
    batch = min(512, len(Xt))
    for _ in range(epochs):
        perm = rng.permutation(len(Xt))
        for start in range(0, len(Xt), batch):
            sl = perm[start:start + batch]
            xb, yb = Xt[sl], Yt[sl]
            p = 1.0 / (1.0 + np.exp(-(xb @ params["W"] + params["b"])))
            d = (p - yb) / len(sl)
            grads = {"W": xb.T @ d + l2 * params["W"], "b": d.sum(axis=0)}
            opt.step(params, grads)

    det = LearnedDetector(env, params["W"], params["b"], constant)
    if n_hold:
        pred = det.predict_bits_matrix(X[hold])
        wrong = pred != Y[hold]
        det.per_bit_error = wrong.mean(axis=0)
        det.heldout_error = float(wrong.mean())
    return det


def labeled_pairs(env: Env, n: int, seed: int, walk: int = 10):
    """Labelled ``(features, attributes)`` pairs from short random walks."""
    rng = np.random.default_rng(seed)
    out = []
    state = env.reset(int(rng.integers(2**62)))
    for i in range(n):
        if i % walk == 0:
            state = env.reset(int(rng.integers(2**62)))
        else:
            state = env.step(state, int(rng.integers(env.n_actions)))
        out.append((env.features(state), env.true_attributes(state)))
    return out


def make_detector(mode: str, env: Env, eps: float = 0.0, seed: int = 0, learned: LearnedDetector | None = None) -> Detector:
    if mode == "exact":
        return ExactDetector(env)
    if mode == "noisy":
        return NoisyDetector(env, eps, seed)
    if mode == "learned":
        if learned is None:
            raise ContractError("learned mode needs a fitted detector")
        return learned
    raise ContractError(f"unknown detector mode {mode!r}")


def detector_from_dict(doc: dict, env: Env) -> Detector:
    if doc.get("format") != "attrplan.detector" or doc.get("version") != DETECTOR_FORMAT_VERSION:
        raise ContractError("unsupported detector document")
    mode = doc["mode"]
    if mode == "exact":
        return ExactDetector(env)
    if mode == "noisy":
        return NoisyDetector(env, doc["eps"], doc["seed"])
    det = LearnedDetector(
        env,
        np.asarray(doc["weights"], dtype=np.float64),
        np.asarray(doc["bias"], dtype=np.float64),
        np.asarray(doc["constant"], dtype=np.int64),
        heldout_error=doc.get("heldout_error", float("nan")),
    )
    return det


def dumps(detector: Detector) -> str:
    return json.dumps(detector.to_dict(), sort_keys=True) + "\n"
