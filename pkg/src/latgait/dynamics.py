"""Coarse per-cycle CoM dynamics.

One gait cycle maps (body velocity, latent code) to a pose change and a
new velocity.  Pose changes are expressed in the local frame of the
departure state, which makes the model equivariant to rigid motions of
the world frame by construction: translating and rotating a trajectory
changes neither the local deltas nor the body-frame velocities.

The model itself is a small dense net on standardized inputs/outputs,
trained on transitions collected by rolling random codes through the
simulator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import DimensionMismatch, InsufficientData, InvalidShape
from .robot import wrap_angle
from .util import payload_hash, read_json, write_json


@dataclass(frozen=True)
class ComState:
    """Planar body state: world pose and body-frame velocity."""

    x: float
    y: float
    yaw: float
    vx: float
    vy: float

    @classmethod
    def from_tuple(cls, t) -> "ComState":
        return cls(*(float(v) for v in t))

    @classmethod
    def origin(cls) -> "ComState":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw, self.vx, self.vy])


def to_local_delta(s_from: ComState, s_to: ComState) -> np.ndarray:
    """(dx, dy, dyaw, vx', vy'): pose change in s_from's body frame plus
    the arrival velocity (already body-frame)."""
    wx = s_to.x - s_from.x
    wy = s_to.y - s_from.y
    c = math.cos(s_from.yaw)
    s = math.sin(s_from.yaw)
    dx = wx * c + wy * s
    dy = -wx * s + wy * c
    dyaw = wrap_angle(s_to.yaw - s_from.yaw)
    return np.array([dx, dy, dyaw, s_to.vx, s_to.vy])


def from_local_delta(s_from: ComState, delta: np.ndarray) -> ComState:
    """Inverse of to_local_delta: apply a local-frame delta to a state."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (5,):
        raise InvalidShape("delta must be (5,)")
    c = math.cos(s_from.yaw)
    s = math.sin(s_from.yaw)
    x = s_from.x + delta[0] * c - delta[1] * s
    y = s_from.y + delta[0] * s + delta[1] * c
    yaw = wrap_angle(s_from.yaw + delta[2])
    return ComState(float(x), float(y), float(yaw), float(delta[3]), float(delta[4]))


def apply_deltas(states: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Vectorized from_local_delta over (k, 5) state and delta arrays."""
    c = np.cos(states[:, 2])
    s = np.sin(states[:, 2])
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] + deltas[:, 0] * c - deltas[:, 1] * s
    out[:, 1] = states[:, 1] + deltas[:, 0] * s + deltas[:, 1] * c
    yaw = states[:, 2] + deltas[:, 2]
    out[:, 2] = np.arctan2(np.sin(yaw), np.cos(yaw))
    out[:, 3] = deltas[:, 3]
    out[:, 4] = deltas[:, 4]
    return out


@dataclass
class TransitionDataset:
    """Rows of (velocity, code) -> per-cycle local delta."""

    inputs: np.ndarray
    outputs: np.ndarray
    latent_dim: int
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])


def collect_transitions(
    sim,
    bundle,
    count: int,
    seed: int,
    code_source: np.ndarray | None = None,
    reset_interval: int = 25,
) -> TransitionDataset:
    """Roll `count` cycles with per-cycle random codes and record them.

    Codes are drawn uniformly from the bundle's code box, or uniformly
    from the rows of `code_source` when given (the discrete-library
    variant).  The simulator restarts from nominal stance every
    `reset_interval` cycles so transitions cover the rest-start regime as
    well as steady gait.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    D = bundle.latent_dim
    lo, hi = bundle.code_box[:, 0], bundle.code_box[:, 1]
    inputs = np.empty((count, 2 + D))
    outputs = np.empty((count, 5))
    for m in range(count):
        if m % reset_interval == 0:
            sim.reset()
        if code_source is None:
            z = rng.uniform(lo, hi)
        else:
            z = code_source[int(rng.integers(0, code_source.shape[0]))]
        before = ComState.from_tuple(sim.com())
        sim.run_cycle(bundle, z)
        after = ComState.from_tuple(sim.com())
        inputs[m, 0] = before.vx
        inputs[m, 1] = before.vy
        inputs[m, 2:] = z
        outputs[m] = to_local_delta(before, after)
    meta = {
        "seed": seed,
        "reset_interval": reset_interval,
        "policy_hash": bundle.content_hash(),
        "model_hash": bundle.model_hash,
        "action_space": "box" if code_source is None else "discrete",
        "count": count,
    }
    return TransitionDataset(
        inputs=inputs, outputs=outputs, latent_dim=D, meta=meta
    )


def write_dataset_csv(path, dataset: TransitionDataset) -> None:
    """CSV rows: vx, vy, z..., dx, dy, dyaw, vx_next, vy_next.  Metadata
    goes to a sidecar JSON next to the file."""
    D = dataset.latent_dim
    header = (
        ["vx", "vy"]
        + [f"z{i}" for i in range(D)]
        + ["dx", "dy", "dyaw", "vx_next", "vy_next"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.size):
            row = [repr(float(v)) for v in dataset.inputs[i]] + [
                repr(float(v)) for v in dataset.outputs[i]
            ]
            writer.writerow(row)
    write_json(str(path) + ".meta.json", dataset.meta)


def read_dataset_csv(path) -> TransitionDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    D = sum(1 for col in header if col.startswith("z"))
    if not rows:
        raise InsufficientData(f"{path} holds no transitions")
    arr = np.asarray(rows)
    if arr.shape[1] != 2 + D + 5:
        raise InvalidShape(f"{path}: bad column count {arr.shape[1]}")
    meta: dict = {}
    try:
        meta = read_json(str(path) + ".meta.json")
    except FileNotFoundError:
        pass
    return TransitionDataset(
        inputs=arr[:, : 2 + D], outputs=arr[:, 2 + D :], latent_dim=D, meta=meta
    )


@dataclass(frozen=True)
class DynTrainHyper:
    lr: float = 1e-3
    batch: int = 512
    epochs: int = 400
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    holdout_fraction: float = 0.1

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch": self.batch,
            "epochs": self.epochs,
            "seed": self.seed,
            "hidden": list(self.hidden),
            "holdout_fraction": self.holdout_fraction,
        }


@dataclass
class DynamicsModel:
    """Dense net over standardized (vx, vy, z) -> (dx, dy, dyaw, vx', vy')."""

    net: nn.Network
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    latent_dim: int
    train_mse: float
    holdout_mse: float
    meta: dict = field(default_factory=dict)

    def predict_deltas(self, x: np.ndarray) -> np.ndarray:
        """Raw-delta predictions for raw (k, 2 + latent_dim) inputs."""
        xs = (x - self.x_mean) / self.x_std
        ys = nn.forward(self.net, xs)
        return ys * self.y_std + self.y_mean

    def to_dict(self) -> dict:
        return {
            "kind": "dynamics_model",
            "net": nn.network_to_dict(self.net),
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
            "latent_dim": self.latent_dim,
            "train_mse": self.train_mse,
            "holdout_mse": self.holdout_mse,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsModel":
        if d.get("kind") != "dynamics_model":
            raise ValueError("not a dynamics model payload")
        return cls(
            net=nn.network_from_dict(d["net"]),
            x_mean=np.asarray(d["x_mean"], dtype=float),
            x_std=np.asarray(d["x_std"], dtype=float),
            y_mean=np.asarray(d["y_mean"], dtype=float),
            y_std=np.asarray(d["y_std"], dtype=float),
            latent_dim=int(d["latent_dim"]),
            train_mse=float(d["train_mse"]),
            holdout_mse=float(d["holdout_mse"]),
            meta=dict(d.get("meta", {})),
        )

    def content_hash(self) -> str:
        return payload_hash(self.to_dict())


def train_dynamics(
    dataset: TransitionDataset, hyper: DynTrainHyper | None = None
) -> DynamicsModel:
    """Fit the delta net on a 90/10 split of the dataset.

    Inputs and outputs are standardized with train-split statistics; the
    reported MSEs are in standardized units, so the holdout figure is
    comparable across collection scales.
    """
    hyper = hyper or DynTrainHyper()
    M = dataset.size
    if M < 100:
        raise InsufficientData(f"need at least 100 transitions, got {M}")
    seeds = np.random.SeedSequence(hyper.seed).generate_state(3)
    perm = np.random.default_rng(int(seeds[0])).permutation(M)
    n_val = max(1, int(round(M * hyper.holdout_fraction)))
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]

    xtr = dataset.inputs[train_idx]
    ytr = dataset.outputs[train_idx]
    x_mean = xtr.mean(axis=0)
    x_std = np.maximum(xtr.std(axis=0), 1e-6)
    y_mean = ytr.mean(axis=0)
    y_std = np.maximum(ytr.std(axis=0), 1e-6)
    xs = (xtr - x_mean) / x_std
    ys = (ytr - y_mean) / y_std
    xv = (dataset.inputs[val_idx] - x_mean) / x_std
    yv = (dataset.outputs[val_idx] - y_mean) / y_std

    net = nn.init_network([2 + dataset.latent_dim, *hyper.hidden, 5], int(seeds[1]))
    shuffle_rng = np.random.default_rng(int(seeds[2]))
    params = net.parameters()
    adam = nn.AdamState.for_params(params)
    n_rows = xs.shape[0]
    batch = min(hyper.batch, n_rows)
    for _ in range(hyper.epochs):
        perm_e = shuffle_rng.permutation(n_rows)
        for a in range(0, n_rows, batch):
            idx = perm_e[a : a + batch]
            pred, cache = nn.forward_cached(net, xs[idx])
            err = pred - ys[idx]
            upstream = (2.0 / idx.size) * err
            pgrads, _ = nn.backward(net, cache, upstream)
            nn.adam_step(params, pgrads, adam, hyper.lr)

    def mse(a: np.ndarray, b: np.ndarray) -> float:
        d = a - b
        return float(np.mean(d * d))

    train_mse = mse(nn.forward(net, xs), ys)
    holdout_mse = mse(nn.forward(net, xv), yv)
    meta = dict(dataset.meta)
    meta["hyper"] = hyper.to_dict()
    return DynamicsModel(
        net=net,
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        latent_dim=dataset.latent_dim,
        train_mse=train_mse,
        holdout_mse=holdout_mse,
        meta=meta,
    )


def predict(model: DynamicsModel, s: ComState, z: np.ndarray) -> ComState:
    """Next CoM state after one cycle at code z, per the learned model."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != model.latent_dim:
        raise DimensionMismatch(
            f"code has dim {z.shape[0]}, model expects {model.latent_dim}"
        )
    x = np.concatenate([[s.vx, s.vy], z])[None, :]
    delta = model.predict_deltas(x)[0]
    return from_local_delta(s, delta)


def predict_batch(
    model: DynamicsModel, states: np.ndarray, codes: np.ndarray
) -> np.ndarray:
    """Vectorized predict over (k, 5) states and (k, latent_dim) codes."""
    if codes.shape[1] != model.latent_dim:
        raise DimensionMismatch(
            f"codes have dim {codes.shape[1]}, model expects {model.latent_dim}"
        )
    x = np.concatenate([states[:, 3:5], codes], axis=1)
    deltas = model.predict_deltas(x)
    return apply_deltas(states, deltas)


def save_model(path, model: DynamicsModel) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> DynamicsModel:
    return DynamicsModel.from_dict(read_json(path))
