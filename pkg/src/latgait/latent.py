"""Latent-conditioned gait policy learned by joint imitation.

One network maps (phase, z) to all joint angles.  Training minimizes the
summed squared angle error over every expert and timestep, optimizing the
network weights and one latent code per expert simultaneously with Adam;
each code receives gradient only through its own expert's rows.  After
training, nearby codes produce nearby gaits, so a planner can treat the
code box as a continuous action space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import DimensionMismatch, EmptyLibrary
from .expert import ExpertLibrary
from .util import payload_hash


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    batch: int = 128
    epochs: int = 2000
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    z_init_std: float = 0.1
    code_box_margin: float = 0.25

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch": self.batch,
            "epochs": self.epochs,
            "seed": self.seed,
            "hidden": list(self.hidden),
            "z_init_std": self.z_init_std,
            "code_box_margin": self.code_box_margin,
        }


@dataclass
class PolicyBundle:
    """Trained policy network plus the per-expert codes and their box."""

    net: nn.Network
    codes: np.ndarray
    code_box: np.ndarray
    cycle_steps: int
    latent_dim: int
    joints: int
    joint_limits: np.ndarray
    model_name: str
    model_hash: str
    library_hash: str
    loss_history: list[float]
    hyper: dict = field(default_factory=dict)

    def query(self, t: float, z: np.ndarray) -> np.ndarray:
        return policy_query(self, t, z)

    def cycle_angles(self, z: np.ndarray, n_steps: int | None = None) -> np.ndarray:
        """Angle rows for one cycle at constant z, clamped to joint limits."""
        n = n_steps or self.cycle_steps
        z = self._check_z(z)
        phases = (np.arange(n) + 1.0) / n
        x = np.empty((n, 1 + self.latent_dim))
        x[:, 0] = phases
        x[:, 1:] = z
        out = nn.forward(self.net, x)
        return np.clip(out, self._limits_lo(), self._limits_hi())

    def _check_z(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.shape[0] != self.latent_dim:
            raise DimensionMismatch(
                f"latent code has dim {z.shape[0]}, policy expects {self.latent_dim}"
            )
        return z

    def _limits_lo(self) -> np.ndarray:
        return np.tile(self.joint_limits[:, 0], self.joints // 3)

    def _limits_hi(self) -> np.ndarray:
        return np.tile(self.joint_limits[:, 1], self.joints // 3)

    def to_dict(self) -> dict:
        return {
            "kind": "policy_bundle",
            "net": nn.network_to_dict(self.net),
            "codes": self.codes.tolist(),
            "code_box": self.code_box.tolist(),
            "cycle_steps": self.cycle_steps,
            "latent_dim": self.latent_dim,
            "joints": self.joints,
            "joint_limits": self.joint_limits.tolist(),
            "model_name": self.model_name,
            "model_hash": self.model_hash,
            "library_hash": self.library_hash,
            "loss_history": self.loss_history,
            "hyper": self.hyper,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyBundle":
        if d.get("kind") != "policy_bundle":
            raise ValueError("not a policy bundle payload")
        return cls(
            net=nn.network_from_dict(d["net"]),
            codes=np.asarray(d["codes"], dtype=float),
            code_box=np.asarray(d["code_box"], dtype=float),
            cycle_steps=int(d["cycle_steps"]),
            latent_dim=int(d["latent_dim"]),
            joints=int(d["joints"]),
            joint_limits=np.asarray(d["joint_limits"], dtype=float),
            model_name=d["model_name"],
            model_hash=d["model_hash"],
            library_hash=d["library_hash"],
            loss_history=[float(v) for v in d["loss_history"]],
            hyper=dict(d.get("hyper", {})),
        )

    def content_hash(self) -> str:
        return payload_hash(self.to_dict())


def _code_box(codes: np.ndarray, margin: float, floor: float = 0.05) -> np.ndarray:
    """Axis-aligned bounding box of the codes, widened by `margin` per side.
    Degenerate dimensions get at least +-floor around their center."""
    lo = codes.min(axis=0)
    hi = codes.max(axis=0)
    width = hi - lo
    lo = lo - margin * width
    hi = hi + margin * width
    narrow = (hi - lo) < 2.0 * floor
    center = (lo + hi) / 2.0
    lo = np.where(narrow, center - floor, lo)
    hi = np.where(narrow, center + floor, hi)
    return np.stack([lo, hi], axis=1)


def train_joint(
    library: ExpertLibrary, latent_dim: int, hyper: TrainHyper | None = None
) -> tuple[PolicyBundle, list[float]]:
    """Fit the shared policy and one code per expert by joint Adam descent.

    The loss is the plain sum of squared angle errors over all experts and
    cycle steps; the recorded history holds that total before training and
    after every epoch.  Zero epochs returns the freshly initialized codes
    untouched.
    """
    if library.size < 1:
        raise EmptyLibrary("cannot train on an empty expert library")
    if latent_dim < 1:
        raise ValueError("latent_dim must be positive")
    hyper = hyper or TrainHyper()
    G = library.size
    N = library.cycle_steps
    J = library.joints

    seeds = np.random.SeedSequence(hyper.seed).generate_state(3)
    net = nn.init_network([1 + latent_dim, *hyper.hidden, J], int(seeds[0]))
    z_rng = np.random.default_rng(int(seeds[1]))
    shuffle_rng = np.random.default_rng(int(seeds[2]))
    codes = z_rng.normal(0.0, hyper.z_init_std, size=(G, latent_dim))

    targets = library.joint_angles.reshape(G * N, J)
    phases = np.tile((np.arange(N) + 1.0) / N, G)
    row_expert = np.repeat(np.arange(G), N)

    def full_inputs(z: np.ndarray) -> np.ndarray:
        x = np.empty((G * N, 1 + latent_dim))
        x[:, 0] = phases
        x[:, 1:] = z[row_expert]
        return x

    def total_loss(z: np.ndarray) -> float:
        pred = nn.forward(net, full_inputs(z))
        diff = pred - targets
        return float(np.sum(diff * diff))

    params = net.parameters() + [codes]
    adam = nn.AdamState.for_params(params)
    history = [total_loss(codes)]

    n_rows = G * N
    batch = min(hyper.batch, n_rows)
    for _ in range(hyper.epochs):
        perm = shuffle_rng.permutation(n_rows)
        for a in range(0, n_rows, batch):
            idx = perm[a : a + batch]
            g_idx = row_expert[idx]
            x = np.empty((idx.size, 1 + latent_dim))
            x[:, 0] = phases[idx]
            x[:, 1:] = codes[g_idx]
            pred, cache = nn.forward_cached(net, x)
            err = pred - targets[idx]
            upstream = (2.0 / idx.size) * err
            pgrads, xgrad = nn.backward(net, cache, upstream)
            zgrad = np.zeros_like(codes)
            np.add.at(zgrad, g_idx, xgrad[:, 1:])
            nn.adam_step(params, pgrads + [zgrad], adam, hyper.lr)
        history.append(total_loss(codes))

    bundle = PolicyBundle(
        net=net,
        codes=codes,
        code_box=_code_box(codes, hyper.code_box_margin),
        cycle_steps=N,
        latent_dim=latent_dim,
        joints=J,
        joint_limits=library.joint_limits.copy(),
        model_name=library.model_name,
        model_hash=library.model_hash,
        library_hash=library.content_hash(),
        loss_history=history,
        hyper=hyper.to_dict(),
    )
    return bundle, history


def latent_loss_gradients(
    library: ExpertLibrary, net: nn.Network, codes: np.ndarray, experts=None
) -> np.ndarray:
    """Gradient of the total loss with respect to each latent code.

    With `experts` given, only those experts' rows are evaluated; the other
    codes' gradients are exactly zero, which is the isolation property the
    joint objective relies on.
    """
    G = library.size
    N = library.cycle_steps
    D = codes.shape[1]
    experts = range(G) if experts is None else experts
    phases = (np.arange(N) + 1.0) / N
    zgrad = np.zeros_like(codes)
    for g in experts:
        x = np.empty((N, 1 + D))
        x[:, 0] = phases
        x[:, 1:] = codes[g]
        pred, cache = nn.forward_cached(net, x)
        err = pred - library.joint_angles[g]
        _, xgrad = nn.backward(net, cache, 2.0 * err)
        np.add.at(zgrad, np.full(N, g), xgrad[:, 1:])
    return zgrad


def policy_query(bundle: PolicyBundle, t: float, z: np.ndarray) -> np.ndarray:
    """Joint angles at cycle phase t in (0, 1] for latent code z, clamped
    to the bundle's joint limits."""
    if not 0.0 < t <= 1.0 + 1e-12:
        raise ValueError(f"phase {t} outside (0, 1]")
    z = bundle._check_z(z)
    x = np.concatenate([[t], z])[None, :]
    out = nn.forward(bundle.net, x)[0]
    return np.clip(out, bundle._limits_lo(), bundle._limits_hi())


def reconstruction_error(
    bundle: PolicyBundle, library: ExpertLibrary, g: int
) -> float:
    """Per-joint RMSE (radians) of the policy at expert g's own code."""
    if not 0 <= g < library.size:
        raise IndexError(f"expert index {g} out of range")
    pred = bundle.cycle_angles(bundle.codes[g], library.cycle_steps)
    diff = pred - library.joint_angles[g]
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass
class SweepResult:
    """Per-cycle displacement over a grid of latent codes (first two code
    dimensions; any remaining dimensions held at the codes' mean)."""

    grid_x: np.ndarray
    grid_y: np.ndarray
    displacements: np.ndarray
    cycles: int

    def to_dict(self) -> dict:
        return {
            "kind": "latent_sweep",
            "grid_x": self.grid_x.tolist(),
            "grid_y": self.grid_y.tolist(),
            "displacements": self.displacements.tolist(),
            "cycles": self.cycles,
        }


def latent_sweep(
    bundle: PolicyBundle, sim, grid_size: int = 21, cycles: int = 1
) -> SweepResult:
    """Roll every code on a grid over the code box through the simulator.

    Each grid point restarts the simulator from the same seed and runs
    `cycles` policy cycles at that constant code; the recorded displacement
    is the final (x, y, yaw) relative to the start.
    """
    if bundle.latent_dim < 2:
        raise DimensionMismatch("sweep needs at least two latent dimensions")
    lo, hi = bundle.code_box[:, 0], bundle.code_box[:, 1]
    xs = np.linspace(lo[0], hi[0], grid_size)
    ys = np.linspace(lo[1], hi[1], grid_size)
    rest = bundle.codes.mean(axis=0)
    disp = np.empty((grid_size, grid_size, 3))
    for i, zx in enumerate(xs):
        for j, zy in enumerate(ys):
            z = rest.copy()
            z[0] = zx
            z[1] = zy
            sim.reset()
            for _ in range(cycles):
                sim.run_cycle(bundle, z)
            x, y, yaw, _, _ = sim.com()
            disp[i, j] = (x, y, yaw)
    return SweepResult(grid_x=xs, grid_y=ys, displacements=disp, cycles=cycles)


def sweep_continuity(result: SweepResult) -> tuple[float, float]:
    """(max, median) planar displacement difference between grid neighbors."""
    d = result.displacements[:, :, :2]
    diffs = []
    dx = d[1:, :, :] - d[:-1, :, :]
    dy = d[:, 1:, :] - d[:, :-1, :]
    diffs.append(np.sqrt(np.sum(dx * dx, axis=2)).ravel())
    diffs.append(np.sqrt(np.sum(dy * dy, axis=2)).ravel())
    all_diffs = np.concatenate(diffs)
    return float(all_diffs.max()), float(np.median(all_diffs))


def save_bundle(path, bundle: PolicyBundle) -> None:
    from .util import write_json

    write_json(path, bundle.to_dict())


def load_bundle(path) -> PolicyBundle:
    from .util import read_json

    return PolicyBundle.from_dict(read_json(path))
