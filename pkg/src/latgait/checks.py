"""Self-check suites runnable from the command line.

Each check builds its own inputs, compares an analytic quantity against an
independent oracle (finite differences, exhaustive search, closed-form
least squares), and returns a small report dict with a boolean verdict.
They need no trained artifacts and finish in seconds.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import dynamics as dyn
from . import nn
from .dynamics import ComState, DynamicsModel, from_local_delta, to_local_delta
from .planner import BoxActionSpace, PlanConfig, random_shooting
from .robot import (
    hexapod,
    inverse_kinematics_leg,
    leg_forward,
    workspace_radial_band,
    wrap_angle,
)
from .sim import register_stance_motion


def check_gradients(count: int = 100, seed: int = 0) -> dict:
    """Compare backprop gradients against central finite differences.

    Random small networks and inputs; inputs are redrawn until every
    hidden pre-activation is at least 1e-3 from the rectifier kink so the
    difference quotient is valid.  Relative error uses the larger of the
    two magnitudes with a 1e-6 floor.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    h = 1e-5
    worst = 0.0
    for _ in range(count):
        n_in = int(rng.integers(1, 5))
        n_out = int(rng.integers(1, 4))
        n_hidden = int(rng.integers(1, 3))
        sizes = [n_in] + [int(rng.integers(3, 9)) for _ in range(n_hidden)] + [n_out]
        net = nn.init_network(sizes, int(rng.integers(0, 2**31)))
        up = rng.normal(size=(1, n_out))

        x = None
        for _ in range(50):
            cand = rng.normal(size=(1, n_in))
            _, acts = nn.forward_cached(net, cand)
            pre_ok = True
            for layer in range(len(net.weights) - 1):
                pre = acts[layer] @ net.weights[layer] + net.biases[layer]
                if np.min(np.abs(pre)) < 1e-3:
                    pre_ok = False
                    break
            if pre_ok:
                x = cand
                break
        if x is None:
            continue

        _, acts = nn.forward_cached(net, x)
        grads, xgrad = nn.backward(net, acts, up)
        params = net.parameters()

        def loss(inp: np.ndarray) -> float:
            return float(np.sum(nn.forward(net, inp) * up))

        for p, g in zip(params, grads):
            flat_p = p.ravel()
            flat_g = g.ravel()
            for i in range(flat_p.size):
                keep = flat_p[i]
                flat_p[i] = keep + h
                hi_v = loss(x)
                flat_p[i] = keep - h
                lo_v = loss(x)
                flat_p[i] = keep
                fd = (hi_v - lo_v) / (2.0 * h)
                denom = max(abs(flat_g[i]), abs(fd), 1e-6)
                worst = max(worst, abs(flat_g[i] - fd) / denom)
        for i in range(n_in):
            keep = x[0, i]
            x[0, i] = keep + h
            hi_v = loss(x)
            x[0, i] = keep - h
            lo_v = loss(x)
            x[0, i] = keep
            fd = (hi_v - lo_v) / (2.0 * h)
            denom = max(abs(xgrad[0, i]), abs(fd), 1e-6)
            worst = max(worst, abs(xgrad[0, i] - fd) / denom)

    threshold = 1e-4
    return {
        "name": "gradients",
        "cases": count,
        "max_rel_error": worst,
        "threshold": threshold,
        "seconds": time.perf_counter() - t0,
        "passed": bool(worst < threshold),
    }


def check_registration(count: int = 1000, seed: int = 0) -> dict:
    """Recover synthetic rigid motions exactly.

    Random body-frame feet are pushed through a random pose; the solver
    must return pose minus prior to within 1e-9 in every component.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        k = int(rng.integers(2, 7))
        feet = rng.uniform(-1.0, 1.0, size=(k, 2))
        # degenerate case: two coincident feet make yaw unobservable
        while k == 2 and np.linalg.norm(feet[0] - feet[1]) < 1e-3:
            feet = rng.uniform(-1.0, 1.0, size=(2, 2))
        pose = np.array(
            [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-math.pi, math.pi)]
        )
        prior = np.array(
            [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-math.pi, math.pi)]
        )
        c, s = math.cos(pose[2]), math.sin(pose[2])
        anchors = np.empty_like(feet)
        anchors[:, 0] = pose[0] + feet[:, 0] * c - feet[:, 1] * s
        anchors[:, 1] = pose[1] + feet[:, 0] * s + feet[:, 1] * c
        dx, dy, dyaw = register_stance_motion(anchors, feet, prior)
        worst = max(
            worst,
            abs(dx - (pose[0] - prior[0])),
            abs(dy - (pose[1] - prior[1])),
            abs(wrap_angle(dyaw - wrap_angle(pose[2] - prior[2]))),
        )
    threshold = 1e-9
    return {
        "name": "registration",
        "cases": count,
        "max_error": worst,
        "threshold": threshold,
        "seconds": time.perf_counter() - t0,
        "passed": bool(worst < threshold),
    }


def check_roundtrip(count: int = 10000, seed: int = 0) -> dict:
    """Frame transforms invert each other; leg IK inverts FK."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_frame = 0.0
    for _ in range(count):
        a = ComState(
            x=rng.uniform(-5, 5),
            y=rng.uniform(-5, 5),
            yaw=rng.uniform(-math.pi, math.pi),
            vx=rng.uniform(-1, 1),
            vy=rng.uniform(-1, 1),
        )
        b = ComState(
            x=a.x + rng.uniform(-0.3, 0.3),
            y=a.y + rng.uniform(-0.3, 0.3),
            yaw=wrap_angle(a.yaw + rng.uniform(-0.5, 0.5)),
            vx=rng.uniform(-1, 1),
            vy=rng.uniform(-1, 1),
        )
        back = from_local_delta(a, to_local_delta(a, b))
        worst_frame = max(
            worst_frame,
            abs(back.x - b.x),
            abs(back.y - b.y),
            abs(wrap_angle(back.yaw - b.yaw)),
            abs(back.vx - b.vx),
            abs(back.vy - b.vy),
        )

    model = hexapod()
    z = -model.nominal_height
    lo, hi = workspace_radial_band(model, z)
    worst_ik = 0.0
    for _ in range(1000):
        leg = int(rng.integers(0, model.leg_count))
        r = rng.uniform(lo + 1e-4, hi - 1e-4)
        az = rng.uniform(-math.pi, math.pi)
        hx, hy, _ = (float(v) for v in model.hip_offsets[leg])
        target = np.array([hx + r * math.cos(az), hy + r * math.sin(az), z])
        q = inverse_kinematics_leg(model, leg, target)
        back = leg_forward(model, leg, q)
        worst_ik = max(worst_ik, float(np.max(np.abs(back - target))))

    frame_threshold = 1e-12
    ik_threshold = 1e-9
    return {
        "name": "roundtrip",
        "frame_cases": count,
        "frame_max_error": worst_frame,
        "frame_threshold": frame_threshold,
        "ik_cases": 1000,
        "ik_max_error": worst_ik,
        "ik_threshold": ik_threshold,
        "seconds": time.perf_counter() - t0,
        "passed": bool(worst_frame < frame_threshold and worst_ik < ik_threshold),
    }


def linear_test_model(seed: int = 0) -> tuple[DynamicsModel, np.ndarray, dict]:
    """Linear dynamics with a rank-one action response, for optimizer tests.

    The network is a single affine layer, so predictions are exactly
    c + M @ [vx, vy, z].  The action block of M has rank one, which makes
    the quadratic tracking cost below flat along one latent direction and
    leaves a strictly positive analytic optimum (the residual of
    projecting the target mismatch onto the response column).  Returns the
    model, its code box, and the instance data needed to state that
    optimum in closed form.
    """
    rng = np.random.default_rng(seed)
    u = np.array([0.6, -0.3, 0.2])
    v = np.array([0.8, 0.5])
    c0 = np.array([0.02, -0.01, 0.03])
    target = c0 + 0.25 * u + np.array([0.05, 0.04, -0.03])

    net = nn.init_network([4, 5], int(rng.integers(0, 2**31)))
    W = np.zeros((4, 5))
    W[2:, 0:3] = np.outer(v, u)
    W[2, 3] = 0.1
    W[3, 4] = 0.1
    net.weights[0][:] = W
    net.biases[0][:] = np.array([c0[0], c0[1], c0[2], 0.0, 0.0])
    model = DynamicsModel(
        net=net,
        x_mean=np.zeros(4),
        x_std=np.ones(4),
        y_mean=np.zeros(5),
        y_std=np.ones(5),
        latent_dim=2,
        train_mse=0.0,
        holdout_mse=0.0,
        meta={"kind": "linear_test"},
    )
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    instance = {"u": u, "v": v, "c0": c0, "target": target}
    return model, box, instance


def check_oracle(seed: int = 0) -> dict:
    """Random shooting against exhaustive search and a closed-form optimum.

    Uses the rank-one linear instance: cost(z) = ||target - (c0 + u (v.z))||^2
    evaluated through the real prediction path from a zero state.  The
    analytic optimum is the least-squares residual of target - c0 against
    u, attained on an interior line of the code box, so both optimizers
    must land within 2% of a strictly positive value.
    """
    t0 = time.perf_counter()
    model, box, inst = linear_test_model(seed)
    target = inst["target"]
    s0 = ComState.origin()

    def cost_fn(states: np.ndarray, _h: int) -> np.ndarray:
        diff = states[:, 0:3] - target[None, :]
        return np.sum(diff * diff, axis=1)

    cfg = PlanConfig(samples=8000, horizon=1, seed=seed + 1)
    space = BoxActionSpace(box)
    _, shoot_cost = random_shooting(model, s0, cost_fn, cfg, space)

    axis = np.linspace(box[0, 0], box[0, 1], 101)
    zz0, zz1 = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([zz0.ravel(), zz1.ravel()])
    states = np.tile(s0.as_array(), (grid.shape[0], 1))
    nxt = dyn.predict_batch(model, states, grid)
    grid_cost = float(np.min(cost_fn(nxt, 0)))

    sol, residual, _, _ = np.linalg.lstsq(
        inst["u"].reshape(3, 1), target - inst["c0"], rcond=None
    )
    analytic = float(residual[0])
    # the flat valley v.z = sol must cross the box for the bound to be tight
    assert abs(float(sol[0])) < float(np.sum(np.abs(inst["v"])))

    gap_grid = abs(shoot_cost - grid_cost) / grid_cost
    gap_analytic = abs(shoot_cost - analytic) / analytic
    threshold = 0.02
    return {
        "name": "oracle",
        "shooting_cost": shoot_cost,
        "grid_cost": grid_cost,
        "analytic_cost": analytic,
        "gap_vs_grid": gap_grid,
        "gap_vs_analytic": gap_analytic,
        "threshold": threshold,
        "seconds": time.perf_counter() - t0,
        "passed": bool(gap_grid <= threshold and gap_analytic <= threshold),
    }


ALL_CHECKS = {
    "gradients": check_gradients,
    "registration": check_registration,
    "roundtrip": check_roundtrip,
    "oracle": check_oracle,
}
