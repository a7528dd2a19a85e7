"""Pure-Python stepping kernel.

Reference implementation of the per-timestep simulator loop.  The compiled
twin in _stepcore.pyx transcribes this function statement for statement;
both call libm (math.* here, libc.math there) and the extension is built
with floating-point contraction off, so the two produce bit-identical
trajectories.  Keep every arithmetic expression in the two files textually
in sync.
"""

from math import atan2, cos, fmod, pi, sin, sqrt

KERNEL_NAME = "python"

_TWO_PI = 2.0 * pi


def _wrap(a):
    w = fmod(a + pi, _TWO_PI)
    if w <= 0.0:
        w += _TWO_PI
    return w - pi


def run_steps(
    hips,
    links,
    qnom,
    disabled,
    params,
    q,
    anchors,
    stance,
    pose,
    vel,
    qdes,
    noise,
    log_pose,
    log_vel,
    log_stance,
    log_q,
):
    """Advance the simulator state through qdes.shape[0] timesteps.

    Mutates q, anchors, stance, pose, vel in place and fills the log
    arrays.  Returns (instability_events, slip_events).  qdes must already
    be clamped to joint limits; noise is an (n, 3) array of pose-update
    perturbations (zeros when the estimator is noiseless).
    """
    L = hips.shape[0]
    n = qdes.shape[0]
    l1 = float(links[0])
    l2 = float(links[1])
    l3 = float(links[2])
    h = float(links[3])
    dt = float(params[0])
    rl = float(params[1]) * dt
    eps = float(params[2])
    slip_t = float(params[3])
    slip_g = float(params[4])
    alpha = float(params[5])

    px = float(pose[0])
    py = float(pose[1])
    pyaw = float(pose[2])
    vx = float(vel[0])
    vy = float(vel[1])
    qq = [[float(q[i, j]) for j in range(3)] for i in range(L)]
    qn = [[float(qnom[i, j]) for j in range(3)] for i in range(L)]
    ax = [float(anchors[i, 0]) for i in range(L)]
    ay = [float(anchors[i, 1]) for i in range(L)]
    st = [int(stance[i]) for i in range(L)]
    dis = [int(disabled[i]) for i in range(L)]
    hx = [float(hips[i, 0]) for i in range(L)]
    hy = [float(hips[i, 1]) for i in range(L)]
    hyaw = [float(hips[i, 2]) for i in range(L)]
    bx = [0.0] * L
    by = [0.0] * L
    contact = [0] * L

    instab = 0
    slips = 0

    for step in range(n):
        # servo joints toward the commanded row under the rate limit
        for i in range(L):
            if dis[i]:
                qq[i][0] = qn[i][0]
                qq[i][1] = qn[i][1]
                qq[i][2] = qn[i][2]
            else:
                for j in range(3):
                    d = float(qdes[step, i, j]) - qq[i][j]
                    if d > rl:
                        d = rl
                    elif d < -rl:
                        d = -rl
                    qq[i][j] = qq[i][j] + d

        # forward kinematics and ground contact
        for i in range(L):
            q2 = qq[i][1]
            q3 = qq[i][2]
            u = l1 + l2 * cos(q2) + l3 * cos(q2 + q3)
            zl = -(l2 * sin(q2) + l3 * sin(q2 + q3))
            yaw_i = hyaw[i] + qq[i][0]
            bx[i] = hx[i] + u * cos(yaw_i)
            by[i] = hy[i] + u * sin(yaw_i)
            contact[i] = 1 if h + zl <= eps else 0

        # touchdown anchors recorded under the pre-update pose estimate
        cg = cos(pyaw)
        sg = sin(pyaw)
        for i in range(L):
            if contact[i] and not st[i]:
                ax[i] = px + bx[i] * cg - by[i] * sg
                ay[i] = py + bx[i] * sg + by[i] * cg
                st[i] = 1
            elif st[i] and not contact[i]:
                st[i] = 0

        # rigid registration of stance feet onto their anchors
        k = 0
        sax = 0.0
        say = 0.0
        sbx = 0.0
        sby = 0.0
        for i in range(L):
            if st[i]:
                k += 1
                sax += ax[i]
                say += ay[i]
                sbx += bx[i]
                sby += by[i]
        px_old = px
        py_old = py
        if k >= 2:
            amx = sax / k
            amy = say / k
            bmx = sbx / k
            bmy = sby / k
            sc = 0.0
            sd = 0.0
            for i in range(L):
                if st[i]:
                    bxc = bx[i] - bmx
                    byc = by[i] - bmy
                    axc = ax[i] - amx
                    ayc = ay[i] - amy
                    sc += bxc * ayc - byc * axc
                    sd += bxc * axc + byc * ayc
            gnew = atan2(sc, sd)
            cn = cos(gnew)
            sn = sin(gnew)
            tx = amx - (bmx * cn - bmy * sn)
            ty = amy - (bmx * sn + bmy * cn)
            dx = tx - px + float(noise[step, 0])
            dy = ty - py + float(noise[step, 1])
            dyaw = _wrap(gnew - pyaw) + float(noise[step, 2])
            px = px + dx
            py = py + dy
            pyaw = _wrap(pyaw + dyaw)
        else:
            instab += 1

        # anchor drag for feet whose residual exceeds the slip threshold
        cg = cos(pyaw)
        sg = sin(pyaw)
        for i in range(L):
            if st[i]:
                wx = px + bx[i] * cg - by[i] * sg
                wy = py + bx[i] * sg + by[i] * cg
                rx = wx - ax[i]
                ry = wy - ay[i]
                r = sqrt(rx * rx + ry * ry)
                if r > slip_t:
                    ax[i] = ax[i] + slip_g * rx
                    ay[i] = ay[i] + slip_g * ry
                    slips += 1

        # smoothed body-frame velocity estimate
        ddx = px - px_old
        ddy = py - py_old
        rvx = (ddx * cg + ddy * sg) / dt
        rvy = (ddy * cg - ddx * sg) / dt
        vx = (1.0 - alpha) * vx + alpha * rvx
        vy = (1.0 - alpha) * vy + alpha * rvy

        log_pose[step, 0] = px
        log_pose[step, 1] = py
        log_pose[step, 2] = pyaw
        log_vel[step, 0] = vx
        log_vel[step, 1] = vy
        mask = 0
        for i in range(L):
            if st[i]:
                mask += 1 << i
        log_stance[step] = mask
        for i in range(L):
            log_q[step, i, 0] = qq[i][0]
            log_q[step, i, 1] = qq[i][1]
            log_q[step, i, 2] = qq[i][2]

    pose[0] = px
    pose[1] = py
    pose[2] = pyaw
    vel[0] = vx
    vel[1] = vy
    for i in range(L):
        q[i, 0] = qq[i][0]
        q[i, 1] = qq[i][1]
        q[i, 2] = qq[i][2]
        anchors[i, 0] = ax[i]
        anchors[i, 1] = ay[i]
        stance[i] = st[i]
    return instab, slips
