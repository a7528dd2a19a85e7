# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel.

Statement-for-statement transcription of _stepcore_py.run_steps.  Both use
libm and the extension is compiled with -ffp-contract=off, so results are
bit-identical to the Python twin.  Any change here must be mirrored there.
"""

from libc.math cimport atan2, cos, fmod, sin, sqrt

KERNEL_NAME = "compiled"

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586

cdef inline double _wrap(double a) nogil:
    cdef double w = fmod(a + PI, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - PI


def run_steps(
    double[:, ::1] hips,
    double[::1] links,
    double[:, ::1] qnom,
    unsigned char[::1] disabled,
    double[::1] params,
    double[:, ::1] q,
    double[:, ::1] anchors,
    unsigned char[::1] stance,
    double[::1] pose,
    double[::1] vel,
    double[:, :, ::1] qdes,
    double[:, ::1] noise,
    double[:, ::1] log_pose,
    double[:, ::1] log_vel,
    long long[::1] log_stance,
    double[:, :, ::1] log_q,
):
    """See _stepcore_py.run_steps; same contract, same arithmetic."""
    cdef Py_ssize_t L = hips.shape[0]
    cdef Py_ssize_t n = qdes.shape[0]
    cdef double l1 = links[0]
    cdef double l2 = links[1]
    cdef double l3 = links[2]
    cdef double h = links[3]
    cdef double dt = params[0]
    cdef double rl = params[1] * dt
    cdef double eps = params[2]
    cdef double slip_t = params[3]
    cdef double slip_g = params[4]
    cdef double alpha = params[5]

    cdef double px = pose[0]
    cdef double py = pose[1]
    cdef double pyaw = pose[2]
    cdef double vx = vel[0]
    cdef double vy = vel[1]

    cdef double qq[8][3]
    cdef double qn[8][3]
    cdef double ax[8]
    cdef double ay[8]
    cdef int st[8]
    cdef int dis[8]
    cdef double hx[8]
    cdef double hy[8]
    cdef double hyaw[8]
    cdef double bx[8]
    cdef double by[8]
    cdef int contact[8]

    if L > 8:
        raise ValueError("compiled kernel supports at most 8 legs")

    cdef Py_ssize_t i, j, step
    for i in range(L):
        for j in range(3):
            qq[i][j] = q[i, j]
            qn[i][j] = qnom[i, j]
        ax[i] = anchors[i, 0]
        ay[i] = anchors[i, 1]
        st[i] = stance[i]
        dis[i] = disabled[i]
        hx[i] = hips[i, 0]
        hy[i] = hips[i, 1]
        hyaw[i] = hips[i, 2]
        bx[i] = 0.0
        by[i] = 0.0
        contact[i] = 0

    cdef long long instab = 0
    cdef long long slips = 0
    cdef double d, q2, q3, u, zl, yaw_i, cg, sg
    cdef double sax, say, sbx, sby, amx, amy, bmx, bmy, sc, sd
    cdef double bxc, byc, axc, ayc, gnew, cn, sn, tx, ty
    cdef double dx, dy, dyaw, px_old, py_old
    cdef double wx, wy, rx, ry, r, ddx, ddy, rvx, rvy
    cdef int k
    cdef long long mask

    for step in range(n):
        # servo joints toward the commanded row under the rate limit
        for i in range(L):
            if dis[i]:
                qq[i][0] = qn[i][0]
                qq[i][1] = qn[i][1]
                qq[i][2] = qn[i][2]
            else:
                for j in range(3):
                    d = qdes[step, i, j] - qq[i][j]
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
            dx = tx - px + noise[step, 0]
            dy = ty - py + noise[step, 1]
            dyaw = _wrap(gnew - pyaw) + noise[step, 2]
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
