# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled propagation kernel.

Twin of `gyrocal.kernels.pure.propagate_block`: identical math (corrected
measurements -> strapdown step -> midpoint-F covariance propagation with
per-step health checks), hand-rolled in C for the per-sample hot loop.
The covariance product uses the sparsity of Phi = I + F dt.
"""

import numpy as np

from libc.math cimport cos, exp, fabs, sin, sqrt, tan
from libc.string cimport memset

from ..exceptions import InvalidCorrectionError
from .types import BlockHealth

# WGS-84 / gravity constants; must match gyrocal.earth exactly.
cdef double AX = 6378137.0
cdef double FLAT = 1.0 / 298.257223563
cdef double E2 = FLAT * (2.0 - FLAT)
cdef double OMEGA_E = 7.292115e-5
cdef double GE = 9.7803253359
cdef double K_SOM = 1.931852652458e-3
cdef double GM_E = 3.986004418e14
cdef double M_RATIO = OMEGA_E * OMEGA_E * AX * AX * (AX * (1.0 - FLAT)) / GM_E

cdef int NS = 21


cdef inline void _quat_mult(const double* p, const double* q, double* out) nogil:
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    out[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]


cdef inline void _quat_from_rotvec(const double* phi, double* out) nogil:
    cdef double angle = sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    cdef double half = 0.5 * angle
    cdef double k
    if angle < 1e-8:
        k = 0.5 - angle * angle / 48.0
    else:
        k = sin(half) / angle
    out[0] = cos(half)
    out[1] = k * phi[0]
    out[2] = k * phi[1]
    out[3] = k * phi[2]


cdef inline void _quat_normalize(double* q) nogil:
    cdef double n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    q[0] /= n
    q[1] /= n
    q[2] /= n
    q[3] /= n


cdef inline void _dcm_from_quat(const double* q, double* C) nogil:
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    C[0] = 1.0 - 2.0 * (y * y + z * z)
    C[1] = 2.0 * (x * y - w * z)
    C[2] = 2.0 * (x * z + w * y)
    C[3] = 2.0 * (x * y + w * z)
    C[4] = 1.0 - 2.0 * (x * x + z * z)
    C[5] = 2.0 * (y * z - w * x)
    C[6] = 2.0 * (x * z - w * y)
    C[7] = 2.0 * (y * z + w * x)
    C[8] = 1.0 - 2.0 * (x * x + y * y)


cdef inline void _matvec3(const double* C, const double* v, double* out) nogil:
    out[0] = C[0] * v[0] + C[1] * v[1] + C[2] * v[2]
    out[1] = C[3] * v[0] + C[4] * v[1] + C[5] * v[2]
    out[2] = C[6] * v[0] + C[7] * v[1] + C[8] * v[2]


cdef inline void _matvec3_t(const double* C, const double* v, double* out) nogil:
    out[0] = C[0] * v[0] + C[3] * v[1] + C[6] * v[2]
    out[1] = C[1] * v[0] + C[4] * v[1] + C[7] * v[2]
    out[2] = C[2] * v[0] + C[5] * v[1] + C[8] * v[2]


cdef inline void _cross(const double* a, const double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _gravity(double lat, double h) nogil:
    cdef double s2 = sin(lat) * sin(lat)
    cdef double g0 = GE * (1.0 + K_SOM * s2) / sqrt(1.0 - E2 * s2)
    cdef double h_corr = (
        1.0
        - 2.0 / AX * (1.0 + FLAT + M_RATIO - 2.0 * FLAT * s2) * h
        + 3.0 / (AX * AX) * h * h
    )
    return g0 * h_corr


cdef inline void _set_skew(double* F, int r, int c, const double* v, double sign) nogil:
    # F[r:r+3, c:c+3] = sign * skew(v)
    F[(r + 0) * NS + c + 1] = -sign * v[2]
    F[(r + 0) * NS + c + 2] = sign * v[1]
    F[(r + 1) * NS + c + 0] = sign * v[2]
    F[(r + 1) * NS + c + 2] = -sign * v[0]
    F[(r + 2) * NS + c + 0] = -sign * v[1]
    F[(r + 2) * NS + c + 1] = sign * v[0]


cdef int _cholesky_ok(const double* P, double shift) nogil:
    # Cholesky feasibility of P + shift*I on a stack copy.
    cdef double L[441]
    cdef int i, j, k
    cdef double s
    for i in range(NS):
        for j in range(NS):
            L[i * NS + j] = P[i * NS + j]
        L[i * NS + i] += shift
    for i in range(NS):
        for j in range(i + 1):
            s = L[i * NS + j]
            for k in range(j):
                s -= L[i * NS + k] * L[j * NS + k]
            if i == j:
                if s <= 0.0:
                    return 0
                L[i * NS + i] = sqrt(s)
            else:
                L[i * NS + j] = s / L[j * NS + j]
    return 1


def propagate_block(
    pos_in,
    vel_in,
    quat_in,
    x_in,
    P_in,
    errs_in,
    gyro_in,
    accel_in,
    double dt,
    params,
):
    """Compiled counterpart of `gyrocal.kernels.pure.propagate_block`."""
    cdef double[::1] pos = np.ascontiguousarray(pos_in, dtype=np.float64).copy()
    cdef double[::1] vel = np.ascontiguousarray(vel_in, dtype=np.float64).copy()
    cdef double[::1] quat = np.ascontiguousarray(quat_in, dtype=np.float64).copy()
    x_out = np.ascontiguousarray(x_in, dtype=np.float64).copy()
    P_out = np.ascontiguousarray(P_in, dtype=np.float64).copy()
    cdef double[::1] x = x_out
    cdef double[:, ::1] Pm = P_out
    cdef double[::1] errs = np.ascontiguousarray(errs_in, dtype=np.float64)
    cdef double[:, ::1] gyro = np.ascontiguousarray(gyro_in, dtype=np.float64)
    cdef double[:, ::1] accel = np.ascontiguousarray(accel_in, dtype=np.float64)

    cdef double[::1] gm_tau = np.ascontiguousarray(params.gm_tau, dtype=np.float64)
    cdef double[::1] gm_qd = np.ascontiguousarray(params.gm_qd, dtype=np.float64)
    cdef double q_vel = params.q_vel
    cdef double q_att = params.q_att
    cdef bint earth_rot = params.earth_rotation
    cdef bint transport = params.transport_rate
    cdef bint health = params.health_checks

    cdef int n = gyro.shape[0]
    quats_np = np.empty((n, 4), dtype=np.float64)
    cdef double[:, ::1] quats = quats_np

    cdef double* P = &Pm[0, 0]
    cdef double F[441]
    cdef double FP[441]
    cdef double T[441]
    cdef double TFt[441]
    cdef double xbuf[21]
    cdef double qd_diag[21]

    cdef int i, j, k, c, r
    for i in range(NS):
        qd_diag[i] = 0.0
    for i in range(3):
        qd_diag[3 + i] = q_vel
        qd_diag[6 + i] = q_att
        qd_diag[9 + i] = gm_qd[0]
        qd_diag[12 + i] = gm_qd[1]
        qd_diag[15 + i] = gm_qd[2]
        qd_diag[18 + i] = gm_qd[3]

    cdef double bg[3]
    cdef double ba[3]
    cdef double sg1[3]
    cdef double sa1[3]
    for i in range(3):
        bg[i] = errs[i]
        ba[i] = errs[3 + i]
        sg1[i] = 1.0 + errs[6 + i]
        sa1[i] = 1.0 + errs[9 + i]
        if fabs(sg1[i]) <= 0.5 or fabs(sa1[i]) <= 0.5:
            raise InvalidCorrectionError("scale-factor correction out of range")

    cdef double max_asym = 0.0
    cdef int psd_failures = 0
    cdef bint x_nonzero = False
    for i in range(NS):
        if x[i] != 0.0:
            x_nonzero = True
            break

    cdef double lat, lon, h, s_lat, c_lat, d, r_m, r_n, g
    cdef double wg[3]
    cdef double fa[3]
    cdef double w_ie[3]
    cdef double w_en[3]
    cdef double w_in[3]
    cdef double zeta[3]
    cdef double phi_b[3]
    cdef double tmp3[3]
    cdef double cor[3]
    cdef double f_n[3]
    cdef double f_n_mid[3]
    cdef double v_new[3]
    cdef double v_avg[3]
    cdef double qa[4]
    cdef double qb[4]
    cdef double qc[4]
    cdef double q_new[4]
    cdef double C_fmid[9]
    cdef double C_vmid[9]
    cdef double fij, asym, shift, tr
    cdef int sample

    for sample in range(n):
        lat = pos[0]
        lon = pos[1]
        h = pos[2]
        s_lat = sin(lat)
        c_lat = cos(lat)
        d = 1.0 - E2 * s_lat * s_lat
        r_n = AX / sqrt(d)
        r_m = AX * (1.0 - E2) / (d * sqrt(d))
        g = _gravity(lat, h)

        for i in range(3):
            wg[i] = (gyro[sample, i] - bg[i]) / sg1[i]
            fa[i] = (accel[sample, i] - ba[i]) / sa1[i]

        if earth_rot:
            w_ie[0] = OMEGA_E * c_lat
            w_ie[1] = 0.0
            w_ie[2] = -OMEGA_E * s_lat
        else:
            w_ie[0] = w_ie[1] = w_ie[2] = 0.0
        if transport:
            w_en[0] = vel[1] / (r_n + h)
            w_en[1] = -vel[0] / (r_m + h)
            w_en[2] = -vel[1] * tan(lat) / (r_n + h)
        else:
            w_en[0] = w_en[1] = w_en[2] = 0.0
        for i in range(3):
            w_in[i] = w_ie[i] + w_en[i]
            zeta[i] = w_in[i] * dt
            phi_b[i] = wg[i] * dt

        # --- F at the interval midpoint attitude (body half-increment) ---
        for i in range(3):
            tmp3[i] = 0.5 * phi_b[i]
        _quat_from_rotvec(tmp3, qb)
        _quat_mult(&quat[0], qb, qa)
        _quat_normalize(qa)
        _dcm_from_quat(qa, C_fmid)
        _matvec3(C_fmid, fa, f_n)

        memset(F, 0, sizeof(F))
        _set_skew(F, 0, 0, w_en, -1.0)
        F[0 * NS + 3] = 1.0
        F[1 * NS + 4] = 1.0
        F[2 * NS + 5] = 1.0
        for i in range(3):
            tmp3[i] = 2.0 * w_ie[i] + w_en[i]
        _set_skew(F, 3, 3, tmp3, -1.0)
        _set_skew(F, 3, 6, f_n, 1.0)
        _set_skew(F, 6, 6, w_in, -1.0)
        for r in range(3):
            for c in range(3):
                F[(3 + r) * NS + 12 + c] = C_fmid[3 * r + c]
                F[(3 + r) * NS + 18 + c] = C_fmid[3 * r + c] * accel[sample, c]
                F[(6 + r) * NS + 9 + c] = -C_fmid[3 * r + c]
                F[(6 + r) * NS + 15 + c] = -C_fmid[3 * r + c] * gyro[sample, c]
        for i in range(3):
            F[(9 + i) * NS + 9 + i] = -1.0 / gm_tau[0]
            F[(12 + i) * NS + 12 + i] = -1.0 / gm_tau[1]
            F[(15 + i) * NS + 15 + i] = -1.0 / gm_tau[2]
            F[(18 + i) * NS + 18 + i] = -1.0 / gm_tau[3]

        # --- strapdown step ---
        for i in range(3):
            tmp3[i] = -zeta[i]
        _quat_from_rotvec(tmp3, qa)  # nav rotation
        _quat_from_rotvec(phi_b, qb)  # body rotation
        _quat_mult(&quat[0], qb, qc)
        _quat_mult(qa, qc, q_new)
        _quat_normalize(q_new)

        for i in range(3):
            tmp3[i] = -0.5 * zeta[i]
        _quat_from_rotvec(tmp3, qa)
        for i in range(3):
            tmp3[i] = 0.5 * phi_b[i]
        _quat_from_rotvec(tmp3, qb)
        _quat_mult(&quat[0], qb, qc)
        _quat_mult(qa, qc, qb)
        _dcm_from_quat(qb, C_vmid)
        _matvec3(C_vmid, fa, f_n_mid)

        for i in range(3):
            tmp3[i] = 2.0 * w_ie[i] + w_en[i]
        _cross(tmp3, &vel[0], cor)
        for i in range(3):
            v_new[i] = vel[i] + (f_n_mid[i] + (g if i == 2 else 0.0) - cor[i]) * dt
            v_avg[i] = 0.5 * (vel[i] + v_new[i])

        pos[0] = lat + v_avg[0] / (r_m + h) * dt
        pos[1] = lon + v_avg[1] / ((r_n + h) * c_lat) * dt
        pos[2] = h - v_avg[2] * dt
        for i in range(3):
            vel[i] = v_new[i]
        for i in range(4):
            quat[i] = q_new[i]
            quats[sample, i] = q_new[i]

        # --- error-state and covariance propagation: Phi = I + F dt ---
        if x_nonzero:
            for i in range(NS):
                xbuf[i] = x[i]
                for j in range(NS):
                    fij = F[i * NS + j]
                    if fij != 0.0:
                        xbuf[i] += dt * fij * x[j]
            for i in range(NS):
                x[i] = xbuf[i]

        memset(FP, 0, sizeof(FP))
        for i in range(NS):
            for j in range(NS):
                fij = F[i * NS + j]
                if fij != 0.0:
                    for k in range(NS):
                        FP[i * NS + k] += fij * P[j * NS + k]
        for i in range(NS):
            for k in range(NS):
                T[i * NS + k] = P[i * NS + k] + dt * FP[i * NS + k]
        memset(TFt, 0, sizeof(TFt))
        for k in range(NS):
            for j in range(NS):
                fij = F[k * NS + j]
                if fij != 0.0:
                    for i in range(NS):
                        TFt[i * NS + k] += fij * T[i * NS + j]
        for i in range(NS):
            for k in range(NS):
                P[i * NS + k] = T[i * NS + k] + dt * TFt[i * NS + k]
            P[i * NS + i] += qd_diag[i]

        if health:
            for i in range(NS):
                for k in range(i + 1, NS):
                    asym = fabs(P[i * NS + k] - P[k * NS + i])
                    if asym > max_asym:
                        max_asym = asym
        for i in range(NS):
            for k in range(i + 1, NS):
                P[i * NS + k] = 0.5 * (P[i * NS + k] + P[k * NS + i])
                P[k * NS + i] = P[i * NS + k]
        if health:
            tr = 0.0
            for i in range(NS):
                tr += P[i * NS + i]
            shift = 1e-9 * tr
            if not _cholesky_ok(P, shift):
                psd_failures += 1

    return (
        np.asarray(pos),
        np.asarray(vel),
        np.asarray(quat),
        x_out,
        P_out,
        quats_np,
        BlockHealth(max_asym=max_asym, psd_failures=psd_failures),
    )
