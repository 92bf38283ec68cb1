"""Adaptive Runge-Kutta-Fehlberg 7(8) drivers, JIT-compiled.

One embedded 13-stage tableau serves three specialized integrators:

* :func:`integrate_orbit`     -- classical Hamilton equations in Cartesian
  coordinates (6 real components, optional escape stop, exact restoration
  of the conserved axial angular momentum after every accepted step),
* :func:`integrate_schrodinger` -- amplitude equations in the interaction
  picture (complex vector, sparse coupling matrix, chirped scalar drive),
* :func:`integrate_chain`     -- rotating-frame tridiagonal chain.

Each driver records the state on a caller-supplied monotone sample grid by
clipping steps to sample times (cheap next to the step counts involved) and
returns a status code: 0 done, 1 stopped at the escape radius, 2 step-size
underflow or non-finite state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Fehlberg 7(8) coefficients. Stage nodes, coupling matrix, 8th-order
# propagation weights; the embedded error estimate is
# h * 41/840 * (k0 + k10 - k11 - k12).
_C = np.array(
    [0.0, 2 / 27, 1 / 9, 1 / 6, 5 / 12, 1 / 2, 5 / 6, 1 / 6, 2 / 3, 1 / 3, 1.0, 0.0, 1.0]
)

_A = np.zeros((13, 12))
_A[1, 0] = 2 / 27
_A[2, :2] = (1 / 36, 1 / 12)
_A[3, :3] = (1 / 24, 0.0, 1 / 8)
_A[4, :4] = (5 / 12, 0.0, -25 / 16, 25 / 16)
_A[5, :5] = (1 / 20, 0.0, 0.0, 1 / 4, 1 / 5)
_A[6, :6] = (-25 / 108, 0.0, 0.0, 125 / 108, -65 / 27, 125 / 54)
_A[7, :7] = (31 / 300, 0.0, 0.0, 0.0, 61 / 225, -2 / 9, 13 / 900)
_A[8, :8] = (2.0, 0.0, 0.0, -53 / 6, 704 / 45, -107 / 9, 67 / 90, 3.0)
_A[9, :9] = (-91 / 108, 0.0, 0.0, 23 / 108, -976 / 135, 311 / 54, -19 / 60, 17 / 6, -1 / 12)
_A[10, :10] = (
    2383 / 4100, 0.0, 0.0, -341 / 164, 4496 / 1025, -301 / 82, 2133 / 4100,
    45 / 82, 45 / 164, 18 / 41,
)
_A[11, :11] = (3 / 205, 0.0, 0.0, 0.0, 0.0, -6 / 41, -3 / 205, -3 / 41, 3 / 41, 6 / 41, 0.0)
_A[12, :12] = (
    -1777 / 4100, 0.0, 0.0, -341 / 164, 4496 / 1025, -289 / 82, 2193 / 4100,
    51 / 82, 33 / 164, 12 / 41, 0.0, 1.0,
)

_B8 = np.array(
    [0.0, 0.0, 0.0, 0.0, 0.0, 34 / 105, 9 / 35, 9 / 35, 9 / 280, 9 / 280, 0.0, 41 / 840, 41 / 840]
)

_ERR_W = 41.0 / 840.0

STATUS_DONE = 0
STATUS_ESCAPED = 1
STATUS_FAILED = 2


@njit(cache=True)
def _orbit_rhs(tau, y, amp2, eps_c, omega0, phi0, out):
    x, yy, z, px, py, pz = y[0], y[1], y[2], y[3], y[4], y[5]
    r2 = x * x + yy * yy + z * z
    r = np.sqrt(r2)
    inv_r3 = 1.0 / (r2 * r)
    out[0] = amp2 * px
    out[1] = amp2 * py
    out[2] = amp2 * pz
    out[3] = -amp2 * x * inv_r3
    out[4] = -amp2 * yy * inv_r3
    out[5] = -amp2 * z * inv_r3 - eps_c * np.cos(phi0 + (omega0 - 0.5 * tau) * tau)


@njit(cache=True)
def integrate_orbit(
    y0,
    tau0,
    tau1,
    amp2,
    eps_c,
    omega0,
    phi0,
    rtol,
    atol,
    sample_taus,
    r_escape,
    stop_on_escape,
):
    """Integrate the driven two-body problem; see module docstring.

    Returns (samples, y_final, tau_final, status, n_steps).  Samples past
    an early stop keep the stopped state (r frozen at the escape point).
    """
    n = 6
    ns = sample_taus.shape[0]
    samples = np.empty((ns, n))
    y = y0.copy()
    yw = np.empty(n)
    k = np.empty((13, n))
    err = np.empty(n)
    direction = 1.0 if tau1 >= tau0 else -1.0
    span = abs(tau1 - tau0)
    tau = tau0
    h = direction * min(1e-4, span if span > 0 else 1e-4)
    pphi0 = y[0] * y[4] - y[1] * y[3]
    isample = 0
    status = STATUS_DONE
    n_steps = 0
    min_h = 1e-14 * max(1.0, span)
    while isample < ns and direction * (sample_taus[isample] - tau) <= 0.0:
        for i in range(n):
            samples[isample, i] = y[i]
        isample += 1
    while direction * (tau1 - tau) > 1e-14 * max(1.0, abs(tau)):
        if direction * (tau + h - tau1) > 0.0:
            h = tau1 - tau
        # do not step across the next sample time
        if isample < ns and direction * (tau + h - sample_taus[isample]) > 0.0:
            h = sample_taus[isample] - tau
        _orbit_rhs(tau, y, amp2, eps_c, omega0, phi0, k[0])
        bad = False
        for s in range(1, 13):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    aij = _A[s, j]
                    if aij != 0.0:
                        acc += aij * k[j, i]
                yw[i] = y[i] + h * acc
            _orbit_rhs(tau + _C[s] * h, yw, amp2, eps_c, omega0, phi0, k[s])
        err_norm = 0.0
        for i in range(n):
            acc = 0.0
            for s in range(13):
                bs = _B8[s]
                if bs != 0.0:
                    acc += bs * k[s, i]
            yw[i] = y[i] + h * acc
            err[i] = h * _ERR_W * (k[0, i] + k[10, i] - k[11, i] - k[12, i])
            sc = atol + rtol * max(abs(y[i]), abs(yw[i]))
            e = err[i] / sc
            err_norm += e * e
            if not np.isfinite(yw[i]):
                bad = True
        err_norm = np.sqrt(err_norm / n)
        if bad:
            h *= 0.25
            if abs(h) < min_h:
                status = STATUS_FAILED
                break
            continue
        if err_norm <= 1.0:
            tau += h
            for i in range(n):
                y[i] = yw[i]
            # restore the exactly conserved axial angular momentum
            rho2 = y[0] * y[0] + y[1] * y[1]
            if rho2 > 1e-300:
                lam = (pphi0 - (y[0] * y[4] - y[1] * y[3])) / rho2
                y[3] -= lam * y[1]
                y[4] += lam * y[0]
            n_steps += 1
            while isample < ns and direction * (sample_taus[isample] - tau) <= 1e-12 * max(1.0, abs(tau)):
                for i in range(n):
                    samples[isample, i] = y[i]
                isample += 1
            if stop_on_escape:
                r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
                if r2 > r_escape * r_escape:
                    r = np.sqrt(r2)
                    p2 = y[3] * y[3] + y[4] * y[4] + y[5] * y[5]
                    energy = 0.5 * amp2 * (p2 - 2.0 / r)
                    if energy > 0.0:
                        status = STATUS_ESCAPED
                        break
        factor = 0.9 * err_norm ** (-0.125) if err_norm > 0.0 else 5.0
        if factor > 5.0:
            factor = 5.0
        elif factor < 0.2:
            factor = 0.2
        h *= factor
        if abs(h) < min_h:
            status = STATUS_FAILED
            break
    while isample < ns:
        for i in range(n):
            samples[isample, i] = y[i]
        isample += 1
    return samples, y, tau, status, n_steps


@njit(cache=True)
def _schrodinger_rhs(tau, a, energies, indptr, indices, data, p1, omega0, w, out):
    f = 2.0 * p1 * np.cos((omega0 - 0.5 * tau) * tau)
    n = a.shape[0]
    for i in range(n):
        ph = energies[i] * tau
        w[i] = (np.cos(ph) - 1j * np.sin(ph)) * a[i]
    for i in range(n):
        acc = 0.0 + 0.0j
        for idx in range(indptr[i], indptr[i + 1]):
            acc += data[idx] * w[indices[idx]]
        ph = energies[i] * tau
        out[i] = -1j * f * (np.cos(ph) + 1j * np.sin(ph)) * acc


@njit(cache=True)
def integrate_schrodinger(
    a0, tau0, tau1, energies, indptr, indices, data, p1, omega0, rtol, atol, sample_taus
):
    """Interaction-picture amplitude integration over a sparse coupling matrix."""
    n = a0.shape[0]
    ns = sample_taus.shape[0]
    samples = np.empty((ns, n), dtype=np.complex128)
    a = a0.copy()
    aw = np.empty(n, dtype=np.complex128)
    w = np.empty(n, dtype=np.complex128)
    k = np.empty((13, n), dtype=np.complex128)
    direction = 1.0 if tau1 >= tau0 else -1.0
    span = abs(tau1 - tau0)
    tau = tau0
    h = direction * min(1e-5, span if span > 0 else 1e-5)
    isample = 0
    status = STATUS_DONE
    n_steps = 0
    min_h = 1e-14 * max(1.0, span)
    while isample < ns and direction * (sample_taus[isample] - tau) <= 0.0:
        for i in range(n):
            samples[isample, i] = a[i]
        isample += 1
    while direction * (tau1 - tau) > 1e-14 * max(1.0, abs(tau)):
        if direction * (tau + h - tau1) > 0.0:
            h = tau1 - tau
        if isample < ns and direction * (tau + h - sample_taus[isample]) > 0.0:
            h = sample_taus[isample] - tau
        _schrodinger_rhs(tau, a, energies, indptr, indices, data, p1, omega0, w, k[0])
        bad = False
        for s in range(1, 13):
            for i in range(n):
                acc = 0.0 + 0.0j
                for j in range(s):
                    aij = _A[s, j]
                    if aij != 0.0:
                        acc += aij * k[j, i]
                aw[i] = a[i] + h * acc
            _schrodinger_rhs(
                tau + _C[s] * h, aw, energies, indptr, indices, data, p1, omega0, w, k[s]
            )
        err_norm = 0.0
        for i in range(n):
            acc = 0.0 + 0.0j
            for s in range(13):
                bs = _B8[s]
                if bs != 0.0:
                    acc += bs * k[s, i]
            aw[i] = a[i] + h * acc
            e = h * _ERR_W * (k[0, i] + k[10, i] - k[11, i] - k[12, i])
            sc = atol + rtol * max(abs(a[i]), abs(aw[i]))
            q = abs(e) / sc
            err_norm += q * q
            if not (np.isfinite(aw[i].real) and np.isfinite(aw[i].imag)):
                bad = True
        err_norm = np.sqrt(err_norm / n)
        if bad:
            h *= 0.25
            if abs(h) < min_h:
                status = STATUS_FAILED
                break
            continue
        if err_norm <= 1.0:
            tau += h
            for i in range(n):
                a[i] = aw[i]
            n_steps += 1
            while isample < ns and direction * (sample_taus[isample] - tau) <= 1e-12 * max(1.0, abs(tau)):
                for i in range(n):
                    samples[isample, i] = a[i]
                isample += 1
        factor = 0.9 * err_norm ** (-0.125) if err_norm > 0.0 else 5.0
        if factor > 5.0:
            factor = 5.0
        elif factor < 0.2:
            factor = 0.2
        h *= factor
        if abs(h) < min_h:
            status = STATUS_FAILED
            break
    while isample < ns:
        for i in range(n):
            samples[isample, i] = a[i]
        isample += 1
    return samples, a, tau, status, n_steps


@njit(cache=True)
def _chain_rhs(tau, b, de, ks, cs, p1, omega0, out):
    omega_d = omega0 - tau
    n = b.shape[0]
    for i in range(n):
        acc = (de[i] - ks[i] * omega_d) * b[i]
        if i + 1 < n:
            acc += p1 * cs[i] * b[i + 1]
        if i > 0:
            acc += p1 * cs[i - 1] * b[i - 1]
        out[i] = -1j * acc
    return out


@njit(cache=True)
def integrate_chain(b0, tau0, tau1, de, ks, cs, p1, omega0, rtol, atol, sample_taus):
    """Rotating-frame chain integration.

    ``de[k] = E(n_k) - E(n_0)`` and ``ks[k] = k`` give the gauge-shifted
    diagonal ``de[k] - k*omega_d(tau)``; ``cs[k]`` couples k and k+1.
    """
    n = b0.shape[0]
    ns = sample_taus.shape[0]
    samples = np.empty((ns, n), dtype=np.complex128)
    b = b0.copy()
    bw = np.empty(n, dtype=np.complex128)
    k = np.empty((13, n), dtype=np.complex128)
    direction = 1.0 if tau1 >= tau0 else -1.0
    span = abs(tau1 - tau0)
    tau = tau0
    h = direction * min(1e-4, span if span > 0 else 1e-4)
    isample = 0
    status = STATUS_DONE
    n_steps = 0
    min_h = 1e-14 * max(1.0, span)
    while isample < ns and direction * (sample_taus[isample] - tau) <= 0.0:
        for i in range(n):
            samples[isample, i] = b[i]
        isample += 1
    while direction * (tau1 - tau) > 1e-14 * max(1.0, abs(tau)):
        if direction * (tau + h - tau1) > 0.0:
            h = tau1 - tau
        if isample < ns and direction * (tau + h - sample_taus[isample]) > 0.0:
            h = sample_taus[isample] - tau
        _chain_rhs(tau, b, de, ks, cs, p1, omega0, k[0])
        bad = False
        for s in range(1, 13):
            for i in range(n):
                acc = 0.0 + 0.0j
                for j in range(s):
                    aij = _A[s, j]
                    if aij != 0.0:
                        acc += aij * k[j, i]
                bw[i] = b[i] + h * acc
            _chain_rhs(tau + _C[s] * h, bw, de, ks, cs, p1, omega0, k[s])
        err_norm = 0.0
        for i in range(n):
            acc = 0.0 + 0.0j
            for s in range(13):
                bs = _B8[s]
                if bs != 0.0:
                    acc += bs * k[s, i]
            bw[i] = b[i] + h * acc
            e = h * _ERR_W * (k[0, i] + k[10, i] - k[11, i] - k[12, i])
            sc = atol + rtol * max(abs(b[i]), abs(bw[i]))
            q = abs(e) / sc
            err_norm += q * q
            if not (np.isfinite(bw[i].real) and np.isfinite(bw[i].imag)):
                bad = True
        err_norm = np.sqrt(err_norm / n)
        if bad:
            h *= 0.25
            if abs(h) < min_h:
                status = STATUS_FAILED
                break
            continue
        if err_norm <= 1.0:
            tau += h
            for i in range(n):
                b[i] = bw[i]
            n_steps += 1
            while isample < ns and direction * (sample_taus[isample] - tau) <= 1e-12 * max(1.0, abs(tau)):
                for i in range(n):
                    samples[isample, i] = b[i]
                isample += 1
        factor = 0.9 * err_norm ** (-0.125) if err_norm > 0.0 else 5.0
        if factor > 5.0:
            factor = 5.0
        elif factor < 0.2:
            factor = 0.2
        h *= factor
        if abs(h) < min_h:
            status = STATUS_FAILED
            break
    while isample < ns:
        for i in range(n):
            samples[isample, i] = b[i]
        isample += 1
    return samples, b, tau, status, n_steps
