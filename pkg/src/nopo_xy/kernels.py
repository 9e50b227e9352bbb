"""Compiled inner loops.

Random numbers are never drawn here: callers draw them from a numpy
``Generator`` in blocks and pass them in, so a seed fixes every trajectory
regardless of how the work is chunked or scheduled.
"""

import math

import numba as nb
import numpy as np

_THIRD = 1.0 / 3.0
_INV27 = 1.0 / 27.0


@nb.njit(cache=True, nogil=True)
def saturation(x):
    # both cube-root radicands are non-negative for x >= 0; the first is written
    # in its cancellation-free form
    root = math.sqrt(x * 0.25 + _INV27)
    half = 0.5 * math.sqrt(x)
    small = _INV27 / (root + half)
    c = small**_THIRD - (half + root) ** _THIRD
    return 1.0 / (1.0 + c * c)


@nb.njit(cache=True, nogil=True)
def saturation_array(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = saturation(x[i])
    return out


@nb.njit(cache=True, nogil=True)
def opo_gain(n, n0, pump_ratio, gamma_s):
    """Net linear gain ``(gamma_s/2)[(s(n/n0) r)^4 - 1]`` of one field."""
    g = saturation(n / n0) * pump_ratio
    g2 = g * g
    return 0.5 * gamma_s * (g2 * g2 - 1.0)


@nb.njit(cache=True, nogil=True)
def kuramoto_steps(theta, ks, ls, ws, coef, noise_scale, dt, noise):
    """Euler-Maruyama on ``dtheta_k = -coef sum_l J_kl sin(theta_k - theta_l) dt + sqrt(D dt) z``."""
    n_steps, n = noise.shape
    grad = np.empty(n)
    for s in range(n_steps):
        grad[:] = 0.0
        for e in range(ks.shape[0]):
            k = ks[e]
            l = ls[e]
            f = ws[e] * math.sin(theta[k] - theta[l])
            grad[k] += f
            grad[l] -= f
        for k in range(n):
            theta[k] += -coef * grad[k] * dt + noise_scale * noise[s, k]


@nb.njit(cache=True, nogil=True)
def full_field_steps(re, im, ks, ls, ws, n0, pump_ratio, gamma_s, coef, noise_scale, dt, noise):
    """Euler-Maruyama on the complex network Langevin equation.

    ``noise`` has shape ``(steps, 2, N)``: real and imaginary standard normals.
    Returns the number of completed steps; fewer than requested means a field
    became non-finite.
    """
    n_steps = noise.shape[0]
    n = re.shape[0]
    inj_re = np.empty(n)
    inj_im = np.empty(n)
    for s in range(n_steps):
        inj_re[:] = 0.0
        inj_im[:] = 0.0
        for e in range(ks.shape[0]):
            k = ks[e]
            l = ls[e]
            w = ws[e]
            inj_re[k] += w * re[l]
            inj_im[k] += w * im[l]
            inj_re[l] += w * re[k]
            inj_im[l] += w * im[k]
        for k in range(n):
            gain = opo_gain(re[k] * re[k] + im[k] * im[k], n0, pump_ratio, gamma_s)
            re_k = re[k] + (gain * re[k] + coef * inj_re[k]) * dt + noise_scale * noise[s, 0, k]
            im_k = im[k] + (gain * im[k] + coef * inj_im[k]) * dt + noise_scale * noise[s, 1, k]
            if not (math.isfinite(re_k) and math.isfinite(im_k)):
                return s
            re[k] = re_k
            im[k] = im_k
    return n_steps


@nb.njit(cache=True, nogil=True)
def split_step(n_k, theta, ks, ls, ws, n0, pump_ratio, gamma_s, gamma_inj, diffusion_d, dt, dw_n, dw_theta):
    """One Euler-Maruyama step of the photon-number/phase equations.

    ``dw_n`` and ``dw_theta`` are Wiener increments (variance dt). Leaves the
    state untouched and returns False when any photon number would reach zero.
    """
    n = n_k.shape[0]
    cos_sum = np.zeros(n)
    sin_sum = np.zeros(n)
    root = np.sqrt(n_k)
    for e in range(ks.shape[0]):
        k = ks[e]
        l = ls[e]
        w = ws[e]
        diff = theta[k] - theta[l]
        c = w * math.cos(diff)
        si = w * math.sin(diff)
        # sqrt(n_l) sits inside the sum over l
        cos_sum[k] += c * root[l]
        cos_sum[l] += c * root[k]
        sin_sum[k] += si * root[l]
        sin_sum[l] -= si * root[k]
    new_n = np.empty(n)
    for k in range(n):
        gain = 2.0 * opo_gain(n_k[k], n0, pump_ratio, gamma_s)
        drift = gain * n_k[k] + gamma_inj * root[k] * cos_sum[k] + 2.0 * diffusion_d
        new_n[k] = n_k[k] + drift * dt + 2.0 * math.sqrt(diffusion_d * n_k[k]) * dw_n[k]
        if not new_n[k] > 0.0:
            return False
    for k in range(n):
        drift = -0.5 * gamma_inj * sin_sum[k] / root[k]
        theta[k] += drift * dt + math.sqrt(diffusion_d / n_k[k]) * dw_theta[k]
        n_k[k] = new_n[k]
    return True


@nb.njit(cache=True, nogil=True)
def split_steps(n_k, theta, ks, ls, ws, n0, pump_ratio, gamma_s, gamma_inj, diffusion_d, dt, noise):
    """Run whole steps from ``noise`` (shape ``(steps, 2, N)``, standard normals).

    Returns the index of the first rejected step, or the number of steps.
    """
    sqrt_dt = math.sqrt(dt)
    for s in range(noise.shape[0]):
        ok = split_step(
            n_k, theta, ks, ls, ws, n0, pump_ratio, gamma_s, gamma_inj, diffusion_d, dt,
            noise[s, 0] * sqrt_dt, noise[s, 1] * sqrt_dt,
        )
        if not ok:
            return s
    return noise.shape[0]


@nb.njit(cache=True, nogil=True)
def metropolis_sweep(theta, indptr, indices, weights, beta, width, order, jumps, uniforms):
    """One sweep of single-site Metropolis updates, visiting sites in ``order``.

    ``jumps`` are uniform on [-1, 1) (scaled by ``width``), ``uniforms`` on [0, 1).
    Returns the number of accepted moves.
    """
    accepted = 0
    for i in range(order.shape[0]):
        k = order[i]
        old = theta[k]
        new = old + width * jumps[i]
        new = (new + math.pi) % (2.0 * math.pi) - math.pi
        delta = 0.0
        for p in range(indptr[k], indptr[k + 1]):
            other = theta[indices[p]]
            delta -= weights[p] * (math.cos(new - other) - math.cos(old - other))
        if delta <= 0.0 or uniforms[i] < math.exp(-beta * delta):
            theta[k] = new
            accepted += 1
    return accepted
