"""Scalar diagnostics, delay-window integrals, and exponential-decay certificates.

All window integrals use composite trapezoidal quadrature on the integrator's
grid; a partial cell at the left end of the window is closed with the Hermite
interpolant's derivative. The quadrature error is O(h^2) and is absorbed by
the explicit slack tolerances of the certificate checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .delay import DelaySpec, tau_eval
from .errors import LookbackError
from .model import ModelParams, weight_matrix
from .spectral import augment_self_weights, fiedler_number, laplacian, pairwise_mixing_min

_NAN = float("nan")


def position_variance(x: np.ndarray) -> float:
    """Mean squared pairwise distance over ordered pairs, halved: the
    (1/2n^2) double sum of |x_i - x_j|^2."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    return float(np.einsum("ijk,ijk->", diff, diff)) / (2.0 * n * n)


def velocity_variance(v: np.ndarray) -> float:
    return position_variance(v)


def velocity_fluctuation(v: np.ndarray):
    """Deviation from the mean velocity; the fluctuations sum to zero up to
    a second centering pass at roundoff level. Returns (mean, w)."""
    v = np.asarray(v, dtype=float)
    mean = v.mean(axis=0)
    w = v - mean
    w -= w.mean(axis=0)
    return mean, w


def diameters(x: np.ndarray, v: np.ndarray):
    """Maximal pairwise distances in position and velocity space."""

    def _diam(y):
        diff = y[:, None, :] - y[None, :, :]
        return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).max())

    return _diam(np.asarray(x, dtype=float)), _diam(np.asarray(v, dtype=float))


def _accel_scalars(vd: np.ndarray):
    """(sum_i |vdot_i|^2, max_i |vdot_i|) for one derivative sample."""
    sq = np.einsum("nd,nd->n", vd, vd)
    return float(sq.sum()), float(np.sqrt(sq.max()))


def _window_integrals(buffer, t: float, tau: float):
    """Quadratures over the window [t - tau, t] of the stored derivatives.

    Returns (int_sq, int_max, kernel_sq, kernel_max):
      * int_sq  = integral of sum_i |vdot_i(s)|^2,
      * int_max = integral of max_i |vdot_i(s)|,
      * kernel_sq / kernel_max = the exponentially weighted double integrals
        int e^{-(t-s)} int_s^t f(sigma) dsigma ds for the same integrands.

    ``t`` must coincide with the buffer's newest knots; the left window edge
    may fall between knots and is closed with an interpolated derivative.
    The one-sided derivative convention at the seed handover knot is honored
    cell by cell, so a purely ballistic seed integrates to exactly zero.
    """
    if tau < 0:
        raise ValueError("window integral: negative delay")
    if tau == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    h = buffer.h
    a = t - tau
    if a < buffer.t_start - 1e-9 * h:
        raise LookbackError(
            f"window [{a}, {t}] not covered by history starting at {buffer.t_start}")
    pos_a = a / h - buffer.k0
    pos_b = t / h - buffer.k0
    ib = int(round(pos_b))
    ia = max(0, math.ceil(pos_a - 1e-9))
    ia = min(ia, ib)

    vd = buffer.vdot[ia:ib + 1]
    f_sq = np.empty(ib - ia + 1)
    f_mx = np.empty(ib - ia + 1)
    for j, arr in enumerate(vd):
        f_sq[j], f_mx[j] = _accel_scalars(arr)

    # Per-cell end values; the right end of a cell landing on the handover
    # knot takes the seed-side derivative.
    nodes = [(buffer.k0 + i) * h for i in range(ia, ib + 1)]
    left_sq, right_sq = list(f_sq[:-1]), list(f_sq[1:])
    left_mx, right_mx = list(f_mx[:-1]), list(f_mx[1:])
    widths = [h] * (ib - ia)
    bk = buffer.boundary_k
    if bk is not None and buffer.boundary_vdot is not None and ia < bk - buffer.k0 <= ib:
        j = bk - buffer.k0 - ia - 1
        right_sq[j], right_mx[j] = _accel_scalars(buffer.boundary_vdot)

    frac = (buffer.k0 + ia) * h - a
    if frac > 1e-12 * h:
        vd_a = buffer.vdot_at(a)
        fa_sq, fa_mx = _accel_scalars(vd_a)
        first_sq = f_sq[0]
        first_mx = f_mx[0]
        if bk is not None and buffer.boundary_vdot is not None and bk - buffer.k0 == ia:
            first_sq, first_mx = _accel_scalars(buffer.boundary_vdot)
        nodes.insert(0, a)
        widths.insert(0, frac)
        left_sq.insert(0, fa_sq)
        right_sq.insert(0, first_sq)
        left_mx.insert(0, fa_mx)
        right_mx.insert(0, first_mx)

    widths = np.asarray(widths)
    left_sq, right_sq = np.asarray(left_sq), np.asarray(right_sq)
    left_mx, right_mx = np.asarray(left_mx), np.asarray(right_mx)
    cell_sq = 0.5 * widths * (left_sq + right_sq)
    cell_mx = 0.5 * widths * (left_mx + right_mx)
    int_sq = float(cell_sq.sum())
    int_mx = float(cell_mx.sum())

    # Suffix integrals I(s) = int_s^t f at the nodes, then the outer
    # trapezoid of e^{-(t-s)} I(s).
    suffix_sq = np.concatenate((np.cumsum(cell_sq[::-1])[::-1], [0.0]))
    suffix_mx = np.concatenate((np.cumsum(cell_mx[::-1])[::-1], [0.0]))
    expw = np.exp(np.asarray(nodes) - t)
    g_sq = expw * suffix_sq
    g_mx = expw * suffix_mx
    kernel_sq = float((0.5 * widths * (g_sq[:-1] + g_sq[1:])).sum())
    kernel_mx = float((0.5 * widths * (g_mx[:-1] + g_mx[1:])).sum())
    return int_sq, int_mx, kernel_sq, kernel_mx


def accel_energy_window(buffer, t: float, delay: DelaySpec) -> float:
    """Per-agent mean of the windowed squared-acceleration integral."""
    n = buffer.v[-1].shape[0]
    int_sq, _, _, _ = _window_integrals(buffer, t, tau_eval(delay, t))
    return int_sq / n


def accel_peak_window(buffer, t: float, delay: DelaySpec) -> float:
    """Windowed integral of the instantaneous maximal acceleration."""
    _, int_mx, _, _ = _window_integrals(buffer, t, tau_eval(delay, t))
    return int_mx


def lyapunov_l2(buffer, t: float, beta: float, delay: DelaySpec) -> float:
    """Quadratic functional: (1/2n)|w|^2 plus beta/n times the exponentially
    weighted double integral of the squared accelerations."""
    n = buffer.v[-1].shape[0]
    _, w = velocity_fluctuation(buffer.v[-1])
    _, _, kernel_sq, _ = _window_integrals(buffer, t, tau_eval(delay, t))
    return float(np.sum(w * w)) / (2.0 * n) + (beta / n) * kernel_sq


def lyapunov_linf(buffer, t: float, beta: float, delay: DelaySpec) -> float:
    """Diameter functional: d_V plus beta times the exponentially weighted
    double integral of the maximal acceleration."""
    _, d_v = diameters(buffer.x[-1], buffer.v[-1])
    _, _, _, kernel_mx = _window_integrals(buffer, t, tau_eval(delay, t))
    return d_v + beta * kernel_mx


@dataclass
class DiagnosticsRow:
    """Per-sample diagnostics; window and connectivity fields stay NaN in
    basic collection mode, functional/bound fields until a certificate is
    applied."""

    t: float
    X: float
    V: float
    d_X: float
    d_V: float
    mu: float = _NAN
    psi_star: float = _NAN
    r_tau: float = _NAN
    sigma_tau: float = _NAN
    max_accel: float = _NAN
    lyap_kernel_sq: float = _NAN
    lyap_kernel_max: float = _NAN
    lyap_l2: float = _NAN
    lyap_linf: float = _NAN
    bound_v: float = _NAN
    bound_dv: float = _NAN


def diagnostics_row(params: ModelParams, delay: DelaySpec, buffer, t: float,
                    full: bool) -> DiagnosticsRow:
    x, v = buffer.x[-1], buffer.v[-1]
    d_x, d_v = diameters(x, v)
    row = DiagnosticsRow(t=t, X=position_variance(x), V=velocity_variance(v),
                         d_X=d_x, d_V=d_v)
    if not full:
        return row
    tau_t = tau_eval(delay, t)
    int_sq, int_mx, kernel_sq, kernel_mx = _window_integrals(buffer, t, tau_t)
    row.r_tau = int_sq / params.n
    row.sigma_tau = int_mx
    row.lyap_kernel_sq = kernel_sq
    row.lyap_kernel_max = kernel_mx
    _, row.max_accel = _accel_scalars(buffer.vdot[-1])
    if params.variant != "normalized_nonsymmetric":
        row.mu = fiedler_number(laplacian(params, x))
    row.psi_star = pairwise_mixing_min(augment_self_weights(weight_matrix(params, x)))
    return row


@dataclass
class DecayCertificate:
    """Constants of one exponential-decay certificate.

    ``delay_ok`` records whether the delay gate holds; only then are beta,
    rate and amplitude populated and the bound V(t) or d_V(t) <= amplitude *
    exp(-rate*t) asserted.
    """

    kind: str  # "l2" | "linf"
    lam: float
    structural: float  # gamma (l2) or psi_star (linf)
    tau_bar: float
    c: float
    tau_threshold: float
    gate_value: float  # tau_bar^2 e^tau_bar (l2) or tau_bar e^tau_bar (linf)
    delay_ok: bool
    beta: Optional[float] = None
    rate: Optional[float] = None
    amplitude: Optional[float] = None
    seed_integral: float = 0.0
    initial_value: float = 0.0


def l2_certificate(lam: float, gamma: float, tau_bar: float, c: float,
                   seed_integral: float, v0: float) -> DecayCertificate:
    """Certificate for the variance decay under symmetric weights.

    gamma is the uniform lower bound on the Fiedler number; seed_integral is
    the exponentially weighted double integral of sum_i |vdot_i|^2 over the
    seed segment; v0 the initial velocity variance.
    """
    if gamma <= 0:
        raise ValueError("l2_certificate: gamma must be positive")
    if not 0.0 <= c < 1.0:
        raise ValueError("l2_certificate: delay slope bound c must be in [0, 1)")
    if tau_bar < 0:
        raise ValueError("l2_certificate: tau_bar must be nonnegative")
    tau0 = (gamma * gamma / (2.0 * lam * lam)) * (1.0 - c) / (2.0 * lam * lam + gamma * gamma)
    gate = tau_bar * tau_bar * math.exp(tau_bar)
    cert = DecayCertificate(kind="l2", lam=lam, structural=gamma, tau_bar=tau_bar,
                            c=c, tau_threshold=tau0, gate_value=gate,
                            delay_ok=gate < tau0, seed_integral=seed_integral,
                            initial_value=v0)
    if not cert.delay_ok:
        return cert
    denom = (1.0 - c) * math.exp(-tau_bar) - 2.0 * lam * lam * tau_bar * tau_bar
    cert.beta = (lam * lam * tau_bar / (2.0 * gamma)) / denom
    cert.rate = min(gamma - 4.0 * (lam ** 4 / gamma) * tau_bar * tau_bar / denom, 1.0)
    cert.amplitude = v0 + (lam * lam * tau_bar / gamma) / denom * seed_integral
    return cert


def linf_certificate(lam: float, psi_star: float, tau_bar: float, c: float,
                     seed_integral_max: float, dv0: float) -> DecayCertificate:
    """Certificate for the velocity-diameter decay under normalized weights.

    psi_star is the uniform lower bound on the pairwise mixing quantity;
    seed_integral_max the exponentially weighted double integral of
    max_j |vdot_j| over the seed segment; dv0 the initial diameter.
    """
    if psi_star <= 0:
        raise ValueError("linf_certificate: psi_star must be positive")
    if not 0.0 <= c < 1.0:
        raise ValueError("linf_certificate: delay slope bound c must be in [0, 1)")
    if tau_bar < 0:
        raise ValueError("linf_certificate: tau_bar must be nonnegative")
    tau0 = (1.0 - c) / lam * psi_star / (psi_star + 2.0)
    gate = tau_bar * math.exp(tau_bar)
    cert = DecayCertificate(kind="linf", lam=lam, structural=psi_star, tau_bar=tau_bar,
                            c=c, tau_threshold=tau0, gate_value=gate,
                            delay_ok=gate < tau0, seed_integral=seed_integral_max,
                            initial_value=dv0)
    if not cert.delay_ok:
        return cert
    denom = (1.0 - c) * math.exp(-tau_bar) - lam * tau_bar
    cert.beta = 2.0 * lam / denom
    cert.rate = min(lam * (psi_star - 2.0 * lam * tau_bar / denom), 1.0)
    cert.amplitude = dv0 + cert.beta * seed_integral_max
    return cert


def apply_certificate(rows, cert: DecayCertificate, n_agents: int):
    """Fill the functional and bound columns of full diagnostics rows."""
    if not cert.delay_ok:
        raise ValueError("delay condition violated: cannot apply an invalid certificate")
    for row in rows:
        bound = cert.amplitude * math.exp(-cert.rate * row.t)
        if cert.kind == "l2":
            row.lyap_l2 = row.V / 2.0 + (cert.beta / n_agents) * row.lyap_kernel_sq
            row.bound_v = bound
        else:
            row.lyap_linf = row.d_V + cert.beta * row.lyap_kernel_max
            row.bound_dv = bound


def verify_decay(rows, cert: DecayCertificate):
    """Largest relative overshoot of the certified bound over the samples.

    Returns (max_violation, passed) with pass meaning the metric never
    exceeds the bound by more than one part in 1e6.
    """
    if not cert.delay_ok:
        raise ValueError(
            f"delay condition violated: gate value {cert.gate_value} is not below "
            f"threshold {cert.tau_threshold}")
    worst = -math.inf
    for row in rows:
        value = row.V if cert.kind == "l2" else row.d_V
        bound = cert.amplitude * math.exp(-cert.rate * row.t)
        if bound == 0.0:
            term = -1.0 if value == 0.0 else math.inf
        else:
            term = value / bound - 1.0
        worst = max(worst, term)
    return worst, worst <= 1e-6


def scaled_functional(rows, cert: DecayCertificate, n_agents: int) -> np.ndarray:
    """exp(rate*t) times the certificate's functional at each sample; the
    certificate guarantees this sequence is nonincreasing."""
    if not cert.delay_ok:
        raise ValueError("delay condition violated: no decay rate available")
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        if cert.kind == "l2":
            val = row.V / 2.0 + (cert.beta / n_agents) * row.lyap_kernel_sq
        else:
            val = row.d_V + cert.beta * row.lyap_kernel_max
        out[i] = math.exp(cert.rate * row.t) * val
    return out


def almost_nonincreasing(values: np.ndarray, rel: float = 1e-6) -> bool:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return True
    floor = rel * abs(values[0]) * 1e-6
    return bool(np.all(np.diff(values) <= rel * np.abs(values[:-1]) + floor))


def solve_l2_gate(target: float) -> float:
    """Delay tau with tau^2 * exp(tau) equal to target (monotone bisection)."""
    return _invert_monotone(lambda s: s * s * math.exp(s), target)


def solve_linf_gate(target: float) -> float:
    """Delay tau with tau * exp(tau) equal to target."""
    return _invert_monotone(lambda s: s * math.exp(s), target)


def _invert_monotone(fn, target: float) -> float:
    if target < 0:
        raise ValueError("gate target must be nonnegative")
    if target == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while fn(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("gate target out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
