"""Scenario orchestration: consensus classification, delay-threshold search,
the bundled three-agent reference study, and certificate reports."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import metrics
from .delay import DelaySpec, delay_bounds
from .errors import BracketError, ConfigError
from .integrator import BallisticInit, RunResult, Scenario, run
from .model import ModelParams, PotentialSpec
from .spectral import ConnectivityCertificate, connectivity_certificate

# Three-agent planar reference data used throughout: two agents share a
# velocity, the third starts offset with a slower diagonal velocity.
REFERENCE_X0 = ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0))
REFERENCE_V0 = ((1.0, 0.0), (1.0, 0.0), (0.5, 0.5))


def reference_params(potential: Optional[PotentialSpec] = None, lam: float = 1.0,
                     variant: str = "main_delay") -> ModelParams:
    if potential is None:
        potential = PotentialSpec.cucker_smale(2.0)
    return ModelParams(n=3, d=2, lam=lam, variant=variant, potential=potential)


def reference_scenario(tau: float, t_end: float, h: float = 0.01,
                       sample_stride: int = 10,
                       potential: Optional[PotentialSpec] = None,
                       lam: float = 1.0, variant: str = "main_delay") -> Scenario:
    """Ballistic-seeded scenario on the reference initial data."""
    return Scenario(params=reference_params(potential, lam, variant),
                    delay=DelaySpec.constant(tau),
                    initial=BallisticInit(x0=np.array(REFERENCE_X0),
                                          v0=np.array(REFERENCE_V0)),
                    h=h, t_end=t_end, sample_stride=sample_stride)


@dataclass
class ConsensusCriteria:
    """Finite-horizon proxies for consensus: velocity variance below eps_v
    with bounded position variance, versus sustained variance growth."""

    eps_v: float = 1e-3
    x_growth_factor: float = 5.0
    horizon: float = 200.0
    h: float = 0.01

    def __post_init__(self):
        if self.eps_v <= 0:
            raise ConfigError("criteria: eps_v must be positive")
        if self.x_growth_factor <= 1:
            raise ConfigError("criteria: x_growth_factor must exceed 1")


def classify_consensus(result: RunResult, criteria: ConsensusCriteria) -> str:
    """One of "consensus", "divergent", "undecided" from a finished run.

    Position growth is measured against the prescribed initial configuration,
    the first trajectory sample at t = -tau(0); for a positive delay the
    state at t = 0 already carries the ballistic drift of the seed.
    """
    if result.status == "diverged":
        return "divergent"
    t = np.array([row.t for row in result.rows])
    xs = np.array([row.X for row in result.rows])
    vs = np.array([row.V for row in result.rows])
    x_init = metrics.position_variance(result.sample_x[0])
    cap = criteria.x_growth_factor * max(x_init, 1.0)
    if vs[-1] < criteria.eps_v and xs[-1] < cap:
        return "consensus"
    span = t[-1] - t[0]
    tail = xs[t >= t[-1] - 0.25 * span]
    if tail.size >= 2 and np.all(np.diff(tail) > 0) and xs[-1] > cap:
        return "divergent"
    return "undecided"


@dataclass
class ThresholdProbe:
    tau: float
    outcome: str
    horizon: float


@dataclass
class ThresholdReport:
    tau_lo: float
    tau_hi: float
    tol: float
    probes: list[ThresholdProbe]
    criteria: ConsensusCriteria


def _probe(template: Scenario, tau: float, criteria: ConsensusCriteria) -> ThresholdProbe:
    """Classify one constant-delay probe; an undecided run is retried once
    with a doubled horizon then conservatively counted as divergent."""
    horizon = criteria.horizon
    scen = replace(template, delay=DelaySpec.constant(tau), h=criteria.h,
                   t_end=horizon)
    outcome = classify_consensus(run(scen, collect="basic"), criteria)
    if outcome == "undecided":
        horizon = 2.0 * criteria.horizon
        scen = replace(scen, t_end=horizon)
        outcome = classify_consensus(run(scen, collect="basic"), criteria)
        if outcome == "undecided":
            outcome = "divergent"
    return ThresholdProbe(tau=tau, outcome=outcome, horizon=horizon)


def threshold_bisect(template: Scenario, tau_min: float, tau_max: float,
                     tol: float, criteria: Optional[ConsensusCriteria] = None) -> ThresholdReport:
    """Bisect the constant delay between a consensus and a divergent probe.

    The template must carry a ballistic seed; each probe rebuilds the seed
    for its own delay. Raises BracketError unless tau_min classifies as
    consensus and tau_max as divergent.
    """
    if criteria is None:
        criteria = ConsensusCriteria()
    if not isinstance(template.initial, BallisticInit):
        raise ConfigError("threshold_bisect: template must use a ballistic seed")
    if not tau_min < tau_max:
        raise BracketError(f"empty bracket: tau_min = {tau_min}, tau_max = {tau_max}")
    if tol <= 0:
        raise ConfigError("threshold_bisect: tol must be positive")
    probes = []
    lo_probe = _probe(template, tau_min, criteria)
    probes.append(lo_probe)
    hi_probe = _probe(template, tau_max, criteria)
    probes.append(hi_probe)
    if lo_probe.outcome != "consensus" or hi_probe.outcome != "divergent":
        raise BracketError(
            f"bracket endpoints do not straddle the threshold: tau = {tau_min} is "
            f"{lo_probe.outcome}, tau = {tau_max} is {hi_probe.outcome}")
    lo, hi = tau_min, tau_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        probe = _probe(template, mid, criteria)
        probes.append(probe)
        if probe.outcome == "consensus":
            lo = mid
        else:
            hi = mid
    return ThresholdReport(tau_lo=lo, tau_hi=hi, tol=tol, probes=probes,
                           criteria=criteria)


@dataclass
class RunSummary:
    name: str
    status: str
    classification: str
    h: float
    x_initial: float
    x_final: float
    v_initial: float
    v_final: float
    dv_initial: float
    dv_final: float


def summarize_run(name: str, result: RunResult, criteria: ConsensusCriteria) -> RunSummary:
    rows = result.rows
    return RunSummary(name=name, status=result.status,
                      classification=classify_consensus(result, criteria),
                      h=result.h,
                      x_initial=rows[0].X, x_final=rows[-1].X,
                      v_initial=rows[0].V, v_final=rows[-1].V,
                      dv_initial=rows[0].d_V, dv_final=rows[-1].d_V)


@dataclass
class ReferenceReport:
    summaries: list[RunSummary]
    results: dict


def reference_runs(h: float = 0.01, sample_stride: int = 10) -> ReferenceReport:
    """The bundled reference study: two undelayed runs (short and long
    horizon) that reach consensus, and a delay-5 run that loses it."""
    criteria = ConsensusCriteria()
    cases = [("tau0_T10", 0.0, 10.0), ("tau0_T50", 0.0, 50.0), ("tau5_T20", 5.0, 20.0)]
    summaries = []
    results = {}
    for name, tau, t_end in cases:
        result = run(reference_scenario(tau, t_end, h=h, sample_stride=sample_stride))
        results[name] = result
        summaries.append(summarize_run(name, result, criteria))
    return ReferenceReport(summaries=summaries, results=results)


@dataclass
class CertificateReport:
    kind: str
    certificate: metrics.DecayCertificate
    max_violation: Optional[float]
    bound_holds: Optional[bool]
    monotone_ok: Optional[bool]
    message: str


@dataclass
class CertificateBundle:
    scenario: Scenario
    result: RunResult
    connectivity: ConnectivityCertificate
    reports: list[CertificateReport]


def certificate_report(scenario: Scenario, which: str = "both",
                       gamma: Optional[float] = None,
                       psi_star: Optional[float] = None) -> CertificateBundle:
    """Run the scenario and evaluate the requested decay certificates.

    Structural constants default to the empirical minima along the computed
    trajectory (seed included); pass gamma or psi_star to use a-priori
    values instead. A failed delay gate is reported, not raised.
    """
    if which not in ("l2", "linf", "both"):
        raise ConfigError(f"certificate_report: unknown selector {which!r}")
    variant = scenario.params.variant
    if variant == "full_sum_baseline":
        raise ConfigError("certificate_report: no certificate covers the baseline variant")
    if which in ("l2", "both") and variant == "normalized_nonsymmetric":
        raise ConfigError("certificate_report: the quadratic certificate requires symmetric weights")
    result = run(scenario, collect="full")
    conn = connectivity_certificate(result)
    tau_bar, c = delay_bounds(scenario.delay)
    row0 = result.rows[0]
    params = scenario.params
    reports = []
    if which in ("l2", "both"):
        g = conn.gamma_emp if gamma is None else gamma
        cert = metrics.l2_certificate(params.lam, g, tau_bar, c,
                                      seed_integral=row0.lyap_kernel_sq, v0=row0.V)
        reports.append(_evaluate(cert, result))
    if which in ("linf", "both"):
        ps = conn.psi_star_emp if psi_star is None else psi_star
        cert = metrics.linf_certificate(params.lam, ps, tau_bar, c,
                                        seed_integral_max=row0.lyap_kernel_max,
                                        dv0=row0.d_V)
        reports.append(_evaluate(cert, result))
    return CertificateBundle(scenario=scenario, result=result, connectivity=conn,
                             reports=reports)


def _evaluate(cert: metrics.DecayCertificate, result: RunResult) -> CertificateReport:
    if not cert.delay_ok:
        return CertificateReport(kind=cert.kind, certificate=cert, max_violation=None,
                                 bound_holds=None, monotone_ok=None,
                                 message=(f"delay above threshold: gate value "
                                          f"{cert.gate_value:.6g} >= {cert.tau_threshold:.6g}"))
    n = result.scenario.params.n
    metrics.apply_certificate(result.rows, cert, n)
    violation, holds = metrics.verify_decay(result.rows, cert)
    series = metrics.scaled_functional(result.rows, cert, n)
    monotone = metrics.almost_nonincreasing(series)
    state = "holds" if holds else "violated"
    return CertificateReport(kind=cert.kind, certificate=cert, max_violation=violation,
                             bound_holds=holds, monotone_ok=monotone,
                             message=f"decay bound {state} (max violation {violation:.3e})")
