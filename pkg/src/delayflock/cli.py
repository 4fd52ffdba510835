"""Command-line interface and bit-stable CSV emission.

Exit codes: 0 on success (a failed delay gate is still a valid result),
1 on domain errors (bracket failures, missing lookback, I/O), 2 on usage
errors (bad flags, invalid configuration).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, metrics
from .config import parse_config
from .errors import BracketError, ConfigError, LookbackError
from .integrator import RunResult, run

DIAG_COLUMNS = ("t", "X", "V", "d_X", "d_V", "mu", "psi_star", "R_tau",
                "sigma_tau", "lyap_L2", "lyap_Linf", "bound_V", "bound_dV")


def _fmt(value: float) -> str:
    # 17 significant digits: lossless round-trip of doubles for golden files.
    return format(float(value), ".17g")


def write_trajectory_csv(path, result: RunResult) -> None:
    n, d = result.scenario.params.n, result.scenario.params.d
    header = ["t"]
    header += [f"x_{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
    header += [f"v_{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
    lines = [",".join(header)]
    for t, x, v in zip(result.sample_t, result.sample_x, result.sample_v):
        cells = [_fmt(t)]
        cells += [_fmt(val) for val in x.ravel()]
        cells += [_fmt(val) for val in v.ravel()]
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def write_diagnostics_csv(path, rows) -> None:
    lines = [",".join(DIAG_COLUMNS)]
    for row in rows:
        cells = (row.t, row.X, row.V, row.d_X, row.d_V, row.mu, row.psi_star,
                 row.r_tau, row.sigma_tau, row.lyap_l2, row.lyap_linf,
                 row.bound_v, row.bound_dv)
        lines.append(",".join(_fmt(c) for c in cells))
    _write_text(path, "\n".join(lines) + "\n")


def write_threshold_csv(path, report) -> None:
    lines = ["tau,classification,horizon"]
    for probe in report.probes:
        lines.append(f"{_fmt(probe.tau)},{probe.outcome},{_fmt(probe.horizon)}")
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _summary_lines(summary, criteria) -> list[str]:
    return [
        f"run: {summary.name}",
        f"status: {summary.status}",
        f"classification: {summary.classification}",
        f"h: {_fmt(summary.h)}",
        f"X(0): {_fmt(summary.x_initial)}  X(T): {_fmt(summary.x_final)}",
        f"V(0): {_fmt(summary.v_initial)}  V(T): {_fmt(summary.v_final)}",
        f"d_V(0): {_fmt(summary.dv_initial)}  d_V(T): {_fmt(summary.dv_final)}",
        f"criteria: eps_v={_fmt(criteria.eps_v)} x_growth_factor={_fmt(criteria.x_growth_factor)}",
        "",
    ]


def _certificate_lines(bundle) -> list[str]:
    lines = [
        f"gamma (empirical): {_fmt(bundle.connectivity.gamma_emp)}",
        f"psi_star (empirical): {_fmt(bundle.connectivity.psi_star_emp)}",
    ]
    for report in bundle.reports:
        cert = report.certificate
        lines.append(f"certificate: {report.kind}")
        lines.append(f"  structural constant: {_fmt(cert.structural)}")
        lines.append(f"  tau_bar: {_fmt(cert.tau_bar)}  c: {_fmt(cert.c)}")
        lines.append(f"  gate value: {_fmt(cert.gate_value)}  threshold: {_fmt(cert.tau_threshold)}")
        if not cert.delay_ok:
            lines.append(f"  {report.message}")
            continue
        lines.append(f"  beta: {_fmt(cert.beta)}  rate: {_fmt(cert.rate)}  amplitude: {_fmt(cert.amplitude)}")
        lines.append(f"  max relative violation: {_fmt(report.max_violation)}")
        lines.append(f"  bound check: {'PASS' if report.bound_holds else 'FAIL'}")
        lines.append(f"  scaled functional nonincreasing: {'yes' if report.monotone_ok else 'no'}")
    return lines


def cmd_simulate(args) -> int:
    scenario, criteria = parse_config(args.config)
    result = run(scenario, collect="full")
    variant = scenario.params.variant
    if variant != "full_sum_baseline":
        # Fill the functional and bound columns when a certificate applies.
        bundle = experiments.certificate_report(
            scenario, which="both" if variant == "main_delay" else "linf")
        result = bundle.result
    name = Path(args.config).stem
    out = Path(args.out) / name
    write_trajectory_csv(out / "trajectory.csv", result)
    write_diagnostics_csv(out / "diagnostics.csv", result.rows)
    summary = experiments.summarize_run(name, result, criteria)
    _write_text(Path(args.out) / "summary.txt", "\n".join(_summary_lines(summary, criteria)))
    print(f"{name}: {summary.status}, classification {summary.classification}, "
          f"wrote {out}")
    return 0


def cmd_threshold(args) -> int:
    scenario, criteria = parse_config(args.config)
    report = experiments.threshold_bisect(scenario, args.tau_min, args.tau_max,
                                          args.tol, criteria)
    print(f"threshold bracket: [{_fmt(report.tau_lo)}, {_fmt(report.tau_hi)}] (tol {_fmt(report.tol)})")
    print(f"criteria: eps_v={_fmt(criteria.eps_v)} x_growth_factor={_fmt(criteria.x_growth_factor)} "
          f"horizon={_fmt(criteria.horizon)} h={_fmt(criteria.h)}")
    for probe in report.probes:
        print(f"  tau={_fmt(probe.tau)}: {probe.outcome} (horizon {_fmt(probe.horizon)})")
    if args.out is not None:
        write_threshold_csv(Path(args.out) / "threshold_probes.csv", report)
    return 0


def cmd_certify(args) -> int:
    scenario, _ = parse_config(args.config)
    if args.l2 and not args.linf:
        which = "l2"
    elif args.linf and not args.l2:
        which = "linf"
    else:
        which = "both"
    bundle = experiments.certificate_report(scenario, which=which)
    text = "\n".join(_certificate_lines(bundle))
    print(text)
    if args.out is not None:
        _write_text(Path(args.out) / "certificate.txt", text + "\n")
    return 0


def cmd_repro(args) -> int:
    criteria = experiments.ConsensusCriteria()
    report = experiments.reference_runs()
    out = Path(args.out)
    summary_text = []
    for summary in report.summaries:
        result = report.results[summary.name]
        write_trajectory_csv(out / f"{summary.name}.csv", result)
        write_diagnostics_csv(out / f"{summary.name}_diagnostics.csv", result.rows)
        summary_text.extend(_summary_lines(summary, criteria))
        print(f"{summary.name}: {summary.classification} "
              f"(X(T)={summary.x_final:.4g}, V(T)={summary.v_final:.4g})")
    _write_text(out / "summary.txt", "\n".join(summary_text))
    return 0


def cmd_selftest(_args) -> int:
    failures = 0
    for name, fn in _SELFTESTS:
        try:
            fn()
            print(f"ok - {name}")
        except Exception as exc:  # noqa: BLE001 - report and count
            failures += 1
            print(f"FAIL - {name}: {exc}")
    print(f"selftest: {len(_SELFTESTS) - failures}/{len(_SELFTESTS)} passed")
    return 1 if failures else 0


def _selftest_potential():
    from .model import PotentialSpec, psi_eval
    spec = PotentialSpec.cucker_smale(2.0)
    assert psi_eval(spec, 0.0) == 1.0
    assert abs(psi_eval(spec, 1.0) - 0.25) < 1e-15
    s = np.linspace(0, 50, 400)
    vals = psi_eval(spec, s)
    assert np.all(vals > 0) and np.all(vals <= 1) and np.all(np.diff(vals) <= 0)


def _selftest_consensus_fixed_point():
    from .model import ModelParams, PhaseState, PotentialSpec, rhs
    rng = np.random.default_rng(7)
    for variant in ("main_delay", "full_sum_baseline", "normalized_nonsymmetric"):
        params = ModelParams(n=4, d=2, lam=1.3, variant=variant,
                             potential=PotentialSpec.constant(0.6))
        x = rng.normal(size=(4, 2))
        u = rng.normal(size=2)
        v = np.tile(u, (4, 1))
        _, vdot = rhs(params, PhaseState(x, v, 0.0), PhaseState(x + 0.5, v, -0.1))
        assert np.max(np.abs(vdot)) == 0.0


def _selftest_spectrum():
    from .spectral import eigenvalues_sym, fiedler_number, laplacian
    from .model import ModelParams, PotentialSpec
    for n in range(2, 9):
        params = ModelParams(n=n, d=1, lam=1.7, variant="main_delay",
                             potential=PotentialSpec.constant(0.4))
        lap = laplacian(params, np.zeros((n, 1)))
        mu = fiedler_number(lap)
        assert abs(mu - 1.7 * 0.4) < 1e-10
        vals = eigenvalues_sym(lap)
        assert abs(vals[0]) < 1e-12


def _selftest_identities():
    from .metrics import velocity_fluctuation, velocity_variance
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = rng.normal(size=(5, 3))
        _, w = velocity_fluctuation(v)
        lhs = velocity_variance(v)
        rhs_val = float(np.sum(w * w)) / 5
        assert abs(lhs - rhs_val) <= 1e-12 * max(1.0, abs(lhs))


def _selftest_interpolation():
    from .delay import DelaySpec
    from .integrator import BallisticInit, Scenario, init_history
    from .model import ModelParams, PotentialSpec
    params = ModelParams(n=2, d=1, lam=1.0, variant="main_delay",
                         potential=PotentialSpec.constant(1.0))
    scen = Scenario(params=params, delay=DelaySpec.constant(2.0),
                    initial=BallisticInit(x0=np.array([[0.0], [1.0]]),
                                          v0=np.array([[1.0], [-1.0]])),
                    h=0.01, t_end=1.0)
    buf = init_history(scen)
    x, v = buf.state_at(-1.234)
    assert abs(x[0, 0] - (-1.234 + 2.0)) < 1e-12
    assert abs(v[0, 0] - 1.0) < 1e-15


def _selftest_roundtrip():
    import json
    import tempfile
    from .config import parse_config, serialize_config
    from .experiments import ConsensusCriteria, reference_scenario
    scen = reference_scenario(0.5, 20.0)
    doc = serialize_config(scen, ConsensusCriteria())
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(doc, fh)
        path = fh.name
    scen2, _ = parse_config(path)
    assert scen2.params == scen.params
    assert scen2.delay == scen.delay


def _selftest_two_agent_decay():
    from .experiments import ConsensusCriteria
    from .delay import DelaySpec
    from .integrator import BallisticInit, Scenario, run
    from .model import ModelParams, PotentialSpec
    params = ModelParams(n=2, d=1, lam=1.0, variant="main_delay",
                         potential=PotentialSpec.constant(1.0))
    scen = Scenario(params=params, delay=DelaySpec.constant(0.0),
                    initial=BallisticInit(x0=np.zeros((2, 1)),
                                          v0=np.array([[1.0], [-1.0]])),
                    h=0.01, t_end=5.0, sample_stride=10)
    result = run(scen, collect="basic")
    dv0 = result.rows[0].d_V
    dvT = result.rows[-1].d_V
    rate = -np.log(dvT / dv0) / 5.0
    assert abs(rate - 1.0) < 1e-6


_SELFTESTS = [
    ("potential bounds and monotonicity", _selftest_potential),
    ("consensus states are equilibria", _selftest_consensus_fixed_point),
    ("uniform-weight spectrum", _selftest_spectrum),
    ("variance equals fluctuation norm", _selftest_identities),
    ("seed interpolation", _selftest_interpolation),
    ("config round-trip", _selftest_roundtrip),
    ("two-agent decay rate", _selftest_two_agent_decay),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayflock",
                                     description="delayed velocity-alignment simulator and certificate checker")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a configured scenario and write CSVs")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.set_defaults(fn=cmd_simulate)

    thr = sub.add_parser("threshold", help="bisect the constant delay between consensus and divergence")
    thr.add_argument("--config", required=True)
    thr.add_argument("--tau-min", type=float, required=True)
    thr.add_argument("--tau-max", type=float, required=True)
    thr.add_argument("--tol", type=float, required=True)
    thr.add_argument("--out", default=None)
    thr.set_defaults(fn=cmd_threshold)

    cert = sub.add_parser("certify", help="evaluate the decay certificates for a scenario")
    cert.add_argument("--config", required=True)
    cert.add_argument("--l2", action="store_true")
    cert.add_argument("--linf", action="store_true")
    cert.add_argument("--out", default=None)
    cert.set_defaults(fn=cmd_certify)

    repro = sub.add_parser("repro-section4", help="run the bundled three-agent reference study")
    repro.add_argument("--out", required=True)
    repro.set_defaults(fn=cmd_repro)

    selftest = sub.add_parser("selftest", help="run the built-in invariant checks")
    selftest.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return 1
    except LookbackError as exc:
        print(f"lookback error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
