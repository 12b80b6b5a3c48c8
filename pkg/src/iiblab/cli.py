"""Command line driver: run flows, verify identities, inspect snapshots.

Exit codes:

* 0  clean completion (and, for ``verify``, every report passed)
* 1  configuration or input error
* 2  the flow stopped itself at a loss of positivity
* 3  the flow blew up (non-finite state or step budget exhausted)
* 4  at least one verification report failed

Errors are emitted as one JSON object on stderr so scripted callers
never have to parse prose.  The diagnostics stream is JSON lines: a
header record embedding the fully resolved configuration, then one
record per cadence tick with strictly increasing time, then a status
record.  Snapshot files use the binary container from
``iiblab.snapshot`` and always include the final state, which on a
singularity stop is the last positive-definite one.

Thread count for the accelerated kernels is read from the environment
variable ``IIBLAB_THREADS`` at import time; ``IIBLAB_DISABLE_NUMBA``
forces the pure-numpy path.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import __version__
from .errors import ConfigError, IIBLabError, NumericalBlowupError, SnapshotFormatError
from .flow import (
    FORM_WEIGHTED,
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    STATUS_SINGULARITY,
    StepControl,
    induced_weighted_source,
    run_flow,
)
from .diagnostics import compute_diagnostics
from .metrics import flat_metric
from .runconfig import ResolvedConfig, load_config_file, resolve_config
from .snapshot import save_snapshot, snapshot_info
from .verify import (
    EVOLUTION_REGISTRY,
    verify_S_evolution,
    verify_bianchi,
    verify_commutator_convention,
    verify_connection_difference,
    verify_dilaton_evolution,
    verify_quasilinear_ricci,
    verify_stationarity,
    verify_tau_identity,
    verify_trh_evolution,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SINGULARITY = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

EVOLUTION_WINDOW = 5  # snapshots in the short trajectory behind evolution checks

_STATUS_EXIT = {
    STATUS_COMPLETED: EXIT_OK,
    STATUS_SINGULARITY: EXIT_SINGULARITY,
    STATUS_BLOWUP: EXIT_BLOWUP,
}


def _emit_error(code: int, err: Exception) -> int:
    payload = {
        "error": {
            "code": code,
            "type": type(err).__name__,
            "message": str(err),
        }
    }
    offset = getattr(err, "offset", None)
    if offset is not None:
        payload["error"]["offset"] = offset
    print(json.dumps(payload), file=sys.stderr)
    return code


def _out_dir(args, rc: ResolvedConfig) -> str:
    out = args.out if args.out else rc.output["directory"]
    os.makedirs(out, exist_ok=True)
    return out


def _execute_suite(rc: ResolvedConfig) -> list:
    """Run the configured identity suite on the configured initial data.

    Spatial identities are checked directly on the initial metric (the
    relative-connection check takes the flat metric as its reference).
    Evolution identities share one short fixed-step trajectory of the
    weighted formulation, five snapshots wide.  A sigma-basis source is
    frozen to its induced matrix field at t = 0 so the window is an
    exact solution of the equation the identities describe.
    """
    grid, g0 = rc.grid, rc.initial_metric
    reports = []
    window = None
    window_phi = None

    def tol_kwargs(tol):
        return {} if tol is None else {"tolerance": tol}

    for name, tol in rc.verify_suite:
        kw = tol_kwargs(tol)
        if name == "tau":
            reports += verify_tau_identity(grid, g0, **kw)
        elif name == "connection-difference":
            reports += verify_connection_difference(grid, g0, flat_metric(grid), **kw)
        elif name == "bianchi":
            reports += verify_bianchi(grid, g0, **kw)
        elif name == "commutator":
            reports += verify_commutator_convention(grid, g0, **kw)
        elif name == "quasilinear":
            reports += verify_quasilinear_ricci(grid, g0, **kw)
        elif name == "stationarity":
            reports += verify_stationarity(grid, g0, source_matrix=rc.anchor_source, **kw)
        elif name in EVOLUTION_REGISTRY:
            if window is None:
                window_phi = rc.weighted_source
                if rc.anchor_source is not None:
                    window_phi = induced_weighted_source(grid, g0, rc.anchor_source)
                dt = rc.control.dt
                window = run_flow(
                    grid,
                    g0,
                    FORM_WEIGHTED,
                    t_final=(EVOLUTION_WINDOW - 1) * dt,
                    control=StepControl(dt=dt),
                    weighted_source=window_phi,
                    snapshot_every=1,
                )
                if len(window.snapshots) < EVOLUTION_WINDOW:
                    raise ConfigError(
                        f"verification trajectory stopped early"
                        f" ({window.status}: {window.stop_detail}); evolution"
                        " identities need five healthy snapshots"
                    )
            if name == "trh":
                reports += verify_trh_evolution(window, phi=window_phi, **kw)
            elif name == "dilaton":
                reports += verify_dilaton_evolution(window, phi=window_phi, **kw)
            else:
                reports += verify_S_evolution(window, phi=window_phi, **kw)
    return reports


def _write_reports(path: str, rc: ResolvedConfig, reports: list) -> bool:
    all_pass = all(r.passed for r in reports)
    doc = {
        "kind": "verification",
        "package": __version__,
        "config": rc.resolved,
        "allPass": all_pass,
        "reports": [r.to_dict() for r in reports],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return all_pass


def _snapshot_steps(trajectory, stride: int) -> list[int]:
    """Map stored snapshot indices to step numbers.

    Snapshots are recorded every ``stride`` steps plus a possibly
    off-cadence final state, so the step number is ``index * stride``
    clamped by the total step count.
    """
    total = trajectory.steps_taken
    return [min(j * stride, total) for j in range(len(trajectory.times))]


def _cmd_run(args) -> int:
    rc = resolve_config(
        load_config_file(args.config),
        seed=args.seed,
        resolution=args.resolution,
        base_dir=os.path.dirname(os.path.abspath(args.config)),
    )
    out = _out_dir(args, rc)

    diag_every = rc.diagnostics_every
    stride = diag_every
    if rc.snapshot_every is not None:
        stride = math.gcd(diag_every, rc.snapshot_every)

    try:
        trajectory = run_flow(
            rc.grid,
            rc.initial_metric,
            rc.formulation,
            rc.t_end,
            control=rc.control,
            anchor_source=rc.anchor_source,
            weighted_source=rc.weighted_source,
            snapshot_every=stride,
        )
    except NumericalBlowupError as err:
        _emit_error(EXIT_BLOWUP, err)
        return EXIT_BLOWUP

    steps = _snapshot_steps(trajectory, stride)
    last = len(steps) - 1
    # Baseline for the relative-endomorphism diagnostics: the run's own
    # initial physical metric as the snapshot chain preserves it, so a
    # recompute from saved files reproduces every record bit for bit.
    baseline = trajectory.metric_at(0)
    diag_path = os.path.join(out, rc.output["diagnostics"])
    with open(diag_path, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header",
            "package": __version__,
            "config": rc.resolved,
        }
        fh.write(json.dumps(header) + "\n")
        for j, step in enumerate(steps):
            if step % diag_every and j != last:
                continue
            record = compute_diagnostics(
                rc.grid,
                trajectory.metric_at(j),
                baseline,
                trajectory.times[j],
                volume_constant=trajectory.volume_constant,
                test_function=rc.test_function,
            )
            line = {"kind": "diagnostics", "step": step}
            line.update(record.to_dict())
            fh.write(json.dumps(line) + "\n")
        status = {
            "kind": "status",
            "status": trajectory.status,
            "stepsTaken": trajectory.steps_taken,
            "tFinal": trajectory.times[-1],
        }
        if trajectory.stop_detail:
            status["detail"] = trajectory.stop_detail
        fh.write(json.dumps(status) + "\n")

    for j, step in enumerate(steps):
        keep = j == last
        if rc.snapshot_every is not None and step % rc.snapshot_every == 0:
            keep = True
        if not keep:
            continue
        name = f"{rc.output['snapshotPrefix']}-{step:08d}.snap"
        save_snapshot(
            os.path.join(out, name),
            rc.grid,
            trajectory.times[j],
            {"metric": trajectory.metric_at(j)},
            meta={
                "formulation": rc.formulation,
                "step": step,
                "status": trajectory.status if j == last else "running",
                "volumeConstant": [
                    trajectory.volume_constant.real,
                    trajectory.volume_constant.imag,
                ],
            },
        )

    suite_pass = True
    if rc.verify_suite:
        reports = _execute_suite(rc)
        suite_pass = _write_reports(
            os.path.join(out, rc.output["reports"]), rc, reports
        )

    code = _STATUS_EXIT[trajectory.status]
    if code == EXIT_OK and not suite_pass:
        code = EXIT_VERIFY
    print(
        f"status={trajectory.status} steps={trajectory.steps_taken}"
        f" t={trajectory.times[-1]:.8g} diagnostics={diag_path}"
    )
    return code


def _cmd_verify(args) -> int:
    rc = resolve_config(
        load_config_file(args.config),
        seed=args.seed,
        resolution=args.resolution,
        base_dir=os.path.dirname(os.path.abspath(args.config)),
    )
    if not rc.verify_suite:
        raise ConfigError("verify needs a non-empty verifySuite block")
    out = _out_dir(args, rc)
    reports = _execute_suite(rc)
    all_pass = _write_reports(os.path.join(out, rc.output["reports"]), rc, reports)
    for r in reports:
        flag = "pass" if r.passed else "FAIL"
        print(f"{flag} {r.identity_name}: max={r.max_residual:.3e} tol={r.tolerance:.3e}")
    return EXIT_OK if all_pass else EXIT_VERIFY


def _cmd_snapshot_info(args) -> int:
    info = snapshot_info(args.path)
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iiblab",
        description="Geometric flow laboratory on flat complex tori.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random-family seed override")
        p.add_argument(
            "--resolution", type=int, help="grid resolution override (power of two)"
        )

    p_run = sub.add_parser("run", help="integrate the configured flow")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the configured identity suite")
    add_common(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_info = sub.add_parser("snapshot-info", help="print a snapshot header")
    p_info.add_argument("path", help="snapshot file")
    p_info.set_defaults(func=_cmd_snapshot_info)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        return _emit_error(EXIT_CONFIG, err)
    except SnapshotFormatError as err:
        return _emit_error(EXIT_CONFIG, err)
    except OSError as err:
        return _emit_error(EXIT_CONFIG, err)
    except IIBLabError as err:
        return _emit_error(EXIT_CONFIG, err)


if __name__ == "__main__":
    sys.exit(main())
