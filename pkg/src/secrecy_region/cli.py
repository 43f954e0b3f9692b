"""Command-line entry point.

Every subcommand accepts ``--config <json>``; explicit flags override keys
from the file.  Exit codes: 0 success, 2 some points or checks failed,
1 fatal (bad configuration or a crashed run).
"""
from __future__ import annotations

import csv
import json
import logging
import sys
import time

import click
import numpy as np

from . import harness
from .harness import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, ConfigError, ExperimentConfig


def _floats(text):
    if text is None:
        return None
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    if text is None:
        return None
    return [int(v) for v in str(text).split(",") if v.strip()]


def _load(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _merge(config_path, **overrides) -> dict:
    data = _load(config_path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("seed") is None:
        raise ConfigError("--seed is required (flag or config key)")
    return data


def _fail(msg) -> int:
    click.echo(f"error: {msg}", err=True)
    return EXIT_FATAL


def common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--seed", type=int, help="Channel seed (required)."),
        click.option("--n-t", type=int, help="Transmit antennas."),
        click.option("--n-r", help="Comma-separated receive antennas per receiver."),
        click.option("--k", type=int, help="Number of receivers (checked against --n-r)."),
        click.option("--p-db", help="Comma-separated transmit powers in dB."),
        click.option("--tol", type=float, help="Outer tolerance."),
        click.option("--max-iter", type=int, help="Outer iteration cap."),
        click.option("--out", help="Boundary CSV path."),
        click.option("--trace-dir", help="Directory for per-point JSON-lines traces."),
        click.option("--cov-dir", help="Directory for per-point covariance dumps."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _run(method, config_path, seed, n_t, n_r, k, p_db, tol, max_iter, out, trace_dir, cov_dir, **extra) -> int:
    try:
        data = _merge(config_path, seed=seed, n_t=n_t, n_r=_ints(n_r), k=k, p_db=_floats(p_db), tol=tol,
                      max_iter=max_iter, out=out, trace_dir=trace_dir, cov_dir=cov_dir, **extra)
        data["method"] = method
        cfg = ExperimentConfig.from_dict(data)
    except (ConfigError, ValueError) as exc:
        return _fail(exc)
    outcome = harness.run_experiment(cfg)
    for m in outcome.messages:
        click.echo(m, err=True)
    for f in outcome.files[:1]:
        click.echo(f)
    return outcome.exit_code


@click.group()
@click.option("-v", "--verbose", count=True, help="More logging.")
def cli(verbose):
    """Secrecy-rate region tracing for multicast plus confidential MIMO broadcast."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@cli.command("gen-channels")
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--seed", type=int)
@click.option("--n-t", type=int)
@click.option("--n-r")
@click.option("--out", help="JSON output path (stdout if omitted).")
def gen_channels(config_path, seed, n_t, n_r, out):
    """Draw a seeded channel set and dump it as JSON."""
    try:
        data = _merge(config_path, seed=seed, n_t=n_t, n_r=_ints(n_r))
        ch = harness.generate_channels(int(data["seed"]), int(data.get("n_t", 5)),
                                       [int(r) for r in data.get("n_r", [3, 3, 3, 3])])
    except (ConfigError, ValueError) as exc:
        return _fail(exc)
    text = json.dumps(harness.channels_to_json(ch, int(data["seed"])))
    if out:
        harness.atomic_write(out, text)
        click.echo(out)
    else:
        click.echo(text)
    return EXIT_OK


@cli.command("trace-dc")
@common
@click.option("--n-points", type=int, help="Number of multicast floors.")
@click.option("--taus", help="Explicit comma-separated multicast floors (bits).")
@click.option("--no-an", is_flag=True, help="Fix the artificial-noise covariance at zero.")
def trace_dc(n_points, taus, no_an, **kw):
    """Trace the boundary by sweeping the multicast floor."""
    return _run("no-an-dc" if no_an else "dc", n_points=n_points, taus=_floats(taus), **kw)


@cli.command("trace-ao")
@common
@click.option("--lambdas", help="Explicit comma-separated secrecy weights.")
@click.option("--n-log", type=int, help="Number of log-spaced weights besides zero.")
@click.option("--no-an", is_flag=True, help="Fix the artificial-noise covariance at zero.")
def trace_ao(lambdas, n_log, no_an, **kw):
    """Trace the boundary by sweeping the secrecy weight."""
    return _run("no-an-ao" if no_an else "ao", lambdas=_floats(lambdas), n_log=n_log, **kw)


@cli.command("baseline-noan")
@common
@click.option("--method", type=click.Choice(["dc", "ao"]), default="dc", show_default=True)
@click.option("--n-points", type=int)
@click.option("--taus")
@click.option("--lambdas")
def baseline_noan(method, n_points, taus, lambdas, **kw):
    """Region without artificial noise."""
    return _run(f"no-an-{method}", n_points=n_points, taus=_floats(taus), lambdas=_floats(lambdas), **kw)


@cli.command("baseline-tdma")
@common
@click.option("--grid", help="Comma-separated multicast time fractions in [0, 1].")
def baseline_tdma(grid, **kw):
    """Time sharing between multicast-only and confidential-only operation."""
    return _run("tdma", tdma_grid=_floats(grid), **kw)


@cli.command("complexity")
@click.option("--n-t", default="1,2,3,4,5", show_default=True, help="Comma-separated transmit antenna counts.")
@click.option("--k", "ks", default="1,2,3,4", show_default=True, help="Comma-separated receiver counts.")
@click.option("--out", help="CSV output path (stdout if omitted).")
def complexity(n_t, ks, out):
    """Tabulate per-step arithmetic cost orders of the two algorithms."""
    try:
        rows = [(a, b, *harness.complexity_estimate(a, b)) for a in _ints(n_t) for b in _ints(ks)]
    except ValueError as exc:
        return _fail(exc)
    header = ("N_t", "K", "n1", "n2", "T1", "T2")
    if out:
        harness.write_csv(out, [[a, b, n1, n2, repr(t1), repr(t2)] for a, b, n1, n2, t1, t2 in rows], header)
        click.echo(out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for a, b, n1, n2, t1, t2 in rows:
            w.writerow([a, b, n1, n2, f"{t1:.6g}", f"{t2:.6g}"])
    return EXIT_OK


@cli.command("verify")
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--seed", type=int)
@click.option("--n-lemma", type=int, default=50, show_default=True)
@click.option("--n-det", type=int, default=200, show_default=True)
@click.option("--n-samples", type=int, default=500, show_default=True)
@click.option("--n-danskin", type=int, default=100, show_default=True)
@click.option("--kkt/--no-kkt", default=False, help="Also certify one weighted-sum run.")
def verify_cmd(config_path, seed, n_lemma, n_det, n_samples, n_danskin, kkt):
    """Run the identity and majorization checks on random instances."""
    from . import ao, verify
    from .model import ChannelSet, CovarianceTriple

    try:
        data = _merge(config_path, seed=seed)
    except ConfigError as exc:
        return _fail(exc)
    rng = np.random.default_rng(int(data["seed"]))
    results = []

    def report(name, ok, detail, t0):
        results.append(ok)
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.2f}s)")

    t0 = time.perf_counter()
    checks = [verify.check_lemma3(_pd(rng, verify)) for _ in range(n_lemma)]
    report("variational", all(c.passed for c in checks), f"{sum(c.passed for c in checks)}/{n_lemma}", t0)

    t0 = time.perf_counter()
    dets = []
    for _ in range(n_det):
        n = int(rng.integers(1, 5))
        dets.append(verify.check_det_ratio(verify.random_psd(rng, n), verify.random_psd(rng, n) + 0.1 * np.eye(n),
                                           verify.random_psd(rng, n)))
    report("det_ratio", all(d.passed for d in dets), f"{sum(d.passed for d in dets)}/{n_det}", t0)

    t0 = time.perf_counter()
    ch = ChannelSet(tuple(_cn(rng, 2, 3) for _ in range(3)))
    maj = verify.tse_majorization_check(ch, n_samples, seed=int(rng.integers(2 ** 31)))
    report("majorization", maj.passed, f"min gap {maj.min_gap:.3g}", t0)

    t0 = time.perf_counter()
    errs = []
    for _ in range(n_danskin):
        n = int(rng.integers(1, 4))
        chd = ChannelSet(tuple(_cn(rng, int(rng.integers(1, 3)), n) for _ in range(3)))
        cov = CovarianceTriple(*(verify.random_psd(rng, n) for _ in range(3)), 10.0)
        errs.append(verify.check_danskin(chd, cov))
    report("danskin", all(e.passed for e in errs), f"max error {max(e.max_error for e in errs):.2e}", t0)

    if kkt:
        t0 = time.perf_counter()
        res = ao.ao_solve(ch, 10.0, 1.0, ao.LambdaSweepConfig(tol=1e-6))
        rep = verify.kkt_residuals(ch, 10.0, 1.0, res.cov, res.duals)
        report("kkt", res.converged and rep.passed(1e-4), f"max residual {rep.max_residual:.2e}", t0)
    return EXIT_OK if all(results) else EXIT_PARTIAL


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _pd(rng, verify):
    n = int(rng.integers(1, 5))
    return verify.random_psd(rng, n) + 0.1 * np.eye(n)


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, prog_name="secrecy-region", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_FATAL
    except click.exceptions.Abort:
        return EXIT_FATAL
    return EXIT_OK if code is None else int(code)


if __name__ == "__main__":
    sys.exit(main())
