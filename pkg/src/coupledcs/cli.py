"""Command-line frontend emitting figure-ready CSV data with JSON sidecars.

Exit codes: 0 success, 2 parameter/validation failure, 3 numeric failure.
Every command is deterministic for a fixed flag set; output files carry no
timestamps so repeated runs are byte-identical.
"""

import functools
import json
import sys

import click
import numpy as np

from . import __version__
from .coupling import SeedingParams, build_seeding_spec, overall_rate, spec_from_json
from .errors import ConvergenceError, QuadratureError
from .measurement_ops import (block_variance_report, build_coupled_operator,
                              export_instance, gen_instance)
from .phase_analysis import scan_curve, sweep_phase_diagram
from .replica_core import Ensemble, single_block_spec
from .scalar_channel import BernoulliGaussianPrior, mmse, mmse_mc_oracle
from .state_evolution import run_evolution

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _parse_grid(text, flag):
    """Comma list ("0.1,1,10") or log range ("1e-3:1e2:25")."""
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
            if num < 1 or lo <= 0 or hi <= 0:
                raise ValueError
            return list(np.geomspace(lo, hi, num))
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise click.BadParameter(f"could not parse grid {text!r}", param_hint=flag)


def _ensemble(name):
    return Ensemble.ROW_ORTHOGONAL if name == "orthogonal" else Ensemble.GAUSSIAN_IID


def _sidecar(path, command, config, extra=None):
    doc = {"tool": "coupledcs", "version": __version__, "command": command,
           "config": config}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _apply_config(ctx, param, value):
    """--config JSON supplies defaults for any flag not given explicitly."""
    if value is None:
        return None
    with open(value) as fh:
        ctx.default_map = json.load(fh)
    return value


def _config_option(fn):
    return click.option("--config", type=click.Path(exists=True), callback=_apply_config,
                        is_eager=True, expose_value=False,
                        help="JSON file supplying defaults for any flag.")(fn)


def _run_guarded(fn):
    """Map library errors onto the exit-code contract."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (QuadratureError, ConvergenceError, ArithmeticError) as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        except (ValueError, OSError) as exc:
            click.echo(f"invalid input: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    return wrapper


@click.group()
@click.version_option(version=__version__)
def main():
    """Replica analysis of compressed sensing with coupled orthogonal matrices."""


@main.command("mmse")
@click.option("--rho", type=float, required=True, help="Signal density in [0, 1].")
@click.option("--grid", "grid_text", default="1e-2:1e2:25", show_default=True,
              help="Precision grid: comma list or lo:hi:n (log-spaced).")
@click.option("--samples", type=int, default=10 ** 6, show_default=True,
              help="Monte-Carlo samples per grid point.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(), required=True)
@_config_option
@_run_guarded
def cmd_mmse(rho, grid_text, samples, seed, output):
    """Scalar-channel mmse with its Monte-Carlo cross-check, one row per precision."""
    grid = _parse_grid(grid_text, "--grid")
    prior = BernoulliGaussianPrior(rho)
    rows = []
    for i, vs in enumerate(grid):
        exact = mmse(vs, prior)
        if vs > 0:
            mc, err = mmse_mc_oracle(vs, prior, samples, seed + i)
        else:
            mc, err = rho, 0.0
        rows.append((vs, exact, mc, err))
    with open(output, "w") as fh:
        fh.write("varsigma,mmse,mc_estimate,mc_stderr\n")
        for vs, exact, mc, err in rows:
            fh.write(f"{float(vs)!r},{float(exact)!r},{float(mc)!r},{float(err)!r}\n")
    _sidecar(f"{output}.json", "mmse",
             {"rho": rho, "grid": grid, "samples": samples, "seed": seed})


@main.command("free-entropy")
@click.option("--rho", type=float, required=True)
@click.option("--sigma2", type=float, required=True)
@click.option("--alpha", type=float, required=True)
@click.option("--ensemble", type=click.Choice(["orthogonal", "gaussian"]), required=True)
@click.option("--points", type=int, default=2000, show_default=True)
@click.option("--eps-floor", type=float, default=None)
@click.option("-o", "--output", type=click.Path(), required=True)
@_config_option
@_run_guarded
def cmd_free_entropy(rho, sigma2, alpha, ensemble, points, eps_floor, output):
    """F(eps) on a log grid, with the refined local maxima in the sidecar."""
    curve = scan_curve(rho, sigma2, alpha, _ensemble(ensemble),
                       n_points=points, eps_floor=eps_floor)
    with open(output, "w") as fh:
        fh.write("eps,free_entropy\n")
        for e, f in zip(curve.eps_grid, curve.values):
            fh.write(f"{float(e)!r},{float(f)!r}\n")
    _sidecar(f"{output}.json", "free-entropy",
             {"rho": rho, "sigma2": sigma2, "alpha": alpha, "ensemble": ensemble,
              "points": points, "eps_floor": eps_floor},
             {"maxima": [{"eps": e, "free_entropy": f} for e, f in curve.maxima]})


@main.command("phase-diagram")
@click.option("--rho", type=float, required=True)
@click.option("--sigma2-grid", "sigma2_text", required=True,
              help="Noise grid: comma list or lo:hi:n (log-spaced).")
@click.option("--ensemble", type=click.Choice(["orthogonal", "gaussian"]), required=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Parallel sweep points.")
@click.option("-o", "--output", type=click.Path(), required=True)
@_config_option
@_run_guarded
def cmd_phase_diagram(rho, sigma2_text, ensemble, threads, output):
    """Transition rates alpha_d, alpha_c, alpha_s per noise level."""
    grid = _parse_grid(sigma2_text, "--sigma2-grid")
    points = sweep_phase_diagram(rho, grid, _ensemble(ensemble), threads=threads)
    if all(pt.error is not None for pt in points):
        click.echo("numeric failure: every sweep point failed", err=True)
        sys.exit(EXIT_NUMERIC)
    with open(output, "w") as fh:
        fh.write("sigma2,alpha_d,alpha_c,alpha_s,sharp,status\n")
        for pt in points:
            def fmt(v):
                return "" if v is None else repr(float(v))
            status = "ok" if pt.error is None else "error"
            fh.write(f"{float(pt.sigma2)!r},{fmt(pt.alpha_d)},{fmt(pt.alpha_c)},"
                     f"{fmt(pt.alpha_s)},{int(pt.sharp)},{status}\n")
    _sidecar(f"{output}.json", "phase-diagram",
             {"rho": rho, "sigma2_grid": grid, "ensemble": ensemble, "threads": threads},
             {"errors": {repr(pt.sigma2): pt.error for pt in points if pt.error}})


@main.command("evolve")
@click.option("--spec-file", type=click.Path(exists=True), default=None,
              help="CouplingSpec JSON document (overrides the seeding flags).")
@click.option("--L", "L", type=int, default=None)
@click.option("--W", "W", type=int, default=2, show_default=True)
@click.option("--alpha-seed", type=float, default=None)
@click.option("--alpha-bulk", type=float, default=None)
@click.option("--J", "J", type=float, default=None)
@click.option("--rho", type=float, default=None)
@click.option("--sigma2", type=float, default=None)
@click.option("--ensemble", type=click.Choice(["orthogonal", "gaussian"]), required=True)
@click.option("--tol", type=float, default=1e-12, show_default=True)
@click.option("--max-iter", type=int, default=10 ** 5, show_default=True)
@click.option("--damping", type=float, default=0.0, show_default=True)
@click.option("-o", "--output", type=click.Path(), required=True)
@_config_option
@_run_guarded
def cmd_evolve(spec_file, L, W, alpha_seed, alpha_bulk, J, rho, sigma2, ensemble,
               tol, max_iter, damping, output):
    """Run the coupled state evolution; trace CSV plus convergence metadata.

    Non-convergence at the iteration cap is an analysis outcome, recorded
    in the sidecar, not a failure.
    """
    if spec_file is not None:
        with open(spec_file) as fh:
            spec = spec_from_json(fh.read())
        config_spec = {"spec_file": spec_file}
    else:
        needed = {"--L": L, "--alpha-seed": alpha_seed, "--alpha-bulk": alpha_bulk,
                  "--J": J, "--rho": rho, "--sigma2": sigma2}
        missing = [flag for flag, v in needed.items() if v is None]
        if missing:
            raise click.UsageError(f"missing {', '.join(missing)} (or pass --spec-file)")
        params = SeedingParams(L=L, W=min(W, L), alpha_seed=alpha_seed,
                               alpha_bulk=alpha_bulk, J=J)
        spec = build_seeding_spec(params, rho, sigma2)
        config_spec = {"L": L, "W": W, "alpha_seed": alpha_seed,
                       "alpha_bulk": alpha_bulk, "J": J, "rho": rho, "sigma2": sigma2}
    trace = run_evolution(spec, _ensemble(ensemble), tol=tol, max_iter=max_iter,
                          damping=damping)
    with open(output, "w") as fh:
        fh.write("t," + ",".join(f"eps_{p + 1}" for p in range(spec.L_c)) + "\n")
        for t, eps in enumerate(trace.history):
            fh.write(f"{t}," + ",".join(repr(float(v)) for v in eps) + "\n")
    _sidecar(f"{output}.json", "evolve",
             {**config_spec, "ensemble": ensemble, "tol": tol,
              "max_iter": max_iter, "damping": damping},
             {"converged": trace.converged, "iterations": trace.iterations,
              "oscillating": trace.oscillating, "clamped": trace.clamped,
              "overall_rate": overall_rate(spec),
              "final_eps": trace.final_eps.tolist()})


@main.command("gen-matrix")
@click.option("--spec-file", type=click.Path(exists=True), required=True,
              help="CouplingSpec JSON document.")
@click.option("--N", "N", type=int, required=True, help="Total signal dimension.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ensemble", type=click.Choice(["orthogonal", "gaussian"]), required=True)
@click.option("--sigma", type=float, default=0.0, show_default=True,
              help="Measurement noise magnitude.")
@click.option("-o", "--output", "prefix", type=click.Path(), required=True,
              help="Output prefix for .json / _x.csv / _y.csv / .stats.json.")
@_config_option
@_run_guarded
def cmd_gen_matrix(spec_file, N, seed, ensemble, sigma, prefix):
    """Draw an operator and a synthetic instance; report per-block statistics."""
    with open(spec_file) as fh:
        spec = spec_from_json(fh.read())
    op = build_coupled_operator(spec, N, seed, _ensemble(ensemble))
    inst = gen_instance(op, spec.prior, sigma, seed)
    export_instance(op, inst, prefix)
    _sidecar(f"{prefix}.stats.json", "gen-matrix",
             {"spec_file": spec_file, "N": N, "seed": seed, "ensemble": ensemble,
              "sigma": sigma},
             {"blocks": block_variance_report(op)})


if __name__ == "__main__":
    main()
