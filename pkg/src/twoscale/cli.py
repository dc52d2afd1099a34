"""Command-line interface tying the pipeline together.

Commands: meanfield (ODE trajectory CSV), refine (correction terms JSON),
simulate (steady or transient estimates CSV), oracle (exact small-N
expectation JSON), compare (mean-field vs refined vs simulation table).
Every emitted file embeds the resolved config and seed, and re-running an
identical config byte-reproduces the outputs. Exit codes: 0 success,
1 numerical failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ModelValidationError, TwoscaleError
from .fastchain import analyze
from .meanfield import fixed_point, integrate
from .model import TwoTimescaleModel, load_model
from .oracle import exact_stationary
from .refinement import (
    Observable,
    correction_vector,
    refinement_constant,
    refinement_terms,
)
from .simulator import (
    DEFAULT_MEASURE_EVENTS,
    DEFAULT_REPLICATIONS,
    DEFAULT_WARMUP_EVENTS,
    backend_name,
    estimate_steady_state,
    estimate_transient_mean,
    set_backend,
)

__all__ = ["build_parser", "run", "main"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twoscale",
        description="Averaged mean-field analysis, bias-corrected steady-state "
        "estimates, simulation, and exact small-instance checks for "
        "two-timescale Markov population models.",
    )
    p.add_argument("--model", required=True, help="built-in name (toy, csma3, csma5) or JSON descriptor file")
    p.add_argument(
        "--command",
        required=True,
        choices=["meanfield", "refine", "simulate", "oracle", "compare"],
    )
    p.add_argument("--N", default=None, help="population size(s), comma-separated integers")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (unsigned 64-bit)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--t-end", dest="t_end", type=float, default=20.0, help="horizon for meanfield/transient simulate")
    p.add_argument("--dt", type=float, default=1e-2, help="mean-field integrator step")
    p.add_argument("--x0", default=None, help="initial slow state, comma-separated floats (default: box lower corner)")
    p.add_argument("--y0", type=int, default=0, help="initial fast state index")
    p.add_argument("--observable", default=None, help="observable selector: class:<c> or coord:<i>")
    p.add_argument("--mode", choices=["steady", "transient"], default="steady", help="simulate mode")
    p.add_argument("--grid-points", dest="grid_points", type=int, default=201, help="time grid size for transient simulate")
    p.add_argument("--replications", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--warmup-events", dest="warmup_events", type=int, default=DEFAULT_WARMUP_EVENTS)
    p.add_argument("--measure-events", dest="measure_events", type=int, default=DEFAULT_MEASURE_EVENTS)
    p.add_argument("--max-states", dest="max_states", type=int, default=200_000, help="oracle state-count guard")
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")
    p.add_argument("--dump-fastchain", dest="dump_fastchain", action="store_true",
                   help="with refine: also dump K, pi, Kplus at the fixed point as CSV")
    return p


def _parse_n_list(text: str | None, command: str) -> list[int]:
    if text is None:
        raise ConfigError(f"--N is required for command {command!r}")
    parts = [s for chunk in text.split(",") for s in chunk.split() if s]
    if not parts:
        raise ConfigError("--N must list at least one integer")
    values = []
    for s in parts:
        try:
            v = int(s)
        except ValueError:
            raise ConfigError(f"--N entry {s!r} is not an integer") from None
        if v < 1:
            raise ConfigError(f"--N entry {v} must be positive")
        values.append(v)
    return values


def _single_n(values: list[int], command: str) -> int:
    if len(values) != 1:
        raise ConfigError(f"command {command!r} takes exactly one N, got {values}")
    return values[0]


def _parse_x0(text: str | None, model: TwoTimescaleModel):
    if text is None:
        return None
    try:
        vals = [float(s) for s in text.split(",") if s]
    except ValueError:
        raise ConfigError(f"--x0 must be comma-separated floats, got {text!r}") from None
    if len(vals) != model.d_x:
        raise ConfigError(f"--x0 has {len(vals)} entries, model needs {model.d_x}")
    return np.asarray(vals)


def _parse_observable(text: str | None, model: TwoTimescaleModel) -> Observable:
    if text is None:
        if "n_classes" in model.info:
            return Observable.class_queue_length(model, 0)
        return Observable.coordinate(0, model.d_x)
    kind, sep, arg = text.partition(":")
    if not sep or not arg:
        raise ConfigError(f"--observable must look like class:<c> or coord:<i>, got {text!r}")
    try:
        idx = int(arg)
    except ValueError:
        raise ConfigError(f"--observable index {arg!r} is not an integer") from None
    try:
        if kind == "class":
            return Observable.class_queue_length(model, idx)
        if kind == "coord":
            return Observable.coordinate(idx, model.d_x)
    except TwoscaleError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown observable kind {kind!r} (use class: or coord:)")


def _observable_weights(obs: Observable, model: TwoTimescaleModel) -> np.ndarray:
    return obs.gradient_at(np.zeros(model.d_x))


def _class_observables(model: TwoTimescaleModel) -> list[tuple[str, Observable]]:
    """Per-class queue lengths for queueing models, else raw coordinates."""
    if "n_classes" in model.info:
        return [
            (str(c), Observable.class_queue_length(model, c))
            for c in range(int(model.info["n_classes"]))
        ]
    return [(str(i), Observable.coordinate(i, model.d_x)) for i in range(model.d_x)]


def _resolved_config(args: argparse.Namespace) -> dict:
    cfg = {
        "version": __version__,
        "model": args.model,
        "command": args.command,
        "N": args.N,
        "seed": args.seed,
        "t_end": args.t_end,
        "dt": args.dt,
        "x0": args.x0,
        "y0": args.y0,
        "observable": args.observable,
        "mode": args.mode,
        "grid_points": args.grid_points,
        "replications": args.replications,
        "warmup_events": args.warmup_events,
        "measure_events": args.measure_events,
        "max_states": args.max_states,
        "backend": backend_name(),
    }
    return cfg


def _config_line(cfg: dict) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True)


def _write_csv(path: Path, cfg: dict, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_config_line(cfg) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    print(f"wrote {path}")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {path}")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _cmd_meanfield(model, args, out_dir: Path, cfg: dict) -> None:
    x0 = _parse_x0(args.x0, model)
    if x0 is None:
        x0 = model.box_lower.copy()
    traj = integrate(model, x0, args.t_end, dt=args.dt)
    header = ["t"] + [f"x_{i}" for i in range(model.d_x)]
    rows = ([t] + list(state) for t, state in zip(traj.times, traj.states))
    _write_csv(out_dir / "meanfield.csv", cfg, header, rows)


def _cmd_refine(model, args, out_dir: Path, cfg: dict) -> None:
    n = _single_n(_parse_n_list(args.N, "refine"), "refine")
    fp = fixed_point(model)
    terms = refinement_terms(model, fp)
    corr = correction_vector(terms)
    payload = {
        "config": cfg,
        "phi_inf": terms.x_star.tolist(),
        "V": terms.V.tolist(),
        "T": terms.T.tolist(),
        "S": terms.S.tolist(),
        "W": terms.W.tolist(),
        "U": terms.U.tolist(),
        "C": corr.tolist(),
        "refined": {
            "N": n,
            "estimate": (terms.x_star + corr / n).tolist(),
        },
    }
    _write_json(out_dir / "refine.json", payload)
    if "n_classes" in model.info:
        rows = []
        for label, obs in _class_observables(model):
            w = _observable_weights(obs, model)
            base = float(w @ terms.x_star)
            c_h = refinement_constant(obs, terms)
            rows.append([label, base, c_h, base + c_h / n])
        _write_csv(
            out_dir / "refine_queues.csv",
            cfg,
            ["class", "meanfield", "correction", "refined"],
            rows,
        )
    if args.dump_fastchain:
        analysis = analyze(model, terms.x_star, check="off")
        for name, mat in (("K", analysis.K), ("pi", analysis.pi[None, :]), ("Kplus", analysis.Kplus)):
            rows = (list(row) for row in np.atleast_2d(mat))
            header = [f"c_{i}" for i in range(model.n_fast)]
            _write_csv(out_dir / f"fastchain_{name}.csv", cfg, header, rows)


def _cmd_simulate(model, args, out_dir: Path, cfg: dict) -> None:
    n = _single_n(_parse_n_list(args.N, "simulate"), "simulate")
    obs = _parse_observable(args.observable, model)
    w = _observable_weights(obs, model)
    x0 = _parse_x0(args.x0, model)
    if args.mode == "transient":
        grid = np.linspace(0.0, args.t_end, args.grid_points)
        est = estimate_transient_mean(
            model, n, grid, w,
            seed=args.seed, replications=args.replications,
            x0=x0, y0=args.y0,
        )
        rows = (
            [r, t, est.per_replication[r, i]]
            for r in range(est.per_replication.shape[0])
            for i, t in enumerate(est.times)
        )
        _write_csv(out_dir / "simulate.csv", cfg, ["replication", "t_or_event", "h_value"], rows)
        return
    est = estimate_steady_state(
        model, n, w,
        seed=args.seed, replications=args.replications,
        warmup_events=args.warmup_events, measure_events=args.measure_events,
        x0=x0, y0=args.y0,
    )
    rows = [[r, est.estimates[r]] for r in range(len(est.estimates))]
    rows.append(["summary", est.mean])
    path = out_dir / "simulate.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_config_line(cfg) + "\n")
        fh.write(f"# ci_half_width: {repr(float(est.ci_half_width))}\n")
        fh.write(f"# valid_replications: {est.replications}\n")
        fh.write("replication,estimate\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    print(f"wrote {path}")


def _cmd_oracle(model, args, out_dir: Path, cfg: dict) -> None:
    n = _single_n(_parse_n_list(args.N, "oracle"), "oracle")
    obs = _parse_observable(args.observable, model)
    x0 = _parse_x0(args.x0, model)
    stat = exact_stationary(model, n, x0=x0, y0=args.y0, max_states=args.max_states)
    expectation = stat.expectation(obs)
    fp = fixed_point(model)
    terms = refinement_terms(model, fp)
    h_star = obs.value_at(terms.x_star)
    c_h = refinement_constant(obs, terms)
    refined = h_star + c_h / n
    payload = {
        "config": cfg,
        "N": n,
        "observable": obs.name,
        "expectation": expectation,
        "phi_inf": terms.x_star.tolist(),
        "h_at_phi_inf": h_star,
        "meanfield_bias_times_N": n * (expectation - h_star),
        "refined_bias_times_N2": n * n * (expectation - refined),
    }
    _write_json(out_dir / "oracle.json", payload)


def _cmd_compare(model, args, out_dir: Path, cfg: dict) -> None:
    n_list = _parse_n_list(args.N, "compare")
    x0 = _parse_x0(args.x0, model)
    fp = fixed_point(model)
    terms = refinement_terms(model, fp)
    observables = _class_observables(model)
    rows = []
    for n in n_list:
        for label, obs in observables:
            w = _observable_weights(obs, model)
            base = float(w @ terms.x_star)
            c_h = refinement_constant(obs, terms)
            est = estimate_steady_state(
                model, n, w,
                seed=args.seed, replications=args.replications,
                warmup_events=args.warmup_events, measure_events=args.measure_events,
                x0=x0, y0=args.y0,
            )
            rows.append([n, label, base, base + c_h / n, est.mean, est.ci_half_width])
    _write_csv(
        out_dir / "compare.csv",
        cfg,
        ["N", "class", "meanfield", "refined", "sim_mean", "sim_ci"],
        rows,
    )


_COMMANDS = {
    "meanfield": _cmd_meanfield,
    "refine": _cmd_refine,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "compare": _cmd_compare,
}


def _fail(kind: str, exc: BaseException) -> None:
    message = " ".join(str(exc).split())
    print(f"error: {kind}: {message}", file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        for name in ("replications", "warmup_events", "measure_events", "grid_points"):
            if getattr(args, name) < 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be nonnegative")
        set_backend(args.backend)
        model = load_model(args.model)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg = _resolved_config(args)
        _COMMANDS[args.command](model, args, out_dir, cfg)
    except (ConfigError, ModelValidationError) as exc:
        _fail("config", exc)
        return 2
    except OSError as exc:
        _fail("config", exc)
        return 2
    except TwoscaleError as exc:
        _fail("numerical", exc)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
