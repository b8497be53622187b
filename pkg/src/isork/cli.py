"""Experiment command line: trajectory runs, convergence sweeps, comparisons.

A thin shell over the library: every subcommand builds a RunConfig
from defaults, an optional flat key = value config file, command-line
flags, and the ISORK_SEED environment variable (strongest, in that
order), then drives the recorded runners and writes CSV.

Config file grammar: one `key = value` per line, keys named like the
RunConfig fields, `#` comments and blank lines ignored, list values
as comma-separated numbers, booleans as true/false.  `dump-config`
prints the effective configuration in exactly this grammar, so its
output re-parses to the same configuration.

Exit codes: 0 success, 2 configuration or usage error, 3 stage solver
non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

from .diagnostics import convergence_study, run_recorded, write_csv
from .integrator import NonConvergenceError, StepperConfig
from .systems import RigidBody, TodaExtended, ZeitlinSphere
from .tableau import BUILTIN_TABLEAUS, builtin, parse_custom

__all__ = ["RunConfig", "ConfigError", "main"]


class ConfigError(ValueError):
    """Invalid configuration value or combination; exits with status 2."""


_SYSTEMS = ("rigidbody", "toda", "zeitlin")
_METHODS = tuple(BUILTIN_TABLEAUS) + ("custom",)
_COMPARE_BASELINES = ("isospectral-midpoint", "gawlik", "classical-rk4")


@dataclass(frozen=True)
class RunConfig:
    """Flat experiment configuration; field names double as config-file keys."""

    system: str = "rigidbody"
    method: str = "midpoint"
    custom_b: tuple[float, ...] | None = None
    h: float = 0.01
    steps: int = 1000
    seed: int = 42
    variant: str = "left"
    update_form: str = "conjugation"
    solver_tol: float = 1e-13
    solver_max_iters: int = 200
    n: int = 4
    N: int = 17
    inertia: tuple[float, ...] = (1.0, 2.0, 3.0)
    scale: float = 1.0
    forward_laplacian: bool = False
    out: str | None = None


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [piece.strip() for piece in text.split(",") if piece.strip()]
    try:
        return tuple(float(piece) for piece in items)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_COERCERS = {
    "system": str,
    "method": str,
    "custom_b": _parse_float_list,
    "h": float,
    "steps": int,
    "seed": int,
    "variant": str,
    "update_form": str,
    "solver_tol": float,
    "solver_max_iters": int,
    "n": int,
    "N": int,
    "inertia": _parse_float_list,
    "scale": float,
    "forward_laplacian": _parse_bool,
    "out": str,
}


def parse_config_file(path: str) -> dict:
    """Read the flat key = value grammar; later duplicates win, like flags."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _COERCERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _COERCERS[key](value)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def dump_config(config: RunConfig) -> str:
    """Canonical config-file text for the given configuration."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ",".join(repr(float(x)) for x in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file, flags, and ISORK_SEED; validate."""
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    env_seed = os.environ.get("ISORK_SEED")
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"ISORK_SEED must be an integer, got {env_seed!r}") from None
    config = RunConfig(**values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.system not in _SYSTEMS:
        raise ConfigError(f"system must be one of {_SYSTEMS}, got {config.system!r}")
    if config.method not in _METHODS:
        raise ConfigError(f"method must be one of {_METHODS}, got {config.method!r}")
    if config.method == "custom" and not config.custom_b:
        raise ConfigError("method = custom requires custom_b weights")
    if config.h <= 0:
        raise ConfigError(f"h must be positive, got {config.h}")
    if config.steps < 1:
        raise ConfigError(f"steps must be at least 1, got {config.steps}")
    if config.solver_tol <= 0:
        raise ConfigError(f"solver_tol must be positive, got {config.solver_tol}")
    if config.solver_max_iters < 1:
        raise ConfigError(f"solver_max_iters must be at least 1, got {config.solver_max_iters}")
    if config.n < 3:
        raise ConfigError(f"n must be at least 3, got {config.n}")
    if config.N < 2:
        raise ConfigError(f"N must be at least 2, got {config.N}")
    if len(config.inertia) != 3 or any(x <= 0 for x in config.inertia):
        raise ConfigError(f"inertia needs three positive moments, got {config.inertia}")
    if config.scale <= 0:
        raise ConfigError(f"scale must be positive, got {config.scale}")
    if config.variant not in ("left", "right"):
        raise ConfigError(f"variant must be left or right, got {config.variant!r}")
    if config.update_form not in ("conjugation", "dcay"):
        raise ConfigError(f"update_form must be conjugation or dcay, got {config.update_form!r}")


def _tableau_for(config: RunConfig):
    if config.method == "custom":
        try:
            return parse_custom(",".join(repr(float(w)) for w in config.custom_b))
        except ValueError as exc:
            raise ConfigError(f"custom_b: {exc}") from None
    return builtin(config.method)


def _system_for(config: RunConfig):
    if config.system == "rigidbody":
        return RigidBody(inertia=config.inertia)
    if config.system == "toda":
        return TodaExtended(n=config.n)
    return ZeitlinSphere(N=config.N, forward_laplacian=config.forward_laplacian)


def _stepper_config(config: RunConfig, tableau) -> StepperConfig:
    return StepperConfig(
        variant=config.variant,
        update_form=config.update_form,
        solver_tol=config.solver_tol,
        solver_max_iters=config.solver_max_iters,
        tableau=tableau,
    )


def _print_run_summary(config: RunConfig, tableau, records, path: str) -> None:
    final = records[-1]
    max_spectral = max(r.spectral_drift for r in records)
    max_energy = max(abs(r.energy_drift) for r in records)
    max_membership = max(r.membership_residual for r in records)
    total_iters = sum(r.solver_iters_total for r in records)
    stage_count = config.steps * tableau.s
    max_step = max(r.solver_iters_total for r in records[1:])
    print(
        f"run: system={config.system} method={config.method} h={config.h!r} "
        f"steps={config.steps} seed={config.seed}"
    )
    print(f"final energy drift: {final.energy_drift:.6e}")
    print(f"max |energy drift|: {max_energy:.6e}")
    print(f"final spectral drift: {final.spectral_drift:.6e}")
    print(f"max spectral drift: {max_spectral:.6e}")
    print(f"max membership residual: {max_membership:.6e}")
    print(
        f"solver iterations: total={total_iters} "
        f"mean/stage={total_iters / stage_count:.2f} max/step={max_step}"
    )
    print(f"wrote {path}")


def cmd_run(config: RunConfig) -> int:
    tableau = _tableau_for(config)
    system = _system_for(config)
    cfg = _stepper_config(config, tableau)
    mu0 = system.initial_state(config.seed, config.scale)
    records = run_recorded(system, mu0, cfg, config.h, config.steps)
    path = config.out or f"{config.system}-{tableau.name}.csv"
    write_csv(records, path)
    _print_run_summary(config, tableau, records, path)
    return 0


def cmd_convergence(config: RunConfig, h_list, t_final: float, reference_h) -> int:
    if len(h_list) < 3:
        raise ConfigError(f"need at least 3 step sizes for a slope fit, got {len(h_list)}")
    tableau = _tableau_for(config)
    system = _system_for(config)
    cfg = _stepper_config(config, tableau)
    mu0 = system.initial_state(config.seed, config.scale)
    try:
        report = convergence_study(
            system, tableau, h_list, t_final, reference_h, mu0=mu0, cfg=cfg
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print("h,error")
    for h, err in zip(report.h_values, report.errors):
        print(f"{h!r},{err!r}")
    print(f"fitted slope: {report.fitted_slope:.4f}")
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write("h,error\n")
            for h, err in zip(report.h_values, report.errors):
                fh.write(f"{h!r},{err!r}\n")
        print(f"wrote {config.out}")
    return 0


def _compare_runner(label: str, config: RunConfig):
    """Resolve a compare method label to (stepper kind, tableau)."""
    if label == "gawlik":
        return "gawlik", builtin("midpoint")
    if label == "classical-rk4":
        return "rk4", builtin("midpoint")
    if label == "isospectral-midpoint":
        return "isospectral", builtin("midpoint")
    if label in BUILTIN_TABLEAUS:
        return "isospectral", builtin(label)
    if label == "custom":
        if not config.custom_b:
            raise ConfigError("compare method custom requires custom_b weights")
        return "isospectral", parse_custom(",".join(repr(float(w)) for w in config.custom_b))
    known = ", ".join(_COMPARE_BASELINES + tuple(BUILTIN_TABLEAUS) + ("custom",))
    raise ConfigError(f"unknown compare method {label!r}; known: {known}")


def cmd_compare(config: RunConfig, methods) -> int:
    if not methods:
        raise ConfigError("compare needs at least one method")
    system = _system_for(config)
    mu0 = system.initial_state(config.seed, config.scale)
    prefix = config.out or f"compare-{config.system}"
    if prefix.endswith(".csv"):
        prefix = prefix[: -len(".csv")]
    results = []
    for label in methods:
        kind, tableau = _compare_runner(label, config)
        cfg = _stepper_config(config, tableau)
        records = run_recorded(system, mu0, cfg, config.h, config.steps, method=kind)
        path = f"{prefix}-{label}.csv"
        write_csv(records, path)
        results.append((label, max(r.spectral_drift for r in records), path))
    reference = next(
        (r for r in results if r[0] == "isospectral-midpoint"), results[0]
    )
    ref_drift = reference[1]
    width = max(len(label) for label, _, _ in results)
    print(f"compare: system={config.system} h={config.h!r} steps={config.steps} seed={config.seed}")
    print(f"{'method'.ljust(width)}  {'max spectral drift':>20}  {'ratio vs ' + reference[0]:>26}")
    for label, drift, path in results:
        ratio = drift / ref_drift if ref_drift > 0 else float("inf")
        print(f"{label.ljust(width)}  {drift:>20.6e}  {ratio:>26.3e}")
    for _, _, path in results:
        print(f"wrote {path}")
    return 0


def cmd_dump_config(config: RunConfig) -> int:
    text = dump_config(config)
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {config.out}")
    else:
        sys.stdout.write(text)
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key = value config file")
    parser.add_argument("--system", choices=_SYSTEMS)
    parser.add_argument("--method", choices=_METHODS)
    parser.add_argument(
        "--custom-b", dest="custom_b", type=_parse_float_list, metavar="B1,B2,...",
        help="weights for method=custom",
    )
    parser.add_argument("--h", type=float, help="macro step size")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--variant", choices=("left", "right"))
    parser.add_argument("--update-form", dest="update_form", choices=("conjugation", "dcay"))
    parser.add_argument("--solver-tol", dest="solver_tol", type=float)
    parser.add_argument("--solver-max-iters", dest="solver_max_iters", type=int)
    parser.add_argument("--n", type=int, help="Toda lattice size")
    parser.add_argument("--N", dest="N", type=int, help="Zeitlin truncation size")
    parser.add_argument("--inertia", type=_parse_float_list, metavar="I1,I2,I3")
    parser.add_argument("--scale", type=float, help="initial state scale")
    parser.add_argument(
        "--forward-laplacian", dest="forward_laplacian", action="store_const", const=True,
        help="use the forward Laplacian as the Zeitlin stream operator",
    )
    parser.add_argument("--out", help="output path (run/convergence) or prefix (compare)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isork",
        description="Isospectral symplectic SDIRK experiments on matrix Lie-Poisson systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one trajectory and write CSV diagnostics")
    _add_config_flags(p_run)

    p_conv = sub.add_parser("convergence", help="self-convergence sweep and order fit")
    _add_config_flags(p_conv)
    p_conv.add_argument(
        "--h-list", dest="h_list", type=_parse_float_list, required=True, metavar="H1,H2,..."
    )
    p_conv.add_argument("--t-final", dest="t_final", type=float, required=True)
    p_conv.add_argument("--reference-h", dest="reference_h", type=float, default=None)

    p_cmp = sub.add_parser("compare", help="run several methods from identical initial data")
    _add_config_flags(p_cmp)
    p_cmp.add_argument(
        "--methods", type=lambda s: tuple(p.strip() for p in s.split(",") if p.strip()),
        required=True, metavar="M1,M2,...",
    )

    p_dump = sub.add_parser("dump-config", help="print the effective configuration")
    _add_config_flags(p_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    try:
        config = build_config(args)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "convergence":
            return cmd_convergence(config, args.h_list, args.t_final, args.reference_h)
        if args.command == "compare":
            return cmd_compare(config, args.methods)
        return cmd_dump_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
