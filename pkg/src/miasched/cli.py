"""Command-line entry point.

Exit codes: 0 success, 1 validation failure (or a failed check), 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .frame_solver import solve_frame
from .model import (
    ContractError,
    ValidationError,
    check,
    config_from_dict,
    fingerprint,
    queue_bound,
    validate_model,
)
from .simulator import (
    compute_metrics,
    fmt,
    read_sweep_csv,
    simulate,
    sweep_csv,
    sweep_v,
    write_trace,
)

log = logging.getLogger("miasched")


class UsageError(Exception):
    pass


def _load(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    raw = p.read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"invalid JSON in {p}: {exc}"]) from exc
    model, config = config_from_dict(doc)
    return model, config, hashlib.sha256(raw).hexdigest()


def _resolve(args, model, config):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "frames", None) is not None:
        changes["horizon_frames"] = args.frames
    if getattr(args, "v_param", None) is not None:
        changes["v_param"] = args.v_param
    config = config.replace(**changes)
    violations = validate_model(model, config)
    if violations:
        raise ValidationError(violations)
    return check(model, config), config


def _write_manifest(out: Path, args, config, config_sha: str, model, extra=None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": args.command,
        "config_path": str(args.config),
        "config_sha256": config_sha,
        "seed": config.seed,
        "v": config.v_param,
        "horizon_frames": config.horizon_frames,
        "output_dir": str(out),
        "version": __version__,
        "model_fingerprint": fingerprint(model, config),
    }
    manifest.update(extra or {})
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --- subcommands -----------------------------------------------------------


def cmd_validate(args) -> int:
    model, config, _ = _load(args.config)
    violations = validate_model(model, config)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 1
    print("ok")
    return 0


def cmd_simulate(args) -> int:
    model, config, sha = _load(args.config)
    model, config = _resolve(args, model, config)
    out = Path(args.out)
    _write_manifest(out, args, config, sha, model)
    trace = simulate(model, config)
    write_trace(trace, out)
    if trace.frames:
        metrics = compute_metrics(trace, config)
        _write_json(out / "metrics.json", metrics.to_dict())
        if not args.no_plots:
            from .plotting import plot_queue

            plot_queue(trace, queue_bound(model, config.beta, config.v_param), out / "queue.png")
    else:
        _write_json(out / "metrics.json", {"frames": 0})
    print(f"wrote {len(trace)} frames to {out}")
    return 0


def cmd_frame_solve(args) -> int:
    model, config, _ = _load(args.config)
    model, config = _resolve(args, model, config)
    if args.l not in model.packets.lengths:
        raise UsageError(f"--l {args.l} is not a supported packet length {list(model.packets.lengths)}")
    if args.q < 0:
        raise UsageError("--q must be nonnegative")
    table = solve_frame(args.q, args.l, model, config.v_param, config.beta)
    lines = [f"# case={table.mode.value}"]
    rows = [["k", "m_k", "choice_k"]]
    for k in range(1, table.length + 1):
        rows.append([k, fmt(table.values[k]), table.choice[k]])
    text = "\n".join(lines + [",".join(str(c) for c in r) for r in rows]) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def cmd_sweep(args) -> int:
    from .oracle import GuardExceeded, theta_star

    model, config, sha = _load(args.config)
    model, config = _resolve(args, model, config)
    v_values = _parse_floats(args.v)
    if not v_values or args.reps < 1:
        raise UsageError("--v needs at least one value and --reps must be >= 1")
    out = Path(args.out)
    _write_manifest(out, args, config, sha, model, {"v_values": v_values, "reps": args.reps})
    theta = None
    if not args.no_oracle:
        try:
            theta = theta_star(model, config.beta).theta
        except GuardExceeded as exc:
            log.warning("skipping theta*: %s", exc)
    rows = sweep_v(model, config, v_values, args.reps, theta_star=theta)
    (out / "sweep.csv").write_bytes(sweep_csv(rows).encode("utf-8"))
    if not args.no_plots:
        from .plotting import plot_sweep

        plot_sweep(rows, out / "sweep.png", theta)
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_oracle(args) -> int:
    from .oracle import frontier_csv, min_expected_delay, theta_star

    model, config, sha = _load(args.config)
    model, config = _resolve(args, model, config)
    out = Path(args.out)
    _write_manifest(out, args, config, sha, model)
    res = theta_star(model, config.beta)
    files = {}
    for fr in res.frontiers:
        name = f"frontier_L{fr.length}.csv"
        (out / name).write_bytes(frontier_csv(fr).encode("utf-8"))
        files[str(fr.length)] = name
    _write_json(
        out / "oracle.json",
        {
            "theta_star": res.theta,
            "expected_surplus": res.expected_surplus,
            "multiplier": res.multiplier,
            "unconstrained_delay": min_expected_delay(model, config.beta),
            "beta": config.beta,
            "support": list(res.support),
            "frontier_files": files,
        },
    )
    if not args.no_plots:
        from .plotting import plot_frontiers

        plot_frontiers(res.frontiers, out / "frontier.png")
    print(f"theta_star={fmt(res.theta)}")
    return 0


def cmd_verify_dp(args) -> int:
    from .oracle import verify_dp

    model, config, _ = _load(args.config)
    model, config = _resolve(args, model, config)
    if args.l < 1:
        raise UsageError("--l must be >= 1")
    res = verify_dp(model, args.l, args.q, config.v_param, config.beta)
    status = "pass" if res.match else "fail"
    print(f"{status} dp_value={fmt(res.dp_value)} oracle_value={fmt(res.oracle_value)}")
    return 0 if res.match else 1


def cmd_compare(args) -> int:
    for p in (args.sweep, args.oracle):
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    theta = json.loads(Path(args.oracle).read_text(encoding="utf-8"))["theta_star"]
    rows = read_sweep_csv(args.sweep)
    lines = [["v", "delay_gap", "gap_times_v"]]
    for r in rows:
        gap = r["mean_delay"] - theta
        lines.append([fmt(r["v"]), fmt(gap), fmt(gap * r["v"])])
    text = "".join(",".join(row) + "\n" for row in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miasched", description=__doc__.splitlines()[0], allow_abbrev=False
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, seed=True):
        p.add_argument("--config", required=True, help="model/config JSON")
        if seed:
            p.add_argument("--seed", type=int, help="overrides the config seed")
        return p

    p = with_config(sub.add_parser("validate", help="check a config"), seed=False)
    p.set_defaults(func=cmd_validate)

    p = with_config(sub.add_parser("simulate", help="run one horizon"))
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, help="overrides horizon_frames")
    p.add_argument("--v", dest="v_param", type=float, help="overrides v")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("frame-solve", help="print one frame's value table"), seed=False)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--v", dest="v_param", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_frame_solve)

    p = with_config(sub.add_parser("sweep", help="delay/power trade-off over V"))
    p.add_argument("--v", required=True, help="comma-separated V values")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--frames", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = with_config(sub.add_parser("oracle", help="optimal constrained delay by enumeration"), seed=False)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = with_config(sub.add_parser("verify-dp", help="check one value table by enumeration"), seed=False)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--v", dest="v_param", type=float)
    p.set_defaults(func=cmd_verify_dp)

    p = sub.add_parser("compare", help="join sweep.csv with oracle.json")
    p.add_argument("--sweep", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
