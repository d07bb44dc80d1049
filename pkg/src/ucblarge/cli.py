"""Command-line front end: ``sim``, ``bound`` and ``table``.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
import time
from typing import Sequence

from . import confidence as conf
from .policies import PolicyKind, PolicySpec
from .reward_models import Family
from .simulator import PriorSpec, RunConfig, RunSummary, default_policies, run_batch

CSV_HEADER = [
    "example", "policy", "params", "K", "N", "runs", "seed",
    "mean_regret", "se_regret", "mean_tilde_regret", "lower_bound_r", "wall_seconds",
]
NUMERIC_COLUMNS = CSV_HEADER[3:]

POLICY_KINDS = {
    "ucb-large": PolicyKind.UCB_LARGE,
    "ucb-agrawal": PolicyKind.UCB_AGRAWAL,
    "ucb-bk": PolicyKind.UCB_BK,
    "thompson": PolicyKind.THOMPSON,
}
ALLOWED_KEYS = {
    PolicyKind.UCB_LARGE: {"chi", "alpha", "schedule", "q"},
    PolicyKind.UCB_AGRAWAL: {"chi", "alpha", "schedule"},
    PolicyKind.UCB_BK: set(),
    PolicyKind.THOMPSON: set(),
}


class UsageError(Exception):
    pass


def _number(key: str, text: str, item: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--policies: {key}={text!r} in {item!r} is not a number") from None
    if not math.isfinite(value):
        raise UsageError(f"--policies: {key} in {item!r} must be finite")
    return value


def parse_policy(item: str, family: Family) -> PolicySpec:
    """Parse ``name[:key=value...]``, e.g. ``ucb-large:chi=0.5:q=0.1``."""
    name, *fields = item.strip().split(":")
    if name not in POLICY_KINDS:
        raise UsageError(f"--policies: unknown policy {name!r} (choose from {', '.join(POLICY_KINDS)})")
    kind = POLICY_KINDS[name]
    opts: dict[str, str] = {}
    for f in fields:
        key, sep, value = f.partition("=")
        if not sep or key not in ALLOWED_KEYS[kind]:
            raise UsageError(f"--policies: unexpected option {f!r} for {name}")
        if key in opts:
            raise UsageError(f"--policies: option {key!r} repeated in {item!r}")
        opts[key] = value

    schedule = None
    if kind in (PolicyKind.UCB_LARGE, PolicyKind.UCB_AGRAWAL):
        shape = opts.get("schedule", "chi-log")
        if shape == "chi-log":
            if "alpha" in opts:
                raise UsageError(f"--policies: alpha needs schedule=log-alpha in {item!r}")
            chi = _number("chi", opts.get("chi", "1"), item)
            if not 0.0 < chi <= 1.0:
                raise UsageError(f"--policies: chi must lie in (0, 1] in {item!r}")
            schedule = conf.Schedule.chi_log(chi)
        elif shape == "log-sqrt":
            if "chi" in opts or "alpha" in opts:
                raise UsageError(f"--policies: schedule=log-sqrt takes no chi or alpha in {item!r}")
            schedule = conf.Schedule.log_minus_sqrt_log()
        elif shape == "log-alpha":
            if "chi" in opts:
                raise UsageError(f"--policies: chi needs schedule=chi-log in {item!r}")
            alpha = _number("alpha", opts.get("alpha", "2"), item)
            if not alpha > 1.0:
                raise UsageError(f"--policies: alpha must exceed 1 in {item!r}")
            schedule = conf.Schedule.log_plus_alpha_loglog(alpha)
        else:
            raise UsageError(f"--policies: unknown schedule {shape!r} in {item!r}")
    q = _number("q", opts["q"], item) if "q" in opts else 0.0
    if not 0.0 <= q < 1.0:
        raise UsageError(f"--policies: q must lie in [0, 1) in {item!r}")
    if kind == PolicyKind.UCB_BK and family != Family.NORMAL_UNKNOWN:
        raise UsageError("--policies: ucb-bk requires --example normal-unknown")
    return PolicySpec(kind, family, schedule, q)


def parse_policies(text: str, family: Family) -> list[PolicySpec]:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise UsageError("--policies: no policies given")
    return [parse_policy(s, family) for s in items]


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


def summary_row(s: RunSummary) -> list[str]:
    return [
        s.example, s.policy, s.params, _fmt(s.K), _fmt(s.N), _fmt(s.J), _fmt(s.base_seed),
        _fmt(s.mean_regret), _fmt(s.se_regret), _fmt(s.mean_tilde_regret),
        _fmt(s.lower_bound_r), _fmt(s.wall_seconds),
    ]


def csv_text(summaries: Sequence[RunSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(summary_row(s) for s in summaries)
    return buf.getvalue()


def write_csv(summaries: Sequence[RunSummary], path: str) -> None:
    """Write summaries atomically: a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ucblarge-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(csv_text(summaries))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_table(rows: list[dict[str, str]]) -> str:
    """Regret tables grouped by example: policies down, K across, then details.

    Cells are copied verbatim from the CSV so every written number reappears.
    """
    out = []
    examples = list(dict.fromkeys(r["example"] for r in rows))
    for example in examples:
        group = [r for r in rows if r["example"] == example]
        labels = list(dict.fromkeys((r["policy"], r["params"]) for r in group))
        ks = sorted(dict.fromkeys(r["K"] for r in group), key=int)
        header = ["policy", "params"] + [f"K={k}" for k in ks]
        body = []
        for policy, params in labels:
            line = [policy, params]
            for k in ks:
                cell = [r for r in group if (r["policy"], r["params"], r["K"]) == (policy, params, k)]
                line.append(" / ".join(f"{r['mean_regret']} +/- {r['se_regret']}" for r in cell))
            body.append(line)
        out.append(f"example: {example} (mean regret +/- standard error)")
        out.append(_aligned([header] + body))
        detail_cols = ["policy", "params", "K", "N", "runs", "seed",
                       "mean_tilde_regret", "lower_bound_r", "wall_seconds"]
        out.append(_aligned([detail_cols] + [[r[c] for c in detail_cols] for r in group]))
        out.append("")
    return "\n".join(out)


def _aligned(table: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for n, row in enumerate(table):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def read_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucblarge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a Monte-Carlo regret experiment")
    sim.add_argument("--example", choices=[p.value for p in PriorSpec], default="normal-known",
                     help="reward family and prior (default: normal-known)")
    sim.add_argument("--K", type=_int_list, default=[10], help="number of arms; comma list allowed (default: 10)")
    sim.add_argument("--N", type=int, default=20000, help="rewards per run (default: 20000)")
    sim.add_argument("--runs", type=int, default=100, help="replications J (default: 100)")
    sim.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    sim.add_argument("--policies", default=None,
                     help="comma list of name[:key=value...]; default: the full table line-up")
    sim.add_argument("--out", default=None, help="CSV output path (default: standard output)")
    sim.add_argument("--threads", type=int, default=0, help="worker threads, 0 = one per core (default: 0)")

    bound = sub.add_parser("bound", help="evaluate one upper confidence bound")
    bound.add_argument("--family", required=True,
                       choices=["normal-known", "normal-unknown", "bk", "bernoulli"])
    bound.add_argument("--xbar", type=float, required=True)
    bound.add_argument("--t", type=int, required=True)
    bound.add_argument("--b", type=float, required=True)
    bound.add_argument("--sigma-hat", type=float, default=None)

    table = sub.add_parser("table", help="render a CSV written by sim")
    table.add_argument("path")
    return parser


def _sim(args, parser) -> int:
    prior = PriorSpec(args.example)
    try:
        specs = (parse_policies(args.policies, prior.family) if args.policies is not None
                 else default_policies(prior))
        if args.runs < 1:
            raise UsageError("--runs must be at least 1")
        if args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        init = max(s.init_per_arm for s in specs)
        for K in args.K:
            if K < 1:
                raise UsageError("--K must be at least 1")
            if args.N < K * init:
                raise UsageError("N must be at least K times the initial allocation")
        configs = [RunConfig(prior, K, args.N, args.runs, args.seed, tuple(specs)) for K in args.K]
    except (UsageError, ValueError) as exc:
        parser.error(str(exc))

    summaries = []
    for config in configs:
        start = time.perf_counter()
        summaries.extend(run_batch(config, threads=args.threads))
        print(f"{prior.value} K={config.K}: {config.J} runs x {len(specs)} policies "
              f"in {time.perf_counter() - start:.1f}s", file=sys.stderr)
    if args.out is None:
        sys.stdout.write(csv_text(summaries))
    else:
        write_csv(summaries, args.out)
        sys.stdout.write(render_table(read_csv(args.out)))
    return 0


def _bound(args, parser) -> int:
    needs_sigma = args.family in ("normal-unknown", "bk")
    if needs_sigma and args.sigma_hat is None:
        parser.error(f"--sigma-hat is required for --family {args.family}")
    if not needs_sigma and args.sigma_hat is not None:
        parser.error(f"--sigma-hat does not apply to --family {args.family}")
    try:
        if args.family == "normal-known":
            value = conf.ucb_normal_known(args.xbar, args.t, args.b)
        elif args.family == "normal-unknown":
            value = conf.ucb_normal_unknown(args.xbar, args.sigma_hat, args.t, args.b)
        elif args.family == "bk":
            value = conf.ucb_bk_unknown(args.xbar, args.sigma_hat, args.t, args.b)
        else:
            value = conf.ucb_bernoulli(args.xbar, args.t, args.b)
    except ValueError as exc:
        parser.error(str(exc))
    print(f"{value:.7f}")
    return 0


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sim":
            return _sim(args, parser)
        if args.command == "bound":
            return _bound(args, parser)
        sys.stdout.write(render_table(read_csv(args.path)))
        return 0
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (OSError, ValueError) as exc:
        print(f"ucblarge: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
