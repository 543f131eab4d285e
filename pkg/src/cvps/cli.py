"""Command-line front end.

    cvps keyrate     one operating point
    cvps sweep       key rate against distance for several variants
    cvps maxdistance maximum distance against channel noise
    cvps verify      closed forms against the brute-force Fock simulation

Settings come from an optional ``key = value`` config file, then from
command-line flags.  Exit codes: 0 ok, 1 verification failure, 2 bad
input, 3 numerical or physicality error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PostSelectionError, UnphysicalError
from .params import PLACEMENTS, ProtocolParams, SubtractionMode, TruncationConfig, TruncationWarning
from .protocol import DEFAULT_LOSS_DB_PER_KM, distance_to_transmittance, key_rate

log = logging.getLogger("cvps")

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    alpha_sq: float = 1.0
    beta_sq: float = 0.001
    tap_T1: float = 0.9
    recon_eff: float = 0.95
    det_eff: float = 0.68
    det_eff_placement: str = "subtraction_tap"
    n_max: int = 30
    tail_tolerance: float = 1e-6
    distance: float = 0.0
    loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM
    variants: tuple = ("detector",)
    distances: tuple = ()
    beta2_grid: tuple = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    optimize_alpha: bool = False
    out: str = "-"
    format: str = "json"
    jobs: int = 1
    seed: int = 0
    oracle_n_max: int = 8
    closed_n_max: int | None = None
    corrupt_tap: bool = False

    def params(self, **changes):
        p = ProtocolParams(
            alpha_sq=self.alpha_sq,
            beta_sq=self.beta_sq,
            channel_T=distance_to_transmittance(self.distance, self.loss_db_per_km),
            tap_T1=self.tap_T1,
            recon_eff=self.recon_eff,
            det_eff=self.det_eff,
            trunc=TruncationConfig(self.n_max, self.tail_tolerance),
            det_eff_placement=self.det_eff_placement,
        )
        return dataclasses.replace(p, **changes) if changes else p

    def modes(self):
        return [SubtractionMode.parse(v) for v in self.variants]

    def validate(self):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.det_eff_placement not in PLACEMENTS:
            raise ConfigError(f"det_eff_placement must be one of {', '.join(PLACEMENTS)}")
        for name in ("distances", "beta2_grid"):
            grid = list(getattr(self, name))
            if grid != sorted(grid):
                raise ConfigError(f"{name} must be sorted ascending")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.variants:
            raise ConfigError("at least one variant is required")
        self.modes()
        self.params()
        return self


def parse_range(text):
    """``lo:hi:step`` (inclusive of hi) or a comma list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        try:
            lo, hi, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"expected lo:hi:step, got {text!r}") from None
        if step <= 0:
            raise ConfigError("step must be positive")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(float(lo + i * step) for i in range(max(count, 0)))
    return parse_list(text)


def parse_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma separated numbers, got {text!r}") from None


def _coerce(name, raw):
    f = {f.name: f for f in dataclasses.fields(RunConfig)}.get(name)
    if f is None:
        raise ConfigError(f"unknown key {name!r}")
    raw = raw.strip()
    kind = f.type
    try:
        if name == "variants":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if name == "distances":
            return parse_range(raw)
        if name == "beta2_grid":
            return parse_list(raw)
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int" or kind == "int | None":
            if kind == "int | None" and raw.lower() in ("", "none"):
                return None
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def read_config(path):
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            try:
                values[key.strip()] = _coerce(key.strip(), raw)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--jobs", type=int)
    common.add_argument("--optimize-alpha", action="store_true", default=None)
    common.add_argument("--variant", action="append", help="none | counter:S | detector")
    common.add_argument("--distances", help="lo:hi:step in km, or a comma list")
    common.add_argument("--beta2-grid", help="comma separated channel noise values")
    common.add_argument("--loss-db-per-km", type=float)
    common.add_argument("--distance", type=float, help="km")
    common.add_argument("--alpha-sq", type=float)
    common.add_argument("--beta-sq", type=float)
    common.add_argument("--tap-T1", type=float)
    common.add_argument("--recon-eff", type=float)
    common.add_argument("--det-eff", type=float)
    common.add_argument("--det-eff-placement", choices=PLACEMENTS)
    common.add_argument("--n-max", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--oracle-n-max", type=int)
    common.add_argument("--closed-n-max", type=int)
    common.add_argument("--corrupt-tap", action="store_true", default=None, help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cvps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("keyrate", "sweep", "maxdistance", "verify"):
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args):
    values = read_config(args.config) if args.config else {}
    flags = {
        "out": args.out,
        "format": args.format,
        "jobs": args.jobs,
        "optimize_alpha": args.optimize_alpha,
        "loss_db_per_km": args.loss_db_per_km,
        "distance": args.distance,
        "alpha_sq": args.alpha_sq,
        "beta_sq": args.beta_sq,
        "tap_T1": args.tap_T1,
        "recon_eff": args.recon_eff,
        "det_eff": args.det_eff,
        "det_eff_placement": args.det_eff_placement,
        "n_max": args.n_max,
        "seed": args.seed,
        "oracle_n_max": args.oracle_n_max,
        "closed_n_max": args.closed_n_max,
        "corrupt_tap": args.corrupt_tap,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.variant:
        values["variants"] = tuple(
            v.strip() for item in args.variant for v in item.split(",") if v.strip()
        )
    if args.distances is not None:
        values["distances"] = parse_range(args.distances)
    if args.beta2_grid is not None:
        values["beta2_grid"] = parse_list(args.beta2_grid)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------- output


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit(rows, fmt, columns=None):
    """Render rows (list of dicts) as CSV or JSON text."""
    if fmt == "json":
        if len(rows) == 1 and columns is None:
            return json.dumps(rows[0], indent=2) + "\n"
        return json.dumps(rows, indent=2) + "\n"
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def parse_csv(text):
    """Inverse of ``emit(..., "csv")``: numeric cells back to float."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v)
            except ValueError:
                parsed[k] = v
        rows.append(parsed)
    return rows


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _pool_map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- commands


def _keyrate_row(task):
    params, mode, distance, optimize = task
    from .optimize import optimize_alpha_at

    if optimize:
        opt = optimize_alpha_at(params, mode)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            params = dataclasses.replace(params, alpha_sq=opt.best_alpha_sq)
    res = key_rate(params, mode)
    return res.record(distance=distance)


SWEEP_COLUMNS = ["distance", "variant", "P", "I", "chi", "K", "alpha_sq"]


def cmd_keyrate(cfg: RunConfig):
    params = cfg.params()
    mode = cfg.modes()[0]
    row = _keyrate_row((params, mode, cfg.distance, cfg.optimize_alpha))
    _write(emit([row], cfg.format), cfg.out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig):
    tasks = []
    for d in cfg.distances:
        for mode in cfg.modes():
            p = cfg.params(channel_T=distance_to_transmittance(d, cfg.loss_db_per_km))
            tasks.append((p, mode, d, cfg.optimize_alpha))
    rows = _pool_map(_keyrate_row, tasks, cfg.jobs)
    rows = [{c: r[c] for c in SWEEP_COLUMNS} for r in rows]
    _write(emit(rows, cfg.format, SWEEP_COLUMNS), cfg.out)
    return EXIT_OK


def _maxdistance_row(task):
    params, mode, loss = task
    from .optimize import max_distance

    return {
        "beta_sq": params.beta_sq,
        "variant": mode.label,
        "max_km": max_distance(params, mode, loss),
    }


def cmd_maxdistance(cfg: RunConfig):
    tasks = []
    for b2 in cfg.beta2_grid:
        for mode in cfg.modes():
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                tasks.append((cfg.params(beta_sq=b2, channel_T=1.0), mode, cfg.loss_db_per_km))
    rows = _pool_map(_maxdistance_row, tasks, cfg.jobs)
    _write(emit(rows, cfg.format, ["beta_sq", "variant", "max_km"]), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig):
    from .verify import run_verification

    closed = cfg.closed_n_max if cfg.closed_n_max is not None else cfg.oracle_n_max
    if closed != cfg.oracle_n_max:
        raise ConfigError(
            f"closed-form cutoff {closed} differs from oracle cutoff {cfg.oracle_n_max}; "
            "truncation only cancels when they are equal"
        )
    report = run_verification(
        n_max=cfg.oracle_n_max, seed=cfg.seed, corrupt_tap=cfg.corrupt_tap
    )
    if cfg.format == "json":
        _write(json.dumps(report, indent=2) + "\n", cfg.out)
    else:
        _write(report_text(report), cfg.out)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def report_text(report):
    lines = []
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        lines.append(f"{status}  {check['name']}: {check['detail']}")
    for note in report.get("notes", []):
        lines.append(f"INFO  {note}")
    lines.append("overall: " + ("PASS" if report["passed"] else "FAIL"))
    return "\n".join(lines) + "\n"


COMMANDS = {
    "keyrate": cmd_keyrate,
    "sweep": cmd_sweep,
    "maxdistance": cmd_maxdistance,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"cvps: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UnphysicalError, PostSelectionError, FloatingPointError) as exc:
        print(f"cvps: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
