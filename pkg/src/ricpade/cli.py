"""Command-line driver: config parsing, sweeps, machine-readable output.

Configs are JSON with a fixed key set; numeric literals are parsed as
exact decimal strings and never pass through a double.  Flags override
file values.  Each sequence entry becomes one record and each job adds
a summary record; records are emitted in input order as CSV, JSON
lines, or an aligned table.

Exit codes: 0 all jobs succeeded, 2 at least one job failed to
converge, 3 configuration error, 4 precision cap exhausted.
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .errors import (
    ConfigError,
    NonConvergenceError,
    PrecisionExhaustedError,
    RicpadeError,
)
from .hankel import HankelProblem
from .models import ResonanceProblem, ShiftProblem, exact_model_null, solve_resonance, solve_shift
from .numbers import exact_fraction, format_mpf, frac_to_decimal, to_mpc, to_mpf, workprec
from .series import PotentialSpec, build_qgrid
from .solver import SolveOptions, estimate_converged, run_sequence, seed_scan

CSV_COLUMNS = (
    "mode", "lambda", "d", "D", "re", "im",
    "residual_log10", "iterations", "precision_bits", "certified_digits",
)

_MODES = ("shift", "resonance", "solve", "scan", "validate")
_MODEL_MODES = ("shift", "resonance", "validate")
_OUTPUT_FORMATS = ("table", "csv", "json-lines")

_TOP_KEYS = {
    "mode", "lambda", "potential", "D_min", "D_max", "d_values",
    "precision_bits", "precision_max", "newton_tol", "max_iter",
    "seed", "region", "grid_points", "output_format", "output_path",
}
_POTENTIAL_KEYS = {"beta", "mu", "v"}
_SEED_KEYS = {"re", "im"}
_REGION_KEYS = {"re", "im"}

ENV_PRECISION = "RPM_PRECISION_BITS"


@dataclass
class RunConfig:
    mode: str
    lambdas: tuple = ()
    potential: PotentialSpec | None = None
    seed: tuple | None = None          # (Fraction re, Fraction im)
    region: tuple | None = None        # ((lo, hi),) or ((re_lo, re_hi), (im_lo, im_hi))
    grid_points: int = 64
    options: SolveOptions = field(default_factory=SolveOptions)
    output_format: str = "table"
    output_path: str | None = None

    def validate(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode: expected one of {_MODES}, got {self.mode!r}")
        if self.mode in _MODEL_MODES and not self.lambdas:
            raise ConfigError(f"mode {self.mode!r} requires a non-empty lambda list")
        if self.mode in ("solve", "scan") and self.potential is None:
            raise ConfigError(f"mode {self.mode!r} requires a potential")
        if self.mode in ("solve", "scan") and self.seed is None and self.region is None:
            raise ConfigError(f"mode {self.mode!r} requires a seed or a region")
        if self.output_format not in _OUTPUT_FORMATS:
            raise ConfigError(
                f"output_format: expected one of {_OUTPUT_FORMATS}, "
                f"got {self.output_format!r}"
            )
        return self


def _check_keys(obj, allowed, path):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _as_fraction_list(value, path):
    if not isinstance(value, list):
        value = [value]
    out = []
    for i, item in enumerate(value):
        out.append(exact_fraction(item, f"{path}[{i}]"))
    return tuple(out)


def _json_load(text, path="config"):
    try:
        return json.loads(text, parse_float=str)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _potential_from_obj(obj, path="potential"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(obj, _POTENTIAL_KEYS, path)
    missing = _POTENTIAL_KEYS - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing key(s) {sorted(missing)}")
    return PotentialSpec(
        beta=obj["beta"],
        mu=exact_fraction(obj["mu"], f"{path}.mu"),
        v=_as_fraction_list(obj["v"], f"{path}.v"),
    )


def _pair_from_obj(obj, keys, path):
    _check_keys(obj, keys, path)
    re = exact_fraction(obj.get("re", 0), f"{path}.re")
    im = exact_fraction(obj.get("im", 0), f"{path}.im")
    return re, im


def _region_from_obj(obj, path="region"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(obj, _REGION_KEYS, path)
    if "re" not in obj:
        raise ConfigError(f"{path}: needs at least the 're' interval")

    def interval(v, sub):
        if not isinstance(v, list) or len(v) != 2:
            raise ConfigError(f"{path}.{sub}: expected [lo, hi]")
        return (exact_fraction(v[0], f"{path}.{sub}[0]"),
                exact_fraction(v[1], f"{path}.{sub}[1]"))

    re = interval(obj["re"], "re")
    if "im" in obj:
        return (re, interval(obj["im"], "im"))
    return (re,)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ricpade",
        description="Hankel-determinant eigensolver for perturbed Coulomb "
                    "potentials (bound-state shifts and resonances).",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--mode", choices=_MODES)
    parser.add_argument("--lambda", dest="lambda_", metavar="LIST",
                        help="comma-separated couplings, e.g. 0.10,0.09")
    parser.add_argument("--potential", metavar="JSON",
                        help='inline potential, e.g. \'{"beta":1,"mu":2,"v":["0","-1"]}\'')
    parser.add_argument("--D-min", dest="D_min", type=int)
    parser.add_argument("--D-max", dest="D_max", type=int)
    parser.add_argument("--d-values", metavar="LIST", help="e.g. 0,1")
    parser.add_argument("--precision-bits", type=int)
    parser.add_argument("--precision-max", type=int)
    parser.add_argument("--newton-tol", metavar="DEC")
    parser.add_argument("--max-iter", type=int)
    parser.add_argument("--seed-re", metavar="DEC")
    parser.add_argument("--seed-im", metavar="DEC")
    parser.add_argument("--region-re", metavar="LO,HI")
    parser.add_argument("--region-im", metavar="LO,HI")
    parser.add_argument("--grid-points", type=int)
    parser.add_argument("--output-format", choices=_OUTPUT_FORMATS)
    parser.add_argument("--output-path")
    parser.add_argument("--dump-config", action="store_true",
                        help="print the resolved config as JSON and exit")
    return parser


def parse_config(argv):
    """Resolve flags, optional config file, and environment defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)

    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as handle:
                raw = _json_load(handle.read(), args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be an object")
        _check_keys(raw, _TOP_KEYS, "config")

    def pick(flag_value, key, default=None):
        if flag_value is not None:
            return flag_value
        return raw.get(key, default)

    mode = pick(args.mode, "mode")
    if mode is None:
        raise ConfigError("mode is required (flag --mode or config key 'mode')")

    lam_raw = args.lambda_.split(",") if args.lambda_ is not None else raw.get("lambda", [])
    lambdas = _as_fraction_list(list(lam_raw), "lambda")

    potential = None
    if args.potential is not None:
        potential = _potential_from_obj(_json_load(args.potential, "--potential"))
    elif "potential" in raw:
        potential = _potential_from_obj(raw["potential"])

    seed = None
    if args.seed_re is not None or args.seed_im is not None:
        seed = (exact_fraction(args.seed_re or 0, "--seed-re"),
                exact_fraction(args.seed_im or 0, "--seed-im"))
    elif "seed" in raw:
        if not isinstance(raw["seed"], dict):
            raise ConfigError("seed: expected an object with re/im")
        seed = _pair_from_obj(raw["seed"], _SEED_KEYS, "seed")

    region = None
    if args.region_re is not None:
        def split_pair(text, name):
            parts = text.split(",")
            if len(parts) != 2:
                raise ConfigError(f"{name}: expected LO,HI")
            return (exact_fraction(parts[0], name), exact_fraction(parts[1], name))

        re_iv = split_pair(args.region_re, "--region-re")
        if args.region_im is not None:
            region = (re_iv, split_pair(args.region_im, "--region-im"))
        else:
            region = (re_iv,)
    elif "region" in raw:
        region = _region_from_obj(raw["region"])

    env_bits = os.environ.get(ENV_PRECISION)
    default_bits = 512
    if env_bits is not None:
        try:
            default_bits = int(env_bits)
        except ValueError as exc:
            raise ConfigError(f"{ENV_PRECISION}: not an integer") from exc

    d_raw = args.d_values.split(",") if args.d_values is not None else raw.get("d_values", [0, 1])
    try:
        displacements = tuple(int(x) for x in d_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("d_values: expected integers") from exc

    def int_opt(flag_value, key, default):
        value = pick(flag_value, key, default)
        if not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value

    newton_tol = pick(args.newton_tol, "newton_tol")
    if newton_tol is not None and not isinstance(newton_tol, str):
        raise ConfigError("newton_tol: expected a decimal string")

    # Model modes need deeper iteration budgets: near-axis root pairs
    # slow Newton to a creep before the imaginary ladder resolves them.
    default_iter = {"shift": 120, "resonance": 250}.get(mode, 60)
    try:
        options = SolveOptions(
            dim_min=int_opt(args.D_min, "D_min", 2),
            dim_max=int_opt(args.D_max, "D_max", 20),
            displacements=displacements,
            precision_bits=int_opt(args.precision_bits, "precision_bits", default_bits),
            precision_max=int_opt(args.precision_max, "precision_max", 8192),
            newton_tol=newton_tol,
            max_iter=int_opt(args.max_iter, "max_iter", default_iter),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    config = RunConfig(
        mode=mode,
        lambdas=lambdas,
        potential=potential,
        seed=seed,
        region=region,
        grid_points=int_opt(args.grid_points, "grid_points", 64),
        options=options,
        output_format=pick(args.output_format, "output_format", "table"),
        output_path=pick(args.output_path, "output_path"),
    ).validate()
    return config, bool(args.dump_config)


def dump_config(config):
    """Resolved config as a JSON object of exact decimal strings."""
    obj = {"mode": config.mode}
    if config.lambdas:
        obj["lambda"] = [frac_to_decimal(x) for x in config.lambdas]
    if config.potential is not None:
        obj["potential"] = {
            "beta": config.potential.beta,
            "mu": frac_to_decimal(config.potential.mu),
            "v": [frac_to_decimal(x) for x in config.potential.v],
        }
    if config.seed is not None:
        obj["seed"] = {"re": frac_to_decimal(config.seed[0]),
                       "im": frac_to_decimal(config.seed[1])}
    if config.region is not None:
        obj["region"] = {"re": [frac_to_decimal(x) for x in config.region[0]]}
        if len(config.region) > 1:
            obj["region"]["im"] = [frac_to_decimal(x) for x in config.region[1]]
    opts = config.options
    obj.update({
        "D_min": opts.dim_min,
        "D_max": opts.dim_max,
        "d_values": list(opts.displacements),
        "precision_bits": opts.precision_bits,
        "precision_max": opts.precision_max,
        "grid_points": config.grid_points,
        "output_format": config.output_format,
    })
    if opts.newton_tol is not None:
        obj["newton_tol"] = opts.newton_tol
    obj["max_iter"] = opts.max_iter
    if config.output_path is not None:
        obj["output_path"] = config.output_path
    return json.dumps(obj, indent=2)


def _num(value, digits=30):
    if value is None:
        return ""
    if isinstance(value, mpmath.mpc):
        raise ValueError("complex values are split into re/im")
    return format_mpf(mpmath.mpf(value), digits)


def _entry_record(mode, lam_str, seq, entry):
    from .numbers import imag_part, real_part

    return {
        "kind": "entry",
        "mode": mode,
        "lambda": lam_str,
        "d": str(seq.displacement),
        "D": str(entry.dimension),
        "re": _num(real_part(entry.root)),
        "im": _num(imag_part(entry.root)),
        "residual_log10": _num(entry.residual_log10, 8),
        "iterations": str(entry.iterations),
        "precision_bits": str(entry.precision_bits),
        "certified_digits": "",
    }


def _summary_record(mode, lam_str, report, extra=None):
    from .numbers import imag_part, real_part

    rec = {
        "kind": "summary",
        "mode": mode,
        "lambda": lam_str,
        "d": "",
        "D": "",
        "re": _num(real_part(report.value)),
        "im": _num(imag_part(report.value)),
        "residual_log10": "",
        "iterations": "",
        "precision_bits": str(report.precision_used),
        "certified_digits": str(report.certified_digits),
        "stable_digits": str(report.stable_digits),
        "d_agreement_digits": str(report.d_agreement_digits),
    }
    if extra:
        rec.update(extra)
    return rec


def _run_model_mode(config, records):
    worst = 0
    for lam in config.lambdas:
        lam_str = frac_to_decimal(lam)
        try:
            if config.mode == "shift":
                result = solve_shift(ShiftProblem(lam=lam, options=config.options))
            else:
                seed = None
                if config.seed is not None:
                    with workprec(config.options.precision_bits):
                        seed = to_mpc(config.seed[0], config.seed[1])
                result = solve_resonance(
                    ResonanceProblem(lam=lam, options=config.options, seed=seed)
                )
        except PrecisionExhaustedError:
            worst = max(worst, 4)
            continue
        except NonConvergenceError as exc:
            worst = max(worst, 2)
            if exc.partial is not None and exc.partial.entries:
                for entry in exc.partial.entries:
                    records.append(_entry_record(config.mode, lam_str, exc.partial, entry))
            continue
        for d in sorted(result.sequences):
            seq = result.sequences[d]
            for entry in seq.entries:
                records.append(_entry_record(config.mode, lam_str, seq, entry))
        extra = None
        if result.im_below_floor is not None:
            extra = {"im_below_floor": str(result.im_below_floor).lower()}
        records.append(_summary_record(config.mode, lam_str, result.report, extra))
    return worst


def _run_validate_mode(config, records):
    for lam in config.lambdas:
        lam_str = frac_to_decimal(lam)
        worst = exact_model_null(
            lam,
            dim_max=config.options.dim_max,
            displacements=config.options.displacements,
            precision_bits=config.options.precision_bits,
        )
        with workprec(config.options.precision_bits):
            log = mpmath.log10(worst) if worst != 0 else mpmath.mpf("-inf")
        records.append({
            "kind": "summary",
            "mode": "validate",
            "lambda": lam_str,
            "d": "",
            "D": str(config.options.dim_max),
            "re": _num(worst),
            "im": "",
            "residual_log10": _num(log, 8),
            "iterations": "",
            "precision_bits": str(config.options.precision_bits),
            "certified_digits": "",
        })
    return 0


def _solve_seeds(config, grid):
    opts = config.options
    if config.seed is not None:
        with workprec(opts.precision_bits):
            re, im = config.seed
            if im == 0:
                return [to_mpf(re)]
            return [to_mpc(re, im)]
    # Scan at two consecutive dimensions: a root of even multiplicity
    # produces no sign change, and exact closed-form levels appear with
    # dimension-dependent multiplicity, so parity alternates with D.
    scan_dim = max(4, opts.dim_min)
    seeds = []
    with workprec(opts.precision_bits):
        for dim in (scan_dim, scan_dim + 1):
            problem = HankelProblem(dimension=dim, displacement=opts.displacements[0])
            if len(config.region) == 1:
                region = config.region[0]
            else:
                region = config.region
            for cand in seed_scan(grid, problem, region, config.grid_points,
                                  precision_bits=opts.precision_bits):
                if all(abs(cand.value - s) > mpmath.mpf("1e-3") * max(1, abs(s))
                       for s in seeds):
                    seeds.append(cand.value)
    return sorted(seeds, key=lambda s: (mpmath.re(s), mpmath.im(s)))


def _run_solve_mode(config, records):
    grid = build_qgrid(config.potential)
    opts = config.options
    worst = 0
    seeds = _solve_seeds(config, grid)
    if not seeds:
        return 2
    for seed in seeds:
        sequences = {}
        try:
            for d in opts.displacements:
                sequences[d] = run_sequence(grid, d, opts, seed)
        except PrecisionExhaustedError:
            worst = max(worst, 4)
            continue
        except NonConvergenceError as exc:
            worst = max(worst, 2)
            if exc.partial is not None and exc.partial.entries:
                for entry in exc.partial.entries:
                    records.append(_entry_record("solve", "", exc.partial, entry))
            continue
        for d in sorted(sequences):
            for entry in sequences[d].entries:
                records.append(_entry_record("solve", "", sequences[d], entry))
        views = sorted(
            sequences.values(),
            key=lambda s: s.stability_digits(10**6),
            reverse=True,
        )
        report = estimate_converged(views[0], views[0] if len(views) == 1 else views[1])
        records.append(_summary_record("solve", "", report))
    return worst


def _run_scan_mode(config, records):
    grid = build_qgrid(config.potential)
    opts = config.options
    problem = HankelProblem(dimension=max(4, opts.dim_min),
                            displacement=opts.displacements[0])
    region = config.region[0] if len(config.region) == 1 else config.region
    candidates = seed_scan(grid, problem, region, config.grid_points,
                           precision_bits=opts.precision_bits)
    from .numbers import imag_part, real_part

    with workprec(opts.precision_bits):
        for cand in candidates:
            records.append({
                "kind": "candidate",
                "mode": "scan",
                "lambda": "",
                "d": str(problem.displacement),
                "D": str(problem.dimension),
                "re": _num(real_part(cand.value)),
                "im": _num(imag_part(cand.value)),
                "residual_log10": _num(cand.residual_log10, 8),
                "iterations": "",
                "precision_bits": str(opts.precision_bits),
                "certified_digits": "",
            })
    return 0


def _emit_csv(records, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([rec.get(col, "") for col in CSV_COLUMNS])


def _emit_jsonl(records, stream):
    for rec in records:
        stream.write(json.dumps(rec, sort_keys=False) + "\n")


def _emit_table(records, stream):
    widths = {col: len(col) for col in CSV_COLUMNS}
    rows = []
    for rec in records:
        row = [rec.get(col, "") for col in CSV_COLUMNS]
        rows.append(row)
        for col, cell in zip(CSV_COLUMNS, row):
            widths[col] = max(widths[col], len(cell))
    header = "  ".join(col.ljust(widths[col]) for col in CSV_COLUMNS)
    stream.write(header.rstrip() + "\n")
    stream.write("-" * len(header) + "\n")
    for row in rows:
        line = "  ".join(cell.ljust(widths[col]) for col, cell in zip(CSV_COLUMNS, row))
        stream.write(line.rstrip() + "\n")


def run(config, stream=None):
    """Execute a RunConfig; returns the exit code."""
    records = []
    if config.mode in ("shift", "resonance"):
        code = _run_model_mode(config, records)
    elif config.mode == "validate":
        code = _run_validate_mode(config, records)
    elif config.mode == "solve":
        code = _run_solve_mode(config, records)
    else:
        code = _run_scan_mode(config, records)

    buffer = io.StringIO()
    if config.output_format == "csv":
        _emit_csv(records, buffer)
    elif config.output_format == "json-lines":
        _emit_jsonl(records, buffer)
    else:
        _emit_table(records, buffer)
    text = buffer.getvalue()
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    elif stream is not None:
        stream.write(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None):
    try:
        config, dump = parse_config(argv if argv is not None else sys.argv[1:])
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    if dump:
        print(dump_config(config))
        return 0
    try:
        return run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except PrecisionExhaustedError as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return 4
    except RicpadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
