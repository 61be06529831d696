"""Command-line front end.

Every subcommand validates its whole configuration before computing.  CSV
artifacts open with ``#`` comment lines carrying the tool version, the
resolved configuration and a SHA-256 of the input files, and contain no
timestamps, so identical invocations produce identical files.

Exit codes: 0 success, 1 failed self-check, 2 usage error, 3 infeasible
model, 4 I/O or file-format error.  Errors print one line on stderr of the
form ``error: <kind>: <reason>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import sys
import time
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .conditional import cond_prob, cond_prob_oracle, sierpinski_matrix, write_sierpinski_csv
from .detector import (
    AcquisitionParams,
    CalibrationCurve,
    DetectorArrayModel,
    SourceModel,
    classical_min_entropy,
    equivalent_efficiency,
    generation_rate,
)
from .entropy import (
    SWEEP_HEADER,
    EntropyReport,
    TruncationPolicy,
    classical_report,
    conditional_min_entropy,
    guessing_probability,
    no_source_info_entropy,
    sweep_mu,
    write_sweep_csv,
)
from .errors import FrameFormatError, InfeasibleModelError, ParameterError, QRNGError
from .extractor import DEFAULT_EPS_SEC, pack_output, read_seed_file, seed_from_hex, toeplitz_extract
from .frames import read_frames, write_frames
from .simulator import SimSeed, empirical_bit_prob, empirical_guess_rate, simulate_frames

__all__ = ["main", "build_parser"]

PROG = "qrng-minentropy"
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4
MODE_ALIASES = {
    "conditional": "with-photon-info",
    "with-photon-info": "with-photon-info",
    "no-photon-info": "no-photon-info",
    "classical": "classical",
}
# flags whose value is an input file hashed into artifact headers
_INPUT_FILES = ("calibration", "input", "side_info_in", "seed_file")
# not echoed: they cannot change any output
_NOT_ECHOED = {"command", "config", "threads"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt_prob(x: float) -> str:
    return f"{x:.17g}"


def fmt_h(x: float) -> str:
    return f"{x:.12g}"


# -- argument definitions -----------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; explicit flags win")
    p.add_argument("--threads", type=int, help="worker threads (default: $QRNG_THREADS, else CPU count)")


def _model_args(p: argparse.ArgumentParser, eta_sources: bool = True) -> None:
    p.add_argument("--pixels", type=int, help="number of pixels M")
    p.add_argument("--mu-px", type=float, help="mean photons per pixel per frame")
    p.add_argument("--eta", type=float, help="common equivalent efficiency")
    if eta_sources:
        p.add_argument("--eta-vector", help="comma-separated per-pixel efficiencies")
        p.add_argument("--calibration", help="CSV with columns mu,eta")
    p.add_argument("--source", choices=("poisson", "fixed"), default="poisson")
    p.add_argument("--photons", type=int, help="photon number for --source fixed")
    p.add_argument("--rate", type=float, default=49e3, help="frame rate in Hz")
    p.add_argument("--integration-time", type=float, default=200e-9, help="gate length in seconds")


def _policy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-n", type=float, default=1e-15, help="photon-number tail bound")
    p.add_argument("--eps-s", type=float, default=1e-15, help="status tail bound")
    p.add_argument("--hard-n-max", type=int, help="largest photon number ever summed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Min-entropy certification for photon-counting QRNG arrays.")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("entropy", help="single entropy evaluation")
    _common(p)
    _model_args(p)
    _policy_args(p)
    p.add_argument("--mode", choices=sorted(MODE_ALIASES), default="conditional")
    p.add_argument("--p1", type=float, help="measured click probability (sets eta, or the classical entropy)")
    p.add_argument("--csv", help="also write the report as CSV")

    p = sub.add_parser("sweep", help="entropy versus mean photon number")
    _common(p)
    _model_args(p)
    _policy_args(p)
    p.add_argument("--mode", choices=sorted(MODE_ALIASES), default="conditional")
    p.add_argument("--mu-grid", help="comma-separated mu_px values")
    p.add_argument("--mu-min", type=float)
    p.add_argument("--mu-max", type=float)
    p.add_argument("--mu-step", type=float)
    p.add_argument("--output", help="CSV path")

    p = sub.add_parser("calibrate", help="equivalent efficiency from measured P1")
    _common(p)
    p.add_argument("--input", help="CSV with columns mu,p1")
    p.add_argument("--output", help="calibration CSV with columns mu,eta")

    p = sub.add_parser("simulate", help="write simulated frames")
    _common(p)
    _model_args(p)
    p.add_argument("--frames", type=int, help="number of frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--output", help="frame file")
    p.add_argument("--side-info", help="side-information file")

    p = sub.add_parser("sierpinski", help="P(x|n,s) matrix as CSV")
    _common(p)
    p.add_argument("--pixels", type=int)
    p.add_argument("--photons", type=int)
    p.add_argument("--output", help="CSV path")

    p = sub.add_parser("oracle-check", help="closed form against exhaustive enumeration")
    _common(p)
    p.add_argument("--max-pixels", type=int, default=5)
    p.add_argument("--max-photons", type=int, default=6)
    p.add_argument("--numeric", choices=("exact", "log"), default="exact")

    p = sub.add_parser("guess-sim", help="empirical guessing rate versus theory")
    _common(p)
    _model_args(p, eta_sources=False)
    _policy_args(p)
    p.add_argument("--trials", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream-id", type=int, default=0)

    p = sub.add_parser("extract", help="Toeplitz extraction of a frame file")
    _common(p)
    _model_args(p)
    _policy_args(p)
    p.add_argument("--input", help="frame file")
    p.add_argument("--min-entropy", type=float, help="certified bits per frame")
    p.add_argument("--eps-sec", type=float, default=DEFAULT_EPS_SEC)
    p.add_argument("--seed-file", help="raw seed bytes, MSB first")
    p.add_argument("--seed-hex", help="seed as hex digits")
    p.add_argument("--output", help="output bytes, MSB first")

    p = sub.add_parser("bench", help="time the adversarial entropy sum")
    _common(p)
    p.add_argument("--pixels", type=int, default=256)
    p.add_argument("--mu-px", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=1e-15)
    p.add_argument("--repeat", type=int, default=1)
    return parser


# -- configuration --------------------------------------------------------------


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise UsageError(f"unknown subcommand {name}")


def _read_config(path: str, sp: argparse.ArgumentParser) -> dict:
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for this subcommand")
        action = actions[dest]
        try:
            converted = action.type(value) if action.type else value
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
        if action.choices is not None and converted not in action.choices:
            raise UsageError(f"{path}:{lineno}: {key} must be one of {sorted(action.choices)}")
        values[dest] = converted
    return values


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a subcommand is required")
    if ns.config:
        sp = _subparser(parser, ns.command)
        sp.set_defaults(**_read_config(ns.config, sp))
        ns = parser.parse_args(argv)
    return ns


def _require(ns, *names: str) -> None:
    missing = [n for n in names if getattr(ns, n, None) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _threads(ns) -> int:
    if ns.threads is not None:
        threads = ns.threads
    else:
        env = os.environ.get("QRNG_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise UsageError(f"QRNG_THREADS={env!r} is not an integer") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise UsageError("thread count must be at least 1")
    return threads


def _header(ns) -> list[str]:
    items = {k: v for k, v in vars(ns).items() if k not in _NOT_ECHOED}
    config = " ".join(f"{k}={v}" for k, v in sorted(items.items()))
    digest = hashlib.sha256()
    hashed = []
    for name in _INPUT_FILES:
        path = getattr(ns, name, None)
        if path:
            digest.update(name.encode() + b"\0" + Path(path).read_bytes())
            hashed.append(name)
    return [
        f"tool={PROG} {__version__}",
        f"command={ns.command}",
        f"config {config}",
        f"inputs_sha256={digest.hexdigest() if hashed else 'none'}",
    ]


# -- model construction -----------------------------------------------------------


def _acquisition(ns) -> AcquisitionParams:
    return AcquisitionParams(integration_time=ns.integration_time, frame_rate=ns.rate)


def _source(ns, M: int) -> SourceModel:
    if ns.source == "fixed":
        _require(ns, "photons")
        return SourceModel.fixed(ns.photons)
    _require(ns, "mu_px")
    return SourceModel.uniform_illumination(ns.mu_px, M)


def _efficiency(ns, M: int, mu_px: float | None):
    given = [n for n in ("eta", "eta_vector", "calibration", "p1") if getattr(ns, n, None) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --eta, --eta-vector, --calibration, --p1")
    if ns.eta is not None:
        return ns.eta
    if getattr(ns, "eta_vector", None) is not None:
        try:
            return tuple(float(v) for v in ns.eta_vector.split(","))
        except ValueError:
            raise UsageError("--eta-vector must be comma-separated numbers") from None
    if mu_px is None:
        raise UsageError("--calibration and --p1 need --mu-px")
    if getattr(ns, "calibration", None) is not None:
        return CalibrationCurve.read(ns.calibration)(mu_px)
    return equivalent_efficiency(ns.p1, mu_px)


def _model(ns) -> tuple[DetectorArrayModel, SourceModel]:
    _require(ns, "pixels")
    M = ns.pixels
    if M < 1:
        raise UsageError("--pixels must be at least 1")
    source = _source(ns, M)
    mu_px = ns.mu_px if ns.source == "poisson" else None
    model = DetectorArrayModel(M, _efficiency(ns, M, mu_px), _acquisition(ns))
    return model, source


def _policy(ns) -> TruncationPolicy:
    return TruncationPolicy(ns.eps_n, ns.eps_s, ns.hard_n_max)


# -- subcommands ---------------------------------------------------------------------


def _print_report(rep: EntropyReport, out) -> None:
    rows = [
        ("pixels", str(rep.pixels)),
        ("mu_px", fmt_prob(rep.mu_px)),
        ("eta", fmt_prob(rep.eta)),
        ("mode", rep.mode),
        ("h_classical", fmt_h(rep.h_classical)),
        ("h_conditional", fmt_h(rep.h_conditional)),
        ("p_guess", fmt_prob(rep.p_guess)),
        ("truncation_bound", fmt_prob(rep.truncation_bound)),
        ("n_range", f"{rep.n_range[0]}..{rep.n_range[1]}"),
        ("r_range", f"{rep.r_range[0]}..{rep.r_range[1]}"),
        ("secure_rate_bps", fmt_h(rep.secure_rate)),
        ("secure_rate_mbps", fmt_h(rep.secure_rate / 1e6)),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}", file=out)


def _classical_from_p1(ns) -> EntropyReport:
    _require(ns, "pixels")
    if ns.pixels < 1:
        raise UsageError("--pixels must be at least 1")
    acq = _acquisition(ns)
    h = classical_min_entropy(1.0 - ns.p1, ns.p1, ns.pixels)
    return EntropyReport(
        pixels=ns.pixels,
        mu_px=ns.mu_px if ns.mu_px is not None else math.nan,
        eta=math.nan,
        mode="classical",
        h_classical=h,
        h_conditional=h,
        p_guess=2.0**-h,
        truncation_bound=0.0,
        n_range=(0, 0),
        r_range=(0, 0),
        secure_rate=generation_rate(h, acq),
    )


def cmd_entropy(ns, out) -> int:
    mode = MODE_ALIASES[ns.mode]
    if mode == "classical" and ns.p1 is not None and ns.mu_px is None:
        others = [n for n in ("eta", "eta_vector", "calibration") if getattr(ns, n) is not None]
        if others:
            raise UsageError("--p1 already fixes the classical entropy")
        rep = _classical_from_p1(ns)
    else:
        model, source = _model(ns)
        policy = _policy(ns)
        threads = _threads(ns)
        if mode == "classical":
            rep = classical_report(model, source)
        elif mode == "no-photon-info":
            rep = no_source_info_entropy(model, source, policy)
        else:
            rep = conditional_min_entropy(model, source, policy, threads)
    _print_report(rep, out)
    if ns.csv:
        write_sweep_csv(ns.csv, [rep], _header(ns))
    return EXIT_OK


def _grid(ns) -> list[float]:
    if ns.mu_grid is not None:
        if any(getattr(ns, n) is not None for n in ("mu_min", "mu_max", "mu_step")):
            raise UsageError("use either --mu-grid or --mu-min/--mu-max/--mu-step")
        try:
            return [float(v) for v in ns.mu_grid.split(",")]
        except ValueError:
            raise UsageError("--mu-grid must be comma-separated numbers") from None
    _require(ns, "mu_min", "mu_max", "mu_step")
    if ns.mu_step <= 0 or ns.mu_max < ns.mu_min:
        raise UsageError("need mu_step > 0 and mu_max >= mu_min")
    count = int(math.floor((ns.mu_max - ns.mu_min) / ns.mu_step + 1e-9)) + 1
    return [ns.mu_min + i * ns.mu_step for i in range(count)]


def cmd_sweep(ns, out) -> int:
    _require(ns, "pixels", "output")
    if ns.source != "poisson":
        raise UsageError("sweep varies mu_px and needs --source poisson")
    grid = _grid(ns)
    given = [n for n in ("eta", "eta_vector", "calibration") if getattr(ns, n) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --eta, --eta-vector, --calibration")
    calibration = CalibrationCurve.read(ns.calibration) if ns.calibration else None
    # with a calibration curve the efficiency is replaced at every grid point
    eff = 1.0 if calibration is not None else _efficiency(ns, ns.pixels, None)
    model = DetectorArrayModel(ns.pixels, eff, _acquisition(ns))
    header = _header(ns)
    reports = sweep_mu(grid, model, _policy(ns), calibration, MODE_ALIASES[ns.mode], _threads(ns))
    write_sweep_csv(ns.output, reports, header)
    best = max(reports, key=lambda r: r.secure_rate)
    print(f"points  {len(reports)}", file=out)
    print(f"best_mu_px  {fmt_prob(best.mu_px)}", file=out)
    print(f"best_h_conditional  {fmt_h(best.h_conditional)}", file=out)
    print(f"best_secure_rate_bps  {fmt_h(best.secure_rate)}", file=out)
    return EXIT_OK


def cmd_calibrate(ns, out) -> int:
    _require(ns, "input", "output")
    with open(ns.input, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["mu", "p1"]:
        raise UsageError(f"{ns.input}: expected header 'mu,p1'")
    try:
        pairs = [(float(a), float(b)) for a, b in rows[1:]]
    except ValueError:
        raise UsageError(f"{ns.input}: malformed row") from None
    header = _header(ns)
    etas = [equivalent_efficiency(p1, mu) for mu, p1 in pairs]
    curve = CalibrationCurve([m for m, _ in pairs], etas)
    curve.write(ns.output, header)
    for (mu, p1), eta in zip(pairs, etas):
        print(f"{fmt_prob(mu)}  {fmt_prob(p1)}  {fmt_prob(eta)}", file=out)
    return EXIT_OK


def cmd_simulate(ns, out) -> int:
    _require(ns, "frames", "output")
    model, source = _model(ns)
    seed = SimSeed(ns.seed, ns.stream_id)
    batch = simulate_frames(model, source, ns.frames, seed, ns.side_info is not None, _threads(ns))
    write_frames(batch, ns.output, ns.side_info)
    p1, _ = empirical_bit_prob(batch)
    print(f"frames  {len(batch)}", file=out)
    print(f"pixels  {batch.pixels}", file=out)
    print(f"mean_p1  {fmt_prob(float(p1.mean()))}", file=out)
    return EXIT_OK


def cmd_sierpinski(ns, out) -> int:
    _require(ns, "pixels", "photons", "output")
    matrix = sierpinski_matrix(ns.pixels, ns.photons)
    write_sierpinski_csv(ns.output, matrix, _header(ns))
    print(f"rows  {matrix.shape[0]}", file=out)
    return EXIT_OK


def cmd_oracle_check(ns, out) -> int:
    if ns.max_pixels < 1 or ns.max_photons < 0:
        raise UsageError("need --max-pixels >= 1 and --max-photons >= 0")
    exact = ns.numeric == "exact"
    worst = Fraction(0) if exact else 0.0
    pairs = 0
    for M in range(1, ns.max_pixels + 1):
        for n in range(ns.max_photons + 1):
            for x in product((0, 1), repeat=M):
                for s in product((0, 1), repeat=M):
                    ref = cond_prob_oracle(x, n, s)
                    got = cond_prob(x, n, s, exact=exact)
                    if exact:
                        dev = abs(got - ref)
                    else:
                        dev = 0.0 if ref == 0 and got == 0 else abs(got - float(ref)) / float(ref or 1)
                    worst = max(worst, dev)
                    pairs += 1
    ok = worst == 0 if exact else worst <= 1e-12
    print(f"pairs_checked  {pairs}", file=out)
    print(f"max_deviation  {worst if exact else fmt_prob(worst)}", file=out)
    print(f"status  {'ok' if ok else 'mismatch'}", file=out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_guess_sim(ns, out) -> int:
    _require(ns, "trials")
    model, source = _model(ns)
    policy = _policy(ns)
    threads = _threads(ns)
    freq, se = empirical_guess_rate(model, source, ns.trials, SimSeed(ns.seed, ns.stream_id), threads)
    p = guessing_probability(model, source, policy, threads)
    sigma = math.sqrt(p * (1 - p) / ns.trials)
    z = (freq - p) / sigma if sigma > 0 else (0.0 if freq == p else math.inf)
    print(f"trials  {ns.trials}", file=out)
    print(f"empirical_rate  {fmt_prob(freq)}", file=out)
    print(f"standard_error  {fmt_prob(se)}", file=out)
    print(f"p_guess_theory  {fmt_prob(p)}", file=out)
    print(f"z_score  {fmt_h(z)}", file=out)
    return EXIT_OK


def cmd_extract(ns, out) -> int:
    _require(ns, "input", "output")
    if (ns.seed_file is None) == (ns.seed_hex is None):
        raise UsageError("give exactly one of --seed-file, --seed-hex")
    batch = read_frames(ns.input, pixels=ns.pixels)
    if ns.min_entropy is not None:
        h = ns.min_entropy
    else:
        ns.pixels = batch.pixels
        model, source = _model(ns)
        h = conditional_min_entropy(model, source, _policy(ns), _threads(ns)).h_conditional
    seed = read_seed_file(ns.seed_file) if ns.seed_file else seed_from_hex(ns.seed_hex)
    bits = toeplitz_extract(batch, h, ns.eps_sec, seed)
    Path(ns.output).write_bytes(pack_output(bits))
    print(f"output_bits {bits.size}", file=sys.stderr)
    print(f"input_bits  {len(batch) * batch.pixels}", file=out)
    print(f"min_entropy_per_frame  {fmt_h(h)}", file=out)
    print(f"output_bits  {bits.size}", file=out)
    return EXIT_OK


def cmd_bench(ns, out) -> int:
    if ns.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    model = DetectorArrayModel(ns.pixels, ns.eta)
    source = SourceModel.uniform_illumination(ns.mu_px, ns.pixels)
    policy = TruncationPolicy(ns.eps, ns.eps)
    threads = _threads(ns)
    best = math.inf
    for _ in range(ns.repeat):
        start = time.perf_counter()
        rep = conditional_min_entropy(model, source, policy, threads)
        best = min(best, time.perf_counter() - start)
    terms = (rep.n_range[1] - rep.n_range[0] + 1) * (rep.r_range[1] - rep.r_range[0] + 1)
    print(f"pixels  {ns.pixels}", file=out)
    print(f"h_conditional  {fmt_h(rep.h_conditional)}", file=out)
    print(f"terms  {terms}", file=out)
    print(f"seconds  {best:.6f}", file=out)
    print(f"terms_per_second  {terms / best:.6g}", file=out)
    return EXIT_OK


COMMANDS = {
    "entropy": cmd_entropy,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "sierpinski": cmd_sierpinski,
    "oracle-check": cmd_oracle_check,
    "guess-sim": cmd_guess_sim,
    "extract": cmd_extract,
    "bench": cmd_bench,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    reason = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {kind}: {reason}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
        return COMMANDS[ns.command](ns, out)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except InfeasibleModelError as exc:
        return _fail("infeasible", exc, EXIT_INFEASIBLE)
    except (FrameFormatError, OSError) as exc:
        return _fail("io", exc, EXIT_IO)
    except (ParameterError, QRNGError) as exc:
        return _fail("usage", exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
