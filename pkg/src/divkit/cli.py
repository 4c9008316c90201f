"""``divkit`` command line.

Errors go to stderr as one line ``error: <code>: <message>``; exit status is
2 for usage, validation and I/O problems and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import DEFAULT_SEED, __version__
from ._validation import DivkitError, NumericalError, ValidationError
from .api import compute_divergence, spectral_divergence
from .densities import parse_family
from .estimators import runtime_csv, tabulate_runtime
from .generators import parse_generator
from .spd import LocationScaleParam, SpdMatrix, Spectrum
from .tabulate import HfTable, fit_rational, tabulate_hf

THREADS_ENV = "DIVKIT_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValidationError):
    pass


@dataclass
class CliConfig:
    """Parsed and validated flags. Matrices are already :class:`SpdMatrix`."""

    subcommand: str
    workers: int = 1
    family: str | None = None
    generator: str | None = None
    mu1: np.ndarray | None = None
    mu2: np.ndarray | None = None
    sigma1: SpdMatrix | None = None
    sigma2: SpdMatrix | None = None
    method: str | None = None
    n: int | None = None
    seed: int = DEFAULT_SEED
    grid: list[float] = field(default_factory=list)
    out: str | None = None


def parse_csv_floats(text: str, name: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ValidationError(f"{name}: expected comma-separated reals, got {text!r}") from None
    arr = np.array(vals)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite entry")
    return arr


def parse_matrix(text: str, name: str) -> SpdMatrix:
    """``"a,b;c,d"`` (rows separated by ``;``) into a validated SPD matrix."""
    rows = [r for r in text.strip().replace("\n", ";").split(";") if r.strip()]
    if not rows:
        raise ValidationError(f"{name}: empty matrix")
    mat = [parse_csv_floats(r, name) for r in rows]
    if any(len(r) != len(mat) for r in mat):
        raise ValidationError(f"{name}: matrix must be square, got {len(mat)} rows of lengths {[len(r) for r in mat]}")
    try:
        return SpdMatrix(np.array(mat))
    except NumericalError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid must look like a:b:n, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"malformed grid {text!r}") from None
    if count < 2 or not (np.isfinite(lo) and np.isfinite(hi)) or not 0 <= lo < hi:
        raise ValidationError(f"grid needs 0 <= a < b and n >= 2, got {text!r}")
    return [float(x) for x in np.linspace(lo, hi, count)]


def parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if seed < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return seed


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        value, source = flag, "--threads"
    else:
        env = os.environ.get(THREADS_ENV)
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        source = THREADS_ENV
    if value < 1:
        raise ValidationError(f"{source} must be >= 1, got {value}")
    return value


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".divkit-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# -- subcommands -------------------------------------------------------------


def _div_config(args, workers: int) -> CliConfig:
    if (args.sigma1 is None) == (args.sigma1_file is None):
        raise UsageError("give exactly one of --sigma1 and --sigma1-file")
    if args.sigma2 is not None and args.sigma2_file is not None:
        raise UsageError("give at most one of --sigma2 and --sigma2-file")
    s1_text = args.sigma1 if args.sigma1 is not None else _read_text(args.sigma1_file)
    sigma1 = parse_matrix(s1_text, "sigma1")
    s2_text = args.sigma2 if args.sigma2 is not None else (
        _read_text(args.sigma2_file) if args.sigma2_file is not None else None)
    sigma2 = parse_matrix(s2_text, "sigma2") if s2_text is not None else sigma1
    mu1, mu2 = parse_csv_floats(args.mu1, "mu1"), parse_csv_floats(args.mu2, "mu2")
    d = sigma1.dim
    for name, v in (("mu1", mu1), ("mu2", mu2)):
        if v.size != d:
            raise ValidationError(f"{name} has length {v.size}, sigma1 is {d}x{d}")
    if sigma2.dim != d:
        raise ValidationError(f"sigma2 is {sigma2.dim}x{sigma2.dim}, sigma1 is {d}x{d}")
    return CliConfig("div", workers, args.family, args.gen, mu1, mu2, sigma1, sigma2, args.method, args.n, args.seed)


def cmd_div(args, workers: int, out) -> None:
    cfg = _div_config(args, workers)
    gen = parse_generator(cfg.generator)
    rd = parse_family(cfg.family, cfg.sigma1.dim)
    p1 = LocationScaleParam(cfg.mu1, cfg.sigma1)
    p2 = LocationScaleParam(cfg.mu2, cfg.sigma2)
    est = compute_divergence(gen, rd, p1, p2, cfg.method, cfg.n, cfg.seed, cfg.workers)
    out.write(est.format() + "\n")


def _table_method(text: str) -> tuple[str, int | None]:
    if text == "quad":
        return "quad", None
    if text.startswith("mc:"):
        try:
            return "mc", int(text[3:])
        except ValueError:
            pass
    raise ValidationError(f"--method must be quad or mc:<N>, got {text!r}")


def cmd_hf_table(args, workers: int, out) -> None:
    grid = parse_grid(args.grid)
    method, n = _table_method(args.method)
    gen = parse_generator(args.gen)
    rd = parse_family(args.family, args.dim)
    table = tabulate_hf(gen, rd, grid, method, n, args.seed, workers)
    write_atomic(args.out, table.to_csv())
    out.write(f"wrote {len(table)} rows to {args.out}\n")


def cmd_fit(args, workers: int, out) -> None:
    table = HfTable.from_csv(_read_text(args.input))
    fit = fit_rational(table)
    out.write(fit.format() + "\n")
    if args.out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("a", "b", "max_rel_error", "u_min", "u_max"))
        w.writerow([repr(fit.a), repr(fit.b), repr(fit.max_rel_error), repr(fit.fit_domain[0]),
                    repr(fit.fit_domain[1])])
        write_atomic(args.out, buf.getvalue())


def cmd_spectral(args, workers: int, out) -> None:
    eigs = parse_csv_floats(args.eigs, "eigs")
    spectrum = Spectrum(tuple(eigs))
    gen = parse_generator(args.gen)
    rd = parse_family(args.family, spectrum.dim)
    est = spectral_divergence(gen, rd, spectrum, args.method, args.n, args.seed, workers)
    out.write(est.format() + "\n")


def cmd_bench(args, workers: int, out) -> None:
    dims = parse_csv_floats(args.dims, "dims")
    if np.any(dims != np.round(dims)) or np.any(dims < 1):
        raise ValidationError("--dims must be positive integers")
    gen = parse_generator(args.gen)
    rows = tabulate_runtime(gen, [int(d) for d in dims], args.n, args.seed, workers, args.repeats)
    text = runtime_csv(rows)
    if args.out is not None:
        write_atomic(args.out, text)
    else:
        out.write(text)


# -- parser ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1); results do not depend on it")
    common.add_argument("--seed", type=parse_seed, default=DEFAULT_SEED, help="RNG seed (default 0x5EED)")

    parser = _Parser(prog="divkit", description="f-divergences for location and scale families.")
    parser.add_argument("--version", action="version", version=f"divkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("div", parents=[common], help="divergence between two family members")
    p.add_argument("--family", required=True, help="normal, cauchy or student:<nu>")
    p.add_argument("--gen", required=True, help="generator name, e.g. kl, h2, alpha:0.5, chik:3")
    p.add_argument("--mu1", required=True, help="comma-separated location (use --mu1=-1,2 for negatives)")
    p.add_argument("--mu2", required=True)
    p.add_argument("--sigma1", help="scale matrix rows separated by ';', entries by ','")
    p.add_argument("--sigma1-file", help="file holding --sigma1 syntax (newlines also separate rows)")
    p.add_argument("--sigma2", help="defaults to sigma1")
    p.add_argument("--sigma2-file")
    p.add_argument("--method", required=True, choices=("closed", "quad", "mc"))
    p.add_argument("--n", type=int, default=1_000_000, help="Monte Carlo sample count")
    p.set_defaults(handler=cmd_div)

    p = sub.add_parser("hf-table", parents=[common], help="tabulate h_f(u) on a grid")
    p.add_argument("--gen", required=True)
    p.add_argument("--family", required=True)
    p.add_argument("--dim", type=int, default=1, help="dimension for non-normal families (default 1)")
    p.add_argument("--grid", required=True, help="a:b:n, n evenly spaced points from a to b")
    p.add_argument("--method", required=True, help="quad or mc:<N>")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_hf_table)

    p = sub.add_parser("fit-rational", parents=[common], help="fit a*u/(u+b) to an hf-table CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("spectral", parents=[common], help="scale-family divergence from a relative spectrum")
    p.add_argument("--gen", required=True)
    p.add_argument("--eigs", required=True, help="eigenvalues of Sigma2 Sigma1^{-1}, comma-separated")
    p.add_argument("--family", default="normal")
    p.add_argument("--method", default="auto", choices=("auto", "closed", "mc", "quad"))
    p.add_argument("--n", type=int, default=1_000_000)
    p.set_defaults(handler=cmd_spectral)

    p = sub.add_parser("bench-reduction", parents=[common], help="time full vs reduced Monte Carlo")
    p.add_argument("--gen", required=True)
    p.add_argument("--dims", required=True, help="comma-separated dimensions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--repeats", type=int, default=1, help="keep the fastest of this many runs")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_bench)
    return parser


def _one_line(msg: str) -> str:
    return " ".join(str(msg).split())


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        args = build_parser().parse_args(argv)
        workers = resolve_workers(args.threads)
        buf = io.StringIO()
        args.handler(args, workers, buf)
    except UsageError as exc:
        stderr.write(f"error: usage: {_one_line(exc)}\n")
        return EXIT_INVALID
    except ValidationError as exc:
        stderr.write(f"error: validation: {_one_line(exc)}\n")
        return EXIT_INVALID
    except NumericalError as exc:
        stderr.write(f"error: numerical: {_one_line(exc)}\n")
        return EXIT_NUMERICAL
    except DivkitError as exc:
        stderr.write(f"error: numerical: {_one_line(exc)}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        stderr.write(f"error: io: {_one_line(exc)}\n")
        return EXIT_INVALID
    # stdout only after success, so failures leave no partial output
    stdout.write(buf.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
