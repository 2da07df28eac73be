"""``conetomo`` command line: phantom, forward, invert, verify, export.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .axf import AxfError, read_field, write_field
from .fields import (ConeData, GaussianBlob, RadialField, TruncationWarning,
                     gaussian_mixture_phantom, make_ball_phantom, make_gaussian_phantom,
                     radial_grids)
from .forward import cone_transform, s_axis
from .inversion import invert_harmonic, invert_limited, invert_local_odd, invert_riesz
from .spectral import BandParams

log = logging.getLogger("conetomo")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or unusable input; reported on stderr with exit code 2."""


def _flag_line(args: argparse.Namespace) -> str:
    items = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return " ".join(f"{k}={items[k]}" for k in sorted(items))


# --------------------------------------------------------------------------
# phantom


def _center(text: str | None, n: int):
    if text is None:
        return None
    try:
        c = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"bad --center {text!r}") from None
    if len(c) != n - 1:
        raise UsageError(f"--center needs {n - 1} coordinate(s) for n={n}")
    return c


def cmd_phantom(args) -> int:
    nz = args.nz if args.nz is not None else args.nx // 2
    z_max = args.extent if args.z_max is None else args.z_max
    try:
        x_grid, z_grid = radial_grids(args.n, args.extent, args.nx, z_max, nz)
        c = _center(args.center, args.n)
        if args.kind == "gaussian":
            f = make_gaussian_phantom(args.n, c, args.width, x_grid=x_grid, z_grid=z_grid)
        else:
            f = make_ball_phantom(args.n, args.radius, args.smoothing, center_x=c,
                                  x_grid=x_grid, z_grid=z_grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_field(args.out, f)
    print(f"mass {f.integral():.12g}")
    print(f"peak {f.peak():.12g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# forward


def _trusted_cv(F: ConeData) -> analysis.CheckResult:
    # slices whose data have decayed at the u border
    return analysis.check_range_mass(F)


def cmd_forward(args) -> int:
    f = read_field(args.input, "radial")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        F = cone_transform(f, s_axis(args.s_max, args.n_s), n_theta=args.n_theta)
    write_field(args.out, F)
    res = _trusted_cv(F)
    if res.status == analysis.DEGENERATE:
        print("cv nan (degenerate: zero data)")
    else:
        print(f"cv {res.value:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# invert


def _band(text: str | None) -> BandParams | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--band expects a,b; got {text!r}")
    try:
        return BandParams(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise UsageError(f"--band {text}: {exc}") from None


def cmd_invert(args) -> int:
    band = _band(args.band)
    F = read_field(args.input, "cone")
    ref = read_field(args.reference, "radial") if args.reference else None
    target = None if ref is None else (ref.x_grid, ref.z_grid)
    restore = args.restore_dc == "on"
    if band is not None and args.method != "riesz":
        raise UsageError("--band is only available with --method riesz")
    try:
        if args.method == "riesz":
            if band is None:
                f = invert_riesz(F, args.k, target=target, restore_dc=restore,
                                 n_theta=args.n_theta)
            else:
                f = invert_limited(F, band, args.k, target=target, restore_dc=restore,
                                   n_theta=args.n_theta)
        elif args.k != 0:
            raise UsageError(f"--k applies to --method riesz only, got k={args.k}")
        elif args.method == "local":
            f = invert_local_odd(F, target=target, restore_dc=restore, n_theta=args.n_theta)
        else:
            if F.n == 3 and args.l_max < 0:
                raise UsageError("--l-max must be non-negative")
            f = invert_harmonic(F, args.l_max, target=target, restore_dc=restore)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_field(args.out, f)
    if ref is not None:
        den = ref.norm()
        err = (f - ref).norm() / den if den > 0 else f.norm()
        print(f"relative_l2_error {err:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


@dataclass(frozen=True)
class _Case:
    name: str
    f: RadialField


def _phantom_grids(n: int, nx: int | None, extent: float | None):
    if n == 2:
        nx, extent = nx or 256, extent or 8.0
    else:
        nx, extent = nx or 48, extent or 7.0
    return radial_grids(n, extent, nx, extent, nx // 2)


def _build_phantom(name: str, n: int, grids) -> RadialField:
    xg, zg = grids
    d = n - 1
    if name == "gaussian":
        return make_gaussian_phantom(n, x_grid=xg, z_grid=zg)
    if name == "shifted":
        return make_gaussian_phantom(n, (1.0,) * d, 0.8, x_grid=xg, z_grid=zg)
    if name == "mixture":
        blobs = [GaussianBlob((-1.0,) + (0.5,) * (d - 1), 0.7),
                 GaussianBlob((1.0,) + (0.0,) * (d - 1), 1.0, 0.5)]
        return gaussian_mixture_phantom(n, blobs, x_grid=xg, z_grid=zg)
    if name == "ball":
        return make_ball_phantom(n, 0.8, 0.1, x_grid=xg, z_grid=zg)
    raise UsageError(f"unknown phantom {name!r}; choose from {', '.join(PHANTOMS)}")


PHANTOMS = ("gaussian", "shifted", "mixture", "ball")
DEFAULT_PHANTOMS = ("gaussian", "shifted", "mixture")
CHECKS = ("isometry", "sobolev", "adjoint", "plancherel", "convolution", "range", "support")


def _row(checker, case, params, residual, threshold, passed):
    return analysis.ReportRow(checker, case, params, float(residual), threshold, bool(passed))


def _run_case(case: _Case, checks, s_max: float, n_s: int) -> list[analysis.ReportRow]:
    f, name, rows = case.f, case.name, []
    samples = None
    if "isometry" in checks or "sobolev" in checks:
        samples = analysis.sample_cone(f)
    for gamma in (0.0, 1.0):
        if "isometry" in checks:
            r = analysis.check_isometry(f, gamma, samples=samples)
            rows.append(_row("check_isometry", name, f"gamma={gamma:g}", r.value,
                             "|ratio-1|<=0.02", abs(r.value - 1) <= 0.02))
        if "sobolev" in checks:
            r = analysis.check_sobolev_estimate(f, gamma, samples=samples)
            rows.append(_row("check_sobolev_estimate", name, f"gamma={gamma:g}", r.value,
                             "margin>=0", r.value >= 0))
    if "adjoint" in checks:
        g = make_gaussian_phantom(f.n, (0.5,) * (f.n - 1), 0.7, x_grid=f.x_grid,
                                  z_grid=f.z_grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            r = analysis.check_adjoint(f, g)
        rows.append(_row("check_adjoint", name, "g=gaussian(c=0.5,w=0.7)", r.value, "<1e-3",
                         r.value < 1e-3))
    if "plancherel" in checks:
        r = analysis.check_plancherel(f, f, 0.0)
        rows.append(_row("check_plancherel", name, "g=f k=0", r.value, "<2e-2",
                         r.value < 2e-2))
    if "convolution" in checks:
        g = make_gaussian_phantom(f.n, width=0.5, x_grid=f.x_grid, z_grid=f.z_grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            r = analysis.check_convolution(f, g)
        rows.append(_row("check_convolution", name, "g=gaussian(w=0.5) s_max=2", r.value,
                         "<1e-2", r.value < 1e-2))
    if "range" in checks or "support" in checks:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            F = cone_transform(f, s_axis(s_max, n_s))
        if "range" in checks:
            rows.append(_range_row(name, F, s_max, n_s))
        if "support" in checks:
            v = analysis.check_support(f, F)
            rows.append(_row("check_support", name,
                             f"eps=1e-3 data_inside={v.data_inside} image_inside={v.image_inside}",
                             max(v.data_excess, v.image_excess), "sides agree", v.consistent))
    return rows


def _range_row(name, F, s_max, n_s):
    r = _trusted_cv(F)
    ok = r.status == analysis.DEGENERATE or r.value < 1e-3
    return _row("check_range_mass", name, f"s_max={s_max:g} n_s={n_s}", r.value, "<1e-3", ok)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_verify(args) -> int:
    if args.suite == "full":
        checks = set(CHECKS)
    else:
        checks = set(_split(args.suite))
        unknown = checks - set(CHECKS)
        if unknown:
            raise UsageError(f"unknown checks {sorted(unknown)}; choose from full or "
                             f"{', '.join(CHECKS)}")
    names = DEFAULT_PHANTOMS if args.phantom_set == "default" else _split(args.phantom_set)
    for nm in names:
        if nm not in PHANTOMS:
            raise UsageError(f"unknown phantom {nm!r}; choose from {', '.join(PHANTOMS)}")
    grids = _phantom_grids(args.n, args.nx, args.extent)
    rows = []
    if not names:
        log.warning("phantom set is empty; writing an empty report")
    for nm in names:
        case = _Case(nm, _build_phantom(nm, args.n, grids))
        log.info("verifying %s", nm)
        rows += _run_case(case, checks, args.s_max, args.n_s)
        if args.inject_range_violation:
            rows.append(_injected(case, args))
    header = [f"conetomo verify {_flag_line(args)}"]
    analysis.write_report(rows, args.out, header)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.checker} {r.phantom} {r.parameters} residual={r.residual:.6g} "
              f"threshold {r.threshold}")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed; report {args.out}")
    return EXIT_FAIL if failed else EXIT_OK


def _injected(case: _Case, args) -> analysis.ReportRow:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        F = cone_transform(case.f, s_axis(args.s_max, args.n_s))
    rng = np.random.default_rng(args.seed)
    scale = 1.0 + 0.05 * rng.standard_normal(F.values.shape[-1])
    bad = F.with_values(F.values * scale)
    return _range_row(f"{case.name}+slice-noise", bad, args.s_max, args.n_s)


# --------------------------------------------------------------------------
# export


def _parse_slices(specs, ndim: int) -> dict[int, int]:
    out = {}
    for spec in specs or ():
        key, sep, val = spec.partition("=")
        try:
            if not sep:
                raise ValueError
            ax, idx = int(key), int(val)
        except ValueError:
            raise UsageError(f"bad --slice {spec!r}; expected axis=index") from None
        if not 0 <= ax < ndim:
            raise UsageError(f"--slice axis {ax} out of range for {ndim} axes")
        if ax in out:
            raise UsageError(f"--slice axis {ax} given twice")
        out[ax] = idx
    return out


def _select(f, slices: dict[int, int]):
    vals = f.values
    keep = []
    index = []
    for ax in range(vals.ndim):
        if ax in slices:
            i = slices[ax]
            if not 0 <= i < vals.shape[ax]:
                raise UsageError(f"--slice {ax}={i}: index outside 0..{vals.shape[ax] - 1}")
            index.append(i)
        else:
            index.append(slice(None))
            keep.append(ax)
    if len(keep) != 2:
        raise UsageError(f"field has {vals.ndim} axes; use --slice to leave exactly 2")
    return vals[tuple(index)], [f.grid.nodes(a) for a in keep], keep


def to_pgm(img: np.ndarray) -> bytes:
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        q = np.rint((img - lo) / (hi - lo) * 65535.0)
    else:
        q = np.full(img.shape, 32768.0)
    rows, cols = img.shape
    head = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    return head + q.astype(">u2").tobytes()


def cmd_export(args) -> int:
    f = read_field(args.input, args.kind)
    img, coords, keep = _select(f, _parse_slices(args.slice, f.values.ndim))
    if args.format == "pgm":
        Path(args.out).write_bytes(to_pgm(img))
    else:
        lines = [f"# conetomo export {_flag_line(args)}",
                 f"# rows: axis {keep[0]}, columns: axis {keep[1]}"]
        lines.append(",".join([f"axis{keep[0]}\\axis{keep[1]}"]
                              + [repr(float(c)) for c in coords[1]]))
        for x, row in zip(coords[0], img):
            lines.append(",".join([repr(float(x))] + [repr(float(v)) for v in row]))
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.format} {img.shape[0]}x{img.shape[1]} to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conetomo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("phantom", help="write a radial phantom")
    ph.add_argument("--kind", choices=("gaussian", "ball"), default="gaussian")
    ph.add_argument("--n", type=int, choices=(2, 3), default=2)
    ph.add_argument("--nx", type=_positive_int, default=128)
    ph.add_argument("--nz", type=_positive_int, default=None, help="default nx/2")
    ph.add_argument("--extent", type=_positive_float, default=8.0,
                    help="x grid is [-extent, extent)")
    ph.add_argument("--z-max", type=_positive_float, default=None, help="default extent")
    ph.add_argument("--width", type=_positive_float, default=1.0)
    ph.add_argument("--radius", type=_positive_float, default=1.0)
    ph.add_argument("--smoothing", type=float, default=0.0)
    ph.add_argument("--center", default=None, help="comma-separated x centre")
    ph.add_argument("-o", "--out", required=True)
    ph.set_defaults(func=cmd_phantom)

    fw = sub.add_parser("forward", help="cone transform of a radial field")
    fw.add_argument("input")
    fw.add_argument("-o", "--out", required=True)
    fw.add_argument("--s-max", type=_positive_float, default=4.0)
    fw.add_argument("--n-s", type=_positive_int, default=64)
    fw.add_argument("--n-theta", type=_positive_int, default=None)
    fw.set_defaults(func=cmd_forward)

    iv = sub.add_parser("invert", help="reconstruct a radial field from cone data")
    iv.add_argument("input")
    iv.add_argument("-o", "--out", required=True)
    iv.add_argument("--method", choices=("riesz", "local", "harmonic"), default="riesz")
    iv.add_argument("--k", type=float, default=0.0)
    iv.add_argument("--band", default=None, help="a,b opening band")
    iv.add_argument("--l-max", type=int, default=16)
    iv.add_argument("--restore-dc", choices=("on", "off"), default="off")
    iv.add_argument("--n-theta", type=_positive_int, default=None)
    iv.add_argument("--reference", default=None,
                    help="radial field to compare against; also fixes the output grid")
    iv.set_defaults(func=cmd_invert)

    vf = sub.add_parser("verify", help="run identity checks and write a CSV report")
    vf.add_argument("--suite", default="full", help=f"full or a subset of {','.join(CHECKS)}")
    vf.add_argument("--phantom-set", default="default",
                    help=f"default or a comma list from {','.join(PHANTOMS)}; empty for none")
    vf.add_argument("--n", type=int, choices=(2, 3), default=2)
    vf.add_argument("--nx", type=_positive_int, default=None)
    vf.add_argument("--extent", type=_positive_float, default=None)
    vf.add_argument("--s-max", type=_positive_float, default=4.0)
    vf.add_argument("--n-s", type=_positive_int, default=64)
    vf.add_argument("--inject-range-violation", action="store_true",
                    help="add slice-noise copies of each dataset to the range check")
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("-o", "--out", default="verify_report.csv")
    vf.set_defaults(func=cmd_verify)

    ex = sub.add_parser("export", help="write a 2-D slice as PGM or CSV")
    ex.add_argument("input")
    ex.add_argument("-o", "--out", required=True)
    ex.add_argument("--format", choices=("pgm", "csv"), default="pgm")
    ex.add_argument("--slice", action="append", default=None, metavar="AXIS=INDEX")
    ex.add_argument("--kind", choices=("radial", "cone", "full"), default=None)
    ex.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, AxfError) as exc:
        print(f"conetomo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"conetomo {args.command}: error: {exc.strerror or exc}: "
              f"{exc.filename or ''}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
