"""Command-line entry point: ``elasticsurf {simulate,corrupt,image,verify,render}``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical failure.  Configuration precedence is defaults < config
file < ``ELASTICSURF_*`` environment variables < ``--set key=value``.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import forward, formats, imaging, kernels, verify
from .formats import ConfigError, RunConfig

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

SUITES = ("funk-hecke", "im-gamma", "kernels", "stress-limit", "hk-identity", "navier",
          "reciprocity")
DEFAULT_SUITES = ("funk-hecke", "im-gamma", "kernels", "hk-identity", "navier")


class UsageError(Exception):
    pass


def _threads(value: int) -> int:
    if value < 0:
        raise UsageError("--threads must be >= 0")
    return value or (os.cpu_count() or 1)


def _out(args, cfg: RunConfig, key: str) -> str:
    path = args.out or cfg.get(key)
    if not path:
        raise UsageError(f"no output path: pass --out or set {key}")
    return path


def _input(args, cfg: RunConfig, key: str) -> str:
    path = getattr(args, "input", None) or cfg.get(key)
    if not path:
        raise UsageError(f"no input path: pass it on the command line or set {key}")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    surface = cfg.surface()
    medium = cfg.medium()
    params = cfg.stress(medium)
    geometry = cfg.geometry()
    bie = cfg.bie(medium, geometry)
    out = _out(args, cfg, "paths.dataset")
    ds = forward.generate_dataset(surface, geometry, medium, params, bie,
                                  threads=_threads(args.threads))
    spec = {k: cfg.get(k) for k in ("surface.offset", "surface.terms") if cfg.get(k)}
    if spec:
        ds.extra["_surface_spec"] = spec
    formats.write_dataset(out, ds)
    return EXIT_OK


def cmd_corrupt(args, cfg: RunConfig) -> int:
    src = _input(args, cfg, "paths.dataset")
    out = _out(args, cfg, "paths.noisy")
    delta = args.delta if args.delta is not None else cfg.number("noise.delta")
    seed = args.seed if args.seed is not None else cfg.number("noise.seed", int)
    if not (np.isfinite(delta) and delta >= 0):
        raise ConfigError(f"noise level must be a nonnegative number, got {delta}")
    ds = formats.read_dataset(src)
    noisy = forward.add_noise(ds, delta, seed)
    formats.write_dataset(out, noisy)
    return EXIT_OK


def _check_consistent(ds: forward.CauchyDataSet, cfg: RunConfig) -> None:
    explicit = [k for k in ("geometry.H", "geometry.A", "geometry.N") if k in cfg.explicit]
    if explicit:
        geo = cfg.geometry()
        if (geo.H, geo.A, geo.N) != (ds.geometry.H, ds.geometry.A, ds.geometry.N):
            raise ConfigError(f"configured geometry {geo} does not match the dataset "
                              f"{ds.geometry}")


def cmd_image(args, cfg: RunConfig) -> int:
    ds = formats.read_dataset(_input(args, cfg, "paths.dataset"))
    _check_consistent(ds, cfg)
    grid = cfg.grid()
    config = cfg.imaging()
    out = _out(args, cfg, "paths.image")
    if grid.x2_max >= ds.geometry.H:
        raise ConfigError("sampling grid must lie strictly below the measurement line")
    image = imaging.compute_image(ds, ds.medium, ds.params, grid, config,
                                  threads=_threads(args.threads))
    ridge_path = args.ridge or cfg.get("paths.ridge") or _ridge_path(out)
    formats.atomic_write(out, formats.format_image(image))
    formats.atomic_write(ridge_path, formats.format_ridge(imaging.extract_ridge(image)))
    return EXIT_OK


def _ridge_path(image_path: str) -> str:
    root, ext = os.path.splitext(image_path)
    return f"{root}_ridge{ext or '.csv'}"


def run_suite(name: str, cfg: RunConfig) -> list:
    """Run one named check group with parameters from ``verify.*`` keys."""
    medium = cfg.medium()
    params = cfg.stress(medium)
    ks = medium.k_s
    lam = medium.shear_wavelength

    def tol(default):
        return cfg.number(f"verify.{name}.tol", default=default)

    if name == "funk-hecke":
        M = cfg.number("verify.funk-hecke.M", int, default=256)
        return [verify.check_funk_hecke(ks, (0.0, 0.0), (kr / ks, 0.0), M, tol(1e-8))
                for kr in (0.0, 1.0, 10.0, 40.0)]
    if name == "im-gamma":
        rng = np.random.default_rng(cfg.number("verify.im-gamma.seed", int, default=0))
        reports = []
        for _ in range(cfg.number("verify.im-gamma.pairs", int, default=100)):
            x = rng.uniform(-1.0, 1.0, 2)
            d = rng.standard_normal(2)
            d *= rng.uniform(0.0, 40.0 / ks) / np.hypot(*d)
            reports.append(verify.check_im_gamma(medium, x, x + d, 256, tol(1e-8)))
        return [max(reports, key=lambda r: r.abs_error)]
    if name == "kernels":
        out = []
        for s in (0.1, 1.0, 10.0):
            y = (0.3 + 0.6 * s * lam, 0.1 + 0.8 * s * lam)
            out.append(verify.check_pi1_fd(medium, params, (0.3, 0.1), y, (0.6, 0.8),
                                           tolerance=tol(1e-7)))
        out.append(verify.check_stress_limit_mean(medium, params, (0.1, 0.2), (1.0, 0.5),
                                                  tolerance=tol(1e-4)))
        return out
    if name == "stress-limit":
        return [verify.check_stress_limit(medium, params, (0.1, 0.2), (1.0, 0.5),
                                          tolerance=tol(1e-4))]
    if name == "hk-identity":
        H = cfg.number("verify.hk-identity.H", default=2.0)
        A = cfg.number("verify.hk-identity.A", default=20.0)
        n_quad = cfg.number("verify.hk-identity.n_quad", int, default=4096)
        return [verify.check_hk_identity(medium, params, (0.0, H - 1.0), (0.0, H - 1.0),
                                         H, A, n_quad, tolerance=tol(0.1))]
    if name == "navier":
        y = np.zeros(2)
        x = np.array([0.6, 0.8]) * lam
        field = lambda p: kernels.gamma(medium, p, y)[:, 0]
        return [verify.check_navier_residual(field, medium, x, 1e-4 / ks, tol(1e-6))]
    if name == "reciprocity":
        surface = cfg.surface() if cfg.get("surface.name") else forward.example3()
        geometry = cfg.geometry()
        bie = cfg.bie(medium, geometry)
        return [verify.check_reciprocity(surface, medium, params, bie, (1.0, 2.0),
                                         (-2.0, 1.5), (1.0, 0.0), (0.0, 1.0), tol(1e-3))]
    raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")


def cmd_verify(args, cfg: RunConfig) -> int:
    raw = args.suite or cfg.get("verify.suite") or ",".join(DEFAULT_SUITES)
    names = [s.strip() for s in raw.split(",") if s.strip()]
    if raw.strip() == "all":
        names = list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown or not names:
        raise UsageError(f"unknown suite(s) {unknown}; choose from {', '.join(SUITES)}")
    reports = []
    for name in names:
        reports.extend(run_suite(name, cfg))
    for rep in reports:
        print(rep.line())
    out = args.out or cfg.get("paths.report")
    if out:
        formats.atomic_write(out, formats.format_reports(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def cmd_render(args, cfg: RunConfig) -> int:
    src = _input(args, cfg, "paths.image")
    out = _out(args, cfg, "paths.render")
    _, _, values = formats.read_image(src)
    if np.any(values < 0):
        raise ConfigError(f"{src}: image values must be nonnegative")
    formats.atomic_write(out, formats.format_pgm(values))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "corrupt": cmd_corrupt, "image": cmd_image,
            "verify": cmd_verify, "render": cmd_render}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default,
                        help="key = value configuration file")
    parser.add_argument("--threads", type=int, metavar="INT",
                        default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads (0 = one per CPU)")
    parser.add_argument("--out", metavar="PATH", default=default, help="output file")
    parser.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        default=argparse.SUPPRESS if suppress else [],
                        help="override a configuration key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elasticsurf",
        description="Elastic rough-surface scattering: synthetic data, imaging, verification.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="solve the forward problem and write a dataset")
    _global_flags(p, suppress=True)

    p = sub.add_parser("corrupt", help="add complex Gaussian noise to a dataset")
    _global_flags(p, suppress=True)
    p.add_argument("input", nargs="?", help="dataset to corrupt")
    p.add_argument("--delta", type=float, help="noise level")
    p.add_argument("--seed", type=int, help="random seed")

    p = sub.add_parser("image", help="compute the indicator image and its ridge")
    _global_flags(p, suppress=True)
    p.add_argument("input", nargs="?", help="dataset to image")
    p.add_argument("--ridge", metavar="PATH", help="ridge CSV (default: <out>_ridge.csv)")

    p = sub.add_parser("verify", help="run identity checks")
    _global_flags(p, suppress=True)
    p.add_argument("--suite", help=f"comma-separated subset of {', '.join(SUITES)} or 'all'")

    p = sub.add_parser("render", help="render an image CSV as an ASCII PGM")
    _global_flags(p, suppress=True)
    p.add_argument("input", nargs="?", help="image CSV")
    return parser


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def main(argv: Optional[Sequence[str]] = None, environ=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env = os.environ if environ is None else environ
    try:
        cfg = RunConfig.load(args.config, env, _parse_overrides(args.overrides))
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (forward.SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
