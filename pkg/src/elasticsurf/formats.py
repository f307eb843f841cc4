"""Text file formats: run configuration, Cauchy datasets, images, ridges and PGM.

All floating-point text uses 17 significant digits so that 64-bit values
round-trip exactly.  Every writer goes through :func:`atomic_write`.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import forward
from .forward import BIEConfig, CauchyDataSet, MeasurementGeometry, SurfaceProfile
from .imaging import ImageGrid, ImagingConfig, SamplingGrid
from .kernels import ElasticMedium, StressParams

ENV_PREFIX = "ELASTICSURF_"
HEADER_END = "---"
DATASET_COLUMNS = ("source_index", "receiver_index", "polarization",
                   "us1_re", "us1_im", "us2_re", "us2_im",
                   "pus1_re", "pus1_im", "pus2_re", "pus2_im")
PGM_MAX = 65535
PGM_PER_LINE = 10   # keeps P2 lines under 70 characters


class ConfigError(ValueError):
    """Bad or inconsistent configuration or input file."""


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path``, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# key = value text
# ---------------------------------------------------------------------------

def parse_keyvalue(lines) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}: empty key")
        out[key] = value
    return out


def env_overrides(environ: Mapping[str, str]) -> dict:
    """``ELASTICSURF_MEDIUM__MU=2`` overrides ``medium.mu`` (``__`` separates levels)."""
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX) and len(name) > len(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            out[key] = value
    return out


DEFAULTS = {
    "medium.mu": "1", "medium.lambda": "1", "medium.omega": "15",
    "geometry.H": "2", "geometry.A": "20", "geometry.N": "100",
    "bie.eta_im": "0", "bie.nodes": "2048", "bie.taper": "0.2",
    "imaging.x1_min": "-6", "imaging.x1_max": "6", "imaging.x2_min": "0",
    "imaging.x2_max": "1.2", "imaging.nx1": "241", "imaging.nx2": "61",
    "imaging.M": "256", "imaging.normalize": "false",
    "noise.delta": "0", "noise.seed": "0",
}

# keys whose case and hyphens must survive the environment-variable mapping
_CANONICAL = {k.lower().replace("-", "_"): k
              for k in list(DEFAULTS) + ["bie.A_f", "bie.eta_re", "surface.name",
                                         "surface.offset", "surface.terms", "stress.mu_t",
                                         "verify.hk-identity.A", "verify.hk-identity.H"]}


def _canon(key: str) -> str:
    return _CANONICAL.get(key.lower().replace("-", "_"), key)


@dataclass
class RunConfig:
    """Merged configuration: defaults < file < environment < command line."""

    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    @classmethod
    def load(cls, path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
             overrides: Optional[Mapping[str, str]] = None) -> "RunConfig":
        merged = dict(DEFAULTS)
        given = {}
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    given.update({_canon(k): v for k, v in parse_keyvalue(fh).items()})
            except OSError as exc:
                raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if environ is not None:
            given.update({_canon(k): v for k, v in env_overrides(environ).items()})
        if overrides:
            given.update({_canon(k): v for k, v in overrides.items()})
        merged.update(given)
        return cls(merged, set(given))

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def number(self, key: str, kind=float, default=None):
        raw = self.values.get(key)
        if raw is None or raw == "":
            if default is None:
                raise ConfigError(f"missing config key {key!r}")
            return default
        try:
            value = kind(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None
        if kind is float and not math.isfinite(value):
            raise ConfigError(f"config key {key!r} must be finite")
        return value

    def flag(self, key: str) -> bool:
        raw = str(self.values.get(key, "false")).strip().lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")

    # typed views ---------------------------------------------------------

    def medium(self) -> ElasticMedium:
        return _validated(lambda: ElasticMedium(self.number("medium.mu"),
                                                self.number("medium.lambda"),
                                                self.number("medium.omega")))

    def stress(self, medium: ElasticMedium) -> StressParams:
        mu_t = self.values.get("stress.mu_t")
        return _validated(lambda: StressParams.for_medium(
            medium, None if mu_t in (None, "") else self.number("stress.mu_t")))

    def geometry(self) -> MeasurementGeometry:
        return _validated(lambda: MeasurementGeometry(self.number("geometry.H"),
                                                      self.number("geometry.A"),
                                                      self.number("geometry.N", int)))

    def surface(self) -> SurfaceProfile:
        name = self.values.get("surface.name", "").strip()
        if not name:
            raise ConfigError("missing config key 'surface.name'")
        return surface_from_spec(name, self.values.get("surface.offset"),
                                 self.values.get("surface.terms"))

    def bie(self, medium: ElasticMedium, geometry: MeasurementGeometry) -> BIEConfig:
        eta_re = self.number("bie.eta_re", default=medium.k_s)
        eta = complex(eta_re, self.number("bie.eta_im"))
        a_f = self.values.get("bie.A_f")
        return _validated(lambda: BIEConfig.default(
            medium, geometry, eta=eta, node_count=self.number("bie.nodes", int),
            taper_fraction=self.number("bie.taper"),
            halfwidth=None if a_f in (None, "") else self.number("bie.A_f")))

    def grid(self) -> SamplingGrid:
        return _validated(lambda: SamplingGrid(
            self.number("imaging.x1_min"), self.number("imaging.x1_max"),
            self.number("imaging.x2_min"), self.number("imaging.x2_max"),
            self.number("imaging.nx1", int), self.number("imaging.nx2", int)))

    def imaging(self) -> ImagingConfig:
        return _validated(lambda: ImagingConfig(self.number("imaging.M", int),
                                                self.flag("imaging.normalize")))


def _validated(build):
    try:
        return build()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def surface_from_spec(name: str, offset=None, terms=None) -> SurfaceProfile:
    """Named profile, or ``sines`` with ``offset`` and ``terms = a:k:p, a:k:p, ...``."""
    if name == "sines" or name == "flat":
        try:
            off = float(offset) if offset not in (None, "") else 0.0
            parsed = []
            if name == "sines" and terms:
                for item in str(terms).split(","):
                    a, k, p = (float(v) for v in item.split(":"))
                    parsed.append((a, k, p))
        except ValueError:
            raise ConfigError(f"malformed inline surface terms {terms!r}") from None
        return forward.sine_series(off, parsed, name=name)
    try:
        return forward.get_surface(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def dataset_header(ds: CauchyDataSet, surface_extra: Optional[Mapping[str, str]] = None) -> dict:
    head = {"format": "elasticsurf-cauchy-1", "surface.name": ds.surface_name}
    head.update(surface_extra or {})
    head.update({
        "medium.mu": fmt(ds.medium.mu), "medium.lambda": fmt(ds.medium.lam),
        "medium.omega": fmt(ds.medium.omega),
        "stress.mu_t": fmt(ds.params.mu_t), "stress.lambda_t": fmt(ds.params.lam_t),
        "geometry.H": fmt(ds.geometry.H), "geometry.A": fmt(ds.geometry.A),
        "geometry.N": str(ds.geometry.N),
    })
    if ds.bie is not None:
        eta = complex(ds.bie.eta)
        head.update({"bie.eta_re": fmt(eta.real), "bie.eta_im": fmt(eta.imag),
                     "bie.nodes": str(ds.bie.node_count), "bie.A_f": fmt(ds.bie.halfwidth),
                     "bie.taper": fmt(ds.bie.taper_fraction)})
    head["noise.delta"] = fmt(ds.noise_delta)
    head["noise.seed"] = "" if ds.noise_seed is None else str(ds.noise_seed)
    head.update({k: str(v) for k, v in ds.extra.items()})
    return head


def format_dataset(ds: CauchyDataSet) -> str:
    head = dataset_header(ds, ds.extra.get("_surface_spec"))
    lines = [f"{k} = {v}" for k, v in head.items() if not k.startswith("_")]
    lines.append(HEADER_END)
    lines.append(",".join(DATASET_COLUMNS))
    m = ds.geometry.count
    vals = np.concatenate([ds.us, ds.pus], axis=-1)          # (k, i, j, 4) complex
    flat = np.stack([vals.real, vals.imag], axis=-1).reshape(m, m, 2, 8)
    for k in range(m):
        for i in range(m):
            for j in range(2):
                nums = ",".join(fmt(v) for v in flat[k, i, j])
                lines.append(f"{k},{i},{j + 1},{nums}")
    return "\n".join(lines) + "\n"


def write_dataset(path: str, ds: CauchyDataSet) -> None:
    atomic_write(path, format_dataset(ds))


def read_dataset(path: str) -> CauchyDataSet:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path!r}: {exc}") from exc
    head_text, sep, body = text.partition("\n" + HEADER_END + "\n")
    if not sep:
        raise ConfigError(f"{path}: missing header terminator {HEADER_END!r}")
    head = parse_keyvalue(head_text.splitlines())
    cfg = RunConfig(dict(head))
    medium = cfg.medium()
    try:
        params = StressParams(float(head["stress.mu_t"]), float(head["stress.lambda_t"]))
        params.check(medium)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: bad stress parameters ({exc})") from None
    geometry = cfg.geometry()
    bie = cfg.bie(medium, geometry) if "bie.nodes" in head else None
    rows = body.splitlines()
    if not rows or rows[0].strip() != ",".join(DATASET_COLUMNS):
        raise ConfigError(f"{path}: unexpected column header")
    m = geometry.count
    try:
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:] if r.strip()])
    except ValueError:
        raise ConfigError(f"{path}: malformed numeric record") from None
    if data.shape != (2 * m * m, len(DATASET_COLUMNS)):
        raise ConfigError(f"{path}: expected {2 * m * m} records of {len(DATASET_COLUMNS)} "
                          f"columns, got shape {data.shape}")
    k, i, j = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2].astype(int) - 1
    if (k.min() < 0 or k.max() >= m or i.min() < 0 or i.max() >= m or j.min() < 0
            or j.max() > 1):
        raise ConfigError(f"{path}: record index out of range")
    vals = data[:, 3::2] + 1j * data[:, 4::2]
    us = np.full((m, m, 2, 2), np.nan, dtype=complex)
    pus = np.full((m, m, 2, 2), np.nan, dtype=complex)
    us[k, i, j] = vals[:, :2]
    pus[k, i, j] = vals[:, 2:]
    delta = float(head.get("noise.delta", "0") or 0)
    seed_raw = head.get("noise.seed", "")
    known = set(DEFAULTS) | {"format", "surface.name", "surface.offset", "surface.terms",
                             "stress.mu_t", "stress.lambda_t", "bie.eta_re", "bie.A_f"}
    extra = {kk: v for kk, v in head.items() if kk not in known}
    spec = {kk: head[kk] for kk in ("surface.offset", "surface.terms") if kk in head}
    if spec:
        extra["_surface_spec"] = spec
    try:
        return CauchyDataSet(medium, params, geometry, head.get("surface.name", ""), us, pus,
                             bie=bie, noise_delta=delta,
                             noise_seed=int(seed_raw) if seed_raw else None, extra=extra)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc} (missing records?)") from None


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------

def format_image(image: ImageGrid) -> str:
    x1, x2 = image.grid.axes()
    lines = ["x1,x2,value"]
    for a in range(x1.size):
        for b in range(x2.size):
            lines.append(f"{fmt(x1[a])},{fmt(x2[b])},{fmt(image.values[a, b])}")
    return "\n".join(lines) + "\n"


def format_ridge(ridge) -> str:
    lines = ["x1,x2_ridge"] + [f"{fmt(a)},{fmt(b)}" for a, b in ridge]
    return "\n".join(lines) + "\n"


def read_image(path: str):
    """Return ``(x1 axis, x2 axis, values[nx1, nx2])`` from an image CSV."""
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [r for r in fh.read().splitlines() if r.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read image {path!r}: {exc}") from exc
    if not rows or rows[0].replace(" ", "") != "x1,x2,value":
        raise ConfigError(f"{path}: expected header 'x1,x2,value'")
    try:
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    except ValueError:
        raise ConfigError(f"{path}: malformed numeric record") from None
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] == 0:
        raise ConfigError(f"{path}: expected three columns")
    x1 = np.unique(data[:, 0])
    x2 = np.unique(data[:, 1])
    if data.shape[0] != x1.size * x2.size:
        raise ConfigError(f"{path}: records do not form a complete grid")
    values = np.full((x1.size, x2.size), np.nan)
    values[np.searchsorted(x1, data[:, 0]), np.searchsorted(x2, data[:, 1])] = data[:, 2]
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{path}: duplicate or non-finite records")
    return x1, x2, values


def format_pgm(values: np.ndarray) -> str:
    """P2 image; rows run from the largest x2 down, columns by increasing x1."""
    vmax = float(values.max())
    if vmax > 0:
        pix = np.rint(np.clip(values / vmax, 0.0, 1.0) * PGM_MAX).astype(int)
    else:
        pix = np.zeros(values.shape, dtype=int)
    nx1, nx2 = values.shape
    lines = ["P2", f"{nx1} {nx2}", str(PGM_MAX)]
    for b in range(nx2 - 1, -1, -1):
        row = pix[:, b]
        for start in range(0, nx1, PGM_PER_LINE):
            lines.append(" ".join(str(v) for v in row[start:start + PGM_PER_LINE]))
    return "\n".join(lines) + "\n"


def format_reports(reports) -> str:
    lines = []
    for rep in reports:
        lines.append(f"[{rep.name}]")
        lines.append(f"passed = {str(rep.passed).lower()}")
        lines.append(f"abs_error = {fmt(rep.abs_error)}")
        lines.append(f"rel_error = {fmt(rep.rel_error)}")
        lines.append(f"tolerance = {fmt(rep.tolerance)}")
        for k, v in rep.params.items():
            lines.append(f"param.{k} = {v}")
        lines.append("")
    return "\n".join(lines)
