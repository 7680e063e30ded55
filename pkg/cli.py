# ~/dirkde/cli.py
# Command-line front end: model files, sampling, KDE grids, risk sweeps, bandwidth
# selection and the verification suite.
import argparse
from contextlib import contextmanager
import csv
import logging
import math
from pathlib import Path
import sys
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

import config
from errors import (
    DegenerateTargetError,
    DirKdeError,
    DomainError,
    ModelFileError,
    NumericError,
    UsageError,
    VerificationError,
)
from kde import Bandwidths, DirLinSample, DirSample, eval_grid, eval_linear
from models import (
    DirLinMixture,
    DirMixture,
    LinMixture,
    NormalComponent,
    VmfComponent,
    sample,
)
from risk import (
    METHODS,
    MinimizeResult,
    RiskCurve,
    bootstrap_mise_dir,
    bootstrap_mise_dirlin,
    exact_mise_dir,
    exact_mise_dirlin,
    exact_mise_linear,
    g_amise_linear,
    h_amise_dir,
    hg_amise_search,
    minimize_2d,
    minimize_scalar,
    sweep,
)
from sphere import SUPPORTED_Q, build_line_grid, build_sphere_grid, line_window
from verify import run_checks

logger = logging.getLogger("dirkde.cli")

WEIGHT_TOL = 1e-9
MU_TOL = 1e-6
CRITERIA = ("amise", "exact", "boot")
# search bracket for exact/boot bandwidths when --h / --g are not given
DEFAULT_BRACKET = (0.01, 3.0)

AnyMixture = Union[DirMixture, DirLinMixture, LinMixture]
AnySample = Union[DirSample, DirLinSample, np.ndarray]


# ---------- schemas ----------
class ComponentIn(BaseModel):
    weight: float = Field(ge=0)
    mu: Optional[List[float]] = None
    kappa: Optional[float] = Field(default=None, ge=0)
    mean: Optional[float] = None
    sigma: Optional[float] = Field(default=None, gt=0)

    @property
    def has_linear(self) -> bool:
        return self.mean is not None


class ModelFile(BaseModel):
    """Mixture model file. q = 0 marks a purely linear (normal) mixture."""

    q: int = Field(ge=0, le=max(SUPPORTED_Q))
    components: List[ComponentIn] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self) -> "ModelFile":
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"components.weight: weights sum to {total!r}, not 1")
        for i, c in enumerate(self.components):
            c.weight = c.weight / total
            if (c.mean is None) != (c.sigma is None):
                raise ValueError(f"components[{i}]: mean and sigma must be given together")
            if self.q == 0:
                if c.mu is not None or c.kappa is not None:
                    raise ValueError(f"components[{i}].mu: a q = 0 model is linear only")
                if not c.has_linear:
                    raise ValueError(f"components[{i}].mean: a linear model needs mean and sigma")
                continue
            if c.mu is None or c.kappa is None:
                raise ValueError(f"components[{i}].mu: directional components need mu and kappa")
            if len(c.mu) != self.q + 1:
                raise ValueError(f"components[{i}].mu: expected {self.q + 1} coordinates, got {len(c.mu)}")
            norm = math.sqrt(sum(v * v for v in c.mu))
            if not norm > 0:
                raise ValueError(f"components[{i}].mu: zero vector")
            if abs(norm - 1.0) > MU_TOL:
                logger.warning(f"components[{i}].mu has norm {norm:.9g}; renormalized")
            c.mu = [v / norm for v in c.mu]
        if len({c.has_linear for c in self.components}) != 1:
            raise ValueError("components.mean: linear fields must be present on all components or on none")
        return self

    def to_mixture(self) -> AnyMixture:
        w = np.array([c.weight for c in self.components])
        if self.q == 0:
            return LinMixture(w, tuple(NormalComponent(c.mean, c.sigma) for c in self.components))
        vmfs = tuple(VmfComponent(np.array(c.mu), c.kappa) for c in self.components)
        if self.components[0].has_linear:
            return DirLinMixture(w, vmfs, tuple(NormalComponent(c.mean, c.sigma) for c in self.components))
        return DirMixture(w, vmfs)


def parse_axis(text: str) -> List[float]:
    """'lo:hi:count' -> count evenly spaced values from lo to hi."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected LO:HI:COUNT, got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if not lo > 0:
        raise ValueError(f"axis start must be > 0, got {lo!r}")
    if count < 2:
        raise ValueError(f"axis count must be >= 2, got {count}")
    if not hi > lo:
        raise ValueError(f"axis end must exceed its start, got {text!r}")
    return [float(v) for v in np.linspace(lo, hi, count)]


class SweepSpec(BaseModel):
    h: Optional[List[float]] = None
    g: Optional[List[float]] = None
    n: List[int] = Field(min_length=1)
    replicates: int = Field(default=config.REPLICATES, ge=2)
    seed: int = Field(default=config.SEED, ge=0)
    grid_res: Optional[int] = Field(default=None, ge=2)
    line_res: int = Field(default=config.LINE_RES, ge=16)

    @field_validator("h", "g", mode="before")
    @classmethod
    def _axis(cls, v):
        if v is None or isinstance(v, list):
            return v
        return parse_axis(v)

    @field_validator("n")
    @classmethod
    def _positive_n(cls, v: List[int]) -> List[int]:
        if any(k < 1 for k in v):
            raise ValueError("sample sizes must be >= 1")
        return v


class Diagnostics(BaseModel):
    iterations: int
    converged: bool


class BandwidthOut(BaseModel):
    h: Optional[float] = None
    g: Optional[float] = None
    criterion: str
    n: int
    diagnostics: Diagnostics
    version: str = config.VERSION
    seed: int
    params: Dict[str, str] = Field(default_factory=dict)


def _explain(e: ValidationError) -> str:
    msgs = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        msg = err.get("msg", "invalid value").removeprefix("Value error, ")
        msgs.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(msgs)


# ---------- model / data files ----------
def load_model(path: str) -> AnyMixture:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ModelFileError(f"cannot read model file {path}: {e.strerror}")
    try:
        spec = ModelFile.model_validate_json(text)
    except ValidationError as e:
        raise ModelFileError(f"{path}: {_explain(e)}")
    try:
        return spec.to_mixture()
    except DomainError as e:
        raise ModelFileError(f"{path}: {e.detail}")


def _data_rows(handle: TextIO) -> Iterator[List[str]]:
    return csv.reader(line for line in handle if line.strip() and not line.startswith("#"))


def read_data(path: str) -> AnySample:
    """Sample CSV with columns x1..x{q+1}[,z] (or z alone); '#' lines are comments."""
    try:
        with open(path, newline="") as handle:
            rows = list(_data_rows(handle))
    except OSError as e:
        raise UsageError(f"cannot read data file {path}: {e.strerror}")
    if not rows:
        raise UsageError(f"{path}: no header row")
    header = [c.strip() for c in rows[0]]
    xcols = [i for i, c in enumerate(header) if c.startswith("x")]
    zcol = header.index("z") if "z" in header else None
    if not xcols and zcol is None:
        raise UsageError(f"{path}: header needs x1..x{{q+1}} and/or z columns, got {header}")
    try:
        table = np.array([[float(r[i]) for i in range(len(header))] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError):
        raise UsageError(f"{path}: malformed numeric row")
    if table.shape[0] < 1:
        raise UsageError(f"{path}: no data rows")
    if not xcols:
        return table[:, zcol]
    if len(xcols) - 1 not in SUPPORTED_Q:
        raise DomainError(f"{path}: {len(xcols)} direction columns; q must be one of {SUPPORTED_Q}")
    if zcol is None:
        return DirSample(table[:, xcols])
    return DirLinSample(points=table[:, xcols], z=table[:, zcol])


# ---------- output ----------
@contextmanager
def _output(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        handle = open(path, "w", newline="")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}")
    with handle:
        yield handle


def _params(args: argparse.Namespace) -> Dict[str, str]:
    return {k: str(v) for k, v in sorted(vars(args).items()) if k not in ("func", "out", "log_level")}


def _header_line(args: argparse.Namespace) -> str:
    params = " ".join(f"{k}={v}" for k, v in _params(args).items())
    return f"# dirkde {config.VERSION} {args.command} {params}\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(args: argparse.Namespace, columns: Sequence[str], rows) -> None:
    with _output(args.out) as handle:
        handle.write(_header_line(args))
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# ---------- argument helpers ----------
def _positive(value: Optional[str], flag: str) -> Optional[float]:
    if value is None:
        return None
    try:
        x = float(value)
    except ValueError:
        raise UsageError(f"{flag} expects a number, got {value!r}")
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"{flag} must be > 0, got {value}")
    return x


def _bracket(value: Optional[str], flag: str):
    if value is None:
        return DEFAULT_BRACKET
    try:
        axis = parse_axis(value)
    except ValueError as e:
        raise UsageError(f"{flag}: {e}")
    return axis[0], axis[-1]


def _ns(value: Optional[str]) -> List[int]:
    if value is None:
        raise UsageError("--n is required")
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--n expects INT[,INT...], got {value!r}")


def _single_n(value: Optional[str]) -> int:
    ns = _ns(value)
    if len(ns) != 1:
        raise UsageError(f"this command takes a single --n, got {value!r}")
    if ns[0] < 1:
        raise DomainError(f"--n must be >= 1, got {ns[0]}")
    return ns[0]


def _require(value, flag: str, command: str):
    if value is None:
        raise UsageError(f"{command} needs {flag}")
    return value


def _grid_for(q: int, args: argparse.Namespace):
    return build_sphere_grid(q, args.grid_res or config.default_grid_res(q))


def _line_grid_for(means, sigmas, g: float, resolution: int):
    center, half = line_window(means, sigmas, g)
    return build_line_grid(half, resolution, center)


def _dims(obj) -> str:
    if isinstance(obj, (LinMixture, np.ndarray)):
        return "linear"
    return f"q={obj.q}" + (" directional-linear" if isinstance(obj, (DirLinMixture, DirLinSample)) else "")


# ---------- commands ----------
def cmd_sample(args: argparse.Namespace) -> None:
    m = load_model(_require(args.model, "--model", "sample"))
    n = _single_n(args.n)
    draw = sample(m, n, args.seed)
    if isinstance(m, LinMixture):
        _write_csv(args, ["z"], ([z] for z in draw))
    elif isinstance(draw, DirLinSample):
        cols = [f"x{k + 1}" for k in range(m.q + 1)] + ["z"]
        _write_csv(args, cols, (list(p) + [z] for p, z in zip(draw.points, draw.z)))
    else:
        _write_csv(args, [f"x{k + 1}" for k in range(m.q + 1)], (list(p) for p in draw.points))
    logger.info(f"drew {n} points from a {_dims(m)} mixture (seed={args.seed})")


def cmd_kde(args: argparse.Namespace) -> None:
    data = read_data(_require(args.data, "--data", "kde"))
    h, g = _positive(args.h, "--h"), _positive(args.g, "--g")

    if isinstance(data, np.ndarray):
        g = _require(g or h, "--g", "kde on linear data")
        lgrid = _line_grid_for(data, [g], 0.0, args.line_res)
        est = eval_linear(data, g, lgrid.nodes)
        integral = float(lgrid.weights @ est)
        rows = ([z, w, f] for z, w, f in zip(lgrid.nodes, lgrid.weights, est))
        _write_csv(args, ["z", "weight", "density"], rows)
    else:
        bw = Bandwidths(_require(h, "--h", "kde"), g)
        grid = _grid_for(data.q, args)
        xcols = [f"x{k + 1}" for k in range(data.q + 1)]
        if isinstance(data, DirLinSample):
            _require(g, "--g", "kde on directional-linear data")
            lgrid = _line_grid_for(data.z, [g], 0.0, args.line_res)
            est = eval_grid(data, bw, grid, lgrid)
            integral = float(grid.weights @ est @ lgrid.weights)
            rows = (
                list(x) + [z, wx * wz, est[i, j]]
                for i, (x, wx) in enumerate(zip(grid.nodes, grid.weights))
                for j, (z, wz) in enumerate(zip(lgrid.nodes, lgrid.weights))
            )
            _write_csv(args, xcols + ["z", "weight", "density"], rows)
        else:
            est = eval_grid(data, bw, grid)
            integral = float(grid.weights @ est)
            rows = (list(x) + [w, f] for x, w, f in zip(grid.nodes, grid.weights, est))
            _write_csv(args, xcols + ["weight", "density"], rows)
    logger.info(f"integral of the estimate over the grid: {integral:.10f} (|1 - I| = {abs(1.0 - integral):.2e})")


def _sweep_spec(args: argparse.Namespace) -> SweepSpec:
    try:
        return SweepSpec(
            h=args.h,
            g=args.g,
            n=_ns(args.n),
            replicates=args.replicates if args.replicates is not None else config.REPLICATES,
            seed=args.seed,
            grid_res=args.grid_res,
            line_res=args.line_res,
        )
    except ValidationError as e:
        raise UsageError(f"sweep: {_explain(e)}")


def _methods(value: str) -> List[str]:
    methods = [v.strip() for v in value.split(",") if v.strip()]
    unknown = [v for v in methods if v not in METHODS]
    if not methods or unknown:
        raise UsageError(f"--method takes a list from {METHODS}, got {value!r}")
    return methods


def _check_data_matches(m: AnyMixture, data: AnySample) -> None:
    if _dims(m) != _dims(data):
        raise UsageError(f"data is {_dims(data)} but the model is {_dims(m)}")


def cmd_risk(args: argparse.Namespace) -> None:
    m = load_model(_require(args.model, "--model", "risk"))
    spec = _sweep_spec(args)
    methods = _methods(args.method)
    linear = isinstance(m, LinMixture)
    if linear and "boot" in methods:
        raise UsageError("boot is only defined for directional models")

    data = None
    if "boot" in methods:
        data = read_data(_require(args.data, "--data", "risk --method boot"))
        _check_data_matches(m, data)
        _require(args.hp, "--hp", "risk --method boot")
        if isinstance(m, DirLinMixture):
            _require(args.gp, "--gp", "risk --method boot on a directional-linear model")

    grid = None if linear else build_sphere_grid(m.q, spec.grid_res or config.default_grid_res(m.q))
    lgrid = None
    if linear or isinstance(m, DirLinMixture):
        axis_g = (spec.g or spec.h) if linear else spec.g
        if not axis_g:
            raise UsageError("--g LO:HI:COUNT is required for this model")
        lgrid = _line_grid_for(m.means, m.sigmas, max(axis_g), spec.line_res)
    if not linear and not spec.h:
        raise UsageError("--h LO:HI:COUNT is required for this model")

    curve = sweep(
        m,
        spec.h or [],
        spec.n,
        methods,
        gs=spec.g,
        grid=grid,
        lgrid=lgrid,
        data=data,
        h_p=_positive(args.hp, "--hp"),
        g_p=_positive(args.gp, "--gp"),
        replicates=spec.replicates,
        seed=spec.seed,
        workers=args.workers,
    )
    _write_risk(args, m, curve)


def _write_risk(args: argparse.Namespace, m: AnyMixture, curve: RiskCurve) -> None:
    tail = ["n", "method", "value", "se", "argmin"]
    if isinstance(m, LinMixture):
        cols = ["g"] + tail
        rows = ([r.g, r.n, r.method, r.value, r.se, r.argmin] for r in curve.rows)
    elif isinstance(m, DirLinMixture):
        cols = ["h", "g"] + tail
        rows = ([r.h, r.g, r.n, r.method, r.value, r.se, r.argmin] for r in curve.rows)
    else:
        cols = ["h"] + tail
        rows = ([r.h, r.n, r.method, r.value, r.se, r.argmin] for r in curve.rows)
    _write_csv(args, cols, rows)


def _closed_form(h: Optional[float] = None, g: Optional[float] = None) -> MinimizeResult:
    x = tuple(v for v in (h, g) if v is not None)
    return MinimizeResult(x=x, value=float("nan"), iterations=0, converged=True)


def _select_amise(m: AnyMixture, n: int, args) -> MinimizeResult:
    if isinstance(m, LinMixture):
        return _closed_form(g=g_amise_linear(m, n))
    grid = _grid_for(m.q, args)
    if isinstance(m, DirLinMixture):
        return hg_amise_search(m, n, grid=grid, strict=False)
    return _closed_form(h=h_amise_dir(m, n, grid=grid))


def _select_exact(m: AnyMixture, n: int, args) -> MinimizeResult:
    if isinstance(m, LinMixture):
        lo, hi = _bracket(args.g or args.h, "--g")
        return minimize_scalar(lambda g: exact_mise_linear(m, g, n), lo, hi, log_scale=True, strict=False)
    grid = _grid_for(m.q, args)
    if isinstance(m, DirLinMixture):
        try:
            start = hg_amise_search(m, n, grid=grid, strict=False).x
        except DegenerateTargetError:
            lo, hi = _bracket(args.h, "--h")
            start = (math.sqrt(lo * hi),) * 2
        return minimize_2d(lambda h, g: exact_mise_dirlin(m, h, g, n, grid), start, strict=False)
    lo, hi = _bracket(args.h, "--h")
    return minimize_scalar(lambda h: exact_mise_dir(m, h, n, grid), lo, hi, log_scale=True, strict=False)


def _select_boot(data: AnySample, args) -> MinimizeResult:
    if isinstance(data, np.ndarray):
        raise UsageError("boot is only defined for directional data")
    hp = _positive(_require(args.hp, "--hp", "bandwidth --criterion boot"), "--hp")
    grid = _grid_for(data.q, args)
    if isinstance(data, DirLinSample):
        gp = _positive(_require(args.gp, "--gp", "bandwidth --criterion boot"), "--gp")
        return minimize_2d(lambda h, g: bootstrap_mise_dirlin(data, h, g, hp, gp, grid), (hp, gp), strict=False)
    lo, hi = _bracket(args.h, "--h")
    return minimize_scalar(lambda h: bootstrap_mise_dir(data, h, hp, grid), lo, hi, log_scale=True, strict=False)


def cmd_bandwidth(args: argparse.Namespace) -> None:
    if args.criterion == "boot":
        data = read_data(_require(args.data, "--data", "bandwidth --criterion boot"))
        res, n = _select_boot(data, args), data.n
        kind = data
    else:
        m = load_model(_require(args.model, "--model", f"bandwidth --criterion {args.criterion}"))
        n = _single_n(args.n)
        res = _select_amise(m, n, args) if args.criterion == "amise" else _select_exact(m, n, args)
        kind = m

    if isinstance(kind, (LinMixture, np.ndarray)):
        h, g = None, res.x[0]
    elif isinstance(kind, (DirLinMixture, DirLinSample)):
        h, g = res.x
    else:
        h, g = res.x[0], None
    out = BandwidthOut(
        h=h,
        g=g,
        criterion=args.criterion,
        n=n,
        diagnostics=Diagnostics(iterations=res.iterations, converged=res.converged),
        seed=args.seed,
        params=_params(args),
    )
    if not res.converged:
        logger.warning(f"{args.criterion} search did not converge; reporting the best point found")
    with _output(args.out) as handle:
        handle.write(out.model_dump_json(indent=2, exclude_none=True) + "\n")


def cmd_verify(args: argparse.Namespace) -> None:
    report = run_checks(inject_text_dq=args.inject_text_dq)
    with _output(args.out) as handle:
        handle.write(_header_line(args))
        for c in report.checks:
            status = "PASS" if c.passed else "FAIL"
            handle.write(f"{status}  {c.name}: value={c.value!r} reference={c.reference!r} tol={c.tolerance:g}\n")
        failed = sum(not c.passed for c in report.checks)
        handle.write(f"{len(report.checks)} checks, {failed} failed\n")
    if not report.passed:
        names = ", ".join(c.name for c in report.checks if not c.passed)
        raise VerificationError(f"verification failed: {names}")


# ---------- parser ----------
class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=config.SEED, help="random seed (default DIRKDE_SEED)")
    p.add_argument("--out", default=None, help="output path; '-' or omitted writes to stdout")
    p.add_argument("--log-level", default=None, help="override DIRKDE_LOG_LEVEL")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirkde", description="Directional and directional-linear kernel density estimation")
    parser.add_argument("--version", action="version", version=f"dirkde {config.VERSION}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("sample", help="draw a sample from a mixture model")
    p.add_argument("--model", help="mixture model JSON")
    p.add_argument("--n", help="sample size")
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("kde", help="evaluate the estimator on a quadrature grid")
    p.add_argument("--data", help="sample CSV")
    p.add_argument("--h", help="directional bandwidth")
    p.add_argument("--g", help="linear bandwidth")
    p.add_argument("--grid-res", type=int, default=None)
    p.add_argument("--line-res", type=int, default=config.LINE_RES)
    _common(p)
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser("risk", help="tabulate error curves over a bandwidth sweep")
    p.add_argument("--model", help="mixture model JSON")
    p.add_argument("--data", help="sample CSV (method boot)")
    p.add_argument("--h", help="h axis LO:HI:COUNT")
    p.add_argument("--g", help="g axis LO:HI:COUNT")
    p.add_argument("--n", help="sample sizes INT[,INT...]")
    p.add_argument("--method", default="exact,amise", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--hp", help="pilot h (method boot)")
    p.add_argument("--gp", help="pilot g (method boot)")
    p.add_argument("--grid-res", type=int, default=None)
    p.add_argument("--line-res", type=int, default=config.LINE_RES)
    p.add_argument("--workers", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("bandwidth", help="select a bandwidth by AMISE, exact MISE or bootstrap MISE")
    p.add_argument("--criterion", choices=CRITERIA, default="amise")
    p.add_argument("--model", help="mixture model JSON (amise, exact)")
    p.add_argument("--data", help="sample CSV (boot)")
    p.add_argument("--n", help="sample size (amise, exact)")
    p.add_argument("--h", help="search bracket LO:HI:COUNT for h")
    p.add_argument("--g", help="search bracket LO:HI:COUNT for g (linear models)")
    p.add_argument("--hp", help="pilot h (boot)")
    p.add_argument("--gp", help="pilot g (boot)")
    p.add_argument("--grid-res", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--inject-text-dq", action="store_true", help="use d_q = 2^(1-q/2) in the constant checks")
    _common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config.configure_logging(args.log_level)
        if args.seed < 0:
            raise UsageError(f"--seed must be >= 0, got {args.seed}")
        args.func(args)
        return 0
    except DirKdeError as e:
        logger.error(e.detail)
        return e.exit_code
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        err = NumericError(f"{type(e).__name__}: {e}")
        logger.exception(err.detail)
        return err.exit_code
