"""INI-style run configuration with flag overrides and a resolved manifest."""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coeffs import ExprDomainError, ExprSyntaxError, ProblemParams, parse_expr
from .geometry import FourierShape, InvalidShapeError, read_shape
from .optimizer import Constraint, OptimOptions
from .speed import SWEEP_VARS, SpeedOptions


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


SECTIONS = ("params", "coeffs", "shape", "mesh", "solver", "sweep", "optimize", "validate", "run")

KNOWN_KEYS = {
    "params": {"d", "D", "mu", "nu", "eps"},
    "coeffs": {"kappa", "f_lin", "g_lin"},
    "shape": {"file", "a0", "a", "b", "R"},
    "mesh": {"target_h", "n_rings"},
    "solver": {"tol_grad", "tol_step", "alpha_init", "max_iter", "lambda_tol"},
    "sweep": {"var", "values", "start", "stop", "num", "spacing"},
    "optimize": {
        "direction", "constraint", "target", "M", "dt0", "tol", "max_iters",
        "init", "R0", "grad_tol", "stall_window", "stall_tol",
    },
    "validate": {"suite"},
    "run": {"seed", "out", "threads", "debug"},
}


@dataclass
class SweepConfig:
    var: str = "D"
    values: list[float] = field(default_factory=list)


@dataclass
class RunConfig:
    params: ProblemParams
    shape: FourierShape
    target_h: float = 0.11
    n_rings: int | None = None
    solver: SpeedOptions = field(default_factory=SpeedOptions)
    sweep: SweepConfig | None = None
    optim: OptimOptions = field(default_factory=OptimOptions)
    optim_init: str = "shape"
    optim_R0: float = 3.0
    suite: str = "standard"
    seed: int = 0
    out: Path = Path("out")
    threads: int = 1
    debug: bool = False
    source: str | None = None

    def resolved(self) -> dict:
        """Every value the run uses, as plain JSON types."""
        o = self.optim
        return {
            "source": self.source,
            "params": self.params.as_dict(),
            "shape": {"a0": self.shape.a0, "a": list(self.shape.a), "b": list(self.shape.b), "M": self.shape.M},
            "mesh": {"target_h": self.target_h, "n_rings": self.n_rings},
            "solver": asdict(self.solver),
            "sweep": None if self.sweep is None else {"var": self.sweep.var, "values": list(self.sweep.values)},
            "optimize": {
                "direction": o.direction,
                "constraint": o.constraint.kind,
                "target": o.constraint.value,
                "M": o.M,
                "dt0": o.dt0,
                "tol": o.tol,
                "max_iters": o.max_iters,
                "target_h": o.target_h,
                "grad_tol": o.grad_tol,
                "stall_window": o.stall_window,
                "stall_tol": o.stall_tol,
                "init": self.optim_init,
                "R0": self.optim_R0,
                "random_init": "a0~U[0.5,2], |a_k|,|b_k| <= 0.3*a0/k^2, then projected",
            },
            "validate": {"suite": self.suite},
            "run": {"seed": self.seed, "out": str(self.out), "threads": self.threads, "debug": self.debug},
        }


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
        return s[1:-1]
    return s


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _get(cp, sec, key, conv, default):
    if not cp.has_option(sec, key):
        return default
    raw = _unquote(cp.get(sec, key))
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from exc


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _grid(cp) -> SweepConfig | None:
    if not cp.has_section("sweep"):
        return None
    var = _get(cp, "sweep", "var", str, "D")
    if var not in SWEEP_VARS:
        raise ConfigError(f"[sweep] var must be one of {', '.join(SWEEP_VARS)}")
    if cp.has_option("sweep", "values"):
        values = _get(cp, "sweep", "values", _floats, [])
    else:
        start = _get(cp, "sweep", "start", float, None)
        stop = _get(cp, "sweep", "stop", float, None)
        num = _get(cp, "sweep", "num", int, None)
        if start is None or stop is None or num is None:
            raise ConfigError("[sweep] needs either values or start, stop and num")
        spacing = _get(cp, "sweep", "spacing", str, "linear")
        if spacing == "linear":
            values = np.linspace(start, stop, num).tolist()
        elif spacing == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("[sweep] log spacing needs positive bounds")
            values = np.geomspace(start, stop, num).tolist()
        else:
            raise ConfigError("[sweep] spacing must be linear or log")
    if not values:
        raise ConfigError("[sweep] grid is empty")
    return SweepConfig(var, [float(v) for v in values])


def _shape(cp, base: Path) -> FourierShape:
    if not cp.has_section("shape"):
        return FourierShape.circle(1.0)
    if cp.has_option("shape", "file"):
        p = Path(_unquote(cp.get("shape", "file")))
        if not p.is_absolute():
            p = base / p
        try:
            return read_shape(p)
        except OSError as exc:
            raise ConfigError(f"[shape] file: {exc}") from exc
    if cp.has_option("shape", "R"):
        return FourierShape.circle(_get(cp, "shape", "R", float, 1.0))
    a0 = _get(cp, "shape", "a0", float, 1.0)
    a = _get(cp, "shape", "a", _floats, [])
    b = _get(cp, "shape", "b", _floats, [])
    M = max(len(a), len(b))
    a = a + [0.0] * (M - len(a))
    b = b + [0.0] * (M - len(b))
    return FourierShape(a0, tuple(a), tuple(b))


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse ``path`` and apply flag overrides (``seed``, ``out``, ``threads``, ``h``, ``eps``, ``suite``)."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # D and d are different keys
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp, path.parent, overrides, source=str(path))


def config_from_text(text: str, overrides: dict | None = None, base: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp, base or Path("."), overrides)


def config_from_parser(cp, base: Path, overrides: dict | None = None, source: str | None = None) -> RunConfig:
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp.options(sec)) - KNOWN_KEYS[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    try:
        kw = {k: _get(cp, "params", k, float, None) for k in ("d", "D", "mu", "nu", "eps")}
        kw = {k: v for k, v in kw.items() if v is not None}
        if "eps" in ov:
            kw["eps"] = float(ov["eps"])
        for k in ("kappa", "f_lin", "g_lin"):
            if cp.has_option("coeffs", k):
                kw[k] = parse_expr(_unquote(cp.get("coeffs", k)))
        params = ProblemParams(**kw)
        shape = _shape(cp, base)
    except ConfigError:
        raise
    except (ExprSyntaxError, ExprDomainError, InvalidShapeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    target_h = float(ov.get("h", _get(cp, "mesh", "target_h", float, 0.11)))
    if not target_h > 0:
        raise ConfigError("target_h must be positive")
    n_rings = _get(cp, "mesh", "n_rings", int, None)

    s = SpeedOptions()
    solver = SpeedOptions(
        tol_grad=_get(cp, "solver", "tol_grad", float, s.tol_grad),
        tol_step=_get(cp, "solver", "tol_step", float, s.tol_step),
        alpha_init=_get(cp, "solver", "alpha_init", float, s.alpha_init),
        max_iter=_get(cp, "solver", "max_iter", int, s.max_iter),
        lambda_tol=_get(cp, "solver", "lambda_tol", float, s.lambda_tol),
    )

    o = OptimOptions()
    kind = _get(cp, "optimize", "constraint", str, "none")
    target = _get(cp, "optimize", "target", float, None)
    if kind in ("area", "perimeter") and target is None:
        target = math.pi if kind == "area" else 2.0 * math.pi
    try:
        constraint = Constraint(kind, target if kind != "none" else None)
        optim = OptimOptions(
            direction=_get(cp, "optimize", "direction", str, o.direction),
            constraint=constraint,
            M=_get(cp, "optimize", "M", int, None),
            dt0=_get(cp, "optimize", "dt0", float, o.dt0),
            tol=_get(cp, "optimize", "tol", float, o.tol),
            max_iters=_get(cp, "optimize", "max_iters", int, o.max_iters),
            target_h=target_h,
            grad_tol=_get(cp, "optimize", "grad_tol", float, o.grad_tol),
            stall_window=_get(cp, "optimize", "stall_window", int, o.stall_window),
            stall_tol=_get(cp, "optimize", "stall_tol", float, o.stall_tol),
            speed=solver,
        )
    except ValueError as exc:
        raise ConfigError(f"[optimize] {exc}") from exc
    init = _get(cp, "optimize", "init", str, "shape")
    if init not in ("shape", "random", "disk"):
        raise ConfigError("[optimize] init must be shape, random or disk")

    suite = ov.get("suite", _get(cp, "validate", "suite", str, "standard"))
    seed = int(ov.get("seed", _get(cp, "run", "seed", int, 0)))
    out = Path(ov.get("out", _get(cp, "run", "out", str, "out")))
    threads = int(ov.get("threads", _get(cp, "run", "threads", int, 1)))
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return RunConfig(
        params=params,
        shape=shape,
        target_h=target_h,
        n_rings=n_rings,
        solver=solver,
        sweep=_grid(cp),
        optim=optim,
        optim_init=init,
        optim_R0=_get(cp, "optimize", "R0", float, 3.0),
        suite=suite,
        seed=seed,
        out=out,
        threads=threads,
        debug=bool(ov.get("debug", _get(cp, "run", "debug", _bool, False))),
        source=source,
    )


def write_manifest(cfg: RunConfig, command: str, path: str | Path, extra: dict | None = None) -> None:
    data = {"command": command, "config": cfg.resolved()}
    if extra:
        data["result"] = extra
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
