"""Experiment configuration: INI files with section nesting.

The rate unit is fixed internally (Gamma = 1), so every physical number
in a config is already in units of Gamma (rates) or 1/Gamma (times).
A config names one experiment and supplies loop parameters, numeric
knobs, sweep grids and correction settings; see configs/ in the
repository for committed recipes.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field

from .errors import SchemaError
from .system import TruncationRanges


class ExperimentKind(enum.Enum):
    TRAJECTORY = "trajectory"
    MAGNUS_VALIDATION = "magnus-validate"
    ALPHA_SWEEP = "alpha-sweep"
    DURATION_SWEEP = "duration-sweep"
    CORRECTION = "correct"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind
    r0: float = 0.5
    alpha: float = 0.0
    s: int = 1
    gamma_tf: float = 50.0
    zero_coupling: bool = False
    n_grid: int = 4096
    jump_tol: float = 0.25
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    quad_tol: float = 1e-9
    alpha_points: int = 64
    durations: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)
    orders: tuple[int, ...] = (1, 2, 4)
    max_order: int = 2
    truncation: TruncationRanges = field(default_factory=TruncationRanges)
    svd_cutoff: float = 1e-12
    inner_iterations: int = 3
    out_dir: str = "out"

    def __post_init__(self):
        checks = [
            (self.r0 >= 0, "loop.r0 must be non-negative"),
            (self.s in (1, -1), "loop.s must be +1 or -1"),
            (self.gamma_tf > 0, "loop.gamma_tf must be positive"),
            (self.n_grid >= 64, "numerics.n_grid must be at least 64"),
            (self.rel_tol >= 1e-13, "numerics.rel_tol must be >= 1e-13"),
            (self.alpha_points >= 2, "sweep.alpha_points must be >= 2"),
            (len(self.durations) >= 1, "sweep.durations must be non-empty"),
            (all(o in (1, 2, 3, 4) for o in self.orders),
             "sweep.orders entries must be in 1..4"),
            (self.max_order in (1, 2), "correction.max_order must be 1 or 2"),
            (self.svd_cutoff > 0, "correction.svd_cutoff must be positive"),
            (self.inner_iterations >= 1,
             "correction.inner_iterations must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise SchemaError(message)


_BOOL = {"true": True, "yes": True, "1": True,
         "false": False, "no": False, "0": False}


def _get(parser, section, option, cast, default):
    if not parser.has_option(section, option):
        return default
    raw = parser.get(section, option).strip()
    try:
        if cast is bool:
            return _BOOL[raw.lower()]
        return cast(raw)
    except (ValueError, KeyError) as exc:
        raise SchemaError(f"[{section}] {option}: cannot parse {raw!r}") from exc


def _get_tuple(parser, section, option, cast, default):
    if not parser.has_option(section, option):
        return default
    raw = parser.get(section, option)
    try:
        return tuple(cast(tok.strip()) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise SchemaError(f"[{section}] {option}: cannot parse {raw!r}") from exc


def load_config(path: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse an experiment config file, optionally overriding the
    experiment type (the CLI subcommand takes precedence)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise SchemaError(f"config file not found or unreadable: {path}")

    kind_raw = experiment or _get(parser, "experiment", "type", str, None)
    if kind_raw is None:
        raise SchemaError("[experiment] type is required "
                          "(or pass a subcommand)")
    try:
        kind = ExperimentKind(kind_raw)
    except ValueError:
        valid = ", ".join(k.value for k in ExperimentKind)
        raise SchemaError(f"[experiment] type: {kind_raw!r} is not one of "
                          f"{valid}")

    tr = TruncationRanges(
        k=(_get(parser, "correction", "k_m", int, 0),
           _get(parser, "correction", "k_M", int, 0)),
        l=(_get(parser, "correction", "l_m", int, 1),
           _get(parser, "correction", "l_M", int, 6)),
        m=(_get(parser, "correction", "m_m", int, 1),
           _get(parser, "correction", "m_M", int, 6)),
        n=(_get(parser, "correction", "n_m", int, 0),
           _get(parser, "correction", "n_M", int, 0)),
    )
    return ExperimentConfig(
        experiment=kind,
        r0=_get(parser, "loop", "r0", float, 0.5),
        alpha=_get(parser, "loop", "alpha", float, 0.0),
        s=_get(parser, "loop", "s", int, 1),
        gamma_tf=_get(parser, "loop", "gamma_tf", float, 50.0),
        zero_coupling=_get(parser, "loop", "zero_coupling", bool, False),
        n_grid=_get(parser, "numerics", "n_grid", int, 4096),
        jump_tol=_get(parser, "numerics", "jump_tol", float, 0.25),
        rel_tol=_get(parser, "numerics", "rel_tol", float, 1e-11),
        abs_tol=_get(parser, "numerics", "abs_tol", float, 1e-13),
        quad_tol=_get(parser, "numerics", "quad_tol", float, 1e-9),
        alpha_points=_get(parser, "sweep", "alpha_points", int, 64),
        durations=_get_tuple(parser, "sweep", "durations", float,
                             (10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)),
        orders=_get_tuple(parser, "sweep", "orders", int, (1, 2, 4)),
        max_order=_get(parser, "correction", "max_order", int, 2),
        truncation=tr,
        svd_cutoff=_get(parser, "correction", "svd_cutoff", float, 1e-12),
        inner_iterations=_get(parser, "correction", "inner_iterations", int, 3),
        out_dir=_get(parser, "output", "dir", str, "out"),
    )
