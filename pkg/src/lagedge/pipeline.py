"""Run configuration and the end-to-end edge / FTLE / ridge pipelines.

Used by the command line and by the benchmark and ablation harnesses.
"""
from __future__ import annotations

import gc
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .edge import EdgeField, edge_strength_field
from .exceptions import InvalidConfig, IoFailure
from .flows import AnalyticFlow, ScalarGenSpec, attach_scalar, double_gyre_grid, rasterize_flow
from .ftle import FtleField, ftle_field
from .grid import GridSpec, MultifieldDataset, TimeAxis
from .integrate import IntegrationConfig, resolve_jobs
from .lift import MomentSpec, feature_field
from .ridge import RidgeLine, RidgeParams, extract_ridges, ridge_set_distance


@dataclass
class RunConfig:
    """Everything a run needs; JSON-serializable.

    ``dataset`` is a bundle path; ``analytic`` an inline generator recipe
    (see :func:`build_analytic`).  Exactly one of them is used, path first.
    """

    dataset: str | None = None
    analytic: dict | None = None
    t0: float = 0.0
    T: float = 1.0
    M: int = 10
    substeps: int = 1
    boundary: str = "freeze"
    moments: str = "1,2"
    root_normalize: bool = False
    include_space: bool = False
    normalize: bool = False
    sigma: float | None = None
    strength_min: float | None = None
    strength_quantile: float | None = None
    eigenvalue_max: float = 0.0
    min_vertices: int = 2
    border: int = 0
    threads: int | None = None
    repeats: int = 3
    out: str | None = None
    pgm: str | None = None

    @classmethod
    def from_dict(cls, data: dict, source: str = "config") -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidConfig(f"{source}: unknown keys {unknown}; known keys {sorted(known)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoFailure(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise InvalidConfig(f"{path}: top level must be an object")
        return cls.from_dict(data, str(path))

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def integration(self) -> IntegrationConfig:
        return IntegrationConfig(self.t0, self.T, self.M, self.substeps, self.boundary)

    def moment_spec(self) -> MomentSpec:
        return MomentSpec.parse(self.moments, self.root_normalize)

    def ridge_params(self) -> RidgeParams:
        return RidgeParams(
            smoothing_sigma=self.sigma,
            strength_threshold=-np.inf if self.strength_min is None else float(self.strength_min),
            eigenvalue_threshold=self.eigenvalue_max,
            min_vertices=self.min_vertices,
            border=self.border,
            strength_quantile=self.strength_quantile,
        )

    @property
    def n_jobs(self) -> int:
        return resolve_jobs(self.threads)

    def validate(self, ds: MultifieldDataset) -> "RunConfig":
        self.integration().validate(ds)
        self.moment_spec()
        self.ridge_params()
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise InvalidConfig(f"repeats must be a positive integer, got {self.repeats}")
        return self


def _scalar_spec(recipe: dict, flow: AnalyticFlow | None) -> ScalarGenSpec:
    recipe = dict(recipe)
    kind = recipe.pop("kind", None)
    if kind is None:
        raise InvalidConfig(f"scalar recipe {recipe} has no 'kind'")
    if kind == "advected":
        initial = recipe.pop("initial", None)
        if not isinstance(initial, dict):
            raise InvalidConfig("advected scalar needs an 'initial' recipe")
        t_ref = float(recipe.pop("t_ref", 0.0))
        max_step = float(recipe.pop("max_step", 0.05))
        if recipe:
            raise InvalidConfig(f"unknown advected-scalar keys {sorted(recipe)}")
        return ScalarGenSpec("advected", initial=_scalar_spec(initial, flow), t_ref=t_ref,
                             max_step=max_step)
    return ScalarGenSpec(kind, recipe, flow=flow if kind == "stream_function" else None)


def build_analytic(recipe: dict, n_jobs: int | None = 1) -> MultifieldDataset:
    """Dataset from a recipe::

        {"flow": "double_gyre", "params": {...}, "dims": [256, 128],
         "spacing": [...], "origin": [...],            # ignored for double_gyre
         "frames": 51, "t_start": 5.0, "t_step": 0.2,
         "scalars": {"tracer": {"kind": "advected", "t_ref": 5.0,
                                "initial": {"kind": "gaussian_blob", ...}}}}
    """
    recipe = dict(recipe)
    known = {"flow", "params", "dims", "spacing", "origin", "frames", "t_start", "t_step", "scalars"}
    unknown = sorted(set(recipe) - known)
    if unknown:
        raise InvalidConfig(f"unknown analytic keys {unknown}")
    flow = AnalyticFlow(recipe.get("flow", "double_gyre"), dict(recipe.get("params", {})))
    dims = tuple(int(n) for n in recipe.get("dims", (256, 128)))
    if flow.kind == "double_gyre":
        if len(dims) != 2:
            raise InvalidConfig(f"double_gyre needs 2D dims, got {dims}")
        grid = double_gyre_grid(*dims)
    else:
        spacing = recipe.get("spacing") or [1.0 / (n - 1) for n in dims]
        origin = recipe.get("origin")
        grid = GridSpec(dims, spacing, origin)
    time_axis = TimeAxis(recipe.get("t_start", 0.0), recipe.get("t_step", 1.0), recipe.get("frames", 1))
    ds = rasterize_flow(flow, grid, time_axis)
    for name, spec in dict(recipe.get("scalars", {})).items():
        ds = attach_scalar(ds, _scalar_spec(spec, flow), name, n_jobs=n_jobs)
    return ds


def load_input(cfg: RunConfig) -> MultifieldDataset:
    from .io import load_dataset

    if cfg.dataset:
        return load_dataset(cfg.dataset)
    if cfg.analytic:
        return build_analytic(cfg.analytic, n_jobs=cfg.n_jobs)
    raise InvalidConfig("no input: give a dataset path or an 'analytic' recipe")


def run_edge(ds: MultifieldDataset, cfg: RunConfig) -> EdgeField:
    ff = feature_field(ds, cfg.integration(), cfg.moment_spec(), cfg.include_space, n_jobs=cfg.n_jobs)
    return edge_strength_field(ff, standardize=cfg.normalize)


def run_ftle(ds: MultifieldDataset, cfg: RunConfig) -> FtleField:
    return ftle_field(ds, cfg.integration(), n_jobs=cfg.n_jobs)


def run_ridges(field_, cfg: RunConfig, grid: GridSpec | None = None) -> list[RidgeLine]:
    return extract_ridges(field_, cfg.ridge_params(), grid)


def digest(values: np.ndarray) -> str:
    """SHA-256 of the float32 bytes that a volume file would hold."""
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f4").tobytes()).hexdigest()


# benchmark -----------------------------------------------------------------

@dataclass
class BenchResult:
    edge_times: list
    ftle_times: list
    threads: int

    @property
    def ratio(self) -> float:
        """Best edge time over best FTLE time."""
        return min(self.edge_times) / min(self.ftle_times)

    def report(self) -> str:
        rows = [f"threads {self.threads}  repeats {len(self.edge_times)}",
                f"{'pipeline':<10}{'mean [s]':>12}{'min [s]':>12}"]
        for name, ts in (("edge", self.edge_times), ("ftle", self.ftle_times)):
            rows.append(f"{name:<10}{np.mean(ts):>12.4f}{min(ts):>12.4f}")
        rows.append(f"ratio edge/ftle (min) {self.ratio:.4f}")
        return "\n".join(rows)


def bench(ds: MultifieldDataset, cfg: RunConfig, repeats: int | None = None,
          warmup: bool = True) -> BenchResult:
    """Time both pipelines on the same dataset and config, interleaved."""
    cfg.validate(ds)
    repeats = cfg.repeats if repeats is None else int(repeats)
    if warmup:
        run_edge(ds, replace(cfg, M=1, substeps=1))
        run_ftle(ds, replace(cfg, M=1, substeps=1))
    times = {run_edge: [], run_ftle: []}
    for rep in range(repeats):
        # alternate the order so slow drift of the machine hits both pipelines alike
        for fn in ((run_ftle, run_edge) if rep % 2 == 0 else (run_edge, run_ftle)):
            gc.collect()
            t = time.perf_counter()
            fn(ds, cfg)
            times[fn].append(time.perf_counter() - t)
    return BenchResult(times[run_edge], times[run_ftle], cfg.n_jobs)


# moment-order ablation -----------------------------------------------------

ABLATION_SETS = ("1", "1,2", "1,2,3", "1-5")


@dataclass
class AblationRow:
    moments: str
    field: EdgeField
    ridges: list
    digest: str

    @property
    def n_ridges(self) -> int:
        return len(self.ridges)

    @property
    def n_vertices(self) -> int:
        return sum(len(r) for r in self.ridges)


@dataclass
class AblationReport:
    rows: list = field(default_factory=list)

    def text(self) -> str:
        out = [f"{'moments':<10}{'ridges':>8}{'vertices':>10}{'max edge':>14}  sha256"]
        for r in self.rows:
            out.append(f"{r.moments:<10}{r.n_ridges:>8}{r.n_vertices:>10}"
                       f"{float(np.max(r.field.values)):>14.6g}  {r.digest[:16]}")
        return "\n".join(out)


def ablate(ds: MultifieldDataset, cfg: RunConfig, sets=ABLATION_SETS) -> AblationReport:
    cfg.validate(ds)
    report = AblationReport()
    for moments in sets:
        run_cfg = replace(cfg, moments=moments)
        ef = run_edge(ds, run_cfg)
        report.rows.append(AblationRow(moments, ef, run_ridges(ef, run_cfg), digest(ef.values)))
    return report


# the double-gyre comparison ----------------------------------------------

def double_gyre_config(**overrides) -> RunConfig:
    """Backward FTLE vs edge strength on the double gyre with an advected blob."""
    base = RunConfig(
        analytic={
            "flow": "double_gyre",
            "dims": [256, 128],
            "frames": 51,
            "t_start": 5.0,
            "t_step": 0.2,
            "scalars": {
                "tracer": {
                    "kind": "advected",
                    "t_ref": 5.0,
                    "max_step": 0.1,
                    "initial": {"kind": "gaussian_blob", "center": [0.0, 0.0], "width": 0.8},
                }
            },
        },
        t0=15.0,
        T=-10.0,
        M=100,
        substeps=1,
        moments="1,2",
        strength_quantile=0.95,
        min_vertices=20,
        border=3,
        threads=1,
    )
    return replace(base, **overrides)


@dataclass
class Comparison:
    ftle: FtleField
    edge: EdgeField
    ftle_ridges: list
    edge_ridges: list

    @property
    def distance(self):
        return ridge_set_distance(self.ftle_ridges, self.edge_ridges)


def compare_fields(ds: MultifieldDataset, cfg: RunConfig) -> Comparison:
    cfg.validate(ds)
    ft = run_ftle(ds, cfg)
    ef = run_edge(ds, cfg)
    return Comparison(ft, ef, run_ridges(ft, cfg), run_ridges(ef, cfg))
