"""Experiment drivers: convergence tables, ratio-bound data, diagnostics."""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrator import (
    DivergenceError,
    check_dissipation,
    check_l2_stability,
    energy_trace,
    wsbdf2_solve,
)
from .mesh import Mesh, case1_mesh, geometric_mesh, random_mesh, uniform_mesh
from .ratio_bounds import lk_recursion, r_optimal, r_suboptimal
from .spectral2d import NORMS, SpectralLaplacian

CASES = ("case1", "geometric", "random", "uniform")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    thetas: list[float] = field(default_factory=lambda: [0.5, 0.75, 1.0])
    case: str = "case1"
    Ns: list[int] = field(default_factory=lambda: [20, 40, 80, 160])
    T: float = 1.0
    Mx: int = 20
    My: int = 20
    ratio: float = 2.0
    seeds: list[int] = field(default_factory=lambda: [1])
    random_low: float = 0.0
    norm: str = "cc"
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown mesh case {self.case!r}; choose from {CASES}")
        if not self.thetas or not self.Ns or not self.seeds:
            raise ConfigError("theta, N and seed lists must be non-empty")
        if any(int(n) != n or n < 1 for n in self.Ns):
            raise ConfigError("N values must be positive integers")
        if self.case == "case1" and any(n % 2 for n in self.Ns):
            raise ConfigError("the alternating case needs even N")
        if self.norm not in NORMS:
            raise ConfigError(f"unknown norm {self.norm!r}; choose from {sorted(NORMS)}")
        if not self.T > 0:
            raise ConfigError("T must be positive")

    def mesh(self, N: int, seed: int | None = None) -> Mesh:
        if self.case == "case1":
            return case1_mesh(self.T, N)
        if self.case == "geometric":
            return geometric_mesh(self.T, N, self.ratio)
        if self.case == "random":
            return random_mesh(self.T, N, self.seeds[0] if seed is None else seed, self.random_low)
        return uniform_mesh(self.T, N)

    @property
    def seed_list(self) -> list[int | None]:
        return list(self.seeds) if self.case == "random" else [None]


_KEYS = {
    "theta": ("thetas", lambda v: [_parse_theta(x) for x in _split(v)]),
    "case": ("case", str),
    "n": ("Ns", lambda v: [int(x) for x in _split(v)]),
    "t": ("T", float),
    "mx": ("Mx", int),
    "my": ("My", int),
    "ratio": ("ratio", float),
    "seed": ("seeds", lambda v: [int(x) for x in _split(v)]),
    "random_low": ("random_low", float),
    "norm": ("norm", str),
    "out": ("out", str),
    "jobs": ("jobs", int),
}


def _split(value: str) -> list[str]:
    return [p.strip() for p in value.split(",") if p.strip()]


def _parse_theta(text: str) -> float:
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists use commas.

    Keys (case-insensitive): theta, case, N, T, Mx, My, ratio, seed,
    random_low, norm, out, jobs.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        entry = _KEYS.get(key.lower())
        if entry is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, conv = entry
        try:
            values[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return values


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def manufactured_solution(grid):
    """Exact solution ``(t^3 + 1) sin(pi x) sin(pi y)`` and its forcing."""
    shape = grid.sample(lambda X, Y: np.sin(np.pi * X) * np.sin(np.pi * Y))

    def exact(t):
        return (t**3 + 1.0) * shape

    def forcing(t):
        return (3.0 * t**2 + 2.0 * np.pi**2 * (t**3 + 1.0)) * shape[1:-1, 1:-1]

    return exact, forcing


@dataclass
class ConvergenceCell:
    case: str
    theta: float
    N: int
    seed: int | None
    error: float
    rate: float | None = None
    runtime: float = 0.0
    diverged: bool = False
    stability_slack: float = math.nan
    stable: bool = True
    max_ratio: float = math.nan


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    cells: list[ConvergenceCell]

    def series(self, theta: float, seed: int | None = None) -> list[ConvergenceCell]:
        return sorted(
            (c for c in self.cells if c.theta == theta and c.seed == seed),
            key=lambda c: c.N,
        )

    def ensemble_errors(self, theta: float) -> dict[int, float]:
        """Geometric mean of the errors over seeds, per N."""
        out = {}
        for N in sorted({c.N for c in self.cells}):
            errs = [c.error for c in self.cells if c.theta == theta and c.N == N and not c.diverged]
            if errs:
                out[N] = float(np.exp(np.mean(np.log(errs))))
        return out

    def ensemble_rates(self, theta: float) -> dict[int, float]:
        errs = self.ensemble_errors(theta)
        return {N: math.log2(errs[N // 2] / errs[N]) for N in errs if N % 2 == 0 and N // 2 in errs}

    def to_csv(self) -> str:
        lines = ["case,theta,seed,N,error,rate,max_ratio,stability_slack,runtime_s,diverged"]
        for c in self.cells:
            rate = "" if c.rate is None else repr(c.rate)
            seed = "" if c.seed is None else str(c.seed)
            lines.append(
                f"{c.case},{c.theta!r},{seed},{c.N},{c.error!r},{rate},{c.max_ratio!r},"
                f"{c.stability_slack!r},{c.runtime:.4f},{int(c.diverged)}"
            )
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        """Aligned table: one row per N, an error and a Rate column per theta."""
        cfg = self.config
        blocks = []
        for seed in cfg.seed_list:
            title = cfg.case if seed is None else f"{cfg.case} (seed {seed})"
            head = f"{'N':>6}" + "".join(f"{'theta=' + _fmt_theta(t):>14}{'Rate':>9}" for t in cfg.thetas)
            rows = [title, head, "-" * len(head)]
            for N in sorted(set(cfg.Ns)):
                line = f"{N:>6}"
                for t in cfg.thetas:
                    cell = next((c for c in self.cells if c.theta == t and c.N == N and c.seed == seed), None)
                    if cell is None or cell.diverged:
                        line += f"{'diverged':>14}{'':>9}"
                        continue
                    line += f"{cell.error:>14.4e}{_fmt_rate(cell):>9}"
                rows.append(line)
            blocks.append("\n".join(rows))
        if cfg.case == "random" and len(cfg.seeds) > 1:
            rows = [f"{cfg.case} (geometric mean over {len(cfg.seeds)} seeds)"]
            for t in cfg.thetas:
                errs, rates = self.ensemble_errors(t), self.ensemble_rates(t)
                parts = [f"N={N}: {e:.4e}" + (f" ({rates[N]:.4f})" if N in rates else "") for N, e in errs.items()]
                rows.append(f"  theta={_fmt_theta(t)}: " + ", ".join(parts))
            blocks.append("\n".join(rows))
        return "\n\n".join(blocks) + "\n"


def _fmt_theta(t: float) -> str:
    for text, val in (("1/2", 0.5), ("3/4", 0.75), ("1", 1.0)):
        if t == val:
            return text
    return f"{t:g}"


def _fmt_rate(cell: ConvergenceCell) -> str:
    if cell.rate is None:
        return ""
    # error quotient within 5% of one: print a dash, as for the constant-ratio case
    if abs(2.0**cell.rate - 1.0) < 0.05:
        return "-"
    return f"{cell.rate:.4f}"


def _run_cell(cfg: ExperimentConfig, op: SpectralLaplacian, theta: float, N: int, seed) -> ConvergenceCell:
    grid = op.grid
    exact, forcing = manufactured_solution(grid)
    mesh = cfg.mesh(N, seed)
    start = time.perf_counter()
    try:
        trace = wsbdf2_solve(op, mesh, theta, exact(0.0)[1:-1, 1:-1], forcing, keep_states=False)
    except DivergenceError:
        return ConvergenceCell(cfg.case, theta, N, seed, math.inf, diverged=True, max_ratio=mesh.max_ratio())
    elapsed = time.perf_counter() - start
    err = NORMS[cfg.norm](grid, grid.embed(trace.final_state) - exact(mesh.final_time))
    stab = check_l2_stability(trace)
    return ConvergenceCell(
        cfg.case, theta, N, seed, float(err), runtime=elapsed,
        stability_slack=stab.min_slack, stable=stab.passed, max_ratio=mesh.max_ratio(),
    )


def run_example(cfg: ExperimentConfig) -> ConvergenceReport:
    """Manufactured-solution convergence sweep over (theta, N, seed)."""
    op = SpectralLaplacian(cfg.Mx, cfg.My)
    jobs = [(t, N, s) for s in cfg.seed_list for t in cfg.thetas for N in sorted(set(cfg.Ns))]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            cells = list(pool.map(lambda a: _run_cell(cfg, op, *a), jobs))
    else:
        cells = [_run_cell(cfg, op, *a) for a in jobs]
    by_key = {(c.theta, c.N, c.seed): c for c in cells}
    for c in cells:
        prev = by_key.get((c.theta, c.N // 2, c.seed)) if c.N % 2 == 0 else None
        if prev is not None and not (c.diverged or prev.diverged) and c.error > 0 and prev.error > 0:
            c.rate = math.log2(prev.error / c.error)
    return ConvergenceReport(cfg, cells)


def ratio_table(thetas) -> list[tuple[float, float, float]]:
    return [(float(t), r_suboptimal(t), r_optimal(t)) for t in thetas]


def run_ratio_figures(thetas, probes, kmax: int = 10_000, out: str | Path | None = None) -> dict:
    """Threshold curves and constant-ratio ``l_k`` traces as CSV text.

    ``probes`` is a sequence of ``(theta, r)`` pairs.  Returns a mapping of
    file name to CSV content (also written to ``out`` when given).
    """
    files = {}
    lines = ["theta,r_p,r_s"]
    for t, rp, rs in ratio_table(thetas):
        lines.append(f"{t!r},{rp!r},{rs!r}")
    files["ratios.csv"] = "\n".join(lines) + "\n"
    for theta, r in probes:
        trace = lk_recursion(theta, np.full(kmax - 1, r))
        body = "\n".join(f"{k},{v!r}" for k, v in enumerate(trace.values, start=1))
        files[f"lk_theta{theta:g}_r{r:g}.csv"] = "k,l_k\n" + body + "\n"
    if out is not None:
        write_files(out, files)
    return files


def write_files(out, files: dict):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (path / name).write_text(text)


@dataclass
class DiagnosticRow:
    theta: float
    mesh_label: str
    kind: str
    passed: bool
    worst: float
    within_hypothesis: bool


def run_diagnostics(cfg: ExperimentConfig) -> list[DiagnosticRow]:
    """Energy decay for the unforced heat flow and the L2 bound for the forced run.

    The dissipation check only counts as a failure when every ratio of the
    mesh lies below ``r_s(theta)``; outside that range it is informative.
    """
    op = SpectralLaplacian(cfg.Mx, cfg.My)
    exact, forcing = manufactured_solution(op.grid)
    u0 = exact(0.0)[1:-1, 1:-1]
    rows = []
    for seed in cfg.seed_list:
        for N in sorted(set(cfg.Ns)):
            mesh = cfg.mesh(N, seed)
            label = f"{cfg.case}:N={N}" + ("" if seed is None else f":seed={seed}")
            for theta in cfg.thetas:
                inside = bool(np.all(mesh.ratios <= r_optimal(theta))) if theta >= 0.5 else False
                free = wsbdf2_solve(op, mesh, theta, u0)
                if N >= 2:
                    diss = check_dissipation(energy_trace(free, op))
                    rows.append(DiagnosticRow(theta, label, "dissipation", diss.passed, diss.worst_violation, inside))
                forced = wsbdf2_solve(op, mesh, theta, u0, forcing, keep_states=False)
                stab = check_l2_stability(forced)
                rows.append(DiagnosticRow(theta, label, "l2_bound", stab.passed, stab.min_slack, inside))
    return rows


def diagnostics_csv(rows: list[DiagnosticRow]) -> str:
    lines = ["theta,mesh,check,passed,worst,within_ratio_bound"]
    for r in rows:
        lines.append(f"{r.theta!r},{r.mesh_label},{r.kind},{int(r.passed)},{r.worst!r},{int(r.within_hypothesis)}")
    return "\n".join(lines) + "\n"


def config_summary(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)
