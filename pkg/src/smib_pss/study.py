"""Full comparison pipeline: open loop, conventional PSS, GA- and PSO-tuned
PSS for every scenario, plus the tables and trajectories it writes."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Scenario, ScenarioFile
from .modal import analyze, eigenvalues
from .model import (
    OperatingCondition,
    PssParams,
    SystemParams,
    build_closed_loop_for,
    build_open_loop_for,
)
from .optimizers import PSS_BOUNDS, OptimizationResult, ga_optimize, pso_optimize, pss_fitness
from .timesim import (
    ResponseMetrics,
    SimConfig,
    Trajectory,
    response_metrics,
    simulate,
    steady_state,
    write_trajectory_csv,
)

log = logging.getLogger(__name__)

METHODS = ("open", "cpss", "ga", "pso")
OPTIMIZED = ("ga", "pso")
DAMPING_COLUMNS = {"open": "open_loop", "cpss": "cpss", "ga": "gapss", "pso": "psopss"}


@dataclass
class VariantResult:
    method: str
    pss: PssParams | None
    eigenvalues: list[complex]
    em_zeta: float
    stable: bool
    speed: ResponseMetrics | None = None
    angle: ResponseMetrics | None = None
    seed_fitness: dict[int, float] = field(default_factory=dict)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def passes(self, threshold: float) -> bool:
        return math.isfinite(self.em_zeta) and self.em_zeta >= threshold


@dataclass
class ScenarioResult:
    scenario: Scenario
    variants: dict[str, VariantResult] = field(default_factory=dict)
    error: str | None = None
    files: list[str] = field(default_factory=list)


@dataclass
class StudyReport:
    scenarios: list[ScenarioResult]
    zeta_threshold: float = 0.06
    files: list[str] = field(default_factory=list)

    def failures(self) -> list[str]:
        """Scenario/method pairs whose tuned stabilizer misses the threshold."""
        bad = []
        for sr in self.scenarios:
            if sr.error:
                bad.append(f"{sr.scenario.id}: {sr.error}")
                continue
            for m in OPTIMIZED:
                v = sr.variants.get(m)
                if v is not None and not v.passes(self.zeta_threshold):
                    bad.append(f"{sr.scenario.id}/{m}: zeta {v.em_zeta:.5f} < {self.zeta_threshold}")
        return bad

    @property
    def exit_code(self) -> int:
        return 2 if self.failures() else 0


# ---------------------------------------------------------------------------


def evaluate_variant(
    system: SystemParams,
    op: OperatingCondition,
    method: str,
    pss: PssParams | None,
    sim: SimConfig,
) -> VariantResult:
    model = build_open_loop_for(system, op) if pss is None else build_closed_loop_for(system, pss, op)
    eigs = eigenvalues(model.A)
    modes = analyze(model)
    stable = bool(np.all(eigs.real < 0))
    traj = simulate(model, dataclasses.replace(sim, disturbance=op.delta_P_L))
    ref = float(steady_state(model, op.delta_P_L)[model.index("ddelta")]) if stable else 0.0
    return VariantResult(
        method=method,
        pss=pss,
        eigenvalues=sorted_eigenvalues(eigs),
        em_zeta=modes.min_em_zeta,
        stable=stable,
        speed=response_metrics(traj, "domega"),
        angle=response_metrics(traj, "ddelta", reference=ref),
        trajectory=traj,
    )


def tune(system: SystemParams, op: OperatingCondition, method: str, sf: ScenarioFile) -> tuple[PssParams, dict[int, float]]:
    """Run the optimizer once per seed; keep the best (first seed on ties)."""
    fitness = pss_fitness(system, op, sf.T_w, sf.fitness_scope)
    results: dict[int, OptimizationResult] = {}
    for seed in sf.seeds:
        if method == "ga":
            results[seed] = ga_optimize(fitness, PSS_BOUNDS, dataclasses.replace(sf.ga, seed=seed))
        elif method == "pso":
            results[seed] = pso_optimize(fitness, PSS_BOUNDS, dataclasses.replace(sf.pso, seed=seed))
        else:
            raise ValueError(f"unknown method {method!r}")
    best_seed = max(results, key=lambda s: (results[s].best_fitness, -sf.seeds.index(s)))
    pss = PssParams.from_vector(results[best_seed].best_x, sf.T_w)
    return pss, {s: r.best_fitness for s, r in results.items()}


def run_scenario(sf: ScenarioFile, sc: Scenario, methods=OPTIMIZED) -> ScenarioResult:
    sr = ScenarioResult(sc)
    try:
        sr.variants["open"] = evaluate_variant(sf.system, sc.op, "open", None, sf.sim)
        if sc.cpss is not None:
            sr.variants["cpss"] = evaluate_variant(sf.system, sc.op, "cpss", sc.cpss, sf.sim)
        for m in methods:
            pss, per_seed = tune(sf.system, sc.op, m, sf)
            v = evaluate_variant(sf.system, sc.op, m, pss, sf.sim)
            v.seed_fitness = per_seed
            sr.variants[m] = v
    except (ValueError, np.linalg.LinAlgError) as exc:
        log.warning("scenario %s failed: %s", sc.id, exc)
        sr.error = f"{type(exc).__name__}: {exc}"
    return sr


def run_study(sf: ScenarioFile, output_dir, fmt: str = "csv", methods=OPTIMIZED) -> StudyReport:
    report = StudyReport([run_scenario(sf, sc, methods) for sc in sf.scenarios], sf.zeta_threshold)
    emit_tables(report, output_dir, fmt)
    return report


# ---------------------------------------------------------------------------
# Formatting and output


def sorted_eigenvalues(eigs) -> list[complex]:
    """Conjugate pairs adjacent (positive imaginary part first), most
    negative real part first."""
    eigs = [complex(round(z.real, 12), round(z.imag, 12)) for z in eigs]
    return sorted(eigs, key=lambda z: (z.real, -abs(z.imag), -z.imag))


def format_eigenvalue(z: complex) -> str:
    if z.imag == 0:
        return f"{z.real:.4f}"
    return f"{z.real:.4f} ± j{abs(z.imag):.4f}"


def eigen_pairs(eigs: list[complex]) -> list[complex]:
    """One representative (imag >= 0) per conjugate pair."""
    return [z for z in eigs if z.imag >= 0]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _write_rows(path: Path, header, rows, fmt: str) -> Path:
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[_fmt(v) for v in r] for r in rows])
    else:
        cells = [list(header)] + [[_fmt(v) for v in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        lines = ["  ".join(c.rjust(wd) for c, wd in zip(r, widths)).rstrip() for r in cells]
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        path.write_text("\n".join(lines) + "\n")
    return path


def scenario_tables(sr: ScenarioResult) -> dict[str, tuple[list[str], list[list]]]:
    present = [m for m in METHODS if m in sr.variants]
    eig_rows = []
    for m in present:
        for z in eigen_pairs(sr.variants[m].eigenvalues):
            eig_rows.append([m, float(z.real), float(z.imag), format_eigenvalue(z)])
    damping_rows = [[sr.variants[m].em_zeta if m in sr.variants else None for m in METHODS]]
    param_rows = []
    for m in present:
        v = sr.variants[m]
        if v.pss is None:
            continue
        seeds = " ".join(f"{s}:{f!r}" for s, f in v.seed_fitness.items())
        param_rows.append([m, v.pss.K_s, v.pss.T1, v.pss.T2, v.pss.T_w, seeds])
    metric_rows = []
    for m in present:
        v = sr.variants[m]
        metric_rows.append([
            m, v.speed.ise_speed, v.speed.ise_angle, v.speed.peak_overshoot, v.angle.peak_overshoot,
            v.speed.settling_time, v.angle.settling_time, v.stable,
        ])
    return {
        "eigen": (["method", "real", "imag", "eigenvalue"], eig_rows),
        "damping": ([DAMPING_COLUMNS[m] for m in METHODS], damping_rows),
        "params": (["method", "K_s", "T1", "T2", "T_w", "seed_fitness"], param_rows),
        "metrics": (
            ["method", "ise_speed", "ise_angle", "peak_speed", "peak_angle",
             "settling_speed", "settling_angle", "stable"],
            metric_rows,
        ),
    }


def emit_tables(report: StudyReport, output_dir, fmt: str = "csv") -> list[str]:
    if fmt not in ("csv", "txt"):
        raise ValueError(f"unknown table format {fmt!r}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sr in report.scenarios:
        sdir = out / sr.scenario.id
        sdir.mkdir(exist_ok=True)
        sr.files = []
        if sr.error is None:
            for name, (header, rows) in scenario_tables(sr).items():
                sr.files.append(str(_write_rows(sdir / f"{name}.{fmt}", header, rows, fmt).relative_to(out)))
            for m, v in sr.variants.items():
                if v.trajectory is not None:
                    p = write_trajectory_csv(v.trajectory, sdir / f"traj-{m}.csv")
                    sr.files.append(str(p.relative_to(out)))
        written += sr.files
    written.append("report.txt")
    report.files = written
    (out / "report.txt").write_text(render_report(report))
    return written


def render_report(report: StudyReport) -> str:
    lines = [
        "PSS tuning study",
        f"damping threshold zeta_T = {report.zeta_threshold}",
        "",
    ]
    for sr in report.scenarios:
        op = sr.scenario.op
        lines.append(
            f"scenario {sr.scenario.id}: P={op.P} Q={op.Q} dP_L={op.delta_P_L} "
            f"x_e_scale={op.x_e_scale} k_a_scale={op.k_a_scale}"
        )
        if sr.scenario.description:
            lines.append(f"  {sr.scenario.description}")
        if sr.error:
            lines += [f"  FAILED: {sr.error}", ""]
            continue
        for m in METHODS:
            v = sr.variants.get(m)
            if v is None:
                continue
            params = "" if v.pss is None else f" [K_s={v.pss.K_s:.4f} T1={v.pss.T1:.4f} T2={v.pss.T2:.4f}]"
            verdict = "pass" if v.passes(report.zeta_threshold) else "FAIL"
            stab = "stable" if v.stable else "UNSTABLE"
            lines.append(
                f"  {m:<5} zeta_em={v.em_zeta:9.5f} {verdict} {stab:<8} "
                f"ISE(domega)={v.speed.ise_speed:.4e} peak(ddelta)={v.angle.peak_overshoot:.5f}{params}"
            )
            lines.append("        " + ", ".join(format_eigenvalue(z) for z in eigen_pairs(v.eigenvalues)))
        lines.append("")
    fails = report.failures()
    lines.append("result: " + ("all tuned stabilizers meet the threshold" if not fails else "threshold missed"))
    lines += [f"  {f}" for f in fails]
    lines += ["", "files:"] + [f"  {f}" for f in report.files if f != "report.txt"]
    return "\n".join(lines) + "\n"


def read_damping_table(path) -> dict[str, float | None]:
    with Path(path).open(newline="") as fh:
        header, row = list(csv.reader(fh))[:2]
    return {h: (float(v) if v else None) for h, v in zip(header, row)}
