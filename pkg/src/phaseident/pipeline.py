"""End-to-end workflow: data -> derivatives -> patch CEE -> phase gate ->
regional identification -> boundary localization -> metrics and reports.

Everything downstream of the noise draw is deterministic, so a fixed
config + seed reproduces reports byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from . import boundary as bnd
from . import changepoint as cpt
from . import cover as cov
from . import evolve, metrics, simulate
from .config import RunConfig, config_hash, render_config
from .dataset import Grid2D, NoiseSpec, add_noise, load_grid
from .features import FEATURE_NAMES, FeatureSystem, N_FEATURES, assemble
from .ident import SparseModel, identify
from .metrics import EvalReport
from .numdiff import DenoiseSpec, DerivativeStack, build_derivative_stack, \
    sdd_denoise

_MAX_ROWS = 150_000


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage it occurred in."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineResult:
    report: EvalReport
    config: RunConfig
    grid: Grid2D                       # observed (noisy) data
    denoised: Grid2D
    stack: DerivativeStack
    cover: cov.PatchCover
    two_phase: bool
    models: dict                       # region name -> SparseModel
    initial_cover: np.ndarray | None = None
    band: cov.CoverBand | None = None
    pairs: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    density: bnd.DensityField | None = None
    spline: bnd.BoundaryEstimate | None = None
    scenario: simulate.Scenario | None = None


def grid_hash(grid: Grid2D) -> str:
    h = hashlib.sha256()
    h.update(np.array([grid.x_min, grid.x_max, grid.t_max], float).tobytes())
    h.update(np.ascontiguousarray(grid.values).tobytes())
    return h.hexdigest()[:16]


def auto_denoise_window(noise_percent: float) -> int:
    """Smoothing window scaled with the noise level (odd, 0 = none)."""
    if noise_percent <= 0:
        return 0
    if noise_percent <= 1:
        return 7
    if noise_percent <= 2:
        return 9
    if noise_percent <= 5:
        return 13
    return 17


def _thin(system: FeatureSystem, max_rows: int = _MAX_ROWS) -> FeatureSystem:
    """Deterministic row subsample with an odd stride (preserves the
    even/odd time split balance of the cross-validation score)."""
    n = system.n_rows
    if n <= max_rows:
        return system
    stride = int(np.ceil(n / max_rows))
    if stride % 2 == 0:
        stride += 1
    return FeatureSystem(system.matrix[::stride], system.response[::stride],
                         system.point_index[::stride])


def _resolve_data(config: RunConfig):
    """Return (scenario or None, clean grid)."""
    if config.input.endswith((".grid", ".csv")) or os.path.sep in config.input:
        if not os.path.exists(config.input):
            raise StageError("data", f"grid file not found: {config.input}")
        return None, load_grid(config.input)
    try:
        scenario = simulate.find_scenario(config.input)
    except KeyError as exc:
        raise StageError("data", str(exc)) from exc
    if config.nx or config.nt:
        scenario = scenario.with_grid(
            config.nx or scenario.nx, config.nt or scenario.nt,
            config.downsample_x or scenario.downsample_x)
    elif config.downsample_x:
        scenario = dataclasses.replace(scenario,
                                       downsample_x=config.downsample_x)
    return scenario, simulate.build(scenario)


def _identify_region(stack, mask, config, stage):
    try:
        system = _thin(assemble(stack, mask))
        return identify(system, config.k_max, config.trim_threshold)
    except ValueError as exc:
        raise StageError(stage, str(exc)) from exc


def _sample_abscissae(cover: cov.PatchCover) -> np.ndarray:
    """The n_p distinct patch-center x positions."""
    grid = cover.grid
    w = cover.half_width
    return grid.x_min + w * np.arange(1, cover.n_p + 1)


def run_pipeline(config: RunConfig, clean_grid: Grid2D | None = None,
                 scenario: simulate.Scenario | None = None) -> PipelineResult:
    """Execute the full workflow; see the package docs for the stage list.

    ``clean_grid``/``scenario`` bypass dataset generation when the caller
    already holds the noise-free solve (used by trial loops for caching).
    """
    config.validate()
    if clean_grid is None:
        scenario, clean_grid = _resolve_data(config)
    grid = clean_grid
    if config.noise_percent > 0:
        grid = add_noise(grid, NoiseSpec(config.noise_percent, config.seed))
    report = EvalReport(
        scenario=scenario.name if scenario else config.input,
        seed=config.seed, noise_percent=config.noise_percent,
        config_hash=config_hash(config), grid_hash=grid_hash(grid))

    window = config.denoise_window
    if window == 0:
        window = auto_denoise_window(config.noise_percent)
    denoised = grid
    spec = None
    if window >= 5:
        wt = window if config.denoise_window_t == -1 else config.denoise_window_t
        spec = DenoiseSpec(window, config.denoise_order,
                           config.denoise_passes, window_t=wt)
        # Evolution errors compare one-step predictions against observed
        # next-time values, so the evolution grid gets the extra smoothing
        # pass along time as well.
        denoised = sdd_denoise(grid, DenoiseSpec(window, config.denoise_order,
                                                 config.denoise_passes,
                                                 window_t=window))
    try:
        # The stack re-applies SDD internally, so hand it the raw grid.
        stack = build_derivative_stack(grid, spec)
        # Patch scoring gets its own stack with the smoothing pass along
        # time always on and a quadratic fit: boundary detection compares
        # patch CEEs, and without response denoising the per-patch noise
        # floor swamps the boundary misfit.  Regional identification keeps
        # the configured stack, where time smoothing would bias fast
        # coherent dynamics.
        detect_stack = stack
        if spec is not None and (spec.window_t != spec.window
                                 or spec.poly_degree != 2):
            detect_stack = build_derivative_stack(
                grid, DenoiseSpec(window, 2, config.denoise_passes,
                                  window_t=window))
    except ValueError as exc:
        raise StageError("derivatives", str(exc)) from exc

    try:
        cover = cov.build_cover(grid, config.n_p)
        # Patch fits run over the full dictionary with trimming off.  A
        # rich fit soaks up smooth local misfit (discretization error of
        # sharp coherent features), so single-phase patches score near the
        # noise floor, while a model switch inside a patch cannot be
        # absorbed by any one model and keeps its CEE high.
        cover = cov.score_patches(cover, detect_stack, N_FEATURES, 0.0)
        r = cov.r_beta(cover, config.beta)
    except ValueError as exc:
        raise StageError("cover", str(exc)) from exc
    report.r_beta = r
    two_phase = r >= config.r_threshold
    report.two_phase = two_phase

    result = PipelineResult(report=report, config=config, grid=grid,
                            denoised=denoised, stack=stack, cover=cover,
                            two_phase=two_phase, models={},
                            scenario=scenario)
    if not two_phase:
        model, _ = _identify_region(stack, stack.valid_mask, config,
                                    "identify")
        result.models["global"] = model
        report.supports["global"] = model.support
        report.coefficients["global"] = _named(model)
        if scenario is not None and not scenario.two_phase:
            report.jsc_values["global"] = metrics.jsc(
                model.support, scenario.model1.support)
            report.coefficient_errors["global"] = metrics.coefficient_errors(
                model, scenario.model1)
        return result

    try:
        initial = cov.build_initial_cover(cover, config.noise_percent > 0)
        min_band = int(round(2 * cover.half_height / grid.dt))
        band = cov.convexify(initial, grid, min_band)
    except (ValueError, AssertionError) as exc:
        raise StageError("cover", str(exc)) from exc
    result.initial_cover = initial
    result.band = band

    tt = grid.t[np.newaxis, :]
    mask1 = tt <= band.gamma_lo[:, np.newaxis]
    mask2 = tt >= band.gamma_hi[:, np.newaxis]
    model1, _ = _identify_region(stack, mask1, config, "identify-region1")
    model2, _ = _identify_region(stack, mask2, config, "identify-region2")
    result.models = {"region1": model1, "region2": model2}
    for name, model in result.models.items():
        report.supports[name] = model.support
        report.coefficients[name] = _named(model)
    if scenario is not None and scenario.two_phase:
        for name, truth in (("region1", scenario.model1),
                            ("region2", scenario.model2)):
            report.jsc_values[name] = metrics.jsc(
                result.models[name].support, truth.support)
            report.coefficient_errors[name] = metrics.coefficient_errors(
                result.models[name], truth)

    rhs1 = evolve.discretize(model1)
    rhs2 = evolve.discretize(model2)
    m0 = config.m0
    if m0 < 0:
        m0 = int(np.floor(2 * cover.half_height / (5 * grid.dt)))
    exact_center = config.noise_percent == 0

    pairs, estimates = [], []
    for x in _sample_abscissae(cover):
        xg = float(grid.x[int(np.argmin(np.abs(grid.x - x)))])
        try:
            pair = evolve.evolution_errors(denoised, band, rhs1, rhs2, xg,
                                           exact_center=exact_center)
            est = cpt.estimate(pair, m0, tuple(config.levels), config.reg)
        except ValueError as exc:
            raise StageError("changepoint", str(exc)) from exc
        pairs.append(pair)
        estimates.append(est)
    result.pairs = pairs
    result.estimates = estimates

    try:
        density = bnd.build_density(
            [est.pmf for est in estimates],
            np.array([p.x for p in pairs]),
            np.array([p.times[0] for p in pairs]),
            np.array([p.times[-1] for p in pairs]),
            grid.dt, m0, grid.x)
        spline = bnd.fit_spline(density, config.n_basis, config.lam)
        bands, flags = bnd.confidence_band(density, spline.gamma_hat,
                                           tuple(config.levels))
        spline = dataclasses.replace(spline, band=bands, band_flags=flags)
    except ValueError as exc:
        raise StageError("boundary", str(exc)) from exc
    result.density = density
    result.spline = spline

    if scenario is not None and scenario.two_phase:
        w = cover.half_width
        report.boundary_error = bnd.boundary_error(
            spline.gamma_hat, scenario.gamma, grid.x_min, grid.x_max, w)
        level = config.levels[0]
        xs = np.linspace(grid.x_min + 2 * w, grid.x_max - 2 * w, 81)
        radii = np.interp(xs, *spline.band[level])
        offsets = np.abs(np.asarray(spline.gamma_hat(xs))
                         - np.asarray(scenario.gamma(xs)))
        report.coverage = float(np.mean(offsets <= radii))
    return result


def _named(model: SparseModel) -> dict:
    return {FEATURE_NAMES[k]: float(c)
            for k, c in zip(model.support, model.coefficients)}


def render_report(result: PipelineResult) -> str:
    """Fixed-field plain-text report (deterministic)."""
    r = result.report
    lines = [
        "phaseident report",
        f"scenario = {r.scenario}",
        f"seed = {r.seed}",
        f"noise_percent = {r.noise_percent:g}",
        f"config_hash = {r.config_hash}",
        f"grid_hash = {r.grid_hash}",
        f"r_beta = {r.r_beta:.6g}",
        f"two_phase = {r.two_phase}",
    ]
    for name in sorted(r.supports):
        feats = ", ".join(f"{k}: {v:+.6f}"
                          for k, v in r.coefficients[name].items())
        lines.append(f"model[{name}] = {{{feats}}}")
    for name in sorted(r.jsc_values):
        lines.append(f"jsc[{name}] = {r.jsc_values[name]:.6f}")
    if r.boundary_error is not None:
        lines.append(f"boundary_error = {r.boundary_error:.8f}")
    if r.coverage is not None:
        lines.append(f"coverage = {r.coverage:.6f}")
    lines.append("")
    lines.append("# resolved config")
    for cfg_line in render_config(result.config).splitlines():
        lines.append(f"# {cfg_line}")
    return "\n".join(lines) + "\n"


def write_artifacts(result: PipelineResult) -> list[str]:
    """Write report and plot-ready tables into config.output_dir."""
    out = result.config.output_dir
    if not out:
        return []
    os.makedirs(out, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        path = os.path.join(out, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)

    emit("report.txt", render_report(result))
    if result.band is not None:
        grid = result.grid
        rows = ["x gamma_lo gamma_hi"]
        for x, lo, hi in zip(grid.x, result.band.gamma_lo,
                             result.band.gamma_hi):
            rows.append(f"{x:.8g} {lo:.8g} {hi:.8g}")
        emit("band.txt", "\n".join(rows) + "\n")
    if result.spline is not None:
        grid = result.grid
        level = result.config.levels[0]
        xs, radii = result.spline.band[level]
        gh = result.spline.gamma_hat(xs)
        rows = [f"x gamma_hat radius@{level:g}"]
        for x, g, e in zip(xs, gh, radii):
            rows.append(f"{x:.8g} {g:.8g} {e:.8g}")
        emit("boundary.txt", "\n".join(rows) + "\n")
    if result.pairs:
        rows = ["x t e_left e_right"]
        for pair in result.pairs:
            for t, el, er in zip(pair.times, pair.e_left, pair.e_right):
                rows.append(f"{pair.x:.8g} {t:.8g} {el:.8g} {er:.8g}")
        emit("errors.txt", "\n".join(rows) + "\n")
    return written


@dataclass
class TrialSummary:
    n_trials: int
    n_success: int
    supports: dict          # region -> most frequent support tuple
    support_rates: dict     # region -> fraction of runs with that support
    coefficients: dict      # region -> {feature: (mean, std)}
    mean_jsc: dict
    mean_boundary_error: float | None
    coverage_rate: float | None
    reports: list
    failures: list


def run_trials(config: RunConfig, n: int | None = None) -> TrialSummary:
    """Repeat the pipeline under distinct seeds and aggregate."""
    n = config.trials if n is None else n
    if n < 1:
        raise ValueError("trial count must be >= 1")
    scenario, clean = _resolve_data(config)
    reports, failures = [], []
    for trial in range(n):
        cfg = dataclasses.replace(config, seed=config.seed + trial,
                                  output_dir="")
        try:
            reports.append(run_pipeline(cfg, clean, scenario).report)
        except StageError as exc:
            failures.append((cfg.seed, str(exc)))
    if not reports:
        raise StageError("trials", f"all {n} trials failed: {failures}")

    regions = sorted({name for r in reports for name in r.supports})
    supports, rates, coeffs, mean_jsc = {}, {}, {}, {}
    for name in regions:
        pool = [r.supports[name] for r in reports if name in r.supports]
        uniq = sorted(set(pool), key=lambda s: (-pool.count(s), s))
        supports[name] = uniq[0]
        rates[name] = pool.count(uniq[0]) / len(pool)
        stats = {}
        chosen = [r for r in reports if r.supports.get(name) == uniq[0]]
        for feat in sorted({k for r in chosen
                            for k in r.coefficients[name]}):
            vals = np.array([r.coefficients[name][feat] for r in chosen])
            stats[feat] = (float(vals.mean()), float(vals.std()))
        coeffs[name] = stats
        jvals = [r.jsc_values[name] for r in reports
                 if name in r.jsc_values]
        if jvals:
            mean_jsc[name] = float(np.mean(jvals))
    evals = [r.boundary_error for r in reports
             if r.boundary_error is not None]
    covs = [r.coverage for r in reports if r.coverage is not None]
    return TrialSummary(
        n_trials=n, n_success=len(reports), supports=supports,
        support_rates=rates, coefficients=coeffs, mean_jsc=mean_jsc,
        mean_boundary_error=float(np.mean(evals)) if evals else None,
        coverage_rate=float(np.mean(covs)) if covs else None,
        reports=reports, failures=failures)


def render_trial_summary(summary: TrialSummary, config: RunConfig) -> str:
    lines = [
        "phaseident trial summary",
        f"trials = {summary.n_trials}",
        f"successes = {summary.n_success}",
    ]
    for name in sorted(summary.supports):
        feats = ", ".join(
            f"{k}: {m:+.6f} +/- {s:.6f}"
            for k, (m, s) in summary.coefficients[name].items())
        lines.append(f"model[{name}] = {{{feats}}} "
                     f"(support rate {summary.support_rates[name]:.2f})")
    for name in sorted(summary.mean_jsc):
        lines.append(f"mean_jsc[{name}] = {summary.mean_jsc[name]:.6f}")
    if summary.mean_boundary_error is not None:
        lines.append(f"mean_boundary_error = "
                     f"{summary.mean_boundary_error:.8f}")
    if summary.coverage_rate is not None:
        lines.append(f"coverage_rate = {summary.coverage_rate:.6f}")
    for seed, msg in summary.failures:
        lines.append(f"failure[seed={seed}] = {msg}")
    lines.append("")
    lines.append("# resolved config")
    for cfg_line in render_config(config).splitlines():
        lines.append(f"# {cfg_line}")
    return "\n".join(lines) + "\n"
