"""Experiment drivers: boundary-slope sweep, dynamics/Sobolev scatter, and
patch-size effect study.  Each returns plain tabular data."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import changepoint as cpt
from . import cover as cov
from . import metrics, simulate
from .config import RunConfig
from .features import assemble
from .ident import identify
from .pipeline import StageError, run_pipeline, _thin


def count_patches(cover: cov.PatchCover, mask: np.ndarray) -> int:
    """Patches of the temporal-interior pool intersecting a raster mask."""
    n = 0
    for p in cover.interior_temporal():
        sx, st = cov.patch_index_ranges(cover, p)
        if mask[sx, st].any():
            n += 1
    return n


@dataclass
class SlopeStudyRow:
    slope: float
    errors: list = field(default_factory=list)     # e_Gamma per trial
    n1: list = field(default_factory=list)         # patches in C
    n2: list = field(default_factory=list)         # patches in the band

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))


def slope_study(config: RunConfig,
                slopes=(0.03, 0.045, 0.06, 0.08, 0.1),
                trials: int | None = None) -> list[SlopeStudyRow]:
    """Sweep the boundary slope s and collect e_Gamma, N1 and N2."""
    trials = config.trials if trials is None else trials
    rows = []
    for s in slopes:
        scenario = simulate.bt_slope_scenario(s)
        if config.nx or config.nt:
            scenario = scenario.with_grid(
                config.nx or scenario.nx, config.nt or scenario.nt,
                config.downsample_x or scenario.downsample_x)
        clean = simulate.build(scenario)
        row = SlopeStudyRow(s)
        for trial in range(trials):
            cfg = dataclasses.replace(config, input=scenario.name,
                                      seed=config.seed + trial,
                                      output_dir="")
            try:
                result = run_pipeline(cfg, clean, scenario)
            except StageError:
                continue
            if result.report.boundary_error is None:
                continue
            row.errors.append(result.report.boundary_error)
            row.n1.append(count_patches(result.cover, result.initial_cover))
            row.n2.append(count_patches(result.cover, result.band.mask))
        rows.append(row)
    return rows


def render_slope_study(rows: list[SlopeStudyRow]) -> str:
    out = ["slope mean_e_gamma std_e_gamma mean_n1 mean_n2 trials"]
    for row in rows:
        out.append(f"{row.slope:g} {np.mean(row.errors):.8f} "
                   f"{np.std(row.errors):.8f} {np.mean(row.n1):.2f} "
                   f"{np.mean(row.n2):.2f} {len(row.errors)}")
    return "\n".join(out) + "\n"


def sobolev_study(config: RunConfig) -> list[tuple[float, float, float]]:
    """Per sample column: (x, peak discrepancy, Sobolev-type norm)."""
    result = run_pipeline(config)
    if not result.two_phase:
        raise StageError("sobolev-study", "scenario was gated single-phase")
    rows = []
    for pair in result.pairs:
        n_steps = pair.times.size - 1
        m0 = result.config.m0
        if m0 < 0:
            m0 = int(np.floor(2 * result.cover.half_height
                              / (5 * result.grid.dt)))
        m0_eff = min(max(m0, 1), max((n_steps - 1) // 2, 1))
        dt = float(pair.times[1] - pair.times[0])
        p_l = cpt.pmf_from_cusum(cpt.cusum(pair.e_left, m0_eff), dt,
                                 m0_eff, "left")
        p_r = cpt.pmf_from_cusum(cpt.cusum(pair.e_right, m0_eff), dt,
                                 m0_eff, "right")
        eps = metrics.peak_discrepancy(p_l, p_r, m0_eff, n_steps)
        try:
            ns = metrics.sobolev_norm(result.stack, pair.x, result.band)
        except ValueError:
            continue
        rows.append((pair.x, eps, ns))
    return rows


def render_sobolev_study(rows) -> str:
    out = ["x peak_discrepancy sobolev_norm"]
    for x, eps, ns in rows:
        out.append(f"{x:.8g} {eps:.8f} {ns:.8f}")
    return "\n".join(out) + "\n"


@dataclass
class PatchSizeRow:
    size: int
    avg_cee_inconsistent: list = field(default_factory=list)
    avg_cee_consistent: list = field(default_factory=list)
    jsc_inconsistent: list = field(default_factory=list)
    jsc_consistent: list = field(default_factory=list)


def _score_window(stack, config, window) -> tuple[float, tuple]:
    sx, st = window
    mask = np.zeros(stack.valid_mask.shape, dtype=bool)
    mask[sx, st] = True
    mask &= stack.valid_mask
    n_points = int(mask.sum())
    system = _thin(assemble(stack, mask))
    model, report = identify(system, config.k_max, config.trim_threshold)
    return metrics.average_cee(report.value, n_points), model.support


def patchsize_study(config: RunConfig, sizes=(10, 40, 100, 200, 400),
                    n_inconsistent: int = 20,
                    n_consistent: int = 20) -> list[PatchSizeRow]:
    """Average CEE and patch-wise JSC on sampled square patches.

    Inconsistent patches straddle the boundary; consistent patches sit
    entirely inside one region (half each).  Sampling is seeded.
    """
    scenario, result = _study_pipeline_inputs(config)
    stack, grid = result.stack, result.grid
    gam = scenario.gamma(grid.x)
    s1, s2 = scenario.model1.support, scenario.model2.support
    rng = np.random.default_rng(config.seed)
    rows = []
    for size in sizes:
        if size + 4 >= grid.nx or size + 1 >= grid.nt:
            raise StageError("patchsize-study",
                             f"patch size {size} exceeds the grid")
        row = PatchSizeRow(size)
        pools = {"inc": [], "lo": [], "hi": []}
        for j0 in range(2, grid.nx - 2 - size):
            g_lo = gam[j0:j0 + size].min()
            g_hi = gam[j0:j0 + size].max()
            for n0 in range(0, grid.nt - 1 - size):
                t_lo, t_hi = grid.t[n0], grid.t[n0 + size - 1]
                if t_hi < g_lo:
                    pools["lo"].append((j0, n0))
                elif t_lo > g_hi:
                    pools["hi"].append((j0, n0))
                else:
                    pools["inc"].append((j0, n0))
        half = n_consistent // 2
        wanted = (("inc", n_inconsistent, row.avg_cee_inconsistent,
                   row.jsc_inconsistent),
                  ("lo", half, row.avg_cee_consistent, row.jsc_consistent),
                  ("hi", n_consistent - half, row.avg_cee_consistent,
                   row.jsc_consistent))
        for key, count, cee_out, jsc_out in wanted:
            pool = pools[key]
            if not pool:
                continue
            picks = rng.choice(len(pool), size=min(count, len(pool)),
                               replace=False)
            for idx in sorted(picks):
                j0, n0 = pool[idx]
                window = (slice(j0, j0 + size), slice(n0, n0 + size))
                try:
                    avg, support = _score_window(stack, config, window)
                except ValueError:
                    continue
                cee_out.append(avg)
                jsc_out.append(metrics.patchwise_jsc(support, s1, s2))
        rows.append(row)
    return rows


@dataclass
class _StackedData:
    stack: object
    grid: object


def _study_pipeline_inputs(config: RunConfig):
    from .dataset import NoiseSpec, add_noise
    from .numdiff import DenoiseSpec, build_derivative_stack, sdd_denoise
    from .pipeline import _resolve_data, auto_denoise_window
    scenario, clean = _resolve_data(config)
    if scenario is None or not scenario.two_phase:
        raise StageError("patchsize-study",
                         "study requires a two-phase scenario input")
    grid = clean
    if config.noise_percent > 0:
        grid = add_noise(grid, NoiseSpec(config.noise_percent, config.seed))
    window = config.denoise_window
    if window == 0:
        window = auto_denoise_window(config.noise_percent)
    denoised = grid
    if window >= 5:
        denoised = sdd_denoise(grid, DenoiseSpec(window, 2,
                                                 config.denoise_passes))
    stack = build_derivative_stack(denoised)
    return scenario, _StackedData(stack, grid)


def render_patchsize_study(rows: list[PatchSizeRow]) -> str:
    out = ["size group mean_avg_cee mean_jsc count"]
    for row in rows:
        for group, cees, jscs in (
                ("inconsistent", row.avg_cee_inconsistent,
                 row.jsc_inconsistent),
                ("consistent", row.avg_cee_consistent, row.jsc_consistent)):
            if cees:
                out.append(f"{row.size} {group} {np.mean(cees):.8g} "
                           f"{np.mean(jscs):.6f} {len(cees)}")
            else:
                out.append(f"{row.size} {group} nan nan 0")
    return "\n".join(out) + "\n"
