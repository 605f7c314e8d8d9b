//! Execute one scenario: build the discrete problem, run the solver, check
//! the declared invariants, compute diagnostics and emit files.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use sktlab_core::analysis::{
    estimate_ratio, level_set_sum, lp_norm, parabolic_maximal, MaximalConfig,
};
use sktlab_core::fixedpoint::{picard_solve, PicardConfig, PicardSolution};
use sktlab_core::mesh::{cell_integral, grad_sq_st_integral, Region, TensorField};
use sktlab_core::parabolic::energy_report;
use sktlab_core::skt::{blowup_monitor, m0_bound, skt_run, w1p_norm, SKTState};
use sktlab_core::{Error as CoreError, Field, Grid, SpaceTimeField, TimeAxis};

use crate::config::{DiagnosticSpec, ProfileSpec, ScenarioConfig, ScenarioKind, TensorSpec};
use crate::fieldio::{read_spacetime, write_monitor_csv, write_spacetime, MonitorRow};
use crate::profiles;
use crate::report::{InvariantCheck, RunReport};

/// Tolerances the run-level invariants are asserted at.
pub mod tolerances {
    /// Solution and iterate bracket slack for the scalar model.
    pub const BRACKET: f64 = 1e-10;
    /// Non-negativity slack for the system species.
    pub const NONNEGATIVITY: f64 = 1e-12;
    /// Slack over the maximum-principle ceiling of `v`.
    pub const V_CEILING: f64 = 1e-10;
    /// Slack factor for the discrete mass growth bound.
    pub const MASS_GROWTH: f64 = 5.0;
}

/// Run a scenario and write `report.json` (plus any field/CSV files) into
/// `out_dir`. Solver aborts are captured in the report, not returned as
/// errors; `Err` is reserved for IO and configuration problems.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunReport> {
    cfg.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("create output dir {}", out_dir.display()))?;
    let started = Instant::now();
    let mut effective = cfg.clone();
    if let Some(seed) = seed_override {
        effective.seed = Some(seed);
    }
    let mut report = RunReport::new(effective.clone());
    let seed_mix = effective.seed.unwrap_or(0);

    let grid = effective.grid.build()?;
    let time = effective.time.build()?;
    match effective.kind {
        ScenarioKind::ScalarModel => {
            run_scalar(&effective, &grid, &time, seed_mix, out_dir, &mut report)?
        }
        ScenarioKind::Skt => run_skt(&effective, &grid, &time, seed_mix, out_dir, &mut report)?,
        ScenarioKind::DiagnosticsOnly => run_diagnostics_only(&effective, &mut report)?,
    }

    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    report.seal();
    report.write(&out_dir.join("report.json"))?;
    Ok(report)
}

fn build_coefficient(cfg: &ScenarioConfig, grid: &Grid, ellipticity: f64) -> Result<TensorField> {
    let spec = cfg.coefficient.clone().unwrap_or(TensorSpec::Identity);
    Ok(profiles::tensor(&spec, grid, ellipticity)?)
}

fn forcing_field(
    cfg: &ScenarioConfig,
    grid: &Grid,
    time: &TimeAxis,
    seed_mix: u64,
) -> Result<SpaceTimeField> {
    Ok(match &cfg.forcing {
        Some(spec) => {
            let f = profiles::evaluate(spec, grid, seed_mix)?;
            SpaceTimeField::extend(&f, *time)
        }
        None => SpaceTimeField::constant(*grid, *time, 0.0),
    })
}

fn run_scalar(
    cfg: &ScenarioConfig,
    grid: &Grid,
    time: &TimeAxis,
    seed_mix: u64,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let params = cfg.model.as_ref().unwrap().build()?;
    let a = build_coefficient(cfg, grid, params.ellipticity())?;
    let c = forcing_field(cfg, grid, time, seed_mix)?;
    let u0 = profiles::evaluate(cfg.initial.as_ref().unwrap(), grid, seed_mix)?;
    let picard = cfg.picard.clone().unwrap_or_default();
    let pcfg = PicardConfig {
        max_iterations: picard.max_iterations,
        l2_tolerance: picard.l2_tolerance,
        relaxation: picard.relaxation,
    };
    let solution = match picard_solve(&params, &a, &c, &u0, &pcfg) {
        Ok(s) => s,
        Err(err) => {
            report.failure = Some(format!("solver abort: {err}"));
            return Ok(());
        }
    };
    scalar_invariants(&params, &solution, report);
    report.metrics.insert("picard_iterations".into(), solution.gaps.len() as f64);
    report.metrics.insert("picard_final_gap".into(), *solution.gaps.last().unwrap_or(&0.0));
    report.arrays.insert("picard_gaps".into(), solution.gaps.clone());

    for diag in &cfg.diagnostics {
        scalar_diagnostic(diag, cfg, &params, &a, &c, &solution.u, report)?;
    }
    if cfg.emit_fields {
        let files = write_spacetime(out_dir, "u", &solution.u)?;
        report.files.extend(files);
    }
    Ok(())
}

fn scalar_invariants(
    params: &sktlab_core::fixedpoint::ModelParams,
    solution: &PicardSolution,
    report: &mut RunReport,
) {
    let ceiling = 1.0 / params.lambda();
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for &(lo, hi) in &solution.iterate_range {
        low = low.min(lo);
        high = high.max(hi);
    }
    let margin_low = low + tolerances::BRACKET;
    let margin_high = ceiling + tolerances::BRACKET - high;
    report.invariants.push(InvariantCheck::from_margin(
        "iterate-bracket",
        margin_low.min(margin_high),
        format!("iterate values stayed in [{low:.3e}, {high:.3e}], ceiling {ceiling}"),
    ));
    let u = &solution.u;
    let (umin, umax) = (u.min(), u.max());
    report.invariants.push(InvariantCheck::from_margin(
        "solution-bracket",
        (umin + tolerances::BRACKET).min(ceiling + tolerances::BRACKET - umax),
        format!("solution in [{umin:.3e}, {umax:.3e}]"),
    ));
}

#[allow(clippy::too_many_arguments)]
fn scalar_diagnostic(
    diag: &DiagnosticSpec,
    cfg: &ScenarioConfig,
    params: &sktlab_core::fixedpoint::ModelParams,
    a: &TensorField,
    c: &SpaceTimeField,
    u: &SpaceTimeField,
    report: &mut RunReport,
) -> Result<()> {
    match diag {
        DiagnosticSpec::LpNorm { p } => {
            report.metrics.insert("lp_norm".into(), lp_norm(u, *p, Region::Whole)?);
        }
        DiagnosticSpec::Energy => {
            let zero = SpaceTimeField::constant(*u.grid(), *u.time(), 0.0);
            let g = SpaceTimeField::extend(u.slice(0), *u.time());
            let _ = zero;
            let e = energy_report(u, c, &g)?;
            report.metrics.insert("energy_lhs".into(), e.lhs);
            report.metrics.insert("energy_rhs_sum".into(), e.rhs_sum());
            report.metrics.insert("energy_ratio".into(), e.lhs / e.rhs_sum().max(1e-300));
        }
        DiagnosticSpec::EstimateRatio { p, t_bar } => {
            report
                .metrics
                .insert("estimate_ratio".into(), estimate_ratio(u, params, c, *p, *t_bar)?);
        }
        DiagnosticSpec::LevelSet { delta, n, q, j_max } => {
            let (sum, bound) = level_set_sum(u, *delta, *n, *q, *j_max)?;
            report.metrics.insert("level_set_sum".into(), sum);
            report.metrics.insert("level_set_bound".into(), bound);
            report.invariants.push(InvariantCheck::from_margin(
                "level-set-inequality",
                bound - sum,
                format!("distribution sum {sum:.3e} against bound {bound:.3e}"),
            ));
        }
        DiagnosticSpec::MaximalCheck => {
            let mcfg = MaximalConfig::dyadic(u.grid(), u.time());
            let mf = parabolic_maximal(u, Region::Whole, &mcfg)?;
            let mut worst = f64::INFINITY;
            for m in 0..u.time().slice_count() {
                for i in 0..u.grid().cell_count() {
                    worst = worst.min(mf.slice(m).get(i) - u.slice(m).get(i).abs());
                }
            }
            report.metrics.insert("maximal_domination_margin".into(), worst);
            report.invariants.push(InvariantCheck::from_margin(
                "maximal-dominates",
                worst + 1e-14,
                "pointwise |f| <= Mf".into(),
            ));
        }
        DiagnosticSpec::BmoSeminorm { r_max } => {
            report
                .metrics
                .insert("bmo_seminorm".into(), sktlab_core::analysis::bmo_seminorm(a, u.time(), *r_max)?);
        }
        other => {
            anyhow::bail!("diagnostic {} does not apply to scalar-model runs", other.label());
        }
    }
    let _ = cfg;
    Ok(())
}

fn run_skt(
    cfg: &ScenarioConfig,
    grid: &Grid,
    time: &TimeAxis,
    seed_mix: u64,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let params = cfg.skt.as_ref().unwrap().build()?;
    if !params.self_diffusion_active() {
        report.warnings.push(
            "a11 = 0: the global-existence regime needs active self-diffusion".to_string(),
        );
    }
    let u0 = profiles::evaluate(cfg.initial.as_ref().unwrap(), grid, seed_mix)?;
    let v0 = profiles::evaluate(cfg.initial_v.as_ref().unwrap(), grid, seed_mix.wrapping_add(1))?;
    let m0 = m0_bound(&params, &v0)?;
    report.metrics.insert("m0_bound".into(), m0);
    let state = match skt_run(&params, &u0, &v0, grid, time) {
        Ok(s) => s,
        Err(CoreError::BlowUp { slice }) => {
            report.failure = Some(format!("blow-up detected at slice {slice}"));
            return Ok(());
        }
        Err(err) => {
            report.failure = Some(format!("solver abort: {err}"));
            return Ok(());
        }
    };
    skt_invariants(&state, m0, report);
    for diag in &cfg.diagnostics {
        skt_diagnostic(diag, &state, m0, out_dir, report)?;
    }
    if cfg.emit_fields {
        report.files.extend(write_spacetime(out_dir, "u", &state.u)?);
        report.files.extend(write_spacetime(out_dir, "v", &state.v)?);
    }
    Ok(())
}

fn skt_invariants(state: &SKTState, m0: f64, report: &mut RunReport) {
    let (umin, vmin, vmax) = (state.u.min(), state.v.min(), state.v.max());
    report.invariants.push(InvariantCheck::from_margin(
        "nonnegativity-u",
        umin + tolerances::NONNEGATIVITY,
        format!("min u = {umin:.3e}"),
    ));
    report.invariants.push(InvariantCheck::from_margin(
        "nonnegativity-v",
        vmin + tolerances::NONNEGATIVITY,
        format!("min v = {vmin:.3e}"),
    ));
    report.invariants.push(InvariantCheck::from_margin(
        "v-max-principle",
        m0 + tolerances::V_CEILING - vmax,
        format!("max v = {vmax:.6}, ceiling M0 = {m0:.6}"),
    ));
    report.metrics.insert("u_min".into(), umin);
    report.metrics.insert("v_min".into(), vmin);
    report.metrics.insert("v_max".into(), vmax);
}

fn skt_diagnostic(
    diag: &DiagnosticSpec,
    state: &SKTState,
    m0: f64,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let time = state.u.time();
    let grid = state.u.grid();
    match diag {
        DiagnosticSpec::VMaxOverM0 => {
            let ratio = state.v.max() / m0;
            report.metrics.insert("v_max_over_M0".into(), ratio);
            report.invariants.push(InvariantCheck::from_margin(
                "v-max-over-m0",
                1.0 + tolerances::V_CEILING - ratio,
                format!("max v / M0 = {ratio:.9}"),
            ));
        }
        DiagnosticSpec::BlowupMonitor { p0 } => {
            let series = blowup_monitor(state, *p0)?;
            let rows: Vec<MonitorRow> = (0..time.slice_count())
                .map(|m| {
                    let (us, vs) = (state.u.slice(m), state.v.slice(m));
                    MonitorRow {
                        t: time.time(m),
                        norm_u: w1p_norm(us, *p0),
                        norm_v: w1p_norm(vs, *p0),
                        min_u: us.min(),
                        max_u: us.max(),
                        min_v: vs.min(),
                        max_v: vs.max(),
                        mass_u: cell_integral(us, Region::Whole).unwrap_or(f64::NAN),
                        mass_v: cell_integral(vs, Region::Whole).unwrap_or(f64::NAN),
                    }
                })
                .collect();
            write_monitor_csv(&out_dir.join("monitor.csv"), &rows)?;
            report.files.push("monitor.csv".into());
            let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            report.metrics.insert("monitor_max".into(), max);
            let quarter = series[time.slice_count() / 4];
            let second_half_max = series[time.slice_count() / 2..]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            report.metrics.insert("monitor_at_quarter".into(), quarter);
            report.metrics.insert("monitor_max_second_half".into(), second_half_max);
            report.arrays.insert("monitor".into(), series);
            report.invariants.push(InvariantCheck::from_margin(
                "monitor-finite",
                if max.is_finite() { 1.0 } else { -1.0 },
                format!("peak monitor value {max:.6}"),
            ));
        }
        DiagnosticSpec::MassGronwall => {
            let mass0 = cell_integral(state.u.slice(0), Region::Whole)?;
            let a1 = state.params.a1;
            let mut worst = f64::INFINITY;
            for m in 1..time.slice_count() {
                let mass = cell_integral(state.u.slice(m), Region::Whole)?;
                let bound =
                    (a1 * time.time(m)).exp() * mass0 * (1.0 + tolerances::MASS_GROWTH * time.dt());
                worst = worst.min(bound - mass);
            }
            report.metrics.insert("mass_gronwall_margin".into(), worst);
            report.invariants.push(InvariantCheck::from_margin(
                "mass-gronwall",
                worst,
                "integral of u under exponential growth bound".into(),
            ));
        }
        DiagnosticSpec::GradientRatio { p } => {
            let grad_v = grad_lp_spacetime(&state.v, *p);
            let u_norm = lp_norm(&state.u, *p, Region::Whole)?;
            report.metrics.insert("gradient_ratio".into(), grad_v / (1.0 + u_norm));
        }
        DiagnosticSpec::LpNorm { p } => {
            report.metrics.insert("lp_norm".into(), lp_norm(&state.u, *p, Region::Whole)?);
        }
        other => {
            anyhow::bail!("diagnostic {} does not apply to skt runs", other.label());
        }
    }
    let _ = grid;
    Ok(())
}

/// `L^p` norm of the cell-centered gradient magnitude over the cylinder.
pub fn grad_lp_spacetime(u: &SpaceTimeField, p: f64) -> f64 {
    let grid = u.grid();
    let time = u.time();
    let w = grid.cell_volume() * time.dt();
    let mut acc = 0.0;
    for m in 1..time.slice_count() {
        let grads = sktlab_core::mesh::cell_gradient(u.slice(m));
        for g in &grads {
            let mut g2 = 0.0;
            for d in 0..grid.dim() {
                g2 += g[d] * g[d];
            }
            acc += g2.sqrt().powf(p) * w;
        }
    }
    acc.powf(1.0 / p)
}

fn run_diagnostics_only(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let input = cfg.input.as_ref().unwrap();
    let u = read_spacetime(Path::new(input))?;
    for diag in &cfg.diagnostics {
        match diag {
            DiagnosticSpec::LpNorm { p } => {
                report.metrics.insert("lp_norm".into(), lp_norm(&u, *p, Region::Whole)?);
            }
            DiagnosticSpec::Energy => {
                let zero = SpaceTimeField::constant(*u.grid(), *u.time(), 0.0);
                let e = energy_report(&u, &zero, &zero)?;
                report.metrics.insert("energy_lhs".into(), e.lhs);
                report.metrics.insert("energy_rhs_sum".into(), e.rhs_sum());
            }
            DiagnosticSpec::LevelSet { delta, n, q, j_max } => {
                let (sum, bound) = level_set_sum(&u, *delta, *n, *q, *j_max)?;
                report.metrics.insert("level_set_sum".into(), sum);
                report.metrics.insert("level_set_bound".into(), bound);
                report.invariants.push(InvariantCheck::from_margin(
                    "level-set-inequality",
                    bound - sum,
                    format!("distribution sum {sum:.3e} against bound {bound:.3e}"),
                ));
            }
            DiagnosticSpec::MaximalCheck => {
                let mcfg = MaximalConfig::dyadic(u.grid(), u.time());
                let mf = parabolic_maximal(&u, Region::Whole, &mcfg)?;
                let mut worst = f64::INFINITY;
                for m in 0..u.time().slice_count() {
                    for i in 0..u.grid().cell_count() {
                        worst = worst.min(mf.slice(m).get(i) - u.slice(m).get(i).abs());
                    }
                }
                report.metrics.insert("maximal_domination_margin".into(), worst);
                report.invariants.push(InvariantCheck::from_margin(
                    "maximal-dominates",
                    worst + 1e-14,
                    "pointwise |f| <= Mf".into(),
                ));
            }
            other => {
                anyhow::bail!("diagnostic {} does not apply to diagnostics-only runs", other.label());
            }
        }
    }
    // A gradient-energy summary is always useful on archived fields.
    report
        .metrics
        .insert("grad_l2_sq".into(), grad_sq_st_integral(&u, Region::Whole));
    Ok(())
}

/// Convenience wrapper used by tests: evaluate a profile on a fresh grid.
pub fn profile_field(spec: &ProfileSpec, grid: &Grid, seed_mix: u64) -> Result<Field> {
    Ok(profiles::evaluate(spec, grid, seed_mix)?)
}
