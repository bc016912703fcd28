use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use qlp_core::bartnik::{initial_u, scalar_residual, solve_u, ScalarResidual};
use qlp_core::energy::{adm_extrapolate, monotonicity_check, penrose_report, Extrapolation, Hypotheses, PenroseReport, Scenario};
use qlp_core::flow::{compute_constants, evolution_diagnostics, run_flow, Constants, EvolutionReport, Foliation, Halt, SliceSummary};
use qlp_core::refgeom::isothermal_profile;
use qlp_core::surfgeom::{geometry, ConditionKind, StarSurface};

use crate::config::{InnerSpec, SurfaceSpec, U0Spec};
use crate::{CliError, Context};

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn profile(ctx: &Context) -> Result<u8, CliError> {
    let reference = ctx.config.reference()?;
    let grid = ctx.config.profile_grid(&reference)?;
    let profile = isothermal_profile(&reference, &grid)?;
    let path = ctx.out.join("profile.csv");
    profile.write_csv(&path, &grid)?;
    println!("profile: {} rows -> {}", grid.len(), path.display());
    Ok(0)
}

fn build_surface(ctx: &Context, block: &SurfaceSpec) -> Result<StarSurface, CliError> {
    let reference = ctx.config.reference()?;
    let profile = ctx.config.flow_profile(&reference, block)?;
    ctx.config.surface(&profile, block, ctx.resolution)
}

fn run_foliation(ctx: &Context, surface: &StarSurface) -> Result<Foliation, CliError> {
    let res = (surface.grid.n_theta(), surface.grid.n_phi());
    Ok(run_flow(surface, &ctx.config.flow_config(res)?)?)
}

#[derive(Serialize)]
struct FlowOutput<'a> {
    slices: Vec<SliceSummary>,
    halted: &'a Option<Halt>,
    cfl_exceeded: bool,
    diagnostics: Option<EvolutionReport>,
}

fn write_surfaces(ctx: &Context, fol: &Foliation) -> Result<(), CliError> {
    if !ctx.config.outputs.surfaces {
        return Ok(());
    }
    let dir = ctx.out.join("surfaces");
    std::fs::create_dir_all(&dir)?;
    for (i, sl) in fol.slices.iter().enumerate() {
        sl.geometry.write_csv(&sl.surface.grid, &dir.join(format!("slice_{i:05}.csv")))?;
    }
    Ok(())
}

pub fn flow(ctx: &Context) -> Result<u8, CliError> {
    let surface = build_surface(ctx, &ctx.config.surface)?;
    let fol = run_foliation(ctx, &surface)?;
    fol.write_series_csv(&ctx.out.join("flow_series.csv"))?;
    write_surfaces(ctx, &fol)?;
    let m = surface.profile.reference().mass();
    let out = FlowOutput {
        slices: fol.slices.iter().map(|s| s.summary(m, 0.0)).collect(),
        halted: &fol.halted,
        cfl_exceeded: fol.cfl_flag,
        diagnostics: evolution_diagnostics(&fol).ok(),
    };
    write_json(&ctx.out.join("flow.json"), &out)?;
    match &fol.halted {
        Some(h) => {
            println!("flow: halted at slice {} (s = {}): {}", h.slice, h.s, h.reason);
            Ok(1)
        }
        None => {
            println!("flow: {} slices to s = {}", fol.slices.len(), fol.slices.last().map(|s| s.s).unwrap_or(0.0));
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    bounds: (f64, f64),
    max_bound_excess: f64,
    halvings: usize,
    decay_slope: Option<f64>,
    decay_settled: bool,
    max_scalar_residual: Option<f64>,
    energy_initial: f64,
    energy_final: f64,
    monotonicity_margin: f64,
    max_energy_increase: f64,
    max_rate_discrepancy: f64,
    extrapolation: Option<Extrapolation>,
}

pub fn solve(ctx: &Context) -> Result<u8, CliError> {
    let surface = build_surface(ctx, &ctx.config.surface)?;
    let fol = run_foliation(ctx, &surface)?;
    let geo0 = &fol.slices[0].geometry;
    let u0 = match &ctx.config.solver.u0 {
        U0Spec::Constant { value } => vec![*value; geo0.len()],
        U0Spec::FromInner => {
            let block = ctx.config.inner.as_ref().ok_or_else(|| CliError::Usage("u0 from_inner needs an `inner` block".into()))?;
            let inner = ctx.config.inner_data(block, &surface)?;
            initial_u(&inner.mean_curvature(&surface, geo0)?, &geo0.h0)?
        }
    };
    let field = solve_u(&fol, &u0)?;
    let residual: Option<ScalarResidual> = scalar_residual(&fol, &field).ok();
    field.write_series_csv(&ctx.out.join("u_series.csv"), residual.as_ref())?;
    let trace = monotonicity_check(&fol, &field)?;
    trace.write_csv(&ctx.out.join("energy_trace.csv"))?;
    let r0 = (geo0.area() / (4.0 * std::f64::consts::PI)).sqrt();
    let out = SolveOutput {
        bounds: field.bounds,
        max_bound_excess: field.max_bound_excess,
        halvings: field.halvings,
        decay_slope: field.decay_slope(),
        decay_settled: field.decay_settled(),
        max_scalar_residual: residual.as_ref().map(|r| r.max_abs),
        energy_initial: trace.energy[0],
        energy_final: *trace.energy.last().unwrap(),
        monotonicity_margin: trace.monotonicity_margin,
        max_energy_increase: trace.max_increase,
        max_rate_discrepancy: trace.max_discrepancy,
        extrapolation: adm_extrapolate(&trace, r0).ok(),
    };
    write_json(&ctx.out.join("solve.json"), &out)?;
    let ok = field.max_bound_excess <= 1e-10 && trace.max_increase <= 1e-8;
    println!(
        "solve: E {:.7} -> {:.7}, bound excess {:.1e}, largest increase {:.1e}",
        out.energy_initial, out.energy_final, out.max_bound_excess, out.max_energy_increase
    );
    Ok(if ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct Residuals {
    scalar_curvature: Option<f64>,
    rate_discrepancy: Option<f64>,
    energy_increase: Option<f64>,
    bound_excess: Option<f64>,
}

#[derive(Serialize)]
struct ScenarioOutput {
    scenario: String,
    hypotheses: Hypotheses,
    #[serde(rename = "E0")]
    e0: f64,
    #[serde(rename = "E_inf")]
    e_inf: Option<f64>,
    rhs: f64,
    margin: f64,
    inequality_holds: bool,
    closed_form_lhs: Option<f64>,
    monotonicity_margin: Option<f64>,
    residuals: Residuals,
    extrapolation_error: Option<String>,
    worst_conditions: Vec<(ConditionKind, f64)>,
    exit_code: u8,
}

fn exit_code(rep: &PenroseReport) -> u8 {
    if !rep.hypotheses.met {
        3
    } else if !rep.inequality_holds {
        1
    } else {
        0
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn run_one(ctx: &Context, name: &str, surface: &SurfaceSpec, inner: &InnerSpec) -> Result<(ScenarioOutput, PenroseReport), CliError> {
    let surface = build_surface(ctx, surface)?;
    let inner = ctx.config.inner_data(inner, &surface)?;
    let flow = ctx.config.flow_config((surface.grid.n_theta(), surface.grid.n_phi()))?;
    let rep = penrose_report(&Scenario { surface, inner, flow })?;
    let out = ScenarioOutput {
        scenario: name.to_string(),
        hypotheses: rep.hypotheses.clone(),
        e0: rep.e0,
        e_inf: rep.e_inf,
        rhs: rep.rhs,
        margin: rep.margin,
        inequality_holds: rep.inequality_holds,
        closed_form_lhs: rep.closed_form.map(|c| c.lhs),
        monotonicity_margin: finite(rep.monotonicity_margin),
        residuals: Residuals {
            scalar_curvature: finite(rep.max_scalar_residual),
            rate_discrepancy: finite(rep.max_rate_discrepancy),
            energy_increase: finite(rep.max_energy_increase),
            bound_excess: finite(rep.max_bound_excess),
        },
        extrapolation_error: rep.extrapolation_error.clone(),
        worst_conditions: rep.worst_conditions.clone(),
        exit_code: exit_code(&rep),
    };
    Ok((out, rep))
}

pub fn scenario(ctx: &Context) -> Result<u8, CliError> {
    let cfg = &ctx.config;
    let mut jobs: Vec<(String, SurfaceSpec, InnerSpec)> = Vec::new();
    if cfg.batch.is_empty() {
        let inner = cfg.inner.clone().ok_or_else(|| CliError::Usage("scenario needs an `inner` block".into()))?;
        jobs.push(("scenario".into(), cfg.surface.clone(), inner));
    } else {
        for b in &cfg.batch {
            let inner = b.inner.clone().or_else(|| cfg.inner.clone()).ok_or_else(|| CliError::Usage(format!("batch entry `{}` has no inner data", b.name)))?;
            jobs.push((b.name.clone(), b.surface.clone().unwrap_or_else(|| cfg.surface.clone()), inner));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.jobs).build().map_err(|e| CliError::Run(e.to_string()))?;
    let results: Vec<Result<(ScenarioOutput, PenroseReport), CliError>> =
        pool.install(|| jobs.par_iter().map(|(n, s, i)| run_one(ctx, n, s, i)).collect());

    let single = jobs.len() == 1 && cfg.batch.is_empty();
    let mut outputs = Vec::new();
    let mut code = 0u8;
    for (k, res) in results.into_iter().enumerate() {
        let (out, rep) = res?;
        let stem = if single { "scenario".to_string() } else { format!("scenario_{k:03}") };
        rep.trace.write_csv(&ctx.out.join(format!("{stem}_energy.csv")))?;
        println!(
            "{}: E0 = {:.7}, rhs = {:.7}, margin = {:.7}, E_inf = {}, exit {}",
            out.scenario,
            out.e0,
            out.rhs,
            out.margin,
            out.e_inf.map(|v| format!("{v:.7}")).unwrap_or_else(|| "n/a".into()),
            out.exit_code
        );
        code = match (code, out.exit_code) {
            (1, _) | (_, 1) => 1,
            (3, _) | (_, 3) => 3,
            _ => 0,
        };
        outputs.push(out);
    }
    if single {
        write_json(&ctx.out.join("scenario.json"), &outputs[0])?;
    } else {
        write_json(&ctx.out.join("scenarios.json"), &outputs)?;
    }
    Ok(code)
}

#[derive(Serialize)]
struct ConstantsOutput {
    #[serde(flatten)]
    constants: Constants,
    /// `√3·m` for Schwarzschild; `C1` otherwise.
    kappa_threshold: f64,
}

pub fn constants(ctx: &Context) -> Result<u8, CliError> {
    let reference = ctx.config.reference()?;
    let profile = ctx.config.flow_profile(&reference, &ctx.config.surface)?;
    let rho_min = match ctx.config.constants.rho_min {
        Some(r) => r * ctx.config.length_unit(),
        None => {
            let s = ctx.config.surface(&profile, &ctx.config.surface, ctx.resolution)?;
            geometry(&s)?;
            s.min_rho()
        }
    };
    let c = compute_constants(&reference, &profile, rho_min)?;
    let kappa_threshold = match reference.kind() {
        qlp_core::ReferenceKind::Schwarzschild => 3f64.sqrt() * reference.mass(),
        _ => c.c1,
    };
    println!("constants: C1 = {:.6}, C2 = {:.6}, C3 = {:.6}, C4 = {:.6}, C5 = {:.6}", c.c1, c.c2, c.c3, c.c4, c.c5);
    write_json(&ctx.out.join("constants.json"), &ConstantsOutput { constants: c, kappa_threshold })?;
    Ok(0)
}
