use serde::Serialize;

use qlp_core::bartnik::solve_u;
use qlp_core::energy::{monotonicity_check, penrose_report, quasilocal_energy, InnerData, Scenario};
use qlp_core::flow::{run_flow, FlowConfig};
use qlp_core::oracle::{round_flow_u, round_geometry, scenario_closed_form};
use qlp_core::refgeom::{static_check, ConformalProfile, ReferenceKind, ReferenceManifold};
use qlp_core::sphere::SphereGrid;
use qlp_core::surfgeom::{geometry, StarSurface};

use crate::commands::write_json;
use crate::config::{lower_radius, SurfaceSpec};
use crate::{CliError, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mutation {
    /// Negate the T-function wherever the suite reads it.
    FlipTSign,
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: Option<f64>,
    tolerance: Option<f64>,
    detail: String,
}

impl Check {
    fn measured(name: &'static str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name, passed: value <= tolerance, value: Some(value), tolerance: Some(tolerance), detail: detail.into() }
    }

    fn flag(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name, passed, value: None, tolerance: None, detail: detail.into() }
    }

    fn failed(name: &'static str, err: impl std::fmt::Display) -> Self {
        Check { name, passed: false, value: None, tolerance: None, detail: err.to_string() }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    passed: bool,
    mutation: Option<&'static str>,
    checks: &'a [Check],
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn cosines() -> Vec<f64> {
    (0..21).map(|j| -1.0 + j as f64 / 10.0).collect()
}

/// References probed by the curvature checks: the configured one and, so the
/// T-function is exercised away from zero, a charged companion of equal mass.
fn probes(reference: &ReferenceManifold) -> Vec<ReferenceManifold> {
    let mut out = vec![reference.clone()];
    if reference.kind() != ReferenceKind::ReissnerNordstrom {
        let m = reference.mass().max(1e-3);
        out.push(ReferenceManifold::reissner_nordstrom(m, 0.5 * m).expect("subextremal"));
    }
    out
}

fn probe_radii(reference: &ReferenceManifold) -> Vec<f64> {
    let lo = lower_radius(reference);
    log_grid(lo, (100.0 * reference.mass().max(1.0)).min(reference.r_max()), 60)
}

fn t_bounds(reference: &ReferenceManifold, sign: f64) -> Check {
    let mut worst = 0.0f64;
    for probe in probes(reference) {
        for r in probe_radii(&probe) {
            let rbar = match probe.scalar_curvature(r) {
                Ok(v) => v,
                Err(e) => return Check::failed("t_function_bounds", e),
            };
            for c in cosines() {
                let t = match probe.t_function(r, c) {
                    Ok(v) => sign * v,
                    Err(e) => return Check::failed("t_function_bounds", e),
                };
                worst = worst.max(-t).max(t - rbar);
            }
        }
    }
    Check::measured("t_function_bounds", worst, 1e-12, "max violation of 0 <= T <= scalar curvature")
}

fn t_dual_route(reference: &ReferenceManifold, sign: f64) -> Check {
    let mut worst = 0.0f64;
    for probe in probes(reference) {
        for r in probe_radii(&probe) {
            for c in cosines() {
                let (g00, gnn) = match probe.einstein_components(r, c) {
                    Ok(v) => v,
                    Err(e) => return Check::failed("t_function_einstein", e),
                };
                let t = sign * probe.t_function(r, c).unwrap_or(f64::NAN);
                let scale = probe.ricci_eigenvalues(r).map(|l| l.radial.abs().max(l.tangential.abs())).unwrap_or(1.0);
                let err = (t - (g00 + gnn)).abs() / g00.abs().max(scale);
                worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
            }
        }
    }
    Check::measured("t_function_einstein", worst, 1e-8, "gap between the potential and Einstein-tensor routes, relative to curvature")
}

fn static_conditions(ctx: &Context, reference: &ReferenceManifold) -> Check {
    let grid = match ctx.config.profile_grid(reference) {
        Ok(g) => g,
        Err(e) => return Check::failed("static_conditions", format!("{e:?}")),
    };
    match static_check(reference, &grid) {
        Ok(rep) => {
            let detail = match &rep.first_violation {
                Some(v) => format!("{:?} fails at r = {}, cos = {} (value {:.3e})", v.property, v.r, v.cos_theta, v.value),
                None => format!("{} radii", grid.len()),
            };
            Check::flag("static_conditions", rep.passed, detail)
        }
        Err(e) => Check::failed("static_conditions", e),
    }
}

fn start_radius(ctx: &Context, reference: &ReferenceManifold) -> f64 {
    match ctx.config.surface {
        SurfaceSpec::Round { r0 } | SurfaceSpec::Perturbed { r0, .. } => r0 * ctx.config.length_unit(),
        _ => 2.0 * lower_radius(reference).max(reference.mass()),
    }
}

fn gauss_residual(profile: &ConformalProfile, rho0: f64, res: (usize, usize)) -> Check {
    let run = || -> qlp_core::Result<(f64, f64)> {
        let grid = SphereGrid::new(res.0, res.1)?;
        let round = geometry(&StarSurface::round(profile, &grid, rho0)?)?.max_gauss_residual();
        let bumped = geometry(&StarSurface::ellipsoid(profile, &grid, rho0, 0.05)?)?.max_gauss_residual();
        Ok((round, bumped))
    };
    match run() {
        Ok((a, b)) => Check::measured("gauss_equation", a.max(b), 1e-5, format!("round {a:.2e}, perturbed {b:.2e}")),
        Err(e) => Check::failed("gauss_equation", e),
    }
}

fn round_oracle(profile: &ConformalProfile, rho0: f64) -> Check {
    let run = || -> qlp_core::Result<f64> {
        let grid = SphereGrid::new(4, 8)?;
        let geo = geometry(&StarSurface::round(profile, &grid, rho0)?)?;
        let o = round_geometry(profile.reference(), geo.r[0])?;
        let mut worst = 0.0f64;
        for k in 0..geo.len() {
            for (a, b) in [(geo.h0[k], o.h0), (geo.v[k], o.v), (geo.det_a0[k], o.det_a0), (geo.ric_nu[k], o.ric_nu), (geo.t[k], o.t), (geo.rbar[k], o.rbar)] {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(v) => Check::measured("round_geometry_oracle", v, 1e-10, "grid geometry against closed forms"),
        Err(e) => Check::failed("round_geometry_oracle", e),
    }
}

fn pipeline_checks(profile: &ConformalProfile, rho0: f64, r0: f64) -> Vec<Check> {
    let mut out = Vec::new();
    let grid = match SphereGrid::new(6, 12) {
        Ok(g) => g,
        Err(e) => return vec![Check::failed("monotonicity_identity", e)],
    };
    let surface = match StarSurface::round(profile, &grid, rho0) {
        Ok(s) => s,
        Err(e) => return vec![Check::failed("monotonicity_identity", e)],
    };

    let fine = run_flow(&surface, &FlowConfig::new(1e-3, 0.2, (6, 12)))
        .and_then(|fol| solve_u(&fol, &vec![1.2; grid.len()]).and_then(|f| monotonicity_check(&fol, &f)));
    out.push(match fine {
        Ok(t) => Check {
            name: "monotonicity_identity",
            passed: t.max_discrepancy < 1e-6 && t.max_increase <= 1e-8,
            value: Some(t.max_discrepancy),
            tolerance: Some(1e-6),
            detail: format!("rate discrepancy {:.2e}, largest increase {:.2e}", t.max_discrepancy, t.max_increase),
        },
        Err(e) => Check::failed("monotonicity_identity", e),
    });

    let coarse = run_flow(&surface, &FlowConfig::new(0.02, 5.0, (6, 12)));
    out.push(match &coarse {
        Ok(fol) => {
            let res = solve_u(fol, &vec![1.2; grid.len()]).and_then(|f| {
                let o = round_flow_u(profile.reference(), r0, 1.2, 5.0, fol.slices.len() - 1)?;
                Ok(o.iter().zip(&f.u).map(|(st, u)| u.iter().map(|v| (v - st.u).abs()).fold(0.0, f64::max)).fold(0.0, f64::max))
            });
            match res {
                Ok(v) => Check::measured("oracle_flow_equivalence", v, 1e-6, "u against the one-dimensional reduction"),
                Err(e) => Check::failed("oracle_flow_equivalence", e),
            }
        }
        Err(e) => Check::failed("oracle_flow_equivalence", e),
    });

    out.push(match &coarse {
        Ok(fol) => match solve_u(fol, &vec![1.0; grid.len()]) {
            Ok(f) => {
                let zero = fol.slices.iter().zip(&f.u).all(|(sl, u)| quasilocal_energy(&sl.geometry, u).map(|e| e == 0.0).unwrap_or(false));
                Check::flag("unit_u_fixed_point", zero && f.u.iter().flatten().all(|v| *v == 1.0), "u = 1 stays 1 and E stays 0")
            }
            Err(e) => Check::failed("unit_u_fixed_point", e),
        },
        Err(e) => Check::failed("unit_u_fixed_point", e),
    });
    out
}

fn scenario_check(profile: &ConformalProfile, rho0: f64, r0: f64) -> Check {
    let m = profile.reference().mass();
    let big_m = (1.2 * m).min(0.45 * r0);
    let run = || -> qlp_core::Result<(f64, f64)> {
        let grid = SphereGrid::new(4, 8)?;
        let sc = Scenario {
            surface: StarSurface::round(profile, &grid, rho0)?,
            inner: InnerData::SchwarzschildInterior { mass: big_m },
            flow: FlowConfig::new(0.5, 1.0, (4, 8)),
        };
        let rep = penrose_report(&sc)?;
        Ok((rep.e0, scenario_closed_form(big_m, m, r0)?.lhs))
    };
    match run() {
        Ok((e0, lhs)) => Check::measured("scenario_closed_form", (e0 - lhs).abs(), 1e-10, format!("E(0) = {e0:.10}, closed form {lhs:.10}")),
        Err(e) => Check::failed("scenario_closed_form", e),
    }
}

pub fn run(ctx: &Context, mutation: Option<Mutation>) -> Result<u8, CliError> {
    let reference = ctx.config.reference()?;
    let sign = if mutation == Some(Mutation::FlipTSign) { -1.0 } else { 1.0 };
    let mut checks = vec![static_conditions(ctx, &reference), t_bounds(&reference, sign), t_dual_route(&reference, sign)];

    let r0 = start_radius(ctx, &reference);
    let profile = ctx.config.flow_profile(&reference, &SurfaceSpec::Round { r0: r0 / ctx.config.length_unit() })?;
    let rho0 = profile.rho_of_r(r0).map_err(|e| CliError::Usage(e.to_string()))?;
    checks.push(gauss_residual(&profile, rho0, ctx.resolution));
    if reference.kind() != ReferenceKind::Tabulated {
        checks.push(round_oracle(&profile, rho0));
        checks.extend(pipeline_checks(&profile, rho0, r0));
    }
    if reference.kind() == ReferenceKind::Schwarzschild {
        checks.push(scenario_check(&profile, rho0, r0));
    }

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let summary = Summary { passed, mutation: mutation.map(|_| "flip_t_sign"), checks: &checks };
    write_json(&ctx.out.join("verify.json"), &summary)?;
    Ok(if passed { 0 } else { 1 })
}
