//! Acceptance criteria 1–10. Every test prints one `criterion N: PASS|FAIL`
//! line and then asserts it.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use qlp_core::bartnik::{scalar_residual, solve_u};
use qlp_core::energy::{monotonicity_check, penrose_report, quasilocal_energy, InnerData, Scenario, MARGIN_ROUNDOFF};
use qlp_core::flow::{compute_constants, run_flow, FlowConfig, DEFAULT_RESOLUTION};
use qlp_core::oracle::{round_flow_u, scenario_closed_form};
use qlp_core::refgeom::{isothermal_profile, ConformalProfile, ReferenceManifold};
use qlp_core::sphere::SphereGrid;
use qlp_core::surfgeom::{geometry, StarSurface};

const PROFILE_REL_TOL: f64 = 1e-8;
const PROFILE_RUNTIME: Duration = Duration::from_secs(1);
const CURVATURE_TOL: f64 = 1e-10;
const T_CLOSED_FORM_TOL: f64 = 1e-8;
const GAUSS_TOL: f64 = 1e-5;
const RATE_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-8;
const ODE_MATCH_TOL: f64 = 1e-6;
const DECAY_RUNTIME: Duration = Duration::from_secs(60);
const SCALAR_RESIDUAL_TOL: f64 = 1e-5;
const ENERGY_TOL: f64 = 1e-4;
const SCENARIO_RUNTIME: Duration = Duration::from_secs(600);
const CONSTANT_REL_TOL: f64 = 1e-2;

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
}

fn schwarzschild() -> ReferenceManifold {
    ReferenceManifold::schwarzschild(1.0).unwrap()
}

fn schwarzschild_profile(r_hi: f64) -> ConformalProfile {
    ConformalProfile::new(&schwarzschild(), 2.02, r_hi).unwrap()
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Isotropic radius of Schwarzschild.
fn isotropic_rho(m: f64, r: f64) -> f64 {
    (r - m + (r * r - 2.0 * m * r).sqrt()) / 2.0
}

/// Isotropic conformal factor of Schwarzschild.
fn isotropic_factor(m: f64, rho: f64) -> (f64, f64) {
    (1.0 + m / (2.0 * rho), -m / (2.0 * rho * rho))
}

#[test]
fn criterion_01_isothermal_profile() {
    let r_grid = log_points(2.5, 100.0, 2000);
    let start = Instant::now();
    let profile = isothermal_profile(&schwarzschild(), &r_grid).unwrap();
    let rho: Vec<f64> = r_grid.iter().map(|&r| profile.rho_of_r(r).unwrap()).collect();
    let elapsed = start.elapsed();
    let worst = r_grid.iter().zip(&rho).map(|(&r, &p)| ((p - isotropic_rho(1.0, r)) / isotropic_rho(1.0, r)).abs()).fold(0.0, f64::max);
    verdict(
        1,
        worst < PROFILE_REL_TOL && elapsed < PROFILE_RUNTIME,
        format!("max relative error {worst:.2e}, runtime {:.3}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_conformal_curvature() {
    let profile = schwarzschild_profile(200.0);
    let rho0 = isotropic_rho(1.0, 4.0);
    let grid = SphereGrid::new(8, 16).unwrap();
    let geo = geometry(&StarSurface::round(&profile, &grid, rho0).unwrap()).unwrap();
    let (kappa_exact, h0_exact) = ((0.5f64).sqrt() / 4.0, 2.0 * (0.5f64).sqrt() / 4.0);
    let round_err = (0..geo.len())
        .map(|k| (geo.kappa[k].0 - kappa_exact).abs().max((geo.kappa[k].1 - kappa_exact).abs()).max((geo.h0[k] - h0_exact).abs()))
        .fold(0.0, f64::max);

    // Off-centre Euclidean sphere: umbilic with κ = (1/R + 2F'·cos/F)/F².
    let (radius, offset) = (3.0, 0.6);
    let mut errors = Vec::new();
    for n in [8usize, 12, 16] {
        let grid = SphereGrid::new(n, 2 * n).unwrap();
        let geo = geometry(&StarSurface::shifted_sphere(&profile, &grid, radius, offset).unwrap()).unwrap();
        let err = (0..geo.len())
            .map(|k| {
                let x = geo.position[k];
                let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let normal = [x[0] / radius, x[1] / radius, (x[2] - offset) / radius];
                let cos = (x[0] * normal[0] + x[1] * normal[1] + x[2] * normal[2]) / rho;
                let (f, df) = isotropic_factor(1.0, rho);
                let exact = (1.0 / radius + 2.0 * df * cos / f) / (f * f);
                (geo.kappa[k].0 - exact).abs().max((geo.kappa[k].1 - exact).abs())
            })
            .fold(0.0, f64::max);
        errors.push(err);
    }
    let converging = errors.windows(2).all(|w| w[1] < w[0]) || errors.iter().all(|e| *e < CURVATURE_TOL);
    verdict(
        2,
        round_err < CURVATURE_TOL && converging,
        format!("round error {round_err:.2e}; shifted sphere errors {}", sci(&errors)),
    );
}

fn rn_grid() -> (ReferenceManifold, Vec<f64>, Vec<f64>) {
    let rn = ReferenceManifold::reissner_nordstrom(1.0, 0.5).unwrap();
    let radii = log_points(rn.r_horizon() * 1.001, 100.0, 100);
    let cosines = (0..20).map(|j| -1.0 + 2.0 * j as f64 / 19.0).collect();
    (rn, radii, cosines)
}

#[test]
fn criterion_03_t_function_bounds() {
    let (rn, radii, cosines) = rn_grid();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::INFINITY;
    for &r in &radii {
        let rbar = rn.scalar_curvature(r).unwrap();
        for &c in &cosines {
            let t = rn.t_function(r, c).unwrap();
            worst_low = worst_low.min(t);
            worst_high = worst_high.min(rbar - t);
        }
    }
    verdict(
        3,
        worst_low >= -1e-15 && worst_high >= -1e-15,
        format!("bounds on 100x20 grid: min T {worst_low:.2e}, min (R - T) {worst_high:.2e}"),
    );
}

#[test]
fn criterion_03_t_function_closed_form() {
    let (rn, radii, cosines) = rn_grid();
    let e2 = 0.25;
    let mut worst = 0.0f64;
    for &r in &radii {
        for &c in &cosines {
            let expected = 2.0 * e2 * c * c / r.powi(4);
            worst = worst.max((rn.t_function(r, c).unwrap() - expected).abs());
        }
    }
    verdict(3, worst < T_CLOSED_FORM_TOL, format!("closed form 2e^2 cos^2/r^4: max deviation {worst:.3e}"));
}

#[test]
fn criterion_04_gauss_equation() {
    let profile = schwarzschild_profile(200.0);
    let rho0 = isotropic_rho(1.0, 6.0);
    let (n, m) = DEFAULT_RESOLUTION;
    let grid = SphereGrid::new(n, m).unwrap();
    let round = geometry(&StarSurface::round(&profile, &grid, rho0).unwrap()).unwrap().max_gauss_residual();
    let mut perturbed = Vec::new();
    for k in [8usize, 12, n] {
        let grid = SphereGrid::new(k, 2 * k).unwrap();
        let geo = geometry(&StarSurface::ellipsoid(&profile, &grid, rho0, 0.05).unwrap()).unwrap();
        perturbed.push(geo.max_gauss_residual());
    }
    let at_default = *perturbed.last().unwrap();
    let converging = perturbed.windows(2).all(|w| w[1] <= w[0]) || perturbed.iter().all(|e| *e < 1e-12);
    verdict(
        4,
        round < GAUSS_TOL && at_default < GAUSS_TOL && converging,
        format!("round {round:.2e}; P2-perturbed under refinement {}", sci(&perturbed)),
    );
}

#[test]
fn criterion_05_monotonicity_identity() {
    let profile = schwarzschild_profile(200.0);
    let grid = SphereGrid::new(6, 12).unwrap();
    let rho0 = isotropic_rho(1.0, 4.0);
    let surface = StarSurface::round(&profile, &grid, rho0).unwrap();
    let fol = run_flow(&surface, &FlowConfig::new(1e-3, 0.5, (6, 12))).unwrap();
    let field = solve_u(&fol, &vec![1.2; grid.len()]).unwrap();
    let trace = monotonicity_check(&fol, &field).unwrap();

    let (n, m) = DEFAULT_RESOLUTION;
    let grid_p = SphereGrid::new(n, m).unwrap();
    let perturbed = StarSurface::ellipsoid(&profile, &grid_p, isotropic_rho(1.0, 6.0), 0.05).unwrap();
    let fol_p = run_flow(&perturbed, &FlowConfig::new(0.02, 4.0, (n, m))).unwrap();
    let u0: Vec<f64> = (0..grid_p.len()).map(|k| 1.1 + 0.1 * grid_p.theta(k).cos()).collect();
    let field_p = solve_u(&fol_p, &u0).unwrap();
    let trace_p = monotonicity_check(&fol_p, &field_p).unwrap();

    let ones = solve_u(&fol, &vec![1.0; grid.len()]).unwrap();
    let constant_zero = fol.slices.iter().zip(&ones.u).all(|(sl, u)| quasilocal_energy(&sl.geometry, u).unwrap() == 0.0);

    let increase = trace.max_increase.max(trace_p.max_increase);
    verdict(
        5,
        trace.max_discrepancy < RATE_TOL && increase <= MONOTONE_TOL && constant_zero,
        format!(
            "rate discrepancy {:.2e}; largest energy increase {increase:.2e}; u = 1 gives E = 0 exactly: {constant_zero}",
            trace.max_discrepancy
        ),
    );
}

#[test]
fn criterion_06_maximum_principle_and_decay() {
    let profile = schwarzschild_profile(400.0);
    let grid = SphereGrid::new(32, 64).unwrap();
    let start = Instant::now();
    let surface = StarSurface::round(&profile, &grid, isotropic_rho(1.0, 4.0)).unwrap();
    let config = FlowConfig { keep_every: 1, ..FlowConfig::new(0.025, 50.0, (32, 64)) };
    let fol = run_flow(&surface, &config).unwrap();
    let field = solve_u(&fol, &vec![1.2; grid.len()]).unwrap();
    let elapsed = start.elapsed();
    let samples = fol.slices.len() - 1;
    let oracle = round_flow_u(&schwarzschild(), 4.0, 1.2, 50.0, samples).unwrap();
    let mismatch = oracle
        .iter()
        .zip(&field.u)
        .map(|(st, u)| u.iter().map(|v| (v - st.u).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let in_bounds = field.u.iter().flatten().all(|v| *v >= field.bounds.0 - 1e-10 && *v <= field.bounds.1 + 1e-10);
    verdict(
        6,
        in_bounds && field.max_bound_excess <= 1e-10 && field.decay_settled() && mismatch < ODE_MATCH_TOL && elapsed < DECAY_RUNTIME,
        format!(
            "bounds held {in_bounds} (excess {:.1e}); s*max|u-1| slope {:?}; oracle mismatch {mismatch:.2e}; runtime {:.1}s",
            field.max_bound_excess,
            field.decay_slope(),
            elapsed.as_secs_f64()
        ),
    );
}

fn max_scalar_residual(surface: &StarSurface, ds: f64, s_max: f64, u0: &[f64]) -> f64 {
    let (n, m) = (surface.grid.n_theta(), surface.grid.n_phi());
    let fol = run_flow(surface, &FlowConfig::new(ds, s_max, (n, m))).unwrap();
    let field = solve_u(&fol, u0).unwrap();
    scalar_residual(&fol, &field).unwrap().max_abs
}

#[test]
fn criterion_07_prescribed_scalar_curvature() {
    let profile = schwarzschild_profile(200.0);
    let (n, m) = DEFAULT_RESOLUTION;
    let grid = SphereGrid::new(n, m).unwrap();
    let surface = StarSurface::round(&profile, &grid, isotropic_rho(1.0, 4.0)).unwrap();
    let u0 = vec![1.2; grid.len()];
    let coarse = max_scalar_residual(&surface, 0.02, 2.0, &u0);
    let fine = max_scalar_residual(&surface, 0.01, 2.0, &u0);
    let order = (coarse / fine).log2();
    verdict(
        7,
        fine < SCALAR_RESIDUAL_TOL && order > 1.8,
        format!("max residual {coarse:.2e} (ds 0.02), {fine:.2e} (ds 0.01); observed order {order:.2}"),
    );
}

#[test]
fn criterion_08_condition_preservation() {
    let profile = schwarzschild_profile(4000.0);
    let (n, m) = DEFAULT_RESOLUTION;
    let grid = SphereGrid::new(n, m).unwrap();
    let surface = StarSurface::ellipsoid(&profile, &grid, 5.0, 0.1).unwrap();
    let fol = run_flow(&surface, &FlowConfig { keep_every: 10, ..FlowConfig::new(0.05, 100.0, (n, m)) }).unwrap();
    let first = fol.slices[0].summary(1.0, 0.0);
    let initial_ok = first.min_cos_theta > 1.0 / 3f64.sqrt() + 0.05
        && first.min_kappa_rho2 > 3f64.sqrt() + 0.05
        && first.min_rho > 3.1;
    let (mut cos_margin, mut kappa_margin) = (f64::INFINITY, f64::INFINITY);
    for sl in &fol.slices {
        let (c, k) = sl.summary(1.0, 0.0).preservation_margins();
        cos_margin = cos_margin.min(c);
        kappa_margin = kappa_margin.min(k);
    }
    let reached = fol.slices.last().unwrap().s >= 100.0 - 1e-9 && fol.halted.is_none();
    verdict(
        8,
        initial_ok && reached && cos_margin > 0.0 && kappa_margin > 0.0,
        format!(
            "initial data admissible {initial_ok}; reached s = 100 {reached}; min cos margin {cos_margin:.4}; min kappa*rho^2 margin {kappa_margin:.4}"
        ),
    );
}

fn scenario(big_m: f64, r0: f64, ds: f64, s_max: f64, res: (usize, usize)) -> Scenario {
    let profile = schwarzschild_profile(4.0 * (r0 + s_max));
    let grid = SphereGrid::new(res.0, res.1).unwrap();
    let surface = StarSurface::round(&profile, &grid, isotropic_rho(1.0, r0)).unwrap();
    Scenario { surface, inner: InnerData::SchwarzschildInterior { mass: big_m }, flow: FlowConfig::new(ds, s_max, res) }
}

#[test]
fn criterion_09_penrose_inequality() {
    let start = Instant::now();
    let rep = penrose_report(&scenario(1.2, 4.0, 0.05, 60.0, (4, 8))).unwrap();
    let closed = scenario_closed_form(1.2, 1.0, 4.0).unwrap();
    let e_inf = rep.e_inf.unwrap_or(f64::NAN);
    let rhs = (16.0 * PI * 1.44 / (16.0 * PI)).sqrt() - 1.0;
    let main_ok = rep.hypotheses.met
        && (rep.e0 - closed.lhs).abs() < ENERGY_TOL
        && (rep.rhs - rhs).abs() < 1e-12
        && rep.inequality_holds
        && e_inf >= rhs - ENERGY_TOL
        && e_inf <= rep.e0;

    let mut worst_margin = f64::INFINITY;
    for big_m in [1.0, 1.25, 1.5, 1.75, 2.0] {
        for r0 in [5.0, 10.0, 30.0, 100.0] {
            let rep = penrose_report(&scenario(big_m, r0, 0.5, 20.0, (4, 8))).unwrap();
            assert!(rep.hypotheses.met, "hypotheses unmet at M = {big_m}, r0 = {r0}");
            worst_margin = worst_margin.min(rep.margin);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        9,
        main_ok && worst_margin >= -MARGIN_ROUNDOFF && elapsed < SCENARIO_RUNTIME,
        format!(
            "E(0) = {:.7} (closed form {:.7}), E_inf = {e_inf:.7}, rhs = {:.7}; sweep min margin {worst_margin:.3e}; runtime {:.1}s",
            rep.e0,
            closed.lhs,
            rep.rhs,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_constants() {
    let profile = schwarzschild_profile(1e6);
    let mut worst = 0.0f64;
    for rho_min in [0.5f64, 1.0, 2.0] {
        let c = compute_constants(&schwarzschild(), &profile, rho_min.max(profile.rho_range().0)).unwrap();
        let lo = c.rho_min;
        let sup = log_points(lo, 1e8, 200_000)
            .into_iter()
            .map(|rho| {
                let (f, _) = isotropic_factor(1.0, rho);
                1.0 / f + 1.0 / (rho * rho * f.powi(3))
            })
            .fold(0.0, f64::max);
        worst = worst.max((c.c3 - sup).abs() / sup);
    }
    let flat = ReferenceManifold::flat(0.5, 1e4).unwrap();
    let flat_profile = ConformalProfile::new(&flat, 0.5, 1e4).unwrap();
    let fc = compute_constants(&flat, &flat_profile, 0.5).unwrap();
    let flat_zero = [fc.c1, fc.c2, fc.c3, fc.c4, fc.c5].iter().all(|c| *c == 0.0);
    verdict(
        10,
        worst < CONSTANT_REL_TOL && flat_zero,
        format!("C3 max relative deviation {worst:.2e}; flat constants all zero {flat_zero}"),
    );
}
