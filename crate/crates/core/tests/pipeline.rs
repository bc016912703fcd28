use approx::assert_relative_eq;

use qlp_core::bartnik::{scalar_residual, solve_u};
use qlp_core::energy::{adm_extrapolate, monotonicity_check, penrose_report, InnerData, Scenario};
use qlp_core::flow::{evolution_diagnostics, run_flow, FlowConfig};
use qlp_core::oracle::{round_flow_u, scenario_closed_form};
use qlp_core::refgeom::{ConformalProfile, ReferenceManifold};
use qlp_core::sphere::SphereGrid;
use qlp_core::surfgeom::StarSurface;

fn schwarzschild_profile() -> ConformalProfile {
    ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.02, 2000.0).unwrap()
}

fn round(profile: &ConformalProfile, grid: &SphereGrid, r: f64) -> StarSurface {
    StarSurface::round(profile, grid, profile.rho_of_r(r).unwrap()).unwrap()
}

#[test]
fn round_flow_follows_area_radius_ode() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(6, 12).unwrap();
    let fol = run_flow(&round(&p, &grid, 4.0), &FlowConfig::new(0.05, 20.0, (6, 12))).unwrap();
    let oracle = round_flow_u(p.reference(), 4.0, 1.0, 20.0, fol.slices.len() - 1).unwrap();
    for (sl, st) in fol.slices.iter().zip(&oracle) {
        let mean = sl.surface.g.iter().sum::<f64>() / sl.surface.g.len() as f64;
        assert!(sl.surface.g.iter().all(|g| (g - mean).abs() <= 1e-10 * mean));
        assert_relative_eq!(sl.geometry.r[0], st.r, max_relative = 1e-8);
    }
}

#[test]
fn trajectory_rate_on_round_schwarzschild_flow() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(6, 12).unwrap();
    let fol = run_flow(&round(&p, &grid, 4.0), &FlowConfig::new(1e-3, 0.05, (6, 12))).unwrap();
    let rep = evolution_diagnostics(&fol).unwrap();
    assert!(rep.rho_rate < 1e-6, "{}", rep.rho_rate);
}

#[test]
fn perturbed_flow_keeps_bound_margins() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(12, 24).unwrap();
    let s = StarSurface::ellipsoid(&p, &grid, 6.0, 0.08).unwrap();
    let fol = run_flow(&s, &FlowConfig::new(0.02, 2.0, (12, 24))).unwrap();
    let rep = evolution_diagnostics(&fol).unwrap();
    assert!(rep.cos_bound_margin >= 0.0, "{}", rep.cos_bound_margin);
    assert!(rep.kappa_bound_margin >= 0.0, "{}", rep.kappa_bound_margin);
    assert!(fol.slices.iter().all(|sl| sl.conditions.all_passed()));
}

#[test]
fn quadrupole_u_relaxes_within_bounds() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(12, 24).unwrap();
    let fol = run_flow(&round(&p, &grid, 5.0), &FlowConfig::new(0.05, 10.0, (12, 24))).unwrap();
    let u0 = grid.from_fn(|t, ph| 1.0 + 0.1 * t.sin().powi(2) * (2.0 * ph).cos());
    let field = solve_u(&fol, &u0).unwrap();
    let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(field.bounds, (lo, hi));
    assert!(field.max_bound_excess <= 1e-10);
    for u in &field.u {
        assert!(u.iter().all(|v| *v >= lo - 1e-10 && *v <= hi + 1e-10));
    }
    let dev = |u: &[f64]| u.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev(field.u.last().unwrap()) < 0.5 * dev(&u0));
}

#[test]
fn charged_reference_isolates_t_term() {
    let rn = ReferenceManifold::reissner_nordstrom(1.0, 0.5).unwrap();
    let p = ConformalProfile::new(&rn, rn.r_horizon() * 1.01, 500.0).unwrap();
    let grid = SphereGrid::new(16, 32).unwrap();
    let rho0 = p.rho_of_r(3.5).unwrap();
    let s = StarSurface::shifted_sphere(&p, &grid, rho0, 0.25 * rho0).unwrap();
    let fol = run_flow(&s, &FlowConfig::new(0.004, 0.1, (16, 32))).unwrap();
    let field = solve_u(&fol, &vec![1.1; grid.len()]).unwrap();
    let res = scalar_residual(&fol, &field).unwrap();
    let t_max = res.t_term.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(res.max_abs < 1e-5, "{}", res.max_abs);
    assert!(t_max > 20.0 * res.max_abs, "t term {t_max:e} vs residual {:e}", res.max_abs);
    // Dropping the term from the target leaves a residual of the term's size.
    let without = res.residual.iter().flatten().zip(res.t_term.iter().flatten()).map(|(r, t)| (r + t).abs()).fold(0.0, f64::max);
    assert!((without - t_max).abs() <= res.max_abs);
}

#[test]
fn energy_strictly_decreases_unless_u_is_one() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(4, 8).unwrap();
    let s = round(&p, &grid, 4.0);
    let fol = run_flow(&s, &FlowConfig::new(0.1, 60.0, (4, 8))).unwrap();
    let r0 = fol.slices[0].geometry.r[0];

    let field = solve_u(&fol, &vec![1.2; grid.len()]).unwrap();
    let trace = monotonicity_check(&fol, &field).unwrap();
    assert_relative_eq!(trace.energy[0], 1.0 / 3.0, epsilon = 1e-10);
    assert!(trace.energy.windows(2).all(|w| w[1] < w[0]));
    let fit = adm_extrapolate(&trace, r0).unwrap();
    assert!(fit.e_inf < 1.0 / 3.0);

    let ones = solve_u(&fol, &vec![1.0; grid.len()]).unwrap();
    let flat = monotonicity_check(&fol, &ones).unwrap();
    assert!(flat.energy.iter().all(|e| *e == 0.0));
    assert_eq!(adm_extrapolate(&flat, r0).unwrap().e_inf, 0.0);
}

#[test]
fn initial_energy_matches_closed_form() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(4, 8).unwrap();
    for (big_m, r0) in [(1.2, 4.0), (1.5, 9.0), (1.0, 6.0)] {
        let sc = Scenario {
            surface: round(&p, &grid, r0),
            inner: InnerData::SchwarzschildInterior { mass: big_m },
            flow: FlowConfig::new(0.5, 1.0, (4, 8)),
        };
        let rep = penrose_report(&sc).unwrap();
        let closed = scenario_closed_form(big_m, 1.0, r0).unwrap();
        assert!((rep.e0 - closed.lhs).abs() < 1e-10, "{} vs {}", rep.e0, closed.lhs);
        assert!((rep.rhs - closed.rhs).abs() < 1e-12);
    }
}

#[test]
fn charged_scenario_reports_margin() {
    let rn = ReferenceManifold::reissner_nordstrom(1.0, 0.5).unwrap();
    let p = ConformalProfile::new(&rn, rn.r_horizon() * 1.01, 2000.0).unwrap();
    let grid = SphereGrid::new(4, 8).unwrap();
    let sc = Scenario {
        surface: round(&p, &grid, 6.0),
        inner: InnerData::RnInterior { mass: 1.1, charge: 0.5 },
        flow: FlowConfig::new(0.25, 40.0, (4, 8)),
    };
    let rep = penrose_report(&sc).unwrap();
    assert!(rep.hypotheses.met);
    assert!(rep.margin.is_finite());
    assert!(rep.inequality_holds, "margin {}", rep.margin);
    assert!(rep.max_energy_increase <= 1e-8);
    let e_inf = rep.e_inf.unwrap();
    assert!(e_inf <= rep.e0 && e_inf >= rep.rhs - 1e-4);
}

#[test]
fn tilted_surface_fails_hypotheses() {
    let p = schwarzschild_profile();
    let grid = SphereGrid::new(12, 24).unwrap();
    let s = StarSurface::shifted_sphere(&p, &grid, 6.0, 5.0).unwrap();
    let h0 = qlp_core::surfgeom::geometry(&s).unwrap().h0;
    let sc = Scenario {
        surface: s,
        inner: InnerData::Custom { mean_curvature: h0.iter().map(|h| 0.9 * h).collect(), horizon_area: 0.0 },
        flow: FlowConfig::new(0.1, 1.0, (12, 24)),
    };
    let rep = penrose_report(&sc).unwrap();
    assert!(!rep.hypotheses.met);
    assert!(!rep.hypotheses.negative_normal_ricci);
    assert!(rep.trace.s.is_empty());
}
