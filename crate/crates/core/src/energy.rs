//! Quasi-local energy `E = (1/8π)∫V(H₀ − H̃)dσ` along a foliation, its exact
//! monotonicity identity, the large-`s` extrapolation, and the Penrose-type
//! pipeline.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bartnik::{initial_u, scalar_residual, ScalarResidual, UField, USolver};
use crate::error::{Error, Result};
use crate::flow::{compute_constants, run_flow_with, Constants, FlowConfig, Foliation, Slice};
use crate::oracle::{scenario_closed_form, ScenarioClosedForm};
use crate::refgeom::{ReferenceKind, ReferenceManifold};
use crate::surfgeom::{ConditionKind, ConditionReport, StarSurface, SurfaceGeometry};

/// Roundoff allowance when comparing `E(0)` with the horizon bound.
pub const MARGIN_ROUNDOFF: f64 = 1e-12;

fn check_u(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !(*v > 0.0)) {
        Some(i) => Err(Error::NonPositiveU { index: i, value: u[i] }),
        None => Ok(()),
    }
}

/// `(1/8π)∫V·H₀·(1 − 1/u)dσ`.
pub fn quasilocal_energy(geo: &SurfaceGeometry, u: &[f64]) -> Result<f64> {
    check_u(u)?;
    let integrand: Vec<f64> = (0..u.len()).map(|k| geo.v[k] * geo.h0[k] * (1.0 - 1.0 / u[k])).collect();
    Ok(geo.integrate(&integrand) / (8.0 * PI))
}

/// `(1/8π)∫V(H₀ − H)dσ` for a prescribed physical mean curvature.
pub fn energy_from_mean_curvature(geo: &SurfaceGeometry, h_phys: &[f64]) -> f64 {
    let integrand: Vec<f64> = (0..h_phys.len()).map(|k| geo.v[k] * (geo.h0[k] - h_phys[k])).collect();
    geo.integrate(&integrand) / (8.0 * PI)
}

/// `−(1/8π)∫(u − 1)²/u·[H₀ ∂V/∂ν + V(det A₀ − T/2)]dσ`.
pub fn energy_rate(geo: &SurfaceGeometry, u: &[f64]) -> Result<f64> {
    check_u(u)?;
    let integrand: Vec<f64> = (0..u.len())
        .map(|k| {
            let w = u[k] - 1.0;
            w * w / u[k] * (geo.h0[k] * geo.dv_dnu[k] + geo.v[k] * (geo.det_a0[k] - 0.5 * geo.t[k]))
        })
        .collect();
    Ok(-geo.integrate(&integrand) / (8.0 * PI))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub s: Vec<f64>,
    pub energy: Vec<f64>,
    /// Centered differences (absent at the two ends).
    pub rate_numeric: Vec<Option<f64>>,
    pub rate_formula: Vec<f64>,
    /// `max |numeric − formula|` over interior samples.
    pub max_discrepancy: f64,
    /// `max_s dE/ds` from the formula.
    pub monotonicity_margin: f64,
    /// Largest increase `E(s_{i+1}) − E(s_i)`.
    pub max_increase: f64,
}

impl EnergyTrace {
    pub fn push(&mut self, s: f64, energy: f64, rate: f64) {
        if let Some(&last) = self.energy.last() {
            self.max_increase = self.max_increase.max(energy - last);
        } else {
            self.monotonicity_margin = f64::NEG_INFINITY;
        }
        self.s.push(s);
        self.energy.push(energy);
        self.rate_formula.push(rate);
        self.rate_numeric.push(None);
        self.monotonicity_margin = self.monotonicity_margin.max(rate);
        let n = self.s.len();
        if n >= 3 {
            let (a, b) = (n - 3, n - 1);
            let h1 = self.s[n - 2] - self.s[a];
            let h2 = self.s[b] - self.s[n - 2];
            if (h1 - h2).abs() <= 1e-9 * h1 {
                let d = (self.energy[b] - self.energy[a]) / (h1 + h2);
                self.rate_numeric[n - 2] = Some(d);
                self.max_discrepancy = self.max_discrepancy.max((d - self.rate_formula[n - 2]).abs());
            }
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "E", "dEds_numeric", "dEds_formula"])?;
        for i in 0..self.s.len() {
            w.write_record([
                format!("{:.10e}", self.s[i]),
                format!("{:.15e}", self.energy[i]),
                self.rate_numeric[i].map(|v| format!("{v:.15e}")).unwrap_or_default(),
                format!("{:.15e}", self.rate_formula[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Energy and both derivative estimates on the stored slices.
pub fn monotonicity_check(fol: &Foliation, field: &UField) -> Result<EnergyTrace> {
    let n = fol.slices.len().min(field.u.len());
    if n < 3 {
        return Err(Error::InsufficientSlices { needed: 3, have: n });
    }
    let mut trace = EnergyTrace::default();
    for i in 0..n {
        let geo = &fol.slices[i].geometry;
        trace.push(fol.slices[i].s, quasilocal_energy(geo, &field.u[i])?, energy_rate(geo, &field.u[i])?);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub e_inf: f64,
    pub a: f64,
    pub b: f64,
    /// RMS misfit of the tail fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares fit `E = E_inf + a/x + b/x²`, `x = s + offset`, over the last
/// third of the trace.
pub fn adm_extrapolate(trace: &EnergyTrace, offset: f64) -> Result<Extrapolation> {
    let n = trace.s.len();
    let start = n - n / 3;
    let count = n - start;
    if count < 10 {
        return Err(Error::InsufficientSlices { needed: 30, have: n });
    }
    let mut a = DMatrix::zeros(count, 3);
    let mut y = DVector::zeros(count);
    let scale = trace.energy[start..].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for (row, i) in (start..n).enumerate() {
        let x = trace.s[i] + offset;
        a[(row, 0)] = 1.0;
        a[(row, 1)] = 1.0 / x;
        a[(row, 2)] = 1.0 / (x * x);
        y[row] = trace.energy[i];
    }
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-14).map_err(|e| Error::TailNotAsymptotic(e.to_string()))?;
    let fit = &a * &coef;
    let residual = ((&fit - &y).norm_squared() / count as f64).sqrt();
    if residual > 1e-6 * scale.max(1e-12) && residual > 1e-12 {
        return Err(Error::TailNotAsymptotic(format!("fit residual {residual:.3e} relative to {scale:.3e}")));
    }
    Ok(Extrapolation { e_inf: coef[0], a: coef[1], b: coef[2], residual, samples: count })
}

/// Inner (physical) data bounding the reference surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InnerData {
    /// Schwarzschild of mass `mass` outside its horizon; needs a round surface.
    SchwarzschildInterior { mass: f64 },
    /// Reissner–Nordström of mass `mass`, charge `charge`; needs a round surface.
    RnInterior { mass: f64, charge: f64 },
    /// Physical mean curvature per grid point and a declared horizon area.
    Custom { mean_curvature: Vec<f64>, horizon_area: f64 },
}

/// A quasi-local Penrose scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub surface: StarSurface,
    pub inner: InnerData,
    pub flow: FlowConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub mean_curvature_positive: bool,
    pub convex: bool,
    pub negative_normal_ricci: bool,
    /// The three foliation conditions held on every slice that was run.
    pub foliation_conditions: bool,
    pub first_failing_slice: Option<usize>,
    /// Informational sufficient conditions at `s = 0`.
    pub sufficient: SufficientConditions,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientConditions {
    /// `min κ̃ ρ²` against `√3·C` (`C = m` for Schwarzschild, `max(C4, C5)` otherwise).
    pub min_kappa_rho2: f64,
    pub kappa_threshold: f64,
    pub min_rho: f64,
    pub rho_threshold: f64,
    pub min_cos_theta: f64,
    pub cos_threshold: f64,
    pub constants: Option<Constants>,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenroseReport {
    pub hypotheses: Hypotheses,
    pub e0: f64,
    pub e_inf: Option<f64>,
    pub extrapolation: Option<Extrapolation>,
    pub extrapolation_error: Option<String>,
    pub rhs: f64,
    pub margin: f64,
    pub inequality_holds: bool,
    pub closed_form: Option<ScenarioClosedForm>,
    pub monotonicity_margin: f64,
    pub max_rate_discrepancy: f64,
    pub max_energy_increase: f64,
    pub max_scalar_residual: f64,
    pub max_bound_excess: f64,
    pub decay_settled: bool,
    pub initial_conditions: ConditionReport,
    /// Worst value of each condition over all slices.
    pub worst_conditions: Vec<(ConditionKind, f64)>,
    #[serde(skip)]
    pub trace: EnergyTrace,
    #[serde(skip)]
    pub u_field: Option<UField>,
}

impl InnerData {
    pub fn horizon_area(&self) -> Result<f64> {
        match *self {
            InnerData::SchwarzschildInterior { mass } => {
                if !(mass > 0.0) {
                    return Err(Error::NonPositiveMass(mass));
                }
                Ok(16.0 * PI * mass * mass)
            }
            InnerData::RnInterior { mass, charge } => {
                if !(mass > 0.0) {
                    return Err(Error::NonPositiveMass(mass));
                }
                if charge.abs() > mass {
                    return Err(Error::ExtremalViolation { m: mass, e: charge });
                }
                let rp = mass + (mass * mass - charge * charge).sqrt();
                Ok(4.0 * PI * rp * rp)
            }
            InnerData::Custom { horizon_area, .. } => {
                if !(horizon_area >= 0.0) {
                    return Err(Error::Config("horizon area must be nonnegative".into()));
                }
                Ok(horizon_area)
            }
        }
    }

    /// Physical mean curvature on the surface grid.
    pub fn mean_curvature(&self, surface: &StarSurface, geo: &SurfaceGeometry) -> Result<Vec<f64>> {
        let round_radius = || -> Result<f64> {
            let mean = surface.g.iter().sum::<f64>() / surface.g.len() as f64;
            if surface.g.iter().any(|v| (v - mean).abs() > 1e-12 * mean) {
                return Err(Error::Config("closed-form inner data needs a coordinate sphere".into()));
            }
            Ok(geo.r[0])
        };
        let phi_inner = |mass: f64, charge: f64, r: f64| 1.0 - 2.0 * mass / r + charge * charge / (r * r);
        match self {
            InnerData::SchwarzschildInterior { mass } => {
                let r = round_radius()?;
                let p = phi_inner(*mass, 0.0, r);
                if !(p > 0.0) {
                    return Err(Error::InsideHorizon { r, r_horizon: 2.0 * mass });
                }
                Ok(vec![2.0 / r * p.sqrt(); geo.len()])
            }
            InnerData::RnInterior { mass, charge } => {
                let r = round_radius()?;
                let p = phi_inner(*mass, *charge, r);
                if !(p > 0.0) || r <= mass + (mass * mass - charge * charge).max(0.0).sqrt() {
                    return Err(Error::InsideHorizon { r, r_horizon: mass + (mass * mass - charge * charge).max(0.0).sqrt() });
                }
                Ok(vec![2.0 / r * p.sqrt(); geo.len()])
            }
            InnerData::Custom { mean_curvature, .. } => {
                if mean_curvature.len() != geo.len() {
                    return Err(Error::Config(format!(
                        "custom mean curvature has {} values, grid has {}",
                        mean_curvature.len(),
                        geo.len()
                    )));
                }
                Ok(mean_curvature.clone())
            }
        }
    }
}

fn sufficient_conditions(reference: &ReferenceManifold, slice: &Slice) -> Result<SufficientConditions> {
    let geo = &slice.geometry;
    let g = &slice.surface.g;
    let min_kappa_rho2 = (0..g.len()).map(|k| geo.kappa_flat[k].0 * g[k] * g[k]).fold(f64::INFINITY, f64::min);
    let min_rho = slice.surface.min_rho();
    let min_cos = geo.cos_theta.iter().cloned().fold(f64::INFINITY, f64::min);
    let (c, rho_threshold, cos_threshold, constants) = match reference.kind() {
        ReferenceKind::Schwarzschild => {
            let m = reference.mass();
            (m, 3.0 * m, 1.0 / 3f64.sqrt(), None)
        }
        _ => {
            let k = compute_constants(reference, &slice.surface.profile, min_rho)?;
            (k.c4.max(k.c5), k.c2, slice.conditions.angle_threshold, Some(k))
        }
    };
    let kappa_threshold = 3f64.sqrt() * c;
    Ok(SufficientConditions {
        min_kappa_rho2,
        kappa_threshold,
        min_rho,
        rho_threshold,
        min_cos_theta: min_cos,
        cos_threshold,
        constants,
        holds: min_kappa_rho2 > kappa_threshold && min_rho > rho_threshold && min_cos > cos_threshold,
    })
}

/// Runs flow, u-equation and energy together and checks
/// `E(0) ≥ √(A_h/16π) − m`.
pub fn penrose_report(scenario: &Scenario) -> Result<PenroseReport> {
    let reference = scenario.surface.profile.reference().clone();
    let area_h = scenario.inner.horizon_area()?;
    let rhs = (area_h / (16.0 * PI)).sqrt() - reference.mass();
    let first = Slice::new(0.0, scenario.surface.clone())?;
    let geo0 = &first.geometry;
    let h_phys = scenario.inner.mean_curvature(&scenario.surface, geo0)?;
    let e0 = energy_from_mean_curvature(geo0, &h_phys);
    let closed_form = match (&scenario.inner, reference.kind()) {
        (InnerData::SchwarzschildInterior { mass }, ReferenceKind::Schwarzschild) => {
            scenario_closed_form(*mass, reference.mass(), geo0.r[0]).ok()
        }
        _ => None,
    };
    let mean_positive = h_phys.iter().all(|h| *h > 0.0) && geo0.h0.iter().all(|h| *h > 0.0);
    let convex = geo0.kappa.iter().all(|k| k.0 > 0.0);
    let neg_ric = first.conditions.entry(ConditionKind::NegativeNormalRicci).passed;
    let sufficient = sufficient_conditions(&reference, &first)?;
    let mut hyp = Hypotheses {
        mean_curvature_positive: mean_positive,
        convex,
        negative_normal_ricci: neg_ric,
        foliation_conditions: first.conditions.foliation_passed(),
        first_failing_slice: if first.conditions.foliation_passed() { None } else { Some(0) },
        sufficient,
        met: false,
    };
    let mut report = PenroseReport {
        hypotheses: hyp.clone(),
        e0,
        e_inf: None,
        extrapolation: None,
        extrapolation_error: None,
        rhs,
        margin: e0 - rhs,
        inequality_holds: e0 - rhs >= -MARGIN_ROUNDOFF,
        closed_form,
        monotonicity_margin: f64::NAN,
        max_rate_discrepancy: f64::NAN,
        max_energy_increase: f64::NAN,
        max_scalar_residual: f64::NAN,
        max_bound_excess: f64::NAN,
        decay_settled: false,
        initial_conditions: first.conditions.clone(),
        worst_conditions: ConditionKind::ALL.iter().map(|&k| (k, first.conditions.entry(k).min)).collect(),
        trace: EnergyTrace::default(),
        u_field: None,
    };
    if !(mean_positive && convex && neg_ric && hyp.foliation_conditions) {
        report.hypotheses = hyp;
        return Ok(report);
    }

    let u0 = initial_u(&h_phys, &geo0.h0)?;
    let grid = scenario.surface.grid.clone();
    let mut solver = USolver::new(&grid, u0)?;
    let mut trace = EnergyTrace::default();
    let mut window: Vec<(Slice, Vec<f64>)> = Vec::new();
    let mut max_residual = 0.0f64;
    let mut worst = report.worst_conditions.clone();
    let keep = scenario.flow.keep_every.max(1);
    let flow_config = FlowConfig { abort_on_condition_failure: true, ..scenario.flow.clone() };
    let fol = run_flow_with(&scenario.surface, &flow_config, |n, slice| {
        for (kind, w) in worst.iter_mut() {
            *w = w.min(slice.conditions.entry(*kind).min);
        }
        if !slice.conditions.foliation_passed() {
            return Ok(());
        }
        let u = solver.push(slice, n % keep == 0)?.to_vec();
        trace.push(slice.s, quasilocal_energy(&slice.geometry, &u)?, energy_rate(&slice.geometry, &u)?);
        window.push((slice.clone(), u));
        if window.len() > 3 {
            window.remove(0);
        }
        if window.len() == 3 {
            let mini = Foliation {
                slices: window.iter().map(|w| w.0.clone()).collect(),
                config: flow_config.clone(),
                diagnostics: Vec::new(),
                halted: None,
                cfl_flag: false,
            };
            let mut field = solver.field.clone();
            field.u = window.iter().map(|w| w.1.clone()).collect();
            field.s = window.iter().map(|w| w.0.s).collect();
            let res: ScalarResidual = scalar_residual(&mini, &field)?;
            max_residual = max_residual.max(res.max_abs);
        }
        Ok(())
    });
    let fol = match fol {
        Ok(f) => f,
        Err(Error::HypothesisFailure { slice, .. }) => {
            hyp.foliation_conditions = false;
            hyp.first_failing_slice = Some(slice);
            report.hypotheses = hyp;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    if let Some(h) = &fol.halted {
        hyp.foliation_conditions = false;
        hyp.first_failing_slice = Some(h.slice);
    }
    hyp.met = hyp.mean_curvature_positive && hyp.convex && hyp.negative_normal_ricci && hyp.foliation_conditions;
    let offset = (geo0.area() / (4.0 * PI)).sqrt();
    match adm_extrapolate(&trace, offset) {
        Ok(x) => {
            report.e_inf = Some(x.e_inf);
            report.extrapolation = Some(x);
        }
        Err(e) => report.extrapolation_error = Some(e.to_string()),
    }
    report.hypotheses = hyp;
    report.monotonicity_margin = trace.monotonicity_margin;
    report.max_rate_discrepancy = trace.max_discrepancy;
    report.max_energy_increase = trace.max_increase;
    report.max_scalar_residual = max_residual;
    report.max_bound_excess = solver.field.max_bound_excess;
    report.decay_settled = solver.field.decay_settled();
    report.worst_conditions = worst;
    report.trace = trace;
    report.u_field = Some(solver.field);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bartnik::solve_u;
    use crate::flow::run_flow;
    use crate::refgeom::ConformalProfile;
    use crate::sphere::SphereGrid;
    use approx::assert_relative_eq;

    fn round_slice(r: f64) -> Slice {
        let p = ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.05, 400.0).unwrap();
        let grid = SphereGrid::new(6, 12).unwrap();
        Slice::new(0.0, StarSurface::round(&p, &grid, p.rho_of_r(r).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn energy_values_on_coordinate_sphere() {
        let sl = round_slice(4.0);
        let n = sl.geometry.len();
        assert_eq!(quasilocal_energy(&sl.geometry, &vec![1.0; n]).unwrap(), 0.0);
        assert_relative_eq!(quasilocal_energy(&sl.geometry, &vec![1.2; n]).unwrap(), 1.0 / 3.0, epsilon = 1e-10);
        let u0 = 0.5f64.sqrt() / 0.4f64.sqrt();
        assert_relative_eq!(quasilocal_energy(&sl.geometry, &vec![u0; n]).unwrap(), 0.211_145_6, epsilon = 1e-7);
        assert!(quasilocal_energy(&sl.geometry, &vec![-1.0; n]).is_err());
        assert!(energy_rate(&sl.geometry, &vec![1.2; n]).unwrap() < 0.0);
        assert_eq!(energy_rate(&sl.geometry, &vec![1.0; n]).unwrap(), 0.0);
    }

    #[test]
    fn extrapolation_recovers_model() {
        let mut t = EnergyTrace::default();
        for i in 0..90 {
            let s = i as f64;
            let x = s + 4.0;
            t.push(s, 0.2 + 0.3 / x - 0.1 / (x * x), 0.0);
        }
        let x = adm_extrapolate(&t, 4.0).unwrap();
        assert_relative_eq!(x.e_inf, 0.2, epsilon = 1e-12);
        let mut short = EnergyTrace::default();
        short.push(0.0, 1.0, 0.0);
        assert!(adm_extrapolate(&short, 1.0).is_err());
    }

    #[test]
    fn round_monotonicity_and_oracle_agreement() {
        let p = ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.05, 400.0).unwrap();
        let grid = SphereGrid::new(6, 12).unwrap();
        let s = StarSurface::round(&p, &grid, p.rho_of_r(4.0).unwrap()).unwrap();
        let fol = run_flow(&s, &FlowConfig::new(0.01, 1.0, (6, 12))).unwrap();
        let field = solve_u(&fol, &vec![1.2; grid.len()]).unwrap();
        let trace = monotonicity_check(&fol, &field).unwrap();
        assert!(trace.max_discrepancy < 1e-5, "{}", trace.max_discrepancy);
        assert!(trace.max_increase <= 1e-8);
        let oracle = crate::oracle::round_flow_u(p.reference(), 4.0, 1.2, 1.0, 100).unwrap();
        for (st, u) in oracle.iter().zip(&field.u) {
            assert_relative_eq!(st.u, u[0], epsilon = 1e-6);
        }
    }

    #[test]
    fn penrose_equality_case() {
        let p = ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.05, 400.0).unwrap();
        let grid = SphereGrid::new(4, 8).unwrap();
        let s = StarSurface::round(&p, &grid, p.rho_of_r(7.0).unwrap()).unwrap();
        let sc = Scenario { surface: s, inner: InnerData::SchwarzschildInterior { mass: 1.0 }, flow: FlowConfig::new(0.5, 20.0, (4, 8)) };
        let rep = penrose_report(&sc).unwrap();
        assert!(rep.hypotheses.met);
        assert!(rep.e0.abs() < 1e-14, "{}", rep.e0);
        assert_relative_eq!(rep.rhs, 0.0, epsilon = 1e-15);
        assert!(rep.margin.abs() < 1e-14);
        assert!(rep.trace.energy.iter().all(|e| e.abs() < 1e-13));
    }
}
