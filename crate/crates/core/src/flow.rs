//! The unit-normal flow of star-shaped surfaces, evolved as the Euclidean
//! graph flow with normal speed `1/F²`, plus trajectory diagnostics and the
//! condition-preservation constants.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refgeom::{ConformalProfile, ReferenceKind, ReferenceManifold};
use crate::sphere::SphereGrid;
use crate::surfgeom::{self, condition_report, max_angle_threshold, ConditionKind, ConditionReport, StarSurface, SurfaceGeometry};

/// Grid used when no resolution is requested.
pub const DEFAULT_RESOLUTION: (usize, usize) = (16, 32);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub ds: f64,
    pub s_max: f64,
    /// Threshold margin for strict inequalities.
    #[serde(default = "default_margin")]
    pub tolerance: f64,
    #[serde(default)]
    pub abort_on_condition_failure: bool,
    pub resolution: (usize, usize),
    /// Store every k-th slice (the first and last are always stored).
    #[serde(default = "default_keep")]
    pub keep_every: usize,
}

fn default_margin() -> f64 {
    1e-8
}

fn default_keep() -> usize {
    1
}

impl FlowConfig {
    pub fn new(ds: f64, s_max: f64, resolution: (usize, usize)) -> Self {
        Self { ds, s_max, tolerance: 1e-8, abort_on_condition_failure: false, resolution, keep_every: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ds > 0.0) || !(self.s_max > 0.0) {
            return Err(Error::Config("flow needs ds > 0 and s_max > 0".into()));
        }
        if self.keep_every == 0 {
            return Err(Error::Config("keep_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.s_max / self.ds).round() as usize
    }
}

/// `∂G/∂s` of the graph flow.
fn graph_speed(profile: &ConformalProfile, grid: &SphereGrid, g: &[f64]) -> Result<Vec<f64>> {
    let d = grid.derivatives(g, &[(1, 0), (0, 1)]);
    (0..g.len())
        .map(|k| {
            let s = grid.theta(k).sin();
            let grad2 = d[0][k] * d[0][k] + d[1][k] * d[1][k] / (s * s);
            let f = profile.factor(g[k])?.f;
            Ok((1.0 + grad2 / (g[k] * g[k])).sqrt() / (f * f))
        })
        .collect()
}

/// Outcome of one flow step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Label-space Courant number of the step.
    pub cfl: f64,
    pub cfl_ok: bool,
}

fn courant(grid: &SphereGrid, geo: &SurfaceGeometry, ds: f64) -> f64 {
    let th = grid.thetas();
    let dth = th.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min).min(th[0]);
    let dph = 2.0 * PI / grid.n_phi() as f64;
    geo.label_velocity.iter().map(|v| ds * (v[0].abs() / dth + v[1].abs() / dph)).fold(0.0, f64::max)
}

/// One RK4 step of the graph flow followed by spectral projection.
pub fn step_flow(surface: &StarSurface, ds: f64) -> Result<StarSurface> {
    let (p, grid) = (&surface.profile, &surface.grid);
    let g0 = &surface.g;
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k1 = graph_speed(p, grid, g0)?;
    let k2 = graph_speed(p, grid, &stage(g0, &k1, 0.5 * ds))?;
    let k3 = graph_speed(p, grid, &stage(g0, &k2, 0.5 * ds))?;
    let k4 = graph_speed(p, grid, &stage(g0, &k3, ds))?;
    let g1: Vec<f64> = (0..g0.len()).map(|i| g0[i] + ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    let g1 = grid.filter(&g1);
    if g1.iter().any(|v| !v.is_finite() || *v <= p.rho_horizon()) {
        return Err(Error::LostStarShape { s: f64::NAN });
    }
    Ok(StarSurface { profile: p.clone(), grid: grid.clone(), g: g1 })
}

/// A surface of the foliation with its geometry and condition monitors.
#[derive(Debug, Clone)]
pub struct Slice {
    pub s: f64,
    pub surface: StarSurface,
    pub geometry: SurfaceGeometry,
    pub conditions: ConditionReport,
}

impl Slice {
    pub fn new(s: f64, surface: StarSurface) -> Result<Self> {
        let geometry = surfgeom::geometry(&surface)?;
        let conditions = condition_report(&surface, &geometry);
        Ok(Self { s, surface, geometry, conditions })
    }

    pub fn summary(&self, m: f64, cfl: f64) -> SliceSummary {
        let geo = &self.geometry;
        let fold_min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        SliceSummary {
            s: self.s,
            min_rho: self.surface.min_rho(),
            max_rho: self.surface.max_rho(),
            min_cos_theta: fold_min(&mut geo.cos_theta.iter().cloned()),
            min_kappa_rho2: fold_min(&mut (0..geo.len()).map(|k| geo.kappa_flat[k].0 * self.surface.g[k].powi(2))),
            min_h0: fold_min(&mut geo.h0.iter().cloned()),
            max_gauss_residual: geo.max_gauss_residual(),
            condition_flags: ConditionKind::ALL.iter().map(|&k| if self.conditions.entry(k).passed { '1' } else { '0' }).collect(),
            foliation_passed: self.conditions.foliation_passed(),
            cfl,
            mass: m,
        }
    }
}

/// Per-slice scalar monitors of a flow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub s: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub min_cos_theta: f64,
    /// `min κ̃₁ ρ²`
    pub min_kappa_rho2: f64,
    pub min_h0: f64,
    pub max_gauss_residual: f64,
    /// One character per [`ConditionKind::ALL`] entry, `1` when it passes.
    pub condition_flags: String,
    pub foliation_passed: bool,
    pub cfl: f64,
    #[serde(skip)]
    mass: f64,
}

impl SliceSummary {
    /// `min cos θ − 1/√3` and `min κ̃ρ² − √3 m`.
    pub fn preservation_margins(&self) -> (f64, f64) {
        (self.min_cos_theta - 1.0 / 3f64.sqrt(), self.min_kappa_rho2 - 3f64.sqrt() * self.mass)
    }
}

/// Streams slices of the flow one step at a time.
pub struct FlowStepper {
    current: StarSurface,
    s: f64,
    ds: f64,
}

impl FlowStepper {
    pub fn new(surface: StarSurface, ds: f64) -> Self {
        Self { current: surface, s: 0.0, ds }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn surface(&self) -> &StarSurface {
        &self.current
    }

    pub fn advance(&mut self) -> Result<()> {
        let s_next = self.s + self.ds;
        self.current = step_flow(&self.current, self.ds).map_err(|e| match e {
            Error::LostStarShape { .. } | Error::NotImmersed(_) => Error::LostStarShape { s: s_next },
            other => other,
        })?;
        self.s = s_next;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    pub slice: usize,
    pub s: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Foliation {
    pub slices: Vec<Slice>,
    pub config: FlowConfig,
    /// One entry per step (including unstored slices).
    pub diagnostics: Vec<SliceSummary>,
    pub halted: Option<Halt>,
    /// Any step exceeded Courant number one.
    pub cfl_flag: bool,
}

impl Foliation {
    pub fn write_series_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "min_cos_theta", "min_kappa_rho2", "min_rho", "condition_flags"])?;
        for d in &self.diagnostics {
            w.write_record([
                format!("{:.10e}", d.s),
                format!("{:.15e}", d.min_cos_theta),
                format!("{:.15e}", d.min_kappa_rho2),
                format!("{:.15e}", d.min_rho),
                d.condition_flags.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the flow, calling `visit` on every slice (stored or not) in order.
pub fn run_flow_with(
    surface: &StarSurface,
    config: &FlowConfig,
    mut visit: impl FnMut(usize, &Slice) -> Result<()>,
) -> Result<Foliation> {
    config.validate()?;
    let steps = config.steps();
    if steps > 10_000_000 {
        return Err(Error::MaxStepsExceeded(10_000_000));
    }
    let m = surface.profile.reference().mass();
    let mut stepper = FlowStepper::new(surface.clone(), config.ds);
    let mut fol = Foliation { slices: Vec::new(), config: config.clone(), diagnostics: Vec::new(), halted: None, cfl_flag: false };
    for n in 0..=steps {
        if n > 0 {
            stepper.advance()?;
        }
        let s = n as f64 * config.ds;
        let slice = Slice::new(s, stepper.surface().clone()).map_err(|e| match e {
            Error::NotImmersed(_) => Error::LostStarShape { s },
            other => other,
        })?;
        let cfl = courant(&slice.surface.grid, &slice.geometry, config.ds);
        fol.cfl_flag |= cfl > 1.0;
        let summary = slice.summary(m, cfl);
        visit(n, &slice)?;
        let failed = !summary.foliation_passed;
        fol.diagnostics.push(summary);
        let last = n == steps;
        if config.abort_on_condition_failure && failed {
            let bad = slice.conditions.entries.iter().find(|e| e.kind.is_foliation_condition() && !e.passed).unwrap();
            fol.halted = Some(Halt { slice: n, s, reason: format!("{:?} fails with minimum {:.3e}", bad.kind, bad.min) });
            fol.slices.push(slice);
            break;
        }
        if n % config.keep_every == 0 || last {
            fol.slices.push(slice);
        }
    }
    Ok(fol)
}

pub fn run_flow(surface: &StarSurface, config: &FlowConfig) -> Result<Foliation> {
    run_flow_with(surface, config, |_, _| Ok(()))
}

/// Maxima of the trajectory residuals and minima of the lower-bound margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    /// `|Dρ/Ds − cos θ/F²|`
    pub rho_rate: f64,
    /// `|F²·(normal speed) − 1|` from the graph rate.
    pub lapse: f64,
    /// `|DH̃/Ds + Δ̃f + f|Ã|²|`
    pub flat_mean_curvature: f64,
    /// `|D det S̃/Ds + tr(adj S̃ · Hess f) + f det S̃ H̃|`
    pub flat_determinant: f64,
    /// `|DH₀/Ds + |A₀|² + Ric(ν,ν)|`
    pub curved_mean_curvature: f64,
    /// `|2K − 2 DH₀/Ds − H₀² − |A₀|² − R̄|`
    pub metric_scalar_curvature: f64,
    /// `min (D cos θ/Ds − [sin²θ/(F²ρ) − |∇f|])`
    pub cos_bound_margin: f64,
    /// `min (D(κ̃₁ρ²)/Ds − [2ρ² cos θ κ̃₁ − ρ³κ̃₁² − m_eff]/(ρF²))`
    pub kappa_bound_margin: f64,
    pub slices_used: usize,
}

/// Material derivative along normal trajectories at slice `i` from centered
/// differences in `s` and spectral label derivatives.
fn material_rate(grid: &SphereGrid, prev: &[f64], cur: &[f64], next: &[f64], h: f64, vel: &[[f64; 2]]) -> Vec<f64> {
    let d = grid.derivatives(cur, &[(1, 0), (0, 1)]);
    (0..cur.len()).map(|k| (next[k] - prev[k]) / (2.0 * h) + vel[k][0] * d[0][k] + vel[k][1] * d[1][k]).collect()
}

/// Checks the evolution laws on consecutive stored slices.
pub fn evolution_diagnostics(fol: &Foliation) -> Result<EvolutionReport> {
    let n = fol.slices.len();
    if n < 3 {
        return Err(Error::InsufficientSlices { needed: 3, have: n });
    }
    let reference = fol.slices[0].surface.profile.reference().clone();
    let schwarzschild = reference.kind() == ReferenceKind::Schwarzschild;
    let mut rep = EvolutionReport {
        rho_rate: 0.0,
        lapse: 0.0,
        flat_mean_curvature: 0.0,
        flat_determinant: 0.0,
        curved_mean_curvature: 0.0,
        metric_scalar_curvature: 0.0,
        cos_bound_margin: f64::INFINITY,
        kappa_bound_margin: f64::INFINITY,
        slices_used: 0,
    };
    for i in 1..n - 1 {
        let (a, b, c) = (&fol.slices[i - 1], &fol.slices[i], &fol.slices[i + 1]);
        let h = b.s - a.s;
        if ((c.s - b.s) - h).abs() > 1e-9 * h {
            continue;
        }
        rep.slices_used += 1;
        let grid = &b.surface.grid;
        let geo = &b.geometry;
        let vel = &geo.label_velocity;
        let g = &b.surface.g;
        let len = g.len();
        let rate = |f: &dyn Fn(&Slice) -> Vec<f64>| material_rate(grid, &f(a), &f(b), &f(c), h, vel);

        let d_rho = rate(&|sl| sl.surface.g.clone());
        let d_hflat = rate(&|sl| sl.geometry.h_flat.clone());
        let d_det = rate(&|sl| sl.geometry.det_flat.clone());
        let d_h0 = rate(&|sl| sl.geometry.h0.clone());
        let d_cos = rate(&|sl| sl.geometry.cos_theta.clone());
        let d_krho = rate(&|sl| (0..len).map(|k| sl.geometry.kappa_flat[k].0 * sl.surface.g[k].powi(2)).collect());

        for k in 0..len {
            let (fa, df, d2f) = (geo.factor[k], geo.dfactor[k], geo.d2factor[k]);
            let rho = g[k];
            let cos = geo.cos_theta[k];
            let sin = (1.0 - cos * cos).max(0.0).sqrt();
            let f = 1.0 / (fa * fa);
            let fp = -2.0 * df / fa.powi(3);
            let fpp = 6.0 * df * df / fa.powi(4) - 2.0 * d2f / fa.powi(3);

            rep.rho_rate = rep.rho_rate.max((d_rho[k] - cos * f).abs());
            let g_rate = (c.surface.g[k] - a.surface.g[k]) / (2.0 * h);
            rep.lapse = rep.lapse.max((g_rate * cos * fa * fa - 1.0).abs());

            // surface Hessian of f(ρ) as a (1,1) tensor
            let (xt, xp, w) = (geo.tangent_theta[k], geo.tangent_phi[k], geo.position[k]);
            let om = [w[0] / rho, w[1] / rho, w[2] / rho];
            let wt = om[0] * xt[0] + om[1] * xt[1] + om[2] * xt[2];
            let wp = om[0] * xp[0] + om[1] * xp[1] + om[2] * xp[2];
            let [e, fm, gm] = geo.sigma_flat[k];
            let hess = [
                fpp * wt * wt + fp / rho * (e - wt * wt),
                fpp * wt * wp + fp / rho * (fm - wt * wp),
                fpp * wp * wp + fp / rho * (gm - wp * wp),
            ];
            let det = e * gm - fm * fm;
            let inv = [gm / det, -fm / det, e / det];
            let raise = |t: [f64; 3]| -> [[f64; 2]; 2] {
                [
                    [inv[0] * t[0] + inv[1] * t[1], inv[0] * t[1] + inv[1] * t[2]],
                    [inv[1] * t[0] + inv[2] * t[1], inv[1] * t[1] + inv[2] * t[2]],
                ]
            };
            let sh = raise(geo.a_flat[k]);
            let hs = raise(hess);
            let hsharp = [
                [hs[0][0] - fp * cos * sh[0][0], hs[0][1] - fp * cos * sh[0][1]],
                [hs[1][0] - fp * cos * sh[1][0], hs[1][1] - fp * cos * sh[1][1]],
            ];
            let lap_f = hsharp[0][0] + hsharp[1][1];
            let (k1, k2) = geo.kappa_flat[k];
            let a2 = k1 * k1 + k2 * k2;
            rep.flat_mean_curvature = rep.flat_mean_curvature.max((d_hflat[k] + lap_f + f * a2).abs());
            let adj = [[sh[1][1], -sh[0][1]], [-sh[1][0], sh[0][0]]];
            let tr_adj_h = adj[0][0] * hsharp[0][0] + adj[0][1] * hsharp[1][0] + adj[1][0] * hsharp[0][1] + adj[1][1] * hsharp[1][1];
            rep.flat_determinant =
                rep.flat_determinant.max((d_det[k] + tr_adj_h + f * geo.det_flat[k] * geo.h_flat[k]).abs());

            rep.curved_mean_curvature = rep.curved_mean_curvature.max((d_h0[k] + geo.a0_norm2[k] + geo.ric_nu[k]).abs());
            let r_metric = 2.0 * geo.gauss_k[k] - 2.0 * d_h0[k] - geo.h0[k].powi(2) - geo.a0_norm2[k];
            rep.metric_scalar_curvature = rep.metric_scalar_curvature.max((r_metric - geo.rbar[k]).abs());

            let cos_lower = sin * sin * f / rho - fp.abs() * sin;
            rep.cos_bound_margin = rep.cos_bound_margin.min(d_cos[k] - cos_lower);
            let m_eff = if schwarzschild { reference.mass() } else { rho.powi(3) * fa * fa * fpp.max(fp / rho).max(0.0) };
            let kap_lower = (2.0 * rho * rho * cos * k1 - rho.powi(3) * k1 * k1 - m_eff) / (rho * fa * fa);
            rep.kappa_bound_margin = rep.kappa_bound_margin.min(d_krho[k] - kap_lower);
        }
    }
    if rep.slices_used == 0 {
        return Err(Error::InsufficientSlices { needed: 3, have: n });
    }
    Ok(rep)
}

/// Condition-preservation constants of a reference on `[rho_min, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `C2` with `max G` taken over `[rho_min, ∞)` instead of the whole exterior.
    pub c2_from_rho_min: f64,
    pub max_angle_exterior: f64,
    pub max_angle_from_rho_min: f64,
    /// Limits of the three bound fields as `ρ → ∞`.
    pub tail: [f64; 3],
    /// The sup did not settle within the sampled range.
    pub tail_unsettled: bool,
    pub rho_min: f64,
}

/// Bound fields `(C3, C4, C5)` at one radius.
fn constant_fields(reference: &ReferenceManifold, profile: &ConformalProfile, rho: f64) -> Result<[f64; 3]> {
    let j = profile.factor(rho)?;
    let (fa, df, d2f) = (j.f, j.df, j.d2f);
    let fp = -2.0 * df / fa.powi(3);
    let fpp = 6.0 * df * df / fa.powi(4) - 2.0 * d2f / fa.powi(3);
    let ric = reference.ricci_unchecked(j.r);
    let rbar = (ric.radial + 2.0 * ric.tangential).max(0.0);
    Ok([
        fp.abs() * (fa * fa * rho * rho + 1.0),
        (rho * rho + 1.0) * (2.0 * df.abs() / fa + fa * fa * rbar.sqrt()),
        fpp.abs().max((fp / rho).abs()) * (rho.powi(3) * fa * fa + 1.0),
    ])
}

pub fn compute_constants(reference: &ReferenceManifold, profile: &ConformalProfile, rho_min: f64) -> Result<Constants> {
    let (lo_p, hi) = profile.rho_range();
    if !(rho_min >= profile.rho_horizon()) {
        return Err(Error::InsideHorizon { r: rho_min, r_horizon: profile.rho_horizon() });
    }
    let lo = rho_min.max(lo_p);
    let n = 4000;
    let mut sup = [0.0f64; 3];
    let mut last = [0.0f64; 3];
    let mut decade_back = [0.0f64; 3];
    let decade_idx = {
        let span = (hi / lo).ln();
        if span > 10f64.ln() {
            ((1.0 - 10f64.ln() / span) * n as f64) as usize
        } else {
            0
        }
    };
    for i in 0..=n {
        let rho = lo * (hi / lo).powf(i as f64 / n as f64);
        let v = constant_fields(reference, profile, rho)?;
        for c in 0..3 {
            sup[c] = sup[c].max(v[c]);
        }
        if i == decade_idx {
            decade_back = v;
        }
        last = v;
    }
    let (tail, tail_unsettled) = match reference.kind() {
        ReferenceKind::Schwarzschild | ReferenceKind::ReissnerNordstrom => {
            let (m, e) = (reference.mass(), reference.charge());
            ([m, m + 2f64.sqrt() * e.abs(), 2.0 * m], false)
        }
        ReferenceKind::Tabulated => {
            let unsettled = (0..3).any(|c| (last[c] - decade_back[c]).abs() > 1e-2 * last[c].abs().max(1e-12));
            (last, unsettled)
        }
    };
    for c in 0..3 {
        sup[c] = sup[c].max(tail[c]);
    }
    let [c3, c4, c5] = sup;
    let g_ext = max_angle_threshold(profile, lo_p, false).unwrap_or(1.0);
    let g_min = max_angle_threshold(profile, lo, false).unwrap_or(1.0);
    let c2_with = |g: f64| {
        let angle_term = if c3 == 0.0 { 0.0 } else { c3 / (1.0 - g * g).sqrt() };
        angle_term.max(3f64.sqrt() * c4).max(3f64.sqrt() * c5)
    };
    Ok(Constants {
        c1: 3f64.sqrt() * c4.max(c5),
        c2: c2_with(g_ext),
        c3,
        c4,
        c5,
        c2_from_rho_min: c2_with(g_min),
        max_angle_exterior: g_ext,
        max_angle_from_rho_min: g_min,
        tail,
        tail_unsettled,
        rho_min: lo,
    })
}
