//! Spherically symmetric static reference manifolds
//! `ḡ = dr²/φ(r) + r² dS²` with static potential `V(r)`, their curvature, the
//! direction-dependent `T` function, and the isothermal profile
//! `ḡ = F⁴(ρ)(dρ² + ρ² dS²)`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::ode::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Schwarzschild,
    ReissnerNordstrom,
    Tabulated,
}

/// One row of a tabulated reference (`r,phi,V`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub r: f64,
    pub phi: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

#[derive(Debug)]
struct Table {
    phi: Pchip,
    potential: Pchip,
}

/// A spherically symmetric static reference manifold. Immutable and cheap to
/// clone; tabulated data is shared.
#[derive(Debug, Clone)]
pub struct ReferenceManifold {
    kind: ReferenceKind,
    mass: f64,
    charge: f64,
    r_horizon: f64,
    r_min: f64,
    r_max: f64,
    table: Option<Arc<Table>>,
}

/// Orthonormal-frame Ricci eigenvalues `(λ_rad, λ_tan)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciEigenvalues {
    pub radial: f64,
    pub tangential: f64,
}

impl RicciEigenvalues {
    /// `Ric(ν,ν)` for a unit normal at angle θ to `∂_r`.
    pub fn along(&self, cos_theta: f64) -> f64 {
        let c2 = cos_theta * cos_theta;
        c2 * self.radial + (1.0 - c2) * self.tangential
    }
}

/// Builds a reference manifold. `e` is ignored for Schwarzschild and tabulated kinds.
pub fn make_reference(kind: ReferenceKind, m: f64, e: f64, table: Option<&[TableRow]>) -> Result<ReferenceManifold> {
    match kind {
        ReferenceKind::Schwarzschild => ReferenceManifold::schwarzschild(m),
        ReferenceKind::ReissnerNordstrom => ReferenceManifold::reissner_nordstrom(m, e),
        ReferenceKind::Tabulated => {
            let rows = table.ok_or_else(|| Error::InvalidTable("tabulated kind needs data".into()))?;
            ReferenceManifold::tabulated(m, rows)
        }
    }
}

impl ReferenceManifold {
    pub fn schwarzschild(m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveMass(m));
        }
        Ok(Self {
            kind: ReferenceKind::Schwarzschild,
            mass: m,
            charge: 0.0,
            r_horizon: 2.0 * m,
            r_min: 2.0 * m,
            r_max: f64::INFINITY,
            table: None,
        })
    }

    pub fn reissner_nordstrom(m: f64, e: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveMass(m));
        }
        if e.abs() > m {
            return Err(Error::ExtremalViolation { m, e });
        }
        let rh = m + (m * m - e * e).sqrt();
        Ok(Self {
            kind: ReferenceKind::ReissnerNordstrom,
            mass: m,
            charge: e,
            r_horizon: rh,
            r_min: rh,
            r_max: f64::INFINITY,
            table: None,
        })
    }

    /// Tabulated reference. The first row may sit on the horizon (`φ = 0`);
    /// every later row needs `φ, V > 0`. Without a horizon row, the table
    /// start is the inner validity bound and `r_horizon` is reported as 0.
    pub fn tabulated(m: f64, rows: &[TableRow]) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::NonPositiveMass(m));
        }
        if rows.len() < 4 {
            return Err(Error::InvalidTable("need at least four rows".into()));
        }
        if rows.windows(2).any(|w| !(w[1].r > w[0].r)) {
            return Err(Error::InvalidTable("r must be strictly increasing".into()));
        }
        if rows[0].r <= 0.0 {
            return Err(Error::InvalidTable("r must be positive".into()));
        }
        if rows[0].phi < 0.0 || rows[0].v < 0.0 {
            return Err(Error::InvalidTable(format!("negative data at r = {}", rows[0].r)));
        }
        if let Some(bad) = rows[1..].iter().find(|row| !(row.phi > 0.0 && row.v > 0.0)) {
            return Err(Error::InvalidTable(format!("phi and V must be positive past the horizon (r = {})", bad.r)));
        }
        let r: Vec<f64> = rows.iter().map(|row| row.r).collect();
        let phi = Pchip::new(r.clone(), rows.iter().map(|row| row.phi).collect())?;
        let potential = Pchip::new(r.clone(), rows.iter().map(|row| row.v).collect())?;
        let r_horizon = if rows[0].phi == 0.0 { rows[0].r } else { 0.0 };
        Ok(Self {
            kind: ReferenceKind::Tabulated,
            mass: m,
            charge: 0.0,
            r_horizon,
            r_min: r[0],
            r_max: r[r.len() - 1],
            table: Some(Arc::new(Table { phi, potential })),
        })
    }

    /// Euclidean space written as a tabulated reference with φ ≡ V ≡ 1.
    pub fn flat(r_min: f64, r_max: f64) -> Result<Self> {
        let n = 64;
        let rows: Vec<TableRow> = (0..n)
            .map(|i| {
                let r = r_min * (r_max / r_min).powf(i as f64 / (n - 1) as f64);
                TableRow { r, phi: 1.0, v: 1.0 }
            })
            .collect();
        Self::tabulated(0.0, &rows)
    }

    pub fn load_csv(path: &Path, m: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize::<TableRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        Self::tabulated(m, &rows)
    }

    /// Decay exponent `τ` in `V − 1 ~ r^{-τ}`, fitted on the outer third of
    /// a table. `None` for analytic references or when `V − 1` vanishes there.
    pub fn potential_decay_exponent(&self) -> Option<f64> {
        let table = self.table.as_ref()?;
        let (r, v) = (table.potential.knots(), table.potential.values());
        let pts: Vec<(f64, f64)> = r[2 * r.len() / 3..]
            .iter()
            .zip(&v[2 * v.len() / 3..])
            .filter(|(_, v)| (*v - 1.0).abs() > 1e-12)
            .map(|(r, v)| (r.ln(), (v - 1.0).abs().ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        Some(-sxy / sxx)
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn charge(&self) -> f64 {
        self.charge
    }
    pub fn r_horizon(&self) -> f64 {
        self.r_horizon
    }
    /// Inner end of the validity domain (the horizon when one exists).
    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Whether `r` lies strictly outside the horizon and inside the tabulation.
    pub fn check_radius(&self, r: f64) -> Result<()> {
        let inner_ok = if self.r_horizon > 0.0 { r > self.r_horizon } else { r >= self.r_min };
        if !inner_ok || !r.is_finite() {
            return Err(Error::InsideHorizon { r, r_horizon: self.r_horizon.max(self.r_min) });
        }
        if r > self.r_max * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { value: r, lo: self.r_min, hi: self.r_max });
        }
        Ok(())
    }

    /// `(φ, φ', φ'')` at `r` without domain checks.
    pub fn phi3(&self, r: f64) -> (f64, f64, f64) {
        match &self.table {
            None => {
                let (m, q) = (self.mass, self.charge * self.charge);
                (
                    1.0 - 2.0 * m / r + q / (r * r),
                    2.0 * m / (r * r) - 2.0 * q / r.powi(3),
                    -4.0 * m / r.powi(3) + 6.0 * q / r.powi(4),
                )
            }
            Some(t) => t.phi.eval3(r),
        }
    }

    /// `(V, V', V'')` at `r` without domain checks.
    pub fn potential3(&self, r: f64) -> (f64, f64, f64) {
        match &self.table {
            None => {
                let (p, dp, ddp) = self.phi3(r);
                let v = p.max(0.0).sqrt();
                (v, dp / (2.0 * v), ddp / (2.0 * v) - dp * dp / (4.0 * v.powi(3)))
            }
            Some(t) => t.potential.eval3(r),
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.phi3(r).0
    }

    pub fn potential(&self, r: f64) -> f64 {
        self.potential3(r).0
    }

    /// `(1/√φ − 1)·r` as a function of `x = 1/r`, finite as `x → 0`.
    fn isothermal_tail_integrand(&self, x: f64) -> f64 {
        let (m, q) = (self.mass, self.charge * self.charge);
        let phi = 1.0 - 2.0 * m * x + q * x * x;
        let sp = phi.sqrt();
        (2.0 * m - q * x) / (sp * (1.0 + sp))
    }

    pub fn ricci_eigenvalues(&self, r: f64) -> Result<RicciEigenvalues> {
        self.check_radius(r)?;
        Ok(self.ricci_unchecked(r))
    }

    pub(crate) fn ricci_unchecked(&self, r: f64) -> RicciEigenvalues {
        let (p, dp, _) = self.phi3(r);
        RicciEigenvalues { radial: -dp / r, tangential: -dp / (2.0 * r) + (1.0 - p) / (r * r) }
    }

    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        let l = self.ricci_eigenvalues(r)?;
        Ok(l.radial + 2.0 * l.tangential)
    }

    /// Hessian of V in the orthonormal frame: `(D²V(e_r,e_r), D²V(e_t,e_t))`.
    fn potential_hessian(&self, r: f64) -> (f64, f64) {
        let (p, dp, _) = self.phi3(r);
        let (_, dv, ddv) = self.potential3(r);
        (p * ddv + 0.5 * dp * dv, p / r * dv)
    }

    /// `T` from `Δ̄V − D̄²V(ν,ν) + V·Ric(ν,ν) = T·V`.
    pub fn t_function(&self, r: f64, cos_theta: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.t_unchecked(r, cos_theta))
    }

    pub(crate) fn t_unchecked(&self, r: f64, cos_theta: f64) -> f64 {
        let (hrr, htt) = self.potential_hessian(r);
        let lap = hrr + 2.0 * htt;
        let c2 = cos_theta * cos_theta;
        let hnn = c2 * hrr + (1.0 - c2) * htt;
        let v = self.potential(r);
        (lap - hnn) / v + self.ricci_unchecked(r).along(cos_theta)
    }

    /// Spacetime Einstein tensor of `−V²dt² + ḡ` in a static orthonormal
    /// frame: `(G(e₀,e₀), G(ν,ν))`.
    pub fn einstein_components(&self, r: f64, cos_theta: f64) -> Result<(f64, f64)> {
        self.check_radius(r)?;
        let ric = self.ricci_unchecked(r);
        let rbar = ric.radial + 2.0 * ric.tangential;
        let (hrr, htt) = self.potential_hessian(r);
        let lap = hrr + 2.0 * htt;
        let c2 = cos_theta * cos_theta;
        let hnn = c2 * hrr + (1.0 - c2) * htt;
        let v = self.potential(r);
        let g00 = 0.5 * rbar;
        let gnn = ric.along(cos_theta) - hnn / v - 0.5 * rbar + lap / v;
        Ok((g00, gnn))
    }

    /// Threshold `G(r) ∈ [0, 1]` with `Ric(ν,ν) < 0 ⇔ cos θ > G(r)`.
    pub fn angle_threshold(&self, r: f64) -> f64 {
        let l = self.ricci_unchecked(r);
        if l.radial >= 0.0 {
            1.0
        } else if l.tangential <= 0.0 {
            0.0
        } else {
            (l.tangential / (l.tangential - l.radial)).sqrt()
        }
    }

    /// The angle threshold built from the printed Reissner–Nordström Ricci
    /// diagonal (radial entry `−2m/r³ + e²/r⁴`): `√(m/(3m − e²/r))`.
    /// Reported alongside [`Self::angle_threshold`]; never used for gating.
    pub fn angle_threshold_printed_rn(&self, r: f64) -> Option<f64> {
        (self.kind == ReferenceKind::ReissnerNordstrom)
            .then(|| (self.mass / (3.0 * self.mass - self.charge * self.charge / r)).sqrt())
    }
}

/// The isothermal change of variables on a finite range of area radii.
///
/// Internally `ln r` is tabulated on a uniform grid in `ln ρ`, integrating
/// `d ln r / d ln ρ = √φ(r)` inward from the outer end; evaluation is cubic
/// Hermite in `ln ρ` using the exact slope `√φ`.
#[derive(Debug, Clone)]
pub struct ConformalProfile {
    reference: ReferenceManifold,
    y0: f64,
    step: f64,
    ln_r: Arc<Vec<f64>>,
    slope: Arc<Vec<f64>>,
    rho_horizon: f64,
}

/// `F` and its first two ρ-derivatives together with the area radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorJet {
    pub rho: f64,
    pub r: f64,
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub r: f64,
    pub rho: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

const PROFILE_STEP: f64 = 2e-3;

/// `ln(ρ/r)` at `r`, normalized so that `ρ/r → 1` at infinity (analytic
/// kinds) or at the outer tabulation bound.
fn log_rho_over_r(reference: &ReferenceManifold, r: f64) -> f64 {
    match reference.kind {
        ReferenceKind::Tabulated => {
            let rmax = reference.r_max;
            let panels = ((rmax / r).ln() / 5e-3).ceil().max(8.0) as usize;
            // ψ(r) = −∫_r^{rmax} (1/√φ − 1) dt/t, integrated in ln t
            -ode::quad(
                |lt| {
                    let t = lt.exp();
                    1.0 / reference.phi(t).sqrt() - 1.0
                },
                r.ln(),
                rmax.ln(),
                panels,
            )
        }
        _ => {
            let xmax = 1.0 / r;
            -ode::quad(|x| reference.isothermal_tail_integrand(x), 0.0, xmax, 256)
        }
    }
}

impl ConformalProfile {
    /// Profile covering area radii `[r_lo, r_hi]`.
    pub fn new(reference: &ReferenceManifold, r_lo: f64, r_hi: f64) -> Result<Self> {
        if !(r_hi > r_lo) {
            return Err(Error::InvalidGrid(format!("empty profile range [{r_lo}, {r_hi}]")));
        }
        reference.check_radius(r_lo)?;
        reference.check_radius(r_hi)?;
        let ln_rho_hi = r_hi.ln() + log_rho_over_r(reference, r_hi);
        let tol = Tolerance { rtol: 1e-12, atol: 1e-14, max_steps: 100_000 };
        let ln_r_lo = r_lo.ln();
        let mut nodes = vec![r_hi.ln()];
        let mut y = ln_rho_hi;
        let mut state = r_hi.ln();
        let rhs = |_: f64, l: &[f64], d: &mut [f64]| {
            d[0] = reference.phi(l[0].exp()).max(0.0).sqrt();
        };
        while state > ln_r_lo {
            let next = ode::integrate(rhs, y, &[state], y - PROFILE_STEP, tol)?;
            y -= PROFILE_STEP;
            state = next[0];
            if !state.is_finite() {
                return Err(Error::Integrator("profile integration diverged".into()));
            }
            nodes.push(state);
            if nodes.len() > 10_000_000 {
                return Err(Error::Integrator("profile did not reach the inner radius".into()));
            }
        }
        nodes.reverse();
        let slope: Vec<f64> = nodes.iter().map(|&l| reference.phi(l.exp()).max(0.0).sqrt()).collect();
        let rho_horizon = match reference.kind {
            ReferenceKind::Schwarzschild | ReferenceKind::ReissnerNordstrom => {
                let (m, e) = (reference.mass, reference.charge);
                0.5 * (m * m - e * e).sqrt()
            }
            ReferenceKind::Tabulated => {
                if reference.r_horizon > 0.0 {
                    y.exp()
                } else {
                    0.0
                }
            }
        };
        Ok(Self { reference: reference.clone(), y0: y, step: PROFILE_STEP, ln_r: Arc::new(nodes), slope: Arc::new(slope), rho_horizon })
    }

    pub fn reference(&self) -> &ReferenceManifold {
        &self.reference
    }

    pub fn rho_horizon(&self) -> f64 {
        self.rho_horizon
    }

    pub fn rho_range(&self) -> (f64, f64) {
        (self.y0.exp(), (self.y0 + self.step * (self.ln_r.len() - 1) as f64).exp())
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.ln_r[0].exp(), self.ln_r[self.ln_r.len() - 1].exp())
    }

    fn hermite(&self, y: f64) -> Result<f64> {
        let n = self.ln_r.len();
        let t = (y - self.y0) / self.step;
        if !(t >= -1e-9 && t <= (n - 1) as f64 + 1e-9) {
            let (lo, hi) = self.rho_range();
            return Err(Error::OutOfRange { value: y.exp(), lo, hi });
        }
        let k = (t.floor().max(0.0) as usize).min(n - 2);
        let s = t - k as f64;
        let (p0, p1) = (self.ln_r[k], self.ln_r[k + 1]);
        let (m0, m1) = (self.slope[k] * self.step, self.slope[k + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1)
    }

    pub fn r_of_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.hermite(rho.ln())?.exp())
    }

    pub fn rho_of_r(&self, r: f64) -> Result<f64> {
        let target = r.ln();
        let n = self.ln_r.len();
        if !(target >= self.ln_r[0] - 1e-12 && target <= self.ln_r[n - 1] + 1e-12) {
            let (lo, hi) = self.r_range();
            return Err(Error::OutOfRange { value: r, lo, hi });
        }
        let k = match self.ln_r.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let (a, b) = (self.ln_r[k], self.ln_r[k + 1]);
        let frac = if b > a { (target - a) / (b - a) } else { 0.0 };
        let mut y = self.y0 + self.step * (k as f64 + frac.clamp(0.0, 1.0));
        for _ in 0..50 {
            let resid = self.hermite(y)? - target;
            let slope = self.reference.phi((target + 0.0).exp()).max(0.0).sqrt().max(1e-300);
            let dy = resid / slope;
            y -= dy;
            if dy.abs() < 1e-15 {
                break;
            }
        }
        Ok(y.exp())
    }

    /// `F(ρ)`, `F'(ρ)`, `F''(ρ)` and `r(ρ)`.
    pub fn factor(&self, rho: f64) -> Result<FactorJet> {
        let r = self.r_of_rho(rho)?;
        let (p, dp, _) = self.reference.phi3(r);
        let l1 = p.max(0.0).sqrt();
        let l2 = 0.5 * r * dp;
        let f = (r / rho).sqrt();
        let fy = 0.5 * f * (l1 - 1.0);
        let fyy = f * (0.25 * (l1 - 1.0).powi(2) + 0.5 * l2);
        Ok(FactorJet { rho, r, f, df: fy / rho, d2f: (fyy - fy) / (rho * rho) })
    }

    pub fn samples(&self, r_grid: &[f64]) -> Result<Vec<ProfileSample>> {
        r_grid
            .iter()
            .map(|&r| {
                let rho = self.rho_of_r(r)?;
                Ok(ProfileSample { r, rho, f: (r / rho).sqrt() })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path, r_grid: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in self.samples(r_grid)? {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the profile over the span of `r_grid` (which must be increasing
/// and outside the horizon).
pub fn isothermal_profile(reference: &ReferenceManifold, r_grid: &[f64]) -> Result<ConformalProfile> {
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("r_grid must be increasing with at least two points".into()));
    }
    for &r in r_grid {
        reference.check_radius(r)?;
    }
    ConformalProfile::new(reference, r_grid[0], r_grid[r_grid.len() - 1])
}

/// Which pointwise property of a reference failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticProperty {
    PotentialIncreasing,
    FactorDecreasing,
    RadialRicciNegative,
    TNonnegative,
    TBelowScalarCurvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticViolation {
    pub property: StaticProperty,
    pub r: f64,
    pub cos_theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub passed: bool,
    pub first_violation: Option<StaticViolation>,
    /// First violation of each failing property.
    pub violations: Vec<StaticViolation>,
    /// Points `(r, cos θ, which)` where `T = 0` or `T = R̄` holds to 1e-12.
    pub equalities: Vec<(f64, f64, String)>,
    pub min_t: f64,
    pub min_rbar_minus_t: f64,
}

/// Pointwise checks of the reference-manifold conditions on `r_grid`, with
/// `T` sampled at 11 angles.
pub fn static_check(reference: &ReferenceManifold, r_grid: &[f64]) -> Result<StaticReport> {
    let profile = isothermal_profile(reference, r_grid)?;
    let mut first: Vec<StaticViolation> = Vec::new();
    let mut equalities = Vec::new();
    let (mut min_t, mut min_gap) = (f64::INFINITY, f64::INFINITY);
    let note = |seen: &mut Vec<StaticViolation>, property, r, c, value| {
        if !seen.iter().any(|v| v.property == property) {
            seen.push(StaticViolation { property, r, cos_theta: c, value });
        }
    };
    let scale_tol = 1e-12;
    for &r in r_grid {
        let (_, dv, _) = reference.potential3(r);
        if !(dv > 0.0) {
            note(&mut first, StaticProperty::PotentialIncreasing, r, f64::NAN, dv);
        }
        let rho = profile.rho_of_r(r)?;
        let df = profile.factor(rho)?.df;
        if !(df < 0.0) {
            note(&mut first, StaticProperty::FactorDecreasing, r, f64::NAN, df);
        }
        let ric = reference.ricci_unchecked(r);
        if !(ric.radial < 0.0) {
            note(&mut first, StaticProperty::RadialRicciNegative, r, f64::NAN, ric.radial);
        }
        let rbar = ric.radial + 2.0 * ric.tangential;
        for k in 0..=10 {
            let c = k as f64 / 10.0;
            let t = reference.t_unchecked(r, c);
            let tol = scale_tol * (rbar.abs() + t.abs()).max(1.0 / (r * r));
            min_t = min_t.min(t);
            min_gap = min_gap.min(rbar - t);
            if t < -tol {
                note(&mut first, StaticProperty::TNonnegative, r, c, t);
            }
            if rbar - t < -tol {
                note(&mut first, StaticProperty::TBelowScalarCurvature, r, c, rbar - t);
            }
            if rbar.abs() > tol {
                if t.abs() <= tol {
                    equalities.push((r, c, "T = 0".to_string()));
                }
                if (rbar - t).abs() <= tol {
                    equalities.push((r, c, "T = R".to_string()));
                }
            }
        }
    }
    Ok(StaticReport { passed: first.is_empty(), first_violation: first.first().cloned(), violations: first, equalities, min_t, min_rbar_minus_t: min_gap })
}
