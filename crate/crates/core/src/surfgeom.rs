//! Star-shaped surfaces `ρ = G(θ, φ)` in isothermal coordinates and their
//! geometry, both in the flat conformal picture and in the reference metric.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refgeom::ConformalProfile;
use crate::sphere::{Jet3, SphereGrid};

/// A star-shaped surface given by its isothermal radius on a sphere grid.
#[derive(Debug, Clone)]
pub struct StarSurface {
    pub profile: ConformalProfile,
    pub grid: SphereGrid,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SurfaceRow {
    theta: f64,
    phi: f64,
    #[serde(rename = "G")]
    g: f64,
}

impl StarSurface {
    pub fn new(profile: &ConformalProfile, grid: &SphereGrid, g: Vec<f64>) -> Result<Self> {
        if g.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("field has {} values, grid has {}", g.len(), grid.len())));
        }
        let floor = profile.rho_horizon();
        if let Some(k) = g.iter().position(|v| !(v.is_finite() && *v > floor)) {
            let r = profile.r_of_rho(g[k]).unwrap_or(f64::NAN);
            return Err(Error::InsideHorizon { r, r_horizon: profile.reference().r_horizon() });
        }
        Ok(Self { profile: profile.clone(), grid: grid.clone(), g })
    }

    pub fn from_fn(profile: &ConformalProfile, grid: &SphereGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(profile, grid, grid.from_fn(f))
    }

    /// The coordinate sphere `ρ = rho0`.
    pub fn round(profile: &ConformalProfile, grid: &SphereGrid, rho0: f64) -> Result<Self> {
        Self::new(profile, grid, vec![rho0; grid.len()])
    }

    /// `ρ = rho0 (1 + eps·P₂(cos θ))`.
    pub fn ellipsoid(profile: &ConformalProfile, grid: &SphereGrid, rho0: f64, eps: f64) -> Result<Self> {
        Self::from_fn(profile, grid, |t, _| {
            let x = t.cos();
            rho0 * (1.0 + eps * 0.5 * (3.0 * x * x - 1.0))
        })
    }

    /// A Euclidean sphere of radius `radius` (isothermal coordinates)
    /// centred at height `offset` on the polar axis.
    pub fn shifted_sphere(profile: &ConformalProfile, grid: &SphereGrid, radius: f64, offset: f64) -> Result<Self> {
        if offset.abs() >= radius {
            return Err(Error::NotImmersed("sphere does not enclose the origin".into()));
        }
        Self::from_fn(profile, grid, |t, _| {
            let (c, s) = (t.cos(), t.sin());
            offset * c + (radius * radius - offset * offset * s * s).sqrt()
        })
    }

    /// Reads `theta,phi,G` rows laid out on a Gauss–Legendre grid.
    pub fn load_csv(profile: &ConformalProfile, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize::<SurfaceRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        let n_phi = rows.iter().take_while(|r| (r.theta - rows[0].theta).abs() < 1e-12).count();
        if n_phi == 0 || rows.len() % n_phi != 0 {
            return Err(Error::InvalidGrid("surface rows do not form a tensor grid".into()));
        }
        let grid = SphereGrid::new(rows.len() / n_phi, n_phi)?;
        for (k, row) in rows.iter().enumerate() {
            if (row.theta - grid.theta(k)).abs() > 1e-9 || (row.phi - grid.phi(k)).abs() > 1e-9 {
                return Err(Error::InvalidGrid(format!("row {k} is not on the Gauss-Legendre grid")));
            }
        }
        Self::new(profile, &grid, rows.iter().map(|r| r.g).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (k, &g) in self.g.iter().enumerate() {
            w.serialize(SurfaceRow { theta: self.grid.theta(k), phi: self.grid.phi(k), g })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn min_rho(&self) -> f64 {
        self.g.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho(&self) -> f64 {
        self.g.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A scalar with first and second partials in `(θ, φ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct J2 {
    pub v: f64,
    pub t: f64,
    pub p: f64,
    pub tt: f64,
    pub tp: f64,
    pub pp: f64,
}

impl J2 {
    pub fn add(self, o: J2) -> J2 {
        J2 { v: self.v + o.v, t: self.t + o.t, p: self.p + o.p, tt: self.tt + o.tt, tp: self.tp + o.tp, pp: self.pp + o.pp }
    }

    pub fn mul(self, o: J2) -> J2 {
        J2 {
            v: self.v * o.v,
            t: self.t * o.v + self.v * o.t,
            p: self.p * o.v + self.v * o.p,
            tt: self.tt * o.v + 2.0 * self.t * o.t + self.v * o.tt,
            tp: self.tp * o.v + self.t * o.p + self.p * o.t + self.v * o.tp,
            pp: self.pp * o.v + 2.0 * self.p * o.p + self.v * o.pp,
        }
    }

    /// `h ∘ self` given `h`, `h'`, `h''` at `self.v`.
    pub fn compose(self, h: f64, dh: f64, ddh: f64) -> J2 {
        J2 {
            v: h,
            t: dh * self.t,
            p: dh * self.p,
            tt: ddh * self.t * self.t + dh * self.tt,
            tp: ddh * self.t * self.p + dh * self.tp,
            pp: ddh * self.p * self.p + dh * self.pp,
        }
    }
}

/// Gauss curvature of `E dθ² + 2F dθdφ + G dφ²` (Brioschi).
pub(crate) fn brioschi(e: J2, f: J2, g: J2) -> f64 {
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let m1 = [
        [-0.5 * e.pp + f.tp - 0.5 * g.tt, 0.5 * e.t, f.t - 0.5 * e.p],
        [f.p - 0.5 * g.t, e.v, f.v],
        [0.5 * g.p, f.v, g.v],
    ];
    let m2 = [[0.0, 0.5 * e.p, 0.5 * g.t], [0.5 * e.p, e.v, f.v], [0.5 * g.t, f.v, g.v]];
    let w = e.v * g.v - f.v * f.v;
    (det3(m1) - det3(m2)) / (w * w)
}

type V3 = [f64; 3];

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lin(terms: &[(f64, V3)]) -> V3 {
    let mut out = [0.0; 3];
    for (c, v) in terms {
        for k in 0..3 {
            out[k] += c * v[k];
        }
    }
    out
}

/// Ordered eigenvalues of the shape operator `I⁻¹ II`, taken as the
/// symmetric matrix `L⁻¹ II L⁻ᵀ` with `I = LLᵀ`.
fn principal(e: f64, f: f64, g: f64, l: f64, m: f64, n: f64) -> (f64, f64) {
    let a = e.sqrt();
    let b = f / a;
    let c = (g - b * b).sqrt();
    let s11 = l / e;
    let s12 = (m - l * b / a) / (a * c);
    let s22 = (l * b * b / e - 2.0 * m * b / a + n) / (c * c);
    let half_tr = 0.5 * (s11 + s22);
    let disc = (0.5 * (s11 - s22)).hypot(s12);
    (half_tr - disc, half_tr + disc)
}

/// Per-node geometry of a [`StarSurface`]. Curved fields are empty until
/// [`curved_geometry`] has run.
#[derive(Debug, Clone, Default)]
pub struct SurfaceGeometry {
    pub jet: Jet3,
    /// Position, tangents `X_θ`, `X_φ` and unit normal in isothermal coordinates.
    pub position: Vec<V3>,
    pub tangent_theta: Vec<V3>,
    pub tangent_phi: Vec<V3>,
    pub normal: Vec<V3>,
    pub sigma_flat: Vec<[f64; 3]>,
    pub a_flat: Vec<[f64; 3]>,
    pub kappa_flat: Vec<(f64, f64)>,
    pub h_flat: Vec<f64>,
    pub det_flat: Vec<f64>,
    pub support: Vec<f64>,
    pub cos_theta: Vec<f64>,
    /// Count of nodes with `κ̃₁ ≤ 0`.
    pub non_convex_points: usize,
    /// Spectral power of `G` sits in the top quarter of degrees.
    pub under_resolved: bool,

    pub r: Vec<f64>,
    pub factor: Vec<f64>,
    pub dfactor: Vec<f64>,
    pub d2factor: Vec<f64>,
    pub sigma: Vec<[f64; 3]>,
    pub a0: Vec<[f64; 3]>,
    pub kappa: Vec<(f64, f64)>,
    pub h0: Vec<f64>,
    pub det_a0: Vec<f64>,
    pub a0_norm2: Vec<f64>,
    pub gauss_k: Vec<f64>,
    pub ric_nu: Vec<f64>,
    pub rbar: Vec<f64>,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub dv_dnu: Vec<f64>,
    pub gauss_residual: Vec<f64>,
    /// Quadrature weights for `∫ · dσ`.
    pub dsigma: Vec<f64>,
    /// Inverse curved metric `(σ^θθ, σ^θφ, σ^φφ)`.
    pub sigma_inv: Vec<[f64; 3]>,
    /// `σ^{ab} Γ^θ_ab`, `σ^{ab} Γ^φ_ab`.
    pub gamma: Vec<[f64; 2]>,
    /// Label velocity of normal trajectories, `(dθ/ds, dφ/ds)`.
    pub label_velocity: Vec<[f64; 2]>,
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.cos_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos_theta.is_empty()
    }

    pub fn has_curved(&self) -> bool {
        !self.h0.is_empty()
    }

    /// `Σ w·f` against the curved area element.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.dsigma.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn area(&self) -> f64 {
        self.dsigma.iter().sum()
    }

    pub fn max_gauss_residual(&self) -> f64 {
        self.gauss_residual.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Laplace–Beltrami operator of the curved induced metric applied to
    /// `u`, given its derivatives on the same grid.
    pub fn laplacian(&self, grid: &SphereGrid, u: &[f64]) -> Vec<f64> {
        let d = grid.derivatives(u, &[(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        (0..u.len())
            .map(|k| {
                let s = self.sigma_inv[k];
                let g = self.gamma[k];
                s[0] * d[2][k] + 2.0 * s[1] * d[3][k] + s[2] * d[4][k] - g[0] * d[0][k] - g[1] * d[1][k]
            })
            .collect()
    }

    pub fn write_csv(&self, grid: &SphereGrid, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let curved = self.has_curved();
        let mut header = vec!["theta", "phi", "G", "cos_theta", "kappa1_flat", "kappa2_flat", "H_flat", "support"];
        if curved {
            header.extend(["r", "kappa1", "kappa2", "H0", "detA0", "K", "ric_nu", "T", "V", "dV_dnu", "gauss_residual"]);
        }
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![
                grid.theta(k),
                grid.phi(k),
                self.jet.f[k],
                self.cos_theta[k],
                self.kappa_flat[k].0,
                self.kappa_flat[k].1,
                self.h_flat[k],
                self.support[k],
            ];
            if curved {
                row.extend([
                    self.r[k],
                    self.kappa[k].0,
                    self.kappa[k].1,
                    self.h0[k],
                    self.det_a0[k],
                    self.gauss_k[k],
                    self.ric_nu[k],
                    self.t[k],
                    self.v[k],
                    self.dv_dnu[k],
                    self.gauss_residual[k],
                ]);
            }
            w.write_record(row.iter().map(|v| format!("{v:.15e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Flat (isothermal-coordinate) geometry of the surface.
pub fn flat_geometry(surface: &StarSurface) -> Result<SurfaceGeometry> {
    let grid = &surface.grid;
    let jet = grid.jet3(&surface.g);
    let n = grid.len();
    let mut geo = SurfaceGeometry { under_resolved: grid.high_mode_fraction(&surface.g) > 1e-4, ..Default::default() };
    for k in 0..n {
        let (th, ph) = (grid.theta(k), grid.phi(k));
        let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
        let w = [st * cp, st * sp, ct];
        let w_t = [ct * cp, ct * sp, -st];
        let w_p = [-st * sp, st * cp, 0.0];
        let w_tt = [-w[0], -w[1], -w[2]];
        let w_tp = [-ct * sp, ct * cp, 0.0];
        let w_pp = [-st * cp, -st * sp, 0.0];
        let (g, gt, gp, gtt, gtp, gpp) = (jet.f[k], jet.t[k], jet.p[k], jet.tt[k], jet.tp[k], jet.pp[k]);
        let x = lin(&[(g, w)]);
        let xt = lin(&[(gt, w), (g, w_t)]);
        let xp = lin(&[(gp, w), (g, w_p)]);
        let xtt = lin(&[(gtt, w), (2.0 * gt, w_t), (g, w_tt)]);
        let xtp = lin(&[(gtp, w), (gt, w_p), (gp, w_t), (g, w_tp)]);
        let xpp = lin(&[(gpp, w), (2.0 * gp, w_p), (g, w_pp)]);
        let nrm = cross(xt, xp);
        let len = dot(nrm, nrm).sqrt();
        let (e, f, gm) = (dot(xt, xt), dot(xt, xp), dot(xp, xp));
        if !(len > 0.0) || !(e * gm - f * f > 0.0) || !len.is_finite() {
            return Err(Error::NotImmersed(format!("degenerate flat metric at grid point {k}")));
        }
        let nu = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
        let (l, m, nn) = (-dot(xtt, nu), -dot(xtp, nu), -dot(xpp, nu));
        let kap = principal(e, f, gm, l, m, nn);
        let grad2 = gt * gt + gp * gp / (st * st);
        let cos = g / (g * g + grad2).sqrt();
        if kap.0 <= 0.0 {
            geo.non_convex_points += 1;
        }
        geo.position.push(x);
        geo.tangent_theta.push(xt);
        geo.tangent_phi.push(xp);
        geo.normal.push(nu);
        geo.sigma_flat.push([e, f, gm]);
        geo.a_flat.push([l, m, nn]);
        geo.kappa_flat.push(kap);
        geo.h_flat.push(kap.0 + kap.1);
        geo.det_flat.push(kap.0 * kap.1);
        geo.cos_theta.push(cos);
        geo.support.push(g * cos);
    }
    if geo.kappa_flat.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
        return Err(Error::NotImmersed("non-finite principal curvature".into()));
    }
    geo.jet = jet;
    Ok(geo)
}

/// Adds the reference-metric fields to a flat geometry.
pub fn curved_geometry(surface: &StarSurface, mut geo: SurfaceGeometry) -> Result<SurfaceGeometry> {
    let grid = &surface.grid;
    let reference = surface.profile.reference();
    let n = grid.len();
    let jet = &geo.jet;
    for k in 0..n {
        let fj = surface.profile.factor(jet.f[k])?;
        reference.check_radius(fj.r)?;
        let (th, st, ct) = (grid.theta(k), grid.theta(k).sin(), grid.theta(k).cos());
        let _ = th;
        let cos = geo.cos_theta[k];
        let f2 = fj.f * fj.f;
        let shift = 2.0 * fj.df * cos / fj.f;
        let (k1, k2) = geo.kappa_flat[k];
        let kap = ((k1 + shift) / f2, (k2 + shift) / f2);
        let [e, fm, gm] = geo.sigma_flat[k];
        let [l, m, nn] = geo.a_flat[k];
        let f4 = f2 * f2;
        geo.sigma.push([f4 * e, f4 * fm, f4 * gm]);
        geo.a0.push([f2 * (l + shift * e), f2 * (m + shift * fm), f2 * (nn + shift * gm)]);

        // curved metric jets
        let gj = J2 { v: jet.f[k], t: jet.t[k], p: jet.p[k], tt: jet.tt[k], tp: jet.tp[k], pp: jet.pp[k] };
        let gtj = J2 { v: jet.t[k], t: jet.tt[k], p: jet.tp[k], tt: jet.ttt[k], tp: jet.ttp[k], pp: jet.tpp[k] };
        let gpj = J2 { v: jet.p[k], t: jet.tp[k], p: jet.pp[k], tt: jet.ttp[k], tp: jet.tpp[k], pp: jet.ppp[k] };
        let sinj = J2 { v: st, t: ct, p: 0.0, tt: -st, tp: 0.0, pp: 0.0 };
        let h = gj.compose(
            f4,
            4.0 * f2 * fj.f * fj.df,
            12.0 * f2 * fj.df * fj.df + 4.0 * f2 * fj.f * fj.d2f,
        );
        let g2 = gj.mul(gj);
        let ej = h.mul(gtj.mul(gtj).add(g2));
        let fjj = h.mul(gtj.mul(gpj));
        let s2 = sinj.mul(sinj);
        let gmj = h.mul(gpj.mul(gpj).add(g2.mul(s2)));
        let kg = brioschi(ej, fjj, gmj);

        let det = ej.v * gmj.v - fjj.v * fjj.v;
        let inv = [gmj.v / det, -fjj.v / det, ej.v / det];
        let (eu, ev, fu, fv, gu, gv) = (ej.t, ej.p, fjj.t, fjj.p, gmj.t, gmj.p);
        let (ee, ff, gg) = (ej.v, fjj.v, gmj.v);
        let c111 = (gg * eu - 2.0 * ff * fu + ff * ev) / (2.0 * det);
        let c112 = (gg * ev - ff * gu) / (2.0 * det);
        let c122 = (2.0 * gg * fv - gg * gu - ff * gv) / (2.0 * det);
        let c211 = (2.0 * ee * fu - ee * ev - ff * eu) / (2.0 * det);
        let c212 = (ee * gu - ff * ev) / (2.0 * det);
        let c222 = (ee * gv - 2.0 * ff * fv + ff * gu) / (2.0 * det);
        geo.gamma.push([
            inv[0] * c111 + 2.0 * inv[1] * c112 + inv[2] * c122,
            inv[0] * c211 + 2.0 * inv[1] * c212 + inv[2] * c222,
        ]);
        geo.sigma_inv.push(inv);
        geo.dsigma.push(grid.node_weight(k) * det.sqrt() / st);

        let ric = reference.ricci_unchecked(fj.r);
        let ric_nu = ric.along(cos);
        let rbar = ric.radial + 2.0 * ric.tangential;
        let (p, _, _) = reference.phi3(fj.r);
        let (v, dv, _) = reference.potential3(fj.r);
        let det_a0 = kap.0 * kap.1;
        geo.r.push(fj.r);
        geo.factor.push(fj.f);
        geo.dfactor.push(fj.df);
        geo.d2factor.push(fj.d2f);
        geo.kappa.push(kap);
        geo.h0.push(kap.0 + kap.1);
        geo.det_a0.push(det_a0);
        geo.a0_norm2.push(kap.0 * kap.0 + kap.1 * kap.1);
        geo.gauss_k.push(kg);
        geo.ric_nu.push(ric_nu);
        geo.rbar.push(rbar);
        geo.t.push(reference.t_unchecked(fj.r, cos));
        geo.v.push(v);
        geo.dv_dnu.push(dv * p.max(0.0).sqrt() * cos);
        geo.gauss_residual.push(det_a0 - kg + 0.5 * rbar - ric_nu);

        let speed = 1.0 / f2;
        let (g, gt, gp) = (jet.f[k], jet.t[k], jet.p[k]);
        let s = (g * g + gt * gt + gp * gp / (st * st)).sqrt();
        geo.label_velocity.push([-speed * gt / (g * s), -speed * gp / (st * st * g * s)]);
    }
    Ok(geo)
}

/// Flat and curved geometry in one pass.
pub fn geometry(surface: &StarSurface) -> Result<SurfaceGeometry> {
    curved_geometry(surface, flat_geometry(surface)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// `∂V/∂ν`
    PotentialSlope,
    /// `det A₀ + T/2 − Ric(ν,ν)`
    CurvatureBalance,
    /// `det A₀ − T/2`
    DeterminantOverT,
    /// `det A₀ − R̄/2`
    DeterminantOverScalar,
    /// `−Ric(ν,ν)`
    NegativeNormalRicci,
    /// `cos θ − max_{R ≥ ρ₀} G(R)`
    TangentAngle,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 6] = [
        ConditionKind::PotentialSlope,
        ConditionKind::CurvatureBalance,
        ConditionKind::DeterminantOverT,
        ConditionKind::DeterminantOverScalar,
        ConditionKind::NegativeNormalRicci,
        ConditionKind::TangentAngle,
    ];

    /// The three conditions that make the energy monotone.
    pub fn is_foliation_condition(self) -> bool {
        matches!(self, Self::PotentialSlope | Self::CurvatureBalance | Self::DeterminantOverT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub kind: ConditionKind,
    pub min: f64,
    pub argmin: usize,
    pub theta: f64,
    pub phi: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    /// `max_{R ≥ ρ₀} G(R)` with the Ricci eigenvalues of the reference.
    pub angle_threshold: f64,
    /// Same maximum for the printed Reissner–Nordström variant.
    pub angle_threshold_printed: Option<f64>,
}

impl ConditionReport {
    pub fn entry(&self, kind: ConditionKind) -> &ConditionEntry {
        self.entries.iter().find(|e| e.kind == kind).expect("all kinds are reported")
    }

    pub fn foliation_passed(&self) -> bool {
        self.entries.iter().filter(|e| e.kind.is_foliation_condition()).all(|e| e.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

/// `max_{R ≥ rho0} G(R)` over the profile range plus the limit at infinity.
pub fn max_angle_threshold(profile: &ConformalProfile, rho0: f64, printed: bool) -> Option<f64> {
    let reference = profile.reference();
    let (_, rho_hi) = profile.rho_range();
    let lo = rho0.max(profile.rho_range().0);
    let eval = |r: f64| if printed { reference.angle_threshold_printed_rn(r) } else { Some(reference.angle_threshold(r)) };
    let mut best = f64::NEG_INFINITY;
    let samples = 400;
    for i in 0..=samples {
        let rho = lo * (rho_hi / lo).powf(i as f64 / samples as f64);
        if let Ok(r) = profile.r_of_rho(rho) {
            best = best.max(eval(r)?);
        }
    }
    for r in [1e8, 1e12] {
        if reference.check_radius(r).is_ok() {
            best = best.max(eval(r)?);
        }
    }
    Some(best)
}

pub fn condition_report(surface: &StarSurface, geo: &SurfaceGeometry) -> ConditionReport {
    let grid = &surface.grid;
    let rho0 = surface.min_rho();
    let threshold = max_angle_threshold(&surface.profile, rho0, false).unwrap_or(1.0);
    let printed = max_angle_threshold(&surface.profile, rho0, true);
    let entries = ConditionKind::ALL
        .iter()
        .map(|&kind| {
            let value = |k: usize| match kind {
                ConditionKind::PotentialSlope => geo.dv_dnu[k],
                ConditionKind::CurvatureBalance => geo.det_a0[k] + 0.5 * geo.t[k] - geo.ric_nu[k],
                ConditionKind::DeterminantOverT => geo.det_a0[k] - 0.5 * geo.t[k],
                ConditionKind::DeterminantOverScalar => geo.det_a0[k] - 0.5 * geo.rbar[k],
                ConditionKind::NegativeNormalRicci => -geo.ric_nu[k],
                ConditionKind::TangentAngle => geo.cos_theta[k] - threshold,
            };
            let (argmin, min) = (0..geo.len()).map(|k| (k, value(k))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            ConditionEntry { kind, min, argmin, theta: grid.theta(argmin), phi: grid.phi(argmin), passed: min > 0.0 }
        })
        .collect();
    ConditionReport { entries, angle_threshold: threshold, angle_threshold_printed: printed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refgeom::ReferenceManifold;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn schwarzschild_profile() -> ConformalProfile {
        ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.05, 400.0).unwrap()
    }

    #[test]
    fn round_sphere_flat_fields() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(6, 12).unwrap();
        let s = StarSurface::round(&p, &grid, 2.914_213_6).unwrap();
        let g = flat_geometry(&s).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(g.kappa_flat[k].0, 0.343_145_8, epsilon = 1e-7);
            assert_relative_eq!(g.kappa_flat[k].1, 0.343_145_8, epsilon = 1e-7);
            assert_relative_eq!(g.h_flat[k], 0.686_291_5, epsilon = 1e-7);
            assert_relative_eq!(g.cos_theta[k], 1.0, epsilon = 1e-14);
            assert_relative_eq!(g.support[k], 2.914_213_6, epsilon = 1e-12);
        }
        assert_eq!(g.non_convex_points, 0);
    }

    #[test]
    fn coordinate_sphere_curved_fields() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(6, 12).unwrap();
        let rho = p.rho_of_r(4.0).unwrap();
        let g = geometry(&StarSurface::round(&p, &grid, rho).unwrap()).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(g.kappa[k].0, 0.176_776_7, epsilon = 1e-7);
            assert_relative_eq!(g.h0[k], 0.353_553_4, epsilon = 1e-7);
            assert_relative_eq!(g.h0[k], 0.5 * 0.5f64.sqrt(), epsilon = 1e-10);
            assert_relative_eq!(g.det_a0[k], 0.03125, epsilon = 1e-10);
            assert_relative_eq!(g.v[k], 0.707_106_8, epsilon = 1e-7);
            assert_relative_eq!(g.ric_nu[k], -0.03125, epsilon = 1e-12);
            assert!(g.t[k].abs() < 1e-15);
            assert_relative_eq!(g.gauss_k[k], 1.0 / 16.0, epsilon = 1e-10);
            assert!(g.gauss_residual[k].abs() < 1e-10);
        }
        assert_relative_eq!(g.area(), 4.0 * PI * 16.0, max_relative = 1e-10);
        let rep = condition_report(&StarSurface::round(&p, &grid, rho).unwrap(), &g);
        assert!(rep.all_passed());
        assert_relative_eq!(rep.entry(ConditionKind::DeterminantOverT).min, 0.03125, epsilon = 1e-10);
        assert_relative_eq!(rep.angle_threshold, 1.0 / 3f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn rn_coordinate_sphere() {
        let rn = ReferenceManifold::reissner_nordstrom(1.0, 0.5).unwrap();
        let p = ConformalProfile::new(&rn, 1.9, 200.0).unwrap();
        let grid = SphereGrid::new(6, 12).unwrap();
        let rho = p.rho_of_r(4.0).unwrap();
        let g = geometry(&StarSurface::round(&p, &grid, rho).unwrap()).unwrap();
        assert_relative_eq!(g.det_a0[0], (1.0 - 0.5 + 0.25 / 16.0) / 16.0, epsilon = 1e-10);
        assert_relative_eq!(g.rbar[0], 0.001_953_125, epsilon = 1e-15);
        assert!(g.t[0].abs() < 1e-15);
    }

    #[test]
    fn flat_reference_has_equal_fields() {
        let flat = ReferenceManifold::flat(0.1, 100.0).unwrap();
        let p = ConformalProfile::new(&flat, 0.5, 50.0).unwrap();
        let grid = SphereGrid::new(8, 16).unwrap();
        let s = StarSurface::ellipsoid(&p, &grid, 5.0, 0.1).unwrap();
        let g = geometry(&s).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(g.kappa[k].0, g.kappa_flat[k].0, epsilon = 1e-11);
            assert_relative_eq!(g.h0[k], g.h_flat[k], epsilon = 1e-11);
        }
    }

    #[test]
    fn ellipsoid_tilts_normal() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(8, 16).unwrap();
        let g = flat_geometry(&StarSurface::ellipsoid(&p, &grid, 5.0, 0.05).unwrap()).unwrap();
        assert!(g.cos_theta.iter().any(|&c| c < 1.0 - 1e-4));
        assert!(g.kappa_flat.iter().any(|k| k.0 < 1.0 / 5.0));
    }

    #[test]
    fn shifted_sphere_is_umbilic_in_flat_space() {
        let flat = ReferenceManifold::flat(0.1, 100.0).unwrap();
        let p = ConformalProfile::new(&flat, 0.5, 50.0).unwrap();
        let grid = SphereGrid::new(16, 32).unwrap();
        let g = flat_geometry(&StarSurface::shifted_sphere(&p, &grid, 2.9, 0.3).unwrap()).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(g.kappa_flat[k].0, 1.0 / 2.9, epsilon = 1e-6);
            assert_relative_eq!(g.kappa_flat[k].1, 1.0 / 2.9, epsilon = 1e-6);
        }
    }

    #[test]
    fn brioschi_on_round_metric() {
        let grid = SphereGrid::new(6, 12).unwrap();
        let radius: f64 = 3.0;
        for k in 0..grid.len() {
            let (s, c) = (grid.theta(k).sin(), grid.theta(k).cos());
            let e = J2 { v: radius * radius, ..Default::default() };
            let f = J2::default();
            let g = J2 { v: radius * radius * s * s, t: 2.0 * radius * radius * s * c, tt: 2.0 * radius * radius * (c * c - s * s), ..Default::default() };
            assert_relative_eq!(brioschi(e, f, g), 1.0 / (radius * radius), epsilon = 1e-13);
        }
    }

    #[test]
    fn laplacian_of_first_harmonic_on_coordinate_sphere() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(8, 16).unwrap();
        let rho = p.rho_of_r(5.0).unwrap();
        let g = geometry(&StarSurface::round(&p, &grid, rho).unwrap()).unwrap();
        let u = grid.from_fn(|t, ph| t.sin() * ph.cos());
        let lap = g.laplacian(&grid, &u);
        for k in 0..grid.len() {
            assert_relative_eq!(lap[k], -2.0 / 25.0 * u[k], epsilon = 1e-11);
        }
    }

    #[test]
    fn grazing_point_fails_ricci_sign() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(12, 24).unwrap();
        // strongly tilted surface: cos² θ drops below 1/3 near the equator
        let s = StarSurface::shifted_sphere(&p, &grid, 6.0, 5.0).unwrap();
        let g = geometry(&s).unwrap();
        let rep = condition_report(&s, &g);
        let e = rep.entry(ConditionKind::NegativeNormalRicci);
        assert!(!e.passed);
        assert!(g.cos_theta[e.argmin] < 1.0 / 3f64.sqrt());
    }

    #[test]
    fn csv_round_trip() {
        let p = schwarzschild_profile();
        let grid = SphereGrid::new(4, 8).unwrap();
        let s = StarSurface::ellipsoid(&p, &grid, 4.0, 0.1).unwrap();
        let dir = std::env::temp_dir().join(format!("qlp-surface-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.csv");
        s.write_csv(&path).unwrap();
        let back = StarSurface::load_csv(&p, &path).unwrap();
        assert_eq!(back.grid.n_theta(), 4);
        for (a, b) in s.g.iter().zip(&back.g) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }
}
