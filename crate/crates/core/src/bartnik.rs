//! The parabolic equation `H₀ ∂u/∂s = u²Δu + (u − u³)(det A₀ − Ric(ν,ν) + T/2)`
//! along a foliation, whose solution defines `g̃ = u² ds² + σ_s`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Foliation, Slice};
use crate::krylov::bicgstab;
use crate::sphere::SphereGrid;
use crate::surfgeom::ConditionKind;

/// `u₀ = H₀/H` from the physical and reference mean curvatures.
pub fn initial_u(h_phys: &[f64], h0: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = h_phys.iter().position(|h| !(*h > 0.0)) {
        return Err(Error::NonPositiveMeanCurvature { index: i, value: h_phys[i] });
    }
    if let Some(i) = h0.iter().position(|h| !(*h > 0.0)) {
        return Err(Error::NonPositiveMeanCurvature { index: i, value: h0[i] });
    }
    Ok(h0.iter().zip(h_phys).map(|(a, b)| a / b).collect())
}

/// Slice data entering the u-equation.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub h0: Vec<f64>,
    /// `det A₀ − Ric(ν,ν) + T/2`
    pub c: Vec<f64>,
    pub sigma_inv: Vec<[f64; 3]>,
    pub gamma: Vec<[f64; 2]>,
    pub velocity: Vec<[f64; 2]>,
    pub area: f64,
}

impl Coefficients {
    pub fn from_slice(slice: &Slice, index: usize) -> Result<Self> {
        let geo = &slice.geometry;
        if let Some(i) = geo.h0.iter().position(|h| !(*h > 0.0)) {
            return Err(Error::NonPositiveMeanCurvature { index: i, value: geo.h0[i] });
        }
        let balance = slice.conditions.entry(ConditionKind::CurvatureBalance);
        if !balance.passed {
            return Err(Error::HypothesisFailure {
                slice: index,
                what: format!("det A0 + T/2 - Ric(nu,nu) reaches {:.3e}", balance.min),
            });
        }
        Ok(Self {
            h0: geo.h0.clone(),
            c: (0..geo.len()).map(|k| geo.det_a0[k] - geo.ric_nu[k] + 0.5 * geo.t[k]).collect(),
            sigma_inv: geo.sigma_inv.clone(),
            gamma: geo.gamma.clone(),
            velocity: geo.label_velocity.clone(),
            area: geo.area(),
        })
    }

    fn lerp(&self, other: &Self, t: f64) -> Self {
        let l = |a: f64, b: f64| a + t * (b - a);
        let lv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| l(*x, *y)).collect::<Vec<_>>();
        Self {
            h0: lv(&self.h0, &other.h0),
            c: lv(&self.c, &other.c),
            sigma_inv: self.sigma_inv.iter().zip(&other.sigma_inv).map(|(a, b)| [l(a[0], b[0]), l(a[1], b[1]), l(a[2], b[2])]).collect(),
            gamma: self.gamma.iter().zip(&other.gamma).map(|(a, b)| [l(a[0], b[0]), l(a[1], b[1])]).collect(),
            velocity: self.velocity.iter().zip(&other.velocity).map(|(a, b)| [l(a[0], b[0]), l(a[1], b[1])]).collect(),
            area: l(self.area, other.area),
        }
    }

    fn laplacian(&self, grid: &SphereGrid, v: &[f64]) -> Vec<f64> {
        let d = grid.derivatives(v, &[(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        (0..v.len())
            .map(|k| {
                let s = self.sigma_inv[k];
                let g = self.gamma[k];
                s[0] * d[2][k] + 2.0 * s[1] * d[3][k] + s[2] * d[4][k] - g[0] * d[0][k] - g[1] * d[1][k]
            })
            .collect()
    }

    /// Explicit part for `w = u − 1`: reaction `−w(1 + w)(2 + w)c/H₀` minus
    /// label advection `θ̇ w_θ + φ̇ w_φ`.
    fn explicit(&self, grid: &SphereGrid, w: &[f64]) -> Vec<f64> {
        let d = grid.derivatives(w, &[(1, 0), (0, 1)]);
        (0..w.len())
            .map(|k| {
                let reaction = -w[k] * (1.0 + w[k]) * (2.0 + w[k]) * self.c[k] / self.h0[k];
                reaction - self.velocity[k][0] * d[0][k] - self.velocity[k][1] * d[1][k]
            })
            .collect()
    }

    /// Solves `(I − a·(u²/H₀)Δ) x = rhs` with `u = 1 + w`.
    fn implicit_solve(&self, grid: &SphereGrid, w: &[f64], a: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let diff: Vec<f64> = w.iter().zip(&self.h0).map(|(w, h)| (1.0 + w).powi(2) / h).collect();
        let mean_diff = diff.iter().sum::<f64>() / diff.len() as f64;
        let r2 = self.area / (4.0 * std::f64::consts::PI);
        let apply = |x: &[f64]| -> Vec<f64> {
            let lap = self.laplacian(grid, x);
            (0..x.len()).map(|k| x[k] - a * diff[k] * lap[k]).collect()
        };
        let precond = |r: &[f64]| grid.apply_multiplier(r, |l| 1.0 / (1.0 + a * mean_diff * (l * (l + 1)) as f64 / r2));
        let (x, _) = bicgstab(apply, precond, rhs, rhs, 1e-13, 500)?;
        Ok(x)
    }
}

/// One second-order IMEX step for `w = u − 1` from coefficients `a` (at `s`)
/// to `b` (at `s + ds`). Working with the deviation keeps `u ≡ 1` exact.
fn advance_w(grid: &SphereGrid, a: &Coefficients, b: &Coefficients, w: &[f64], ds: f64) -> Result<Vec<f64>> {
    let n = w.len();
    let ea = a.explicit(grid, w);
    let rhs: Vec<f64> = (0..n).map(|k| w[k] + ds * ea[k]).collect();
    let pred = b.implicit_solve(grid, w, ds, &rhs)?;
    let lap_a = a.laplacian(grid, w);
    let eb = b.explicit(grid, &pred);
    let rhs: Vec<f64> =
        (0..n).map(|k| w[k] + 0.5 * ds * ((1.0 + w[k]).powi(2) / a.h0[k] * lap_a[k] + ea[k] + eb[k])).collect();
    let next = b.implicit_solve(grid, &pred, 0.5 * ds, &rhs)?;
    Ok(grid.filter(&next))
}

/// One step of the u-equation between two slices' coefficients.
pub fn advance_u(grid: &SphereGrid, a: &Coefficients, b: &Coefficients, u: &[f64], ds: f64) -> Result<Vec<f64>> {
    let w: Vec<f64> = u.iter().map(|v| v - 1.0).collect();
    Ok(advance_w(grid, a, b, &w, ds)?.into_iter().map(|v| 1.0 + v).collect())
}

/// The solution `u` on the slices of a foliation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UField {
    pub s: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    /// Maximum-principle bounds `[min(1, min u₀), max(1, max u₀)]`.
    pub bounds: (f64, f64),
    /// `(s, s·max|u − 1|)` per slice.
    pub decay: Vec<(f64, f64)>,
    /// Largest excursion outside `bounds` over accepted steps.
    pub max_bound_excess: f64,
    /// Total number of step halvings.
    pub halvings: usize,
}

impl UField {
    /// Logarithmic slope `d ln(s·δ)/d ln s` over the last tenth of the run.
    pub fn decay_slope(&self) -> Option<f64> {
        let n = self.decay.len();
        let tail: Vec<&(f64, f64)> = self.decay.iter().filter(|d| d.0 > 0.0 && d.1 > 0.0).collect();
        if tail.len() < 10 || n < 10 {
            return None;
        }
        let (s1, d1) = *tail[tail.len() * 9 / 10];
        let (s2, d2) = *tail[tail.len() - 1];
        if s2 <= s1 {
            return None;
        }
        Some((d2 / d1).ln() / (s2 / s1).ln())
    }

    /// `s·max|u − 1|` settles to a constant (slope below 0.1 in log-log).
    pub fn decay_settled(&self) -> bool {
        match self.decay_slope() {
            Some(slope) => slope.abs() < 0.1,
            None => self.decay.iter().all(|d| d.1 == 0.0),
        }
    }

    /// One row per slice; `max_residual` is blank where no centered residual exists.
    pub fn write_series_csv(&self, path: &Path, residual: Option<&ScalarResidual>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "max_u_minus_1", "min_u", "max_residual"])?;
        for (i, u) in self.u.iter().enumerate() {
            let dev = u.iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
            let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
            let res = residual
                .and_then(|r| r.s.iter().position(|s| *s == self.s[i]).map(|j| r.residual[j].iter().fold(0.0f64, |a, v| a.max(v.abs()))))
                .map(|v| format!("{v:.15e}"))
                .unwrap_or_default();
            w.write_record([format!("{:.10e}", self.s[i]), format!("{dev:.15e}"), format!("{min:.15e}"), res])?;
        }
        w.flush()?;
        Ok(())
    }
}

const BOUND_TOL: f64 = 1e-10;
const MAX_HALVINGS: u32 = 10;

/// Streaming solver: feed consecutive slices, read `u` after each.
pub struct USolver {
    grid: SphereGrid,
    prev: Option<(f64, Coefficients)>,
    pub field: UField,
    w: Vec<f64>,
    u: Vec<f64>,
    index: usize,
}

impl USolver {
    pub fn new(grid: &SphereGrid, u0: Vec<f64>) -> Result<Self> {
        if let Some(i) = u0.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositiveU { index: i, value: u0[i] });
        }
        let lo = u0.iter().cloned().fold(1.0, f64::min);
        let hi = u0.iter().cloned().fold(1.0, f64::max);
        Ok(Self {
            grid: grid.clone(),
            prev: None,
            field: UField { s: Vec::new(), u: Vec::new(), bounds: (lo, hi), decay: Vec::new(), max_bound_excess: 0.0, halvings: 0 },
            w: u0.iter().map(|v| v - 1.0).collect(),
            u: u0,
            index: 0,
        })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `u − 1`, carried at full precision.
    pub fn deviation(&self) -> &[f64] {
        &self.w
    }

    fn excess(&self, w: &[f64]) -> f64 {
        let (lo, hi) = self.field.bounds;
        w.iter().fold(0.0f64, |a, v| a.max(lo - 1.0 - v).max(v + 1.0 - hi))
    }

    /// Advances `u` to `slice` (the first call only records `u₀`). When
    /// `record` is false the value is not stored in the field.
    pub fn push(&mut self, slice: &Slice, record: bool) -> Result<&[f64]> {
        let coeffs = Coefficients::from_slice(slice, self.index)?;
        if let Some((s_prev, prev)) = self.prev.take() {
            let ds = slice.s - s_prev;
            let mut pieces = 1u32;
            loop {
                let h = ds / pieces as f64;
                let mut w = self.w.clone();
                let mut worst = 0.0f64;
                let mut ok = true;
                for j in 0..pieces {
                    let a = prev.lerp(&coeffs, j as f64 / pieces as f64);
                    let b = prev.lerp(&coeffs, (j + 1) as f64 / pieces as f64);
                    w = advance_w(&self.grid, &a, &b, &w, h)?;
                    let ex = self.excess(&w);
                    worst = worst.max(ex);
                    if ex > BOUND_TOL || w.iter().any(|v| !(*v > -1.0)) {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    self.u = w.iter().map(|v| 1.0 + v).collect();
                    self.w = w;
                    self.field.max_bound_excess = self.field.max_bound_excess.max(worst);
                    break;
                }
                if pieces >= 1 << MAX_HALVINGS {
                    return Err(Error::NonConvergentSubstep {
                        s: slice.s,
                        why: format!("maximum-principle bounds violated by {worst:.3e} after {MAX_HALVINGS} halvings"),
                    });
                }
                pieces *= 2;
                self.field.halvings += 1;
            }
        }
        let dev = self.w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.field.decay.push((slice.s, slice.s * dev));
        if record {
            self.field.s.push(slice.s);
            self.field.u.push(self.u.clone());
        }
        self.prev = Some((slice.s, coeffs));
        self.index += 1;
        Ok(&self.u)
    }
}

/// Solves for `u` on the stored slices of `fol`.
pub fn solve_u(fol: &Foliation, u0: &[f64]) -> Result<UField> {
    let grid = &fol.slices.first().ok_or(Error::InsufficientSlices { needed: 1, have: 0 })?.surface.grid;
    let mut solver = USolver::new(grid, u0.to_vec())?;
    for slice in &fol.slices {
        solver.push(slice, true)?;
    }
    Ok(solver.field)
}

/// `R(g̃) − [R̄ + (1/u² − 1)T]` on interior slices, together with the
/// `(1/u² − 1)T` term itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarResidual {
    pub s: Vec<f64>,
    pub residual: Vec<Vec<f64>>,
    pub t_term: Vec<Vec<f64>>,
    pub max_abs: f64,
}

pub fn scalar_residual(fol: &Foliation, field: &UField) -> Result<ScalarResidual> {
    let n = fol.slices.len();
    if n < 3 || field.u.len() != n {
        return Err(Error::InsufficientSlices { needed: 3, have: n.min(field.u.len()) });
    }
    let mut out = ScalarResidual { s: Vec::new(), residual: Vec::new(), t_term: Vec::new(), max_abs: 0.0 };
    for i in 1..n - 1 {
        let (a, b, c) = (&fol.slices[i - 1], &fol.slices[i], &fol.slices[i + 1]);
        let h = b.s - a.s;
        if ((c.s - b.s) - h).abs() > 1e-9 * h {
            continue;
        }
        let grid = &b.surface.grid;
        let geo = &b.geometry;
        let u = &field.u[i];
        let ht = |sl: &Slice, uu: &[f64]| -> Vec<f64> { sl.geometry.h0.iter().zip(uu).map(|(h, u)| h / u).collect() };
        let (hp, hc, hn) = (ht(a, &field.u[i - 1]), ht(b, u), ht(c, &field.u[i + 1]));
        let dh = grid.derivatives(&hc, &[(1, 0), (0, 1)]);
        let lap = geo.laplacian(grid, u);
        let mut res = Vec::with_capacity(u.len());
        let mut tt = Vec::with_capacity(u.len());
        for k in 0..u.len() {
            let vel = geo.label_velocity[k];
            let d_ht = (hn[k] - hp[k]) / (2.0 * h) + vel[0] * dh[0][k] + vel[1] * dh[1][k];
            let a2 = geo.a0_norm2[k] / (u[k] * u[k]);
            let r = 2.0 * geo.gauss_k[k] - 2.0 * (d_ht + lap[k]) / u[k] - hc[k] * hc[k] - a2;
            let t_term = (1.0 / (u[k] * u[k]) - 1.0) * geo.t[k];
            let e = r - geo.rbar[k] - t_term;
            out.max_abs = out.max_abs.max(e.abs());
            res.push(e);
            tt.push(t_term);
        }
        out.s.push(b.s);
        out.residual.push(res);
        out.t_term.push(tt);
    }
    Ok(out)
}
