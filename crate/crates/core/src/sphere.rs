//! Gauss–Legendre × uniform-longitude grids on the unit sphere with a
//! spherical-harmonic transform and spectral derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes (descending in `x`) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Normalized associated Legendre functions `P̄_l^m(cos θ)` for `l = m..=lmax`
/// with θ-derivatives of order 0..=3, at one colatitude.
fn legendre_column(m: usize, lmax: usize, theta: f64) -> [Vec<f64>; 4] {
    let (x, s) = (theta.cos(), theta.sin());
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    let n = lmax + 1 - m;
    let mut p = vec![0.0; n];
    p[0] = pmm;
    if n > 1 {
        p[1] = ((2 * m + 3) as f64).sqrt() * x * pmm;
    }
    for k in 2..n {
        let l = (m + k) as f64;
        let mf = m as f64;
        let a = ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
        let b = (((l - 1.0).powi(2) - mf * mf) / (4.0 * (l - 1.0).powi(2) - 1.0)).sqrt();
        p[k] = a * (x * p[k - 1] - b * p[k - 2]);
    }
    let cot = x / s;
    let csc2 = 1.0 / (s * s);
    let mf = m as f64;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut d3 = vec![0.0; n];
    for k in 0..n {
        let l = (m + k) as f64;
        let prev = if k > 0 { p[k - 1] } else { 0.0 };
        let c = if k > 0 { ((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l - mf) * (l + mf)).sqrt() } else { 0.0 };
        d1[k] = (l * x * p[k] - c * prev) / s;
        let g = l * (l + 1.0) - mf * mf * csc2;
        d2[k] = -cot * d1[k] - g * p[k];
        d3[k] = csc2 * d1[k] - cot * d2[k] - g * d1[k] - 2.0 * mf * mf * csc2 * cot * p[k];
    }
    [p, d1, d2, d3]
}

/// Coefficients against the orthonormal harmonics `P̄_l^m(cos θ) e^{imφ}/√(2π)`,
/// stored as `coeffs[m][l - m]` for `0 ≤ m ≤ l ≤ lmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub lmax: usize,
    pub coeffs: Vec<Vec<Complex64>>,
}

impl Spectrum {
    /// Sum of `|c_lm|²` per degree `l` (negative orders included).
    pub fn degree_power(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.lmax + 1];
        for (m, col) in self.coeffs.iter().enumerate() {
            let mult = if m == 0 { 1.0 } else { 2.0 };
            for (k, c) in col.iter().enumerate() {
                out[m + k] += mult * c.norm_sqr();
            }
        }
        out
    }
}

/// Derivative orders `(∂θ, ∂φ)` of a field.
pub type Order = (usize, usize);

/// Field values and their θ/φ-derivatives up to total order three.
#[derive(Debug, Clone, Default)]
pub struct Jet3 {
    pub f: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
    pub ttt: Vec<f64>,
    pub ttp: Vec<f64>,
    pub tpp: Vec<f64>,
    pub ppp: Vec<f64>,
}

/// Field values with first and second derivatives.
#[derive(Debug, Clone, Default)]
pub struct Jet2 {
    pub f: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
}

/// A `n_theta × n_phi` collocation grid. Fields are stored row-major with
/// index `i * n_phi + j` (colatitude `i`, longitude `j`).
#[derive(Clone)]
pub struct SphereGrid {
    n_theta: usize,
    n_phi: usize,
    lmax: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    // analysis[m]: (lmax+1-m) × n_theta, P̄_l^m(θ_i)·w_i
    analysis: Arc<Vec<Vec<f64>>>,
    // synthesis[p][m]: n_theta × (lmax+1-m), ∂θ^p P̄_l^m(θ_i)
    synthesis: Arc<[Vec<Vec<f64>>; 4]>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SphereGrid({}x{})", self.n_theta, self.n_phi)
    }
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 2 * n_theta {
            return Err(Error::InvalidGrid(format!(
                "need n_theta >= 2 and n_phi >= 2 n_theta, got {n_theta}x{n_phi}"
            )));
        }
        let lmax = n_theta - 1;
        let (x, weights) = gauss_legendre(n_theta);
        let theta: Vec<f64> = x.iter().map(|v| v.acos()).collect();
        let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        let mut analysis = Vec::with_capacity(lmax + 1);
        let mut synthesis: [Vec<Vec<f64>>; 4] = Default::default();
        for m in 0..=lmax {
            let nl = lmax + 1 - m;
            let cols: Vec<[Vec<f64>; 4]> = theta.iter().map(|&t| legendre_column(m, lmax, t)).collect();
            let mut a = vec![0.0; nl * n_theta];
            for k in 0..nl {
                for i in 0..n_theta {
                    a[k * n_theta + i] = cols[i][0][k] * weights[i];
                }
            }
            analysis.push(a);
            for (p, syn) in synthesis.iter_mut().enumerate() {
                let mut s = vec![0.0; n_theta * nl];
                for i in 0..n_theta {
                    for k in 0..nl {
                        s[i * nl + k] = cols[i][p][k];
                    }
                }
                syn.push(s);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_theta,
            n_phi,
            lmax,
            theta,
            phi,
            weights,
            analysis: Arc::new(analysis),
            synthesis: Arc::new(synthesis),
            fft: planner.plan_fft_forward(n_phi),
            ifft: planner.plan_fft_inverse(n_phi),
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_phi(&self) -> usize {
        self.n_phi
    }
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn lmax(&self) -> usize {
        self.lmax
    }
    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }
    pub fn phis(&self) -> &[f64] {
        &self.phi
    }
    pub fn gl_weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn theta(&self, idx: usize) -> f64 {
        self.theta[idx / self.n_phi]
    }
    pub fn phi(&self, idx: usize) -> f64 {
        self.phi[idx % self.n_phi]
    }

    /// Area element of the unit sphere at node `idx`, divided by `sin θ`
    /// (so that `Σ quad_weight·sinθ·g = ∫ g dΩ` with the extra `sin θ`
    /// supplied by the caller's density).
    pub fn node_weight(&self, idx: usize) -> f64 {
        self.weights[idx / self.n_phi] * 2.0 * PI / self.n_phi as f64
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.theta {
            for &p in &self.phi {
                out.push(f(t, p));
            }
        }
        out
    }

    /// `∫ f dΩ` over the unit sphere.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        (0..self.len()).map(|k| self.node_weight(k) * f[k]).sum()
    }

    pub fn analyze(&self, f: &[f64]) -> Spectrum {
        assert_eq!(f.len(), self.len());
        let np = self.n_phi;
        let mut rows = vec![Complex64::new(0.0, 0.0); self.len()];
        for (k, v) in f.iter().enumerate() {
            rows[k] = Complex64::new(*v, 0.0);
        }
        for row in rows.chunks_mut(np) {
            self.fft.process(row);
        }
        let scale = (2.0 * PI).sqrt() / np as f64;
        let mut coeffs = Vec::with_capacity(self.lmax + 1);
        for m in 0..=self.lmax {
            let nl = self.lmax + 1 - m;
            let a = &self.analysis[m];
            let mut col = vec![Complex64::new(0.0, 0.0); nl];
            for (k, c) in col.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..self.n_theta {
                    acc += rows[i * np + m] * a[k * self.n_theta + i];
                }
                *c = acc * scale;
            }
            coeffs.push(col);
        }
        Spectrum { lmax: self.lmax, coeffs }
    }

    /// `∂θ^p ∂φ^q` of the band-limited field with the given spectrum.
    pub fn synthesize(&self, spectrum: &Spectrum, order: Order) -> Vec<f64> {
        let (p, q) = order;
        assert!(p <= 3, "theta derivatives up to third order");
        let np = self.n_phi;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut rows = vec![Complex64::new(0.0, 0.0); self.len()];
        for m in 0..=self.lmax {
            let nl = self.lmax + 1 - m;
            let s = &self.synthesis[p][m];
            let phase = Complex64::new(0.0, m as f64).powu(q as u32);
            if m > 0 && phase == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = &spectrum.coeffs[m];
            for i in 0..self.n_theta {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..nl {
                    acc += col[k] * s[i * nl + k];
                }
                let val = acc * phase * norm;
                if m == 0 {
                    rows[i * np] = Complex64::new(val.re, 0.0);
                } else {
                    rows[i * np + m] = val;
                    rows[i * np + np - m] = val.conj();
                }
            }
        }
        for row in rows.chunks_mut(np) {
            self.ifft.process(row);
        }
        rows.iter().map(|c| c.re).collect()
    }

    pub fn derivatives(&self, f: &[f64], orders: &[Order]) -> Vec<Vec<f64>> {
        let spectrum = self.analyze(f);
        orders.iter().map(|&o| self.synthesize(&spectrum, o)).collect()
    }

    pub fn jet2(&self, f: &[f64]) -> Jet2 {
        let spectrum = self.analyze(f);
        Jet2 {
            f: self.synthesize(&spectrum, (0, 0)),
            t: self.synthesize(&spectrum, (1, 0)),
            p: self.synthesize(&spectrum, (0, 1)),
            tt: self.synthesize(&spectrum, (2, 0)),
            tp: self.synthesize(&spectrum, (1, 1)),
            pp: self.synthesize(&spectrum, (0, 2)),
        }
    }

    pub fn jet3(&self, f: &[f64]) -> Jet3 {
        let spectrum = self.analyze(f);
        Jet3 {
            f: self.synthesize(&spectrum, (0, 0)),
            t: self.synthesize(&spectrum, (1, 0)),
            p: self.synthesize(&spectrum, (0, 1)),
            tt: self.synthesize(&spectrum, (2, 0)),
            tp: self.synthesize(&spectrum, (1, 1)),
            pp: self.synthesize(&spectrum, (0, 2)),
            ttt: self.synthesize(&spectrum, (3, 0)),
            ttp: self.synthesize(&spectrum, (2, 1)),
            tpp: self.synthesize(&spectrum, (1, 2)),
            ppp: self.synthesize(&spectrum, (0, 3)),
        }
    }

    /// Projection onto degrees `l ≤ lmax`.
    pub fn filter(&self, f: &[f64]) -> Vec<f64> {
        self.synthesize(&self.analyze(f), (0, 0))
    }

    /// Applies the degree-dependent multiplier `g(l)` in spectral space. The
    /// part of `f` above `lmax` is passed through unchanged.
    pub fn apply_multiplier(&self, f: &[f64], g: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut spectrum = self.analyze(f);
        let smooth = self.synthesize(&spectrum, (0, 0));
        for (m, col) in spectrum.coeffs.iter_mut().enumerate() {
            for (k, c) in col.iter_mut().enumerate() {
                *c *= g(m + k);
            }
        }
        let scaled = self.synthesize(&spectrum, (0, 0));
        f.iter().zip(smooth).zip(scaled).map(|((v, s), t)| v - s + t).collect()
    }

    /// Fraction of spectral power in the top quarter of resolved degrees.
    pub fn high_mode_fraction(&self, f: &[f64]) -> f64 {
        let power = self.analyze(f).degree_power();
        let total: f64 = power[1..].iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let cut = (3 * (self.lmax + 1)).div_ceil(4).max(1);
        power[cut..].iter().sum::<f64>() / total
    }
}
