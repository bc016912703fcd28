//! Rotationally symmetric reductions written from closed forms only. Nothing
//! here touches the grid, surface or solver code, so these values serve as
//! independent witnesses for the discrete pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::refgeom::{ReferenceKind, ReferenceManifold};

/// Mass and charge of an analytic reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analytic {
    pub m: f64,
    pub e: f64,
}

impl Analytic {
    pub fn of(reference: &ReferenceManifold) -> Result<Self> {
        match reference.kind() {
            ReferenceKind::Tabulated => Err(Error::Config("closed forms need an analytic reference".into())),
            _ => Ok(Self { m: reference.mass(), e: reference.charge() }),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.m + (self.m * self.m - self.e * self.e).sqrt()
    }

    pub fn phi(&self, r: f64) -> f64 {
        1.0 - 2.0 * self.m / r + self.e * self.e / (r * r)
    }

    fn dphi(&self, r: f64) -> f64 {
        2.0 * self.m / (r * r) - 2.0 * self.e * self.e / r.powi(3)
    }

    /// Isotropic radius `ρ(r) = [(r − m) + √((r − m)² − (m² − e²))]/2`.
    pub fn isotropic_rho(&self, r: f64) -> f64 {
        let a = r - self.m;
        0.5 * (a + (a * a - (self.m * self.m - self.e * self.e)).sqrt())
    }

    /// `r(ρ) = ρ + m + (m² − e²)/(4ρ)`.
    pub fn isotropic_r(&self, rho: f64) -> f64 {
        rho + self.m + (self.m * self.m - self.e * self.e) / (4.0 * rho)
    }
}

/// Geometry of the coordinate sphere of area radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundGeometry {
    pub h0: f64,
    pub v: f64,
    pub det_a0: f64,
    pub ric_nu: f64,
    pub t: f64,
    pub rbar: f64,
}

pub fn round_geometry(reference: &ReferenceManifold, r: f64) -> Result<RoundGeometry> {
    let a = Analytic::of(reference)?;
    round_geometry_of(a, r)
}

fn round_geometry_of(a: Analytic, r: f64) -> Result<RoundGeometry> {
    if !(r > a.horizon()) {
        return Err(Error::InsideHorizon { r, r_horizon: a.horizon() });
    }
    let phi = a.phi(r);
    let dphi = a.dphi(r);
    let ric_nu = -dphi / r;
    let ric_tan = -dphi / (2.0 * r) + (1.0 - phi) / (r * r);
    // (ΔV − V_rr)/V = 2φV'/(rV) = φ'/r for V = √φ
    let t = dphi / r + ric_nu;
    Ok(RoundGeometry {
        h0: 2.0 / r * phi.sqrt(),
        v: phi.sqrt(),
        det_a0: phi / (r * r),
        ric_nu,
        t,
        rbar: ric_nu + 2.0 * ric_tan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub s: f64,
    pub r: f64,
    pub u: f64,
    /// Quasi-local energy `(r²/2)·V·H₀·(1 − 1/u)`.
    pub energy: f64,
}

/// Integrates `dr/ds = √φ`, `du/ds = (u − u³)c/H₀` and samples at `samples + 1`
/// evenly spaced values of `s` in `[0, s_max]`.
pub fn round_flow_u(reference: &ReferenceManifold, r0: f64, u0: f64, s_max: f64, samples: usize) -> Result<Vec<RoundState>> {
    let a = Analytic::of(reference)?;
    round_geometry_of(a, r0)?;
    if !(u0 > 0.0) {
        return Err(Error::NonPositiveU { index: 0, value: u0 });
    }
    let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
        let (r, w) = (y[0], y[1]);
        let g = round_geometry_of(a, r).expect("trajectory stays outside the horizon");
        let c = g.det_a0 - g.ric_nu + 0.5 * g.t;
        d[0] = a.phi(r).sqrt();
        // w = u − 1, so u − u³ = −w(1 + w)(2 + w)
        d[1] = -w * (1.0 + w) * (2.0 + w) * c / g.h0;
    };
    let outputs: Vec<f64> = (0..=samples).map(|i| s_max * i as f64 / samples as f64).collect();
    let tol = Tolerance { rtol: 1e-13, atol: 1e-15, max_steps: 10_000_000 };
    let ys = ode::integrate_dense(rhs, 0.0, &[r0, u0 - 1.0], &outputs, tol)?;
    ys.iter()
        .zip(&outputs)
        .map(|(y, &s)| {
            let g = round_geometry_of(a, y[0])?;
            let u = 1.0 + y[1];
            Ok(RoundState { s, r: y[0], u, energy: 0.5 * y[0] * y[0] * g.v * g.h0 * (y[1] / u) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioClosedForm {
    pub lhs: f64,
    pub rhs: f64,
}

impl ScenarioClosedForm {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Schwarzschild data of mass `big_m` bounding a coordinate sphere of area
/// radius `r0`, compared against the Schwarzschild reference of mass `m`.
pub fn scenario_closed_form(big_m: f64, m: f64, r0: f64) -> Result<ScenarioClosedForm> {
    if !(m > 0.0) {
        return Err(Error::NonPositiveMass(m));
    }
    if m > big_m {
        return Err(Error::Config(format!("reference mass {m} exceeds inner mass {big_m}")));
    }
    if !(r0 > 2.0 * big_m) {
        return Err(Error::InsideHorizon { r: r0, r_horizon: 2.0 * big_m });
    }
    let (pm, pbig) = ((1.0 - 2.0 * m / r0).sqrt(), (1.0 - 2.0 * big_m / r0).sqrt());
    Ok(ScenarioClosedForm { lhs: r0 * pm * (pm - pbig), rhs: big_m - m })
}

/// `m(1/F + 1/(ρ²F³))` with `F = 1 + m/(2ρ)`: the Schwarzschild bound field
/// for `|d(1/F²)/dρ|·(F²ρ² + 1)`.
pub fn schwarzschild_gradient_field(m: f64, rho: f64) -> f64 {
    let f = 1.0 + m / (2.0 * rho);
    m * (1.0 / f + 1.0 / (rho * rho * f.powi(3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn round_geometry_values() {
        let s = ReferenceManifold::schwarzschild(1.0).unwrap();
        let g = round_geometry(&s, 4.0).unwrap();
        assert_relative_eq!(g.h0, 0.353_553_4, epsilon = 1e-7);
        assert_relative_eq!(g.v, 0.707_106_8, epsilon = 1e-7);
        assert_relative_eq!(g.det_a0, 0.03125, epsilon = 1e-15);
        assert_relative_eq!(g.ric_nu, -0.03125, epsilon = 1e-15);
        assert_eq!((g.t, g.rbar), (0.0, 0.0));
        let g = round_geometry(&s, 2.0001).unwrap();
        assert_relative_eq!(g.h0, 0.00707, epsilon = 1e-4);
        assert!(round_geometry(&s, 2.0).is_err());
        let rn = ReferenceManifold::reissner_nordstrom(1.0, 0.5).unwrap();
        let g = round_geometry(&rn, 4.0).unwrap();
        assert_relative_eq!(g.h0, 0.5 * 0.515_625f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g.det_a0, 0.032_226_6, epsilon = 1e-7);
        assert_relative_eq!(g.rbar, 0.001_953_125, epsilon = 1e-15);
        assert!(g.t.abs() < 1e-18);
    }

    #[test]
    fn round_flow_values() {
        let s = ReferenceManifold::schwarzschild(1.0).unwrap();
        let run = round_flow_u(&s, 4.0, 1.2, 1e-3, 1).unwrap();
        assert_relative_eq!(run[0].energy, 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!((run[1].u - run[0].u) / 1e-3, -0.093_338_1, epsilon = 1e-4);
        let run = round_flow_u(&s, 4.0, 1.0, 10.0, 10).unwrap();
        assert!(run.iter().all(|st| st.u == 1.0 && st.energy == 0.0));
        let u0 = 0.5f64.sqrt() / (1.0f64 - 2.4 / 4.0).sqrt();
        let run = round_flow_u(&s, 4.0, u0, 200.0, 100).unwrap();
        assert_relative_eq!(run[0].energy, 0.211_145_6, epsilon = 1e-7);
        assert!(run.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-14));
        assert!(run.last().unwrap().energy >= 0.2 - 1e-9);
    }

    #[test]
    fn scenario_values() {
        let c = scenario_closed_form(1.2, 1.0, 4.0).unwrap();
        assert_relative_eq!(c.lhs, 0.211_145_6, epsilon = 1e-7);
        assert_relative_eq!(c.rhs, 0.2, epsilon = 1e-15);
        let c = scenario_closed_form(1.0, 1.0, 7.0).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        let c = scenario_closed_form(1.2, 1.0, 1000.0).unwrap();
        assert!((c.lhs - 0.2).abs() < 5e-4);
        assert!(scenario_closed_form(1.2, 1.0, 2.4).is_err());
    }

    #[test]
    fn isotropic_round_trip() {
        let a = Analytic { m: 1.0, e: 0.5 };
        for r in [2.0, 4.0, 50.0] {
            assert_relative_eq!(a.isotropic_r(a.isotropic_rho(r)), r, max_relative = 1e-14);
        }
        assert_relative_eq!(Analytic { m: 1.0, e: 0.0 }.isotropic_rho(4.0), 2.914_213_6, epsilon = 1e-7);
    }

    proptest! {
        #[test]
        fn closed_form_inequality_holds(m in 0.1f64..5.0, extra in 0.0f64..3.0, t in 0.0f64..1.0) {
            let big_m = m + extra;
            let r0 = 2.0 * big_m * (1.0 + 1e-9) + t * (1e4 - 2.0 * big_m);
            let c = scenario_closed_form(big_m, m, r0).unwrap();
            prop_assert!(c.lhs >= c.rhs - 1e-12 * (1.0 + c.rhs));
        }
    }
}
