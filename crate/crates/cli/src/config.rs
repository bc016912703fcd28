use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qlp_core::flow::{FlowConfig, DEFAULT_RESOLUTION};
use qlp_core::refgeom::{make_reference, ConformalProfile, ReferenceKind, ReferenceManifold, TableRow};
use qlp_core::sphere::SphereGrid;
use qlp_core::surfgeom::{geometry, StarSurface};
use qlp_core::{Error, InnerData};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reference: ReferenceSpec,
    /// Lengths are in units of the reference mass.
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub inner: Option<InnerSpec>,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Independent scenarios, each overriding `surface` and `inner`.
    #[serde(default)]
    pub batch: Vec<BatchEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub kind: ReferenceKind,
    pub m: f64,
    #[serde(default)]
    pub e: f64,
    /// CSV with columns `r,phi,V` for tabulated references.
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    /// Coordinate sphere of area radius `r0`.
    Round { r0: f64 },
    /// `ρ = ρ(r0)·(1 + eps·P₂(cos θ))`.
    Perturbed { r0: f64, eps: f64 },
    /// Euclidean sphere in isothermal coordinates, off-centre along the axis.
    Shifted { radius: f64, offset: f64 },
    /// `theta,phi,G` rows on a Gauss–Legendre grid.
    Csv { path: PathBuf },
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec::Round { r0: 4.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub ds: f64,
    pub s_max: f64,
    #[serde(default)]
    pub resolution: Option<(usize, usize)>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Stop at the first slice failing a foliation condition.
    #[serde(default)]
    pub abort_on_condition_failure: bool,
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self { ds: 0.05, s_max: 20.0, resolution: None, tolerance: default_tolerance(), abort_on_condition_failure: false }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub u0: U0Spec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum U0Spec {
    Constant { value: f64 },
    /// `H₀/H` from the `inner` block.
    FromInner,
}

impl Default for U0Spec {
    fn default() -> Self {
        U0Spec::FromInner
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerSpec {
    Schwarzschild { mass: f64 },
    ReissnerNordstrom { mass: f64, charge: f64 },
    /// Physical mean curvature `factor·H₀`.
    Scaled { factor: f64, horizon_area: f64 },
    /// Physical mean curvature from a CSV column `H`, one row per grid node.
    Csv { path: PathBuf, horizon_area: f64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    /// Lower end of the range; the initial surface's minimum `ρ` when absent.
    #[serde(default)]
    pub rho_min: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    /// Keep every n-th slice.
    #[serde(default = "default_dump")]
    pub dump_every: usize,
    /// Write per-slice surface geometry files.
    #[serde(default)]
    pub surfaces: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_dump() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { directory: default_dir(), dump_every: default_dump(), surfaces: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchEntry {
    pub name: String,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    #[serde(default)]
    pub inner: Option<InnerSpec>,
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.resolve_paths(base))
    }

    fn resolve_paths(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = self.reference.table.as_mut() {
            fix(t);
        }
        let fix_surface = |s: &mut SurfaceSpec| {
            if let SurfaceSpec::Csv { path } = s {
                fix(path);
            }
        };
        let fix_inner = |s: &mut InnerSpec| {
            if let InnerSpec::Csv { path, .. } = s {
                fix(path);
            }
        };
        fix_surface(&mut self.surface);
        if let Some(i) = self.inner.as_mut() {
            fix_inner(i);
        }
        for b in &mut self.batch {
            if let Some(s) = b.surface.as_mut() {
                fix_surface(s);
            }
            if let Some(i) = b.inner.as_mut() {
                fix_inner(i);
            }
        }
        self
    }

    /// Multiplier turning configured lengths into geometric units.
    pub fn length_unit(&self) -> f64 {
        if self.normalized {
            self.reference.m
        } else {
            1.0
        }
    }

    pub fn reference(&self) -> Result<ReferenceManifold, CliError> {
        let block = &self.reference;
        let table = match &block.table {
            Some(path) => {
                let mut rdr = csv_reader(path)?;
                let rows: Vec<TableRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                Some(rows)
            }
            None => None,
        };
        if block.kind == ReferenceKind::Tabulated && table.is_none() {
            return Err(CliError::Usage("a tabulated reference needs a `table` path".into()));
        }
        let reference = make_reference(block.kind, block.m, block.e, table.as_deref()).map_err(usage)?;
        if let Some(tau) = reference.potential_decay_exponent().filter(|tau| *tau <= 0.5) {
            eprintln!("warning: V - 1 decays like r^-{tau:.3} in the table tail; energy limits assume a rate above 1/2");
        }
        Ok(reference)
    }

    pub fn resolution(&self, cli: Option<(usize, usize)>) -> (usize, usize) {
        cli.or(self.flow.resolution).unwrap_or(DEFAULT_RESOLUTION)
    }

    pub fn flow_config(&self, resolution: (usize, usize)) -> Result<FlowConfig, CliError> {
        let unit = self.length_unit();
        let cfg = FlowConfig {
            tolerance: self.flow.tolerance,
            abort_on_condition_failure: self.flow.abort_on_condition_failure,
            keep_every: self.outputs.dump_every.max(1),
            ..FlowConfig::new(self.flow.ds * unit, self.flow.s_max * unit, resolution)
        };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    /// A profile wide enough for the whole flow starting from `surface`.
    pub fn flow_profile(&self, reference: &ReferenceManifold, surface: &SurfaceSpec) -> Result<ConformalProfile, CliError> {
        let unit = self.length_unit();
        let reach = match surface {
            SurfaceSpec::Round { r0 } | SurfaceSpec::Perturbed { r0, .. } => r0 * unit * 1.5,
            SurfaceSpec::Shifted { radius, offset } => 3.0 * (radius + offset.abs()) * unit,
            SurfaceSpec::Csv { .. } => 0.0,
        };
        let hi = 2.0 * (reach + self.flow.s_max * unit) + 20.0 * reference.mass().max(1.0);
        let hi = hi.min(reference.r_max());
        ConformalProfile::new(reference, lower_radius(reference), hi).map_err(usage)
    }

    pub fn surface(&self, profile: &ConformalProfile, block: &SurfaceSpec, resolution: (usize, usize)) -> Result<StarSurface, CliError> {
        let unit = self.length_unit();
        let grid = || SphereGrid::new(resolution.0, resolution.1).map_err(usage);
        let rho = |r0: f64| -> Result<f64, CliError> {
            let r = r0 * unit;
            profile.reference().check_radius(r).map_err(usage)?;
            profile.rho_of_r(r).map_err(usage)
        };
        match block {
            SurfaceSpec::Round { r0 } => StarSurface::round(profile, &grid()?, rho(*r0)?).map_err(usage),
            SurfaceSpec::Perturbed { r0, eps } => StarSurface::ellipsoid(profile, &grid()?, rho(*r0)?, *eps).map_err(usage),
            SurfaceSpec::Shifted { radius, offset } => {
                StarSurface::shifted_sphere(profile, &grid()?, radius * unit, offset * unit).map_err(usage)
            }
            SurfaceSpec::Csv { path } => StarSurface::load_csv(profile, path).map_err(usage),
        }
    }

    pub fn inner_data(&self, block: &InnerSpec, surface: &StarSurface) -> Result<InnerData, CliError> {
        let unit = self.length_unit();
        match block {
            InnerSpec::Schwarzschild { mass } => Ok(InnerData::SchwarzschildInterior { mass: mass * unit }),
            InnerSpec::ReissnerNordstrom { mass, charge } => Ok(InnerData::RnInterior { mass: mass * unit, charge: charge * unit }),
            InnerSpec::Scaled { factor, horizon_area } => {
                let geo = geometry(surface).map_err(usage)?;
                Ok(InnerData::Custom { mean_curvature: geo.h0.iter().map(|h| factor * h).collect(), horizon_area: horizon_area * unit * unit })
            }
            InnerSpec::Csv { path, horizon_area } => {
                #[derive(Deserialize)]
                struct Row {
                    #[serde(rename = "H")]
                    h: f64,
                }
                let mut rdr = csv_reader(path)?;
                let h: Vec<f64> = rdr
                    .deserialize::<Row>()
                    .map(|r| r.map(|r| r.h))
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                Ok(InnerData::Custom { mean_curvature: h, horizon_area: horizon_area * unit * unit })
            }
        }
    }

    /// Radii for the profile table.
    pub fn profile_grid(&self, reference: &ReferenceManifold) -> Result<Vec<f64>, CliError> {
        let unit = self.length_unit();
        let step = self.profile.step.unwrap_or(0.5) * unit;
        if !(step > 0.0) {
            return Err(CliError::Usage("profile step must be positive".into()));
        }
        let floor = lower_radius(reference);
        let lo = match self.profile.r_min {
            Some(r) => r * unit,
            None => ((floor / step).floor() + 1.0) * step,
        };
        let hi = self.profile.r_max.map(|r| r * unit).unwrap_or_else(|| (100.0 * reference.mass().max(1.0)).min(reference.r_max()));
        if lo < floor || hi > reference.r_max() || hi <= lo {
            return Err(CliError::Usage(format!("profile range [{lo}, {hi}] outside [{floor}, {}]", reference.r_max())));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| lo + k as f64 * step).collect())
    }
}

pub fn lower_radius(reference: &ReferenceManifold) -> f64 {
    match reference.kind() {
        ReferenceKind::Tabulated => reference.r_min().max(reference.r_horizon() * 1.005),
        _ => reference.r_horizon() * 1.005,
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
