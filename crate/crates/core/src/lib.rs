pub mod bartnik;
pub mod energy;
pub mod error;
pub mod flow;
pub mod interp;
pub mod krylov;
pub mod ode;
pub mod oracle;
pub mod refgeom;
pub mod sphere;
pub mod surfgeom;

pub use error::{Error, Result};

pub use bartnik::{initial_u, solve_u, UField, USolver};
pub use energy::{penrose_report, quasilocal_energy, InnerData, PenroseReport, Scenario};
pub use flow::{run_flow, FlowConfig, Foliation, Slice};
pub use refgeom::{ConformalProfile, ReferenceKind, ReferenceManifold};
pub use sphere::SphereGrid;
pub use surfgeom::{geometry, StarSurface, SurfaceGeometry};
