//! Green functions, Bergman kernels and conjugate Hardy kernels on finitely connected
//! planar domains, followed along the sublevel flow `D_t = {2G < -t}`.

pub mod cli;
pub mod curve;
pub mod domain;
pub mod error;
pub mod flows;
pub mod green;
pub mod kernels;
pub mod spectral;
pub mod sublevel;

pub use domain::{make_annulus, make_circle_domain, make_disk, ComplexPoint, DomainSpec, PlanarDomain};
pub use error::{Error, Result};
pub use green::{build_green, CriticalSet, GreenMethod, GreenSolver, MethodTag};
