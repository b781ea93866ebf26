//! HDG discretizations of canonical first-order PDE systems and numerical
//! checks of their multisymplectic conservation laws.

pub mod geometry;
pub mod hdg;
pub mod json;
pub mod msym;
pub mod polyspace;
pub mod system;

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Poly(#[from] polyspace::PolyError),
    #[error(transparent)]
    System(#[from] system::SystemError),
    #[error(transparent)]
    Hdg(#[from] hdg::HdgError),
    #[error(transparent)]
    Msym(#[from] msym::MsymError),
}
