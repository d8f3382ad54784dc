//! Poisson operators, resolvents and weighted norms for constant-coefficient
//! parameter-elliptic boundary value problems on the half-space
//! `R^n_+ = {x_n > 0}`.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: problem data, ellipticity and Lopatinskii-Shapiro checks;
//! - [`companion`]: first-order reduction and stable projection at one
//!   frequency point;
//! - [`grid`]: tangential torus grids, graded normal grids, FFT helpers;
//! - [`poisson`]: Poisson operators on grids and the exponent sweeps;
//! - [`spaces`]: weighted Sobolev, Bessel, Besov and Triebel-Lizorkin norms,
//!   Muckenhoupt characteristics, the Hilbert-type kernel operator;
//! - [`resolvent`]: whole-space and half-space resolvents, extension,
//!   semigroup by contour quadrature;
//! - [`parabolic`]: time-periodic boundary problems and the initial-boundary
//!   splitting solver;
//! - [`rbound`]: Rademacher averages and the non-R-boundedness experiment.

pub mod companion;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod parabolic;
pub mod poisson;
pub mod rbound;
pub mod report;
pub mod resolvent;
pub mod spaces;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(model, "../../../book/src/model.md");
    chapter!(companion, "../../../book/src/companion.md");
    chapter!(poisson, "../../../book/src/poisson.md");
    chapter!(spaces, "../../../book/src/spaces.md");
    chapter!(resolvent, "../../../book/src/resolvent.md");
    chapter!(parabolic, "../../../book/src/parabolic.md");
    chapter!(rbound, "../../../book/src/rbound.md");
    chapter!(cli, "../../../book/src/cli.md");
}
