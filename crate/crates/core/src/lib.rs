//! Nearest positive-real (passive) LTI systems.
//!
//! A system `E x' = A x + B u`, `y = C x + D u` is approximated by one in
//! port-Hamiltonian form
//!
//! ```text
//! A = (J - R) Q,  B = F - P,  C = (F + P)ᵀ Q,  D = S + N,
//! J = -Jᵀ,  N = -Nᵀ,  K = [R P; Pᵀ S] ⪰ 0,  EᵀQ = QᵀE ⪰ 0,
//! ```
//!
//! which is positive real by construction. The weighted Frobenius distance to
//! the target is minimized over the PH blocks with a projected fast gradient
//! method ([`fgm::solve_nearest`]), started from one of the initializations in
//! [`init`]. [`analysis`] certifies or refutes positive realness of the result.
//!
//! ```no_run
//! use passive_ph::{catalog, fgm, init, model::{Mode, Weights}, projections::Bounds};
//!
//! let target = catalog::boyd_standard();
//! let x0 = init::init_standard(&target, Mode::Standard)?;
//! let sol = fgm::solve_nearest(&target, &x0, &Weights::default(), &Bounds::default(), &Default::default())?;
//! println!("objective {:.4}", sol.objective);
//! # Ok::<(), passive_ph::Error>(())
//! ```

extern crate openblas_src;

pub mod analysis;
pub mod catalog;
pub mod error;
pub mod experiments;
pub mod fgm;
pub mod init;
pub mod linalg;
pub mod model;
pub mod projections;
pub mod sdp;

pub use error::{Error, Result};
pub use fgm::{solve_nearest, FgmOptions, FgmTrace, NearestSolution};
pub use model::{LtiSystem, Mode, PhForm, Weights};
pub use projections::Bounds;
