//! Reference systems used in tests, examples and benchmarks.

use nalgebra::{dmatrix, DMatrix};

use crate::model::LtiSystem;

/// Standard 4-state, 2-port system with `D + Dᵀ` indefinite (not positive real).
pub fn boyd_standard() -> LtiSystem {
    let a = dmatrix![
        -0.08, 0.83, 0.0, 0.0;
        -0.83, -0.08, 0.0, 0.0;
        0.0, 0.0, -0.7, 9.0;
        0.0, 0.0, -9.0, -0.7
    ];
    let b = dmatrix![1.0, 1.0; 0.0, 0.0; 1.0, -1.0; 0.0, 0.0];
    let c = dmatrix![0.4, 0.0, 0.4, 0.0; 0.6, 0.0, 1.0, 0.0];
    let d = dmatrix![0.3, 0.0; 0.0, -0.15];
    LtiSystem::standard(a, b, c, d).expect("valid reference system")
}

/// Index-two descriptor system with finite eigenvalues `-0.5 ± √2 j`.
pub fn index_two_descriptor() -> LtiSystem {
    let e = dmatrix![
        16.0, 12.0, -4.0, 14.0;
        14.0, 8.0, 4.0, -14.0;
        -14.0, 8.0, -4.0, 34.0;
        6.0, -4.0, 0.0, -10.0
    ];
    let a = dmatrix![
        6.0, -19.0, 7.0, -9.0;
        11.0, 3.0, -21.0, 18.0;
        25.0, -9.0, 35.0, -16.0;
        -27.0, 6.0, -16.0, 38.0
    ];
    let b = dmatrix![-0.6; 1.0; 0.2; -0.3];
    let c = dmatrix![3.2, 1.4, 2.6, 1.4];
    let d = dmatrix![0.105];
    LtiSystem::new(e, a, b, c, d).expect("valid reference system")
}

/// [`index_two_descriptor`] with E replaced by the identity (unstable).
pub fn index_two_identity_e() -> LtiSystem {
    let mut sys = index_two_descriptor();
    sys.e = DMatrix::identity(4, 4);
    sys
}

/// `E = diag(1, 0, 0)`, `A = diag(-1, 1, 1)`, `B = [1, 1, α]ᵀ`, `C = [1, 1, 1]`,
/// `D = 1/2`, so that `G(jw) + G(jw)* = 2/(w² + 1) - 2α - 1`.
pub fn algebraic_part_example(alpha: f64) -> LtiSystem {
    let e = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0, 0.0]);
    let a = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 1.0, 1.0]);
    let b = dmatrix![1.0; 1.0; alpha];
    let c = dmatrix![1.0, 1.0, 1.0];
    let d = dmatrix![0.5];
    LtiSystem::new(e, a, b, c, d).expect("valid reference system")
}
