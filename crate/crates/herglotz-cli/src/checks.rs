//! Structural checks on kernel tensors.

use herglotz::C64;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HermitianCheck {
    /// max |A − A*| over entries.
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

impl HermitianCheck {
    /// Hermitian to `tol`·|A|max and no eigenvalue below −`tol`·trace.
    pub fn passes(&self, tol: f64, max_abs: f64) -> bool {
        self.asymmetry <= tol * max_abs && self.min_eigenvalue >= -tol * self.trace.abs()
    }
}

pub fn hermitian_check<const N: usize>(a: &[[C64; N]; N]) -> HermitianCheck {
    let mut asymmetry: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            asymmetry = asymmetry.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    // Eigenvalues of the Hermitian part.
    let m = DMatrix::from_fn(N, N, |i, j| (a[i][j] + a[j][i].conj()) * 0.5);
    let eig = m.symmetric_eigenvalues();
    HermitianCheck {
        asymmetry,
        min_eigenvalue: eig.iter().copied().fold(f64::INFINITY, f64::min),
        trace: (0..N).map(|i| a[i][i].re).sum(),
    }
}

/// max |A(y,x) − A(x,y)*|.
pub fn swap_error<const N: usize>(axy: &[[C64; N]; N], ayx: &[[C64; N]; N]) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            e = e.max((ayx[i][j] - axy[j][i].conj()).norm());
        }
    }
    e
}
