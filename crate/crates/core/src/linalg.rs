//! Complex dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Relative rank threshold below which the polar factor is rejected.
pub const RANK_TOLERANCE: f64 = 1e-12;

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖A Aᴴ − I‖_F`.
pub fn unitarity_error(a: &CMatrix) -> f64 {
    let mut gram = a * a.adjoint();
    for i in 0..gram.nrows() {
        gram[(i, i)] -= C64::new(1.0, 0.0);
    }
    frobenius_norm(&gram)
}

/// Real inner product `Re tr(Aᴴ B)` on `C^{m×n}` viewed as `R^{2mn}`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `vᴴ u`.
pub fn hermitian_dot(v: &CVector, u: &CVector) -> C64 {
    v.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Nearest unitary matrix in Frobenius norm: `U Vᴴ` from `X = U Σ Vᴴ`.
///
/// Fails when the smallest singular value falls below
/// [`RANK_TOLERANCE`] times the largest, where the polar factor is not unique.
pub fn polar_factor(x: &CMatrix) -> Result<CMatrix> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: x.ncols(),
        });
    }
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > RANK_TOLERANCE * max_sv) {
        return Err(Error::RankDeficient { min_sv, max_sv });
    }
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    Ok(u * v_t)
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary matrix: the polar factor of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    loop {
        let g = random_complex_matrix(rng, m, m);
        if let Ok(u) = polar_factor(&g) {
            return u;
        }
    }
}
