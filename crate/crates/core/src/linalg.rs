//! Dense complex linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::{CMatrix, CVector, C64};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Decompose `a`, which is assumed Hermitian. Only the Hermitian part
/// `(a + a^H)/2` is used.
pub fn hermitian_eigen(a: &CMatrix) -> HermitianEigen {
    let n = a.nrows();
    let sym = hermitian_part(a);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// `(a + a^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest absolute entry of `a - a^H`.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues below
/// `clip` (absolute) are set to zero first.
pub fn psd_sqrt(a: &CMatrix, clip: f64) -> CMatrix {
    let eig = hermitian_eigen(a);
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let lam = if lam < clip { 0.0 } else { lam };
        if lam == 0.0 {
            continue;
        }
        let v = eig.vectors.column(k);
        out += (&v * v.adjoint()).scale(lam.sqrt());
    }
    out
}

/// Rebuild `a` with every eigenvalue below `clip` replaced by zero.
pub fn clip_psd(a: &CMatrix, clip: f64) -> CMatrix {
    let eig = hermitian_eigen(a);
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam < clip {
            continue;
        }
        let v = eig.vectors.column(k);
        out += (&v * v.adjoint()).scale(lam);
    }
    out
}

/// `x^H A x`, real part (exact for Hermitian `A`).
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// `h^H (I + a a^H / sigma2)^{-1} h`, split into the part of `h` orthogonal
/// to `a` and the part along it so that a tiny `sigma2` does not cancel.
pub fn inv_rank_one_form(h: &CVector, a: &CVector, sigma2: f64) -> f64 {
    let a2 = a.norm_squared();
    if a2 == 0.0 {
        return h.norm_squared();
    }
    let norm = C64::from(a2.sqrt());
    let c = a.dotc(h) / norm;
    let perp = h - a * (c / norm);
    perp.norm_squared() + c.norm_sqr() * sigma2 / (sigma2 + a2)
}

/// Real part of `tr(a b)`.
pub fn trace_prod(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]` of a complex
/// matrix. Hermitian PSD maps to symmetric PSD with every eigenvalue doubled
/// in multiplicity.
pub fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Inverse of [`real_embedding`] for a (possibly unstructured) symmetric
/// matrix: averages the two copies of each real and imaginary part.
pub fn complex_from_embedding(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        C64::new(re, im)
    })
}

/// Outer product `x x^H`.
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}

/// Real column vector of the moduli squared, handy for diagnostics.
pub fn abs2(x: &CVector) -> DVector<f64> {
    x.map(|z| z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_round_trip_and_spectrum() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.5, 1.0), C64::new(0.5, -1.0), C64::new(3.0, 0.0)],
        );
        let e = real_embedding(&a);
        assert!((complex_from_embedding(&e) - &a).iter().all(|z| z.norm() < 1e-15));
        let ce = hermitian_eigen(&a).values;
        let mut re: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        re.sort_by(|x, y| y.total_cmp(x));
        assert!((re[0] - ce[0]).abs() < 1e-12 && (re[1] - ce[0]).abs() < 1e-12);
        assert!((re[2] - ce[1]).abs() < 1e-12 && (re[3] - ce[1]).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.5, 1.0), C64::new(0.5, -1.0), C64::new(3.0, 0.0)],
        );
        let s = psd_sqrt(&a, 0.0);
        assert!((&s * &s - &a).iter().all(|z| z.norm() < 1e-12));
    }
}
