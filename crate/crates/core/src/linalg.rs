//! Dense Hermitian eigensolver.
//!
//! nalgebra only ships a real symmetric decomposition, so a Hermitian matrix
//! H = A + iB is embedded as the symmetric 2n x 2n block matrix
//! [[A, -B], [B, A]], whose spectrum is that of H with every eigenvalue
//! doubled.  Matrices with purely real entries skip the embedding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenpairs of a Hermitian matrix, sorted by ascending eigenvalue.
/// Vectors are orthonormal; each has unit norm and a fixed phase
/// (the largest-modulus component is made real positive).
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<Complex64>>,
}

/// Solves the Hermitian eigenproblem for `h`.
///
/// `h` is trusted to be Hermitian; only its lower triangle of the real part
/// and the full imaginary part are consulted through the embedding.
pub fn hermitian_eig(h: &DMatrix<Complex64>) -> EigPairs {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "matrix must be square");
    if n == 0 {
        return EigPairs { values: vec![], vectors: vec![] };
    }

    let is_real = h.iter().all(|z| z.im == 0.0);
    if is_real {
        let a = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
        let eig = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut values = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n);
        for &i in &order {
            values.push(eig.eigenvalues[i]);
            let col = eig.eigenvectors.column(i);
            let v = DVector::from_fn(n, |r, _| Complex64::new(col[r], 0.0));
            vectors.push(fix_phase(v));
        }
        return EigPairs { values, vectors };
    }

    // Symmetric embedding: eigenvectors (x, y) of the 2n x 2n block matrix
    // correspond to complex vectors x + iy, each eigenvalue appearing twice
    // ((x, y) and (-y, x) span the same complex line).
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            m[(i, j)] = z.re;
            m[(n + i, n + j)] = z.re;
            m[(i, n + j)] = -z.im;
            m[(n + i, j)] = z.im;
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let scale = order
        .iter()
        .map(|&i| eig.eigenvalues[i].abs())
        .fold(1.0, f64::max);
    let cluster_tol = 1e-9 * scale;

    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    // Accepted vectors of the eigenvalue cluster currently being walked.
    let mut cluster_start = 0usize;
    let mut cluster_vecs: Vec<usize> = vec![];

    for (pos, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if pos > 0 && lam - eig.eigenvalues[order[cluster_start]] > cluster_tol {
            cluster_start = pos;
            cluster_vecs.clear();
        }
        if vectors.len() == n {
            break;
        }
        let col = eig.eigenvectors.column(i);
        let mut z = DVector::from_fn(n, |r, _| Complex64::new(col[r], col[n + r]));
        // Gram-Schmidt against the complex vectors already taken from this
        // cluster; the duplicate partner of an accepted vector projects to
        // (numerically) zero and is skipped.
        for &k in &cluster_vecs {
            let proj = vectors[k].dotc(&z);
            z -= vectors[k].scale_complex(proj);
        }
        let nrm2 = z.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if nrm2 > 0.25 {
            let z = z / Complex64::new(nrm2.sqrt(), 0.0);
            cluster_vecs.push(vectors.len());
            values.push(lam);
            vectors.push(fix_phase(z));
        }
    }
    debug_assert_eq!(values.len(), n, "embedding dedup lost eigenpairs");
    EigPairs { values, vectors }
}

fn fix_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let mut best = 0usize;
    let mut best_mod = -1.0;
    for (i, c) in v.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    let c = v[best];
    if c.norm() > 0.0 {
        let phase = c / c.norm();
        for x in v.iter_mut() {
            *x /= phase;
        }
    }
    v
}

trait ScaleComplex {
    fn scale_complex(&self, s: Complex64) -> Self;
}

impl ScaleComplex for DVector<Complex64> {
    fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|c| c * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn residual(h: &DMatrix<Complex64>, lam: f64, v: &DVector<Complex64>) -> f64 {
        let hv = h * v;
        (hv - v.map(|c| c * lam)).norm()
    }

    #[test]
    fn real_symmetric_path() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0])
            .map(|x| Complex64::new(x, 0.0));
        let eig = hermitian_eig(&h);
        assert_eq!(eig.values.len(), 3);
        for k in 0..3 {
            assert!(residual(&h, eig.values[k], &eig.vectors[k]) < 1e-12);
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn complex_hermitian_matches_characteristic_values() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let eig = hermitian_eig(&h);
        assert_abs_diff_eq!(eig.values[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 2.0, epsilon = 1e-14);
        for k in 0..2 {
            assert!(residual(&h, eig.values[k], &eig.vectors[k]) < 1e-13);
        }
    }

    #[test]
    fn random_hermitian_orthonormal_and_complete() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 24;
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let re: f64 = rng.random_range(-1.0..1.0);
                let im: f64 = if i == j { 0.0 } else { rng.random_range(-1.0..1.0) };
                h[(i, j)] = Complex64::new(re, im);
                h[(j, i)] = Complex64::new(re, -im);
            }
        }
        let eig = hermitian_eig(&h);
        assert_eq!(eig.values.len(), n);
        for k in 0..n {
            assert!(
                residual(&h, eig.values[k], &eig.vectors[k]) < 1e-10,
                "residual too large at {k}"
            );
            for l in 0..k {
                let ip = eig.vectors[l].dotc(&eig.vectors[k]).norm();
                assert!(ip < 1e-10, "vectors {l},{k} not orthogonal: {ip}");
            }
        }
        // Trace check: sum of eigenvalues equals trace of H.
        let tr: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        let sum: f64 = eig.values.iter().sum();
        assert_abs_diff_eq!(tr, sum, epsilon = 1e-9);
    }
}
