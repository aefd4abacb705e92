//! One-dimensional periodic (Hill) operator along a lattice direction:
//! T_v(Q) acting on quasiperiodic functions e^{i(n+v)s}, with matrix
//! elements diag |delta|^2 (n+v)^2 plus the convolution by Q.
//!
//! Provides labelled eigenpairs mu_j(v), the Fourier coefficients of
//! |phi_{j,v}|^2, a numerical fit of the large-j expansion
//! |phi_{n,v}|^2 = 1 + A_2(s)/n^2 + ..., and the directional energy
//! invariant recovered from the sqrt(mu) asymptotics at v = 0.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, EigPairs};
use crate::potential::DirectionalPotential;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Eigenpairs of T_v(Q) on the mode window n in [-n_max, n_max].
///
/// For v in (0, 1) away from 0 and 1/2 the labels follow the dominant
/// plane-wave component: mu_j(v) ~ |delta|^2 (j+v)^2, j in Z.  At the
/// symmetry points v = 0 and v = 1/2 eigenvalues pair up and labels are
/// the sorted indices 0, 1, 2, ... instead.
#[derive(Debug, Clone)]
pub struct HillSpectrum {
    pub v: f64,
    pub n_max: i64,
    pub scale2: f64,
    pairs: EigPairs,
    /// label -> position in the sorted eigenpair list.
    labels: BTreeMap<i64, usize>,
    sorted_labels: bool,
}

impl HillSpectrum {
    pub fn sorted_values(&self) -> &[f64] {
        &self.pairs.values
    }

    pub fn uses_sorted_labels(&self) -> bool {
        self.sorted_labels
    }

    pub fn eigenvalue(&self, j: i64) -> Result<f64> {
        let idx = self.index_of(j)?;
        Ok(self.pairs.values[idx])
    }

    /// Plane-wave coefficients c_n (n in [-n_max, n_max]) of phi_{j,v}.
    pub fn coeffs(&self, j: i64) -> Result<&DVector<Complex64>> {
        let idx = self.index_of(j)?;
        Ok(&self.pairs.vectors[idx])
    }

    fn index_of(&self, j: i64) -> Result<usize> {
        self.labels.get(&j).copied().ok_or(Error::MissingLabel {
            j,
            n_max: self.n_max,
        })
    }

    /// Fourier coefficients p_k of |phi_{j,v}(s)|^2 for |k| <= k_max:
    /// p_k = sum_n c_{n+k} conj(c_n).  p_0 = 1 by normalization.
    pub fn phi_sq_coeffs(&self, j: i64, k_max: i64) -> Result<BTreeMap<i64, Complex64>> {
        let c = self.coeffs(j)?;
        Ok(autocorrelation(c, k_max))
    }

    /// Overlap (e^{iks} phi_{j,v}, phi_other_{j',v'}) between two spectra
    /// whose quasimomenta differ by an integer shift absorbed in k:
    /// sum_n c_n conj(c'_{n+k}).
    pub fn shifted_overlap(&self, j: i64, other: &HillSpectrum, jp: i64, k: i64) -> Result<Complex64> {
        let c = self.coeffs(j)?;
        let cp = other.coeffs(jp)?;
        let n_max = self.n_max;
        let mut acc = Complex64::default();
        for n in -n_max..=n_max {
            let m = n + k;
            if m.abs() <= other.n_max {
                let i = (n + n_max) as usize;
                let ip = (m + other.n_max) as usize;
                acc += c[i] * cp[ip].conj();
            }
        }
        Ok(acc)
    }
}

fn autocorrelation(c: &DVector<Complex64>, k_max: i64) -> BTreeMap<i64, Complex64> {
    let n = c.len() as i64;
    let mut out = BTreeMap::new();
    for k in -k_max..=k_max {
        let mut acc = Complex64::default();
        for i in 0..n {
            let ik = i + k;
            if (0..n).contains(&ik) {
                acc += c[ik as usize] * c[i as usize].conj();
            }
        }
        out.insert(k, acc);
    }
    out
}

/// Solves T_v(Q) by Galerkin truncation to the modes [-n_max, n_max].
pub fn hill_solve(qd: &DirectionalPotential, v: f64, n_max: i64) -> Result<HillSpectrum> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::Invalid(format!("v = {v} outside [0, 1)")));
    }
    if n_max < 1 {
        return Err(Error::Invalid("n_max must be positive".into()));
    }
    let scale2 = qd.delta_norm2();
    let size = (2 * n_max + 1) as usize;
    let mut h = DMatrix::<Complex64>::zeros(size, size);
    for i in 0..size {
        let n = i as i64 - n_max;
        h[(i, i)] = Complex64::new(scale2 * (n as f64 + v).powi(2), 0.0);
        for jj in 0..size {
            if i != jj {
                let m = jj as i64 - n_max;
                h[(i, jj)] += qd.coeff(n - m);
            }
        }
    }
    let pairs = hermitian_eig(&h);

    let at_symmetry = v.abs() < 1e-9 || (v - 0.5).abs() < 1e-9;
    let labels = if at_symmetry {
        // Paired spectrum: sorted indexing mu_0 <= mu_1 <= ...
        (0..size).map(|i| (i as i64, i)).collect()
    } else {
        label_by_dominant_mode(&pairs, n_max, scale2, v)?
    };

    Ok(HillSpectrum {
        v,
        n_max,
        scale2,
        pairs,
        labels,
        sorted_labels: at_symmetry,
    })
}

fn label_by_dominant_mode(
    pairs: &EigPairs,
    n_max: i64,
    scale2: f64,
    v: f64,
) -> Result<BTreeMap<i64, usize>> {
    let size = pairs.values.len();
    let mut labels: BTreeMap<i64, usize> = BTreeMap::new();
    let mut contested: Vec<usize> = vec![];
    for idx in 0..size {
        let c = &pairs.vectors[idx];
        let mut best = 0usize;
        let mut best_w = -1.0;
        for (i, z) in c.iter().enumerate() {
            let w = z.norm_sqr();
            let better = w > best_w + 1e-14
                || ((w - best_w).abs() <= 1e-14
                    && (i as i64 - n_max).abs() < (best as i64 - n_max).abs());
            if better {
                best_w = w;
                best = i;
            }
        }
        let j = best as i64 - n_max;
        if let Some(&prev) = labels.get(&j) {
            // Keep the pair with the larger dominant weight; requeue the other.
            let prev_w = pairs.vectors[prev][(j + n_max) as usize].norm_sqr();
            if best_w > prev_w {
                labels.insert(j, idx);
                contested.push(prev);
            } else {
                contested.push(idx);
            }
        } else {
            labels.insert(j, idx);
        }
    }
    if !contested.is_empty() {
        // Fallback: match leftover eigenpairs to unused labels by proximity
        // to the unperturbed values.
        let mut free: Vec<i64> = (-n_max..=n_max)
            .filter(|j| !labels.contains_key(j))
            .collect();
        for idx in contested {
            let mu = pairs.values[idx];
            free.sort_by(|&a, &b| {
                let da = (scale2 * (a as f64 + v).powi(2) - mu).abs();
                let db = (scale2 * (b as f64 + v).powi(2) - mu).abs();
                da.total_cmp(&db)
            });
            if free.is_empty() {
                return Err(Error::LabelCollision { j: 0, n_max });
            }
            let j = free.remove(0);
            if (scale2 * (j as f64 + v).powi(2) - mu).abs() > scale2 * (n_max as f64) {
                return Err(Error::LabelCollision { j, n_max });
            }
            labels.insert(j, idx);
        }
    }
    Ok(labels)
}

/// Mode-resolved coefficients of the large-label expansion
/// |phi_{n,v}(s)|^2 = sum_k orders[k](s) / n^k, with orders[0] = 1.
#[derive(Debug, Clone)]
pub struct PhiSqExpansion {
    /// orders[k] maps a Fourier mode m to the coefficient of e^{ims}/n^k.
    pub orders: Vec<BTreeMap<i64, Complex64>>,
    /// Condition number of the power-basis fit.
    pub condition: f64,
}

/// Fits the 1/n expansion of |phi_{n,v}|^2 from labelled solves over
/// `j_lo..=j_hi` (positive labels).  `max_order` coefficients beyond the
/// constant are reported; two extra powers are fitted for stability.
pub fn fit_phi_sq_expansion(
    qd: &DirectionalPotential,
    v: f64,
    j_lo: i64,
    j_hi: i64,
    max_order: usize,
) -> Result<PhiSqExpansion> {
    if j_lo < 1 || j_hi - j_lo + 1 < (max_order + 4) as i64 {
        return Err(Error::Invalid(format!(
            "label range {j_lo}..={j_hi} too small for a degree-{max_order} fit"
        )));
    }
    let bandwidth = qd.bandwidth().max(1);
    let n_max = j_hi + 4 * bandwidth + 16;
    let spec = hill_solve(qd, v, n_max)?;
    let k_max = bandwidth * max_order as i64;

    let js: Vec<i64> = (j_lo..=j_hi).collect();
    let fit_order = max_order + 2;
    // Design matrix in u = 1/j with powers 1..fit_order.
    let rows = js.len();
    let design = DMatrix::from_fn(rows, fit_order, |r, c| {
        (1.0 / js[r] as f64).powi(c as i32 + 1)
    });
    let svd = design.clone().svd(true, true);
    let condition = svd.singular_values[0]
        / svd.singular_values[svd.singular_values.len() - 1].max(f64::MIN_POSITIVE);
    if condition > 1e12 {
        return Err(Error::IllConditionedFit {
            cond: condition,
            context: "1/n expansion of |phi|^2".into(),
        });
    }

    let mut per_j: Vec<BTreeMap<i64, Complex64>> = vec![];
    for &j in &js {
        per_j.push(spec.phi_sq_coeffs(j, k_max)?);
    }

    let mut orders: Vec<BTreeMap<i64, Complex64>> = vec![BTreeMap::new(); max_order + 1];
    orders[0].insert(0, Complex64::new(1.0, 0.0));
    for m in -k_max..=k_max {
        let base = if m == 0 { 1.0 } else { 0.0 };
        let mut rhs_re = DVector::zeros(rows);
        let mut rhs_im = DVector::zeros(rows);
        for (r, pj) in per_j.iter().enumerate() {
            let p = pj.get(&m).copied().unwrap_or_default();
            rhs_re[r] = p.re - base;
            rhs_im[r] = p.im;
        }
        let sol_re = svd.solve(&rhs_re, 1e-13).expect("SVD solve");
        let sol_im = svd.solve(&rhs_im, 1e-13).expect("SVD solve");
        for k in 1..=max_order {
            let c = Complex64::new(sol_re[k - 1], sol_im[k - 1]);
            if c.norm() > 1e-9 {
                orders[k].insert(m, c);
            }
        }
    }
    Ok(PhiSqExpansion { orders, condition })
}

/// Result of the sqrt(mu) asymptotic fit at v = 0.
#[derive(Debug, Clone)]
pub struct EnergyFromMu {
    /// Recovered mean of |Q|^2.
    pub energy: f64,
    /// Root-mean-square residual of the fit, in units of the data.
    pub residual: f64,
}

/// Recovers the directional energy invariant <|Q|^2> from the pair
/// asymptotics of T_0(Q): both sorted eigenvalues mu_{2m+1}, mu_{2m+2}
/// satisfy sqrt(mu) = z + <|Q|^2> / (8 z^3) + O(z^{-4}), z = (m+1)|delta|.
/// The z^{-3} coefficient is fitted together with two higher corrections.
pub fn energy_from_mu_asymptotics(
    qd: &DirectionalPotential,
    m_lo: i64,
    m_hi: i64,
) -> Result<EnergyFromMu> {
    if m_lo < 1 || m_hi - m_lo < 6 {
        return Err(Error::Invalid(format!(
            "pair range {m_lo}..={m_hi} too small for the asymptotic fit"
        )));
    }
    if qd.coeff(0).norm() > 1e-12 {
        return Err(Error::Invalid(
            "directional potential must have zero mean for the sqrt(mu) fit".into(),
        ));
    }
    let n_max = m_hi + qd.bandwidth().max(1) * 4 + 16;
    let spec = hill_solve(qd, 0.0, n_max)?;
    let scale = qd.delta_norm2().sqrt();

    let mut zs = vec![];
    let mut ys = vec![];
    for m in m_lo..=m_hi {
        let z = (m + 1) as f64 * scale;
        for idx in [2 * m + 1, 2 * m + 2] {
            let mu = spec.sorted_values()[idx as usize];
            zs.push(z);
            ys.push(mu.sqrt() - z);
        }
    }
    let rows = zs.len();
    // Powers z^{-3}, z^{-4}, z^{-5}.
    let design = DMatrix::from_fn(rows, 3, |r, c| zs[r].powi(-(c as i32 + 3)));
    let rhs = DVector::from_vec(ys.clone());
    let svd = design.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-13).expect("SVD solve");
    let fitted = design * &sol;
    let residual = ((&fitted - &rhs).norm_squared() / rows as f64).sqrt();
    Ok(EnergyFromMu {
        energy: 8.0 * sol[0],
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{dual_lattice, gamma_delta, LatticeBasis};
    use crate::potential::{directional, FourierPotential};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn dir_pot(modes: &[(i64, f64)]) -> DirectionalPotential {
        let lat = LatticeBasis::cubic(2.0 * PI, 2);
        let dual = dual_lattice(&lat).unwrap();
        let gd = gamma_delta(&lat, &dual, &[0, 1]).unwrap();
        let q = FourierPotential::cosine_sum(
            &modes
                .iter()
                .map(|&(n, a)| (vec![0, n], a))
                .collect::<Vec<_>>(),
        );
        directional(&q, &gd)
    }

    #[test]
    fn free_operator_is_exact() {
        let qd = dir_pot(&[]);
        let spec = hill_solve(&qd, 0.3, 12).unwrap();
        for j in -8i64..=8 {
            let mu = spec.eigenvalue(j).unwrap();
            assert_abs_diff_eq!(mu, (j as f64 + 0.3).powi(2), epsilon = 1e-12);
            let c = spec.coeffs(j).unwrap();
            let w = c[(j + 12) as usize].norm_sqr();
            assert_abs_diff_eq!(w, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_converge_in_basis_size() {
        let qd = dir_pot(&[(1, 1.0)]);
        let a = hill_solve(&qd, 0.3, 24).unwrap();
        let b = hill_solve(&qd, 0.3, 48).unwrap();
        for j in -4i64..=4 {
            assert_abs_diff_eq!(
                a.eigenvalue(j).unwrap(),
                b.eigenvalue(j).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn second_order_perturbation_scaling() {
        // mu_j(v) = (j+v)^2 + eps^2 sum_{m=+-1} 1/((j+v)^2 - (j+m+v)^2) + O(eps^4).
        let v = 0.3;
        let j = 3i64;
        for eps in [0.05, 0.1] {
            let qd = dir_pot(&[(1, eps)]);
            let spec = hill_solve(&qd, v, 24).unwrap();
            let jv = j as f64 + v;
            let shift: f64 = [1.0, -1.0]
                .iter()
                .map(|m| eps * eps / (jv * jv - (jv + m).powi(2)))
                .sum();
            let got = spec.eigenvalue(j).unwrap();
            assert_abs_diff_eq!(got, jv * jv + shift, epsilon = 3.0 * eps.powi(4));
        }
    }

    #[test]
    fn floquet_reflection_symmetry() {
        // The spectra at v and 1 - v coincide (complex conjugation maps one
        // problem onto the other).
        let qd = dir_pot(&[(1, 1.0), (2, 0.3)]);
        let a = hill_solve(&qd, 0.3, 30).unwrap();
        let b = hill_solve(&qd, 0.7, 30).unwrap();
        for (x, y) in a.sorted_values()[..40].iter().zip(&b.sorted_values()[..40]) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn phi_sq_zero_mode_is_one_and_q_moment_consistent() {
        let qd = dir_pot(&[(1, 1.0)]);
        let spec = hill_solve(&qd, 0.3, 30).unwrap();
        for j in [-2i64, 0, 1, 4] {
            let p = spec.phi_sq_coeffs(j, 4).unwrap();
            assert_abs_diff_eq!(p[&0].re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[&0].im, 0.0, epsilon = 1e-12);
            // <Q |phi|^2> = mu - |delta|^2 sum (n+v)^2 |c_n|^2.
            let qmom: Complex64 = qd
                .coeffs()
                .iter()
                .map(|(&k, &qk)| qk * p.get(&(-k)).copied().unwrap_or_default())
                .sum();
            let c = spec.coeffs(j).unwrap();
            let kinetic: f64 = c
                .iter()
                .enumerate()
                .map(|(i, z)| (i as f64 - 30.0 + 0.3).powi(2) * z.norm_sqr())
                .sum();
            let mu = spec.eigenvalue(j).unwrap();
            assert_abs_diff_eq!(qmom.re, mu - kinetic, epsilon = 1e-10);
            assert_abs_diff_eq!(qmom.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn expansion_leading_coefficient_matches_theory() {
        // For Q = 2 cos s (modes +-1, |delta| = 1) the 1/n^2 coefficient of
        // |phi|^2 at modes +-1 is 1/2 (from A_2 = Q/2 + const).
        let qd = dir_pot(&[(1, 1.0)]);
        let exp = fit_phi_sq_expansion(&qd, 0.3, 12, 48, 4).unwrap();
        assert!(exp.orders[1].values().all(|c| c.norm() < 1e-3), "A_1 ~ 0");
        let a2_plus = exp.orders[2].get(&1).copied().unwrap_or_default();
        assert_abs_diff_eq!(a2_plus.re, 0.5, epsilon = 1e-2);
        let a2_minus = exp.orders[2].get(&-1).copied().unwrap_or_default();
        assert_abs_diff_eq!(a2_minus.re, 0.5, epsilon = 1e-2);
    }

    #[test]
    fn energy_invariant_recovered_from_mu() {
        let qd = dir_pot(&[(1, 1.0)]);
        let out = energy_from_mu_asymptotics(&qd, 10, 40).unwrap();
        assert_abs_diff_eq!(out.energy, 2.0, epsilon = 0.04);

        let qd = dir_pot(&[(1, 0.7), (2, 0.4)]);
        let out = energy_from_mu_asymptotics(&qd, 10, 40).unwrap();
        // <|Q|^2> = 2 (0.7^2 + 0.4^2).
        assert_abs_diff_eq!(out.energy, 2.0 * (0.49 + 0.16), epsilon = 0.05);
    }

    #[test]
    fn missing_label_is_reported() {
        let qd = dir_pot(&[(1, 1.0)]);
        let spec = hill_solve(&qd, 0.3, 8).unwrap();
        assert!(matches!(
            spec.eigenvalue(100),
            Err(Error::MissingLabel { .. })
        ));
    }
}
