//! Trigonometric-polynomial potentials on a lattice and the derived fields
//! used by the invariant pipeline: the directional restriction Q along a
//! maximal dual direction, the vector field q_{delta,b}, and the
//! quasimomentum-weighted field f.
//!
//! All integrals over the fundamental cell are *mean-normalized*:
//! < e^{i(gamma,x)} > = [gamma = 0].  Every invariant in this crate uses the
//! same convention, so cell-volume factors never appear.

use crate::error::{Error, Result};
use crate::lattice::{DualLattice, GammaDelta};
use nalgebra::DVector;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Real-valued trigonometric polynomial q(x) = sum q_gamma e^{i(gamma,x)}
/// with gamma in integer dual coordinates; coefficients satisfy
/// q_{-gamma} = conj(q_gamma).
#[derive(Debug, Clone)]
pub struct FourierPotential {
    terms: BTreeMap<Vec<i64>, Complex64>,
}

impl FourierPotential {
    /// Validates Hermitian symmetry and drops negligible coefficients.
    pub fn new(terms: BTreeMap<Vec<i64>, Complex64>) -> Result<Self> {
        let mut clean: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (k, &v) in &terms {
            if v.norm() > 1e-15 {
                clean.insert(k.clone(), v);
            }
        }
        for (k, &v) in &clean {
            let neg: Vec<i64> = k.iter().map(|&c| -c).collect();
            let w = clean.get(&neg).copied().unwrap_or_default();
            if (w - v.conj()).norm() > 1e-12 * (1.0 + v.norm()) {
                return Err(Error::Invalid(format!(
                    "coefficient at {k:?} breaks the reality condition q_-g = conj(q_g)"
                )));
            }
        }
        Ok(Self { terms: clean })
    }

    /// Sum of amplitude * 2 cos((gamma, x)) terms.
    pub fn cosine_sum(modes: &[(Vec<i64>, f64)]) -> Self {
        let mut terms: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (coords, amp) in modes {
            let neg: Vec<i64> = coords.iter().map(|&c| -c).collect();
            *terms.entry(coords.clone()).or_default() += Complex64::new(*amp, 0.0);
            *terms.entry(neg).or_default() += Complex64::new(*amp, 0.0);
        }
        Self::new(terms).expect("cosine sums are always real-valued")
    }

    pub fn coeff(&self, coords: &[i64]) -> Complex64 {
        self.terms.get(coords).copied().unwrap_or_default()
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.terms.iter()
    }

    pub fn support_radius(&self, dual: &DualLattice) -> f64 {
        self.terms
            .keys()
            .map(|c| dual.point(c).norm())
            .fold(0.0, f64::max)
    }

    /// True when every coefficient is real, which makes all derived
    /// operators real symmetric.
    pub fn all_real(&self) -> bool {
        self.terms.values().all(|v| v.im == 0.0)
    }

    pub fn eval(&self, dual: &DualLattice, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(c, q)| {
                let phase = dual.point(c).dot(x);
                (q * Complex64::new(0.0, phase).exp()).re
            })
            .sum()
    }
}

/// Directional restriction q^delta: the modes of q collinear with delta,
/// as a one-dimensional trig polynomial Q(s) = sum Q_n e^{ins} with
/// Q_n = q_{n delta} and s the conjugate variable of delta.
#[derive(Debug, Clone)]
pub struct DirectionalPotential {
    coeffs: BTreeMap<i64, Complex64>,
    delta_norm2: f64,
}

impl DirectionalPotential {
    pub fn from_coeffs(coeffs: BTreeMap<i64, Complex64>, delta_norm2: f64) -> Self {
        Self {
            coeffs,
            delta_norm2,
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn delta_norm2(&self) -> f64 {
        self.delta_norm2
    }

    /// Mean of |Q|^2 (the directional energy invariant).
    pub fn energy(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn all_real(&self) -> bool {
        self.coeffs.values().all(|v| v.im == 0.0)
    }

    pub fn bandwidth(&self) -> i64 {
        self.coeffs.keys().map(|&n| n.abs()).max().unwrap_or(0)
    }
}

/// Restricts q to the modes collinear with the direction of `gd`.
pub fn directional(q: &FourierPotential, gd: &GammaDelta) -> DirectionalPotential {
    let dc = gd.delta_coords();
    let mut coeffs = BTreeMap::new();
    for (coords, &val) in q.support() {
        if let Some(n) = collinear_multiple(coords, dc) {
            if n != 0 {
                coeffs.insert(n, val);
            }
        }
    }
    DirectionalPotential {
        coeffs,
        delta_norm2: gd.delta_norm2(),
    }
}

/// n such that coords = n * dir, if any.
fn collinear_multiple(coords: &[i64], dir: &[i64]) -> Option<i64> {
    let pivot = dir.iter().position(|&d| d != 0)?;
    if coords[pivot] % dir[pivot] != 0 {
        return None;
    }
    let n = coords[pivot] / dir[pivot];
    coords
        .iter()
        .zip(dir)
        .all(|(&c, &d)| c == n * d)
        .then_some(n)
}

/// Vector-valued trig polynomial: sum of u_gamma e^{i(gamma,x)} with
/// complex vector coefficients.
#[derive(Debug, Clone)]
pub struct VectorTrigPoly {
    pub terms: Vec<(Vec<i64>, DVector<Complex64>)>,
}

impl VectorTrigPoly {
    /// |poly(x)|^2 as a scalar trig polynomial over mode differences.
    pub fn norm_sq(&self) -> ScalarTrigPoly {
        let mut out: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (ca, ua) in &self.terms {
            for (cb, ub) in &self.terms {
                let diff: Vec<i64> = ca.iter().zip(cb).map(|(&a, &b)| a - b).collect();
                // (u_a, u_b) with conjugation on the second factor.
                let ip: Complex64 = ua.iter().zip(ub.iter()).map(|(a, b)| a * b.conj()).sum();
                *out.entry(diff).or_default() += ip;
            }
        }
        ScalarTrigPoly { terms: out }
    }

    pub fn eval(&self, dual: &DualLattice, x: &DVector<f64>) -> DVector<Complex64> {
        let dim = dual.dim();
        let mut acc = DVector::<Complex64>::zeros(dim);
        for (c, u) in &self.terms {
            let phase = Complex64::new(0.0, dual.point(c).dot(x)).exp();
            acc += u.map(|z| z * phase);
        }
        acc
    }
}

/// Scalar trig polynomial on the dual lattice.
#[derive(Debug, Clone)]
pub struct ScalarTrigPoly {
    pub terms: BTreeMap<Vec<i64>, Complex64>,
}

impl ScalarTrigPoly {
    /// Mean over the fundamental cell: the zero-mode coefficient.
    pub fn mean(&self) -> Complex64 {
        let dim = self.terms.keys().next().map_or(0, |k| k.len());
        self.terms
            .get(&vec![0; dim])
            .copied()
            .unwrap_or_default()
    }

    /// Coefficients of the modes collinear with the direction of `gd`,
    /// keyed by the integer multiple: the restriction visible to any
    /// function of s = (delta, x).
    pub fn directional_modes(&self, gd: &GammaDelta) -> BTreeMap<i64, Complex64> {
        let dc = gd.delta_coords();
        let mut out = BTreeMap::new();
        for (coords, &val) in &self.terms {
            if let Some(n) = collinear_multiple(coords, dc) {
                *out.entry(n).or_default() += val;
            }
        }
        out
    }

    /// Mean of poly(x) * w((delta, x)) where w has one-dimensional modes
    /// w_k e^{iks}: only the collinear modes of poly survive.
    pub fn weighted_mean(&self, gd: &GammaDelta, w: &BTreeMap<i64, Complex64>) -> Complex64 {
        self.directional_modes(gd)
            .iter()
            .map(|(m, c)| c * w.get(&(-m)).copied().unwrap_or_default())
            .sum()
    }

    pub fn eval(&self, dual: &DualLattice, x: &DVector<f64>) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, q)| q * Complex64::new(0.0, dual.point(c).dot(x)).exp())
            .sum()
    }
}

/// The invariant field q_{delta,b}(x) = sum over gamma in the (delta, b)
/// plane, off the delta axis, of (gamma / (gamma, b)) q_gamma e^{i(gamma,x)}.
pub fn q_delta_b(
    q: &FourierPotential,
    dual: &DualLattice,
    gd: &GammaDelta,
    b_coords: &[i64],
    cutoff: f64,
) -> Result<VectorTrigPoly> {
    let b = gd.point(b_coords);
    let delta = gd.delta();
    let mut terms = vec![];
    for (coords, &val) in q.support() {
        let g = dual.point(coords);
        if g.norm() >= cutoff {
            continue;
        }
        // Off the delta axis and inside the plane spanned by delta and b.
        if collinear_multiple(coords, gd.delta_coords()).is_some() {
            continue;
        }
        if !in_plane(&g, delta, &b) {
            continue;
        }
        let gb = g.dot(&b);
        if gb.abs() < 1e-12 {
            return Err(Error::Invalid(format!(
                "support mode {coords:?} is orthogonal to b; q_delta_b undefined"
            )));
        }
        let u = g.map(|x| Complex64::new(x / gb, 0.0) * val);
        terms.push((coords.clone(), u));
    }
    Ok(VectorTrigPoly { terms })
}

fn in_plane(g: &DVector<f64>, delta: &DVector<f64>, b: &DVector<f64>) -> bool {
    if g.len() == 2 {
        return true;
    }
    // Component of g orthogonal to span{delta, b} (delta and b are orthogonal).
    let mut r = g.clone();
    r -= delta * (g.dot(delta) / delta.norm_squared());
    r -= b * (g.dot(b) / b.norm_squared());
    r.norm() < 1e-9 * g.norm().max(1.0)
}

/// The perturbation field f(x) = sum over gamma off the delta axis with
/// |gamma| < cutoff of (gamma / (beta + tau, gamma)) q_gamma e^{i(gamma,x)}.
pub fn f_field(
    q: &FourierPotential,
    dual: &DualLattice,
    gd: &GammaDelta,
    beta_tau: &DVector<f64>,
    cutoff: f64,
) -> Result<VectorTrigPoly> {
    let mut terms = vec![];
    for (coords, &val) in q.support() {
        let g = dual.point(coords);
        if g.norm() >= cutoff {
            continue;
        }
        if collinear_multiple(coords, gd.delta_coords()).is_some() {
            continue;
        }
        let denom = beta_tau.dot(&g);
        if denom.abs() < 1e-9 {
            return Err(Error::Invalid(format!(
                "quasimomentum is resonant with mode {coords:?}: (beta+tau, gamma) ~ 0"
            )));
        }
        let u = g.map(|x| Complex64::new(x / denom, 0.0) * val);
        terms.push((coords.clone(), u));
    }
    Ok(VectorTrigPoly { terms })
}
