//! Lattice geometry: primal/dual bases, directional sublattices, and the
//! quasimomentum bookkeeping used by the extraction pipeline.
//!
//! Conventions: lattice generators are matrix *columns*; the dual satisfies
//! (primal_i, dual_j) = 2 pi delta_ij.  For a maximal dual direction `delta`,
//! `GammaDelta` carries the hyperplane sublattice Gamma_delta (the dual of
//! Omega_delta = { omega : (omega, delta) = 0 } inside the hyperplane
//! H_delta), its centred fundamental cell F_delta, and the decomposition
//! p = beta + tau + (j + v) delta of an arbitrary point.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Primal lattice Omega with generators as columns.
#[derive(Debug, Clone)]
pub struct LatticeBasis {
    basis: DMatrix<f64>,
}

impl LatticeBasis {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let n = basis.nrows();
        if n == 0 || basis.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: basis.ncols(),
            });
        }
        let det = basis.determinant();
        let norm = basis.norm();
        if det.abs() < 1e-12 * norm.powi(n as i32) {
            return Err(Error::SingularBasis {
                det,
                cond: norm.powi(n as i32) / det.abs().max(f64::MIN_POSITIVE),
            });
        }
        Ok(Self { basis })
    }

    /// Cubic lattice (scale * Z)^dim.
    pub fn cubic(scale: f64, dim: usize) -> Self {
        Self {
            basis: DMatrix::identity(dim, dim) * scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn point(&self, coords: &[i64]) -> DVector<f64> {
        lattice_point(&self.basis, coords)
    }
}

/// Dual lattice Gamma; `basis = 2 pi * primal^{-T}`.
#[derive(Debug, Clone)]
pub struct DualLattice {
    basis: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl DualLattice {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn point(&self, coords: &[i64]) -> DVector<f64> {
        lattice_point(&self.basis, coords)
    }

    /// Real coordinates of an ambient point in the dual basis.
    pub fn coords_of(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.inv * p
    }
}

/// Dual lattice of `lat`: generators 2 pi * B^{-T}, so (omega_i, gamma_j) = 2 pi delta_ij.
pub fn dual_lattice(lat: &LatticeBasis) -> Result<DualLattice> {
    let b = lat.basis();
    let inv = b.clone().try_inverse().ok_or(Error::SingularBasis {
        det: b.determinant(),
        cond: f64::INFINITY,
    })?;
    let basis = inv.transpose() * (2.0 * std::f64::consts::PI);
    let binv = basis.clone().try_inverse().ok_or(Error::SingularBasis {
        det: basis.determinant(),
        cond: f64::INFINITY,
    })?;
    Ok(DualLattice { basis, inv: binv })
}

fn lattice_point(basis: &DMatrix<f64>, coords: &[i64]) -> DVector<f64> {
    assert_eq!(basis.ncols(), coords.len(), "coordinate arity mismatch");
    let c = DVector::from_iterator(coords.len(), coords.iter().map(|&k| k as f64));
    basis * c
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_slice(v: &[i64]) -> i64 {
    v.iter().fold(0, |g, &x| gcd_i64(g, x))
}

/// Integer coordinate vectors n with |gens * n| <= radius, excluding zero.
/// `gens` may be a tall matrix (sublattice inside a higher-dimensional space).
fn integer_points_in_ball(gens: &DMatrix<f64>, radius: f64) -> Vec<Vec<i64>> {
    let k = gens.ncols();
    if k == 0 || radius <= 0.0 {
        return vec![];
    }
    // |n_i| = |row_i(pinv) . p| <= ||row_i(pinv)|| * radius.
    let gram = gens.transpose() * gens;
    let pinv = gram
        .try_inverse()
        .expect("sublattice generators must be independent")
        * gens.transpose();
    let bounds: Vec<i64> = (0..k)
        .map(|i| (pinv.row(i).norm() * radius + 1e-9).floor() as i64)
        .collect();
    let mut out = vec![];
    let mut coords = vec![0i64; k];
    enumerate_box(gens, &bounds, radius, 0, &mut coords, &mut out);
    out
}

fn enumerate_box(
    gens: &DMatrix<f64>,
    bounds: &[i64],
    radius: f64,
    axis: usize,
    coords: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if axis == bounds.len() {
        if coords.iter().all(|&c| c == 0) {
            return;
        }
        let p = lattice_point(gens, coords);
        if p.norm() <= radius * (1.0 + 1e-12) {
            out.push(coords.clone());
        }
        return;
    }
    for c in -bounds[axis]..=bounds[axis] {
        coords[axis] = c;
        enumerate_box(gens, bounds, radius, axis + 1, coords, out);
    }
    coords[axis] = 0;
}

/// Maximal (primitive) dual lattice elements with norm <= radius, sorted by
/// (norm, coordinates).  An element is maximal when its integer coordinates
/// have gcd 1, i.e. no shorter collinear lattice vector exists.
pub fn maximal_elements(dual: &DualLattice, radius: f64) -> Vec<Vec<i64>> {
    let mut pts: Vec<Vec<i64>> = integer_points_in_ball(dual.basis(), radius)
        .into_iter()
        .filter(|c| gcd_slice(c) == 1)
        .collect();
    pts.sort_by(|a, b| {
        let na = dual.point(a).norm();
        let nb = dual.point(b).norm();
        na.total_cmp(&nb).then_with(|| a.cmp(b))
    });
    pts
}

/// Decomposition p = beta + tau + (j + v) delta with beta in Gamma_delta,
/// tau in the centred cell F_delta, j integer, v in [0, 1).
#[derive(Debug, Clone)]
pub struct QuasiDecomp {
    pub beta: Vec<i64>,
    pub tau: DVector<f64>,
    pub j: i64,
    pub v: f64,
}

/// Directional data attached to a maximal dual element delta.
#[derive(Debug, Clone)]
pub struct GammaDelta {
    delta_coords: Vec<i64>,
    delta: DVector<f64>,
    delta_norm2: f64,
    /// Gamma_delta generators (columns, ambient, reduced).
    gens: DMatrix<f64>,
    /// Omega_delta generators paired so that (gens_i, dual_gens_j) = 2 pi delta_ij.
    dual_gens: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    /// Cell measure mu(F_delta) = sqrt(det gram).
    cell_measure: f64,
    /// Cell diameter d_delta of the centred fundamental domain.
    cell_diameter: f64,
}

impl GammaDelta {
    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn delta_coords(&self) -> &[i64] {
        &self.delta_coords
    }

    pub fn delta_norm2(&self) -> f64 {
        self.delta_norm2
    }

    pub fn gens(&self) -> &DMatrix<f64> {
        &self.gens
    }

    pub fn dual_gens(&self) -> &DMatrix<f64> {
        &self.dual_gens
    }

    pub fn rank(&self) -> usize {
        self.gens.ncols()
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn cell_diameter(&self) -> f64 {
        self.cell_diameter
    }

    /// Ambient point of integer Gamma_delta coordinates.
    pub fn point(&self, coords: &[i64]) -> DVector<f64> {
        lattice_point(&self.gens, coords)
    }

    /// Real Gamma_delta coordinates of a point (its projection onto H_delta).
    pub fn hyperplane_coords(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.gram_inv * (self.gens.transpose() * p)
    }

    /// Gamma_delta elements with 0 < norm < radius.
    pub fn elements_within(&self, radius: f64) -> Vec<Vec<i64>> {
        integer_points_in_ball(&self.gens, radius)
            .into_iter()
            .filter(|c| self.point(c).norm() < radius)
            .collect()
    }

    /// Splits p into beta + tau + (j + v) delta.  tau lands in the centred
    /// half-open cell (coordinates in [-1/2, 1/2)), v in [0, 1).
    pub fn decompose(&self, p: &DVector<f64>) -> QuasiDecomp {
        let c = p.dot(&self.delta) / self.delta_norm2;
        let mut j = c.floor() as i64;
        let mut v = c - j as f64;
        if v >= 1.0 {
            // Guards the c = integer - epsilon rounding edge.
            j += 1;
            v = 0.0;
        }
        let p_h = p - &self.delta * c;
        let y = self.hyperplane_coords(&p_h);
        let beta: Vec<i64> = y.iter().map(|&t| (t + 0.5).floor() as i64).collect();
        let frac = DVector::from_iterator(
            y.len(),
            y.iter().zip(&beta).map(|(&t, &b)| t - b as f64),
        );
        let tau = &self.gens * frac;
        QuasiDecomp { beta, tau, j, v }
    }

    /// Reassembles an ambient point from decomposition data.
    pub fn compose(&self, beta: &[i64], tau: &DVector<f64>, j: i64, v: f64) -> DVector<f64> {
        self.point(beta) + tau + &self.delta * ((j as f64 + v) / 1.0)
    }
}

/// Builds the directional sublattice pair for a maximal dual element.
///
/// Omega_delta is the integer kernel of n -> n . m_delta (extended-gcd column
/// reduction of a unimodular transform); Gamma_delta = 2 pi W (W^T W)^{-1}
/// where W are the Omega_delta generators.  Generators of rank <= 2 are
/// Lagrange-reduced, with the dual generators transformed contragradiently so
/// the 2 pi pairing is preserved.
pub fn gamma_delta(lat: &LatticeBasis, dual: &DualLattice, delta_coords: &[i64]) -> Result<GammaDelta> {
    let d = lat.dim();
    if delta_coords.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: delta_coords.len(),
        });
    }
    if delta_coords.iter().all(|&c| c == 0) {
        return Err(Error::ZeroDirection);
    }
    if gcd_slice(delta_coords) != 1 {
        return Err(Error::NotMaximal(format!("{delta_coords:?}")));
    }

    let kernel = integer_kernel(delta_coords);
    let mut w = lat.basis() * kernel.map(|x| x as f64);
    let gram_w = w.transpose() * &w;
    let mut gens = &w
        * gram_w
            .try_inverse()
            .expect("kernel generators are independent")
        * (2.0 * std::f64::consts::PI);

    reduce_pair(&mut gens, &mut w);

    let gram = gens.transpose() * &gens;
    let gram_inv = gram.clone().try_inverse().expect("reduced basis is independent");
    let cell_measure = gram.determinant().sqrt();
    let cell_diameter = cell_diameter(&gens);
    let delta = dual.point(delta_coords);
    let delta_norm2 = delta.norm_squared();

    Ok(GammaDelta {
        delta_coords: delta_coords.to_vec(),
        delta,
        delta_norm2,
        gens,
        dual_gens: w,
        gram_inv,
        cell_measure,
        cell_diameter,
    })
}

/// Integer basis of { n in Z^d : n . m = 0 } as columns of a d x (d-1) matrix.
fn integer_kernel(m: &[i64]) -> DMatrix<i64> {
    let d = m.len();
    // Column-reduce m^T U until a single nonzero entry (the gcd) remains;
    // the remaining columns of U span the kernel.
    let mut r: Vec<i64> = m.to_vec();
    let mut u = DMatrix::<i64>::identity(d, d);
    loop {
        let mut pivot = None;
        for (i, &x) in r.iter().enumerate() {
            if x != 0 && pivot.map_or(true, |p: usize| x.abs() < r[p].abs()) {
                pivot = Some(i);
            }
        }
        let p = pivot.expect("m is nonzero");
        let mut done = true;
        for i in 0..d {
            if i != p && r[i] != 0 {
                let q = r[i].div_euclid(r[p]);
                r[i] -= q * r[p];
                for row in 0..d {
                    let t = u[(row, p)];
                    u[(row, i)] -= q * t;
                }
                done = false;
            }
        }
        if done {
            let mut out = DMatrix::<i64>::zeros(d, d - 1);
            let mut k = 0;
            for i in 0..d {
                if i != p {
                    out.set_column(k, &u.column(i));
                    k += 1;
                }
            }
            return out;
        }
    }
}

/// Lagrange-reduces up to two generator columns in place, applying the
/// contragradient integer transform to the paired dual generators.
fn reduce_pair(gens: &mut DMatrix<f64>, duals: &mut DMatrix<f64>) {
    let k = gens.ncols();
    if k == 1 {
        return;
    }
    if k > 2 {
        // Rank > 2 only arises for dim > 3; the pairing is still valid,
        // the basis is just not reduced.
        return;
    }
    loop {
        if gens.column(0).norm_squared() > gens.column(1).norm_squared() {
            gens.swap_columns(0, 1);
            duals.swap_columns(0, 1);
        }
        let n0 = gens.column(0).norm_squared();
        let q = (gens.column(0).dot(&gens.column(1)) / n0).round();
        if q == 0.0 {
            break;
        }
        // g1 -= q g0  pairs with  w0 += q w1.
        let g0 = gens.column(0) * q;
        let mut g1 = gens.column_mut(1);
        g1 -= g0;
        let w1 = duals.column(1) * q;
        let mut w0 = duals.column_mut(0);
        w0 += w1;
    }
}

fn cell_diameter(gens: &DMatrix<f64>) -> f64 {
    // Diameter of { G c : c in [-1/2, 1/2)^k } is max over sign vectors of |G eps|.
    let k = gens.ncols();
    let mut best: f64 = 0.0;
    for mask in 0..(1u32 << k) {
        let eps = DVector::from_iterator(
            k,
            (0..k).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }),
        );
        best = best.max((gens * eps).norm());
    }
    best
}

/// Membership in the resonance slab V_b(r) = { x : |2 (x, b) + |b|^2| < r }.
pub fn in_v(x: &DVector<f64>, b: &DVector<f64>, r: f64) -> bool {
    (2.0 * x.dot(b) + b.norm_squared()).abs() < r
}

/// Asymptotic exponents and desk-scale window prefactors for offset selection.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionParams {
    pub dim: usize,
    pub rho: f64,
    pub alpha: f64,
    pub alpha_d: f64,
    pub a: f64,
    /// Annulus rho/2 + pad < |beta| < 3 rho/2 - pad; pad = cell diameter + 1.
    pub annulus: (f64, f64),
    /// Resonance-shell window: shell.0 * rho^a <= |2(beta,b)+|b|^2| < shell.1 * rho^a.
    pub shell: (f64, f64),
    /// Isolation from other directions: |2(beta,b')+|b'|^2| >= isolation * rho^{1/2}.
    pub isolation: f64,
    /// Transverse clearance |2(beta,b')+|b'|^2| >= transverse * rho^{a+2 alpha},
    /// b' not collinear with b (vacuous when Gamma_delta has rank 1).
    pub transverse: f64,
    /// Quasimomentum resonance clearance prefactor; threshold
    /// v_gap * d_delta * rho^{alpha_d}.  The asymptotic value 4 leaves no
    /// admissible offsets at desk scales, so the default is 1.
    pub v_gap: f64,
    /// Radius (in units of rho^{alpha_d}) for enumerating competing directions.
    pub direction_radius: f64,
}

impl SelectionParams {
    /// 1/(4 * 3^dim * (dim + 1)) and derived exponents, with desk-scale prefactors.
    pub fn paper(dim: usize, rho: f64) -> Self {
        let alpha = 1.0 / (4.0 * 3f64.powi(dim as i32) * (dim as f64 + 1.0));
        // alpha_k = 3^k alpha; the largest used exponent is k = dim.
        let alpha_d = alpha * 3f64.powi(dim as i32);
        let a = 1.0 - alpha_d + alpha;
        Self {
            dim,
            rho,
            alpha,
            alpha_d,
            a,
            annulus: (0.5, 1.5),
            shell: (1.0, 4.0),
            isolation: 1.0,
            transverse: 1.0,
            v_gap: 1.0,
            direction_radius: 1.0,
        }
    }

    pub fn alpha_k(&self, k: u32) -> f64 {
        self.alpha * 3f64.powi(k as i32)
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        let mut p = self.clone();
        p.rho = rho;
        p
    }
}

/// A selected quasimomentum offset with its per-predicate safety margins.
#[derive(Debug, Clone, Serialize)]
pub struct SelectedBeta {
    pub coords: Vec<i64>,
    pub norm: f64,
    /// (predicate, normalized margin); the score is the minimum margin.
    pub margins: Vec<(String, f64)>,
    pub score: f64,
    pub candidates_scanned: usize,
}

/// Picks the offset beta in Gamma_delta maximizing the minimum normalized
/// margin over the admissibility predicates (annulus, resonance shell,
/// isolation, transverse clearance, quasimomentum resonance clearance).
/// Ties break lexicographically on coordinates.
pub fn select_beta(
    gd: &GammaDelta,
    b_coords: &[i64],
    v: f64,
    params: &SelectionParams,
) -> Result<SelectedBeta> {
    if gcd_slice(b_coords) != 1 {
        return Err(Error::NotMaximal(format!("{b_coords:?}")));
    }
    let rho = params.rho;
    let b = gd.point(b_coords);
    let b2 = b.norm_squared();
    let pad = gd.cell_diameter() + 1.0;
    let annulus = (params.annulus.0 * rho + pad, params.annulus.1 * rho - pad);
    let shell_lo = params.shell.0 * rho.powf(params.a);
    let shell_hi = params.shell.1 * rho.powf(params.a);
    let iso_thr = params.isolation * rho.sqrt();
    let trans_thr = params.transverse * rho.powf(params.a + 2.0 * params.alpha);
    let vres_thr = params.v_gap * gd.cell_diameter() * rho.powf(params.alpha_d);
    let dir_radius = (params.direction_radius * rho.powf(params.alpha_d)).max(0.0);

    let directions = gd.elements_within(dir_radius);
    let b_ray = |c: &[i64]| -> bool {
        // Collinear with b iff c = t * b for rational t: cross-check via gcd pattern.
        let cb = gd.point(c);
        let cross = cb.norm_squared() * b2 - cb.dot(&b).powi(2);
        cross.abs() < 1e-9 * b2 * cb.norm_squared().max(1.0)
    };
    // Quasimomentum resonance levels |(j' + v) delta|^2 up to 4 rho^{1 + alpha_d}.
    let lvl_cap = 4.0 * rho.powf(1.0 + params.alpha_d);
    let n1 = ((lvl_cap.sqrt() / gd.delta_norm2().sqrt()) - v).floor() as i64;
    let levels: Vec<f64> = (-n1 - 3..=n1)
        .map(|jp| (jp as f64 + v).powi(2) * gd.delta_norm2())
        .collect();

    let mut rejections: std::collections::BTreeMap<&'static str, usize> = Default::default();
    let mut best: Option<SelectedBeta> = None;
    let candidates = gd.elements_within(annulus.1 + 1.0);
    let scanned = candidates.len();

    'cand: for coords in candidates {
        let beta = gd.point(&coords);
        let norm = beta.norm();
        let mut margins: Vec<(String, f64)> = vec![];
        let reject = |name: &'static str, rej: &mut std::collections::BTreeMap<&str, usize>| {
            *rej.entry(name).or_insert(0) += 1;
        };

        let m_ann = ((norm - annulus.0) / rho).min((annulus.1 - norm) / rho);
        if m_ann <= 0.0 {
            reject("annulus", &mut rejections);
            continue;
        }
        margins.push(("annulus".into(), m_ann));

        let s = (2.0 * beta.dot(&b) + b2).abs();
        let m_shell = ((s - shell_lo) / shell_lo).min((shell_hi - s) / shell_hi);
        if m_shell < 0.0 {
            reject("shell", &mut rejections);
            continue;
        }
        margins.push(("shell".into(), m_shell));

        let mut m_iso = f64::INFINITY;
        let mut m_trans = f64::INFINITY;
        let mut m_vres = f64::INFINITY;
        for c in &directions {
            let bp = gd.point(c);
            let q = 2.0 * beta.dot(&bp) + bp.norm_squared();
            m_iso = m_iso.min((q.abs() - iso_thr) / iso_thr);
            if !b_ray(c) {
                m_trans = m_trans.min((q.abs() - trans_thr) / trans_thr);
            }
            for &lvl in &levels {
                m_vres = m_vres.min(((q + lvl).abs() - vres_thr) / vres_thr);
            }
        }
        for (name, m) in [("isolation", m_iso), ("transverse", m_trans), ("v_gap", m_vres)] {
            if m < 0.0 {
                reject(name, &mut rejections);
                continue 'cand;
            }
            if m.is_finite() {
                margins.push((name.into(), m));
            }
        }

        let score = margins
            .iter()
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min);
        let better = match &best {
            None => true,
            Some(cur) => {
                score > cur.score || (score == cur.score && coords < cur.coords)
            }
        };
        if better {
            best = Some(SelectedBeta {
                coords,
                norm,
                margins,
                score,
                candidates_scanned: scanned,
            });
        }
    }

    best.ok_or_else(|| Error::NoAdmissibleBeta {
        rho,
        candidates: scanned,
        rejections: rejections
            .iter()
            .map(|(k, n)| format!("{k}: {n}"))
            .collect::<Vec<_>>()
            .join(", "),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cubic2() -> (LatticeBasis, DualLattice) {
        let lat = LatticeBasis::cubic(2.0 * PI, 2);
        let dual = dual_lattice(&lat).unwrap();
        (lat, dual)
    }

    #[test]
    fn cubic_dual_is_integer_lattice() {
        let (lat, dual) = cubic2();
        // (2 pi Z)^2 has dual Z^2.
        assert_abs_diff_eq!(dual.basis()[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dual.basis()[(1, 1)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dual.basis()[(0, 1)], 0.0, epsilon = 1e-14);
        for n in [[1i64, 0], [0, 1], [2, -3]] {
            for m in [[1i64, 0], [0, 1], [-1, 4]] {
                let ip = lat.point(&n).dot(&dual.point(&m));
                let expected = 2.0 * PI * (n[0] * m[0] + n[1] * m[1]) as f64;
                assert_abs_diff_eq!(ip, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hexagonal_dual_matches_closed_form() {
        // Generators (1, 0) and (1/2, sqrt(3)/2); dual generators
        // 2 pi (1, -1/sqrt(3)) and 2 pi (0, 2/sqrt(3)).
        let basis = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.5, 3f64.sqrt() / 2.0]);
        let lat = LatticeBasis::new(basis).unwrap();
        let dual = dual_lattice(&lat).unwrap();
        let g1 = dual.point(&[1, 0]);
        let g2 = dual.point(&[0, 1]);
        assert_abs_diff_eq!(g1[0], 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(g1[1], -2.0 * PI / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(g2[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g2[1], 4.0 * PI / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(g1.norm(), 4.0 * PI / 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn maximal_elements_match_bruteforce_gcd() {
        let (_, dual) = cubic2();
        let got = maximal_elements(&dual, 10.0);
        let mut expected = vec![];
        for i in -10i64..=10 {
            for j in -10i64..=10 {
                if (i, j) != (0, 0)
                    && gcd_i64(i, j) == 1
                    && ((i * i + j * j) as f64).sqrt() <= 10.0
                {
                    expected.push(vec![i, j]);
                }
            }
        }
        assert_eq!(got.len(), expected.len());
        let set: std::collections::HashSet<_> = got.iter().cloned().collect();
        for e in expected {
            assert!(set.contains(&e), "missing {e:?}");
        }
        // Sorted by norm.
        let norms: Vec<f64> = got.iter().map(|c| dual.point(c).norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn gamma_delta_diagonal_direction() {
        let (lat, dual) = cubic2();
        let gd = gamma_delta(&lat, &dual, &[1, 1]).unwrap();
        assert_eq!(gd.rank(), 1);
        let g = gd.point(&[1]);
        // Gamma_delta for delta = (1,1) in Z^2 is generated by (1,-1)/2.
        assert_abs_diff_eq!(g[0].abs(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1].abs(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0] + g[1], 0.0, epsilon = 1e-12);
        // Pairing with the Omega_delta generator is exactly 2 pi.
        let w = gd.dual_gens().column(0).into_owned();
        assert_abs_diff_eq!(g.dot(&w), 2.0 * PI, epsilon = 1e-9);
        // Orthogonality to delta and cell scalars.
        assert_abs_diff_eq!(g.dot(gd.delta()), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gd.cell_measure(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(gd.cell_diameter(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gamma_delta_rejects_non_maximal() {
        let (lat, dual) = cubic2();
        assert!(matches!(
            gamma_delta(&lat, &dual, &[2, 2]),
            Err(Error::NotMaximal(_))
        ));
        assert!(matches!(
            gamma_delta(&lat, &dual, &[0, 0]),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn decompose_round_trip() {
        let (lat, dual) = cubic2();
        for delta in [[0i64, 1], [1, 1], [2, 1], [3, -2]] {
            let gd = gamma_delta(&lat, &dual, &delta).unwrap();
            for (px, py) in [(0.3, -1.7), (5.25, 2.125), (-3.9, 0.01), (17.0, -9.5)] {
                let p = DVector::from_column_slice(&[px, py]);
                let d = gd.decompose(&p);
                assert!((0.0..1.0).contains(&d.v), "v = {} out of range", d.v);
                let tau_coords = gd.hyperplane_coords(&d.tau);
                for t in tau_coords.iter() {
                    assert!((-0.5..0.5).contains(t), "tau coord {t} outside cell");
                }
                let back = gd.compose(&d.beta, &d.tau, d.j, d.v);
                assert_abs_diff_eq!((back - &p).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn three_dimensional_kernel_and_pairing() {
        let lat = LatticeBasis::cubic(2.0 * PI, 3);
        let dual = dual_lattice(&lat).unwrap();
        let gd = gamma_delta(&lat, &dual, &[1, 2, 3]).unwrap();
        assert_eq!(gd.rank(), 2);
        for i in 0..2 {
            let g = gd.gens().column(i).into_owned();
            assert_abs_diff_eq!(g.dot(gd.delta()), 0.0, epsilon = 1e-10);
            for j in 0..2 {
                let w = gd.dual_gens().column(j).into_owned();
                let expected = if i == j { 2.0 * PI } else { 0.0 };
                assert_abs_diff_eq!(g.dot(&w), expected, epsilon = 1e-8);
            }
        }
        // Lagrange-reduced: |g1| <= |g2| and |(g1, g2)| <= |g1|^2 / 2.
        let g1 = gd.gens().column(0).into_owned();
        let g2 = gd.gens().column(1).into_owned();
        assert!(g1.norm_squared() <= g2.norm_squared() + 1e-12);
        assert!(g1.dot(&g2).abs() <= 0.5 * g1.norm_squared() + 1e-12);
    }

    #[test]
    fn select_beta_lands_in_expected_window() {
        let (lat, dual) = cubic2();
        let gd = gamma_delta(&lat, &dual, &[0, 1]).unwrap();
        let params = SelectionParams::paper(2, 20.0);
        let sel = select_beta(&gd, &[1], 0.3, &params).unwrap();
        // delta = (0,1) makes Gamma_delta = Z x {0}; the resonance shell at
        // rho = 20 pins |m| strictly between 10 and 30.
        let m = sel.coords[0];
        assert!(m.abs() > 10 && m.abs() < 30, "selected m = {m}");
        assert!(sel.score > 0.0);
        assert!(sel.margins.iter().all(|(_, v)| *v >= 0.0));
    }

    #[test]
    fn select_beta_reports_rejections_when_infeasible() {
        let (lat, dual) = cubic2();
        let gd = gamma_delta(&lat, &dual, &[0, 1]).unwrap();
        // rho small enough that the annulus and shell cannot both hold.
        let params = SelectionParams::paper(2, 0.5);
        match select_beta(&gd, &[1], 0.3, &params) {
            Err(Error::NoAdmissibleBeta { .. }) => {}
            other => panic!("expected NoAdmissibleBeta, got {other:?}"),
        }
    }

    #[test]
    fn paper_exponents_dim2() {
        let p = SelectionParams::paper(2, 8.0);
        assert_abs_diff_eq!(p.alpha, 1.0 / 108.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha_d, 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.a, 1.0 - 1.0 / 12.0 + 1.0 / 108.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha_k(1), 1.0 / 36.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha_k(2), 1.0 / 12.0, epsilon = 1e-15);
    }
}
