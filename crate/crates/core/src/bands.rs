//! Plane-wave Galerkin computation of band functions Lambda_N(t) of
//! -Delta + q at fixed quasimomentum t.
//!
//! The basis is a set of dual-lattice translates gamma with gamma + t inside
//! either a ball or an energy shell.  The shell form keeps the basis size
//! bounded as |t| grows: modes with | |gamma+t|^2 - E* | <= width plus an
//! optional low-energy core.

use crate::error::{Error, Result};
use crate::lattice::DualLattice;
use crate::linalg::{hermitian_eig, EigPairs};
use crate::potential::FourierPotential;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Plane-wave truncation window.
#[derive(Debug, Clone)]
pub enum BasisSpec {
    /// |gamma + t| <= radius.
    Ball { radius: f64 },
    /// | |gamma+t|^2 - center | <= width, plus all |gamma + t| <= core_radius.
    Shell {
        center: f64,
        width: f64,
        core_radius: f64,
    },
    /// Shell plus the coupling slab: modes whose projection orthogonal to
    /// `axis` stays within `slab_radius` of `anchor` are kept out to the
    /// wider energy window.  Off-shell modes reachable from the anchor by
    /// small hyperplane hops carry first-order weight even though their
    /// detuning grows with the anchor norm; a symmetric shell wide enough
    /// to hold them would be an order of magnitude larger.
    ShellSlab {
        center: f64,
        width: f64,
        wide: f64,
        core_radius: f64,
        anchor: DVector<f64>,
        axis: DVector<f64>,
        slab_radius: f64,
    },
}

impl BasisSpec {
    fn r_max(&self) -> f64 {
        match self {
            BasisSpec::Ball { radius } => *radius,
            BasisSpec::Shell { center, width, core_radius } => {
                (center + width).max(core_radius * core_radius).max(0.0).sqrt()
            }
            BasisSpec::ShellSlab { center, wide, core_radius, .. } => {
                (center + wide).max(core_radius * core_radius).max(0.0).sqrt()
            }
        }
    }

    fn keeps(&self, p: &DVector<f64>) -> bool {
        let e2 = p.norm_squared();
        match self {
            BasisSpec::Ball { radius } => e2.sqrt() <= *radius * (1.0 + 1e-12),
            BasisSpec::Shell { center, width, core_radius } => {
                (e2 - center).abs() <= *width || e2.sqrt() <= *core_radius
            }
            BasisSpec::ShellSlab {
                center,
                width,
                wide,
                core_radius,
                anchor,
                axis,
                slab_radius,
            } => {
                if (e2 - center).abs() <= *width || e2.sqrt() <= *core_radius {
                    return true;
                }
                if (e2 - center).abs() > *wide {
                    return false;
                }
                let proj = p - axis * (p.dot(axis) / axis.norm_squared());
                (&proj - anchor).norm() <= *slab_radius
            }
        }
    }
}

/// Ordered plane-wave basis at quasimomentum t.
#[derive(Debug, Clone)]
pub struct PlaneWaveBasis {
    pub t: DVector<f64>,
    /// Dual-lattice coordinates of each basis mode, sorted by |gamma+t|^2.
    pub coords: Vec<Vec<i64>>,
    /// gamma + t for each mode.
    pub points: Vec<DVector<f64>>,
}

impl PlaneWaveBasis {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn free_energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.norm_squared()).collect()
    }
}

/// Enumerates the basis for `spec`, sorted by free energy then coordinates.
pub fn build_basis(
    dual: &DualLattice,
    t: &DVector<f64>,
    spec: &BasisSpec,
    cap: usize,
) -> Result<PlaneWaveBasis> {
    let r_max = spec.r_max();
    if r_max <= 0.0 {
        return Err(Error::Invalid("empty truncation window".into()));
    }
    let d = dual.dim();
    let inv_t = dual.coords_of(t);
    // Rows of B^{-1}, assembled by applying it to the standard basis.
    let mut inv_cols = vec![];
    for k in 0..d {
        let ek = DVector::from_fn(d, |r, _| if r == k { 1.0 } else { 0.0 });
        inv_cols.push(dual.coords_of(&ek));
    }
    // Per-axis integer bounds from |gamma + t| <= r_max:
    // coords_i(gamma) = row_i(B^{-1}) (gamma + t) - coords_i(t).
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    for i in 0..d {
        let row_norm = (0..d).map(|k| inv_cols[k][i].powi(2)).sum::<f64>().sqrt();
        let c = -inv_t[i];
        let r = row_norm * r_max + 1e-9;
        lo[i] = (c - r).floor() as i64;
        hi[i] = (c + r).ceil() as i64;
    }
    let mut coords = vec![];
    let mut points = vec![];
    let mut idx = vec![0i64; d];
    collect_modes(dual, t, &lo, &hi, 0, &mut idx, &mut |c: &[i64], p: DVector<f64>| {
        if spec.keeps(&p) {
            coords.push(c.to_vec());
            points.push(p);
        }
    });
    if coords.len() > cap {
        return Err(Error::BasisTooLarge {
            size: coords.len(),
            cap,
        });
    }
    if coords.is_empty() {
        return Err(Error::Invalid("truncation window contains no modes".into()));
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .norm_squared()
            .total_cmp(&points[b].norm_squared())
            .then_with(|| coords[a].cmp(&coords[b]))
    });
    Ok(PlaneWaveBasis {
        t: t.clone(),
        coords: order.iter().map(|&i| coords[i].clone()).collect(),
        points: order.iter().map(|&i| points[i].clone()).collect(),
    })
}

fn collect_modes(
    dual: &DualLattice,
    t: &DVector<f64>,
    lo: &[i64],
    hi: &[i64],
    axis: usize,
    idx: &mut Vec<i64>,
    f: &mut impl FnMut(&[i64], DVector<f64>),
) {
    if axis == lo.len() {
        let p = dual.point(idx) + t;
        f(idx, p);
        return;
    }
    for c in lo[axis]..=hi[axis] {
        idx[axis] = c;
        collect_modes(dual, t, lo, hi, axis + 1, idx, f);
    }
}

/// Band spectrum at fixed quasimomentum: eigenpairs of the truncated
/// operator, ascending.
#[derive(Debug, Clone)]
pub struct BandSpectrum {
    pub basis: PlaneWaveBasis,
    pairs: EigPairs,
    support_radius: f64,
    spec: BasisSpec,
}

/// A band eigenvalue located near a target, with its isolation gap.
#[derive(Debug, Clone, Copy)]
pub struct MatchedEigenvalue {
    pub index: usize,
    pub value: f64,
    /// Distance to the nearest other eigenvalue.
    pub gap: f64,
}

pub fn assemble_and_solve(
    q: &FourierPotential,
    dual: &DualLattice,
    t: &DVector<f64>,
    spec: &BasisSpec,
    cap: usize,
) -> Result<BandSpectrum> {
    let basis = build_basis(dual, t, spec, cap)?;
    Ok(solve_on_basis(q, dual, basis, spec.clone()))
}

/// Solves on a caller-fixed mode set; used for frozen-basis derivative checks.
pub fn solve_with_coords(
    q: &FourierPotential,
    dual: &DualLattice,
    t: &DVector<f64>,
    coords: &[Vec<i64>],
) -> BandSpectrum {
    let points: Vec<DVector<f64>> = coords.iter().map(|c| dual.point(c) + t).collect();
    let r = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let basis = PlaneWaveBasis {
        t: t.clone(),
        coords: coords.to_vec(),
        points,
    };
    solve_on_basis(q, dual, basis, BasisSpec::Ball { radius: r })
}

fn solve_on_basis(
    q: &FourierPotential,
    dual: &DualLattice,
    basis: PlaneWaveBasis,
    spec: BasisSpec,
) -> BandSpectrum {
    let n = basis.len();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        h[(a, a)] = Complex64::new(basis.points[a].norm_squared(), 0.0);
        for b in 0..n {
            if a != b {
                let diff: Vec<i64> = basis.coords[a]
                    .iter()
                    .zip(&basis.coords[b])
                    .map(|(&x, &y)| x - y)
                    .collect();
                h[(a, b)] += q.coeff(&diff);
            }
        }
    }
    let pairs = hermitian_eig(&h);
    BandSpectrum {
        basis,
        pairs,
        support_radius: q.support_radius(dual),
        spec,
    }
}

impl BandSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.pairs.values
    }

    pub fn vector(&self, index: usize) -> &DVector<Complex64> {
        &self.pairs.vectors[index]
    }

    /// Whether an eigenvalue sits deep enough inside the truncation window
    /// that its coupling neighbourhood is fully represented.
    pub fn trusted(&self, value: f64) -> bool {
        let rq = self.support_radius;
        match &self.spec {
            BasisSpec::Ball { radius } => {
                let r = radius - rq - 0.5;
                r > 0.0 && value <= r * r
            }
            BasisSpec::Shell { center, width, core_radius }
            | BasisSpec::ShellSlab { center, width, core_radius, .. } => {
                let in_shell = (value - center).abs() <= width * 0.5;
                let core = core_radius - rq - 0.5;
                in_shell || (core > 0.0 && value <= core * core)
            }
        }
    }

    /// Nearest eigenvalue to `target` within `tol`.
    pub fn match_eigenvalue(&self, target: f64, tol: f64) -> Result<MatchedEigenvalue> {
        let vals = &self.pairs.values;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &v) in vals.iter().enumerate() {
            let d = (v - target).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > tol {
            return Err(Error::NoMatch {
                target,
                tol,
                nearest: vals[best],
            });
        }
        Ok(MatchedEigenvalue {
            index: best,
            value: vals[best],
            gap: self.gap(best),
        })
    }

    /// Distance from eigenvalue `index` to its nearest neighbour.
    pub fn gap(&self, index: usize) -> f64 {
        let vals = &self.pairs.values;
        let mut g = f64::INFINITY;
        if index > 0 {
            g = g.min(vals[index] - vals[index - 1]);
        }
        if index + 1 < vals.len() {
            g = g.min(vals[index + 1] - vals[index]);
        }
        g
    }

    /// Directional derivative of Lambda_index along the unit vector h by the
    /// Hellmann-Feynman formula on the frozen basis:
    /// dLambda/dh = 2 sum_gamma (gamma + t, h) |c_gamma|^2.
    /// Requires the eigenvalue to be simple: gap > gap_min.
    pub fn derivative(&self, index: usize, h: &DVector<f64>, gap_min: f64) -> Result<f64> {
        let gap = self.gap(index);
        if gap <= gap_min {
            return Err(Error::NotSimple {
                value: self.pairs.values[index],
                gap,
                gap_min,
            });
        }
        let c = &self.pairs.vectors[index];
        Ok(2.0
            * self
                .basis
                .points
                .iter()
                .zip(c.iter())
                .map(|(p, z)| p.dot(h) * z.norm_sqr())
                .sum::<f64>())
    }
}
