use thiserror::Error;

/// Errors shared across the lattice / band / extraction layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular lattice basis (|det| = {det:.3e}, condition ~ {cond:.3e})")]
    SingularBasis { det: f64, cond: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} must be a maximal lattice element (integer coordinates with gcd 1)")]
    NotMaximal(String),

    #[error("direction has zero coordinates")]
    ZeroDirection,

    #[error("basis size {size} exceeds cap {cap}; shrink the window or raise the cap")]
    BasisTooLarge { size: usize, cap: usize },

    #[error(
        "no admissible quasimomentum offset at rho = {rho}: {candidates} candidates scanned, \
         rejections by predicate: {rejections}"
    )]
    NoAdmissibleBeta {
        rho: f64,
        candidates: usize,
        rejections: String,
    },

    #[error("no eigenvalue within {tol:.3e} of target {target:.6}; nearest at {nearest:.6}")]
    NoMatch { target: f64, tol: f64, nearest: f64 },

    #[error("eigenvalue {value:.6} is not simple (neighbour gap {gap:.3e} < {gap_min:.3e})")]
    NotSimple { value: f64, gap: f64, gap_min: f64 },

    #[error("no labelled eigenpair for index {j} (basis n_max = {n_max}; enlarge it)")]
    MissingLabel { j: i64, n_max: i64 },

    #[error("label collision near index {j}; enlarge the basis (n_max = {n_max})")]
    LabelCollision { j: i64, n_max: i64 },

    #[error("empty acceptance set at level {level} (rho = {rho}): {detail}")]
    EmptyAcceptance { level: usize, rho: f64, detail: String },

    #[error("fit is ill-conditioned (condition ~ {cond:.3e}): {context}")]
    IllConditionedFit { cond: f64, context: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
