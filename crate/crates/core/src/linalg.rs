//! Dense complex linear algebra helpers shared by every module.
//!
//! Everything here is a thin layer over nalgebra: numerical rank with an
//! explicit singular-value gap, null spaces, eigenvalues and a few matrix
//! conveniences that nalgebra spells differently.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// `ab - ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Trace of a product without forming it.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Singular values (descending) of `m` together with a rank decision.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// `σ[rank-1] / σ[rank]`; infinite when either side of the cut is empty.
    pub gap_ratio: f64,
}

impl RankInfo {
    pub fn from_singular_values(mut sv: Vec<f64>, rel_tol: f64) -> Self {
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let smax = sv.first().copied().unwrap_or(0.0);
        if smax <= f64::MIN_POSITIVE {
            return Self {
                rank: 0,
                singular_values: sv,
                threshold: 0.0,
                gap_ratio: f64::INFINITY,
            };
        }
        let threshold = rel_tol * smax;
        let rank = sv.iter().filter(|&&s| s > threshold).count();
        let gap_ratio = if rank == 0 || rank == sv.len() {
            f64::INFINITY
        } else {
            sv[rank - 1] / sv[rank].max(f64::MIN_POSITIVE)
        };
        Self {
            rank,
            singular_values: sv,
            threshold,
            gap_ratio,
        }
    }

    pub fn smallest(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let sv = m.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Numerical rank: number of singular values above `rel_tol * σ_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> RankInfo {
    RankInfo::from_singular_values(singular_values(m), rel_tol)
}

pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the numerical null space of `m` (columns of V whose
/// singular value is at or below `rel_tol * σ_max`), plus the rank decision.
pub fn null_space(m: &CMatrix, rel_tol: f64) -> (Vec<CVector>, RankInfo) {
    let cols = m.ncols();
    // nalgebra returns a thin V for wide matrices; pad to square.
    let square = if m.nrows() < cols {
        let mut padded = CMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let info = RankInfo::from_singular_values(sv, rel_tol);
    let kernel = order[info.rank..]
        .iter()
        .map(|&i| v_t.row(i).adjoint().into_owned())
        .collect();
    (kernel, info)
}

pub fn inverse(m: &CMatrix, context: &'static str) -> crate::Result<CMatrix> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(crate::Error::Singular(context))?;
    if !is_finite(&inv) {
        return Err(crate::Error::Singular(context));
    }
    Ok(inv)
}

/// Rescales `g` by the principal n-th root of its determinant so that the
/// result has determinant one.
pub fn normalize_determinant(g: &CMatrix) -> CMatrix {
    let n = g.nrows() as f64;
    let det = g.determinant();
    if det.norm() == 0.0 {
        return g.clone();
    }
    let root = (det.ln() / n).exp();
    g / root
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if let Some(schur) = m.clone().try_schur(1e-15, 10_000) {
        let (_, t) = schur.unpack();
        return (0..n).map(|i| t[(i, i)]).collect();
    }
    // Fall back on the default iteration budget.
    let (_, t) = m.clone().schur().unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Unit vector spanning the (numerically one-dimensional) kernel of `m - λI`.
pub fn eigenvector(m: &CMatrix, lambda: C64) -> CVector {
    let n = m.nrows();
    let shifted = m - CMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty");
    v_t.row(imin).adjoint().into_owned()
}
