//! Matrix realization of `sl_n(C)` and `SL_n(C)`.
//!
//! The basis is Frobenius-orthonormal: the off-diagonal units `E_ij` followed
//! by `n - 1` real diagonal matrices. Coordinates are therefore Frobenius
//! inner products, and orthonormality of coordinate vectors is orthonormality
//! of matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    commutator, cr, eigenvalues, frobenius, inverse, normalize_determinant, null_space,
    numerical_rank, trace_of_product, CMatrix, CVector, C64,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    TraceForm,
    KillingForm,
}

impl FormKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "trace" | "trace_form" => Some(Self::TraceForm),
            "killing" | "killing_form" => Some(Self::KillingForm),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TraceForm => "trace_form",
            Self::KillingForm => "killing_form",
        }
    }
}

/// Named numerical thresholds. Every field can be overridden by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value threshold for numerical rank.
    pub rank: f64,
    /// Minimum accepted singular-value gap ratio at a rank cut.
    pub gap: f64,
    /// Relative distance under which eigenvalues are merged.
    pub cluster: f64,
    pub det: f64,
    pub trace: f64,
    pub cond_max: f64,
    pub jacobi: f64,
    pub invariance: f64,
    pub killing: f64,
    pub kostant: f64,
    pub agreement: f64,
    pub bracket: f64,
    pub moment: f64,
    pub isotropy: f64,
    pub antisymmetry: f64,
    pub nondegeneracy: f64,
    /// Residual of the linear solve defining Hamiltonian fields.
    pub field: f64,
    pub conjugator: f64,
    /// Relative defect of `exp(a + b) = exp(a) exp(b)` for commuting `a, b`.
    pub exp: f64,
    pub closedness: f64,
    pub fd: f64,
    pub conservation: f64,
    pub step_error: f64,
    /// Minimum pairwise eigenvalue gap of regular semisimple samples.
    pub gap_floor: f64,
    /// Required fraction of full-rank samples in independence sweeps.
    pub independence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-8,
            gap: 1e3,
            cluster: 1e-7,
            det: 1e-12,
            trace: 1e-10,
            cond_max: 1e12,
            jacobi: 1e-12,
            invariance: 1e-10,
            killing: 1e-9,
            kostant: 1e-10,
            agreement: 1e-8,
            bracket: 1e-8,
            moment: 1e-8,
            isotropy: 1e-9,
            antisymmetry: 1e-12,
            nondegeneracy: 1e-8,
            field: 1e-9,
            conjugator: 1e-7,
            exp: 1e-10,
            closedness: 1e-9,
            fd: 1e-6,
            conservation: 1e-6,
            step_error: 1e-6,
            gap_floor: 0.5,
            independence: 0.99,
        }
    }
}

impl Tolerances {
    pub const NAMES: &'static [&'static str] = &[
        "rank",
        "gap",
        "cluster",
        "det",
        "trace",
        "cond_max",
        "jacobi",
        "invariance",
        "killing",
        "kostant",
        "agreement",
        "bracket",
        "moment",
        "isotropy",
        "antisymmetry",
        "nondegeneracy",
        "field",
        "conjugator",
        "exp",
        "closedness",
        "fd",
        "conservation",
        "step_error",
        "gap_floor",
        "independence",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "rank" => &mut self.rank,
            "gap" => &mut self.gap,
            "cluster" => &mut self.cluster,
            "det" => &mut self.det,
            "trace" => &mut self.trace,
            "cond_max" => &mut self.cond_max,
            "jacobi" => &mut self.jacobi,
            "invariance" => &mut self.invariance,
            "killing" => &mut self.killing,
            "kostant" => &mut self.kostant,
            "agreement" => &mut self.agreement,
            "bracket" => &mut self.bracket,
            "moment" => &mut self.moment,
            "isotropy" => &mut self.isotropy,
            "antisymmetry" => &mut self.antisymmetry,
            "nondegeneracy" => &mut self.nondegeneracy,
            "field" => &mut self.field,
            "conjugator" => &mut self.conjugator,
            "exp" => &mut self.exp,
            "closedness" => &mut self.closedness,
            "fd" => &mut self.fd,
            "conservation" => &mut self.conservation,
            "step_error" => &mut self.step_error,
            "gap_floor" => &mut self.gap_floor,
            "independence" => &mut self.independence,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance {name} must be a positive finite number, got {value}"
            )));
        }
        let slot = self
            .slot(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown tolerance '{name}'")))?;
        *slot = value;
        Ok(())
    }
}

/// The ambient algebra `sl_n(C)` with a chosen invariant form.
#[derive(Debug, Clone)]
pub struct LieContext {
    pub n: usize,
    pub dim: usize,
    pub rank: usize,
    pub basis: Vec<CMatrix>,
    /// `dual_basis[a]` satisfies `pair(dual_basis[a], basis[b]) = δ_ab`.
    pub dual_basis: Vec<CMatrix>,
    pub form_kind: FormKind,
    pub degrees: Vec<usize>,
    pub tolerances: Tolerances,
    gram_inv: CMatrix,
    basis_ad: Vec<CMatrix>,
}

impl LieContext {
    pub fn new(n: usize, form_kind: FormKind) -> Result<Self> {
        Self::with_tolerances(n, form_kind, Tolerances::default())
    }

    pub fn with_tolerances(n: usize, form_kind: FormKind, tolerances: Tolerances) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
        }
        let dim = n * n - 1;
        let rank = n - 1;
        let mut basis = Vec::with_capacity(dim);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut e = CMatrix::zeros(n, n);
                    e[(i, j)] = cr(1.0);
                    basis.push(e);
                }
            }
        }
        for k in 1..n {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut h = CMatrix::zeros(n, n);
            for i in 0..k {
                h[(i, i)] = cr(1.0 / norm);
            }
            h[(k, k)] = cr(-(k as f64) / norm);
            basis.push(h);
        }

        let mut ctx = Self {
            n,
            dim,
            rank,
            basis,
            dual_basis: Vec::new(),
            form_kind,
            degrees: (2..=n).collect(),
            tolerances,
            gram_inv: CMatrix::zeros(0, 0),
            basis_ad: Vec::new(),
        };
        if form_kind == FormKind::KillingForm {
            ctx.basis_ad = ctx.basis.iter().map(|b| ctx.ad_matrix(b)).collect();
        }
        let gram = CMatrix::from_fn(dim, dim, |a, b| ctx.pair(&ctx.basis[a], &ctx.basis[b]));
        ctx.gram_inv = gram.try_inverse().ok_or(Error::SingularGram)?;
        if !crate::linalg::is_finite(&ctx.gram_inv) {
            return Err(Error::SingularGram);
        }
        ctx.dual_basis = (0..dim)
            .map(|a| ctx.from_coords(&ctx.gram_inv.column(a).into_owned()))
            .collect();
        Ok(ctx)
    }

    /// Factor relating the chosen form to the trace form.
    pub fn form_scale(&self) -> f64 {
        match self.form_kind {
            FormKind::TraceForm => 1.0,
            FormKind::KillingForm => 2.0 * self.n as f64,
        }
    }

    /// Frobenius coordinates in `basis`; the trace part of `x` is dropped.
    pub fn coords(&self, x: &CMatrix) -> CVector {
        let n = self.n;
        let mut c = CVector::zeros(self.dim);
        let mut a = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[a] = x[(i, j)];
                    a += 1;
                }
            }
        }
        for (k, b) in self.basis[a..].iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += b[(i, i)] * x[(i, i)];
            }
            c[a + k] = acc;
        }
        c
    }

    pub fn from_coords(&self, c: &CVector) -> CMatrix {
        let mut x = CMatrix::zeros(self.n, self.n);
        for (b, &ca) in self.basis.iter().zip(c.iter()) {
            if ca != C64::new(0.0, 0.0) {
                x += b * ca;
            }
        }
        x
    }

    /// Matrix of `y ↦ [x, y]` in `basis`.
    pub fn ad_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (a, b) in self.basis.iter().enumerate() {
            m.set_column(a, &self.coords(&commutator(x, b)));
        }
        m
    }

    /// The invariant form: `tr(xy)` or `tr(ad_x ad_y)`.
    pub fn pair(&self, x: &CMatrix, y: &CMatrix) -> C64 {
        match self.form_kind {
            FormKind::TraceForm => trace_of_product(x, y),
            FormKind::KillingForm => trace_of_product(&self.ad_matrix(x), &self.ad_matrix(y)),
        }
    }

    pub fn trace_pair(&self, x: &CMatrix, y: &CMatrix) -> C64 {
        trace_of_product(x, y)
    }

    pub fn killing_pair(&self, x: &CMatrix, y: &CMatrix) -> C64 {
        trace_of_product(&self.ad_matrix(x), &self.ad_matrix(y))
    }

    /// `x ↦ pair(x, ·)` as a covector on `basis`.
    pub fn flat(&self, x: &CMatrix) -> CVector {
        match self.form_kind {
            FormKind::TraceForm => {
                CVector::from_iterator(self.dim, self.basis.iter().map(|b| trace_of_product(x, b)))
            }
            FormKind::KillingForm => {
                let ad_x = self.ad_matrix(x);
                CVector::from_iterator(
                    self.dim,
                    self.basis_ad.iter().map(|ad_b| trace_of_product(&ad_x, ad_b)),
                )
            }
        }
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn sharp(&self, alpha: &CVector) -> Result<CMatrix> {
        if alpha.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: alpha.len(),
            });
        }
        Ok(self.from_coords(&(&self.gram_inv * alpha)))
    }

    pub fn check_size(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != self.n || x.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.nrows().max(x.ncols()),
            });
        }
        Ok(())
    }

    /// Checks finiteness, size and tracelessness of an algebra element.
    pub fn check_algebra_element(&self, x: &CMatrix) -> Result<()> {
        self.check_size(x)?;
        if !crate::linalg::is_finite(x) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let tr = x.trace().norm();
        if tr > self.tolerances.trace * frobenius(x).max(1.0) {
            return Err(Error::InvalidInput(format!(
                "matrix is not traceless (|trace| = {tr:.3e})"
            )));
        }
        Ok(())
    }

    pub fn check_group_element(&self, g: &CMatrix) -> Result<()> {
        self.check_size(g)?;
        let det = g.determinant();
        if (det - cr(1.0)).norm() > self.tolerances.det.max(1e-10) {
            return Err(Error::InvalidInput(format!(
                "group element has determinant {det} (expected 1)"
            )));
        }
        Ok(())
    }
}

/// `ab - ba` with a size check.
pub fn bracket(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(commutator(a, b))
}

/// Matrix exponential renormalized to determinant one.
/// Non-finite input yields a NaN matrix instead of entering the series.
pub fn group_exp(y: &CMatrix) -> CMatrix {
    if !crate::linalg::is_finite(y) {
        return CMatrix::from_element(y.nrows(), y.ncols(), C64::new(f64::NAN, f64::NAN));
    }
    normalize_determinant(&y.clone().exp())
}

/// `g x g⁻¹`.
pub fn adjoint_action(g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let g_inv = inverse(g, "group element in adjoint action")?;
    Ok(g * x * g_inv)
}

/// `g⁻¹ x g`.
pub fn adjoint_action_inv(g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let g_inv = inverse(g, "group element in adjoint action")?;
    Ok(g_inv * x * g)
}

#[derive(Debug, Clone, Serialize)]
pub struct CentralizerBasis {
    #[serde(with = "crate::json::matrix")]
    pub base_point: CMatrix,
    #[serde(with = "crate::json::matrix_list")]
    pub vectors: Vec<CMatrix>,
    pub tol_used: f64,
    #[serde(skip)]
    pub singular_values: Vec<f64>,
}

impl CentralizerBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// Frobenius-orthonormal basis of `Z(x)`, the numerical kernel of `ad_x`.
pub fn centralizer(ctx: &LieContext, x: &CMatrix, tol: f64) -> Result<CentralizerBasis> {
    ctx.check_size(x)?;
    let ad = ctx.ad_matrix(x);
    let (kernel, info) = null_space(&ad, tol);
    if info.gap_ratio < ctx.tolerances.gap {
        return Err(Error::AmbiguousKernel {
            ratio: info.gap_ratio,
            required: ctx.tolerances.gap,
        });
    }
    if kernel.len() < ctx.rank {
        return Err(Error::Numerical(format!(
            "centralizer dimension {} below rank {}",
            kernel.len(),
            ctx.rank
        )));
    }
    Ok(CentralizerBasis {
        base_point: x.clone(),
        vectors: kernel.iter().map(|v| ctx.from_coords(v)).collect(),
        tol_used: tol,
        singular_values: info.singular_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semisimplicity {
    Semisimple,
    NotSemisimple,
    Uncertain,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub is_regular: bool,
    pub semisimplicity: Semisimplicity,
    pub is_nilpotent: bool,
    pub centralizer_dim: usize,
}

impl Classification {
    pub fn is_semisimple(&self) -> Option<bool> {
        match self.semisimplicity {
            Semisimplicity::Semisimple => Some(true),
            Semisimplicity::NotSemisimple => Some(false),
            Semisimplicity::Uncertain => None,
        }
    }

    pub fn is_regular_semisimple(&self) -> bool {
        self.is_regular && self.semisimplicity == Semisimplicity::Semisimple
    }
}

/// Regularity from the centralizer dimension; semisimplicity from eigenvalue
/// clusters, each of which must have a full eigenspace.
pub fn classify(ctx: &LieContext, x: &CMatrix, tol: f64) -> Result<Classification> {
    let cz = centralizer(ctx, x, tol)?;
    let (semisimplicity, is_nilpotent) = semisimplicity(ctx, x, tol);
    Ok(Classification {
        is_regular: cz.dim() == ctx.rank,
        semisimplicity,
        is_nilpotent,
        centralizer_dim: cz.dim(),
    })
}

pub fn is_nilpotent(x: &CMatrix) -> bool {
    let n = x.nrows();
    let norm = frobenius(x);
    if norm == 0.0 {
        return true;
    }
    let mut p = x.clone();
    for _ in 1..n {
        p = &p * x;
    }
    frobenius(&p) <= 1e-10 * norm.powi(n as i32)
}

fn semisimplicity(ctx: &LieContext, x: &CMatrix, rank_tol: f64) -> (Semisimplicity, bool) {
    let n = ctx.n;
    if is_nilpotent(x) {
        let zero = numerical_rank(x, rank_tol).rank == 0 || frobenius(x) < 1e-300;
        let s = if zero {
            Semisimplicity::Semisimple
        } else {
            Semisimplicity::NotSemisimple
        };
        return (s, true);
    }
    let scale = frobenius(x).max(1.0);
    let merge = ctx.tolerances.cluster * scale;
    let ambiguous = ctx.tolerances.cluster.sqrt() * scale;
    let eig = eigenvalues(x);

    // single-linkage clustering
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (eig[i] - eig[j]).norm() <= merge {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    for l in label.iter_mut() {
                        if *l == b {
                            *l = a;
                        }
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if label[i] != label[j] && (eig[i] - eig[j]).norm() <= ambiguous {
                return (Semisimplicity::Uncertain, false);
            }
        }
    }
    let mut clusters: Vec<usize> = label.clone();
    clusters.sort_unstable();
    clusters.dedup();
    for c in clusters {
        let members: Vec<usize> = (0..n).filter(|&i| label[i] == c).collect();
        let m = members.len();
        let lambda = members.iter().map(|&i| eig[i]).sum::<C64>() / cr(m as f64);
        let shifted = x - CMatrix::identity(n, n) * lambda;
        // Measure rank against the scale of x, not of the shifted matrix.
        let mut sv = crate::linalg::singular_values(&shifted);
        sv.push(scale);
        let info = crate::linalg::RankInfo::from_singular_values(sv, rank_tol);
        let rank = info.rank - 1;
        if rank != n - m {
            return (Semisimplicity::NotSemisimple, false);
        }
    }
    (Semisimplicity::Semisimple, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Generic,
    RegularSemisimple,
    Group,
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Deterministic sample of the requested kind.
pub fn sample(ctx: &LieContext, seed: u64, kind: SampleKind) -> CMatrix {
    let mut rng = rng_from_seed(seed);
    sample_with(ctx, &mut rng, kind)
}

pub fn sample_with<R: Rng + ?Sized>(ctx: &LieContext, rng: &mut R, kind: SampleKind) -> CMatrix {
    match kind {
        SampleKind::Generic => sample_generic(ctx.n, rng),
        SampleKind::RegularSemisimple => sample_regular_semisimple(ctx, rng),
        SampleKind::Group => sample_group(ctx.n, rng, 1.0),
    }
}

/// Traceless matrix with unit-variance complex Gaussian entries.
pub fn sample_generic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut x = CMatrix::from_fn(n, n, |_, _| gaussian_complex(rng));
    let shift = x.trace() / cr(n as f64);
    for i in 0..n {
        x[(i, i)] -= shift;
    }
    x
}

/// `group_exp(y)` with `‖y‖_F` uniform in `[0, radius]`.
pub fn sample_group<R: Rng + ?Sized>(n: usize, rng: &mut R, radius: f64) -> CMatrix {
    let y = sample_generic(n, rng);
    let norm = frobenius(&y);
    let target: f64 = rng.random::<f64>() * radius;
    let y = if norm > 0.0 { y * cr(target / norm) } else { y };
    group_exp(&y)
}

/// Pairwise eigenvalue gaps at least `gap_floor`, conjugated by a bounded
/// random group element.
pub fn sample_regular_semisimple<R: Rng + ?Sized>(ctx: &LieContext, rng: &mut R) -> CMatrix {
    let n = ctx.n;
    let floor = ctx.tolerances.gap_floor;
    let radius = floor * n as f64;
    let mut eig: Vec<C64> = Vec::with_capacity(n);
    while eig.len() < n {
        let r = radius * rng.random::<f64>().sqrt();
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let z = C64::from_polar(r, phase);
        if eig.iter().all(|w| (w - z).norm() >= floor) {
            eig.push(z);
        }
    }
    let mean = eig.iter().sum::<C64>() / cr(n as f64);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(n, eig.iter().map(|z| z - mean)));
    let g = sample_group(n, rng, 1.0);
    let g_inv = inverse(&g, "sample conjugator").expect("exp is invertible");
    &g * d * g_inv
}
