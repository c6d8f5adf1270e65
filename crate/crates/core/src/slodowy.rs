//! The principal sl₂-triple, the slice `ξ + Z(η)`, power-trace invariants and
//! the Kostant-section solver.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::lie::{classify, rng_from_seed, LieContext, Semisimplicity};
use crate::linalg::{
    commutator, condition_number, cr, eigenvalues, eigenvector, frobenius, inverse,
    normalize_determinant, numerical_rank, trace_of_product, CMatrix, CVector, C64,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct SL2Triple {
    #[serde(with = "crate::json::matrix")]
    pub xi: CMatrix,
    #[serde(with = "crate::json::matrix")]
    pub h: CMatrix,
    #[serde(with = "crate::json::matrix")]
    pub eta: CMatrix,
}

impl SL2Triple {
    /// Largest of the three bracket-relation residuals.
    pub fn relation_residual(&self) -> f64 {
        let r1 = frobenius(&(commutator(&self.xi, &self.eta) - &self.h));
        let r2 = frobenius(&(commutator(&self.h, &self.xi) - &self.xi * cr(2.0)));
        let r3 = frobenius(&(commutator(&self.h, &self.eta) + &self.eta * cr(2.0)));
        r1.max(r2).max(r3)
    }
}

/// `ξ = Σ E_{i,i+1}`, `h = diag(n-1, n-3, …)`, `η = Σ i(n-i) E_{i+1,i}`.
pub fn principal_triple(ctx: &LieContext) -> SL2Triple {
    let n = ctx.n;
    let mut xi = CMatrix::zeros(n, n);
    let mut eta = CMatrix::zeros(n, n);
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = cr((n as f64 - 1.0) - 2.0 * i as f64);
    }
    for i in 1..n {
        xi[(i - 1, i)] = cr(1.0);
        eta[(i, i - 1)] = cr((i * (n - i)) as f64);
    }
    SL2Triple { xi, h, eta }
}

/// The affine slice `ξ + span{η, η², …, η^{n-1}}`.
#[derive(Debug, Clone, Serialize)]
pub struct SlodowySlice {
    pub triple: SL2Triple,
    #[serde(with = "crate::json::matrix_list")]
    pub basis: Vec<CMatrix>,
}

impl SlodowySlice {
    pub fn new(ctx: &LieContext, triple: SL2Triple) -> Result<Self> {
        let mut basis = Vec::with_capacity(ctx.rank);
        let mut p = triple.eta.clone();
        for _ in 0..ctx.rank {
            basis.push(p.clone());
            p = &p * &triple.eta;
        }
        let stacked = CMatrix::from_fn(ctx.dim, ctx.rank, |a, k| ctx.coords(&basis[k])[a]);
        let info = numerical_rank(&stacked, ctx.tolerances.rank);
        if info.rank != ctx.rank {
            return Err(Error::Numerical(format!(
                "slice basis has rank {} (expected {})",
                info.rank, ctx.rank
            )));
        }
        Ok(Self { triple, basis })
    }

    pub fn principal(ctx: &LieContext) -> Result<Self> {
        Self::new(ctx, principal_triple(ctx))
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn point(&self, c: &CVector) -> CMatrix {
        &self.triple.xi + self.tangent(c)
    }

    /// `Σ z_k η^k`.
    pub fn tangent(&self, z: &CVector) -> CMatrix {
        let n = self.triple.xi.nrows();
        let mut m = CMatrix::zeros(n, n);
        for (b, &zk) in self.basis.iter().zip(z.iter()) {
            m += b * zk;
        }
        m
    }

    /// Coordinates of a slice point, read off the first column: `η^k` is
    /// supported on the k-th subdiagonal.
    pub fn coords_of(&self, x: &CMatrix) -> CVector {
        let d = x - &self.triple.xi;
        CVector::from_iterator(
            self.rank(),
            (0..self.rank()).map(|k| d[(k + 1, 0)] / self.basis[k][(k + 1, 0)]),
        )
    }

    /// Distance from `x` to the slice point with the coordinates read off `x`.
    pub fn membership_residual(&self, x: &CMatrix) -> f64 {
        frobenius(&(x - self.point(&self.coords_of(x))))
    }
}

/// Power traces `f_k(x) = tr(x^{k+2})` for `k = 0..rank`, so `f_k` has degree
/// `k + 2`. Gradients are taken with respect to the context's form.
#[derive(Debug, Clone)]
pub struct InvariantSet {
    pub n: usize,
    pub rank: usize,
    form_scale: f64,
    /// Chebyshev nodes and inverse Vandermonde matrices, indexed by `k`.
    nodes: Vec<Vec<f64>>,
    vander_inv: Vec<DMatrix<f64>>,
}

pub const VANDERMONDE_COND_LIMIT: f64 = 1e6;

impl InvariantSet {
    pub fn new(ctx: &LieContext) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut vander_inv = Vec::new();
        for k in 0..ctx.rank {
            let m = k + 3;
            let t: Vec<f64> = (0..m)
                .map(|l| ((2 * l + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
                .collect();
            let v = DMatrix::from_fn(m, m, |r, c| t[r].powi(c as i32));
            let sv = v.clone().svd(false, false).singular_values;
            let cond = sv.max() / sv.min();
            if !(cond < VANDERMONDE_COND_LIMIT) {
                return Err(Error::IllConditioned {
                    what: "Chebyshev Vandermonde system",
                    cond,
                    limit: VANDERMONDE_COND_LIMIT,
                });
            }
            vander_inv.push(v.try_inverse().ok_or(Error::Singular("Vandermonde system"))?);
            nodes.push(t);
        }
        Ok(Self {
            n: ctx.n,
            rank: ctx.rank,
            form_scale: ctx.form_scale(),
            nodes,
            vander_inv,
        })
    }

    pub fn degree(&self, k: usize) -> usize {
        k + 2
    }

    pub fn label(&self, k: usize) -> String {
        format!("tr(x^{})", k + 2)
    }

    pub fn value(&self, k: usize, x: &CMatrix) -> C64 {
        let p = matrix_power(x, k + 1);
        trace_of_product(&p, x)
    }

    pub fn values(&self, x: &CMatrix) -> CVector {
        let mut out = CVector::zeros(self.rank);
        let mut p = x.clone();
        for k in 0..self.rank {
            out[k] = trace_of_product(&p, x);
            p = &p * x;
        }
        out
    }

    /// `(k+2)(x^{k+1} - tr(x^{k+1})/n · I)`, divided by the form scale.
    pub fn gradient(&self, k: usize, x: &CMatrix) -> CMatrix {
        let p = matrix_power(x, k + 1);
        self.gradient_from_power(k, p)
    }

    pub fn gradients(&self, x: &CMatrix) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.rank);
        let mut p = x.clone();
        for k in 0..self.rank {
            out.push(self.gradient_from_power(k, p.clone()));
            p = &p * x;
        }
        out
    }

    fn gradient_from_power(&self, k: usize, mut p: CMatrix) -> CMatrix {
        let shift = p.trace() / cr(self.n as f64);
        for i in 0..self.n {
            p[(i, i)] -= shift;
        }
        p * cr((k + 2) as f64 / self.form_scale)
    }

    /// `j!` times the coefficient of `t^j` in `f_k(x + tβ)`, with its
    /// gradient in `x`. Both are interpolated exactly from Chebyshev nodes.
    pub fn directional_derivative(
        &self,
        k: usize,
        beta: &CMatrix,
        j: usize,
        x: &CMatrix,
    ) -> Result<(C64, CMatrix)> {
        if k >= self.rank {
            return Err(Error::InvalidInput(format!("no invariant with index {k}")));
        }
        let d = self.degree(k);
        if j > d {
            return Err(Error::InvalidInput(format!(
                "derivative order {j} exceeds degree {d}"
            )));
        }
        let weights = self.vander_inv[k].row(j);
        let factorial: f64 = (1..=j).map(|v| v as f64).product();
        let mut value = C64::new(0.0, 0.0);
        let mut grad = CMatrix::zeros(self.n, self.n);
        for (l, &t) in self.nodes[k].iter().enumerate() {
            let w = cr(weights[l] * factorial);
            let xt = x + beta * cr(t);
            let p = matrix_power(&xt, k + 1);
            value += trace_of_product(&p, &xt) * w;
            grad += self.gradient_from_power(k, p) * w;
        }
        Ok((value, grad))
    }
}

pub fn matrix_power(x: &CMatrix, e: usize) -> CMatrix {
    let n = x.nrows();
    let mut p = CMatrix::identity(n, n);
    for _ in 0..e {
        p = &p * x;
    }
    p
}

/// Numerical rank of the stacked invariant gradients at `x`.
pub fn invariant_gradient_rank(ctx: &LieContext, inv: &InvariantSet, x: &CMatrix) -> usize {
    let grads = inv.gradients(x);
    let m = CMatrix::from_fn(ctx.dim, inv.rank, |a, k| ctx.coords(&grads[k])[a]);
    numerical_rank(&m, ctx.tolerances.rank).rank
}

/// Rank of `[im ad_x | slice basis]`; equals `dim` when the slice is transverse
/// to the orbit of `x`.
pub fn transversality_rank(ctx: &LieContext, slice: &SlodowySlice, x: &CMatrix) -> usize {
    let ad = ctx.ad_matrix(x);
    let mut m = CMatrix::zeros(ctx.dim, ctx.dim + slice.rank());
    m.view_mut((0, 0), (ctx.dim, ctx.dim)).copy_from(&ad);
    for (k, b) in slice.basis.iter().enumerate() {
        m.set_column(ctx.dim + k, &ctx.coords(b));
    }
    numerical_rank(&m, ctx.tolerances.rank).rank
}

/// Damped Newton solver for `F(ξ + Σ c_k η^k) = target`.
#[derive(Debug, Clone)]
pub struct KostantSolver<'a> {
    pub ctx: &'a LieContext,
    pub slice: &'a SlodowySlice,
    pub inv: &'a InvariantSet,
    pub max_restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KostantSolution {
    #[serde(with = "crate::json::vector")]
    pub coords: CVector,
    pub residual: f64,
    pub restarts_used: usize,
    pub jacobian_cond: f64,
}

impl<'a> KostantSolver<'a> {
    pub fn new(ctx: &'a LieContext, slice: &'a SlodowySlice, inv: &'a InvariantSet) -> Self {
        Self {
            ctx,
            slice,
            inv,
            max_restarts: 20,
            max_iter: 100,
            seed: 0x5eed,
        }
    }

    /// `∂f_k / ∂c_l = (k+2) tr(x^{k+1} η^{l+1})`; independent of the form.
    pub fn jacobian(&self, c: &CVector) -> CMatrix {
        let x = self.slice.point(c);
        let r = self.inv.rank;
        let mut jac = CMatrix::zeros(r, r);
        let mut p = x.clone();
        for k in 0..r {
            for l in 0..r {
                jac[(k, l)] = trace_of_product(&p, &self.slice.basis[l]) * cr((k + 2) as f64);
            }
            p = &p * &x;
        }
        jac
    }

    fn residual_vec(&self, c: &CVector, target: &CVector) -> CVector {
        self.inv.values(&self.slice.point(c)) - target
    }

    fn tolerance(&self, target: &CVector) -> f64 {
        self.ctx.tolerances.kostant * (1.0 + target.norm())
    }

    /// Newton from `start`; returns the final coordinates and residual norm.
    pub fn newton(&self, start: CVector, target: &CVector) -> (CVector, f64) {
        let tol = self.tolerance(target);
        let mut c = start;
        let mut r = self.residual_vec(&c, target);
        let mut rn = r.norm();
        for _ in 0..self.max_iter {
            if !rn.is_finite() || rn <= tol * 1e-3 {
                break;
            }
            let Some(step) = self.jacobian(&c).lu().solve(&r) else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = &c - &step * cr(alpha);
                let tr = self.residual_vec(&trial, target);
                let tn = tr.norm();
                if tn.is_finite() && tn < rn {
                    c = trial;
                    r = tr;
                    rn = tn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (c, rn)
    }

    pub fn solve_from(&self, start: CVector, target: &CVector) -> Result<KostantSolution> {
        let (coords, residual) = self.newton(start, target);
        self.finish(coords, residual, 0, target)
    }

    /// Newton from `c = 0`, then from random starts bounded by `‖target‖`.
    pub fn solve(&self, target: &CVector) -> Result<KostantSolution> {
        if target.len() != self.inv.rank {
            return Err(Error::DimensionMismatch {
                expected: self.inv.rank,
                found: target.len(),
            });
        }
        let tol = self.tolerance(target);
        let (mut best_c, mut best_r) = self.newton(CVector::zeros(self.inv.rank), target);
        if best_r <= tol {
            return self.finish(best_c, best_r, 0, target);
        }
        let mut rng = rng_from_seed(self.seed);
        let radius = target.norm().max(1.0);
        for attempt in 1..=self.max_restarts {
            let start = self.random_start(&mut rng, radius);
            let (c, r) = self.newton(start, target);
            if r < best_r {
                best_c = c;
                best_r = r;
            }
            if best_r <= tol {
                return self.finish(best_c, best_r, attempt, target);
            }
        }
        Err(Error::NoConvergence {
            best_residual: best_r,
            restarts: self.max_restarts,
        })
    }

    /// A random start with coordinate `k` scaled like the weight `k+2` root
    /// of `radius`.
    pub fn random_start<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> CVector {
        CVector::from_iterator(
            self.inv.rank,
            (0..self.inv.rank).map(|k| {
                let scale = radius.powf(1.0 / (k + 2) as f64) / frobenius(&self.slice.basis[k]);
                crate::lie::gaussian_complex(rng) * cr(scale)
            }),
        )
    }

    fn finish(
        &self,
        coords: CVector,
        residual: f64,
        restarts_used: usize,
        target: &CVector,
    ) -> Result<KostantSolution> {
        if residual > self.tolerance(target) {
            return Err(Error::NoConvergence {
                best_residual: residual,
                restarts: restarts_used,
            });
        }
        let jacobian_cond = condition_number(&self.jacobian(&coords));
        if !(jacobian_cond <= self.ctx.tolerances.cond_max) {
            return Err(Error::IllConditioned {
                what: "slice Jacobian at the Kostant point",
                cond: jacobian_cond,
                limit: self.ctx.tolerances.cond_max,
            });
        }
        Ok(KostantSolution {
            coords,
            residual,
            restarts_used,
            jacobian_cond,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceRepresentative {
    #[serde(with = "crate::json::matrix")]
    pub tilde_x: CMatrix,
    #[serde(with = "crate::json::vector")]
    pub coords: CVector,
    pub residual: f64,
}

/// The unique slice point in the orbit of `-x`.
pub fn slice_representative(
    ctx: &LieContext,
    slice: &SlodowySlice,
    inv: &InvariantSet,
    x: &CMatrix,
) -> Result<SliceRepresentative> {
    ctx.check_algebra_element(x)?;
    let cls = classify(ctx, x, ctx.tolerances.rank)?;
    if !cls.is_regular {
        return Err(Error::NotRegular {
            centralizer_dim: cls.centralizer_dim,
            rank: ctx.rank,
        });
    }
    let target = inv.values(&(-x));
    let sol = KostantSolver::new(ctx, slice, inv).solve(&target)?;
    let tilde_x = slice.point(&sol.coords);
    let residual = (inv.values(&tilde_x) - &target).norm();
    if residual > 1e-9 * (1.0 + target.norm()) {
        return Err(Error::Numerical(format!(
            "slice representative misses the invariants by {residual:.3e}"
        )));
    }
    Ok(SliceRepresentative {
        tilde_x,
        coords: sol.coords,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct Conjugator {
    pub g: CMatrix,
    pub residual: f64,
}

/// A group element `g` with `g⁻¹ tilde_x g = minus_x`, for regular semisimple
/// inputs with the same spectrum.
pub fn conjugator(ctx: &LieContext, tilde_x: &CMatrix, minus_x: &CMatrix) -> Result<Conjugator> {
    let tol = &ctx.tolerances;
    for (name, m) in [("tilde_x", tilde_x), ("-x", minus_x)] {
        let c = classify(ctx, m, tol.rank)?;
        match c.semisimplicity {
            Semisimplicity::Semisimple if c.is_regular => {}
            Semisimplicity::Uncertain => {
                return Err(Error::EigenvalueCollision {
                    tolerance: tol.cluster,
                })
            }
            _ => {
                return Err(Error::NotRegularSemisimple(format!(
                    "{name} must be regular semisimple"
                )))
            }
        }
    }
    let scale = frobenius(minus_x).max(1.0);
    let ea = eigenvalues(tilde_x);
    let eb = eigenvalues(minus_x);
    let n = ctx.n;
    for i in 0..n {
        for j in (i + 1)..n {
            if (ea[i] - ea[j]).norm() <= tol.cluster * scale {
                return Err(Error::EigenvalueCollision {
                    tolerance: tol.cluster,
                });
            }
        }
    }
    let mut used = vec![false; n];
    let mut matched = Vec::with_capacity(n);
    for &lambda in &ea {
        let (j, dist) = eb
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, mu)| (j, (mu - lambda).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("spectra have equal size");
        if dist > tol.conjugator * scale {
            return Err(Error::InvalidInput(format!(
                "spectra differ (eigenvalue mismatch {dist:.3e})"
            )));
        }
        used[j] = true;
        matched.push(eb[j]);
    }
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    for i in 0..n {
        p.set_column(i, &eigenvector(tilde_x, ea[i]));
        q.set_column(i, &eigenvector(minus_x, matched[i]));
    }
    let q_inv = inverse(&q, "eigenvector matrix")?;
    let g = normalize_determinant(&(p * q_inv));
    let g_inv = inverse(&g, "conjugator")?;
    let residual = frobenius(&(&g_inv * tilde_x * &g - minus_x)) / scale;
    if residual > tol.conjugator {
        return Err(Error::Numerical(format!(
            "conjugator residual {residual:.3e} exceeds {:.1e}",
            tol.conjugator
        )));
    }
    Ok(Conjugator { g, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{adjoint_action, sample, FormKind, SampleKind};

    fn setup(n: usize) -> (LieContext, SlodowySlice, InvariantSet) {
        let ctx = LieContext::new(n, FormKind::TraceForm).unwrap();
        let slice = SlodowySlice::principal(&ctx).unwrap();
        let inv = InvariantSet::new(&ctx).unwrap();
        (ctx, slice, inv)
    }

    fn m2(a: f64, b: f64, c: f64, d: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(a), cr(b), cr(c), cr(d)])
    }

    #[test]
    fn principal_triple_n2() {
        let (ctx, _, _) = setup(2);
        let t = principal_triple(&ctx);
        assert_eq!(t.xi, m2(0.0, 1.0, 0.0, 0.0));
        assert_eq!(t.h, m2(1.0, 0.0, 0.0, -1.0));
        assert_eq!(t.eta, m2(0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn principal_triple_relations_and_regularity() {
        for n in 2..=6 {
            let (ctx, _, _) = setup(n);
            let t = principal_triple(&ctx);
            assert!(t.relation_residual() <= 1e-12, "n={n}");
            for m in [&t.xi, &t.eta] {
                let c = classify(&ctx, m, 1e-8).unwrap();
                assert!(c.is_regular);
                assert_eq!(c.semisimplicity, Semisimplicity::NotSemisimple);
            }
            if n == 3 {
                let want = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(2.0), cr(0.0), cr(-2.0)]));
                assert_eq!(t.h, want);
            }
        }
    }

    #[test]
    fn slice_basics() {
        let (ctx, slice, _) = setup(4);
        assert_eq!(slice.point(&CVector::zeros(3)), slice.triple.xi);
        for b in &slice.basis {
            assert!(frobenius(&commutator(b, &slice.triple.eta)) <= 1e-14);
            assert!(b.trace().norm() < 1e-14);
        }
        let c = CVector::from_vec(vec![C64::new(1.0, 2.0), cr(-0.5), C64::new(0.0, 3.0)]);
        assert!((slice.coords_of(&slice.point(&c)) - &c).norm() < 1e-14);
        let _ = ctx;
    }

    #[test]
    fn invariant_examples() {
        let (ctx, slice, inv) = setup(2);
        let h = m2(1.0, 0.0, 0.0, -1.0);
        assert!((inv.value(0, &h) - cr(2.0)).norm() < 1e-14);
        for n in 2..=5 {
            let (ctx, slice, inv) = setup(n);
            assert!(inv.values(&slice.triple.xi).norm() < 1e-12);
            let x = sample(&ctx, 5, SampleKind::Generic);
            let g = sample(&ctx, 6, SampleKind::Group);
            let gx = adjoint_action(&g, &x).unwrap();
            let scale = frobenius(&x).powi(n as i32).max(1.0);
            assert!((inv.values(&gx) - inv.values(&x)).norm() <= 1e-9 * scale);
        }
        let _ = (ctx, slice);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for form in [FormKind::TraceForm, FormKind::KillingForm] {
            let ctx = LieContext::new(3, form).unwrap();
            let inv = InvariantSet::new(&ctx).unwrap();
            let x = sample(&ctx, 1, SampleKind::Generic);
            let v = sample(&ctx, 2, SampleKind::Generic);
            let eps = 1e-5;
            for k in 0..inv.rank {
                let fd = (inv.value(k, &(&x + &v * cr(eps))) - inv.value(k, &(&x - &v * cr(eps))))
                    / cr(2.0 * eps);
                let an = ctx.pair(&inv.gradient(k, &x), &v);
                assert!((fd - an).norm() <= 1e-6 * (1.0 + an.norm()), "{form:?} k={k}");
            }
        }
    }

    #[test]
    fn directional_derivative_examples() {
        let (_, _, inv) = setup(2);
        let h = m2(1.0, 0.0, 0.0, -1.0);
        let e = m2(0.0, 1.0, 0.0, 0.0);
        let (v, _) = inv.directional_derivative(0, &e, 1, &h).unwrap();
        assert!(v.norm() < 1e-13);
        let (v0, g0) = inv.directional_derivative(0, &e, 0, &h).unwrap();
        assert!((v0 - inv.value(0, &h)).norm() < 1e-13);
        assert!((g0 - inv.gradient(0, &h)).norm() < 1e-13);

        let (ctx, _, inv) = setup(4);
        let beta = sample(&ctx, 1, SampleKind::Generic);
        let x = sample(&ctx, 2, SampleKind::Generic);
        for k in 0..inv.rank {
            let d = inv.degree(k);
            let (top_x, _) = inv.directional_derivative(k, &beta, d, &x).unwrap();
            let (top_0, _) = inv.directional_derivative(k, &beta, d, &CMatrix::zeros(4, 4)).unwrap();
            assert!((top_x - top_0).norm() <= 1e-9 * (1.0 + top_0.norm()));
            // d!·f_k(β) is the top coefficient
            let want = inv.value(k, &beta) * cr((1..=d).map(|v| v as f64).product::<f64>());
            assert!((top_0 - want).norm() <= 1e-9 * (1.0 + want.norm()));
        }
        assert!(inv.directional_derivative(0, &beta, 3, &x).is_err());
    }

    #[test]
    fn first_directional_derivative_is_pairing_with_gradient() {
        let (ctx, _, inv) = setup(3);
        let beta = sample(&ctx, 3, SampleKind::Generic);
        let x = sample(&ctx, 4, SampleKind::Generic);
        for k in 0..inv.rank {
            let (v, _) = inv.directional_derivative(k, &beta, 1, &x).unwrap();
            let want = ctx.pair(&inv.gradient(k, &x), &beta);
            assert!((v - want).norm() <= 1e-10 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn kostant_n2_closed_form() {
        let (ctx, slice, inv) = setup(2);
        let solver = KostantSolver::new(&ctx, &slice, &inv);
        let v = C64::new(3.0, -1.5);
        let sol = solver.solve(&CVector::from_vec(vec![v])).unwrap();
        assert!((sol.coords[0] - v / cr(2.0)).norm() < 1e-12);
        let sol = solver.solve(&CVector::zeros(1)).unwrap();
        assert!(sol.coords.norm() < 1e-14);
    }

    #[test]
    fn kostant_multistart_agrees_n3() {
        let (ctx, slice, inv) = setup(3);
        let solver = KostantSolver::new(&ctx, &slice, &inv);
        let x = sample(&ctx, 9, SampleKind::RegularSemisimple);
        let target = inv.values(&x);
        let a = solver.solve(&target).unwrap();
        assert!(a.residual <= 1e-10 * (1.0 + target.norm()));
        let mut rng = rng_from_seed(77);
        let start = solver.random_start(&mut rng, target.norm());
        let b = solver.solve_from(start, &target).unwrap();
        assert!((a.coords - b.coords).norm() <= 1e-8);
    }

    #[test]
    fn slice_representative_examples() {
        let (ctx, slice, inv) = setup(2);
        let xi = slice.triple.xi.clone();
        let rep = slice_representative(&ctx, &slice, &inv, &(-&xi)).unwrap();
        assert!((rep.tilde_x - &xi).norm() < 1e-14);
        let h = m2(1.0, 0.0, 0.0, -1.0);
        let rep = slice_representative(&ctx, &slice, &inv, &h).unwrap();
        assert!((rep.tilde_x - m2(0.0, 1.0, 1.0, 0.0)).norm() < 1e-12);
        assert!(matches!(
            slice_representative(&ctx, &slice, &inv, &CMatrix::zeros(2, 2)),
            Err(Error::NotRegular { .. })
        ));
    }

    #[test]
    fn slice_representative_has_spectrum_of_minus_x() {
        let (ctx, slice, inv) = setup(4);
        let x = sample(&ctx, 21, SampleKind::RegularSemisimple);
        let rep = slice_representative(&ctx, &slice, &inv, &x).unwrap();
        let mut a = eigenvalues(&rep.tilde_x);
        let mut b: Vec<C64> = eigenvalues(&x).iter().map(|z| -z).collect();
        let key = |z: &C64| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() <= 1e-7);
        }
    }

    #[test]
    fn conjugator_examples() {
        let (ctx, slice, inv) = setup(2);
        let h = m2(1.0, 0.0, 0.0, -1.0);
        let tilde = m2(0.0, 1.0, 1.0, 0.0);
        let c = conjugator(&ctx, &tilde, &h).unwrap();
        assert!(c.residual <= 1e-12);

        let same = conjugator(&ctx, &h, &h).unwrap();
        let g = &same.g;
        // identity up to a diagonal phase
        assert!(g[(0, 1)].norm() < 1e-12 && g[(1, 0)].norm() < 1e-12);

        let (ctx, slice3, inv3) = setup(3);
        let x = sample(&ctx, 4, SampleKind::RegularSemisimple);
        let rep = slice_representative(&ctx, &slice3, &inv3, &x).unwrap();
        let c = conjugator(&ctx, &rep.tilde_x, &(-&x)).unwrap();
        let phi = -(inverse(&c.g, "g").unwrap() * &rep.tilde_x * &c.g);
        assert!((phi - &x).norm() <= 1e-7 * frobenius(&x).max(1.0));
        assert!(conjugator(&ctx, &slice3.triple.xi, &slice3.triple.xi).is_err());
        let _ = (slice, inv);
    }

    #[test]
    fn transversality_and_gradient_rank() {
        let (ctx, slice, inv) = setup(3);
        let c = CVector::from_vec(vec![cr(0.3), C64::new(-1.0, 0.2)]);
        assert_eq!(transversality_rank(&ctx, &slice, &slice.point(&c)), ctx.dim);
        assert_eq!(invariant_gradient_rank(&ctx, &inv, &CMatrix::zeros(3, 3)), 0);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(1.0), cr(-2.0)]));
        assert!(invariant_gradient_rank(&ctx, &inv, &d) < 2);
        let x = sample(&ctx, 2, SampleKind::RegularSemisimple);
        assert_eq!(invariant_gradient_rank(&ctx, &inv, &x), 2);
    }
}
