//! The phase space `G × S_reg` in right trivialization.
//!
//! A tangent vector at `(g, x)` is a pair `(y, z)` with `y ∈ g` acting by
//! `d/dt exp(ty) g` and `z` in the span of the slice basis. The form is
//! `ω((y1,z1),(y2,z2)) = pair(y1,z2) - pair(y2,z1) - pair(x,[y1,y2])`, and
//! Hamiltonian fields satisfy `ω(X_F, ·) = dF`.

use std::sync::Arc;

use nalgebra::LU;
use nalgebra::Dyn;
use rand::Rng;
use serde::Serialize;

use crate::lie::{
    centralizer, classify, gaussian_complex, group_exp, sample_group, CentralizerBasis,
    LieContext, Semisimplicity,
};
use crate::linalg::{
    commutator, cr, frobenius, inverse, numerical_rank, singular_values, CMatrix, CVector, C64,
};
use crate::observable::{AlgebraFunction, Linear, Observable, Pullback};
use crate::slodowy::{slice_representative, InvariantSet, SlodowySlice};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub g: CMatrix,
    pub g_inv: CMatrix,
    pub coords: CVector,
    pub x: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub y: CMatrix,
    pub z: CVector,
}

impl TangentVector {
    pub fn zero(n: usize, rank: usize) -> Self {
        Self {
            y: CMatrix::zeros(n, n),
            z: CVector::zeros(rank),
        }
    }
}

/// Everything needed to evaluate on `G × S_reg`.
#[derive(Debug, Clone)]
pub struct PhaseSpace {
    pub ctx: LieContext,
    pub slice: SlodowySlice,
    pub inv: Arc<InvariantSet>,
}

impl PhaseSpace {
    pub fn new(ctx: LieContext) -> Result<Self> {
        let slice = SlodowySlice::principal(&ctx)?;
        let inv = Arc::new(InvariantSet::new(&ctx)?);
        Ok(Self { ctx, slice, inv })
    }

    /// `dim G + rank G`.
    pub fn total_dim(&self) -> usize {
        self.ctx.dim + self.ctx.rank
    }

    pub fn point(&self, g: CMatrix, coords: CVector) -> Result<PhasePoint> {
        self.ctx.check_group_element(&g)?;
        if coords.len() != self.ctx.rank {
            return Err(Error::DimensionMismatch {
                expected: self.ctx.rank,
                found: coords.len(),
            });
        }
        let g_inv = inverse(&g, "group element")?;
        let x = self.slice.point(&coords);
        Ok(PhasePoint { g, g_inv, coords, x })
    }

    /// Builds a point without validating `det g`.
    pub fn point_unchecked(&self, g: CMatrix, coords: CVector) -> PhasePoint {
        let g_inv = g.clone().try_inverse().unwrap_or_else(|| CMatrix::zeros(g.nrows(), g.ncols()));
        let x = self.slice.point(&coords);
        PhasePoint { g, g_inv, coords, x }
    }

    /// `g` bounded by `exp` of a unit-norm element; slice coordinates scaled so
    /// each `c_k η^k` has unit-order norm.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let g = sample_group(self.ctx.n, rng, 1.0);
        let coords = CVector::from_iterator(
            self.ctx.rank,
            self.slice
                .basis
                .iter()
                .map(|b| gaussian_complex(rng) / cr(frobenius(b))),
        );
        self.point_unchecked(g, coords)
    }

    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        CVector::from_iterator(self.total_dim(), (0..self.total_dim()).map(|_| gaussian_complex(rng)))
    }

    pub fn split(&self, v: &CVector) -> TangentVector {
        let dim = self.ctx.dim;
        TangentVector {
            y: self.ctx.from_coords(&v.rows(0, dim).into_owned()),
            z: v.rows(dim, self.ctx.rank).into_owned(),
        }
    }

    pub fn join(&self, t: &TangentVector) -> CVector {
        let mut v = CVector::zeros(self.total_dim());
        v.rows_mut(0, self.ctx.dim).copy_from(&self.ctx.coords(&t.y));
        v.rows_mut(self.ctx.dim, self.ctx.rank).copy_from(&t.z);
        v
    }

    /// The point `(exp(t y) g, c + t z)`.
    pub fn flow_point(&self, p: &PhasePoint, v: &CVector, t: f64) -> PhasePoint {
        let tv = self.split(v);
        let g = group_exp(&(&tv.y * cr(t))) * &p.g;
        self.point_unchecked(g, &p.coords + &tv.z * cr(t))
    }

    /// Right action `(g, x) ↦ (g h⁻¹, x)`.
    pub fn act(&self, h: &CMatrix, p: &PhasePoint) -> Result<PhasePoint> {
        let h_inv = inverse(h, "acting group element")?;
        Ok(self.point_unchecked(&p.g * h_inv, p.coords.clone()))
    }

    /// `Φ(g, x) = -g⁻¹ x g`.
    pub fn phi(&self, p: &PhasePoint) -> CMatrix {
        -(&p.g_inv * &p.x * &p.g)
    }

    /// `dΦ(y, z) = g⁻¹ ([y, x] - z) g`.
    pub fn d_phi(&self, p: &PhasePoint, v: &TangentVector) -> CMatrix {
        let inner = commutator(&v.y, &p.x) - self.slice.tangent(&v.z);
        &p.g_inv * inner * &p.g
    }

    /// `dΦ` as a `dim × (dim + rank)` matrix in basis coordinates.
    pub fn d_phi_matrix(&self, p: &PhasePoint) -> CMatrix {
        let dim = self.ctx.dim;
        let mut m = CMatrix::zeros(dim, self.total_dim());
        for (a, b) in self.ctx.basis.iter().enumerate() {
            let img = &p.g_inv * commutator(b, &p.x) * &p.g;
            m.set_column(a, &self.ctx.coords(&img));
        }
        for (k, b) in self.slice.basis.iter().enumerate() {
            let img = -(&p.g_inv * b * &p.g);
            m.set_column(dim + k, &self.ctx.coords(&img));
        }
        m
    }

    pub fn omega(&self, p: &PhasePoint, v1: &TangentVector, v2: &TangentVector) -> C64 {
        let ctx = &self.ctx;
        let z1 = self.slice.tangent(&v1.z);
        let z2 = self.slice.tangent(&v2.z);
        ctx.pair(&v1.y, &z2) - ctx.pair(&v2.y, &z1) - ctx.pair(&p.x, &commutator(&v1.y, &v2.y))
    }

    /// Gram matrix of `ω` on the basis `(b_a, 0), (0, η^k)`.
    pub fn omega_matrix(&self, p: &PhasePoint) -> CMatrix {
        let ctx = &self.ctx;
        let dim = ctx.dim;
        let total = self.total_dim();
        let mut m = CMatrix::zeros(total, total);
        // -pair(x, [b_a, b_b]) = -pair([x, b_a], b_b)
        for a in 0..dim {
            let row = ctx.flat(&commutator(&p.x, &ctx.basis[a]));
            for b in 0..dim {
                m[(a, b)] = -row[b];
            }
        }
        for (k, eta_k) in self.slice.basis.iter().enumerate() {
            let col = ctx.flat(eta_k);
            for a in 0..dim {
                m[(a, dim + k)] = col[a];
                m[(dim + k, a)] = -col[a];
            }
        }
        m
    }

    pub fn nondegeneracy(&self, p: &PhasePoint) -> Nondegeneracy {
        let om = self.omega_matrix(p);
        let antisymmetry = frobenius(&(&om + om.transpose()));
        let sv = singular_values(&om);
        let min_sv = sv.last().copied().unwrap_or(0.0);
        let max_sv = sv.first().copied().unwrap_or(0.0);
        let cond = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
        Nondegeneracy {
            antisymmetry,
            min_singular_value: min_sv,
            condition_number: cond,
            flagged: min_sv < self.ctx.tolerances.nondegeneracy,
        }
    }

    /// Factorizes `Ω` at `p` for repeated Hamiltonian-field solves.
    pub fn frame(&self, p: &PhasePoint) -> Result<SymplecticFrame> {
        let omega = self.omega_matrix(p);
        let cond = crate::linalg::condition_number(&omega);
        if !(cond <= self.ctx.tolerances.cond_max) {
            return Err(Error::IllConditioned {
                what: "symplectic Gram matrix",
                cond,
                limit: self.ctx.tolerances.cond_max,
            });
        }
        let lu = omega.transpose().lu();
        Ok(SymplecticFrame {
            omega_norm: frobenius(&omega),
            omega,
            lu_t: lu,
            tol: self.ctx.tolerances.field,
        })
    }

    pub fn hamiltonian_field(&self, p: &PhasePoint, obs: &dyn Observable) -> Result<TangentVector> {
        let v = self.frame(p)?.field(&obs.differential(self, p))?;
        Ok(self.split(&v))
    }

    /// `{F, H} = ω(X_F, X_H)`.
    pub fn bracket_up(&self, p: &PhasePoint, f: &dyn Observable, h: &dyn Observable) -> Result<C64> {
        let frame = self.frame(p)?;
        let xf = frame.field(&f.differential(self, p))?;
        let xh = frame.field(&h.differential(self, p))?;
        Ok(frame.omega_of(&xf, &xh))
    }

    pub fn verify_poisson_morphism(
        &self,
        p: &PhasePoint,
        f: &Arc<dyn AlgebraFunction>,
        h: &Arc<dyn AlgebraFunction>,
    ) -> Result<Residual> {
        let up = self.bracket_up(p, &Pullback(f.clone()), &Pullback(h.clone()))?;
        let phi = self.phi(p);
        let gf = f.gradient(&self.ctx, &phi);
        let gh = h.gradient(&self.ctx, &phi);
        let down = self.ctx.pair(&phi, &commutator(&gf, &gh));
        let scale = frobenius(&phi) * frobenius(&gf) * frobenius(&gh);
        Ok(Residual::new((up - down).norm(), scale))
    }

    /// Distance between the Hamiltonian field of `pair(Φ, y)` and `(-Ad_g y, 0)`.
    pub fn verify_moment_map(&self, p: &PhasePoint, y: &CMatrix) -> Result<Residual> {
        let obs = Pullback::of(Linear::new(y.clone()));
        let field = self.hamiltonian_field(p, &obs)?;
        let expected = -(&p.g * y * &p.g_inv);
        let diff = (frobenius(&(&field.y - &expected)).powi(2) + field.z.norm_squared()).sqrt();
        Ok(Residual::new(diff, frobenius(&expected)))
    }

    /// Fiber of `Φ` over `x`: slice point, centralizer and isotropy.
    pub fn fiber_report(&self, x: &CMatrix) -> Result<FiberReport> {
        let ctx = &self.ctx;
        let cls = classify(ctx, x, ctx.tolerances.rank)?;
        if !cls.is_regular {
            return Err(Error::NotRegular {
                centralizer_dim: cls.centralizer_dim,
                rank: ctx.rank,
            });
        }
        let rep = slice_representative(ctx, &self.slice, &self.inv, x)?;
        let cz = centralizer(ctx, &rep.tilde_x, ctx.tolerances.rank)?;
        let kind = match cls.semisimplicity {
            Semisimplicity::Semisimple => FiberKind::Torus,
            Semisimplicity::Uncertain => FiberKind::Uncertain,
            Semisimplicity::NotSemisimple if cls.is_nilpotent => FiberKind::NilpotentType,
            Semisimplicity::NotSemisimple => FiberKind::Mixed,
        };
        let component_count_theoretical = match kind {
            FiberKind::Torus => ComponentCount::Known(1),
            FiberKind::NilpotentType => ComponentCount::Known(ctx.n),
            _ => ComponentCount::Unknown,
        };
        let isotropy = isotropy_residual(ctx, &rep.tilde_x, &cz);
        Ok(FiberReport {
            base: x.clone(),
            tilde_x: rep.tilde_x,
            coords: rep.coords,
            fiber_dim: cz.dim(),
            centralizer: cz,
            kind,
            component_count_theoretical,
            isotropy_residual: isotropy.value,
            isotropy_scaled: isotropy.scaled,
        })
    }

    /// `dω(u, v, w)` for constant coordinate fields, whose brackets are
    /// `[u, v] = (-[y_u, y_v], 0)`; the derivative terms are central
    /// differences along the flow of each field.
    pub fn closedness_residual(&self, p: &PhasePoint, u: &CVector, v: &CVector, w: &CVector, eps: f64) -> C64 {
        let om = |q: &PhasePoint, a: &CVector, b: &CVector| {
            self.omega(q, &self.split(a), &self.split(b))
        };
        let deriv = |dir: &CVector, a: &CVector, b: &CVector| {
            let plus = self.flow_point(p, dir, eps);
            let minus = self.flow_point(p, dir, -eps);
            (om(&plus, a, b) - om(&minus, a, b)) / cr(2.0 * eps)
        };
        let lie = |a: &CVector, b: &CVector| {
            let ta = self.split(a);
            let tb = self.split(b);
            self.join(&TangentVector {
                y: -commutator(&ta.y, &tb.y),
                z: CVector::zeros(self.ctx.rank),
            })
        };
        deriv(u, v, w) - deriv(v, u, w) + deriv(w, u, v) - om(p, &lie(u, v), w) + om(p, &lie(u, w), v)
            - om(p, &lie(v, w), u)
    }

    /// Checks `dim X = dim G + rank G` and that sampled images of `Φ` are regular.
    pub fn ais_certificate<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> AisCertificate {
        let ctx = &self.ctx;
        let phase_dim = self.total_dim();
        let mut failures = 0;
        let mut errors = 0;
        for _ in 0..samples {
            let p = self.random_point(rng);
            match classify(ctx, &self.phi(&p), ctx.tolerances.rank) {
                Ok(c) if c.is_regular => {}
                Ok(_) => failures += 1,
                Err(_) => errors += 1,
            }
        }
        let dimension_ok = phase_dim == ctx.dim + ctx.rank && phase_dim == ctx.n * ctx.n + ctx.n - 2;
        AisCertificate {
            phase_space_dim: phase_dim,
            group_dim: ctx.dim,
            rank: ctx.rank,
            dimension_ok,
            samples,
            regularity_failures: failures,
            classification_errors: errors,
            pass: dimension_ok && failures == 0 && errors == 0,
        }
    }

    /// Numerical rank of `dΦ`.
    pub fn d_phi_rank(&self, p: &PhasePoint) -> usize {
        numerical_rank(&self.d_phi_matrix(p), self.ctx.tolerances.rank).rank
    }
}

/// `Ω` at a point, factorized for solving `Ωᵀ v = dF`.
pub struct SymplecticFrame {
    pub omega: CMatrix,
    omega_norm: f64,
    lu_t: LU<C64, Dyn, Dyn>,
    tol: f64,
}

impl SymplecticFrame {
    /// The coordinate vector `v` with `ω(v, ·) = df`.
    pub fn field(&self, df: &CVector) -> Result<CVector> {
        let v = self
            .lu_t
            .solve(df)
            .ok_or(Error::Singular("symplectic Gram matrix"))?;
        let r = (self.omega.tr_mul(&v) - df).norm();
        let scale = (self.omega_norm * v.norm()).max(df.norm()).max(1.0);
        if r > self.tol * scale {
            return Err(Error::Numerical(format!(
                "Hamiltonian field residual {r:.3e} exceeds {:.1e}",
                self.tol * scale
            )));
        }
        Ok(v)
    }

    pub fn omega_of(&self, a: &CVector, b: &CVector) -> C64 {
        (a.transpose() * &self.omega * b)[(0, 0)]
    }
}

/// `max_{i<j} |pair(x̃, [v_i, v_j])|` over the centralizer basis.
pub fn isotropy_residual(ctx: &LieContext, tilde_x: &CMatrix, cz: &CentralizerBasis) -> Residual {
    let mut worst: f64 = 0.0;
    for i in 0..cz.vectors.len() {
        for j in (i + 1)..cz.vectors.len() {
            let r = ctx.pair(tilde_x, &commutator(&cz.vectors[i], &cz.vectors[j])).norm();
            worst = worst.max(r);
        }
    }
    Residual::new(worst, frobenius(tilde_x) * ctx.form_scale())
}

/// An absolute residual together with its scaled form `value / max(1, scale)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
    pub scaled: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Self {
            value,
            scale,
            scaled: value / scale.max(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Nondegeneracy {
    pub antisymmetry: f64,
    pub min_singular_value: f64,
    pub condition_number: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    Torus,
    NilpotentType,
    Mixed,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentCount {
    Known(usize),
    Unknown,
}

impl Serialize for ComponentCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Known(k) => s.serialize_u64(*k as u64),
            Self::Unknown => s.serialize_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberReport {
    #[serde(with = "crate::json::matrix")]
    pub base: CMatrix,
    #[serde(with = "crate::json::matrix")]
    pub tilde_x: CMatrix,
    #[serde(with = "crate::json::vector")]
    pub coords: CVector,
    pub centralizer: CentralizerBasis,
    pub fiber_dim: usize,
    pub kind: FiberKind,
    pub component_count_theoretical: ComponentCount,
    pub isotropy_residual: f64,
    pub isotropy_scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AisCertificate {
    pub phase_space_dim: usize,
    pub group_dim: usize,
    pub rank: usize,
    pub dimension_ok: bool,
    pub samples: usize,
    pub regularity_failures: usize,
    pub classification_errors: usize,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{adjoint_action, rng_from_seed, sample, FormKind, SampleKind};
    use crate::observable::{Constant, Invariant, LinearCombination, ObservableRef, Quadratic};
    use crate::slodowy::conjugator;

    fn space(n: usize) -> PhaseSpace {
        PhaseSpace::new(LieContext::new(n, FormKind::TraceForm).unwrap()).unwrap()
    }

    fn m2(a: f64, b: f64, c: f64, d: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(a), cr(b), cr(c), cr(d)])
    }

    #[test]
    fn phi_examples() {
        let ps = space(2);
        let c = CVector::from_vec(vec![C64::new(0.4, -0.2)]);
        let p = ps.point(CMatrix::identity(2, 2), c).unwrap();
        assert_eq!(ps.phi(&p), -&p.x);

        let a = C64::new(1.3, 0.4);
        let g = CMatrix::from_row_slice(2, 2, &[a, cr(0.0), cr(0.0), cr(1.0) / a]);
        let p = ps.point(g, CVector::zeros(1)).unwrap();
        let xi = ps.slice.triple.xi.clone();
        assert!((ps.phi(&p) + xi * (cr(1.0) / (a * a))).norm() < 1e-14);
    }

    #[test]
    fn phi_is_equivariant() {
        let ps = space(3);
        let mut rng = rng_from_seed(4);
        for _ in 0..10 {
            let p = ps.random_point(&mut rng);
            let h = sample_group(3, &mut rng, 1.0);
            let lhs = ps.phi(&ps.act(&h, &p).unwrap());
            let rhs = adjoint_action(&h, &ps.phi(&p)).unwrap();
            assert!((lhs - &rhs).norm() <= 1e-10 * frobenius(&rhs).max(1.0));
        }
    }

    #[test]
    fn d_phi_examples() {
        let ps = space(3);
        let mut rng = rng_from_seed(5);
        let p0 = ps.point(CMatrix::identity(3, 3), CVector::from_vec(vec![cr(0.5), cr(-1.0)])).unwrap();
        let v = ps.split(&ps.random_tangent(&mut rng));
        let want = commutator(&v.y, &p0.x) - ps.slice.tangent(&v.z);
        assert!((ps.d_phi(&p0, &v) - want).norm() < 1e-12);
        assert_eq!(ps.d_phi(&p0, &TangentVector::zero(3, 2)).norm(), 0.0);

        for _ in 0..5 {
            let p = ps.random_point(&mut rng);
            let vc = ps.random_tangent(&mut rng);
            let exact = ps.d_phi(&p, &ps.split(&vc));
            let eps = 1e-5;
            let fd = (ps.phi(&ps.flow_point(&p, &vc, eps)) - ps.phi(&ps.flow_point(&p, &vc, -eps)))
                / cr(2.0 * eps);
            assert!((&fd - &exact).norm() <= 1e-6 * (1.0 + exact.norm()));
            assert_eq!(ps.d_phi_rank(&p), ps.ctx.dim);
            let col = ps.d_phi_matrix(&p) * &vc;
            assert!((ps.ctx.from_coords(&col) - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn omega_examples() {
        let ps = space(2);
        let mut rng = rng_from_seed(6);
        let p = ps.random_point(&mut rng);
        let v = ps.split(&ps.random_tangent(&mut rng));
        assert!(ps.omega(&p, &v, &v).norm() < 1e-13);
        let z_only = |z: C64| TangentVector {
            y: CMatrix::zeros(2, 2),
            z: CVector::from_vec(vec![z]),
        };
        assert_eq!(ps.omega(&p, &z_only(cr(1.0)), &z_only(cr(2.0))), cr(0.0));

        let p_xi = ps.point(CMatrix::identity(2, 2), CVector::zeros(1)).unwrap();
        let v1 = z_only(cr(1.0));
        let v2 = TangentVector {
            y: m2(1.0, 0.0, 0.0, -1.0),
            z: CVector::zeros(1),
        };
        assert!(ps.omega(&p_xi, &v1, &v2).norm() < 1e-15);
    }

    #[test]
    fn omega_matrix_matches_omega_and_is_antisymmetric() {
        let ps = space(3);
        let mut rng = rng_from_seed(7);
        let p = ps.random_point(&mut rng);
        let om = ps.omega_matrix(&p);
        assert!(frobenius(&(&om + om.transpose())) <= 1e-12);
        let a = ps.random_tangent(&mut rng);
        let b = ps.random_tangent(&mut rng);
        let direct = ps.omega(&p, &ps.split(&a), &ps.split(&b));
        let via = (a.transpose() * &om * &b)[(0, 0)];
        assert!((direct - via).norm() <= 1e-10 * (1.0 + direct.norm()));
        assert!(!ps.nondegeneracy(&p).flagged);

        // y-z block at (e, ξ) is the Gram matrix of pair on g × slice basis
        let p0 = ps.point(CMatrix::identity(3, 3), CVector::zeros(2)).unwrap();
        let om0 = ps.omega_matrix(&p0);
        for a in 0..ps.ctx.dim {
            for k in 0..2 {
                let want = ps.ctx.pair(&ps.ctx.basis[a], &ps.slice.basis[k]);
                assert!((om0[(a, ps.ctx.dim + k)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_fields() {
        let ps = space(3);
        let mut rng = rng_from_seed(8);
        let p = ps.random_point(&mut rng);
        let zero = ps.hamiltonian_field(&p, &Constant(cr(3.0))).unwrap();
        assert!(frobenius(&zero.y) == 0.0 && zero.z.norm() == 0.0);

        let y = sample(&ps.ctx, 3, SampleKind::Generic);
        let r = ps.verify_moment_map(&p, &y).unwrap();
        assert!(r.scaled <= 1e-8, "{r:?}");
        assert_eq!(ps.verify_moment_map(&p, &CMatrix::zeros(3, 3)).unwrap().value, 0.0);

        let p_id = ps.point(CMatrix::identity(3, 3), p.coords.clone()).unwrap();
        let f = ps.hamiltonian_field(&p_id, &Pullback::of(Linear::new(y.clone()))).unwrap();
        assert!((f.y + &y).norm() <= 1e-9 * frobenius(&y));

        let fa: ObservableRef = Arc::new(Pullback::of(Linear::new(sample(&ps.ctx, 4, SampleKind::Generic))));
        let fb: ObservableRef = Arc::new(Pullback::of(Invariant { inv: ps.inv.clone(), k: 1 }));
        let (a, b) = (C64::new(0.3, 1.0), cr(-2.0));
        let comb = LinearCombination(vec![(a, fa.clone()), (b, fb.clone())]);
        let lhs = ps.join(&ps.hamiltonian_field(&p, &comb).unwrap());
        let rhs = ps.join(&ps.hamiltonian_field(&p, fa.as_ref()).unwrap()) * a
            + ps.join(&ps.hamiltonian_field(&p, fb.as_ref()).unwrap()) * b;
        assert!((&lhs - &rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn brackets_agree_downstairs() {
        let ps = space(3);
        let mut rng = rng_from_seed(9);
        let lin = |s| -> Arc<dyn AlgebraFunction> { Arc::new(Linear::new(sample(&ps.ctx, s, SampleKind::Generic))) };
        let inv: Arc<dyn AlgebraFunction> = Arc::new(Invariant { inv: ps.inv.clone(), k: 0 });
        let quad: Arc<dyn AlgebraFunction> = Arc::new(Quadratic {
            a: sample(&ps.ctx, 20, SampleKind::Generic),
            b: sample(&ps.ctx, 21, SampleKind::Generic),
        });
        for _ in 0..10 {
            let p = ps.random_point(&mut rng);
            let (f, h) = (lin(1), lin(2));
            assert!(ps.verify_poisson_morphism(&p, &f, &h).unwrap().scaled <= 1e-8);
            assert!(ps.verify_poisson_morphism(&p, &quad, &f).unwrap().scaled <= 1e-8);
            assert!(ps.verify_poisson_morphism(&p, &f, &f).unwrap().scaled <= 1e-12);
            let up = ps.bracket_up(&p, &Pullback(inv.clone()), &Pullback(quad.clone())).unwrap();
            assert!(up.norm() <= 1e-8 * (1.0 + frobenius(&ps.phi(&p)).powi(3)));
        }
    }

    #[test]
    fn lie_poisson_of_linear_functions_n2() {
        let ps = space(2);
        let e = m2(0.0, 1.0, 0.0, 0.0);
        let f = m2(0.0, 0.0, 1.0, 0.0);
        let h = m2(1.0, 0.0, 0.0, -1.0);
        let val = ps.ctx.pair(&h, &commutator(&e, &f));
        assert!((val - cr(2.0)).norm() < 1e-14);
    }

    #[test]
    fn isotropy_examples() {
        let ps = space(3);
        let ctx = &ps.ctx;
        let xi = ps.slice.triple.xi.clone();
        let cz = centralizer(ctx, &xi, 1e-8).unwrap();
        assert_eq!(cz.dim(), 2);
        assert!(isotropy_residual(ctx, &xi, &cz).value <= 1e-12);
        let x = sample(ctx, 3, SampleKind::RegularSemisimple);
        let rep = slice_representative(ctx, &ps.slice, &ps.inv, &x).unwrap();
        let cz = centralizer(ctx, &rep.tilde_x, 1e-8).unwrap();
        assert!(isotropy_residual(ctx, &rep.tilde_x, &cz).scaled <= 1e-10);

        let ps2 = space(2);
        let cz = centralizer(&ps2.ctx, &ps2.slice.triple.xi, 1e-8).unwrap();
        assert_eq!(isotropy_residual(&ps2.ctx, &ps2.slice.triple.xi, &cz).value, 0.0);
    }

    #[test]
    fn fiber_report_examples() {
        let ps = space(3);
        let x = sample(&ps.ctx, 12, SampleKind::RegularSemisimple);
        let r = ps.fiber_report(&x).unwrap();
        assert_eq!(r.kind, FiberKind::Torus);
        assert_eq!(r.fiber_dim, 2);
        assert_eq!(r.component_count_theoretical, ComponentCount::Known(1));

        let r = ps.fiber_report(&(-&ps.slice.triple.xi)).unwrap();
        assert_eq!(r.kind, FiberKind::NilpotentType);
        assert_eq!(r.component_count_theoretical, ComponentCount::Known(3));
        assert!(matches!(ps.fiber_report(&CMatrix::zeros(3, 3)), Err(Error::NotRegular { .. })));

        // Jordan block plus a separate eigenvalue
        let mut j = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(1.0), cr(-2.0)]));
        j[(0, 1)] = cr(1.0);
        let r = ps.fiber_report(&j).unwrap();
        assert_eq!(r.kind, FiberKind::Mixed);
        assert_eq!(r.component_count_theoretical, ComponentCount::Unknown);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["component_count_theoretical"], "unknown");
    }

    #[test]
    fn fiber_membership() {
        let ps = space(3);
        let ctx = &ps.ctx;
        let x = sample(ctx, 30, SampleKind::RegularSemisimple);
        let rep = slice_representative(ctx, &ps.slice, &ps.inv, &x).unwrap();
        let conj = conjugator(ctx, &rep.tilde_x, &(-&x)).unwrap();
        let cz = centralizer(ctx, &rep.tilde_x, 1e-8).unwrap();
        let mut rng = rng_from_seed(31);
        for _ in 0..5 {
            let mut a = CMatrix::zeros(3, 3);
            for v in &cz.vectors {
                a += v * gaussian_complex(&mut rng);
            }
            let h = group_exp(&a);
            let p = ps.point_unchecked(&h * &conj.g, rep.coords.clone());
            assert!((ps.phi(&p) - &x).norm() <= 1e-7 * frobenius(&x).max(1.0));
        }
    }

    #[test]
    fn omega_is_closed() {
        let ps = space(3);
        let mut rng = rng_from_seed(11);
        for _ in 0..5 {
            let p = ps.random_point(&mut rng);
            let (u, v, w) = (ps.random_tangent(&mut rng), ps.random_tangent(&mut rng), ps.random_tangent(&mut rng));
            let r = ps.closedness_residual(&p, &u, &v, &w, 1e-4);
            assert!(r.norm() <= 1e-9 * (1.0 + u.norm() * v.norm() * w.norm() * frobenius(&p.x)), "{r}");
        }
    }

    #[test]
    fn ais_certificate_dimensions() {
        for (n, total) in [(2, 4), (3, 10)] {
            let ps = space(n);
            let cert = ps.ais_certificate(&mut rng_from_seed(1), 50);
            assert_eq!(cert.phase_space_dim, total);
            assert!(cert.pass);
        }
    }
}
