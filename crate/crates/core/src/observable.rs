//! Functions on `g` and on the phase space, with exact differentials.
//!
//! Differentials on the phase space are covectors of length `dim + rank`:
//! the first `dim` entries pair with right-trivialized group directions
//! `(b_a, 0)`, the rest with slice directions `(0, η^k)`.

use std::sync::Arc;

use serde::Serialize;

use crate::lie::LieContext;
use crate::linalg::{commutator, cr, CMatrix, CVector, C64};
use crate::slodowy::InvariantSet;
use crate::symplectic::{PhasePoint, PhaseSpace};

/// A holomorphic function on the algebra with its gradient under the
/// context's invariant form.
pub trait AlgebraFunction: Send + Sync {
    fn value(&self, ctx: &LieContext, x: &CMatrix) -> C64;
    fn gradient(&self, ctx: &LieContext, x: &CMatrix) -> CMatrix;
    fn label(&self) -> String;
}

/// `x ↦ pair(a, x)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub a: CMatrix,
    pub name: String,
}

impl Linear {
    pub fn new(a: CMatrix) -> Self {
        Self {
            a,
            name: "linear".into(),
        }
    }

    pub fn named(a: CMatrix, name: impl Into<String>) -> Self {
        Self { a, name: name.into() }
    }
}

impl AlgebraFunction for Linear {
    fn value(&self, ctx: &LieContext, x: &CMatrix) -> C64 {
        ctx.pair(&self.a, x)
    }
    fn gradient(&self, _: &LieContext, _: &CMatrix) -> CMatrix {
        self.a.clone()
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// `x ↦ pair(a, x) · pair(b, x)`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl AlgebraFunction for Quadratic {
    fn value(&self, ctx: &LieContext, x: &CMatrix) -> C64 {
        ctx.pair(&self.a, x) * ctx.pair(&self.b, x)
    }
    fn gradient(&self, ctx: &LieContext, x: &CMatrix) -> CMatrix {
        &self.a * ctx.pair(&self.b, x) + &self.b * ctx.pair(&self.a, x)
    }
    fn label(&self) -> String {
        "quadratic".into()
    }
}

/// The power trace `tr(x^{k+2})`.
#[derive(Debug, Clone)]
pub struct Invariant {
    pub inv: Arc<InvariantSet>,
    pub k: usize,
}

impl AlgebraFunction for Invariant {
    fn value(&self, _: &LieContext, x: &CMatrix) -> C64 {
        self.inv.value(self.k, x)
    }
    fn gradient(&self, _: &LieContext, x: &CMatrix) -> CMatrix {
        self.inv.gradient(self.k, x)
    }
    fn label(&self) -> String {
        self.inv.label(self.k)
    }
}

/// `(∂_β)^j tr(x^{k+2})`.
#[derive(Debug, Clone)]
pub struct ShiftedInvariant {
    pub inv: Arc<InvariantSet>,
    pub k: usize,
    pub beta: CMatrix,
    pub j: usize,
}

impl AlgebraFunction for ShiftedInvariant {
    fn value(&self, _: &LieContext, x: &CMatrix) -> C64 {
        self.inv
            .directional_derivative(self.k, &self.beta, self.j, x)
            .expect("indices validated at construction")
            .0
    }
    fn gradient(&self, _: &LieContext, x: &CMatrix) -> CMatrix {
        self.inv
            .directional_derivative(self.k, &self.beta, self.j, x)
            .expect("indices validated at construction")
            .1
    }
    fn label(&self) -> String {
        format!("d_beta^{} tr(x^{})", self.j, self.k + 2)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantFn(pub C64);

impl AlgebraFunction for ConstantFn {
    fn value(&self, _: &LieContext, _: &CMatrix) -> C64 {
        self.0
    }
    fn gradient(&self, ctx: &LieContext, _: &CMatrix) -> CMatrix {
        CMatrix::zeros(ctx.n, ctx.n)
    }
    fn label(&self) -> String {
        format!("const({})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PullbackOfPolynomial,
    Coordinate,
    Custom,
}

/// A function on the phase space with its differential.
pub trait Observable: Send + Sync {
    fn value(&self, ps: &PhaseSpace, p: &PhasePoint) -> C64;
    fn differential(&self, ps: &PhaseSpace, p: &PhasePoint) -> CVector;
    fn provenance(&self) -> Provenance;
    fn label(&self) -> String;
}

pub type ObservableRef = Arc<dyn Observable>;

/// `f ∘ Φ`.
#[derive(Clone)]
pub struct Pullback(pub Arc<dyn AlgebraFunction>);

impl Pullback {
    pub fn of<F: AlgebraFunction + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }
}

impl Observable for Pullback {
    fn value(&self, ps: &PhaseSpace, p: &PhasePoint) -> C64 {
        self.0.value(&ps.ctx, &ps.phi(p))
    }

    /// With `w = g ∇f(Φ) g⁻¹`: `dF(y, 0) = pair([x, w], y)` and
    /// `dF(0, z) = -pair(w, z)`.
    fn differential(&self, ps: &PhaseSpace, p: &PhasePoint) -> CVector {
        let phi = ps.phi(p);
        let grad = self.0.gradient(&ps.ctx, &phi);
        let w = &p.g * grad * &p.g_inv;
        pullback_differential(ps, p, &w)
    }

    fn provenance(&self) -> Provenance {
        Provenance::PullbackOfPolynomial
    }

    fn label(&self) -> String {
        format!("{} o Phi", self.0.label())
    }
}

/// Differential of `f ∘ Φ` given `w = Ad_g ∇f(Φ)`.
pub fn pullback_differential(ps: &PhaseSpace, p: &PhasePoint, w: &CMatrix) -> CVector {
    let ctx = &ps.ctx;
    let mut d = CVector::zeros(ps.total_dim());
    let group_part = ctx.flat(&commutator(&p.x, w));
    d.rows_mut(0, ctx.dim).copy_from(&group_part);
    for (k, b) in ps.slice.basis.iter().enumerate() {
        d[ctx.dim + k] = -ctx.pair(w, b);
    }
    d
}

/// The slice coordinate `c_k`.
#[derive(Debug, Clone, Copy)]
pub struct SliceCoordinate(pub usize);

impl Observable for SliceCoordinate {
    fn value(&self, _: &PhaseSpace, p: &PhasePoint) -> C64 {
        p.coords[self.0]
    }
    fn differential(&self, ps: &PhaseSpace, _: &PhasePoint) -> CVector {
        let mut d = CVector::zeros(ps.total_dim());
        d[ps.ctx.dim + self.0] = cr(1.0);
        d
    }
    fn provenance(&self) -> Provenance {
        Provenance::Coordinate
    }
    fn label(&self) -> String {
        format!("c_{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub C64);

impl Observable for Constant {
    fn value(&self, _: &PhaseSpace, _: &PhasePoint) -> C64 {
        self.0
    }
    fn differential(&self, ps: &PhaseSpace, _: &PhasePoint) -> CVector {
        CVector::zeros(ps.total_dim())
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
    fn label(&self) -> String {
        format!("const({})", self.0)
    }
}

#[derive(Clone)]
pub struct Product(pub ObservableRef, pub ObservableRef);

impl Observable for Product {
    fn value(&self, ps: &PhaseSpace, p: &PhasePoint) -> C64 {
        self.0.value(ps, p) * self.1.value(ps, p)
    }
    fn differential(&self, ps: &PhaseSpace, p: &PhasePoint) -> CVector {
        self.0.differential(ps, p) * self.1.value(ps, p)
            + self.1.differential(ps, p) * self.0.value(ps, p)
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
    fn label(&self) -> String {
        format!("({}) * ({})", self.0.label(), self.1.label())
    }
}

#[derive(Clone)]
pub struct LinearCombination(pub Vec<(C64, ObservableRef)>);

impl Observable for LinearCombination {
    fn value(&self, ps: &PhaseSpace, p: &PhasePoint) -> C64 {
        self.0.iter().map(|(a, f)| a * f.value(ps, p)).sum()
    }
    fn differential(&self, ps: &PhaseSpace, p: &PhasePoint) -> CVector {
        let mut d = CVector::zeros(ps.total_dim());
        for (a, f) in &self.0 {
            d += f.differential(ps, p) * *a;
        }
        d
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
    fn label(&self) -> String {
        self.0
            .iter()
            .map(|(a, f)| format!("{a}*{}", f.label()))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Central finite difference of `obs` along the coordinate tangent `v`,
/// following the curve `(exp(t y) g, c + t z)`.
pub fn finite_difference(ps: &PhaseSpace, obs: &dyn Observable, p: &PhasePoint, v: &CVector, eps: f64) -> C64 {
    let plus = ps.flow_point(p, v, eps);
    let minus = ps.flow_point(p, v, -eps);
    (obs.value(ps, &plus) - obs.value(ps, &minus)) / cr(2.0 * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{rng_from_seed, sample, FormKind, SampleKind};

    fn observables(ps: &PhaseSpace) -> Vec<ObservableRef> {
        let ctx = &ps.ctx;
        let a = sample(ctx, 1, SampleKind::Generic);
        let b = sample(ctx, 2, SampleKind::Generic);
        let beta = sample(ctx, 3, SampleKind::RegularSemisimple);
        let lin: ObservableRef = Arc::new(Pullback::of(Linear::new(a.clone())));
        let inv: ObservableRef = Arc::new(Pullback::of(Invariant {
            inv: ps.inv.clone(),
            k: ctx.rank - 1,
        }));
        vec![
            lin.clone(),
            Arc::new(Pullback::of(Quadratic { a, b })),
            inv.clone(),
            Arc::new(Pullback::of(ShiftedInvariant {
                inv: ps.inv.clone(),
                k: ctx.rank - 1,
                beta,
                j: 1,
            })),
            Arc::new(SliceCoordinate(0)),
            Arc::new(Constant(cr(2.0))),
            Arc::new(Product(lin.clone(), inv.clone())),
            Arc::new(LinearCombination(vec![(C64::new(0.5, 1.0), lin), (cr(-2.0), inv)])),
        ]
    }

    #[test]
    fn differentials_match_finite_differences() {
        for (n, form) in [(2, FormKind::TraceForm), (3, FormKind::TraceForm), (3, FormKind::KillingForm)] {
            let ps = PhaseSpace::new(LieContext::new(n, form).unwrap()).unwrap();
            let mut rng = rng_from_seed(10 + n as u64);
            for obs in observables(&ps) {
                for _ in 0..3 {
                    let p = ps.random_point(&mut rng);
                    let v = ps.random_tangent(&mut rng);
                    let exact: C64 = obs.differential(&ps, &p).dot(&v);
                    let fd = finite_difference(&ps, obs.as_ref(), &p, &v, 1e-5);
                    assert!(
                        (exact - fd).norm() <= 1e-6 * (1.0 + exact.norm()),
                        "{}: {exact} vs {fd}",
                        obs.label()
                    );
                }
            }
        }
    }
}
