//! The invariant-pullback and argument-shift systems, with commutativity,
//! counting and independence checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::json::MatrixJson;
use crate::lie::{classify, FormKind, LieContext};
use crate::linalg::{commutator, cr, eigenvalues, frobenius, numerical_rank, CMatrix, CVector, C64};
use crate::observable::{
    AlgebraFunction, Constant, Invariant, Linear, ObservableRef, Pullback, ShiftedInvariant,
};
use crate::slodowy::{conjugator, invariant_gradient_rank, slice_representative};
use crate::symplectic::{PhasePoint, PhaseSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    InvariantPullback,
    MishchenkoFomenko,
}

/// An ordered family of pulled-back functions.
#[derive(Clone)]
pub struct IntegrableSystem {
    pub kind: SystemKind,
    /// Functions on the algebra; `observables[i] = functions[i] ∘ Φ`.
    pub functions: Vec<Arc<dyn AlgebraFunction>>,
    pub observables: Vec<ObservableRef>,
    pub declared_rank: usize,
    pub beta: Option<CMatrix>,
    pub probe: Option<CMatrix>,
    /// Basis indices of the retained linear coordinates.
    pub coordinate_selection: Vec<usize>,
    /// Basis indices whose coordinates are replaced by the invariants.
    pub pivot_columns: Vec<usize>,
    pub include_constants: bool,
    /// Indices of appended constant layers.
    pub constant_indices: Vec<usize>,
}

impl IntegrableSystem {
    pub fn count(&self) -> usize {
        self.observables.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.label()).collect()
    }

    /// Index pairs whose brackets must vanish.
    pub fn commuting_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.count();
        match self.kind {
            SystemKind::InvariantPullback => (0..self.declared_rank)
                .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
                .collect(),
            SystemKind::MishchenkoFomenko => (0..m)
                .flat_map(|a| ((a + 1)..m).map(move |b| (a, b)))
                .collect(),
        }
    }

    pub fn manifest(&self, ps: &PhaseSpace) -> SystemManifest {
        SystemManifest {
            kind: self.kind,
            n: ps.ctx.n,
            form: ps.ctx.form_kind,
            beta: self.beta.as_ref().map(MatrixJson::from_matrix),
            probe: self.probe.as_ref().map(MatrixJson::from_matrix),
            coordinate_selection: self.coordinate_selection.clone(),
            pivot_columns: self.pivot_columns.clone(),
            include_constants: self.include_constants,
            count: self.count(),
            declared_rank: self.declared_rank,
            labels: self.labels(),
        }
    }

    /// Rebuilds a system from its manifest and checks the recorded shape.
    pub fn from_manifest(ps: &PhaseSpace, m: &SystemManifest) -> Result<Self> {
        if m.n != ps.ctx.n || m.form != ps.ctx.form_kind {
            return Err(Error::InvalidInput(format!(
                "manifest is for n={} ({}), phase space is n={} ({})",
                m.n,
                m.form.as_str(),
                ps.ctx.n,
                ps.ctx.form_kind.as_str()
            )));
        }
        let sys = match m.kind {
            SystemKind::MishchenkoFomenko => {
                let beta = m
                    .beta
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("manifest lacks beta".into()))?
                    .to_matrix()?;
                build_mf(ps, &beta, m.include_constants)?
            }
            SystemKind::InvariantPullback => {
                let probe = m
                    .probe
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("manifest lacks probe".into()))?
                    .to_matrix()?;
                build_invariant_pullback(ps, &probe)?
            }
        };
        if sys.count() != m.count || sys.declared_rank != m.declared_rank {
            return Err(Error::InvalidInput(format!(
                "manifest declares {} functions of rank {}, rebuilt {} of rank {}",
                m.count,
                m.declared_rank,
                sys.count(),
                sys.declared_rank
            )));
        }
        Ok(sys)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemManifest {
    pub kind: SystemKind,
    pub n: usize,
    pub form: FormKind,
    pub beta: Option<MatrixJson>,
    pub probe: Option<MatrixJson>,
    pub coordinate_selection: Vec<usize>,
    pub pivot_columns: Vec<usize>,
    pub include_constants: bool,
    pub count: usize,
    pub declared_rank: usize,
    pub labels: Vec<String>,
}

/// Greedy column pivoting (modified Gram–Schmidt): returns `k` column indices
/// spanning the column space of `m` as well as possible.
pub fn pivot_columns(m: &CMatrix, k: usize) -> Vec<usize> {
    let mut cols: Vec<CVector> = (0..m.ncols()).map(|j| m.column(j).into_owned()).collect();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k.min(m.ncols()) {
        let (best, _) = cols
            .iter()
            .enumerate()
            .filter(|(j, _)| !chosen.contains(j))
            .map(|(j, c)| (j, c.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("enough columns");
        chosen.push(best);
        let q = &cols[best] / cr(cols[best].norm().max(f64::MIN_POSITIVE));
        for c in cols.iter_mut() {
            let proj = q.dotc(c);
            *c -= &q * proj;
        }
    }
    chosen
}

/// Matrix `J_kj = pair(∇f_k(x), b_j)`: differentials of the invariants in
/// basis coordinates.
pub fn invariant_jacobian(ps: &PhaseSpace, x: &CMatrix) -> CMatrix {
    let ctx = &ps.ctx;
    let grads = ps.inv.gradients(x);
    let mut j = CMatrix::zeros(ctx.rank, ctx.dim);
    for (k, g) in grads.iter().enumerate() {
        j.set_row(k, &ctx.flat(g).transpose());
    }
    j
}

/// Invariants followed by the linear coordinates not replaced at `probe`.
pub fn build_invariant_pullback(ps: &PhaseSpace, probe: &CMatrix) -> Result<IntegrableSystem> {
    let ctx = &ps.ctx;
    ctx.check_algebra_element(probe)?;
    let cls = classify(ctx, probe, ctx.tolerances.rank)?;
    if !cls.is_regular {
        return Err(Error::NotRegular {
            centralizer_dim: cls.centralizer_dim,
            rank: ctx.rank,
        });
    }
    let grad_rank = invariant_gradient_rank(ctx, &ps.inv, probe);
    if grad_rank != ctx.rank {
        return Err(Error::Numerical(format!(
            "invariant gradients have rank {grad_rank} at the probe (expected {})",
            ctx.rank
        )));
    }
    let jac = invariant_jacobian(ps, probe);
    let mut pivots = pivot_columns(&jac, ctx.rank);
    pivots.sort_unstable();
    let selection: Vec<usize> = (0..ctx.dim).filter(|j| !pivots.contains(j)).collect();

    let mut functions: Vec<Arc<dyn AlgebraFunction>> = (0..ctx.rank)
        .map(|k| Arc::new(Invariant { inv: ps.inv.clone(), k }) as Arc<dyn AlgebraFunction>)
        .collect();
    for &j in &selection {
        functions.push(Arc::new(Linear::named(ctx.dual_basis[j].clone(), format!("theta_{j}"))));
    }
    let observables = functions
        .iter()
        .map(|f| Arc::new(Pullback(f.clone())) as ObservableRef)
        .collect();
    Ok(IntegrableSystem {
        kind: SystemKind::InvariantPullback,
        functions,
        observables,
        declared_rank: ctx.rank,
        beta: None,
        probe: Some(probe.clone()),
        coordinate_selection: selection,
        pivot_columns: pivots,
        include_constants: false,
        constant_indices: Vec::new(),
    })
}

/// Shifts `(∂_β)^j tr(x^{k+2})` for `j < k+2`; with `include_constants` the
/// constant top layers `j = k+2` are appended at the end.
pub fn build_mf(ps: &PhaseSpace, beta: &CMatrix, include_constants: bool) -> Result<IntegrableSystem> {
    let ctx = &ps.ctx;
    ctx.check_algebra_element(beta)?;
    let cls = classify(ctx, beta, ctx.tolerances.rank)?;
    if !cls.is_regular_semisimple() {
        return Err(Error::NotRegularSemisimple(
            "the shift direction must be regular semisimple".into(),
        ));
    }
    let mut functions: Vec<Arc<dyn AlgebraFunction>> = Vec::new();
    for k in 0..ctx.rank {
        for j in 0..ps.inv.degree(k) {
            functions.push(Arc::new(ShiftedInvariant {
                inv: ps.inv.clone(),
                k,
                beta: beta.clone(),
                j,
            }));
        }
    }
    let declared_rank = functions.len();
    let mut constant_indices = Vec::new();
    if include_constants {
        for k in 0..ctx.rank {
            constant_indices.push(functions.len());
            functions.push(Arc::new(ShiftedInvariant {
                inv: ps.inv.clone(),
                k,
                beta: beta.clone(),
                j: ps.inv.degree(k),
            }));
        }
    }
    let observables = functions
        .iter()
        .map(|f| Arc::new(Pullback(f.clone())) as ObservableRef)
        .collect();
    Ok(IntegrableSystem {
        kind: SystemKind::MishchenkoFomenko,
        functions,
        observables,
        declared_rank,
        beta: Some(beta.clone()),
        probe: None,
        coordinate_selection: Vec::new(),
        pivot_columns: Vec::new(),
        include_constants,
        constant_indices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutativityReport {
    pub points: usize,
    pub pairs_per_point: usize,
    /// Largest `|{F_a, F_b}|` from Hamiltonian fields, absolute and scaled.
    pub max_upstairs: f64,
    pub max_upstairs_scaled: f64,
    /// Largest `|pair(Φ, [∇f_a, ∇f_b])|`, absolute and scaled.
    pub max_downstairs: f64,
    pub max_downstairs_scaled: f64,
    pub errors: Vec<String>,
}

/// Both bracket engines over the system's commuting pairs; residuals are
/// scaled by `max(1, ‖Φ‖ ‖∇f_a‖ ‖∇f_b‖)`.
pub fn verify_commutativity(ps: &PhaseSpace, sys: &IntegrableSystem, points: &[PhasePoint]) -> CommutativityReport {
    let pairs = sys.commuting_pairs();
    let per_point: Vec<std::result::Result<[f64; 4], String>> = points
        .par_iter()
        .map(|p| {
            let frame = ps.frame(p).map_err(|e| e.to_string())?;
            let phi = ps.phi(p);
            let grads: Vec<CMatrix> = sys.functions.iter().map(|f| f.gradient(&ps.ctx, &phi)).collect();
            let mut fields = Vec::with_capacity(sys.count());
            for o in &sys.observables {
                fields.push(frame.field(&o.differential(ps, p)).map_err(|e| e.to_string())?);
            }
            let phi_norm = frobenius(&phi);
            let mut out = [0.0f64; 4];
            for &(a, b) in &pairs {
                let scale = (phi_norm * frobenius(&grads[a]) * frobenius(&grads[b])).max(1.0);
                let up = frame.omega_of(&fields[a], &fields[b]).norm();
                let down = ps.ctx.pair(&phi, &commutator(&grads[a], &grads[b])).norm();
                out[0] = out[0].max(up);
                out[1] = out[1].max(up / scale);
                out[2] = out[2].max(down);
                out[3] = out[3].max(down / scale);
            }
            Ok(out)
        })
        .collect();
    let mut report = CommutativityReport {
        points: points.len(),
        pairs_per_point: pairs.len(),
        max_upstairs: 0.0,
        max_upstairs_scaled: 0.0,
        max_downstairs: 0.0,
        max_downstairs_scaled: 0.0,
        errors: Vec::new(),
    };
    for r in per_point {
        match r {
            Ok(v) => {
                report.max_upstairs = report.max_upstairs.max(v[0]);
                report.max_upstairs_scaled = report.max_upstairs_scaled.max(v[1]);
                report.max_downstairs = report.max_downstairs.max(v[2]);
                report.max_downstairs_scaled = report.max_downstairs_scaled.max(v[3]);
            }
            Err(e) => report.errors.push(e),
        }
    }
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub points: usize,
    pub count: usize,
    pub ranks: Vec<usize>,
    pub full_rank_fraction: f64,
    /// Smallest singular value of the row-normalized differentials:
    /// minimum, 5% quantile and median over points.
    pub min_singular_value: [f64; 3],
    pub failures: Vec<usize>,
}

/// Numerical rank and smallest singular value of the stacked, row-normalized
/// differentials at `p`. Rows below `1e-12` of the largest row count as zero.
pub fn differential_rank(ps: &PhaseSpace, sys: &IntegrableSystem, p: &PhasePoint) -> (usize, f64) {
    let rows: Vec<CVector> = sys.observables.iter().map(|o| o.differential(ps, p)).collect();
    let biggest = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut m = CMatrix::zeros(rows.len(), ps.total_dim());
    for (i, r) in rows.iter().enumerate() {
        let nr = r.norm();
        if nr > 1e-12 * biggest {
            m.set_row(i, &(r / cr(nr)).transpose());
        }
    }
    let info = numerical_rank(&m, ps.ctx.tolerances.rank);
    let smallest = info.singular_values.get(rows.len().saturating_sub(1)).copied().unwrap_or(0.0);
    (info.rank, smallest)
}

pub fn verify_independence(ps: &PhaseSpace, sys: &IntegrableSystem, points: &[PhasePoint]) -> IndependenceReport {
    let results: Vec<(usize, f64)> = points.par_iter().map(|p| differential_rank(ps, sys, p)).collect();
    let count = sys.count();
    let ranks: Vec<usize> = results.iter().map(|r| r.0).collect();
    let failures: Vec<usize> = ranks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < count)
        .map(|(i, _)| i)
        .collect();
    let mut sv: Vec<f64> = results.iter().map(|r| r.1).collect();
    sv.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        if sv.is_empty() {
            return f64::NAN;
        }
        sv[((sv.len() - 1) as f64 * q).round() as usize]
    };
    IndependenceReport {
        points: points.len(),
        count,
        full_rank_fraction: if points.is_empty() {
            0.0
        } else {
            (points.len() - failures.len()) as f64 / points.len() as f64
        },
        ranks,
        min_singular_value: [quantile(0.0), quantile(0.05), quantile(0.5)],
        failures,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocusRow {
    pub gradient_rank: usize,
    pub is_regular: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocusReport {
    pub rows: Vec<LocusRow>,
    pub excluded: usize,
    pub inconsistent: usize,
    pub regular_rows: usize,
    pub non_regular_rows: usize,
}

/// Compares the rank of the invariant gradients with regularity at each point.
pub fn regularity_locus_probe(ctx: &LieContext, ps: &PhaseSpace, points: &[CMatrix]) -> LocusReport {
    let mut rows = Vec::new();
    let mut excluded = 0;
    for x in points {
        match classify(ctx, x, ctx.tolerances.rank) {
            Ok(c) => {
                let r = invariant_gradient_rank(ctx, &ps.inv, x);
                rows.push(LocusRow {
                    gradient_rank: r,
                    is_regular: c.is_regular,
                    consistent: (r == ctx.rank) == c.is_regular,
                });
            }
            Err(_) => excluded += 1,
        }
    }
    LocusReport {
        excluded,
        inconsistent: rows.iter().filter(|r| !r.consistent).count(),
        regular_rows: rows.iter().filter(|r| r.is_regular).count(),
        non_regular_rows: rows.iter().filter(|r| !r.is_regular).count(),
        rows,
    }
}

/// A phase point with `Φ(p) = x` for regular semisimple `x`.
pub fn point_over(ps: &PhaseSpace, x: &CMatrix) -> Result<PhasePoint> {
    let rep = slice_representative(&ps.ctx, &ps.slice, &ps.inv, x)?;
    let conj = conjugator(&ps.ctx, &rep.tilde_x, &(-x))?;
    ps.point(conj.g, rep.coords)
}

/// Determinant of the pivot minor of the invariant Jacobian.
fn pivot_minor(ps: &PhaseSpace, pivots: &[usize], x: &CMatrix) -> C64 {
    let jac = invariant_jacobian(ps, x);
    let r = pivots.len();
    CMatrix::from_fn(r, r, |i, j| jac[(i, pivots[j])]).determinant()
}

/// A phase point where the system's differentials are dependent.
///
/// For the argument-shift family this is a point over `β`, where every
/// gradient lies in the centralizer of `β`. For the pullback family the
/// retained minor is a polynomial along the line `x0 + t d`; one of its roots
/// is located from sampled values and pulled back through the slice.
pub fn degenerate_point(ps: &PhaseSpace, sys: &IntegrableSystem, x0: &CMatrix, d: &CMatrix) -> Result<PhasePoint> {
    match sys.kind {
        SystemKind::MishchenkoFomenko => point_over(ps, sys.beta.as_ref().expect("shift present")),
        SystemKind::InvariantPullback => {
            let x = minor_root(ps, &sys.pivot_columns, x0, d)?;
            point_over(ps, &x)
        }
    }
}

fn minor_root(ps: &PhaseSpace, pivots: &[usize], x0: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
    let r = pivots.len();
    let degree = r * (r + 1) / 2;
    let m = 2 * (degree + 1);
    let rho = |t: C64| pivot_minor(ps, pivots, &(x0 + d * t));
    // Fourier coefficients on the unit circle recover the polynomial exactly.
    let samples: Vec<C64> = (0..m)
        .map(|s| rho(C64::from_polar(1.0, std::f64::consts::TAU * s as f64 / m as f64)))
        .collect();
    let coeffs: Vec<C64> = (0..=degree)
        .map(|l| {
            samples
                .iter()
                .enumerate()
                .map(|(s, v)| v * C64::from_polar(1.0, -std::f64::consts::TAU * (l * s) as f64 / m as f64))
                .sum::<C64>()
                / cr(m as f64)
        })
        .collect();
    let lead = coeffs[degree];
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if lead.norm() <= 1e-12 * scale {
        return Err(Error::Numerical("minor has degenerate leading coefficient".into()));
    }
    let mut companion = CMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = cr(1.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -coeffs[i] / lead;
    }
    let mut roots = eigenvalues(&companion);
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    for t0 in roots {
        let mut t = t0;
        // Newton polish on the polynomial itself.
        for _ in 0..20 {
            let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for c in coeffs.iter().rev() {
                dp = dp * t + p;
                p = p * t + c;
            }
            if dp.norm() == 0.0 {
                break;
            }
            t -= p / dp;
        }
        let x = x0 + d * t;
        if rho(t).norm() > 1e-8 * scale.max(1e-300) {
            continue;
        }
        if let Ok(c) = classify(&ps.ctx, &x, ps.ctx.tolerances.rank) {
            if c.is_regular_semisimple() {
                return Ok(x);
            }
        }
    }
    Err(Error::Numerical("no regular semisimple root of the pivot minor".into()))
}

/// Appends a constant observable; used to demonstrate a rank deficit of one.
pub fn with_constant(sys: &IntegrableSystem) -> IntegrableSystem {
    let mut s = sys.clone();
    s.observables.push(Arc::new(Constant(cr(1.0))));
    s.functions.push(Arc::new(crate::observable::ConstantFn(cr(1.0))));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{derive_seed, rng_from_seed, sample, SampleKind};

    fn space(n: usize) -> PhaseSpace {
        PhaseSpace::new(LieContext::new(n, FormKind::TraceForm).unwrap()).unwrap()
    }

    fn points(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<PhasePoint> {
        (0..count)
            .map(|i| ps.random_point(&mut rng_from_seed(derive_seed(seed, i as u64))))
            .collect()
    }

    #[test]
    fn pivoting_prefers_large_independent_columns() {
        let m = CMatrix::from_row_slice(2, 3, &[cr(1.0), cr(5.0), cr(1.0), cr(0.0), cr(0.0), cr(2.0)]);
        assert_eq!(pivot_columns(&m, 2), vec![1, 2]);
    }

    #[test]
    fn invariant_pullback_n2() {
        let ps = space(2);
        let probe = sample(&ps.ctx, 1, SampleKind::RegularSemisimple);
        let sys = build_invariant_pullback(&ps, &probe).unwrap();
        assert_eq!(sys.count(), 3);
        assert_eq!(sys.declared_rank, 1);
        assert_eq!(sys.coordinate_selection.len(), 2);
        let pts = points(&ps, 2, 20);
        let rep = verify_commutativity(&ps, &sys, &pts);
        assert!(rep.errors.is_empty());
        assert!(rep.max_upstairs_scaled <= 1e-8 && rep.max_downstairs_scaled <= 1e-8, "{rep:?}");
        let ind = verify_independence(&ps, &sys, &pts);
        assert!(ind.ranks.iter().all(|&r| r == 3));
        assert!(build_invariant_pullback(&ps, &CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn mf_counts_and_layers() {
        let ps = space(2);
        let beta = sample(&ps.ctx, 4, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        assert_eq!(sys.count(), 2);
        let x = sample(&ps.ctx, 5, SampleKind::Generic);
        let want = ps.ctx.pair(&x, &beta) * cr(2.0);
        assert!((sys.functions[1].value(&ps.ctx, &x) - want).norm() < 1e-12);
        assert!((sys.functions[0].value(&ps.ctx, &x) - ps.inv.value(0, &x)).norm() < 1e-12);

        let ps3 = space(3);
        let beta3 = sample(&ps3.ctx, 4, SampleKind::RegularSemisimple);
        assert_eq!(build_mf(&ps3, &beta3, false).unwrap().count(), 5);
        assert_eq!(build_mf(&ps3, &beta3, true).unwrap().count(), 7);
        assert!(build_mf(&ps3, &ps3.slice.triple.xi, false).is_err());
    }

    #[test]
    fn counts_for_small_n() {
        for n in 2..=5 {
            let ps = space(n);
            let probe = sample(&ps.ctx, 9, SampleKind::RegularSemisimple);
            let ip = build_invariant_pullback(&ps, &probe).unwrap();
            assert_eq!(ip.count(), n * n - 1);
            assert_eq!(ip.declared_rank, n - 1);
            let mf = build_mf(&ps, &probe, false).unwrap();
            assert_eq!(mf.count(), (n * n + n - 2) / 2);
            assert_eq!(mf.declared_rank, mf.count());
            assert!(2 * ip.declared_rank <= ps.total_dim());
        }
    }

    #[test]
    fn mf_commutes_and_is_independent_n3() {
        let ps = space(3);
        let beta = sample(&ps.ctx, 6, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let pts = points(&ps, 7, 20);
        let rep = verify_commutativity(&ps, &sys, &pts);
        assert!(rep.max_upstairs_scaled <= 1e-8 && rep.max_downstairs_scaled <= 1e-9, "{rep:?}");
        let ind = verify_independence(&ps, &sys, &pts);
        assert_eq!(ind.full_rank_fraction, 1.0);
        let ind = verify_independence(&ps, &with_constant(&sys), &pts);
        assert!(ind.ranks.iter().all(|&r| r == sys.count()));

        let with_top = build_mf(&ps, &beta, true).unwrap();
        let ind = verify_independence(&ps, &with_top, &pts);
        assert!(ind.ranks.iter().all(|&r| r == sys.count()));
        let rep2 = verify_commutativity(&ps, &with_top, &pts);
        assert!(rep2.max_upstairs_scaled <= 1e-8);
    }

    #[test]
    fn degenerate_points_drop_rank() {
        let ps = space(3);
        let beta = sample(&ps.ctx, 6, SampleKind::RegularSemisimple);
        let mf = build_mf(&ps, &beta, false).unwrap();
        let x0 = sample(&ps.ctx, 1, SampleKind::Generic);
        let d = sample(&ps.ctx, 2, SampleKind::Generic);
        let p = degenerate_point(&ps, &mf, &x0, &d).unwrap();
        assert!(differential_rank(&ps, &mf, &p).0 < mf.count());

        let ip = build_invariant_pullback(&ps, &beta).unwrap();
        let p = degenerate_point(&ps, &ip, &x0, &d).unwrap();
        assert!(differential_rank(&ps, &ip, &p).0 < ip.count());
    }

    #[test]
    fn locus_probe() {
        let ps = space(3);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(1.0), cr(-2.0)]));
        let pts = vec![
            CMatrix::zeros(3, 3),
            d,
            sample(&ps.ctx, 1, SampleKind::RegularSemisimple),
            ps.slice.triple.xi.clone(),
        ];
        let rep = regularity_locus_probe(&ps.ctx, &ps, &pts);
        assert_eq!(rep.rows[0].gradient_rank, 0);
        assert!(rep.rows[1].gradient_rank < 2);
        assert_eq!(rep.rows[2].gradient_rank, 2);
        assert_eq!(rep.inconsistent, 0);
        assert_eq!((rep.regular_rows, rep.non_regular_rows), (2, 2));
    }

    #[test]
    fn manifest_round_trip() {
        let ps = space(3);
        let beta = sample(&ps.ctx, 6, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let text = serde_json::to_string(&sys.manifest(&ps)).unwrap();
        let m: SystemManifest = serde_json::from_str(&text).unwrap();
        let back = IntegrableSystem::from_manifest(&ps, &m).unwrap();
        assert_eq!(back.labels(), sys.labels());
    }
}
