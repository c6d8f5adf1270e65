//! Verification suites. Each function draws its own seeded samples and
//! returns one [`CheckRecord`] per measured property.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::flows::{
    closed_form_product_flow, convergence_study, drift_of, integrate, FlowOptions,
};
use crate::lie::{
    adjoint_action, bracket, classify, derive_seed, gaussian_complex, group_exp, rng_from_seed, sample_generic,
    sample_group, sample_regular_semisimple, FormKind, LieContext,
};
use crate::linalg::{commutator, cr, frobenius, trace, CMatrix, CVector, C64};
use crate::observable::{
    finite_difference, AlgebraFunction, Linear, ObservableRef, Product, Pullback, Quadratic,
    SliceCoordinate,
};
use crate::report::{CheckRecord, Comparison, Environment, VerificationReport};
use crate::slodowy::{principal_triple, transversality_rank, KostantSolver};
use crate::symplectic::{ComponentCount, FiberKind, PhaseSpace};
use crate::systems::{
    build_invariant_pullback, build_mf, degenerate_point, differential_rank, point_over, regularity_locus_probe,
    verify_commutativity, verify_independence, with_constant, IntegrableSystem,
};
use crate::{Error, Result};

/// Sample sizes for one run, derived from a single `samples` knob.
#[derive(Debug, Clone, Copy)]
pub struct Counts {
    pub structure: usize,
    pub slice_points: usize,
    pub kostant_targets: usize,
    pub kostant_starts: usize,
    pub d_phi_points: usize,
    pub image_points: usize,
    pub poisson_triples: usize,
    pub moment_pairs: usize,
    pub isotropy_points: usize,
    pub form_points: usize,
    pub commutativity_points: usize,
    pub independence_points: usize,
    pub fiber_samples: usize,
    pub ais_samples: usize,
}

impl Counts {
    pub fn from_samples(s: usize) -> Self {
        Self {
            structure: s,
            slice_points: 5 * s,
            kostant_targets: s,
            kostant_starts: 5,
            d_phi_points: 2 * s,
            image_points: 10 * s,
            poisson_triples: s,
            moment_pairs: s,
            isotropy_points: 2 * s,
            form_points: 2 * s,
            commutativity_points: s,
            independence_points: 2 * s,
            fiber_samples: s,
            ais_samples: 10 * s,
        }
    }
}

const SALT_STRUCTURE: u64 = 1;
const SALT_SLICE: u64 = 2;
const SALT_KOSTANT: u64 = 3;
const SALT_SUBMERSION: u64 = 4;
const SALT_IMAGE: u64 = 5;
const SALT_POISSON: u64 = 6;
const SALT_MOMENT: u64 = 7;
const SALT_ISOTROPY: u64 = 8;
const SALT_FORM: u64 = 9;
const SALT_SYSTEMS: u64 = 10;
const SALT_COMMUTATIVITY: u64 = 11;
const SALT_INDEPENDENCE: u64 = 12;
const SALT_FIBERS: u64 = 13;
const SALT_AIS: u64 = 14;
const SALT_DYNAMICS: u64 = 15;
const SALT_OBSERVABLES: u64 = 16;
const SALT_LOCUS: u64 = 17;

fn rng_for(seed: u64, salt: u64, i: usize) -> ChaCha8Rng {
    rng_from_seed(derive_seed(derive_seed(seed, salt), i as u64))
}

fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

/// The worst sample, or an error record if any sample could not be evaluated.
fn max_record(name: &str, anchor: &str, results: Vec<Result<f64>>, cmp: Comparison) -> CheckRecord {
    let total = results.len();
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(v) if v.is_nan() => failed.push("NaN residual".to_string()),
            Ok(v) => worst = worst.max(v),
            Err(e) => failed.push(e.to_string()),
        }
    }
    if let Some(first) = failed.first() {
        return CheckRecord::error(name, anchor, format!("{} of {total} samples failed: {first}", failed.len()));
    }
    CheckRecord::new(name, anchor, worst, cmp).with_detail(format!("{total} samples"))
}

fn count_record(name: &str, anchor: &str, failures: usize, total: usize) -> CheckRecord {
    CheckRecord::new(name, anchor, failures as f64, Comparison::Equals(0.0))
        .with_detail(format!("{failures} of {total} samples failed"))
}

fn other_form(kind: FormKind) -> FormKind {
    match kind {
        FormKind::TraceForm => FormKind::KillingForm,
        FormKind::KillingForm => FormKind::TraceForm,
    }
}

/// Jacobi identity, form invariance under both forms, Killing = 2n·trace,
/// `ad` as a homomorphism and `exp` on commuting pairs.
pub fn structure(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let n = ctx.n;
    let other = match LieContext::with_tolerances(n, other_form(ctx.form_kind), ctx.tolerances.clone()) {
        Ok(c) => c,
        Err(e) => return vec![CheckRecord::error("structure", "sl_n structure", e.to_string())],
    };
    let tol = &ctx.tolerances;
    let rows: Vec<Result<[f64; 6]>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_STRUCTURE, i);
        let x = sample_generic(n, &mut rng);
        let y = sample_generic(n, &mut rng);
        let z = sample_generic(n, &mut rng);
        let g = sample_group(n, &mut rng, 1.0);
        let (nx, ny, nz) = (frobenius(&x), frobenius(&y), frobenius(&z));

        let jac = bracket(&x, &bracket(&y, &z)?)? + bracket(&y, &bracket(&z, &x)?)? + bracket(&z, &bracket(&x, &y)?)?;
        let jacobi = frobenius(&jac) / (nx * ny * nz);

        let mut invariance: f64 = 0.0;
        for c in [ctx, &other] {
            let inf = c.pair(&commutator(&z, &x), &y) + c.pair(&x, &commutator(&z, &y));
            invariance = invariance.max(inf.norm() / (c.form_scale() * nx * ny * nz));
            let gx = adjoint_action(&g, &x)?;
            let gy = adjoint_action(&g, &y)?;
            let global = (c.pair(&gx, &gy) - c.pair(&x, &y)).norm();
            let scale = c.form_scale() * (frobenius(&gx) * frobenius(&gy)).max(nx * ny);
            invariance = invariance.max(global / scale);
        }

        let two_n = 2.0 * n as f64;
        let killing = (ctx.killing_pair(&x, &y) - ctx.trace_pair(&x, &y) * cr(two_n)).norm() / (two_n * nx * ny);

        let adx = ctx.ad_matrix(&x);
        let ady = ctx.ad_matrix(&y);
        let hom = frobenius(&(ctx.ad_matrix(&commutator(&x, &y)) - commutator(&adx, &ady)))
            / (frobenius(&adx) * frobenius(&ady));

        let a = diagonal_traceless(n, &mut rng);
        let b = diagonal_traceless(n, &mut rng);
        let eab = group_exp(&(&a + &b));
        let exp_defect = frobenius(&(&eab - group_exp(&a) * group_exp(&b))) / frobenius(&eab);

        let det = (g.determinant() - cr(1.0)).norm();
        Ok([jacobi, invariance, killing, hom, exp_defect, det])
    });
    let column = |k: usize| rows.iter().map(|r| r.as_ref().map(|v| v[k]).map_err(clone_err)).collect::<Vec<_>>();
    vec![
        max_record("jacobi", "Jacobi identity in sl_n", column(0), Comparison::AtMost(tol.jacobi)),
        max_record(
            "form_invariance",
            "trace and Killing forms are ad- and Ad-invariant",
            column(1),
            Comparison::AtMost(tol.invariance),
        ),
        max_record("killing_trace", "Killing form equals 2n times the trace form", column(2), Comparison::AtMost(tol.killing)),
        max_record("ad_homomorphism", "ad is a Lie algebra homomorphism", column(3), Comparison::AtMost(tol.jacobi)),
        max_record("exp_homomorphism", "exp(a+b) = exp(a)exp(b) for commuting a, b", column(4), Comparison::AtMost(tol.exp)),
        max_record("group_det", "sampled group elements lie in SL_n", column(5), Comparison::AtMost(tol.det)),
        CheckRecord::new(
            "basis_dimension",
            "dim sl_n = n^2 - 1",
            ctx.basis.len() as f64,
            Comparison::Equals((n * n - 1) as f64),
        ),
    ]
}

fn diagonal_traceless<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut d = CMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = gaussian_complex(rng);
    }
    let shift = trace(&d) / cr(n as f64);
    for i in 0..n {
        d[(i, i)] -= shift;
    }
    d
}

fn clone_err(e: &Error) -> Error {
    Error::Numerical(e.to_string())
}

/// A slice point whose coefficients, measured against unit-norm slice
/// directions, form a vector of norm at most `radius`.
fn slice_sample<R: Rng + ?Sized>(ps: &PhaseSpace, rng: &mut R, radius: f64) -> CVector {
    let raw = CVector::from_iterator(ps.ctx.rank, (0..ps.ctx.rank).map(|_| gaussian_complex(rng)));
    let r = radius * rng.random::<f64>();
    let unit = &raw / cr(raw.norm());
    CVector::from_iterator(
        ps.ctx.rank,
        unit.iter()
            .zip(&ps.slice.basis)
            .map(|(u, b)| u * cr(r / frobenius(b))),
    )
}

/// Slice regularity and transversality, Kostant-section residuals and
/// multistart agreement, and conjugation onto the orbit.
pub fn kostant(ps: &PhaseSpace, seed: u64, slice_points: usize, targets: usize, starts: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let tol = &ctx.tolerances;
    let mut out = vec![CheckRecord::new(
        "sl2_triple",
        "principal sl2-triple relations",
        principal_triple(ctx).relation_residual(),
        Comparison::AtMost(tol.jacobi),
    )];

    let slice_rows: Vec<Result<(bool, bool, f64)>> = par_map(slice_points, |i| {
        let mut rng = rng_for(seed, SALT_SLICE, i);
        let c = slice_sample(ps, &mut rng, 10.0);
        let x = ps.slice.point(&c);
        let cls = classify(ctx, &x, tol.rank)?;
        let transversal = transversality_rank(ctx, &ps.slice, &x) == ctx.dim;
        Ok((cls.is_regular, transversal, ps.slice.membership_residual(&x) / frobenius(&x).max(1.0)))
    });
    let mut irregular = 0;
    let mut non_transversal = 0;
    let mut membership = Vec::new();
    let mut errors = Vec::new();
    for r in slice_rows {
        match r {
            Ok((reg, tr, m)) => {
                irregular += usize::from(!reg);
                non_transversal += usize::from(!tr);
                membership.push(Ok(m));
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    if let Some(e) = errors.first() {
        out.push(CheckRecord::error(
            "slice_regularity",
            "every slice point is regular",
            format!("{} of {slice_points} classifications failed: {e}", errors.len()),
        ));
    } else {
        out.push(count_record("slice_regularity", "every slice point is regular", irregular, slice_points));
        out.push(count_record(
            "transversality",
            "slice tangent plus orbit tangent spans sl_n",
            non_transversal,
            slice_points,
        ));
        out.push(max_record(
            "slice_membership",
            "slice points lie in xi + ker ad(eta)",
            membership,
            Comparison::AtMost(tol.jacobi),
        ));
    }

    let solver = KostantSolver::new(ctx, &ps.slice, &ps.inv);
    let rows: Vec<Result<[f64; 3]>> = par_map(targets, |i| {
        let mut rng = rng_for(seed, SALT_KOSTANT, i);
        let x = sample_regular_semisimple(ctx, &mut rng);
        let target = ps.inv.values(&x);
        let base = solver.solve(&target)?;
        let residual = base.residual / (1.0 + target.norm());
        let radius = target.norm().max(1.0);
        let mut agreement: f64 = 0.0;
        for _ in 1..starts {
            let other = solver.solve_from(solver.random_start(&mut rng, radius), &target)?;
            agreement = agreement.max((&other.coords - &base.coords).norm() / base.coords.norm().max(1.0));
        }
        let p = point_over(ps, &x)?;
        let conj = frobenius(&(ps.phi(&p) - &x)) / frobenius(&x).max(1.0);
        Ok([residual, agreement, conj])
    });
    let column = |k: usize| rows.iter().map(|r| r.as_ref().map(|v| v[k]).map_err(clone_err)).collect::<Vec<_>>();
    out.push(max_record(
        "kostant_residual",
        "the Kostant section meets each regular orbit",
        column(0),
        Comparison::AtMost(tol.kostant),
    ));
    out.push(max_record(
        "kostant_agreement",
        "the slice meets each regular orbit exactly once",
        column(1),
        Comparison::AtMost(tol.agreement),
    ));
    out.push(max_record(
        "orbit_conjugation",
        "conjugating the slice point recovers the target",
        column(2),
        Comparison::AtMost(tol.conjugator),
    ));
    out
}

/// `dΦ` has full rank `n²-1` and `Φ` is `G`-equivariant.
pub fn submersion(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let rows: Vec<(usize, f64)> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_SUBMERSION, i);
        let p = ps.random_point(&mut rng);
        let h = sample_group(ctx.n, &mut rng, 1.0);
        let rank = ps.d_phi_rank(&p);
        let equiv = match ps.act(&h, &p) {
            Ok(q) => {
                let want = adjoint_action(&h, &ps.phi(&p)).expect("square matrices");
                frobenius(&(ps.phi(&q) - &want)) / frobenius(&want).max(1.0)
            }
            Err(_) => f64::NAN,
        };
        (rank, equiv)
    });
    let deficient = rows.iter().filter(|r| r.0 != ctx.dim).count();
    vec![
        count_record("d_phi_rank", "Phi is a submersion", deficient, count),
        max_record(
            "equivariance",
            "Phi intertwines the action with Ad",
            rows.iter().map(|r| Ok(r.1)).collect(),
            Comparison::AtMost(ctx.tolerances.moment),
        ),
    ]
}

/// Images of `Φ` at random phase points are regular.
pub fn image_regularity(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let cert = ps.ais_certificate(&mut rng_for(seed, SALT_IMAGE, 0), count);
    vec![
        count_record("image_regularity", "Phi takes values in the regular locus", cert.regularity_failures, count),
        count_record("image_classification", "Phi images classify cleanly", cert.classification_errors, count),
    ]
}

/// Hamiltonian-field brackets of pulled-back linear and quadratic functions
/// agree with the Lie-Poisson bracket downstairs.
pub fn poisson_morphism(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let results: Vec<Result<f64>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_POISSON, i);
        let p = ps.random_point(&mut rng);
        let mut make = |quadratic: bool| -> Arc<dyn AlgebraFunction> {
            let a = sample_generic(ctx.n, &mut rng);
            if quadratic {
                Arc::new(Quadratic { a, b: sample_generic(ctx.n, &mut rng) })
            } else {
                Arc::new(Linear::new(a))
            }
        };
        let f = make(i % 2 == 1);
        let h = make((i / 2) % 2 == 1);
        Ok(ps.verify_poisson_morphism(&p, &f, &h)?.scaled)
    });
    vec![max_record(
        "poisson_morphism",
        "Phi is a Poisson morphism",
        results,
        Comparison::AtMost(ctx.tolerances.bracket),
    )]
}

/// The field of `pair(Φ, y)` generates the action of `y`.
pub fn moment_map(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let results: Vec<Result<f64>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_MOMENT, i);
        let p = ps.random_point(&mut rng);
        let y = sample_generic(ps.ctx.n, &mut rng);
        Ok(ps.verify_moment_map(&p, &y)?.scaled)
    });
    vec![max_record(
        "moment_map",
        "Phi is a moment map for the G-action",
        results,
        Comparison::AtMost(ps.ctx.tolerances.moment),
    )]
}

/// Observable differentials agree with central finite differences.
pub fn observables(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let results: Vec<Result<f64>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_OBSERVABLES, i);
        let p = ps.random_point(&mut rng);
        let q: ObservableRef = Arc::new(Pullback::of(Quadratic {
            a: sample_generic(ctx.n, &mut rng),
            b: sample_generic(ctx.n, &mut rng),
        }));
        let s: ObservableRef = Arc::new(SliceCoordinate(i % ctx.rank));
        let list: Vec<ObservableRef> = vec![q.clone(), s.clone(), Arc::new(Product(q, s))];
        let v = ps.random_tangent(&mut rng);
        let mut worst: f64 = 0.0;
        for o in &list {
            let d = o.differential(ps, &p);
            let exact: C64 = d.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            let fd = finite_difference(ps, o.as_ref(), &p, &v, 1e-5);
            let scale = (d.norm() * v.norm()).max(1.0);
            worst = worst.max((exact - fd).norm() / scale);
        }
        Ok(worst)
    });
    vec![max_record(
        "observable_differentials",
        "analytic differentials match finite differences",
        results,
        Comparison::AtMost(ctx.tolerances.fd),
    )]
}

/// Fibres over regular points are isotropic of dimension `rank`, and
/// centralizer translates stay in the fibre.
pub fn isotropy(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let rows: Vec<Result<[f64; 3]>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_ISOTROPY, i);
        let x = sample_generic(ctx.n, &mut rng);
        let report = ps.fiber_report(&x)?;
        let p = point_over(ps, &x)?;
        let mut a = CMatrix::zeros(ctx.n, ctx.n);
        for v in &report.centralizer.vectors {
            a += v * gaussian_complex(&mut rng);
        }
        let moved = ps.point_unchecked(group_exp(&a) * &p.g, p.coords.clone());
        let membership = frobenius(&(ps.phi(&moved) - &x)) / frobenius(&x).max(1.0);
        Ok([report.isotropy_scaled, (report.fiber_dim as f64 - ctx.rank as f64).abs(), membership])
    });
    let column = |k: usize| rows.iter().map(|r| r.as_ref().map(|v| v[k]).map_err(clone_err)).collect::<Vec<_>>();
    vec![
        max_record("isotropy", "fibres of Phi are isotropic", column(0), Comparison::AtMost(ctx.tolerances.isotropy)),
        max_record("fiber_dimension", "fibres over regular points have dimension rank", column(1), Comparison::Equals(0.0)),
        max_record(
            "fiber_membership",
            "the centralizer acts along the fibre",
            column(2),
            Comparison::AtMost(ctx.tolerances.conjugator),
        ),
    ]
}

/// `ω` is antisymmetric, nondegenerate and closed.
pub fn symplectic_form(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let tol = &ctx.tolerances;
    let rows: Vec<(f64, f64, bool, f64)> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_FORM, i);
        let p = ps.random_point(&mut rng);
        let nd = ps.nondegeneracy(&p);
        let closed = if i < 20 {
            let mut unit = || {
                let v = ps.random_tangent(&mut rng);
                &v / cr(v.norm())
            };
            let (u, v, w) = (unit(), unit(), unit());
            ps.closedness_residual(&p, &u, &v, &w, 1e-4).norm() / frobenius(&p.x).max(1.0)
        } else {
            0.0
        };
        (nd.antisymmetry, nd.min_singular_value, nd.flagged, closed)
    });
    let min_sv = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    vec![
        max_record(
            "omega_antisymmetry",
            "the restricted form is antisymmetric",
            rows.iter().map(|r| Ok(r.0)).collect(),
            Comparison::AtMost(tol.antisymmetry),
        ),
        count_record(
            "omega_nondegeneracy",
            "the restricted form is nondegenerate",
            rows.iter().filter(|r| r.2).count(),
            count,
        ),
        CheckRecord::new(
            "omega_min_singular_value",
            "the restricted form is nondegenerate",
            min_sv,
            Comparison::AtLeast(tol.nondegeneracy),
        ),
        max_record(
            "omega_closedness",
            "the restricted form is closed",
            rows.iter().map(|r| Ok(r.3)).collect(),
            Comparison::AtMost(tol.closedness),
        ),
    ]
}

/// Torus fibres over regular semisimple points; the nilpotent fibre over `-ξ`.
pub fn fibers(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let rows: Vec<Result<bool>> = par_map(count, |i| {
        let mut rng = rng_for(seed, SALT_FIBERS, i);
        let x = sample_regular_semisimple(ctx, &mut rng);
        let r = ps.fiber_report(&x)?;
        Ok(r.kind == FiberKind::Torus && r.fiber_dim == ctx.rank && r.component_count_theoretical == ComponentCount::Known(1))
    });
    let mut out = Vec::new();
    match rows.iter().position(|r| r.is_err()) {
        Some(k) => out.push(CheckRecord::error(
            "torus_fibers",
            "fibres over regular semisimple points are tori",
            rows[k].as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        )),
        None => out.push(count_record(
            "torus_fibers",
            "fibres over regular semisimple points are tori",
            rows.iter().filter(|r| !matches!(r, Ok(true))).count(),
            count,
        )),
    }
    let minus_xi = -&ps.slice.triple.xi;
    match ps.fiber_report(&minus_xi) {
        Ok(r) => {
            let ok = r.kind == FiberKind::NilpotentType
                && r.fiber_dim == ctx.rank
                && r.component_count_theoretical == ComponentCount::Known(ctx.n);
            out.push(
                CheckRecord::new(
                    "nilpotent_fiber",
                    "the fibre over -xi has n components",
                    f64::from(u8::from(!ok)),
                    Comparison::Equals(0.0),
                )
                .with_detail(format!(
                    "kind {:?}, dim {}, components {:?}",
                    r.kind, r.fiber_dim, r.component_count_theoretical
                )),
            );
        }
        Err(e) => out.push(CheckRecord::error("nilpotent_fiber", "the fibre over -xi has n components", e.to_string())),
    }
    out
}

/// The dimension identity and regularity of sampled images.
pub fn ais(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let cert = ps.ais_certificate(&mut rng_for(seed, SALT_AIS, 0), count);
    vec![
        CheckRecord::new(
            "ais_dimension",
            "dim X = dim G + rank G",
            cert.phase_space_dim as f64,
            Comparison::Equals((cert.group_dim + cert.rank) as f64),
        ),
        CheckRecord::new(
            "ais_certificate",
            "Phi is an abstract integrable system",
            f64::from(u8::from(!cert.pass)),
            Comparison::Equals(0.0),
        )
        .with_detail(format!(
            "{} samples, {} irregular, {} unclassified",
            cert.samples, cert.regularity_failures, cert.classification_errors
        )),
    ]
}

/// The two families used by the system suites.
pub fn sample_systems(ps: &PhaseSpace, seed: u64, include_constants: bool) -> Result<(IntegrableSystem, IntegrableSystem)> {
    let mut rng = rng_for(seed, SALT_SYSTEMS, 0);
    let probe = sample_regular_semisimple(&ps.ctx, &mut rng);
    let beta = sample_regular_semisimple(&ps.ctx, &mut rng);
    Ok((build_invariant_pullback(ps, &probe)?, build_mf(ps, &beta, include_constants)?))
}

/// Exact function counts of both systems.
pub fn system_counts(ps: &PhaseSpace, seed: u64) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let (ip, mf) = match sample_systems(ps, seed, false) {
        Ok(s) => s,
        Err(e) => return vec![CheckRecord::error("system_counts", "system sizes", e.to_string())],
    };
    let mf_c = match mf.beta.as_ref().map(|b| build_mf(ps, b, true)) {
        Some(Ok(s)) => s,
        Some(Err(e)) => return vec![CheckRecord::error("system_counts", "system sizes", e.to_string())],
        None => return vec![CheckRecord::error("system_counts", "system sizes", "missing shift")],
    };
    let half = (ctx.dim + ctx.rank) / 2;
    vec![
        CheckRecord::new(
            "pullback_count",
            "the pullback system has n^2 - 1 functions",
            ip.count() as f64,
            Comparison::Equals(ctx.dim as f64),
        ),
        CheckRecord::new(
            "pullback_declared_rank",
            "the pullback system pulls back n - 1 invariants",
            ip.declared_rank as f64,
            Comparison::Equals(ctx.rank as f64),
        ),
        CheckRecord::new(
            "mf_count",
            "the argument-shift family has (n^2 + n - 2)/2 members",
            mf.count() as f64,
            Comparison::Equals(half as f64),
        ),
        CheckRecord::new(
            "mf_count_with_constants",
            "constant top shifts add one function per invariant",
            mf_c.count() as f64,
            Comparison::Equals((half + ctx.rank) as f64),
        ),
    ]
}

fn random_points(ps: &PhaseSpace, seed: u64, salt: u64, count: usize) -> Vec<crate::symplectic::PhasePoint> {
    par_map(count, |i| ps.random_point(&mut rng_for(seed, salt, i)))
}

/// Both bracket engines on both systems.
pub fn commutativity(ps: &PhaseSpace, seed: u64, count: usize, include_constants: bool) -> Vec<CheckRecord> {
    let tol = ps.ctx.tolerances.bracket;
    let (ip, mf) = match sample_systems(ps, seed, include_constants) {
        Ok(s) => s,
        Err(e) => return vec![CheckRecord::error("commutativity", "system construction", e.to_string())],
    };
    let points = random_points(ps, seed, SALT_COMMUTATIVITY, count);
    let mut out = Vec::new();
    for (tag, sys, anchor) in [
        ("pullback", &ip, "pulled-back invariants Poisson-commute with the pullback system"),
        ("mf", &mf, "argument-shift polynomials Poisson-commute"),
    ] {
        let r = verify_commutativity(ps, sys, &points);
        if let Some(e) = r.errors.first() {
            out.push(CheckRecord::error(
                format!("{tag}_commutativity"),
                anchor,
                format!("{} of {count} points failed: {e}", r.errors.len()),
            ));
            continue;
        }
        let detail = format!("{count} points, {} pairs each", r.pairs_per_point);
        out.push(
            CheckRecord::new(format!("{tag}_bracket_upstairs"), anchor, r.max_upstairs_scaled, Comparison::AtMost(tol))
                .with_detail(detail.clone()),
        );
        out.push(
            CheckRecord::new(format!("{tag}_bracket_downstairs"), anchor, r.max_downstairs_scaled, Comparison::AtMost(tol))
                .with_detail(detail),
        );
    }
    out
}

/// Full rank at generic points, rank drop at constructed degenerate points,
/// and the deficit an appended constant produces.
pub fn independence(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let (ip, mf) = match sample_systems(ps, seed, false) {
        Ok(s) => s,
        Err(e) => return vec![CheckRecord::error("independence", "system construction", e.to_string())],
    };
    let points = random_points(ps, seed, SALT_INDEPENDENCE, count);
    let mut out = Vec::new();
    let mut rng = rng_for(seed, SALT_INDEPENDENCE, count);
    for (tag, sys) in [("pullback", &ip), ("mf", &mf)] {
        let r = verify_independence(ps, sys, &points);
        out.push(
            CheckRecord::new(
                format!("{tag}_independence"),
                "the functions are independent on an open dense set",
                r.full_rank_fraction,
                Comparison::AtLeast(ctx.tolerances.independence),
            )
            .with_detail(format!(
                "{} points, min singular value {:.3e}, median {:.3e}",
                r.points, r.min_singular_value[0], r.min_singular_value[2]
            )),
        );
        let x0 = sample_generic(ctx.n, &mut rng);
        let d = sample_generic(ctx.n, &mut rng);
        let name = format!("{tag}_degenerate_rank_drop");
        match degenerate_point(ps, sys, &x0, &d) {
            Ok(p) => {
                let (rank, _) = differential_rank(ps, sys, &p);
                out.push(
                    CheckRecord::new(
                        name,
                        "independence fails off the open dense set",
                        (sys.count() - rank) as f64,
                        Comparison::AtLeast(1.0),
                    )
                    .with_detail(format!("rank {rank} of {}", sys.count())),
                );
            }
            Err(e) => out.push(CheckRecord::error(name, "independence fails off the open dense set", e.to_string())),
        }
    }
    let padded = with_constant(&mf);
    let deficits: Vec<usize> = points
        .iter()
        .take(10)
        .map(|p| padded.count() - differential_rank(ps, &padded, p).0)
        .collect();
    out.push(CheckRecord::new(
        "constant_deficit",
        "a constant member lowers the rank by one",
        deficits.iter().copied().max().unwrap_or(0) as f64,
        Comparison::Equals(1.0),
    ));
    out
}

/// `diag(1, 1, 2, ..., n-2, -s)` with trace zero: semisimple, not regular.
pub fn repeated_eigenvalue_point(n: usize) -> CMatrix {
    let mut d = CMatrix::zeros(n, n);
    let mut sum = 0.0;
    for i in 0..n - 1 {
        let v = if i < 2 { 1.0 } else { i as f64 };
        d[(i, i)] = cr(v);
        sum += v;
    }
    d[(n - 1, n - 1)] = cr(-sum);
    d
}

/// Rank of the invariant gradients tracks regularity.
pub fn locus(ps: &PhaseSpace, seed: u64, count: usize) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let mut points: Vec<CMatrix> = par_map(count, |i| sample_regular_semisimple(ctx, &mut rng_for(seed, SALT_LOCUS, i)));
    points.push(ps.slice.triple.xi.clone());
    let zero = CMatrix::zeros(ctx.n, ctx.n);
    points.push(zero.clone());
    let mut special = vec![("zero", zero)];
    if ctx.n >= 3 {
        let d = repeated_eigenvalue_point(ctx.n);
        points.push(d.clone());
        special.push(("repeated_eigenvalue", d));
    }
    let report = regularity_locus_probe(ctx, ps, &points);
    let mut out = vec![
        CheckRecord::new(
            "locus_consistency",
            "gradients of the invariants have full rank exactly at regular points",
            report.inconsistent as f64,
            Comparison::Equals(0.0),
        )
        .with_detail(format!(
            "{} regular, {} non-regular, {} excluded",
            report.regular_rows, report.non_regular_rows, report.excluded
        )),
        CheckRecord::new("locus_excluded", "every probe point classifies", report.excluded as f64, Comparison::Equals(0.0)),
    ];
    for (name, x) in special {
        let r = crate::slodowy::invariant_gradient_rank(ctx, &ps.inv, &x);
        out.push(CheckRecord::new(
            format!("locus_rank_drop_{name}"),
            "gradients of the invariants drop rank off the regular locus",
            r as f64,
            Comparison::AtMost(ctx.rank as f64 - 1.0),
        ));
    }
    out
}

/// Integration parameters for [`dynamics`].
#[derive(Debug, Clone, Copy)]
pub struct DynamicsPlan {
    pub initial_points: usize,
    pub h: f64,
    pub horizon: f64,
    pub convergence_seeds: usize,
    pub convergence_h: f64,
    pub convergence_horizon: f64,
}

impl Default for DynamicsPlan {
    fn default() -> Self {
        Self {
            initial_points: 2,
            h: 1e-3,
            horizon: 1.0,
            convergence_seeds: 3,
            convergence_h: 0.025,
            convergence_horizon: 0.5,
        }
    }
}

/// Conservation along every argument-shift flow, drift of linear coordinate
/// functions as a negative control, and the order of the integrator.
pub fn dynamics(ps: &PhaseSpace, seed: u64, plan: DynamicsPlan) -> Vec<CheckRecord> {
    let ctx = &ps.ctx;
    let tol = &ctx.tolerances;
    let mf = match sample_systems(ps, seed, false) {
        Ok((_, mf)) => mf,
        Err(e) => return vec![CheckRecord::error("dynamics", "system construction", e.to_string())],
    };
    let controls: Vec<ObservableRef> = (0..ctx.dim)
        .map(|j| Arc::new(Pullback::of(Linear::named(ctx.dual_basis[j].clone(), format!("theta_{j}")))) as ObservableRef)
        .collect();
    // Shifts with j = 0 are Casimirs: their flows fix Phi and move no control.
    let moving: Vec<usize> = mf
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.label().starts_with("d_beta^0 "))
        .map(|(i, _)| i)
        .collect();
    let jobs: Vec<(usize, usize)> = (0..plan.initial_points)
        .flat_map(|k| (0..mf.count()).map(move |i| (k, i)))
        .collect();
    let opts = FlowOptions { error_limit: Some(tol.step_error) };
    let rows: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(k, idx)| {
            let p0 = ps.random_point(&mut rng_for(seed, SALT_DYNAMICS, k));
            let traj = integrate(ps, &mf, idx, &p0, plan.h, plan.horizon, opts)?;
            let conserved = mf
                .observables
                .iter()
                .map(|o| drift_of(ps, &traj, o.as_ref()))
                .fold(0.0, f64::max);
            let control = controls
                .iter()
                .map(|o| drift_of(ps, &traj, o.as_ref()))
                .fold(0.0, f64::max);
            Ok((conserved, control))
        })
        .collect();
    let mut out = vec![max_record(
        "mf_conservation",
        "argument-shift flows preserve every member of the family",
        rows.iter().map(|r| r.as_ref().map(|v| v.0).map_err(clone_err)).collect(),
        Comparison::AtMost(tol.conservation),
    )];
    let control: Vec<f64> = rows
        .iter()
        .zip(&jobs)
        .filter(|(_, (_, idx))| moving.contains(idx))
        .filter_map(|(r, _)| r.as_ref().ok().map(|v| v.1))
        .collect();
    if control.is_empty() {
        out.push(CheckRecord::error("negative_control", "non-commuting observables move", "no flow completed"));
    } else {
        out.push(
            CheckRecord::new(
                "negative_control",
                "non-commuting observables move",
                control.iter().copied().fold(f64::INFINITY, f64::min),
                Comparison::AtLeast(1e-2),
            )
            .with_detail(format!("smallest coordinate drift over {} non-Casimir flows", control.len())),
        );
    }

    let ham = Product(mf.observables[0].clone(), mf.observables[1].clone());
    for s in 0..plan.convergence_seeds {
        let name = format!("convergence_order_{s}");
        let anchor = "the Lie group integrator has order four";
        let p0 = ps.random_point(&mut rng_for(seed ^ 0xc0ffee, SALT_DYNAMICS, s));
        let exact = closed_form_product_flow(
            ps,
            &p0,
            mf.functions[0].as_ref(),
            mf.functions[1].as_ref(),
            plan.convergence_horizon,
        );
        match convergence_study(ps, &ham, &p0, &exact, plan.convergence_h, plan.convergence_horizon) {
            Ok(st) => out.push(
                CheckRecord::new(name, anchor, st.ratio, Comparison::Between(12.0, 20.0))
                    .with_detail(format!("errors {:.3e} and {:.3e}", st.error_h, st.error_half_h)),
            ),
            Err(e) => out.push(CheckRecord::error(name, anchor, e.to_string())),
        }
    }
    out
}

/// Every static suite at sizes derived from `cfg.samples`.
pub fn verify_all(cfg: &RunConfig) -> Result<VerificationReport> {
    let ps = cfg.phase_space()?;
    let c = Counts::from_samples(cfg.samples);
    let seed = cfg.seed;
    let mut records = Vec::new();
    records.extend(structure(&ps, seed, c.structure));
    records.extend(kostant(&ps, seed, c.slice_points, c.kostant_targets, c.kostant_starts));
    records.extend(submersion(&ps, seed, c.d_phi_points));
    records.extend(image_regularity(&ps, seed, c.image_points));
    records.extend(poisson_morphism(&ps, seed, c.poisson_triples));
    records.extend(moment_map(&ps, seed, c.moment_pairs));
    records.extend(observables(&ps, seed, c.moment_pairs));
    records.extend(isotropy(&ps, seed, c.isotropy_points));
    records.extend(symplectic_form(&ps, seed, c.form_points));
    records.extend(system_counts(&ps, seed));
    records.extend(commutativity(&ps, seed, c.commutativity_points, cfg.mf_include_constants));
    records.extend(independence(&ps, seed, c.independence_points));
    records.extend(locus(&ps, seed, c.fiber_samples));
    records.extend(fibers(&ps, seed, c.fiber_samples));
    records.extend(ais(&ps, seed, c.ais_samples));
    Ok(VerificationReport::new("verify-all", environment(cfg), cfg.tolerances.clone(), records))
}

pub fn environment(cfg: &RunConfig) -> Environment {
    Environment {
        seed: cfg.seed,
        n: cfg.n,
        form: cfg.form,
        samples: cfg.samples,
        version: crate::report::version(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, form: FormKind) -> PhaseSpace {
        PhaseSpace::new(LieContext::new(n, form).unwrap()).unwrap()
    }

    fn assert_all_pass(records: &[CheckRecord]) {
        for r in records {
            assert!(r.passed(), "{}", r.summary_line());
        }
    }

    #[test]
    fn small_suites_pass_n2() {
        for form in [FormKind::TraceForm, FormKind::KillingForm] {
            let ps = space(2, form);
            assert_all_pass(&structure(&ps, 1, 10));
            assert_all_pass(&kostant(&ps, 1, 20, 5, 3));
            assert_all_pass(&submersion(&ps, 1, 10));
            assert_all_pass(&poisson_morphism(&ps, 1, 8));
            assert_all_pass(&moment_map(&ps, 1, 5));
            assert_all_pass(&observables(&ps, 1, 5));
            assert_all_pass(&isotropy(&ps, 1, 5));
            assert_all_pass(&symplectic_form(&ps, 1, 5));
            assert_all_pass(&system_counts(&ps, 1));
            assert_all_pass(&fibers(&ps, 1, 5));
            assert_all_pass(&ais(&ps, 1, 20));
        }
    }

    #[test]
    fn system_suites_pass_n3() {
        let ps = space(3, FormKind::TraceForm);
        assert_all_pass(&commutativity(&ps, 2, 5, true));
        assert_all_pass(&independence(&ps, 2, 10));
        assert_all_pass(&locus(&ps, 2, 5));
    }

    #[test]
    fn tight_tolerance_fails() {
        let tol = crate::lie::Tolerances {
            bracket: 1e-30,
            ..Default::default()
        };
        let ps = PhaseSpace::new(LieContext::with_tolerances(2, FormKind::TraceForm, tol).unwrap()).unwrap();
        let r = poisson_morphism(&ps, 1, 8);
        assert!(!r[0].passed());
    }

    #[test]
    fn repeated_eigenvalue_point_is_traceless_and_not_regular() {
        let ctx = LieContext::new(4, FormKind::TraceForm).unwrap();
        let d = repeated_eigenvalue_point(4);
        assert_eq!(trace(&d), cr(0.0));
        assert!(!classify(&ctx, &d, 1e-8).unwrap().is_regular);
    }
}
