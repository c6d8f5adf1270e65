//! Hamiltonian flows on `G × S_reg` by a Runge–Kutta–Munthe-Kaas scheme of
//! order four, and conservation measurements along them.
//!
//! The group component moves by `g ← exp(u) g`, the slice coordinates by the
//! classical RK4 update, so states stay on `G × S_reg` exactly.

use serde::Serialize;

use crate::linalg::{commutator, cr, frobenius, CMatrix, CVector, C64};
use crate::lie::group_exp;
use crate::observable::{AlgebraFunction, Observable};
use crate::symplectic::{PhasePoint, PhaseSpace};
use crate::systems::IntegrableSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Reject a step when the step-doubling estimate exceeds this; `None`
    /// disables the check.
    pub error_limit: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { error_limit: Some(1e-6) }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: PhasePoint,
    pub hamiltonian_index: usize,
    pub h: f64,
    pub horizon: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub max_error_estimate: f64,
    pub max_det_deviation: f64,
}

impl Trajectory {
    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("at least the initial state")
    }
}

/// `dexp⁻¹_u(y)` truncated after the `[u,[u,y]]` term, enough for order four.
pub fn dexpinv(u: &CMatrix, y: &CMatrix) -> CMatrix {
    let uy = commutator(u, y);
    y - &uy * cr(0.5) + commutator(u, &uy) * cr(1.0 / 12.0)
}

/// States with `‖g‖ + ‖c‖` above this abort the integration.
pub const GROWTH_LIMIT: f64 = 1e8;

struct Stepper<'a> {
    ps: &'a PhaseSpace,
    hamiltonian: &'a dyn Observable,
}

impl Stepper<'_> {
    fn field(&self, g: &CMatrix, c: &CVector) -> Result<(CMatrix, CVector)> {
        let size = frobenius(g) + c.norm();
        if !(size <= GROWTH_LIMIT) {
            return Err(Error::Numerical(format!(
                "trajectory left the bounded region (|g| + |c| = {size:.3e})"
            )));
        }
        let p = self.ps.point_unchecked(g.clone(), c.clone());
        let v = self.ps.frame(&p)?.field(&self.hamiltonian.differential(self.ps, &p))?;
        let t = self.ps.split(&v);
        Ok((t.y, t.z))
    }

    fn step(&self, g: &CMatrix, c: &CVector, h: f64) -> Result<(CMatrix, CVector)> {
        let hc = cr(h);
        let half = cr(h / 2.0);
        let (k1, z1) = self.field(g, c)?;

        let u2 = &k1 * half;
        let (y2, z2) = self.field(&(group_exp(&u2) * g), &(c + &z1 * half))?;
        let k2 = dexpinv(&u2, &y2);

        let u3 = &k2 * half;
        let (y3, z3) = self.field(&(group_exp(&u3) * g), &(c + &z2 * half))?;
        let k3 = dexpinv(&u3, &y3);

        let u4 = &k3 * hc;
        let (y4, z4) = self.field(&(group_exp(&u4) * g), &(c + &z3 * hc))?;
        let k4 = dexpinv(&u4, &y4);

        let sixth = cr(h / 6.0);
        let u = (&k1 + &k2 * cr(2.0) + &k3 * cr(2.0) + &k4) * sixth;
        let dz = (&z1 + &z2 * cr(2.0) + &z3 * cr(2.0) + &z4) * sixth;
        Ok((group_exp(&u) * g, c + dz))
    }
}

/// Integrates the Hamiltonian flow of `system.observables[index]` from `p0`.
pub fn integrate(
    ps: &PhaseSpace,
    system: &IntegrableSystem,
    index: usize,
    p0: &PhasePoint,
    h: f64,
    horizon: f64,
    opts: FlowOptions,
) -> Result<Trajectory> {
    let obs = system
        .observables
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("no observable with index {index}")))?;
    integrate_observable(ps, obs.as_ref(), index, p0, h, horizon, opts)
}

pub fn integrate_observable(
    ps: &PhaseSpace,
    hamiltonian: &dyn Observable,
    index: usize,
    p0: &PhasePoint,
    h: f64,
    horizon: f64,
    opts: FlowOptions,
) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite() && horizon >= h) {
        return Err(Error::InvalidInput(format!(
            "need 0 < h <= T, got h = {h}, T = {horizon}"
        )));
    }
    let stepper = Stepper { ps, hamiltonian };
    let steps = (horizon / h).round() as usize;
    let stride = ((horizon / (100.0 * h)).floor() as usize).max(1);
    let mut g = p0.g.clone();
    let mut c = p0.coords.clone();
    let mut times = vec![0.0];
    let mut states = vec![p0.clone()];
    let mut max_error_estimate: f64 = 0.0;
    let mut max_det_deviation = (p0.g.determinant() - cr(1.0)).norm();
    for s in 1..=steps {
        let (g_full, c_full) = stepper.step(&g, &c, h)?;
        if let Some(limit) = opts.error_limit {
            let (gm, cm) = stepper.step(&g, &c, h / 2.0)?;
            let (g2, c2) = stepper.step(&gm, &cm, h / 2.0)?;
            let est = (frobenius(&(&g_full - &g2)) / frobenius(&g2))
                .max((&c_full - &c2).norm() / (1.0 + c2.norm()));
            max_error_estimate = max_error_estimate.max(est);
            if est > limit {
                return Err(Error::StepRejected {
                    estimate: est,
                    limit,
                    time: s as f64 * h,
                });
            }
        }
        g = g_full;
        c = c_full;
        max_det_deviation = max_det_deviation.max((g.determinant() - cr(1.0)).norm());
        if s % stride == 0 || s == steps {
            times.push(s as f64 * h);
            states.push(ps.point_unchecked(g.clone(), c.clone()));
        }
    }
    Ok(Trajectory {
        initial: p0.clone(),
        hamiltonian_index: index,
        h,
        horizon,
        steps,
        times,
        states,
        max_error_estimate,
        max_det_deviation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub label: String,
    pub drift: f64,
}

/// `max_t |F(p_t) - F(p_0)| / (1 + |F(p_0)|)` for one observable.
pub fn drift_of(ps: &PhaseSpace, traj: &Trajectory, obs: &dyn Observable) -> f64 {
    let f0 = obs.value(ps, &traj.initial);
    traj.states
        .iter()
        .map(|p| (obs.value(ps, p) - f0).norm() / (1.0 + f0.norm()))
        .fold(0.0, f64::max)
}

pub fn conservation_report(ps: &PhaseSpace, traj: &Trajectory, system: &IntegrableSystem) -> Vec<Drift> {
    system
        .observables
        .iter()
        .map(|o| Drift {
            label: o.label(),
            drift: drift_of(ps, traj, o.as_ref()),
        })
        .collect()
}

/// Exact flow of `f ∘ Φ` for complex time `s` when `∇f` is constant along
/// the orbit of `Φ` (linear or invariant `f`): `g ↦ g exp(-s ∇f(Φ))`, `x` fixed.
pub fn closed_form_flow(ps: &PhaseSpace, p: &PhasePoint, f: &dyn AlgebraFunction, s: C64) -> PhasePoint {
    let grad = f.gradient(&ps.ctx, &ps.phi(p));
    ps.point_unchecked(&p.g * group_exp(&(grad * (-s))), p.coords.clone())
}

/// Exact time-`t` flow of `(f_a ∘ Φ)(f_b ∘ Φ)` for two commuting functions
/// of the kind accepted by [`closed_form_flow`]: both factors are conserved,
/// so the flow is the composition of the factor flows at rescaled times.
pub fn closed_form_product_flow(
    ps: &PhaseSpace,
    p0: &PhasePoint,
    fa: &dyn AlgebraFunction,
    fb: &dyn AlgebraFunction,
    t: f64,
) -> PhasePoint {
    let phi = ps.phi(p0);
    let va = fa.value(&ps.ctx, &phi);
    let vb = fb.value(&ps.ctx, &phi);
    let mid = closed_form_flow(ps, p0, fb, va * cr(t));
    closed_form_flow(ps, &mid, fa, vb * cr(t))
}

/// Distance between two phase points: group part relative, slice part absolute.
pub fn state_distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    frobenius(&(&a.g - &b.g)) / frobenius(&b.g) + (&a.coords - &b.coords).norm()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub h: f64,
    pub horizon: f64,
    pub error_h: f64,
    pub error_half_h: f64,
    pub ratio: f64,
}

/// Endpoint errors against a known endpoint at steps `h` and `h/2`.
pub fn convergence_study(
    ps: &PhaseSpace,
    hamiltonian: &dyn Observable,
    p0: &PhasePoint,
    exact: &PhasePoint,
    h: f64,
    horizon: f64,
) -> Result<ConvergenceStudy> {
    let opts = FlowOptions { error_limit: None };
    let a = integrate_observable(ps, hamiltonian, 0, p0, h, horizon, opts)?;
    let b = integrate_observable(ps, hamiltonian, 0, p0, h / 2.0, horizon, opts)?;
    let error_h = state_distance(a.last(), exact);
    let error_half_h = state_distance(b.last(), exact);
    Ok(ConvergenceStudy {
        h,
        horizon,
        error_h,
        error_half_h,
        ratio: error_h / error_half_h,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StateRecord {
    pub t: f64,
    #[serde(with = "crate::json::matrix")]
    pub g: CMatrix,
    #[serde(with = "crate::json::vector")]
    pub coords: CVector,
    pub values: Vec<[f64; 2]>,
}

/// One JSON object per stored state.
pub fn trajectory_jsonl(ps: &PhaseSpace, traj: &Trajectory, system: &IntegrableSystem) -> String {
    let mut out = String::new();
    for (t, p) in traj.times.iter().zip(&traj.states) {
        let values = system
            .observables
            .iter()
            .map(|o| {
                let v: C64 = o.value(ps, p);
                [v.re, v.im]
            })
            .collect();
        let rec = StateRecord {
            t: *t,
            g: p.g.clone(),
            coords: p.coords.clone(),
            values,
        };
        out.push_str(&serde_json::to_string(&rec).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

/// `t` followed by real and imaginary parts of every observable.
pub fn trajectory_csv(ps: &PhaseSpace, traj: &Trajectory, system: &IntegrableSystem) -> String {
    let mut out = String::from("t");
    for i in 0..system.count() {
        out.push_str(&format!(",re_{i},im_{i}"));
    }
    out.push('\n');
    for (t, p) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!("{t}"));
        for o in &system.observables {
            let v = o.value(ps, p);
            out.push_str(&format!(",{:.17e},{:.17e}", v.re, v.im));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{rng_from_seed, sample, FormKind, LieContext, SampleKind};
    use crate::observable::{Constant, Linear, Product, Pullback};
    use crate::systems::build_mf;

    fn space(n: usize) -> PhaseSpace {
        PhaseSpace::new(LieContext::new(n, FormKind::TraceForm).unwrap()).unwrap()
    }

    #[test]
    fn constant_hamiltonian_is_stationary() {
        let ps = space(2);
        let p0 = ps.random_point(&mut rng_from_seed(1));
        let traj = integrate_observable(&ps, &Constant(cr(1.0)), 0, &p0, 0.1, 1.0, FlowOptions::default()).unwrap();
        assert_eq!(state_distance(traj.last(), &p0), 0.0);
    }

    #[test]
    fn moment_map_flow_matches_closed_form() {
        let ps = space(3);
        let p0 = ps.random_point(&mut rng_from_seed(2));
        let y = sample(&ps.ctx, 3, SampleKind::Generic) * cr(0.3);
        let obs = Pullback::of(Linear::new(y.clone()));
        let traj = integrate_observable(&ps, &obs, 0, &p0, 1e-2, 1.0, FlowOptions::default()).unwrap();
        let exact = closed_form_flow(&ps, &p0, &Linear::new(y.clone()), cr(1.0));
        assert!(state_distance(traj.last(), &exact) < 1e-8);
        for (i, p) in traj.states.iter().enumerate() {
            assert!((ps.inv.values(&ps.phi(p)) - ps.inv.values(&ps.phi(&p0))).norm() < 1e-9, "state {i}");
        }
        assert!(traj.max_det_deviation < 1e-10);
    }

    #[test]
    fn mf_flow_conserves_the_family_n2() {
        let ps = space(2);
        let beta = sample(&ps.ctx, 4, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let p0 = ps.random_point(&mut rng_from_seed(5));
        for idx in 0..sys.count() {
            let traj = integrate(&ps, &sys, idx, &p0, 1e-2, 1.0, FlowOptions::default()).unwrap();
            for d in conservation_report(&ps, &traj, &sys) {
                assert!(d.drift <= 1e-6, "{}: {}", d.label, d.drift);
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let ps = space(2);
        let beta = sample(&ps.ctx, 4, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let ham = Product(sys.observables[0].clone(), sys.observables[1].clone());
        for seed in 0..3 {
            let p0 = ps.random_point(&mut rng_from_seed(seed));
            let exact = closed_form_product_flow(&ps, &p0, sys.functions[0].as_ref(), sys.functions[1].as_ref(), 0.5);
            let study = convergence_study(&ps, &ham, &p0, &exact, 0.025, 0.5).unwrap();
            assert!(study.ratio > 12.0 && study.ratio < 20.0, "{study:?}");
        }
    }

    #[test]
    fn linear_member_is_integrated_exactly() {
        let ps = space(2);
        let beta = sample(&ps.ctx, 4, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let p0 = ps.random_point(&mut rng_from_seed(6));
        let exact = closed_form_flow(&ps, &p0, sys.functions[1].as_ref(), cr(1.0));
        let traj = integrate(&ps, &sys, 1, &p0, 0.1, 1.0, FlowOptions::default()).unwrap();
        assert!(state_distance(traj.last(), &exact) < 1e-12);
    }

    #[test]
    fn runaway_flow_is_reported() {
        let ps = space(2);
        let p0 = ps.random_point(&mut rng_from_seed(0));
        let y = ps.ctx.basis[ps.ctx.dim - 1].clone() * cr(40.0);
        let obs = Pullback::of(Linear::new(y));
        let r = integrate_observable(&ps, &obs, 0, &p0, 0.1, 10.0, FlowOptions { error_limit: None });
        assert!(r.is_err());
    }

    #[test]
    fn exports() {
        let ps = space(2);
        let beta = sample(&ps.ctx, 4, SampleKind::RegularSemisimple);
        let sys = build_mf(&ps, &beta, false).unwrap();
        let p0 = ps.random_point(&mut rng_from_seed(7));
        let traj = integrate(&ps, &sys, 1, &p0, 0.05, 0.5, FlowOptions::default()).unwrap();
        let jsonl = trajectory_jsonl(&ps, &traj, &sys);
        assert_eq!(jsonl.lines().count(), traj.states.len());
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["g"]["n"], 2);
        let csv = trajectory_csv(&ps, &traj, &sys);
        assert!(csv.starts_with("t,re_0,im_0,re_1,im_1\n"));
        assert!(integrate(&ps, &sys, 1, &p0, 0.0, 1.0, FlowOptions::default()).is_err());
    }
}
