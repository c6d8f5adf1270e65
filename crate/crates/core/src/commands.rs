//! Report builders behind the CLI subcommands.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::flows::{conservation_report, integrate, trajectory_csv, trajectory_jsonl, Drift, FlowOptions, Trajectory};
use crate::lie::{derive_seed, rng_from_seed, sample_regular_semisimple, Tolerances};
use crate::linalg::CMatrix;
use crate::report::{overall, CheckRecord, Comparison, Environment, Verdict, VerificationReport};
use crate::suites::{environment, verify_all};
use crate::symplectic::{FiberReport, PhaseSpace};
use crate::systems::{
    build_invariant_pullback, build_mf, verify_commutativity, verify_independence, CommutativityReport,
    IndependenceReport, IntegrableSystem, SystemManifest,
};
use crate::{Error, Result};

const SALT_SYSTEM: u64 = 101;
const SALT_POINTS: u64 = 102;
const SALT_FLOW: u64 = 103;

pub fn cmd_verify_all(cfg: &RunConfig) -> Result<VerificationReport> {
    verify_all(cfg)
}

/// The fibre of `Φ` over a regular `x`.
pub fn cmd_fiber(cfg: &RunConfig, x: &CMatrix) -> Result<FiberReport> {
    let ps = cfg.phase_space()?;
    ps.ctx.check_algebra_element(x)?;
    ps.fiber_report(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub suite: String,
    pub environment: Environment,
    pub tolerances: Tolerances,
    pub manifest: SystemManifest,
    pub commutativity: CommutativityReport,
    pub independence: IndependenceSummary,
    pub records: Vec<CheckRecord>,
    pub verdict: Verdict,
}

/// [`IndependenceReport`] without the per-point rank list.
#[derive(Debug, Clone, Serialize)]
pub struct IndependenceSummary {
    pub points: usize,
    pub count: usize,
    pub full_rank_fraction: f64,
    pub min_singular_value: [f64; 3],
    pub failures: Vec<usize>,
}

impl From<IndependenceReport> for IndependenceSummary {
    fn from(r: IndependenceReport) -> Self {
        Self {
            points: r.points,
            count: r.count,
            full_rank_fraction: r.full_rank_fraction,
            min_singular_value: r.min_singular_value,
            failures: r.failures,
        }
    }
}

fn sweep(cfg: &RunConfig, ps: &PhaseSpace, sys: &IntegrableSystem, suite: &str) -> SystemReport {
    let tol = &ps.ctx.tolerances;
    let points: Vec<_> = (0..2 * cfg.samples)
        .map(|i| ps.random_point(&mut rng_from_seed(derive_seed(derive_seed(cfg.seed, SALT_POINTS), i as u64))))
        .collect();
    let comm = verify_commutativity(ps, sys, &points[..cfg.samples]);
    let indep = verify_independence(ps, sys, &points);
    let anchor_c = "the family Poisson-commutes";
    let anchor_i = "the family is functionally independent on an open dense set";
    let mut records = Vec::new();
    if let Some(e) = comm.errors.first() {
        records.push(CheckRecord::error("commutativity", anchor_c, e.clone()));
    } else {
        records.push(CheckRecord::new("bracket_upstairs", anchor_c, comm.max_upstairs_scaled, Comparison::AtMost(tol.bracket)));
        records.push(CheckRecord::new(
            "bracket_downstairs",
            anchor_c,
            comm.max_downstairs_scaled,
            Comparison::AtMost(tol.bracket),
        ));
    }
    records.push(CheckRecord::new(
        "independence",
        anchor_i,
        indep.full_rank_fraction,
        Comparison::AtLeast(tol.independence),
    ));
    let verdict = overall(&records);
    SystemReport {
        suite: suite.into(),
        environment: environment(cfg),
        tolerances: cfg.tolerances.clone(),
        manifest: sys.manifest(ps),
        commutativity: comm,
        independence: indep.into(),
        records,
        verdict,
    }
}

/// The argument-shift family for `beta`, or for a seeded random shift.
pub fn cmd_mf(cfg: &RunConfig, beta: Option<&CMatrix>) -> Result<SystemReport> {
    let ps = cfg.phase_space()?;
    let beta = match beta {
        Some(b) => b.clone(),
        None => sample_regular_semisimple(&ps.ctx, &mut rng_from_seed(derive_seed(cfg.seed, SALT_SYSTEM))),
    };
    let sys = build_mf(&ps, &beta, cfg.mf_include_constants)?;
    Ok(sweep(cfg, &ps, &sys, "mf"))
}

/// The invariant-pullback system built at `probe`, or at a seeded random probe.
pub fn cmd_rank_system(cfg: &RunConfig, probe: Option<&CMatrix>) -> Result<SystemReport> {
    let ps = cfg.phase_space()?;
    let probe = match probe {
        Some(p) => p.clone(),
        None => sample_regular_semisimple(&ps.ctx, &mut rng_from_seed(derive_seed(cfg.seed, SALT_SYSTEM + 1))),
    };
    let sys = build_invariant_pullback(&ps, &probe)?;
    Ok(sweep(cfg, &ps, &sys, "rank-system"))
}

/// Accepts a bare manifest or any report object carrying a `manifest` field.
pub fn parse_manifest(text: &str) -> Result<SystemManifest> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let inner = value.get("manifest").cloned().unwrap_or(value);
    Ok(SystemManifest::deserialize(inner)?)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowRequest {
    /// Hamiltonian to integrate; all members when `None`.
    pub index: Option<usize>,
    pub h: f64,
    pub horizon: f64,
}

impl Default for FlowRequest {
    fn default() -> Self {
        Self {
            index: None,
            h: 1e-3,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowDrifts {
    pub hamiltonian: usize,
    pub label: String,
    pub steps: usize,
    pub max_error_estimate: f64,
    pub max_det_deviation: f64,
    pub drifts: Vec<Drift>,
    pub max_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub suite: String,
    pub environment: Environment,
    pub tolerances: Tolerances,
    pub manifest: SystemManifest,
    pub h: f64,
    pub horizon: f64,
    pub flows: Vec<FlowDrifts>,
    pub records: Vec<CheckRecord>,
    pub verdict: Verdict,
}

pub struct FlowOutput {
    pub report: FlowReport,
    /// The trajectory of the first integrated Hamiltonian, as JSON lines.
    pub trajectory_jsonl: String,
    pub trajectory_csv: String,
}

/// Integrates members of a manifest's system from a seeded initial point and
/// tabulates the drift of every member along each flow.
pub fn cmd_flow(cfg: &RunConfig, manifest: &SystemManifest, req: FlowRequest) -> Result<FlowOutput> {
    let mut cfg = cfg.clone();
    cfg.n = manifest.n;
    cfg.form = manifest.form;
    let ps = cfg.phase_space()?;
    let sys = IntegrableSystem::from_manifest(&ps, manifest)?;
    let indices: Vec<usize> = match req.index {
        Some(i) if i < sys.count() => vec![i],
        Some(i) => return Err(Error::InvalidInput(format!("no Hamiltonian with index {i}"))),
        None => (0..sys.count()).collect(),
    };
    let p0 = ps.random_point(&mut rng_from_seed(derive_seed(cfg.seed, SALT_FLOW)));
    let opts = FlowOptions {
        error_limit: Some(ps.ctx.tolerances.step_error),
    };
    let trajectories: Vec<Trajectory> = indices
        .iter()
        .map(|&i| integrate(&ps, &sys, i, &p0, req.h, req.horizon, opts))
        .collect::<Result<_>>()?;
    let labels = sys.labels();
    let flows: Vec<FlowDrifts> = trajectories
        .iter()
        .map(|t| {
            let drifts = conservation_report(&ps, t, &sys);
            FlowDrifts {
                hamiltonian: t.hamiltonian_index,
                label: labels[t.hamiltonian_index].clone(),
                steps: t.steps,
                max_error_estimate: t.max_error_estimate,
                max_det_deviation: t.max_det_deviation,
                max_drift: drifts.iter().map(|d| d.drift).fold(0.0, f64::max),
                drifts,
            }
        })
        .collect();
    let worst = flows.iter().map(|f| f.max_drift).fold(0.0, f64::max);
    let records = vec![CheckRecord::new(
        "conservation",
        "Hamiltonian flows preserve the commuting family",
        worst,
        Comparison::AtMost(ps.ctx.tolerances.conservation),
    )];
    let verdict = overall(&records);
    let first = &trajectories[0];
    Ok(FlowOutput {
        trajectory_jsonl: trajectory_jsonl(&ps, first, &sys),
        trajectory_csv: trajectory_csv(&ps, first, &sys),
        report: FlowReport {
            suite: "flow".into(),
            environment: environment(&cfg),
            tolerances: cfg.tolerances.clone(),
            manifest: sys.manifest(&ps),
            h: req.h,
            horizon: req.horizon,
            flows,
            records,
            verdict,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Info {
    pub version: String,
    pub n: usize,
    pub form: String,
    pub group_dim: usize,
    pub rank: usize,
    pub phase_space_dim: usize,
    pub invariant_degrees: Vec<usize>,
    pub pullback_count: usize,
    pub mf_count: usize,
    pub tolerances: Tolerances,
}

pub fn cmd_info(cfg: &RunConfig) -> Result<Info> {
    let ps = cfg.phase_space()?;
    let ctx = &ps.ctx;
    Ok(Info {
        version: crate::report::version(),
        n: ctx.n,
        form: ctx.form_kind.as_str().into(),
        group_dim: ctx.dim,
        rank: ctx.rank,
        phase_space_dim: ps.total_dim(),
        invariant_degrees: (0..ctx.rank).map(|k| ps.inv.degree(k)).collect(),
        pullback_count: ctx.dim,
        mf_count: (ctx.dim + ctx.rank) / 2,
        tolerances: cfg.tolerances.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;
    use crate::symplectic::{ComponentCount, FiberKind};

    fn cfg(n: usize) -> RunConfig {
        RunConfig {
            n,
            samples: 10,
            ..RunConfig::default()
        }
    }

    #[test]
    fn fiber_examples() {
        let c = cfg(3);
        let ps = c.phase_space().unwrap();
        let r = cmd_fiber(&c, &(-&ps.slice.triple.xi)).unwrap();
        assert_eq!(r.kind, FiberKind::NilpotentType);
        assert_eq!(r.component_count_theoretical, ComponentCount::Known(3));
        let err = cmd_fiber(&c, &CMatrix::zeros(3, 3)).unwrap_err();
        assert!(err.to_string().contains("not regular"), "{err}");
        let mut traced = CMatrix::zeros(3, 3);
        traced[(0, 0)] = cr(1.0);
        assert!(cmd_fiber(&c, &traced).is_err());
    }

    #[test]
    fn mf_and_rank_system_reports() {
        let r = cmd_mf(&cfg(3), None).unwrap();
        assert_eq!(r.manifest.count, 5);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = cmd_rank_system(&cfg(2), None).unwrap();
        assert_eq!(r.manifest.count, 3);
        assert_eq!(r.manifest.declared_rank, 1);
        assert_eq!(r.verdict, Verdict::Pass);
        let bad = CMatrix::zeros(3, 3);
        assert!(cmd_mf(&cfg(3), Some(&bad)).is_err());
    }

    #[test]
    fn flow_from_manifest() {
        let c = cfg(2);
        let mf = cmd_mf(&c, None).unwrap();
        let text = serde_json::to_string(&mf).unwrap();
        let manifest = parse_manifest(&text).unwrap();
        let out = cmd_flow(&c, &manifest, FlowRequest::default()).unwrap();
        assert_eq!(out.report.flows.len(), 2);
        assert_eq!(out.report.verdict, Verdict::Pass);
        assert!(out.report.flows.iter().all(|f| f.max_drift <= 1e-6));
        assert!(out.trajectory_csv.starts_with("t,re_0,im_0"));
    }
}
