//! Monte Carlo study of size and power: outcome models with peer effects,
//! one-sided noncompliance, and rejection frequencies over a grid of
//! spillover strengths.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::assignment::{Assignment, Mechanism};
use crate::engine::{run_test, Instance, PValueRule, TestSpec};
use crate::error::{Error, Result};
use crate::exposure::HypothesisPair;
use crate::focal::{biclique_design_from, mis_design, random_design, BicliqueSearch, FocalDesign, FocalMethod};
use crate::graph::{erdos_renyi, Network};
use crate::rng::{child_seed, stream};
use crate::stats::{simes, Statistic};

/// Bounded peer-effect transform: `a` up to 2, then `1/a`.
pub fn g_dgp2(a: usize) -> f64 {
    if a <= 2 {
        a as f64
    } else {
        1.0 / a as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKind {
    /// `Y_i = D_i + tau * sum_peers D_j + noise`.
    Linear,
    /// `Y_i = D_i + tau * g(sum_peers D_j) + noise`.
    Bounded,
}

impl DgpKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "dgp1" | "linear" => Ok(DgpKind::Linear),
            "dgp2" | "bounded" => Ok(DgpKind::Bounded),
            other => Err(Error::InvalidParameter(format!("unknown outcome model `{other}`; expected dgp1 or dgp2"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DgpKind::Linear => "dgp1",
            DgpKind::Bounded => "dgp2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub tau: f64,
    pub noise_sd: f64,
}

impl DgpConfig {
    pub fn new(kind: DgpKind, tau: f64) -> Self {
        Self { kind, tau, noise_sd: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplianceModel {
    Perfect,
    /// Assigned units take up treatment with probability `take_up`; others
    /// never do.
    OneSided {
        take_up: f64,
    },
}

impl ComplianceModel {
    pub fn validate(self) -> Result<()> {
        match self {
            ComplianceModel::OneSided { take_up } if !(0.0..=1.0).contains(&take_up) => {
                Err(Error::InvalidParameter(format!("take-up probability {take_up} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Treatment actually taken given assignment `z`.
pub fn apply_compliance<R: Rng + ?Sized>(z: &Assignment, model: ComplianceModel, rng: &mut R) -> Result<Assignment> {
    model.validate()?;
    match model {
        ComplianceModel::Perfect => Ok(z.clone()),
        ComplianceModel::OneSided { take_up } => {
            Assignment::new(z.as_slice().iter().map(|&v| v & u8::from(rng.random_bool(take_up))).collect())
        }
    }
}

/// Standard normal noise scaled by `sd`.
pub fn draw_noise<R: Rng + ?Sized>(n: usize, sd: f64, rng: &mut R) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(format!("noise sd {sd}: {e}")))?;
    Ok((0..n).map(|_| normal.sample(rng)).collect())
}

/// Outcomes from take-up `d` and given noise.
pub fn outcomes_with_noise(dgp: &DgpConfig, d: &Assignment, net: &Network, noise: &[f64]) -> Result<Vec<f64>> {
    if d.len() != net.len() || noise.len() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), found: d.len().min(noise.len()) });
    }
    Ok((0..net.len())
        .map(|i| {
            let treated_peers = net.peers_of(i).iter().filter(|&&j| d.get(j) == 1).count();
            let spill = match dgp.kind {
                DgpKind::Linear => treated_peers as f64,
                DgpKind::Bounded => g_dgp2(treated_peers),
            };
            d.get(i) as f64 + dgp.tau * spill + noise[i]
        })
        .collect())
}

/// Outcomes with fresh normal noise.
pub fn gen_outcomes<R: Rng + ?Sized>(dgp: &DgpConfig, d: &Assignment, net: &Network, rng: &mut R) -> Result<Vec<f64>> {
    let noise = if dgp.noise_sd == 0.0 { vec![0.0; net.len()] } else { draw_noise(net.len(), dgp.noise_sd, rng)? };
    outcomes_with_noise(dgp, d, net, &noise)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanismSpec {
    Complete { treated: usize },
    Bernoulli { p: f64 },
}

impl MechanismSpec {
    pub fn build(self, n: usize) -> Result<Mechanism> {
        match self {
            MechanismSpec::Complete { treated } => Mechanism::complete(n, treated),
            MechanismSpec::Bernoulli { p } => Mechanism::bernoulli_uniform(n, p),
        }
    }
}

/// How the focal design is chosen in each replication.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalSettings {
    pub method: FocalMethod,
    pub kappa: usize,
    pub fraction: f64,
    pub z0_draws: usize,
    pub biclique: BicliqueSearch,
}

impl FocalSettings {
    pub fn new(method: FocalMethod, kappa: usize) -> Self {
        Self {
            method,
            kappa,
            fraction: crate::focal::DEFAULT_RANDOM_FRACTION,
            z0_draws: 200,
            biclique: BicliqueSearch::default(),
        }
    }

    pub fn build<R: Rng + ?Sized>(
        &self,
        pair: &HypothesisPair,
        z: &Assignment,
        net: &Network,
        mech: &Mechanism,
        rng: &mut R,
    ) -> Result<FocalDesign> {
        match self.method {
            FocalMethod::Mis => mis_design(pair, z, net, mech, self.kappa, rng),
            FocalMethod::Random => random_design(pair, z, net, mech, self.kappa, self.fraction, rng),
            FocalMethod::Biclique => {
                biclique_design_from(pair, z, net, mech, self.kappa, self.z0_draws, &self.biclique, rng)
            }
        }
    }
}

/// Full description of a rejection-frequency experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub network_p: f64,
    pub mechanism: MechanismSpec,
    pub pair: HypothesisPair,
    pub focal: FocalSettings,
    pub statistics: Vec<Statistic>,
    pub taus: Vec<f64>,
    pub dgp: DgpKind,
    pub noise_sd: f64,
    pub compliance: ComplianceModel,
    pub draws: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub p_value_rule: PValueRule,
}

pub const DEFAULT_DRAWS: usize = 500;
pub const DEFAULT_REPS: usize = 200;

impl ExperimentConfig {
    /// Desk-scale defaults: 200 units, edge probability 3/n, half treated,
    /// linear outcomes, perfect compliance.
    pub fn new(pair: HypothesisPair, focal: FocalSettings, statistics: Vec<Statistic>, taus: Vec<f64>) -> Self {
        Self {
            n: 200,
            network_p: 3.0 / 200.0,
            mechanism: MechanismSpec::Complete { treated: 100 },
            pair,
            focal,
            statistics,
            taus,
            dgp: DgpKind::Linear,
            noise_sd: 1.0,
            compliance: ComplianceModel::Perfect,
            draws: DEFAULT_DRAWS,
            reps: DEFAULT_REPS,
            alpha: 0.05,
            seed: 0,
            p_value_rule: PValueRule::Paper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.network_p) {
            return Err(Error::InvalidParameter(format!("edge probability {} outside [0, 1]", self.network_p)));
        }
        if self.reps == 0 || self.draws == 0 {
            return Err(Error::InvalidParameter("reps and draws must be at least 1".into()));
        }
        if self.taus.is_empty() || self.statistics.is_empty() {
            return Err(Error::InvalidParameter("need at least one tau and one statistic".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sd {} must be finite and non-negative", self.noise_sd)));
        }
        if self.focal.kappa < 2 {
            return Err(Error::InvalidParameter("kappa must be at least 2".into()));
        }
        self.compliance.validate()?;
        self.mechanism.build(self.n).map(|_| ())
    }
}

/// Result of one replication: p-values per (tau, statistic), or the reason
/// the design was degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub p_values: Option<Vec<Vec<f64>>>,
    pub focal_size: usize,
    pub acceptance_rate: f64,
}

/// One replication with a fresh network, assignment and noise; the design
/// and noise are shared across the tau grid.
pub fn run_replication(cfg: &ExperimentConfig, rep: u64) -> Result<RepOutcome> {
    let seed = child_seed(cfg.seed, rep);
    let net = erdos_renyi(cfg.n, cfg.network_p, &mut stream(seed, 0))?;
    let mech = cfg.mechanism.build(cfg.n)?;
    let z = mech.sample(&mut stream(seed, 1));
    let d = apply_compliance(&z, cfg.compliance, &mut stream(seed, 2))?;
    let noise = draw_noise(cfg.n, cfg.noise_sd, &mut stream(seed, 3))?;
    let design = match cfg.focal.build(&cfg.pair, &z, &net, &mech, &mut stream(seed, 4)) {
        Ok(d) => d,
        Err(e) if e.is_degenerate_design() => {
            return Ok(RepOutcome { p_values: None, focal_size: 0, acceptance_rate: f64::NAN });
        }
        Err(e) => return Err(e),
    };
    let mut spec = TestSpec::new(cfg.statistics.clone(), cfg.draws, child_seed(seed, 5))?;
    spec.p_value_rule = cfg.p_value_rule;
    let mut acceptance = 0.0;
    let mut p_values = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let y = outcomes_with_noise(&DgpConfig { kind: cfg.dgp, tau, noise_sd: cfg.noise_sd }, &d, &net, &noise)?;
        let inst = Instance { pair: &cfg.pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let res = run_test(&spec, &inst)?;
        acceptance += res.diagnostics.acceptance_rate;
        p_values.push(res.p_values());
    }
    Ok(RepOutcome {
        p_values: Some(p_values),
        focal_size: design.len(),
        acceptance_rate: acceptance / cfg.taus.len() as f64,
    })
}

/// One cell of the output table.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub tau: f64,
    pub statistic: String,
    pub method: String,
    pub exposure_pair: String,
    pub rejection_rate: f64,
    pub mean_focal_size: f64,
    pub mean_acceptance_rate: f64,
    pub degenerate_reps: usize,
}

pub const SIM_CSV_HEADER: &str =
    "tau,statistic,method,exposure_pair,rejection_rate,mean_focal_size,mean_acceptance_rate,degenerate_reps";

impl CellSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.tau,
            self.statistic,
            self.method,
            self.exposure_pair,
            self.rejection_rate,
            self.mean_focal_size,
            self.mean_acceptance_rate,
            self.degenerate_reps
        )
    }
}

/// Rejection frequencies per (tau, statistic), plus a Simes row combining
/// all statistics when there are several. Degenerate replications count as
/// non-rejections and are reported per cell.
pub fn rejection_frequency_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellSummary>> {
    cfg.validate()?;
    let reps = (0..cfg.reps as u64).into_par_iter().map(|r| run_replication(cfg, r)).collect::<Result<Vec<_>>>()?;
    summarize(cfg, &reps)
}

fn summarize(cfg: &ExperimentConfig, reps: &[RepOutcome]) -> Result<Vec<CellSummary>> {
    let ok: Vec<&RepOutcome> = reps.iter().filter(|r| r.p_values.is_some()).collect();
    let degenerate = reps.len() - ok.len();
    let mean = |f: &dyn Fn(&RepOutcome) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let mean_focal_size = mean(&|r| r.focal_size as f64);
    let mean_acceptance_rate = mean(&|r| r.acceptance_rate);
    let mut names: Vec<String> = cfg.statistics.iter().map(|s| s.name().to_string()).collect();
    if cfg.statistics.len() > 1 {
        names.push("simes".into());
    }
    let mut out = Vec::new();
    for (t, &tau) in cfg.taus.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            let mut rejections = 0usize;
            for r in &ok {
                let p = &r.p_values.as_ref().expect("filtered")[t];
                let reject = if k < cfg.statistics.len() { p[k] <= cfg.alpha } else { simes(p, cfg.alpha)?.reject };
                rejections += usize::from(reject);
            }
            out.push(CellSummary {
                tau,
                statistic: name.clone(),
                method: cfg.focal.method.name().to_string(),
                exposure_pair: cfg.pair.label(),
                rejection_rate: rejections as f64 / reps.len() as f64,
                mean_focal_size,
                mean_acceptance_rate,
                degenerate_reps: degenerate,
            });
        }
    }
    Ok(out)
}
