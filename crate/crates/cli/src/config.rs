//! Run configuration read from a TOML file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use spillover_rt::engine::PValueRule;
use spillover_rt::focal::{BicliqueScore, BicliqueSearch, FocalMethod};
use spillover_rt::sim::{ComplianceModel, DgpKind, ExperimentConfig, FocalSettings, MechanismSpec};
use spillover_rt::{HypothesisPair, Statistic};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_e0")]
    pub e0: String,
    #[serde(default = "default_e1")]
    pub e1: String,
    #[serde(default = "default_stats")]
    pub stats: Vec<String>,
    #[serde(default = "default_draws", alias = "R")]
    pub draws: i64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rule")]
    pub p_value_rule: String,
    #[serde(default = "default_attempts")]
    pub max_attempts: u64,
    #[serde(default)]
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub focal: FocalConfig,
    #[serde(default)]
    pub biclique: BicliqueConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    /// complete, bernoulli or stratified.
    #[serde(default = "default_mechanism")]
    pub kind: String,
    /// Treated count for complete randomization; defaults to the observed count.
    pub treated: Option<usize>,
    /// Treatment probability for Bernoulli designs.
    pub p: Option<f64>,
    /// Treated count per stratum label; defaults to the observed counts.
    pub strata: Option<BTreeMap<String, usize>>,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self { kind: default_mechanism(), treated: None, p: None, strata: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

impl Default for FocalConfig {
    fn default() -> Self {
        Self { method: default_method(), kappa: default_kappa(), fraction: default_fraction() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BicliqueConfig {
    #[serde(default = "default_z0_draws")]
    pub z0_draws: usize,
    #[serde(default = "default_two")]
    pub min_units: usize,
    #[serde(default = "default_two")]
    pub min_assignments: usize,
    #[serde(default = "default_score")]
    pub score: String,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl Default for BicliqueConfig {
    fn default() -> Self {
        Self {
            z0_draws: default_z0_draws(),
            min_units: 2,
            min_assignments: 2,
            score: default_score(),
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Each listed edge affects both endpoints.
    #[serde(default = "default_true")]
    pub undirected: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { undirected: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Edge probability; defaults to 3/n.
    pub p: Option<f64>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_dgp")]
    pub dgp: String,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    /// perfect or one_sided.
    #[serde(default = "default_compliance")]
    pub compliance: String,
    #[serde(default = "default_take_up")]
    pub take_up: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            p: None,
            taus: default_taus(),
            dgp: default_dgp(),
            noise_sd: default_noise(),
            compliance: default_compliance(),
            take_up: default_take_up(),
            reps: default_reps(),
        }
    }
}

fn default_e0() -> String {
    "own".into()
}
fn default_e1() -> String {
    "own_any_peer".into()
}
fn default_stats() -> Vec<String> {
    vec!["kw".into(), "acd".into(), "olsf".into()]
}
fn default_draws() -> i64 {
    500
}
fn default_alpha() -> f64 {
    0.05
}
fn default_rule() -> String {
    "paper".into()
}
fn default_attempts() -> u64 {
    spillover_rt::assignment::DEFAULT_MAX_ATTEMPTS
}
fn default_mechanism() -> String {
    "complete".into()
}
fn default_method() -> String {
    "mis".into()
}
fn default_kappa() -> usize {
    2
}
fn default_fraction() -> f64 {
    spillover_rt::focal::DEFAULT_RANDOM_FRACTION
}
fn default_z0_draws() -> usize {
    200
}
fn default_two() -> usize {
    2
}
fn default_score() -> String {
    "units_log_assignments".into()
}
fn default_budget() -> usize {
    200_000
}
fn default_true() -> bool {
    true
}
fn default_n() -> usize {
    200
}
fn default_taus() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}
fn default_dgp() -> String {
    "dgp1".into()
}
fn default_noise() -> f64 {
    1.0
}
fn default_compliance() -> String {
    "perfect".into()
}
fn default_take_up() -> f64 {
    0.8
}
fn default_reps() -> usize {
    spillover_rt::sim::DEFAULT_REPS
}

/// Defaults listed in `--help`.
pub const DEFAULTS_HELP: &str = "\
Configuration file (TOML). Keys and defaults:
  e0 = \"own\"                 null exposure
  e1 = \"own_any_peer\"        finer exposure
                               (constant, own, any_neighborhood, own_any_peer,
                                own_peer_count, identity; a-d are aliases)
  stats = [\"kw\", \"acd\", \"olsf\"]
  draws = 500                  (alias R)
  alpha = 0.05
  seed = 0
  p_value_rule = \"paper\"     or \"add_one\"
  max_attempts = 10000         proposals per rejection-sampled draw
  [mechanism] kind = \"complete\" | \"bernoulli\" | \"stratified\"
              treated = <observed count>, p = <bernoulli probability>
              strata = { label = treated, ... } (default observed counts)
  [focal]     method = \"mis\" | \"random\" | \"biclique\", kappa = 2, fraction = 0.5
  [biclique]  z0_draws = 200, min_units = 2, min_assignments = 2,
              score = \"units_log_assignments\", budget = 200000
  [network]   undirected = true
  [simulate]  n = 200, p = 3/n, taus = [0, 1, 2], dgp = \"dgp1\" | \"dgp2\",
              noise_sd = 1, compliance = \"perfect\" | \"one_sided\",
              take_up = 0.8, reps = 200";

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.draws < 1 {
            return Err(CliError::Validation(format!("draws must be at least 1, got {}", self.draws)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Validation(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.focal.kappa < 2 {
            return Err(CliError::Validation("focal.kappa must be at least 2".into()));
        }
        self.pair()?;
        self.statistics()?;
        self.focal_settings()?;
        self.p_value_rule()?;
        Ok(())
    }

    pub fn pair(&self) -> Result<HypothesisPair, CliError> {
        Ok(HypothesisPair::from_names(&self.e0, &self.e1)?)
    }

    pub fn statistics(&self) -> Result<Vec<Statistic>, CliError> {
        if self.stats.is_empty() {
            return Err(CliError::Validation("stats must list at least one statistic".into()));
        }
        Ok(self.stats.iter().map(|s| Statistic::from_name(s)).collect::<Result<_, _>>()?)
    }

    pub fn p_value_rule(&self) -> Result<PValueRule, CliError> {
        Ok(PValueRule::from_name(&self.p_value_rule)?)
    }

    pub fn focal_settings(&self) -> Result<FocalSettings, CliError> {
        let mut f = FocalSettings::new(FocalMethod::from_name(&self.focal.method)?, self.focal.kappa);
        f.fraction = self.focal.fraction;
        f.z0_draws = self.biclique.z0_draws;
        f.biclique = BicliqueSearch {
            min_units: self.biclique.min_units,
            min_assignments: self.biclique.min_assignments,
            score: BicliqueScore::from_name(&self.biclique.score)?,
            budget: self.biclique.budget,
        };
        Ok(f)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let sim = &self.simulate;
        let mut cfg = ExperimentConfig::new(self.pair()?, self.focal_settings()?, self.statistics()?, sim.taus.clone());
        cfg.n = sim.n;
        cfg.network_p = sim.p.unwrap_or(3.0 / sim.n.max(1) as f64);
        cfg.mechanism = match self.mechanism.kind.as_str() {
            "complete" => MechanismSpec::Complete { treated: self.mechanism.treated.unwrap_or(sim.n / 2) },
            "bernoulli" => MechanismSpec::Bernoulli { p: self.mechanism.p.unwrap_or(0.5) },
            other => {
                return Err(CliError::Validation(format!(
                    "simulate supports complete or bernoulli mechanisms, not `{other}`"
                )))
            }
        };
        cfg.dgp = DgpKind::from_name(&sim.dgp)?;
        cfg.noise_sd = sim.noise_sd;
        cfg.compliance = match sim.compliance.as_str() {
            "perfect" => ComplianceModel::Perfect,
            "one_sided" => ComplianceModel::OneSided { take_up: sim.take_up },
            other => {
                return Err(CliError::Validation(format!(
                    "unknown compliance `{other}`; expected perfect or one_sided"
                )))
            }
        };
        cfg.draws = self.draws as usize;
        cfg.reps = sim.reps;
        cfg.alpha = self.alpha;
        cfg.seed = self.seed;
        cfg.p_value_rule = self.p_value_rule()?;
        cfg.validate()?;
        Ok(cfg)
    }
}
