//! Conditional randomization test: observed statistics, resampling from the
//! design restricted to the focal assignments, and Monte Carlo p-values.
//! Also an exact enumeration oracle for small designs.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::assignment::{Assignment, FixedPattern, Mechanism, DEFAULT_MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::exposure::HypothesisPair;
use crate::focal::{FocalAssignments, FocalDesign};
use crate::graph::Network;
use crate::rng::{child_seed, stream};
use crate::stats::{self, Grouping, Statistic};

/// Largest support enumerated by [`exact_test`] unless told otherwise.
pub const EXACT_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueRule {
    /// `#{T >= T_obs} / R`.
    #[default]
    Paper,
    /// `(1 + #{T >= T_obs}) / (R + 1)`.
    AddOne,
}

impl PValueRule {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(PValueRule::Paper),
            "add_one" => Ok(PValueRule::AddOne),
            other => Err(Error::InvalidParameter(format!("unknown p-value rule `{other}`; expected paper or add_one"))),
        }
    }

    pub fn p_value(self, exceed: usize, draws: usize) -> f64 {
        match self {
            PValueRule::Paper => exceed as f64 / draws as f64,
            PValueRule::AddOne => (1 + exceed) as f64 / (draws + 1) as f64,
        }
    }
}

/// Resampling settings shared by every statistic of one test.
#[derive(Debug, Clone)]
pub struct TestSpec {
    pub statistics: Vec<Statistic>,
    pub draws: usize,
    pub seed: u64,
    pub p_value_rule: PValueRule,
    /// Proposals per draw before the rejection sampler gives up.
    pub max_attempts: u64,
    /// Keep every resampled statistic value in the result.
    pub keep_draws: bool,
}

impl TestSpec {
    pub fn new(statistics: Vec<Statistic>, draws: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            statistics,
            draws,
            seed,
            p_value_rule: PValueRule::Paper,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            keep_draws: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidParameter("number of draws must be at least 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidParameter("at least one statistic is required".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Observed data and the hypothesis under test.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub pair: &'a HypothesisPair,
    pub design: &'a FocalDesign,
    pub mech: &'a Mechanism,
    pub net: &'a Network,
    pub y: &'a [f64],
    pub z: &'a Assignment,
}

impl Instance<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.net.len();
        for found in [self.y.len(), self.z.len(), self.mech.n()] {
            if found != n {
                return Err(Error::LengthMismatch { expected: n, found });
            }
        }
        if self.design.is_empty() {
            return Err(Error::EmptyDesign { kappa: self.design.kappa });
        }
        if let Some(&i) = self.design.focals.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if !self.mech.in_support(self.z)? {
            return Err(Error::NotInSupport);
        }
        if !self.design.contains(self.pair, self.net, self.mech, self.z)? {
            return Err(Error::Specification("observed assignment is not a focal assignment".into()));
        }
        Ok(())
    }
}

/// How conditional draws are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Direct draw given a per-unit fixed pattern.
    FixedUnits,
    /// Draw from the design until the focal constraint holds.
    Rejection,
    /// Weighted draw from an explicit list of assignments.
    Explicit,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::FixedUnits => "fixed_units",
            SamplerKind::Rejection => "rejection",
            SamplerKind::Explicit => "explicit",
        }
    }
}

enum Sampler<'a> {
    Fixed(FixedPattern),
    Rejection,
    Explicit(&'a [Assignment], WeightedIndex<f64>),
}

impl<'a> Sampler<'a> {
    fn new(inst: &Instance<'a>) -> Result<Self> {
        match &inst.design.assignments {
            FocalAssignments::Constraint { fixed: Some(fixed) } => {
                Ok(Sampler::Fixed(FixedPattern::new(inst.mech, fixed.iter().copied())?))
            }
            FocalAssignments::Constraint { fixed: None } => Ok(Sampler::Rejection),
            FocalAssignments::Explicit { assignments, weights } => {
                let index = WeightedIndex::new(weights)
                    .map_err(|e| Error::InvalidParameter(format!("focal assignment weights: {e}")))?;
                Ok(Sampler::Explicit(assignments, index))
            }
        }
    }

    fn kind(&self) -> SamplerKind {
        match self {
            Sampler::Fixed(_) => SamplerKind::FixedUnits,
            Sampler::Rejection => SamplerKind::Rejection,
            Sampler::Explicit(..) => SamplerKind::Explicit,
        }
    }

    /// One conditional draw and the proposals it took.
    fn draw(&self, inst: &Instance<'_>, max_attempts: u64, root: u64, index: u64) -> Result<(Assignment, u64)> {
        let mut rng = stream(root, index);
        match self {
            Sampler::Fixed(pattern) => Ok((pattern.sample(&mut rng), 1)),
            Sampler::Explicit(list, weights) => Ok((list[weights.sample(&mut rng)].clone(), 1)),
            Sampler::Rejection => {
                let d = inst.mech.sample_conditional(
                    |z| inst.design.satisfies_constraint(inst.pair, inst.net, z),
                    max_attempts,
                    &mut rng,
                )?;
                Ok((d.z, d.attempts))
            }
        }
    }
}

/// Statistic evaluation with everything that is fixed across draws
/// precomputed: focal outcomes, their midranks and the null regressors.
struct Evaluator<'a> {
    inst: Instance<'a>,
    statistics: &'a [Statistic],
    y_s: Vec<f64>,
    ranks: Vec<f64>,
    e0_rows: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn new(inst: Instance<'a>, statistics: &'a [Statistic]) -> Self {
        let y_s: Vec<f64> = inst.design.focals.iter().map(|&i| inst.y[i]).collect();
        let ranks = stats::midranks(&y_s);
        let e0_rows = inst.design.focals.iter().map(|&i| stats::regressors(inst.pair, i, inst.z, inst.net).0).collect();
        Self { inst, statistics, y_s, ranks, e0_rows }
    }

    /// Statistic values at `z` (degenerate values count as 0) and the
    /// grouping they were computed on.
    fn eval(&self, z: &Assignment) -> Result<(Vec<f64>, Grouping)> {
        let Instance { pair, design, net, .. } = self.inst;
        let grouping = stats::group_focals(design, pair, net, z)?;
        let mut x_rows = None;
        let values = self
            .statistics
            .iter()
            .map(|s| {
                let v = match s {
                    Statistic::Kw => stats::kw_from_ranks(&self.ranks, &grouping),
                    Statistic::Acd => stats::acd_statistic(&self.y_s, &grouping),
                    Statistic::OlsF => {
                        let x = x_rows.get_or_insert_with(|| {
                            design.focals.iter().map(|&i| stats::regressors(pair, i, z, net).1).collect::<Vec<_>>()
                        });
                        stats::ols_f_statistic(&self.y_s, &self.e0_rows, x)
                    }
                    Statistic::Custom(c) => c.eval(&self.y_s, &grouping),
                };
                match v {
                    Ok(v) if v.is_nan() => Err(Error::Specification(format!("statistic {} returned NaN", s.name()))),
                    Ok(v) => Ok(v),
                    Err(Error::DegenerateStatistic(_)) => Ok(0.0),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((values, grouping))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticResult {
    pub name: String,
    pub observed: f64,
    pub p_value: f64,
    /// Draws with a value at least the observed one.
    pub exceed: usize,
    pub draws: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub sampler: SamplerKind,
    /// Accepted draws per proposal; 1 outside rejection sampling.
    pub acceptance_rate: f64,
    /// Focal units per group summed over all draws.
    pub occupancy: Vec<u64>,
    pub focal_size: usize,
    pub kappa: usize,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistics: Vec<StatisticResult>,
    pub diagnostics: Diagnostics,
    pub method: String,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "statistic,t_obs,p_hat,R,focal_size,kappa,method,acceptance_rate,seed";

impl TestResult {
    /// One CSV row per statistic, matching [`CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        let d = &self.diagnostics;
        self.statistics
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    s.name,
                    s.observed,
                    s.p_value,
                    d.draws,
                    d.focal_size,
                    d.kappa,
                    self.method,
                    d.acceptance_rate,
                    self.seed
                )
            })
            .collect()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.statistics.iter().map(|s| s.p_value).collect()
    }
}

struct DrawOutcome {
    values: Vec<f64>,
    attempts: u64,
    sizes: Vec<usize>,
}

/// Runs the conditional randomization test.
///
/// Draw `r` uses the stream `(spec.seed, r)`, so results do not depend on
/// the number of worker threads.
pub fn run_test(spec: &TestSpec, inst: &Instance<'_>) -> Result<TestResult> {
    spec.validate()?;
    inst.validate()?;
    let sampler = Sampler::new(inst)?;
    let evaluator = Evaluator::new(*inst, &spec.statistics);
    let (observed, _) = evaluator.eval(inst.z)?;
    let outcomes = (0..spec.draws as u64)
        .into_par_iter()
        .map(|r| {
            let (z, attempts) = sampler.draw(inst, spec.max_attempts, spec.seed, r)?;
            let (values, grouping) = evaluator.eval(&z)?;
            Ok(DrawOutcome { values, attempts, sizes: grouping.sizes() })
        })
        .collect::<Result<Vec<_>>>()?;

    let kappa = inst.design.kappa;
    let mut occupancy = vec![0u64; kappa];
    let mut attempts = 0u64;
    for o in &outcomes {
        attempts += o.attempts;
        for (acc, &s) in occupancy.iter_mut().zip(&o.sizes) {
            *acc += s as u64;
        }
    }
    let statistics = spec
        .statistics
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let t_obs = observed[k];
            let exceed = outcomes.iter().filter(|o| o.values[k] >= t_obs).count();
            StatisticResult {
                name: s.name().to_string(),
                observed: t_obs,
                p_value: spec.p_value_rule.p_value(exceed, spec.draws),
                exceed,
                draws: spec.keep_draws.then(|| outcomes.iter().map(|o| o.values[k]).collect()),
            }
        })
        .collect();
    Ok(TestResult {
        statistics,
        diagnostics: Diagnostics {
            sampler: sampler.kind(),
            acceptance_rate: spec.draws as f64 / attempts as f64,
            occupancy,
            focal_size: inst.design.len(),
            kappa,
            draws: spec.draws,
        },
        method: inst.design.method.name().to_string(),
        seed: spec.seed,
    })
}

/// Exact conditional p-value of each statistic, enumerating the focal
/// assignments and weighting them by their design probabilities.
pub fn exact_test(spec: &TestSpec, inst: &Instance<'_>, cap: u128) -> Result<Vec<f64>> {
    inst.validate()?;
    if spec.statistics.is_empty() {
        return Err(Error::InvalidParameter("at least one statistic is required".into()));
    }
    let weighted: Vec<(Assignment, f64)> = match &inst.design.assignments {
        FocalAssignments::Explicit { assignments, weights } => {
            if assignments.len() as u128 > cap {
                return Err(Error::EnumerationCap { size: assignments.len() as u128, cap });
            }
            assignments.iter().cloned().zip(weights.iter().copied()).collect()
        }
        FocalAssignments::Constraint { .. } => inst
            .mech
            .enumerate_support(cap)?
            .into_iter()
            .filter(|(z, _)| inst.design.satisfies_constraint(inst.pair, inst.net, z))
            .collect(),
    };
    let evaluator = Evaluator::new(*inst, &spec.statistics);
    let (observed, _) = evaluator.eval(inst.z)?;
    let mut total = 0.0;
    let mut mass = vec![0.0; observed.len()];
    for (z, w) in &weighted {
        let (values, _) = evaluator.eval(z)?;
        total += w;
        for k in 0..observed.len() {
            if values[k] >= observed[k] {
                mass[k] += w;
            }
        }
    }
    if total <= 0.0 {
        return Err(Error::Specification("focal assignments carry no probability".into()));
    }
    Ok(mass.into_iter().map(|m| (m / total).min(1.0)).collect())
}

/// Spread of the Monte Carlo p-value of the first statistic at each draw
/// count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub draws: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Repeats the test `reps` times at each draw count in `grid` with
/// independent seeds and reports the sample standard deviation of `p_hat`.
pub fn error_scaling_probe(
    spec: &TestSpec,
    inst: &Instance<'_>,
    grid: &[usize],
    reps: usize,
) -> Result<Vec<ScalingRow>> {
    if reps < 2 {
        return Err(Error::InvalidParameter("error scaling needs at least 2 repetitions".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("draw grid must be strictly ascending".into()));
    }
    grid.iter()
        .map(|&draws| {
            let p = (0..reps as u64)
                .map(|rep| {
                    let s =
                        TestSpec { draws, seed: child_seed(child_seed(spec.seed, draws as u64), rep), ..spec.clone() };
                    Ok(run_test(&s, inst)?.statistics[0].p_value)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = p.iter().sum::<f64>() / reps as f64;
            let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            Ok(ScalingRow { draws, mean, sd: var.sqrt() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::Exposure;
    use crate::focal::{mis_design, FocalMethod};
    use crate::stats::CustomStatistic;
    use std::sync::Arc;

    fn fisher() -> HypothesisPair {
        HypothesisPair::builtin(Exposure::Constant, Exposure::Own).unwrap()
    }

    fn explicit_design(assignments: Vec<Assignment>, n: usize) -> FocalDesign {
        let weights = vec![1.0; assignments.len()];
        FocalDesign {
            focals: (0..n).collect(),
            tilde_sets: vec![vec![crate::ExposureValue::scalar(0), crate::ExposureValue::scalar(1)]; n],
            kappa: 2,
            assignments: FocalAssignments::Explicit { assignments, weights },
            method: FocalMethod::Biclique,
        }
    }

    /// Value of a unit's group index: the treated indicator of focal 0.
    struct FirstGroup;
    impl CustomStatistic for FirstGroup {
        fn name(&self) -> &str {
            "first_group"
        }
        fn eval(&self, _: &[f64], g: &Grouping) -> Result<f64> {
            Ok(g.index[0] as f64)
        }
    }

    /// Number of treated focals, used to give distinct values per draw.
    struct TreatedCount;
    impl CustomStatistic for TreatedCount {
        fn name(&self) -> &str {
            "treated"
        }
        fn eval(&self, _: &[f64], g: &Grouping) -> Result<f64> {
            Ok(g.index.iter().sum::<usize>() as f64)
        }
    }

    #[test]
    fn constant_outcomes_give_p_one() {
        let net = Network::empty(6).unwrap();
        let mech = Mechanism::complete(6, 3).unwrap();
        let z = Assignment::new(vec![1, 1, 1, 0, 0, 0]).unwrap();
        let pair = fisher();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let y = vec![2.0; 6];
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Kw, Statistic::Acd], 200, 9).unwrap();
        let res = run_test(&spec, &inst).unwrap();
        assert!(res.statistics.iter().all(|s| s.p_value == 1.0 && s.observed == 0.0));
        assert_eq!(res.diagnostics.sampler, SamplerKind::FixedUnits);
        assert_eq!(exact_test(&spec, &inst, EXACT_CAP).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn single_forced_draw() {
        let z = Assignment::new(vec![1, 0]).unwrap();
        let design = explicit_design(vec![z.clone()], 2);
        let (net, mech, pair) = (Network::empty(2).unwrap(), Mechanism::complete(2, 1).unwrap(), fisher());
        let y = [1.0, 0.0];
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Acd], 1, 0).unwrap();
        let res = run_test(&spec, &inst).unwrap();
        assert_eq!(res.statistics[0].p_value, 1.0);
        assert_eq!(res.diagnostics.sampler, SamplerKind::Explicit);
    }

    #[test]
    fn exact_counts_explicit_list() {
        // treated counts (1, 2, 2, 3) over four listed assignments, observed 2
        let zs: Vec<Assignment> = [[1, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 0], [1, 1, 1, 0]]
            .iter()
            .map(|v| Assignment::new(v.to_vec()).unwrap())
            .collect();
        let z = zs[1].clone();
        let design = explicit_design(zs, 4);
        let (net, mech, pair) = (Network::empty(4).unwrap(), Mechanism::bernoulli_uniform(4, 0.5).unwrap(), fisher());
        let y = [0.0; 4];
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Custom(Arc::new(TreatedCount))], 10, 0).unwrap();
        assert_eq!(exact_test(&spec, &inst, EXACT_CAP).unwrap(), vec![0.75]);
    }

    #[test]
    fn exact_bernoulli_by_hand() {
        // Bernoulli(1/2) on 3 isolated units under the Fisher null: all 8
        // assignments are focal; T = treated count, observed 2 -> 4/8
        let (net, mech, pair) = (Network::empty(3).unwrap(), Mechanism::bernoulli_uniform(3, 0.5).unwrap(), fisher());
        let z = Assignment::new(vec![1, 1, 0]).unwrap();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let y = [0.0; 3];
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Custom(Arc::new(TreatedCount))], 10, 0).unwrap();
        let by_hand = (0u8..8).filter(|b| b.count_ones() >= 2).count() as f64 / 8.0;
        assert_eq!(exact_test(&spec, &inst, EXACT_CAP).unwrap(), vec![by_hand]);
        assert!(matches!(exact_test(&spec, &inst, 4), Err(Error::EnumerationCap { .. })));
    }

    fn paired() -> (Network, Mechanism, Assignment, Vec<f64>) {
        // two pairs of friends, two of four treated
        let net = Network::from_pairs(4, [(0, 1), (2, 3)], true).unwrap();
        (net, Mechanism::complete(4, 2).unwrap(), Assignment::new(vec![1, 0, 0, 1]).unwrap(), vec![3.0, 1.0, 0.5, 2.0])
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let (net, mech, z, y) = paired();
        let pair = HypothesisPair::builtin(Exposure::Constant, Exposure::Own).unwrap();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Kw, Statistic::Acd], 50_000, 4).unwrap();
        let exact = exact_test(&spec, &inst, EXACT_CAP).unwrap();
        let res = run_test(&spec, &inst).unwrap();
        for (s, p) in res.statistics.iter().zip(exact) {
            let se = (p * (1.0 - p) / 50_000.0).sqrt();
            assert!((s.p_value - p).abs() <= 3.0 * se + 1e-12, "{} {} vs {p}", s.name, s.p_value);
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let (net, mech, z, y) = paired();
        let pair = fisher();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let mut spec = TestSpec::new(vec![Statistic::Kw, Statistic::OlsF], 300, 11).unwrap();
        spec.keep_draws = true;
        let a = run_test(&spec, &inst).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_test(&spec, &inst).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_path_and_add_one() {
        let (net, mech, z, y) = paired();
        let pair = HypothesisPair::builtin(Exposure::Own, Exposure::OwnAndAnyPeer).unwrap();
        let mut design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        design.assignments = FocalAssignments::Constraint { fixed: None };
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let mut spec = TestSpec::new(vec![Statistic::Acd], 400, 3).unwrap();
        let res = run_test(&spec, &inst).unwrap();
        assert_eq!(res.diagnostics.sampler, SamplerKind::Rejection);
        assert!(res.diagnostics.acceptance_rate > 0.0 && res.diagnostics.acceptance_rate <= 1.0);
        assert_eq!(res.diagnostics.occupancy.iter().sum::<u64>(), 400 * design.len() as u64);
        spec.p_value_rule = PValueRule::AddOne;
        let p = run_test(&spec, &inst).unwrap().statistics[0].p_value;
        assert!(p >= 1.0 / 401.0);
    }

    #[test]
    fn invalid_inputs() {
        let (net, mech, z, y) = paired();
        let pair = fisher();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        assert!(TestSpec::new(vec![Statistic::Kw], 0, 0).is_err());
        assert!(TestSpec::new(vec![], 10, 0).is_err());
        let spec = TestSpec::new(vec![Statistic::Kw], 10, 0).unwrap();
        let bad_z = Assignment::new(vec![1, 1, 1, 0]).unwrap();
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &bad_z };
        assert_eq!(run_test(&spec, &inst).unwrap_err(), Error::NotInSupport);
        let short = [1.0];
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &short, z: &z };
        assert!(matches!(run_test(&spec, &inst), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn scaling_probe_extremes() {
        let (net, mech, pair) = (Network::empty(4).unwrap(), Mechanism::bernoulli_uniform(4, 0.5).unwrap(), fisher());
        let y = [0.0; 4];
        let stat = Statistic::Custom(Arc::new(FirstGroup));
        let spec = TestSpec::new(vec![stat], 10, 1).unwrap();
        // focal 0 in control: every draw ties or exceeds -> p = 1
        let z = Assignment::new(vec![0, 1, 0, 1]).unwrap();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        for row in error_scaling_probe(&spec, &inst, &[10, 40], 5).unwrap() {
            assert_eq!((row.mean, row.sd), (1.0, 0.0));
        }
        assert!(error_scaling_probe(&spec, &inst, &[40, 10], 5).is_err());
    }

    #[test]
    fn csv_rows_follow_header() {
        let (net, mech, z, y) = paired();
        let pair = fisher();
        let design = mis_design(&pair, &z, &net, &mech, 2, &mut stream(0, 0)).unwrap();
        let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &y, z: &z };
        let spec = TestSpec::new(vec![Statistic::Kw, Statistic::Acd, Statistic::OlsF], 20, 5).unwrap();
        let rows = run_test(&spec, &inst).unwrap().csv_rows();
        assert_eq!(rows.len(), 3);
        let width = CSV_HEADER.split(',').count();
        assert!(rows.iter().all(|r| r.split(',').count() == width));
        assert!(rows[0].starts_with("kw,"));
    }
}
