//! Focal units and focal assignments.
//!
//! Three constructions are provided: a greedy independent set on the graph
//! of overlapping neighborhoods, a uniform random subset of the candidate
//! pool, and a biclique of the null exposure graph. The first two describe
//! the focal assignments by a constraint on the finer exposures of the focal
//! units; the biclique method lists them explicitly.
//!
//! Designs are conditional on the focal set: the test treats `S` as given
//! even though its construction looks at the observed assignment.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::assignment::{Assignment, FixedPattern, Mechanism};
use crate::error::{Error, Result};
use crate::exposure::{candidate_focals, tilde_sets, ExposureValue, HypothesisPair};
use crate::graph::{greedy_independent_set, overlap_graph, Network};

/// Default fraction of the candidate pool kept by [`random_design`].
pub const DEFAULT_RANDOM_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocalMethod {
    Mis,
    Random,
    Biclique,
}

impl FocalMethod {
    pub fn name(self) -> &'static str {
        match self {
            FocalMethod::Mis => "mis",
            FocalMethod::Random => "random",
            FocalMethod::Biclique => "biclique",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "mis" => Ok(FocalMethod::Mis),
            "random" => Ok(FocalMethod::Random),
            "biclique" => Ok(FocalMethod::Biclique),
            other => Err(Error::InvalidParameter(format!(
                "unknown focal method `{other}`; expected one of mis, random, biclique"
            ))),
        }
    }
}

/// How the set of focal assignments is represented.
#[derive(Debug, Clone)]
pub enum FocalAssignments {
    /// Support points whose finer exposure lies in the imputable set for
    /// every focal unit. `fixed` is set when that constraint is exactly a
    /// per-unit fixed pattern.
    Constraint { fixed: Option<Vec<(usize, u8)>> },
    /// A finite list of assignments, each weighted by its design probability.
    Explicit { assignments: Vec<Assignment>, weights: Vec<f64> },
}

/// Focal units, their ordered imputable sets and the focal assignments.
#[derive(Debug, Clone)]
pub struct FocalDesign {
    pub focals: Vec<usize>,
    /// Imputable set of each focal unit, aligned with `focals`.
    pub tilde_sets: Vec<Vec<ExposureValue>>,
    pub kappa: usize,
    pub assignments: FocalAssignments,
    pub method: FocalMethod,
}

impl FocalDesign {
    pub fn len(&self) -> usize {
        self.focals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.focals.is_empty()
    }

    /// Whether `z` is a focal assignment.
    pub fn contains(&self, pair: &HypothesisPair, net: &Network, mech: &Mechanism, z: &Assignment) -> Result<bool> {
        if z.len() != net.len() {
            return Err(Error::LengthMismatch { expected: net.len(), found: z.len() });
        }
        match &self.assignments {
            FocalAssignments::Explicit { assignments, .. } => Ok(assignments.contains(z)),
            FocalAssignments::Constraint { .. } => Ok(mech.in_support(z)? && self.satisfies_constraint(pair, net, z)),
        }
    }

    /// Finer exposures of all focal units fall in their imputable sets.
    pub(crate) fn satisfies_constraint(&self, pair: &HypothesisPair, net: &Network, z: &Assignment) -> bool {
        self.focals.iter().zip(&self.tilde_sets).all(|(&i, set)| set.contains(&pair.alt.value(i, z, net)))
    }
}

/// Units per design must be at least kappa for the statistics to be defined.
fn check_size(focals: usize, kappa: usize) -> Result<()> {
    if focals < kappa {
        Err(Error::DegenerateDesign { focals, kappa })
    } else {
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn constraint_design(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    focals: Vec<usize>,
    all_sets: &[Vec<ExposureValue>],
    kappa: usize,
    method: FocalMethod,
) -> Result<FocalDesign> {
    let fixed = if pair.is_builtin() {
        let mut fixed = Vec::new();
        let mut representable = true;
        for &i in &focals {
            match pair.null.level_set_as_fixed(i, &pair.null.value(i, observed, net), net) {
                Some(f) => fixed.extend(f),
                None => {
                    representable = false;
                    break;
                }
            }
        }
        if representable {
            fixed.sort_unstable();
            fixed.dedup();
            // the observed assignment satisfies every level set, so the
            // pattern is consistent and feasible
            FixedPattern::new(mech, fixed.iter().copied())?;
            Some(fixed)
        } else {
            None
        }
    } else {
        None
    };
    let tilde_sets = focals.iter().map(|&i| all_sets[i].clone()).collect();
    Ok(FocalDesign { focals, tilde_sets, kappa, assignments: FocalAssignments::Constraint { fixed }, method })
}

fn candidates(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
) -> Result<(Vec<usize>, Vec<Vec<ExposureValue>>)> {
    if mech.n() != net.len() || observed.len() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), found: observed.len().min(mech.n()) });
    }
    if !mech.in_support(observed)? {
        return Err(Error::NotInSupport);
    }
    let pool = candidate_focals(pair, observed, net, mech, kappa)?;
    if pool.is_empty() {
        return Err(Error::EmptyDesign { kappa });
    }
    Ok((pool, tilde_sets(pair, observed, net, mech)?))
}

/// Focal units with pairwise disjoint dependence neighborhoods, chosen by a
/// greedy independent set on the overlap graph of the candidate pool.
///
/// For built-in exposures other than constant/own the dependence
/// neighborhood is the closed neighborhood, so this is the common-friend
/// graph.
pub fn mis_design<R: Rng + ?Sized>(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
    rng: &mut R,
) -> Result<FocalDesign> {
    let (pool, sets) = candidates(pair, observed, net, mech, kappa)?;
    let graph = overlap_graph(net, &pool, |i| {
        let mut d = pair.alt.dependence(i, net);
        d.extend(pair.null.dependence(i, net));
        d.sort_unstable();
        d.dedup();
        d
    })?;
    let focals = greedy_independent_set(&graph, rng);
    check_size(focals.len(), kappa)?;
    constraint_design(pair, observed, net, mech, focals, &sets, kappa, FocalMethod::Mis)
}

/// Uniform random subset of `ceil(fraction * |pool|)` candidate units.
pub fn random_design<R: Rng + ?Sized>(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<FocalDesign> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("focal fraction {fraction} outside (0, 1]")));
    }
    let (pool, sets) = candidates(pair, observed, net, mech, kappa)?;
    let size = ((fraction * pool.len() as f64).ceil() as usize).min(pool.len());
    let mut focals: Vec<usize> = index::sample(rng, pool.len(), size).into_iter().map(|k| pool[k]).collect();
    focals.sort_unstable();
    check_size(focals.len(), kappa)?;
    constraint_design(pair, observed, net, mech, focals, &sets, kappa, FocalMethod::Random)
}

/// Fixed-width bit set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Self(vec![0; len.div_ceil(64)])
    }

    fn full(len: usize) -> Self {
        let mut b = Self::new(len);
        for k in 0..len {
            b.insert(k);
        }
        b
    }

    fn insert(&mut self, k: usize) {
        self.0[k / 64] |= 1 << (k % 64);
    }

    fn contains(&self, k: usize) -> bool {
        self.0[k / 64] >> (k % 64) & 1 == 1
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b))
    }
}

/// Bipartite graph between candidate units and candidate assignments, with
/// an edge where the assignment keeps the unit's null exposure at its
/// observed value.
#[derive(Debug, Clone)]
pub struct NullExposureGraph {
    /// Candidate unit ids.
    pub units: Vec<usize>,
    /// Distinct candidate assignments.
    pub assignments: Vec<Assignment>,
    /// How many draws produced each distinct assignment.
    pub multiplicity: Vec<usize>,
    /// Imputable sets aligned with `units`.
    pub tilde_sets: Vec<Vec<ExposureValue>>,
    pub kappa: usize,
    // rows[u] = columns adjacent to unit u
    rows: Vec<Bits>,
}

impl NullExposureGraph {
    /// Graph from explicit adjacency, `edges` holding (unit position, column) pairs.
    pub fn from_edges(units: Vec<usize>, assignments: Vec<Assignment>, edges: &[(usize, usize)]) -> Result<Self> {
        let cols = assignments.len();
        let mut rows = vec![Bits::new(cols); units.len()];
        for &(u, c) in edges {
            if u >= units.len() || c >= cols {
                return Err(Error::InvalidParameter(format!("edge ({u}, {c}) outside the graph")));
            }
            rows[u].insert(c);
        }
        Ok(Self {
            multiplicity: vec![1; cols],
            tilde_sets: vec![Vec::new(); units.len()],
            kappa: 0,
            units,
            assignments,
            rows,
        })
    }

    pub fn has_edge(&self, unit_pos: usize, column: usize) -> bool {
        self.rows[unit_pos].contains(column)
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Bits::count).sum()
    }
}

/// Builds the null exposure graph over the candidate pool `N(kappa)` and
/// `Z_0 = {Z} ∪ {draws from P_Z}`.
pub fn build_null_exposure_graph<R: Rng + ?Sized>(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
    num_assignments: usize,
    rng: &mut R,
) -> Result<NullExposureGraph> {
    if num_assignments == 0 {
        return Err(Error::InvalidParameter("need at least one candidate assignment draw".into()));
    }
    let (pool, sets) = candidates(pair, observed, net, mech, kappa)?;

    let mut seen: HashMap<Assignment, usize> = HashMap::new();
    let mut assignments = Vec::new();
    let mut multiplicity = Vec::new();
    for z in std::iter::once(observed.clone()).chain((0..num_assignments).map(|_| mech.sample(rng))) {
        match seen.get(&z) {
            Some(&c) => multiplicity[c] += 1,
            None => {
                seen.insert(z.clone(), assignments.len());
                assignments.push(z);
                multiplicity.push(1);
            }
        }
    }
    // the observed assignment counts only as a member of Z_0, not as a draw
    multiplicity[0] -= 1;

    let null_obs: Vec<ExposureValue> = pool.iter().map(|&i| pair.null.value(i, observed, net)).collect();
    let columns: Vec<Vec<bool>> = assignments
        .par_iter()
        .map(|z| {
            pool.iter().zip(&null_obs).map(|(&i, e0)| pair.coarsen.apply(&pair.alt.value(i, z, net)) == *e0).collect()
        })
        .collect();
    let mut rows = vec![Bits::new(assignments.len()); pool.len()];
    for (c, col) in columns.iter().enumerate() {
        for (u, &edge) in col.iter().enumerate() {
            if edge {
                rows[u].insert(c);
            }
        }
    }
    let tilde_sets = pool.iter().map(|&i| sets[i].clone()).collect();
    Ok(NullExposureGraph { units: pool, assignments, multiplicity, tilde_sets, kappa, rows })
}

/// Objective used to rank bicliques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BicliqueScore {
    /// `|N_b| * ln(1 + |Z_b|)`.
    #[default]
    UnitsLogAssignments,
    Units,
    UnitsTimesAssignments,
}

impl BicliqueScore {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "units_log_assignments" => Ok(Self::UnitsLogAssignments),
            "units" => Ok(Self::Units),
            "units_times_assignments" => Ok(Self::UnitsTimesAssignments),
            other => Err(Error::InvalidParameter(format!(
                "unknown biclique score `{other}`; expected units_log_assignments, units or units_times_assignments"
            ))),
        }
    }

    fn eval(self, units: usize, assignments: usize) -> f64 {
        let (u, a) = (units as f64, assignments as f64);
        match self {
            Self::UnitsLogAssignments => u * (1.0 + a).ln(),
            Self::Units => u + a * 1e-9,
            Self::UnitsTimesAssignments => u * a,
        }
    }
}

/// Search settings for [`find_biclique`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BicliqueSearch {
    pub min_units: usize,
    pub min_assignments: usize,
    pub score: BicliqueScore,
    /// Cap on closure evaluations.
    pub budget: usize,
}

impl Default for BicliqueSearch {
    fn default() -> Self {
        Self { min_units: 2, min_assignments: 2, score: BicliqueScore::default(), budget: 200_000 }
    }
}

/// A biclique given by unit positions and column indices of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Biclique {
    pub units: Vec<usize>,
    pub columns: Vec<usize>,
}

/// Best inclusion-maximal biclique found within the work budget.
///
/// Enumerates closed unit sets depth first with prefix-preserving closure
/// extension, so each maximal biclique is visited at most once; branches
/// whose column count falls below `min_assignments` are pruned.
pub fn find_biclique(graph: &NullExposureGraph, search: &BicliqueSearch) -> Option<Biclique> {
    let cols = graph.assignments.len();
    let k = graph.units.len();
    if k == 0 || cols == 0 {
        return None;
    }
    let closure = |support: &Bits| -> Bits {
        let mut members = Bits::new(k);
        for u in 0..k {
            if support.is_subset_of(&graph.rows[u]) {
                members.insert(u);
            }
        }
        members
    };

    struct State {
        best: Option<(f64, Bits, Bits)>,
        spent: usize,
    }
    let mut state = State { best: None, spent: 0 };

    fn consider(state: &mut State, search: &BicliqueSearch, units: &Bits, support: &Bits) {
        let (u, a) = (units.count(), support.count());
        if u >= search.min_units && a >= search.min_assignments {
            let s = search.score.eval(u, a);
            if state.best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                state.best = Some((s, units.clone(), support.clone()));
            }
        }
    }

    fn dfs<F: Fn(&Bits) -> Bits>(
        graph: &NullExposureGraph,
        search: &BicliqueSearch,
        closure: &F,
        state: &mut State,
        units: &Bits,
        core: usize,
        support: &Bits,
    ) {
        consider(state, search, units, support);
        let k = graph.units.len();
        let mut children: Vec<(usize, Bits)> = (core..k)
            .filter(|&e| !units.contains(e))
            .map(|e| (e, support.and(&graph.rows[e])))
            .filter(|(_, s)| s.count() >= search.min_assignments)
            .collect();
        children.sort_by_key(|(e, s)| (std::cmp::Reverse(s.count()), *e));
        for (e, child_support) in children {
            if state.spent >= search.budget {
                return;
            }
            state.spent += 1;
            let child = closure(&child_support);
            // prefix-preserving: no new unit below e
            let keeps_prefix = (0..e).all(|u| child.contains(u) == units.contains(u));
            if keeps_prefix {
                dfs(graph, search, closure, state, &child, e + 1, &child_support);
            }
        }
    }

    let all = Bits::full(cols);
    let root = closure(&all);
    dfs(graph, search, &closure, &mut state, &root, 0, &all);

    state.best.map(|(_, units, support)| Biclique { units: units.ones().collect(), columns: support.ones().collect() })
}

/// Focal design from the best biclique: `S = N_b`, focal assignments `Z_b`
/// weighted by their design probabilities.
pub fn biclique_design(graph: &NullExposureGraph, mech: &Mechanism, search: &BicliqueSearch) -> Result<FocalDesign> {
    let fail = Error::NoAdequateBiclique { min_units: search.min_units, min_assignments: search.min_assignments };
    let found = find_biclique(graph, search).ok_or(fail)?;
    let focals: Vec<usize> = found.units.iter().map(|&u| graph.units[u]).collect();
    let tilde_sets = found.units.iter().map(|&u| graph.tilde_sets[u].clone()).collect();
    let assignments: Vec<Assignment> = found.columns.iter().map(|&c| graph.assignments[c].clone()).collect();
    let weights = assignments.iter().map(|z| mech.probability(z)).collect::<Result<Vec<f64>>>()?;
    check_size(focals.len(), graph.kappa)?;
    Ok(FocalDesign {
        focals,
        tilde_sets,
        kappa: graph.kappa,
        assignments: FocalAssignments::Explicit { assignments, weights },
        method: FocalMethod::Biclique,
    })
}

/// Biclique focal design straight from the observed data.
#[allow(clippy::too_many_arguments)]
pub fn biclique_design_from<R: Rng + ?Sized>(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
    z0_draws: usize,
    search: &BicliqueSearch,
    rng: &mut R,
) -> Result<FocalDesign> {
    let graph = build_null_exposure_graph(pair, observed, net, mech, kappa, z0_draws, rng)?;
    biclique_design(&graph, mech, search)
}
