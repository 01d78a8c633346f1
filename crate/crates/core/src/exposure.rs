//! Exposure mappings, the coarsening relation between a null exposure and a
//! finer one, and the sets of finer exposure values that the null makes
//! imputable for each unit.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use smallvec::SmallVec;

use crate::assignment::{Assignment, Mechanism};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::rng::stream;

/// Draws used to approximate the range of exposures without a closed form.
pub const SAMPLED_RANGE_DRAWS: usize = 4096;

/// Value of an exposure mapping: a short tuple of non-negative integers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExposureValue(SmallVec<[u32; 2]>);

impl ExposureValue {
    pub fn scalar(a: u32) -> Self {
        Self(SmallVec::from_slice(&[a]))
    }

    pub fn pair(a: u32, b: u32) -> Self {
        Self(SmallVec::from_slice(&[a, b]))
    }

    pub fn from_slice(v: &[u32]) -> Self {
        Self(SmallVec::from_slice(v))
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Debug for ExposureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ExposureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.as_slice() {
            [a] => write!(f, "{a}"),
            vals => {
                write!(f, "(")?;
                for (k, v) in vals.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// User-supplied exposure mapping.
///
/// Implementations must be deterministic and must report every unit their
/// value can depend on, so that focal constructions stay computable.
pub trait CustomExposure: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, i: usize, z: &Assignment, net: &Network) -> ExposureValue;
    fn dependence(&self, i: usize, net: &Network) -> Vec<usize>;
}

/// An exposure mapping `E_i(z)`.
#[derive(Clone)]
pub enum Exposure {
    /// Same value for every assignment (no treatment effect at all).
    Constant,
    /// `z_i`.
    Own,
    /// Whether anyone in the closed neighborhood is treated.
    AnyNeighborhood,
    /// `(z_i, max_{j in P_i} z_j)`.
    OwnAndAnyPeer,
    /// `(z_i, sum_{j in P_i} z_j)`.
    OwnAndPeerCount,
    /// The whole assignment vector.
    Identity,
    Custom(Arc<dyn CustomExposure>),
}

impl fmt::Debug for Exposure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepted names for built-in exposures.
pub const EXPOSURE_NAMES: &[&str] =
    &["constant", "own", "any_neighborhood", "own_any_peer", "own_peer_count", "identity"];

impl Exposure {
    pub fn name(&self) -> &str {
        match self {
            Exposure::Constant => "constant",
            Exposure::Own => "own",
            Exposure::AnyNeighborhood => "any_neighborhood",
            Exposure::OwnAndAnyPeer => "own_any_peer",
            Exposure::OwnAndPeerCount => "own_peer_count",
            Exposure::Identity => "identity",
            Exposure::Custom(c) => c.name(),
        }
    }

    /// Parses a built-in name; the single letters `a`..`d` are accepted as
    /// aliases for own, any_neighborhood, own_any_peer and own_peer_count.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "constant" => Exposure::Constant,
            "own" | "a" => Exposure::Own,
            "any_neighborhood" | "b" => Exposure::AnyNeighborhood,
            "own_any_peer" | "c" => Exposure::OwnAndAnyPeer,
            "own_peer_count" | "d" => Exposure::OwnAndPeerCount,
            "identity" => Exposure::Identity,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown exposure `{other}`; expected one of {}",
                    EXPOSURE_NAMES.join(", ")
                )))
            }
        })
    }

    fn is_builtin(&self) -> bool {
        !matches!(self, Exposure::Custom(_))
    }

    /// `E_i(z)` with bounds and length checks.
    pub fn eval(&self, i: usize, z: &Assignment, net: &Network) -> Result<ExposureValue> {
        if z.len() != net.len() {
            return Err(Error::LengthMismatch { expected: net.len(), found: z.len() });
        }
        if i >= net.len() {
            return Err(Error::IndexOutOfRange { index: i, n: net.len() });
        }
        Ok(self.value(i, z, net))
    }

    /// `E_i(z)` without checks.
    pub(crate) fn value(&self, i: usize, z: &Assignment, net: &Network) -> ExposureValue {
        let own = z.get(i) as u32;
        let peers = net.peers_of(i);
        match self {
            Exposure::Constant => ExposureValue::scalar(0),
            Exposure::Own => ExposureValue::scalar(own),
            Exposure::AnyNeighborhood => {
                ExposureValue::scalar(own.max(peers.iter().map(|&j| z.get(j) as u32).max().unwrap_or(0)))
            }
            Exposure::OwnAndAnyPeer => {
                ExposureValue::pair(own, peers.iter().map(|&j| z.get(j) as u32).max().unwrap_or(0))
            }
            Exposure::OwnAndPeerCount => ExposureValue::pair(own, peers.iter().map(|&j| z.get(j) as u32).sum()),
            Exposure::Identity => ExposureValue(z.as_slice().iter().map(|&v| v as u32).collect()),
            Exposure::Custom(c) => c.eval(i, z, net),
        }
    }

    /// Units whose treatment can change `E_i`.
    pub fn dependence(&self, i: usize, net: &Network) -> Vec<usize> {
        match self {
            Exposure::Constant => Vec::new(),
            Exposure::Own => vec![i],
            Exposure::AnyNeighborhood | Exposure::OwnAndAnyPeer | Exposure::OwnAndPeerCount => net.closed_of(i),
            Exposure::Identity => (0..net.len()).collect(),
            Exposure::Custom(c) => c.dependence(i, net),
        }
    }

    /// The level set `{z : E_i(z) = value}` as a per-unit fixed pattern, when
    /// it is one.
    pub fn level_set_as_fixed(&self, i: usize, value: &ExposureValue, net: &Network) -> Option<Vec<(usize, u8)>> {
        let peers = net.peers_of(i);
        let all = |v: u8| -> Vec<(usize, u8)> { peers.iter().map(|&j| (j, v)).collect() };
        let c = value.components();
        match self {
            Exposure::Constant => Some(Vec::new()),
            Exposure::Own => Some(vec![(i, c[0] as u8)]),
            Exposure::AnyNeighborhood => match c[0] {
                0 => Some(net.closed_of(i).into_iter().map(|j| (j, 0)).collect()),
                _ if peers.is_empty() => Some(vec![(i, 1)]),
                _ => None,
            },
            Exposure::OwnAndAnyPeer => match c[1] {
                0 => Some([(i, c[0] as u8)].into_iter().chain(all(0)).collect()),
                _ if peers.len() == 1 => Some(vec![(i, c[0] as u8), (peers[0], 1)]),
                _ => None,
            },
            Exposure::OwnAndPeerCount => {
                let k = c[1] as usize;
                if k == 0 || k == peers.len() {
                    let v = u8::from(k > 0);
                    Some([(i, c[0] as u8)].into_iter().chain(all(v)).collect())
                } else {
                    None
                }
            }
            Exposure::Identity => Some(c.iter().enumerate().map(|(j, &v)| (j, v as u8)).collect()),
            Exposure::Custom(_) => None,
        }
    }
}

/// Map from finer exposure values onto null exposure values.
#[derive(Clone)]
pub enum Coarsening {
    /// Everything maps to the constant value.
    ToConstant,
    /// `(a, ..) -> a`.
    First,
    /// `(a, b) -> max(a, b)`.
    MaxOfPair,
    /// `(a, k) -> (a, min(k, 1))`.
    CapSecondAtOne,
    /// `(a, k) -> max(a, min(k, 1))`.
    MaxOfOwnAndAny,
    Identity,
    Custom(Arc<dyn Fn(&ExposureValue) -> ExposureValue + Send + Sync>),
}

impl fmt::Debug for Coarsening {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Coarsening::ToConstant => "ToConstant",
            Coarsening::First => "First",
            Coarsening::MaxOfPair => "MaxOfPair",
            Coarsening::CapSecondAtOne => "CapSecondAtOne",
            Coarsening::MaxOfOwnAndAny => "MaxOfOwnAndAny",
            Coarsening::Identity => "Identity",
            Coarsening::Custom(_) => "Custom",
        };
        f.write_str(s)
    }
}

impl Coarsening {
    pub fn apply(&self, e: &ExposureValue) -> ExposureValue {
        let c = e.components();
        match self {
            Coarsening::ToConstant => ExposureValue::scalar(0),
            Coarsening::First => ExposureValue::scalar(c[0]),
            Coarsening::MaxOfPair => ExposureValue::scalar(c[0].max(c[1])),
            Coarsening::CapSecondAtOne => ExposureValue::pair(c[0], c[1].min(1)),
            Coarsening::MaxOfOwnAndAny => ExposureValue::scalar(c[0].max(c[1].min(1))),
            Coarsening::Identity => e.clone(),
            Coarsening::Custom(f) => f(e),
        }
    }
}

/// User-supplied total order on exposure values.
pub type CompareFn = Arc<dyn Fn(&ExposureValue, &ExposureValue) -> Ordering + Send + Sync>;

/// Order in which each unit's imputable set is enumerated; the position of a
/// value in that order is its group index.
#[derive(Clone, Default)]
pub enum OrderRule {
    /// Lexicographic on the tuple, own treatment first. For
    /// `(z_i, max peer)` this is the order of `2 z_i + max peer`.
    #[default]
    Lexicographic,
    /// Lexicographic on the reversed tuple.
    ComponentsReversed,
    Custom(CompareFn),
}

impl fmt::Debug for OrderRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderRule::Lexicographic => f.write_str("Lexicographic"),
            OrderRule::ComponentsReversed => f.write_str("ComponentsReversed"),
            OrderRule::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl OrderRule {
    pub fn compare(&self, a: &ExposureValue, b: &ExposureValue) -> Ordering {
        match self {
            OrderRule::Lexicographic => a.cmp(b),
            OrderRule::ComponentsReversed => a.components().iter().rev().cmp(b.components().iter().rev()),
            OrderRule::Custom(f) => f(a, b),
        }
    }
}

/// A null exposure, a finer exposure and the coarsening between them.
#[derive(Clone, Debug)]
pub struct HypothesisPair {
    pub null: Exposure,
    pub alt: Exposure,
    pub coarsen: Coarsening,
    pub order: OrderRule,
}

impl HypothesisPair {
    /// Pair of built-in exposures with the matching built-in coarsening.
    pub fn builtin(null: Exposure, alt: Exposure) -> Result<Self> {
        use Exposure as E;
        let coarsen = match (&null, &alt) {
            (E::Custom(_), _) | (_, E::Custom(_)) => {
                return Err(Error::Specification("custom exposures need an explicit coarsening".into()))
            }
            (a, b) if a.name() == b.name() => Coarsening::Identity,
            (E::Constant, _) => Coarsening::ToConstant,
            (E::Own, E::OwnAndAnyPeer | E::OwnAndPeerCount) => Coarsening::First,
            (E::AnyNeighborhood, E::OwnAndAnyPeer) => Coarsening::MaxOfPair,
            (E::AnyNeighborhood, E::OwnAndPeerCount) => Coarsening::MaxOfOwnAndAny,
            (E::OwnAndAnyPeer, E::OwnAndPeerCount) => Coarsening::CapSecondAtOne,
            (a, b) => {
                return Err(Error::Specification(format!(
                    "`{}` is not a built-in refinement of `{}`",
                    b.name(),
                    a.name()
                )))
            }
        };
        Ok(Self { null, alt, coarsen, order: OrderRule::default() })
    }

    pub fn from_names(null: &str, alt: &str) -> Result<Self> {
        Self::builtin(Exposure::from_name(null)?, Exposure::from_name(alt)?)
    }

    pub fn custom(null: Exposure, alt: Exposure, coarsen: Coarsening) -> Self {
        Self { null, alt, coarsen, order: OrderRule::default() }
    }

    pub fn with_order(mut self, order: OrderRule) -> Self {
        self.order = order;
        self
    }

    /// Short label such as `own/own_any_peer`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.null.name(), self.alt.name())
    }

    /// Both exposures and the coarsening are built-ins, so the coarsening is
    /// known to be consistent and every range has a closed form.
    pub fn is_builtin(&self) -> bool {
        self.null.is_builtin() && self.alt.is_builtin() && !matches!(self.coarsen, Coarsening::Custom(_))
    }
}

/// Attainable values of an exposure for one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureRange {
    pub values: Vec<ExposureValue>,
    /// False when the range was approximated by sampling the design.
    pub exact: bool,
}

/// Values `E_i(z)` attainable over the support of `mech`.
pub fn realizable_range(e: &Exposure, i: usize, net: &Network, mech: &Mechanism) -> Result<ExposureRange> {
    if i >= net.len() {
        return Err(Error::IndexOutOfRange { index: i, n: net.len() });
    }
    if mech.n() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), found: mech.n() });
    }
    let peers = net.peers_of(i);
    let mut values = Vec::new();
    let own_options = [0u8, 1].into_iter().filter_map(|a| mech.peer_count_range(i, peers, a).map(|r| (a as u32, r)));
    match e {
        Exposure::Constant => values.push(ExposureValue::scalar(0)),
        Exposure::Own => values.extend(own_options.map(|(a, _)| ExposureValue::scalar(a))),
        Exposure::AnyNeighborhood => {
            for (a, (lo, hi)) in own_options {
                if a == 1 {
                    values.push(ExposureValue::scalar(1));
                } else {
                    if lo == 0 {
                        values.push(ExposureValue::scalar(0));
                    }
                    if hi > 0 {
                        values.push(ExposureValue::scalar(1));
                    }
                }
            }
        }
        Exposure::OwnAndAnyPeer => {
            for (a, (lo, hi)) in own_options {
                if lo == 0 {
                    values.push(ExposureValue::pair(a, 0));
                }
                if hi > 0 {
                    values.push(ExposureValue::pair(a, 1));
                }
            }
        }
        Exposure::OwnAndPeerCount => {
            for (a, (lo, hi)) in own_options {
                values.extend((lo..=hi).map(|k| ExposureValue::pair(a, k as u32)));
            }
        }
        Exposure::Identity | Exposure::Custom(_) => {
            let mut rng = stream(0x5eed, i as u64);
            return Ok(sampled_range(e, i, net, mech, SAMPLED_RANGE_DRAWS, &mut rng));
        }
    }
    values.sort();
    values.dedup();
    Ok(ExposureRange { values, exact: true })
}

/// Under-approximation of the range from `draws` assignments.
pub fn sampled_range<R: Rng + ?Sized>(
    e: &Exposure,
    i: usize,
    net: &Network,
    mech: &Mechanism,
    draws: usize,
    rng: &mut R,
) -> ExposureRange {
    let mut values: Vec<ExposureValue> = (0..draws).map(|_| e.value(i, &mech.sample(rng), net)).collect();
    values.sort();
    values.dedup();
    ExposureRange { values, exact: false }
}

/// The finer exposure values of unit `i` that coarsen to its observed null
/// exposure, in the pair's order. Always contains `E¹_i(Z)`.
pub fn tilde_set(
    pair: &HypothesisPair,
    i: usize,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
) -> Result<Vec<ExposureValue>> {
    let null_obs = pair.null.eval(i, observed, net)?;
    let alt_obs = pair.alt.value(i, observed, net);
    if pair.coarsen.apply(&alt_obs) != null_obs {
        return Err(Error::Specification(format!(
            "unit {i}: coarsening maps observed {} to {}, but the null exposure is {}",
            alt_obs,
            pair.coarsen.apply(&alt_obs),
            null_obs
        )));
    }
    let range = realizable_range(&pair.alt, i, net, mech)?;
    let mut out: Vec<ExposureValue> = range.values.into_iter().filter(|e| pair.coarsen.apply(e) == null_obs).collect();
    if !out.contains(&alt_obs) {
        if range.exact {
            return Err(Error::Specification(format!(
                "unit {i}: observed exposure {alt_obs} outside its computed range"
            )));
        }
        out.push(alt_obs);
    }
    out.sort_by(|a, b| pair.order.compare(a, b));
    Ok(out)
}

/// Imputable sets for every unit.
pub fn tilde_sets(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
) -> Result<Vec<Vec<ExposureValue>>> {
    (0..net.len()).map(|i| tilde_set(pair, i, observed, net, mech)).collect()
}

/// Units whose imputable set has exactly `kappa` elements.
pub fn candidate_focals(
    pair: &HypothesisPair,
    observed: &Assignment,
    net: &Network,
    mech: &Mechanism,
    kappa: usize,
) -> Result<Vec<usize>> {
    if kappa < 2 {
        return Err(Error::InvalidParameter(format!("kappa must be at least 2, got {kappa}")));
    }
    let sets = tilde_sets(pair, observed, net, mech)?;
    Ok(sets.iter().enumerate().filter(|(_, s)| s.len() == kappa).map(|(i, _)| i).collect())
}

/// Outcome of a randomized coarseness check.
#[derive(Debug, Clone, PartialEq)]
pub enum CoarsenessCheck {
    Pass,
    Fail { unit: usize, z: Assignment },
}

/// Checks `coarsen(E¹_i(z)) = E⁰_i(z)` for all units over `trials` draws.
pub fn check_coarseness<R: Rng + ?Sized>(
    pair: &HypothesisPair,
    net: &Network,
    mech: &Mechanism,
    trials: usize,
    rng: &mut R,
) -> CoarsenessCheck {
    for _ in 0..trials.max(1) {
        let z = mech.sample(rng);
        for i in 0..net.len() {
            if pair.coarsen.apply(&pair.alt.value(i, &z, net)) != pair.null.value(i, &z, net) {
                return CoarsenessCheck::Fail { unit: i, z };
            }
        }
    }
    CoarsenessCheck::Pass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    pub(crate) fn example3() -> (Network, Assignment, Mechanism) {
        // 0-1-2-3-4 path, 5-6 and 7-5; unit ids shifted down by one
        let net = Network::from_pairs(8, [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (7, 5)], true).unwrap();
        let z = Assignment::new(vec![1, 0, 1, 1, 0, 0, 1, 0]).unwrap();
        (net, z, Mechanism::complete(8, 4).unwrap())
    }

    #[test]
    fn table_exposures() {
        let (net, z, _) = example3();
        assert_eq!(Exposure::Own.eval(1, &z, &net).unwrap(), ExposureValue::scalar(0));
        assert_eq!(Exposure::AnyNeighborhood.eval(7, &z, &net).unwrap(), ExposureValue::scalar(0));
        assert_eq!(Exposure::OwnAndAnyPeer.eval(0, &z, &net).unwrap(), ExposureValue::pair(1, 0));
        let expected = [(1, 0), (0, 1), (1, 1), (1, 1), (0, 1), (0, 1), (1, 0), (0, 0)];
        for (i, &(a, b)) in expected.iter().enumerate() {
            assert_eq!(Exposure::OwnAndAnyPeer.value(i, &z, &net), ExposureValue::pair(a, b));
        }
        assert!(Exposure::Own.eval(8, &z, &net).is_err());
        assert!(Exposure::Own.eval(0, &Assignment::zeros(3), &net).is_err());
    }

    #[test]
    fn tilde_sets_example3() {
        let (net, z, mech) = example3();
        let pair = HypothesisPair::builtin(Exposure::AnyNeighborhood, Exposure::OwnAndAnyPeer).unwrap();
        let three = vec![ExposureValue::pair(0, 1), ExposureValue::pair(1, 0), ExposureValue::pair(1, 1)];
        for i in 0..7 {
            assert_eq!(tilde_set(&pair, i, &z, &net, &mech).unwrap(), three);
        }
        assert_eq!(tilde_set(&pair, 7, &z, &net, &mech).unwrap(), vec![ExposureValue::pair(0, 0)]);
        assert_eq!(candidate_focals(&pair, &z, &net, &mech, 3).unwrap(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn fisher_pair_tilde() {
        let (net, z, mech) = example3();
        let pair = HypothesisPair::builtin(Exposure::Constant, Exposure::Own).unwrap();
        for i in 0..8 {
            assert_eq!(
                tilde_set(&pair, i, &z, &net, &mech).unwrap(),
                vec![ExposureValue::scalar(0), ExposureValue::scalar(1)]
            );
        }
    }

    #[test]
    fn ranges() {
        let net = Network::from_pairs(4, [(0, 1), (0, 2), (0, 3)], true).unwrap();
        let bern = Mechanism::bernoulli_uniform(4, 0.5).unwrap();
        let isolated = Network::empty(4).unwrap();
        let r = realizable_range(&Exposure::OwnAndAnyPeer, 0, &isolated, &bern).unwrap();
        assert_eq!(r.values, vec![ExposureValue::pair(0, 0), ExposureValue::pair(1, 0)]);
        let r = realizable_range(&Exposure::OwnAndPeerCount, 0, &net, &bern).unwrap();
        assert_eq!(r.values.len(), 8);
        assert!(r.exact);
        let comp = Mechanism::complete(4, 2).unwrap();
        let r = realizable_range(&Exposure::Own, 2, &net, &comp).unwrap();
        assert_eq!(r.values, vec![ExposureValue::scalar(0), ExposureValue::scalar(1)]);
        // with 2 of 4 treated, unit 0's three peers hold both treated units
        // when it is control and one when it is treated
        let r = realizable_range(&Exposure::OwnAndPeerCount, 0, &net, &comp).unwrap();
        assert_eq!(r.values, vec![ExposureValue::pair(0, 2), ExposureValue::pair(1, 1)]);
    }

    #[test]
    fn ranges_match_enumeration() {
        let net = Network::from_pairs(6, [(0, 1), (0, 2), (3, 4), (1, 5)], false).unwrap();
        for mech in
            [Mechanism::complete(6, 2).unwrap(), Mechanism::bernoulli(vec![0.5, 1.0, 0.3, 0.0, 0.5, 0.5]).unwrap()]
        {
            let support = mech.enumerate_support(1 << 10).unwrap();
            for e in [Exposure::Own, Exposure::AnyNeighborhood, Exposure::OwnAndAnyPeer, Exposure::OwnAndPeerCount] {
                for i in 0..6 {
                    let mut brute: Vec<_> = support.iter().map(|(z, _)| e.value(i, z, &net)).collect();
                    brute.sort();
                    brute.dedup();
                    assert_eq!(realizable_range(&e, i, &net, &mech).unwrap().values, brute, "{e:?} unit {i}");
                }
            }
        }
    }

    #[test]
    fn simulation_candidate_pools() {
        let mut rng = stream(11, 0);
        let net = crate::graph::erdos_renyi(200, 3.0 / 200.0, &mut rng).unwrap();
        let mech = Mechanism::complete(200, 100).unwrap();
        let z = mech.sample(&mut rng);
        let p1 = HypothesisPair::builtin(Exposure::Own, Exposure::OwnAndAnyPeer).unwrap();
        let want: Vec<usize> = (0..200).filter(|&i| net.degree(i).unwrap() > 0).collect();
        assert_eq!(candidate_focals(&p1, &z, &net, &mech, 2).unwrap(), want);
        let p2 = HypothesisPair::builtin(Exposure::Own, Exposure::OwnAndPeerCount).unwrap();
        let want: Vec<usize> = (0..200).filter(|&i| net.degree(i).unwrap() == 3).collect();
        assert_eq!(candidate_focals(&p2, &z, &net, &mech, 4).unwrap(), want);
        assert!(candidate_focals(&p2, &z, &net, &mech, 1).is_err());
    }

    #[test]
    fn count_refinement_pool() {
        // (E^c, E^d): units with a treated peer and degree kappa
        let mut rng = stream(12, 0);
        let net = crate::graph::erdos_renyi(200, 3.0 / 200.0, &mut rng).unwrap();
        let mech = Mechanism::complete(200, 100).unwrap();
        let z = mech.sample(&mut rng);
        let pair = HypothesisPair::builtin(Exposure::OwnAndAnyPeer, Exposure::OwnAndPeerCount).unwrap();
        let want: Vec<usize> = (0..200)
            .filter(|&i| net.degree(i).unwrap() == 3 && net.peers(i).unwrap().iter().any(|&j| z.get(j) == 1))
            .collect();
        assert_eq!(candidate_focals(&pair, &z, &net, &mech, 3).unwrap(), want);
    }

    #[test]
    fn coarseness_checks() {
        let (net, _, mech) = example3();
        let mut rng = stream(13, 0);
        let a_c = HypothesisPair::builtin(Exposure::Own, Exposure::OwnAndAnyPeer).unwrap();
        assert_eq!(check_coarseness(&a_c, &net, &mech, 200, &mut rng), CoarsenessCheck::Pass);
        let b_c = HypothesisPair::builtin(Exposure::AnyNeighborhood, Exposure::OwnAndAnyPeer).unwrap();
        assert_eq!(check_coarseness(&b_c, &net, &mech, 200, &mut rng), CoarsenessCheck::Pass);

        let two = Network::from_pairs(2, [(0, 1)], true).unwrap();
        let bern = Mechanism::bernoulli_uniform(2, 0.5).unwrap();
        let wrong = HypothesisPair::custom(Exposure::Own, Exposure::AnyNeighborhood, Coarsening::Identity);
        match check_coarseness(&wrong, &two, &bern, 500, &mut rng) {
            CoarsenessCheck::Fail { unit, z } => {
                assert_ne!(wrong.alt.value(unit, &z, &two), wrong.null.value(unit, &z, &two));
            }
            CoarsenessCheck::Pass => panic!("identity map from E^b to E^a must fail"),
        }
    }

    #[test]
    fn inconsistent_pair_is_reported() {
        let (net, z, mech) = example3();
        let wrong = HypothesisPair::custom(Exposure::Own, Exposure::AnyNeighborhood, Coarsening::Identity);
        // unit 1 is a control with a treated peer
        assert!(matches!(tilde_set(&wrong, 1, &z, &net, &mech), Err(Error::Specification(_))));
        assert!(HypothesisPair::from_names("own_any_peer", "own").is_err());
        assert!(Exposure::from_name("nope").unwrap_err().to_string().contains("own_any_peer"));
    }

    #[test]
    fn locality_of_builtins() {
        let mut rng = stream(14, 0);
        let net = crate::graph::erdos_renyi(30, 0.1, &mut rng).unwrap();
        let mech = Mechanism::bernoulli_uniform(30, 0.5).unwrap();
        for e in [
            Exposure::Constant,
            Exposure::Own,
            Exposure::AnyNeighborhood,
            Exposure::OwnAndAnyPeer,
            Exposure::OwnAndPeerCount,
        ] {
            for _ in 0..50 {
                let z = mech.sample(&mut rng);
                let i = rng.random_range(0..30);
                let dep = e.dependence(i, &net);
                let mut z2 = z.clone();
                for j in (0..30).filter(|j| !dep.contains(j)) {
                    z2.set(j, rng.random_bool(0.5));
                }
                assert_eq!(e.value(i, &z, &net), e.value(i, &z2, &net));
            }
        }
    }

    #[test]
    fn fixed_level_sets() {
        let (net, z, _) = example3();
        let e = Exposure::AnyNeighborhood;
        let v = e.value(7, &z, &net);
        assert_eq!(e.level_set_as_fixed(7, &v, &net), Some(vec![(5, 0), (7, 0)]));
        assert_eq!(e.level_set_as_fixed(1, &e.value(1, &z, &net), &net), None);
        assert_eq!(Exposure::Own.level_set_as_fixed(3, &ExposureValue::scalar(1), &net), Some(vec![(3, 1)]));
    }

    #[test]
    fn order_rules() {
        let a = ExposureValue::pair(0, 1);
        let b = ExposureValue::pair(1, 0);
        assert_eq!(OrderRule::Lexicographic.compare(&a, &b), Ordering::Less);
        assert_eq!(OrderRule::ComponentsReversed.compare(&a, &b), Ordering::Greater);
        assert_eq!(format!("{b}"), "(1, 0)");
    }
}
