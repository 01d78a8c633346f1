//! Known experimental designs: sampling, support membership and exact
//! conditional sampling.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on rejection attempts per accepted draw.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000;

/// Binary treatment vector `z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn new(z: Vec<u8>) -> Result<Self> {
        if let Some(bad) = z.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParameter(format!("treatment value {bad} is not 0 or 1")));
        }
        Ok(Self(z))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_bools(z: &[bool]) -> Self {
        Self(z.iter().map(|&b| u8::from(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = u8::from(v);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn treated(&self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.0 {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Design {
    Bernoulli { probs: Vec<f64> },
    Complete { n: usize, treated: usize },
    Stratified { stratum_of: Vec<usize>, members: Vec<Vec<usize>>, treated: Vec<usize> },
}

/// A known assignment mechanism `P_Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    design: Design,
}

impl Mechanism {
    /// Independent coin flips with per-unit treatment probabilities.
    pub fn bernoulli(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("Bernoulli design needs at least one unit".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("treatment probability {p} outside [0, 1]")));
        }
        Ok(Self { design: Design::Bernoulli { probs } })
    }

    pub fn bernoulli_uniform(n: usize, p: f64) -> Result<Self> {
        Self::bernoulli(vec![p; n])
    }

    /// Exactly `treated` of `n` units treated, uniformly over patterns.
    pub fn complete(n: usize, treated: usize) -> Result<Self> {
        if treated == 0 || treated >= n {
            return Err(Error::InvalidParameter(format!(
                "complete randomization needs 0 < m < n, got m = {treated}, n = {n}"
            )));
        }
        Ok(Self { design: Design::Complete { n, treated } })
    }

    /// Complete randomization within strata. `labels[i]` is the stratum of
    /// unit `i`; `treated` maps each label to its treated count.
    pub fn stratified(labels: &[i64], treated: &BTreeMap<i64, usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter("stratified design needs at least one unit".into()));
        }
        let mut index: BTreeMap<i64, usize> = BTreeMap::new();
        for &l in labels {
            let next = index.len();
            index.entry(l).or_insert(next);
        }
        let mut members = vec![Vec::new(); index.len()];
        let stratum_of: Vec<usize> = labels.iter().map(|l| index[l]).collect();
        for (i, &s) in stratum_of.iter().enumerate() {
            members[s].push(i);
        }
        let mut counts = vec![0; index.len()];
        for (label, &s) in &index {
            let m = *treated
                .get(label)
                .ok_or_else(|| Error::InvalidParameter(format!("no treated count for stratum {label}")))?;
            if m > members[s].len() {
                return Err(Error::InvalidParameter(format!(
                    "stratum {label} has {} units but {m} treated",
                    members[s].len()
                )));
            }
            counts[s] = m;
        }
        if let Some(l) = treated.keys().find(|l| !index.contains_key(l)) {
            return Err(Error::InvalidParameter(format!("treated count given for unknown stratum {l}")));
        }
        Ok(Self { design: Design::Stratified { stratum_of, members, treated: counts } })
    }

    pub fn n(&self) -> usize {
        match &self.design {
            Design::Bernoulli { probs } => probs.len(),
            Design::Complete { n, .. } => *n,
            Design::Stratified { stratum_of, .. } => stratum_of.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.design {
            Design::Bernoulli { .. } => "bernoulli",
            Design::Complete { .. } => "complete",
            Design::Stratified { .. } => "stratified",
        }
    }

    fn check_len(&self, z: &Assignment) -> Result<()> {
        if z.len() == self.n() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.n(), found: z.len() })
        }
    }

    /// One draw from `P_Z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        match &self.design {
            Design::Bernoulli { probs } => Assignment(probs.iter().map(|&p| u8::from(rng.random_bool(p))).collect()),
            Design::Complete { n, treated } => {
                let mut z = vec![0u8; *n];
                for i in index::sample(rng, *n, *treated) {
                    z[i] = 1;
                }
                Assignment(z)
            }
            Design::Stratified { stratum_of, members, treated } => {
                let mut z = vec![0u8; stratum_of.len()];
                for (units, &m) in members.iter().zip(treated) {
                    for k in index::sample(rng, units.len(), m) {
                        z[units[k]] = 1;
                    }
                }
                Assignment(z)
            }
        }
    }

    /// Whether `P_Z(z) > 0`.
    pub fn in_support(&self, z: &Assignment) -> Result<bool> {
        self.check_len(z)?;
        Ok(match &self.design {
            Design::Bernoulli { probs } => probs.iter().zip(z.as_slice()).all(|(&p, &v)| match v {
                0 => p < 1.0,
                _ => p > 0.0,
            }),
            Design::Complete { treated, .. } => z.treated() == *treated,
            Design::Stratified { members, treated, .. } => members
                .iter()
                .zip(treated)
                .all(|(units, &m)| units.iter().map(|&i| z.get(i) as usize).sum::<usize>() == m),
        })
    }

    /// `P_Z(z)`.
    pub fn probability(&self, z: &Assignment) -> Result<f64> {
        if !self.in_support(z)? {
            return Ok(0.0);
        }
        Ok(match &self.design {
            Design::Bernoulli { probs } => {
                probs.iter().zip(z.as_slice()).map(|(&p, &v)| if v == 1 { p } else { 1.0 - p }).product()
            }
            Design::Complete { n, treated } => 1.0 / binomial(*n, *treated),
            Design::Stratified { members, treated, .. } => {
                members.iter().zip(treated).map(|(u, &m)| 1.0 / binomial(u.len(), m)).product()
            }
        })
    }

    /// Number of support points, saturating.
    pub fn support_size(&self) -> u128 {
        match &self.design {
            Design::Bernoulli { probs } => {
                let free = probs.iter().filter(|&&p| p > 0.0 && p < 1.0).count();
                1u128.checked_shl(free as u32).unwrap_or(u128::MAX)
            }
            Design::Complete { n, treated } => binomial_u128(*n, *treated),
            Design::Stratified { members, treated, .. } => {
                members.iter().zip(treated).fold(1u128, |acc, (u, &m)| acc.saturating_mul(binomial_u128(u.len(), m)))
            }
        }
    }

    /// Every support point with its probability, refusing above `cap` points.
    pub fn enumerate_support(&self, cap: u128) -> Result<Vec<(Assignment, f64)>> {
        let size = self.support_size();
        if size > cap {
            return Err(Error::EnumerationCap { size, cap });
        }
        let n = self.n();
        let mut out = Vec::with_capacity(size as usize);
        let mut z = vec![0u8; n];
        // remaining treated per block; Bernoulli units are unconstrained
        let (block_of, mut left, mut slots): (Vec<Option<usize>>, Vec<usize>, Vec<usize>) = match &self.design {
            Design::Bernoulli { .. } => (vec![None; n], Vec::new(), Vec::new()),
            Design::Complete { n, treated } => (vec![Some(0); *n], vec![*treated], vec![*n]),
            Design::Stratified { stratum_of, members, treated } => {
                (stratum_of.iter().map(|&s| Some(s)).collect(), treated.clone(), members.iter().map(Vec::len).collect())
            }
        };
        self.enumerate_rec(0, &mut z, &block_of, &mut left, &mut slots, &mut out)?;
        Ok(out)
    }

    fn enumerate_rec(
        &self,
        i: usize,
        z: &mut Vec<u8>,
        block_of: &[Option<usize>],
        left: &mut [usize],
        slots: &mut [usize],
        out: &mut Vec<(Assignment, f64)>,
    ) -> Result<()> {
        if i == z.len() {
            let a = Assignment(z.clone());
            let p = self.probability(&a)?;
            out.push((a, p));
            return Ok(());
        }
        for v in [0u8, 1] {
            let ok = match (&self.design, block_of[i]) {
                (Design::Bernoulli { probs }, _) => {
                    if v == 1 {
                        probs[i] > 0.0
                    } else {
                        probs[i] < 1.0
                    }
                }
                (_, Some(b)) => {
                    if v == 1 {
                        left[b] > 0
                    } else {
                        slots[b] > left[b]
                    }
                }
                _ => unreachable!(),
            };
            if !ok {
                continue;
            }
            z[i] = v;
            if let Some(b) = block_of[i] {
                slots[b] -= 1;
                left[b] -= v as usize;
                self.enumerate_rec(i + 1, z, block_of, left, slots, out)?;
                slots[b] += 1;
                left[b] += v as usize;
            } else {
                self.enumerate_rec(i + 1, z, block_of, left, slots, out)?;
            }
        }
        z[i] = 0;
        Ok(())
    }

    /// Whether unit `i` can take treatment value `own` under the design.
    pub fn allows(&self, i: usize, own: u8) -> bool {
        match &self.design {
            Design::Bernoulli { probs } => {
                if own == 1 {
                    probs[i] > 0.0
                } else {
                    probs[i] < 1.0
                }
            }
            Design::Complete { n, treated } => {
                if own == 1 {
                    *treated > 0
                } else {
                    *n > *treated
                }
            }
            Design::Stratified { stratum_of, members, treated } => {
                let s = stratum_of[i];
                if own == 1 {
                    treated[s] > 0
                } else {
                    members[s].len() > treated[s]
                }
            }
        }
    }

    /// Range `[lo, hi]` of treated counts among `peers` (which must not
    /// contain `i`) over support points with `z_i = own`; `None` when
    /// `z_i = own` is impossible. Every count in the range is attainable.
    pub fn peer_count_range(&self, i: usize, peers: &[usize], own: u8) -> Option<(usize, usize)> {
        if !self.allows(i, own) {
            return None;
        }
        match &self.design {
            Design::Bernoulli { probs } => {
                let lo = peers.iter().filter(|&&j| probs[j] >= 1.0).count();
                let hi = peers.iter().filter(|&&j| probs[j] > 0.0).count();
                Some((lo, hi))
            }
            Design::Complete { n, treated } => {
                let t = treated - own as usize;
                let r = n - 1;
                let d = peers.len();
                Some((d.saturating_sub(r - t), d.min(t)))
            }
            Design::Stratified { stratum_of, members, treated } => {
                let mut per = vec![0usize; members.len()];
                for &j in peers {
                    per[stratum_of[j]] += 1;
                }
                let (mut lo, mut hi) = (0, 0);
                for (s, &d) in per.iter().enumerate() {
                    let own_here = stratum_of[i] == s;
                    let t = treated[s] - if own_here { own as usize } else { 0 };
                    let r = members[s].len() - usize::from(own_here);
                    lo += d.saturating_sub(r - t);
                    hi += d.min(t);
                }
                Some((lo, hi))
            }
        }
    }

    /// Rejection sampling from `P_Z` restricted to `accept`.
    ///
    /// Exact in law; fails loudly with the attempts used when nothing is
    /// accepted within `max_attempts`.
    pub fn sample_conditional<R, F>(&self, accept: F, max_attempts: u64, rng: &mut R) -> Result<ConditionalDraw>
    where
        R: Rng + ?Sized,
        F: Fn(&Assignment) -> bool,
    {
        for attempt in 1..=max_attempts {
            let z = self.sample(rng);
            if accept(&z) {
                return Ok(ConditionalDraw { z, attempts: attempt });
            }
        }
        Err(Error::LowAcceptance { attempts: max_attempts })
    }

    /// Exact draw from `P_Z` given `z_i = v` for every `(i, v)` in `fixed`.
    pub fn sample_conditional_fixed_units<R: Rng + ?Sized>(
        &self,
        fixed: &BTreeMap<usize, u8>,
        rng: &mut R,
    ) -> Result<Assignment> {
        let pattern = FixedPattern::new(self, fixed.iter().map(|(&i, &v)| (i, v)))?;
        Ok(pattern.sample(rng))
    }
}

/// An accepted rejection-sampling draw and how many proposals it took.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDraw {
    pub z: Assignment,
    pub attempts: u64,
}

/// Precompiled per-unit fixed pattern for direct conditional sampling.
#[derive(Debug, Clone)]
pub struct FixedPattern {
    base: Vec<u8>,
    kind: FreeUnits,
}

#[derive(Debug, Clone)]
enum FreeUnits {
    Coins(Vec<(usize, f64)>),
    // (free units, number of them to treat) per block
    Blocks(Vec<(Vec<usize>, usize)>),
}

impl FixedPattern {
    pub fn new<I>(mech: &Mechanism, fixed: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u8)>,
    {
        let n = mech.n();
        let mut value: Vec<Option<u8>> = vec![None; n];
        for (i, v) in fixed {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if v > 1 {
                return Err(Error::InvalidParameter(format!("fixed value {v} is not 0 or 1")));
            }
            match value[i] {
                Some(w) if w != v => {
                    return Err(Error::Infeasible(format!("unit {i} fixed to both 0 and 1")));
                }
                _ => value[i] = Some(v),
            }
        }
        let base: Vec<u8> = value.iter().map(|v| v.unwrap_or(0)).collect();
        let blocks = |groups: Vec<(Vec<usize>, usize)>| -> Result<FreeUnits> {
            let mut out = Vec::with_capacity(groups.len());
            for (units, m) in groups {
                let ones = units.iter().filter(|&&i| value[i] == Some(1)).count();
                let zeros = units.iter().filter(|&&i| value[i] == Some(0)).count();
                if ones > m || zeros > units.len() - m {
                    return Err(Error::Infeasible(format!(
                        "{ones} fixed treated and {zeros} fixed controls incompatible with {m} of {} treated",
                        units.len()
                    )));
                }
                let free: Vec<usize> = units.into_iter().filter(|&i| value[i].is_none()).collect();
                out.push((free, m - ones));
            }
            Ok(FreeUnits::Blocks(out))
        };
        let kind = match &mech.design {
            Design::Bernoulli { probs } => {
                for (i, v) in value.iter().enumerate() {
                    if let Some(v) = v {
                        if !mech.allows(i, *v) {
                            return Err(Error::Infeasible(format!(
                                "unit {i} fixed to {v} but has treatment probability {}",
                                probs[i]
                            )));
                        }
                    }
                }
                FreeUnits::Coins((0..n).filter(|&i| value[i].is_none()).map(|i| (i, probs[i])).collect())
            }
            Design::Complete { n, treated } => blocks(vec![((0..*n).collect(), *treated)])?,
            Design::Stratified { members, treated, .. } => {
                blocks(members.iter().cloned().zip(treated.iter().copied()).collect())?
            }
        };
        Ok(Self { base, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut z = self.base.clone();
        match &self.kind {
            FreeUnits::Coins(units) => {
                for &(i, p) in units {
                    z[i] = u8::from(rng.random_bool(p));
                }
            }
            FreeUnits::Blocks(blocks) => {
                for (free, m) in blocks {
                    for k in index::sample(rng, free.len(), *m) {
                        z[free[k]] = 1;
                    }
                }
            }
        }
        Assignment(z)
    }

    /// Whether `z` agrees with every fixed unit.
    pub fn matches(&self, z: &Assignment, fixed: &[(usize, u8)]) -> bool {
        fixed.iter().all(|&(i, v)| z.get(i) == v)
    }
}

/// `n choose k` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // exact at each step: acc * (n - j) is divisible by (j + 1)
        acc = match acc.checked_mul((n - j) as u128) {
            Some(v) => v / (j as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}
