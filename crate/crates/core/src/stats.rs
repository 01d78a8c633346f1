//! Test statistics over the focal units: Kruskal–Wallis on midranks, the
//! average cross difference of group means, the OLS F statistic for the
//! finer-exposure regressors, and the Simes combination of p-values.

use std::fmt;
use std::sync::Arc;

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::exposure::{Exposure, HypothesisPair};
use crate::focal::FocalDesign;
use crate::graph::Network;

/// Relative tolerance below which a regressor column counts as collinear.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Group index (0-based) of each focal unit: the position of its finer
/// exposure within its own ordered imputable set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub index: Vec<usize>,
    pub kappa: usize,
}

impl Grouping {
    pub fn new(index: Vec<usize>, kappa: usize) -> Result<Self> {
        if let Some(&j) = index.iter().find(|&&j| j >= kappa) {
            return Err(Error::InvalidParameter(format!("group index {j} outside 0..{kappa}")));
        }
        Ok(Self { index, kappa })
    }

    /// Number of focal units per group.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.kappa];
        for &j in &self.index {
            out[j] += 1;
        }
        out
    }

    pub fn nonempty_groups(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }
}

/// Groups the focal units of `design` at assignment `z`.
pub fn group_focals(design: &FocalDesign, pair: &HypothesisPair, net: &Network, z: &Assignment) -> Result<Grouping> {
    if z.len() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), found: z.len() });
    }
    let index = design
        .focals
        .iter()
        .zip(&design.tilde_sets)
        .map(|(&i, set)| {
            let e = pair.alt.value(i, z, net);
            set.iter()
                .position(|v| *v == e)
                .ok_or_else(|| Error::Specification(format!("unit {i}: exposure {e} at a non-focal assignment")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grouping { index, kappa: design.kappa })
}

/// Ranks `1..=N` with tied values sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn check_lengths(y: &[f64], grouping: &Grouping) -> Result<()> {
    if y.len() != grouping.index.len() {
        return Err(Error::LengthMismatch { expected: grouping.index.len(), found: y.len() });
    }
    Ok(())
}

/// Per-group (count, sum).
fn group_sums(values: &[f64], grouping: &Grouping) -> Vec<(usize, f64)> {
    let mut out = vec![(0usize, 0.0f64); grouping.kappa];
    for (&j, &v) in grouping.index.iter().zip(values) {
        out[j].0 += 1;
        out[j].1 += v;
    }
    out
}

/// Kruskal–Wallis statistic from precomputed ranks.
pub fn kw_from_ranks(ranks: &[f64], grouping: &Grouping) -> Result<f64> {
    check_lengths(ranks, grouping)?;
    let n = ranks.len() as f64;
    let sums = group_sums(ranks, grouping);
    if sums.iter().filter(|(c, _)| *c > 0).count() < 2 {
        return Err(Error::DegenerateStatistic("fewer than two nonempty groups"));
    }
    let center = (n + 1.0) / 2.0;
    let total: f64 = sums
        .iter()
        .filter(|(c, _)| *c > 0)
        .map(|&(c, s)| {
            let d = s / c as f64 - center;
            c as f64 * d * d
        })
        .sum();
    Ok(12.0 / (n * (n + 1.0)) * total)
}

/// Kruskal–Wallis statistic with midranks.
pub fn kw_statistic(y: &[f64], grouping: &Grouping) -> Result<f64> {
    kw_from_ranks(&midranks(y), grouping)
}

/// Average absolute difference of group means over all pairs of nonempty
/// groups.
pub fn acd_statistic(y: &[f64], grouping: &Grouping) -> Result<f64> {
    check_lengths(y, grouping)?;
    let means: Vec<f64> =
        group_sums(y, grouping).into_iter().filter(|(c, _)| *c > 0).map(|(c, s)| s / c as f64).collect();
    let g = means.len();
    if g < 2 {
        return Err(Error::DegenerateStatistic("fewer than two nonempty groups"));
    }
    let mut total = 0.0;
    for a in 0..g {
        for b in a + 1..g {
            total += (means[a] - means[b]).abs();
        }
    }
    Ok(2.0 * total / (g * (g - 1)) as f64)
}

/// Incremental orthonormal basis built by modified Gram–Schmidt with one
/// reorthogonalization pass; collinear columns are rejected.
struct Basis {
    rows: usize,
    cols: Vec<Vec<f64>>,
}

impl Basis {
    fn new(rows: usize) -> Self {
        Self { rows, cols: Vec::new() }
    }

    fn try_add(&mut self, column: &[f64]) -> bool {
        let norm0 = dot(column, column).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut v = column.to_vec();
        for _ in 0..2 {
            for q in &self.cols {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= COLLINEARITY_TOL * norm0 || self.cols.len() >= self.rows {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.cols.push(v);
        true
    }

    fn residual_ss(&self, y: &[f64]) -> f64 {
        let mut r = y.to_vec();
        for q in &self.cols {
            let c = dot(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        dot(&r, &r)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// F statistic for dropping the `x` regressors from
/// `y ~ 1 + e0 + x`; each row of `e0` and `x` belongs to one focal unit.
///
/// Collinear columns are dropped (null regressors first, so a dropped
/// finer-exposure column reduces the numerator degrees of freedom). A
/// perfect fit with a nonzero improvement returns `+inf`.
pub fn ols_f_statistic(y: &[f64], e0: &[Vec<f64>], x: &[Vec<f64>]) -> Result<f64> {
    let n = y.len();
    if e0.len() != n || x.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: if e0.len() != n { e0.len() } else { x.len() } });
    }
    let column = |rows: &[Vec<f64>], k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
    let width = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
    let mut basis = Basis::new(n);
    basis.try_add(&vec![1.0; n]);
    for k in 0..width(e0) {
        basis.try_add(&column(e0, k));
    }
    let rss_restricted = basis.residual_ss(y);
    let before = basis.cols.len();
    for k in 0..width(x) {
        basis.try_add(&column(x, k));
    }
    let q = basis.cols.len() - before;
    let p = basis.cols.len();
    if q == 0 {
        return Err(Error::DegenerateStatistic("no finer-exposure regressor varies independently"));
    }
    if n <= p {
        return Err(Error::DegenerateStatistic("no residual degrees of freedom"));
    }
    let rss_full = basis.residual_ss(y);
    let scale = dot(y, y).max(f64::MIN_POSITIVE);
    let improvement = (rss_restricted - rss_full).max(0.0);
    if rss_full <= 1e-24 * scale {
        return if improvement > 1e-24 * scale {
            Ok(f64::INFINITY)
        } else {
            Err(Error::DegenerateStatistic("outcomes fitted exactly by the null regressors"))
        };
    }
    Ok((improvement / q as f64) / (rss_full / (n - p) as f64))
}

/// Regressors `(E⁰ part, X part)` of unit `i` at assignment `z`.
///
/// X rules: max treated peer for `own` vs `own_any_peer`; own treatment and
/// max treated peer for `any_neighborhood` vs `own_any_peer`; treated peer
/// count whenever the finer exposure is `own_peer_count`; own treatment for
/// `constant` vs `own`. Other pairs use the components of the finer
/// exposure.
pub fn regressors(pair: &HypothesisPair, i: usize, z: &Assignment, net: &Network) -> (Vec<f64>, Vec<f64>) {
    let e0: Vec<f64> = pair.null.value(i, z, net).components().iter().map(|&v| v as f64).collect();
    let e1 = pair.alt.value(i, z, net);
    let c = e1.components();
    let x = match (&pair.null, &pair.alt) {
        (Exposure::Own, Exposure::OwnAndAnyPeer) => vec![c[1] as f64],
        (Exposure::AnyNeighborhood, Exposure::OwnAndAnyPeer) => vec![c[0] as f64, c[1] as f64],
        (_, Exposure::OwnAndPeerCount) => vec![c[1] as f64],
        (Exposure::Constant, Exposure::Own) => vec![c[0] as f64],
        _ => c.iter().map(|&v| v as f64).collect(),
    };
    (e0, x)
}

/// Outcome of the Simes procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimesDecision {
    pub reject: bool,
    /// Largest (1-based) sorted position `k` with `p_(k) <= k alpha / s`.
    pub threshold_index: Option<usize>,
}

/// Simes test: reject when some sorted `p_(k) <= k alpha / s`.
pub fn simes(p_values: &[f64], alpha: f64) -> Result<SimesDecision> {
    if p_values.is_empty() {
        return Err(Error::InvalidParameter("Simes needs at least one p-value".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("p-value {p} outside [0, 1]")));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = sorted.len() as f64;
    let threshold_index =
        sorted.iter().enumerate().rev().find(|(k, &p)| p <= (*k + 1) as f64 * alpha / s).map(|(k, _)| k + 1);
    Ok(SimesDecision { reject: threshold_index.is_some(), threshold_index })
}

/// Smallest level at which Simes rejects: `min_k s p_(k) / k`, capped at 1.
pub fn simes_p_value(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::InvalidParameter("Simes needs at least one p-value".into()));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = sorted.len() as f64;
    Ok(sorted.iter().enumerate().map(|(k, &p)| s * p / (k + 1) as f64).fold(1.0, f64::min))
}

/// Statistic evaluated on focal outcomes and their grouping.
pub trait CustomStatistic: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, y: &[f64], grouping: &Grouping) -> Result<f64>;
}

#[derive(Clone)]
pub enum Statistic {
    Kw,
    Acd,
    OlsF,
    Custom(Arc<dyn CustomStatistic>),
}

impl fmt::Debug for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Statistic {
    pub fn name(&self) -> &str {
        match self {
            Statistic::Kw => "kw",
            Statistic::Acd => "acd",
            Statistic::OlsF => "olsf",
            Statistic::Custom(c) => c.name(),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "kw" => Ok(Statistic::Kw),
            "acd" => Ok(Statistic::Acd),
            "olsf" | "ols" => Ok(Statistic::OlsF),
            other => Err(Error::InvalidParameter(format!("unknown statistic `{other}`; expected kw, acd or olsf"))),
        }
    }
}
