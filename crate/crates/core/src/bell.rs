//! Bell expressions over full correlations with two settings per party, and
//! brute-force bounds for local and bipartite hybrid models.
//!
//! A term's settings are stored as a bitmask: bit `k` set means party `k`
//! uses its second setting `β_k`, clear means `α_k`.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correlator::{PartyAngles, Scenario};
use crate::error::{Error, Result};

/// Largest party count for which local strategies are enumerated.
pub const LOCAL_BOUND_CAP: usize = 6;
/// Largest party count for which bipartite hybrid strategies are enumerated.
pub const HYBRID_BOUND_CAP: usize = 5;
/// Largest party count for the full Żukowski–Brukner sum.
pub const ZB_CAP: usize = 4;

const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTerm {
    /// Setting index per party, 1 or 2.
    pub settings: Vec<u8>,
    pub coefficient: f64,
}

impl CorrelationTerm {
    pub fn mask(&self) -> usize {
        self.settings
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 2)
            .fold(0, |acc, (k, _)| acc | (1 << k))
    }

    fn from_mask(parties: usize, mask: usize, coefficient: f64) -> Self {
        let settings = (0..parties).map(|k| if mask >> k & 1 == 1 { 2 } else { 1 }).collect();
        Self { settings, coefficient }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionKind {
    Bancal,
    Mabk,
    ZbFull,
    Chsh,
}

impl ExpressionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExpressionKind::Bancal => "bancal",
            ExpressionKind::Mabk => "mabk",
            ExpressionKind::ZbFull => "zb",
            ExpressionKind::Chsh => "chsh",
        }
    }
}

impl fmt::Display for ExpressionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExpressionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bancal" => ExpressionKind::Bancal,
            "mabk" => ExpressionKind::Mabk,
            "zb" | "zb-full" => ExpressionKind::ZbFull,
            "chsh" => ExpressionKind::Chsh,
            other => return Err(Error::InvalidParameter(format!("unknown inequality {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    NongenuineLocal,
    GenuineHybrid,
}

/// `f = Σ_terms c · E(settings)` with `|f| <= declared_bound` for the
/// models named by `bound_type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellExpression {
    pub parties: usize,
    pub terms: Vec<CorrelationTerm>,
    pub kind: ExpressionKind,
    pub declared_bound: f64,
    pub bound_type: BoundType,
    /// Factor applied to the raw construction (1 unless renormalized).
    pub scale: f64,
}

impl BellExpression {
    pub fn from_coefficients(
        parties: usize,
        coefficients: &[f64],
        kind: ExpressionKind,
        declared_bound: f64,
        bound_type: BoundType,
        scale: f64,
    ) -> Self {
        let terms = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > COEFF_EPS)
            .map(|(mask, &c)| CorrelationTerm::from_mask(parties, mask, c))
            .collect();
        Self { parties, terms, kind, declared_bound, bound_type, scale }
    }

    /// Dense coefficient vector indexed by setting mask.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![0.0; 1 << self.parties];
        for t in &self.terms {
            c[t.mask()] += t.coefficient;
        }
        c
    }

    /// `Σ |c|`, the value reached when every term is saturated.
    pub fn algebraic_max(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Signed value from precomputed correlations.
    pub fn value(&self, correlations: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coefficient * correlations[t.mask()]).sum()
    }
}

/// CHSH with signs `(+, +, +, -)` on settings `(11), (12), (21), (22)`.
pub fn build_chsh() -> BellExpression {
    BellExpression::from_coefficients(
        2,
        &chsh_coefficients(),
        ExpressionKind::Chsh,
        2.0,
        BoundType::NongenuineLocal,
        1.0,
    )
}

fn chsh_coefficients() -> Vec<f64> {
    // mask bit 0 = party 1, bit 1 = party 2
    vec![1.0, 1.0, 1.0, -1.0]
}

fn swap_settings(coefficients: &[f64]) -> Vec<f64> {
    let full = coefficients.len() - 1;
    (0..coefficients.len()).map(|mask| coefficients[mask ^ full]).collect()
}

/// `B_n = α_n B_{n-1} + β_n B'_{n-1}`, starting from CHSH, where `B'` swaps
/// the two settings of every party.
///
/// The declared bound is `2^{M-1}`. Since `B_n' = B_n` for `n >= 3`, the
/// recursion gives `B_4 = (α_4 + β_4) B_3`, and the brute-force hybrid bound
/// exceeds the declared one from `M = 4` on.
pub fn build_bancal(parties: usize) -> Result<BellExpression> {
    if parties < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 parties, got {parties}")));
    }
    let mut current = chsh_coefficients();
    for n in 3..=parties {
        let swapped = swap_settings(&current);
        let half = current.len();
        let mut next = vec![0.0; 2 * half];
        next[..half].copy_from_slice(&current);
        next[half..].copy_from_slice(&swapped);
        debug_assert_eq!(next.len(), 1 << n);
        current = next;
    }
    Ok(BellExpression::from_coefficients(
        parties,
        &current,
        ExpressionKind::Bancal,
        2f64.powi(parties as i32 - 1),
        BoundType::GenuineHybrid,
        1.0,
    ))
}

/// Sign weight `√2 cos[π/4 (s_1 + ... + s_M - M - 1)]`.
pub fn mabk_sign_function(signs: &[i32]) -> f64 {
    let m = signs.len() as i32;
    let sum: i32 = signs.iter().sum();
    SQRT_2 * (FRAC_PI_4 * (sum - m - 1) as f64).cos()
}

/// Raw coefficients `c(k) = Σ_s S(s) Π_{i: k_i = 2} s_i`.
pub fn mabk_raw_coefficients(parties: usize) -> Vec<f64> {
    let mut c = vec![0.0; 1 << parties];
    let mut signs = vec![0i32; parties];
    for s_mask in 0..(1usize << parties) {
        for (i, s) in signs.iter_mut().enumerate() {
            *s = if s_mask >> i & 1 == 1 { -1 } else { 1 };
        }
        let weight = mabk_sign_function(&signs);
        for (mask, ck) in c.iter_mut().enumerate() {
            let parity: i32 =
                (0..parties).filter(|&i| mask >> i & 1 == 1).map(|i| signs[i]).product();
            *ck += weight * parity as f64;
        }
    }
    for ck in &mut c {
        if ck.abs() < COEFF_EPS {
            *ck = 0.0;
        }
    }
    c
}

/// MABK expression rescaled so that its local bound is `2^{M-1}`.
pub fn build_mabk(parties: usize) -> Result<BellExpression> {
    if parties < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 parties, got {parties}")));
    }
    let raw = mabk_raw_coefficients(parties);
    let raw_expr = BellExpression::from_coefficients(
        parties,
        &raw,
        ExpressionKind::Mabk,
        0.0,
        BoundType::NongenuineLocal,
        1.0,
    );
    let raw_bound = local_bound(&raw_expr)?;
    let target = 2f64.powi(parties as i32 - 1);
    let scale = target / raw_bound;
    let scaled: Vec<f64> = raw.iter().map(|c| c * scale).collect();
    Ok(BellExpression::from_coefficients(
        parties,
        &scaled,
        ExpressionKind::Mabk,
        target,
        BoundType::NongenuineLocal,
        scale,
    ))
}

/// Signed expression value for the given state and settings.
pub fn evaluate(expr: &BellExpression, scenario: &Scenario, angles: &[PartyAngles]) -> Result<f64> {
    check_parties(expr.parties, scenario)?;
    Ok(expr.value(&scenario.correlations(angles)?))
}

/// `Σ_s |Σ_k Π_i s_i^{k_i - 1} E(k)|`, bounded by `2^M` for local models.
pub fn zb_full_value(parties: usize, correlations: &[f64]) -> f64 {
    let n = 1usize << parties;
    let mut total = 0.0;
    for s_mask in 0..n {
        let mut acc = 0.0;
        for (k, &e) in correlations.iter().enumerate().take(n) {
            // s_i = -1 exactly when bit i of s_mask is set; the sign is the
            // parity of parties with k_i = 2 and s_i = -1
            let sign = if (k & s_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * e;
        }
        total += acc.abs();
    }
    total
}

pub fn evaluate_zb_full(parties: usize, scenario: &Scenario, angles: &[PartyAngles]) -> Result<f64> {
    if parties > ZB_CAP {
        return Err(Error::EnumerationTooLarge { parties, cap: ZB_CAP });
    }
    check_parties(parties, scenario)?;
    Ok(zb_full_value(parties, &scenario.correlations(angles)?))
}

fn check_parties(parties: usize, scenario: &Scenario) -> Result<()> {
    if scenario.parties() != parties {
        return Err(Error::Layout(format!(
            "expression has {parties} parties, state has {}",
            scenario.parties()
        )));
    }
    Ok(())
}

/// Maximum of `Σ_k c(k) Π_g f_g(k|_g)` over ±1 functions `f_g` of each
/// group's joint settings.
///
/// Singleton groups give local deterministic strategies; a single group of
/// everyone gives `Σ |c|`. The largest group is optimized in closed form, the
/// others are enumerated.
pub fn partition_bound(expr: &BellExpression, groups: &[Vec<usize>]) -> Result<f64> {
    let m = expr.parties;
    let mut seen = vec![false; m];
    for g in groups {
        for &p in g {
            if p >= m || seen[p] {
                return Err(Error::InvalidParameter(format!("groups {groups:?} do not partition the parties")));
            }
            seen[p] = true;
        }
    }
    if seen.iter().any(|s| !s) || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidParameter(format!("groups {groups:?} do not partition the parties")));
    }
    let coefficients = expr.coefficients();
    let largest = (0..groups.len()).max_by_key(|&i| (groups[i].len(), usize::MAX - i)).unwrap();
    let enumerated: Vec<&Vec<usize>> =
        groups.iter().enumerate().filter(|&(i, _)| i != largest).map(|(_, g)| g).collect();
    let bits: usize = enumerated.iter().map(|g| 1usize << g.len()).sum();
    if bits > 24 {
        return Err(Error::EnumerationTooLarge { parties: m, cap: 24 });
    }
    let free = &groups[largest];

    let local_mask = |mask: usize, group: &[usize]| {
        group.iter().enumerate().fold(0usize, |acc, (i, &p)| acc | ((mask >> p & 1) << i))
    };
    let mut outer = vec![0.0f64; 1 << free.len()];
    let mut best = f64::NEG_INFINITY;
    for strategy in 0..(1usize << bits) {
        outer.iter_mut().for_each(|x| *x = 0.0);
        for (mask, &c) in coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut sign = 1.0;
            let mut offset = 0;
            for g in &enumerated {
                let bit = strategy >> (offset + local_mask(mask, g)) & 1;
                if bit == 1 {
                    sign = -sign;
                }
                offset += 1 << g.len();
            }
            outer[local_mask(mask, free)] += sign * c;
        }
        let value: f64 = outer.iter().map(|x| x.abs()).sum();
        best = best.max(value);
    }
    Ok(best)
}

/// Bound over fully local deterministic models.
pub fn local_bound(expr: &BellExpression) -> Result<f64> {
    if expr.parties > LOCAL_BOUND_CAP {
        return Err(Error::EnumerationTooLarge { parties: expr.parties, cap: LOCAL_BOUND_CAP });
    }
    let singletons: Vec<Vec<usize>> = (0..expr.parties).map(|k| vec![k]).collect();
    partition_bound(expr, &singletons)
}

/// Bound over models local across some bipartition of the parties and
/// unrestricted inside each group; maximized over all bipartitions with both
/// groups non-empty.
pub fn hybrid_bound(expr: &BellExpression) -> Result<f64> {
    let m = expr.parties;
    if m > HYBRID_BOUND_CAP {
        return Err(Error::EnumerationTooLarge { parties: m, cap: HYBRID_BOUND_CAP });
    }
    let mut best = f64::NEG_INFINITY;
    // party m-1 always in the second group, so each bipartition appears once
    for subset in 1..(1usize << (m - 1)) {
        let first: Vec<usize> = (0..m).filter(|&k| subset >> k & 1 == 1).collect();
        let second: Vec<usize> = (0..m).filter(|&k| subset >> k & 1 == 0).collect();
        best = best.max(partition_bound(expr, &[first, second])?);
    }
    Ok(best)
}

/// Largest full Żukowski–Brukner sum over deterministic local strategies.
pub fn zb_local_bound(parties: usize) -> Result<f64> {
    if parties > ZB_CAP {
        return Err(Error::EnumerationTooLarge { parties, cap: ZB_CAP });
    }
    let mut best = f64::NEG_INFINITY;
    let mut corr = vec![0.0; 1 << parties];
    for strategy in 0..1usize << (2 * parties) {
        let outcome = |k: usize, setting: usize| if strategy >> (2 * k + setting) & 1 == 1 { -1.0 } else { 1.0 };
        for (mask, e) in corr.iter_mut().enumerate() {
            *e = (0..parties).map(|k| outcome(k, mask >> k & 1)).product();
        }
        best = best.max(zb_full_value(parties, &corr));
    }
    Ok(best)
}

/// The bound matching the expression's declared model.
pub fn oracle_bound(expr: &BellExpression) -> Result<f64> {
    match expr.bound_type {
        BoundType::NongenuineLocal => local_bound(expr),
        BoundType::GenuineHybrid => hybrid_bound(expr),
    }
}
