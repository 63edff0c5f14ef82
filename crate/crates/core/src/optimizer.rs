//! Multi-start Nelder–Mead search over all parties' measurement angles.
//!
//! Each restart draws its starting angles from its own ChaCha8 stream
//! (`seed`, stream = restart index), so a run with more restarts contains
//! every restart of a run with fewer.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{zb_full_value, BellExpression, ExpressionKind, ZB_CAP};
use crate::correlator::{build_scenario, ObservableModel, PartyAngles, Scenario};
use crate::error::{Error, Result};
use crate::states::StateSpec;

pub const DEFAULT_SEED: u64 = 20_110_725;

const VIOLATION_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub restarts: usize,
    /// Simplex iterations allowed per restart, polishing rounds included.
    pub max_iterations: usize,
    /// Stop once the simplex's spread in objective value falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self { restarts: 64, max_iterations: 2000, tolerance: 1e-8, seed: DEFAULT_SEED }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("restarts and max_iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Quantity maximized over the measurement angles.
pub trait BellFunctional: Sync {
    fn parties(&self) -> usize;
    /// Value to maximize for the given correlations.
    fn score(&self, correlations: &[f64]) -> f64;
    fn bound(&self) -> f64;
    fn algebraic_max(&self) -> f64;
    fn kind(&self) -> ExpressionKind;
    fn scale(&self) -> f64 {
        1.0
    }
}

/// `|f|` is maximized: the inequality bounds the magnitude.
impl BellFunctional for BellExpression {
    fn parties(&self) -> usize {
        self.parties
    }

    fn score(&self, correlations: &[f64]) -> f64 {
        self.value(correlations).abs()
    }

    fn bound(&self) -> f64 {
        self.declared_bound
    }

    fn algebraic_max(&self) -> f64 {
        BellExpression::algebraic_max(self)
    }

    fn kind(&self) -> ExpressionKind {
        self.kind
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

/// Full Żukowski–Brukner sum over all sign vectors.
#[derive(Debug, Clone, Copy)]
pub struct ZbFull {
    pub parties: usize,
}

impl ZbFull {
    pub fn new(parties: usize) -> Result<Self> {
        if parties > ZB_CAP {
            return Err(Error::EnumerationTooLarge { parties, cap: ZB_CAP });
        }
        Ok(Self { parties })
    }
}

impl BellFunctional for ZbFull {
    fn parties(&self) -> usize {
        self.parties
    }

    fn score(&self, correlations: &[f64]) -> f64 {
        zb_full_value(self.parties, correlations)
    }

    fn bound(&self) -> f64 {
        2f64.powi(self.parties as i32)
    }

    fn algebraic_max(&self) -> f64 {
        4f64.powi(self.parties as i32)
    }

    fn kind(&self) -> ExpressionKind {
        ExpressionKind::ZbFull
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationResult {
    pub best_value: f64,
    pub bound: f64,
    pub violated: bool,
    pub margin_percent: f64,
    pub optimal_angles: Vec<PartyAngles>,
    pub restarts: usize,
    pub restarts_converged: usize,
    pub expression_kind: ExpressionKind,
    pub expression_scale: f64,
    pub state_spec: Option<StateSpec>,
    pub seed: u64,
    pub evaluations: u64,
}

impl ViolationResult {
    fn new(
        functional: &dyn BellFunctional,
        best_value: f64,
        optimal_angles: Vec<PartyAngles>,
        config: &OptimizationConfig,
        restarts_converged: usize,
        evaluations: u64,
    ) -> Self {
        let bound = functional.bound();
        Self {
            best_value,
            bound,
            violated: best_value > bound + VIOLATION_MARGIN,
            margin_percent: 100.0 * (best_value - bound) / bound,
            optimal_angles,
            restarts: config.restarts,
            restarts_converged,
            expression_kind: functional.kind(),
            expression_scale: functional.scale(),
            state_spec: None,
            seed: config.seed,
            evaluations,
        }
    }
}

/// Outcome of one local search.
#[derive(Debug, Clone)]
pub struct LocalSearch {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: u64,
    pub converged: bool,
}

/// Minimize `f` from `start` with the dimension-adaptive Nelder–Mead
/// coefficients. When the simplex collapses in value the search restarts
/// around its best vertex, and stops once such a restart no longer improves
/// by more than `tolerance`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], step: f64, max_iterations: usize, tolerance: f64) -> LocalSearch
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let nf = n as f64;
    let (reflect, expand, contract, shrink) =
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut evaluations = 0u64;
    let mut eval = |x: &[f64], count: &mut u64| {
        *count += 1;
        f(x)
    };

    let mut best_point = start.to_vec();
    let mut best_value = eval(start, &mut evaluations);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = step;

    'rounds: while iterations < max_iterations {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_point.clone(), best_value));
        for i in 0..n {
            let mut x = best_point.clone();
            x[i] += step;
            let fx = eval(&x, &mut evaluations);
            simplex.push((x, fx));
        }
        let round_start = best_value;
        let mut round_converged = false;
        while iterations < max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[n].1 - simplex[0].1 <= tolerance {
                round_converged = true;
                break;
            }
            iterations += 1;
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / nf;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(reflect);
            let fr = eval(&xr, &mut evaluations);
            if fr < simplex[0].1 {
                let xe = along(reflect * expand);
                let fe = eval(&xe, &mut evaluations);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let outside = fr < worst.1;
                let xc = if outside { along(reflect * contract) } else { along(-contract) };
                let fc = eval(&xc, &mut evaluations);
                if fc < if outside { fr } else { worst.1 } {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        for (xi, ai) in v.0.iter_mut().zip(&anchor) {
                            *xi = ai + shrink * (*xi - ai);
                        }
                        v.1 = eval(&v.0, &mut evaluations);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_value {
            best_point = simplex[0].0.clone();
            best_value = simplex[0].1;
        }
        if !round_converged {
            break 'rounds;
        }
        if round_start - best_value <= tolerance {
            converged = true;
            break 'rounds;
        }
        step = (step * 0.5).max(1e-3);
    }
    LocalSearch { point: best_point, value: best_value, iterations, evaluations, converged }
}

pub fn random_start(parties: usize, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..parties)
        .flat_map(|_| [0, 1, 0, 1])
        .map(|kind| if kind == 0 { rng.random_range(0.0..PI) } else { rng.random_range(0.0..2.0 * PI) })
        .collect()
}

fn canonical_angles(model: ObservableModel, params: &[f64]) -> Vec<f64> {
    params
        .chunks_exact(2)
        .flat_map(|p| match model {
            ObservableModel::Beamsplitter { .. } => [p[0].rem_euclid(PI), p[1].rem_euclid(2.0 * PI)],
            ObservableModel::Qubit => [p[0].rem_euclid(2.0 * PI), p[1].rem_euclid(2.0 * PI)],
        })
        .collect()
}

const INITIAL_STEP: f64 = 0.4;

/// Maximize `functional` over the measurement angles of `scenario`.
pub fn maximize(
    functional: &dyn BellFunctional,
    scenario: &Scenario,
    config: &OptimizationConfig,
) -> Result<ViolationResult> {
    config.validate()?;
    if functional.parties() != scenario.parties() {
        return Err(Error::Layout(format!(
            "expression has {} parties, state has {}",
            functional.parties(),
            scenario.parties()
        )));
    }
    let m = scenario.parties();
    let objective = |x: &[f64]| -> f64 {
        let corr = scenario.correlations(&PartyAngles::from_flat(x)).expect("party count checked");
        let v = functional.score(&corr);
        if v.is_finite() {
            -v
        } else {
            f64::NAN
        }
    };

    let searches: Vec<LocalSearch> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let start = random_start(m, config.seed, r);
            nelder_mead(objective, &start, INITIAL_STEP, config.max_iterations, config.tolerance)
        })
        .collect();

    if let Some(bad) = searches.iter().find(|s| !s.value.is_finite()) {
        return Err(Error::Numerical { angles: bad.point.clone() });
    }
    // first restart wins ties
    let best = searches
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
            Some((_, v)) if v <= s.value => acc,
            _ => Some((i, s.value)),
        })
        .map(|(i, _)| &searches[i])
        .expect("at least one restart");

    let angles = PartyAngles::from_flat(&canonical_angles(scenario.model(), &best.point));
    let best_value = functional.score(&scenario.correlations(&angles)?);
    if !best_value.is_finite() {
        return Err(Error::Numerical { angles: PartyAngles::flatten(&angles) });
    }
    let converged = searches.iter().filter(|s| s.converged).count();
    let evaluations = searches.iter().map(|s| s.evaluations).sum();
    Ok(ViolationResult::new(functional, best_value, angles, config, converged, evaluations))
}

/// Build the state and maximize.
pub fn maximize_spec(
    functional: &dyn BellFunctional,
    spec: &StateSpec,
    no_ssr: bool,
    config: &OptimizationConfig,
) -> Result<ViolationResult> {
    let scenario = build_scenario(spec, no_ssr)?;
    let mut result = maximize(functional, &scenario, config)?;
    result.state_spec = Some(*spec);
    Ok(result)
}

/// Maximize the genuinely multipartite (Bancal) expression for each party
/// count, with the state for `M` parties produced by `make_spec`.
pub fn scan_genuine<F>(
    make_spec: F,
    parties: &[usize],
    no_ssr: bool,
    config: &OptimizationConfig,
) -> Result<Vec<ViolationResult>>
where
    F: Fn(usize) -> StateSpec,
{
    parties
        .iter()
        .map(|&m| {
            let expr = crate::bell::build_bancal(m)?;
            maximize_spec(&expr, &make_spec(m), no_ssr, config)
        })
        .collect()
}

/// Wall-clock helper for reports.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis())
}
