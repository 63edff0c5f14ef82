use std::f64::consts::PI;
use std::fs::File;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{
    BoundReport, CertifyReport, PartitionWeight, SsrCheckReport, TablesReport, ViolateReport,
};
use super::tables::{compute_table2, compute_table3, write_table2, write_table3};
use super::{CliError, RunRequest};
use crate::bell::{
    build_bancal, build_chsh, build_mabk, hybrid_bound, local_bound, zb_local_bound, BellExpression,
    BoundType, ExpressionKind, HYBRID_BOUND_CAP, LOCAL_BOUND_CAP,
};
use crate::error::{Error, Result};
use crate::fock::{embed_product, expectation, DensityOperator, LocalOperator};
use crate::measurement::{local_observable, MeasurementSetting};
use crate::optimizer::{maximize_spec, timed, BellFunctional, ZbFull};
use crate::ssr::{genuine_impossibility_certificate, partition_classes, twirl, NumberConserving};

const SAMPLED_OBSERVABLES: usize = 16;
const SAMPLED_PRODUCTS: usize = 4;

fn linear_expression(kind: ExpressionKind, parties: usize) -> Result<BellExpression> {
    match kind {
        ExpressionKind::Chsh if parties == 2 => Ok(build_chsh()),
        ExpressionKind::Chsh => {
            Err(Error::InvalidParameter(format!("CHSH has exactly 2 parties, got {parties}")))
        }
        ExpressionKind::Mabk => build_mabk(parties),
        ExpressionKind::Bancal => build_bancal(parties),
        ExpressionKind::ZbFull => Err(Error::InvalidParameter("the full ZB sum is not linear".into())),
    }
}

fn functional(kind: ExpressionKind, parties: usize) -> Result<Box<dyn BellFunctional>> {
    Ok(match kind {
        ExpressionKind::ZbFull => Box::new(ZbFull::new(parties)?),
        other => Box::new(linear_expression(other, parties)?),
    })
}

pub fn cmd_violate(request: &RunRequest) -> Result<ViolateReport, CliError> {
    let spec = request.state()?;
    let kind = request.inequality()?;
    let f = functional(kind, spec.parties)?;
    let (result, runtime_ms) = timed(|| maximize_spec(f.as_ref(), &spec, request.no_ssr, &request.optimizer));
    let r = result?;
    Ok(ViolateReport {
        command: "violate",
        state: spec.family.to_string(),
        state_label: spec.label(),
        inequality: kind,
        m: spec.parties,
        copies: spec.copies,
        no_ssr: request.no_ssr,
        best_value: r.best_value,
        bound: r.bound,
        violated: r.violated,
        margin_percent: r.margin_percent,
        angles: r.optimal_angles,
        seed: r.seed,
        restarts: r.restarts,
        restarts_converged: r.restarts_converged,
        evaluations: r.evaluations,
        expression_scale: r.expression_scale,
        runtime_ms,
    })
}

pub fn cmd_bound(request: &RunRequest) -> Result<BoundReport, CliError> {
    let kind = request.inequality()?;
    let m = request.parties;
    if kind == ExpressionKind::ZbFull {
        let zb = ZbFull::new(m)?;
        return Ok(BoundReport {
            command: "bound",
            inequality: kind,
            m,
            declared_bound: zb.bound(),
            bound_type: BoundType::NongenuineLocal,
            local_bound: Some(zb_local_bound(m)?),
            hybrid_bound: None,
            algebraic_max: zb.algebraic_max(),
            terms: None,
            scale: 1.0,
        });
    }
    let expr = linear_expression(kind, m)?;
    let local = if m <= LOCAL_BOUND_CAP { Some(local_bound(&expr)?) } else { None };
    let hybrid = if m <= HYBRID_BOUND_CAP { Some(hybrid_bound(&expr)?) } else { None };
    Ok(BoundReport {
        command: "bound",
        inequality: kind,
        m,
        declared_bound: expr.declared_bound,
        bound_type: expr.bound_type,
        local_bound: local,
        hybrid_bound: hybrid,
        algebraic_max: expr.algebraic_max(),
        terms: Some(expr.terms.len()),
        scale: expr.scale,
    })
}

fn max_abs(a: &DensityOperator, b: &DensityOperator) -> f64 {
    (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_setting(rng: &mut ChaCha8Rng) -> MeasurementSetting {
    MeasurementSetting::new(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI))
}

pub fn cmd_ssr_check(request: &RunRequest) -> Result<SsrCheckReport, CliError> {
    let spec = request.state()?;
    let psi = spec.build()?;
    let layout = psi.layout();
    let n = layout.total_particles();
    let rho = DensityOperator::from_pure(&psi);
    let twirled = twirl(&rho);

    let partitions = partition_classes(rho.basis())
        .into_iter()
        .map(|(partition, members)| PartitionWeight {
            partition,
            weight: members.iter().map(|&i| rho.matrix()[(i, i)].re).sum(),
        })
        .filter(|p| p.weight > 1e-12)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(request.optimizer.seed);
    let modes = layout.modes_per_party();
    let max_commutator = if modes == 2 {
        (0..SAMPLED_OBSERVABLES)
            .map(|_| local_observable(random_setting(&mut rng), n).ssr_commutator_norm())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let observables_checked = if modes == 2 { SAMPLED_OBSERVABLES } else { 0 };

    let mut max_gap = 0.0f64;
    if modes == 2 {
        for _ in 0..SAMPLED_PRODUCTS {
            let ops: Vec<LocalOperator> =
                (0..layout.parties()).map(|_| local_observable(random_setting(&mut rng), n)).collect();
            let indexed: Vec<(usize, &LocalOperator)> = ops.iter().enumerate().collect();
            let product = embed_product(&indexed, rho.basis())?;
            let gap = expectation(&rho, &product)? - expectation(&twirled, &product)?;
            max_gap = max_gap.max(gap.abs());
        }
    }

    Ok(SsrCheckReport {
        command: "ssr-check",
        state: spec.family.to_string(),
        state_label: spec.label(),
        m: spec.parties,
        copies: spec.copies,
        particles: n,
        dimension: rho.basis().dimension(),
        partitions,
        coherence_removed: max_abs(&rho, &twirled),
        trace_residual: (twirled.trace().re - 1.0).abs(),
        idempotence_residual: max_abs(&twirl(&twirled), &twirled),
        observables_checked,
        max_commutator,
        observables_compliant: max_commutator < crate::ssr::COMPLIANCE_TOL,
        max_expectation_gap: max_gap,
        seed: request.optimizer.seed,
    })
}

pub fn cmd_certify(request: &RunRequest) -> Result<CertifyReport, CliError> {
    let spec = request.state()?;
    let rho = DensityOperator::from_pure(&spec.build()?);
    let report = genuine_impossibility_certificate(&rho)?;
    Ok(CertifyReport {
        command: "certify",
        state: spec.family.to_string(),
        state_label: spec.label(),
        m: report.parties,
        copies: spec.copies,
        particles: report.particles,
        holds: report.holds,
        partitions: report.partitions,
    })
}

/// Recompute both tables and write `table2.csv` and `table3.csv` into the
/// output directory.
pub fn cmd_tables(request: &RunRequest) -> Result<TablesReport, CliError> {
    let dir = request.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (rows, runtime_ms) = timed(|| -> Result<_> {
        Ok((compute_table2(&request.optimizer)?, compute_table3(&request.optimizer)?))
    });
    let (table2, table3) = rows?;
    let path2 = dir.join("table2.csv");
    let path3 = dir.join("table3.csv");
    write_table2(File::create(&path2).map_err(|e| CliError::io(&path2, e))?, &table2)?;
    write_table3(File::create(&path3).map_err(|e| CliError::io(&path3, e))?, &table3)?;
    Ok(TablesReport {
        command: "tables",
        table2,
        table3,
        files: vec![path2, path3],
        seed: request.optimizer.seed,
        restarts: request.optimizer.restarts,
        runtime_ms,
    })
}
