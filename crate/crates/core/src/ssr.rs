//! Local particle-number super-selection: partition projectors, the twirl
//! `ρ ↦ Σ Π ρ Π`, compliance checks, and the vacuum-party diagnostic for
//! states with fewer particles than parties.
//!
//! A party's local particle number is summed over all modes it holds, so with
//! two copies both `A_k` and `B_k` count toward party `k`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, GlobalOperator, LocalOperator, SectorBasis};

pub const COMPLIANCE_TOL: f64 = 1e-10;

/// Basis indices grouped by per-party local particle numbers.
pub fn partition_classes(basis: &SectorBasis) -> BTreeMap<Vec<usize>, Vec<usize>> {
    let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..basis.dimension() {
        classes.entry(basis.partition_of(i)).or_default().push(i);
    }
    classes
}

#[derive(Debug, Clone)]
pub struct PartitionProjector {
    pub partition: Vec<usize>,
    pub projector: GlobalOperator,
}

pub fn partition_projectors(basis: &Arc<SectorBasis>) -> Vec<PartitionProjector> {
    partition_classes(basis)
        .into_iter()
        .map(|(partition, members)| {
            let triplets: Vec<_> = members.iter().map(|&i| (i, i, C64::new(1.0, 0.0))).collect();
            PartitionProjector { partition, projector: GlobalOperator::from_triplets(basis.clone(), &triplets) }
        })
        .collect()
}

/// Remove every coherence between different local particle-number
/// partitions.
pub fn twirl(rho: &DensityOperator) -> DensityOperator {
    let basis = rho.basis();
    let partitions: Vec<_> = (0..basis.dimension()).map(|i| basis.partition_of(i)).collect();
    let m = rho.matrix();
    let d = basis.dimension();
    let out = DMatrix::from_fn(d, d, |i, j| {
        if partitions[i] == partitions[j] {
            m[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    DensityOperator::new_unchecked(basis.clone(), out)
}

/// Operators that can be checked against every party's local number operator.
pub trait NumberConserving {
    /// Largest commutator entry `|[O, n_k]_{vw}|` over all parties `k`.
    fn ssr_commutator_norm(&self) -> f64;

    fn is_ssr_compliant(&self) -> bool {
        self.ssr_commutator_norm() < COMPLIANCE_TOL
    }
}

impl NumberConserving for GlobalOperator {
    fn ssr_commutator_norm(&self) -> f64 {
        let basis = self.basis();
        let parties = basis.layout().parties();
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            for k in 0..parties {
                let delta = basis.local_total(c, k) as f64 - basis.local_total(r, k) as f64;
                worst = worst.max((v * delta).norm());
            }
        }
        worst
    }
}

impl NumberConserving for LocalOperator {
    fn ssr_commutator_norm(&self) -> f64 {
        let d = self.space.dimension();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let delta = self.space.total(j) as f64 - self.space.total(i) as f64;
                worst = worst.max((self.matrix[(i, j)] * delta).norm());
            }
        }
        worst
    }
}

pub fn is_ssr_compliant<O: NumberConserving + ?Sized>(op: &O) -> bool {
    op.is_ssr_compliant()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PartitionEntry {
    pub partition: Vec<usize>,
    pub weight: f64,
    /// First party holding no particles, if any.
    pub vacuum_party: Option<usize>,
    pub vacuum_parties: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ImpossibilityReport {
    pub parties: usize,
    pub particles: usize,
    pub holds: bool,
    pub partitions: Vec<PartitionEntry>,
}

const WEIGHT_TOL: f64 = 1e-12;

/// Check, partition by partition, that every class surviving the twirl leaves
/// some party with zero particles. Such a class factors as `|0> ⊗ |ψ>` across
/// that party, so the twirled mixture has no genuinely multipartite part.
pub fn genuine_impossibility_certificate(rho: &DensityOperator) -> Result<ImpossibilityReport> {
    let layout = rho.layout();
    let (m, n) = (layout.parties(), layout.total_particles());
    if n >= m {
        return Err(Error::NotApplicable(format!(
            "certificate needs fewer particles than parties, got N={n} M={m}"
        )));
    }
    let mut partitions = Vec::new();
    for (partition, members) in partition_classes(rho.basis()) {
        let weight: f64 = members.iter().map(|&i| rho.matrix()[(i, i)].re).sum();
        if weight <= WEIGHT_TOL {
            continue;
        }
        let vacuum_parties: Vec<usize> =
            partition.iter().enumerate().filter(|(_, &nk)| nk == 0).map(|(k, _)| k).collect();
        partitions.push(PartitionEntry {
            partition,
            weight,
            vacuum_party: vacuum_parties.first().copied(),
            vacuum_parties,
        });
    }
    let holds = partitions.iter().all(|p| p.vacuum_party.is_some());
    Ok(ImpossibilityReport { parties: m, particles: n, holds, partitions })
}
