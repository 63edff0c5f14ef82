//! Fast evaluation of all `2^M` full-correlation values
//! `E(k) = <ψ| O_1(k_1) ⊗ ... ⊗ O_M(k_M) |ψ>` for one choice of two settings
//! per party.
//!
//! States are stored on the smallest set of basis configurations that is
//! closed under the local observables, with a per-party neighbour table. The
//! parties are split into a left and a right half; the `2^{M/2}` vectors
//! `O_L ψ` and `O_R ψ` are built by doubling, and every correlation is one
//! inner product `<O_L ψ | O_R ψ>`.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, LocalSpace, QubitRegister, StateVector};
use crate::states::StateSpec;
use crate::measurement::{
    local_observable_matrix, qubit_observable_matrix, MeasurementSetting, QubitSetting,
};

const ENSEMBLE_TOL: f64 = 1e-14;

/// Which local observables the parties measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservableModel {
    /// Beamsplitter plus binned number counting on a party's two modes; local
    /// spaces are truncated at `cap` particles.
    Beamsplitter { cap: usize },
    /// Arbitrary ±1 observable on a single two-level mode, no number
    /// restriction.
    Qubit,
}

/// The two settings of one party. For the beamsplitter model each pair is
/// `[theta, phi]`, for the qubit model `[polar, azimuth]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyAngles {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

impl PartyAngles {
    pub fn new(alpha: [f64; 2], beta: [f64; 2]) -> Self {
        Self { alpha, beta }
    }

    pub fn from_flat(params: &[f64]) -> Vec<PartyAngles> {
        params
            .chunks_exact(4)
            .map(|c| PartyAngles { alpha: [c[0], c[1]], beta: [c[2], c[3]] })
            .collect()
    }

    pub fn flatten(angles: &[PartyAngles]) -> Vec<f64> {
        angles.iter().flat_map(|a| [a.alpha[0], a.alpha[1], a.beta[0], a.beta[1]]).collect()
    }
}

/// A state together with the measurement model applied to it.
#[derive(Debug, Clone)]
pub struct Scenario {
    parties: usize,
    model: ObservableModel,
    local_dim: usize,
    /// Local index per party, `configs[j * parties + k]`.
    configs: Vec<u16>,
    /// Neighbour slice of `(party k, config j)` is
    /// `neighbours[offsets[k * n + j]..offsets[k * n + j + 1]]`.
    offsets: Vec<u32>,
    neighbours: Vec<(u16, u32)>,
    ensemble: Vec<(f64, Vec<C64>)>,
}

impl Scenario {
    /// Beamsplitter measurements on a pure state with two modes per party.
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let rho_like = vec![(1.0, psi.amplitudes().iter().copied().collect::<Vec<_>>())];
        Self::from_sector(psi.basis(), rho_like)
    }

    /// Beamsplitter measurements on a mixed state, via its eigen-ensemble.
    pub fn from_density(rho: &DensityOperator) -> Result<Self> {
        let ensemble = rho
            .ensemble(ENSEMBLE_TOL)
            .into_iter()
            .map(|(w, v)| (w, v.iter().copied().collect()))
            .collect();
        Self::from_sector(rho.basis(), ensemble)
    }

    fn from_sector(
        basis: &crate::fock::SectorBasis,
        ensemble: Vec<(f64, Vec<C64>)>,
    ) -> Result<Self> {
        let layout = basis.layout();
        if layout.modes_per_party() != 2 {
            return Err(Error::Layout(
                "beamsplitter measurements need two modes per party".into(),
            ));
        }
        let m = layout.parties();
        let cap = layout.total_particles();
        let space = LocalSpace::new(2, cap);

        let mut partitions = BTreeSet::new();
        for (_, amps) in &ensemble {
            for (i, a) in amps.iter().enumerate() {
                if a.norm() > 0.0 {
                    partitions.insert(basis.partition_of(i));
                }
            }
        }
        let members: Vec<usize> = (0..basis.dimension())
            .filter(|&i| partitions.contains(&basis.partition_of(i)))
            .collect();

        let mut configs = Vec::with_capacity(members.len() * m);
        for &i in &members {
            for k in 0..m {
                let l = space.index_of(basis.local_occupation(i, k)).expect("within cap");
                configs.push(l as u16);
            }
        }
        let blocks: Vec<Vec<usize>> = (0..space.dimension())
            .map(|l| space.block(space.total(l)).collect())
            .collect();
        let mut scenario = Self::assemble(m, ObservableModel::Beamsplitter { cap }, space.dimension(), configs, &blocks)?;
        scenario.ensemble = ensemble
            .into_iter()
            .map(|(w, amps)| (w, members.iter().map(|&i| amps[i]).collect()))
            .collect();
        Ok(scenario)
    }

    /// Qubit observables on an unrestricted register.
    pub fn qubit(register: &QubitRegister) -> Result<Self> {
        let m = register.parties();
        let n = 1usize << m;
        let mut configs = Vec::with_capacity(n * m);
        for j in 0..n {
            for k in 0..m {
                configs.push(((j >> (m - 1 - k)) & 1) as u16);
            }
        }
        let blocks = vec![vec![0, 1], vec![0, 1]];
        let mut scenario = Self::assemble(m, ObservableModel::Qubit, 2, configs, &blocks)?;
        scenario.ensemble = vec![(1.0, register.amplitudes().iter().copied().collect())];
        Ok(scenario)
    }

    fn assemble(
        parties: usize,
        model: ObservableModel,
        local_dim: usize,
        configs: Vec<u16>,
        blocks: &[Vec<usize>],
    ) -> Result<Self> {
        let n = configs.len() / parties;
        let index: HashMap<&[u16], u32> =
            configs.chunks_exact(parties).enumerate().map(|(j, c)| (c, j as u32)).collect();
        let mut offsets = Vec::with_capacity(parties * n + 1);
        let mut neighbours = Vec::new();
        let mut key = vec![0u16; parties];
        offsets.push(0);
        for k in 0..parties {
            for j in 0..n {
                let cfg = &configs[j * parties..(j + 1) * parties];
                key.copy_from_slice(cfg);
                for &i in &blocks[cfg[k] as usize] {
                    key[k] = i as u16;
                    let g = index.get(key.as_slice()).ok_or_else(|| {
                        Error::Layout("configuration set not closed under local operators".into())
                    })?;
                    neighbours.push((i as u16, *g));
                }
                offsets.push(neighbours.len() as u32);
            }
        }
        Ok(Self { parties, model, local_dim, configs, offsets, neighbours, ensemble: Vec::new() })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn model(&self) -> ObservableModel {
        self.model
    }

    /// Number of configurations the state is tracked on.
    pub fn dimension(&self) -> usize {
        self.configs.len() / self.parties
    }

    /// Local operator matrix for one setting.
    pub fn local_matrix(&self, angles: [f64; 2]) -> DMatrix<C64> {
        match self.model {
            ObservableModel::Beamsplitter { cap } => {
                local_observable_matrix(MeasurementSetting::new(angles[0], angles[1]), cap)
            }
            ObservableModel::Qubit => qubit_observable_matrix(QubitSetting::new(angles[0], angles[1])),
        }
    }

    /// All `2^M` correlations. Bit `k` of the index selects the second
    /// setting of party `k`.
    pub fn correlations(&self, angles: &[PartyAngles]) -> Result<Vec<f64>> {
        if angles.len() != self.parties {
            return Err(Error::InvalidParameter(format!(
                "{} angle sets for {} parties",
                angles.len(),
                self.parties
            )));
        }
        let ops: Vec<[Vec<C64>; 2]> = angles
            .iter()
            .map(|a| [flat(&self.local_matrix(a.alpha)), flat(&self.local_matrix(a.beta))])
            .collect();
        Ok(self.correlations_with(&ops))
    }

    /// Same as [`Scenario::correlations`] for explicit local matrices, given
    /// row-major and assumed Hermitian.
    pub fn correlations_with(&self, ops: &[[Vec<C64>; 2]]) -> Vec<f64> {
        let m = self.parties;
        let half = m / 2;
        let n = self.dimension();
        let mut out = vec![0.0; 1 << m];
        for (weight, psi) in &self.ensemble {
            let left = self.fan_out(psi, 0..half, ops);
            let right = self.fan_out(psi, half..m, ops);
            for (lm, lv) in left.iter().enumerate() {
                for (rm, rv) in right.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..n {
                        acc += lv[i].conj() * rv[i];
                    }
                    debug_assert!(acc.im.abs() < 1e-8, "imaginary correlation {acc}");
                    out[lm | (rm << half)] += weight * acc.re;
                }
            }
        }
        out
    }

    fn fan_out(
        &self,
        psi: &[C64],
        parties: std::ops::Range<usize>,
        ops: &[[Vec<C64>; 2]],
    ) -> Vec<Vec<C64>> {
        let mut vectors = vec![psi.to_vec()];
        for k in parties {
            let mut next = Vec::with_capacity(vectors.len() * 2);
            for setting in 0..2 {
                for v in &vectors {
                    next.push(self.apply(k, &ops[k][setting], v));
                }
            }
            vectors = next;
        }
        vectors
    }

    fn apply(&self, party: usize, op: &[C64], x: &[C64]) -> Vec<C64> {
        let m = self.parties;
        let n = self.dimension();
        let d = self.local_dim;
        let base = party * n;
        let mut y = vec![C64::new(0.0, 0.0); n];
        for (j, &xj) in x.iter().enumerate() {
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            let l = self.configs[j * m + party] as usize;
            let lo = self.offsets[base + j] as usize;
            let hi = self.offsets[base + j + 1] as usize;
            for &(i, g) in &self.neighbours[lo..hi] {
                y[g as usize] += op[i as usize * d + l] * xj;
            }
        }
        y
    }
}

/// Build `spec` and attach beamsplitter observables, or, with `no_ssr`,
/// unrestricted qubit observables on its single-copy register.
pub fn build_scenario(spec: &StateSpec, no_ssr: bool) -> Result<Scenario> {
    let psi = spec.build()?;
    if no_ssr {
        Scenario::qubit(&QubitRegister::from_state(&psi)?)
    } else {
        Scenario::from_state(&psi)
    }
}

fn flat(m: &DMatrix<C64>) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}
