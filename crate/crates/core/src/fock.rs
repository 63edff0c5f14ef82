//! Fixed-particle-number Fock sectors, states and operators on them.
//!
//! Modes are laid out party by party. With two copies the two modes a party
//! holds are adjacent, `(A_1, B_1, A_2, B_2, ...)`, so everything a single
//! observer acts on is a contiguous block of the occupation vector.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on the number of basis states in an enumerated sector.
pub const DEFAULT_SECTOR_CAP: usize = 1_000_000;

/// Sectors up to this dimension get dense operator storage.
pub const DENSE_LIMIT: usize = 2000;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLayout {
    parties: usize,
    copies: usize,
    total_particles: usize,
}

impl ModeLayout {
    pub fn new(parties: usize, copies: usize, total_particles: usize) -> Result<Self> {
        if parties < 2 {
            return Err(Error::Layout(format!("need at least 2 parties, got {parties}")));
        }
        if !(1..=2).contains(&copies) {
            return Err(Error::Layout(format!("copies must be 1 or 2, got {copies}")));
        }
        Ok(Self { parties, copies, total_particles })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    /// Modes held by each party; one per copy.
    pub fn modes_per_party(&self) -> usize {
        self.copies
    }

    pub fn total_particles(&self) -> usize {
        self.total_particles
    }

    pub fn total_modes(&self) -> usize {
        self.parties * self.copies
    }

    /// Range of mode indices held by `party`.
    pub fn party_modes(&self, party: usize) -> Range<usize> {
        party * self.copies..(party + 1) * self.copies
    }

    /// Number of occupation vectors in the sector, `C(N + modes - 1, N)`.
    pub fn sector_dimension(&self) -> u128 {
        binomial_u128(self.total_particles + self.total_modes() - 1, self.total_particles)
    }
}

pub(crate) fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Occupation-number basis of a fixed-`N` sector.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    layout: ModeLayout,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

/// Enumerate every occupation vector of the sector, capped at
/// [`DEFAULT_SECTOR_CAP`] states.
pub fn enumerate_sector(layout: ModeLayout) -> Result<SectorBasis> {
    enumerate_sector_capped(layout, DEFAULT_SECTOR_CAP)
}

pub fn enumerate_sector_capped(layout: ModeLayout, cap: usize) -> Result<SectorBasis> {
    let dimension = layout.sector_dimension();
    if dimension > cap as u128 {
        return Err(Error::SectorTooLarge { dimension, cap });
    }
    let modes = layout.total_modes();
    let mut states = Vec::with_capacity(dimension as usize);
    let mut current = vec![0; modes];
    fill_compositions(&mut current, 0, layout.total_particles, &mut states);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(SectorBasis { layout, states, index })
}

// Descending lexicographic order: the first mode takes as many particles as it
// can first, the last mode varies fastest.
fn fill_compositions(
    current: &mut Vec<usize>,
    mode: usize,
    remaining: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(current.clone());
        return;
    }
    for n in (0..=remaining).rev() {
        current[mode] = n;
        fill_compositions(current, mode + 1, remaining - n, out);
    }
    current[mode] = 0;
}

impl SectorBasis {
    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Occupations of `party`'s modes in basis state `i`.
    pub fn local_occupation(&self, i: usize, party: usize) -> &[usize] {
        &self.states[i][self.layout.party_modes(party)]
    }

    /// Particles held by `party` in basis state `i`, summed over its modes.
    pub fn local_total(&self, i: usize, party: usize) -> usize {
        self.local_occupation(i, party).iter().sum()
    }

    /// Per-party local particle numbers of basis state `i`.
    pub fn partition_of(&self, i: usize) -> Vec<usize> {
        (0..self.layout.parties).map(|k| self.local_total(i, k)).collect()
    }

    fn same_as(&self, other: &SectorBasis) -> bool {
        self.layout == other.layout
    }
}

/// Local Fock space of one party: occupation vectors over its modes with at
/// most `cap` particles in total.
///
/// Ordered in blocks of increasing local total; within a block, descending
/// lexicographic. For two modes the block of total `T` is
/// `|T,0>, |T-1,1>, ..., |0,T>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSpace {
    modes: usize,
    cap: usize,
    states: Vec<Vec<usize>>,
    blocks: Vec<Range<usize>>,
}

impl LocalSpace {
    pub fn new(modes: usize, cap: usize) -> Self {
        assert!(modes >= 1, "local space needs at least one mode");
        let mut states = Vec::new();
        let mut blocks = Vec::with_capacity(cap + 1);
        for total in 0..=cap {
            let start = states.len();
            let mut current = vec![0; modes];
            fill_compositions(&mut current, 0, total, &mut states);
            blocks.push(start..states.len());
        }
        Self { modes, cap, states, blocks }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    pub fn total(&self, i: usize) -> usize {
        self.states[i].iter().sum()
    }

    /// Index range of the block with local particle number `total`.
    pub fn block(&self, total: usize) -> Range<usize> {
        self.blocks[total].clone()
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        if occupation.len() != self.modes {
            return None;
        }
        let total: usize = occupation.iter().sum();
        if total > self.cap {
            return None;
        }
        self.block(total).find(|&i| self.states[i] == occupation)
    }

    /// Local number operator of one of the party's modes.
    pub fn number_operator(&self, mode: usize) -> LocalOperator {
        let d = self.dimension();
        let matrix = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(self.states[i][mode] as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        LocalOperator { space: self.clone(), matrix }
    }

    /// Total local particle number over all of the party's modes.
    pub fn total_number_operator(&self) -> LocalOperator {
        let d = self.dimension();
        let mut matrix = DMatrix::zeros(d, d);
        for i in 0..d {
            matrix[(i, i)] = C64::new(self.total(i) as f64, 0.0);
        }
        LocalOperator { space: self.clone(), matrix }
    }
}

/// Matrix over a party's [`LocalSpace`].
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub space: LocalSpace,
    pub matrix: DMatrix<C64>,
}

impl LocalOperator {
    pub fn new(space: LocalSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "local matrix is {}x{}, space has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: LocalSpace) -> Self {
        let d = space.dimension();
        Self { space, matrix: DMatrix::identity(d, d) }
    }

    /// Largest matrix element that connects different local particle numbers.
    pub fn block_leakage(&self) -> f64 {
        let d = self.space.dimension();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if self.space.total(i) != self.space.total(j) {
                    worst = worst.max(self.matrix[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.matrix, tol)
    }
}

pub(crate) fn is_hermitian(m: &DMatrix<C64>, tol: f64) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Unit-norm state on a sector.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn new(basis: Arc<SectorBasis>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dimension() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dimension()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("state has zero or non-finite norm".into()));
        }
        Ok(Self { basis, amplitudes: amplitudes / C64::new(norm, 0.0) })
    }

    /// Build from `(occupation, amplitude)` pairs; repeated occupations add.
    pub fn from_occupations(
        basis: Arc<SectorBasis>,
        terms: &[(Vec<usize>, C64)],
    ) -> Result<Self> {
        let mut amps = DVector::zeros(basis.dimension());
        for (occ, amp) in terms {
            let i = basis.index_of(occ).ok_or_else(|| {
                Error::InvalidParameter(format!("occupation {occ:?} not in sector"))
            })?;
            amps[i] += *amp;
        }
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn layout(&self) -> ModeLayout {
        self.basis.layout()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        self.basis
            .index_of(occupation)
            .map(|i| self.amplitudes[i])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Basis indices with non-negligible amplitude.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.amplitudes.len()).filter(|&i| self.amplitudes[i].norm() > tol).collect()
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            amplitudes: &self.amplitudes * C64::from_polar(1.0, phase),
        }
    }
}

/// Tensor a single-copy state with itself, interleaving the modes as
/// `(A_1, B_1, ..., A_M, B_M)`.
pub fn tensor_copies(psi: &StateVector, copies: usize) -> Result<StateVector> {
    let layout = psi.layout();
    if layout.copies() != 1 {
        return Err(Error::Layout("tensor_copies expects a single-copy state".into()));
    }
    match copies {
        1 => Ok(psi.clone()),
        2 => {
            let m = layout.parties();
            let doubled = ModeLayout::new(m, 2, 2 * layout.total_particles())?;
            let basis = Arc::new(enumerate_sector(doubled)?);
            let support = psi.support(0.0);
            let mut amps = DVector::zeros(basis.dimension());
            let mut occ = vec![0; 2 * m];
            for &i in &support {
                for &j in &support {
                    let a = psi.basis.state(i);
                    let b = psi.basis.state(j);
                    for k in 0..m {
                        occ[2 * k] = a[k];
                        occ[2 * k + 1] = b[k];
                    }
                    let idx = basis.index_of(&occ).expect("product occupation in doubled sector");
                    amps[idx] += psi.amplitudes[i] * psi.amplitudes[j];
                }
            }
            StateVector::new(basis, amps)
        }
        _ => Err(Error::Layout(format!("copies must be 1 or 2, got {copies}"))),
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix on a sector.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    basis: Arc<SectorBasis>,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(basis: Arc<SectorBasis>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = basis.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidDensity(format!("matrix must be {d}x{d}")));
        }
        if !is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidDensity("not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} is not 1")));
        }
        let rho = Self { basis, matrix };
        let min = rho.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn new_unchecked(basis: Arc<SectorBasis>, matrix: DMatrix<C64>) -> Self {
        Self { basis, matrix }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self { basis: psi.basis.clone(), matrix: v * v.adjoint() }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn layout(&self) -> ModeLayout {
        self.basis.layout()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Spectral decomposition into weighted pure states, dropping weights
    /// below `tol`.
    pub fn ensemble(&self, tol: f64) -> Vec<(f64, DVector<C64>)> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut out = Vec::new();
        for (i, &w) in eig.eigenvalues.iter().enumerate() {
            if w > tol {
                out.push((w, eig.eigenvectors.column(i).into_owned()));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<C64>),
    /// Compressed rows: `(column, value)` per row.
    Sparse(Vec<Vec<(usize, C64)>>),
}

/// Operator on a whole sector.
#[derive(Debug, Clone)]
pub struct GlobalOperator {
    basis: Arc<SectorBasis>,
    storage: Storage,
}

impl GlobalOperator {
    pub fn identity(basis: Arc<SectorBasis>) -> Self {
        let d = basis.dimension();
        let triplets: Vec<_> = (0..d).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_triplets(basis, &triplets)
    }

    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        Self::from_triplets(basis, &[])
    }

    /// Storage is dense up to [`DENSE_LIMIT`] and sparse above.
    pub fn from_triplets(basis: Arc<SectorBasis>, triplets: &[(usize, usize, C64)]) -> Self {
        let d = basis.dimension();
        let storage = if d <= DENSE_LIMIT {
            let mut m = DMatrix::zeros(d, d);
            for &(r, c, v) in triplets {
                m[(r, c)] += v;
            }
            Storage::Dense(m)
        } else {
            Storage::Sparse(sparse_rows(d, triplets))
        };
        Self { basis, storage }
    }

    pub fn from_dense(basis: Arc<SectorBasis>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = basis.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!("matrix must be {d}x{d}")));
        }
        Ok(Self { basis, storage: Storage::Dense(matrix) })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Same operator with compressed-row storage regardless of dimension.
    pub fn to_sparse(&self) -> Self {
        let triplets = self.triplets();
        Self {
            basis: self.basis.clone(),
            storage: Storage::Sparse(sparse_rows(self.basis.dimension(), &triplets)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(rows) => {
                let d = self.basis.dimension();
                let mut m = DMatrix::zeros(d, d);
                for (r, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        m[(r, c)] += v;
                    }
                }
                m
            }
        }
    }

    /// Non-zero entries as `(row, column, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match &self.storage {
            Storage::Dense(m) => {
                let mut out = Vec::new();
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        let v = m[(r, c)];
                        if v != C64::new(0.0, 0.0) {
                            out.push((r, c, v));
                        }
                    }
                }
                out
            }
            Storage::Sparse(rows) => rows
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
                .collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(row, col)],
            Storage::Sparse(rows) => rows[row]
                .iter()
                .filter(|&&(c, _)| c == col)
                .map(|&(_, v)| v)
                .sum(),
        }
    }

    pub fn matmul(&self, rhs: &GlobalOperator) -> Result<GlobalOperator> {
        if !self.basis.same_as(&rhs.basis) {
            return Err(Error::BasisMismatch);
        }
        let storage = match (&self.storage, &rhs.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            _ => {
                let a = self.to_sparse();
                let b = rhs.to_sparse();
                let (Storage::Sparse(ar), Storage::Sparse(br)) = (&a.storage, &b.storage) else {
                    unreachable!()
                };
                let d = self.basis.dimension();
                let mut acc = vec![C64::new(0.0, 0.0); d];
                let mut touched = Vec::new();
                let mut rows = Vec::with_capacity(d);
                for row in ar {
                    for &(k, av) in row {
                        for &(c, bv) in &br[k] {
                            if acc[c] == C64::new(0.0, 0.0) {
                                touched.push(c);
                            }
                            acc[c] += av * bv;
                        }
                    }
                    touched.sort_unstable();
                    touched.dedup();
                    let mut out_row = Vec::with_capacity(touched.len());
                    for &c in &touched {
                        if acc[c] != C64::new(0.0, 0.0) {
                            out_row.push((c, acc[c]));
                        }
                        acc[c] = C64::new(0.0, 0.0);
                    }
                    touched.clear();
                    rows.push(out_row);
                }
                Storage::Sparse(rows)
            }
        };
        Ok(GlobalOperator { basis: self.basis.clone(), storage })
    }

    pub fn add(&self, rhs: &GlobalOperator) -> Result<GlobalOperator> {
        if !self.basis.same_as(&rhs.basis) {
            return Err(Error::BasisMismatch);
        }
        match (&self.storage, &rhs.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => {
                Ok(GlobalOperator { basis: self.basis.clone(), storage: Storage::Dense(a + b) })
            }
            _ => {
                let mut t = self.triplets();
                t.extend(rhs.triplets());
                let d = self.basis.dimension();
                Ok(GlobalOperator {
                    basis: self.basis.clone(),
                    storage: Storage::Sparse(sparse_rows(d, &t)),
                })
            }
        }
    }

    pub fn scale(&self, factor: C64) -> GlobalOperator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * factor),
            Storage::Sparse(rows) => Storage::Sparse(
                rows.iter()
                    .map(|row| row.iter().map(|&(c, v)| (c, v * factor)).collect())
                    .collect(),
            ),
        };
        GlobalOperator { basis: self.basis.clone(), storage }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.storage {
            Storage::Dense(m) => m * v,
            Storage::Sparse(rows) => DVector::from_iterator(
                rows.len(),
                rows.iter().map(|row| row.iter().map(|&(c, x)| x * v[c]).sum::<C64>()),
            ),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        match &self.storage {
            Storage::Dense(m) => is_hermitian(m, tol),
            Storage::Sparse(_) => {
                self.triplets().iter().all(|&(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
            }
        }
    }

    /// Largest absolute difference to another operator, entrywise.
    pub fn max_abs_diff(&self, other: &GlobalOperator) -> Result<f64> {
        let diff = self.add(&other.scale(C64::new(-1.0, 0.0)))?;
        Ok(diff.triplets().iter().fold(0.0, |a, &(_, _, v)| a.max(v.norm())))
    }
}

fn sparse_rows(d: usize, triplets: &[(usize, usize, C64)]) -> Vec<Vec<(usize, C64)>> {
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); d];
    for &(r, c, v) in triplets {
        rows[r].push((c, v));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|&(_, v)| v != C64::new(0.0, 0.0));
        *row = merged;
    }
    rows
}

/// Local space of one party of `layout`, holding up to `N` particles.
pub fn party_space(layout: &ModeLayout) -> LocalSpace {
    LocalSpace::new(layout.modes_per_party(), layout.total_particles())
}

/// Embed a party's local operator into the sector, identity elsewhere.
pub fn embed_local(
    local: &LocalOperator,
    party: usize,
    basis: &Arc<SectorBasis>,
) -> Result<GlobalOperator> {
    let layout = basis.layout();
    if party >= layout.parties() {
        return Err(Error::Layout(format!(
            "party {party} out of range for {} parties",
            layout.parties()
        )));
    }
    if local.space.modes() != layout.modes_per_party() {
        return Err(Error::Layout(format!(
            "local operator acts on {} modes, parties hold {}",
            local.space.modes(),
            layout.modes_per_party()
        )));
    }
    if local.space.cap() < layout.total_particles() {
        return Err(Error::Layout(format!(
            "local space truncated at {} particles, sector holds {}",
            local.space.cap(),
            layout.total_particles()
        )));
    }
    let space = &local.space;
    let d = space.dimension();
    for i in 0..d {
        for j in 0..d {
            let (ti, tj) = (space.total(i), space.total(j));
            if ti != tj && local.matrix[(i, j)].norm() > HERMITIAN_TOL {
                return Err(Error::SsrViolation { party, from: tj, to: ti });
            }
        }
    }
    let modes = layout.party_modes(party);
    let mut triplets = Vec::new();
    let mut occ = Vec::new();
    for col in 0..basis.dimension() {
        let local_occ = basis.local_occupation(col, party);
        let l = space.index_of(local_occ).expect("local occupation within cap");
        for i in space.block(space.total(l)) {
            let v = local.matrix[(i, l)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            occ.clear();
            occ.extend_from_slice(basis.state(col));
            occ[modes.clone()].copy_from_slice(space.state(i));
            let row = basis.index_of(&occ).expect("number-conserving image stays in sector");
            triplets.push((row, col, v));
        }
    }
    Ok(GlobalOperator::from_triplets(basis.clone(), &triplets))
}

/// Product of embedded local operators, one per listed party.
pub fn embed_product(
    locals: &[(usize, &LocalOperator)],
    basis: &Arc<SectorBasis>,
) -> Result<GlobalOperator> {
    let mut acc = GlobalOperator::identity(basis.clone());
    for &(party, op) in locals {
        acc = acc.matmul(&embed_local(op, party, basis)?)?;
    }
    Ok(acc)
}

/// `Tr[rho op]`, which must be real within 1e-9.
pub fn expectation(rho: &DensityOperator, op: &GlobalOperator) -> Result<f64> {
    if !rho.basis.same_as(&op.basis) {
        return Err(Error::BasisMismatch);
    }
    let m = &rho.matrix;
    let value: C64 = match &op.storage {
        Storage::Dense(o) => {
            let d = o.nrows();
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += m[(i, j)] * o[(j, i)];
                }
            }
            acc
        }
        Storage::Sparse(rows) => rows
            .iter()
            .enumerate()
            .flat_map(|(j, row)| row.iter().map(move |&(i, v)| m[(i, j)] * v))
            .sum(),
    };
    if value.im.abs() > IMAG_TOL {
        return Err(Error::NonReal { residual: value.im.abs() });
    }
    Ok(value.re)
}

/// Product space of `M` two-level modes, `{|0>, |1>}` per party, without any
/// particle-number restriction. Basis index bit `M-1-k` is party `k`'s
/// occupation, so party 0 is the most significant bit.
#[derive(Debug, Clone)]
pub struct QubitRegister {
    parties: usize,
    amplitudes: DVector<C64>,
}

impl QubitRegister {
    pub fn new(parties: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if parties < 2 || amplitudes.len() != 1 << parties {
            return Err(Error::InvalidParameter(format!(
                "register of {parties} parties needs {} amplitudes",
                1usize << parties.min(30)
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("register has zero norm".into()));
        }
        Ok(Self { parties, amplitudes: amplitudes / C64::new(norm, 0.0) })
    }

    /// Embed a single-copy sector state whose modes hold at most one particle.
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let layout = psi.layout();
        if layout.copies() != 1 {
            return Err(Error::Layout("qubit register needs a single-copy state".into()));
        }
        let m = layout.parties();
        let mut amps = DVector::zeros(1 << m);
        for i in psi.support(0.0) {
            let occ = psi.basis.state(i);
            if occ.iter().any(|&n| n > 1) {
                return Err(Error::Layout(format!(
                    "occupation {occ:?} does not fit a two-level mode"
                )));
            }
            let idx = occ.iter().fold(0usize, |acc, &n| (acc << 1) | n);
            amps[idx] = psi.amplitudes[i];
        }
        Self::new(m, amps)
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn occupation(&self, index: usize) -> Vec<usize> {
        (0..self.parties).map(|k| (index >> (self.parties - 1 - k)) & 1).collect()
    }
}
