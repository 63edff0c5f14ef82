//! State families: single-particle Bell, W, doubly occupied W, Dicke,
//! dual-rail Bell and vacuum, plus their two-copy versions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, tensor_copies, ModeLayout, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    Bell,
    W,
    /// W with every occupied site holding two particles.
    W2,
    Dicke,
    DualRailBell,
    Vacuum,
}

impl StateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            StateFamily::Bell => "bell",
            StateFamily::W => "w",
            StateFamily::W2 => "w2",
            StateFamily::Dicke => "dicke",
            StateFamily::DualRailBell => "dual-rail-bell",
            StateFamily::Vacuum => "vacuum",
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bell" => StateFamily::Bell,
            "w" => StateFamily::W,
            "w2" | "w-doubled" => StateFamily::W2,
            "dicke" => StateFamily::Dicke,
            "dual-rail-bell" => StateFamily::DualRailBell,
            "vacuum" => StateFamily::Vacuum,
            other => return Err(Error::InvalidParameter(format!("unknown state family {other:?}"))),
        })
    }
}

/// Which state to build and how many copies of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: StateFamily,
    pub parties: usize,
    /// Excitation count for Dicke states; ignored otherwise.
    pub particles: usize,
    pub copies: usize,
}

impl StateSpec {
    pub fn new(family: StateFamily, parties: usize, particles: usize, copies: usize) -> Self {
        Self { family, parties, particles, copies }
    }

    pub fn w(parties: usize, copies: usize) -> Self {
        Self::new(StateFamily::W, parties, 1, copies)
    }

    /// `D(M, ⌊M/2⌋)`.
    pub fn half_dicke(parties: usize, copies: usize) -> Self {
        Self::new(StateFamily::Dicke, parties, parties / 2, copies)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.copies) {
            return Err(Error::InvalidParameter(format!(
                "copies must be 1 or 2, got {}",
                self.copies
            )));
        }
        match self.family {
            StateFamily::Bell | StateFamily::DualRailBell if self.parties != 2 => {
                Err(Error::InvalidParameter(format!("{} has exactly 2 parties", self.family)))
            }
            StateFamily::DualRailBell if self.copies != 1 => Err(Error::InvalidParameter(
                "dual-rail Bell state already occupies both modes of each party".into(),
            )),
            StateFamily::Dicke if !(1..=self.parties).contains(&self.particles) => {
                Err(Error::InvalidParameter(format!(
                    "Dicke excitations must satisfy 1 <= N <= M, got N={} M={}",
                    self.particles, self.parties
                )))
            }
            _ if self.parties < 2 => {
                Err(Error::InvalidParameter(format!("need at least 2 parties, got {}", self.parties)))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<StateVector> {
        self.validate()?;
        let single = match self.family {
            StateFamily::Bell => make_bell_single_particle()?,
            StateFamily::W => make_w(self.parties)?,
            StateFamily::W2 => make_w_doubled(self.parties)?,
            StateFamily::Dicke => make_dicke(self.parties, self.particles)?,
            StateFamily::DualRailBell => return make_dual_rail_bell(),
            StateFamily::Vacuum => make_vacuum(self.parties)?,
        };
        tensor_copies(&single, self.copies)
    }

    /// Short label such as `w(M=3)x2`.
    pub fn label(&self) -> String {
        match self.family {
            StateFamily::Dicke => {
                format!("dicke(M={},N={})x{}", self.parties, self.particles, self.copies)
            }
            f => format!("{f}(M={})x{}", self.parties, self.copies),
        }
    }
}

fn equal_superposition(layout: ModeLayout, occupations: &[Vec<usize>]) -> Result<StateVector> {
    let basis = Arc::new(enumerate_sector(layout)?);
    let amp = C64::new(1.0 / (occupations.len() as f64).sqrt(), 0.0);
    let mut amps = DVector::zeros(basis.dimension());
    for occ in occupations {
        let i = basis
            .index_of(occ)
            .ok_or_else(|| Error::InvalidParameter(format!("occupation {occ:?} not in sector")))?;
        amps[i] = amp;
    }
    StateVector::new(basis, amps)
}

fn unit_occupations(parties: usize, per_site: usize) -> Vec<Vec<usize>> {
    (0..parties)
        .map(|k| (0..parties).map(|i| if i == k { per_site } else { 0 }).collect())
        .collect()
}

/// `(|1,0> + |0,1>)/√2`.
pub fn make_bell_single_particle() -> Result<StateVector> {
    make_w(2)
}

/// One particle spread evenly over `m` modes.
pub fn make_w(m: usize) -> Result<StateVector> {
    equal_superposition(ModeLayout::new(m, 1, 1)?, &unit_occupations(m, 1))
}

/// The W state with `|1> -> |2>` on every site.
pub fn make_w_doubled(m: usize) -> Result<StateVector> {
    equal_superposition(ModeLayout::new(m, 1, 2)?, &unit_occupations(m, 2))
}

/// Equal superposition of all `C(m, n)` ways to put single particles into
/// `n` of the `m` modes, normalized to unit norm.
pub fn make_dicke(m: usize, n: usize) -> Result<StateVector> {
    if n == 0 || n > m {
        return Err(Error::InvalidParameter(format!(
            "Dicke excitations must satisfy 1 <= N <= M, got N={n} M={m}"
        )));
    }
    let mut occupations = Vec::new();
    let mut current = vec![0; m];
    choose_sites(&mut current, 0, n, &mut occupations);
    equal_superposition(ModeLayout::new(m, 1, n)?, &occupations)
}

fn choose_sites(current: &mut Vec<usize>, from: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if left == 0 {
        out.push(current.clone());
        return;
    }
    for site in from..=current.len() - left {
        current[site] = 1;
        choose_sites(current, site + 1, left - 1, out);
        current[site] = 0;
    }
}

/// `(|01>|01> + |10>|10>)/√2`: two parties, each holding one particle
/// shared between its two rails.
pub fn make_dual_rail_bell() -> Result<StateVector> {
    equal_superposition(ModeLayout::new(2, 2, 2)?, &[vec![0, 1, 0, 1], vec![1, 0, 1, 0]])
}

pub fn make_vacuum(m: usize) -> Result<StateVector> {
    equal_superposition(ModeLayout::new(m, 1, 0)?, &[vec![0; m]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amp_on(psi: &StateVector, occ: &[usize]) -> f64 {
        psi.amplitude(occ).re
    }

    #[test]
    fn bell_amplitudes() {
        let psi = make_bell_single_particle().unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(psi.basis().states(), &[vec![1, 0], vec![0, 1]]);
        assert!((psi.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((psi.amplitudes()[1].re - h).abs() < 1e-15);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_copies_of_bell() {
        let two = tensor_copies(&make_bell_single_particle().unwrap(), 2).unwrap();
        let support = two.support(1e-14);
        assert_eq!(support.len(), 4);
        for i in support {
            assert!((two.amplitudes()[i].re - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn w_states() {
        let w3 = make_w(3).unwrap();
        for occ in unit_occupations(3, 1) {
            assert!((amp_on(&w3, &occ) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        let w5 = make_w(5).unwrap();
        assert_eq!(w5.support(1e-14).len(), 5);
        assert!((w5.amplitudes()[w5.support(1e-14)[0]].re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn w3_doubled_copy_has_nine_product_terms() {
        let two = tensor_copies(&make_w(3).unwrap(), 2).unwrap();
        let support = two.support(1e-14);
        assert_eq!(support.len(), 9);
        for i in support {
            assert!((two.amplitudes()[i].re - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn w_doubled_amplitudes() {
        let w = make_w_doubled(3).unwrap();
        for occ in [[2, 0, 0], [0, 2, 0], [0, 0, 2]] {
            assert!((amp_on(&w, &occ) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        let w2 = make_w_doubled(2).unwrap();
        assert!((amp_on(&w2, &[2, 0]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((w2.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dicke_reduces_to_w() {
        for m in 2..=5 {
            let d = make_dicke(m, 1).unwrap();
            let w = make_w(m).unwrap();
            assert_eq!(d.amplitudes(), w.amplitudes());
        }
    }

    #[test]
    fn dicke_four_two() {
        let d = make_dicke(4, 2).unwrap();
        let support = d.support(1e-14);
        assert_eq!(support.len(), 6);
        for i in support {
            assert!(d.basis().state(i).iter().all(|&n| n <= 1));
            assert!((d.amplitudes()[i].re - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn dicke_range_is_checked() {
        assert!(make_dicke(3, 0).is_err());
        assert!(make_dicke(3, 4).is_err());
        assert!(StateSpec::new(StateFamily::Dicke, 4, 5, 2).build().is_err());
    }

    #[test]
    fn dual_rail_bell() {
        let psi = make_dual_rail_bell().unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((amp_on(&psi, &[0, 1, 0, 1]) - h).abs() < 1e-15);
        assert!((amp_on(&psi, &[1, 0, 1, 0]) - h).abs() < 1e-15);
        for i in psi.support(1e-14) {
            assert_eq!(psi.basis().partition_of(i), vec![1, 1]);
        }
    }

    #[test]
    fn spec_round_trip() {
        for name in ["bell", "w", "w2", "dicke", "dual-rail-bell", "vacuum"] {
            assert_eq!(name.parse::<StateFamily>().unwrap().name(), name);
        }
        assert!("ghz".parse::<StateFamily>().is_err());
        assert!(StateSpec::new(StateFamily::DualRailBell, 2, 0, 2).validate().is_err());
        assert_eq!(StateSpec::half_dicke(5, 2).particles, 2);
    }
}
