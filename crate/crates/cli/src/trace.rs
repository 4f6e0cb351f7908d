//! Reduction traces: the record of one run of the desk-scale reduction
//! loop, with every subgroup passage carrying enough data to re-verify its
//! certificate from the report alone.

use fgromov_core::growth::GrowthDegreeEstimate;
use fgromov_core::subgroup::KrCert;
use fgromov_core::{Error, MarkedGroup, Result};
use serde::Serialize;

use crate::spec::{parse_element, render_element};

/// Ball sizes plus the log-log degree estimate at one marking.
#[derive(Clone, Serialize)]
pub struct GrowthStamp {
    pub radius: u32,
    pub sizes: Vec<u64>,
    pub degree: Option<GrowthDegreeEstimate>,
    pub stabilized: Option<u32>,
}

/// A KrCert rendered for a report. `reverified` records that verify() ran
/// after the producing call returned, not merely inside it.
#[derive(Clone, Serialize)]
pub struct CertStamp {
    pub k: u32,
    pub r: u32,
    pub generators: Vec<String>,
    pub checked_inclusion: bool,
    pub reverified: bool,
}

impl CertStamp {
    pub fn from_cert(cert: &KrCert, reverified: bool) -> CertStamp {
        CertStamp {
            k: cert.k,
            r: cert.r,
            generators: cert.s_prime.iter().map(render_element).collect(),
            checked_inclusion: cert.checked_inclusion,
            reverified,
        }
    }

    /// Rebuild the certificate against a group and run its checks again.
    pub fn reverify(&self, group: &MarkedGroup, cap: usize) -> Result<()> {
        let s_prime = self
            .generators
            .iter()
            .map(|g| parse_element(group.backend(), g))
            .collect::<Result<Vec<_>>>()?;
        let cert = KrCert { k: self.k, r: self.r, s_prime, checked_inclusion: self.checked_inclusion };
        cert.verify(group, cap)
    }
}

/// One commutator generator with its provenance: it must equal
/// g [S[left], S[right]] g^{-1} in the group the step started from.
#[derive(Clone, Serialize)]
pub struct WitnessStamp {
    pub element: String,
    pub conjugator: String,
    pub left: usize,
    pub right: usize,
    pub reverified: bool,
}

impl WitnessStamp {
    pub fn reverify(&self, group: &MarkedGroup) -> Result<()> {
        let backend = group.backend();
        let element = parse_element(backend, &self.element)?;
        let conjugator = parse_element(backend, &self.conjugator)?;
        let gens = group.generators();
        if self.left >= gens.len() || self.right >= gens.len() {
            return Err(Error::CertificateFailed {
                context: format!("witness indexes generator {} of {}", self.left.max(self.right), gens.len()),
            });
        }
        let c = group.commutator(&gens[self.left], &gens[self.right])?;
        let rebuilt = group.conjugate(&conjugator, &c)?;
        if rebuilt.canonical_key() != element.canonical_key() {
            return Err(Error::CertificateFailed {
                context: format!("witness for '{}' rebuilds to a different element", self.element),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Serialize)]
#[serde(tag = "op")]
pub enum StepOp {
    /// Passage to a finite index subgroup.
    #[serde(rename = "finite_index")]
    FiniteIndex { index_bound: u32, cert: CertStamp },
    /// Passage to the kernel of the homomorphism onto the abelianization,
    /// i.e. to the commutator subgroup, generated by witnessed conjugated
    /// commutators.
    #[serde(rename = "cyclic_kernel")]
    CyclicKernel {
        target: String,
        oracle: String,
        pigeonhole_radius: u32,
        witnesses: Vec<WitnessStamp>,
    },
}

#[derive(Clone, Serialize)]
pub struct GenRedStamp {
    pub separation_radius: u32,
    pub tenfold_ratio: f64,
    pub cert: CertStamp,
}

#[derive(Clone, Serialize)]
pub struct HarmonicStamp {
    pub case: String,
    pub scale: u32,
    pub lip: f64,
    pub eps: f64,
    pub eps_target: f64,
    pub grad_at_id: f64,
}

#[derive(Clone, Serialize)]
pub struct ReduceStep {
    pub index: usize,
    pub generator_reduction: Option<GenRedStamp>,
    pub harmonic: Option<HarmonicStamp>,
    pub op: StepOp,
    pub growth_before: GrowthStamp,
    pub growth_after: GrowthStamp,
    pub degree_drop: f64,
}

#[derive(Clone, Serialize)]
#[serde(tag = "state")]
pub enum Terminal {
    #[serde(rename = "trivial")]
    Trivial,
    #[serde(rename = "finite")]
    Finite { stable_radius: u32, size: u64 },
    #[serde(rename = "budget")]
    Budget { steps_used: u32 },
}

#[derive(Clone, Serialize)]
pub struct ReductionTrace {
    pub steps: Vec<ReduceStep>,
    pub step_count: usize,
    pub terminal: Terminal,
}
