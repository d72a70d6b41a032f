use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::units::{ev_to_hartree, hartree_to_ev};

use super::{Edge, ElectronicStructure, SfLabel, StateClass};

/// Eigenbasis of H_CI + V_SOC.
///
/// `vectors` holds one SOC state per column expanded in the spin-free basis,
/// so the coefficient C_an of SOC state `a` on SF state `n` is
/// `vectors[(n, a)]`.
#[derive(Clone, Debug)]
pub struct SocBasis {
    energies: Vec<f64>,
    vectors: CMatrix,
    sf_labels: Vec<SfLabel>,
    spins: Vec<u32>,
    spin_character: Vec<Vec<f64>>,
    core_character: Vec<f64>,
    l3_character: Vec<f64>,
    l2_character: Vec<f64>,
    auger_width_ev: Vec<f64>,
    assignment: Vec<AugerAssignment>,
}

/// How the Auger width of a core-dominated SOC state was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugerAssignment {
    Valence,
    L3,
    L2,
    /// Core-dominated but no edge information on its SF components.
    CoreUnlabeled,
}

/// Rule used to assign L3/L2 edges to core-dominated SOC states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRule {
    /// Majority of L3 vs. L2 character from the per-state SF edge labels.
    BySfMajority,
    /// States below `e_split_ev` are L3, the rest L2.
    ByEnergyThreshold { e_split_ev: f64 },
}

impl Default for EdgeRule {
    fn default() -> Self {
        EdgeRule::BySfMajority
    }
}

impl SocBasis {
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// SOC energies in Hartree, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// Coefficient C_an.
    pub fn coefficient(&self, a: usize, n: usize) -> C64 {
        self.vectors[(n, a)]
    }

    pub fn sf_labels(&self) -> &[SfLabel] {
        &self.sf_labels
    }

    /// Distinct values of 2S present in the SF basis, ascending.
    pub fn spins(&self) -> &[u32] {
        &self.spins
    }

    /// Σ_{n with 2S = twice_s} |C_an|².
    pub fn spin_character(&self, a: usize, twice_s: u32) -> f64 {
        self.spins
            .iter()
            .position(|&s| s == twice_s)
            .map_or(0.0, |k| self.spin_character[a][k])
    }

    pub fn core_character(&self, a: usize) -> f64 {
        self.core_character[a]
    }

    /// Auger widths Γ_a in eV (all zero until assigned).
    pub fn auger_widths_ev(&self) -> &[f64] {
        &self.auger_width_ev
    }

    pub fn auger_assignment(&self) -> &[AugerAssignment] {
        &self.assignment
    }

    /// The same basis with eigenvector column `a` multiplied by `phase`.
    #[cfg(test)]
    pub(crate) fn with_column_phase(&self, a: usize, phase: C64) -> Self {
        let mut out = self.clone();
        for n in 0..out.n_states() {
            out.vectors[(n, a)] *= phase;
        }
        out
    }
}

/// Diagonalize H_CI + V_SOC.
///
/// Eigenvalues come back ascending (ties broken by solver order). Each
/// eigenvector is rotated so that its largest-magnitude component is real and
/// positive; identical input gives identical output.
pub fn diagonalize_soc(es: &ElectronicStructure) -> Result<SocBasis> {
    let n = es.n_states();
    let h = es.total_hamiltonian();
    let max_iter = 1000 * n.max(10);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, max_iter)
        .ok_or(Error::EigenSolver { n, max_iter })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (a, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (k, z) in col.iter().enumerate() {
            let m = z.norm();
            if m > best {
                best = m;
                pivot = k;
            }
        }
        let phase = if best > 0.0 {
            col[pivot].conj() / best
        } else {
            C64::new(1.0, 0.0)
        };
        for k in 0..n {
            vectors[(k, a)] = col[k] * phase;
        }
        vectors[(pivot, a)].im = 0.0;
    }
    Ok(build_basis(es.labels().to_vec(), energies, vectors))
}

fn build_basis(sf_labels: Vec<SfLabel>, energies: Vec<f64>, vectors: CMatrix) -> SocBasis {
    let n = energies.len();
    let mut spins: Vec<u32> = sf_labels.iter().map(|l| l.spin.twice_s()).collect();
    spins.sort_unstable();
    spins.dedup();

    let mut spin_character = vec![vec![0.0; spins.len()]; n];
    let mut core_character = vec![0.0; n];
    let mut l3_character = vec![0.0; n];
    let mut l2_character = vec![0.0; n];
    for a in 0..n {
        for (k, label) in sf_labels.iter().enumerate() {
            let w = vectors[(k, a)].norm_sqr();
            let s = spins.binary_search(&label.spin.twice_s()).unwrap();
            spin_character[a][s] += w;
            if label.class == StateClass::Core {
                core_character[a] += w;
            }
            match label.edge {
                Edge::L3 => l3_character[a] += w,
                Edge::L2 => l2_character[a] += w,
                Edge::None => {}
            }
        }
    }
    SocBasis {
        energies,
        vectors,
        sf_labels,
        spins,
        spin_character,
        core_character,
        l3_character,
        l2_character,
        auger_width_ev: vec![0.0; n],
        assignment: vec![AugerAssignment::Valence; n],
    }
}

/// C† · op · C.
pub fn to_soc_operator(soc: &SocBasis, op_sf: &CMatrix) -> Result<CMatrix> {
    let n = soc.n_states();
    if op_sf.nrows() != n || op_sf.ncols() != n {
        return Err(Error::Dimension {
            what: format!("operator ({}x{})", op_sf.nrows(), op_sf.ncols()),
            got: op_sf.nrows().max(op_sf.ncols()),
            expected: n,
        });
    }
    Ok(soc.vectors.adjoint() * op_sf * &soc.vectors)
}

/// Assign Auger widths: zero for valence-dominated states, the L3 or L2
/// width for core-dominated ones (core character > 1/2).
pub fn assign_auger_widths(
    soc: &SocBasis,
    gamma_l3_ev: f64,
    gamma_l2_ev: f64,
    rule: EdgeRule,
) -> Result<SocBasis> {
    if !(gamma_l3_ev >= 0.0) || !(gamma_l2_ev >= 0.0) {
        return Err(Error::invalid(format!(
            "Auger widths must be non-negative (L3 {gamma_l3_ev}, L2 {gamma_l2_ev})"
        )));
    }
    if let EdgeRule::ByEnergyThreshold { e_split_ev } = rule {
        let lo = hartree_to_ev(soc.energies[0]);
        let hi = hartree_to_ev(*soc.energies.last().unwrap());
        if !(e_split_ev > lo && e_split_ev < hi) {
            return Err(Error::invalid(format!(
                "edge threshold {e_split_ev} eV outside the spectral range [{lo}, {hi}] eV"
            )));
        }
    }
    let mut out = soc.clone();
    for a in 0..soc.n_states() {
        let assignment = if soc.core_character[a] <= 0.5 {
            AugerAssignment::Valence
        } else {
            match rule {
                EdgeRule::BySfMajority => {
                    let (l3, l2) = (soc.l3_character[a], soc.l2_character[a]);
                    if l3 == 0.0 && l2 == 0.0 {
                        AugerAssignment::CoreUnlabeled
                    } else if l2 > l3 {
                        AugerAssignment::L2
                    } else {
                        AugerAssignment::L3
                    }
                }
                EdgeRule::ByEnergyThreshold { e_split_ev } => {
                    if soc.energies[a] < ev_to_hartree(e_split_ev) {
                        AugerAssignment::L3
                    } else {
                        AugerAssignment::L2
                    }
                }
            }
        };
        out.assignment[a] = assignment;
        out.auger_width_ev[a] = match assignment {
            AugerAssignment::L3 => gamma_l3_ev,
            AugerAssignment::L2 => gamma_l2_ev,
            AugerAssignment::Valence | AugerAssignment::CoreUnlabeled => 0.0,
        };
    }
    Ok(out)
}
