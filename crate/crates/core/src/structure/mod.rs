//! Electronic-structure input: the spin-free Hamiltonian, spin-orbit coupling,
//! transition dipoles and per-state labels, plus the spin-orbit-coupled
//! eigenbasis built from them.

mod format;
mod soc;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{anti_hermiticity, asymmetry, max_abs, max_abs_real, CMatrix, RMatrix, C64};

pub use format::{load_structure, parse_structure, write_structure, EnergyUnit};
pub use soc::{
    assign_auger_widths, diagonalize_soc, to_soc_operator, AugerAssignment, EdgeRule, SocBasis,
};

/// Relative tolerance on symmetry/Hermiticity of input matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Total spin S and projection M_S, stored as twice their value so that
/// half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinLabel {
    twice_s: u32,
    twice_ms: i32,
}

impl SpinLabel {
    pub fn new(twice_s: u32, twice_ms: i32) -> Result<Self> {
        let s = twice_s as i32;
        if twice_ms.abs() > s || (s - twice_ms).rem_euclid(2) != 0 {
            return Err(Error::invalid(format!(
                "M_S = {} is not a projection of S = {}",
                twice_ms as f64 / 2.0,
                s as f64 / 2.0
            )));
        }
        Ok(Self { twice_s, twice_ms })
    }

    /// Build from the decimal values of S and M_S (e.g. `1.5`, `-0.5`).
    pub fn from_values(s: f64, ms: f64) -> Result<Self> {
        let ts = 2.0 * s;
        let tm = 2.0 * ms;
        if !(ts >= 0.0) || ts.fract() != 0.0 || tm.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "spin label ({s}, {ms}) is not a pair of half-integers with S >= 0"
            )));
        }
        Self::new(ts as u32, tm as i32)
    }

    pub fn twice_s(&self) -> u32 {
        self.twice_s
    }

    pub fn twice_ms(&self) -> i32 {
        self.twice_ms
    }

    pub fn s(&self) -> f64 {
        self.twice_s as f64 / 2.0
    }

    pub fn ms(&self) -> f64 {
        self.twice_ms as f64 / 2.0
    }

    /// 2S + 1.
    pub fn multiplicity(&self) -> u32 {
        self.twice_s + 1
    }
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(S={}, M_S={})", self.s(), self.ms())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateClass {
    Valence,
    Core,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    #[serde(rename = "none")]
    None,
    L3,
    L2,
}

/// Labels attached to one spin-free basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfLabel {
    pub spin: SpinLabel,
    pub class: StateClass,
    pub edge: Edge,
}

/// Validated electronic-structure matrices in the spin-free basis.
///
/// Energies are in Hartree and dipoles in atomic units.
#[derive(Clone, Debug)]
pub struct ElectronicStructure {
    h_ci: RMatrix,
    v_soc: CMatrix,
    dipoles: [RMatrix; 3],
    labels: Vec<SfLabel>,
    diagonal_supplied: bool,
}

impl ElectronicStructure {
    /// Assemble and validate. `h_ci` may be diagonal (spin-free eigenbasis).
    pub fn new(
        h_ci: RMatrix,
        v_soc: CMatrix,
        dipoles: [RMatrix; 3],
        labels: Vec<SfLabel>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("n_states must be positive"));
        }
        check_square("h_ci", h_ci.nrows(), h_ci.ncols(), n)?;
        check_square("v_soc", v_soc.nrows(), v_soc.ncols(), n)?;
        for (d, name) in dipoles.iter().zip(["dipole_x", "dipole_y", "dipole_z"]) {
            check_square(name, d.nrows(), d.ncols(), n)?;
        }
        let diagonal_supplied = (0..n).all(|j| (0..n).all(|i| i == j || h_ci[(i, j)] == 0.0));
        let es = Self {
            h_ci,
            v_soc,
            dipoles,
            labels,
            diagonal_supplied,
        };
        es.validate()?;
        Ok(es)
    }

    /// Build from spin-free energies (the spin-free eigenbasis).
    pub fn from_energies(
        energies: &[f64],
        v_soc: CMatrix,
        dipoles: [RMatrix; 3],
        labels: Vec<SfLabel>,
    ) -> Result<Self> {
        if energies.len() != labels.len() {
            return Err(Error::Dimension {
                what: "energies".into(),
                got: energies.len(),
                expected: labels.len(),
            });
        }
        Self::new(
            RMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(energies)),
            v_soc,
            dipoles,
            labels,
        )
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_states();
        let scale = max_abs_real(&self.h_ci).max(1.0);
        let dev = asymmetry(&self.h_ci);
        if dev > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                matrix: "h_ci",
                max_dev: dev,
                tol: HERMITICITY_TOL,
            });
        }
        let scale = max_abs(&self.v_soc).max(1.0);
        let dev = anti_hermiticity(&self.v_soc);
        if dev > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                matrix: "v_soc",
                max_dev: dev,
                tol: HERMITICITY_TOL,
            });
        }
        for (d, name) in self.dipoles.iter().zip(["dipole_x", "dipole_y", "dipole_z"]) {
            let scale = max_abs_real(d).max(1.0);
            let dev = asymmetry(d);
            if dev > HERMITICITY_TOL * scale {
                return Err(Error::NotHermitian {
                    matrix: name,
                    max_dev: dev,
                    tol: HERMITICITY_TOL,
                });
            }
        }

        for k in 0..n {
            for m in 0..n {
                let (a, b) = (self.labels[k].spin, self.labels[m].spin);
                let ds = (a.twice_s as i32 - b.twice_s as i32).abs();
                let dm = (a.twice_ms - b.twice_ms).abs();
                if a != b && self.h_ci[(k, m)] != 0.0 {
                    return Err(Error::SelectionRule {
                        matrix: "h_ci",
                        n: k,
                        m,
                        value: self.h_ci[(k, m)],
                        reason: "spin-free Hamiltonian couples different (S, M_S)",
                    });
                }
                let v = self.v_soc[(k, m)];
                if v != C64::new(0.0, 0.0) && (ds > 2 || dm > 2) {
                    return Err(Error::SelectionRule {
                        matrix: "v_soc",
                        n: k,
                        m,
                        value: v.norm(),
                        reason: "requires dS in {0, ±1} and dM_S in {0, ±1}",
                    });
                }
                if a.twice_s != b.twice_s {
                    for (d, name) in self.dipoles.iter().zip(["dipole_x", "dipole_y", "dipole_z"]) {
                        if d[(k, m)] != 0.0 {
                            return Err(Error::SelectionRule {
                                matrix: name,
                                n: k,
                                m,
                                value: d[(k, m)],
                                reason: "dipole couples different total spin",
                            });
                        }
                    }
                }
            }
        }
        for (k, l) in self.labels.iter().enumerate() {
            if l.class == StateClass::Valence && l.edge != Edge::None {
                return Err(Error::invalid(format!(
                    "state {k} is valence but carries edge label {:?}",
                    l.edge
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn h_ci(&self) -> &RMatrix {
        &self.h_ci
    }

    pub fn v_soc(&self) -> &CMatrix {
        &self.v_soc
    }

    pub fn dipoles(&self) -> &[RMatrix; 3] {
        &self.dipoles
    }

    pub fn labels(&self) -> &[SfLabel] {
        &self.labels
    }

    /// True when `h_ci` was supplied (or is) diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal_supplied
    }

    /// Diagonal of H_CI: spin-free energies when the basis is the eigenbasis.
    pub fn sf_energies(&self) -> Vec<f64> {
        self.h_ci.diagonal().iter().copied().collect()
    }

    /// H_CI + V_SOC.
    pub fn total_hamiltonian(&self) -> CMatrix {
        self.h_ci.map(|x| C64::new(x, 0.0)) + &self.v_soc
    }

    /// Polarization-contracted dipole operator e·d in the spin-free basis.
    pub fn dipole_along(&self, e: [f64; 3]) -> RMatrix {
        &self.dipoles[0] * e[0] + &self.dipoles[1] * e[1] + &self.dipoles[2] * e[2]
    }

    pub fn count_class(&self, class: StateClass) -> usize {
        self.labels.iter().filter(|l| l.class == class).count()
    }
}

fn check_square(what: &str, rows: usize, cols: usize, n: usize) -> Result<()> {
    if rows != n || cols != n {
        return Err(Error::Dimension {
            what: format!("{what} ({rows}x{cols})"),
            got: rows.max(cols),
            expected: n,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(twice_s: u32, twice_ms: i32) -> SfLabel {
        SfLabel {
            spin: SpinLabel::new(twice_s, twice_ms).unwrap(),
            class: StateClass::Valence,
            edge: Edge::None,
        }
    }

    fn zeros() -> [RMatrix; 3] {
        [RMatrix::zeros(2, 2), RMatrix::zeros(2, 2), RMatrix::zeros(2, 2)]
    }

    #[test]
    fn spin_label_rejects_bad_projection() {
        assert!(SpinLabel::new(2, 4).is_err());
        assert!(SpinLabel::new(2, 1).is_err());
        assert!(SpinLabel::from_values(1.5, -0.5).is_ok());
        assert!(SpinLabel::from_values(1.0, 0.5).is_err());
        assert_eq!(SpinLabel::new(4, -2).unwrap().multiplicity(), 5);
    }

    #[test]
    fn cross_spin_dipole_is_rejected() {
        let mut d = zeros();
        d[2][(0, 1)] = 0.1;
        d[2][(1, 0)] = 0.1;
        let err = ElectronicStructure::from_energies(
            &[0.0, 1.0],
            CMatrix::zeros(2, 2),
            d,
            vec![label(4, 0), label(2, 0)],
        )
        .unwrap_err();
        match err {
            Error::SelectionRule { matrix, n, m, .. } => {
                assert_eq!(matrix, "dipole_z");
                assert_eq!((n, m), (0, 1));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn soc_outside_selection_rule_is_rejected() {
        let mut v = CMatrix::zeros(2, 2);
        v[(0, 1)] = C64::new(0.01, 0.0);
        v[(1, 0)] = C64::new(0.01, 0.0);
        // quintet M_S = 2 and triplet M_S = 0: dM_S = 2
        let err = ElectronicStructure::from_energies(
            &[0.0, 1.0],
            v.clone(),
            zeros(),
            vec![label(4, 4), label(2, 0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::SelectionRule { matrix: "v_soc", .. }));
        // quintet M_S = 1 and triplet M_S = 0 is allowed
        ElectronicStructure::from_energies(&[0.0, 1.0], v, zeros(), vec![label(4, 2), label(2, 0)])
            .unwrap();
    }

    #[test]
    fn non_hermitian_soc_reports_deviation() {
        let mut v = CMatrix::zeros(2, 2);
        v[(0, 1)] = C64::new(0.01, 0.002);
        v[(1, 0)] = C64::new(0.01, 0.002);
        let err = ElectronicStructure::from_energies(
            &[0.0, 1.0],
            v,
            zeros(),
            vec![label(4, 0), label(2, 0)],
        )
        .unwrap_err();
        match err {
            Error::NotHermitian { matrix, max_dev, .. } => {
                assert_eq!(matrix, "v_soc");
                assert!((max_dev - 0.004).abs() < 1e-15);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn label_count_must_match_matrices() {
        let err = ElectronicStructure::from_energies(
            &[0.0, 1.0],
            CMatrix::zeros(3, 3),
            zeros(),
            vec![label(0, 0), label(0, 0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }
}
