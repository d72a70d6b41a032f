//! Reduced density-matrix propagation in the SOC basis.
//!
//! dρ_ab/dt = −iω_ab ρ_ab + iE(t) Σ_c (d_ac ρ_cb − d_cb ρ_ac)
//!            − Σ_cd R_ab,cd ρ_cd − Σ_cd A_ab,cd ρ_cd
//!
//! The Bloch tensor R acts as a rate matrix on populations plus a dephasing
//! mask on coherences; it is never formed as an N²×N² object.

mod reference;
mod rkf;
mod snapshot;
mod trajectory;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use reference::{reference_propagate, Superoperator};
pub use rkf::{integrate, output_times, IntegratorConfig, StepStats};
pub use snapshot::{read_snapshots, write_snapshots, Snapshot};
pub use trajectory::{ObservableRecord, ObservableRecorder, Trajectory};

use crate::dissipation::DissipationModel;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{anti_hermiticity, max_abs, CMatrix, C64, I, ONE, ZERO};
use crate::units::kt_hartree;

/// Levels within this of the lowest energy (Hartree) share the T = 0 ground
/// population.
pub const GROUND_DEGENERACY_HA: f64 = 1e-10;

/// Hermitian density matrix with non-negative diagonal and trace ≤ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension {
                what: format!("density matrix ({}x{})", m.nrows(), m.ncols()),
                got: m.ncols(),
                expected: m.nrows(),
            });
        }
        let dev = anti_hermiticity(&m);
        if dev > 1e-10 {
            return Err(Error::NotHermitian {
                matrix: "density matrix",
                max_dev: dev,
                tol: 1e-10,
            });
        }
        if let Some(a) = (0..m.nrows()).find(|&a| m[(a, a)].re < -1e-12) {
            return Err(Error::invalid(format!("negative population {} on state {a}", m[(a, a)].re)));
        }
        let tr: f64 = (0..m.nrows()).map(|a| m[(a, a)].re).sum();
        if tr > 1.0 + 1e-9 {
            return Err(Error::invalid(format!("density matrix trace {tr} exceeds 1")));
        }
        Ok(Self(m))
    }

    pub fn from_populations(p: &[f64]) -> Result<Self> {
        let n = p.len();
        Self::new(CMatrix::from_fn(n, n, |a, b| if a == b { C64::new(p[a], 0.0) } else { ZERO }))
    }

    /// |ψ⟩⟨ψ| for a normalized amplitude vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("state vector norm² is {norm}, expected 1")));
        }
        let n = psi.len();
        Self::new(CMatrix::from_fn(n, n, |a, b| psi[a] * psi[b].conj()))
    }

    pub fn n_states(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_states()).map(|a| self.0[(a, a)].re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.n_states()).map(|a| self.0[(a, a)].re).collect()
    }
}

/// Boltzmann populations over the given energies (Hartree).
pub fn boltzmann_populations(energies: &[f64], temperature_k: f64) -> Result<Vec<f64>> {
    if !(temperature_k >= 0.0 && temperature_k.is_finite()) {
        return Err(Error::invalid(format!("temperature {temperature_k} K must be non-negative")));
    }
    if energies.is_empty() {
        return Err(Error::invalid("no energy levels"));
    }
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = if temperature_k == 0.0 {
        energies
            .iter()
            .map(|&e| if e - e0 <= GROUND_DEGENERACY_HA { 1.0 } else { 0.0 })
            .collect()
    } else {
        let kt = kt_hartree(temperature_k);
        energies.iter().map(|&e| (-(e - e0) / kt).exp()).collect()
    };
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Thermal initial state ρ_ab = δ_ab exp(−E_a/k_BT)/Z.
pub fn initial_density(energies: &[f64], temperature_k: f64) -> Result<DensityMatrix> {
    DensityMatrix::from_populations(&boltzmann_populations(energies, temperature_k)?)
}

/// Which terms of the equation of motion are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub field: bool,
    pub vib: bool,
    pub auger: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            field: true,
            vib: true,
            auger: true,
        }
    }
}

/// Above this size the dipole product is split over columns in parallel.
const PARALLEL_MIN_STATES: usize = 96;

/// Precomputed right-hand side of the master equation.
#[derive(Clone, Debug)]
pub struct QmeSystem {
    energies: Vec<f64>,
    dipole: CMatrix,
    model: Arc<DissipationModel>,
    field: Arc<dyn Field>,
    flags: Flags,
    /// −iω_ab − ½(L_a + L_b), L = K·[vib] + A·[auger].
    decay: CMatrix,
}

impl QmeSystem {
    /// `dipole` is e·d in the SOC basis (Hermitian); `energies` in Hartree.
    pub fn new(
        energies: Vec<f64>,
        dipole: CMatrix,
        model: Arc<DissipationModel>,
        field: Arc<dyn Field>,
        flags: Flags,
    ) -> Result<Self> {
        let n = energies.len();
        if dipole.nrows() != n || dipole.ncols() != n {
            return Err(Error::Dimension {
                what: "dipole matrix".into(),
                got: dipole.nrows(),
                expected: n,
            });
        }
        if model.n_states() != n {
            return Err(Error::Dimension {
                what: "dissipation model".into(),
                got: model.n_states(),
                expected: n,
            });
        }
        let dev = anti_hermiticity(&dipole);
        let tol = 1e-12 * max_abs(&dipole).max(1.0);
        if dev > tol {
            return Err(Error::NotHermitian {
                matrix: "dipole",
                max_dev: dev,
                tol,
            });
        }
        let loss: Vec<f64> = (0..n)
            .map(|a| {
                let k = if flags.vib { model.out_total()[a] } else { 0.0 };
                let g = if flags.auger { model.auger_rates()[a] } else { 0.0 };
                k + g
            })
            .collect();
        let decay = CMatrix::from_fn(n, n, |a, b| C64::new(-0.5 * (loss[a] + loss[b]), -(energies[a] - energies[b])));
        Ok(Self {
            energies,
            dipole,
            model,
            field,
            flags,
            decay,
        })
    }

    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dipole(&self) -> &CMatrix {
        &self.dipole
    }

    pub fn model(&self) -> &DissipationModel {
        &self.model
    }

    pub fn field(&self) -> &dyn Field {
        self.field.as_ref()
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    /// Field amplitude seen by the system (zero when the field is off).
    pub fn amplitude(&self, t: f64) -> f64 {
        if self.flags.field {
            self.field.amplitude(t)
        } else {
            0.0
        }
    }

    /// out ← dρ/dt. `scratch` must be n×n; its contents are overwritten.
    pub fn rhs(&self, t: f64, rho: &CMatrix, out: &mut CMatrix, scratch: &mut CMatrix) {
        let n = self.n_states();
        for ((o, &g), &r) in out.iter_mut().zip(self.decay.iter()).zip(rho.iter()) {
            *o = g * r;
        }
        let e = self.amplitude(t);
        if e != 0.0 {
            mul_into(&self.dipole, rho, scratch);
            let ie = I * e;
            for b in 0..n {
                for a in 0..n {
                    // Dρ − ρD = X − X† for Hermitian ρ and D
                    out[(a, b)] += ie * (scratch[(a, b)] - scratch[(b, a)].conj());
                }
            }
        }
        if self.flags.vib {
            let incoming = self.model.incoming();
            for a in 0..n {
                let gain: f64 = incoming.row(a).map(|(c, k)| k * rho[(c, c)].re).sum();
                out[(a, a)].re += gain;
            }
        }
    }

    /// d tr ρ/dt implied by the Auger term alone.
    pub fn trace_loss(&self, rho: &CMatrix) -> f64 {
        if !self.flags.auger {
            return 0.0;
        }
        self.model
            .auger_rates()
            .iter()
            .enumerate()
            .map(|(a, &g)| -g * rho[(a, a)].re)
            .sum()
    }
}

fn mul_into(d: &CMatrix, rho: &CMatrix, out: &mut CMatrix) {
    let n = d.nrows();
    if n < PARALLEL_MIN_STATES {
        out.gemm(ONE, d, rho, ZERO);
        return;
    }
    let ds = d.as_slice();
    let rs = rho.as_slice();
    out.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, col)| {
            col.fill(ZERO);
            for c in 0..n {
                let r = rs[j * n + c];
                if r == ZERO {
                    continue;
                }
                for (o, &dv) in col.iter_mut().zip(&ds[c * n..(c + 1) * n]) {
                    *o += dv * r;
                }
            }
        });
}

/// Final state and step statistics of one propagation.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub final_state: CMatrix,
    pub stats: StepStats,
}

/// Receives the interpolated state at each output time (atomic units).
pub trait Recorder {
    fn record(&mut self, t: f64, rho: &CMatrix) -> Result<()>;
}

/// Propagate from t0 to t1 (atomic units), sampling at `outputs`.
pub fn propagate(
    sys: &QmeSystem,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    outputs: &[f64],
    recorder: &mut dyn Recorder,
) -> Result<Propagation> {
    let n = sys.n_states();
    if rho0.n_states() != n {
        return Err(Error::Dimension {
            what: "initial density matrix".into(),
            got: rho0.n_states(),
            expected: n,
        });
    }
    let mut scratch = CMatrix::zeros(n, n);
    let (final_state, stats) = integrate(
        |t, y, out| sys.rhs(t, y, out, &mut scratch),
        rho0.matrix(),
        t0,
        t1,
        cfg,
        outputs,
        |t, y| recorder.record(t, y),
    )?;
    Ok(Propagation { final_state, stats })
}
