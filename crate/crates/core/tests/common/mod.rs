//! Small hand-built models shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spindyn::dissipation::{build_auger, build_bloch, compute_rates, DissipationModel, LifetimeConvention, RateOptions, VibrationalBath};
use spindyn::field::Field;
use spindyn::linalg::{to_complex, CMatrix, RMatrix, C64};
use spindyn::propagator::{DensityMatrix, Flags, Recorder};
use spindyn::structure::{
    assign_auger_widths, diagonalize_soc, to_soc_operator, Edge, EdgeRule, ElectronicStructure, SfLabel, SocBasis,
    SpinLabel, StateClass,
};
use spindyn::propagator::QmeSystem;
use spindyn::Result;

pub fn label(twice_s: u32, twice_ms: i32, class: StateClass, edge: Edge) -> SfLabel {
    SfLabel {
        spin: SpinLabel::new(twice_s, twice_ms).unwrap(),
        class,
        edge,
    }
}

pub fn valence(twice_s: u32) -> SfLabel {
    label(twice_s, 0, StateClass::Valence, Edge::None)
}

pub fn zero_dipoles(n: usize) -> [RMatrix; 3] {
    [RMatrix::zeros(n, n), RMatrix::zeros(n, n), RMatrix::zeros(n, n)]
}

/// Dense random Hermitian matrix with entries of modulus below `scale`,
/// zeroed where the labels forbid spin-orbit coupling.
pub fn random_soc(rng: &mut ChaCha8Rng, labels: &[SfLabel], scale: f64) -> CMatrix {
    let n = labels.len();
    let mut v = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let (sa, sb) = (labels[a].spin, labels[b].spin);
            let ds = (sa.twice_s() as i32 - sb.twice_s() as i32).abs();
            let dm = (sa.twice_ms() - sb.twice_ms()).abs();
            if ds > 2 || dm > 2 {
                continue;
            }
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (scale / 2f64.sqrt());
            v[(a, b)] = z;
            v[(b, a)] = z.conj();
        }
    }
    v
}

/// Random real symmetric dipoles between states of equal total spin.
pub fn random_dipoles(rng: &mut ChaCha8Rng, labels: &[SfLabel], scale: f64) -> [RMatrix; 3] {
    let n = labels.len();
    let mut d = zero_dipoles(n);
    for m in d.iter_mut() {
        for a in 0..n {
            for b in a + 1..n {
                if labels[a].spin.twice_s() == labels[b].spin.twice_s() {
                    let x = rng.gen_range(-scale..scale);
                    m[(a, b)] = x;
                    m[(b, a)] = x;
                }
            }
        }
    }
    d
}

pub fn random_bath(rng: &mut ChaCha8Rng, n_states: usize, modes_cm1: &[f64], max_shift: f64, temperature_k: f64) -> VibrationalBath {
    let g = RMatrix::from_fn(n_states, modes_cm1.len(), |_, _| rng.gen_range(0.0..max_shift));
    VibrationalBath::new(modes_cm1.to_vec(), g, 500.0, temperature_k).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A model assembled the same way the run driver does it.
pub struct Built {
    pub soc: SocBasis,
    pub model: Arc<DissipationModel>,
    pub dipole_z: CMatrix,
}

pub fn build(es: &ElectronicStructure, bath: Option<&VibrationalBath>, gamma_l3_ev: f64, gamma_l2_ev: f64) -> Result<Built> {
    let soc = diagonalize_soc(es)?;
    let soc = assign_auger_widths(&soc, gamma_l3_ev, gamma_l2_ev, EdgeRule::BySfMajority)?;
    let mut model = match bath {
        Some(b) => build_bloch(&soc, compute_rates(&soc, b, RateOptions::default())?)?,
        None => DissipationModel::none(soc.n_states()),
    };
    model = model.with_auger(build_auger(&soc, LifetimeConvention::HOverGamma)?)?;
    let dipole_z = to_soc_operator(&soc, &to_complex(&es.dipoles()[2]))?;
    Ok(Built {
        soc,
        model: Arc::new(model),
        dipole_z,
    })
}

impl Built {
    pub fn system(&self, field: Arc<dyn Field>, flags: Flags) -> Result<QmeSystem> {
        QmeSystem::new(self.soc.energies().to_vec(), self.dipole_z.clone(), self.model.clone(), field, flags)
    }

    /// Pure state equal to SF basis state `n`.
    pub fn sf_state(&self, n: usize) -> DensityMatrix {
        let psi: Vec<C64> = (0..self.soc.n_states()).map(|a| self.soc.coefficient(a, n).conj()).collect();
        DensityMatrix::pure(&psi).unwrap()
    }
}

/// Keeps every sampled density matrix.
#[derive(Default)]
pub struct Keep(pub Vec<(f64, CMatrix)>);

impl Recorder for Keep {
    fn record(&mut self, t: f64, rho: &CMatrix) -> Result<()> {
        self.0.push((t, rho.clone()));
        Ok(())
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn flags(field: bool, vib: bool, auger: bool) -> Flags {
    Flags { field, vib, auger }
}
