//! Spin-resolved observables, triplet-yield curves and absorption spectra.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PulseTrain;
use crate::linalg::CMatrix;
use crate::propagator::{boltzmann_populations, Trajectory};
use crate::structure::{ElectronicStructure, SocBasis, StateClass};
use crate::units::{au_to_fs, fs_to_au, hartree_to_ev};

/// 2S of a quintet and of a triplet.
pub const TWICE_S_QUINTET: u32 = 4;
pub const TWICE_S_TRIPLET: u32 = 2;
/// SF levels within this of the lowest H_CI diagonal (Hartree) form the
/// ground manifold.
pub const GROUND_TOLERANCE_HA: f64 = 1e-8;

/// ρ^(SF)_nn = Σ_ab C_an C*_bn ρ_ab for every SF state n.
pub fn sf_populations(rho: &CMatrix, soc: &SocBasis) -> Result<Vec<f64>> {
    let n = soc.n_states();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::Dimension {
            what: "density matrix".into(),
            got: rho.nrows(),
            expected: n,
        });
    }
    let v = soc.vectors();
    let w = v * rho;
    let scale = rho.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut z = crate::linalg::ZERO;
        for b in 0..n {
            z += w[(k, b)] * v[(k, b)].conj();
        }
        if z.im.abs() > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "SF population {k} has imaginary part {}; density matrix is not Hermitian",
                z.im
            )));
        }
        out.push(z.re);
    }
    Ok(out)
}

/// Population sums over spin × class groups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GroupedPopulations {
    pub q_tot: f64,
    pub t_tot: f64,
    pub q_val: f64,
    pub t_val: f64,
    pub q_core: f64,
    pub t_core: f64,
    pub ground: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    QVal,
    QCore,
    TVal,
    TCore,
    Other,
}

/// Group membership of every SF state.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    groups: Vec<Group>,
    ground: Vec<bool>,
}

impl GroupSpec {
    pub fn from_structure(es: &ElectronicStructure) -> Self {
        let groups = es
            .labels()
            .iter()
            .map(|l| match (l.spin.twice_s(), l.class) {
                (TWICE_S_QUINTET, StateClass::Valence) => Group::QVal,
                (TWICE_S_QUINTET, StateClass::Core) => Group::QCore,
                (TWICE_S_TRIPLET, StateClass::Valence) => Group::TVal,
                (TWICE_S_TRIPLET, StateClass::Core) => Group::TCore,
                _ => Group::Other,
            })
            .collect();
        let diag: Vec<f64> = (0..es.n_states()).map(|k| es.h_ci()[(k, k)]).collect();
        let e0 = diag.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            groups,
            ground: diag.iter().map(|&e| e - e0 <= GROUND_TOLERANCE_HA).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.groups.len()
    }

    pub fn sums(&self, sf_pops: &[f64]) -> GroupedPopulations {
        let mut g = GroupedPopulations::default();
        for (k, &p) in sf_pops.iter().enumerate() {
            match self.groups[k] {
                Group::QVal => g.q_val += p,
                Group::QCore => g.q_core += p,
                Group::TVal => g.t_val += p,
                Group::TCore => g.t_core += p,
                Group::Other => {}
            }
            if self.ground[k] {
                g.ground += p;
            }
        }
        g.q_tot = g.q_val + g.q_core;
        g.t_tot = g.t_val + g.t_core;
        g
    }

    pub fn evaluate(&self, rho: &CMatrix, soc: &SocBasis) -> Result<GroupedPopulations> {
        Ok(self.sums(&sf_populations(rho, soc)?))
    }
}

/// Grouped populations at every recorded time, from recorded sums or
/// from snapshots.
pub fn group_populations(traj: &Trajectory, soc: &SocBasis, spec: &GroupSpec) -> Result<Vec<(f64, GroupedPopulations)>> {
    if !traj.records.is_empty() && traj.records.iter().all(|r| r.groups.is_some()) {
        return Ok(traj.records.iter().map(|r| (r.t_fs, r.groups.unwrap())).collect());
    }
    if !traj.snapshots.is_empty() {
        return traj
            .snapshots
            .iter()
            .map(|s| Ok((s.t_fs, spec.evaluate(&s.rho, soc)?)))
            .collect();
    }
    Err(Error::MissingData(
        "trajectory has neither grouped populations nor density-matrix snapshots".into(),
    ))
}

/// √(Σ_{a≠b} |ρ_ab|²).
pub fn coherence_norm(rho: &CMatrix) -> f64 {
    let n = rho.nrows();
    let mut s = 0.0;
    for b in 0..n {
        for a in 0..n {
            if a != b {
                s += rho[(a, b)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Where the yield ratio is sampled.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YieldSample {
    /// Subpulse index (1-based); 0 for first-pulse fractions.
    pub pulse: usize,
    /// Fraction of I₁ for first-pulse splits, 1 otherwise.
    pub fraction: f64,
    pub t_fs: f64,
    pub intensity: f64,
}

/// Sampling instants: each inter-pulse midpoint (the I_i upper limit), and
/// for the last pulse half a spacing after it (6σ for a single pulse).
/// `first_pulse_fractions` add points where the running intensity reaches
/// that fraction of I₁.
pub fn yield_samples(train: &PulseTrain, first_pulse_fractions: &[f64]) -> Result<Vec<YieldSample>> {
    let i1 = train.integrated_intensity(1)?;
    let mut out = Vec::new();
    let mut fractions = first_pulse_fractions.to_vec();
    fractions.sort_by(f64::total_cmp);
    for &f in &fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!("first-pulse fraction {f} must lie in (0, 1)")));
        }
        let t = intensity_crossing(train, f * i1);
        out.push(YieldSample {
            pulse: 0,
            fraction: f,
            t_fs: au_to_fs(t),
            intensity: train.integrated_intensity_until(t),
        });
    }
    let n = train.n_pulses();
    for i in 1..=n {
        let t = match train.midpoint_after(i) {
            Some(m) => m,
            None if n >= 2 => train.centers[n - 1] + 0.5 * (train.centers[n - 1] - train.centers[n - 2]),
            None => train.centers[0] + 6.0 * train.sigma,
        };
        out.push(YieldSample {
            pulse: i,
            fraction: 1.0,
            t_fs: au_to_fs(t),
            intensity: train.integrated_intensity(i)?,
        });
    }
    Ok(out)
}

/// Time at which ∫Ẽ² reaches `target` (bisection, below the first midpoint).
fn intensity_crossing(train: &PulseTrain, target: f64) -> f64 {
    let mut lo = train.centers[0] - 40.0 * train.sigma;
    let mut hi = train.midpoint_after(1).unwrap_or(train.centers[0] + 40.0 * train.sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if train.integrated_intensity_until(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YieldPoint {
    pub pulse: usize,
    pub fraction: f64,
    pub t_fs: f64,
    pub intensity: f64,
    /// T_tot/Q_tot; `None` when Q_tot < 1e-15 or the time is not covered.
    pub ratio: Option<f64>,
}

/// Pair each sample's I with T_tot/Q_tot interpolated linearly in the
/// grouped series.
pub fn yield_curve(series: &[(f64, GroupedPopulations)], samples: &[YieldSample]) -> Vec<YieldPoint> {
    samples
        .iter()
        .map(|s| {
            let ratio = interpolate(series, s.t_fs).and_then(|g| (g.q_tot >= 1e-15).then(|| g.t_tot / g.q_tot));
            YieldPoint {
                pulse: s.pulse,
                fraction: s.fraction,
                t_fs: s.t_fs,
                intensity: s.intensity,
                ratio,
            }
        })
        .collect()
}

fn interpolate(series: &[(f64, GroupedPopulations)], t: f64) -> Option<GroupedPopulations> {
    let k = series.partition_point(|(ts, _)| *ts < t);
    let tol = 1e-9 * (1.0 + t.abs());
    if k < series.len() && (series[k].0 - t).abs() <= tol {
        return Some(series[k].1);
    }
    if k > 0 && (series[k - 1].0 - t).abs() <= tol {
        return Some(series[k - 1].1);
    }
    if k == 0 || k == series.len() {
        return None;
    }
    let (t0, a) = series[k - 1];
    let (t1, b) = series[k];
    let w = (t - t0) / (t1 - t0);
    let mix = |x: f64, y: f64| x + w * (y - x);
    Some(GroupedPopulations {
        q_tot: mix(a.q_tot, b.q_tot),
        t_tot: mix(a.t_tot, b.t_tot),
        q_val: mix(a.q_val, b.q_val),
        t_val: mix(a.t_val, b.t_val),
        q_core: mix(a.q_core, b.q_core),
        t_core: mix(a.t_core, b.t_core),
        ground: mix(a.ground, b.ground),
    })
}

/// Sample instants in atomic units, for adding to the output grid.
pub fn sample_times_au(samples: &[YieldSample]) -> Vec<f64> {
    samples.iter().map(|s| fs_to_au(s.t_fs)).collect()
}

/// One absorption line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stick {
    pub initial: usize,
    pub final_state: usize,
    pub energy_ev: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub energies_ev: Vec<f64>,
    pub intensity_norm: Vec<f64>,
    pub intensity_raw: Vec<f64>,
    pub peak_raw: f64,
    pub sticks: Vec<Stick>,
}

/// Initial states with Boltzmann weight below this are skipped.
const MIN_INITIAL_WEIGHT: f64 = 1e-12;

/// Thermally averaged stick spectrum Σ_xyz |⟨a|d|g⟩|² ω_ag p_g broadened by a
/// unit-area Lorentzian of the given FWHM. `dipoles_soc` are the three
/// Cartesian dipole matrices in the SOC basis.
pub fn absorption_spectrum(
    soc: &SocBasis,
    dipoles_soc: &[CMatrix; 3],
    temperature_k: f64,
    fwhm_ev: f64,
    grid_ev: &[f64],
) -> Result<Spectrum> {
    if grid_ev.is_empty() {
        return Err(Error::invalid("spectrum grid is empty"));
    }
    if grid_ev.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("spectrum grid must be strictly ascending"));
    }
    if !(fwhm_ev > 0.0) {
        return Err(Error::invalid(format!("Lorentzian FWHM {fwhm_ev} eV must be positive")));
    }
    let n = soc.n_states();
    if let Some(d) = dipoles_soc.iter().find(|d| d.nrows() != n || d.ncols() != n) {
        return Err(Error::Dimension {
            what: "dipole matrix".into(),
            got: d.nrows(),
            expected: n,
        });
    }
    let e = soc.energies();
    let p = boltzmann_populations(e, temperature_k)?;
    let mut sticks = Vec::new();
    for g in (0..n).filter(|&g| p[g] > MIN_INITIAL_WEIGHT) {
        for a in 0..n {
            let w_ev = hartree_to_ev(e[a] - e[g]);
            if w_ev <= 0.0 {
                continue;
            }
            let d2: f64 = dipoles_soc.iter().map(|d| d[(a, g)].norm_sqr()).sum();
            if d2 == 0.0 {
                continue;
            }
            sticks.push(Stick {
                initial: g,
                final_state: a,
                energy_ev: w_ev,
                weight: d2 * w_ev * p[g],
            });
        }
    }
    let half = 0.5 * fwhm_ev;
    let raw: Vec<f64> = grid_ev
        .iter()
        .map(|&x| {
            sticks
                .iter()
                .map(|s| s.weight * half / std::f64::consts::PI / ((x - s.energy_ev).powi(2) + half * half))
                .sum()
        })
        .collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    let norm = raw.iter().map(|&v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
    Ok(Spectrum {
        energies_ev: grid_ev.to_vec(),
        intensity_norm: norm,
        intensity_raw: raw,
        peak_raw: peak,
        sticks,
    })
}

/// Local maxima of the raw spectrum, highest first.
pub fn spectrum_peaks(spec: &Spectrum) -> Vec<(f64, f64)> {
    let r = &spec.intensity_raw;
    let mut peaks: Vec<(f64, f64)> = (1..r.len().saturating_sub(1))
        .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
        .map(|i| (spec.energies_ev[i], r[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitize, RMatrix, C64};
    use crate::structure::{diagonalize_soc, Edge, SfLabel, SpinLabel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label(twice_s: u32, twice_ms: i32, class: StateClass) -> SfLabel {
        SfLabel {
            spin: SpinLabel::new(twice_s, twice_ms).unwrap(),
            class,
            edge: Edge::None,
        }
    }

    /// Quintet/triplet model with random SOC within the selection rules.
    fn mixed_model(seed: u64) -> (ElectronicStructure, SocBasis) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = vec![
            label(4, 0, StateClass::Valence),
            label(4, 2, StateClass::Valence),
            label(2, 0, StateClass::Valence),
            label(4, 0, StateClass::Core),
            label(2, 0, StateClass::Core),
            label(2, -2, StateClass::Core),
        ];
        let n = labels.len();
        let energies = [0.0, 0.0, 0.05, 0.6, 0.62, 0.64];
        let mut v = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
                if (labels[i].spin.twice_ms() - labels[j].spin.twice_ms()).abs() > 2 {
                    continue;
                }
                v[(i, j)] = z;
                v[(j, i)] = z.conj();
            }
        }
        let zero = RMatrix::zeros(n, n);
        let es = ElectronicStructure::from_energies(&energies, v, [zero.clone(), zero.clone(), zero], labels).unwrap();
        let soc = diagonalize_soc(&es).unwrap();
        (es, soc)
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        hermitize(&mut rho);
        rho
    }

    #[test]
    fn identity_basis_gives_diagonal() {
        let labels = vec![label(4, 0, StateClass::Valence), label(2, 0, StateClass::Core)];
        let zero = RMatrix::zeros(2, 2);
        let es = ElectronicStructure::from_energies(&[0.0, 1.0], CMatrix::zeros(2, 2), [zero.clone(), zero.clone(), zero], labels).unwrap();
        let soc = diagonalize_soc(&es).unwrap();
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = C64::new(0.3, 0.0);
        rho[(1, 1)] = C64::new(0.7, 0.0);
        rho[(0, 1)] = C64::new(0.1, 0.2);
        rho[(1, 0)] = C64::new(0.1, -0.2);
        assert_eq!(sf_populations(&rho, &soc).unwrap(), vec![0.3, 0.7]);
        let g = GroupSpec::from_structure(&es).sums(&[0.3, 0.7]);
        assert_eq!((g.q_val, g.t_core, g.ground), (0.3, 0.7, 0.3));
    }

    #[test]
    fn pure_soc_state_distributes_over_sf_states() {
        let (_, soc) = mixed_model(4);
        let n = soc.n_states();
        let a = 3;
        let mut rho = CMatrix::zeros(n, n);
        rho[(a, a)] = C64::new(1.0, 0.0);
        let p = sf_populations(&rho, &soc).unwrap();
        for (k, pk) in p.iter().enumerate() {
            assert!((pk - soc.coefficient(a, k).norm_sqr()).abs() < 1e-14);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_ground_population() {
        // ground quintet manifold (5 M_S levels) plus excited quintets
        let labels: Vec<SfLabel> = (0..7)
            .map(|k| label(4, [-4, -2, 0, 2, 4, 0, 0][k], StateClass::Valence))
            .collect();
        let gaps = [0.0, 0.0, 0.0, 0.0, 0.0, 0.004, 0.006];
        let zero = RMatrix::zeros(7, 7);
        let es = ElectronicStructure::from_energies(&gaps, CMatrix::zeros(7, 7), [zero.clone(), zero.clone(), zero], labels).unwrap();
        let soc = diagonalize_soc(&es).unwrap();
        let rho = crate::propagator::initial_density(soc.energies(), 300.0).unwrap();
        let g = GroupSpec::from_structure(&es).evaluate(rho.matrix(), &soc).unwrap();
        let kt = crate::units::kt_hartree(300.0);
        let z = 5.0 + (-0.004 / kt).exp() + (-0.006 / kt).exp();
        assert!((g.ground - 5.0 / z).abs() < 1e-12);
        assert_eq!(g.t_tot, 0.0);
    }

    #[test]
    fn coherence_norm_values() {
        let mut rho = CMatrix::identity(3, 3) * C64::new(1.0 / 3.0, 0.0);
        assert_eq!(coherence_norm(&rho), 0.0);
        rho = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        assert!((coherence_norm(&rho) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spectrum_of_two_level_system() {
        let labels = vec![label(4, 0, StateClass::Valence), label(4, 0, StateClass::Core)];
        let zero = RMatrix::zeros(2, 2);
        let dz = RMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let gap = crate::units::ev_to_hartree(708.0);
        let es = ElectronicStructure::from_energies(&[0.0, gap], CMatrix::zeros(2, 2), [zero.clone(), zero.clone(), dz.clone()], labels).unwrap();
        let soc = diagonalize_soc(&es).unwrap();
        let d = [CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), crate::linalg::to_complex(&dz)];
        let grid: Vec<f64> = (0..=2000).map(|k| 700.0 + 0.008 * k as f64).collect();
        let s = absorption_spectrum(&soc, &d, 0.0, 0.5, &grid).unwrap();
        assert_eq!(s.sticks.len(), 1);
        let peaks = spectrum_peaks(&s);
        assert!((peaks[0].0 - 708.0).abs() < 1e-9);
        assert!((s.intensity_norm.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
        // trapezoid integral vs stick weight times captured Lorentzian mass
        let integral: f64 = grid.windows(2).zip(s.intensity_raw.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
        let half = 0.25;
        let mass = ((grid[2000] - 708.0) / half).atan() - ((grid[0] - 708.0) / half).atan();
        let expect = s.sticks[0].weight * mass / std::f64::consts::PI;
        assert!(((integral - expect) / expect).abs() < 1e-6);

        let none = [CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)];
        let s = absorption_spectrum(&soc, &none, 0.0, 0.5, &grid).unwrap();
        assert!(s.intensity_raw.iter().all(|&v| v == 0.0));
        assert!(absorption_spectrum(&soc, &none, 0.0, 0.5, &[]).is_err());
    }

    #[test]
    fn yield_samples_sit_at_midpoints() {
        let train = crate::field::make_train(800.0, 3, crate::field::SigmaFraction::Fourteenth, 0.25, 708.4, [0.0, 0.0, 1.0], 1.0).unwrap();
        let s = yield_samples(&train, &[0.25, 0.5]).unwrap();
        assert_eq!(s.len(), 5);
        let i1 = train.integrated_intensity(1).unwrap();
        assert!((s[0].intensity / i1 - 0.25).abs() < 1e-9);
        assert!((s[1].intensity / i1 - 0.5).abs() < 1e-9);
        // half the intensity of an isolated pulse is reached at its center
        assert!((s[1].t_fs - 1.0).abs() < 1e-6);
        assert!((fs_to_au(s[2].t_fs) - train.midpoint_after(1).unwrap()).abs() < 1e-9);
        for w in s.windows(2) {
            assert!(w[1].intensity > w[0].intensity && w[1].t_fs > w[0].t_fs);
        }
        assert!(yield_samples(&train, &[1.5]).is_err());
    }

    #[test]
    fn yield_curve_ratio_and_missing_points() {
        let g = |q: f64, t: f64| GroupedPopulations { q_tot: q, t_tot: t, ..Default::default() };
        let series = vec![(0.0, g(1.0, 0.0)), (1.0, g(0.5, 0.5)), (2.0, g(0.0, 1.0))];
        let samples: Vec<YieldSample> = [0.5, 1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| YieldSample { pulse: i + 1, fraction: 1.0, t_fs: t, intensity: i as f64 })
            .collect();
        let y = yield_curve(&series, &samples);
        assert!((y[0].ratio.unwrap() - 0.25 / 0.75).abs() < 1e-15);
        assert_eq!(y[1].ratio, Some(1.0));
        assert_eq!(y[2].ratio, None);
        assert_eq!(y[3].ratio, None);
    }

    proptest! {
        #[test]
        fn sf_populations_conserve_trace(seed in any::<u64>()) {
            let (es, soc) = mixed_model(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            let rho = random_density(soc.n_states(), &mut rng);
            let p = sf_populations(&rho, &soc).unwrap();
            let tr: f64 = (0..soc.n_states()).map(|a| rho[(a, a)].re).sum();
            prop_assert!((p.iter().sum::<f64>() - tr).abs() < 1e-12);
            let g = GroupSpec::from_structure(&es).sums(&p);
            prop_assert!((g.q_tot - g.q_val - g.q_core).abs() < 1e-12);
            prop_assert!((g.t_tot - g.t_val - g.t_core).abs() < 1e-12);
            prop_assert!((g.q_tot + g.t_tot - tr).abs() < 1e-10);
        }

        #[test]
        fn sf_populations_gauge_invariant(seed in any::<u64>(), phase in 0.0f64..6.283, col in 0usize..6) {
            let (_, soc) = mixed_model(seed);
            let n = soc.n_states();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let rho = random_density(n, &mut rng);
            let base = sf_populations(&rho, &soc).unwrap();
            // a phase on eigenvector column c is a unitary change of SOC basis
            let u = C64::from_polar(1.0, phase);
            let rotated_rho = CMatrix::from_fn(n, n, |a, b| {
                let fa = if a == col { u.conj() } else { C64::new(1.0, 0.0) };
                let fb = if b == col { u } else { C64::new(1.0, 0.0) };
                rho[(a, b)] * fa * fb
            });
            let rotated = soc.with_column_phase(col, u);
            let p = sf_populations(&rotated_rho, &rotated).unwrap();
            for (x, y) in base.iter().zip(&p) {
                prop_assert!((x - y).abs() < 1e-13);
            }
        }
    }
}
