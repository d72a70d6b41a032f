//! Seeded synthetic models: structure file, bath file and a starter run
//! configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{absorption_spectrum, spectrum_peaks};
use crate::config::{AugerConfig, OutputConfig, RunConfig, TrainConfig};
use crate::dissipation::{write_bath, LifetimeConvention, RateOptions, VibrationalBath};
use crate::error::{Error, Result};
use crate::field::SigmaFraction;
use crate::linalg::{CMatrix, RMatrix, C64};
use crate::propagator::{Flags, IntegratorConfig};
use crate::structure::{
    diagonalize_soc, to_soc_operator, write_structure, Edge, ElectronicStructure, SfLabel, SpinLabel, StateClass,
};
use crate::units::{ev_to_hartree, hartree_to_ev};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    TwoLevel,
    NLadder,
    SocToy,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-level" => Ok(ModelKind::TwoLevel),
            "n-ladder" => Ok(ModelKind::NLadder),
            "soc-toy" => Ok(ModelKind::SocToy),
            _ => Err(Error::invalid(format!(
                "unknown model kind '{s}' (expected two-level, n-ladder or soc-toy)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::TwoLevel => "two-level",
            ModelKind::NLadder => "n-ladder",
            ModelKind::SocToy => "soc-toy",
        })
    }
}

/// `key=value` overrides; every key must be consumed by the generator.
#[derive(Clone, Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<Vec<String>>,
}

impl Params {
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for item in items {
            let item = item.as_ref();
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("parameter '{item}' is not key=value")))?;
            if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::invalid(format!("parameter '{k}' given twice")));
            }
        }
        Ok(Self {
            values,
            used: Default::default(),
        })
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.used.borrow_mut().push(key.to_string());
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid(format!("parameter {key}: cannot parse '{v}'"))),
        }
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(k)) {
            Some(k) => Err(Error::invalid(format!("unknown parameter '{k}' (known: {})", used.join(", ")))),
            None => Ok(()),
        }
    }
}

/// A generated model and the run configuration that goes with it.
#[derive(Clone, Debug)]
pub struct Generated {
    pub structure: ElectronicStructure,
    pub bath: VibrationalBath,
    pub run: RunConfig,
}

pub const STRUCTURE_FILE: &str = "model.es";
pub const BATH_FILE: &str = "model.bath";
pub const RUN_FILE: &str = "run.json";

pub fn generate(kind: ModelKind, params: &Params, seed: u64) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = match kind {
        ModelKind::TwoLevel => two_level(params)?,
        ModelKind::NLadder => n_ladder(params, &mut rng)?,
        ModelKind::SocToy => soc_toy(params, &mut rng)?,
    };
    params.finish()?;
    g.run.seed = Some(seed);
    Ok(g)
}

/// Write `model.es`, `model.bath` and `run.json` into `dir`.
pub fn write_model(dir: &Path, g: &Generated) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (STRUCTURE_FILE, write_structure(&g.structure)),
        (BATH_FILE, write_bath(&g.bath)),
        (
            RUN_FILE,
            serde_json::to_string_pretty(&g.run).map_err(|source| Error::Json {
                context: "run config".into(),
                source,
            })? + "\n",
        ),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("parameter {key} must be positive, got {v}")))
    }
}

fn label(twice_s: u32, twice_ms: i32, class: StateClass, edge: Edge) -> SfLabel {
    SfLabel {
        spin: SpinLabel::new(twice_s, twice_ms).expect("generated spin labels are valid"),
        class,
        edge,
    }
}

fn zero_dipoles(n: usize) -> [RMatrix; 3] {
    [RMatrix::zeros(n, n), RMatrix::zeros(n, n), RMatrix::zeros(n, n)]
}

fn base_run(train: TrainConfig, flags: Flags, integrator: IntegratorConfig) -> RunConfig {
    RunConfig {
        structure_path: STRUCTURE_FILE.into(),
        bath_path: Some(BATH_FILE.into()),
        train,
        t_start_fs: 0.0,
        t_end_fs: None,
        temperature_k: 300.0,
        flags,
        lifetime_convention: LifetimeConvention::default(),
        auger: AugerConfig::default(),
        rates: RateOptions::default(),
        integrator,
        initial_state: Default::default(),
        output: OutputConfig {
            dir: "out".into(),
            ..Default::default()
        },
        seed: None,
    }
}

/// Ground state and one excited state, dipole along z.
fn two_level(p: &Params) -> Result<Generated> {
    let gap = positive("gap_ev", p.get("gap_ev", 1.0)?)?;
    let d = p.get("dipole_au", 1.0)?;
    let coupling = p.get("coupling", 0.0)?;
    let mut dip = zero_dipoles(2);
    dip[2][(0, 1)] = d;
    dip[2][(1, 0)] = d;
    let labels = vec![
        label(4, 0, StateClass::Valence, Edge::None),
        label(4, 0, StateClass::Core, Edge::L3),
    ];
    let structure = ElectronicStructure::from_energies(&[0.0, ev_to_hartree(gap)], CMatrix::zeros(2, 2), dip, labels)?;
    let bath = VibrationalBath::new(vec![417.0], RMatrix::from_row_slice(2, 1, &[0.0, coupling]), 500.0, 300.0)?;
    let train = TrainConfig {
        lambda_nm: 800.0,
        n_pulses: 1,
        sigma_fraction: SigmaFraction::Fourteenth,
        e0_au: 0.01,
        omega_ev: gap,
        polarization: [0.0, 0.0, 1.0],
        t_first_fs: None,
    };
    let flags = Flags {
        field: true,
        vib: false,
        auger: false,
    };
    Ok(Generated {
        structure,
        bath,
        run: base_run(train, flags, IntegratorConfig::default()),
    })
}

/// Equally spaced valence quintet levels with nearest-neighbour z dipoles,
/// displacements growing with the level index and a weak dense SOC block
/// that mixes the levels (without mixing the bath couples nothing).
fn n_ladder(p: &Params, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let n: usize = p.get("n", 10)?;
    if n < 2 {
        return Err(Error::invalid("n-ladder needs n >= 2"));
    }
    let spacing = positive("spacing_ev", p.get("spacing_ev", 0.02)?)?;
    let d = p.get("dipole_au", 0.1)?;
    let coupling = p.get("coupling", 0.5)?;
    let soc_ev = p.get("soc_ev", 0.005)?;
    if !(soc_ev >= 0.0) {
        return Err(Error::invalid("soc_ev must be non-negative"));
    }
    let energies: Vec<f64> = (0..n).map(|k| ev_to_hartree(spacing * k as f64)).collect();
    let mut dip = zero_dipoles(n);
    for k in 0..n - 1 {
        dip[2][(k, k + 1)] = d;
        dip[2][(k + 1, k)] = d;
    }
    let labels = vec![label(4, 0, StateClass::Valence, Edge::None); n];
    let mut v = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            v[(a, b)] = z;
            v[(b, a)] = z.conj();
        }
    }
    let norm = spectral_norm(&v);
    if norm > 0.0 {
        v *= C64::new(ev_to_hartree(soc_ev) / norm, 0.0);
    }
    let structure = ElectronicStructure::from_energies(&energies, v, dip, labels)?;
    let freqs = vec![228.0, 417.0];
    let g = RMatrix::from_fn(n, 2, |k, _| coupling * k as f64 * rng.gen_range(0.8..1.2));
    let bath = VibrationalBath::new(freqs, g, 500.0, 300.0)?;
    let train = TrainConfig {
        lambda_nm: 800.0,
        n_pulses: 4,
        sigma_fraction: SigmaFraction::Fourteenth,
        e0_au: 0.05,
        omega_ev: spacing,
        polarization: [0.0, 0.0, 1.0],
        t_first_fs: None,
    };
    let flags = Flags {
        field: true,
        vib: true,
        auger: false,
    };
    Ok(Generated {
        structure,
        bath,
        run: base_run(train, flags, IntegratorConfig::default()),
    })
}

/// A spatial multiplet: all 2S+1 components share energy, dipoles and
/// vibrational displacements.
struct Multiplet {
    twice_s: u32,
    class: StateClass,
    energy_ev: f64,
}

/// Quintet/triplet valence and core manifolds coupled by a dense random SOC
/// block, with spin-conserving valence-core dipoles.
fn soc_toy(p: &Params, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let n_val_q: usize = p.get("n_val_q", 1)?;
    let n_val_t: usize = p.get("n_val_t", 2)?;
    let n_core_q: usize = p.get("n_core_q", 1)?;
    let n_core_t: usize = p.get("n_core_t", 3)?;
    let val_q_spacing = p.get("val_q_spacing_ev", 0.05)?;
    let val_t_ev = p.get("val_t_ev", 2.0)?;
    let val_t_spacing = p.get("val_t_spacing_ev", 0.1)?;
    let core_ev = positive("core_ev", p.get("core_ev", 708.0)?)?;
    let core_spread = p.get("core_spread_ev", 4.0)?;
    let soc_ev = p.get("soc_ev", 8.5)?;
    let soc_val_ev = p.get("soc_val_ev", 0.01)?;
    let dipole = p.get("dipole_au", 0.03)?;
    let g_low = p.get("coupling_low", 1.0)?;
    let g_high = p.get("coupling_high", 0.05)?;
    let gamma_cm1 = positive("gamma_cm1", p.get("gamma_cm1", 500.0)?)?;
    let temperature = p.get("temperature_k", 300.0)?;
    if n_val_q == 0 || n_core_q == 0 {
        return Err(Error::invalid("soc-toy needs at least one valence and one core quintet"));
    }
    if !(soc_ev >= 0.0) || !(soc_val_ev >= 0.0) || !(core_spread >= 0.0) {
        return Err(Error::invalid("SOC scales and the core spread must be non-negative"));
    }
    if val_t_ev <= 0.0 || val_t_ev >= core_ev {
        return Err(Error::invalid("valence triplets must lie between the ground state and the core band"));
    }

    let mut multiplets = Vec::new();
    for k in 0..n_val_q {
        multiplets.push(Multiplet {
            twice_s: 4,
            class: StateClass::Valence,
            energy_ev: val_q_spacing * k as f64,
        });
    }
    for k in 0..n_val_t {
        multiplets.push(Multiplet {
            twice_s: 2,
            class: StateClass::Valence,
            energy_ev: val_t_ev + val_t_spacing * k as f64,
        });
    }
    for (count, twice_s) in [(n_core_q, 4), (n_core_t, 2)] {
        let mut e: Vec<f64> = (0..count).map(|_| core_ev + core_spread * rng.gen::<f64>()).collect();
        e.sort_by(f64::total_cmp);
        multiplets.extend(e.into_iter().map(|energy_ev| Multiplet {
            twice_s,
            class: StateClass::Core,
            energy_ev,
        }));
    }

    // expand multiplets into M_S components
    let mut owner = Vec::new();
    let mut labels = Vec::new();
    let mut energies = Vec::new();
    let core_mid = core_ev + 0.5 * core_spread;
    for (k, m) in multiplets.iter().enumerate() {
        let edge = match m.class {
            StateClass::Valence => Edge::None,
            StateClass::Core if m.energy_ev < core_mid => Edge::L3,
            StateClass::Core => Edge::L2,
        };
        for twice_ms in (-(m.twice_s as i32)..=m.twice_s as i32).step_by(2) {
            owner.push(k);
            labels.push(label(m.twice_s, twice_ms, m.class, edge));
            energies.push(ev_to_hartree(m.energy_ev));
        }
    }
    let n = labels.len();

    let mut v = CMatrix::zeros(n, n);
    for class in [StateClass::Valence, StateClass::Core] {
        let idx: Vec<usize> = (0..n).filter(|&i| labels[i].class == class).collect();
        let mut block = CMatrix::zeros(idx.len(), idx.len());
        for (i, &a) in idx.iter().enumerate() {
            for (j, &b) in idx.iter().enumerate().skip(i) {
                let (sa, sb) = (labels[a].spin, labels[b].spin);
                let allowed = (sa.twice_s() as i32 - sb.twice_s() as i32).abs() <= 2
                    && (sa.twice_ms() - sb.twice_ms()).abs() <= 2;
                if !allowed {
                    continue;
                }
                let z = if i == j {
                    C64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                block[(i, j)] = z;
                block[(j, i)] = z.conj();
            }
        }
        let target = match class {
            StateClass::Valence => soc_val_ev,
            StateClass::Core => soc_ev,
        };
        let norm = spectral_norm(&block);
        if norm > 0.0 {
            block *= C64::new(ev_to_hartree(target) / norm, 0.0);
        }
        for (i, &a) in idx.iter().enumerate() {
            for (j, &b) in idx.iter().enumerate() {
                v[(a, b)] = block[(i, j)];
            }
        }
    }

    // spatial dipoles between valence and core multiplets of equal spin
    let n_mult = multiplets.len();
    let mut spatial = vec![[0.0f64; 3]; n_mult * n_mult];
    for a in 0..n_mult {
        for b in a + 1..n_mult {
            let (ma, mb) = (&multiplets[a], &multiplets[b]);
            if ma.twice_s == mb.twice_s && ma.class != mb.class {
                let d = [0; 3].map(|_| dipole * rng.gen_range(-1.0..1.0));
                spatial[a * n_mult + b] = d;
                spatial[b * n_mult + a] = d;
            }
        }
    }
    let mut dip = zero_dipoles(n);
    for a in 0..n {
        for b in 0..n {
            if labels[a].spin == labels[b].spin {
                let d = spatial[owner[a] * n_mult + owner[b]];
                for x in 0..3 {
                    dip[x][(a, b)] = d[x];
                }
            }
        }
    }

    // shifts relative to the ground multiplet, shared by its components
    let freqs = vec![228.0, 417.0, 3640.0, 3645.0];
    let shifts: Vec<[f64; 4]> = (0..n_mult)
        .map(|k| {
            if k == 0 {
                [0.0; 4]
            } else {
                [
                    g_low * rng.gen_range(0.5..1.5),
                    g_low * rng.gen_range(0.5..1.5),
                    g_high * rng.gen_range(0.5..1.5),
                    g_high * rng.gen_range(0.5..1.5),
                ]
            }
        })
        .collect();
    let g = RMatrix::from_fn(n, 4, |a, x| shifts[owner[a]][x]);

    let structure = ElectronicStructure::from_energies(&energies, v, dip, labels)?;
    let bath = VibrationalBath::new(freqs, g, gamma_cm1, temperature)?;
    let omega_ev = l3_carrier(&structure, temperature, core_ev, core_spread, soc_ev)?;
    let train = TrainConfig {
        lambda_nm: 800.0,
        n_pulses: 10,
        sigma_fraction: SigmaFraction::Fourteenth,
        e0_au: 0.25,
        omega_ev,
        polarization: [0.0, 0.0, 1.0],
        t_first_fs: None,
    };
    let integrator = IntegratorConfig {
        h_max: 0.2,
        ..IntegratorConfig::default()
    };
    let mut run = base_run(train, Flags::default(), integrator);
    run.temperature_k = temperature;
    Ok(Generated { structure, bath, run })
}

fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigenvalues().iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

/// Carrier energy at the lowest absorption maximum (z polarization) that
/// reaches 30% of the tallest one, i.e. the L3 side of the band.
fn l3_carrier(es: &ElectronicStructure, temperature: f64, core_ev: f64, spread: f64, soc_ev: f64) -> Result<f64> {
    let soc = diagonalize_soc(es)?;
    let dipoles = es.dipoles().clone().map(|d| {
        to_soc_operator(&soc, &d.map(|x| C64::new(x, 0.0))).expect("dimensions match")
    });
    let zonly = [CMatrix::zeros(soc.n_states(), soc.n_states()), CMatrix::zeros(soc.n_states(), soc.n_states()), dipoles[2].clone()];
    let lo = core_ev - soc_ev - 5.0;
    let hi = core_ev + spread + soc_ev + 5.0;
    let grid: Vec<f64> = (0..=4000).map(|k| lo + (hi - lo) * k as f64 / 4000.0).collect();
    let spec = absorption_spectrum(&soc, &zonly, temperature, 0.5, &grid)?;
    let peaks = spectrum_peaks(&spec);
    let tallest = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
    let best = peaks
        .iter()
        .filter(|p| p.1 >= 0.3 * tallest)
        .map(|p| p.0)
        .reduce(f64::min)
        .unwrap_or_else(|| hartree_to_ev(es.sf_energies()[es.n_states() - 1]));
    // rounded so the starter config reads cleanly
    Ok((best * 100.0).round() / 100.0)
}
