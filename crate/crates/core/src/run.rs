//! End-to-end orchestration: load → diagonalize → rates → propagate →
//! analyze → write, plus sweeps and the auxiliary CSV emitters.

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{
    absorption_spectrum, group_populations, sample_times_au, spectrum_peaks, yield_curve, yield_samples, GroupSpec,
    GroupedPopulations, Spectrum, YieldPoint,
};
use crate::config::{InitialState, RunConfig};
use crate::dissipation::{
    build_auger, build_bloch, compute_rates, load_bath, rate_histogram, DissipationModel, RateMatrix, VibrationalBath,
};
use crate::error::{Error, Result};
use crate::field::{Field, NoField, PulseTrain};
use crate::linalg::{CMatrix, C64};
use crate::propagator::{
    initial_density, output_times, propagate, write_snapshots, DensityMatrix, ObservableRecorder, QmeSystem,
    StepStats, Trajectory,
};
use crate::structure::{assign_auger_widths, diagonalize_soc, load_structure, to_soc_operator, ElectronicStructure, SocBasis};
use crate::textfmt::fmt17;
use crate::units::{au_to_fs, constants_table, fs_to_au, hartree_to_ev};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const YIELD_FILE: &str = "yield.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const META_FILE: &str = "meta.json";
pub const SNAPSHOT_FILE: &str = "snapshots.bin";
pub const ERROR_FILE: &str = "error.txt";

const OUTPUT_FILES: [&str; 7] = [
    TRAJECTORY_FILE,
    OBSERVABLES_FILE,
    YIELD_FILE,
    STEPS_FILE,
    META_FILE,
    SNAPSHOT_FILE,
    ERROR_FILE,
];

pub const TRAJECTORY_HEADER: &str = "t_fs,trace,Q_tot,T_tot,Q_val,T_val,Q_core,T_core,ground_pop";

/// Everything derived from the input files before propagation.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub structure: ElectronicStructure,
    pub bath: Option<VibrationalBath>,
    /// SOC basis with Auger widths assigned.
    pub soc: SocBasis,
    pub rates: RateMatrix,
    pub dissipation: Arc<DissipationModel>,
    /// Cartesian dipoles in the SOC basis.
    pub dipoles_soc: [CMatrix; 3],
}

impl LoadedModel {
    /// Dipole contracted with a unit polarization vector.
    pub fn dipole_along(&self, e: [f64; 3]) -> CMatrix {
        let mut d = CMatrix::zeros(self.soc.n_states(), self.soc.n_states());
        for (x, m) in e.iter().zip(&self.dipoles_soc) {
            if *x != 0.0 {
                d += m * C64::new(*x, 0.0);
            }
        }
        d
    }
}

/// Load and build the model. Rates are computed only when `flags.vib` is
/// set (a bath is then required).
pub fn load_model(cfg: &RunConfig) -> Result<LoadedModel> {
    let structure = load_structure(&cfg.structure_path).map_err(|e| e.in_stage("load"))?;
    let bath = match &cfg.bath_path {
        Some(p) => Some(
            load_bath(p)
                .and_then(|b| b.with_temperature(cfg.temperature_k))
                .map_err(|e| e.in_stage("load"))?,
        ),
        None => None,
    };
    if let Some(b) = &bath {
        if b.n_states() != structure.n_states() {
            return Err(Error::Dimension {
                what: "bath coupling rows".into(),
                got: b.n_states(),
                expected: structure.n_states(),
            }
            .in_stage("load"));
        }
    }
    let soc = diagonalize_soc(&structure)
        .and_then(|s| assign_auger_widths(&s, cfg.auger.gamma_l3_ev, cfg.auger.gamma_l2_ev, cfg.auger.edge_rule))
        .map_err(|e| e.in_stage("diagonalize"))?;
    let dipoles_soc = structure
        .dipoles()
        .clone()
        .map(|d| to_soc_operator(&soc, &d.map(|x| C64::new(x, 0.0))));
    let [dx, dy, dz] = dipoles_soc;
    let dipoles_soc = [
        dx.map_err(|e| e.in_stage("diagonalize"))?,
        dy.map_err(|e| e.in_stage("diagonalize"))?,
        dz.map_err(|e| e.in_stage("diagonalize"))?,
    ];
    let (rates, dissipation) = (|| -> Result<(RateMatrix, DissipationModel)> {
        let rates = match (&bath, cfg.flags.vib) {
            (Some(b), true) => compute_rates(&soc, b, cfg.rates)?,
            _ => RateMatrix::empty(soc.n_states()),
        };
        let model = build_bloch(&soc, rates.clone())?.with_auger(build_auger(&soc, cfg.lifetime_convention)?)?;
        Ok((rates, model))
    })()
    .map_err(|e| e.in_stage("rates"))?;
    Ok(LoadedModel {
        structure,
        bath,
        soc,
        rates,
        dissipation: Arc::new(dissipation),
        dipoles_soc,
    })
}

/// Outcome of a completed run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub trajectory: Trajectory,
    pub series: Vec<(f64, GroupedPopulations)>,
    pub yields: Vec<YieldPoint>,
    pub selected_states: Vec<usize>,
}

impl RunSummary {
    pub fn final_groups(&self) -> Option<GroupedPopulations> {
        self.series.last().map(|(_, g)| *g)
    }
}

/// Validate, compute and write all outputs into `cfg.output.dir`. On failure
/// after validation the known output files are removed and `error.txt`
/// records the stage-tagged message.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate().map_err(|e| e.in_stage("validate"))?;
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e).in_stage("write"))?;
    clear_outputs(&out);
    let result = execute(cfg, &out);
    if let Err(e) = &result {
        clear_outputs(&out);
        let _ = std::fs::write(out.join(ERROR_FILE), format!("{e}\n"));
    }
    result
}

fn clear_outputs(dir: &Path) {
    for name in OUTPUT_FILES {
        let _ = std::fs::remove_file(dir.join(name));
    }
}

fn execute(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let model = load_model(cfg)?;
    let n = model.soc.n_states();
    let train = cfg.train.build().map_err(|e| e.in_stage("propagate"))?;
    let spec = GroupSpec::from_structure(&model.structure);

    let mut selected = cfg.output.selected_states.clone();
    for a in model.dissipation.top_states_by_rate(cfg.output.top_k_by_rate) {
        if !selected.contains(&a) {
            selected.push(a);
        }
    }
    if let Some(&a) = selected.iter().find(|&&a| a >= n) {
        return Err(Error::invalid(format!("selected state {a} outside 0..{n}")).in_stage("validate"));
    }

    let rho0 = match &cfg.initial_state {
        InitialState::Thermal => initial_density(model.soc.energies(), cfg.temperature_k),
        InitialState::Populations(p) if p.len() == n => DensityMatrix::from_populations(p),
        InitialState::Populations(p) => Err(Error::Dimension {
            what: "initial populations".into(),
            got: p.len(),
            expected: n,
        }),
    }
    .map_err(|e| e.in_stage("propagate"))?;

    let t0 = fs_to_au(cfg.t_start_fs);
    let t1 = fs_to_au(cfg.t_end());
    let samples = yield_samples(&train, &cfg.output.first_pulse_fractions).map_err(|e| e.in_stage("analyze"))?;
    let outputs = output_grid(t0, t1, cfg.integrator.record_every_fs, &sample_times_au(&samples));

    let field: Arc<dyn Field> = if cfg.flags.field { Arc::new(train.clone()) } else { Arc::new(NoField) };
    let sys = QmeSystem::new(
        model.soc.energies().to_vec(),
        model.dipole_along(train.polarization),
        model.dissipation.clone(),
        field,
        cfg.flags,
    )
    .map_err(|e| e.in_stage("propagate"))?;
    let mut recorder = ObservableRecorder::new(Some((&model.soc, &spec)), selected.clone(), cfg.output.snapshot_stride);
    let prop = propagate(&sys, &rho0, t0, t1, &cfg.integrator, &outputs, &mut recorder)
        .map_err(|e| e.in_stage("propagate"))?;
    let trajectory = recorder.finish(prop.stats);

    let series = group_populations(&trajectory, &model.soc, &spec).map_err(|e| e.in_stage("analyze"))?;
    let yields = yield_curve(&series, &samples);

    write_outputs(cfg, out, &model, &train, &trajectory, &series, &yields, &selected).map_err(|e| e.in_stage("write"))?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        trajectory,
        series,
        yields,
        selected_states: selected,
    })
}

/// Regular stride plus extra instants inside [t0, t1], ascending, with
/// near-duplicates merged.
fn output_grid(t0: f64, t1: f64, record_every_fs: f64, extra: &[f64]) -> Vec<f64> {
    let mut grid = output_times(t0, t1, record_every_fs);
    grid.extend(extra.iter().copied().filter(|&t| t >= t0 && t <= t1));
    grid.sort_by(f64::total_cmp);
    let tol = 1e-9 * fs_to_au(record_every_fs);
    grid.dedup_by(|b, a| (*b - *a).abs() <= tol);
    grid
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    cfg: &RunConfig,
    out: &Path,
    model: &LoadedModel,
    train: &PulseTrain,
    traj: &Trajectory,
    series: &[(f64, GroupedPopulations)],
    yields: &[YieldPoint],
    selected: &[usize],
) -> Result<()> {
    write_file(&out.join(TRAJECTORY_FILE), &trajectory_csv(traj, series))?;
    write_file(&out.join(OBSERVABLES_FILE), &observables_csv(traj, selected))?;
    write_file(&out.join(YIELD_FILE), &yield_csv(yields))?;
    write_file(&out.join(STEPS_FILE), &steps_csv(&traj.stats))?;
    if !traj.snapshots.is_empty() {
        write_snapshots(out.join(SNAPSHOT_FILE), &traj.snapshots)?;
    }
    let meta = metadata(cfg, out, model, train, &traj.stats, selected)?;
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
        context: "meta.json".into(),
        source,
    })?;
    write_file(&out.join(META_FILE), &(text + "\n"))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn push_row(s: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(',');
        }
        first = false;
        s.push_str(&fmt17(v));
    }
    s.push('\n');
}

pub fn trajectory_csv(traj: &Trajectory, series: &[(f64, GroupedPopulations)]) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for (r, (_, g)) in traj.records.iter().zip(series) {
        push_row(
            &mut s,
            [r.t_fs, r.trace, g.q_tot, g.t_tot, g.q_val, g.t_val, g.q_core, g.t_core, g.ground],
        );
    }
    s
}

fn observables_csv(traj: &Trajectory, selected: &[usize]) -> String {
    let mut s = String::from("t_fs,coherence_norm,max_anti_hermiticity");
    for a in selected {
        let _ = write!(s, ",p_{a}");
    }
    s.push('\n');
    for r in &traj.records {
        push_row(
            &mut s,
            [r.t_fs, r.coherence_norm, r.max_anti_hermiticity]
                .into_iter()
                .chain(r.selected.iter().copied()),
        );
    }
    s
}

pub fn yield_csv(points: &[YieldPoint]) -> String {
    let mut s = String::from("pulse,fraction,t_fs,intensity_au,ratio\n");
    for p in points {
        let ratio = p.ratio.map(fmt17).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", p.pulse, fmt17(p.fraction), fmt17(p.t_fs), fmt17(p.intensity), ratio);
    }
    s
}

fn steps_csv(stats: &StepStats) -> String {
    let mut s = String::from("t_fs,h_as\n");
    for &(t, h) in &stats.history {
        push_row(&mut s, [au_to_fs(t), au_to_fs(h) * 1e3]);
    }
    s
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn absolute(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn metadata(
    cfg: &RunConfig,
    out: &Path,
    model: &LoadedModel,
    train: &PulseTrain,
    stats: &StepStats,
    selected: &[usize],
) -> Result<serde_json::Value> {
    let mut resolved = cfg.resolved();
    resolved.structure_path = absolute(&cfg.structure_path);
    resolved.bath_path = cfg.bath_path.as_deref().map(absolute);
    resolved.output.dir = absolute(out);
    let mut inputs = serde_json::Map::new();
    inputs.insert(
        "structure".into(),
        json!({"path": resolved.structure_path, "sha256": sha256_file(&cfg.structure_path)?}),
    );
    if let Some(b) = &cfg.bath_path {
        inputs.insert("bath".into(), json!({"path": resolved.bath_path, "sha256": sha256_file(b)?}));
    }
    let intensities: Vec<f64> = (1..=train.n_pulses())
        .map(|i| train.integrated_intensity(i))
        .collect::<Result<_>>()?;
    let soc = &model.soc;
    let n = soc.n_states();
    let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&a| f(a)).count();
    let auger_rates = model.dissipation.auger_rates();
    Ok(json!({
        "program": {"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")},
        "config": resolved,
        "constants": constants_table(),
        "conventions": {
            "energy_unit": "hartree internally; eV and fs at the interfaces",
            "flags": cfg.flags,
            "lifetime_convention": cfg.lifetime_convention,
            "auger_edge_rule": cfg.auger.edge_rule,
            "auger_coherence_decay": "rho_ab decays at (A_a + A_b)/2",
            "bloch_dephasing": "rho_ab decays at (K_a + K_b)/2 with K_a the total outgoing rate",
            "rate_prefactor": "k = 4 (1 + n(w)) J(w), n(-w) = -(1 + n(w))",
            "degeneracy_ha": cfg.rates.degeneracy_ha,
            "rate_threshold_au": cfg.rates.threshold_au,
            "temperature_source": "run config (overrides the bath file)",
            "field": "E(t) = e E0 sum_i exp(-(t - t_i)^2 / (2 sigma^2)) cos(Omega t)",
            "yield_sampling": "inter-pulse midpoints; the last pulse half a spacing after its center",
            "ground_population": "SF states at the minimum spin-free energy (1e-8 Ha)",
        },
        "inputs": inputs,
        "model": {
            "n_states": n,
            "n_valence_sf": model.structure.count_class(crate::structure::StateClass::Valence),
            "n_core_sf": model.structure.count_class(crate::structure::StateClass::Core),
            "soc_energy_range_ev": [hartree_to_ev(soc.energies()[0]), hartree_to_ev(soc.energies()[n - 1])],
            "stored_rates": model.rates.nnz(),
            "auger_states": count(&|a| auger_rates[a] > 0.0),
            "selected_states": selected,
        },
        "train": {
            "centers_fs": train.centers.iter().map(|&c| au_to_fs(c)).collect::<Vec<_>>(),
            "sigma_fs": au_to_fs(train.sigma),
            "omega_au": train.omega,
            "integrated_intensity_au": intensities,
        },
        "steps": {
            "accepted": stats.accepted,
            "rejected": stats.rejected,
            "rhs_evals": stats.rhs_evals,
            "h_min_as": au_to_fs(stats.h_min_accepted) * 1e3,
            "h_max_as": au_to_fs(stats.h_max_accepted) * 1e3,
            "history_file": STEPS_FILE,
        },
    }))
}

/// Recompute grouped populations and the yield curve of a finished run from
/// `snapshots.bin` when present, else from `trajectory.csv`.
pub fn analyze(cfg: &RunConfig, run_dir: &Path, out: &Path) -> Result<(Vec<(f64, GroupedPopulations)>, Vec<YieldPoint>)> {
    cfg.validate().map_err(|e| e.in_stage("validate"))?;
    let snap_path = run_dir.join(SNAPSHOT_FILE);
    let traj_path = run_dir.join(TRAJECTORY_FILE);
    let series = if snap_path.is_file() {
        let structure = load_structure(&cfg.structure_path).map_err(|e| e.in_stage("load"))?;
        let soc = diagonalize_soc(&structure).map_err(|e| e.in_stage("diagonalize"))?;
        let traj = Trajectory {
            snapshots: crate::propagator::read_snapshots(&snap_path).map_err(|e| e.in_stage("load"))?,
            ..Default::default()
        };
        group_populations(&traj, &soc, &GroupSpec::from_structure(&structure)).map_err(|e| e.in_stage("analyze"))?
    } else if traj_path.is_file() {
        read_trajectory_csv(&traj_path).map_err(|e| e.in_stage("load"))?
    } else {
        return Err(Error::MissingData(format!(
            "{} has neither {SNAPSHOT_FILE} nor {TRAJECTORY_FILE}",
            run_dir.display()
        ))
        .in_stage("load"));
    };
    let train = cfg.train.build().map_err(|e| e.in_stage("analyze"))?;
    let samples = yield_samples(&train, &cfg.output.first_pulse_fractions).map_err(|e| e.in_stage("analyze"))?;
    let yields = yield_curve(&series, &samples);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e).in_stage("write"))?;
    let mut grouped = String::from("t_fs,Q_tot,T_tot,Q_val,T_val,Q_core,T_core,ground_pop\n");
    for (t, g) in &series {
        push_row(&mut grouped, [*t, g.q_tot, g.t_tot, g.q_val, g.t_val, g.q_core, g.t_core, g.ground]);
    }
    write_file(&out.join("grouped.csv"), &grouped).map_err(|e| e.in_stage("write"))?;
    write_file(&out.join(YIELD_FILE), &yield_csv(&yields)).map_err(|e| e.in_stage("write"))?;
    Ok((series, yields))
}

/// Parse the grouped columns of a `trajectory.csv`.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(f64, GroupedPopulations)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        field: "trajectory".into(),
        msg: msg.into(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRAJECTORY_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    lines
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i + 1, "non-numeric value"))?;
            if v.len() != 9 {
                return Err(bad(i + 1, "expected 9 columns"));
            }
            Ok((
                v[0],
                GroupedPopulations {
                    q_tot: v[2],
                    t_tot: v[3],
                    q_val: v[4],
                    t_val: v[5],
                    q_core: v[6],
                    t_core: v[7],
                    ground: v[8],
                },
            ))
        })
        .collect()
}

/// Rate list `a,b,omega_ev,k_au,hbar_k_ev` of a loaded model.
pub fn rates_csv(model: &LoadedModel) -> String {
    let e = model.soc.energies();
    let mut s = String::from("a,b,omega_ev,k_au,hbar_k_ev\n");
    for (a, b, k) in model.rates.iter() {
        let _ = writeln!(s, "{a},{b},{},{},{}", fmt17(hartree_to_ev(e[a] - e[b])), fmt17(k), fmt17(hartree_to_ev(k)));
    }
    s
}

pub const DEFAULT_HISTOGRAM_EDGES_EV: [f64; 8] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

pub fn histogram_csv(model: &LoadedModel, edges_ev: &[f64]) -> Result<String> {
    let counts = rate_histogram(&model.dissipation, edges_ev)?;
    let mut s = String::from("lo_ev,hi_ev,count\n");
    for (w, c) in edges_ev.windows(2).zip(counts) {
        let _ = writeln!(s, "{},{},{c}", fmt17(w[0]), fmt17(w[1]));
    }
    Ok(s)
}

pub fn model_spectrum(model: &LoadedModel, temperature_k: f64, fwhm_ev: f64, grid_ev: &[f64]) -> Result<Spectrum> {
    absorption_spectrum(&model.soc, &model.dipoles_soc, temperature_k, fwhm_ev, grid_ev)
}

pub fn spectrum_csv(spec: &Spectrum) -> String {
    let mut s = String::from("E_eV,intensity_norm,intensity_raw\n");
    for ((e, a), b) in spec.energies_ev.iter().zip(&spec.intensity_norm).zip(&spec.intensity_raw) {
        push_row(&mut s, [*e, *a, *b]);
    }
    s
}

/// The largest local maxima, `E_eV,intensity_raw` per line.
pub fn peaks_csv(spec: &Spectrum, k: usize) -> String {
    let mut s = String::from("E_eV,intensity_raw\n");
    for (e, h) in spectrum_peaks(spec).into_iter().take(k) {
        push_row(&mut s, [e, h]);
    }
    s
}

/// `t_fs,Ex,Ey,Ez,envelope` sampled every `dt_fs`.
pub fn field_csv(train: &PulseTrain, t0_fs: f64, t1_fs: f64, dt_fs: f64) -> Result<String> {
    if !(dt_fs > 0.0) || !(t1_fs > t0_fs) {
        return Err(Error::invalid("field sampling needs t_max > t_min and dt > 0"));
    }
    let mut s = String::from("t_fs,Ex,Ey,Ez,envelope\n");
    let steps = ((t1_fs - t0_fs) / dt_fs).round() as usize;
    for k in 0..=steps {
        let t_fs = t0_fs + k as f64 * dt_fs;
        let t = fs_to_au(t_fs);
        let e = train.field_at(t);
        push_row(&mut s, [t_fs, e[0], e[1], e[2], train.envelope(t)]);
    }
    Ok(s)
}

/// Runs of a sweep: config file paths or inline configs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepEntry {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub runs: Vec<SweepEntry>,
    /// Summary CSV path; defaults to `sweep_summary.csv` next to the file.
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<(Vec<RunConfig>, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sweep: SweepConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("sweep {}", path.display()),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let configs = sweep
            .runs
            .into_iter()
            .map(|r| match r {
                SweepEntry::Path(p) => RunConfig::load(base.join(p)),
                SweepEntry::Inline(c) => {
                    let mut c = *c;
                    c.resolve_paths(base);
                    Ok(c)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = base.join(sweep.summary.unwrap_or_else(|| "sweep_summary.csv".into()));
        Ok((configs, summary))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub out_dir: PathBuf,
    pub ok: bool,
    pub t_fs: f64,
    pub t_tot: f64,
    pub q_tot: f64,
    pub message: String,
}

fn normalized(p: &Path) -> PathBuf {
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// Run every config on a pool of `parallelism` threads. Individual failures
/// are reported per row; duplicate output directories are rejected up front.
pub fn sweep(configs: &[RunConfig], parallelism: usize) -> Result<Vec<SweepRow>> {
    if parallelism == 0 {
        return Err(Error::invalid("sweep parallelism must be at least 1"));
    }
    let dirs: Vec<PathBuf> = configs.iter().map(|c| normalized(&c.output.dir)).collect();
    for (i, d) in dirs.iter().enumerate() {
        if let Some(j) = dirs[..i].iter().position(|e| e == d) {
            return Err(Error::invalid(format!(
                "runs {j} and {i} share the output directory {}",
                d.display()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, cfg)| {
                let out_dir = cfg.output.dir.clone();
                match run(cfg) {
                    Ok(s) => {
                        let g = s.final_groups().unwrap_or_default();
                        SweepRow {
                            index,
                            out_dir,
                            ok: true,
                            t_fs: s.series.last().map_or(f64::NAN, |(t, _)| *t),
                            t_tot: g.t_tot,
                            q_tot: g.q_tot,
                            message: String::new(),
                        }
                    }
                    Err(e) => SweepRow {
                        index,
                        out_dir,
                        ok: false,
                        t_fs: f64::NAN,
                        t_tot: f64::NAN,
                        q_tot: f64::NAN,
                        message: e.to_string(),
                    },
                }
            })
            .collect()
    }))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("index,out_dir,status,t_fs,T_tot,Q_tot,ratio,message\n");
    for r in rows {
        let ratio = if r.ok && r.q_tot >= 1e-15 { fmt17(r.t_tot / r.q_tot) } else { String::new() };
        let num = |x: f64| if r.ok { fmt17(x) } else { String::new() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},\"{}\"",
            r.index,
            r.out_dir.display(),
            if r.ok { "ok" } else { "failed" },
            num(r.t_fs),
            num(r.t_tot),
            num(r.q_tot),
            ratio,
            r.message.replace('"', "'")
        );
    }
    s
}
