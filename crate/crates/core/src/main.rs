use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spindyn::config::RunConfig;
use spindyn::field::hhg_comb;
use spindyn::modelgen::{generate, write_model, ModelKind, Params};
use spindyn::run::{
    analyze, field_csv, histogram_csv, load_model, model_spectrum, peaks_csv, rates_csv, run, spectrum_csv, sweep,
    sweep_csv, SweepConfig, DEFAULT_HISTOGRAM_EDGES_EV,
};
use spindyn::units::{hartree_to_ev, KB_HARTREE_PER_K};
use spindyn::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "spindyn", version, about = "Dissipative spin-state dynamics under X-ray pulse trains")]
struct Cli {
    /// Run configuration (JSON), or a run's meta.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for model generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate and write trajectory.csv, yield.csv and meta.json.
    Simulate,
    /// Regroup a finished run (snapshots or trajectory) and redo the yield curve.
    Analyze {
        /// Directory of the finished run; defaults to the configured output.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Write the relaxation rates and their histogram.
    Rates {
        /// Histogram bin edges for ħk in eV, comma separated.
        #[arg(long, value_delimiter = ',')]
        bins_ev: Option<Vec<f64>>,
    },
    /// Write the thermally averaged absorption spectrum.
    Spectrum {
        #[arg(long, default_value_t = 0.5)]
        fwhm_ev: f64,
        #[arg(long)]
        e_min_ev: Option<f64>,
        #[arg(long)]
        e_max_ev: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Sample the pulse-train field.
    Field {
        #[arg(long)]
        t_min_fs: Option<f64>,
        #[arg(long)]
        t_max_fs: Option<f64>,
        #[arg(long, default_value_t = 0.001)]
        dt_fs: f64,
    },
    /// List the odd harmonics of a driver inside an energy window.
    Comb {
        #[arg(long)]
        lambda_nm: f64,
        #[arg(long)]
        e_min_ev: f64,
        #[arg(long)]
        e_max_ev: f64,
    },
    /// Generate a seeded synthetic model with a starter run.json.
    Modelgen {
        /// two-level, n-ladder or soc-toy.
        #[arg(long)]
        kind: String,
        /// Generator parameter as key=value; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Run several configurations concurrently.
    Sweep,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        // ignore an already-initialized pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = || -> Result<RunConfig> {
        let path = cli
            .config
            .as_deref()
            .ok_or_else(|| Error::invalid("this command needs --config <path>"))?;
        let mut cfg = RunConfig::load(path).map_err(|e| e.in_stage("validate"))?;
        if let Some(out) = &cli.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    };
    match &cli.command {
        Command::Simulate => {
            let cfg = config()?;
            let summary = run(&cfg)?;
            let s = &summary.trajectory.stats;
            eprintln!(
                "wrote {} ({} records, {} accepted / {} rejected steps)",
                summary.out_dir.display(),
                summary.trajectory.records.len(),
                s.accepted,
                s.rejected
            );
            Ok(())
        }
        Command::Analyze { run_dir } => {
            let cfg = config()?;
            let run_dir = run_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let out = cli.out.clone().unwrap_or_else(|| run_dir.clone());
            let (series, yields) = analyze(&cfg, &run_dir, &out)?;
            eprintln!("{} grouped rows, {} yield points in {}", series.len(), yields.len(), out.display());
            Ok(())
        }
        Command::Rates { bins_ev } => {
            let cfg = config()?;
            cfg.validate().map_err(|e| e.in_stage("validate"))?;
            if !cfg.flags.vib {
                return Err(Error::invalid("rates need flags.vib and a bath file").in_stage("validate"));
            }
            let model = load_model(&cfg)?;
            let out = output_dir(&cfg)?;
            let edges = bins_ev.clone().unwrap_or_else(|| DEFAULT_HISTOGRAM_EDGES_EV.to_vec());
            write(&out.join("rates.csv"), &rates_csv(&model))?;
            write(&out.join("rate_histogram.csv"), &histogram_csv(&model, &edges)?)?;
            eprintln!("{} stored rates in {}", model.rates.nnz(), out.display());
            Ok(())
        }
        Command::Spectrum {
            fwhm_ev,
            e_min_ev,
            e_max_ev,
            points,
        } => {
            let cfg = config()?;
            cfg.validate().map_err(|e| e.in_stage("validate"))?;
            let model = load_model(&cfg)?;
            let (lo, hi) = default_window(&model, cfg.temperature_k, *fwhm_ev);
            let lo = e_min_ev.unwrap_or(lo);
            let hi = e_max_ev.unwrap_or(hi);
            if *points < 2 || !(hi > lo) {
                return Err(Error::invalid("spectrum grid needs at least 2 points and e_max > e_min"));
            }
            let grid: Vec<f64> = (0..*points).map(|k| lo + (hi - lo) * k as f64 / (*points - 1) as f64).collect();
            let spec = model_spectrum(&model, cfg.temperature_k, *fwhm_ev, &grid)?;
            let out = output_dir(&cfg)?;
            write(&out.join("spectrum.csv"), &spectrum_csv(&spec))?;
            write(&out.join("spectrum_peaks.csv"), &peaks_csv(&spec, 10))?;
            for (e, _) in spindyn::analysis::spectrum_peaks(&spec).into_iter().take(2) {
                eprintln!("peak at {e:.3} eV");
            }
            Ok(())
        }
        Command::Field { t_min_fs, t_max_fs, dt_fs } => {
            let cfg = config()?;
            let train = cfg.train.build()?;
            let out = output_dir(&cfg)?;
            let t0 = t_min_fs.unwrap_or(cfg.t_start_fs);
            let t1 = t_max_fs.unwrap_or_else(|| cfg.t_end());
            write(&out.join("field.csv"), &field_csv(&train, t0, t1, *dt_fs)?)
        }
        Command::Comb {
            lambda_nm,
            e_min_ev,
            e_max_ev,
        } => {
            let lines = hhg_comb(*lambda_nm, *e_min_ev, *e_max_ev)?;
            let step = spindyn::units::HC_EV_NM / lambda_nm;
            let mut s = String::from("harmonic,E_eV\n");
            for e in lines {
                s.push_str(&format!("{},{e:.6}\n", (e / step).round() as u64));
            }
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    write(&dir.join("comb.csv"), &s)
                }
                None => {
                    print!("{s}");
                    Ok(())
                }
            }
        }
        Command::Modelgen { kind, params } => {
            let kind: ModelKind = kind.parse()?;
            let params = Params::parse(params)?;
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::invalid("modelgen needs --out <dir>"))?;
            let g = generate(kind, &params, cli.seed)?;
            for p in write_model(&out, &g)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Sweep => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| Error::invalid("sweep needs --config <sweep.json>"))?;
            let (configs, summary) = SweepConfig::load(path).map_err(|e| e.in_stage("validate"))?;
            let summary = match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    dir.join("sweep_summary.csv")
                }
                None => summary,
            };
            let parallelism = cli.threads.unwrap_or_else(rayon::current_num_threads);
            let rows = sweep(&configs, parallelism)?;
            write(&summary, &sweep_csv(&rows))?;
            let failed: Vec<_> = rows.iter().filter(|r| !r.ok).collect();
            for r in &failed {
                eprintln!("run {} failed: {}", r.index, r.message);
            }
            eprintln!("{} of {} runs completed; summary in {}", rows.len() - failed.len(), rows.len(), summary.display());
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Stage {
                    stage: "sweep",
                    source: Box::new(Error::MissingData(format!("{} runs failed", failed.len()))),
                })
            }
        }
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Transitions out of thermally populated states, padded by 10 FWHM.
fn default_window(model: &spindyn::run::LoadedModel, temperature_k: f64, fwhm_ev: f64) -> (f64, f64) {
    let e = model.soc.energies();
    let n = e.len();
    let kt = (KB_HARTREE_PER_K * temperature_k).max(1e-12);
    let initial: Vec<usize> = (0..n).filter(|&g| (e[g] - e[0]) < 30.0 * kt).collect();
    let core: Vec<usize> = (0..n).filter(|&a| model.soc.core_character(a) > 0.5).collect();
    let finals = if core.is_empty() { (1..n).collect() } else { core };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &g in &initial {
        for &a in &finals {
            let w = hartree_to_ev(e[a] - e[g]);
            if w > 0.0 {
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    ((lo - 10.0 * fwhm_ev).max(0.0), hi + 10.0 * fwhm_ev)
}
