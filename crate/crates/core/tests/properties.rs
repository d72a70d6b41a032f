//! Invariants of the propagated density matrix on random small models.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use common::{build, flags, label, random_bath, random_dipoles, random_soc, rng, valence, Built, Keep};
use spindyn::config::InitialState;
use spindyn::field::{NoField, PulseTrain};
use spindyn::linalg::{trace, CMatrix, C64};
use spindyn::modelgen::{generate, write_model, ModelKind, Params, RUN_FILE};
use spindyn::propagator::{boltzmann_populations, output_times, propagate, DensityMatrix, IntegratorConfig};
use spindyn::run::{run, sweep, TRAJECTORY_FILE};
use spindyn::structure::{Edge, ElectronicStructure, StateClass};
use spindyn::units::{ev_to_hartree, fs_to_au};
use spindyn::config::RunConfig;

/// Valence quintets and triplets plus two core quintets, all in 0.3 eV
/// except the core pair near 2 eV.
fn random_model(seed: u64, n: usize) -> Built {
    let mut r = rng(seed);
    let labels: Vec<_> = (0..n)
        .map(|k| {
            if k + 2 >= n {
                label(4, 0, StateClass::Core, if k + 1 == n { Edge::L2 } else { Edge::L3 })
            } else {
                valence(if k % 2 == 0 { 4 } else { 2 })
            }
        })
        .collect();
    let energies: Vec<f64> = (0..n)
        .map(|k| ev_to_hartree(if k + 2 >= n { 2.0 + 0.1 * k as f64 } else { r.gen_range(0.0..0.3) }))
        .collect();
    let v = random_soc(&mut r, &labels, ev_to_hartree(0.02));
    let d = random_dipoles(&mut r, &labels, 0.2);
    let es = ElectronicStructure::from_energies(&energies, v, d, labels).unwrap();
    let bath = random_bath(&mut r, n, &[228.0, 417.0, 3640.0], 1.0, 300.0);
    build(&es, Some(&bath), 0.4, 1.04).unwrap()
}

fn pulse(omega_ev: f64, e0: f64) -> PulseTrain {
    PulseTrain::new(e0, ev_to_hartree(omega_ev), [0.0, 0.0, 1.0], fs_to_au(0.2), vec![fs_to_au(1.0), fs_to_au(2.3)]).unwrap()
}

fn smallest_eigenvalue(m: &CMatrix) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn thermal_state_is_a_bloch_fixed_point(seed in 0u64..1000, n in 3usize..9) {
        let b = random_model(seed, n);
        let sys = b.system(Arc::new(NoField), flags(false, true, false)).unwrap();
        let p = boltzmann_populations(b.soc.energies(), 300.0).unwrap();
        let rho0 = DensityMatrix::from_populations(&p).unwrap();
        let t1 = fs_to_au(20.0);
        let out = propagate(&sys, &rho0, 0.0, t1, &IntegratorConfig::default(), &[], &mut Keep::default()).unwrap();
        for a in 0..n {
            prop_assert!((out.final_state[(a, a)].re - p[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn driven_bloch_dynamics_keep_trace_and_positivity(seed in 0u64..1000, n in 3usize..9, e0 in 0.0f64..0.2) {
        let b = random_model(seed, n);
        let sys = b.system(Arc::new(pulse(2.0, e0)), flags(true, true, false)).unwrap();
        let rho0 = DensityMatrix::from_populations(&boltzmann_populations(b.soc.energies(), 300.0).unwrap()).unwrap();
        let t1 = fs_to_au(4.0);
        // a near-zero eigenvalue picks up about 100x the tolerance from integration
        let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, ..IntegratorConfig::default() };
        let mut keep = Keep::default();
        propagate(&sys, &rho0, 0.0, t1, &cfg, &output_times(0.0, t1, 0.2), &mut keep).unwrap();
        for (_, m) in &keep.0 {
            prop_assert!((trace(m).re - 1.0).abs() < 1e-10);
            prop_assert!(trace(m).im.abs() < 1e-12);
            let lo = smallest_eigenvalue(m);
            prop_assert!(lo > -1e-9, "smallest eigenvalue {lo}");
            prop_assert!(spindyn::linalg::anti_hermiticity(m) < 1e-14);
        }
    }

    #[test]
    fn auger_decay_only_removes_population(seed in 0u64..1000, n in 3usize..9) {
        let b = random_model(seed, n);
        let sys = b.system(Arc::new(pulse(2.1, 0.1)), flags(true, true, true)).unwrap();
        let rho0 = DensityMatrix::from_populations(&boltzmann_populations(b.soc.energies(), 300.0).unwrap()).unwrap();
        let t1 = fs_to_au(4.0);
        let mut keep = Keep::default();
        propagate(&sys, &rho0, 0.0, t1, &IntegratorConfig::default(), &output_times(0.0, t1, 0.1), &mut keep).unwrap();
        let traces: Vec<f64> = keep.0.iter().map(|(_, m)| trace(m).re).collect();
        prop_assert!(traces.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(traces.iter().all(|t| *t <= 1.0 + 1e-12));
    }

    #[test]
    fn tighter_tolerance_does_not_move_the_answer_further(seed in 0u64..1000) {
        let b = random_model(seed, 5);
        let sys = b.system(Arc::new(pulse(2.0, 0.1)), flags(true, true, true)).unwrap();
        let rho0 = DensityMatrix::from_populations(&boltzmann_populations(b.soc.energies(), 300.0).unwrap()).unwrap();
        let t1 = fs_to_au(3.0);
        let solve = |tol: f64| {
            let cfg = IntegratorConfig { rel_tol: tol, abs_tol: tol * 1e-2, h_max: 20.0, ..IntegratorConfig::default() };
            propagate(&sys, &rho0, 0.0, t1, &cfg, &[], &mut Keep::default()).unwrap().final_state
        };
        let best = solve(1e-12);
        let e6 = common::max_abs_diff(&solve(1e-6), &best);
        let e8 = common::max_abs_diff(&solve(1e-8), &best);
        prop_assert!(e8 < e6 || e6 < 1e-12);
    }
}

#[test]
fn steps_shrink_under_a_strong_pulse() {
    let b = random_model(4, 6);
    let t1 = fs_to_au(3.3);
    let cfg = IntegratorConfig::default();
    let rho0 = DensityMatrix::from_populations(&boltzmann_populations(b.soc.energies(), 300.0).unwrap()).unwrap();
    let driven = b.system(Arc::new(pulse(2.0, 2.5)), flags(true, true, false)).unwrap();
    let free = b.system(Arc::new(NoField), flags(false, true, false)).unwrap();
    let d = propagate(&driven, &rho0, 0.0, t1, &cfg, &[], &mut Keep::default()).unwrap();
    let f = propagate(&free, &rho0, 0.0, t1, &cfg, &[], &mut Keep::default()).unwrap();
    let window = (fs_to_au(0.6), fs_to_au(1.4));
    let h_pulse = d.stats.min_step_in(window.0, window.1).unwrap();
    let h_free = f.stats.min_step_in(window.0, window.1).unwrap_or(f.stats.h_max_accepted);
    assert!(h_pulse < 0.5 * h_free, "pulse {h_pulse} vs free {h_free}");
    assert!(d.stats.accepted > f.stats.accepted);
}

#[test]
fn pure_state_stays_pure_without_dissipation() {
    let b = random_model(9, 6);
    let sys = b.system(Arc::new(pulse(2.0, 0.3)), flags(true, false, false)).unwrap();
    let rho0 = b.sf_state(0);
    let t1 = fs_to_au(3.0);
    let cfg = IntegratorConfig { rel_tol: 1e-11, abs_tol: 1e-13, ..IntegratorConfig::default() };
    let out = propagate(&sys, &rho0, 0.0, t1, &cfg, &[], &mut Keep::default()).unwrap();
    let m = &out.final_state;
    let purity = (m * m).trace().re;
    assert!((purity - 1.0).abs() < 1e-9, "purity {purity}");
}

fn generated_config(dir: &std::path::Path, params: &[&str]) -> RunConfig {
    let g = generate(ModelKind::SocToy, &Params::parse(params).unwrap(), 7).unwrap();
    write_model(dir, &g).unwrap();
    let mut cfg = RunConfig::load(dir.join(RUN_FILE)).unwrap();
    cfg.train.n_pulses = 2;
    cfg
}

#[test]
fn everything_off_leaves_observables_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = generated_config(dir.path(), &["n_core_t=1"]);
    cfg.flags = flags(false, false, false);
    let n = 5 * 2 + 3 * 3;
    let mut p = vec![0.0; n];
    p[0] = 0.6;
    p[n - 1] = 0.4;
    cfg.initial_state = InitialState::Populations(p);
    cfg.output.dir = dir.path().join("off");
    let summary = run(&cfg).unwrap();
    let first = summary.series[0].1;
    assert!(summary.series.len() > 10);
    // interpolated samples are exact up to the rounding of the Hermite weights
    let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
    for (_, g) in &summary.series {
        assert!(close(g.t_tot, first.t_tot) && close(g.q_tot, first.q_tot) && close(g.ground, first.ground), "{g:?}");
        assert!(close(g.q_core, first.q_core) && close(g.t_val, first.t_val));
    }
    for r in &summary.trajectory.records {
        assert!(close(r.trace, 1.0));
        assert_eq!(r.coherence_norm, 0.0);
    }
}

#[test]
fn sweep_results_do_not_depend_on_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let base = generated_config(dir.path(), &["n_core_t=1"]);
    let configs = |tag: &str| -> Vec<RunConfig> {
        [0.1, 0.3, 0.5]
            .iter()
            .enumerate()
            .map(|(k, e0)| {
                let mut c = base.clone();
                c.train.e0_au = *e0;
                c.output.dir = dir.path().join(format!("{tag}{k}"));
                c
            })
            .collect()
    };
    let serial = sweep(&configs("serial"), 1).unwrap();
    let parallel = sweep(&configs("parallel"), 3).unwrap();
    for (s, p) in serial.iter().zip(&parallel) {
        assert!(s.ok && p.ok);
        assert_eq!((s.index, s.t_tot, s.q_tot), (p.index, p.t_tot, p.q_tot));
        let a = std::fs::read(s.out_dir.join(TRAJECTORY_FILE)).unwrap();
        let b = std::fs::read(p.out_dir.join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn sf_populations_sum_to_the_trace() {
    let b = random_model(12, 7);
    let n = b.soc.n_states();
    let psi: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), (k as f64).cos())).collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
    let rho = DensityMatrix::pure(&psi).unwrap();
    let sf = spindyn::analysis::sf_populations(rho.matrix(), &b.soc).unwrap();
    assert!((sf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sf.iter().all(|p| *p >= -1e-15));
}

/// The uphill partner of a stored downhill rate sits below the storage threshold.
#[test]
fn thermal_state_survives_the_rate_threshold() {
    let b = random_model(369, 7);
    let sys = b.system(Arc::new(NoField), flags(false, true, false)).unwrap();
    let p = boltzmann_populations(b.soc.energies(), 300.0).unwrap();
    let rho0 = DensityMatrix::from_populations(&p).unwrap();
    let out = propagate(&sys, &rho0, 0.0, fs_to_au(20.0), &IntegratorConfig::default(), &[], &mut Keep::default()).unwrap();
    for (a, pa) in p.iter().enumerate() {
        assert!((out.final_state[(a, a)].re - pa).abs() < 1e-12);
    }
}

