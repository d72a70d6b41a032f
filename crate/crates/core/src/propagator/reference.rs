//! Brute-force propagation with the full N²×N² superoperator, field frozen
//! at each slice midpoint. Only for small test systems.

use crate::linalg::{CMatrix, C64, I, ZERO};

use super::QmeSystem;

/// L(t) = L₀ + E(t) L₁ acting on row-major vec(ρ).
#[derive(Clone, Debug)]
pub struct Superoperator {
    n: usize,
    l0: CMatrix,
    l1: CMatrix,
}

impl Superoperator {
    /// Assembled element by element from the equation of motion.
    pub fn build(sys: &QmeSystem) -> Self {
        let n = sys.n_states();
        let idx = |a: usize, b: usize| a * n + b;
        let flags = sys.flags();
        let e = sys.energies();
        let d = sys.dipole();
        let model = sys.model();
        let mut l0 = CMatrix::zeros(n * n, n * n);
        let mut l1 = CMatrix::zeros(n * n, n * n);
        for a in 0..n {
            for b in 0..n {
                let row = idx(a, b);
                l0[(row, row)] += -I * (e[a] - e[b]);
                if flags.field {
                    for c in 0..n {
                        l1[(row, idx(c, b))] += I * d[(a, c)];
                        l1[(row, idx(a, c))] -= I * d[(c, b)];
                    }
                }
                if flags.vib {
                    if a == b {
                        for c in 0..n {
                            l0[(row, idx(c, c))] -= C64::new(model.population_element(a, c), 0.0);
                        }
                    } else {
                        l0[(row, row)] -= C64::new(model.dephasing(a, b), 0.0);
                    }
                }
                if flags.auger {
                    let g = if a == b {
                        model.auger_rates()[a]
                    } else {
                        model.auger_dephasing(a, b)
                    };
                    l0[(row, row)] -= C64::new(g, 0.0);
                }
            }
        }
        Self { n, l0, l1 }
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn at(&self, amplitude: f64) -> CMatrix {
        if amplitude == 0.0 {
            self.l0.clone()
        } else {
            &self.l0 + &self.l1 * C64::new(amplitude, 0.0)
        }
    }
}

fn max_abs_vec(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// v ← exp(hL) v by scaled Taylor series.
fn expm_action(l: &CMatrix, h: f64, v: &mut Vec<C64>, term: &mut Vec<C64>, next: &mut Vec<C64>) {
    let dim = v.len();
    let norm = (0..dim)
        .map(|i| l.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * h.abs();
    if norm == 0.0 {
        return;
    }
    let substeps = (norm / 0.5).ceil().max(1.0) as usize;
    let dt = h / substeps as f64;
    for _ in 0..substeps {
        term.clone_from(v);
        for k in 1..=60 {
            let scale = C64::new(dt / k as f64, 0.0);
            for (i, out) in next.iter_mut().enumerate() {
                let mut s = ZERO;
                for (j, t) in term.iter().enumerate() {
                    s += l[(i, j)] * t;
                }
                *out = s * scale;
            }
            std::mem::swap(term, next);
            for (vi, ti) in v.iter_mut().zip(term.iter()) {
                *vi += ti;
            }
            if max_abs_vec(term) <= 1e-18 * max_abs_vec(v) {
                break;
            }
        }
    }
}

/// Piecewise-constant propagation over `n_slices` equal slices.
pub fn reference_propagate(sys: &QmeSystem, rho0: &CMatrix, t0: f64, t1: f64, n_slices: usize) -> CMatrix {
    let n = sys.n_states();
    let sup = Superoperator::build(sys);
    let mut v: Vec<C64> = (0..n * n).map(|k| rho0[(k / n, k % n)]).collect();
    let mut term = vec![ZERO; n * n];
    let mut next = vec![ZERO; n * n];
    let slices = n_slices.max(1);
    let h = (t1 - t0) / slices as f64;
    let field_free = !sys.flags().field;
    let l_static = sup.at(0.0);
    for s in 0..slices {
        let t_mid = t0 + (s as f64 + 0.5) * h;
        let amp = sys.amplitude(t_mid);
        if field_free || amp == 0.0 {
            expm_action(&l_static, h, &mut v, &mut term, &mut next);
        } else {
            let l = sup.at(amp);
            expm_action(&l, h, &mut v, &mut term, &mut next);
        }
    }
    CMatrix::from_fn(n, n, |a, b| v[a * n + b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::{DissipationModel, RateMatrix};
    use crate::field::NoField;
    use crate::linalg::{max_abs, RMatrix};
    use crate::propagator::Flags;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn identity_for_trivial_system() {
        let sys = QmeSystem::new(vec![0.0; 3], CMatrix::zeros(3, 3), Arc::new(DissipationModel::none(3)), Arc::new(NoField), Flags::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = crate::propagator::tests::random_hermitian(3, 1.0, &mut rng);
        let out = reference_propagate(&sys, &rho, 0.0, 50.0, 10);
        assert_eq!(out, rho);
    }

    #[test]
    fn rate_equations_match_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let dense = RMatrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { rng.gen_range(0.0..2e-3) });
        let model = DissipationModel::from_rates(RateMatrix::from_dense(&dense, 0.0).unwrap());
        let r = RMatrix::from_fn(n, n, |a, c| model.population_element(a, c));
        let energies: Vec<f64> = (0..n).map(|k| 0.01 * k as f64).collect();
        let sys = QmeSystem::new(energies, CMatrix::zeros(n, n), Arc::new(model), Arc::new(NoField), Flags::default()).unwrap();
        let p0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.3, 0.7]);
        let rho0 = CMatrix::from_fn(n, n, |a, b| if a == b { C64::new(p0[a], 0.0) } else { ZERO });
        let t = 800.0;
        let out = reference_propagate(&sys, &rho0, 0.0, t, 1);
        let expect = (r * -t).exp() * p0;
        for a in 0..n {
            assert!((out[(a, a)].re - expect[a]).abs() < 1e-10);
        }
        assert!(max_abs(&out) <= 1.0);
    }
}
