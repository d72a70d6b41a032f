//! Vibronic Bloch relaxation and Auger decay in the SOC basis.
//!
//! Rates follow from a multimode Brownian-oscillator spectral density
//!
//! J_ab(ω) = Σ_ξ ω_ξ² |g_ab,ξ|² ωω_ξγ / ((ω² − ω_ξ²)² + ω²γ²),
//! k_{a→b} = 2[1 + n(ω_ab)][J_ab(ω_ab) − J_ab(−ω_ab)], ω_ab = E_a − E_b,
//!
//! with the SF shifts g_{0n,ξ} carried into the SOC basis as the diagonal
//! operator V† diag(g_ξ) V. Everything is in Hartree atomic units.

mod bath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bath::{load_bath, parse_bath, write_bath, VibrationalBath};

use crate::error::{Error, Result};
use crate::linalg::{hermitize, CMatrix, RMatrix, C64};
use crate::structure::SocBasis;
use crate::units::{au_to_fs, ev_to_hartree, hartree_to_ev, kt_hartree};

/// Pairs closer than this (Hartree) get no rate.
pub const DEFAULT_DEGENERACY_HA: f64 = 1e-8;
/// Rate pairs whose larger direction is below this (a.u.) are not stored.
pub const DEFAULT_RATE_THRESHOLD_AU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateOptions {
    pub degeneracy_ha: f64,
    pub threshold_au: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            degeneracy_ha: DEFAULT_DEGENERACY_HA,
            threshold_au: DEFAULT_RATE_THRESHOLD_AU,
        }
    }
}

/// g_ab,ξ = Σ_n C*_an C_bn g_{0n,ξ}, one Hermitian matrix per mode.
pub fn couplings_to_soc(bath: &VibrationalBath, soc: &SocBasis) -> Result<Vec<CMatrix>> {
    check_states(bath, soc)?;
    Ok((0..bath.n_modes())
        .into_par_iter()
        .map(|xi| mode_to_soc(bath, soc, xi))
        .collect())
}

fn mode_to_soc(bath: &VibrationalBath, soc: &SocBasis, xi: usize) -> CMatrix {
    let v = soc.vectors();
    let g = bath.couplings().column(xi);
    let mut scaled = v.clone();
    for (n, mut row) in scaled.row_iter_mut().enumerate() {
        row *= C64::new(g[n], 0.0);
    }
    let mut out = v.adjoint() * scaled;
    // exact Hermiticity keeps |g_ab|² = |g_ba|² bitwise
    hermitize(&mut out);
    out
}

fn check_states(bath: &VibrationalBath, soc: &SocBasis) -> Result<()> {
    if bath.n_states() != soc.n_states() {
        return Err(Error::Dimension {
            what: "bath coupling rows".into(),
            got: bath.n_states(),
            expected: soc.n_states(),
        });
    }
    Ok(())
}

/// J_ab(ω) for per-mode weights |g_ab,ξ|²; `omega` in Hartree, any sign.
pub fn spectral_density(bath: &VibrationalBath, g_ab_sq: &[f64], omega: f64) -> f64 {
    let freqs = bath.frequencies();
    density_sum(&freqs, bath.gamma(), omega, |xi| g_ab_sq[xi])
}

#[inline]
fn density_sum(freqs: &[f64], gamma: f64, omega: f64, weight: impl Fn(usize) -> f64) -> f64 {
    let w2 = omega * omega;
    let mut j = 0.0;
    for (xi, &wx) in freqs.iter().enumerate() {
        let d = w2 - wx * wx;
        j += wx * wx * weight(xi) * (omega * wx * gamma) / (d * d + w2 * gamma * gamma);
    }
    j
}

/// n(ω) = 1/(exp(ω/k_BT) − 1). At T = 0 returns 0 for ω > 0 and −1 for ω < 0.
pub fn bose_einstein(omega: f64, temperature_k: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::invalid("Bose-Einstein occupation undefined at zero frequency"));
    }
    if !(temperature_k >= 0.0) {
        return Err(Error::invalid(format!("temperature {temperature_k} K must be non-negative")));
    }
    if temperature_k == 0.0 {
        return Ok(if omega > 0.0 { 0.0 } else { -1.0 });
    }
    Ok(1.0 / (omega / kt_hartree(temperature_k)).exp_m1())
}

/// 1 + n(ω), evaluated as −n(|ω|) for ω < 0 to avoid cancellation.
fn emission_factor(omega: f64, temperature_k: f64) -> f64 {
    if temperature_k == 0.0 {
        return if omega > 0.0 { 1.0 } else { 0.0 };
    }
    let n = 1.0 / (omega.abs() / kt_hartree(temperature_k)).exp_m1();
    if omega > 0.0 {
        1.0 + n
    } else {
        -n
    }
}

/// k_{a→b} from precomputed SOC couplings (a.u.).
pub fn relaxation_rate(
    soc: &SocBasis,
    bath: &VibrationalBath,
    g_soc: &[CMatrix],
    a: usize,
    b: usize,
    degeneracy_ha: f64,
) -> f64 {
    let e = soc.energies();
    let omega = e[a] - e[b];
    if a == b || omega.abs() < degeneracy_ha {
        return 0.0;
    }
    let freqs = bath.frequencies();
    let j = density_sum(&freqs, bath.gamma(), omega, |xi| g_soc[xi][(a, b)].norm_sqr());
    4.0 * emission_factor(omega, bath.temperature_k()) * j
}

/// Sparse k_{a→b}, stored by source state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl RateMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Keep a→b and b→a when either is ≥ `threshold`, so an uphill rate is
    /// never dropped while its downhill partner stays; the diagonal is ignored.
    pub fn from_dense(k: &RMatrix, threshold: f64) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::Dimension {
                what: "rate matrix columns".into(),
                got: k.ncols(),
                expected: n,
            });
        }
        let mut out = Self::empty(n);
        for a in 0..n {
            for b in 0..n {
                let v = k[(a, b)];
                if !(v >= 0.0) {
                    return Err(Error::invalid(format!("rate k[{a}->{b}] = {v} is negative")));
                }
                if a != b && v > 0.0 && v.max(k[(b, a)]) >= threshold {
                    out.cols.push(b);
                    out.values.push(v);
                }
            }
            out.row_ptr[a + 1] = out.cols.len();
        }
        Ok(out)
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// (target, rate) pairs leaving `a`.
    pub fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        match self.cols[r.clone()].binary_search(&b) {
            Ok(i) => self.values[r.start + i],
            Err(_) => 0.0,
        }
    }

    /// All stored (a, b, k_{a→b}) in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |a| self.row(a).map(move |(b, k)| (a, b, k)))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n + 1];
        for &b in &self.cols {
            counts[b + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (a, b, k) in self.iter() {
            cols[next[b]] = a;
            values[next[b]] = k;
            next[b] += 1;
        }
        Self {
            n: self.n,
            row_ptr: counts,
            cols,
            values,
        }
    }
}

/// All relaxation rates k_{a→b} of the SOC states.
pub fn compute_rates(soc: &SocBasis, bath: &VibrationalBath, opts: RateOptions) -> Result<RateMatrix> {
    if !(opts.degeneracy_ha >= 0.0) || !(opts.threshold_au >= 0.0) {
        return Err(Error::invalid("rate thresholds must be non-negative"));
    }
    let g_soc = couplings_to_soc(bath, soc)?;
    let n = soc.n_states();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| relaxation_rate(soc, bath, &g_soc, a, b, opts.degeneracy_ha))
                .collect()
        })
        .collect();
    let dense = RMatrix::from_fn(n, n, |a, b| rows[a][b]);
    RateMatrix::from_dense(&dense, opts.threshold_au)
}

/// How an Auger width Γ maps to a population lifetime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LifetimeConvention {
    /// τ = h/Γ.
    #[default]
    HOverGamma,
    /// τ = ħ/Γ.
    HbarOverGamma,
}

impl LifetimeConvention {
    pub fn lifetime_fs(self, gamma_ev: f64) -> f64 {
        au_to_fs(1.0 / self.decay_rate(gamma_ev))
    }

    /// 1/τ in atomic units.
    pub fn decay_rate(self, gamma_ev: f64) -> f64 {
        let gamma = ev_to_hartree(gamma_ev);
        match self {
            LifetimeConvention::HOverGamma => gamma / (2.0 * std::f64::consts::PI),
            LifetimeConvention::HbarOverGamma => gamma,
        }
    }
}

/// Per-state Auger population decay rates 1/τ_a.
pub fn build_auger(soc: &SocBasis, convention: LifetimeConvention) -> Result<Vec<f64>> {
    soc.auger_widths_ev()
        .iter()
        .enumerate()
        .map(|(a, &g)| {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("Auger width of state {a} is {g} eV")));
            }
            Ok(convention.decay_rate(g))
        })
        .collect()
}

/// Bloch tensor plus Auger decay, both in the SOC basis.
///
/// R_aa,cc = δ_ac K_a − k_{c→a} with K_a = Σ_e k_{a→e}; coherences dephase
/// at ½(K_a + K_b). Auger removes population at A_a and coherence at
/// ½(A_a + A_b).
#[derive(Clone, Debug)]
pub struct DissipationModel {
    rates: RateMatrix,
    incoming: RateMatrix,
    out_total: Vec<f64>,
    auger: Vec<f64>,
}

pub fn build_bloch(soc: &SocBasis, rates: RateMatrix) -> Result<DissipationModel> {
    if rates.n_states() != soc.n_states() {
        return Err(Error::Dimension {
            what: "rate matrix".into(),
            got: rates.n_states(),
            expected: soc.n_states(),
        });
    }
    Ok(DissipationModel::from_rates(rates))
}

impl DissipationModel {
    pub fn from_rates(rates: RateMatrix) -> Self {
        let n = rates.n_states();
        let out_total = (0..n).map(|a| rates.row(a).map(|(_, k)| k).sum()).collect();
        Self {
            incoming: rates.transpose(),
            rates,
            out_total,
            auger: vec![0.0; n],
        }
    }

    pub fn none(n: usize) -> Self {
        Self::from_rates(RateMatrix::empty(n))
    }

    pub fn with_auger(mut self, auger: Vec<f64>) -> Result<Self> {
        if auger.len() != self.n_states() {
            return Err(Error::Dimension {
                what: "Auger rates".into(),
                got: auger.len(),
                expected: self.n_states(),
            });
        }
        if let Some(a) = auger.iter().position(|&x| !(x >= 0.0)) {
            return Err(Error::invalid(format!("Auger rate of state {a} is negative")));
        }
        self.auger = auger;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.rates.n_states()
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    /// Row `a` lists (c, k_{c→a}).
    pub fn incoming(&self) -> &RateMatrix {
        &self.incoming
    }

    /// K_a = Σ_e k_{a→e}.
    pub fn out_total(&self) -> &[f64] {
        &self.out_total
    }

    pub fn population_element(&self, a: usize, c: usize) -> f64 {
        let diag = if a == c { self.out_total[a] } else { 0.0 };
        diag - self.rates.get(c, a)
    }

    pub fn dephasing(&self, a: usize, b: usize) -> f64 {
        0.5 * (self.out_total[a] + self.out_total[b])
    }

    pub fn auger_rates(&self) -> &[f64] {
        &self.auger
    }

    pub fn auger_dephasing(&self, a: usize, b: usize) -> f64 {
        0.5 * (self.auger[a] + self.auger[b])
    }

    /// States ordered by decreasing K_a (ties by index), first `k`.
    pub fn top_states_by_rate(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_states()).collect();
        idx.sort_by(|&a, &b| self.out_total[b].total_cmp(&self.out_total[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Counts of stored ħk_{a→b} (eV) per bin; bins are half-open except the last.
pub fn rate_histogram(model: &DissipationModel, bin_edges_ev: &[f64]) -> Result<Vec<u64>> {
    if bin_edges_ev.len() < 2 || bin_edges_ev.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("histogram edges must be at least two ascending values"));
    }
    let nb = bin_edges_ev.len() - 1;
    let mut counts = vec![0u64; nb];
    for (_, _, k) in model.rates().iter() {
        let e = hartree_to_ev(k);
        if e < bin_edges_ev[0] || e > bin_edges_ev[nb] {
            continue;
        }
        let i = bin_edges_ev.partition_point(|&edge| edge <= e).saturating_sub(1).min(nb - 1);
        counts[i] += 1;
    }
    Ok(counts)
}
