//! Driving fields: Gaussian pulse trains modelling high-harmonic output.
//!
//! E(t) = e Ẽ(t) cos(Ωt), Ẽ(t) = E₀ Σᵢ exp(−(t − tᵢ)²/(2σ²)), with the
//! carrier phase referenced to the global time origin.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_gauss_kronrod;
use crate::units::{ev_to_hartree, fs_to_au, HC_EV_NM, SPEED_OF_LIGHT_NM_PER_FS};

/// A scalar field amplitude along a fixed polarization, in atomic units.
pub trait Field: Send + Sync + fmt::Debug {
    fn amplitude(&self, t: f64) -> f64;
}

/// No field at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoField;

impl Field for NoField {
    fn amplitude(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Constant-envelope carrier E₀ cos(Ωt + φ).
#[derive(Debug, Clone, Copy)]
pub struct ContinuousWave {
    pub e0: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Field for ContinuousWave {
    fn amplitude(&self, t: f64) -> f64 {
        self.e0 * (self.omega * t + self.phase).cos()
    }
}

/// Subpulse width as a fraction of the driver optical period T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaFraction {
    Fourteenth,
    TwentyEighth,
    Custom(f64),
}

impl SigmaFraction {
    pub fn value(&self) -> f64 {
        match self {
            SigmaFraction::Fourteenth => 1.0 / 14.0,
            SigmaFraction::TwentyEighth => 1.0 / 28.0,
            SigmaFraction::Custom(x) => *x,
        }
    }
}

impl FromStr for SigmaFraction {
    type Err = Error;

    /// Accepts `1/14`, `1/28`, any `p/q` or a decimal.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("invalid sigma fraction '{s}'"));
        let value = match s.split_once('/') {
            Some((p, q)) => {
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                let q: f64 = q.trim().parse().map_err(|_| bad())?;
                match (p, q) {
                    (p, q) if p == 1.0 && q == 14.0 => return Ok(SigmaFraction::Fourteenth),
                    (p, q) if p == 1.0 && q == 28.0 => return Ok(SigmaFraction::TwentyEighth),
                    _ => p / q,
                }
            }
            None => s.parse::<f64>().map_err(|_| bad())?,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(bad());
        }
        Ok(SigmaFraction::Custom(value))
    }
}

impl fmt::Display for SigmaFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaFraction::Fourteenth => write!(f, "1/14"),
            SigmaFraction::TwentyEighth => write!(f, "1/28"),
            SigmaFraction::Custom(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for SigmaFraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SigmaFraction::Custom(x) => s.serialize_f64(*x),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for SigmaFraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x > 0.0 && x.is_finite() => Ok(SigmaFraction::Custom(x)),
            Raw::Num(x) => Err(serde::de::Error::custom(format!("invalid sigma fraction {x}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Pulse train in atomic units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub e0: f64,
    pub omega: f64,
    pub polarization: [f64; 3],
    pub sigma: f64,
    pub centers: Vec<f64>,
}

/// Spacing between subpulses (half the driver period), in fs.
pub fn subpulse_spacing_fs(driver_wavelength_nm: f64) -> f64 {
    0.5 * driver_wavelength_nm / SPEED_OF_LIGHT_NM_PER_FS
}

/// Build the train emitted by a driver of the given wavelength: centers every
/// T/2 starting at `t_first_fs`, σ = fraction · T.
pub fn make_train(
    driver_wavelength_nm: f64,
    n_pulses: usize,
    sigma_fraction: SigmaFraction,
    e0_au: f64,
    omega_ev: f64,
    polarization: [f64; 3],
    t_first_fs: f64,
) -> Result<PulseTrain> {
    if !(driver_wavelength_nm > 0.0) {
        return Err(Error::invalid(format!(
            "driver wavelength must be positive, got {driver_wavelength_nm} nm"
        )));
    }
    if n_pulses == 0 {
        return Err(Error::invalid("n_pulses must be at least 1"));
    }
    if !(sigma_fraction.value() > 0.0) {
        return Err(Error::invalid("sigma fraction must be positive"));
    }
    if !(e0_au >= 0.0) || !(omega_ev >= 0.0) || !t_first_fs.is_finite() {
        return Err(Error::invalid(format!(
            "E0 and Omega must be non-negative (E0 {e0_au} a.u., Omega {omega_ev} eV)"
        )));
    }
    let period_fs = driver_wavelength_nm / SPEED_OF_LIGHT_NM_PER_FS;
    let spacing = fs_to_au(0.5 * period_fs);
    let t0 = fs_to_au(t_first_fs);
    let train = PulseTrain {
        e0: e0_au,
        omega: ev_to_hartree(omega_ev),
        polarization: normalize(polarization)?,
        sigma: fs_to_au(sigma_fraction.value() * period_fs),
        centers: (0..n_pulses).map(|i| t0 + i as f64 * spacing).collect(),
    };
    Ok(train)
}

fn normalize(e: [f64; 3]) -> Result<[f64; 3]> {
    let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid(format!("polarization {e:?} has no direction")));
    }
    Ok([e[0] / norm, e[1] / norm, e[2] / norm])
}

impl PulseTrain {
    /// Arbitrary centers (strictly increasing, atomic units).
    pub fn new(e0: f64, omega: f64, polarization: [f64; 3], sigma: f64, centers: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        if centers.is_empty() || centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("pulse centers must be non-empty and strictly increasing"));
        }
        Ok(Self {
            e0,
            omega,
            polarization: normalize(polarization)?,
            sigma,
            centers,
        })
    }

    pub fn n_pulses(&self) -> usize {
        self.centers.len()
    }

    /// The same train with amplitude scaled to `e0`.
    pub fn with_amplitude(&self, e0: f64) -> Self {
        Self { e0, ..self.clone() }
    }

    /// Envelope Ẽ(t).
    pub fn envelope(&self, t: f64) -> f64 {
        let inv = 0.5 / (self.sigma * self.sigma);
        let sum: f64 = self
            .centers
            .iter()
            .map(|&c| {
                let d = t - c;
                (-d * d * inv).exp()
            })
            .sum();
        self.e0 * sum
    }

    /// Field vector E(t) in atomic units.
    pub fn field_at(&self, t: f64) -> [f64; 3] {
        let a = self.amplitude(t);
        let e = self.polarization;
        [e[0] * a, e[1] * a, e[2] * a]
    }

    /// Time after subpulse `i` (1-based) up to which its intensity is
    /// accumulated: the midpoint to the next subpulse, or `None` for the last.
    pub fn midpoint_after(&self, i: usize) -> Option<f64> {
        if i == 0 || i >= self.centers.len() {
            return None;
        }
        Some(0.5 * (self.centers[i - 1] + self.centers[i]))
    }

    /// ∫_{−∞}^{t_upper} Ẽ(t)² dt.
    pub fn integrated_intensity_until(&self, t_upper: f64) -> f64 {
        let lower = self.centers[0] - INTENSITY_TAIL * self.sigma;
        let upper = t_upper.min(self.centers[self.centers.len() - 1] + INTENSITY_TAIL * self.sigma);
        if upper <= lower {
            return 0.0;
        }
        // breakpoints at each center and ±3σ keep every panel resolved
        let mut points: Vec<f64> = self
            .centers
            .iter()
            .flat_map(|&c| [c - 3.0 * self.sigma, c, c + 3.0 * self.sigma])
            .filter(|&x| x > lower && x < upper)
            .collect();
        points.push(lower);
        points.push(upper);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let f = |t: f64| {
            let e = self.envelope(t);
            e * e
        };
        points
            .windows(2)
            .map(|w| adaptive_gauss_kronrod(&f, w[0], w[1], 1e-13, 0.0))
            .sum()
    }

    /// Integrated intensity envelope Iᵢ through the midpoint after subpulse
    /// `i` (1-based; the last pulse integrates to +∞).
    pub fn integrated_intensity(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.centers.len() {
            return Err(Error::invalid(format!(
                "subpulse index {i} outside 1..={}",
                self.centers.len()
            )));
        }
        let upper = self.midpoint_after(i).unwrap_or(f64::INFINITY);
        Ok(self.integrated_intensity_until(upper))
    }
}

/// Ẽ² is below f64 underflow this many σ away from the nearest center.
const INTENSITY_TAIL: f64 = 40.0;

impl Field for PulseTrain {
    fn amplitude(&self, t: f64) -> f64 {
        self.envelope(t) * (self.omega * t).cos()
    }
}

/// Odd harmonics n·hc/λ inside `[e_min_ev, e_max_ev]`.
pub fn hhg_comb(driver_wavelength_nm: f64, e_min_ev: f64, e_max_ev: f64) -> Result<Vec<f64>> {
    if !(driver_wavelength_nm > 0.0) {
        return Err(Error::invalid("driver wavelength must be positive"));
    }
    if !(e_max_ev > e_min_ev) || !e_min_ev.is_finite() || !e_max_ev.is_finite() {
        return Err(Error::invalid(format!("empty energy window [{e_min_ev}, {e_max_ev}] eV")));
    }
    let photon = HC_EV_NM / driver_wavelength_nm;
    let mut n = ((e_min_ev / photon).ceil().max(1.0)) as u64;
    if n % 2 == 0 {
        n += 1;
    }
    let mut out = Vec::new();
    loop {
        let e = n as f64 * photon;
        if e > e_max_ev {
            break;
        }
        if e >= e_min_ev {
            out.push(e);
        }
        n += 2;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::au_to_fs;
    use proptest::prelude::*;

    fn single(e0: f64, sigma: f64) -> PulseTrain {
        PulseTrain::new(e0, 0.0, [0.0, 0.0, 1.0], sigma, vec![0.0]).unwrap()
    }

    /// Closed form of ∫_{−∞}^{U} Ẽ² dt from pairwise Gaussian products.
    fn intensity_oracle(train: &PulseTrain, upper: f64) -> f64 {
        let s = train.sigma;
        let mut total = 0.0;
        for &a in &train.centers {
            for &b in &train.centers {
                let m = 0.5 * (a + b);
                let overlap = (-(a - b) * (a - b) / (4.0 * s * s)).exp();
                let tail = if upper.is_infinite() {
                    2.0
                } else {
                    libm::erfc((m - upper) / s)
                };
                total += overlap * 0.5 * s * std::f64::consts::PI.sqrt() * tail;
            }
        }
        train.e0 * train.e0 * total
    }

    #[test]
    fn table_spacings_and_widths() {
        let t = make_train(800.0, 3, SigmaFraction::Fourteenth, 1.0, 708.4, [0.0, 0.0, 1.0], 0.0).unwrap();
        let spacing = au_to_fs(t.centers[1] - t.centers[0]);
        assert_eq!(format!("{spacing:.2}"), "1.33");
        assert_eq!(format!("{:.3}", au_to_fs(t.sigma)), "0.191");
        let t = make_train(800.0, 1, SigmaFraction::TwentyEighth, 1.0, 708.4, [0.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(format!("{:.3}", au_to_fs(t.sigma)), "0.095");
        let t = make_train(2000.0, 2, SigmaFraction::Fourteenth, 1.0, 708.4, [1.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(format!("{:.2}", au_to_fs(t.centers[1] - t.centers[0])), "3.34");
        assert!((t.polarization[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_pulse_train() {
        let t = make_train(800.0, 1, SigmaFraction::Fourteenth, 0.3, 708.4, [0.0, 0.0, 1.0], 2.5).unwrap();
        assert_eq!(t.centers, vec![fs_to_au(2.5)]);
        assert!(make_train(800.0, 0, SigmaFraction::Fourteenth, 0.3, 708.4, [0.0, 0.0, 1.0], 0.0).is_err());
        assert!(make_train(-1.0, 1, SigmaFraction::Fourteenth, 0.3, 708.4, [0.0, 0.0, 1.0], 0.0).is_err());
        assert!(make_train(800.0, 1, SigmaFraction::Fourteenth, 0.3, 708.4, [0.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn peak_field_equals_amplitude() {
        let t = PulseTrain::new(0.7, 2.0 * std::f64::consts::PI / 5.0, [0.0, 1.0, 0.0], 3.0, vec![5.0]).unwrap();
        let f = t.field_at(5.0);
        assert!((f[1] - 0.7).abs() < 1e-15);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn midpoint_between_two_pulses() {
        let (s, dt) = (2.0, 7.0);
        let t = PulseTrain::new(1.3, 0.0, [0.0, 0.0, 1.0], s, vec![0.0, dt]).unwrap();
        let expect = 2.0 * 1.3 * (-(dt / 2.0) * (dt / 2.0) / (2.0 * s * s)).exp();
        assert!((t.envelope(dt / 2.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn four_hundred_nm_period_structure() {
        let t = make_train(400.0, 4, SigmaFraction::Fourteenth, 1.0, 708.4, [0.0, 0.0, 1.0], 1.0).unwrap();
        for w in t.centers.windows(2) {
            assert_eq!(format!("{:.2}", au_to_fs(w[1] - w[0])), "0.67");
        }
        // envelope maxima sit on the centers
        for &c in &t.centers {
            assert!(t.envelope(c) > t.envelope(c + 0.3 * t.sigma));
        }
    }

    #[test]
    fn intensity_of_isolated_pulse() {
        let t = single(0.8, 4.0);
        let exact = 0.8 * 0.8 * 4.0 * std::f64::consts::PI.sqrt();
        let got = t.integrated_intensity(1).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-10);
        assert!(t.integrated_intensity(0).is_err());
        assert!(t.integrated_intensity(2).is_err());
    }

    #[test]
    fn intensity_of_separated_pulses_is_additive() {
        let single_val = single(1.0, 1.0).integrated_intensity(1).unwrap();
        let t = PulseTrain::new(1.0, 0.0, [0.0, 0.0, 1.0], 1.0, vec![0.0, 100.0]).unwrap();
        let i1 = t.integrated_intensity(1).unwrap();
        let i2 = t.integrated_intensity(2).unwrap();
        assert!(((i1 - single_val) / single_val).abs() < 1e-9);
        assert!(((i2 - 2.0 * single_val) / single_val).abs() < 1e-9);
    }

    #[test]
    fn intensity_matches_closed_form_for_overlapping_train() {
        let t = make_train(800.0, 6, SigmaFraction::Custom(0.3), 2.5, 708.4, [0.0, 0.0, 1.0], 0.5).unwrap();
        let mut prev = 0.0;
        for i in 1..=6 {
            let got = t.integrated_intensity(i).unwrap();
            let upper = t.midpoint_after(i).unwrap_or(f64::INFINITY);
            let exact = intensity_oracle(&t, upper);
            assert!(((got - exact) / exact).abs() < 1e-10, "i={i} {got} {exact}");
            assert!(got > prev);
            prev = got;
        }
    }

    #[test]
    fn comb_lines() {
        let lines = hhg_comb(800.0, 707.0, 713.0).unwrap();
        assert!(!lines.is_empty());
        for e in &lines {
            let n = e / (HC_EV_NM / 800.0);
            assert!((n.round() - n).abs() < 1e-9 && n.round() as u64 % 2 == 1);
            assert!((e - 708.4).abs() > 1e-3);
        }
        let one = hhg_comb(HC_EV_NM, 0.5, 1.5).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0] - 1.0).abs() < 1e-12);
        assert!(hhg_comb(800.0, 0.1, 1.0).unwrap().is_empty());
        assert!(hhg_comb(800.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn sigma_fraction_parsing() {
        assert_eq!("1/14".parse::<SigmaFraction>().unwrap(), SigmaFraction::Fourteenth);
        assert_eq!("1/28".parse::<SigmaFraction>().unwrap(), SigmaFraction::TwentyEighth);
        assert_eq!("1/7".parse::<SigmaFraction>().unwrap(), SigmaFraction::Custom(1.0 / 7.0));
        assert!("-1/7".parse::<SigmaFraction>().is_err());
        let v: SigmaFraction = serde_json::from_str("\"1/28\"").unwrap();
        assert_eq!(v, SigmaFraction::TwentyEighth);
        let v: SigmaFraction = serde_json::from_str("0.05").unwrap();
        assert_eq!(v, SigmaFraction::Custom(0.05));
    }

    proptest! {
        #[test]
        fn envelope_is_symmetric(delta in -30.0f64..30.0, s in 0.5f64..5.0) {
            let t = PulseTrain::new(1.0, 0.0, [1.0, 0.0, 0.0], s, vec![3.0]).unwrap();
            let (l, r) = (t.envelope(3.0 - delta), t.envelope(3.0 + delta));
            prop_assert!((l - r).abs() <= 1e-12 * l.max(r) + 1e-300);
        }

        #[test]
        fn amplitude_scaling(scale in 0.1f64..10.0, t in -5.0f64..20.0) {
            let base = make_train(800.0, 4, SigmaFraction::Fourteenth, 0.25, 708.4, [0.0, 0.0, 1.0], 0.2).unwrap();
            let scaled = base.with_amplitude(0.25 * scale);
            let f0 = base.field_at(t)[2];
            let f1 = scaled.field_at(t)[2];
            prop_assert!((f1 - scale * f0).abs() <= 1e-12 * f0.abs().max(1e-300));
            let i0 = base.integrated_intensity(2).unwrap();
            let i1 = scaled.integrated_intensity(2).unwrap();
            prop_assert!((i1 / i0 - scale * scale).abs() < 1e-9 * scale * scale);
        }
    }
}
