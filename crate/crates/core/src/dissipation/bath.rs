//! Vibrational bath and the `SPINDYN-BATH v1` text format.
//!
//! ```text
//! SPINDYN-BATH v1
//! n_modes 2
//! [frequencies_cm1] 228 417
//! [gamma_cm1] 500
//! [temperature_K] 300
//! [couplings]        # n_states x n_modes, row-major
//! 0.0 0.0
//! 0.3 0.8
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::textfmt::{fmt17, Parser};
use crate::units::cm1_to_hartree;

const MAGIC: &str = "SPINDYN-BATH v1";

/// Shifted-oscillator bath: modes ω_ξ, SF-state shifts g_{0n,ξ}, global
/// width γ and temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct VibrationalBath {
    frequencies_cm1: Vec<f64>,
    couplings: RMatrix,
    gamma_cm1: f64,
    temperature_k: f64,
}

impl VibrationalBath {
    /// `couplings` is n_states × n_modes.
    pub fn new(frequencies_cm1: Vec<f64>, couplings: RMatrix, gamma_cm1: f64, temperature_k: f64) -> Result<Self> {
        if frequencies_cm1.is_empty() {
            return Err(Error::invalid("bath needs at least one mode"));
        }
        if let Some(w) = frequencies_cm1.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("mode frequency {w} cm-1 must be positive")));
        }
        if !(gamma_cm1 > 0.0 && gamma_cm1.is_finite()) {
            return Err(Error::invalid(format!("bath width {gamma_cm1} cm-1 must be positive")));
        }
        if !(temperature_k >= 0.0 && temperature_k.is_finite()) {
            return Err(Error::invalid(format!("temperature {temperature_k} K must be non-negative")));
        }
        if couplings.ncols() != frequencies_cm1.len() {
            return Err(Error::Dimension {
                what: "bath coupling columns".into(),
                got: couplings.ncols(),
                expected: frequencies_cm1.len(),
            });
        }
        if couplings.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("bath couplings must be finite"));
        }
        Ok(Self {
            frequencies_cm1,
            couplings,
            gamma_cm1,
            temperature_k,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies_cm1.len()
    }

    pub fn n_states(&self) -> usize {
        self.couplings.nrows()
    }

    pub fn frequencies_cm1(&self) -> &[f64] {
        &self.frequencies_cm1
    }

    /// Mode frequencies in Hartree.
    pub fn frequencies(&self) -> Vec<f64> {
        self.frequencies_cm1.iter().map(|&w| cm1_to_hartree(w)).collect()
    }

    /// g_{0n,ξ}, n_states × n_modes.
    pub fn couplings(&self) -> &RMatrix {
        &self.couplings
    }

    pub fn gamma_cm1(&self) -> f64 {
        self.gamma_cm1
    }

    /// γ in Hartree.
    pub fn gamma(&self) -> f64 {
        cm1_to_hartree(self.gamma_cm1)
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn with_temperature(&self, temperature_k: f64) -> Result<Self> {
        Self::new(
            self.frequencies_cm1.clone(),
            self.couplings.clone(),
            self.gamma_cm1,
            temperature_k,
        )
    }

    /// Huang–Rhys factors S_{0n,ξ} = g²/2.
    pub fn huang_rhys(&self) -> RMatrix {
        self.couplings.map(|g| 0.5 * g * g)
    }
}

/// Parse a bath file. The number of coupling rows fixes n_states.
pub fn parse_bath(text: &str, source: &str) -> Result<VibrationalBath> {
    let p = Parser { source };
    let (m, count_line, sections) = p.split(text, MAGIC, "n_modes")?;
    const KNOWN: [&str; 5] = ["frequencies_cm1", "gamma_cm1", "temperature_K", "couplings", "comment"];
    if let Some(s) = sections.iter().find(|s| !KNOWN.contains(&s.name.as_str())) {
        return Err(p.err(s.line, &s.name, "unknown section"));
    }
    let get = |name: &str| {
        sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| p.err(count_line, name, format!("missing [{name}] section")))
    };
    let freqs = p.numbers(get("frequencies_cm1")?, m)?;
    let gamma = p.numbers(get("gamma_cm1")?, 1)?[0];
    let temperature = p.numbers(get("temperature_K")?, 1)?[0];
    let sec = get("couplings")?;
    if sec.tokens.is_empty() || sec.tokens.len() % m != 0 {
        return Err(p.err(
            sec.line,
            "couplings",
            format!("{} values is not a multiple of n_modes = {m}", sec.tokens.len()),
        ));
    }
    let n = sec.tokens.len() / m;
    let g = p.numbers(sec, n * m)?;
    VibrationalBath::new(freqs, RMatrix::from_row_slice(n, m, &g), gamma, temperature)
}

pub fn load_bath(path: impl AsRef<Path>) -> Result<VibrationalBath> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bath(&text, &path.display().to_string())
}

pub fn write_bath(bath: &VibrationalBath) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "n_modes {}", bath.n_modes()).unwrap();
    let freqs: Vec<String> = bath.frequencies_cm1.iter().map(|&w| fmt17(w)).collect();
    writeln!(out, "[frequencies_cm1]\n{}", freqs.join(" ")).unwrap();
    writeln!(out, "[gamma_cm1]\n{}", fmt17(bath.gamma_cm1)).unwrap();
    writeln!(out, "[temperature_K]\n{}", fmt17(bath.temperature_k)).unwrap();
    writeln!(out, "[couplings]").unwrap();
    for row in bath.couplings.row_iter() {
        let r: Vec<String> = row.iter().map(|&g| fmt17(g)).collect();
        writeln!(out, "{}", r.join(" ")).unwrap();
    }
    out
}
