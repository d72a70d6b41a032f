//! `SPINDYN-ES v1` text format.
//!
//! ```text
//! SPINDYN-ES v1
//! n_states 2
//! [units] energy=ev dipole=au
//! [energies]
//! 0.0 1.0
//! [dipole_z]
//! 0 1
//! 1 0
//! [spin_labels]
//! 2 0
//! 2 0
//! [class_labels]
//! valence core
//! [edge_labels]
//! none L3
//! ```
//!
//! Matrices are whitespace-separated row-major dumps; `#` starts a comment.
//! Either `[energies]` or `[h_ci]` must be present. SOC and dipole sections
//! default to zero and edge labels default to `none`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textfmt::{fmt17, Parser};
use crate::linalg::{CMatrix, RMatrix};
use crate::units::HARTREE_EV;

use super::{Edge, ElectronicStructure, SfLabel, SpinLabel, StateClass};

const MAGIC: &str = "SPINDYN-ES v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyUnit {
    Hartree,
    Ev,
}

impl EnergyUnit {
    fn to_hartree(self) -> f64 {
        match self {
            EnergyUnit::Hartree => 1.0,
            EnergyUnit::Ev => 1.0 / HARTREE_EV,
        }
    }
}

/// Parse a structure file. `source` names the input in error messages.
pub fn parse_structure(text: &str, source: &str) -> Result<ElectronicStructure> {
    let p = Parser { source };
    let (n, l2, sections) = p.split(text, MAGIC, "n_states")?;

    const KNOWN: [&str; 12] = [
        "units",
        "energies",
        "h_ci",
        "v_soc_real",
        "v_soc_imag",
        "dipole_x",
        "dipole_y",
        "dipole_z",
        "spin_labels",
        "class_labels",
        "edge_labels",
        "comment",
    ];
    if let Some(s) = sections.iter().find(|s| !KNOWN.contains(&s.name.as_str())) {
        return Err(p.err(s.line, &s.name, "unknown section"));
    }
    let get = |name: &str| sections.iter().find(|s| s.name == name);

    let mut unit = EnergyUnit::Hartree;
    if let Some(sec) = get("units") {
        for t in &sec.tokens {
            match t.text.split_once('=') {
                Some(("energy", "hartree")) => unit = EnergyUnit::Hartree,
                Some(("energy", "ev")) => unit = EnergyUnit::Ev,
                Some(("dipole", "au")) => {}
                _ => return Err(p.err(t.line, "units", format!("unsupported unit '{}'", t.text))),
            }
        }
    }
    let scale = unit.to_hartree();

    let h_ci = match (get("energies"), get("h_ci")) {
        (Some(_), Some(s)) => {
            return Err(p.err(s.line, "h_ci", "give either [energies] or [h_ci], not both"))
        }
        (Some(s), None) => {
            let e = p.numbers(s, n)?;
            RMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, e.iter().map(|x| x * scale)))
        }
        (None, Some(s)) => p.matrix(s, n)? * scale,
        (None, None) => return Err(p.err(l2, "h_ci", "missing [energies] or [h_ci]")),
    };

    let mut v_soc = CMatrix::zeros(n, n);
    if let Some(s) = get("v_soc_real") {
        let re = p.matrix(s, n)?;
        v_soc.zip_apply(&re, |z, r| z.re = r * scale);
    }
    if let Some(s) = get("v_soc_imag") {
        let im = p.matrix(s, n)?;
        v_soc.zip_apply(&im, |z, i| z.im = i * scale);
    }

    let dipole = |name: &str| -> Result<RMatrix> {
        match get(name) {
            Some(s) => p.matrix(s, n),
            None => Ok(RMatrix::zeros(n, n)),
        }
    };
    let dipoles = [dipole("dipole_x")?, dipole("dipole_y")?, dipole("dipole_z")?];

    let spin_sec = get("spin_labels").ok_or_else(|| p.err(l2, "spin_labels", "missing section"))?;
    let spins = p.numbers(spin_sec, 2 * n)?;
    let class_sec = get("class_labels").ok_or_else(|| p.err(l2, "class_labels", "missing section"))?;
    if class_sec.tokens.len() != n {
        return Err(p.err(
            class_sec.line,
            "class_labels",
            format!("expected {n} labels, found {}", class_sec.tokens.len()),
        ));
    }
    let edges: Vec<Edge> = match get("edge_labels") {
        Some(sec) => {
            if sec.tokens.len() != n {
                return Err(p.err(
                    sec.line,
                    "edge_labels",
                    format!("expected {n} labels, found {}", sec.tokens.len()),
                ));
            }
            sec.tokens
                .iter()
                .map(|t| match t.text {
                    "none" => Ok(Edge::None),
                    "L3" => Ok(Edge::L3),
                    "L2" => Ok(Edge::L2),
                    other => Err(p.err(t.line, "edge_labels", format!("unknown edge '{other}'"))),
                })
                .collect::<Result<_>>()?
        }
        None => vec![Edge::None; n],
    };

    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let t = &spin_sec.tokens[2 * k];
        let spin = SpinLabel::from_values(spins[2 * k], spins[2 * k + 1])
            .map_err(|e| p.err(t.line, "spin_labels", format!("state {k}: {e}")))?;
        let ct = &class_sec.tokens[k];
        let class = match ct.text {
            "valence" => StateClass::Valence,
            "core" => StateClass::Core,
            other => return Err(p.err(ct.line, "class_labels", format!("unknown class '{other}'"))),
        };
        labels.push(SfLabel {
            spin,
            class,
            edge: edges[k],
        });
    }

    ElectronicStructure::new(h_ci, v_soc, dipoles, labels)
}

/// Read and validate a structure file.
pub fn load_structure(path: impl AsRef<Path>) -> Result<ElectronicStructure> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_structure(&text, &path.display().to_string())
}

fn push_row_major(out: &mut String, name: &str, n: usize, value: impl Fn(usize, usize) -> f64) {
    writeln!(out, "[{name}]").unwrap();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt17(value(i, j))).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

/// Serialize in Hartree. Sections that are identically zero are omitted.
pub fn write_structure(es: &ElectronicStructure) -> String {
    let n = es.n_states();
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "n_states {n}").unwrap();
    writeln!(out, "[units] energy=hartree dipole=au").unwrap();
    if es.is_diagonal() {
        writeln!(out, "[energies]").unwrap();
        let e: Vec<String> = es.sf_energies().into_iter().map(fmt17).collect();
        writeln!(out, "{}", e.join(" ")).unwrap();
    } else {
        push_row_major(&mut out, "h_ci", n, |i, j| es.h_ci()[(i, j)]);
    }
    let v = es.v_soc();
    if v.iter().any(|z| z.re != 0.0) {
        push_row_major(&mut out, "v_soc_real", n, |i, j| v[(i, j)].re);
    }
    if v.iter().any(|z| z.im != 0.0) {
        push_row_major(&mut out, "v_soc_imag", n, |i, j| v[(i, j)].im);
    }
    for (d, name) in es.dipoles().iter().zip(["dipole_x", "dipole_y", "dipole_z"]) {
        if d.iter().any(|&x| x != 0.0) {
            push_row_major(&mut out, name, n, |i, j| d[(i, j)]);
        }
    }
    writeln!(out, "[spin_labels]").unwrap();
    for l in es.labels() {
        writeln!(out, "{} {}", l.spin.s(), l.spin.ms()).unwrap();
    }
    writeln!(out, "[class_labels]").unwrap();
    for l in es.labels() {
        let c = match l.class {
            StateClass::Valence => "valence",
            StateClass::Core => "core",
        };
        writeln!(out, "{c}").unwrap();
    }
    writeln!(out, "[edge_labels]").unwrap();
    for l in es.labels() {
        let e = match l.edge {
            Edge::None => "none",
            Edge::L3 => "L3",
            Edge::L2 => "L2",
        };
        writeln!(out, "{e}").unwrap();
    }
    out
}
