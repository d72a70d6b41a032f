//! Small dense helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.norm()))
}

/// max |m_ij − m_ji| for a real matrix.
pub fn asymmetry(m: &RMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

/// max |m_ij − conj(m_ji)|.
pub fn anti_hermiticity(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Replace `m` by (m + m†)/2 in place.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}
