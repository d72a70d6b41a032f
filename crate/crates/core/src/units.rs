//! Physical constants and unit conversions.
//!
//! Everything inside the crate is in Hartree atomic units (ħ = e = mₑ = 1).
//! Conversions happen at the I/O boundary only.

use serde::Serialize;

/// eV per Hartree (CODATA 2018).
pub const HARTREE_EV: f64 = 27.211386245988;
/// Atomic units of time per femtosecond (CODATA 2018: 1 a.u. = 2.4188843265857e-17 s).
pub const AU_TIME_PER_FS: f64 = 1.0 / 0.024188843265857;
/// Boltzmann constant in Hartree per kelvin.
pub const KB_HARTREE_PER_K: f64 = 3.166811563e-6;
/// Hartree in cm⁻¹.
pub const HARTREE_CM1: f64 = 219474.6313632;
/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT_NM_PER_FS: f64 = 299.792458;
/// Planck constant in eV·fs.
pub const PLANCK_EV_FS: f64 = 4.135667696;
/// Reduced Planck constant in eV·fs.
pub const HBAR_EV_FS: f64 = 0.6582119569;
/// hc in eV·nm.
pub const HC_EV_NM: f64 = 1239.84198;

pub fn ev_to_hartree(e: f64) -> f64 {
    e / HARTREE_EV
}

pub fn hartree_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

pub fn fs_to_au(t: f64) -> f64 {
    t * AU_TIME_PER_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t / AU_TIME_PER_FS
}

pub fn cm1_to_hartree(w: f64) -> f64 {
    w / HARTREE_CM1
}

pub fn hartree_to_cm1(w: f64) -> f64 {
    w * HARTREE_CM1
}

/// k_B T in Hartree.
pub fn kt_hartree(temperature_k: f64) -> f64 {
    KB_HARTREE_PER_K * temperature_k
}

/// The constants table as written into run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub hartree_ev: f64,
    pub au_time_per_fs: f64,
    pub kb_hartree_per_k: f64,
    pub hartree_cm1: f64,
    pub speed_of_light_nm_per_fs: f64,
    pub planck_ev_fs: f64,
    pub hbar_ev_fs: f64,
    pub hc_ev_nm: f64,
}

pub fn constants_table() -> ConstantsTable {
    ConstantsTable {
        hartree_ev: HARTREE_EV,
        au_time_per_fs: AU_TIME_PER_FS,
        kb_hartree_per_k: KB_HARTREE_PER_K,
        hartree_cm1: HARTREE_CM1,
        speed_of_light_nm_per_fs: SPEED_OF_LIGHT_NM_PER_FS,
        planck_ev_fs: PLANCK_EV_FS,
        hbar_ev_fs: HBAR_EV_FS,
        hc_ev_nm: HC_EV_NM,
    }
}
