//! Embedded Runge–Kutta–Fehlberg 4(5) with max-norm error control and cubic
//! Hermite dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitize, CMatrix, C64};
use crate::units::fs_to_au;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Atomic time units.
    #[serde(rename = "h_init_au")]
    pub h_init: f64,
    #[serde(rename = "h_min_au")]
    pub h_min: f64,
    #[serde(rename = "h_max_au")]
    pub h_max: f64,
    /// Output stride in fs.
    pub record_every_fs: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_init: 0.01,
            h_min: 1e-8,
            h_max: 1.0,
            record_every_fs: 0.05,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.h_min > 0.0
            && self.h_min <= self.h_init
            && self.h_init <= self.h_max
            && self.h_max.is_finite()
            && self.record_every_fs > 0.0
            && self.record_every_fs.is_finite();
        if !ok {
            return Err(Error::invalid(format!(
                "integrator settings need tolerances > 0, 0 < h_min <= h_init <= h_max and record_every > 0 ({self:?})"
            )));
        }
        Ok(())
    }
}

/// Accepted/rejected step counts and the step-size history.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub h_min_accepted: f64,
    pub h_max_accepted: f64,
    /// (t at step start, h) in atomic units, one entry per accepted step.
    pub history: Vec<(f64, f64)>,
}

impl StepStats {
    /// Smallest accepted step whose start lies in [t_a, t_b).
    pub fn min_step_in(&self, t_a: f64, t_b: f64) -> Option<f64> {
        self.history
            .iter()
            .filter(|(t, _)| *t >= t_a && *t < t_b)
            .map(|&(_, h)| h)
            .reduce(f64::min)
    }
}

const A2: f64 = 1.0 / 4.0;
const A3: [f64; 2] = [3.0 / 32.0, 9.0 / 32.0];
const A4: [f64; 3] = [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0];
const A5: [f64; 4] = [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0];
const A6: [f64; 5] = [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0];
const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

const SAFETY: f64 = 0.9;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 5.0;
/// Diagonal entries in (−CLIP, 0) are set to zero after each accepted step.
const CLIP: f64 = 1e-12;

fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// y ← y0 + h Σ cᵢ kᵢ.
fn combine(out: &mut CMatrix, y0: &CMatrix, h: f64, coeffs: &[f64], ks: &[CMatrix]) {
    out.copy_from(y0);
    accumulate(out, h, coeffs, ks);
}

fn accumulate(out: &mut CMatrix, h: f64, coeffs: &[f64], ks: &[CMatrix]) {
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            out.zip_apply(k, |o, kv| *o += kv * (h * c));
        }
    }
}

fn hermite(out: &mut CMatrix, s: f64, h: f64, y0: &CMatrix, f0: &CMatrix, y1: &CMatrix, f1: &CMatrix) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = (s3 - 2.0 * s2 + s) * h;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = (s3 - s2) * h;
    for (i, o) in out.iter_mut().enumerate() {
        *o = y0[i] * h00 + f0[i] * h10 + y1[i] * h01 + f1[i] * h11;
    }
}

fn project(y: &mut CMatrix) {
    hermitize(y);
    for a in 0..y.nrows() {
        let d = y[(a, a)].re;
        if d < 0.0 && d > -CLIP {
            y[(a, a)] = C64::new(0.0, 0.0);
        }
    }
}

/// Output instants: t0, t0 + Δ, …, and t1.
pub fn output_times(t0: f64, t1: f64, record_every_fs: f64) -> Vec<f64> {
    let dt = fs_to_au(record_every_fs);
    let mut out = vec![t0];
    let mut k = 1.0;
    loop {
        let t = t0 + k * dt;
        // avoid an almost-duplicate sample just before t1
        if t >= t1 - 1e-9 * dt {
            break;
        }
        out.push(t);
        k += 1.0;
    }
    if t1 > t0 {
        out.push(t1);
    }
    out
}

/// Integrate dy/dt = f(t, y) from t0 to t1, calling `on_output` at each of
/// `outputs` (ascending, within [t0, t1]) with the interpolated state.
///
/// Steps advance with the fifth-order solution. Each accepted state is made
/// Hermitian and tiny negative diagonal entries are clipped to zero.
pub fn integrate<F, O>(
    mut f: F,
    y0: &CMatrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    outputs: &[f64],
    mut on_output: O,
) -> Result<(CMatrix, StepStats)>
where
    F: FnMut(f64, &CMatrix, &mut CMatrix),
    O: FnMut(f64, &CMatrix) -> Result<()>,
{
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(Error::invalid(format!("end time {t1} must exceed start time {t0}")));
    }
    let (r, c) = y0.shape();
    let zeros = || CMatrix::zeros(r, c);
    let mut ks: Vec<CMatrix> = (0..6).map(|_| zeros()).collect();
    let mut stage = zeros();
    let mut y_new = zeros();
    let mut f_new = zeros();
    let mut err_m = zeros();
    let mut dense = zeros();

    let mut y = y0.clone();
    project(&mut y);
    let mut stats = StepStats {
        h_min_accepted: f64::INFINITY,
        h_max_accepted: 0.0,
        ..StepStats::default()
    };
    f(t0, &y, &mut ks[0]);
    stats.rhs_evals += 1;

    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        on_output(outputs[next_out], &y)?;
        next_out += 1;
    }

    let mut t = t0;
    let mut h = cfg.h_init.min(t1 - t0);
    let err_coeffs: [f64; 6] = std::array::from_fn(|i| B5[i] - B4[i]);
    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        // stages 2..6
        let rows: [&[f64]; 5] = [&[A2], &A3, &A4, &A5, &A6];
        for (s, coeffs) in rows.iter().enumerate() {
            let (done, rest) = ks.split_at_mut(s + 1);
            combine(&mut stage, &y, h, coeffs, done);
            f(t + C[s + 1] * h, &stage, &mut rest[0]);
        }
        stats.rhs_evals += 5;
        combine(&mut y_new, &y, h, &B5, &ks);
        err_m.fill(C64::new(0.0, 0.0));
        accumulate(&mut err_m, h, &err_coeffs, &ks);
        let scale = cfg.abs_tol + cfg.rel_tol * max_norm(&y).max(max_norm(&y_new));
        let err = max_norm(&err_m) / scale;
        if !err.is_finite() || y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { t, h });
        }
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            project(&mut y_new);
            f(t_new, &y_new, &mut f_new);
            stats.rhs_evals += 1;
            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let to = outputs[next_out];
                if to == t_new {
                    on_output(to, &y_new)?;
                } else {
                    hermite(&mut dense, (to - t) / (t_new - t), t_new - t, &y, &ks[0], &y_new, &f_new);
                    on_output(to, &dense)?;
                }
                next_out += 1;
            }
            stats.accepted += 1;
            stats.h_min_accepted = stats.h_min_accepted.min(h);
            stats.h_max_accepted = stats.h_max_accepted.max(h);
            stats.history.push((t, h));
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut ks[0], &mut f_new);
            let factor = if err == 0.0 {
                FACTOR_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, FACTOR_MAX)
            };
            h = (h * factor).clamp(cfg.h_min, cfg.h_max);
        } else {
            stats.rejected += 1;
            if h <= cfg.h_min {
                return Err(Error::StepUnderflow {
                    t,
                    h,
                    h_min: cfg.h_min,
                    err,
                });
            }
            let factor = (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, 1.0);
            h = (h * factor).max(cfg.h_min);
        }
    }
    if stats.accepted == 0 {
        stats.h_min_accepted = 0.0;
    }
    Ok((y, stats))
}
