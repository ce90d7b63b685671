//! Two-mass flexible-joint plant lab.
//!
//! Provides everything needed to exercise the synthesis pipeline without
//! hardware: a continuous-time two-mass drivetrain model, exact
//! zero-order-hold discretisation, frequency responses of both velocity
//! channels, time-domain simulation, Schroeder multisine excitation and
//! periodic-averaging FRF estimation.
//!
//! The model is
//!
//! ```text
//! B  th'' + D_m th' + K (th - q) = tau_m        (motor side)
//! J  q''  + d_l q'  + K (q  - th) = tau_d        (load side)
//! ```
//!
//! with state `[th, th', q, q']`. Torque `tau_m` is the control input,
//! `tau_d` the load-side disturbance. The motor-torque to load-velocity
//! channel has no finite zeros (relative degree three); the anti-resonance
//! at `sqrt(K/J)` lives in the motor-velocity channel only, which is why
//! measurements carry an explicit channel tag.

use std::fmt;

use nalgebra::{Matrix4, SMatrix, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::frf::{Channel, FrequencyGrid, FrfDataset, FrfError};

#[derive(Debug)]
pub enum PlantError {
    /// Parameters violate positivity, ordering or sampling constraints.
    Invalid(String),
    /// A signal handed to estimation does not have the promised shape.
    Estimation(String),
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::Invalid(m) => write!(f, "invalid plant: {m}"),
            PlantError::Estimation(m) => write!(f, "estimation error: {m}"),
        }
    }
}

impl std::error::Error for PlantError {}

/// Physical parameters of one drivetrain configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMassParams {
    /// Motor-side inertia `B` in kg m^2.
    pub motor_inertia: f64,
    /// Motor-side viscous damping `D_m` in N m s/rad.
    pub motor_damping: f64,
    /// Load-side inertia `J` in kg m^2.
    pub link_inertia: f64,
    /// Load-side viscous damping `d_l` in N m s/rad.
    pub link_damping: f64,
    /// Joint stiffness `K` in N m/rad.
    pub stiffness: f64,
    /// Sample time in seconds.
    pub ts: f64,
}

/// A validated plant with its zero-order-hold discretisation cached.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMassPlant {
    params: TwoMassParams,
    a_d: Matrix4<f64>,
    b_u_d: Vector4<f64>,
    b_d_d: Vector4<f64>,
}

/// Time-domain record of one simulation run, sampled at the plant rate.
#[derive(Debug, Clone)]
pub struct SimRecord {
    pub ts: f64,
    pub motor_pos: Vec<f64>,
    pub motor_vel: Vec<f64>,
    pub link_pos: Vec<f64>,
    pub link_vel: Vec<f64>,
}

impl TwoMassPlant {
    pub fn new(params: TwoMassParams) -> Result<Self, PlantError> {
        let TwoMassParams {
            motor_inertia: b,
            motor_damping: dm,
            link_inertia: j,
            link_damping: dl,
            stiffness: k,
            ts,
        } = params;
        for (name, v) in [
            ("motor inertia", b),
            ("link inertia", j),
            ("stiffness", k),
            ("sample time", ts),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(PlantError::Invalid(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        for (name, v) in [("motor damping", dm), ("link damping", dl)] {
            if !v.is_finite() || v < 0.0 {
                return Err(PlantError::Invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        let w_res = (k * (b + j) / (b * j)).sqrt();
        let nyquist = std::f64::consts::PI / ts;
        if w_res >= nyquist {
            return Err(PlantError::Invalid(format!(
                "resonance {:.1} rad/s is at or above Nyquist {:.1} rad/s; \
                 shorten the sample time",
                w_res, nyquist
            )));
        }
        let (a, b_u, b_d) = continuous_matrices(&params);
        let (a_d, b_u_d, b_d_d) = zoh_discretise(&a, &b_u, &b_d, ts);
        Ok(TwoMassPlant {
            params,
            a_d,
            b_u_d,
            b_d_d,
        })
    }

    pub fn params(&self) -> &TwoMassParams {
        &self.params
    }

    pub fn ts(&self) -> f64 {
        self.params.ts
    }

    /// Resonant frequency `sqrt(K (B + J) / (B J))` in rad/s.
    pub fn resonance_rad_s(&self) -> f64 {
        let p = &self.params;
        (p.stiffness * (p.motor_inertia + p.link_inertia)
            / (p.motor_inertia * p.link_inertia))
            .sqrt()
    }

    /// Anti-resonant frequency `sqrt(K / J)` in rad/s. This is a zero of
    /// the motor-velocity channel; the load-velocity channel has no finite
    /// zeros at all.
    pub fn antiresonance_rad_s(&self) -> f64 {
        (self.params.stiffness / self.params.link_inertia).sqrt()
    }

    /// Continuous-time `(A, b_u, b_d)` with state `[th, th', q, q']`.
    pub fn continuous(&self) -> (Matrix4<f64>, Vector4<f64>, Vector4<f64>) {
        continuous_matrices(&self.params)
    }

    /// Cached zero-order-hold discretisation `(A_d, b_u, b_d)`.
    pub fn discrete(&self) -> (&Matrix4<f64>, &Vector4<f64>, &Vector4<f64>) {
        (&self.a_d, &self.b_u_d, &self.b_d_d)
    }

    /// Exact frequency response of the discretised plant on a grid, for
    /// the motor-torque input of the requested velocity channel.
    pub fn frf(&self, grid: &FrequencyGrid, channel: Channel) -> Vec<Complex64> {
        let a_c: Matrix4<Complex64> = self.a_d.map(|x| Complex64::new(x, 0.0));
        let b_c: Vector4<Complex64> = self.b_u_d.map(|x| Complex64::new(x, 0.0));
        let out_row = match channel {
            Channel::LoadVelocity => 3,
            Channel::MotorVelocity => 1,
        };
        grid.omega()
            .iter()
            .map(|&w| {
                let z = Complex64::new(0.0, w).exp();
                let m = Matrix4::<Complex64>::identity() * z - a_c;
                let x = m
                    .lu()
                    .solve(&b_c)
                    .expect("zI - A_d is singular only if A_d has an eigenvalue on the grid");
                x[out_row]
            })
            .collect()
    }

    /// Simulate the discrete plant from rest. `torque` and `disturbance`
    /// must have equal length; sample `k` of the record is the state
    /// before inputs `k` are applied.
    pub fn simulate(&self, torque: &[f64], disturbance: &[f64]) -> Result<SimRecord, PlantError> {
        if torque.len() != disturbance.len() {
            return Err(PlantError::Estimation(format!(
                "torque has {} samples, disturbance {}",
                torque.len(),
                disturbance.len()
            )));
        }
        let n = torque.len();
        let mut rec = SimRecord {
            ts: self.params.ts,
            motor_pos: Vec::with_capacity(n),
            motor_vel: Vec::with_capacity(n),
            link_pos: Vec::with_capacity(n),
            link_vel: Vec::with_capacity(n),
        };
        let mut x = Vector4::<f64>::zeros();
        for k in 0..n {
            rec.motor_pos.push(x[0]);
            rec.motor_vel.push(x[1]);
            rec.link_pos.push(x[2]);
            rec.link_vel.push(x[3]);
            x = self.a_d * x + self.b_u_d * torque[k] + self.b_d_d * disturbance[k];
        }
        Ok(rec)
    }
}

fn continuous_matrices(p: &TwoMassParams) -> (Matrix4<f64>, Vector4<f64>, Vector4<f64>) {
    let TwoMassParams {
        motor_inertia: b,
        motor_damping: dm,
        link_inertia: j,
        link_damping: dl,
        stiffness: k,
        ..
    } = *p;
    let a = Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -k / b, -dm / b, k / b, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        k / j, 0.0, -k / j, -dl / j,
    );
    let b_u = Vector4::new(0.0, 1.0 / b, 0.0, 0.0);
    let b_d = Vector4::new(0.0, 0.0, 0.0, 1.0 / j);
    (a, b_u, b_d)
}

/// Zero-order-hold discretisation through one augmented matrix
/// exponential: `exp([[A, B], [0, 0]] ts)` holds `A_d` and `B_d` in its
/// top blocks.
fn zoh_discretise(
    a: &Matrix4<f64>,
    b_u: &Vector4<f64>,
    b_d: &Vector4<f64>,
    ts: f64,
) -> (Matrix4<f64>, Vector4<f64>, Vector4<f64>) {
    let mut aug = SMatrix::<f64, 6, 6>::zeros();
    aug.fixed_view_mut::<4, 4>(0, 0).copy_from(a);
    aug.fixed_view_mut::<4, 1>(0, 4).copy_from(b_u);
    aug.fixed_view_mut::<4, 1>(0, 5).copy_from(b_d);
    let e = (aug * ts).exp();
    let a_d = e.fixed_view::<4, 4>(0, 0).into_owned();
    let b_u_d = e.fixed_view::<4, 1>(0, 4).into_owned();
    let b_d_d = e.fixed_view::<4, 1>(0, 5).into_owned();
    (a_d, b_u_d, b_d_d)
}

/// Ordered family of plants sharing every parameter except link inertia.
/// Link inertia is non-decreasing; equal values are allowed so degenerate
/// single-inertia joints can still form a bank.
#[derive(Debug, Clone)]
pub struct PlantBank {
    entries: Vec<(String, TwoMassPlant)>,
}

impl PlantBank {
    pub fn new(entries: Vec<(String, TwoMassPlant)>) -> Result<Self, PlantError> {
        if entries.is_empty() {
            return Err(PlantError::Invalid("plant bank is empty".into()));
        }
        let first = entries[0].1.params();
        for (i, (label, plant)) in entries.iter().enumerate() {
            if label.is_empty() {
                return Err(PlantError::Invalid(format!("entry {i} has an empty label")));
            }
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(PlantError::Invalid(format!("duplicate label {label:?}")));
            }
            let p = plant.params();
            if p.motor_inertia != first.motor_inertia
                || p.motor_damping != first.motor_damping
                || p.link_damping != first.link_damping
                || p.stiffness != first.stiffness
                || p.ts != first.ts
            {
                return Err(PlantError::Invalid(format!(
                    "entry {label:?} differs from the bank in a parameter other than link inertia"
                )));
            }
            if i > 0 && p.link_inertia < entries[i - 1].1.params().link_inertia {
                return Err(PlantError::Invalid(
                    "link inertias must be non-decreasing across the bank".into(),
                ));
            }
        }
        Ok(PlantBank { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn plants(&self) -> impl Iterator<Item = &TwoMassPlant> {
        self.entries.iter().map(|(_, p)| p)
    }

    pub fn get(&self, idx: usize) -> (&str, &TwoMassPlant) {
        let (l, p) = &self.entries[idx];
        (l.as_str(), p)
    }

    pub fn by_label(&self, label: &str) -> Option<&TwoMassPlant> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, p)| p)
    }

    /// Median-inertia plant (geometric middle of the ordered bank).
    pub fn median(&self) -> &TwoMassPlant {
        &self.entries[self.entries.len() / 2].1
    }

    /// Exact frequency responses for every configuration on a grid.
    pub fn to_dataset(&self, grid: &FrequencyGrid, channel: Channel) -> Result<FrfDataset, FrfError> {
        let configs = self
            .entries
            .iter()
            .map(|(label, plant)| (label.clone(), plant.frf(grid, channel)))
            .collect();
        FrfDataset::new(grid.clone(), channel, configs)
    }
}

/// Catalogued load-inertia ranges in kg m^2 for a seven-joint desk-scale
/// manipulator. Joints six and seven see essentially no payload leverage,
/// so their ranges are degenerate.
pub const JOINT_INERTIA_RANGES: [(f64, f64); 7] = [
    (0.03, 3.98),
    (0.01, 4.15),
    (0.014, 0.69),
    (0.50, 0.70),
    (0.008, 0.09),
    (0.07, 0.07),
    (0.0002, 0.0002),
];

/// Build a bank for one catalogue joint (1-based index) with `n_configs`
/// log-spaced link inertias across its range.
///
/// Remaining parameters are sized so every joint behaves like the same
/// desk-scale drivetrain around its median inertia `Jm = sqrt(Jmin Jmax)`:
/// motor inertia `B = Jm / 3`, stiffness placing the resonance at 15 Hz
/// for `Jm`, motor damping giving a 0.02 damping ratio of that mode, and
/// a small load damping sized against the minimum inertia. Sample rate is
/// 1 kHz.
pub fn joint_bank(joint: usize, n_configs: usize) -> Result<PlantBank, PlantError> {
    let (j_min, j_max) = *JOINT_INERTIA_RANGES
        .get(joint.wrapping_sub(1))
        .ok_or_else(|| PlantError::Invalid(format!("joint index {joint} outside 1..=7")))?;
    if n_configs == 0 {
        return Err(PlantError::Invalid("bank needs at least one configuration".into()));
    }
    let ts = 1e-3;
    let j_med = (j_min * j_max).sqrt();
    let b = j_med / 3.0;
    let w_res = 2.0 * std::f64::consts::PI * 15.0;
    let k = w_res * w_res * b * j_med / (b + j_med);
    // Damping ratio of the resonant mode from motor-side damping alone is
    // D_m J / (2 B (B + J) w_res); invert at the median for a 0.02 target.
    let dm = 0.02 * 2.0 * b * (b + j_med) * w_res / j_med;
    // Load-side damping sized for a 0.01 ratio of the load-spring mode at
    // the smallest inertia, so no configuration is razor sharp.
    let dl = 2.0 * 0.01 * (k * j_min).sqrt();
    let inertias: Vec<f64> = if j_min == j_max {
        vec![j_min; n_configs]
    } else if n_configs == 1 {
        vec![j_med]
    } else {
        let (ln_a, ln_b) = (j_min.ln(), j_max.ln());
        (0..n_configs)
            .map(|i| {
                let frac = i as f64 / (n_configs - 1) as f64;
                (ln_a + frac * (ln_b - ln_a)).exp()
            })
            .collect()
    };
    let entries = inertias
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let label = if inertias.len() > 1 && j_min == j_max {
                format!("J={j:.4}#{}", i + 1)
            } else {
                format!("J={j:.4}")
            };
            TwoMassPlant::new(TwoMassParams {
                motor_inertia: b,
                motor_damping: dm,
                link_inertia: j,
                link_damping: dl,
                stiffness: k,
                ts,
            })
            .map(|p| (label, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    PlantBank::new(entries)
}

/// One period of a Schroeder-phased multisine.
#[derive(Debug, Clone)]
pub struct ExcitationSignal {
    period: Vec<f64>,
    lines: Vec<usize>,
    ts: f64,
}

impl ExcitationSignal {
    pub fn period(&self) -> &[f64] {
        &self.period
    }

    pub fn period_length(&self) -> usize {
        self.period.len()
    }

    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Concatenate `periods` copies of the base period.
    pub fn tiled(&self, periods: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.period.len() * periods);
        for _ in 0..periods {
            out.extend_from_slice(&self.period);
        }
        out
    }
}

/// Multisine with Schroeder phases `phi_k = -pi k (k - 1) / L` over the
/// given DFT lines (`1 <= line`, `2 line < period_length`). `amplitude`
/// is the per-line cosine amplitude. Schroeder phasing keeps the crest
/// factor of consecutive-line signals below 3 (typically near 1.7), so
/// actuators see a benign peak for a given excitation power.
pub fn schroeder_multisine(
    period_length: usize,
    lines: &[usize],
    amplitude: f64,
    ts: f64,
) -> Result<ExcitationSignal, PlantError> {
    if period_length < 4 {
        return Err(PlantError::Invalid(format!(
            "period length {period_length} is too short"
        )));
    }
    if lines.is_empty() {
        return Err(PlantError::Invalid("no excitation lines given".into()));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) || !(ts.is_finite() && ts > 0.0) {
        return Err(PlantError::Invalid(format!(
            "amplitude {amplitude} and sample time {ts} must be finite and positive"
        )));
    }
    for (i, &line) in lines.iter().enumerate() {
        if line == 0 || 2 * line >= period_length {
            return Err(PlantError::Invalid(format!(
                "line {line} outside 1..{}",
                period_length / 2
            )));
        }
        if i > 0 && line <= lines[i - 1] {
            return Err(PlantError::Invalid(
                "lines must be strictly increasing".into(),
            ));
        }
    }
    let n = period_length as f64;
    let l = lines.len() as f64;
    let period = (0..period_length)
        .map(|t| {
            lines
                .iter()
                .enumerate()
                .map(|(i, &line)| {
                    let k = (i + 1) as f64;
                    let phase = -std::f64::consts::PI * k * (k - 1.0) / l;
                    amplitude
                        * (2.0 * std::f64::consts::PI * line as f64 * t as f64 / n + phase).cos()
                })
                .sum()
        })
        .collect();
    Ok(ExcitationSignal {
        period,
        lines: lines.to_vec(),
        ts,
    })
}

/// Peak magnitude over RMS.
pub fn crest_factor(samples: &[f64]) -> f64 {
    let peak = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let ms = samples.iter().map(|&x| x * x).sum::<f64>() / samples.len().max(1) as f64;
    peak / ms.sqrt()
}

/// FRF estimate at the excited lines of a periodic experiment.
#[derive(Debug, Clone)]
pub struct EstimatedFrf {
    pub grid: FrequencyGrid,
    pub response: Vec<Complex64>,
}

impl EstimatedFrf {
    pub fn into_dataset(self, label: &str, channel: Channel) -> Result<FrfDataset, FrfError> {
        FrfDataset::new(self.grid, channel, vec![(label.to_string(), self.response)])
    }
}

/// Estimate an FRF from a periodic record: drop exactly one period as
/// transient, then average `Y_k / U_k` over the remaining periods at each
/// excited line. Records must hold an integer number of periods.
pub fn estimate_frf(
    input: &[f64],
    output: &[f64],
    period_length: usize,
    periods: usize,
    lines: &[usize],
    ts: f64,
) -> Result<EstimatedFrf, PlantError> {
    if periods < 2 {
        return Err(PlantError::Estimation(format!(
            "need at least 2 periods (one is discarded as transient), got {periods}"
        )));
    }
    if input.len() != output.len() || input.len() != period_length * periods {
        return Err(PlantError::Estimation(format!(
            "record length {} (input) / {} (output) does not equal {period_length} x {periods}",
            input.len(),
            output.len()
        )));
    }
    if lines.is_empty() {
        return Err(PlantError::Estimation("no lines to estimate at".into()));
    }
    for (i, &line) in lines.iter().enumerate() {
        if line == 0 || 2 * line > period_length {
            return Err(PlantError::Estimation(format!(
                "line {line} outside 1..={}",
                period_length / 2
            )));
        }
        if i > 0 && line <= lines[i - 1] {
            return Err(PlantError::Estimation(
                "lines must be strictly increasing".into(),
            ));
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(period_length);
    let spectrum = |segment: &[f64]| -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = segment.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        buf
    };
    let mut acc = vec![Complex64::new(0.0, 0.0); lines.len()];
    for p in 1..periods {
        let seg = p * period_length..(p + 1) * period_length;
        let u = spectrum(&input[seg.clone()]);
        let y = spectrum(&output[seg]);
        for (slot, &line) in acc.iter_mut().zip(lines) {
            let u_k = u[line];
            if u_k.norm() < 1e-12 * (period_length as f64) {
                return Err(PlantError::Estimation(format!(
                    "input spectrum is empty at line {line}; cannot divide"
                )));
            }
            *slot += y[line] / u_k;
        }
    }
    let scale = 1.0 / (periods - 1) as f64;
    let response: Vec<Complex64> = acc.into_iter().map(|v| v * scale).collect();
    let omega: Vec<f64> = lines
        .iter()
        .map(|&k| 2.0 * std::f64::consts::PI * k as f64 / period_length as f64)
        .collect();
    let grid = FrequencyGrid::new(omega, ts)
        .map_err(|e| PlantError::Estimation(format!("line grid invalid: {e}")))?;
    Ok(EstimatedFrf { grid, response })
}

/// Seeded white Gaussian noise.
pub fn white_noise(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    (0..len).map(|_| dist.sample(&mut rng)).collect()
}
