//! Winding-number computation and a-posteriori closed-loop stability
//! certification.
//!
//! The synthesis loop never computes closed-loop poles — with measured
//! FRF data there are none to compute. Stability is instead certified
//! through the argument principle: the winding number of the
//! characteristic response `P = D + G N` around the origin, taken along
//! the unit circle, counts closed-loop poles inside the circle; it must
//! match the anchor value of the open-loop-stable starting point, and the
//! per-iteration positivity guards `2 Re(Pc* P) > 0` prove that no
//! iteration step can have moved a pole across the boundary (the segment
//! between two responses sharing a half-plane cannot pass through the
//! origin). The certificate re-scans that chain on the final data,
//! recomputes the windings directly, and cross-checks the controller
//! denominator's roots.
//!
//! All windings are computed from samples on `(0, pi]` closed by
//! conjugate symmetry — real-coefficient systems need only half the
//! circle.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convexify::SynthesisResult;
use crate::frf::FrfDataset;
use crate::synth::{eval_poly, ControllerParams};

/// Samples closer to the origin than this are treated as "the plot
/// passes through the origin" — no winding is defined there.
pub const ORIGIN_TOL: f64 = 1e-12;

/// Phase increment between consecutive grid samples above which the
/// sampled winding number cannot be trusted (aliased grid).
pub const MAX_ARG_STEP: f64 = std::f64::consts::FRAC_PI_2;

/// Roots of the controller denominator this close to the unit circle
/// cannot be classified as inside/outside.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug)]
pub enum StabilityError {
    Invalid(String),
    /// A sampled response touches the origin; the winding number is
    /// undefined there.
    OriginContact(String),
    /// Consecutive samples differ in phase by too much for the winding
    /// count to be trustworthy; a denser grid is required.
    Aliased(String),
    /// A denominator root sits on (or within tolerance of) the unit
    /// circle; inside/outside cannot be decided.
    BoundaryRoot(String),
}

impl fmt::Display for StabilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityError::Invalid(m) => write!(f, "invalid certification input: {m}"),
            StabilityError::OriginContact(m) => write!(f, "plot passes through origin: {m}"),
            StabilityError::Aliased(m) => write!(f, "grid too sparse for winding count: {m}"),
            StabilityError::BoundaryRoot(m) => write!(f, "root on stability boundary: {m}"),
        }
    }
}

impl std::error::Error for StabilityError {}

/// Winding count of a conjugate-closed contour, with the bookkeeping
/// needed to judge whether the count can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    /// Counterclockwise encirclements of the origin.
    pub turns: i64,
    /// Accumulated phase minus `2 pi turns`; floating-point noise only
    /// for a valid polygon.
    pub residue: f64,
    /// Largest phase increment between consecutive measured samples.
    pub max_step: f64,
    /// Largest phase increment across the two conjugate-closure hops
    /// (through the Nyquist point and through DC).
    pub max_closure_step: f64,
}

/// Winding number of the closed contour obtained by mirroring samples on
/// `omega in (0, pi]` through conjugate symmetry: the path runs through
/// the samples, crosses the real axis at Nyquist, returns through the
/// conjugated samples and closes across DC. Phase is accumulated as the
/// principal argument of consecutive-sample ratios, which is exact for
/// the sampled polygon as long as no step reaches a half turn.
pub fn winding_number(samples: &[Complex64]) -> Result<Winding, StabilityError> {
    if samples.is_empty() {
        return Err(StabilityError::Invalid(
            "winding number of an empty sample set".into(),
        ));
    }
    for (i, v) in samples.iter().enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(StabilityError::Invalid(format!(
                "non-finite sample at index {i}"
            )));
        }
        if v.norm() < ORIGIN_TOL {
            return Err(StabilityError::OriginContact(format!(
                "|sample {i}| = {:.3e}",
                v.norm()
            )));
        }
    }
    let mut ascent = 0.0f64;
    let mut max_step = 0.0f64;
    for w in samples.windows(2) {
        let step = (w[1] / w[0]).arg();
        max_step = max_step.max(step.abs());
        ascent += step;
    }
    // The conjugated return path duplicates every measured step's phase
    // increment, so the mirror contributes the same total again.
    let mut total = 2.0 * ascent;
    let first = samples[0];
    let last = samples[samples.len() - 1];
    let nyquist_hop = (last.conj() / last).arg();
    let dc_hop = (first / first.conj()).arg();
    total += nyquist_hop + dc_hop;
    let turns_f = total / std::f64::consts::TAU;
    let turns = turns_f.round() as i64;
    Ok(Winding {
        turns,
        residue: total - std::f64::consts::TAU * turns as f64,
        max_step,
        max_closure_step: nyquist_hop.abs().max(dc_hop.abs()),
    })
}

/// All complex roots of a real polynomial `c_0 + c_1 z + ... + c_d z^d`,
/// via the companion-matrix eigenvalues of the trimmed polynomial.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, StabilityError> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(StabilityError::Invalid(
            "non-finite polynomial coefficient".into(),
        ));
    }
    let scale = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(StabilityError::Invalid(
            "roots of the zero polynomial".into(),
        ));
    }
    let deg = coeffs
        .iter()
        .rposition(|&c| c.abs() > 1e-12 * scale)
        .unwrap_or(0);
    if deg == 0 {
        return Ok(Vec::new());
    }
    // Factor out z^low first: roots at the origin come for free, and the
    // QR iteration never sees a nilpotent companion block (on which it
    // can fail to deflate).
    let low = coeffs[..=deg]
        .iter()
        .position(|&c| c.abs() > 1e-12 * scale)
        .expect("deg qualifies");
    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    let n = deg - low;
    if n > 0 {
        let reduced = &coeffs[low..=deg];
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            comp[(0, k)] = -reduced[n - 1 - k] / reduced[n];
        }
        for k in 1..n {
            comp[(k, k - 1)] = 1.0;
        }
        roots.extend(comp.complex_eigenvalues().iter().copied());
    }
    Ok(roots)
}

/// Location of the first (worst) chain-positivity violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainViolation {
    /// Index of the iterate pair (`step` maps iterate `step-1` to `step`).
    pub step: usize,
    /// Grid index of the offending frequency.
    pub grid: usize,
    pub omega: f64,
    /// The normalised positivity value `2 Re(a* b) / (|a| |b|)` there.
    pub value: f64,
}

/// Per-configuration certificate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigCertificate {
    pub label: String,
    /// Winding of the characteristic response `D + G N` for the final
    /// controller; must equal the anchor winding.
    pub wno_p: i64,
    /// Winding of `1 + L`; must be zero for an open-loop-stable plant
    /// under a stable controller.
    pub wno_one_plus_l: i64,
    /// Minimum over the iterate history and the grid of the normalised
    /// `2 Re(Pc* P)` chain value; positive means no step let a
    /// closed-loop pole cross the unit circle at any sampled frequency.
    pub min_p_chain: f64,
    pub p_chain_ok: bool,
    pub first_p_violation: Option<ChainViolation>,
}

/// Outcome of the closed-loop stability certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Winding anchor: roots of the initial denominator inside the unit
    /// circle (the zero controller is stabilising, so the chain must
    /// preserve this count).
    pub expected_winding: i64,
    /// Winding of the final controller denominator.
    pub wno_d: i64,
    /// Minimum normalised `2 Re(Dc* D)` across the iterate history.
    pub min_d_chain: f64,
    pub d_chain_ok: bool,
    pub first_d_violation: Option<ChainViolation>,
    /// Moduli of the final denominator's roots.
    pub d_root_moduli: Vec<f64>,
    pub configs: Vec<ConfigCertificate>,
    /// Largest measured phase step seen in any winding computation.
    pub max_arg_step: f64,
    /// True when every check passed for every configuration.
    pub pass: bool,
    /// Human-readable reasons when `pass` is false.
    pub failures: Vec<String>,
}

fn guarded_winding(
    samples: &[Complex64],
    what: &str,
) -> Result<Winding, StabilityError> {
    let w = winding_number(samples).map_err(|e| match e {
        StabilityError::OriginContact(m) => StabilityError::OriginContact(format!("{what}: {m}")),
        other => other,
    })?;
    if w.max_step >= MAX_ARG_STEP || w.max_closure_step >= MAX_ARG_STEP {
        return Err(StabilityError::Aliased(format!(
            "{what}: phase step {:.3} rad (closure {:.3}) reaches {:.3}",
            w.max_step, w.max_closure_step, MAX_ARG_STEP
        )));
    }
    Ok(w)
}

/// Normalised half-plane test `2 Re(a* b) / (|a| |b|)`; positive iff the
/// segment from `a` to `b` stays clear of the origin by the half-plane
/// argument.
fn chain_value(a: Complex64, b: Complex64) -> f64 {
    2.0 * (a.conj() * b).re / (a.norm() * b.norm()).max(f64::MIN_POSITIVE)
}

/// Scan one polynomial-coefficient history for chain positivity at every
/// grid frequency. Returns (min value, first violation).
fn scan_chain(
    history: &[Vec<Complex64>],
    omega: &[f64],
) -> (f64, Option<ChainViolation>) {
    let mut min_val = f64::INFINITY;
    let mut first = None;
    for step in 1..history.len() {
        for (g, (&a, &b)) in history[step - 1].iter().zip(&history[step]).enumerate() {
            let v = chain_value(a, b);
            if v < min_val {
                min_val = v;
            }
            if v <= 0.0 && first.is_none() {
                first = Some(ChainViolation {
                    step,
                    grid: g,
                    omega: omega[g],
                    value: v,
                });
            }
        }
    }
    if !min_val.is_finite() {
        min_val = f64::INFINITY;
    }
    (min_val, first)
}

/// Certify closed-loop stability of a synthesis run on its dataset.
///
/// Three checks per Theorem-style reasoning, anchored at the zero
/// controller (whose loop is open-loop stable by assumption):
/// (a) the denominator chain `2 Re(Dc* D) > 0` across all accepted
/// iterates — the controller realisation never moves a pole across the
/// unit circle; (b) the characteristic chain `2 Re(Pc* P) > 0` per
/// configuration — no closed-loop pole crosses either; (c) the direct
/// Nyquist count: `wno(1 + L) = 0` for the final controller on every
/// configuration. Windings of `D` and `P` must equal the anchor count.
///
/// Failed checks yield `Ok` with `pass = false` and the offending
/// locations; conditions that make certification itself impossible
/// (origin contact, aliased grid, a root within `1e-6` of the unit
/// circle, malformed history) yield `Err`.
pub fn certify(
    dataset: &FrfDataset,
    result: &SynthesisResult,
) -> Result<StabilityCertificate, StabilityError> {
    let iterates = &result.iterates;
    if iterates.is_empty() {
        return Err(StabilityError::Invalid("empty iterate history".into()));
    }
    let last = &iterates[iterates.len() - 1];
    if last.h != result.params.h() || last.t != result.params.t() {
        return Err(StabilityError::Invalid(
            "final iterate does not match the returned controller".into(),
        ));
    }
    let path: Vec<(&[f64], &[f64])> = iterates
        .iter()
        .map(|it| (it.h.as_slice(), it.t.as_slice()))
        .collect();
    certify_path(dataset, &path)
}

/// Certify an externally constructed controller against a dataset.
///
/// Controllers that did not come out of the synthesis loop carry no
/// iterate history, so the homotopy is manufactured as a gain sweep:
/// the denominator stays fixed at the target `D` and the numerator is
/// scaled from zero to full, `P_lambda = D + lambda G N`, sampled at
/// `steps + 1` points. The anchor is then the open-loop point, whose
/// winding is `D`'s inside-root count — for that count to equal the
/// closed-loop pole total, every root of `D` must lie strictly inside
/// the unit circle, which is checked up front. The same pairwise chain
/// checks as for a synthesis history then apply; a sweep that passes
/// near a circle crossing is reported as a failed certificate.
pub fn certify_controller(
    dataset: &FrfDataset,
    params: &ControllerParams,
    steps: usize,
) -> Result<StabilityCertificate, StabilityError> {
    if steps == 0 {
        return Err(StabilityError::Invalid(
            "gain sweep needs at least one step".into(),
        ));
    }
    if params.ts() != dataset.grid().ts() {
        return Err(StabilityError::Invalid(format!(
            "controller sample time {} differs from the dataset's {}",
            params.ts(),
            dataset.grid().ts()
        )));
    }
    let p = params.normalized();
    let roots = polynomial_roots(p.t())?;
    if let Some(r) = roots.iter().find(|r| r.norm() >= 1.0 - BOUNDARY_TOL) {
        return Err(StabilityError::Invalid(format!(
            "controller denominator root at |z| = {:.8}; the gain sweep \
             can only anchor an open-loop-stable controller",
            r.norm()
        )));
    }
    let path: Vec<(Vec<f64>, Vec<f64>)> = (0..=steps)
        .map(|k| {
            let lam = k as f64 / steps as f64;
            let hk = p.h().iter().map(|&c| lam * c).collect();
            (hk, p.t().to_vec())
        })
        .collect();
    let views: Vec<(&[f64], &[f64])> = path
        .iter()
        .map(|(h, t)| (h.as_slice(), t.as_slice()))
        .collect();
    certify_path(dataset, &views)
}

/// Shared certification engine over an explicit `(h, t)` coefficient
/// path. The first entry must be a zero controller: its denominator
/// roots anchor the expected winding count.
fn certify_path(
    dataset: &FrfDataset,
    path: &[(&[f64], &[f64])],
) -> Result<StabilityCertificate, StabilityError> {
    if path.is_empty() {
        return Err(StabilityError::Invalid("empty iterate history".into()));
    }
    let (first_h, first_t) = path[0];
    if first_h.iter().any(|&c| c != 0.0) {
        return Err(StabilityError::Invalid(
            "iterate history does not start at the zero controller".into(),
        ));
    }
    for (i, (h, t)) in path.iter().enumerate() {
        if h.len() != first_h.len() || t.len() != first_t.len() {
            return Err(StabilityError::Invalid(format!(
                "iterate {i} changes the controller orders"
            )));
        }
    }
    let (_, last_t) = path[path.len() - 1];
    let omega = dataset.grid().omega();

    // Anchor: the initial denominator's roots, counted by magnitude.
    let init_roots = polynomial_roots(first_t)?;
    for r in &init_roots {
        if (r.norm() - 1.0).abs() <= BOUNDARY_TOL {
            return Err(StabilityError::BoundaryRoot(format!(
                "initial denominator root at |z| = {:.8}",
                r.norm()
            )));
        }
    }
    let expected_winding = init_roots.iter().filter(|r| r.norm() < 1.0).count() as i64;

    // Evaluate every iterate's D over the grid once.
    let d_history: Vec<Vec<Complex64>> = path
        .iter()
        .map(|(_, t)| omega.iter().map(|&w| eval_poly(t, w)).collect())
        .collect();
    let mut max_arg_step = 0.0f64;
    let mut failures = Vec::new();

    let w_d0 = guarded_winding(&d_history[0], "initial denominator")?;
    max_arg_step = max_arg_step.max(w_d0.max_step);
    if w_d0.turns != expected_winding {
        return Err(StabilityError::Aliased(format!(
            "initial denominator winding {} disagrees with its root count {}",
            w_d0.turns, expected_winding
        )));
    }
    let w_d = guarded_winding(&d_history[d_history.len() - 1], "final denominator")?;
    max_arg_step = max_arg_step.max(w_d.max_step);
    let (min_d_chain, first_d_violation) = scan_chain(&d_history, omega);
    let d_chain_ok = min_d_chain > 0.0;
    if !d_chain_ok {
        if let Some(v) = &first_d_violation {
            failures.push(format!(
                "denominator chain positivity fails at iterate step {}, omega = {:.6} (value {:.3e})",
                v.step, v.omega, v.value
            ));
        }
    }
    if w_d.turns != expected_winding {
        failures.push(format!(
            "final denominator winds {} times, expected {}",
            w_d.turns, expected_winding
        ));
    }

    // Cross-check the final denominator's roots directly.
    let final_roots = polynomial_roots(last_t)?;
    let mut d_root_moduli: Vec<f64> = final_roots.iter().map(|r| r.norm()).collect();
    d_root_moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for m in &d_root_moduli {
        if (m - 1.0).abs() <= BOUNDARY_TOL {
            return Err(StabilityError::BoundaryRoot(format!(
                "final denominator root at |z| = {m:.8}"
            )));
        }
    }
    let inside = d_root_moduli.iter().filter(|&&m| m < 1.0).count() as i64;
    if inside != expected_winding {
        failures.push(format!(
            "final denominator has {inside} roots inside the unit circle, expected {expected_winding}"
        ));
    }

    // Per-configuration characteristic chains and direct Nyquist counts.
    let mut configs = Vec::with_capacity(dataset.n_configs());
    for cfg in dataset.configs() {
        let p_history: Vec<Vec<Complex64>> = path
            .iter()
            .map(|(h, t)| {
                omega
                    .iter()
                    .zip(cfg.response())
                    .map(|(&w, &g)| eval_poly(t, w) + g * eval_poly(h, w))
                    .collect()
            })
            .collect();
        let label = cfg.label().to_string();
        let w_p0 = guarded_winding(&p_history[0], &format!("{label}: initial characteristic"))?;
        max_arg_step = max_arg_step.max(w_p0.max_step);
        if w_p0.turns != expected_winding {
            return Err(StabilityError::Aliased(format!(
                "{label}: initial characteristic winding {} disagrees with the anchor {}",
                w_p0.turns, expected_winding
            )));
        }
        let w_p = guarded_winding(
            &p_history[p_history.len() - 1],
            &format!("{label}: characteristic"),
        )?;
        max_arg_step = max_arg_step.max(w_p.max_step);
        let (min_p_chain, first_p_violation) = scan_chain(&p_history, omega);
        let p_chain_ok = min_p_chain > 0.0;
        if !p_chain_ok {
            if let Some(v) = &first_p_violation {
                failures.push(format!(
                    "{label}: characteristic chain positivity fails at iterate step {}, omega = {:.6} (value {:.3e})",
                    v.step, v.omega, v.value
                ));
            }
        }
        if w_p.turns != expected_winding {
            failures.push(format!(
                "{label}: characteristic winds {} times, expected {expected_winding}",
                w_p.turns
            ));
        }
        // Direct Nyquist: 1 + L = P / D sampled pointwise.
        let one_plus_l: Vec<Complex64> = p_history[p_history.len() - 1]
            .iter()
            .zip(&d_history[d_history.len() - 1])
            .map(|(&p, &d)| p / d)
            .collect();
        let w_nyq = guarded_winding(&one_plus_l, &format!("{label}: Nyquist response"))?;
        max_arg_step = max_arg_step.max(w_nyq.max_step);
        if w_nyq.turns != 0 {
            failures.push(format!(
                "{label}: Nyquist plot of 1 + L encircles the origin {} times",
                w_nyq.turns
            ));
        }
        configs.push(ConfigCertificate {
            label,
            wno_p: w_p.turns,
            wno_one_plus_l: w_nyq.turns,
            min_p_chain,
            p_chain_ok,
            first_p_violation,
        });
    }
    Ok(StabilityCertificate {
        expected_winding,
        wno_d: w_d.turns,
        min_d_chain,
        d_chain_ok,
        first_d_violation,
        d_root_moduli,
        configs,
        max_arg_step,
        pass: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexify::IterateRecord;
    use crate::convexify::ReplayPeaks;
    use crate::frf::{Channel, FrequencyGrid, FrfDataset};
    use crate::plant::{TwoMassParams, TwoMassPlant};
    use crate::synth::{ControllerParams, PerformanceVars};
    use std::collections::BTreeMap;

    fn half_grid(n: usize) -> Vec<f64> {
        (1..=n)
            .map(|k| std::f64::consts::PI * k as f64 / n as f64)
            .collect()
    }

    fn sample_poly(coeffs: &[f64], omega: &[f64]) -> Vec<Complex64> {
        omega.iter().map(|&w| eval_poly(coeffs, w)).collect()
    }

    #[test]
    fn winding_of_monomials_counts_their_degree() {
        let omega = half_grid(64);
        for deg in 0..6usize {
            let mut c = vec![0.0; deg + 1];
            c[deg] = 1.0;
            let w = winding_number(&sample_poly(&c, &omega)).unwrap();
            assert_eq!(w.turns, deg as i64, "z^{deg}");
            assert!(w.residue.abs() < 1e-9);
        }
    }

    #[test]
    fn winding_of_a_constant_is_zero() {
        let samples = vec![Complex64::new(1.0, 0.0); 16];
        let w = winding_number(&samples).unwrap();
        assert_eq!(w.turns, 0);
        assert!(w.max_step == 0.0);
    }

    #[test]
    fn winding_counts_roots_inside_only() {
        // (z - 0.5)(z - 2) = z^2 - 2.5 z + 1: one root inside.
        let omega = half_grid(128);
        let w = winding_number(&sample_poly(&[1.0, -2.5, 1.0], &omega)).unwrap();
        assert_eq!(w.turns, 1);
        // Both roots outside: (z - 2)(z - 3).
        let w = winding_number(&sample_poly(&[6.0, -5.0, 1.0], &omega)).unwrap();
        assert_eq!(w.turns, 0);
        // Complex pair inside: (z - 0.6 e^{j})(z - 0.6 e^{-j}).
        let re = 0.6 * 1.0f64.cos();
        let w = winding_number(&sample_poly(&[0.36, -2.0 * re, 1.0], &omega)).unwrap();
        assert_eq!(w.turns, 2);
    }

    #[test]
    fn origin_contact_is_an_error() {
        let samples = vec![
            Complex64::new(1.0, 0.2),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, -0.2),
        ];
        match winding_number(&samples) {
            Err(StabilityError::OriginContact(_)) => {}
            other => panic!("expected origin contact, got {other:?}"),
        }
    }

    #[test]
    fn mirrored_half_grid_matches_a_full_circle_sweep() {
        // Same polynomial, two ways: mirrored (0, pi] versus explicit
        // full-circle accumulation.
        let coeffs = [0.3, -1.1, 0.2, 1.0];
        let omega = half_grid(256);
        let mirrored = winding_number(&sample_poly(&coeffs, &omega)).unwrap();
        let n = 2048usize;
        let mut total = 0.0;
        let mut prev = eval_poly(&coeffs, 1e-12);
        for k in 1..=n {
            let w = std::f64::consts::TAU * k as f64 / n as f64;
            let v = eval_poly(&coeffs, w);
            total += (v / prev).arg();
            prev = v;
        }
        let full = (total / std::f64::consts::TAU).round() as i64;
        assert_eq!(mirrored.turns, full);
    }

    #[test]
    fn roots_of_known_polynomials_are_recovered() {
        // (z - 0.5)(z + 0.25)(z - 2): coefficients built by convolution.
        let coeffs = [0.25, 0.375, -2.25, 1.0];
        let mut mags: Vec<f64> = polynomial_roots(&coeffs)
            .unwrap()
            .iter()
            .map(|r| r.norm())
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mags[0] - 0.25).abs() < 1e-8);
        assert!((mags[1] - 0.5).abs() < 1e-8);
        assert!((mags[2] - 2.0).abs() < 1e-8);
        // Degenerate: constants have no roots; the zero polynomial has no
        // well-defined root set.
        assert!(polynomial_roots(&[3.0]).unwrap().is_empty());
        assert!(polynomial_roots(&[0.0, 0.0]).is_err());
    }

    fn flexible_dataset(points: usize) -> FrfDataset {
        let plant = TwoMassPlant::new(TwoMassParams {
            motor_inertia: 0.0679,
            motor_damping: 0.34,
            link_inertia: 0.2037,
            link_damping: 0.043,
            stiffness: 452.4,
            ts: 1e-3,
        })
        .unwrap();
        let grid = FrequencyGrid::log_spaced(0.05, 500.0, points, 1e-3).unwrap();
        let response = plant.frf(&grid, Channel::LoadVelocity);
        FrfDataset::new(grid, Channel::LoadVelocity, vec![("med".into(), response)]).unwrap()
    }

    fn result_from_history(iterates: Vec<IterateRecord>, ts: f64) -> SynthesisResult {
        let last = iterates.last().unwrap().clone();
        let qn = last.h.len() - 1;
        let qd = last.t.len() - 1;
        SynthesisResult {
            params: ControllerParams::new(qn, qd, last.h, last.t, ts).unwrap(),
            perf: PerformanceVars {
                zeta: last.zeta,
                m_var: last.m_var,
            },
            gamma1: 1.0,
            gamma2: 1.0,
            objective_trace: vec![],
            iterates,
            converged: true,
            iterations: 0,
            residuals: BTreeMap::new(),
            replay: ReplayPeaks {
                w1_s: 0.0,
                w2_s: 0.0,
                w3_t: 0.0,
            },
        }
    }

    #[test]
    fn zero_controller_certifies_with_zero_windings() {
        let dataset = flexible_dataset(240);
        let result = result_from_history(
            vec![IterateRecord {
                h: vec![0.0],
                t: vec![1.0],
                zeta: 0.1,
                m_var: 1.0,
            }],
            1e-3,
        );
        let cert = certify(&dataset, &result).unwrap();
        assert!(cert.pass, "failures: {:?}", cert.failures);
        assert_eq!(cert.expected_winding, 0);
        assert_eq!(cert.wno_d, 0);
        for c in &cert.configs {
            assert_eq!(c.wno_p, 0);
            assert_eq!(c.wno_one_plus_l, 0);
            assert!(c.min_p_chain.is_infinite());
        }
    }

    #[test]
    fn sign_flipped_denominator_fails_the_chain_scan() {
        let dataset = flexible_dataset(240);
        let a = IterateRecord {
            h: vec![0.0, 0.0, 0.0],
            t: vec![0.0, 0.0, 1.0],
            zeta: 0.1,
            m_var: 1.0,
        };
        let mut b = a.clone();
        b.t = vec![0.0, 0.0, -1.0];
        let result = result_from_history(vec![a, b], 1e-3);
        let cert = certify(&dataset, &result).unwrap();
        assert!(!cert.pass);
        assert!(!cert.d_chain_ok);
        let v = cert.first_d_violation.expect("violation located");
        assert_eq!(v.step, 1);
        assert_eq!(v.grid, 0);
        assert!(v.value < 0.0);
    }

    #[test]
    fn sparse_grid_is_rejected_as_aliased() {
        // z^4 on a 4-point half grid steps pi per sample: unusable.
        let ts = 1e-3;
        let omega = half_grid(4);
        let grid = FrequencyGrid::new(omega, ts).unwrap();
        let response = vec![Complex64::new(1.0, 0.0); 4];
        let dataset =
            FrfDataset::new(grid, Channel::LoadVelocity, vec![("a".into(), response)]).unwrap();
        let result = result_from_history(
            vec![IterateRecord {
                h: vec![0.0; 5],
                t: vec![0.0, 0.0, 0.0, 0.0, 1.0],
                zeta: 0.1,
                m_var: 1.0,
            }],
            ts,
        );
        match certify(&dataset, &result) {
            Err(StabilityError::Aliased(_)) => {}
            other => panic!("expected aliasing error, got {other:?}"),
        }
    }

    #[test]
    fn boundary_roots_refuse_certification() {
        let dataset = flexible_dataset(240);
        // D = z - 1: root exactly on the unit circle.
        let result = result_from_history(
            vec![IterateRecord {
                h: vec![0.0, 0.0],
                t: vec![-1.0, 1.0],
                zeta: 0.1,
                m_var: 1.0,
            }],
            1e-3,
        );
        match certify(&dataset, &result) {
            Err(StabilityError::BoundaryRoot(_)) => {}
            other => panic!("expected boundary-root error, got {other:?}"),
        }
    }

    #[test]
    fn histories_that_do_not_anchor_are_invalid() {
        let dataset = flexible_dataset(240);
        // Nonzero numerator in the first iterate: no anchor.
        let result = result_from_history(
            vec![IterateRecord {
                h: vec![0.5],
                t: vec![1.0],
                zeta: 0.1,
                m_var: 1.0,
            }],
            1e-3,
        );
        assert!(matches!(
            certify(&dataset, &result),
            Err(StabilityError::Invalid(_))
        ));
    }
}
