//! Frequency response function (FRF) datasets.
//!
//! A dataset couples one frequency grid with one complex response per plant
//! configuration. The grid lives in normalised frequency, radians per
//! sample over `(0, pi]`, together with the sample time that maps it back
//! to physical frequency. All downstream stages (synthesis, certification,
//! validation) consume this type, whether the data came from a file or
//! from the built-in simulator.
//!
//! Canonical storage is JSON (see [`save_frf`] / [`load_frf`]); a CSV
//! import path exists for data exported from measurement rigs
//! ([`import_csv`]). Loading validates every invariant, so code holding a
//! [`FrfDataset`] never re-checks finiteness or grid ordering.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which physical channel a response describes. Both channels share the
/// motor torque input; they differ in the measured velocity.
///
/// The load-velocity channel is the one the observer acts on. The
/// motor-velocity channel is kept as metadata so motor-side measurements
/// are not silently mistaken for load-side ones: the two differ markedly
/// around the drivetrain anti-resonance, which only the motor channel has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "load-velocity")]
    LoadVelocity,
    #[serde(rename = "motor-velocity")]
    MotorVelocity,
}

impl Default for Channel {
    fn default() -> Self {
        Channel::LoadVelocity
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::LoadVelocity => write!(f, "load-velocity"),
            Channel::MotorVelocity => write!(f, "motor-velocity"),
        }
    }
}

#[derive(Debug)]
pub enum FrfError {
    Io(std::io::Error),
    /// Malformed file: not parseable as the expected JSON or CSV shape.
    Parse(String),
    /// Parsed fine but violates a dataset invariant.
    Invalid(String),
    /// Two datasets that were asked to merge are incompatible.
    Mismatch(String),
}

impl fmt::Display for FrfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrfError::Io(e) => write!(f, "i/o error: {e}"),
            FrfError::Parse(m) => write!(f, "parse error: {m}"),
            FrfError::Invalid(m) => write!(f, "invalid dataset: {m}"),
            FrfError::Mismatch(m) => write!(f, "dataset mismatch: {m}"),
        }
    }
}

impl std::error::Error for FrfError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            FrfError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for FrfError {
    fn from(e: std::io::Error) -> Self {
        FrfError::Io(e)
    }
}

/// Strictly increasing frequencies in radians per sample over `(0, pi]`,
/// plus the sample time in seconds that converts them to rad/s.
///
/// A single-point grid is legal (synthesis at one frequency is degenerate
/// but well defined); winding-number certification refuses grids too
/// sparse to trust, so density is policed where it matters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
    ts: f64,
}

impl FrequencyGrid {
    pub fn new(omega: Vec<f64>, ts: f64) -> Result<Self, FrfError> {
        if !ts.is_finite() || ts <= 0.0 {
            return Err(FrfError::Invalid(format!(
                "sample time must be finite and positive, got {ts}"
            )));
        }
        if omega.is_empty() {
            return Err(FrfError::Invalid("frequency grid is empty".into()));
        }
        for (i, &w) in omega.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 || w > std::f64::consts::PI {
                return Err(FrfError::Invalid(format!(
                    "grid point {i} is {w}, outside (0, pi]"
                )));
            }
            if i > 0 && w <= omega[i - 1] {
                return Err(FrfError::Invalid(format!(
                    "grid not strictly increasing at index {i}: {} then {w}",
                    omega[i - 1]
                )));
            }
        }
        Ok(FrequencyGrid { omega, ts })
    }

    /// Logarithmically spaced grid between two physical frequencies in Hz.
    /// The upper frequency is clipped to Nyquist.
    pub fn log_spaced(f_min_hz: f64, f_max_hz: f64, points: usize, ts: f64) -> Result<Self, FrfError> {
        if !(f_min_hz.is_finite() && f_min_hz > 0.0) || !(f_max_hz.is_finite() && f_max_hz > f_min_hz) {
            return Err(FrfError::Invalid(format!(
                "bad frequency range [{f_min_hz}, {f_max_hz}] Hz"
            )));
        }
        if points < 2 {
            return Err(FrfError::Invalid("log grid needs at least 2 points".into()));
        }
        if !ts.is_finite() || ts <= 0.0 {
            return Err(FrfError::Invalid(format!(
                "sample time must be finite and positive, got {ts}"
            )));
        }
        let w_min = 2.0 * std::f64::consts::PI * f_min_hz * ts;
        let w_max = (2.0 * std::f64::consts::PI * f_max_hz * ts).min(std::f64::consts::PI);
        if w_max <= w_min {
            return Err(FrfError::Invalid(format!(
                "range [{f_min_hz}, {f_max_hz}] Hz collapses after clipping to Nyquist"
            )));
        }
        let (ln_a, ln_b) = (w_min.ln(), w_max.ln());
        let omega: Vec<f64> = (0..points)
            .map(|i| {
                let frac = i as f64 / (points - 1) as f64;
                // exp(ln x) can overshoot by an ulp; keep the endpoint at
                // or below the Nyquist-clipped maximum.
                (ln_a + frac * (ln_b - ln_a)).exp().min(w_max)
            })
            .collect();
        FrequencyGrid::new(omega, ts)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Physical frequency in rad/s for each grid point.
    pub fn omega_phys(&self) -> impl Iterator<Item = f64> + '_ {
        let ts = self.ts;
        self.omega.iter().map(move |w| w / ts)
    }

    /// `z = e^{j omega}` for each grid point.
    pub fn z_points(&self) -> Vec<Complex64> {
        self.omega
            .iter()
            .map(|&w| Complex64::new(0.0, w).exp())
            .collect()
    }

    /// True when both grids have the same length and matching points
    /// within relative tolerance `1e-12`.
    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        self.ts == other.ts
            && self.omega.len() == other.omega.len()
            && self
                .omega
                .iter()
                .zip(&other.omega)
                .all(|(&a, &b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }
}

/// One measured (or simulated) response on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResponse {
    label: String,
    response: Vec<Complex64>,
}

impl ConfigResponse {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn response(&self) -> &[Complex64] {
        &self.response
    }
}

/// A single grid point of one configuration's response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexResponsePoint {
    pub omega: f64,
    pub value: Complex64,
}

/// Frequency response data for one or more plant configurations sharing a
/// grid and a measurement channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfDataset {
    grid: FrequencyGrid,
    channel: Channel,
    configs: Vec<ConfigResponse>,
}

impl FrfDataset {
    pub fn new(
        grid: FrequencyGrid,
        channel: Channel,
        configs: Vec<(String, Vec<Complex64>)>,
    ) -> Result<Self, FrfError> {
        if configs.is_empty() {
            return Err(FrfError::Invalid("dataset has no configurations".into()));
        }
        let mut seen: Vec<&str> = Vec::new();
        for (label, response) in &configs {
            if label.is_empty() {
                return Err(FrfError::Invalid("configuration label is empty".into()));
            }
            if seen.contains(&label.as_str()) {
                return Err(FrfError::Invalid(format!("duplicate label {label:?}")));
            }
            seen.push(label);
            if response.len() != grid.len() {
                return Err(FrfError::Invalid(format!(
                    "configuration {label:?} has {} response points, grid has {}",
                    response.len(),
                    grid.len()
                )));
            }
            if let Some(i) = response.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(FrfError::Invalid(format!(
                    "configuration {label:?} has a non-finite response at grid index {i}"
                )));
            }
        }
        Ok(FrfDataset {
            grid,
            channel,
            configs: configs
                .into_iter()
                .map(|(label, response)| ConfigResponse { label, response })
                .collect(),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn configs(&self) -> &[ConfigResponse] {
        &self.configs
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn response(&self, config: usize) -> &[Complex64] {
        &self.configs[config].response
    }

    pub fn points(&self, config: usize) -> impl Iterator<Item = ComplexResponsePoint> + '_ {
        self.grid
            .omega
            .iter()
            .zip(&self.configs[config].response)
            .map(|(&omega, &value)| ComplexResponsePoint { omega, value })
    }

    /// Restrict the dataset to a subset of grid indices (must be strictly
    /// increasing). Used to thin dense identification grids for synthesis.
    pub fn select(&self, indices: &[usize]) -> Result<FrfDataset, FrfError> {
        let omega: Vec<f64> = indices.iter().map(|&i| self.grid.omega[i]).collect();
        let grid = FrequencyGrid::new(omega, self.grid.ts)?;
        let configs = self
            .configs
            .iter()
            .map(|c| {
                (
                    c.label.clone(),
                    indices.iter().map(|&i| c.response[i]).collect(),
                )
            })
            .collect();
        FrfDataset::new(grid, self.channel, configs)
    }
}

/// Merge two datasets measured on the same grid, channel and sample time
/// into one multi-configuration dataset. Labels colliding with an already
/// present label get a numeric suffix (`_2`, `_3`, ...).
pub fn merge_datasets(a: &FrfDataset, b: &FrfDataset) -> Result<FrfDataset, FrfError> {
    if a.grid.ts != b.grid.ts {
        return Err(FrfError::Mismatch(format!(
            "sample times differ: {} vs {}",
            a.grid.ts, b.grid.ts
        )));
    }
    if !a.grid.matches(&b.grid) {
        return Err(FrfError::Mismatch(
            "frequency grids differ beyond 1e-12 relative tolerance".into(),
        ));
    }
    if a.channel != b.channel {
        return Err(FrfError::Mismatch(format!(
            "channels differ: {} vs {}",
            a.channel, b.channel
        )));
    }
    let mut configs: Vec<(String, Vec<Complex64>)> = a
        .configs
        .iter()
        .map(|c| (c.label.clone(), c.response.clone()))
        .collect();
    for c in &b.configs {
        let mut label = c.label.clone();
        let mut k = 2usize;
        while configs.iter().any(|(l, _)| *l == label) {
            label = format!("{}_{k}", c.label);
            k += 1;
        }
        configs.push((label, c.response.clone()));
    }
    FrfDataset::new(a.grid.clone(), a.channel, configs)
}

#[derive(Serialize, Deserialize)]
struct FrfFileConfig {
    label: String,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// On-disk JSON shape. Kept separate from the validated in-memory type so
/// nothing unvalidated can leak past the loader.
#[derive(Serialize, Deserialize)]
struct FrfFile {
    ts_seconds: f64,
    #[serde(default)]
    channel: Option<Channel>,
    omega: Vec<f64>,
    configurations: Vec<FrfFileConfig>,
}

/// Parse a dataset from JSON text.
pub fn read_frf(mut reader: impl Read) -> Result<FrfDataset, FrfError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let file: FrfFile = serde_json::from_str(&text).map_err(|e| FrfError::Parse(e.to_string()))?;
    let grid = FrequencyGrid::new(file.omega, file.ts_seconds)?;
    let channel = file.channel.unwrap_or_default();
    let configs = file
        .configurations
        .into_iter()
        .map(|c| {
            if c.re.len() != c.im.len() {
                return Err(FrfError::Invalid(format!(
                    "configuration {:?}: re has {} values, im has {}",
                    c.label,
                    c.re.len(),
                    c.im.len()
                )));
            }
            Ok((
                c.label,
                c.re.iter()
                    .zip(&c.im)
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    FrfDataset::new(grid, channel, configs)
}

pub fn load_frf(path: impl AsRef<Path>) -> Result<FrfDataset, FrfError> {
    let file = fs::File::open(path.as_ref())?;
    read_frf(std::io::BufReader::new(file))
}

/// Serialise a dataset as canonical JSON. Values round-trip exactly: the
/// writer emits the shortest decimal that parses back to the same f64.
pub fn write_frf(dataset: &FrfDataset, mut writer: impl Write) -> Result<(), FrfError> {
    let file = FrfFile {
        ts_seconds: dataset.grid.ts,
        channel: Some(dataset.channel),
        omega: dataset.grid.omega.clone(),
        configurations: dataset
            .configs
            .iter()
            .map(|c| FrfFileConfig {
                label: c.label.clone(),
                re: c.response.iter().map(|v| v.re).collect(),
                im: c.response.iter().map(|v| v.im).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| FrfError::Parse(e.to_string()))?;
    writer.write_all(text.as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn save_frf(dataset: &FrfDataset, path: impl AsRef<Path>) -> Result<(), FrfError> {
    let file = fs::File::create(path.as_ref())?;
    let mut writer = std::io::BufWriter::new(file);
    write_frf(dataset, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Import a dataset from CSV text.
///
/// Expected shape: optional leading comment lines `# key=value` (with
/// `ts_seconds` mandatory among them and `channel` optional), then a
/// header `omega,re_<label>,im_<label>,...`, then one row per grid point.
pub fn parse_csv(text: &str) -> Result<FrfDataset, FrfError> {
    let mut ts: Option<f64> = None;
    let mut channel = Channel::default();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                match key.trim() {
                    "ts_seconds" => {
                        ts = Some(value.trim().parse::<f64>().map_err(|e| {
                            FrfError::Parse(format!("bad ts_seconds value {value:?}: {e}"))
                        })?);
                    }
                    "channel" => {
                        channel = match value.trim() {
                            "load-velocity" => Channel::LoadVelocity,
                            "motor-velocity" => Channel::MotorVelocity,
                            other => {
                                return Err(FrfError::Parse(format!("unknown channel {other:?}")))
                            }
                        };
                    }
                    _ => {}
                }
            }
            lines.next();
        } else if line.is_empty() {
            lines.next();
        } else {
            break;
        }
    }
    let ts = ts.ok_or_else(|| FrfError::Parse("missing `# ts_seconds=` comment line".into()))?;
    let header = lines
        .next()
        .ok_or_else(|| FrfError::Parse("missing header row".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"omega") {
        return Err(FrfError::Parse(format!(
            "first header column must be `omega`, got {:?}",
            columns.first().copied().unwrap_or("")
        )));
    }
    if columns.len() < 3 || (columns.len() - 1) % 2 != 0 {
        return Err(FrfError::Parse(
            "header needs `omega` plus one (re_<label>, im_<label>) pair per configuration".into(),
        ));
    }
    let mut labels = Vec::new();
    for pair in columns[1..].chunks(2) {
        let re_label = pair[0]
            .strip_prefix("re_")
            .ok_or_else(|| FrfError::Parse(format!("expected re_<label> column, got {:?}", pair[0])))?;
        let im_label = pair[1]
            .strip_prefix("im_")
            .ok_or_else(|| FrfError::Parse(format!("expected im_<label> column, got {:?}", pair[1])))?;
        if re_label != im_label {
            return Err(FrfError::Parse(format!(
                "column pair mismatch: re_{re_label} vs im_{im_label}"
            )));
        }
        labels.push(re_label.to_string());
    }
    let mut omega = Vec::new();
    let mut responses: Vec<Vec<Complex64>> = vec![Vec::new(); labels.len()];
    for (row_idx, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(FrfError::Parse(format!(
                "row {row_idx}: expected {} fields, got {}",
                columns.len(),
                fields.len()
            )));
        }
        let mut values = fields.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|e| FrfError::Parse(format!("row {row_idx}: bad number {f:?}: {e}")))
        });
        omega.push(values.next().unwrap()?);
        for resp in responses.iter_mut() {
            let re = values.next().unwrap()?;
            let im = values.next().unwrap()?;
            resp.push(Complex64::new(re, im));
        }
    }
    let grid = FrequencyGrid::new(omega, ts)?;
    FrfDataset::new(
        grid,
        channel,
        labels.into_iter().zip(responses).collect(),
    )
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<FrfDataset, FrfError> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_response(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n]
    }

    #[test]
    fn grid_rejects_out_of_range_points() {
        assert!(FrequencyGrid::new(vec![0.0, 1.0], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![-0.1, 1.0], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![0.1, std::f64::consts::PI + 1e-9], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 0.1], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![0.2, 0.1], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![0.1, f64::NAN], 1e-3).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 0.2], 0.0).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 0.2], f64::INFINITY).is_err());
    }

    #[test]
    fn grid_accepts_boundary_and_single_point() {
        let g = FrequencyGrid::new(vec![0.5, std::f64::consts::PI], 1e-3).unwrap();
        assert_eq!(g.len(), 2);
        let single = FrequencyGrid::new(vec![1.0], 1e-3).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn log_grid_clips_to_nyquist() {
        let g = FrequencyGrid::log_spaced(0.1, 10_000.0, 50, 1e-3).unwrap();
        assert_eq!(g.len(), 50);
        assert!(*g.omega().last().unwrap() <= std::f64::consts::PI);
        let phys: Vec<f64> = g.omega_phys().collect();
        assert!((phys[0] - 2.0 * std::f64::consts::PI * 0.1).abs() < 1e-9);
    }

    #[test]
    fn dataset_rejects_length_mismatch_and_duplicates() {
        let grid = FrequencyGrid::new(vec![0.1, 0.2, 0.3], 1e-3).unwrap();
        let bad_len = FrfDataset::new(
            grid.clone(),
            Channel::LoadVelocity,
            vec![("a".into(), unit_response(2))],
        );
        assert!(bad_len.is_err());
        let dup = FrfDataset::new(
            grid.clone(),
            Channel::LoadVelocity,
            vec![
                ("a".into(), unit_response(3)),
                ("a".into(), unit_response(3)),
            ],
        );
        assert!(dup.is_err());
        let nan = FrfDataset::new(
            grid,
            Channel::LoadVelocity,
            vec![("a".into(), vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(f64::NAN, 0.0),
                Complex64::new(1.0, 0.0),
            ])],
        );
        assert!(nan.is_err());
    }

    #[test]
    fn merge_requires_matching_grids_and_dedups_labels() {
        let grid = FrequencyGrid::new(vec![0.1, 0.2], 1e-3).unwrap();
        let a = FrfDataset::new(
            grid.clone(),
            Channel::LoadVelocity,
            vec![("cfg".into(), unit_response(2))],
        )
        .unwrap();
        let merged = merge_datasets(&a, &a).unwrap();
        assert_eq!(merged.n_configs(), 2);
        assert_eq!(merged.configs()[0].label(), "cfg");
        assert_eq!(merged.configs()[1].label(), "cfg_2");

        let other_grid = FrequencyGrid::new(vec![0.1, 0.21], 1e-3).unwrap();
        let b = FrfDataset::new(
            other_grid,
            Channel::LoadVelocity,
            vec![("cfg".into(), unit_response(2))],
        )
        .unwrap();
        assert!(matches!(merge_datasets(&a, &b), Err(FrfError::Mismatch(_))));

        let other_ts = FrfDataset::new(
            FrequencyGrid::new(vec![0.1, 0.2], 2e-3).unwrap(),
            Channel::LoadVelocity,
            vec![("cfg".into(), unit_response(2))],
        )
        .unwrap();
        assert!(matches!(merge_datasets(&a, &other_ts), Err(FrfError::Mismatch(_))));
    }

    #[test]
    fn csv_import_parses_metadata_and_pairs() {
        let text = "\
# ts_seconds=0.001
# channel=motor-velocity
omega,re_low,im_low,re_high,im_high
0.1,1.0,0.0,2.0,-0.5
0.2,0.5,0.25,1.5,-1.0
";
        let ds = parse_csv(text).unwrap();
        assert_eq!(ds.grid().ts(), 1e-3);
        assert_eq!(ds.channel(), Channel::MotorVelocity);
        assert_eq!(ds.n_configs(), 2);
        assert_eq!(ds.configs()[1].label(), "high");
        assert_eq!(ds.response(1)[1], Complex64::new(1.5, -1.0));
    }

    #[test]
    fn csv_import_rejects_malformed_input() {
        assert!(parse_csv("omega,re_a,im_a\n0.1,1,0\n").is_err()); // no ts
        assert!(parse_csv("# ts_seconds=0.001\nomega,re_a,im_b\n0.1,1,0\n").is_err());
        assert!(parse_csv("# ts_seconds=0.001\nomega,re_a\n0.1,1\n").is_err());
        assert!(parse_csv("# ts_seconds=0.001\nomega,re_a,im_a\n0.1,1\n").is_err());
        assert!(parse_csv("# ts_seconds=0.001\nomega,re_a,im_a\nx,1,0\n").is_err());
    }

    #[test]
    fn select_thins_grid() {
        let grid = FrequencyGrid::new(vec![0.1, 0.2, 0.3, 0.4], 1e-3).unwrap();
        let ds = FrfDataset::new(
            grid,
            Channel::LoadVelocity,
            vec![("a".into(), vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, 0.0),
            ])],
        )
        .unwrap();
        let thin = ds.select(&[0, 2]).unwrap();
        assert_eq!(thin.grid().omega(), &[0.1, 0.3]);
        assert_eq!(thin.response(0), &[Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]);
    }
}
