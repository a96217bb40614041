//! Scenario-file ingestion: TOML schema, validation, and time-series
//! loading from inline values or referenced delimited files.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::devices::{BatteryDevice, HvacDevice, PvDevice};
use crate::grid::GridModel;
use crate::sim::{ConstantsOverride, DeviceSpec, Scenario, Series};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("series `{field}` has {actual} values but the horizon needs {required}")]
    SeriesLength {
        field: String,
        actual: usize,
        required: usize,
    },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn schema(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// A scalar time series written inline: a single constant or one value
/// per step.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarSeriesSpec {
    Constant(f64),
    Inline(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub run: RunSection,
    pub grid: GridSection,
    pub devices: Vec<DeviceSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    pub alpha: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_comparator_tol")]
    pub comparator_tol: f64,
}

fn default_comparator_tol() -> f64 {
    1e-6
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    pub voltage_matrix: Option<Vec<Vec<f64>>>,
    pub voltage_matrix_file: Option<String>,
    pub voltage_offset: Option<Vec<f64>>,
    pub voltage_offset_file: Option<String>,
    pub substation_weights: Option<Vec<f64>>,
    pub substation_weights_file: Option<String>,
    pub substation_offset: Option<ScalarSeriesSpec>,
    pub substation_offset_file: Option<String>,
    pub tracking_target: Option<ScalarSeriesSpec>,
    pub tracking_target_file: Option<String>,
    pub device_weights: Option<Vec<f64>>,
}

fn default_v_min() -> f64 {
    0.95
}

fn default_v_max() -> f64 {
    1.05
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeviceSection {
    Pv {
        s_rated: f64,
        available_power: Option<ScalarSeriesSpec>,
        available_power_file: Option<String>,
        c1: f64,
        c2: f64,
    },
    Battery {
        s_rated: f64,
        soc: f64,
        soc_target: f64,
        capacity_energy: f64,
        step_duration: f64,
        #[serde(default = "default_taper")]
        taper_fraction: f64,
        c1: f64,
        c2: f64,
    },
    Hvac {
        p_max: f64,
        #[serde(default)]
        min_on_steps: usize,
        #[serde(default)]
        min_off_steps: usize,
        cost_on: Option<ScalarSeriesSpec>,
        cost_on_file: Option<String>,
        cost_off: Option<ScalarSeriesSpec>,
        cost_off_file: Option<String>,
    },
}

fn default_taper() -> f64 {
    0.05
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<String>,
}

/// Parses and validates a scenario file, resolving referenced series files
/// relative to the scenario's directory.
pub fn load_scenario(path: &Path) -> Result<(Scenario<f64>, OutputSection), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    load_scenario_str(&text, &base)
}

/// Parses a scenario from text; series files are resolved against `base`.
pub fn load_scenario_str(
    text: &str,
    base: &Path,
) -> Result<(Scenario<f64>, OutputSection), ConfigError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build_scenario(file, base)
}

fn build_scenario(
    file: ScenarioFile,
    base: &Path,
) -> Result<(Scenario<f64>, OutputSection), ConfigError> {
    let run = &file.run;
    if run.horizon == 0 {
        return Err(schema("run.horizon", "must be at least 1"));
    }
    if !(run.alpha > 0.0) || !run.alpha.is_finite() {
        return Err(schema("run.alpha", "must be positive and finite"));
    }
    if run.epsilon < 0.0 || !run.epsilon.is_finite() {
        return Err(schema("run.epsilon", "must be nonnegative and finite"));
    }
    if !(run.comparator_tol > 0.0) {
        return Err(schema("run.comparator_tol", "must be positive"));
    }
    let steps = run.horizon + 1;

    let g = &file.grid;
    if !g.v_min.is_finite() || !g.v_max.is_finite() || g.v_min >= g.v_max {
        return Err(schema("grid.v_min", "v_min must be finite and below v_max"));
    }
    if file.devices.is_empty() {
        return Err(schema("devices", "at least one device required"));
    }
    let j = file.devices.len();

    let devices: Vec<DeviceSpec<f64>> = file
        .devices
        .into_iter()
        .enumerate()
        .map(|(i, d)| build_device(i, d, base, steps))
        .collect::<Result<_, _>>()?;

    let voltage_matrix = match (&g.voltage_matrix, &g.voltage_matrix_file) {
        (Some(m), None) => {
            validate_matrix(m, 2 * j, "grid.voltage_matrix")?;
            Series::Constant(m.clone())
        }
        (None, Some(f)) => load_matrix_series(&base.join(f), 2 * j, steps, "grid.voltage_matrix")?,
        (None, None) => {
            return Err(schema(
                "grid.voltage_matrix",
                "either an inline matrix or a file reference is required",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(schema(
                "grid.voltage_matrix",
                "inline value and file reference are mutually exclusive",
            ))
        }
    };
    let nodes = match &voltage_matrix {
        Series::Constant(m) => m.len(),
        Series::PerStep(ms) => ms[0].len(),
    };

    let voltage_offset = vector_series(
        &g.voltage_offset,
        &g.voltage_offset_file,
        base,
        nodes,
        steps,
        "grid.voltage_offset",
    )?;
    let substation_weights = vector_series(
        &g.substation_weights,
        &g.substation_weights_file,
        base,
        2 * j,
        steps,
        "grid.substation_weights",
    )?;
    let substation_offset = scalar_series(
        &g.substation_offset,
        &g.substation_offset_file,
        base,
        steps,
        "grid.substation_offset",
    )?
    .unwrap_or(Series::Constant(0.0));
    let tracking_signal = scalar_series(
        &g.tracking_target,
        &g.tracking_target_file,
        base,
        steps,
        "grid.tracking_target",
    )?
    .unwrap_or(Series::Constant(0.0));

    let device_weights = match &g.device_weights {
        Some(w) => {
            if w.len() != j {
                return Err(schema(
                    "grid.device_weights",
                    format!("expected {} entries, found {}", j, w.len()),
                ));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(schema("grid.device_weights", "must be nonnegative and finite"));
            }
            w.clone()
        }
        None => vec![1.0 / j as f64; j],
    };

    let grid = GridModel {
        voltage_matrix,
        voltage_offset,
        substation_weights,
        substation_offset,
        v_min: g.v_min,
        v_max: g.v_max,
        tracking_signal,
        device_weights,
    };

    let scenario = Scenario {
        horizon: run.horizon,
        step_size_alpha: run.alpha,
        meas_epsilon: run.epsilon,
        rng_seed: run.seed,
        comparator_tol: run.comparator_tol,
        devices,
        grid,
        constants_override: None::<ConstantsOverride<f64>>,
    };
    scenario
        .validate()
        .map_err(|e| schema("scenario", e.to_string()))?;
    Ok((scenario, file.output))
}

fn build_device(
    id: usize,
    section: DeviceSection,
    base: &Path,
    steps: usize,
) -> Result<DeviceSpec<f64>, ConfigError> {
    let field = |name: &str| format!("devices[{id}].{name}");
    match section {
        DeviceSection::Pv {
            s_rated,
            available_power,
            available_power_file,
            c1,
            c2,
        } => {
            if !(s_rated > 0.0) || !s_rated.is_finite() {
                return Err(schema(&field("s_rated"), "must be positive and finite"));
            }
            if c1 < 0.0 || c2 < 0.0 || !c1.is_finite() || !c2.is_finite() {
                return Err(schema(&field("c1"), "cost coefficients must be nonnegative"));
            }
            let series = scalar_series(
                &available_power,
                &available_power_file,
                base,
                steps,
                &field("available_power"),
            )?
            .ok_or_else(|| schema(&field("available_power"), "required"))?;
            if series.iter_over(steps).any(|p| p < 0.0 || !p.is_finite()) {
                return Err(schema(
                    &field("available_power"),
                    "values must be nonnegative and finite",
                ));
            }
            Ok(DeviceSpec::Pv(PvDevice {
                id,
                s_rated,
                available_power: series,
                c1,
                c2,
            }))
        }
        DeviceSection::Battery {
            s_rated,
            soc,
            soc_target,
            capacity_energy,
            step_duration,
            taper_fraction,
            c1,
            c2,
        } => {
            if !(s_rated > 0.0) || !s_rated.is_finite() {
                return Err(schema(&field("s_rated"), "must be positive and finite"));
            }
            if !(0.0..=1.0).contains(&soc) {
                return Err(schema(&field("soc"), "must be in [0, 1]"));
            }
            if !(0.0..=1.0).contains(&soc_target) {
                return Err(schema(&field("soc_target"), "must be in [0, 1]"));
            }
            if !(capacity_energy > 0.0) || !(step_duration > 0.0) {
                return Err(schema(
                    &field("capacity_energy"),
                    "capacity and step duration must be positive",
                ));
            }
            if c1 < 0.0 || c2 < 0.0 {
                return Err(schema(&field("c1"), "cost coefficients must be nonnegative"));
            }
            Ok(DeviceSpec::Battery(BatteryDevice {
                id,
                s_rated,
                soc,
                soc_target,
                capacity_energy,
                step_duration,
                taper_fraction,
                c1,
                c2,
            }))
        }
        DeviceSection::Hvac {
            p_max,
            min_on_steps,
            min_off_steps,
            cost_on,
            cost_on_file,
            cost_off,
            cost_off_file,
        } => {
            if !(p_max > 0.0) || !p_max.is_finite() {
                return Err(schema(&field("p_max"), "must be positive and finite"));
            }
            let on = scalar_series(&cost_on, &cost_on_file, base, steps, &field("cost_on"))?
                .ok_or_else(|| schema(&field("cost_on"), "required"))?;
            let off = scalar_series(&cost_off, &cost_off_file, base, steps, &field("cost_off"))?
                .ok_or_else(|| schema(&field("cost_off"), "required"))?;
            Ok(DeviceSpec::Hvac(HvacDevice::new(
                id,
                p_max,
                min_on_steps,
                min_off_steps,
                on,
                off,
            )))
        }
    }
}

fn scalar_series(
    inline: &Option<ScalarSeriesSpec>,
    file: &Option<String>,
    base: &Path,
    steps: usize,
    field_name: &str,
) -> Result<Option<Series<f64>>, ConfigError> {
    match (inline, file) {
        (Some(_), Some(_)) => Err(schema(
            field_name,
            "inline value and file reference are mutually exclusive",
        )),
        (Some(ScalarSeriesSpec::Constant(v)), None) => {
            check_finite(&[*v], field_name)?;
            Ok(Some(Series::Constant(*v)))
        }
        (Some(ScalarSeriesSpec::Inline(vs)), None) => {
            check_len(vs.len(), steps, field_name)?;
            check_finite(vs, field_name)?;
            Ok(Some(Series::PerStep(vs.clone())))
        }
        (None, Some(f)) => {
            let values = read_values(&base.join(f))?;
            check_len(values.len(), steps, field_name)?;
            check_finite(&values, field_name)?;
            Ok(Some(Series::PerStep(values)))
        }
        (None, None) => Ok(None),
    }
}

fn vector_series(
    inline: &Option<Vec<f64>>,
    file: &Option<String>,
    base: &Path,
    width: usize,
    steps: usize,
    field_name: &str,
) -> Result<Series<Vec<f64>>, ConfigError> {
    match (inline, file) {
        (Some(_), Some(_)) => Err(schema(
            field_name,
            "inline value and file reference are mutually exclusive",
        )),
        (Some(v), None) => {
            if v.len() != width {
                return Err(schema(
                    field_name,
                    format!("expected {} entries, found {}", width, v.len()),
                ));
            }
            check_finite(v, field_name)?;
            Ok(Series::Constant(v.clone()))
        }
        (None, Some(f)) => {
            let rows = read_rows(&base.join(f))?;
            check_len(rows.len(), steps, field_name)?;
            for r in &rows {
                if r.len() != width {
                    return Err(schema(
                        field_name,
                        format!("expected {} entries per line, found {}", width, r.len()),
                    ));
                }
                check_finite(r, field_name)?;
            }
            Ok(Series::PerStep(rows))
        }
        (None, None) => Err(schema(field_name, "required")),
    }
}

fn validate_matrix(m: &[Vec<f64>], cols: usize, field_name: &str) -> Result<(), ConfigError> {
    if m.is_empty() {
        return Err(schema(field_name, "matrix must have at least one row"));
    }
    for row in m {
        if row.len() != cols {
            return Err(schema(
                field_name,
                format!("expected {} columns, found {}", cols, row.len()),
            ));
        }
        check_finite(row, field_name)?;
    }
    Ok(())
}

// Matrix series file: first line "rows cols", then one flattened
// row-major matrix per step.
fn load_matrix_series(
    path: &Path,
    cols: usize,
    steps: usize,
    field_name: &str,
) -> Result<Series<Vec<Vec<f64>>>, ConfigError> {
    let rows = read_rows(path)?;
    let header = rows
        .first()
        .ok_or_else(|| schema(field_name, "matrix series file is empty"))?;
    if header.len() != 2 {
        return Err(schema(
            field_name,
            "matrix series file must start with a `rows cols` line",
        ));
    }
    let (r, c) = (header[0] as usize, header[1] as usize);
    if c != cols || r == 0 {
        return Err(schema(
            field_name,
            format!("expected {} columns, header declares {}", cols, c),
        ));
    }
    let body = &rows[1..];
    check_len(body.len(), steps, field_name)?;
    let mut series = Vec::with_capacity(body.len());
    for line in body {
        if line.len() != r * c {
            return Err(schema(
                field_name,
                format!("expected {} values per line, found {}", r * c, line.len()),
            ));
        }
        check_finite(line, field_name)?;
        series.push(line.chunks(c).map(|ch| ch.to_vec()).collect());
    }
    Ok(Series::PerStep(series))
}

fn check_len(actual: usize, required: usize, field_name: &str) -> Result<(), ConfigError> {
    if actual < required {
        Err(ConfigError::SeriesLength {
            field: field_name.to_string(),
            actual,
            required,
        })
    } else {
        Ok(())
    }
}

fn check_finite(values: &[f64], field_name: &str) -> Result<(), ConfigError> {
    if values.iter().any(|v| !v.is_finite()) {
        Err(schema(field_name, "values must be finite"))
    } else {
        Ok(())
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>, ConfigError> {
    Ok(read_rows(path)?.into_iter().flatten().collect())
}

// Whitespace- or comma-delimited numeric rows; blank lines and lines
// starting with '#' are skipped.
fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(str::parse::<f64>)
            .collect();
        rows.push(row.map_err(|e| {
            ConfigError::Parse(format!("{}:{}: {}", path.display(), lineno + 1, e))
        })?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [run]
        horizon = 3
        alpha = 0.1

        [grid]
        voltage_matrix = [[0.1, 0.0]]
        voltage_offset = [1.0]
        substation_weights = [1.0, 0.0]

        [[devices]]
        kind = "pv"
        s_rated = 1.0
        available_power = 0.8
        c1 = 1.0
        c2 = 0.5
    "#;

    #[test]
    fn minimal_file_round_trips() {
        let (sc, _) = load_scenario_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(sc.horizon, 3);
        assert_eq!(sc.devices.len(), 1);
        assert_eq!(sc.grid.device_weights, vec![1.0]);
    }

    #[test]
    fn inverted_voltage_band_names_the_field() {
        let text = MINIMAL.replace("[grid]", "[grid]\n        v_min = 1.1\n        v_max = 1.0");
        match load_scenario_str(&text, Path::new(".")) {
            Err(ConfigError::Schema { field, .. }) => assert!(field.contains("v_min")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn short_series_reports_both_lengths() {
        let text = MINIMAL.replace("available_power = 0.8", "available_power = [0.8, 0.8]");
        match load_scenario_str(&text, Path::new(".")) {
            Err(ConfigError::SeriesLength {
                actual, required, ..
            }) => {
                assert_eq!(actual, 2);
                assert_eq!(required, 4);
            }
            other => panic!("expected series length error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("alpha = 0.1", "alpha = 0.1\n        frobnicate = 1");
        assert!(matches!(
            load_scenario_str(&text, Path::new(".")),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn arbitrary_bytes_do_not_panic() {
        for garbage in ["", "=", "[[run", "\u{0}\u{1}\u{2}", "[run]\nhorizon = -1"] {
            let _ = load_scenario_str(garbage, Path::new("."));
        }
    }
}
