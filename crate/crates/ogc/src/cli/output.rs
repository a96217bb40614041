//! Result emission and the `report` reconstruction path.
//!
//! Every float is written with `Display`, which emits the shortest string
//! that parses back to the same bit pattern, so `report` can rebuild the
//! summary table from `trajectory.csv` and `meta.txt` byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::oco::{evaluate_bound_finite, BoundConstants};
use crate::sim::{EpisodeLog, MonteCarloSummary};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed {file}: {reason}")]
    Malformed { file: String, reason: String },
    #[error("summary mismatch: stored summary.csv differs from recomputation")]
    SummaryMismatch,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// In-memory rendering of one run's output files.
pub struct ResultBundle {
    pub trajectory: String,
    pub summary: String,
    pub meta: String,
}

const TRAJECTORY_FIXED: &[&str] = &[
    "step",
    "instantaneous_regret",
    "average_regret",
    "average_variability",
    "bound",
    "objective_at_implemented",
    "realized_objective",
    "objective_at_comparator",
    "substation_power",
    "tracking_target",
    "bibs_ok",
];

fn f(v: f64) -> String {
    format!("{}", v)
}

impl ResultBundle {
    pub fn from_episode(log: &EpisodeLog<f64>, meta_extra: &[(String, String)]) -> Self {
        let first = &log.rows[0];
        let mut header: Vec<String> = TRAJECTORY_FIXED.iter().map(|s| s.to_string()).collect();
        for i in 0..first.requested.len() {
            header.push(format!("requested_{i}"));
        }
        for i in 0..first.implemented.len() {
            header.push(format!("implemented_{i}"));
        }
        for i in 0..first.comparator.len() {
            header.push(format!("comparator_{i}"));
        }
        for i in 0..first.realized_power.len() / 2 {
            header.push(format!("realized_p_{i}"));
            header.push(format!("realized_q_{i}"));
        }
        for i in 0..first.voltages.len() {
            header.push(format!("voltage_{i}"));
        }
        for i in 0..first.hvac_on.len() {
            header.push(format!("hvac_on_{i}"));
            header.push(format!("hvac_locked_{i}"));
        }
        for i in 0..first.battery_soc.len() {
            header.push(format!("battery_soc_{i}"));
        }

        let mut trajectory = header.join(",");
        trajectory.push('\n');
        for r in &log.rows {
            let mut cells = vec![
                r.step.to_string(),
                f(r.instantaneous_regret),
                f(r.average_regret),
                f(r.average_variability),
                f(r.bound_value),
                f(r.objective_at_implemented),
                f(r.realized_objective),
                f(r.objective_at_comparator),
                f(r.substation_power),
                f(r.tracking_target),
                r.bibs_ok.to_string(),
            ];
            cells.extend(r.requested.iter().map(|&v| f(v)));
            cells.extend(r.implemented.iter().map(|&v| f(v)));
            cells.extend(r.comparator.iter().map(|&v| f(v)));
            cells.extend(r.realized_power.iter().map(|&v| f(v)));
            cells.extend(r.voltages.iter().map(|&v| f(v)));
            for (on, locked) in r.hvac_on.iter().zip(&r.hvac_locked) {
                cells.push(on.to_string());
                cells.push(locked.to_string());
            }
            cells.extend(r.battery_soc.iter().map(|&v| f(v)));
            trajectory.push_str(&cells.join(","));
            trajectory.push('\n');
        }

        let summary = render_summary(
            &log.constants,
            log.account.average_regret(),
            log.account.average_variability(),
            log.bound_value,
            log.rows.len(),
            log.seed,
            log.bibs_ok,
        );

        let mut meta = String::new();
        let c = &log.constants;
        // No wall-clock timings here: identical seeds must give
        // byte-identical files.
        for (k, v) in [
            ("tool_version", env!("CARGO_PKG_VERSION").to_string()),
            ("seed", log.seed.to_string()),
            ("horizon", log.rows.len().to_string()),
            ("alpha", f(c.step_size)),
            ("epsilon", f(c.meas_error)),
            ("grad_bound", f(c.grad_bound)),
            ("lipschitz", f(c.lipschitz)),
            ("diameter", f(c.diameter)),
            ("norm_bound", f(c.norm_bound)),
        ] {
            let _ = writeln!(meta, "{}: {}", k, v);
        }
        for (k, v) in meta_extra {
            let _ = writeln!(meta, "{}: {}", k, v);
        }

        ResultBundle {
            trajectory,
            summary,
            meta,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, content) in [
            ("trajectory.csv", &self.trajectory),
            ("summary.csv", &self.summary),
            ("meta.txt", &self.meta),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

fn render_summary(
    constants: &BoundConstants<f64>,
    average_regret: f64,
    average_variability: f64,
    bound: f64,
    steps: usize,
    seed: u64,
    bibs_ok: bool,
) -> String {
    let header = "steps,seed,average_regret,average_variability,bound,k1,k2,k3,\
                  grad_bound,lipschitz,diameter,norm_bound,alpha,epsilon,bibs_ok";
    let row = [
        steps.to_string(),
        seed.to_string(),
        f(average_regret),
        f(average_variability),
        f(bound),
        f(constants.k1),
        f(constants.k2),
        f(constants.k3),
        f(constants.grad_bound),
        f(constants.lipschitz),
        f(constants.diameter),
        f(constants.norm_bound),
        f(constants.step_size),
        f(constants.meas_error),
        bibs_ok.to_string(),
    ]
    .join(",");
    format!("{header}\n{row}\n")
}

/// Writes the aggregate table for a multi-seed run.
pub fn write_aggregate(
    summary: &MonteCarloSummary<f64>,
    seeds: &[u64],
    dir: &Path,
) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut table = String::from("seed,average_regret,bound\n");
    for (seed, regret) in seeds.iter().zip(&summary.per_seed_average_regret) {
        let _ = writeln!(table, "{},{},{}", seed, f(*regret), f(summary.bound_value));
    }
    let path = dir.join("aggregate.csv");
    std::fs::write(&path, &table).map_err(io_err(&path))?;

    let mut meta = String::new();
    for (k, v) in [
        ("episodes", summary.per_seed_average_regret.len().to_string()),
        ("mean_average_regret", f(summary.mean_average_regret)),
        ("std_error", f(summary.std_error)),
        ("bound", f(summary.bound_value)),
    ] {
        let _ = writeln!(meta, "{}: {}", k, v);
    }
    let path = dir.join("meta.txt");
    std::fs::write(&path, &meta).map_err(io_err(&path))?;
    Ok(())
}

/// Rebuilds the summary table of a previous run from its trajectory and
/// metadata. The result is byte-identical to the `summary.csv` the run
/// wrote.
pub fn recompute_summary(dir: &Path) -> Result<String, OutputError> {
    let meta_path = dir.join("meta.txt");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let lookup = |key: &str| -> Result<&str, OutputError> {
        meta_text
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}: ")))
            .ok_or_else(|| OutputError::Malformed {
                file: "meta.txt".into(),
                reason: format!("missing key `{key}`"),
            })
    };
    let float = |key: &str| -> Result<f64, OutputError> {
        lookup(key)?.parse().map_err(|_| OutputError::Malformed {
            file: "meta.txt".into(),
            reason: format!("key `{key}` is not a number"),
        })
    };
    let seed: u64 = lookup("seed")?.parse().map_err(|_| OutputError::Malformed {
        file: "meta.txt".into(),
        reason: "key `seed` is not an integer".into(),
    })?;
    let constants = BoundConstants::new(
        float("grad_bound")?,
        float("lipschitz")?,
        float("diameter")?,
        float("norm_bound")?,
        float("alpha")?,
        float("epsilon")?,
    );

    let traj_path = dir.join("trajectory.csv");
    let traj = std::fs::read_to_string(&traj_path).map_err(io_err(&traj_path))?;
    let mut lines = traj.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| OutputError::Malformed {
            file: "trajectory.csv".into(),
            reason: "empty file".into(),
        })?
        .split(',')
        .collect();
    let col = |name: &str| -> Result<usize, OutputError> {
        header
            .iter()
            .position(|&h| h == name)
            .ok_or_else(|| OutputError::Malformed {
                file: "trajectory.csv".into(),
                reason: format!("missing column `{name}`"),
            })
    };
    let regret_col = col("instantaneous_regret")?;
    let var_col = col("average_variability")?;
    let bibs_col = col("bibs_ok")?;

    let mut cumulative = 0.0f64;
    let mut steps = 0usize;
    let mut last_avg_var = 0.0f64;
    let mut bibs_ok = true;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let cell = |i: usize| -> Result<&str, OutputError> {
            cells.get(i).copied().ok_or_else(|| OutputError::Malformed {
                file: "trajectory.csv".into(),
                reason: format!("row {} too short", steps + 1),
            })
        };
        let bad = |what: &str| OutputError::Malformed {
            file: "trajectory.csv".into(),
            reason: format!("row {}: bad {}", steps + 1, what),
        };
        cumulative += cell(regret_col)?
            .parse::<f64>()
            .map_err(|_| bad("regret"))?;
        last_avg_var = cell(var_col)?
            .parse::<f64>()
            .map_err(|_| bad("variability"))?;
        bibs_ok &= cell(bibs_col)? == "true";
        steps += 1;
    }
    if steps == 0 {
        return Err(OutputError::Malformed {
            file: "trajectory.csv".into(),
            reason: "no data rows".into(),
        });
    }
    let average_regret = cumulative / steps as f64;
    let bound = evaluate_bound_finite(&constants, last_avg_var, steps);
    Ok(render_summary(
        &constants,
        average_regret,
        last_avg_var,
        bound,
        steps,
        seed,
        bibs_ok,
    ))
}

/// `report` entry point: recomputes the summary, checks it against the
/// stored one when present, and returns the table text.
pub fn report(dir: &Path) -> Result<String, OutputError> {
    let recomputed = recompute_summary(dir)?;
    let stored = dir.join("summary.csv");
    if stored.exists() {
        let existing = std::fs::read_to_string(&stored).map_err(io_err(&stored))?;
        if existing != recomputed {
            return Err(OutputError::SummaryMismatch);
        }
    }
    Ok(recomputed)
}
