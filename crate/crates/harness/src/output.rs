//! CSV and SVG files of an experiment.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, PlotToggles, PolicyGroup};
use crate::error::{HarnessError, Result};
use crate::runner::{mean_curve, summarize, EpochDelayRow, ExperimentOutput, PullRow, ResultRow, SummaryRow};
use crate::svg::{LinePlot, Series};

pub const RESULTS_HEADER: [&str; 8] = [
    "scenario",
    "policy",
    "seed",
    "t",
    "cum_regret",
    "cum_avg_delay",
    "chosen_arm",
    "x_t",
];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_table(path: &Path, header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in records {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_table(
        path,
        &RESULTS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.scenario.clone(),
                r.policy.clone(),
                r.seed.to_string(),
                r.t.to_string(),
                fmt_f64(r.cum_regret),
                fmt_f64(r.cum_avg_delay),
                r.chosen_arm.to_string(),
                fmt_f64(r.x_t),
            ]
        }),
    )
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(HarnessError::Report(format!(
            "{}: unexpected header `{}`",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_table(
        path,
        &[
            "scenario",
            "policy",
            "runs",
            "horizon",
            "mean_regret",
            "std_regret",
            "mean_avg_delay",
            "std_avg_delay",
        ],
        rows.iter().map(|r| {
            vec![
                r.scenario.clone(),
                r.policy.clone(),
                r.runs.to_string(),
                r.horizon.to_string(),
                fmt_f64(r.mean_regret),
                fmt_f64(r.std_regret),
                fmt_f64(r.mean_avg_delay),
                fmt_f64(r.std_avg_delay),
            ]
        }),
    )
}

pub fn write_epoch_delay_csv(path: &Path, rows: &[EpochDelayRow]) -> Result<()> {
    write_table(
        path,
        &["policy", "epoch", "start", "end", "mean_delay", "std_delay"],
        rows.iter().map(|r| {
            vec![
                r.policy.clone(),
                r.epoch.to_string(),
                r.start.to_string(),
                r.end.to_string(),
                fmt_f64(r.mean_delay),
                fmt_f64(r.std_delay),
            ]
        }),
    )
}

pub fn write_pull_counts_csv(path: &Path, rows: &[PullRow]) -> Result<()> {
    write_table(
        path,
        &["policy", "arm", "mean_pulls", "std_pulls"],
        rows.iter().map(|r| {
            vec![
                r.policy.clone(),
                r.arm.to_string(),
                fmt_f64(r.mean_pulls),
                fmt_f64(r.std_pulls),
            ]
        }),
    )
}

fn series(rows: &[ResultRow], labels: &[String], column: fn(&ResultRow) -> f64) -> Vec<Series> {
    labels
        .iter()
        .map(|l| Series {
            label: l.clone(),
            points: mean_curve(rows, l, column)
                .into_iter()
                .map(|(t, m, s)| (t as f64, m, s))
                .collect(),
        })
        .collect()
}

/// Label grouping used when only the rows are available: sweep entries
/// carry their parameter in brackets.
pub fn group_of_label(label: &str) -> PolicyGroup {
    if label.contains("[beta0=") {
        PolicyGroup::BetaSweep
    } else if label.contains("[rho=") {
        PolicyGroup::ThresholdSweep
    } else {
        PolicyGroup::Main
    }
}

/// Writes the enabled plots and returns their paths.
pub fn write_plots(
    dir: &Path,
    scenario: &str,
    rows: &[ResultRow],
    groups: &[(String, PolicyGroup)],
    plots: PlotToggles,
) -> Result<Vec<PathBuf>> {
    let labels = |g: PolicyGroup| -> Vec<String> {
        groups
            .iter()
            .filter(|(_, lg)| *lg == g)
            .map(|(l, _)| l.clone())
            .collect()
    };
    let regret = |r: &ResultRow| r.cum_regret;
    let delay = |r: &ResultRow| r.cum_avg_delay;
    let mut figures = Vec::new();
    if plots.regret_vs_t {
        figures.push(("regret_vs_t.svg", "Cumulative regret", "cumulative regret (s)", labels(PolicyGroup::Main), regret as fn(&ResultRow) -> f64));
    }
    if plots.avg_delay_vs_t {
        figures.push(("avg_delay_vs_t.svg", "Average delay", "average delay (s)", labels(PolicyGroup::Main), delay));
    }
    if plots.beta_sweep {
        figures.push(("beta_sweep.svg", "Exploration weight", "cumulative regret (s)", labels(PolicyGroup::BetaSweep), regret));
    }
    if plots.threshold_sweep {
        figures.push(("threshold_sweep.svg", "Normalization thresholds", "cumulative regret (s)", labels(PolicyGroup::ThresholdSweep), regret));
    }
    let mut written = Vec::new();
    for (file, title, y_label, labels, column) in figures {
        let plot = LinePlot {
            title: format!("{title} ({scenario})"),
            x_label: "period t".into(),
            y_label: y_label.into(),
            series: series(rows, &labels, column),
        };
        let path = dir.join(file);
        fs::write(&path, plot.render()).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every output of a finished experiment and returns the paths.
pub fn emit_outputs(out: &ExperimentOutput, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows = out.rows(config.stride);
    let mut written = Vec::new();

    let p = dir.join("results.csv");
    write_results_csv(&p, &rows)?;
    written.push(p);

    let p = dir.join("summary.csv");
    write_summary_csv(&p, &out.summary())?;
    written.push(p);

    let p = dir.join("epoch_delay.csv");
    write_epoch_delay_csv(&p, &out.epoch_delays())?;
    written.push(p);

    let p = dir.join("pull_counts.csv");
    write_pull_counts_csv(&p, &out.pull_table())?;
    written.push(p);

    if !out.failures.is_empty() {
        let p = dir.join("failures.csv");
        write_table(
            &p,
            &["policy", "seed", "diagnosis"],
            out.failures
                .iter()
                .map(|f| vec![f.label.clone(), f.seed.to_string(), f.diagnosis.clone()]),
        )?;
        written.push(p);
    }

    let groups: Vec<(String, PolicyGroup)> = config.policies.iter().map(|p| (p.label.clone(), p.group)).collect();
    written.extend(write_plots(dir, &out.scenario, &rows, &groups, config.plots)?);
    Ok(written)
}

/// Re-aggregates an existing results file into `dir`: the summary table and
/// the plots whose series are present.
pub fn report(results: &Path, dir: &Path, plots: PlotToggles) -> Result<Vec<PathBuf>> {
    let rows = read_results_csv(results)?;
    if rows.is_empty() {
        return Err(HarnessError::Report(format!("{}: no rows", results.display())));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let summary = summarize(&rows);
    let p = dir.join("summary.csv");
    write_summary_csv(&p, &summary)?;
    let mut written = vec![p];
    let groups: Vec<(String, PolicyGroup)> = summary
        .iter()
        .map(|s| (s.policy.clone(), group_of_label(&s.policy)))
        .collect();
    let present = |g: PolicyGroup| groups.iter().any(|(_, lg)| *lg == g);
    let plots = PlotToggles {
        regret_vs_t: plots.regret_vs_t && present(PolicyGroup::Main),
        avg_delay_vs_t: plots.avg_delay_vs_t && present(PolicyGroup::Main),
        beta_sweep: plots.beta_sweep && present(PolicyGroup::BetaSweep),
        threshold_sweep: plots.threshold_sweep && present(PolicyGroup::ThresholdSweep),
    };
    written.extend(write_plots(dir, &rows[0].scenario, &rows, &groups, plots)?);
    Ok(written)
}
