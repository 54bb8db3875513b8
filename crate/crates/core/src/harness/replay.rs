//! Re-derives stored slots from the saved config and seed.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::config::RunConfig;
use super::run::{
    format_slot_row, simulate_run, CONFIG_FILE, SLOTS_FILE, SUMMARY_COLUMNS, SUMMARY_FILE,
};
use crate::error::{Error, Result};
use crate::mechanism::SlotRecord;
use crate::oracle::{finalize_metrics, BaselineValues, MetricLedger, Metrics, SStarMethod};

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub record: SlotRecord<f64>,
    pub row: String,
    /// Ledger after the replayed slot.
    pub ledger: MetricLedger<f64>,
    /// Final-slot metrics, checked against the stored summary.
    pub metrics: Option<Metrics<f64>>,
}

fn open(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::open(&path).map_err(|_| Error::MissingArtifact(path))
}

fn load_config(dir: &Path) -> Result<RunConfig> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    RunConfig::load(&path)
}

/// Stored rows of one run, in file order.
fn stored_rows(dir: &Path, run: usize) -> Result<Vec<String>> {
    let prefix = format!("{run},");
    let mut rows = Vec::new();
    for line in BufReader::new(open(dir, SLOTS_FILE)?).lines().skip(1) {
        let line = line?;
        if line.starts_with(&prefix) {
            rows.push(line);
        }
    }
    Ok(rows)
}

/// Stored summary row of `run`: baselines and the `SUMMARY_COLUMNS` strings.
fn stored_summary(dir: &Path, run: usize) -> Result<(BaselineValues<f64>, Vec<String>)> {
    let mut reader = csv::Reader::from_reader(open(dir, SUMMARY_FILE)?);
    let headers = reader.headers()?.clone();
    let field = |rec: &csv::StringRecord, name: &str| -> Result<String> {
        let i = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("summary lacks column `{name}`")))?;
        Ok(rec[i].to_string())
    };
    let parse = |s: String| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Config(format!("unparsable summary value `{s}`")))
    };
    for rec in reader.records() {
        let rec = rec?;
        if rec.get(0) == Some(run.to_string().as_str()) {
            let baselines = BaselineValues {
                s_star: parse(field(&rec, "s_star")?)?,
                s_dagger: parse(field(&rec, "s_dagger")?)?,
                s_star_method: SStarMethod::ExactFiniteSupport,
            };
            let values = SUMMARY_COLUMNS
                .iter()
                .map(|c| field(&rec, c))
                .collect::<Result<_>>()?;
            return Ok((baselines, values));
        }
    }
    Err(Error::Config(format!("summary has no row for run {run}")))
}

fn check_summary(dir: &Path, run: usize, ledger: &MetricLedger<f64>) -> Result<Metrics<f64>> {
    let (baselines, stored) = stored_summary(dir, run)?;
    let metrics = finalize_metrics(ledger, Some(&baselines))?;
    let replayed = [
        metrics.regret,
        metrics.violation,
        metrics.profit,
        metrics.degradation,
    ];
    for (i, value) in replayed.iter().enumerate() {
        if value.to_string() != stored[i] {
            return Err(Error::ReplayMismatch {
                run,
                slot: ledger.slots,
                stored: format!("{} = {}", SUMMARY_COLUMNS[i], stored[i]),
                replayed: format!("{} = {value}", SUMMARY_COLUMNS[i]),
            });
        }
    }
    Ok(metrics)
}

/// Replays `slot` of `run` and checks it against the stored row. On the
/// final slot the cumulative metrics are also checked against the summary.
pub fn replay(dir: &Path, run: usize, slot: u64) -> Result<ReplayReport> {
    let config = load_config(dir)?;
    if slot == 0 || slot > config.t || run >= config.r {
        return Err(Error::InvalidArgument(format!(
            "run {run}, slot {slot} outside R = {}, T = {}",
            config.r, config.t
        )));
    }
    let prefix = format!("{run},{slot},");
    let stored = stored_rows(dir, run)?
        .into_iter()
        .find(|l| l.starts_with(&prefix))
        .ok_or_else(|| Error::Config(format!("no stored row for run {run}, slot {slot}")))?;

    let mut found = None;
    let ledger = simulate_run(&config, run, |record, _| {
        if record.slot == slot {
            found = Some(record.clone());
            return Ok(false);
        }
        Ok(true)
    })?;
    let record = found.expect("slot within horizon");
    let row = format_slot_row(run, &record);
    if row != stored {
        return Err(Error::ReplayMismatch {
            run,
            slot,
            stored,
            replayed: row,
        });
    }
    let metrics = if slot == config.t {
        Some(check_summary(dir, run, &ledger)?)
    } else {
        None
    };
    Ok(ReplayReport {
        record,
        row,
        ledger,
        metrics,
    })
}

/// Replays every slot of `run` in one pass. Returns the number of slots checked.
pub fn replay_all(dir: &Path, run: usize) -> Result<u64> {
    let config = load_config(dir)?;
    if run >= config.r {
        return Err(Error::InvalidArgument(format!(
            "run {run} outside R = {}",
            config.r
        )));
    }
    let stored = stored_rows(dir, run)?;
    if stored.len() as u64 != config.t {
        return Err(Error::Config(format!(
            "run {run} has {} stored rows, expected {}",
            stored.len(),
            config.t
        )));
    }
    let mut checked = 0u64;
    let ledger = simulate_run(&config, run, |record, _| {
        let row = format_slot_row(run, record);
        let expected = &stored[checked as usize];
        if &row != expected {
            return Err(Error::ReplayMismatch {
                run,
                slot: record.slot,
                stored: expected.clone(),
                replayed: row,
            });
        }
        checked += 1;
        Ok(true)
    })?;
    check_summary(dir, run, &ledger)?;
    Ok(checked)
}
