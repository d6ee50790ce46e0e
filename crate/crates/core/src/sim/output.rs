use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::uplink_receiver::EstimatorKind;

use super::config::ExperimentConfig;
use super::runner::{EdgeRecord, ExperimentResults, RateRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindSummary {
    pub records: usize,
    pub mean_se: Option<f64>,
    pub median_se: Option<f64>,
    pub sum_se: Option<f64>,
    pub mean_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub kinds: BTreeMap<String, KindSummary>,
    pub edges: usize,
    pub mean_pe_raw: Option<f64>,
    pub mean_pe_pp: Option<f64>,
    pub unconverged_edges: usize,
    pub unserved_ues: usize,
    pub layouts: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// `(value, i / n)` for the sorted samples.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

pub fn summarize(kinds: &[EstimatorKind], rates: &[RateRecord], edges: &[EdgeRecord], unserved: usize, layouts: usize) -> Summary {
    let mut by_kind = BTreeMap::new();
    for &kind in kinds {
        let se: Vec<f64> = rates.iter().filter(|r| r.kind == kind).map(|r| r.se).collect();
        let rate: Vec<f64> = rates.iter().filter(|r| r.kind == kind).map(|r| r.rate).collect();
        by_kind.insert(
            kind.to_string(),
            KindSummary {
                records: se.len(),
                mean_se: mean(&se),
                median_se: median(&se),
                sum_se: (!se.is_empty()).then(|| se.iter().sum()),
                mean_rate: mean(&rate),
            },
        );
    }
    let pe_raw: Vec<f64> = edges.iter().map(|e| e.pe_raw).collect();
    let pe_pp: Vec<f64> = edges.iter().map(|e| e.pe_pp).collect();
    Summary {
        kinds: by_kind,
        edges: edges.len(),
        mean_pe_raw: mean(&pe_raw),
        mean_pe_pp: mean(&pe_pp),
        unconverged_edges: edges.iter().filter(|e| !e.converged).count(),
        unserved_ues: unserved,
        layouts,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_cdf(path: &Path, samples: &[f64]) -> Result<()> {
    write_rows(path, &["value", "cdf"], empirical_cdf(samples).into_iter().map(|(x, p)| [x.to_string(), p.to_string()]))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes every result file into `dir` and returns the paths written.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    rates: &[RateRecord],
    edges: &[EdgeRecord],
    unserved: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    let path = dir.join("rates.csv");
    write_rows(
        &path,
        &["layout", "ue", "kind", "rate", "se"],
        rates.iter().map(|r| [r.layout.to_string(), r.ue.to_string(), r.kind.to_string(), r.rate.to_string(), r.se.to_string()]),
    )?;
    written.push(path);

    let path = dir.join("subspace.csv");
    write_rows(
        &path,
        &["layout", "ru", "ue", "pe_raw", "pe_pp", "rank", "converged", "iterations"],
        edges.iter().map(|e| {
            [
                e.layout.to_string(),
                e.ru.to_string(),
                e.ue.to_string(),
                e.pe_raw.to_string(),
                e.pe_pp.to_string(),
                e.rank.to_string(),
                e.converged.to_string(),
                e.iterations.to_string(),
            ]
        }),
    )?;
    written.push(path);

    for &kind in &config.kinds {
        let se: Vec<f64> = rates.iter().filter(|r| r.kind == kind).map(|r| r.se).collect();
        let path = dir.join(format!("cdf_se_{kind}.csv"));
        write_cdf(&path, &se)?;
        written.push(path);
    }
    for (name, pick) in [("raw", (|e: &EdgeRecord| e.pe_raw) as fn(&EdgeRecord) -> f64), ("pp", |e: &EdgeRecord| e.pe_pp)] {
        let samples: Vec<f64> = edges.iter().map(pick).collect();
        let path = dir.join(format!("cdf_pe_{name}.csv"));
        write_cdf(&path, &samples)?;
        written.push(path);
    }

    let summary = summarize(&config.kinds, rates, edges, unserved, config.layouts);
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&path, &(json + "\n"))?;
    written.push(path);

    let path = dir.join("config.toml");
    write_text(&path, &config.to_toml()?)?;
    written.push(path);
    Ok(written)
}

pub fn write_results(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    write_outputs(dir, &results.config, &results.rate_records(), &results.edge_records(), results.unserved_count())
}
