use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::emit_svg_bars;
use super::train::{expand_seeds, run_suite, DataStore, RunRecord};
use super::ExperimentConfig;
use crate::data::DatasetId;
use crate::error::{Error, Result};
use crate::maps::MapKind;
use crate::metrics::gain_percent;
use crate::models::Variant;

/// Column order of every result table: SA, L, ST, SP.
pub const MAP_COLUMNS: [MapKind; 4] = [
    MapKind::None,
    MapKind::Logistic,
    MapKind::SkewTent,
    MapKind::Sine,
];

fn column(map: MapKind) -> usize {
    MAP_COLUMNS.iter().position(|&m| m == map).expect("every kind has a column")
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub dataset: String,
    pub variant: String,
    pub samples_per_class: usize,
    pub map: String,
    pub seed: u64,
    pub macro_f1: f64,
    pub wall_seconds: f64,
}

impl From<&RunRecord> for RunRow {
    fn from(r: &RunRecord) -> Self {
        RunRow {
            dataset: r.dataset.to_string(),
            variant: r.variant.to_string(),
            samples_per_class: r.samples_per_class,
            map: r.map.as_str().to_string(),
            seed: r.seed,
            macro_f1: r.eval.macro_f1,
            wall_seconds: r.wall_seconds,
        }
    }
}

pub fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean macro F1 per (variant, samples per class) row and map column.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub variant: Variant,
    pub samples_per_class: usize,
    pub f1: [Option<f64>; 4],
    /// Number of runs averaged into each cell.
    pub runs: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub dataset: DatasetId,
    pub rows: Vec<TableRow>,
}

/// One line of `means.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MeanRow {
    dataset: String,
    variant: String,
    samples_per_class: usize,
    map: String,
    mean_macro_f1: f64,
    runs: usize,
}

/// One line of `gains.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GainCsvRow {
    dataset: String,
    variant: String,
    samples_per_class: usize,
    map: String,
    sa_macro_f1: f64,
    map_macro_f1: f64,
    gain_percent: f64,
}

impl ResultTable {
    /// An empty table with rows ordered by variant, then samples per class.
    pub fn new(dataset: DatasetId, layout: &[(Variant, usize)]) -> Self {
        let mut layout = layout.to_vec();
        layout.sort_by_key(|&(v, k)| (Variant::ALL.iter().position(|&x| x == v), k));
        layout.dedup();
        ResultTable {
            dataset,
            rows: layout
                .into_iter()
                .map(|(variant, samples_per_class)| TableRow {
                    variant,
                    samples_per_class,
                    f1: [None; 4],
                    runs: [0; 4],
                })
                .collect(),
        }
    }

    fn row_mut(&mut self, variant: Variant, k: usize) -> Option<&mut TableRow> {
        self.rows
            .iter_mut()
            .find(|r| r.variant == variant && r.samples_per_class == k)
    }

    pub fn get(&self, variant: Variant, k: usize, map: MapKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.samples_per_class == k)
            .and_then(|r| r.f1[column(map)])
    }

    /// Seed means of `rows` (in the order given) for one dataset.
    pub fn from_runs(dataset: DatasetId, rows: &[RunRow]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(rows.len());
        for r in rows {
            if r.dataset.parse::<DatasetId>()? != dataset {
                continue;
            }
            let variant: Variant = r.variant.parse()?;
            let map: MapKind = r.map.parse()?;
            parsed.push((variant, r.samples_per_class, map, r.macro_f1));
        }
        let layout: Vec<(Variant, usize)> = parsed.iter().map(|p| (p.0, p.1)).collect();
        let mut table = ResultTable::new(dataset, &layout);
        let mut sums = vec![[0.0f64; 4]; table.rows.len()];
        for &(variant, k, map, f1) in &parsed {
            let i = table
                .rows
                .iter()
                .position(|r| r.variant == variant && r.samples_per_class == k)
                .expect("layout covers every run");
            sums[i][column(map)] += f1;
            table.rows[i].runs[column(map)] += 1;
        }
        for (row, sum) in table.rows.iter_mut().zip(&sums) {
            for c in 0..4 {
                if row.runs[c] > 0 {
                    row.f1[c] = Some(sum[c] / row.runs[c] as f64);
                }
            }
        }
        Ok(table)
    }

    pub fn from_records(dataset: DatasetId, records: &[RunRecord]) -> Result<Self> {
        let rows: Vec<RunRow> = records.iter().map(RunRow::from).collect();
        ResultTable::from_runs(dataset, &rows)
    }

    /// Names of empty cells, e.g. `cnn2/k=40/ST`.
    pub fn missing_cells(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (c, map) in MAP_COLUMNS.iter().enumerate() {
                if r.f1[c].is_none() {
                    out.push(format!("{}/k={}/{}", r.variant, r.samples_per_class, map.short_label()));
                }
            }
        }
        out
    }

    pub fn ensure_complete(&self) -> Result<()> {
        let missing = self.missing_cells();
        if self.rows.is_empty() {
            return Err(Error::IncompleteTable("table has no rows".into()));
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteTable(missing.join(", ")));
        }
        Ok(())
    }

    /// Percentage gain of each map column over the same row's SA column.
    pub fn gains(&self) -> Result<GainTable> {
        self.ensure_complete()?;
        let mut rows = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let sa = r.f1[0].expect("complete");
            let mut gains = [0.0; 3];
            for c in 1..4 {
                gains[c - 1] = gain_percent(r.f1[c].expect("complete"), sa)?;
            }
            rows.push(GainRow {
                variant: r.variant,
                samples_per_class: r.samples_per_class,
                sa,
                f1: [r.f1[1].unwrap(), r.f1[2].unwrap(), r.f1[3].unwrap()],
                gains,
            });
        }
        Ok(GainTable {
            dataset: self.dataset,
            rows,
        })
    }

    pub fn write_means_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            for (c, map) in MAP_COLUMNS.iter().enumerate() {
                if let Some(f1) = r.f1[c] {
                    w.serialize(MeanRow {
                        dataset: self.dataset.to_string(),
                        variant: r.variant.to_string(),
                        samples_per_class: r.samples_per_class,
                        map: map.as_str().to_string(),
                        mean_macro_f1: f1,
                        runs: r.runs[c],
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_means_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let rows: Vec<MeanRow> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
        let first = rows
            .first()
            .ok_or_else(|| Error::Data(format!("{} has no rows", path.display())))?;
        let dataset: DatasetId = first.dataset.parse()?;
        let mut parsed = Vec::with_capacity(rows.len());
        for r in &rows {
            parsed.push((r.variant.parse::<Variant>()?, r.samples_per_class, r.map.parse::<MapKind>()?, r));
        }
        let layout: Vec<(Variant, usize)> = parsed.iter().map(|p| (p.0, p.1)).collect();
        let mut table = ResultTable::new(dataset, &layout);
        for (variant, k, map, r) in parsed {
            let row = table.row_mut(variant, k).expect("layout covers every row");
            row.f1[column(map)] = Some(r.mean_macro_f1);
            row.runs[column(map)] = r.runs;
        }
        Ok(table)
    }

    /// Aligned text with four decimals; empty cells print as `?`.
    pub fn format_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} macro F1 (mean over seeds)", self.dataset);
        let _ = writeln!(s, "{:>8} {:>7} {:>7} {:>7} {:>7} {:>7}", "k", "model", "SA", "L", "ST", "SP");
        for r in &self.rows {
            let _ = write!(s, "{:>8} {:>7}", r.samples_per_class, r.variant.table_label());
            for c in 0..4 {
                match r.f1[c] {
                    Some(v) => {
                        let _ = write!(s, " {v:>7.4}");
                    }
                    None => {
                        let _ = write!(s, " {:>7}", "?");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub variant: Variant,
    pub samples_per_class: usize,
    pub sa: f64,
    /// L, ST, SP mean F1.
    pub f1: [f64; 3],
    /// L, ST, SP gain in percent over `sa`.
    pub gains: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    pub dataset: DatasetId,
    pub rows: Vec<GainRow>,
}

impl GainTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            for c in 0..3 {
                w.serialize(GainCsvRow {
                    dataset: self.dataset.to_string(),
                    variant: r.variant.to_string(),
                    samples_per_class: r.samples_per_class,
                    map: MAP_COLUMNS[c + 1].as_str().to_string(),
                    sa_macro_f1: r.sa,
                    map_macro_f1: r.f1[c],
                    gain_percent: r.gains[c],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `gains.csv` back as (variant, k, map, sa, map F1, gain) tuples.
    pub fn read_csv(path: &Path) -> Result<Vec<(Variant, usize, MapKind, f64, f64, f64)>> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for row in reader.deserialize::<GainCsvRow>() {
            let r = row?;
            out.push((
                r.variant.parse()?,
                r.samples_per_class,
                r.map.parse()?,
                r.sa_macro_f1,
                r.map_macro_f1,
                r.gain_percent,
            ));
        }
        Ok(out)
    }

    /// Two-decimal text table. With `dash_negatives`, negative gains print as
    /// `-`; otherwise the signed value is shown.
    pub fn format_text(&self, dash_negatives: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} gain % over SA", self.dataset);
        let _ = writeln!(s, "{:>8} {:>7} {:>7} {:>7} {:>7}", "k", "model", "L", "ST", "SP");
        for r in &self.rows {
            let _ = write!(s, "{:>8} {:>7}", r.samples_per_class, r.variant.table_label());
            for g in r.gains {
                if dash_negatives && g < 0.0 {
                    let _ = write!(s, " {:>7}", "-");
                } else {
                    let _ = write!(s, " {g:>7.2}");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Variants and samples-per-class values of the standard table layout.
pub fn table_layout(dataset: DatasetId) -> (Vec<Variant>, Vec<usize>) {
    match dataset {
        DatasetId::Cifar10 => (vec![Variant::Cnn5], vec![100, 150, 200]),
        _ => (vec![Variant::Cnn2, Variant::Cnn3], vec![40, 50, 60]),
    }
}

#[derive(Debug, Clone)]
pub struct ReplicateOptions {
    /// Training settings shared by every cell (dataset, variant,
    /// samples_per_class and map are overwritten per cell).
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    /// Replaces the standard samples-per-class values.
    pub sample_sizes: Option<Vec<usize>>,
    /// Replaces the standard variants.
    pub variants: Option<Vec<Variant>>,
}

impl ReplicateOptions {
    pub fn new(base: ExperimentConfig) -> Self {
        let seeds = base.seeds.clone();
        ReplicateOptions {
            base,
            seeds,
            parallelism: 1,
            sample_sizes: None,
            variants: None,
        }
    }
}

#[derive(Debug)]
pub struct Replication {
    pub table: ResultTable,
    pub gains: GainTable,
    pub runs: Vec<RunRecord>,
    pub results_csv: PathBuf,
    pub means_csv: PathBuf,
    pub gains_csv: PathBuf,
    pub svg: PathBuf,
}

/// Every configuration of a replication, in table order, one per map.
pub fn replication_configs(dataset: DatasetId, opts: &ReplicateOptions) -> Vec<ExperimentConfig> {
    let (variants, sizes) = table_layout(dataset);
    let variants = opts.variants.clone().unwrap_or(variants);
    let sizes = opts.sample_sizes.clone().unwrap_or(sizes);
    let mut configs = Vec::new();
    for &variant in &variants {
        for &k in &sizes {
            for map in MAP_COLUMNS {
                let mut c = opts.base.clone();
                c.dataset = dataset;
                c.variant = variant;
                c.samples_per_class = k;
                c.chaotic.kind = map;
                c.seeds = opts.seeds.clone();
                configs.push(c);
            }
        }
    }
    configs
}

/// Runs the full (variant x samples per class x map x seed) grid and writes
/// `results.csv`, `means.csv`, `gains.csv` and `<dataset>.svg` to `out_dir`.
pub fn replicate_table(
    dataset: DatasetId,
    opts: &ReplicateOptions,
    store: &DataStore,
    out_dir: &Path,
) -> Result<Replication> {
    if opts.seeds.is_empty() {
        return Err(Error::Config("replication needs at least one seed".into()));
    }
    let jobs = expand_seeds(&replication_configs(dataset, opts));
    let mut runs = Vec::with_capacity(jobs.len());
    for result in run_suite(&jobs, opts.parallelism, store) {
        runs.push(result?);
    }
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<RunRow> = runs.iter().map(RunRow::from).collect();
    let results_csv = out_dir.join("results.csv");
    write_runs_csv(&results_csv, &rows)?;
    let table = ResultTable::from_runs(dataset, &rows)?;
    let gains = table.gains()?;
    let means_csv = out_dir.join("means.csv");
    table.write_means_csv(&means_csv)?;
    let gains_csv = out_dir.join("gains.csv");
    gains.write_csv(&gains_csv)?;
    let svg = out_dir.join(format!("{dataset}.svg"));
    emit_svg_bars(&table, &svg)?;
    Ok(Replication {
        table,
        gains,
        runs,
        results_csv,
        means_csv,
        gains_csv,
        svg,
    })
}
