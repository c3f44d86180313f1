//! `train` and `sweep`.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use equiproj::io::{write_history_csv, write_params};
use equiproj::train::{train_toy, TrainConfig, TrainOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{finish, overlay, read_config, take};
use crate::error::{CliError, CliResult};
use crate::svg;

pub const THREADS_ENV: &str = "EQUIPROJ_THREADS";

/// Flags mirroring the `TrainConfig` keys.
#[derive(Args, Debug, Default, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_g: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_perp: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_projection: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect_every: Option<usize>,
    /// Amplitude of the wavey rings; omit for the disk/annulus data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_perp: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_per_class: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
}

/// A `σ_⊥` grid entry; `none` selects the disk/annulus data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sigma(pub Option<f64>);

impl FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "none" | "null" => Ok(Sigma(None)),
            t => t.parse().map(|v| Sigma(Some(v))).map_err(|_| format!("bad sigma_perp '{t}'")),
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => write!(f, "none"),
            Some(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Args, Debug, Default, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; falls back to EQUIPROJ_THREADS, then the core count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_g_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_perp_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_perp_grid: Option<Vec<Sigma>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
}

const LAMBDA_GRID: [f64; 4] = [0.0, 0.001, 0.01, 0.1];

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> equiproj::Result<()>) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn output_dir(map: &mut Map<String, Value>) -> CliResult<PathBuf> {
    let dir: PathBuf = take(map, "output_dir")?.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn train_config(map: Map<String, Value>) -> CliResult<TrainConfig> {
    let cfg: TrainConfig = finish(map)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &TrainConfig) -> CliResult<(TrainOutcome, equiproj::train::ToyDataset)> {
    let data = cfg.dataset()?;
    let out = train_toy(&data, cfg)?;
    Ok((out, data))
}

pub fn run_train(flags: &TrainArgs) -> CliResult<()> {
    let mut map = overlay(read_config(flags.config.as_deref())?, flags)?;
    let dir = output_dir(&mut map)?;
    let cfg = train_config(map)?;
    let (out, data) = run_one(&cfg)?;
    write_file(&dir.join("history.csv"), |w| write_history_csv(w, &out.history))?;
    write_file(&dir.join("params.bin"), |w| write_params(w, &out.params))?;
    fs::write(dir.join("boundary.svg"), svg::render(&data.points, &data.labels, &out.params)?)?;
    println!("{},{},{}", out.train_accuracy, out.test_accuracy, out.final_defect);
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    lambda_g: f64,
    lambda_perp: f64,
    sigma: Sigma,
    seed: u64,
}

impl Cell {
    fn file_name(&self) -> String {
        format!(
            "history_lg{}_lp{}_sp{}_seed{}.csv",
            self.lambda_g, self.lambda_perp, self.sigma, self.seed
        )
    }

    fn order(&self, other: &Cell) -> std::cmp::Ordering {
        let sigma_key = |s: Sigma| (s.0.is_some(), s.0.unwrap_or(0.0));
        self.lambda_g
            .total_cmp(&other.lambda_g)
            .then(self.lambda_perp.total_cmp(&other.lambda_perp))
            .then(sigma_key(self.sigma).0.cmp(&sigma_key(other.sigma).0))
            .then(sigma_key(self.sigma).1.total_cmp(&sigma_key(other.sigma).1))
            .then(self.seed.cmp(&other.seed))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn pool_size(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
        // zero lets rayon pick the core count
        Err(_) => Ok(0),
    }
}

pub fn run_sweep(flags: &SweepArgs) -> CliResult<()> {
    let mut map = overlay(read_config(flags.config.as_deref())?, flags)?;
    let dir = output_dir(&mut map)?;
    let threads = pool_size(take(&mut map, "threads")?)?;
    let lg: Vec<f64> = take(&mut map, "lambda_g_grid")?.unwrap_or_else(|| LAMBDA_GRID.to_vec());
    let lp: Vec<f64> = take(&mut map, "lambda_perp_grid")?.unwrap_or_else(|| LAMBDA_GRID.to_vec());
    let sp: Vec<Sigma> = take(&mut map, "sigma_perp_grid")?.unwrap_or_else(|| vec![Sigma(None)]);
    let seeds: Vec<u64> = take(&mut map, "seeds")?.unwrap_or_else(|| vec![0]);
    if lg.is_empty() || lp.is_empty() || sp.is_empty() || seeds.is_empty() {
        return Err(CliError::input("sweep grids must be non-empty"));
    }
    let base = train_config(map)?;

    let mut cells = Vec::new();
    for &lambda_g in &lg {
        for &lambda_perp in &lp {
            for &sigma in &sp {
                for &seed in &seeds {
                    cells.push(Cell {
                        lambda_g,
                        lambda_perp,
                        sigma,
                        seed,
                    });
                }
            }
        }
    }
    cells.sort_by(|a, b| a.order(b));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Math(e.to_string()))?;
    let results: Vec<CliResult<TrainOutcome>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let cfg = TrainConfig {
                    lambda_g: cell.lambda_g,
                    lambda_perp: cell.lambda_perp,
                    sigma_perp: cell.sigma.0,
                    seed: cell.seed,
                    ..base.clone()
                };
                cfg.validate()?;
                let (out, _) = run_one(&cfg)?;
                write_file(&dir.join(cell.file_name()), |w| write_history_csv(w, &out.history))?;
                Ok(out)
            })
            .collect()
    });

    let mut summary = String::from("lambda_g,lambda_perp,sigma_perp,seed,status,train_accuracy,test_accuracy,final_defect\n");
    let mut first_error = None;
    let mut failed = 0;
    for (cell, res) in cells.iter().zip(results) {
        let prefix = format!("{},{},{},{}", cell.lambda_g, cell.lambda_perp, cell.sigma, cell.seed);
        match res {
            Ok(out) => summary.push_str(&format!(
                "{prefix},ok,{},{},{}\n",
                out.train_accuracy, out.test_accuracy, out.final_defect
            )),
            Err(e) => {
                failed += 1;
                summary.push_str(&format!("{prefix},{},,,\n", csv_field(&format!("failed: {e}"))));
                first_error.get_or_insert(e);
            }
        }
    }
    fs::write(dir.join("summary.csv"), summary)?;
    match first_error {
        Some(e) if failed == cells.len() => Err(e),
        _ => Ok(()),
    }
}
