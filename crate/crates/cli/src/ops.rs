//! `project`, `kernel-project` and `defect`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use equiproj::defect::{c4_conv_defect, worst_case_defect};
use equiproj::group::{cyclic_irreps_for, regular_representation, tensor_representation};
use equiproj::io::{read_kernel, read_matrix, write_defect_report, write_kernel, write_matrix};
use equiproj::linalg::{norm, ComplexMatrix, NormKind};
use equiproj::reynolds::{project_c4_kernel, project_finite, LinearLayerSpec};
use equiproj::spectral::{project_equivariant_circulant, project_equivariant_spectral};
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::groups::GroupSpec;

/// Inputs whose commutation error is below this (relative to `‖T‖_F`) are
/// written back unchanged, so re-projecting a projected file is a no-op.
const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Finite,
    Circulant,
    Spectral,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// `cyclic:n`, `dihedral:n` or `trivial`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_in: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_out: Option<String>,
    /// Fiber representations for the spectral method.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_in: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_out: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Optional report file; the summary line always goes to stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_in: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_out: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Random inputs used for the convolution defect.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::input(format!("--{what} is required")))
}

pub fn parse_norm(s: Option<&str>) -> CliResult<NormKind> {
    match s {
        None => Ok(NormKind::Spectral),
        Some(s) => Ok(s.parse()?),
    }
}

fn load_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_matrix(&mut BufReader::new(f)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn save(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> equiproj::Result<()>) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn layer_from(group: &GroupSpec, t: ComplexMatrix, rep_in: Option<&str>, rep_out: Option<&str>) -> CliResult<LinearLayerSpec> {
    let rin = group.representation(rep_in.unwrap_or("regular"))?;
    let rout = group.representation(rep_out.unwrap_or("regular"))?;
    Ok(LinearLayerSpec::new(t, rin, rout)?)
}

/// Projection along the chosen path. Also returns the layer the result
/// belongs to and, for the fast paths, the max deviation from `project_finite`.
fn project_with(a: &ProjectArgs, group: &GroupSpec, t: ComplexMatrix) -> CliResult<(ComplexMatrix, LinearLayerSpec, Option<f64>)> {
    let method = a.method.unwrap_or(Method::Finite);
    if method != Method::Finite && !group.is_cyclic() {
        return Err(CliError::input("circulant and spectral methods need a cyclic group"));
    }
    match method {
        Method::Finite => {
            let layer = layer_from(group, t, a.rep_in.as_deref(), a.rep_out.as_deref())?;
            Ok((project_finite(&layer)?, layer, None))
        }
        Method::Circulant => {
            let reg = regular_representation(group.group.clone())?;
            let layer = LinearLayerSpec::new(t, reg.clone(), reg)?;
            let p = project_equivariant_circulant(layer.weight())?;
            let diff = p.max_abs_diff(&project_finite(&layer)?);
            Ok((p, layer, Some(diff)))
        }
        Method::Spectral => {
            let cat = cyclic_irreps_for(group.group.clone())?;
            let fin = group.representation(a.fiber_in.as_deref().unwrap_or("trivial:1"))?;
            let fout = group.representation(a.fiber_out.as_deref().unwrap_or("trivial:1"))?;
            let reg = regular_representation(group.group.clone())?;
            let layer = LinearLayerSpec::new(t, tensor_representation(&reg, &fin)?, tensor_representation(&reg, &fout)?)?;
            let p = project_equivariant_spectral(layer.weight(), &cat, &fin, &fout)?;
            let diff = p.max_abs_diff(&project_finite(&layer)?);
            Ok((p, layer, Some(diff)))
        }
    }
}

pub fn run_project(flags: &ProjectArgs) -> CliResult<()> {
    let a: ProjectArgs = resolve(flags, flags.config.as_deref())?;
    let input = required(&a.input, "input")?;
    let output = required(&a.output, "output")?;
    let group = GroupSpec::parse(a.group.as_deref().unwrap_or("trivial"))?;
    let kind = parse_norm(a.norm.as_deref())?;
    let t = load_matrix(input)?;
    let (mut p, layer, agreement) = project_with(&a, &group, t.clone())?;
    if layer.commutation_error() <= FIXED_POINT_TOL * t.frobenius().max(1.0) {
        p = t.clone();
    }
    let projected = layer.with_weight(p.clone())?;
    let defect = worst_case_defect(&projected, kind)?.worst_case;
    let line = format!(
        "{},{},{},{}",
        norm(&t, kind)?,
        norm(&p, kind)?,
        norm(&t.sub(&p)?, kind)?,
        defect
    );
    save(output, |w| write_matrix(w, &p))?;
    println!("{line}");
    if let Some(d) = agreement {
        println!("agreement,{d}");
    }
    Ok(())
}

pub fn run_defect(flags: &DefectArgs) -> CliResult<()> {
    let a: DefectArgs = resolve(flags, flags.config.as_deref())?;
    let group = GroupSpec::parse(a.group.as_deref().unwrap_or("trivial"))?;
    let kind = parse_norm(a.norm.as_deref())?;
    let t = load_matrix(required(&a.input, "input")?)?;
    let layer = layer_from(&group, t, a.rep_in.as_deref(), a.rep_out.as_deref())?;
    let report = worst_case_defect(&layer, kind)?;
    if let Some(out) = &a.output {
        save(out, |w| write_defect_report(w, &report))?;
    }
    println!("{},{}", report.worst_case, report.projection_distance);
    Ok(())
}

pub fn run_kernel_project(flags: &KernelArgs) -> CliResult<()> {
    let a: KernelArgs = resolve(flags, flags.config.as_deref())?;
    let input = required(&a.input, "input")?;
    let output = required(&a.output, "output")?;
    let f = File::open(input).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    let k = read_kernel(&mut BufReader::new(f)).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    let pk = project_c4_kernel(&k)?;
    let (trials, seed) = (a.trials.unwrap_or(5), a.seed.unwrap_or(0));
    let diff: f64 = k
        .values()
        .iter()
        .zip(pk.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let fro = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let line = format!(
        "{},{},{},{},{}",
        fro(k.values()),
        fro(pk.values()),
        diff,
        c4_conv_defect(&k, trials, seed)?,
        c4_conv_defect(&pk, trials, seed)?
    );
    save(output, |w| write_kernel(w, &pk))?;
    println!("{line}");
    Ok(())
}
