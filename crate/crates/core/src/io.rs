//! File formats shared with the command-line tool.
//!
//! Binary files are little-endian. A matrix is `rows: u64, cols: u64`
//! followed by row-major `(re, im)` pairs of `f64`. A kernel is its six
//! `u64` shape entries followed by the `f64` values. Parameter files carry
//! the magic `EQPM` and a `u32` version ahead of their shape.
//!
//! CSV output uses `.` decimals and Rust's shortest round-trip float
//! formatting, so reruns produce identical bytes.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::defect::DefectReport;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, NormKind};
use crate::reynolds::SteerableKernel;
use crate::train::{HistoryRow, ToyModelParams};

pub const PARAMS_MAGIC: &[u8; 4] = b"EQPM";
pub const PARAMS_VERSION: u32 = 1;
pub const HISTORY_HEADER: &str = "epoch,task_loss,penalty_g,penalty_perp,test_accuracy,empirical_defect";

/// Refuses headers that would need more than this many values.
const MAX_ELEMENTS: u64 = 1 << 28;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => format_err("trailing bytes after payload"),
    }
}

fn checked_count(dims: &[u64]) -> Result<usize> {
    let mut n: u64 = 1;
    for &d in dims {
        n = n.checked_mul(d).filter(|&n| n <= MAX_ELEMENTS).ok_or_else(|| {
            Error::Format(format!("shape {dims:?} is too large"))
        })?;
    }
    Ok(n as usize)
}

pub fn write_matrix<W: Write>(w: &mut W, m: &ComplexMatrix) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for z in m.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<ComplexMatrix> {
    let rows = read_u64(r)?;
    let cols = read_u64(r)?;
    let n = checked_count(&[rows, cols, 2])? / 2;
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        data.push(Complex64::new(re, im));
    }
    expect_eof(r)?;
    ComplexMatrix::from_vec(rows as usize, cols as usize, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_kernel<W: Write>(w: &mut W, k: &SteerableKernel) -> Result<()> {
    for d in k.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in k.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_kernel<R: Read>(r: &mut R) -> Result<SteerableKernel> {
    let mut shape = [0u64; 6];
    for d in &mut shape {
        *d = read_u64(r)?;
    }
    let [c_out, c_in, o1, o2, s1, s2] = shape;
    if o1 != 4 || o2 != 4 || s1 != s2 {
        return format_err(format!("kernel shape {shape:?} is not (c_out, c_in, 4, 4, s, s)"));
    }
    let n = checked_count(&shape)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(read_f64(r)?);
    }
    expect_eof(r)?;
    SteerableKernel::new(c_out as usize, c_in as usize, s1 as usize, values).map_err(|e| Error::Format(e.to_string()))
}

/// Header `max_degree, channels, hidden`, then radial centres, width and
/// the flat parameter vector.
pub fn write_params<W: Write>(w: &mut W, p: &ToyModelParams) -> Result<()> {
    p.validate()?;
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    for d in [p.max_degree, p.channels, p.hidden] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in p
        .radial_centers
        .iter()
        .copied()
        .chain(std::iter::once(p.radial_width))
        .chain(p.to_flat())
    {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<ToyModelParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != PARAMS_MAGIC {
        return format_err("not a parameter file");
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v).map_err(truncated)?;
    let version = u32::from_le_bytes(v);
    if version != PARAMS_VERSION {
        return format_err(format!("unsupported parameter file version {version}"));
    }
    let max_degree = read_u64(r)?;
    let channels = read_u64(r)?;
    let hidden = read_u64(r)?;
    if channels == 0 || hidden == 0 {
        return format_err("parameter file has empty channel counts");
    }
    let d = 2 * max_degree.min(MAX_ELEMENTS) + 1;
    checked_count(&[d, hidden, d, hidden])?;
    checked_count(&[d, hidden, d, channels])?;
    let (max_degree, channels, hidden) = (max_degree as usize, channels as usize, hidden as usize);
    let d = d as usize;
    let mut p = ToyModelParams {
        radial_centers: vec![0.0; channels],
        radial_width: 0.0,
        max_degree,
        channels,
        hidden,
        w1: ComplexMatrix::zeros(d * hidden, d * channels),
        w2: ComplexMatrix::zeros(d * hidden, d * hidden),
        w_final: vec![0.0; hidden],
        bias: 0.0,
    };
    for c in &mut p.radial_centers {
        *c = read_f64(r)?;
    }
    p.radial_width = read_f64(r)?;
    let mut flat = Vec::with_capacity(p.flat_len());
    for _ in 0..p.flat_len() {
        flat.push(read_f64(r)?);
    }
    expect_eof(r)?;
    p.set_flat(&flat)?;
    p.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(p)
}

pub fn write_defect_report<W: Write>(w: &mut W, report: &DefectReport) -> Result<()> {
    writeln!(
        w,
        "# norm_kind={},worst_case={},projection_distance={}",
        report.norm_kind, report.worst_case, report.projection_distance
    )?;
    writeln!(w, "element_index,defect")?;
    for (g, d) in &report.per_element {
        writeln!(w, "{g},{d}")?;
    }
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from '{s}'")))
}

pub fn read_defect_report<R: BufRead>(r: R) -> Result<DefectReport> {
    let mut lines = r.lines();
    let meta = lines.next().ok_or_else(|| Error::Format("empty defect report".into()))??;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing defect report metadata line".into()))?;
    // the mixed norm contains a comma, so split on the known keys instead
    let rest = meta
        .strip_prefix("norm_kind=")
        .ok_or_else(|| Error::Format("metadata must start with norm_kind".into()))?;
    let (k, rest) = rest
        .split_once(",worst_case=")
        .ok_or_else(|| Error::Format("metadata lacks worst_case".into()))?;
    let (wc, pd) = rest
        .split_once(",projection_distance=")
        .ok_or_else(|| Error::Format("metadata lacks projection_distance".into()))?;
    let norm_kind = k.parse::<NormKind>().map_err(|e| Error::Format(e.to_string()))?;
    let worst_case = parse_f64(wc, "worst_case")?;
    let projection_distance = parse_f64(pd, "projection_distance")?;
    let header = lines.next().ok_or_else(|| Error::Format("missing column header".into()))??;
    if header.trim() != "element_index,defect" {
        return format_err(format!("unexpected column header '{header}'"));
    }
    let mut per_element = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (g, d) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("malformed row '{line}'")))?;
        let g = g
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad element index '{g}'")))?;
        per_element.push((g, parse_f64(d, "defect")?));
    }
    Ok(DefectReport {
        per_element,
        worst_case,
        projection_distance,
        norm_kind,
    })
}

/// Rows without a defect measurement leave the last column empty.
pub fn write_history_csv<W: Write>(w: &mut W, history: &[HistoryRow]) -> Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for h in history {
        let defect = h.empirical_defect.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            h.epoch, h.task_loss, h.penalty_g, h.penalty_perp, h.test_accuracy, defect
        )?;
    }
    Ok(())
}

pub fn read_history_csv<R: BufRead>(r: R) -> Result<Vec<HistoryRow>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty history file".into()))??;
    if header.trim() != HISTORY_HEADER {
        return format_err(format!("unexpected history header '{header}'"));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return format_err(format!("history row needs 6 fields: '{line}'"));
        }
        out.push(HistoryRow {
            epoch: f[0]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad epoch '{}'", f[0])))?,
            task_loss: parse_f64(f[1], "task_loss")?,
            penalty_g: parse_f64(f[2], "penalty_g")?,
            penalty_perp: parse_f64(f[3], "penalty_perp")?,
            test_accuracy: parse_f64(f[4], "test_accuracy")?,
            empirical_defect: match f[5].trim() {
                "" => None,
                s => Some(parse_f64(s, "empirical_defect")?),
            },
        });
    }
    Ok(out)
}
