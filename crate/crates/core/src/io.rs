//! File formats: series panels, model parameters, spectral fields,
//! OHLC bars and benchmark reports.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bench::{HierarchyRow, RmseReport};
use crate::error::{Error, Result};
use crate::gfevd::Ohlc;
use crate::gnar::GnarParams;
use crate::spectra::{FieldKind, FrequencyGrid, SpectralField};

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse("rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Reads a `T × d` panel: one row per time point, one column per node.
/// A header line is skipped when its first field is not a number.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if line == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: {f:?} is not a number", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("panel has no rows".into()));
    }
    let m = rows_to_matrix(&rows)?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("panel contains non-finite values".into()));
    }
    Ok(m)
}

/// Writes a panel with a `node1,..,noded` header.
pub fn write_panel_csv<W: Write>(writer: W, panel: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=panel.ncols()).map(|j| format!("node{j}")))?;
    for row in panel.row_iter() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// JSON form of GNAR parameters. The innovation covariance is either a
/// full matrix or `sigma2` times the identity (default 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation_cov: Option<Vec<Vec<f64>>>,
}

impl ParamsFile {
    pub fn from_params(params: &GnarParams) -> Self {
        Self {
            alpha: params.alpha().to_vec(),
            beta: params.beta().to_vec(),
            sigma2: None,
            innovation_cov: Some(matrix_to_rows(params.innovation_cov())),
        }
    }

    pub fn into_params(self, d: usize) -> Result<GnarParams> {
        match (self.innovation_cov, self.sigma2) {
            (Some(_), Some(_)) => Err(Error::InvalidInput("give either sigma2 or innovation_cov, not both".into())),
            (Some(v), None) => {
                let v = rows_to_matrix(&v)?;
                if v.shape() != (d, d) {
                    return Err(Error::Dimension(format!("innovation_cov is {}x{}, network has {d} nodes", v.nrows(), v.ncols())));
                }
                GnarParams::new(self.alpha, self.beta, v)
            }
            (None, s) => GnarParams::with_sigma2(self.alpha, self.beta, d, s.unwrap_or(1.0)),
        }
    }
}

pub fn read_params_json<R: Read>(reader: R, d: usize) -> Result<GnarParams> {
    let file: ParamsFile = serde_json::from_reader(reader)?;
    file.into_params(d)
}

pub fn write_params_json<W: Write>(writer: W, params: &GnarParams) -> Result<()> {
    serde_json::to_writer_pretty(writer, &ParamsFile::from_params(params))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ComplexMatrix {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    kind: FieldKind,
    grid: FrequencyGrid,
    matrices: Vec<ComplexMatrix>,
}

pub fn write_field_json<W: Write>(writer: W, field: &SpectralField) -> Result<()> {
    let matrices = field
        .matrices()
        .iter()
        .map(|m| ComplexMatrix {
            re: matrix_to_rows(&m.map(|z| z.re)),
            im: matrix_to_rows(&m.map(|z| z.im)),
        })
        .collect();
    let file = FieldFile {
        kind: field.kind(),
        grid: field.grid().clone(),
        matrices,
    };
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_field_json<R: Read>(reader: R) -> Result<SpectralField> {
    let file: FieldFile = serde_json::from_reader(reader)?;
    // rebuild the grid through its checked constructors
    let grid = match file.grid.fourier_length() {
        Some(t) => {
            let g = FrequencyGrid::fourier(t)?;
            if g != file.grid {
                return Err(Error::Parse(format!("grid values do not match a length-{t} Fourier grid")));
            }
            g
        }
        None => FrequencyGrid::new(file.grid.values().to_vec())?,
    };
    let matrices = file
        .matrices
        .into_iter()
        .map(|m| {
            let re = rows_to_matrix(&m.re)?;
            let im = rows_to_matrix(&m.im)?;
            if re.shape() != im.shape() {
                return Err(Error::Parse("real and imaginary parts differ in shape".into()));
            }
            Ok(re.zip_map(&im, Complex64::new))
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralField::new(grid, matrices, file.kind)
}

/// Wide plot-ready CSV: one row per frequency, one column per node pair
/// `i <= j` (1-based). Real-valued kinds get a single `v_i_j` column,
/// complex ones a `re_i_j`, `im_i_j` pair.
pub fn write_field_csv<W: Write>(writer: W, field: &SpectralField) -> Result<()> {
    let d = field.dim();
    let real = field.kind().is_real();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let mut header = vec!["omega".to_string()];
    for &(i, j) in &pairs {
        if real {
            header.push(format!("v_{}_{}", i + 1, j + 1));
        } else {
            header.push(format!("re_{}_{}", i + 1, j + 1));
            header.push(format!("im_{}_{}", i + 1, j + 1));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&header)?;
    for (omega, m) in field.iter() {
        let mut rec = vec![omega.to_string()];
        for &(i, j) in &pairs {
            rec.push(m[(i, j)].re.to_string());
            if !real {
                rec.push(m[(i, j)].im.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Bars grouped by node.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcPanel {
    pub nodes: Vec<String>,
    pub dates: Vec<String>,
    /// `bars[node][day]`.
    pub bars: Vec<Vec<Ohlc>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct OhlcRecord {
    date: String,
    node: String,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
}

/// Reads `date,node,open,high,low,close` records. Nodes are ordered by
/// first appearance, dates lexicographically; every node must have a bar
/// on every date.
pub fn read_ohlc_csv<R: Read>(reader: R) -> Result<OhlcPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut nodes: Vec<String> = Vec::new();
    let mut table: BTreeMap<String, BTreeMap<usize, Ohlc>> = BTreeMap::new();
    for rec in rdr.deserialize() {
        let rec: OhlcRecord = rec?;
        let bar = Ohlc {
            open: rec.open,
            high: rec.high,
            low: rec.low,
            close: rec.close,
        };
        bar.validate()
            .map_err(|e| Error::InvalidOhlc(format!("{} {}: {e}", rec.date, rec.node)))?;
        let k = match nodes.iter().position(|n| *n == rec.node) {
            Some(k) => k,
            None => {
                nodes.push(rec.node.clone());
                nodes.len() - 1
            }
        };
        if table.entry(rec.date.clone()).or_default().insert(k, bar).is_some() {
            return Err(Error::InvalidOhlc(format!("duplicate bar for {} on {}", rec.node, rec.date)));
        }
    }
    if nodes.is_empty() {
        return Err(Error::Parse("no OHLC records".into()));
    }
    let mut bars = vec![Vec::with_capacity(table.len()); nodes.len()];
    for (date, day) in &table {
        for (k, series) in bars.iter_mut().enumerate() {
            let bar = day
                .get(&k)
                .ok_or_else(|| Error::InvalidOhlc(format!("node {} has no bar on {date}", nodes[k])))?;
            series.push(*bar);
        }
    }
    Ok(OhlcPanel {
        nodes,
        dates: table.into_keys().collect(),
        bars,
    })
}

pub fn write_ohlc_csv<W: Write>(writer: W, panel: &OhlcPanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (t, date) in panel.dates.iter().enumerate() {
        for (k, node) in panel.nodes.iter().enumerate() {
            let b = panel.bars[k][t];
            w.serialize(OhlcRecord {
                date: date.clone(),
                node: node.clone(),
                open: b.open,
                high: b.high,
                low: b.low,
                close: b.close,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format: `network,model,method,T,target,rmse,n_excluded`.
pub fn write_report_csv<W: Write>(writer: W, report: &RmseReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["network", "model", "method", "T", "target", "rmse", "n_excluded"])?;
    for r in &report.rows {
        w.write_record([
            r.network.clone(),
            r.model.clone(),
            r.method.to_string(),
            r.t.to_string(),
            r.target.to_string(),
            r.rmse.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hierarchy_csv<W: Write>(writer: W, rows: &[HierarchyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["network", "model", "T", "r", "rmse_truth", "rmse_thresholded_truth", "n_excluded"])?;
    for r in rows {
        w.write_record([
            r.network.clone(),
            r.model.clone(),
            r.t.to_string(),
            r.r.to_string(),
            r.rmse_truth.to_string(),
            r.rmse_thresholded_truth.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Opens a file for reading, naming the path on failure.
pub fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Creates a file for writing, naming the path on failure.
pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
