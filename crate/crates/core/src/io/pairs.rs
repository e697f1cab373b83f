use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::config::DataFormat;
use super::Provenance;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::Dataset;
use crate::scalar::{lit, Real};
use crate::sphere::{lonlat_to_unit, UnitVector};

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Ambient dimension from consecutive `{prefix}1, {prefix}2, …` columns.
fn vector_columns(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    (1..).map_while(|i| headers.iter().position(|h| h == format!("{prefix}{i}"))).collect()
}

fn value<T: Real>(record: &csv::StringRecord, idx: usize, row: usize) -> Result<T> {
    let s = record.get(idx).unwrap_or("");
    s.parse::<f64>().map(lit).map_err(|_| Error::Parse(format!("row {row}: cannot parse {s:?} as a number")))
}

fn unit_from<T: Real>(coords: Vec<T>, row: usize, which: &'static str) -> Result<UnitVector<T>> {
    let n = norm(&coords).to_f64().unwrap();
    if !(0.99..=1.01).contains(&n) {
        return Err(Error::BadNorm { row, which, norm: n });
    }
    UnitVector::new(coords)
}

/// Reads covariate/response pairs. Lines starting with `#` are ignored.
///
/// * [`DataFormat::UnitVectors`]: columns `x1..x{d}`, `y1..y{d}`; vectors
///   with norm in `[0.99, 1.01]` are renormalized, others rejected.
/// * [`DataFormat::LonLat`]: columns `x_lon, x_lat, y_lon, y_lat` in degrees.
///
/// Rows are numbered from 1, excluding the header.
pub fn read_pairs_csv<T: Real, R: Read>(input: R, format: DataFormat) -> Result<Dataset<T>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let mut pairs = Vec::new();
    match format {
        DataFormat::UnitVectors => {
            let xc = vector_columns(&headers, "x");
            if xc.len() < 2 {
                return Err(Error::MissingColumn(format!("x{}", xc.len() + 1)));
            }
            let yc = (1..=xc.len()).map(|i| column(&headers, &format!("y{i}"))).collect::<Result<Vec<_>>>()?;
            for (i, rec) in rdr.records().enumerate() {
                let (rec, row) = (rec?, i + 1);
                let x = xc.iter().map(|&c| value(&rec, c, row)).collect::<Result<Vec<T>>>()?;
                let y = yc.iter().map(|&c| value(&rec, c, row)).collect::<Result<Vec<T>>>()?;
                pairs.push((unit_from(x, row, "x")?, unit_from(y, row, "y")?));
            }
        }
        DataFormat::LonLat => {
            let cols = ["x_lon", "x_lat", "y_lon", "y_lat"].map(|n| column(&headers, n));
            let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
            for (i, rec) in rdr.records().enumerate() {
                let (rec, row) = (rec?, i + 1);
                let v = cols.iter().map(|&c| value::<T>(&rec, c, row)).collect::<Result<Vec<T>>>()?;
                pairs.push((lonlat_to_unit(v[0], v[1]), lonlat_to_unit(v[2], v[3])));
            }
        }
    }
    Dataset::new(pairs)
}

pub fn load_pairs_csv<T: Real>(path: &Path, format: DataFormat) -> Result<Dataset<T>> {
    read_pairs_csv(File::open(path)?, format)
}

/// Reads covariates from columns `x1..x{d}` (other columns are ignored).
pub fn load_covariates_csv<T: Real>(path: &Path) -> Result<Vec<UnitVector<T>>> {
    let mut rdr = reader(File::open(path)?);
    let headers = rdr.headers()?.clone();
    let xc = vector_columns(&headers, "x");
    if xc.len() < 2 {
        return Err(Error::MissingColumn(format!("x{}", xc.len() + 1)));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let (rec, row) = (rec?, i + 1);
        let x = xc.iter().map(|&c| value(&rec, c, row)).collect::<Result<Vec<T>>>()?;
        out.push(unit_from(x, row, "x")?);
    }
    Ok(out)
}

fn prologue<W: Write>(w: &mut W, provenance: &Provenance) -> Result<()> {
    for (k, v) in provenance {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Writes unit-vector pairs with a `#` prologue holding `provenance`.
/// Values use shortest round-trip formatting.
pub fn write_pairs_csv<T: Real + std::fmt::Display>(path: &Path, data: &Dataset<T>, provenance: &Provenance) -> Result<()> {
    let dim = data.dim().unwrap_or(3);
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain((1..=dim).map(|i| format!("y{i}"))).collect();
    let rows = data.pairs().iter().map(|(x, y)| x.as_slice().iter().chain(y.as_slice()).copied().collect::<Vec<T>>());
    write_rows(path, &header, rows, provenance)
}

/// Writes one vector per row under the given column names.
pub fn write_vectors_csv<T: Real + std::fmt::Display>(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<T>>,
    provenance: &Provenance,
) -> Result<()> {
    write_rows(path, header, rows, provenance)
}

fn write_rows<T: Real + std::fmt::Display>(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<T>>,
    provenance: &Provenance,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    prologue(&mut w, provenance)?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
