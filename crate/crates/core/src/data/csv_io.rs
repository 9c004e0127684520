use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::{DataError, Series};
use crate::autodiff::Tensor;

/// Column handling for [`read_csv_with`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// group rows into one series per distinct value of this column
    pub id_column: Option<String>,
    /// header names of non-numeric columns to ignore, such as dates
    pub skip_columns: Vec<String>,
}

/// Loads one series per id group, or one series for the whole file when
/// `id_column` is `None`.
///
/// A header is detected when any cell of the first row does not parse as a
/// number. Naming an id column requires a header.
pub fn load_csv(path: impl AsRef<Path>, id_column: Option<&str>) -> Result<Vec<Series>, DataError> {
    let opts = CsvOptions { id_column: id_column.map(str::to_string), ..CsvOptions::default() };
    load_csv_with(path, &opts)
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Vec<Series>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    read_csv_with(file, opts, stem)
}

pub fn read_csv(reader: impl Read, id_column: Option<&str>, default_id: &str) -> Result<Vec<Series>, DataError> {
    let opts = CsvOptions { id_column: id_column.map(str::to_string), ..CsvOptions::default() };
    read_csv_with(reader, &opts, default_id)
}

pub fn read_csv_with(reader: impl Read, opts: &CsvOptions, default_id: &str) -> Result<Vec<Series>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(DataError::NoData);
    };
    let has_header = first.iter().any(|cell| cell.parse::<f64>().is_err());
    let column = |name: &str| -> Result<usize, DataError> {
        if !has_header {
            return Err(DataError::MissingColumn(name.to_string()));
        }
        first.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let id_idx = opts.id_column.as_deref().map(column).transpose()?;
    let skipped = opts.skip_columns.iter().map(|n| column(n)).collect::<Result<Vec<_>, _>>()?;
    let body_start = usize::from(has_header);
    if records.len() <= body_start {
        return Err(DataError::NoData);
    }

    let mut groups: IndexMap<String, Vec<f64>> = IndexMap::new();
    let mut channels = None;
    for (r, rec) in records.iter().enumerate().skip(body_start) {
        let key = id_idx.map_or_else(|| default_id.to_string(), |i| rec[i].to_string());
        let row = groups.entry(key).or_default();
        let mut width = 0;
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == id_idx || skipped.contains(&col) {
                continue;
            }
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse { row: r + 1, column: col + 1, value: cell.to_string() })?;
            row.push(v);
            width += 1;
        }
        if width == 0 {
            return Err(DataError::Geometry(format!("row {} has no numeric columns", r + 1)));
        }
        channels.get_or_insert(width);
    }
    let c = channels.ok_or(DataError::NoData)?;

    let expected = groups.values().next().map_or(0, |v| v.len() / c);
    groups
        .into_iter()
        .map(|(id, data)| {
            let len = data.len() / c;
            if len != expected {
                return Err(DataError::Ragged { id, len, expected });
            }
            Series::new(id, Tensor::new(vec![len, c], data)?)
        })
        .collect()
}

/// Writes series with an `id` column followed by one column per channel.
pub fn write_series_csv(writer: impl Write, series: &[Series]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    if let Some(first) = series.first() {
        let mut header = vec!["id".to_string()];
        header.extend((0..first.channels()).map(|c| format!("ch{c}")));
        w.write_record(&header)?;
    }
    for s in series {
        for t in 0..s.len() {
            let mut rec = vec![s.id.clone()];
            rec.extend(s.values.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|source| DataError::Io { path: "<csv writer>".into(), source })?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, series: &[Series]) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    write_series_csv(std::io::BufWriter::new(file), series)
}
