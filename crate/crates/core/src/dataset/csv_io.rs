use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Loads a comma-separated file with a header row. Raw label values are
/// mapped to classes 0 and 1 in lexicographic order.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, label_column: &str) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut raw_rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        let mut features = Vec::with_capacity(header.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let value = cell
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericFeature {
                    row,
                    column: header[col].clone(),
                    value: cell.to_string(),
                })?;
            features.push(value);
        }
        raw_rows.push((features, record[label_idx].to_string()));
    }

    let classes: BTreeSet<&str> = raw_rows.iter().map(|(_, l)| l.as_str()).collect();
    if classes.len() != 2 {
        return Err(Error::LabelCardinality(classes.len()));
    }
    let class_names: Vec<String> = classes.into_iter().map(str::to_string).collect();
    let class_names = [class_names[0].clone(), class_names[1].clone()];

    let points = raw_rows
        .into_iter()
        .map(|(features, raw)| DataPoint::new(features, u8::from(raw == class_names[1])))
        .collect();
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Ok(Dataset::new(points, feature_names)?.with_class_names(label_column, class_names))
}

impl<T: Scalar> Dataset<T> {
    /// Writes features followed by the label column (raw class names), in the
    /// same dialect [`read_csv`] accepts.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.feature_names.iter().chain(std::iter::once(&self.label_name)))?;
        for p in &self.points {
            let mut row: Vec<String> = p.features.iter().map(|v| v.canonical()).collect();
            row.push(self.class_names[p.label as usize].clone());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
