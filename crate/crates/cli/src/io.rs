use std::fs;
use std::path::Path;

use mcscan::RegressionDataset;

use crate::failure::Failure;

fn delimiter(path: &Path, first_line: &str) -> u8 {
    let tsv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    if tsv || first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads `y, x_1, ..., x_p` rows; a first row with any non-numeric field is
/// taken as a header.
pub fn read_dataset(path: &Path) -> Result<RegressionDataset, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter(path, first))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Failure::Data(format!(
                    "{}: line {line} has a non-numeric field",
                    path.display()
                )))
            }
        };
        if values.len() < 2 {
            return Err(Failure::Data(format!(
                "{}: line {line} needs a response and at least one regressor",
                path.display()
            )));
        }
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(Failure::Data(format!(
                "{}: line {line} has {} fields, expected {}",
                path.display(),
                values.len(),
                width.unwrap_or(0)
            )));
        }
        y.push(values[0]);
        x.extend_from_slice(&values[1..]);
    }
    let p = width.map(|w| w - 1).ok_or_else(|| Failure::Data(format!("{}: no data rows", path.display())))?;
    RegressionDataset::new(x, y, p).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Writes `y, x1, ..., xp` with a header row.
pub fn write_dataset(path: &Path, data: &RegressionDataset) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::Data(format!("cannot write {}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(io)?;
    let header: Vec<String> = std::iter::once("y".to_string())
        .chain((1..=data.p()).map(|i| format!("x{i}")))
        .collect();
    writer.write_record(&header).map_err(io)?;
    for t in 0..data.n() {
        let row: Vec<String> = std::iter::once(data.y()[t])
            .chain(data.row(t).iter().copied())
            .map(|v| v.to_string())
            .collect();
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush().map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}
