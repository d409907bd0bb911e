//! CSV encoding of [`Dataset`].
//!
//! Header: `x1..xp, a_star, y_star, r, a, y, kappa`. The `a`, `y` and
//! `kappa` cells may be empty. Row numbers in errors are 1-based data rows
//! (the header is not counted).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::DataError;
use crate::types::{Dataset, Observation};

const FIXED: [&str; 6] = ["a_star", "y_star", "r", "a", "y", "kappa"];

struct Columns {
    x: Vec<usize>,
    fixed: [usize; 6],
}

fn locate_columns(headers: &csv::StringRecord) -> Result<Columns, DataError> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut fixed = [0usize; 6];
    for (slot, name) in fixed.iter_mut().zip(FIXED) {
        *slot = find(name).ok_or_else(|| DataError::Schema(format!("missing column {name:?}")))?;
    }
    let p = headers
        .iter()
        .filter(|h| {
            let h = h.trim();
            h.len() > 1 && h.starts_with('x') && h[1..].chars().all(|c| c.is_ascii_digit())
        })
        .count();
    if p == 0 {
        return Err(DataError::Schema("no covariate columns x1..xp".into()));
    }
    let x = (1..=p)
        .map(|j| find(&format!("x{j}")).ok_or_else(|| DataError::Schema(format!("missing column \"x{j}\""))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Columns { x, fixed })
}

fn parse_f64(cell: &str, row: usize, name: &str) -> Result<f64, DataError> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| DataError::BadField { row, message: format!("{name}: cannot parse {cell:?} as a number") })?;
    if !v.is_finite() {
        return Err(DataError::BadField { row, message: format!("{name}: non-finite value") });
    }
    Ok(v)
}

fn parse_bool(cell: &str, row: usize, name: &str) -> Result<bool, DataError> {
    match cell.trim() {
        "1" | "1.0" | "true" | "TRUE" => Ok(true),
        "0" | "0.0" | "false" | "FALSE" => Ok(false),
        other => Err(DataError::BadField { row, message: format!("{name}: expected 0 or 1, found {other:?}") }),
    }
}

fn optional(cell: &str) -> Option<&str> {
    let c = cell.trim();
    (!c.is_empty() && c != "NA").then_some(c)
}

/// Reads a dataset from CSV text.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DataError::Schema(e.to_string()))?.clone();
    let cols = locate_columns(&headers)?;
    let [c_astar, c_ystar, c_r, c_a, c_y, c_kappa] = cols.fixed;

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::BadField { row, message: e.to_string() })?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let x = cols
            .x
            .iter()
            .enumerate()
            .map(|(j, &c)| parse_f64(cell(c), row, &format!("x{}", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let a_star = parse_bool(cell(c_astar), row, "a_star")?;
        let y_star = parse_f64(cell(c_ystar), row, "y_star")?;
        let r = parse_bool(cell(c_r), row, "r")?;
        let a = optional(cell(c_a)).map(|c| parse_bool(c, row, "a")).transpose()?;
        let y = optional(cell(c_y)).map(|c| parse_f64(c, row, "y")).transpose()?;
        let kappa_known = optional(cell(c_kappa)).map(|c| parse_f64(c, row, "kappa")).transpose()?;

        if r && a.is_none() {
            return Err(DataError::MissingGoldStandard { row, field: "a" });
        }
        if r && y.is_none() {
            return Err(DataError::MissingGoldStandard { row, field: "y" });
        }
        if !r && (a.is_some() || y.is_some()) {
            let field = if a.is_some() { "a" } else { "y" };
            return Err(DataError::UnexpectedGoldStandard { row, field });
        }
        if let Some(k) = kappa_known {
            if !(k > 0.0 && k <= 1.0) {
                return Err(DataError::KappaOutOfRange { row, value: k });
            }
        }
        rows.push(Observation { x, a_star, y_star, r, a, y, kappa_known });
    }
    Dataset::new(rows)
}

pub fn read_csv_path(path: &Path) -> Result<Dataset, DataError> {
    let f = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(f))
}

/// Writes a dataset as CSV. Missing values are written as empty cells and
/// floats use the shortest representation that round-trips.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<(), DataError> {
    let io = |e: csv::Error| DataError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=d.p()).map(|j| format!("x{j}")).collect();
    header.extend(FIXED.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(io)?;
    let b = |v: bool| if v { "1".to_string() } else { "0".to_string() };
    for o in d.rows() {
        let mut rec: Vec<String> = o.x.iter().map(|v| v.to_string()).collect();
        rec.push(b(o.a_star));
        rec.push(o.y_star.to_string());
        rec.push(b(o.r));
        rec.push(o.a.map(b).unwrap_or_default());
        rec.push(o.y.map(|v| v.to_string()).unwrap_or_default());
        rec.push(o.kappa_known.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}
