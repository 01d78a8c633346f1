//! Edge-list and unit-table files.
//!
//! Edge lists are CSV with header `from,to` and 1-based unit ids; a row
//! means `from` affects `to`. Unit tables are CSV with columns `id`, `Y`,
//! `Z` and optionally `D` and `stratum`, ids running 1..n.

use std::io::{Read, Write};

use spillover_rt::{Assignment, Network};

use crate::CliError;

/// One row of the unit table.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    pub y: Vec<f64>,
    pub z: Assignment,
    pub d: Option<Vec<u8>>,
    pub strata: Option<Vec<i64>>,
}

impl UnitTable {
    pub fn len(&self) -> usize {
        self.y.len()
    }
}

fn parse_err(what: &str, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{what} line {line}: {msg}"))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

pub fn read_units<R: Read>(reader: R) -> Result<UnitTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err("units", 1, e))?.clone();
    let need =
        |name: &str| column(&headers, name).ok_or_else(|| parse_err("units", 1, format!("missing column `{name}`")));
    let (id_col, y_col, z_col) = (need("id")?, need("Y")?, need("Z")?);
    let (d_col, s_col) = (column(&headers, "D"), column(&headers, "stratum"));
    let (mut y, mut z, mut d, mut strata) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, record) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| parse_err("units", line, e))?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let id: usize = field(id_col).parse().map_err(|e| parse_err("units", line, format!("id: {e}")))?;
        if id != k + 1 {
            return Err(parse_err(
                "units",
                line,
                format!("expected id {} (ids must run 1..n in order), found {id}", k + 1),
            ));
        }
        let yv: f64 = field(y_col).parse().map_err(|e| parse_err("units", line, format!("Y: {e}")))?;
        if !yv.is_finite() {
            return Err(parse_err("units", line, "Y must be finite"));
        }
        y.push(yv);
        let binary = |c: usize, name: &str| -> Result<u8, CliError> {
            match field(c) {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(parse_err("units", line, format!("{name} must be 0 or 1, found `{other}`"))),
            }
        };
        z.push(binary(z_col, "Z")?);
        if let Some(c) = d_col {
            d.push(binary(c, "D")?);
        }
        if let Some(c) = s_col {
            strata.push(field(c).parse::<i64>().map_err(|e| parse_err("units", line, format!("stratum: {e}")))?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Validation("units file has no rows".into()));
    }
    Ok(UnitTable { y, z: Assignment::new(z)?, d: d_col.map(|_| d), strata: s_col.map(|_| strata) })
}

pub fn read_edges<R: Read>(reader: R, n: usize, undirected: bool) -> Result<Network, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err("edges", 1, e))?.clone();
    let from_col = column(&headers, "from").ok_or_else(|| parse_err("edges", 1, "missing column `from`"))?;
    let to_col = column(&headers, "to").ok_or_else(|| parse_err("edges", 1, "missing column `to`"))?;
    let mut pairs = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| parse_err("edges", line, e))?;
        let id = |c: usize, name: &str| -> Result<usize, CliError> {
            let v: usize =
                record.get(c).unwrap_or("").parse().map_err(|e| parse_err("edges", line, format!("{name}: {e}")))?;
            if v == 0 || v > n {
                return Err(parse_err("edges", line, format!("{name} id {v} outside 1..{n}")));
            }
            Ok(v - 1)
        };
        let (from, to) = (id(from_col, "from")?, id(to_col, "to")?);
        if from == to {
            return Err(parse_err("edges", line, format!("self-loop on unit {}", from + 1)));
        }
        // `from` affects `to`: A[to][from] = 1
        pairs.push((to, from));
    }
    Ok(Network::from_pairs(n, pairs, undirected)?)
}

/// Writes each undirected edge once, smaller id first.
pub fn write_edges<W: Write>(writer: W, net: &Network) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["from", "to"]).map_err(io)?;
    for (i, j) in net.undirected_edges() {
        w.write_record([(i + 1).to_string(), (j + 1).to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
