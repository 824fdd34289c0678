//! CSV input and output for paths and markets.
//!
//! Path files have a header `t,x1,..,xd,dx1,..,dxd`; the `dx` columns are the
//! declared jumps. Market files have `t,S,B` with optional `dS,dB`. Lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finance::Market;
use crate::path::{FvPath, GridPath, TimeGrid};

fn parse_err(name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: name.to_string(),
        line,
        msg: msg.into(),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(reader: impl Read, name: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(parse_err(name, line, format!("expected {} fields", header.len())));
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(name, line, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(name, 1, "no data rows"));
    }
    Ok(Table { header, rows })
}

/// Reads a path file. Column names after `t` decide the layout: names
/// starting with `d` are jumps, the rest values.
pub fn read_path(reader: impl Read, name: &str) -> Result<GridPath> {
    let table = read_table(reader, name)?;
    if table.header.first().map(String::as_str) != Some("t") {
        return Err(parse_err(name, 1, "first column must be t"));
    }
    let cols = &table.header[1..];
    let dim = cols.iter().filter(|c| !c.starts_with('d')).count();
    let njump = cols.len() - dim;
    if dim == 0 || (njump != 0 && njump != dim) || cols[..dim].iter().any(|c| c.starts_with('d')) {
        return Err(parse_err(
            name,
            1,
            "expected t, value columns, then optional jump columns of the same count",
        ));
    }
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let grid = Arc::new(TimeGrid::new(times)?);
    let mut values = Vec::with_capacity(table.rows.len() * dim);
    let mut jumps = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        values.extend_from_slice(&r[1..=dim]);
        if njump > 0 {
            let d = &r[1 + dim..];
            if d.iter().any(|&v| v != 0.0) {
                jumps.insert(i, d.to_vec());
            }
        }
    }
    GridPath::new(grid, dim, values, jumps)
}

pub fn read_path_file(path: &std::path::Path) -> Result<GridPath> {
    let f = std::fs::File::open(path)?;
    read_path(f, &path.display().to_string())
}

/// Writes `t,x1..xd,dx1..dxd`.
pub fn write_path(mut w: impl Write, path: &GridPath) -> Result<()> {
    let d = path.dim();
    let mut header = vec!["t".to_string()];
    if d == 1 {
        header.extend(["x".to_string(), "dx".to_string()]);
    } else {
        header.extend((1..=d).map(|k| format!("x{k}")));
        header.extend((1..=d).map(|k| format!("dx{k}")));
    }
    writeln!(w, "{}", header.join(","))?;
    let zero = vec![0.0; d];
    for i in 0..path.len() {
        let jump = path.jump(i).unwrap_or(&zero);
        let mut fields = vec![path.time(i)];
        fields.extend_from_slice(path.value(i));
        fields.extend_from_slice(jump);
        writeln!(w, "{}", join(&fields))?;
    }
    Ok(())
}

/// Comma-separated shortest round-trip representation.
pub fn join(fields: &[f64]) -> String {
    fields
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Reads `t,S,B[,dS,dB]`.
pub fn read_market(reader: impl Read, name: &str) -> Result<Market> {
    let table = read_table(reader, name)?;
    let h: Vec<&str> = table.header.iter().map(String::as_str).collect();
    let with_jumps = match h.as_slice() {
        ["t", "S", "B"] => false,
        ["t", "S", "B", "dS", "dB"] => true,
        _ => return Err(parse_err(name, 1, "expected header t,S,B[,dS,dB]")),
    };
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let grid = Arc::new(TimeGrid::new(times)?);
    let col = |k: usize| table.rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let jumps = |k: usize| {
        if !with_jumps {
            return Vec::new();
        }
        table
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r[k] != 0.0)
            .map(|(i, r)| (i, r[k]))
            .collect()
    };
    let s = GridPath::scalar(grid.clone(), col(1), jumps(3))?;
    let b = GridPath::scalar(grid, col(2), jumps(4))?.with_finite_variation(true);
    Market::new(s, FvPath::new(b)?)
}

pub fn read_market_file(path: &std::path::Path) -> Result<Market> {
    let f = std::fs::File::open(path)?;
    read_market(f, &path.display().to_string())
}

/// Partition files hold one time per line.
pub fn read_partition_times(reader: impl Read, name: &str) -> Result<Vec<f64>> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(name, i + 1, format!("not a number: {l:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Generator};

    #[test]
    fn path_round_trip() {
        let g = Arc::new(TimeGrid::dyadic(1.0, 3).unwrap());
        let x = generate(&Generator::Step { c: 0.3, t0: 0.5, x0: 1.0 }, &g).unwrap();
        let mut buf = Vec::new();
        write_path(&mut buf, &x).unwrap();
        let y = read_path(buf.as_slice(), "mem").unwrap();
        assert_eq!(x.values(), y.values());
        assert_eq!(x.jumps(), y.jumps());
        assert_eq!(x.grid().times(), y.grid().times());
    }

    #[test]
    fn market_with_jumps() {
        let text = "# prices\nt,S,B,dS,dB\n0,1,1,0,0\n0.5,2,1,1,0\n1,2,1.1,0,0\n";
        let m = read_market(text.as_bytes(), "mem").unwrap();
        assert_eq!(m.s().jump_x(1), 1.0);
        assert_eq!(m.s().left_x(1), 1.0);
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "t,x\n0,1\n0.5,abc\n";
        match read_path(text.as_bytes(), "p.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_lines() {
        let t = read_partition_times("0\n# c\n0.5\n\n1\n".as_bytes(), "p").unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
    }
}
