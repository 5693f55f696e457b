//! Text formats: field dumps, mask files and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use singeig_core::{Grid, MaskSpec, NodeClass, ScalarField};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("row {row} has {got} cells, schema has {want} columns")]
    Schema { row: usize, got: usize, want: usize },
    #[error("{0}")]
    Core(#[from] singeig_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// Shortest text that reads back to the same bits: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Header of a field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub h: f64,
}

/// Writes `nx ny xmin xmax ymin ymax h`, then one lattice row per line.
/// Exterior nodes are written as `nan`; 1D grids have `ny = 1`.
pub fn write_field(u: &ScalarField, g: &Grid, path: &Path) -> Result<(), IoError> {
    if !u.belongs_to(g) {
        return Err(singeig_core::Error::GridMismatch.into());
    }
    let b = g.bounds();
    let mut out = String::new();
    let head = [b[0], b[1], b[2], b[3], g.h()].map(fmt_f64).join(" ");
    let _ = writeln!(out, "{} {} {head}", g.nx(), g.ny());
    for row in 0..g.ny() {
        let line: Vec<String> = (0..g.nx())
            .map(|col| {
                let i = row * g.nx() + col;
                if g.class(i) == NodeClass::Exterior { "nan".into() } else { fmt_f64(u.get(i)) }
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Header tokens, then body tokens tagged with their 1-based line.
type Tokens<'a> = (Vec<&'a str>, Vec<(usize, &'a str)>);

fn tokens<'a>(path: &Path, text: &'a str) -> Result<Tokens<'a>, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, head)) = lines.next() else {
        return Err(IoError::Format { path: path.display().to_string(), line: 1, message: "empty file".into() });
    };
    let body = lines.flat_map(|(k, l)| l.split_whitespace().map(move |t| (k + 1, t))).collect();
    Ok((head.split_whitespace().collect(), body))
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str) -> Result<T, IoError> {
    tok.parse()
        .map_err(|_| IoError::Format { path: path.display().to_string(), line, message: format!("cannot parse `{tok}`") })
}

/// Reads a field dump back into its header and row-major values.
pub fn read_field(path: &Path) -> Result<(FieldHeader, Vec<f64>), IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let (head, body) = tokens(path, &text)?;
    if head.len() != 7 {
        return Err(IoError::Format {
            path: path.display().to_string(),
            line: 1,
            message: format!("header needs 7 fields `nx ny xmin xmax ymin ymax h`, got {}", head.len()),
        });
    }
    let header = FieldHeader {
        nx: parse_num(path, 1, head[0])?,
        ny: parse_num(path, 1, head[1])?,
        xmin: parse_num(path, 1, head[2])?,
        xmax: parse_num(path, 1, head[3])?,
        ymin: parse_num(path, 1, head[4])?,
        ymax: parse_num(path, 1, head[5])?,
        h: parse_num(path, 1, head[6])?,
    };
    if body.len() != header.nx * header.ny {
        return Err(IoError::Format {
            path: path.display().to_string(),
            line: body.last().map_or(1, |t| t.0),
            message: format!("expected {} values, found {}", header.nx * header.ny, body.len()),
        });
    }
    let values = body.iter().map(|&(l, t)| parse_num(path, l, t)).collect::<Result<_, _>>()?;
    Ok((header, values))
}

/// Reads a field dump onto `g`, which must have the same lattice.
pub fn read_field_on(g: &Grid, path: &Path) -> Result<ScalarField, IoError> {
    let (h, values) = read_field(path)?;
    if h.nx != g.nx() || h.ny != g.ny() {
        return Err(singeig_core::Error::GridMismatch.into());
    }
    Ok(ScalarField::from_values(g, values)?)
}

/// Reads a mask: `nx ny xmin xmax ymin ymax`, then `nx*ny` row-major classes
/// (0 exterior, 1 interior, 2 boundary).
pub fn read_mask(path: &Path) -> Result<MaskSpec, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let (head, body) = tokens(path, &text)?;
    if head.len() != 6 {
        return Err(IoError::Format {
            path: path.display().to_string(),
            line: 1,
            message: format!("header needs 6 fields `nx ny xmin xmax ymin ymax`, got {}", head.len()),
        });
    }
    let nx: usize = parse_num(path, 1, head[0])?;
    let ny: usize = parse_num(path, 1, head[1])?;
    if body.len() != nx * ny {
        return Err(IoError::Format {
            path: path.display().to_string(),
            line: body.last().map_or(1, |t| t.0),
            message: format!("expected {} classes, found {}", nx * ny, body.len()),
        });
    }
    let mut classes = Vec::with_capacity(body.len());
    for &(l, t) in &body {
        let c: u8 = parse_num(path, l, t)?;
        if c > 2 {
            return Err(IoError::Format { path: path.display().to_string(), line: l, message: format!("class {c} not in 0|1|2") });
        }
        classes.push(c);
    }
    Ok(MaskSpec {
        nx,
        ny,
        xmin: parse_num(path, 1, head[2])?,
        xmax: parse_num(path, 1, head[3])?,
        ymin: parse_num(path, 1, head[4])?,
        ymax: parse_num(path, 1, head[5])?,
        classes,
    })
}

pub fn write_mask(m: &MaskSpec, path: &Path) -> Result<(), IoError> {
    let mut out = format!("{} {} {}\n", m.nx, m.ny, [m.xmin, m.xmax, m.ymin, m.ymax].map(fmt_f64).join(" "));
    for row in m.classes.chunks(m.nx.max(1)) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: &[&'static str]) -> Self {
        Table { schema: schema.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn write_to(&self, w: impl Write) -> Result<(), IoError> {
        for (k, r) in self.rows.iter().enumerate() {
            if r.len() != self.schema.len() {
                return Err(IoError::Schema { row: k, got: r.len(), want: self.schema.len() });
            }
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.schema)?;
        for r in &self.rows {
            out.write_record(r.iter().map(Cell::render))?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Writes `table` as CSV; floats carry 17 significant digits.
pub fn write_csv(table: &Table, path: &Path) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    table.write_to(BufWriter::new(file))
}
