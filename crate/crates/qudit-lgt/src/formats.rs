//! Text file formats: state snapshots, circuit files, operator dumps and versioned CSV.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so every writer here round-trips exactly through its reader.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuits::{Circuit, CircuitMeta};
use crate::error::{Error, Result};
use crate::gates::GateOp;
use crate::oracle::LinearOperator;
use crate::register::{RegisterLayout, StateVector};

pub const STATE_FORMAT: &str = "qudit-lgt-state";
pub const CIRCUIT_FORMAT: &str = "qudit-lgt-circuit";
pub const OPERATOR_FORMAT: &str = "qudit-lgt-operator";
pub const FORMAT_VERSION: u32 = 1;

/// Largest dimension accepted by [`dump_operator`] for matrix-free operators.
pub const DUMP_MAX_DIM: usize = 1 << 14;

fn parse_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|e| Error::Parse(format!("bad index {s:?}: {e}")))
}

#[derive(Serialize, Deserialize)]
struct StateHeader {
    format: String,
    version: u32,
    layout: RegisterLayout,
}

/// Rejects deserialized layouts whose strides or dimension disagree with their subsystems.
fn checked_layout(l: RegisterLayout) -> Result<RegisterLayout> {
    let mut fresh = RegisterLayout::new(l.subsystems().to_vec())?;
    fresh.links = l.links.clone();
    fresh.site_qudits = l.site_qudits.clone();
    fresh.modes = l.modes.clone();
    if fresh != l {
        return parse_err("layout header is inconsistent");
    }
    Ok(fresh)
}

/// Header line (JSON layout) followed by `index re im` for every nonzero amplitude.
pub fn write_state(state: &StateVector) -> Result<String> {
    let header = StateHeader { format: STATE_FORMAT.into(), version: FORMAT_VERSION, layout: state.layout().clone() };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    out.push('\n');
    for (i, a) in state.amps.iter().enumerate() {
        if a.re != 0.0 || a.im != 0.0 {
            let _ = writeln!(out, "{i} {:?} {:?}", a.re, a.im);
        }
    }
    Ok(out)
}

pub fn read_state(text: &str) -> Result<StateVector> {
    let mut lines = text.lines();
    let header: StateHeader = match lines.next() {
        Some(h) => serde_json::from_str(h).map_err(|e| Error::Parse(format!("state header: {e}")))?,
        None => return parse_err("empty state file"),
    };
    if header.format != STATE_FORMAT || header.version != FORMAT_VERSION {
        return parse_err(format!("unsupported state format {} v{}", header.format, header.version));
    }
    let layout = Arc::new(checked_layout(header.layout)?);
    let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return parse_err(format!("state line {}: expected `index re im`", k + 2));
        }
        let i = parse_usize(f[0])?;
        if i >= amps.len() {
            return parse_err(format!("state line {}: index {i} out of range", k + 2));
        }
        amps[i] = C64::new(parse_f64(f[1])?, parse_f64(f[2])?);
    }
    StateVector::from_amplitudes(layout, amps)
}

#[derive(Serialize, Deserialize)]
struct CircuitHeader {
    format: String,
    version: u32,
    meta: CircuitMeta,
    gates: usize,
}

/// JSON lines: a header with the metadata, then one gate record per line.
pub fn write_circuit(c: &Circuit) -> Result<String> {
    let header =
        CircuitHeader { format: CIRCUIT_FORMAT.into(), version: FORMAT_VERSION, meta: c.meta.clone(), gates: c.len() };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    out.push('\n');
    for g in &c.gates {
        out.push_str(&serde_json::to_string(g).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_circuit(text: &str) -> Result<Circuit> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: CircuitHeader = match lines.next() {
        Some(h) => serde_json::from_str(h).map_err(|e| Error::Parse(format!("circuit header: {e}")))?,
        None => return parse_err("empty circuit file"),
    };
    if header.format != CIRCUIT_FORMAT || header.version != FORMAT_VERSION {
        return parse_err(format!("unsupported circuit format {} v{}", header.format, header.version));
    }
    let gates = lines
        .enumerate()
        .map(|(k, l)| serde_json::from_str::<GateOp>(l).map_err(|e| Error::Parse(format!("gate {k}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if gates.len() != header.gates {
        return parse_err(format!("header announces {} gates, found {}", header.gates, gates.len()));
    }
    Ok(Circuit { meta: header.meta, gates })
}

/// Coordinate list of one or more operators on a common space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorDump {
    pub dim: usize,
    pub labels: Vec<String>,
    /// `(term, row, col, value)`
    pub entries: Vec<(usize, usize, usize, C64)>,
}

/// Columns of `op` with entries below `cutoff` in modulus dropped.
fn columns(op: &dyn LinearOperator, cutoff: f64) -> Result<Vec<(usize, usize, C64)>> {
    let dim = op.dim();
    if dim > DUMP_MAX_DIM {
        return Err(Error::InvalidParameter(format!("operator dimension {dim} exceeds dump limit {DUMP_MAX_DIM}")));
    }
    let mut e = vec![C64::new(0.0, 0.0); dim];
    let mut y = vec![C64::new(0.0, 0.0); dim];
    let mut out = Vec::new();
    for c in 0..dim {
        e[c] = C64::new(1.0, 0.0);
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        op.apply_add(&e, &mut y);
        e[c] = C64::new(0.0, 0.0);
        out.extend(y.iter().enumerate().filter(|(_, v)| v.norm() > cutoff).map(|(r, &v)| (r, c, v)));
    }
    Ok(out)
}

/// Dumps each labelled operator; entries with modulus ≤ `cutoff` are omitted.
pub fn dump_operator(terms: &[(&str, &dyn LinearOperator)], cutoff: f64) -> Result<OperatorDump> {
    let dim = terms.first().map_or(0, |t| t.1.dim());
    if terms.iter().any(|t| t.1.dim() != dim) {
        return Err(Error::InvalidParameter("operator dimensions differ".into()));
    }
    let mut entries = Vec::new();
    for (k, (_, op)) in terms.iter().enumerate() {
        entries.extend(columns(*op, cutoff)?.into_iter().map(|(r, c, v)| (k, r, c, v)));
    }
    Ok(OperatorDump { dim, labels: terms.iter().map(|t| t.0.to_string()).collect(), entries })
}

impl OperatorDump {
    pub fn to_text(&self) -> String {
        let mut out = format!("# {OPERATOR_FORMAT} v{FORMAT_VERSION}\n# dim {}\n# terms {}\n", self.dim, self.labels.join(" "));
        for &(k, r, c, v) in &self.entries {
            let _ = writeln!(out, "{k} {r} {c} {:?} {:?}", v.re, v.im);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(&format!("# {OPERATOR_FORMAT} v{FORMAT_VERSION}")) {
            return parse_err("missing operator dump header");
        }
        let dim = match lines.next().and_then(|l| l.strip_prefix("# dim ")) {
            Some(d) => parse_usize(d.trim())?,
            None => return parse_err("missing `# dim` line"),
        };
        let labels: Vec<String> = match lines.next().and_then(|l| l.strip_prefix("# terms")) {
            Some(t) => t.split_whitespace().map(String::from).collect(),
            None => return parse_err("missing `# terms` line"),
        };
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return parse_err(format!("operator line {line:?}: expected `term row col re im`"));
            }
            let (k, r, c) = (parse_usize(f[0])?, parse_usize(f[1])?, parse_usize(f[2])?);
            if k >= labels.len() || r >= dim || c >= dim {
                return parse_err(format!("operator line {line:?}: index out of range"));
            }
            entries.push((k, r, c, C64::new(parse_f64(f[3])?, parse_f64(f[4])?)));
        }
        Ok(OperatorDump { dim, labels, entries })
    }
}

/// CSV table whose first line is `# schema <name> v<version>`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub schema: String,
    pub version: u32,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        CsvTable { schema: schema.into(), version: FORMAT_VERSION, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; cells must not contain commas or newlines.
    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# schema {} v{}\n{}\n", self.schema, self.version, self.columns.join(","));
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().and_then(|l| l.strip_prefix("# schema ")).ok_or_else(|| Error::Parse("missing schema line".into()))?;
        let (schema, version) = head.rsplit_once(" v").ok_or_else(|| Error::Parse("malformed schema line".into()))?;
        let version = version.trim().parse::<u32>().map_err(|e| Error::Parse(e.to_string()))?;
        let columns: Vec<String> = match lines.next() {
            Some(c) => c.split(',').map(String::from).collect(),
            None => return parse_err("missing column line"),
        };
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let r: Vec<String> = line.split(',').map(String::from).collect();
            if r.len() != columns.len() {
                return parse_err(format!("row {line:?} has {} cells, expected {}", r.len(), columns.len()));
            }
            rows.push(r);
        }
        Ok(CsvTable { schema: schema.into(), version, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Shortest round-trip representation of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::basis_state;

    #[test]
    fn state_round_trip_is_bit_exact() {
        let layout = Arc::new(RegisterLayout::gauge_fermion(2, 3, 2, 1).unwrap());
        let mut s = basis_state(layout.clone(), &[1, 2, 0, 1]).unwrap();
        s.amps[3] = C64::new(0.1 + 0.2, -1e-300);
        s.amps[7] = C64::new(std::f64::consts::PI, f64::MIN_POSITIVE);
        let back = read_state(&write_state(&s).unwrap()).unwrap();
        assert_eq!(back.layout(), s.layout());
        for (a, b) in back.amps.iter().zip(&s.amps) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(read_state("").is_err());
        assert!(read_circuit("{}").is_err());
        assert!(CsvTable::from_text("a,b\n1,2\n").is_err());
        assert!(OperatorDump::from_text("# qudit-lgt-operator v1\n# dim 2\n# terms a\n0 2 0 1 0\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CsvTable::new("trace", &["t", "E"]);
        t.push(vec![fmt_f64(0.1), fmt_f64(-2.5e-17)]);
        let back = CsvTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_text().starts_with("# schema trace v1\n"));
    }
}
