//! Labelled 2D grids of scalar results and their CSV form.
//!
//! The CSV starts with `# key = value` metadata lines, then a header line
//! `x,y,layer...`, then one row per cell with `x` outer and `y` inner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, DdrfError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), unit: unit.into(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.unit)
        }
    }
}

/// Evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Logarithmically spaced values from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub unit: String,
    /// Row-major, index `ix * ny + iy`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub x: Axis,
    pub y: Axis,
    pub layers: Vec<Layer>,
    pub metadata: BTreeMap<String, String>,
}

fn is_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

impl SweepResult {
    pub fn new(x: Axis, y: Axis) -> Result<Self> {
        for a in [&x, &y] {
            if a.is_empty() {
                return Err(invalid(format!("axis {} is empty", a.name)));
            }
            if a.values.iter().any(|v| !v.is_finite()) || !is_monotone(&a.values) {
                return Err(invalid(format!("axis {} must be finite and strictly monotone", a.name)));
            }
        }
        Ok(Self { x, y, layers: Vec::new(), metadata: BTreeMap::new() })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.y.len() + iy
    }

    pub fn push_layer(&mut self, name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        let (nx, ny) = self.shape();
        if values.len() != nx * ny {
            return Err(DdrfError::AxisMismatch(format!(
                "layer {name} has {} values for a {nx}x{ny} grid",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| v.is_nan()) {
            return Err(invalid(format!("layer {name} has NaN at cell {bad}")));
        }
        if self.layers.iter().any(|l| l.name == name) {
            return Err(invalid(format!("duplicate layer {name}")));
        }
        self.layers.push(Layer { name, unit: unit.into(), values });
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn value(&self, layer: &str, ix: usize, iy: usize) -> Option<f64> {
        self.layer(layer).map(|l| l.values[self.index(ix, iy)])
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    /// Cell of the smallest value in `layer`, ties broken by first occurrence.
    pub fn argmin(&self, layer: &str) -> Option<(usize, usize, f64)> {
        self.arg_by(layer, |a, b| a < b)
    }

    pub fn argmax(&self, layer: &str) -> Option<(usize, usize, f64)> {
        self.arg_by(layer, |a, b| a > b)
    }

    fn arg_by(&self, layer: &str, better: impl Fn(f64, f64) -> bool) -> Option<(usize, usize, f64)> {
        let l = self.layer(layer)?;
        let ny = self.y.len();
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in l.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| better(v, b)) {
                best = Some((k, v));
            }
        }
        best.map(|(k, v)| (k / ny, k % ny, v))
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k} = {}", v.replace('\n', " "));
        }
        let mut head = vec![self.x.header(), self.y.header()];
        head.extend(self.layers.iter().map(|l| {
            if l.unit.is_empty() {
                l.name.clone()
            } else {
                format!("{}[{}]", l.name, l.unit)
            }
        }));
        let _ = writeln!(s, "{}", head.join(","));
        for (ix, x) in self.x.values.iter().enumerate() {
            for (iy, y) in self.y.values.iter().enumerate() {
                let _ = write!(s, "{x:.8e},{y:.8e}");
                let k = self.index(ix, iy);
                for l in &self.layers {
                    let _ = write!(s, ",{:.8e}", l.values[k]);
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut metadata = BTreeMap::new();
        let mut header: Option<Vec<(String, String)>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    metadata.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match header {
                None => header = Some(line.split(',').map(split_unit).collect()),
                Some(ref h) => {
                    let vals = line
                        .split(',')
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| DdrfError::Csv { line: lineno, message: e.to_string() })?;
                    if vals.len() != h.len() {
                        return Err(DdrfError::Csv {
                            line: lineno,
                            message: format!("expected {} fields, got {}", h.len(), vals.len()),
                        });
                    }
                    rows.push(vals);
                }
            }
        }
        let header = header.ok_or(DdrfError::Csv { line: 0, message: "missing header".into() })?;
        if header.len() < 2 {
            return Err(DdrfError::Csv { line: 0, message: "need at least x and y columns".into() });
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for r in &rows {
            if xs.last() != Some(&r[0]) {
                xs.push(r[0]);
            }
            if xs.len() == 1 {
                ys.push(r[1]);
            }
        }
        if xs.len() * ys.len() != rows.len() {
            return Err(DdrfError::Csv { line: 0, message: "rows do not form a full grid".into() });
        }
        let x = Axis::new(header[0].0.clone(), header[0].1.clone(), xs);
        let y = Axis::new(header[1].0.clone(), header[1].1.clone(), ys);
        let mut out = SweepResult::new(x, y)?;
        out.metadata = metadata;
        for (c, (name, unit)) in header.iter().enumerate().skip(2) {
            out.push_layer(name.clone(), unit.clone(), rows.iter().map(|r| r[c]).collect())?;
        }
        Ok(out)
    }
}

fn split_unit(field: &str) -> (String, String) {
    let f = field.trim();
    match f.strip_suffix(']').and_then(|g| g.split_once('[')) {
        Some((n, u)) => (n.to_string(), u.to_string()),
        None => (f.to_string(), String::new()),
    }
}
