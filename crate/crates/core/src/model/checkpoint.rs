//! Plain-text checkpoints.
//!
//! ```text
//! arrowtime-mlp v1
//! dims 3 4 1
//! w 0
//! <fan_in lines of fan_out values>
//! b 0
//! <one line of fan_out values>
//! ...
//! adam v1                 (optional)
//! lr 0.0001
//! beta1 0.9
//! beta2 0.999
//! eps 1e-8
//! weight_decay 0
//! step 120
//! m 0 / v 0 ...           (same layout as w/b, tensor index order w0 b0 w1 b1 …)
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so reading
//! a checkpoint back is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::adam::{AdamConfig, AdamState};
use super::mlp::{Dense, MlpModel};
use crate::error::{Error, Result};

const MAGIC: &str = "arrowtime-mlp v1";
const ADAM_MAGIC: &str = "adam v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub optimizer: Option<AdamState>,
}

fn write_row(out: &mut String, row: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

/// Write a `fan_in × fan_out` tensor (flat, column-major) one input row per
/// line.
fn write_matrix(out: &mut String, data: &[f64], rows: usize, cols: usize) {
    for r in 0..rows {
        write_row(out, (0..cols).map(|c| data[c * rows + r]));
    }
}

pub fn format_checkpoint(ckpt: &Checkpoint) -> String {
    let model = &ckpt.model;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str("dims");
    for d in model.dims() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for (i, l) in model.layers.iter().enumerate() {
        writeln!(out, "w {i}").unwrap();
        write_matrix(&mut out, l.weights.as_slice(), l.fan_in(), l.fan_out());
        writeln!(out, "b {i}").unwrap();
        write_row(&mut out, l.bias.iter().copied());
    }
    if let Some(opt) = &ckpt.optimizer {
        out.push_str(ADAM_MAGIC);
        out.push('\n');
        let c = &opt.config;
        writeln!(out, "lr {:?}", c.lr).unwrap();
        writeln!(out, "beta1 {:?}", c.beta1).unwrap();
        writeln!(out, "beta2 {:?}", c.beta2).unwrap();
        writeln!(out, "eps {:?}", c.eps).unwrap();
        writeln!(out, "weight_decay {:?}", c.weight_decay).unwrap();
        writeln!(out, "step {}", opt.step).unwrap();
        for (tag, moments) in [("m", &opt.first), ("v", &opt.second)] {
            for (i, l) in model.layers.iter().enumerate() {
                writeln!(out, "{tag} {i}").unwrap();
                write_matrix(&mut out, &moments[2 * i], l.fan_in(), l.fan_out());
                write_row(&mut out, moments[2 * i + 1].iter().copied());
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, format_checkpoint(ckpt)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (i, l) = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        self.line = i + 1;
        Ok(l.trim())
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.line))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let got = self.next()?;
        if got != want {
            return Err(self.err(format!("expected `{want}`, found `{got}`")));
        }
        Ok(())
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let vals = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(e))?;
        if vals.len() != len {
            return Err(self.err(format!("expected {len} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for (c, v) in self.row(cols)?.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let l = self.next()?;
        let v = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key}`")))?;
        v.trim().parse().map_err(|e| self.err(e))
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    lines.expect(MAGIC)?;
    let dims_line = lines.next()?;
    let dims = dims_line
        .strip_prefix("dims ")
        .ok_or_else(|| lines.err("expected `dims`"))?
        .split_whitespace()
        .map(str::parse::<usize>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| lines.err(e))?;
    if dims.len() < 2 || *dims.last().unwrap() != 1 || dims.contains(&0) {
        return Err(lines.err("dims must be positive and end with 1"));
    }
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        lines.expect(&format!("w {i}"))?;
        let weights = lines.matrix(w[0], w[1])?;
        lines.expect(&format!("b {i}"))?;
        let bias = DVector::from_vec(lines.row(w[1])?);
        layers.push(Dense { weights, bias });
    }
    let model = MlpModel { layers };
    let mut optimizer = None;
    match lines.next()? {
        "end" => {}
        ADAM_MAGIC => {
            let config = AdamConfig {
                lr: lines.keyed("lr")?,
                beta1: lines.keyed("beta1")?,
                beta2: lines.keyed("beta2")?,
                eps: lines.keyed("eps")?,
                weight_decay: lines.keyed("weight_decay")?,
            };
            let mut state = AdamState::new(config, &model);
            state.step = lines.keyed("step")?;
            for tag in ["m", "v"] {
                for (i, w) in dims.windows(2).enumerate() {
                    lines.expect(&format!("{tag} {i}"))?;
                    let mat = lines.matrix(w[0], w[1])?;
                    let bias = lines.row(w[1])?;
                    let target = if tag == "m" {
                        &mut state.first
                    } else {
                        &mut state.second
                    };
                    target[2 * i] = mat.as_slice().to_vec();
                    target[2 * i + 1] = bias;
                }
            }
            lines.expect("end")?;
            optimizer = Some(state);
        }
        other => return Err(lines.err(format!("unexpected `{other}`"))),
    }
    Ok(Checkpoint { model, optimizer })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
