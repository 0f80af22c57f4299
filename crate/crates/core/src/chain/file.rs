use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{round_sum, ChainSpec, SolverParams, STOCHASTIC_TOL};
use crate::error::{Error, Result};

/// A chain together with the solver parameters it was stored with.
#[derive(Debug, Clone)]
pub struct ChainFile {
    pub chain: ChainSpec,
    pub params: SolverParams,
}

#[derive(Default)]
struct Entry {
    line: usize,
    values: Vec<(usize, f64)>,
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let bad = || Error::Parse {
        line,
        msg: format!("invalid number `{tok}`"),
    };
    match tok.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            Ok(num / den)
        }
        None => tok.parse().map_err(|_| bad()),
    }
}

/// Parse the plain-text chain format:
///
/// ```text
/// # two-state chain, alpha = 1
/// n = 2
/// horizon = 1
/// lambda = 1
/// omega = 0
/// transition =
///   0 1
///   0 1
/// initial = 1/2 1/2
/// ```
///
/// Values may continue on following lines until the next `key =` line.
/// Simple fractions `a/b` are accepted wherever a number is.
pub fn parse_chain_file(text: &str) -> Result<ChainFile> {
    let mut entries: Vec<(String, Entry)> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values = if let Some((key, rest)) = content.split_once('=') {
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "missing key before `=`".into(),
                });
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            entries.push((
                key,
                Entry {
                    line,
                    values: Vec::new(),
                },
            ));
            rest
        } else {
            if entries.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "values before any `key =` line".into(),
                });
            }
            content
        };
        let entry = &mut entries.last_mut().expect("checked above").1;
        for tok in values.split(|c: char| c.is_whitespace() || c == ',') {
            if !tok.is_empty() {
                entry.values.push((line, parse_number(tok, line)?));
            }
        }
    }

    let take = |name: &str| -> Result<&Entry> {
        entries
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::Parse {
                line: last_line,
                msg: format!("missing key `{name}`"),
            })
    };
    let scalar = |name: &str| -> Result<(usize, f64)> {
        let e = take(name)?;
        match e.values.as_slice() {
            [(line, v)] => Ok((*line, *v)),
            _ => Err(Error::Parse {
                line: e.line,
                msg: format!("`{name}` expects exactly one value, got {}", e.values.len()),
            }),
        }
    };
    let integer = |name: &str| -> Result<usize> {
        let (line, v) = scalar(name)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Parse {
                line,
                msg: format!("`{name}` must be a positive integer, got {v}"),
            });
        }
        Ok(v as usize)
    };

    let n = integer("n")?;
    let horizon = integer("horizon")?;
    let (lambda_line, lambda) = scalar("lambda")?;
    let omega = match entries.iter().find(|(k, _)| k == "omega") {
        Some(_) => scalar("omega")?,
        None => (0, 0.0),
    };
    let params = SolverParams::new(lambda, omega.1).map_err(|e| Error::Parse {
        line: if lambda > 0.0 { omega.0 } else { lambda_line },
        msg: e.to_string(),
    })?;

    let trans = take("transition")?;
    if trans.values.len() != n * n {
        return Err(Error::Parse {
            line: trans.line,
            msg: format!(
                "transition expects {} entries for n = {n}, got {}",
                n * n,
                trans.values.len()
            ),
        });
    }
    let init = take("initial")?;
    if init.values.len() != n {
        return Err(Error::Parse {
            line: init.line,
            msg: format!("initial expects {n} entries, got {}", init.values.len()),
        });
    }

    for (i, row) in trans.values.chunks(n).enumerate() {
        let sum: f64 = row.iter().map(|(_, v)| v).sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Parse {
                line: row[0].0,
                msg: format!("row {} sums to {}", i + 1, round_sum(sum)),
            });
        }
    }

    let transition = DMatrix::from_row_iterator(n, n, trans.values.iter().map(|(_, v)| *v));
    let initial = DVector::from_iterator(n, init.values.iter().map(|(_, v)| *v));
    let chain = ChainSpec::new(transition, initial, horizon).map_err(|e| Error::Parse {
        line: trans.line,
        msg: e.to_string(),
    })?;
    Ok(ChainFile { chain, params })
}

pub fn read_chain_file(path: impl AsRef<Path>) -> Result<ChainFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chain_file(&text)
}
