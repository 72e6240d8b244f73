//! Transition counting and maximum-likelihood transition probabilities.
//!
//! Both tensors are shaped `n_from × n_to × n_cmd` and stored with command
//! slices contiguous, so one command slice is an ordinary row-major
//! `n_from × n_to` matrix. Rows are indexed by the source state and hold the
//! conditional distribution over destination states: `P(to | from, cmd)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransitionError {
    #[error("index ({from}, {to}, {cmd}) outside shape {n_from}x{n_to}x{n_cmd}")]
    OutOfRange {
        from: usize,
        to: usize,
        cmd: usize,
        n_from: usize,
        n_to: usize,
        n_cmd: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    n_from: usize,
    n_to: usize,
    n_cmd: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(n_from: usize, n_to: usize, n_cmd: usize) -> Self {
        Self {
            n_from,
            n_to,
            n_cmd,
            counts: vec![0; n_from * n_to * n_cmd],
        }
    }

    /// Square, single-command counts.
    pub fn square(n: usize) -> Self {
        Self::new(n, n, 1)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_from, self.n_to, self.n_cmd)
    }

    fn index(&self, from: usize, to: usize, cmd: usize) -> Result<usize, TransitionError> {
        if from >= self.n_from || to >= self.n_to || cmd >= self.n_cmd {
            return Err(TransitionError::OutOfRange {
                from,
                to,
                cmd,
                n_from: self.n_from,
                n_to: self.n_to,
                n_cmd: self.n_cmd,
            });
        }
        Ok((cmd * self.n_from + from) * self.n_to + to)
    }

    /// Records one observed transition.
    pub fn record(&mut self, from: usize, to: usize, cmd: usize) -> Result<(), TransitionError> {
        let idx = self.index(from, to, cmd)?;
        self.counts[idx] += 1;
        Ok(())
    }

    /// Records `n` copies of the same transition.
    pub fn add(
        &mut self,
        from: usize,
        to: usize,
        cmd: usize,
        n: u64,
    ) -> Result<(), TransitionError> {
        let idx = self.index(from, to, cmd)?;
        self.counts[idx] += n;
        Ok(())
    }

    pub fn get(&self, from: usize, to: usize, cmd: usize) -> u64 {
        self.counts[(cmd * self.n_from + from) * self.n_to + to]
    }

    pub fn row(&self, from: usize, cmd: usize) -> &[u64] {
        let start = (cmd * self.n_from + from) * self.n_to;
        &self.counts[start..start + self.n_to]
    }

    pub fn row_total(&self, from: usize, cmd: usize) -> u64 {
        self.row(from, cmd).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// Adds counts gathered independently over the same state space.
    pub fn merge(&mut self, other: &TransitionCounts) -> Result<(), TransitionError> {
        if self.shape() != other.shape() {
            return Err(TransitionError::Shape(format!(
                "cannot merge {:?} into {:?}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn scaled(&self, factor: u64) -> TransitionCounts {
        let mut out = self.clone();
        out.counts.iter_mut().for_each(|c| *c *= factor);
        out
    }

    /// Writes one CSV per command slice. Returned names carry the `_cmdQ`
    /// suffix when there is more than one command.
    pub fn to_csv_slices(&self, stem: &str) -> Vec<(String, String)> {
        (0..self.n_cmd)
            .map(|cmd| {
                let rows = (0..self.n_from)
                    .map(|f| self.row(f, cmd).iter().map(|c| c.to_string()).collect());
                (
                    slice_name(stem, cmd, self.n_cmd),
                    render_csv(self.n_to, rows),
                )
            })
            .collect()
    }

    pub fn from_csv_slices(slices: &[String]) -> Result<Self, TransitionError> {
        let parsed = parse_slices(slices)?;
        let (n_from, n_to) = parsed.shape;
        let mut out = TransitionCounts::new(n_from, n_to, slices.len());
        for (cmd, rows) in parsed.cells.into_iter().enumerate() {
            for (from, row) in rows.into_iter().enumerate() {
                for (to, cell) in row.into_iter().enumerate() {
                    let value = match cell {
                        Some(text) => text.parse::<u64>().map_err(|e| TransitionError::Csv {
                            line: from + 2,
                            message: format!("count `{text}`: {e}"),
                        })?,
                        None => 0,
                    };
                    let idx = out.index(from, to, cmd)?;
                    out.counts[idx] = value;
                }
            }
        }
        Ok(out)
    }
}

/// Row-normalized transition probabilities with an observation mask.
///
/// Each row can be split into equal blocks of `block_len` destinations that
/// are normalized independently; the common case is one block per row.
/// For an observed row, every block with non-zero counts sums to one.
/// Unobserved rows are all zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    n_from: usize,
    n_to: usize,
    n_cmd: usize,
    block_len: usize,
    probs: Vec<f64>,
    observed: Vec<bool>,
}

/// Maximum-likelihood estimate `counts / row total`, with no smoothing.
pub fn normalize(counts: &TransitionCounts) -> ProbabilityMatrix {
    normalize_blocked(counts, counts.n_to).expect("a full row is always a valid block")
}

/// Like [`normalize`], but each row is cut into blocks of `block_len`
/// destinations and each block is a separate conditional distribution.
pub fn normalize_blocked(
    counts: &TransitionCounts,
    block_len: usize,
) -> Result<ProbabilityMatrix, TransitionError> {
    let (n_from, n_to, n_cmd) = counts.shape();
    if block_len == 0 || n_to % block_len != 0 {
        return Err(TransitionError::Shape(format!(
            "block length {block_len} does not divide {n_to}"
        )));
    }
    let mut probs = vec![0.0; counts.counts.len()];
    let mut observed = vec![false; n_from * n_cmd];
    for cmd in 0..n_cmd {
        for from in 0..n_from {
            let start = (cmd * n_from + from) * n_to;
            let row = &counts.counts[start..start + n_to];
            observed[cmd * n_from + from] = row.iter().any(|&c| c > 0);
            for (b, block) in row.chunks(block_len).enumerate() {
                let total: u64 = block.iter().sum();
                if total == 0 {
                    continue;
                }
                let total = total as f64;
                for (j, &c) in block.iter().enumerate() {
                    probs[start + b * block_len + j] = c as f64 / total;
                }
            }
        }
    }
    Ok(ProbabilityMatrix {
        n_from,
        n_to,
        n_cmd,
        block_len,
        probs,
        observed,
    })
}

impl ProbabilityMatrix {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_from, self.n_to, self.n_cmd)
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn get(&self, from: usize, to: usize, cmd: usize) -> f64 {
        self.probs[(cmd * self.n_from + from) * self.n_to + to]
    }

    pub fn row(&self, from: usize, cmd: usize) -> &[f64] {
        let start = (cmd * self.n_from + from) * self.n_to;
        &self.probs[start..start + self.n_to]
    }

    pub fn is_observed(&self, from: usize, cmd: usize) -> bool {
        self.observed[cmd * self.n_from + from]
    }

    /// Row observation mask of one command slice.
    pub fn observed_rows(&self, cmd: usize) -> &[bool] {
        &self.observed[cmd * self.n_from..(cmd + 1) * self.n_from]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Row-major `n_from × n_to` view of one command slice.
    pub fn slice(&self, cmd: usize) -> &[f64] {
        let size = self.n_from * self.n_to;
        &self.probs[cmd * size..(cmd + 1) * size]
    }

    /// One CSV per command slice; masked rows are written as empty cells.
    pub fn to_csv_slices(&self, stem: &str) -> Vec<(String, String)> {
        (0..self.n_cmd)
            .map(|cmd| {
                let rows = (0..self.n_from).map(|f| {
                    if self.is_observed(f, cmd) {
                        self.row(f, cmd).iter().map(|p| p.to_string()).collect()
                    } else {
                        vec![String::new(); self.n_to]
                    }
                });
                (
                    slice_name(stem, cmd, self.n_cmd),
                    render_csv(self.n_to, rows),
                )
            })
            .collect()
    }

    /// Inverse of [`Self::to_csv_slices`]. The block length is not part of
    /// the CSV and must be supplied.
    pub fn from_csv_slices(slices: &[String], block_len: usize) -> Result<Self, TransitionError> {
        let parsed = parse_slices(slices)?;
        let (n_from, n_to) = parsed.shape;
        let n_cmd = slices.len();
        if block_len == 0 || n_to % block_len != 0 {
            return Err(TransitionError::Shape(format!(
                "block length {block_len} does not divide {n_to}"
            )));
        }
        let mut probs = vec![0.0; n_from * n_to * n_cmd];
        let mut observed = vec![false; n_from * n_cmd];
        for (cmd, rows) in parsed.cells.into_iter().enumerate() {
            for (from, row) in rows.into_iter().enumerate() {
                let filled = row.iter().filter(|c| c.is_some()).count();
                if filled == 0 {
                    continue;
                }
                if filled != n_to {
                    return Err(TransitionError::Csv {
                        line: from + 2,
                        message: "partially empty row".into(),
                    });
                }
                observed[cmd * n_from + from] = true;
                for (to, cell) in row.into_iter().enumerate() {
                    let text = cell.unwrap_or_default();
                    probs[(cmd * n_from + from) * n_to + to] =
                        text.parse::<f64>().map_err(|e| TransitionError::Csv {
                            line: from + 2,
                            message: format!("probability `{text}`: {e}"),
                        })?;
                }
            }
        }
        Ok(ProbabilityMatrix {
            n_from,
            n_to,
            n_cmd,
            block_len,
            probs,
            observed,
        })
    }
}

fn slice_name(stem: &str, cmd: usize, n_cmd: usize) -> String {
    if n_cmd == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_cmd{cmd}.csv")
    }
}

fn render_csv(n_to: usize, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from("state");
    for to in 0..n_to {
        write!(out, ",{to}").unwrap();
    }
    out.push('\n');
    for (from, cells) in rows.enumerate() {
        write!(out, "{from}").unwrap();
        for cell in cells {
            out.push(',');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

struct ParsedSlices {
    shape: (usize, usize),
    /// `cells[cmd][from][to]`, `None` for empty cells.
    cells: Vec<Vec<Vec<Option<String>>>>,
}

fn parse_slices(slices: &[String]) -> Result<ParsedSlices, TransitionError> {
    let mut shape = None;
    let mut cells = Vec::with_capacity(slices.len());
    for text in slices {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(TransitionError::Csv {
            line: 1,
            message: "empty file".into(),
        })?;
        let n_to = header.split(',').count().saturating_sub(1);
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim();
            if id.parse::<usize>().ok() != Some(i) {
                return Err(TransitionError::Csv {
                    line: i + 2,
                    message: format!("expected state id {i}, found `{id}`"),
                });
            }
            let row: Vec<Option<String>> = fields
                .map(|f| {
                    let f = f.trim();
                    (!f.is_empty()).then(|| f.to_string())
                })
                .collect();
            if row.len() != n_to {
                return Err(TransitionError::Csv {
                    line: i + 2,
                    message: format!("expected {n_to} cells, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        let this = (rows.len(), n_to);
        match shape {
            None => shape = Some(this),
            Some(s) if s != this => {
                return Err(TransitionError::Shape(format!(
                    "slice shape {this:?} differs from {s:?}"
                )));
            }
            _ => {}
        }
        cells.push(rows);
    }
    let shape = shape.ok_or_else(|| TransitionError::Shape("no slices".into()))?;
    Ok(ParsedSlices { shape, cells })
}
