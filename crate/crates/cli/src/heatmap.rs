//! SVG heatmaps of transition matrices.

use std::fmt::Write;

const CELL: usize = 8;
const MARGIN: usize = 40;
const MASKED: &str = "rgb(128,128,128)";

/// A row-major grid of values with state labels for each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub values: Vec<f64>,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    /// Rows drawn grey regardless of their values.
    pub masked_rows: Vec<bool>,
}

impl Heatmap {
    /// Panics if `values` does not match the label counts.
    pub fn new(values: Vec<f64>, row_labels: Vec<usize>, col_labels: Vec<usize>) -> Self {
        assert_eq!(values.len(), row_labels.len() * col_labels.len());
        let masked_rows = vec![false; row_labels.len()];
        Self {
            values,
            row_labels,
            col_labels,
            masked_rows,
        }
    }

    pub fn with_masked_rows(mut self, masked: Vec<bool>) -> Self {
        assert_eq!(masked.len(), self.row_labels.len());
        self.masked_rows = masked;
        self
    }

    /// Sub-grid picking `order` on both axes of a square matrix, cropped to
    /// the first `max_cells` entries of `order`.
    pub fn reordered(
        values: &[f64],
        n: usize,
        masked: &[bool],
        order: &[usize],
        max_cells: usize,
    ) -> Self {
        let keep: Vec<usize> = order.iter().copied().take(max_cells).collect();
        let mut out = Vec::with_capacity(keep.len() * keep.len());
        for &i in &keep {
            for &j in &keep {
                out.push(values[i * n + j]);
            }
        }
        let rows_masked = keep.iter().map(|&i| masked[i]).collect();
        Heatmap::new(out, keep.clone(), keep).with_masked_rows(rows_masked)
    }

    fn max_value(&self) -> f64 {
        let cols = self.col_labels.len();
        self.values
            .chunks(cols.max(1))
            .zip(&self.masked_rows)
            .filter(|(_, &m)| !m)
            .flat_map(|(row, _)| row.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn to_svg(&self) -> String {
        let rows = self.row_labels.len();
        let cols = self.col_labels.len();
        let width = MARGIN + cols * CELL;
        let height = MARGIN + rows * CELL;
        let max = self.max_value();
        let mut s = String::new();
        writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"6\">"
        )
        .unwrap();
        writeln!(
            s,
            "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
        )
        .unwrap();
        for (c, label) in self.col_labels.iter().enumerate() {
            let x = MARGIN + c * CELL + CELL / 2;
            writeln!(
                s,
                "<text x=\"{x}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-90 {x} {})\">{label}</text>",
                MARGIN - 2,
                MARGIN - 2
            )
            .unwrap();
        }
        for (r, label) in self.row_labels.iter().enumerate() {
            let y = MARGIN + r * CELL + CELL - 2;
            writeln!(
                s,
                "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{label}</text>",
                MARGIN - 2
            )
            .unwrap();
        }
        for r in 0..rows {
            for c in 0..cols {
                let v = self.values[r * cols + c];
                let fill = if self.masked_rows[r] {
                    MASKED.to_string()
                } else {
                    let t = if max > 0.0 {
                        (v / max).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    format!("rgb({},0,0)", (255.0 * t).round() as u8)
                };
                writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"><title>{v:.6}</title></rect>",
                    MARGIN + c * CELL,
                    MARGIN + r * CELL
                )
                .unwrap();
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// States sorted by subgraph label, then by index.
pub fn subgraph_order(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| (labels[i], i));
    order
}
