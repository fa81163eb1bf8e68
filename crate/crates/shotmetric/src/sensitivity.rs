//! Decomposition of test-shot x train-shot accuracy grids.
//!
//! Raw grids are dominated by two uninteresting effects: accuracy rises with
//! test shot, and some models are better than others across the board.
//! `decompose` removes both:
//!
//! 1. subtract each row's mean (the test-shot bias) to get offsets;
//! 2. subtract each offset column's mean (the model bias) to get the
//!    corrected heatmap.
//!
//! What remains is shot-sensitive behavior; overfitting to train shot shows
//! up as an XOR pattern. The sensitivity score is the spread (max - min) of
//! the corrected heatmap: roughly how far from its best or worst case a
//! model can land as train and test shot vary.

use nalgebra::DMatrix;

use crate::error::Error;

/// A test-shot x train-shot table of percent accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyGrid {
    label: String,
    test_shots: Vec<u32>,
    train_shots: Vec<u32>,
    values: DMatrix<f64>,
}

impl AccuracyGrid {
    pub fn new(
        label: impl Into<String>,
        test_shots: Vec<u32>,
        train_shots: Vec<u32>,
        values: DMatrix<f64>,
    ) -> Result<Self, Error> {
        if test_shots.len() < 2 || train_shots.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least a 2x2 grid, got {}x{}",
                test_shots.len(),
                train_shots.len()
            )));
        }
        if values.nrows() != test_shots.len() || values.ncols() != train_shots.len() {
            return Err(Error::InvalidGrid(format!(
                "value matrix is {}x{} but axes are {}x{}",
                values.nrows(),
                values.ncols(),
                test_shots.len(),
                train_shots.len()
            )));
        }
        for axis in [&test_shots, &train_shots] {
            if axis[0] == 0 || !axis.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidGrid(
                    "shot axes must be strictly ascending positive integers".into(),
                ));
            }
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(Error::InvalidGrid(format!(
                "accuracy {bad} outside [0, 100]"
            )));
        }
        Ok(AccuracyGrid {
            label: label.into(),
            test_shots,
            train_shots,
            values,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn test_shots(&self) -> &[u32] {
        &self.test_shots
    }

    pub fn train_shots(&self) -> &[u32] {
        &self.train_shots
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn same_axes(&self, other: &AccuracyGrid) -> bool {
        self.test_shots == other.test_shots && self.train_shots == other.train_shots
    }

    /// Parses the grid CSV format: header `test_shot\train_shot,<j1>,...`,
    /// one row per test shot. Lines starting with `#` are ignored.
    pub fn from_csv(text: &str, label: impl Into<String>) -> Result<Self, Error> {
        let mut lines = csv_lines(text);
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("grid CSV is empty".into()))?;
        let mut cells = header.split(',');
        let first = cells.next().unwrap_or("");
        if first != GRID_CORNER {
            return Err(Error::Parse(format!(
                "grid CSV must start with '{GRID_CORNER}', found '{first}'"
            )));
        }
        let train_shots = cells.map(parse_shot).collect::<Result<Vec<u32>, Error>>()?;

        let mut test_shots = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            let mut cells = line.split(',');
            test_shots.push(parse_shot(cells.next().unwrap_or(""))?);
            let row = cells
                .map(parse_value)
                .collect::<Result<Vec<f64>, Error>>()?;
            if row.len() != train_shots.len() {
                return Err(Error::Parse(format!(
                    "grid row for test shot {} has {} values, expected {}",
                    test_shots.last().unwrap(),
                    row.len(),
                    train_shots.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("grid CSV has no data rows".into()));
        }
        let values = DMatrix::from_fn(rows.len(), train_shots.len(), |i, j| rows[i][j]);
        AccuracyGrid::new(label, test_shots, train_shots, values)
    }

    /// Writes the grid CSV format with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(GRID_CORNER);
        for j in &self.train_shots {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for (i, t) in self.test_shots.iter().enumerate() {
            out.push_str(&t.to_string());
            for j in 0..self.train_shots.len() {
                out.push_str(&format!(",{}", self.values[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

const GRID_CORNER: &str = "test_shot\\train_shot";
const REPORT_MEAN_HEADER: &str = "mean";
const REPORT_OFFSET_ROW: &str = "offset";

fn csv_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_shot(cell: &str) -> Result<u32, Error> {
    cell.trim()
        .parse::<u32>()
        .map_err(|_| Error::Parse(format!("expected a shot count, found '{cell}'")))
}

fn parse_value(cell: &str) -> Result<f64, Error> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("expected a number, found '{cell}'")))
}

/// Result of the accuracy decomposition: per-test-shot means, per-model
/// offsets and biases, the corrected heatmap, and the sensitivity score.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub label: String,
    pub test_shots: Vec<u32>,
    pub train_shots: Vec<u32>,
    /// Test-shot bias: mean accuracy of each grid row.
    pub row_means: Vec<f64>,
    /// Grid values minus their row means. Every row sums to zero.
    pub offsets: DMatrix<f64>,
    /// Model bias: mean of each offset column.
    pub model_bias: Vec<f64>,
    /// Offsets minus model bias. Every row and column sums to zero.
    pub heatmap: DMatrix<f64>,
    /// max(heatmap) - min(heatmap).
    pub score: f64,
}

/// Splits a grid into test-shot bias, model bias, and the corrected
/// shot-sensitivity heatmap.
pub fn decompose(grid: &AccuracyGrid) -> SensitivityReport {
    let values = grid.values();
    let (t, j) = (values.nrows(), values.ncols());

    let row_means: Vec<f64> = (0..t).map(|i| values.row(i).sum() / j as f64).collect();
    let offsets = DMatrix::from_fn(t, j, |i, jj| values[(i, jj)] - row_means[i]);
    let model_bias: Vec<f64> = (0..j)
        .map(|jj| offsets.column(jj).sum() / t as f64)
        .collect();
    let heatmap = DMatrix::from_fn(t, j, |i, jj| offsets[(i, jj)] - model_bias[jj]);
    let score = heatmap.max() - heatmap.min();

    SensitivityReport {
        label: grid.label().to_string(),
        test_shots: grid.test_shots().to_vec(),
        train_shots: grid.train_shots().to_vec(),
        row_means,
        offsets,
        model_bias,
        heatmap,
        score,
    }
}

/// Spread of the corrected heatmap; equals `decompose(grid).score`.
pub fn sensitivity_score(grid: &AccuracyGrid) -> f64 {
    decompose(grid).score
}

/// Per-test-shot gains of a cosine model over its Euclidean counterpart:
/// the difference of row means. Axes must match exactly.
pub fn gain_table(euclidean: &AccuracyGrid, cosine: &AccuracyGrid) -> Result<Vec<f64>, Error> {
    if !euclidean.same_axes(cosine) {
        return Err(Error::AxisMismatch(format!(
            "'{}' and '{}' have different shot axes",
            euclidean.label(),
            cosine.label()
        )));
    }
    let a = decompose(euclidean);
    let b = decompose(cosine);
    Ok(a.row_means
        .iter()
        .zip(&b.row_means)
        .map(|(e, c)| c - e)
        .collect())
}

impl SensitivityReport {
    /// Writes the report CSV: a `# score` comment, then the corrected
    /// heatmap with row means as a trailing column and model bias as a
    /// trailing row, score in the corner cell. Values carry full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# score = {}\n", self.score));
        out.push_str(GRID_CORNER);
        for j in &self.train_shots {
            out.push_str(&format!(",{j}"));
        }
        out.push_str(&format!(",{REPORT_MEAN_HEADER}\n"));
        for (i, t) in self.test_shots.iter().enumerate() {
            out.push_str(&t.to_string());
            for j in 0..self.train_shots.len() {
                out.push_str(&format!(",{}", self.heatmap[(i, j)]));
            }
            out.push_str(&format!(",{}\n", self.row_means[i]));
        }
        out.push_str(REPORT_OFFSET_ROW);
        for bias in &self.model_bias {
            out.push_str(&format!(",{bias}"));
        }
        out.push_str(&format!(",{}\n", self.score));
        out
    }

    /// Parses a report CSV produced by [`SensitivityReport::to_csv`].
    /// The offsets matrix is rebuilt from heatmap + model bias.
    pub fn from_csv(text: &str) -> Result<Self, Error> {
        let score_line = text
            .lines()
            .find(|l| l.starts_with("# score"))
            .ok_or_else(|| Error::Parse("report CSV is missing the '# score' line".into()))?;
        let score = parse_value(
            score_line
                .split('=')
                .nth(1)
                .ok_or_else(|| Error::Parse("malformed '# score' line".into()))?,
        )?;

        let mut lines = csv_lines(text);
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("report CSV is empty".into()))?;
        let mut cells: Vec<&str> = header.split(',').collect();
        if cells.first() != Some(&GRID_CORNER) || cells.last() != Some(&REPORT_MEAN_HEADER) {
            return Err(Error::Parse(
                "report CSV header must span the corner cell through the mean column".into(),
            ));
        }
        cells.pop();
        let train_shots = cells[1..]
            .iter()
            .map(|c| parse_shot(c))
            .collect::<Result<Vec<u32>, Error>>()?;

        let mut test_shots = Vec::new();
        let mut heatmap_rows: Vec<Vec<f64>> = Vec::new();
        let mut row_means = Vec::new();
        let mut model_bias: Option<Vec<f64>> = None;
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != train_shots.len() + 2 {
                return Err(Error::Parse(format!(
                    "report row '{line}' has {} cells, expected {}",
                    cells.len(),
                    train_shots.len() + 2
                )));
            }
            let values = cells[1..=train_shots.len()]
                .iter()
                .map(|c| parse_value(c))
                .collect::<Result<Vec<f64>, Error>>()?;
            if cells[0] == REPORT_OFFSET_ROW {
                model_bias = Some(values);
            } else {
                test_shots.push(parse_shot(cells[0])?);
                heatmap_rows.push(values);
                row_means.push(parse_value(cells[train_shots.len() + 1])?);
            }
        }
        let model_bias = model_bias
            .ok_or_else(|| Error::Parse("report CSV is missing the offset row".into()))?;
        if heatmap_rows.is_empty() {
            return Err(Error::Parse("report CSV has no heatmap rows".into()));
        }
        let heatmap = DMatrix::from_fn(heatmap_rows.len(), train_shots.len(), |i, j| {
            heatmap_rows[i][j]
        });
        let offsets = DMatrix::from_fn(heatmap.nrows(), heatmap.ncols(), |i, j| {
            heatmap[(i, j)] + model_bias[j]
        });
        Ok(SensitivityReport {
            label: String::new(),
            test_shots,
            train_shots,
            row_means,
            offsets,
            model_bias,
            heatmap,
            score,
        })
    }
}
