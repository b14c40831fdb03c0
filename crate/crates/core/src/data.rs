//! Cross-section and panel datasets, plus their CSV readers.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered, rectangular collection of observation records.
///
/// Scalar models read a single column, the probit reads `(y, x)` pairs and
/// the AR(1) model reads lagged pairs `(y_{t-1}, y_t)` (see [`Dataset::lagged`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    width: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::InvalidData("dataset is empty".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} fields, expected {width}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(width, values)
    }

    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    /// Lagged pairs `(y_{t-1}, y_t)` for `t = 1..len`, used by the AR(1) model.
    pub fn lagged(series: &[f64]) -> Result<Self> {
        if series.len() < 2 {
            return Err(Error::InvalidData(
                "a lagged dataset needs at least two points".into(),
            ));
        }
        let values = series.windows(2).flat_map(|w| [w[0], w[1]]).collect();
        Self::from_flat(2, values)
    }

    fn from_flat(width: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData("dataset is empty".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {}",
                pos / width
            )));
        }
        Ok(Self { width, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.width)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Copy of the rows at `indices`, in that order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.width);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            width: self.width,
            values,
        }
    }

    /// Every row except `skip`.
    pub fn without(&self, skip: usize) -> Dataset {
        let mut values = Vec::with_capacity(self.values.len() - self.width);
        values.extend_from_slice(&self.values[..skip * self.width]);
        values.extend_from_slice(&self.values[(skip + 1) * self.width..]);
        Dataset {
            width: self.width,
            values,
        }
    }

    pub fn range(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            width: self.width,
            values: self.values[range.start * self.width..range.end * self.width].to_vec(),
        }
    }

    /// Reads a headed CSV in which every column is numeric.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|field| parse_number(field, line + 2))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }
}

/// Balanced panel of `n` units observed over `periods` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n: usize,
    periods: usize,
    width: usize,
    cells: Vec<f64>,
}

impl PanelDataset {
    /// `cells` is unit-major: all periods of unit 0, then unit 1, ...
    pub fn new(n: usize, periods: usize, width: usize, cells: Vec<f64>) -> Result<Self> {
        if n == 0 || width == 0 {
            return Err(Error::InvalidData("panel has no units".into()));
        }
        if periods < 2 {
            return Err(Error::InvalidData(format!(
                "panel needs at least 2 periods, got {periods}"
            )));
        }
        if cells.len() != n * periods * width {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n}x{periods} panel of width {width}, got {}",
                n * periods * width,
                cells.len()
            )));
        }
        if cells.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite panel value".into()));
        }
        Ok(Self {
            n,
            periods,
            width,
            cells,
        })
    }

    /// Single-column panel from per-unit series.
    pub fn from_units(units: &[Vec<f64>]) -> Result<Self> {
        let periods = units.first().map(Vec::len).unwrap_or(0);
        if units.iter().any(|u| u.len() != periods) {
            return Err(Error::InvalidData("units have unequal lengths".into()));
        }
        Self::new(units.len(), periods, 1, units.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cell(&self, unit: usize, period: usize) -> &[f64] {
        let start = (unit * self.periods + period) * self.width;
        &self.cells[start..start + self.width]
    }

    pub fn unit(&self, unit: usize) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        let start = unit * self.periods * self.width;
        self.cells[start..start + self.periods * self.width].chunks_exact(self.width)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Sub-panel keeping the given periods (in the given order) for every unit.
    pub fn select_periods(&self, keep: &[usize]) -> PanelDataset {
        let mut cells = Vec::with_capacity(self.n * keep.len() * self.width);
        for i in 0..self.n {
            for &t in keep {
                cells.extend_from_slice(self.cell(i, t));
            }
        }
        PanelDataset {
            n: self.n,
            periods: keep.len(),
            width: self.width,
            cells,
        }
    }

    pub fn without_period(&self, drop: usize) -> PanelDataset {
        let keep: Vec<usize> = (0..self.periods).filter(|&t| t != drop).collect();
        self.select_periods(&keep)
    }

    /// Long-format CSV: `unit, period, <value columns...>`, periods `1..=T`
    /// for every unit. Units keep their order of first appearance.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header_len = rdr.headers()?.len();
        if header_len < 3 {
            return Err(Error::Parse(
                "panel CSV needs columns unit, period and at least one value".into(),
            ));
        }
        let width = header_len - 2;
        let mut order: Vec<String> = Vec::new();
        let mut units: BTreeMap<String, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let line = line + 2;
            let unit = record[0].to_string();
            let period: i64 = record[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad period `{}`", &record[1])))?;
            let values = record
                .iter()
                .skip(2)
                .map(|f| parse_number(f, line))
                .collect::<Result<Vec<_>>>()?;
            let entry = units.entry(unit.clone()).or_insert_with(|| {
                order.push(unit.clone());
                BTreeMap::new()
            });
            if entry.insert(period, values).is_some() {
                return Err(Error::Parse(format!(
                    "line {line}: duplicate period {period} for unit {unit}"
                )));
            }
        }
        let periods = units.values().next().map(BTreeMap::len).unwrap_or(0);
        let mut cells = Vec::with_capacity(order.len() * periods * width);
        for unit in &order {
            let rows = &units[unit];
            let expected = (1..=periods as i64).collect::<Vec<_>>();
            if rows.keys().copied().collect::<Vec<_>>() != expected {
                return Err(Error::Parse(format!(
                    "unit {unit}: periods must be 1..={periods}"
                )));
            }
            for row in rows.values() {
                cells.extend_from_slice(row);
            }
        }
        Self::new(order.len(), periods, width, cells)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Dataset::from_column(&[]).is_err());
        assert!(Dataset::from_column(&[1.0, f64::NAN]).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn lagged_pairs() {
        let d = Dataset::lagged(&[0.0, 1.0, 0.5]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(0), &[0.0, 1.0]);
        assert_eq!(d.row(1), &[1.0, 0.5]);
    }

    #[test]
    fn subsets() {
        let d = Dataset::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.without(1).column(0), vec![1.0, 3.0, 4.0]);
        assert_eq!(d.select(&[3, 3, 0]).column(0), vec![4.0, 4.0, 1.0]);
        assert_eq!(d.range(2..4).column(0), vec![3.0, 4.0]);
    }

    #[test]
    fn cross_section_csv() {
        let d = Dataset::from_csv_reader("z\n1\n3\n".as_bytes()).unwrap();
        assert_eq!(d.column(0), vec![1.0, 3.0]);
        assert!(Dataset::from_csv_reader("z\n1\nabc\n".as_bytes()).is_err());
    }

    #[test]
    fn panel_csv_orders_periods_and_checks_balance() {
        let text = "unit,period,z\nb,2,4\nb,1,3\na,1,1\na,2,2\n";
        let p = PanelDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!((p.n(), p.periods()), (2, 2));
        assert_eq!(p.cell(0, 0), &[3.0]);
        assert_eq!(p.cell(0, 1), &[4.0]);
        assert_eq!(p.cell(1, 1), &[2.0]);

        let gap = "unit,period,z\na,1,1\na,3,2\nb,1,1\nb,2,2\n";
        assert!(PanelDataset::from_csv_reader(gap.as_bytes()).is_err());
        let short = "unit,period,z\na,1,1\na,2,2\nb,1,1\n";
        assert!(PanelDataset::from_csv_reader(short.as_bytes()).is_err());
    }

    #[test]
    fn panel_period_selection() {
        let p = PanelDataset::from_units(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let q = p.without_period(1);
        assert_eq!(q.periods(), 2);
        assert_eq!(q.cell(1, 1), &[6.0]);
        assert!(PanelDataset::from_units(&[vec![1.0]]).is_err());
    }
}
