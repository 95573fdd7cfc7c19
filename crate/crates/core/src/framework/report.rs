use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::{Cell, Column, Plans};

/// Six decimals, or `inf` for an infinite cost.
pub fn format_cost(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    /// Number of scenarios the plans were built from.
    pub tau: usize,
    pub cells: BTreeMap<Column, Cell>,
    #[serde(skip)]
    pub plans: Plans,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub columns: Vec<Column>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Column sum; infinite as soon as one cell is.
    pub fn aggregate(&self, c: Column) -> Option<f64> {
        if !self.columns.contains(&c) {
            return None;
        }
        Some(self.rows.iter().map(|r| r.cells[&c].cost).sum())
    }

    pub fn cost(&self, tau: usize, c: Column) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.tau == tau)
            .and_then(|r| r.cells.get(&c))
            .map(|cell| cell.cost)
    }

    fn line(&self, label: String, value: impl Fn(Column) -> Option<f64>) -> String {
        let mut fields = vec![label];
        for c in Column::ALL {
            fields.push(value(c).map(format_cost).unwrap_or_default());
        }
        fields.join(",")
    }

    /// `tau,m1,m2,m3,m4,m5,ws` rows followed by the `aggregate` row; columns
    /// not selected stay empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,m1,m2,m3,m4,m5,ws")?;
        for row in &self.rows {
            writeln!(
                w,
                "{}",
                self.line(row.tau.to_string(), |c| row.cells.get(&c).map(|x| x.cost))
            )?;
        }
        writeln!(w, "{}", self.line("aggregate".into(), |c| self.aggregate(c)))?;
        Ok(())
    }

    /// Long form `tau,method,cost` for plotting.
    pub fn write_plot_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,method,cost")?;
        for row in &self.rows {
            for (c, cell) in &row.cells {
                writeln!(w, "{},{},{}", row.tau, c, format_cost(cell.cost))?;
            }
        }
        Ok(())
    }

    /// `tau,method,seconds,outcome`; wall times vary between runs.
    pub fn write_timing_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,method,seconds,outcome")?;
        for row in &self.rows {
            for (c, cell) in &row.cells {
                writeln!(w, "{},{},{:.6},{}", row.tau, c, cell.seconds, cell.outcome)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("ascii output"))
    }
}
