//! `fields.csv` and run-length encoded set masks.
//!
//! Columns are `x1..xm, weight, g, u, phi1..phim`; every float is written
//! with 17 significant digits so that reading the file back reproduces
//! the values bit for bit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::IndicatorSet;
use crate::grid::{GaussianGrid, GridSpec, ScalarField, VectorField};

/// One row per node, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(m: usize) -> String {
    let mut cols: Vec<String> = (1..=m).map(|d| format!("x{d}")).collect();
    cols.extend(["weight", "g", "u"].map(String::from));
    cols.extend((1..=m).map(|d| format!("phi{d}")));
    cols.join(",")
}

pub fn write_fields_csv(g: &ScalarField, u: &ScalarField, phi: &VectorField) -> Result<String> {
    let grid = g.grid();
    if !grid.same_as(u.grid()) || !grid.same_as(phi.grid()) {
        return Err(Error::GridMismatch);
    }
    let m = grid.dimension();
    let mut out = header(m);
    out.push('\n');
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.point(i).into_iter().map(float).collect();
        row.push(float(grid.weights()[i]));
        row.push(float(g.values()[i]));
        row.push(float(u.values()[i]));
        row.extend(phi.at(i).iter().copied().map(float));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_fields_csv(text: &str) -> Result<FieldTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Validation("empty fields file".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    let m = cols.iter().filter(|c| c.starts_with('x')).count();
    if m == 0 || head.trim() != header(m) {
        return Err(Error::Validation(format!("unexpected fields header `{head}`")));
    }
    let mut table = FieldTable {
        dimension: m,
        points: vec![],
        weight: vec![],
        g: vec![],
        u: vec![],
        phi: vec![],
    };
    for (n, line) in lines.enumerate() {
        let row = parse_row(line, 2 * m + 3, n + 2)?;
        table.points.push(row[..m].to_vec());
        table.weight.push(row[m]);
        table.g.push(row[m + 1]);
        table.u.push(row[m + 2]);
        table.phi.push(row[m + 3..].to_vec());
    }
    Ok(table)
}

fn parse_row(line: &str, width: usize, line_no: usize) -> Result<Vec<f64>> {
    let row = line
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
    if row.len() != width {
        return Err(Error::Validation(format!(
            "line {line_no}: expected {width} columns, found {}",
            row.len()
        )));
    }
    Ok(row)
}

fn matches_grid(grid: &GaussianGrid, points: &[Vec<f64>]) -> Result<()> {
    if points.len() != grid.len() {
        return Err(Error::Validation(format!(
            "table has {} rows for {} grid nodes",
            points.len(),
            grid.len()
        )));
    }
    for (i, p) in points.iter().enumerate() {
        let node = grid.point(i);
        if p.len() != node.len() || p.iter().zip(&node).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
            return Err(Error::Validation(format!("row {} does not match grid node {:?}", i + 1, node)));
        }
    }
    Ok(())
}

impl FieldTable {
    pub fn g_field(&self, grid: &Arc<GaussianGrid>) -> Result<ScalarField> {
        matches_grid(grid, &self.points)?;
        ScalarField::new(grid.clone(), self.g.clone())
    }

    pub fn u_field(&self, grid: &Arc<GaussianGrid>) -> Result<ScalarField> {
        matches_grid(grid, &self.points)?;
        ScalarField::new(grid.clone(), self.u.clone())
    }

    pub fn phi_field(&self, grid: &Arc<GaussianGrid>) -> Result<VectorField> {
        matches_grid(grid, &self.points)?;
        VectorField::new(grid.clone(), self.phi.concat())
    }
}

/// Reads tabulated data: a header with `x1..xm` and `g`, any other
/// columns ignored, one row per grid node in grid order.
pub fn read_tabulated(text: &str, grid: &Arc<GaussianGrid>) -> Result<ScalarField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Validation("empty data file".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    let m = grid.dimension();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Validation(format!("data file has no `{name}` column")))
    };
    let xs = (1..=m).map(|d| find(&format!("x{d}"))).collect::<Result<Vec<_>>>()?;
    let gcol = find("g")?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = parse_row(line, cols.len(), n + 2)?;
        points.push(xs.iter().map(|&c| row[c]).collect());
        values.push(row[gcol]);
    }
    matches_grid(grid, &points)?;
    ScalarField::new(grid.clone(), values)
}

/// A set as alternating runs over the flat node order, starting with
/// `first`, together with the grid it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub grid: GridSpec,
    pub first: bool,
    pub runs: Vec<usize>,
}

impl SetRecord {
    pub fn encode(set: &IndicatorSet) -> Self {
        let mask = set.members();
        let mut runs = Vec::new();
        let mut current = mask.first().copied().unwrap_or(false);
        let mut len = 0;
        for &b in mask {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        Self {
            grid: set.grid().spec().clone(),
            first: mask.first().copied().unwrap_or(false),
            runs,
        }
    }

    pub fn decode(&self) -> Result<IndicatorSet> {
        let grid = GaussianGrid::build(&self.grid)?;
        let mut mask = Vec::with_capacity(grid.len());
        let mut value = self.first;
        for &len in &self.runs {
            mask.extend(std::iter::repeat_n(value, len));
            value = !value;
        }
        IndicatorSet::new(grid, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_round_trip() {
        let grid = GaussianGrid::build(&GridSpec::uniform(2, 17, 4.0)).unwrap();
        let set = IndicatorSet::from_fn(&grid, |x| x[0] * x[0] + x[1] < 1.0).unwrap();
        let rec = SetRecord::encode(&set);
        assert_eq!(rec.runs.iter().sum::<usize>(), grid.len());
        assert_eq!(rec.decode().unwrap().members(), set.members());
        let empty = IndicatorSet::empty(&grid).unwrap();
        assert_eq!(SetRecord::encode(&empty).runs, vec![grid.len()]);
    }

    #[test]
    fn tabulated_columns_in_any_order() {
        let grid = GaussianGrid::build(&GridSpec::uniform(1, 3, 1.0)).unwrap();
        let text = "g,x1\n1,-1\n0.5,0\n2,1\n";
        let g = read_tabulated(text, &grid).unwrap();
        assert_eq!(g.values(), &[1.0, 0.5, 2.0]);
        assert!(read_tabulated("g,x1\n1,-1\n", &grid).is_err());
        assert!(read_tabulated("g,x1\n1,-1\n0.5,0.1\n2,1\n", &grid).is_err());
    }

    #[test]
    fn bad_header() {
        assert!(read_fields_csv("x1,g,u\n").is_err());
        assert!(read_fields_csv("").is_err());
    }
}
