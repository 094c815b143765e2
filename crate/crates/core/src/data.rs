//! CSV ingestion and the bundled diabetes data.

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// The diabetes data of Efron et al. (2004): ten baseline predictors and a
/// disease progression response for 442 patients, unstandardized.
pub const DIABETES_CSV: &str = include_str!("../data/diabetes.csv");

/// Predictors and response read from a CSV with a response column `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    /// Raw predictors, one column per name, no intercept.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    /// `(1, x)`.
    pub fn with_intercept(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::from_element(n, self.k() + 1, 1.0);
        out.columns_mut(1, self.k()).copy_from(&self.x);
        out
    }
}

pub fn diabetes() -> Dataset {
    read_dataset(DIABETES_CSV.as_bytes()).expect("bundled diabetes data parses")
}

fn parse_field(s: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("row {row}, column `{col}`: cannot parse `{s}` as a number")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("row {row}, column `{col}`: non-finite value")));
    }
    Ok(v)
}

/// Reads a regression dataset. Every column other than `y` is a predictor.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::Data("no response column named `y`".into()))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != y_col).map(|(_, h)| h.clone()).collect();
    if names.is_empty() {
        return Err(Error::Data("dataset has no predictor columns".into()));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Data(format!("row {}: expected {} fields, found {}", r + 1, headers.len(), rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v = parse_field(field, r + 1, &headers[j])?;
            if j == y_col {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(Error::Data("dataset has no rows".into()));
    }
    let n = ys.len();
    let k = names.len();
    Ok(Dataset { names, x: DMatrix::from_row_slice(n, k, &xs), y: DVector::from_vec(ys) })
}

/// Group means for the normal-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub ids: Vec<String>,
    pub xbar: Vec<f64>,
    /// Common group size when raw observations were supplied.
    pub n: Option<usize>,
}

/// Reads either `group_id,xbar` (one row per group) or `group_id,y` (raw
/// observations, equal group sizes). Groups keep their first-seen order.
pub fn read_group_means<R: Read>(reader: R) -> Result<GroupMeans> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let id_col = headers
        .iter()
        .position(|h| h == "group_id")
        .ok_or_else(|| Error::Data("no `group_id` column".into()))?;
    let (val_col, raw) = match (headers.iter().position(|h| h == "xbar"), headers.iter().position(|h| h == "y")) {
        (Some(j), _) => (j, false),
        (None, Some(j)) => (j, true),
        (None, None) => return Err(Error::Data("need an `xbar` or a `y` column".into())),
    };

    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("row {}: empty group_id", r + 1)));
        }
        let v = parse_field(rec.get(val_col).unwrap_or(""), r + 1, &headers[val_col])?;
        let entry = acc.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (0.0, 0)
        });
        if !raw && entry.1 > 0 {
            return Err(Error::Data(format!("group `{id}` listed more than once")));
        }
        entry.0 += v;
        entry.1 += 1;
    }
    if order.is_empty() {
        return Err(Error::Data("no groups found".into()));
    }

    let mut n = None;
    if raw {
        let size = acc[&order[0]].1;
        if let Some(g) = order.iter().find(|g| acc[*g].1 != size) {
            return Err(Error::Data(format!(
                "group `{g}` has {} observations but `{}` has {size}; equal group sizes are required",
                acc[g].1, order[0]
            )));
        }
        n = Some(size);
    }
    let xbar = order.iter().map(|g| acc[g].0 / acc[g].1 as f64).collect();
    Ok(GroupMeans { ids: order, xbar, n })
}
