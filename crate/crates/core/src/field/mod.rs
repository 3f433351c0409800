//! Grid functions, finite-difference gradients, weighted integrals, pairings and seminorms.

mod integrals;
mod pairing;
mod seminorms;

pub use integrals::{cell_weights, l1_norm, weighted_integral, weighted_lq_norm, weighted_sum};
pub use pairing::{
    f_laplacian_pairing, f_laplacian_pairing_with_gradient, feeble_regularity_k, positivity_probe, ProbeResult,
};
pub use seminorms::{bmo_seminorm, holder_seminorm, morrey_from_masses, morrey_norm, MorreyEstimate, MorreyOptions};

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::exec;

/// One real value per grid cell.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    /// Cells excluded from pointwise statistics (kinks of `d_F`).
    pub ridge: Option<Vec<bool>>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!("{} values for {} cells", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(ScalarField { grid, values, ridge: None })
    }

    pub fn zeros(grid: Arc<Grid>) -> ScalarField {
        let values = vec![0.0; grid.len()];
        ScalarField { grid, values, ridge: None }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Result<ScalarField> {
        let values = exec::map_range(grid.len(), |k| f(&grid.center(k)));
        ScalarField::new(grid, values)
    }

    pub fn with_ridge(mut self, ridge: Vec<bool>) -> ScalarField {
        self.ridge = Some(ridge);
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect(), ridge: None }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        ScalarField { grid: self.grid.clone(), values, ridge: None }
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        ScalarField { grid: self.grid.clone(), values, ridge: None }
    }

    /// Indices of nonzero cells.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&k| self.values[k] != 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Little-endian `f64` values plus a JSON header next to them (`<stem>.bin`, `<stem>.json`).
    pub fn write_binary(&self, stem: &Path, header: serde_json::Value) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(stem.with_extension("bin"), bytes)?;
        let g = &self.grid;
        let mut head = json!({
            "grid": { "h": g.h, "padding": g.spec().padding, "origin": g.origin, "dims": g.dims, "order": "C" },
            "domain": g.domain().spec(),
            "dtype": "f64-le",
        });
        if let (Some(obj), serde_json::Value::Object(extra)) = (head.as_object_mut(), header) {
            obj.extend(extra);
        }
        std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&head)?)?;
        Ok(())
    }

    /// `x, y[, z], value` rows for every cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let names = ["x", "y", "z"];
        writeln!(w, "{},value", names[..self.grid.n].join(","))?;
        for (k, v) in self.values.iter().enumerate() {
            let c = self.grid.center(k);
            let coords: Vec<String> = c.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{}", coords.join(","), v)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` components per grid cell, stored contiguously.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    pub data: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, data: Vec<f64>) -> VectorField {
        assert_eq!(data.len(), grid.n * grid.len());
        VectorField { grid, data }
    }

    pub fn at(&self, k: usize) -> &[f64] {
        let n = self.grid.n;
        &self.data[k * n..(k + 1) * n]
    }
}

/// Finite-difference gradient on inside cells: central where both
/// neighbors are inside, otherwise one-sided (second order when two
/// inside neighbors line up, first order with one); zero outside.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = &f.grid;
    let n = grid.n;
    let h = grid.h;
    let v = &f.values;
    let per_cell: Vec<Vec<f64>> = exec::map_range(grid.len(), |k| {
        let mut out = vec![0.0; n];
        if !grid.inside[k] {
            return out;
        }
        let ins = |o: Option<usize>| o.filter(|&j| grid.inside[j]);
        for (a, slot) in out.iter_mut().enumerate() {
            let l = ins(grid.neighbor(k, a, -1));
            let r = ins(grid.neighbor(k, a, 1));
            *slot = match (l, r) {
                (Some(l), Some(r)) => (v[r] - v[l]) / (2.0 * h),
                (None, Some(r)) => match ins(grid.neighbor(k, a, 2)) {
                    Some(r2) => (-3.0 * v[k] + 4.0 * v[r] - v[r2]) / (2.0 * h),
                    None => (v[r] - v[k]) / h,
                },
                (Some(l), None) => match ins(grid.neighbor(k, a, -2)) {
                    Some(l2) => (3.0 * v[k] - 4.0 * v[l] + v[l2]) / (2.0 * h),
                    None => (v[k] - v[l]) / h,
                },
                (None, None) => 0.0,
            };
        }
        out
    });
    VectorField::new(grid.clone(), per_cell.into_iter().flatten().collect())
}
