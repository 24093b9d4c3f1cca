//! Sweep grid mini-language.
//!
//! A grid is `key=v1,v2,...` groups joined by `;`, with keys `n`, `d`, and
//! `eps`: `"n=1e3,1e4,1e5;d=5;eps=2,inf"`. A key present in the grid
//! replaces the base config's value cell-by-cell; an absent key keeps the
//! base value. Cells enumerate in n-major, then d, then eps order.

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSpec {
    pub n: Option<Vec<u64>>,
    pub dim: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
}

fn parse_count(text: &str) -> Result<u64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::InvalidGrid(format!("'{text}' is not a number")))?;
    if v.fract() != 0.0 || !(1.0..=9.007_199_254_740_992e15).contains(&v) {
        return Err(Error::InvalidGrid(format!(
            "'{text}' is not a positive integer"
        )));
    }
    Ok(v as u64)
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = GridSpec::default();
        if text.trim().is_empty() {
            return Err(Error::InvalidGrid("empty grid spec".into()));
        }
        for group in text.split(';') {
            let group = group.trim();
            if group.is_empty() {
                return Err(Error::InvalidGrid("empty key=values group".into()));
            }
            let (key, values) = group.split_once('=').ok_or_else(|| {
                Error::InvalidGrid(format!("'{group}' is not of the form key=v1,v2,..."))
            })?;
            let key = key.trim();
            let raw: Vec<&str> = values.split(',').map(str::trim).collect();
            if raw.iter().any(|v| v.is_empty()) {
                return Err(Error::InvalidGrid(format!("empty value in '{group}'")));
            }
            match key {
                "n" => {
                    if grid.n.is_some() {
                        return Err(Error::InvalidGrid("duplicate key 'n'".into()));
                    }
                    grid.n = Some(raw.iter().map(|v| parse_count(v)).collect::<Result<_>>()?);
                }
                "d" => {
                    if grid.dim.is_some() {
                        return Err(Error::InvalidGrid("duplicate key 'd'".into()));
                    }
                    let dims = raw
                        .iter()
                        .map(|v| parse_count(v).map(|c| c as usize))
                        .collect::<Result<_>>()?;
                    grid.dim = Some(dims);
                }
                "eps" => {
                    if grid.eps.is_some() {
                        return Err(Error::InvalidGrid("duplicate key 'eps'".into()));
                    }
                    let eps = raw
                        .iter()
                        .map(|v| {
                            let e = crate::eps::parse_eps(v)
                                .map_err(|_| Error::InvalidGrid(format!("bad eps '{v}'")))?;
                            if e > 0.0 {
                                Ok(e)
                            } else {
                                Err(Error::InvalidGrid(format!("eps must be positive, got {e}")))
                            }
                        })
                        .collect::<Result<_>>()?;
                    grid.eps = Some(eps);
                }
                other => {
                    return Err(Error::InvalidGrid(format!(
                        "unknown key '{other}' (expected n, d, or eps)"
                    )));
                }
            }
        }
        Ok(grid)
    }

    pub fn cell_count(&self) -> usize {
        fn len<T>(v: &Option<Vec<T>>) -> usize {
            v.as_ref().map_or(1, Vec::len)
        }
        len(&self.n) * len(&self.dim) * len(&self.eps)
    }

    /// Materialize one config per cell, in n-major order.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let ns = self
            .n
            .clone()
            .unwrap_or_else(|| vec![base.data.n]);
        let dims = self
            .dim
            .clone()
            .unwrap_or_else(|| vec![base.problem.dim]);
        let eps = self
            .eps
            .clone()
            .unwrap_or_else(|| vec![base.privacy.eps]);
        let mut cells = Vec::with_capacity(ns.len() * dims.len() * eps.len());
        for &n in &ns {
            for &d in &dims {
                for &e in &eps {
                    let mut config = base.clone();
                    config.data.n = n;
                    config.problem.dim = d;
                    config.privacy.eps = e;
                    cells.push(config);
                }
            }
        }
        cells
    }
}
