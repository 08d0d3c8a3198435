use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::measures::Problem;

/// Mixed-radix indexing of the product of supports; the last marginal varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleIndexer {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl TupleIndexer {
    /// Fails if the product overflows.
    pub fn new(sizes: &[usize]) -> Result<Self> {
        let mut strides = vec![1; sizes.len()];
        let mut total: usize = 1;
        for i in (0..sizes.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(sizes[i])
                .ok_or(Error::CapExceeded { vars: usize::MAX, cap: 0 })?;
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            strides,
            total,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let k = flat / s;
                flat %= s;
                k
            })
            .collect()
    }
}

/// `b` and `z̄` on every tuple of the product support.
#[derive(Debug, Clone)]
pub struct SurplusTable {
    indexer: TupleIndexer,
    values: Vec<f64>,
    zbars: Vec<Vector>,
}

impl SurplusTable {
    /// Evaluates the oracle on every tuple (in parallel; results do not
    /// depend on scheduling). Fails if the product exceeds the variable cap.
    pub fn compute(problem: &Problem) -> Result<Self> {
        let indexer = TupleIndexer::new(&problem.sizes()).map_err(|_| Error::CapExceeded {
            vars: usize::MAX,
            cap: problem.settings().variable_cap,
        })?;
        let cap = problem.settings().variable_cap;
        if indexer.total() > cap {
            return Err(Error::CapExceeded {
                vars: indexer.total(),
                cap,
            });
        }
        let results: Vec<Result<(f64, Vector)>> = (0..indexer.total())
            .into_par_iter()
            .map(|flat| {
                let idx = indexer.unflat(flat);
                problem
                    .oracle()
                    .solve_zbar(&problem.tuple_points(&idx))
                    .map(|s| (s.value, s.z))
                    .map_err(|e| Error::SurplusFailure {
                        tuple: idx,
                        msg: e.to_string(),
                    })
            })
            .collect();
        let mut values = Vec::with_capacity(results.len());
        let mut zbars = Vec::with_capacity(results.len());
        for r in results {
            let (v, z) = r?;
            values.push(v);
            zbars.push(z);
        }
        Ok(Self {
            indexer,
            values,
            zbars,
        })
    }

    pub fn indexer(&self) -> &TupleIndexer {
        &self.indexer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.values[self.indexer.flat(idx)]
    }

    pub fn zbar(&self, idx: &[usize]) -> &Vector {
        &self.zbars[self.indexer.flat(idx)]
    }
}
