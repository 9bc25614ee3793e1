use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hom::KahanSum;

/// Dense symmetric `n × n` matrix with zero diagonal, stored row-major.
///
/// Members of `X_n` additionally have entries in `[0, 1]`; signed matrices
/// are allowed so the same type can carry perturbations and gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Constant `value` off the diagonal.
    pub fn constant(n: usize, value: f64) -> Self {
        Self::from_fn(n, |_, _| value)
    }

    /// Builds from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn adjacency(g: &Graph) -> Self {
        let mut m = Self::zeros(g.vertex_count());
        for &(u, v) in g.edges() {
            m.set(u, v, 1.0);
        }
        m
    }

    /// Checks symmetry and zero diagonal of row-major input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("matrix rows must all have length n"));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::domain(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::domain(format!("asymmetric entry ({i},{j})")));
                }
            }
        }
        Ok(SymMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`. Diagonal writes are ignored.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i != j {
            self.data[i * self.n + j] = value;
            self.data[j * self.n + i] = value;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| compensated(self.row(i).iter().copied())).collect()
    }

    /// `Σ_{i<j} x_ij`.
    pub fn upper_sum(&self) -> f64 {
        compensated(self.upper_entries())
    }

    /// Whether every off-diagonal entry lies in `[lo, hi]`.
    pub fn entries_within(&self, lo: f64, hi: f64) -> bool {
        self.upper_entries().all(|x| (lo..=hi).contains(&x))
    }

    pub fn upper_entries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| self.row(i)[i + 1..].iter().copied())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(self.n, |i, j| f(self.get(i, j)))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// Row-major CSV, one row per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.n * self.n * 8);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|x| format!("{x}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn compensated(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    values.for_each(|v| acc.add(v));
    acc.value()
}
