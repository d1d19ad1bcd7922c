use num_traits::Zero;
use serde::Serialize;

use super::family::QuadraticFamily;
use super::linalg::{primitive, q, scale, Matrix, Q};

/// Origin of one row of the stacked matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StackedRow {
    /// Row `u` (a stacked coordinate) of block `H^v_{jl}`.
    Quadratic {
        agent: usize,
        coord: usize,
        block: usize,
        u: usize,
    },
    /// `A^{-i}_{jl}` for a row whose constant the adversary knows.
    Affine { agent: usize, coord: usize },
}

/// `[(H^{-i})^T, (A^{-i})^T]^T` with bookkeeping. Columns are the
/// coordinates of every agent except the adversary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackedMatrix {
    pub adversary: usize,
    pub matrix: Matrix,
    pub rows: Vec<StackedRow>,
    /// `(agent, coordinate)` of each column.
    pub columns: Vec<(usize, usize)>,
    dims: Vec<usize>,
}

impl StackedMatrix {
    /// Block `H^v_{jl}` read back from the stack: `n x n_v`. `None` when
    /// `v` is the adversary or the row contributes no quadratic block.
    pub fn block(&self, j: usize, l: usize, v: usize) -> Option<Matrix> {
        let cols: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, &(a, _))| a == v)
            .map(|(c, _)| c)
            .collect();
        let rows: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, StackedRow::Quadratic { agent, coord, block, .. } if (*agent, *coord, *block) == (j, l, v)))
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() || cols.is_empty() {
            return None;
        }
        Some(self.matrix.select(&rows, &cols))
    }

    /// Only the `A^{-i}` rows.
    pub fn affine_part(&self) -> Matrix {
        let rows: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, StackedRow::Affine { .. }))
            .map(|(i, _)| i)
            .collect();
        let cols: Vec<usize> = (0..self.matrix.cols()).collect();
        self.matrix.select(&rows, &cols)
    }

    /// Spreads a column vector into per-agent blocks with a zero block for
    /// the adversary.
    pub fn to_delta(&self, v: &[Q]) -> Vec<Vec<Q>> {
        let mut delta: Vec<Vec<Q>> = self.dims.iter().map(|&d| vec![Q::zero(); d]).collect();
        for (value, &(a, l)) in v.iter().zip(&self.columns) {
            delta[a][l] = value.clone();
        }
        delta
    }

    /// Inverse of [`StackedMatrix::to_delta`].
    pub fn from_delta(&self, delta: &[Vec<Q>]) -> Vec<Q> {
        self.columns.iter().map(|&(a, l)| delta[a][l].clone()).collect()
    }
}

/// Stacks the quadratic and known-constant affine weights that act on
/// `x_{-i}`. Rows whose `H_{jl}` is zero contribute no quadratic block.
pub fn stack_for_adversary(family: &QuadraticFamily, i: usize) -> StackedMatrix {
    let n = family.n();
    let others: Vec<usize> = (0..family.num_agents()).filter(|&v| v != i).collect();
    let columns: Vec<(usize, usize)> = others
        .iter()
        .flat_map(|&v| (0..family.dims()[v]).map(move |l| (v, l)))
        .collect();
    let global: Vec<usize> = columns.iter().map(|&(v, l)| family.agent_range(v).start + l).collect();
    let mut matrix = Matrix::zeros(0, columns.len());
    let mut rows = Vec::new();

    for (j, l) in family.indices() {
        let h = &family.row(j, l).h;
        if h.is_zero() {
            continue;
        }
        for &v in &others {
            for u in 0..n {
                let mut row = vec![Q::zero(); columns.len()];
                for (c, (&(a, _), &g)) in columns.iter().zip(&global).enumerate() {
                    if a == v {
                        // [H^{uv} + (H^{vu})^T] at (u, g)
                        row[c] = h.get(u, g) + h.get(g, u);
                    }
                }
                matrix.push_row(row);
                rows.push(StackedRow::Quadratic {
                    agent: j,
                    coord: l,
                    block: v,
                    u,
                });
            }
        }
    }
    for (j, l) in family.omega(i) {
        let a = &family.row(j, l).a;
        matrix.push_row(global.iter().map(|&g| a[g].clone()).collect());
        rows.push(StackedRow::Affine { agent: j, coord: l });
    }
    StackedMatrix {
        adversary: i,
        matrix,
        rows,
        columns,
        dims: family.dims().to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NullVector {
    /// Primitive integer null vector with every entry nonzero.
    Found(Vec<Q>),
    /// Columns that vanish on the whole null space.
    NotFound { forced_zero: Vec<usize> },
}

/// Searches the null space of `m` for a vector without zero entries.
///
/// A coordinate that is zero on every basis vector is zero on the whole
/// null space, so the search fails exactly when such a coordinate exists.
/// Otherwise each coordinate of `sum_k t^k b_k` is a nonzero polynomial in
/// `t` of degree below `d`, so among `t = 1..=c(d-1)+1` some choice avoids
/// every root.
pub fn find_allnonzero_nullvector(m: &Matrix) -> NullVector {
    let basis = m.null_space();
    let cols = m.cols();
    let forced_zero: Vec<usize> = (0..cols).filter(|&c| basis.iter().all(|b| b[c].is_zero())).collect();
    if !forced_zero.is_empty() {
        return NullVector::NotFound { forced_zero };
    }
    let d = basis.len();
    for t in 1..=(cols * d.saturating_sub(1) + 1) as i64 {
        let mut v = vec![Q::zero(); cols];
        let mut power = q(1);
        for b in &basis {
            for (acc, x) in v.iter_mut().zip(scale(b, &power)) {
                *acc += x;
            }
            power *= q(t);
        }
        if v.iter().all(|x| !x.is_zero()) {
            return NullVector::Found(primitive(&v));
        }
    }
    unreachable!("a polynomial of degree below d has fewer than d roots")
}
