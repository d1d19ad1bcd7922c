//! Dense matrices over the rationals with exact Gaussian elimination.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    /// Builds a matrix from rows of equal length. `cols` fixes the width when
    /// there are no rows.
    pub fn from_rows(cols: usize, rows: Vec<Vec<Q>>) -> Option<Self> {
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        let n = rows.len();
        Some(Matrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Matrix::from_rows(cols, rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect())
            .expect("rows of equal length")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Q {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Q) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Q] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn push_row(&mut self, row: Vec<Q>) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend(row);
        self.rows += 1;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[Q]) -> Q {
        dot(x, &self.mul_vec(x))
    }

    /// Sub-matrix of the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.get(r, c).clone());
            }
        }
        out
    }

    /// Reduced row echelon form and the pivot column of each nonzero row.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m.get(r, c).recip();
            for j in c..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in c..m.cols {
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{v : M v = 0}`, one vector per free column.
    pub fn null_space(&self) -> Vec<Vec<Q>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (row, &p) in pivots.iter().enumerate() {
                    v[p] = -r.get(row, f).clone();
                }
                v
            })
            .collect()
    }

    /// Solves `M x = b` exactly.
    pub fn solve(&self, b: &[Q]) -> LinearSolution {
        assert_eq!(b.len(), self.rows, "right-hand side length");
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for (r, rhs) in b.iter().enumerate() {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, rhs.clone());
        }
        let (red, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return LinearSolution::Inconsistent;
        }
        let mut x = vec![Q::zero(); self.cols];
        for (row, &p) in pivots.iter().enumerate() {
            x[p] = red.get(row, self.cols).clone();
        }
        if pivots.len() == self.cols {
            LinearSolution::Unique(x)
        } else {
            LinearSolution::Underdetermined {
                particular: x,
                directions: self.null_space(),
            }
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(ToString::to_string).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearSolution {
    Unique(Vec<Q>),
    Underdetermined {
        particular: Vec<Q>,
        directions: Vec<Vec<Q>>,
    },
    Inconsistent,
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn scale(v: &[Q], r: &Q) -> Vec<Q> {
    v.iter().map(|x| x * r).collect()
}

pub fn norm_squared(v: &[Q]) -> Q {
    dot(v, v)
}

/// Rescales `v` to the integer vector with coprime entries pointing the same
/// way. The zero vector is returned unchanged.
pub fn primitive(v: &[Q]) -> Vec<Q> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v
        .iter()
        .map(|x| (x * Q::from_integer(lcm.clone())).to_integer())
        .collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if gcd.is_zero() {
        return v.to_vec();
    }
    ints.into_iter().map(|x| Q::from_integer(x / &gcd)).collect()
}

/// Approximate Euclidean norm for reporting.
pub fn approx_norm(v: &[Q]) -> f64 {
    approx(&norm_squared(v)).sqrt()
}

pub fn approx(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rref_of_small_matrix() {
        let m = Matrix::from_i64(&[&[2, 4], &[1, 3]]);
        let (r, p) = m.rref();
        assert_eq!(r, Matrix::identity(2));
        assert_eq!(p, vec![0, 1]);
    }

    #[test]
    fn null_space_of_single_row() {
        let m = Matrix::from_i64(&[&[1, -1]]);
        assert_eq!(m.null_space(), vec![vec![q(1), q(1)]]);
    }

    #[test]
    fn solve_detects_all_three_cases() {
        let m = Matrix::from_i64(&[&[1, 1], &[1, 3]]);
        assert_eq!(m.solve(&[q(1), q(3)]), LinearSolution::Unique(vec![q(0), q(1)]));
        let m = Matrix::from_i64(&[&[1, 1], &[2, 2]]);
        assert_eq!(m.solve(&[q(1), q(3)]), LinearSolution::Inconsistent);
        match m.solve(&[q(1), q(2)]) {
            LinearSolution::Underdetermined { particular, directions } => {
                assert_eq!(particular, vec![q(1), q(0)]);
                assert_eq!(directions, vec![vec![q(-1), q(1)]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn primitive_clears_denominators() {
        let v = vec![Q::new(1.into(), 2.into()), Q::new((-3).into(), 4.into()), q(0)];
        assert_eq!(primitive(&v), vec![q(2), q(-3), q(0)]);
        assert_eq!(approx(&Q::new((-3).into(), 4.into())), -0.75);
    }

    fn small_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..5, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3i64..=3, r * c).prop_map(move |vals| {
                Matrix::from_rows(c, vals.chunks(c).map(|ch| ch.iter().map(|&v| q(v)).collect()).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn null_space_vectors_are_annihilated(m in small_matrix()) {
            let basis = m.null_space();
            prop_assert_eq!(basis.len() + m.rank(), m.cols());
            for v in &basis {
                prop_assert!(m.mul_vec(v).iter().all(Zero::is_zero));
            }
        }

        #[test]
        fn unique_solutions_satisfy_the_system(m in small_matrix(), seed in proptest::collection::vec(-5i64..=5, 5)) {
            let x: Vec<Q> = seed[..m.cols()].iter().map(|&v| q(v)).collect();
            let b = m.mul_vec(&x);
            match m.solve(&b) {
                LinearSolution::Unique(sol) => prop_assert_eq!(sol, x),
                LinearSolution::Underdetermined { particular, .. } => prop_assert_eq!(m.mul_vec(&particular), b),
                LinearSolution::Inconsistent => prop_assert!(false, "consistent system reported inconsistent"),
            }
        }
    }
}
