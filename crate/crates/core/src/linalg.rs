//! Exact sparse linear algebra over the rationals.
//!
//! Matrices are stored as row-major triplets with no explicit zeros, so two
//! matrices are equal exactly when they have the same shape and entries.
//! Elimination switches to a dense kernel when the matrix is more than half
//! full.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("composite of differentials is nonzero ({nonzero} nonzero entries)")]
    CompositionNonzero { nonzero: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Canonical text form: `p` for integers, `p/q` otherwise.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rational::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, Rational)>,
}

impl fmt::Debug for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparseMatrix({}x{}) [", self.rows, self.cols)?;
        for (i, (r, c, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({r},{c})={}", format_rational(v))?;
        }
        write!(f, "]")
    }
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, Rational::one())).collect(),
        }
    }

    /// Builds a matrix from triplets; repeated positions are summed and zeros dropped.
    ///
    /// Panics if an index is out of bounds.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Rational)>,
    {
        let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "entry ({r},{c}) outside {rows}x{cols}");
            if v.is_zero() {
                continue;
            }
            *acc.entry((r, c)).or_insert_with(Rational::zero) += v;
        }
        let entries = acc
            .into_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|((r, c), v)| (r, c, v))
            .collect();
        SparseMatrix { rows, cols, entries }
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[Vec<Rational>]) -> Self {
        assert_eq!(data.len(), rows);
        let trip = data.iter().enumerate().flat_map(|(r, row)| {
            assert_eq!(row.len(), cols);
            row.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(move |(c, v)| (r, c, v.clone()))
        });
        SparseMatrix::from_triplets(rows, cols, trip)
    }

    pub fn from_i64(data: &[&[i64]]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let dense: Vec<Vec<Rational>> =
            data.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect();
        SparseMatrix::from_dense(rows, cols, &dense)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<Rational>]) -> Self {
        let trip = columns.iter().enumerate().flat_map(|(c, col)| {
            assert_eq!(col.len(), rows);
            col.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(move |(r, v)| (r, c, v.clone()))
        });
        SparseMatrix::from_triplets(rows, columns.len(), trip)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Rational)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Rational {
        self.entries
            .binary_search_by(|(er, ec, _)| (*er, *ec).cmp(&(r, c)))
            .map(|i| self.entries[i].2.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            0.0
        } else {
            self.entries.len() as f64 / (self.rows * self.cols) as f64
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<Rational>> {
        let mut out = vec![vec![Rational::zero(); self.cols]; self.rows];
        for (r, c, v) in &self.entries {
            out[*r][*c] = v.clone();
        }
        out
    }

    pub fn transpose(&self) -> Self {
        SparseMatrix::from_triplets(
            self.cols,
            self.rows,
            self.entries.iter().map(|(r, c, v)| (*c, *r, v.clone())),
        )
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return SparseMatrix::zeros(self.rows, self.cols);
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|(r, c, v)| (*r, *c, v * s)).collect(),
        }
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add");
        SparseMatrix::from_triplets(
            self.rows,
            self.cols,
            self.entries.iter().chain(other.entries.iter()).cloned(),
        )
    }

    pub fn sub(&self, other: &SparseMatrix) -> Self {
        self.add(&other.scale(&rat(-1)))
    }

    /// `self * other`.
    pub fn mul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut other_rows: Vec<Vec<(usize, &Rational)>> = vec![Vec::new(); other.rows];
        for (r, c, v) in &other.entries {
            other_rows[*r].push((*c, v));
        }
        let mut trip = Vec::new();
        for (r, k, v) in &self.entries {
            for (c, w) in &other_rows[*k] {
                trip.push((*r, *c, v * *w));
            }
        }
        SparseMatrix::from_triplets(self.rows, other.cols, trip)
    }

    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![Rational::zero(); self.rows];
        for (r, c, x) in &self.entries {
            if !v[*c].is_zero() {
                out[*r] += x * &v[*c];
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.rows];
        for (r, cc, v) in &self.entries {
            if *cc == c {
                out[*r] = v.clone();
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.rows, other.rows);
        let off = self.cols;
        SparseMatrix::from_triplets(
            self.rows,
            self.cols + other.cols,
            self.entries
                .iter()
                .cloned()
                .chain(other.entries.iter().map(|(r, c, v)| (*r, c + off, v.clone()))),
        )
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.cols, other.cols);
        let off = self.rows;
        SparseMatrix::from_triplets(
            self.rows + other.rows,
            self.cols,
            self.entries
                .iter()
                .cloned()
                .chain(other.entries.iter().map(|(r, c, v)| (r + off, *c, v.clone()))),
        )
    }

    /// Places `block` with its top-left corner at `(r0, c0)` inside a `rows x cols` zero matrix.
    pub fn embed(&self, rows: usize, cols: usize, r0: usize, c0: usize) -> Self {
        assert!(r0 + self.rows <= rows && c0 + self.cols <= cols);
        SparseMatrix {
            rows,
            cols,
            entries: self.entries.iter().map(|(r, c, v)| (r + r0, c + c0, v.clone())).collect(),
        }
    }

    fn sparse_rows(&self) -> Vec<BTreeMap<usize, Rational>> {
        let mut out = vec![BTreeMap::new(); self.rows];
        for (r, c, v) in &self.entries {
            out[*r].insert(*c, v.clone());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rref {
    pub matrix: SparseMatrix,
    pub rank: usize,
    pub pivots: Vec<usize>,
}

/// Reduced row-echelon form.
///
/// Columns are scanned left to right; the pivot for a column is the remaining
/// row with the smallest index that has a nonzero entry there.
pub fn rref(m: &SparseMatrix) -> Rref {
    if m.density() > 0.5 {
        rref_dense(m)
    } else {
        rref_sparse(m)
    }
}

fn rref_dense(m: &SparseMatrix) -> Rref {
    let mut a = m.to_dense();
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let inv = a[rank][c].recip();
        for v in a[rank][c..].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = a[rank].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == rank || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    Rref { matrix: SparseMatrix::from_dense(rows, cols, &a), rank, pivots }
}

fn rref_sparse(m: &SparseMatrix) -> Rref {
    let mut rows = m.sparse_rows();
    let nrows = m.rows;
    let mut pivots = Vec::new();
    let mut rank = 0;
    // rows[rank..] are unreduced; track each row's leading column
    for c in 0..m.cols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&r| rows[r].keys().next() == Some(&c)) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = rows[rank][&c].recip();
        for v in rows[rank].values_mut() {
            *v *= &inv;
        }
        let pivot_row: Vec<(usize, Rational)> =
            rows[rank].iter().map(|(k, v)| (*k, v.clone())).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == rank {
                continue;
            }
            let Some(f) = row.get(&c).cloned() else { continue };
            for (k, v) in &pivot_row {
                let e = row.entry(*k).or_insert_with(Rational::zero);
                *e -= &f * v;
                if e.is_zero() {
                    row.remove(k);
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    let trip = rows
        .into_iter()
        .enumerate()
        .flat_map(|(r, row)| row.into_iter().map(move |(c, v)| (r, c, v)));
    Rref { matrix: SparseMatrix::from_triplets(nrows, m.cols, trip), rank, pivots }
}

pub fn rank(m: &SparseMatrix) -> usize {
    rref(m).rank
}

/// Basis of the null space, one vector per free column.
pub fn kernel_basis(m: &SparseMatrix) -> Vec<Vec<Rational>> {
    let red = rref(m);
    let rows = red.matrix.sparse_rows();
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; m.cols];
        for &p in &red.pivots {
            v[p] = true;
        }
        v
    };
    (0..m.cols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![Rational::zero(); m.cols];
            v[f] = Rational::one();
            for (i, &p) in red.pivots.iter().enumerate() {
                if let Some(x) = rows[i].get(&f) {
                    v[p] = -x.clone();
                }
            }
            v
        })
        .collect()
}

pub fn cokernel_dim(m: &SparseMatrix) -> usize {
    m.rows - rank(m)
}

/// Some `x` with `m x = b`, or `None` when `b` is outside the column space.
pub fn solve(m: &SparseMatrix, b: &[Rational]) -> Option<Vec<Rational>> {
    assert_eq!(b.len(), m.rows);
    let aug = m.hstack(&SparseMatrix::from_columns(m.rows, &[b.to_vec()]));
    let red = rref(&aug);
    if red.pivots.last() == Some(&m.cols) {
        return None;
    }
    let mut x = vec![Rational::zero(); m.cols];
    for (i, &p) in red.pivots.iter().enumerate() {
        x[p] = red.matrix.get(i, m.cols);
    }
    Some(x)
}

/// `dim ker(d_out) - rank(d_in)` after checking `d_out * d_in = 0`.
pub fn homology_dim(d_in: &SparseMatrix, d_out: &SparseMatrix) -> Result<usize, LinalgError> {
    check_composable(d_in, d_out)?;
    let ker = d_out.cols - rank(d_out);
    Ok(ker - rank(d_in))
}

fn check_composable(d_in: &SparseMatrix, d_out: &SparseMatrix) -> Result<(), LinalgError> {
    if d_in.rows != d_out.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "incoming map has {} rows but outgoing map has {} columns",
            d_in.rows, d_out.cols
        )));
    }
    let comp = d_out.mul(d_in);
    if !comp.is_zero() {
        return Err(LinalgError::CompositionNonzero { nonzero: comp.nnz() });
    }
    Ok(())
}

/// Projection `V -> V/N` for a subspace `N` given by spanning vectors.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    dim: usize,
    reduced: Vec<BTreeMap<usize, Rational>>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl QuotientMap {
    pub fn new(dim: usize, spanning: &[Vec<Rational>]) -> Self {
        let m = SparseMatrix::from_columns(dim, spanning).transpose();
        let red = rref(&m);
        let mut rows = red.matrix.sparse_rows();
        rows.truncate(red.rank);
        let mut is_pivot = vec![false; dim];
        for &p in &red.pivots {
            is_pivot[p] = true;
        }
        let free = (0..dim).filter(|&i| !is_pivot[i]).collect();
        QuotientMap { dim, reduced: rows, pivots: red.pivots, free }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn sub_dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn quotient_dim(&self) -> usize {
        self.free.len()
    }

    /// Ambient coordinates that survive as the quotient basis.
    pub fn free_coordinates(&self) -> &[usize] {
        &self.free
    }

    /// Representative of `v + N` with all pivot coordinates cleared.
    pub fn reduce(&self, v: &[Rational]) -> Vec<Rational> {
        let mut v = v.to_vec();
        for (row, &p) in self.reduced.iter().zip(&self.pivots) {
            if v[p].is_zero() {
                continue;
            }
            let f = v[p].clone();
            for (k, x) in row {
                v[*k] -= &f * x;
            }
        }
        v
    }

    /// Coordinates of `v + N` in the quotient basis.
    pub fn project(&self, v: &[Rational]) -> Vec<Rational> {
        let r = self.reduce(v);
        self.free.iter().map(|&i| r[i].clone()).collect()
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.reduce(v).iter().all(|x| x.is_zero())
    }
}

/// Homology representatives: cycles of `d_out`, chosen independent modulo the image of `d_in`.
pub fn homology_basis(
    d_in: &SparseMatrix,
    d_out: &SparseMatrix,
) -> Result<Vec<Vec<Rational>>, LinalgError> {
    check_composable(d_in, d_out)?;
    let n = d_out.cols;
    let image: Vec<Vec<Rational>> = (0..d_in.cols).map(|c| d_in.column(c)).collect();
    let q = QuotientMap::new(n, &image);
    let cycles = kernel_basis(d_out);
    let reduced: Vec<Vec<Rational>> = cycles.iter().map(|z| q.reduce(z)).collect();
    let projected: Vec<Vec<Rational>> = reduced.iter().map(|z| q.project(z)).collect();
    let m = SparseMatrix::from_columns(q.quotient_dim(), &projected);
    let red = rref(&m);
    Ok(red.pivots.iter().map(|&i| reduced[i].clone()).collect())
}

pub fn vector_is_zero(v: &[Rational]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// Largest absolute numerator or denominator, useful for diagnostics.
pub fn height(m: &SparseMatrix) -> BigInt {
    m.entries
        .iter()
        .map(|(_, _, v)| v.numer().abs().max(v.denom().clone()))
        .max()
        .unwrap_or_else(BigInt::zero)
}
