use std::fmt;

use crate::error::{Error, Result};

use super::dense::{axpy, DenseMatrix};

/// Sparse 0/1 matrix in compressed-row form.
///
/// Column indices inside a row are sorted and unique, so two matrices with
/// the same entry set compare equal regardless of how they were built.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SparseBoolMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl fmt::Debug for SparseBoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparseBoolMatrix({}x{}, nnz={}", self.rows, self.cols, self.nnz())?;
        if self.nnz() <= 16 {
            write!(f, ", {:?}", self.iter().collect::<Vec<_>>())?;
        }
        write!(f, ")")
    }
}

impl SparseBoolMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        SparseBoolMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseBoolMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
        }
    }

    /// Builds from coordinate pairs; duplicates collapse.
    pub fn from_pairs<I>(rows: usize, cols: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut coo: Vec<(u32, u32)> = Vec::new();
        for (r, c) in pairs {
            if r >= rows {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: r,
                    size: rows,
                });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: c,
                    size: cols,
                });
            }
            coo.push((r as u32, c as u32));
        }
        coo.sort_unstable();
        coo.dedup();
        Ok(Self::from_sorted_coo(rows, cols, &coo))
    }

    fn from_sorted_coo(rows: usize, cols: usize, coo: &[(u32, u32)]) -> Self {
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _) in coo {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseBoolMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: coo.iter().map(|&(_, c)| c).collect(),
        }
    }

    /// Builds from per-row sorted, deduplicated column lists.
    fn from_rows(rows: usize, cols: usize, per_row: Vec<Vec<u32>>) -> Self {
        debug_assert_eq!(per_row.len(), rows);
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(per_row.iter().map(Vec::len).sum());
        for r in per_row {
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        SparseBoolMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col_idx.is_empty()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r < self.rows && self.row(r).binary_search(&(c as u32)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c as usize)))
    }

    pub fn transpose(&self) -> SparseBoolMatrix {
        let mut coo: Vec<(u32, u32)> = self.iter().map(|(r, c)| (c as u32, r as u32)).collect();
        coo.sort_unstable();
        Self::from_sorted_coo(self.cols, self.rows, &coo)
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<SparseBoolMatrix> {
        self.check_same_shape(other, "union")?;
        let per_row = (0..self.rows)
            .map(|r| merge_sorted(self.row(r), other.row(r)))
            .collect();
        Ok(Self::from_rows(self.rows, self.cols, per_row))
    }

    /// Entries of `self` that are not in `other`.
    pub fn difference(&self, other: &Self) -> Result<SparseBoolMatrix> {
        self.check_same_shape(other, "difference")?;
        let per_row = (0..self.rows)
            .map(|r| {
                let b = other.row(r);
                self.row(r)
                    .iter()
                    .copied()
                    .filter(|c| b.binary_search(c).is_err())
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(self.rows, self.cols, per_row))
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.iter().all(|(r, c)| other.contains(r, c))
    }

    pub fn diagonal(&self) -> Vec<usize> {
        (0..self.rows.min(self.cols))
            .filter(|&i| self.contains(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c) in self.iter() {
            m.set(r, c, 1.0);
        }
        m
    }

    /// `self × x` without densifying `self`.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != x.rows() {
            return Err(Error::shape(
                "mul_dense",
                format!("{:?} x {:?}", self.shape(), x.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, x.cols());
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for &c in self.row(r) {
                axpy(1.0, x.row(c as usize), dst);
            }
        }
        Ok(out)
    }

    /// `selfᵀ × x` without building the transpose.
    pub fn t_mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != x.rows() {
            return Err(Error::shape(
                "t_mul_dense",
                format!("{:?}ᵀ x {:?}", self.shape(), x.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, x.cols());
        for r in 0..self.rows {
            let src = x.row(r);
            for &c in self.row(r) {
                axpy(1.0, src, out.row_mut(c as usize));
            }
        }
        Ok(out)
    }

    /// Rows that hold at least one entry.
    pub fn nonempty_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows).filter(move |&r| self.row_ptr[r] != self.row_ptr[r + 1])
    }
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sparse matrix of witness counts, the pre-step result of a Boolean contraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCountMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    counts: Vec<u64>,
}

impl SparseCountMatrix {
    pub fn from_triples<I>(rows: usize, cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        let mut coo: Vec<(u32, u32, u64)> = Vec::new();
        for (r, c, n) in entries {
            if r >= rows || c >= cols {
                return Err(Error::IndexOutOfRange {
                    what: "entry",
                    index: if r >= rows { r } else { c },
                    size: if r >= rows { rows } else { cols },
                });
            }
            coo.push((r as u32, c as u32, n));
        }
        coo.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, u64)> = Vec::with_capacity(coo.len());
        for e in coo {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseCountMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: merged.iter().map(|e| e.1).collect(),
            counts: merged.iter().map(|e| e.2).collect(),
        })
    }

    /// Lifts a Boolean matrix to counts of 1.
    pub fn from_bool(m: &SparseBoolMatrix) -> Self {
        SparseCountMatrix {
            rows: m.rows,
            cols: m.cols,
            row_ptr: m.row_ptr.clone(),
            col_idx: m.col_idx.clone(),
            counts: vec![1; m.nnz()],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.counts[span.start + k],
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k] as usize, self.counts[k]))
        })
    }
}

/// `Σ_y A[x,y]·B[y,z]` for every `(x, z)`: the number of join witnesses.
pub fn bool_matmul_count(a: &SparseBoolMatrix, b: &SparseBoolMatrix) -> Result<SparseCountMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "bool_matmul_count",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    // Dense accumulator over output columns, reset through the touched list.
    let mut acc = vec![0u64; b.cols];
    let mut touched: Vec<u32> = Vec::new();
    let mut row_ptr = Vec::with_capacity(a.rows + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut counts = Vec::new();
    for x in 0..a.rows {
        for &y in a.row(x) {
            for &z in b.row(y as usize) {
                let slot = &mut acc[z as usize];
                if *slot == 0 {
                    touched.push(z);
                }
                *slot += 1;
            }
        }
        touched.sort_unstable();
        for &z in &touched {
            col_idx.push(z);
            counts.push(acc[z as usize]);
            acc[z as usize] = 0;
        }
        touched.clear();
        row_ptr.push(col_idx.len());
    }
    Ok(SparseCountMatrix {
        rows: a.rows,
        cols: b.cols,
        row_ptr,
        col_idx,
        counts,
    })
}

/// Keeps exactly the entries with a positive count.
pub fn heaviside(m: &SparseCountMatrix) -> SparseBoolMatrix {
    let per_row = (0..m.rows)
        .map(|r| {
            (m.row_ptr[r]..m.row_ptr[r + 1])
                .filter(|&k| m.counts[k] > 0)
                .map(|k| m.col_idx[k])
                .collect()
        })
        .collect();
    SparseBoolMatrix::from_rows(m.rows, m.cols, per_row)
}

/// `H(A × B)` in one pass, skipping the count matrix.
pub fn bool_matmul(a: &SparseBoolMatrix, b: &SparseBoolMatrix) -> Result<SparseBoolMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "bool_matmul",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut seen = vec![false; b.cols];
    let mut per_row = Vec::with_capacity(a.rows);
    for x in 0..a.rows {
        let mut row: Vec<u32> = Vec::new();
        for &y in a.row(x) {
            for &z in b.row(y as usize) {
                if !seen[z as usize] {
                    seen[z as usize] = true;
                    row.push(z);
                }
            }
        }
        for &z in &row {
            seen[z as usize] = false;
        }
        row.sort_unstable();
        per_row.push(row);
    }
    Ok(SparseBoolMatrix::from_rows(a.rows, b.cols, per_row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(n: usize, pairs: &[(usize, usize)]) -> SparseBoolMatrix {
        SparseBoolMatrix::from_pairs(n, n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn count_product_examples() {
        let c = bool_matmul_count(&m(3, &[(0, 1)]), &m(3, &[(1, 2)])).unwrap();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![(0, 2, 1)]);

        let b = m(3, &[(0, 2), (1, 1), (2, 0), (2, 1)]);
        let c = bool_matmul_count(&SparseBoolMatrix::identity(3), &b).unwrap();
        assert_eq!(
            c.iter().collect::<Vec<_>>(),
            b.iter().map(|(r, c)| (r, c, 1)).collect::<Vec<_>>()
        );

        // two witnesses y ∈ {1, 2}
        let c = bool_matmul_count(&m(4, &[(0, 1), (0, 2)]), &m(4, &[(1, 3), (2, 3)])).unwrap();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![(0, 3, 2)]);
    }

    #[test]
    fn count_product_rejects_bad_shapes() {
        let a = SparseBoolMatrix::empty(2, 3);
        let b = SparseBoolMatrix::empty(2, 3);
        let err = bool_matmul_count(&a, &b).unwrap_err();
        assert!(err.to_string().contains("2x3 times 2x3"));
    }

    #[test]
    fn heaviside_examples() {
        let c = SparseCountMatrix::from_triples(5, 5, [(0, 0, 3)]).unwrap();
        assert_eq!(heaviside(&c), m(5, &[(0, 0)]));
        let c = SparseCountMatrix::from_triples(5, 5, []).unwrap();
        assert!(heaviside(&c).is_empty());
        let c = SparseCountMatrix::from_triples(5, 5, [(1, 2, 1), (3, 4, 2)]).unwrap();
        assert_eq!(heaviside(&c), m(5, &[(1, 2), (3, 4)]));
        let c = SparseCountMatrix::from_triples(5, 5, [(1, 2, 0)]).unwrap();
        assert!(heaviside(&c).is_empty());
    }

    #[test]
    fn construction_is_order_independent() {
        let a = m(4, &[(3, 1), (0, 2), (0, 2), (1, 0)]);
        let b = m(4, &[(1, 0), (0, 2), (3, 1)]);
        assert_eq!(a, b);
        assert_eq!(a.nnz(), 3);
        assert!(SparseBoolMatrix::from_pairs(2, 2, [(2, 0)]).is_err());
    }

    #[test]
    fn sparse_dense_products() {
        let a = SparseBoolMatrix::from_pairs(3, 2, [(0, 1), (2, 0), (2, 1)]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = a.mul_dense(&x).unwrap();
        assert_eq!(y, a.to_dense().matmul(&x).unwrap());
        let z = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![5.0]]).unwrap();
        assert_eq!(
            a.t_mul_dense(&z).unwrap(),
            a.to_dense().transpose().matmul(&z).unwrap()
        );
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = SparseBoolMatrix> {
        proptest::collection::vec((0..n, 0..n), 0..(n * n / 4).max(1))
            .prop_map(move |p| SparseBoolMatrix::from_pairs(n, n, p).unwrap())
    }

    proptest! {
        #[test]
        fn step_of_count_product_is_relational_join(
            (a, b) in (1usize..=30).prop_flat_map(|n| (arb_matrix(n), arb_matrix(n)))
        ) {
            let n = a.rows();
            let mut expect = Vec::new();
            for x in 0..n {
                for z in 0..n {
                    if (0..n).any(|y| a.contains(x, y) && b.contains(y, z)) {
                        expect.push((x, z));
                    }
                }
            }
            let got = heaviside(&bool_matmul_count(&a, &b).unwrap());
            prop_assert_eq!(got.iter().collect::<Vec<_>>(), expect);
            prop_assert_eq!(bool_matmul(&a, &b).unwrap(), got);
        }

        #[test]
        fn heaviside_is_idempotent(a in (1usize..=20).prop_flat_map(arb_matrix)) {
            let counts = bool_matmul_count(&a, &a).unwrap();
            let once = heaviside(&counts);
            prop_assert_eq!(heaviside(&SparseCountMatrix::from_bool(&once)), once);
        }

        #[test]
        fn transpose_and_set_ops(
            (a, b) in (1usize..=15).prop_flat_map(|n| (arb_matrix(n), arb_matrix(n)))
        ) {
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let u = a.union(&b).unwrap();
            prop_assert!(a.is_subset_of(&u) && b.is_subset_of(&u));
            let d = u.difference(&a).unwrap();
            prop_assert_eq!(d.nnz() + a.nnz(), u.nnz());
        }
    }
}
