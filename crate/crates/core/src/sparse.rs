//! Compressed row storage for transition matrices.

use crate::number::Field;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparseError {
    #[error("entry ({row}, {column}) outside a {rows}x{columns} matrix")]
    OutOfBounds {
        row: usize,
        column: usize,
        rows: usize,
        columns: usize,
    },
}

/// Row-compressed sparse matrix over a number domain.
///
/// Within a row, column indices are strictly ascending and every stored value
/// is non-zero. Memory is proportional to the number of stored entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<N> {
    column_count: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<N>,
}

impl<N: Field> SparseMatrix<N> {
    /// Builds a canonical matrix: duplicates within a row are summed, zeros
    /// dropped and columns sorted.
    pub fn from_triplets(
        row_count: usize,
        column_count: usize,
        entries: impl IntoIterator<Item = (usize, usize, N)>,
    ) -> Result<Self, SparseError> {
        let mut rows: Vec<Vec<(usize, N)>> = vec![Vec::new(); row_count];
        for (row, column, value) in entries {
            if row >= row_count || column >= column_count {
                return Err(SparseError::OutOfBounds {
                    row,
                    column,
                    rows: row_count,
                    columns: column_count,
                });
            }
            rows[row].push((column, value));
        }
        Ok(Self::from_rows(column_count, rows))
    }

    /// Same canonicalization as [`from_triplets`](Self::from_triplets) for
    /// already row-grouped entries. Panics on out-of-range columns.
    pub fn from_rows(column_count: usize, rows: Vec<Vec<(usize, N)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|(column, _)| *column);
            let mut merged: Vec<(usize, N)> = Vec::with_capacity(row.len());
            for (column, value) in row {
                assert!(column < column_count, "column {column} out of range");
                match merged.last_mut() {
                    Some((last, acc)) if *last == column => {
                        *acc = acc.clone() + value;
                    }
                    _ => merged.push((column, value)),
                }
            }
            for (column, value) in merged {
                if !value.is_zero() {
                    columns.push(column);
                    values.push(value);
                }
            }
            row_offsets.push(columns.len());
        }
        SparseMatrix {
            column_count,
            row_offsets,
            columns,
            values,
        }
    }

    /// Matrix with no rows.
    pub fn empty(column_count: usize) -> Self {
        SparseMatrix {
            column_count,
            row_offsets: vec![0],
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(size: usize) -> Self {
        Self::from_rows(size, (0..size).map(|i| vec![(i, N::one())]).collect())
    }

    /// Sum of the entries of `row` as a fresh value.
    pub fn row_sum(&self, row: usize) -> N {
        self.row(row)
            .fold(N::zero(), |acc, (_, value)| acc + value.clone())
    }

    /// `Σ_j M[row, j] · x[j]`.
    pub fn row_dot(&self, row: usize, x: &[N]) -> N {
        self.row(row)
            .fold(N::zero(), |acc, (column, value)| acc + value.clone() * x[column].clone())
    }

    pub fn get(&self, row: usize, column: usize) -> Option<&N> {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.columns[range.clone()]
            .binary_search(&column)
            .ok()
            .map(|pos| &self.values[range.start + pos])
    }

    /// Applies `f` to every stored value. Entries mapped to zero are dropped.
    pub fn map_values<M: Field>(&self, mut f: impl FnMut(&N) -> M) -> SparseMatrix<M> {
        let rows = (0..self.row_count())
            .map(|r| self.row(r).map(|(c, v)| (c, f(v))).collect())
            .collect();
        SparseMatrix::from_rows(self.column_count, rows)
    }

    /// Same as [`map_values`](Self::map_values) but fallible.
    pub fn try_map_values<M: Field, E>(
        &self,
        mut f: impl FnMut(usize, usize, &N) -> Result<M, E>,
    ) -> Result<SparseMatrix<M>, E> {
        let mut rows = Vec::with_capacity(self.row_count());
        for r in 0..self.row_count() {
            let mut row = Vec::with_capacity(self.row_len(r));
            for (c, v) in self.row(r) {
                row.push((c, f(r, c, v)?));
            }
            rows.push(row);
        }
        Ok(SparseMatrix::from_rows(self.column_count, rows))
    }

    /// Entries of `row` as owned pairs.
    pub fn row_entries(&self, row: usize) -> Vec<(usize, N)> {
        self.row(row).map(|(c, v)| (c, v.clone())).collect()
    }
}

impl<N> SparseMatrix<N> {
    pub fn row_count(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn column_count(&self) -> usize {
        self.column_count
    }

    pub fn entry_count(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.columns
    }

    pub fn values(&self) -> &[N] {
        &self.values
    }

    pub fn row_len(&self, row: usize) -> usize {
        self.row_offsets[row + 1] - self.row_offsets[row]
    }

    pub fn row(&self, row: usize) -> impl ExactSizeIterator<Item = (usize, &N)> + Clone + '_ {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.columns[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter())
    }

    pub fn row_columns(&self, row: usize) -> &[usize] {
        &self.columns[self.row_offsets[row]..self.row_offsets[row + 1]]
    }

    /// Structural transpose: for every column, the rows holding an entry in it.
    pub fn backward_edges(&self) -> BackwardEdges {
        let mut counts = vec![0usize; self.column_count + 1];
        for &c in &self.columns {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts.clone();
        let mut sources = vec![0usize; self.columns.len()];
        let mut next = counts;
        for row in 0..self.row_count() {
            for &c in self.row_columns(row) {
                sources[next[c]] = row;
                next[c] += 1;
            }
        }
        BackwardEdges { offsets, sources }
    }
}

/// Reversed non-zero pattern of a [`SparseMatrix`]; sources per column are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackwardEdges {
    offsets: Vec<usize>,
    sources: Vec<usize>,
}

impl BackwardEdges {
    pub fn column_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sources(&self, column: usize) -> &[usize] {
        &self.sources[self.offsets[column]..self.offsets[column + 1]]
    }

    /// Transposes back into a pattern over `row_count` rows.
    pub fn reversed(&self, row_count: usize) -> BackwardEdges {
        let mut counts = vec![0usize; row_count + 1];
        for &r in &self.sources {
            counts[r + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut sources = vec![0usize; self.sources.len()];
        for column in 0..self.column_count() {
            for &r in self.sources(column) {
                sources[next[r]] = column;
                next[r] += 1;
            }
        }
        BackwardEdges { offsets, sources }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::Rational;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn duplicates_merge() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 0.5), (0, 1, 0.5)]).unwrap();
        assert_eq!(m.entry_count(), 1);
        assert_eq!(m.get(0, 1), Some(&1.0));
        assert_eq!(m.row_offsets(), &[0, 1, 1]);
    }

    #[test]
    fn self_loop_row() {
        let m = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 1.0)]).unwrap();
        assert_eq!(m, SparseMatrix::identity(1));
    }

    #[test]
    fn knuth_yao_top_fragment_layout() {
        let m =
            SparseMatrix::from_triplets(3, 3, vec![(0, 2, q(1, 2)), (0, 1, q(1, 2))]).unwrap();
        assert_eq!(m.row_offsets(), &[0, 2, 2, 2]);
        assert_eq!(m.column_indices(), &[1, 2]);
    }

    #[test]
    fn zeros_and_cancellations_dropped() {
        let m = SparseMatrix::from_triplets(
            1,
            3,
            vec![(0, 0, q(1, 2)), (0, 0, q(-1, 2)), (0, 2, q(0, 1)), (0, 1, q(1, 1))],
        )
        .unwrap();
        assert_eq!(m.column_indices(), &[1]);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let err = SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseError::OutOfBounds { row: 2, .. }));
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 5, 1.0)]).is_err());
    }

    #[test]
    fn backward_edges_on_tiny_matrices() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        let b = m.backward_edges();
        assert_eq!(b.sources(0), &[] as &[usize]);
        assert_eq!(b.sources(1), &[0]);

        let m = SparseMatrix::<f64>::identity(1);
        assert_eq!(m.backward_edges().sources(0), &[0]);

        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 1, 0.5), (0, 2, 0.5), (2, 1, 1.0)])
            .unwrap();
        let b = m.backward_edges();
        assert_eq!(b.sources(1), &[0, 2]);
        assert_eq!(b.sources(2), &[0]);
    }

    proptest! {
        #[test]
        fn double_transpose_restores_pattern(
            entries in proptest::collection::vec((0usize..6, 0usize..6, 1u32..5), 0..30)
        ) {
            let m = SparseMatrix::from_triplets(
                6, 6, entries.into_iter().map(|(r, c, v)| (r, c, v as f64))).unwrap();
            let back = m.backward_edges().reversed(m.row_count());
            for r in 0..m.row_count() {
                prop_assert_eq!(back.sources(r), m.row_columns(r));
            }
        }

        #[test]
        fn canonical_rows_are_sorted_and_nonzero(
            entries in proptest::collection::vec((0usize..4, 0usize..5, -2i64..3), 0..25)
        ) {
            let m = SparseMatrix::from_triplets(
                4, 5, entries.into_iter().map(|(r, c, v)| (r, c, q(v, 1)))).unwrap();
            for r in 0..4 {
                let cols = m.row_columns(r);
                prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(m.row(r).all(|(_, v)| !num_traits::Zero::is_zero(v)));
            }
            prop_assert_eq!(*m.row_offsets().last().unwrap(), m.values().len());
        }
    }
}
