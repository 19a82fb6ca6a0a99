//! Dense row-major 0/1 matrix packed into 64-bit words.

/// Row-major bit matrix. Padding bits past `cols` in each row are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix { rows, cols, words_per_row, data: vec![0; rows * words_per_row] }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.words_per_row + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let word = &mut self.data[r * self.words_per_row + c / 64];
        let mask = 1u64 << (c % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn row_count(&self, r: usize) -> usize {
        self.row(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.rows).map(|r| self.row_count(r)).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.cols];
        for r in 0..self.rows {
            for c in self.row_ones(r) {
                sums[c] += 1;
            }
        }
        sums
    }

    /// Column indices of the set bits of row `r`, ascending.
    pub fn row_ones(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(r).iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.row_ones(r) {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Number of columns set in both row `a` of `self` and row `b` of `other`.
    #[inline]
    pub fn and_count(&self, a: usize, other: &BitMatrix, b: usize) -> usize {
        self.row(a).iter().zip(other.row(b)).map(|(x, y)| (x & y).count_ones() as usize).sum()
    }

    /// Whether the set bits of row `a` of `self` are all set in row `b` of `other`.
    #[inline]
    pub fn row_is_subset(&self, a: usize, other: &BitMatrix, b: usize) -> bool {
        self.row(a).iter().zip(other.row(b)).all(|(x, y)| x & !y == 0)
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> BitMatrix {
        BitMatrix::from_fn(rows.len(), cols.len(), |r, c| self.get(rows[r], cols[c]))
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c) as u8).collect()).collect()
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(16) {
            let line: String = (0..self.cols.min(64)).map(|c| if self.get(r, c) { '1' } else { '.' }).collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_and_counts_across_word_boundary() {
        let mut m = BitMatrix::zeros(3, 130);
        m.set(0, 0, true);
        m.set(0, 63, true);
        m.set(0, 64, true);
        m.set(2, 129, true);
        assert!(m.get(0, 64) && m.get(2, 129) && !m.get(1, 5));
        assert_eq!(m.row_sums(), vec![3, 0, 1]);
        assert_eq!(m.count_ones(), 4);
        assert_eq!(m.row_ones(0).collect::<Vec<_>>(), vec![0, 63, 64]);
        m.set(0, 63, false);
        assert_eq!(m.row_count(0), 2);
        let t = m.transpose();
        assert_eq!(t.rows(), 130);
        assert!(t.get(129, 2));
        assert_eq!(t.col_sums(), vec![2, 0, 1]);
    }

    #[test]
    fn subset_and_intersection() {
        let a = BitMatrix::from_fn(1, 70, |_, c| c % 2 == 0);
        let b = BitMatrix::from_fn(1, 70, |_, c| c % 4 == 0);
        assert!(b.row_is_subset(0, &a, 0));
        assert!(!a.row_is_subset(0, &b, 0));
        assert_eq!(a.and_count(0, &b, 0), 18);
    }
}
