//! Dense linear algebra over GF(2) on bit-packed vectors.

/// Bit-packed vector of fixed length over GF(2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Highest set bit.
    pub fn leading(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }
}

/// Matrix over GF(2) stored as bit-packed rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanMatrix {
    rows: Vec<BitVector>,
    cols: usize,
}

impl BooleanMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows: vec![BitVector::zeros(cols); rows],
            cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value);
    }

    pub fn row(&self, r: usize) -> &BitVector {
        &self.rows[r]
    }

    /// Same matrix with rows listed in `order`.
    pub fn permute_rows(&self, order: &[usize]) -> BooleanMatrix {
        BooleanMatrix {
            rows: order.iter().map(|&r| self.rows[r].clone()).collect(),
            cols: self.cols,
        }
    }
}

/// Rank over GF(2) by Gaussian elimination.
pub fn gf2_rank(m: &BooleanMatrix) -> usize {
    let mut basis = EchelonBasis::new(m.num_cols());
    m.rows.iter().filter(|r| basis.insert((*r).clone())).count()
}

/// Incrementally maintained row-echelon basis, keyed by leading bit.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    by_pivot: Vec<Option<BitVector>>,
    rank: usize,
}

impl EchelonBasis {
    pub fn new(len: usize) -> Self {
        Self {
            by_pivot: vec![None; len],
            rank: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Adds `v` to the span; returns whether the rank grew.
    pub fn insert(&mut self, mut v: BitVector) -> bool {
        while let Some(p) = v.leading() {
            match &self.by_pivot[p] {
                Some(b) => v.xor_assign(b),
                None => {
                    self.by_pivot[p] = Some(v);
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook row reduction, written independently of [`EchelonBasis`].
    fn rank_by_row_echelon(m: &BooleanMatrix) -> usize {
        let mut rows: Vec<Vec<bool>> = (0..m.num_rows())
            .map(|r| (0..m.num_cols()).map(|c| m.get(r, c)).collect())
            .collect();
        let mut rank = 0;
        for col in 0..m.num_cols() {
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][col]) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[col] {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn identity_and_zero() {
        assert_eq!(gf2_rank(&BooleanMatrix::identity(3)), 3);
        assert_eq!(gf2_rank(&BooleanMatrix::zeros(4, 5)), 0);
    }

    #[test]
    fn random_matches_permuted_row_echelon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut m = BooleanMatrix::zeros(6, 6);
            for r in 0..6 {
                for c in 0..6 {
                    m.set(r, c, rng.random_bool(0.4));
                }
            }
            let mut order: Vec<usize> = (0..6).collect();
            order.shuffle(&mut rng);
            assert_eq!(gf2_rank(&m), rank_by_row_echelon(&m.permute_rows(&order)));
        }
    }

    #[test]
    fn wide_vectors_cross_word_boundaries() {
        let mut a = BitVector::zeros(130);
        a.set(129, true);
        a.set(3, true);
        assert_eq!(a.leading(), Some(129));
        let mut b = a.clone();
        b.flip(129);
        assert_eq!(b.leading(), Some(3));
        let mut basis = EchelonBasis::new(130);
        assert!(basis.insert(a.clone()));
        assert!(basis.insert(b.clone()));
        let mut sum = a;
        sum.xor_assign(&b);
        assert!(!basis.insert(sum));
        assert_eq!(basis.rank(), 2);
    }
}
