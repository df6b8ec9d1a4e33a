//! Dense GF(2) matrices over packed `u64` rows, used as random linear hashes.

use rand::Rng;

/// Bits stored as one `u8` (0 or 1) per bit.
pub type BitString = Vec<u8>;

pub fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            words,
            data: vec![0; rows * words],
        }
    }

    /// Every entry an independent fair bit.
    pub fn random<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        let tail = cols % 64;
        for r in 0..rows {
            for w in 0..m.words {
                let mut v: u64 = rng.random();
                if w + 1 == m.words && tail != 0 {
                    v &= (1u64 << tail) - 1;
                }
                m.data[r * m.words + w] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row(r)[c / 64] >> (c % 64) & 1 == 1
    }

    /// `self * x` for a packed column vector `x`.
    pub fn mul_packed(&self, x: &[u64]) -> BitString {
        (0..self.rows)
            .map(|r| {
                let ones: u32 = self.row(r).iter().zip(x).map(|(a, b)| (a & b).count_ones()).sum();
                (ones & 1) as u8
            })
            .collect()
    }

    pub fn mul(&self, bits: &[u8]) -> BitString {
        self.mul_packed(&pack(bits))
    }

    /// Column `c` as a packed vector of length `rows`.
    pub fn column(&self, c: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.rows.div_ceil(64)];
        for r in 0..self.rows {
            if self.get(r, c) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    /// The listed rows of `self`, in order.
    pub fn select_rows(&self, rows: &[usize]) -> BitMatrix {
        let mut m = Self::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            m.data[i * self.words..(i + 1) * self.words].copy_from_slice(self.row(r));
        }
        m
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.cols, "stacked matrices need equal widths");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        BitMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            words: self.words,
            data,
        }
    }

    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let (w, bit) = (c / 64, 1u64 << (c % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }
}
