//! Benchmark data: the adding and copying problems and a character-level
//! language-model corpus, plus the losses used to score them.
//!
//! Every generator is a pure function of its seed.

mod adding;
mod copying;
mod corpus;
mod loss;

pub use adding::{gen_adding, AddingBatch, ADDING_BASELINE_MSE};
pub use copying::{
    copying_baseline, gen_copying, memoryless_copying_loss, CopyingBatch, BLANK, COPY_LEN, DATA_SYMBOLS, DELIMITER,
    INPUT_SYMBOLS, OUTPUT_CLASSES,
};
pub use corpus::{batchify, load_corpus, load_corpus_splits, CharCorpus, LmBatch, Split, Vocab, BUNDLED_CORPUS, UNK};
pub use loss::{mse, seq_cross_entropy};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mixes `(seed, stream, index)` into an independent 64-bit seed (splitmix64).
pub fn stream_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer token ids laid out as a `[rows, cols]` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenGrid {
    pub rows: usize,
    pub cols: usize,
    pub ids: Vec<usize>,
}

impl TokenGrid {
    pub fn new(rows: usize, cols: usize, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != rows * cols {
            return Err(Error::dim("token grid", &[rows, cols], &[ids.len()]));
        }
        Ok(TokenGrid { rows, cols, ids })
    }

    pub fn get(&self, r: usize, c: usize) -> usize {
        self.ids[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.ids[r * self.cols..(r + 1) * self.cols]
    }

    /// One-hot encoding as `[rows, cols, depth]`.
    pub fn one_hot(&self, depth: usize) -> Result<Tensor> {
        let mut data = vec![0.0; self.ids.len() * depth];
        for (i, &id) in self.ids.iter().enumerate() {
            if id >= depth {
                return Err(Error::contract(format!("token {id} out of range 0..{depth}")));
            }
            data[i * depth + id] = 1.0;
        }
        Tensor::new(vec![self.rows, self.cols, depth], data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_seeds_differ() {
        let a = stream_seed(1, 0, 0);
        assert_ne!(a, stream_seed(1, 0, 1));
        assert_ne!(a, stream_seed(1, 1, 0));
        assert_ne!(a, stream_seed(2, 0, 0));
        assert_eq!(a, stream_seed(1, 0, 0));
    }

    #[test]
    fn one_hot_layout() {
        let g = TokenGrid::new(1, 2, vec![2, 0]).unwrap();
        let t = g.one_hot(3).unwrap();
        assert_eq!(t.shape(), &[1, 2, 3]);
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(g.one_hot(2).is_err());
    }
}
