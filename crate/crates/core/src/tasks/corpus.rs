//! Character-level corpus: one sentence per line, split into train, valid
//! and test, and cut into next-character prediction windows.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use super::{rng, TokenGrid};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Moby-Dick (public domain), one sentence per line.
pub const BUNDLED_CORPUS: &str = include_str!("../../data/moby-dick.txt");

/// Reserved id for characters not seen when the vocabulary was built.
pub const UNK: usize = 0;
const UNK_CHAR: char = '\u{FFFD}';

/// Dense character ids. Id 0 is [`UNK`]; the rest follow code-point order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocab {
    pub fn from_text(text: &str) -> Self {
        let set: BTreeSet<char> = text.chars().filter(|&c| c != '\n' && c != '\r').collect();
        let chars: Vec<char> = std::iter::once(UNK_CHAR).chain(set).collect();
        let index = chars.iter().enumerate().skip(1).map(|(i, &c)| (c, i)).collect();
        Vocab { chars, index }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.len() <= 1
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars()
            .map(|c| self.index.get(&c).copied().unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.chars.get(i).copied().unwrap_or(UNK_CHAR))
            .collect()
    }
}

/// Sentences of one split, stored back to back. Sentence `k` is
/// `ids[offsets[k]..offsets[k + 1]]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub ids: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl Split {
    fn from_lines<'a>(vocab: &Vocab, lines: impl IntoIterator<Item = &'a str>) -> Self {
        let mut split = Split {
            ids: Vec::new(),
            offsets: vec![0],
        };
        for line in lines {
            split.ids.extend(vocab.encode(line));
            split.offsets.push(split.ids.len());
        }
        split
    }

    pub fn num_sentences(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn sentence(&self, k: usize) -> &[usize] {
        &self.ids[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[usize]> {
        (0..self.num_sentences()).map(move |k| self.sentence(k))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharCorpus {
    pub vocab: Vocab,
    pub train: Split,
    pub valid: Split,
    pub test: Split,
}

fn sentences(text: &str) -> Vec<&str> {
    text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))
}

impl CharCorpus {
    /// Splits one text: of every 20 sentences, the 19th goes to valid and the
    /// 20th to test. The vocabulary covers the whole text.
    pub fn from_text(text: &str) -> Result<Self> {
        let lines = sentences(text);
        if lines.is_empty() {
            return Err(Error::Corpus("corpus has no non-empty lines".into()));
        }
        let vocab = Vocab::from_text(text);
        let pick = |r: usize| {
            lines
                .iter()
                .enumerate()
                .filter(move |(i, _)| i % 20 == r)
                .map(|(_, l)| *l)
        };
        let train = lines.iter().enumerate().filter(|(i, _)| i % 20 < 18).map(|(_, l)| *l);
        Ok(CharCorpus {
            train: Split::from_lines(&vocab, train),
            valid: Split::from_lines(&vocab, pick(18)),
            test: Split::from_lines(&vocab, pick(19)),
            vocab,
        })
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<CharCorpus> {
    CharCorpus::from_text(&read(path.as_ref())?)
}

/// Loads pre-split files. The vocabulary comes from the training file only;
/// unseen characters in valid and test map to [`UNK`].
pub fn load_corpus_splits(
    train: impl AsRef<Path>,
    valid: impl AsRef<Path>,
    test: impl AsRef<Path>,
) -> Result<CharCorpus> {
    let train_text = read(train.as_ref())?;
    let train_lines = sentences(&train_text);
    if train_lines.is_empty() {
        return Err(Error::Corpus("training file has no non-empty lines".into()));
    }
    let vocab = Vocab::from_text(&train_text);
    let valid_text = read(valid.as_ref())?;
    let test_text = read(test.as_ref())?;
    Ok(CharCorpus {
        train: Split::from_lines(&vocab, train_lines),
        valid: Split::from_lines(&vocab, sentences(&valid_text)),
        test: Split::from_lines(&vocab, sentences(&test_text)),
        vocab,
    })
}

/// A padded mini-batch of next-character prediction windows.
#[derive(Clone, Debug, PartialEq)]
pub struct LmBatch {
    /// `[batch, L]` characters `0..k-1` of each window.
    pub inputs: TokenGrid,
    /// `[batch, L]` characters `1..k` of each window.
    pub targets: TokenGrid,
    /// `[batch, L]`, 1 where a prediction is scored.
    pub mask: Tensor,
}

impl LmBatch {
    pub fn num_predictions(&self) -> usize {
        self.mask.data().iter().filter(|&&m| m != 0.0).count()
    }
}

/// Cuts each sentence into windows of at most `max_len` characters (one
/// shared character between neighbours, so every transition is predicted
/// once) and packs them into batches.
///
/// With `seed = None` windows keep corpus order. With a seed they are
/// shuffled, grouped by similar length to limit padding, and the batch order
/// is shuffled again.
pub fn batchify(split: &Split, batch: usize, max_len: usize, seed: Option<u64>) -> Result<Vec<LmBatch>> {
    if max_len < 2 {
        return Err(Error::contract(format!("max_len must be >= 2, got {max_len}")));
    }
    if batch == 0 {
        return Err(Error::contract("batch must be >= 1"));
    }
    let mut windows: Vec<&[usize]> = Vec::new();
    for s in split.sentences() {
        let mut start = 0;
        while start + 1 < s.len() {
            let end = (start + max_len).min(s.len());
            windows.push(&s[start..end]);
            start = end - 1;
        }
    }

    let mut groups: Vec<Vec<&[usize]>> = match seed {
        None => windows.chunks(batch).map(<[_]>::to_vec).collect(),
        Some(seed) => {
            let mut rng = rng(seed);
            windows.shuffle(&mut rng);
            let mut groups = Vec::new();
            for pool in windows.chunks_mut(batch * 16) {
                pool.sort_by_key(|w| w.len());
                groups.extend(pool.chunks(batch).map(<[_]>::to_vec));
            }
            groups.shuffle(&mut rng);
            groups
        }
    };

    groups
        .drain(..)
        .map(|group| {
            let steps = group.iter().map(|w| w.len() - 1).max().unwrap_or(1);
            let rows = group.len();
            let mut inputs = vec![UNK; rows * steps];
            let mut targets = vec![UNK; rows * steps];
            let mut mask = vec![0.0; rows * steps];
            for (r, w) in group.iter().enumerate() {
                for t in 0..w.len() - 1 {
                    inputs[r * steps + t] = w[t];
                    targets[r * steps + t] = w[t + 1];
                    mask[r * steps + t] = 1.0;
                }
            }
            Ok(LmBatch {
                inputs: TokenGrid::new(rows, steps, inputs)?,
                targets: TokenGrid::new(rows, steps, targets)?,
                mask: Tensor::new(vec![rows, steps], mask)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_characters_make_one_pair() {
        let corpus = CharCorpus::from_text("ab").unwrap();
        let batches = batchify(&corpus.train, 4, 10, None).unwrap();
        assert_eq!(batches.len(), 1);
        let b = &batches[0];
        assert_eq!(corpus.vocab.decode(b.inputs.row(0)), "a");
        assert_eq!(corpus.vocab.decode(b.targets.row(0)), "b");
        assert_eq!(b.mask.data(), &[1.0]);
    }

    #[test]
    fn empty_text_is_a_corpus_error() {
        assert!(matches!(CharCorpus::from_text(""), Err(Error::Corpus(_))));
        assert!(matches!(CharCorpus::from_text("\n\n  \n"), Err(Error::Corpus(_))));
    }

    #[test]
    fn unknown_characters_map_to_unk() {
        let v = Vocab::from_text("abc");
        assert_eq!(v.len(), 4);
        assert_eq!(v.encode("abz"), vec![1, 2, UNK]);
    }

    #[test]
    fn long_sentences_share_one_character_between_windows() {
        let corpus = CharCorpus::from_text("abcdefg").unwrap();
        let batches = batchify(&corpus.train, 8, 3, None).unwrap();
        let b = &batches[0];
        let decoded: Vec<String> = (0..b.inputs.rows)
            .map(|r| {
                let cols = b.inputs.cols;
                let n = b.mask.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .filter(|&&m| m == 1.0)
                    .count();
                let mut s = corpus.vocab.decode(&b.inputs.row(r)[..1]);
                s.push_str(&corpus.vocab.decode(&b.targets.row(r)[..n]));
                s
            })
            .collect();
        assert_eq!(decoded, vec!["abc", "cde", "efg"]);
        assert_eq!(b.num_predictions(), 6);
    }

    #[test]
    fn padding_is_masked() {
        let corpus = CharCorpus::from_text("abcd\nxy").unwrap();
        let b = &batchify(&corpus.train, 2, 10, None).unwrap()[0];
        assert_eq!(b.inputs.cols, 3);
        assert_eq!(b.mask.data(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn shuffled_batches_are_deterministic() {
        let text: String = (0..200).map(|i| format!("line number {i} here\n")).collect();
        let corpus = CharCorpus::from_text(&text).unwrap();
        let a = batchify(&corpus.train, 8, 6, Some(3)).unwrap();
        let b = batchify(&corpus.train, 8, 6, Some(3)).unwrap();
        let c = batchify(&corpus.train, 8, 6, Some(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let total: usize = a.iter().map(LmBatch::num_predictions).sum();
        let plain: usize = batchify(&corpus.train, 8, 6, None)
            .unwrap()
            .iter()
            .map(LmBatch::num_predictions)
            .sum();
        assert_eq!(total, plain);
    }

    #[test]
    fn split_assignment() {
        let text: String = (0..40).map(|i| format!("s{i}\n")).collect();
        let c = CharCorpus::from_text(&text).unwrap();
        assert_eq!(c.train.num_sentences(), 36);
        assert_eq!(c.valid.num_sentences(), 2);
        assert_eq!(c.test.num_sentences(), 2);
        assert_eq!(c.vocab.decode(c.valid.sentence(0)), "s18");
        assert_eq!(c.vocab.decode(c.test.sentence(1)), "s39");
    }
}
