//! Training-set masks: random half splits and exhaustive enumeration of
//! fixed-size subsets.

use std::fmt;

use rand::Rng;

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Default limit on the number of masks any exhaustive enumeration may visit.
pub const ENUMERATION_CAP: u64 = 10_000_000;

/// A selection of records out of a dataset of `len` records.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    words: Vec<u64>,
    len: usize,
}

impl SubsetMask {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Self::empty(len);
        for i in 0..len {
            m.insert(i);
        }
        m
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m = Self::empty(len);
        for i in indices {
            if i >= len {
                return Err(Error::validation(format!(
                    "record index {i} out of range for {len} records"
                )));
            }
            m.insert(i);
        }
        Ok(m)
    }

    /// Length of the underlying dataset, not the number of selected records.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Number of selected records (k).
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range");
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn complement(&self) -> Self {
        let mut out = Self::empty(self.len);
        for i in 0..self.len {
            if !self.contains(i) {
                out.insert(i);
            }
        }
        out
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Selected indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let tz = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + tz)
                }
            })
        })
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask({}/{}: ", self.count(), self.len)?;
        f.debug_set().entries(self.iter()).finish()?;
        write!(f, ")")
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Fails with a capacity error when C(n, k) exceeds `cap`.
pub fn check_capacity(n: usize, k: usize, cap: u64) -> Result<u64> {
    let count = binomial(n, k);
    if count > u128::from(cap) {
        return Err(Error::Capacity { n, k, count, cap });
    }
    Ok(count as u64)
}

fn pascal() -> &'static [[u64; 65]; 65] {
    static TABLE: std::sync::OnceLock<Box<[[u64; 65]; 65]>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0u64; 65]; 65]);
        for n in 0..65 {
            t[n][0] = 1;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1].saturating_add(t[n - 1][k]);
            }
        }
        t
    })
}

/// C(n, k) for `n <= 64` from a cached table.
fn small_binomial(n: usize, k: usize) -> u64 {
    if k > n {
        0
    } else {
        pascal()[n][k]
    }
}

/// Bit pattern of every size-`k` subset of `0..n` in lexicographic rank
/// order, cached per `(n, k)`. `None` when `n > 64` or the family is large.
pub(crate) fn rank_bits(n: usize, k: usize) -> Option<std::sync::Arc<Vec<u64>>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    const LIMIT: u128 = 1_000_000;
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<u64>>>>> = OnceLock::new();
    if n > 64 || k > n || binomial(n, k) > LIMIT {
        return None;
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("rank cache poisoned").get(&(n, k)) {
        return Some(v.clone());
    }
    let bits: Vec<u64> = enumerate_subsets(n, k)
        .ok()?
        .map(|m| m.words.first().copied().unwrap_or(0))
        .collect();
    let bits = Arc::new(bits);
    cache.lock().expect("rank cache poisoned").insert((n, k), bits.clone());
    Some(bits)
}

/// Lexicographic index of a size-k subset among all size-k subsets of
/// `0..n`, for `n <= 64`.
pub fn lex_rank(mask: &SubsetMask) -> u64 {
    let n = mask.len();
    let k = mask.count();
    let total = small_binomial(n, k);
    let mut tail = 0u64;
    for (i, c) in mask.iter().enumerate() {
        tail += small_binomial(n - 1 - c, k - i);
    }
    total - 1 - tail
}

/// Inverse of [`lex_rank`].
pub fn lex_unrank(n: usize, k: usize, mut rank: u64) -> SubsetMask {
    let mut mask = SubsetMask::empty(n);
    let mut next = 0usize;
    for slot in 0..k {
        loop {
            // subsets whose `slot`-th element is `next`
            let block = small_binomial(n - 1 - next, k - 1 - slot);
            if rank < block {
                break;
            }
            rank -= block;
            next += 1;
        }
        mask.insert(next);
        next += 1;
    }
    mask
}

/// Iterator over every size-k subset of `0..n` in lexicographic order of
/// the sorted index tuples.
pub struct SubsetEnumerator {
    n: usize,
    idx: Vec<usize>,
    done: bool,
    remaining: u64,
}

impl Iterator for SubsetEnumerator {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        if self.done || self.remaining == 0 {
            return None;
        }
        let mask = SubsetMask::from_indices(self.n, self.idx.iter().copied())
            .expect("indices in range");
        self.remaining -= 1;
        // advance to the next combination
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(mask)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining as usize;
        (r, Some(r))
    }
}

impl ExactSizeIterator for SubsetEnumerator {}

/// Enumerates all C(n, k) masks, refusing when that exceeds [`ENUMERATION_CAP`].
pub fn enumerate_subsets(n: usize, k: usize) -> Result<SubsetEnumerator> {
    enumerate_subsets_capped(n, k, ENUMERATION_CAP)
}

pub fn enumerate_subsets_capped(n: usize, k: usize, cap: u64) -> Result<SubsetEnumerator> {
    if k > n {
        return Err(Error::validation(format!("subset size {k} exceeds {n}")));
    }
    let count = check_capacity(n, k, cap)?;
    Ok(SubsetEnumerator {
        n,
        idx: (0..k).collect(),
        done: false,
        remaining: count,
    })
}

/// Enumerates `len` masks in lexicographic order starting at rank `start`.
pub(crate) fn enumerate_range(n: usize, k: usize, start: u64, len: u64) -> SubsetEnumerator {
    SubsetEnumerator {
        n,
        idx: lex_unrank(n, k, start).to_indices(),
        done: false,
        remaining: len,
    }
}

/// Folds `f` over all C(n, k) masks in parallel chunks and merges the chunk
/// accumulators in rank order, so the result does not depend on scheduling.
pub(crate) fn fold_masks<A, I, F, M>(n: usize, k: usize, count: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64, &SubsetMask) + Sync,
    M: Fn(&mut A, A),
{
    use rayon::prelude::*;
    const CHUNK: u64 = 4096;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(count - start);
            let mut acc = init();
            for (off, mask) in enumerate_range(n, k, start, len).enumerate() {
                fold(&mut acc, start + off as u64, &mask);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Uniform size-k subset of `pool`, returned as a mask over the full dataset.
pub fn random_subset_of<R: Rng + ?Sized>(pool: &SubsetMask, k: usize, rng: &mut R) -> SubsetMask {
    let members = pool.to_indices();
    assert!(k <= members.len(), "cannot draw {k} of {}", members.len());
    let mut out = SubsetMask::empty(pool.len());
    for pos in rand::seq::index::sample(rng, members.len(), k) {
        out.insert(members[pos]);
    }
    out
}

/// Splits `pool` uniformly into a half of size floor(m/2) and its complement
/// within the pool.
pub fn split_pool<R: Rng + ?Sized>(pool: &SubsetMask, rng: &mut R) -> (SubsetMask, SubsetMask) {
    let m = pool.count();
    let train = random_subset_of(pool, m / 2, rng);
    let mut holdout = pool.clone();
    for i in train.iter() {
        holdout.remove(i);
    }
    (train, holdout)
}

/// Draws the training half: a uniformly random subset of size floor(n/2);
/// the holdout is its complement.
pub fn random_half_split(
    data: &DatasetTable,
    stream: &SeedStream,
) -> Result<(SubsetMask, SubsetMask)> {
    if data.len() < 2 {
        return Err(Error::validation("random_half_split needs n >= 2"));
    }
    let mut rng = stream.named("random_half_split").rng();
    Ok(split_pool(&data.full_mask(), &mut rng))
}
