//! Uniform resampling of a sequence with fixed first element and fixed
//! transition counts, plus an exhaustive enumerator of that set for small
//! inputs.
//!
//! Symbols live in `{0, 1, ..., max}`; `0` is the separator used when two
//! market paths are chained together. Transition counts are taken over the
//! `V - 1` consecutive pairs of the sequence. The sampler closes the path
//! into a circuit with one extra edge `(last, first)`, draws a random
//! spanning in-arborescence rooted at the last symbol by a backward random
//! walk, and then walks forward from the first symbol, choosing uniformly
//! among unused out-edges and taking each vertex's tree edge last.

use rand::Rng;
use thiserror::Error;

/// Upper bound on the number of sequences [`enumerate_rs0`] will produce.
pub const MAX_ENUMERATION: usize = 200_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EulerError {
    #[error("sequence needs at least two elements, got {0}")]
    TooShort(usize),
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("more than {MAX_ENUMERATION} arrangements; too large to enumerate")]
    TooLarge,
}

/// A sequence over `{0} ∪ states` of length at least two.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugSequence(Vec<u32>);

impl AugSequence {
    pub fn new(values: Vec<u32>) -> Result<Self, EulerError> {
        if values.len() < 2 {
            return Err(EulerError::TooShort(values.len()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// Dense `(s, s')` counts over an alphabet `0..alphabet`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionTable {
    alphabet: usize,
    counts: Vec<u32>,
}

impl TransitionTable {
    fn empty(alphabet: usize) -> Self {
        Self {
            alphabet,
            counts: vec![0; alphabet * alphabet],
        }
    }

    /// Counts over the consecutive pairs of `seq`.
    pub fn path(seq: &[u32], alphabet: usize) -> Self {
        let mut table = Self::empty(alphabet);
        for w in seq.windows(2) {
            table.counts[w[0] as usize * alphabet + w[1] as usize] += 1;
        }
        table
    }

    /// Path counts plus the closing edge `(last, first)`.
    pub fn closed(seq: &[u32], alphabet: usize) -> Self {
        let mut table = Self::path(seq, alphabet);
        if let (Some(&first), Some(&last)) = (seq.first(), seq.last()) {
            table.counts[last as usize * alphabet + first as usize] += 1;
        }
        table
    }

    pub fn get(&self, from: u32, to: u32) -> u32 {
        self.counts[from as usize * self.alphabet + to as usize]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

fn alphabet_of(seq: &[u32]) -> usize {
    seq.iter().copied().max().unwrap_or(0) as usize + 1
}

/// Reusable buffers for repeated resampling.
#[derive(Debug, Default)]
pub struct EulerSampler {
    in_start: Vec<usize>,
    in_src: Vec<u32>,
    out_start: Vec<usize>,
    out_dst: Vec<u32>,
    available: Vec<usize>,
    visited: Vec<bool>,
    reserved: Vec<Option<u32>>,
    fill: Vec<usize>,
}

impl EulerSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes into `out` a uniform draw from the sequences sharing `seq`'s
    /// first element and transition counts. `out` must have `seq`'s length.
    pub fn resample_into<R: Rng + ?Sized>(&mut self, seq: &[u32], rng: &mut R, out: &mut [u32]) {
        let len = seq.len();
        assert_eq!(out.len(), len, "output buffer length");
        assert!(len >= 2, "sequence needs at least two elements");
        let alphabet = alphabet_of(seq);
        self.prepare(seq, alphabet);

        // Backward walk on the closed graph from the last symbol. The edge
        // through which a vertex is first entered becomes its reserved exit.
        let root = seq[len - 1];
        let mut remaining = self.visited.iter().filter(|&&v| v).count() - 1;
        for v in self.visited.iter_mut() {
            *v = false;
        }
        self.visited[root as usize] = true;
        let mut current = root;
        while remaining > 0 {
            let lo = self.in_start[current as usize];
            let hi = self.in_start[current as usize + 1];
            let prev = self.in_src[rng.random_range(lo..hi)];
            if !self.visited[prev as usize] {
                self.visited[prev as usize] = true;
                self.reserved[prev as usize] = Some(current);
                remaining -= 1;
            }
            current = prev;
        }

        // Set each reserved edge aside at the end of its vertex's out-list.
        for s in 0..alphabet {
            let lo = self.out_start[s];
            let hi = self.out_start[s + 1];
            self.available[s] = hi - lo;
            if let Some(target) = self.reserved[s] {
                let pos = (lo..hi)
                    .find(|&j| self.out_dst[j] == target)
                    .expect("reserved edge is a path edge");
                self.out_dst.swap(pos, hi - 1);
                self.available[s] -= 1;
            }
        }

        out[0] = seq[0];
        let mut current = seq[0] as usize;
        for slot in out.iter_mut().skip(1) {
            let lo = self.out_start[current];
            let avail = self.available[current];
            let next = if avail > 0 {
                let j = lo + rng.random_range(0..avail);
                let next = self.out_dst[j];
                self.out_dst.swap(j, lo + avail - 1);
                self.available[current] -= 1;
                next
            } else {
                self.reserved[current]
                    .take()
                    .expect("vertex ran out of edges before the path ended")
            };
            *slot = next;
            current = next as usize;
        }
        debug_assert_eq!(out[len - 1], root);
    }

    fn prepare(&mut self, seq: &[u32], alphabet: usize) {
        let len = seq.len();
        self.in_start.clear();
        self.in_start.resize(alphabet + 1, 0);
        self.out_start.clear();
        self.out_start.resize(alphabet + 1, 0);
        self.visited.clear();
        self.visited.resize(alphabet, false);
        self.reserved.clear();
        self.reserved.resize(alphabet, None);
        self.available.clear();
        self.available.resize(alphabet, 0);

        for &s in seq {
            self.visited[s as usize] = true;
        }
        // closed-graph in-degrees: every element is entered once, seq[0] via the wrap edge
        for &s in seq {
            self.in_start[s as usize + 1] += 1;
        }
        for w in seq.windows(2) {
            self.out_start[w[0] as usize + 1] += 1;
        }
        for s in 0..alphabet {
            self.in_start[s + 1] += self.in_start[s];
            self.out_start[s + 1] += self.out_start[s];
        }

        self.in_src.clear();
        self.in_src.resize(len, 0);
        self.fill.clear();
        self.fill.extend_from_slice(&self.in_start[..alphabet]);
        let push_in = |from: u32, to: u32, fill: &mut Vec<usize>, in_src: &mut Vec<u32>| {
            in_src[fill[to as usize]] = from;
            fill[to as usize] += 1;
        };
        for w in seq.windows(2) {
            push_in(w[0], w[1], &mut self.fill, &mut self.in_src);
        }
        push_in(seq[len - 1], seq[0], &mut self.fill, &mut self.in_src);

        self.out_dst.clear();
        self.out_dst.resize(len - 1, 0);
        self.fill.clear();
        self.fill.extend_from_slice(&self.out_start[..alphabet]);
        for w in seq.windows(2) {
            self.out_dst[self.fill[w[0] as usize]] = w[1];
            self.fill[w[0] as usize] += 1;
        }
    }
}

/// Convenience wrapper that allocates a fresh sampler.
pub fn euler_resample<R: Rng + ?Sized>(seq: &AugSequence, rng: &mut R) -> AugSequence {
    let mut out = vec![0; seq.len()];
    EulerSampler::new().resample_into(seq.values(), rng, &mut out);
    AugSequence(out)
}

/// Same first element and same transition counts.
pub fn in_rs0(a: &AugSequence, b: &AugSequence) -> Result<bool, EulerError> {
    if a.len() != b.len() {
        return Err(EulerError::LengthMismatch(a.len(), b.len()));
    }
    let alphabet = alphabet_of(a.values()).max(alphabet_of(b.values()));
    Ok(a.0[0] == b.0[0]
        && TransitionTable::path(a.values(), alphabet) == TransitionTable::path(b.values(), alphabet))
}

/// Every sequence sharing `seq`'s first element and transition counts, in
/// lexicographic order. Depth-first over arrangements of the edge multiset.
pub fn enumerate_rs0(seq: &AugSequence) -> Result<Vec<AugSequence>, EulerError> {
    let alphabet = alphabet_of(seq.values());
    let mut counts = TransitionTable::path(seq.values(), alphabet);
    let mut prefix = vec![seq.0[0]];
    let mut found = Vec::new();
    dfs(&mut counts, &mut prefix, seq.len(), &mut found)?;
    Ok(found)
}

fn dfs(
    counts: &mut TransitionTable,
    prefix: &mut Vec<u32>,
    len: usize,
    found: &mut Vec<AugSequence>,
) -> Result<(), EulerError> {
    if prefix.len() == len {
        if found.len() == MAX_ENUMERATION {
            return Err(EulerError::TooLarge);
        }
        found.push(AugSequence(prefix.clone()));
        return Ok(());
    }
    let current = *prefix.last().expect("prefix starts non-empty") as usize;
    for next in 0..counts.alphabet {
        let idx = current * counts.alphabet + next;
        if counts.counts[idx] == 0 {
            continue;
        }
        counts.counts[idx] -= 1;
        prefix.push(next as u32);
        let res = dfs(counts, prefix, len, found);
        prefix.pop();
        counts.counts[idx] += 1;
        res?;
    }
    Ok(())
}
