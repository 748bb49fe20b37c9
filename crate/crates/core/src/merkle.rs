//! History-tree Merkle hashing with `0x00`/`0x01` domain separation.
//!
//! The tree over `n` leaves splits at the largest power of two strictly
//! smaller than `n`; this is the same shape as pairing nodes level by level
//! and promoting an odd last node unchanged. The empty tree hashes to
//! `H("")`.

use crate::crypto::{Digest, HashAlgorithm};

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

pub fn leaf_hash(alg: HashAlgorithm, data: &[u8]) -> Digest {
    let mut h = alg.hasher();
    h.update(&[LEAF_PREFIX]);
    h.update(data);
    h.finish()
}

pub fn node_hash(alg: HashAlgorithm, left: &Digest, right: &Digest) -> Digest {
    let mut h = alg.hasher();
    h.update(&[NODE_PREFIX]);
    h.update(left.as_bytes());
    h.update(right.as_bytes());
    h.finish()
}

pub fn empty_root(alg: HashAlgorithm) -> Digest {
    alg.digest(b"")
}

/// Largest power of two strictly less than `n` (`n >= 2`).
fn split_point(n: usize) -> usize {
    debug_assert!(n >= 2);
    let mut k = 1;
    while k << 1 < n {
        k <<= 1;
    }
    k
}

pub fn root(alg: HashAlgorithm, leaves: &[Digest]) -> Digest {
    match leaves.len() {
        0 => empty_root(alg),
        1 => leaves[0].clone(),
        n => {
            let k = split_point(n);
            node_hash(alg, &root(alg, &leaves[..k]), &root(alg, &leaves[k..]))
        }
    }
}

/// Streaming root computation holding only `O(log n)` subtree roots.
#[derive(Debug, Clone)]
pub struct Accumulator {
    alg: HashAlgorithm,
    // (leaf count, subtree root), sizes strictly decreasing powers of two
    stack: Vec<(u64, Digest)>,
    count: u64,
}

impl Accumulator {
    pub fn new(alg: HashAlgorithm) -> Self {
        Self {
            alg,
            stack: Vec::new(),
            count: 0,
        }
    }

    pub fn push_leaf(&mut self, leaf: Digest) {
        self.count += 1;
        self.stack.push((1, leaf));
        while self.stack.len() >= 2 {
            let n = self.stack.len();
            if self.stack[n - 1].0 != self.stack[n - 2].0 {
                break;
            }
            let (size, right) = self.stack.pop().unwrap();
            let (_, left) = self.stack.pop().unwrap();
            self.stack.push((size * 2, node_hash(self.alg, &left, &right)));
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn root(&self) -> Digest {
        let mut iter = self.stack.iter().rev();
        let Some((_, last)) = iter.next() else {
            return empty_root(self.alg);
        };
        iter.fold(last.clone(), |acc, (_, left)| node_hash(self.alg, left, &acc))
    }
}

/// Audit path for leaf `index`, ordered from the leaf level upwards.
pub fn inclusion_path(alg: HashAlgorithm, leaves: &[Digest], index: usize) -> Vec<Digest> {
    assert!(index < leaves.len(), "leaf index out of range");
    let mut path = Vec::new();
    fn walk(alg: HashAlgorithm, leaves: &[Digest], m: usize, out: &mut Vec<Digest>) {
        if leaves.len() <= 1 {
            return;
        }
        let k = split_point(leaves.len());
        if m < k {
            walk(alg, &leaves[..k], m, out);
            out.push(root(alg, &leaves[k..]));
        } else {
            walk(alg, &leaves[k..], m - k, out);
            out.push(root(alg, &leaves[..k]));
        }
    }
    walk(alg, leaves, index, &mut path);
    path
}

/// Recomputes the root implied by an audit path, or `None` if the path has
/// the wrong shape for `(index, size)`.
pub fn root_from_inclusion(
    alg: HashAlgorithm,
    index: u64,
    size: u64,
    leaf: &Digest,
    path: &[Digest],
) -> Option<Digest> {
    if index >= size {
        return None;
    }
    let mut fnode = index;
    let mut snode = size - 1;
    let mut r = leaf.clone();
    for p in path {
        if p.algorithm() != alg || snode == 0 {
            return None;
        }
        if fnode & 1 == 1 || fnode == snode {
            r = node_hash(alg, p, &r);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            r = node_hash(alg, &r, p);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    (snode == 0).then_some(r)
}

/// Proof that the first `old_size` leaves of `leaves` form a prefix tree.
pub fn consistency_proof(alg: HashAlgorithm, leaves: &[Digest], old_size: usize) -> Vec<Digest> {
    assert!(old_size <= leaves.len(), "old size exceeds tree size");
    fn sub(alg: HashAlgorithm, m: usize, leaves: &[Digest], complete: bool, out: &mut Vec<Digest>) {
        let n = leaves.len();
        if m == n {
            if !complete {
                out.push(root(alg, leaves));
            }
            return;
        }
        let k = split_point(n);
        if m <= k {
            sub(alg, m, &leaves[..k], complete, out);
            out.push(root(alg, &leaves[k..]));
        } else {
            sub(alg, m - k, &leaves[k..], false, out);
            out.push(root(alg, &leaves[..k]));
        }
    }
    let mut out = Vec::new();
    if old_size > 0 {
        sub(alg, old_size, leaves, true, &mut out);
    }
    out
}

pub fn verify_consistency(
    alg: HashAlgorithm,
    old_size: u64,
    new_size: u64,
    old_root: &Digest,
    new_root: &Digest,
    proof: &[Digest],
) -> bool {
    if old_size > new_size || proof.iter().any(|d| d.algorithm() != alg) {
        return false;
    }
    if old_size == new_size {
        return proof.is_empty() && old_root == new_root;
    }
    if old_size == 0 {
        return proof.is_empty();
    }
    if proof.is_empty() {
        return false;
    }
    let mut items: Vec<&Digest> = Vec::with_capacity(proof.len() + 1);
    if old_size.is_power_of_two() {
        items.push(old_root);
    }
    items.extend(proof.iter());

    let mut fnode = old_size - 1;
    let mut snode = new_size - 1;
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let mut fr = items[0].clone();
    let mut sr = items[0].clone();
    for c in &items[1..] {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            fr = node_hash(alg, c, &fr);
            sr = node_hash(alg, c, &sr);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            sr = node_hash(alg, &sr, c);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && &fr == old_root && &sr == new_root
}

/// Sibling digests needed to recompute the root from the leaves in
/// `[start, end)`: the roots of every maximal subtree disjoint from the
/// range, in left-to-right tree order.
pub fn range_proof(alg: HashAlgorithm, leaves: &[Digest], start: usize, end: usize) -> Vec<Digest> {
    assert!(start < end && end <= leaves.len(), "range out of bounds");
    fn walk(
        alg: HashAlgorithm,
        leaves: &[Digest],
        lo: usize,
        start: usize,
        end: usize,
        out: &mut Vec<Digest>,
    ) {
        let hi = lo + leaves.len();
        if end <= lo || hi <= start {
            out.push(root(alg, leaves));
        } else if leaves.len() > 1 {
            let k = split_point(leaves.len());
            walk(alg, &leaves[..k], lo, start, end, out);
            walk(alg, &leaves[k..], lo + k, start, end, out);
        }
    }
    let mut out = Vec::new();
    walk(alg, leaves, 0, start, end, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RangeProofError {
    OutOfBounds,
    Malformed(&'static str),
}

/// Recomputes the root of a `leaf_count`-leaf tree from the leaves in
/// `[start, end)` plus a proof produced by [`range_proof`].
pub fn root_from_range(
    alg: HashAlgorithm,
    leaf_count: usize,
    start: usize,
    end: usize,
    range_leaves: &[Digest],
    proof: &[Digest],
) -> Result<Digest, RangeProofError> {
    if start >= end || end > leaf_count {
        return Err(RangeProofError::OutOfBounds);
    }
    if range_leaves.len() != end - start {
        return Err(RangeProofError::Malformed("leaf count does not match range"));
    }
    if proof.iter().any(|d| d.algorithm() != alg) {
        return Err(RangeProofError::Malformed("proof digest algorithm mismatch"));
    }
    struct Ctx<'a> {
        alg: HashAlgorithm,
        start: usize,
        end: usize,
        range_leaves: &'a [Digest],
        proof: std::slice::Iter<'a, Digest>,
    }
    fn walk(ctx: &mut Ctx<'_>, lo: usize, size: usize) -> Result<Digest, RangeProofError> {
        let hi = lo + size;
        if ctx.end <= lo || hi <= ctx.start {
            return ctx
                .proof
                .next()
                .cloned()
                .ok_or(RangeProofError::Malformed("proof too short"));
        }
        if size == 1 {
            return Ok(ctx.range_leaves[lo - ctx.start].clone());
        }
        let k = split_point(size);
        let left = walk(ctx, lo, k)?;
        let right = walk(ctx, lo + k, size - k)?;
        Ok(node_hash(ctx.alg, &left, &right))
    }
    let mut ctx = Ctx {
        alg,
        start,
        end,
        range_leaves,
        proof: proof.iter(),
    };
    let r = walk(&mut ctx, 0, leaf_count)?;
    if ctx.proof.next().is_some() {
        return Err(RangeProofError::Malformed("proof too long"));
    }
    Ok(r)
}
