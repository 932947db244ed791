//! Shared block tree and chain algebra.
//!
//! Blocks live in an append-only arena addressed by [`BlockRef`]. The κ-bit
//! oracle sample is kept as the block's `id`; because samples may collide at
//! small κ, structure is tracked through arena references and ids are only
//! compared when looking for bad events.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Creator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockRef(pub u32);

impl BlockRef {
    pub const GENESIS: BlockRef = BlockRef(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BlockRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Reserved oracle id of the genesis block.
pub const GENESIS_ID: u64 = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: u64,
    /// Oracle id of the parent; `None` only for genesis.
    pub parent_id: Option<u64>,
    pub parent: Option<BlockRef>,
    pub creator: Creator,
    pub created_round: u64,
    /// Attempt counter used in the oracle query that produced `id`.
    pub nonce: u32,
    pub height: u64,
}

impl Block {
    pub fn is_genesis(&self) -> bool {
        self.parent.is_none()
    }
}

/// A block about to be appended to the store.
#[derive(Clone, Copy, Debug)]
pub struct NewBlock {
    pub parent: BlockRef,
    pub id: u64,
    pub creator: Creator,
    pub created_round: u64,
    pub nonce: u32,
}

#[derive(Clone, Debug)]
pub struct ChainStore {
    blocks: Vec<Block>,
    children: Vec<Vec<BlockRef>>,
    skip: Vec<BlockRef>,
}

impl Default for ChainStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ChainStore {
    pub fn new() -> Self {
        ChainStore {
            blocks: vec![Block {
                id: GENESIS_ID,
                parent_id: None,
                parent: None,
                creator: Creator::Genesis,
                created_round: 0,
                nonce: 0,
                height: 0,
            }],
            children: vec![Vec::new()],
            skip: vec![BlockRef::GENESIS],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    /// Always false: genesis is present from construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn insert(&mut self, new: NewBlock) -> Result<BlockRef> {
        let parent = self.get(new.parent)?;
        let height = parent.height + 1;
        let parent_id = parent.id;
        let r = BlockRef(self.blocks.len() as u32);
        self.blocks.push(Block {
            id: new.id,
            parent_id: Some(parent_id),
            parent: Some(new.parent),
            creator: new.creator,
            created_round: new.created_round,
            nonce: new.nonce,
            height,
        });
        self.children.push(Vec::new());
        self.children[new.parent.index()].push(r);
        let skip = self.ancestor_at(new.parent, skip_height(height))?;
        self.skip.push(skip);
        Ok(r)
    }

    pub fn get(&self, r: BlockRef) -> Result<&Block> {
        self.blocks.get(r.index()).ok_or(Error::UnknownBlock(r))
    }

    pub fn contains(&self, r: BlockRef) -> bool {
        r.index() < self.blocks.len()
    }

    pub fn height(&self, r: BlockRef) -> Result<u64> {
        self.get(r).map(|b| b.height)
    }

    pub fn children(&self, r: BlockRef) -> Result<&[BlockRef]> {
        self.children.get(r.index()).map(Vec::as_slice).ok_or(Error::UnknownBlock(r))
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockRef, &Block)> {
        self.blocks.iter().enumerate().map(|(i, b)| (BlockRef(i as u32), b))
    }

    /// Ancestor of `r` at `height` (which must not exceed `r`'s height).
    pub fn ancestor_at(&self, r: BlockRef, height: u64) -> Result<BlockRef> {
        let mut walk = r;
        let mut walk_height = self.height(r)?;
        if height > walk_height {
            return Err(Error::Precondition(format!(
                "{r} has height {walk_height}, no ancestor at {height}"
            )));
        }
        while walk_height > height {
            let h_skip = skip_height(walk_height);
            let h_skip_prev = skip_height(walk_height - 1);
            let take_skip = h_skip == height
                || (h_skip > height && !(h_skip_prev + 2 < h_skip && h_skip_prev >= height));
            if take_skip && h_skip < walk_height {
                walk = self.skip[walk.index()];
                walk_height = h_skip;
            } else {
                walk = self.blocks[walk.index()].parent.expect("non-genesis has a parent");
                walk_height -= 1;
            }
        }
        Ok(walk)
    }

    /// Whether `a` lies on the path from genesis to `b` (inclusive).
    pub fn is_ancestor(&self, a: BlockRef, b: BlockRef) -> Result<bool> {
        let ha = self.height(a)?;
        let hb = self.height(b)?;
        Ok(ha <= hb && self.ancestor_at(b, ha)? == a)
    }

    /// Deepest common ancestor of `a` and `b`.
    pub fn common_ancestor(&self, a: BlockRef, b: BlockRef) -> Result<BlockRef> {
        let h = self.height(a)?.min(self.height(b)?);
        let (a, b) = (self.ancestor_at(a, h)?, self.ancestor_at(b, h)?);
        if a == b {
            return Ok(a);
        }
        // Largest height at which both ancestors agree; agreement is monotone.
        let (mut lo, mut hi) = (0u64, h);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.ancestor_at(a, mid)? == self.ancestor_at(b, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.ancestor_at(a, lo)
    }

    /// The path from (excluding) genesis to `head`.
    pub fn chain_of(&self, head: BlockRef) -> Result<Vec<BlockRef>> {
        let mut out = Vec::with_capacity(self.height(head)? as usize);
        let mut cur = head;
        while let Some(parent) = self.blocks[cur.index()].parent {
            out.push(cur);
            cur = parent;
        }
        out.reverse();
        Ok(out)
    }
}

/// Height of the skip target, as used for Bitcoin's block index.
fn skip_height(height: u64) -> u64 {
    fn invert_lowest_one(n: u64) -> u64 {
        n & n.wrapping_sub(1)
    }
    if height < 2 {
        0
    } else if height & 1 == 1 {
        invert_lowest_one(invert_lowest_one(height - 1)) + 1
    } else {
        invert_lowest_one(height)
    }
}

/// `C^⌈k`: the chain with its last `k` blocks removed.
pub fn truncate<T>(chain: &[T], k: usize) -> &[T] {
    &chain[..chain.len().saturating_sub(k)]
}

/// `c1 ⪯ c2`.
pub fn is_prefix<T: PartialEq>(c1: &[T], c2: &[T]) -> bool {
    c1.len() <= c2.len() && c1 == &c2[..c1.len()]
}

/// Longest-chain rule: keep `current` unless some candidate is strictly longer;
/// among equally long winners the first in delivery order is taken.
pub fn select_chain(current: BlockRef, candidates: &[BlockRef], store: &ChainStore) -> Result<BlockRef> {
    let mut best = current;
    let mut best_len = store.height(current)?;
    for &c in candidates {
        let len = store.height(c)?;
        if len > best_len {
            best = c;
            best_len = len;
        }
    }
    Ok(best)
}
