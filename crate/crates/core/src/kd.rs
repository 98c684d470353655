//! Four-dimensional kd-tree with insertion, structural deletion, rectangular
//! range queries and scapegoat-style partial rebuilding.
//!
//! The splitting dimension cycles with depth (`depth % 4`). Nodes are ordered
//! by a cyclic superkey `(c[d], c[d+1], c[d+2], c[d+3], id)` where `d` is the
//! node's splitting dimension and `id` a per-tree insertion counter, so equal
//! coordinates never degenerate a median split. On the raw coordinate this
//! gives `left[d] <= node[d] <= right[d]`.
//!
//! Each node also keeps the tight bounding box of its subtree. Range queries
//! skip subtrees whose box is disjoint from the query and report subtrees
//! whose box is contained in it without re-checking individual points.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use thiserror::Error;

use crate::par::Parallelism;

pub type Coord = i64;

/// Lower sentinel: an unbounded range start, or a left-open interval start.
pub const NEG_INF: Coord = i64::MIN;
/// Upper sentinel: an unbounded range end, or the end of an open interval.
pub const POS_INF: Coord = i64::MAX;

/// Balance factor: no child may hold more than this share of its parent's subtree.
pub const ALPHA: f64 = 0.7;

const DIMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Kd4Key(pub [Coord; DIMS]);

impl Kd4Key {
    pub fn new(c0: Coord, c1: Coord, c2: Coord, c3: Coord) -> Self {
        Kd4Key([c0, c1, c2, c3])
    }

    #[inline]
    fn cmp_super(&self, self_id: u64, other: &Kd4Key, other_id: u64, dim: usize) -> Ordering {
        for i in 0..DIMS {
            let d = (dim + i) % DIMS;
            match self.0[d].cmp(&other.0[d]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self_id.cmp(&other_id)
    }
}

impl fmt::Display for Kd4Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

/// A closed interval per dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeBox {
    pub lo: [Coord; DIMS],
    pub hi: [Coord; DIMS],
}

impl RangeBox {
    /// The box covering every representable key.
    pub fn all() -> Self {
        RangeBox {
            lo: [NEG_INF; DIMS],
            hi: [POS_INF; DIMS],
        }
    }

    pub fn point(key: Kd4Key) -> Self {
        RangeBox { lo: key.0, hi: key.0 }
    }

    /// Restrict one dimension to `[lo, hi]`.
    pub fn with(mut self, dim: usize, lo: Coord, hi: Coord) -> Self {
        self.lo[dim] = lo;
        self.hi[dim] = hi;
        self
    }

    /// Restrict one dimension to the single value `v`.
    pub fn with_point(self, dim: usize, v: Coord) -> Self {
        self.with(dim, v, v)
    }

    pub fn validate(&self) -> Result<(), KdError> {
        for d in 0..DIMS {
            if self.lo[d] > self.hi[d] {
                return Err(KdError::MalformedBox {
                    dim: d,
                    lo: self.lo[d],
                    hi: self.hi[d],
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, key: &Kd4Key) -> bool {
        (0..DIMS).all(|d| self.lo[d] <= key.0[d] && key.0[d] <= self.hi[d])
    }

    #[inline]
    fn intersects(&self, lo: &[Coord; DIMS], hi: &[Coord; DIMS]) -> bool {
        (0..DIMS).all(|d| self.lo[d] <= hi[d] && lo[d] <= self.hi[d])
    }

    #[inline]
    fn encloses(&self, lo: &[Coord; DIMS], hi: &[Coord; DIMS]) -> bool {
        (0..DIMS).all(|d| self.lo[d] <= lo[d] && hi[d] <= self.hi[d])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KdError {
    #[error("a tree labelled {0:?} already exists")]
    DuplicateLabel(String),
    #[error("no tree labelled {0:?}")]
    UnknownLabel(String),
    #[error("sentinel value in dimension {dim} of key {key}")]
    SentinelMisuse { dim: usize, key: Kd4Key },
    #[error("malformed range in dimension {dim}: {lo} > {hi}")]
    MalformedBox { dim: usize, lo: Coord, hi: Coord },
}

struct Node<P> {
    key: Kd4Key,
    id: u64,
    payload: P,
    split: u8,
    size: usize,
    lo: [Coord; DIMS],
    hi: [Coord; DIMS],
    left: Option<Box<Node<P>>>,
    right: Option<Box<Node<P>>>,
}

type Link<P> = Option<Box<Node<P>>>;

/// Points reported by a range search, with borrowed payloads.
pub type Hits<'a, P> = Vec<(Kd4Key, &'a P)>;

impl<P> Node<P> {
    fn leaf(key: Kd4Key, id: u64, payload: P, split: u8) -> Self {
        Node {
            key,
            id,
            payload,
            split,
            size: 1,
            lo: key.0,
            hi: key.0,
            left: None,
            right: None,
        }
    }

    /// Recompute size and bounding box from the children.
    fn refresh(&mut self) {
        self.size = 1;
        self.lo = self.key.0;
        self.hi = self.key.0;
        for child in [&self.left, &self.right].into_iter().flatten() {
            self.size += child.size;
            for d in 0..DIMS {
                self.lo[d] = self.lo[d].min(child.lo[d]);
                self.hi[d] = self.hi[d].max(child.hi[d]);
            }
        }
    }

    fn unbalanced(&self) -> bool {
        unbalanced_sizes(self.size, size_of(&self.left), size_of(&self.right))
    }

    fn height(node: &Link<P>) -> usize {
        node.as_ref()
            .map_or(0, |n| 1 + Self::height(&n.left).max(Self::height(&n.right)))
    }
}

/// Counters exposed for instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KdStats {
    pub inserts: u64,
    pub deletes: u64,
    pub queries: u64,
    pub visited_nodes: u64,
    pub rebuilds: u64,
    pub rebuilt_nodes: u64,
}

pub struct KdTree<P> {
    root: Link<P>,
    next_id: u64,
    inserts: u64,
    deletes: u64,
    rebuilds: u64,
    rebuilt_nodes: u64,
    queries: AtomicU64,
    visited: AtomicU64,
}

impl<P> Default for KdTree<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: fmt::Debug> fmt::Debug for KdTree<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KdTree")
            .field("len", &self.len())
            .field("height", &self.height())
            .field("stats", &self.stats())
            .finish()
    }
}

impl<P> KdTree<P> {
    pub fn new() -> Self {
        KdTree {
            root: None,
            next_id: 0,
            inserts: 0,
            deletes: 0,
            rebuilds: 0,
            rebuilt_nodes: 0,
            queries: AtomicU64::new(0),
            visited: AtomicU64::new(0),
        }
    }

    /// Number of live points.
    pub fn len(&self) -> usize {
        self.root.as_ref().map_or(0, |n| n.size)
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn height(&self) -> usize {
        Node::height(&self.root)
    }

    pub fn stats(&self) -> KdStats {
        KdStats {
            inserts: self.inserts,
            deletes: self.deletes,
            queries: self.queries.load(AtomicOrdering::Relaxed),
            visited_nodes: self.visited.load(AtomicOrdering::Relaxed),
            rebuilds: self.rebuilds,
            rebuilt_nodes: self.rebuilt_nodes,
        }
    }

    /// Structure bytes: node footprint times live count. Payload heap bytes are
    /// added by the caller, which knows the payload type.
    pub fn node_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<Node<P>>()
    }

    fn check_key(key: &Kd4Key) -> Result<(), KdError> {
        for (dim, &c) in key.0.iter().enumerate() {
            if c == NEG_INF || (c == POS_INF && dim < DIMS - 1) {
                return Err(KdError::SentinelMisuse { dim, key: *key });
            }
        }
        Ok(())
    }

    /// Insert a point. `c3` may be [`POS_INF`]; no other sentinel is accepted.
    pub fn insert(&mut self, key: Kd4Key, payload: P) -> Result<(), KdError> {
        Self::check_key(&key)?;
        let id = self.next_id;
        self.next_id += 1;
        self.inserts += 1;

        let mut slot = &mut self.root;
        let mut depth = 0usize;
        while let Some(node) = slot {
            node.size += 1;
            for d in 0..DIMS {
                node.lo[d] = node.lo[d].min(key.0[d]);
                node.hi[d] = node.hi[d].max(key.0[d]);
            }
            slot = if key.cmp_super(id, &node.key, node.id, node.split as usize) == Ordering::Less {
                &mut node.left
            } else {
                &mut node.right
            };
            depth += 1;
        }
        *slot = Some(Box::new(Node::leaf(key, id, payload, (depth % DIMS) as u8)));

        // Rebuild the highest subtree on the insertion path that broke the balance rule.
        let mut slot = &mut self.root;
        while let Some(node) = slot.as_ref() {
            if node.unbalanced() {
                self.rebuilds += 1;
                self.rebuilt_nodes += node.size as u64;
                rebuild_slot(slot);
                break;
            }
            if node.id == id {
                break;
            }
            let node = slot.as_mut().unwrap();
            slot = if key.cmp_super(id, &node.key, node.id, node.split as usize) == Ordering::Less {
                &mut node.left
            } else {
                &mut node.right
            };
        }
        Ok(())
    }

    /// Remove every point stored under exactly `key` whose payload satisfies
    /// `pred`. Returns how many were removed.
    pub fn delete(&mut self, key: &Kd4Key, mut pred: impl FnMut(&P) -> bool) -> usize {
        let mut ids = Vec::new();
        collect_exact(&self.root, key, &mut |id, p| {
            if pred(p) {
                ids.push(id)
            }
        });
        for &id in &ids {
            let mut rebuilt = (0u64, 0u64);
            let removed = remove(&mut self.root, key, id, &mut rebuilt, true);
            debug_assert!(removed.is_some());
            self.rebuilds += rebuilt.0;
            self.rebuilt_nodes += rebuilt.1;
            self.deletes += 1;
        }
        ids.len()
    }

    /// All live points inside `range`, in deterministic tree order.
    pub fn range_query(&self, range: &RangeBox) -> Result<Vec<(Kd4Key, &P)>, KdError> {
        self.range_query_counted(range).map(|(v, _)| v)
    }

    /// Like [`range_query`](Self::range_query), also returning the number of
    /// nodes touched, including nodes reported from fully-contained subtrees.
    pub fn range_query_counted(
        &self,
        range: &RangeBox,
    ) -> Result<(Hits<'_, P>, u64), KdError> {
        range.validate()?;
        let mut out = Vec::new();
        let mut visits = 0u64;
        if let Some(root) = self.root.as_deref().filter(|r| range.intersects(&r.lo, &r.hi)) {
            search(root, range, &mut out, &mut visits);
        }
        self.queries.fetch_add(1, AtomicOrdering::Relaxed);
        self.visited.fetch_add(visits, AtomicOrdering::Relaxed);
        Ok((out, visits))
    }

    /// Visit every live point in tree order.
    pub fn for_each(&self, mut f: impl FnMut(&Kd4Key, &P)) {
        fn walk<P>(n: &Link<P>, f: &mut impl FnMut(&Kd4Key, &P)) {
            if let Some(n) = n {
                walk(&n.left, f);
                f(&n.key, &n.payload);
                walk(&n.right, f);
            }
        }
        walk(&self.root, &mut f);
    }

    /// Rebuild the whole tree with median splits.
    pub fn rebuild_all(&mut self) {
        if let Some(root) = &self.root {
            self.rebuilds += 1;
            self.rebuilt_nodes += root.size as u64;
        }
        rebuild_slot(&mut self.root);
    }

    /// Check every structural invariant; used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        fn walk<P>(n: &Node<P>, depth: usize) -> Result<(usize, [Coord; DIMS], [Coord; DIMS]), String> {
            if n.split as usize != depth % DIMS {
                return Err(format!("split {} at depth {depth}", n.split));
            }
            let mut size = 1;
            let (mut lo, mut hi) = (n.key.0, n.key.0);
            for (child, side) in [(&n.left, Ordering::Less), (&n.right, Ordering::Greater)] {
                if let Some(c) = child {
                    let (s, clo, chi) = walk(c, depth + 1)?;
                    let mut bad = None;
                    every(c, &mut |k, id| {
                        if k.cmp_super(id, &n.key, n.id, n.split as usize) != side {
                            bad = Some(*k);
                        }
                    });
                    if let Some(k) = bad {
                        return Err(format!("key {k} on wrong side of {}", n.key));
                    }
                    size += s;
                    for d in 0..DIMS {
                        lo[d] = lo[d].min(clo[d]);
                        hi[d] = hi[d].max(chi[d]);
                    }
                }
            }
            if size != n.size {
                return Err(format!("size {} recorded, {size} actual", n.size));
            }
            if lo != n.lo || hi != n.hi {
                return Err(format!("stale bounding box at {}", n.key));
            }
            if n.unbalanced() {
                return Err(format!("alpha-balance violated at {} (size {})", n.key, n.size));
            }
            Ok((size, lo, hi))
        }
        fn every<P>(n: &Node<P>, f: &mut impl FnMut(&Kd4Key, u64)) {
            f(&n.key, n.id);
            for c in [&n.left, &n.right].into_iter().flatten() {
                every(c, f);
            }
        }
        match &self.root {
            None => Ok(()),
            Some(r) => walk(r, 0).map(|_| ()),
        }
    }
}

impl<P: Send> KdTree<P> {
    /// Build a balanced tree from a batch of points with median splits. With
    /// [`Parallelism::Parallel`] large subtrees are built on the rayon pool.
    pub fn bulk_load(points: Vec<(Kd4Key, P)>, par: Parallelism) -> Result<Self, KdError> {
        for (k, _) in &points {
            Self::check_key(k)?;
        }
        let mut tree = KdTree::new();
        let nodes: Vec<Link<P>> = points
            .into_iter()
            .enumerate()
            .map(|(i, (k, p))| Some(Box::new(Node::leaf(k, i as u64, p, 0))))
            .collect();
        tree.next_id = nodes.len() as u64;
        tree.inserts = nodes.len() as u64;
        tree.root = build(nodes, 0, par);
        Ok(tree)
    }
}

fn collect_exact<P>(n: &Link<P>, key: &Kd4Key, f: &mut impl FnMut(u64, &P)) {
    let Some(n) = n else { return };
    if (0..DIMS).any(|d| key.0[d] < n.lo[d] || key.0[d] > n.hi[d]) {
        return;
    }
    if n.key == *key {
        f(n.id, &n.payload);
    }
    let d = n.split as usize;
    if key.0[d] <= n.key.0[d] {
        collect_exact(&n.left, key, f);
    }
    if key.0[d] >= n.key.0[d] {
        collect_exact(&n.right, key, f);
    }
}

fn search<'a, P>(n: &'a Node<P>, range: &RangeBox, out: &mut Vec<(Kd4Key, &'a P)>, visits: &mut u64) {
    *visits += 1;
    if range.encloses(&n.lo, &n.hi) {
        report(n, out, visits);
        return;
    }
    // Children are pruned on their bounding boxes before being entered.
    if let Some(l) = n.left.as_deref().filter(|l| range.intersects(&l.lo, &l.hi)) {
        search(l, range, out, visits);
    }
    if range.contains(&n.key) {
        out.push((n.key, &n.payload));
    }
    if let Some(r) = n.right.as_deref().filter(|r| range.intersects(&r.lo, &r.hi)) {
        search(r, range, out, visits);
    }
}

fn report<'a, P>(n: &'a Node<P>, out: &mut Vec<(Kd4Key, &'a P)>, visits: &mut u64) {
    if let Some(l) = &n.left {
        *visits += 1;
        report(l, out, visits);
    }
    out.push((n.key, &n.payload));
    if let Some(r) = &n.right {
        *visits += 1;
        report(r, out, visits);
    }
}

fn unbalanced_sizes(size: usize, l: usize, r: usize) -> bool {
    let limit = ALPHA * size as f64;
    l as f64 > limit || r as f64 > limit
}

fn size_of<P>(n: &Link<P>) -> usize {
    n.as_ref().map_or(0, |n| n.size)
}

/// Remove the node with exactly `(key, id)`, which must be present. The
/// highest node on the removal paths that the removal leaves unbalanced is
/// rebuilt; `may_rebuild` is false below a node that will be.
fn remove<P>(
    slot: &mut Link<P>,
    key: &Kd4Key,
    id: u64,
    rebuilt: &mut (u64, u64),
    may_rebuild: bool,
) -> Option<P> {
    let node = slot.as_mut()?;
    let (size, l, r) = (node.size - 1, size_of(&node.left), size_of(&node.right));
    let out = match key.cmp_super(id, &node.key, node.id, node.split as usize) {
        Ordering::Less => {
            let will = unbalanced_sizes(size, l.saturating_sub(1), r);
            remove(&mut node.left, key, id, rebuilt, may_rebuild && !will)
        }
        Ordering::Greater => {
            let will = unbalanced_sizes(size, l, r.saturating_sub(1));
            remove(&mut node.right, key, id, rebuilt, may_rebuild && !will)
        }
        Ordering::Equal => {
            // The replacement comes from the right child if there is one;
            // otherwise the left child moves to the right.
            let will = if r > 0 {
                unbalanced_sizes(size, l, r - 1)
            } else {
                unbalanced_sizes(size, 0, l.saturating_sub(1))
            };
            Some(remove_here(slot, rebuilt, may_rebuild && !will))
        }
    };
    if out.is_some() {
        if let Some(node) = slot.as_mut() {
            node.refresh();
            if may_rebuild && node.unbalanced() {
                rebuilt.0 += 1;
                rebuilt.1 += node.size as u64;
                rebuild_slot(slot);
            }
        }
    }
    out
}

/// Remove the node at `slot`, replacing it with the superkey minimum of a
/// child subtree in the node's splitting dimension.
fn remove_here<P>(slot: &mut Link<P>, rebuilt: &mut (u64, u64), may_rebuild: bool) -> P {
    let is_leaf = slot
        .as_ref()
        .is_some_and(|n| n.left.is_none() && n.right.is_none());
    if is_leaf {
        return slot.take().unwrap().payload;
    }
    let node = slot.as_mut().expect("remove_here on empty slot");
    let dim = node.split as usize;
    let from_right = node.right.is_some();
    let child = if from_right { &mut node.right } else { &mut node.left };
    let (mk, mid) = subtree_min(child.as_ref().unwrap(), dim);
    let mp = remove(child, &mk, mid, rebuilt, may_rebuild).expect("minimum must be present");
    let old = std::mem::replace(&mut node.payload, mp);
    node.key = mk;
    node.id = mid;
    if !from_right {
        node.right = node.left.take();
    }
    node.refresh();
    old
}

fn subtree_min<P>(n: &Node<P>, dim: usize) -> (Kd4Key, u64) {
    let mut best = (n.key, n.id);
    let mut consider = |cand: (Kd4Key, u64)| {
        if cand.0.cmp_super(cand.1, &best.0, best.1, dim) == Ordering::Less {
            best = cand;
        }
    };
    if n.split as usize == dim {
        if let Some(l) = &n.left {
            consider(subtree_min(l, dim));
        }
    } else {
        for c in [&n.left, &n.right].into_iter().flatten() {
            consider(subtree_min(c, dim));
        }
    }
    best
}

fn drain_into<P>(n: Link<P>, out: &mut Vec<Link<P>>) {
    if let Some(mut b) = n {
        let (left, right) = (b.left.take(), b.right.take());
        drain_into(left, out);
        out.push(Some(b));
        drain_into(right, out);
    }
}

/// Rebuild the subtree at `slot` in place. Nodes are detached and relinked,
/// never reallocated.
fn rebuild_slot<P>(slot: &mut Link<P>) {
    let Some(split) = slot.as_ref().map(|n| n.split as usize) else {
        return;
    };
    let mut nodes = Vec::with_capacity(slot.as_ref().unwrap().size);
    drain_into(slot.take(), &mut nodes);
    *slot = build(nodes, split, Parallelism::Sequential);
}

/// Sort key of a detached node plus its index in the node buffer.
type Entry = (Kd4Key, u64, u32);

/// Arrange `entries` so that every subrange's middle element is its superkey
/// median, recursively, cycling the split dimension per level.
fn arrange(entries: &mut [Entry], dim: usize, par: Parallelism) {
    if entries.len() <= 1 {
        return;
    }
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| a.0.cmp_super(a.1, &b.0, b.1, dim));
    let next = (dim + 1) % DIMS;
    let (l, rest) = entries.split_at_mut(mid);
    let r = &mut rest[1..];
    if par.is_parallel() && l.len() + r.len() >= PAR_BUILD_THRESHOLD {
        par.join(|| arrange(l, next, par), || arrange(r, next, par));
    } else {
        arrange(l, next, Parallelism::Sequential);
        arrange(r, next, Parallelism::Sequential);
    }
}

fn link<P>(entries: &[Entry], nodes: &mut [Link<P>], dim: usize) -> Link<P> {
    if entries.is_empty() {
        return None;
    }
    let mid = entries.len() / 2;
    let next = (dim + 1) % DIMS;
    let mut node = nodes[entries[mid].2 as usize].take().expect("each node linked once");
    node.split = dim as u8;
    node.left = link(&entries[..mid], nodes, next);
    node.right = link(&entries[mid + 1..], nodes, next);
    node.refresh();
    Some(node)
}

const PAR_BUILD_THRESHOLD: usize = 8192;

/// Median-split build over detached nodes.
fn build<P>(mut nodes: Vec<Link<P>>, dim: usize, par: Parallelism) -> Link<P> {
    let mut entries: Vec<Entry> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let n = n.as_ref().expect("detached node");
            (n.key, n.id, i as u32)
        })
        .collect();
    arrange(&mut entries, dim, par);
    link(&entries, &mut nodes, dim)
}

/// Opaque handle to a tree in a [`KdRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TreeId(usize);

/// Process-local registry of named trees.
pub struct KdRegistry<P> {
    labels: HashMap<String, TreeId>,
    trees: Vec<Option<KdTree<P>>>,
}

impl<P> Default for KdRegistry<P> {
    fn default() -> Self {
        KdRegistry {
            labels: HashMap::new(),
            trees: Vec::new(),
        }
    }
}

impl<P> KdRegistry<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&mut self, label: &str) -> Result<TreeId, KdError> {
        if self.labels.contains_key(label) {
            return Err(KdError::DuplicateLabel(label.to_string()));
        }
        let id = TreeId(self.trees.len());
        self.trees.push(Some(KdTree::new()));
        self.labels.insert(label.to_string(), id);
        Ok(id)
    }

    pub fn destroy(&mut self, label: &str) -> Result<(), KdError> {
        let id = self
            .labels
            .remove(label)
            .ok_or_else(|| KdError::UnknownLabel(label.to_string()))?;
        self.trees[id.0] = None;
        Ok(())
    }

    pub fn lookup(&self, label: &str) -> Option<TreeId> {
        self.labels.get(label).copied()
    }

    pub fn get(&self, id: TreeId) -> Option<&KdTree<P>> {
        self.trees.get(id.0).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, id: TreeId) -> Option<&mut KdTree<P>> {
        self.trees.get_mut(id.0).and_then(Option::as_mut)
    }
}
