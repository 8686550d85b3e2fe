//! The homogeneous tree T_p with one distinguished downward end.
//!
//! Vertices are addressed relative to the root `o`: a vertex is the `up`-fold
//! predecessor of `o` followed by a word of child indices. The chain
//! `o, o⁻, o⁻⁻, ...` always uses child index 0, so `o-.0` and `o` are the same
//! vertex; addresses are kept in that canonical form. Because the address is a
//! plain value, the infinite tree is generated on demand without any shared
//! arena, and nodes can be read from any number of threads.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{from_i64, Real};

/// A vertex of T_p.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Node {
    up: u32,
    word: Vec<u32>,
}

impl Node {
    /// The root `o`, with height 0.
    pub fn root() -> Self {
        Node { up: 0, word: Vec::new() }
    }

    /// The k-fold predecessor of the root.
    pub fn root_ancestor(k: u32) -> Self {
        Node { up: k, word: Vec::new() }
    }

    /// Builds `o` followed by `up` predecessor moves and then the given child word.
    pub fn from_parts(up: u32, word: impl IntoIterator<Item = u32>) -> Self {
        let mut n = Node { up, word: word.into_iter().collect() };
        n.canonicalize();
        n
    }

    fn canonicalize(&mut self) {
        let lead = self.word.iter().take(self.up as usize).take_while(|&&c| c == 0).count();
        if lead > 0 {
            self.up -= lead as u32;
            self.word.drain(..lead);
        }
    }

    /// Horocycle index 𝔥(v).
    pub fn height(&self) -> i64 {
        self.word.len() as i64 - self.up as i64
    }

    pub fn parent(&self) -> Node {
        if self.word.is_empty() {
            Node { up: self.up + 1, word: Vec::new() }
        } else {
            let mut w = self.word.clone();
            w.pop();
            Node { up: self.up, word: w }
        }
    }

    /// The `index`-th successor. Indices must be below the branching number of
    /// the tree in use; the node itself does not know p.
    pub fn child(&self, index: u32) -> Node {
        let mut n = Node { up: self.up, word: self.word.clone() };
        n.word.push(index);
        n.canonicalize();
        n
    }

    pub fn children(&self, p: u32) -> impl Iterator<Item = Node> + '_ {
        (0..p).map(move |k| self.child(k))
    }

    /// Position of this vertex among the successors of its predecessor.
    pub fn child_index(&self) -> u32 {
        self.word.last().copied().unwrap_or(0)
    }

    /// The ancestor at the given height (or `self` when `h` equals the height).
    ///
    /// Panics if `h` exceeds the node's height.
    pub fn ancestor_at(&self, h: i64) -> Node {
        let own = self.height();
        assert!(h <= own, "ancestor height {h} above node height {own}");
        let drop = (own - h) as usize;
        if drop <= self.word.len() {
            Node { up: self.up, word: self.word[..self.word.len() - drop].to_vec() }
        } else {
            Node { up: self.up + (drop - self.word.len()) as u32, word: Vec::new() }
        }
    }

    /// Full child word from the `depth`-fold predecessor of `o`.
    fn word_from(&self, depth: u32) -> impl Iterator<Item = u32> + '_ {
        debug_assert!(depth >= self.up);
        std::iter::repeat_n(0u32, (depth - self.up) as usize).chain(self.word.iter().copied())
    }

    /// The confluent v ⋏ v′: the lowest vertex on the geodesic between the two.
    pub fn confluent(&self, other: &Node) -> Node {
        let depth = self.up.max(other.up);
        let common: Vec<u32> = self
            .word_from(depth)
            .zip(other.word_from(depth))
            .take_while(|(a, b)| a == b)
            .map(|(a, _)| a)
            .collect();
        Node::from_parts(depth, common)
    }

    /// Integer graph distance 𝖽_𝕋.
    pub fn distance(&self, other: &Node) -> i64 {
        let c = self.confluent(other).height();
        (self.height() - c) + (other.height() - c)
    }

    /// True when `self` lies on the downward ray from `other` (including equality).
    pub fn is_ancestor_of(&self, other: &Node) -> bool {
        other.height() >= self.height() && other.ancestor_at(self.height()) == *self
    }

    pub fn is_adjacent(&self, other: &Node) -> bool {
        self.distance(other) == 1
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.height()
            .cmp(&other.height())
            .then_with(|| {
                let depth = self.up.max(other.up);
                self.word_from(depth).cmp(other.word_from(depth))
            })
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("o")?;
        for _ in 0..self.up {
            f.write_str("-")?;
        }
        for c in &self.word {
            write!(f, ".{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Node({self})")
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rest = s
            .trim()
            .strip_prefix('o')
            .ok_or_else(|| Error::Parse(format!("node address must start with 'o': {s:?}")))?;
        let up = rest.chars().take_while(|&c| c == '-').count();
        let rest = &rest[up..];
        let mut word = Vec::new();
        if !rest.is_empty() {
            let body = rest
                .strip_prefix('.')
                .ok_or_else(|| Error::Parse(format!("malformed node address {s:?}")))?;
            for part in body.split('.') {
                let k = part
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad child index {part:?} in {s:?}")))?;
                word.push(k);
            }
        }
        Ok(Node::from_parts(up as u32, word))
    }
}

impl Serialize for Node {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point of the metric tree: a position on the edge `[v⁻, v]`, stored as
/// its horocycle value 𝔥(w) ∈ [𝔥(v) − 1, 𝔥(v)].
///
/// Vertices always use the vertex itself as `edge`, with `offset = 𝔥(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreePoint<T> {
    edge: Node,
    offset: T,
}

impl<T: Real> TreePoint<T> {
    pub fn vertex(v: Node) -> Self {
        let offset = from_i64(v.height());
        TreePoint { edge: v, offset }
    }

    /// Point with 𝔥(w) = `offset` on the edge below `edge`.
    pub fn on_edge(edge: Node, offset: T) -> Result<Self> {
        let h = from_i64::<T>(edge.height());
        let snap = T::epsilon() * from_i64(64) * T::one().max(offset.abs());
        if !(offset.is_finite()) || offset > h + snap || offset < h - T::one() - snap {
            return Err(Error::Domain(format!(
                "offset {offset} outside edge [{}, {}] of {edge}",
                h - T::one(),
                h
            )));
        }
        if (offset - h).abs() <= snap {
            return Ok(TreePoint::vertex(edge));
        }
        if (offset - (h - T::one())).abs() <= snap {
            return Ok(TreePoint::vertex(edge.parent()));
        }
        Ok(TreePoint { edge, offset })
    }

    /// Upper endpoint v of the edge `[v⁻, v]` carrying the point (the vertex itself for vertices).
    pub fn edge(&self) -> &Node {
        &self.edge
    }

    /// 𝔥(w).
    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn is_vertex(&self) -> bool {
        self.offset == from_i64(self.edge.height())
    }

    /// Gap s = 𝔥(v) − 𝔥(w) ∈ [0, 1) to the upper endpoint.
    pub fn gap_below_upper(&self) -> T {
        from_i64::<T>(self.edge.height()) - self.offset
    }

    /// Confluent of two tree points, returned as a tree point. When the two
    /// points lie on a common vertical ray this is the lower one.
    pub fn confluent(&self, other: &TreePoint<T>) -> TreePoint<T> {
        let c = self.edge.confluent(&other.edge);
        if c == self.edge && c == other.edge {
            if self.offset <= other.offset {
                self.clone()
            } else {
                other.clone()
            }
        } else if c == self.edge {
            self.clone()
        } else if c == other.edge {
            other.clone()
        } else {
            TreePoint::vertex(c)
        }
    }
}

/// Boundary point of T_p: the bottom end ϖ or an upper end in ∂*T.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeEnd {
    Varpi,
    Upper(UpperEnd),
}

/// An upper end, known through a finite prefix of the geodesic ray it spans.
///
/// The ray starts at `anchor` and follows `word` upward. The word can be
/// extended at any time; computations that need a longer prefix fail with
/// [`Error::InsufficientEndPrefix`] rather than guessing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperEnd {
    anchor: Node,
    word: Vec<u32>,
}

impl UpperEnd {
    pub fn new(anchor: Node, word: Vec<u32>) -> Self {
        UpperEnd { anchor, word }
    }

    /// End reached from the root by following `word`.
    pub fn from_root(word: Vec<u32>) -> Self {
        UpperEnd::new(Node::root(), word)
    }

    pub fn anchor(&self) -> &Node {
        &self.anchor
    }

    pub fn word(&self) -> &[u32] {
        &self.word
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = u32>) {
        self.word.extend(more);
    }

    /// Height of the last materialized ray vertex.
    pub fn reach(&self) -> i64 {
        self.anchor.height() + self.word.len() as i64
    }

    /// The ray vertex at height `h`, if materialized.
    pub fn ray_vertex_at(&self, h: i64) -> Result<Node> {
        let base = self.anchor.height();
        if h > self.reach() {
            return Err(Error::InsufficientEndPrefix { needed: h, reached: self.reach() });
        }
        if h <= base {
            return Ok(self.anchor.ancestor_at(h));
        }
        let mut n = self.anchor.clone();
        for &c in &self.word[..(h - base) as usize] {
            n = n.child(c);
        }
        Ok(n)
    }

    /// v ⋏ ξ, determined once the prefix reaches the height of `v`.
    pub fn confluent_with(&self, v: &Node) -> Result<Node> {
        let top = self.ray_vertex_at(v.height().max(self.anchor.height()))?;
        Ok(v.confluent(&top))
    }
}

impl fmt::Display for TreeEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeEnd::Varpi => f.write_str("varpi"),
            TreeEnd::Upper(e) => {
                write!(f, "{}", e.anchor)?;
                for c in &e.word {
                    write!(f, ".{c}")?;
                }
                f.write_str("...")
            }
        }
    }
}
