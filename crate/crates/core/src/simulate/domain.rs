use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::Node;
use crate::scalar::Real;

/// A union of closed strips, optionally cut to |Re 𝔷| < r.
///
/// Lines of the domain are either interior (the path passes through them and
/// the skew rule applies) or boundary lines (hitting them ends the path).
#[derive(Clone, Debug, PartialEq)]
pub struct StripDomain<T> {
    shape: Shape,
    x_bound: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// Ω_v: the strip below v and the p strips above it.
    Star(Node),
    /// Ω_T for a full finite subtree T given by its vertex set.
    Subtree { vertices: BTreeSet<Node>, p: u32 },
}

impl<T: Real> StripDomain<T> {
    /// The star Ω_v, unbounded in x.
    pub fn star(center: Node) -> Self {
        StripDomain { shape: Shape::Star(center), x_bound: None }
    }

    /// The rectangle Ω_{v,r} = Ω_v ∩ {|Re 𝔷| < r}.
    pub fn rect(center: Node, r: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("half width must be positive, got {r}")));
        }
        Ok(StripDomain { shape: Shape::Star(center), x_bound: Some(r) })
    }

    /// Ω_T for a full finite subtree: connected, at least two vertices, and
    /// every vertex has either all p + 1 neighbours in T or exactly one.
    pub fn subtree(vertices: impl IntoIterator<Item = Node>, p: u32) -> Result<Self> {
        let vertices: BTreeSet<Node> = vertices.into_iter().collect();
        if vertices.len() < 2 {
            return Err(Error::Domain("a subtree domain needs at least two vertices".into()));
        }
        for v in &vertices {
            let inside = std::iter::once(v.parent()).chain(v.children(p)).filter(|n| vertices.contains(n)).count();
            if inside != 1 && inside != p as usize + 1 {
                return Err(Error::Domain(format!("subtree is not full at {v}: {inside} neighbours inside")));
            }
        }
        let first = vertices.iter().next().expect("nonempty").clone();
        let mut seen = BTreeSet::from([first.clone()]);
        let mut stack = vec![first];
        while let Some(v) = stack.pop() {
            for n in std::iter::once(v.parent()).chain(v.children(p)) {
                if vertices.contains(&n) && seen.insert(n.clone()) {
                    stack.push(n);
                }
            }
        }
        if seen.len() != vertices.len() {
            return Err(Error::Domain("subtree is not connected".into()));
        }
        Ok(StripDomain { shape: Shape::Subtree { vertices, p }, x_bound: None })
    }

    /// Ω_T for the ball of the given tree radius around `center`.
    pub fn ball(center: &Node, radius: u32, p: u32) -> Result<Self> {
        let mut vertices = BTreeSet::from([center.clone()]);
        let mut frontier = vec![center.clone()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for v in &frontier {
                for n in std::iter::once(v.parent()).chain(v.children(p)) {
                    if vertices.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        Self::subtree(vertices, p)
    }

    /// Cuts the domain to |Re 𝔷| < r.
    pub fn with_x_bound(mut self, r: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("half width must be positive, got {r}")));
        }
        self.x_bound = Some(r);
        Ok(self)
    }

    pub fn x_bound(&self) -> Option<T> {
        self.x_bound
    }

    /// Does the strip S_v below `v` belong to the domain?
    pub fn contains_strip(&self, v: &Node) -> bool {
        match &self.shape {
            Shape::Star(c) => v == c || v.parent() == *c,
            Shape::Subtree { vertices, .. } => vertices.contains(v) && vertices.contains(&v.parent()),
        }
    }

    /// Is L_v crossed freely by the path?
    pub fn is_interior_line(&self, v: &Node) -> bool {
        match &self.shape {
            Shape::Star(c) => v == c,
            Shape::Subtree { vertices, p } => {
                vertices.contains(v) && vertices.contains(&v.parent()) && v.children(*p).all(|w| vertices.contains(&w))
            }
        }
    }

    /// Is L_v part of the horizontal boundary?
    pub fn is_boundary_line(&self, v: &Node) -> bool {
        match &self.shape {
            Shape::Star(c) => *v == c.parent() || v.parent() == *c,
            Shape::Subtree { vertices, .. } => vertices.contains(v) && !self.is_interior_line(v),
        }
    }

    /// Upper endpoints of the strips, in node order.
    pub fn strips(&self, p: u32) -> Vec<Node> {
        match &self.shape {
            Shape::Star(c) => std::iter::once(c.clone()).chain(c.children(p)).collect::<BTreeSet<_>>().into_iter().collect(),
            Shape::Subtree { vertices, .. } => vertices.iter().filter(|v| self.contains_strip(v)).cloned().collect(),
        }
    }

    /// Vertices whose lines are interior, in node order.
    pub fn interior_lines(&self) -> Vec<Node> {
        match &self.shape {
            Shape::Star(c) => vec![c.clone()],
            Shape::Subtree { vertices, .. } => vertices.iter().filter(|v| self.is_interior_line(v)).cloned().collect(),
        }
    }

    /// Vertices whose lines form the horizontal boundary, in node order.
    pub fn boundary_lines(&self, p: u32) -> Vec<Node> {
        match &self.shape {
            Shape::Star(c) => std::iter::once(c.parent()).chain(c.children(p)).collect(),
            Shape::Subtree { vertices, .. } => vertices.iter().filter(|v| !self.is_interior_line(v)).cloned().collect(),
        }
    }

    /// All vertices of the underlying subtree.
    pub fn vertices(&self, p: u32) -> Vec<Node> {
        match &self.shape {
            Shape::Star(c) => {
                let mut all: BTreeSet<Node> = c.children(p).collect();
                all.insert(c.clone());
                all.insert(c.parent());
                all.into_iter().collect()
            }
            Shape::Subtree { vertices, .. } => vertices.iter().cloned().collect(),
        }
    }
}
