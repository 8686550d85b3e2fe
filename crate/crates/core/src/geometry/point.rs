use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::tree::{Node, TreePoint};
use super::Params;
use crate::error::{Error, Result};
use crate::scalar::{from_i64, lit, to_f64, Real};

/// A point 𝔷 = (z, w) of treebolic space in log-height coordinates:
/// `x = Re z`, `u = ln Im z`, and `w` the tree coordinate with 𝔥(w) = u / ln q.
#[derive(Clone, Debug, PartialEq)]
pub struct HtPoint<T> {
    x: T,
    u: T,
    w: TreePoint<T>,
}

impl<T: Real> HtPoint<T> {
    /// The reference point 𝔬 = (i, o).
    pub fn origin() -> Self {
        HtPoint { x: T::zero(), u: T::zero(), w: TreePoint::vertex(Node::root()) }
    }

    /// Point at abscissa `x` and log-height `u` in the strip below `edge`.
    pub fn new(x: T, u: T, edge: Node, params: &Params<T>) -> Result<Self> {
        if !x.is_finite() || !u.is_finite() {
            return Err(Error::Domain(format!("non-finite coordinates ({x}, {u})")));
        }
        let w = TreePoint::on_edge(edge, u / params.ln_q())?;
        let u = if w.is_vertex() { from_i64::<T>(w.edge().height()) * params.ln_q() } else { u };
        Ok(HtPoint { x, u, w })
    }

    /// Point on the bifurcation line L_v.
    pub fn on_line(x: T, v: Node, params: &Params<T>) -> Self {
        let u = from_i64::<T>(v.height()) * params.ln_q();
        HtPoint { x, u, w: TreePoint::vertex(v) }
    }

    /// Rebuilds a point from its wire fields, checking 𝔥(w) = u / ln q.
    pub fn from_parts(x: T, u: T, w: TreePoint<T>, params: &Params<T>) -> Result<Self> {
        let expect = u / params.ln_q();
        if (expect - w.offset()).abs() > lit::<T>(1e-12).max(T::epsilon() * lit(64.0)) * T::one().max(expect.abs()) {
            return Err(Error::Domain(format!(
                "height mismatch: u/ln q = {expect} but tree offset {}",
                w.offset()
            )));
        }
        Ok(HtPoint { x, u, w })
    }

    pub fn x(&self) -> T {
        self.x
    }
    pub fn u(&self) -> T {
        self.u
    }
    /// Im z.
    pub fn y(&self) -> T {
        self.u.exp()
    }
    pub fn w(&self) -> &TreePoint<T> {
        &self.w
    }
    /// Upper endpoint of the edge (equivalently, the strip) carrying the point.
    pub fn edge(&self) -> &Node {
        self.w.edge()
    }
    pub fn is_on_line(&self) -> bool {
        self.w.is_vertex()
    }

    /// Horizontal translation z ↦ z + b, an isometry of HT.
    pub fn translate(&self, b: T) -> Self {
        HtPoint { x: self.x + b, u: self.u, w: self.w.clone() }
    }

    /// Checks the defining constraint to the given tolerance.
    pub fn height_consistent(&self, params: &Params<T>, tol: T) -> bool {
        (self.u / params.ln_q() - self.w.offset()).abs() <= tol
    }

    pub fn to_wire(&self) -> HtPointWire {
        HtPointWire {
            x: to_f64(self.x),
            u: to_f64(self.u),
            w: self.w.edge().clone(),
            t: to_f64(self.w.offset()),
        }
    }

    pub fn from_wire(wire: &HtPointWire, params: &Params<T>) -> Result<Self> {
        let w = TreePoint::on_edge(wire.w.clone(), lit(wire.t))?;
        HtPoint::from_parts(lit(wire.x), lit(wire.u), w, params)
    }
}

/// JSON form `{"x": .., "u": .., "w": "<address>", "t": <offset>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HtPointWire {
    pub x: f64,
    pub u: f64,
    pub w: Node,
    pub t: f64,
}

impl<T: Real> Serialize for HtPoint<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for HtPoint<T> {
    /// Deserializes without parameters: the tree offset `t` is trusted and `u`
    /// is kept as given. Use [`HtPoint::from_wire`] to validate against q.
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = HtPointWire::deserialize(d)?;
        let w = TreePoint::on_edge(wire.w, lit(wire.t)).map_err(serde::de::Error::custom)?;
        Ok(HtPoint { x: lit(wire.x), u: lit(wire.u), w })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params<f64> {
        Params::new(2.0, 2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn line_points_are_vertices() {
        let pr = params();
        let z = HtPoint::on_line(0.5, Node::root().child(1), &pr);
        assert!(z.is_on_line());
        assert!((z.u() - 2f64.ln()).abs() < 1e-15);
        let z2 = HtPoint::new(0.0, 2f64.ln(), Node::root().child(1), &pr).unwrap();
        assert!(z2.is_on_line());
        let below = HtPoint::new(0.0, 0.0, Node::root().child(1), &pr).unwrap();
        assert_eq!(below.edge(), &Node::root());
    }

    #[test]
    fn rejects_height_outside_edge() {
        let pr = params();
        assert!(HtPoint::new(0.0, 2.0, Node::root(), &pr).is_err());
        assert!(HtPoint::new(f64::NAN, 0.0, Node::root(), &pr).is_err());
    }

    #[test]
    fn wire_format() {
        let pr = params();
        let z = HtPoint::new(-1.25, -0.3, Node::root(), &pr).unwrap();
        let json = serde_json::to_string(&z).unwrap();
        assert!(json.starts_with(r#"{"x":-1.25,"u":-0.3,"w":"o","t":"#));
        let back: HtPoint<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, z);
        let wire: HtPointWire = serde_json::from_str(&json).unwrap();
        assert_eq!(HtPoint::from_wire(&wire, &pr).unwrap(), z);
        let bad = HtPointWire { t: 0.0, ..wire };
        assert!(HtPoint::<f64>::from_wire(&bad, &pr).is_err());
    }

    #[test]
    fn translation_moves_only_x() {
        let pr = params();
        let z = HtPoint::new(1.0, 0.0, Node::root(), &pr).unwrap();
        assert_eq!(z.translate(-1.0), HtPoint::origin());
        assert_eq!(z.translate(0.0), z);
    }
}
