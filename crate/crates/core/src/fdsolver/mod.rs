//! Finite-difference Dirichlet solver for Δ_{α,β} on a union of strips cut to |x| ≤ r.
//!
//! Each strip carries a uniform (x, u) grid with nodes x_i = −r + i·h_x,
//! u_j = u_bottom + j·h_u. Strip-interior nodes get the central five-point
//! stencil of e^{2u}∂_xx + ∂_uu + (α−1)∂_u. Nodes on an interior bifurcation
//! line are single unknowns shared by the strip below and the p strips above,
//! with the Kirchhoff condition written with three-point one-sided
//! u-derivatives. All remaining nodes (the sides x = ±r and the boundary
//! lines) carry Dirichlet data; corners are Dirichlet nodes.

mod sparse;

pub use sparse::{bicgstab, CsrBuilder, CsrMatrix, SolveReport};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HtPoint, Node, Params};
use crate::scalar::{from_i64, lit, to_f64, Real};
use crate::simulate::StripDomain;

/// Default relative residual of the iterative solve.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap of the iterative solve.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// JSON description of a grid: `{"r": .., "nx": .., "nu": .., "tree": ["o-", "o", ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r: f64,
    pub nx: usize,
    pub nu: usize,
    /// Vertex set of a full finite subtree.
    pub tree: Vec<Node>,
}

/// Where the value at a grid node comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Unknown(usize),
    /// Index into [`StripGrid::boundary_points`].
    Boundary(usize),
}

/// Discretization of Ω_T ∩ {|x| ≤ r}.
#[derive(Clone, Debug)]
pub struct StripGrid<T> {
    params: Params<T>,
    r: T,
    nx: usize,
    nu: usize,
    vertices: Vec<Node>,
    strips: Vec<Node>,
    lines: Vec<Node>,
    /// slots[s][j * (nx + 1) + i]
    slots: Vec<Vec<Slot>>,
    boundary: Vec<HtPoint<T>>,
    n_unknowns: usize,
}

impl<T: Real> StripGrid<T> {
    /// Grid on the strips of `domain`, which must have an x-bound. `nx` is the
    /// number of x-intervals across [−r, r], `nu` the number of u-intervals per strip.
    pub fn new(domain: &StripDomain<T>, params: &Params<T>, nx: usize, nu: usize) -> Result<Self> {
        let r = domain.x_bound().ok_or_else(|| Error::Domain("the grid needs a bounded x-range".into()))?;
        if nx < 2 || nu < 2 {
            return Err(Error::Domain(format!("need nx >= 2 and nu >= 2, got {nx} and {nu}")));
        }
        let p = params.p();
        let strips = domain.strips(p);
        let lines = domain.interior_lines();
        let line_index: BTreeMap<Node, usize> = lines.iter().cloned().enumerate().map(|(k, v)| (v, k)).collect();
        let per_strip = (nx - 1) * (nu - 1);
        let line_base = strips.len() * per_strip;
        let hx = lit::<T>(2.0) * r / from_i64(nx as i64);
        let hu = params.ln_q() / from_i64(nu as i64);
        let mut boundary = Vec::new();
        let mut slots = Vec::with_capacity(strips.len());
        for (s, v) in strips.iter().enumerate() {
            let lo = from_i64::<T>(v.height() - 1) * params.ln_q();
            let mut row = Vec::with_capacity((nx + 1) * (nu + 1));
            for j in 0..=nu {
                let line = if j == 0 {
                    Some(v.parent())
                } else if j == nu {
                    Some(v.clone())
                } else {
                    None
                };
                for i in 0..=nx {
                    let x = -r + hx * from_i64(i as i64);
                    let side = i == 0 || i == nx;
                    let slot = match (&line, side) {
                        (None, false) => Slot::Unknown(s * per_strip + (j - 1) * (nx - 1) + (i - 1)),
                        (Some(l), false) if line_index.contains_key(l) => {
                            Slot::Unknown(line_base + line_index[l] * (nx - 1) + (i - 1))
                        }
                        (Some(l), _) => {
                            if !(side || domain.is_boundary_line(l)) {
                                return Err(Error::UnclassifiedNode(format!("strip {v}, i={i}, j={j}")));
                            }
                            boundary.push(HtPoint::on_line(if side { r.copysign(x) } else { x }, l.clone(), params));
                            Slot::Boundary(boundary.len() - 1)
                        }
                        (None, true) => {
                            let u = lo + hu * from_i64(j as i64);
                            boundary.push(HtPoint::new(r.copysign(x), u, v.clone(), params)?);
                            Slot::Boundary(boundary.len() - 1)
                        }
                    };
                    row.push(slot);
                }
            }
            slots.push(row);
        }
        let n_unknowns = line_base + lines.len() * (nx - 1);
        Ok(StripGrid {
            params: *params,
            r,
            nx,
            nu,
            vertices: domain.vertices(p),
            strips,
            lines,
            slots,
            boundary,
            n_unknowns,
        })
    }

    /// Grid from its JSON description.
    pub fn from_spec(spec: &GridSpec, params: &Params<T>) -> Result<Self> {
        let domain = StripDomain::subtree(spec.tree.iter().cloned(), params.p())?.with_x_bound(lit(spec.r))?;
        Self::new(&domain, params, spec.nx, spec.nu)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { r: to_f64(self.r), nx: self.nx, nu: self.nu, tree: self.vertices.clone() }
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn hx(&self) -> T {
        lit::<T>(2.0) * self.r / from_i64(self.nx as i64)
    }
    pub fn hu(&self) -> T {
        self.params.ln_q() / from_i64(self.nu as i64)
    }
    /// Upper endpoints of the strips, in strip-id order.
    pub fn strips(&self) -> &[Node] {
        &self.strips
    }
    /// Vertices of the interior lines.
    pub fn interior_lines(&self) -> &[Node] {
        &self.lines
    }
    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }
    /// Points carrying Dirichlet data.
    pub fn boundary_points(&self) -> &[HtPoint<T>] {
        &self.boundary
    }

    pub fn strip_id(&self, v: &Node) -> Option<usize> {
        self.strips.iter().position(|s| s == v)
    }

    pub fn slot(&self, s: usize, i: usize, j: usize) -> Slot {
        self.slots[s][j * (self.nx + 1) + i]
    }

    /// Coordinates (x, u) of node (i, j) of strip `s`.
    pub fn coords(&self, s: usize, i: usize, j: usize) -> (T, T) {
        let lo = from_i64::<T>(self.strips[s].height() - 1) * self.params.ln_q();
        (-self.r + self.hx() * from_i64(i as i64), lo + self.hu() * from_i64(j as i64))
    }

    /// Treebolic point of node (i, j) of strip `s`.
    pub fn point(&self, s: usize, i: usize, j: usize) -> HtPoint<T> {
        let (x, u) = self.coords(s, i, j);
        let v = &self.strips[s];
        if j == 0 {
            HtPoint::on_line(x, v.parent(), &self.params)
        } else if j == self.nu {
            HtPoint::on_line(x, v.clone(), &self.params)
        } else {
            HtPoint::new(x, u, v.clone(), &self.params).expect("grid node inside its strip")
        }
    }

    /// The grid node at `z`, if `z` is one.
    pub fn locate(&self, z: &HtPoint<T>) -> Option<(usize, usize, usize)> {
        let tol = lit::<T>(1e-9);
        let fi = (z.x() + self.r) / self.hx();
        let i = fi.round();
        if (fi - i).abs() > tol || i < T::zero() || i > from_i64(self.nx as i64) {
            return None;
        }
        let i = i.to_usize()?;
        let (s, j) = if z.is_on_line() {
            let v = z.edge();
            match self.strip_id(v) {
                Some(s) => (s, self.nu),
                None => (self.strips.iter().position(|w| w.parent() == *v)?, 0),
            }
        } else {
            let s = self.strip_id(z.edge())?;
            let lo = from_i64::<T>(z.edge().height() - 1) * self.params.ln_q();
            let fj = (z.u() - lo) / self.hu();
            let j = fj.round();
            if (fj - j).abs() > tol {
                return None;
            }
            (s, j.to_usize()?)
        };
        Some((s, i, j))
    }

    fn rho(&self, s: usize, u: T) -> T {
        let h = from_i64::<T>(self.strips[s].height());
        (h * self.params.beta().ln() + self.params.u_drift() * u).exp()
    }
}

/// Assembled operator: A·f_unknown = −B·f_boundary, with B stored as couplings.
#[derive(Clone, Debug)]
pub struct LinearSystem<T> {
    pub matrix: CsrMatrix<T>,
    /// (row, coefficient, boundary index).
    pub couplings: Vec<(usize, T, usize)>,
}

impl<T: Real> LinearSystem<T> {
    /// Right-hand side for Dirichlet data given at the boundary points.
    pub fn rhs(&self, boundary_values: &[T]) -> Vec<T> {
        let mut b = vec![T::zero(); self.matrix.dim()];
        for &(row, c, k) in &self.couplings {
            b[row] = b[row] - c * boundary_values[k];
        }
        b
    }
}

/// Interior rows hold −(e^{2u}δ_xx + δ_uu + (α−1)δ_u); interface rows hold
/// (3 + 3βp) f₀ − 4 f₋₁ + f₋₂ − β Σ_w (4 f_{w,1} − f_{w,2}), the Kirchhoff
/// condition multiplied by 2h_u.
pub fn assemble<T: Real>(grid: &StripGrid<T>) -> Result<LinearSystem<T>> {
    let n = grid.n_unknowns;
    let (nx, nu) = (grid.nx, grid.nu);
    let hx = grid.hx();
    let hu = grid.hu();
    let kappa = grid.params.u_drift();
    let beta = grid.params.beta();
    let two = lit::<T>(2.0);
    let mut builder = CsrBuilder::new(n);
    let mut couplings = Vec::new();
    let mut order: Vec<(usize, usize, usize)> = Vec::with_capacity(n);
    for s in 0..grid.strips.len() {
        for j in 1..nu {
            for i in 1..nx {
                order.push((s, i, j));
            }
        }
    }
    let mut rows = 0usize;
    let add = |builder: &mut CsrBuilder<T>, couplings: &mut Vec<(usize, T, usize)>, row: usize, slot: Slot, c: T| match slot {
        Slot::Unknown(k) => builder.add(k, c),
        Slot::Boundary(b) => couplings.push((row, c, b)),
    };
    for &(s, i, j) in &order {
        let Slot::Unknown(row) = grid.slot(s, i, j) else {
            return Err(Error::UnclassifiedNode(format!("strip {} i={i} j={j}", grid.strips[s])));
        };
        debug_assert_eq!(row, rows);
        let (_, u) = grid.coords(s, i, j);
        let e2 = (two * u).exp();
        let cx = e2 / (hx * hx);
        let cu = T::one() / (hu * hu);
        let cd = kappa / (two * hu);
        add(&mut builder, &mut couplings, row, grid.slot(s, i, j), two * cx + two * cu);
        add(&mut builder, &mut couplings, row, grid.slot(s, i - 1, j), -cx);
        add(&mut builder, &mut couplings, row, grid.slot(s, i + 1, j), -cx);
        add(&mut builder, &mut couplings, row, grid.slot(s, i, j + 1), -(cu + cd));
        add(&mut builder, &mut couplings, row, grid.slot(s, i, j - 1), -(cu - cd));
        builder.finish_row();
        rows += 1;
    }
    let p = grid.params.p();
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    for v in &grid.lines {
        let below = grid.strip_id(v).ok_or_else(|| Error::UnclassifiedNode(format!("no strip below line {v}")))?;
        let above: Vec<usize> = v
            .children(p)
            .map(|w| grid.strip_id(&w).ok_or_else(|| Error::UnclassifiedNode(format!("no strip above line {v}"))))
            .collect::<Result<_>>()?;
        for i in 1..nx {
            let Slot::Unknown(row) = grid.slot(below, i, nu) else {
                return Err(Error::UnclassifiedNode(format!("line {v} node {i}")));
            };
            debug_assert_eq!(row, rows);
            add(&mut builder, &mut couplings, row, Slot::Unknown(row), three + three * beta * grid.params.p_real());
            add(&mut builder, &mut couplings, row, grid.slot(below, i, nu - 1), -four);
            add(&mut builder, &mut couplings, row, grid.slot(below, i, nu - 2), T::one());
            for &a in &above {
                add(&mut builder, &mut couplings, row, grid.slot(a, i, 1), -beta * four);
                add(&mut builder, &mut couplings, row, grid.slot(a, i, 2), beta);
            }
            builder.finish_row();
                rows += 1;
        }
    }
    if rows != n {
        return Err(Error::UnclassifiedNode(format!("{} of {n} unknowns have rows", rows)));
    }
    Ok(LinearSystem { matrix: builder.build(), couplings })
}

/// Grid values of a discrete solve.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution<T> {
    pub unknowns: Vec<T>,
    pub boundary_values: Vec<T>,
    pub residual: f64,
    pub iterations: usize,
}

impl<T: Real> DiscreteSolution<T> {
    pub fn value(&self, slot: Slot) -> T {
        match slot {
            Slot::Unknown(k) => self.unknowns[k],
            Slot::Boundary(b) => self.boundary_values[b],
        }
    }

    pub fn at(&self, grid: &StripGrid<T>, s: usize, i: usize, j: usize) -> T {
        self.value(grid.slot(s, i, j))
    }

    /// Value at a grid node given as a point.
    pub fn at_point(&self, grid: &StripGrid<T>, z: &HtPoint<T>) -> Option<T> {
        grid.locate(z).map(|(s, i, j)| self.at(grid, s, i, j))
    }

    /// Checks min f − tol ≤ interior values ≤ max f + tol, tol relative to the data range.
    pub fn max_principle_holds(&self, tol: f64) -> bool {
        if self.boundary_values.is_empty() {
            return true;
        }
        let lo = self.boundary_values.iter().copied().fold(T::infinity(), T::min);
        let hi = self.boundary_values.iter().copied().fold(T::neg_infinity(), T::max);
        let slack = lit::<T>(tol) * T::one().max(hi.abs()).max(lo.abs());
        self.unknowns.iter().all(|&v| v >= lo - slack && v <= hi + slack)
    }

    /// CSV with header `strip,i,j,x,u,value`, strips in id order and nodes row by row.
    pub fn to_csv(&self, grid: &StripGrid<T>) -> String {
        let mut out = String::from("strip,i,j,x,u,value\n");
        for (s, v) in grid.strips.iter().enumerate() {
            for j in 0..=grid.nu {
                for i in 0..=grid.nx {
                    let (x, u) = grid.coords(s, i, j);
                    let _ = writeln!(out, "{v},{i},{j},{},{},{}", to_f64(x), to_f64(u), to_f64(self.at(grid, s, i, j)));
                }
            }
        }
        out
    }
}

/// Solves the Dirichlet problem with data `f` on the grid boundary.
pub fn solve_dirichlet<T: Real>(grid: &StripGrid<T>, f: impl Fn(&HtPoint<T>) -> T, tol: f64, max_iter: usize) -> Result<DiscreteSolution<T>> {
    let system = assemble(grid)?;
    let boundary_values: Vec<T> = grid.boundary.iter().map(f).collect();
    let rhs = system.rhs(&boundary_values);
    let rep = bicgstab(&system.matrix, &rhs, tol, max_iter)?;
    Ok(DiscreteSolution { unknowns: rep.x, boundary_values, residual: rep.residual, iterations: rep.iterations })
}

/// Discrete exit distribution: boundary points with their weights.
#[derive(Clone, Debug)]
pub struct DiscretePoissonKernel<T> {
    pub points: Vec<HtPoint<T>>,
    pub weights: Vec<T>,
    /// True for points on the horizontal boundary (boundary lines), false on x = ±r.
    pub horizontal: Vec<bool>,
}

impl<T: Real> DiscretePoissonKernel<T> {
    pub fn mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Σ f(z)·weight(z).
    pub fn integrate(&self, f: impl Fn(&HtPoint<T>) -> T) -> T {
        self.points.iter().zip(&self.weights).map(|(z, &w)| f(z) * w).sum()
    }
}

/// Green column for a strip-interior source node and the induced Poisson kernel.
///
/// Solves A·G = e_src/(ρ_src h_x h_u) with zero boundary data, where
/// ρ = β^{𝔥(v)} e^{(α−1)u} is the reference density in (x, u) coordinates, so
/// G approximates the Green function with respect to that measure. The flux
/// of G through each boundary segment, ρ·G/h times the segment length (with
/// the extra factor e^{2u} on the sides x = ±r), is the discrete Poisson
/// kernel; its total mass tends to 1 as the grid is refined.
pub fn discrete_green_column<T: Real>(grid: &StripGrid<T>, source: (usize, usize, usize), tol: f64, max_iter: usize) -> Result<(DiscreteSolution<T>, DiscretePoissonKernel<T>)> {
    let (s0, i0, j0) = source;
    if j0 == 0 || j0 >= grid.nu || i0 == 0 || i0 >= grid.nx {
        return Err(Error::Domain("the source must be a strip-interior node".into()));
    }
    let system = assemble(grid)?;
    let Slot::Unknown(k) = grid.slot(s0, i0, j0) else { unreachable!("interior node") };
    let (hx, hu) = (grid.hx(), grid.hu());
    let (_, u0) = grid.coords(s0, i0, j0);
    let mut rhs = vec![T::zero(); grid.n_unknowns];
    rhs[k] = T::one() / (grid.rho(s0, u0) * hx * hu);
    let rep = bicgstab(&system.matrix, &rhs, tol, max_iter)?;
    let sol = DiscreteSolution {
        unknowns: rep.x,
        boundary_values: vec![T::zero(); grid.boundary.len()],
        residual: rep.residual,
        iterations: rep.iterations,
    };
    let (nx, nu) = (grid.nx, grid.nu);
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);
    let mut kernel = DiscretePoissonKernel { points: Vec::new(), weights: Vec::new(), horizontal: Vec::new() };
    for s in 0..grid.strips.len() {
        for (j_line, j_in) in [(0usize, 1usize), (nu, nu - 1)] {
            for i in 1..nx {
                if let Slot::Boundary(b) = grid.slot(s, i, j_line) {
                    let (_, u) = grid.coords(s, i, j_line);
                    let w = grid.rho(s, u) * sol.at(grid, s, i, j_in) / hu * hx;
                    kernel.points.push(grid.boundary[b].clone());
                    kernel.weights.push(w);
                    kernel.horizontal.push(true);
                }
            }
        }
        for (i_side, i_in) in [(0usize, 1usize), (nx, nx - 1)] {
            for j in 0..=nu {
                let Slot::Boundary(b) = grid.slot(s, i_side, j) else { continue };
                let (_, u) = grid.coords(s, i_side, j);
                let trap = if j == 0 || j == nu { half } else { T::one() };
                let w = grid.rho(s, u) * (two * u).exp() * sol.at(grid, s, i_in, j) / hx * hu * trap;
                kernel.points.push(grid.boundary[b].clone());
                kernel.weights.push(w);
                kernel.horizontal.push(false);
            }
        }
    }
    Ok((sol, kernel))
}
