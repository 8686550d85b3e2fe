//! Monte Carlo engine for Brownian motion on treebolic space.
//!
//! The path is simulated in log-height coordinates, where the generator reads
//! e^{2u}∂_xx + ∂_uu + (α−1)∂_u inside a strip. Between lines the u-motion is
//! a Brownian motion with drift, sampled exactly at step times; crossings of
//! a line or of |x| = r inside a step are detected from the Brownian bridge
//! between the step endpoints and localized by bisecting the bridge. On an
//! interior bifurcation line the next excursion goes up with probability
//! βp/(1+βp), into a uniformly chosen child strip.

mod domain;
mod estimate;
mod rng;

pub use domain::StripDomain;
pub use estimate::{estimate_drift, DriftEstimate, EmbeddedStats, McEstimate, MeanAccumulator};
pub use rng::{replica_rng, run_replicas};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HtPoint, Node, Params};
use crate::scalar::{from_i64, lit, to_f64, Real};
use rng::{normal, uniform};

/// Step size, tolerances and stream identity of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Base Euler step in process time.
    pub dt: T,
    /// Crossing localization stops once the bridge spread is below this (in u, and in x for x-bounds).
    pub line_tol: T,
    /// Budget of steps per path.
    pub max_steps: u64,
    pub seed: u64,
    pub replica: u64,
}

impl<T: Real> SimConfig<T> {
    /// dt = (ln q)²/100, line_tol = 1e-6, 10⁷ steps per path.
    pub fn for_params(params: &Params<T>) -> Self {
        let l = params.ln_q();
        SimConfig { dt: l * l / lit(100.0), line_tol: lit(1e-6), max_steps: 10_000_000, seed: 0, replica: 0 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimConfig { seed, ..self }
    }

    pub fn with_dt(self, dt: T) -> Self {
        SimConfig { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.line_tol > T::zero()) {
            return Err(Error::Domain(format!("dt and line_tol must be positive, got {} and {}", self.dt, self.line_tol)));
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Generator of this configuration's (seed, replica) stream.
    pub fn rng(&self) -> rand_chacha::ChaCha8Rng {
        replica_rng(self.seed, self.replica)
    }
}

/// Current position and elapsed time of a path. The random stream is held by
/// the caller and passed to each operation.
#[derive(Clone, Debug, PartialEq)]
pub struct PathState<T> {
    pub point: HtPoint<T>,
    pub time: T,
    pub steps: u64,
}

impl<T: Real> PathState<T> {
    pub fn new(point: HtPoint<T>) -> Self {
        PathState { point, time: T::zero(), steps: 0 }
    }
}

/// Which part of the boundary a path left through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// A boundary bifurcation line.
    #[serde(rename = "hor")]
    Horizontal,
    /// One of the sides |Re 𝔷| = r.
    #[serde(rename = "vert")]
    Vertical,
}

/// First boundary hit of a path.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitSample<T> {
    pub point: HtPoint<T>,
    pub time: T,
    /// The v of the boundary line L_v, for horizontal exits.
    pub hit_line: Option<Node>,
    pub side: Side,
    pub steps: u64,
}

/// JSON-lines form of an [`ExitSample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSampleWire {
    pub x: f64,
    pub u: f64,
    pub w: Node,
    pub t_exit: f64,
    pub side: Side,
}

impl<T: Real> ExitSample<T> {
    pub fn to_wire(&self) -> ExitSampleWire {
        ExitSampleWire {
            x: to_f64(self.point.x()),
            u: to_f64(self.point.u()),
            w: self.point.edge().clone(),
            t_exit: to_f64(self.time),
            side: self.side,
        }
    }
}

/// One step of the embedded chain between successive line visits.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedStep<T> {
    /// +1 when the next line is a successor's, −1 when it is the predecessor's.
    pub delta_level: i8,
    /// Index of the successor reached, for upward steps.
    pub child_index: Option<u32>,
    /// Elapsed process time (generator without a ½ factor).
    pub duration: T,
    pub exit_x: T,
}

/// Direction chosen at a bifurcation line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StripChoice {
    Down,
    Up(u32),
}

/// Position inside the strip below `strip`.
#[derive(Clone, Copy, Debug)]
struct Raw<T> {
    x: T,
    u: T,
    t: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Inside,
    Top,
    Bottom,
    Side,
}

/// Halving cap when localizing a crossing inside one step.
const MAX_HALVINGS: u32 = 40;
/// Crossing probabilities below e^{-CROSS_CUTOFF} are not sampled.
const CROSS_CUTOFF: f64 = 40.0;

/// Barriers of one strip in (x, u).
#[derive(Clone, Copy, Debug)]
struct Bounds<T> {
    lo: T,
    hi: T,
    xb: Option<T>,
}

impl<T: Real> Bounds<T> {
    fn u_out(&self, u: T) -> bool {
        u <= self.lo || u >= self.hi
    }
    fn x_out(&self, x: T) -> bool {
        self.xb.is_some_and(|r| x.abs() >= r)
    }
}

/// Simulator for fixed parameters and configuration.
#[derive(Clone, Debug)]
pub struct Simulator<T> {
    params: Params<T>,
    cfg: SimConfig<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(params: Params<T>, cfg: SimConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Simulator { params, cfg })
    }

    /// Simulator with [`SimConfig::for_params`] and the given seed.
    pub fn with_defaults(params: Params<T>, seed: u64) -> Self {
        Simulator { params, cfg: SimConfig::for_params(&params).with_seed(seed) }
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.cfg
    }

    fn level(&self, v: &Node) -> T {
        from_i64::<T>(v.height()) * self.params.ln_q()
    }

    fn strip_box(&self, strip: &Node, xb: Option<T>) -> Bounds<T> {
        let hi = self.level(strip);
        Bounds { lo: hi - self.params.ln_q(), hi, xb }
    }

    /// One Euler step of a path strictly inside a strip, with no x-bound.
    ///
    /// Returns the vertex of the line reached during the step, if any; the
    /// state is then placed on that line at the localized crossing.
    pub fn step_interior<R: Rng + ?Sized>(&self, state: &mut PathState<T>, rng: &mut R) -> Result<Option<Node>> {
        if state.point.is_on_line() {
            return Err(Error::Domain("step_interior needs a point strictly inside a strip".into()));
        }
        if state.steps >= self.cfg.max_steps {
            return Err(Error::StepBudgetExhausted { steps: state.steps });
        }
        let strip = state.point.edge().clone();
        let bx = self.strip_box(&strip, None);
        let mut raw = Raw { x: state.point.x(), u: state.point.u(), t: state.time };
        let ev = self.raw_step(&mut raw, &bx, rng);
        state.steps += 1;
        state.time = raw.t;
        let line = match ev {
            Event::Inside => None,
            Event::Top => Some(strip.clone()),
            Event::Bottom => Some(strip.parent()),
            Event::Side => unreachable!("no x-bound"),
        };
        state.point = match &line {
            Some(v) => HtPoint::on_line(raw.x, v.clone(), &self.params),
            None => HtPoint::new(raw.x, raw.u, strip, &self.params)?,
        };
        Ok(line)
    }

    /// Skew rule at a bifurcation line: up with probability βp/(1+βp), to a
    /// uniformly chosen successor; down otherwise.
    pub fn resolve_line<R: Rng + ?Sized>(&self, rng: &mut R) -> StripChoice {
        if uniform::<T, _>(rng) < self.params.line_up_probability() {
            StripChoice::Up(rng.random_range(0..self.params.p()))
        } else {
            StripChoice::Down
        }
    }

    /// Advances one Euler step of the diffusion started on a line, as described in [`Simulator::depart`].
    fn depart_raw<R: Rng + ?Sized>(&self, raw: &mut Raw<T>, up: bool, bx: &Bounds<T>, rng: &mut R) -> Event {
        let dt = self.cfg.dt;
        let sq = (lit::<T>(2.0) * dt).sqrt();
        let x1 = raw.x + sq * raw.u.exp() * normal::<T, _>(rng);
        let m = sq * normal::<T, _>(rng).abs();
        let k = self.params.u_drift();
        let width = self.params.ln_q();
        // Map the scale-function displacement m to a u-distance on the chosen side.
        let d = if (k * m).abs() < lit(1e-12) {
            m
        } else if up {
            if k * m >= T::one() {
                T::infinity()
            } else {
                -(-k * m).ln_1p() / k
            }
        } else if -k * m >= T::one() {
            T::infinity()
        } else {
            (k * m).ln_1p() / k
        };
        let (du, far) = if d >= width { (width, true) } else { (d, false) };
        let frac_u = if far { width / d } else { T::one() };
        let u_end = if up { raw.u + du } else { raw.u - du };
        let mut frac = frac_u;
        let mut side = false;
        if let Some(r) = bx.xb {
            if x1.abs() >= r {
                let f = (r - raw.x.abs()).max(T::zero()) / (x1.abs() - raw.x.abs()).max(T::min_positive_value());
                if f <= frac_u {
                    frac = f.min(T::one());
                    side = true;
                }
            }
        }
        let u0 = raw.u;
        raw.t = raw.t + dt * frac;
        if side {
            let du = (d * frac).min(width);
            raw.x = bx.xb.unwrap().copysign(x1);
            raw.u = if up { u0 + du } else { u0 - du }.max(bx.lo).min(bx.hi);
            return Event::Side;
        }
        raw.x = raw.x + (x1 - raw.x) * frac;
        raw.u = u_end;
        if far {
            if up {
                Event::Top
            } else {
                Event::Bottom
            }
        } else {
            Event::Inside
        }
    }

    /// One Euler step from inside a strip box. On a crossing the raw state is
    /// moved to the localized hit point.
    fn raw_step<R: Rng + ?Sized>(&self, raw: &mut Raw<T>, bx: &Bounds<T>, rng: &mut R) -> Event {
        let dt = self.cfg.dt;
        let two = lit::<T>(2.0);
        let ex = raw.u.exp();
        let sq = (two * dt).sqrt();
        let x1 = raw.x + sq * ex * normal::<T, _>(rng);
        let u1 = raw.u + self.params.u_drift() * dt + sq * normal::<T, _>(rng);
        let e2 = ex * ex;
        let mut end = (x1, u1);
        let mut hit = bx.u_out(u1) || bx.x_out(x1);
        if !hit {
            if let Some(reflected) = self.hidden_crossing((raw.x, raw.u), end, dt, e2, bx, rng) {
                end = reflected;
                hit = true;
            }
        }
        if !hit {
            raw.x = x1;
            raw.u = u1;
            raw.t = raw.t + dt;
            return Event::Inside;
        }
        self.localize(raw, end, dt, e2, bx, rng)
    }

    /// Samples whether the bridge from `a` to `b` over time `s` touched a
    /// barrier although both endpoints are inside. On a touch, returns `b`
    /// reflected across the touched barrier: conditionally on the touch, the
    /// path up to the touch has the same law as a bridge to the reflected end.
    fn hidden_crossing<R: Rng + ?Sized>(&self, a: (T, T), b: (T, T), s: T, e2: T, bx: &Bounds<T>, rng: &mut R) -> Option<(T, T)> {
        let cutoff = lit::<T>(CROSS_CUTOFF);
        let mut try_barrier = |d0: T, d1: T, var: T| -> bool {
            let z = d0 * d1 / var;
            z < cutoff && uniform::<T, _>(rng) < (-z).exp()
        };
        if try_barrier(a.1 - bx.lo, b.1 - bx.lo, s) {
            return Some((b.0, lit::<T>(2.0) * bx.lo - b.1));
        }
        if try_barrier(bx.hi - a.1, bx.hi - b.1, s) {
            return Some((b.0, lit::<T>(2.0) * bx.hi - b.1));
        }
        if let Some(r) = bx.xb {
            if try_barrier(r - a.0, r - b.0, s * e2) {
                return Some((lit::<T>(2.0) * r - b.0, b.1));
            }
            if try_barrier(a.0 + r, b.0 + r, s * e2) {
                return Some((-lit::<T>(2.0) * r - b.0, b.1));
            }
        }
        None
    }

    /// Bisects the bridge from `raw` (inside) to `end` (outside) over time `s`
    /// until the first exit is pinned down, then interpolates the hit point.
    fn localize<R: Rng + ?Sized>(&self, raw: &mut Raw<T>, mut end: (T, T), mut s: T, e2: T, bx: &Bounds<T>, rng: &mut R) -> Event {
        let two = lit::<T>(2.0);
        let half = lit::<T>(0.5);
        let mut a = (raw.x, raw.u);
        let mut ta = raw.t;
        let x_scale = if bx.xb.is_some() { e2.sqrt().max(T::one()) } else { T::one() };
        for _ in 0..MAX_HALVINGS {
            if (two * s).sqrt() * x_scale < self.cfg.line_tol {
                break;
            }
            let hs = s * half;
            // Bridge midpoint: variance σ²s/4 with σ² = 2 in u and 2e^{2u₀} in x.
            let sd = (hs).sqrt();
            let mid_x = (a.0 + end.0) * half + sd * e2.sqrt() * normal::<T, _>(rng);
            let mid_u = (a.1 + end.1) * half + sd * normal::<T, _>(rng);
            let mid = (mid_x, mid_u);
            if bx.u_out(mid_u) || bx.x_out(mid_x) {
                end = mid;
            } else if let Some(reflected) = self.hidden_crossing(a, mid, hs, e2, bx, rng) {
                end = reflected;
            } else {
                a = mid;
                ta = ta + hs;
            }
            s = hs;
        }
        // Linear interpolation to the barrier crossed by the final segment; corners go to the side.
        let x_hit = bx.xb.filter(|&r| end.0.abs() >= r);
        if let Some(r) = x_hit {
            let r = r.copysign(end.0);
            let f = ((r - a.0) / (end.0 - a.0)).max(T::zero()).min(T::one());
            raw.x = r;
            raw.u = (a.1 + (end.1 - a.1) * f).max(bx.lo).min(bx.hi);
            raw.t = ta + s * f;
            return Event::Side;
        }
        let (level, ev) = if end.1 >= bx.hi { (bx.hi, Event::Top) } else { (bx.lo, Event::Bottom) };
        let f = if end.1 == a.1 { T::zero() } else { ((level - a.1) / (end.1 - a.1)).max(T::zero()).min(T::one()) };
        raw.x = a.0 + (end.0 - a.0) * f;
        raw.u = level;
        raw.t = ta + s * f;
        ev
    }

    /// First step away from the line L_v into the chosen strip.
    ///
    /// The displacement is drawn as |N|·√(2dt) in the natural scale of the
    /// u-diffusion, measured from the line, then mapped back to a u-distance:
    /// −ln(1 − κm)/κ upward, ln(1 + κm)/κ downward, κ = α − 1. Upward and
    /// downward moves are then symmetric in scale, so the skew probability at
    /// the line carries over unchanged to the probability of reaching the
    /// next line up. Returns the vertex of a line reached during the step.
    pub fn depart<R: Rng + ?Sized>(&self, state: &mut PathState<T>, choice: StripChoice, rng: &mut R) -> Result<Option<Node>> {
        if !state.point.is_on_line() {
            return Err(Error::Domain("depart needs a point on a bifurcation line".into()));
        }
        let v = state.point.edge().clone();
        let (strip, up) = match choice {
            StripChoice::Up(k) => (v.child(k), true),
            StripChoice::Down => (v.clone(), false),
        };
        let bx = self.strip_box(&strip, None);
        let mut raw = Raw { x: state.point.x(), u: state.point.u(), t: state.time };
        let ev = self.depart_raw(&mut raw, up, &bx, rng);
        state.steps += 1;
        state.time = raw.t;
        let line = match ev {
            Event::Top => Some(strip.clone()),
            Event::Bottom => Some(strip.parent()),
            _ => None,
        };
        state.point = match &line {
            Some(w) => HtPoint::on_line(raw.x, w.clone(), &self.params),
            None => HtPoint::new(raw.x, raw.u, strip, &self.params)?,
        };
        Ok(line)
    }

    /// Runs the path from `start` until it leaves `domain`.
    pub fn run_to_exit<R: Rng + ?Sized>(&self, start: &HtPoint<T>, domain: &StripDomain<T>, rng: &mut R) -> Result<ExitSample<T>> {
        let xb = domain.x_bound();
        let mut raw = Raw { x: start.x(), u: start.u(), t: T::zero() };
        if xb.is_some_and(|r| start.x().abs() >= r) {
            return Err(Error::Domain(format!("start x = {} outside the domain", start.x())));
        }
        let mut steps = 0u64;
        let exit_line = |x: T, v: Node, t: T, steps: u64| ExitSample {
            point: HtPoint::on_line(x, v.clone(), &self.params),
            time: t,
            hit_line: Some(v),
            side: Side::Horizontal,
            steps,
        };
        let (mut strip, mut on_line) = if start.is_on_line() {
            let v = start.edge().clone();
            if domain.is_interior_line(&v) {
                (v.clone(), true)
            } else if domain.is_boundary_line(&v) {
                return Ok(exit_line(start.x(), v, T::zero(), 0));
            } else {
                return Err(Error::Domain(format!("start line L_{v} is not in the domain")));
            }
        } else if domain.contains_strip(start.edge()) {
            (start.edge().clone(), false)
        } else {
            return Err(Error::Domain(format!("start strip below {} is not in the domain", start.edge())));
        };
        loop {
            if steps >= self.cfg.max_steps {
                return Err(Error::StepBudgetExhausted { steps });
            }
            steps += 1;
            let ev = if on_line {
                let up = match self.resolve_line(rng) {
                    StripChoice::Up(k) => {
                        strip = strip.child(k);
                        true
                    }
                    StripChoice::Down => false,
                };
                on_line = false;
                let bx = self.strip_box(&strip, xb);
                self.depart_raw(&mut raw, up, &bx, rng)
            } else {
                let bx = self.strip_box(&strip, xb);
                self.raw_step(&mut raw, &bx, rng)
            };
            let line = match ev {
                Event::Inside => continue,
                Event::Side => {
                    return Ok(ExitSample {
                        point: HtPoint::new(raw.x, raw.u, strip, &self.params)?,
                        time: raw.t,
                        hit_line: None,
                        side: Side::Vertical,
                        steps,
                    })
                }
                Event::Top => strip.clone(),
                Event::Bottom => strip.parent(),
            };
            if domain.is_interior_line(&line) {
                raw.u = self.level(&line);
                strip = line;
                on_line = true;
            } else {
                return Ok(exit_line(raw.x, line, raw.t, steps));
            }
        }
    }

    /// Runs from a point of L_v until the first visit to an adjacent line.
    pub fn embedded_step<R: Rng + ?Sized>(&self, start: &HtPoint<T>, rng: &mut R) -> Result<EmbeddedStep<T>> {
        if !start.is_on_line() {
            return Err(Error::Domain("embedded steps start on a bifurcation line".into()));
        }
        let v = start.edge();
        let exit = self.run_to_exit(start, &StripDomain::star(v.clone()), rng)?;
        let w = exit.hit_line.expect("star without x-bound exits horizontally");
        let (delta_level, child_index) = if w.parent() == *v { (1, Some(w.child_index())) } else { (-1, None) };
        Ok(EmbeddedStep { delta_level, child_index, duration: exit.time, exit_x: exit.point.x() })
    }

    /// Exit from the rectangle Ω_{v,r}.
    pub fn sample_exit_rect<R: Rng + ?Sized>(&self, start: &HtPoint<T>, v: &Node, r: T, rng: &mut R) -> Result<ExitSample<T>> {
        self.run_to_exit(start, &StripDomain::rect(v.clone(), r)?, rng)
    }

    /// Exit from Ω_T for a full finite subtree given as a domain.
    pub fn sample_exit_star_union<R: Rng + ?Sized>(&self, start: &HtPoint<T>, domain: &StripDomain<T>, rng: &mut R) -> Result<ExitSample<T>> {
        self.run_to_exit(start, domain, rng)
    }

    /// Monte Carlo estimate of ∫ f dμ^Ω_start from `n` exits.
    pub fn dirichlet_mc<R, F>(&self, start: &HtPoint<T>, domain: &StripDomain<T>, f: F, n: usize, rng: &mut R) -> Result<McEstimate>
    where
        R: Rng + ?Sized,
        F: Fn(&HtPoint<T>) -> T,
    {
        let mut acc = MeanAccumulator::default();
        for _ in 0..n {
            let exit = self.run_to_exit(start, domain, rng)?;
            acc.push(to_f64(f(&exit.point)));
        }
        Ok(acc.estimate())
    }

    /// [`Simulator::dirichlet_mc`] split across replicas starting at the configured replica index.
    pub fn dirichlet_mc_par<F>(&self, start: &HtPoint<T>, domain: &StripDomain<T>, f: F, n: usize, replicas: usize) -> Result<McEstimate>
    where
        F: Fn(&HtPoint<T>) -> T + Sync,
    {
        let parts = run_replicas(n, replicas, self.cfg.seed, self.cfg.replica, |count, rng| {
            let mut acc = MeanAccumulator::default();
            for _ in 0..count {
                let exit = self.run_to_exit(start, domain, rng)?;
                acc.push(to_f64(f(&exit.point)));
            }
            Ok::<_, Error>(acc)
        });
        let mut total = MeanAccumulator::default();
        for part in parts {
            total.merge(&part?);
        }
        Ok(total.estimate())
    }

    /// Exit samples split across replicas, concatenated in replica order.
    pub fn exits_par(&self, start: &HtPoint<T>, domain: &StripDomain<T>, n: usize, replicas: usize) -> Result<Vec<ExitSample<T>>> {
        let parts = run_replicas(n, replicas, self.cfg.seed, self.cfg.replica, |count, rng| {
            (0..count).map(|_| self.run_to_exit(start, domain, rng)).collect::<Result<Vec<_>>>()
        });
        let mut out = Vec::with_capacity(n);
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }

    /// `n` independent embedded steps from 𝔬, split across replicas.
    ///
    /// By the homogeneity of HT under horizontal translations, dilations and
    /// tree automorphisms, the law of an embedded step does not depend on the
    /// starting line or abscissa, so restarting each step from 𝔬 gives the
    /// same statistics as one long chain while keeping coordinates bounded.
    pub fn embedded_stats(&self, n: usize, replicas: usize) -> Result<EmbeddedStats> {
        let start = HtPoint::origin();
        let p = self.params.p();
        let parts = run_replicas(n, replicas, self.cfg.seed, self.cfg.replica, |count, rng| {
            let mut stats = EmbeddedStats::new(p);
            for _ in 0..count {
                stats.push(&self.embedded_step(&start, rng)?);
            }
            Ok::<_, Error>(stats)
        });
        let mut total = EmbeddedStats::new(p);
        for part in parts {
            total.merge(&part?);
        }
        Ok(total)
    }
}
