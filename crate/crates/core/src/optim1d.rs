//! Gradient-free minimization of scalar objectives that may be `+∞` on a
//! right-hand region.
//!
//! The stack is layered: [`find_feasible`] walks an initial guess out of the
//! degenerate region, [`bracket_minimum`] runs a two-stage exponential search
//! for a bracketing [`Triplet`], and [`golden_section_search`] contracts that
//! bracket down to an absolute tolerance. [`minimize`] chains the last two.
//!
//! All routines evaluate the objective through [`Objective`], which maps
//! `NaN` (and `-∞`) to `+∞` and memoizes values so evaluation counts refer to
//! distinct points only.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Inverse golden ratio, `(√5 − 1)/2`.
pub const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden ratio, `(1 + √5)/2`.
pub const PHI: f64 = 1.618_033_988_749_895;

/// Default cap on back-off steps in [`find_feasible`].
pub const FEASIBLE_CAP: usize = 10_000;

/// Default cap on expansions per stage in [`bracket_minimum`].
pub const BRACKET_CAP: usize = 200;

const GSS_CAP: usize = 10_000;

/// A value in `ℝ ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedValue(f64);

impl ExtendedValue {
    pub const INFINITY: ExtendedValue = ExtendedValue(f64::INFINITY);

    /// Non-finite inputs other than `+∞` (`NaN`, `-∞`) are treated as
    /// degenerate and become `+∞`.
    pub fn new(value: f64) -> Self {
        if value.is_finite() {
            ExtendedValue(value)
        } else {
            Self::INFINITY
        }
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<f64> for ExtendedValue {
    fn from(value: f64) -> Self {
        ExtendedValue::new(value)
    }
}

/// Memoizing wrapper around a scalar objective.
pub struct Objective<F> {
    f: F,
    cache: HashMap<u64, ExtendedValue>,
    calls: usize,
}

impl<F: FnMut(f64) -> f64> Objective<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
            calls: 0,
        }
    }

    pub fn eval(&mut self, x: f64) -> ExtendedValue {
        // +0.0 and -0.0 are the same point
        let key = if x == 0.0 { 0 } else { x.to_bits() };
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        self.calls += 1;
        let v = ExtendedValue::new((self.f)(x));
        self.cache.insert(key, v);
        v
    }

    /// Number of distinct points evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.calls
    }

    /// Seeds the cache with a value known from elsewhere, without counting it.
    pub fn seed(&mut self, x: f64, value: ExtendedValue) {
        let key = if x == 0.0 { 0 } else { x.to_bits() };
        self.cache.entry(key).or_insert(value);
    }
}

/// Bracketing triple `a < b < c` with `f(b) ≤ f(a) < ∞` and `f(b) ≤ f(c)`.
///
/// `f(c) = +∞` is allowed: the open interval `(a, c)` still contains a local
/// minimum of the finite part of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub fa: ExtendedValue,
    pub fb: ExtendedValue,
    pub fc: ExtendedValue,
}

impl Triplet {
    pub fn new(
        (a, b, c): (f64, f64, f64),
        (fa, fb, fc): (ExtendedValue, ExtendedValue, ExtendedValue),
    ) -> Result<Self> {
        if !(a.is_finite() && c.is_finite() && a < b && b < c) {
            return Err(Error::InvalidTriplet(format!(
                "points must satisfy a < b < c, got ({a}, {b}, {c})"
            )));
        }
        if !fa.is_finite() {
            return Err(Error::InvalidTriplet(format!("f(a) must be finite at a = {a}")));
        }
        if !(fb <= fa && fb <= fc) {
            return Err(Error::InvalidTriplet(format!(
                "f(b) = {} must not exceed f(a) = {} or f(c) = {}",
                fb.get(),
                fa.get(),
                fc.get()
            )));
        }
        Ok(Self { a, b, c, fa, fb, fc })
    }

    /// Evaluates `f` at the three points and validates the result.
    pub fn evaluate<F: FnMut(f64) -> f64>(f: &mut Objective<F>, a: f64, b: f64, c: f64) -> Result<Self> {
        let (fa, fb, fc) = (f.eval(a), f.eval(b), f.eval(c));
        Self::new((a, b, c), (fa, fb, fc))
    }

    pub fn width(&self) -> f64 {
        self.c - self.a
    }
}

/// Parameters of the exponential bracket search and the golden-section stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Exponential search coefficient, `c > 0`.
    pub c: f64,
    /// Exponential search exponent, `r > 1`.
    pub r: f64,
    /// Absolute tolerance, `ε > 0`.
    pub epsilon: f64,
    /// Back-off step for [`find_feasible`], `δ ≠ 0`.
    pub delta: f64,
}

impl SearchParams {
    pub fn new(c: f64, r: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let params = Self { c, r, epsilon, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("r must exceed 1, got {}", self.r)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.delta == 0.0 || !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite and nonzero".into()));
        }
        Ok(())
    }
}

/// Returns `x0` if `f(x0) < ∞`, else the first `x0 + k·delta` (`k ≥ 1`)
/// with a finite value.
pub fn find_feasible<F: FnMut(f64) -> f64>(f: &mut Objective<F>, x0: f64, delta: f64) -> Result<f64> {
    find_feasible_capped(f, x0, delta, FEASIBLE_CAP)
}

pub fn find_feasible_capped<F: FnMut(f64) -> f64>(
    f: &mut Objective<F>,
    x0: f64,
    delta: f64,
    cap: usize,
) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter("delta must be finite and nonzero".into()));
    }
    for k in 0..=cap {
        let x = x0 + k as f64 * delta;
        if f.eval(x).is_finite() {
            return Ok(x);
        }
    }
    Err(Error::NoFeasiblePoint { start: x0, steps: cap })
}

/// Two-stage exponential search for a bracketing triplet.
///
/// Stage I probes `x0 + c·r^k` for `k = 0, 1, …` until the value increases;
/// the last point before the increase becomes the anchor and the increasing
/// point the right end. Stage II probes `anchor − c·r^k` until the value
/// increases again; that point is the left end and the last non-increasing
/// point the middle.
pub fn bracket_minimum<F: FnMut(f64) -> f64>(f: &mut Objective<F>, x0: f64, c: f64, r: f64) -> Result<Triplet> {
    bracket_minimum_capped(f, x0, c, r, BRACKET_CAP)
}

pub fn bracket_minimum_capped<F: FnMut(f64) -> f64>(
    f: &mut Objective<F>,
    x0: f64,
    c: f64,
    r: f64,
    cap: usize,
) -> Result<Triplet> {
    if !(c > 0.0 && r > 1.0) {
        return Err(Error::InvalidParameter(format!("need c > 0 and r > 1, got c = {c}, r = {r}")));
    }
    let mut x = x0;
    let mut y = f.eval(x);
    if !y.is_finite() {
        return Err(Error::InvalidParameter(format!("f(x0) must be finite at x0 = {x0}")));
    }

    let mut right = None;
    for k in 0..cap {
        let xp = x0 + c * r.powi(k as i32);
        let yp = f.eval(xp);
        if y < yp {
            right = Some((xp, yp));
            break;
        }
        x = xp;
        y = yp;
    }
    let (x_plus, f_plus) = right.ok_or(Error::BracketNotFound { stage: 1, iterations: cap })?;

    let anchor = x;
    let mut left = None;
    for k in 0..cap {
        let xp = anchor - c * r.powi(k as i32);
        let yp = f.eval(xp);
        if y < yp {
            left = Some((xp, yp));
            break;
        }
        x = xp;
        y = yp;
    }
    let (x_minus, f_minus) = left.ok_or(Error::BracketNotFound { stage: 2, iterations: cap })?;

    Triplet::new((x_minus, x, x_plus), (f_minus, y, f_plus)).map_err(|_| Error::BracketNotFound {
        stage: 2,
        iterations: cap,
    })
}

/// Snapshot of the golden-section state at the start of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GssState {
    pub iteration: usize,
    pub x: [f64; 4],
    pub f: [ExtendedValue; 4],
}

/// Outcome of a golden-section run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GssOutcome {
    pub minimizer: f64,
    pub value: ExtendedValue,
    /// Number of contraction iterations performed.
    pub iterations: usize,
}

/// Contracts a bracketing triplet down to a point `ε`-close to a local minimum.
pub fn golden_section_search<F: FnMut(f64) -> f64>(f: &mut Objective<F>, triplet: &Triplet, epsilon: f64) -> Result<f64> {
    golden_section_search_with(f, triplet, epsilon, |_| {}).map(|o| o.minimizer)
}

/// [`golden_section_search`] with an observer called on every loop state,
/// including the initial one.
///
/// Ties `f2 == f1` shrink the bracket from the right. The loop runs while the
/// two probes are more than `ε/2` apart; when the triplet does not place `b`
/// at a golden point the loop additionally continues while either outer gap
/// `x1 − x0` or `x3 − x2` exceeds `ε`, which keeps the returned point within
/// `ε` of the retained bracket. For golden-positioned probes the extra test
/// never fires.
pub fn golden_section_search_with<F, O>(
    f: &mut Objective<F>,
    triplet: &Triplet,
    epsilon: f64,
    mut observe: O,
) -> Result<GssOutcome>
where
    F: FnMut(f64) -> f64,
    O: FnMut(&GssState),
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let t = Triplet::new((triplet.a, triplet.b, triplet.c), (triplet.fa, triplet.fb, triplet.fc))?;
    f.seed(t.a, t.fa);
    f.seed(t.b, t.fb);
    f.seed(t.c, t.fc);

    let step = 1.0 - INV_PHI;
    let (mut x0, mut x3) = (t.a, t.c);
    let (mut f0, mut f3) = (t.fa, t.fc);
    let (mut x1, mut x2, mut f1, mut f2);
    if (t.c - t.b).abs() > (t.b - t.a).abs() {
        x1 = t.b;
        f1 = t.fb;
        x2 = t.b + step * (t.c - t.b);
        f2 = f.eval(x2);
    } else {
        x2 = t.b;
        f2 = t.fb;
        x1 = t.b - step * (t.b - t.a);
        f1 = f.eval(x1);
    }

    let mut iteration = 0;
    loop {
        observe(&GssState {
            iteration,
            x: [x0, x1, x2, x3],
            f: [f0, f1, f2, f3],
        });
        let probes_apart = (x1 - x2).abs() > epsilon / 2.0;
        let outer_wide = (x1 - x0) > epsilon || (x3 - x2) > epsilon;
        if !(probes_apart || outer_wide) || iteration >= GSS_CAP {
            break;
        }
        if f2 < f1 {
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = f2;
            x2 = INV_PHI * x2 + step * x3;
            f2 = f.eval(x2);
        } else {
            x3 = x2;
            f3 = f2;
            x2 = x1;
            f2 = f1;
            x1 = INV_PHI * x1 + step * x0;
            f1 = f.eval(x1);
        }
        iteration += 1;
    }

    let (minimizer, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(GssOutcome {
        minimizer,
        value,
        iterations: iteration,
    })
}

/// Closed-form golden-section iteration count for a bracket of width `width`
/// whose probes sit at golden points: `⌈log(2(2φ⁻¹ − 1)·width/ε) / log φ⌉`.
pub fn gss_iteration_bound(width: f64, epsilon: f64) -> usize {
    let arg = 2.0 * (2.0 * INV_PHI - 1.0) * width / epsilon;
    if arg <= 1.0 {
        return 0;
    }
    (arg.ln() / PHI.ln()).ceil() as usize
}

/// [`bracket_minimum`] followed by [`golden_section_search`].
pub fn minimize<F: FnMut(f64) -> f64>(f: &mut Objective<F>, x0: f64, params: &SearchParams) -> Result<f64> {
    params.validate()?;
    let triplet = bracket_minimum(f, x0, params.c, params.r)?;
    golden_section_search(f, &triplet, params.epsilon)
}
