//! Piecewise-constant nonnegative functions of time.

use alloc::vec::Vec;
use core::fmt;

use crate::num::{abs, fmax, fmin, MERGE_EPS};

#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    /// Breakpoints were not strictly increasing.
    Unsorted,
    /// `values.len() + 1 != breakpoints.len()`.
    Shape,
    /// A value was negative or not finite.
    BadValue(f64),
    /// Integration bounds in the wrong order.
    Reversed { a: f64, b: f64 },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Unsorted => write!(f, "breakpoints must be strictly increasing"),
            StepError::Shape => write!(f, "need exactly one value per interval"),
            StepError::BadValue(v) => write!(f, "invalid step value {v}"),
            StepError::Reversed { a, b } => write!(f, "integration bounds reversed: {a} > {b}"),
        }
    }
}

impl core::error::Error for StepError {}

/// Right-continuous step function, zero outside `[breakpoints[0], breakpoints[last])`.
///
/// Always stored in canonical form: neighbouring intervals with equal values
/// are merged and zero-valued intervals at either end are dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    bps: Vec<f64>,
    vals: Vec<f64>,
}

impl StepFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, StepError> {
        if breakpoints.is_empty() && values.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(StepError::Shape);
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StepError::Unsorted);
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(StepError::BadValue(v));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(StepError::Unsorted);
        }
        Ok(Self::canonical(breakpoints, values))
    }

    /// `v` on `[a, b)`. Empty when `a >= b` or `v == 0`.
    pub fn constant(a: f64, b: f64, v: f64) -> Self {
        if !(a < b) || v <= 0.0 {
            return Self::zero();
        }
        Self { bps: alloc::vec![a, b], vals: alloc::vec![v] }
    }

    /// Builds from pieces that are already sorted and non-overlapping,
    /// clamping tiny negative noise to zero.
    pub(crate) fn from_raw(bps: Vec<f64>, vals: Vec<f64>) -> Self {
        let vals = vals.into_iter().map(|v| if v < 0.0 { 0.0 } else { v }).collect();
        Self::canonical(bps, vals)
    }

    fn canonical(bps: Vec<f64>, vals: Vec<f64>) -> Self {
        let mut nb: Vec<f64> = Vec::with_capacity(bps.len());
        let mut nv: Vec<f64> = Vec::with_capacity(vals.len());
        for (i, &v) in vals.iter().enumerate() {
            let (a, b) = (bps[i], bps[i + 1]);
            if !(a < b) {
                continue;
            }
            let v = if v <= MERGE_EPS * 1e-3 { 0.0 } else { v };
            match nv.last() {
                Some(&last) if *nb.last().unwrap() == a && same(last, v) => {
                    *nb.last_mut().unwrap() = b;
                }
                Some(_) if *nb.last().unwrap() < a => {
                    nv.push(0.0);
                    nb.push(a);
                    nv.push(v);
                    nb.push(b);
                }
                Some(_) => {
                    nv.push(v);
                    nb.push(b);
                }
                None => {
                    nb.push(a);
                    nv.push(v);
                    nb.push(b);
                }
            }
        }
        // Merging across a gap may leave equal neighbours of 0.
        let mut out = Self { bps: Vec::new(), vals: Vec::new() };
        for i in 0..nv.len() {
            let (a, b, v) = (nb[i], nb[i + 1], nv[i]);
            if let Some(&last) = out.vals.last() {
                if same(last, v) {
                    *out.bps.last_mut().unwrap() = b;
                    continue;
                }
                out.vals.push(v);
                out.bps.push(b);
            } else {
                out.bps.push(a);
                out.vals.push(v);
                out.bps.push(b);
            }
        }
        while out.vals.last() == Some(&0.0) {
            out.vals.pop();
            out.bps.pop();
        }
        let lead = out.vals.iter().take_while(|v| **v == 0.0).count();
        if lead > 0 {
            out.vals.drain(..lead);
            out.bps.drain(..lead);
        }
        if out.vals.is_empty() {
            out.bps.clear();
        }
        out
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.bps
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    /// `(start, end, value)` for each stored interval.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.vals.iter().enumerate().map(move |(i, &v)| (self.bps[i], self.bps[i + 1], v))
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        if self.vals.is_empty() {
            None
        } else {
            Some((self.bps[0], *self.bps.last().unwrap()))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.vals.is_empty() || t < self.bps[0] || t >= *self.bps.last().unwrap() {
            return 0.0;
        }
        // Last breakpoint <= t.
        let i = self.bps.partition_point(|&b| b <= t) - 1;
        self.vals[i]
    }

    pub fn integrate(&self, a: f64, b: f64) -> Result<f64, StepError> {
        if a > b {
            return Err(StepError::Reversed { a, b });
        }
        Ok(self.integrate_unchecked(a, b))
    }

    pub(crate) fn integrate_unchecked(&self, a: f64, b: f64) -> f64 {
        let mut s = 0.0;
        for (x, y, v) in self.pieces() {
            let lo = fmax(x, a);
            let hi = fmin(y, b);
            if hi > lo {
                s += v * (hi - lo);
            }
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.pieces().map(|(a, b, v)| v * (b - a)).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.vals.iter().copied().fold(0.0, fmax)
    }

    /// Infimum over `[a, b)`, counting uncovered time as 0.
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        let mut m = f64::INFINITY;
        for (x, y, v) in self.window_pieces(a, b) {
            if y > x {
                m = fmin(m, v);
            }
        }
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    /// Pieces covering exactly `[a, b)` including zero-valued gaps.
    pub fn window_pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut cur = a;
        for (x, y, v) in self.pieces() {
            if y <= a || x >= b {
                continue;
            }
            let lo = fmax(x, a);
            let hi = fmin(y, b);
            if lo > cur {
                out.push((cur, lo, 0.0));
            }
            out.push((lo, hi, v));
            cur = hi;
        }
        if cur < b {
            out.push((cur, b, 0.0));
        }
        out
    }

    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let Some((x, y)) = self.support() else { return Self::zero() };
        let (lo, hi) = (fmax(x, a), fmin(y, b));
        if !(lo < hi) {
            return Self::zero();
        }
        Self::from_pieces(&self.window_pieces(lo, hi))
    }

    /// Builds from sorted, non-overlapping `(start, end, value)` pieces.
    /// Gaps between pieces are zero.
    pub fn from_pieces(ps: &[(f64, f64, f64)]) -> Self {
        let mut bps: Vec<f64> = Vec::with_capacity(ps.len() + 1);
        let mut vals = Vec::with_capacity(ps.len());
        for &(a, b, v) in ps {
            if !(a < b) {
                continue;
            }
            match bps.last() {
                None => bps.push(a),
                Some(&e) if e < a => {
                    vals.push(0.0);
                    bps.push(a);
                }
                _ => {}
            }
            let a_eff = *bps.last().unwrap();
            if b > a_eff {
                vals.push(v);
                bps.push(b);
            }
        }
        if vals.is_empty() {
            return Self::zero();
        }
        Self::from_raw(bps, vals)
    }

    /// Applies `f` to every stored value. Uncovered time stays 0.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let vals = self.vals.iter().map(|&v| f(v)).collect();
        Self::from_raw(self.bps.clone(), vals)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        pointwise_sum(&[self.clone(), other.clone()])
    }

    /// `max(0, self - other)`.
    pub fn sub_clamped(&self, other: &Self) -> Self {
        combine(&[self, other], |xs| fmax(0.0, xs[0] - xs[1]))
    }

    /// Integral of `f(value)` over the covered span, skipping uncovered time.
    pub fn integrate_map(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.pieces().map(|(a, b, v)| f(v) * (b - a)).sum()
    }
}

#[inline]
fn same(a: f64, b: f64) -> bool {
    abs(a - b) <= MERGE_EPS * fmax(1.0, fmax(abs(a), abs(b)))
}

/// Evaluates `op` on the values of all inputs over the union of their breakpoints.
pub fn combine(fs: &[&StepFunction], op: impl Fn(&[f64]) -> f64) -> StepFunction {
    let mut bps: Vec<f64> = fs.iter().flat_map(|f| f.bps.iter().copied()).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    if bps.len() < 2 {
        return StepFunction::zero();
    }
    let mut idx = alloc::vec![0usize; fs.len()];
    let mut cur = alloc::vec![0.0; fs.len()];
    let mut vals = Vec::with_capacity(bps.len() - 1);
    for w in bps.windows(2) {
        let t = w[0];
        for (k, f) in fs.iter().enumerate() {
            // Advance to the interval containing t.
            while idx[k] < f.vals.len() && f.bps[idx[k] + 1] <= t {
                idx[k] += 1;
            }
            cur[k] = if idx[k] < f.vals.len() && f.bps[idx[k]] <= t { f.vals[idx[k]] } else { 0.0 };
        }
        vals.push(op(&cur));
    }
    StepFunction::from_raw(bps, vals)
}

/// Pieces of `[a, b)` on which every input is constant, with their values.
pub fn joint_window(fs: &[&StepFunction], a: f64, b: f64) -> Vec<(f64, f64, Vec<f64>)> {
    let mut bps: Vec<f64> = alloc::vec![a, b];
    for f in fs {
        bps.extend(f.bps.iter().copied().filter(|&t| t > a && t < b));
    }
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bps.dedup();
    bps.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], fs.iter().map(|f| f.eval(w[0])).collect()))
        .collect()
}

pub fn pointwise_sum(fs: &[StepFunction]) -> StepFunction {
    match fs.len() {
        0 => StepFunction::zero(),
        1 => fs[0].clone(),
        _ => {
            let refs: Vec<&StepFunction> = fs.iter().collect();
            combine(&refs, |xs| xs.iter().sum())
        }
    }
}
