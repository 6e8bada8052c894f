//! Exact water-filling of a volume into a window of a step profile.

use alloc::vec::Vec;
use core::fmt;

use crate::num::{abs, fmax, fmin};
use crate::power::PowerFunction;
use crate::step::StepFunction;

#[derive(Debug, Clone, PartialEq)]
pub enum FillError {
    EmptyWindow { r: f64, d: f64 },
    NonPositiveVolume(f64),
    NonMonotonePrice { level: f64 },
    PriceBelowRange { price: f64, floor: f64 },
}

impl fmt::Display for FillError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillError::EmptyWindow { r, d } => write!(f, "empty window [{r}, {d}]"),
            FillError::NonPositiveVolume(p) => write!(f, "volume must be > 0, got {p}"),
            FillError::NonMonotonePrice { level } => write!(f, "price map decreases near level {level}"),
            FillError::PriceBelowRange { price, floor } => {
                write!(f, "price {price} is below the price of level 0 ({floor})")
            }
        }
    }
}

impl core::error::Error for FillError {}

/// Monotone map from water level to marginal price.
pub trait PriceMap {
    fn price(&self, level: f64) -> f64;

    /// Smallest level whose price reaches `price`. The default bisects to
    /// `1e-10` relative accuracy.
    fn level_for_price(&self, price: f64) -> Result<f64, FillError> {
        bisect_level(|l| self.price(l), price)
    }
}

pub(crate) fn bisect_level(pm: impl Fn(f64) -> f64, price: f64) -> Result<f64, FillError> {
    let floor = pm(0.0);
    if price < floor {
        return Err(FillError::PriceBelowRange { price, floor });
    }
    if price == floor {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut n = 0;
    while pm(hi) < price {
        hi *= 2.0;
        n += 1;
        if n > 1100 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        if hi - lo <= 1e-10 * fmax(hi, 1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pm(mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `level -> P'(c * level)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearPrice {
    pub power: PowerFunction,
    pub c: f64,
}

impl PriceMap for LinearPrice {
    fn price(&self, level: f64) -> f64 {
        self.power.dp(self.c * level)
    }

    fn level_for_price(&self, price: f64) -> Result<f64, FillError> {
        let floor = self.power.dp(0.0);
        if price < floor {
            return Err(FillError::PriceBelowRange { price, floor });
        }
        if self.power.alpha() == 1.0 {
            return Ok(if price == floor { 0.0 } else { f64::INFINITY });
        }
        Ok(self.power.dp_inv(price) / self.c)
    }
}

impl<F: Fn(f64) -> f64> PriceMap for F {
    fn price(&self, level: f64) -> f64 {
        self(level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    VolumeMet,
    PriceCapHit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillResult {
    pub increment: StepFunction,
    pub level: f64,
    pub placed: f64,
    pub binding: Binding,
    /// Lowest base value inside the window.
    pub base_min: f64,
}

/// Volume `sum w_i max(0, level - h_i)`.
pub(crate) fn volume_at(pieces: &[(f64, f64, f64)], level: f64) -> f64 {
    pieces.iter().map(|&(a, b, h)| (b - a) * fmax(0.0, level - h)).sum()
}

/// Level at which `volume` fits above `pieces`.
pub(crate) fn level_for_volume(pieces: &[(f64, f64, f64)], volume: f64) -> f64 {
    let mut hs: Vec<(f64, f64)> = pieces.iter().map(|&(a, b, h)| (h, b - a)).collect();
    hs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut width = 0.0;
    let mut filled = 0.0;
    let mut k = 0;
    let mut level = hs[0].0;
    while k < hs.len() {
        // Absorb every piece at the current level.
        while k < hs.len() && hs[k].0 <= level {
            width += hs[k].1;
            k += 1;
        }
        let next = if k < hs.len() { hs[k].0 } else { f64::INFINITY };
        let room = width * (next - level);
        if filled + room >= volume {
            return level + (volume - filled) / width;
        }
        filled += room;
        level = next;
    }
    level + (volume - filled) / width
}

/// Raises the minimum of `base` inside `[r, d)` until `volume` is placed or
/// the price of the level would exceed `price_cap`.
///
/// Ties are broken by raising the whole argmin set uniformly. Reaching the
/// cap exactly when the volume is met counts as met.
pub fn fill(
    base: &StepFunction,
    r: f64,
    d: f64,
    volume: f64,
    price_cap: Option<f64>,
    pm: &dyn PriceMap,
) -> Result<FillResult, FillError> {
    if !(r < d) {
        return Err(FillError::EmptyWindow { r, d });
    }
    if !(volume > 0.0) {
        return Err(FillError::NonPositiveVolume(volume));
    }
    let pieces = base.window_pieces(r, d);
    let base_min = pieces.iter().map(|p| p.2).fold(f64::INFINITY, fmin);
    let need = level_for_volume(&pieces, volume);
    let p_need = pm.price(need);
    let p_min = pm.price(base_min);
    if p_need < p_min - 1e-12 * abs(p_min) {
        return Err(FillError::NonMonotonePrice { level: need });
    }
    let (level, binding) = match price_cap {
        Some(cap) if p_need > cap => {
            let lvl = if p_min > cap {
                base_min
            } else {
                match pm.level_for_price(cap) {
                    Ok(l) => fmin(fmax(l, base_min), need),
                    Err(_) => base_min,
                }
            };
            (lvl, Binding::PriceCapHit)
        }
        _ => (need, Binding::VolumeMet),
    };
    let inc: Vec<(f64, f64, f64)> = pieces.iter().map(|&(a, b, h)| (a, b, fmax(0.0, level - h))).collect();
    let increment = StepFunction::from_pieces(&inc);
    let placed = match binding {
        Binding::VolumeMet => volume,
        Binding::PriceCapHit => volume_at(&pieces, level),
    };
    Ok(FillResult { increment, level, placed, binding, base_min })
}

/// Inverse of `pm` at `price`.
pub fn level_for_price(price: f64, pm: &dyn PriceMap) -> Result<f64, FillError> {
    pm.level_for_price(price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ident() -> LinearPrice {
        LinearPrice { power: PowerFunction::new(2.0, 0.0).unwrap(), c: 1.0 }
    }

    #[test]
    fn fill_flat() {
        let r = fill(&StepFunction::zero(), 0.0, 1.0, 2.0, None, &ident()).unwrap();
        assert_eq!(r.level, 2.0);
        assert_eq!(r.increment, StepFunction::constant(0.0, 1.0, 2.0));
        assert_eq!(r.binding, Binding::VolumeMet);
    }

    #[test]
    fn fill_valley_exactly() {
        let base = StepFunction::constant(0.0, 1.0, 1.0);
        let r = fill(&base, 0.0, 2.0, 1.0, None, &ident()).unwrap();
        assert_eq!(r.level, 1.0);
        assert_eq!(r.increment, StepFunction::constant(1.0, 2.0, 1.0));
    }

    #[test]
    fn fill_above_valley() {
        let base = StepFunction::constant(0.0, 1.0, 1.0);
        let r = fill(&base, 0.0, 2.0, 2.0, None, &ident()).unwrap();
        assert!((r.level - 1.5).abs() < 1e-12);
        assert!((r.increment.eval(0.5) - 0.5).abs() < 1e-12);
        assert!((r.increment.eval(1.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cap_binds() {
        // price 2L, cap 2 => level 1, only half the volume.
        let r = fill(&StepFunction::zero(), 0.0, 1.0, 2.0, Some(2.0), &ident()).unwrap();
        assert_eq!(r.binding, Binding::PriceCapHit);
        assert!((r.level - 1.0).abs() < 1e-12);
        assert!((r.placed - 1.0).abs() < 1e-12);
        // Cap equal to the final price is accepted.
        let r = fill(&StepFunction::zero(), 0.0, 1.0, 2.0, Some(4.0), &ident()).unwrap();
        assert_eq!(r.binding, Binding::VolumeMet);
    }

    #[test]
    fn linear_alpha_one_accepts_at_equality() {
        let pm = LinearPrice { power: PowerFunction::new(1.0, 0.0).unwrap(), c: 1.0 };
        let r = fill(&StepFunction::zero(), 0.0, 1.0, 2.0, Some(1.0), &pm).unwrap();
        assert_eq!(r.binding, Binding::VolumeMet);
        let r = fill(&StepFunction::zero(), 0.0, 1.0, 2.0, Some(0.5), &pm).unwrap();
        assert_eq!(r.binding, Binding::PriceCapHit);
        assert_eq!(r.placed, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(fill(&StepFunction::zero(), 1.0, 1.0, 1.0, None, &ident()), Err(FillError::EmptyWindow { .. })));
        assert!(matches!(fill(&StepFunction::zero(), 0.0, 1.0, 0.0, None, &ident()), Err(FillError::NonPositiveVolume(_))));
        let dec = |l: f64| -l;
        assert!(matches!(fill(&StepFunction::zero(), 0.0, 1.0, 1.0, None, &dec), Err(FillError::NonMonotonePrice { .. })));
    }

    #[test]
    fn level_for_price_examples() {
        assert!((level_for_price(6.0, &ident()).unwrap() - 3.0).abs() < 1e-12);
        let pm = LinearPrice { power: PowerFunction::new(2.0, 0.0).unwrap(), c: 2.0 };
        assert!((level_for_price(8.0, &pm).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(level_for_price(0.0, &pm).unwrap(), 0.0);
        assert!(level_for_price(-1.0, &pm).is_err());
        // Generic bisection agrees with the closed form.
        let f = |l: f64| 4.0 * l;
        assert!((level_for_price(8.0, &f).unwrap() - 2.0).abs() < 1e-9);
    }

    /// Adds volume in small chunks at the current argmin.
    fn chunked(heights: &[(f64, f64)], volume: f64, chunks: usize) -> f64 {
        let mut h: Vec<(f64, f64)> = heights.to_vec();
        let dv = volume / chunks as f64;
        for _ in 0..chunks {
            let mut left = dv;
            while left > 0.0 {
                let m = h.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
                let w: f64 = h.iter().filter(|x| x.0 <= m + 1e-12).map(|x| x.1).sum();
                let next = h.iter().map(|x| x.0).filter(|&x| x > m + 1e-12).fold(f64::INFINITY, f64::min);
                let rise = (left / w).min(next - m);
                for x in h.iter_mut().filter(|x| x.0 <= m + 1e-12) {
                    x.0 = m + rise;
                }
                left -= rise * w;
                if left < 1e-15 {
                    break;
                }
            }
        }
        h.iter().map(|x| x.0).fold(f64::INFINITY, f64::min)
    }

    fn arb_base() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.1f64..2.0, 0.0f64..4.0), 1..6)
    }

    fn build(ps: &[(f64, f64)]) -> (StepFunction, f64) {
        let mut t = 0.0;
        let mut b = vec![0.0];
        let mut v = vec![];
        for &(len, h) in ps {
            t += len;
            b.push(t);
            v.push(h);
        }
        (StepFunction::new(b, v).unwrap(), t)
    }

    proptest! {
        #[test]
        fn matches_chunked_simulation(ps in arb_base(), vol in 0.01f64..10.0) {
            let (base, end) = build(&ps);
            let r = fill(&base, 0.0, end, vol, None, &ident()).unwrap();
            let hs: Vec<(f64, f64)> = base.window_pieces(0.0, end).iter().map(|p| (p.2, p.1 - p.0)).collect();
            let lvl = chunked(&hs, vol, 10_000);
            prop_assert!((r.level - lvl).abs() <= 1e-3);
        }

        #[test]
        fn conserves_and_levels(ps in arb_base(), vol in 0.01f64..10.0) {
            let (base, end) = build(&ps);
            let r = fill(&base, 0.0, end, vol, None, &ident()).unwrap();
            prop_assert!((r.increment.total() - r.placed).abs() <= 1e-9 * vol.max(1.0));
            let after = base.add(&r.increment);
            for (a, b, inc) in r.increment.window_pieces(0.0, end) {
                let m = (a + b) / 2.0;
                if inc > 0.0 {
                    prop_assert!((after.eval(m) - r.level).abs() <= 1e-9 * r.level.max(1.0));
                }
                prop_assert!(after.eval(m) + 1e-9 >= base.eval(m).min(r.level));
            }
        }

        #[test]
        fn monotone_in_volume(ps in arb_base(), v1 in 0.01f64..5.0, dv in 0.0f64..5.0) {
            let (base, end) = build(&ps);
            let a = fill(&base, 0.0, end, v1, None, &ident()).unwrap();
            let b = fill(&base, 0.0, end, v1 + dv, None, &ident()).unwrap();
            prop_assert!(b.level + 1e-12 >= a.level);
        }
    }
}
