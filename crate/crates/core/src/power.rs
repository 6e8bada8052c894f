//! The power function family `P(z) = z^alpha + g`.

use core::fmt;

use crate::num::{fmax, ln, powf};

#[derive(Debug, Clone, PartialEq)]
pub enum PowerError {
    InvalidAlpha(f64),
    InvalidStatic(f64),
    NegativeSpeed(f64),
    /// `alpha == 1` with `g > 0`: `P(s)/s` has no finite minimiser.
    NoCriticalSpeed,
}

impl fmt::Display for PowerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerError::InvalidAlpha(a) => write!(f, "alpha must be >= 1, got {a}"),
            PowerError::InvalidStatic(g) => write!(f, "static power must be >= 0, got {g}"),
            PowerError::NegativeSpeed(z) => write!(f, "speed must be >= 0, got {z}"),
            PowerError::NoCriticalSpeed => write!(f, "no finite critical speed when alpha = 1 and g > 0"),
        }
    }
}

impl core::error::Error for PowerError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFunction {
    alpha: f64,
    g: f64,
}

impl PowerFunction {
    pub fn new(alpha: f64, g: f64) -> Result<Self, PowerError> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(PowerError::InvalidAlpha(alpha));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(PowerError::InvalidStatic(g));
        }
        Ok(Self { alpha, g })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Same exponent without static power.
    pub fn dynamic(&self) -> Self {
        Self { alpha: self.alpha, g: 0.0 }
    }

    pub fn eval(&self, z: f64) -> Result<f64, PowerError> {
        if z < 0.0 {
            return Err(PowerError::NegativeSpeed(z));
        }
        Ok(self.p(z))
    }

    pub fn deriv(&self, z: f64) -> Result<f64, PowerError> {
        if z < 0.0 {
            return Err(PowerError::NegativeSpeed(z));
        }
        Ok(self.dp(z))
    }

    pub fn q_value(&self, z: f64) -> Result<f64, PowerError> {
        if z < 0.0 {
            return Err(PowerError::NegativeSpeed(z));
        }
        Ok(self.q(z))
    }

    /// Unchecked `z^alpha + g`. Negative inputs are clamped to 0.
    #[inline]
    pub fn p(&self, z: f64) -> f64 {
        self.dyn_p(z) + self.g
    }

    /// `z^alpha` alone.
    #[inline]
    pub fn dyn_p(&self, z: f64) -> f64 {
        let z = fmax(z, 0.0);
        if self.alpha == 1.0 {
            z
        } else {
            powf(z, self.alpha)
        }
    }

    /// `alpha z^(alpha-1)`. Finite at 0 for every `alpha >= 1`.
    #[inline]
    pub fn dp(&self, z: f64) -> f64 {
        let z = fmax(z, 0.0);
        if self.alpha == 1.0 {
            1.0
        } else {
            self.alpha * powf(z, self.alpha - 1.0)
        }
    }

    /// Inverse of `dp` on `[dp(0), inf)`.
    #[inline]
    pub fn dp_inv(&self, y: f64) -> f64 {
        if self.alpha == 1.0 || y <= 0.0 {
            return 0.0;
        }
        powf(y / self.alpha, 1.0 / (self.alpha - 1.0))
    }

    /// `alpha (alpha-1) z^(alpha-2)`.
    #[inline]
    pub fn ddp(&self, z: f64) -> f64 {
        let z = fmax(z, 0.0);
        if self.alpha == 1.0 {
            0.0
        } else if self.alpha == 2.0 {
            2.0
        } else {
            self.alpha * (self.alpha - 1.0) * powf(z, self.alpha - 2.0)
        }
    }

    /// `P(z) - z P'(z) = (1-alpha) z^alpha + g`.
    #[inline]
    pub fn q(&self, z: f64) -> f64 {
        self.p(z) - z * self.dp(z)
    }

    /// `Q'(z) = -z P''(z)`.
    #[inline]
    pub fn dq(&self, z: f64) -> f64 {
        -z * self.ddp(z)
    }

    /// Minimiser of `P(s)/s`; 0 when `g == 0`.
    pub fn critical_speed(&self) -> Result<f64, PowerError> {
        if self.g == 0.0 {
            return Ok(0.0);
        }
        if self.alpha == 1.0 {
            return Err(PowerError::NoCriticalSpeed);
        }
        Ok(powf(self.g / (self.alpha - 1.0), 1.0 / self.alpha))
    }

    /// `P(s^c)/s^c`, the best energy per unit of work; 0 when `g == 0`.
    pub fn critical_ratio(&self) -> Result<f64, PowerError> {
        let sc = self.critical_speed()?;
        if sc == 0.0 {
            return Ok(0.0);
        }
        Ok(self.p(sc) / sc)
    }

    /// Smallest `eps` with `z P'((1-eps) z) <= P(z)` for all `z > 0`:
    /// `1 - alpha^(-1/(alpha-1))`, and 0 when `alpha == 1`.
    ///
    /// Static power only relaxes the inequality at small `z`, so the value
    /// does not depend on `g`.
    pub fn epsilon(&self) -> f64 {
        if self.alpha == 1.0 {
            return 0.0;
        }
        1.0 - powf(self.alpha, -1.0 / (self.alpha - 1.0))
    }

    /// The smaller constant `1 - alpha^(-1/alpha)`. It does not satisfy
    /// `z P'((1-eps) z) <= P(z)` for `alpha > 1`; kept for comparison runs.
    pub fn epsilon_root_alpha(&self) -> f64 {
        1.0 - powf(self.alpha, -1.0 / self.alpha)
    }

    /// Smallest `eps` with `z P'((1-eps) z) <= P(z)` for every `z > 0`.
    ///
    /// Bisection over a log grid of `z`; agrees with [`epsilon`](Self::epsilon).
    pub fn epsilon_numeric(&self) -> f64 {
        if self.alpha == 1.0 {
            return 0.0;
        }
        let holds = |eps: f64| {
            (-30..=60).all(|k| {
                let z = powf(2.0, k as f64 * 0.5);
                z * self.dp((1.0 - eps) * z) <= self.p(z) * (1.0 + 1e-12)
            })
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Convex conjugate of the dynamic part, `sup_z (y z - z^alpha)`.
    pub fn conjugate_dyn(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if self.alpha == 1.0 {
            return if y <= 1.0 + 1e-12 { 0.0 } else { f64::INFINITY };
        }
        let a = self.alpha;
        (a - 1.0) * powf(y / a, a / (a - 1.0))
    }

    /// `alpha^alpha`.
    pub fn alpha_pow_alpha(&self) -> f64 {
        powf(self.alpha, self.alpha)
    }

    /// `ln(alpha)`.
    pub fn ln_alpha(&self) -> f64 {
        ln(self.alpha)
    }
}
