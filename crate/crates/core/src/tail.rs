//! Tail functions `Π̄(x) = Π(x, ∞)` of ladder jump measures.
//!
//! Three exact shapes (zero, single exponential, single step) cover the
//! closed-form cases; everything else is a piecewise-linear table on
//! increasing knots with an optional exponential tail beyond the last knot.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{adaptive_simpson, integrate_to_infinity};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailFunction<T> {
    Zero,
    /// `scale · e^{-rate x}`.
    Exponential {
        scale: T,
        rate: T,
    },
    /// `level · 1{x < at}`, the tail of `level` times a unit mass at `at`.
    Step {
        level: T,
        at: T,
    },
    /// Linear interpolation through `(knots[i], values[i])`, `knots[0] = 0`.
    /// Beyond the last knot the tail decays like `e^{-tail_rate (x - x_last)}`,
    /// or vanishes when `tail_rate` is `None`.
    Table {
        knots: Vec<T>,
        values: Vec<T>,
        tail_rate: Option<T>,
    },
}

impl<T: Scalar> TailFunction<T> {
    /// Validating table constructor: knots strictly increasing from 0,
    /// values nonnegative and nonincreasing.
    pub fn table(knots: Vec<T>, values: Vec<T>, tail_rate: Option<T>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(invalid("knots", "need at least two knots with matching values"));
        }
        if knots[0] != T::zero() {
            return Err(invalid("knots", "first knot must be 0"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("knots", "knots must be strictly increasing"));
        }
        if values.iter().any(|v| *v < T::zero() || !v.is_finite()) {
            return Err(invalid("values", "tail values must be finite and nonnegative"));
        }
        if let Some(r) = tail_rate {
            if !(r > T::zero()) {
                return Err(invalid("tail_rate", "must be > 0"));
            }
        }
        Ok(TailFunction::Table {
            knots,
            values,
            tail_rate,
        })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TailFunction::Zero => true,
            TailFunction::Exponential { scale, .. } => *scale == T::zero(),
            TailFunction::Step { level, at } => *level == T::zero() || *at <= T::zero(),
            TailFunction::Table { values, .. } => values.iter().all(|v| *v == T::zero()),
        }
    }

    /// `Π̄(x)`; arguments below 0 are read as `0+`.
    pub fn eval(&self, x: T) -> T {
        let x = x.max(T::zero());
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => *scale * (-*rate * x).exp(),
            TailFunction::Step { level, at } => {
                if x < *at {
                    *level
                } else {
                    T::zero()
                }
            }
            TailFunction::Table {
                knots,
                values,
                tail_rate,
            } => {
                let last = knots.len() - 1;
                if x >= knots[last] {
                    return match tail_rate {
                        Some(r) => values[last] * (-*r * (x - knots[last])).exp(),
                        None if x == knots[last] => values[last],
                        None => T::zero(),
                    };
                }
                let i = knots.partition_point(|k| *k <= x).saturating_sub(1).min(last - 1);
                let t = (x - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// Total mass `Π̄(0+)` of the jump measure.
    pub fn total_rate(&self) -> T {
        self.eval(T::zero())
    }

    /// Exponential decay rate of the tail at infinity (`∞` for compact support).
    pub fn decay_rate(&self) -> T {
        match self {
            TailFunction::Exponential { rate, scale } if *scale > T::zero() => *rate,
            TailFunction::Table {
                tail_rate: Some(r),
                values,
                ..
            } if *values.last().expect("non-empty") > T::zero() => *r,
            _ => T::infinity(),
        }
    }

    /// Points where the tail is not smooth, in increasing order.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            TailFunction::Step { at, .. } => vec![*at],
            TailFunction::Table { knots, .. } => knots.clone(),
            _ => Vec::new(),
        }
    }

    /// End of the region handled by piecewise quadrature; beyond it the tail
    /// is zero or a pure exponential.
    fn body_end(&self) -> T {
        match self {
            TailFunction::Step { at, .. } => at.max(T::zero()),
            TailFunction::Table { knots, .. } => *knots.last().expect("non-empty"),
            _ => T::zero(),
        }
    }

    /// `∫_a^b w(y) Π̄(y) dy` for `0 <= a <= b <= body_end`, split at breakpoints.
    fn integrate_body<W: FnMut(T) -> T>(&self, a: T, b: T, mut w: W, tol: T) -> T {
        if b <= a {
            return T::zero();
        }
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|p| *p > a && *p < b));
        cuts.push(b);
        let mut total = T::zero();
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            // Evaluate strictly inside the segment so a step at an end is read
            // from the correct side.
            let mid = (lo + hi) / T::c(2.0);
            let inside = |y: T| y.max(lo).min(hi);
            let f_lo = self.eval_side(inside(lo), mid);
            let f_hi = self.eval_side(inside(hi), mid);
            let mut f = |y: T| {
                let v = if y == lo {
                    f_lo
                } else if y == hi {
                    f_hi
                } else {
                    self.eval(y)
                };
                v * w(y)
            };
            total += adaptive_simpson(&mut f, lo, hi, tol);
        }
        total
    }

    /// One-sided limit of `Π̄` at `y`, taken from the side of `toward`.
    fn eval_side(&self, y: T, toward: T) -> T {
        match self {
            TailFunction::Step { level, at } if y == *at => {
                if toward < *at {
                    *level
                } else {
                    T::zero()
                }
            }
            _ => self.eval(y),
        }
    }

    /// `∫_a^b w(y) Π̄(y) dy` for `0 <= a <= b`, split at breakpoints.
    pub fn integrate_weighted<W: FnMut(T) -> T>(&self, a: T, b: T, mut w: W, tol: T) -> T {
        let a = a.max(T::zero());
        if b <= a {
            return T::zero();
        }
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { .. } => adaptive_simpson(|y| self.eval(y) * w(y), a, b, tol),
            _ => {
                let end = self.body_end();
                let mut total = self.integrate_body(a, b.min(end), &mut w, tol);
                if b > end && self.eval(end) > T::zero() {
                    total += adaptive_simpson(|y| self.eval(y) * w(y), a.max(end), b, tol);
                }
                total
            }
        }
    }

    /// Jump density `-Π̄'(x+)`; `None` when the jump measure has atoms.
    pub fn density(&self, x: T) -> Option<T> {
        let x = x.max(T::zero());
        match self {
            TailFunction::Zero => Some(T::zero()),
            TailFunction::Exponential { scale, rate } => Some(*scale * *rate * (-*rate * x).exp()),
            TailFunction::Step { .. } => None,
            TailFunction::Table {
                knots,
                values,
                tail_rate,
            } => {
                let last = knots.len() - 1;
                if x >= knots[last] {
                    return Some(match tail_rate {
                        Some(r) => *r * self.eval(x),
                        None => T::zero(),
                    });
                }
                let i = knots.partition_point(|k| *k <= x).saturating_sub(1).min(last - 1);
                Some((values[i] - values[i + 1]) / (knots[i + 1] - knots[i]))
            }
        }
    }

    /// Whether the jump measure has a density (no atoms).
    pub fn has_density(&self) -> bool {
        match self {
            TailFunction::Step { .. } => self.is_zero(),
            TailFunction::Table { values, tail_rate, .. } => {
                tail_rate.is_some() || *values.last().expect("non-empty") == T::zero()
            }
            _ => true,
        }
    }

    /// `∫_x^∞ Π̄(y) dy`.
    pub fn integral_from(&self, x: T) -> T {
        let x = x.max(T::zero());
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => *scale * (-*rate * x).exp() / *rate,
            TailFunction::Step { level, at } => *level * (*at - x).max(T::zero()),
            TailFunction::Table {
                knots,
                values,
                tail_rate,
            } => {
                let last = knots.len() - 1;
                let tail_from = |y: T| match tail_rate {
                    Some(r) => values[last] * (-*r * (y - knots[last])).exp() / *r,
                    None => T::zero(),
                };
                if x >= knots[last] {
                    return tail_from(x);
                }
                let mut total = tail_from(knots[last]);
                for i in (0..last).rev() {
                    let (k0, k1) = (knots[i], knots[i + 1]);
                    if k1 <= x {
                        break;
                    }
                    let lo = x.max(k0);
                    total += (k1 - lo) * (self.eval(lo) + values[i + 1]) / T::c(2.0);
                }
                total
            }
        }
    }

    /// `∫_0^∞ Π̄_H(y) dy`, the mean jump contribution per unit ladder time.
    pub fn jump_mass(&self) -> T {
        self.integral_from(T::zero())
    }

    /// `∫_a^b Π̄(y) dy`.
    pub fn integral(&self, a: T, b: T) -> T {
        if b <= a {
            return T::zero();
        }
        match self {
            TailFunction::Exponential { scale, rate } => {
                let a = a.max(T::zero());
                let b = b.max(T::zero());
                *scale * (-*rate * a).exp() * (-(-*rate * (b - a)).exp_m1()) / *rate
            }
            _ => self.integral_from(a) - self.integral_from(b),
        }
    }

    /// `∫_0^∞ y^r Π(dy) = r ∫_0^∞ y^{r-1} Π̄(y) dy` for `r >= 1`.
    pub fn moment(&self, r: usize) -> T {
        if r == 0 {
            return self.total_rate();
        }
        let rf = T::from_count(r);
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => {
                *scale * crate::numerics::factorial::<T>(r) / rate.powi(r as i32)
            }
            TailFunction::Step { level, at } => *level * at.max(T::zero()).powi(r as i32),
            TailFunction::Table { .. } => self
                .integrate_against(|y| rf * y.powi(r as i32 - 1), T::c(1e-13))
                .unwrap_or_else(|_| T::infinity()),
        }
    }

    /// `∫_0^∞ (e^{θy} - 1) Π(dy) = θ ∫_0^∞ e^{θy} Π̄(y) dy` for `θ > 0`.
    pub fn exp_moment(&self, theta: T) -> Result<T> {
        let decay = self.decay_rate();
        if theta >= decay {
            return Err(Error::ExpMomentDiverges {
                context: "ladder jump tail",
                rate: theta.as_f64(),
                bound: decay.as_f64(),
            });
        }
        Ok(match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => *scale * theta / (*rate - theta),
            TailFunction::Step { level, at } => *level * (theta * at.max(T::zero())).exp_m1(),
            TailFunction::Table { .. } => theta * self.integrate_against(|y| (theta * y).exp(), T::c(1e-12))?,
        })
    }

    /// `∫_0^∞ w(y) Π̄(y) dy` by adaptive quadrature.
    pub fn integrate_against<W: FnMut(T) -> T>(&self, mut w: W, tol: T) -> Result<T> {
        match self {
            TailFunction::Zero => Ok(T::zero()),
            TailFunction::Exponential { rate, .. } => {
                let len = rate.recip();
                integrate_to_infinity(|y| w(y) * self.eval(y), T::zero(), len, tol, T::c(1e6) * len)
                    .ok_or_else(|| diverges(*rate))
            }
            TailFunction::Step { at, .. } => Ok(self.integrate_body(T::zero(), *at, w, tol)),
            TailFunction::Table { tail_rate, .. } => {
                let end = self.body_end();
                let body = self.integrate_body(T::zero(), end, &mut w, tol);
                let tail = match tail_rate {
                    Some(r) if self.eval(end) > T::zero() => {
                        let len = r.recip();
                        integrate_to_infinity(|y| w(y) * self.eval(y), end, len, tol, T::c(1e6) * len)
                            .ok_or_else(|| diverges(*r))?
                    }
                    _ => T::zero(),
                };
                Ok(body + tail)
            }
        }
    }

    /// `∫_0^Δ Π̄(c+t)(1 - t/Δ) dt`: weight of the right half of a linear hat.
    pub fn hat_right(&self, c: T, step: T) -> T {
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => {
                let x = *rate * step;
                // (x - 1 + e^{-x}) / (k² Δ) = Δ (1/2 - x/6 + x²/24 - ...)
                let shape = if x < T::c(1e-2) {
                    step * (T::c(0.5) - x / T::c(6.0) + x * x / T::c(24.0) - x * x * x / T::c(120.0))
                } else {
                    (x + (-x).exp_m1()) / (*rate * x)
                };
                *scale * (-*rate * c).exp() * shape
            }
            _ => self.hat_generic(c, c + step, |y| T::one() - (y - c) / step),
        }
    }

    /// `∫_{-Δ}^0 Π̄(c+t)(1 + t/Δ) dt` for `c >= Δ`: left half of a hat.
    pub fn hat_left(&self, c: T, step: T) -> T {
        match self {
            TailFunction::Zero => T::zero(),
            TailFunction::Exponential { scale, rate } => {
                let x = *rate * step;
                // (e^{x} - 1 - x) / (k² Δ) = Δ (1/2 + x/6 + x²/24 + ...)
                let shape = if x < T::c(1e-2) {
                    step * (T::c(0.5) + x / T::c(6.0) + x * x / T::c(24.0) + x * x * x / T::c(120.0))
                } else {
                    (x.exp_m1() - x) / (*rate * x)
                };
                *scale * (-*rate * c).exp() * shape
            }
            _ => self.hat_generic(c - step, c, |y| T::one() - (c - y) / step),
        }
    }

    fn hat_generic<W: FnMut(T) -> T>(&self, a: T, b: T, w: W) -> T {
        let tol = T::c(1e-15) * (T::one() + self.total_rate());
        self.integrate_weighted(a, b, w, tol)
    }

    /// Second differences of `log Π̄` on `grid` are all `>= -tol`.
    /// Grid points where the tail vanishes end the check (a vanishing tail
    /// is log-convex only if it is identically zero beyond that point).
    pub fn log_convex_on(&self, grid: &[T], tol: T) -> bool {
        let logs: Vec<Option<T>> = grid
            .iter()
            .map(|x| {
                let v = self.eval(*x);
                (v > T::zero()).then(|| v.ln())
            })
            .collect();
        if let Some(first_zero) = logs.iter().position(Option::is_none) {
            if grid[first_zero..].iter().any(|x| self.eval(*x) > T::zero()) {
                return false;
            }
            // A tail that drops to zero at a finite point is not log-convex
            // unless it was zero from the start.
            if first_zero > 0 {
                return false;
            }
            return true;
        }
        logs.windows(3).zip(grid.windows(3)).all(|(l, x)| {
            let (l0, l1, l2) = (l[0].unwrap(), l[1].unwrap(), l[2].unwrap());
            let s1 = (l1 - l0) / (x[1] - x[0]);
            let s2 = (l2 - l1) / (x[2] - x[1]);
            s2 - s1 >= -tol
        })
    }

    pub fn scaled(&self, c: T) -> Self {
        match self {
            TailFunction::Zero => TailFunction::Zero,
            TailFunction::Exponential { scale, rate } => TailFunction::Exponential {
                scale: *scale * c,
                rate: *rate,
            },
            TailFunction::Step { level, at } => TailFunction::Step {
                level: *level * c,
                at: *at,
            },
            TailFunction::Table {
                knots,
                values,
                tail_rate,
            } => TailFunction::Table {
                knots: knots.clone(),
                values: values.iter().map(|v| *v * c).collect(),
                tail_rate: *tail_rate,
            },
        }
    }
}

fn diverges(rate: impl Scalar) -> Error {
    Error::ExpMomentDiverges {
        context: "tail quadrature",
        rate: f64::NAN,
        bound: rate.as_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_tail() -> TailFunction<f64> {
        TailFunction::Exponential { scale: 3.0, rate: 1.0 }
    }

    fn table_of_exp() -> TailFunction<f64> {
        let knots: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.005).collect();
        let values = knots.iter().map(|x| 3.0 * (-x).exp()).collect();
        TailFunction::table(knots, values, Some(1.0)).unwrap()
    }

    #[test]
    fn closed_forms() {
        let t = exp_tail();
        assert_relative_eq!(t.jump_mass(), 3.0);
        assert_relative_eq!(t.moment(1), 3.0);
        assert_relative_eq!(t.moment(2), 6.0);
        assert_relative_eq!(t.exp_moment(0.5).unwrap(), 3.0);
        assert!(t.exp_moment(1.0).is_err());
        assert_relative_eq!(
            t.integral(1.0, 2.0),
            3.0 * ((-1f64).exp() - (-2f64).exp()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn table_agrees_with_exponential() {
        let t = table_of_exp();
        let e = exp_tail();
        assert_relative_eq!(t.jump_mass(), e.jump_mass(), epsilon = 1e-5);
        assert_relative_eq!(t.moment(2), e.moment(2), epsilon = 1e-4);
        assert_relative_eq!(t.exp_moment(0.5).unwrap(), 3.0, epsilon = 1e-4);
        assert_relative_eq!(t.eval(25.0), e.eval(25.0), max_relative = 1e-9);
        for c in [0.0, 0.5, 3.0] {
            assert_relative_eq!(t.hat_right(c, 0.01), e.hat_right(c, 0.01), epsilon = 1e-7);
        }
        assert_relative_eq!(t.hat_left(1.0, 0.01), e.hat_left(1.0, 0.01), epsilon = 1e-7);
    }

    #[test]
    fn step_tail() {
        let s = TailFunction::Step { level: 2.0, at: 1.5 };
        assert_eq!(s.eval(1.0), 2.0);
        assert_eq!(s.eval(1.5), 0.0);
        assert_eq!(s.jump_mass(), 3.0);
        assert_eq!(s.moment(2), 4.5);
        // hat straddling the step: ∫_{1.4}^{1.5} 2(1 - (y-1.4)/0.2) dy
        assert_relative_eq!(s.hat_right(1.4, 0.2), 2.0 * (0.1 - 0.01 / 0.4), epsilon = 1e-12);
        assert!(!s.log_convex_on(&[0.0, 1.0, 2.0, 3.0], 1e-9));
    }

    #[test]
    fn hat_weights_match_quadrature() {
        let e = exp_tail();
        for (c, d) in [(0.0, 1e-3), (2.0, 0.3), (1.0, 1e-5)] {
            let right = adaptive_simpson(|t| e.eval(c + t) * (1.0 - t / d), 0.0, d, 1e-16);
            assert_relative_eq!(e.hat_right(c, d), right, max_relative = 1e-9);
            if c >= d {
                let left = adaptive_simpson(|t| e.eval(c + t) * (1.0 + t / d), -d, 0.0, 1e-16);
                assert_relative_eq!(e.hat_left(c, d), left, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn log_convexity() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        assert!(exp_tail().log_convex_on(&grid, 1e-9));
        assert!(TailFunction::<f64>::Zero.log_convex_on(&grid, 1e-9));
        let mixture = TailFunction::table(
            grid.clone(),
            grid.iter().map(|x| (-x).exp() + (-3.0 * x).exp()).collect(),
            Some(1.0),
        )
        .unwrap();
        assert!(mixture.log_convex_on(&grid, 1e-9));
    }

    #[test]
    fn table_validation() {
        assert!(TailFunction::table(vec![0.0, 1.0], vec![1.0], None).is_err());
        assert!(TailFunction::table(vec![0.5, 1.0], vec![1.0, 0.5], None).is_err());
        assert!(TailFunction::table(vec![0.0, 0.0], vec![1.0, 0.5], None).is_err());
    }
}
