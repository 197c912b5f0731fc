//! The driving Lévy process: drift, Gaussian part and compound Poisson jumps.
//!
//! Analytic characteristics (mean rate, Laplace exponent, jump tails) are
//! closed-form for every supported jump law. Paths are simulated with exact
//! jump times and Euler steps of the drift/Gaussian part in between.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Law of a single jump of the compound Poisson part.
///
/// Rates `eta*` are in 1/state units; `a`, `b` are state values. A
/// deterministic jump may point either way (the sign of `a`), uniform jumps
/// may straddle zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum JumpLaw<T> {
    /// `J ~ Exp(eta)`, upward.
    ExponentialUp {
        eta: T,
    },
    /// `J = -Y`, `Y ~ Exp(eta)`.
    ExponentialDown {
        eta: T,
    },
    Deterministic {
        a: T,
    },
    Uniform {
        a: T,
        b: T,
    },
    /// Upward `Exp(eta_up)` with probability `p_up`, otherwise downward `Exp(eta_down)`.
    TwoSidedExponential {
        eta_up: T,
        eta_down: T,
        p_up: T,
    },
}

impl<T: Scalar> JumpLaw<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        match *self {
            JumpLaw::ExponentialUp { eta } | JumpLaw::ExponentialDown { eta } => pos("eta", eta),
            JumpLaw::Deterministic { a } => {
                if a != T::zero() && a.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("a", "deterministic jump must be finite and non-zero"))
                }
            }
            JumpLaw::Uniform { a, b } => {
                if a < b && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("b", format!("uniform jumps need a < b, got a={a}, b={b}")))
                }
            }
            JumpLaw::TwoSidedExponential { eta_up, eta_down, p_up } => {
                pos("eta_up", eta_up)?;
                pos("eta_down", eta_down)?;
                if (T::zero()..=T::one()).contains(&p_up) {
                    Ok(())
                } else {
                    Err(invalid("p_up", format!("must lie in [0,1], got {p_up}")))
                }
            }
        }
    }

    pub fn mean(&self) -> T {
        match *self {
            JumpLaw::ExponentialUp { eta } => eta.recip(),
            JumpLaw::ExponentialDown { eta } => -eta.recip(),
            JumpLaw::Deterministic { a } => a,
            JumpLaw::Uniform { a, b } => (a + b) / T::c(2.0),
            JumpLaw::TwoSidedExponential { eta_up, eta_down, p_up } => p_up / eta_up - (T::one() - p_up) / eta_down,
        }
    }

    pub fn has_up(&self) -> bool {
        match *self {
            JumpLaw::ExponentialUp { .. } => true,
            JumpLaw::ExponentialDown { .. } => false,
            JumpLaw::Deterministic { a } => a > T::zero(),
            JumpLaw::Uniform { b, .. } => b > T::zero(),
            JumpLaw::TwoSidedExponential { p_up, .. } => p_up > T::zero(),
        }
    }

    pub fn has_down(&self) -> bool {
        match *self {
            JumpLaw::ExponentialUp { .. } => false,
            JumpLaw::ExponentialDown { .. } => true,
            JumpLaw::Deterministic { a } => a < T::zero(),
            JumpLaw::Uniform { a, .. } => a < T::zero(),
            JumpLaw::TwoSidedExponential { p_up, .. } => p_up < T::one(),
        }
    }

    /// Supremum of the `λ > 0` for which `E[e^{-λJ}]` is finite.
    pub fn exp_moment_bound(&self) -> T {
        match *self {
            JumpLaw::ExponentialDown { eta } => eta,
            JumpLaw::TwoSidedExponential { eta_down, p_up, .. } if p_up < T::one() => eta_down,
            _ => T::infinity(),
        }
    }

    /// `E[e^{-λJ}] - 1`, written to avoid cancellation for small `λ`.
    pub fn laplace_minus_one(&self, lambda: T) -> T {
        match *self {
            JumpLaw::ExponentialUp { eta } => -lambda / (eta + lambda),
            JumpLaw::ExponentialDown { eta } => lambda / (eta - lambda),
            JumpLaw::Deterministic { a } => (-lambda * a).exp_m1(),
            JumpLaw::Uniform { a, b } => {
                let w = b - a;
                let lw = lambda * w;
                // E e^{-λJ} = e^{-λa} (1 - e^{-λw}) / (λw)
                let ratio = if lw.abs() < T::c(1e-8) {
                    T::one() - lw / T::c(2.0)
                } else {
                    -(-lw).exp_m1() / lw
                };
                (-lambda * a).exp() * ratio - T::one()
            }
            JumpLaw::TwoSidedExponential { eta_up, eta_down, p_up } => {
                let up = -lambda / (eta_up + lambda);
                let down = if p_up < T::one() {
                    lambda / (eta_down - lambda)
                } else {
                    T::zero()
                };
                p_up * up + (T::one() - p_up) * down
            }
        }
    }

    /// `P(J > y)` for `y >= 0`.
    pub fn up_tail_prob(&self, y: T) -> T {
        let y = y.max(T::zero());
        match *self {
            JumpLaw::ExponentialUp { eta } => (-eta * y).exp(),
            JumpLaw::ExponentialDown { .. } => T::zero(),
            JumpLaw::Deterministic { a } => {
                if a > y {
                    T::one()
                } else {
                    T::zero()
                }
            }
            JumpLaw::Uniform { a, b } => ((b - y.max(a)) / (b - a)).max(T::zero()).min(T::one()),
            JumpLaw::TwoSidedExponential { eta_up, p_up, .. } => p_up * (-eta_up * y).exp(),
        }
    }

    /// `P(J < -y)` for `y >= 0`.
    pub fn down_tail_prob(&self, y: T) -> T {
        let y = y.max(T::zero());
        match *self {
            JumpLaw::ExponentialUp { .. } => T::zero(),
            JumpLaw::ExponentialDown { eta } => (-eta * y).exp(),
            JumpLaw::Deterministic { a } => {
                if -a > y {
                    T::one()
                } else {
                    T::zero()
                }
            }
            JumpLaw::Uniform { a, b } => ((-y).min(b) - a).max(T::zero()) / (b - a),
            JumpLaw::TwoSidedExponential { eta_down, p_up, .. } => (T::one() - p_up) * (-eta_down * y).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            JumpLaw::ExponentialUp { eta } => T::exp1(rng) / eta,
            JumpLaw::ExponentialDown { eta } => -T::exp1(rng) / eta,
            JumpLaw::Deterministic { a } => a,
            JumpLaw::Uniform { a, b } => a + (b - a) * T::unit(rng),
            JumpLaw::TwoSidedExponential { eta_up, eta_down, p_up } => {
                if T::unit(rng) < p_up {
                    T::exp1(rng) / eta_up
                } else {
                    -T::exp1(rng) / eta_down
                }
            }
        }
    }
}

/// Coarse shape of the process as seen by the ladder construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralClass {
    Subordinator,
    SpectrallyNegative,
    SpectrallyPositive,
    TwoSided,
}

/// Lévy triplet with finite-activity jumps and `0 < E[X_1] < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyModel<T> {
    pub drift: T,
    pub sigma2: T,
    pub jump_rate: T,
    pub jump_law: Option<JumpLaw<T>>,
}

impl<T: Scalar> LevyModel<T> {
    /// Validated constructor. Rejects models whose mean rate is not positive.
    pub fn new(drift: T, sigma2: T, jump_rate: T, jump_law: Option<JumpLaw<T>>) -> Result<Self> {
        let m = Self::new_unchecked(drift, sigma2, jump_rate, jump_law)?;
        m.mean_rate()?;
        Ok(m)
    }

    /// Checks parameter ranges but not the sign of the mean.
    pub fn new_unchecked(drift: T, sigma2: T, jump_rate: T, jump_law: Option<JumpLaw<T>>) -> Result<Self> {
        if !drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        if !(sigma2 >= T::zero() && sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be finite and >= 0, got {sigma2}")));
        }
        if !(jump_rate >= T::zero() && jump_rate.is_finite()) {
            return Err(invalid(
                "jump_rate",
                format!("must be finite and >= 0, got {jump_rate}"),
            ));
        }
        let jump_law = if jump_rate > T::zero() {
            let law = jump_law.ok_or_else(|| invalid("jump_law", "required when jump_rate > 0"))?;
            law.validate()?;
            Some(law)
        } else {
            None
        };
        Ok(Self {
            drift,
            sigma2,
            jump_rate,
            jump_law,
        })
    }

    pub fn brownian(drift: T, sigma2: T) -> Result<Self> {
        Self::new(drift, sigma2, T::zero(), None)
    }

    pub fn pure_drift(drift: T) -> Result<Self> {
        Self::new(drift, T::zero(), T::zero(), None)
    }

    fn law(&self) -> Option<&JumpLaw<T>> {
        if self.jump_rate > T::zero() {
            self.jump_law.as_ref()
        } else {
            None
        }
    }

    /// `E[X_1] = d + Λ E[J]`; errors unless strictly positive.
    pub fn mean_rate(&self) -> Result<T> {
        let m = self.drift + self.law().map_or(T::zero(), |l| self.jump_rate * l.mean());
        if m > T::zero() && m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonPositiveMean { mean: m.as_f64() })
        }
    }

    /// Convergence bound of `E[e^{-λX_1}]` on the positive axis.
    pub fn exp_moment_bound(&self) -> T {
        self.law().map_or(T::infinity(), |l| l.exp_moment_bound())
    }

    /// `ψ(λ) = log E[e^{-λX_1}] = -dλ + σ²λ²/2 + Λ(E[e^{-λJ}] - 1)`.
    pub fn laplace_exponent(&self, lambda: T) -> Result<T> {
        if !(lambda > T::zero()) {
            return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        let bound = self.exp_moment_bound();
        if lambda >= bound {
            return Err(Error::ExpMomentDiverges {
                context: "Laplace exponent",
                rate: lambda.as_f64(),
                bound: bound.as_f64(),
            });
        }
        let jumps = self
            .law()
            .map_or(T::zero(), |l| self.jump_rate * l.laplace_minus_one(lambda));
        Ok(-self.drift * lambda + self.sigma2 * lambda * lambda / T::c(2.0) + jumps)
    }

    pub fn has_up_jumps(&self) -> bool {
        self.law().is_some_and(|l| l.has_up())
    }

    pub fn has_down_jumps(&self) -> bool {
        self.law().is_some_and(|l| l.has_down())
    }

    /// True when the path can move below a running supremum.
    pub fn has_downward_movement(&self) -> bool {
        self.sigma2 > T::zero() || self.drift < T::zero() || self.has_down_jumps()
    }

    pub fn is_compound_poisson(&self) -> bool {
        self.sigma2 == T::zero() && self.drift == T::zero()
    }

    /// A jump-free Gaussian model is labelled two-sided; the ladder
    /// construction dispatches on jump directions, not on this label.
    pub fn classify(&self) -> SpectralClass {
        let (up, down) = (self.has_up_jumps(), self.has_down_jumps());
        if self.sigma2 == T::zero() && self.drift >= T::zero() && !down {
            SpectralClass::Subordinator
        } else if !up && !down {
            SpectralClass::TwoSided
        } else if !down {
            SpectralClass::SpectrallyPositive
        } else if !up {
            SpectralClass::SpectrallyNegative
        } else {
            SpectralClass::TwoSided
        }
    }

    /// Upward jump tail `Π̄(y) = Π(y, ∞)` for `y >= 0`.
    pub fn up_tail(&self, y: T) -> T {
        self.law().map_or(T::zero(), |l| self.jump_rate * l.up_tail_prob(y))
    }

    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<T> {
        self.law().map(|l| l.sample(rng))
    }
}

/// Receives the simulated path piece by piece.
///
/// `segment` reports a continuous stretch of duration `h` starting at time `t0`
/// from state `x0` to `x1`; `jump` reports an instantaneous jump.
pub trait PathObserver<T> {
    fn segment(&mut self, t0: T, h: T, x0: T, x1: T);

    fn jump(&mut self, _t: T, _before: T, _after: T) {}
}

impl<T> PathObserver<T> for () {
    #[inline]
    fn segment(&mut self, _t0: T, _h: T, _x0: T, _x1: T) {}
}

/// Trapezoid-rule accumulator of `∫ φ(X_s) ds` along the simulation grid.
pub struct TrapezoidIntegral<T, F> {
    pub phi: F,
    pub total: T,
}

impl<T: Scalar, F: FnMut(T) -> T> TrapezoidIntegral<T, F> {
    pub fn new(phi: F) -> Self {
        Self { phi, total: T::zero() }
    }
}

impl<T: Scalar, F: FnMut(T) -> T> PathObserver<T> for TrapezoidIntegral<T, F> {
    #[inline]
    fn segment(&mut self, _t0: T, h: T, x0: T, x1: T) {
        self.total += h * ((self.phi)(x0) + (self.phi)(x1)) / T::c(2.0);
    }
}

impl<T, A: PathObserver<T>, B: PathObserver<T>> PathObserver<T> for (A, B)
where
    T: Copy,
{
    #[inline]
    fn segment(&mut self, t0: T, h: T, x0: T, x1: T) {
        self.0.segment(t0, h, x0, x1);
        self.1.segment(t0, h, x0, x1);
    }

    #[inline]
    fn jump(&mut self, t: T, before: T, after: T) {
        self.0.jump(t, before, after);
        self.1.jump(t, before, after);
    }
}

impl<T, O: PathObserver<T> + ?Sized> PathObserver<T> for &mut O {
    #[inline]
    fn segment(&mut self, t0: T, h: T, x0: T, x1: T) {
        (**self).segment(t0, h, x0, x1);
    }

    #[inline]
    fn jump(&mut self, t: T, before: T, after: T) {
        (**self).jump(t, before, after);
    }
}

/// Step size and time cap for path simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageConfig<T> {
    pub dt: T,
    pub horizon: T,
}

impl<T: Scalar> PassageConfig<T> {
    pub fn new(dt: T, horizon: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        if !(horizon > T::zero()) {
            return Err(invalid("horizon", format!("must be > 0, got {horizon}")));
        }
        Ok(Self { dt, horizon })
    }
}

/// Outcome of a first-passage simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassage<T> {
    pub time: T,
    /// State at detected passage, including any jump overshoot.
    pub state: T,
    /// Whether the level was crossed by a jump rather than continuously.
    pub by_jump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalCause {
    Passage,
    Horizon,
}

/// A recorded path: grid points, jump events and why the recording stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample<T> {
    pub dt: T,
    pub points: Vec<(T, T)>,
    pub jumps: Vec<(T, T)>,
    pub cause: TerminalCause,
}

struct Recorder<T> {
    points: Vec<(T, T)>,
    jumps: Vec<(T, T)>,
}

impl<T: Scalar> PathObserver<T> for Recorder<T> {
    fn segment(&mut self, t0: T, h: T, _x0: T, x1: T) {
        self.points.push((t0 + h, x1));
    }

    fn jump(&mut self, t: T, before: T, after: T) {
        self.jumps.push((t, after - before));
        self.points.push((t, after));
    }
}

/// Simulates `X` from `x0` until it first reaches `level`.
///
/// Jump times are exact (exponential inter-arrivals at rate `Λ`); between
/// jumps the drift and Gaussian part advance by Euler steps of at most `dt`.
/// A continuous crossing is reported at the level itself; with no Gaussian
/// part the crossing time inside the step is exact. A jump crossing reports
/// the post-jump state. Starting at or above the level is an immediate passage.
pub fn simulate_first_passage<T, R, O>(
    model: &LevyModel<T>,
    x0: T,
    level: T,
    cfg: &PassageConfig<T>,
    rng: &mut R,
    observer: &mut O,
) -> Result<FirstPassage<T>>
where
    T: Scalar,
    R: Rng + ?Sized,
    O: PathObserver<T> + ?Sized,
{
    if x0 >= level {
        return Ok(FirstPassage {
            time: T::zero(),
            state: x0,
            by_jump: false,
        });
    }
    let sigma = model.sigma2.sqrt();
    let d = model.drift;
    let rate = model.jump_rate;
    let has_jumps = rate > T::zero() && model.jump_law.is_some();
    let mut next_jump = if has_jumps { T::exp1(rng) / rate } else { T::infinity() };
    let mut t = T::zero();
    let mut x = x0;
    loop {
        if t >= cfg.horizon {
            return Err(Error::HorizonExceeded {
                horizon: cfg.horizon.as_f64(),
            });
        }
        let to_jump = next_jump - t;
        let jump_now = to_jump <= cfg.dt;
        let h = if jump_now { to_jump } else { cfg.dt };
        if sigma == T::zero() {
            let x_end = x + d * h;
            if d > T::zero() && x_end >= level {
                let hit = ((level - x) / d).min(h);
                observer.segment(t, hit, x, level);
                return Ok(FirstPassage {
                    time: t + hit,
                    state: level,
                    by_jump: false,
                });
            }
            observer.segment(t, h, x, x_end);
            x = x_end;
        } else {
            let x_end = x + d * h + sigma * h.sqrt() * T::standard_normal(rng);
            if x_end >= level {
                observer.segment(t, h, x, level);
                return Ok(FirstPassage {
                    time: t + h,
                    state: level,
                    by_jump: false,
                });
            }
            observer.segment(t, h, x, x_end);
            x = x_end;
        }
        if jump_now {
            t = next_jump;
            let j = model.sample_jump(rng).unwrap_or_else(T::zero);
            let before = x;
            x += j;
            observer.jump(t, before, x);
            next_jump = t + T::exp1(rng) / rate;
            if x >= level {
                return Ok(FirstPassage {
                    time: t,
                    state: x,
                    by_jump: true,
                });
            }
        } else {
            t += h;
        }
    }
}

/// Advances `X` from `x0` for exactly `duration` time units and returns the
/// final state. Same step scheme as [`simulate_first_passage`].
pub fn simulate_for<T, R, O>(model: &LevyModel<T>, x0: T, duration: T, dt: T, rng: &mut R, observer: &mut O) -> T
where
    T: Scalar,
    R: Rng + ?Sized,
    O: PathObserver<T> + ?Sized,
{
    let sigma = model.sigma2.sqrt();
    let rate = model.jump_rate;
    let has_jumps = rate > T::zero() && model.jump_law.is_some();
    let mut next_jump = if has_jumps { T::exp1(rng) / rate } else { T::infinity() };
    let mut t = T::zero();
    let mut x = x0;
    while t < duration {
        let remaining = duration - t;
        let to_jump = next_jump - t;
        let jump_now = to_jump <= dt && to_jump <= remaining;
        let h = if jump_now { to_jump } else { dt.min(remaining) };
        let x_end = if sigma == T::zero() {
            x + model.drift * h
        } else {
            x + model.drift * h + sigma * h.sqrt() * T::standard_normal(rng)
        };
        observer.segment(t, h, x, x_end);
        x = x_end;
        if jump_now {
            t = next_jump;
            let before = x;
            x += model.sample_jump(rng).unwrap_or_else(T::zero);
            observer.jump(t, before, x);
            next_jump = t + T::exp1(rng) / rate;
        } else if h == remaining {
            t = duration;
        } else {
            t += h;
        }
    }
    x
}

/// Records a full path up to first passage (or the horizon).
pub fn sample_path<T: Scalar, R: Rng + ?Sized>(
    model: &LevyModel<T>,
    x0: T,
    level: T,
    cfg: &PassageConfig<T>,
    rng: &mut R,
) -> PathSample<T> {
    let mut rec = Recorder {
        points: vec![(T::zero(), x0)],
        jumps: Vec::new(),
    };
    let cause = match simulate_first_passage(model, x0, level, cfg, rng, &mut rec) {
        Ok(_) => TerminalCause::Passage,
        Err(_) => TerminalCause::Horizon,
    };
    PathSample {
        dt: cfg.dt,
        points: rec.points,
        jumps: rec.jumps,
        cause,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn bm() -> LevyModel<f64> {
        LevyModel::brownian(1.0, 2.0).unwrap()
    }

    fn up_jumps() -> LevyModel<f64> {
        LevyModel::new(-1.0, 0.0, 4.0, Some(JumpLaw::ExponentialUp { eta: 1.0 })).unwrap()
    }

    #[test]
    fn mean_rate_examples() {
        assert_eq!(bm().mean_rate().unwrap(), 1.0);
        assert_relative_eq!(up_jumps().mean_rate().unwrap(), 3.0);
        let zero = LevyModel::new(1.0, 0.0, 1.0, Some(JumpLaw::ExponentialDown { eta: 1.0 }));
        assert_eq!(zero.unwrap_err(), Error::NonPositiveMean { mean: 0.0 });
    }

    #[test]
    fn laplace_exponent_examples() {
        assert_relative_eq!(bm().laplace_exponent(1.0).unwrap(), 0.0);
        assert!(up_jumps().laplace_exponent(3.0).unwrap().abs() < 1e-14);
        for lam in [0.5, 1.0, 2.0, 7.0] {
            let closed = lam * (lam - 3.0) / (1.0 + lam);
            assert_relative_eq!(up_jumps().laplace_exponent(lam).unwrap(), closed, epsilon = 1e-13);
        }
        let drift = LevyModel::pure_drift(1.0).unwrap();
        assert_eq!(drift.laplace_exponent(2.0).unwrap(), -2.0);
    }

    #[test]
    fn laplace_exponent_strip() {
        let m = LevyModel::new(2.0, 0.0, 1.0, Some(JumpLaw::ExponentialDown { eta: 1.0 })).unwrap();
        assert!(m.laplace_exponent(0.5).is_ok());
        assert!(matches!(m.laplace_exponent(1.0), Err(Error::ExpMomentDiverges { .. })));
        assert!(matches!(m.laplace_exponent(0.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn small_lambda_slope_recovers_mean() {
        let models = [
            bm(),
            up_jumps(),
            LevyModel::new(2.0, 0.5, 1.0, Some(JumpLaw::Uniform { a: -1.0, b: 0.5 })).unwrap(),
            LevyModel::new(
                0.5,
                0.0,
                2.0,
                Some(JumpLaw::TwoSidedExponential {
                    eta_up: 2.0,
                    eta_down: 3.0,
                    p_up: 0.7,
                }),
            )
            .unwrap(),
        ];
        for m in models {
            let mean = m.mean_rate().unwrap();
            for lam in [1e-3, 1e-4] {
                let slope = -m.laplace_exponent(lam).unwrap() / lam;
                assert!((slope - mean).abs() < 10.0 * lam * (1.0 + mean), "{slope} vs {mean}");
            }
        }
    }

    #[test]
    fn classification() {
        assert_eq!(bm().classify(), SpectralClass::TwoSided);
        assert_eq!(up_jumps().classify(), SpectralClass::SpectrallyPositive);
        let sub = LevyModel::new(1.0, 0.0, 1.0, Some(JumpLaw::ExponentialUp { eta: 1.0 })).unwrap();
        assert_eq!(sub.classify(), SpectralClass::Subordinator);
        let neg = LevyModel::new(2.0, 0.0, 1.0, Some(JumpLaw::ExponentialDown { eta: 1.0 })).unwrap();
        assert_eq!(neg.classify(), SpectralClass::SpectrallyNegative);
        let two = LevyModel::new(
            1.0,
            0.0,
            1.0,
            Some(JumpLaw::TwoSidedExponential {
                eta_up: 1.0,
                eta_down: 1.0,
                p_up: 0.5,
            }),
        )
        .unwrap();
        assert_eq!(two.classify(), SpectralClass::TwoSided);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LevyModel::<f64>::new(1.0, -1.0, 0.0, None).is_err());
        assert!(LevyModel::<f64>::new(1.0, 0.0, 1.0, None).is_err());
        assert!(LevyModel::new(1.0, 0.0, 1.0, Some(JumpLaw::Uniform { a: 1.0, b: 1.0 })).is_err());
        assert!(LevyModel::new(1.0, 0.0, 1.0, Some(JumpLaw::ExponentialUp { eta: 0.0 })).is_err());
    }

    #[test]
    fn pure_drift_passage_is_deterministic() {
        let m = LevyModel::<f64>::pure_drift(1.0).unwrap();
        let cfg = PassageConfig::new(1e-3, 100.0).unwrap();
        let p = simulate_first_passage(&m, 0.0, 2.0, &cfg, &mut substream(1, 0), &mut ()).unwrap();
        assert!((p.time - 2.0).abs() <= 1e-3);
        assert_eq!(p.state, 2.0);
    }

    #[test]
    fn creeping_passage_lands_on_level() {
        let m = LevyModel::new(2.0, 0.5, 1.0, Some(JumpLaw::ExponentialDown { eta: 1.0 })).unwrap();
        let cfg = PassageConfig::new(1e-3, 1e4).unwrap();
        for i in 0..50 {
            let p = simulate_first_passage(&m, 0.0, 1.5, &cfg, &mut substream(9, i), &mut ()).unwrap();
            assert_eq!(p.state, 1.5);
            assert!(!p.by_jump);
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let m = LevyModel::pure_drift(1.0).unwrap();
        let cfg = PassageConfig::new(1e-2, 1.0).unwrap();
        let err = simulate_first_passage(&m, 0.0, 5.0, &cfg, &mut substream(1, 0), &mut ()).unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { .. }));
    }

    #[test]
    fn trapezoid_observer_integrates_along_path() {
        let m = LevyModel::pure_drift(1.0).unwrap();
        let cfg = PassageConfig::new(1e-3, 100.0).unwrap();
        let mut obs = TrapezoidIntegral::new(|x: f64| x);
        simulate_first_passage(&m, 0.0, 2.0, &cfg, &mut substream(1, 0), &mut obs).unwrap();
        assert_relative_eq!(obs.total, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn recorded_path_has_increasing_times() {
        let cfg = PassageConfig::new(1e-2, 1e3).unwrap();
        let path = sample_path(&up_jumps(), 0.0, 3.0, &cfg, &mut substream(5, 0));
        assert_eq!(path.cause, TerminalCause::Passage);
        assert!(path.points.windows(2).all(|w| w[1].0 >= w[0].0));
        assert!(!path.jumps.is_empty());
    }

    #[test]
    fn same_seed_same_path() {
        let cfg = PassageConfig::new(1e-3, 1e3).unwrap();
        let a = sample_path(&bm(), 0.0, 1.0, &cfg, &mut substream(11, 3));
        let b = sample_path(&bm(), 0.0, 1.0, &cfg, &mut substream(11, 3));
        assert_eq!(a, b);
    }
}
