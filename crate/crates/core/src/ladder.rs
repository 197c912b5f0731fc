//! Ascending and descending ladder characteristics of `X`.
//!
//! Local time at the supremum is scaled so that expected ladder time equals
//! expected real time. Under that scaling `E[H_1] = E[X_1]`, the descending
//! occupation measure `U↓` has total mass 1, and the ascending drift is
//! `δ_H = E[X_1] - ∫Π̄_H`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{brent, integrate_to_infinity, ratio_estimate};
use crate::potential::{potential_density, PotentialDensity};
use crate::process::{simulate_first_passage, JumpLaw, LevyModel, PassageConfig, PathObserver, SpectralClass};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::tail::TailFunction;

/// Empirical descending occupation measure `U↓`, binned on `[0, z_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationDensity<T> {
    pub step: T,
    /// Density per bin `[i·step, (i+1)·step)`.
    pub density: Vec<T>,
    pub density_se: Vec<T>,
    /// Mass beyond the last bin, spread as `tail_rate·e^{-tail_rate (z - z_max)}`.
    pub tail_mass: T,
    pub tail_rate: T,
    pub total_mass: T,
    pub total_mass_se: T,
    pub n_paths: usize,
}

impl<T: Scalar> OccupationDensity<T> {
    pub fn z_max(&self) -> T {
        self.step * T::from_count(self.density.len())
    }

    pub fn center(&self, i: usize) -> T {
        self.step * (T::from_count(i) + T::c(0.5))
    }

    /// `∫φ(z) U↓(dz)`, bins lumped at their centres.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut phi: F) -> Result<T> {
        let mut total = T::zero();
        for (i, d) in self.density.iter().enumerate() {
            if *d != T::zero() {
                total += *d * self.step * phi(self.center(i));
            }
        }
        if self.tail_mass > T::zero() {
            let (z0, k, m) = (self.z_max(), self.tail_rate, self.tail_mass);
            let tail = integrate_to_infinity(
                |t| m * k * (-k * t).exp() * phi(z0 + t),
                T::zero(),
                k.recip(),
                T::c(1e-12) * (T::one() + m),
                T::c(1e6) / k,
            )
            .ok_or(Error::ExpMomentDiverges {
                context: "empirical descending kernel",
                rate: f64::NAN,
                bound: k.as_f64(),
            })?;
            total += tail;
        }
        Ok(total)
    }

    /// `∫(-z)^r U↓(dz)`.
    pub fn moment(&self, r: usize) -> T {
        let mut total = T::zero();
        let sign = if r.is_multiple_of(2) { T::one() } else { -T::one() };
        for (i, d) in self.density.iter().enumerate() {
            total += *d * self.step * sign * self.center(i).powi(r as i32);
        }
        if self.tail_mass > T::zero() {
            // E[(z0 + E)^r] for E ~ Exp(k)
            let (z0, k) = (self.z_max(), self.tail_rate);
            let mut e = T::zero();
            for j in 0..=r {
                e +=
                    crate::numerics::binomial::<T>(r, j) * z0.powi((r - j) as i32) * crate::numerics::factorial::<T>(j)
                        / k.powi(j as i32);
            }
            total += self.tail_mass * sign * e;
        }
        total
    }

    /// `∫e^{-θz} U↓(dz)`; finite for `θ > -tail_rate`.
    pub fn laplace(&self, theta: T) -> Result<T> {
        if self.tail_mass > T::zero() && theta <= -self.tail_rate {
            return Err(Error::ExpMomentDiverges {
                context: "empirical descending kernel",
                rate: (-theta).as_f64(),
                bound: self.tail_rate.as_f64(),
            });
        }
        let mut total = T::zero();
        for (i, d) in self.density.iter().enumerate() {
            total += *d * self.step * (-theta * self.center(i)).exp();
        }
        if self.tail_mass > T::zero() {
            let k = self.tail_rate;
            total += self.tail_mass * (-theta * self.z_max()).exp() * k / (k + theta);
        }
        Ok(total)
    }
}

/// Representation of the descending ladder occupation measure `U↓`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DescendingRep<T> {
    /// `U↓(dz) = q e^{-qz} dz`: the descending ladder height is a unit drift
    /// killed at rate `q`.
    KilledUnitDrift {
        q: T,
    },
    EmpiricalOccupation(OccupationDensity<T>),
}

impl<T: Scalar> DescendingRep<T> {
    /// `∫φ(z) U↓(dz)`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut phi: F) -> Result<T> {
        match self {
            DescendingRep::KilledUnitDrift { q } => {
                let q = *q;
                integrate_to_infinity(
                    |z| q * (-q * z).exp() * phi(z),
                    T::zero(),
                    q.recip(),
                    T::c(1e-13),
                    T::c(1e6) / q,
                )
                .ok_or(Error::ExpMomentDiverges {
                    context: "descending kernel",
                    rate: f64::NAN,
                    bound: q.as_f64(),
                })
            }
            DescendingRep::EmpiricalOccupation(occ) => occ.integrate(phi),
        }
    }

    /// `∫(-z)^r U↓(dz)`.
    pub fn moment(&self, r: usize) -> T {
        match self {
            DescendingRep::KilledUnitDrift { q } => {
                let sign = if r.is_multiple_of(2) { T::one() } else { -T::one() };
                sign * crate::numerics::factorial::<T>(r) / q.powi(r as i32)
            }
            DescendingRep::EmpiricalOccupation(occ) => occ.moment(r),
        }
    }

    /// `∫e^{-θz} U↓(dz)`.
    pub fn laplace(&self, theta: T) -> Result<T> {
        match self {
            DescendingRep::KilledUnitDrift { q } => {
                if theta <= -*q {
                    Err(Error::ExpMomentDiverges {
                        context: "descending kernel",
                        rate: (-theta).as_f64(),
                        bound: q.as_f64(),
                    })
                } else {
                    Ok(*q / (*q + theta))
                }
            }
            DescendingRep::EmpiricalOccupation(occ) => occ.laplace(theta),
        }
    }

    pub fn total_mass(&self) -> T {
        match self {
            DescendingRep::KilledUnitDrift { .. } => T::one(),
            DescendingRep::EmpiricalOccupation(occ) => occ.total_mass,
        }
    }

    /// Largest `b` with `∫e^{bz} U↓(dz) < ∞`.
    pub fn exp_bound(&self) -> T {
        match self {
            DescendingRep::KilledUnitDrift { q } => *q,
            DescendingRep::EmpiricalOccupation(occ) if occ.tail_mass > T::zero() => occ.tail_rate,
            DescendingRep::EmpiricalOccupation(_) => T::infinity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    Empirical,
}

/// Ascending ladder characteristics together with the descending kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSystem<T> {
    pub class: SpectralClass,
    pub mean_rate: T,
    /// Positive root of the Laplace exponent; absent for subordinators.
    pub q: Option<T>,
    pub delta_h: T,
    pub pi_bar_h: TailFunction<T>,
    pub jump_mass: T,
    /// Absent for subordinators (then `ĥ = h`) and for spectrally negative
    /// models built without a running cost.
    pub desc_rep: Option<DescendingRep<T>>,
    pub normalization_residual: T,
    pub provenance: Provenance,
    /// Gaussian coefficient of `X`, kept for regularity checks.
    pub sigma2: T,
    pub compound_poisson: bool,
}

impl<T: Scalar> LadderSystem<T> {
    /// Builds a ladder system directly from `(δ_H, Π̄_H)`; useful for tests and
    /// for ladders estimated elsewhere. The mean rate is `δ_H + ∫Π̄_H`.
    pub fn from_parts(delta_h: T, pi_bar_h: TailFunction<T>, desc_rep: Option<DescendingRep<T>>) -> Result<Self> {
        if !(delta_h >= T::zero()) {
            return Err(invalid("delta_h", "must be >= 0"));
        }
        let jump_mass = pi_bar_h.jump_mass();
        let mean_rate = delta_h + jump_mass;
        if !(mean_rate > T::zero()) {
            return Err(Error::NonPositiveMean {
                mean: mean_rate.as_f64(),
            });
        }
        let q = match &desc_rep {
            Some(DescendingRep::KilledUnitDrift { q }) => Some(*q),
            _ => None,
        };
        Ok(Self {
            class: SpectralClass::TwoSided,
            mean_rate,
            q,
            delta_h,
            pi_bar_h,
            jump_mass,
            desc_rep,
            normalization_residual: T::zero(),
            provenance: Provenance::ClosedForm,
            sigma2: T::zero(),
            compound_poisson: delta_h == T::zero(),
        })
    }

    /// Ascending ladder creeps or `X` has a Gaussian part.
    pub fn regular_upward(&self) -> bool {
        !(self.sigma2 == T::zero() && self.delta_h == T::zero())
    }
}

/// Monte Carlo settings for the descending occupation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationOptions<T> {
    pub n_paths: usize,
    /// Each path runs from 0 to first passage above this level.
    pub level: T,
    pub dt: T,
    pub bin: T,
    pub z_max: T,
    pub horizon: T,
    pub seed: u64,
    pub min_records: usize,
}

impl<T: Scalar> Default for OccupationOptions<T> {
    fn default() -> Self {
        Self {
            n_paths: 2000,
            level: T::c(10.0),
            dt: T::c(1e-3),
            bin: T::c(0.02),
            z_max: T::c(10.0),
            horizon: T::c(1e5),
            seed: 42,
            min_records: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions<T> {
    /// Estimate `U↓` for spectrally negative models (only needed when `h ≢ 0`).
    pub need_descending: bool,
    pub occupation: OccupationOptions<T>,
    /// Relative tolerance for clamping `δ_H` to zero on analytic paths.
    pub drift_tolerance: T,
}

impl<T: Scalar> Default for LadderOptions<T> {
    fn default() -> Self {
        Self {
            need_descending: false,
            occupation: OccupationOptions::default(),
            drift_tolerance: T::c(1e-6),
        }
    }
}

/// Unique positive root `q` of `ψ`.
pub fn kill_rate_q<T: Scalar>(model: &LevyModel<T>) -> Result<T> {
    model.mean_rate()?;
    if !model.has_downward_movement() {
        return Err(Error::NoDownwardMovement);
    }
    let bound = model.exp_moment_bound();
    let psi = |l: T| model.laplace_exponent(l);
    let not_bracketed = || Error::RootNotBracketed { strip: bound.as_f64() };

    // ψ(0) = 0 and ψ'(0) = -E[X_1] < 0, so ψ is negative just right of 0.
    let mut lo = T::one().min(bound / T::c(2.0));
    let mut shrink = 0;
    while psi(lo)? >= T::zero() {
        lo /= T::c(2.0);
        shrink += 1;
        if shrink > 200 {
            return Err(not_bracketed());
        }
    }
    let mut hi = lo;
    loop {
        let next = if bound.is_finite() && hi * T::c(2.0) >= bound {
            (hi + bound) / T::c(2.0)
        } else {
            hi * T::c(2.0)
        };
        if next == hi || next >= bound || !next.is_finite() || next > T::c(1e15) {
            return Err(not_bracketed());
        }
        if psi(next)? > T::zero() {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
    }
    let rtol = T::c(1e-12).max(T::c(4.0) * T::epsilon());
    let f = |l: T| psi(l).unwrap_or_else(|_| T::infinity());
    brent(f, lo, hi, rtol, T::zero(), 200)
        .map(|r| r.x)
        .ok_or_else(not_bracketed)
}

/// Tail `Π̄(y)` of the upward jumps of `X` as a [`TailFunction`] (exact shapes
/// where possible).
pub fn up_jump_tail<T: Scalar>(model: &LevyModel<T>) -> TailFunction<T> {
    let rate = model.jump_rate;
    let Some(law) = model.jump_law.filter(|_| rate > T::zero()) else {
        return TailFunction::Zero;
    };
    match law {
        JumpLaw::ExponentialUp { eta } => TailFunction::Exponential { scale: rate, rate: eta },
        JumpLaw::TwoSidedExponential { eta_up, p_up, .. } if p_up > T::zero() => TailFunction::Exponential {
            scale: rate * p_up,
            rate: eta_up,
        },
        JumpLaw::Deterministic { a } if a > T::zero() => TailFunction::Step { level: rate, at: a },
        JumpLaw::Uniform { a, b } if b > T::zero() => {
            let w = b - a;
            if a > T::zero() {
                TailFunction::Table {
                    knots: vec![T::zero(), a, b],
                    values: vec![rate, rate, T::zero()],
                    tail_rate: None,
                }
            } else {
                TailFunction::Table {
                    knots: vec![T::zero(), b],
                    values: vec![rate * b / w, T::zero()],
                    tail_rate: None,
                }
            }
        }
        _ => TailFunction::Zero,
    }
}

/// `Π̄_H(x) = ∫Π̄(x+z) U↓(dz)`. For the killed unit drift this is
/// `q e^{qx} ∫_x^∞ e^{-qy} Π̄(y) dy`.
pub fn ascending_tail<T: Scalar>(model: &LevyModel<T>, rep: &DescendingRep<T>) -> Result<TailFunction<T>> {
    let up = up_jump_tail(model);
    match &up {
        TailFunction::Zero => Ok(TailFunction::Zero),
        TailFunction::Exponential { scale, rate } => Ok(TailFunction::Exponential {
            scale: *scale * rep.laplace(*rate)?,
            rate: *rate,
        }),
        _ => {
            // Compactly supported upward tail: tabulate on its support.
            let end = match &up {
                TailFunction::Step { at, .. } => *at,
                TailFunction::Table { knots, .. } => *knots.last().expect("non-empty"),
                _ => unreachable!(),
            };
            let n = 2000;
            let knots: Vec<T> = (0..=n).map(|i| end * T::from_count(i) / T::from_count(n)).collect();
            let mut values = Vec::with_capacity(knots.len());
            for x in &knots {
                let x = *x;
                let v = rep.integrate(|z| up.eval(x + z))?;
                values.push(v.max(T::zero()));
            }
            // Quadrature noise must not break monotonicity.
            for i in (0..values.len() - 1).rev() {
                if values[i] < values[i + 1] {
                    values[i] = values[i + 1];
                }
            }
            *values.last_mut().expect("non-empty") = T::zero();
            TailFunction::table(knots, values, None)
        }
    }
}

/// `δ_H = E[X_1] - ∫Π̄_H`, clamped to 0 within `tol`.
pub fn ascending_drift<T: Scalar>(model: &LevyModel<T>, jump_mass: T, tol: T) -> Result<T> {
    let mean = model.mean_rate()?;
    drift_from(mean, jump_mass, tol)
}

fn drift_from<T: Scalar>(mean: T, jump_mass: T, tol: T) -> Result<T> {
    let d = mean - jump_mass;
    if d.abs() <= tol {
        Ok(T::zero())
    } else if d < T::zero() {
        Err(Error::NormalizationMismatch {
            drift: d.as_f64(),
            tolerance: tol.as_f64(),
        })
    } else {
        Ok(d)
    }
}

/// Assembles the ladder system, dispatching on the jump directions of `X`.
pub fn build_ladder_system<T: Scalar>(model: &LevyModel<T>, opts: &LadderOptions<T>) -> Result<LadderSystem<T>> {
    let mean = model.mean_rate()?;
    let class = model.classify();
    let tol = opts.drift_tolerance * mean;
    let base = |q, delta_h: T, pi_bar_h: TailFunction<T>, desc_rep, provenance| {
        let jump_mass = pi_bar_h.jump_mass();
        LadderSystem {
            class,
            mean_rate: mean,
            q,
            delta_h,
            normalization_residual: (delta_h + jump_mass - mean).abs(),
            jump_mass,
            pi_bar_h,
            desc_rep,
            provenance,
            sigma2: model.sigma2,
            compound_poisson: model.is_compound_poisson(),
        }
    };

    if !model.has_downward_movement() {
        // H = X.
        let tail = up_jump_tail(model);
        return Ok(base(None, model.drift, tail, None, Provenance::ClosedForm));
    }

    if !model.has_down_jumps() {
        let q = kill_rate_q(model)?;
        let rep = DescendingRep::KilledUnitDrift { q };
        let tail = ascending_tail(model, &rep)?;
        let provenance = match tail {
            TailFunction::Table { .. } => Provenance::Quadrature,
            _ => Provenance::ClosedForm,
        };
        let delta = drift_from(mean, tail.jump_mass(), tol)?;
        return Ok(base(Some(q), delta, tail, Some(rep), provenance));
    }

    let q = kill_rate_q(model).ok();
    if !model.has_up_jumps() {
        let rep = if opts.need_descending {
            Some(DescendingRep::EmpiricalOccupation(mc_descending_occupation(
                model,
                &opts.occupation,
            )?))
        } else {
            None
        };
        return Ok(base(q, mean, TailFunction::Zero, rep, Provenance::ClosedForm));
    }

    let occ = mc_descending_occupation(model, &opts.occupation)?;
    let rel_se = if occ.total_mass > T::zero() {
        occ.total_mass_se / occ.total_mass
    } else {
        T::zero()
    };
    let rep = DescendingRep::EmpiricalOccupation(occ);
    let tail = ascending_tail(model, &rep)?;
    let jm = tail.jump_mass();
    let delta = drift_from(mean, jm, tol.max(T::c(3.0) * rel_se * jm))?;
    Ok(base(q, delta, tail, Some(rep), Provenance::Empirical))
}

struct OccupationObserver<T> {
    sup: T,
    step: T,
    z_max: T,
    bins: Vec<T>,
    overflow_time: T,
    overflow_excess: T,
    excursion_samples: usize,
}

impl<T: Scalar> OccupationObserver<T> {
    fn deposit(&mut self, d: T, w: T) {
        if d > T::zero() {
            self.excursion_samples += 1;
        }
        if d >= self.z_max {
            self.overflow_time += w;
            self.overflow_excess += w * (d - self.z_max);
        } else {
            let i = (d / self.step).to_usize().unwrap_or(0).min(self.bins.len() - 1);
            self.bins[i] += w;
        }
    }
}

impl<T: Scalar> PathObserver<T> for OccupationObserver<T> {
    fn segment(&mut self, _t0: T, h: T, x0: T, x1: T) {
        let half = h / T::c(2.0);
        let d0 = (self.sup - x0).max(T::zero());
        self.deposit(d0, half);
        self.sup = self.sup.max(x1);
        let d1 = (self.sup - x1).max(T::zero());
        self.deposit(d1, half);
    }

    fn jump(&mut self, _t: T, _before: T, after: T) {
        self.sup = self.sup.max(after);
    }
}

/// Estimates `U↓` from the occupation time of `sup X - X` before first passage.
///
/// Ladder time per path is the ladder height reached divided by `E[X_1]`
/// (under the normalization `E[H_1] = E[X_1]`), so the total mass estimates 1
/// with a genuine standard error.
pub fn mc_descending_occupation<T: Scalar>(
    model: &LevyModel<T>,
    opts: &OccupationOptions<T>,
) -> Result<OccupationDensity<T>> {
    let mean = model.mean_rate()?;
    if !model.has_downward_movement() {
        return Err(Error::NoDownwardMovement);
    }
    if opts.n_paths < 2 {
        return Err(invalid("n_paths", "need at least two paths"));
    }
    if !(opts.bin > T::zero() && opts.z_max > opts.bin && opts.level > T::zero()) {
        return Err(invalid("bin", "need 0 < bin < z_max and level > 0"));
    }
    let cfg = PassageConfig::new(opts.dt, opts.horizon)?;
    let nbins = (opts.z_max / opts.bin).ceil().to_usize().unwrap_or(1).max(1);
    let z_max = opts.bin * T::from_count(nbins);

    struct PathOut<T> {
        bins: Vec<T>,
        overflow_time: T,
        overflow_excess: T,
        samples: usize,
        time: T,
        ladder_time: T,
    }

    let runs: Vec<Result<PathOut<T>>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(opts.seed, i as u64);
            let mut obs = OccupationObserver {
                sup: T::zero(),
                step: opts.bin,
                z_max,
                bins: vec![T::zero(); nbins],
                overflow_time: T::zero(),
                overflow_excess: T::zero(),
                excursion_samples: 0,
            };
            let p = simulate_first_passage(model, T::zero(), opts.level, &cfg, &mut rng, &mut obs)?;
            Ok(PathOut {
                bins: obs.bins,
                overflow_time: obs.overflow_time,
                overflow_excess: obs.overflow_excess,
                samples: obs.excursion_samples,
                time: p.time,
                ladder_time: p.state / mean,
            })
        })
        .collect();
    let runs: Vec<PathOut<T>> = runs.into_iter().collect::<Result<_>>()?;

    let samples: usize = runs.iter().map(|r| r.samples).sum();
    if samples < opts.min_records {
        return Err(Error::InsufficientRecords {
            found: samples,
            required: opts.min_records,
        });
    }
    let den: Vec<T> = runs.iter().map(|r| r.ladder_time).collect();
    let mut density = Vec::with_capacity(nbins);
    let mut density_se = Vec::with_capacity(nbins);
    let mut num = vec![T::zero(); runs.len()];
    for b in 0..nbins {
        for (n, r) in num.iter_mut().zip(&runs) {
            *n = r.bins[b];
        }
        let (m, se) = ratio_estimate(&num, &den);
        density.push(m / opts.bin);
        density_se.push(se / opts.bin);
    }
    let times: Vec<T> = runs.iter().map(|r| r.time).collect();
    let (total_mass, total_mass_se) = ratio_estimate(&times, &den);
    let over: Vec<T> = runs.iter().map(|r| r.overflow_time).collect();
    let (tail_mass, _) = ratio_estimate(&over, &den);
    let over_t: T = runs.iter().map(|r| r.overflow_time).sum();
    let over_x: T = runs.iter().map(|r| r.overflow_excess).sum();
    let tail_rate = if over_t > T::zero() && over_x > T::zero() {
        over_t / over_x
    } else {
        opts.bin.recip()
    };
    Ok(OccupationDensity {
        step: opts.bin,
        density,
        density_se,
        tail_mass,
        tail_rate,
        total_mass,
        total_mass_se,
        n_paths: opts.n_paths,
    })
}

/// Settings for [`mc_ladder_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimateOptions<T> {
    pub n_paths: usize,
    /// Simulated time per path.
    pub horizon: T,
    pub dt: T,
    pub seed: u64,
    /// Evaluation grid for the tail estimate; must start at 0.
    pub grid: Vec<T>,
    pub min_records: usize,
}

impl<T: Scalar> LadderEstimateOptions<T> {
    /// Grid `{0} ∪ {lo·r^k}` up to `hi` with `n` geometric points.
    pub fn geometric_grid(lo: T, hi: T, n: usize) -> Vec<T> {
        let mut g = vec![T::zero()];
        let n = n.max(2);
        let ratio = (hi / lo).ln() / T::from_count(n - 1);
        g.extend((0..n).map(|k| lo * (ratio * T::from_count(k)).exp()));
        g
    }
}

impl<T: Scalar> Default for LadderEstimateOptions<T> {
    fn default() -> Self {
        Self {
            n_paths: 400,
            horizon: T::c(100.0),
            dt: T::c(1e-3),
            seed: 42,
            grid: Self::geometric_grid(T::c(0.01), T::c(20.0), 60),
            min_records: 100,
        }
    }
}

/// Monte Carlo ladder characteristics with per-grid-point standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLadder<T> {
    pub delta_h: T,
    pub delta_h_se: T,
    pub grid: Vec<T>,
    pub tail: Vec<T>,
    pub tail_se: Vec<T>,
    /// Tail table on `grid` (linear interpolation, log-slope extrapolation).
    pub pi_bar_h: TailFunction<T>,
    pub jump_records: usize,
    pub creep_records: usize,
    /// Factor applied to raw per-time rates to enforce `δ̂ + ∫Π̄̂ = E[X_1]`.
    pub rescale: T,
}

struct RecordObserver<T> {
    sup: T,
    time: T,
    creep: T,
    creep_events: usize,
    jumps: Vec<T>,
}

impl<T: Scalar> PathObserver<T> for RecordObserver<T> {
    fn segment(&mut self, _t0: T, h: T, _x0: T, x1: T) {
        self.time += h;
        if x1 > self.sup {
            self.creep += x1 - self.sup;
            self.creep_events += 1;
            self.sup = x1;
        }
    }

    fn jump(&mut self, _t: T, _before: T, after: T) {
        if after > self.sup {
            self.jumps.push(after - self.sup);
            self.sup = after;
        }
    }
}

/// Estimates `(δ_H, Π̄_H)` from new-supremum records on simulated paths.
///
/// Record rates are taken per unit of real time (which equals ladder time in
/// the long run under the normalization) and then rescaled so that
/// `δ̂_H + ∫Π̄̂_H = E[X_1]` holds exactly.
pub fn mc_ladder_estimate<T: Scalar>(
    model: &LevyModel<T>,
    opts: &LadderEstimateOptions<T>,
) -> Result<EmpiricalLadder<T>> {
    let mean = model.mean_rate()?;
    if opts.grid.first() != Some(&T::zero()) || opts.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid", "must start at 0 and increase strictly"));
    }
    if opts.n_paths < 2 {
        return Err(invalid("n_paths", "need at least two paths"));
    }
    let cfg = PassageConfig::new(opts.dt, opts.horizon)?;
    let runs: Vec<Result<RecordObserver<T>>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(opts.seed, i as u64);
            let mut obs = RecordObserver {
                sup: T::zero(),
                time: T::zero(),
                creep: T::zero(),
                creep_events: 0,
                jumps: Vec::new(),
            };
            match simulate_first_passage(model, T::zero(), T::infinity(), &cfg, &mut rng, &mut obs) {
                Err(Error::HorizonExceeded { .. }) => Ok(obs),
                Err(e) => Err(e),
                Ok(_) => unreachable!("an infinite level is never reached"),
            }
        })
        .collect();
    let runs: Vec<RecordObserver<T>> = runs.into_iter().collect::<Result<_>>()?;

    let jump_records: usize = runs.iter().map(|r| r.jumps.len()).sum();
    let creep_records: usize = runs.iter().map(|r| r.creep_events).sum();
    if jump_records + creep_records < opts.min_records {
        return Err(Error::InsufficientRecords {
            found: jump_records + creep_records,
            required: opts.min_records,
        });
    }
    let times: Vec<T> = runs.iter().map(|r| r.time).collect();
    let creeps: Vec<T> = runs.iter().map(|r| r.creep).collect();
    let sizes: Vec<T> = runs.iter().map(|r| r.jumps.iter().copied().sum()).collect();
    let (delta_raw, delta_se_raw) = ratio_estimate(&creeps, &times);
    let (mass_raw, _) = ratio_estimate(&sizes, &times);
    let rescale = mean / (delta_raw + mass_raw);

    let mut tail = Vec::with_capacity(opts.grid.len());
    let mut tail_se = Vec::with_capacity(opts.grid.len());
    let mut counts = vec![T::zero(); runs.len()];
    for x in &opts.grid {
        for (c, r) in counts.iter_mut().zip(&runs) {
            *c = T::from_count(r.jumps.iter().filter(|j| **j > *x).count());
        }
        let (m, se) = ratio_estimate(&counts, &times);
        tail.push(m * rescale);
        tail_se.push(se * rescale);
    }
    let last = tail.len() - 1;
    let tail_rate = if last >= 1 && tail[last] > T::zero() && tail[last - 1] > tail[last] {
        Some((tail[last - 1] / tail[last]).ln() / (opts.grid[last] - opts.grid[last - 1]))
    } else {
        None
    };
    let pi_bar_h = if jump_records == 0 {
        TailFunction::Zero
    } else {
        TailFunction::table(opts.grid.clone(), tail.clone(), tail_rate)?
    };
    Ok(EmpiricalLadder {
        delta_h: delta_raw * rescale,
        delta_h_se: delta_se_raw * rescale,
        grid: opts.grid.clone(),
        tail,
        tail_se,
        pi_bar_h,
        jump_records,
        creep_records,
        rescale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialityCriterion {
    NoJumps,
    LogConvexTail,
    DecreasingPotentialDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialityReport {
    pub is_special: bool,
    /// Criterion that decided (the last one tried when `is_special` is false).
    pub criterion: SpecialityCriterion,
    pub regular_upward: bool,
}

/// Decides whether the ascending ladder subordinator is special.
///
/// `potential` may be passed to reuse an already computed density; otherwise
/// one is computed on a default grid when the tail checks are inconclusive.
pub fn is_special<T: Scalar>(ladder: &LadderSystem<T>, potential: Option<&PotentialDensity<T>>) -> SpecialityReport {
    let regular_upward = ladder.regular_upward();
    let report = |is_special, criterion| SpecialityReport {
        is_special,
        criterion,
        regular_upward,
    };
    let tail = &ladder.pi_bar_h;
    if tail.is_zero() {
        return report(true, SpecialityCriterion::NoJumps);
    }
    let reach = match tail {
        TailFunction::Step { at, .. } => *at * T::c(2.0),
        TailFunction::Table { knots, .. } => *knots.last().expect("non-empty"),
        _ => T::c(20.0) / tail.decay_rate(),
    };
    let grid: Vec<T> = (0..=400).map(|i| reach * T::from_count(i) / T::c(400.0)).collect();
    if tail.log_convex_on(&grid, T::c(1e-9)) {
        return report(true, SpecialityCriterion::LogConvexTail);
    }
    let owned;
    let u = match potential {
        Some(u) => u,
        None => {
            let step = reach / T::c(2000.0);
            match potential_density(ladder, reach * T::c(2.0), step) {
                Ok(u) => {
                    owned = u;
                    &owned
                }
                Err(e) => {
                    log::warn!("speciality check inconclusive: {e}");
                    return report(false, SpecialityCriterion::DecreasingPotentialDensity);
                }
            }
        }
    };
    report(
        u.is_nonincreasing(T::c(1e-9)),
        SpecialityCriterion::DecreasingPotentialDensity,
    )
}
