//! Potential density `u` of the ascending ladder height and the cycle value
//! functional built from it.
//!
//! `U(dx) = atom·δ_0(dx) + u(x) dx` is the expected ladder time spent at
//! height `x`. With `δ_H > 0` it solves `δ_H u(x) + ∫_0^x Π̄_H(x-s) u(s) ds = 1`;
//! with `δ_H = 0` the ladder is compound Poisson and `U` is its renewal measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ladder::LadderSystem;
use crate::numerics::{adaptive_simpson, bisect, cubic_on_grid, simpson_uniform};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::tail::TailFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialProvenance {
    ClosedForm,
    Volterra,
    Renewal,
    MonteCarlo,
}

/// `u` on the grid `iΔ`, extended by its last value beyond the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialDensity<T> {
    pub step: T,
    pub values: Vec<T>,
    pub atom_at_zero: T,
    pub provenance: PotentialProvenance,
    /// Largest residual of the defining integral equation at the check points.
    pub residual: T,
    /// `∫_0^{iΔ} u`, trapezoid rule.
    cumulative: Vec<T>,
}

/// Monte Carlo fallback for driftless ladders whose jump law has atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialOptions<T> {
    pub residual_tolerance: T,
    pub max_points: usize,
    pub mc_fallback: Option<(usize, u64)>,
}

impl<T: Scalar> Default for PotentialOptions<T> {
    fn default() -> Self {
        Self {
            residual_tolerance: T::c(1e-6),
            max_points: 16_001,
            mc_fallback: None,
        }
    }
}

impl<T: Scalar> PotentialDensity<T> {
    fn new(step: T, values: Vec<T>, atom: T, provenance: PotentialProvenance, residual: T) -> Self {
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in values.windows(2) {
            acc += step * (w[0] + w[1]) / T::c(2.0);
            cumulative.push(acc);
        }
        Self {
            step,
            values,
            atom_at_zero: atom,
            provenance,
            residual,
            cumulative,
        }
    }

    pub fn z_max(&self) -> T {
        self.step * T::from_count(self.values.len() - 1)
    }

    /// True for a constant density (pure-drift ladder).
    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    /// `u(t)`: 0 for `t < 0`, linear on the grid, last value beyond it.
    pub fn u(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        let pos = t / self.step;
        let n = self.values.len();
        if pos >= T::from_count(n - 1) {
            return self.values[n - 1];
        }
        let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
        let f = pos - T::from_count(i);
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }

    /// Cubic interpolant, used for residual checks against the linear one.
    fn u_cubic(&self, t: T) -> T {
        if t >= self.z_max() {
            return self.u(t);
        }
        cubic_on_grid(&self.values, T::zero(), self.step, t.max(T::zero()))
    }

    /// `U([0, t]) = atom + ∫_0^t u`.
    pub fn cumulative(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        let n = self.values.len();
        let z = self.z_max();
        if t >= z {
            return self.atom_at_zero + self.cumulative[n - 1] + (t - z) * self.values[n - 1];
        }
        let pos = t / self.step;
        let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
        let x0 = self.step * T::from_count(i);
        let part = (t - x0) * (self.values[i] + self.u(t)) / T::c(2.0);
        self.atom_at_zero + self.cumulative[i] + part
    }

    pub fn is_nonincreasing(&self, tol: T) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn grid(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.step * T::from_count(i), *v))
    }
}

/// Potential density on `[0, z_max]` with default options.
pub fn potential_density<T: Scalar>(ladder: &LadderSystem<T>, z_max: T, step: T) -> Result<PotentialDensity<T>> {
    potential_density_with(ladder, z_max, step, &PotentialOptions::default())
}

pub fn potential_density_with<T: Scalar>(
    ladder: &LadderSystem<T>,
    z_max: T,
    step: T,
    opts: &PotentialOptions<T>,
) -> Result<PotentialDensity<T>> {
    if !(z_max > T::zero() && z_max.is_finite()) {
        return Err(invalid("z_max", "must be finite and > 0"));
    }
    if !(step > T::zero()) {
        return Err(invalid("step", "must be > 0"));
    }
    let tail = &ladder.pi_bar_h;
    let delta = ladder.delta_h;
    if tail.is_zero() {
        if !(delta > T::zero()) {
            return Err(Error::NonPositiveMean { mean: 0.0 });
        }
        let c = delta.recip();
        return Ok(PotentialDensity::new(
            z_max,
            vec![c, c],
            T::zero(),
            PotentialProvenance::ClosedForm,
            T::zero(),
        ));
    }
    let mut step = step.min(z_max / T::c(4.0));
    if delta > T::zero() {
        loop {
            let n = (z_max / step).ceil().to_usize().unwrap_or(usize::MAX);
            if n + 1 > opts.max_points {
                break;
            }
            let values = volterra(tail, delta, step, n);
            let pd = PotentialDensity::new(step, values, T::zero(), PotentialProvenance::Volterra, T::zero());
            let residual = volterra_residual(tail, delta, &pd);
            if residual <= opts.residual_tolerance {
                return Ok(PotentialDensity { residual, ..pd });
            }
            log::debug!("Volterra residual {residual} at step {step}; refining");
            step /= T::c(2.0);
        }
        let n = (z_max / step / T::c(2.0)).ceil().to_usize().unwrap_or(0);
        let values = volterra(tail, delta, step * T::c(2.0), n);
        let pd = PotentialDensity::new(
            step * T::c(2.0),
            values,
            T::zero(),
            PotentialProvenance::Volterra,
            T::zero(),
        );
        return Err(Error::VolterraStepTooCoarse {
            residual: volterra_residual(tail, delta, &pd).as_f64(),
        });
    }
    if tail.has_density() {
        return renewal(tail, z_max, step, opts);
    }
    match opts.mc_fallback {
        Some((paths, seed)) => mc_potential(tail, z_max, step, paths, seed),
        None => Err(Error::DriftlessLadderUnsupported),
    }
}

/// Product-trapezoid solution of `δ u(x) + ∫_0^x Π̄(x-s) u(s) ds = 1` with
/// `u` piecewise linear on the grid and the kernel integrated exactly
/// against each hat function.
fn volterra<T: Scalar>(tail: &TailFunction<T>, delta: T, step: T, n: usize) -> Vec<T> {
    let left: Vec<T> = (0..=n)
        .map(|j| {
            if j == 0 {
                T::zero()
            } else {
                tail.hat_left(step * T::from_count(j), step)
            }
        })
        .collect();
    let right: Vec<T> = (0..=n).map(|j| tail.hat_right(step * T::from_count(j), step)).collect();
    let full: Vec<T> = left.iter().zip(&right).map(|(l, r)| *l + *r).collect();
    let mut u = Vec::with_capacity(n + 1);
    u.push(delta.recip());
    let diag = delta + right[0];
    for m in 1..=n {
        let mut acc = left[m] * u[0];
        for k in 1..m {
            acc += full[m - k] * u[k];
        }
        u.push((T::one() - acc) / diag);
    }
    u
}

fn check_points<T: Scalar>(z: T) -> [T; 4] {
    [z * T::c(0.25), z * T::c(0.5), z * T::c(0.75), z]
}

/// `∫_0^x Π̄(y) v(x - y) dy`, split at the kernel's breakpoints.
fn convolve<T: Scalar, V: Fn(T) -> T>(tail: &TailFunction<T>, x: T, v: V, tol: T) -> T {
    tail.integrate_weighted(T::zero(), x, |y| v(x - y), tol)
}

fn volterra_residual<T: Scalar>(tail: &TailFunction<T>, delta: T, pd: &PotentialDensity<T>) -> T {
    let tol = T::c(1e-11);
    check_points(pd.z_max())
        .iter()
        .map(|x| {
            let conv = convolve(tail, *x, |s| pd.u_cubic(s), tol);
            (delta * pd.u_cubic(*x) + conv - T::one()).abs()
        })
        .fold(T::zero(), T::max)
}

/// Driftless ladder with jump density `f = -Π̄'/r`: `U = (δ_0 + m dx)/r`
/// where `m = f + f * m` is the renewal density.
fn renewal<T: Scalar>(
    tail: &TailFunction<T>,
    z_max: T,
    step: T,
    opts: &PotentialOptions<T>,
) -> Result<PotentialDensity<T>> {
    let r = tail.total_rate();
    let f = |x: T| tail.density(x).unwrap_or_else(T::zero) / r;
    let mut step = step;
    loop {
        let n = (z_max / step).ceil().to_usize().unwrap_or(usize::MAX);
        if n + 1 > opts.max_points {
            return Err(Error::VolterraStepTooCoarse { residual: f64::NAN });
        }
        let inv_d = step.recip();
        // Hat weights of the density via integration by parts against Π̄.
        let right: Vec<T> = (0..=n)
            .map(|j| {
                let c = step * T::from_count(j);
                (tail.eval(c) - inv_d * tail.integral(c, c + step)) / r
            })
            .collect();
        let left: Vec<T> = (0..=n)
            .map(|j| {
                if j == 0 {
                    return T::zero();
                }
                let c = step * T::from_count(j);
                (inv_d * tail.integral(c - step, c) - tail.eval(c)) / r
            })
            .collect();
        let mut m = Vec::with_capacity(n + 1);
        m.push(f(T::zero()));
        let diag = T::one() - right[0];
        for i in 1..=n {
            let mut acc = f(step * T::from_count(i)) + left[i] * m[0];
            for k in 1..i {
                acc += (left[i - k] + right[i - k]) * m[k];
            }
            m.push(acc / diag);
        }
        let dens = PotentialDensity::new(step, m.clone(), T::zero(), PotentialProvenance::Renewal, T::zero());
        let residual = check_points(z_max)
            .iter()
            .map(|x| {
                let conv = adaptive_split(|y| f(y) * dens.u_cubic(*x - y), T::zero(), *x, &tail.breakpoints());
                (dens.u_cubic(*x) - f(*x) - conv).abs()
            })
            .fold(T::zero(), T::max);
        if residual <= opts.residual_tolerance {
            let values = m.iter().map(|v| *v / r).collect();
            return Ok(PotentialDensity::new(
                step,
                values,
                r.recip(),
                PotentialProvenance::Renewal,
                residual,
            ));
        }
        step /= T::c(2.0);
    }
}

fn adaptive_split<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, cuts: &[T]) -> T {
    let mut pts = vec![a];
    pts.extend(cuts.iter().copied().filter(|c| *c > a && *c < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| adaptive_simpson(&mut f, w[0], w[1], T::c(1e-11)))
        .fold(T::zero(), |a, b| a + b)
}

/// Histogram estimate of the renewal measure of the ladder subordinator,
/// sampling jumps by inverting `Π̄/r`.
fn mc_potential<T: Scalar>(
    tail: &TailFunction<T>,
    z_max: T,
    step: T,
    paths: usize,
    seed: u64,
) -> Result<PotentialDensity<T>> {
    let r = tail.total_rate();
    let n = (z_max / step).ceil().to_usize().unwrap_or(1).max(1);
    let upper = {
        let mut b = T::one();
        while tail.eval(b) > T::zero() && b < T::c(1e9) {
            b *= T::c(2.0);
        }
        b
    };
    let sample = |u: T| -> T {
        // smallest y with Π̄(y)/r <= u
        bisect(|y| tail.eval(y) / r - u, T::zero(), upper, T::c(1e-12) * upper, 200)
            .map(|root| root.x)
            .unwrap_or(upper)
    };
    let hist: Vec<Vec<u32>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut h = vec![0u32; n + 1];
            let mut pos = T::zero();
            loop {
                pos += sample(T::unit(&mut rng)).max(T::epsilon());
                if pos > z_max {
                    break;
                }
                let k = (pos / step).to_usize().unwrap_or(0).min(n);
                h[k] += 1;
            }
            h
        })
        .collect();
    let norm = r * T::from_count(paths) * step;
    let values: Vec<T> = (0..=n)
        .map(|k| T::from_count(hist.iter().map(|h| h[k] as usize).sum()) / norm)
        .collect();
    Ok(PotentialDensity::new(
        step,
        values,
        r.recip(),
        PotentialProvenance::MonteCarlo,
        T::nan(),
    ))
}

/// `Ξ_ρ(x) = ∫_x^{x̄} (g(y) - ρ) u(y - x) dy + atom·(g(x) - ρ)`: expected
/// one-cycle surplus from `x` until first passage above `x̄`.
pub fn xi<T: Scalar, G: Fn(T) -> T>(pot: &PotentialDensity<T>, g: G, rho: T, x: T, xbar: T) -> T {
    if x >= xbar {
        return T::zero();
    }
    let len = xbar - x;
    let atom = pot.atom_at_zero * (g(x) - rho);
    if pot.is_constant() {
        let tol = T::c(1e-13) * (T::one() + len);
        return pot.values[0] * adaptive_simpson(|y| g(y) - rho, x, xbar, tol) + atom;
    }
    let panels = ((len / pot.step).ceil().to_usize().unwrap_or(2)).max(2000);
    let panels = panels + panels % 2;
    let h = len / T::from_count(panels);
    let vals: Vec<T> = (0..=panels)
        .map(|i| {
            let t = h * T::from_count(i);
            (g(x + t) - rho) * pot.u(t)
        })
        .collect();
    simpson_uniform(&vals, h) + atom
}

/// `E_x[τ_y] = U([0, y - x])`; zero when `y <= x`.
pub fn expected_passage_time<T: Scalar>(pot: &PotentialDensity<T>, x: T, y: T) -> T {
    if y <= x {
        T::zero()
    } else {
        pot.cumulative(y - x)
    }
}

/// `E_x ∫_0^{τ_y} φ(sup_{r<=t} X_r) dt = ∫_x^y φ(s) U(ds - x)`.
pub fn occupation_functional<T: Scalar, F: Fn(T) -> T>(pot: &PotentialDensity<T>, phi: F, x: T, y: T) -> T {
    xi(pot, phi, T::zero(), x, y)
}
