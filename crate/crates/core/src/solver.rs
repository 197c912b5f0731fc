//! Threshold search for the optimal `(s, S)` band.
//!
//! For a level `ρ` below `max g`, `x̲(ρ) < x̄(ρ)` are the crossings of `g = ρ`
//! and `𝔊(ρ) = sup_{x ∈ [x̲, x̄]} Ξ_ρ(x) - K`. `𝔊` is nonincreasing, and its
//! root is the optimal long-run average reward `ρ*`; then `S = x̄(ρ*)` and `s`
//! is the maximizer of `Ξ_{ρ*}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ladder::{build_ladder_system, is_special, LadderOptions, LadderSystem, SpecialityReport};
use crate::numerics::{bisect, golden_section_max};
use crate::potential::{potential_density_with, xi, PotentialDensity, PotentialOptions};
use crate::process::LevyModel;
use crate::scalar::Scalar;
use crate::tail::TailFunction;
use crate::transform::{check_unimodal, gain_rate, GainProvenance, GainRate, PayoffSpec, Restart, Unimodal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Audit {
    /// Trust the `s = x̲` shortcut when its conditions hold.
    Fast,
    /// Always locate `s` by golden section; the shortcut is only compared.
    Standard,
    /// As `Standard`; verification additionally runs the supermartingale check.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions<T> {
    /// Largest distance from the peak of `g` searched for crossings.
    pub working_bound: T,
    /// Half-width of the first unimodality window, doubled as needed.
    pub initial_width: T,
    pub grid_points: usize,
    /// Bisection stops when the `ρ` bracket is narrower than this (relative to `max(1, |max g|)`).
    pub rho_tol: T,
    /// Bisection stops when `|𝔊| <= g_tol · K`.
    pub g_tol: T,
    pub max_iter: usize,
    pub audit: Audit,
    /// Grid length for the potential density; derived from the ladder tail when unset.
    pub potential_z_max: Option<T>,
    pub potential_points: usize,
    pub potential: PotentialOptions<T>,
    pub ladder: LadderOptions<T>,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            working_bound: T::c(1e3),
            initial_width: T::c(8.0),
            grid_points: 4001,
            rho_tol: T::c(1e-12),
            g_tol: T::c(1e-10),
            max_iter: 200,
            audit: Audit::Standard,
            potential_z_max: None,
            potential_points: 4001,
            potential: PotentialOptions::default(),
            ladder: LadderOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    None,
    Unbounded,
    NoThreshold,
    /// `h ≡ 0` and `ρ* <= 0`: never intervening does at least as well.
    InactionCandidate,
}

/// Every `(ρ, 𝔊(ρ))` evaluated during the search, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GFunction<T> {
    pub evals: Vec<(T, T)>,
}

impl<T: Scalar> GFunction<T> {
    fn record(&mut self, rho: T, g: T) {
        self.evals.push((rho, g));
    }

    pub fn sorted(&self) -> Vec<(T, T)> {
        let mut v = self.evals.clone();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite levels"));
        v
    }

    /// `𝔊` nonincreasing in `ρ` up to `tol` across all evaluations.
    pub fn is_monotone(&self, tol: T) -> bool {
        let v = self.sorted();
        let mut running_min = T::infinity();
        for (_, g) in v {
            if g > running_min + tol {
                return false;
            }
            running_min = running_min.min(g);
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySolution<T> {
    pub rho_star: T,
    /// Restart level.
    pub s: T,
    /// Trigger level.
    #[serde(rename = "S")]
    pub big_s: T,
    /// Lower crossing `x̲(ρ*)`.
    pub x_lower: T,
    /// Peak of `g` and its value.
    pub a: T,
    pub g_max: T,
    /// `Ξ_{ρ*}(s) - K`.
    pub cycle_residual: T,
    pub used_special_shortcut: bool,
    /// `|s_golden - x̲|` when the shortcut applied and was audited.
    pub shortcut_gap: Option<T>,
    pub speciality: SpecialityReport,
    pub degeneracy: Degeneracy,
    pub iterations: usize,
    pub g_function: GFunction<T>,
    pub gain_provenance: GainProvenance,
    pub potential_residual: T,
}

/// Ladder, gain rate, potential density and peak of `g`, ready for the search.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub ladder: LadderSystem<T>,
    pub gain: GainRate<T>,
    pub potential: PotentialDensity<T>,
    pub unimodal: Unimodal<T>,
    pub speciality: SpecialityReport,
}

fn needs_descending<T: Scalar>(payoff: &PayoffSpec<T>) -> bool {
    match payoff.h.polynomial() {
        Some(c) => c.iter().skip(1).any(|v| *v != T::zero()),
        None => true,
    }
}

/// Ladder options with `U↓` requested whenever `ĥ` needs more than its mass.
pub fn ladder_options_for<T: Scalar>(payoff: &PayoffSpec<T>, opts: &SolveOptions<T>) -> LadderOptions<T> {
    let mut lopts = opts.ladder;
    lopts.need_descending = lopts.need_descending || needs_descending(payoff);
    lopts
}

pub fn prepare<T: Scalar>(model: &LevyModel<T>, payoff: &PayoffSpec<T>, opts: &SolveOptions<T>) -> Result<Prepared<T>> {
    payoff.validate()?;
    let ladder = build_ladder_system(model, &ladder_options_for(payoff, opts))?;
    prepare_with_ladder(ladder, payoff, opts)
}

fn default_z_max<T: Scalar>(tail: &TailFunction<T>) -> T {
    let reach = match tail {
        TailFunction::Zero => T::one(),
        TailFunction::Step { at, .. } => *at * T::c(40.0),
        TailFunction::Table { knots, .. } => *knots.last().expect("non-empty") * T::c(4.0),
        TailFunction::Exponential { rate, .. } => T::c(40.0) / *rate,
    };
    reach.max(T::c(16.0)).min(T::c(400.0))
}

/// Potential density on the grid implied by `opts`.
pub fn potential_for<T: Scalar>(ladder: &LadderSystem<T>, opts: &SolveOptions<T>) -> Result<PotentialDensity<T>> {
    let z_max = opts.potential_z_max.unwrap_or_else(|| default_z_max(&ladder.pi_bar_h));
    let step = z_max / T::from_count(opts.potential_points.max(3) - 1);
    potential_density_with(ladder, z_max, step, &opts.potential)
}

pub fn prepare_with_ladder<T: Scalar>(
    ladder: LadderSystem<T>,
    payoff: &PayoffSpec<T>,
    opts: &SolveOptions<T>,
) -> Result<Prepared<T>> {
    let mut gain = gain_rate(&ladder, payoff)?;
    let unimodal = locate_peak(&gain, opts)?;
    gain.unimodal = Some(unimodal);
    if let Some((name, x)) = payoff.check_on(unimodal.lo, unimodal.hi, 2001) {
        log::warn!("{name} violates its shape assumption near x = {x}");
    }
    let potential = potential_for(&ladder, opts)?;
    let speciality = is_special(&ladder, Some(&potential));
    Ok(Prepared {
        ladder,
        gain,
        potential,
        unimodal,
        speciality,
    })
}

/// Finds the peak of `g`, doubling the window until the peak is interior.
/// A peak pinned to the working bound means `g` keeps rising: `Unbounded`
/// when it rises without flattening, `NoThreshold` when it saturates.
pub fn locate_peak<T: Scalar>(g: &GainRate<T>, opts: &SolveOptions<T>) -> Result<Unimodal<T>> {
    let n = opts.grid_points.max(101);
    let mut w = opts.initial_width;
    loop {
        let (lo, hi) = (-w, w);
        for edge in [lo, hi] {
            let v = g.eval(edge);
            if v == T::infinity() {
                return Err(Error::Unbounded);
            }
            if !v.is_finite() {
                return Err(invalid("gain_rate", format!("non-finite value at x = {edge}")));
            }
        }
        let step = (hi - lo) / T::from_count(n - 1);
        let uni = check_unimodal(g, lo, hi, step)?;
        let edge = step * T::c(1.5);
        let at_hi = hi - uni.a <= edge;
        let at_lo = uni.a - lo <= edge;
        if !at_hi && !at_lo {
            return Ok(uni);
        }
        if w >= opts.working_bound {
            let dir = if at_hi { T::one() } else { -T::one() };
            let d1 = g.eval(dir * w / T::c(2.0)) - g.eval(dir * w / T::c(4.0));
            let d2 = g.eval(dir * w) - g.eval(dir * w / T::c(2.0));
            let tol = T::c(1e-9) * (T::one() + uni.g_max.abs());
            if d2 > tol && d2 >= d1 * T::c(0.5) {
                return Err(Error::Unbounded);
            }
            return Err(Error::NoThreshold {
                rho_sup: uni.g_max.as_f64(),
            });
        }
        w = (w * T::c(2.0)).min(opts.working_bound);
    }
}

/// Crossings of `g = ρ` on either side of the peak, searched out to `bound`.
pub fn threshold_roots<T: Scalar>(g: &GainRate<T>, rho: T, uni: &Unimodal<T>, bound: T) -> Result<(T, T)> {
    if rho >= uni.g_max {
        return Err(Error::AboveMaximum {
            rho: rho.as_f64(),
            g_max: uni.g_max.as_f64(),
        });
    }
    let lower = crossing(g, rho, uni.a, -T::one(), bound).ok_or(Error::NoLowerCrossing {
        rho: rho.as_f64(),
        bound: (uni.a - bound).as_f64(),
    })?;
    let upper = crossing(g, rho, uni.a, T::one(), bound).ok_or(Error::NoUpperCrossing {
        rho: rho.as_f64(),
        bound: (uni.a + bound).as_f64(),
    })?;
    Ok((lower, upper))
}

fn crossing<T: Scalar>(g: &GainRate<T>, rho: T, a: T, dir: T, bound: T) -> Option<T> {
    let f = |x: T| g.eval(x) - rho;
    let mut prev = a;
    let mut w = T::c(0.25);
    loop {
        let reach = w.min(bound);
        let x = a + dir * reach;
        if f(x) < T::zero() {
            let xtol = T::c(4.0) * T::epsilon() * (T::one() + x.abs());
            let (l, r) = if dir > T::zero() { (prev, x) } else { (x, prev) };
            return bisect(f, l, r, xtol, 200).map(|root| root.x);
        }
        if reach >= bound {
            return None;
        }
        prev = x;
        w *= T::c(2.0);
    }
}

struct Search<'a, T: Scalar> {
    prep: &'a Prepared<T>,
    k: T,
    bound: T,
    g_abs_tol: T,
    shortcut: bool,
    audit: Audit,
    memo: GFunction<T>,
}

/// Outcome of one `𝔊` evaluation.
#[derive(Debug, Clone, Copy)]
struct Eval<T> {
    g: T,
    lower: Option<T>,
    upper: Option<T>,
    /// Maximizer of `Ξ_ρ` (golden section) and the shortcut gap.
    s: T,
    gap: Option<T>,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn new(prep: &'a Prepared<T>, payoff: &PayoffSpec<T>, opts: &SolveOptions<T>) -> Self {
        let sp = prep.speciality;
        Self {
            prep,
            k: payoff.k,
            bound: opts.working_bound,
            g_abs_tol: opts.g_tol.max(T::c(16.0) * T::epsilon()) * payoff.k,
            shortcut: sp.is_special && sp.regular_upward && !prep.ladder.compound_poisson,
            audit: opts.audit,
            memo: GFunction::default(),
        }
    }

    fn xi(&self, rho: T, x: T, xbar: T) -> T {
        let g = &self.prep.gain;
        xi(&self.prep.potential, |y| g.eval(y), rho, x, xbar)
    }

    /// `sup_{x ∈ [lo, xbar]} Ξ_ρ(x)` by a coarse scan and golden refinement.
    fn sup_xi(&self, rho: T, lo: T, xbar: T) -> (T, T) {
        if lo >= xbar {
            return (xbar, T::zero());
        }
        let n = 32;
        let xs: Vec<T> = (0..=n)
            .map(|i| lo + (xbar - lo) * T::from_count(i) / T::from_count(n))
            .collect();
        let vals: Vec<T> = xs.iter().map(|x| self.xi(rho, *x, xbar)).collect();
        let best = (0..=n)
            .max_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite"))
            .expect("non-empty");
        let l = xs[best.saturating_sub(1)];
        let r = xs[(best + 1).min(n)];
        let xtol = T::c(1e-11) * (T::one() + (xbar - lo).abs()) + T::c(8.0) * T::epsilon() * (T::one() + l.abs());
        let (x, v) = golden_section_max(|x| self.xi(rho, x, xbar), l, r, xtol);
        if v >= vals[best] {
            (x, v)
        } else {
            (xs[best], vals[best])
        }
    }

    fn roots(&self, rho: T) -> (Option<T>, Option<T>) {
        let uni = &self.prep.unimodal;
        let g = &self.prep.gain;
        (
            crossing(g, rho, uni.a, -T::one(), self.bound),
            crossing(g, rho, uni.a, T::one(), self.bound),
        )
    }

    /// `sup Ξ` over `[x̲, x̄]`, truncating missing crossings at the bound.
    /// Returns `+∞` when the truncated value still grows with the bound.
    fn free(&mut self, rho: T) -> Eval<T> {
        let uni = self.prep.unimodal;
        if rho >= uni.g_max {
            self.memo.record(rho, -self.k);
            return Eval {
                g: -self.k,
                lower: Some(uni.a),
                upper: Some(uni.a),
                s: uni.a,
                gap: None,
            };
        }
        let (lower, upper) = self.roots(rho);
        let xl = lower.unwrap_or(uni.a - self.bound);
        let xu = upper.unwrap_or(uni.a + self.bound);
        let (mut s, mut sup) = if self.shortcut && lower.is_some() && self.audit == Audit::Fast {
            (xl, self.xi(rho, xl, xu))
        } else {
            self.sup_xi(rho, xl, xu)
        };
        let mut gap = None;
        if self.shortcut && lower.is_some() {
            let at_lower = self.xi(rho, xl, xu);
            if self.audit != Audit::Fast {
                gap = Some((s - xl).abs());
            }
            if at_lower >= sup - self.g_abs_tol {
                s = xl;
                sup = sup.max(at_lower);
            }
        }
        if lower.is_none() || upper.is_none() {
            let half = self.bound / T::c(2.0);
            let hl = lower.unwrap_or(uni.a - half);
            let hu = upper.unwrap_or(uni.a + half);
            let (_, sup_half) = self.sup_xi(rho, hl, hu);
            if sup - sup_half > self.g_abs_tol {
                sup = T::infinity();
            }
        }
        let g = sup.max(T::zero()) - self.k;
        self.memo.record(rho, g);
        Eval {
            g,
            lower,
            upper,
            s,
            gap,
        }
    }

    /// `Ξ_ρ(y0)` up to `x̄(ρ)`; `-K` when `y0` is not below `x̄`.
    fn fixed(&mut self, rho: T, y0: T) -> Eval<T> {
        let uni = self.prep.unimodal;
        let (lower, upper) = if rho >= uni.g_max {
            (Some(uni.a), Some(uni.a))
        } else {
            self.roots(rho)
        };
        let xu = upper.unwrap_or(uni.a + self.bound);
        let mut v = if y0 < xu { self.xi(rho, y0, xu) } else { T::zero() };
        if upper.is_none() {
            let hu = uni.a + self.bound / T::c(2.0);
            let v_half = if y0 < hu { self.xi(rho, y0, hu) } else { T::zero() };
            if v - v_half > self.g_abs_tol {
                v = T::infinity();
            }
        }
        let g = v - self.k;
        self.memo.record(rho, g);
        Eval {
            g,
            lower,
            upper,
            s: y0,
            gap: None,
        }
    }
}

/// Solves the long-run average problem; dispatches on the restart mode.
pub fn solve<T: Scalar>(
    model: &LevyModel<T>,
    payoff: &PayoffSpec<T>,
    opts: &SolveOptions<T>,
) -> Result<PolicySolution<T>> {
    let prep = prepare(model, payoff, opts)?;
    solve_prepared(&prep, payoff, opts)
}

/// Fixed-restart variant: every intervention moves the state to `y0`.
pub fn solve_fixed_restart<T: Scalar>(
    model: &LevyModel<T>,
    payoff: &PayoffSpec<T>,
    y0: T,
    opts: &SolveOptions<T>,
) -> Result<PolicySolution<T>> {
    let payoff = payoff.clone().with_restart(Restart::Fixed { point: y0 })?;
    solve(model, &payoff, opts)
}

pub fn solve_prepared<T: Scalar>(
    prep: &Prepared<T>,
    payoff: &PayoffSpec<T>,
    opts: &SolveOptions<T>,
) -> Result<PolicySolution<T>> {
    payoff.validate()?;
    if opts.max_iter == 0 {
        return Err(invalid("max_iter", "must be positive"));
    }
    let mut search = Search::new(prep, payoff, opts);
    let uni = prep.unimodal;
    let scale = T::one().max(uni.g_max.abs());
    let eval = |s: &mut Search<'_, T>, rho: T| match payoff.restart {
        Restart::Free => s.free(rho),
        Restart::Fixed { point } => s.fixed(rho, point),
    };

    if payoff.restart == Restart::Free {
        let probe = uni.g_max - T::c(1e-6) * scale;
        let (l, u) = search.roots(probe);
        if l.is_none() || u.is_none() {
            return Err(Error::NoThreshold {
                rho_sup: uni.g_max.as_f64(),
            });
        }
    }

    let mut hi = uni.g_max;
    let mut e_hi = eval(&mut search, hi);
    let mut lo = uni.g_max - scale;
    let mut e_lo = eval(&mut search, lo);
    let mut tries = 0;
    while e_lo.g <= T::zero() {
        tries += 1;
        if tries > 80 {
            return Err(match payoff.restart {
                Restart::Fixed { point } => Error::RestartAboveThreshold {
                    restart: point.as_f64(),
                },
                Restart::Free => Error::NoThreshold {
                    rho_sup: uni.g_max.as_f64(),
                },
            });
        }
        hi = lo;
        e_hi = e_lo;
        lo = uni.g_max - (uni.g_max - lo) * T::c(2.0);
        e_lo = eval(&mut search, lo);
    }

    let rho_tol = opts.rho_tol.max(T::c(4.0) * T::epsilon()) * scale;
    let mut iterations = 0;
    let mut hit: Option<(T, Eval<T>)> = None;
    while iterations < opts.max_iter && hi - lo > rho_tol {
        iterations += 1;
        let mid = lo + (hi - lo) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = eval(&mut search, mid);
        if e.g.is_finite() && e.g.abs() <= search.g_abs_tol && e.lower.is_some() && e.upper.is_some() {
            hit = Some((mid, e));
            break;
        }
        if e.g > T::zero() {
            lo = mid;
            e_lo = e;
        } else {
            hi = mid;
            e_hi = e;
        }
    }
    let (rho_star, e) = hit.unwrap_or_else(|| {
        let complete = |e: &Eval<T>| e.g.is_finite() && e.lower.is_some() && e.upper.is_some();
        if complete(&e_lo) {
            (lo, e_lo)
        } else {
            (hi, e_hi)
        }
    });

    let h_zero = payoff.h.is_zero();
    let crossings_found = e.lower.is_some() && e.upper.is_some() && e.g.is_finite();
    let degeneracy = if h_zero && rho_star <= T::zero() {
        Degeneracy::InactionCandidate
    } else if !crossings_found {
        return Err(if e.g.is_infinite() && uni.g_max.is_infinite() {
            Error::Unbounded
        } else {
            Error::NoThreshold {
                rho_sup: rho_star.as_f64(),
            }
        });
    } else {
        Degeneracy::None
    };

    let big_s = e.upper.unwrap_or(uni.a + opts.working_bound);
    let x_lower = e.lower.unwrap_or(uni.a - opts.working_bound);
    let s = e.s;
    if let Restart::Fixed { point } = payoff.restart {
        if point >= big_s {
            return Err(Error::RestartAboveThreshold {
                restart: point.as_f64(),
            });
        }
    }
    let cycle_residual = search.xi(rho_star, s, big_s) - payoff.k;
    let used_special_shortcut = payoff.restart == Restart::Free && search.shortcut && s == x_lower;
    Ok(PolicySolution {
        rho_star,
        s,
        big_s,
        x_lower,
        a: uni.a,
        g_max: uni.g_max,
        cycle_residual,
        used_special_shortcut,
        shortcut_gap: if used_special_shortcut { e.gap } else { None },
        speciality: prep.speciality,
        degeneracy,
        iterations,
        g_function: search.memo,
        gain_provenance: prep.gain.provenance,
        potential_residual: prep.potential.residual,
    })
}

/// `Ξ_ρ(x)` up to `x̄` for a prepared problem.
pub fn cycle_surplus<T: Scalar>(prep: &Prepared<T>, rho: T, x: T, xbar: T) -> T {
    let g = &prep.gain;
    xi(&prep.potential, |y| g.eval(y), rho, x, xbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::JumpLaw;
    use crate::transform::{Gamma, RunningCost};
    use approx::assert_relative_eq;

    fn bm() -> LevyModel<f64> {
        LevyModel::brownian(1.0, 2.0).unwrap()
    }

    #[test]
    fn brownian_quadratic_cost() {
        let p = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), 4.0 / 3.0).unwrap();
        let sol = solve(&bm(), &p, &SolveOptions::default()).unwrap();
        // g = -(x-1)², u ≡ 1: Ξ_ρ(x̲) = (4/3)(-ρ)^{3/2} = K at ρ = -1
        assert_relative_eq!(sol.rho_star, -1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.big_s, 2.0, epsilon = 1e-8);
        assert_relative_eq!(sol.s, 0.0, epsilon = 1e-7);
        assert!(sol.used_special_shortcut);
        assert!(sol.cycle_residual.abs() < 1e-8);
        assert!(sol.g_function.is_monotone(1e-12));
        assert_eq!(sol.degeneracy, Degeneracy::None);
    }

    #[test]
    fn fixed_restart_logistic() {
        let model = LevyModel::pure_drift(1.0).unwrap();
        let p = PayoffSpec::new(Gamma::Logistic { l: 2.0, s: 1.0 }, RunningCost::Zero, 0.2).unwrap();
        let sol = solve_fixed_restart(&model, &p, 0.0, &SolveOptions::default()).unwrap();
        let gamma = |x: f64| 2.0 / (1.0 + (-x).exp());
        let g = |x: f64| 0.5 / (x / 2.0).cosh().powi(2);
        // ρ x̄ = γ(x̄) - γ(0) - K and g(x̄) = ρ
        assert_relative_eq!(g(sol.big_s), sol.rho_star, epsilon = 1e-9);
        assert_relative_eq!(sol.rho_star * sol.big_s, gamma(sol.big_s) - 1.0 - 0.2, epsilon = 1e-8);
        assert_eq!(sol.s, 0.0);
    }

    #[test]
    fn constant_gain_has_no_threshold() {
        let model = LevyModel::pure_drift(1.0).unwrap();
        let p = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::Zero, 1.0).unwrap();
        assert!(matches!(
            solve(&model, &p, &SolveOptions::default()),
            Err(Error::NoThreshold { .. })
        ));
    }

    #[test]
    fn logistic_with_large_cost_is_inaction_candidate() {
        let model = LevyModel::pure_drift(1.0).unwrap();
        let p = PayoffSpec::new(Gamma::Logistic { l: 2.0, s: 1.0 }, RunningCost::Zero, 3.0).unwrap();
        let sol = solve(&model, &p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.degeneracy, Degeneracy::InactionCandidate);
        assert!(sol.rho_star <= 0.0);
    }

    #[test]
    fn unbounded_exponential_gain() {
        let model = LevyModel::brownian(1.0, 2.0).unwrap();
        let p = PayoffSpec::new(Gamma::Exponential { scale: 1.0 }, RunningCost::Zero, 1.0);
        // no ladder jumps and no running cost: g = e^x
        let sol = solve(&model, &p.unwrap(), &SolveOptions::default());
        assert!(matches!(sol, Err(Error::Unbounded)));
    }

    #[test]
    fn roots_report_missing_sides() {
        let l = build_ladder_system(&bm(), &LadderOptions::default()).unwrap();
        let p = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), 1.0).unwrap();
        let g = gain_rate(&l, &p).unwrap();
        let uni = check_unimodal(&g, -5.0, 5.0, 0.01).unwrap();
        let (lo, hi) = threshold_roots(&g, -1.0, &uni, 100.0).unwrap();
        assert_relative_eq!(lo, 0.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 2.0, epsilon = 1e-12);
        assert!(matches!(
            threshold_roots(&g, 0.5, &uni, 100.0),
            Err(Error::AboveMaximum { .. })
        ));
        let flat = gain_rate(
            &l,
            &PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::Zero, 1.0).unwrap(),
        )
        .unwrap();
        let uni = check_unimodal(&flat, -5.0, 5.0, 0.01).unwrap();
        assert!(matches!(
            threshold_roots(&flat, 0.5, &uni, 100.0),
            Err(Error::NoLowerCrossing { .. })
        ));
    }

    #[test]
    fn spectrally_positive_band() {
        let model = LevyModel::<f64>::new(-1.0, 0.0, 4.0, Some(JumpLaw::ExponentialUp { eta: 1.0 })).unwrap();
        let p = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), 1.0).unwrap();
        let sol = solve(&model, &p, &SolveOptions::default()).unwrap();
        assert!(sol.s < sol.big_s);
        assert!(sol.cycle_residual.abs() < 1e-7);
        assert!(sol.g_function.is_monotone(1e-10));
    }
}
