//! Payoff specification and the gain rate `g = A_Hγ - ĥ`.
//!
//! `A_H` is the generator of the ascending ladder height `H`; `ĥ` integrates
//! the running cost over one excursion below the running supremum,
//! `ĥ(x) = ∫ h(x - z) U↓(dz)`. The maximum representation
//! `E_x[γ(X_{τ_y}) - ∫_0^{τ_y} h(X_s) ds] - γ(x) = ∫_x^y g(s) U(ds - x)`
//! makes `g` the net reward rate per unit of ladder time at supremum level `x`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ladder::{DescendingRep, LadderSystem};
use crate::numerics::{binomial, golden_section_max, UniformTable};
use crate::process::SpectralClass;
use crate::scalar::Scalar;
use crate::tail::TailFunction;

/// Terminal payoff `γ`, collected when the controller intervenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Gamma<T> {
    /// `c·x`.
    Linear { c: T },
    /// `Σ a_i x^i`, ascending coefficients.
    Polynomial { coeffs: Vec<T> },
    /// `l / (1 + e^{-s x})`.
    Logistic { l: T, s: T },
    /// `scale · e^x`.
    Exponential { scale: T },
}

/// Running cost `h >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum RunningCost<T> {
    Zero,
    /// `Σ c_i x^i`, ascending coefficients.
    Polynomial {
        coeffs: Vec<T>,
    },
    /// `a1·e^{a2 x} + b1·e^{-b2 x}`.
    Exponential {
        a1: T,
        a2: T,
        b1: T,
        b2: T,
    },
    /// `w·(x - m)²`.
    QuadraticShift {
        w: T,
        m: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Restart<T> {
    /// The controller may shift the state to any level below the trigger.
    Free,
    /// Every intervention restarts the process at `point`.
    Fixed { point: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec<T> {
    pub gamma: Gamma<T>,
    pub h: RunningCost<T>,
    /// Fixed cost per intervention.
    pub k: T,
    pub restart: Restart<T>,
}

fn horner<T: Scalar>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, c| acc * x + *c)
}

fn trim<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    while v.len() > 1 && *v.last().expect("non-empty") == T::zero() {
        v.pop();
    }
    v
}

fn finite_all<T: Scalar>(name: &'static str, vals: &[T]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(name, "parameters must be finite"))
    }
}

impl<T: Scalar> Gamma<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Gamma::Linear { c } => {
                finite_all("gamma", &[*c])?;
                if *c < T::zero() {
                    return Err(invalid("gamma", "linear payoff must be nondecreasing (c >= 0)"));
                }
            }
            Gamma::Polynomial { coeffs } => {
                finite_all("gamma", coeffs)?;
                if coeffs.is_empty() {
                    return Err(invalid("gamma", "polynomial needs at least one coefficient"));
                }
            }
            Gamma::Logistic { l, s } => {
                finite_all("gamma", &[*l, *s])?;
                if !(*l > T::zero() && *s > T::zero()) {
                    return Err(invalid("gamma", "logistic payoff needs l > 0 and s > 0"));
                }
            }
            Gamma::Exponential { scale } => {
                finite_all("gamma", &[*scale])?;
                if *scale < T::zero() {
                    return Err(invalid("gamma", "exponential payoff needs scale >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: T) -> T {
        match self {
            Gamma::Linear { c } => *c * x,
            Gamma::Polynomial { coeffs } => horner(coeffs, x),
            Gamma::Logistic { l, s } => *l / (T::one() + (-*s * x).exp()),
            Gamma::Exponential { scale } => *scale * x.exp(),
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self {
            Gamma::Linear { c } => *c,
            Gamma::Polynomial { coeffs } => {
                let d: Vec<T> = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, a)| *a * T::from_count(i))
                    .collect();
                horner(&d, x)
            }
            Gamma::Logistic { l, s } => {
                // l s e^{-sx} / (1 + e^{-sx})², written to stay finite for large |x|
                let e = (-(*s * x).abs()).exp();
                *l * *s * e / ((T::one() + e) * (T::one() + e))
            }
            Gamma::Exponential { scale } => *scale * x.exp(),
        }
    }

    /// Ascending polynomial coefficients when `γ` is polynomial.
    pub fn polynomial(&self) -> Option<Vec<T>> {
        match self {
            Gamma::Linear { c } => Some(vec![T::zero(), *c]),
            Gamma::Polynomial { coeffs } => Some(coeffs.clone()),
            _ => None,
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        match self {
            Gamma::Linear { c: a } => Gamma::Linear { c: *a * c },
            Gamma::Polynomial { coeffs } => Gamma::Polynomial {
                coeffs: coeffs.iter().map(|a| *a * c).collect(),
            },
            Gamma::Logistic { l, s } => Gamma::Logistic { l: *l * c, s: *s },
            Gamma::Exponential { scale } => Gamma::Exponential { scale: *scale * c },
        }
    }
}

impl<T: Scalar> RunningCost<T> {
    pub fn monomial(degree: usize, c: T) -> Self {
        let mut coeffs = vec![T::zero(); degree + 1];
        coeffs[degree] = c;
        RunningCost::Polynomial { coeffs }
    }

    pub fn constant(c: T) -> Self {
        RunningCost::Polynomial { coeffs: vec![c] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunningCost::Zero => Ok(()),
            RunningCost::Polynomial { coeffs } => {
                finite_all("h", coeffs)?;
                if coeffs.is_empty() {
                    return Err(invalid("h", "polynomial needs at least one coefficient"));
                }
                Ok(())
            }
            RunningCost::Exponential { a1, a2, b1, b2 } => {
                finite_all("h", &[*a1, *a2, *b1, *b2])?;
                if *a1 < T::zero() || *b1 < T::zero() {
                    return Err(invalid("h", "exponential cost needs a1, b1 >= 0"));
                }
                Ok(())
            }
            RunningCost::QuadraticShift { w, m } => {
                finite_all("h", &[*w, *m])?;
                if *w < T::zero() {
                    return Err(invalid("h", "quadratic cost needs w >= 0"));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RunningCost::Zero => true,
            RunningCost::Polynomial { coeffs } => coeffs.iter().all(|c| *c == T::zero()),
            RunningCost::Exponential { a1, b1, .. } => *a1 == T::zero() && *b1 == T::zero(),
            RunningCost::QuadraticShift { w, .. } => *w == T::zero(),
        }
    }

    pub fn eval(&self, x: T) -> T {
        match self {
            RunningCost::Zero => T::zero(),
            RunningCost::Polynomial { coeffs } => horner(coeffs, x),
            RunningCost::Exponential { a1, a2, b1, b2 } => *a1 * (*a2 * x).exp() + *b1 * (-*b2 * x).exp(),
            RunningCost::QuadraticShift { w, m } => *w * (x - *m) * (x - *m),
        }
    }

    /// Ascending polynomial coefficients when `h` is polynomial.
    pub fn polynomial(&self) -> Option<Vec<T>> {
        match self {
            RunningCost::Zero => Some(vec![T::zero()]),
            RunningCost::Polynomial { coeffs } => Some(coeffs.clone()),
            RunningCost::QuadraticShift { w, m } => Some(vec![*w * *m * *m, -T::c(2.0) * *w * *m, *w]),
            RunningCost::Exponential { .. } => None,
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        match self {
            RunningCost::Zero => RunningCost::Zero,
            RunningCost::Polynomial { coeffs } => RunningCost::Polynomial {
                coeffs: coeffs.iter().map(|a| *a * c).collect(),
            },
            RunningCost::Exponential { a1, a2, b1, b2 } => RunningCost::Exponential {
                a1: *a1 * c,
                a2: *a2,
                b1: *b1 * c,
                b2: *b2,
            },
            RunningCost::QuadraticShift { w, m } => RunningCost::QuadraticShift { w: *w * c, m: *m },
        }
    }
}

impl<T: Scalar> PayoffSpec<T> {
    /// Free-restart payoff; validates parameters and `K > 0`.
    pub fn new(gamma: Gamma<T>, h: RunningCost<T>, k: T) -> Result<Self> {
        let spec = Self {
            gamma,
            h,
            k,
            restart: Restart::Free,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_restart(mut self, restart: Restart<T>) -> Result<Self> {
        self.restart = restart;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > T::zero() && self.k.is_finite()) {
            return Err(invalid(
                "K",
                format!("fixed cost must be finite and > 0, got {}", self.k),
            ));
        }
        self.gamma.validate()?;
        self.h.validate()?;
        if let Restart::Fixed { point } = self.restart {
            if !point.is_finite() {
                return Err(invalid("restart.point", "must be finite"));
            }
        }
        Ok(())
    }

    /// Samples `γ' >= 0` and `h >= 0` on `[lo, hi]`; returns the first
    /// violating point, if any. The technique assumes both on the working
    /// interval.
    pub fn check_on(&self, lo: T, hi: T, n: usize) -> Option<(&'static str, T)> {
        let n = n.max(2);
        for i in 0..n {
            let x = lo + (hi - lo) * T::from_count(i) / T::from_count(n - 1);
            let scale = T::one() + self.gamma.eval(x).abs();
            if self.gamma.derivative(x) < -T::c(1e-12) * scale {
                return Some(("gamma", x));
            }
            if self.h.eval(x) < -T::c(1e-12) * (T::one() + self.h.eval(x).abs()) {
                return Some(("h", x));
            }
        }
        None
    }

    /// `(cγ, ch, cK)`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            gamma: self.gamma.scaled(c),
            h: self.h.scaled(c),
            k: self.k * c,
            restart: self.restart,
        }
    }
}

/// Closed-form or pointwise representation of `ĥ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HatH<T> {
    Zero,
    Polynomial {
        coeffs: Vec<T>,
    },
    /// `Σ c·e^{r x}` over `(c, r)` terms.
    ExpSum {
        terms: Vec<(T, T)>,
    },
}

impl<T: Scalar> HatH<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            HatH::Zero => T::zero(),
            HatH::Polynomial { coeffs } => horner(coeffs, x),
            HatH::ExpSum { terms } => terms.iter().map(|(c, r)| *c * (*r * x).exp()).sum(),
        }
    }
}

/// Kernel used for `ĥ`: identity for subordinators, otherwise `U↓`.
enum Kernel<'a, T> {
    Identity,
    Descending(&'a DescendingRep<T>),
    /// Spectrally negative ladder built without `U↓`: only mass-1 facts usable.
    Unknown,
}

fn kernel<T: Scalar>(ladder: &LadderSystem<T>) -> Kernel<'_, T> {
    match &ladder.desc_rep {
        Some(rep) => Kernel::Descending(rep),
        None if ladder.class == SpectralClass::Subordinator => Kernel::Identity,
        None => Kernel::Unknown,
    }
}

/// `ĥ(x) = ∫ h(x - z) U↓(dz)`; `ĥ = h` for subordinators.
pub fn hat_h<T: Scalar>(ladder: &LadderSystem<T>, h: &RunningCost<T>) -> Result<HatH<T>> {
    h.validate()?;
    if h.is_zero() {
        return Ok(HatH::Zero);
    }
    let ker = kernel(ladder);
    if let Some(c) = h.polynomial() {
        let c = trim(c);
        let moments: Vec<T> = match ker {
            Kernel::Identity => (0..c.len())
                .map(|r| if r == 0 { T::one() } else { T::zero() })
                .collect(),
            Kernel::Descending(rep) => (0..c.len()).map(|r| rep.moment(r)).collect(),
            Kernel::Unknown if c.len() == 1 => vec![T::one()],
            Kernel::Unknown => return Err(Error::MissingDescendingRep),
        };
        // x^m ↦ Σ_j C(m,j) x^j ∫(-z)^{m-j} U↓(dz)
        let mut d = vec![T::zero(); c.len()];
        for (m, cm) in c.iter().enumerate() {
            for (j, dj) in d.iter_mut().enumerate().take(m + 1) {
                *dj += *cm * binomial::<T>(m, j) * moments[m - j];
            }
        }
        return Ok(HatH::Polynomial { coeffs: d });
    }
    let RunningCost::Exponential { a1, a2, b1, b2 } = *h else {
        unreachable!("non-polynomial running costs are exponential");
    };
    let laplace = |theta: T| -> Result<T> {
        match ker {
            Kernel::Identity => Ok(T::one()),
            Kernel::Descending(rep) => rep.laplace(theta),
            Kernel::Unknown => Err(Error::MissingDescendingRep),
        }
    };
    let mut terms = Vec::new();
    if a1 != T::zero() {
        terms.push((a1 * laplace(a2)?, a2));
    }
    if b1 != T::zero() {
        // e^{-b2(x - z)} integrates e^{b2 z} against U↓.
        let l = laplace(-b2).map_err(|e| match e {
            Error::ExpMomentDiverges { bound, .. } => Error::ExpMomentDiverges {
                context: "running cost against descending kernel",
                rate: b2.as_f64(),
                bound,
            },
            other => other,
        })?;
        terms.push((b1 * l, -b2));
    }
    Ok(HatH::ExpSum { terms })
}

/// Representation of `A_Hγ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator<T> {
    Polynomial {
        coeffs: Vec<T>,
    },
    ExpSum {
        terms: Vec<(T, T)>,
    },
    /// `δ_H γ'(x) + ∫_0^∞ γ'(x+y) Π̄_H(y) dy` for logistic `γ`.
    Logistic {
        l: T,
        s: T,
        delta: T,
        tail: TailFunction<T>,
    },
}

impl<T: Scalar> Generator<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            Generator::Polynomial { coeffs } => horner(coeffs, x),
            Generator::ExpSum { terms } => terms.iter().map(|(c, r)| *c * (*r * x).exp()).sum(),
            Generator::Logistic { l, s, delta, tail } => {
                let gamma = Gamma::Logistic { l: *l, s: *s };
                let jumps = if tail.is_zero() {
                    T::zero()
                } else {
                    tail.integrate_against(|y| gamma.derivative(x + y), T::c(1e-12))
                        .unwrap_or_else(|_| T::nan())
                };
                *delta * gamma.derivative(x) + jumps
            }
        }
    }
}

/// `A_Hγ(x) = δ_H γ'(x) + ∫_0^∞ (γ(x+y) - γ(x)) Π_H(dy)`.
pub fn generator_gamma<T: Scalar>(ladder: &LadderSystem<T>, gamma: &Gamma<T>) -> Result<Generator<T>> {
    gamma.validate()?;
    let delta = ladder.delta_h;
    let tail = &ladder.pi_bar_h;
    match gamma {
        Gamma::Linear { c } => Ok(Generator::Polynomial {
            coeffs: vec![*c * ladder.mean_rate],
        }),
        Gamma::Polynomial { coeffs } => {
            let a = trim(coeffs.clone());
            let l = a.len() - 1;
            let moments: Vec<T> = (0..=l).map(|r| tail.moment(r)).collect();
            if let Some(r) = moments.iter().skip(1).position(|m| !m.is_finite()) {
                return Err(Error::ExpMomentDiverges {
                    context: "polynomial moment of the ladder jumps",
                    rate: (r + 1) as f64,
                    bound: tail.decay_rate().as_f64(),
                });
            }
            // b_i = δ (i+1) a_{i+1} + Σ_{j=i+1}^{l} a_j C(j,i) m_{j-i}
            let mut b = vec![T::zero(); l.max(1)];
            for (i, bi) in b.iter_mut().enumerate() {
                if i < l {
                    *bi += delta * T::from_count(i + 1) * a[i + 1];
                }
                for (j, aj) in a.iter().enumerate().skip(i + 1) {
                    *bi += *aj * binomial::<T>(j, i) * moments[j - i];
                }
            }
            Ok(Generator::Polynomial { coeffs: trim(b) })
        }
        Gamma::Exponential { scale } => {
            let jumps = tail.exp_moment(T::one()).map_err(|_| Error::ExpMomentDiverges {
                context: "exponential payoff against ladder jumps",
                rate: 1.0,
                bound: tail.decay_rate().as_f64(),
            })?;
            Ok(Generator::ExpSum {
                terms: vec![(*scale * (delta + jumps), T::one())],
            })
        }
        Gamma::Logistic { l, s } => Ok(Generator::Logistic {
            l: *l,
            s: *s,
            delta,
            tail: tail.clone(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainProvenance {
    ClosedForm,
    Quadrature,
    Empirical,
}

/// Verified unimodality: `g` rises up to `a` and falls after it on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unimodal<T> {
    pub a: T,
    pub g_max: T,
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GainForm<T> {
    /// `Σ p_i x^i + Σ c·e^{r x}`.
    Closed { poly: Vec<T>, exps: Vec<(T, T)> },
    /// `A_Hγ - ĥ` evaluated pointwise, optionally through a cubic cache.
    Pointwise {
        generator: Generator<T>,
        hat: HatH<T>,
        cache: Option<UniformTable<T>>,
    },
}

/// The gain rate `g = A_Hγ - ĥ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRate<T> {
    pub form: GainForm<T>,
    pub provenance: GainProvenance,
    pub unimodal: Option<Unimodal<T>>,
}

impl<T: Scalar> GainRate<T> {
    pub fn eval(&self, x: T) -> T {
        match &self.form {
            GainForm::Closed { poly, exps } => {
                horner(poly, x) + exps.iter().map(|(c, r)| *c * (*r * x).exp()).sum::<T>()
            }
            GainForm::Pointwise { generator, hat, cache } => {
                if let Some(t) = cache {
                    if x >= t.start && x <= t.end() {
                        return t.cubic(x);
                    }
                }
                generator.eval(x) - hat.eval(x)
            }
        }
    }

    /// Polynomial coefficients when `g` is a pure polynomial.
    pub fn polynomial(&self) -> Option<&[T]> {
        match &self.form {
            GainForm::Closed { poly, exps } if exps.is_empty() => Some(poly),
            _ => None,
        }
    }

    /// Tabulates a pointwise gain rate on `[lo, hi]` for cubic lookup.
    pub fn cache_on(&mut self, lo: T, hi: T, n: usize) {
        if let GainForm::Pointwise { generator, hat, cache } = &mut self.form {
            *cache = None;
            let table = UniformTable::from_fn(lo, hi, n, |x| generator.eval(x) - hat.eval(x));
            *cache = Some(table);
        }
    }
}

fn combine<T: Scalar>(gen: Generator<T>, hat: HatH<T>, provenance: GainProvenance) -> GainRate<T> {
    let split = |g: &Generator<T>| match g {
        Generator::Polynomial { coeffs } => Some((coeffs.clone(), Vec::new())),
        Generator::ExpSum { terms } => Some((vec![T::zero()], terms.clone())),
        Generator::Logistic { tail, .. } if tail.is_zero() => None,
        Generator::Logistic { .. } => None,
    };
    let form = match split(&gen) {
        Some((mut poly, mut exps)) => {
            match &hat {
                HatH::Zero => {}
                HatH::Polynomial { coeffs } => {
                    if poly.len() < coeffs.len() {
                        poly.resize(coeffs.len(), T::zero());
                    }
                    for (p, d) in poly.iter_mut().zip(coeffs) {
                        *p -= *d;
                    }
                }
                HatH::ExpSum { terms } => exps.extend(terms.iter().map(|(c, r)| (-*c, *r))),
            }
            GainForm::Closed { poly: trim(poly), exps }
        }
        None => GainForm::Pointwise {
            generator: gen,
            hat,
            cache: None,
        },
    };
    let provenance = match (&form, provenance) {
        (
            GainForm::Pointwise {
                generator: Generator::Logistic { tail, .. },
                ..
            },
            GainProvenance::ClosedForm,
        ) if !tail.is_zero() => GainProvenance::Quadrature,
        (_, p) => p,
    };
    GainRate {
        form,
        provenance,
        unimodal: None,
    }
}

fn provenance_of<T: Scalar>(ladder: &LadderSystem<T>) -> GainProvenance {
    match ladder.provenance {
        crate::ladder::Provenance::Empirical => GainProvenance::Empirical,
        _ if matches!(ladder.desc_rep, Some(DescendingRep::EmpiricalOccupation(_))) => GainProvenance::Empirical,
        crate::ladder::Provenance::Quadrature => GainProvenance::Quadrature,
        crate::ladder::Provenance::ClosedForm => GainProvenance::ClosedForm,
    }
}

/// Polynomial `γ` and `h`: `g` is a polynomial of degree `max(l, k)`.
pub fn poly_gain_rate<T: Scalar>(
    ladder: &LadderSystem<T>,
    gamma: &Gamma<T>,
    h: &RunningCost<T>,
) -> Result<GainRate<T>> {
    if gamma.polynomial().is_none() || h.polynomial().is_none() {
        return Err(invalid(
            "gamma",
            "polynomial gain rate needs polynomial payoff and cost",
        ));
    }
    Ok(combine(
        generator_gamma(ladder, gamma)?,
        hat_h(ladder, h)?,
        provenance_of(ladder),
    ))
}

/// Exponential `γ` and `h`: `g(x) = e^x (δ_H + ∫(e^y - 1) Π_H(dy)) - ĥ(x)`.
pub fn exp_gain_rate<T: Scalar>(ladder: &LadderSystem<T>, gamma: &Gamma<T>, h: &RunningCost<T>) -> Result<GainRate<T>> {
    if !matches!(gamma, Gamma::Exponential { .. }) || !matches!(h, RunningCost::Exponential { .. } | RunningCost::Zero)
    {
        return Err(invalid(
            "gamma",
            "exponential gain rate needs exponential payoff and cost",
        ));
    }
    Ok(combine(
        generator_gamma(ladder, gamma)?,
        hat_h(ladder, h)?,
        provenance_of(ladder),
    ))
}

/// `g = A_Hγ - ĥ`, closed form whenever both parts are.
pub fn gain_rate<T: Scalar>(ladder: &LadderSystem<T>, payoff: &PayoffSpec<T>) -> Result<GainRate<T>> {
    Ok(combine(
        generator_gamma(ladder, &payoff.gamma)?,
        hat_h(ladder, &payoff.h)?,
        provenance_of(ladder),
    ))
}

/// Grid scan plus golden-section refinement of the maximum of `g` on
/// `[lo, hi]`; rejects an interior local minimum between two higher points.
pub fn check_unimodal<T: Scalar>(g: &GainRate<T>, lo: T, hi: T, grid_step: T) -> Result<Unimodal<T>> {
    check_unimodal_fn(|x| g.eval(x), lo, hi, grid_step)
}

pub fn check_unimodal_fn<T: Scalar, F: Fn(T) -> T>(g: F, lo: T, hi: T, grid_step: T) -> Result<Unimodal<T>> {
    if !(hi > lo) || !(grid_step > T::zero()) {
        return Err(invalid("interval", "need lo < hi and a positive grid step"));
    }
    let n = ((hi - lo) / grid_step)
        .ceil()
        .to_usize()
        .unwrap_or(2)
        .clamp(2, 2_000_000);
    let xs: Vec<T> = (0..=n)
        .map(|i| lo + (hi - lo) * T::from_count(i) / T::from_count(n))
        .collect();
    let ys: Vec<T> = xs.iter().map(|x| g(*x)).collect();
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(invalid("gain_rate", format!("non-finite value at x = {}", xs[i])));
    }
    let scale = ys.iter().fold(T::zero(), |m, y| m.max(y.abs())).max(T::one());
    let tol = T::c(1e-9) * scale;

    let mut prefix = Vec::with_capacity(ys.len());
    let mut best = T::neg_infinity();
    for y in &ys {
        best = best.max(*y);
        prefix.push(best);
    }
    let mut suffix = vec![T::neg_infinity(); ys.len()];
    let mut best = T::neg_infinity();
    for i in (0..ys.len()).rev() {
        best = best.max(ys[i]);
        suffix[i] = best;
    }
    for i in 1..ys.len() - 1 {
        if prefix[i - 1] - ys[i] > tol && suffix[i + 1] - ys[i] > tol {
            // report the deepest point of the dip
            let dip = (1..ys.len() - 1)
                .filter(|&j| prefix[j - 1] - ys[j] > tol && suffix[j + 1] - ys[j] > tol)
                .min_by(|&a, &b| ys[a].partial_cmp(&ys[b]).expect("finite"))
                .unwrap_or(i);
            return Err(Error::NotUnimodal { x: xs[dip].as_f64() });
        }
    }
    let top = prefix[ys.len() - 1];
    let first = ys.iter().position(|y| *y >= top - tol).expect("maximum exists");
    let mut last = first;
    while last + 1 < ys.len() && ys[last + 1] >= top - tol {
        last += 1;
    }
    let (a, g_max) = if last > first + 2 {
        // plateau: report its midpoint
        let mid = (first + last) / 2;
        (xs[mid], ys[mid].max(top))
    } else {
        let peak = (first..=last)
            .max_by(|&a, &b| ys[a].partial_cmp(&ys[b]).expect("finite"))
            .expect("non-empty");
        let l = xs[peak.saturating_sub(1)];
        let r = xs[(peak + 1).min(n)];
        let xtol = T::c(1e-12) * (T::one() + xs[peak].abs()).max((r - l) * T::c(1e-9));
        let (a, ga) = golden_section_max(&g, l, r, xtol);
        if ga >= ys[peak] {
            (a, ga)
        } else {
            (xs[peak], ys[peak])
        }
    };
    Ok(Unimodal { a, g_max, lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::{build_ladder_system, LadderOptions};
    use crate::process::{JumpLaw, LevyModel};
    use approx::assert_relative_eq;

    fn bm_ladder() -> LadderSystem<f64> {
        build_ladder_system(&LevyModel::brownian(1.0, 2.0).unwrap(), &LadderOptions::default()).unwrap()
    }

    fn drift_ladder(d: f64) -> LadderSystem<f64> {
        build_ladder_system(&LevyModel::pure_drift(d).unwrap(), &LadderOptions::default()).unwrap()
    }

    #[test]
    fn hat_h_of_constant_is_constant() {
        let h = RunningCost::constant(2.5);
        assert_eq!(hat_h(&bm_ladder(), &h).unwrap().eval(7.0), 2.5);
        let up = build_ladder_system(
            &LevyModel::new(-1.0, 0.0, 4.0, Some(JumpLaw::ExponentialUp { eta: 1.0 })).unwrap(),
            &LadderOptions::default(),
        )
        .unwrap();
        assert_eq!(hat_h(&up, &h).unwrap().eval(-3.0), 2.5);
    }

    #[test]
    fn hat_h_polynomial_and_exponential() {
        let l = bm_ladder();
        let hh = hat_h(&l, &RunningCost::monomial(2, 1.0)).unwrap();
        // ∫ (x - z)² e^{-z} dz = x² - 2x + 2
        for x in [-2.0, 0.0, 1.5] {
            assert_relative_eq!(hh.eval(x), x * x - 2.0 * x + 2.0, epsilon = 1e-12);
        }
        let e = RunningCost::Exponential {
            a1: 1.0,
            a2: 0.5,
            b1: 0.0,
            b2: 0.0,
        };
        let he = hat_h(&l, &e).unwrap();
        assert_relative_eq!(he.eval(1.0), 2.0 / 3.0 * 0.5f64.exp(), epsilon = 1e-12);
        let bad = RunningCost::Exponential {
            a1: 0.0,
            a2: 0.0,
            b1: 1.0,
            b2: 1.0,
        };
        assert!(matches!(hat_h(&l, &bad), Err(Error::ExpMomentDiverges { .. })));
    }

    #[test]
    fn hat_h_quadrature_cross_check() {
        let l = bm_ladder();
        let rep = l.desc_rep.clone().unwrap();
        let h = RunningCost::QuadraticShift { w: 2.0, m: 0.5 };
        let closed = hat_h(&l, &h).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            let quad = rep.integrate(|z| h.eval(x - z)).unwrap();
            assert_relative_eq!(closed.eval(x), quad, epsilon = 1e-9);
        }
    }

    #[test]
    fn subordinator_hat_h_is_h() {
        let sub = build_ladder_system(
            &LevyModel::new(1.0, 0.0, 1.0, Some(JumpLaw::ExponentialUp { eta: 1.0 })).unwrap(),
            &LadderOptions::default(),
        )
        .unwrap();
        let h = RunningCost::monomial(2, 1.0);
        assert_eq!(hat_h(&sub, &h).unwrap().eval(3.0), 9.0);
        let g = gain_rate(&sub, &PayoffSpec::new(Gamma::Linear { c: 1.0 }, h, 1.0).unwrap()).unwrap();
        assert_relative_eq!(g.eval(3.0), 2.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_examples() {
        let tail = TailFunction::Exponential { scale: 3.0, rate: 1.0 };
        let l = LadderSystem::from_parts(0.0, tail, None).unwrap();
        let a = generator_gamma(
            &l,
            &Gamma::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
        )
        .unwrap();
        for x in [-1.0, 0.0, 2.0] {
            assert_relative_eq!(a.eval(x), 6.0 * x + 6.0, epsilon = 1e-12);
        }
        let lin = generator_gamma(&l, &Gamma::Linear { c: 2.0 }).unwrap();
        assert_eq!(lin.eval(5.0), 6.0);
        let constant = generator_gamma(&l, &Gamma::Polynomial { coeffs: vec![4.0] }).unwrap();
        assert_eq!(constant.eval(1.0), 0.0);
        let drift = drift_ladder(1.0);
        let logi = generator_gamma(&drift, &Gamma::Logistic { l: 2.0, s: 1.0 }).unwrap();
        let x: f64 = 0.7;
        assert_relative_eq!(
            logi.eval(x),
            2.0 * (-x).exp() / (1.0 + (-x).exp()).powi(2),
            epsilon = 1e-14
        );
    }

    #[test]
    fn logistic_generator_with_jumps_matches_difference_form() {
        let tail = TailFunction::Exponential { scale: 3.0, rate: 1.0 };
        let l = LadderSystem::from_parts(0.5, tail.clone(), None).unwrap();
        let gamma = Gamma::Logistic { l: 2.0, s: 1.0 };
        let a = generator_gamma(&l, &gamma).unwrap();
        let x = -0.4;
        // ∫(γ(x+y) - γ(x)) Π(dy) with Π(dy) = 3e^{-y} dy
        let jumps = crate::numerics::integrate_to_infinity(
            |y: f64| (gamma.eval(x + y) - gamma.eval(x)) * 3.0 * (-y).exp(),
            0.0,
            1.0,
            1e-13,
            1e4,
        )
        .unwrap();
        assert_relative_eq!(a.eval(x), 0.5 * gamma.derivative(x) + jumps, epsilon = 1e-9);
    }

    #[test]
    fn exponential_gamma_needs_tail_moment() {
        let l = LadderSystem::from_parts(0.0, TailFunction::Exponential { scale: 1.0, rate: 1.0 }, None).unwrap();
        assert!(matches!(
            generator_gamma(&l, &Gamma::Exponential { scale: 1.0 }),
            Err(Error::ExpMomentDiverges { .. })
        ));
        let l = LadderSystem::from_parts(1.0, TailFunction::Exponential { scale: 2.0, rate: 3.0 }, None).unwrap();
        let a = generator_gamma(&l, &Gamma::Exponential { scale: 1.0 }).unwrap();
        assert_relative_eq!(a.eval(0.0), 1.0 + 2.0 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gain_rate_examples() {
        let l = bm_ladder();
        let g = poly_gain_rate(&l, &Gamma::Linear { c: 1.0 }, &RunningCost::monomial(2, 1.0)).unwrap();
        assert_eq!(g.polynomial().unwrap(), &[-1.0, 2.0, -1.0]);
        let g0 = poly_gain_rate(&l, &Gamma::Linear { c: 1.0 }, &RunningCost::Zero).unwrap();
        assert_eq!(g0.eval(12.0), 1.0);
        let gc = poly_gain_rate(&l, &Gamma::Polynomial { coeffs: vec![3.0] }, &RunningCost::Zero).unwrap();
        assert_eq!(gc.eval(1.0), 0.0);
        let ge = exp_gain_rate(
            &l,
            &Gamma::Exponential { scale: 1.0 },
            &RunningCost::Exponential {
                a1: 1.0,
                a2: 0.5,
                b1: 0.0,
                b2: 0.0,
            },
        )
        .unwrap();
        let x: f64 = 0.8;
        assert_relative_eq!(ge.eval(x), x.exp() - 2.0 / 3.0 * (x / 2.0).exp(), epsilon = 1e-12);
        let logi = gain_rate(
            &drift_ladder(1.0),
            &PayoffSpec::new(Gamma::Logistic { l: 2.0, s: 1.0 }, RunningCost::Zero, 1.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(logi.eval(1.0), 0.5 / (0.5f64).cosh().powi(2), epsilon = 1e-14);
    }

    #[test]
    fn unimodality() {
        let u = check_unimodal_fn(|x: f64| -(x + 1.0).powi(2), -5.0, 5.0, 0.01).unwrap();
        assert!((u.a + 1.0).abs() < 1e-8);
        assert!(u.g_max.abs() < 1e-12);
        let u = check_unimodal_fn(|x: f64| 0.5 / (x / 2.0).cosh().powi(2), -10.0, 10.0, 0.01).unwrap();
        assert!(u.a.abs() < 1e-6);
        assert_relative_eq!(u.g_max, 0.5, epsilon = 1e-12);
        assert!(matches!(
            check_unimodal_fn(|x: f64| x * x, -1.0, 1.0, 0.01),
            Err(Error::NotUnimodal { .. })
        ));
        let flat = check_unimodal_fn(|_x: f64| 1.0, -4.0, 4.0, 0.01).unwrap();
        assert!(flat.a.abs() < 0.02);
    }

    #[test]
    fn payoff_validation() {
        let err = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::Zero, -1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "K", .. }));
        assert!(PayoffSpec::new(Gamma::Logistic { l: -1.0, s: 1.0 }, RunningCost::Zero, 1.0).is_err());
        let p = PayoffSpec::new(
            Gamma::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
            RunningCost::Zero,
            1.0,
        )
        .unwrap();
        assert_eq!(p.check_on(-1.0, 1.0, 11).map(|(n, _)| n), Some("gamma"));
    }
}
