//! Scalar root finding, maximization, quadrature and interpolation helpers.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Result of a bracketing root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub iterations: usize,
}

/// Plain bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign
/// (a zero endpoint is accepted as the root). Returns `None` without a sign change.
pub fn bisect<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    mut lo: T,
    mut hi: T,
    xtol: T,
    max_iter: usize,
) -> Option<Root<T>> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Some(Root { x: lo, iterations: 0 });
    }
    if fhi == T::zero() {
        return Some(Root { x: hi, iterations: 0 });
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    let two = T::c(2.0);
    let mut it = 0;
    while it < max_iter && (hi - lo).abs() > xtol {
        let mid = lo + (hi - lo) / two;
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        it += 1;
        if fm == T::zero() {
            return Some(Root { x: mid, iterations: it });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(Root {
        x: lo + (hi - lo) / two,
        iterations: it,
    })
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
///
/// Converges when the bracket is narrower than `2 * (rtol * |x| + atol)`.
pub fn brent<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    rtol: T,
    atol: T,
    max_iter: usize,
) -> Option<Root<T>> {
    let two = T::c(2.0);
    let three = T::c(3.0);
    let half = T::c(0.5);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Some(Root { x: a, iterations: 0 });
    }
    if fb == T::zero() {
        return Some(Root { x: b, iterations: 0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * T::epsilon() * b.abs() + half * (rtol * b.abs() + atol);
        let m = half * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Some(Root { x: b, iterations: it });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol { b + d } else { b + tol * m.signum() };
        fb = f(b);
    }
    Some(Root {
        x: b,
        iterations: max_iter,
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`; the endpoints are included as candidates.
pub fn golden_section_max<T: Scalar, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T) -> (T, T) {
    let inv_phi = T::c(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut guard = 0;
    while (b - a).abs() > xtol && guard < 400 {
        guard += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let (mut best_x, mut best_f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best_f {
            best_x = x;
            best_f = fx;
        }
    }
    (best_x, best_f)
}

fn simpson_step<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, fa: T, b: T, fb: T) -> (T, T, T) {
    let m = (a + b) / T::c(2.0);
    let fm = f(m);
    (m, fm, (b - a) / T::c(6.0) * (fa + T::c(4.0) * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec<T: Scalar, F: FnMut(T) -> T>(
    f: &mut F,
    a: T,
    fa: T,
    b: T,
    fb: T,
    m: T,
    fm: T,
    whole: T,
    tol: T,
    depth: usize,
) -> T {
    let (lm, flm, left) = simpson_step(f, a, fa, m, fm);
    let (rm, frm, right) = simpson_step(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::c(15.0) * tol {
        return left + right + delta / T::c(15.0);
    }
    let half = tol / T::c(2.0);
    adaptive_rec(f, a, fa, m, fm, lm, flm, left, half, depth - 1)
        + adaptive_rec(f, m, fm, b, fb, rm, frm, right, half, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson_step(&mut f, a, fa, b, fb);
    adaptive_rec(&mut f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// `∫_a^∞ f` for an integrand decaying at infinity, summed over doubling
/// segments until a segment contributes less than `tol`. Returns `None` when
/// the segments keep contributing up to `max_len` (divergent or too slowly
/// decaying integrand).
pub fn integrate_to_infinity<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    first_len: T,
    tol: T,
    max_len: T,
) -> Option<T> {
    let mut total = T::zero();
    let mut start = a;
    let mut len = first_len;
    let mut quiet = 0;
    while start - a < max_len {
        let piece = adaptive_simpson(&mut f, start, start + len, tol / T::c(8.0));
        total += piece;
        start += len;
        len *= T::c(2.0);
        if piece.abs() <= tol * (T::one() + total.abs()) {
            quiet += 1;
            if quiet >= 2 {
                return Some(total);
            }
        } else {
            quiet = 0;
        }
    }
    None
}

/// Composite Simpson rule on uniformly spaced samples. An even number of
/// panels uses Simpson throughout; an odd number closes with the 3/8 rule.
pub fn simpson_uniform<T: Scalar>(values: &[T], step: T) -> T {
    let n = values.len();
    match n {
        0 | 1 => T::zero(),
        2 => step * (values[0] + values[1]) / T::c(2.0),
        3 => step / T::c(3.0) * (values[0] + T::c(4.0) * values[1] + values[2]),
        _ => {
            let panels = n - 1;
            let (simpson_end, tail) = if panels.is_multiple_of(2) {
                (n - 1, false)
            } else {
                (n - 4, true)
            };
            let mut acc = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                acc += if i % 2 == 1 { T::c(4.0) * *v } else { T::c(2.0) * *v };
            }
            let mut total = step / T::c(3.0) * acc;
            if tail {
                let k = simpson_end;
                total += T::c(3.0) * step / T::c(8.0)
                    * (values[k] + T::c(3.0) * values[k + 1] + T::c(3.0) * values[k + 2] + values[k + 3]);
            }
            total
        }
    }
}

/// Compensated summation; keeps aggregated Monte Carlo totals independent of
/// the magnitude spread of the summands.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum
    }
}

impl<T: Scalar> FromIterator<T> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for v in iter {
            k.add(v);
        }
        k
    }
}

/// Ratio estimator `Σa / Σb` over i.i.d. pairs with its delta-method
/// standard error `sqrt(n/(n-1) Σ(a_i - R b_i)²) / Σb`.
pub fn ratio_estimate<T: Scalar>(num: &[T], den: &[T]) -> (T, T) {
    assert_eq!(num.len(), den.len(), "ratio estimator needs paired samples");
    let n = num.len();
    let sa: KahanSum<T> = num.iter().copied().collect();
    let sb: KahanSum<T> = den.iter().copied().collect();
    let (sa, sb) = (sa.total(), sb.total());
    if n == 0 || sb == T::zero() {
        return (T::nan(), T::nan());
    }
    let r = sa / sb;
    if n < 2 {
        return (r, T::zero());
    }
    let ss: KahanSum<T> = num
        .iter()
        .zip(den)
        .map(|(a, b)| {
            let e = *a - r * *b;
            e * e
        })
        .collect();
    let nf = T::from_count(n);
    let se = (ss.total() * nf / (nf - T::one())).sqrt() / sb.abs();
    (r, se)
}

/// Sample mean and standard error of the mean.
pub fn mean_se<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = xs.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::from_count(n);
    let mean = xs.iter().copied().collect::<KahanSum<T>>().total() / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let ss: KahanSum<T> = xs.iter().map(|x| (*x - mean) * (*x - mean)).collect();
    (mean, (ss.total() / (nf - T::one()) / nf).sqrt())
}

/// Piecewise interpolated function on a uniform grid `x_i = start + i * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformTable<T> {
    pub start: T,
    pub step: T,
    pub values: Vec<T>,
}

impl<T: Scalar> UniformTable<T> {
    pub fn from_fn<F: FnMut(T) -> T>(start: T, end: T, n: usize, mut f: F) -> Self {
        let n = n.max(2);
        let step = (end - start) / T::from_count(n - 1);
        let values = (0..n).map(|i| f(start + step * T::from_count(i))).collect();
        Self { start, step, values }
    }

    pub fn end(&self) -> T {
        self.start + self.step * T::from_count(self.values.len() - 1)
    }

    pub fn x(&self, i: usize) -> T {
        self.start + self.step * T::from_count(i)
    }

    fn locate(&self, x: T) -> (usize, T) {
        let n = self.values.len();
        let pos = ((x - self.start) / self.step).max(T::zero());
        let i = pos.floor().to_usize().unwrap_or(usize::MAX).min(n - 2);
        (i, pos - T::from_count(i))
    }

    /// Linear interpolation, constant extrapolation beyond the grid.
    pub fn linear(&self, x: T) -> T {
        if x <= self.start {
            return self.values[0];
        }
        if x >= self.end() {
            return *self.values.last().expect("non-empty table");
        }
        let (i, t) = self.locate(x);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Cubic Hermite interpolation with centred finite-difference slopes.
    pub fn cubic(&self, x: T) -> T {
        cubic_on_grid(&self.values, self.start, self.step, x)
    }
}

/// Cubic Hermite interpolation of samples `values[i]` at `start + i·step`,
/// linear near the ends and constant beyond them.
pub fn cubic_on_grid<T: Scalar>(v: &[T], start: T, step: T, x: T) -> T {
    let n = v.len();
    let end = start + step * T::from_count(n - 1);
    if x <= start {
        return v[0];
    }
    if x >= end {
        return v[n - 1];
    }
    let pos = (x - start) / step;
    let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
    let t = pos - T::from_count(i);
    if n < 4 {
        return v[i] + t * (v[i + 1] - v[i]);
    }
    let half = T::c(0.5);
    let slope = |k: usize| -> T {
        if k == 0 {
            v[1] - v[0]
        } else if k == n - 1 {
            v[n - 1] - v[n - 2]
        } else {
            half * (v[k + 1] - v[k - 1])
        }
    };
    let (p0, p1, m0, m1) = (v[i], v[i + 1], slope(i), slope(i + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    let two = T::c(2.0);
    let three = T::c(3.0);
    (two * t3 - three * t2 + T::one()) * p0 + (t3 - two * t2 + t) * m0 + (-two * t3 + three * t2) * p1 + (t3 - t2) * m1
}

/// Binomial coefficient as a scalar.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    T::c(acc.round())
}

pub fn factorial<T: Scalar>(n: usize) -> T {
    T::c((1..=n).fold(1.0f64, |acc, k| acc * k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-13, 200).unwrap();
        assert_relative_eq!(r.x, 2f64.sqrt(), epsilon = 1e-12);
        assert!(bisect(|x: f64| x * x + 1.0, 0.0, 2.0, 1e-13, 200).is_none());
    }

    #[test]
    fn brent_matches_closed_form() {
        let r = brent(|x: f64| x.cos() - x, 0.0, 1.0, 1e-14, 0.0, 100).unwrap();
        assert_relative_eq!(r.x, 0.739_085_133_215_160_6, epsilon = 1e-12);
        assert!(r.iterations < 20);
    }

    #[test]
    fn brent_in_single_precision() {
        let r = brent(|x: f32| x * x - 3.0, 1.0, 2.0, 1e-6, 0.0, 100).unwrap();
        assert!((r.x - 3f32.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn golden_section_interior_and_endpoint() {
        let (x, fx) = golden_section_max(|x: f64| -(x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
        let (x, _) = golden_section_max(|x: f64| -x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn quadrature_rules() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
        let tail = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, 1.0, 1e-12, 1e4).unwrap();
        assert_relative_eq!(tail, 1.0, epsilon = 1e-9);
        assert!(integrate_to_infinity(|_x: f64| 1.0, 0.0, 1.0, 1e-12, 1e3).is_none());
        let xs: Vec<f64> = (0..=10).map(|i| (i as f64 * 0.1).powi(3)).collect();
        assert_relative_eq!(simpson_uniform(&xs, 0.1), 0.25, epsilon = 1e-12);
        let odd: Vec<f64> = (0..=9).map(|i| (i as f64 * 0.1).powi(3)).collect();
        assert_relative_eq!(simpson_uniform(&odd, 0.1), 0.9f64.powi(4) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn kahan_beats_naive() {
        let k: KahanSum<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).collect();
        assert_relative_eq!(k.total(), 1.0 + 1e-12, epsilon = 1e-15);
    }

    #[test]
    fn tables_interpolate() {
        let t = UniformTable::from_fn(0.0, 1.0, 101, |x: f64| x * x);
        assert!((t.linear(0.505) - 0.505 * 0.505).abs() < 1e-4);
        assert!((t.cubic(0.505) - 0.505 * 0.505).abs() < 1e-8);
        assert_eq!(t.linear(2.0), 1.0);
    }

    #[test]
    fn ratio_and_mean_estimators() {
        let (r, se) = ratio_estimate(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_eq!(r, 2.0);
        assert_eq!(se, 0.0);
        let (r, se) = ratio_estimate(&[1.0, 3.0], &[1.0, 1.0]);
        assert_eq!(r, 2.0);
        assert_relative_eq!(se, 1.0);
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_relative_eq!(se, (5.0f64 / 3.0 / 4.0).sqrt());
    }

    #[test]
    fn combinatorics() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(2, 3), 0.0);
        assert_eq!(factorial::<f64>(4), 24.0);
    }
}
