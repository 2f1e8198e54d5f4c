// SPDX-License-Identifier: MIT OR Apache-2.0

//! Compensated summation and the standard-normal quantile function.

use crate::error::{Error, Result};

/// Kahan-Babuska-Neumaier accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Unevaluated (high, low) pair; `high + low` is the compensated sum.
    #[inline]
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(xs.iter().copied());
    acc.value()
}

/// Arithmetic mean computed around the first element as pivot.
///
/// Deviations from the pivot are exact for constant data, so the mean of a
/// constant slice is returned bit-exactly.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of an empty slice");
    let pivot = xs[0];
    let mut acc = NeumaierSum::new();
    acc.extend(xs.iter().map(|&x| x - pivot));
    pivot + acc.value() / xs.len() as f64
}

/// Prefix sums of `x_i - pivot` stored as unevaluated double-double pairs.
///
/// `window_sum(a, b)` returns the sum over the half-open range `a..b` of the
/// pivot-shifted values. Differences of prefix sums keep the low-order parts
/// so long series with a large common level do not lose precision.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    pivot: f64,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSums {
    pub fn new(xs: &[f64]) -> Self {
        let pivot = xs.first().copied().unwrap_or(0.0);
        let mut hi = Vec::with_capacity(xs.len() + 1);
        let mut lo = Vec::with_capacity(xs.len() + 1);
        hi.push(0.0);
        lo.push(0.0);
        let mut acc = NeumaierSum::new();
        for &x in xs {
            acc.add(x - pivot);
            let (h, l) = acc.parts();
            hi.push(h);
            lo.push(l);
        }
        Self { pivot, hi, lo }
    }

    pub fn pivot(&self) -> f64 {
        self.pivot
    }

    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of `x_i - pivot` over zero-based `start..end`.
    #[inline]
    pub fn shifted_sum(&self, start: usize, end: usize) -> f64 {
        (self.hi[end] - self.hi[start]) + (self.lo[end] - self.lo[start])
    }

    /// Mean of the raw values over zero-based `start..end` (non-empty).
    #[inline]
    pub fn window_mean(&self, start: usize, end: usize) -> f64 {
        debug_assert!(end > start);
        self.pivot + self.shifted_sum(start, end) / (end - start) as f64
    }
}

/// Running argmin over a sequence of partial sums of `terms`, returning the
/// number of summed terms at the first minimum and the full trace.
///
/// The trace holds the partial sums after 1, 2, ..., len terms; ties resolve
/// to the smallest count.
pub fn partial_sum_argmin<I>(terms: I) -> (usize, f64, Vec<f64>)
where
    I: IntoIterator<Item = f64>,
{
    let mut acc = NeumaierSum::new();
    let mut best = (0usize, f64::INFINITY);
    let mut trace = Vec::new();
    for (i, t) in terms.into_iter().enumerate() {
        acc.add(t);
        let v = acc.value();
        trace.push(v);
        if v < best.1 {
            best = (i + 1, v);
        }
    }
    (best.0, best.1, trace)
}

// Wichura (1988), algorithm AS 241, PPND16.
const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn rational_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Standard-normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard-normal inverse CDF: rational approximation followed by one
/// Newton step against the erfc-based CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "normal_quantile requires 0 < p < 1; got {p}"
        )));
    }
    let x = rational_quantile(p);
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 && density.is_finite() {
        // Work on the tail nearer to x to avoid cancellation in cdf - p.
        let step = if x > 0.0 {
            let upper = 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
            ((1.0 - p) - upper) / density
        } else {
            (normal_cdf(x) - p) / density
        };
        let refined = x - step;
        if refined.is_finite() {
            return Ok(refined);
        }
    }
    Ok(x)
}
