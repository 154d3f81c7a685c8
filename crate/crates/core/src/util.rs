//! Small numeric helpers: compensated summation, double-double arithmetic,
//! nearest-integer splitting and deterministic low-discrepancy offsets.

use num_complex::Complex64;

/// Splits `x` into `(K, eps)` with `x = K + eps`, `K` integer and
/// `eps` in `(-1/2, 1/2]`; the tie `|eps| = 1/2` is resolved as `eps = +1/2`.
#[inline]
pub fn nearest_int_split(x: f64) -> (i64, f64) {
    let k = (x - 0.5).ceil();
    (k as i64, x - k)
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    nearest_int_split(x).1.abs()
}

/// Kahan compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }

    /// Subtracts the nearest integer from the running sum when it grows,
    /// keeping full precision of the fractional part. Only meaningful when the
    /// accumulator is used as a phase in units of full turns.
    #[inline]
    pub fn reduce_mod_1(&mut self) {
        if self.sum.abs() > 0.5 {
            self.sum -= self.sum.round();
        }
    }
}

/// Compensated complex accumulator (a Kahan pair).
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanComplex {
    re: Kahan,
    im: Kahan,
}

impl KahanComplex {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    (s, (a - (s - v)) + (b - v))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

/// Double-double value `hi + lo` carrying roughly 106 bits of mantissa.
/// Used by the integer-recurrence extension of trace sequences, where the
/// fractional part must stay accurate while the magnitude approaches 1e15.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[allow(clippy::should_implement_trait)]
impl Dd {
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, c: f64) -> Dd {
        let (p, e) = two_prod(self.hi, c);
        let e = e + self.lo * c;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Nearest-integer split with the same tie rule as [`nearest_int_split`].
    /// Valid while `|hi| < 2^52`, which the 1e15 overflow gate guarantees.
    pub fn split_nearest_int(self) -> (i64, f64) {
        let k = (self.hi - 0.5).ceil();
        // hi - k is exact by Sterbenz for the magnitudes involved.
        let mut eps = (self.hi - k) + self.lo;
        let mut ki = k as i64;
        // The f64 rounding of eps can fall just outside (-1/2, 1/2].
        if eps > 0.5 {
            eps -= 1.0;
            ki += 1;
        } else if eps <= -0.5 {
            eps += 1.0;
            ki -= 1;
        }
        (ki, eps)
    }
}

/// SplitMix64 step, used to derive deterministic sub-seeds and offsets.
#[inline]
pub fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    *state = z ^ (z >> 31);
}

/// Maps a seed to a point of [0, 1).
pub fn seed_to_unit(seed: u64) -> f64 {
    let mut s = seed;
    splitmix64(&mut s);
    (s >> 11) as f64 / (1u64 << 53) as f64
}

const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

/// `count` low-discrepancy starting offsets in `[0, span)`: a Kronecker
/// (golden-rotation) sequence started at a seeded point.
pub fn golden_offsets(seed: u64, count: usize, span: f64) -> Vec<f64> {
    let u0 = seed_to_unit(seed);
    (0..count)
        .map(|i| ((u0 + i as f64 * GOLDEN_FRAC).fract()) * span)
        .collect()
}
