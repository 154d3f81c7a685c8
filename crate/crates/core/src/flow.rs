//! Suspension-flow data: roof vectors on the simplex, piecewise-linear
//! cylindrical observables, tiling lengths, twisted sums, twisted Birkhoff
//! integrals in closed form, and the return-word product bound.
//!
//! Tile phases are accumulated as compensated fractional turns, so the phase
//! error stays below ~1e-9 over a million tiles regardless of orbit length.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::perron::EigenSystem;
use crate::substitution::{population_vector, ReturnWord, Substitution, Word};
use crate::util::{dist_to_int, Kahan, KahanComplex};

type C = Complex64;

const TAU: f64 = std::f64::consts::TAU;

/// Minimum admissible roof entry.
pub const MIN_ROOF: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoofProvenance {
    Explicit,
    Perron,
    Random { seed: u64 },
}

/// A strictly positive roof vector on the simplex (entries sum to 1).
#[derive(Clone, Debug)]
pub struct RoofVector {
    values: Vec<f64>,
    pub provenance: RoofProvenance,
}

impl RoofVector {
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::checked(values, RoofProvenance::Explicit)
    }

    fn checked(values: Vec<f64>, provenance: RoofProvenance) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("roof needs at least 2 entries".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "roof entries sum to {sum}, not 1 (within 1e-12)"
            )));
        }
        if values.iter().any(|&x| x < MIN_ROOF) {
            return Err(Error::InvalidParameter(format!(
                "roof entries must be >= {MIN_ROOF}"
            )));
        }
        Ok(RoofVector { values, provenance })
    }

    /// Perron-Frobenius eigenvector of the transpose matrix, normalized to
    /// the simplex: the self-similar roof.
    pub fn perron(es: &EigenSystem) -> Result<Self> {
        Self::checked(es.perron_roof(), RoofProvenance::Perron)
    }

    /// Seeded random point of the simplex (normalized exponentials).
    pub fn random(m: usize, seed: u64) -> Result<Self> {
        Self::random_with_floor(m, seed, MIN_ROOF)
    }

    /// Seeded random simplex point with every entry at least `floor`
    /// (rejection sampling from one deterministic stream). The quantitative
    /// bounds carry constants that degrade as `min_j s_j` shrinks, so
    /// experiments near the boundary need a floor to stay at desk scale.
    pub fn random_with_floor(m: usize, seed: u64, floor: f64) -> Result<Self> {
        if !(floor >= MIN_ROOF && floor * m as f64 <= 0.9) {
            return Err(Error::InvalidParameter(format!(
                "roof floor {floor} incompatible with m = {m}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..m)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let sum: f64 = raw.iter().sum();
            let values: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            if values.iter().all(|&x| x >= floor) {
                return Self::checked(values, RoofProvenance::Random { seed });
            }
        }
        Err(Error::InvalidParameter(
            "failed to sample an interior simplex point".into(),
        ))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Tiling length `<l(w), s>`, by exact letter count then dot product.
pub fn tiling_length(w: &Word, s: &[f64]) -> f64 {
    let pop = population_vector(w, s.len());
    pop.to_f64().iter().zip(s).map(|(c, &sj)| c * sj).sum()
}

// ---------------------------------------------------------------------------
// Piecewise-linear profiles and their twisted integrals
// ---------------------------------------------------------------------------

/// `int_0^h e^{z u} du` with a series branch for small |z h|.
fn phi0(z: C, h: f64) -> C {
    let zh = z * h;
    if zh.norm() < 1e-3 {
        h * (C::new(1.0, 0.0)
            + zh * (0.5 + zh * (C::new(1.0 / 6.0, 0.0) + zh * (1.0 / 24.0 + zh * (1.0 / 120.0)))))
    } else {
        (zh.exp() - 1.0) / z
    }
}

/// `int_0^h u e^{z u} du` with a series branch for small |z h|.
fn phi1(z: C, h: f64) -> C {
    let zh = z * h;
    if zh.norm() < 1e-3 {
        h * h
            * (C::new(0.5, 0.0)
                + zh * (C::new(1.0 / 3.0, 0.0)
                    + zh * (0.125 + zh * (C::new(1.0 / 30.0, 0.0) + zh * (1.0 / 144.0)))))
    } else {
        let e = zh.exp();
        h * e / z - (e - 1.0) / (z * z)
    }
}

/// Piecewise-linear complex profile on `[0, s_a]`, given by its knots.
#[derive(Clone, Debug)]
pub struct Profile {
    knots: Vec<(f64, C)>,
}

impl Profile {
    /// Validates the knot sequence: strictly increasing, starting at 0 and
    /// ending at `domain` (both snapped when within 1e-9 relative).
    pub fn new(mut knots: Vec<(f64, C)>, domain: f64) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("profile needs >= 2 knots".into()));
        }
        let tol = 1e-9 * domain.max(1.0);
        if knots[0].0.abs() <= tol {
            knots[0].0 = 0.0;
        }
        let last = knots.len() - 1;
        if (knots[last].0 - domain).abs() <= tol {
            knots[last].0 = domain;
        }
        if knots[0].0 != 0.0 || knots[last].0 != domain {
            return Err(Error::InvalidParameter(format!(
                "knots must cover [0, {domain}], got [{}, {}]",
                knots[0].0, knots[last].0
            )));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter(
                "knot abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Profile { knots })
    }

    pub fn constant(value: C, domain: f64) -> Self {
        Profile {
            knots: vec![(0.0, value), (domain, value)],
        }
    }

    pub fn domain(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    pub fn knots(&self) -> &[(f64, C)] {
        &self.knots
    }

    pub fn shift(&mut self, c: C) {
        for k in self.knots.iter_mut() {
            k.1 -= c;
        }
    }

    pub fn value(&self, t: f64) -> C {
        let t = t.clamp(0.0, self.domain());
        let idx = match self
            .knots
            .binary_search_by(|k| k.0.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.knots[i].1,
            Err(i) => i,
        };
        let (t0, y0) = self.knots[idx - 1];
        let (t1, y1) = self.knots[idx];
        y0 + (y1 - y0) * ((t - t0) / (t1 - t0))
    }

    /// max_t |psi(t)|; for a piecewise-linear profile |psi| is convex on each
    /// segment, so the maximum sits at a knot.
    pub fn sup_norm(&self) -> f64 {
        self.knots.iter().map(|k| k.1.norm()).fold(0.0, f64::max)
    }

    pub fn lipschitz(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).norm() / (w[1].0 - w[0].0))
            .fold(0.0, f64::max)
    }

    /// Exact mean `int_0^{s_a} psi` (trapezoid is exact here).
    pub fn mean(&self) -> C {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 + w[0].1) * (0.5 * (w[1].0 - w[0].0)))
            .sum()
    }

    pub fn abs2_mean(&self) -> f64 {
        // |psi|^2 is piecewise quadratic: Simpson is exact per segment.
        self.knots
            .windows(2)
            .map(|w| {
                let h = w[1].0 - w[0].0;
                let mid = (w[0].1 + w[1].1) * 0.5;
                h / 6.0 * (w[0].1.norm_sqr() + 4.0 * mid.norm_sqr() + w[1].1.norm_sqr())
            })
            .sum()
    }

    /// `int_lo^hi e^{-2 pi i omega (t - lo)} psi(t) dt` in closed form.
    /// The phase is referenced to `lo`, so callers can supply their own
    /// accurately reduced global phase factor.
    pub fn twisted_on(&self, lo: f64, hi: f64, omega: f64) -> C {
        debug_assert!(lo <= hi + 1e-12);
        if hi <= lo {
            return C::new(0.0, 0.0);
        }
        let z = C::new(0.0, -TAU * omega);
        let mut acc = C::new(0.0, 0.0);
        for w in self.knots.windows(2) {
            let (t0, y0) = w[0];
            let (t1, y1) = w[1];
            let a = t0.max(lo);
            let b = t1.min(hi);
            if b <= a {
                continue;
            }
            let slope = (y1 - y0) / (t1 - t0);
            let ya = y0 + slope * (a - t0);
            // local phase factor e^{-2 pi i omega (a - lo)}: a - lo <= tile
            // height, so this is full precision.
            let phase = C::from_polar(1.0, -TAU * omega * (a - lo));
            acc += phase * (ya * phi0(z, b - a) + slope * phi1(z, b - a));
        }
        acc
    }

    /// Fourier transform of the profile at `omega`.
    pub fn transform(&self, omega: f64) -> C {
        self.twisted_on(0.0, self.domain(), omega)
    }
}

/// A Lipschitz cylindrical observable: one piecewise-linear profile per
/// letter, defined on the tile of that letter.
#[derive(Clone, Debug)]
pub struct CylFunction {
    profiles: Vec<Profile>,
    lip_norm: f64,
    means: Vec<C>,
    mean_zero: bool,
}

pub const MEAN_ZERO_TOL: f64 = 1e-10;

impl CylFunction {
    pub fn new(profiles: Vec<Profile>, roof: &RoofVector, freq: &[f64]) -> Result<Self> {
        if profiles.len() != roof.len() {
            return Err(Error::InvalidParameter(
                "one profile per letter required".into(),
            ));
        }
        for (j, p) in profiles.iter().enumerate() {
            if (p.domain() - roof.values()[j]).abs() > 1e-9 * roof.values()[j].max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "profile {j} covers [0, {}], expected [0, {}]",
                    p.domain(),
                    roof.values()[j]
                )));
            }
        }
        let lip_norm = profiles
            .iter()
            .map(|p| p.sup_norm() + p.lipschitz())
            .fold(0.0, f64::max);
        let means: Vec<C> = profiles.iter().map(Profile::mean).collect();
        let weighted: C = means.iter().zip(freq).map(|(m, &f)| m * f).sum();
        let scale = means
            .iter()
            .zip(freq)
            .map(|(m, &f)| m.norm() * f)
            .sum::<f64>()
            .max(1.0);
        Ok(CylFunction {
            profiles,
            lip_norm,
            means,
            mean_zero: weighted.norm() <= MEAN_ZERO_TOL * scale,
        })
    }

    /// Subtracts the constant making the observable mean zero for the
    /// suspension measure, then constructs.
    pub fn normalized_mean_zero(
        mut profiles: Vec<Profile>,
        roof: &RoofVector,
        freq: &[f64],
    ) -> Result<Self> {
        let num: C = profiles
            .iter()
            .zip(freq)
            .map(|(p, &f)| p.mean() * f)
            .sum();
        let den: f64 = roof.values().iter().zip(freq).map(|(&s, &f)| s * f).sum();
        let c = num / den;
        for p in profiles.iter_mut() {
            p.shift(c);
        }
        Self::new(profiles, roof, freq)
    }

    /// Built-in deterministic mean-zero Lipschitz test observable.
    pub fn default_mean_zero(roof: &RoofVector, freq: &[f64]) -> Result<Self> {
        let profiles: Vec<Profile> = roof
            .values()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let w = sign * (1.0 + 0.25 * i as f64);
                Profile::new(
                    vec![
                        (0.0, C::new(0.9 * w, 0.0)),
                        (0.35 * s, C::new(1.3 * w, 0.0)),
                        (s, C::new(0.5 * w, 0.0)),
                    ],
                    s,
                )
                .expect("built-in profile is well formed")
            })
            .collect();
        Self::normalized_mean_zero(profiles, roof, freq)
    }

    /// Parses `{"psi": {"a": {"knots": [[t, re] | [t, re, im], ...]}, ...},
    /// "normalize_mean_zero": bool}`. Knot abscissae are absolute heights and
    /// must cover `[0, s_a]`.
    pub fn from_json(
        value: &serde_json::Value,
        subst: &Substitution,
        roof: &RoofVector,
        freq: &[f64],
    ) -> Result<Self> {
        let psi = value
            .get("psi")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Parse("function spec needs a 'psi' object".into()))?;
        let mut profiles: Vec<Option<Profile>> = vec![None; subst.alphabet_size()];
        for (key, spec) in psi {
            let mut chars = key.chars();
            let letter = chars
                .next()
                .filter(|_| chars.next().is_none())
                .ok_or_else(|| Error::Parse(format!("bad letter key '{key}'")))?;
            let idx = subst
                .letter_index(letter)
                .ok_or_else(|| Error::Parse(format!("unknown letter '{letter}'")))?
                as usize;
            let knots_json = spec
                .get("knots")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Parse(format!("psi.{key} needs a 'knots' array")))?;
            let mut knots = Vec::with_capacity(knots_json.len());
            for kj in knots_json {
                let arr = kj
                    .as_array()
                    .filter(|a| a.len() == 2 || a.len() == 3)
                    .ok_or_else(|| {
                        Error::Parse(format!("psi.{key}: each knot is [t, re] or [t, re, im]"))
                    })?;
                let num = |v: &serde_json::Value| -> Result<f64> {
                    v.as_f64()
                        .ok_or_else(|| Error::Parse(format!("psi.{key}: non-numeric knot entry")))
                };
                let t = num(&arr[0])?;
                let re = num(&arr[1])?;
                let im = if arr.len() == 3 { num(&arr[2])? } else { 0.0 };
                knots.push((t, C::new(re, im)));
            }
            profiles[idx] = Some(Profile::new(knots, roof.values()[idx])?);
        }
        let profiles: Vec<Profile> = profiles
            .into_iter()
            .enumerate()
            .map(|(j, p)| {
                p.ok_or_else(|| {
                    Error::Parse(format!("missing profile for letter '{}'", subst.letters()[j]))
                })
            })
            .collect::<Result<_>>()?;
        if value
            .get("normalize_mean_zero")
            .and_then(|v| v.as_bool())
            .unwrap_or(false)
        {
            Self::normalized_mean_zero(profiles, roof, freq)
        } else {
            Self::new(profiles, roof, freq)
        }
    }

    pub fn profile(&self, letter: u8) -> &Profile {
        &self.profiles[letter as usize]
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    /// `||f||_L = max_a (||psi_a||_inf + Lip(psi_a))`.
    pub fn lip_norm(&self) -> f64 {
        self.lip_norm
    }

    pub fn means(&self) -> &[C] {
        &self.means
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// `||f||^2_{L^2}` for the normalized suspension measure.
    pub fn l2_norm_sqr(&self, roof: &RoofVector, freq: &[f64]) -> f64 {
        let num: f64 = self
            .profiles
            .iter()
            .zip(freq)
            .map(|(p, &f)| f * p.abs2_mean())
            .sum();
        let den: f64 = roof.values().iter().zip(freq).map(|(&s, &f)| s * f).sum();
        num / den
    }
}

// ---------------------------------------------------------------------------
// Tiled orbits and twisted Birkhoff integrals
// ---------------------------------------------------------------------------

/// An orbit prefix together with its roof: tile `j` occupies
/// `[prefix[j], prefix[j+1])` and carries the letter `word[j]`.
pub struct TiledOrbit {
    word: Word,
    s: Vec<f64>,
    prefix: Vec<f64>,
}

impl TiledOrbit {
    pub fn new(word: Word, roof: &RoofVector) -> Self {
        let s = roof.values().to_vec();
        let mut prefix = Vec::with_capacity(word.len() + 1);
        let mut acc = Kahan::new();
        prefix.push(0.0);
        for &sym in word.symbols() {
            acc.add(s[sym as usize]);
            prefix.push(acc.value());
        }
        TiledOrbit { word, s, prefix }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn roof(&self) -> &[f64] {
        &self.s
    }

    pub fn tiles(&self) -> usize {
        self.word.len()
    }

    pub fn total_len(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    pub fn tile_start(&self, j: usize) -> f64 {
        self.prefix[j]
    }

    /// Largest tile index `j` with `prefix[j] <= t`.
    pub fn tile_index(&self, t: f64) -> usize {
        match self
            .prefix
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.word.len() - 1),
            Err(i) => i - 1,
        }
    }

    /// Observable value at height `t` along the orbit.
    pub fn value(&self, f: &CylFunction, t: f64) -> C {
        let j = self.tile_index(t);
        let letter = self.word.symbols()[j];
        f.profile(letter).value(t - self.prefix[j])
    }

    /// Walks tiles from `t0`, emitting the twisted Birkhoff integral
    /// `S_R = int_0^R e^{-2 pi i omega t} f(h_t (x, t0)) dt` at each cut
    /// `R = cuts[i]` (ascending). Closed form per tile; phases accumulated as
    /// compensated fractional turns.
    pub fn walk_twisted(
        &self,
        f: &CylFunction,
        omega: f64,
        t0: f64,
        cuts: &[f64],
        mut emit: impl FnMut(usize, C),
    ) -> Result<()> {
        if cuts.is_empty() {
            return Ok(());
        }
        debug_assert!(cuts.windows(2).all(|w| w[0] <= w[1]));
        let last = *cuts.last().unwrap();
        if t0 + last > self.total_len() + 1e-9 {
            return Err(Error::PrefixTooShort {
                needed: t0 + last,
                available: self.total_len(),
            });
        }
        let m = self.s.len();
        let psi_hat: Vec<C> = (0..m).map(|a| f.profile(a as u8).transform(omega)).collect();
        let tile_turns: Vec<f64> = self.s.iter().map(|&sj| omega * sj).collect();

        let mut acc = KahanComplex::new();
        let mut cur = self.tile_index(t0);
        // Entry offset within the current tile (local coordinate).
        let mut eo = t0 - self.prefix[cur];
        // omega * (entry position - t0), in turns, mod-1 reduced.
        let mut turns = Kahan::new();
        let mut ci = 0usize;
        loop {
            let letter = self.word.symbols()[cur] as usize;
            let s_let = self.s[letter];
            let tile_end = self.prefix[cur + 1];
            let phase = C::from_polar(1.0, -TAU * turns.value());
            // Cuts landing inside this tile.
            while ci < cuts.len() && t0 + cuts[ci] <= tile_end + 1e-12 {
                let hi = (eo + (t0 + cuts[ci] - (self.prefix[cur] + eo))).min(s_let);
                let partial = f.profile(letter as u8).twisted_on(eo, hi, omega);
                emit(ci, acc.value() + phase * partial);
                ci += 1;
            }
            if ci == cuts.len() {
                return Ok(());
            }
            // Absorb the rest of the tile and advance.
            let contrib = if eo == 0.0 {
                psi_hat[letter]
            } else {
                f.profile(letter as u8).twisted_on(eo, s_let, omega)
            };
            acc.add(phase * contrib);
            turns.add(if eo == 0.0 {
                tile_turns[letter]
            } else {
                omega * (s_let - eo)
            });
            turns.reduce_mod_1();
            eo = 0.0;
            cur += 1;
            if cur >= self.word.len() {
                return Err(Error::PrefixTooShort {
                    needed: t0 + last,
                    available: self.total_len(),
                });
            }
        }
    }
}

impl TiledOrbit {
    /// Walks tiles from `t0` up to scale `r_max`, emitting `(R, S_R)` at
    /// every tile-boundary scale `R` (the partial first tile included). The
    /// emitted scales are dense enough (one per tile) that window maxima over
    /// them approximate the continuous sup of `|S_R|` to within one tile's
    /// worth of integrand.
    pub fn walk_twisted_boundaries(
        &self,
        f: &CylFunction,
        omega: f64,
        t0: f64,
        r_max: f64,
        mut emit: impl FnMut(f64, C),
    ) -> Result<()> {
        if t0 + r_max > self.total_len() + 1e-9 {
            return Err(Error::PrefixTooShort {
                needed: t0 + r_max,
                available: self.total_len(),
            });
        }
        let m = self.s.len();
        let psi_hat: Vec<C> = (0..m).map(|a| f.profile(a as u8).transform(omega)).collect();
        let tile_turns: Vec<f64> = self.s.iter().map(|&sj| omega * sj).collect();
        let mut acc = KahanComplex::new();
        let mut cur = self.tile_index(t0);
        let mut eo = t0 - self.prefix[cur];
        let mut turns = Kahan::new();
        loop {
            let letter = self.word.symbols()[cur] as usize;
            let s_let = self.s[letter];
            let phase = C::from_polar(1.0, -TAU * turns.value());
            let contrib = if eo == 0.0 {
                psi_hat[letter]
            } else {
                f.profile(letter as u8).twisted_on(eo, s_let, omega)
            };
            acc.add(phase * contrib);
            turns.add(if eo == 0.0 {
                tile_turns[letter]
            } else {
                omega * (s_let - eo)
            });
            turns.reduce_mod_1();
            let r_here = self.prefix[cur + 1] - t0;
            emit(r_here, acc.value());
            if r_here >= r_max {
                return Ok(());
            }
            eo = 0.0;
            cur += 1;
            if cur >= self.word.len() {
                return Err(Error::PrefixTooShort {
                    needed: t0 + r_max,
                    available: self.total_len(),
                });
            }
        }
    }
}

/// Twisted Birkhoff integral `S_R^{(x, t0)}(f, omega)` in closed form.
pub fn twisted_birkhoff(
    orbit: &TiledOrbit,
    t0: f64,
    f: &CylFunction,
    omega: f64,
    big_r: f64,
) -> Result<C> {
    let mut out = C::new(0.0, 0.0);
    orbit.walk_twisted(f, omega, t0, &[big_r], |_, v| out = v)?;
    Ok(out)
}

/// Twisted sum `Phi_a(w, omega) = sum_j delta_{w_j, a}
/// exp(-2 pi i omega |w_0..w_j|_s)`; the running length includes `w_j`.
/// Streaming evaluation with compensated phase accumulation.
pub fn twisted_sum(w: &Word, a: u8, omega: f64, s: &[f64]) -> C {
    let incs: Vec<f64> = s.iter().map(|&sj| omega * sj).collect();
    let mut turns = Kahan::new();
    let mut acc = KahanComplex::new();
    for &sym in w.symbols() {
        turns.add(incs[sym as usize]);
        turns.reduce_mod_1();
        if sym == a {
            acc.add(C::from_polar(1.0, -TAU * turns.value()));
        }
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// Return-word product bound
// ---------------------------------------------------------------------------

/// Constants of the return-word product bound. The underlying result only
/// proves existence, so these are configurable inputs.
#[derive(Clone, Copy, Debug)]
pub struct BoundConstants {
    pub c1: f64,
    pub c: f64,
    pub c_prime: f64,
    pub c2: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c1: 0.5,
            c: 1.0,
            c_prime: 1.0,
            c2: 0.0,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c1 = {} must lie in (0, 1)",
                self.c1
            )));
        }
        if self.c <= 0.0 || self.c_prime <= 0.0 || self.c2 < 0.0 {
            return Err(Error::InvalidParameter(
                "bound constants must be positive (c2 >= 0)".into(),
            ));
        }
        Ok(())
    }
}

/// Exact tiling lengths `|zeta^k(v)|_s` for k = 0..count-1, via big-integer
/// matrix powers dotted with the roof.
pub fn return_word_lengths(
    subst: &Substitution,
    v: &ReturnWord,
    s: &[f64],
    count: usize,
) -> Vec<f64> {
    let smat = subst.matrix();
    let mut pop: Vec<num_bigint::BigUint> =
        population_vector(&v.v, s.len()).counts().to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len: f64 = pop
            .iter()
            .zip(s)
            .map(|(c, &sj)| {
                num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::INFINITY) * sj
            })
            .sum();
        out.push(len);
        pop = crate::substitution::mat_vec_big(&smat, &pop);
    }
    out
}

/// Per-factor sequence `1 - c1 ||omega |zeta^k(v)|_s||^2` for k = 0..count-1.
pub fn twist_factors(
    subst: &Substitution,
    v: &ReturnWord,
    s: &[f64],
    c1: f64,
    omega: f64,
    count: usize,
) -> Vec<f64> {
    return_word_lengths(subst, v, s, count)
        .iter()
        .map(|&len| 1.0 - c1 * dist_to_int(omega * len).powi(2))
        .collect()
}

#[derive(Clone, Debug)]
pub struct ProductBound {
    pub value: f64,
    pub factors: Vec<f64>,
    pub k_max: i64,
}

/// The product bound
/// `C' min(1, |omega|^-1) R prod_{k=0}^{floor(log_theta R - C_2)}
/// (1 - c1 ||omega |zeta^k(v)|_s||^2)`; the product is empty when the upper
/// index is negative.
pub fn product_bound(
    subst: &Substitution,
    v: &ReturnWord,
    s: &RoofVector,
    bc: &BoundConstants,
    es: &EigenSystem,
    omega: f64,
    big_r: f64,
) -> Result<ProductBound> {
    bc.validate()?;
    if big_r <= 1.0 {
        return Err(Error::InvalidParameter(format!("R = {big_r} must be > 1")));
    }
    let k_max = (big_r.ln() / es.theta.ln() - bc.c2).floor() as i64;
    let factors = if k_max < 0 {
        Vec::new()
    } else {
        twist_factors(subst, v, s.values(), bc.c1, omega, k_max as usize + 1)
    };
    let product: f64 = factors.iter().product();
    let omega_term = if omega == 0.0 {
        1.0
    } else {
        omega.abs().recip().min(1.0)
    };
    Ok(ProductBound {
        value: bc.c_prime * omega_term * big_r * product,
        factors,
        k_max,
    })
}
