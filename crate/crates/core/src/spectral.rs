//! Empirical spectral-measure machinery: flow autocorrelation tables,
//! Fejer-kernel local mass `G_R(omega) = avg |S_R|^2 / R`, log-log decay
//! fits, certified local Holder bounds, the Strichartz sup functional and
//! the theoretical exponent budget.

#![allow(clippy::too_many_arguments)] // estimator entry points mirror their config fields

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::flow::{CylFunction, RoofVector, TiledOrbit};
use crate::perron::{EigenSystem, VandermondeData};
use crate::substitution::Substitution;
use crate::util::{golden_offsets, Kahan, KahanComplex};

type C = Complex64;

// ---------------------------------------------------------------------------
// Correlation tables
// ---------------------------------------------------------------------------

/// Uniform-grid samples of the flow autocorrelation: `values[k]` estimates
/// `hat sigma_f(-k dt) = <f o h_{k dt}, f>`.
///
/// The estimator is the fixed-overlap time average
/// `(1/T) int_o^{o+T} f(h_{u+t} p) conj(f(h_u p)) du`, averaged over seeded
/// offsets `o` of one long orbit: constants reproduce `|c|^2` exactly at
/// every lag, and the requirement `T >= 10 t_max` keeps the window drift
/// small enough for the positivity invariants to hold with a wide margin.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    pub dt: f64,
    pub values: Vec<C>,
    /// Averaging time T (the window is T + t_max long).
    pub t_window: f64,
    pub n_samples: usize,
}

impl CorrelationTable {
    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// |hat sigma(t)|^2 at grid index k (symmetric in t).
    pub fn abs_sqr(&self, k: usize) -> f64 {
        self.values[k].norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationMode {
    /// Pick by estimated cost.
    Auto,
    /// Closed-form segment-pair integration (exact per lag).
    Exact,
    /// Midpoint-sampled FFT autocorrelation (bias O(h^2), h <= dt).
    Sampled,
}

/// Piecewise-linear view of the observable along an orbit: global breakpoint
/// positions with per-segment linear coefficients.
struct SegmentList {
    pos: Vec<f64>,
    val: Vec<C>,
    slope: Vec<C>,
}

impl SegmentList {
    fn build(orbit: &TiledOrbit, f: &CylFunction) -> Self {
        let mut pos = Vec::new();
        let mut val = Vec::new();
        let mut slope = Vec::new();
        for j in 0..orbit.tiles() {
            let start = orbit.tile_start(j);
            let letter = orbit.word().symbols()[j];
            let knots = f.profile(letter).knots();
            for w in knots.windows(2) {
                pos.push(start + w[0].0);
                val.push(w[0].1);
                slope.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
            }
        }
        pos.push(orbit.total_len());
        SegmentList { pos, val, slope }
    }

    fn count(&self) -> usize {
        self.slope.len()
    }

    fn index_of(&self, t: f64) -> usize {
        match self.pos.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.count() - 1),
            Err(i) => (i - 1).min(self.count() - 1),
        }
    }

    #[inline]
    fn eval(&self, seg: usize, t: f64) -> C {
        self.val[seg] + self.slope[seg] * (t - self.pos[seg])
    }
}

/// Exact correlation `int psi(u + t) conj(psi(u)) du` over `u in
/// [lo, lo + span]`, by Simpson on the merged breakpoints (the integrand is
/// piecewise quadratic, so Simpson is exact).
fn window_correlation_exact(segs: &SegmentList, lo: f64, span: f64, t: f64) -> C {
    let hi = lo + span;
    if hi <= lo {
        return C::new(0.0, 0.0);
    }
    let mut ia = segs.index_of(lo + t);
    let mut ib = segs.index_of(lo);
    let mut u = lo;
    let mut acc = KahanComplex::new();
    while u < hi {
        let next_a = segs.pos[ia + 1] - t;
        let next_b = segs.pos[ib + 1];
        let u2 = next_a.min(next_b).min(hi);
        if u2 > u {
            let um = 0.5 * (u + u2);
            let g = |x: f64| segs.eval(ia, x + t) * segs.eval(ib, x).conj();
            let simpson = (g(u) + g(um) * 4.0 + g(u2)) * ((u2 - u) / 6.0);
            acc.add(simpson);
        }
        if next_a <= u2 + 1e-13 && ia + 1 < segs.count() {
            ia += 1;
        }
        if next_b <= u2 + 1e-13 && ib + 1 < segs.count() {
            ib += 1;
        }
        if u2 <= u {
            break;
        }
        u = u2;
    }
    acc.value()
}

const EXACT_BUDGET: f64 = 3e8;

/// Flow autocorrelation along a seeded family of windows of one orbit.
///
/// Small jobs integrate each lag in closed form over the tile decomposition
/// (exact; Simpson on piecewise quadratics). Large jobs switch to a
/// midpoint-sampled FFT autocorrelation with step `h <= min(dt, 0.017,
/// s_min/4)`; jumps of the observable at tile boundaries leave a residual
/// bias below about one percent of `sigma(0)`, which is immaterial for the
/// decay fits this path feeds. Both paths are deterministic for a fixed
/// (config, seed).
pub fn orbit_correlation(
    subst: &Substitution,
    f: &CylFunction,
    roof: &RoofVector,
    t_max: f64,
    dt: f64,
    t_window: f64,
    n_samples: usize,
    seed: u64,
    cap: u64,
    mode: CorrelationMode,
) -> Result<CorrelationTable> {
    if dt <= 0.0 || t_max < dt {
        return Err(Error::InvalidParameter("need 0 < dt <= t_max".into()));
    }
    if t_window < 10.0 * t_max {
        return Err(Error::InvalidParameter(format!(
            "averaging window T = {t_window} must be >= 10 t_max = {}",
            10.0 * t_max
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let n_lags = (t_max / dt).floor() as usize + 1;
    let reach = t_window + t_max; // data needed per window
    let offset_span = 0.5 * t_window;
    let total_time = offset_span + reach + 8.0 * roof.values().iter().fold(0.0f64, |a, &b| a.max(b));
    let letters = (total_time / roof.min_entry()).ceil() as usize + 4;
    let word = subst.prefix_orbit(0, letters, cap)?;
    let orbit = TiledOrbit::new(word, roof);
    let offsets = golden_offsets(seed, n_samples, offset_span);

    let segs = SegmentList::build(&orbit, f);
    let seg_mean = orbit.total_len() / segs.count() as f64;
    let exact_cost = n_samples as f64 * n_lags as f64 * (t_window / seg_mean);
    let use_exact = match mode {
        CorrelationMode::Exact => true,
        CorrelationMode::Sampled => false,
        CorrelationMode::Auto => exact_cost <= EXACT_BUDGET,
    };

    let values = if use_exact {
        let per_offset: Vec<Vec<C>> = offsets
            .par_iter()
            .map(|&o| {
                (0..n_lags)
                    .map(|k| window_correlation_exact(&segs, o, t_window, k as f64 * dt) / t_window)
                    .collect()
            })
            .collect();
        mean_tables(&per_offset)
    } else {
        sampled_correlation(&orbit, f, &offsets, t_window, dt, n_lags)
    };

    Ok(CorrelationTable {
        dt,
        values,
        t_window,
        n_samples,
    })
}

fn mean_tables(tables: &[Vec<C>]) -> Vec<C> {
    let n = tables[0].len();
    let k = tables.len() as f64;
    (0..n)
        .map(|i| tables.iter().map(|t| t[i]).sum::<C>() / k)
        .collect()
}

fn sampled_correlation(
    orbit: &TiledOrbit,
    f: &CylFunction,
    offsets: &[f64],
    t_window: f64,
    dt: f64,
    n_lags: usize,
) -> Vec<C> {
    let s_min = orbit.roof().iter().cloned().fold(f64::INFINITY, f64::min);
    let h_target = dt.min(0.017).min(s_min / 4.0);
    let r = (dt / h_target).ceil().max(1.0) as usize;
    let h = dt / r as f64;
    let m_t = (t_window / h).round() as usize; // overlap window
    let lag_max = (n_lags - 1) * r;
    let m_w = m_t + lag_max; // full data window per offset
    let p = (m_w + 1).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(p);
    let ifft = planner.plan_fft_inverse(p);

    let mut acc = vec![C::new(0.0, 0.0); n_lags];
    let mut data = vec![C::new(0.0, 0.0); p];
    let mut win = vec![C::new(0.0, 0.0); p];
    for &o in offsets {
        data.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        win.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        // Midpoint samples walked linearly along the orbit.
        let mut tile = orbit.tile_index(o);
        for i in 0..m_w {
            let u = o + (i as f64 + 0.5) * h;
            while orbit.tile_start(tile + 1) <= u {
                tile += 1;
            }
            let letter = orbit.word().symbols()[tile];
            data[i] = f.profile(letter).value(u - orbit.tile_start(tile));
            if i < m_t {
                win[i] = data[i];
            }
        }
        // corr(l) = sum_{i < m_t} data[i + l] conj(win[i]) via FFT
        // cross-correlation (indices never wrap: i + l < m_w <= p).
        fft.process(&mut data);
        fft.process(&mut win);
        for (d, w) in data.iter_mut().zip(&win) {
            *d *= w.conj();
        }
        ifft.process(&mut data);
        let norm = 1.0 / (m_t as f64 * p as f64);
        for (k, slot) in acc.iter_mut().enumerate() {
            *slot += data[k * r] * norm;
        }
    }
    let ns = offsets.len() as f64;
    acc.into_iter().map(|z| z / ns).collect()
}

// ---------------------------------------------------------------------------
// Twisted-integral ensembles: Fejer mass and sup tables
// ---------------------------------------------------------------------------

/// Values of `S_R^{(x, t_i)}(f, omega)` over seeded starting offsets `t_i`
/// and a ladder of scales R.
#[derive(Clone, Debug)]
pub struct TwistedEnsemble {
    pub omega: f64,
    pub rs: Vec<f64>,
    /// samples[offset][r_index]
    pub samples: Vec<Vec<C>>,
}

impl TwistedEnsemble {
    /// Fejer-kernel local mass `G_R(omega) = avg |S_R|^2 / R`.
    pub fn fejer_mean(&self) -> Vec<f64> {
        let ns = self.samples.len() as f64;
        (0..self.rs.len())
            .map(|i| {
                self.samples
                    .iter()
                    .map(|row| row[i].norm_sqr() / self.rs[i])
                    .sum::<f64>()
                    / ns
            })
            .collect()
    }

    /// Empirical `sup |S_R|` over the sampled starting points.
    pub fn sup_abs(&self) -> Vec<f64> {
        (0..self.rs.len())
            .map(|i| {
                self.samples
                    .iter()
                    .map(|row| row[i].norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

pub fn twisted_ensemble(
    orbit: &TiledOrbit,
    f: &CylFunction,
    omega: f64,
    offsets: &[f64],
    rs: &[f64],
) -> Result<TwistedEnsemble> {
    let mut samples = Vec::with_capacity(offsets.len());
    for &o in offsets {
        let mut row = vec![C::new(0.0, 0.0); rs.len()];
        orbit.walk_twisted(f, omega, o, rs, |i, v| row[i] = v)?;
        samples.push(row);
    }
    Ok(TwistedEnsemble {
        omega,
        rs: rs.to_vec(),
        samples,
    })
}

/// Windowed sup of `|S_R|`: for consecutive edges `r_edges[i] < r_edges[i+1]`
/// the value is the maximum of `|S_R(f, omega)|` over every tile-boundary
/// scale R in `[r_edges[i], r_edges[i+1])` and over all starting offsets.
/// Pairing the windowed sup with the left edge gives data whose fitted
/// envelope `R sqrt(C_1 R^{-gamma})` (increasing in R for gamma < 2)
/// dominates every measured value at its own scale.
pub fn sup_envelope(
    orbit: &TiledOrbit,
    f: &CylFunction,
    omega: f64,
    offsets: &[f64],
    r_edges: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if r_edges.len() < 2 || r_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "window edges must be increasing, length >= 2".into(),
        ));
    }
    let windows = r_edges.len() - 1;
    let r_top = *r_edges.last().unwrap();
    let mut sup = vec![0.0f64; windows];
    for &o in offsets {
        let mut w = 0usize;
        orbit.walk_twisted_boundaries(f, omega, o, r_top, |r, s| {
            if r < r_edges[0] || w >= windows {
                return;
            }
            while w < windows && r >= r_edges[w + 1] {
                w += 1;
            }
            if w < windows {
                sup[w] = sup[w].max(s.norm());
            }
        })?;
    }
    Ok((0..windows).map(|i| (r_edges[i], sup[i])).collect())
}

/// Builds an orbit long enough to host every window `offset + R`.
pub fn orbit_for_scales(
    subst: &Substitution,
    roof: &RoofVector,
    r_max: f64,
    offset_span: f64,
    cap: u64,
) -> Result<TiledOrbit> {
    let s_max = roof.values().iter().cloned().fold(0.0f64, f64::max);
    let total = offset_span + r_max + 8.0 * s_max;
    let letters = (total / roof.min_entry()).ceil() as usize + 4;
    Ok(TiledOrbit::new(subst.prefix_orbit(0, letters, cap)?, roof))
}

/// Fejer-kernel mass matrix `G_R(omega)` over an omega grid and R ladder,
/// averaged over `n_samples` seeded starting points.
pub struct FejerMass {
    pub omegas: Vec<f64>,
    pub rs: Vec<f64>,
    /// g[omega_index][r_index]
    pub g: Vec<Vec<f64>>,
}

pub fn fejer_mass(
    subst: &Substitution,
    f: &CylFunction,
    roof: &RoofVector,
    omegas: &[f64],
    rs: &[f64],
    n_samples: usize,
    seed: u64,
    cap: u64,
) -> Result<FejerMass> {
    if rs.is_empty() || rs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "R list must be non-empty and increasing".into(),
        ));
    }
    let r_max = *rs.last().unwrap();
    let orbit = orbit_for_scales(subst, roof, r_max, r_max, cap)?;
    let offsets = golden_offsets(seed, n_samples, r_max);
    let g: Result<Vec<Vec<f64>>> = omegas
        .par_iter()
        .map(|&w| twisted_ensemble(&orbit, f, w, &offsets, rs).map(|e| e.fejer_mean()))
        .collect();
    Ok(FejerMass {
        omegas: omegas.to_vec(),
        rs: rs.to_vec(),
        g: g?,
    })
}

// ---------------------------------------------------------------------------
// Log-log decay fits
// ---------------------------------------------------------------------------

/// Least-squares fit of `log value` against `log R`.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log-log coordinates.
    pub residual: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
}

pub fn decay_fit(points: &[(f64, f64)], range: Option<(f64, f64)>) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    for (i, &(r, v)) in points.iter().enumerate() {
        if r < lo || r > hi {
            continue;
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveValue { index: i });
        }
        xs.push(r.ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs >= 8 points in range, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(DecayFit {
        slope,
        intercept,
        residual,
        r_min: xs.iter().cloned().fold(f64::INFINITY, f64::min).exp(),
        r_max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp(),
        n_points: n,
    })
}

// ---------------------------------------------------------------------------
// Certified local Holder bound
// ---------------------------------------------------------------------------

/// Empirical certificate `sup |S_R| <= R sqrt(C_1 R^{-gamma})` for all
/// supplied data with `R >= R_0`, which converts into the local mass bound
/// `sigma_f([omega - r, omega + r]) <= (pi^2 C_1 / 4) (2r)^gamma` for
/// `r <= (2 R_0)^{-1}`.
#[derive(Clone, Copy, Debug)]
pub struct HolderCertificate {
    pub omega: f64,
    pub gamma: f64,
    pub c1: f64,
    pub r0: f64,
    /// Certified radius (2 R_0)^{-1}.
    pub r_max: f64,
    pub fit_residual: f64,
}

impl HolderCertificate {
    pub fn mass_bound(&self, r: f64) -> Option<f64> {
        if r <= 0.0 || r > self.r_max {
            return None;
        }
        Some(std::f64::consts::PI.powi(2) * self.c1 / 4.0 * (2.0 * r).powf(self.gamma))
    }

    /// The certified envelope `R sqrt(C_1 R^{-gamma})` at scale R.
    pub fn sup_envelope(&self, big_r: f64) -> f64 {
        big_r * (self.c1 * big_r.powf(-self.gamma)).sqrt()
    }
}

/// Fits `log sup` against `log R` over the data with `R >= R_0` (the envelope
/// `R sqrt(C_1 R^{-gamma})` is a pure power law, slope `1 - gamma/2`), then
/// raises `C_1` until the envelope dominates every point.
pub fn varr_certificate(
    sup_data: &[(f64, f64)],
    r0: f64,
    omega: f64,
) -> Result<HolderCertificate> {
    let pts: Vec<(f64, f64)> = sup_data
        .iter()
        .filter(|&&(r, _)| r >= r0)
        .copied()
        .collect();
    let fit = decay_fit(&pts, None)?;
    let gamma = (2.0 * (1.0 - fit.slope)).min(2.0);
    if gamma <= 0.0 {
        return Err(Error::NoDecay { gamma });
    }
    let c1 = pts
        .iter()
        .map(|&(r, s)| (s / r).powi(2) * r.powf(gamma))
        .fold(0.0, f64::max);
    Ok(HolderCertificate {
        omega,
        gamma,
        c1,
        r0,
        r_max: 0.5 / r0,
        fit_residual: fit.residual,
    })
}

// ---------------------------------------------------------------------------
// Strichartz sup functional
// ---------------------------------------------------------------------------

/// `sup_y sup_{R >= 1} R^{gamma - 1} int_{y-R}^{y+R} |hat sigma_f|^2` over
/// the given grids, by trapezoid on the correlation table (the integrand is
/// even in t; ranges are clamped to the covered window).
pub fn strichartz_sup(
    corr: &CorrelationTable,
    gamma: f64,
    y_grid: &[f64],
    r_grid: &[f64],
) -> f64 {
    let n = corr.values.len();
    // Prefix trapezoid of |sigma|^2 on the positive axis.
    let mut prefix = vec![0.0f64; n];
    let mut acc = Kahan::new();
    for (k, slot) in prefix.iter_mut().enumerate().skip(1) {
        acc.add(0.5 * (corr.abs_sqr(k - 1) + corr.abs_sqr(k)) * corr.dt);
        *slot = acc.value();
    }
    let t_cov = corr.t_max();
    // Odd extension F(x) = sign(x) * int_0^{|x|}.
    let f = |x: f64| -> f64 {
        let a = x.abs().min(t_cov);
        let idx = (a / corr.dt).floor() as usize;
        let base = prefix[idx.min(n - 1)];
        let frac = a - idx as f64 * corr.dt;
        let inner = if idx + 1 < n {
            let v0 = corr.abs_sqr(idx);
            let v1 = corr.abs_sqr(idx + 1);
            let vm = v0 + (v1 - v0) * (frac / corr.dt);
            0.5 * (v0 + vm) * frac
        } else {
            0.0
        };
        (base + inner).copysign(x)
    };
    let mut sup = 0.0f64;
    for &y in y_grid {
        for &r in r_grid {
            if r < 1.0 {
                continue;
            }
            let integral = f(y + r) - f(y - r);
            sup = sup.max(r.powf(gamma - 1.0) * integral);
        }
    }
    sup
}

// ---------------------------------------------------------------------------
// Exponent budget
// ---------------------------------------------------------------------------

/// Theoretical exponent budget assembled from the Vandermonde constants:
/// the twisted-sum exponent `alpha = 1 + log_theta(1 - c1 rho^2)/k`, the
/// scale split `Z = Upsilon ln theta`, the away-from-zero exponent
/// `gamma_tilde = 2 - 2 max(alpha, 1 - 1/Z)`, and the glued final exponent
/// `gamma = min(gamma_tilde, (2 - 2 beta_tilde)/Z)`.
#[derive(Clone, Copy, Debug)]
pub struct ExponentBudget {
    pub rho: f64,
    pub big_l: f64,
    pub k: u32,
    pub upsilon: f64,
    pub c1: f64,
    pub alpha_twist: f64,
    pub z: f64,
    pub gamma_tilde: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    pub gamma_final: f64,
    /// Product-flow decay exponent: |I(R)| <= C R^{1 - gamma/2}.
    pub product_exponent: f64,
}

pub fn exponent_budget(
    es: &EigenSystem,
    vd: &VandermondeData,
    k: u32,
    upsilon: f64,
    c1: f64,
    beta_tilde: Option<f64>,
) -> Result<ExponentBudget> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if upsilon <= 0.0 {
        return Err(Error::InvalidParameter("Upsilon must be > 0".into()));
    }
    if !(c1 > 0.0 && c1 < 1.0) {
        return Err(Error::InvalidParameter("c1 must lie in (0, 1)".into()));
    }
    if !es.second_eigenvalue_expanding() {
        return Err(Error::AssumptionViolation(format!(
            "|theta_2| = {} <= 1",
            es.values[1].norm()
        )));
    }
    let beta = es.beta;
    let bt = beta_tilde.unwrap_or(0.5 * (beta + 1.0));
    if bt <= beta || bt >= 1.0 {
        return Err(Error::AssumptionViolation(format!(
            "beta_tilde = {bt} must lie in (beta, 1) = ({beta}, 1)"
        )));
    }
    let ln_theta = es.theta.ln();
    let z = upsilon * ln_theta;
    if z <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Z = Upsilon ln theta = {z} must exceed 1"
        )));
    }
    let alpha_twist = 1.0 + (1.0 - c1 * vd.rho * vd.rho).ln() / ln_theta / k as f64;
    if !(alpha_twist > 0.0 && alpha_twist < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha_twist = {alpha_twist} fell outside (0, 1); increase k"
        )));
    }
    let gamma_tilde = 2.0 - 2.0 * alpha_twist.max(1.0 - 1.0 / z);
    let gamma_final = gamma_tilde.min((2.0 - 2.0 * bt) / z);
    Ok(ExponentBudget {
        rho: vd.rho,
        big_l: vd.big_l,
        k,
        upsilon,
        c1,
        alpha_twist,
        z,
        gamma_tilde,
        beta,
        beta_tilde: bt,
        gamma_final,
        product_exponent: gamma_final / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Profile;
    use crate::perron::{eigen_system, vandermonde_constants, DEFAULT_EIGEN_TOL};
    use crate::substitution::DEFAULT_LENGTH_CAP;

    fn zeta_star() -> Substitution {
        Substitution::parse("a->abbb; b->a").unwrap()
    }

    fn setup() -> (Substitution, EigenSystem, RoofVector, Vec<f64>) {
        let z = zeta_star();
        let es = eigen_system(&z.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        let roof = RoofVector::explicit(vec![0.5, 0.5]).unwrap();
        let freq = es.letter_frequencies();
        (z, es, roof, freq)
    }

    fn constant_f(c: C, roof: &RoofVector, freq: &[f64]) -> CylFunction {
        CylFunction::new(
            roof.values()
                .iter()
                .map(|&s| Profile::constant(c, s))
                .collect(),
            roof,
            freq,
        )
        .unwrap()
    }

    #[test]
    fn correlation_constant_function_both_paths() {
        let (z, _, roof, freq) = setup();
        let f = constant_f(C::new(0.7, -0.4), &roof, &freq);
        let expect = 0.7f64.powi(2) + 0.4f64.powi(2);
        for mode in [CorrelationMode::Exact, CorrelationMode::Sampled] {
            let table =
                orbit_correlation(&z, &f, &roof, 3.0, 0.25, 40.0, 2, 1, DEFAULT_LENGTH_CAP, mode)
                    .unwrap();
            for v in &table.values {
                assert!((v - C::new(expect, 0.0)).norm() < 1e-9, "{mode:?}: {v}");
            }
        }
    }

    #[test]
    fn correlation_modes_agree() {
        let (z, _, roof, freq) = setup();
        let f = CylFunction::default_mean_zero(&roof, &freq).unwrap();
        let ex = orbit_correlation(
            &z,
            &f,
            &roof,
            5.0,
            0.5,
            200.0,
            2,
            3,
            DEFAULT_LENGTH_CAP,
            CorrelationMode::Exact,
        )
        .unwrap();
        let sm = orbit_correlation(
            &z,
            &f,
            &roof,
            5.0,
            0.5,
            200.0,
            2,
            3,
            DEFAULT_LENGTH_CAP,
            CorrelationMode::Sampled,
        )
        .unwrap();
        for (a, b) in ex.values.iter().zip(&sm.values) {
            assert!((a - b).norm() < 1.2e-2, "exact {a} vs sampled {b}");
        }
    }

    #[test]
    fn correlation_zero_lag_matches_l2_norm() {
        let (z, es, roof, freq) = setup();
        let f = CylFunction::default_mean_zero(&roof, &freq).unwrap();
        let table = orbit_correlation(
            &z,
            &f,
            &roof,
            2.0,
            0.5,
            60_000.0,
            4,
            5,
            DEFAULT_LENGTH_CAP,
            CorrelationMode::Exact,
        )
        .unwrap();
        let expect = f.l2_norm_sqr(&roof, &freq);
        assert!(table.values[0].im.abs() < 1e-12);
        assert!(
            (table.values[0].re - expect).abs() < 1e-3 * expect,
            "empirical {} vs measure {}",
            table.values[0].re,
            expect
        );
        let _ = es;
    }

    #[test]
    fn correlation_bounded_by_zero_lag_and_psd() {
        let (z, _, roof, freq) = setup();
        let f = CylFunction::default_mean_zero(&roof, &freq).unwrap();
        let table = orbit_correlation(
            &z,
            &f,
            &roof,
            20.0,
            0.25,
            400.0,
            4,
            7,
            DEFAULT_LENGTH_CAP,
            CorrelationMode::Exact,
        )
        .unwrap();
        let s0 = table.values[0].re;
        assert!(s0 > 0.0);
        for (k, v) in table.values.iter().enumerate() {
            assert!(v.norm() <= s0 * (1.0 + 1e-6), "lag {k}");
            // Weak mixing: no revival at sampled t >= 1.
            if k as f64 * table.dt >= 1.0 {
                assert!(v.norm() < s0, "revival at lag {k}");
            }
        }
        // Positive semidefiniteness spot check: Gram matrix of sigma at
        // random lag differences admits a Cholesky factorization after a
        // tolerance shift.
        let lags = [0.0, 1.25, 3.5, 7.75, 12.25, 19.0];
        let at = |t: f64| -> C {
            let k = (t.abs() / table.dt).round() as usize;
            let v = table.values[k.min(table.values.len() - 1)];
            if t < 0.0 {
                v.conj()
            } else {
                v
            }
        };
        let n = lags.len();
        let mut g: Vec<Vec<C>> = (0..n)
            .map(|i| (0..n).map(|j| at(lags[i] - lags[j])).collect())
            .collect();
        let shift = 1e-3 * s0;
        for (i, row) in g.iter_mut().enumerate() {
            row[i] += shift;
        }
        // In-place Hermitian Cholesky; failure means an eigenvalue below
        // -shift.
        let mut ok = true;
        let mut l = vec![vec![C::new(0.0, 0.0); n]; n];
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut sum = g[i][j];
                for (lik, ljk) in l[i][..j].to_vec().iter().zip(&l[j][..j]) {
                    sum -= lik * ljk.conj();
                }
                if i == j {
                    if sum.re <= 0.0 || sum.im.abs() > 1e-9 * s0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i][i] = C::new(sum.re.sqrt(), 0.0);
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        assert!(ok, "correlation Gram matrix not PSD within tolerance");
    }

    #[test]
    fn fejer_constant_function_closed_form() {
        let (z, _, roof, freq) = setup();
        let f = constant_f(C::new(1.0, 0.0), &roof, &freq);
        let rs = vec![5.0, 10.0, 20.0, 40.0];
        // omega = 0: S_R = R exactly, G = R.
        let fm = fejer_mass(&z, &f, &roof, &[0.0], &rs, 3, 11, DEFAULT_LENGTH_CAP).unwrap();
        for (i, &r) in rs.iter().enumerate() {
            assert!((fm.g[0][i] - r).abs() < 1e-9 * r);
        }
        // omega != 0: G = |e^{-2 pi i w R} - 1|^2 / (4 pi^2 w^2 R).
        let w = 0.37;
        let fm = fejer_mass(&z, &f, &roof, &[w], &rs, 3, 11, DEFAULT_LENGTH_CAP).unwrap();
        for (i, &r) in rs.iter().enumerate() {
            let num = (C::from_polar(1.0, -std::f64::consts::TAU * w * r) - 1.0).norm_sqr();
            let expect = num / (4.0 * std::f64::consts::PI.powi(2) * w * w * r);
            assert!(
                (fm.g[0][i] - expect).abs() < 1e-8 * expect.max(1e-6),
                "R = {r}: {} vs {}",
                fm.g[0][i],
                expect
            );
        }
    }

    #[test]
    fn fejer_total_mass_near_l2_norm() {
        let (z, _, roof, freq) = setup();
        let f = CylFunction::default_mean_zero(&roof, &freq).unwrap();
        let r = 60.0;
        let d_omega = 1.0 / (4.0 * r);
        let n = (2.0 * 6.0 / d_omega) as usize;
        let omegas: Vec<f64> = (0..=n).map(|i| -6.0 + i as f64 * d_omega).collect();
        let fm = fejer_mass(&z, &f, &roof, &omegas, &[r], 4, 13, DEFAULT_LENGTH_CAP).unwrap();
        let mass: f64 = fm.g.iter().map(|row| row[0] * d_omega).sum();
        let expect = f.l2_norm_sqr(&roof, &freq);
        assert!(
            (mass - expect).abs() < 0.1 * expect,
            "integrated mass {mass} vs ||f||^2 {expect}"
        );
    }

    #[test]
    fn decay_fit_examples() {
        let pts: Vec<(f64, f64)> = (1..=12).map(|i| {
            let r = (i as f64) * 10.0;
            (r, r.powf(0.5))
        })
        .collect();
        let fit = decay_fit(&pts, None).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        let flat: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, 2.5)).collect();
        let fit = decay_fit(&flat, None).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        let noisy: Vec<(f64, f64)> = (1..=40)
            .map(|i| {
                let r = 1.5f64.powi(i);
                (r, r.powf(0.7) * (1.0 + 0.01 * r.ln().sin()))
            })
            .collect();
        let fit = decay_fit(&noisy, None).unwrap();
        assert!((fit.slope - 0.7).abs() < 0.01);

        assert!(matches!(
            decay_fit(&[(1.0, 1.0); 12].iter().map(|&(r, _)| (r, 0.0)).collect::<Vec<_>>(), None),
            Err(Error::NonPositiveValue { .. })
        ));
        assert!(decay_fit(&pts[..5], None).is_err());
    }

    #[test]
    fn varr_certificate_algebra() {
        // sup = R^{0.9}: gamma = 0.2, C1 = 1.
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let r = 2f64.powi(i);
                (r, r.powf(0.9))
            })
            .collect();
        let cert = varr_certificate(&pts, 1.0, 1.0).unwrap();
        assert!((cert.gamma - 0.2).abs() < 1e-10);
        assert!((cert.c1 - 1.0).abs() < 1e-10);
        assert!((cert.r_max - 0.5).abs() < 1e-12);
        // Domination by construction.
        for &(r, s) in &pts {
            assert!(cert.sup_envelope(r) >= s * (1.0 - 1e-12));
        }
        // sup = R: no decay.
        let flat: Vec<(f64, f64)> = (1..=10).map(|i| (2f64.powi(i), 2f64.powi(i))).collect();
        assert!(matches!(
            varr_certificate(&flat, 1.0, 1.0),
            Err(Error::NoDecay { .. })
        ));
    }

    #[test]
    fn strichartz_synthetic_tables() {
        let ones = CorrelationTable {
            dt: 0.1,
            values: vec![C::new(1.0, 0.0); 501],
            t_window: 500.0,
            n_samples: 1,
        };
        let ys = [0.0, 5.0, -10.0];
        let rs = [1.0, 4.0, 16.0, 32.0];
        // |sigma| = 1, gamma = 1: sup = 2 R_max (within clamping range).
        let v = strichartz_sup(&ones, 1.0, &ys, &rs);
        assert!((v - 64.0).abs() < 1e-9);
        let zeros = CorrelationTable {
            dt: 0.1,
            values: vec![C::new(0.0, 0.0); 501],
            t_window: 500.0,
            n_samples: 1,
        };
        assert_eq!(strichartz_sup(&zeros, 1.0, &ys, &rs), 0.0);
    }

    #[test]
    fn exponent_budget_zeta_star_values() {
        let (_, es, _, _) = setup();
        let vd = vandermonde_constants(&es).unwrap();
        let eb = exponent_budget(&es, &vd, 100, 10.0, 0.5, None).unwrap();
        // alpha = 1 - |log_theta(1 - c1 rho^2)|/100 ~ 1 - 2.03e-5.
        let expect_alpha = 1.0 + (1.0 - 0.5 * vd.rho * vd.rho).ln() / es.theta.ln() / 100.0;
        assert!((eb.alpha_twist - expect_alpha).abs() < 1e-15);
        assert!((eb.alpha_twist - (1.0 - 2.03e-5)).abs() < 1e-7);
        // Z = 10 ln theta ~ 8.341.
        assert!((eb.z - 8.341) .abs() < 1e-3);
        assert!(eb.gamma_final <= eb.gamma_tilde);
        assert!(eb.gamma_final > 0.0);
        assert!((eb.product_exponent - eb.gamma_final / 2.0).abs() < 1e-18);
        // Default beta_tilde is the midpoint of (beta, 1).
        assert!((eb.beta_tilde - 0.5 * (es.beta + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn exponent_budget_monotonicity() {
        let (_, es, _, _) = setup();
        let vd = vandermonde_constants(&es).unwrap();
        let mut prev_alpha = 0.0;
        let mut prev_gt = f64::INFINITY;
        for k in [1u32, 2, 5, 10, 100, 1000] {
            let eb = exponent_budget(&es, &vd, k, 10.0, 0.5, None).unwrap();
            assert!(eb.alpha_twist > prev_alpha);
            assert!(eb.gamma_tilde <= prev_gt + 1e-18);
            prev_alpha = eb.alpha_twist;
            prev_gt = eb.gamma_tilde;
        }
        let mut prev_gf = f64::INFINITY;
        for ups in [2.0, 5.0, 10.0, 100.0, 1000.0] {
            let eb = exponent_budget(&es, &vd, 100, ups, 0.5, None).unwrap();
            assert!(eb.gamma_final <= prev_gf + 1e-18);
            prev_gf = eb.gamma_final;
        }
    }

    #[test]
    fn exponent_budget_gates() {
        let fib = Substitution::parse("1->12; 2->1").unwrap();
        let es = eigen_system(&fib.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        let vd = vandermonde_constants(&es).unwrap();
        assert!(matches!(
            exponent_budget(&es, &vd, 100, 10.0, 0.5, None),
            Err(Error::AssumptionViolation(_))
        ));
        let (_, es, _, _) = setup();
        let vd = vandermonde_constants(&es).unwrap();
        assert!(matches!(
            exponent_budget(&es, &vd, 100, 10.0, 0.5, Some(0.1)),
            Err(Error::AssumptionViolation(_))
        ));
    }
}
