//! Integer-trace accounting for twisted frequencies: the sequences
//! `omega sum_j a_j theta_j^n = K_n + eps_n`, the companion-recurrence
//! predictor, exceptional-set membership statistics, explicit cover counts
//! and the resulting Hausdorff-dimension upper-bound calculator.
//!
//! Traces are extended by the exact integer companion recurrence in
//! double-double arithmetic, so the fractional parts stay trustworthy up to
//! the 1e15 overflow gate.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::One;
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::perron::{mat_mul, mat_vec, CharPoly, EigenSystem, ParamPoint, VandermondeData};
use crate::util::{nearest_int_split, Dd};

type C = Complex64;

pub const OVERFLOW_LIMIT: f64 = 1e15;

/// Integer/fractional decomposition of one trace, n = 1..=N
/// (index 0 holds n = 1).
#[derive(Clone, Debug)]
pub struct EkTrace {
    pub omega: f64,
    pub k_seq: Vec<i64>,
    pub eps: Vec<f64>,
    /// f64 view of x_n (loses fractional accuracy at the top of the range;
    /// kept for reporting).
    pub x: Vec<f64>,
    /// max_n ||x_vec(n+1) - Theta Diag[theta] Theta^{-1} x_vec(n)||_inf,
    /// relative to max |x_n|.
    pub recursion_residual: f64,
}

impl EkTrace {
    pub fn len(&self) -> usize {
        self.k_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_seq.is_empty()
    }

    /// ||x_n|| (distance to nearest integer) = |eps_n|.
    pub fn dist_to_int(&self, idx: usize) -> f64 {
        self.eps[idx].abs()
    }
}

fn seed_values(omega: f64, p: &ParamPoint, es: &EigenSystem) -> Result<Vec<f64>> {
    let m = es.m;
    let mut seeds = Vec::with_capacity(m);
    for n in 1..=m {
        let z: C = p
            .a
            .iter()
            .zip(&es.values)
            .map(|(aj, th)| aj * th.powu(n as u32))
            .sum();
        if z.im.abs() > 1e-9 * z.norm().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "trace seed x_{n} has imaginary residue {}",
                z.im
            )));
        }
        seeds.push(omega * z.re);
    }
    Ok(seeds)
}

fn extend_dd(seeds: &[f64], recurrence: &[i64], n: usize) -> Result<Vec<Dd>> {
    let m = seeds.len();
    if let Some(&bad) = seeds.iter().find(|x| x.abs() > OVERFLOW_LIMIT) {
        return Err(Error::Overflow { value: bad });
    }
    let mut xs: Vec<Dd> = seeds.iter().map(|&x| Dd::from_f64(x)).collect();
    xs.reserve(n.saturating_sub(m));
    for i in m..n {
        let mut acc = Dd::default();
        for (j, &c) in recurrence.iter().enumerate() {
            if c != 0 {
                acc = acc.add(xs[i - m + j].mul_f64(c as f64));
            }
        }
        if acc.hi.abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow { value: acc.hi });
        }
        xs.push(acc);
    }
    if let Some(last) = xs.last() {
        if last.hi.abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow { value: last.hi });
        }
    }
    Ok(xs)
}

fn trace_from_dd(omega: f64, xs: Vec<Dd>, es: &EigenSystem, vd: &VandermondeData) -> EkTrace {
    let m = es.m;
    let mut k_seq = Vec::with_capacity(xs.len());
    let mut eps = Vec::with_capacity(xs.len());
    let mut xf = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (k, e) = x.split_nearest_int();
        k_seq.push(k);
        eps.push(e);
        xf.push(x.to_f64());
    }
    // Companion matrix Theta Diag[theta_j] Theta^{-1} acting on the window
    // vector (x_n, ..., x_{n+m-1}).
    let diag: Vec<Vec<C>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { es.values[i] } else { C::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let companion = mat_mul(&mat_mul(&vd.matrix, &diag), &vd.inverse);
    let xmax = xf.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let mut residual = 0.0f64;
    if xf.len() > m {
        for n in 0..xf.len() - m {
            let window: Vec<C> = (0..m).map(|i| C::new(xf[n + i], 0.0)).collect();
            let image = mat_vec(&companion, &window);
            for i in 0..m {
                residual = residual.max((image[i].re - xf[n + i + 1]).abs());
                residual = residual.max(image[i].im.abs());
            }
        }
    }
    EkTrace {
        omega,
        k_seq,
        eps,
        x: xf,
        recursion_residual: residual / xmax,
    }
}

/// Trace of `omega sum_j a_j theta_j^n` for n = 1..=N.
pub fn ek_trace(
    omega: f64,
    p: &ParamPoint,
    es: &EigenSystem,
    cp: &CharPoly,
    vd: &VandermondeData,
    n: usize,
) -> Result<EkTrace> {
    if omega <= 0.0 {
        return Err(Error::InvalidParameter("omega must be > 0".into()));
    }
    if n < es.m {
        return Err(Error::InvalidParameter(format!(
            "N = {n} must be >= m = {}",
            es.m
        )));
    }
    let seeds = seed_values(omega, p, es)?;
    let xs = extend_dd(&seeds, &cp.recurrence, n)?;
    Ok(trace_from_dd(omega, xs, es, vd))
}

/// Companion-recurrence prediction of `K_{n+m}` from the window
/// `(K_n, ..., K_{n+m-1})`. Exact whenever `max(|eps_n|, ..., |eps_{n+m}|)`
/// is below rho; garbage in, garbage out otherwise.
pub fn predict_next_k(window: &[i64], cp: &CharPoly) -> i64 {
    debug_assert_eq!(window.len(), cp.recurrence.len());
    let acc: i128 = window
        .iter()
        .zip(&cp.recurrence)
        .map(|(&k, &c)| k as i128 * c as i128)
        .sum();
    acc.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Membership statistics for the exceptional-set condition: counts
/// `n in [1, N]` with `||x_n|| >= rho`; membership holds when the count is
/// below `N/k`.
#[derive(Clone, Debug)]
pub struct EkStats {
    pub omega: f64,
    pub n: usize,
    pub k: u32,
    pub b: f64,
    pub rho: f64,
    pub bad_count: usize,
    pub member: bool,
    /// Whether N >= n_min_factor * ln(B); below this the asymptotic
    /// approximation regime of the trace has not started.
    pub n_min_satisfied: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn ekn_membership(
    p: &ParamPoint,
    es: &EigenSystem,
    cp: &CharPoly,
    vd: &VandermondeData,
    omega: f64,
    rho: f64,
    n: usize,
    k: u32,
    b: f64,
    n_min_factor: f64,
) -> Result<EkStats> {
    if !(omega >= 1.0 / b && omega <= b) {
        return Err(Error::OmegaOutOfRange { omega, b });
    }
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let trace = ek_trace(omega, p, es, cp, vd, n)?;
    let bad_count = trace.eps.iter().filter(|e| e.abs() >= rho).count();
    Ok(EkStats {
        omega,
        n,
        k,
        b,
        rho,
        bad_count,
        member: (bad_count as u64) * (k as u64) < n as u64,
        n_min_satisfied: n as f64 >= n_min_factor * b.ln(),
    })
}

// ---------------------------------------------------------------------------
// Cover counting
// ---------------------------------------------------------------------------

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k.min(n));
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc = acc * BigUint::from(n - k + i) / BigUint::from(i);
    }
    acc
}

/// Natural log of a big integer via its top bits.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return num_traits::ToPrimitive::to_f64(x).unwrap_or(1.0).ln();
    }
    let shift = bits - 53;
    let top = x >> shift;
    let mant = num_traits::ToPrimitive::to_f64(&top).unwrap_or(1.0);
    mant.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Explicit cover bookkeeping: ball radius `2 B C_Theta |theta_{m-q}|^{-N+m-1}`
/// against the count bound `B^m binom(N, ceil(N/k)) L^{(m+1) ceil(N/k)}`.
/// The count carries an unspecified substitution-dependent O(1) prefactor
/// which is reported symbolically, never folded into the numbers.
#[derive(Clone, Debug)]
pub struct CoverBudget {
    pub n: usize,
    pub k: u32,
    pub b: u64,
    pub eta: f64,
    pub m: usize,
    pub big_l: f64,
    pub theta_mq_abs: f64,
    pub c_theta: f64,
    pub ball_radius: f64,
    pub ln_ball_radius: f64,
    /// Exact binomial factor binom(N, ceil(N/k)).
    pub binom: BigUint,
    /// ln of the unnormalized count bound B^m binom L^{(m+1) ceil(N/k)}.
    pub ln_ball_count: f64,
    /// ln of count * radius^eta (one term of the Hausdorff-sum estimate).
    pub ln_series_term: f64,
}

pub fn cover_budget(
    n: usize,
    k: u32,
    b: u64,
    es: &EigenSystem,
    vd: &VandermondeData,
    eta: f64,
) -> Result<CoverBudget> {
    if b < 2 {
        return Err(Error::InvalidParameter("B must be >= 2".into()));
    }
    if k < 1 || k as usize > n {
        return Err(Error::InvalidParameter("need 1 <= k <= N".into()));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter("eta must lie in (0, 1]".into()));
    }
    let m = es.m;
    let theta_mq = es.theta_mq_abs();
    let ceil_nk = n.div_ceil(k as usize);
    let binom = binomial(n as u64, ceil_nk as u64);
    let ln_count = m as f64 * (b as f64).ln()
        + ln_big(&binom)
        + (m as f64 + 1.0) * ceil_nk as f64 * vd.big_l.ln();
    let ln_radius =
        (2.0 * b as f64 * vd.c_theta).ln() + (-(n as f64) + m as f64 - 1.0) * theta_mq.ln();
    Ok(CoverBudget {
        n,
        k,
        b,
        eta,
        m,
        big_l: vd.big_l,
        theta_mq_abs: theta_mq,
        c_theta: vd.c_theta,
        ball_radius: ln_radius.exp(),
        ln_ball_radius: ln_radius,
        binom,
        ln_ball_count: ln_count,
        ln_series_term: ln_count + eta * ln_radius,
    })
}

/// Smallest N* in the scanned range after which the series term decreases
/// monotonically (None when it never settles).
pub fn cover_series_onset(
    k: u32,
    b: u64,
    es: &EigenSystem,
    vd: &VandermondeData,
    eta: f64,
    n_range: std::ops::Range<usize>,
) -> Result<Option<usize>> {
    let mut prev: Option<f64> = None;
    let mut onset: Option<usize> = None;
    for n in n_range {
        if (k as usize) > n {
            continue;
        }
        let term = cover_budget(n, k, b, es, vd, eta)?.ln_series_term;
        if let Some(p) = prev {
            if term < p {
                onset.get_or_insert(n);
            } else {
                onset = None;
            }
        }
        prev = Some(term);
    }
    Ok(onset)
}

// ---------------------------------------------------------------------------
// Dimension upper bound
// ---------------------------------------------------------------------------

/// Upper bound for the Hausdorff dimension of the exceptional parameter set:
/// the infimum of eta in (0, 1] satisfying both feasibility conditions
///
///   (1/k)((1 + ln k) + m ln L) < (eta/2) ln |theta_{m-q}|
///   Upsilon eta ln |theta_{m-q}| / 2 > m + 2
///
/// (the binomial constant is instantiated through the exact inequality
/// `binom(N, ceil(N/k)) <= exp[(1 + ln k) N / k]`). Returns None
/// ("infeasible") when no eta <= 1 works.
pub fn dimension_bound(
    k: u32,
    upsilon: f64,
    es: &EigenSystem,
    vd: &VandermondeData,
) -> Result<Option<f64>> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    if upsilon <= 0.0 {
        return Err(Error::InvalidParameter("Upsilon must be > 0".into()));
    }
    let m = es.m as f64;
    let log_t = es.theta_mq_abs().ln();
    let eta1 = 2.0 * ((1.0 + (k as f64).ln()) + m * vd.big_l.ln()) / (k as f64 * log_t);
    let eta2 = 2.0 * (m + 2.0) / (upsilon * log_t);
    let eta = eta1.max(eta2);
    Ok(if eta < 1.0 { Some(eta) } else { None })
}

// ---------------------------------------------------------------------------
// Exhaustive small-N branching check
// ---------------------------------------------------------------------------

/// Exhaustively enumerates every realizable K-sequence of length `n` for
/// `omega` in `[lo, hi]` (the K-sequence is piecewise constant in omega with
/// breakpoints where some `omega g_n` crosses a half-integer), groups windows
/// of length m, and returns the largest number of distinct continuations
/// observed for a single window.
pub fn enumerate_branching(
    p: &ParamPoint,
    es: &EigenSystem,
    lo: f64,
    hi: f64,
    n: usize,
    max_sequences: usize,
) -> Result<usize> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter("need 0 < lo < hi".into()));
    }
    let m = es.m;
    if n <= m {
        return Err(Error::InvalidParameter("need N > m".into()));
    }
    let scales = p.trace_scales(es, n);
    let mut cuts: Vec<f64> = vec![lo, hi];
    for &g in &scales {
        debug_assert!(g > 0.0);
        let j_lo = (lo * g - 0.5).ceil() as i64;
        let j_hi = (hi * g - 0.5).floor() as i64;
        for j in j_lo..=j_hi {
            let w = (j as f64 + 0.5) / g;
            if w > lo && w < hi {
                cuts.push(w);
            }
        }
        if cuts.len() > 4 * max_sequences {
            return Err(Error::InvalidParameter(format!(
                "breakpoint count exceeds budget {max_sequences}; reduce N or the interval"
            )));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut continuations: HashMap<Vec<i64>, HashSet<i64>> = HashMap::new();
    for pair in cuts.windows(2) {
        let w = 0.5 * (pair[0] + pair[1]);
        if pair[1] - pair[0] <= 0.0 {
            continue;
        }
        let ks: Vec<i64> = scales
            .iter()
            .map(|&g| nearest_int_split(w * g).0)
            .collect();
        for window in ks.windows(m + 1) {
            continuations
                .entry(window[..m].to_vec())
                .or_default()
                .insert(window[m]);
        }
    }
    Ok(continuations
        .values()
        .map(HashSet::len)
        .max()
        .unwrap_or(0))
}
