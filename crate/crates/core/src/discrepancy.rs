//! Symbolic discrepancy: Birkhoff sums of cylinder step functions, their
//! sup-growth along an orbit (expected exponent `beta = log_theta |theta_2|`
//! for mean-zero data when `|theta_2| > 1`), and the induced bound on the
//! spectral measure near zero.

use num_complex::Complex64;

use crate::assumptions::AssumptionReport;
use crate::error::{Error, Result};
use crate::perron::EigenSystem;
use crate::spectral::{decay_fit, DecayFit};
use crate::substitution::{Substitution, Word};
use crate::util::KahanComplex;

type C = Complex64;

/// A step function `F = sum_a d_a 1_{[a]}` on cylinders.
#[derive(Clone, Debug)]
pub struct StepFunction {
    pub d: Vec<C>,
    pub mean_zero: bool,
}

pub const MEAN_TOL: f64 = 1e-10;

impl StepFunction {
    pub fn new(d: Vec<C>, freq: &[f64]) -> Self {
        let mean: C = d.iter().zip(freq).map(|(v, &f)| v * f).sum();
        let scale = d
            .iter()
            .zip(freq)
            .map(|(v, &f)| v.norm() * f)
            .sum::<f64>()
            .max(1.0);
        StepFunction {
            d,
            mean_zero: mean.norm() <= MEAN_TOL * scale,
        }
    }

    /// Projects arbitrary weights onto the mean-zero hyperplane by
    /// subtracting the frequency-weighted mean.
    pub fn mean_zero_from(base: &[f64], freq: &[f64]) -> Self {
        let mean: f64 = base.iter().zip(freq).map(|(&v, &f)| v * f).sum();
        let d: Vec<C> = base.iter().map(|&v| C::new(v - mean, 0.0)).collect();
        Self::new(d, freq)
    }

    pub fn weighted_mean(&self, freq: &[f64]) -> C {
        self.d.iter().zip(freq).map(|(v, &f)| v * f).sum()
    }
}

/// Birkhoff sum `S_N(F) = sum_{n < N} d_{x_n}`, streaming and compensated.
pub fn birkhoff_sum(f: &StepFunction, x: &Word, n: usize) -> Result<C> {
    if n > x.len() {
        return Err(Error::PrefixTooShort {
            needed: n as f64,
            available: x.len() as f64,
        });
    }
    let mut acc = KahanComplex::new();
    for &sym in &x.symbols()[..n] {
        acc.add(f.d[sym as usize]);
    }
    Ok(acc.value())
}

/// Running sup of |S_n| recorded at geometric checkpoints (ratio ~ theta).
#[derive(Clone, Debug)]
pub struct DiscrepancySeries {
    pub checkpoints: Vec<u64>,
    /// D(N_i) = max_{n <= N_i} |S_n(F)|.
    pub values: Vec<f64>,
}

impl DiscrepancySeries {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.checkpoints
            .iter()
            .zip(&self.values)
            .map(|(&n, &d)| (n as f64, d))
            .collect()
    }
}

/// Streams the orbit once, keeping the true running sup over every prefix.
pub fn discrepancy_series(
    f: &StepFunction,
    subst: &Substitution,
    n_max: usize,
    theta: f64,
    cap: u64,
) -> Result<DiscrepancySeries> {
    let x = subst.prefix_orbit(0, n_max, cap)?;
    let mut checkpoints = Vec::new();
    let mut next = 10u64.min(n_max as u64);
    let mut acc = KahanComplex::new();
    let mut running_max = 0.0f64;
    let mut values = Vec::new();
    for (i, &sym) in x.symbols()[..n_max].iter().enumerate() {
        acc.add(f.d[sym as usize]);
        let norm = acc.value().norm();
        if norm > running_max {
            running_max = norm;
        }
        let n = (i + 1) as u64;
        if n == next {
            checkpoints.push(n);
            values.push(running_max);
            next = ((n as f64 * theta).round() as u64).max(n + 1).min(n_max as u64);
            if n == n_max as u64 {
                break;
            }
        }
    }
    Ok(DiscrepancySeries {
        checkpoints,
        values,
    })
}

/// Discrepancy growth fit. Requires the standing hypotheses and a mean-zero
/// step function; fits `log D` against `log N` over `fit_range`, optionally
/// subtracting the logarithmic correction `nu log log N` with
/// `nu = nu_plus_1 - 1` from the eigen data.
#[allow(clippy::too_many_arguments)]
pub fn discrepancy_fit(
    f: &StepFunction,
    subst: &Substitution,
    es: &EigenSystem,
    report: &AssumptionReport,
    n_max: usize,
    fit_range: (f64, f64),
    log_correction: bool,
    cap: u64,
) -> Result<(DiscrepancySeries, DecayFit)> {
    if !report.all_hold() {
        return Err(Error::AssumptionViolation(report.violation_message()));
    }
    if !f.mean_zero {
        let freq = es.letter_frequencies();
        return Err(Error::MeanNotZero {
            mean: f.weighted_mean(&freq).norm(),
        });
    }
    let series = discrepancy_series(f, subst, n_max, es.theta, cap)?;
    let nu = (es.nu_plus_1 - 1) as f64;
    let pts: Vec<(f64, f64)> = series
        .points()
        .into_iter()
        .map(|(n, d)| {
            let v = if log_correction && n > 1.0 {
                d / n.ln().powf(nu)
            } else {
                d
            };
            (n, v)
        })
        .collect();
    let fit = decay_fit(&pts, Some(fit_range))?;
    Ok((series, fit))
}

/// Spectral-mass bound at zero: `C (log(1/r))^{2 nu} r^{2 - 2 beta}` with
/// `nu = nu_plus_1 - 1` and `beta = log_theta |theta_2|`. Meaningful for
/// `r in (0, 1/e)` so the logarithm stays above 1.
pub fn zero_mass_bound(r: f64, es: &EigenSystem, c: f64) -> f64 {
    assert!(
        r > 0.0 && r < (-1.0f64).exp(),
        "zero_mass_bound needs r in (0, 1/e)"
    );
    assert!(c > 0.0, "the O(1) constant must be positive");
    let nu = (es.nu_plus_1 - 1) as f64;
    c * (1.0 / r).ln().powf(2.0 * nu) * r.powf(2.0 - 2.0 * es.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::{validate_assumptions, DEFAULT_COMPLEXITY_DEPTH};
    use crate::flow::tiling_length;
    use crate::perron::{eigen_system, DEFAULT_EIGEN_TOL};
    use crate::substitution::DEFAULT_LENGTH_CAP;

    fn setup() -> (Substitution, EigenSystem, AssumptionReport, Vec<f64>) {
        let z = Substitution::parse("a->abbb; b->a").unwrap();
        let es = eigen_system(&z.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        let report =
            validate_assumptions(&z, DEFAULT_COMPLEXITY_DEPTH, DEFAULT_LENGTH_CAP).unwrap();
        let freq = es.letter_frequencies();
        (z, es, report, freq)
    }

    #[test]
    fn birkhoff_sum_examples() {
        let (z, _, _, freq) = setup();
        let ones = StepFunction::new(vec![C::new(1.0, 0.0); 2], &freq);
        let x = z.prefix_orbit(0, 100, DEFAULT_LENGTH_CAP).unwrap();
        assert_eq!(birkhoff_sum(&ones, &x, 57).unwrap(), C::new(57.0, 0.0));
        assert_eq!(birkhoff_sum(&ones, &x, 0).unwrap(), C::new(0.0, 0.0));
        // Mean-zero d over zeta^3(a): counts (7, 12) give 7 d_a + 12 d_b.
        let f = StepFunction::mean_zero_from(&[1.0, 0.0], &freq);
        let w3 = z
            .apply_power(&z.word_from_str("a").unwrap(), 3, DEFAULT_LENGTH_CAP)
            .unwrap();
        let s = birkhoff_sum(&f, &w3, 19).unwrap();
        let expect = f.d[0] * 7.0 + f.d[1] * 12.0;
        assert!((s - expect).norm() < 1e-12);
        assert!(matches!(
            birkhoff_sum(&f, &w3, 20),
            Err(Error::PrefixTooShort { .. })
        ));
    }

    #[test]
    fn birkhoff_equals_twisted_sum_at_zero_frequency() {
        let (z, _, _, freq) = setup();
        let f = StepFunction::mean_zero_from(&[0.3, -1.2], &freq);
        let x = z.prefix_orbit(0, 4000, DEFAULT_LENGTH_CAP).unwrap();
        let s = [0.5, 0.5];
        for n in [17usize, 100, 3999] {
            let prefix = Word::from_symbols(x.symbols()[..n].to_vec());
            let via_phi: C = (0..2u8)
                .map(|a| f.d[a as usize] * crate::flow::twisted_sum(&prefix, a, 0.0, &s))
                .sum();
            let direct = birkhoff_sum(&f, &x, n).unwrap();
            assert!((via_phi - direct).norm() < 1e-12 * n as f64);
            let _ = tiling_length(&prefix, &s);
        }
    }

    #[test]
    fn discrepancy_gates() {
        let (z, es, report, freq) = setup();
        // Zero weights: D is identically zero, the fit rejects.
        let zero = StepFunction::new(vec![C::new(0.0, 0.0); 2], &freq);
        match discrepancy_fit(
            &zero,
            &z,
            &es,
            &report,
            100_000,
            (1e2, 1e5),
            false,
            DEFAULT_LENGTH_CAP,
        ) {
            Err(Error::NonPositiveValue { .. }) => {}
            other => panic!("expected NonPositiveValue, got {other:?}"),
        }
        // Non-mean-zero input is refused.
        let bad = StepFunction::new(vec![C::new(1.0, 0.0); 2], &freq);
        assert!(matches!(
            discrepancy_fit(
                &bad,
                &z,
                &es,
                &report,
                100_000,
                (1e2, 1e5),
                false,
                DEFAULT_LENGTH_CAP
            ),
            Err(Error::MeanNotZero { .. })
        ));
        // Fibonacci fails the assumption gate.
        let fib = Substitution::parse("1->12; 2->1").unwrap();
        let fes = eigen_system(&fib.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        let frep =
            validate_assumptions(&fib, DEFAULT_COMPLEXITY_DEPTH, DEFAULT_LENGTH_CAP).unwrap();
        let ffreq = fes.letter_frequencies();
        let f = StepFunction::mean_zero_from(&[1.0, 0.0], &ffreq);
        assert!(matches!(
            discrepancy_fit(
                &f,
                &fib,
                &fes,
                &frep,
                100_000,
                (1e2, 1e5),
                false,
                DEFAULT_LENGTH_CAP
            ),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn discrepancy_growth_properties() {
        let (z, es, report, freq) = setup();
        let f = StepFunction::mean_zero_from(&[1.0, 0.0], &freq);
        let (series, fit) = discrepancy_fit(
            &f,
            &z,
            &es,
            &report,
            200_000,
            (1e2, 2e5),
            false,
            DEFAULT_LENGTH_CAP,
        )
        .unwrap();
        // D non-decreasing and bounded by N max |d|.
        let dmax = f.d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for w in series.points().windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for (n, d) in series.points() {
            assert!(d <= n * dmax + 1e-9);
        }
        // Sub-linear growth with a clear margin.
        assert!(fit.slope < 0.7, "slope {}", fit.slope);
        assert!(fit.slope > 0.0);
    }

    #[test]
    fn zero_mass_bound_examples() {
        let (_, es, _, _) = setup();
        // r = 1/e: the log factor is exactly 1.
        let r = (-1.0f64).exp() - 1e-12;
        let v = zero_mass_bound(r, &es, 1.0);
        assert!((v - r.powf(2.0 - 2.0 * es.beta)).abs() < 1e-12);
        // zeta*: nu = 0, beta ~ 0.3171 => 0.01^{1.3658} ~ 10^{-2.7316}.
        let v = zero_mass_bound(0.01, &es, 1.0);
        assert!((v.log10() + 2.7316).abs() < 1e-3, "{}", v.log10());
        // Monotone decreasing in r for nu = 0.
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let r = 0.3 * 0.7f64.powi(i);
            let v = zero_mass_bound(r, &es, 1.0);
            assert!(v < prev);
            prev = v;
        }
    }
}
