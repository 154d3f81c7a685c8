//! Standing-hypothesis checks: primitivity (Wielandt bound on boolean matrix
//! powers), a Morse-Hedlund aperiodicity heuristic on a long orbit prefix,
//! irreducibility of the characteristic polynomial and expansion of the
//! second eigenvalue.

use num_complex::Complex64;
use std::collections::HashSet;

use crate::error::Result;
use crate::perron::{self, CharPoly, EigenSystem, Irreducibility};
use crate::substitution::Substitution;

pub const DEFAULT_COMPLEXITY_DEPTH: usize = 64;

/// Outcome of `validate_assumptions`, with witnesses. Flags all true means
/// the quantitative machinery applies (aperiodicity up to heuristic depth).
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub primitive: bool,
    /// Least k with S^k entrywise positive, when primitive.
    pub primitivity_power: Option<u32>,
    /// Morse-Hedlund heuristic: false when some p(n) <= n was observed.
    pub aperiodic_heuristic: bool,
    /// Subword complexity profile (n, p(n)) for n up to the requested depth.
    pub complexity_profile: Vec<(usize, usize)>,
    pub char_poly: CharPoly,
    pub irreducibility: Irreducibility,
    pub char_poly_irreducible: bool,
    /// None when the eigen solver refused (e.g. repeated roots).
    pub eigenvalues: Option<Vec<Complex64>>,
    pub second_eigenvalue_expanding: bool,
    pub theta: Option<f64>,
    pub theta2_abs: Option<f64>,
    pub beta: Option<f64>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.primitive
            && self.aperiodic_heuristic
            && self.char_poly_irreducible
            && self.second_eigenvalue_expanding
    }

    pub fn violation_message(&self) -> String {
        let mut missing = Vec::new();
        if !self.primitive {
            missing.push("primitive");
        }
        if !self.aperiodic_heuristic {
            missing.push("aperiodic (heuristic)");
        }
        if !self.char_poly_irreducible {
            missing.push("irreducible characteristic polynomial");
        }
        if !self.second_eigenvalue_expanding {
            missing.push("|theta_2| > 1");
        }
        format!("failed hypotheses: {}", missing.join(", "))
    }
}

/// Least k <= m^2 - 2m + 2 (the Wielandt bound) with S^k entrywise positive,
/// using boolean reachability so no integer ever overflows.
fn primitivity_power(s: &[Vec<u64>]) -> Option<u32> {
    let m = s.len();
    let base: Vec<u64> = s
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0u64, |acc, (j, &x)| acc | (u64::from(x > 0) << j))
        })
        .collect();
    let bool_mul = |a: &[u64], b: &[u64]| -> Vec<u64> {
        a.iter()
            .map(|&row| {
                (0..m)
                    .filter(|j| row & (1 << j) != 0)
                    .fold(0u64, |acc, j| acc | b[j])
            })
            .collect()
    };
    let full = (1u64 << m) - 1;
    let wielandt = (m * m).saturating_sub(2 * m) as u32 + 2;
    let mut cur = base.clone();
    for k in 1..=wielandt {
        if cur.iter().all(|&row| row == full) {
            return Some(k);
        }
        cur = bool_mul(&cur, &base);
    }
    if cur.iter().all(|&row| row == full) {
        return Some(wielandt);
    }
    None
}

/// Subword complexity p(n) for n = 1..=depth on a prefix of the orbit of the
/// first letter. A finite prefix can only undercount, which makes the
/// Morse-Hedlund test (p(n) <= n for some n implies eventual periodicity) a
/// heuristic rather than a decision procedure.
pub fn complexity_profile(
    subst: &Substitution,
    depth: usize,
    prefix_len: usize,
    cap: u64,
) -> Result<Vec<(usize, usize)>> {
    let a = 0u8;
    let w = subst.prefix_orbit(a, prefix_len, cap)?;
    let syms = w.symbols();
    let mut profile = Vec::with_capacity(depth);
    for n in 1..=depth.min(syms.len()) {
        let mut set: HashSet<&[u8]> = HashSet::new();
        for window in syms.windows(n) {
            set.insert(window);
        }
        profile.push((n, set.len()));
    }
    Ok(profile)
}

/// Checks the standing hypotheses and returns a report with witnesses.
/// Report-style: this never fails on a "bad" substitution; downstream
/// operations raise `AssumptionViolation` when a required flag is false.
pub fn validate_assumptions(
    subst: &Substitution,
    complexity_depth: usize,
    cap: u64,
) -> Result<AssumptionReport> {
    let s = subst.matrix();
    let primitivity = primitivity_power(&s);
    let (char_poly, irreducibility) = perron::char_poly_analysis(&s);
    let eigen = perron::eigen_system_from_charpoly(&s, &char_poly, perron::DEFAULT_EIGEN_TOL).ok();

    let prefix_len = (16 * complexity_depth).max(1024);
    let complexity = complexity_profile(subst, complexity_depth, prefix_len, cap)?;
    let aperiodic = complexity.iter().all(|&(n, p)| p > n);

    let (theta, theta2_abs, beta, expanding) = match &eigen {
        Some(es) => (
            Some(es.theta),
            Some(es.values[1].norm()),
            Some(es.beta),
            es.second_eigenvalue_expanding(),
        ),
        None => (None, None, None, false),
    };

    Ok(AssumptionReport {
        primitive: primitivity.is_some(),
        primitivity_power: primitivity,
        aperiodic_heuristic: aperiodic,
        complexity_profile: complexity,
        char_poly_irreducible: irreducibility == Irreducibility::Irreducible,
        char_poly,
        irreducibility,
        eigenvalues: eigen.as_ref().map(|es| es.values.clone()),
        second_eigenvalue_expanding: expanding,
        theta,
        theta2_abs,
        beta,
    })
}

/// Convenience: eigen system gated on the report (callers that need the
/// hypotheses should fail loudly, not silently).
pub fn eigen_checked(subst: &Substitution, report: &AssumptionReport) -> Result<EigenSystem> {
    if !report.all_hold() {
        return Err(crate::error::Error::AssumptionViolation(
            report.violation_message(),
        ));
    }
    perron::eigen_system(&subst.matrix(), perron::DEFAULT_EIGEN_TOL)
}
