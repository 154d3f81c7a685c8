//! Linear algebra of the substitution matrix: exact integer characteristic
//! polynomial, irreducibility over Q, the eigen system with its dual basis,
//! Vandermonde constants, and the parametrization of roof vectors by the
//! coefficients `b_j` of `|zeta^n(v)|_s = sum_j b_j theta_j^n`.
//!
//! Inner products in this module are bilinear (no conjugation): the
//! identities pair complex eigenvectors of a real matrix against real data,
//! and conjugate symmetry is restored explicitly for conjugate pairs.
#![allow(clippy::needless_range_loop)] // dense index algebra reads clearer

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::substitution::{mat_pow_vec_big, population_vector, ReturnWord, Substitution};

type C = Complex64;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Characteristic polynomial (exact) and irreducibility over Q
// ---------------------------------------------------------------------------

/// Monic integer characteristic polynomial plus its companion recurrence
/// `x^m = sum_i recurrence[i] x^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharPoly {
    /// coeffs[i] is the coefficient of x^i; coeffs[m] = 1.
    pub coeffs: Vec<BigInt>,
    /// recurrence[i] = -coeffs[i] for i < m.
    pub recurrence: Vec<i64>,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
            .collect()
    }

    pub fn eval(&self, z: C) -> C {
        let cf = self.coeffs_f64();
        let mut acc = C::new(0.0, 0.0);
        for &c in cf.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn to_string_pretty(&self) -> String {
        let m = self.degree();
        let mut out = format!("x^{m}");
        for i in (0..m).rev() {
            let c = &self.coeffs[i];
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            let mag = c.abs();
            let one = BigInt::from(1);
            let term = match i {
                0 => format!("{mag}"),
                1 if mag == one => "x".to_string(),
                1 => format!("{mag}*x"),
                _ if mag == one => format!("x^{i}"),
                _ => format!("{mag}*x^{i}"),
            };
            out.push_str(&format!(" {sign} {term}"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Irreducibility {
    Irreducible,
    Reducible,
    /// Degree above 8: the exact search is refused rather than guessed.
    Unknown,
}

/// Exact characteristic polynomial by the Faddeev-LeVerrier recursion (all
/// divisions exact over Z), plus an exact irreducibility decision over Q for
/// degree <= 8.
pub fn char_poly_analysis(s: &[Vec<u64>]) -> (CharPoly, Irreducibility) {
    let cp = char_poly(s);
    let irr = if cp.degree() > 8 {
        Irreducibility::Unknown
    } else if is_irreducible(&cp.coeffs) {
        Irreducibility::Irreducible
    } else {
        Irreducibility::Reducible
    };
    (cp, irr)
}

fn char_poly(s: &[Vec<u64>]) -> CharPoly {
    let m = s.len();
    let sb: Vec<Vec<BigInt>> = s
        .iter()
        .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut coeffs = vec![BigInt::zero(); m + 1];
    coeffs[m] = BigInt::from(1);
    // M_1 = S; c_{m-k} = -tr(M_k)/k; M_{k+1} = S (M_k + c_{m-k} I).
    let mut mk = sb.clone();
    for k in 1..=m {
        let tr: BigInt = (0..m).map(|i| mk[i][i].clone()).sum();
        let c = -tr / BigInt::from(k as u64);
        coeffs[m - k] = c.clone();
        if k < m {
            let mut shifted = mk.clone();
            for (i, row) in shifted.iter_mut().enumerate() {
                row[i] += &c;
            }
            mk = big_mat_mul(&sb, &shifted);
        }
    }
    let recurrence = coeffs[..m]
        .iter()
        .map(|c| {
            (-c).to_i64()
                .expect("companion recurrence coefficient exceeds i64")
        })
        .collect();
    CharPoly { coeffs, recurrence }
}

fn big_mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let m = a.len();
    let mut out = vec![vec![BigInt::zero(); m]; m];
    for i in 0..m {
        for k in 0..m {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

fn eval_bigint(coeffs: &[BigInt], t: i64) -> BigInt {
    let mut acc = BigInt::zero();
    for c in coeffs.iter().rev() {
        acc = acc * BigInt::from(t) + c;
    }
    acc
}

fn signed_divisors(n: i128) -> Vec<i128> {
    let n = n.unsigned_abs();
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d: u128 = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d as i128);
            if d * d != n {
                large.push((n / d) as i128);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    let mut out = Vec::with_capacity(small.len() * 2);
    for v in small {
        out.push(v);
        out.push(-v);
    }
    out
}

/// Exact irreducibility over Q of a monic integer polynomial of degree <= 8:
/// rational-root elimination, then a Kronecker search (interpolation through
/// divisor tuples of values at small integer points, pruned by pairwise
/// congruences) for monic factors of degree 2..=deg/2.
fn is_irreducible(coeffs: &[BigInt]) -> bool {
    let deg = coeffs.len() - 1;
    if deg <= 1 {
        return true;
    }
    if coeffs[0].is_zero() {
        return false; // x divides p
    }
    let c0 = coeffs[0]
        .to_i128()
        .expect("constant term exceeds i128 in irreducibility test");
    for r in signed_divisors(c0) {
        if let Ok(r64) = i64::try_from(r) {
            if eval_bigint(coeffs, r64).is_zero() {
                return false;
            }
        }
    }
    for gdeg in 2..=deg / 2 {
        if kronecker_factor_exists(coeffs, gdeg) {
            return false;
        }
    }
    true
}

const KRONECKER_POINTS: [i64; 5] = [0, 1, -1, 2, -2];

fn kronecker_factor_exists(coeffs: &[BigInt], gdeg: usize) -> bool {
    let points = &KRONECKER_POINTS[..=gdeg];
    let mut divisor_lists: Vec<Vec<i128>> = Vec::with_capacity(points.len());
    for &t in points {
        let v = eval_bigint(coeffs, t)
            .to_i128()
            .expect("polynomial value exceeds i128 in Kronecker search");
        debug_assert!(v != 0, "integer roots are eliminated before this search");
        divisor_lists.push(signed_divisors(v));
    }
    let mut chosen = vec![0i128; points.len()];
    kronecker_dfs(coeffs, points, &divisor_lists, &mut chosen, 0, gdeg)
}

fn kronecker_dfs(
    coeffs: &[BigInt],
    points: &[i64],
    divisor_lists: &[Vec<i128>],
    chosen: &mut [i128],
    depth: usize,
    gdeg: usize,
) -> bool {
    if depth == points.len() {
        return try_interpolated_factor(coeffs, points, chosen, gdeg);
    }
    'outer: for &v in &divisor_lists[depth] {
        // Integer polynomials satisfy g(a) = g(b) mod (a - b).
        for j in 0..depth {
            let md = (points[depth] - points[j]).unsigned_abs() as i128;
            if (v - chosen[j]).rem_euclid(md) != 0 {
                continue 'outer;
            }
        }
        chosen[depth] = v;
        if kronecker_dfs(coeffs, points, divisor_lists, chosen, depth + 1, gdeg) {
            return true;
        }
    }
    false
}

/// p(x) * (x - t) over BigInt.
fn poly_mul_linear(p: &[BigInt], t: i64) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); p.len() + 1];
    for (k, c) in p.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= BigInt::from(t) * c;
    }
    out
}

/// True iff the monic polynomial `g` divides `p` exactly over Z.
fn poly_divides(p: &[BigInt], g: &[BigInt]) -> bool {
    let mut rem: Vec<BigInt> = p.to_vec();
    let gd = g.len() - 1;
    while rem.len() > gd {
        let lead = rem.last().unwrap().clone();
        let shift = rem.len() - 1 - gd;
        if !lead.is_zero() {
            for (k, gc) in g.iter().enumerate() {
                let idx = shift + k;
                let delta = &lead * gc;
                rem[idx] -= delta;
            }
        }
        rem.pop();
    }
    rem.iter().all(Zero::is_zero)
}

fn try_interpolated_factor(
    coeffs: &[BigInt],
    points: &[i64],
    values: &[i128],
    gdeg: usize,
) -> bool {
    let n = points.len();
    let dens: Vec<BigInt> = (0..n)
        .map(|i| {
            let mut d = BigInt::from(1);
            for j in 0..n {
                if j != i {
                    d *= BigInt::from(points[i] - points[j]);
                }
            }
            d
        })
        .collect();
    let mut denom = BigInt::from(1);
    for d in &dens {
        denom *= d;
    }
    // Numerator of the Lagrange interpolant over the common denominator.
    let mut acc = vec![BigInt::zero(); n];
    for i in 0..n {
        let mut basis = vec![BigInt::from(1)];
        for (j, &t) in points.iter().enumerate() {
            if j != i {
                basis = poly_mul_linear(&basis, t);
            }
        }
        let scale = BigInt::from(values[i]) * (&denom / &dens[i]);
        for (k, b) in basis.iter().enumerate() {
            acc[k] += b * &scale;
        }
    }
    let mut g: Vec<BigInt> = Vec::with_capacity(n);
    for c in &acc {
        if (c % &denom) != BigInt::zero() {
            return false; // not an integer polynomial
        }
        g.push(c / &denom);
    }
    while g.len() > 1 && g.last().unwrap().is_zero() {
        g.pop();
    }
    if g.len() != gdeg + 1 {
        return false;
    }
    let one = BigInt::from(1);
    if *g.last().unwrap() == -&one {
        for c in g.iter_mut() {
            *c = -c.clone();
        }
    } else if *g.last().unwrap() != one {
        return false; // factor of a monic polynomial can be taken monic
    }
    poly_divides(coeffs, &g)
}

// ---------------------------------------------------------------------------
// Small complex dense linear algebra (m <= 8)
// ---------------------------------------------------------------------------

/// Bilinear product sum_i x_i y_i (no conjugation).
pub fn dot_bilinear(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn dot_bilinear_real(x: &[C], y: &[f64]) -> C {
    x.iter().zip(y).map(|(a, &b)| a * b).sum()
}

/// Max absolute row sum (operator norm on l-infinity).
pub fn op_norm_inf(mat: &[Vec<C>]) -> f64 {
    mat.iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn mat_vec(mat: &[Vec<C>], v: &[C]) -> Vec<C> {
    mat.iter().map(|row| dot_bilinear(row, v)).collect()
}

pub fn mat_mul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting; None when numerically singular.
pub fn mat_inverse(mat: &[Vec<C>]) -> Option<Vec<Vec<C>>> {
    let n = mat.len();
    let mut a: Vec<Vec<C>> = mat.to_vec();
    let mut inv: Vec<Vec<C>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| C::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pmax == 0.0 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != C::new(0.0, 0.0) {
                    for j in 0..n {
                        let ac = a[col][j];
                        let ic = inv[col][j];
                        a[r][j] -= f * ac;
                        inv[r][j] -= f * ic;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Null vector of a (numerically) rank n-1 matrix by full-pivot elimination.
fn null_vector(mat: &[Vec<C>]) -> Vec<C> {
    let n = mat.len();
    let mut a: Vec<Vec<C>> = mat.to_vec();
    let mut col_perm: Vec<usize> = (0..n).collect();
    for step in 0..n - 1 {
        let mut best = (step, step, 0.0f64);
        for r in step..n {
            for c in step..n {
                let v = a[r][c].norm();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        if best.2 == 0.0 {
            break;
        }
        a.swap(step, best.0);
        for row in a.iter_mut() {
            row.swap(step, best.1);
        }
        col_perm.swap(step, best.1);
        let d = a[step][step];
        for r in step + 1..n {
            let f = a[r][step] / d;
            if f != C::new(0.0, 0.0) {
                for c in step..n {
                    let v = a[step][c];
                    a[r][c] -= f * v;
                }
            }
        }
    }
    // Last permuted variable is free; back-substitute.
    let mut x = vec![C::new(0.0, 0.0); n];
    x[n - 1] = C::new(1.0, 0.0);
    for i in (0..n - 1).rev() {
        let mut s = C::new(0.0, 0.0);
        for j in i + 1..n {
            s += a[i][j] * x[j];
        }
        x[i] = -s / a[i][i];
    }
    let mut out = vec![C::new(0.0, 0.0); n];
    for (permuted, &orig) in col_perm.iter().enumerate() {
        out[orig] = x[permuted];
    }
    out
}

// ---------------------------------------------------------------------------
// Root finding: Aberth-Ehrlich on the characteristic polynomial
// ---------------------------------------------------------------------------

fn horner_with_derivative(coeffs: &[f64], z: C) -> (C, C) {
    let mut p = C::new(0.0, 0.0);
    let mut dp = C::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn aberth_roots(coeffs: &[f64]) -> Vec<C> {
    let deg = coeffs.len() - 1;
    let radius = 1.0 + coeffs[..deg].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<C> = (0..deg)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            C::from_polar(radius * (0.5 + 0.5 * (k as f64 + 1.0) / deg as f64), ang)
        })
        .collect();
    for _ in 0..400 {
        let mut max_step = 0.0f64;
        let snapshot = z.clone();
        for (k, zk) in z.iter_mut().enumerate() {
            let (p, dp) = horner_with_derivative(coeffs, *zk);
            if p == C::new(0.0, 0.0) {
                continue;
            }
            let w = if dp == C::new(0.0, 0.0) {
                C::new(1e-12, 1e-12)
            } else {
                p / dp
            };
            let mut s = C::new(0.0, 0.0);
            for (j, zj) in snapshot.iter().enumerate() {
                if j != k {
                    s += C::new(1.0, 0.0) / (*zk - zj);
                }
            }
            let denom = C::new(1.0, 0.0) - w * s;
            let step = if denom == C::new(0.0, 0.0) { w } else { w / denom };
            *zk -= step;
            max_step = max_step.max(step.norm() / (1.0 + zk.norm()));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    // Newton polish against the exact coefficients.
    for zk in z.iter_mut() {
        for _ in 0..4 {
            let (p, dp) = horner_with_derivative(coeffs, *zk);
            if dp == C::new(0.0, 0.0) {
                break;
            }
            *zk -= p / dp;
        }
    }
    z
}

/// Forces exact conjugate pairing and real-axis snapping on the root set.
fn canonicalize_roots(mut roots: Vec<C>) -> Result<Vec<C>> {
    let snap = |z: &mut C| {
        if z.im.abs() <= 1e-9 * (1.0 + z.norm()) {
            z.im = 0.0;
        }
    };
    roots.iter_mut().for_each(snap);
    let mut out: Vec<C> = Vec::with_capacity(roots.len());
    let mut pos: Vec<C> = Vec::new();
    let mut neg: Vec<C> = Vec::new();
    for z in roots {
        if z.im == 0.0 {
            out.push(z);
        } else if z.im > 0.0 {
            pos.push(z);
        } else {
            neg.push(z);
        }
    }
    if pos.len() != neg.len() {
        return Err(Error::InvalidParameter(
            "complex roots of a real polynomial failed to pair".into(),
        ));
    }
    for p in pos {
        let (idx, _) = neg
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (p.conj() - z).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let q = neg.swap_remove(idx);
        let avg = (p + q.conj()) / 2.0;
        out.push(avg);
        out.push(avg.conj());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Eigen system
// ---------------------------------------------------------------------------

/// Eigen data of the substitution matrix, sorted by descending modulus with
/// the Perron root first; duals satisfy the bilinear relation
/// `<e_i, e*_j> = delta_ij` and conjugate pairs carry conjugate vectors.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub m: usize,
    pub values: Vec<C>,
    /// Right eigenvectors, unit l2 norm, largest-modulus entry real positive.
    pub vectors: Vec<Vec<C>>,
    /// Dual basis (eigenvectors of the transpose), from the inverse of the
    /// eigenvector matrix.
    pub duals: Vec<Vec<C>>,
    /// Count of eigenvalues with modulus <= 1.
    pub q: usize,
    /// Perron root theta_1.
    pub theta: f64,
    /// log_theta |theta_2|.
    pub beta: f64,
    /// Number of eigenvalues sharing the modulus of theta_2.
    pub nu_plus_1: usize,
    pub biorth_residual: f64,
}

pub fn eigen_system(s: &[Vec<u64>], tol: f64) -> Result<EigenSystem> {
    let m = s.len();
    if m < 2 {
        return Err(Error::InvalidParameter("matrix must be at least 2x2".into()));
    }
    let cp = char_poly(s);
    eigen_system_from_charpoly(s, &cp, tol)
}

pub fn eigen_system_from_charpoly(
    s: &[Vec<u64>],
    cp: &CharPoly,
    tol: f64,
) -> Result<EigenSystem> {
    let m = s.len();
    let coeffs = cp.coeffs_f64();
    let mut roots = canonicalize_roots(aberth_roots(&coeffs))?;

    // Residual sanity on each polished root.
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    for &z in &roots {
        let (p, _) = horner_with_derivative(&coeffs, z);
        let bound = 1e4 * tol * scale * (1.0 + z.norm()).powi(m as i32);
        if p.norm() > bound {
            return Err(Error::InvalidParameter(format!(
                "root residual {:.3e} exceeds bound {:.3e}",
                p.norm(),
                bound
            )));
        }
    }

    let max_mod = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Repeated roots leave the polished iterates in a cluster of diameter
    // about sqrt(machine eps), so the separation gate must sit above that
    // scale as well as above the requested tolerance.
    let sep_tol = (10.0 * tol).max(5e-8) * max_mod.max(1.0);
    for i in 0..m {
        for j in i + 1..m {
            let sep = (roots[i] - roots[j]).norm();
            if sep < sep_tol {
                return Err(Error::RepeatedRoots { separation: sep });
            }
        }
    }

    roots.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    if roots[0].im != 0.0 || roots[0].re <= 0.0 {
        return Err(Error::AssumptionViolation(
            "leading eigenvalue is not real positive".into(),
        ));
    }

    let sc: Vec<Vec<C>> = s
        .iter()
        .map(|row| row.iter().map(|&x| C::new(x as f64, 0.0)).collect())
        .collect();

    let mut vectors: Vec<Option<Vec<C>>> = vec![None; m];
    for j in 0..m {
        if vectors[j].is_some() {
            continue;
        }
        let th = roots[j];
        if th.im < 0.0 {
            continue; // filled by its conjugate partner
        }
        let mut a = sc.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] -= th;
        }
        let mut v = null_vector(&a);
        // Normalize and fix the phase: largest-modulus entry real positive.
        let norm = dot_bilinear(&v, &v.iter().map(|z| z.conj()).collect::<Vec<_>>())
            .re
            .sqrt();
        for z in v.iter_mut() {
            *z /= norm;
        }
        let lead = v
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        let phase = lead / lead.norm();
        for z in v.iter_mut() {
            *z /= phase;
        }
        if th.im == 0.0 {
            for z in v.iter_mut() {
                z.im = 0.0;
            }
            let rn = v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
            for z in v.iter_mut() {
                z.re /= rn;
            }
            vectors[j] = Some(v);
        } else {
            // Locate the conjugate slot and store the conjugate vector there.
            let partner = (0..m)
                .find(|&k| k != j && vectors[k].is_none() && (roots[k] - th.conj()).norm() == 0.0)
                .ok_or_else(|| {
                    Error::InvalidParameter("conjugate eigenvalue slot not found".into())
                })?;
            vectors[partner] = Some(v.iter().map(|z| z.conj()).collect());
            vectors[j] = Some(v);
        }
    }
    let vectors: Vec<Vec<C>> = vectors.into_iter().map(Option::unwrap).collect();

    // Dual basis from the inverse of the eigenvector matrix (columns e_j).
    let emat: Vec<Vec<C>> = (0..m)
        .map(|i| (0..m).map(|j| vectors[j][i]).collect())
        .collect();
    let einv = mat_inverse(&emat).ok_or_else(|| {
        Error::InvalidParameter("eigenvector matrix is numerically singular".into())
    })?;
    let mut duals: Vec<Vec<C>> = (0..m).map(|j| einv[j].clone()).collect();
    // Restore exact conjugate symmetry of duals for conjugate pairs.
    for j in 0..m {
        if roots[j].im > 0.0 {
            if let Some(p) = (0..m).find(|&k| (roots[k] - roots[j].conj()).norm() == 0.0) {
                duals[p] = duals[j].iter().map(|z| z.conj()).collect();
            }
        }
    }

    let mut biorth = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let d = dot_bilinear(&vectors[i], &duals[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            biorth = biorth.max((d - target).norm());
        }
    }

    let q = roots.iter().filter(|z| z.norm() <= 1.0).count();
    let theta = roots[0].re;
    let t2 = roots[1].norm();
    let beta = t2.ln() / theta.ln();
    let nu_plus_1 = roots
        .iter()
        .skip(1)
        .filter(|z| (z.norm() - t2).abs() <= 1e-9 * t2.max(1.0))
        .count();

    Ok(EigenSystem {
        m,
        values: roots,
        vectors,
        duals,
        q,
        theta,
        beta,
        nu_plus_1,
        biorth_residual: biorth,
    })
}

impl EigenSystem {
    /// |theta_2| > 1, the standing hypothesis of the quantitative estimates.
    pub fn second_eigenvalue_expanding(&self) -> bool {
        self.values[1].norm() > 1.0 + 1e-12
    }

    /// Letter frequencies of the substitution system: the Perron right
    /// eigenvector normalized to sum 1 (entrywise positive for primitive S).
    pub fn letter_frequencies(&self) -> Vec<f64> {
        let v: Vec<f64> = self.vectors[0].iter().map(|z| z.re).collect();
        let sum: f64 = v.iter().sum();
        v.iter().map(|x| x / sum).collect()
    }

    /// Perron-Frobenius eigenvector of the transpose, normalized to the
    /// simplex: the self-similar roof vector.
    pub fn perron_roof(&self) -> Vec<f64> {
        let v: Vec<f64> = self.duals[0].iter().map(|z| z.re).collect();
        let sum: f64 = v.iter().sum();
        v.iter().map(|x| x / sum).collect()
    }

    /// Index (0-based) of theta_{m-q}: the smallest eigenvalue of modulus > 1.
    pub fn expanding_boundary_index(&self) -> usize {
        self.m - self.q - 1
    }

    pub fn theta_mq_abs(&self) -> f64 {
        self.values[self.expanding_boundary_index()].norm()
    }
}

// ---------------------------------------------------------------------------
// Vandermonde constants
// ---------------------------------------------------------------------------

/// The Vandermonde matrix of eigenvalue powers with its inverse and the
/// derived constants rho (in (0, 1/2)) and L (> 2) controlling the
/// integer-sequence step lemma.
#[derive(Clone, Debug)]
pub struct VandermondeData {
    pub matrix: Vec<Vec<C>>,
    pub inverse: Vec<Vec<C>>,
    pub norm_inf: f64,
    pub norm_inv_inf: f64,
    pub rho: f64,
    pub big_l: f64,
    /// C_Theta = (1/2) ||Theta^{-1}||_inf.
    pub c_theta: f64,
    pub identity_residual: f64,
}

pub fn vandermonde_constants(es: &EigenSystem) -> Result<VandermondeData> {
    vandermonde_from_values(&es.values, es.theta)
}

/// Builds the constants from raw eigenvalues; exposed for closed-form tests.
pub fn vandermonde_from_values(values: &[C], theta1: f64) -> Result<VandermondeData> {
    let m = values.len();
    let matrix: Vec<Vec<C>> = (0..m)
        .map(|i| values.iter().map(|z| z.powu(i as u32)).collect())
        .collect();
    let inverse = mat_inverse(&matrix).ok_or(Error::SingularVandermonde { cond: f64::INFINITY })?;
    let norm_inf = op_norm_inf(&matrix);
    let norm_inv_inf = op_norm_inf(&inverse);
    let cond = norm_inf * norm_inv_inf;
    if cond > 1e12 {
        return Err(Error::SingularVandermonde { cond });
    }
    let prod = mat_mul(&matrix, &inverse);
    let mut id_res = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let target = if i == j { 1.0 } else { 0.0 };
            id_res = id_res.max((prod[i][j] - target).norm());
        }
    }
    let h = theta1 * norm_inf * norm_inv_inf;
    Ok(VandermondeData {
        matrix,
        inverse,
        norm_inf,
        norm_inv_inf,
        rho: 0.5 / (1.0 + h),
        big_l: 2.0 + h,
        c_theta: 0.5 * norm_inv_inf,
        identity_residual: id_res,
    })
}

// ---------------------------------------------------------------------------
// Parametrization of roof vectors
// ---------------------------------------------------------------------------

/// Coefficients of `|zeta^n(v)|_s = sum_j b_j theta_j^n` and their
/// normalization a_j = b_j / b_1 (so a_1 = 1).
#[derive(Clone, Debug)]
pub struct ParamPoint {
    pub b: Vec<C>,
    pub a: Vec<C>,
    pub b1: f64,
}

pub const DUAL_TOL: f64 = 1e-10;

pub fn param_point(
    subst: &Substitution,
    v: &ReturnWord,
    s: &[f64],
    es: &EigenSystem,
) -> Result<ParamPoint> {
    let m = es.m;
    let pop = population_vector(&v.v, m).to_f64();
    let mut b: Vec<C> = Vec::with_capacity(m);
    for j in 0..m {
        let dual_pairing = dot_bilinear_real(&es.duals[j], &pop);
        if dual_pairing.norm() < DUAL_TOL {
            return Err(Error::DegenerateDual {
                j: j + 1,
                value: dual_pairing.norm(),
            });
        }
        let roof_pairing = dot_bilinear_real(&es.vectors[j], s);
        b.push(roof_pairing * dual_pairing);
    }
    // Exact conjugate symmetry.
    for j in 0..m {
        if es.values[j].im > 0.0 {
            if let Some(p) = (0..m).find(|&k| (es.values[k] - es.values[j].conj()).norm() == 0.0) {
                b[p] = b[j].conj();
            }
        } else if es.values[j].im == 0.0 {
            b[j].im = 0.0;
        }
    }
    if b[0].re <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "b_1 = {} is not positive",
            b[0].re
        )));
    }
    let b1 = b[0].re;
    let mut a: Vec<C> = b.iter().map(|z| z / b1).collect();
    a[0] = C::new(1.0, 0.0);

    // Verify sum_j b_j theta_j^n against the exact tiling length for n <= 10.
    let smat = subst.matrix();
    let pop0 = population_vector(&v.v, m);
    for n in 0..=10u32 {
        let counts = mat_pow_vec_big(&smat, pop0.counts(), n);
        let exact: f64 = counts
            .iter()
            .zip(s)
            .map(|(c, &sj)| c.to_f64().unwrap_or(f64::INFINITY) * sj)
            .sum();
        let model: C = b
            .iter()
            .zip(&es.values)
            .map(|(bj, th)| bj * th.powu(n))
            .sum();
        if (model.re - exact).abs() > 1e-8 * exact.abs().max(1.0) || model.im.abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "parametrization check failed at n = {n}: model {model}, exact {exact}"
            )));
        }
    }
    Ok(ParamPoint { b, a, b1 })
}

impl ParamPoint {
    /// Real scales g_n = sum_j a_j theta_j^n for n = 1..=n_max; the trace
    /// x_n equals omega g_n.
    pub fn trace_scales(&self, es: &EigenSystem, n_max: usize) -> Vec<f64> {
        (1..=n_max)
            .map(|n| {
                let z: C = self
                    .a
                    .iter()
                    .zip(&es.values)
                    .map(|(aj, th)| aj * th.powu(n as u32))
                    .sum();
                z.re
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::Substitution;
    use num_bigint::BigInt;

    fn zeta_star() -> Substitution {
        Substitution::parse("a->abbb; b->a").unwrap()
    }

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn char_poly_examples() {
        let (cp, irr) = char_poly_analysis(&[vec![1, 1], vec![3, 0]]);
        assert_eq!(cp.coeffs, vec![big(-3), big(-1), big(1)]);
        assert_eq!(cp.recurrence, vec![3, 1]);
        assert_eq!(irr, Irreducibility::Irreducible);
        assert_eq!(cp.to_string_pretty(), "x^2 - x - 3");

        let (cp, irr) = char_poly_analysis(&[vec![1, 1], vec![1, 1]]);
        assert_eq!(cp.coeffs, vec![big(0), big(-2), big(1)]);
        assert_eq!(irr, Irreducibility::Reducible);

        let (cp, irr) = char_poly_analysis(&[vec![1, 0], vec![0, 1]]);
        assert_eq!(cp.coeffs, vec![big(1), big(-2), big(1)]); // (x-1)^2
        assert_eq!(irr, Irreducibility::Reducible);
    }

    // Test-only oracle: naive cofactor expansion of det(xI - S) with
    // polynomial entries, for m <= 4.
    fn char_poly_cofactor(s: &[Vec<u64>]) -> Vec<BigInt> {
        fn det(mat: &[Vec<Vec<BigInt>>]) -> Vec<BigInt> {
            let n = mat.len();
            if n == 1 {
                return mat[0][0].clone();
            }
            let mut acc = vec![BigInt::zero()];
            for col in 0..n {
                let minor: Vec<Vec<Vec<BigInt>>> = (1..n)
                    .map(|r| {
                        (0..n)
                            .filter(|&c| c != col)
                            .map(|c| mat[r][c].clone())
                            .collect()
                    })
                    .collect();
                let sub = det(&minor);
                let mut term = poly_mul(&mat[0][col], &sub);
                if col % 2 == 1 {
                    term.iter_mut().for_each(|c| *c = -c.clone());
                }
                acc = poly_add(&acc, &term);
            }
            acc
        }
        fn poly_add(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
            let n = a.len().max(b.len());
            (0..n)
                .map(|i| {
                    let x = a.get(i).cloned().unwrap_or_else(BigInt::zero);
                    let y = b.get(i).cloned().unwrap_or_else(BigInt::zero);
                    x + y
                })
                .collect()
        }
        fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
            let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        }
        let n = s.len();
        let mat: Vec<Vec<Vec<BigInt>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            vec![-BigInt::from(s[i][j]), BigInt::from(1)]
                        } else {
                            vec![-BigInt::from(s[i][j]), BigInt::zero()]
                        }
                    })
                    .collect()
            })
            .collect();
        det(&mat)
    }

    #[test]
    fn char_poly_matches_cofactor_oracle() {
        let fixtures: Vec<Vec<Vec<u64>>> = vec![
            vec![vec![1, 1], vec![3, 0]],
            vec![vec![1, 1], vec![1, 0]],
            vec![vec![2, 1, 0], vec![1, 1, 1], vec![0, 3, 1]],
            vec![
                vec![1, 0, 2, 1],
                vec![0, 1, 1, 0],
                vec![2, 1, 0, 1],
                vec![1, 1, 1, 1],
            ],
        ];
        for s in fixtures {
            let (cp, _) = char_poly_analysis(&s);
            assert_eq!(cp.coeffs, char_poly_cofactor(&s));
        }
    }

    #[test]
    fn irreducibility_kronecker_cases() {
        // x^4 + 1: irreducible over Q although reducible mod every prime.
        assert!(is_irreducible(&[big(1), big(0), big(0), big(0), big(1)]));
        // x^4 + 3x^2 + 2 = (x^2+1)(x^2+2): no rational roots, quadratic split.
        assert!(!is_irreducible(&[big(2), big(0), big(3), big(0), big(1)]));
        // x^4 + x + 1 is irreducible.
        assert!(is_irreducible(&[big(1), big(1), big(0), big(0), big(1)]));
        // (x^2+x+1)^2 = x^4 + 2x^3 + 3x^2 + 2x + 1.
        assert!(!is_irreducible(&[big(1), big(2), big(3), big(2), big(1)]));
    }

    #[test]
    fn eigen_zeta_star_against_quadratic_formula() {
        let es = eigen_system(&[vec![1, 1], vec![3, 0]], DEFAULT_EIGEN_TOL).unwrap();
        let r13 = 13f64.sqrt();
        let t1 = (1.0 + r13) / 2.0;
        let t2 = (1.0 - r13) / 2.0;
        assert!((es.values[0].re - t1).abs() < 1e-10);
        assert!(es.values[0].im == 0.0);
        assert!((es.values[1].re - t2).abs() < 1e-10);
        assert!((es.theta - t1).abs() < 1e-12);
        assert!((es.beta - t2.abs().ln() / t1.ln()).abs() < 1e-10);
        assert_eq!(es.q, 0);
        assert_eq!(es.nu_plus_1, 1);
        assert!(es.second_eigenvalue_expanding());
    }

    #[test]
    fn eigen_fibonacci_contracting_second() {
        let es = eigen_system(&[vec![1, 1], vec![1, 0]], DEFAULT_EIGEN_TOL).unwrap();
        let phi_conj = (1.0 - 5f64.sqrt()) / 2.0;
        assert!((es.values[1].re - phi_conj).abs() < 1e-10);
        assert_eq!(es.q, 1);
        assert!(!es.second_eigenvalue_expanding());
    }

    #[test]
    fn degree_above_eight_reports_unknown() {
        // 9x9 permutation-like matrix: irreducibility is refused, not guessed.
        let mut s = vec![vec![0u64; 9]; 9];
        for i in 0..9 {
            s[i][(i + 1) % 9] = 1;
            s[i][i] = 1;
        }
        let (cp, irr) = char_poly_analysis(&s);
        assert_eq!(cp.degree(), 9);
        assert_eq!(irr, Irreducibility::Unknown);
    }

    #[test]
    fn repeated_roots_rejected() {
        match eigen_system(&[vec![1, 0], vec![0, 1]], DEFAULT_EIGEN_TOL) {
            Err(Error::RepeatedRoots { .. }) => {}
            other => panic!("expected RepeatedRoots, got {other:?}"),
        }
    }

    #[test]
    fn eigen_sorting_on_diagonal_matrix() {
        let es = eigen_system(&[vec![2, 0], vec![0, 3]], DEFAULT_EIGEN_TOL).unwrap();
        assert!((es.values[0].re - 3.0).abs() < 1e-12);
        assert!((es.values[1].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_biorthogonality_and_reconstruction() {
        let fixtures: Vec<Vec<Vec<u64>>> = vec![
            vec![vec![1, 1], vec![3, 0]],
            vec![vec![1, 1], vec![1, 0]],
            // Tribonacci-like: complex conjugate pair present.
            vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]],
        ];
        for s in fixtures {
            let m = s.len();
            let es = eigen_system(&s, DEFAULT_EIGEN_TOL).unwrap();
            assert!(es.biorth_residual < 1e-10, "biorth {}", es.biorth_residual);
            // S = sum_j theta_j e_j (e*_j)^T, relative Frobenius error < 1e-9.
            let mut frob = 0.0f64;
            let mut base = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    let mut z = C::new(0.0, 0.0);
                    for k in 0..m {
                        z += es.values[k] * es.vectors[k][i] * es.duals[k][j];
                    }
                    frob += (z - C::new(s[i][j] as f64, 0.0)).norm_sqr();
                    base += (s[i][j] as f64).powi(2);
                }
            }
            assert!((frob / base).sqrt() < 1e-9);
            // Conjugate symmetry wherever eigenvalues pair up.
            for j in 0..m {
                if es.values[j].im > 0.0 {
                    let p = (0..m)
                        .find(|&k| (es.values[k] - es.values[j].conj()).norm() == 0.0)
                        .unwrap();
                    for i in 0..m {
                        assert_eq!(es.vectors[p][i], es.vectors[j][i].conj());
                        assert_eq!(es.duals[p][i], es.duals[j][i].conj());
                    }
                }
            }
        }
    }

    #[test]
    fn beta_matches_high_precision_oracle() {
        // 2x2 fixtures via the quadratic formula; 3x3 via bisection on the
        // exact characteristic polynomial.
        let es = eigen_system(&[vec![1, 1], vec![3, 0]], DEFAULT_EIGEN_TOL).unwrap();
        let r13 = 13f64.sqrt();
        let expect = (((r13 - 1.0) / 2.0).ln()) / (((1.0 + r13) / 2.0).ln());
        assert!((es.beta - expect).abs() < 1e-8);

        let s3 = vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]];
        let es3 = eigen_system(&s3, DEFAULT_EIGEN_TOL).unwrap();
        let (cp, _) = char_poly_analysis(&s3);
        let cf = cp.coeffs_f64();
        let eval = |x: f64| cf.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        // Complex pair modulus from |theta_2|^2 * theta = |det| = 1.
        let t2 = (1.0 / theta).sqrt();
        assert!((es3.theta - theta).abs() < 1e-10);
        assert!((es3.beta - t2.ln() / theta.ln()).abs() < 1e-8);
    }

    #[test]
    fn vandermonde_zeta_star_closed_form() {
        let es = eigen_system(&[vec![1, 1], vec![3, 0]], DEFAULT_EIGEN_TOL).unwrap();
        let vd = vandermonde_constants(&es).unwrap();
        let r13 = 13f64.sqrt();
        let t1 = (1.0 + r13) / 2.0;
        // ||Theta||_inf = theta_1 + |theta_2| = sqrt(13).
        assert!((vd.norm_inf - r13).abs() < 1e-10);
        // Closed-form 2x2 inverse: ||Theta^{-1}||_inf = (theta_1 + 1)/sqrt(13).
        assert!((vd.norm_inv_inf - (t1 + 1.0) / r13).abs() < 1e-10);
        let h = t1 * r13 * ((t1 + 1.0) / r13);
        assert!((vd.rho - 0.5 / (1.0 + h)).abs() < 1e-12);
        assert!((vd.big_l - (2.0 + h)).abs() < 1e-12);
        // Spec-level rounded values.
        assert!((vd.rho - 0.0581).abs() < 1e-4);
        assert!((vd.big_l - 9.6056).abs() < 1e-4);
        assert!(vd.identity_residual < 1e-10);
        assert!(vd.rho > 0.0 && vd.rho < 0.5);
        assert!(vd.big_l > 2.0);
    }

    #[test]
    fn vandermonde_hypothetical_pair() {
        let vals = vec![C::new(1.0, 0.0), C::new(-1.0, 0.0)];
        let vd = vandermonde_from_values(&vals, 1.0).unwrap();
        assert!((vd.norm_inf - 2.0).abs() < 1e-12);
        assert!((vd.norm_inv_inf - 1.0).abs() < 1e-12);
        assert!((vd.rho - 1.0 / 6.0).abs() < 1e-12);
        assert!((vd.big_l - 4.0).abs() < 1e-12);
    }

    #[test]
    fn param_point_zeta_star() {
        let z = zeta_star();
        let es = eigen_system(&z.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        let v = z.find_return_word(4).unwrap();
        let s = [0.5, 0.5];
        let p = param_point(&z, &v, &s, &es).unwrap();
        assert_eq!(p.a[0], C::new(1.0, 0.0));
        // n = 0: sum b_j = |v|_s = 0.5.
        let sum_b: C = p.b.iter().sum();
        assert!((sum_b.re - 0.5).abs() < 1e-10 && sum_b.im.abs() < 1e-12);
        // n = 3: sum b_j theta_j^3 = <l(zeta^3(a)), s> = (7 + 12)/2 = 9.5.
        let s3: C = p
            .b
            .iter()
            .zip(&es.values)
            .map(|(b, th)| b * th.powu(3))
            .sum();
        assert!((s3.re - 9.5).abs() < 1e-8);
    }
}
