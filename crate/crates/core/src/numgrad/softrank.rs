//! All-pairs kernels behind [`Var::soft_rank`](super::Var::soft_rank).
//!
//! When every pairwise difference is small (the normal case for unit-norm
//! scores) `erf` and the normal density are truncated Taylor polynomials
//! `p(d) = sum_m a_m d^m`. Then
//!
//! ```text
//! sum_k p(u_i - u_k) = sum_r u_i^r * sum_{m>=r} a_m C(m,r) (-1)^(m-r) M_(m-r),
//! M_s = sum_k u_k^s,
//! ```
//!
//! so a row sum costs O(degree) after O(n * degree) power sums. The inputs
//! are centered first (`|u| <= 0.177`), which keeps every expanded term far
//! below 1 and the rounding error near machine epsilon. Wider inputs fall
//! back to visiting each unordered pair once.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::erf::{erf, normal_pdf, TWO_OVER_SQRT_PI};

/// Largest `|x_i - x_k| / sqrt 2` served by the polynomial kernels.
const SMALL_SPAN: f64 = 0.25;
const LANES: usize = 4;

const ERF_TERMS: usize = 10;
const EXP_TERMS: usize = 11;

/// `(-1)^n / (n! (2n+1))`: erf Maclaurin coefficients without `2/sqrt(pi)`.
/// Truncation error at `|y| = 0.25` is below 1e-18.
const ERF_POLY: [f64; ERF_TERMS] = {
    let mut c = [0.0; ERF_TERMS];
    let mut fact = 1.0;
    let mut n = 0;
    while n < ERF_TERMS {
        if n > 0 {
            fact *= n as f64;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        c[n] = sign / (fact * (2 * n + 1) as f64);
        n += 1;
    }
    c
};

/// `(-1)^m / m!`: `exp(-t)` for `0 <= t <= 0.0625`, error below 1e-18.
const EXP_POLY: [f64; EXP_TERMS] = {
    let mut c = [0.0; EXP_TERMS];
    let mut fact = 1.0;
    let mut m = 0;
    while m < EXP_TERMS {
        if m > 0 {
            fact *= m as f64;
        }
        c[m] = if m % 2 == 0 { 1.0 } else { -1.0 } / fact;
        m += 1;
    }
    c
};

/// Polynomial coefficients in `d` of `erf(d)` (odd powers up to 19).
fn erf_coefficients() -> Vec<f64> {
    let mut a = vec![0.0; 2 * ERF_TERMS];
    for (n, c) in ERF_POLY.iter().enumerate() {
        a[2 * n + 1] = TWO_OVER_SQRT_PI * c;
    }
    a
}

/// Polynomial coefficients in `d` of the standard normal density
/// (even powers up to 20).
fn pdf_coefficients() -> Vec<f64> {
    let inv = 1.0 / (2.0 * PI).sqrt();
    let mut a = vec![0.0; 2 * EXP_TERMS - 1];
    let mut half_pow = 1.0;
    for (m, c) in EXP_POLY.iter().enumerate() {
        a[2 * m] = inv * c * half_pow;
        half_pow *= 0.5;
    }
    a
}

/// `sum_k w_k u_k^s` for `s < len`.
fn power_sums(u: &[f64], w: Option<&[f64]>, len: usize) -> Vec<f64> {
    let mut sums = vec![0.0; len];
    for (k, &uk) in u.iter().enumerate() {
        let mut pow = w.map_or(1.0, |w| w[k]);
        for s in sums.iter_mut() {
            *s += pow;
            pow *= uk;
        }
    }
    sums
}

/// Coefficients `b_r` with `sum_k w_k p(x - u_k) = sum_r b_r x^r`.
fn shifted_coefficients(a: &[f64], sums: &[f64]) -> Vec<f64> {
    let deg = a.len();
    let mut b = vec![0.0; deg];
    // binom[r] holds C(m, r) for the current m.
    let mut binom = vec![0.0; deg];
    for (m, &am) in a.iter().enumerate() {
        for r in (1..=m).rev() {
            binom[r] += binom[r - 1];
        }
        binom[0] = 1.0;
        if am == 0.0 {
            continue;
        }
        for r in 0..=m {
            let sign = if (m - r) % 2 == 0 { 1.0 } else { -1.0 };
            b[r] += am * binom[r] * sign * sums[m - r];
        }
    }
    b
}

fn horner(b: &[f64], x: f64) -> f64 {
    b.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `sum_k w_k p(u_i - u_k)` for every `i`.
fn polynomial_row_sums(a: &[f64], u: &[f64], w: Option<&[f64]>) -> Vec<f64> {
    let b = shifted_coefficients(a, &power_sums(u, w, a.len()));
    u.iter().map(|&x| horner(&b, x)).collect()
}

/// Inputs shifted to be centered on their midrange, if their spread is
/// within the polynomial range.
fn centered_if_small(x: &[f64], scale: f64) -> Option<Vec<f64>> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if (hi - lo) * FRAC_1_SQRT_2 > SMALL_SPAN {
        return None;
    }
    let mid = 0.5 * (lo + hi);
    Some(x.iter().map(|v| (v - mid) * scale).collect())
}

/// For each `i`, adds `sum_{k>i} f(i, k)` to `out[i]` and subtracts each
/// term from `out[k]`. `f` must be antisymmetric for the result to be the
/// full antisymmetric sum.
#[inline(always)]
fn antisymmetric_pairs(n: usize, out: &mut [f64], f: impl Fn(usize, usize) -> f64) {
    for i in 0..n {
        let mut lanes = [0.0; LANES];
        let mut k = i + 1;
        while k + LANES <= n {
            for l in 0..LANES {
                let v = f(i, k + l);
                lanes[l] += v;
                out[k + l] -= v;
            }
            k += LANES;
        }
        let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        while k < n {
            let v = f(i, k);
            acc += v;
            out[k] -= v;
            k += 1;
        }
        out[i] += acc;
    }
}

/// `sigma_i = (1/n) sum_k Phi(x_i - x_k)`, including `k = i`.
pub fn soft_rank_values(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    // Phi(d) = (1 + erf(d / sqrt 2)) / 2, and erf is odd.
    let e = match centered_if_small(x, FRAC_1_SQRT_2) {
        Some(y) => polynomial_row_sums(&erf_coefficients(), &y, None),
        None => {
            let mut e = vec![0.0; n];
            antisymmetric_pairs(n, &mut e, |i, k| erf((x[i] - x[k]) * FRAC_1_SQRT_2));
            e
        }
    };
    let scale = 0.5 / n as f64;
    e.iter().map(|v| 0.5 + v * scale).collect()
}

/// Vector-Jacobian product: `d_j = (1/n) sum_k phi(x_j - x_k) (g_j - g_k)`.
pub fn soft_rank_backward(x: &[f64], g: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = match centered_if_small(x, 1.0) {
        Some(u) => {
            let a = pdf_coefficients();
            let mass = polynomial_row_sums(&a, &u, None);
            let weighted = polynomial_row_sums(&a, &u, Some(g));
            (0..n).map(|j| g[j] * mass[j] - weighted[j]).collect()
        }
        None => {
            let mut d = vec![0.0; n];
            antisymmetric_pairs(n, &mut d, |i, k| normal_pdf(x[i] - x[k]) * (g[i] - g[k]));
            d
        }
    };
    let inv_n = 1.0 / n as f64;
    d.iter_mut().for_each(|v| *v *= inv_n);
    d
}
