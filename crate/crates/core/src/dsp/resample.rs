//! Rational polyphase resampling with a Kaiser-windowed sinc low-pass.

use std::f64::consts::PI;

const KAISER_BETA: f64 = 5.0;
/// Filter half-length in units of `max(up, down)` input-rate periods.
const HALF_LEN_FACTOR: usize = 64;
const MAX_RATIO_TERM: u64 = 1000;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `(up, down)` with `up / down ≈ ratio`, exact for ratios of small integers.
pub fn rational_ratio(ratio: f64) -> (u64, u64) {
    // Exact path for rates that are whole milli-hertz multiples.
    let scaled = (ratio * 1e6).round();
    if (scaled - ratio * 1e6).abs() < 1e-6 {
        let (n, d) = (scaled as u64, 1_000_000u64);
        let g = gcd(n, d);
        if n / g <= MAX_RATIO_TERM && d / g <= MAX_RATIO_TERM {
            return (n / g, d / g);
        }
    }
    // Best continued-fraction approximation within the term bound.
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = ratio;
    loop {
        let a = x.floor();
        let (h2, k2) = (a as u64 * h1 + h0, a as u64 * k1 + k0);
        if h2 > MAX_RATIO_TERM || k2 > MAX_RATIO_TERM {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = x - a;
        if frac < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    (h1.max(1), k1.max(1))
}

/// Low-pass prototype at the upsampled rate, DC gain `up`.
fn design(up: usize, down: usize) -> Vec<f64> {
    let m = up.max(down);
    let half = HALF_LEN_FACTOR * m;
    let len = 2 * half + 1;
    let cutoff = 1.0 / m as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - half as f64;
            let sinc = if t == 0.0 { 1.0 } else { (PI * cutoff * t).sin() / (PI * cutoff * t) };
            let r = t / half as f64;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            cutoff * sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v *= up as f64 / sum;
    }
    h
}

/// Resamples `x` by `up / down`, compensating the filter delay. Samples
/// beyond the signal edges are taken as zero.
pub fn resample_poly(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    if up == down {
        return x.to_vec();
    }
    let h = design(up, down);
    let half = (h.len() - 1) / 2;
    let n_up = x.len() * up;
    let n_out = n_up.div_ceil(down);
    (0..n_out)
        .map(|m| {
            let t = m * down + half;
            // Tap j touches upsampled index t - j, non-zero only on multiples of up.
            let mut j = t % up;
            let first_valid = (t + 1).saturating_sub(n_up);
            if j < first_valid {
                j += (first_valid - j).div_ceil(up) * up;
            }
            let mut acc = 0.0;
            while j < h.len() && j <= t {
                acc += h[j] * x[(t - j) / up];
                j += up;
            }
            acc
        })
        .collect()
}
