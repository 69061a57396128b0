//! Butterworth band-pass design as second-order sections and zero-phase
//! filtering.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (Complex64::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1])
    }

    /// Internal state that makes the section output constant for a unit step.
    fn step_state(&self) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        [gain - self.b[0], self.b[2] - self.a[1] * gain]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex response at `freq_hz` for sample rate `fs`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Per-section steady-state for a unit step, chained through the cascade.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state().map(|v| v * scale);
                scale *= (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
                st
            })
            .collect()
    }

    /// Single forward pass (transposed direct form II) starting from `state`.
    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z[0];
                z[0] = s.b[1] * input - s.a[0] * y + z[1];
                z[1] = s.b[2] * input - s.a[1] * y;
                *v = y;
            }
        }
    }

    /// Edge padding used by [`filtfilt`](Self::filtfilt).
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Forward-backward filtering with odd-reflection padding and step-state
    /// initial conditions. Output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_states();
        let scaled = |v: f64| zi.iter().map(|s| s.map(|z| z * v)).collect::<Vec<_>>();
        let init = scaled(ext[0]);
        self.run(&mut ext, init);
        ext.reverse();
        let init = scaled(ext[0]);
        self.run(&mut ext, init);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Butterworth band-pass from an analog prototype of order `order`, mapped
/// by the pre-warped bilinear transform. Yields `order` sections with unit
/// gain at the geometric band center.
pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> SosFilter {
    assert!(order >= 1);
    let fs2 = 2.0 * fs;
    let wl = fs2 * (PI * low_hz / fs).tan();
    let wh = fs2 * (PI * high_hz / fs).tan();
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    // Prototype poles -exp(i*pi*m/(2N)), m = -N+1, -N+3, ..., N-1.
    let mut analog = Vec::with_capacity(2 * order);
    for k in 0..order {
        let m = -(order as f64) + 1.0 + 2.0 * k as f64;
        let p = -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64));
        let half = p * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        analog.push(half + root);
        analog.push(half - root);
    }
    let digital: Vec<Complex64> = analog.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();

    let mut sections = Vec::with_capacity(order);
    let mut reals: Vec<f64> = Vec::new();
    for p in &digital {
        if p.im > 1e-12 {
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [-2.0 * p.re, p.norm_sqr()] });
        } else if p.im.abs() <= 1e-12 {
            reals.push(p.re);
        }
    }
    reals.sort_by(f64::total_cmp);
    for pair in reals.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [-(r1 + r2), r1 * r2] });
    }

    let mut filter = SosFilter { sections };
    let center = 2.0 * (w0 / fs2).atan() * fs / (2.0 * PI);
    let gain = filter.response(center, fs).norm();
    let g = gain.powf(-1.0 / filter.sections.len() as f64);
    for s in &mut filter.sections {
        s.b = s.b.map(|v| v * g);
    }
    filter
}
