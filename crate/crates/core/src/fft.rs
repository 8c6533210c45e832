//! Mixed-radix complex FFT for arbitrary lengths and its 2-D extension.
//!
//! Lengths are factored into primes and transformed recursively (decimation
//! in time), so cost is O(n · Σ factors). Callers pick 5-smooth sizes with
//! [`next_smooth`] to keep that close to O(n log n).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn scale(self, k: f64) -> Self {
        Self { re: self.re * k, im: self.im * k }
    }
}

impl Div for Complex {
    type Output = Self;

    #[inline]
    fn div(self, other: Complex) -> Self {
        let d = other.norm_sqr();
        Self { re: (self.re * other.re + self.im * other.im) / d, im: (self.im * other.re - self.re * other.im) / d }
    }
}

impl Add for Complex {
    type Output = Complex;
    #[inline]
    fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Complex {
    type Output = Complex;
    #[inline]
    fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for Complex {
    type Output = Complex;
    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

/// Smallest 5-smooth integer (only prime factors 2, 3, 5) that is `>= n`.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Precomputed forward transform of one length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    factors: Vec<usize>,
    /// `exp(-2πi k / len)` for `k` in `0..len`.
    twiddles: Vec<Complex>,
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "fft length must be positive");
        let twiddles = (0..len)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / len as f64;
                Complex::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Self { len, factors: prime_factors(len), twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform of `input` into `out`, both of length `len`.
    pub fn forward(&self, input: &[Complex], out: &mut [Complex]) {
        assert_eq!(input.len(), self.len);
        assert_eq!(out.len(), self.len);
        self.recurse(input, 0, 1, out, &self.factors);
    }

    /// Unnormalized inverse transform; divide by `len` to invert `forward`.
    pub fn inverse(&self, input: &[Complex], out: &mut [Complex]) {
        let conj: Vec<Complex> = input.iter().map(|c| c.conj()).collect();
        self.forward(&conj, out);
        out.iter_mut().for_each(|c| *c = c.conj());
    }

    fn recurse(&self, input: &[Complex], offset: usize, stride: usize, out: &mut [Complex], factors: &[usize]) {
        let n = out.len();
        if n == 1 {
            out[0] = input[offset];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for r in 0..p {
            self.recurse(input, offset + r * stride, stride * p, &mut out[r * m..(r + 1) * m], &factors[1..]);
        }
        // W_n^j == W_len^(j * len / n)
        let step = self.len / n;
        let mut acc = [Complex::ZERO; 8];
        let mut heap;
        let tmp: &mut [Complex] = if p <= acc.len() {
            &mut acc[..p]
        } else {
            heap = vec![Complex::ZERO; p];
            &mut heap
        };
        for k in 0..m {
            for (q, t) in tmp.iter_mut().enumerate() {
                let idx = k + q * m;
                let mut sum = Complex::ZERO;
                for r in 0..p {
                    let tw = self.twiddles[((r * idx) % n) * step];
                    sum = sum + out[r * m + k] * tw;
                }
                *t = sum;
            }
            for (q, t) in tmp.iter().enumerate() {
                out[k + q * m] = *t;
            }
        }
    }
}

/// Row-major 2-D transform built from two 1-D plans.
#[derive(Debug, Clone)]
pub struct Fft2d {
    width: usize,
    height: usize,
    rows: Fft,
    cols: Fft,
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, rows: Fft::new(width), cols: Fft::new(height) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, data: &mut [Complex]) {
        self.apply(data, false);
    }

    /// Normalized inverse: `inverse(forward(x)) == x` up to rounding.
    pub fn inverse(&self, data: &mut [Complex]) {
        self.apply(data, true);
        let k = 1.0 / (self.width * self.height) as f64;
        data.iter_mut().for_each(|c| *c = c.scale(k));
    }

    fn apply(&self, data: &mut [Complex], inverse: bool) {
        assert_eq!(data.len(), self.width * self.height);
        let (w, h) = (self.width, self.height);
        let mut line = vec![Complex::ZERO; w.max(h)];
        let mut out = vec![Complex::ZERO; w.max(h)];
        for y in 0..h {
            line[..w].copy_from_slice(&data[y * w..(y + 1) * w]);
            if inverse {
                self.rows.inverse(&line[..w], &mut out[..w]);
            } else {
                self.rows.forward(&line[..w], &mut out[..w]);
            }
            data[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
        }
        for x in 0..w {
            for y in 0..h {
                line[y] = data[y * w + x];
            }
            if inverse {
                self.cols.inverse(&line[..h], &mut out[..h]);
            } else {
                self.cols.forward(&line[..h], &mut out[..h]);
            }
            for y in 0..h {
                data[y * w + x] = out[y];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::ZERO, |acc, (j, v)| {
                    let a = -2.0 * PI * (j * k) as f64 / n as f64;
                    acc + *v * Complex::new(libm::cos(a), libm::sin(a))
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex> {
        (0..n).map(|i| Complex::new(libm::sin(i as f64 * 0.7) + i as f64 * 0.01, libm::cos(i as f64 * 1.3))).collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        for n in [1, 2, 3, 5, 7, 8, 12, 30, 45, 49, 60, 97, 100] {
            let x = signal(n);
            let mut out = vec![Complex::ZERO; n];
            Fft::new(n).forward(&x, &mut out);
            for (a, b) in out.iter().zip(naive_dft(&x)) {
                assert!((*a - b).norm_sqr() < 1e-16 * n as f64 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_2d_roundtrip() {
        let (w, h) = (12, 10);
        let x = signal(w * h);
        let mut data = x.clone();
        let plan = Fft2d::new(w, h);
        plan.forward(&mut data);
        plan.inverse(&mut data);
        for (a, b) in data.iter().zip(&x) {
            assert!((*a - *b).norm_sqr() < 1e-20);
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(7), 8);
        assert_eq!(next_smooth(31), 32);
        assert_eq!(next_smooth(61), 64);
        assert_eq!(next_smooth(81), 81);
        assert_eq!(next_smooth(91), 96);
    }
}
