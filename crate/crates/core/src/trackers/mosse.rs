//! MOSSE correlation filter (minimum output sum of squared error).
//!
//! The filter lives in the frequency domain as a numerator/denominator pair
//! so the running average update stays closed-form. Confidence is the
//! peak-to-sidelobe ratio of the correlation response, saturated to `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrackerError;
use crate::fft::{next_smooth, Complex, Fft2d};
use crate::geometry::BBox;
use crate::image::Frame;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MosseParams {
    pub learning_rate: f64,
    pub gaussian_sigma: f64,
    pub regularization: f64,
    pub train_perturbations: usize,
    /// Half-width of the square excluded around the peak when measuring sidelobes.
    pub psr_sidelobe_exclusion: usize,
    /// PSR mapped to confidence 1.0.
    pub psr_saturation: f64,
    /// Seed for the training perturbations.
    pub seed: u64,
}

impl Default for MosseParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.125,
            gaussian_sigma: 2.0,
            regularization: 1e-5,
            train_perturbations: 8,
            psr_sidelobe_exclusion: 5,
            psr_saturation: 20.0,
            seed: 0,
        }
    }
}

impl MosseParams {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(positive(self.learning_rate) && self.learning_rate <= 1.0) {
            return Err(TrackerError::InvalidParams("learning_rate must be in (0, 1]"));
        }
        if !positive(self.gaussian_sigma) {
            return Err(TrackerError::InvalidParams("gaussian_sigma must be positive"));
        }
        if !positive(self.regularization) {
            return Err(TrackerError::InvalidParams("regularization must be positive"));
        }
        if !positive(self.psr_saturation) {
            return Err(TrackerError::InvalidParams("psr_saturation must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MosseModel {
    plan: Fft2d,
    win_w: usize,
    win_h: usize,
    hann: Vec<f64>,
    target: Vec<Complex>,
    num: Vec<Complex>,
    den: Vec<Complex>,
    learning_rate: f64,
    regularization: f64,
    exclusion: usize,
    saturation: f64,
    /// Last peak-to-sidelobe ratio, unsaturated.
    pub last_psr: f64,
}

impl MosseModel {
    pub fn train(frame: &Frame, bbox: &BBox, params: &MosseParams) -> Result<Self, TrackerError> {
        params.validate()?;
        // search window: twice the box, rounded up to an FFT-friendly size
        let win_w = next_smooth(libm::ceil(2.0 * bbox.w) as usize);
        let win_h = next_smooth(libm::ceil(2.0 * bbox.h) as usize);
        let plan = Fft2d::new(win_w, win_h);
        let hann = hann_window(win_w, win_h);

        let (cw, ch) = ((win_w / 2) as f64, (win_h / 2) as f64);
        let two_s2 = 2.0 * params.gaussian_sigma * params.gaussian_sigma;
        let mut target: Vec<Complex> = (0..win_h)
            .flat_map(|y| (0..win_w).map(move |x| (x, y)))
            .map(|(x, y)| {
                let d2 = (x as f64 - cw) * (x as f64 - cw) + (y as f64 - ch) * (y as f64 - ch);
                Complex::new(libm::exp(-d2 / two_s2), 0.0)
            })
            .collect();
        plan.forward(&mut target);

        let mut model = Self {
            num: vec![Complex::ZERO; win_w * win_h],
            den: vec![Complex::ZERO; win_w * win_h],
            plan,
            win_w,
            win_h,
            hann,
            target,
            learning_rate: params.learning_rate,
            regularization: params.regularization,
            exclusion: params.psr_sidelobe_exclusion,
            saturation: params.psr_saturation,
            last_psr: 0.0,
        };

        let (cx, cy) = bbox.center();
        let (ox, oy) = model.origin(cx, cy);
        let mut rng = rng::stream(params.seed, &[0x6d_6f73_7365]);
        let mut samples = Vec::with_capacity(params.train_perturbations + 1);
        samples.push(model.extract(frame, ox, oy));
        for _ in 0..params.train_perturbations {
            // small random rotation and scale about the window center
            let angle = rng.random_range(-PI / 16.0..PI / 16.0);
            let scale = rng.random_range(0.9..1.1);
            samples.push(model.extract_warped(frame, ox, oy, angle, scale));
        }
        for raw in samples {
            let f = model.spectrum(raw);
            for (((n, d), t), fi) in model.num.iter_mut().zip(&mut model.den).zip(&model.target).zip(&f) {
                *n = *n + *t * fi.conj();
                *d = *d + *fi * fi.conj();
            }
        }
        Ok(model)
    }

    pub fn window_size(&self) -> (usize, usize) {
        (self.win_w, self.win_h)
    }

    /// Integer top-left of the window centered at `(cx, cy)`. Commutes with
    /// integer translations of the center.
    fn origin(&self, cx: f64, cy: f64) -> (i64, i64) {
        let ox = libm::floor(cx - (self.win_w / 2) as f64 + 0.5) as i64;
        let oy = libm::floor(cy - (self.win_h / 2) as f64 + 0.5) as i64;
        (ox, oy)
    }

    fn extract(&self, frame: &Frame, ox: i64, oy: i64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.win_w * self.win_h);
        for y in 0..self.win_h as i64 {
            for x in 0..self.win_w as i64 {
                out.push(frame.get_clamped(ox + x, oy + y) as f64);
            }
        }
        out
    }

    fn extract_warped(&self, frame: &Frame, ox: i64, oy: i64, angle: f64, scale: f64) -> Vec<f64> {
        let (cw, ch) = ((self.win_w / 2) as f64, (self.win_h / 2) as f64);
        let (s, c) = (libm::sin(angle) * scale, libm::cos(angle) * scale);
        let mut out = Vec::with_capacity(self.win_w * self.win_h);
        for y in 0..self.win_h {
            for x in 0..self.win_w {
                let (u, v) = (x as f64 - cw, y as f64 - ch);
                let sx = ox as f64 + cw + c * u - s * v;
                let sy = oy as f64 + ch + s * u + c * v;
                out.push(bilinear(frame, sx, sy));
            }
        }
        out
    }

    /// Log transform, zero mean, unit norm, cosine window, then FFT.
    fn spectrum(&self, raw: Vec<f64>) -> Vec<Complex> {
        let mut v: Vec<f64> = raw.into_iter().map(|p| libm::log(p + 1.0)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|p| *p -= mean);
        let norm = libm::sqrt(v.iter().map(|p| p * p).sum::<f64>());
        if norm > 0.0 {
            v.iter_mut().for_each(|p| *p /= norm);
        }
        let mut data: Vec<Complex> = v.iter().zip(&self.hann).map(|(p, w)| Complex::new(p * w, 0.0)).collect();
        self.plan.forward(&mut data);
        data
    }

    pub(super) fn step(&mut self, frame: &Frame, prev: &BBox) -> (BBox, f64) {
        let (cx, cy) = prev.center();
        let (ox, oy) = self.origin(cx, cy);
        let f = self.spectrum(self.extract(frame, ox, oy));
        let mut response: Vec<Complex> = f
            .iter()
            .enumerate()
            .map(|(i, fi)| {
                let filter = self.num[i] / (self.den[i] + Complex::new(self.regularization, 0.0));
                filter * *fi
            })
            .collect();
        self.plan.inverse(&mut response);
        let real: Vec<f64> = response.iter().map(|c| c.re).collect();

        let (peak_idx, _) =
            real.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if *v > best.1 { (i, *v) } else { best });
        let (px, py) = (peak_idx % self.win_w, peak_idx / self.win_w);
        let psr = self.psr(&real, px, py);
        self.last_psr = psr;

        let dx = px as f64 - (self.win_w / 2) as f64;
        let dy = py as f64 - (self.win_h / 2) as f64;
        let next = prev.translated(dx, dy);

        // online update at the new location
        let (nx, ny) = self.origin(cx + dx, cy + dy);
        let f = self.spectrum(self.extract(frame, nx, ny));
        let eta = self.learning_rate;
        for (((n, d), t), fi) in self.num.iter_mut().zip(&mut self.den).zip(&self.target).zip(&f) {
            *n = (*t * fi.conj()).scale(eta) + n.scale(1.0 - eta);
            *d = (*fi * fi.conj()).scale(eta) + d.scale(1.0 - eta);
        }

        let confidence = if psr > 0.0 { (psr / self.saturation).min(1.0) } else { 0.0 };
        (next, confidence)
    }

    fn psr(&self, response: &[f64], px: usize, py: usize) -> f64 {
        let e = self.exclusion as i64;
        let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.win_h {
            for x in 0..self.win_w {
                if (x as i64 - px as i64).abs() <= e && (y as i64 - py as i64).abs() <= e {
                    continue;
                }
                let v = response[y * self.win_w + x];
                sum += v;
                sum_sq += v * v;
                n += 1;
            }
        }
        if n < 2 {
            return 0.0;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let sd = libm::sqrt(var);
        let peak = response[py * self.win_w + px];
        if sd < 1e-12 {
            return 0.0;
        }
        (peak - mean) / sd
    }
}

fn hann_window(w: usize, h: usize) -> Vec<f64> {
    let hann = |i: usize, n: usize| {
        if n < 2 {
            1.0
        } else {
            0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / (n - 1) as f64))
        }
    };
    (0..h).flat_map(|y| (0..w).map(move |x| hann(x, w) * hann(y, h))).collect()
}

fn bilinear(frame: &Frame, x: f64, y: f64) -> f64 {
    let (x0, y0) = (libm::floor(x), libm::floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let p = |dx: i64, dy: i64| frame.get_clamped(ix + dx, iy + dy) as f64;
    let top = p(0, 0) * (1.0 - fx) + p(1, 0) * fx;
    let bottom = p(0, 1) * (1.0 - fx) + p(1, 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// False for NaN as well as for non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

#[cfg(test)]
mod tests {
    use super::super::testutil::textured_scene;
    use super::*;

    #[test]
    fn window_is_twice_box_rounded_smooth() {
        let f = textured_scene(160, 120, 40, 30, 30, 1);
        let m = MosseModel::train(&f, &BBox::new(40., 30., 30., 31.).unwrap(), &MosseParams::default()).unwrap();
        assert_eq!(m.window_size(), (60, 64));
    }

    #[test]
    fn rejects_bad_params() {
        let f = textured_scene(64, 64, 10, 10, 20, 1);
        let b = BBox::new(10., 10., 20., 20.).unwrap();
        let p = MosseParams { learning_rate: 1.5, ..Default::default() };
        assert!(MosseModel::train(&f, &b, &p).is_err());
    }

    #[test]
    fn psr_is_high_on_identical_and_low_on_flat() {
        let f = textured_scene(160, 120, 60, 40, 32, 2);
        let b = BBox::new(60., 40., 32., 32.).unwrap();
        let mut m = MosseModel::train(&f, &b, &MosseParams::default()).unwrap();
        let (_, c) = m.step(&f, &b);
        assert!(m.last_psr > 20.0, "psr {}", m.last_psr);
        assert_eq!(c, 1.0);
        let flat = Frame::filled(1, 0.1, 160, 120, 90);
        let (_, c) = m.step(&flat, &b);
        assert!(c < 0.5, "confidence on flat frame {c}");
    }
}
