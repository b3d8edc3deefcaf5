//! DDPM mathematical core: the linear variance schedule, the forward
//! noising process, the noise-prediction training loss, and ancestral
//! reverse sampling.
//!
//! Conventions: timesteps are 1-based (`t = 1..=T`); tensors are flat
//! `[C, H, W]` buffers in model space, which is the data range [0, 1]
//! mapped affinely to [−1, 1]; the reverse-process variance is
//! σ_t² = β_t with no noise added on the final step.

use crate::error::{Error, Result};
use crate::image::EncodedTriple;
use crate::rng::Rng;
use alloc::vec::Vec;

/// Per-timestep β, α = 1 − β and running product ᾱ.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// β_t interpolated linearly from `beta_start` to `beta_end`
    /// inclusive over `timesteps` steps.
    pub fn linear(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::InvalidArgument("timesteps must be at least 1"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidArgument(
                "betas must satisfy 0 < beta_start <= beta_end < 1",
            ));
        }
        let mut betas = Vec::with_capacity(timesteps);
        for t in 0..timesteps {
            let frac = if timesteps == 1 {
                0.0
            } else {
                t as f64 / (timesteps - 1) as f64
            };
            betas.push(beta_start + frac * (beta_end - beta_start));
        }
        let alphas: Vec<f64> = betas.iter().map(|&b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(timesteps);
        let mut prod = 1.0;
        for &a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    #[inline]
    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.timesteps() {
            return Err(Error::TimestepOutOfRange {
                t,
                timesteps: self.timesteps(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    #[inline]
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }
}

/// x_t = √ᾱ_t · x0 + √(1 − ᾱ_t) · ε, elementwise.
pub fn forward_noise(
    x0: &[f64],
    t: usize,
    eps: &[f64],
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    sched.check_t(t)?;
    if x0.len() != eps.len() {
        return Err(Error::LengthMismatch {
            expected: x0.len(),
            got: eps.len(),
        });
    }
    let ab = sched.alpha_bar(t);
    let signal = libm::sqrt(ab);
    let noise = libm::sqrt(1.0 - ab);
    Ok(x0
        .iter()
        .zip(eps)
        .map(|(&x, &e)| signal * x + noise * e)
        .collect())
}

/// Anything that predicts the noise ε from (x_t, t).
pub trait NoisePredictor {
    fn predict_noise(
        &self,
        x: &[f64],
        channels: usize,
        height: usize,
        width: usize,
        t: usize,
    ) -> Result<Vec<f64>>;
}

/// One reverse step:
/// x_{t−1} = (x_t − β_t/√(1 − ᾱ_t) · ε̂) / √α_t + √β_t · z,
/// with `noise = None` meaning z = 0 (used on the final step and in
/// deterministic tests).
pub fn reverse_step(
    x_t: &[f64],
    t: usize,
    eps_hat: &[f64],
    sched: &NoiseSchedule,
    noise: Option<&[f64]>,
) -> Result<Vec<f64>> {
    sched.check_t(t)?;
    if x_t.len() != eps_hat.len() {
        return Err(Error::LengthMismatch {
            expected: x_t.len(),
            got: eps_hat.len(),
        });
    }
    if let Some(z) = noise {
        if z.len() != x_t.len() {
            return Err(Error::LengthMismatch {
                expected: x_t.len(),
                got: z.len(),
            });
        }
    }
    let ab = sched.alpha_bar(t);
    let coef = sched.beta(t) / libm::sqrt(1.0 - ab);
    let inv_sqrt_alpha = 1.0 / libm::sqrt(sched.alpha(t));
    let sigma = libm::sqrt(sched.beta(t));
    let mut out = Vec::with_capacity(x_t.len());
    for i in 0..x_t.len() {
        let mut v = inv_sqrt_alpha * (x_t[i] - coef * eps_hat[i]);
        if let Some(z) = noise {
            v += sigma * z[i];
        }
        out.push(v);
    }
    Ok(out)
}

/// Draw t uniform on [1, T] and ε standard normal, then return the mean
/// squared error between ε and the model's prediction at x_t.
/// `x0` must already be in model space.
pub fn training_loss<M: NoisePredictor>(
    model: &M,
    x0: &[f64],
    channels: usize,
    height: usize,
    width: usize,
    rng: &mut Rng,
    sched: &NoiseSchedule,
) -> Result<f64> {
    if x0.len() != channels * height * width {
        return Err(Error::LengthMismatch {
            expected: channels * height * width,
            got: x0.len(),
        });
    }
    let t = 1 + rng.next_below(sched.timesteps() as u64) as usize;
    let eps = rng.normal_vec(x0.len());
    let x_t = forward_noise(x0, t, &eps, sched)?;
    let pred = model.predict_noise(&x_t, channels, height, width, t)?;
    Ok(mse(&pred, &eps))
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc / a.len() as f64
}

/// Ancestral sampling from pure noise down to t = 1, then back to data
/// range. Deterministic given the generator state; the output triple is
/// affine-mapped to [0, 1] but not clipped — clipping belongs to the
/// percentile postprocessing stage.
pub fn sample<M: NoisePredictor>(
    model: &M,
    height: usize,
    width: usize,
    sched: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<EncodedTriple> {
    let len = 3 * height * width;
    let mut x = rng.normal_vec(len);
    for t in (1..=sched.timesteps()).rev() {
        let eps_hat = model.predict_noise(&x, 3, height, width, t)?;
        let noise = if t > 1 {
            Some(rng.normal_vec(len))
        } else {
            None
        };
        x = reverse_step(&x, t, &eps_hat, sched, noise.as_deref())?;
    }
    from_model_range(&x, height, width)
}

/// [0, 1] data range → [−1, 1] model space, flattened `[3, H, W]`.
pub fn to_model_range(triple: &EncodedTriple) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * triple.width() * triple.height());
    for c in 0..3 {
        out.extend(triple.plane(c).iter().map(|&v| 2.0 * v - 1.0));
    }
    out
}

/// Inverse affine map back to the [0, 1] data range (no clipping).
pub fn from_model_range(data: &[f64], height: usize, width: usize) -> Result<EncodedTriple> {
    let plane_len = height * width;
    if data.len() != 3 * plane_len {
        return Err(Error::LengthMismatch {
            expected: 3 * plane_len,
            got: data.len(),
        });
    }
    let plane = |c: usize| -> Vec<f64> {
        data[c * plane_len..(c + 1) * plane_len]
            .iter()
            .map(|&v| (v + 1.0) / 2.0)
            .collect()
    };
    EncodedTriple::from_raw(width, height, [plane(0), plane(1), plane(2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Frozen by an independent cumulative-product run before this module
    /// was written: ᾱ_1000 for the default linear schedule.
    const ALPHA_BAR_1000: f64 = 4.0358297653756754e-5;

    struct ZeroPredictor;
    impl NoisePredictor for ZeroPredictor {
        fn predict_noise(
            &self,
            x: &[f64],
            _c: usize,
            _h: usize,
            _w: usize,
            _t: usize,
        ) -> Result<Vec<f64>> {
            Ok(vec![0.0; x.len()])
        }
    }

    /// Always answers with a fixed tensor, whatever the input.
    struct ConstPredictor(Vec<f64>);
    impl NoisePredictor for ConstPredictor {
        fn predict_noise(
            &self,
            _x: &[f64],
            _c: usize,
            _h: usize,
            _w: usize,
            _t: usize,
        ) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn schedule_single_step() {
        let s = NoiseSchedule::linear(1, 0.1, 0.1).unwrap();
        assert_eq!(s.beta(1), 0.1);
        assert_eq!(s.alpha_bar(1), 0.9);
    }

    #[test]
    fn schedule_validation() {
        assert!(NoiseSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.3, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.3, 1.0).is_err());
    }

    #[test]
    fn schedule_default_matches_frozen_product() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.beta(1), 1e-4);
        assert_eq!(s.beta(1000), 0.02);
        let got = s.alpha_bar(1000);
        assert!(
            ((got - ALPHA_BAR_1000) / ALPHA_BAR_1000).abs() < 1e-12,
            "{got}"
        );
        assert!(got < 1e-4);
    }

    #[test]
    fn alpha_bar_strictly_decreasing_and_pythagorean() {
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let t_count = 2 + (rng.next_u64() % 200) as usize;
            let bs = 1e-4 + rng.next_f64() * 0.01;
            let be = bs + rng.next_f64() * 0.3;
            let s = NoiseSchedule::linear(t_count, bs, be).unwrap();
            for t in 1..=t_count {
                assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
                if t > 1 {
                    assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
                }
                let c = libm::sqrt(s.alpha_bar(t));
                let q = libm::sqrt(1.0 - s.alpha_bar(t));
                assert!((c * c + q * q - 1.0).abs() < 1e-12);
            }
            assert!((s.alpha_bar(1) - (1.0 - s.beta(1))).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_noise_branches() {
        let s = NoiseSchedule::linear(100, 1e-4, 0.02).unwrap();
        let x0 = vec![0.5, -0.25, 1.0, 0.0];
        let zeros = vec![0.0; 4];

        // eps = 0 -> pure signal branch
        let out = forward_noise(&x0, 40, &zeros, &s).unwrap();
        let c = libm::sqrt(s.alpha_bar(40));
        for (o, x) in out.iter().zip(&x0) {
            assert!((o - c * x).abs() < 1e-15);
        }

        // x0 = 0 -> pure noise branch
        let eps = vec![1.0, -2.0, 0.5, 3.0];
        let out = forward_noise(&zeros, 40, &eps, &s).unwrap();
        let q = libm::sqrt(1.0 - s.alpha_bar(40));
        for (o, e) in out.iter().zip(&eps) {
            assert!((o - q * e).abs() < 1e-15);
        }

        assert!(forward_noise(&x0, 0, &zeros, &s).is_err());
        assert!(forward_noise(&x0, 101, &zeros, &s).is_err());
        assert!(forward_noise(&x0, 1, &zeros[..2], &s).is_err());
    }

    #[test]
    fn forward_noise_is_affine() {
        let s = NoiseSchedule::linear(50, 1e-3, 0.3).unwrap();
        let mut rng = Rng::new(6);
        let a: Vec<f64> = (0..16).map(|_| rng.next_normal()).collect();
        let b: Vec<f64> = (0..16).map(|_| rng.next_normal()).collect();
        let ea: Vec<f64> = (0..16).map(|_| rng.next_normal()).collect();
        let eb: Vec<f64> = (0..16).map(|_| rng.next_normal()).collect();
        let sum_x: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| x + y).collect();
        let sum_e: Vec<f64> = ea.iter().zip(&eb).map(|(&x, &y)| x + y).collect();

        let lhs = forward_noise(&sum_x, 25, &sum_e, &s).unwrap();
        let fa = forward_noise(&a, 25, &ea, &s).unwrap();
        let fb = forward_noise(&b, 25, &eb, &s).unwrap();
        for i in 0..16 {
            assert!((lhs[i] - (fa[i] + fb[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_noise_monte_carlo_moments() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        let t = 350;
        let x0 = [0.7];
        let mut rng = Rng::new(2024);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let eps = [rng.next_normal()];
            let v = forward_noise(&x0, t, &eps, &s).unwrap()[0];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let expect_mean = libm::sqrt(s.alpha_bar(t)) * x0[0];
        let expect_var = 1.0 - s.alpha_bar(t);
        let se_mean = libm::sqrt(expect_var / n as f64);
        let se_var = expect_var * libm::sqrt(2.0 / (n as f64 - 1.0));
        assert!(
            (mean - expect_mean).abs() < 3.0 * se_mean,
            "mean {mean} vs {expect_mean}"
        );
        assert!(
            (var - expect_var).abs() < 3.0 * se_var,
            "var {var} vs {expect_var}"
        );
    }

    #[test]
    fn single_step_inversion_recovers_x0() {
        // T = 1 and a stub predicting the exact ε used in the forward
        // pass: the reverse step is an algebraic inversion.
        let s = NoiseSchedule::linear(1, 0.02, 0.02).unwrap();
        let mut rng = Rng::new(7);
        let x0: Vec<f64> = (0..12).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let eps: Vec<f64> = (0..12).map(|_| rng.next_normal()).collect();
        let x1 = forward_noise(&x0, 1, &eps, &s).unwrap();
        let stub = ConstPredictor(eps);
        let eps_hat = stub.predict_noise(&x1, 3, 2, 2, 1).unwrap();
        let back = reverse_step(&x1, 1, &eps_hat, &s, None).unwrap();
        for (b, x) in back.iter().zip(&x0) {
            assert!((b - x).abs() < 1e-6, "{b} vs {x}");
        }
    }

    #[test]
    fn zero_stub_reverse_matches_hand_loop() {
        let s = NoiseSchedule::linear(10, 1e-3, 0.2).unwrap();
        let mut rng = Rng::new(8);
        let start: Vec<f64> = (0..6).map(|_| rng.next_normal()).collect();
        // sampling loop with sigma = 0 and eps_hat = 0
        let mut x = start.clone();
        for t in (1..=10).rev() {
            let eps_hat = vec![0.0; 6];
            x = reverse_step(&x, t, &eps_hat, &s, None).unwrap();
        }
        // hand-rolled: x / prod sqrt(alpha_t)
        let mut expect = start;
        for t in (1..=10).rev() {
            for v in expect.iter_mut() {
                *v /= libm::sqrt(s.alpha(t));
            }
        }
        for (a, b) in x.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_loss_stub_cases() {
        let s = NoiseSchedule::linear(50, 1e-3, 0.3).unwrap();
        let x0 = vec![0.0; 12];

        // zero model on zero signal: loss estimates E[eps^2] = 1
        let mut acc = 0.0;
        let runs = 400;
        for seed in 0..runs {
            let mut rng = Rng::new(seed);
            acc += training_loss(&ZeroPredictor, &x0, 3, 2, 2, &mut rng, &s).unwrap();
        }
        let mean = acc / runs as f64;
        // each run averages 12 squared normals; se of the grand mean
        let se = libm::sqrt(2.0 / (12.0 * runs as f64));
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");

        // loss is nonnegative for an arbitrary model
        let mut rng = Rng::new(1);
        let arb = ConstPredictor((0..12).map(|_| rng.next_normal()).collect());
        let l = training_loss(&arb, &x0, 3, 2, 2, &mut Rng::new(5), &s).unwrap();
        assert!(l >= 0.0);
    }

    #[test]
    fn training_loss_zero_for_exact_predictor() {
        // a stub that inverts forward_noise exactly: eps = (x_t - sqrt(ab) x0)/sqrt(1-ab)
        struct Inverter {
            x0: Vec<f64>,
            sched: NoiseSchedule,
        }
        impl NoisePredictor for Inverter {
            fn predict_noise(
                &self,
                x: &[f64],
                _c: usize,
                _h: usize,
                _w: usize,
                t: usize,
            ) -> Result<Vec<f64>> {
                let ab = self.sched.alpha_bar(t);
                Ok(x
                    .iter()
                    .zip(&self.x0)
                    .map(|(&xt, &x0)| (xt - libm::sqrt(ab) * x0) / libm::sqrt(1.0 - ab))
                    .collect())
            }
        }
        let s = NoiseSchedule::linear(20, 1e-3, 0.2).unwrap();
        let mut rng = Rng::new(3);
        let x0: Vec<f64> = (0..12).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let model = Inverter {
            x0: x0.clone(),
            sched: s.clone(),
        };
        let loss = training_loss(&model, &x0, 3, 2, 2, &mut rng, &s).unwrap();
        assert!(loss < 1e-20, "loss = {loss}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let s = NoiseSchedule::linear(5, 1e-3, 0.1).unwrap();
        let a = sample(&ZeroPredictor, 4, 4, &s, &mut Rng::new(11)).unwrap();
        let b = sample(&ZeroPredictor, 4, 4, &s, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
        let c = sample(&ZeroPredictor, 4, 4, &s, &mut Rng::new(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn model_range_round_trip() {
        let mut rng = Rng::new(14);
        let planes: [Vec<f64>; 3] = [
            (0..16).map(|_| rng.next_f64()).collect(),
            (0..16).map(|_| rng.next_f64()).collect(),
            (0..16).map(|_| rng.next_f64()).collect(),
        ];
        let t = EncodedTriple::from_raw(4, 4, planes).unwrap();
        let m = to_model_range(&t);
        assert!(m.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        let back = from_model_range(&m, 4, 4).unwrap();
        for c in 0..3 {
            for (a, b) in t.plane(c).iter().zip(back.plane(c)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
