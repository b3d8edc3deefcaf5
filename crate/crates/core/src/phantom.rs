//! Procedural dual-view phantoms: correlated CC/MLO silhouette pairs
//! that stand in for clinical data so the whole pipeline runs at desk
//! scale.
//!
//! Each pair is a half-ellipse "breast" anchored to the left image edge,
//! warped by a low-order sinusoidal boundary deformation. The CC view
//! gets one deformation draw; the MLO view gets a correlated draw
//! (mixing weight `shape_correlation`) plus an optional bright wedge in
//! the upper-left corner standing in for the pectoral muscle. A smooth
//! multiplicative texture fills the interior; the background is exactly
//! zero, which keeps Otsu segmentation well posed.

use crate::codec::{encode, DualViewPair, Laterality};
use crate::error::{Error, Result};
use crate::image::{EncodedTriple, GrayImage};
use crate::rng::Rng;
use alloc::format;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    /// Square image side in pixels.
    pub size: usize,
    pub n_pairs: usize,
    pub seed: u64,
    /// 1.0 → CC and MLO silhouettes identical; 0.0 → independent.
    pub shape_correlation: f64,
    /// Spatial frequency of the interior texture.
    pub texture_scale: f64,
    /// Texture strength; 0 disables texture entirely.
    pub texture_amplitude: f64,
    /// Add the pectoral-like wedge to the MLO view.
    pub pectoral_wedge: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 64,
            n_pairs: 16,
            seed: 0,
            shape_correlation: 0.8,
            texture_scale: 2.0,
            texture_amplitude: 0.25,
            pectoral_wedge: true,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(Error::InvalidArgument("phantom size must be at least 16"));
        }
        if !(0.0..=1.0).contains(&self.shape_correlation) {
            return Err(Error::InvalidArgument(
                "shape_correlation must lie in [0, 1]",
            ));
        }
        if !(0.0..1.0).contains(&self.texture_amplitude) {
            return Err(Error::InvalidArgument(
                "texture_amplitude must lie in [0, 1)",
            ));
        }
        if self.texture_scale <= 0.0 {
            return Err(Error::InvalidArgument("texture_scale must be positive"));
        }
        Ok(())
    }
}

/// Boundary deformation: radius multiplier over the polar angle.
struct Deformation {
    coeffs: [f64; 3],
    phases: [f64; 3],
}

impl Deformation {
    fn radius(&self, theta: f64) -> f64 {
        let mut g = 1.0;
        for (k, (&c, &p)) in self.coeffs.iter().zip(&self.phases).enumerate() {
            // amplitudes decay with order so the outline stays star-shaped
            g += c * 0.10 / (k + 1) as f64 * libm::sin((k + 1) as f64 * theta + p);
        }
        g
    }
}

struct ViewParams {
    center_y: f64,
    semi_x: f64,
    semi_y: f64,
    deform: Deformation,
    tex_phase_x: f64,
    tex_phase_y: f64,
    wedge: Option<(f64, f64)>, // (width, height) in pixels
}

fn render(size: usize, base_level: f64, cfg: &PhantomConfig, vp: &ViewParams) -> GrayImage {
    let s = size as f64;
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        let y = r as f64 + 0.5;
        for c in 0..size {
            let x = c as f64 + 0.5;
            let xn = x / vp.semi_x;
            let yn = (y - vp.center_y) / vp.semi_y;
            let rad = libm::sqrt(xn * xn + yn * yn);
            let theta = libm::atan2(yn, xn);
            let mut v = 0.0;
            if rad <= vp.deform.radius(theta) {
                let tex = 1.0
                    + cfg.texture_amplitude
                        * libm::sin(
                            2.0 * core::f64::consts::PI * cfg.texture_scale * x / s
                                + vp.tex_phase_x,
                        )
                        * libm::cos(
                            2.0 * core::f64::consts::PI * cfg.texture_scale * y / s
                                + vp.tex_phase_y,
                        );
                v = (base_level * tex).clamp(0.05, 1.0);
            }
            if let Some((ww, wh)) = vp.wedge {
                if y < wh && x < ww * (1.0 - y / wh) {
                    v = v.max(0.85);
                }
            }
            pixels.push(v);
        }
    }
    GrayImage::new(size, size, pixels).expect("exact length")
}

/// Generate `n_pairs` correlated dual-view pairs, deterministically in
/// the seed. Every pair is labeled right-oriented.
pub fn generate(cfg: &PhantomConfig) -> Result<Vec<DualViewPair>> {
    cfg.validate()?;
    let s = cfg.size as f64;
    let rho = cfg.shape_correlation;
    let indep = libm::sqrt(1.0 - rho * rho);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    for i in 0..cfg.n_pairs {
        let mut rng = Rng::stream(cfg.seed, i as u64);
        let sym = |rng: &mut Rng| 2.0 * rng.next_f64() - 1.0;

        // pair-shared geometry
        let center_y = s * (0.5 + 0.06 * sym(&mut rng));
        let semi_x = s * (0.60 + 0.18 * rng.next_f64());
        let semi_y = s * (0.34 + 0.10 * rng.next_f64());
        let base_level = 0.50 + 0.15 * rng.next_f64();
        let phases = [sym(&mut rng) * 3.0, sym(&mut rng) * 3.0, sym(&mut rng) * 3.0];
        let tex_phase_x = sym(&mut rng) * 3.0;
        let tex_phase_y = sym(&mut rng) * 3.0;

        // CC deformation and its correlated MLO counterpart
        let z_cc = [sym(&mut rng), sym(&mut rng), sym(&mut rng)];
        let z_ind = [sym(&mut rng), sym(&mut rng), sym(&mut rng)];
        let z_mlo = [
            rho * z_cc[0] + indep * z_ind[0],
            rho * z_cc[1] + indep * z_ind[1],
            rho * z_cc[2] + indep * z_ind[2],
        ];
        // view-specific axis jitter, zero at full correlation
        let axis_jx = 1.0 + 0.10 * indep * sym(&mut rng);
        let axis_jy = 1.0 + 0.10 * indep * sym(&mut rng);
        let wedge = if cfg.pectoral_wedge {
            Some((
                s * (0.20 + 0.08 * rng.next_f64()),
                s * (0.38 + 0.10 * rng.next_f64()),
            ))
        } else {
            None
        };

        let cc_params = ViewParams {
            center_y,
            semi_x,
            semi_y,
            deform: Deformation {
                coeffs: z_cc,
                phases,
            },
            tex_phase_x,
            tex_phase_y,
            wedge: None,
        };
        let mlo_params = ViewParams {
            center_y,
            semi_x: semi_x * axis_jx,
            semi_y: semi_y * axis_jy,
            deform: Deformation {
                coeffs: z_mlo,
                phases,
            },
            tex_phase_x,
            tex_phase_y,
            wedge,
        };

        let cc = render(cfg.size, base_level, cfg, &cc_params);
        let mlo = render(cfg.size, base_level, cfg, &mlo_params);
        pairs.push(DualViewPair::new(
            cc,
            mlo,
            Laterality::RightOriented,
            format!("phantom-{i:04}"),
        )?);
    }
    Ok(pairs)
}

/// `generate` composed with the channel codec.
pub fn generate_encoded(cfg: &PhantomConfig) -> Result<Vec<EncodedTriple>> {
    generate(cfg)?.iter().map(encode).collect()
}
