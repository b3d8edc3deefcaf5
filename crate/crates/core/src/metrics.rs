//! Cross-view overlap metrics: IoU and Dice between the Otsu masks of a
//! pair's CC and MLO views.
//!
//! Convention: two empty masks score 1.0 on both metrics with a
//! degeneracy flag, so the cases stay visible in downstream reports.

use crate::codec::DualViewPair;
use crate::error::{Error, Result};
use crate::image::BinaryMask;
use crate::segmentation;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLabel {
    Real,
    Synthetic,
}

impl SourceLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceLabel::Real => "real",
            SourceLabel::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<SourceLabel> {
        match s {
            "real" => Some(SourceLabel::Real),
            "synthetic" => Some(SourceLabel::Synthetic),
            _ => None,
        }
    }
}

/// Per-pair overlap record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub subject_id: String,
    pub source: SourceLabel,
    pub iou: f64,
    pub dsc: f64,
    /// Both masks were empty; the 1.0 scores are conventional.
    pub degenerate: bool,
}

struct Overlap {
    intersection: usize,
    count_a: usize,
    count_b: usize,
}

fn overlap(a: &BinaryMask, b: &BinaryMask) -> Result<Overlap> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    let mut intersection = 0;
    let mut count_a = 0;
    let mut count_b = 0;
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        intersection += (x && y) as usize;
        count_a += x as usize;
        count_b += y as usize;
    }
    Ok(Overlap {
        intersection,
        count_a,
        count_b,
    })
}

/// |a ∩ b| / |a ∪ b|; both-empty → 1.0 by convention.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let o = overlap(a, b)?;
    let union = o.count_a + o.count_b - o.intersection;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(o.intersection as f64 / union as f64)
}

/// 2|a ∩ b| / (|a| + |b|); both-empty → 1.0 by convention.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let o = overlap(a, b)?;
    let denom = o.count_a + o.count_b;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * o.intersection as f64 / denom as f64)
}

/// Both metrics plus the both-empty flag in one pass.
pub fn iou_dsc(a: &BinaryMask, b: &BinaryMask) -> Result<(f64, f64, bool)> {
    let o = overlap(a, b)?;
    let union = o.count_a + o.count_b - o.intersection;
    if union == 0 {
        return Ok((1.0, 1.0, true));
    }
    let iou = o.intersection as f64 / union as f64;
    let dsc = 2.0 * o.intersection as f64 / (o.count_a + o.count_b) as f64;
    Ok((iou, dsc, false))
}

/// Batch evaluation outcome; per-pair failures are recorded, not fatal.
#[derive(Debug, Clone)]
pub struct EvaluationOutcome {
    pub samples: Vec<MetricSample>,
    pub failures: Vec<(String, Error)>,
}

/// Segment every pair and compute its overlap metrics. Output is sorted
/// by subject id so downstream CSV files are order-stable.
pub fn evaluate_dataset(pairs: &[DualViewPair], source: SourceLabel) -> Result<EvaluationOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("evaluate_dataset"));
    }
    let mut samples = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    for pair in pairs {
        match evaluate_pair(pair, source) {
            Ok(sample) => samples.push(sample),
            Err(e) => failures.push((pair.subject_id.clone(), e)),
        }
    }
    samples.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(EvaluationOutcome { samples, failures })
}

fn evaluate_pair(pair: &DualViewPair, source: SourceLabel) -> Result<MetricSample> {
    let (mask_cc, mask_mlo) = segmentation::mask_pair(pair)?;
    let (iou, dsc, degenerate) = iou_dsc(&mask_cc, &mask_mlo)?;
    Ok(MetricSample {
        subject_id: pair.subject_id.clone(),
        source,
        iou,
        dsc,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Laterality;
    use crate::image::GrayImage;
    use crate::rng::Rng;
    use alloc::format;
    use alloc::vec;
    use alloc::vec::Vec;

    fn mask_from(bits: Vec<bool>, w: usize, h: usize) -> BinaryMask {
        BinaryMask::new(w, h, bits).unwrap()
    }

    fn random_mask(rng: &mut Rng, w: usize, h: usize) -> BinaryMask {
        mask_from((0..w * h).map(|_| rng.next_u64().is_multiple_of(2)).collect(), w, h)
    }

    #[test]
    fn identical_and_disjoint() {
        let a = mask_from(vec![true, true, false, false], 2, 2);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(dsc(&a, &a).unwrap(), 1.0);

        let b = mask_from(vec![false, false, true, true], 2, 2);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert_eq!(dsc(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn left_half_vs_full() {
        // 4x4: a = left two columns (8 px), b = everything (16 px)
        let mut a_bits = vec![false; 16];
        for r in 0..4 {
            a_bits[r * 4] = true;
            a_bits[r * 4 + 1] = true;
        }
        let a = mask_from(a_bits, 4, 4);
        let b = mask_from(vec![true; 16], 4, 4);
        assert_eq!(iou(&a, &b).unwrap(), 8.0 / 16.0);
        assert!((dsc(&a, &b).unwrap() - 16.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn empty_convention_and_flag() {
        let e = BinaryMask::all_false(3, 3);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
        assert_eq!(iou_dsc(&e, &e).unwrap(), (1.0, 1.0, true));
    }

    #[test]
    fn dice_iou_identity_and_symmetry() {
        let mut rng = Rng::new(55);
        for _ in 0..100 {
            let a = random_mask(&mut rng, 16, 16);
            let b = random_mask(&mut rng, 16, 16);
            let (i, d, _) = iou_dsc(&a, &b).unwrap();
            assert!((d - 2.0 * i / (1.0 + i)).abs() < 1e-12);
            assert!(i <= d + 1e-15 && d <= 1.0 && i >= 0.0);
            assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
            assert_eq!(dsc(&a, &b).unwrap(), dsc(&b, &a).unwrap());
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = Rng::new(66);
        for _ in 0..100 {
            let a = random_mask(&mut rng, 16, 16);
            let b = random_mask(&mut rng, 16, 16);
            let mut inter = 0usize;
            let mut na = 0usize;
            let mut nb = 0usize;
            for r in 0..16 {
                for c in 0..16 {
                    let x = a.bits()[r * 16 + c];
                    let y = b.bits()[r * 16 + c];
                    if x && y {
                        inter += 1;
                    }
                    if x {
                        na += 1;
                    }
                    if y {
                        nb += 1;
                    }
                }
            }
            let expect_iou = inter as f64 / (na + nb - inter) as f64;
            let expect_dsc = 2.0 * inter as f64 / (na + nb) as f64;
            assert_eq!(iou(&a, &b).unwrap(), expect_iou);
            assert_eq!(dsc(&a, &b).unwrap(), expect_dsc);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = BinaryMask::all_false(2, 2);
        let b = BinaryMask::all_false(3, 2);
        assert!(matches!(iou(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn dataset_evaluation_orders_and_scores() {
        let mut bimodal = vec![0.1; 32];
        bimodal.extend(vec![0.9; 32]);
        let view = GrayImage::new(8, 8, bimodal).unwrap();
        let mut pairs = Vec::new();
        for i in (0..5).rev() {
            pairs.push(
                DualViewPair::new(
                    view.clone(),
                    view.clone(),
                    Laterality::RightOriented,
                    format!("s{i}"),
                )
                .unwrap(),
            );
        }
        let out = evaluate_dataset(&pairs, SourceLabel::Real).unwrap();
        assert_eq!(out.samples.len(), 5);
        assert!(out.failures.is_empty());
        let ids: Vec<&str> = out.samples.iter().map(|s| s.subject_id.as_str()).collect();
        assert_eq!(ids, vec!["s0", "s1", "s2", "s3", "s4"]);
        for s in &out.samples {
            assert_eq!(s.iou, 1.0);
            assert_eq!(s.dsc, 1.0);
            assert!(!s.degenerate);
        }
        assert!(evaluate_dataset(&[], SourceLabel::Real).is_err());
    }
}
