//! Channel codec between dual-view pairs and the three-plane training
//! representation: red = CC, green = MLO, blue = |CC − MLO|.

use crate::error::{Error, Result};
use crate::image::{abs_diff, EncodedTriple, GrayImage};
use alloc::string::String;
use alloc::vec::Vec;

/// Which breast a pair came from. Left pairs are mirrored during
/// preprocessing and relabeled `RightOriented`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Laterality {
    Left,
    Right,
    RightOriented,
}

impl Laterality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Laterality::Left => "left",
            Laterality::Right => "right",
            Laterality::RightOriented => "right-oriented",
        }
    }

    pub fn parse(s: &str) -> Option<Laterality> {
        match s {
            "left" => Some(Laterality::Left),
            "right" => Some(Laterality::Right),
            "right-oriented" => Some(Laterality::RightOriented),
            _ => None,
        }
    }
}

/// CC and MLO views of one breast plus identity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DualViewPair {
    pub cc: GrayImage,
    pub mlo: GrayImage,
    pub laterality: Laterality,
    pub subject_id: String,
}

impl DualViewPair {
    pub fn new(
        cc: GrayImage,
        mlo: GrayImage,
        laterality: Laterality,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if cc.dims() != mlo.dims() {
            return Err(Error::ShapeMismatch {
                expected: cc.dims(),
                got: mlo.dims(),
            });
        }
        Ok(DualViewPair {
            cc,
            mlo,
            laterality,
            subject_id: subject_id.into(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.cc.dims()
    }
}

/// Pack a pair into the three-channel representation.
/// The blue plane is recomputed, so `B == |R − G|` holds exactly.
pub fn encode(pair: &DualViewPair) -> Result<EncodedTriple> {
    let diff = abs_diff(&pair.cc, &pair.mlo)?;
    EncodedTriple::from_planes(pair.cc.clone(), pair.mlo.clone(), diff)
}

/// Unpack a generated triple into views.
///
/// CC and MLO are the red and green planes clipped to [0, 1]. The blue
/// plane is returned separately as diagnostic data and is never used to
/// reconstruct the views; generated triples need not satisfy the
/// difference invariant.
pub fn decode(triple: &EncodedTriple, subject_id: impl Into<String>) -> (DualViewPair, GrayImage) {
    let clip = |v: f64| v.clamp(0.0, 1.0);
    let cc = triple.plane_image(0).map(clip);
    let mlo = triple.plane_image(1).map(clip);
    let diff = triple.plane_image(2);
    let pair = DualViewPair {
        cc,
        mlo,
        laterality: Laterality::RightOriented,
        subject_id: subject_id.into(),
    };
    (pair, diff)
}

/// Mean over pixels of `| B − |R − G| |`: how far a triple is from the
/// encoding constraint. Zero for every `encode` output.
pub fn consistency_residual(triple: &EncodedTriple) -> f64 {
    let (r, g, b) = (triple.plane(0), triple.plane(1), triple.plane(2));
    let n = r.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += (b[i] - (r[i] - g[i]).abs()).abs();
    }
    acc / n as f64
}

/// Flatten pairs into encoded triples, preserving order.
pub fn encode_all(pairs: &[DualViewPair]) -> Result<Vec<EncodedTriple>> {
    pairs.iter().map(encode).collect()
}
