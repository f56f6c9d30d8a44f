//! Box similarity and size kernels.
//!
//! Boxes live in continuous pixel coordinates as `(left, top, width, height)`.
//! Nothing here rounds to integers; sub-pixel displacements matter for the
//! center-distance based measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates. Width and height are strictly
/// positive and every field is finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite field in ({left}, {top}, {width}, {height})"
            )));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive box dimension ({width} x {height})"
            )));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    /// Box spanning `[x0, x1] x [y0, y1]`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            left: self.left + dx,
            top: self.top + dy,
            ..*self
        }
    }

    /// Scales width and height by `1 + 2 * ratio` about the center, i.e. adds
    /// `ratio` of each side on both sides.
    pub fn expanded(&self, ratio: f64) -> Self {
        if ratio == 0.0 {
            return *self;
        }
        let factor = 1.0 + 2.0 * ratio;
        let (cx, cy) = self.center();
        let width = self.width * factor;
        let height = self.height * factor;
        Self {
            left: cx - width / 2.0,
            top: cy - height / 2.0,
            width,
            height,
        }
    }

    /// The four corners, clockwise from top-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.left, self.top),
            (self.right(), self.top),
            (self.right(), self.bottom()),
            (self.left, self.bottom()),
        ]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.left, b.top, b.width, b.height]
    }
}

/// Dataset mean object size `S`: square root of the mean box area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MeanObjectSize(f64);

impl MeanObjectSize {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > 0.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidMeanSize(s))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MeanObjectSize {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<MeanObjectSize> for f64 {
    fn from(s: MeanObjectSize) -> Self {
        s.0
    }
}

/// Euclidean distance between box centers.
pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.right().min(b.right()) - a.left.max(b.left);
    let h = a.bottom().min(b.bottom()) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(1.0)
}

/// `exp(-D / S)` with `D` the center distance.
pub fn dotd(a: &BoundingBox, b: &BoundingBox, s: MeanObjectSize) -> f64 {
    (-center_distance(a, b) / s.get()).exp()
}

/// IoU minus the squared center distance over the squared diagonal of the
/// smallest enclosing box.
pub fn diou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let d2 = (ax - bx).powi(2) + (ay - by).powi(2);
    if d2 == 0.0 {
        return iou(a, b);
    }
    let cw = a.right().max(b.right()) - a.left.min(b.left);
    let ch = a.bottom().max(b.bottom()) - a.top.min(b.top);
    iou(a, b) - d2 / (cw * cw + ch * ch)
}

/// Parameters of the expanded-box similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    /// Fraction of each side added on both sides of the box.
    pub expand: f64,
    /// Weight of the `1 - exp(-D/S)` distance penalty.
    pub penalty_weight: f64,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self {
            expand: 0.5,
            penalty_weight: 0.25,
        }
    }
}

/// IoU of the center-preserving expansions of both boxes, minus a distance
/// penalty normalized by the DotD kernel.
pub fn expanded_penalty_similarity(
    a: &BoundingBox,
    b: &BoundingBox,
    params: ExpansionParams,
    s: MeanObjectSize,
) -> f64 {
    let overlap = iou(&a.expanded(params.expand), &b.expanded(params.expand));
    if params.penalty_weight == 0.0 {
        return overlap;
    }
    overlap - params.penalty_weight * (1.0 - dotd(a, b, s))
}

/// Mean object size over every labeled box in the dataset.
pub fn mean_object_size<'a, I>(boxes: I) -> Result<MeanObjectSize>
where
    I: IntoIterator<Item = &'a BoundingBox>,
{
    let (sum, n) = boxes
        .into_iter()
        .fold((0.0_f64, 0_usize), |(sum, n), b| (sum + b.area(), n + 1));
    if n == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    MeanObjectSize::new((sum / n as f64).sqrt())
}

/// Similarity kernel used for matching and association.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    Iou,
    Dotd,
    Diou,
    ExpandedPenalty(ExpansionParams),
}

impl SimilarityMeasure {
    pub fn eval(&self, a: &BoundingBox, b: &BoundingBox, s: MeanObjectSize) -> f64 {
        match self {
            Self::Iou => iou(a, b),
            Self::Dotd => dotd(a, b, s),
            Self::Diou => diou(a, b),
            Self::ExpandedPenalty(p) => expanded_penalty_similarity(a, b, *p, s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iou => "iou",
            Self::Dotd => "dotd",
            Self::Diou => "diou",
            Self::ExpandedPenalty(_) => "expanded_penalty",
        }
    }
}

impl std::str::FromStr for SimilarityMeasure {
    type Err = Error;

    /// Parses a measure name; `expanded_penalty` gets default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "iou" => Ok(Self::Iou),
            "dotd" => Ok(Self::Dotd),
            "diou" => Ok(Self::Diou),
            "expanded_penalty" => Ok(Self::ExpandedPenalty(ExpansionParams::default())),
            other => Err(Error::Validation(format!("unknown similarity measure `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(l: f64, t: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(l, t, w, h).unwrap()
    }

    fn s(v: f64) -> MeanObjectSize {
        MeanObjectSize::new(v).unwrap()
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 16.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 16.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 16.0, 16.0).is_err());
        assert!(MeanObjectSize::new(0.0).is_err());
        assert!(MeanObjectSize::new(-3.0).is_err());
    }

    #[test]
    fn center_distance_examples() {
        assert_eq!(center_distance(&bb(0., 0., 16., 16.), &bb(0., 0., 16., 16.)), 0.0);
        assert_eq!(center_distance(&bb(0., 0., 16., 16.), &bb(0., 12., 16., 16.)), 12.0);
        assert_eq!(center_distance(&bb(0., 0., 2., 2.), &bb(4., 0., 2., 2.)), 4.0);
    }

    #[test]
    fn iou_examples() {
        let a = bb(0., 0., 16., 16.);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(0., 16., 16., 16.)), 0.0);
        // 8x16 overlap = 128, union 512 - 128 = 384
        assert!((iou(&a, &bb(8., 0., 16., 16.)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dotd_examples() {
        let a = bb(0., 0., 16., 16.);
        assert_eq!(dotd(&a, &bb(4., 4., 8., 8.), s(3.0)), 1.0);
        assert!((dotd(&a, &bb(16., 0., 16., 16.), s(16.)) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((dotd(&a, &bb(12., 0., 16., 16.), s(16.)) - 0.472_366_552_741_014_7).abs() < 1e-12);
    }

    #[test]
    fn mean_object_size_examples() {
        assert_eq!(mean_object_size([&bb(0., 0., 16., 16.)]).unwrap().get(), 16.0);
        let boxes = [bb(0., 0., 16., 16.), bb(5., 5., 9., 25.)];
        assert!((mean_object_size(&boxes).unwrap().get() - 240.5f64.sqrt()).abs() < 1e-12);
        let many = vec![bb(1., 2., 4., 9.); 37];
        assert!((mean_object_size(&many).unwrap().get() - 6.0).abs() < 1e-12);
        let err = mean_object_size(std::iter::empty()).unwrap_err();
        assert_eq!(err.to_string(), "mean size undefined; supply S override");
    }

    #[test]
    fn diou_examples() {
        let a = bb(0., 0., 2., 2.);
        assert_eq!(diou(&a, &a), 1.0);
        let inner = bb(0.5, 0.5, 1., 1.);
        assert_eq!(diou(&a, &inner), iou(&a, &inner));
        assert!((diou(&a, &bb(4., 0., 2., 2.)) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn expanded_penalty_examples() {
        let a = bb(0., 0., 16., 16.);
        let b = bb(24., 0., 16., 16.);
        let p = ExpansionParams {
            expand: 0.5,
            penalty_weight: 0.0,
        };
        assert!((expanded_penalty_similarity(&a, &b, p, s(16.)) - 1.0 / 7.0).abs() < 1e-12);
        let p = ExpansionParams {
            expand: 0.5,
            penalty_weight: 1.0,
        };
        assert_eq!(expanded_penalty_similarity(&a, &a, p, s(16.)), 1.0);
    }

    #[test]
    fn measure_names_parse() {
        for m in ["iou", "dotd", "diou", "expanded-penalty"] {
            let parsed: SimilarityMeasure = m.parse().unwrap();
            assert_eq!(parsed.name(), m.replace('-', "_"));
        }
        assert!("giou".parse::<SimilarityMeasure>().is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.5..120.0f64, 0.5..120.0f64).prop_map(|(l, t, w, h)| bb(l, t, w, h))
    }

    fn arb_params() -> impl Strategy<Value = ExpansionParams> {
        (0.0..2.0f64, 0.0..1.0f64).prop_map(|(expand, penalty_weight)| ExpansionParams { expand, penalty_weight })
    }

    fn kernels(a: &BoundingBox, b: &BoundingBox, p: ExpansionParams, sz: MeanObjectSize) -> [f64; 5] {
        [
            center_distance(a, b),
            iou(a, b),
            dotd(a, b, sz),
            diou(a, b),
            expanded_penalty_similarity(a, b, p, sz),
        ]
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric(a in arb_box(), b in arb_box(), p in arb_params(), sz in 1.0..64.0f64) {
            let ab = kernels(&a, &b, p, s(sz));
            let ba = kernels(&b, &a, p, s(sz));
            for (x, y) in ab.iter().zip(ba.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn kernels_are_translation_invariant(
            a in arb_box(), b in arb_box(), p in arb_params(), sz in 1.0..64.0f64,
            dx in -300.0..300.0f64, dy in -300.0..300.0f64,
        ) {
            let before = kernels(&a, &b, p, s(sz));
            let after = kernels(&a.translated(dx, dy), &b.translated(dx, dy), p, s(sz));
            for (x, y) in before.iter().zip(after.iter()) {
                prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
            }
        }

        #[test]
        fn dotd_is_scale_covariant(a in arb_box(), b in arb_box(), sz in 1.0..64.0f64, k in 0.1..10.0f64) {
            let scale = |x: &BoundingBox| bb(x.left() * k, x.top() * k, x.width() * k, x.height() * k);
            let d0 = dotd(&a, &b, s(sz));
            let d1 = dotd(&scale(&a), &scale(&b), s(sz * k));
            prop_assert!((d0 - d1).abs() <= 1e-9);
        }

        #[test]
        fn ranges_and_diou_bound(a in arb_box(), b in arb_box(), sz in 1.0..64.0f64) {
            let i = iou(&a, &b);
            let d = dotd(&a, &b, s(sz));
            prop_assert!((0.0..=1.0).contains(&i));
            prop_assert!(d > 0.0 && d <= 1.0);
            let di = diou(&a, &b);
            prop_assert!(di <= i);
            prop_assert!(di > -1.0);
            if center_distance(&a, &b) > 1e-9 {
                prop_assert!(di < i);
            }
        }

        #[test]
        fn ordering_along_displacement(w in 1.0..64.0f64, h in 1.0..64.0f64, d1 in 0.0..200.0f64, extra in 1e-3..50.0f64) {
            let a = bb(0.0, 0.0, w, h);
            let near = a.translated(d1, 0.0);
            let far = a.translated(d1 + extra, 0.0);
            prop_assert!(iou(&a, &far) <= iou(&a, &near));
            prop_assert!(dotd(&a, &far, s(16.0)) < dotd(&a, &near, s(16.0)));
        }

        #[test]
        fn degenerate_expansion_is_iou(a in arb_box(), b in arb_box(), sz in 1.0..64.0f64) {
            let p = ExpansionParams { expand: 0.0, penalty_weight: 0.0 };
            prop_assert_eq!(expanded_penalty_similarity(&a, &b, p, s(sz)), iou(&a, &b));
        }
    }
}
