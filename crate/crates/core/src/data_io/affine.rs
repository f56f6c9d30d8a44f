//! Per-frame affine sidecar: lines `frame,a,b,tx,c,d,ty`, mapping
//! `(x, y) -> (a*x + b*y + tx, c*x + d*y + ty)` from frame-1 to frame.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    /// 0-based index of the destination frame (>= 1).
    pub frame: usize,
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub c: f64,
    pub d: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub fn new(frame: usize, a: f64, b: f64, tx: f64, c: f64, d: f64, ty: f64) -> Result<Self> {
        let t = Self {
            frame,
            a,
            b,
            tx,
            c,
            d,
            ty,
        };
        let det = t.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_EPS || ![a, b, tx, c, d, ty].iter().all(|v| v.is_finite()) {
            return Err(Error::SingularAffine { frame: frame + 1, det });
        }
        Ok(t)
    }

    pub fn identity(frame: usize) -> Self {
        Self {
            frame,
            a: 1.0,
            b: 0.0,
            tx: 0.0,
            c: 0.0,
            d: 1.0,
            ty: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.a == 1.0 && self.b == 0.0 && self.tx == 0.0 && self.c == 0.0 && self.d == 1.0 && self.ty == 0.0
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)
    }

    /// Linear part only, for velocities.
    pub fn apply_vector(&self, vx: f64, vy: f64) -> (f64, f64) {
        (self.a * vx + self.b * vy, self.c * vx + self.d * vy)
    }

    pub fn inverse(&self) -> Self {
        let det = self.determinant();
        let (a, b, c, d) = (self.d / det, -self.b / det, -self.c / det, self.a / det);
        Self {
            frame: self.frame,
            a,
            b,
            tx: -(a * self.tx + b * self.ty),
            c,
            d,
            ty: -(c * self.tx + d * self.ty),
        }
    }

    /// Axis-aligned hull of the mapped corners.
    pub fn map_box(&self, bbox: &BoundingBox) -> BoundingBox {
        if self.is_identity() {
            return *bbox;
        }
        let mapped = bbox.corners().map(|(x, y)| self.apply_point(x, y));
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in mapped {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        // nonsingular maps keep a positive-area hull
        BoundingBox::from_corners(x0, y0, x1, y1).expect("nonsingular affine maps boxes to boxes")
    }
}

/// Transforms keyed by destination frame; missing frames are identity.
#[derive(Debug, Clone, Default)]
pub struct AffineSchedule {
    by_frame: BTreeMap<usize, AffineTransform>,
}

impl AffineSchedule {
    pub fn new(transforms: Vec<AffineTransform>) -> Result<Self> {
        let mut by_frame = BTreeMap::new();
        for t in transforms {
            if by_frame.insert(t.frame, t).is_some() {
                return Err(Error::Validation(format!("duplicate affine for frame {}", t.frame + 1)));
            }
        }
        Ok(Self { by_frame })
    }

    pub fn get(&self, frame: usize) -> AffineTransform {
        self.by_frame
            .get(&frame)
            .copied()
            .unwrap_or_else(|| AffineTransform::identity(frame))
    }

    pub fn len(&self) -> usize {
        self.by_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_frame.is_empty()
    }
}

/// Reads the affine CSV. Blank lines and `#` comments are skipped.
pub fn load_affines<R: BufRead>(reader: R) -> Result<Vec<AffineTransform>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fail = |reason: &str| Error::Parse {
            line: idx + 1,
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let nums: Vec<f64> = text
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail("malformed number"))?;
        if nums.len() != 7 {
            return Err(fail("expected 7 fields `frame,a,b,tx,c,d,ty`"));
        }
        let frame = nums[0];
        if frame.fract() != 0.0 || frame < 2.0 {
            return Err(fail("affine frame must be an integer >= 2"));
        }
        let t = AffineTransform::new(frame as usize - 1, nums[1], nums[2], nums[3], nums[4], nums[5], nums[6])
            .map_err(|e| fail(&e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}
