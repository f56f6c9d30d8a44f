//! Constant-velocity Kalman filter on `[cx, cy, w, h, vcx, vcy, vw, vh]`.
//!
//! Noise follows the usual SORT-family convention: standard deviations are
//! proportional to the current box size, with `1/20` on positions and
//! `1/160` on velocities.

use nalgebra::{SMatrix, SVector};

use crate::data_io::AffineTransform;
use crate::geometry::BoundingBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;

pub const STD_POSITION: f64 = 1.0 / 20.0;
pub const STD_VELOCITY: f64 = 1.0 / 160.0;
const MIN_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub cov: StateCovariance,
}

fn measure(b: &BoundingBox) -> Measurement {
    let (cx, cy) = b.center();
    Measurement::new(cx, cy, b.width(), b.height())
}

fn diag8(std: [f64; 8]) -> StateCovariance {
    StateCovariance::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)))
}

impl KalmanState {
    pub fn initiate(b: &BoundingBox) -> Self {
        let z = measure(b);
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let (w, h) = (b.width(), b.height());
        let (p, v) = (2.0 * STD_POSITION, 10.0 * STD_VELOCITY);
        Self {
            mean,
            cov: diag8([p * w, p * h, p * w, p * h, v * w, v * h, v * w, v * h]),
        }
    }

    fn size(&self) -> (f64, f64) {
        (self.mean[2].max(MIN_SIZE), self.mean[3].max(MIN_SIZE))
    }

    /// Advances one frame.
    pub fn predict(&mut self) {
        for k in 2..4 {
            if self.mean[k] + self.mean[k + 4] <= 0.0 {
                self.mean[k + 4] = 0.0;
            }
        }
        let (w, h) = self.size();
        let (p, v) = (STD_POSITION, STD_VELOCITY);
        let q = diag8([p * w, p * h, p * w, p * h, v * w, v * h, v * w, v * h]);
        let mut f = StateCovariance::identity();
        for k in 0..4 {
            f[(k, k + 4)] = 1.0;
        }
        self.mean = f * self.mean;
        self.cov = f * self.cov * f.transpose() + q;
    }

    /// Measurement update with an observed box.
    pub fn update(&mut self, b: &BoundingBox) {
        let (w, h) = self.size();
        let p = STD_POSITION;
        let r = SMatrix::<f64, 4, 4>::from_diagonal(&Measurement::new(
            (p * w).powi(2),
            (p * h).powi(2),
            (p * w).powi(2),
            (p * h).powi(2),
        ));
        let hm = SMatrix::<f64, 4, 8>::identity();
        let s = hm * self.cov * hm.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let gain = self.cov * hm.transpose() * s_inv;
        let innovation = measure(b) - hm * self.mean;
        self.mean += gain * innovation;
        self.cov = (StateCovariance::identity() - gain * hm) * self.cov;
        self.cov = (self.cov + self.cov.transpose()) * 0.5;
        self.mean[2] = self.mean[2].max(MIN_SIZE);
        self.mean[3] = self.mean[3].max(MIN_SIZE);
    }

    pub fn bbox(&self) -> BoundingBox {
        let (w, h) = self.size();
        BoundingBox::from_center(self.mean[0], self.mean[1], w, h).expect("finite state")
    }

    /// Maps the box through `t` (corner hull) and the center velocity through
    /// its linear part.
    pub fn transform(&mut self, t: &AffineTransform) {
        if t.is_identity() {
            return;
        }
        let mapped = t.map_box(&self.bbox());
        let (cx, cy) = mapped.center();
        self.mean[0] = cx;
        self.mean[1] = cy;
        self.mean[2] = mapped.width();
        self.mean[3] = mapped.height();
        let (vx, vy) = t.apply_vector(self.mean[4], self.mean[5]);
        self.mean[4] = vx;
        self.mean[5] = vy;
    }
}
