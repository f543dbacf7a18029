//! Goal-frame coordinates and truncated bivariate Gaussian math.
//!
//! Goal-frame points are centered on the middle of the goal: `y` runs from
//! `-width/2` to `+width/2` and `z` is the height above the ground. A
//! [`TruncatedGaussian`] is a bivariate normal restricted to the half-plane
//! `z >= 0`; because only `z` is truncated, its normalizer is a single
//! standard-normal CDF evaluation.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rejection-sampling budget before a component is declared degenerate.
pub const MAX_REJECTION_DRAWS: usize = 1_000_000;

/// The goal mouth, in yards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalFrame {
    pub width: f64,
    pub height: f64,
    /// Pitch `y` of the goal center.
    pub y_center: f64,
    /// Pitch `x` of the goal line.
    pub goal_line_x: f64,
}

impl Default for GoalFrame {
    fn default() -> Self {
        GoalFrame { width: 8.0, height: 2.67, y_center: 40.0, goal_line_x: 120.0 }
    }
}

impl GoalFrame {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "goal frame needs positive width and height, got {} x {}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    /// Inclusive containment test: points on the posts or the crossbar are in frame.
    pub fn contains(&self, p: GoalPoint) -> bool {
        p.y.abs() <= self.half_width() && p.z >= 0.0 && p.z <= self.height
    }
}

/// Free-function form of [`GoalFrame::contains`].
pub fn in_goal_frame(frame: &GoalFrame, p: GoalPoint) -> bool {
    frame.contains(p)
}

/// A location in the plane of the goal line (yards, centered on the goal).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GoalPoint {
    pub y: f64,
    pub z: f64,
}

impl GoalPoint {
    pub const fn new(y: f64, z: f64) -> Self {
        GoalPoint { y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.z.is_finite()
    }

    pub fn mirrored(self) -> Self {
        GoalPoint { y: -self.y, z: self.z }
    }
}

/// Symmetric 2x2 matrix over `(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix2 {
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymMatrix2 {
    pub const fn new(yy: f64, yz: f64, zz: f64) -> Self {
        SymMatrix2 { yy, yz, zz }
    }

    pub const fn identity() -> Self {
        SymMatrix2 { yy: 1.0, yz: 0.0, zz: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.yy * self.zz - self.yz * self.yz
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix2 { yy: self.yy * s, yz: self.yz * s, zz: self.zz * s }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.yy.is_finite()
            && self.yz.is_finite()
            && self.zz.is_finite()
            && self.yy > 0.0
            && self.zz > 0.0
            && self.det() > 0.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.yy + self.zz);
        let half_diff = 0.5 * (self.yy - self.zz);
        let r = half_diff.hypot(self.yz);
        (mean - r, mean + r)
    }

    /// Rebuilds the matrix with every eigenvalue raised to at least `floor`.
    pub fn with_eigenvalue_floor(&self, floor: f64) -> Self {
        let (lo, hi) = self.eigenvalues();
        if lo >= floor {
            return *self;
        }
        // Unit eigenvector of the larger eigenvalue.
        let (vy, vz) = if self.yz.abs() > 0.0 {
            let (a, b) = (self.yz, hi - self.yy);
            let n = a.hypot(b);
            (a / n, b / n)
        } else if self.yy >= self.zz {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let hi = hi.max(floor);
        let lo = lo.max(floor);
        // M = hi v v^T + lo w w^T with w orthogonal to v.
        SymMatrix2 {
            yy: hi * vy * vy + lo * vz * vz,
            yz: (hi - lo) * vy * vz,
            zz: hi * vz * vz + lo * vy * vy,
        }
    }
}

/// Standard-normal CDF, accurate in both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Bivariate normal truncated to `z >= 0`.
///
/// Construction validates the covariance and caches the Cholesky factor,
/// the inverse and the log normalizer, so density evaluation is cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    mean: GoalPoint,
    cov: SymMatrix2,
    inv: SymMatrix2,
    chol: (f64, f64, f64),
    acceptance: f64,
    // -ln(2 pi sqrt(det)) - ln(acceptance)
    log_norm: f64,
    log_norm_untruncated: f64,
}

impl TruncatedGaussian {
    pub fn new(mean: GoalPoint, cov: SymMatrix2) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite component mean {mean:?}")));
        }
        if !cov.is_positive_definite() {
            return Err(Error::InvalidParameter(format!(
                "covariance is not positive definite: {cov:?}"
            )));
        }
        let det = cov.det();
        let inv = SymMatrix2 { yy: cov.zz / det, yz: -cov.yz / det, zz: cov.yy / det };
        let l11 = cov.yy.sqrt();
        let l21 = cov.yz / l11;
        let l22 = (cov.zz - l21 * l21).sqrt();
        let acceptance = std_normal_cdf(mean.z / cov.zz.sqrt());
        if !(acceptance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "component mass above ground underflows (mean z = {}, var z = {})",
                mean.z, cov.zz
            )));
        }
        let log_norm_untruncated = -(2.0 * PI).ln() - 0.5 * det.ln();
        Ok(TruncatedGaussian {
            mean,
            cov,
            inv,
            chol: (l11, l21, l22),
            acceptance,
            log_norm: log_norm_untruncated - acceptance.ln(),
            log_norm_untruncated,
        })
    }

    pub fn mean(&self) -> GoalPoint {
        self.mean
    }

    pub fn covariance(&self) -> SymMatrix2 {
        self.cov
    }

    /// `P(Z >= 0)` under the untruncated Gaussian.
    pub fn acceptance_probability(&self) -> f64 {
        self.acceptance
    }

    /// Squared Mahalanobis distance from the mean.
    pub fn mahalanobis_sq(&self, p: GoalPoint) -> f64 {
        let dy = p.y - self.mean.y;
        let dz = p.z - self.mean.z;
        self.inv.yy * dy * dy + 2.0 * self.inv.yz * dy * dz + self.inv.zz * dz * dz
    }

    pub fn log_pdf_untruncated(&self, p: GoalPoint) -> f64 {
        self.log_norm_untruncated - 0.5 * self.mahalanobis_sq(p)
    }

    pub fn pdf_untruncated(&self, p: GoalPoint) -> f64 {
        self.log_pdf_untruncated(p).exp()
    }

    /// Log density; `-inf` below ground. Assumes finite input.
    pub fn log_pdf(&self, p: GoalPoint) -> f64 {
        if p.z < 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_norm - 0.5 * self.mahalanobis_sq(p)
        }
    }

    pub fn pdf(&self, p: GoalPoint) -> Result<f64> {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
        }
        Ok(self.log_pdf(p).exp())
    }

    pub fn sample_untruncated<R: Rng + ?Sized>(&self, rng: &mut R) -> GoalPoint {
        let (l11, l21, l22) = self.chol;
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        GoalPoint { y: self.mean.y + l11 * a, z: self.mean.z + l21 * a + l22 * b }
    }

    /// Rejection sampler: redraws from the untruncated Gaussian until `z >= 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GoalPoint> {
        for _ in 0..MAX_REJECTION_DRAWS {
            let p = self.sample_untruncated(rng);
            if p.z >= 0.0 {
                return Ok(p);
            }
        }
        Err(Error::DegenerateComponent(MAX_REJECTION_DRAWS))
    }
}

/// Free-function forms mirroring the methods above.
pub fn acceptance_probability(g: &TruncatedGaussian) -> f64 {
    g.acceptance_probability()
}

pub fn trunc_pdf(g: &TruncatedGaussian, p: GoalPoint) -> Result<f64> {
    g.pdf(p)
}

pub fn sample<R: Rng + ?Sized>(g: &TruncatedGaussian, rng: &mut R) -> Result<GoalPoint> {
    g.sample(rng)
}
