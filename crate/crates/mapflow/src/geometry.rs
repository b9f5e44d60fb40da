//! Chart-based target geometries.
//!
//! All three built-in targets are constant-curvature model spaces carried in
//! a single global conformal chart: flat space, the sphere in stereographic
//! coordinates and hyperbolic space in the Poincare ball. The metric is
//! `g = lambda(|y|)^2 * delta` with
//!
//!   euclidean:   lambda = 1
//!   sphere:      lambda = 2 / (1 + k^2 |y|^2)       (curvature +k^2)
//!   hyperbolic:  lambda = 2 / (1 - k^2 |y|^2)       (curvature -k^2, |y| < 1/k)
//!
//! so metric, connection and distance all come in closed form. The chart
//! reference point sits at the chart origin.

use crate::error::{LabError, Result};
use crate::linalg::{self, Mat3, Vec3, MAX_DIM, ZERO_MAT, ZERO_VEC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Euclidean,
    SphereStereographic,
    HyperbolicPoincare,
}

#[derive(Debug, Clone, Copy)]
pub struct TargetChart {
    dim: usize,
    kind: GeometryKind,
    /// Curvature scale k; sectional curvature is +k^2, 0 or -k^2.
    k: f64,
}

impl TargetChart {
    pub fn new(kind: GeometryKind, dim: usize, curvature_scale: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::Config(format!(
                "target dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if curvature_scale <= 0.0 {
            return Err(LabError::Config(format!(
                "curvature_scale must be positive, got {curvature_scale}"
            )));
        }
        Ok(TargetChart {
            dim,
            kind,
            k: curvature_scale,
        })
    }

    pub fn euclidean(dim: usize) -> Self {
        TargetChart::new(GeometryKind::Euclidean, dim, 1.0).unwrap()
    }

    pub fn sphere(dim: usize, k: f64) -> Self {
        TargetChart::new(GeometryKind::SphereStereographic, dim, k).unwrap()
    }

    pub fn hyperbolic(dim: usize, k: f64) -> Self {
        TargetChart::new(GeometryKind::HyperbolicPoincare, dim, k).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn curvature_scale(&self) -> f64 {
        self.k
    }

    /// Upper (and exact) sectional curvature bound B.
    pub fn curvature_bound(&self) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => 0.0,
            GeometryKind::SphereStereographic => self.k * self.k,
            GeometryKind::HyperbolicPoincare => -self.k * self.k,
        }
    }

    pub fn is_valid(&self, y: &Vec3) -> bool {
        let r = linalg::norm(y, self.dim);
        if !r.is_finite() {
            return false;
        }
        match self.kind {
            GeometryKind::HyperbolicPoincare => self.k * r < 1.0 - 1e-12,
            _ => true,
        }
    }

    pub fn check_valid(&self, y: &Vec3) -> Result<()> {
        if self.is_valid(y) {
            Ok(())
        } else {
            Err(LabError::InvalidChartPoint {
                point: linalg::to_vec(y, self.dim),
            })
        }
    }

    /// Conformal factor lambda with g = lambda^2 * delta.
    #[inline]
    pub fn conformal_factor(&self, y: &Vec3) -> f64 {
        let r2 = linalg::dot(y, y, self.dim);
        match self.kind {
            GeometryKind::Euclidean => 1.0,
            GeometryKind::SphereStereographic => 2.0 / (1.0 + self.k * self.k * r2),
            GeometryKind::HyperbolicPoincare => 2.0 / (1.0 - self.k * self.k * r2),
        }
    }

    /// Gradient of log lambda; w_a with Gamma^a_bc = d^a_b w_c + d^a_c w_b - d_bc w_a.
    #[inline]
    pub(crate) fn log_factor_gradient(&self, y: &Vec3) -> Vec3 {
        let c = match self.kind {
            GeometryKind::Euclidean => 0.0,
            GeometryKind::SphereStereographic => -self.k * self.k * self.conformal_factor(y),
            GeometryKind::HyperbolicPoincare => self.k * self.k * self.conformal_factor(y),
        };
        linalg::scale(y, c, self.dim)
    }

    pub fn metric_at(&self, y: &Vec3) -> Result<Mat3> {
        self.check_valid(y)?;
        let l2 = self.conformal_factor(y).powi(2);
        let mut g = ZERO_MAT;
        for a in 0..self.dim {
            g[a][a] = l2;
        }
        Ok(g)
    }

    /// Christoffel symbols Gamma^a_bc of the chart metric, indexed [a][b][c].
    pub fn christoffel_at(&self, y: &Vec3) -> Result<[Mat3; MAX_DIM]> {
        self.check_valid(y)?;
        let w = self.log_factor_gradient(y);
        let mut gamma = [ZERO_MAT; MAX_DIM];
        for a in 0..self.dim {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    let mut v = 0.0;
                    if a == b {
                        v += w[c];
                    }
                    if a == c {
                        v += w[b];
                    }
                    if b == c {
                        v -= w[a];
                    }
                    gamma[a][b][c] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// Contraction Gamma^a_bc q^bc for a symmetric q, without assembling the
    /// rank-3 array: 2 (q w)_a - w_a tr q.
    #[inline]
    pub(crate) fn christoffel_contract(&self, y: &Vec3, q: &Mat3) -> Vec3 {
        let w = self.log_factor_gradient(y);
        let mut tr = 0.0;
        let mut qw = ZERO_VEC;
        for a in 0..self.dim {
            tr += q[a][a];
            for b in 0..self.dim {
                qw[a] += q[a][b] * w[b];
            }
        }
        let mut out = ZERO_VEC;
        for a in 0..self.dim {
            out[a] = 2.0 * qw[a] - w[a] * tr;
        }
        out
    }

    /// Gamma^a_bc u^b v^c = u_a (w.v) + v_a (w.u) - w_a (u.v).
    #[inline]
    pub(crate) fn christoffel_apply(&self, y: &Vec3, u: &Vec3, v: &Vec3) -> Vec3 {
        let w = self.log_factor_gradient(y);
        let wu = linalg::dot(&w, u, self.dim);
        let wv = linalg::dot(&w, v, self.dim);
        let uv = linalg::dot(u, v, self.dim);
        let mut out = ZERO_VEC;
        for a in 0..self.dim {
            out[a] = u[a] * wv + v[a] * wu - w[a] * uv;
        }
        out
    }

    /// Geodesic distance rho from the chart origin.
    pub fn distance_from_center(&self, y: &Vec3) -> Result<f64> {
        self.check_valid(y)?;
        let r = linalg::norm(y, self.dim);
        Ok(match self.kind {
            GeometryKind::Euclidean => r,
            GeometryKind::SphereStereographic => 2.0 / self.k * (self.k * r).atan(),
            GeometryKind::HyperbolicPoincare => 2.0 / self.k * (self.k * r).atanh(),
        })
    }

    /// Chart radius |y| of the point at geodesic distance rho from the origin.
    pub fn chart_radius_for_distance(&self, rho: f64) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => rho,
            GeometryKind::SphereStereographic => (self.k * rho / 2.0).tan() / self.k,
            GeometryKind::HyperbolicPoincare => (self.k * rho / 2.0).tanh() / self.k,
        }
    }

    /// Geodesic distance between two chart points.
    pub fn distance_between(&self, y0: &Vec3, y1: &Vec3) -> Result<f64> {
        self.check_valid(y0)?;
        self.check_valid(y1)?;
        let n = self.dim;
        match self.kind {
            GeometryKind::Euclidean => Ok(linalg::norm(&linalg::sub(y1, y0, n), n)),
            GeometryKind::SphereStereographic => {
                // Embed the rescaled chart point z = k y as
                // (2z, 1 - |z|^2)/(1 + |z|^2) on the unit sphere.
                let z0 = linalg::scale(y0, self.k, n);
                let z1 = linalg::scale(y1, self.k, n);
                let (s0, s1) = (linalg::dot(&z0, &z0, n), linalg::dot(&z1, &z1, n));
                let cos = (4.0 * linalg::dot(&z0, &z1, n) + (1.0 - s0) * (1.0 - s1))
                    / ((1.0 + s0) * (1.0 + s1));
                Ok(cos.clamp(-1.0, 1.0).acos() / self.k)
            }
            GeometryKind::HyperbolicPoincare => {
                let z0 = linalg::scale(y0, self.k, n);
                let z1 = linalg::scale(y1, self.k, n);
                let diff = linalg::sub(&z1, &z0, n);
                let d2 = linalg::dot(&diff, &diff, n);
                let denom = (1.0 - linalg::dot(&z0, &z0, n)) * (1.0 - linalg::dot(&z1, &z1, n));
                Ok((1.0 + 2.0 * d2 / denom).acosh() / self.k)
            }
        }
    }

    /// The comparison function sqrt(d) cos(sqrt(d) rho), positive on the cap
    /// rho < pi / (2 sqrt(d)).
    pub fn xi_function(&self, y: &Vec3, d: f64) -> Result<f64> {
        if d <= 0.0 {
            return Err(LabError::Config(format!("d must be positive, got {d}")));
        }
        let rho = self.distance_from_center(y)?;
        let sd = d.sqrt();
        let limit = std::f64::consts::FRAC_PI_2 / sd;
        if rho >= limit {
            return Err(LabError::OutOfCap { rho, limit });
        }
        Ok(sd * (sd * rho).cos())
    }

    #[inline]
    pub fn metric_inner(&self, y: &Vec3, u: &Vec3, v: &Vec3) -> f64 {
        let l = self.conformal_factor(y);
        l * l * linalg::dot(u, v, self.dim)
    }

    #[inline]
    pub fn metric_norm(&self, y: &Vec3, v: &Vec3) -> f64 {
        self.conformal_factor(y) * linalg::norm(v, self.dim)
    }
}
