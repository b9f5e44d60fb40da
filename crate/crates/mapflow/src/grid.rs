//! Regular grids over flat Euclidean domain regions.
//!
//! The lattice covers the region's bounding box with uniform spacing `h`.
//! Box regions place nodes on the box corners (or cell-centered over the
//! period for periodic boundaries); ball and annulus regions use a
//! cell-centered lattice so that no node lands on the region center or the
//! coordinate axes through it. Each node owns the cell `[x - h/2, x + h/2]^n`
//! and stores the fraction of that cell inside the region, obtained by
//! 4^n-point subsampling, for cut-cell quadrature.

use crate::error::{LabError, Result};
use crate::linalg::{self, Vec3, MAX_DIM, ZERO_VEC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box { min: Vec3, max: Vec3 },
    Ball { center: Vec3, radius: f64 },
    Annulus { center: Vec3, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Periodic,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Active,
    Boundary,
    Exterior,
}

impl Region {
    pub fn contains(&self, x: &Vec3, n: usize) -> bool {
        match self {
            Region::Box { min, max } => (0..n).all(|i| x[i] >= min[i] - 1e-12 && x[i] <= max[i] + 1e-12),
            Region::Ball { center, radius } => {
                linalg::norm(&linalg::sub(x, center, n), n) <= *radius
            }
            Region::Annulus { center, inner, outer } => {
                let r = linalg::norm(&linalg::sub(x, center, n), n);
                r >= *inner && r <= *outer
            }
        }
    }

    pub fn center(&self, n: usize) -> Vec3 {
        match self {
            Region::Box { min, max } => {
                let mut c = ZERO_VEC;
                for i in 0..n {
                    c[i] = 0.5 * (min[i] + max[i]);
                }
                c
            }
            Region::Ball { center, .. } | Region::Annulus { center, .. } => *center,
        }
    }

    /// Largest radius around the region center for which ball quadrature is
    /// meaningful.
    pub fn max_radius(&self, n: usize) -> f64 {
        match self {
            Region::Box { min, max } => {
                let mut r = f64::INFINITY;
                for i in 0..n {
                    r = r.min(0.5 * (max[i] - min[i]));
                }
                r
            }
            Region::Ball { radius, .. } => *radius,
            Region::Annulus { outer, .. } => *outer,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Region::Box { min, max } => {
                for i in 0..n {
                    if max[i] <= min[i] {
                        return Err(LabError::Config(format!(
                            "box extent degenerate on axis {i}: [{}, {}]",
                            min[i], max[i]
                        )));
                    }
                }
            }
            Region::Ball { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(LabError::Config("ball radius must be positive".into()));
                }
            }
            Region::Annulus { inner, outer, .. } => {
                if !(*inner > 0.0 && outer > inner) {
                    return Err(LabError::Config(
                        "annulus radii must satisfy 0 < inner < outer".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DomainGrid {
    dim: usize,
    h: f64,
    region: Region,
    bc: BoundaryKind,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    origin: Vec3,
    status: Vec<NodeStatus>,
    volume_frac: Vec<f64>,
    active: Vec<usize>,
}

impl DomainGrid {
    pub fn new(dim: usize, region: Region, h: f64, bc: BoundaryKind) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::Config(format!(
                "domain dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if h <= 0.0 {
            return Err(LabError::Config(format!("spacing h must be positive, got {h}")));
        }
        region.validate(dim)?;
        if bc == BoundaryKind::Periodic && !matches!(region, Region::Box { .. }) {
            return Err(LabError::Config(
                "periodic boundaries require a box region".into(),
            ));
        }
        let mut shape = [1usize; MAX_DIM];
        let mut origin = ZERO_VEC;
        match &region {
            Region::Box { min, max } => {
                for i in 0..dim {
                    let extent = max[i] - min[i];
                    let cells = (extent / h).round();
                    if (extent - cells * h).abs() > 1e-9 * extent.max(1.0) {
                        return Err(LabError::Config(format!(
                            "box extent {extent} on axis {i} is not a multiple of h = {h}"
                        )));
                    }
                    shape[i] = if bc == BoundaryKind::Periodic {
                        cells as usize
                    } else {
                        cells as usize + 1
                    };
                    origin[i] = min[i];
                }
            }
            Region::Ball { center, radius } | Region::Annulus { center, outer: radius, .. } => {
                for i in 0..dim {
                    // cell-centered, even count: nodes avoid the center axes
                    let half = (radius / h).ceil() as usize;
                    shape[i] = 2 * half;
                    origin[i] = center[i] - (shape[i] as f64 - 1.0) / 2.0 * h;
                }
            }
        }
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1usize;
        for i in 0..dim {
            strides[i] = acc;
            acc *= shape[i];
        }
        let count = acc;
        let mut grid = DomainGrid {
            dim,
            h,
            region,
            bc,
            shape,
            strides,
            origin,
            status: vec![NodeStatus::Exterior; count],
            volume_frac: vec![0.0; count],
            active: Vec::new(),
        };
        grid.classify();
        grid.compute_volume_fractions();
        Ok(grid)
    }

    fn classify(&mut self) {
        let count = self.status.len();
        let inside: Vec<bool> = (0..count)
            .map(|idx| self.region.contains(&self.position(idx), self.dim))
            .collect();
        for idx in 0..count {
            if !inside[idx] {
                self.status[idx] = NodeStatus::Exterior;
                continue;
            }
            match self.bc {
                BoundaryKind::Periodic | BoundaryKind::Free => {
                    self.status[idx] = NodeStatus::Active;
                }
                BoundaryKind::Dirichlet => {
                    let mut interior = true;
                    for axis in 0..self.dim {
                        for step in [-1isize, 1] {
                            match self.shift(idx, axis, step) {
                                Some(n) if inside[n] => {}
                                _ => interior = false,
                            }
                        }
                    }
                    self.status[idx] = if interior {
                        NodeStatus::Active
                    } else {
                        NodeStatus::Boundary
                    };
                }
            }
        }
        self.active = (0..count)
            .filter(|&i| self.status[i] == NodeStatus::Active)
            .collect();
    }

    fn compute_volume_fractions(&mut self) {
        for idx in 0..self.status.len() {
            if self.status[idx] == NodeStatus::Exterior {
                self.volume_frac[idx] = 0.0;
            } else {
                self.volume_frac[idx] = self.cell_fraction(idx, |_| true);
            }
        }
    }

    /// Fraction of the node's cell inside the region and satisfying `pred`,
    /// by 4^n-point subsampling.
    fn cell_fraction(&self, idx: usize, pred: impl Fn(&Vec3) -> bool) -> f64 {
        const SUB: usize = 4;
        let x = self.position(idx);
        let n = self.dim;
        let total = SUB.pow(n as u32);
        let mut hits = 0usize;
        let mut offsets = [0usize; MAX_DIM];
        for _ in 0..total {
            let mut p = x;
            for i in 0..n {
                p[i] += ((offsets[i] as f64 + 0.5) / SUB as f64 - 0.5) * self.h;
            }
            if self.region.contains(&p, n) && pred(&p) {
                hits += 1;
            }
            // odometer increment
            for item in offsets.iter_mut().take(n) {
                *item += 1;
                if *item < SUB {
                    break;
                }
                *item = 0;
            }
        }
        hits as f64 / total as f64
    }

    /// Fraction of the node's cell inside region AND the ball |x - c| <= r.
    pub fn fraction_in_ball(&self, idx: usize, center: &Vec3, r: f64) -> f64 {
        if self.status[idx] == NodeStatus::Exterior {
            return 0.0;
        }
        let x = self.position(idx);
        let d = linalg::norm(&linalg::sub(&x, center, self.dim), self.dim);
        let half_diag = 0.5 * self.h * (self.dim as f64).sqrt();
        if d + half_diag <= r {
            return self.volume_frac[idx];
        }
        if d - half_diag > r {
            return 0.0;
        }
        self.cell_fraction(idx, |p| {
            linalg::norm(&linalg::sub(p, center, self.dim), self.dim) <= r
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn region(&self) -> &Region {
        self.region_ref()
    }

    fn region_ref(&self) -> &Region {
        &self.region
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        self.bc
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn node_count(&self) -> usize {
        self.status.len()
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn status(&self, idx: usize) -> NodeStatus {
        self.status[idx]
    }

    pub fn volume_fraction(&self, idx: usize) -> f64 {
        self.volume_frac[idx]
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let mut x = ZERO_VEC;
        for i in 0..self.dim {
            x[i] = self.origin[i] + c[i] as f64 * self.h;
        }
        x
    }

    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut c = [0usize; MAX_DIM];
        for i in 0..self.dim {
            c[i] = idx % self.shape[i];
            idx /= self.shape[i];
        }
        c
    }

    pub fn flat_index(&self, coords: &[usize; MAX_DIM]) -> usize {
        let mut idx = 0usize;
        for i in 0..self.dim {
            idx += coords[i] * self.strides[i];
        }
        idx
    }

    /// Neighbor index shifted along `axis`; periodic wrap when applicable,
    /// `None` off the lattice.
    pub fn shift(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let c = self.coords(idx);
        let pos = c[axis] as isize + step;
        let extent = self.shape[axis] as isize;
        let wrapped = if self.bc == BoundaryKind::Periodic {
            pos.rem_euclid(extent)
        } else if pos < 0 || pos >= extent {
            return None;
        } else {
            pos
        };
        Some((idx as isize + (wrapped - c[axis] as isize) * self.strides[axis] as isize) as usize)
    }

    /// Exact measure of B_r(region center) intersected with the region, for
    /// quadrature calibration. Box regions require the ball to be inscribed.
    pub fn exact_ball_volume(&self, r: f64) -> Result<f64> {
        let n = self.dim;
        let unit = |r: f64| match n {
            1 => 2.0 * r,
            2 => std::f64::consts::PI * r * r,
            _ => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
        };
        match &self.region {
            Region::Box { .. } => {
                if r > self.region.max_radius(n) + 1e-12 {
                    return Err(LabError::RadiusOutOfRange { r });
                }
                Ok(unit(r))
            }
            Region::Ball { radius, .. } => Ok(unit(r.min(*radius))),
            Region::Annulus { inner, outer, .. } => {
                let hi = r.min(*outer);
                if hi <= *inner {
                    Ok(0.0)
                } else {
                    Ok(unit(hi) - unit(*inner))
                }
            }
        }
    }
}
