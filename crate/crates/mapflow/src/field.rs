//! Discretized maps from a domain grid into a target chart, with the
//! finite-difference operators everything downstream is built on: first
//! derivatives, energy density, tension field, equation residual, and
//! cut-cell volume / interpolated surface quadrature.

use crate::error::{LabError, Result};
use crate::geometry::TargetChart;
use crate::grid::{BoundaryKind, DomainGrid, NodeStatus};
use crate::linalg::{self, Mat3, Vec3, MAX_DIM, ZERO_MAT, ZERO_VEC};
use crate::potential::Potential;
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct MapField {
    grid: Arc<DomainGrid>,
    chart: TargetChart,
    values: Vec<Vec3>,
}

/// Per-node residual R = tau(phi) + grad V(phi) with metric norms.
#[derive(Debug, Clone)]
pub struct ResidualField {
    pub values: Vec<Vec3>,
    pub sup: f64,
    pub l2: f64,
}

impl MapField {
    pub fn from_fn(
        grid: Arc<DomainGrid>,
        chart: TargetChart,
        f: impl Fn(&Vec3) -> Vec3,
    ) -> Result<Self> {
        let mut values = vec![ZERO_VEC; grid.node_count()];
        for idx in 0..grid.node_count() {
            if grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            let y = f(&grid.position(idx));
            if !chart.is_valid(&y) {
                return Err(LabError::ChartExit {
                    node: idx,
                    position: linalg::to_vec(&grid.position(idx), grid.dim()),
                    value: linalg::to_vec(&y, chart.dim()),
                });
            }
            values[idx] = y;
        }
        Ok(MapField { grid, chart, values })
    }

    pub fn constant(grid: Arc<DomainGrid>, chart: TargetChart, y: &Vec3) -> Result<Self> {
        let y = *y;
        MapField::from_fn(grid, chart, move |_| y)
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<DomainGrid> {
        Arc::clone(&self.grid)
    }

    pub fn chart(&self) -> &TargetChart {
        &self.chart
    }

    pub fn value(&self, idx: usize) -> &Vec3 {
        &self.values[idx]
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub(crate) fn with_values(&self, values: Vec<Vec3>) -> MapField {
        MapField {
            grid: Arc::clone(&self.grid),
            chart: self.chart,
            values,
        }
    }

    #[inline]
    fn fetch(&self, idx: usize, axis: usize, step: isize) -> Option<&Vec3> {
        match self.grid.shift(idx, axis, step) {
            Some(n) if self.grid.status(n) != NodeStatus::Exterior => Some(&self.values[n]),
            _ => None,
        }
    }

    /// First partials d_i phi^a, rows indexed by domain axis. Central
    /// differences where the stencil allows, second-order one-sided at free
    /// boundaries.
    pub fn differential(&self, idx: usize) -> Result<Mat3> {
        if self.grid.status(idx) == NodeStatus::Exterior {
            return Err(LabError::InactiveNode { node: idx });
        }
        let n = self.grid.dim();
        let m = self.chart.dim();
        let h = self.grid.spacing();
        let u0 = &self.values[idx];
        let mut d = ZERO_MAT;
        for axis in 0..n {
            let plus = self.fetch(idx, axis, 1);
            let minus = self.fetch(idx, axis, -1);
            match (plus, minus) {
                (Some(p), Some(mi)) => {
                    for a in 0..m {
                        d[axis][a] = (p[a] - mi[a]) / (2.0 * h);
                    }
                }
                (Some(p), None) => {
                    if let Some(pp) = self.fetch(idx, axis, 2) {
                        for a in 0..m {
                            d[axis][a] = (-3.0 * u0[a] + 4.0 * p[a] - pp[a]) / (2.0 * h);
                        }
                    } else {
                        for a in 0..m {
                            d[axis][a] = (p[a] - u0[a]) / h;
                        }
                    }
                }
                (None, Some(mi)) => {
                    if let Some(mm) = self.fetch(idx, axis, -2) {
                        for a in 0..m {
                            d[axis][a] = (3.0 * u0[a] - 4.0 * mi[a] + mm[a]) / (2.0 * h);
                        }
                    } else {
                        for a in 0..m {
                            d[axis][a] = (u0[a] - mi[a]) / h;
                        }
                    }
                }
                (None, None) => {}
            }
        }
        Ok(d)
    }

    /// Energy density 1/2 g_ab(phi) d_i phi^a d_i phi^b on the flat domain.
    pub fn energy_density(&self, idx: usize) -> Result<f64> {
        let d = self.differential(idx)?;
        let y = &self.values[idx];
        let l2 = self.chart.conformal_factor(y).powi(2);
        let mut s = 0.0;
        for row in d.iter().take(self.grid.dim()) {
            s += linalg::dot(row, row, self.chart.dim());
        }
        Ok(0.5 * l2 * s)
    }

    /// |d phi| at a node.
    pub fn dphi_norm(&self, idx: usize) -> Result<f64> {
        Ok((2.0 * self.energy_density(idx)?).sqrt())
    }

    pub fn sup_dphi(&self) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for &idx in self.grid.active() {
            sup = sup.max(self.dphi_norm(idx)?);
        }
        Ok(sup)
    }

    /// Squared metric norm of the radial derivative d phi / d r about `center`.
    pub fn radial_energy_density(&self, idx: usize, center: &Vec3) -> Result<f64> {
        let n = self.grid.dim();
        let m = self.chart.dim();
        let x = self.grid.position(idx);
        let rel = linalg::sub(&x, center, n);
        let r = linalg::norm(&rel, n);
        if r < 1e-12 {
            return Ok(0.0);
        }
        let d = self.differential(idx)?;
        let mut radial = ZERO_VEC;
        for i in 0..n {
            linalg::axpy(&mut radial, rel[i] / r, &d[i], m);
        }
        let l = self.chart.conformal_factor(&self.values[idx]);
        Ok(l * l * linalg::dot(&radial, &radial, m))
    }

    /// Tension field tau^a = Lap phi^a + Gamma^a_bc d_i phi^b d_i phi^c.
    ///
    /// With free boundaries, missing Laplacian neighbors use linear ghost
    /// extrapolation (ghost = 2 u - u_opposite), i.e. a vanishing second
    /// difference along that axis.
    pub fn tension_field(&self, idx: usize) -> Result<Vec3> {
        if self.grid.status(idx) != NodeStatus::Active {
            return Err(LabError::InactiveNode { node: idx });
        }
        let n = self.grid.dim();
        let m = self.chart.dim();
        let h2 = self.grid.spacing() * self.grid.spacing();
        let u0 = &self.values[idx];
        let mut tau = ZERO_VEC;
        for axis in 0..n {
            match (self.fetch(idx, axis, 1), self.fetch(idx, axis, -1)) {
                (Some(p), Some(mi)) => {
                    for a in 0..m {
                        tau[a] += (p[a] + mi[a] - 2.0 * u0[a]) / h2;
                    }
                }
                _ => {
                    if self.grid.boundary_kind() != BoundaryKind::Free {
                        return Err(LabError::Config(format!(
                            "node {idx} lacks a Laplacian stencil on axis {axis}"
                        )));
                    }
                    // ghost extrapolation: zero contribution
                }
            }
        }
        let d = self.differential(idx)?;
        let mut q = ZERO_MAT;
        for i in 0..n {
            for a in 0..m {
                for b in 0..m {
                    q[a][b] += d[i][a] * d[i][b];
                }
            }
        }
        let gamma_q = self.chart.christoffel_contract(u0, &q);
        for a in 0..m {
            tau[a] += gamma_q[a];
        }
        Ok(tau)
    }

    /// Residual of the equation tau(phi) = -grad V(phi), with metric norms.
    pub fn residual(&self, potential: &Potential) -> Result<ResidualField> {
        let m = self.chart.dim();
        let mut values = vec![ZERO_VEC; self.grid.node_count()];
        let mut sup: f64 = 0.0;
        let mut l2 = 0.0;
        let voln = self.grid.spacing().powi(self.grid.dim() as i32);
        for &idx in self.grid.active() {
            let mut r = self.tension_field(idx)?;
            let gv = potential.metric_gradient(&self.chart, &self.values[idx])?;
            for a in 0..m {
                r[a] += gv[a];
            }
            let norm = self.chart.metric_norm(&self.values[idx], &r);
            sup = sup.max(norm);
            l2 += norm * norm * voln * self.grid.volume_fraction(idx);
            values[idx] = r;
        }
        Ok(ResidualField {
            values,
            sup,
            l2: l2.sqrt(),
        })
    }

    /// Cut-cell midpoint quadrature of a per-node scalar over the region,
    /// optionally intersected with the ball of radius `r` about `center`.
    pub fn integrate(
        &self,
        node_scalar: &[f64],
        ball: Option<(&Vec3, f64)>,
    ) -> Result<f64> {
        let voln = self.grid.spacing().powi(self.grid.dim() as i32);
        if let Some((center, r)) = ball {
            if r > self.grid.region().max_radius(self.grid.dim()) + 1e-9 {
                return Err(LabError::RadiusOutOfRange { r });
            }
            let mut s = 0.0;
            for idx in 0..self.grid.node_count() {
                if self.grid.status(idx) == NodeStatus::Exterior {
                    continue;
                }
                let frac = self.grid.fraction_in_ball(idx, center, r);
                if frac > 0.0 {
                    s += node_scalar[idx] * frac * voln;
                }
            }
            Ok(s)
        } else {
            let mut s = 0.0;
            for idx in 0..self.grid.node_count() {
                if self.grid.status(idx) == NodeStatus::Exterior {
                    continue;
                }
                s += node_scalar[idx] * self.grid.volume_fraction(idx) * voln;
            }
            Ok(s)
        }
    }

    /// Multilinear interpolation of a per-node scalar at an arbitrary point.
    /// Exterior corners are dropped and the weights renormalized.
    pub fn interpolate_scalar(&self, node_scalar: &[f64], x: &Vec3) -> Result<f64> {
        let n = self.grid.dim();
        let h = self.grid.spacing();
        let origin = self.grid.origin();
        let shape = self.grid.shape();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for i in 0..n {
            let t = (x[i] - origin[i]) / h;
            let fl = t.floor();
            let mut b = fl as isize;
            let mut f = t - fl;
            if b < 0 {
                b = 0;
                f = 0.0;
            }
            if b as usize >= shape[i] - 1 {
                b = shape[i] as isize - 2;
                f = 1.0;
            }
            base[i] = b as usize;
            frac[i] = f;
        }
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for corner in 0..(1usize << n) {
            let mut c = base;
            let mut w = 1.0;
            for i in 0..n {
                if corner & (1 << i) != 0 {
                    c[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            let idx = self.grid.flat_index(&c);
            if self.grid.status(idx) == NodeStatus::Exterior || w == 0.0 {
                continue;
            }
            acc += w * node_scalar[idx];
            wsum += w;
        }
        if wsum <= 0.0 {
            return Err(LabError::RadiusOutOfRange {
                r: linalg::norm(x, n),
            });
        }
        Ok(acc / wsum)
    }

    /// Quadrature of a per-node scalar over the sphere |x - center| = r.
    ///
    /// n = 1 uses the two-point counting measure, n = 2 Gauss-Legendre in the
    /// angle, n = 3 a Gauss-Legendre (latitude) x uniform (longitude) product
    /// rule, with the integrand obtained by multilinear interpolation.
    pub fn surface_integrate(
        &self,
        node_scalar: &[f64],
        center: &Vec3,
        r: f64,
    ) -> Result<f64> {
        if r > self.grid.region().max_radius(self.grid.dim()) + 1e-9 {
            return Err(LabError::RadiusOutOfRange { r });
        }
        let n = self.grid.dim();
        match n {
            1 => {
                let xp = [center[0] + r, 0.0, 0.0];
                let xm = [center[0] - r, 0.0, 0.0];
                Ok(self.interpolate_scalar(node_scalar, &xp)?
                    + self.interpolate_scalar(node_scalar, &xm)?)
            }
            2 => {
                let (nodes, weights) = linalg::gauss_legendre(64);
                let mut s = 0.0;
                for (t, w) in nodes.iter().zip(&weights) {
                    let theta = std::f64::consts::PI * (t + 1.0);
                    let p = [
                        center[0] + r * theta.cos(),
                        center[1] + r * theta.sin(),
                        0.0,
                    ];
                    s += std::f64::consts::PI * w * self.interpolate_scalar(node_scalar, &p)?;
                }
                Ok(r * s)
            }
            _ => {
                let (mu, wmu) = linalg::gauss_legendre(32);
                let nphi = 64usize;
                let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
                let mut s = 0.0;
                for (m, wm) in mu.iter().zip(&wmu) {
                    let sin_t = (1.0 - m * m).sqrt();
                    for j in 0..nphi {
                        let phi = dphi * j as f64;
                        let p = [
                            center[0] + r * sin_t * phi.cos(),
                            center[1] + r * sin_t * phi.sin(),
                            center[2] + r * m,
                        ];
                        s += wm * dphi * self.interpolate_scalar(node_scalar, &p)?;
                    }
                }
                Ok(r * r * s)
            }
        }
    }

    /// Per-node scalar helper: evaluates `f` at every non-exterior node.
    pub fn node_scalar(&self, mut f: impl FnMut(usize) -> Result<f64>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.node_count()];
        for idx in 0..self.grid.node_count() {
            if self.grid.status(idx) != NodeStatus::Exterior {
                out[idx] = f(idx)?;
            }
        }
        Ok(out)
    }

    /// Writes one row per non-exterior node: domain coordinates then chart
    /// values, in flat lattice order.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.grid.dim();
        let m = self.chart.dim();
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let ys: Vec<String> = (1..=m).map(|a| format!("y{a}")).collect();
        writeln!(w, "{},{}", xs.join(","), ys.join(","))?;
        for idx in 0..self.grid.node_count() {
            if self.grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            let x = self.grid.position(idx);
            let mut row: Vec<String> = (0..n).map(|i| format!("{:.17e}", x[i])).collect();
            row.extend((0..m).map(|a| format!("{:.17e}", self.values[idx][a])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`save_csv`] back onto a matching grid.
    pub fn load_csv(
        grid: Arc<DomainGrid>,
        chart: TargetChart,
        path: &std::path::Path,
    ) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        lines.next(); // header
        let n = grid.dim();
        let m = chart.dim();
        let mut values = vec![ZERO_VEC; grid.node_count()];
        let mut rows = lines;
        for idx in 0..grid.node_count() {
            if grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            let line = rows
                .next()
                .ok_or_else(|| LabError::Parse("snapshot has too few rows".into()))?
                .map_err(LabError::Io)?;
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| LabError::Parse(format!("bad snapshot number: {e}")))?;
            if cols.len() != n + m {
                return Err(LabError::Parse(format!(
                    "snapshot row has {} columns, expected {}",
                    cols.len(),
                    n + m
                )));
            }
            let x = grid.position(idx);
            for i in 0..n {
                if (cols[i] - x[i]).abs() > 1e-9 {
                    return Err(LabError::Parse(format!(
                        "snapshot coordinates do not match the grid at node {idx}"
                    )));
                }
            }
            let mut y = ZERO_VEC;
            y[..m].copy_from_slice(&cols[n..n + m]);
            chart.check_valid(&y)?;
            values[idx] = y;
        }
        Ok(MapField { grid, chart, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Region;
    use crate::potential::PotentialKind;

    fn box_grid_1d(h: f64, l: f64, bc: BoundaryKind) -> Arc<DomainGrid> {
        Arc::new(
            DomainGrid::new(
                1,
                Region::Box { min: [-l, 0.0, 0.0], max: [l, 0.0, 0.0] },
                h,
                bc,
            )
            .unwrap(),
        )
    }

    fn box_grid_2d(h: f64, l: f64) -> Arc<DomainGrid> {
        Arc::new(
            DomainGrid::new(
                2,
                Region::Box { min: [-l, -l, 0.0], max: [l, l, 0.0] },
                h,
                BoundaryKind::Dirichlet,
            )
            .unwrap(),
        )
    }

    fn node_at(grid: &DomainGrid, x: &Vec3) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for idx in 0..grid.node_count() {
            let p = grid.position(idx);
            let d = linalg::norm(&linalg::sub(&p, x, grid.dim()), grid.dim());
            if d < dist {
                dist = d;
                best = idx;
            }
        }
        best
    }

    #[test]
    fn differential_exact_on_affine_maps() {
        let g = box_grid_2d(0.1, 1.0);
        let chart = TargetChart::euclidean(2);
        let f = MapField::from_fn(Arc::clone(&g), chart, |x| {
            [2.0 * x[0] - x[1], 0.5 * x[0] + 3.0 * x[1], 0.0]
        })
        .unwrap();
        let idx = g.active()[7];
        let d = f.differential(idx).unwrap();
        assert!((d[0][0] - 2.0).abs() < 1e-12);
        assert!((d[0][1] - 0.5).abs() < 1e-12);
        assert!((d[1][0] + 1.0).abs() < 1e-12);
        assert!((d[1][1] - 3.0).abs() < 1e-12);

        let c = MapField::constant(Arc::clone(&g), chart, &[0.4, -0.1, 0.0]).unwrap();
        let d = c.differential(idx).unwrap();
        assert_eq!(d[0][0], 0.0);
        assert_eq!(d[1][1], 0.0);
    }

    #[test]
    fn differential_of_sine() {
        let g = box_grid_1d(0.01, 1.0, BoundaryKind::Dirichlet);
        let chart = TargetChart::euclidean(1);
        let f = MapField::from_fn(Arc::clone(&g), chart, |x| [x[0].sin(), 0.0, 0.0]).unwrap();
        let idx = node_at(&g, &ZERO_VEC);
        let d = f.differential(idx).unwrap();
        // central-difference error h^2/6 |cos| = 1.67e-5
        assert!((d[0][0] - 1.0).abs() < 1.7e-5);
    }

    #[test]
    fn energy_density_examples() {
        let g = box_grid_2d(0.1, 1.0);
        let e2 = TargetChart::euclidean(2);
        let ident = MapField::from_fn(Arc::clone(&g), e2, |x| [x[0], x[1], 0.0]).unwrap();
        let idx = g.active()[0];
        assert!((ident.energy_density(idx).unwrap() - 1.0).abs() < 1e-12);

        // 2D instanton: chart coordinates equal domain coordinates, so the
        // energy density is 4/(1+|x|^2)^2; at the origin: 4.
        let g = box_grid_2d(0.05, 2.0);
        let sphere = TargetChart::sphere(2, 1.0);
        let inst = MapField::from_fn(Arc::clone(&g), sphere, |x| [x[0], x[1], 0.0]).unwrap();
        let idx = node_at(&g, &ZERO_VEC);
        let e = inst.energy_density(idx).unwrap();
        assert!((e - 4.0).abs() < 5e-3, "e(0) = {e}");
    }

    #[test]
    fn tension_examples() {
        let g = box_grid_1d(0.05, 1.0, BoundaryKind::Dirichlet);
        let e1 = TargetChart::euclidean(1);
        let quad = MapField::from_fn(Arc::clone(&g), e1, |x| [x[0] * x[0], 0.0, 0.0]).unwrap();
        let idx = node_at(&g, &[0.25, 0.0, 0.0]);
        let tau = quad.tension_field(idx).unwrap();
        assert!((tau[0] - 2.0).abs() < 1e-10);

        let g2 = box_grid_2d(0.1, 1.0);
        let e2 = TargetChart::euclidean(2);
        let aff = MapField::from_fn(Arc::clone(&g2), e2, |x| {
            [x[0] - 2.0 * x[1], 3.0 * x[0], 0.0]
        })
        .unwrap();
        let tau = aff.tension_field(g2.active()[3]).unwrap();
        assert!(tau[0].abs() < 1e-12 && tau[1].abs() < 1e-12);
    }

    #[test]
    fn instanton_tension_vanishes_to_machine_precision() {
        // For the identity chart map into the stereographic sphere, the
        // discrete Laplacian of a linear map is exactly zero and the
        // Christoffel contraction with q = I cancels in two dimensions, so
        // the discrete tension is zero up to roundoff.
        let sphere = TargetChart::sphere(2, 1.0);
        let g = box_grid_2d(0.1, 2.0);
        let inst = MapField::from_fn(Arc::clone(&g), sphere, |x| [x[0], x[1], 0.0]).unwrap();
        let mut sup: f64 = 0.0;
        for &idx in g.active() {
            let tau = inst.tension_field(idx).unwrap();
            sup = sup.max(sphere.metric_norm(inst.value(idx), &tau));
        }
        assert!(sup < 1e-10, "sup tension {sup}");
    }

    #[test]
    fn tension_converges_at_second_order() {
        // Richardson ratio (T_h - T_{h/2})/(T_{h/2} - T_{h/4}) ~ 4 at a fixed
        // point for a map with nonvanishing curvature terms.
        let sphere = TargetChart::sphere(2, 1.0);
        // Probe point must lie on all three lattices.
        let probe = [0.5, 0.2, 0.0];
        let mut taus = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let g = box_grid_2d(h, 1.0);
            let f = MapField::from_fn(Arc::clone(&g), sphere, |x| {
                [(0.7 * x[0]).sin(), 0.3 * x[1] * x[1] + 0.2 * x[0], 0.0]
            })
            .unwrap();
            let tau = f.tension_field(node_at(&g, &probe)).unwrap();
            taus.push(tau);
        }
        for a in 0..2 {
            let d1 = taus[0][a] - taus[1][a];
            let d2 = taus[1][a] - taus[2][a];
            let ratio = d1 / d2;
            assert!(
                (3.5..=4.5).contains(&ratio),
                "component {a}: ratio {ratio}, taus {taus:?}"
            );
        }
    }

    #[test]
    fn residual_at_critical_point_vanishes() {
        let g = box_grid_1d(0.1, 1.0, BoundaryKind::Dirichlet);
        let e1 = TargetChart::euclidean(1);
        let f = MapField::constant(Arc::clone(&g), e1, &[1.0, 0.0, 0.0]).unwrap();
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        let res = f.residual(&dw).unwrap();
        assert!(res.sup < 1e-14);
    }

    #[test]
    fn kink_residual_small_on_fine_grid() {
        let g = box_grid_1d(0.01, 10.0, BoundaryKind::Dirichlet);
        let e1 = TargetChart::euclidean(1);
        let kink = MapField::from_fn(Arc::clone(&g), e1, |x| {
            [(x[0] / (2.0f64).sqrt()).tanh(), 0.0, 0.0]
        })
        .unwrap();
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        let res = kink.residual(&dw).unwrap();
        assert!(res.sup <= 1e-4, "sup residual {}", res.sup);
    }

    #[test]
    fn integrate_constant_over_disk() {
        let g = Arc::new(
            DomainGrid::new(
                2,
                Region::Ball { center: ZERO_VEC, radius: 1.0 },
                0.02,
                BoundaryKind::Dirichlet,
            )
            .unwrap(),
        );
        let chart = TargetChart::euclidean(1);
        let f = MapField::constant(Arc::clone(&g), chart, &ZERO_VEC).unwrap();
        let ones = vec![1.0; g.node_count()];
        let area = f.integrate(&ones, None).unwrap();
        assert!((area - std::f64::consts::PI).abs() < 2e-2);
        let zero = vec![0.0; g.node_count()];
        assert_eq!(f.integrate(&zero, None).unwrap(), 0.0);
        assert!(f.integrate(&ones, Some((&ZERO_VEC, 5.0))).is_err());
    }

    #[test]
    fn instanton_energy_in_ball() {
        let g = box_grid_2d(0.02, 2.0);
        let sphere = TargetChart::sphere(2, 1.0);
        let inst = MapField::from_fn(Arc::clone(&g), sphere, |x| [x[0], x[1], 0.0]).unwrap();
        let e = inst.node_scalar(|idx| inst.energy_density(idx)).unwrap();
        let got = inst.integrate(&e, Some((&ZERO_VEC, 1.0))).unwrap();
        let expect = 2.0 * std::f64::consts::PI; // 4 pi r^2/(1+r^2) at r = 1
        assert!((got - expect).abs() < 0.01 * expect, "got {got}");
    }

    #[test]
    fn surface_quadrature_of_constants() {
        let g = box_grid_2d(0.05, 2.0);
        let f = MapField::constant(Arc::clone(&g), TargetChart::euclidean(1), &ZERO_VEC).unwrap();
        let ones = vec![1.0; g.node_count()];
        let s = f.surface_integrate(&ones, &ZERO_VEC, 1.0).unwrap();
        assert!((s - 2.0 * std::f64::consts::PI).abs() < 1e-6);

        let g3 = Arc::new(
            DomainGrid::new(
                3,
                Region::Box { min: [-1.5, -1.5, -1.5], max: [1.5, 1.5, 1.5] },
                0.1,
                BoundaryKind::Dirichlet,
            )
            .unwrap(),
        );
        let f3 = MapField::constant(Arc::clone(&g3), TargetChart::euclidean(1), &ZERO_VEC).unwrap();
        let ones3 = vec![1.0; g3.node_count()];
        let s3 = f3.surface_integrate(&ones3, &ZERO_VEC, 1.0).unwrap();
        assert!((s3 - 4.0 * std::f64::consts::PI).abs() < 1e-4);
    }

    #[test]
    fn instanton_radial_flux_at_unit_circle() {
        let g = box_grid_2d(0.02, 2.0);
        let sphere = TargetChart::sphere(2, 1.0);
        let inst = MapField::from_fn(Arc::clone(&g), sphere, |x| [x[0], x[1], 0.0]).unwrap();
        let rad = inst
            .node_scalar(|idx| inst.radial_energy_density(idx, &ZERO_VEC))
            .unwrap();
        let got = inst.surface_integrate(&rad, &ZERO_VEC, 1.0).unwrap();
        // d/dr [4 pi r^2/(1+r^2)] = 8 pi r/(1+r^2)^2 -> 2 pi at r = 1
        let expect = 2.0 * std::f64::consts::PI;
        assert!((got - expect).abs() < 0.01 * expect, "got {got}");
    }

    #[test]
    fn snapshot_roundtrip() {
        let g = box_grid_2d(0.25, 1.0);
        let sphere = TargetChart::sphere(2, 1.0);
        let f = MapField::from_fn(Arc::clone(&g), sphere, |x| {
            [0.3 * x[0], -0.2 * x[1], 0.0]
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        f.save_csv(&path).unwrap();
        let back = MapField::load_csv(Arc::clone(&g), sphere, &path).unwrap();
        for idx in 0..g.node_count() {
            for a in 0..2 {
                assert_eq!(f.value(idx)[a], back.value(idx)[a]);
            }
        }
    }
}
