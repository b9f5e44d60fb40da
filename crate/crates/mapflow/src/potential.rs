//! Scalar potentials on the target, with metric gradient, covariant Hessian
//! and the constants entering the gradient-estimate and Liouville hypotheses.
//!
//! All built-ins except the double well are functions of the geodesic
//! distance rho from the chart center, which keeps gradients and Hessians in
//! closed form on the curved charts. The double well acts on the chart
//! coordinates directly and is restricted to flat targets.

use crate::error::{LabError, Result};
use crate::geometry::{GeometryKind, TargetChart};
use crate::linalg::{self, Mat3, Vec3, ZERO_MAT, ZERO_VEC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// V = c * rho^2
    QuadraticRadial { c: f64 },
    /// V = -1/4 (1 - |y|^2)^2, flat targets only
    DoubleWellRadial,
    /// V = c * cos(kappa * rho)
    CosineOfDistance { c: f64, kappa: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Potential {
    kind: PotentialKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Zero,
    NonPositive,
    Positive,
    Indefinite,
}

/// Constants probed over a region of the target, entering the hypotheses of
/// the closed-form bounds. `a_v` bounds the Hessian of V from above relative to the
/// metric (clamped at zero); `c3_min` is the structural constant of the
/// positive-potential gradient estimate, meaningful only when
/// `energy2_condition` holds.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateConstants {
    pub a_v: f64,
    pub concave: bool,
    pub sign: SignClass,
    pub energy2_condition: bool,
    pub c3_min: f64,
    pub hess_eig_max: f64,
    pub probes: usize,
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Self {
        Potential { kind }
    }

    pub fn zero() -> Self {
        Potential::new(PotentialKind::Zero)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn check_compatible(&self, chart: &TargetChart) -> Result<()> {
        if matches!(self.kind, PotentialKind::DoubleWellRadial)
            && chart.kind() != GeometryKind::Euclidean
        {
            return Err(LabError::Config(
                "double_well_radial requires a euclidean target".into(),
            ));
        }
        Ok(())
    }

    /// (f(rho), f'(rho), f''(rho)) for the distance-radial kinds.
    fn radial_profile(&self, rho: f64) -> (f64, f64, f64) {
        match self.kind {
            PotentialKind::Zero => (0.0, 0.0, 0.0),
            PotentialKind::QuadraticRadial { c } => (c * rho * rho, 2.0 * c * rho, 2.0 * c),
            PotentialKind::CosineOfDistance { c, kappa } => (
                c * (kappa * rho).cos(),
                -c * kappa * (kappa * rho).sin(),
                -c * kappa * kappa * (kappa * rho).cos(),
            ),
            PotentialKind::DoubleWellRadial => unreachable!("double well is not distance-radial"),
        }
    }

    pub fn value(&self, chart: &TargetChart, y: &Vec3) -> Result<f64> {
        self.check_compatible(chart)?;
        chart.check_valid(y)?;
        match self.kind {
            PotentialKind::Zero => Ok(0.0),
            PotentialKind::DoubleWellRadial => {
                let s = linalg::dot(y, y, chart.dim());
                Ok(-0.25 * (1.0 - s) * (1.0 - s))
            }
            _ => {
                let rho = chart.distance_from_center(y)?;
                Ok(self.radial_profile(rho).0)
            }
        }
    }

    /// Index-raised differential g^ab d_b V.
    pub fn metric_gradient(&self, chart: &TargetChart, y: &Vec3) -> Result<Vec3> {
        self.check_compatible(chart)?;
        chart.check_valid(y)?;
        let m = chart.dim();
        match self.kind {
            PotentialKind::Zero => Ok(ZERO_VEC),
            PotentialKind::DoubleWellRadial => {
                let s = linalg::dot(y, y, m);
                Ok(linalg::scale(y, 1.0 - s, m))
            }
            _ => {
                let r = linalg::norm(y, m);
                let lambda = chart.conformal_factor(y);
                let alpha = if r < 1e-10 {
                    // f'(rho)/(r lambda) -> f''(0) as r -> 0
                    self.radial_profile(0.0).2
                } else {
                    let rho = chart.distance_from_center(y)?;
                    self.radial_profile(rho).1 / (r * lambda)
                };
                Ok(linalg::scale(y, alpha, m))
            }
        }
    }

    /// |grad V| measured with the target metric.
    pub fn gradient_norm(&self, chart: &TargetChart, y: &Vec3) -> Result<f64> {
        let grad = self.metric_gradient(chart, y)?;
        Ok(chart.metric_norm(y, &grad))
    }

    /// Covariant Hessian Hess V_bc = d_b d_c V - Gamma^a_bc d_a V in chart
    /// coordinates; symmetric.
    pub fn covariant_hessian(&self, chart: &TargetChart, y: &Vec3) -> Result<Mat3> {
        self.check_compatible(chart)?;
        chart.check_valid(y)?;
        let m = chart.dim();
        match self.kind {
            PotentialKind::Zero => Ok(ZERO_MAT),
            PotentialKind::DoubleWellRadial => {
                let s = linalg::dot(y, y, m);
                let mut hess = ZERO_MAT;
                for b in 0..m {
                    for c in 0..m {
                        hess[b][c] = -2.0 * y[b] * y[c];
                        if b == c {
                            hess[b][c] += 1.0 - s;
                        }
                    }
                }
                Ok(hess)
            }
            _ => {
                let r = linalg::norm(y, m);
                let lambda = chart.conformal_factor(y);
                if r < 1e-10 {
                    let f2 = self.radial_profile(0.0).2;
                    let mut hess = ZERO_MAT;
                    for b in 0..m {
                        hess[b][b] = f2 * lambda * lambda;
                    }
                    return Ok(hess);
                }
                let rho = chart.distance_from_center(y)?;
                let (_, f1, f2) = self.radial_profile(rho);
                let dl = conformal_factor_radial_derivative(chart, y, r);
                // dV covector: d_b V = beta y_b with beta = f' lambda / r
                let beta = f1 * lambda / r;
                // coordinate second partials
                let radial = f2 * lambda * lambda + f1 * dl - f1 * lambda / r;
                let mut hess = ZERO_MAT;
                for b in 0..m {
                    for c in 0..m {
                        hess[b][c] = y[b] * y[c] / (r * r) * radial;
                        if b == c {
                            hess[b][c] += beta;
                        }
                    }
                }
                // Christoffel correction Gamma^a_bc d_a V
                let dv = linalg::scale(y, beta, m);
                let w = log_factor_gradient(chart, y);
                let wdv = linalg::dot(&w, &dv, m);
                for b in 0..m {
                    for c in 0..m {
                        hess[b][c] -= w[c] * dv[b] + w[b] * dv[c];
                        if b == c {
                            hess[b][c] += wdv;
                        }
                    }
                }
                Ok(hess)
            }
        }
    }

    /// Probe the estimate constants over the geodesic ball of radius
    /// `probe_radius` around the chart center. Sampling is deterministic.
    pub fn estimate_constants(
        &self,
        chart: &TargetChart,
        probe_radius: f64,
    ) -> Result<EstimateConstants> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
        let m = chart.dim();
        let mut points = Vec::with_capacity(501);
        points.push(ZERO_VEC);
        for _ in 0..500 {
            let mut dir = ZERO_VEC;
            loop {
                for item in dir.iter_mut().take(m) {
                    *item = rng.random_range(-1.0..1.0);
                }
                if linalg::norm(&dir, m) > 1e-3 {
                    break;
                }
            }
            let rho = rng.random_range(0.0..probe_radius);
            let r = chart.chart_radius_for_distance(rho);
            let n = linalg::norm(&dir, m);
            points.push(linalg::scale(&dir, r / n, m));
        }
        self.constants_over_points(chart, points.iter())
    }

    /// Same probing, but over an explicit set of chart points (typically the
    /// realized image of a field).
    pub fn constants_over_points<'a>(
        &self,
        chart: &TargetChart,
        points: impl Iterator<Item = &'a Vec3>,
    ) -> Result<EstimateConstants> {
        let m = chart.dim();
        let b = chart.curvature_bound();
        let mut hess_eig_max = f64::NEG_INFINITY;
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        let mut energy2 = true;
        let mut c3_min = f64::INFINITY;
        let mut count = 0usize;
        for y in points {
            let v = self.value(chart, y)?;
            let hess = self.covariant_hessian(chart, y)?;
            let l2 = chart.conformal_factor(y).powi(2);
            // generalized eigenvalues of (Hess, g) for the conformal metric
            let ev = linalg::sym_eigvals(&hess, m);
            let top = ev[m - 1] / l2;
            hess_eig_max = hess_eig_max.max(top);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
            // -Hess V > B V g  <=>  top + B v < 0
            if !(v > 0.0 && top + b * v < 0.0) {
                energy2 = false;
            }
            if v > 0.0 {
                c3_min = c3_min.min(-2.0 * b - 2.0 * top / v);
            }
            count += 1;
        }
        if count == 0 {
            return Err(LabError::Config("no probe points supplied".into()));
        }
        let sign = if vmin.abs() <= 1e-13 && vmax.abs() <= 1e-13 {
            SignClass::Zero
        } else if vmin > 0.0 {
            SignClass::Positive
        } else if vmax <= 1e-13 {
            SignClass::NonPositive
        } else {
            SignClass::Indefinite
        };
        Ok(EstimateConstants {
            a_v: hess_eig_max.max(0.0),
            concave: hess_eig_max <= 1e-12,
            sign,
            energy2_condition: energy2,
            c3_min: if energy2 { c3_min } else { f64::INFINITY },
            hess_eig_max,
            probes: count,
        })
    }
}

fn conformal_factor_radial_derivative(chart: &TargetChart, y: &Vec3, r: f64) -> f64 {
    let lambda = chart.conformal_factor(y);
    let k2 = chart.curvature_scale().powi(2);
    match chart.kind() {
        GeometryKind::Euclidean => 0.0,
        GeometryKind::SphereStereographic => -lambda * lambda * k2 * r,
        GeometryKind::HyperbolicPoincare => lambda * lambda * k2 * r,
    }
}

fn log_factor_gradient(chart: &TargetChart, y: &Vec3) -> Vec3 {
    let c = match chart.kind() {
        GeometryKind::Euclidean => 0.0,
        GeometryKind::SphereStereographic => {
            -chart.curvature_scale().powi(2) * chart.conformal_factor(y)
        }
        GeometryKind::HyperbolicPoincare => {
            chart.curvature_scale().powi(2) * chart.conformal_factor(y)
        }
    };
    linalg::scale(y, c, chart.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn value_examples() {
        let e1 = TargetChart::euclidean(1);
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        assert!((dw.value(&e1, &ZERO_VEC).unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(dw.value(&e1, &[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let z = Potential::zero();
        assert_eq!(z.value(&TargetChart::sphere(2, 1.0), &[0.3, 0.1, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn double_well_rejects_curved_targets() {
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        let s = TargetChart::sphere(2, 1.0);
        assert!(matches!(dw.value(&s, &ZERO_VEC), Err(LabError::Config(_))));
    }

    #[test]
    fn gradient_examples() {
        let e1 = TargetChart::euclidean(1);
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        let g = dw.metric_gradient(&e1, &[0.5, 0.0, 0.0]).unwrap();
        assert!((g[0] - 3.0 / 8.0).abs() < 1e-15);

        let e2 = TargetChart::euclidean(2);
        let q = Potential::new(PotentialKind::QuadraticRadial { c: 0.5 });
        let g = q.metric_gradient(&e2, &[1.0, 2.0, 0.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_examples() {
        let e2 = TargetChart::euclidean(2);
        let q = Potential::new(PotentialKind::QuadraticRadial { c: 0.5 });
        let h = q.covariant_hessian(&e2, &[0.7, -0.4, 0.0]).unwrap();
        for b in 0..2 {
            for c in 0..2 {
                let expect = if b == c { 1.0 } else { 0.0 };
                assert!((h[b][c] - expect).abs() < 1e-12, "{h:?}");
            }
        }

        // Hess cos(rho) = -cos(rho) g at the chart center of the unit sphere
        let s = TargetChart::sphere(2, 1.0);
        let cosd = Potential::new(PotentialKind::CosineOfDistance { c: 1.0, kappa: 1.0 });
        let h = cosd.covariant_hessian(&s, &ZERO_VEC).unwrap();
        assert!((h[0][0] + 4.0).abs() < 1e-12);
        assert!((h[1][1] + 4.0).abs() < 1e-12);
        assert!(h[0][1].abs() < 1e-12);
    }

    fn test_cases() -> Vec<(Potential, TargetChart)> {
        vec![
            (Potential::new(PotentialKind::QuadraticRadial { c: 0.7 }), TargetChart::euclidean(2)),
            (Potential::new(PotentialKind::QuadraticRadial { c: -0.5 }), TargetChart::sphere(2, 1.0)),
            (Potential::new(PotentialKind::QuadraticRadial { c: 1.3 }), TargetChart::hyperbolic(3, 1.0)),
            (Potential::new(PotentialKind::CosineOfDistance { c: 0.8, kappa: 1.5 }), TargetChart::sphere(3, 1.0)),
            (Potential::new(PotentialKind::CosineOfDistance { c: -1.1, kappa: 0.7 }), TargetChart::hyperbolic(2, 1.0)),
            (Potential::new(PotentialKind::DoubleWellRadial), TargetChart::euclidean(3)),
        ]
    }

    fn random_point(chart: &TargetChart, rng: &mut impl Rng) -> Vec3 {
        let cap = match chart.kind() {
            GeometryKind::HyperbolicPoincare => 0.8 / chart.curvature_scale(),
            _ => 1.5,
        };
        loop {
            let mut y = ZERO_VEC;
            for item in y.iter_mut().take(chart.dim()) {
                *item = rng.random_range(-cap..cap);
            }
            let r = linalg::norm(&y, chart.dim());
            if r > 0.05 && r < cap {
                return y;
            }
        }
    }

    /// Gradient and Hessian must agree with central differences of the value.
    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (pot, chart) in test_cases() {
            let m = chart.dim();
            for _ in 0..100 {
                let y = random_point(&chart, &mut rng);
                // coordinate gradient d_a V vs FD
                let grad = pot.metric_gradient(&chart, &y).unwrap();
                let l2 = chart.conformal_factor(&y).powi(2);
                for a in 0..m {
                    let mut yp = y;
                    let mut ym = y;
                    yp[a] += h;
                    ym[a] -= h;
                    let fd =
                        (pot.value(&chart, &yp).unwrap() - pot.value(&chart, &ym).unwrap()) / (2.0 * h);
                    let exact = l2 * grad[a];
                    assert!(
                        (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                        "gradient mismatch {exact} vs {fd}"
                    );
                }
                // covariant Hessian vs FD second partials + analytic correction
                let hess = pot.covariant_hessian(&chart, &y).unwrap();
                let gamma = chart.christoffel_at(&y).unwrap();
                for b in 0..m {
                    for c in 0..m {
                        let mut ypp = y;
                        let mut ypm = y;
                        let mut ymp = y;
                        let mut ymm = y;
                        ypp[b] += h;
                        ypp[c] += h;
                        ypm[b] += h;
                        ypm[c] -= h;
                        ymp[b] -= h;
                        ymp[c] += h;
                        ymm[b] -= h;
                        ymm[c] -= h;
                        let d2 = (pot.value(&chart, &ypp).unwrap()
                            - pot.value(&chart, &ypm).unwrap()
                            - pot.value(&chart, &ymp).unwrap()
                            + pot.value(&chart, &ymm).unwrap())
                            / (4.0 * h * h);
                        let mut corr = 0.0;
                        for a in 0..m {
                            corr += gamma[a][b][c] * l2 * pot.metric_gradient(&chart, &y).unwrap()[a];
                        }
                        let fd = d2 - corr;
                        assert!(
                            (hess[b][c] - fd).abs() <= 2e-5 * hess[b][c].abs().max(1.0),
                            "hessian mismatch at {y:?}: {} vs {}",
                            hess[b][c],
                            fd
                        );
                        assert!((hess[b][c] - hess[c][b]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn estimate_constants_examples() {
        let e2 = TargetChart::euclidean(2);
        let z = Potential::zero();
        let tc = z.estimate_constants(&e2, 1.0).unwrap();
        assert_eq!(tc.a_v, 0.0);
        assert!(tc.concave);
        assert_eq!(tc.sign, SignClass::Zero);

        let q = Potential::new(PotentialKind::QuadraticRadial { c: -0.5 });
        let tc = q.estimate_constants(&e2, 1.0).unwrap();
        assert!(tc.concave);
        assert_eq!(tc.a_v, 0.0);
        assert!((tc.hess_eig_max + 1.0).abs() < 1e-9);

        let e1 = TargetChart::euclidean(1);
        let dw = Potential::new(PotentialKind::DoubleWellRadial);
        let tc = dw.estimate_constants(&e1, 1.0).unwrap();
        assert!(!tc.concave);
    }

    #[test]
    fn energy2_condition_on_hyperbolic_cosine() {
        // B = -1 and V = cos(rho) near the center: V > 0 and
        // -Hess V = cos(rho) g > B V g holds strictly.
        let hchart = TargetChart::hyperbolic(2, 1.0);
        let cosd = Potential::new(PotentialKind::CosineOfDistance { c: 1.0, kappa: 1.0 });
        let tc = cosd.estimate_constants(&hchart, 0.5).unwrap();
        assert!(tc.energy2_condition);
        assert!(tc.c3_min > 0.0);
    }
}
