//! Declarative experiment configuration: a flat TOML schema describing the
//! domain grid, target chart, potential, initial data, flow parameters,
//! requested diagnostics, and the assertions whose verdicts make up the
//! experiment summary.

use crate::error::{LabError, Result};
use crate::field::MapField;
use crate::flow::FlowParams;
use crate::geometry::{GeometryKind, TargetChart};
use crate::grid::{BoundaryKind, DomainGrid, Region};
use crate::linalg::{self, Vec3, ZERO_VEC};
use crate::potential::{Potential, PotentialKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Mandatory when the initial data is random.
    pub seed: Option<u64>,
    pub domain: DomainConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub refine: Option<RefineConfig>,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<AssertionConfig>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub h: f64,
    pub boundary: BoundaryKind,
    pub region: RegionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    Box { min: Vec<f64>, max: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub geometry: GeometryKind,
    pub dim: usize,
    #[serde(default = "default_one")]
    pub curvature_scale: f64,
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    QuadraticRadial { c: f64 },
    DoubleWellRadial,
    CosineOfDistance { c: f64, kappa: f64 },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Zero
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// phi == value.
    Constant { value: Vec<f64> },
    /// y^a = scale * x^a on the shared components.
    Linear { scale: f64 },
    /// y^a = scales[a] * x^a; anisotropic variant (a conformal linear map
    /// into a stereographic chart is discretely exact, so unequal scales are
    /// needed when the flow should have actual work to do).
    LinearAnisotropic { scales: Vec<f64> },
    /// Scalar tanh(x / sqrt 2) profile.
    Kink,
    /// Identity chart map (the degree-one conformal map for sphere targets).
    Instanton,
    /// Fractional-linear variant y = z / (1 - q z) in complex chart
    /// coordinates; a curved-image harmonic representative with nonzero
    /// discrete tension, used for refinement studies.
    InstantonMoebius { q: f64 },
    /// x / |x| into the round sphere, in stereographic coordinates.
    Hedgehog,
    /// Seeded, 3-point-smoothed uniform noise around `value`.
    SmoothedNoise { amplitude: f64, value: Option<Vec<f64>> },
    /// Snapshot produced by a previous run.
    FromCsv { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub enabled: bool,
    pub tol: f64,
    pub max_steps: u64,
    pub dt_safety: f64,
    pub log_every: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let p = FlowParams::default();
        FlowConfig {
            enabled: false,
            tol: p.tol,
            max_steps: p.max_steps,
            dt_safety: p.dt_safety,
            log_every: p.log_every,
        }
    }
}

impl FlowConfig {
    pub fn params(&self) -> FlowParams {
        FlowParams {
            dt_safety: self.dt_safety,
            tol: self.tol,
            max_steps: self.max_steps,
            log_every: self.log_every,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub p_function: bool,
    pub bochner: bool,
    pub stress_energy: bool,
    pub p_inequality: bool,
    pub liouville_integrals: bool,
    /// Whether the caller vouches for the whole-space stationarity
    /// hypotheses behind the integral inequality verdict.
    pub liouville_whole_space: bool,
    pub monotonicity_radii: Vec<f64>,
    pub monotonicity_center: Option<Vec<f64>>,
    /// Cap parameters shared by the improved monotonicity bound and the
    /// F-function report.
    pub cap: Option<CapConfig>,
    pub ball_bound: Option<BallBoundConfig>,
    pub energy2_bound: Option<Energy2BoundConfig>,
    pub f_function: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapConfig {
    pub d: f64,
    pub cap_radius: f64,
    #[serde(default)]
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallBoundConfig {
    pub a: f64,
    #[serde(default)]
    pub x0: Vec<f64>,
    pub d: f64,
    pub cap_radius: f64,
    #[serde(default)]
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Energy2BoundConfig {
    pub a: f64,
    #[serde(default)]
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// Refuse grids above this many nodes.
    #[serde(default = "default_node_cap")]
    pub node_cap: usize,
    /// Error metrics tracked across levels.
    pub metrics: Vec<RefineMetric>,
    pub order_min: f64,
    pub order_max: f64,
}

fn default_node_cap() -> usize {
    4_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMetric {
    ResidualSup,
    BochnerSup,
    StressDivSup,
    PMax,
}

// No deny_unknown_fields here: it cannot be combined with serde's flatten.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssertionConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: AssertionKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssertionKind {
    Converged,
    ResidualBelow { value: f64 },
    SupDphiBelow { value: f64 },
    /// sup |d phi| <= factor * flow tolerance.
    SupDphiBelowTolTimes { factor: f64 },
    EnergyBetween { min: f64, max: f64 },
    EnergyDissipation,
    PMaxBelow { value: f64 },
    BochnerSupBelow { value: f64 },
    StressEntryBelow { value: f64 },
    StressDivBelow { value: f64 },
    /// dM/dr >= -eps_quad at every interior table row (V <= 0 regime).
    MonotonicityNonnegative,
    /// M(r) equals `value` within `rel_tol`, relative.
    MonotonicityValue { r: f64, value: f64, rel_tol: f64 },
    /// Boundary-flux identity lhs = rhs within `rel_tol` (relative to the
    /// larger magnitude) at the listed radii, or at all rows when empty.
    IdentityMatch { rel_tol: f64, radii: Vec<f64> },
    BallBoundPass,
    Energy2BoundPass,
    /// Both Liouville integrals below `value` in magnitude.
    LiouvilleIntegralsBelow { value: f64 },
    /// Mean of the final field lies within `value` of the chart origin
    /// (the critical point of the built-in radial potentials).
    LimitNearOrigin { value: f64 },
    /// Final field within `value` (sup-norm, chart components) of the named
    /// analytic profile.
    ProfileErrorBelow { profile: ProfileKind, value: f64 },
    /// Constancy verdict for the flow on a compact flat domain into a
    /// nonpositively curved target with concave potential: not applicable
    /// unless those hypotheses hold; otherwise requires
    /// sup |d phi| <= sup_factor * tol and the limit to sit within
    /// `limit_tolerance` of the chart origin (the potential's critical point).
    LiouvilleFlow { sup_factor: f64, limit_tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Kink,
    Instanton,
    Hedgehog,
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(LabError::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if !(1..=3).contains(&self.domain.dim) || !(1..=3).contains(&self.target.dim) {
            return Err(LabError::Config("dimensions must be between 1 and 3".into()));
        }
        if matches!(self.initial, InitialConfig::SmoothedNoise { .. }) && self.seed.is_none() {
            return Err(LabError::Config(
                "random initial data requires an explicit seed".into(),
            ));
        }
        if let Some(b) = &self.diagnostics.ball_bound {
            let limit = std::f64::consts::FRAC_PI_2 / b.d.sqrt();
            if b.cap_radius >= limit {
                return Err(LabError::Config(format!(
                    "cap radius {} must be below pi/(2 sqrt d) = {limit}",
                    b.cap_radius
                )));
            }
        }
        if let Some(c) = &self.diagnostics.cap {
            let limit = std::f64::consts::FRAC_PI_2 / c.d.sqrt();
            if c.cap_radius >= limit {
                return Err(LabError::Config(format!(
                    "cap radius {} must be below pi/(2 sqrt d) = {limit}",
                    c.cap_radius
                )));
            }
        }
        if let Some(r) = &self.refine {
            if r.order_min >= r.order_max {
                return Err(LabError::Config("refine order window is empty".into()));
            }
        }
        Ok(())
    }

    pub fn build_chart(&self) -> Result<TargetChart> {
        TargetChart::new(self.target.geometry, self.target.dim, self.target.curvature_scale)
    }

    pub fn build_potential(&self) -> Potential {
        Potential::new(match self.potential {
            PotentialConfig::Zero => PotentialKind::Zero,
            PotentialConfig::QuadraticRadial { c } => PotentialKind::QuadraticRadial { c },
            PotentialConfig::DoubleWellRadial => PotentialKind::DoubleWellRadial,
            PotentialConfig::CosineOfDistance { c, kappa } => {
                PotentialKind::CosineOfDistance { c, kappa }
            }
        })
    }

    pub fn build_grid(&self) -> Result<Arc<DomainGrid>> {
        self.build_grid_with_spacing(self.domain.h)
    }

    pub fn build_grid_with_spacing(&self, h: f64) -> Result<Arc<DomainGrid>> {
        let region = match &self.domain.region {
            RegionConfig::Box { min, max } => Region::Box {
                min: linalg::from_slice(min),
                max: linalg::from_slice(max),
            },
            RegionConfig::Ball { center, radius } => Region::Ball {
                center: linalg::from_slice(center),
                radius: *radius,
            },
            RegionConfig::Annulus { center, inner, outer } => Region::Annulus {
                center: linalg::from_slice(center),
                inner: *inner,
                outer: *outer,
            },
        };
        Ok(Arc::new(DomainGrid::new(
            self.domain.dim,
            region,
            h,
            self.domain.boundary,
        )?))
    }

    pub fn build_initial(&self, grid: Arc<DomainGrid>, chart: TargetChart) -> Result<MapField> {
        build_profile(&self.initial, self.seed, grid, chart)
    }
}

/// Analytic profile evaluated at a point, shared between initial data and
/// profile-error assertions.
pub fn profile_value(profile: ProfileKind, chart: &TargetChart, x: &Vec3) -> Vec3 {
    match profile {
        ProfileKind::Kink => [(x[0] / 2.0f64.sqrt()).tanh(), 0.0, 0.0],
        ProfileKind::Instanton => *x,
        ProfileKind::Hedgehog => {
            let r = linalg::norm(x, 3);
            if r < 1e-300 {
                return ZERO_VEC;
            }
            let u = linalg::scale(x, 1.0 / r, 3);
            // Angle from the chart center direction (0, 0, 1), mapped to the
            // chart radius for the corresponding geodesic distance.
            let theta = u[2].clamp(-1.0, 1.0).acos();
            let k = chart.curvature_scale();
            let planar = (u[0] * u[0] + u[1] * u[1]).sqrt();
            if planar < 1e-300 {
                return ZERO_VEC;
            }
            let cr = chart.chart_radius_for_distance(theta / k);
            [cr * u[0] / planar, cr * u[1] / planar, 0.0]
        }
    }
}

fn build_profile(
    initial: &InitialConfig,
    seed: Option<u64>,
    grid: Arc<DomainGrid>,
    chart: TargetChart,
) -> Result<MapField> {
    match initial {
        InitialConfig::Constant { value } => {
            let y = linalg::from_slice(value);
            MapField::constant(grid, chart, &y)
        }
        InitialConfig::Linear { scale } => {
            let s = *scale;
            let shared = grid.dim().min(chart.dim());
            MapField::from_fn(grid, chart, move |x| {
                let mut y = ZERO_VEC;
                y[..shared].copy_from_slice(&x[..shared]);
                linalg::scale(&y, s, shared)
            })
        }
        InitialConfig::LinearAnisotropic { scales } => {
            let scales = linalg::from_slice(scales);
            let shared = grid.dim().min(chart.dim());
            MapField::from_fn(grid, chart, move |x| {
                let mut y = ZERO_VEC;
                for a in 0..shared {
                    y[a] = scales[a] * x[a];
                }
                y
            })
        }
        InitialConfig::Kink => {
            MapField::from_fn(grid, chart, |x| profile_value(ProfileKind::Kink, &chart, x))
        }
        InitialConfig::Instanton => {
            MapField::from_fn(grid, chart, |x| profile_value(ProfileKind::Instanton, &chart, x))
        }
        InitialConfig::InstantonMoebius { q } => {
            let q = *q;
            MapField::from_fn(grid, chart, move |x| {
                // y = z / (1 - q z) with z = x0 + i x1.
                let (zr, zi) = (x[0], x[1]);
                let (dr, di) = (1.0 - q * zr, -q * zi);
                let denom = dr * dr + di * di;
                [(zr * dr + zi * di) / denom, (zi * dr - zr * di) / denom, 0.0]
            })
        }
        InitialConfig::Hedgehog => {
            MapField::from_fn(grid, chart, |x| profile_value(ProfileKind::Hedgehog, &chart, x))
        }
        InitialConfig::SmoothedNoise { amplitude, value } => {
            let seed = seed.ok_or_else(|| {
                LabError::Config("random initial data requires an explicit seed".into())
            })?;
            let base = value
                .as_ref()
                .map(|v| linalg::from_slice(v))
                .unwrap_or(ZERO_VEC);
            smoothed_noise_field(grid, chart, seed, *amplitude, &base)
        }
        InitialConfig::FromCsv { path } => {
            MapField::load_csv(grid, chart, std::path::Path::new(path))
        }
    }
}

/// Uniform noise in [-amplitude, amplitude] per chart component, smoothed by
/// one (1/4, 1/2, 1/4) pass along every axis, added to `base`.
fn smoothed_noise_field(
    grid: Arc<DomainGrid>,
    chart: TargetChart,
    seed: u64,
    amplitude: f64,
    base: &Vec3,
) -> Result<MapField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = chart.dim();
    let mut raw: Vec<Vec3> = Vec::with_capacity(grid.node_count());
    for _ in 0..grid.node_count() {
        let mut y = ZERO_VEC;
        for v in y.iter_mut().take(m) {
            *v = rng.random_range(-1.0..1.0);
        }
        raw.push(y);
    }
    for axis in 0..grid.dim() {
        let mut smooth = raw.clone();
        for (idx, out) in smooth.iter_mut().enumerate() {
            let p = grid.shift(idx, axis, 1).unwrap_or(idx);
            let q = grid.shift(idx, axis, -1).unwrap_or(idx);
            for a in 0..m {
                out[a] = 0.25 * raw[p][a] + 0.5 * raw[idx][a] + 0.25 * raw[q][a];
            }
        }
        raw = smooth;
    }
    let values: Vec<Vec3> = raw
        .iter()
        .map(|y| {
            let mut v = *base;
            linalg::axpy(&mut v, amplitude, y, m);
            v
        })
        .collect();
    let grid2 = Arc::clone(&grid);
    let template = MapField::constant(grid, chart, base)?;
    let field = template.with_values(values);
    for idx in 0..grid2.node_count() {
        if grid2.status(idx) != crate::grid::NodeStatus::Exterior {
            chart.check_valid(field.value(idx))?;
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [domain]
        dim = 1
        h = 0.1
        boundary = "dirichlet"
        region = { kind = "box", min = [-1.0], max = [1.0] }

        [target]
        geometry = "euclidean"
        dim = 1

        [initial]
        kind = "constant"
        value = [0.0]
    "#;

    #[test]
    fn minimal_config_parses_and_builds() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        let grid = cfg.build_grid().unwrap();
        let chart = cfg.build_chart().unwrap();
        let field = cfg.build_initial(grid, chart).unwrap();
        assert_eq!(field.grid().dim(), 1);
    }

    #[test]
    fn noise_requires_seed() {
        let text = MINIMAL.replace(
            "kind = \"constant\"\n        value = [0.0]",
            "kind = \"smoothed_noise\"\n        amplitude = 0.1",
        );
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(matches!(cfg.validate(), Err(LabError::Config(_))));
    }

    #[test]
    fn cap_radius_gate_rejects_large_caps() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.diagnostics.ball_bound = Some(BallBoundConfig {
            a: 4.0,
            x0: vec![0.0],
            d: 2.0,
            cap_radius: 1.2,
            y0: vec![0.0],
        });
        assert!(matches!(cfg.validate(), Err(LabError::Config(_))));
    }

    #[test]
    fn smoothed_noise_is_deterministic_and_smooth() {
        let text = format!("seed = 7\n{}", MINIMAL.replace(
            "kind = \"constant\"\n        value = [0.0]",
            "kind = \"smoothed_noise\"\n        amplitude = 0.1",
        ));
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        cfg.validate().unwrap();
        let chart = cfg.build_chart().unwrap();
        let f1 = cfg.build_initial(cfg.build_grid().unwrap(), chart).unwrap();
        let f2 = cfg.build_initial(cfg.build_grid().unwrap(), chart).unwrap();
        for idx in 0..f1.grid().node_count() {
            assert_eq!(f1.value(idx)[0], f2.value(idx)[0]);
        }
        let sup: f64 = (0..f1.grid().node_count())
            .map(|i| f1.value(i)[0].abs())
            .fold(0.0, f64::max);
        assert!(sup > 0.0 && sup <= 0.1);
    }

    #[test]
    fn hedgehog_profile_lands_on_the_unit_sphere_image() {
        let chart = TargetChart::sphere(2, 1.0);
        // Equatorial point x = (1, 0, 0) maps to chart radius tan(pi/4) = 1.
        let y = profile_value(ProfileKind::Hedgehog, &chart, &[1.0, 0.0, 0.0]);
        assert!((linalg::norm(&y, 2) - 1.0).abs() < 1e-12);
        // North pole direction maps to the chart origin.
        let y = profile_value(ProfileKind::Hedgehog, &chart, &[0.0, 0.0, 2.0]);
        assert!(linalg::norm(&y, 2) < 1e-12);
    }
}
