//! Point-particle dynamics on the target: integrate the forced geodesic
//! equation a = -Gamma(v, v) - grad V along a curve and audit conservation of
//! the total energy H = 1/2 g(v, v) + V.

use crate::error::{LabError, Result};
use crate::geometry::TargetChart;
use crate::linalg::{self, Vec3, ZERO_VEC};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy)]
pub struct GeodesicState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// True when the curve left the chart and integration stopped early.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct ConservationAudit {
    pub max_drift: f64,
    pub drift_curve: Vec<f64>,
}

/// a^c = -Gamma^c_ab v^a v^b - (grad V)^c.
pub fn acceleration(
    chart: &TargetChart,
    potential: &Potential,
    state: &GeodesicState,
) -> Result<Vec3> {
    chart.check_valid(&state.position)?;
    let gamma = chart.christoffel_apply(&state.position, &state.velocity, &state.velocity);
    let gv = potential.metric_gradient(chart, &state.position)?;
    let mut a = ZERO_VEC;
    for c in 0..chart.dim() {
        a[c] = -gamma[c] - gv[c];
    }
    Ok(a)
}

/// Total energy H = 1/2 g_y(v, v) + V(y).
pub fn total_energy(
    chart: &TargetChart,
    potential: &Potential,
    state: &GeodesicState,
) -> Result<f64> {
    let v2 = chart.metric_inner(&state.position, &state.velocity, &state.velocity);
    Ok(0.5 * v2 + potential.value(chart, &state.position)?)
}

fn derivative(
    chart: &TargetChart,
    potential: &Potential,
    y: &Vec3,
    v: &Vec3,
    t: f64,
) -> Result<(Vec3, Vec3)> {
    let s = GeodesicState { position: *y, velocity: *v, time: t };
    Ok((*v, acceleration(chart, potential, &s)?))
}

/// Classical fourth-order one-step integration of (y, v). If the curve
/// leaves the chart mid-flight the trajectory is returned truncated and
/// flagged rather than failing.
pub fn integrate_trajectory(
    chart: &TargetChart,
    potential: &Potential,
    initial: GeodesicState,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if dt <= 0.0 {
        return Err(LabError::Config(format!("dt must be positive, got {dt}")));
    }
    potential.check_compatible(chart)?;
    chart.check_valid(&initial.position)?;
    let m = chart.dim();
    let steps = (t_end / dt).round() as u64;
    let mut y = initial.position;
    let mut v = initial.velocity;
    let mut t = initial.time;
    let mut samples = Vec::with_capacity(steps as usize + 1);
    let mut truncated = false;
    let push = |samples: &mut Vec<TrajectorySample>, y: &Vec3, v: &Vec3, t: f64| -> Result<()> {
        let s = GeodesicState { position: *y, velocity: *v, time: t };
        samples.push(TrajectorySample {
            time: t,
            position: *y,
            velocity: *v,
            energy: total_energy(chart, potential, &s)?,
        });
        Ok(())
    };
    push(&mut samples, &y, &v, t)?;
    'outer: for _ in 0..steps {
        let step = (|| -> Result<(Vec3, Vec3)> {
            let (k1y, k1v) = derivative(chart, potential, &y, &v, t)?;
            let mut y2 = y;
            let mut v2 = v;
            linalg::axpy(&mut y2, 0.5 * dt, &k1y, m);
            linalg::axpy(&mut v2, 0.5 * dt, &k1v, m);
            let (k2y, k2v) = derivative(chart, potential, &y2, &v2, t + 0.5 * dt)?;
            let mut y3 = y;
            let mut v3 = v;
            linalg::axpy(&mut y3, 0.5 * dt, &k2y, m);
            linalg::axpy(&mut v3, 0.5 * dt, &k2v, m);
            let (k3y, k3v) = derivative(chart, potential, &y3, &v3, t + 0.5 * dt)?;
            let mut y4 = y;
            let mut v4 = v;
            linalg::axpy(&mut y4, dt, &k3y, m);
            linalg::axpy(&mut v4, dt, &k3v, m);
            let (k4y, k4v) = derivative(chart, potential, &y4, &v4, t + dt)?;
            let mut ny = y;
            let mut nv = v;
            for i in 0..m {
                ny[i] += dt / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
                nv[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
            chart.check_valid(&ny)?;
            Ok((ny, nv))
        })();
        match step {
            Ok((ny, nv)) => {
                y = ny;
                v = nv;
                t += dt;
                push(&mut samples, &y, &v, t)?;
            }
            Err(LabError::InvalidChartPoint { .. }) => {
                truncated = true;
                break 'outer;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { samples, truncated })
}

/// Max |H(t) - H(0)| over the trajectory, plus the drift time series.
pub fn conservation_audit(trajectory: &Trajectory) -> Result<ConservationAudit> {
    let first = trajectory
        .samples
        .first()
        .ok_or_else(|| LabError::Config("empty trajectory".into()))?;
    let h0 = first.energy;
    let drift_curve: Vec<f64> = trajectory
        .samples
        .iter()
        .map(|s| (s.energy - h0).abs())
        .collect();
    let max_drift = drift_curve.iter().cloned().fold(0.0, f64::max);
    Ok(ConservationAudit { max_drift, drift_curve })
}
