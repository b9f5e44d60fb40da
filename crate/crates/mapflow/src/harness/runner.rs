//! Experiment execution: runs a configured experiment end to end (initial
//! data, optional gradient flow, diagnostics, assertions) and emits the
//! artifact set — report.json, CSV tables, and a one-line-per-assertion
//! summary. Also drives refinement studies and suites of configs.

use crate::diagnostics::{
    self, BallBoundParams, BochnerReport, BoundCheck, CapParams, CheckStatus, Energy2Params,
    FFunctionReport, LiouvilleIntegrals, MonotonicityTable, PFieldReport, PInequalityLog,
    StressEnergyReport,
};
use crate::error::{LabError, Result};
use crate::field::MapField;
use crate::flow::{self, FlowSample};
use crate::grid::{BoundaryKind, NodeStatus};
use crate::harness::config::{
    AssertionKind, ExperimentConfig, ProfileKind, RefineMetric, profile_value,
};
use crate::linalg::{self, ZERO_VEC};
use crate::potential::Potential;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Report structures

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub dim: usize,
    pub h: f64,
    pub node_count: usize,
    pub active_count: usize,
    pub boundary: BoundaryKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub converged: bool,
    pub steps: u64,
    pub time: f64,
    pub dt_final: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionResult {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl AssertionResult {
    fn summary_line(&self) -> String {
        let tag = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "NOT-APPLICABLE",
            CheckStatus::Unconverged => "UNCONVERGED",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub grid: GridSummary,
    pub flow: Option<FlowSummary>,
    pub energy: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub sup_dphi: f64,
    pub p_function: Option<PFieldReport>,
    pub bochner: Option<BochnerReport>,
    pub stress_energy: Option<StressEnergyReport>,
    pub monotonicity: Option<MonotonicityTable>,
    pub ball_bound: Option<BoundCheck>,
    pub energy2_bound: Option<BoundCheck>,
    pub liouville: Option<LiouvilleIntegrals>,
    pub p_inequality: Option<PInequalityLog>,
    pub f_function: Option<FFunctionReport>,
    pub assertions: Vec<AssertionResult>,
}

pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub field: MapField,
    pub history: Vec<FlowSample>,
    pub summary: String,
    pub any_fail: bool,
}

// ---------------------------------------------------------------------------
// Running one experiment

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let chart = cfg.build_chart()?;
    let potential = cfg.build_potential();
    potential.check_compatible(&chart)?;
    let field = cfg.build_initial(grid, chart)?;

    let outcome = run_on_field(cfg, field, &potential)?;
    if let Some(dir) = out_dir {
        write_artifacts(cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

/// Core pipeline on an already-built initial field (shared with refinement
/// levels, which rebuild the grid at halved spacings).
fn run_on_field(
    cfg: &ExperimentConfig,
    field: MapField,
    potential: &Potential,
) -> Result<ExperimentOutcome> {
    let mut history = Vec::new();
    let mut flow_summary = None;
    let mut converged_gate = true;

    let field = if cfg.flow.enabled {
        let out = flow::run_to_convergence(field, potential, &cfg.flow.params())?;
        converged_gate = out.converged;
        flow_summary = Some(FlowSummary {
            converged: out.converged,
            steps: out.steps,
            time: out.time,
            dt_final: out.dt_final,
        });
        history = out.history;
        out.field
    } else {
        field
    };

    let grid = field.grid();
    let residual = field.residual(potential)?;
    let energy = flow::energy(&field, potential)?;
    let sup_dphi = field.sup_dphi()?;

    let dc = &cfg.diagnostics;
    let p_function = dc
        .p_function
        .then(|| diagnostics::p_function(&field, potential))
        .transpose()?;
    let bochner = dc
        .bochner
        .then(|| diagnostics::bochner_residual(&field, potential))
        .transpose()?;
    let stress_energy = dc
        .stress_energy
        .then(|| diagnostics::stress_energy(&field, potential))
        .transpose()?;

    let mono_center = dc
        .monotonicity_center
        .as_ref()
        .map(|c| linalg::from_slice(c))
        .unwrap_or(ZERO_VEC);
    let cap_params = dc.cap.as_ref().map(|c| CapParams {
        d: c.d,
        cap_radius: c.cap_radius,
        y0: linalg::from_slice(&c.y0),
    });
    let monotonicity = if dc.monotonicity_radii.is_empty() {
        None
    } else {
        Some(diagnostics::monotonicity_table(
            &field,
            potential,
            &mono_center,
            &dc.monotonicity_radii,
            cap_params.as_ref(),
        )?)
    };

    let ball_params = dc.ball_bound.as_ref().map(|b| BallBoundParams {
        a: b.a,
        x0: linalg::from_slice(&b.x0),
        cap: CapParams {
            d: b.d,
            cap_radius: b.cap_radius,
            y0: linalg::from_slice(&b.y0),
        },
    });
    let ball_bound = ball_params
        .as_ref()
        .map(|p| diagnostics::gradient_bound_ball(&field, potential, p, residual.sup, cfg.flow.tol))
        .transpose()?;
    let energy2_bound = dc
        .energy2_bound
        .as_ref()
        .map(|e| {
            diagnostics::gradient_bound_energy2(
                &field,
                potential,
                &Energy2Params { a: e.a, x0: linalg::from_slice(&e.x0) },
                residual.sup,
                cfg.flow.tol,
            )
        })
        .transpose()?;
    let liouville = dc
        .liouville_integrals
        .then(|| diagnostics::liouville_integrals(&field, potential, dc.liouville_whole_space))
        .transpose()?;
    let p_inequality = dc
        .p_inequality
        .then(|| diagnostics::p_inequality_log(&field, potential, 1e-6))
        .transpose()?;
    let f_function = dc
        .f_function
        .then(|| {
            ball_params.as_ref().map(|p| diagnostics::f_function_report(&field, p))
        })
        .flatten()
        .transpose()?;

    let mut report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        grid: GridSummary {
            dim: grid.dim(),
            h: grid.spacing(),
            node_count: grid.node_count(),
            active_count: grid.active().len(),
            boundary: grid.boundary_kind(),
        },
        flow: flow_summary,
        energy,
        residual_sup: residual.sup,
        residual_l2: residual.l2,
        sup_dphi,
        p_function,
        bochner,
        stress_energy,
        monotonicity,
        ball_bound,
        energy2_bound,
        liouville,
        p_inequality,
        f_function,
        assertions: Vec::new(),
    };

    let ctx = AssertionContext {
        cfg,
        field: &field,
        potential,
        report: &report,
        history: &history,
        converged_gate,
    };
    let assertions: Vec<AssertionResult> = cfg
        .assertions
        .iter()
        .map(|a| ctx.evaluate(a))
        .collect::<Result<_>>()?;
    report.assertions = assertions;

    let mut summary = String::new();
    let mut any_fail = false;
    for a in &report.assertions {
        any_fail |= a.status == CheckStatus::Fail;
        let _ = writeln!(summary, "{}", a.summary_line());
    }
    Ok(ExperimentOutcome { report, field, history, summary, any_fail })
}

// ---------------------------------------------------------------------------
// Assertion evaluation

struct AssertionContext<'a> {
    cfg: &'a ExperimentConfig,
    field: &'a MapField,
    potential: &'a Potential,
    report: &'a ExperimentReport,
    history: &'a [FlowSample],
    converged_gate: bool,
}

fn verdict(name: &str, pass: bool, detail: String) -> AssertionResult {
    AssertionResult {
        name: name.into(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

fn not_applicable(name: &str, detail: &str) -> AssertionResult {
    AssertionResult {
        name: name.into(),
        status: CheckStatus::NotApplicable,
        detail: detail.into(),
    }
}

impl AssertionContext<'_> {
    fn evaluate(&self, a: &crate::harness::config::AssertionConfig) -> Result<AssertionResult> {
        let name = a.name.as_str();
        let mut result = self.evaluate_kind(name, &a.kind)?;
        // An unconverged flow invalidates every quantitative verdict except
        // the convergence check itself.
        if !self.converged_gate
            && !matches!(a.kind, AssertionKind::Converged)
            && result.status != CheckStatus::NotApplicable
        {
            result.status = CheckStatus::Unconverged;
            result.detail = format!("flow did not converge; {}", result.detail);
        }
        Ok(result)
    }

    fn evaluate_kind(&self, name: &str, kind: &AssertionKind) -> Result<AssertionResult> {
        let r = self.report;
        Ok(match kind {
            AssertionKind::Converged => match &r.flow {
                Some(f) => verdict(
                    name,
                    f.converged,
                    format!("converged = {} after {} steps (t = {:.6})", f.converged, f.steps, f.time),
                ),
                None => not_applicable(name, "flow disabled"),
            },
            AssertionKind::ResidualBelow { value } => verdict(
                name,
                r.residual_sup <= *value,
                format!("residual sup = {:.3e} vs {value:.3e}", r.residual_sup),
            ),
            AssertionKind::SupDphiBelow { value } => verdict(
                name,
                r.sup_dphi <= *value,
                format!("sup |d phi| = {:.3e} vs {value:.3e}", r.sup_dphi),
            ),
            AssertionKind::SupDphiBelowTolTimes { factor } => {
                let bound = factor * self.cfg.flow.tol;
                verdict(
                    name,
                    r.sup_dphi <= bound,
                    format!("sup |d phi| = {:.3e} vs {bound:.3e}", r.sup_dphi),
                )
            }
            AssertionKind::EnergyBetween { min, max } => verdict(
                name,
                (*min..=*max).contains(&r.energy),
                format!("energy = {:.8e} vs [{min:.3e}, {max:.3e}]", r.energy),
            ),
            AssertionKind::EnergyDissipation => {
                if r.flow.is_none() {
                    return Ok(not_applicable(name, "flow disabled"));
                }
                // Window slack: accumulated per-step allowance of the flow's
                // own instability audit (Euler overshoot plus the
                // quadrature/stencil mismatch, which has a boundary-layer
                // contribution on non-box regions).
                let dt = self.report.flow.as_ref().map_or(0.0, |f| f.dt_final);
                let h = self.field.grid().spacing();
                let blv = flow::boundary_layer_volume(self.field.grid());
                let mut worst = f64::NEG_INFINITY;
                let mut ok = true;
                for w in self.history.windows(2) {
                    let rise = w[1].energy - w[0].energy;
                    let steps = (w[1].step - w[0].step) as f64;
                    let res = w[0].residual_sup.max(w[1].residual_sup);
                    let slack = steps
                        * 10.0
                        * dt
                        * res
                        * (res + h * h + blv * (1.0 + w[0].energy.abs()))
                        + 1e-12;
                    worst = worst.max(rise - slack);
                    ok &= rise <= slack;
                }
                verdict(
                    name,
                    ok,
                    format!("max energy rise beyond slack = {worst:.3e} over {} samples", self.history.len()),
                )
            }
            AssertionKind::PMaxBelow { value } => match &r.p_function {
                Some(p) => verdict(
                    name,
                    p.max <= *value,
                    format!("max P = {:.3e} vs {value:.3e}", p.max),
                ),
                None => not_applicable(name, "P-function diagnostic disabled"),
            },
            AssertionKind::BochnerSupBelow { value } => match &r.bochner {
                Some(b) => verdict(
                    name,
                    b.sup <= *value,
                    format!("identity residual sup = {:.3e} vs {value:.3e}", b.sup),
                ),
                None => not_applicable(name, "Bochner diagnostic disabled"),
            },
            AssertionKind::StressEntryBelow { value } => match &r.stress_energy {
                Some(s) => verdict(
                    name,
                    s.entry_sup <= *value,
                    format!("stress-energy entry sup = {:.3e} vs {value:.3e}", s.entry_sup),
                ),
                None => not_applicable(name, "stress-energy diagnostic disabled"),
            },
            AssertionKind::StressDivBelow { value } => match &r.stress_energy {
                Some(s) => verdict(
                    name,
                    s.div_sup <= *value,
                    format!("divergence sup = {:.3e} vs {value:.3e}", s.div_sup),
                ),
                None => not_applicable(name, "stress-energy diagnostic disabled"),
            },
            AssertionKind::MonotonicityNonnegative => match &r.monotonicity {
                Some(t) => match t.monotone_ok {
                    Some(ok) => verdict(
                        name,
                        ok,
                        format!("dM/dr >= -{:.3e} at {} interior rows", t.eps_quad, t.rows.len()),
                    ),
                    None => not_applicable(name, "potential sign precludes the monotone regime"),
                },
                None => not_applicable(name, "monotonicity table disabled"),
            },
            AssertionKind::MonotonicityValue { r: radius, value, rel_tol } => {
                match &r.monotonicity {
                    Some(t) => match t.rows.iter().find(|row| (row.r - radius).abs() < 1e-9) {
                        Some(row) => {
                            let err = (row.m - value).abs() / value.abs().max(1e-300);
                            verdict(
                                name,
                                err <= *rel_tol,
                                format!(
                                    "M({radius}) = {:.8e}, target {value:.8e}, rel err {err:.3e} vs {rel_tol:.3e}",
                                    row.m
                                ),
                            )
                        }
                        None => not_applicable(name, "requested radius not in the table"),
                    },
                    None => not_applicable(name, "monotonicity table disabled"),
                }
            }
            AssertionKind::IdentityMatch { rel_tol, radii } => match &r.monotonicity {
                Some(t) => {
                    let mut worst: f64 = 0.0;
                    let mut checked = 0;
                    for row in &t.rows {
                        if !radii.is_empty()
                            && !radii.iter().any(|rr| (rr - row.r).abs() < 1e-9)
                        {
                            continue;
                        }
                        let scale = row.identity_lhs.abs().max(row.identity_rhs.abs());
                        let err =
                            (row.identity_lhs - row.identity_rhs).abs() / scale.max(1e-300);
                        worst = worst.max(err);
                        checked += 1;
                    }
                    if checked == 0 {
                        not_applicable(name, "no table rows match the requested radii")
                    } else {
                        verdict(
                            name,
                            worst <= *rel_tol,
                            format!("worst relative mismatch {worst:.3e} vs {rel_tol:.3e} over {checked} radii"),
                        )
                    }
                }
                None => not_applicable(name, "monotonicity table disabled"),
            },
            AssertionKind::BallBoundPass => self.bound_verdict(name, r.ball_bound.as_ref()),
            AssertionKind::Energy2BoundPass => self.bound_verdict(name, r.energy2_bound.as_ref()),
            AssertionKind::LiouvilleIntegralsBelow { value } => match &r.liouville {
                Some(l) if l.applicable => verdict(
                    name,
                    l.dirichlet_integral.abs() <= *value
                        && l.scaled_potential_integral.abs() <= *value,
                    format!(
                        "Dirichlet integral = {:.3e}, scaled potential integral = {:.3e} vs {value:.3e}",
                        l.dirichlet_integral, l.scaled_potential_integral
                    ),
                ),
                Some(l) => not_applicable(name, &l.note),
                None => not_applicable(name, "Liouville integrals disabled"),
            },
            AssertionKind::LimitNearOrigin { value } => {
                let d = self.max_distance_from_origin()?;
                verdict(
                    name,
                    d <= *value,
                    format!("max chart distance from the critical point = {d:.3e} vs {value:.3e}"),
                )
            }
            AssertionKind::ProfileErrorBelow { profile, value } => {
                let err = self.profile_error(*profile)?;
                verdict(
                    name,
                    err <= *value,
                    format!("sup deviation from the analytic profile = {err:.3e} vs {value:.3e}"),
                )
            }
            AssertionKind::LiouvilleFlow { sup_factor, limit_tolerance } => {
                if let Some(reason) = self.liouville_flow_gate()? {
                    return Ok(not_applicable(name, &reason));
                }
                let bound = sup_factor * self.cfg.flow.tol;
                let d = self.max_distance_from_origin()?;
                verdict(
                    name,
                    r.sup_dphi <= bound && d <= *limit_tolerance,
                    format!(
                        "sup |d phi| = {:.3e} vs {bound:.3e}; limit offset = {d:.3e} vs {limit_tolerance:.3e}",
                        r.sup_dphi
                    ),
                )
            }
        })
    }

    fn bound_verdict(&self, name: &str, check: Option<&BoundCheck>) -> AssertionResult {
        match check {
            Some(c) => AssertionResult {
                name: name.into(),
                status: c.status,
                detail: format!(
                    "lhs sup = {:.3e}, min margin = {:.3e}{}",
                    c.lhs_sup,
                    c.min_margin,
                    if c.notes.is_empty() {
                        String::new()
                    } else {
                        format!(" ({})", c.notes.join("; "))
                    }
                ),
            },
            None => not_applicable(name, "bound diagnostic disabled"),
        }
    }

    /// Largest chart geodesic distance of any node value from the origin.
    fn max_distance_from_origin(&self) -> Result<f64> {
        let grid = self.field.grid();
        let chart = self.field.chart();
        let mut worst: f64 = 0.0;
        for idx in 0..grid.node_count() {
            if grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            worst = worst.max(chart.distance_from_center(self.field.value(idx))?);
        }
        Ok(worst)
    }

    fn profile_error(&self, profile: ProfileKind) -> Result<f64> {
        let grid = self.field.grid();
        let chart = self.field.chart();
        let m = chart.dim();
        let mut worst: f64 = 0.0;
        for idx in 0..grid.node_count() {
            if grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            let x = grid.position(idx);
            let target = profile_value(profile, chart, &x);
            let diff = linalg::sub(self.field.value(idx), &target, m);
            worst = worst.max(linalg::norm(&diff, m));
        }
        Ok(worst)
    }

    /// None when the constancy hypotheses hold; otherwise the reason.
    fn liouville_flow_gate(&self) -> Result<Option<String>> {
        let chart = self.field.chart();
        if chart.curvature_bound() > 0.0 {
            return Ok(Some(format!(
                "target curvature bound {} is positive",
                chart.curvature_bound()
            )));
        }
        if self.field.grid().boundary_kind() != BoundaryKind::Periodic {
            return Ok(Some("requires a compact (periodic) domain".into()));
        }
        let consts = self
            .potential
            .constants_over_points(chart, self.field.values().iter())?;
        if !consts.concave {
            return Ok(Some("potential is not concave over the probed image".into()));
        }
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// Artifact emission

/// Writes `content` to `dir/name` through a temporary file in the same
/// directory, so readers never observe a half-written artifact.
fn write_atomic(dir: &Path, name: &str, content: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .map_err(|e| LabError::Io(e.error))?;
    Ok(())
}

/// JSON number formatter with a fixed 17-significant-digit scientific
/// rendering, so reports are byte-reproducible and lossless for f64.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn report_json(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    report
        .serialize(&mut ser)
        .map_err(|e| LabError::Io(std::io::Error::other(e)))?;
    buf.push(b'\n');
    Ok(buf)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn write_artifacts(cfg: &ExperimentConfig, out: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let echo = toml::to_string_pretty(cfg).map_err(|e| LabError::Config(e.to_string()))?;
    write_atomic(dir, "config.toml", echo.as_bytes())?;

    if cfg.flow.enabled {
        let mut csv = String::from("step,time,energy,residual_sup,residual_l2\n");
        for s in &out.history {
            let _ = writeln!(
                csv,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.step, s.time, s.energy, s.residual_sup, s.residual_l2
            );
        }
        write_atomic(dir, "flow_history.csv", csv.as_bytes())?;
    }

    if let Some(t) = &out.report.monotonicity {
        let mut csv = String::from(
            "r,m,dm_dr,identity_lhs,identity_rhs,m_scaled,dm_scaled_dr,improved_rhs\n",
        );
        for row in &t.rows {
            let _ = writeln!(
                csv,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{},{}",
                row.r,
                row.m,
                fmt_opt(row.dm_dr),
                row.identity_lhs,
                row.identity_rhs,
                row.m_scaled,
                fmt_opt(row.dm_scaled_dr),
                fmt_opt(row.improved_rhs),
            );
        }
        write_atomic(dir, "monotonicity.csv", csv.as_bytes())?;
    }

    if let Some(p) = &out.report.p_function {
        write_atomic(dir, "p_field.csv", node_scalar_csv(&out.field, &p.values).as_bytes())?;
    }

    if let Some(s) = &out.report.stress_energy {
        let grid = out.field.grid();
        let n = grid.dim();
        let mut csv: String = (1..=n).map(|i| format!("x{i},")).collect();
        csv.push_str(
            &(1..=n).map(|i| format!("div{i}")).collect::<Vec<_>>().join(","),
        );
        csv.push('\n');
        for idx in 0..grid.node_count() {
            if grid.status(idx) == NodeStatus::Exterior {
                continue;
            }
            let x = grid.position(idx);
            let cols: Vec<String> = (0..n)
                .map(|i| format!("{:.16e}", x[i]))
                .chain((0..n).map(|i| format!("{:.16e}", s.divergence[idx][i])))
                .collect();
            let _ = writeln!(csv, "{}", cols.join(","));
        }
        write_atomic(dir, "stress_energy_div.csv", csv.as_bytes())?;
    }

    // Final field snapshot (save_csv already writes atomically-enough for a
    // fresh file, but route it through the same temp-and-rename path).
    let tmp = dir.join(".final_field.tmp");
    out.field.save_csv(&tmp)?;
    std::fs::rename(&tmp, dir.join("final_field.csv"))?;

    write_atomic(dir, "report.json", &report_json(&out.report)?)?;
    write_atomic(dir, "summary.txt", out.summary.as_bytes())?;
    Ok(())
}

fn node_scalar_csv(field: &MapField, values: &[f64]) -> String {
    let grid = field.grid();
    let n = grid.dim();
    let mut csv: String = (1..=n).map(|i| format!("x{i},")).collect();
    csv.push_str("value\n");
    for idx in 0..grid.node_count() {
        if grid.status(idx) == NodeStatus::Exterior {
            continue;
        }
        let x = grid.position(idx);
        let cols: Vec<String> = (0..n)
            .map(|i| format!("{:.16e}", x[i]))
            .chain(std::iter::once(format!("{:.16e}", values[idx])))
            .collect();
        let _ = writeln!(csv, "{}", cols.join(","));
    }
    csv
}

// ---------------------------------------------------------------------------
// Refinement studies

#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub h: f64,
    pub node_count: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct RefinementReport {
    pub schema_version: u32,
    pub levels: Vec<RefinementLevel>,
    /// Observed orders between consecutive levels, per metric.
    pub orders: BTreeMap<String, Vec<f64>>,
    /// Order on the finest pair, per metric.
    pub final_orders: BTreeMap<String, f64>,
    pub order_min: f64,
    pub order_max: f64,
    pub pass: bool,
}

fn metric_key(m: RefineMetric) -> &'static str {
    match m {
        RefineMetric::ResidualSup => "residual_sup",
        RefineMetric::BochnerSup => "bochner_sup",
        RefineMetric::StressDivSup => "stress_div_sup",
        RefineMetric::PMax => "p_max_abs",
    }
}

fn metric_value(m: RefineMetric, report: &ExperimentReport) -> Result<f64> {
    let missing = |what: &str| {
        LabError::Config(format!("refine metric needs the {what} diagnostic enabled"))
    };
    Ok(match m {
        RefineMetric::ResidualSup => report.residual_sup,
        RefineMetric::BochnerSup => {
            report.bochner.as_ref().ok_or_else(|| missing("bochner"))?.sup
        }
        RefineMetric::StressDivSup => {
            report
                .stress_energy
                .as_ref()
                .ok_or_else(|| missing("stress_energy"))?
                .div_sup
        }
        RefineMetric::PMax => {
            let p = report.p_function.as_ref().ok_or_else(|| missing("p_function"))?;
            p.max.abs().max(p.min.abs())
        }
    })
}

pub fn refinement_study(
    cfg: &ExperimentConfig,
    levels: usize,
    out_dir: Option<&Path>,
) -> Result<RefinementReport> {
    cfg.validate()?;
    let rcfg = cfg.refine.as_ref().ok_or_else(|| {
        LabError::Config("refinement study requires a [refine] section".into())
    })?;
    if levels < 2 {
        return Err(LabError::Config("refinement study needs at least 2 levels".into()));
    }
    let chart = cfg.build_chart()?;
    let potential = cfg.build_potential();
    potential.check_compatible(&chart)?;

    let mut rows = Vec::new();
    for level in 0..levels {
        let h = cfg.domain.h / 2f64.powi(level as i32);
        let grid = cfg.build_grid_with_spacing(h)?;
        if grid.node_count() > rcfg.node_cap {
            return Err(LabError::Config(format!(
                "refinement level {level} needs {} nodes, above the cap {}",
                grid.node_count(),
                rcfg.node_cap
            )));
        }
        let field = cfg.build_initial(grid, chart)?;
        let outcome = run_on_field(cfg, field, &potential)?;
        let mut metrics = BTreeMap::new();
        for &m in &rcfg.metrics {
            metrics.insert(metric_key(m).to_string(), metric_value(m, &outcome.report)?);
        }
        rows.push(RefinementLevel {
            h,
            node_count: outcome.report.grid.node_count,
            metrics,
        });
    }

    let mut orders: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut final_orders = BTreeMap::new();
    let mut pass = true;
    for &m in &rcfg.metrics {
        let key = metric_key(m);
        let series: Vec<f64> = rows.iter().map(|r| r.metrics[key]).collect();
        let obs: Vec<f64> = series.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let last = *obs.last().unwrap();
        pass &= (rcfg.order_min..=rcfg.order_max).contains(&last);
        orders.insert(key.to_string(), obs);
        final_orders.insert(key.to_string(), last);
    }

    let report = RefinementReport {
        schema_version: SCHEMA_VERSION,
        levels: rows,
        orders,
        final_orders,
        order_min: rcfg.order_min,
        order_max: rcfg.order_max,
        pass,
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
        report
            .serialize(&mut ser)
            .map_err(|e| LabError::Io(std::io::Error::other(e)))?;
        buf.push(b'\n');
        write_atomic(dir, "refine.json", &buf)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Suites

#[derive(Debug, serde::Deserialize)]
struct SuiteManifest {
    configs: Vec<String>,
}

pub struct SuiteOutcome {
    pub summary: String,
    pub any_fail: bool,
}

/// Runs every config listed in a manifest (paths relative to the manifest),
/// writing each experiment's artifacts into a subdirectory of `out_root`
/// named after the config file stem.
pub fn run_suite(manifest_path: &Path, out_root: &Path) -> Result<SuiteOutcome> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: SuiteManifest =
        toml::from_str(&text).map_err(|e| LabError::Parse(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut summary = String::new();
    let mut any_fail = false;
    for rel in &manifest.configs {
        let path = base.join(rel);
        let cfg = ExperimentConfig::from_path(&path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into());
        let out_dir: PathBuf = out_root.join(&stem);
        let outcome = run_experiment(&cfg, Some(&out_dir))?;
        any_fail |= outcome.any_fail;
        let _ = writeln!(summary, "== {stem}");
        summary.push_str(&outcome.summary);
    }
    if let Ok(()) = std::fs::create_dir_all(out_root) {
        let _ = write_atomic(out_root, "summary.txt", summary.as_bytes());
    }
    Ok(SuiteOutcome { summary, any_fail })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink_cfg() -> ExperimentConfig {
        toml::from_str(
            r#"
            [domain]
            dim = 1
            h = 0.05
            boundary = "dirichlet"
            region = { kind = "box", min = [-5.0], max = [5.0] }

            [target]
            geometry = "euclidean"
            dim = 1

            [potential]
            kind = "double_well_radial"

            [initial]
            kind = "kink"

            [flow]
            enabled = true
            tol = 1.0e-7
            dt_safety = 0.4

            [diagnostics]
            p_function = true
            bochner = true

            [[assert]]
            name = "flow-converged"
            kind = "converged"

            [[assert]]
            name = "modica-p-bound"
            kind = "p_max_below"
            value = 1.0e-4

            [[assert]]
            name = "kink-profile"
            kind = "profile_error_below"
            profile = "kink"
            value = 5.0e-3

            [[assert]]
            name = "energy-dissipation"
            kind = "energy_dissipation"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn kink_experiment_passes_all_assertions() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&kink_cfg(), Some(dir.path())).unwrap();
        assert!(!outcome.any_fail, "summary:\n{}", outcome.summary);
        for name in [
            "config.toml",
            "flow_history.csv",
            "p_field.csv",
            "final_field.csv",
            "report.json",
            "summary.txt",
        ] {
            assert!(dir.path().join(name).exists(), "missing artifact {name}");
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert_eq!(summary.lines().count(), 4);
        assert!(summary.lines().all(|l| l.starts_with("PASS")));
    }

    #[test]
    fn report_json_is_byte_deterministic() {
        let a = run_experiment(&kink_cfg(), None).unwrap();
        let b = run_experiment(&kink_cfg(), None).unwrap();
        assert_eq!(report_json(&a.report).unwrap(), report_json(&b.report).unwrap());
    }

    #[test]
    fn failed_assertion_is_reported_not_raised() {
        let mut cfg = kink_cfg();
        cfg.assertions.push(crate::harness::config::AssertionConfig {
            name: "impossible-residual".into(),
            kind: AssertionKind::ResidualBelow { value: 0.0 },
        });
        let outcome = run_experiment(&cfg, None).unwrap();
        assert!(outcome.any_fail);
        assert!(outcome.summary.contains("FAIL impossible-residual"));
    }

    #[test]
    fn unconverged_flow_marks_assertions() {
        let mut cfg = kink_cfg();
        cfg.flow.max_steps = 5;
        let outcome = run_experiment(&cfg, None).unwrap();
        assert!(outcome.summary.contains("FAIL flow-converged"));
        assert!(outcome.summary.contains("UNCONVERGED modica-p-bound"));
    }

    #[test]
    fn refinement_study_recovers_second_order_identity_residual() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [domain]
            dim = 2
            h = 0.1
            boundary = "dirichlet"
            region = { kind = "box", min = [-2.0, -2.0], max = [2.0, 2.0] }

            [target]
            geometry = "sphere_stereographic"
            dim = 2

            [initial]
            kind = "instanton_moebius"
            q = 0.1

            [diagnostics]
            bochner = true

            [refine]
            metrics = ["residual_sup", "bochner_sup"]
            order_min = 1.7
            order_max = 2.3
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let report = refinement_study(&cfg, 3, None).unwrap();
        assert!(report.pass, "orders: {:?}", report.final_orders);
    }

    #[test]
    fn refinement_node_cap_is_enforced() {
        let mut cfg = kink_cfg();
        cfg.flow.enabled = false;
        cfg.refine = Some(crate::harness::config::RefineConfig {
            node_cap: 100,
            metrics: vec![RefineMetric::ResidualSup],
            order_min: 1.0,
            order_max: 3.0,
        });
        assert!(matches!(
            refinement_study(&cfg, 3, None),
            Err(LabError::Config(_))
        ));
    }
}
