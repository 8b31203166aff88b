//! Scenario execution. Each runner returns a JSON report (every number as a
//! `{value, unit}` pair), CSV tables and optional grid files.

use std::path::Path;

use qgphase::opalg::{self, TwoBranchParams, Verification};
use qgphase::overlaps::{overlap_sweep, SemiclassicalSource};
use qgphase::phases::{compare_models, ModelStatus, PhaseModel, PhaseReport, PhaseRequest};
use qgphase::poisson::{laplacian_residual, solve_ht_direct, solve_ht_spectral, ScalarFieldX};
use qgphase::sources::{sample_on_grid, NaturalUnits};
use qgphase::table::Table;
use qgphase::{PhysicalConstants, WaveVec};
use serde_json::{json, Map, Value};

use crate::config::{
    ConstantsConfig, NegativityConfig, OpalgConfig, OverlapSweepConfig, PhaseCompareConfig, PoissonConfig, Scenario,
    ScenarioConfig, SolverKind,
};
use crate::CliError;

pub struct GridOutput {
    pub name: String,
    pub field: ScalarFieldX,
    pub quantity: String,
    pub units: String,
}

pub struct RunOutput {
    pub report: Value,
    pub tables: Vec<Table>,
    pub grids: Vec<GridOutput>,
}

/// Unit labels for the configured constants.
#[derive(Debug, Clone, Copy)]
pub struct Units {
    si: bool,
}

impl Units {
    fn new(cfg: &ConstantsConfig) -> Self {
        Self { si: matches!(cfg, ConstantsConfig::Si) }
    }

    fn label(&self, si: &'static str, natural: &'static str) -> &'static str {
        if self.si {
            si
        } else {
            natural
        }
    }

    pub fn time(&self) -> &'static str {
        self.label("s", "natural time")
    }

    pub fn length(&self) -> &'static str {
        self.label("m", "natural length")
    }

    pub fn inverse_length(&self) -> &'static str {
        self.label("1/m", "1/natural length")
    }

    pub fn energy(&self) -> &'static str {
        self.label("J", "natural energy")
    }

    pub fn mass(&self) -> &'static str {
        self.label("kg", "natural mass")
    }

    pub fn kappa(&self) -> &'static str {
        self.label("s^2/(kg m)", "natural 1/(energy length)")
    }
}

pub fn q(value: f64, unit: &str) -> Value {
    json!({ "value": finite(value), "unit": unit })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn execute(cfg: &ScenarioConfig, config_dir: &Path) -> Result<RunOutput, CliError> {
    let (consts, scales) = cfg.constants.build()?;
    let units = Units::new(&cfg.constants);
    let mut out = match &cfg.scenario {
        Scenario::PhaseCompare(p) => phase_compare(p, cfg.seed, &consts, units)?,
        Scenario::Negativity(p) => negativity(p, cfg.seed, &consts, units)?,
        Scenario::Poisson(p) => poisson(p, &consts, units, config_dir)?,
        Scenario::OverlapSweep(p) => overlap(p, &consts, units)?,
        Scenario::OpalgVerify(p) => opalg_verify(p, &consts, units)?,
    };
    let mut header = Map::new();
    header.insert("scenario".into(), json!(cfg.scenario.kind()));
    header.insert("seed".into(), json!(cfg.seed));
    header.insert("constants".into(), constants_block(&consts, scales.as_ref(), units));
    header.insert("config".into(), serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?);
    if let Value::Object(body) = out.report {
        header.extend(body);
    }
    out.report = Value::Object(header);
    Ok(out)
}

fn constants_block(c: &PhysicalConstants, scales: Option<&NaturalUnits>, u: Units) -> Value {
    let mut v = json!({
        "G": q(c.g, u.label("m^3/(kg s^2)", "natural")),
        "c": q(c.c, u.label("m/s", "natural")),
        "hbar": q(c.hbar, u.label("J s", "natural")),
        "kappa": q(c.kappa(), u.kappa()),
    });
    if let Some(s) = scales {
        v["mass_scale"] = q(s.mass_scale_kg, "kg");
        v["length_scale"] = q(s.length_scale_m, "m");
        v["time_scale"] = q(s.time_scale_s(), "s");
        v["energy_scale"] = q(s.energy_scale_j(), "J");
    }
    v
}

fn request(
    a: &crate::config::SourceConfig,
    b: &crate::config::SourceConfig,
    t: f64,
    backend: &crate::config::BackendConfig,
    seed: u64,
    consts: &PhysicalConstants,
    width_ladder: Vec<f64>,
) -> Result<PhaseRequest, CliError> {
    Ok(PhaseRequest {
        a: a.build()?.to_quantum_state(consts).map_err(CliError::config)?,
        b: b.build()?.to_quantum_state(consts).map_err(CliError::config)?,
        t,
        consts: *consts,
        backend: backend.build(seed)?,
        width_ladder,
    })
}

fn report_json(r: &PhaseReport, u: Units) -> Value {
    let models: Vec<Value> = r
        .models
        .iter()
        .map(|m| {
            let mut v = json!({
                "model": m.model.name(),
                "status": match m.status {
                    ModelStatus::Computed => "computed",
                    ModelStatus::Skipped => "skipped",
                    ModelStatus::Stub => "stub",
                },
                "normalisation": q(m.normalisation, "1"),
            });
            if let Some(reason) = &m.reason {
                v["reason"] = json!(reason);
            }
            if let Some(n) = m.negativity {
                v["negativity"] = q(n, "1");
            }
            if let Some(p) = m.entangling_phase {
                v["entangling_phase"] = q(p, "rad");
                v["normalised_entangling_phase"] = q(p * m.normalisation, "rad");
            }
            if let Some(mat) = &m.matrix {
                let mut entries = Vec::new();
                for i in 0..mat.rows {
                    for j in 0..mat.cols {
                        entries.push(json!({
                            "i": i,
                            "j": j,
                            "phase": q(mat.phase(i, j), "rad"),
                            "damping": q(mat.damping(i, j), "1"),
                        }));
                    }
                }
                v["entries"] = json!(entries);
            }
            v
        })
        .collect();
    let deviations: Vec<Value> = r
        .deviations
        .iter()
        .map(|d| json!({"a": d.a.name(), "b": d.b.name(), "max_relative_deviation": q(d.max_relative_deviation, "1")}))
        .collect();
    let self_energies: Vec<Value> = r
        .self_energies
        .iter()
        .map(|s| {
            let mut v = json!({"source": s.source, "index": s.index});
            if let Some(e) = s.value {
                v["value"] = q(e.value, u.energy());
                if let Some(se) = e.std_error {
                    v["std_error"] = q(se, u.energy());
                }
            }
            if let Some(n) = &s.note {
                v["note"] = json!(n);
            }
            v
        })
        .collect();
    json!({
        "t": q(r.t, u.time()),
        "models": models,
        "deviations": deviations,
        "self_energies": self_energies,
        "newton_prefactor_ratio": q(r.newton_prefactor_ratio, "1"),
        "nonlocal_prefactor_ratio": q(r.nonlocal_prefactor_ratio, "1"),
        "vacuum_reference": r.vacuum_reference,
    })
}

fn entangling(r: &PhaseReport, m: PhaseModel) -> Option<f64> {
    r.model(m).and_then(|row| row.entangling_phase.map(|p| p * row.normalisation))
}

fn phase_compare(p: &PhaseCompareConfig, seed: u64, consts: &PhysicalConstants, u: Units) -> Result<RunOutput, CliError> {
    let req = request(&p.a, &p.b, p.t, &p.backend, seed, consts, p.width_ladder.clone())?;
    let report = compare_models(&req).map_err(CliError::library)?;
    let mut json = report_json(&report, u);
    if let Some(d) = report.deviation(PhaseModel::General, PhaseModel::Newton) {
        json["newton_deviation"] = q(d, "1");
    }
    let mut tables = vec![report.phase_table()];
    if !report.convergence.is_empty() {
        tables.push(report.convergence_table());
        json["convergence"] = json!(report
            .convergence
            .iter()
            .map(|c| json!({
                "sigma": q(c.sigma, u.length()),
                "entangling_phase": q(c.entangling_phase, "rad"),
                "std_error": q(c.std_error, "rad"),
                "newton_normalised": q(c.newton_normalised, "rad"),
                "relative_deviation": q(c.relative_deviation, "1"),
            }))
            .collect::<Vec<_>>());
    }
    if let Some(width) = p.alternate_width {
        let alt_a = crate::config::SourceConfig {
            branches: p.a.branches.iter().map(|b| crate::config::BranchConfig { width, ..b.clone() }).collect(),
            ..p.a.clone()
        };
        let alt_b = crate::config::SourceConfig {
            branches: p.b.branches.iter().map(|b| crate::config::BranchConfig { width, ..b.clone() }).collect(),
            ..p.b.clone()
        };
        let alt = compare_models(&request(&alt_a, &alt_b, p.t, &p.backend, seed, consts, Vec::new())?)
            .map_err(CliError::library)?;
        let change = |m| match (entangling(&report, m), entangling(&alt, m)) {
            (Some(x), Some(y)) => q(((y - x) / x).abs(), "1"),
            _ => Value::Null,
        };
        json["functional_form"] = json!({
            "alternate_width": q(width, u.length()),
            "general_relative_change": change(PhaseModel::General),
            "newton_relative_change": change(PhaseModel::Newton),
        });
    }
    Ok(RunOutput { report: json, tables, grids: Vec::new() })
}

fn negativity(p: &NegativityConfig, seed: u64, consts: &PhysicalConstants, u: Units) -> Result<RunOutput, CliError> {
    if p.times.is_empty() {
        return Err(CliError::Config("negativity needs at least one time".into()));
    }
    let mut table = Table::new("negativity", &["t", "model", "status", "negativity", "entangling_phase"]);
    let mut rows = Vec::new();
    for &t in &p.times {
        let report = compare_models(&request(&p.a, &p.b, t, &p.backend, seed, consts, Vec::new())?)
            .map_err(CliError::library)?;
        for m in &report.models {
            let status = match m.status {
                ModelStatus::Computed => "computed",
                ModelStatus::Skipped => "skipped",
                ModelStatus::Stub => "stub",
            };
            table.push(vec![
                t.into(),
                m.model.name().into(),
                status.into(),
                m.negativity.unwrap_or(f64::NAN).into(),
                m.entangling_phase.unwrap_or(f64::NAN).into(),
            ]);
            let mut v = json!({"t": q(t, u.time()), "model": m.model.name(), "status": status});
            if let Some(n) = m.negativity {
                v["negativity"] = q(n, "1");
            }
            if let Some(e) = m.entangling_phase {
                v["entangling_phase"] = q(e, "rad");
            }
            rows.push(v);
        }
    }
    Ok(RunOutput { report: json!({ "negativity": rows }), tables: vec![table], grids: Vec::new() })
}

fn poisson(p: &PoissonConfig, consts: &PhysicalConstants, u: Units, config_dir: &Path) -> Result<RunOutput, CliError> {
    let spec = p.grid.spec()?;
    let density = p.density.build(consts, config_dir)?;
    if p.solvers.is_empty() {
        return Err(CliError::Config("poisson needs at least one solver".into()));
    }
    let rho = match &density {
        qgphase::EnergyDensity::Grid(g) => g.clone(),
        other => sample_on_grid(other, &spec).map_err(CliError::library)?,
    };
    let mut fields = Vec::new();
    for s in &p.solvers {
        let f = match s {
            SolverKind::Direct => solve_ht_direct(&density, consts, &spec),
            SolverKind::Spectral => solve_ht_spectral(&density, consts, &spec),
        }
        .map_err(CliError::library)?;
        fields.push((*s, f));
    }
    let name = |s: SolverKind| match s {
        SolverKind::Direct => "direct",
        SolverKind::Spectral => "spectral",
    };
    let mut solvers = Vec::new();
    for (s, f) in &fields {
        let res = laplacian_residual(f, &rho, consts).map_err(CliError::library)?;
        let peak = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        solvers.push(json!({
            "solver": name(*s),
            "peak_h_T": q(peak, "1"),
            "laplacian_residual_rms": q(res, "1"),
        }));
    }
    let mut report = json!({
        "grid": {"n": spec.n, "box_length": q(spec.box_length, u.length())},
        "total_energy": q(rho.total_energy(), u.energy()),
        "solvers": solvers,
    });
    if fields.len() > 1 {
        let (a, b) = (&fields[0].1, &fields[1].1);
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
        report["max_relative_deviation"] = q(dev, "1");
    }

    // Profile along +x through the centre node.
    let mid = spec.n / 2;
    let mut cols = vec!["x"];
    cols.extend(fields.iter().map(|(s, _)| name(*s)));
    let mut table = Table::new("profile_x", &cols);
    for ix in mid..spec.n {
        let mut row = vec![spec.node(ix).into()];
        row.extend(fields.iter().map(|(_, f)| f.at(ix, mid, mid).into()));
        table.push(row);
    }
    let grids = if p.write_grids {
        fields
            .into_iter()
            .map(|(s, field)| GridOutput {
                name: format!("h_T_{}", name(s)),
                field,
                quantity: "h_T".into(),
                units: "1".into(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunOutput { report, tables: vec![table], grids })
}

fn overlap(p: &OverlapSweepConfig, consts: &PhysicalConstants, u: Units) -> Result<RunOutput, CliError> {
    let src = SemiclassicalSource { mass: p.mass, position: p.position, matter_width: p.matter_width };
    let grids = p.grids.iter().map(|g| g.spec()).collect::<Result<Vec<_>, _>>()?;
    let table = overlap_sweep(&src, &p.displacements, &p.widths, &grids, consts).map_err(CliError::library)?;
    let col = table.columns.iter().position(|c| c == "overlap").expect("overlap column");
    let values: Vec<f64> = table
        .rows
        .iter()
        .map(|r| match r[col] {
            qgphase::table::Cell::Num(x) => x,
            _ => f64::NAN,
        })
        .collect();
    let report = json!({
        "source": {"mass": q(p.mass, u.mass()), "matter_width": q(p.matter_width, u.length())},
        "points": values.len(),
        "first_overlap": q(values.first().copied().unwrap_or(f64::NAN), "1"),
        "last_overlap": q(values.last().copied().unwrap_or(f64::NAN), "1"),
        "min_overlap": q(values.iter().cloned().fold(f64::INFINITY, f64::min), "1"),
        "regularisation_unit": u.inverse_length(),
    });
    Ok(RunOutput { report, tables: vec![table], grids: Vec::new() })
}

pub fn opalg_params(p: &OpalgConfig, consts: &PhysicalConstants) -> Result<TwoBranchParams, CliError> {
    let k = WaveVec::try_new(p.k[0], p.k[1], p.k[2]).map_err(CliError::config)?;
    Ok(TwoBranchParams {
        consts: *consts,
        k,
        box_length: p.box_length,
        dim: p.dim,
        amplitude: p.amplitude,
        trace: p.trace,
        shift: p.trace_shift,
        gap: p.gap,
    })
}

fn opalg_verify(p: &OpalgConfig, consts: &PhysicalConstants, u: Units) -> Result<RunOutput, CliError> {
    let params = opalg_params(p, consts)?;
    let v: Verification =
        opalg::verify(&params, &p.defect_times.times()?, &p.phase_times.times()?).map_err(CliError::library)?;
    let branches = (0, 1);
    let mut order2 = opalg::sweep_table(&v.defect_order2, branches);
    order2.name = "zassenhaus_sweep_without_t3".into();
    let mut phase = opalg::sweep_table(&v.phase_rows, branches);
    phase.name = "phase_sweep".into();
    let checks: Vec<Value> = v
        .checks
        .iter()
        .map(|c| json!({"check": c.name, "value": q(c.value, "1"), "lower": q(c.lower, "1"), "upper": q(c.upper, "1"), "pass": c.pass}))
        .collect();
    let report = json!({
        "oscillator_dim": p.dim,
        "mode_weight": q(params.box_length.powi(-3), u.label("1/m^3", "natural 1/length^3")),
        "predicted_t3_coefficient": q(v.predicted_t3, u.label("rad/s^3", "rad/natural time^3")),
        "driven_oscillator_t3_coefficient": q(v.oracle_t3, u.label("rad/s^3", "rad/natural time^3")),
        "fitted_t3_coefficient": q(v.fit_phase.residual_t3_coefficient, u.label("rad/s^3", "rad/natural time^3")),
        "defect_slope_order3": q(v.fit_order3.defect_slope, "1"),
        "defect_slope_without_t3": q(v.fit_order2.defect_slope, "1"),
        "damping_slope": q(v.fit_phase.damping_slope, "1"),
        "checks": checks,
        "all_pass": v.passed(),
    });
    let tables = vec![opalg::sweep_table(&v.defect_order3, branches), order2, phase, v.checks_table()];
    Ok(RunOutput { report, tables, grids: Vec::new() })
}
