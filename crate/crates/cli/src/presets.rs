//! Named example configurations.

use serde_json::{json, Value};

use crate::config::{self, ScenarioConfig};
use crate::CliError;

pub const NAMES: [&str; 6] = [
    "gie-2x2",
    "wide-gaussian-pair",
    "sn-vs-full",
    "semiclassical-overlap",
    "zassenhaus-t3",
    "poisson-gaussian",
];

/// Two unit masses, each split by `dx` along x, the pair separated by `d`
/// along y.
fn gie_sources(dx: f64, d: f64, width: f64) -> (Value, Value) {
    let branch = |x: f64, y: f64| json!({"center": [x, y, 0.0], "width": width});
    (
        json!({"mass": 1.0, "branches": [branch(-dx / 2.0, 0.0), branch(dx / 2.0, 0.0)]}),
        json!({"mass": 1.0, "branches": [branch(-dx / 2.0, d), branch(dx / 2.0, d)]}),
    )
}

pub fn preset_value(name: &str) -> Option<Value> {
    let v = match name {
        "gie-2x2" => {
            let (a, b) = gie_sources(0.5, 1.0, 0.0);
            json!({
                "output": "gie-2x2",
                "scenario": {"phase-compare": {
                    "a": a, "b": b, "t": 1.0,
                    "backend": {"kind": "analytic"},
                    "width_ladder": [0.2, 0.1, 0.05, 0.025]
                }}
            })
        }
        "wide-gaussian-pair" => {
            let (a, b) = gie_sources(0.5, 1.0, 0.5);
            json!({
                "output": "wide-gaussian-pair",
                "scenario": {"phase-compare": {
                    "a": a, "b": b, "t": 1.0,
                    "backend": {"kind": "monte-carlo", "samples": 1000000},
                    "alternate_width": 0.25
                }}
            })
        }
        "sn-vs-full" => {
            let (a, b) = gie_sources(0.5, 1.0, 0.1);
            json!({
                "output": "sn-vs-full",
                "scenario": {"negativity": {
                    "a": a, "b": b, "times": [0.25, 0.5, 1.0, 2.0],
                    "backend": {"kind": "analytic"}
                }}
            })
        }
        "semiclassical-overlap" => json!({
            "output": "semiclassical-overlap",
            "scenario": {"overlap-sweep": {
                "mass": 1.0, "position": [0.0, 0.0, 0.0], "matter_width": 0.25,
                "displacements": [[0.25, 0.0, 0.0]],
                "widths": [8.0, 4.0, 2.0, 1.0, 0.5, 0.25],
                "grids": [{"n": 8, "box_length": 2.0}, {"n": 16, "box_length": 4.0}, {"n": 32, "box_length": 8.0}]
            }}
        }),
        "zassenhaus-t3" => json!({
            "output": "zassenhaus-t3",
            "constants": {"system": "custom", "g": 1.0 / (16.0 * std::f64::consts::PI), "c": 1.0, "hbar": 1.0},
            "scenario": {"opalg-verify": {
                "k": [1.0, 0.0, 0.0], "box_length": 2.0 * std::f64::consts::PI, "dim": 40,
                "amplitude": 8.0, "trace": 1.0, "trace_shift": 0.5, "gap": 0.3,
                "defect_times": {"t0": 0.001, "t1": 0.01, "n": 5},
                "phase_times": {"t0": 0.02, "t1": 0.2, "n": 6}
            }}
        }),
        "poisson-gaussian" => json!({
            "output": "poisson-gaussian",
            "scenario": {"poisson": {
                "density": {"kind": "gaussian", "mass": 1.0, "center": [0.2, -0.1, 0.1], "sigma": 2.5},
                "grid": {"n": 32, "box_length": 16.0},
                "solvers": ["direct", "spectral"]
            }}
        }),
        _ => return None,
    };
    Some(v)
}

pub fn preset(name: &str) -> Result<ScenarioConfig, CliError> {
    let v = preset_value(name)
        .ok_or_else(|| CliError::Config(format!("unknown preset `{name}`; known: {}", NAMES.join(", "))))?;
    config::parse(&serde_json::to_string_pretty(&v).expect("preset serialises"), name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        assert!(NAMES.len() >= 5);
        for n in NAMES {
            let cfg = preset(n).unwrap();
            assert_eq!(cfg.output.to_str(), Some(n));
        }
        assert!(preset("nope").is_err());
    }
}
