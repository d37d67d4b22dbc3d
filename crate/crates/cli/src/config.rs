//! Run configuration. Every field is optional; flags of the form
//! `--section.field VALUE` override the same JSON path.

use std::path::{Path, PathBuf};

use paultrap::dynamics::IntegrationConfig;
use paultrap::experiments::{FieldPipeline, FrequencyModel, TraceRequest, DEFAULT_DC_BRACKET, DEFAULT_TRACE_TOLERANCE_HZ};
use paultrap::field::{GridSpec, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use paultrap::fit::{FitReport, MultipoleCoefficients, DEFAULT_REGION_FRACTION};
use paultrap::model::{FilamentConfig, PAPER_DRIVE_FREQUENCY_HZ};
use paultrap::{ideal_coefficients, paper_table_coefficients, Axis, ExecMode, IonSpecies, OperatingPoint, TrapGeometry};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub fit: FitSection,
    pub ion: IonSection,
    pub operating_point: OperatingPointSection,
    pub integration: IntegrationSection,
    pub coefficients: CoefficientSource,
    pub trace: TraceSection,
    pub sweep: SweepSection,
    pub exec: ExecMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// m; 20 mm.
    pub r0: Option<f64>,
    /// m; r0/√2.
    pub z0: Option<f64>,
    /// m; 2·r0.
    pub truncation_radius: Option<f64>,
    pub filament: FilamentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilamentSection {
    pub enabled: bool,
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub thickness: Option<f64>,
    pub height_above_lower_endcap: Option<f64>,
    pub lateral_offset_x: Option<f64>,
}

impl Default for FilamentSection {
    fn default() -> Self {
        Self {
            enabled: true,
            length: None,
            width: None,
            thickness: None,
            height_above_lower_endcap: None,
            lateral_offset_x: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Nodes per axis; 129.
    pub nodes: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    /// Box half-width, m; 1.2·r0.
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// m; 0.25·r0.
    pub region_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    #[default]
    Eu151,
    Eu153,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IonSection {
    pub species: Species,
    /// Required for `custom`.
    pub mass_u: Option<f64>,
    pub charge_state: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingPointSection {
    /// V; −5.3.
    pub u_dc: Option<f64>,
    /// V; 700.
    pub v_rf: Option<f64>,
    /// Hz; 500 kHz.
    pub drive_frequency_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSection {
    pub steps_per_rf_period: Option<usize>,
    pub rf_periods: Option<usize>,
    pub initial_position: Option<[f64; 3]>,
    pub initial_velocity: Option<[f64; 3]>,
}

/// `"paper-table1"`, `"ideal"`, `{"values": [α0, α1, γ1, α2, β2, γ2]}` or
/// `{"fit_report": "path/to/fit_report.json"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSource {
    Keyword(String),
    Values { values: [f64; 6] },
    FitReport { fit_report: PathBuf },
}

impl Default for CoefficientSource {
    fn default() -> Self {
        CoefficientSource::Keyword("paper-table1".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    /// Hz; 55.6 kHz.
    pub target_hz: Option<f64>,
    pub axis: Option<Axis>,
    pub model: Option<FrequencyModel>,
    /// V; 550 to 950 in 50 V steps.
    pub v_rf: Option<Vec<f64>>,
    pub dc_bracket: Option<[f64; 2]>,
    pub tolerance_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// m; 0 to 6 mm in 1 mm steps.
    pub heights: Option<Vec<f64>>,
    /// Sweep operating point; (21.75 V, 550 V).
    pub u_dc: Option<f64>,
    pub v_rf: Option<f64>,
}

fn config_error(path: impl std::fmt::Display, msg: impl std::fmt::Display) -> CliError {
    CliError::config(format!("config field `{path}`: {msg}"))
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when possible.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(config_error(path, "empty path segment"));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().unwrap();
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Loads the config file (if any), applies overrides and parses.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for (k, v) in overrides {
        apply_override(&mut root, k, v)?;
    }
    parse(root)
}

pub fn parse(root: Value) -> Result<RunConfig, CliError> {
    serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        config_error(path, e.into_inner())
    })
}

impl RunConfig {
    pub fn geometry(&self) -> Result<TrapGeometry, CliError> {
        let g = &self.geometry;
        let r0 = g.r0.unwrap_or(0.02);
        let mut geom = TrapGeometry::ideal(r0);
        if let Some(z0) = g.z0 {
            geom.z0 = z0;
        }
        geom.truncation_radius = g.truncation_radius.unwrap_or(2.0 * r0);
        let f = &g.filament;
        if f.enabled {
            let d = FilamentConfig::paper();
            geom = geom.with_filament(FilamentConfig {
                length: f.length.unwrap_or(d.length),
                width: f.width.unwrap_or(d.width),
                thickness: f.thickness.unwrap_or(d.thickness),
                height_above_lower_endcap: f.height_above_lower_endcap.unwrap_or(d.height_above_lower_endcap),
                lateral_offset_x: f.lateral_offset_x.unwrap_or(d.lateral_offset_x),
            });
        }
        geom.validate()?;
        Ok(geom)
    }

    pub fn grid_spec(&self, geom: &TrapGeometry) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        let n = g.nodes.unwrap_or(129);
        let spec = GridSpec {
            nx: g.nx.unwrap_or(n),
            ny: g.ny.unwrap_or(n),
            nz: g.nz.unwrap_or(n),
            extent: g.extent.unwrap_or(1.2 * geom.r0),
        };
        spec.validate(geom.r0)?;
        Ok(spec)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.solver.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            max_iterations: self.solver.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            omega: self.solver.omega,
            exec: self.exec,
        }
    }

    pub fn pipeline(&self, geom: &TrapGeometry) -> Result<FieldPipeline, CliError> {
        Ok(FieldPipeline {
            grid: self.grid_spec(geom)?,
            solver: self.solver(),
            fit_region_radius: self.fit.region_radius.unwrap_or(DEFAULT_REGION_FRACTION * geom.r0),
        })
    }

    pub fn ion(&self) -> Result<IonSpecies, CliError> {
        let i = &self.ion;
        let charge = i.charge_state.unwrap_or(1);
        let (mass_u, label) = match i.species {
            Species::Eu151 => (paultrap::model::EU151_MASS_U, "151Eu"),
            Species::Eu153 => (paultrap::model::EU153_MASS_U, "153Eu"),
            Species::Custom => (
                i.mass_u.ok_or_else(|| config_error("ion.mass_u", "required for species `custom`"))?,
                "custom",
            ),
        };
        let label = if charge == 1 { format!("{label}+") } else { format!("{label}{charge:+}") };
        Ok(IonSpecies::from_mass_units(i.mass_u.unwrap_or(mass_u), charge, label)?)
    }

    pub fn operating_point(&self) -> Result<OperatingPoint, CliError> {
        let o = &self.operating_point;
        let f = o.drive_frequency_hz.unwrap_or(PAPER_DRIVE_FREQUENCY_HZ);
        Ok(OperatingPoint::new(
            o.u_dc.unwrap_or(-5.3),
            o.v_rf.unwrap_or(700.0),
            2.0 * std::f64::consts::PI * f,
        )?)
    }

    pub fn integration(&self) -> Result<IntegrationConfig, CliError> {
        let d = IntegrationConfig::default();
        let i = &self.integration;
        let cfg = IntegrationConfig {
            steps_per_rf_period: i.steps_per_rf_period.unwrap_or(d.steps_per_rf_period),
            rf_periods: i.rf_periods.unwrap_or(d.rf_periods),
            initial_position: i.initial_position.unwrap_or(d.initial_position),
            initial_velocity: i.initial_velocity.unwrap_or(d.initial_velocity),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn coefficients(&self) -> Result<MultipoleCoefficients, CliError> {
        match &self.coefficients {
            CoefficientSource::Keyword(k) => match k.as_str() {
                "paper-table1" => Ok(paper_table_coefficients()),
                "ideal" => Ok(ideal_coefficients()),
                other => Err(config_error(
                    "coefficients",
                    format!("unknown keyword `{other}` (expected `paper-table1`, `ideal`, {{\"values\": [...]}} or {{\"fit_report\": path}})"),
                )),
            },
            CoefficientSource::Values { values } => Ok(MultipoleCoefficients::from_values(*values, [0.0; 6])),
            CoefficientSource::FitReport { fit_report } => {
                let text = std::fs::read_to_string(fit_report).map_err(|e| {
                    config_error("coefficients.fit_report", format!("cannot read {}: {e}", fit_report.display()))
                })?;
                let report: FitReport = serde_json::from_str(&text).map_err(|e| {
                    config_error("coefficients.fit_report", format!("{} is not a fit report: {e}", fit_report.display()))
                })?;
                Ok(report.coefficients)
            }
        }
    }

    pub fn trace_request(&self) -> Result<(TraceRequest, Vec<f64>), CliError> {
        let t = &self.trace;
        let geometry = self.geometry()?;
        let req = TraceRequest {
            target_hz: t.target_hz.unwrap_or(55.6e3),
            axis: t.axis.unwrap_or(Axis::Z),
            model: t.model.unwrap_or(FrequencyModel::IdealPseudo),
            coefficients: self.coefficients()?,
            ion: self.ion()?,
            geometry,
            op_template: self.operating_point()?,
            integration: self.integration()?,
            dc_bracket: t.dc_bracket.map_or(DEFAULT_DC_BRACKET, |b| (b[0], b[1])),
            tolerance_hz: t.tolerance_hz.unwrap_or(DEFAULT_TRACE_TOLERANCE_HZ),
            exec: self.exec,
        };
        let v_rf = t
            .v_rf
            .clone()
            .unwrap_or_else(|| (0..9).map(|i| 550.0 + 50.0 * i as f64).collect());
        Ok((req, v_rf))
    }

    pub fn sweep_heights(&self) -> Vec<f64> {
        self.sweep
            .heights
            .clone()
            .unwrap_or_else(|| (0..=6).map(|i| i as f64 * 1e-3).collect())
    }

    pub fn sweep_operating_point(&self) -> Result<OperatingPoint, CliError> {
        let op = self.operating_point()?;
        Ok(op.with_voltages(self.sweep.u_dc.unwrap_or(21.75), self.sweep.v_rf.unwrap_or(550.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_config_resolves_to_paper_defaults() {
        let cfg = parse(json!({})).unwrap();
        let geom = cfg.geometry().unwrap();
        assert_eq!(geom, paultrap::make_paper_trap());
        assert_eq!(cfg.grid_spec(&geom).unwrap(), GridSpec::cubic(129, 1.2 * geom.r0));
        assert_eq!(cfg.coefficients().unwrap(), paper_table_coefficients());
        let op = cfg.operating_point().unwrap();
        assert_eq!((op.u_dc, op.v_rf), (-5.3, 700.0));
    }

    #[test]
    fn overrides_follow_json_paths() {
        let mut root = json!({"grid": {"nodes": 65}});
        apply_override(&mut root, "grid.extent", "0.03").unwrap();
        apply_override(&mut root, "geometry.filament.enabled", "false").unwrap();
        apply_override(&mut root, "trace.axis", "radial").unwrap();
        apply_override(&mut root, "coefficients", "ideal").unwrap();
        let cfg = parse(root).unwrap();
        assert_eq!(cfg.grid.nodes, Some(65));
        assert_eq!(cfg.grid.extent, Some(0.03));
        assert!(cfg.geometry().unwrap().filament.is_none());
        assert_eq!(cfg.trace.axis, Some(Axis::X));
        assert_eq!(cfg.coefficients().unwrap(), ideal_coefficients());
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse(json!({"grid": {"nodes": "many"}})).unwrap_err();
        assert!(err.message.contains("grid.nodes"), "{}", err.message);
        let err = parse(json!({"operating_point": {"vrf": 1.0}})).unwrap_err();
        assert!(err.message.contains("operating_point"), "{}", err.message);
        let cfg = parse(json!({"grid": {"nodes": 64}})).unwrap();
        let err = cfg.grid_spec(&cfg.geometry().unwrap()).unwrap_err();
        assert!(err.message.contains("grid.n"), "{}", err.message);
    }

    #[test]
    fn inline_coefficients() {
        let cfg = parse(json!({"coefficients": {"values": [0.5, 0.0, 0.0, 0.5, 0.5, -1.0]}})).unwrap();
        assert_eq!(cfg.coefficients().unwrap().values(), ideal_coefficients().values());
        let cfg = parse(json!({"coefficients": "table-2"})).unwrap();
        assert_eq!(cfg.coefficients().unwrap_err().code, crate::EXIT_CONFIG);
    }
}
