//! TOML run configuration. Values are in laboratory units (fF, GHz, MHz,
//! ns, flux in units of π); conversion to internal units happens here.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::propagate::{PropagationSettings, Scheme};
use crate::pulse::{ProfileGrid, DEFAULT_GAP_SCALE, DEFAULT_SHAPE_A, PROFILE_POINTS};
use crate::spectrum::SolverSettings;
use crate::stc::StcParams;
use crate::units::{ghz, mhz, ns};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub circuit: CircuitSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub pulse: PulseSection,
    pub gate: GateSection,
    pub t2: T2Section,
    pub stc: StcSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitSection {
    /// Upper triangle read; diagonal entries are shunts.
    #[serde(rename = "capacitance_fF")]
    pub capacitance_ff: [[f64; 4]; 4],
    #[serde(rename = "frequencies_GHz")]
    pub frequencies_ghz: [f64; 4],
    pub j5_ratio: f64,
}

impl Default for CircuitSection {
    fn default() -> Self {
        let c = CircuitParams::reference_design();
        let mut capacitance_ff = [[0.0; 4]; 4];
        for (i, row) in capacitance_ff.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().skip(i) {
                *v = c.capacitance[i][j] / crate::units::FEMTO;
            }
        }
        Self {
            capacitance_ff,
            frequencies_ghz: c.omega_design.map(crate::units::to_ghz),
            j5_ratio: c.j5_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cutoff: usize,
    pub levels: usize,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub min_overlap: f64,
    pub drive_term: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            cutoff: 7,
            levels: s.levels,
            tol_rel: s.tol_rel,
            max_iter: s.max_iter,
            min_overlap: s.min_overlap,
            drive_term: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub theta_start_over_pi: f64,
    pub theta_stop_over_pi: f64,
    pub theta_points: usize,
    /// Rows of the ZZ map; empty means the circuit's ω4 only.
    #[serde(rename = "omega4_GHz")]
    pub omega4_ghz: Vec<f64>,
    /// Flux where labels are seeded from product states.
    pub seed_theta_over_pi: f64,
    /// Refine ζ_ZZ zeros by bisection.
    pub refine_zeros: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            theta_start_over_pi: 0.5,
            theta_stop_over_pi: 1.0,
            theta_points: 101,
            omega4_ghz: Vec::new(),
            seed_theta_over_pi: 0.61,
            refine_zeros: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub shape_a: f64,
    pub gap_scale: f64,
    #[serde(rename = "gate_times_ns")]
    pub gate_times_ns: Vec<f64>,
    /// Optional total phase s_f; must match the first gate time if both set.
    pub s_f: Option<f64>,
    pub idle_theta_over_pi: f64,
    pub profile_points: usize,
    pub profile_step_over_pi: f64,
    pub samples: usize,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            shape_a: DEFAULT_SHAPE_A,
            gap_scale: DEFAULT_GAP_SCALE,
            gate_times_ns: vec![24.0],
            s_f: None,
            idle_theta_over_pi: 0.61,
            profile_points: PROFILE_POINTS,
            profile_step_over_pi: 0.01,
            samples: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    pub dt_ns: f64,
    pub scheme: Scheme,
    pub certify: bool,
    pub certificate_tol: f64,
    pub max_halvings: usize,
    /// Levels solved at the idle point (qubit states plus leakage channels).
    pub idle_levels: usize,
    /// Calibrate T_g to θ_CPHASE = π inside `bracket_ns` instead of
    /// simulating the listed gate times.
    pub calibrate: bool,
    pub bracket_ns: [f64; 2],
    pub angle_tol: f64,
}

impl Default for GateSection {
    fn default() -> Self {
        let p = PropagationSettings::default();
        Self {
            dt_ns: p.dt * 1e9,
            scheme: p.scheme,
            certify: p.certify,
            certificate_tol: p.certificate_tol,
            max_halvings: p.max_halvings,
            idle_levels: 16,
            calibrate: false,
            bracket_ns: [22.0, 30.0],
            angle_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T2Section {
    /// Flux-noise amplitude in units of Φ0.
    pub a_phi: f64,
    pub theta_over_pi: Vec<f64>,
    /// Also report the minimum over [idle, π].
    pub minimum: bool,
    pub minimum_step_over_pi: f64,
}

impl Default for T2Section {
    fn default() -> Self {
        Self {
            a_phi: 1e-5,
            theta_over_pi: vec![0.61],
            minimum: true,
            minimum_step_over_pi: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StcSection {
    #[serde(rename = "omega1_GHz")]
    pub omega1_ghz: f64,
    #[serde(rename = "anharmonicity_MHz")]
    pub anharmonicity_mhz: f64,
    #[serde(rename = "g13_MHz")]
    pub g13_mhz: f64,
    #[serde(rename = "g23_MHz")]
    pub g23_mhz: f64,
    #[serde(rename = "g12_MHz")]
    pub g12_mhz: f64,
    pub levels: usize,
    #[serde(rename = "omega2_GHz")]
    pub omega2_ghz: [f64; 2],
    #[serde(rename = "omega3_GHz")]
    pub omega3_ghz: [f64; 2],
    pub points: usize,
}

impl Default for StcSection {
    fn default() -> Self {
        Self {
            omega1_ghz: 5.0,
            anharmonicity_mhz: 250.0,
            g13_mhz: 250.0,
            g23_mhz: 250.0,
            g12_mhz: 25.0,
            levels: 6,
            omega2_ghz: [4.0, 6.0],
            omega3_ghz: [6.5, 8.0],
            points: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub format: Format,
    pub cache: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            format: Format::Csv,
            cache: true,
        }
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

fn finite_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    check(
        v.is_finite() && v >= lo && v <= hi,
        format!("{name} = {v} outside [{lo}, {hi}]"),
    )
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks on every physical value.
    pub fn validate(&self) -> Result<()> {
        let c = &self.circuit;
        for i in 0..4 {
            finite_range("shunt capacitance (fF)", c.capacitance_ff[i][i], 1e-3, 1e4)?;
            for j in i + 1..4 {
                finite_range(
                    "coupling capacitance (fF)",
                    c.capacitance_ff[i][j],
                    0.0,
                    1e4,
                )?;
            }
            finite_range("transmon frequency (GHz)", c.frequencies_ghz[i], 0.1, 100.0)?;
        }
        finite_range("j5_ratio", c.j5_ratio, 0.0, 10.0)?;
        self.circuit_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;

        let s = &self.solver;
        check(
            (1..=12).contains(&s.cutoff),
            format!("cutoff = {} outside 1..=12", s.cutoff),
        )?;
        check(
            (4..=40).contains(&s.levels),
            format!("levels = {} outside 4..=40", s.levels),
        )?;
        finite_range("tol_rel", s.tol_rel, 1e-14, 1e-4)?;
        check(s.max_iter >= 10, "max_iter must be at least 10")?;
        finite_range("min_overlap", s.min_overlap, 0.0, 1.0)?;

        let w = &self.sweep;
        finite_range("theta_start_over_pi", w.theta_start_over_pi, -4.0, 4.0)?;
        finite_range("theta_stop_over_pi", w.theta_stop_over_pi, -4.0, 4.0)?;
        check(
            w.theta_stop_over_pi > w.theta_start_over_pi,
            "theta_stop_over_pi must exceed theta_start_over_pi",
        )?;
        check(w.theta_points >= 2, "theta_points must be at least 2")?;
        finite_range("seed_theta_over_pi", w.seed_theta_over_pi, -4.0, 4.0)?;
        for &f in &w.omega4_ghz {
            finite_range("omega4_GHz", f, 0.1, 100.0)?;
        }
        check(
            w.omega4_ghz.windows(2).all(|p| p[1] > p[0]),
            "omega4_GHz must be increasing",
        )?;

        let p = &self.pulse;
        finite_range("shape_a", p.shape_a, -10.0, 0.5 - 1e-9)?;
        finite_range("gap_scale", p.gap_scale, 1e-6, 1.0)?;
        for &t in &p.gate_times_ns {
            finite_range("gate time (ns)", t, 1e-3, 1e4)?;
        }
        if let Some(sf) = p.s_f {
            finite_range("s_f", sf, 1e-6, 1e7)?;
        }
        finite_range("idle_theta_over_pi", p.idle_theta_over_pi, 0.0, 1.0)?;
        check(p.profile_points >= 3, "profile_points must be at least 3")?;
        finite_range("profile_step_over_pi", p.profile_step_over_pi, 1e-5, 0.5)?;
        check(p.samples >= 2, "samples must be at least 2")?;

        let g = &self.gate;
        finite_range("dt_ns", g.dt_ns, 1e-7, 10.0)?;
        finite_range("certificate_tol", g.certificate_tol, 1e-14, 1.0)?;
        check(g.max_halvings <= 12, "max_halvings must be at most 12")?;
        check(
            (4..=40).contains(&g.idle_levels),
            "idle_levels outside 4..=40",
        )?;
        finite_range("bracket_ns[0]", g.bracket_ns[0], 0.0, 1e4)?;
        check(
            g.bracket_ns[1] > g.bracket_ns[0],
            "bracket_ns must be increasing",
        )?;
        finite_range("angle_tol", g.angle_tol, 1e-12, 1.0)?;

        finite_range("a_phi", self.t2.a_phi, 1e-12, 1.0)?;
        for &t in &self.t2.theta_over_pi {
            finite_range("t2 theta_over_pi", t, -4.0, 4.0)?;
        }
        finite_range(
            "minimum_step_over_pi",
            self.t2.minimum_step_over_pi,
            1e-5,
            0.5,
        )?;

        let t = &self.stc;
        finite_range("stc omega1_GHz", t.omega1_ghz, 0.1, 100.0)?;
        finite_range("stc anharmonicity_MHz", t.anharmonicity_mhz, 0.0, 1e4)?;
        for v in [t.g13_mhz, t.g23_mhz, t.g12_mhz] {
            finite_range("stc coupling (MHz)", v, -1e4, 1e4)?;
        }
        check((2..=21).contains(&t.levels), "stc levels outside 2..=21")?;
        for r in [t.omega2_ghz, t.omega3_ghz] {
            finite_range("stc grid (GHz)", r[0], 0.1, 100.0)?;
            check(
                r[1] > r[0] && r[1].is_finite(),
                "stc grid ranges must be increasing",
            )?;
        }
        check(t.points >= 2, "stc points must be at least 2")?;
        check(
            !self.output.directory.is_empty(),
            "output directory must not be empty",
        )
    }

    pub fn circuit_params(&self) -> CircuitParams {
        CircuitParams::from_ff_ghz(
            self.circuit.capacitance_ff,
            self.circuit.frequencies_ghz,
            self.circuit.j5_ratio,
        )
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            cutoff: self.solver.cutoff,
            levels: self.solver.levels,
            tol_rel: self.solver.tol_rel,
            max_iter: self.solver.max_iter,
            min_overlap: self.solver.min_overlap,
            ..SolverSettings::default()
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        crate::stc::linspace(
            self.sweep.theta_start_over_pi * PI,
            self.sweep.theta_stop_over_pi * PI,
            self.sweep.theta_points,
        )
    }

    pub fn omega4(&self) -> Vec<f64> {
        self.sweep.omega4_ghz.iter().map(|&f| ghz(f)).collect()
    }

    pub fn profile_grid(&self) -> ProfileGrid {
        ProfileGrid {
            start: self.pulse.idle_theta_over_pi * PI,
            end: PI,
            points: self.pulse.profile_points,
            solve_step: self.pulse.profile_step_over_pi * PI,
        }
    }

    pub fn propagation_settings(&self) -> PropagationSettings {
        PropagationSettings {
            dt: ns(self.gate.dt_ns),
            scheme: self.gate.scheme,
            certificate_tol: self.gate.certificate_tol,
            max_halvings: self.gate.max_halvings,
            certify: self.gate.certify,
            ..PropagationSettings::default()
        }
    }

    pub fn stc_params(&self) -> StcParams {
        let t = &self.stc;
        StcParams {
            omega: [ghz(t.omega1_ghz), ghz(t.omega1_ghz), ghz(t.omega3_ghz[0])],
            anharmonicity: [mhz(t.anharmonicity_mhz); 3],
            g13: mhz(t.g13_mhz),
            g23: mhz(t.g23_mhz),
            g12: mhz(t.g12_mhz),
            levels: t.levels,
        }
    }

    pub fn stc_grids(&self) -> (Vec<f64>, Vec<f64>) {
        let t = &self.stc;
        (
            crate::stc::linspace(ghz(t.omega2_ghz[0]), ghz(t.omega2_ghz[1]), t.points),
            crate::stc::linspace(ghz(t.omega3_ghz[0]), ghz(t.omega3_ghz[1]), t.points),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        let c = cfg.circuit_params();
        let r = CircuitParams::reference_design();
        for i in 0..4 {
            for j in i..4 {
                assert!((c.capacitance[i][j] - r.capacitance[i][j]).abs() < 1e-27);
            }
            assert!((c.omega_design[i] / r.omega_design[i] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml_str("[solver]\ncutof = 5\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(RunConfig::from_toml_str("[solver]\ncutoff = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[pulse]\nshape_a = 0.6\n").is_err());
        assert!(RunConfig::from_toml_str(
            "[sweep]\ntheta_start_over_pi = 1.0\ntheta_stop_over_pi = 0.5\n"
        )
        .is_err());
        let ok = RunConfig::from_toml_str(
            "[sweep]\nomega4_GHz = [8.5]\n[gate]\nscheme = \"midpoint\"\n",
        )
        .unwrap();
        assert_eq!(ok.omega4().len(), 1);
        assert_eq!(ok.gate.scheme, Scheme::Midpoint);
    }
}
