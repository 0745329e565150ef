//! Subcommands of the `dtc` tool: configuration in, tables and JSON files
//! out, with a content-addressed cache of expensive per-point results.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::circuit::DerivedParams;
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::gate::{calibrate_designed_gate, unwrap_angles, GateResult, GateSetup};
use crate::output::{self, fmt_sig, Artifact};
use crate::pulse::{
    compute_gap_profile, design_pulse, estimate_nonadiabatic_error, modified_gap, GapProfile,
    PulseLength,
};
use crate::spectrum::{
    estimate_t2, find_zz_zeros, minimum_t2, sweep_zz_row, Label, LabeledLevel, LabeledSpectrum,
    SolverSettings, SpectrumSolver, SweepOptions, T2Estimate, ZZSweep, ZeroReport,
};
use crate::stc::stc_zz_sweep;
use crate::units::ns;

/// Largest continuation step used when walking to an isolated flux point.
const WALK_STEP: f64 = 0.01 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DeriveParams,
    ZzSweep,
    Levels,
    DesignPulse,
    SimulateGate,
    StcSweep,
    T2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DeriveParams => "derive-params",
            Command::ZzSweep => "zz-sweep",
            Command::Levels => "levels",
            Command::DesignPulse => "design-pulse",
            Command::SimulateGate => "simulate-gate",
            Command::StcSweep => "stc-sweep",
            Command::T2 => "t2",
        }
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub cutoff: Option<usize>,
    pub no_drive_term: bool,
    pub format: Option<Format>,
    pub omega4_ghz: Option<Vec<f64>>,
}

/// Content-addressed JSON store.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// SHA-256 of the kind, crate version and canonical JSON of `key`.
    pub fn key_hash<K: Serialize>(kind: &str, key: &K) -> String {
        let doc = json!({ "kind": kind, "version": env!("CARGO_PKG_VERSION"), "key": key });
        let digest = Sha256::digest(serde_json::to_vec(&doc).expect("cache key serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn path<K: Serialize>(&self, kind: &str, key: &K) -> PathBuf {
        self.dir
            .join(format!("{kind}-{}.json", Self::key_hash(kind, key)))
    }

    pub fn get_or_compute<K, T, F>(&self, kind: &str, key: &K, compute: F) -> Result<T>
    where
        K: Serialize,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let path = self.path(kind, key);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(v) = serde_json::from_slice(&bytes) {
                return Ok(v);
            }
        }
        let v = compute()?;
        fs::create_dir_all(&self.dir)?;
        let s = serde_json::to_string(&v).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        output::write_atomic(&path, &s)?;
        Ok(v)
    }
}

fn cached<K, T, F>(cache: Option<&Cache>, kind: &str, key: &K, compute: F) -> Result<T>
where
    K: Serialize,
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T>,
{
    match cache {
        Some(c) => c.get_or_compute(kind, key, compute),
        None => compute(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ZZRow {
    zeta: Vec<f64>,
    /// None when ζ vanishes identically along the row.
    zeros: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LevelRow {
    theta_ex: f64,
    levels: Vec<(Label, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GateRun {
    result: GateResult,
    p_e: f64,
}

pub struct Runner {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub format: Format,
    cache: Option<Cache>,
}

impl Runner {
    /// Applies overrides and validates; nothing is written.
    pub fn new(mut config: RunConfig, overrides: Overrides) -> Result<Self> {
        if let Some(n) = overrides.cutoff {
            config.solver.cutoff = n;
        }
        if overrides.no_drive_term {
            config.solver.drive_term = false;
        }
        if let Some(f) = overrides.format {
            config.output.format = f;
        }
        if let Some(w) = overrides.omega4_ghz {
            config.sweep.omega4_ghz = w;
        }
        if let Some(o) = &overrides.out {
            config.output.directory = o.to_string_lossy().into_owned();
        }
        config.validate()?;
        let out_dir = PathBuf::from(&config.output.directory);
        let cache = config
            .output
            .cache
            .then(|| Cache::new(out_dir.join("cache")));
        Ok(Self {
            format: config.output.format,
            config,
            out_dir,
            cache,
        })
    }

    pub fn from_path(path: &Path, overrides: Overrides) -> Result<Self> {
        Self::new(RunConfig::load(path)?, overrides)
    }

    /// Computes and writes every artifact of `cmd`; returns the paths.
    pub fn run(&self, cmd: Command) -> Result<Vec<PathBuf>> {
        let artifacts = self.artifacts(cmd)?;
        output::write_artifacts(&self.out_dir, &artifacts)
    }

    pub fn artifacts(&self, cmd: Command) -> Result<Vec<Artifact>> {
        match cmd {
            Command::DeriveParams => self.derive_params(),
            Command::ZzSweep => self.zz_sweep(),
            Command::Levels => self.levels(),
            Command::DesignPulse => self.design_pulse(),
            Command::SimulateGate => self.simulate_gate(),
            Command::StcSweep => self.stc_sweep(),
            Command::T2 => self.t2(),
        }
    }

    fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    fn settings(&self) -> SolverSettings {
        self.config.solver_settings()
    }

    fn seed(&self) -> f64 {
        self.config.sweep.seed_theta_over_pi * PI
    }

    fn derive_params(&self) -> Result<Vec<Artifact>> {
        let d = DerivedParams::from_circuit(&self.config.circuit_params())?;
        Ok(vec![Artifact::table(
            "derived_params",
            &output::derived_params_table(&d),
            self.format,
        )])
    }

    fn zz_sweep(&self) -> Result<Vec<Artifact>> {
        let thetas = self.config.thetas();
        let circuit = self.config.circuit_params();
        let rows = {
            let o = self.config.omega4();
            if o.is_empty() {
                vec![circuit.omega_design[3]]
            } else {
                o
            }
        };
        let settings = self.settings();
        let opts = SweepOptions {
            seed_theta: self.seed(),
            keep_spectra: false,
        };
        let refine = self.config.sweep.refine_zeros;
        let computed: Vec<ZZRow> = rows
            .par_iter()
            .map(|&w4| {
                let key = json!({
                    "circuit": circuit.clone().with_omega(3, w4),
                    "solver": settings,
                    "thetas": thetas,
                    "seed": opts.seed_theta,
                    "refine": refine,
                });
                cached(self.cache(), "zz-row", &key, || {
                    let c = circuit.clone().with_omega(3, w4);
                    let solver = SpectrumSolver::for_circuit(&c, &settings)?;
                    let (zeta, _, brackets) = sweep_zz_row(&solver, &thetas, &opts)?;
                    let zeros = if refine {
                        let one = ZZSweep {
                            thetas: thetas.clone(),
                            omega4: vec![w4],
                            zeta: vec![zeta.clone()],
                            spectra: None,
                            brackets: vec![brackets],
                        };
                        match find_zz_zeros(&solver, &one, 0)? {
                            ZeroReport::Roots(r) => Some(r),
                            ZeroReport::Degenerate => None,
                        }
                    } else {
                        Some(Vec::new())
                    };
                    Ok(ZZRow { zeta, zeros })
                })
            })
            .collect::<Result<_>>()?;
        let sweep = ZZSweep {
            thetas,
            omega4: rows.clone(),
            zeta: computed.iter().map(|r| r.zeta.clone()).collect(),
            spectra: None,
            brackets: vec![Vec::new(); rows.len()],
        };
        let mut out = vec![Artifact::table(
            "zz_sweep",
            &output::zz_table(&sweep),
            self.format,
        )];
        if refine {
            let zeros: Vec<(f64, Option<Vec<f64>>)> = rows
                .iter()
                .zip(&computed)
                .map(|(&w, r)| (w, r.zeros.clone()))
                .collect();
            out.push(Artifact::table(
                "zz_zeros",
                &output::zz_zero_table(&zeros),
                self.format,
            ));
        }
        Ok(out)
    }

    fn levels(&self) -> Result<Vec<Artifact>> {
        let thetas = self.config.thetas();
        let mut circuit = self.config.circuit_params();
        if let Some(&w4) = self.config.omega4().first() {
            circuit = circuit.with_omega(3, w4);
        }
        let settings = self.settings();
        let key = json!({ "circuit": circuit, "solver": settings, "thetas": thetas, "seed": self.seed() });
        let rows: Vec<LevelRow> = cached(self.cache(), "levels", &key, || {
            let solver = SpectrumSolver::for_circuit(&circuit, &settings)?;
            let spectra = solver.sweep(&thetas, self.seed(), |_, _| Ok(()))?;
            Ok(spectra
                .iter()
                .map(|s| LevelRow {
                    theta_ex: s.theta_ex,
                    levels: s
                        .levels
                        .iter()
                        .map(|l| (l.label, l.energy, l.overlap))
                        .collect(),
                })
                .collect())
        })?;
        let spectra: Vec<LabeledSpectrum> = rows
            .into_iter()
            .map(|r| LabeledSpectrum {
                theta_ex: r.theta_ex,
                levels: r
                    .levels
                    .into_iter()
                    .map(|(label, energy, overlap)| LabeledLevel {
                        label,
                        energy,
                        overlap,
                    })
                    .collect(),
                vectors: Vec::new(),
                ground_energy: 0.0,
                max_residual: 0.0,
            })
            .collect();
        Ok(vec![Artifact::table(
            "levels",
            &output::levels_table(&spectra),
            self.format,
        )])
    }

    fn gap_profile(&self) -> Result<GapProfile> {
        let circuit = self.config.circuit_params();
        let settings = self.settings();
        let grid = self.config.profile_grid();
        let key = json!({ "circuit": circuit, "solver": settings, "grid": grid });
        cached(self.cache(), "gap-profile", &key, || {
            let solver = SpectrumSolver::for_circuit(&circuit, &settings)?;
            compute_gap_profile(&solver, &grid)
        })
    }

    fn pulse_length(&self, gate_time_ns: f64, first: bool) -> PulseLength {
        match (self.config.pulse.s_f, first) {
            (Some(s_f), true) => PulseLength::Both {
                gate_time: ns(gate_time_ns),
                s_f,
            },
            _ => PulseLength::GateTime(ns(gate_time_ns)),
        }
    }

    fn design_pulse(&self) -> Result<Vec<Artifact>> {
        let profile = self.gap_profile()?;
        let timing = modified_gap(&profile, self.config.pulse.gap_scale);
        let mut out = vec![Artifact::table(
            "gap_profile",
            &output::gap_profile_table(&timing),
            self.format,
        )];
        for (k, &t) in self.config.pulse.gate_times_ns.iter().enumerate() {
            let s = design_pulse(
                &timing,
                self.pulse_length(t, k == 0),
                self.config.pulse.shape_a,
                self.config.pulse.samples,
            )?;
            let p_e = estimate_nonadiabatic_error(&s);
            let stem = format!("pulse_{}ns", fmt_sig(t));
            out.push(Artifact::table(
                &stem,
                &output::pulse_table(&s),
                self.format,
            ));
            out.push(Artifact::json(
                &format!("{stem}_header.json"),
                &output::pulse_header(&s, p_e),
            ));
        }
        Ok(out)
    }

    fn gate_setup(&self) -> Result<GateSetup> {
        let circuit = self.config.circuit_params();
        let settings = SolverSettings {
            levels: self.config.gate.idle_levels,
            ..self.settings()
        };
        let solver = SpectrumSolver::for_circuit(&circuit, &settings)?;
        let idle = solver.seeded(self.config.pulse.idle_theta_over_pi * PI)?;
        GateSetup::new(
            solver
                .family()
                .clone()
                .with_drive_term(self.config.solver.drive_term),
            idle,
        )
    }

    fn gate_key(&self, extra: serde_json::Value) -> serde_json::Value {
        json!({
            "circuit": self.config.circuit_params(),
            "solver": self.settings(),
            "drive_term": self.config.solver.drive_term,
            "grid": self.config.profile_grid(),
            "pulse": {
                "shape_a": self.config.pulse.shape_a,
                "gap_scale": self.config.pulse.gap_scale,
                "samples": self.config.pulse.samples,
            },
            "gate": self.config.gate,
            "extra": extra,
        })
    }

    fn simulate_gate(&self) -> Result<Vec<Artifact>> {
        let profile = self.gap_profile()?;
        let timing = modified_gap(&profile, self.config.pulse.gap_scale);
        let prop = self.config.propagation_settings();
        let (a, samples) = (self.config.pulse.shape_a, self.config.pulse.samples);
        let mut setup: Option<GateSetup> = None;
        let mut runs: Vec<GateRun> = Vec::new();
        let mut times = self.config.pulse.gate_times_ns.clone();
        times.sort_by(f64::total_cmp);
        times.dedup();
        for &t in &times {
            let key = self.gate_key(json!({ "gate_time_ns": t }));
            let run = cached(self.cache(), "gate", &key, || {
                if setup.is_none() {
                    setup = Some(self.gate_setup()?);
                }
                let s = design_pulse(&timing, PulseLength::GateTime(ns(t)), a, samples)?;
                let result = setup.as_ref().expect("setup built").simulate(&s, &prop)?;
                Ok(GateRun {
                    result,
                    p_e: estimate_nonadiabatic_error(&s),
                })
            })?;
            runs.push(run);
        }
        let mut out = Vec::new();
        if !runs.is_empty() {
            let results: Vec<GateResult> = runs.iter().map(|r| r.result.clone()).collect();
            let theta = unwrap_angles(&results.iter().map(|r| r.theta_cphase).collect::<Vec<_>>());
            out.push(Artifact::table(
                "gate_sweep",
                &output::gate_table(&results, &theta),
                self.format,
            ));
            for r in &runs {
                let mut doc = output::gate_json(&r.result);
                doc["P_e_estimate"] = output::rounded_json(&r.p_e)?;
                out.push(Artifact::json(
                    &format!(
                        "gate_{}ns.json",
                        fmt_sig(crate::units::to_ns(r.result.gate_time))
                    ),
                    &doc,
                ));
            }
        }
        if self.config.gate.calibrate {
            let g = &self.config.gate;
            let key = self.gate_key(json!({ "calibrate": g.bracket_ns, "angle_tol": g.angle_tol }));
            let (result, history, degenerate): (GateResult, Vec<(f64, f64)>, bool) =
                cached(self.cache(), "calibration", &key, || {
                    let setup = match setup.take() {
                        Some(s) => s,
                        None => self.gate_setup()?,
                    };
                    let cal = calibrate_designed_gate(
                        &setup,
                        &timing,
                        a,
                        samples,
                        &prop,
                        [ns(g.bracket_ns[0]), ns(g.bracket_ns[1])],
                        g.angle_tol,
                    )?;
                    Ok((cal.result, cal.history, cal.degenerate))
                })?;
            let mut doc = output::gate_json(&result);
            doc["degenerate"] = json!(degenerate);
            doc["history_T_g_ns_theta_rad"] = output::rounded_json(
                &history
                    .iter()
                    .map(|&(t, th)| [crate::units::to_ns(t), th])
                    .collect::<Vec<_>>(),
            )?;
            out.push(Artifact::json("gate_calibration.json", &doc));
        }
        Ok(out)
    }

    fn stc_sweep(&self) -> Result<Vec<Artifact>> {
        let (w2, w3) = self.config.stc_grids();
        let map = stc_zz_sweep(&self.config.stc_params(), &w2, &w3)?;
        Ok(vec![Artifact::table(
            "stc_zz",
            &output::stc_table(&map),
            self.format,
        )])
    }

    fn t2(&self) -> Result<Vec<Artifact>> {
        let circuit = self.config.circuit_params();
        let settings = self.settings();
        let a_phi = self.config.t2.a_phi;
        let seed = self.seed();
        let solver = SpectrumSolver::for_circuit(&circuit, &settings)?;
        let mut points = Vec::new();
        for &t in &self.config.t2.theta_over_pi {
            let key = json!({ "circuit": circuit, "solver": settings, "theta": t, "a_phi": a_phi, "seed": seed });
            let e: T2Estimate = cached(self.cache(), "t2", &key, || {
                let anchor = solver.walk(seed, t * PI, WALK_STEP)?;
                estimate_t2(&solver, &anchor, t * PI, a_phi)
            })?;
            points.push(e);
        }
        let mut out = vec![Artifact::table(
            "t2",
            &output::t2_table(&points),
            self.format,
        )];
        if self.config.t2.minimum {
            let start = self.config.pulse.idle_theta_over_pi;
            let step = self.config.t2.minimum_step_over_pi;
            let n = ((1.0 - start) / step).ceil() as usize;
            let thetas = crate::stc::linspace(start * PI, PI, n + 1);
            let key =
                json!({ "circuit": circuit, "solver": settings, "thetas": thetas, "a_phi": a_phi });
            let mins: [T2Estimate; 2] = cached(self.cache(), "t2-minimum", &key, || {
                minimum_t2(&solver, &thetas, a_phi)
            })?;
            let mut t = output::Table::new(&["qubit", "theta_ex_over_pi", "T2_us"]);
            for (q, e) in mins.iter().enumerate() {
                t.push(vec![
                    output::Cell::Int(q as i64 + 1),
                    crate::units::to_pi_units(e.theta_ex).into(),
                    (e.t2[q] * 1e6).into(),
                ]);
            }
            out.push(Artifact::table("t2_minimum", &t, self.format));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.output.directory = dir.to_string_lossy().into_owned();
        c.solver.cutoff = 2;
        c.solver.levels = 6;
        c.sweep.theta_start_over_pi = 0.6;
        c.sweep.theta_stop_over_pi = 0.64;
        c.sweep.theta_points = 3;
        c.sweep.refine_zeros = false;
        c.stc.points = 6;
        c
    }

    #[test]
    fn cache_keys_are_stable_and_distinct() {
        let a = Cache::key_hash("zz-row", &json!({"x": 1.0}));
        let b = Cache::key_hash("zz-row", &json!({"x": 1.0}));
        let c = Cache::key_hash("zz-row", &json!({"x": 1.0000000000000002}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn reruns_are_byte_identical_and_cache_hits_agree() {
        let dir = tempfile::tempdir().unwrap();
        let r = Runner::new(quick_config(dir.path()), Overrides::default()).unwrap();
        let cold = r.artifacts(Command::ZzSweep).unwrap();
        let warm = r.artifacts(Command::ZzSweep).unwrap();
        assert_eq!(cold, warm);
        assert!(dir.path().join("cache").read_dir().unwrap().count() >= 1);
        let stc1 = r.artifacts(Command::StcSweep).unwrap();
        let stc2 = r.artifacts(Command::StcSweep).unwrap();
        assert_eq!(stc1, stc2);
        assert!(stc1[0]
            .contents
            .starts_with("omega2_GHz,omega3_GHz,zeta_zz_over_2pi_MHz,in_straddling_band\n"));
    }

    #[test]
    fn overrides_apply_before_validation() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides {
            cutoff: Some(0),
            ..Overrides::default()
        };
        assert!(matches!(
            Runner::new(quick_config(dir.path()), o),
            Err(Error::Config(_))
        ));
        let o = Overrides {
            omega4_ghz: Some(vec![8.5]),
            format: Some(Format::Json),
            no_drive_term: true,
            ..Overrides::default()
        };
        let r = Runner::new(quick_config(dir.path()), o).unwrap();
        assert_eq!(r.config.sweep.omega4_ghz, vec![8.5]);
        assert!(!r.config.solver.drive_term);
        let a = r.artifacts(Command::DeriveParams).unwrap();
        assert_eq!(a[0].name, "derived_params.json");
    }
}
