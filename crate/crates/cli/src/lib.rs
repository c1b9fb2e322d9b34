//! Pipeline stages behind the `lossyrom` binary.
//!
//! Every stage reads the artifacts of earlier stages from the bundle
//! directory and writes its own JSON artifact, a CSV table for plotting and
//! an entry in `manifest.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use lossyrom::forward::{assemble_fd, exact_spectral_data, sample_transfer};
use lossyrom::grid::spectrally_matched_grid;
use lossyrom::invert::{
    eigenbasis, impedance_from_rom, loss_direct, loss_interpolants, loss_simple, reg_by_discrepancy,
};
use lossyrom::media::{make_profile, mean_loss, MediumFile};
use lossyrom::optim::{default_omega_max, fourier_profile, gauss_newton};
use lossyrom::ratfit::{add_noise, estimate_r0, fit_poles_residues, SpectralFile};
use lossyrom::rom::{extract_coefficients, lanczos, passivity_scan, PassivityReport};
use lossyrom::sampled::{relative_error, uniform_grid};
use lossyrom::{
    Extraction, FourierMedium, GnSettings, InversionResult, MediumKind, MediumProfile, Reorth,
    RomCoefficients, RomMatrix, SpectralData, StaggeredGrid, TransferSamples,
};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Points on which estimated profiles are tabulated.
pub const TABLE_POINTS: usize = 1001;
/// Frequencies in the passivity scan of the ROM transfer function.
pub const PASSIVITY_POINTS: usize = 2000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MediumSpec {
    /// A profile in the media JSON layout.
    File {
        file: PathBuf,
    },
    Inline(MediumKind),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub medium: Option<MediumSpec>,
    pub t_max: f64,
    pub n: usize,
    /// Defaults to the band edge table for `n`.
    pub omega_max: Option<f64>,
    pub n_samples: usize,
    pub fd_cells: usize,
    pub extraction: Extraction,
    pub noise: f64,
    pub seed: u64,
    pub reg: f64,
    /// When set, `reg` is replaced by the discrepancy choice for this
    /// relative residual of the loss system.
    pub reg_target: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub delta: f64,
    pub reorth: Reorth,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let gn = GnSettings::default();
        ExperimentConfig {
            medium: None,
            t_max: 1.0,
            n: 10,
            omega_max: None,
            n_samples: 10000,
            fd_cells: 3000,
            extraction: Extraction::Ratfit,
            noise: 0.0,
            seed: 0,
            reg: 1e-3,
            reg_target: None,
            max_iter: gn.max_iter,
            tol: gn.tol,
            delta: gn.delta,
            reorth: Reorth::Auto,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config; relative medium paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        if let Some(MediumSpec::File { file }) = &mut cfg.medium {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.n < 1 {
            return Err(Failure::input("n must be at least 1"));
        }
        if !(self.t_max > 0.0) {
            return Err(Failure::input("t_max must be positive"));
        }
        if let Some(w) = self.omega_max {
            if !(w > 0.0) {
                return Err(Failure::input("omega_max must be positive"));
            }
        }
        if !(self.noise >= 0.0) || !(self.reg >= 0.0) {
            return Err(Failure::input("noise and reg must be nonnegative"));
        }
        Ok(())
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
            .unwrap_or_else(|| default_omega_max(self.n, self.t_max))
    }

    /// First 16 hex digits of the SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    pub fn gn_settings(&self) -> GnSettings {
        GnSettings {
            max_iter: self.max_iter,
            tol: self.tol,
            delta: self.delta,
            fd_cells: self.fd_cells,
            reorth: self.reorth,
            ..GnSettings::default()
        }
    }

    fn medium(&self) -> Result<MediumProfile, Failure> {
        match &self.medium {
            None => Err(Failure::input("config has no medium")),
            Some(MediumSpec::Inline(kind)) => {
                make_profile(kind, self.t_max, self.fd_cells).map_err(Failure::input)
            }
            Some(MediumSpec::File { file }) => {
                let text = fs::read_to_string(file)
                    .map_err(|e| Failure::input(format!("medium file {}: {e}", file.display())))?;
                let f: MediumFile = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("medium file {}: {e}", file.display())))?;
                MediumProfile::from_samples(f.t_max, f.zeta, f.loss).map_err(Failure::input)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Forward,
    Fit,
    Rom,
    Grid,
    Invert,
    Optimize,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Forward,
        Stage::Fit,
        Stage::Rom,
        Stage::Grid,
        Stage::Invert,
        Stage::Optimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Forward => "forward",
            Stage::Fit => "fit",
            Stage::Rom => "rom",
            Stage::Grid => "grid",
            Stage::Invert => "invert",
            Stage::Optimize => "optimize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exit code 2 for bad inputs (config, medium file, missing artifacts),
/// 1 for numerical failures inside a stage.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Stage(anyhow::Error),
}

impl Failure {
    fn input(e: impl fmt::Display) -> Self {
        Failure::Input(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Stage(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Stage(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

impl From<lossyrom::Error> for Failure {
    fn from(e: lossyrom::Error) -> Self {
        Failure::Stage(e.into())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RomArtifact {
    pub matrix: RomMatrix,
    pub coefficients: RomCoefficients,
    pub passivity: PassivityReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InversionArtifact {
    pub reg: f64,
    pub direct: InversionResult,
    pub simple: InversionResult,
}

/// An output directory together with the config that fills it.
pub struct Bundle {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub hash: String,
}

impl Bundle {
    pub fn new(dir: PathBuf, config: ExperimentConfig) -> Self {
        let hash = config.hash();
        Bundle { dir, config, hash }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.path(name), text + "\n").with_context(|| format!("writing {name}"))
    }

    /// Reads an artifact, naming the subcommand that produces it when absent.
    fn read_json<T: DeserializeOwned>(&self, name: &str, producer: Stage) -> Result<T, Failure> {
        let p = self.path(name);
        let text = fs::read_to_string(&p).map_err(|_| {
            Failure::input(format!(
                "{} not found; run `lossyrom {producer}` with --out {} first",
                name,
                self.dir.display()
            ))
        })?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
    }

    fn has(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// CSV with a comment line naming stage, config hash and units, then a
    /// header row; floats carry 17 significant digits.
    fn write_csv(
        &self,
        name: &str,
        stage: Stage,
        units: &str,
        header: &[&str],
        rows: Vec<Vec<String>>,
    ) -> anyhow::Result<()> {
        let mut file =
            fs::File::create(self.path(name)).with_context(|| format!("creating {name}"))?;
        writeln!(
            file,
            "# lossyrom stage={stage} config={} units: {units}",
            self.hash
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn medium_artifact(&self) -> Result<Option<MediumProfile>, Failure> {
        if !self.has("medium.json") {
            return Ok(None);
        }
        let f: MediumFile = self.read_json("medium.json", Stage::Forward)?;
        MediumProfile::from_samples(f.t_max, f.zeta, f.loss)
            .map(Some)
            .map_err(Failure::input)
    }

    fn update_manifest(&self, stage: Stage, entry: Value) -> anyhow::Result<()> {
        let p = self.path("manifest.json");
        let mut stages: BTreeMap<String, Value> = fs::read_to_string(&p)
            .ok()
            .and_then(|t| serde_json::from_str::<Value>(&t).ok())
            .and_then(|v| v.get("stages").cloned())
            .and_then(|s| serde_json::from_value(s).ok())
            .unwrap_or_default();
        stages.insert(stage.name().to_string(), entry);
        let failed: Vec<&String> = stages
            .iter()
            .filter(|(_, v)| v.get("status") != Some(&json!("ok")))
            .map(|(k, _)| k)
            .collect();
        let manifest = json!({
            "config_hash": self.hash,
            "config": self.config,
            "failed_stages": failed,
            "stages": stages,
        });
        fs::write(&p, serde_json::to_string_pretty(&manifest)? + "\n")
            .context("writing manifest.json")
    }

    /// Runs one stage and records its outcome in the manifest.
    pub fn run(&self, stage: Stage) -> Result<(), Failure> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| Failure::input(format!("{}: {e}", self.dir.display())))?;
        log::info!("stage {stage}");
        let start = Instant::now();
        let outcome = match stage {
            Stage::Forward => self.forward(),
            Stage::Fit => self.fit(),
            Stage::Rom => self.rom(),
            Stage::Grid => self.grid(),
            Stage::Invert => self.invert(),
            Stage::Optimize => self.optimize(),
        };
        let seconds = start.elapsed().as_secs_f64();
        let entry = match &outcome {
            Ok(diag) => json!({ "status": "ok", "seconds": seconds, "diagnostics": diag }),
            Err(e) => json!({ "status": "error", "seconds": seconds, "error": e.to_string() }),
        };
        self.update_manifest(stage, entry).map_err(Failure::Stage)?;
        outcome.map(|_| ())
    }

    /// All stages in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<(), Failure> {
        Stage::ALL.iter().try_for_each(|&s| self.run(s))
    }

    fn forward(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let m = cfg.medium()?;
        self.write_json("medium.json", &MediumFile::from(m.clone()))?;
        let op = assemble_fd(&m, cfg.fd_cells)?;
        let clean = sample_transfer(&op, cfg.omega_max(), cfg.n_samples)?;
        let samples = add_noise(&clean, cfg.noise, cfg.seed);
        self.write_json("transfer.json", &samples)?;
        let rows = samples
            .s_points
            .iter()
            .zip(&samples.values)
            .map(|(s, d)| vec![num(s.re), num(s.im), num(d.re), num(d.im)])
            .collect();
        self.write_csv(
            "transfer.csv",
            Stage::Forward,
            "s in 1/travel time, D in impedance x travel time",
            &["re_s", "im_s", "re_D", "im_D"],
            rows,
        )?;
        Ok(json!({
            "omega_max": samples.omega_max,
            "n_samples": samples.values.len(),
            "noise": cfg.noise,
            "seed": cfg.seed,
            "mean_loss": mean_loss(&m),
            "zeta0": m.zeta0,
        }))
    }

    fn fit(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let (data, diag) = match cfg.extraction {
            Extraction::Exact => {
                let m = self.medium_artifact()?.ok_or_else(|| {
                    Failure::input("medium.json not found; run `lossyrom forward` first")
                })?;
                let op = assemble_fd(&m, cfg.fd_cells)?;
                (
                    exact_spectral_data(&op, cfg.n)?,
                    json!({ "extraction": "exact" }),
                )
            }
            Extraction::Ratfit => {
                let samples: TransferSamples = self.read_json("transfer.json", Stage::Forward)?;
                let zeta0 = self.medium_artifact()?.map(|m| m.zeta0).unwrap_or(1.0);
                let tail = estimate_r0(&samples, cfg.t_max, zeta0)?;
                let fit = fit_poles_residues(&samples, Some(&tail), cfg.n)?;
                let diag = json!({
                    "extraction": "ratfit",
                    "r0_estimate": tail.r0_est,
                    "j_start": tail.j_start,
                    "misfit": fit.misfit,
                    "iterations": fit.iterations,
                    "flipped_poles": fit.flipped,
                });
                (fit.data, diag)
            }
        };
        data.validate()?;
        self.write_json("spectral.json", &SpectralFile::from(data.clone()))?;
        let rows = data
            .poles
            .iter()
            .zip(&data.residues)
            .enumerate()
            .map(|(j, (p, y))| {
                vec![
                    (j + 1).to_string(),
                    num(p.re),
                    num(p.im),
                    num(y.re),
                    num(y.im),
                ]
            })
            .collect();
        self.write_csv(
            "spectral.csv",
            Stage::Fit,
            "poles in 1/travel time",
            &["j", "re_pole", "im_pole", "re_residue", "im_residue"],
            rows,
        )?;
        Ok(diag)
    }

    fn rom(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let file: SpectralFile = self.read_json("spectral.json", Stage::Fit)?;
        let data = SpectralData::from(file);
        let matrix = lanczos(&data, cfg.reorth)?;
        let c = extract_coefficients(&matrix)?;
        let passivity = passivity_scan(&matrix, cfg.omega_max(), PASSIVITY_POINTS)?;
        let rows = (0..c.n())
            .map(|j| {
                vec![
                    (j + 1).to_string(),
                    num(c.gammas[j]),
                    num(c.gamma_hats[j]),
                    num(c.r_primary[j]),
                    num(c.r_dual[j]),
                ]
            })
            .collect();
        self.write_csv(
            "rom.csv",
            Stage::Rom,
            "gamma in travel time/impedance, r in 1/travel time",
            &["j", "gamma", "gamma_hat", "r", "r_hat"],
            rows,
        )?;
        let mut diag = json!({
            "passivity_min_re": passivity.min_real,
            "passivity_argmin_omega": passivity.argmin_omega,
            "max_beta_square": matrix.beta_squares.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            "r_hat_max_abs": c.r_dual.iter().fold(0.0f64, |a, r| a.max(r.abs())),
        });
        if let Some(m) = self.medium_artifact()? {
            let r0 = mean_loss(&m);
            diag["r_max_deviation_from_mean_loss"] = json!(c
                .r_primary
                .iter()
                .fold(0.0f64, |a, r| a.max((r - r0).abs())));
        }
        if passivity.min_real <= 0.0 {
            log::warn!(
                "ROM transfer function not passive: min Re {:.3e}",
                passivity.min_real
            );
        }
        self.write_json(
            "rom.json",
            &RomArtifact {
                matrix,
                coefficients: c,
                passivity,
            },
        )?;
        Ok(diag)
    }

    fn grid(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let g = spectrally_matched_grid(cfg.n, cfg.t_max)?;
        self.write_json("grid.json", &g)?;
        let rows = (0..g.n())
            .map(|j| {
                vec![
                    (j + 1).to_string(),
                    num(g.h[j]),
                    num(g.h_hat[j]),
                    num(g.t_primary[j]),
                    num(g.t_dual[j + 1]),
                ]
            })
            .collect();
        self.write_csv(
            "grid.csv",
            Stage::Grid,
            "all columns in travel time",
            &["j", "h", "h_hat", "T", "T_hat"],
            rows,
        )?;
        Ok(json!({
            "steps_interlace": g.steps_interlace(),
            "nodes_interlace": g.nodes_interlace(),
            "sum_h": g.h.iter().sum::<f64>(),
        }))
    }

    fn invert(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let rom: RomArtifact = self.read_json("rom.json", Stage::Rom)?;
        let g: StaggeredGrid = self.read_json("grid.json", Stage::Grid)?;
        let truth = self.medium_artifact()?;
        let c = &rom.coefficients;
        let z = impedance_from_rom(c, &g)?;
        let basis = eigenbasis(&z, g.t_max, g.n(), cfg.fd_cells)?;
        let reg = match cfg.reg_target {
            Some(level) => reg_by_discrepancy(c, &g, &basis, level)?,
            None => cfg.reg,
        };
        let direct = loss_direct(c, &g, &basis, reg)?;
        let simple = loss_simple(c, &g)?;
        let mut diag = json!({
            "reg": reg,
            "system_residual": direct.system_residual,
            "mean_loss_estimate": direct.mean_loss_est,
            "eigenbasis_orthonormality": basis.orthonormality_residual(),
        });
        for (name, r) in [("direct", &direct), ("simple", &simple)] {
            self.write_profile_csv(
                &format!("inversion_{name}.csv"),
                Stage::Invert,
                r,
                truth.as_ref(),
            )?;
        }
        if let Some(m) = &truth {
            let t = g.t_max;
            diag["zeta_rel_l1"] = json!(relative_error(|x| z.eval(x), |x| m.zeta(x), t, 6000, 1));
            diag["loss_direct_rel_l2"] = json!(relative_error(
                |x| direct.loss_est.eval(x),
                |x| m.loss(x),
                t,
                6000,
                2
            ));
            diag["loss_simple_rel_l2"] = json!(relative_error(
                |x| simple.loss_est.eval(x),
                |x| m.loss(x),
                t,
                6000,
                2
            ));
        }
        self.write_json(
            "inversion.json",
            &InversionArtifact {
                reg,
                direct,
                simple,
            },
        )?;
        Ok(diag)
    }

    fn optimize(&self) -> Result<Value, Failure> {
        let cfg = &self.config;
        let rom: RomArtifact = self.read_json("rom.json", Stage::Rom)?;
        let g: StaggeredGrid = self.read_json("grid.json", Stage::Grid)?;
        let truth = self.medium_artifact()?;
        let c = &rom.coefficients;
        let zeta0 = truth
            .as_ref()
            .map(|m| m.zeta0)
            .unwrap_or(g.h_hat[0] / c.gamma_hats[0]);
        let (rf, rfh) = loss_interpolants(c, &g);
        let r0 = ((rf.integral() + rfh.integral()) / g.t_max).max(0.0);
        let init = FourierMedium::constant(g.t_max, cfg.n, zeta0, r0);
        let state = gauss_newton(c, &init, cfg.n, &cfg.gn_settings())?;
        if let Some(w) = &state.warning {
            log::warn!("{w}");
        }
        let result = state.to_inversion_result(cfg.fd_cells)?;
        self.write_profile_csv("optimized.csv", Stage::Optimize, &result, truth.as_ref())?;
        let trace = state
            .trace
            .iter()
            .map(|r| vec![r.iter.to_string(), num(r.objective), num(r.step_norm)])
            .collect();
        self.write_csv(
            "trace.csv",
            Stage::Optimize,
            "dimensionless",
            &["iter", "objective", "step_norm"],
            trace,
        )?;
        self.write_json(
            "medium_opt.json",
            &MediumFile::from(fourier_profile(&state.medium, cfg.fd_cells)?),
        )?;
        let mut diag = json!({
            "iterations": state.iteration,
            "objective": state.objective,
            "initial_objective": state.trace[0].objective,
            "warning": state.warning,
        });
        if let Some(m) = &truth {
            let t = g.t_max;
            diag["zeta_rel_l2"] = json!(relative_error(
                |x| state.medium.zeta(x),
                |x| m.zeta(x),
                t,
                6000,
                2
            ));
            diag["loss_rel_l2"] = json!(relative_error(
                |x| state.medium.loss(x),
                |x| m.loss(x),
                t,
                6000,
                2
            ));
        }
        self.write_json("optimize.json", &state)?;
        Ok(diag)
    }

    fn write_profile_csv(
        &self,
        name: &str,
        stage: Stage,
        r: &InversionResult,
        truth: Option<&MediumProfile>,
    ) -> anyhow::Result<()> {
        let t = uniform_grid(self.config.t_max, TABLE_POINTS - 1);
        let rows = t
            .iter()
            .map(|&x| match truth {
                Some(m) => vec![
                    num(x),
                    num(m.zeta(x)),
                    num(r.zeta_est.eval(x)),
                    num(m.loss(x)),
                    num(r.loss_est.eval(x)),
                ],
                None => vec![num(x), num(r.zeta_est.eval(x)), num(r.loss_est.eval(x))],
            })
            .collect();
        let header: &[&str] = match truth {
            Some(_) => &["T", "zeta_true", "zeta_est", "r_true", "r_est"],
            None => &["T", "zeta_est", "r_est"],
        };
        self.write_csv(
            name,
            stage,
            "T in travel time, zeta in impedance, r in 1/travel time",
            header,
            rows,
        )
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_file_media() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{ "medium": { "kind": "constant", "zeta0": 2.0, "r0": 0.5 }, "n": 40 }"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.medium,
            Some(MediumSpec::Inline(MediumKind::Constant { .. }))
        ));
        assert_eq!(cfg.omega_max(), 124.0);
        let m = cfg.medium().unwrap();
        assert_eq!(m.zeta(0.3), 2.0);
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{ "medium": { "file": "m.json" } }"#).unwrap();
        assert!(matches!(cfg.medium, Some(MediumSpec::File { .. })));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{ "order": 10 }"#).is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            seed: 1,
            ..ExperimentConfig::default()
        };
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ExperimentConfig {
                n: 0,
                ..Default::default()
            },
            ExperimentConfig {
                omega_max: Some(-1.0),
                ..Default::default()
            },
            ExperimentConfig {
                reg: -1.0,
                ..Default::default()
            },
        ] {
            assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn seventeen_digits() {
        let x = 0.1f64 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
        assert_eq!(num(1.0 / 3.0), "3.3333333333333331e-1");
    }
}
