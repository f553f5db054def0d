use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Result, SsmError};
use crate::linalg::{CVector, C64};
use crate::model::{read_matrix_market, FirstOrderSystem, ForcingSpec, SecondOrderModel};
use crate::models::builtin;
use crate::multiindex::write_table;
use crate::protocol::RemoteNonlinearity;
use crate::rom::{backbone_curve, frc, simulate_full, simulate_rom_states, verify_bifurcation, FrcProblem, ReducedSystem};
use crate::spectral::{solve_master_subspace_with, EigOptions, MasterSubspace, ModeSelection};
use crate::ssm::{compute_ssm, SsmOptions, SsmResult};
use crate::step::{EvalStats, StepOptions};

use super::config::{RunConfig, SolutionMode};

/// Which analyses a run performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Eig,
    Compute,
    Backbone,
    Frc,
    Simulate,
    /// Everything the configuration asks for.
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written as `manifest.json` next to the outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub model: String,
    pub dofs: usize,
    pub outputs: Vec<OutputFile>,
    pub evaluations: Option<EvalStats>,
    pub factorizations: Option<usize>,
    /// Wall time per stage in seconds.
    pub timings: BTreeMap<String, f64>,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub finished_at: u64,
}

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let line: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    report: RunReport,
}

impl Run<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes)?;
        self.report.outputs.push(OutputFile {
            path: name.into(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let v = f();
        self.report.timings.insert(stage.into(), t.elapsed().as_secs_f64());
        v
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn stage_err(stage: &str, e: SsmError) -> SsmError {
    match e {
        SsmError::Config { .. } | SsmError::InvalidInput(_) | SsmError::Parse(_) => e,
        e => {
            log::error!("stage `{stage}` failed");
            e
        }
    }
}

/// Model with forcing attached, and the nodal load used for it.
pub fn build_model(cfg: &RunConfig) -> Result<(String, SecondOrderModel)> {
    let (id, model, distributed) = match (&cfg.model.builtin, &cfg.model.external) {
        (Some(name), _) => {
            let mut params = cfg.model.params.clone();
            if name == "random-chain" {
                params.entry("seed".into()).or_insert(cfg.seed as f64);
            }
            let b = builtin(name, &params)?;
            (b.id.clone(), b.model, b.distributed_load)
        }
        (None, Some(ext)) => {
            let nl: Arc<RemoteNonlinearity> = Arc::new(match &ext.endpoint {
                Some(addr) => RemoteNonlinearity::connect_tcp(addr.as_str())?,
                None => RemoteNonlinearity::spawn(&ext.command[0], &ext.command[1..])?,
            });
            let model = SecondOrderModel::new(
                read_matrix_market(&ext.mass)?,
                read_matrix_market(&ext.damping)?,
                read_matrix_market(&ext.stiffness)?,
                nl,
            )?;
            ("external".to_string(), model, None)
        }
        (None, None) => unreachable!("validated"),
    };
    let model = match &cfg.forcing {
        None => model,
        Some(f) => {
            let n = model.dofs();
            let mut spec = ForcingSpec::cosine(n, &f.loads, f.epsilon).map_err(|e| SsmError::Config {
                field: "forcing.loads".into(),
                message: e.to_string(),
            })?;
            if f.distributed {
                let load = distributed.ok_or_else(|| SsmError::Config {
                    field: "forcing.distributed".into(),
                    message: format!("model `{id}` defines no distributed load"),
                })?;
                for (a, l) in spec.amplitude.iter_mut().zip(load) {
                    *a += C64::new(0.5 * l, 0.0);
                }
            }
            model.with_forcing(spec)?
        }
    };
    Ok((id, model))
}

pub fn eig_options(cfg: &RunConfig) -> EigOptions {
    let s = &cfg.subspace;
    let selection = match s.selection.as_str() {
        "pairs" => ModeSelection::Pairs(s.pairs.clone()),
        "window" => {
            let [lo, hi] = s.window.expect("validated");
            ModeSelection::FrequencyWindow { lo, hi }
        }
        _ => ModeSelection::Nearest {
            shift_re: s.shift[0],
            shift_im: s.shift[1],
        },
    };
    EigOptions {
        selection,
        ..Default::default()
    }
}

pub fn ssm_options(cfg: &RunConfig) -> SsmOptions {
    let o = &cfg.ssm;
    SsmOptions {
        rho_rel: o.rho_rel,
        structural_rule: o.structural_rule,
        conjugate_symmetry: o.conjugate_symmetry,
        step: StepOptions {
            skip_zero: o.skip_zero,
            autoscale_threshold: o.autoscale_threshold,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn state_forcing(sys: &FirstOrderSystem) -> Result<CVector> {
    sys.forcing_amplitude()
        .cloned()
        .ok_or_else(|| SsmError::Config {
            field: "forcing".into(),
            message: "analysis needs a [forcing] section".into(),
        })
}

/// Execute `stage` (and what it depends on) and write outputs to the
/// configured directory.
pub fn run(cfg: &RunConfig, stage: Stage, command: &str) -> Result<RunReport> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let cfg_text = cfg.to_toml();
    let mut run = Run {
        cfg,
        out,
        report: RunReport {
            tool: "ssm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: hex(&Sha256::digest(cfg_text.as_bytes())),
            seed: cfg.seed,
            model: String::new(),
            dofs: 0,
            outputs: Vec::new(),
            evaluations: None,
            factorizations: None,
            timings: BTreeMap::new(),
            finished_at: 0,
        },
    };
    run.write("config.toml", cfg_text.as_bytes())?;

    let (id, model) = run.timed("model", || build_model(cfg))?;
    run.report.model = id;
    run.report.dofs = model.dofs();
    let sys = crate::model::lift_to_first_order(&model);

    let sub = run
        .timed("eig", || solve_master_subspace_with(&sys, cfg.subspace.dim, &eig_options(cfg)))
        .map_err(|e| stage_err("eig", e))?;
    write_eigenvalues(&mut run, &sub)?;
    if stage == Stage::Eig {
        return finish(run);
    }

    let res = run
        .timed("compute", || compute_ssm(&sys, &sub, cfg.ssm.max_order, &ssm_options(cfg)))
        .map_err(|e| stage_err("compute", e))?;
    run.report.evaluations = Some(res.stats.clone());
    run.report.factorizations = Some(res.factorizations);
    write_ssm(&mut run, &res)?;

    let a = &cfg.analysis;
    let want = |s: Stage, configured: bool| stage == s || (stage == Stage::All && configured);
    if want(Stage::Backbone, a.backbone.is_some()) {
        backbone_stage(&mut run, &sub, &res)?;
    }
    if want(Stage::Frc, a.frc.is_some()) {
        frc_stage(&mut run, &sys, &sub, &res)?;
    }
    if want(Stage::Simulate, a.simulate.is_some()) {
        simulate_stage(&mut run, &model, &sys, &sub, &res)?;
    }
    finish(run)
}

fn finish(mut run: Run) -> Result<RunReport> {
    run.report.finished_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
    fs::write(run.out.join("manifest.json"), json)?;
    Ok(run.report)
}

fn write_eigenvalues(run: &mut Run, sub: &MasterSubspace) -> Result<()> {
    let mut csv = Csv::new(&["index", "re", "im", "frequency", "damping_ratio"]);
    for (i, l) in sub.lambdas().iter().enumerate() {
        csv.row([
            i.to_string(),
            fmt_f64(l.re),
            fmt_f64(l.im),
            fmt_f64(l.im.abs()),
            fmt_f64(-l.re / l.norm()),
        ]);
    }
    run.write("eigenvalues.csv", csv.text.as_bytes())
}

fn write_ssm(run: &mut Run, res: &SsmResult) -> Result<()> {
    let mut bin = Vec::new();
    write_table(&mut bin, &res.table, &[])?;
    run.write("ssm_table.bin", &bin)?;
    let mut csv = Csv::new(&["multi_index", "mode", "re", "im"]);
    for (m, r) in res.table.nonzero_r() {
        for (i, z) in r.iter().enumerate() {
            if *z != C64::new(0.0, 0.0) {
                csv.row([format!("\"{m}\""), i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
            }
        }
    }
    run.write("reduced_dynamics.csv", csv.text.as_bytes())?;
    let mut csv = Csv::new(&["multi_index", "modes", "lambda_re", "lambda_im"]);
    for r in &res.resonances {
        let modes: Vec<String> = r.modes.iter().map(|m| m.to_string()).collect();
        csv.row([
            format!("\"{}\"", r.index),
            modes.join(" "),
            fmt_f64(r.lambda_m.re),
            fmt_f64(r.lambda_m.im),
        ]);
    }
    run.write("resonances.csv", csv.text.as_bytes())
}

fn backbone_stage(run: &mut Run, sub: &MasterSubspace, res: &SsmResult) -> Result<()> {
    let b = run.cfg.analysis.backbone.clone().ok_or_else(|| SsmError::Config {
        field: "analysis.backbone".into(),
        message: "missing section".into(),
    })?;
    let pts = run.timed("backbone", || {
        let reduced = ReducedSystem::new(sub, &res.table, b.pair)?;
        check_output(b.output, sub.n_state())?;
        let rhos: Vec<f64> = (0..b.points).map(|k| b.rho_max * k as f64 / (b.points - 1) as f64).collect();
        Ok(backbone_curve(&reduced, &res.table, b.pair, &rhos, b.output, b.samples))
    })?;
    let mut csv = Csv::new(&["rho", "frequency", "growth_rate", "amplitude"]);
    for p in pts {
        csv.row([fmt_f64(p.rho), fmt_f64(p.frequency), fmt_f64(p.damping), fmt_f64(p.amplitude)]);
    }
    run.write("backbone.csv", csv.text.as_bytes())
}

fn check_output(output: usize, n_state: usize) -> Result<()> {
    if output >= n_state {
        return Err(SsmError::Config {
            field: "analysis.output".into(),
            message: format!("state index {output} out of range (state dimension {n_state})"),
        });
    }
    Ok(())
}

fn frc_stage(run: &mut Run, sys: &FirstOrderSystem, sub: &MasterSubspace, res: &SsmResult) -> Result<()> {
    let f = run.cfg.analysis.frc.clone().ok_or_else(|| SsmError::Config {
        field: "analysis.frc".into(),
        message: "missing section".into(),
    })?;
    let fa = state_forcing(sys)?;
    check_output(f.output, sys.n_state())?;
    let opts = f.continuation();
    let problem = FrcProblem {
        system: sys,
        subspace: sub,
        table: &res.table,
        forcing: &fa,
        epsilon: sys.epsilon(),
        forced_pair: f.forced_pair,
        output: f.output,
        samples: f.samples,
        rho_rel: run.cfg.ssm.rho_rel,
    };
    let result = run.timed("frc", || frc(&problem, &opts)).map_err(|e| stage_err("frc", e))?;
    let mut header = vec!["omega"];
    if f.mode != SolutionMode::Tv {
        header.push("amp_ti");
    }
    if f.mode != SolutionMode::Ti {
        header.push("amp_tv");
    }
    header.push("stable");
    let ycols: Vec<String> = (0..result.reduced.pairs())
        .flat_map(|k| [format!("re_q{k}"), format!("im_q{k}")])
        .collect();
    header.extend(ycols.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for r in &result.rows {
        let mut cells = vec![fmt_f64(r.omega)];
        if f.mode != SolutionMode::Tv {
            cells.push(fmt_f64(r.amp_ti));
        }
        if f.mode != SolutionMode::Ti {
            cells.push(fmt_f64(r.amp_tv));
        }
        cells.push(u8::from(r.stable).to_string());
        cells.extend(r.y.iter().map(|v| fmt_f64(*v)));
        csv.row(cells);
    }
    run.write("frc.csv", csv.text.as_bytes())?;

    let mut csv = Csv::new(&["kind", "omega", "verified", "omega_a", "indicator_a", "omega_b", "indicator_b"]);
    let checks = run.timed("verify_bifurcations", || {
        result
            .bifurcations
            .iter()
            .map(|b| {
                if f.verify_delta > 0.0 {
                    verify_bifurcation(&result.reduced, b, f.verify_delta, &opts).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (b, c) in result.bifurcations.iter().zip(checks) {
        let mut cells = vec![b.kind.to_string(), fmt_f64(b.omega)];
        match c {
            Some(c) => {
                cells.push(u8::from(c.confirmed).to_string());
                for (om, ind) in c.sides {
                    cells.push(fmt_f64(om));
                    cells.push(fmt_f64(ind));
                }
            }
            None => cells.extend(["".to_string(), "".into(), "".into(), "".into(), "".into()]),
        }
        csv.row(cells);
    }
    run.write("bifurcations.csv", csv.text.as_bytes())
}

fn simulate_stage(
    run: &mut Run,
    model: &SecondOrderModel,
    sys: &FirstOrderSystem,
    sub: &MasterSubspace,
    res: &SsmResult,
) -> Result<()> {
    let s = run.cfg.analysis.simulate.clone().ok_or_else(|| SsmError::Config {
        field: "analysis.simulate".into(),
        message: "missing section".into(),
    })?;
    let fa = state_forcing(sys)?;
    check_output(s.output, sys.n_state())?;
    let steps = (s.t_end / s.dt_out).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * s.dt_out).collect();
    let problem = FrcProblem {
        system: sys,
        subspace: sub,
        table: &res.table,
        forcing: &fa,
        epsilon: sys.epsilon(),
        forced_pair: s.forced_pair,
        output: s.output,
        samples: 1,
        rho_rel: run.cfg.ssm.rho_rel,
    };
    let rom = if s.rom {
        let pairs = ReducedSystem::new(sub, &res.table, s.forced_pair)?.dim();
        let y0 = if s.initial.is_empty() { vec![0.0; pairs] } else { s.initial.clone() };
        Some(run.timed("simulate_rom", || simulate_rom_states(&problem, s.omega, &y0, &times, &s.integrator))?)
    } else {
        None
    };
    let full = if s.full {
        let n = model.dofs();
        let forcing: Vec<C64> = fa.iter().take(n).copied().collect();
        // start on the manifold when the reduced model is also run
        let z0 = rom.as_ref().map_or_else(|| vec![0.0; 2 * n], |r| r[0].clone());
        let states = run.timed("simulate_full", || {
            simulate_full(model, &forcing, sys.epsilon(), s.omega, &z0, &times, &s.integrator)
        })?;
        Some(states.into_iter().map(|z| z[s.output]).collect::<Vec<f64>>())
    } else {
        None
    };
    let mut header = vec!["t"];
    if rom.is_some() {
        header.push("rom");
    }
    if full.is_some() {
        header.push("full");
    }
    let mut csv = Csv::new(&header);
    for (k, t) in times.iter().enumerate() {
        let mut cells = vec![fmt_f64(*t)];
        if let Some(r) = &rom {
            cells.push(fmt_f64(r[k][s.output]));
        }
        if let Some(f) = &full {
            cells.push(fmt_f64(f[k]));
        }
        csv.row(cells);
    }
    run.write("simulate.csv", csv.text.as_bytes())
}

/// Resolve a possibly relative path against the directory of the config file.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
