//! Experiment drivers behind the command-line interface: single runs, scheme
//! comparisons, oracle checks and the SVD-cost benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chainmap::StarDecomposition;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::oracle;
use crate::propagate::{self, Scheme, TrajectoryRecord};

pub const TRAJECTORY_HEADER: &str = "t,pop_up,norm_sq,max_bond,discarded_weight_cum,wall_ms";
pub const BONDS_HEADER: &str = "t,bond_index,dimension";
pub const ORACLE_HEADER: &str = "t,pop_oracle,pop_scheme,abs_error";

/// Chain coefficients together with the normal-mode decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCoeffsReport {
    pub omegas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub kappa0: f64,
    pub lambdas: Vec<f64>,
    /// Row k is normal mode k in the chain basis.
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

pub fn chain_coeffs(cfg: &ExperimentConfig) -> Result<ChainCoeffsReport> {
    let coeffs = cfg.chain_coefficients()?;
    let dec = StarDecomposition::from_chain(&coeffs)?;
    Ok(ChainCoeffsReport {
        kappa0: coeffs.kappa0(),
        omegas: coeffs.omegas,
        kappas: coeffs.kappas,
        lambdas: dec.lambdas.clone(),
        p: dec.p.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

/// Propagates the configured scheme.
pub fn simulate(cfg: &ExperimentConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let coeffs = cfg.chain_coefficients()?;
    propagate::run(&cfg.scheme_config(), &cfg.system(), &coeffs)
}

pub fn trajectory_csv(cfg: &ExperimentConfig, rec: &TrajectoryRecord) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for i in 0..rec.len() {
        writeln!(
            out,
            "{:.10},{:.12},{:.12},{},{:.6e},{:.3}",
            cfg.reported_time(rec.times[i]),
            rec.population_up[i],
            rec.norm_sq[i],
            rec.max_bond[i],
            rec.discarded_weight_cum[i],
            rec.wall_ms[i]
        )
        .expect("write to string");
    }
    out
}

pub fn bonds_csv(cfg: &ExperimentConfig, rec: &TrajectoryRecord) -> String {
    let mut out = String::from(BONDS_HEADER);
    out.push('\n');
    for (t, profile) in rec.times.iter().zip(&rec.bond_profiles) {
        let t = cfg.reported_time(*t);
        for (b, dim) in profile.iter().enumerate() {
            writeln!(out, "{t:.10},{b},{dim}").expect("write to string");
        }
    }
    out
}

pub fn occupations_csv(cfg: &ExperimentConfig, rec: &TrajectoryRecord) -> String {
    let mut out = String::from("t,site,occupation\n");
    for (t, occ) in rec.times.iter().zip(&rec.occupations) {
        let t = cfg.reported_time(*t);
        for (s, n) in occ.iter().enumerate() {
            writeln!(out, "{t:.10},{},{n:.10}", s + 1).expect("write to string");
        }
    }
    out
}

fn gnuplot_script() -> &'static str {
    "set datafile separator ','\n\
     set key autotitle columnhead\n\
     set xlabel 't Delta / pi'\n\
     set multiplot layout 2,1\n\
     set ylabel 'P_up'\n\
     plot 'trajectory.csv' using 1:2 with lines\n\
     set ylabel 'max bond'\n\
     plot 'trajectory.csv' using 1:4 with lines\n\
     unset multiplot\n"
}

/// Paths written by [`cmd_simulate`].
#[derive(Clone, Debug)]
pub struct SimulationFiles {
    pub trajectory: PathBuf,
    pub bonds: PathBuf,
    pub occupations: PathBuf,
    pub config: PathBuf,
}

/// Runs one trajectory and writes `trajectory.csv`, `bonds.csv`,
/// `occupations.csv` and `config.json` into the output directory. On failure
/// the config echo and a `FAILED` marker holding the error are left behind.
pub fn cmd_simulate(cfg: &ExperimentConfig, gnuplot: bool) -> Result<SimulationFiles> {
    let dir = &cfg.outdir;
    fs::create_dir_all(dir)?;
    let files = SimulationFiles {
        trajectory: dir.join("trajectory.csv"),
        bonds: dir.join("bonds.csv"),
        occupations: dir.join("occupations.csv"),
        config: dir.join("config.json"),
    };
    fs::write(&files.config, cfg.to_json()?)?;
    let marker = dir.join("FAILED");
    let rec = match simulate(cfg) {
        Ok(rec) => rec,
        Err(e) => {
            fs::write(&marker, format!("{e}\n"))?;
            return Err(e);
        }
    };
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    fs::write(&files.trajectory, trajectory_csv(cfg, &rec))?;
    fs::write(&files.bonds, bonds_csv(cfg, &rec))?;
    fs::write(&files.occupations, occupations_csv(cfg, &rec))?;
    if gnuplot {
        fs::write(dir.join("plot.gp"), gnuplot_script())?;
    }
    Ok(files)
}

/// One scheme of a comparison, optionally with its own local dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub local_dim: Option<usize>,
}

impl SchemeSpec {
    pub fn label(&self) -> String {
        match self.local_dim {
            Some(d) => format!("{}{d}", self.scheme),
            None => self.scheme.to_string(),
        }
    }
}

impl std::str::FromStr for SchemeSpec {
    type Err = Error;

    /// `IC` or `IC:10`
    fn from_str(s: &str) -> Result<Self> {
        let (name, dim) = match s.split_once(':') {
            Some((n, d)) => {
                let d = d.trim().parse().map_err(|_| Error::config("local_dim", format!("bad local dimension in `{s}`")))?;
                (n, Some(d))
            }
            None => (s, None),
        };
        Ok(Self { scheme: name.parse()?, local_dim: dim })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub label: String,
    pub scheme: Scheme,
    pub local_dim: usize,
    pub max_bond: usize,
    pub final_max_bond: usize,
    pub wall_seconds: f64,
    pub discarded_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub a: String,
    pub b: String,
    pub max_abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub schemes: Vec<SchemeSummary>,
    pub pairwise: Vec<PairDifference>,
}

impl CompareReport {
    pub fn difference(&self, a: &str, b: &str) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map(|p| p.max_abs_diff)
    }

    pub fn summary(&self, label: &str) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.schemes {
            write!(out, ",pop_{}", s.label).expect("write to string");
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{t:.10}").expect("write to string");
            for p in &self.populations {
                write!(out, ",{:.12}", p[i]).expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

/// Largest absolute difference over the common prefix of two series.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs every scheme on the worker pool and compares the populations.
pub fn compare(cfg: &ExperimentConfig, specs: &[SchemeSpec]) -> Result<CompareReport> {
    if specs.len() < 2 {
        return Err(Error::config("schemes", "comparison needs at least two schemes"));
    }
    let mut labels: Vec<String> = specs.iter().map(SchemeSpec::label).collect();
    for i in 0..labels.len() {
        if labels[..i].contains(&labels[i]) {
            labels[i] = format!("{}#{}", labels[i], i);
        }
    }
    let coeffs = cfg.chain_coefficients()?;
    let system = cfg.system();
    let records: Vec<(usize, TrajectoryRecord)> = specs
        .par_iter()
        .map(|spec| {
            let mut run_cfg = cfg.with_scheme(spec.scheme);
            if let Some(d) = spec.local_dim {
                run_cfg.local_dim = d;
            }
            run_cfg.validate()?;
            let rec = propagate::run(&run_cfg.scheme_config(), &system, &coeffs)?;
            Ok((run_cfg.local_dim, rec))
        })
        .collect::<Result<_>>()?;

    let times: Vec<f64> = records[0].1.times.iter().map(|&t| cfg.reported_time(t)).collect();
    let populations: Vec<Vec<f64>> = records.iter().map(|(_, r)| r.population_up.clone()).collect();
    let schemes = records
        .iter()
        .zip(specs)
        .zip(&labels)
        .map(|(((d, r), spec), label)| SchemeSummary {
            label: label.clone(),
            scheme: spec.scheme,
            local_dim: *d,
            max_bond: r.peak_bond(),
            final_max_bond: r.final_max_bond(),
            wall_seconds: r.total_wall_seconds,
            discarded_weight: r.discarded_weight_cum.last().copied().unwrap_or(0.0),
        })
        .collect();
    let mut pairwise = Vec::new();
    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            pairwise.push(PairDifference {
                a: labels[i].clone(),
                b: labels[j].clone(),
                max_abs_diff: max_abs_diff(&populations[i], &populations[j]),
            });
        }
    }
    Ok(CompareReport { times, populations, schemes, pairwise })
}

/// Writes `comparison.csv` and `summary.json`.
pub fn cmd_compare(cfg: &ExperimentConfig, specs: &[SchemeSpec]) -> Result<CompareReport> {
    let report = compare(cfg, specs)?;
    fs::create_dir_all(&cfg.outdir)?;
    fs::write(cfg.outdir.join("config.json"), cfg.to_json()?)?;
    fs::write(cfg.outdir.join("comparison.csv"), report.to_csv())?;
    let summary = serde_json::json!({ "schemes": report.schemes, "pairwise": report.pairwise });
    fs::write(cfg.outdir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub t: f64,
    pub pop_oracle: f64,
    pub pop_scheme: f64,
    pub abs_error: f64,
}

/// Runs the configured scheme and the exact reference on the same truncated
/// model.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    let coeffs = cfg.chain_coefficients()?;
    let system = cfg.system();
    let rec = propagate::run(&cfg.scheme_config(), &system, &coeffs)?;
    let reference = oracle::scheme_reference(cfg.scheme, &coeffs, &system, cfg.n_chain, cfg.local_dim, &rec.times)?;
    Ok(rec
        .times
        .iter()
        .zip(&rec.population_up)
        .zip(&reference)
        .map(|((&t, &ps), &po)| OracleRow { t: cfg.reported_time(t), pop_oracle: po, pop_scheme: ps, abs_error: (ps - po).abs() })
        .collect())
}

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{:.10},{:.12},{:.12},{:.6e}", r.t, r.pop_oracle, r.pop_scheme, r.abs_error).expect("write to string");
    }
    out
}

pub fn cmd_oracle_check(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    let rows = oracle_check(cfg)?;
    fs::create_dir_all(&cfg.outdir)?;
    fs::write(cfg.outdir.join("config.json"), cfg.to_json()?)?;
    fs::write(cfg.outdir.join("oracle_check.csv"), oracle_csv(&rows))?;
    Ok(rows)
}

/// Predicted ratio of two-site SVD costs, chain over interaction-picture
/// chain: `(d_C³ D_C³) / (4 d_IC D_IC³)`. The chain factorizes a
/// `d_C D × d_C D` matrix between two bath sites, the interaction-picture
/// chain a `2D × d_IC D` matrix between the spin and one mode.
pub fn predicted_svd_cost_ratio(d_c: f64, bond_c: f64, d_ic: f64, bond_ic: f64) -> f64 {
    (d_c.powi(3) * bond_c.powi(3)) / (4.0 * d_ic * bond_ic.powi(3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub scheme: Scheme,
    pub local_dim: usize,
    pub wall_seconds: f64,
    pub svd_seconds_per_step: f64,
    pub max_bond: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub chain: BenchEntry,
    pub interaction: BenchEntry,
    /// D_IC / D_C
    pub k: f64,
    pub predicted_ratio: f64,
    /// Wall time of C over IC.
    pub measured_ratio: f64,
    pub measured_svd_ratio: f64,
}

impl BenchReport {
    /// Predicted and measured ratios agree on which scheme is cheaper.
    pub fn same_direction(&self) -> bool {
        self.predicted_ratio.ln().signum() == self.measured_ratio.ln().signum()
    }
}

fn bench_entry(cfg: &ExperimentConfig, rec: &TrajectoryRecord) -> BenchEntry {
    BenchEntry {
        scheme: cfg.scheme,
        local_dim: cfg.local_dim,
        wall_seconds: rec.total_wall_seconds,
        svd_seconds_per_step: rec.svd_seconds_per_step(),
        max_bond: rec.peak_bond(),
    }
}

/// Builds a report from matched C and IC trajectories.
pub fn bench_from_records(
    c_cfg: &ExperimentConfig,
    c_rec: &TrajectoryRecord,
    ic_cfg: &ExperimentConfig,
    ic_rec: &TrajectoryRecord,
) -> BenchReport {
    let chain = bench_entry(c_cfg, c_rec);
    let interaction = bench_entry(ic_cfg, ic_rec);
    let (dc, dic) = (chain.max_bond as f64, interaction.max_bond as f64);
    BenchReport {
        k: dic / dc,
        predicted_ratio: predicted_svd_cost_ratio(chain.local_dim as f64, dc, interaction.local_dim as f64, dic),
        measured_ratio: chain.wall_seconds / interaction.wall_seconds,
        measured_svd_ratio: chain.svd_seconds_per_step / interaction.svd_seconds_per_step,
        chain,
        interaction,
    }
}

/// Runs C with `chain_dim` levels and IC with `interaction_dim` levels, one
/// after the other so the timings do not compete.
pub fn bench(cfg: &ExperimentConfig, chain_dim: usize, interaction_dim: usize) -> Result<BenchReport> {
    let c_cfg = cfg.with_scheme(Scheme::Chain).with_local_dim(chain_dim);
    let ic_cfg = cfg.with_scheme(Scheme::InteractionChain).with_local_dim(interaction_dim);
    let c_rec = simulate(&c_cfg)?;
    let ic_rec = simulate(&ic_cfg)?;
    Ok(bench_from_records(&c_cfg, &c_rec, &ic_cfg, &ic_rec))
}

pub fn cmd_bench(cfg: &ExperimentConfig, chain_dim: usize, interaction_dim: usize) -> Result<BenchReport> {
    let report = bench(cfg, chain_dim, interaction_dim)?;
    fs::create_dir_all(&cfg.outdir)?;
    fs::write(cfg.outdir.join("config.json"), cfg.to_json()?)?;
    fs::write(cfg.outdir.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Writes `value` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
