use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::train::{write_text, SOFTWARE};
use crate::data::{
    complete_valences, decode_state, encode_molecule, format_molecules, gen_multicluster_scaled, infer_bonds,
    parse_molecule_records, pca_project, principal_state, EncodeOptions, Ensemble, MoleculeRecord,
    NormalizationContext, ScaleMode,
};
use crate::grad::bench::{grad_norm_benchmark, BenchConfig, BenchFamily, BenchResult, CSV_HEADER};
use crate::netgen::checkpoint::Model;
use crate::otloss::wasserstein_loss;
use crate::qcore::{dm_to_real_vector, purity, DensityMatrix};
use crate::{Error, Result};

/// Grid of gradient-norm benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradnormRequest {
    pub families: Vec<BenchFamily>,
    pub n_list: Vec<usize>,
    pub l_list: Vec<usize>,
    pub m: usize,
    pub trials: usize,
    pub batch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GradnormManifest {
    software: String,
    request: GradnormRequest,
    reference_count: usize,
    latent_dim: usize,
    hidden: usize,
    depth: usize,
    protocol: String,
    wall_clock_seconds: f64,
}

/// One CSV row per `(family, n, L)` in request order. Writes `out` and a
/// `<out>.manifest.json` sidecar.
pub fn cmd_gradnorm(req: &GradnormRequest, out: &Path) -> Result<Vec<BenchResult>> {
    let start = Instant::now();
    let mut results = Vec::new();
    let mut csv = format!("{CSV_HEADER}\n");
    let mut last = None;
    for &family in &req.families {
        for &n in &req.n_list {
            for &l in &req.l_list {
                let mut cfg = BenchConfig::new(family, n, l, req.trials, req.seed);
                cfg.m = req.m;
                cfg.batch = req.batch;
                let r = grad_norm_benchmark(&cfg)?;
                csv.push_str(&r.csv_row());
                csv.push('\n');
                last = Some(cfg);
                results.push(r);
            }
        }
    }
    write_text(out, &csv)?;
    let probe = last.unwrap_or_else(|| BenchConfig::new(BenchFamily::NoLatentUniform, 1, 0, 1, req.seed));
    let manifest = GradnormManifest {
        software: SOFTWARE.into(),
        request: req.clone(),
        reference_count: probe.reference_count,
        latent_dim: probe.latent_dim,
        hidden: probe.hidden,
        depth: probe.depth,
        protocol: "per trial: one batch of angle vectors scored by D_Wass against a fixed multicluster reference \
                   batch; value = squared norm of the stacked angle gradient / (batch * K)"
            .into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let mut side = out.as_os_str().to_owned();
    side.push(".manifest.json");
    write_text(
        Path::new(&side),
        &serde_json::to_string_pretty(&manifest).expect("serializes"),
    )?;
    Ok(results)
}

/// Outcome of a batch codec run; failed records are reported, not fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchReport {
    pub ok: usize,
    pub failures: Vec<(usize, String)>,
}

pub struct EncodeRequest<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub context: &'a Path,
    /// Fit the context on the input and write it to `context`.
    pub fit_context: bool,
    pub options: EncodeOptions,
}

pub fn cmd_encode(req: &EncodeRequest) -> Result<BatchReport> {
    let text = fs::read_to_string(req.input).map_err(|e| Error::io(req.input, e))?;
    let mut report = BatchReport::default();
    let mut mols: Vec<(usize, MoleculeRecord)> = Vec::new();
    for (i, r) in parse_molecule_records(&text).into_iter().enumerate() {
        match r {
            Ok(m) => mols.push((i, m)),
            Err(e) => report.failures.push((i, e.to_string())),
        }
    }
    if mols.is_empty() {
        return Err(no_records(&report));
    }
    let ctx = if req.fit_context {
        let all: Vec<MoleculeRecord> = mols.iter().map(|(_, m)| m.clone()).collect();
        let ctx = NormalizationContext::fit(&all)?;
        write_text(req.context, &serde_json::to_string_pretty(&ctx).expect("serializes"))?;
        ctx
    } else {
        read_context(req.context)?
    };
    let mut states = Vec::with_capacity(mols.len());
    for (i, m) in &mols {
        match encode_molecule(m, &ctx, req.options) {
            Ok(s) => states.push(s),
            Err(e) => report.failures.push((*i, format!("record {i}: {e}"))),
        }
    }
    report.failures.sort_by_key(|f| f.0);
    report.ok = states.len();
    if states.is_empty() {
        return Err(no_records(&report));
    }
    Ensemble::pure(states)?.write(req.output)?;
    Ok(report)
}

fn no_records(report: &BatchReport) -> Error {
    Error::Record {
        index: report.failures.first().map_or(0, |f| f.0),
        msg: "no record could be encoded".into(),
    }
}

pub fn read_context(path: &Path) -> Result<NormalizationContext> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NormalizationContext::from_json(&text)
}

pub struct DecodeRequest<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub context: &'a Path,
    pub scale: ScaleMode,
    pub atoms: Option<usize>,
    /// Also write inferred molecular graphs here.
    pub graphs: Option<&'a Path>,
}

/// Decodes every state of an ensemble file (mixed states through their
/// dominant eigenvector).
pub fn cmd_decode(req: &DecodeRequest) -> Result<BatchReport> {
    let ctx = read_context(req.context)?;
    let ens = Ensemble::read(req.input)?;
    let mut report = BatchReport::default();
    let mut mols = Vec::new();
    let mut graphs = String::new();
    for (i, rho) in ens.to_density().iter().enumerate() {
        let decoded = principal_state(rho).and_then(|s| decode_state(&s, &ctx, req.scale, req.atoms));
        match decoded {
            Ok(m) => {
                if req.graphs.is_some() {
                    let adj = infer_bonds(&m.positions(), &m.elements());
                    let g = complete_valences(&adj.ac, &m.elements());
                    graphs.push_str(&format!("# record {i}\n{}", g.to_text()));
                }
                mols.push(m);
            }
            Err(e) => report.failures.push((i, format!("record {i}: {e}"))),
        }
    }
    report.ok = mols.len();
    write_text(req.output, &format_molecules(&mols))?;
    if let Some(p) = req.graphs {
        write_text(p, &graphs)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub wasserstein: f64,
    pub mean_purity_generated: f64,
    pub mean_purity_target: f64,
    pub n_generated: usize,
    pub n_target: usize,
    /// Covariance eigenvalues of the two PCA axes; empty without a PCA export.
    pub pca_explained: Vec<f64>,
}

/// `D_Wass`, mean purities, and optionally a joint 2-D PCA of the tomography
/// vectors written as `pca_generated.csv` / `pca_target.csv` under `pca_dir`.
pub fn cmd_eval(generated: &[DensityMatrix], target: &[DensityMatrix], pca_dir: Option<&Path>) -> Result<EvalMetrics> {
    if generated.is_empty() || target.is_empty() {
        return Err(Error::Config("both ensembles must be non-empty".into()));
    }
    if generated[0].dim() != target[0].dim() {
        return Err(Error::shape("state dimension", target[0].dim(), generated[0].dim()));
    }
    let wasserstein = wasserstein_loss(generated, target)?;
    let mean = |s: &[DensityMatrix]| s.iter().map(purity).sum::<f64>() / s.len() as f64;
    let mut pca_explained = Vec::new();
    if let Some(dir) = pca_dir {
        let vectors: Vec<Vec<f64>> = generated.iter().chain(target).map(dm_to_real_vector).collect();
        let proj = pca_project(&vectors, 2)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, pts: &[Vec<f64>]| {
            let mut s = String::from("pc1,pc2\n");
            for p in pts {
                s.push_str(&format!("{},{}\n", p[0], p[1]));
            }
            write_text(&dir.join(name), &s)
        };
        write("pca_generated.csv", &proj.points[..generated.len()])?;
        write("pca_target.csv", &proj.points[generated.len()..])?;
        pca_explained = proj.eigenvalues;
    }
    Ok(EvalMetrics {
        wasserstein,
        mean_purity_generated: mean(generated),
        mean_purity_target: mean(target),
        n_generated: generated.len(),
        n_target: target.len(),
        pca_explained,
    })
}

/// Source of a generated ensemble file.
pub enum DatasetSource {
    Multicluster { n: usize, m: usize, noise: f64 },
    Checkpoint(PathBuf),
}

pub fn cmd_gen_dataset(source: &DatasetSource, count: usize, seed: u64, out: &Path) -> Result<usize> {
    let states = match source {
        DatasetSource::Multicluster { n, m, noise } => gen_multicluster_scaled(*n, *m, count, seed, *noise)?.states,
        DatasetSource::Checkpoint(p) => Model::load(p)?.sample_states(seed, count)?,
    };
    let n = states.len();
    Ensemble::mixed(states)?.write(out)?;
    Ok(n)
}
