use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GeneratorFamily, TaskKind};
use crate::data::{gen_multicluster_scaled, Ensemble};
use crate::grad::{adam_step, lmlp_backward, lpqc_backward, no_latent_backward, rd_backward, AdamState, LossParts};
use crate::netgen::checkpoint::Model;
use crate::netgen::{Generator, Lmlp, LmlpVariant, MlpSpec, NoLatentSpec, RdGenerator};
use crate::otloss::wasserstein_loss;
use crate::priors::{sample_prior, LatentPriorSpec};
use crate::qcore::{purity, DensityMatrix};
use crate::{rng, Error, Result};

pub const SOFTWARE: &str = concat!("lpqc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_wasserstein: f64,
    pub entropy: f64,
    pub test_wasserstein: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub test_wasserstein: f64,
    pub mean_purity_generated: f64,
    pub mean_purity_test: f64,
}

/// Everything needed to audit or replay a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub config: ExperimentConfig,
    /// Named seeds actually used, including derived ones.
    pub seeds: BTreeMap<String, u64>,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs: Vec<EpochLog>,
    pub final_metrics: FinalMetrics,
    pub checkpoints: Vec<PathBuf>,
    /// Not reproducible; excluded from replay comparisons.
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn test_losses(&self) -> Vec<f64> {
        self.epochs.iter().filter_map(|e| e.test_wasserstein).collect()
    }
}

/// Train and test halves of the task data.
pub fn load_task(cfg: &ExperimentConfig) -> Result<(Vec<DensityMatrix>, Vec<DensityMatrix>)> {
    let states = match cfg.task.kind {
        TaskKind::Multicluster => {
            gen_multicluster_scaled(
                cfg.layout.n,
                cfg.layout.m,
                cfg.task.count,
                cfg.seeds.data,
                cfg.task.noise,
            )?
            .states
        }
        TaskKind::EnsembleFile => {
            let path = cfg
                .task
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("task.path: missing".into()))?;
            let ens = Ensemble::read(path)?;
            if ens.n_data() != cfg.layout.n {
                return Err(Error::Config(format!(
                    "layout.n: {} data qubits but {} holds {}-qubit states",
                    cfg.layout.n,
                    path.display(),
                    ens.n_data()
                )));
            }
            ens.to_density()
        }
    };
    if states.len() < 2 {
        return Err(Error::Config("need at least two states to split".into()));
    }
    let mut r = rng::stream(cfg.seeds.data, 1);
    let order = index::sample(&mut r, states.len(), states.len()).into_vec();
    let half = states.len() / 2;
    let pick = |ix: &[usize]| ix.iter().map(|&i| states[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..half]), pick(&order[half..])))
}

/// Untrained model for the configured family.
pub fn build_model(cfg: &ExperimentConfig) -> Result<Model> {
    let layout = cfg.qubit_layout()?;
    let g = &cfg.generator;
    let p = &cfg.prior;
    let seed = cfg.seeds.model;
    let prior = || LatentPriorSpec::mixture(p.family, p.dim, p.modes, rng::derive_seed(&[seed, 0]));
    Ok(match g.family {
        GeneratorFamily::Lpqc => Model::Lpqc {
            prior: prior(),
            generator: Generator::new(
                layout,
                p.dim,
                g.hidden,
                g.depth,
                g.activation,
                g.experts,
                &mut rng::stream(seed, 1),
            )?,
        },
        GeneratorFamily::NoLatent => Model::NoLatent {
            layout,
            spec: NoLatentSpec::standard(layout.param_count()),
        },
        GeneratorFamily::Rd => Model::Rd(RdGenerator::new(layout, p.modes, seed)?),
        GeneratorFamily::Lmlp => {
            let variant = LmlpVariant::for_ancillas(layout.n_anc);
            let spec = MlpSpec {
                d_in: p.dim,
                hidden: g.hidden,
                depth: g.depth,
                d_out: variant.output_dim(layout.n_data),
                activation: g.activation,
            };
            Model::Lmlp {
                prior: prior(),
                layout,
                model: Lmlp::glorot(spec, variant, layout.n_data, &mut rng::stream(seed, 1))?,
            }
        }
    })
}

fn new_adam(model: &Model, lr: f64) -> AdamState {
    match model {
        Model::Lpqc { generator, .. } => AdamState::new(generator, lr),
        Model::NoLatent { spec, .. } => AdamState::new(spec, lr),
        Model::Rd(rd) => AdamState::new(rd, lr),
        Model::Lmlp { model, .. } => AdamState::new(model, lr),
    }
}

/// One optimizer step on a batch of targets; returns the batch loss.
fn train_step(
    cfg: &ExperimentConfig,
    model: &mut Model,
    adam: &mut AdamState,
    targets: &[DensityMatrix],
    seed: u64,
) -> Result<LossParts> {
    let batch = cfg.optimizer.batch;
    let solver = cfg.optimizer.solver();
    match model {
        Model::Lpqc { prior, generator } => {
            let zs = sample_prior(prior, seed, batch)?;
            let (loss, grads) = lpqc_backward(generator, &zs, targets, cfg.optimizer.lambda, solver)?;
            adam_step(adam, generator, &grads)?;
            Ok(loss)
        }
        Model::NoLatent { layout, spec } => {
            let mut r = rng::stream(seed, 0);
            let samples: Vec<_> = (0..batch).map(|_| spec.draw(&mut r)).collect();
            let (loss, grads) = no_latent_backward(layout, spec, &samples, targets, solver)?;
            adam_step(adam, spec, &grads)?;
            Ok(loss)
        }
        Model::Rd(rd) => {
            let thetas = rd.sample(seed, batch);
            let (loss, grads) = rd_backward(rd, &thetas, targets, solver)?;
            adam_step(adam, rd, &grads)?;
            Ok(loss)
        }
        Model::Lmlp { prior, model, .. } => {
            let zs = sample_prior(prior, seed, batch)?;
            let (loss, grads) = lmlp_backward(model, &zs, targets, solver)?;
            adam_step(adam, model, &grads)?;
            Ok(loss)
        }
    }
}

/// Runs the configured experiment and writes `manifest.json`,
/// `config.toml`, `losses.csv` and checkpoints under the output directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let out = &cfg.output.dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (train, test) = load_task(cfg)?;
    let mut model = build_model(cfg)?;
    let mut adam = new_adam(&model, cfg.optimizer.lr);
    let epochs = cfg.epochs();
    let eval_seed = rng::derive_seed(&[cfg.seeds.train, u64::MAX]);
    let eval_count = cfg.output.eval_samples.unwrap_or(test.len());
    let mut seeds = BTreeMap::from([
        ("data".to_string(), cfg.seeds.data),
        ("model".to_string(), cfg.seeds.model),
        ("train".to_string(), cfg.seeds.train),
        ("eval".to_string(), eval_seed),
    ]);
    if let Model::Lpqc { .. } | Model::Lmlp { .. } = model {
        seeds.insert("prior_centers".into(), rng::derive_seed(&[cfg.seeds.model, 0]));
    }

    let ckpt_dir = out.join("checkpoints");
    let mut checkpoints = Vec::new();
    let mut logs = Vec::with_capacity(epochs);
    let mut csv = String::from("epoch,train_loss,train_wasserstein,entropy,test_wasserstein\n");
    let take = cfg.optimizer.batch.min(train.len());
    for epoch in 0..epochs {
        let epoch_seed = rng::derive_seed(&[cfg.seeds.train, epoch as u64]);
        let picks = index::sample(&mut rng::stream(epoch_seed, 0), train.len(), take);
        let targets: Vec<DensityMatrix> = picks.iter().map(|i| train[i].clone()).collect();
        let loss = train_step(cfg, &mut model, &mut adam, &targets, rng::derive_seed(&[epoch_seed, 1]))?;
        let last = epoch + 1 == epochs;
        let test_wasserstein = if (epoch + 1) % cfg.output.log_stride == 0 || last {
            Some(wasserstein_loss(&model.sample_states(eval_seed, eval_count)?, &test)?)
        } else {
            None
        };
        if !loss.total.is_finite() {
            return Err(Error::Degenerate(format!("non-finite training loss at epoch {epoch}")));
        }
        let log = EpochLog {
            epoch,
            train_loss: loss.total,
            train_wasserstein: loss.wasserstein,
            entropy: loss.entropy,
            test_wasserstein,
        };
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            epoch,
            log.train_loss,
            log.train_wasserstein,
            log.entropy,
            log.test_wasserstein.map(|v| v.to_string()).unwrap_or_default()
        ));
        logs.push(log);
        if cfg.output.checkpoint_every > 0 && (epoch + 1) % cfg.output.checkpoint_every == 0 && !last {
            fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
            let p = ckpt_dir.join(format!("epoch-{:05}.lpqw", epoch + 1));
            model.save(&p)?;
            checkpoints.push(p);
        }
    }
    let final_path = out.join("model.lpqw");
    model.save(&final_path)?;
    checkpoints.push(final_path);

    let generated = model.sample_states(eval_seed, eval_count)?;
    let mean_purity = |s: &[DensityMatrix]| s.iter().map(purity).sum::<f64>() / s.len() as f64;
    let final_metrics = FinalMetrics {
        test_wasserstein: match logs.last().and_then(|l| l.test_wasserstein) {
            Some(v) => v,
            None => wasserstein_loss(&generated, &test)?,
        },
        mean_purity_generated: mean_purity(&generated),
        mean_purity_test: mean_purity(&test),
    };
    let manifest = RunManifest {
        software: SOFTWARE.into(),
        config: cfg.clone(),
        seeds,
        train_size: train.len(),
        test_size: test.len(),
        epochs: logs,
        final_metrics,
        checkpoints,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&out.join("losses.csv"), &csv)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    write_text(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
