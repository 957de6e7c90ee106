//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria checked against exact oracles or identities are gating: any
//! FAIL makes the process exit non-zero. Criteria that reproduce empirical
//! claims at reduced scale (3, 4, 5 and the training half of 9) are
//! reported with their measured values and do not gate the exit status.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use lpqc::cli::{cmd_decode, cmd_encode, cmd_eval, cmd_gen_dataset, cmd_gradnorm, cmd_train};
use lpqc::cli::{DatasetSource, DecodeRequest, EncodeRequest, ExperimentConfig, GradnormRequest, RunManifest};
use lpqc::data::{
    complete_valences, decode_state, encode_molecule, format_molecules, infer_bonds, Element, EncodeOptions, Ensemble,
    MoleculeRecord, NormalizationContext, ScaleMode,
};
use lpqc::grad::bench::{grad_norm_benchmark, BenchConfig, BenchFamily};
use lpqc::grad::{circuit_grad_adjoint, circuit_grad_paramshift, lpqc_backward};
use lpqc::impe::{branch_average, cycle_channel, impe_train, measurement_branch, ImpeConfig};
use lpqc::netgen::{Activation, Generator, Trainable};
use lpqc::otloss::{ot_exact, uniform, Solver};
use lpqc::qcore::{
    partial_trace_ancilla, super_fidelity, trace_distance, trace_product, Circuit, DensityMatrix, Gate, QubitLayout,
    StateVector, C64,
};
use lpqc::rng::{self, Rng};

struct Report {
    gating_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, gating: bool, detail: String, t: Instant) {
        let status = if pass { "PASS" } else { "FAIL" };
        let tag = if gating { "" } else { " [reported]" };
        println!(
            "criterion {id}: {status}{tag} ({:.1}s) {detail}",
            t.elapsed().as_secs_f64()
        );
        if gating && !pass {
            self.gating_failures += 1;
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("criterion {id}: info {detail}");
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

fn random_hermitian(d: usize, r: &mut Rng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(d, d, |_, _| {
        C64::new(r.sample(StandardNormal), r.sample(StandardNormal))
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn random_layout(r: &mut Rng, max_qubits: usize, max_layers: usize) -> QubitLayout {
    let total = r.gen_range(1..=max_qubits);
    let n = r.gen_range(1..=total);
    QubitLayout::new(n, total - n, r.gen_range(1..=max_layers)).unwrap()
}

fn angles(r: &mut Rng, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| r.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

fn c1_gradients(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng::stream(0xC1, 0);
    let (mut worst_ps, mut worst_fd) = (0.0f64, 0.0f64);
    for instance in 0..20 {
        let layout = random_layout(&mut r, 4, 3);
        let theta = angles(&mut r, layout.param_count());
        let g = random_hermitian(layout.data_dim(), &mut r);
        let adj = circuit_grad_adjoint(&layout, &theta, &g).unwrap();
        let ps = circuit_grad_paramshift(&layout, &theta, |rho| trace_product(rho.matrix(), &g)).unwrap();
        worst_ps = worst_ps.max(rel_err(&adj, &ps));

        let experts = 1 + instance % 2;
        let d = r.gen_range(1..=3);
        let batch = r.gen_range(1..=4);
        let act = [Activation::Tanh, Activation::Gelu, Activation::Linear][instance % 3];
        let mut gen = Generator::new(layout, d, 4, 1, act, experts, &mut r).unwrap();
        let zs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..d).map(|_| r.sample(StandardNormal)).collect())
            .collect();
        let targets: Vec<DensityMatrix> = (0..batch)
            .map(|_| DensityMatrix::random(layout.n_data, 1, &mut r))
            .collect();
        let lambda = if experts > 1 { 0.01 } else { 0.0 };
        let (_, grads) = lpqc_backward(&gen, &zs, &targets, lambda, Solver::Exact).unwrap();
        let analytic: Vec<f64> = grads.concat();
        let h = 1e-6;
        let mut fd = Vec::with_capacity(analytic.len());
        let n_tensors = gen.tensors().len();
        for ti in 0..n_tensors {
            let len = gen.tensors()[ti].len();
            for k in 0..len {
                let orig = gen.tensors()[ti][k];
                gen.tensors_mut()[ti][k] = orig + h;
                let plus = lpqc_backward(&gen, &zs, &targets, lambda, Solver::Exact)
                    .unwrap()
                    .0
                    .total;
                gen.tensors_mut()[ti][k] = orig - h;
                let minus = lpqc_backward(&gen, &zs, &targets, lambda, Solver::Exact)
                    .unwrap()
                    .0
                    .total;
                gen.tensors_mut()[ti][k] = orig;
                fd.push((plus - minus) / (2.0 * h));
            }
        }
        worst_fd = worst_fd.max(rel_err(&analytic, &fd));
    }
    rep.line(
        "1",
        worst_ps < 1e-8 && worst_fd < 1e-3,
        true,
        format!("20 instances; adjoint vs parameter-shift max rel err {worst_ps:.2e} (< 1e-8); pipeline vs central FD max rel err {worst_fd:.2e} (< 1e-3)"),
        t,
    );
}

fn brute_force_assignment(c: &DMatrix<f64>) -> f64 {
    fn go(c: &DMatrix<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = c.nrows();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c[(row, j)], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.nrows()], 0.0, &mut best);
    best / c.nrows() as f64
}

fn c2_ot(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng::stream(0xC2, 0);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = 1 + i % 6;
        let c = DMatrix::from_fn(n, n, |_, _| r.gen::<f64>());
        let sol = ot_exact(&c, &uniform(n), &uniform(n)).unwrap();
        worst = worst.max((sol.cost - brute_force_assignment(&c)).abs());
    }
    rep.line(
        "2",
        worst < 1e-10,
        true,
        format!("50 instances up to 6x6; max |exact − brute force| {worst:.2e} (< 1e-10)"),
        t,
    );
}

fn bench(family: BenchFamily, n: usize, m: usize, layers: usize, trials: usize, seed: u64) -> f64 {
    let mut cfg = BenchConfig::new(family, n, layers, trials, seed);
    cfg.m = m;
    grad_norm_benchmark(&cfg).unwrap().mean
}

fn c3_separation(rep: &mut Report) {
    let t = Instant::now();
    let tanh = bench(BenchFamily::LpqcGaussTanh, 6, 0, 10, 128, 0);
    let flat = bench(BenchFamily::NoLatentUniform, 6, 0, 10, 128, 0);
    let rd = bench(BenchFamily::Rd, 6, 0, 10, 128, 0);
    let ratio = tanh / flat;
    rep.info(
        "3",
        format!("n=6 L=10: lpqc-gauss-tanh {tanh:.3e}, no-latent-uniform {flat:.3e}, rd {rd:.3e}"),
    );

    let decay = |m: usize| -> Vec<f64> {
        [2, 4, 8]
            .iter()
            .map(|&l| {
                median(
                    (0..3)
                        .map(|s| bench(BenchFamily::NoLatentUniform, 4, m, l, 128, s))
                        .collect(),
                )
            })
            .collect()
    };
    let with_anc = decay(2);
    let without = decay(0);
    let monotone = with_anc.windows(2).all(|w| w[1] < w[0]);
    rep.info(
        "3",
        format!(
            "n=4 m=0 no-latent medians L=2,4,8: {:.3e} {:.3e} {:.3e} (monotone: {})",
            without[0],
            without[1],
            without[2],
            without.windows(2).all(|w| w[1] < w[0])
        ),
    );
    rep.line(
        "3",
        ratio >= 10.0 && monotone,
        false,
        format!(
            "tanh/no-latent ratio {ratio:.1} (>= 10); n=4 m=2 no-latent medians L=2,4,8: {:.3e} {:.3e} {:.3e} (strictly decreasing: {monotone})",
            with_anc[0], with_anc[1], with_anc[2]
        ),
        t,
    );
}

fn c4_saturation(rep: &mut Report) {
    let t = Instant::now();
    let v = bench(BenchFamily::NoLatentUniform, 8, 0, 10, 64, 0);
    rep.line(
        "4",
        (1e-12..=1e-8).contains(&v),
        false,
        format!("n=8 L=10 64 trials no-latent {v:.3e} (in [1e-12, 1e-8])"),
        t,
    );
}

fn train_config(dir: &Path, generator: &str, prior: &str, seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"
[layout]
n = 4
m = 2
layers = 10

[generator]
{generator}

[prior]
{prior}

[optimizer]
epochs = 500

[seeds]
data = {seed}
model = {}
train = {}

[output]
dir = "{}"
log_stride = 50
"#,
        seed + 100,
        seed + 200,
        dir.display()
    );
    ExperimentConfig::from_toml_str(&text).unwrap().resolve().unwrap()
}

fn c5_prior(rep: &mut Report) {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let variants = [
        (
            "M=4 uniform",
            "family = \"lpqc\"\nexperts = 1",
            "family = \"uniform\"\nmodes = 4",
        ),
        (
            "M=1 uniform",
            "family = \"lpqc\"\nexperts = 1",
            "family = \"uniform\"\nmodes = 1",
        ),
        ("no-latent", "family = \"no-latent\"", "family = \"uniform\"\nmodes = 1"),
    ];
    let mut finals = vec![Vec::new(); variants.len()];
    let mut early = vec![Vec::new(); variants.len()];
    for seed in 0..3u64 {
        for (v, (name, gen, prior)) in variants.iter().enumerate() {
            let dir = tmp.path().join(format!("{v}-{seed}"));
            let m = cmd_train(&train_config(&dir, gen, prior, seed)).unwrap();
            finals[v].push(m.final_metrics.test_wasserstein);
            early[v].push(m.epochs[49].test_wasserstein.unwrap());
            rep.info(
                "5",
                format!(
                    "{name} seed {seed}: epoch-50 {:.4}, final {:.4}",
                    early[v][seed as usize], finals[v][seed as usize]
                ),
            );
        }
    }
    let med: Vec<f64> = finals.iter().map(|f| median(f.clone())).collect();
    // A fourth seed, outside the criterion, shows how sensitive the M=4 vs
    // M=1 ordering is at this scale.
    let extra: Vec<f64> = variants[..2]
        .iter()
        .enumerate()
        .map(|(v, (_, gen, prior))| {
            let dir = tmp.path().join(format!("{v}-extra"));
            cmd_train(&train_config(&dir, gen, prior, 3))
                .unwrap()
                .final_metrics
                .test_wasserstein
        })
        .collect();
    rep.info(
        "5",
        format!(
            "seed 3 (not part of the criterion): M=4 {:.4}, M=1 {:.4}; four-seed medians M=4 {:.4}, M=1 {:.4}",
            extra[0],
            extra[1],
            median([finals[0].clone(), vec![extra[0]]].concat()),
            median([finals[1].clone(), vec![extra[1]]].concat())
        ),
    );
    let med_early: Vec<f64> = early.iter().map(|f| median(f.clone())).collect();
    rep.info(
        "5",
        format!(
            "median epoch-50 test D_Wass: M=4 {:.4}, M=1 {:.4}, no-latent {:.4}",
            med_early[0], med_early[1], med_early[2]
        ),
    );
    let lower = med[0] < med[1];
    let gap = med[0] * 10.0 <= med[2] && med[1] * 10.0 <= med[2];
    rep.line(
        "5",
        lower && gap,
        false,
        format!(
            "median final test D_Wass: M=4 {:.4}, M=1 {:.4}, no-latent {:.4}; M=4 < M=1: {lower}; both >= 10x below no-latent: {gap}",
            med[0], med[1], med[2]
        ),
        t,
    );
}

fn c6_invariants(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng::stream(0xC6, 0);
    let mut violations = [0usize; 5];
    let mut worst_norm = 0.0f64;
    for _ in 0..1000 {
        let layout = random_layout(&mut r, 3, 3);
        let k = layout.param_count();
        let a = angles(&mut r, k);
        let scale = [1e-3, 0.1, 1.0, 3.0][r.gen_range(0..4)];
        let b: Vec<f64> = a.iter().map(|x| x + scale * r.gen_range(-1.0..1.0)).collect();
        let circuit = Circuit::hea(&layout);
        let du = circuit.unitary(&a).unwrap() - circuit.unitary(&b).unwrap();
        let bound = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        if spectral_norm(&du) > bound + 1e-12 {
            violations[0] += 1;
        }
        let psi = circuit.run(&a, &StateVector::haar(layout.n_qubits(), &mut r)).unwrap();
        worst_norm = worst_norm.max((psi.norm() - 1.0).abs());
        if (psi.norm() - 1.0).abs() > 1e-10 {
            violations[1] += 1;
        }
    }
    for _ in 0..1000 {
        let (x, y) = (r.gen_range(-10.0..10.0), r.gen_range(-10.0..10.0));
        for gate in [Gate::Ry { qubit: 0, param: 0 }, Gate::Rz { qubit: 0, param: 0 }] {
            let c = Circuit::new(1, 1, vec![gate]);
            let d = c.unitary(&[x]).unwrap() - c.unitary(&[y]).unwrap();
            if spectral_norm(&d) > 0.5 * (x - y).abs() + 1e-12 {
                violations[2] += 1;
            }
        }
    }
    for _ in 0..1000 {
        let layout = random_layout(&mut r, 4, 1);
        let nq = layout.n_qubits();
        let (p, q) = (StateVector::haar(nq, &mut r), StateVector::haar(nq, &mut r));
        let full = trace_distance(&DensityMatrix::pure(&p), &DensityMatrix::pure(&q)).unwrap();
        let reduced = trace_distance(
            &partial_trace_ancilla(&p, layout.n_anc).unwrap(),
            &partial_trace_ancilla(&q, layout.n_anc).unwrap(),
        )
        .unwrap();
        if reduced > full + 1e-12 {
            violations[3] += 1;
        }
    }
    for _ in 0..1000 {
        let n = r.gen_range(1..=3);
        let rho = DensityMatrix::random(n, r.gen_range(0..=2), &mut r);
        let psi = StateVector::haar(n, &mut r);
        let k = super_fidelity(&rho, &DensityMatrix::pure(&psi)).unwrap();
        let v = DMatrix::from_column_slice(psi.dim(), 1, psi.amplitudes());
        let expect = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
        if (k - expect).abs() > 1e-12 {
            violations[4] += 1;
        }
    }
    rep.line(
        "6",
        violations.iter().all(|&v| v == 0),
        true,
        format!(
            "violations per 1000 draws: telescoping {}, norm preservation {} (worst {worst_norm:.1e}), RY/RZ Lipschitz {}, partial-trace contraction {}, pure super-fidelity {}",
            violations[0], violations[1], violations[2], violations[3], violations[4]
        ),
        t,
    );
}

fn random_molecule(r: &mut Rng, ctx: &NormalizationContext, min_atoms: usize) -> MoleculeRecord {
    let m = r.gen_range(min_atoms..=9);
    let atoms = (0..m)
        .map(|_| {
            let e = Element::ALL[r.gen_range(0..4)];
            let p = [0, 1, 2].map(|a| ctx.v_min[a] + ctx.delta * r.gen::<f64>());
            (e, p)
        })
        .collect();
    MoleculeRecord::new(atoms).unwrap()
}

fn c7_codec(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng::stream(0xC7, 0);
    let ctx = NormalizationContext::new([-2.0, -1.5, -3.0], 4.0).unwrap();
    let opts = EncodeOptions {
        store_count: false,
        align: false,
    };
    let (mut element_mismatch, mut worst_pos, mut worst_norm) = (0usize, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let mol = random_molecule(&mut r, &ctx, 1);
        let m = mol.len();
        let state = encode_molecule(&mol, &ctx, opts).unwrap();
        let back = decode_state(&state, &ctx, ScaleMode::Strict1x, Some(m)).unwrap();
        if back.elements() != mol.elements() {
            element_mismatch += 1;
        }
        for (p, q) in back.positions().iter().zip(mol.positions()) {
            for a in 0..3 {
                worst_pos = worst_pos.max((p[a] - q[a]).abs());
            }
        }
        let amp: Vec<f64> = state.amplitudes().iter().map(|a| a.re).collect();
        for i in 0..m {
            let block: f64 = amp[7 * i..7 * i + 7].iter().map(|a| a * a).sum();
            let contribution = 4.0 * m as f64 * (block + amp[7 * m + i].powi(2));
            worst_norm = worst_norm.max((contribution - 4.0).abs());
        }
    }
    rep.line(
        "7",
        element_mismatch == 0 && worst_pos <= 1e-6 && worst_norm < 1e-12,
        true,
        format!("100 molecules; element mismatches {element_mismatch}; max position error {worst_pos:.1e} Å (<= 1e-6); max |per-atom contribution − 4| {worst_norm:.1e}"),
        t,
    );
}

fn chain(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<u8>> {
    let mut ac = vec![vec![0u8; n]; n];
    for &(i, j) in edges {
        ac[i][j] = 1;
        ac[j][i] = 1;
    }
    ac
}

fn c8_valence(rep: &mut Report) {
    use Element::*;
    let t = Instant::now();
    let cc = complete_valences(&chain(2, &[(0, 1)]), &[C, C]);
    let cc_ok = cc.bo[0][1] == 3 && cc.implicit_h == [1, 1];
    let cf = complete_valences(&chain(2, &[(0, 1)]), &[C, F]);
    let cf_ok = cf.bo[0][1] == 1 && cf.implicit_h == [3, 0] && cf.rounds == 0;
    let cco = complete_valences(&chain(3, &[(0, 1), (1, 2)]), &[C, C, O]);
    let promoted: usize = (0..3)
        .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
        .map(|(i, j)| (cco.bo[i][j] - cco.ac[i][j]) as usize)
        .sum();
    let cco_ok = cco.bo[0][1] == 3 && cco.bo[1][2] == 1 && cco.implicit_h == [1, 0, 1] && promoted == cco.rounds;

    let mut r = rng::stream(0xC8, 0);
    let ctx = NormalizationContext::new([-2.0, -2.0, -2.0], 4.0).unwrap();
    let opts = EncodeOptions {
        store_count: false,
        align: false,
    };
    let (mut over, mut bonds) = (0usize, 0usize);
    for _ in 0..200 {
        let mol = random_molecule(&mut r, &ctx, 2);
        let m = mol.len();
        let clean = encode_molecule(&mol, &ctx, opts).unwrap();
        let noisy: Vec<C64> = clean
            .amplitudes()
            .iter()
            .map(|a| a + C64::new(0.01 * r.sample::<f64, _>(StandardNormal), 0.0))
            .collect();
        let state = StateVector::normalized(noisy).unwrap();
        let dec = decode_state(&state, &ctx, ScaleMode::Strict1x, Some(m)).unwrap();
        let elements = dec.elements();
        let adj = infer_bonds(&dec.positions(), &elements);
        let g = complete_valences(&adj.ac, &elements);
        for (i, e) in elements.iter().enumerate() {
            let row: usize = g.bo[i].iter().map(|&b| b as usize).sum();
            bonds += row;
            if row > e.valence() || row + g.implicit_h[i] != e.valence() {
                over += 1;
            }
        }
    }
    rep.line(
        "8",
        cc_ok && cf_ok && cco_ok && over == 0,
        true,
        format!(
            "C≡C {cc_ok}; C–F {cf_ok}; C–C–O {cco_ok} (bo01={}, bo12={}, H={:?}, rounds={}); valence violations on 200 decoded geometries {over} ({} bonds total)",
            cco.bo[0][1], cco.bo[1][2], cco.implicit_h, cco.rounds, bonds / 2
        ),
        t,
    );
}

fn c9_impe(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng::stream(0xC9, 0);
    let mut worst = 0.0f64;
    let mut instances = 0;
    for layers in 1..=3 {
        let cfg = ImpeConfig::new(2, 1, layers, 1);
        for _ in 0..20 {
            let zeta = angles(&mut r, cfg.params_per_cycle());
            for basis in 0..4 {
                let psi = StateVector::basis(2, basis);
                let out = cfg.circuit().run(&zeta, &psi.tensor(&StateVector::zero(1))).unwrap();
                let channel = cycle_channel(&cfg, &zeta, &psi).unwrap();
                // outcome average built from normalized post-measurement states
                let mut avg = DMatrix::<C64>::zeros(4, 4);
                for z in 0..2 {
                    let (chi, p) = measurement_branch(&out, 1, z);
                    if p > 0.0 {
                        let phi = StateVector::normalized(chi).unwrap();
                        avg += DensityMatrix::pure(&phi).matrix() * C64::new(p, 0.0);
                    }
                }
                worst = worst.max((&avg - channel.matrix()).map(|z| z.norm()).max());
                worst = worst.max(
                    (branch_average(&out, 1).matrix() - channel.matrix())
                        .map(|z| z.norm())
                        .max(),
                );
                instances += 1;
            }
        }
    }
    rep.line(
        "9a",
        worst <= 1e-10,
        true,
        format!("{instances} instances (all basis inputs, L=1..3); max entry deviation {worst:.1e} (<= 1e-10)"),
        t,
    );

    let t = Instant::now();
    let mut tr = rng::stream(0x9B, 0);
    let rot = Circuit::rotation_layer(2);
    let centers = [0, 3].map(|i| StateVector::basis(2, i));
    let training: Vec<StateVector> = (0..16)
        .map(|i| {
            let theta: Vec<f64> = (0..rot.n_params())
                .map(|_| 0.2 * tr.sample::<f64, _>(StandardNormal))
                .collect();
            rot.run(&theta, &centers[i % 2]).unwrap()
        })
        .collect();
    let mut cfg = ImpeConfig::new(2, 1, 2, 2);
    cfg.batch = 16;
    cfg.epochs_per_cycle = 60;
    cfg.lr = 0.05;
    cfg.eval_stride = 5;
    let mut descended = 0;
    let mut summary = Vec::new();
    for seed in 0..10 {
        let res = impe_train(&cfg, &training, seed).unwrap();
        if res.final_loss() < res.start_loss {
            descended += 1;
        }
        summary.push(format!("{:.3}->{:.3}", res.start_loss, res.final_loss()));
    }
    rep.line(
        "9b",
        descended >= 8,
        false,
        format!("{descended}/10 seeds descend (>= 8): {}", summary.join(" ")),
        t,
    );
}

fn bits(m: &RunManifest) -> Vec<u64> {
    let mut v = Vec::new();
    for e in &m.epochs {
        v.extend(
            [
                e.train_loss,
                e.train_wasserstein,
                e.entropy,
                e.test_wasserstein.unwrap_or(f64::NAN),
            ]
            .map(f64::to_bits),
        );
    }
    let f = &m.final_metrics;
    v.extend([f.test_wasserstein, f.mean_purity_generated, f.mean_purity_test].map(f64::to_bits));
    v
}

fn small_config(dir: &Path, body: &str) -> ExperimentConfig {
    let text = format!("{body}\n[output]\ndir = \"{}\"\ncheckpoint_every = 5\n", dir.display());
    ExperimentConfig::from_toml_str(&text).unwrap().resolve().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

fn c10_determinism(rep: &mut Report) {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut mismatches = Vec::new();
    let bodies = [
        "[layout]\nn = 2\nm = 1\nlayers = 2\n[generator]\nexperts = 2\n[prior]\nfamily = \"uniform\"\nmodes = 3\n[optimizer]\nepochs = 12\nbatch = 16\n",
        "[layout]\nn = 2\nm = 1\nlayers = 2\n[optimizer]\nepochs = 12\nbatch = 16\nsolver = \"sinkhorn\"\n",
        "[layout]\nn = 2\nm = 1\nlayers = 2\n[generator]\nfamily = \"no-latent\"\n[optimizer]\nepochs = 12\nbatch = 16\n",
        "[layout]\nn = 2\nm = 1\nlayers = 2\n[generator]\nfamily = \"rd\"\n[prior]\nmodes = 2\n[optimizer]\nepochs = 12\nbatch = 16\n",
        "[layout]\nn = 2\nm = 1\nlayers = 2\n[generator]\nfamily = \"lmlp\"\nhidden = 8\n[optimizer]\nepochs = 12\nbatch = 16\n",
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for (i, body) in bodies.iter().enumerate() {
        let dirs = [
            root.join(format!("t{i}a")),
            root.join(format!("t{i}b")),
            root.join(format!("t{i}c")),
        ];
        let a = cmd_train(&small_config(&dirs[0], body)).unwrap();
        let b = single.install(|| cmd_train(&small_config(&dirs[1], body))).unwrap();
        let mut replay_cfg = RunManifest::load(&dirs[0].join("manifest.json")).unwrap().config;
        replay_cfg.output.dir = dirs[2].clone();
        let c = cmd_train(&replay_cfg.resolve().unwrap()).unwrap();
        for (label, other, dir) in [("rerun on one thread", &b, &dirs[1]), ("manifest replay", &c, &dirs[2])] {
            let same = bits(&a) == bits(other)
                && read(&dirs[0].join("losses.csv")) == read(&dir.join("losses.csv"))
                && read(&dirs[0].join("model.lpqw")) == read(&dir.join("model.lpqw"))
                && read(&dirs[0].join("checkpoints/epoch-00005.lpqw"))
                    == read(&dir.join("checkpoints/epoch-00005.lpqw"));
            if !same {
                mismatches.push(format!("train[{}] {label}", a.config.generator.family_name()));
            }
        }
    }

    let gn = |p: &Path| {
        let req = GradnormRequest {
            families: BenchFamily::ALL.to_vec(),
            n_list: vec![2],
            l_list: vec![2, 4],
            m: 1,
            trials: 4,
            batch: 8,
            seed: 5,
        };
        cmd_gradnorm(&req, p).unwrap();
        read(p)
    };
    if gn(&root.join("g1.csv")) != single.install(|| gn(&root.join("g2.csv"))) {
        mismatches.push("gradnorm".into());
    }

    let ds = |p: &Path| {
        cmd_gen_dataset(
            &DatasetSource::Multicluster {
                n: 2,
                m: 1,
                noise: 0.05,
            },
            40,
            9,
            p,
        )
        .unwrap();
        read(p)
    };
    if ds(&root.join("d1.lpqe")) != ds(&root.join("d2.lpqe")) {
        mismatches.push("gen-dataset".into());
    }
    let from_ckpt = |p: &Path| {
        cmd_gen_dataset(&DatasetSource::Checkpoint(root.join("t0a/model.lpqw")), 40, 9, p).unwrap();
        read(p)
    };
    if from_ckpt(&root.join("d3.lpqe")) != from_ckpt(&root.join("d4.lpqe")) {
        mismatches.push("gen-dataset from checkpoint".into());
    }

    let g = Ensemble::read(&root.join("d1.lpqe")).unwrap().to_density();
    let tgt = Ensemble::read(&root.join("d3.lpqe")).unwrap().to_density();
    let e1 = serde_json::to_string(&cmd_eval(&g, &tgt, Some(&root.join("pca1"))).unwrap()).unwrap();
    let e2 = serde_json::to_string(&cmd_eval(&g, &tgt, Some(&root.join("pca2"))).unwrap()).unwrap();
    if e1 != e2 || read(&root.join("pca1/pca_generated.csv")) != read(&root.join("pca2/pca_generated.csv")) {
        mismatches.push("eval".into());
    }

    let mut r = rng::stream(0xCA, 0);
    let ctx = NormalizationContext::new([-2.0, -2.0, -2.0], 4.0).unwrap();
    let mols: Vec<MoleculeRecord> = (0..10).map(|_| random_molecule(&mut r, &ctx, 2)).collect();
    fs::write(root.join("mols.txt"), format_molecules(&mols)).unwrap();
    for tag in ["1", "2"] {
        cmd_encode(&EncodeRequest {
            input: &root.join("mols.txt"),
            output: &root.join(format!("enc{tag}.lpqe")),
            context: &root.join(format!("ctx{tag}.json")),
            fit_context: true,
            options: EncodeOptions::default(),
        })
        .unwrap();
        cmd_decode(&DecodeRequest {
            input: &root.join(format!("enc{tag}.lpqe")),
            output: &root.join(format!("dec{tag}.txt")),
            context: &root.join(format!("ctx{tag}.json")),
            scale: ScaleMode::Paper2x,
            atoms: Some(3),
            graphs: Some(&root.join(format!("graphs{tag}.txt"))),
        })
        .unwrap();
    }
    for f in ["enc{}.lpqe", "ctx{}.json", "dec{}.txt", "graphs{}.txt"] {
        if read(&root.join(f.replace("{}", "1"))) != read(&root.join(f.replace("{}", "2"))) {
            mismatches.push(f.replace("{}", ""));
        }
    }

    rep.line(
        "10",
        mismatches.is_empty(),
        true,
        format!(
            "train (5 generator configs, one-thread rerun and manifest replay), gradnorm, gen-dataset, eval, encode, decode; mismatches: {}",
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join(", ") }
        ),
        t,
    );
}

trait FamilyName {
    fn family_name(&self) -> String;
}

impl FamilyName for lpqc::cli::GeneratorConfig {
    fn family_name(&self) -> String {
        format!("{:?}", self.family).to_lowercase()
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // selects criteria by number.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| f == id);
    let mut rep = Report { gating_failures: 0 };
    let criteria: [(&str, fn(&mut Report)); 10] = [
        ("1", c1_gradients),
        ("2", c2_ot),
        ("3", c3_separation),
        ("4", c4_saturation),
        ("5", c5_prior),
        ("6", c6_invariants),
        ("7", c7_codec),
        ("8", c8_valence),
        ("9", c9_impe),
        ("10", c10_determinism),
    ];
    for (id, f) in criteria {
        if wanted(id) {
            f(&mut rep);
        }
    }
    if rep.gating_failures > 0 {
        println!("{} gating criteria failed", rep.gating_failures);
        std::process::exit(1);
    }
}
