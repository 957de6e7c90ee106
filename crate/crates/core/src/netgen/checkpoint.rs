//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `LPQW`, `u16` version, `u8` model kind,
//! the qubit layout as three `u32`, then a kind-specific header of small
//! integers followed by raw `f64` parameters.

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Generator, Lmlp, LmlpVariant, Mlp, MlpSpec, NoLatentSpec, RdGenerator};
use crate::priors::{sample_prior, LatentPriorSpec, PriorFamily};
use crate::qcore::{partial_trace_ancilla, Circuit, DensityMatrix, QubitLayout, StateVector};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LPQW";
const VERSION: u16 = 1;

/// Any trained generator the CLI can produce or sample from.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lpqc {
        prior: LatentPriorSpec,
        generator: Generator,
    },
    NoLatent {
        layout: QubitLayout,
        spec: NoLatentSpec,
    },
    Rd(RdGenerator),
    Lmlp {
        prior: LatentPriorSpec,
        layout: QubitLayout,
        model: Lmlp,
    },
}

impl Model {
    pub fn layout(&self) -> &QubitLayout {
        match self {
            Model::Lpqc { generator, .. } => generator.layout(),
            Model::NoLatent { layout, .. } | Model::Lmlp { layout, .. } => layout,
            Model::Rd(rd) => rd.layout(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Lpqc { .. } => "lpqc",
            Model::NoLatent { .. } => "no-latent",
            Model::Rd(_) => "rd",
            Model::Lmlp { .. } => "lmlp",
        }
    }

    /// Circuit angles for `count` fresh draws. `None` for the classical
    /// density-matrix model.
    pub fn sample_angles(&self, seed: u64, count: usize) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(Some(match self {
            Model::Lpqc { prior, generator } => sample_prior(prior, seed, count)?
                .iter()
                .map(|z| generator.parameters(z))
                .collect::<Result<_>>()?,
            Model::NoLatent { spec, .. } => super::sample_no_latent(spec, seed, count),
            Model::Rd(rd) => rd.sample(seed, count),
            Model::Lmlp { .. } => return Ok(None),
        }))
    }

    /// `count` generated data-register states.
    pub fn sample_states(&self, seed: u64, count: usize) -> Result<Vec<DensityMatrix>> {
        if let Model::Lmlp { prior, model, .. } = self {
            return sample_prior(prior, seed, count)?
                .iter()
                .map(|z| model.state(z))
                .collect();
        }
        let layout = *self.layout();
        let circuit = Circuit::hea(&layout);
        let zero = StateVector::zero(layout.n_qubits());
        self.sample_angles(seed, count)?
            .expect("circuit model")
            .iter()
            .map(|theta| {
                let psi = circuit.run(theta, &zero)?;
                partial_trace_ancilla(&psi, layout.n_anc)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u16(VERSION);
        let kind = match self {
            Model::Lpqc { .. } => 0,
            Model::NoLatent { .. } => 1,
            Model::Rd(_) => 2,
            Model::Lmlp { .. } => 3,
        };
        w.u8(kind);
        let l = self.layout();
        w.u32(l.n_data);
        w.u32(l.n_anc);
        w.u32(l.layers);
        match self {
            Model::Lpqc { prior, generator } => {
                w.prior(prior);
                let spec = generator.experts()[0].spec();
                w.u8(spec.activation.code());
                w.u32(spec.hidden);
                w.u32(spec.depth);
                w.u32(generator.n_experts());
                for e in generator.experts() {
                    w.f64s(e.params());
                }
                if let Some(g) = generator.gating() {
                    w.f64s(g.params());
                }
            }
            Model::NoLatent { spec, .. } => {
                w.f64s(&spec.mean);
                w.f64s(&spec.log_std);
            }
            Model::Rd(rd) => {
                w.u32(rd.centers().len());
                for c in rd.centers() {
                    w.f64s(c);
                }
                w.f64s(&rd.trainable);
            }
            Model::Lmlp { prior, model, .. } => {
                w.prior(prior);
                let spec = model.mlp.spec();
                w.u8(match model.variant {
                    LmlpVariant::Mixed => 0,
                    LmlpVariant::Pure => 1,
                });
                w.u8(spec.activation.code());
                w.u32(spec.hidden);
                w.u32(spec.depth);
                w.f64s(model.mlp.params());
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Parse {
                offset: 0,
                msg: "not a model checkpoint".into(),
            });
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported checkpoint version {version}")));
        }
        let kind = r.u8()?;
        if kind > 3 {
            return Err(Error::Parse {
                offset: r.pos - 1,
                msg: format!("unknown model kind {kind}"),
            });
        }
        let layout = QubitLayout::new(r.u32()?, r.u32()?, r.u32()?)?;
        let k = layout.param_count();
        let model = match kind {
            0 => {
                let prior = r.prior()?;
                let activation = r.activation()?;
                let (hidden, depth, n_experts) = (r.u32()?, r.u32()?, r.u32()?);
                if n_experts == 0 {
                    return Err(r.err("zero experts".into()));
                }
                let spec = MlpSpec {
                    d_in: prior.dim,
                    hidden,
                    depth,
                    d_out: k,
                    activation,
                };
                let experts = (0..n_experts)
                    .map(|_| Mlp::from_params(spec, r.f64s(spec.param_count())?))
                    .collect::<Result<Vec<_>>>()?;
                let gating = if n_experts > 1 {
                    let gs = super::gating_spec(prior.dim, n_experts);
                    Some(Mlp::from_params(gs, r.f64s(gs.param_count())?)?)
                } else {
                    None
                };
                Model::Lpqc {
                    prior,
                    generator: Generator::from_parts(layout, experts, gating)?,
                }
            }
            1 => {
                let mean = r.f64s(k)?;
                let log_std = r.f64s(k)?;
                Model::NoLatent {
                    layout,
                    spec: NoLatentSpec::new(mean, log_std)?,
                }
            }
            2 => {
                let modes = r.u32()?;
                let n_rand = layout.params_per_layer() * (layout.layers / 2 + 1);
                if modes == 0 || n_rand > k {
                    return Err(r.err("bad random-deterministic header".into()));
                }
                let centers = (0..modes).map(|_| r.f64s(n_rand)).collect::<Result<Vec<_>>>()?;
                let trainable = r.f64s(k - n_rand)?;
                Model::Rd(RdGenerator::from_parts(layout, centers, trainable)?)
            }
            3 => {
                let prior = r.prior()?;
                let variant = match r.u8()? {
                    0 => LmlpVariant::Mixed,
                    1 => LmlpVariant::Pure,
                    v => return Err(r.err(format!("unknown output variant {v}"))),
                };
                let activation = r.activation()?;
                let (hidden, depth) = (r.u32()?, r.u32()?);
                let spec = MlpSpec {
                    d_in: prior.dim,
                    hidden,
                    depth,
                    d_out: variant.output_dim(layout.n_data),
                    activation,
                };
                let mlp = Mlp::from_params(spec, r.f64s(spec.param_count())?)?;
                Model::Lmlp {
                    prior,
                    layout,
                    model: Lmlp::new(mlp, variant, layout.n_data)?,
                }
            }
            _ => unreachable!(),
        };
        if r.pos != buf.len() {
            return Err(r.err(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(model)
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.bytes(&(v as u32).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.bytes(&x.to_le_bytes());
        }
    }
    fn prior(&mut self, p: &LatentPriorSpec) {
        self.u8(match p.family {
            PriorFamily::Gaussian => 0,
            PriorFamily::Uniform => 1,
        });
        self.u32(p.dim);
        self.u32(p.modes());
        self.f64s(&p.weights);
        for c in &p.centers {
            self.f64s(c);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: String) -> Error {
        Error::Parse { offset: self.pos, msg }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("truncated: wanted {n} more bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.err("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn activation(&mut self) -> Result<Activation> {
        let c = self.u8()?;
        Activation::from_code(c).ok_or_else(|| self.err(format!("unknown activation {c}")))
    }

    fn prior(&mut self) -> Result<LatentPriorSpec> {
        let family = match self.u8()? {
            0 => PriorFamily::Gaussian,
            1 => PriorFamily::Uniform,
            v => return Err(self.err(format!("unknown prior family {v}"))),
        };
        let dim = self.u32()?;
        let modes = self.u32()?;
        let weights = self.f64s(modes)?;
        let centers = (0..modes).map(|_| self.f64s(dim)).collect::<Result<Vec<_>>>()?;
        let p = LatentPriorSpec {
            family,
            dim,
            weights,
            centers,
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::LmlpVariant;
    use crate::rng;

    fn models() -> Vec<Model> {
        let layout = QubitLayout::new(2, 1, 2).unwrap();
        let mut r = rng::stream(5, 0);
        let generator = Generator::new(layout, 3, 4, 2, Activation::Tanh, 3, &mut r).unwrap();
        let prior = LatentPriorSpec::mixture(PriorFamily::Gaussian, 3, 2, 9);
        let lmlp_spec = MlpSpec {
            d_in: 3,
            hidden: 5,
            depth: 1,
            d_out: LmlpVariant::Mixed.output_dim(2),
            activation: Activation::Relu,
        };
        vec![
            Model::Lpqc {
                prior: prior.clone(),
                generator,
            },
            Model::NoLatent {
                layout,
                spec: NoLatentSpec::new(vec![0.1; 18], vec![-0.5; 18]).unwrap(),
            },
            Model::Rd(RdGenerator::new(layout, 2, 1).unwrap()),
            Model::Lmlp {
                prior,
                layout,
                model: Lmlp::glorot(lmlp_spec, LmlpVariant::Mixed, 2, &mut r).unwrap(),
            },
        ]
    }

    #[test]
    fn round_trip_every_kind() {
        for m in models() {
            let bytes = m.to_bytes();
            let back = Model::from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            let a = m.sample_states(3, 4).unwrap();
            let b = back.sample_states(3, 4).unwrap();
            assert_eq!(a, b, "{}", m.kind_name());
        }
    }

    #[test]
    fn truncation_and_garbage_are_parse_errors() {
        let bytes = models()[0].to_bytes();
        for cut in [0, 3, 7, 20, bytes.len() - 1] {
            assert!(
                matches!(Model::from_bytes(&bytes[..cut]), Err(Error::Parse { .. })),
                "cut {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Model::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[6] = 42;
        assert!(matches!(Model::from_bytes(&bad), Err(Error::Parse { offset: 6, .. })));
    }
}
