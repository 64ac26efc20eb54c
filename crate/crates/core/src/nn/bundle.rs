use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Builder;
use super::{Decoder, Discriminator, Encoder, NetConfig, Translator};
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Identifies one of the eight networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NetworkId {
    EncoderAb,
    EncoderBa,
    DecoderA,
    DecoderB,
    TranslatorAb,
    TranslatorBa,
    CriticA,
    CriticB,
}

impl NetworkId {
    pub const ALL: [NetworkId; 8] = [
        NetworkId::EncoderAb,
        NetworkId::EncoderBa,
        NetworkId::DecoderA,
        NetworkId::DecoderB,
        NetworkId::TranslatorAb,
        NetworkId::TranslatorBa,
        NetworkId::CriticA,
        NetworkId::CriticB,
    ];

    /// Parameter-name prefix.
    pub fn prefix(self) -> &'static str {
        match self {
            NetworkId::EncoderAb => "e_ab",
            NetworkId::EncoderBa => "e_ba",
            NetworkId::DecoderA => "d_a",
            NetworkId::DecoderB => "d_b",
            NetworkId::TranslatorAb => "t_ab",
            NetworkId::TranslatorBa => "t_ba",
            NetworkId::CriticA => "q_a",
            NetworkId::CriticB => "q_b",
        }
    }

    pub fn from_param_name(name: &str) -> Option<NetworkId> {
        let prefix = name.split('.').next()?;
        NetworkId::ALL.into_iter().find(|n| n.prefix() == prefix)
    }

    pub fn is_generator_side(self) -> bool {
        !matches!(self, NetworkId::CriticA | NetworkId::CriticB)
    }
}

/// The building blocks the losses are written against. [`ModelBundle`] is
/// the real implementation; tests substitute closed-form stubs.
pub trait CrossModel<T: Real> {
    /// `E_{a->b}`
    fn encode_ab(&self, tape: &mut Tape<T>, x: Var) -> Result<Var>;
    /// `E_{b->a}`
    fn encode_ba(&self, tape: &mut Tape<T>, x: Var) -> Result<Var>;
    /// `D_a`
    fn decode_a(&self, tape: &mut Tape<T>, z: Var) -> Result<Var>;
    /// `D_b`
    fn decode_b(&self, tape: &mut Tape<T>, z: Var) -> Result<Var>;
    /// `T_{a->b}`
    fn cross_ab(&self, tape: &mut Tape<T>, z: Var) -> Result<Var>;
    /// `T_{b->a}`
    fn cross_ba(&self, tape: &mut Tape<T>, z: Var) -> Result<Var>;
    /// `Q_a`
    fn critic_a(&self, tape: &mut Tape<T>, x: Var) -> Result<Var>;
    /// `Q_b`
    fn critic_b(&self, tape: &mut Tape<T>, x: Var) -> Result<Var>;

    /// `D_b(E_ab(x_a))`
    fn translate_ab(&self, tape: &mut Tape<T>, x_a: Var) -> Result<LatentPath> {
        let z = self.encode_ab(tape, x_a)?;
        let image = self.decode_b(tape, z)?;
        Ok(LatentPath::direct(z, image))
    }

    /// `D_a(E_ba(x_b))`
    fn translate_ba(&self, tape: &mut Tape<T>, x_b: Var) -> Result<LatentPath> {
        let z = self.encode_ba(tape, x_b)?;
        let image = self.decode_a(tape, z)?;
        Ok(LatentPath::direct(z, image))
    }

    /// `D_a(T_ba(E_ab(x_a)))`
    fn cross_identity_a(&self, tape: &mut Tape<T>, x_a: Var) -> Result<LatentPath> {
        let z = self.encode_ab(tape, x_a)?;
        let crossed = self.cross_ba(tape, z)?;
        let image = self.decode_a(tape, crossed)?;
        Ok(LatentPath {
            latent: z,
            crossed: Some(crossed),
            image,
        })
    }

    /// `D_b(T_ab(E_ba(x_b)))`
    fn cross_identity_b(&self, tape: &mut Tape<T>, x_b: Var) -> Result<LatentPath> {
        let z = self.encode_ba(tape, x_b)?;
        let crossed = self.cross_ab(tape, z)?;
        let image = self.decode_b(tape, crossed)?;
        Ok(LatentPath {
            latent: z,
            crossed: Some(crossed),
            image,
        })
    }

    /// `D_a(E_ba(x_a))`: an A image through the B->A generator.
    fn plain_identity_a(&self, tape: &mut Tape<T>, x_a: Var) -> Result<LatentPath> {
        let z = self.encode_ba(tape, x_a)?;
        let image = self.decode_a(tape, z)?;
        Ok(LatentPath::direct(z, image))
    }

    /// `D_b(E_ab(x_b))`
    fn plain_identity_b(&self, tape: &mut Tape<T>, x_b: Var) -> Result<LatentPath> {
        let z = self.encode_ab(tape, x_b)?;
        let image = self.decode_b(tape, z)?;
        Ok(LatentPath::direct(z, image))
    }
}

/// Output of a forward path with its intermediate latent codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentPath {
    /// The encoder output.
    pub latent: Var,
    /// The cross-translated latent, on paths that pass a translator.
    pub crossed: Option<Var>,
    pub image: Var,
}

impl LatentPath {
    fn direct(latent: Var, image: Var) -> Self {
        LatentPath {
            latent,
            crossed: None,
            image,
        }
    }
}

/// All parameters plus the network structures that index into them.
/// Translators and critics are optional: translation at inference time
/// needs only the encoders and decoders.
#[derive(Clone, Debug)]
pub struct ModelBundle<T> {
    config: NetConfig,
    store: ParamStore<T>,
    e_ab: Encoder,
    e_ba: Encoder,
    d_a: Decoder,
    d_b: Decoder,
    t_ab: Option<Translator>,
    t_ba: Option<Translator>,
    q_a: Option<Discriminator>,
    q_b: Option<Discriminator>,
}

impl<T: Real> ModelBundle<T> {
    /// All eight networks, initialized deterministically from `seed`.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        Self::build(config, seed, true)
    }

    /// Encoders and decoders only.
    pub fn generators_only(config: NetConfig, seed: u64) -> Result<Self> {
        Self::build(config, seed, false)
    }

    fn build(config: NetConfig, seed: u64, full: bool) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        macro_rules! builder {
            ($id:expr) => {
                Builder::new(&mut store, &mut rng, $id.prefix())
            };
        }
        let e_ab = Encoder::build(&config, builder!(NetworkId::EncoderAb))?;
        let e_ba = Encoder::build(&config, builder!(NetworkId::EncoderBa))?;
        let d_a = Decoder::build(&config, builder!(NetworkId::DecoderA))?;
        let d_b = Decoder::build(&config, builder!(NetworkId::DecoderB))?;
        let (t_ab, t_ba, q_a, q_b) = if full {
            (
                Some(Translator::build(&config, builder!(NetworkId::TranslatorAb))?),
                Some(Translator::build(&config, builder!(NetworkId::TranslatorBa))?),
                Some(Discriminator::build(&config, builder!(NetworkId::CriticA))?),
                Some(Discriminator::build(&config, builder!(NetworkId::CriticB))?),
            )
        } else {
            (None, None, None, None)
        };
        Ok(ModelBundle {
            config,
            store,
            e_ab,
            e_ba,
            d_a,
            d_b,
            t_ab,
            t_ba,
            q_a,
            q_b,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn has_network(&self, id: NetworkId) -> bool {
        self.network_params(id).is_some()
    }

    pub fn network_params(&self, id: NetworkId) -> Option<&[ParamId]> {
        match id {
            NetworkId::EncoderAb => Some(self.e_ab.params()),
            NetworkId::EncoderBa => Some(self.e_ba.params()),
            NetworkId::DecoderA => Some(self.d_a.params()),
            NetworkId::DecoderB => Some(self.d_b.params()),
            NetworkId::TranslatorAb => self.t_ab.as_ref().map(|t| t.params()),
            NetworkId::TranslatorBa => self.t_ba.as_ref().map(|t| t.params()),
            NetworkId::CriticA => self.q_a.as_ref().map(|q| q.params()),
            NetworkId::CriticB => self.q_b.as_ref().map(|q| q.params()),
        }
    }

    /// Encoder, decoder and translator parameters.
    pub fn generator_params(&self) -> Vec<ParamId> {
        self.collect(|id| id.is_generator_side())
    }

    pub fn critic_params(&self) -> Vec<ParamId> {
        self.collect(|id| !id.is_generator_side())
    }

    fn collect(&self, pick: impl Fn(NetworkId) -> bool) -> Vec<ParamId> {
        NetworkId::ALL
            .into_iter()
            .filter(|&id| pick(id))
            .filter_map(|id| self.network_params(id))
            .flatten()
            .copied()
            .collect()
    }

    pub fn translator(&self, id: NetworkId) -> Option<&Translator> {
        match id {
            NetworkId::TranslatorAb => self.t_ab.as_ref(),
            NetworkId::TranslatorBa => self.t_ba.as_ref(),
            _ => None,
        }
    }

    pub fn param_count(&self, id: NetworkId) -> Option<usize> {
        self.network_params(id)
            .map(|ids| ids.iter().map(|&p| self.store.get(p).value.len()).sum())
    }

    /// `(name, tensor)` for every parameter, in construction order.
    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.store.iter().map(|p| (p.name.as_str(), &p.value))
    }

    /// Overwrites every parameter of this bundle from `(name, tensor)`
    /// entries. Entries for networks this bundle lacks are skipped; any
    /// missing name or shape difference fails with the first offending
    /// parameter in bundle order.
    pub fn load_named<'a, U, I>(&mut self, entries: I) -> Result<()>
    where
        U: Real + 'a,
        I: IntoIterator<Item = (&'a str, &'a Tensor<U>)>,
    {
        let entries: Vec<(&str, &Tensor<U>)> = entries.into_iter().collect();
        let mut staged = Vec::with_capacity(self.store.len());
        for p in self.store.iter() {
            let Some((_, t)) = entries.iter().find(|(n, _)| *n == p.name) else {
                return Err(Error::ParameterMismatch {
                    name: p.name.clone(),
                    detail: String::from("missing from source"),
                });
            };
            if t.shape() != p.value.shape() {
                return Err(Error::ParameterMismatch {
                    name: p.name.clone(),
                    detail: format!("expected shape {:?}, found {:?}", p.value.shape(), t.shape()),
                });
            }
            staged.push(t.cast::<T>());
        }
        for (id, t) in self.store.ids().collect::<Vec<_>>().into_iter().zip(staged) {
            self.store.get_mut(id).value = t;
        }
        Ok(())
    }

    /// Same architecture and weights in another precision.
    pub fn cast<U: Real>(&self) -> ModelBundle<U> {
        let mut store = ParamStore::new();
        for p in self.store.iter() {
            store
                .add(p.name.clone(), p.value.cast())
                .expect("names already unique");
        }
        ModelBundle {
            config: self.config,
            store,
            e_ab: self.e_ab.clone(),
            e_ba: self.e_ba.clone(),
            d_a: self.d_a.clone(),
            d_b: self.d_b.clone(),
            t_ab: self.t_ab.clone(),
            t_ba: self.t_ba.clone(),
            q_a: self.q_a.clone(),
            q_b: self.q_b.clone(),
        }
    }
}

fn require<N>(net: &Option<N>, id: NetworkId) -> Result<&N> {
    net.as_ref().ok_or(Error::MissingNetwork(id.prefix()))
}

impl<T: Real> CrossModel<T> for ModelBundle<T> {
    fn encode_ab(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        self.e_ab.forward(tape, &self.store, x)
    }

    fn encode_ba(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        self.e_ba.forward(tape, &self.store, x)
    }

    fn decode_a(&self, tape: &mut Tape<T>, z: Var) -> Result<Var> {
        self.d_a.forward(tape, &self.store, z)
    }

    fn decode_b(&self, tape: &mut Tape<T>, z: Var) -> Result<Var> {
        self.d_b.forward(tape, &self.store, z)
    }

    fn cross_ab(&self, tape: &mut Tape<T>, z: Var) -> Result<Var> {
        require(&self.t_ab, NetworkId::TranslatorAb)?.forward(tape, &self.store, z)
    }

    fn cross_ba(&self, tape: &mut Tape<T>, z: Var) -> Result<Var> {
        require(&self.t_ba, NetworkId::TranslatorBa)?.forward(tape, &self.store, z)
    }

    fn critic_a(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        require(&self.q_a, NetworkId::CriticA)?.forward(tape, &self.store, x)
    }

    fn critic_b(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        require(&self.q_b, NetworkId::CriticB)?.forward(tape, &self.store, x)
    }
}
