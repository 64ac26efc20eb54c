//! Latent cross-consistency losses and the least-squares adversarial terms.
//!
//! All L1 terms are means over elements, so the weights do not depend on
//! image resolution.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::CrossModel;
use crate::scalar::Real;
use crate::tape::{Tape, Var};

/// Weights of the five generator-side terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub gan: f64,
    pub id: f64,
    pub ctc: f64,
    pub zid: f64,
    pub zcyc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gan: 1.0,
            id: 3.0,
            ctc: 3.0,
            zid: 6.0,
            zcyc: 6.0,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        gan: 0.0,
        id: 0.0,
        ctc: 0.0,
        zid: 0.0,
        zcyc: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, w) in self.named() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("gan", self.gan),
            ("id", self.id),
            ("ctc", self.ctc),
            ("zid", self.zid),
            ("zcyc", self.zcyc),
        ]
    }
}

/// Which terms are evaluated at all. A disabled term is neither computed
/// nor reported; with `gan` disabled the discriminators are not trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossTerms {
    pub gan: bool,
    pub id: bool,
    pub ctc: bool,
    pub zid: bool,
    pub zcyc: bool,
}

impl Default for LossTerms {
    fn default() -> Self {
        Self::ALL
    }
}

impl LossTerms {
    pub const ALL: LossTerms = LossTerms {
        gan: true,
        id: true,
        ctc: true,
        zid: true,
        zcyc: true,
    };

    pub const NONE: LossTerms = LossTerms {
        gan: false,
        id: false,
        ctc: false,
        zid: false,
        zcyc: false,
    };

    /// Parses `gan+id+ctc`, `full`/`all` or `none`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        match spec {
            "full" | "all" => return Ok(Self::ALL),
            "none" | "" => return Ok(Self::NONE),
            _ => {}
        }
        let mut terms = Self::NONE;
        for token in spec.split('+') {
            match token.trim().to_ascii_lowercase().as_str() {
                "gan" => terms.gan = true,
                "id" => terms.id = true,
                "ctc" => terms.ctc = true,
                "zid" => terms.zid = true,
                "zcyc" => terms.zcyc = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown loss term `{other}` (expected gan, id, ctc, zid, zcyc, full or none)"
                    )))
                }
            }
        }
        Ok(terms)
    }

    /// Canonical `+`-joined form, `none` when empty.
    pub fn label(&self) -> alloc::string::String {
        let names: Vec<&str> = [
            (self.gan, "gan"),
            (self.id, "id"),
            (self.ctc, "ctc"),
            (self.zid, "zid"),
            (self.zcyc, "zcyc"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if names.is_empty() {
            "none".into()
        } else {
            names.join("+")
        }
    }
}

/// Per-term values of one step. Disabled terms read zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub gan_g: f64,
    pub gan_d: f64,
    pub id: f64,
    pub ctc: f64,
    pub zid: f64,
    pub zcyc: f64,
    /// Weighted generator objective.
    pub total: f64,
}

impl LossReport {
    /// Dot product of weights with the generator-side term values.
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.gan * self.gan_g + w.id * self.id + w.ctc * self.ctc + w.zid * self.zid + w.zcyc * self.zcyc
    }

    pub fn terms(&self) -> [(&'static str, f64); 6] {
        [
            ("gan_g", self.gan_g),
            ("gan_d", self.gan_d),
            ("id", self.id),
            ("ctc", self.ctc),
            ("zid", self.zid),
            ("zcyc", self.zcyc),
        ]
    }
}

/// `|D_a(T_ba(E_ab(x_a))) - x_a| + |D_b(T_ab(E_ba(x_b))) - x_b|`
pub fn loss_zid<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    x_a: Var,
    x_b: Var,
) -> Result<Var> {
    let a = model.cross_identity_a(tape, x_a)?;
    let b = model.cross_identity_b(tape, x_b)?;
    pair_l1(tape, (a.image, x_a), (b.image, x_b))
}

/// `|D_a(E_ba(x_a)) - x_a| + |D_b(E_ab(x_b)) - x_b|`
pub fn loss_id<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    x_a: Var,
    x_b: Var,
) -> Result<Var> {
    let a = model.plain_identity_a(tape, x_a)?;
    let b = model.plain_identity_b(tape, x_b)?;
    pair_l1(tape, (a.image, x_a), (b.image, x_b))
}

/// `|T_ab(E_ba(x_a)) - E_ab(x_a)| + |T_ba(E_ab(x_b)) - E_ba(x_b)|`, in
/// latent space.
pub fn loss_ctc<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    x_a: Var,
    x_b: Var,
) -> Result<Var> {
    let z_ba_a = model.encode_ba(tape, x_a)?;
    let z_ab_a = model.encode_ab(tape, x_a)?;
    let z_ab_b = model.encode_ab(tape, x_b)?;
    let z_ba_b = model.encode_ba(tape, x_b)?;
    ctc_from_latents(model, tape, z_ab_a, z_ba_a, z_ab_b, z_ba_b)
}

fn ctc_from_latents<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    z_ab_a: Var,
    z_ba_a: Var,
    z_ab_b: Var,
    z_ba_b: Var,
) -> Result<Var> {
    let crossed_a = model.cross_ab(tape, z_ba_a)?;
    let crossed_b = model.cross_ba(tape, z_ab_b)?;
    pair_l1(tape, (crossed_a, z_ab_a), (crossed_b, z_ba_b))
}

/// `|T_ab(T_ba(z_b)) - z_b| + |T_ba(T_ab(z_a)) - z_a|`, where the caller
/// binds `z_b = E_ab(x_a)` and `z_a = E_ba(x_b)`.
pub fn loss_zcyc<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    z_a: Var,
    z_b: Var,
) -> Result<Var> {
    let to_a = model.cross_ba(tape, z_b)?;
    let to_b = model.cross_ab(tape, z_a)?;
    zcyc_from_crossed(model, tape, z_a, z_b, to_a, to_b)
}

fn zcyc_from_crossed<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    z_a: Var,
    z_b: Var,
    ba_of_zb: Var,
    ab_of_za: Var,
) -> Result<Var> {
    let back_b = model.cross_ab(tape, ba_of_zb)?;
    let back_a = model.cross_ba(tape, ab_of_za)?;
    pair_l1(tape, (back_b, z_b), (back_a, z_a))
}

/// Least-squares generator term: critic scores of fakes pulled towards 1.
pub fn loss_gan_generator<T: Real>(tape: &mut Tape<T>, fake_scores: Var) -> Var {
    tape.sq_mean(fake_scores, T::one())
}

/// `½·[mean((Q(real) - 1)²) + mean(Q(fake)²)]` with `fake` detached from
/// whatever produced it.
pub fn loss_gan_discriminator<T: Real>(
    tape: &mut Tape<T>,
    critic: impl Fn(&mut Tape<T>, Var) -> Result<Var>,
    real: Var,
    fake: Var,
) -> Result<Var> {
    let fake = tape.detach(fake);
    let real_scores = critic(tape, real)?;
    let fake_scores = critic(tape, fake)?;
    let r = tape.sq_mean(real_scores, T::one());
    let f = tape.sq_mean(fake_scores, T::zero());
    let sum = tape.add(r, f)?;
    Ok(tape.scale(sum, T::from_f64(0.5)))
}

fn pair_l1<T: Real>(tape: &mut Tape<T>, first: (Var, Var), second: (Var, Var)) -> Result<Var> {
    let l1 = tape.l1_mean(first.0, first.1)?;
    let l2 = tape.l1_mean(second.0, second.1)?;
    tape.add(l1, l2)
}

/// Result of the generator-side forward pass.
#[derive(Clone, Debug)]
pub struct GeneratorPass {
    /// Weighted objective; a constant when nothing is trainable.
    pub total: Var,
    pub report: LossReport,
    /// `D_a(E_ba(x_b))` and `D_b(E_ab(x_a))`, present when the GAN term is on.
    pub fake_a: Option<Var>,
    pub fake_b: Option<Var>,
}

/// Weighted sum of the enabled generator-side terms.
///
/// Each of `E_ab(x_a)`, `E_ba(x_b)`, `E_ab(x_b)`, `E_ba(x_a)` and
/// `T_ba(E_ab(x_a))`, `T_ab(E_ba(x_b))` is evaluated at most once and shared
/// between the terms that use it. Terms with zero weight are still
/// evaluated for the report but contribute nothing to the gradient.
pub fn total_generator_loss<T: Real, M: CrossModel<T> + ?Sized>(
    model: &M,
    tape: &mut Tape<T>,
    x_a: Var,
    x_b: Var,
    weights: &LossWeights,
    terms: &LossTerms,
) -> Result<GeneratorPass> {
    weights.validate()?;
    let mut report = LossReport::default();
    let mut weighted: Vec<Var> = Vec::new();

    // E_ab(x_a) is z_b and E_ba(x_b) is z_a on the translation paths
    let needs_zb = terms.gan || terms.ctc || terms.zid || terms.zcyc;
    let z_b = if needs_zb { Some(model.encode_ab(tape, x_a)?) } else { None };
    let z_a = if needs_zb { Some(model.encode_ba(tape, x_b)?) } else { None };
    let (z_ba_a, z_ab_b) = if terms.id || terms.ctc {
        (Some(model.encode_ba(tape, x_a)?), Some(model.encode_ab(tape, x_b)?))
    } else {
        (None, None)
    };
    let (zb_to_a, za_to_b) = if terms.zid || terms.zcyc {
        let zb = z_b.expect("computed above");
        let za = z_a.expect("computed above");
        (Some(model.cross_ba(tape, zb)?), Some(model.cross_ab(tape, za)?))
    } else {
        (None, None)
    };

    let mut add_term = |tape: &mut Tape<T>, value: Var, weight: f64, slot: &mut f64| {
        *slot = tape.scalar_value(value).to_f64();
        if weight > 0.0 {
            weighted.push(tape.scale(value, T::from_f64(weight)));
        }
    };

    let (mut fake_a, mut fake_b) = (None, None);
    if terms.gan {
        let fb = model.decode_b(tape, z_b.expect("computed above"))?;
        let fa = model.decode_a(tape, z_a.expect("computed above"))?;
        let sb = model.critic_b(tape, fb)?;
        let sa = model.critic_a(tape, fa)?;
        let gb = loss_gan_generator(tape, sb);
        let ga = loss_gan_generator(tape, sa);
        let g = tape.add(gb, ga)?;
        add_term(tape, g, weights.gan, &mut report.gan_g);
        fake_a = Some(fa);
        fake_b = Some(fb);
    }
    if terms.id {
        let ia = model.decode_a(tape, z_ba_a.expect("computed above"))?;
        let ib = model.decode_b(tape, z_ab_b.expect("computed above"))?;
        let v = pair_l1(tape, (ia, x_a), (ib, x_b))?;
        add_term(tape, v, weights.id, &mut report.id);
    }
    if terms.ctc {
        let v = ctc_from_latents(
            model,
            tape,
            z_b.expect("computed above"),
            z_ba_a.expect("computed above"),
            z_ab_b.expect("computed above"),
            z_a.expect("computed above"),
        )?;
        add_term(tape, v, weights.ctc, &mut report.ctc);
    }
    if terms.zid {
        let ra = model.decode_a(tape, zb_to_a.expect("computed above"))?;
        let rb = model.decode_b(tape, za_to_b.expect("computed above"))?;
        let v = pair_l1(tape, (ra, x_a), (rb, x_b))?;
        add_term(tape, v, weights.zid, &mut report.zid);
    }
    if terms.zcyc {
        let v = zcyc_from_crossed(
            model,
            tape,
            z_a.expect("computed above"),
            z_b.expect("computed above"),
            zb_to_a.expect("computed above"),
            za_to_b.expect("computed above"),
        )?;
        add_term(tape, v, weights.zcyc, &mut report.zcyc);
    }

    let total = match weighted.split_first() {
        None => tape.constant(crate::tensor::Tensor::scalar(T::zero())),
        Some((&first, rest)) => {
            let mut acc = first;
            for &v in rest {
                acc = tape.add(acc, v)?;
            }
            acc
        }
    };
    report.total = report.weighted_total(weights);
    Ok(GeneratorPass {
        total,
        report,
        fake_a,
        fake_b,
    })
}
