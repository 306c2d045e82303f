//! Generator and discriminator definitions plus tape-recorded forward
//! passes, including the frozen feature extractor replayed on the tape so
//! the pseudo feature loss can backpropagate into the generator.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::features::{ConvLayer, Extractor, Tap};
use crate::tensor::{chw, Real, Tensor};

use super::tape::{Tape, Var};
use super::TrainError;

fn init_conv(out_c: usize, in_c: usize, scale: Real, rng: &mut ChaCha8Rng) -> ConvLayer {
    let fan_in = (in_c * 9) as Real;
    let bound = scale * (2.0 / fan_in).sqrt();
    let n = out_c * in_c * 9;
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    ConvLayer {
        weight: Tensor::new(&[out_c, in_c, 3, 3], data).expect("conv shape"),
        bias: vec![0.0; out_c],
    }
}

/// Residual generator: stem conv 3->F, B residual blocks, a long skip from
/// the stem output to the last block output, head conv F->1, sigmoid.
#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub stem: ConvLayer,
    pub blocks: Vec<(ConvLayer, ConvLayer)>,
    pub head: ConvLayer,
}

impl GeneratorNet {
    pub fn new(features: usize, blocks: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem = init_conv(features, 3, 1.0, &mut rng);
        let blocks = (0..blocks)
            .map(|_| {
                (
                    init_conv(features, features, 1.0, &mut rng),
                    init_conv(features, features, 1.0, &mut rng),
                )
            })
            .collect();
        // small head keeps the initial output near mid-gray
        let head = init_conv(1, features, 0.1, &mut rng);
        Self { stem, blocks, head }
    }

    pub fn feature_width(&self) -> usize {
        self.stem.weight.shape()[0]
    }

    /// Layers in canonical parameter order.
    pub fn layers(&self) -> Vec<&ConvLayer> {
        let mut out = vec![&self.stem];
        for (a, b) in &self.blocks {
            out.push(a);
            out.push(b);
        }
        out.push(&self.head);
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        let mut out = vec![&mut self.stem];
        for (a, b) in &mut self.blocks {
            out.push(a);
            out.push(b);
        }
        out.push(&mut self.head);
        out
    }

    /// Rebuilds a generator from a canonical-order layer list.
    pub fn from_layers(mut layers: Vec<ConvLayer>) -> Result<Self, TrainError> {
        if layers.len() < 2 || layers.len() % 2 != 0 {
            return Err(TrainError::BadLayerCount(layers.len()));
        }
        let head = layers.pop().expect("nonempty");
        let stem = layers.remove(0);
        let mut blocks = Vec::new();
        let mut it = layers.into_iter();
        while let (Some(a), Some(b)) = (it.next(), it.next()) {
            blocks.push((a, b));
        }
        Ok(Self { stem, blocks, head })
    }

    /// Registers all parameters as tape leaves in canonical order
    /// (weight, bias per layer).
    pub fn register_params(&self, tape: &mut Tape) -> Vec<Var> {
        register_layers(tape, &self.layers())
    }

    /// Records the forward pass against already-registered parameters so
    /// one tape can run several batch images over shared leaves.
    pub fn forward_registered(
        &self,
        tape: &mut Tape,
        params: &[Var],
        photo: &Tensor,
    ) -> Result<Var, TrainError> {
        let (c, _, _) = chw(photo);
        let input = match c {
            3 => tape.leaf(photo.clone()),
            1 => {
                let gray = tape.leaf(photo.clone());
                tape.replicate_gray(gray)
            }
            other => return Err(TrainError::BadChannels(other)),
        };
        let mut it = params.iter().copied();
        let mut next = || (it.next().expect("param var"), it.next().expect("param var"));

        let (sw, sb) = next();
        let stem_out = tape.conv2d(input, sw, Some(sb), 1, 1)?;
        // finite checks run on raw conv outputs: relu would silently map
        // NaN to zero
        check_finite(tape, stem_out, "stem")?;
        let stem_act = tape.relu(stem_out);

        let mut h = stem_act;
        for i in 0..self.blocks.len() {
            let (w1, b1) = next();
            let (w2, b2) = next();
            let t = tape.conv2d(h, w1, Some(b1), 1, 1)?;
            check_finite(tape, t, &format!("block{i}.conv1"))?;
            let t = tape.relu(t);
            let t = tape.conv2d(t, w2, Some(b2), 1, 1)?;
            h = tape.add(h, t);
            if !tape.value(h).all_finite() {
                return Err(TrainError::NonFiniteActivation(format!("block{i}")));
            }
        }
        h = tape.add(h, stem_act);

        let (hw, hb) = next();
        let raw = tape.conv2d(h, hw, Some(hb), 1, 1)?;
        check_finite(tape, raw, "head")?;
        Ok(tape.sigmoid(raw))
    }

    /// Convenience: register and run in one call.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        photo: &Tensor,
    ) -> Result<(Var, Vec<Var>), TrainError> {
        let params = self.register_params(tape);
        let out = self.forward_registered(tape, &params, photo)?;
        Ok((out, params))
    }

    /// Inference forward pass.
    pub fn forward(&self, photo: &Tensor) -> Result<Tensor, TrainError> {
        let mut tape = Tape::new();
        let (out, _) = self.forward_on_tape(&mut tape, photo)?;
        Ok(tape.value(out).clone())
    }
}

fn register_layers(tape: &mut Tape, layers: &[&ConvLayer]) -> Vec<Var> {
    let mut out = Vec::with_capacity(layers.len() * 2);
    for layer in layers {
        out.push(tape.leaf(layer.weight.clone()));
        out.push(tape.leaf(
            Tensor::new(&[layer.bias.len()], layer.bias.clone()).expect("bias shape"),
        ));
    }
    out
}

fn check_finite(tape: &Tape, v: Var, layer: &str) -> Result<(), TrainError> {
    if tape.value(v).all_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFiniteActivation(layer.to_string()))
    }
}

/// Patch discriminator: strided 3x3 convs with leaky-relu 0.2, final
/// 1-channel raw score map.
#[derive(Debug, Clone)]
pub struct DiscriminatorNet {
    pub layers: Vec<ConvLayer>,
}

impl DiscriminatorNet {
    pub fn new(widths: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_c = 1;
        for &w in widths {
            layers.push(init_conv(w, in_c, 1.0, &mut rng));
            in_c = w;
        }
        layers.push(init_conv(1, in_c, 1.0, &mut rng));
        Self { layers }
    }

    pub fn layers(&self) -> Vec<&ConvLayer> {
        self.layers.iter().collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        self.layers.iter_mut().collect()
    }

    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self, TrainError> {
        if layers.is_empty() {
            return Err(TrainError::BadLayerCount(0));
        }
        Ok(Self { layers })
    }

    pub fn register_params(&self, tape: &mut Tape) -> Vec<Var> {
        register_layers(tape, &self.layers())
    }

    /// Records D(sketch) against already-registered parameters; `sketch`
    /// must be a single-channel var. Returns the raw score map var.
    pub fn forward_registered(
        &self,
        tape: &mut Tape,
        params: &[Var],
        sketch: Var,
    ) -> Result<Var, TrainError> {
        let mut h = sketch;
        let last = self.layers.len() - 1;
        for i in 0..self.layers.len() {
            let (w, b) = (params[2 * i], params[2 * i + 1]);
            let stride = if i == last { 1 } else { 2 };
            h = tape.conv2d(h, w, Some(b), 1, stride)?;
            if i != last {
                h = tape.leaky_relu(h, 0.2);
            }
        }
        Ok(h)
    }

    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        sketch: Var,
    ) -> Result<(Var, Vec<Var>), TrainError> {
        let params = self.register_params(tape);
        let out = self.forward_registered(tape, &params, sketch)?;
        Ok((out, params))
    }

    pub fn score(&self, sketch: &Tensor) -> Result<Tensor, TrainError> {
        let mut tape = Tape::new();
        let input = tape.leaf(sketch.clone());
        let (out, _) = self.forward_on_tape(&mut tape, input)?;
        Ok(tape.value(out).clone())
    }
}

/// Replays the frozen extractor on the tape so gradients flow from feature
/// taps back to the generator output. Mirrors `Extractor::extract` exactly.
pub fn extract_on_tape(
    tape: &mut Tape,
    extractor: &Extractor,
    image: Var,
    taps: &[Tap],
) -> Result<BTreeMap<Tap, Var>, TrainError> {
    let (c, h, w) = chw(tape.value(image));
    if h < 32 || w < 32 {
        return Err(TrainError::ImageTooSmall { h, w });
    }
    let rgb = match c {
        3 => image,
        1 => tape.replicate_gray(image),
        other => return Err(TrainError::BadChannels(other)),
    };
    let input = match &extractor.norm {
        Some(n) => tape.normalize(rgb, n.mean, n.std),
        None => rgb,
    };
    let deepest = taps.iter().map(|t| t.0).max().unwrap_or(0);
    let mut maps = BTreeMap::new();
    let mut cur = input;
    let mut conv_idx = 0usize;
    for (block, &(convs, _)) in extractor.spec.blocks.iter().enumerate() {
        let l = block as u8 + 1;
        if l > deepest {
            break;
        }
        if block > 0 {
            cur = tape.max_pool2(cur);
        }
        for ci in 0..convs {
            let layer = &extractor.convs[conv_idx];
            let wv = tape.leaf(layer.weight.clone());
            let bv = tape.leaf(
                Tensor::new(&[layer.bias.len()], layer.bias.clone()).expect("bias shape"),
            );
            let conv = tape.conv2d(cur, wv, Some(bv), 1, 1)?;
            cur = tape.relu(conv);
            conv_idx += 1;
            if ci == 0 && taps.contains(&Tap(l)) {
                maps.insert(Tap(l), cur);
            }
            if ci == 0 && l == deepest {
                break;
            }
        }
        conv_idx = extractor.spec.blocks[..=block].iter().map(|&(c, _)| c).sum();
    }
    Ok(maps)
}
