use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rand::Rng;

use crate::{Error, Result, Scalar};

const CHECKPOINT_MAGIC: &str = "sagin-densenet";
const CHECKPOINT_VERSION: u32 = 1;

/// Fully connected network with ReLU hidden layers and a linear output layer.
///
/// Parameters live in one flat vector; layer `l` stores its weights
/// (row-major, `out x in`) followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<S> {
    widths: Vec<usize>,
    params: Vec<S>,
}

/// Layer widths used by the Q-networks: input, 64, 32, 32, actions.
pub fn q_network_widths(inputs: usize, actions: usize) -> Vec<usize> {
    vec![inputs, 64, 32, 32, actions]
}

#[derive(Clone, Copy, Debug)]
struct LayerView {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

impl<S: Scalar> DenseNet<S> {
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid(format!("invalid layer widths {widths:?}")));
        }
        let count = widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        Ok(DenseNet { widths: widths.to_vec(), params: vec![S::zero(); count] })
    }

    /// He-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for l in net.layers() {
            let limit = (6.0 / l.inputs as f64).sqrt();
            for p in &mut net.params[l.w..l.w + l.inputs * l.outputs] {
                *p = S::of(rng.gen_range(-limit..limit));
            }
        }
        Ok(net)
    }

    fn layers(&self) -> Vec<LayerView> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|p| {
                let v = LayerView { w: off, b: off + p[0] * p[1], inputs: p[0], outputs: p[1] };
                off += p[0] * p[1] + p[1];
                v
            })
            .collect()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_len(&self) -> usize {
        self.widths[0]
    }

    pub fn output_len(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Activations of every layer, input first; hidden entries are post-ReLU.
    pub fn forward_trace(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension { expected: self.input_len(), got: x.len() });
        }
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_vec());
        for (li, l) in layers.iter().enumerate() {
            let input = &acts[li];
            let mut out = Vec::with_capacity(l.outputs);
            for o in 0..l.outputs {
                let row = &self.params[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
                let mut z = self.params[l.b + o];
                for (w, a) in row.iter().zip(input) {
                    z += *w * *a;
                }
                out.push(if li < last { z.max(S::zero()) } else { z });
            }
            acts.push(out);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.forward_trace(x)?.pop().expect("trace holds the output"))
    }

    /// Accumulates into `grad` the parameter gradient of `grad_out . output`.
    pub fn backward(&self, acts: &[Vec<S>], grad_out: &[S], grad: &mut [S]) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::Dimension { expected: self.params.len(), got: grad.len() });
        }
        if grad_out.len() != self.output_len() {
            return Err(Error::Dimension { expected: self.output_len(), got: grad_out.len() });
        }
        let layers = self.layers();
        let mut delta = grad_out.to_vec();
        for (li, l) in layers.iter().enumerate().rev() {
            let input = &acts[li];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == S::zero() {
                    continue;
                }
                grad[l.b + o] += d;
                let row = &mut grad[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * *a;
                }
            }
            if li > 0 {
                let mut prev = vec![S::zero(); l.inputs];
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == S::zero() {
                        continue;
                    }
                    let row = &self.params[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += *w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= S::zero() {
                        *p = S::zero();
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Gradient of `grad_out . forward(x)` with respect to the parameters.
    pub fn gradient(&self, x: &[S], grad_out: &[S]) -> Result<Vec<S>> {
        let acts = self.forward_trace(x)?;
        let mut g = vec![S::zero(); self.params.len()];
        self.backward(&acts, grad_out, &mut g)?;
        Ok(g)
    }

    /// Hash of the exact parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.widths.hash(&mut h);
        for p in &self.params {
            p.as_f64().to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Text checkpoint: header, widths, then one parameter per line.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        let widths: Vec<String> = self.widths.iter().map(ToString::to_string).collect();
        writeln!(w, "widths {}", widths.join(" "))?;
        for p in &self.params {
            writeln!(w, "{}", p.as_f64())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("not a network checkpoint"));
        }
        let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let widths_line = lines.next().ok_or_else(|| bad("missing widths"))??;
        let widths: Vec<usize> = widths_line
            .strip_prefix("widths ")
            .ok_or_else(|| bad("missing widths"))?
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| bad("bad width")))
            .collect::<Result<_>>()?;
        let mut net = Self::zeros(&widths)?;
        let mut i = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if i >= net.params.len() {
                return Err(bad("too many parameters"));
            }
            let v: f64 = line.trim().parse().map_err(|_| bad("bad parameter"))?;
            net.params[i] = S::of(v);
            i += 1;
        }
        if i != net.params.len() {
            return Err(Error::Checkpoint(format!("expected {} parameters, found {i}", net.params.len())));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::<f64>::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mut net = DenseNet::<f64>::zeros(&[3, 3]).unwrap();
        for i in 0..3 {
            net.params_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.5, -1.0, 2.0]).unwrap(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = DenseNet::<f64>::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::<f64>::new(&[5, 8, 3], &mut rng).unwrap();
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        let back = DenseNet::<f64>::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let net32 = DenseNet::<f32>::new(&[5, 8, 3], &mut rng).unwrap();
        let mut buf = Vec::new();
        net32.write_checkpoint(&mut buf).unwrap();
        assert_eq!(DenseNet::<f32>::read_checkpoint(buf.as_slice()).unwrap(), net32);
        assert!(DenseNet::<f64>::read_checkpoint(&b"garbage\n"[..]).is_err());
    }
}
