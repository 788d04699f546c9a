//! Layers with explicit forward and reverse-mode passes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Valid (unpadded) 1-D cross-correlation. Weights are `(out, in, kernel)`
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    /// He-normal initialised weights, zero bias.
    pub fn new<R: Rng>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let std = (2.0 / (in_ch * kernel) as f64).sqrt();
        let weights = (0..out_ch * in_ch * kernel)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            weights,
            bias: vec![0.0; out_ch],
        }
    }

    fn out_len(&self, len: usize) -> Option<usize> {
        if self.stride == 0 || self.kernel == 0 || len < self.kernel {
            None
        } else {
            Some((len - self.kernel) / self.stride + 1)
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (len, k, s) = (x.cols, self.kernel, self.stride);
        let ol = (len - k) / s + 1;
        let mut out = Tensor::zeros(self.out_ch, ol);
        for o in 0..self.out_ch {
            let row = &mut out.data[o * ol..(o + 1) * ol];
            row.fill(self.bias[o]);
            for c in 0..self.in_ch {
                let xr = x.channel(c);
                let wr = &self.weights[(o * self.in_ch + c) * k..(o * self.in_ch + c + 1) * k];
                for (j, &w) in wr.iter().enumerate() {
                    if s == 1 {
                        for (y, &xv) in row.iter_mut().zip(&xr[j..j + ol]) {
                            *y += w * xv;
                        }
                    } else {
                        for (t, y) in row.iter_mut().enumerate() {
                            *y += w * xr[t * s + j];
                        }
                    }
                }
            }
        }
        out
    }

    fn backward(
        &self,
        x: &Tensor,
        g: &Tensor,
        need_input: bool,
    ) -> (Vec<f64>, Vec<f64>, Option<Tensor>) {
        let (k, s, ol) = (self.kernel, self.stride, g.cols);
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.out_ch];
        let mut gx = need_input.then(|| Tensor::zeros(x.rows, x.cols));
        for o in 0..self.out_ch {
            let gr = g.channel(o);
            gb[o] = gr.iter().sum();
            for c in 0..self.in_ch {
                let xr = x.channel(c);
                let base = (o * self.in_ch + c) * k;
                for j in 0..k {
                    let dot = if s == 1 {
                        gr.iter().zip(&xr[j..j + ol]).map(|(a, b)| a * b).sum()
                    } else {
                        (0..ol).map(|t| gr[t] * xr[t * s + j]).sum()
                    };
                    gw[base + j] = dot;
                }
                if let Some(gx) = gx.as_mut() {
                    let cols = gx.cols;
                    let gxr = &mut gx.data[c * cols..(c + 1) * cols];
                    for j in 0..k {
                        let w = self.weights[base + j];
                        if s == 1 {
                            for (dst, &gv) in gxr[j..j + ol].iter_mut().zip(gr) {
                                *dst += w * gv;
                            }
                        } else {
                            for t in 0..ol {
                                gxr[t * s + j] += w * gr[t];
                            }
                        }
                    }
                }
            }
        }
        (gw, gb, gx)
    }
}

/// Affine map on the flattened input. Weights are `(outputs, inputs)`
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let out = (0..self.outputs)
            .map(|o| {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + w.iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Tensor::row(out)
    }

    fn backward(
        &self,
        x: &Tensor,
        g: &Tensor,
        need_input: bool,
    ) -> (Vec<f64>, Vec<f64>, Option<Tensor>) {
        let mut gw = vec![0.0; self.weights.len()];
        for (o, &go) in g.data.iter().enumerate() {
            let row = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for (dst, &xv) in row.iter_mut().zip(&x.data) {
                *dst = go * xv;
            }
        }
        let gb = g.data.clone();
        let gx = need_input.then(|| {
            let mut gx = Tensor::zeros(x.rows, x.cols);
            for (o, &go) in g.data.iter().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for (dst, &wv) in gx.data.iter_mut().zip(w) {
                    *dst += wv * go;
                }
            }
            gx
        });
        (gw, gb, gx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    Relu,
    MaxPool1d { width: usize },
    Dense(Dense),
    Softmax,
}

/// What the backward pass needs from the forward pass of one layer.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Input(Tensor),
    Output(Tensor),
    PoolArgmax {
        rows: usize,
        cols: usize,
        argmax: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct Cache {
    pub entries: Vec<LayerCache>,
}

/// Parameter gradients, one vector per parameter array in the order of
/// [`Sequential::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn zeros_like(model: &Sequential) -> Self {
        Grads(model.params().iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= k);
    }
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "Conv1d",
            Layer::Relu => "ReLU",
            Layer::MaxPool1d { .. } => "MaxPool1d",
            Layer::Dense(_) => "Dense",
            Layer::Softmax => "Softmax",
        }
    }

    pub fn output_shape(&self, (rows, cols): (usize, usize)) -> Result<(usize, usize)> {
        let bad = |msg: String| Err(Error::Shape(msg));
        match self {
            Layer::Conv1d(c) => {
                if rows != c.in_ch {
                    return bad(format!("Conv1d expects {} channels, got {rows}", c.in_ch));
                }
                if c.weights.len() != c.out_ch * c.in_ch * c.kernel || c.bias.len() != c.out_ch {
                    return bad("Conv1d parameter arrays have the wrong length".into());
                }
                match c.out_len(cols) {
                    Some(l) => Ok((c.out_ch, l)),
                    None => bad(format!(
                        "Conv1d kernel {} stride {} does not fit length {cols}",
                        c.kernel, c.stride
                    )),
                }
            }
            Layer::Relu | Layer::Softmax => Ok((rows, cols)),
            Layer::MaxPool1d { width } => {
                if *width == 0 || cols < *width {
                    bad(format!(
                        "MaxPool1d width {width} does not fit length {cols}"
                    ))
                } else {
                    Ok((rows, cols / width))
                }
            }
            Layer::Dense(d) => {
                if rows.checked_mul(cols) != Some(d.inputs) {
                    return bad(format!(
                        "Dense expects {} inputs, got {}",
                        d.inputs,
                        rows * cols
                    ));
                }
                if d.weights.len() != d.inputs * d.outputs || d.bias.len() != d.outputs {
                    return bad("Dense parameter arrays have the wrong length".into());
                }
                Ok((1, d.outputs))
            }
        }
    }

    fn forward(&self, x: Tensor) -> (Tensor, LayerCache) {
        match self {
            Layer::Conv1d(c) => (c.forward(&x), LayerCache::Input(x)),
            Layer::Dense(d) => (d.forward(&x), LayerCache::Input(x)),
            Layer::Relu => {
                let mut y = x;
                y.data.iter_mut().for_each(|v| *v = v.max(0.0));
                (y.clone(), LayerCache::Output(y))
            }
            Layer::Softmax => {
                let mut y = x;
                let cols = y.cols;
                for row in y.data.chunks_mut(cols.max(1)) {
                    softmax_in_place(row);
                }
                (y.clone(), LayerCache::Output(y))
            }
            Layer::MaxPool1d { width } => {
                let w = *width;
                let ol = x.cols / w;
                let mut out = Tensor::zeros(x.rows, ol);
                let mut argmax = Vec::with_capacity(x.rows * ol);
                for r in 0..x.rows {
                    let xr = x.channel(r);
                    for t in 0..ol {
                        let mut best = t * w;
                        for i in t * w + 1..(t + 1) * w {
                            if xr[i] > xr[best] {
                                best = i;
                            }
                        }
                        out.data[r * ol + t] = xr[best];
                        argmax.push(r * x.cols + best);
                    }
                }
                let cache = LayerCache::PoolArgmax {
                    rows: x.rows,
                    cols: x.cols,
                    argmax,
                };
                (out, cache)
            }
        }
    }

    fn backward(
        &self,
        cache: &LayerCache,
        g: &Tensor,
        need_input: bool,
    ) -> Result<(Option<[Vec<f64>; 2]>, Option<Tensor>)> {
        let mismatch = || Error::Shape(format!("{} cache does not match gradient", self.name()));
        match (self, cache) {
            (Layer::Conv1d(c), LayerCache::Input(x)) => {
                if g.rows != c.out_ch || c.out_len(x.cols) != Some(g.cols) {
                    return Err(mismatch());
                }
                let (gw, gb, gx) = c.backward(x, g, need_input);
                Ok((Some([gw, gb]), gx))
            }
            (Layer::Dense(d), LayerCache::Input(x)) => {
                if g.len() != d.outputs || x.len() != d.inputs {
                    return Err(mismatch());
                }
                let (gw, gb, gx) = d.backward(x, g, need_input);
                Ok((Some([gw, gb]), gx))
            }
            (Layer::Relu, LayerCache::Output(y)) => {
                if y.shape() != g.shape() {
                    return Err(mismatch());
                }
                let mut gx = g.clone();
                for (gv, &yv) in gx.data.iter_mut().zip(&y.data) {
                    // Subgradient 0 at the kink.
                    if yv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                Ok((None, Some(gx)))
            }
            (Layer::Softmax, LayerCache::Output(y)) => {
                if y.shape() != g.shape() {
                    return Err(mismatch());
                }
                let mut gx = g.clone();
                let cols = y.cols.max(1);
                for (gr, yr) in gx.data.chunks_mut(cols).zip(y.data.chunks(cols)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (gv, &yv) in gr.iter_mut().zip(yr) {
                        *gv = yv * (*gv - dot);
                    }
                }
                Ok((None, Some(gx)))
            }
            (Layer::MaxPool1d { .. }, LayerCache::PoolArgmax { rows, cols, argmax }) => {
                if argmax.len() != g.len() {
                    return Err(mismatch());
                }
                let mut gx = Tensor::zeros(*rows, *cols);
                for (&idx, &gv) in argmax.iter().zip(&g.data) {
                    gx.data[idx] += gv;
                }
                Ok((None, Some(gx)))
            }
            _ => Err(mismatch()),
        }
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Ordered stack of layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Shape after every layer, starting with the input shape.
    pub fn shapes(&self, input: (usize, usize)) -> Result<Vec<(usize, usize)>> {
        let mut out = vec![input];
        let mut s = input;
        for l in &self.layers {
            s = l.output_shape(s)?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Cache)> {
        self.shapes(x.shape())?;
        if !x.is_finite() {
            return Err(Error::InvalidArgument(
                "input tensor has non-finite entries".into(),
            ));
        }
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(cur);
            entries.push(c);
            cur = y;
        }
        Ok((cur, Cache { entries }))
    }

    /// Input followed by the output of every layer.
    pub fn activations(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.shapes(x.shape())?;
        let mut out = vec![x.clone()];
        for l in &self.layers {
            let (y, _) = l.forward(out.last().unwrap().clone());
            out.push(y);
        }
        Ok(out)
    }

    /// Reverse-mode pass. The input gradient is computed only when
    /// `need_input` is set.
    pub fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        need_input: bool,
    ) -> Result<(Grads, Option<Tensor>)> {
        if cache.entries.len() != self.layers.len() {
            return Err(Error::Shape("cache does not belong to this model".into()));
        }
        let mut per_layer: Vec<Option<[Vec<f64>; 2]>> = vec![None; self.layers.len()];
        let mut g = grad_out.clone();
        for (idx, (l, c)) in self.layers.iter().zip(&cache.entries).enumerate().rev() {
            let want_input = need_input || idx > 0;
            let (p, gx) = l.backward(c, &g, want_input)?;
            per_layer[idx] = p;
            match gx {
                Some(gx) => g = gx,
                None => {
                    debug_assert_eq!(idx, 0);
                }
            }
        }
        let grads = per_layer
            .into_iter()
            .flatten()
            .flatten()
            .collect();
        Ok((Grads(grads), need_input.then_some(g)))
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv1d(c) => {
                    out.push(&c.weights);
                    out.push(&c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    out.push(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv1d(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity() {
        let d = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
        };
        let m = Sequential::new(vec![Layer::Dense(d)]);
        let (y, _) = m.forward(&Tensor::row(vec![3.0, -1.0])).unwrap();
        assert_eq!(y.data, vec![3.0, -1.0]);
    }

    #[test]
    fn conv_valid_cross_correlation() {
        let c = Conv1d {
            in_ch: 1,
            out_ch: 1,
            kernel: 2,
            stride: 1,
            weights: vec![1.0, -1.0],
            bias: vec![0.0],
        };
        let m = Sequential::new(vec![Layer::Conv1d(c)]);
        let (y, _) = m.forward(&Tensor::row(vec![5.0, 3.0, 8.0])).unwrap();
        assert_eq!(y.data, vec![2.0, -5.0]);
    }

    #[test]
    fn strided_conv() {
        let c = Conv1d {
            in_ch: 1,
            out_ch: 1,
            kernel: 2,
            stride: 2,
            weights: vec![1.0, 2.0],
            bias: vec![0.5],
        };
        let m = Sequential::new(vec![Layer::Conv1d(c)]);
        let (y, _) = m
            .forward(&Tensor::row(vec![1.0, 1.0, 2.0, 3.0, 9.0]))
            .unwrap();
        assert_eq!(y.data, vec![3.5, 8.5]);
    }

    #[test]
    fn softmax_symmetric() {
        let m = Sequential::new(vec![Layer::Softmax]);
        let (y, _) = m.forward(&Tensor::row(vec![0.0, 0.0])).unwrap();
        assert_eq!(y.data, vec![0.5, 0.5]);
    }

    #[test]
    fn maxpool_routes_to_first_max() {
        let m = Sequential::new(vec![Layer::MaxPool1d { width: 2 }]);
        let x = Tensor::row(vec![4.0, 4.0, 1.0, 2.0, 7.0]);
        let (y, cache) = m.forward(&x).unwrap();
        assert_eq!(y.data, vec![4.0, 2.0]);
        let (_, gx) = m
            .backward(&cache, &Tensor::row(vec![1.0, 1.0]), true)
            .unwrap();
        assert_eq!(gx.unwrap().data, vec![1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn relu_subgradient_zero_at_kink() {
        let m = Sequential::new(vec![Layer::Relu]);
        let (y, cache) = m.forward(&Tensor::row(vec![-1.0, 0.0, 2.0])).unwrap();
        assert_eq!(y.data, vec![0.0, 0.0, 2.0]);
        let (_, gx) = m
            .backward(&cache, &Tensor::row(vec![1.0; 3]), true)
            .unwrap();
        assert_eq!(gx.unwrap().data, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn dense_gradient_of_sum() {
        let d = Dense {
            inputs: 3,
            outputs: 2,
            weights: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            bias: vec![0.0, 1.0],
        };
        let m = Sequential::new(vec![Layer::Dense(d)]);
        let x = Tensor::row(vec![1.0, -2.0, 3.0]);
        let (_, cache) = m.forward(&x).unwrap();
        let (g, _) = m
            .backward(&cache, &Tensor::row(vec![1.0, 1.0]), false)
            .unwrap();
        assert_eq!(g.0[0], vec![1.0, -2.0, 3.0, 1.0, -2.0, 3.0]);
        assert_eq!(g.0[1], vec![1.0, 1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = Sequential::new(vec![
            Layer::Conv1d(Conv1d::new(1, 2, 3, 1, &mut rng)),
            Layer::Relu,
            Layer::MaxPool1d { width: 2 },
            Layer::Dense(Dense::new(12, 3, &mut rng)),
            Layer::Softmax,
        ]);
        let x = Tensor::row((0..14).map(|i| (i as f64 * 0.7).sin()).collect());
        let (y, cache) = m.forward(&x).unwrap();
        let (g, gx) = m
            .backward(&cache, &Tensor::zeros(y.rows, y.cols), true)
            .unwrap();
        assert!(g.0.iter().flatten().all(|&v| v == 0.0));
        assert!(gx.unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = Sequential::new(vec![Layer::Conv1d(Conv1d::new(2, 2, 3, 1, &mut rng))]);
        assert!(matches!(
            m.forward(&Tensor::row(vec![1.0; 8])),
            Err(Error::Shape(_))
        ));
        let m = Sequential::new(vec![Layer::Conv1d(Conv1d::new(1, 2, 9, 1, &mut rng))]);
        assert!(matches!(
            m.forward(&Tensor::row(vec![1.0; 8])),
            Err(Error::Shape(_))
        ));
        let m = Sequential::new(vec![Layer::Dense(Dense::new(5, 2, &mut rng))]);
        assert!(matches!(
            m.forward(&Tensor::row(vec![1.0; 4])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn softmax_sums_to_one_and_shift_invariant() {
        let logits = [3.0, -1.0, 0.25, 700.0];
        let p = softmax(&logits);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|v| v + 123.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    use rand::SeedableRng;
}
