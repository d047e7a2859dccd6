//! Dense feed-forward classifier trained with softmax cross-entropy and plain SGD.
//!
//! All parameters live in a single flat `Vec<f64>` laid out layer by layer
//! (weights first, then biases). Gradients use the same layout, which is what
//! the alignment diagnostics need: a gradient is just a point in parameter space.
//!
//! Weights are stored input-major (`w[i * fan_out + o]`) so the inner loops of
//! both the forward pass and the weight-gradient accumulation are contiguous
//! axpy updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::streams::Sample;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Stacks feature vectors as rows. All rows must share one length.
    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            if row.len() != cols {
                return Err(Error::Shape {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Inputs paired with class labels.
#[derive(Debug, Clone)]
pub struct Batch {
    inputs: Matrix,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Shape {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_samples<'a, I>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for s in samples {
            if s.features.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
            data.extend_from_slice(&s.features);
            labels.push(s.label);
        }
        let rows = labels.len();
        Ok(Self {
            inputs: Matrix::new(rows, dim, data)?,
            labels,
        })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Gradient of the loss with respect to every model parameter, in the
/// model's flat parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGradient(pub Vec<f64>);

impl FlatGradient {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &FlatGradient) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn add_scaled(&mut self, other: &FlatGradient, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

/// Multi-layer perceptron with rectifier hidden activations and a linear
/// output layer sized to the full label universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layout: Vec<LayerLayout>,
    params: Vec<f64>,
}

fn layout_for(dims: &[usize]) -> Result<(Vec<LayerLayout>, usize)> {
    if dims.len() < 2 {
        return Err(Error::Config(
            "an MLP needs at least an input and an output dimension".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::Config("layer dimensions must be positive".into()));
    }
    let mut offset = 0;
    let layout = dims
        .windows(2)
        .map(|w| {
            let l = LayerLayout {
                fan_in: w[0],
                fan_out: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset = l.bias + w[1];
            l
        })
        .collect();
    Ok((layout, offset))
}

impl Mlp {
    /// Seeded He-uniform initialization: weights drawn from
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, biases zero.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        let (layout, count) = layout_for(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; count];
        for l in &layout {
            let bound = (6.0 / l.fan_in as f64).sqrt();
            for p in &mut params[l.weights..l.bias] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            layout,
            params,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let (layout, count) = layout_for(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            layout,
            params: vec![0.0; count],
        })
    }

    pub fn from_parameters(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        let (layout, count) = layout_for(dims)?;
        if params.len() != count {
            return Err(Error::Shape {
                expected: count,
                actual: params.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            layout,
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: inputs.cols(),
            });
        }
        Ok(())
    }

    /// Affine map of one layer: `out = x W + b`, row by row.
    fn affine(&self, l: &LayerLayout, x: &Matrix) -> Matrix {
        let w = &self.params[l.weights..l.bias];
        let b = &self.params[l.bias..l.bias + l.fan_out];
        let mut out = Matrix::zeros(x.rows(), l.fan_out);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let or = out.row_mut(r);
            or.copy_from_slice(b);
            for (i, &xi) in xr.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wi = &w[i * l.fan_out..(i + 1) * l.fan_out];
                for (o, &wio) in or.iter_mut().zip(wi) {
                    *o += xi * wio;
                }
            }
        }
        out
    }

    /// Runs the network and keeps every layer's post-activation output
    /// (the input first, the logits last).
    fn forward_trace(&self, inputs: &Matrix) -> Vec<Matrix> {
        let mut acts = Vec::with_capacity(self.layout.len() + 1);
        acts.push(inputs.clone());
        let last = self.layout.len() - 1;
        for (k, l) in self.layout.iter().enumerate() {
            let mut z = self.affine(l, acts.last().unwrap());
            if k != last {
                for v in &mut z.data {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_input(inputs)?;
        Ok(self.forward_trace(inputs).pop().unwrap())
    }

    /// Arg-max class per input row.
    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(inputs)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    /// Mean cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, FlatGradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("loss over an empty batch"));
        }
        self.check_input(batch.inputs())?;
        let k = self.num_classes();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= k) {
            return Err(Error::Config(format!(
                "label {bad} outside the {k}-class label universe"
            )));
        }

        let acts = self.forward_trace(batch.inputs());
        let n = batch.len() as f64;
        let logits = acts.last().unwrap();

        // dL/dz for the output layer: (softmax - onehot) / n.
        let mut loss = 0.0;
        let mut delta = Matrix::zeros(logits.rows(), k);
        for (r, &y) in batch.labels().iter().enumerate() {
            let row = logits.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
            let log_z = max + sum.ln();
            loss += log_z - row[y];
            let d = delta.row_mut(r);
            for (j, dj) in d.iter_mut().enumerate() {
                *dj = (row[j] - log_z).exp() / n;
            }
            d[y] -= 1.0 / n;
        }
        loss /= n;

        let mut grad = vec![0.0; self.params.len()];
        for (li, l) in self.layout.iter().enumerate().rev() {
            let x = &acts[li];
            let (gw, rest) = grad[l.weights..].split_at_mut(l.bias - l.weights);
            let gb = &mut rest[..l.fan_out];
            for r in 0..x.rows() {
                let dr = delta.row(r);
                for (b, d) in gb.iter_mut().zip(dr) {
                    *b += d;
                }
                for (i, &xi) in x.row(r).iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (g, d) in gw[i * l.fan_out..(i + 1) * l.fan_out].iter_mut().zip(dr) {
                        *g += xi * d;
                    }
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through W and the rectifier of the previous layer.
            let w = &self.params[l.weights..l.bias];
            let mut prev = Matrix::zeros(x.rows(), l.fan_in);
            for r in 0..x.rows() {
                let dr = delta.row(r);
                let xr = x.row(r);
                let pr = prev.row_mut(r);
                for i in 0..l.fan_in {
                    if xr[i] <= 0.0 {
                        continue;
                    }
                    let wi = &w[i * l.fan_out..(i + 1) * l.fan_out];
                    pr[i] = wi.iter().zip(dr).map(|(a, b)| a * b).sum();
                }
            }
            delta = prev;
        }
        Ok((loss, FlatGradient(grad)))
    }

    /// `p <- p - lr * g` for every parameter. A zero rate is a no-op.
    pub fn sgd_step(&mut self, grad: &FlatGradient, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {lr}"
            )));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape {
                expected: self.params.len(),
                actual: grad.len(),
            });
        }
        for (p, g) in self.params.iter_mut().zip(grad.as_slice()) {
            *p -= lr * g;
        }
        Ok(())
    }

    /// Mean per-sample gradient over a sample set, i.e. the gradient of the
    /// mean loss. Evaluated in chunks to bound activation memory.
    pub fn gradient_of_dataset(&self, samples: &[Sample]) -> Result<FlatGradient> {
        const CHUNK: usize = 512;
        if samples.is_empty() {
            return Err(Error::EmptyInput("gradient over an empty sample set"));
        }
        let total = samples.len() as f64;
        let mut acc = FlatGradient::zeros(self.params.len());
        for chunk in samples.chunks(CHUNK) {
            let batch = Batch::from_samples(self.input_dim(), chunk)?;
            let (_, g) = self.loss_and_grad(&batch)?;
            acc.add_scaled(&g, chunk.len() as f64 / total);
        }
        Ok(acc)
    }

    /// Fraction of samples whose arg-max prediction equals the label.
    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64> {
        const CHUNK: usize = 512;
        if samples.is_empty() {
            return Err(Error::EmptyInput("accuracy over an empty sample set"));
        }
        let mut correct = 0usize;
        for chunk in samples.chunks(CHUNK) {
            let batch = Batch::from_samples(self.input_dim(), chunk)?;
            let pred = self.predict(batch.inputs())?;
            correct += pred.iter().zip(batch.labels()).filter(|(p, y)| p == y).count();
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
