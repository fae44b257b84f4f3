//! Sequence-to-label LSTM classifier.
//!
//! One recurrent layer (gates i, f, o with logistic activation, candidate g
//! with tanh) runs over the raw window from a zero state; a dense softmax head
//! reads the final hidden state. Gradients come from backpropagation through
//! every timestep and are applied with Adam.
//!
//! Gate weights are stored input-major so the per-timestep products are
//! contiguous axpy updates: `wx[j * 4H + gate * H + unit]` is
//! `W_gate[unit][j]`, and `uh` is laid out the same way over the previous
//! hidden state. Persistence writes the conventional `hidden × input` tensors.

mod adam;
mod batch;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use train::{train, TrainConfig, TrainHistory};

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::corpus::TaskCategory;
use crate::matrix::Matrix;

pub const HIDDEN_UNITS: usize = 100;
pub const OUTPUT_DIM: usize = 5;
pub const HEADER: &str = "LOCOMODE-LSTM v1";
/// Probability floor inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Gate order inside the stacked tensors.
pub const GATES: [&str; 4] = ["i", "f", "o", "g"];
const FORGET: usize = 1;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training windows have mixed shapes")]
    MixedShapes,
    #[error("no training windows")]
    Empty,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// All trainable tensors; also used for gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub wx: Vec<f64>,
    pub uh: Vec<f64>,
    pub b: Vec<f64>,
    pub wy: Vec<f64>,
    pub by: Vec<f64>,
}

impl Params {
    pub fn zeros(d: Dims) -> Self {
        Self {
            wx: vec![0.0; d.input * 4 * d.hidden],
            uh: vec![0.0; d.hidden * 4 * d.hidden],
            b: vec![0.0; 4 * d.hidden],
            wy: vec![0.0; d.output * d.hidden],
            by: vec![0.0; d.output],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.wx, &self.uh, &self.b, &self.wy, &self.by]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.wx,
            &mut self.uh,
            &mut self.b,
            &mut self.wy,
            &mut self.by,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat coordinate access across all tensors, in `tensors()` order.
    pub fn get(&self, mut idx: usize) -> f64 {
        for t in self.tensors() {
            if idx < t.len() {
                return t[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set(&mut self, mut idx: usize, value: f64) {
        for t in self.tensors_mut() {
            if idx < t.len() {
                t[idx] = value;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    dims: Dims,
    pub params: Params,
    seed: u64,
}

impl LstmModel {
    /// Seeded initialization: every input and recurrent weight uniform in
    /// ±1/√hidden, head weights likewise, biases zero except the forget gate
    /// at 1.
    pub fn init(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let dims = Dims {
            input,
            hidden,
            output,
        };
        let mut rng = crate::seed::rng(seed, "lstm-init");
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut params = Params::zeros(dims);
        let h4 = 4 * hidden;
        // Drawn per named tensor (W_i, W_f, W_o, W_g, U_i, ..., W_y), row-major.
        for gate in 0..4 {
            for unit in 0..hidden {
                for j in 0..input {
                    params.wx[j * h4 + gate * hidden + unit] = rng.random_range(-bound..bound);
                }
            }
        }
        for gate in 0..4 {
            for unit in 0..hidden {
                for k in 0..hidden {
                    params.uh[k * h4 + gate * hidden + unit] = rng.random_range(-bound..bound);
                }
            }
        }
        for w in &mut params.wy {
            *w = rng.random_range(-bound..bound);
        }
        params.b[FORGET * hidden..(FORGET + 1) * hidden].fill(1.0);
        Self { dims, params, seed }
    }

    /// All-zero parameters, for tests.
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        let dims = Dims {
            input,
            hidden,
            output,
        };
        Self {
            dims,
            params: Params::zeros(dims),
            seed: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `W_gate` as a `hidden × input` matrix.
    pub fn input_weights(&self, gate: usize) -> Matrix {
        let Dims { input, hidden, .. } = self.dims;
        let mut m = Matrix::zeros(hidden, input);
        for unit in 0..hidden {
            for j in 0..input {
                m[(unit, j)] = self.params.wx[j * 4 * hidden + gate * hidden + unit];
            }
        }
        m
    }

    /// `U_gate` as a `hidden × hidden` matrix.
    pub fn recurrent_weights(&self, gate: usize) -> Matrix {
        let hidden = self.dims.hidden;
        let mut m = Matrix::zeros(hidden, hidden);
        for unit in 0..hidden {
            for k in 0..hidden {
                m[(unit, k)] = self.params.uh[k * 4 * hidden + gate * hidden + unit];
            }
        }
        m
    }

    pub fn gate_bias(&self, gate: usize) -> &[f64] {
        let h = self.dims.hidden;
        &self.params.b[gate * h..(gate + 1) * h]
    }

    fn check_window(&self, window: &Matrix) -> Result<(), LstmError> {
        if window.cols() != self.dims.input || window.rows() == 0 {
            return Err(LstmError::ShapeMismatch(format!(
                "window is {}x{}, model expects Tx{}",
                window.rows(),
                window.cols(),
                self.dims.input
            )));
        }
        Ok(())
    }

    /// Category probabilities for one window.
    pub fn forward(&self, window: &Matrix) -> Result<Vec<f64>, LstmError> {
        self.check_window(window)?;
        let mut ws = Workspace::new(self.dims, window.rows());
        self.forward_into(window, &mut ws);
        Ok(ws.probs.clone())
    }

    /// Full activation trace, for inspection and tests.
    pub fn forward_trace(&self, window: &Matrix) -> Result<Trace, LstmError> {
        self.check_window(window)?;
        let mut ws = Workspace::new(self.dims, window.rows());
        self.forward_into(window, &mut ws);
        Ok(Trace {
            gates: Matrix::from_vec(window.rows(), 4 * self.dims.hidden, ws.gates),
            cell: Matrix::from_vec(window.rows(), self.dims.hidden, ws.cell),
            hidden: Matrix::from_vec(window.rows(), self.dims.hidden, ws.hidden),
            logits: ws.logits,
            probs: ws.probs,
        })
    }

    fn forward_into(&self, x: &Matrix, ws: &mut Workspace) {
        let Dims { hidden: h, output, .. } = self.dims;
        let h4 = 4 * h;
        let steps = x.rows();
        ws.resize(self.dims, steps);
        let p = &self.params;
        for t in 0..steps {
            let z = &mut ws.z;
            z.copy_from_slice(&p.b);
            for (j, &xj) in x.row(t).iter().enumerate() {
                if xj != 0.0 {
                    axpy(z, xj, &p.wx[j * h4..(j + 1) * h4]);
                }
            }
            if t > 0 {
                let prev = &ws.hidden[(t - 1) * h..t * h];
                for (k, &hk) in prev.iter().enumerate() {
                    if hk != 0.0 {
                        axpy(z, hk, &p.uh[k * h4..(k + 1) * h4]);
                    }
                }
            }
            let gates = &mut ws.gates[t * h4..(t + 1) * h4];
            for (g, zv) in gates[..3 * h].iter_mut().zip(&z[..3 * h]) {
                *g = sigmoid(*zv);
            }
            for (g, zv) in gates[3 * h..].iter_mut().zip(&z[3 * h..]) {
                *g = zv.tanh();
            }
            let (done, rest) = ws.cell.split_at_mut(t * h);
            let cell = &mut rest[..h];
            let prev_cell = if t > 0 { Some(&done[(t - 1) * h..]) } else { None };
            let tanh_c = &mut ws.tanh_cell[t * h..(t + 1) * h];
            let hid = &mut ws.hidden[t * h..(t + 1) * h];
            for u in 0..h {
                let (i, f, o, g) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
                let c_prev = prev_cell.map_or(0.0, |pc| pc[u]);
                let c = f * c_prev + i * g;
                cell[u] = c;
                tanh_c[u] = c.tanh();
                hid[u] = o * tanh_c[u];
            }
        }
        let last = &ws.hidden[(steps - 1) * h..steps * h];
        for o in 0..output {
            ws.logits[o] = p.by[o] + dot(&p.wy[o * h..(o + 1) * h], last);
        }
        softmax_into(&ws.logits, &mut ws.probs);
    }

    /// Adds `scale · ∂loss/∂θ` for one sample to `grads`, reusing the
    /// activations left in `ws` by the preceding forward pass.
    fn backward_into(
        &self,
        x: &Matrix,
        target: usize,
        scale: f64,
        ws: &mut Workspace,
        grads: &mut Params,
    ) {
        let Dims { hidden: h, output, .. } = self.dims;
        let h4 = 4 * h;
        let steps = x.rows();
        let p = &self.params;

        for o in 0..output {
            ws.dlogits[o] = scale * (ws.probs[o] - if o == target { 1.0 } else { 0.0 });
        }
        let last = &ws.hidden[(steps - 1) * h..steps * h];
        ws.dh.fill(0.0);
        for o in 0..output {
            let d = ws.dlogits[o];
            grads.by[o] += d;
            axpy(&mut grads.wy[o * h..(o + 1) * h], d, last);
            axpy(&mut ws.dh, d, &p.wy[o * h..(o + 1) * h]);
        }
        ws.dc.fill(0.0);
        for t in (0..steps).rev() {
            let gates = &ws.gates[t * h4..(t + 1) * h4];
            let tanh_c = &ws.tanh_cell[t * h..(t + 1) * h];
            for u in 0..h {
                let (i, f, o, g) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
                let c_prev = if t > 0 { ws.cell[(t - 1) * h + u] } else { 0.0 };
                let dh = ws.dh[u];
                let tc = tanh_c[u];
                let dc = ws.dc[u] + dh * o * (1.0 - tc * tc);
                ws.dz[u] = dc * g * i * (1.0 - i);
                ws.dz[h + u] = dc * c_prev * f * (1.0 - f);
                ws.dz[2 * h + u] = dh * tc * o * (1.0 - o);
                ws.dz[3 * h + u] = dc * i * (1.0 - g * g);
                ws.dc[u] = dc * f;
            }
            let dz = &ws.dz;
            for (gb, d) in grads.b.iter_mut().zip(dz) {
                *gb += d;
            }
            for (j, &xj) in x.row(t).iter().enumerate() {
                if xj != 0.0 {
                    axpy(&mut grads.wx[j * h4..(j + 1) * h4], xj, dz);
                }
            }
            if t > 0 {
                let prev = &ws.hidden[(t - 1) * h..t * h];
                for k in 0..h {
                    let hk = prev[k];
                    if hk != 0.0 {
                        axpy(&mut grads.uh[k * h4..(k + 1) * h4], hk, dz);
                    }
                    ws.dh[k] = dot(&p.uh[k * h4..(k + 1) * h4], dz);
                }
            }
        }
    }

    /// Mean cross-entropy and its gradient over a batch.
    pub fn batch_gradient(
        &self,
        batch: &[(&Matrix, TaskCategory)],
    ) -> Result<(f64, Params), LstmError> {
        let targets: Vec<(&Matrix, usize)> = batch.iter().map(|(m, c)| (*m, c.index())).collect();
        self.batch_gradient_indexed(&targets)
    }

    /// As [`batch_gradient`](Self::batch_gradient) with raw class indices,
    /// for heads with other than five outputs.
    pub fn batch_gradient_indexed(
        &self,
        batch: &[(&Matrix, usize)],
    ) -> Result<(f64, Params), LstmError> {
        if batch.is_empty() {
            return Err(LstmError::Empty);
        }
        let mut grads = Params::zeros(self.dims);
        let mut ws = Workspace::new(self.dims, batch[0].0.rows());
        let loss = self.accumulate(batch, &mut ws, &mut grads)?;
        Ok((loss, grads))
    }

    fn accumulate(
        &self,
        batch: &[(&Matrix, usize)],
        ws: &mut Workspace,
        grads: &mut Params,
    ) -> Result<f64, LstmError> {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(x, target) in batch {
            self.check_window(x)?;
            if target >= self.dims.output {
                return Err(LstmError::ShapeMismatch(format!(
                    "target {target} outside {} outputs",
                    self.dims.output
                )));
            }
            self.forward_into(x, ws);
            loss += cross_entropy_index(&ws.probs, target);
            self.backward_into(x, target, scale, ws, grads);
        }
        Ok(loss * scale)
    }

    /// Argmax of the forward probabilities; ties go to the earlier category.
    pub fn predict(&self, window: &Matrix) -> Result<TaskCategory, LstmError> {
        if self.dims.output != OUTPUT_DIM {
            return Err(LstmError::ShapeMismatch(format!(
                "head has {} outputs, expected {OUTPUT_DIM}",
                self.dims.output
            )));
        }
        let probs = self.forward(window)?;
        Ok(TaskCategory::ALL[argmax(&probs)])
    }

    /// Predict many windows reusing one workspace.
    pub fn predict_many<'a, I>(&self, windows: I) -> Result<Vec<TaskCategory>, LstmError>
    where
        I: IntoIterator<Item = &'a Matrix>,
    {
        let mut ws: Option<Workspace> = None;
        let mut out = Vec::new();
        for w in windows {
            self.check_window(w)?;
            let ws = ws.get_or_insert_with(|| Workspace::new(self.dims, w.rows()));
            self.forward_into(w, ws);
            out.push(TaskCategory::ALL[argmax(&ws.probs)]);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let Dims {
            input,
            hidden,
            output,
        } = self.dims;
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        writeln!(out, "{input} {hidden} {output} {}", self.seed).unwrap();
        let mut tensor = |name: String, m: &Matrix| {
            writeln!(out, "{name} {} {}", m.rows(), m.cols()).unwrap();
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        };
        for (g, name) in GATES.iter().enumerate() {
            tensor(format!("W_{name}"), &self.input_weights(g));
        }
        for (g, name) in GATES.iter().enumerate() {
            tensor(format!("U_{name}"), &self.recurrent_weights(g));
        }
        for (g, name) in GATES.iter().enumerate() {
            tensor(
                format!("b_{name}"),
                &Matrix::from_vec(1, hidden, self.gate_bias(g).to_vec()),
            );
        }
        tensor("W_y".into(), &Matrix::from_vec(output, hidden, self.params.wy.clone()));
        tensor("b_y".into(), &Matrix::from_vec(1, output, self.params.by.clone()));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LstmError> {
        let bad = |m: String| LstmError::Format(m);
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("bad header".into()));
        }
        let dims_line = lines.next().ok_or_else(|| bad("missing dims".into()))?;
        let nums: Vec<u64> = dims_line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad dims line".into()))?;
        if nums.len() != 4 {
            return Err(bad("dims line needs input hidden output seed".into()));
        }
        let (input, hidden, output) = (nums[0] as usize, nums[1] as usize, nums[2] as usize);
        let mut model = Self::zeros(input, hidden, output);
        model.seed = nums[3];
        let h4 = 4 * hidden;
        let mut read = |name: &str, rows: usize, cols: usize| -> Result<Matrix, LstmError> {
            let head = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            let expect = format!("{name} {rows} {cols}");
            if head != expect {
                return Err(bad(format!("expected {expect:?}, found {head:?}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| bad(format!("truncated {name}")))?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value in {name}")))?);
                }
                if data.len() - before != cols {
                    return Err(bad(format!("row width in {name}")));
                }
            }
            Ok(Matrix::from_vec(rows, cols, data))
        };
        for (g, name) in GATES.iter().enumerate() {
            let m = read(&format!("W_{name}"), hidden, input)?;
            for unit in 0..hidden {
                for j in 0..input {
                    model.params.wx[j * h4 + g * hidden + unit] = m[(unit, j)];
                }
            }
        }
        for (g, name) in GATES.iter().enumerate() {
            let m = read(&format!("U_{name}"), hidden, hidden)?;
            for unit in 0..hidden {
                for k in 0..hidden {
                    model.params.uh[k * h4 + g * hidden + unit] = m[(unit, k)];
                }
            }
        }
        for (g, name) in GATES.iter().enumerate() {
            let m = read(&format!("b_{name}"), 1, hidden)?;
            model.params.b[g * hidden..(g + 1) * hidden].copy_from_slice(m.as_slice());
        }
        model.params.wy = read("W_y", output, hidden)?.into_vec();
        model.params.by = read("b_y", 1, output)?.into_vec();
        if !model.params.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LstmError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LstmError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `T × 4H`, activated gates in order i, f, o, g.
    pub gates: Matrix,
    pub cell: Matrix,
    pub hidden: Matrix,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

struct Workspace {
    z: Vec<f64>,
    gates: Vec<f64>,
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    dlogits: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}

impl Workspace {
    fn new(d: Dims, steps: usize) -> Self {
        let mut ws = Self {
            z: Vec::new(),
            gates: Vec::new(),
            cell: Vec::new(),
            tanh_cell: Vec::new(),
            hidden: Vec::new(),
            logits: Vec::new(),
            probs: Vec::new(),
            dlogits: Vec::new(),
            dh: Vec::new(),
            dc: Vec::new(),
            dz: Vec::new(),
        };
        ws.resize(d, steps);
        ws
    }

    fn resize(&mut self, d: Dims, steps: usize) {
        let h = d.hidden;
        self.z.resize(4 * h, 0.0);
        self.gates.resize(steps * 4 * h, 0.0);
        self.cell.resize(steps * h, 0.0);
        self.tanh_cell.resize(steps * h, 0.0);
        self.hidden.resize(steps * h, 0.0);
        self.logits.resize(d.output, 0.0);
        self.probs.resize(d.output, 0.0);
        self.dlogits.resize(d.output, 0.0);
        self.dh.resize(h, 0.0);
        self.dc.resize(h, 0.0);
        self.dz.resize(4 * h, 0.0);
    }
}

/// `−ln(max(p[truth], 1e-12))`.
pub fn cross_entropy(probs: &[f64], truth: TaskCategory) -> f64 {
    cross_entropy_index(probs, truth.index())
}

fn cross_entropy_index(probs: &[f64], target: usize) -> f64 {
    -probs[target].max(PROB_FLOOR).ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
