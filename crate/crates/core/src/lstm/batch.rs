//! Minibatch forward and backward passes. The batch is stacked into
//! `B × width` blocks per timestep so every product is a matrix multiply.

use super::{cross_entropy_index, sigmoid, softmax_into, Dims, LstmError, LstmModel, Params};
use crate::matrix::Matrix;

#[derive(Default)]
pub(super) struct BatchWorkspace {
    xs: Vec<f64>,
    gates: Vec<f64>,
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}

impl BatchWorkspace {
    fn resize(&mut self, d: Dims, steps: usize, n: usize) {
        let h = d.hidden;
        self.xs.resize(steps * n * d.input, 0.0);
        self.gates.resize(steps * n * 4 * h, 0.0);
        self.cell.resize(steps * n * h, 0.0);
        self.tanh_cell.resize(steps * n * h, 0.0);
        self.hidden.resize(steps * n * h, 0.0);
        self.logits.resize(n * d.output, 0.0);
        self.dh.resize(n * h, 0.0);
        self.dc.resize(n * h, 0.0);
        self.dz.resize(n * 4 * h, 0.0);
    }
}

/// `C = A·B + beta·C` with `C` row-major and arbitrary strides for `A`, `B`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(k == 0 || last(m, k, rsa, csa) < a.len());
    assert!(k == 0 || last(k, n, rsb, csb) < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above keep every strided access in bounds and `c`
    // does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn add_column_sums(acc: &mut [f64], rows: &[f64]) {
    for row in rows.chunks_exact(acc.len()) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}

impl LstmModel {
    /// Adds the gradient of the mean batch loss to `grads` and returns that
    /// mean loss. Windows must share one shape; the caller checks it.
    pub(super) fn accumulate_batch(
        &self,
        batch: &[(&Matrix, usize)],
        ws: &mut BatchWorkspace,
        grads: &mut Params,
    ) -> Result<f64, LstmError> {
        let Dims { input: ni, hidden: h, output: no } = self.dims;
        let h4 = 4 * h;
        let n = batch.len();
        if n == 0 {
            return Err(LstmError::Empty);
        }
        let steps = batch[0].0.rows();
        for &(x, target) in batch {
            self.check_window(x)?;
            if x.rows() != steps {
                return Err(LstmError::MixedShapes);
            }
            if target >= no {
                return Err(LstmError::ShapeMismatch(format!(
                    "target {target} outside {no} outputs"
                )));
            }
        }
        ws.resize(self.dims, steps, n);
        let p = &self.params;

        for (s, (x, _)) in batch.iter().enumerate() {
            for t in 0..steps {
                let at = (t * n + s) * ni;
                ws.xs[at..at + ni].copy_from_slice(x.row(t));
            }
        }

        for t in 0..steps {
            let z = &mut ws.gates[t * n * h4..(t + 1) * n * h4];
            for row in z.chunks_exact_mut(h4) {
                row.copy_from_slice(&p.b);
            }
            let xt = &ws.xs[t * n * ni..(t + 1) * n * ni];
            gemm(n, ni, h4, xt, (ni, 1), &p.wx, (h4, 1), 1.0, z);
            if t > 0 {
                let prev = &ws.hidden[(t - 1) * n * h..t * n * h];
                gemm(n, h, h4, prev, (h, 1), &p.uh, (h4, 1), 1.0, z);
            }
            for row in z.chunks_exact_mut(h4) {
                row[..3 * h].iter_mut().for_each(|v| *v = sigmoid(*v));
                row[3 * h..].iter_mut().for_each(|v| *v = v.tanh());
            }
            let (cells_done, cells) = ws.cell.split_at_mut(t * n * h);
            for s in 0..n {
                let g = &z[s * h4..(s + 1) * h4];
                let at = (t * n + s) * h;
                for u in 0..h {
                    let c_prev = if t > 0 { cells_done[at - n * h + u] } else { 0.0 };
                    let c = g[h + u] * c_prev + g[u] * g[3 * h + u];
                    cells[s * h + u] = c;
                    let tc = c.tanh();
                    ws.tanh_cell[at + u] = tc;
                    ws.hidden[at + u] = g[2 * h + u] * tc;
                }
            }
        }

        let last = &ws.hidden[(steps - 1) * n * h..steps * n * h];
        for row in ws.logits.chunks_exact_mut(no) {
            row.copy_from_slice(&p.by);
        }
        gemm(n, h, no, last, (h, 1), &p.wy, (1, h), 1.0, &mut ws.logits);

        let scale = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut probs = vec![0.0; no];
        for (s, (_, target)) in batch.iter().enumerate() {
            let row = &mut ws.logits[s * no..(s + 1) * no];
            softmax_into(row, &mut probs);
            loss += cross_entropy_index(&probs, *target);
            for (o, d) in row.iter_mut().enumerate() {
                *d = scale * (probs[o] - if o == *target { 1.0 } else { 0.0 });
            }
        }
        let dlogits = &ws.logits;
        add_column_sums(&mut grads.by, dlogits);
        gemm(no, n, h, dlogits, (1, no), last, (h, 1), 1.0, &mut grads.wy);
        gemm(n, no, h, dlogits, (no, 1), &p.wy, (h, 1), 0.0, &mut ws.dh);
        ws.dc.fill(0.0);

        for t in (0..steps).rev() {
            let gates = &ws.gates[t * n * h4..(t + 1) * n * h4];
            for s in 0..n {
                let g = &gates[s * h4..(s + 1) * h4];
                let dz = &mut ws.dz[s * h4..(s + 1) * h4];
                let at = (t * n + s) * h;
                for u in 0..h {
                    let (i, f, o, gg) = (g[u], g[h + u], g[2 * h + u], g[3 * h + u]);
                    let c_prev = if t > 0 { ws.cell[at - n * h + u] } else { 0.0 };
                    let tc = ws.tanh_cell[at + u];
                    let dh = ws.dh[s * h + u];
                    let dc = ws.dc[s * h + u] + dh * o * (1.0 - tc * tc);
                    dz[u] = dc * gg * i * (1.0 - i);
                    dz[h + u] = dc * c_prev * f * (1.0 - f);
                    dz[2 * h + u] = dh * tc * o * (1.0 - o);
                    dz[3 * h + u] = dc * i * (1.0 - gg * gg);
                    ws.dc[s * h + u] = dc * f;
                }
            }
            add_column_sums(&mut grads.b, &ws.dz);
            let xt = &ws.xs[t * n * ni..(t + 1) * n * ni];
            gemm(ni, n, h4, xt, (1, ni), &ws.dz, (h4, 1), 1.0, &mut grads.wx);
            if t > 0 {
                let prev = &ws.hidden[(t - 1) * n * h..t * n * h];
                gemm(h, n, h4, prev, (1, h), &ws.dz, (h4, 1), 1.0, &mut grads.uh);
                gemm(n, h4, h, &ws.dz, (h4, 1), &p.uh, (1, h4), 0.0, &mut ws.dh);
            }
        }
        Ok(loss * scale)
    }
}
