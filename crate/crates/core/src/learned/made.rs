//! A small masked autoregressive density network over one-hot encoded
//! columns: one hidden layer, binary connectivity masks enforcing that the
//! output block for column `i` depends only on columns before `i`, and a
//! softmax distribution per column. Trained by mini-batch Adam on the
//! negative log-likelihood; range queries are served by progressive sampling.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::Estimator;
use crate::learned::progressive::{
    progressive_estimate, ConditionalOracle, ProgressiveSamplerConfig,
};
use crate::query::Query;
use crate::table::Table;
use crate::{Error, Result};

pub const MAX_COLUMNS: usize = 8;
pub const MAX_DOMAIN: usize = 256;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MadeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MadeConfig {
    fn default() -> Self {
        MadeConfig {
            hidden: 64,
            epochs: 20,
            batch_size: 256,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Tensor {
    data: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Tensor {
    fn new(len: usize) -> Self {
        Tensor {
            data: vec![0.0; len],
            grad: vec![0.0; len],
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    fn adam_step(&mut self, lr: f64, t: u64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let bc1 = 1.0 - B1.powi(t as i32);
        let bc2 = 1.0 - B2.powi(t as i32);
        for i in 0..self.data.len() {
            let g = self.grad[i];
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            self.data[i] -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MadeModel {
    n_cols: usize,
    domains: Vec<Vec<f64>>,
    /// Input/output block offsets per column; the last entry is the width.
    offsets: Vec<usize>,
    width: usize,
    hidden: usize,
    /// Degree m(h) of each hidden unit, in 1..=n_cols-1.
    hidden_degree: Vec<usize>,
    /// Column owning each input/output position.
    pos_col: Vec<usize>,
    w1: Tensor, // hidden x width
    b1: Tensor, // hidden
    w2: Tensor, // width x hidden
    b2: Tensor, // width
    adam_t: u64,
    order: Vec<usize>,
    cfg: MadeConfig,
    row_count: usize,
}

impl MadeModel {
    /// Trains a fresh model on the table for `cfg.epochs` epochs.
    pub fn train(table: &Table, cfg: MadeConfig) -> Result<Self> {
        let n_cols = table.n_cols();
        if n_cols == 0 || n_cols > MAX_COLUMNS {
            return Err(Error::InvalidConfig(format!(
                "made supports 1..={MAX_COLUMNS} columns, got {n_cols}"
            )));
        }
        let mut domains = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            let mut dom: Vec<f64> = table.column(c).to_vec();
            dom.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dom.dedup();
            if dom.len() > MAX_DOMAIN {
                return Err(Error::DomainTooLarge {
                    distinct: dom.len(),
                    limit: MAX_DOMAIN,
                });
            }
            domains.push(dom);
        }

        let mut offsets = Vec::with_capacity(n_cols + 1);
        let mut acc = 0;
        for dom in &domains {
            offsets.push(acc);
            acc += dom.len();
        }
        offsets.push(acc);
        let width = acc;
        let mut pos_col = vec![0usize; width];
        for c in 0..n_cols {
            pos_col[offsets[c]..offsets[c + 1]]
                .iter_mut()
                .for_each(|p| *p = c);
        }

        // Hidden degrees cycle 1..=n_cols-1 (column 0's output block keeps
        // only its bias, which learns the unconditional marginal).
        let hidden = cfg.hidden.max(1);
        let hidden_degree: Vec<usize> = (0..hidden)
            .map(|h| if n_cols > 1 { h % (n_cols - 1) + 1 } else { 1 })
            .collect();

        let mut model = MadeModel {
            n_cols,
            domains,
            offsets,
            width,
            hidden,
            hidden_degree,
            pos_col,
            w1: Tensor::new(hidden * width),
            b1: Tensor::new(hidden),
            w2: Tensor::new(width * hidden),
            b2: Tensor::new(width),
            adam_t: 0,
            order: (0..n_cols).collect(),
            cfg,
            row_count: table.row_count(),
        };
        model.init_weights();
        model.train_epochs(table, cfg.epochs)?;
        Ok(model)
    }

    fn init_weights(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let r1 = (6.0 / (self.width + self.hidden) as f64).sqrt();
        for h in 0..self.hidden {
            for i in 0..self.width {
                if self.w1_allowed(h, i) {
                    self.w1.data[h * self.width + i] = rng.gen_range(-r1..r1);
                }
            }
        }
        for o in 0..self.width {
            for h in 0..self.hidden {
                if self.w2_allowed(o, h) {
                    self.w2.data[o * self.hidden + h] = rng.gen_range(-r1..r1);
                }
            }
        }
    }

    #[inline]
    fn w1_allowed(&self, h: usize, input: usize) -> bool {
        self.hidden_degree[h] > self.pos_col[input]
    }

    #[inline]
    fn w2_allowed(&self, output: usize, h: usize) -> bool {
        self.pos_col[output] + 1 > self.hidden_degree[h]
    }

    /// Maps a table to per-row domain indices; every value must already be
    /// in the trained domain.
    pub fn encode_rows(&self, table: &Table) -> Result<Vec<Vec<usize>>> {
        if table.n_cols() != self.n_cols {
            return Err(Error::InvalidConfig(
                "table column count differs from the trained model".into(),
            ));
        }
        let maps: Vec<HashMap<u64, usize>> = self
            .domains
            .iter()
            .map(|dom| {
                dom.iter()
                    .enumerate()
                    .map(|(i, v)| (v.to_bits(), i))
                    .collect()
            })
            .collect();
        let mut rows = Vec::with_capacity(table.row_count());
        for r in 0..table.row_count() {
            let mut row = Vec::with_capacity(self.n_cols);
            for (c, map) in maps.iter().enumerate() {
                let v = table.value(c, r);
                let idx = map.get(&v.to_bits()).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "value {v} in column {c} is outside the trained domain"
                    ))
                })?;
                row.push(*idx);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Continues training on (re-encoded) table rows; Adam state carries over.
    pub fn train_epochs(&mut self, table: &Table, epochs: usize) -> Result<()> {
        let rows = self.encode_rows(table)?;
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        self.row_count = rows.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x51ED_2A90);
        rng.set_stream(self.adam_t);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.cfg.batch_size.max(1)) {
                self.w1.zero_grad();
                self.b1.zero_grad();
                self.w2.zero_grad();
                self.b2.zero_grad();
                for &r in chunk {
                    self.accumulate_row(&rows[r]);
                }
                self.scale_and_mask_grads(chunk.len() as f64);
                self.adam_t += 1;
                let lr = self.cfg.learning_rate;
                let t = self.adam_t;
                self.w1.adam_step(lr, t);
                self.b1.adam_step(lr, t);
                self.w2.adam_step(lr, t);
                self.b2.adam_step(lr, t);
            }
        }
        Ok(())
    }

    fn scale_and_mask_grads(&mut self, batch: f64) {
        let inv = 1.0 / batch.max(1.0);
        for h in 0..self.hidden {
            for i in 0..self.width {
                let idx = h * self.width + i;
                self.w1.grad[idx] = if self.w1_allowed(h, i) {
                    self.w1.grad[idx] * inv
                } else {
                    0.0
                };
            }
        }
        for o in 0..self.width {
            for h in 0..self.hidden {
                let idx = o * self.hidden + h;
                self.w2.grad[idx] = if self.w2_allowed(o, h) {
                    self.w2.grad[idx] * inv
                } else {
                    0.0
                };
            }
        }
        self.b1.grad.iter_mut().for_each(|g| *g *= inv);
        self.b2.grad.iter_mut().for_each(|g| *g *= inv);
    }

    /// Forward pass for a full assignment: hidden activations, then logits.
    fn forward(&self, row: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = self.b1.data.clone();
        for (c, &idx) in row.iter().enumerate() {
            let input = self.offsets[c] + idx;
            for (h, p) in pre.iter_mut().enumerate() {
                *p += self.w1.data[h * self.width + input];
            }
        }
        let h_act: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
        let mut z = self.b2.data.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let base = o * self.hidden;
            let acc: f64 = self.w2.data[base..base + self.hidden]
                .iter()
                .zip(&h_act)
                .map(|(w, h)| w * h)
                .sum();
            *zo += acc;
        }
        (pre, z)
    }

    fn softmax_block(&self, z: &[f64], col: usize, out: &mut Vec<f64>) {
        let block = &z[self.offsets[col]..self.offsets[col + 1]];
        let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.clear();
        out.extend(block.iter().map(|&v| (v - max).exp()));
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= sum);
    }

    /// Accumulates NLL gradients for one training row into the tensors.
    fn accumulate_row(&mut self, row: &[usize]) {
        let (pre, z) = self.forward(row);
        let h_act: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();

        // dz = softmax(block) - onehot(target), per block
        let mut dz = vec![0.0; self.width];
        let mut probs = Vec::new();
        for c in 0..self.n_cols {
            self.softmax_block(&z, c, &mut probs);
            let off = self.offsets[c];
            for (j, &p) in probs.iter().enumerate() {
                dz[off + j] = p;
            }
            dz[off + row[c]] -= 1.0;
        }

        let mut dh = vec![0.0; self.hidden];
        for (o, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.b2.grad[o] += g;
            let base = o * self.hidden;
            for h in 0..self.hidden {
                self.w2.grad[base + h] += g * h_act[h];
                dh[h] += g * self.w2.data[base + h];
            }
        }
        for h in 0..self.hidden {
            let dpre = if pre[h] > 0.0 { dh[h] } else { 0.0 };
            if dpre == 0.0 {
                continue;
            }
            self.b1.grad[h] += dpre;
            for (c, &idx) in row.iter().enumerate() {
                let input = self.offsets[c] + idx;
                self.w1.grad[h * self.width + input] += dpre;
            }
        }
    }

    /// Mean negative log-likelihood over the table.
    pub fn nll(&self, table: &Table) -> Result<f64> {
        let rows = self.encode_rows(table)?;
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(self.batch_loss(&rows))
    }

    /// Mean NLL over encoded rows.
    pub fn batch_loss(&self, rows: &[Vec<usize>]) -> f64 {
        let mut total = 0.0;
        let mut probs = Vec::new();
        for row in rows {
            let (_, z) = self.forward(row);
            for c in 0..self.n_cols {
                self.softmax_block(&z, c, &mut probs);
                total -= probs[row[c]].max(1e-300).ln();
            }
        }
        total / rows.len() as f64
    }

    /// Flat parameter vector (w1, b1, w2, b2).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend_from_slice(&self.w1.data);
        p.extend_from_slice(&self.b1.data);
        p.extend_from_slice(&self.w2.data);
        p.extend_from_slice(&self.b2.data);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut at = 0;
        for t in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let len = t.data.len();
            t.data.copy_from_slice(&params[at..at + len]);
            at += len;
        }
        assert_eq!(at, params.len());
    }

    /// Analytic masked gradient of [`Self::batch_loss`] at the current
    /// parameters, flattened like [`Self::params`].
    pub fn batch_gradient(&mut self, rows: &[Vec<usize>]) -> Vec<f64> {
        self.w1.zero_grad();
        self.b1.zero_grad();
        self.w2.zero_grad();
        self.b2.zero_grad();
        for row in rows {
            self.accumulate_row(row);
        }
        self.scale_and_mask_grads(rows.len() as f64);
        let mut g = Vec::new();
        g.extend_from_slice(&self.w1.grad);
        g.extend_from_slice(&self.b1.grad);
        g.extend_from_slice(&self.w2.grad);
        g.extend_from_slice(&self.b2.grad);
        g
    }

    /// Which flat parameters are free (true) vs frozen at zero by the
    /// connectivity masks, aligned with [`Self::params`].
    pub fn param_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.n_params());
        for h in 0..self.hidden {
            for i in 0..self.width {
                mask.push(self.w1_allowed(h, i));
            }
        }
        mask.extend(std::iter::repeat_n(true, self.hidden));
        for o in 0..self.width {
            for h in 0..self.hidden {
                mask.push(self.w2_allowed(o, h));
            }
        }
        mask.extend(std::iter::repeat_n(true, self.width));
        mask
    }

    /// Output distribution of one column's block under a (possibly full)
    /// assignment; the masks guarantee columns >= `col` cannot influence it.
    pub fn output_block(&self, col: usize, assignment: &[Option<usize>]) -> Vec<f64> {
        let mut out = Vec::new();
        self.conditional_into(col, assignment, &mut out);
        out
    }

    /// Model probability of a complete row (product of conditionals).
    pub fn joint_prob(&self, row: &[usize]) -> f64 {
        let assignment: Vec<Option<usize>> = row.iter().map(|&v| Some(v)).collect();
        let mut probs = Vec::new();
        let mut p = 1.0;
        for c in 0..self.n_cols {
            self.conditional_into(c, &assignment, &mut probs);
            p *= probs[row[c]];
        }
        p
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.domains.iter().map(Vec::len).collect()
    }

    pub fn n_params(&self) -> usize {
        self.w1.data.len() + self.b1.data.len() + self.w2.data.len() + self.b2.data.len()
    }
}

impl ConditionalOracle for MadeModel {
    fn order(&self) -> &[usize] {
        &self.order
    }

    fn domain(&self, col: usize) -> &[f64] {
        &self.domains[col]
    }

    fn conditional_into(&self, col: usize, assignment: &[Option<usize>], out: &mut Vec<f64>) {
        // Hidden pre-activations from whatever is assigned; masked weights
        // are stored as exact zeros, so columns >= col contribute nothing.
        let mut pre = self.b1.data.clone();
        for (c, a) in assignment.iter().enumerate() {
            if let Some(idx) = a {
                let input = self.offsets[c] + idx;
                for (h, p) in pre.iter_mut().enumerate() {
                    *p += self.w1.data[h * self.width + input];
                }
            }
        }
        let h_act: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
        let off = self.offsets[col];
        let block_len = self.offsets[col + 1] - off;
        let mut z = Vec::with_capacity(block_len);
        for o in off..off + block_len {
            let base = o * self.hidden;
            let dot: f64 = self.w2.data[base..base + self.hidden]
                .iter()
                .zip(&h_act)
                .map(|(w, h)| w * h)
                .sum();
            z.push(self.b2.data[o] + dot);
        }
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.clear();
        out.extend(z.iter().map(|&v| (v - max).exp()));
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= sum);
    }

    fn row_count(&self) -> usize {
        self.row_count
    }
}

/// The autoregressive-network estimator with progressive-sampling inference.
#[derive(Clone, Serialize, Deserialize)]
pub struct MadeEstimator {
    model: MadeModel,
    sampler: ProgressiveSamplerConfig,
    update_epochs: usize,
}

impl MadeEstimator {
    pub fn build(
        table: &Table,
        cfg: MadeConfig,
        sampler: ProgressiveSamplerConfig,
        update_epochs: usize,
    ) -> Result<Self> {
        Ok(MadeEstimator {
            model: MadeModel::train(table, cfg)?,
            sampler,
            update_epochs: update_epochs.max(1),
        })
    }

    pub fn model(&self) -> &MadeModel {
        &self.model
    }

    pub fn set_update_epochs(&mut self, epochs: usize) {
        self.update_epochs = epochs.max(1);
    }
}

impl Estimator for MadeEstimator {
    fn name(&self) -> &str {
        "made"
    }

    fn estimate(&self, query: &Query, seed: u64) -> f64 {
        progressive_estimate(&self.model, query, self.sampler, seed)
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        self.model.train_epochs(new_table, self.update_epochs)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        self.model.n_params() * 8
    }
}
