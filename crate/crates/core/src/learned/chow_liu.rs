//! Chow-Liu tree: a maximum-mutual-information spanning tree over the
//! columns with add-alpha smoothed conditional probability tables. Range
//! queries are served by progressive sampling along the tree order; small
//! query regions can also be summed exactly by dynamic programming over the
//! tree, which is the exactness oracle used in tests.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::estimator::Estimator;
use crate::learned::progressive::{
    progressive_estimate, ConditionalOracle, ProgressiveSamplerConfig,
};
use crate::query::Query;
use crate::table::Table;
use crate::{Error, Result};

/// Largest enumeration region (product of domain sizes over the constrained
/// columns and their tree ancestors) accepted by [`ChowLiuModel::enumerate_exact`].
const MAX_ENUMERATION_CELLS: f64 = 1e6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChowLiuModel {
    /// Topological order, root first.
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    domains: Vec<Vec<f64>>,
    /// `cpt[col][parent_idx]` is a distribution over `domains[col]`; the root
    /// has a single row holding its marginal.
    cpt: Vec<Vec<Vec<f64>>>,
    alpha: f64,
    row_count: usize,
}

fn encode_columns(table: &Table) -> (Vec<Vec<f64>>, Vec<Vec<u32>>) {
    let mut domains = Vec::with_capacity(table.n_cols());
    let mut codes = Vec::with_capacity(table.n_cols());
    for c in 0..table.n_cols() {
        let mut dom: Vec<f64> = table.column(c).to_vec();
        dom.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dom.dedup();
        let index: HashMap<u64, u32> = dom
            .iter()
            .enumerate()
            .map(|(i, v)| (v.to_bits(), i as u32))
            .collect();
        codes.push(
            table
                .column(c)
                .iter()
                .map(|v| index[&v.to_bits()])
                .collect(),
        );
        domains.push(dom);
    }
    (domains, codes)
}

/// Empirical mutual information (natural log) between two code columns.
pub fn mutual_information(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut ma: HashMap<u32, f64> = HashMap::new();
    let mut mb: HashMap<u32, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|(&(x, y), &cxy)| {
            let pxy = cxy / n;
            pxy * (pxy / ((ma[&x] / n) * (mb[&y] / n))).ln()
        })
        .sum()
}

impl ChowLiuModel {
    /// Builds the tree: pairwise mutual information from empirical joint
    /// frequencies, a maximum spanning tree rooted at column 0 (ties broken
    /// by lexicographic edge order), and add-alpha smoothed CPTs.
    pub fn build(table: &Table, alpha: f64) -> Result<Self> {
        if table.row_count() == 0 {
            return Err(Error::EmptyTable);
        }
        if alpha < 0.0 {
            return Err(Error::InvalidConfig("alpha must be >= 0".into()));
        }
        let n = table.n_cols();
        let (domains, codes) = encode_columns(table);

        // Maximum spanning tree over pairwise MI (Prim from column 0).
        let mut mi = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let w = mutual_information(&codes[i], &codes[j]);
                mi[i][j] = w;
                mi[j][i] = w;
            }
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut in_tree = vec![false; n];
        in_tree[0] = true;
        for _ in 1..n {
            let mut best: Option<(f64, usize, usize)> = None;
            for p in 0..n {
                if !in_tree[p] {
                    continue;
                }
                for c in 0..n {
                    if in_tree[c] {
                        continue;
                    }
                    if best.is_none_or(|(w, _, _)| mi[p][c] > w) {
                        best = Some((mi[p][c], p, c));
                    }
                }
            }
            let (_, p, c) = best.expect("graph is complete");
            parent[c] = Some(p);
            in_tree[c] = true;
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(c);
            }
        }

        // BFS topological order from the root.
        let mut order = Vec::with_capacity(n);
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            queue.extend(children[node].iter().copied());
        }

        // CPTs with add-alpha smoothing.
        let row_count = table.row_count();
        let mut cpt: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        for col in 0..n {
            let k = domains[col].len();
            match parent[col] {
                None => {
                    let mut counts = vec![0.0; k];
                    for &v in &codes[col] {
                        counts[v as usize] += 1.0;
                    }
                    let denom = row_count as f64 + alpha * k as f64;
                    let row = counts.iter().map(|c| (c + alpha) / denom).collect();
                    cpt.push(vec![row]);
                }
                Some(p) => {
                    let kp = domains[p].len();
                    let mut joint = vec![vec![0.0f64; k]; kp];
                    let mut parent_counts = vec![0.0f64; kp];
                    for (&pv, &cv) in codes[p].iter().zip(&codes[col]) {
                        joint[pv as usize][cv as usize] += 1.0;
                        parent_counts[pv as usize] += 1.0;
                    }
                    let rows = joint
                        .iter()
                        .zip(&parent_counts)
                        .map(|(row, &pc)| {
                            let denom = pc + alpha * k as f64;
                            row.iter()
                                .map(|c| {
                                    if denom > 0.0 {
                                        (c + alpha) / denom
                                    } else {
                                        0.0
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    cpt.push(rows);
                }
            }
        }

        Ok(ChowLiuModel {
            order,
            parent,
            children,
            domains,
            cpt,
            alpha,
            row_count,
        })
    }

    pub fn parent_of(&self, col: usize) -> Option<usize> {
        self.parent[col]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn conditional_row(&self, col: usize, assignment: &[Option<usize>]) -> &[f64] {
        match self.parent[col] {
            None => &self.cpt[col][0],
            Some(p) => {
                let pv = assignment[p].expect("parent sampled before child");
                &self.cpt[col][pv]
            }
        }
    }

    /// Exact sum of the tree-factored probability over the query region,
    /// scaled by the row count. Errors when the constrained-ancestor closure
    /// spans more than [`MAX_ENUMERATION_CELLS`] cells.
    pub fn enumerate_exact(&self, query: &Query) -> Result<f64> {
        let n = self.domains.len();
        let mut allowed: Vec<Option<Vec<bool>>> = vec![None; n];
        for p in &query.predicates {
            let mask: Vec<bool> = self.domains[p.col].iter().map(|&v| p.matches(v)).collect();
            allowed[p.col] = Some(mask);
        }

        // A column is relevant if it or any descendant is constrained.
        let mut relevant = vec![false; n];
        for &col in self.order.iter().rev() {
            relevant[col] =
                allowed[col].is_some() || self.children[col].iter().any(|&c| relevant[c]);
        }
        let cells: f64 = (0..n)
            .filter(|&c| relevant[c])
            .map(|c| self.domains[c].len() as f64)
            .product();
        if cells > MAX_ENUMERATION_CELLS {
            return Err(Error::RegionTooLarge(cells));
        }

        // Bottom-up messages: msg[col][parent_value] = sum over allowed
        // values of P(v | parent) times the children's messages at v.
        let mut msg: Vec<Vec<f64>> = vec![Vec::new(); n];
        for &col in self.order.iter().rev() {
            if !relevant[col] {
                continue;
            }
            let rows = &self.cpt[col];
            let mut out = Vec::with_capacity(rows.len());
            for row in rows {
                let mut total = 0.0;
                for (v, &p) in row.iter().enumerate() {
                    if allowed[col].as_ref().is_some_and(|m| !m[v]) {
                        continue;
                    }
                    let mut term = p;
                    for &ch in &self.children[col] {
                        if relevant[ch] {
                            term *= msg[ch][v];
                        }
                    }
                    total += term;
                }
                out.push(total);
            }
            msg[col] = out;
        }

        let prob = if relevant[0] { msg[0][0] } else { 1.0 };
        Ok(prob * self.row_count as f64)
    }
}

impl ConditionalOracle for ChowLiuModel {
    fn order(&self) -> &[usize] {
        &self.order
    }

    fn domain(&self, col: usize) -> &[f64] {
        &self.domains[col]
    }

    fn conditional_into(&self, col: usize, assignment: &[Option<usize>], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.conditional_row(col, assignment));
    }

    fn row_count(&self) -> usize {
        self.row_count
    }
}

/// The "Bayes" estimator: Chow-Liu tree with progressive sampling.
#[derive(Clone, Serialize, Deserialize)]
pub struct ChowLiuEstimator {
    model: ChowLiuModel,
    sampler: ProgressiveSamplerConfig,
}

impl ChowLiuEstimator {
    pub fn build(table: &Table, alpha: f64, sampler: ProgressiveSamplerConfig) -> Result<Self> {
        Ok(ChowLiuEstimator {
            model: ChowLiuModel::build(table, alpha)?,
            sampler,
        })
    }

    pub fn model(&self) -> &ChowLiuModel {
        &self.model
    }
}

impl Estimator for ChowLiuEstimator {
    fn name(&self) -> &str {
        "bayes"
    }

    fn estimate(&self, query: &Query, seed: u64) -> f64 {
        progressive_estimate(&self.model, query, self.sampler, seed)
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        self.model = ChowLiuModel::build(new_table, self.model.alpha)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        let cells: usize = self
            .model
            .cpt
            .iter()
            .map(|rows| rows.iter().map(Vec::len).sum::<usize>())
            .sum();
        let dom: usize = self.model.domains.iter().map(Vec::len).sum();
        (cells + dom) * 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learned::progressive::progressive_estimate_detailed;
    use crate::query::Predicate;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_coins_have_zero_mi_and_quarter_cells() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..400 {
            a.push((i % 2) as f64);
            b.push(((i / 2) % 2) as f64);
        }
        let t = Table::from_numeric_columns(&["a", "b"], vec![a, b]).unwrap();
        let model = ChowLiuModel::build(&t, 0.0).unwrap();
        let (_, codes) = encode_columns(&t);
        assert!(mutual_information(&codes[0], &codes[1]).abs() < 1e-12);
        for x in 0..2 {
            for y in 0..2 {
                let q = Query::new(vec![
                    Predicate::equality(0, x as f64),
                    Predicate::equality(1, y as f64),
                ]);
                let est = model.enumerate_exact(&q).unwrap();
                assert!((est - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn copied_column_mi_equals_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col: Vec<f64> = (0..5000).map(|_| rng.gen_range(0..8) as f64).collect();
        let t = Table::from_numeric_columns(&["a", "b"], vec![col.clone(), col.clone()]).unwrap();
        let (_, codes) = encode_columns(&t);
        let mi = mutual_information(&codes[0], &codes[1]);
        // H(X) computed directly from value frequencies.
        let mut counts = std::collections::HashMap::new();
        for v in &col {
            *counts.entry(v.to_bits()).or_insert(0.0f64) += 1.0;
        }
        let n = col.len() as f64;
        let entropy: f64 = counts.values().map(|c| -(c / n) * (c / n).ln()).sum();
        assert!((mi - entropy).abs() < 1e-9, "mi {mi}, entropy {entropy}");
    }

    #[test]
    fn copy_edge_wins_the_spanning_tree() {
        // a3 == a1 while a2 is unrelated noise: the tree must keep (a1, a3).
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a1: Vec<f64> = (0..2000).map(|_| rng.gen_range(0..6) as f64).collect();
        let a2: Vec<f64> = (0..2000).map(|_| rng.gen_range(0..6) as f64).collect();
        let a3 = a1.clone();
        let t = Table::from_numeric_columns(&["a1", "a2", "a3"], vec![a1, a2, a3]).unwrap();
        let model = ChowLiuModel::build(&t, 1.0).unwrap();
        assert_eq!(model.parent_of(2), Some(0));
    }

    #[test]
    fn alpha_zero_point_queries_match_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0..16) as f64).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|&v| {
                if rng.gen_bool(0.7) {
                    v
                } else {
                    rng.gen_range(0..16) as f64
                }
            })
            .collect();
        let t = Table::from_numeric_columns(&["a", "b"], vec![a, b]).unwrap();
        let model = ChowLiuModel::build(&t, 0.0).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                let q = Query::new(vec![
                    Predicate::equality(0, x as f64),
                    Predicate::equality(1, y as f64),
                ]);
                let est = model.enumerate_exact(&q).unwrap();
                let exact = t.exact_count(&q) as f64;
                assert!(
                    (est - exact).abs() < 1e-6,
                    "cell ({x},{y}): {est} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn enumerate_handles_trivial_cases() {
        let t = Table::from_numeric_columns(&["a"], vec![vec![0.0, 1.0, 1.0, 2.0]]).unwrap();
        let model = ChowLiuModel::build(&t, 1.0).unwrap();
        assert_eq!(model.enumerate_exact(&Query::all()).unwrap(), 4.0);
        let invalid = Query::new(vec![Predicate::invalid(0, 5.0, 1.0)]);
        assert_eq!(model.enumerate_exact(&invalid).unwrap(), 0.0);
    }

    #[test]
    fn enumerate_rejects_oversized_regions() {
        // multipliers coprime with 200 keep all three domains at 200 values
        let cols: Vec<Vec<f64>> = [7usize, 9, 11]
            .iter()
            .map(|&m| (0..400).map(|i| ((i * m) % 200) as f64).collect())
            .collect();
        let t = Table::from_numeric_columns(&["a", "b", "c"], cols).unwrap();
        let model = ChowLiuModel::build(&t, 1.0).unwrap();
        let q = Query::new(vec![
            Predicate::closed(0, 0.0, 199.0),
            Predicate::closed(1, 0.0, 199.0),
            Predicate::closed(2, 0.0, 199.0),
        ]);
        assert!(matches!(
            model.enumerate_exact(&q),
            Err(Error::RegionTooLarge(_))
        ));
    }

    #[test]
    fn progressive_sampling_tracks_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..8_000).map(|_| rng.gen_range(0..12) as f64).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|&v| {
                if rng.gen_bool(0.5) {
                    v
                } else {
                    rng.gen_range(0..12) as f64
                }
            })
            .collect();
        let t = Table::from_numeric_columns(&["a", "b"], vec![a, b]).unwrap();
        let model = ChowLiuModel::build(&t, 1.0).unwrap();
        let cfg = ProgressiveSamplerConfig { samples: 512 };
        for probe in 0..40u64 {
            let mut qrng = ChaCha8Rng::seed_from_u64(probe);
            let lo = qrng.gen_range(0..10) as f64;
            let hi = qrng.gen_range(lo as usize..12) as f64;
            let q = Query::new(vec![
                Predicate::closed(1, lo, hi),
                Predicate::closed(0, qrng.gen_range(0.0..4.0), qrng.gen_range(6.0..11.0)),
            ]);
            let exact = model.enumerate_exact(&q).unwrap();
            let (est, se) = progressive_estimate_detailed(&model, &q, cfg, probe);
            assert!(
                (est - exact).abs() <= 5.0 * se + 1e-9,
                "probe {probe}: est {est}, exact {exact}, se {se}"
            );
        }
    }

    #[test]
    fn cpt_rows_are_distributions() {
        let t = crate::synth::gen_synth(&crate::synth::SynthConfig {
            skew: 1.0,
            correlation: 0.5,
            domain_size: 30,
            rows: 5000,
            seed: 9,
        })
        .unwrap();
        let model = ChowLiuModel::build(&t, 1.0).unwrap();
        for rows in &model.cpt {
            for row in rows {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "row sums to {sum}");
            }
        }
    }
}
