//! Second-order gradient boosting of regression trees on logistic loss.
//!
//! Each round fits a tree to the gradients `g = p - y` and hessians
//! `h = p (1 - p)` of the current margins, using exact greedy split search
//! on presorted sparse columns. Absent entries count as value 0.0 and are
//! routed by the same `value < threshold` comparison as stored entries, so
//! for non-negative features they default left.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::codec::{self, ModelKind, Reader, Writer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_reg: f64,
    pub min_child_weight: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            l2_leaf_reg: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::Config("gbdt n_rounds must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("gbdt max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("gbdt learning_rate must be in (0, 1]".into()));
        }
        if !(self.l2_leaf_reg >= 0.0) {
            return Err(Error::Config("gbdt l2_leaf_reg must be >= 0".into()));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::Config("gbdt min_child_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Compressed sparse rows with column indices sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Appends a row. Entries may come in any order; explicit zeros are dropped.
    pub fn push_row(&mut self, entries: &[(u32, f64)]) -> Result<()> {
        let mut row: Vec<(u32, f64)> = entries.iter().copied().filter(|&(_, v)| v != 0.0).collect();
        row.sort_by_key(|&(c, _)| c);
        for w in row.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!(
                    "duplicate column {} in row",
                    w[0].0
                )));
            }
        }
        for &(c, v) in &row {
            if c as usize >= self.n_cols {
                return Err(Error::invalid(format!(
                    "feature index {c} out of range ({} features)",
                    self.n_cols
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value in column {c}")));
            }
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
        Ok(())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = SparseMatrix::new(n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::invalid("ragged dense matrix"));
            }
            let entries: Vec<(u32, f64)> =
                r.iter().enumerate().map(|(c, &v)| (c as u32, v)).collect();
            m.push_row(&entries)?;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, col: u32) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&col).map_or(0.0, |k| vals[k])
    }

    /// Per-column `(row, value)` lists sorted by value, then row.
    fn columns(&self) -> Vec<Vec<(u32, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows() {
            let (c, v) = self.row(i);
            for (&c, &v) in c.iter().zip(v) {
                cols[c as usize].push((i as u32, v));
            }
        }
        cols.par_iter_mut().for_each(|col| {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        });
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// Binary tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    fn route(&self, value_of: impl Fn(u32) -> f64) -> usize {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { .. } => return k,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if value_of(feature) < threshold {
                        left
                    } else {
                        right
                    } as usize;
                }
            }
        }
    }

    /// Leaf weight reached by a sparse row (columns sorted ascending).
    pub fn eval(&self, cols: &[u32], vals: &[f64]) -> f64 {
        let leaf = self.route(|f| cols.binary_search(&f).map_or(0.0, |k| vals[k]));
        match self.nodes[leaf] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, left as usize).max(go(t, right as usize))
                }
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { weight } = n {
                *weight *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: u32,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of margins against 0/1 targets.
pub fn log_loss(margins: &[f64], targets: &[f64]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(targets)
        // log(1 + e^m) - y m, written to stay finite for large |m|
        .map(|(&m, &y)| m.max(0.0) + (-m.abs()).exp().ln_1p() - y * m)
        .sum();
    total / margins.len() as f64
}

impl GbdtModel {
    pub fn margin(&self, cols: &[u32], vals: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.eval(cols, vals))
                .sum::<f64>()
    }

    /// sigmoid(base_score + sum of learning_rate * leaf weight).
    pub fn predict_row(&self, row: &[(u32, f64)]) -> Result<f64> {
        let mut row: Vec<(u32, f64)> = row.to_vec();
        row.sort_by_key(|&(c, _)| c);
        if let Some(&(c, _)) = row.iter().find(|&&(c, _)| c >= self.n_features) {
            return Err(Error::invalid(format!(
                "feature index {c} out of range ({} features)",
                self.n_features
            )));
        }
        let (cols, vals): (Vec<u32>, Vec<f64>) = row.into_iter().unzip();
        Ok(sigmoid(self.margin(&cols, &vals)))
    }

    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() > self.n_features as usize {
            return Err(Error::invalid(format!(
                "matrix has {} features, model expects {}",
                x.n_cols(),
                self.n_features
            )));
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let (c, v) = x.row(i);
                sigmoid(self.margin(c, v))
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish(ModelKind::Gbdt)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = codec::open(bytes, ModelKind::Gbdt)?;
        let m = Self::decode(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64(self.base_score);
        w.f64(self.learning_rate);
        w.u32(self.n_features);
        w.u32(self.trees.len() as u32);
        for t in &self.trees {
            w.u32(t.nodes.len() as u32);
            for n in &t.nodes {
                match *n {
                    Node::Leaf { weight } => {
                        w.u8(0);
                        w.f64(weight);
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.u8(1);
                        w.u32(feature);
                        w.f64(threshold);
                        w.u32(left);
                        w.u32(right);
                    }
                }
            }
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let base_score = r.f64()?;
        let learning_rate = r.f64()?;
        let n_features = r.u32()?;
        let n_trees = r.u32()?;
        let mut trees = Vec::new();
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::new();
            for _ in 0..n_nodes {
                nodes.push(match r.u8()? {
                    0 => Node::Leaf { weight: r.f64()? },
                    1 => Node::Split {
                        feature: r.u32()?,
                        threshold: r.f64()?,
                        left: r.u32()?,
                        right: r.u32()?,
                    },
                    t => return Err(Error::Format(format!("bad tree node tag {t}"))),
                });
            }
            // Children must point forward, so routing always terminates.
            for (k, n) in nodes.iter().enumerate() {
                if let Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } = *n
                {
                    let ok = |c: u32| (c as usize) > k && (c as usize) < n_nodes;
                    if !ok(left) || !ok(right) || feature >= n_features {
                        return Err(Error::Format("corrupt tree structure".into()));
                    }
                }
            }
            if nodes.is_empty() {
                return Err(Error::Format("empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        Ok(GbdtModel {
            base_score,
            learning_rate,
            n_features,
            trees,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: u32,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: u32,
    threshold: f64,
}

/// Gains within this relative margin count as equal, so rounding noise
/// neither creates splits of zero true gain nor breaks ties.
const GAIN_RTOL: f64 = 1e-10;

fn beats(gain: f64, incumbent: f64) -> bool {
    gain > incumbent + GAIN_RTOL * incumbent.abs()
}

fn score(s: Stats, lambda: f64) -> f64 {
    s.g * s.g / (s.h + lambda)
}

fn leaf_weight(s: Stats, lambda: f64) -> f64 {
    -s.g / (s.h + lambda)
}

struct SplitContext<'a> {
    params: &'a GbdtParams,
    totals: &'a [Stats],
}

impl SplitContext<'_> {
    fn consider(
        &self,
        best: &mut Option<Candidate>,
        slot: usize,
        left: Stats,
        feature: u32,
        threshold: f64,
    ) {
        let total = self.totals[slot];
        let right = total.minus(left);
        if left.n == 0 || right.n == 0 {
            return;
        }
        let mcw = self.params.min_child_weight;
        if left.h < mcw || right.h < mcw {
            return;
        }
        let lambda = self.params.l2_leaf_reg;
        let children = score(left, lambda) + score(right, lambda);
        let gain = 0.5 * (children - score(total, lambda));
        if gain > 0.5 * GAIN_RTOL * children && best.is_none_or(|b| beats(gain, b.gain)) {
            *best = Some(Candidate {
                gain,
                feature,
                threshold,
            });
        }
    }
}

/// Best split of every frontier slot over one column.
///
/// Within a slot the column's entries are visited in ascending value order,
/// with the implicit zeros inserted as one group at value 0.0.
fn scan_column(
    ctx: &SplitContext<'_>,
    feature: u32,
    column: &[(u32, f64)],
    slot_of: &[u32],
    grad: &[f64],
    hess: &[f64],
    best: &mut [Option<Candidate>],
) {
    let n_slots = ctx.totals.len();
    let mut nonzero = vec![Stats::default(); n_slots];
    for &(row, _) in column {
        let s = slot_of[row as usize];
        if s != NO_SLOT {
            nonzero[s as usize].add(grad[row as usize], hess[row as usize]);
        }
    }
    let zeros: Vec<Stats> = (0..n_slots)
        .map(|s| ctx.totals[s].minus(nonzero[s]))
        .collect();
    let mut acc = vec![Stats::default(); n_slots];
    let mut last: Vec<Option<f64>> = vec![None; n_slots];
    let mut zero_done = vec![false; n_slots];

    let insert_zero =
        |s: usize, acc: &mut [Stats], last: &mut [Option<f64>], best: &mut [Option<Candidate>]| {
            if zeros[s].n > 0 {
                if let Some(prev) = last[s] {
                    ctx.consider(&mut best[s], s, acc[s], feature, prev / 2.0);
                }
                acc[s].g += zeros[s].g;
                acc[s].h += zeros[s].h;
                acc[s].n += zeros[s].n;
                last[s] = Some(0.0);
            }
        };

    for &(row, v) in column {
        let s = slot_of[row as usize];
        if s == NO_SLOT {
            continue;
        }
        let s = s as usize;
        if !zero_done[s] && v > 0.0 {
            insert_zero(s, &mut acc, &mut last, best);
            zero_done[s] = true;
        }
        if let Some(prev) = last[s] {
            if prev < v {
                ctx.consider(&mut best[s], s, acc[s], feature, prev + (v - prev) / 2.0);
            }
        }
        acc[s].add(grad[row as usize], hess[row as usize]);
        last[s] = Some(v);
    }
    for s in 0..n_slots {
        if !zero_done[s] {
            insert_zero(s, &mut acc, &mut last, best);
        }
    }
}

const NO_SLOT: u32 = u32::MAX;
const COLUMN_CHUNK: usize = 256;

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if beats(y.gain, x.gain) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Grows one tree level by level. Returns the tree and the leaf node index
/// each training row ends in.
fn grow_tree(
    x: &SparseMatrix,
    columns: &[Vec<(u32, f64)>],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> (Tree, Vec<u32>) {
    let n = x.n_rows();
    let lambda = params.l2_leaf_reg;
    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    let mut slot_of = vec![0u32; n];
    let mut leaf_of = vec![0u32; n];
    let mut root = Stats::default();
    for i in 0..n {
        root.add(grad[i], hess[i]);
    }
    // frontier slot -> (node index, stats)
    let mut frontier: Vec<(usize, Stats)> = vec![(0, root)];

    for depth in 0..=params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let best: Vec<Option<Candidate>> = if depth == params.max_depth {
            vec![None; frontier.len()]
        } else {
            let totals: Vec<Stats> = frontier.iter().map(|f| f.1).collect();
            let ctx = SplitContext {
                params,
                totals: &totals,
            };
            let per_chunk: Vec<Vec<Option<Candidate>>> = columns
                .par_chunks(COLUMN_CHUNK)
                .enumerate()
                .map(|(ci, chunk)| {
                    let mut best = vec![None; totals.len()];
                    for (k, col) in chunk.iter().enumerate() {
                        let feature = (ci * COLUMN_CHUNK + k) as u32;
                        scan_column(&ctx, feature, col, &slot_of, grad, hess, &mut best);
                    }
                    best
                })
                .collect();
            // Sequential reduction in column order keeps ties on the lowest feature.
            let mut best = vec![None; totals.len()];
            for chunk in per_chunk {
                for (b, c) in best.iter_mut().zip(chunk) {
                    *b = better(*b, c);
                }
            }
            best
        };

        let mut next: Vec<(usize, Stats)> = Vec::new();
        // slot -> (left slot, right slot) for the next level
        let mut children: Vec<Option<(u32, u32, Candidate)>> = vec![None; frontier.len()];
        for (s, &(node, stats)) in frontier.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes[node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    let ls = next.len() as u32;
                    next.push((left, Stats::default()));
                    next.push((left + 1, Stats::default()));
                    children[s] = Some((ls, ls + 1, c));
                }
                None => {
                    nodes[node] = Node::Leaf {
                        weight: leaf_weight(stats, lambda),
                    }
                }
            }
        }
        for i in 0..n {
            let s = slot_of[i];
            if s == NO_SLOT {
                continue;
            }
            match children[s as usize] {
                Some((l, r, c)) => {
                    let go_left = x.get(i, c.feature) < c.threshold;
                    let t = if go_left { l } else { r };
                    slot_of[i] = t;
                    next[t as usize].1.add(grad[i], hess[i]);
                }
                None => {
                    leaf_of[i] = frontier[s as usize].0 as u32;
                    slot_of[i] = NO_SLOT;
                }
            }
        }
        frontier = next;
    }
    (Tree { nodes }, leaf_of)
}

/// Fits a single tree to given gradients and hessians.
pub fn build_tree(
    x: &SparseMatrix,
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> Result<Tree> {
    if grad.len() != x.n_rows() || hess.len() != x.n_rows() {
        return Err(Error::invalid("gradient length does not match the matrix"));
    }
    if x.n_rows() == 0 {
        return Err(Error::invalid("empty feature matrix"));
    }
    params.validate()?;
    Ok(grow_tree(x, &x.columns(), grad, hess, params).0)
}

/// Per-round training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct GbdtTraining {
    pub model: GbdtModel,
    /// Training log-loss before the first tree and after every round.
    pub history: Vec<RoundRecord>,
}

/// Boosted training on logistic loss.
///
/// If a round would raise the training loss, the new tree's leaves are
/// halved until it does not (at most 30 times); a tree that cannot improve
/// the loss ends training early.
pub fn train_gbdt(x: &SparseMatrix, labels: &[bool], params: &GbdtParams) -> Result<GbdtTraining> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(Error::invalid("empty feature matrix"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        return Err(Error::invalid("training labels contain a single class"));
    }
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let rate = positives as f64 / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let columns = x.columns();

    let mut margins = vec![base_score; n];
    let mut loss = log_loss(&margins, &targets);
    let mut history = vec![RoundRecord { round: 0, loss }];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let eta = params.learning_rate;

    for round in 1..=params.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - targets[i];
            hess[i] = p * (1.0 - p);
        }
        let (mut tree, leaf_of) = grow_tree(x, &columns, &grad, &hess, params);
        let leaf_value = |tree: &Tree, i: usize| match tree.nodes[leaf_of[i] as usize] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!(),
        };
        let mut accepted = None;
        for _ in 0..=30 {
            let candidate: Vec<f64> = (0..n)
                .map(|i| margins[i] + eta * leaf_value(&tree, i))
                .collect();
            let new_loss = log_loss(&candidate, &targets);
            if new_loss <= loss {
                accepted = Some((candidate, new_loss));
                break;
            }
            tree.scale(0.5);
        }
        let Some((candidate, new_loss)) = accepted else {
            break;
        };
        margins = candidate;
        loss = new_loss;
        trees.push(tree);
        history.push(RoundRecord { round, loss });
    }

    Ok(GbdtTraining {
        model: GbdtModel {
            base_score,
            learning_rate: eta,
            n_features: x.n_cols() as u32,
            trees,
        },
        history,
    })
}
