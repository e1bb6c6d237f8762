//! Locally constant potentials, pressure and Markov–Gibbs measures.
//!
//! A potential of depth `m` is a table indexed by admissible words of length
//! `m`; `φ(α) = table[α|m]`. Every such potential is recoded as a weighted
//! transition matrix on blocks of length `max(m−1, 1)`, which turns pressure
//! into a Perron eigenvalue and the Gibbs measure into a stationary Markov
//! chain. For a depth-`m` potential the Birkhoff sum `φⁿ` is constant on
//! cylinders of length `n+m−1`; sup/inf over a length-`n` cylinder are taken
//! over the `m−1` following symbols.
//!
//! Gibbs constants are empirical: they are maxima/minima over all cylinders
//! up to a finite depth and are reported as verified to that depth only.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::symbolic::{Symbol, SymbolicSystem, Word};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;

/// Locally constant potential.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    depth: usize,
    alphabet: usize,
    table: BTreeMap<Word, f64>,
    // base-M encoding of the window -> value; NaN marks inadmissible windows
    dense: Vec<f64>,
}

impl Potential {
    /// Validates that `table` covers exactly the admissible `depth`-words.
    pub fn from_table(sys: &SymbolicSystem, depth: usize, table: BTreeMap<Word, f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::input("potential depth must be at least 1"));
        }
        let words = sys.admissible_words(depth, None)?;
        if words.len() != table.len() {
            return Err(Error::input(format!(
                "potential table has {} entries but there are {} admissible words of length {depth}",
                table.len(),
                words.len()
            )));
        }
        for w in &words {
            match table.get(w) {
                None => return Err(Error::input(format!("potential table misses word {w}"))),
                Some(v) if !v.is_finite() => {
                    return Err(Error::input(format!("potential value for {w} is not finite")))
                }
                _ => {}
            }
        }
        Ok(Self::assemble(depth, sys.alphabet_size(), table))
    }

    fn assemble(depth: usize, alphabet: usize, table: BTreeMap<Word, f64>) -> Self {
        let mut dense = vec![f64::NAN; alphabet.pow(depth as u32)];
        for (w, &v) in &table {
            dense[encode(&w.0, alphabet)] = v;
        }
        Potential { depth, alphabet, table, dense }
    }

    /// Depth-1 potential `φ(α) = values[α₀]`.
    pub fn depth1(sys: &SymbolicSystem, values: &[f64]) -> Result<Self> {
        if values.len() != sys.alphabet_size() {
            return Err(Error::input("one potential value per symbol required"));
        }
        let table = values.iter().enumerate().map(|(i, &v)| (Word::single(i), v)).collect();
        Self::from_table(sys, 1, table)
    }

    /// Depth-2 potential from a function on admissible pairs.
    pub fn depth2(sys: &SymbolicSystem, f: impl Fn(Symbol, Symbol) -> f64) -> Result<Self> {
        let table = sys
            .admissible_words(2, None)?
            .into_iter()
            .map(|w| {
                let v = f(w.0[0], w.0[1]);
                (w, v)
            })
            .collect();
        Self::from_table(sys, 2, table)
    }

    pub fn constant(sys: &SymbolicSystem, c: f64) -> Result<Self> {
        Self::depth1(sys, &vec![c; sys.alphabet_size()])
    }

    /// Bernoulli weights: `φ(i) = log pᵢ`.
    pub fn bernoulli(sys: &SymbolicSystem, probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::input("Bernoulli weights must be positive"));
        }
        let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        Self::depth1(sys, &logs)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn table(&self) -> &BTreeMap<Word, f64> {
        &self.table
    }

    /// Table value for a window of length `depth`.
    pub fn value(&self, w: &[Symbol]) -> Option<f64> {
        if w.len() != self.depth || w.iter().any(|&s| s >= self.alphabet) {
            return None;
        }
        let v = self.dense[encode(w, self.alphabet)];
        (!v.is_nan()).then_some(v)
    }

    /// Adds a constant to every entry.
    pub fn shifted(&self, c: f64) -> Potential {
        let table = self.table.iter().map(|(w, v)| (w.clone(), v + c)).collect();
        Self::assemble(self.depth, self.alphabet, table)
    }

    pub fn scaled(&self, t: f64) -> Potential {
        let table = self.table.iter().map(|(w, v)| (w.clone(), v * t)).collect();
        Self::assemble(self.depth, self.alphabet, table)
    }

    /// `var_n(φ)`: largest spread of table values sharing an `n`-prefix.
    pub fn variation(&self, n: usize) -> f64 {
        if n >= self.depth {
            return 0.0;
        }
        let mut groups: BTreeMap<&[Symbol], (f64, f64)> = BTreeMap::new();
        for (w, &v) in &self.table {
            let e = groups.entry(&w.0[..n]).or_insert((v, v));
            e.0 = e.0.min(v);
            e.1 = e.1.max(v);
        }
        groups.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }

    /// `Σ_l var_l(φ)`; finite because the potential is locally constant.
    pub fn variation_sum(&self) -> f64 {
        (0..self.depth).map(|l| self.variation(l)).sum()
    }

    /// Maximal well-defined Birkhoff sum along `w`: the sum of table values
    /// over all length-`depth` windows of `w`.
    pub fn birkhoff_sum(&self, w: &Word) -> Result<f64> {
        if w.len() < self.depth {
            return Err(Error::input(format!(
                "word of length {} shorter than potential depth {}",
                w.len(),
                self.depth
            )));
        }
        w.0.windows(self.depth)
            .map(|win| {
                self.value(win)
                    .ok_or_else(|| Error::input(format!("window {} is not admissible", Word(win.to_vec()))))
            })
            .sum()
    }
}

fn encode(w: &[Symbol], alphabet: usize) -> usize {
    w.iter().fold(0, |acc, &s| acc * alphabet + s)
}

/// Weighted transition matrix on blocks of length `state_len`.
#[derive(Clone, Debug)]
struct BlockRecoding {
    state_len: usize,
    states: Vec<Vec<Symbol>>,
    index: HashMap<Vec<Symbol>, usize>,
    // dense, row-major; 0.0 where no edge
    weights: Vec<f64>,
}

impl BlockRecoding {
    fn new(sys: &SymbolicSystem, p: &Potential) -> Result<Self> {
        let m = p.depth();
        let state_len = (m.max(2)) - 1;
        let states: Vec<Vec<Symbol>> = sys
            .admissible_words(state_len, None)?
            .into_iter()
            .map(|w| w.0)
            .collect();
        let n = states.len();
        let index: HashMap<Vec<Symbol>, usize> =
            states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut weights = vec![0.0; n * n];
        for (u, su) in states.iter().enumerate() {
            let last = *su.last().expect("non-empty block");
            for j in sys.successors(last) {
                let mut sv: Vec<Symbol> = su[1..].to_vec();
                sv.push(j);
                let v = index[&sv];
                let value = if m == 1 {
                    p.value(&su[..1])
                } else {
                    let mut window = su.clone();
                    window.push(j);
                    p.value(&window)
                }
                .ok_or_else(|| Error::Internal("potential window missing".into()))?;
                weights[u * n + v] = value.exp();
            }
        }
        Ok(BlockRecoding { state_len, states, index, weights })
    }

    fn n(&self) -> usize {
        self.states.len()
    }
}

/// Perron data of a nonnegative irreducible matrix.
#[derive(Clone, Debug)]
struct Perron {
    rho: f64,
    right: Vec<f64>,
    left: Vec<f64>,
}

fn power_iterate(n: usize, apply: impl Fn(&[f64], &mut [f64]), shift: f64) -> Result<Vec<f64>> {
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut best_dv = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..POWER_MAX_ITERS {
        apply(&v, &mut next);
        for (x, y) in next.iter_mut().zip(&v) {
            *x += shift * y;
        }
        let norm: f64 = next.iter().sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Internal("power iteration lost positivity".into()));
        }
        for x in next.iter_mut() {
            *x /= norm;
        }
        let scale = next.iter().cloned().fold(0.0, f64::max);
        let dv = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        std::mem::swap(&mut v, &mut next);
        if dv <= POWER_TOL {
            converged = true;
        }
        // past the tolerance, keep polishing until rounding noise stops progress
        if dv < best_dv {
            best_dv = dv;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if converged && (dv == 0.0 || stalled >= 3) {
            return Ok(v);
        }
    }
    if converged {
        return Ok(v);
    }
    Err(Error::Internal(format!(
        "power iteration did not reach tolerance {POWER_TOL} in {POWER_MAX_ITERS} iterations"
    )))
}

fn perron(rec: &BlockRecoding) -> Result<Perron> {
    let n = rec.n();
    let w = &rec.weights;
    let row_sums: Vec<f64> = (0..n).map(|i| w[i * n..(i + 1) * n].iter().sum()).collect();
    let lo = row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = row_sums.iter().cloned().fold(0.0, f64::max);
    // W + sI is primitive for irreducible W; s near ρ damps the -ρ eigenvalue of periodic W.
    let shift = 0.5 * (lo + hi);
    let right = power_iterate(
        n,
        |x, y| {
            for i in 0..n {
                y[i] = w[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
            }
        },
        shift,
    )?;
    let left = power_iterate(
        n,
        |x, y| {
            for j in 0..n {
                y[j] = (0..n).map(|i| x[i] * w[i * n + j]).sum();
            }
        },
        shift,
    )?;
    // Rayleigh quotient with the left vector: second-order accurate
    let mut num = 0.0;
    for i in 0..n {
        let wv: f64 = w[i * n..(i + 1) * n].iter().zip(&right).map(|(a, b)| a * b).sum();
        num += left[i] * wv;
    }
    let den: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    Ok(Perron { rho: num / den, right, left })
}

/// Topological pressure `P(φ) = log ρ(W_φ)`.
pub fn pressure(sys: &SymbolicSystem, p: &Potential) -> Result<f64> {
    if !sys.is_transitive() {
        return Err(Error::NotTransitive);
    }
    let rec = BlockRecoding::new(sys, p)?;
    Ok(perron(&rec)?.rho.ln())
}

/// Invariant Gibbs measure of a locally constant potential, represented as a
/// stationary Markov chain on blocks.
#[derive(Clone, Debug)]
pub struct GibbsModel {
    system: SymbolicSystem,
    potential: Potential,
    pressure: f64,
    state_len: usize,
    states: Vec<Vec<Symbol>>,
    index: HashMap<Vec<Symbol>, usize>,
    stationary: Vec<f64>,
    // per state: (next state, appended symbol, probability), symbols ascending
    transitions: Vec<Vec<(usize, Symbol, f64)>>,
    symbol_masses: Vec<f64>,
}

pub fn build_gibbs(sys: &SymbolicSystem, p: &Potential) -> Result<GibbsModel> {
    if !sys.is_transitive() {
        return Err(Error::NotTransitive);
    }
    if !sys.is_mixing() {
        return Err(Error::NotMixing { period: sys.period() });
    }
    let rec = BlockRecoding::new(sys, p)?;
    let Perron { rho, right, left } = perron(&rec)?;
    let n = rec.n();
    let mut transitions = Vec::with_capacity(n);
    for u in 0..n {
        let mut row: Vec<(usize, Symbol, f64)> = Vec::new();
        for v in 0..n {
            let wt = rec.weights[u * n + v];
            if wt > 0.0 {
                let sym = *rec.states[v].last().expect("non-empty block");
                row.push((v, sym, wt * right[v] / (rho * right[u])));
            }
        }
        let total: f64 = row.iter().map(|e| e.2).sum();
        for e in row.iter_mut() {
            e.2 /= total;
        }
        row.sort_by_key(|e| e.1);
        transitions.push(row);
    }
    let mut stationary: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l * r).collect();
    let total: f64 = stationary.iter().sum();
    for x in stationary.iter_mut() {
        *x /= total;
    }
    // polish so that πP = π holds to rounding for the normalized rows
    for _ in 0..200 {
        let mut next = vec![0.0; n];
        for (u, row) in transitions.iter().enumerate() {
            for &(v, _, pr) in row {
                next[v] += stationary[u] * pr;
            }
        }
        let s: f64 = next.iter().sum();
        let diff = next.iter().zip(&stationary).map(|(a, b)| (a / s - b).abs()).fold(0.0, f64::max);
        for (x, y) in stationary.iter_mut().zip(next) {
            *x = y / s;
        }
        if diff < 1e-17 {
            break;
        }
    }
    let mut symbol_masses = vec![0.0; sys.alphabet_size()];
    for (u, s) in rec.states.iter().enumerate() {
        symbol_masses[s[0]] += stationary[u];
    }
    Ok(GibbsModel {
        system: sys.clone(),
        potential: p.clone(),
        pressure: rho.ln(),
        state_len: rec.state_len,
        states: rec.states,
        index: rec.index,
        stationary,
        transitions,
        symbol_masses,
    })
}

impl GibbsModel {
    pub fn system(&self) -> &SymbolicSystem {
        &self.system
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    /// `μ([i])` per symbol.
    pub fn symbol_masses(&self) -> &[f64] {
        &self.symbol_masses
    }

    /// Length of the Markov state blocks (1 for potentials of depth ≤ 2).
    pub fn state_len(&self) -> usize {
        self.state_len
    }

    /// Transition probability between consecutive symbols, for models whose
    /// states are single symbols.
    pub fn symbol_transition(&self, from: Symbol, to: Symbol) -> Option<f64> {
        if self.state_len != 1 {
            return None;
        }
        let u = self.index[&vec![from]];
        Some(self.transitions[u].iter().find(|e| e.1 == to).map_or(0.0, |e| e.2))
    }

    /// Entropy rate `−Σ π_u P_uv log P_uv` of the chain.
    pub fn entropy_rate(&self) -> f64 {
        let mut h = 0.0;
        for (u, row) in self.transitions.iter().enumerate() {
            for &(_, _, p) in row {
                if p > 0.0 {
                    h -= self.stationary[u] * p * p.ln();
                }
            }
        }
        h
    }

    /// `μ([w])`; zero for inadmissible words, one for the empty word.
    pub fn cylinder_mass(&self, w: &[Symbol]) -> f64 {
        if w.is_empty() {
            return 1.0;
        }
        if w.iter().any(|&s| s >= self.system.alphabet_size()) {
            return 0.0;
        }
        if w.len() < self.state_len {
            let mut total = 0.0;
            let mut ext = w.to_vec();
            self.sum_extensions(&mut ext, &mut total);
            return total;
        }
        let Some(&start) = self.index.get(&w[..self.state_len]) else {
            return 0.0;
        };
        let mut mass = self.stationary[start];
        let mut state = start;
        for &s in &w[self.state_len..] {
            match self.transitions[state].iter().find(|e| e.1 == s) {
                Some(&(v, _, p)) => {
                    mass *= p;
                    state = v;
                }
                None => return 0.0,
            }
        }
        mass
    }

    /// `log μ([w])`, accurate for words whose mass underflows `f64`.
    pub fn log_cylinder_mass(&self, w: &[Symbol]) -> f64 {
        if w.len() <= self.state_len || w.iter().any(|&s| s >= self.system.alphabet_size()) {
            return self.cylinder_mass(w).ln();
        }
        let Some(&start) = self.index.get(&w[..self.state_len]) else {
            return f64::NEG_INFINITY;
        };
        let mut log_mass = self.stationary[start].ln();
        let mut state = start;
        for &s in &w[self.state_len..] {
            match self.transitions[state].iter().find(|e| e.1 == s) {
                Some(&(v, _, p)) => {
                    log_mass += p.ln();
                    state = v;
                }
                None => return f64::NEG_INFINITY,
            }
        }
        log_mass
    }

    fn sum_extensions(&self, ext: &mut Vec<Symbol>, total: &mut f64) {
        if ext.len() == self.state_len {
            if let Some(&i) = self.index.get(ext.as_slice()) {
                *total += self.stationary[i];
            }
            return;
        }
        let last = *ext.last().expect("non-empty");
        for j in 0..self.system.alphabet_size() {
            if self.system.allowed(last, j) {
                ext.push(j);
                self.sum_extensions(ext, total);
                ext.pop();
            }
        }
    }

    /// Samples an admissible word of length `len` with probability `μ([w])`.
    pub fn sample_word<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Word {
        let u = pick(rng, self.stationary.iter().copied().enumerate());
        let mut word: Vec<Symbol> = self.states[u].clone();
        word.truncate(len);
        if len > self.state_len {
            self.extend_from_state(rng, u, &mut word, len);
        }
        Word(word)
    }

    /// Extends `prefix` to length `len` following the conditional law
    /// `μ(· | [prefix])`. `prefix` must be admissible with positive mass.
    pub fn extend_word<R: Rng + ?Sized>(&self, rng: &mut R, prefix: &[Symbol], len: usize) -> Word {
        let mut word = prefix.to_vec();
        if word.len() >= len {
            return Word(word);
        }
        if word.len() < self.state_len {
            // choose a full block consistent with the prefix
            let candidates: Vec<(usize, f64)> = self
                .states
                .iter()
                .enumerate()
                .filter(|(_, s)| s.starts_with(&word))
                .map(|(i, _)| (i, self.stationary[i]))
                .collect();
            let u = pick(rng, candidates.into_iter());
            word = self.states[u].clone();
            word.truncate(len.max(prefix.len()));
            if word.len() >= len {
                return Word(word);
            }
        }
        let state = self.index[&word[word.len() - self.state_len..]];
        self.extend_from_state(rng, state, &mut word, len);
        Word(word)
    }

    fn extend_from_state<R: Rng + ?Sized>(&self, rng: &mut R, mut state: usize, word: &mut Vec<Symbol>, len: usize) {
        while word.len() < len {
            let row = &self.transitions[state];
            let k = pick(rng, row.iter().enumerate().map(|(k, e)| (k, e.2)));
            let (v, s, _) = row[k];
            word.push(s);
            state = v;
        }
    }

    /// Sup and inf of `φⁿ` over the cylinder `[w]`, `n = |w|`.
    fn birkhoff_range(&self, w: &[Symbol], memo: &mut HashMap<Vec<Symbol>, (f64, f64)>) -> (f64, f64) {
        let m = self.potential.depth();
        let n = w.len();
        let complete: f64 = if n >= m {
            w.windows(m).take(n + 1 - m).map(|win| self.potential.value(win).unwrap_or(0.0)).sum()
        } else {
            0.0
        };
        if m == 1 {
            return (complete, complete);
        }
        let start = (n + 1).saturating_sub(m);
        let suffix = w[start..].to_vec();
        let (hi, lo) = *memo.entry(suffix.clone()).or_insert_with(|| {
            let mut best = (f64::NEG_INFINITY, f64::INFINITY);
            let mut ext = suffix.clone();
            let target = suffix.len() + m - 1;
            self.tail_range(&mut ext, suffix.len(), target, &mut best);
            best
        });
        (complete + hi, complete + lo)
    }

    // windows starting inside the original suffix (index < base), completed by extension
    fn tail_range(&self, ext: &mut Vec<Symbol>, base: usize, target: usize, best: &mut (f64, f64)) {
        let m = self.potential.depth();
        if ext.len() == target {
            let s: f64 = (0..base).map(|l| self.potential.value(&ext[l..l + m]).unwrap_or(0.0)).sum();
            best.0 = best.0.max(s);
            best.1 = best.1.min(s);
            return;
        }
        let last = *ext.last().expect("non-empty");
        for j in 0..self.system.alphabet_size() {
            if self.system.allowed(last, j) {
                ext.push(j);
                self.tail_range(ext, base, target, best);
                ext.pop();
            }
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = (usize, f64)> + Clone) -> usize {
    let total: f64 = weights.clone().map(|e| e.1).sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// Empirical Gibbs constants over all cylinders up to a finite depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GibbsBounds {
    pub c1: f64,
    pub c2: f64,
    /// Constants are verified to this cylinder length only.
    pub depth: usize,
}

/// `C1 = min μ([w]) / exp(sup φⁿ − nP)`, `C2 = max μ([w]) / exp(inf φⁿ − nP)`
/// over admissible `w` with `1 ≤ |w| ≤ depth`.
pub fn gibbs_ratio_bounds(g: &GibbsModel, depth: usize) -> Result<GibbsBounds> {
    if depth == 0 {
        return Err(Error::input("depth must be at least 1"));
    }
    let total: u128 = (1..=depth).map(|k| g.system.count_words(k, None)).sum();
    if total > crate::symbolic::DEFAULT_WORD_CAP * 10 {
        return Err(Error::cap("Gibbs cylinders", total, crate::symbolic::DEFAULT_WORD_CAP * 10));
    }
    let mut walk = BoundsWalk::new(g, depth);
    for first in 0..g.system.alphabet_size() {
        walk.word.push(first);
        let mass = g.cylinder_mass(&walk.word);
        let state = (g.state_len == 1).then(|| g.index[&walk.word]);
        let complete = if g.potential.depth() == 1 { g.potential.value(&walk.word).unwrap_or(0.0) } else { 0.0 };
        walk.visit(mass, complete, state, first % walk.tail_modulus);
        walk.word.pop();
    }
    let (c1, c2) = (walk.c1, walk.c2);
    Ok(GibbsBounds { c1, c2, depth })
}

/// Depth-first walk over cylinders carrying the mass and the Birkhoff sum of
/// the windows that lie inside the word, so each child costs O(1).
struct BoundsWalk<'a> {
    g: &'a GibbsModel,
    depth: usize,
    word: Vec<Symbol>,
    // sup/inf of the windows that reach past the word, keyed by the base-M
    // code of its last m−1 symbols
    tails: Vec<Option<(f64, f64)>>,
    short_tails: HashMap<Vec<Symbol>, (f64, f64)>,
    tail_modulus: usize,
    c1: f64,
    c2: f64,
}

impl<'a> BoundsWalk<'a> {
    fn new(g: &'a GibbsModel, depth: usize) -> Self {
        let m = g.potential.depth();
        let modulus = g.system.alphabet_size().pow(m as u32 - 1);
        BoundsWalk {
            g,
            depth,
            word: Vec::with_capacity(depth),
            tails: vec![None; if m > 1 { modulus } else { 0 }],
            short_tails: HashMap::new(),
            tail_modulus: modulus,
            c1: f64::INFINITY,
            c2: 0.0,
        }
    }

    fn tail(&mut self, code: usize) -> (f64, f64) {
        let g = self.g;
        let m = g.potential.depth();
        let n = self.word.len();
        if m == 1 {
            return (0.0, 0.0);
        }
        let mut scratch = HashMap::new();
        if n >= m - 1 {
            let suffix = &self.word[n + 1 - m..];
            *self.tails[code].get_or_insert_with(|| g.birkhoff_range(suffix, &mut scratch))
        } else {
            let word = self.word.clone();
            *self.short_tails.entry(word).or_insert_with_key(|w| g.birkhoff_range(w, &mut scratch))
        }
    }

    fn visit(&mut self, mass: f64, complete: f64, state: Option<usize>, code: usize) {
        let g = self.g;
        let n = self.word.len();
        let (hi, lo) = self.tail(code);
        let np = n as f64 * g.pressure;
        self.c1 = self.c1.min(mass / (complete + hi - np).exp());
        self.c2 = self.c2.max(mass / (complete + lo - np).exp());
        if n == self.depth {
            return;
        }
        let m = g.potential.depth();
        let last = self.word[n - 1];
        for j in 0..g.system.alphabet_size() {
            if !g.system.allowed(last, j) {
                continue;
            }
            self.word.push(j);
            let added = if n + 1 >= m { g.potential.value(&self.word[n + 1 - m..]).unwrap_or(0.0) } else { 0.0 };
            let (child_mass, child_state) = match state {
                Some(u) => match g.transitions[u].iter().find(|e| e.1 == j) {
                    Some(&(v, _, p)) => (mass * p, Some(v)),
                    None => (0.0, None),
                },
                None => {
                    let cm = g.cylinder_mass(&self.word);
                    let st = (self.word.len() == g.state_len).then(|| g.index.get(&self.word).copied()).flatten();
                    (cm, st)
                }
            };
            let child_code = (code * g.system.alphabet_size() + j) % self.tail_modulus;
            if child_mass > 0.0 {
                self.visit(child_mass, complete + added, child_state, child_code);
            }
            self.word.pop();
        }
    }
}

/// Min and max of `μ([uv]) / (μ([u]) μ([v]))` over admissible `uv` with
/// `1 ≤ |u|, |v| ≤ depth`.
pub fn quasi_bernoulli_ratio(g: &GibbsModel, depth: usize) -> Result<(f64, f64)> {
    const PAIR_CAP: u128 = 50_000_000;
    let mut words: Vec<(Vec<Symbol>, f64)> = Vec::new();
    let total: u128 = (1..=depth).map(|k| g.system.count_words(k, None)).sum();
    if total.saturating_mul(total) > PAIR_CAP {
        return Err(Error::cap("quasi-Bernoulli pairs", total.saturating_mul(total), PAIR_CAP));
    }
    g.system.visit_words(depth, |w| {
        words.push((w.to_vec(), g.cylinder_mass(w)));
        true
    });
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut joined = Vec::with_capacity(2 * depth);
    for (u, mu) in &words {
        let last = *u.last().expect("non-empty");
        for (v, mv) in &words {
            if !g.system.allowed(last, v[0]) {
                continue;
            }
            joined.clear();
            joined.extend_from_slice(u);
            joined.extend_from_slice(v);
            let r = g.cylinder_mass(&joined) / (mu * mv);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok((lo, hi))
}

/// Closed-form quasi-Bernoulli bracket `[(C1/C2²)e^{−Σvar}, (C2/C1²)e^{Σvar}]`,
/// with constants taken over cylinders of length up to `2·depth` so that they
/// cover every concatenation `uv` with `|u|, |v| ≤ depth`.
pub fn quasi_bernoulli_bracket(g: &GibbsModel, depth: usize) -> Result<(f64, f64)> {
    let b = gibbs_ratio_bounds(g, 2 * depth)?;
    let var = g.potential.variation_sum();
    Ok((b.c1 / (b.c2 * b.c2) * (-var).exp(), b.c2 / (b.c1 * b.c1) * var.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> SymbolicSystem {
        SymbolicSystem::new(vec![vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn w(v: &[usize]) -> Word {
        Word(v.to_vec())
    }

    #[test]
    fn variation_examples() {
        let g = golden();
        let p1 = Potential::depth1(&g, &[0.3, -1.0]).unwrap();
        assert_eq!(p1.variation(1), 0.0);
        assert_eq!(p1.variation(0), 1.3);
        let table: BTreeMap<Word, f64> =
            [(w(&[0, 0]), 0.0), (w(&[0, 1]), 1.0), (w(&[1, 0]), 4.0)].into_iter().collect();
        let p2 = Potential::from_table(&g, 2, table).unwrap();
        assert_eq!(p2.variation(1), 1.0);
        assert_eq!(p2.variation(0), 4.0);
        assert_eq!(p2.variation(2), 0.0);
    }

    #[test]
    fn birkhoff_examples() {
        let full = SymbolicSystem::full_shift(2).unwrap();
        let (a, b) = (0.7, -2.5);
        let p = Potential::depth1(&full, &[a, b]).unwrap();
        assert_eq!(p.birkhoff_sum(&w(&[0, 1, 0])).unwrap(), 2.0 * a + b);
        let table: BTreeMap<Word, f64> =
            [(w(&[0, 0]), 1.0), (w(&[0, 1]), 2.0), (w(&[1, 0]), 3.0)].into_iter().collect();
        let p2 = Potential::from_table(&golden(), 2, table).unwrap();
        assert_eq!(p2.birkhoff_sum(&w(&[0, 0, 1, 0])).unwrap(), 6.0);
        assert_eq!(p2.birkhoff_sum(&w(&[1, 0])).unwrap(), 3.0);
        assert!(p2.birkhoff_sum(&w(&[1])).is_err());
    }

    #[test]
    fn table_must_cover_admissible_words() {
        let table: BTreeMap<Word, f64> = [(w(&[0, 0]), 1.0), (w(&[0, 1]), 2.0)].into_iter().collect();
        assert!(Potential::from_table(&golden(), 2, table).is_err());
    }

    #[test]
    fn pressure_examples() {
        let full = SymbolicSystem::full_shift(3).unwrap();
        let c = 0.25;
        let p = pressure(&full, &Potential::constant(&full, c).unwrap()).unwrap();
        assert!((p - (3f64.ln() + c)).abs() < 1e-12);
        let g = pressure(&golden(), &Potential::constant(&golden(), 0.0).unwrap()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g - phi.ln()).abs() < 1e-12);
    }

    #[test]
    fn pressure_of_periodic_system() {
        let swap = SymbolicSystem::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let p = pressure(&swap, &Potential::depth1(&swap, &[0.0, 1.0]).unwrap()).unwrap();
        // ρ of [[0,1],[e,0]] is sqrt(e)
        assert!((p - 0.5).abs() < 1e-12);
        assert!(matches!(
            build_gibbs(&swap, &Potential::constant(&swap, 0.0).unwrap()),
            Err(Error::NotMixing { period: 2 })
        ));
        let id = SymbolicSystem::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(pressure(&id, &Potential::constant(&id, 0.0).unwrap()), Err(Error::NotTransitive));
    }

    #[test]
    fn bernoulli_masses() {
        let full = SymbolicSystem::full_shift(2).unwrap();
        let g = build_gibbs(&full, &Potential::bernoulli(&full, &[0.5, 0.5]).unwrap()).unwrap();
        for word in full.admissible_words(5, None).unwrap() {
            assert!((g.cylinder_mass(&word.0) - 1.0 / 32.0).abs() < 1e-15);
        }
        let g = build_gibbs(&full, &Potential::bernoulli(&full, &[1.0 / 3.0, 2.0 / 3.0]).unwrap()).unwrap();
        assert!((g.cylinder_mass(&[0, 1]) - 2.0 / 9.0).abs() < 1e-14);
        assert!(g.pressure().abs() < 1e-14);
    }

    #[test]
    fn parry_measure_on_golden_mean() {
        let s = golden();
        let g = build_gibbs(&s, &Potential::constant(&s, 0.0).unwrap()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g.symbol_transition(0, 0).unwrap() - 1.0 / phi).abs() < 1e-12);
        assert!((g.symbol_transition(0, 1).unwrap() - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((g.symbol_transition(1, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.symbol_masses()[0] - phi * phi / (1.0 + phi * phi)).abs() < 1e-12);
        assert_eq!(g.cylinder_mass(&[1, 1]), 0.0);
    }

    /// Brute force over every word, recomputing mass and Birkhoff range.
    fn naive_bounds(g: &GibbsModel, depth: usize) -> (f64, f64) {
        let mut memo = HashMap::new();
        let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
        g.system.visit_words(depth, |w| {
            let mass = g.cylinder_mass(w);
            let (hi, lo) = g.birkhoff_range(w, &mut memo);
            let np = w.len() as f64 * g.pressure;
            c1 = c1.min(mass / (hi - np).exp());
            c2 = c2.max(mass / (lo - np).exp());
            true
        });
        (c1, c2)
    }

    #[test]
    fn incremental_bounds_match_brute_force() {
        let sft = SymbolicSystem::new(vec![vec![0, 1, 0], vec![1, 0, 1], vec![1, 1, 1]]).unwrap();
        let mut table = BTreeMap::new();
        for (i, w) in sft.admissible_words(3, None).unwrap().into_iter().enumerate() {
            table.insert(w, ((i * 7) % 5) as f64 * 0.3 - 0.5);
        }
        let cases = [
            Potential::constant(&golden(), 0.0).unwrap(),
            Potential::depth1(&golden(), &[0.3, -1.0]).unwrap(),
            Potential::depth2(&golden(), |a, b| a as f64 - 0.5 * b as f64).unwrap(),
        ];
        let mut models: Vec<GibbsModel> = cases.iter().map(|p| build_gibbs(&golden(), p).unwrap()).collect();
        models.push(build_gibbs(&sft, &Potential::from_table(&sft, 3, table).unwrap()).unwrap());
        for g in &models {
            let b = gibbs_ratio_bounds(g, 8).unwrap();
            let (c1, c2) = naive_bounds(g, 8);
            assert!((b.c1 - c1).abs() <= 1e-12 * c1 && (b.c2 - c2).abs() <= 1e-12 * c2, "{b:?} vs {c1} {c2}");
        }
    }

    #[test]
    fn bernoulli_gibbs_constants_are_one() {
        let full = SymbolicSystem::full_shift(2).unwrap();
        let g = build_gibbs(&full, &Potential::bernoulli(&full, &[0.3, 0.7]).unwrap()).unwrap();
        let b = gibbs_ratio_bounds(&g, 10).unwrap();
        assert!((b.c1 - 1.0).abs() < 1e-12 && (b.c2 - 1.0).abs() < 1e-12, "{b:?}");
        let (lo, hi) = quasi_bernoulli_ratio(&g, 5).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_one_constants_bracket_one() {
        let full = SymbolicSystem::full_shift(3).unwrap();
        let p = Potential::depth1(&full, &[0.4, -1.0, 2.0]).unwrap();
        let g = build_gibbs(&full, &p).unwrap();
        let b = gibbs_ratio_bounds(&g, 1).unwrap();
        assert!(b.c1 <= 1.0 + 1e-12 && 1.0 - 1e-12 <= b.c2, "{b:?}");
        // on a proper subshift with a depth-2 potential, 1 need not lie in [C1, C2]
        let s = SymbolicSystem::new(vec![vec![0, 1, 0], vec![1, 0, 1], vec![1, 0, 1]]).unwrap();
        let p = Potential::depth2(&s, |i, j| 0.1 * (i as f64) - 0.3 * (j as f64)).unwrap();
        let b = gibbs_ratio_bounds(&build_gibbs(&s, &p).unwrap(), 1).unwrap();
        assert!(0.0 < b.c1 && b.c1 <= b.c2);
    }

    #[test]
    fn depth_three_potential_is_consistent() {
        let s = golden();
        let table: BTreeMap<Word, f64> = s
            .admissible_words(3, None)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(k, w)| (w, 0.2 * k as f64 - 0.5))
            .collect();
        let p = Potential::from_table(&s, 3, table).unwrap();
        let g = build_gibbs(&s, &p).unwrap();
        assert_eq!(g.state_len(), 2);
        let total: f64 = g.symbol_masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for word in s.admissible_words(4, None).unwrap() {
            let m = g.cylinder_mass(&word.0);
            let refined: f64 = (0..2).map(|j| g.cylinder_mass(&word.concat(&Word::single(j)).0)).sum();
            assert!((m - refined).abs() < 1e-12);
        }
        assert!((g.cylinder_mass(&[0]) - g.symbol_masses()[0]).abs() < 1e-12);
        let b = gibbs_ratio_bounds(&g, 8).unwrap();
        assert!(b.c1 > 0.0 && b.c1 <= b.c2 && b.c2.is_finite());
    }
}
