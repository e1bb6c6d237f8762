//! Finite words, subshifts of finite type and cylinder enumeration.
//!
//! A [`SymbolicSystem`] is an alphabet `{0, …, M−1}` together with a 0/1
//! transition matrix. The all-ones matrix encodes the full shift. Systems are
//! immutable once built, so every query here is a pure function.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = usize;

/// Default refusal threshold for word enumeration.
pub const DEFAULT_WORD_CAP: u128 = 10_000_000;

/// A finite word over the alphabet. May be empty only as an intermediate
/// value; public constructors of admissible words never return one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn single(s: Symbol) -> Self {
        Word(vec![s])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn first(&self) -> Option<Symbol> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Symbol> {
        self.0.last().copied()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl From<&[Symbol]> for Word {
    fn from(v: &[Symbol]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    /// Symbols joined by `.`; e.g. `0.1.1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// True iff neither word is a prefix of the other.
pub fn incomparable(u: &Word, v: &Word) -> bool {
    !u.is_prefix_of(v) && !v.is_prefix_of(u)
}

/// Alphabet plus 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct SymbolicSystem {
    size: usize,
    // row-major, size*size
    transition: Vec<bool>,
}

impl TryFrom<Vec<Vec<u8>>> for SymbolicSystem {
    type Error = Error;
    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        SymbolicSystem::new(rows)
    }
}

impl From<SymbolicSystem> for Vec<Vec<u8>> {
    fn from(s: SymbolicSystem) -> Self {
        s.rows()
    }
}

impl SymbolicSystem {
    /// Builds a system from matrix rows. Rejects non-square input, entries
    /// other than 0/1 and dead symbols (all-zero rows or columns).
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::input("transition matrix must have at least one row"));
        }
        let mut transition = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::input(format!(
                    "transition row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => transition.push(false),
                    1 => transition.push(true),
                    _ => {
                        return Err(Error::input(format!(
                            "transition[{i}][{j}] = {e} is not 0 or 1"
                        )))
                    }
                }
            }
        }
        let sys = SymbolicSystem { size: m, transition };
        for i in 0..m {
            if !(0..m).any(|j| sys.allowed(i, j)) {
                return Err(Error::input(format!("symbol {i} has an all-zero row")));
            }
            if !(0..m).any(|j| sys.allowed(j, i)) {
                return Err(Error::input(format!("symbol {i} has an all-zero column")));
            }
        }
        Ok(sys)
    }

    pub fn full_shift(m: usize) -> Result<Self> {
        Self::new(vec![vec![1; m]; m])
    }

    pub fn alphabet_size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn allowed(&self, from: Symbol, to: Symbol) -> bool {
        self.transition[from * self.size + to]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.allowed(i, j) as u8).collect())
            .collect()
    }

    pub fn successors(&self, from: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.size).filter(move |&j| self.allowed(from, j))
    }

    pub fn is_full_shift(&self) -> bool {
        self.transition.iter().all(|&b| b)
    }

    fn check_symbols(&self, w: &Word) -> Result<()> {
        match w.0.iter().find(|&&s| s >= self.size) {
            Some(s) => Err(Error::input(format!(
                "symbol {s} outside alphabet of size {}",
                self.size
            ))),
            None => Ok(()),
        }
    }

    pub fn is_admissible(&self, w: &Word) -> Result<bool> {
        self.check_symbols(w)?;
        Ok(w.0.windows(2).all(|p| self.allowed(p[0], p[1])))
    }

    /// Strong connectivity of the transition graph.
    pub fn is_transitive(&self) -> bool {
        (0..self.size).all(|i| self.reachable_from(i).iter().all(|&r| r))
    }

    // symbols reachable in >= 1 step
    fn reachable_from(&self, start: Symbol) -> Vec<bool> {
        let mut seen = vec![false; self.size];
        let mut queue: VecDeque<Symbol> = self.successors(start).collect();
        for &s in &queue {
            seen[s] = true;
        }
        while let Some(u) = queue.pop_front() {
            for v in self.successors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Aperiodicity: some power `A^n`, `n ≤ M²`, is entrywise positive.
    pub fn is_mixing(&self) -> bool {
        self.primitive_exponent().is_some()
    }

    /// Least `n ≤ M²` with `A^n > 0`, if any.
    pub fn primitive_exponent(&self) -> Option<usize> {
        let m = self.size;
        let mut power = self.transition.clone();
        for n in 1..=m * m {
            if power.iter().all(|&b| b) {
                return Some(n);
            }
            let mut next = vec![false; m * m];
            for i in 0..m {
                for k in 0..m {
                    if power[i * m + k] {
                        for j in 0..m {
                            if self.allowed(k, j) {
                                next[i * m + j] = true;
                            }
                        }
                    }
                }
            }
            power = next;
        }
        None
    }

    /// Period of an irreducible matrix (gcd of cycle lengths through symbol 0).
    pub fn period(&self) -> usize {
        // BFS levels from 0; period = gcd over edges (u,v) of level[u]+1-level[v]
        let mut level = vec![usize::MAX; self.size];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in self.successors(u) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..self.size {
            if level[u] == usize::MAX {
                continue;
            }
            for v in self.successors(u) {
                if level[v] == usize::MAX {
                    continue;
                }
                let d = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
                g = gcd(g, d);
            }
        }
        g.max(1)
    }

    /// Number of admissible words of length `k` (optionally starting with
    /// `first`), computed from powers of the transition matrix. Saturates at
    /// `u128::MAX`.
    pub fn count_words(&self, k: usize, first: Option<Symbol>) -> u128 {
        if k == 0 {
            return 1;
        }
        let m = self.size;
        let mut counts: Vec<u128> = match first {
            Some(f) => (0..m).map(|j| (j == f) as u128).collect(),
            None => vec![1; m],
        };
        for _ in 1..k {
            let mut next = vec![0u128; m];
            for i in 0..m {
                if counts[i] == 0 {
                    continue;
                }
                for j in self.successors(i) {
                    next[j] = next[j].saturating_add(counts[i]);
                }
            }
            counts = next;
        }
        counts.into_iter().fold(0u128, |a, b| a.saturating_add(b))
    }

    /// Admissible words of length `k`, lexicographically ordered.
    pub fn admissible_words(&self, k: usize, first: Option<Symbol>) -> Result<Vec<Word>> {
        self.admissible_words_capped(k, first, DEFAULT_WORD_CAP)
    }

    pub fn admissible_words_capped(
        &self,
        k: usize,
        first: Option<Symbol>,
        cap: u128,
    ) -> Result<Vec<Word>> {
        if k == 0 {
            return Err(Error::input("word length must be at least 1"));
        }
        if let Some(f) = first {
            if f >= self.size {
                return Err(Error::input(format!("first symbol {f} outside alphabet")));
            }
        }
        let count = self.count_words(k, first);
        if count > cap {
            return Err(Error::cap("admissible words", count, cap));
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut stack = Vec::with_capacity(k);
        let starts: Vec<Symbol> = match first {
            Some(f) => vec![f],
            None => (0..self.size).collect(),
        };
        for s in starts {
            stack.push(s);
            self.extend_words(&mut stack, k, &mut out);
            stack.pop();
        }
        Ok(out)
    }

    fn extend_words(&self, stack: &mut Vec<Symbol>, k: usize, out: &mut Vec<Word>) {
        if stack.len() == k {
            out.push(Word(stack.clone()));
            return;
        }
        let last = *stack.last().expect("non-empty stack");
        for j in 0..self.size {
            if self.allowed(last, j) {
                stack.push(j);
                self.extend_words(stack, k, out);
                stack.pop();
            }
        }
    }

    /// Visits every admissible word of length `1..=max_len` in depth-first
    /// lexicographic order. The callback returns `false` to prune the subtree.
    pub fn visit_words<F: FnMut(&[Symbol]) -> bool>(&self, max_len: usize, mut f: F) {
        let mut stack = Vec::with_capacity(max_len);
        for s in 0..self.size {
            stack.push(s);
            self.visit_rec(&mut stack, max_len, &mut f);
            stack.pop();
        }
    }

    fn visit_rec<F: FnMut(&[Symbol]) -> bool>(
        &self,
        stack: &mut Vec<Symbol>,
        max_len: usize,
        f: &mut F,
    ) {
        if !f(stack) || stack.len() == max_len {
            return;
        }
        let last = *stack.last().expect("non-empty stack");
        for j in 0..self.size {
            if self.allowed(last, j) {
                stack.push(j);
                self.visit_rec(stack, max_len, f);
                stack.pop();
            }
        }
    }

    /// Minimal-length word `j` such that `from·j` is admissible and ends in
    /// `to`. Ties are broken lexicographically.
    pub fn shortest_connector(&self, from: Symbol, to: Symbol) -> Result<Word> {
        let m = self.size;
        if from >= m || to >= m {
            return Err(Error::input("connector endpoints outside alphabet"));
        }
        // steps[u]: symbols in the shortest word starting at u and ending at `to`
        let mut steps = vec![usize::MAX; m];
        steps[to] = 1;
        let mut queue = VecDeque::from([to]);
        while let Some(v) = queue.pop_front() {
            for u in 0..m {
                if self.allowed(u, v) && steps[u] == usize::MAX {
                    steps[u] = steps[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        let len = self
            .successors(from)
            .map(|u| steps[u])
            .min()
            .filter(|&l| l != usize::MAX)
            .ok_or(Error::NoPath { from, to })?;
        let mut out = Vec::with_capacity(len);
        let mut cur = from;
        let mut remaining = len;
        while remaining > 0 {
            let next = self
                .successors(cur)
                .find(|&u| steps[u] == remaining)
                .ok_or_else(|| Error::Internal("connector walk lost its path".into()))?;
            out.push(next);
            cur = next;
            remaining -= 1;
        }
        debug_assert_eq!(out.last().copied(), Some(to));
        Ok(Word(out))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counterexample() -> SymbolicSystem {
        SymbolicSystem::new(vec![vec![0, 1, 0], vec![1, 0, 1], vec![1, 0, 1]]).unwrap()
    }

    fn golden() -> SymbolicSystem {
        SymbolicSystem::new(vec![vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn w(v: &[usize]) -> Word {
        Word(v.to_vec())
    }

    #[test]
    fn admissibility() {
        let a = counterexample();
        assert!(a.is_admissible(&w(&[0, 1, 0])).unwrap());
        assert!(!a.is_admissible(&w(&[0, 0])).unwrap());
        let full = SymbolicSystem::full_shift(3).unwrap();
        assert!(full.is_admissible(&w(&[2, 2, 0, 1, 1])).unwrap());
        assert!(matches!(a.is_admissible(&w(&[0, 3])), Err(Error::Input(_))));
    }

    #[test]
    fn dead_symbols_rejected() {
        assert!(SymbolicSystem::new(vec![vec![1, 0], vec![0, 0]]).is_err());
        assert!(SymbolicSystem::new(vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(SymbolicSystem::new(vec![vec![1, 2], vec![1, 0]]).is_err());
        assert!(SymbolicSystem::new(vec![vec![1, 1]]).is_err());
    }

    #[test]
    fn transitivity_and_mixing() {
        assert!(counterexample().is_transitive());
        assert!(counterexample().is_mixing());
        let id = SymbolicSystem::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(!id.is_transitive());
        let schottky =
            SymbolicSystem::new(vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap();
        assert!(schottky.is_transitive());
        let swap = SymbolicSystem::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(swap.is_transitive());
        assert!(!swap.is_mixing());
        assert_eq!(swap.period(), 2);
        assert!(SymbolicSystem::full_shift(4).unwrap().is_mixing());
        assert_eq!(SymbolicSystem::full_shift(4).unwrap().primitive_exponent(), Some(1));
    }

    #[test]
    fn word_enumeration() {
        let full = SymbolicSystem::full_shift(2).unwrap();
        let words = full.admissible_words(3, None).unwrap();
        assert_eq!(words.len(), 8);
        assert!(words.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(counterexample().admissible_words(2, Some(0)).unwrap(), vec![w(&[0, 1])]);
        assert_eq!(golden().admissible_words(5, None).unwrap().len(), 13);
        assert!(matches!(
            full.admissible_words_capped(10, None, 100),
            Err(Error::Cap { count: 1024, .. })
        ));
    }

    #[test]
    fn incomparability() {
        assert!(!incomparable(&w(&[0, 1]), &w(&[0, 1, 1])));
        assert!(incomparable(&w(&[0, 1]), &w(&[0, 2])));
        assert!(!incomparable(&w(&[0]), &w(&[0])));
    }

    #[test]
    fn connectors() {
        let full = SymbolicSystem::full_shift(2).unwrap();
        assert_eq!(full.shortest_connector(0, 1).unwrap(), w(&[1]));
        assert_eq!(counterexample().shortest_connector(0, 2).unwrap(), w(&[1, 2]));
        assert_eq!(golden().shortest_connector(1, 1).unwrap(), w(&[0, 1]));
        let id = SymbolicSystem::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(id.shortest_connector(0, 1), Err(Error::NoPath { from: 0, to: 1 }));
    }
}
