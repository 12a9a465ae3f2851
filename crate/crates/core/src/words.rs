//! Words, free reduction and canonical conjugacy-class representatives.
//!
//! Generators are stored as small integers: `2i` is the `i`-th generator and
//! `2i + 1` its inverse, so inversion is `index ^ 1`. The fixed total order on
//! letters is `a < A < b < B < c < ...`, and every canonical form below is the
//! lexicographically least rotation under that order.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("word reduces to the identity")]
    EmptyWord,
    #[error("enumeration produced more than {capacity} classes")]
    CapacityExceeded { capacity: usize },
    #[error("invalid generator symbol {0:?}")]
    BadSymbol(char),
    #[error("generator {symbol:?} is outside the alphabet of {group}")]
    OutOfAlphabet { symbol: char, group: String },
    #[error("max_len must be at least 1")]
    ZeroLength,
}

/// A letter of the alphabet: a generator or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator(u8);

impl Generator {
    pub const fn new(index: u8) -> Self {
        Generator(index)
    }

    /// The `i`-th generator (lowercase letter).
    pub const fn gen(i: u8) -> Self {
        Generator(2 * i)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn inverse(self) -> Self {
        Generator(self.0 ^ 1)
    }

    /// Index of the underlying generator, ignoring orientation.
    pub fn base(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_inverted(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn symbol(self) -> char {
        let c = (b'a' + self.0 / 2) as char;
        if self.is_inverted() {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }

    pub fn from_symbol(c: char) -> Result<Self, WordError> {
        if c.is_ascii_lowercase() {
            Ok(Generator(2 * (c as u8 - b'a')))
        } else if c.is_ascii_uppercase() {
            Ok(Generator(2 * (c as u8 - b'A') + 1))
        } else {
            Err(WordError::BadSymbol(c))
        }
    }
}

/// A finite sequence of letters, not necessarily reduced.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Generator>);

impl Word {
    pub fn new(letters: Vec<Generator>) -> Self {
        Word(letters)
    }

    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[Generator] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|g| g.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn pow(&self, n: usize) -> Word {
        Word(self.0.iter().copied().cycle().take(self.0.len() * n).collect())
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|p| p[1] != p[0].inverse())
    }
}

impl FromStr for Word {
    type Err = WordError;

    /// Parses letters such as `"a A b"` or `"aAb"`; whitespace is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(Generator::from_symbol)
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            write!(f, "{}", g.symbol())?;
        }
        Ok(())
    }
}

/// Free reduction: cancels adjacent inverse pairs until none remain.
pub fn reduce(w: &Word) -> Word {
    Word(free_reduce(&w.0))
}

fn free_reduce(letters: &[Generator]) -> Vec<Generator> {
    let mut out: Vec<Generator> = Vec::with_capacity(letters.len());
    for &g in letters {
        if out.last() == Some(&g.inverse()) {
            out.pop();
        } else {
            out.push(g);
        }
    }
    out
}

fn cyclic_free_reduce(letters: &[Generator]) -> Vec<Generator> {
    let w = free_reduce(letters);
    let mut lo = 0;
    let mut hi = w.len();
    while hi > lo + 1 && w[lo] == w[hi - 1].inverse() {
        lo += 1;
        hi -= 1;
    }
    w[lo..hi].to_vec()
}

/// Start index of the lexicographically least rotation (two-pointer
/// minimum-expression scan, linear time).
pub fn least_rotation_index<T: Ord>(s: &[T]) -> usize {
    let n = s.len();
    let (mut i, mut j, mut k) = (0usize, 1usize, 0usize);
    while i < n && j < n && k < n {
        let a = &s[(i + k) % n];
        let b = &s[(j + k) % n];
        if a == b {
            k += 1;
            continue;
        }
        if a > b {
            i += k + 1;
        } else {
            j += k + 1;
        }
        if i == j {
            j += 1;
        }
        k = 0;
    }
    i.min(j)
}

fn least_rotation(s: &[Generator]) -> Vec<Generator> {
    let k = least_rotation_index(s);
    let mut out = Vec::with_capacity(s.len());
    out.extend_from_slice(&s[k..]);
    out.extend_from_slice(&s[..k]);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Free { rank: usize },
    SurfaceGenus2,
}

/// Group presentation: a free group of rank `k` or the genus-2 surface group
/// `<a,b,c,d | [a,b][c,d]>`.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    kind: GroupKind,
    /// All rotations of the relator and of its inverse (16 words of length 8).
    cycles: Vec<Vec<Generator>>,
    /// For each letter, the (at most two) cycles that start with it.
    starts: Vec<Vec<usize>>,
}

impl PartialEq for GroupSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for GroupSpec {}

/// Letters of `[a,b][c,d] = a b A B c d C D`.
const SURFACE_RELATOR: [u8; 8] = [0, 2, 1, 3, 4, 6, 5, 7];
const RELATOR_LEN: usize = 8;
const HALF: usize = RELATOR_LEN / 2;
const SWAP_CLOSURE_CAP: usize = 4096;

impl GroupSpec {
    pub fn free(rank: usize) -> Self {
        assert!((1..=13).contains(&rank), "free rank must lie in 1..=13");
        GroupSpec {
            kind: GroupKind::Free { rank },
            cycles: Vec::new(),
            starts: vec![Vec::new(); 2 * rank],
        }
    }

    pub fn surface_genus2() -> Self {
        let relator: Vec<Generator> = SURFACE_RELATOR.iter().map(|&i| Generator(i)).collect();
        let inverse: Vec<Generator> = relator.iter().rev().map(|g| g.inverse()).collect();
        let mut cycles = Vec::with_capacity(2 * RELATOR_LEN);
        for base in [&relator, &inverse] {
            for k in 0..RELATOR_LEN {
                let mut c = base[k..].to_vec();
                c.extend_from_slice(&base[..k]);
                cycles.push(c);
            }
        }
        let mut starts = vec![Vec::new(); 8];
        for (i, c) in cycles.iter().enumerate() {
            starts[c[0].index()].push(i);
        }
        GroupSpec {
            kind: GroupKind::SurfaceGenus2,
            cycles,
            starts,
        }
    }

    pub fn from_kind(kind: GroupKind) -> Self {
        match kind {
            GroupKind::Free { rank } => Self::free(rank),
            GroupKind::SurfaceGenus2 => Self::surface_genus2(),
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn is_surface(&self) -> bool {
        matches!(self.kind, GroupKind::SurfaceGenus2)
    }

    /// Number of generators (not counting inverses).
    pub fn rank(&self) -> usize {
        match self.kind {
            GroupKind::Free { rank } => rank,
            GroupKind::SurfaceGenus2 => 4,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.rank()
    }

    pub fn alphabet(&self) -> impl Iterator<Item = Generator> {
        (0..self.alphabet_size() as u8).map(Generator)
    }

    /// The defining relator, if any.
    pub fn relator(&self) -> Option<Word> {
        self.is_surface()
            .then(|| Word(SURFACE_RELATOR.iter().map(|&i| Generator(i)).collect()))
    }

    /// Rotations of the relator and its inverse.
    pub fn relator_cycles(&self) -> &[Vec<Generator>] {
        &self.cycles
    }

    pub fn describe(&self) -> String {
        match self.kind {
            GroupKind::Free { rank } => format!("F_{rank}"),
            GroupKind::SurfaceGenus2 => "pi_1(S_2)".to_string(),
        }
    }

    pub fn check_word(&self, w: &Word) -> Result<(), WordError> {
        match w.0.iter().find(|g| g.index() >= self.alphabet_size()) {
            Some(g) => Err(WordError::OutOfAlphabet {
                symbol: g.symbol(),
                group: self.describe(),
            }),
            None => Ok(()),
        }
    }

    /// Longest relator-cycle prefix read cyclically from `w[start..]`,
    /// together with the cycle it matches. Limited to `w.len()` letters.
    fn longest_piece(&self, w: &[Generator], start: usize) -> Option<(usize, usize)> {
        let n = w.len();
        let mut best: Option<(usize, usize)> = None;
        for &ci in &self.starts[w[start].index()] {
            let c = &self.cycles[ci];
            let limit = n.min(RELATOR_LEN);
            let mut m = 0;
            while m < limit && w[(start + m) % n] == c[m] {
                m += 1;
            }
            if best.is_none_or(|(bm, _)| m > bm) {
                best = Some((m, ci));
            }
        }
        best
    }

    /// Inverse of the complement of the length-`k` prefix of cycle `ci`.
    fn complement(&self, ci: usize, k: usize) -> impl Iterator<Item = Generator> + '_ {
        self.cycles[ci][k..].iter().rev().map(|g| g.inverse())
    }

    /// Replaces `w[start..start+k]` (cyclically) by the complement of cycle `ci`.
    fn replace_piece(&self, w: &[Generator], start: usize, k: usize, ci: usize) -> Vec<Generator> {
        let n = w.len();
        let mut out: Vec<Generator> = (k..n).map(|j| w[(start + j) % n]).collect();
        out.extend(self.complement(ci, k));
        cyclic_free_reduce(&out)
    }

    /// One Dehn replacement on a cyclic word, if any piece longer than half a
    /// relator occurs.
    fn dehn_step(&self, w: &[Generator]) -> Option<Vec<Generator>> {
        if w.len() <= HALF {
            return None;
        }
        for i in 0..w.len() {
            if let Some((m, ci)) = self.longest_piece(w, i) {
                if m > HALF {
                    return Some(self.replace_piece(w, i, m, ci));
                }
            }
        }
        None
    }

    /// Cyclic free reduction followed by Dehn replacements until none apply.
    /// Each replacement shortens the word by at least two letters.
    pub fn cyclic_dehn_reduce(&self, w: &[Generator]) -> Vec<Generator> {
        let mut cur = cyclic_free_reduce(w);
        if !self.is_surface() {
            return cur;
        }
        while let Some(next) = self.dehn_step(&cur) {
            debug_assert!(next.len() + 2 <= cur.len());
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        cur
    }

    /// Words obtained by swapping one exact half-relator for the other half,
    /// then Dehn-reducing.
    fn half_swaps(&self, w: &[Generator]) -> Vec<Vec<Generator>> {
        let mut out = Vec::new();
        if w.len() < HALF {
            return out;
        }
        for i in 0..w.len() {
            for &ci in &self.starts[w[i].index()] {
                let c = &self.cycles[ci];
                if (0..HALF).all(|m| w[(i + m) % w.len()] == c[m]) {
                    out.push(self.cyclic_dehn_reduce(&self.replace_piece(w, i, HALF, ci)));
                }
            }
        }
        out
    }

    fn surface_canonical(&self, w: &[Generator]) -> Result<(Vec<Generator>, bool), WordError> {
        let start = self.cyclic_dehn_reduce(w);
        if start.is_empty() {
            return Err(WordError::EmptyWord);
        }
        let start = least_rotation(&start);
        let mut seen: HashSet<Vec<Generator>> = HashSet::new();
        let mut queue = VecDeque::new();
        let mut best_len = start.len();
        seen.insert(start.clone());
        queue.push_back(start);
        let mut truncated = false;
        'outer: while let Some(x) = queue.pop_front() {
            for y in self.half_swaps(&x) {
                if y.is_empty() {
                    return Err(WordError::EmptyWord);
                }
                let y = least_rotation(&y);
                if y.len() < best_len {
                    best_len = y.len();
                    seen.clear();
                    queue.clear();
                    seen.insert(y.clone());
                    queue.push_back(y);
                    continue 'outer;
                }
                if seen.len() >= SWAP_CLOSURE_CAP {
                    truncated = true;
                    break 'outer;
                }
                if seen.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
        let best = seen.into_iter().min().expect("closure is never empty");
        Ok((best, truncated))
    }

    /// Canonical form together with a flag telling whether the half-relator
    /// closure had to be truncated (the class is then only probably unique).
    pub fn canonical_with_flag(&self, w: &Word) -> Result<(Necklace, bool), WordError> {
        self.check_word(w)?;
        if self.is_surface() {
            let (letters, ambiguous) = self.surface_canonical(&w.0)?;
            Ok((Necklace { letters }, ambiguous))
        } else {
            let c = cyclic_free_reduce(&w.0);
            if c.is_empty() {
                return Err(WordError::EmptyWord);
            }
            Ok((Necklace { letters: least_rotation(&c) }, false))
        }
    }
}

/// Canonical representative of the conjugacy class of `w`.
///
/// Free groups: cyclic free reduction and least rotation. Surface group:
/// cyclic Dehn reduction, closure under half-relator swaps, then the least
/// element of the shortest words reached.
pub fn cyclic_canonical(w: &Word, spec: &GroupSpec) -> Result<Necklace, WordError> {
    spec.canonical_with_flag(w).map(|(n, _)| n)
}

/// Canonical cyclic word of a nontrivial conjugacy class.
///
/// Ordered by length first, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Necklace {
    letters: Vec<Generator>,
}

impl Necklace {
    /// Wraps letters that are already canonical. Use [`cyclic_canonical`]
    /// for arbitrary input.
    pub fn from_canonical(letters: Vec<Generator>) -> Self {
        Necklace { letters }
    }

    pub fn letters(&self) -> &[Generator] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn word(&self) -> Word {
        Word(self.letters.clone())
    }

    /// Smallest `p` with the word invariant under rotation by `p`.
    pub fn primitive_period(&self) -> usize {
        let n = self.letters.len();
        (1..=n)
            .find(|&p| n.is_multiple_of(p) && (0..n).all(|i| self.letters[i] == self.letters[(i + p) % n]))
            .unwrap_or(n)
    }

    pub fn is_primitive(&self) -> bool {
        self.primitive_period() == self.letters.len()
    }

    /// The primitive root as a necklace.
    pub fn root(&self) -> Necklace {
        Necklace {
            letters: self.letters[..self.primitive_period()].to_vec(),
        }
    }

    pub fn inverse(&self, spec: &GroupSpec) -> Necklace {
        cyclic_canonical(&self.word().inverse(), spec).expect("inverse of a nontrivial class")
    }
}

impl Ord for Necklace {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Necklace {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Necklace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.letters {
            write!(f, "{}", g.symbol())?;
        }
        Ok(())
    }
}

/// Incremental filter consulted while words are grown letter by letter.
/// Returning `None` prunes the whole subtree.
pub trait PrefixGuard: Clone + Send + Sync {
    fn extend(&self, g: Generator) -> Option<Self>;
}

impl PrefixGuard for () {
    fn extend(&self, _: Generator) -> Option<()> {
        Some(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnumOptions {
    pub capacity: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            capacity: 20_000_000,
        }
    }
}

/// Every nontrivial conjugacy class with a cyclically reduced representative
/// of length at most `max_len`, in length-lexicographic order.
pub fn enumerate_necklaces(spec: &GroupSpec, max_len: usize) -> Result<Vec<Necklace>, WordError> {
    enumerate_guarded(spec, max_len, &EnumOptions::default(), ())
}

struct Dfs<'a, P> {
    spec: &'a GroupSpec,
    max_len: usize,
    word: Vec<Generator>,
    out: Vec<Necklace>,
    counter: &'a AtomicUsize,
    capacity: usize,
    overflow: bool,
    _guard: std::marker::PhantomData<P>,
}

impl<'a, P: PrefixGuard> Dfs<'a, P> {
    /// Surface words must avoid any linear subword longer than half a relator.
    fn tail_is_long_piece(&self) -> bool {
        let n = self.word.len();
        for k in (HALF + 1)..=RELATOR_LEN.min(n) {
            let tail = &self.word[n - k..];
            for &ci in &self.spec.starts[tail[0].index()] {
                if self.spec.cycles[ci][..k] == *tail {
                    return true;
                }
            }
        }
        false
    }

    fn visit(&mut self, guard: &P, period: usize) {
        if self.overflow {
            return;
        }
        let n = self.word.len();
        // prenecklace with period `period`: a necklace exactly when period | n
        if n.is_multiple_of(period) && self.word[0] != self.word[n - 1].inverse() {
            self.record();
        }
        if n == self.max_len {
            return;
        }
        let last = self.word[n - 1];
        let floor = self.word[n - period];
        for g in self.spec.alphabet() {
            if g < floor || g == last.inverse() {
                continue;
            }
            let Some(next) = guard.extend(g) else { continue };
            self.word.push(g);
            if !(self.spec.is_surface() && self.tail_is_long_piece()) {
                let p = if g == floor { period } else { n + 1 };
                self.visit(&next, p);
            }
            self.word.pop();
        }
    }

    fn record(&mut self) {
        let necklace = if self.spec.is_surface() {
            let n = self.word.len();
            // wrap-around pieces are not caught by the linear check
            let wraps = (0..n).any(|i| {
                self.spec
                    .longest_piece(&self.word, i)
                    .is_some_and(|(m, _)| m > HALF)
            });
            if wraps {
                return;
            }
            match self.spec.surface_canonical(&self.word) {
                Ok((letters, _)) => Necklace { letters },
                Err(_) => return,
            }
        } else {
            Necklace {
                letters: self.word.clone(),
            }
        };
        self.out.push(necklace);
        if self.counter.fetch_add(1, AtomicOrdering::Relaxed) + 1 > self.capacity {
            self.overflow = true;
        }
    }
}

/// Enumeration with a caller-supplied prefix filter (used for metric pruning).
///
/// Work is split by two-letter prefix across the rayon pool; the merged,
/// sorted result does not depend on the number of workers.
pub fn enumerate_guarded<P: PrefixGuard>(
    spec: &GroupSpec,
    max_len: usize,
    opts: &EnumOptions,
    guard: P,
) -> Result<Vec<Necklace>, WordError> {
    if max_len == 0 {
        return Err(WordError::ZeroLength);
    }
    let counter = AtomicUsize::new(0);
    let roots: Vec<(Generator, P)> = spec
        .alphabet()
        .filter_map(|g| guard.extend(g).map(|p| (g, p)))
        .collect();
    let chunks: Vec<Result<Vec<Necklace>, WordError>> = roots
        .par_iter()
        .map(|(g, p)| {
            let mut dfs = Dfs {
                spec,
                max_len,
                word: vec![*g],
                out: Vec::new(),
                counter: &counter,
                capacity: opts.capacity,
                overflow: false,
                _guard: std::marker::PhantomData,
            };
            dfs.visit(p, 1);
            if dfs.overflow {
                Err(WordError::CapacityExceeded {
                    capacity: opts.capacity,
                })
            } else {
                Ok(dfs.out)
            }
        })
        .collect();
    let mut all = Vec::new();
    for c in chunks {
        all.extend(c?);
    }
    all.par_sort_unstable();
    all.dedup();
    if all.len() > opts.capacity {
        return Err(WordError::CapacityExceeded {
            capacity: opts.capacity,
        });
    }
    Ok(all)
}

/// Plain-text export: one canonical word per line.
pub fn export_necklaces(set: &[Necklace]) -> String {
    let mut s = String::new();
    for n in set {
        s.push_str(&n.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(&w("a A b")), w("b"));
        assert_eq!(reduce(&w("")), w(""));
        assert_eq!(reduce(&w("a b B A a")), w("a"));
    }

    #[test]
    fn symbols_round_trip() {
        for i in 0..8u8 {
            let g = Generator::new(i);
            assert_eq!(Generator::from_symbol(g.symbol()).unwrap(), g);
            assert_eq!(g.inverse().inverse(), g);
            assert_ne!(g.inverse(), g);
        }
        assert_eq!(Generator::from_symbol('?'), Err(WordError::BadSymbol('?')));
    }

    #[test]
    fn booth_matches_naive() {
        let cases: [&[u8]; 6] = [b"bca", b"abab", b"baab", b"aaaa", b"cabcab", b"bbaab"];
        for s in cases {
            let n = s.len();
            let naive = (0..n)
                .min_by_key(|&k| s[k..].iter().chain(&s[..k]).copied().collect::<Vec<_>>())
                .unwrap();
            let k = least_rotation_index(s);
            let rot = |k: usize| s[k..].iter().chain(&s[..k]).copied().collect::<Vec<_>>();
            assert_eq!(rot(k), rot(naive), "{:?}", std::str::from_utf8(s));
        }
    }

    #[test]
    fn free_canonical_examples() {
        let f2 = GroupSpec::free(2);
        assert_eq!(cyclic_canonical(&w("b a B"), &f2).unwrap().to_string(), "a");
        assert_eq!(cyclic_canonical(&w("b a"), &f2).unwrap().to_string(), "ab");
        assert_eq!(cyclic_canonical(&w("a A"), &f2), Err(WordError::EmptyWord));
    }

    #[test]
    fn relator_is_trivial() {
        let s = GroupSpec::surface_genus2();
        let r = s.relator().unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(cyclic_canonical(&r, &s), Err(WordError::EmptyWord));
        assert_eq!(cyclic_canonical(&r.inverse(), &s), Err(WordError::EmptyWord));
        // a rotation of the relator is also trivial
        assert_eq!(cyclic_canonical(&w("cdCDabAB"), &s), Err(WordError::EmptyWord));
    }

    #[test]
    fn relator_table_closed() {
        let s = GroupSpec::surface_genus2();
        let cycles: HashSet<Vec<Generator>> = s.relator_cycles().iter().cloned().collect();
        assert_eq!(cycles.len(), 16);
        for c in &cycles {
            let inv: Vec<Generator> = c.iter().rev().map(|g| g.inverse()).collect();
            assert!(cycles.contains(&least_rotation(&inv)) || cycles.contains(&inv));
            let mut rot = c[1..].to_vec();
            rot.push(c[0]);
            assert!(cycles.contains(&rot));
        }
    }

    #[test]
    fn dehn_shortens_long_pieces() {
        let s = GroupSpec::surface_genus2();
        // five letters of the relator become the inverse of the other three
        let red = s.cyclic_dehn_reduce(w("abABcc").letters());
        assert!(red.len() < 6);
        let lhs = cyclic_canonical(&w("abABcc"), &s).unwrap();
        let rhs = cyclic_canonical(&Word(red), &s).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn half_relators_are_conjugate() {
        // [a,b] = [c,d]^{-1} = [d,c]
        let s = GroupSpec::surface_genus2();
        let x = cyclic_canonical(&w("abAB"), &s).unwrap();
        let y = cyclic_canonical(&w("dcDC"), &s).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn enumerate_small_counts() {
        let f2 = GroupSpec::free(2);
        let one = enumerate_necklaces(&f2, 1).unwrap();
        let names: Vec<String> = one.iter().map(|n| n.to_string()).collect();
        assert_eq!(names, ["a", "A", "b", "B"]);
        let two = enumerate_necklaces(&f2, 2).unwrap();
        assert_eq!(two.iter().filter(|n| n.len() == 2).count(), 8);
    }

    fn brute_force_free(rank: usize, max_len: usize) -> usize {
        let k = 2 * rank;
        let mut classes: HashSet<Vec<u8>> = HashSet::new();
        for len in 1..=max_len {
            let total = k.pow(len as u32);
            for mut code in 0..total {
                let mut s = Vec::with_capacity(len);
                for _ in 0..len {
                    s.push((code % k) as u8);
                    code /= k;
                }
                // reduce, then strip conjugating ends
                let mut r: Vec<u8> = Vec::new();
                for x in s {
                    if r.last() == Some(&(x ^ 1)) {
                        r.pop();
                    } else {
                        r.push(x);
                    }
                }
                while r.len() > 1 && r[0] == r[r.len() - 1] ^ 1 {
                    r.remove(0);
                    r.pop();
                }
                if r.is_empty() {
                    continue;
                }
                let key = (0..r.len())
                    .map(|i| r[i..].iter().chain(&r[..i]).copied().collect::<Vec<u8>>())
                    .min()
                    .unwrap();
                classes.insert(key);
            }
        }
        classes.len()
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for (rank, max_len) in [(1, 6), (2, 7), (3, 4)] {
            let spec = GroupSpec::free(rank);
            let got = enumerate_necklaces(&spec, max_len).unwrap();
            assert_eq!(got.len(), brute_force_free(rank, max_len), "F_{rank} up to {max_len}");
        }
    }

    #[test]
    fn enumeration_sorted_unique_and_canonical() {
        let spec = GroupSpec::free(2);
        let got = enumerate_necklaces(&spec, 6).unwrap();
        assert!(got.windows(2).all(|p| p[0] < p[1]));
        for n in &got {
            assert_eq!(&cyclic_canonical(&n.word(), &spec).unwrap(), n);
        }
    }

    #[test]
    fn enumeration_independent_of_pool_size() {
        let spec = GroupSpec::surface_genus2();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| enumerate_necklaces(&spec, 4).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn capacity_is_enforced() {
        let spec = GroupSpec::free(2);
        let opts = EnumOptions { capacity: 10 };
        assert!(matches!(
            enumerate_guarded(&spec, 4, &opts, ()),
            Err(WordError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn surface_enumeration_is_closed_under_canonicalization() {
        let spec = GroupSpec::surface_genus2();
        let got = enumerate_necklaces(&spec, 4).unwrap();
        let set: HashSet<&Necklace> = got.iter().collect();
        for n in &got {
            assert!(set.contains(&n.inverse(&spec)));
        }
        // 8 single letters, no identity
        assert_eq!(got.iter().filter(|n| n.len() == 1).count(), 8);
    }

    #[test]
    fn primitive_root() {
        let spec = GroupSpec::free(2);
        let n = cyclic_canonical(&w("abab"), &spec).unwrap();
        assert_eq!(n.primitive_period(), 2);
        assert_eq!(n.root().to_string(), "ab");
        assert!(!n.is_primitive());
    }

    fn arb_word(k: u8, max: usize) -> impl Strategy<Value = Word> {
        proptest::collection::vec(0..2 * k, 0..max)
            .prop_map(|v| Word(v.into_iter().map(Generator::new).collect()))
    }

    proptest! {
        #[test]
        fn reduction_is_idempotent(x in arb_word(3, 20)) {
            let r = reduce(&x);
            prop_assert!(r.is_reduced());
            prop_assert_eq!(reduce(&r), r);
        }

        #[test]
        fn free_canonical_is_conjugation_invariant(x in arb_word(2, 12), u in arb_word(2, 8)) {
            let spec = GroupSpec::free(2);
            let conj = u.concat(&x).concat(&u.inverse());
            prop_assert_eq!(cyclic_canonical(&x, &spec), cyclic_canonical(&conj, &spec));
        }

        #[test]
        fn dehn_reduction_never_lengthens(x in arb_word(4, 16)) {
            let spec = GroupSpec::surface_genus2();
            let start = cyclic_free_reduce(x.letters());
            let red = spec.cyclic_dehn_reduce(&start);
            prop_assert!(red.len() <= start.len());
        }
    }
}
