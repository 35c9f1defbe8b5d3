//! The Weyl algebra of affine space, its Rees algebra, and the flat
//! connection / D-module dictionary.
//!
//! Weyl elements are stored normal-ordered as `c·x^α ∂^β`. Rees elements are
//! `c·x^α T^β t^γ` with `T = t∂` and weight `|β| + γ`; they satisfy
//! `T_i x_i = x_i T_i + t`. In text, `d` stands for `∂` and `T` for `t∂`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::complexes::BigradedComplex;
use crate::derham::{curvature, is_zero_matrix, ConnectionModule, DerhamError};
use crate::linalg::{self, format_rational, parse_rational, rat, Rational, SparseMatrix};
use crate::presentations::{Element, Monomial};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReesError {
    #[error(transparent)]
    Derham(#[from] DerhamError),
    #[error("cannot parse `{word}`: {reason}")]
    Parse { word: String, reason: String },
    #[error("connection is not flat; curvature {curvature}")]
    NotFlat { curvature: String },
}

type Key = (Vec<u32>, Vec<u32>, u32);
type Polynomial = BTreeMap<Vec<u32>, Rational>;

/// Normal-ordered sums `c·x^α D^β t^γ`, where `D` is `∂` or `t∂`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Ordered {
    n: usize,
    terms: BTreeMap<Key, Rational>,
}

impl Ordered {
    fn zero(n: usize) -> Self {
        Ordered { n, terms: BTreeMap::new() }
    }

    fn term(n: usize, key: Key, c: Rational) -> Self {
        let mut o = Ordered::zero(n);
        o.add_term(key, c);
        o
    }

    fn add_term(&mut self, key: Key, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn add(&self, other: &Ordered) -> Ordered {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    fn scale(&self, s: &Rational) -> Ordered {
        let mut out = Ordered::zero(self.n);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    /// `D^b x^c = Σ_k C(b,k) C(c,k) k! · x^{c−k} D^{b−k} (t^k when rees)`.
    fn mul(&self, other: &Ordered, rees: bool) -> Ordered {
        let mut out = Ordered::zero(self.n);
        for ((a1, b1, g1), c1) in &self.terms {
            for ((a2, b2, g2), c2) in &other.terms {
                let mut partial: Vec<(Vec<u32>, Vec<u32>, u32, Rational)> =
                    vec![(a1.clone(), b2.clone(), g1 + g2, c1 * c2)];
                for i in 0..self.n {
                    let (b, c) = (b1[i], a2[i]);
                    let mut next = Vec::new();
                    for (alpha, beta, gamma, coeff) in &partial {
                        for k in 0..=b.min(c) {
                            let w = binomial(BigInt::from(b), BigInt::from(k))
                                * binomial(BigInt::from(c), BigInt::from(k))
                                * (1..=k).map(BigInt::from).product::<BigInt>();
                            let mut alpha = alpha.clone();
                            let mut beta = beta.clone();
                            alpha[i] += c - k;
                            beta[i] += b - k;
                            let gamma = if rees { gamma + k } else { *gamma };
                            next.push((alpha, beta, gamma, coeff * Rational::from_integer(w)));
                        }
                    }
                    partial = next;
                }
                for (alpha, beta, gamma, coeff) in partial {
                    out.add_term((alpha, beta, gamma), coeff);
                }
            }
        }
        out
    }

    fn format(&self, d: &str, t: bool) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let name = |base: &str, i: usize| if self.n == 1 { base.to_string() } else { format!("{base}{}", i + 1) };
        let mut parts = Vec::new();
        for ((alpha, beta, gamma), c) in self.terms.iter().rev() {
            let mut factors = Vec::new();
            let mut push = |s: String, e: u32| match e {
                0 => {}
                1 => factors.push(s),
                _ => factors.push(format!("{s}^{e}")),
            };
            for (i, &e) in alpha.iter().enumerate() {
                push(name("x", i), e);
            }
            for (i, &e) in beta.iter().enumerate() {
                push(name(d, i), e);
            }
            if t {
                push("t".into(), *gamma);
            }
            let mag = format_rational(&c.abs());
            let body = match (factors.is_empty(), mag == "1") {
                (true, _) => mag,
                (false, true) => factors.join("*"),
                (false, false) => format!("{mag}*{}", factors.join("*")),
            };
            parts.push((c < &Rational::zero(), body));
        }
        let mut s = String::new();
        for (k, (neg, body)) in parts.into_iter().enumerate() {
            match (k, neg) {
                (0, true) => s.push('-'),
                (0, false) => {}
                (_, true) => s.push_str(" - "),
                (_, false) => s.push_str(" + "),
            }
            s.push_str(&body);
        }
        s
    }
}

/// A normal-ordered element of the Weyl algebra `Q[x_1..x_n, ∂_1..∂_n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeylElement(Ordered);

/// A normal-ordered element of the Rees algebra `⊕ t^i D^{≤i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReesElement(Ordered);

/// A letter of a word in the Weyl or Rees generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    X(usize),
    /// `∂_i` in Weyl words, `t∂_i` in Rees words.
    D(usize),
    T,
}

fn unit(n: usize) -> Key {
    (vec![0; n], vec![0; n], 0)
}

fn letter_key(n: usize, l: Letter) -> Key {
    let mut k = unit(n);
    match l {
        Letter::X(i) => k.0[i] = 1,
        Letter::D(i) => k.1[i] = 1,
        Letter::T => k.2 = 1,
    }
    k
}

impl WeylElement {
    pub fn zero(n: usize) -> Self {
        WeylElement(Ordered::zero(n))
    }

    pub fn one(n: usize) -> Self {
        WeylElement(Ordered::term(n, unit(n), Rational::one()))
    }

    pub fn x(n: usize, i: usize) -> Self {
        WeylElement(Ordered::term(n, letter_key(n, Letter::X(i)), Rational::one()))
    }

    pub fn d(n: usize, i: usize) -> Self {
        WeylElement(Ordered::term(n, letter_key(n, Letter::D(i)), Rational::one()))
    }

    /// `c·x^α ∂^β`.
    pub fn monomial(alpha: Vec<u32>, beta: Vec<u32>, c: Rational) -> Self {
        let n = alpha.len();
        WeylElement(Ordered::term(n, (alpha, beta, 0), c))
    }

    pub fn nvars(&self) -> usize {
        self.0.n
    }

    pub fn is_zero(&self) -> bool {
        self.0.terms.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        WeylElement(self.0.add(&o.0))
    }

    pub fn sub(&self, o: &Self) -> Self {
        WeylElement(self.0.add(&o.0.scale(&rat(-1))))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        WeylElement(self.0.scale(s))
    }

    pub fn mul(&self, o: &Self) -> Self {
        WeylElement(self.0.mul(&o.0, false))
    }

    /// Terms `(α, β, c)` in normal order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &[u32], &Rational)> {
        self.0.terms.iter().map(|((a, b, _), c)| (a.as_slice(), b.as_slice(), c))
    }

    /// Largest `|β|`.
    pub fn order(&self) -> u32 {
        self.terms().map(|(_, b, _)| b.iter().sum()).max().unwrap_or(0)
    }

    /// Action on a polynomial given as exponent vectors.
    pub fn act(&self, f: &BTreeMap<Vec<u32>, Rational>) -> BTreeMap<Vec<u32>, Rational> {
        let mut out: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (alpha, beta, c) in self.terms() {
            'mono: for (m, fc) in f {
                let mut coeff = c * fc;
                let mut e = m.clone();
                for i in 0..e.len() {
                    if e[i] < beta[i] {
                        continue 'mono;
                    }
                    for k in 0..beta[i] {
                        coeff *= rat((e[i] - k) as i64);
                    }
                    e[i] = e[i] - beta[i] + alpha[i];
                }
                *out.entry(e).or_insert_with(Rational::zero) += coeff;
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }
}

impl fmt::Display for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.format("d", false))
    }
}

impl ReesElement {
    pub fn zero(n: usize) -> Self {
        ReesElement(Ordered::zero(n))
    }

    pub fn one(n: usize) -> Self {
        ReesElement(Ordered::term(n, unit(n), Rational::one()))
    }

    pub fn x(n: usize, i: usize) -> Self {
        ReesElement(Ordered::term(n, letter_key(n, Letter::X(i)), Rational::one()))
    }

    /// `t∂_i`.
    pub fn td(n: usize, i: usize) -> Self {
        ReesElement(Ordered::term(n, letter_key(n, Letter::D(i)), Rational::one()))
    }

    pub fn t(n: usize) -> Self {
        ReesElement(Ordered::term(n, letter_key(n, Letter::T), Rational::one()))
    }

    /// `c·x^α T^β t^γ`.
    pub fn monomial(alpha: Vec<u32>, beta: Vec<u32>, gamma: u32, c: Rational) -> Self {
        let n = alpha.len();
        ReesElement(Ordered::term(n, (alpha, beta, gamma), c))
    }

    pub fn nvars(&self) -> usize {
        self.0.n
    }

    pub fn is_zero(&self) -> bool {
        self.0.terms.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        ReesElement(self.0.add(&o.0))
    }

    pub fn sub(&self, o: &Self) -> Self {
        ReesElement(self.0.add(&o.0.scale(&rat(-1))))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        ReesElement(self.0.scale(s))
    }

    pub fn mul(&self, o: &Self) -> Self {
        ReesElement(self.0.mul(&o.0, true))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &[u32], u32, &Rational)> {
        self.0.terms.iter().map(|((a, b, g), c)| (a.as_slice(), b.as_slice(), *g, c))
    }

    /// Weights `|β| + γ` of the terms, without repetition.
    pub fn weights(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.terms().map(|(_, b, g, _)| b.iter().sum::<u32>() + g).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn is_homogeneous(&self) -> bool {
        self.weights().len() <= 1
    }

    pub fn weight_component(&self, w: u32) -> Self {
        let mut out = Ordered::zero(self.0.n);
        for (a, b, g, c) in self.terms() {
            if b.iter().sum::<u32>() + g == w {
                out.add_term((a.to_vec(), b.to_vec(), g), c.clone());
            }
        }
        ReesElement(out)
    }

    /// Largest `t`-exponent.
    pub fn t_degree(&self) -> u32 {
        self.terms().map(|(_, _, g, _)| g).max().unwrap_or(0)
    }
}

impl fmt::Display for ReesElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.format("T", true))
    }
}

fn parse_word(n: usize, word: &str, rees: bool) -> Result<(Rational, Vec<Letter>), ReesError> {
    let err = |reason: &str| ReesError::Parse { word: word.to_string(), reason: reason.to_string() };
    let mut coeff = Rational::one();
    let mut letters = Vec::new();
    for tok in word.split(|c: char| c == '*' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        if let Some(q) = parse_rational(tok) {
            coeff *= q;
            continue;
        }
        let (name, power) = match tok.split_once('^') {
            Some((b, e)) => (b, e.parse::<u32>().map_err(|_| err("bad exponent"))?),
            None => (tok, 1),
        };
        let split = name.find(|c: char| c.is_ascii_digit()).unwrap_or(name.len());
        let (head, idx) = name.split_at(split);
        let i = if idx.is_empty() {
            if n == 1 { 0 } else { return Err(err("index required with several variables")) }
        } else {
            idx.parse::<usize>().ok().filter(|&i| i >= 1 && i <= n).ok_or_else(|| err("index out of range"))? - 1
        };
        let l = match (head, rees) {
            ("x", _) => Letter::X(i),
            ("d", false) | ("T", true) => Letter::D(i),
            ("t", true) if idx.is_empty() => Letter::T,
            _ => return Err(err("unknown letter")),
        };
        letters.extend(std::iter::repeat_n(l, power as usize));
    }
    Ok((coeff, letters))
}

/// Normal form of a word in `x_i`, `∂_i`.
pub fn weyl_normal_form(n: usize, word: &[Letter]) -> WeylElement {
    word.iter().fold(WeylElement::one(n), |acc, &l| {
        let key = letter_key(n, l);
        debug_assert!(key.2 == 0, "t is not a Weyl letter");
        acc.mul(&WeylElement(Ordered::term(n, key, Rational::one())))
    })
}

/// Normal form of a word in `x_i`, `t∂_i` and `t`.
pub fn rees_normal_form(n: usize, word: &[Letter]) -> ReesElement {
    word.iter().fold(ReesElement::one(n), |acc, &l| {
        acc.mul(&ReesElement(Ordered::term(n, letter_key(n, l), Rational::one())))
    })
}

/// Parses a product such as `d*x^2` (letters `x`, `d`; indexed `x1`, `d2`
/// when `n > 1`) and returns its normal form.
pub fn parse_weyl(n: usize, word: &str) -> Result<WeylElement, ReesError> {
    let (c, letters) = parse_word(n, word, false)?;
    Ok(weyl_normal_form(n, &letters).scale(&c))
}

/// Parses a product in the letters `x`, `T` (for `t∂`) and `t`.
pub fn parse_rees(n: usize, word: &str) -> Result<ReesElement, ReesError> {
    let (c, letters) = parse_word(n, word, true)?;
    Ok(rees_normal_form(n, &letters).scale(&c))
}

/// A commutative polynomial in `x_i` and `ξ_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    n: usize,
    terms: BTreeMap<(Vec<u32>, Vec<u32>), Rational>,
}

impl Symbol {
    pub fn zero(n: usize) -> Self {
        Symbol { n, terms: BTreeMap::new() }
    }

    /// `c·x^α ξ^β`.
    pub fn monomial(alpha: Vec<u32>, beta: Vec<u32>, c: Rational) -> Self {
        let mut s = Symbol::zero(alpha.len());
        if !c.is_zero() {
            s.terms.insert((alpha, beta), c);
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mul(&self, o: &Symbol) -> Symbol {
        let mut out = Symbol::zero(self.n);
        for ((a1, b1), c1) in &self.terms {
            for ((a2, b2), c2) in &o.terms {
                let a: Vec<u32> = a1.iter().zip(a2).map(|(p, q)| p + q).collect();
                let b: Vec<u32> = b1.iter().zip(b2).map(|(p, q)| p + q).collect();
                let e = out.terms.entry((a, b)).or_insert_with(Rational::zero);
                *e += c1 * c2;
            }
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Ordered::zero(self.n);
        for ((a, b), c) in &self.terms {
            o.add_term((a.clone(), b.clone(), 0), c.clone());
        }
        f.write_str(&o.format("xi", false))
    }
}

/// Reduction modulo `t`, with `t∂_i ↦ ξ_i`.
pub fn symbol(e: &ReesElement) -> Symbol {
    let mut s = Symbol::zero(e.nvars());
    for (a, b, g, c) in e.terms() {
        if g == 0 {
            s.terms.insert((a.to_vec(), b.to_vec()), c.clone());
        }
    }
    s
}

/// Specialization `t = 1`, with `t∂_i ↦ ∂_i`.
pub fn localize_t(e: &ReesElement) -> WeylElement {
    let mut out = Ordered::zero(e.nvars());
    for (a, b, _, c) in e.terms() {
        out.add_term((a.to_vec(), b.to_vec(), 0), c.clone());
    }
    WeylElement(out)
}

/// An element of `R / t²R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubprincipalElement(ReesElement);

impl SubprincipalElement {
    pub fn lift(&self) -> &ReesElement {
        &self.0
    }

    pub fn mul(&self, o: &Self) -> Self {
        subprincipal(&self.0.mul(&o.0))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for SubprincipalElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn subprincipal(e: &ReesElement) -> SubprincipalElement {
    let mut out = Ordered::zero(e.nvars());
    for (a, b, g, c) in e.terms() {
        if g <= 1 {
            out.add_term((a.to_vec(), b.to_vec(), g), c.clone());
        }
    }
    SubprincipalElement(ReesElement(out))
}

fn random_exponents<R: Rng>(rng: &mut R, n: usize, total: u32) -> Vec<u32> {
    let mut e = vec![0; n];
    for _ in 0..rng.gen_range(0..=total) {
        e[rng.gen_range(0..n)] += 1;
    }
    e
}

/// A pseudo-random Rees element with at most three terms, order at most
/// `max_order` and small polynomial and `t` degrees.
pub fn random_rees<R: Rng>(rng: &mut R, n: usize, max_order: u32) -> ReesElement {
    let mut e = ReesElement::zero(n);
    for _ in 0..rng.gen_range(1..=3) {
        let alpha = random_exponents(rng, n, 3);
        let beta = random_exponents(rng, n, max_order);
        let gamma = rng.gen_range(0..=2);
        let c = loop {
            let c = rng.gen_range(-3..=3);
            if c != 0 {
                break c;
            }
        };
        e = e.add(&ReesElement::monomial(alpha, beta, gamma, rat(c)));
    }
    e
}

/// Dimensions of `Ext_Λ(k, k)` for `Λ = k[λ]/(λ²)`, from the periodic resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtComputation {
    /// Total degree `2k` for `Ext^k`, odd degrees recorded as zero.
    pub dims: BTreeMap<i32, usize>,
    /// Whether `… → Λ → Λ → k` is exact in the window.
    pub resolution_exact: bool,
    /// Whether multiplication by `u` is injective in the window.
    pub u_injective: bool,
}

pub fn ext_over_exterior(truncation: u32) -> ExtComputation {
    // Λ has basis (1, λ); multiplication by λ sends 1 ↦ λ, λ ↦ 0
    let lambda = SparseMatrix::from_i64(&[&[0, 0], &[1, 0]]);
    let augmentation = SparseMatrix::from_i64(&[&[1, 0]]);
    let steps = truncation as usize / 2 + 2;
    let resolution_exact = linalg::rank(&augmentation) == 1
        && linalg::rank(&augmentation.mul(&lambda)) == 0
        && linalg::homology_dim(&lambda, &augmentation).is_ok_and(|h| h == 0)
        && (0..steps).all(|_| linalg::homology_dim(&lambda, &lambda).is_ok_and(|h| h == 0));

    // Hom_Λ(Λ, k) = k via φ ↦ φ(1); precomposition with λ sends ε to ε∘λ, evaluated on 1
    let generator = SparseMatrix::from_i64(&[&[1], &[0]]);
    let cochain = augmentation.mul(&lambda).mul(&generator);
    let k_max = truncation as usize / 2 + 1;
    let mut dims_map = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for k in 0..=k_max as i32 {
        dims_map.insert((k, 0), 1usize);
        if k < k_max as i32 {
            diffs.insert((k, 0), cochain.clone());
        }
    }
    let bases = dims_map.iter().map(|(s, &d)| (*s, (0..d).map(|i| format!("u^{}#{i}", s.0)).collect())).collect();
    let complex = BigradedComplex::new(bases, diffs).expect("Hom complex squares to zero");
    let mut dims = BTreeMap::new();
    for deg in 0..=truncation as i32 {
        let d = if deg % 2 == 0 { complex.homology_dim(deg / 2, 0).unwrap_or(0) } else { 0 };
        dims.insert(deg, d);
    }
    // u is induced by the shift P_{k+1} → P_k, the identity of Λ, which commutes with λ
    let sigma = SparseMatrix::identity(2);
    let is_chain_map = lambda.mul(&sigma) == sigma.mul(&lambda);
    let shift = augmentation.mul(&sigma).mul(&generator);
    let u_injective = (0..truncation as i32 / 2).all(|k| {
        let nonzero = complex.homology_dim(k, 0).unwrap_or(0) == 1 && complex.homology_dim(k + 1, 0).unwrap_or(0) == 1;
        nonzero && is_chain_map && linalg::rank(&shift) == 1
    });
    ExtComputation { dims, resolution_exact, u_injective }
}

/// A D-module on affine space from a flat connection on a free module.
///
/// The module is truncated to `e_j ⊗ x^α` with `|α| ≤ size`; `x_i` and `∂_i`
/// are stored as matrices on this space. Entries that would leave the
/// truncation are dropped, so identities hold exactly on sources of weight at
/// most [`DModuleAction::cap`].
#[derive(Debug, Clone)]
pub struct DModuleAction {
    module: ConnectionModule,
    cap: u32,
    size: u32,
    basis: Vec<(usize, Vec<u32>)>,
    index: BTreeMap<(usize, Vec<u32>), usize>,
    pub x: Vec<SparseMatrix>,
    pub d: Vec<SparseMatrix>,
}

fn exponents_up_to(n: usize, w: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for a in 0..=w {
        for mut rest in exponents_up_to(n - 1, w - a) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

impl DModuleAction {
    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn nvars(&self) -> usize {
        self.module.forms().nvars()
    }

    pub fn rank(&self) -> usize {
        self.module.rank()
    }

    pub fn basis(&self) -> &[(usize, Vec<u32>)] {
        &self.basis
    }

    /// Columns of basis vectors of weight at most `cap`.
    fn source_columns(&self) -> Vec<usize> {
        (0..self.basis.len())
            .filter(|&k| self.basis[k].1.iter().sum::<u32>() <= self.cap)
            .collect()
    }

    fn restrict(&self, m: &SparseMatrix) -> SparseMatrix {
        let cols = self.source_columns();
        let pos: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        SparseMatrix::from_triplets(
            m.rows(),
            cols.len(),
            m.entries().iter().filter_map(|(r, c, v)| pos.get(c).map(|&k| (*r, k, v.clone()))),
        )
    }

    /// `[A, B]` restricted to sources of weight at most `cap`.
    pub fn commutator(&self, a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
        self.restrict(&a.mul(b).sub(&b.mul(a)))
    }

    /// Checks `[∂_i, x_j] = δ_ij`, `[x_i, x_j] = 0` and `[∂_i, ∂_j] = 0`.
    pub fn weyl_relations_hold(&self) -> bool {
        let n = self.nvars();
        let id = self.restrict(&SparseMatrix::identity(self.basis.len()));
        let zero = self.restrict(&SparseMatrix::zeros(self.basis.len(), self.basis.len()));
        (0..n).all(|i| {
            (0..n).all(|j| {
                let expected = if i == j { &id } else { &zero };
                self.commutator(&self.d[i], &self.x[j]) == *expected
                    && self.commutator(&self.x[i], &self.x[j]) == zero
                    && self.commutator(&self.d[i], &self.d[j]) == zero
            })
        })
    }

    /// Recovers the connection: `Γ_jk = Σ_i (∂_i e_k)_j dx_i`.
    #[allow(clippy::needless_range_loop)]
    pub fn to_connection(&self) -> Result<ConnectionModule, ReesError> {
        let forms = self.module.forms();
        let n = self.nvars();
        let r = self.rank();
        let mut gamma = vec![vec![Element::zero(); r]; r];
        for k in 0..r {
            let col = self.index[&(k, vec![0; n])];
            for i in 0..n {
                for (row, c, v) in self.d[i].entries() {
                    if *c != col {
                        continue;
                    }
                    let (j, alpha) = &self.basis[*row];
                    let mut e = alpha.clone();
                    e.resize(2 * n, 0);
                    e[n + i] = 1;
                    let mut g = gamma[*j][k].clone();
                    g.add_term(Monomial(e), v.clone());
                    gamma[*j][k] = g;
                }
            }
        }
        let base = forms.base().clone();
        Ok(ConnectionModule::from_connection_data(self.module.name(), &base, &gamma)?)
    }
}

/// The `∂_i`-action `∂_i·σ = ∇_{∂_i} σ` of a flat connection, as matrices on
/// sections of weight at most `cap`.
#[allow(clippy::needless_range_loop)]
pub fn koszul_dual_dmodule(m: &ConnectionModule, cap: u32) -> Result<DModuleAction, ReesError> {
    let r = curvature(m);
    if !is_zero_matrix(&r) {
        let shown: Vec<String> = r.iter().flatten().map(|e| m.forms().format(e)).collect();
        return Err(ReesError::NotFlat { curvature: format!("[{}]", shown.join(", ")) });
    }
    let forms = m.forms();
    let n = forms.nvars();
    let rank = m.rank();
    // coefficient of dx_i in Γ_jk, as a polynomial
    let mut coeff: Vec<Vec<Vec<Polynomial>>> = vec![vec![vec![BTreeMap::new(); rank]; rank]; n];
    let mut spread = 0;
    for j in 0..rank {
        for k in 0..rank {
            for (mono, c) in m.gamma()[j][k].terms() {
                let i = (0..n).find(|&i| mono.0[n + i] == 1).expect("entries are 1-forms");
                let alpha = mono.0[..n].to_vec();
                spread = spread.max(alpha.iter().sum::<u32>());
                coeff[i][j][k].insert(alpha, c.clone());
            }
        }
    }
    let size = cap + 1 + spread;
    let mut basis = Vec::new();
    for j in 0..rank {
        for alpha in exponents_up_to(n, size) {
            basis.push((j, alpha));
        }
    }
    let index: BTreeMap<(usize, Vec<u32>), usize> = basis.iter().cloned().enumerate().map(|(k, b)| (b, k)).collect();
    let dim = basis.len();
    let mut x = Vec::new();
    let mut d = Vec::new();
    for i in 0..n {
        let mut xt = Vec::new();
        let mut dt = Vec::new();
        for (col, (k, alpha)) in basis.iter().enumerate() {
            let mut up = alpha.clone();
            up[i] += 1;
            if let Some(&row) = index.get(&(*k, up)) {
                xt.push((row, col, Rational::one()));
            }
            if alpha[i] > 0 {
                let mut down = alpha.clone();
                down[i] -= 1;
                dt.push((index[&(*k, down)], col, rat(alpha[i] as i64)));
            }
            for j in 0..rank {
                for (beta, c) in &coeff[i][j][*k] {
                    let e: Vec<u32> = alpha.iter().zip(beta).map(|(a, b)| a + b).collect();
                    if let Some(&row) = index.get(&(j, e)) {
                        dt.push((row, col, c.clone()));
                    }
                }
            }
        }
        x.push(SparseMatrix::from_triplets(dim, dim, xt));
        d.push(SparseMatrix::from_triplets(dim, dim, dt));
    }
    Ok(DModuleAction { module: m.clone(), cap, size, basis, index, x, d })
}

impl DModuleAction {
    /// Largest weight kept in the truncated module.
    pub fn size(&self) -> u32 {
        self.size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derham::Forms;
    use crate::presentations::{parse_algebra, parse_expr_in};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> WeylElement {
        parse_weyl(1, s).unwrap()
    }

    fn r(s: &str) -> ReesElement {
        parse_rees(1, s).unwrap()
    }

    fn poly(exps: &[u32]) -> BTreeMap<Vec<u32>, Rational> {
        BTreeMap::from([(exps.to_vec(), Rational::one())])
    }

    #[test]
    fn weyl_normal_forms() {
        assert_eq!(w("d*x").to_string(), "x*d + 1");
        assert_eq!(w("d^2*x").to_string(), "x*d^2 + 2*d");
        let e = w("d*x*d*x");
        assert_eq!(e.to_string(), "x^2*d^2 + 3*x*d + 1");
        // oracle: act on x^k by direct differentiation of (x (x f)')'
        for k in 0..=4u32 {
            let got = e.act(&poly(&[k]));
            let expected = BTreeMap::from([(vec![k], rat(((k + 1) * (k + 1)) as i64))]);
            assert_eq!(got, expected, "k = {k}");
        }
        assert_eq!(parse_weyl(2, "d1*x2").unwrap().to_string(), "x2*d1");
        assert!(parse_weyl(2, "d*x").is_err());
        assert!(parse_weyl(1, "t").is_err());
    }

    #[test]
    fn rees_normal_forms() {
        assert_eq!(r("T*x").to_string(), "x*T + t");
        assert!(r("t*T").sub(&r("T*t")).is_zero());
        let e = r("x^2*T^3*t^2");
        assert_eq!(e.weights(), vec![5]);
        assert!(r("T*x").is_homogeneous());
        assert_eq!(r("T*x").weight_component(1), r("T*x"));
    }

    #[test]
    fn symbols_and_localization() {
        let e = r("T*x");
        assert_eq!(symbol(&e).to_string(), "x*xi");
        assert!(symbol(&ReesElement::t(1)).is_zero());
        assert_eq!(localize_t(&e), w("d*x"));
        assert_eq!(localize_t(&r("t^3")), WeylElement::one(1));
    }

    #[test]
    fn symbol_kills_exactly_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let e = random_rees(&mut rng, 2, 3);
            let s = symbol(&e);
            let t_free = e.terms().all(|(_, _, g, _)| g > 0);
            assert_eq!(s.is_zero(), t_free);
            assert!(symbol(&e.mul(&ReesElement::t(2))).is_zero());
        }
    }

    #[test]
    fn subprincipal_truncation() {
        let e = r("T*x");
        assert_eq!(subprincipal(&e).lift(), &e);
        assert!(subprincipal(&r("t^2")).is_zero());
        let p = subprincipal(&e.mul(&ReesElement::t(1)));
        assert_eq!(p.to_string(), "x*T*t");
        assert_eq!(subprincipal(&e).mul(&subprincipal(&ReesElement::t(1))), p);
    }

    #[test]
    fn ext_of_exterior_algebra() {
        let e = ext_over_exterior(8);
        let dims: Vec<usize> = e.dims.values().copied().collect();
        assert_eq!(dims, vec![1, 0, 1, 0, 1, 0, 1, 0, 1]);
        assert!(e.resolution_exact && e.u_injective);
        assert_eq!(ext_over_exterior(0).dims, BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn weyl_action_is_faithful_on_small_operators() {
        // the map from c_{ab} (a, b ≤ 3) to the action on x^k (k ≤ 7) is injective
        let mut cols = Vec::new();
        let mut outputs: BTreeMap<(u32, Vec<u32>), usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for a in 0..=3 {
            for b in 0..=3 {
                let p = WeylElement::monomial(vec![a], vec![b], Rational::one());
                let mut col = Vec::new();
                for k in 0..=7 {
                    for (e, c) in p.act(&poly(&[k])) {
                        let len = outputs.len();
                        let row = *outputs.entry((k, e)).or_insert(len);
                        col.push((row, c));
                    }
                }
                raw.push(col);
            }
        }
        for col in raw {
            let mut v = vec![Rational::zero(); outputs.len()];
            for (row, c) in col {
                v[row] = c;
            }
            cols.push(v);
        }
        assert_eq!(linalg::rank(&SparseMatrix::from_columns(outputs.len(), &cols)), 16);
    }

    fn connection(gamma: &[&[&str]]) -> ConnectionModule {
        let a = parse_algebra("algebra A { gens: x:(0,0); }").unwrap();
        let f = Forms::new(&a, 0).unwrap();
        let g = gamma.iter().map(|row| row.iter().map(|s| parse_expr_in(f.algebra(), s).unwrap()).collect()).collect();
        ConnectionModule::new("E", &a, g).unwrap()
    }

    #[test]
    fn dmodule_dictionary() {
        for gamma in [&[&["0"][..]][..], &[&["5/2*dx"][..]], &[&["0", "dx"][..], &["0", "0"][..]]] {
            let m = connection(gamma);
            let dm = koszul_dual_dmodule(&m, 5).unwrap();
            assert!(dm.weyl_relations_hold());
            let back = dm.to_connection().unwrap();
            assert_eq!(back.gamma(), m.gamma());
        }
        let dm = koszul_dual_dmodule(&connection(&[&["5/2*dx"]]), 5).unwrap();
        // ∂·x^2 = 2x + 5/2 x^2
        let col = dm.basis().iter().position(|b| b == &(0, vec![2])).unwrap();
        let image = dm.d[0].column(col);
        let at = |e: u32| image[dm.basis().iter().position(|b| b == &(0, vec![e])).unwrap()].clone();
        assert_eq!((at(1), at(2)), (rat(2), crate::linalg::ratio(5, 2)));
    }

    #[test]
    fn dmodule_on_the_plane() {
        let a = parse_algebra("algebra P { gens: x:(0,0), y:(0,0); }").unwrap();
        let f = Forms::new(&a, 0).unwrap();
        let g = vec![vec![parse_expr_in(f.algebra(), "y*dx + x*dy").unwrap()]];
        let m = ConnectionModule::new("E", &a, g).unwrap();
        let dm = koszul_dual_dmodule(&m, 3).unwrap();
        assert!(dm.weyl_relations_hold());
        assert_eq!(dm.to_connection().unwrap().gamma(), m.gamma());
        let curved = ConnectionModule::new("E", &a, vec![vec![parse_expr_in(f.algebra(), "x*dy").unwrap()]]).unwrap();
        assert!(matches!(koszul_dual_dmodule(&curved, 3), Err(ReesError::NotFlat { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn algebra_laws(seed in any::<u64>(), n in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_rees(&mut rng, n, 3);
            let b = random_rees(&mut rng, n, 3);
            let c = random_rees(&mut rng, n, 2);
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(symbol(&a.mul(&b)), symbol(&a).mul(&symbol(&b)));
            prop_assert_eq!(localize_t(&a.mul(&b)), localize_t(&a).mul(&localize_t(&b)));
            let (wa, wb, wc) = (localize_t(&a), localize_t(&b), localize_t(&c));
            prop_assert_eq!(wa.mul(&wb).mul(&wc), wa.mul(&wb.mul(&wc)));
            prop_assert_eq!(subprincipal(&a).mul(&subprincipal(&b)), subprincipal(&a.mul(&b)));
            for &x in &a.weights() {
                for &y in &b.weights() {
                    let p = a.weight_component(x).mul(&b.weight_component(y));
                    prop_assert!(p.is_zero() || p.weights() == vec![x + y]);
                }
            }
        }
    }
}
