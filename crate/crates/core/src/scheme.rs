//! Approximation schemes (E, P): enumeration of the quasi-partition of
//! return windows with coverage accounting, crossed-product elements, their
//! compression to finite rational matrices, the generator-expression DSL,
//! and membership certification for the subalgebra generated by the
//! partial isometries chi_Z t.

use crate::dynamics::{
    complement_indicator, Cylinder, CylinderSpec, DynError, LCFunction, RadixSeq, Space,
};
use crate::exactla::QMatrix;
use crate::rational::{format_rat, parse_rat, Rat};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error("coefficient of t^{power} in entry ({row},{col}) is not constant on translate {translate} of window {window}")]
    NonConstant { row: usize, col: usize, power: i64, translate: usize, window: String },
    #[error("membership rejected: {0}")]
    Reject(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid stop criterion: {0}")]
    InvalidStop(String),
    #[error("element and scheme live over different spaces")]
    SpaceMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeKind {
    /// E = [1 1̲], P = {[0 0̲], [0 1̲], [1 0̲]}
    LamplighterHalf,
    /// E = 2n+1 ones straddling the origin, P = the remaining words
    Lamplighter(u32),
    /// E = the m-zero prefix, P = the other p_m - 1 prefixes of level m
    OdometerLevel(u64),
}

/// An approximation scheme: a clopen base E together with a finite clopen
/// partition P of its complement, one of the paper-backed presets.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub space: Space,
    pub base: Cylinder,
    pub partition: Vec<Cylinder>,
}

impl Scheme {
    pub fn lamplighter_half() -> Scheme {
        let space = Space::binary();
        let base = Cylinder::new(space.clone(), &[(-1, 1), (0, 1)]).unwrap();
        let partition = vec![
            Cylinder::new(space.clone(), &[(-1, 0), (0, 0)]).unwrap(),
            Cylinder::new(space.clone(), &[(-1, 0), (0, 1)]).unwrap(),
            Cylinder::new(space.clone(), &[(-1, 1), (0, 0)]).unwrap(),
        ];
        let s = Scheme { kind: SchemeKind::LamplighterHalf, space, base, partition };
        s.assert_partition();
        s
    }

    /// The scheme A_n: E_n is the word of 2n+1 ones on coordinates -n..n,
    /// and P_n lists the other length-(2n+1) words in ascending binary
    /// order (most significant bit at coordinate -n).
    pub fn lamplighter(n: u32) -> Scheme {
        assert!(n <= 6, "partition of 2^(2n+1)-1 members becomes impractical");
        let space = Space::binary();
        let m = 2 * n as i64 + 1;
        let word = |w: u64| -> Cylinder {
            let pairs: Vec<(i64, u32)> = (0..m)
                .map(|i| {
                    let bit = (w >> (m - 1 - i)) & 1;
                    (i - n as i64, bit as u32)
                })
                .collect();
            Cylinder::new(space.clone(), &pairs).unwrap()
        };
        let all_ones = (1u64 << m) - 1;
        let base = word(all_ones);
        let partition = (0..all_ones).map(word).collect();
        let s = Scheme { kind: SchemeKind::Lamplighter(n), space, base, partition };
        s.assert_partition();
        s
    }

    /// The level-m odometer scheme over the given radices.
    pub fn odometer(radices: RadixSeq, m: u64) -> Scheme {
        assert!(m >= 1);
        let space = Space::odometer(radices.clone());
        let p_m = radices.partial_product(m);
        let p_m_usize = p_m.to_usize().expect("p_m too large for a partition");
        let base = Cylinder::from_prefix_value(space.clone(), &BigInt::zero(), m);
        let partition = (1..p_m_usize)
            .map(|l| Cylinder::from_prefix_value(space.clone(), &BigInt::from(l), m))
            .collect();
        let s = Scheme { kind: SchemeKind::OdometerLevel(m), space, base, partition };
        s.assert_partition();
        s
    }

    fn assert_partition(&self) {
        let mut total = self.base.measure();
        for z in &self.partition {
            assert!(z.is_disjoint(&self.base), "partition member meets E");
            total += z.measure();
        }
        for (i, a) in self.partition.iter().enumerate() {
            for b in &self.partition[i + 1..] {
                assert!(a.is_disjoint(b), "partition members overlap");
            }
        }
        assert!(total.is_one(), "P together with E must exhaust X");
    }

    pub fn name(&self) -> String {
        match &self.kind {
            SchemeKind::LamplighterHalf => "lamplighter_half".into(),
            SchemeKind::Lamplighter(n) => format!("lamplighter_{n}"),
            SchemeKind::OdometerLevel(m) => format!("odometer_level_{m}"),
        }
    }

    /// chi_{X \ E} in the two-term form 1 - chi_E.
    pub fn complement_base(&self) -> LCFunction {
        complement_indicator(&self.base)
    }

    /// The radius-R cylinder neighborhood of the fixed point y of the
    /// nested scheme family (all ones for the lamplighter presets, all
    /// zeros for the odometer).
    pub fn fixed_point_neighborhood(&self, radius: u64) -> Cylinder {
        let r = radius.max(1) as i64;
        match self.kind {
            SchemeKind::LamplighterHalf | SchemeKind::Lamplighter(_) => {
                let pairs: Vec<(i64, u32)> = (-r..=r).map(|c| (c, 1)).collect();
                Cylinder::new(self.space.clone(), &pairs).unwrap()
            }
            SchemeKind::OdometerLevel(_) => {
                let pairs: Vec<(i64, u32)> = (1..=r).map(|c| (c, 0)).collect();
                Cylinder::new(self.space.clone(), &pairs).unwrap()
            }
        }
    }

    /// For aligned binary shift schemes: the common constraint interval
    /// [lo, hi] of E and every partition member. This is what makes
    /// itinerary admissibility a Markov condition.
    pub fn aligned_interval(&self) -> Option<(i64, i64)> {
        if !self.space.is_binary() {
            return None;
        }
        let interval = |c: &Cylinder| -> Option<(i64, i64)> {
            let lo = *c.constraints.keys().next()?;
            let hi = *c.constraints.keys().next_back()?;
            if c.constraints.len() as i64 == hi - lo + 1 {
                Some((lo, hi))
            } else {
                None
            }
        };
        let base = interval(&self.base)?;
        for z in &self.partition {
            if interval(z)? != base {
                return None;
            }
        }
        Some(base)
    }
}

/// A member W of the quasi-partition: its itinerary through P, its cylinder
/// E ∩ T^{-1} Z_1 ∩ ... ∩ T^{-k} E, and its exact measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub itinerary: Vec<usize>,
    pub cylinder: Cylinder,
    pub measure: Rat,
}

impl Window {
    /// The length |W| (return time), one more than the itinerary length.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.itinerary.len() + 1
    }

    /// T^0 W .. T^{|W|-1} W.
    pub fn translates(&self) -> Vec<Cylinder> {
        (0..self.len() as i64)
            .map(|i| self.cylinder.shift_mod(i).expect("translate in range"))
            .collect()
    }

    /// Checks the defining inclusions W ⊆ E, T^i W ⊆ Z_i, T^{|W|} W ⊆ E.
    pub fn validate(&self, scheme: &Scheme) -> bool {
        if !self.cylinder.subset(&scheme.base) {
            return false;
        }
        for (i, &z) in self.itinerary.iter().enumerate() {
            let t = self.cylinder.shift_mod(i as i64 + 1).unwrap();
            if !t.subset(&scheme.partition[z]) {
                return false;
            }
        }
        let back = self.cylinder.shift_mod(self.len() as i64).unwrap();
        back.subset(&scheme.base) && self.measure == self.cylinder.measure()
    }
}

/// Exactly one stop criterion per enumeration.
#[derive(Debug, Clone)]
pub enum Stop {
    /// all windows with itinerary length <= D (i.e. |W| <= D+1)
    Depth(usize),
    /// enumerate by increasing depth until coverage >= c; needs c < 1
    Coverage(Rat),
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub windows: Vec<Window>,
    pub coverage: Rat,
}

/// Streams windows in canonical order (depth first, then itinerary
/// lexicographic within a depth) and returns the coverage sum Σ μ(W)·|W|.
pub fn for_each_window(
    scheme: &Scheme,
    stop: &Stop,
    mut f: impl FnMut(&Window),
) -> Result<Rat, SchemeError> {
    let max_depth = match stop {
        Stop::Depth(d) => Some(*d),
        Stop::Coverage(c) => {
            if c >= &Rat::one() {
                return Err(SchemeError::InvalidStop(
                    "coverage target must be < 1 (full coverage is a limit, not a stop)".into(),
                ));
            }
            None
        }
    };
    let mut coverage = Rat::zero();
    // level d holds the nonempty partial cylinders with itinerary length d
    let mut level: Vec<(Vec<usize>, Cylinder)> = vec![(Vec::new(), scheme.base.clone())];
    let mut depth = 0usize;
    loop {
        // close: W = partial ∩ T^{-(d+1)} E, a window of length d+1
        let closing = scheme.base.shift_mod(-(depth as i64 + 1))?;
        for (itin, cyl) in &level {
            if let Some(w) = cyl.intersect(&closing) {
                let measure = w.measure();
                coverage += &measure * Rat::from_integer(BigInt::from(depth + 1));
                f(&Window { itinerary: itin.clone(), cylinder: w, measure });
            }
        }
        if let Some(d) = max_depth {
            if depth >= d {
                break;
            }
        } else if let Stop::Coverage(c) = stop {
            if &coverage >= c {
                break;
            }
        }
        // extend
        let mut next = Vec::new();
        for (itin, cyl) in &level {
            for (zi, z) in scheme.partition.iter().enumerate() {
                let shifted = z.shift_mod(-(depth as i64 + 1))?;
                if let Some(ext) = cyl.intersect(&shifted) {
                    let mut it = itin.clone();
                    it.push(zi);
                    next.push((it, ext));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
        depth += 1;
    }
    Ok(coverage)
}

pub fn enumerate_windows(scheme: &Scheme, stop: &Stop) -> Result<Enumeration, SchemeError> {
    let mut windows = Vec::new();
    let coverage = for_each_window(scheme, stop, |w| windows.push(w.clone()))?;
    Ok(Enumeration { windows, coverage })
}

/// Number of windows per length 1..=max_len, by the transfer recursion over
/// admissible consecutive symbol pairs. Only valid (and only offered) for
/// aligned binary shift schemes, where pairwise consecutive compatibility
/// already implies a consistent pattern.
pub fn window_length_counts(scheme: &Scheme, max_len: usize) -> Option<Vec<BigUint>> {
    scheme.aligned_interval()?;
    let p = scheme.partition.len();
    let compatible = |a: &Cylinder, b: &Cylinder| -> bool {
        let shifted = b.shift_mod(-1).expect("binary shift");
        a.intersect(&shifted).is_some()
    };
    let from_e: Vec<bool> = scheme
        .partition
        .iter()
        .map(|z| compatible(&scheme.base, z))
        .collect();
    let to_e: Vec<bool> = scheme
        .partition
        .iter()
        .map(|z| compatible(z, &scheme.base))
        .collect();
    let trans: Vec<Vec<usize>> = (0..p)
        .map(|a| {
            (0..p)
                .filter(|&b| compatible(&scheme.partition[a], &scheme.partition[b]))
                .collect()
        })
        .collect();
    let mut counts = vec![BigUint::zero(); max_len + 1];
    if max_len >= 1 && compatible(&scheme.base, &scheme.base) {
        counts[1] = BigUint::one();
    }
    // v[z] = number of admissible partial itineraries E -> ... -> z
    let mut v: Vec<BigUint> = from_e
        .iter()
        .map(|&ok| if ok { BigUint::one() } else { BigUint::zero() })
        .collect();
    for len in 2..=max_len {
        let closing: BigUint = (0..p)
            .filter(|&z| to_e[z])
            .map(|z| v[z].clone())
            .sum();
        counts[len] = closing;
        let mut next = vec![BigUint::zero(); p];
        for a in 0..p {
            if v[a].is_zero() {
                continue;
            }
            for &b in &trans[a] {
                next[b] += &v[a];
            }
        }
        v = next;
    }
    Some(counts)
}

/// Finite sum Σ_j f_j t^j with locally constant coefficients, kept in the
/// canonical form where f_j multiplies t^j from the left.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossedElement {
    pub space: Space,
    terms: std::collections::BTreeMap<i64, LCFunction>,
}

impl CrossedElement {
    pub fn zero(space: Space) -> Self {
        CrossedElement { space, terms: Default::default() }
    }

    pub fn one(space: Space) -> Self {
        CrossedElement::scalar(space, Rat::one())
    }

    pub fn scalar(space: Space, c: Rat) -> Self {
        CrossedElement::from_function(LCFunction::constant(space, c))
    }

    pub fn from_function(f: LCFunction) -> Self {
        let space = f.space.clone();
        let mut terms = std::collections::BTreeMap::new();
        if !f.is_zero() {
            terms.insert(0, f);
        }
        CrossedElement { space, terms }
    }

    pub fn monomial(f: LCFunction, power: i64) -> Self {
        let space = f.space.clone();
        let mut terms = std::collections::BTreeMap::new();
        if !f.is_zero() {
            terms.insert(power, f);
        }
        CrossedElement { space, terms }
    }

    /// The partial isometry chi_Z t.
    pub fn generator(scheme: &Scheme, index: usize) -> Self {
        CrossedElement::monomial(
            LCFunction::indicator(scheme.partition[index].clone()),
            1,
        )
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &LCFunction)> {
        self.terms.iter().map(|(&j, f)| (j, f))
    }

    pub fn coefficient(&self, power: i64) -> Option<&LCFunction> {
        self.terms.get(&power)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_radius(&self) -> u64 {
        self.terms.values().map(|f| f.radius()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &CrossedElement) -> CrossedElement {
        assert_eq!(self.space, other.space);
        let mut terms = self.terms.clone();
        for (&j, f) in &other.terms {
            let merged = match terms.get(&j) {
                Some(g) => g.add(f),
                None => f.clone(),
            };
            if merged.is_zero() {
                terms.remove(&j);
            } else {
                terms.insert(j, merged);
            }
        }
        CrossedElement { space: self.space.clone(), terms }
    }

    pub fn scale(&self, k: &Rat) -> CrossedElement {
        if k.is_zero() {
            return CrossedElement::zero(self.space.clone());
        }
        CrossedElement {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(&j, f)| (j, f.scale(k))).collect(),
        }
    }

    pub fn neg(&self) -> CrossedElement {
        self.scale(&-Rat::one())
    }

    pub fn sub(&self, other: &CrossedElement) -> CrossedElement {
        self.add(&other.neg())
    }

    /// Product under the crossed-product rule (f t^a)(g t^b) =
    /// f · (g ∘ T^{-a}) t^{a+b}.
    pub fn mul(&self, other: &CrossedElement) -> Result<CrossedElement, DynError> {
        assert_eq!(self.space, other.space);
        let mut out = CrossedElement::zero(self.space.clone());
        for (&a, f) in &self.terms {
            for (&b, g) in &other.terms {
                let shifted = g.compose_shift(-a)?;
                let coef = f.mul(&shifted);
                out = out.add(&CrossedElement::monomial(coef, a + b));
            }
        }
        Ok(out)
    }

    /// Adjoint (f t^j)* = (f ∘ T^j) t^{-j}; rational conjugation is trivial.
    pub fn adjoint(&self) -> Result<CrossedElement, DynError> {
        let mut out = CrossedElement::zero(self.space.clone());
        for (&j, f) in &self.terms {
            out = out.add(&CrossedElement::monomial(f.compose_shift(j)?, -j));
        }
        Ok(out)
    }
}

/// Sparse matrix over the crossed product.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossedMatrix {
    pub space: Space,
    pub size: usize,
    entries: std::collections::BTreeMap<(usize, usize), CrossedElement>,
}

impl CrossedMatrix {
    pub fn zero(space: Space, size: usize) -> Self {
        CrossedMatrix { space, size, entries: Default::default() }
    }

    pub fn identity(space: Space, size: usize) -> Self {
        let mut m = CrossedMatrix::zero(space.clone(), size);
        for i in 0..size {
            m.set(i, i, CrossedElement::one(space.clone()));
        }
        m
    }

    pub fn from_element(e: CrossedElement) -> Self {
        let space = e.space.clone();
        let mut m = CrossedMatrix::zero(space, 1);
        m.set(0, 0, e);
        m
    }

    pub fn set(&mut self, row: usize, col: usize, e: CrossedElement) {
        assert!(row < self.size && col < self.size, "index out of range");
        assert_eq!(e.space, self.space);
        if e.is_zero() {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), e);
        }
    }

    pub fn add_to(&mut self, row: usize, col: usize, e: &CrossedElement) {
        let cur = match self.entries.get(&(row, col)) {
            Some(existing) => existing.add(e),
            None => e.clone(),
        };
        self.set(row, col, cur);
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&CrossedElement> {
        self.entries.get(&(row, col))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &CrossedElement)> {
        self.entries.iter().map(|(&(r, c), e)| (r, c, e))
    }

    pub fn add(&self, other: &CrossedMatrix) -> CrossedMatrix {
        assert_eq!(self.size, other.size);
        let mut out = self.clone();
        for (r, c, e) in other.entries() {
            out.add_to(r, c, e);
        }
        out
    }

    pub fn mul(&self, other: &CrossedMatrix) -> Result<CrossedMatrix, DynError> {
        assert_eq!(self.size, other.size);
        let mut out = CrossedMatrix::zero(self.space.clone(), self.size);
        for (r, k, a) in self.entries() {
            for c in 0..self.size {
                if let Some(b) = other.get(k, c) {
                    let prod = a.mul(b)?;
                    out.add_to(r, c, &prod);
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Result<CrossedMatrix, DynError> {
        let mut out = CrossedMatrix::zero(self.space.clone(), self.size);
        for (r, c, e) in self.entries() {
            out.add_to(c, r, &e.adjoint()?);
        }
        Ok(out)
    }

    pub fn block_diag(&self, other: &CrossedMatrix) -> CrossedMatrix {
        assert_eq!(self.space, other.space);
        let mut out = CrossedMatrix::zero(self.space.clone(), self.size + other.size);
        for (r, c, e) in self.entries() {
            out.set(r, c, e.clone());
        }
        for (r, c, e) in other.entries() {
            out.set(self.size + r, self.size + c, e.clone());
        }
        out
    }

    pub fn max_radius(&self) -> u64 {
        self.entries.values().map(|e| e.max_radius()).max().unwrap_or(0)
    }
}

/// The compression pi(A)_W: a k|W| x k|W| rational matrix in level-major
/// layout (flat index = level * |W| + position). The entry at matrix block
/// (i, j), window positions (i', j'), is f_{i'-j'} evaluated on T^{i'} W,
/// where A[i][j] = Σ_m f_m t^m.
pub fn compress(a: &CrossedMatrix, w: &Window) -> Result<QMatrix, SchemeError> {
    let translates = w.translates();
    compress_with_translates(a, w, &translates)
}

pub fn compress_with_translates(
    a: &CrossedMatrix,
    w: &Window,
    translates: &[Cylinder],
) -> Result<QMatrix, SchemeError> {
    let l = w.len();
    let n = a.size * l;
    let mut m = QMatrix::zero(n, n);
    for (bi, bj, elem) in a.entries() {
        for (power, f) in elem.terms() {
            // i' - j' = power with both in 0..l
            let lo = power.max(0);
            let hi = (l as i64 - 1 + power).min(l as i64 - 1);
            for ip in lo..=hi {
                let jp = ip - power;
                let value = f.eval_on(&translates[ip as usize]).map_err(|e| match e {
                    DynError::NonConstant => SchemeError::NonConstant {
                        row: bi,
                        col: bj,
                        power,
                        translate: ip as usize,
                        window: format!("{}", w.cylinder),
                    },
                    other => SchemeError::Dyn(other),
                })?;
                if !value.is_zero() {
                    m.set(bi * l + ip as usize, bj * l + jp as usize, value);
                }
            }
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// generator expression DSL
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Gen(usize),
    Number(Rat),
    Plus,
    Minus,
    Star,
    Prime,
    LParen,
    RParen,
    Adj,
}

fn lex(src: &str) -> Result<Vec<Token>, SchemeError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '\'' => {
                out.push(Token::Prime);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            'g' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j == start {
                    return Err(SchemeError::Parse("generator needs an index, e.g. g0".into()));
                }
                let idx: usize = bytes[start..j]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| SchemeError::Parse("bad generator index".into()))?;
                out.push(Token::Gen(idx));
                i = j;
            }
            'a' => {
                let word: String = bytes[i..bytes.len().min(i + 3)].iter().collect();
                if word == "adj" {
                    out.push(Token::Adj);
                    i += 3;
                } else {
                    return Err(SchemeError::Parse(format!("unexpected token at offset {i}")));
                }
            }
            d if d.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == '/') {
                    j += 1;
                }
                let lit: String = bytes[i..j].iter().collect();
                let value = parse_rat(&lit).map_err(SchemeError::Parse)?;
                out.push(Token::Number(value));
                i = j;
            }
            other => return Err(SchemeError::Parse(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    scheme: &'a Scheme,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<CrossedElement, SchemeError> {
        let mut acc = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Token::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<CrossedElement, SchemeError> {
        let mut acc = self.unary()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.bump();
            let rhs = self.unary()?;
            acc = acc.mul(&rhs)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<CrossedElement, SchemeError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<CrossedElement, SchemeError> {
        let mut acc = self.atom()?;
        while matches!(self.peek(), Some(Token::Prime)) {
            self.bump();
            acc = acc.adjoint()?;
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<CrossedElement, SchemeError> {
        match self.bump() {
            Some(Token::Gen(i)) => {
                if i >= self.scheme.partition.len() {
                    return Err(SchemeError::Parse(format!(
                        "generator g{i} out of range (partition has {} members)",
                        self.scheme.partition.len()
                    )));
                }
                Ok(CrossedElement::generator(self.scheme, i))
            }
            Some(Token::Number(v)) => Ok(CrossedElement::scalar(self.scheme.space.clone(), v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(SchemeError::Parse("missing ')'".into())),
                }
            }
            Some(Token::Adj) => match self.bump() {
                Some(Token::LParen) => {
                    let inner = self.expr()?;
                    match self.bump() {
                        Some(Token::RParen) => Ok(inner.adjoint()?),
                        _ => Err(SchemeError::Parse("missing ')' after adj(".into())),
                    }
                }
                _ => Err(SchemeError::Parse("adj must be followed by '('".into())),
            },
            other => Err(SchemeError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

/// Evaluates an expression over the generators g0, g1, ... (the partition
/// members in declared order) with +, -, *, postfix ' (adjoint), adj(e),
/// rational literals and parentheses. The result lies in the subalgebra
/// generated by the partial isometries by construction.
pub fn generator_expr_eval(scheme: &Scheme, src: &str) -> Result<CrossedElement, SchemeError> {
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0, scheme };
    let out = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(SchemeError::Parse("trailing input after expression".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// membership certification
// ---------------------------------------------------------------------------

/// Certifies that every monomial of every entry of `a` lies in the unital
/// *-algebra generated by {chi_Z t}. For t^j with j >= 1 the support must
/// avoid E, T(E), ..., T^{j-1}(E) and decompose over generator words whose
/// degree-zero cofactors pass the coefficient-algebra check; negative powers
/// reduce to their adjoints; j = 0 coefficients go through the finite
/// constancy procedure directly. Success is a sufficient certificate.
pub fn membership_translate(scheme: &Scheme, a: &CrossedMatrix) -> Result<(), SchemeError> {
    if a.space != scheme.space {
        return Err(SchemeError::SpaceMismatch);
    }
    let radius = a.max_radius();
    let witness_windows = b0_window_set(scheme, radius)?;
    for (row, col, elem) in a.entries() {
        for (power, f) in elem.terms() {
            let describe = |msg: String| {
                SchemeError::Reject(format!("entry ({row},{col}), power {power}: {msg}"))
            };
            if power == 0 {
                b0_check(scheme, f, &witness_windows).map_err(describe)?;
                continue;
            }
            let (j, g) = if power > 0 {
                (power, f.clone())
            } else {
                // adjoint of chi_S t^{-e} is chi_{T^e S} t^e
                (-power, f.compose_shift(power).map_err(SchemeError::Dyn)?)
            };
            positive_power_check(scheme, &g, j, &witness_windows).map_err(describe)?;
        }
    }
    Ok(())
}

/// Windows used by the coefficient-algebra constancy check, at the
/// itinerary depth 2R+2 for coefficient radius R.
fn b0_window_set(scheme: &Scheme, radius: u64) -> Result<Vec<Window>, SchemeError> {
    if matches!(scheme.kind, SchemeKind::OdometerLevel(_)) {
        // the odometer membership test is exact and does not need windows
        return Ok(Vec::new());
    }
    let depth = (2 * radius + 2) as usize;
    Ok(enumerate_windows(scheme, &Stop::Depth(depth))?.windows)
}

fn b0_check(scheme: &Scheme, f: &LCFunction, windows: &[Window]) -> Result<(), String> {
    if let SchemeKind::OdometerLevel(m) = scheme.kind {
        // the level-m coefficient algebra is exactly the span of the level-m
        // prefix indicators, so radius <= m decides membership
        return if f.radius() <= m {
            Ok(())
        } else {
            Err(format!(
                "coefficient of radius {} exceeds odometer level {m}",
                f.radius()
            ))
        };
    }
    let radius = f.radius();
    let near_y = scheme.fixed_point_neighborhood(radius);
    f.eval_on(&near_y)
        .map_err(|_| "coefficient is not locally constant at the fixed point".to_string())?;
    for w in windows {
        for (i, t) in w.translates().iter().enumerate() {
            f.eval_on(t).map_err(|_| {
                format!(
                    "coefficient is not constant on translate {i} of window {}",
                    w.cylinder
                )
            })?;
        }
    }
    Ok(())
}

fn positive_power_check(
    scheme: &Scheme,
    f: &LCFunction,
    j: i64,
    windows: &[Window],
) -> Result<(), String> {
    for (_, support) in f.terms() {
        // support must avoid E, T(E), ..., T^{j-1}(E)
        for i in 0..j {
            let te = scheme
                .base
                .shift_mod(i)
                .map_err(|e| format!("shift failure: {e}"))?;
            if !support.is_disjoint(&te) {
                return Err(format!(
                    "support {support} meets T^{i}(E); the monomial is not a combination of \
                     generator words (for example, the bare shift t is only a limit of such)"
                ));
            }
        }
        // decompose over generator words Z_j ... Z_1 and certify each
        // degree-zero cofactor chi_{support ∩ wordset}
        let mut stack: Vec<(i64, Cylinder)> = vec![(0, support.clone())];
        while let Some((offset, cur)) = stack.pop() {
            if offset == j {
                b0_check(scheme, &LCFunction::indicator(cur), windows)?;
                continue;
            }
            for z in &scheme.partition {
                let tz = z
                    .shift_mod(offset)
                    .map_err(|e| format!("shift failure: {e}"))?;
                if let Some(meet) = cur.intersect(&tz) {
                    stack.push((offset + 1, meet));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON exchange for crossed matrices
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TermJson {
    coef: String,
    power: i64,
    cylinder: CylinderSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryJson {
    row: usize,
    col: usize,
    terms: Vec<TermJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CrossedMatrixJson {
    size: usize,
    entries: Vec<EntryJson>,
}

pub fn matrix_to_json(a: &CrossedMatrix) -> CrossedMatrixJson {
    let entries = a
        .entries()
        .map(|(row, col, elem)| EntryJson {
            row,
            col,
            terms: elem
                .terms()
                .flat_map(|(power, f)| {
                    f.terms().iter().map(move |(coef, cyl)| TermJson {
                        coef: format_rat(coef),
                        power,
                        cylinder: CylinderSpec::of(cyl),
                    })
                })
                .collect(),
        })
        .collect();
    CrossedMatrixJson { size: a.size, entries }
}

pub fn matrix_from_json(
    space: &Space,
    json: &CrossedMatrixJson,
) -> Result<CrossedMatrix, SchemeError> {
    let mut m = CrossedMatrix::zero(space.clone(), json.size);
    for entry in &json.entries {
        if entry.row >= json.size || entry.col >= json.size {
            return Err(SchemeError::Parse(format!(
                "entry ({}, {}) outside a size-{} matrix",
                entry.row, entry.col, json.size
            )));
        }
        let mut elem = CrossedElement::zero(space.clone());
        for term in &entry.terms {
            let coef = parse_rat(&term.coef).map_err(SchemeError::Parse)?;
            let cyl = term.cylinder.resolve(space)?;
            elem = elem.add(&CrossedElement::monomial(
                LCFunction::indicator(cyl).scale(&coef),
                term.power,
            ));
        }
        m.add_to(entry.row, entry.col, &elem);
    }
    Ok(m)
}

pub fn parse_matrix_json(space: &Space, text: &str) -> Result<CrossedMatrix, SchemeError> {
    let json: CrossedMatrixJson =
        serde_json::from_str(text).map_err(|e| SchemeError::Parse(e.to_string()))?;
    matrix_from_json(space, &json)
}

/// Scheme presets by name, the registry the CLI selects from.
pub fn preset_scheme(
    name: &str,
    radices: Option<RadixSeq>,
    level: Option<u64>,
) -> Result<Scheme, SchemeError> {
    match name {
        "lamplighter_half" | "half" | "a1/2" => Ok(Scheme::lamplighter_half()),
        "odometer" => {
            let radices = radices
                .ok_or_else(|| SchemeError::Parse("odometer scheme needs --radices".into()))?;
            let level = level
                .ok_or_else(|| SchemeError::Parse("odometer scheme needs --level".into()))?;
            Ok(Scheme::odometer(radices, level))
        }
        _ => {
            if let Some(n) = name.strip_prefix('a').and_then(|s| s.parse::<u32>().ok()) {
                return Ok(Scheme::lamplighter(n));
            }
            if let Some(n) = name
                .strip_prefix("lamplighter_")
                .and_then(|s| s.parse::<u32>().ok())
            {
                return Ok(Scheme::lamplighter(n));
            }
            Err(SchemeError::Parse(format!(
                "unknown scheme preset {name:?}; use lamplighter_half, a<n>, or odometer"
            )))
        }
    }
}

/// The element a_n = chi_{X\E} t + t^{-1} chi_{X\E} of the scheme's algebra,
/// as a 1x1 matrix. t^{-1} chi_{X\E} = (chi_{X\E} ∘ T) t^{-1}.
pub fn lamplighter_an(scheme: &Scheme) -> CrossedMatrix {
    let co = scheme.complement_base();
    let fwd = CrossedElement::monomial(co.clone(), 1);
    let back = CrossedElement::monomial(co.compose_shift(1).expect("binary shift"), -1);
    CrossedMatrix::from_element(fwd.add(&back))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Continuation;
    use crate::exactla::kernel_dim;
    use crate::rational::{pow2, rat, rat_int};
    use rand::{Rng, SeedableRng};

    #[test]
    fn half_scheme_window_basics() {
        let s = Scheme::lamplighter_half();
        let e = enumerate_windows(&s, &Stop::Depth(0)).unwrap();
        // only [1 1̲ 1] of length 1 and measure 1/8
        assert_eq!(e.windows.len(), 1);
        let w = &e.windows[0];
        assert_eq!(w.len(), 1);
        assert_eq!(w.measure, rat(1, 8));
        assert_eq!(e.coverage, rat(1, 8));
        assert!(w.validate(&s));
    }

    /// Itinerary -> zero block lengths (k_1..k_r) for the half scheme.
    fn zero_blocks(w: &Window) -> Vec<usize> {
        let mut blocks = Vec::new();
        let mut run = 0usize;
        for &z in &w.itinerary {
            // partition order [00̲], [01̲], [10̲]: coordinate-0 bit is
            // 0, 1, 0 respectively
            let bit = [0u8, 1, 0][z];
            if bit == 0 {
                run += 1;
            } else if run > 0 {
                blocks.push(run);
                run = 0;
            }
        }
        if run > 0 {
            blocks.push(run);
        }
        blocks
    }

    #[test]
    fn half_scheme_r1_coverage_contribution() {
        // windows [1 1̲ 0^k 1 1] with one zero block contribute
        // Σ_k (k+2) / 2^{k+4} = 1/4 in the limit; compare the depth-20
        // partial sum against the same geometric partial sum.
        let s = Scheme::lamplighter_half();
        let e = enumerate_windows(&s, &Stop::Depth(20)).unwrap();
        let mut r1 = Rat::zero();
        let mut oracle = Rat::zero();
        for k in 1..=19i64 {
            oracle += Rat::new(BigInt::from(k + 2), BigInt::one()) * pow2(-(k + 4));
        }
        for w in &e.windows {
            if zero_blocks(w).len() == 1 {
                r1 += &w.measure * rat_int(w.len() as i64);
            }
        }
        assert_eq!(r1, oracle);
        // full coverage approaches 1 monotonically
        let shallow = enumerate_windows(&s, &Stop::Depth(6)).unwrap();
        assert!(shallow.coverage < e.coverage);
        assert!(e.coverage < Rat::one());
    }

    #[test]
    fn odometer_single_window_full_coverage() {
        let radices = RadixSeq::new(vec![2, 3], Continuation::Periodic);
        let s = Scheme::odometer(radices, 2);
        let e = enumerate_windows(&s, &Stop::Depth(10)).unwrap();
        assert_eq!(e.windows.len(), 1);
        let w = &e.windows[0];
        assert_eq!(w.len(), 6); // p_2 = 6
        assert_eq!(w.measure, rat(1, 6));
        assert_eq!(e.coverage, rat_int(1));
        assert!(w.validate(&s));
    }

    #[test]
    fn window_counts_match_macci_realization() {
        // windows of A_n of length 2n+1+k number Fib_{2n+1}(k)
        use crate::betti::MacciTable;
        for n in 0..=2u32 {
            let s = Scheme::lamplighter(n);
            let m = 2 * n as usize + 1;
            let max_len = m + 7;
            let counts = window_length_counts(&s, max_len).unwrap();
            let fib = MacciTable::new(m as u32);
            assert_eq!(counts[1], BigUint::one());
            for len in 2..=max_len {
                let expect = if len > m {
                    fib.value((len - m) as u64)
                } else {
                    BigUint::zero()
                };
                assert_eq!(counts[len], expect, "n={n} len={len}");
            }
        }
    }

    #[test]
    fn window_counts_match_enumeration() {
        for scheme in [
            Scheme::lamplighter_half(),
            Scheme::lamplighter(0),
            Scheme::lamplighter(1),
        ] {
            let depth = 9;
            let e = enumerate_windows(&scheme, &Stop::Depth(depth)).unwrap();
            let counts = window_length_counts(&scheme, depth + 1).unwrap();
            for len in 1..=depth + 1 {
                let enumerated = e.windows.iter().filter(|w| w.len() == len).count();
                assert_eq!(
                    BigUint::from(enumerated),
                    counts[len],
                    "{} len={len}",
                    scheme.name()
                );
            }
            // same-length windows share their measure
            for len in 1..=depth + 1 {
                let measures: Vec<&Rat> = e
                    .windows
                    .iter()
                    .filter(|w| w.len() == len)
                    .map(|w| &w.measure)
                    .collect();
                if let Some(first) = measures.first() {
                    assert!(measures.iter().all(|m| m == first));
                }
            }
        }
    }

    #[test]
    fn coverage_stop() {
        let s = Scheme::lamplighter_half();
        let e = enumerate_windows(&s, &Stop::Coverage(rat(1, 2))).unwrap();
        assert!(e.coverage >= rat(1, 2));
        assert!(enumerate_windows(&s, &Stop::Coverage(rat_int(1))).is_err());
    }

    #[test]
    fn compress_complement_shift_is_lower_shift() {
        for scheme in [Scheme::lamplighter_half(), Scheme::lamplighter(0)] {
            let a = CrossedMatrix::from_element(CrossedElement::monomial(
                scheme.complement_base(),
                1,
            ));
            let e = enumerate_windows(&scheme, &Stop::Depth(8)).unwrap();
            for w in &e.windows {
                let m = compress(&a, w).unwrap();
                assert_eq!(m, QMatrix::lower_shift(w.len()), "{}", scheme.name());
            }
        }
    }

    #[test]
    fn compress_an_is_shift_plus_transpose() {
        let scheme = Scheme::lamplighter(0);
        let a = lamplighter_an(&scheme);
        let e = enumerate_windows(&scheme, &Stop::Depth(9)).unwrap();
        for w in &e.windows {
            let m = compress(&a, w).unwrap();
            let t = QMatrix::lower_shift(w.len());
            assert_eq!(m, t.add(&t.transpose()));
            assert_eq!(kernel_dim(&m), w.len() % 2);
        }
    }

    #[test]
    fn compress_identity() {
        let scheme = Scheme::lamplighter_half();
        let a = CrossedMatrix::identity(scheme.space.clone(), 2);
        let e = enumerate_windows(&scheme, &Stop::Depth(4)).unwrap();
        for w in &e.windows {
            assert_eq!(compress(&a, w).unwrap(), QMatrix::identity(2 * w.len()));
        }
    }

    #[test]
    fn generator_identities() {
        let s = Scheme::lamplighter_half();
        // (g_{[00̲]})* = chi_{[0̲0]} t^{-1}
        let gstar = generator_expr_eval(&s, "g0'").unwrap();
        let expect = CrossedElement::monomial(
            LCFunction::indicator(Cylinder::new(s.space.clone(), &[(0, 0), (1, 0)]).unwrap()),
            -1,
        );
        assert_eq!(gstar, expect);
        // (g*)* = g
        assert_eq!(gstar.adjoint().unwrap(), CrossedElement::generator(&s, 0));
        // g_Z g_Z* = chi_Z and g_Z* g_Z = chi_{T^{-1} Z}
        for i in 0..3 {
            let g = CrossedElement::generator(&s, i);
            let left = g.mul(&g.adjoint().unwrap()).unwrap();
            assert_eq!(
                left,
                CrossedElement::from_function(LCFunction::indicator(s.partition[i].clone()))
            );
            let right = g.adjoint().unwrap().mul(&g).unwrap();
            let tz = s.partition[i].shift_mod(-1).unwrap();
            assert_eq!(
                right,
                CrossedElement::from_function(LCFunction::indicator(tz))
            );
        }
        // Σ_Z g_Z* g_Z + chi_{T^{-1} E} = 1
        let sum = generator_expr_eval(&s, "g0'*g0 + g1'*g1 + g2'*g2").unwrap();
        let te = s.base.shift_mod(-1).unwrap();
        let total = sum.add(&CrossedElement::from_function(LCFunction::indicator(te)));
        assert_eq!(total, CrossedElement::one(s.space.clone()));
    }

    #[test]
    fn expression_parser_scalars_and_precedence() {
        let s = Scheme::lamplighter_half();
        let a = generator_expr_eval(&s, "1/2 * g0 + g1 * g2'").unwrap();
        let b = generator_expr_eval(&s, "(1/2*g0) + (g1 * adj(g2))").unwrap();
        assert_eq!(a, b);
        assert!(generator_expr_eval(&s, "g7").is_err());
        assert!(generator_expr_eval(&s, "g0 +").is_err());
    }

    #[test]
    fn membership_examples() {
        let s = Scheme::lamplighter_half();
        let space = s.space.clone();
        // chi_{[0̲0]} t^{-1} is (g_{[00̲]})*
        let ok = CrossedMatrix::from_element(CrossedElement::monomial(
            LCFunction::indicator(Cylinder::new(space.clone(), &[(0, 0), (1, 0)]).unwrap()),
            -1,
        ));
        membership_translate(&s, &ok).unwrap();
        // chi_{[1̲1]} = chi_{T^{-1}E} = 1 - chi_{[0̲0]} - chi_{[0̲1]} - chi_{[1̲0]}
        let te = CrossedMatrix::from_element(CrossedElement::from_function(
            LCFunction::indicator(s.base.shift_mod(-1).unwrap()),
        ));
        membership_translate(&s, &te).unwrap();
        // the bare shift t is not in the algebra
        let t = CrossedMatrix::from_element(CrossedElement::monomial(
            LCFunction::constant(space.clone(), Rat::one()),
            1,
        ));
        assert!(matches!(
            membership_translate(&s, &t),
            Err(SchemeError::Reject(_))
        ));
        // a far-away coordinate indicator is not in the coefficient algebra
        let far = CrossedMatrix::from_element(CrossedElement::from_function(
            LCFunction::indicator(Cylinder::new(space, &[(5, 0)]).unwrap()),
        ));
        assert!(matches!(
            membership_translate(&s, &far),
            Err(SchemeError::Reject(_))
        ));
    }

    #[test]
    fn membership_odometer_level_bound() {
        let radices = RadixSeq::new(vec![2, 2], Continuation::Constant);
        let s = Scheme::odometer(radices, 1);
        let space = s.space.clone();
        let level1 = CrossedMatrix::from_element(CrossedElement::from_function(
            LCFunction::indicator(Cylinder::prefix(space.clone(), &[1]).unwrap()),
        ));
        membership_translate(&s, &level1).unwrap();
        let level2 = CrossedMatrix::from_element(CrossedElement::from_function(
            LCFunction::indicator(Cylinder::prefix(space, &[1, 0]).unwrap()),
        ));
        assert!(membership_translate(&s, &level2).is_err());
    }

    fn random_expression(rng: &mut impl Rng, depth: usize, gens: usize) -> String {
        if depth == 0 {
            let i = rng.gen_range(0..gens);
            return format!("g{i}");
        }
        match rng.gen_range(0..5) {
            0 => format!(
                "({} + {})",
                random_expression(rng, depth - 1, gens),
                random_expression(rng, depth - 1, gens)
            ),
            1 => format!(
                "({} * {})",
                random_expression(rng, depth - 1, gens),
                random_expression(rng, depth - 1, gens)
            ),
            2 => format!("{}'", random_expression(rng, depth - 1, gens)),
            3 => format!(
                "({} - {})",
                random_expression(rng, depth - 1, gens),
                random_expression(rng, depth - 1, gens)
            ),
            _ => {
                let num = rng.gen_range(1..4);
                let den = rng.gen_range(1..4);
                format!("{num}/{den} * {}", random_expression(rng, depth - 1, gens))
            }
        }
    }

    #[test]
    fn compress_is_multiplicative_on_generator_expressions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for scheme in [Scheme::lamplighter_half(), Scheme::lamplighter(0)] {
            let windows = enumerate_windows(&scheme, &Stop::Depth(6)).unwrap().windows;
            let gens = scheme.partition.len();
            for _ in 0..20 {
                let ea = random_expression(&mut rng, 2, gens);
                let eb = random_expression(&mut rng, 2, gens);
                let a = generator_expr_eval(&scheme, &ea).unwrap();
                let b = generator_expr_eval(&scheme, &eb).unwrap();
                let ab = a.mul(&b).unwrap();
                let astar = a.adjoint().unwrap();
                let ma = CrossedMatrix::from_element(a);
                let mb = CrossedMatrix::from_element(b);
                let mab = CrossedMatrix::from_element(ab);
                let mastar = CrossedMatrix::from_element(astar);
                for w in &windows {
                    let ca = compress(&ma, w).unwrap();
                    let cb = compress(&mb, w).unwrap();
                    let cab = compress(&mab, w).unwrap();
                    assert_eq!(cab, ca.mul(&cb), "{ea} * {eb} at {}", w.cylinder);
                    let cs = compress(&mastar, w).unwrap();
                    assert_eq!(cs, ca.transpose(), "adjoint of {ea}");
                }
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let a = lamplighter_an(&Scheme::lamplighter(0));
        let json = matrix_to_json(&a);
        let text = serde_json::to_string(&json).unwrap();
        let back = parse_matrix_json(&a.space, &text).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn preset_registry() {
        assert_eq!(preset_scheme("a1", None, None).unwrap().name(), "lamplighter_1");
        assert_eq!(
            preset_scheme("lamplighter_half", None, None).unwrap().name(),
            "lamplighter_half"
        );
        assert!(preset_scheme("odometer", None, None).is_err());
        let radices = RadixSeq::new(vec![2], Continuation::Constant);
        assert_eq!(
            preset_scheme("odometer", Some(radices), Some(2)).unwrap().name(),
            "odometer_level_2"
        );
    }
}
