//! Cylinder sets on product Cantor spaces, the two dynamics (bilateral
//! Bernoulli shift and one-sided odometer addition), product measures, and
//! locally constant ℚ-valued functions.
//!
//! Everything here is immutable and pure; cylinders are sparse constraint
//! maps in canonical coordinate order, so containment and intersection are
//! O(#constraints).

use crate::rational::{rat_int, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DynError {
    #[error("symbol {symbol} out of range at coordinate {coord} (alphabet size {size})")]
    SymbolOutOfRange { coord: i64, symbol: u32, size: u32 },
    #[error("coordinate {0} outside the space's coordinate set")]
    BadCoordinate(i64),
    #[error("operation mixes cylinders over different spaces")]
    SpaceMismatch,
    #[error("odometer shift needs a full prefix cylinder (constraints exactly 1..m)")]
    NotFullPrefix,
    #[error("function is not constant on the given cylinder")]
    NonConstant,
}

/// Continuation rule for an infinite radix sequence given by a finite head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Continuation {
    /// head repeats periodically: n_{i+len} = n_i
    Periodic,
    /// last head entry repeats forever
    Constant,
}

/// Finite description of the radix sequence (n_i), i >= 1, each n_i >= 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadixSeq {
    pub head: Vec<u32>,
    pub continuation: Continuation,
}

impl RadixSeq {
    pub fn new(head: Vec<u32>, continuation: Continuation) -> Self {
        assert!(!head.is_empty(), "radix sequence needs at least one entry");
        assert!(head.iter().all(|&n| n >= 2), "radices must be >= 2");
        RadixSeq { head, continuation }
    }

    /// n_i for i >= 1.
    pub fn radix(&self, i: u64) -> u32 {
        assert!(i >= 1);
        let idx = (i - 1) as usize;
        if idx < self.head.len() {
            self.head[idx]
        } else {
            match self.continuation {
                Continuation::Periodic => self.head[idx % self.head.len()],
                Continuation::Constant => *self.head.last().unwrap(),
            }
        }
    }

    /// p_m = n_1 * ... * n_m.
    pub fn partial_product(&self, m: u64) -> BigInt {
        let mut p = BigInt::one();
        for i in 1..=m {
            p *= BigInt::from(self.radix(i));
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    /// X = {0,1}^Z with the Bernoulli shift T(x)_i = x_{i+1}.
    BinaryBilateral,
    /// X = prod_{i>=1} {0..n_i-1} with odometer addition by carry-over.
    MixedRadix(RadixSeq),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub kind: SpaceKind,
}

impl Space {
    pub fn binary() -> Self {
        Space { kind: SpaceKind::BinaryBilateral }
    }

    pub fn odometer(radices: RadixSeq) -> Self {
        Space { kind: SpaceKind::MixedRadix(radices) }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.kind, SpaceKind::BinaryBilateral)
    }

    pub fn radices(&self) -> Option<&RadixSeq> {
        match &self.kind {
            SpaceKind::BinaryBilateral => None,
            SpaceKind::MixedRadix(r) => Some(r),
        }
    }

    pub fn alphabet_size(&self, coord: i64) -> Result<u32, DynError> {
        match &self.kind {
            SpaceKind::BinaryBilateral => Ok(2),
            SpaceKind::MixedRadix(r) => {
                if coord < 1 {
                    Err(DynError::BadCoordinate(coord))
                } else {
                    Ok(r.radix(coord as u64))
                }
            }
        }
    }
}

/// A clopen subset of X given by finitely many coordinate constraints.
/// The empty constraint map denotes the whole space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cylinder {
    pub space: Space,
    pub constraints: BTreeMap<i64, u32>,
}

impl Cylinder {
    pub fn whole(space: Space) -> Self {
        Cylinder { space, constraints: BTreeMap::new() }
    }

    pub fn new(space: Space, constraints: &[(i64, u32)]) -> Result<Self, DynError> {
        let mut map = BTreeMap::new();
        for &(c, s) in constraints {
            let size = space.alphabet_size(c)?;
            if s >= size {
                return Err(DynError::SymbolOutOfRange { coord: c, symbol: s, size });
            }
            if let Some(&prev) = map.get(&c) {
                if prev != s {
                    // contradictory input is simply not a cylinder
                    return Err(DynError::SymbolOutOfRange { coord: c, symbol: s, size });
                }
            }
            map.insert(c, s);
        }
        Ok(Cylinder { space, constraints: map })
    }

    /// Prefix cylinder [a_1 a_2 ... a_m] of a mixed-radix space.
    pub fn prefix(space: Space, digits: &[u32]) -> Result<Self, DynError> {
        let pairs: Vec<(i64, u32)> =
            digits.iter().enumerate().map(|(i, &d)| (i as i64 + 1, d)).collect();
        Cylinder::new(space, &pairs)
    }

    pub fn is_whole(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Product of per-coordinate masses over the constrained coordinates.
    pub fn measure(&self) -> Rat {
        let mut m = Rat::one();
        for (&c, _) in &self.constraints {
            let size = self.space.alphabet_size(c).expect("validated at construction");
            m *= Rat::new(BigInt::one(), BigInt::from(size));
        }
        m
    }

    /// Exact set containment: self ⊆ other.
    pub fn subset(&self, other: &Cylinder) -> bool {
        if self.space != other.space {
            return false;
        }
        other
            .constraints
            .iter()
            .all(|(c, s)| self.constraints.get(c) == Some(s))
    }

    /// Exact intersection; conflicting constraints give `None` (empty set).
    pub fn intersect(&self, other: &Cylinder) -> Option<Cylinder> {
        if self.space != other.space {
            return None;
        }
        let mut map = self.constraints.clone();
        for (&c, &s) in &other.constraints {
            match map.get(&c) {
                Some(&prev) if prev != s => return None,
                _ => {
                    map.insert(c, s);
                }
            }
        }
        Some(Cylinder { space: self.space.clone(), constraints: map })
    }

    pub fn is_disjoint(&self, other: &Cylinder) -> bool {
        self.intersect(other).is_none()
    }

    /// Is this a full prefix cylinder [a_1..a_m] (odometer spaces)?
    pub fn full_prefix_level(&self) -> Option<u64> {
        if self.space.is_binary() {
            return None;
        }
        let m = self.constraints.len() as i64;
        for (i, (&c, _)) in self.constraints.iter().enumerate() {
            if c != i as i64 + 1 {
                return None;
            }
        }
        let _ = m;
        Some(self.constraints.len() as u64)
    }

    /// Mixed-radix value l = a_1 + a_2 n_1 + ... + a_m n_1...n_{m-1} of a full
    /// prefix, together with its level.
    fn prefix_value(&self) -> Result<(BigInt, u64), DynError> {
        let level = self.full_prefix_level().ok_or(DynError::NotFullPrefix)?;
        let radices = self.space.radices().ok_or(DynError::NotFullPrefix)?;
        let mut value = BigInt::zero();
        let mut weight = BigInt::one();
        for i in 1..=level {
            let a = self.constraints[&(i as i64)];
            value += &weight * BigInt::from(a);
            weight *= BigInt::from(radices.radix(i));
        }
        Ok((value, level))
    }

    /// T^j of this cylinder, exactly.
    ///
    /// Binary shift: the constraint at coordinate p moves to p - j.
    /// Odometer: defined on full prefix cylinders; the prefix value l maps to
    /// l + j, which must stay inside [0, p_m) — a carry escaping the prefix
    /// is refused and the caller refines to a deeper level first.
    pub fn shift_image(&self, j: i64) -> Result<Cylinder, DynError> {
        match &self.space.kind {
            SpaceKind::BinaryBilateral => {
                let constraints = self
                    .constraints
                    .iter()
                    .map(|(&c, &s)| (c - j, s))
                    .collect();
                Ok(Cylinder { space: self.space.clone(), constraints })
            }
            SpaceKind::MixedRadix(radices) => {
                let (value, level) = self.prefix_value()?;
                let p_m = radices.partial_product(level);
                let shifted = value + BigInt::from(j);
                if shifted.is_negative() || shifted >= p_m {
                    return Err(DynError::NotFullPrefix);
                }
                Ok(Cylinder::from_prefix_value(self.space.clone(), &shifted, level))
            }
        }
    }

    /// T^j as an exact set image: like `shift_image`, but a carry escaping
    /// the prefix wraps modulo p_m. This is exact because the odometer
    /// restricted to the tail coordinates is a bijection, so
    /// T([p_m - 1]) = [0] as sets. Used by the function algebra, where
    /// chi_S ∘ T^j = chi_{T^{-j} S} must be total on full prefixes.
    pub fn shift_mod(&self, j: i64) -> Result<Cylinder, DynError> {
        match &self.space.kind {
            SpaceKind::BinaryBilateral => self.shift_image(j),
            SpaceKind::MixedRadix(radices) => {
                let (value, level) = self.prefix_value()?;
                let p_m = radices.partial_product(level);
                let mut shifted = (value + BigInt::from(j)) % &p_m;
                if shifted.is_negative() {
                    shifted += &p_m;
                }
                Ok(Cylinder::from_prefix_value(self.space.clone(), &shifted, level))
            }
        }
    }

    /// Inverse of `prefix_value`: the full prefix of mixed-radix value `l`.
    pub fn from_prefix_value(space: Space, l: &BigInt, level: u64) -> Cylinder {
        let radices = space.radices().expect("mixed-radix space").clone();
        let mut digits = Vec::with_capacity(level as usize);
        let mut v = l.clone();
        for i in 1..=level {
            let n = BigInt::from(radices.radix(i));
            let d = v.clone() % &n;
            digits.push((i as i64, u32::try_from(d).expect("digit fits")));
            v /= n;
        }
        assert!(v.is_zero(), "value exceeds p_m at this level");
        Cylinder {
            space,
            constraints: digits.into_iter().collect(),
        }
    }

    /// Splits a mixed-radix cylinder into the full prefix cylinders of level
    /// `m` it contains. Binary cylinders and too-shallow levels are refused.
    pub fn refine_to_level(&self, m: u64) -> Result<Vec<Cylinder>, DynError> {
        let radices = self.space.radices().ok_or(DynError::NotFullPrefix)?.clone();
        if let Some(&max_c) = self.constraints.keys().next_back() {
            if max_c > m as i64 {
                return Err(DynError::NotFullPrefix);
            }
        }
        let mut out = vec![self.clone()];
        for i in 1..=m as i64 {
            if out[0].constraints.contains_key(&i) {
                continue;
            }
            let n = radices.radix(i as u64);
            let mut next = Vec::with_capacity(out.len() * n as usize);
            for cyl in &out {
                for s in 0..n {
                    let mut c = cyl.clone();
                    c.constraints.insert(i, s);
                    next.push(c);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Largest |coordinate| constrained (binary) or largest coordinate
    /// (odometer); 0 for the whole space.
    pub fn radius(&self) -> u64 {
        self.constraints
            .keys()
            .map(|&c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_whole() {
            return write!(f, "[X]");
        }
        let parts: Vec<String> = self
            .constraints
            .iter()
            .map(|(c, s)| format!("{c}:{s}"))
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Serialized cylinder form: binary `{"coords": {"-1": 0}}`, odometer
/// `{"prefix": [0, 2]}`. The space itself comes from context.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CylinderSpec {
    Coords { coords: BTreeMap<String, u32> },
    Prefix { prefix: Vec<u32> },
}

impl CylinderSpec {
    pub fn resolve(&self, space: &Space) -> Result<Cylinder, DynError> {
        match self {
            CylinderSpec::Coords { coords } => {
                let mut pairs = Vec::with_capacity(coords.len());
                for (k, &v) in coords {
                    let c: i64 = k.parse().map_err(|_| DynError::BadCoordinate(0))?;
                    pairs.push((c, v));
                }
                Cylinder::new(space.clone(), &pairs)
            }
            CylinderSpec::Prefix { prefix } => Cylinder::prefix(space.clone(), prefix),
        }
    }

    pub fn of(cyl: &Cylinder) -> CylinderSpec {
        if let Some(level) = cyl.full_prefix_level() {
            if !cyl.space.is_binary() {
                let prefix = (1..=level as i64)
                    .map(|i| cyl.constraints[&i])
                    .collect();
                return CylinderSpec::Prefix { prefix };
            }
        }
        CylinderSpec::Coords {
            coords: cyl
                .constraints
                .iter()
                .map(|(c, s)| (c.to_string(), *s))
                .collect(),
        }
    }
}

/// Locally constant function with exact rational values, kept in a
/// normalized disjoint-support form: pairwise disjoint cylinders with
/// nonzero coefficients. The function is 0 outside the listed supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LCFunction {
    pub space: Space,
    terms: Vec<(Rat, Cylinder)>,
}

impl LCFunction {
    pub fn zero(space: Space) -> Self {
        LCFunction { space, terms: Vec::new() }
    }

    pub fn constant(space: Space, value: Rat) -> Self {
        LCFunction::from_terms(space.clone(), vec![(value, Cylinder::whole(space))])
    }

    pub fn indicator(cyl: Cylinder) -> Self {
        LCFunction::from_terms(cyl.space.clone(), vec![(Rat::one(), cyl)])
    }

    /// Builds and normalizes. Terms may overlap; normalization refines them
    /// to disjoint atoms and combines coefficients.
    pub fn from_terms(space: Space, terms: Vec<(Rat, Cylinder)>) -> Self {
        let mut f = LCFunction { space, terms: Vec::new() };
        for (coef, cyl) in terms {
            assert_eq!(cyl.space, f.space, "term over a different space");
            f.add_term(coef, cyl);
        }
        f.terms.retain(|(c, _)| !c.is_zero());
        f
    }

    /// Adds coef * chi_cyl, maintaining disjointness.
    fn add_term(&mut self, coef: Rat, cyl: Cylinder) {
        if coef.is_zero() {
            return;
        }
        let mut pending = vec![(coef, cyl)];
        while let Some((c, s)) = pending.pop() {
            let mut overlap = None;
            for (i, (_, t)) in self.terms.iter().enumerate() {
                if !s.is_disjoint(t) {
                    overlap = Some(i);
                    break;
                }
            }
            match overlap {
                None => self.terms.push((c, s)),
                Some(i) => {
                    let (tc, t) = self.terms.remove(i);
                    let both = s.intersect(&t).unwrap();
                    // t \ s keeps coefficient tc, s \ t re-queues with c,
                    // the overlap gets the sum.
                    for piece in cylinder_difference(&t, &both) {
                        self.terms.push((tc.clone(), piece));
                    }
                    let sum = &tc + &c;
                    if !sum.is_zero() {
                        self.terms.push((sum, both.clone()));
                    }
                    for piece in cylinder_difference(&s, &both) {
                        pending.push((c.clone(), piece));
                    }
                }
            }
        }
    }

    /// The normalized disjoint-support terms.
    pub fn terms(&self) -> &[(Rat, Cylinder)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest constraint radius among supports.
    pub fn radius(&self) -> u64 {
        self.terms.iter().map(|(_, c)| c.radius()).max().unwrap_or(0)
    }

    /// Value of f on C when f is constant there; `NonConstant` otherwise.
    ///
    /// Constancy is decided exactly: the disjoint atoms meeting C must carry
    /// one common coefficient and cover C (checked by comparing measures,
    /// which is equivalent for clopen sets under a full product measure).
    pub fn eval_on(&self, cyl: &Cylinder) -> Result<Rat, DynError> {
        let mut value: Option<Rat> = None;
        let mut covered = Rat::zero();
        for (coef, support) in &self.terms {
            if let Some(meet) = cyl.intersect(support) {
                match &value {
                    None => value = Some(coef.clone()),
                    Some(v) if v == coef => {}
                    Some(_) => return Err(DynError::NonConstant),
                }
                covered += meet.measure();
            }
        }
        match value {
            None => Ok(Rat::zero()),
            Some(v) => {
                if covered == cyl.measure() {
                    Ok(v)
                } else {
                    Err(DynError::NonConstant)
                }
            }
        }
    }

    pub fn add(&self, other: &LCFunction) -> LCFunction {
        assert_eq!(self.space, other.space);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        LCFunction::from_terms(self.space.clone(), terms)
    }

    pub fn scale(&self, k: &Rat) -> LCFunction {
        LCFunction::from_terms(
            self.space.clone(),
            self.terms
                .iter()
                .map(|(c, s)| (c * k, s.clone()))
                .collect(),
        )
    }

    pub fn neg(&self) -> LCFunction {
        self.scale(&-Rat::one())
    }

    /// Exact pointwise product.
    pub fn mul(&self, other: &LCFunction) -> LCFunction {
        assert_eq!(self.space, other.space);
        let mut terms = Vec::new();
        for (a, s) in &self.terms {
            for (b, t) in &other.terms {
                if let Some(meet) = s.intersect(t) {
                    terms.push((a * b, meet));
                }
            }
        }
        LCFunction::from_terms(self.space.clone(), terms)
    }

    /// f ∘ T^j, via chi_S ∘ T^j = chi_{T^{-j} S} on supports.
    ///
    /// Odometer supports must be full prefixes (refine first otherwise);
    /// carries wrap (`shift_mod`), which is the exact set image.
    pub fn compose_shift(&self, j: i64) -> Result<LCFunction, DynError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (c, s) in &self.terms {
            terms.push((c.clone(), s.shift_mod(-j)?));
        }
        Ok(LCFunction::from_terms(self.space.clone(), terms))
    }

    /// Odometer helper: rewrites every support as full prefix cylinders of
    /// level >= m so that shifts become available.
    pub fn refine_to_level(&self, m: u64) -> Result<LCFunction, DynError> {
        let mut terms = Vec::new();
        for (c, s) in &self.terms {
            for piece in s.refine_to_level(m)? {
                terms.push((c.clone(), piece));
            }
        }
        Ok(LCFunction::from_terms(self.space.clone(), terms))
    }
}

/// Partition of t \ meet into cylinders, where meet = t ∩ s for some s.
/// Standard coordinate-by-coordinate splitting.
fn cylinder_difference(t: &Cylinder, meet: &Cylinder) -> Vec<Cylinder> {
    debug_assert!(meet.subset(t));
    let mut out = Vec::new();
    let mut current = t.clone();
    for (&coord, &sym) in &meet.constraints {
        if current.constraints.get(&coord) == Some(&sym) {
            continue;
        }
        let size = t.space.alphabet_size(coord).expect("valid coordinate");
        for v in 0..size {
            if v != sym {
                let mut branch = current.clone();
                branch.constraints.insert(coord, v);
                out.push(branch);
            }
        }
        current.constraints.insert(coord, sym);
    }
    out
}

pub fn two_sided_mass_check(f: &LCFunction) -> Rat {
    // total mass of the support atoms; used in tests
    f.terms().iter().map(|(_, c)| c.measure()).sum::<Rat>()
}

/// chi_X - chi_E as a convenience (complement indicator kept in the
/// two-term form the fast rank path recognizes).
pub fn complement_indicator(whole_minus: &Cylinder) -> LCFunction {
    LCFunction::from_terms(
        whole_minus.space.clone(),
        vec![
            (Rat::one(), Cylinder::whole(whole_minus.space.clone())),
            (-rat_int(1), whole_minus.clone()),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn bin() -> Space {
        Space::binary()
    }

    fn bcyl(pairs: &[(i64, u32)]) -> Cylinder {
        Cylinder::new(bin(), pairs).unwrap()
    }

    #[test]
    fn measures() {
        // [1 1̲ 1] fixes three coordinates
        let c = bcyl(&[(-1, 1), (0, 1), (1, 1)]);
        assert_eq!(c.measure(), rat(1, 8));
        assert_eq!(Cylinder::whole(bin()).measure(), rat_int(1));
        let space = Space::odometer(RadixSeq::new(vec![2, 3], Continuation::Periodic));
        let p = Cylinder::prefix(space, &[0, 2]).unwrap();
        assert_eq!(p.measure(), rat(1, 6));
    }

    #[test]
    fn binary_shift_moves_constraints() {
        // [0 0̲] shifted by -1 gives [0̲ 0]
        let c = bcyl(&[(-1, 0), (0, 0)]);
        let shifted = c.shift_image(-1).unwrap();
        assert_eq!(shifted, bcyl(&[(0, 0), (1, 0)]));
        assert_eq!(c.shift_image(0).unwrap(), c);
    }

    #[test]
    fn shift_composes_and_preserves_measure() {
        let c = bcyl(&[(-2, 1), (0, 0), (3, 1)]);
        let a = c.shift_image(5).unwrap().shift_image(-2).unwrap();
        let b = c.shift_image(3).unwrap();
        assert_eq!(a, b);
        assert_eq!(c.shift_image(7).unwrap().measure(), c.measure());
    }

    /// Independent oracle: odometer shift through digit/integer conversion.
    fn odo_shift_oracle(radices: &RadixSeq, digits: &[u32], j: i64) -> Option<Vec<u32>> {
        let mut value: i64 = 0;
        let mut weight: i64 = 1;
        for (i, &d) in digits.iter().enumerate() {
            value += d as i64 * weight;
            weight *= radices.radix(i as u64 + 1) as i64;
        }
        let shifted = value + j;
        if shifted < 0 || shifted >= weight {
            return None;
        }
        let mut v = shifted;
        let mut out = Vec::new();
        for i in 0..digits.len() {
            let n = radices.radix(i as u64 + 1) as i64;
            out.push((v % n) as u32);
            v /= n;
        }
        Some(out)
    }

    #[test]
    fn odometer_shift_matches_oracle_and_refuses_carry_escape() {
        let radices = RadixSeq::new(vec![2, 3], Continuation::Periodic);
        let space = Space::odometer(radices.clone());
        for level in 1..=3u64 {
            let p_m: i64 = (1..=level).map(|i| radices.radix(i) as i64).product();
            for l in 0..p_m {
                let cyl =
                    Cylinder::from_prefix_value(space.clone(), &BigInt::from(l), level);
                for j in -3..=3i64 {
                    let digits: Vec<u32> =
                        (1..=level as i64).map(|i| cyl.constraints[&i]).collect();
                    match odo_shift_oracle(&radices, &digits, j) {
                        Some(expect) => {
                            let img = cyl.shift_image(j).unwrap();
                            let got: Vec<u32> = (1..=level as i64)
                                .map(|i| img.constraints[&i])
                                .collect();
                            assert_eq!(got, expect);
                            assert_eq!(img.measure(), cyl.measure());
                        }
                        None => assert!(cyl.shift_image(j).is_err()),
                    }
                }
            }
        }
        // [prefix 1,2] + 1 carries out of level 2: refuse
        let c = Cylinder::prefix(space.clone(), &[1, 2]).unwrap();
        assert_eq!(c.shift_image(1), Err(DynError::NotFullPrefix));
        // refining to level 3 splits off a piece that shifts in-range; the
        // all-max piece still carries out and needs shift_mod
        let pieces = c.refine_to_level(3).unwrap();
        assert_eq!(pieces.len(), 2);
        let ok: Vec<bool> = pieces.iter().map(|p| p.shift_image(1).is_ok()).collect();
        assert_eq!(ok.iter().filter(|&&b| b).count(), 1);
        // the exact set image wraps: T([1,2]) = [0,0] since the tail odometer
        // is onto
        let wrapped = c.shift_mod(1).unwrap();
        assert_eq!(wrapped, Cylinder::prefix(space, &[0, 0]).unwrap());
    }

    #[test]
    fn subset_and_intersect() {
        let zz = bcyl(&[(0, 0), (1, 0)]); // [0̲0]
        let z = bcyl(&[(0, 0)]); // [0̲]
        assert!(zz.subset(&z));
        assert!(!z.subset(&zz));
        assert!(bcyl(&[(0, 0)]).is_disjoint(&bcyl(&[(0, 1)])));
        // [1 1̲ 0 1 1] not inside [0̲]
        let w = bcyl(&[(-1, 1), (0, 1), (1, 0), (2, 1), (3, 1)]);
        assert!(!w.subset(&z));
        // subset consistent with intersect
        assert_eq!(zz.intersect(&z), Some(zz.clone()));
    }

    #[test]
    fn refinement_measures_sum() {
        let c = bcyl(&[(0, 1)]);
        let left = c.intersect(&bcyl(&[(1, 0)])).unwrap();
        let right = c.intersect(&bcyl(&[(1, 1)])).unwrap();
        assert_eq!(left.measure() + right.measure(), c.measure());
    }

    #[test]
    fn lc_eval() {
        let f = LCFunction::indicator(bcyl(&[(0, 0)]));
        assert_eq!(f.eval_on(&bcyl(&[(0, 0), (1, 1)])).unwrap(), rat_int(1));
        assert_eq!(
            f.eval_on(&bcyl(&[(-1, 1), (0, 1), (1, 1)])).unwrap(),
            rat_int(0)
        );
        let g = f.add(&LCFunction::indicator(bcyl(&[(0, 1)])).neg());
        assert_eq!(g.eval_on(&bcyl(&[(1, 0)])), Err(DynError::NonConstant));
    }

    #[test]
    fn lc_eval_sees_through_split_supports() {
        // chi_{[0̲0]} + chi_{[0̲1]} is constant 1 on [0̲] even though no
        // single atom contains it
        let f = LCFunction::from_terms(
            bin(),
            vec![
                (Rat::one(), bcyl(&[(0, 0), (1, 0)])),
                (Rat::one(), bcyl(&[(0, 0), (1, 1)])),
            ],
        );
        assert_eq!(f.eval_on(&bcyl(&[(0, 0)])).unwrap(), rat_int(1));
    }

    #[test]
    fn lc_algebra() {
        let chi_z = LCFunction::indicator(bcyl(&[(0, 0)]));
        let chi_zz = LCFunction::indicator(bcyl(&[(0, 0), (1, 0)]));
        assert_eq!(chi_z.mul(&chi_zz), chi_zz);
        let diff = chi_z.add(&chi_z.scale(&-Rat::one()));
        assert!(diff.is_zero());
        // (chi_{[00̲]}) ∘ T = chi_{[0̲0]}: same oracle as shift_image
        let f = LCFunction::indicator(bcyl(&[(-1, 0), (0, 0)]));
        assert_eq!(f.compose_shift(1).unwrap(), chi_zz);
    }

    #[test]
    fn normalization_idempotent() {
        let f = LCFunction::from_terms(
            bin(),
            vec![
                (rat(1, 2), bcyl(&[(0, 0)])),
                (rat(1, 2), bcyl(&[(1, 0)])),
                (rat(-1, 2), bcyl(&[(0, 0), (1, 0)])),
            ],
        );
        let renorm = LCFunction::from_terms(bin(), f.terms().to_vec());
        for (c, s) in f.terms() {
            assert_eq!(renorm.eval_on(s).unwrap(), c.clone());
        }
        // disjointness of the normalized form
        for (i, (_, a)) in f.terms().iter().enumerate() {
            for (_, b) in &f.terms()[i + 1..] {
                assert!(a.is_disjoint(b));
            }
        }
    }
}
