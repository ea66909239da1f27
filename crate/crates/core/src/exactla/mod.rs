//! Exact linear algebra: kernel dimension and rank of sparse rational
//! matrices via fraction-free (Bareiss) elimination, connected-component
//! decomposition, kernel bases, and rank over the rational function field.

pub mod poly;

pub use poly::{QPoly, RatFunc, ZPoly};

use crate::rational::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElimError {
    #[error("elimination working memory exceeded the configured cap")]
    MemoryCap,
}

/// Global cap on elimination working memory in bytes; 0 means unlimited.
/// The CLI wires this to L2RANK_MAX_MEM.
static MEMORY_CAP: AtomicU64 = AtomicU64::new(0);

pub fn set_memory_cap(bytes: Option<u64>) {
    MEMORY_CAP.store(bytes.unwrap_or(0), Ordering::Relaxed);
}

fn check_memory(used: u64) -> Result<(), ElimError> {
    let cap = MEMORY_CAP.load(Ordering::Relaxed);
    if cap != 0 && used > cap {
        Err(ElimError::MemoryCap)
    } else {
        Ok(())
    }
}

/// Sparse matrix over ℚ: no stored zeros, indices in range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: BTreeMap<(usize, usize), Rat>,
}

impl QMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        QMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMatrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    /// Full lower shift t_n: ones on the subdiagonal.
    pub fn lower_shift(n: usize) -> Self {
        let mut m = QMatrix::zero(n, n);
        for i in 1..n {
            m.set(i, i - 1, Rat::one());
        }
        m
    }

    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Rat)>,
    ) -> Self {
        let mut m = QMatrix::zero(rows, cols);
        for (r, c, v) in triplets {
            let cur = m.get(r, c) + v;
            m.set(r, c, cur);
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Rat {
        self.entries.get(&(r, c)).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &Rat) {
        let cur = self.get(r, c) + v;
        self.set(r, c, cur);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Rat)> {
        self.entries.iter().map(|(&(r, c), v)| (r, c, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> QMatrix {
        let mut m = QMatrix::zero(self.cols, self.rows);
        for (r, c, v) in self.entries() {
            m.set(c, r, v.clone());
        }
        m
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut m = QMatrix::zero(self.rows, other.cols);
        for (r, k, a) in self.entries() {
            for c in 0..other.cols {
                let b = other.entries.get(&(k, c));
                if let Some(b) = b {
                    m.add_to(r, c, &(a * b));
                }
            }
        }
        m
    }

    pub fn add(&self, other: &QMatrix) -> QMatrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut m = self.clone();
        for (r, c, v) in other.entries() {
            m.add_to(r, c, v);
        }
        m
    }

    pub fn block_diag(&self, other: &QMatrix) -> QMatrix {
        let mut m = QMatrix::zero(self.rows + other.rows, self.cols + other.cols);
        for (r, c, v) in self.entries() {
            m.set(r, c, v.clone());
        }
        for (r, c, v) in other.entries() {
            m.set(self.rows + r, self.cols + c, v.clone());
        }
        m
    }

    /// Matrix-vector product, for kernel verification.
    pub fn apply(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![Rat::zero(); self.rows];
        for (r, c, a) in self.entries() {
            out[r] += a * &v[c];
        }
        out
    }

    /// Rows scaled to integers (kernel and rank are unchanged).
    fn integer_rows(&self) -> Vec<Vec<(usize, BigInt)>> {
        let mut rows: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); self.rows];
        for (r, c, v) in self.entries() {
            rows[r].push((c, v.clone()));
        }
        rows.into_iter()
            .map(|row| {
                let mut lcm = BigInt::one();
                for (_, v) in &row {
                    lcm = lcm.lcm(v.denom());
                }
                row.into_iter()
                    .map(|(c, v)| (c, v.numer() * (&lcm / v.denom())))
                    .collect()
            })
            .collect()
    }
}

/// One bipartite connectivity block of a sparse matrix.
#[derive(Debug, Clone)]
pub struct Block {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub matrix: QMatrix,
}

/// Bipartite component decomposition: blocks partition the nonzero pattern;
/// columns with no nonzero entry are counted separately (each contributes
/// exactly one kernel dimension).
#[derive(Debug, Clone)]
pub struct ComponentSplit {
    pub blocks: Vec<Block>,
    pub isolated_cols: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the bipartite graph on rows ∪ columns induced by
/// the nonzero entries.
pub fn components(m: &QMatrix) -> ComponentSplit {
    // nodes: 0..rows are rows, rows..rows+cols are columns
    let mut uf = UnionFind::new(m.rows + m.cols);
    for (r, c, _) in m.entries() {
        uf.union(r, m.rows + c);
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let mut col_used = vec![false; m.cols];
    let mut row_used = vec![false; m.rows];
    for (r, c, _) in m.entries() {
        row_used[r] = true;
        col_used[c] = true;
    }
    for r in 0..m.rows {
        if row_used[r] {
            groups.entry(uf.find(r)).or_default().0.push(r);
        }
    }
    for c in 0..m.cols {
        if col_used[c] {
            groups.entry(uf.find(m.rows + c)).or_default().1.push(c);
        }
    }
    let isolated_cols = col_used.iter().filter(|&&u| !u).count();
    let blocks = groups
        .into_values()
        .map(|(rows, cols)| {
            let rindex: BTreeMap<usize, usize> =
                rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let cindex: BTreeMap<usize, usize> =
                cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let mut sub = QMatrix::zero(rows.len(), cols.len());
            for &r in &rows {
                for (&(rr, cc), v) in m.entries.range((r, 0)..(r, m.cols)) {
                    sub.set(rindex[&rr], cindex[&cc], v.clone());
                }
            }
            Block { rows, cols, matrix: sub }
        })
        .collect();
    ComponentSplit { blocks, isolated_cols }
}

/// Components of the square matrix viewed as a labeled graph with row i and
/// column i identified as one vertex (the paper's E_A(W) picture). Isolated
/// vertices are included as singleton components.
pub fn graph_components(m: &QMatrix) -> Vec<Vec<usize>> {
    assert_eq!(m.rows, m.cols, "graph view needs a square matrix");
    let mut uf = UnionFind::new(m.rows);
    for (r, c, _) in m.entries() {
        uf.union(r, c);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..m.rows {
        groups.entry(uf.find(v)).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Principal submatrix on a vertex set (square/graph view).
pub fn principal_submatrix(m: &QMatrix, verts: &[usize]) -> QMatrix {
    let index: BTreeMap<usize, usize> =
        verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut sub = QMatrix::zero(verts.len(), verts.len());
    for (r, c, v) in m.entries() {
        if let (Some(&ri), Some(&ci)) = (index.get(&r), index.get(&c)) {
            sub.set(ri, ci, v.clone());
        }
    }
    sub
}

/// Entry domain for sparse fraction-free elimination.
pub(crate) trait Domain: Clone {
    fn is_zero(&self) -> bool;
    fn neg(&self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn exact_div(&self, other: &Self) -> Self;
    /// pivot preference, smaller is better
    fn weight(&self) -> u64;
    fn mem_bytes(&self) -> u64;
}

impl Domain for BigInt {
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn exact_div(&self, other: &Self) -> Self {
        let (q, r) = self.div_rem(other);
        assert!(Zero::is_zero(&r), "Bareiss division not exact");
        q
    }
    fn weight(&self) -> u64 {
        self.bits()
    }
    fn mem_bytes(&self) -> u64 {
        self.bits() / 8 + 24
    }
}

impl Domain for ZPoly {
    fn is_zero(&self) -> bool {
        ZPoly::is_zero(self)
    }
    fn neg(&self) -> Self {
        ZPoly::zero().sub(self)
    }
    fn mul(&self, other: &Self) -> Self {
        ZPoly::mul(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        ZPoly::sub(self, other)
    }
    fn exact_div(&self, other: &Self) -> Self {
        ZPoly::exact_div(self, other)
    }
    fn weight(&self) -> u64 {
        // prefer low degree, then small coefficients
        (self.degree().max(0) as u64) * 4096 + self.bit_size()
    }
    fn mem_bytes(&self) -> u64 {
        self.bit_size() / 8 + 24 * (self.degree().max(0) as u64 + 1)
    }
}

pub(crate) struct Echelon<D> {
    /// (pivot column, frozen row) in elimination order
    pub pivots: Vec<(usize, Vec<(usize, D)>)>,
    pub rank: usize,
}

/// Sparse Bareiss elimination with full pivoting. Pivot choice: smallest
/// weight (bit length), ties broken by lowest (column, row). Each update is
/// (pivot*row - row[pc]*pivot_row) / previous_pivot, which stays exact.
pub(crate) fn ff_eliminate<D: Domain>(
    mut rows: Vec<Vec<(usize, D)>>,
) -> Result<Echelon<D>, ElimError> {
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
        row.retain(|(_, v)| !v.is_zero());
    }
    let mut pivots: Vec<(usize, Vec<(usize, D)>)> = Vec::new();
    let mut prev: Option<D> = None;
    let mut active: Vec<usize> = (0..rows.len()).collect();
    active.retain(|&r| !rows[r].is_empty());
    loop {
        // pivot selection
        let mut best: Option<(u64, usize, usize)> = None; // (weight, col, row)
        for &r in &active {
            for (c, v) in &rows[r] {
                let key = (v.weight(), *c, r);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        let Some((_, pc, pr)) = best else { break };
        let pivot_row = std::mem::take(&mut rows[pr]);
        let pivot = pivot_row
            .iter()
            .find(|&&(c, _)| c == pc)
            .map(|(_, v)| v.clone())
            .unwrap();
        active.retain(|&r| r != pr);
        let mut used: u64 = 0;
        for &r in &active {
            // every active row takes the Bareiss update; rows without a
            // pivot-column entry are scaled by pivot/prev, which keeps the
            // one-step division exact at later steps
            rows[r] = row_update(&rows[r], &pivot, &pivot_row, prev.as_ref(), pc);
            used += rows[r].iter().map(|(_, v)| v.mem_bytes()).sum::<u64>();
        }
        check_memory(used)?;
        active.retain(|&r| !rows[r].is_empty());
        pivots.push((pc, pivot_row));
        prev = Some(pivot);
    }
    let rank = pivots.len();
    Ok(Echelon { pivots, rank })
}

/// (pivot*row - row[pc]*pivot_row) / prev on sorted sparse rows; the pivot
/// column is dropped (it cancels by construction).
fn row_update<D: Domain>(
    row: &[(usize, D)],
    pivot: &D,
    pivot_row: &[(usize, D)],
    prev: Option<&D>,
    pc: usize,
) -> Vec<(usize, D)> {
    let coef = row.iter().find(|&&(c, _)| c == pc).map(|(_, v)| v.clone());
    let mut out: Vec<(usize, D)> = Vec::with_capacity(row.len() + pivot_row.len());
    let mut push = |c: usize, v: D| {
        if c == pc || v.is_zero() {
            return;
        }
        let v = match prev {
            Some(p) => v.exact_div(p),
            None => v,
        };
        if !v.is_zero() {
            out.push((c, v));
        }
    };
    match &coef {
        None => {
            for (c, v) in row {
                push(*c, pivot.mul(v));
            }
        }
        Some(coef) => {
            let (mut i, mut j) = (0, 0);
            while i < row.len() || j < pivot_row.len() {
                let ci = row.get(i).map(|&(c, _)| c).unwrap_or(usize::MAX);
                let cj = pivot_row.get(j).map(|&(c, _)| c).unwrap_or(usize::MAX);
                let c = ci.min(cj);
                let v = if ci == c && cj == c {
                    let v = pivot.mul(&row[i].1).sub(&coef.mul(&pivot_row[j].1));
                    i += 1;
                    j += 1;
                    v
                } else if ci == c {
                    i += 1;
                    pivot.mul(&row[i - 1].1)
                } else {
                    j += 1;
                    coef.mul(&pivot_row[j - 1].1).neg()
                };
                push(c, v);
            }
        }
    }
    out
}

/// Exact rank of a sparse rational matrix.
pub fn try_rank(m: &QMatrix) -> Result<usize, ElimError> {
    let split = components(m);
    let mut rank = 0;
    for block in &split.blocks {
        rank += ff_eliminate(block.matrix.integer_rows())?.rank;
    }
    Ok(rank)
}

pub fn rank(m: &QMatrix) -> usize {
    try_rank(m).expect("memory cap exceeded")
}

/// cols - rank, computed blockwise; exact.
pub fn try_kernel_dim(m: &QMatrix) -> Result<usize, ElimError> {
    Ok(m.cols - try_rank(m)?)
}

pub fn kernel_dim(m: &QMatrix) -> usize {
    try_kernel_dim(m).expect("memory cap exceeded")
}

/// A basis of ker M as exact rational vectors.
pub fn flow_kernel(m: &QMatrix) -> Vec<Vec<Rat>> {
    let ech = ff_eliminate(m.integer_rows()).expect("memory cap exceeded");
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|&(c, _)| c).collect();
    let is_pivot = {
        let mut v = vec![false; m.cols];
        for &c in &pivot_cols {
            v[c] = true;
        }
        v
    };
    let mut basis = Vec::new();
    for free in 0..m.cols {
        if is_pivot[free] {
            continue;
        }
        let mut v = vec![Rat::zero(); m.cols];
        v[free] = Rat::one();
        // pivot rows in reverse creation order only involve this pivot's
        // column, later pivots and free columns, so back-substitution closes
        for (pc, row) in ech.pivots.iter().rev() {
            let mut s = Rat::zero();
            let mut pv = Rat::zero();
            for (c, coef) in row {
                let coef = Rat::from_integer(coef.clone());
                if c == pc {
                    pv = coef;
                } else if !v[*c].is_zero() {
                    s += coef * &v[*c];
                }
            }
            v[*pc] = -s / pv;
        }
        debug_assert!(m.apply(&v).iter().all(|x| x.is_zero()));
        basis.push(v);
    }
    basis
}

/// Exact rank of a matrix over ℚ(s): per-row denominators are cleared to
/// integer polynomials, then fraction-free elimination with content
/// stripping is applied.
pub fn try_rank_ratfunc(m: &[Vec<RatFunc>]) -> Result<usize, ElimError> {
    let rows: Vec<Vec<(usize, ZPoly)>> = m
        .iter()
        .map(|row| {
            let mut den = QPoly::one();
            for f in row {
                let g = den.gcd(f.den());
                let (q, r) = f.den().div_rem(&g);
                debug_assert!(r.is_zero());
                den = den.mul(&q);
            }
            let cleared: Vec<(usize, QPoly)> = row
                .iter()
                .enumerate()
                .filter(|(_, f)| !f.is_zero())
                .map(|(c, f)| {
                    let (q, r) = den.div_rem(f.den());
                    debug_assert!(r.is_zero());
                    (c, f.num().mul(&q))
                })
                .collect();
            // clear rational coefficients row-wise, then strip content
            let mut joined: Vec<(usize, ZPoly)> = Vec::with_capacity(cleared.len());
            let mut lcm = BigInt::one();
            for (_, p) in &cleared {
                for c in p.coeffs() {
                    lcm = lcm.lcm(c.denom());
                }
            }
            let mut content = BigInt::zero();
            let scaled: Vec<(usize, ZPoly)> = cleared
                .into_iter()
                .map(|(c, p)| {
                    (c, ZPoly::new(p.coeffs().iter().map(|q| q.numer() * (&lcm / q.denom())).collect()))
                })
                .collect();
            for (_, p) in &scaled {
                content = content.gcd(&p.content());
            }
            for (c, p) in scaled {
                if Zero::is_zero(&content) || content.is_one() {
                    joined.push((c, p));
                } else {
                    joined.push((
                        c,
                        ZPoly::new(p.coeffs().iter().map(|x| x / &content).collect()),
                    ));
                }
            }
            joined
        })
        .collect();
    Ok(ff_eliminate(rows)?.rank)
}

pub fn rank_ratfunc(m: &[Vec<RatFunc>]) -> usize {
    try_rank_ratfunc(m).expect("memory cap exceeded")
}

/// Solves A y = b exactly over ℚ(s); A must be square invertible.
pub fn solve_ratfunc(a: &[Vec<RatFunc>], b: &[RatFunc]) -> Option<Vec<RatFunc>> {
    let n = a.len();
    assert!(a.iter().all(|r| r.len() == n) && b.len() == n);
    let mut m: Vec<Vec<RatFunc>> = a.to_vec();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        perm.swap(col, pivot);
        let pv = m[col][col].clone();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].div(&pv);
            for c in col..n {
                let delta = factor.mul(&m[col][c]);
                m[r][c] = m[r][c].sub(&delta);
            }
            let delta = factor.mul(&rhs[col]);
            rhs[r] = rhs[r].sub(&delta);
        }
    }
    Some(
        (0..n)
            .map(|i| rhs[i].div(&m[i][i]))
            .collect(),
    )
}

/// MatrixMarket-style coordinate text with rational entries "p/q"
/// (1-based indices):
/// ```text
/// %%l2rank coordinate rational
/// rows cols nnz
/// r c p/q
/// ```
pub fn write_coordinate_text(m: &QMatrix) -> String {
    use crate::rational::format_rat;
    let mut out = String::from("%%l2rank coordinate rational\n");
    out.push_str(&format!("{} {} {}\n", m.rows, m.cols, m.nnz()));
    for (r, c, v) in m.entries() {
        out.push_str(&format!("{} {} {}\n", r + 1, c + 1, format_rat(v)));
    }
    out
}

pub fn read_coordinate_text(text: &str) -> Result<QMatrix, String> {
    use crate::rational::parse_rat;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let header = lines.next().ok_or("missing size line")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad size token {t:?}")))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 {
        return Err("size line must be: rows cols nnz".into());
    }
    let mut m = QMatrix::zero(dims[0], dims[1]);
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(format!("bad entry line {line:?}"));
        }
        let r: usize = toks[0].parse().map_err(|_| "bad row index")?;
        let c: usize = toks[1].parse().map_err(|_| "bad col index")?;
        if r == 0 || c == 0 || r > dims[0] || c > dims[1] {
            return Err(format!("index out of range in {line:?}"));
        }
        m.set(r - 1, c - 1, parse_rat(toks[2])?);
    }
    Ok(m)
}
