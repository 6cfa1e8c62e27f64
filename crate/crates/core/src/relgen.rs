//! Synthetic relations with exactly planted selectivity, and their scatter
//! across memory nodes.
//!
//! Every byte of a relation is a pure function of `(seed, row, position)`, so
//! a relation can be materialized for desk-scale checks or kept as counts
//! only for runs at hundreds of millions of rows. Which rows carry the
//! planted key is decided by a seeded permutation: row `r` is planted iff
//! `perm(r) < planted_count`. Non-planted rows take their key from a range
//! that never intersects the planted one.

use std::borrow::Cow;
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Key id reserved for the planted select value.
pub const SELECT_SENTINEL: u64 = u64::MAX;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: one independent 64-bit word per `(seed, a, b)`.
pub fn counter_word(seed: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(seed ^ mix64(a)) ^ b.wrapping_mul(GOLDEN))
}

/// A bijection on `[0, n)` built from a 4-round Feistel network over the
/// smallest even-bit power of two covering `n`, restricted by cycle walking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededPermutation {
    n: u64,
    half_bits: u32,
    keys: [u64; 4],
}

impl SeededPermutation {
    pub fn new(n: u64, seed: u64) -> Self {
        let bits = if n <= 1 { 2 } else { 64 - (n - 1).leading_zeros() };
        let half_bits = bits.div_ceil(2).max(1);
        let mut keys = [0u64; 4];
        for (i, k) in keys.iter_mut().enumerate() {
            *k = counter_word(seed, 0x5045_524D, i as u64);
        }
        Self { n, half_bits, keys }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn mask(&self) -> u64 {
        (1u64 << self.half_bits) - 1
    }

    fn round(&self, half: u64, key: u64) -> u64 {
        mix64(half ^ key) & self.mask()
    }

    fn encrypt(&self, x: u64) -> u64 {
        let mask = self.mask();
        let (mut l, mut r) = (x >> self.half_bits, x & mask);
        for &k in &self.keys {
            let next = l ^ self.round(r, k);
            l = r;
            r = next;
        }
        (l << self.half_bits) | r
    }

    fn decrypt(&self, y: u64) -> u64 {
        let mask = self.mask();
        let (mut l, mut r) = (y >> self.half_bits, y & mask);
        for &k in self.keys.iter().rev() {
            let prev = r ^ self.round(l, k);
            r = l;
            l = prev;
        }
        (l << self.half_bits) | r
    }

    /// Image of `x`; `x` must be below `len()`.
    pub fn apply(&self, x: u64) -> u64 {
        debug_assert!(x < self.n);
        let mut y = self.encrypt(x);
        while y >= self.n {
            y = self.encrypt(y);
        }
        y
    }

    pub fn inverse(&self, y: u64) -> u64 {
        debug_assert!(y < self.n);
        let mut x = self.decrypt(y);
        while x >= self.n {
            x = self.decrypt(x);
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpec {
    pub name: String,
    pub size_bytes: u32,
    pub indexed: bool,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, size_bytes: u32) -> Self {
        Self { name: name.into(), size_bytes, indexed: false }
    }

    pub fn indexed(mut self, indexed: bool) -> Self {
        self.indexed = indexed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSpec {
    pub name: String,
    pub rows: u64,
    pub row_bytes: u64,
    pub attributes: Vec<AttributeSpec>,
    pub seed: u64,
    pub materialized: bool,
}

impl RelationSpec {
    /// A relation with a single attribute of the given width.
    pub fn single(name: &str, rows: u64, row_bytes: u64, attr: AttributeSpec, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            rows,
            row_bytes,
            attributes: vec![attr],
            seed,
            materialized: false,
        }
    }

    pub fn materialized(mut self, materialized: bool) -> Self {
        self.materialized = materialized;
        self
    }

    pub fn relation_bytes(&self) -> u64 {
        self.rows * self.row_bytes
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_bytes == 0 {
            return Err(Error::Schema(format!("relation {}: row size must be positive", self.name)));
        }
        let mut total = 0u64;
        for (i, a) in self.attributes.iter().enumerate() {
            if a.size_bytes == 0 {
                return Err(Error::Schema(format!("attribute {} has zero width", a.name)));
            }
            if self.attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Schema(format!("duplicate attribute {}", a.name)));
            }
            total += a.size_bytes as u64;
        }
        if total > self.row_bytes {
            return Err(Error::Schema(format!(
                "relation {}: attributes need {total} bytes but rows are {} bytes",
                self.name, self.row_bytes
            )));
        }
        if self.rows >= 1 << 62 {
            return Err(Error::Schema(format!("relation {}: too many rows", self.name)));
        }
        Ok(())
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::Schema(format!("relation {} has no attribute {name}", self.name)))
    }

    /// Byte offset of attribute `idx` inside a row; attributes are packed in
    /// declaration order from offset 0.
    pub fn attribute_offset(&self, idx: usize) -> u64 {
        self.attributes[..idx].iter().map(|a| a.size_bytes as u64).sum()
    }

    /// Checks that `attr` is part of this schema by name and width.
    pub fn check_attribute(&self, attr: &AttributeSpec) -> Result<usize> {
        let idx = self.attribute_index(&attr.name)?;
        if self.attributes[idx].size_bytes != attr.size_bytes {
            return Err(Error::Schema(format!(
                "attribute {} is {} bytes in {}, not {}",
                attr.name, self.attributes[idx].size_bytes, self.name, attr.size_bytes
            )));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectivitySpec {
    pub fraction: f64,
    pub planted_match_count: u64,
}

impl SelectivitySpec {
    pub fn new(fraction: f64, rows: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidSelectivity(format!("fraction {fraction} outside [0, 1]")));
        }
        Ok(Self { fraction, planted_match_count: (fraction * rows as f64).round() as u64 })
    }

    /// An explicit planted count; validated against the relation size by
    /// [`make_relation`].
    pub fn exact(planted_match_count: u64, rows: u64) -> Self {
        let fraction = if rows == 0 { 0.0 } else { planted_match_count as f64 / rows as f64 };
        Self { fraction, planted_match_count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Planting {
    Select { attr: usize, planted: u64, perm: SeededPermutation },
    Join { attr: usize, matched: u64, perm: SeededPermutation, side: JoinSide, left_rows: u64 },
}

/// A generated relation. Row contents are stored only when its spec asks for
/// materialization; otherwise every accessor regenerates bytes on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    spec: RelationSpec,
    planting: Planting,
    data: Option<Vec<u8>>,
}

fn encode_key(id: u64, width: usize, out: &mut [u8]) {
    debug_assert_eq!(out.len(), width);
    let le = id.to_le_bytes();
    if width <= 8 {
        out.copy_from_slice(&le[..width]);
        return;
    }
    out[..8].copy_from_slice(&le);
    for (i, chunk) in out[8..].chunks_mut(8).enumerate() {
        let w = counter_word(id, 0x4B45_5946, i as u64).to_le_bytes();
        chunk.copy_from_slice(&w[..chunk.len()]);
    }
}

fn narrow_key_space(width: usize) -> Option<u64> {
    (width < 8).then(|| 1u64 << (8 * width))
}

/// Generates a relation whose attribute `attr` holds the reserved select
/// value on exactly `sel.planted_match_count` rows.
pub fn make_relation(spec: RelationSpec, attr: &str, sel: SelectivitySpec) -> Result<Relation> {
    spec.validate()?;
    if sel.planted_match_count > spec.rows {
        return Err(Error::InvalidSelectivity(format!(
            "{} planted matches exceed {} rows",
            sel.planted_match_count, spec.rows
        )));
    }
    let attr = spec.attribute_index(attr)?;
    let perm = SeededPermutation::new(spec.rows, spec.seed ^ 0x53454C);
    let planting = Planting::Select { attr, planted: sel.planted_match_count, perm };
    Ok(Relation::build(spec, planting))
}

/// Generates two relations whose equijoin on `join_attr` has exactly
/// `round(output_fraction * n_R)` result pairs: that many keys appear once
/// in each relation and every other key is globally unique.
pub fn make_join_pair(
    spec_r: RelationSpec,
    spec_s: RelationSpec,
    join_attr: &str,
    output_fraction: f64,
) -> Result<(Relation, Relation)> {
    spec_r.validate()?;
    spec_s.validate()?;
    let ar = spec_r.attribute_index(join_attr)?;
    let as_ = spec_s.attribute_index(join_attr)?;
    let width = spec_r.attributes[ar].size_bytes;
    if spec_s.attributes[as_].size_bytes != width {
        return Err(Error::Schema(format!(
            "join attribute {join_attr} is {width} bytes in {} but {} bytes in {}",
            spec_r.name, spec_s.attributes[as_].size_bytes, spec_s.name
        )));
    }
    let sel = SelectivitySpec::new(output_fraction, spec_r.rows)?;
    let matched = sel.planted_match_count;
    if matched > spec_s.rows {
        return Err(Error::InvalidSelectivity(format!(
            "{matched} matched keys exceed the {} rows of {}",
            spec_s.rows, spec_s.name
        )));
    }
    let distinct = spec_r.rows + spec_s.rows - matched;
    if let Some(space) = narrow_key_space(width as usize) {
        if distinct > space {
            return Err(Error::Schema(format!(
                "a {width}-byte join key cannot hold {distinct} distinct values"
            )));
        }
    }
    let left_rows = spec_r.rows;
    let perm_r = SeededPermutation::new(spec_r.rows, spec_r.seed ^ 0x4A_4C);
    let perm_s = SeededPermutation::new(spec_s.rows, spec_s.seed ^ 0x4A_52);
    let r = Relation::build(
        spec_r,
        Planting::Join { attr: ar, matched, perm: perm_r, side: JoinSide::Left, left_rows },
    );
    let s = Relation::build(
        spec_s,
        Planting::Join { attr: as_, matched, perm: perm_s, side: JoinSide::Right, left_rows },
    );
    Ok((r, s))
}

impl Relation {
    fn build(spec: RelationSpec, planting: Planting) -> Self {
        let mut rel = Self { spec, planting, data: None };
        if rel.spec.materialized {
            let row = rel.spec.row_bytes as usize;
            let mut data = vec![0u8; rel.spec.rows as usize * row];
            for (r, chunk) in data.chunks_mut(row.max(1)).enumerate() {
                rel.fill_row(r as u64, chunk);
            }
            rel.data = Some(data);
        }
        rel
    }

    pub fn spec(&self) -> &RelationSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn rows(&self) -> u64 {
        self.spec.rows
    }

    pub fn is_materialized(&self) -> bool {
        self.data.is_some()
    }

    /// Index of the attribute carrying the planted keys.
    pub fn planted_attribute(&self) -> usize {
        match &self.planting {
            Planting::Select { attr, .. } | Planting::Join { attr, .. } => *attr,
        }
    }

    /// Number of planted rows: select matches, or join keys with a partner.
    pub fn planted_count(&self) -> u64 {
        match &self.planting {
            Planting::Select { planted, .. } => *planted,
            Planting::Join { matched, .. } => *matched,
        }
    }

    pub fn join_side(&self) -> Option<JoinSide> {
        match &self.planting {
            Planting::Join { side, .. } => Some(*side),
            Planting::Select { .. } => None,
        }
    }

    /// The planted select value for attribute `attr`, if this relation was
    /// generated by [`make_relation`] on that attribute.
    pub fn select_value(&self, attr: usize) -> Option<Vec<u8>> {
        match &self.planting {
            Planting::Select { attr: a, .. } if *a == attr => {
                let width = self.spec.attributes[attr].size_bytes as usize;
                let mut v = vec![0u8; width];
                encode_key(SELECT_SENTINEL, width, &mut v);
                Some(v)
            }
            _ => None,
        }
    }

    /// Whether row `row` is one of the planted rows.
    pub fn is_planted(&self, row: u64) -> bool {
        match &self.planting {
            Planting::Select { planted, perm, .. } => perm.apply(row) < *planted,
            Planting::Join { matched, perm, .. } => perm.apply(row) < *matched,
        }
    }

    fn key_id(&self, row: u64, attr: usize) -> u64 {
        let width = self.spec.attributes[attr].size_bytes as usize;
        match &self.planting {
            Planting::Select { attr: a, planted, perm } if *a == attr => {
                let rank = perm.apply(row);
                if rank < *planted {
                    SELECT_SENTINEL
                } else {
                    match narrow_key_space(width) {
                        // the all-ones pattern is the truncated sentinel
                        Some(space) => rank % (space - 1),
                        None => rank,
                    }
                }
            }
            Planting::Join { attr: a, matched, perm, side, left_rows } if *a == attr => {
                let rank = perm.apply(row);
                match side {
                    JoinSide::Left => rank,
                    JoinSide::Right if rank < *matched => rank,
                    JoinSide::Right => left_rows + (rank - matched),
                }
            }
            _ => counter_word(self.spec.seed, row, 0x4154_5452 ^ attr as u64),
        }
    }

    fn fill_row(&self, row: u64, out: &mut [u8]) {
        for (i, chunk) in out.chunks_mut(8).enumerate() {
            let w = counter_word(self.spec.seed, row, i as u64).to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
        let mut offset = 0usize;
        for (idx, a) in self.spec.attributes.iter().enumerate() {
            let width = a.size_bytes as usize;
            encode_key(self.key_id(row, idx), width, &mut out[offset..offset + width]);
            offset += width;
        }
    }

    /// Full bytes of `row`.
    pub fn row_bytes(&self, row: u64) -> Cow<'_, [u8]> {
        let size = self.spec.row_bytes as usize;
        match &self.data {
            Some(d) => Cow::Borrowed(&d[row as usize * size..(row as usize + 1) * size]),
            None => {
                let mut v = vec![0u8; size];
                self.fill_row(row, &mut v);
                Cow::Owned(v)
            }
        }
    }

    /// Bytes of attribute `attr` in `row`.
    pub fn attribute_bytes(&self, row: u64, attr: usize) -> Cow<'_, [u8]> {
        let width = self.spec.attributes[attr].size_bytes as usize;
        match &self.data {
            Some(d) => {
                let start = (row * self.spec.row_bytes + self.spec.attribute_offset(attr)) as usize;
                Cow::Borrowed(&d[start..start + width])
            }
            None => {
                let mut v = vec![0u8; width];
                encode_key(self.key_id(row, attr), width, &mut v);
                Cow::Owned(v)
            }
        }
    }
}

/// Assignment of rows to memory nodes.
///
/// Row `r` lives on node `perm(r) mod node_count`, which gives every node
/// either `floor(n / nodes)` or `ceil(n / nodes)` rows. Only the permutation
/// parameters are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    node_count: u32,
    rows: u64,
    perm: SeededPermutation,
    lost: BTreeSet<u64>,
}

/// Scatters the rows of `rel` uniformly at random over `node_count` nodes.
pub fn place_rows(rel: &Relation, node_count: u32, seed: u64) -> Result<Placement> {
    Placement::new(rel.rows(), node_count, seed)
}

/// Splits `total` items over `parts` slots, the first `total % parts` slots
/// getting one extra.
pub fn apportion(total: u64, parts: u32, slot: u32) -> u64 {
    let parts = parts as u64;
    total / parts + u64::from((slot as u64) < total % parts)
}

impl Placement {
    pub fn new(rows: u64, node_count: u32, seed: u64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTopology("placement needs at least one node".into()));
        }
        Ok(Self {
            node_count,
            rows,
            perm: SeededPermutation::new(rows, seed ^ 0x504C_4143),
            lost: BTreeSet::new(),
        })
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Node holding `row`, or `None` for a row dropped by
    /// [`Placement::with_lost_row`].
    pub fn node_of(&self, row: u64) -> Option<u32> {
        if self.lost.contains(&row) {
            return None;
        }
        Some((self.perm.apply(row) % self.node_count as u64) as u32)
    }

    /// Rows resident on `node`, in slot order.
    pub fn rows_on(&self, node: u32) -> impl Iterator<Item = u64> + '_ {
        let n = self.node_count as u64;
        let slots = if node < self.node_count { apportion(self.rows, self.node_count, node) } else { 0 };
        (0..slots)
            .map(move |k| self.perm.inverse(node as u64 + k * n))
            .filter(move |r| !self.lost.contains(r))
    }

    pub fn count_on(&self, node: u32) -> u64 {
        let base = apportion(self.rows, self.node_count, node);
        let lost = self.lost.iter().filter(|&&r| self.node_of_unchecked(r) == node).count() as u64;
        base - lost
    }

    fn node_of_unchecked(&self, row: u64) -> u32 {
        (self.perm.apply(row) % self.node_count as u64) as u32
    }

    pub fn counts(&self) -> Vec<u64> {
        (0..self.node_count).map(|v| self.count_on(v)).collect()
    }

    /// Test fixture: a copy of this placement in which `row` is resident
    /// nowhere.
    pub fn with_lost_row(mut self, row: u64) -> Self {
        if row < self.rows {
            self.lost.insert(row);
        }
        self
    }

    pub fn is_intact(&self) -> bool {
        self.lost.is_empty()
    }
}
