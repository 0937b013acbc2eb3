//! Concept hierarchies and information-content based similarity.
//!
//! A [`Taxonomy`] is an immutable rooted DAG. Construction validates the
//! graph and caches, per node, the number of leaves below it and the number
//! of subsumers above it (both counted as sets, so multiple inheritance is
//! handled). Information content follows the leaf/subsumer ratio
//!
//! ```text
//! IC(c) = -log( (|leaves(c)| / |subsumers(c)| + 1) / (max_leaves + 1) )
//! ```
//!
//! and concept similarity is `2 * IC(lcs) / (IC(a) + IC(b))`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::num::NonZeroUsize;
use std::sync::Mutex;

use lru::LruCache;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Code of the virtual root inserted above multiple parentless nodes.
pub const VIRTUAL_ROOT: &str = "ROOT";

const CACHE_SHARDS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("empty taxonomy input")]
    EmptyInput,
    #[error("empty order file")]
    EmptyFile,
    #[error("cycle detected involving concept {0:?}")]
    CycleDetected(String),
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: procedure code {code:?} does not have 7 characters")]
    CodeLengthNot7 { line: usize, code: String },
    #[error("unknown concept {code:?} in taxonomy {taxonomy:?}")]
    UnknownConcept { taxonomy: String, code: String },
    #[error("code {0:?} is reserved for the virtual root")]
    ReservedCode(String),
}

pub type Result<T, E = TaxonomyError> = std::result::Result<T, E>;

/// Dense index of a concept inside one taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A concept qualified by the taxonomy it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptId {
    pub code: String,
    pub taxonomy_id: String,
}

/// Concept-level similarity measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityFn {
    #[default]
    Sanchez,
    Boolean,
}

/// Counting conventions for information content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcConfig {
    /// Whether a leaf counts itself in `leaves(c)`. When false, leaves have
    /// an empty leaf set and therefore maximal IC.
    pub leaf_counts_itself: bool,
    /// Logarithm base. Similarity ratios do not depend on it.
    pub log_base: f64,
    /// Capacity of the memoized LCS table, 0 disables memoization.
    pub lcs_cache_capacity: usize,
}

impl Default for IcConfig {
    fn default() -> Self {
        Self {
            leaf_counts_itself: true,
            log_base: std::f64::consts::E,
            lcs_cache_capacity: 1 << 20,
        }
    }
}

type LcsShard = Mutex<LruCache<(NodeId, NodeId), NodeId>>;

/// Immutable rooted DAG of concepts with cached IC bookkeeping.
pub struct Taxonomy {
    id: String,
    codes: Vec<String>,
    index: HashMap<String, NodeId>,
    descriptions: Vec<Option<String>>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    /// Every subsumer of a node, the node included, sorted by id.
    ancestors: Vec<Vec<NodeId>>,
    depth: Vec<u32>,
    leaf_count: Vec<u32>,
    subsumer_count: Vec<u32>,
    ic: Vec<f64>,
    root: NodeId,
    max_leaves: u32,
    config: IcConfig,
    lcs_cache: Option<Vec<LcsShard>>,
}

impl std::fmt::Debug for Taxonomy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Taxonomy")
            .field("id", &self.id)
            .field("nodes", &self.codes.len())
            .field("root", &self.codes[self.root.index()])
            .field("max_leaves", &self.max_leaves)
            .finish()
    }
}

#[derive(Default)]
struct Builder {
    codes: Vec<String>,
    index: HashMap<String, NodeId>,
    descriptions: Vec<Option<String>>,
    parents: Vec<Vec<NodeId>>,
}

impl Builder {
    fn intern(&mut self, code: &str) -> NodeId {
        if let Some(&id) = self.index.get(code) {
            return id;
        }
        let id = NodeId(self.codes.len() as u32);
        self.codes.push(code.to_string());
        self.index.insert(code.to_string(), id);
        self.descriptions.push(None);
        self.parents.push(Vec::new());
        id
    }

    /// Returns false when the edge was already present.
    fn add_edge(&mut self, child: NodeId, parent: NodeId) -> bool {
        let ps = &mut self.parents[child.index()];
        if ps.contains(&parent) {
            false
        } else {
            ps.push(parent);
            true
        }
    }

    fn describe(&mut self, node: NodeId, text: &str) {
        let text = text.trim();
        if !text.is_empty() {
            self.descriptions[node.index()] = Some(text.to_string());
        }
    }

    fn finish(self, id: &str, root: NodeId, config: IcConfig) -> Result<Taxonomy> {
        let n = self.codes.len();
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p.index()].push(NodeId(c as u32));
            }
        }
        for ch in &mut children {
            ch.sort_unstable();
        }

        // Kahn's algorithm from the root; anything left unvisited sits on a cycle.
        let mut pending: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &c in &children[node.index()] {
                pending[c.index()] -= 1;
                if pending[c.index()] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n)
                .filter(|&i| pending[i] > 0)
                .map(|i| self.codes[i].as_str())
                .min()
                .unwrap_or_default();
            return Err(TaxonomyError::CycleDetected(stuck.to_string()));
        }

        let mut ancestors: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut depth = vec![0u32; n];
        for &node in &order {
            let mut anc = vec![node];
            for &p in &self.parents[node.index()] {
                anc.extend_from_slice(&ancestors[p.index()]);
                depth[node.index()] = depth[node.index()].max(depth[p.index()] + 1);
            }
            anc.sort_unstable();
            anc.dedup();
            ancestors[node.index()] = anc;
        }

        let mut leaf_count = vec![0u32; n];
        let mut max_leaves = 0u32;
        for leaf in (0..n).filter(|&i| children[i].is_empty()) {
            max_leaves += 1;
            for &a in &ancestors[leaf] {
                if a.index() != leaf || config.leaf_counts_itself {
                    leaf_count[a.index()] += 1;
                }
            }
        }
        let subsumer_count: Vec<u32> = ancestors.iter().map(|a| a.len() as u32).collect();
        let log_norm = config.log_base.ln();
        let ic = (0..n)
            .map(|i| {
                let ratio = f64::from(leaf_count[i]) / f64::from(subsumer_count[i]);
                let ic = -(((ratio + 1.0) / (f64::from(max_leaves) + 1.0)).ln() / log_norm);
                // -0.0 at the root
                ic.max(0.0)
            })
            .collect();

        let lcs_cache = NonZeroUsize::new(config.lcs_cache_capacity.div_ceil(CACHE_SHARDS))
            .map(|cap| (0..CACHE_SHARDS).map(|_| Mutex::new(LruCache::new(cap))).collect());

        Ok(Taxonomy {
            id: id.to_string(),
            codes: self.codes,
            index: self.index,
            descriptions: self.descriptions,
            parents: self.parents,
            children,
            ancestors,
            depth,
            leaf_count,
            subsumer_count,
            ic,
            root,
            max_leaves,
            config,
            lcs_cache,
        })
    }
}

impl Taxonomy {
    /// Builds a taxonomy from `(child, parent)` edges.
    ///
    /// A node without parents becomes the root; when several exist, a
    /// virtual [`VIRTUAL_ROOT`] is placed above all of them. Repeated edges
    /// are ignored with a warning.
    pub fn from_edges<I, S>(id: &str, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        Self::from_edges_with(id, edges, IcConfig::default())
    }

    pub fn from_edges_with<I, S>(id: &str, edges: I, config: IcConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut b = Builder::default();
        for (child, parent) in edges {
            let (child, parent) = (child.as_ref(), parent.as_ref());
            if child == parent {
                return Err(TaxonomyError::CycleDetected(child.to_string()));
            }
            let c = b.intern(child);
            let p = b.intern(parent);
            if !b.add_edge(c, p) {
                log::warn!("taxonomy {id}: duplicate edge {child} -> {parent} ignored");
            }
        }
        Self::root_and_finish(b, id, config)
    }

    fn root_and_finish(mut b: Builder, id: &str, config: IcConfig) -> Result<Self> {
        if b.codes.is_empty() {
            return Err(TaxonomyError::EmptyInput);
        }
        let tops: Vec<NodeId> = (0..b.codes.len())
            .filter(|&i| b.parents[i].is_empty())
            .map(|i| NodeId(i as u32))
            .collect();
        let root = match tops.as_slice() {
            [] => {
                let first = b.codes.iter().min().cloned().unwrap_or_default();
                return Err(TaxonomyError::CycleDetected(first));
            }
            [single] => *single,
            many => {
                if b.index.contains_key(VIRTUAL_ROOT) {
                    return Err(TaxonomyError::ReservedCode(VIRTUAL_ROOT.into()));
                }
                let many = many.to_vec();
                let root = b.intern(VIRTUAL_ROOT);
                for top in many {
                    b.add_edge(top, root);
                }
                root
            }
        };
        b.finish(id, root, config)
    }

    /// Parses the generic `child<TAB>parent[<TAB>description]` format.
    /// Blank lines and `#` comments are skipped.
    pub fn parse_tsv(id: &str, text: &str) -> Result<Self> {
        Self::parse_tsv_with(id, text, IcConfig::default())
    }

    pub fn parse_tsv_with(id: &str, text: &str, config: IcConfig) -> Result<Self> {
        let mut b = Builder::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(child), Some(parent)) = (cols.next(), cols.next()) else {
                return Err(TaxonomyError::MalformedLine {
                    line: i + 1,
                    reason: "expected child<TAB>parent".into(),
                });
            };
            let (child, parent) = (child.trim(), parent.trim());
            if child.is_empty() || parent.is_empty() {
                return Err(TaxonomyError::MalformedLine {
                    line: i + 1,
                    reason: "empty code".into(),
                });
            }
            if child == parent {
                return Err(TaxonomyError::CycleDetected(child.to_string()));
            }
            let c = b.intern(child);
            let p = b.intern(parent);
            if !b.add_edge(c, p) {
                log::warn!("taxonomy {id}: duplicate edge {child} -> {parent} on line {} ignored", i + 1);
            }
            if let Some(desc) = cols.next() {
                b.describe(c, desc);
            }
        }
        Self::root_and_finish(b, id, config)
    }

    /// Parses a CMS ICD-10-CM order file.
    ///
    /// Categories (3 characters) hang below the root, or below their block
    /// and chapter when `groups` is given. Every longer code is attached to
    /// its longest strictly shorter prefix that is itself a code.
    pub fn parse_icd10cm(id: &str, order_file: &[u8], groups: Option<&CmGroups>) -> Result<Self> {
        Self::parse_icd10cm_with(id, order_file, groups, IcConfig::default())
    }

    pub fn parse_icd10cm_with(
        id: &str,
        order_file: &[u8],
        groups: Option<&CmGroups>,
        config: IcConfig,
    ) -> Result<Self> {
        let rows = parse_order_rows(order_file)?;
        let mut b = Builder::default();
        let root = b.intern(VIRTUAL_ROOT);
        b.describe(root, "ICD-10-CM");
        let mut known = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.code.len() < 3 {
                return Err(TaxonomyError::MalformedLine {
                    line: row.line,
                    reason: format!("code {:?} shorter than a category", row.code),
                });
            }
            if row.code == VIRTUAL_ROOT {
                return Err(TaxonomyError::ReservedCode(row.code.clone()));
            }
            if !known.insert(row.code.as_str()) {
                log::warn!("{id}: duplicate code {} on line {} ignored", row.code, row.line);
            }
        }
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !seen.insert(row.code.as_str()) {
                continue;
            }
            let node = b.intern(&row.code);
            b.describe(node, &row.description);
            let parent = if row.code.len() == 3 {
                match groups.and_then(|g| g.categories.get(&row.code)) {
                    Some(group) => {
                        let chapter = b.intern(&group.chapter);
                        b.describe(chapter, &group.chapter_description);
                        b.add_edge(chapter, root);
                        let block = b.intern(&group.block);
                        b.describe(block, &group.block_description);
                        b.add_edge(block, chapter);
                        block
                    }
                    None => {
                        if groups.is_some() {
                            log::warn!("{id}: category {} has no chapter/block entry", row.code);
                        }
                        root
                    }
                }
            } else {
                (3..row.code.len())
                    .rev()
                    .map(|k| &row.code[..k])
                    .find(|prefix| known.contains(prefix))
                    .map(|prefix| b.intern(prefix))
                    .unwrap_or(root)
            };
            b.add_edge(node, parent);
        }
        b.finish(id, root, config)
    }

    /// Parses a CMS ICD-10-PCS order file into the positional prefix tree
    /// `root -> 1 char -> 2 chars -> ... -> 7 char code`. Header rows
    /// (flag 0) only contribute descriptions of prefix nodes.
    pub fn parse_icd10pcs(id: &str, order_file: &[u8]) -> Result<Self> {
        Self::parse_icd10pcs_with(id, order_file, IcConfig::default())
    }

    pub fn parse_icd10pcs_with(id: &str, order_file: &[u8], config: IcConfig) -> Result<Self> {
        let rows = parse_order_rows(order_file)?;
        let mut b = Builder::default();
        let root = b.intern(VIRTUAL_ROOT);
        b.describe(root, "ICD-10-PCS");
        let mut headers = Vec::new();
        for row in &rows {
            if row.code.chars().count() != 7 || !row.code.is_ascii() {
                if !row.billable && row.code.len() < 7 && row.code.is_ascii() {
                    headers.push(row);
                    continue;
                }
                return Err(TaxonomyError::CodeLengthNot7 {
                    line: row.line,
                    code: row.code.clone(),
                });
            }
            let mut parent = root;
            for k in 1..=7 {
                let node = b.intern(&row.code[..k]);
                b.add_edge(node, parent);
                parent = node;
            }
            b.describe(parent, &row.description);
        }
        for row in headers {
            if let Some(&node) = b.index.get(&row.code) {
                b.describe(node, &row.description);
            }
        }
        b.finish(id, root, config)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn max_leaves(&self) -> u32 {
        self.max_leaves
    }

    pub fn config(&self) -> IcConfig {
        self.config
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    pub fn node(&self, code: &str) -> Result<NodeId> {
        self.index
            .get(code)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownConcept {
                taxonomy: self.id.clone(),
                code: code.to_string(),
            })
    }

    pub fn concept(&self, node: NodeId) -> ConceptId {
        ConceptId {
            code: self.code(node).to_string(),
            taxonomy_id: self.id.clone(),
        }
    }

    pub fn code(&self, node: NodeId) -> &str {
        &self.codes[node.index()]
    }

    pub fn description(&self, node: NodeId) -> Option<&str> {
        self.descriptions[node.index()].as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.codes.len() as u32).map(NodeId)
    }

    pub fn parents(&self, node: NodeId) -> &[NodeId] {
        &self.parents[node.index()]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.index()]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.children[node.index()].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&n| self.is_leaf(n))
    }

    /// All subsumers of `node` including itself, sorted by node id.
    pub fn subsumers(&self, node: NodeId) -> &[NodeId] {
        &self.ancestors[node.index()]
    }

    /// Proper ancestors ordered from the most specific up to the root.
    pub fn ancestor_chain(&self, node: NodeId) -> Vec<NodeId> {
        let mut chain: Vec<NodeId> = self.ancestors[node.index()]
            .iter()
            .copied()
            .filter(|&a| a != node)
            .collect();
        chain.sort_by(|&a, &b| {
            self.depth[b.index()]
                .cmp(&self.depth[a.index()])
                .then_with(|| self.code(a).cmp(self.code(b)))
        });
        chain
    }

    pub fn depth(&self, node: NodeId) -> u32 {
        self.depth[node.index()]
    }

    pub fn leaf_count(&self, node: NodeId) -> u32 {
        self.leaf_count[node.index()]
    }

    pub fn subsumer_count(&self, node: NodeId) -> u32 {
        self.subsumer_count[node.index()]
    }

    #[inline]
    pub fn ic(&self, node: NodeId) -> f64 {
        self.ic[node.index()]
    }

    pub fn ic_of(&self, code: &str) -> Result<f64> {
        Ok(self.ic(self.node(code)?))
    }

    /// Common subsumer with maximal IC; equal IC resolves to the smaller code.
    pub fn lcs(&self, a: NodeId, b: NodeId) -> NodeId {
        if a == b {
            return a;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        let Some(shards) = &self.lcs_cache else {
            return self.lcs_uncached(key.0, key.1);
        };
        let shard = {
            let mut h = DefaultHasher::new();
            key.hash(&mut h);
            &shards[h.finish() as usize % CACHE_SHARDS]
        };
        if let Some(&hit) = shard.lock().expect("lcs cache poisoned").get(&key) {
            return hit;
        }
        let found = self.lcs_uncached(key.0, key.1);
        shard.lock().expect("lcs cache poisoned").put(key, found);
        found
    }

    fn lcs_uncached(&self, a: NodeId, b: NodeId) -> NodeId {
        let (xs, ys) = (&self.ancestors[a.index()], &self.ancestors[b.index()]);
        let (mut i, mut j) = (0, 0);
        let mut best = self.root;
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let cand = xs[i];
                    let (ci, bi) = (self.ic(cand), self.ic(best));
                    if ci > bi || (ci == bi && self.code(cand) < self.code(best)) {
                        best = cand;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        best
    }

    pub fn lcs_of(&self, a: &str, b: &str) -> Result<&str> {
        Ok(self.code(self.lcs(self.node(a)?, self.node(b)?)))
    }

    /// `2 * IC(lcs(a, b)) / (IC(a) + IC(b))`, with `sim(c, c) = 1`.
    pub fn sim_sanchez(&self, a: NodeId, b: NodeId) -> f64 {
        if a == b {
            return 1.0;
        }
        let denom = self.ic(a) + self.ic(b);
        if denom <= 0.0 {
            return 0.0;
        }
        2.0 * self.ic(self.lcs(a, b)) / denom
    }

    pub fn sim_sanchez_of(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.sim_sanchez(self.node(a)?, self.node(b)?))
    }

    pub fn similarity(&self, kind: SimilarityFn, a: NodeId, b: NodeId) -> f64 {
        match kind {
            SimilarityFn::Sanchez => self.sim_sanchez(a, b),
            SimilarityFn::Boolean => sim_boolean(self.code(a), self.code(b)),
        }
    }
}

/// 1 for identical codes, 0 otherwise.
pub fn sim_boolean(a: &str, b: &str) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Chapter and block membership of ICD-10-CM categories.
#[derive(Debug, Clone, Default)]
pub struct CmGroups {
    categories: HashMap<String, CmGroup>,
}

#[derive(Debug, Clone)]
struct CmGroup {
    block: String,
    block_description: String,
    chapter: String,
    chapter_description: String,
}

impl CmGroups {
    /// Parses `category<TAB>block<TAB>block description<TAB>chapter<TAB>chapter description`
    /// rows. Block and chapter identifiers become node codes, so they must
    /// not collide with real codes (`I20-I25`, `CH09` do not).
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut categories = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 || cols.iter().take(4).any(|c| c.trim().is_empty()) {
                return Err(TaxonomyError::MalformedLine {
                    line: i + 1,
                    reason: "expected 5 tab-separated columns".into(),
                });
            }
            categories.insert(
                cols[0].trim().to_string(),
                CmGroup {
                    block: cols[1].trim().to_string(),
                    block_description: cols[2].trim().to_string(),
                    chapter: cols[3].trim().to_string(),
                    chapter_description: cols[4].trim().to_string(),
                },
            );
        }
        Ok(Self { categories })
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Debug)]
struct OrderRow {
    line: usize,
    code: String,
    billable: bool,
    description: String,
}

// Fixed-width CMS order file: order(5) sp code(7) sp flag(1) sp short(60) sp long.
fn parse_order_rows(bytes: &[u8]) -> Result<Vec<OrderRow>> {
    let mut rows = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let malformed = |reason: &str| TaxonomyError::MalformedLine {
            line: line_no,
            reason: reason.to_string(),
        };
        if line.len() < 15 {
            return Err(malformed("line shorter than the fixed-width header"));
        }
        if !line[..5].iter().all(u8::is_ascii_digit) {
            return Err(malformed("order number is not numeric"));
        }
        if line[5] != b' ' || line[13] != b' ' {
            return Err(malformed("missing column separator"));
        }
        let code = std::str::from_utf8(&line[6..13])
            .map_err(|_| malformed("code is not ASCII"))?
            .trim_end();
        if code.is_empty() || !code.bytes().all(|c| c.is_ascii_alphanumeric()) {
            return Err(malformed("invalid code column"));
        }
        let billable = match line[14] {
            b'0' => false,
            b'1' => true,
            _ => return Err(malformed("billable flag must be 0 or 1")),
        };
        let long = line.get(77..).unwrap_or_default();
        let text = if long.iter().any(|b| !b.is_ascii_whitespace()) {
            long
        } else {
            line.get(16..).unwrap_or_default()
        };
        rows.push(OrderRow {
            line: line_no,
            code: code.to_string(),
            billable,
            description: String::from_utf8_lossy(text).trim().to_string(),
        });
    }
    if rows.is_empty() {
        return Err(TaxonomyError::EmptyFile);
    }
    Ok(rows)
}
