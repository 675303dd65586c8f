//! Constituency trees: bracketed I/O, terminal stripping, height pruning,
//! leaf queues, signalling vectors and tree edit distance.
//!
//! Trees are stored as an arena in preorder. Node `0` is always the root and
//! every node id is smaller than the ids of its descendants. Terminal words
//! are separate leaf nodes that carry a token; phrase and part-of-speech
//! nodes carry only a label.

mod ted;

pub use ted::ted;

use std::fmt;
use std::ops::Range;

use thiserror::Error;

/// Index of a node inside a tree arena.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("parse error at offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("node '{label}' mixes terminal tokens and phrase children")]
    MixedChildren { label: String },
    #[error("tree carries terminal tokens where a skeleton is required")]
    NotSkeleton,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub label: String,
    pub children: Vec<NodeId>,
    /// Surface token; present exactly on terminal nodes of a full tree.
    pub token: Option<String>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// An ordered, labeled, rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituencyTree {
    nodes: Vec<Node>,
}

impl ConstituencyTree {
    /// Builds a tree from a preorder arena, checking the structural
    /// invariants.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, TreeError> {
        let bad = |reason: &str| TreeError::Parse {
            offset: 0,
            reason: reason.to_string(),
        };
        if nodes.is_empty() {
            return Err(bad("empty tree"));
        }
        let mut parent_seen = vec![false; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if node.token.is_some() && !node.children.is_empty() {
                return Err(bad("token on a node with children"));
            }
            for &c in &node.children {
                if c <= id || c >= nodes.len() || parent_seen[c] {
                    return Err(bad("children do not form a preorder tree"));
                }
                parent_seen[c] = true;
            }
        }
        if parent_seen.iter().skip(1).any(|seen| !seen) {
            return Err(bad("disconnected node"));
        }
        let tree = ConstituencyTree { nodes };
        tree.check_mixed()?;
        Ok(tree)
    }

    fn check_mixed(&self) -> Result<(), TreeError> {
        for node in &self.nodes {
            let terminals = node
                .children
                .iter()
                .filter(|&&c| self.nodes[c].token.is_some())
                .count();
            if terminals > 0 && terminals < node.children.len() {
                return Err(TreeError::MixedChildren {
                    label: node.label.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id].label
    }

    /// True when no node carries a terminal token.
    pub fn is_skeleton(&self) -> bool {
        self.nodes.iter().all(|n| n.token.is_none())
    }

    /// Terminal tokens in left-to-right order.
    pub fn tokens(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter_map(|n| n.token.as_deref())
            .collect()
    }

    /// Number of nodes on the longest root-to-leaf path; a single node has
    /// height 1.
    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Depth of every node, root at depth 1.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        depth[0] = 1;
        for id in 0..self.nodes.len() {
            for &c in &self.nodes[id].children {
                depth[c] = depth[id] + 1;
            }
        }
        depth
    }

    /// Leaves in left-to-right order. Preorder ids already list leaves in
    /// span order.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&id| self.nodes[id].is_leaf())
            .collect()
    }

    /// Parses a single Penn-Treebank style bracketed expression.
    pub fn parse_bracketed(text: &str) -> Result<Self, TreeError> {
        let mut parser = Parser {
            text,
            pos: 0,
            nodes: Vec::new(),
        };
        parser.skip_ws();
        if parser.pos >= text.len() {
            return Err(parser.error("empty input"));
        }
        parser.parse_node()?;
        parser.skip_ws();
        if parser.pos < text.len() {
            return Err(parser.error("trailing content after root (multiple roots?)"));
        }
        let tree = ConstituencyTree {
            nodes: parser.nodes,
        };
        tree.check_mixed()?;
        Ok(tree)
    }

    /// Bracketed serialization with single spaces. Leaf nonterminals are
    /// written as `(TAG)` so skeletons round-trip unambiguously.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root(), &mut out);
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        if let Some(tok) = &node.token {
            out.push_str(tok);
            return;
        }
        out.push('(');
        out.push_str(&node.label);
        for &c in &node.children {
            out.push(' ');
            self.write_node(c, out);
        }
        out.push(')');
    }

    /// Indented multi-line rendering used by the tree inspector.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        let depth = self.depths();
        for (id, node) in self.nodes.iter().enumerate() {
            out.push_str(&"  ".repeat(depth[id] - 1));
            match &node.token {
                Some(tok) => out.push_str(&format!("'{tok}'")),
                None => out.push_str(&node.label),
            }
            out.push('\n');
        }
        out
    }

    /// Removes every token-bearing node; preterminals become the leaves.
    pub fn strip_terminals(&self) -> SyntaxSkeleton {
        let keep: Vec<bool> = self.nodes.iter().map(|n| n.token.is_none()).collect();
        let (nodes, origin) = self.restrict(&keep);
        SyntaxSkeleton {
            tree: ConstituencyTree { nodes },
            origin,
        }
    }

    /// Copies the nodes flagged in `keep` (closed under parent) into a new
    /// preorder arena, returning it with the new-to-old id map.
    fn restrict(&self, keep: &[bool]) -> (Vec<Node>, Vec<NodeId>) {
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        let mut origin = Vec::new();
        for (id, &k) in keep.iter().enumerate() {
            if k {
                new_id[id] = origin.len();
                origin.push(id);
            }
        }
        let nodes = origin
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                Node {
                    label: n.label.clone(),
                    children: n
                        .children
                        .iter()
                        .filter(|&&c| keep[c])
                        .map(|&c| new_id[c])
                        .collect(),
                    token: n.token.clone(),
                }
            })
            .collect();
        (nodes, origin)
    }

    /// Terminal position range owned by every node (empty for nodes without
    /// terminals below them).
    pub fn terminal_ranges(&self) -> Vec<Range<usize>> {
        let n = self.nodes.len();
        let mut ranges = vec![0..0; n];
        let mut next = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            if node.token.is_some() {
                ranges[id] = next..next + 1;
                next += 1;
            }
        }
        for id in (0..n).rev() {
            let node = &self.nodes[id];
            if node.children.is_empty() {
                continue;
            }
            let start = ranges[node.children[0]].start;
            let end = ranges[node.children[node.children.len() - 1]].end;
            ranges[id] = start..end.max(start);
        }
        ranges
    }
}

impl fmt::Display for ConstituencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> TreeError {
        TreeError::Parse {
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn parse_node(&mut self) -> Result<NodeId, TreeError> {
        if self.peek() != Some('(') {
            return Err(self.error("expected '('"));
        }
        self.pos += 1;
        self.skip_ws();
        let label = self.atom().to_string();
        if label.is_empty() {
            return Err(self.error("empty label"));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            label,
            children: Vec::new(),
            token: None,
        });
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(self.error("unbalanced brackets: missing ')'")),
                Some(')') => {
                    self.pos += 1;
                    return Ok(id);
                }
                Some('(') => {
                    let child = self.parse_node()?;
                    self.nodes[id].children.push(child);
                }
                Some(_) => {
                    let tok = self.atom().to_string();
                    let child = self.nodes.len();
                    self.nodes.push(Node {
                        label: tok.clone(),
                        children: Vec::new(),
                        token: Some(tok),
                    });
                    self.nodes[id].children.push(child);
                }
            }
        }
    }
}

/// A constituency tree without terminal tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxSkeleton {
    tree: ConstituencyTree,
    /// Maps each skeleton node to its id in the tree it was derived from.
    origin: Vec<NodeId>,
}

impl SyntaxSkeleton {
    pub fn new(tree: ConstituencyTree) -> Result<Self, TreeError> {
        if !tree.is_skeleton() {
            return Err(TreeError::NotSkeleton);
        }
        let origin = (0..tree.len()).collect();
        Ok(SyntaxSkeleton { tree, origin })
    }

    pub fn parse_bracketed(text: &str) -> Result<Self, TreeError> {
        Ok(ConstituencyTree::parse_bracketed(text)?.strip_terminals())
    }

    pub fn tree(&self) -> &ConstituencyTree {
        &self.tree
    }

    pub fn origin(&self) -> &[NodeId] {
        &self.origin
    }

    pub fn height(&self) -> usize {
        self.tree.height()
    }

    /// Removes every node deeper than `height` (root at depth 1).
    pub fn prune(&self, height: usize) -> PrunedTree {
        let height = height.max(1);
        let depth = self.tree.depths();
        let keep: Vec<bool> = depth.iter().map(|&d| d <= height).collect();
        let (nodes, origin) = self.tree.restrict(&keep);
        let origin = origin.into_iter().map(|id| self.origin[id]).collect();
        PrunedTree {
            skeleton: SyntaxSkeleton {
                tree: ConstituencyTree { nodes },
                origin,
            },
            height_used: height,
        }
    }
}

impl fmt::Display for SyntaxSkeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tree.fmt(f)
    }
}

/// A skeleton cut at a given height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedTree {
    pub skeleton: SyntaxSkeleton,
    pub height_used: usize,
}

impl PrunedTree {
    pub fn tree(&self) -> &ConstituencyTree {
        self.skeleton.tree()
    }

    /// Leaves of the pruned tree, left to right.
    pub fn leaf_queue(&self) -> LeafQueue {
        LeafQueue(self.tree().leaves())
    }
}

/// Left-to-right leaves of a pruned tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafQueue(pub Vec<NodeId>);

impl LeafQueue {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.0
    }
}

/// Per-token switch bits plus the token span owned by each queue element.
/// Spans use zero-based half-open ranges over terminal positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignallingVector {
    pub bits: Vec<u8>,
    pub spans: Vec<Range<usize>>,
}

impl SignallingVector {
    pub fn from_spans(spans: Vec<Range<usize>>) -> Self {
        let total = spans.last().map_or(0, |s| s.end);
        let mut bits = vec![0u8; total];
        for span in &spans {
            if span.start < total {
                bits[span.start] = 1;
            }
        }
        SignallingVector { bits, spans }
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Signalling vector for a full tree pruned at `height`: each pruned leaf
/// owns the contiguous run of terminals it dominates.
pub fn leaf_spans(full: &ConstituencyTree, height: usize) -> SignallingVector {
    let pruned = full.strip_terminals().prune(height);
    let ranges = full.terminal_ranges();
    let spans = pruned
        .leaf_queue()
        .ids()
        .iter()
        .map(|&leaf| ranges[pruned.skeleton.origin()[leaf]].clone())
        .filter(|r| !r.is_empty())
        .collect();
    SignallingVector::from_spans(spans)
}

/// Height of the skeleton of `tree`: the largest useful pruning height.
pub fn max_height(tree: &ConstituencyTree) -> usize {
    if tree.is_skeleton() {
        tree.height()
    } else {
        tree.strip_terminals().height()
    }
}
