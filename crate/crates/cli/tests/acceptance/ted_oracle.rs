//! Tree edit distance by breadth-first search over edit scripts.
//!
//! States are ordered forests over a three-letter alphabet. One move is a
//! relabel, a deletion (children take the node's place) or an insertion
//! (a new node adopts a run of adjacent siblings). A cheapest script can
//! always be ordered as deletions, relabels, insertions, so its states never
//! exceed the larger endpoint; the search is confined to forests of at most
//! `MAX_NODES` nodes.

use std::collections::{HashMap, VecDeque};

use synpara::tree::{ted, Node};
use synpara::{ConstituencyTree, SyntaxSkeleton};

pub const MAX_NODES: usize = 5;
const ALPHABET: u8 = 3;
const NAMES: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Tree {
    label: u8,
    kids: Vec<Tree>,
}

fn size(forest: &[Tree]) -> usize {
    forest.iter().map(|t| 1 + size(&t.kids)).sum()
}

fn encode(forest: &[Tree], out: &mut Vec<u8>) {
    for t in forest {
        out.push(t.label);
        out.push(t.kids.len() as u8);
        encode(&t.kids, out);
    }
}

fn key(forest: &[Tree]) -> Vec<u8> {
    let mut k = Vec::new();
    encode(forest, &mut k);
    k
}

/// Every forest one edit away from `list`.
fn neighbours(list: &[Tree]) -> Vec<Vec<Tree>> {
    let mut out = Vec::new();
    for i in 0..=list.len() {
        for j in i..=list.len() {
            for label in 0..ALPHABET {
                let mut v = list[..i].to_vec();
                v.push(Tree {
                    label,
                    kids: list[i..j].to_vec(),
                });
                v.extend_from_slice(&list[j..]);
                out.push(v);
            }
        }
    }
    for (k, node) in list.iter().enumerate() {
        let mut deleted = list[..k].to_vec();
        deleted.extend(node.kids.iter().cloned());
        deleted.extend_from_slice(&list[k + 1..]);
        out.push(deleted);
        for label in (0..ALPHABET).filter(|&l| l != node.label) {
            let mut v = list.to_vec();
            v[k].label = label;
            out.push(v);
        }
        for kids in neighbours(&node.kids) {
            let mut v = list.to_vec();
            v[k] = Tree {
                label: node.label,
                kids,
            };
            out.push(v);
        }
    }
    out
}

fn to_tree(t: &Tree) -> ConstituencyTree {
    fn walk(t: &Tree, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node {
            label: NAMES[t.label as usize].to_string(),
            children: Vec::new(),
            token: None,
        });
        for k in &t.kids {
            let c = walk(k, nodes);
            nodes[id].children.push(c);
        }
        id
    }
    let mut nodes = Vec::new();
    walk(t, &mut nodes);
    ConstituencyTree::from_nodes(nodes).expect("preorder arena")
}

pub struct Report {
    pub trees: usize,
    pub pairs: usize,
    pub states: usize,
    pub mismatch_count: usize,
    pub mismatches: Vec<(String, String, usize, usize)>,
}

/// Compares the library distance with the search distance on every ordered
/// pair of trees of at most `MAX_NODES` nodes.
pub fn run() -> Report {
    // Enumerate all forests by insertions from the empty forest.
    let mut states: Vec<Vec<Tree>> = vec![Vec::new()];
    let mut index: HashMap<Vec<u8>, u32> = HashMap::new();
    index.insert(Vec::new(), 0);
    let mut adjacency: Vec<Vec<u32>> = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let mut adj = Vec::new();
        for n in neighbours(&states[next]) {
            if size(&n) > MAX_NODES {
                continue;
            }
            let k = key(&n);
            let id = match index.get(&k) {
                Some(&id) => id,
                None => {
                    let id = states.len() as u32;
                    index.insert(k, id);
                    states.push(n);
                    id
                }
            };
            adj.push(id);
        }
        adj.sort_unstable();
        adj.dedup();
        adjacency.push(adj);
        next += 1;
    }

    let tree_ids: Vec<usize> = (0..states.len()).filter(|&i| states[i].len() == 1).collect();
    let skeletons: Vec<SyntaxSkeleton> = tree_ids
        .iter()
        .map(|&i| SyntaxSkeleton::new(to_tree(&states[i][0])).expect("no tokens"))
        .collect();

    let mut report = Report {
        trees: tree_ids.len(),
        pairs: 0,
        states: states.len(),
        mismatch_count: 0,
        mismatches: Vec::new(),
    };
    let mut dist = vec![u8::MAX; states.len()];
    let mut queue = VecDeque::new();
    for (a, &src) in tree_ids.iter().enumerate() {
        dist.fill(u8::MAX);
        dist[src] = 0;
        queue.push_back(src as u32);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize] + 1;
            for &v in &adjacency[u as usize] {
                if dist[v as usize] == u8::MAX {
                    dist[v as usize] = d;
                    queue.push_back(v);
                }
            }
        }
        for (b, &dst) in tree_ids.iter().enumerate() {
            let fast = ted(&skeletons[a], &skeletons[b]);
            let slow = dist[dst] as usize;
            report.pairs += 1;
            if fast != slow {
                report.mismatch_count += 1;
            }
            if fast != slow && report.mismatches.len() < 5 {
                report.mismatches.push((
                    skeletons[a].tree().to_bracketed(),
                    skeletons[b].tree().to_bracketed(),
                    fast,
                    slow,
                ));
            }
        }
    }
    report
}
