//! Zhang–Shasha ordered tree edit distance with unit costs.

use super::{ConstituencyTree, SyntaxSkeleton};

/// Postorder view of a tree: labels, leftmost-leaf descendant of every
/// node and the keyroots, all in postorder numbering.
struct Postorder<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a ConstituencyTree) -> Self {
        let n = tree.len();
        let mut labels = Vec::with_capacity(n);
        let mut leftmost = Vec::with_capacity(n);
        // (node, next child index) explicit stack; avoids deep recursion.
        let mut stack = vec![(tree.root(), 0usize)];
        let mut first_leaf = vec![0usize; n];
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let children = &tree.node(id).children;
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                stack.push((child, 0));
                continue;
            }
            stack.pop();
            let post = labels.len();
            labels.push(tree.label(id));
            first_leaf[id] = match children.first() {
                Some(&c) => first_leaf[c],
                None => post,
            };
            leftmost.push(first_leaf[id]);
        }

        // A keyroot is the highest node with a given leftmost leaf.
        let mut keyroots = Vec::new();
        let mut seen = vec![false; n];
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.sort_unstable();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }
}

fn distance(a: &ConstituencyTree, b: &ConstituencyTree) -> usize {
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut treedist = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];

    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let li = pa.leftmost[i];
            let lj = pb.leftmost[j];
            // fd is indexed relative to (li, lj); row/column 0 is the empty forest.
            fd[0][0] = 0;
            for x in li..=i {
                fd[x - li + 1][0] = fd[x - li][0] + 1;
            }
            for y in lj..=j {
                fd[0][y - lj + 1] = fd[0][y - lj] + 1;
            }
            for x in li..=i {
                for y in lj..=j {
                    let (fx, fy) = (x - li + 1, y - lj + 1);
                    let del = fd[fx - 1][fy] + 1;
                    let ins = fd[fx][fy - 1] + 1;
                    if pa.leftmost[x] == li && pb.leftmost[y] == lj {
                        let relabel = usize::from(pa.labels[x] != pb.labels[y]);
                        let d = del.min(ins).min(fd[fx - 1][fy - 1] + relabel);
                        fd[fx][fy] = d;
                        treedist[x][y] = d;
                    } else {
                        let px = pa.leftmost[x] - li;
                        let py = pb.leftmost[y] - lj;
                        fd[fx][fy] = del.min(ins).min(fd[px][py] + treedist[x][y]);
                    }
                }
            }
        }
    }
    treedist[n - 1][m - 1]
}

/// Minimum number of unit-cost node insertions, deletions and relabelings
/// turning `a` into `b`.
pub fn ted(a: &SyntaxSkeleton, b: &SyntaxSkeleton) -> usize {
    distance(a.tree(), b.tree())
}

impl ConstituencyTree {
    /// Label-only edit distance; terminal tokens are compared as labels.
    pub fn edit_distance(&self, other: &ConstituencyTree) -> usize {
        distance(self, other)
    }
}
