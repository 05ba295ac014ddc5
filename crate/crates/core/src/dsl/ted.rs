//! Unit-cost ordered tree edit distance (Zhang–Shasha).

use super::spec::{GraphNode, OperatorGraph};

/// Ordered tree with string labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTree {
    pub label: String,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }
}

impl From<&GraphNode> for LabeledTree {
    fn from(n: &GraphNode) -> Self {
        LabeledTree {
            label: n.label(),
            children: n.children().iter().map(LabeledTree::from).collect(),
        }
    }
}

impl From<&OperatorGraph> for LabeledTree {
    fn from(g: &OperatorGraph) -> Self {
        LabeledTree::from(&g.root)
    }
}

/// Post-order view: labels, leftmost-leaf indices and keyroots.
struct Postorder<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a LabeledTree) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        fn visit<'a>(t: &'a LabeledTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for c in &t.children {
                let l = visit(c, labels, leftmost);
                first_leaf.get_or_insert(l);
            }
            let idx = labels.len();
            labels.push(&t.label);
            let l = first_leaf.unwrap_or(idx);
            leftmost.push(l);
            l
        }
        visit(tree, &mut labels, &mut leftmost);
        // A keyroot is the highest node with a given leftmost leaf.
        let n = labels.len();
        let mut keyroots = Vec::new();
        for i in 0..n {
            if !((i + 1)..n).any(|j| leftmost[j] == leftmost[i]) {
                keyroots.push(i);
            }
        }
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Minimum number of node insertions, deletions and relabels turning `a` into `b`.
#[allow(clippy::needless_range_loop)]
pub fn labeled_tree_distance(a: &LabeledTree, b: &LabeledTree) -> usize {
    let ta = Postorder::new(a);
    let tb = Postorder::new(b);
    let (n, m) = (ta.labels.len(), tb.labels.len());
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let li = ta.leftmost[i];
            let lj = tb.leftmost[j];
            // fd is indexed relative to the forest starting at li / lj; row and
            // column 0 stand for the empty forest.
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
                    let delete = fd[fx - 1][fy] + 1;
                    let insert = fd[fx][fy - 1] + 1;
                    if ta.leftmost[x] == li && tb.leftmost[y] == lj {
                        let relabel = fd[fx - 1][fy - 1] + usize::from(ta.labels[x] != tb.labels[y]);
                        fd[fx][fy] = delete.min(insert).min(relabel);
                        td[x][y] = fd[fx][fy];
                    } else {
                        let px = ta.leftmost[x] - li;
                        let py = tb.leftmost[y] - lj;
                        fd[fx][fy] = delete.min(insert).min(fd[px][py] + td[x][y]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Structural distance between operator graphs; parameter values are ignored.
pub fn tree_edit_distance(a: &OperatorGraph, b: &OperatorGraph) -> usize {
    labeled_tree_distance(&LabeledTree::from(a), &LabeledTree::from(b))
}
