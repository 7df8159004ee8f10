//! Coupling maps, the topology registry and qubit layouts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Connectivity graph. Edges are stored directed, both directions present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingMap {
    name: String,
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    undirected: Vec<(usize, usize)>,
    adjacent: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    dist: Vec<u32>,
}

impl CouplingMap {
    /// Build from a directed edge list; every edge must appear in both directions
    /// and the graph must be connected.
    pub fn from_directed(name: impl Into<String>, n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let name = name.into();
        let mut adjacent = vec![false; n_qubits * n_qubits];
        for &(a, b) in &edges {
            if a >= n_qubits || b >= n_qubits || a == b {
                return Err(Error::InvalidCoupling(format!("{name}: bad edge ({a}, {b})")));
            }
            adjacent[a * n_qubits + b] = true;
        }
        for &(a, b) in &edges {
            if !adjacent[b * n_qubits + a] {
                return Err(Error::InvalidCoupling(format!("{name}: edge ({a}, {b}) has no reverse")));
            }
        }
        let mut undirected = Vec::new();
        for &(a, b) in &edges {
            let e = (a.min(b), a.max(b));
            if !undirected.contains(&e) {
                undirected.push(e);
            }
        }
        let mut neighbors = vec![Vec::new(); n_qubits];
        for &(a, b) in &undirected {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let dist = all_pairs_bfs(n_qubits, &neighbors);
        if dist.contains(&u32::MAX) {
            return Err(Error::InvalidCoupling(format!("{name}: graph is disconnected")));
        }
        Ok(CouplingMap { name, n_qubits, edges, undirected, adjacent, neighbors, dist })
    }

    /// Build from undirected pairs; both directions are added, sorted.
    pub fn from_undirected(name: impl Into<String>, n_qubits: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        edges.sort_unstable();
        edges.dedup();
        Self::from_directed(name, n_qubits, edges)
    }

    pub fn line(n: usize) -> Self {
        let pairs: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::from_undirected(format!("{n}-L"), n, &pairs).expect("line is connected")
    }

    pub fn ring(n: usize) -> Self {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_undirected(format!("{n}-O"), n, &pairs).expect("ring is connected")
    }

    /// All-to-all connectivity.
    pub fn complete(n: usize) -> Self {
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                pairs.push((a, b));
            }
        }
        Self::from_undirected(format!("{n}-full"), n, &pairs).expect("complete graph is connected")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Undirected edges `(a, b)` with `a < b`, in registry order.
    pub fn undirected_edges(&self) -> &[(usize, usize)] {
        &self.undirected
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q]
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        a < self.n_qubits && b < self.n_qubits && self.adjacent[a * self.n_qubits + b]
    }

    pub fn dist(&self, a: usize, b: usize) -> u32 {
        self.dist[a * self.n_qubits + b]
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Shortest path from `a` to `b`, inclusive of both ends.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            cur = *self.neighbors[cur]
                .iter()
                .find(|&&n| self.dist(n, b) + 1 == self.dist(cur, b))
                .expect("connected graph");
            path.push(cur);
        }
        path
    }
}

fn all_pairs_bfs(n: usize, neighbors: &[Vec<usize>]) -> Vec<u32> {
    let mut dist = vec![u32::MAX; n * n];
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if row[v] == u32::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    dist
}

const HH27: &str = "[[0, 1], [1, 0], [1, 2], [1, 4], [2, 1], [2, 3], [3, 2], [3, 5], [4, 1], [4, 7], [5, 3], [5, 8], [6, 7], [7, 4], [7, 6], [7, 10], [8, 5], [8, 9], [8, 11], [9, 8], [10, 7], [10, 12], [11, 8], [11, 14], [12, 10], [12, 13], [12, 15], [13, 12], [13, 14], [14, 11], [14, 13], [14, 16], [15, 12], [15, 18], [16, 14], [16, 19], [17, 18], [18, 15], [18, 17], [18, 21], [19, 16], [19, 20], [19, 22], [20, 19], [21, 18], [21, 23], [22, 19], [22, 25], [23, 21], [23, 24], [24, 23], [24, 25], [25, 22], [25, 24], [25, 26], [26, 25]]";

const HH33: &str = "[[0, 1], [1, 0], [1, 2], [1, 4], [2, 1], [2, 3], [3, 2], [3, 5], [3, 30], [4, 1], [4, 7], [5, 3], [5, 8], [6, 7], [7, 4], [7, 6], [7, 10], [8, 5], [8, 9], [8, 11], [9, 8], [10, 7], [10, 12], [11, 8], [11, 14], [12, 10], [12, 13], [12, 15], [13, 12], [13, 14], [14, 11], [14, 13], [14, 16], [15, 12], [15, 18], [16, 14], [16, 19], [17, 18], [18, 15], [18, 17], [18, 21], [19, 16], [19, 20], [19, 22], [20, 19], [21, 18], [21, 23], [22, 19], [22, 25], [23, 21], [23, 24], [23, 27], [24, 23], [24, 25], [25, 22], [25, 24], [25, 26], [26, 25], [27, 23], [27, 28], [28, 27], [28, 29], [29, 28], [30, 3], [30, 31], [31, 30], [31, 32], [32, 31]]";

const HH65: &str = "[[0, 1], [0, 10], [1, 0], [1, 2], [2, 1], [2, 3], [3, 2], [3, 4], [4, 3], [4, 5], [4, 11], [5, 4], [5, 6], [6, 5], [6, 7], [7, 6], [7, 8], [8, 7], [8, 9], [8, 12], [9, 8], [10, 0], [10, 13], [11, 4], [11, 17], [12, 8], [12, 21], [13, 10], [13, 14], [14, 13], [14, 15], [15, 14], [15, 16], [15, 24], [16, 15], [16, 17], [17, 11], [17, 16], [17, 18], [18, 17], [18, 19], [19, 18], [19, 20], [19, 25], [20, 19], [20, 21], [21, 12], [21, 20], [21, 22], [22, 21], [22, 23], [23, 22], [23, 26], [24, 15], [24, 29], [25, 19], [25, 33], [26, 23], [26, 37], [27, 28], [27, 38], [28, 27], [28, 29], [29, 24], [29, 28], [29, 30], [30, 29], [30, 31], [31, 30], [31, 32], [31, 39], [32, 31], [32, 33], [33, 25], [33, 32], [33, 34], [34, 33], [34, 35], [35, 34], [35, 36], [35, 40], [36, 35], [36, 37], [37, 26], [37, 36], [38, 27], [38, 41], [39, 31], [39, 45], [40, 35], [40, 49], [41, 38], [41, 42], [42, 41], [42, 43], [43, 42], [43, 44], [43, 52], [44, 43], [44, 45], [45, 39], [45, 44], [45, 46], [46, 45], [46, 47], [47, 46], [47, 48], [47, 53], [48, 47], [48, 49], [49, 40], [49, 48], [49, 50], [50, 49], [50, 51], [51, 50], [51, 54], [52, 43], [52, 56], [53, 47], [53, 60], [54, 51], [54, 64], [55, 56], [56, 52], [56, 55], [56, 57], [57, 56], [57, 58], [58, 57], [58, 59], [59, 58], [59, 60], [60, 53], [60, 59], [60, 61], [61, 60], [61, 62], [62, 61], [62, 63], [63, 62], [63, 64], [64, 54], [64, 63]]";

const TORINO: &str = "[[0,1], [0,15], [1,0], [1,2], [2,1], [2,3], [3,2], [3,4], [4,3], [4,5], [4,16], [5,4], [5,6], [6,5], [6,7], [7,6], [7,8], [8,7], [8,9], [8,17], [9,8], [9,10], [10,9], [10,11], [11,10], [11,12], [12,11], [12,13], [12,18], [13,12], [13,14], [14,13], [15,0], [15,19], [16,4], [16,23], [17,8], [17,27], [18,12], [18,31], [19,15], [19,20], [20,19], [20,21], [21,20], [21,22], [21,34], [22,21], [22,23], [23,16], [23,22], [23,24], [24,23], [24,25], [25,24], [25,26], [25,35], [26,25], [26,27], [27,17], [27,26], [27,28], [28,27], [28,29], [29,28], [29,30], [29,36], [30,29], [30,31], [31,18], [31,30], [31,32], [32,31], [32,33], [33,32], [33,37], [34,21], [34,40], [35,25], [35,44], [36,29], [36,48], [37,33], [37,52], [38,39], [38,53], [39,38], [39,40], [40,34], [40,39], [40,41], [41,40], [41,42], [42,41], [42,43], [42,54], [43,42], [43,44], [44,35], [44,43], [44,45], [45,44], [45,46], [46,45], [46,47], [46,55], [47,46], [47,48], [48,36], [48,47], [48,49], [49,48], [49,50], [50,49], [50,51], [50,56], [51,50], [51,52], [52,37], [52,51], [53,38], [53,57], [54,42], [54,61], [55,46], [55,65], [56,50], [56,69], [57,53], [57,58], [58,57], [58,59], [59,58], [59,60], [59,72], [60,59], [60,61], [61,54], [61,60], [61,62], [62,61], [62,63], [63,62], [63,64], [63,73], [64,63], [64,65], [65,55], [65,64], [65,66], [66,65], [66,67], [67,66], [67,68], [67,74], [68,67], [68,69], [69,56], [69,68], [69,70], [70,69], [70,71], [71,70], [71,75], [72,59], [72,78], [73,63], [73,82], [74,67], [74,86], [75,71], [75,90], [76,77], [76,91], [77,76], [77,78], [78,72], [78,77], [78,79], [79,78], [79,80], [80,79], [80,81], [80,92], [81,80], [81,82], [82,73], [82,81], [82,83], [83,82], [83,84], [84,83], [84,85], [84,93], [85,84], [85,86], [86,74], [86,85], [86,87], [87,86], [87,88], [88,87], [88,89], [88,94], [89,88], [89,90], [90,75], [90,89], [91,76], [91,95], [92,80], [92,99], [93,84], [93,103], [94,88], [94,107], [95,91], [95,96], [96,95], [96,97], [97,96], [97,98], [97,110], [98,97], [98,99], [99,92], [99,98], [99,100], [100,99], [100,101], [101,100], [101,102], [101,111], [102,101], [102,103], [103,93], [103,102], [103,104], [104,103], [104,105], [105,104], [105,106], [105,112], [106,105], [106,107], [107,94], [107,106], [107,108], [108,107], [108,109], [109,108], [109,113], [110,97], [110,116], [111,101], [111,120], [112,105], [112,124], [113,109], [113,128], [114,115], [114,129], [115,114], [115,116], [116,110], [116,115], [116,117], [117,116], [117,118], [118,117], [118,119], [118,130], [119,118], [119,120], [120,111], [120,119], [120,121], [121,120], [121,122], [122,121], [122,123], [122,131], [123,122], [123,124], [124,112], [124,123], [124,125], [125,124], [125,126], [126,125], [126,127], [126,132], [127,126], [127,128], [128,113], [128,127], [129,114], [130,118], [131,122], [132,126]]";

type Tree = (&'static str, usize, &'static [(usize, usize)]);

/// Small trees, given as undirected pairs.
const SMALL: &[Tree] = &[
    ("4-Y", 4, &[(0, 1), (1, 2), (1, 3)]),
    ("5-T", 5, &[(0, 1), (1, 2), (1, 3), (3, 4)]),
    ("6-T", 6, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 5)]),
    ("6-Y", 6, &[(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)]),
    ("7-F", 7, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (2, 6)]),
    ("7-H", 7, &[(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)]),
    ("7-T", 7, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (5, 6)]),
    ("7-Y", 7, &[(0, 1), (1, 2), (2, 3), (3, 4), (2, 5), (5, 6)]),
    ("8-F", 8, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (5, 6), (2, 7)]),
    ("8-H", 8, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 6), (5, 6), (6, 7)]),
    ("8-T1", 8, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (5, 6), (6, 7)]),
    ("8-T2", 8, &[(0, 1), (1, 2), (2, 3), (3, 4), (2, 5), (5, 6), (6, 7)]),
    ("8-Y", 8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 7)]),
    ("9-F1", 9, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (5, 6), (2, 7), (7, 8)]),
    ("9-F2", 9, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 6), (6, 7), (2, 8)]),
    ("9-H1", 9, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (5, 7), (6, 7), (7, 8)]),
    ("9-H2", 9, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 6), (5, 6), (6, 7), (7, 8)]),
    ("9-H3", 9, &[(0, 1), (1, 2), (2, 3), (1, 4), (4, 6), (5, 6), (6, 7), (7, 8)]),
    ("9-H4", 9, &[(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6), (6, 7), (7, 8)]),
    ("9-T1", 9, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8)]),
    ("9-T2", 9, &[(0, 1), (1, 2), (2, 3), (3, 4), (2, 5), (5, 6), (6, 7), (7, 8)]),
    ("9-Y", 9, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 7), (7, 8)]),
];

/// Every registered topology name.
pub fn topology_names() -> Vec<String> {
    let mut names: Vec<String> = (3..=11).map(|n| format!("{n}-L")).collect();
    names.extend(SMALL.iter().map(|(n, _, _)| n.to_string()));
    names.extend(["12-O", "27-HH", "33-HH", "65-HH", "ibm_torino"].map(String::from));
    names.sort_by_key(|n| {
        let size: usize = n.split('-').next().and_then(|s| s.parse().ok()).unwrap_or(133);
        (size, n.clone())
    });
    names
}

/// Look up a registered coupling map.
pub fn topology(name: &str) -> Result<CouplingMap> {
    if let Some(n) = name.strip_suffix("-L").and_then(|s| s.parse::<usize>().ok()) {
        if (3..=11).contains(&n) {
            return Ok(CouplingMap::line(n));
        }
    }
    if name == "12-O" {
        return Ok(CouplingMap::ring(12));
    }
    if let Some((_, n, pairs)) = SMALL.iter().find(|(id, _, _)| *id == name) {
        return CouplingMap::from_undirected(name, *n, pairs);
    }
    let printed = match name {
        "27-HH" => Some((27, HH27)),
        "33-HH" => Some((33, HH33)),
        "65-HH" => Some((65, HH65)),
        "ibm_torino" => Some((133, TORINO)),
        _ => None,
    };
    if let Some((n, text)) = printed {
        let pairs: Vec<[usize; 2]> = serde_json::from_str(text).expect("embedded edge list");
        return CouplingMap::from_directed(name, n, pairs.into_iter().map(|[a, b]| (a, b)).collect());
    }
    Err(Error::UnknownTopology { name: name.to_string(), valid: topology_names() })
}

/// Logical-to-physical qubit assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Layout {
    l2p: Vec<usize>,
    p2l: Vec<usize>,
}

impl Layout {
    pub fn trivial(n: usize) -> Self {
        Layout { l2p: (0..n).collect(), p2l: (0..n).collect() }
    }

    pub fn from_l2p(l2p: Vec<usize>) -> Result<Self> {
        let n = l2p.len();
        let mut p2l = vec![usize::MAX; n];
        for (l, &p) in l2p.iter().enumerate() {
            if p >= n || p2l[p] != usize::MAX {
                return Err(Error::Routing(format!("layout {l2p:?} is not a bijection")));
            }
            p2l[p] = l;
        }
        Ok(Layout { l2p, p2l })
    }

    pub fn len(&self) -> usize {
        self.l2p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l2p.is_empty()
    }

    pub fn physical(&self, logical: usize) -> usize {
        self.l2p[logical]
    }

    pub fn logical(&self, physical: usize) -> usize {
        self.p2l[physical]
    }

    pub fn l2p(&self) -> &[usize] {
        &self.l2p
    }

    /// Exchange the logical qubits sitting on physical `a` and `b`.
    pub fn swap_physical(&mut self, a: usize, b: usize) {
        let (la, lb) = (self.p2l[a], self.p2l[b]);
        self.p2l.swap(a, b);
        self.l2p[la] = b;
        self.l2p[lb] = a;
    }
}

impl TryFrom<Vec<usize>> for Layout {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Layout::from_l2p(v)
    }
}

impl From<Layout> for Vec<usize> {
    fn from(l: Layout) -> Self {
        l.l2p
    }
}
