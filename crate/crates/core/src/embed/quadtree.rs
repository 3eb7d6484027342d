// SPDX-License-Identifier: MIT OR Apache-2.0

//! Region quadtree over 2-D points for Barnes-Hut repulsion.

const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
struct Node {
    center: [f64; 2],
    half: f64,
    mass: usize,
    com: [f64; 2],
    children: Option<[usize; 4]>,
    /// Points held by a leaf (more than one only at `MAX_DEPTH` or for
    /// duplicates).
    points: Vec<usize>,
    depth: usize,
}

impl Node {
    fn new(center: [f64; 2], half: f64, depth: usize) -> Self {
        Self {
            center,
            half,
            mass: 0,
            com: [0.0; 2],
            children: None,
            points: Vec::new(),
            depth,
        }
    }

    fn quadrant(&self, p: [f64; 2]) -> usize {
        (usize::from(p[0] >= self.center[0])) | (usize::from(p[1] >= self.center[1]) << 1)
    }
}

#[derive(Debug)]
pub(super) struct QuadTree<'a> {
    nodes: Vec<Node>,
    points: &'a [[f64; 2]],
}

impl<'a> QuadTree<'a> {
    pub(super) fn build(points: &'a [[f64; 2]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(1e-12) * (1.0 + 1e-9);
        let mut tree = Self {
            nodes: vec![Node::new(center, half, 0)],
            points,
        };
        for i in 0..points.len() {
            tree.insert(i);
        }
        tree
    }

    fn insert(&mut self, idx: usize) {
        let p = self.points[idx];
        let mut node = 0;
        loop {
            {
                let n = &mut self.nodes[node];
                let m = n.mass as f64;
                n.com[0] = (n.com[0] * m + p[0]) / (m + 1.0);
                n.com[1] = (n.com[1] * m + p[1]) / (m + 1.0);
                n.mass += 1;
            }
            match self.nodes[node].children {
                Some(children) => {
                    node = children[self.nodes[node].quadrant(p)];
                }
                None => {
                    let n = &self.nodes[node];
                    let duplicate = n.points.iter().any(|&j| self.points[j] == p);
                    if n.points.is_empty() || n.depth >= MAX_DEPTH || duplicate {
                        self.nodes[node].points.push(idx);
                        return;
                    }
                    self.split(node);
                    // redistribute the existing point(s); mass bookkeeping
                    // above already counted them at this node
                    let held = std::mem::take(&mut self.nodes[node].points);
                    for j in held {
                        self.push_down(node, j);
                    }
                    node = self.nodes[node].children.unwrap()[self.nodes[node].quadrant(p)];
                }
            }
        }
    }

    fn split(&mut self, node: usize) {
        let (c, h, depth) = {
            let n = &self.nodes[node];
            (n.center, n.half / 2.0, n.depth + 1)
        };
        let base = self.nodes.len();
        for q in 0..4 {
            let dx = if q & 1 == 1 { h } else { -h };
            let dy = if q & 2 == 2 { h } else { -h };
            self.nodes.push(Node::new([c[0] + dx, c[1] + dy], h, depth));
        }
        self.nodes[node].children = Some([base, base + 1, base + 2, base + 3]);
    }

    /// Places an already-counted point into the child subtree of `node`.
    fn push_down(&mut self, node: usize, idx: usize) {
        let p = self.points[idx];
        let child = self.nodes[node].children.unwrap()[self.nodes[node].quadrant(p)];
        let n = &mut self.nodes[child];
        let m = n.mass as f64;
        n.com[0] = (n.com[0] * m + p[0]) / (m + 1.0);
        n.com[1] = (n.com[1] * m + p[1]) / (m + 1.0);
        n.mass += 1;
        n.points.push(idx);
    }

    /// Repulsive force on point `i` and its contribution to the
    /// normalization `Z`: returns `(Σ q²·(y_i − y_j), Σ q)` with
    /// `q = 1 / (1 + ‖y_i − y_j‖²)`, far cells summarized by their centre of
    /// mass when `cell width / distance < theta`.
    pub(super) fn repulsion(&self, i: usize, theta: f64) -> ([f64; 2], f64) {
        let p = self.points[i];
        let mut force = [0.0; 2];
        let mut z = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.mass == 0 {
                continue;
            }
            match n.children {
                None => {
                    for &j in &n.points {
                        if j == i {
                            continue;
                        }
                        let q = self.points[j];
                        let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                        let w = 1.0 / (1.0 + dx * dx + dy * dy);
                        z += w;
                        force[0] += w * w * dx;
                        force[1] += w * w * dy;
                    }
                }
                Some(children) => {
                    let (dx, dy) = (p[0] - n.com[0], p[1] - n.com[1]);
                    let d2 = dx * dx + dy * dy;
                    let width = 2.0 * n.half;
                    if d2 > 0.0 && width * width < theta * theta * d2 {
                        let w = 1.0 / (1.0 + d2);
                        let m = n.mass as f64;
                        z += m * w;
                        force[0] += m * w * w * dx;
                        force[1] += m * w * w * dy;
                    } else {
                        // reverse so children are visited in index order
                        stack.extend(children.iter().rev());
                    }
                }
            }
        }
        (force, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(points: &[[f64; 2]], i: usize) -> ([f64; 2], f64) {
        let mut f = [0.0; 2];
        let mut z = 0.0;
        for (j, q) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let (dx, dy) = (points[i][0] - q[0], points[i][1] - q[1]);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            z += w;
            f[0] += w * w * dx;
            f[1] += w * w * dy;
        }
        (f, z)
    }

    #[test]
    fn theta_zero_is_exact() {
        let points: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.7;
                [t.sin() * (1.0 + i as f64 * 0.1), t.cos() * 3.0]
            })
            .collect();
        let tree = QuadTree::build(&points);
        for i in 0..points.len() {
            let (f, z) = tree.repulsion(i, 0.0);
            let (fe, ze) = exact(&points, i);
            assert!((z - ze).abs() < 1e-12);
            assert!((f[0] - fe[0]).abs() < 1e-12 && (f[1] - fe[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_and_mass() {
        let points = vec![[1.0, 1.0], [1.0, 1.0], [0.0, 0.0], [5.0, -2.0]];
        let tree = QuadTree::build(&points);
        assert_eq!(tree.nodes[0].mass, 4);
        let (_, z) = tree.repulsion(0, 0.0);
        assert!((z - exact(&points, 0).1).abs() < 1e-12);
    }
}
