//! Finite weighted graphs as Dirichlet spaces.
//!
//! A [`GraphSpace`] is a symmetric Markov kernel `k` on `n` vertices together
//! with per-vertex masses `m`, a measure `mu` (by default `mu = m`) and a
//! non-negative noise weight `omega`. The generator acting on fields is
//!
//! ```text
//! (L g)(x) = (1/m_x) * ( g(x) - sum_y k[x][y] g(y) )
//! ```
//!
//! which is self-adjoint in the `mu`-weighted inner product whenever `mu` is
//! proportional to `m`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GraphSpace {
    n: usize,
    kernel: DMatrix<f64>,
    mass: DVector<f64>,
    measure: DVector<f64>,
    weight: DVector<f64>,
    labels: Option<Vec<String>>,
    /// Adjacency lists `(neighbor, k_xy)` for the positive kernel entries.
    adj: Vec<Vec<(usize, f64)>>,
}

impl GraphSpace {
    /// Validates and builds a graph space. `measure`/`weight` default to
    /// `mass` and the constant 1 when `None`.
    pub fn new(
        kernel: DMatrix<f64>,
        mass: DVector<f64>,
        measure: Option<DVector<f64>>,
        weight: Option<DVector<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = kernel.nrows();
        if kernel.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: kernel.ncols() });
        }
        if mass.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mass.len() });
        }
        for x in 0..n {
            for y in (x + 1)..n {
                let dev = (kernel[(x, y)] - kernel[(y, x)]).abs();
                if dev > SYM_TOL {
                    return Err(Error::AsymmetricKernel { x, y, dev });
                }
            }
            let sum: f64 = kernel.row(x).iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::NotMarkov { x, sum });
            }
        }
        let measure = measure.unwrap_or_else(|| mass.clone());
        let weight = weight.unwrap_or_else(|| DVector::from_element(n, 1.0));
        if measure.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: measure.len() });
        }
        if weight.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weight.len() });
        }
        for x in 0..n {
            if mass[x] <= 0.0 {
                return Err(Error::NonPositive { x, what: "mass", value: mass[x] });
            }
            if measure[x] <= 0.0 {
                return Err(Error::NonPositive { x, what: "measure", value: measure[x] });
            }
            if weight[x] < 0.0 {
                return Err(Error::NegativeWeight { x, value: weight[x] });
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| kernel[(x, y)] > 0.0 && y != x)
                    .map(|y| (y, kernel[(x, y)]))
                    .collect()
            })
            .collect();
        let g = Self { n, kernel, mass, measure, weight, labels, adj };
        let reached = g.reachable_from(0);
        if reached != n {
            return Err(Error::Disconnected { reached, n });
        }
        Ok(g)
    }

    fn reachable_from(&self, start: usize) -> usize {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn measure(&self) -> &DVector<f64> {
        &self.measure
    }

    pub fn weight(&self) -> &DVector<f64> {
        &self.weight
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adj
    }

    /// Replaces the noise weight, revalidating non-negativity.
    pub fn with_weight(mut self, weight: DVector<f64>) -> Result<Self> {
        if weight.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: weight.len() });
        }
        for x in 0..self.n {
            if weight[x] < 0.0 {
                return Err(Error::NegativeWeight { x, value: weight[x] });
            }
        }
        self.weight = weight;
        Ok(self)
    }

    /// Total mass of the measure, `sum_x mu_x`.
    pub fn total_measure(&self) -> f64 {
        self.measure.sum()
    }

    /// Applies the generator `L` to a field.
    pub fn apply_generator(&self, f: &DVector<f64>) -> DVector<f64> {
        let kf = &self.kernel * f;
        DVector::from_fn(self.n, |x, _| (f[x] - kf[x]) / self.mass[x])
    }

    /// Carre du champ on the graph:
    /// `Gamma(f,g)(x) = 1/(2 m_x) sum_y k[x][y] (f(x)-f(y)) (g(x)-g(y))`.
    pub fn carre_du_champ(&self, f: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |x, _| {
            let mut acc = 0.0;
            for &(y, kxy) in &self.adj[x] {
                acc += kxy * (f[x] - f[y]) * (g[x] - g[y]);
            }
            acc / (2.0 * self.mass[x])
        })
    }

    /// Content hash of the graph data, used to key spectral caches and
    /// experiment manifests. FNV-1a over a canonical byte serialization.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.n as u64).to_le_bytes());
        for x in 0..self.n {
            for y in 0..self.n {
                eat(&self.kernel[(x, y)].to_le_bytes());
            }
            eat(&self.mass[x].to_le_bytes());
            eat(&self.measure[x].to_le_bytes());
            eat(&self.weight[x].to_le_bytes());
        }
        h
    }
}

/// Hop-count distances, `d[x][y] =` least number of positive-kernel edges.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    d: Vec<Vec<u32>>,
}

impl DistanceTable {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.d[x][y]
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn diameter(&self) -> u32 {
        self.d.iter().flat_map(|row| row.iter().copied()).max().unwrap_or(0)
    }
}

/// Breadth-first hop distances over edges with `k[x][y] > 0`.
pub fn graph_distance(g: &GraphSpace) -> DistanceTable {
    let n = g.n();
    let mut d = vec![vec![u32::MAX; n]; n];
    let mut queue = std::collections::VecDeque::new();
    for s in 0..n {
        d[s][s] = 0;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let dx = d[s][x];
            for &(y, _) in &g.adjacency()[x] {
                if d[s][y] == u32::MAX {
                    d[s][y] = dx + 1;
                    queue.push_back(y);
                }
            }
        }
    }
    DistanceTable { d }
}

/// Measure of the closed ball: `sum_{y : d(x,y) <= r} mu_y`.
pub fn ball_volume(g: &GraphSpace, dist: &DistanceTable, x: usize, r: f64) -> f64 {
    let mut acc = 0.0;
    for y in 0..g.n() {
        if (dist.get(x, y) as f64) <= r {
            acc += g.measure()[y];
        }
    }
    acc
}

/// Built-in generators plus file loading. Generator strings:
/// `torus2d:N`, `cycle:N`, `path:N`, `complete:N`, with an optional mass
/// suffix `:scaled` (m = 1/N^2) or `:scaled:C` (m = C/N^2) on `torus2d`,
/// `:scaled:C` meaning `m = C/N` on `cycle` and `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GraphGen {
    Torus2d { n: usize, mass: f64 },
    Cycle { n: usize, mass: f64 },
    Path { n: usize, mass: f64 },
    Complete { n: usize, mass: f64 },
}

impl GraphGen {
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::BadGeneratorSpec(spec.to_string());
        if parts.len() < 2 {
            return Err(bad());
        }
        let n: usize = parts[1].parse().map_err(|_| bad())?;
        if n < 2 {
            return Err(bad());
        }
        let scale = match parts.len() {
            2 => None,
            3 if parts[2] == "scaled" => Some(1.0),
            4 if parts[2] == "scaled" => Some(parts[3].parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        let gen = match parts[0] {
            "torus2d" => GraphGen::Torus2d { n, mass: scale.map_or(1.0, |c| c / (n * n) as f64) },
            "cycle" => GraphGen::Cycle { n, mass: scale.map_or(1.0, |c| c / n as f64) },
            "path" => GraphGen::Path { n, mass: scale.map_or(1.0, |c| c / n as f64) },
            "complete" => GraphGen::Complete { n, mass: scale.map_or(1.0, |c| c / n as f64) },
            _ => return Err(bad()),
        };
        Ok(gen)
    }

    pub fn build(&self) -> Result<GraphSpace> {
        match *self {
            GraphGen::Torus2d { n, mass } => torus2d(n, mass),
            GraphGen::Cycle { n, mass } => cycle(n, mass),
            GraphGen::Path { n, mass } => path(n, mass),
            GraphGen::Complete { n, mass } => complete(n, mass),
        }
    }
}

/// Builds a graph from a generator spec string or a JSON graph file path.
pub fn build_graph(spec: &str) -> Result<GraphSpace> {
    if spec.contains(':') {
        GraphGen::parse(spec)?.build()
    } else {
        load_graph_file(std::path::Path::new(spec))
    }
}

fn uniform(n: usize, v: f64) -> DVector<f64> {
    DVector::from_element(n, v)
}

/// N x N torus with nearest-neighbor kernel 1/4 per edge.
pub fn torus2d(side: usize, mass: f64) -> Result<GraphSpace> {
    let n = side * side;
    let idx = |i: usize, j: usize| (i % side) * side + (j % side);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..side {
        for j in 0..side {
            let x = idx(i, j);
            // += handles the doubled edges of the 2-cycle directions on side 2
            k[(x, idx(i + 1, j))] += 0.25;
            k[(x, idx(i + side - 1, j))] += 0.25;
            k[(x, idx(i, j + 1))] += 0.25;
            k[(x, idx(i, j + side - 1))] += 0.25;
        }
    }
    GraphSpace::new(k, uniform(n, mass), None, None, None)
}

/// Cycle on n vertices, kernel 1/2 per neighbor.
pub fn cycle(n: usize, mass: f64) -> Result<GraphSpace> {
    let mut k = DMatrix::zeros(n, n);
    for x in 0..n {
        k[(x, (x + 1) % n)] += 0.5;
        k[(x, (x + n - 1) % n)] += 0.5;
    }
    GraphSpace::new(k, uniform(n, mass), None, None, None)
}

/// Path on n vertices. Reflecting ends would break kernel symmetry, so the
/// endpoints carry a 1/2 self-loop instead (lazy walk at the boundary).
pub fn path(n: usize, mass: f64) -> Result<GraphSpace> {
    let mut k = DMatrix::zeros(n, n);
    for x in 0..(n - 1) {
        k[(x, x + 1)] = 0.5;
        k[(x + 1, x)] = 0.5;
    }
    k[(0, 0)] = 0.5;
    k[(n - 1, n - 1)] = 0.5;
    GraphSpace::new(k, uniform(n, mass), None, None, None)
}

/// Complete graph, kernel 1/(n-1) off the diagonal.
pub fn complete(n: usize, mass: f64) -> Result<GraphSpace> {
    let w = 1.0 / (n as f64 - 1.0);
    let mut k = DMatrix::from_element(n, n, w);
    for x in 0..n {
        k[(x, x)] = 0.0;
    }
    GraphSpace::new(k, uniform(n, mass), None, None, None)
}

/// JSON graph file: `{"n":…, "edges":[[x,y,k],…], "mass":[…], "measure":[…], "weight":[…]}`.
/// Undirected edges are listed once; the loader symmetrizes and validates.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub mass: Option<Vec<f64>>,
    #[serde(default)]
    pub measure: Option<Vec<f64>>,
    #[serde(default)]
    pub weight: Option<Vec<f64>>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<GraphSpace> {
        let n = self.n;
        let mut k = DMatrix::zeros(n, n);
        for &(x, y, v) in &self.edges {
            if x >= n || y >= n {
                return Err(Error::BadGraphFile(format!("edge ({x},{y}) out of range")));
            }
            if v < 0.0 {
                return Err(Error::BadGraphFile(format!("negative kernel entry at ({x},{y})")));
            }
            k[(x, y)] += v;
            if x != y {
                k[(y, x)] += v;
            }
        }
        let mass = DVector::from_vec(self.mass.unwrap_or_else(|| vec![1.0; n]));
        let measure = self.measure.map(DVector::from_vec);
        let weight = self.weight.map(DVector::from_vec);
        GraphSpace::new(k, mass, measure, weight, self.labels)
    }

    pub fn from_graph(g: &GraphSpace) -> Self {
        let n = g.n();
        let mut edges = Vec::new();
        for x in 0..n {
            for y in x..n {
                if g.kernel()[(x, y)] > 0.0 {
                    edges.push((x, y, g.kernel()[(x, y)]));
                }
            }
        }
        GraphFile {
            n,
            edges,
            mass: Some(g.mass().iter().copied().collect()),
            measure: Some(g.measure().iter().copied().collect()),
            weight: Some(g.weight().iter().copied().collect()),
            labels: g.labels().map(|l| l.to_vec()),
        }
    }
}

pub fn load_graph_file(path: &std::path::Path) -> Result<GraphSpace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::BadGraphFile(format!("{}: {e}", path.display())))?;
    let file: GraphFile =
        serde_json::from_str(&text).map_err(|e| Error::BadGraphFile(e.to_string()))?;
    file.into_graph()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_2_is_k2() {
        let g = complete(2, 1.0).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.kernel()[(0, 1)], 1.0);
        assert_eq!(g.kernel()[(1, 0)], 1.0);
        assert_eq!(g.mass()[0], 1.0);
        assert_eq!(g.measure()[1], 1.0);
    }

    #[test]
    fn torus2d_4_rows_are_quarter() {
        let g = torus2d(4, 1.0).unwrap();
        assert_eq!(g.n(), 16);
        for x in 0..16 {
            let row: Vec<f64> = g.kernel().row(x).iter().copied().filter(|&v| v > 0.0).collect();
            assert_eq!(row.len(), 4);
            assert!(row.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn torus2d_2_doubles_edges() {
        // side 2: +1 and -1 wrap to the same neighbor, kernel 1/2 each
        let g = torus2d(2, 1.0).unwrap();
        for x in 0..4 {
            let sum: f64 = g.kernel().row(x).iter().sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_row_sum_rejected() {
        let mut k = DMatrix::zeros(3, 3);
        k[(0, 1)] = 0.45;
        k[(1, 0)] = 0.45;
        k[(1, 2)] = 0.5;
        k[(2, 1)] = 0.5;
        k[(0, 2)] = 0.45;
        k[(2, 0)] = 0.45;
        let err = GraphSpace::new(k, DVector::from_element(3, 1.0), None, None, None).unwrap_err();
        assert!(matches!(err, Error::NotMarkov { .. }));
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let mut k = DMatrix::zeros(2, 2);
        k[(0, 1)] = 1.0;
        k[(1, 0)] = 0.5;
        k[(1, 1)] = 0.5;
        let err = GraphSpace::new(k, DVector::from_element(2, 1.0), None, None, None).unwrap_err();
        assert!(matches!(err, Error::AsymmetricKernel { .. }));
    }

    #[test]
    fn disconnected_rejected() {
        let mut k = DMatrix::zeros(4, 4);
        k[(0, 1)] = 1.0;
        k[(1, 0)] = 1.0;
        k[(2, 3)] = 1.0;
        k[(3, 2)] = 1.0;
        let err = GraphSpace::new(k, DVector::from_element(4, 1.0), None, None, None).unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }));
    }

    #[test]
    fn nonpositive_mass_rejected() {
        let g = complete(2, 1.0).unwrap();
        let err =
            GraphSpace::new(g.kernel().clone(), DVector::from_vec(vec![1.0, 0.0]), None, None, None)
                .unwrap_err();
        assert!(matches!(err, Error::NonPositive { .. }));
    }

    #[test]
    fn distances_k2_and_cycle() {
        let g = complete(2, 1.0).unwrap();
        let d = graph_distance(&g);
        assert_eq!(d.get(0, 1), 1);

        let g = cycle(8, 1.0).unwrap();
        let d = graph_distance(&g);
        assert_eq!(d.get(0, 4), 4);
        assert_eq!(d.diameter(), 4);
    }

    #[test]
    fn torus2d_4_max_distance() {
        let g = torus2d(4, 1.0).unwrap();
        let d = graph_distance(&g);
        assert_eq!(d.diameter(), 4);
    }

    #[test]
    fn metric_axioms_on_generators() {
        for g in [torus2d(4, 1.0).unwrap(), cycle(9, 1.0).unwrap(), path(7, 1.0).unwrap()] {
            let d = graph_distance(&g);
            let n = g.n();
            for x in 0..n {
                assert_eq!(d.get(x, x), 0);
                for y in 0..n {
                    assert_eq!(d.get(x, y), d.get(y, x));
                    if x != y {
                        assert!(d.get(x, y) >= 1);
                    }
                    for z in 0..n {
                        assert!(d.get(x, z) <= d.get(x, y) + d.get(y, z));
                    }
                }
            }
        }
    }

    #[test]
    fn ball_volumes() {
        let g = complete(2, 1.0).unwrap();
        let d = graph_distance(&g);
        assert_eq!(ball_volume(&g, &d, 0, 0.0), 1.0);

        let g = cycle(8, 1.0).unwrap();
        let d = graph_distance(&g);
        assert_eq!(ball_volume(&g, &d, 0, 2.0), 5.0);

        let g = torus2d(8, 1.0).unwrap();
        let d = graph_distance(&g);
        // l1 ball of radius 3 in Z^2: 1 + 4 + 8 + 12 = 25
        assert_eq!(ball_volume(&g, &d, 0, 3.0), 25.0);
    }

    #[test]
    fn ball_volume_monotone_reaches_total() {
        let g = torus2d(6, 1.0).unwrap();
        let d = graph_distance(&g);
        let diam = d.diameter();
        let mut prev = 0.0;
        for r in 0..=diam {
            let v = ball_volume(&g, &d, 3, r as f64);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(prev, g.total_measure());
    }

    #[test]
    fn generator_spec_parsing() {
        assert_eq!(GraphGen::parse("torus2d:4").unwrap(), GraphGen::Torus2d { n: 4, mass: 1.0 });
        assert_eq!(
            GraphGen::parse("torus2d:4:scaled").unwrap(),
            GraphGen::Torus2d { n: 4, mass: 1.0 / 16.0 }
        );
        assert_eq!(
            GraphGen::parse("torus2d:4:scaled:5").unwrap(),
            GraphGen::Torus2d { n: 4, mass: 5.0 / 16.0 }
        );
        assert!(GraphGen::parse("blob:4").is_err());
        assert!(GraphGen::parse("torus2d").is_err());
    }

    #[test]
    fn graph_file_roundtrip() {
        let g = torus2d(3, 1.0).unwrap();
        let f = GraphFile::from_graph(&g);
        let g2 = f.into_graph().unwrap();
        assert_eq!(g.content_hash(), g2.content_hash());
    }

    #[test]
    fn carre_du_champ_k2() {
        let g = complete(2, 1.0).unwrap();
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let gam = g.carre_du_champ(&f, &f);
        assert!((gam[0] - 2.0).abs() < 1e-14);
        assert!((gam[1] - 2.0).abs() < 1e-14);
        // energy identity: sum Gamma(f,f) mu = <f, Lf> = 4
        let lf = g.apply_generator(&f);
        let energy: f64 = (0..2).map(|x| f[x] * lf[x] * g.measure()[x]).sum();
        assert!((energy - 4.0).abs() < 1e-14);
        let gsum: f64 = (0..2).map(|x| gam[x] * g.measure()[x]).sum();
        assert!((gsum - 4.0).abs() < 1e-14);
    }
}
