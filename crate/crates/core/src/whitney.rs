//! Dyadic Whitney cubes of rasterised open sets, chain and log metrics,
//! the uniform-domain constant and the Jones extension.
//!
//! Sets live on a cubic box split into `2^level` cells per axis. The open set is
//! the interior of the union of its closed cells. Distances are measured
//! exactly in squared cell units on the vertex lattice.

use std::collections::VecDeque;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::DomainSpec;
use crate::fields::{Grid, ScalarField};
use crate::{Error, Point, Result};

/// Chain distance between cubes in different components.
pub const DISCONNECTED: usize = usize::MAX;

/// Which side of a raster a decomposition covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// The set itself; everything outside the box is complement.
    Inside,
    /// The complement inside the box; the box exterior belongs to it.
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    ndim: usize,
    level: u32,
    lo: f64,
    side: f64,
    inside: Vec<bool>,
}

impl Raster {
    /// Cells of `[lo, lo + side]^ndim` at `level`, in when `f` holds at the centre.
    pub fn from_fn(ndim: usize, level: u32, lo: f64, side: f64, f: impl Fn(&Point) -> bool + Sync) -> Result<Raster> {
        if !(1..=3).contains(&ndim) || level > 12 || !(side > 0.0) {
            return Err(Error::Config(format!("bad raster: ndim {ndim}, level {level}, side {side}")));
        }
        let grid = Grid::cell_centered_box(ndim, 1 << level, lo, side)?;
        let inside = (0..grid.len()).into_par_iter().map(|i| f(&grid.point(i))).collect();
        Ok(Raster { ndim, level, lo, side, inside })
    }

    pub fn from_spec(spec: &DomainSpec, level: u32, lo: f64, side: f64) -> Result<Raster> {
        Raster::from_fn(spec.ndim(), level, lo, side, |p| spec.contains(p))
    }

    pub fn from_mask(grid: &Grid, mask: &[bool]) -> Result<Raster> {
        let n = grid.shape()[0];
        let h = grid.spacing()[0];
        let cubic = grid.shape().iter().all(|&m| m == n)
            && grid.spacing().iter().all(|&s| s == h)
            && grid.origin().iter().all(|&o| o == grid.origin()[0])
            && grid.periodic().iter().all(|p| !p);
        if !cubic || !n.is_power_of_two() || mask.len() != grid.len() {
            return Err(Error::Config("raster masks need a cubic non-periodic grid with 2^k cells per axis".into()));
        }
        Ok(Raster {
            ndim: grid.ndim(),
            level: n.trailing_zeros(),
            lo: grid.origin()[0] - 0.5 * h,
            side: h * n as f64,
            inside: mask.to_vec(),
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }
    pub fn cells(&self) -> usize {
        1 << self.level
    }
    pub fn cell_size(&self) -> f64 {
        self.side / self.cells() as f64
    }

    /// The cell-centred grid whose nodes are the raster cells.
    pub fn grid(&self) -> Grid {
        Grid::cell_centered_box(self.ndim, self.cells(), self.lo, self.side).expect("validated raster")
    }

    fn shape(&self) -> [usize; 3] {
        let m = self.cells();
        [m, if self.ndim > 1 { m } else { 1 }, if self.ndim > 2 { m } else { 1 }]
    }

    fn flat(&self, c: &[usize; 3]) -> usize {
        let s = self.shape();
        (c[0] * s[1] + c[1]) * s[2] + c[2]
    }

    /// Exact squared distances from every lattice vertex to the obstacle, in cell units.
    fn vertex_distances(&self, region: Region) -> Vec<u64> {
        let m = self.cells();
        let vs = self.shape().map(|k| if k > 1 { k + 1 } else { 1 });
        let vflat = |v: &[usize; 3]| (v[0] * vs[1] + v[1]) * vs[2] + v[2];
        let mut f = vec![INF; vs[0] * vs[1] * vs[2]];
        let s = self.shape();
        for i in 0..s[0] {
            for j in 0..s[1] {
                for k in 0..s[2] {
                    let obstacle = match region {
                        Region::Inside => !self.inside[self.flat(&[i, j, k])],
                        Region::Outside => self.inside[self.flat(&[i, j, k])],
                    };
                    if obstacle {
                        for corner in 0..(1 << self.ndim) {
                            let v = [i + (corner & 1), j + ((corner >> 1) & 1), k + ((corner >> 2) & 1)];
                            f[vflat(&v)] = 0;
                        }
                    }
                }
            }
        }
        if region == Region::Inside {
            for (idx, val) in f.iter_mut().enumerate() {
                let v = [idx / (vs[1] * vs[2]), (idx / vs[2]) % vs[1], idx % vs[2]];
                if (0..self.ndim).any(|a| v[a] == 0 || v[a] == m) {
                    *val = 0;
                }
            }
        }
        for a in 0..self.ndim {
            let len = vs[a];
            let stride = [vs[1] * vs[2], vs[2], 1][a];
            let starts: Vec<usize> = (0..f.len()).filter(|&i| (i / stride) % len == 0).collect();
            let lines: Vec<Vec<i64>> = starts
                .par_iter()
                .map(|&s0| {
                    let mut line: Vec<i64> = (0..len).map(|t| f[s0 + t * stride]).collect();
                    edt_1d(&mut line);
                    line
                })
                .collect();
            for (s0, line) in starts.iter().zip(lines) {
                for (t, v) in line.into_iter().enumerate() {
                    f[s0 + t * stride] = v;
                }
            }
        }
        f.into_iter().map(|v| v as u64).collect()
    }
}

const INF: i64 = i64::MAX;

/// Squared distance transform of one line (Felzenszwalb and Huttenlocher) with exact
/// rational breakpoints.
fn edt_1d(f: &mut [i64]) {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    // breakpoint between v[k-1] and v[k] as num / den, den > 0
    let mut z: Vec<(i128, i128)> = Vec::with_capacity(n);
    for q in 0..n {
        if f[q] == INF {
            continue;
        }
        let fq = f[q] as i128 + (q * q) as i128;
        loop {
            let Some(&p) = v.last() else {
                v.push(q);
                z.push((0, 0));
                break;
            };
            let num = fq - (f[p] as i128 + (p * p) as i128);
            let den = 2 * (q as i128 - p as i128);
            let zl = *z.last().unwrap();
            if v.len() > 1 && num * zl.1 <= zl.0 * den {
                v.pop();
                z.pop();
                continue;
            }
            v.push(q);
            z.push((num, den));
            break;
        }
    }
    if v.is_empty() {
        return;
    }
    let src: Vec<i64> = v.iter().map(|&p| f[p]).collect();
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1].0 < q as i128 * z[k + 1].1 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        f[q] = src[k] + d * d;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WhitneyCube {
    pub level: u32,
    /// Position in units of the cube's own side, from the box corner.
    pub coords: [usize; 3],
    pub side: f64,
    /// Squared distance to the complement in raster cell units.
    pub dist2: u64,
    pub distance: f64,
}

impl WhitneyCube {
    fn interval(&self, a: usize) -> (f64, f64) {
        (self.coords[a] as f64 * self.side, (self.coords[a] + 1) as f64 * self.side)
    }

    /// Euclidean gap between two cubes of the same box.
    pub fn gap(&self, other: &WhitneyCube) -> f64 {
        (0..3)
            .map(|a| {
                let (alo, ahi) = self.interval(a);
                let (blo, bhi) = other.interval(a);
                (blo - ahi).max(alo - bhi).max(0.0).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Cell range `[start, end)` per axis at raster `level`.
    fn cell_range(&self, level: u32, ndim: usize) -> [(usize, usize); 3] {
        let s = 1usize << (level - self.level);
        let mut out = [(0, 1); 3];
        for (a, o) in out.iter_mut().enumerate().take(ndim) {
            *o = (self.coords[a] * s, (self.coords[a] + 1) * s);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    pub ndim: usize,
    pub region: Region,
    pub depth: u32,
    pub level: u32,
    pub lo: f64,
    pub box_side: f64,
    /// Sorted by level, then coordinates.
    pub cubes: Vec<WhitneyCube>,
    pub adjacency: Vec<Vec<usize>>,
    /// Owning cube of every raster cell, `None` on the uncovered part.
    pub owner: Vec<Option<usize>>,
    /// Raster cells of the decomposed set.
    pub members: Vec<bool>,
    vdist2: Vec<u64>,
}

/// Decomposes the raster set, cubes down to level `depth`.
pub fn whitney_decompose(raster: &Raster, depth: u32) -> Result<WhitneyDecomposition> {
    decompose(raster, Region::Inside, depth)
}

/// Decomposes the complement of the raster set inside the box.
pub fn whitney_decompose_complement(raster: &Raster, depth: u32) -> Result<WhitneyDecomposition> {
    decompose(raster, Region::Outside, depth)
}

fn decompose(raster: &Raster, region: Region, depth: u32) -> Result<WhitneyDecomposition> {
    let n = raster.ndim;
    if depth > raster.level {
        return Err(Error::Config(format!("depth {depth} exceeds the raster level {}", raster.level)));
    }
    let any_in = raster.inside.iter().any(|&b| b);
    let any_out = raster.inside.iter().any(|&b| !b);
    match region {
        Region::Inside if !any_in => return Err(Error::Empty("the set has no cells".into())),
        Region::Outside if !any_in => return Err(Error::Empty("the complement of an empty set has no boundary".into())),
        Region::Outside if !any_out => return Err(Error::Empty("the complement has no cells in the box".into())),
        _ => {}
    }
    let vdist2 = raster.vertex_distances(region);
    let shape = raster.shape();
    let vs = shape.map(|k| if k > 1 { k + 1 } else { 1 });
    let block_min = |k: u32, c: &[usize; 3]| -> u64 {
        let s = 1usize << (raster.level - k);
        let mut best = u64::MAX;
        let r = |a: usize| if a < n { c[a] * s..=(c[a] + 1) * s } else { 0..=0 };
        for i in r(0) {
            for j in r(1) {
                for l in r(2) {
                    best = best.min(vdist2[(i * vs[1] + j) * vs[2] + l]);
                    if best == 0 {
                        return 0;
                    }
                }
            }
        }
        best
    };
    let h = raster.cell_size();
    let mut cubes = Vec::new();
    let mut stack = vec![(0u32, [0usize; 3])];
    while let Some((k, c)) = stack.pop() {
        let s = 1u64 << (raster.level - k);
        let d2 = block_min(k, &c);
        if d2 >= n as u64 * s * s {
            cubes.push(WhitneyCube {
                level: k,
                coords: c,
                side: raster.side / (1u64 << k) as f64,
                dist2: d2,
                distance: (d2 as f64).sqrt() * h,
            });
        } else if k < depth {
            for child in 0..(1usize << n) {
                let mut cc = [0usize; 3];
                for a in 0..n {
                    cc[a] = 2 * c[a] + ((child >> a) & 1);
                }
                stack.push((k + 1, cc));
            }
        }
    }
    cubes.sort_by_key(|q| (q.level, q.coords));
    let mut owner = vec![None; raster.inside.len()];
    for (id, q) in cubes.iter().enumerate() {
        let rg = q.cell_range(raster.level, n);
        for i in rg[0].0..rg[0].1 {
            for j in rg[1].0..rg[1].1 {
                for l in rg[2].0..rg[2].1 {
                    owner[raster.flat(&[i, j, l])] = Some(id);
                }
            }
        }
    }
    let adjacency = cubes
        .par_iter()
        .enumerate()
        .map(|(id, q)| {
            let rg = q.cell_range(raster.level, n);
            let ext = |a: usize| -> (i64, i64) {
                if a < n {
                    (rg[a].0 as i64 - 1, rg[a].1 as i64 + 1)
                } else {
                    (0, 1)
                }
            };
            let (e0, e1, e2) = (ext(0), ext(1), ext(2));
            let mut nb = Vec::new();
            for i in e0.0..e0.1 {
                for j in e1.0..e1.1 {
                    for l in e2.0..e2.1 {
                        let v = [i, j, l];
                        let interior = (0..n).all(|a| v[a] >= rg[a].0 as i64 && v[a] < rg[a].1 as i64);
                        let in_box = (0..n).all(|a| v[a] >= 0 && v[a] < shape[a] as i64);
                        if interior || !in_box {
                            continue;
                        }
                        if let Some(o) = owner[raster.flat(&[i as usize, j as usize, l as usize])] {
                            if o != id {
                                nb.push(o);
                            }
                        }
                    }
                }
            }
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();
    Ok(WhitneyDecomposition {
        ndim: n,
        region,
        depth,
        level: raster.level,
        lo: raster.lo,
        box_side: raster.side,
        cubes,
        adjacency,
        owner,
        members: match region {
            Region::Inside => raster.inside.clone(),
            Region::Outside => raster.inside.iter().map(|b| !b).collect(),
        },
        vdist2,
    })
}

impl WhitneyDecomposition {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Cube counts per level `0..=depth`.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.depth as usize + 1];
        for q in &self.cubes {
            out[q.level as usize] += 1;
        }
        out
    }

    /// Exact check of `sqrt(n) <= d(Q)/l(Q) <= 4 sqrt(n)`.
    pub fn condition_distance(&self, q: &WhitneyCube) -> bool {
        let s = 1u64 << (self.level - q.level);
        let n = self.ndim as u64;
        q.dist2 >= n * s * s && q.dist2 <= 16 * n * s * s
    }

    /// Exact check of `1/4 <= l(Q_k)/l(Q_j) <= 4` for touching cubes.
    pub fn condition_neighbors(&self, j: usize) -> bool {
        self.adjacency[j].iter().all(|&k| self.cubes[j].level.abs_diff(self.cubes[k].level) <= 2)
    }

    /// Every cube and every touching pair satisfy the Whitney conditions.
    pub fn violations(&self) -> (usize, usize) {
        let d = self.cubes.iter().filter(|q| !self.condition_distance(q)).count();
        let a = (0..self.len()).filter(|&j| !self.condition_neighbors(j)).count();
        (d, a)
    }

    /// Squared distance of a raster cell to the obstacle, in cell units.
    pub fn cell_dist2(&self, flat: usize) -> u64 {
        let m = 1usize << self.level;
        let s = [m, if self.ndim > 1 { m } else { 1 }, if self.ndim > 2 { m } else { 1 }];
        let c = [flat / (s[1] * s[2]), (flat / s[2]) % s[1], flat % s[2]];
        let vs = s.map(|k| if k > 1 { k + 1 } else { 1 });
        let mut best = u64::MAX;
        for corner in 0..(1usize << self.ndim) {
            let v = [c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1)];
            best = best.min(self.vdist2[(v[0] * vs[1] + v[1]) * vs[2] + v[2]]);
        }
        best
    }

    /// The largest cube, ties to the first in sorted order.
    pub fn largest(&self) -> Option<usize> {
        (!self.cubes.is_empty()).then_some(0)
    }

    /// Writes `level,i,j,k,side,distance` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["level", "i", "j", "k", "side", "distance"]).map_err(csv_err)?;
        for q in &self.cubes {
            wr.write_record([
                q.level.to_string(),
                q.coords[0].to_string(),
                q.coords[1].to_string(),
                q.coords[2].to_string(),
                format!("{:e}", q.side),
                format!("{:e}", q.distance),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Breadth-first chain lengths from cube `j` to every cube.
pub fn chain_distances_from(w: &WhitneyDecomposition, j: usize) -> Vec<usize> {
    let mut dist = vec![DISCONNECTED; w.len()];
    let mut queue = VecDeque::new();
    dist[j] = 0;
    queue.push_back(j);
    while let Some(a) = queue.pop_front() {
        for &b in &w.adjacency[a] {
            if dist[b] == DISCONNECTED {
                dist[b] = dist[a] + 1;
                queue.push_back(b);
            }
        }
    }
    dist
}

/// Length of the shortest chain of touching cubes, `DISCONNECTED` across components.
pub fn chain_distance(w: &WhitneyDecomposition, j: usize, k: usize) -> usize {
    chain_distances_from(w, j)[k]
}

/// `|log(l_j/l_k)| + log(gap/(l_j + l_k) + 1)`.
pub fn log_distance(a: &WhitneyCube, b: &WhitneyCube) -> f64 {
    (a.side / b.side).ln().abs() + (a.gap(b) / (a.side + b.side) + 1.0).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct KStar {
    pub value: f64,
    pub pair: (usize, usize),
    pub d1: usize,
    pub d2: f64,
    pub pairs: usize,
    pub disconnected: usize,
}

/// `max d1 / max(d2, log 2)` over all targets of `samples` seeded source cubes
/// (every cube when `samples >= len`).
pub fn estimate_kstar(w: &WhitneyDecomposition, samples: usize, seed: u64) -> Result<KStar> {
    if w.is_empty() {
        return Err(Error::Empty("no cubes".into()));
    }
    let sources: Vec<usize> = if samples >= w.len() {
        (0..w.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sample(&mut rng, w.len(), samples).into_vec();
        s.sort_unstable();
        s
    };
    let floor = std::f64::consts::LN_2;
    struct Best {
        ratio: f64,
        source: usize,
        target: usize,
        d1: usize,
        d2: f64,
        pairs: usize,
        disconnected: usize,
    }
    let per: Vec<Best> = sources
        .par_iter()
        .map(|&s| {
            let dist = chain_distances_from(w, s);
            let mut best = Best { ratio: 0.0, source: s, target: s, d1: 0, d2: 0.0, pairs: 0, disconnected: 0 };
            for (t, &d1) in dist.iter().enumerate() {
                if t == s {
                    continue;
                }
                if d1 == DISCONNECTED {
                    best.disconnected += 1;
                    continue;
                }
                best.pairs += 1;
                let d2 = log_distance(&w.cubes[s], &w.cubes[t]);
                let ratio = d1 as f64 / d2.max(floor);
                if ratio > best.ratio {
                    (best.ratio, best.target, best.d1, best.d2) = (ratio, t, d1, d2);
                }
            }
            best
        })
        .collect();
    let mut out = KStar { value: 0.0, pair: (sources[0], sources[0]), d1: 0, d2: 0.0, pairs: 0, disconnected: 0 };
    for b in per {
        out.pairs += b.pairs;
        out.disconnected += b.disconnected;
        if b.ratio > out.value {
            out.value = b.ratio;
            out.pair = (b.source, b.target);
            out.d1 = b.d1;
            out.d2 = b.d2;
        }
    }
    Ok(out)
}

/// Where an exterior cube takes its value from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CubeMatch {
    /// Nearest interior cube at least as large.
    Nearest(usize),
    /// Larger than every interior cube: the largest one.
    Largest(usize),
    /// Larger than the `delta` threshold.
    Zero,
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub extended: ScalarField,
    pub h_star: ScalarField,
    pub matches: Vec<CubeMatch>,
    pub delta: f64,
    pub k_delta: i32,
    /// `2^{-k_delta}`: cubes strictly larger form the big-cube part.
    pub threshold: f64,
    /// Exterior cubes assigned to each interior cube by the nearest rule.
    pub n_prime: Vec<usize>,
    pub n_prime_max: usize,
    /// `(2^n + 1) 67^n K*^{2n}`.
    pub n_prime_bound: f64,
    pub kstar: f64,
    pub h_star_sup: f64,
    pub h_star_lr: f64,
    pub g_lr: f64,
    /// Uncovered exterior cells given a value.
    pub collar_cells: usize,
    pub warnings: Vec<String>,
}

/// Smallest integer `k` with `2^{-k} < delta / (5 sqrt(n))`.
pub fn k_delta(delta: f64, n: usize) -> i32 {
    let target = delta / (5.0 * (n as f64).sqrt());
    let mut k = (-target.log2()).floor() as i32 - 1;
    while 2f64.powi(-k) >= target {
        k += 1;
    }
    k
}

/// Jones extension of `g` from the raster set `w` into the box, zero beyond `D_delta`.
pub fn jones_extend(
    g: &ScalarField,
    r: f64,
    delta: f64,
    w: &WhitneyDecomposition,
    wc: &WhitneyDecomposition,
    kstar: f64,
    kstar_cap: f64,
) -> Result<ExtensionResult> {
    if w.region != Region::Inside || wc.region != Region::Outside {
        return Err(Error::Config("pass the decomposition of the set, then of its complement".into()));
    }
    if w.level != wc.level || w.ndim != wc.ndim || w.lo != wc.lo || w.box_side != wc.box_side {
        return Err(Error::Config("decompositions come from different rasters".into()));
    }
    let grid = g.grid();
    let m = 1usize << w.level;
    let h = w.box_side / m as f64;
    let expect = Grid::cell_centered_box(w.ndim, m, w.lo, w.box_side)?;
    if grid != &expect {
        return Err(Error::Config("field grid does not match the raster".into()));
    }
    if !(r >= 1.0) || !(delta > 0.0) {
        return Err(Error::Config(format!("need r >= 1 and delta > 0, got {r}, {delta}")));
    }
    if w.is_empty() {
        return Err(Error::Empty("the set has no Whitney cubes at this depth".into()));
    }
    let n = w.ndim;
    let mut warnings = Vec::new();
    if !(kstar <= kstar_cap) {
        warnings.push(format!("K* = {kstar} exceeds the cap {kstar_cap}; the extension bound degrades"));
    }
    let in_set = &w.members;
    let gv = g.values();
    let k_d = k_delta(delta, n);
    let threshold = 2f64.powi(-k_d);
    let cells_of = |q: &WhitneyCube| -> Vec<usize> {
        let rg = q.cell_range(w.level, n);
        let mut out = Vec::new();
        for i in rg[0].0..rg[0].1 {
            for j in rg[1].0..rg[1].1 {
                for l in rg[2].0..rg[2].1 {
                    let idx = [i, j, l];
                    out.push(grid.flat(&idx));
                }
            }
        }
        out
    };
    let cube_cells: Vec<Vec<usize>> = w.cubes.par_iter().map(cells_of).collect();
    let mut hs = vec![0.0; grid.len()];
    for (q, cells) in w.cubes.iter().zip(&cube_cells) {
        if q.side > threshold {
            let avg = cells.iter().map(|&i| gv[i]).sum::<f64>() / cells.len() as f64;
            for &i in cells {
                hs[i] = avg;
            }
        }
    }
    let gstar_avg: Vec<f64> =
        cube_cells.iter().map(|cells| cells.iter().map(|&i| gv[i] - hs[i]).sum::<f64>() / cells.len() as f64).collect();

    let nearest = |side: f64, lo: [usize; 3], hi: [usize; 3]| -> Option<usize> {
        // exact integer gap in cell units between cell ranges
        let mut best: Option<(u64, usize)> = None;
        for (id, q) in w.cubes.iter().enumerate() {
            if q.side < side {
                continue;
            }
            let rg = q.cell_range(w.level, n);
            let mut d2 = 0u64;
            for a in 0..n {
                let gap = (rg[a].0 as i64 - hi[a] as i64).max(lo[a] as i64 - rg[a].1 as i64).max(0) as u64;
                d2 += gap * gap;
            }
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, id));
            }
        }
        best.map(|(_, id)| id)
    };
    let largest = w.largest().unwrap();
    let l0 = w.cubes[largest].side;
    let matches: Vec<CubeMatch> = wc
        .cubes
        .par_iter()
        .map(|q| {
            if q.side > threshold {
                CubeMatch::Zero
            } else if q.side > l0 {
                CubeMatch::Largest(largest)
            } else {
                let rg = q.cell_range(w.level, n);
                let lo = [rg[0].0, rg[1].0, rg[2].0];
                let hi = [rg[0].1, rg[1].1, rg[2].1];
                nearest(q.side, lo, hi).map_or(CubeMatch::Zero, CubeMatch::Nearest)
            }
        })
        .collect();
    let mut ext = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if in_set[i] {
            ext[i] = gv[i];
        }
    }
    let mut n_prime = vec![0usize; w.len()];
    for (q, mt) in wc.cubes.iter().zip(&matches) {
        let v = match *mt {
            CubeMatch::Nearest(j) => {
                n_prime[j] += 1;
                gstar_avg[j]
            }
            CubeMatch::Largest(j) => gstar_avg[j],
            CubeMatch::Zero => 0.0,
        };
        for i in cells_of(q) {
            ext[i] = v;
        }
    }
    // uncovered exterior cells act as finest-level cubes
    let diam = (n as f64).sqrt();
    let collar: Vec<usize> = (0..grid.len()).filter(|&i| !in_set[i] && wc.owner[i].is_none()).collect();
    let collar_vals: Vec<(usize, f64)> = collar
        .par_iter()
        .map(|&i| {
            let dist = (wc.cell_dist2(i) as f64).sqrt();
            if (dist + diam) * h > delta {
                return (i, 0.0);
            }
            let c = grid.multi(i);
            let hi = [c[0] + 1, c[1] + 1, c[2] + 1];
            (i, nearest(h, c, hi).map_or(0.0, |j| gstar_avg[j]))
        })
        .collect();
    for &(i, v) in &collar_vals {
        ext[i] = v;
    }
    let vol = grid.cell_volume();
    let lr = |vals: &[f64], mask: &[bool]| -> f64 {
        (vals.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.abs().powf(r)).sum::<f64>() * vol).powf(1.0 / r)
    };
    let h_star_sup = hs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let h_star_lr = lr(&hs, &vec![true; hs.len()]);
    let g_lr = lr(gv, in_set);
    let n_prime_max = n_prime.iter().copied().max().unwrap_or(0);
    let n_prime_bound = (2f64.powi(n as i32) + 1.0) * 67f64.powi(n as i32) * kstar.powi(2 * n as i32);
    Ok(ExtensionResult {
        extended: ScalarField::new(grid.clone(), ext)?,
        h_star: ScalarField::new(grid.clone(), hs)?,
        matches,
        delta,
        k_delta: k_d,
        threshold,
        n_prime,
        n_prime_max,
        n_prime_bound,
        kstar,
        h_star_sup,
        h_star_lr,
        g_lr,
        collar_cells: collar_vals.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::synth_field;

    fn ball2(level: u32) -> Raster {
        Raster::from_fn(2, level, -1.0, 2.0, |p| p[0] * p[0] + p[1] * p[1] < 0.36).unwrap()
    }

    fn l_shape(level: u32) -> Raster {
        Raster::from_fn(2, level, 0.0, 1.0, |p| {
            (0.1..0.9).contains(&p[0]) && (0.1..0.9).contains(&p[1]) && !(p[0] > 0.5 && p[1] > 0.5)
        })
        .unwrap()
    }

    fn corridor(level: u32, width: f64) -> Raster {
        Raster::from_fn(2, level, 0.0, 1.0, move |p| {
            let left = (0.05..0.35).contains(&p[0]) && (0.35..0.65).contains(&p[1]);
            let right = (0.65..0.95).contains(&p[0]) && (0.35..0.65).contains(&p[1]);
            let bar = (0.3..0.7).contains(&p[0]) && (p[1] - 0.5).abs() < 0.5 * width;
            left || right || bar
        })
        .unwrap()
    }

    #[test]
    fn vertex_distances_match_brute_force() {
        let r = Raster::from_fn(2, 4, 0.0, 1.0, |p| ((p[0] * 7.3).sin() + (p[1] * 5.1).cos()) > 0.3).unwrap();
        for region in [Region::Inside, Region::Outside] {
            let d = r.vertex_distances(region);
            let mut obstacle = Vec::new();
            for i in 0..16 {
                for j in 0..16 {
                    let inside = r.inside[i * 16 + j];
                    if (region == Region::Inside) != inside {
                        obstacle.push((i as i64, j as i64));
                    }
                }
            }
            for vi in 0..17i64 {
                for vj in 0..17i64 {
                    let mut best = i64::MAX;
                    for &(ci, cj) in &obstacle {
                        let gi = (ci - vi).max(vi - ci - 1).max(0);
                        let gj = (cj - vj).max(vj - cj - 1).max(0);
                        best = best.min(gi * gi + gj * gj);
                    }
                    if region == Region::Inside {
                        for b in [vi, 16 - vi, vj, 16 - vj] {
                            best = best.min(b * b);
                        }
                    }
                    assert_eq!(d[(vi * 17 + vj) as usize] as i64, best, "{region:?} {vi} {vj}");
                }
            }
        }
    }

    /// Level-by-level enumeration with the analytic distance to the complement of the unit cube.
    fn unit_cube_oracle(n: usize, depth: u32) -> Vec<usize> {
        let dist = |k: u32, c: &[usize]| -> f64 {
            let l = 0.5f64.powi(k as i32);
            c.iter().map(|&i| (i as f64 * l).min(1.0 - (i + 1) as f64 * l)).fold(f64::INFINITY, f64::min)
        };
        let accepted = |k: u32, c: &[usize]| {
            let l = 0.5f64.powi(k as i32);
            let d = dist(k, c);
            d * d >= n as f64 * l * l
        };
        let mut counts = vec![0; depth as usize + 1];
        for k in 0..=depth {
            let m = 1usize << k;
            for flat in 0..m.pow(n as u32) {
                let c: Vec<usize> = (0..n).map(|a| (flat / m.pow(a as u32)) % m).collect();
                let ancestor_ok = (0..k).any(|j| {
                    let pc: Vec<usize> = c.iter().map(|&i| i >> (k - j)).collect();
                    accepted(j, &pc)
                });
                if accepted(k, &c) && !ancestor_ok {
                    counts[k as usize] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn unit_cube_levels_match_enumeration() {
        for (n, depth) in [(2, 6), (3, 4)] {
            let r = Raster::from_fn(n, depth, 0.0, 1.0, |_| true).unwrap();
            let w = whitney_decompose(&r, depth).unwrap();
            assert_eq!(w.level_counts(), unit_cube_oracle(n, depth), "n = {n}");
        }
    }

    #[test]
    fn conditions_hold_on_test_sets() {
        let annulus =
            Raster::from_fn(2, 7, -1.0, 2.0, |p| (0.09..0.64).contains(&(p[0] * p[0] + p[1] * p[1]))).unwrap();
        for r in [ball2(7), l_shape(7), annulus, corridor(7, 0.1)] {
            for w in [whitney_decompose(&r, 7).unwrap(), whitney_decompose_complement(&r, 7).unwrap()] {
                assert!(w.len() > 10);
                assert_eq!(w.violations(), (0, 0));
                for (i, q) in w.cubes.iter().enumerate() {
                    let s = 1usize << (w.level - q.level);
                    for a in 0..2 {
                        for b in 0..s {
                            let mut c = [q.coords[0] * s, q.coords[1] * s, 0];
                            c[a] += b;
                            c[1 - a] += s / 2;
                            assert_eq!(w.owner[c[0] * 128 + c[1]], Some(i));
                            assert!(w.members[c[0] * 128 + c[1]]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_set_is_refused() {
        let r = Raster::from_fn(2, 3, 0.0, 1.0, |_| false).unwrap();
        assert!(matches!(whitney_decompose(&r, 3), Err(Error::Empty(_))));
        assert!(whitney_decompose_complement(&r, 3).is_err());
        assert!(whitney_decompose(&ball2(3), 4).is_err());
    }

    fn touching(a: &WhitneyCube, b: &WhitneyCube) -> bool {
        (0..2).all(|ax| {
            let (alo, ahi) = a.interval(ax);
            let (blo, bhi) = b.interval(ax);
            alo <= bhi && blo <= ahi
        })
    }

    #[test]
    fn chain_distance_matches_exhaustive_search() {
        let w = whitney_decompose(&l_shape(5), 5).unwrap();
        let m = w.len();
        let mut d = vec![vec![DISCONNECTED; m]; m];
        for i in 0..m {
            d[i][i] = 0;
            for j in 0..m {
                if i != j && touching(&w.cubes[i], &w.cubes[j]) {
                    d[i][j] = 1;
                    assert!(w.adjacency[i].contains(&j));
                }
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    if d[i][k] != DISCONNECTED && d[k][j] != DISCONNECTED {
                        d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let i = rand::Rng::gen_range(&mut rng, 0..m);
            let j = rand::Rng::gen_range(&mut rng, 0..m);
            assert_eq!(chain_distance(&w, i, j), d[i][j]);
        }
        assert_eq!(chain_distance(&w, 4, 4), 0);
        let nb = w.adjacency[4][0];
        assert_eq!(chain_distance(&w, 4, nb), 1);
    }

    #[test]
    fn log_distance_examples() {
        let q = |level, coords| WhitneyCube { level, coords, side: 0.5f64.powi(level as i32), dist2: 0, distance: 0.0 };
        assert_eq!(log_distance(&q(3, [1, 2, 0]), &q(3, [1, 2, 0])), 0.0);
        assert_eq!(log_distance(&q(3, [1, 2, 0]), &q(3, [2, 2, 0])), 0.0);
        let d = log_distance(&q(3, [4, 0, 0]), &q(5, [15, 0, 0]));
        assert!((d - 4f64.ln()).abs() < 1e-15);
        assert_eq!(d, log_distance(&q(5, [15, 0, 0]), &q(3, [4, 0, 0])));
    }

    #[test]
    fn log_distance_bounded_by_chain_distance() {
        let w = whitney_decompose(&corridor(6, 0.1), 6).unwrap();
        for s in [0, w.len() / 3, w.len() - 1] {
            let d1 = chain_distances_from(&w, s);
            for t in 0..w.len() {
                let d2 = log_distance(&w.cubes[s], &w.cubes[t]);
                assert!(d2 <= d1[t] as f64 * (4f64.ln() + 2f64.ln()) + 2f64.ln());
            }
        }
    }

    #[test]
    fn kstar_stable_on_ball() {
        let k5 = estimate_kstar(&whitney_decompose(&ball2(5), 5).unwrap(), usize::MAX, 0).unwrap();
        let k6 = estimate_kstar(&whitney_decompose(&ball2(6), 6).unwrap(), usize::MAX, 0).unwrap();
        assert!(k5.value.is_finite() && k5.disconnected == 0);
        assert!((k6.value / k5.value - 1.0).abs() < 0.2, "{} vs {}", k5.value, k6.value);
    }

    #[test]
    fn kstar_grows_as_corridor_narrows() {
        let ks: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&wd| estimate_kstar(&whitney_decompose(&corridor(7, wd), 7).unwrap(), 64, 1).unwrap().value)
            .collect();
        assert!(ks[0] < ks[1] && ks[1] < ks[2], "{ks:?}");
    }

    #[test]
    fn kstar_single_cube() {
        let r = Raster::from_fn(2, 5, 0.0, 1.0, |p| (0.25..0.75).contains(&p[0]) && (0.25..0.75).contains(&p[1])).unwrap();
        let k = estimate_kstar(&whitney_decompose(&r, 5).unwrap(), usize::MAX, 0).unwrap();
        assert!(k.value.is_finite() && k.value > 0.0);
    }

    #[test]
    fn k_delta_definition() {
        for (delta, n) in [(0.1, 2), (0.3, 3), (1.0, 2)] {
            let k = k_delta(delta, n);
            let t = delta / (5.0 * (n as f64).sqrt());
            assert!(2f64.powi(-k) < t && 2f64.powi(-k + 1) >= t);
        }
    }

    fn extend(g: &ScalarField, r: &Raster, delta: f64) -> ExtensionResult {
        let w = whitney_decompose(r, r.level()).unwrap();
        let wc = whitney_decompose_complement(r, r.level()).unwrap();
        jones_extend(g, 2.0, delta, &w, &wc, 3.0, 64.0).unwrap()
    }

    #[test]
    fn restriction_and_support() {
        let r = ball2(6);
        let grid = r.grid();
        let g = synth_field(&grid, 1.0, 5);
        let delta = 0.5;
        let e = extend(&g, &r, delta);
        let h = r.cell_size();
        let inside: Vec<usize> = (0..grid.len()).filter(|&i| r.inside()[i]).collect();
        for i in 0..grid.len() {
            let v = e.extended.values()[i];
            if r.inside()[i] {
                assert_eq!(v.to_bits(), g.values()[i].to_bits());
            } else if v != 0.0 {
                let c = grid.multi(i);
                let near = inside
                    .iter()
                    .map(|&j| {
                        let d = grid.multi(j);
                        (0..2)
                            .map(|a| ((c[a] as f64 - d[a] as f64).abs() - 1.0).max(0.0).powi(2))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                assert!((near + 2f64.sqrt()) * h <= delta, "cell {i} at {near}");
            }
        }
        assert!(e.h_star_lr <= e.g_lr * (1.0 + 1e-12));
        assert!(e.n_prime_max as f64 <= e.n_prime_bound);
        assert!(e.n_prime_max > 0 && e.warnings.is_empty());
    }

    #[test]
    fn constant_extends_by_itself_on_small_cubes() {
        let r = ball2(6);
        let c = 2.5;
        let g = ScalarField::constant(&r.grid(), c);
        let e = extend(&g, &r, 0.5);
        let wc = whitney_decompose_complement(&r, 6).unwrap();
        let w = whitney_decompose(&r, 6).unwrap();
        let mut small = 0;
        for (q, m) in wc.cubes.iter().zip(&e.matches) {
            let i = {
                let s = 1usize << (6 - q.level);
                (q.coords[0] * s) * 64 + q.coords[1] * s
            };
            match *m {
                CubeMatch::Nearest(j) if w.cubes[j].side <= e.threshold => {
                    small += 1;
                    assert!((e.extended.values()[i] - c).abs() < 1e-12)
                }
                CubeMatch::Zero => assert_eq!(e.extended.values()[i], 0.0),
                _ => assert!(e.extended.values()[i].abs() < 1e-12),
            }
        }
        assert!(small > 20);
    }

    #[test]
    fn kstar_above_cap_warns() {
        let r = ball2(5);
        let g = ScalarField::constant(&r.grid(), 1.0);
        let w = whitney_decompose(&r, 5).unwrap();
        let wc = whitney_decompose_complement(&r, 5).unwrap();
        let e = jones_extend(&g, 2.0, 0.2, &w, &wc, 100.0, 64.0).unwrap();
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn csv_has_one_row_per_cube() {
        let w = whitney_decompose(&ball2(5), 5).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), w.len() + 1);
    }
}
