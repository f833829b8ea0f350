//! Newest vertex bisection (Maubach's tagged variant) with conforming closure.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{dist, midpoint, Point};
use crate::mesh::{simplex_gamma, Triangulation};

const MAX_CLOSURE_ROUNDS: usize = 256;

struct Work {
    dim: usize,
    coords: Vec<Point>,
    order: Vec<[usize; 4]>,
    tag: Vec<u8>,
    mids: HashMap<(usize, usize), usize>,
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Children of a tagged simplex `(x0..xn)` with tag `d`: the edge `x0–xd` is
/// halved at `z`, giving `(x0..x_{d-1}, z, x_{d+1}..xn)` and
/// `(x1..xd, z, x_{d+1}..xn)`, both with tag `d - 1` (or `n` when `d = 1`).
pub(crate) fn children(o: &[usize; 4], d: usize, n: usize, z: usize) -> ([usize; 4], [usize; 4], u8) {
    let mut c1 = *o;
    c1[d] = z;
    let mut c2 = [usize::MAX; 4];
    c2[..d].copy_from_slice(&o[1..=d]);
    c2[d] = z;
    c2[d + 1..=n].copy_from_slice(&o[d + 1..=n]);
    let t = if d > 1 { d - 1 } else { n };
    (c1, c2, t as u8)
}

impl Work {
    fn bisect(&mut self, e: usize) {
        let n = self.dim;
        let o = self.order[e];
        let d = self.tag[e] as usize;
        let key = edge(o[0], o[d]);
        let z = match self.mids.get(&key) {
            Some(&z) => z,
            None => {
                let z = self.coords.len();
                self.coords.push(midpoint(&self.coords[o[0]], &self.coords[o[d]]));
                self.mids.insert(key, z);
                z
            }
        };
        let (c1, c2, t) = children(&o, d, n, z);
        self.order[e] = c1;
        self.tag[e] = t;
        self.order.push(c2);
        self.tag.push(t);
    }

    fn has_split_edge(&self, e: usize) -> bool {
        let o = &self.order[e];
        for i in 0..=self.dim {
            for j in i + 1..=self.dim {
                if self.mids.contains_key(&edge(o[i], o[j])) {
                    return true;
                }
            }
        }
        false
    }
}

/// Bisect every marked element at least once and restore conformity.
pub fn bisect(mesh: &Triangulation, marked: &[usize]) -> Result<Triangulation> {
    if let Some(&t) = marked.iter().find(|&&t| t >= mesh.num_cells()) {
        return Err(Error::InvalidOperand(format!("marked element {t} does not exist")));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let n = mesh.dim();
    let mut w = Work {
        dim: n,
        coords: mesh.coords().to_vec(),
        order: Vec::with_capacity(2 * mesh.num_cells()),
        tag: Vec::with_capacity(2 * mesh.num_cells()),
        mids: HashMap::new(),
    };
    for t in 0..mesh.num_cells() {
        let (o, d) = mesh.refine_state(t);
        w.order.push(o);
        w.tag.push(d);
    }
    let mut uniq: Vec<usize> = marked.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    for t in uniq {
        w.bisect(t);
    }
    let mut rounds = 0;
    loop {
        let pending: Vec<usize> = (0..w.order.len()).filter(|&e| w.has_split_edge(e)).collect();
        if pending.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > MAX_CLOSURE_ROUNDS {
            return Err(Error::Refinement { elements: pending });
        }
        for e in pending {
            w.bisect(e);
        }
    }
    Triangulation::from_refinement(n, w.coords, w.order, w.tag)
}

/// Uniform refinement by `rounds` bisections of every element.
pub fn bisect_uniform(mesh: &Triangulation, rounds: usize) -> Result<Triangulation> {
    let mut m = mesh.clone();
    for _ in 0..rounds {
        let all: Vec<usize> = (0..m.num_cells()).collect();
        m = bisect(&m, &all)?;
    }
    Ok(m)
}

/// Shape-regularity parameters `Γ_T` of all similarity classes reachable by
/// repeated bisection of one tagged seed simplex.
///
/// Classes are identified by the scaled edge-length vector in vertex order and
/// the tag, which determine every descendant up to similarity.
pub fn nvb_similarity_classes(seed: &[Point], dim: usize, tag: usize) -> Result<Vec<f64>> {
    let mut coords: Vec<Point> = seed[..=dim].to_vec();
    let mut root = [usize::MAX; 4];
    for k in 0..=dim {
        root[k] = k;
    }
    let key_of = |coords: &[Point], o: &[usize; 4], t: u8| -> Vec<i64> {
        let mut l = Vec::new();
        for i in 0..=dim {
            for j in i + 1..=dim {
                l.push(dist(&coords[o[i]], &coords[o[j]]));
            }
        }
        let m = l.iter().cloned().fold(0.0, f64::max);
        let mut k: Vec<i64> = l.iter().map(|x| (x / m * 1e9).round() as i64).collect();
        k.push(t as i64);
        k
    };
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut gammas = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(key_of(&coords, &root, tag as u8));
    queue.push_back((root, tag as u8));
    while let Some((o, t)) = queue.pop_front() {
        let pts: Vec<Point> = (0..=dim).map(|k| coords[o[k]]).collect();
        gammas.push(simplex_gamma(&pts, dim)?);
        if seen.len() > 100_000 {
            return Err(Error::Refinement { elements: vec![] });
        }
        let d = t as usize;
        let z = coords.len();
        coords.push(midpoint(&coords[o[0]], &coords[o[d]]));
        let (c1, c2, nt) = children(&o, d, dim, z);
        for c in [c1, c2] {
            let k = key_of(&coords, &c, nt);
            if seen.insert(k) {
                queue.push_back((c, nt));
            }
        }
    }
    Ok(gammas)
}
