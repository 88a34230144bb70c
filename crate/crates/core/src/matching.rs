//! Perfect pairings of `{0..n}` for M-stages: exact maximum-weight matching
//! (Edmonds' blossom method, primal-dual, `O(n³)`) and a greedy alternative.

use crate::error::{contract, Result};

/// Symmetric pair benefits `w_ij` with an optional variant tag per pair.
#[derive(Clone, Debug)]
pub struct PairWeights {
    n: usize,
    w: Vec<f64>,
    tags: Vec<u8>,
}

impl PairWeights {
    /// Builds the table from `f(i, j) -> (weight, tag)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> (f64, u8)) -> Self {
        let mut w = vec![0.0; n * n];
        let mut tags = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let (wt, tag) = f(i, j);
                w[i * n + j] = wt;
                w[j * n + i] = wt;
                tags[i * n + j] = tag;
                tags[j * n + i] = tag;
            }
        }
        Self { n, w, tags }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[inline]
    pub fn tag(&self, i: usize, j: usize) -> u8 {
        self.tags[i * self.n + j]
    }

    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| self.weight(i, j)).sum()
    }

    fn check(&self) -> Result<()> {
        if self.n % 2 == 1 {
            return Err(contract(format!("perfect matching needs even n, got {}", self.n)));
        }
        if self.w.iter().any(|w| !w.is_finite()) {
            return Err(contract("pair weights must be finite"));
        }
        Ok(())
    }
}

/// Integer range the weights are scaled into before solving.
const WEIGHT_SCALE: f64 = (1u64 << 36) as f64;

/// Perfect matching of maximum total weight; pairs sorted by first index.
pub fn exact_matching(weights: &PairWeights) -> Result<Vec<(usize, usize)>> {
    weights.check()?;
    let n = weights.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    // every perfect matching has n/2 edges, so a constant shift keeps the optimum
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            lo = lo.min(weights.weight(i, j));
            hi = hi.max(weights.weight(i, j));
        }
    }
    let span = hi - lo;
    let k = if span > 0.0 { WEIGHT_SCALE / span } else { 0.0 };
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, ((weights.weight(i, j) - lo) * k).round() as i64));
        }
    }
    let mate = Blossom::new(n, edges).solve();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .filter_map(|v| {
            let m = mate[v];
            (m > v as isize).then_some((v, m as usize))
        })
        .collect();
    pairs.sort_unstable();
    if pairs.len() * 2 != n {
        return Err(contract("matching solver returned an imperfect matching"));
    }
    Ok(pairs)
}

/// Repeatedly takes the heaviest pair among unused indices (ties: smallest `(i, j)`).
pub fn greedy_matching(weights: &PairWeights) -> Result<Vec<(usize, usize)>> {
    weights.check()?;
    let n = weights.n;
    let mut cand: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    cand.sort_by(|a, b| {
        weights
            .weight(b.0, b.1)
            .total_cmp(&weights.weight(a.0, a.1))
            .then(a.cmp(b))
    });
    let mut used = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for (i, j) in cand {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// State of the primal-dual blossom algorithm on a general graph.
///
/// Endpoint `p` of edge `k = p / 2` is `edges[k].0` for even `p` and
/// `edges[k].1` for odd `p`. Labels: 0 free, 1 outer (S), 2 inner (T).
struct Blossom {
    nv: usize,
    edges: Vec<(usize, usize, i64)>,
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<isize>,
    label: Vec<u8>,
    labelend: Vec<isize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<isize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<isize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<isize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

impl Blossom {
    fn new(nv: usize, edges: Vec<(usize, usize, i64)>) -> Self {
        let ne = edges.len();
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        let endpoint = (0..2 * ne)
            .map(|p| if p % 2 == 0 { edges[p / 2].0 } else { edges[p / 2].1 })
            .collect();
        let mut neighbend = vec![Vec::new(); nv];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        let mut dualvar = vec![maxweight; nv];
        dualvar.extend(std::iter::repeat(0).take(nv));
        Self {
            nv,
            endpoint,
            neighbend,
            mate: vec![-1; nv],
            label: vec![0; 2 * nv],
            labelend: vec![-1; 2 * nv],
            inblossom: (0..nv).collect(),
            blossomparent: vec![-1; 2 * nv],
            blossomchilds: vec![Vec::new(); 2 * nv],
            blossombase: (0..nv as isize).chain(std::iter::repeat(-1).take(nv)).collect(),
            blossomendps: vec![Vec::new(); 2 * nv],
            bestedge: vec![-1; 2 * nv],
            blossombestedges: vec![None; 2 * nv],
            unusedblossoms: (nv..2 * nv).collect(),
            dualvar,
            allowedge: vec![false; ne],
            queue: Vec::new(),
            edges,
        }
    }

    fn slack(&self, k: usize) -> i64 {
        let (i, j, w) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * w
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![b];
        while let Some(t) = stack.pop() {
            if t < self.nv {
                out.push(t);
            } else {
                stack.extend(self.blossomchilds[t].iter().rev());
            }
        }
        out
    }

    fn assign_label(&mut self, w: usize, t: u8, p: isize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == 0 && self.label[b] == 0);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = -1;
        self.bestedge[b] = -1;
        if t == 1 {
            let leaves = self.leaves(b);
            self.queue.extend(leaves);
        } else if t == 2 {
            let base = self.blossombase[b] as usize;
            let mb = self.mate[base];
            debug_assert!(mb >= 0);
            self.assign_label(self.endpoint[mb as usize], 1, mb ^ 1);
        }
    }

    /// Walks up from `v` and `w`; returns the base of a new blossom or -1 for
    /// an augmenting path.
    fn scan_blossom(&mut self, v: usize, w: usize) -> isize {
        let mut path = Vec::new();
        let mut base = -1;
        let (mut v, mut w) = (v as isize, w as isize);
        while v != -1 || w != -1 {
            let mut b = self.inblossom[v as usize];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == -1 {
                v = -1;
            } else {
                v = self.endpoint[self.labelend[b] as usize] as isize;
                b = self.inblossom[v as usize];
                debug_assert_eq!(self.label[b], 2);
                v = self.endpoint[self.labelend[b] as usize] as isize;
            }
            if w != -1 {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (v, w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom slots available");
        self.blossombase[b] = base as isize;
        self.blossomparent[b] = -1;
        self.blossomparent[bb] = b as isize;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b as isize;
            path.push(bv);
            endps.push(self.labelend[bv] as usize);
            let nv = self.endpoint[self.labelend[bv] as usize];
            bv = self.inblossom[nv];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b as isize;
            path.push(bw);
            endps.push((self.labelend[bw] ^ 1) as usize);
            let nw = self.endpoint[self.labelend[bw] as usize];
            bw = self.inblossom[nw];
        }
        debug_assert_eq!(self.label[bb], 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;
        for leaf in self.leaves_of_path(&path) {
            if self.label[self.inblossom[leaf]] == 2 {
                self.queue.push(leaf);
            }
            self.inblossom[leaf] = b;
        }
        let mut bestedgeto = vec![-1isize; 2 * self.nv];
        for &sub in &path {
            let nblists: Vec<Vec<usize>> = match self.blossombestedges[sub].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(sub)
                    .into_iter()
                    .map(|leaf| self.neighbend[leaf].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for list in nblists {
                for kk in list {
                    let (mut i, mut j, _) = self.edges[kk];
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == -1 || self.slack(kk) < self.slack(bestedgeto[bj] as usize))
                    {
                        bestedgeto[bj] = kk as isize;
                    }
                }
            }
            self.bestedge[sub] = -1;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != -1).map(|k| k as usize).collect();
        self.bestedge[b] = -1;
        for &kk in &best {
            if self.bestedge[b] == -1 || self.slack(kk) < self.slack(self.bestedge[b] as usize) {
                self.bestedge[b] = kk as isize;
            }
        }
        self.blossombestedges[b] = Some(best);
        self.blossomchilds[b] = path;
        self.blossomendps[b] = endps;
    }

    fn leaves_of_path(&self, path: &[usize]) -> Vec<usize> {
        path.iter().flat_map(|&s| self.leaves(s)).collect()
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = -1;
            if s < self.nv {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves(s) {
                    self.inblossom[leaf] = s;
                }
            }
        }
        if !endstage && self.label[b] == 2 {
            let entrychild = self.inblossom[self.endpoint[(self.labelend[b] ^ 1) as usize]];
            let len = childs.len() as isize;
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 == 1 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let at = |v: &Vec<usize>, idx: isize| v[idx.rem_euclid(len) as usize];
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b] as usize;
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = 0;
                let q = at(&endps, j - endptrick as isize) ^ endptrick ^ 1;
                self.label[self.endpoint[q]] = 0;
                self.assign_label(self.endpoint[p ^ 1], 2, p as isize);
                self.allowedge[at(&endps, j - endptrick as isize) / 2] = true;
                j += jstep;
                p = at(&endps, j - endptrick as isize) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = at(&childs, j);
            let ep = self.endpoint[p ^ 1];
            self.label[ep] = 2;
            self.label[bv] = 2;
            self.labelend[ep] = p as isize;
            self.labelend[bv] = p as isize;
            self.bestedge[bv] = -1;
            j += jstep;
            while at(&childs, j) != entrychild {
                let bv = at(&childs, j);
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let labelled = self.leaves(bv).into_iter().find(|&v| self.label[v] != 0);
                if let Some(v) = labelled {
                    debug_assert_eq!(self.label[v], 2);
                    self.label[v] = 0;
                    let mb = self.mate[self.blossombase[bv] as usize];
                    self.label[self.endpoint[mb as usize]] = 0;
                    self.assign_label(v, 2, self.labelend[v]);
                }
                j += jstep;
            }
        }
        self.label[b] = 0;
        self.labelend[b] = -1;
        self.blossomchilds[b] = Vec::new();
        self.blossomendps[b] = Vec::new();
        self.blossombase[b] = -1;
        self.blossombestedges[b] = None;
        self.bestedge[b] = -1;
        self.unusedblossoms.push(b);
    }

    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b as isize {
            t = self.blossomparent[t] as usize;
        }
        if t >= self.nv {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as isize;
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as isize;
        let (jstep, endptrick): (isize, usize) = if i & 1 == 1 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        let idx = |x: isize| x.rem_euclid(len) as usize;
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][idx(j)];
            let p = self.blossomendps[b][idx(j - endptrick as isize)] ^ endptrick;
            if t >= self.nv {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.blossomchilds[b][idx(j)];
            if t >= self.nv {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = (p ^ 1) as isize;
            self.mate[self.endpoint[p ^ 1]] = p as isize;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v as isize);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (s0, p0) in [(v, 2 * k + 1), (w, 2 * k)] {
            let (mut s, mut p) = (s0, p0);
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], 1);
                if bs >= self.nv {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p as isize;
                if self.labelend[bs] == -1 {
                    break;
                }
                let t = self.endpoint[self.labelend[bs] as usize];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], 2);
                let le = self.labelend[bt] as usize;
                s = self.endpoint[le];
                let j = self.endpoint[le ^ 1];
                if bt >= self.nv {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = le as isize;
                p = le ^ 1;
            }
        }
    }

    /// Maximum-weight matching among maximum-cardinality matchings.
    /// Returns `mate[v]` (vertex index or -1).
    fn solve(mut self) -> Vec<isize> {
        let nv = self.nv;
        for _ in 0..nv {
            self.label.iter_mut().for_each(|l| *l = 0);
            self.bestedge.iter_mut().for_each(|e| *e = -1);
            for slot in &mut self.blossombestedges[nv..] {
                *slot = None;
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();
            for v in 0..nv {
                if self.mate[v] == -1 && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, -1);
                }
            }
            let mut augmented = false;
            loop {
                while !augmented {
                    let Some(v) = self.queue.pop() else { break };
                    debug_assert_eq!(self.label[self.inblossom[v]], 1);
                    for pi in 0..self.neighbend[v].len() {
                        let p = self.neighbend[v][pi];
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, (p ^ 1) as isize);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base >= 0 {
                                    self.add_blossom(base as usize, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                self.label[w] = 2;
                                self.labelend[w] = (p ^ 1) as isize;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == -1 || kslack < self.slack(self.bestedge[b] as usize) {
                                self.bestedge[b] = k as isize;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == -1 || kslack < self.slack(self.bestedge[w] as usize))
                        {
                            self.bestedge[w] = k as isize;
                        }
                    }
                }
                if augmented {
                    break;
                }
                // dual update; max-cardinality mode has no type-1 delta up front
                let mut deltatype = -1;
                let mut delta = 0i64;
                let mut deltaedge = 0usize;
                let mut deltablossom = 0usize;
                for v in 0..nv {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != -1 {
                        let d = self.slack(self.bestedge[v] as usize);
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v] as usize;
                        }
                    }
                }
                for b in 0..2 * nv {
                    if self.blossomparent[b] == -1 && self.label[b] == 1 && self.bestedge[b] != -1 {
                        let kslack = self.slack(self.bestedge[b] as usize);
                        debug_assert_eq!(kslack % 2, 0);
                        let d = kslack / 2;
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b] as usize;
                        }
                    }
                }
                for b in nv..2 * nv {
                    if self.blossombase[b] >= 0
                        && self.blossomparent[b] == -1
                        && self.label[b] == 2
                        && (deltatype == -1 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == -1 {
                    deltatype = 1;
                    delta = self.dualvar[..nv].iter().copied().min().unwrap_or(0).max(0);
                }
                for v in 0..nv {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in nv..2 * nv {
                    if self.blossombase[b] >= 0 && self.blossomparent[b] == -1 {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }
                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }
            if !augmented {
                break;
            }
            for b in nv..2 * nv {
                if self.blossomparent[b] == -1
                    && self.blossombase[b] >= 0
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
        (0..nv)
            .map(|v| {
                let m = self.mate[v];
                if m >= 0 {
                    self.endpoint[m as usize] as isize
                } else {
                    -1
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_list(n: usize, list: &[((usize, usize), f64)]) -> PairWeights {
        PairWeights::from_fn(n, |i, j| {
            let w = list
                .iter()
                .find(|(p, _)| *p == (i, j))
                .map_or(0.0, |(_, w)| *w);
            (w, 0)
        })
    }

    fn all_perfect(verts: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if verts.is_empty() {
            return vec![Vec::new()];
        }
        let first = verts[0];
        let mut out = Vec::new();
        for k in 1..verts.len() {
            let rest: Vec<usize> = verts[1..].iter().copied().filter(|&v| v != verts[k]).collect();
            for mut m in all_perfect(&rest) {
                m.push((first, verts[k]));
                out.push(m);
            }
        }
        out
    }

    fn brute_best(w: &PairWeights) -> f64 {
        let verts: Vec<usize> = (0..w.n()).collect();
        all_perfect(&verts)
            .iter()
            .map(|m| w.total(m))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn is_partition(n: usize, pairs: &[(usize, usize)]) -> bool {
        let mut seen = vec![false; n];
        pairs.len() * 2 == n
            && pairs
                .iter()
                .all(|&(a, b)| a < b && !std::mem::replace(&mut seen[a], true) && !std::mem::replace(&mut seen[b], true))
    }

    #[test]
    fn two_vertices() {
        let w = from_list(2, &[]);
        assert_eq!(exact_matching(&w).unwrap(), vec![(0, 1)]);
        assert_eq!(greedy_matching(&w).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn four_vertex_cases() {
        let w = from_list(4, &[((0, 1), 1.0), ((2, 3), 1.0), ((0, 2), 10.0), ((1, 3), 10.0)]);
        assert_eq!(exact_matching(&w).unwrap(), vec![(0, 2), (1, 3)]);
        assert_eq!(greedy_matching(&w).unwrap(), vec![(0, 2), (1, 3)]);
        let adv = from_list(4, &[((0, 1), 10.0), ((2, 3), 0.0), ((0, 2), 9.0), ((1, 3), 9.0)]);
        let g = greedy_matching(&adv).unwrap();
        let e = exact_matching(&adv).unwrap();
        assert_eq!(g, vec![(0, 1), (2, 3)]);
        assert_eq!((adv.total(&g), adv.total(&e)), (10.0, 18.0));
    }

    #[test]
    fn odd_n_is_rejected() {
        let w = from_list(3, &[]);
        assert!(exact_matching(&w).is_err());
        assert!(greedy_matching(&w).is_err());
    }

    #[test]
    fn perfect_matchings_count() {
        assert_eq!(all_perfect(&(0..8).collect::<Vec<_>>()).len(), 105);
    }

    #[test]
    fn exact_matches_brute_force() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = [2, 4, 6, 8][seed as usize % 4];
            let w = PairWeights::from_fn(n, |_, _| (rng.gen_range(-5.0..5.0), 0));
            let e = exact_matching(&w).unwrap();
            let g = greedy_matching(&w).unwrap();
            assert!(is_partition(n, &e) && is_partition(n, &g));
            let best = brute_best(&w);
            assert!((w.total(&e) - best).abs() < 1e-8, "seed {seed}");
            assert!(w.total(&e) >= w.total(&g) - 1e-8);
        }
    }

    #[test]
    fn integer_ties_and_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let w = PairWeights::from_fn(8, |_, _| (rng.gen_range(0..3) as f64, 0));
        let e = exact_matching(&w).unwrap();
        assert!((w.total(&e) - brute_best(&w)).abs() < 1e-9);
        let w = PairWeights::from_fn(64, |_, _| (rng.gen_range(-1.0..1.0), 0));
        let e = exact_matching(&w).unwrap();
        assert!(is_partition(64, &e));
        assert!(w.total(&e) >= w.total(&greedy_matching(&w).unwrap()));
    }
}
