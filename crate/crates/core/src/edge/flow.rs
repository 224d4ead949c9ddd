use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::strip::StripFamily;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    pub value: f64,
    /// Fraction of the norm in the interface region `|x2| <= W / 3`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetOptions {
    /// Initial uniform nodes on `[0, 2 pi]`, both ends included.
    pub nodes: usize,
    /// Energy window `[lambda0 - w, lambda0 + w]`.
    pub half_width: f64,
    /// Localization threshold separating interface from outer-boundary states.
    pub theta: f64,
    /// Node budget for adaptive refinement.
    pub max_nodes: usize,
    /// Smallest allowed interval is the initial step divided by `2^max_depth`.
    pub max_depth: u32,
}

impl FloquetOptions {
    pub fn new(nodes: usize, half_width: f64) -> Self {
        Self {
            nodes,
            half_width,
            theta: 0.5,
            max_nodes: 20 * nodes.max(10),
            max_depth: 16,
        }
    }
}

/// Window eigenvalues of a strip family along the Floquet circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSpectrum {
    /// Ascending nodes from 0 to `2 pi`.
    pub zetas: Vec<f64>,
    /// Ascending window states per node.
    pub states: Vec<Vec<WindowState>>,
    /// Number of eigenvalues below `lambda0` per node (absent for synthetic data).
    pub n_below: Option<Vec<usize>>,
    pub lambda0: f64,
    pub half_width: f64,
    pub theta: f64,
    /// False when the refinement budget ran out before every interval resolved.
    pub complete: bool,
    /// Intervals that stayed unresolved.
    pub unresolved: Vec<(f64, f64)>,
}

impl FloquetSpectrum {
    /// Spectrum built from given curves, for tests and external data. All states get weight 1.
    pub fn from_curves(zetas: Vec<f64>, curves: &[&dyn Fn(f64) -> f64], lambda0: f64, half_width: f64) -> Self {
        let states = zetas
            .iter()
            .map(|&z| {
                let mut s: Vec<WindowState> = curves
                    .iter()
                    .map(|f| f(z))
                    .filter(|v| (v - lambda0).abs() <= half_width)
                    .map(|value| WindowState { value, weight: 1.0 })
                    .collect();
                s.sort_by(|a, b| a.value.total_cmp(&b.value));
                s
            })
            .collect();
        Self {
            zetas,
            states,
            n_below: None,
            lambda0,
            half_width,
            theta: 0.5,
            complete: true,
            unresolved: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["zeta", "eigenvalue", "localization_weight"])?;
        for (z, states) in self.zetas.iter().zip(&self.states) {
            for s in states {
                w.write_record(&[z.to_string(), s.value.to_string(), s.weight.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct NodeData {
    states: Vec<WindowState>,
    n_below: usize,
}

fn solve_node<S: StripFamily + ?Sized>(strip: &S, zeta: f64, lambda0: f64, w: f64) -> Result<NodeData> {
    let h = strip.matrix(zeta)?;
    let e = linalg::eigh(&h)?;
    let d = strip.block_dim();
    let cut = strip.half_extent() / 3.0;
    let inner: Vec<usize> = strip
        .heights()
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() <= cut)
        .flat_map(|(s, _)| (s * d)..(s * d + d))
        .collect();
    let level = counting_level(lambda0, w);
    let n_below = e.values.iter().filter(|&&v| v < level).count();
    let states = e
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - lambda0).abs() <= w)
        .map(|(j, &value)| {
            let weight = inner.iter().map(|&r| e.vectors[(r, j)].norm_sqr()).sum();
            WindowState { value, weight }
        })
        .collect();
    Ok(NodeData { states, n_below })
}

/// One signed passage through `lambda0` at position `t` in `[0, 1]` of an interval.
struct Passage {
    sign: i32,
    weight: f64,
    t: f64,
}

/// Matches the states of one localization class across an interval.
///
/// States may enter or leave only through the window edges (within `tol` of
/// them); matched pairs must move by less than `tol`. The matching is
/// monotone, so it follows order statistics, which preserves the net count
/// through `lambda0` even where curves of the class cross each other.
fn match_class(a: &[WindowState], b: &[WindowState], lambda0: f64, w: f64) -> Option<Vec<(usize, usize)>> {
    let tol = w / 4.0;
    let lo = lambda0 - w;
    let hi = lambda0 + w;
    let near_lo = |v: f64| v < lo + tol;
    let near_hi = |v: f64| v > hi - tol;
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for p in 0..=a.len() {
        if !a[..p].iter().all(|s| near_lo(s.value)) {
            break;
        }
        for q in 0..=b.len() {
            if !b[..q].iter().all(|s| near_lo(s.value)) {
                break;
            }
            let max_len = (a.len() - p).min(b.len() - q);
            for len in (0..=max_len).rev() {
                if !a[p + len..].iter().all(|s| near_hi(s.value)) || !b[q + len..].iter().all(|s| near_hi(s.value)) {
                    continue;
                }
                let cost = (0..len).map(|i| (a[p + i].value - b[q + i].value).abs()).fold(0.0, f64::max);
                if cost >= tol {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bl, bc, _, _)) => len > bl || (len == bl && cost < bc),
                };
                if better {
                    best = Some((len, cost, p, q));
                }
                break;
            }
        }
    }
    best.map(|(len, _, p, q)| (0..len).map(|i| (p + i, q + i)).collect())
}

/// Passages are counted through a level a hair above `lambda0`, so a curve
/// sitting on `lambda0` at both ends of the Floquet circle is not miscounted.
fn counting_level(lambda0: f64, w: f64) -> f64 {
    lambda0 + 1e-9 * w
}

fn side(v: f64, level: f64) -> i32 {
    if v >= level {
        1
    } else {
        -1
    }
}

/// Signed passages over one interval, or `None` if the interval is unresolved.
fn interval_passages(
    a: &[WindowState],
    b: &[WindowState],
    counts: Option<(usize, usize)>,
    lambda0: f64,
    w: f64,
    theta: f64,
) -> Option<Vec<Passage>> {
    let mut out = Vec::new();
    let level = counting_level(lambda0, w);
    for interface in [true, false] {
        let pick = |s: &[WindowState]| -> Vec<WindowState> { s.iter().copied().filter(|x| (x.weight >= theta) == interface).collect() };
        let (ca, cb) = (pick(a), pick(b));
        let pairs = match_class(&ca, &cb, lambda0, w)?;
        for (i, j) in pairs {
            let (x, y) = (ca[i].value, cb[j].value);
            let (sx, sy) = (side(x, level), side(y, level));
            if sx != sy {
                let t = if y != x { ((level - x) / (y - x)).clamp(0.0, 1.0) } else { 0.5 };
                out.push(Passage {
                    sign: (sy - sx) / 2,
                    weight: 0.5 * (ca[i].weight + cb[j].weight),
                    t,
                });
            }
        }
    }
    if let Some((na, nb)) = counts {
        let net: i64 = out.iter().map(|p| p.sign as i64).sum();
        if net != na as i64 - nb as i64 {
            return None;
        }
    }
    Some(out)
}

/// Window spectrum on an adaptively refined Floquet grid.
///
/// An interval is refined until the states of each localization class can
/// be matched with displacement below `w / 4` and the signed passages agree
/// with the change in the number of eigenvalues below `lambda0`.
pub fn floquet_spectrum<S: StripFamily + ?Sized>(strip: &S, lambda0: f64, opts: &FloquetOptions) -> Result<FloquetSpectrum> {
    if opts.nodes < 2 {
        return Err(Error::InvalidWindow("need at least two Floquet nodes".into()));
    }
    if !(opts.half_width > 0.0) {
        return Err(Error::InvalidWindow("window half-width must be positive".into()));
    }
    let w = opts.half_width;
    let step0 = 2.0 * PI / (opts.nodes - 1) as f64;
    let min_step = step0 / 2f64.powi(opts.max_depth as i32);
    let init: Vec<f64> = (0..opts.nodes)
        .map(|i| if i + 1 == opts.nodes { 2.0 * PI } else { step0 * i as f64 })
        .collect();
    let solved: Vec<Result<NodeData>> = init.par_iter().map(|&z| solve_node(strip, z, lambda0, w)).collect();
    let mut nodes: Vec<(f64, NodeData)> = init.into_iter().zip(solved).map(|(z, d)| d.map(|d| (z, d))).collect::<Result<_>>()?;

    let mut unresolved = Vec::new();
    let mut complete = true;
    loop {
        let mut bad = Vec::new();
        for k in 0..nodes.len() - 1 {
            let (za, a) = &nodes[k];
            let (zb, b) = &nodes[k + 1];
            let ok = interval_passages(&a.states, &b.states, Some((a.n_below, b.n_below)), lambda0, w, opts.theta).is_some();
            if !ok {
                bad.push((k, *za, *zb));
            }
        }
        if bad.is_empty() {
            unresolved.clear();
            break;
        }
        let refinable: Vec<f64> = bad
            .iter()
            .filter(|(_, za, zb)| zb - za > 2.0 * min_step)
            .map(|(_, za, zb)| 0.5 * (za + zb))
            .collect();
        if refinable.is_empty() || nodes.len() + refinable.len() > opts.max_nodes {
            complete = false;
            unresolved = bad.iter().map(|&(_, a, b)| (a, b)).collect();
            break;
        }
        let new: Vec<Result<(f64, NodeData)>> = refinable
            .par_iter()
            .map(|&z| solve_node(strip, z, lambda0, w).map(|d| (z, d)))
            .collect();
        for n in new {
            let (z, d) = n?;
            let pos = nodes.partition_point(|(x, _)| *x < z);
            nodes.insert(pos, (z, d));
        }
    }

    let (zetas, data): (Vec<f64>, Vec<NodeData>) = nodes.into_iter().unzip();
    Ok(FloquetSpectrum {
        zetas,
        n_below: Some(data.iter().map(|d| d.n_below).collect()),
        states: data.into_iter().map(|d| d.states).collect(),
        lambda0,
        half_width: w,
        theta: opts.theta,
        complete,
        unresolved,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub zeta: f64,
    /// Sign of `d lambda / d zeta` at the crossing.
    pub sign: i32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFlowResult {
    pub flow: i64,
    pub crossings: Vec<Crossing>,
    pub filtered: bool,
    /// Sum over all crossings, interface and outer boundary alike.
    pub unfiltered_flow: i64,
}

/// Signed count of window curves passing `lambda0` along the Floquet circle.
///
/// With `filtered`, crossings of states whose interface weight is below
/// `theta` (outer-boundary states) are discarded.
pub fn spectral_flow(fs: &FloquetSpectrum, theta: f64, filtered: bool) -> Result<SpectralFlowResult> {
    let mut crossings = Vec::new();
    for k in 0..fs.zetas.len().saturating_sub(1) {
        let counts = fs.n_below.as_ref().map(|n| (n[k], n[k + 1]));
        let (za, zb) = (fs.zetas[k], fs.zetas[k + 1]);
        let passages = interval_passages(&fs.states[k], &fs.states[k + 1], counts, fs.lambda0, fs.half_width, theta)
            .ok_or(Error::AmbiguousMatching { lo: za, hi: zb })?;
        for p in passages {
            crossings.push(Crossing {
                zeta: za + p.t * (zb - za),
                sign: p.sign,
                weight: p.weight,
            });
        }
    }
    let unfiltered_flow = crossings.iter().map(|c| c.sign as i64).sum();
    if filtered {
        crossings.retain(|c| c.weight >= theta);
    }
    let flow = crossings.iter().map(|c| c.sign as i64).sum();
    Ok(SpectralFlowResult {
        flow,
        crossings,
        filtered,
        unfiltered_flow,
    })
}
