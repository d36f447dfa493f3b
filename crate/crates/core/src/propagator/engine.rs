//! Time-major sweep of the propagator recursion.
//!
//! All coefficients advance together one time step at a time; within a step
//! the levels are processed in increasing `|alpha|`, so that the midpoint
//! diffusion terms of the parents are available when a level is stepped. Only
//! the current state and the parent terms `Q_beta = B u_beta + g_beta` (at
//! the step midpoint) of levels below `N` are stored.

use rayon::prelude::*;

use crate::cm_basis::{cosine_unchecked, TimeInterval};
use crate::multiindex::IndexSet;
use crate::parabolic1d::{Recording, SpatialNorm};
use crate::{Error, Result};

/// Forcing lanes of one data term at a step midpoint.
pub(crate) struct Source {
    pub position: usize,
    pub f: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
}

/// Spatial discretisation used by the sweep. The state of one coefficient is
/// a block of `width()` reals ("lanes").
pub(crate) trait Kernel: Sync {
    fn width(&self) -> usize;
    /// Prepares the operators for the step `[t, t + dt]`.
    fn begin_step(&mut self, t: f64, dt: f64) -> Result<()>;
    /// Crank-Nicolson update with midpoint forcing.
    fn advance(&self, old: &[f64], forcing: Option<&[f64]>, new: &mut [f64]) -> Result<()>;
    /// `q = B (old + new) / 2`.
    fn diffusion_mid(&self, old: &[f64], new: &[f64], q: &mut [f64]);
    /// Initial values at the data positions.
    fn initial(&self) -> Vec<(usize, Vec<f64>)>;
    /// Forcing at time `t` for the data positions carrying `f` or `g`.
    fn sources_at(&self, t: f64) -> Vec<Source>;
    fn norm_sq(&self, lanes: &[f64], norm: SpatialNorm) -> f64;
}

pub(crate) struct SweepOutput {
    pub times: Vec<f64>,
    /// Squared norms laid out as `[position][record][norm]`.
    pub norms: Vec<f64>,
    /// Full state at each recorded time, when requested.
    pub snapshots: Vec<Vec<f64>>,
}

pub(crate) struct SweepSpec<'a> {
    pub index_set: &'a IndexSet,
    pub interval: &'a TimeInterval,
    pub recording: &'a Recording,
    pub norms: &'a [SpatialNorm],
    pub keep_state: bool,
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub(crate) fn sweep<K: Kernel>(kernel: &mut K, spec: &SweepSpec<'_>) -> Result<SweepOutput> {
    let set = spec.index_set;
    let w = kernel.width();
    let total = set.len();
    let max_order = set.max_order();
    let basis = set.basis();
    let horizon = spec.interval.horizon();
    let steps = spec.interval.steps();
    let q_len = set.level(max_order).start;

    let mut state = vec![0.0; total * w];
    let mut q = vec![0.0; q_len * w];
    for (pos, lanes) in kernel.initial() {
        state[pos * w..(pos + 1) * w].copy_from_slice(&lanes);
    }

    let mut out = SweepOutput {
        times: Vec::new(),
        norms: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut records: Vec<Vec<f64>> = Vec::new();
    let mut record = |state: &[f64], t: f64, kernel: &K, out: &mut SweepOutput| {
        let norms: Vec<f64> = state
            .par_chunks(w)
            .flat_map_iter(|lanes| spec.norms.iter().map(move |&n| kernel.norm_sq(lanes, n)))
            .collect();
        records.push(norms);
        out.times.push(t);
        if spec.keep_state {
            out.snapshots.push(state.to_vec());
        }
    };
    if spec.recording.records(0, steps) {
        record(&state, 0.0, kernel, &mut out);
    }

    let mut mk = vec![0.0; basis as usize];
    for j in 0..steps {
        let t = spec.interval.time(j);
        let dt = spec.interval.time(j + 1) - t;
        let mid = t + 0.5 * dt;
        kernel.begin_step(t, dt)?;
        for (k, m) in mk.iter_mut().enumerate() {
            *m = cosine_unchecked(k as u32 + 1, mid, horizon);
        }
        let mut sources = kernel.sources_at(mid);
        sources.sort_by_key(|s| s.position);
        let find = |pos: usize| sources.binary_search_by_key(&pos, |s| s.position).ok().map(|i| &sources[i]);
        let f_of = |pos: usize| if sources.is_empty() { None } else { find(pos).and_then(|s| s.f.as_deref()) };
        let g_of = |pos: usize| if sources.is_empty() { None } else { find(pos).and_then(|s| s.g.as_deref()) };

        let kernel_ref: &K = kernel;
        for n in 0..=max_order {
            let range = set.level(n);
            if range.is_empty() {
                continue;
            }
            let (q_lower, q_upper) = q.split_at_mut(range.start * w);
            let q_lower: &[f64] = q_lower;
            let level_state = &mut state[range.start * w..range.end * w];
            let step_one = |offset: usize,
                            lanes: &mut [f64],
                            q_out: Option<&mut [f64]>,
                            (forcing, new): &mut (Vec<f64>, Vec<f64>)|
             -> Result<()> {
                let pos = range.start + offset;
                let parents = set.parents(pos);
                let own_f = f_of(pos);
                let has_forcing = !parents.is_empty() || own_f.is_some();
                if has_forcing {
                    forcing.iter_mut().for_each(|v| *v = 0.0);
                    for p in parents {
                        let c = p.weight * mk[p.basis as usize - 1];
                        let src = &q_lower[p.position as usize * w..(p.position as usize + 1) * w];
                        axpy(c, src, forcing);
                    }
                    if let Some(f) = own_f {
                        axpy(1.0, f, forcing);
                    }
                }
                kernel_ref
                    .advance(lanes, has_forcing.then_some(&forcing[..]), new)
                    .map_err(|e| Error::Propagator {
                        alpha: set.get(pos).to_string(),
                        time: t,
                        source: Box::new(e),
                    })?;
                if let Some(q_out) = q_out {
                    kernel_ref.diffusion_mid(lanes, new, q_out);
                    if let Some(g) = g_of(pos) {
                        axpy(1.0, g, q_out);
                    }
                }
                lanes.copy_from_slice(new);
                Ok(())
            };
            let init = || (vec![0.0; w], vec![0.0; w]);
            if n < max_order {
                let q_level = &mut q_upper[..range.len() * w];
                level_state
                    .par_chunks_mut(w)
                    .zip(q_level.par_chunks_mut(w))
                    .enumerate()
                    .with_min_len(64)
                    .try_for_each_init(init, |buf, (offset, (lanes, qo))| step_one(offset, lanes, Some(qo), buf))?;
            } else {
                level_state
                    .par_chunks_mut(w)
                    .enumerate()
                    .with_min_len(64)
                    .try_for_each_init(init, |buf, (offset, lanes)| step_one(offset, lanes, None, buf))?;
            }
        }
        if spec.recording.records(j + 1, steps) {
            record(&state, spec.interval.time(j + 1), kernel, &mut out);
        }
    }

    // Transpose the per-record tables into [position][record][norm].
    let n_rec = records.len();
    let n_norm = spec.norms.len();
    let mut norms = vec![0.0; total * n_rec * n_norm];
    for (r, table) in records.iter().enumerate() {
        for pos in 0..total {
            for i in 0..n_norm {
                norms[(pos * n_rec + r) * n_norm + i] = table[pos * n_norm + i];
            }
        }
    }
    out.norms = norms;
    Ok(out)
}
