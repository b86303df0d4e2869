//! The conjoined contraction integral and full kernel-term evaluation.
//!
//! A conjoined block over legs `j = 1..η` (slot `j` restricted to frequency
//! sheet `σ_j`) evaluates to `c_η · J` with `c_η` the η-th measure moment
//! and
//!
//! ```text
//! J = ∫ dυ d³u/(2π)⁴  Π_j h_j(υ, u⃗),
//! h_j(υ, u⃗) = ∫ d³p/(2ω) e^{i(σ_j ω υ − p⃗·u⃗)} v_j(σ_j, p⃗),
//! ```
//!
//! the momentum-conservation delta `δ(Σ σ_j ω_j) δ³(Σ p⃗_j)` opened up by a
//! relative-time and relative-position integral over the product of shell
//! transforms. The implementation streams over relative-time slices: each
//! slice FFTs every distinct (packet, sheet) once, multiplies the slices
//! leg-wise over a position mask, and accumulates slice sums in fixed index
//! order (bit-reproducible under any thread count). Pure spatial
//! translation tags become exact index shifts of the position argument, so
//! a whole translation scan shares one set of transforms.
//!
//! Error estimates come from embedded coarser lattices (every other
//! relative-time slice, every other position sample), which reuse the same
//! samples at no extra cost.

use super::{
    pair_overlap, slot_momentum_peak, slot_vanishes_on, BoxGrid, CenteredFft, Estimate, Grid1,
    QuadConfig, QuadError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use uqft_core::algebra::{Kinematics, Slot};
use uqft_core::kernel::{Factor, MomentMeasure};

/// Shared grid geometry for a family of evaluations. Keeping one plan for
/// a whole Gram matrix makes every entry a sum over identical sample
/// points, which preserves the positive-semidefinite structure exactly.
#[derive(Clone, Debug)]
pub struct GridPlan {
    /// Points per momentum (and position) axis.
    pub n: usize,
    /// Momentum step shared by all slots and axes.
    pub dp: f64,
    /// Position step, `2π/(n·dp)`.
    pub du: f64,
    /// Relative-time grid.
    pub upsilon: Grid1,
    /// Position samples are kept within this radius of the envelope centre.
    pub mask_radius: f64,
    /// Shared momentum box for two-point factors.
    pub pair_box: BoxGrid,
}

impl GridPlan {
    /// Derives a plan covering every slot in the pool.
    pub fn for_slots(
        slots: &[&Slot],
        kin: &Kinematics,
        cfg: &QuadConfig,
    ) -> Result<GridPlan, QuadError> {
        if slots.is_empty() {
            return Err(QuadError::Config("grid plan needs at least one slot"));
        }
        let mut width_min = f64::INFINITY;
        let mut width_max: f64 = 0.0;
        for s in slots {
            width_min = width_min.min(s.packet.width);
            width_max = width_max.max(s.packet.width);
        }
        let n = cfg.momentum_points;
        let halfspan = cfg.momentum_halfspan_widths / width_min;
        for s in slots {
            let needed = 6.0 / s.packet.width;
            if halfspan < needed {
                return Err(QuadError::GridCoverage { extent: halfspan, needed });
            }
        }
        let dp = 2.0 * halfspan / n as f64;
        let du = 2.0 * std::f64::consts::PI / (n as f64 * dp);
        let upsilon = Grid1::symmetric(
            cfg.upsilon_step_mass / kin.mass(),
            cfg.upsilon_halfspan_mass / kin.mass(),
        );
        let mask_radius = cfg.contraction_radius_widths * width_max;
        let centres: Vec<[f64; 3]> = slots
            .iter()
            .map(|s| slot_momentum_peak(&Slot::plain(s.packet.clone()), kin, 1))
            .collect();
        let pair_box = BoxGrid::covering(&centres, halfspan, n);
        for (s, c) in slots.iter().zip(centres.iter()) {
            if !pair_box.covers(c, 6.0 / s.packet.width) {
                return Err(QuadError::GridCoverage {
                    extent: halfspan,
                    needed: 6.0 / s.packet.width,
                });
            }
        }
        Ok(GridPlan { n, dp, du, upsilon, mask_radius, pair_box })
    }

    /// The same plan with a replacement relative-time grid.
    pub fn with_upsilon(mut self, upsilon: Grid1) -> Self {
        self.upsilon = upsilon;
        self
    }
}

/// A 64-bit FNV-1a fingerprint of a slot's defining data (centre, width,
/// time offset, lift flag, star flag, Poincaré tag). Used as a cache key.
pub fn slot_fingerprint(slot: &Slot) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for c in slot.packet.center {
        eat(c.to_bits());
    }
    eat(slot.packet.width.to_bits());
    eat(slot.packet.tau.to_bits());
    eat(u64::from(slot.packet.lifted));
    eat(u64::from(slot.starred));
    if let Some(tag) = &slot.packet.transform {
        eat(tag.translation.t.to_bits());
        for c in tag.translation.x {
            eat(c.to_bits());
        }
        for row in tag.lorentz.matrix() {
            for c in row {
                eat(c.to_bits());
            }
        }
    }
    h
}

/// Splits a pure, grid-aligned spatial translation off a slot. Returns the
/// stripped slot and the index offset; slots with any other tag (or an
/// unaligned shift) are sampled directly with a zero offset.
fn split_translation(slot: &Slot, du: f64) -> (Slot, [i64; 3]) {
    let Some(tag) = &slot.packet.transform else {
        return (slot.clone(), [0, 0, 0]);
    };
    if !tag.lorentz.is_identity(1e-14) || tag.translation.t != 0.0 {
        return (slot.clone(), [0, 0, 0]);
    }
    let mut offset = [0i64; 3];
    for a in 0..3 {
        let steps = tag.translation.x[a] / du;
        let snapped = steps.round();
        if (steps - snapped).abs() > 1e-9 * (1.0 + snapped.abs()) {
            return (slot.clone(), [0, 0, 0]);
        }
        offset[a] = snapped as i64;
    }
    let mut packet = slot.packet.clone();
    packet.transform = None;
    (Slot { packet, starred: slot.starred }, offset)
}

/// Contraction integrals for several leg families that share one grid
/// plan. Every distinct (packet, sheet) is transformed once per
/// relative-time slice and shared across families; results are returned in
/// the order of `keys`. Families containing a leg with no support on its
/// sheet evaluate to exact zero.
pub fn pooled_contractions(
    keys: &[Vec<(Slot, i8)>],
    plan: &GridPlan,
    kin: &Kinematics,
) -> Result<Vec<Estimate>, QuadError> {
    let n = plan.n;
    if plan.upsilon.n < 3 {
        return Err(QuadError::Config("relative-time grid needs at least three slices"));
    }
    for key in keys {
        if key.len() > 6 {
            return Err(QuadError::TooManyLegs { got: key.len(), max: 6 });
        }
        if key.len() < 4 {
            return Err(QuadError::Config("conjoined blocks have at least four legs"));
        }
        for (slot, _) in key {
            let needed = 6.0 / slot.packet.width;
            let extent = 0.5 * n as f64 * plan.dp;
            if extent < needed {
                return Err(QuadError::GridCoverage { extent, needed });
            }
        }
    }

    // Pool of distinct (effective slot, sheet) entries; legs reference them.
    let mut pool: Vec<(Slot, i8)> = Vec::new();
    let mut pool_index: BTreeMap<(u64, i8), usize> = BTreeMap::new();
    // Per key: either None (structural zero) or the legs.
    let mut families: Vec<Option<Vec<(usize, [i64; 3])>>> = Vec::new();
    for key in keys {
        if key.iter().any(|(slot, sheet)| slot_vanishes_on(slot, *sheet)) {
            families.push(None);
            continue;
        }
        let mut legs = Vec::with_capacity(key.len());
        for (slot, sheet) in key {
            let (eff, offset) = split_translation(slot, plan.du);
            let fp = (slot_fingerprint(&eff), *sheet);
            let idx = *pool_index.entry(fp).or_insert_with(|| {
                pool.push((eff.clone(), *sheet));
                pool.len() - 1
            });
            legs.push((idx, offset));
        }
        families.push(Some(legs));
    }
    if families.iter().all(Option::is_none) {
        return Ok(vec![Estimate::zero(); keys.len()]);
    }

    // Momentum-grid samples that do not depend on the time slice:
    // base = v(σ, p)/(2ω) and ω per pool entry, on per-slot centred grids.
    let mut bases: Vec<(Vec<Complex64>, Vec<f64>, [f64; 3])> = Vec::with_capacity(pool.len());
    for (slot, sheet) in &pool {
        let peak = slot_momentum_peak(slot, kin, *sheet);
        let p0 = super::shell::centred_origin(&peak, n, plan.dp);
        let mut vals = Vec::with_capacity(n * n * n);
        let mut omegas = Vec::with_capacity(n * n * n);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let p = [
                        p0[0] + plan.dp * ix as f64,
                        p0[1] + plan.dp * iy as f64,
                        p0[2] + plan.dp * iz as f64,
                    ];
                    let w = kin.omega(&p);
                    vals.push(slot.on_shell_value(kin, *sheet, &p) / (2.0 * w));
                    omegas.push(w);
                }
            }
        }
        bases.push((vals, omegas, p0));
    }

    // Position mask: indices within the configured radius of the centre
    // implied by the mean index shift (so translated families keep their
    // overlap region inside the mask).
    let mean_offset = |legs: &[(usize, [i64; 3])]| -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for (_, o) in legs {
            for a in 0..3 {
                m[a] += o[a] as f64;
            }
        }
        for v in &mut m {
            *v /= legs.len() as f64;
        }
        m
    };
    // One mask per family (families sharing offsets share the work of the
    // product sum anyway; masks are cheap integer lists). Points inside
    // two thirds of the effective radius are flagged so the spatial tail
    // can be sensed from the same samples.
    let r_eff = plan.mask_radius.min(0.5 * n as f64 * plan.du);
    let inner_r2 = (2.0 / 3.0 * r_eff) * (2.0 / 3.0 * r_eff);
    let masks: Vec<Option<Vec<([usize; 3], bool)>>> = families
        .iter()
        .map(|fam| {
            let legs = fam.as_ref()?;
            let c = mean_offset(legs);
            let centre = [-c[0] * plan.du, -c[1] * plan.du, -c[2] * plan.du];
            let mut pts = Vec::new();
            let coord = |l: usize| (l as f64 - (n / 2) as f64) * plan.du;
            for ix in 0..n {
                let dx = coord(ix) - centre[0];
                for iy in 0..n {
                    let dy = coord(iy) - centre[1];
                    for iz in 0..n {
                        let dz = coord(iz) - centre[2];
                        let d2 = dx * dx + dy * dy + dz * dz;
                        if d2 <= plan.mask_radius * plan.mask_radius {
                            pts.push(([ix, iy, iz], d2 <= inner_r2));
                        }
                    }
                }
            }
            Some(pts)
        })
        .collect();

    let fft = CenteredFft::new(n);
    let nu = plan.upsilon.n;
    // Per slice and family: [all samples, every-other-point sublattice,
    // inner two-thirds ball] partial sums.
    let slice_sums: Vec<Vec<[Complex64; 3]>> = (0..nu)
        .into_par_iter()
        .map(|it| {
            let upsilon = plan.upsilon.point(it);
            // Transform every pool entry at this slice.
            let slices: Vec<Vec<Complex64>> = pool
                .iter()
                .zip(bases.iter())
                .map(|((_, sheet), (vals, omegas, p0))| {
                    let sig = f64::from(*sheet);
                    let mut data: Vec<Complex64> = vals
                        .iter()
                        .zip(omegas.iter())
                        .map(|(v, w)| v * Complex64::from_polar(1.0, sig * w * upsilon))
                        .collect();
                    fft.transform(&mut data, plan.dp, plan.du, *p0);
                    data
                })
                .collect();
            families
                .iter()
                .zip(masks.iter())
                .map(|(fam, mask)| {
                    let (Some(legs), Some(mask)) = (fam.as_ref(), mask.as_ref()) else {
                        return [Complex64::new(0.0, 0.0); 3];
                    };
                    let mut sums = [Complex64::new(0.0, 0.0); 3];
                    'pt: for (pt, inner) in mask {
                        let mut prod = Complex64::new(1.0, 0.0);
                        for (pool_idx, offset) in legs {
                            let mut flat = 0usize;
                            for a in 0..3 {
                                let shifted = pt[a] as i64 + offset[a];
                                if shifted < 0 || shifted >= n as i64 {
                                    continue 'pt; // envelope vanished off-grid
                                }
                                flat = flat * n + shifted as usize;
                            }
                            prod *= slices[*pool_idx][flat];
                        }
                        sums[0] += prod;
                        if pt.iter().all(|l| l % 2 == 0) {
                            sums[1] += prod;
                        }
                        if *inner {
                            sums[2] += prod;
                        }
                    }
                    sums
                })
                .collect()
        })
        .collect();

    // Fixed-order reduction over slices with trapezoid weights. Embedded
    // every-other-slice and every-other-point lattices sense the two step
    // sizes; the inner-ball sum senses the spatial window, and a geometric
    // bound on the end-slice magnitudes senses the relative-time window.
    let du3 = plan.du.powi(3);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).powi(4);
    let trapezoid = |stride: usize, pick: usize| -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); keys.len()];
        let last = nu - 1;
        let mut it = 0;
        while it <= last {
            let w = if it == 0 || it == last { 0.5 } else { 1.0 };
            for (k, sums) in slice_sums[it].iter().enumerate() {
                acc[k] += sums[pick] * w;
            }
            it += stride;
        }
        let step = plan.upsilon.step * stride as f64;
        let vol = if pick == 1 { du3 * 8.0 } else { du3 };
        acc.iter().map(|v| v * step * vol * norm).collect()
    };
    let fine = trapezoid(1, 0);
    let coarse_t = trapezoid(2, 0);
    let coarse_u = trapezoid(1, 1);
    let inner_u = trapezoid(1, 2);
    // Clipped relative-time tail: per window end, the two-step decay
    // ratio of the slice magnitudes extends the last value geometrically;
    // decay slower than 0.9 per step earns a stiff penalty instead.
    let upsilon_tail = |k: usize| -> f64 {
        let mag = |it: usize| slice_sums[it][k][0].norm();
        let mut tail = 0.0;
        for (end, two_in) in [(nu - 1, nu - 3), (0, 2)] {
            let a = mag(end);
            if a == 0.0 {
                continue;
            }
            let b = mag(two_in);
            let r2 = if b > 0.0 { (a / b).min(1.0) } else { 1.0 };
            let extend = if r2 < 0.81 {
                let r = r2.sqrt();
                r / (1.0 - r)
            } else {
                20.0
            };
            tail += a * extend * plan.upsilon.step * du3 * norm;
        }
        tail
    };
    Ok((0..keys.len())
        .map(|k| {
            if families[k].is_none() {
                Estimate::zero()
            } else {
                let e = (fine[k] - coarse_t[k]).norm()
                    + (fine[k] - coarse_u[k]).norm()
                    + (fine[k] - inner_u[k]).norm()
                    + upsilon_tail(k);
                Estimate { value: fine[k], error: e }
            }
        })
        .collect())
}

/// The contraction integral of a single conjoined block.
pub fn contraction_integral(
    legs: &[(Slot, i8)],
    plan: &GridPlan,
    kin: &Kinematics,
) -> Result<Estimate, QuadError> {
    Ok(pooled_contractions(&[legs.to_vec()], plan, kin)?.remove(0))
}

/// Interval-style product of two estimates.
fn combine(a: Estimate, b: Estimate) -> Estimate {
    Estimate {
        value: a.value * b.value,
        error: a.value.norm() * b.error + b.value.norm() * a.error + a.error * b.error,
    }
}

/// Evaluates one kernel term — an optional conjoined block scaled by the
/// measure moment `c_η`, times two-point factors — on the given slots.
///
/// `factors` index into `slots` one-based; `negatives` lists the slots
/// restricted to the negative frequency sheet. A vanishing moment returns
/// exact zero without quadrature, as does any factor whose lifted slot is
/// asked for its absent sheet.
pub fn eval_conjoined(
    factors: &[Factor],
    negatives: &[usize],
    slots: &[Slot],
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, QuadError> {
    let all: Vec<&Slot> = slots.iter().collect();
    let plan = GridPlan::for_slots(&all, kin, cfg)?;
    eval_conjoined_with_plan(factors, negatives, slots, measure, kin, cfg, &plan)
}

/// [`eval_conjoined`] against a caller-supplied grid plan (used to share
/// geometry across a family of evaluations).
pub fn eval_conjoined_with_plan(
    factors: &[Factor],
    negatives: &[usize],
    slots: &[Slot],
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
    plan: &GridPlan,
) -> Result<Estimate, QuadError> {
    let sheet_of = |idx: usize| -> i8 {
        if negatives.contains(&idx) {
            -1
        } else {
            1
        }
    };
    let mut acc = Estimate::exact(Complex64::new(1.0, 0.0));
    for factor in factors {
        let part = match factor {
            Factor::TwoPoint { neg, pos } => {
                pair_overlap(&slots[neg - 1], &slots[pos - 1], kin, cfg)?
            }
            Factor::Conjoined(ix) => {
                let c_eta = measure.moment(ix.len() as u32);
                if c_eta == 0.0 {
                    return Ok(Estimate::zero());
                }
                let legs: Vec<(Slot, i8)> =
                    ix.iter().map(|&i| (slots[i - 1].clone(), sheet_of(i))).collect();
                let j = contraction_integral(&legs, plan, kin)?;
                Estimate { value: j.value * c_eta, error: j.error * c_eta.abs() }
            }
        };
        if part.value.norm() == 0.0 && part.error == 0.0 {
            return Ok(Estimate::zero());
        }
        acc = combine(acc, part);
    }
    Ok(acc)
}
