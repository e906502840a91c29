//! Starting points: torsion-like positive seeds and bumps with pairwise
//! disjoint supports.

use nalgebra::DVector;
use std::f64::consts::PI;

use crate::assembly::GridFunction;
use crate::error::{Error, Result};
use crate::functional::ProblemContext;
use crate::geometry::{GridLayout, NodeMask};

/// Solution of `B w = M 1` on the nodes of `mask` (active numbering),
/// positive and smooth.
pub fn torsion_seed(ctx: &ProblemContext, mask: &NodeMask) -> Result<GridFunction> {
    let sub = ctx.subspace(mask)?;
    let ones = DVector::from_iterator(ctx.len(), (0..ctx.len()).map(|i| if mask.get(i) { ctx.mass()[i] } else { 0.0 }));
    Ok(ctx.riesz_in(&sub, &ones))
}

/// Coordinate along which bumps are laid out: `|x|` on radial grids, `x₁`
/// on boxes.
fn profile_coordinate(ctx: &ProblemContext) -> (Vec<f64>, f64) {
    let grid = ctx.ops().grid();
    let coord = ctx
        .ops()
        .nodes()
        .iter()
        .map(|&i| if grid.is_radial() { grid.dist_origin()[i] } else { grid.point(i)[0] })
        .collect();
    let h = match grid.layout() {
        GridLayout::Radial { spacing } => *spacing,
        GridLayout::Tensor { spacing, .. } => spacing[0],
    };
    (coord, h)
}

/// `count` bumps `sin²` in the profile coordinate, supported on
/// consecutive disjoint slabs of the nodes in `mask`.
pub fn disjoint_bumps(ctx: &ProblemContext, mask: &NodeMask, count: usize) -> Result<Vec<GridFunction>> {
    let (xi, h) = profile_coordinate(ctx);
    let inside: Vec<usize> = mask.indices();
    if inside.is_empty() || count == 0 {
        return Err(Error::Precondition("bumps need a nonempty region and count >= 1".into()));
    }
    let lo = inside.iter().map(|&i| xi[i]).fold(f64::INFINITY, f64::min) - 0.5 * h;
    let hi = inside.iter().map(|&i| xi[i]).fold(f64::NEG_INFINITY, f64::max) + 0.5 * h;
    let width = (hi - lo) / count as f64;
    let mut bumps = Vec::with_capacity(count);
    for k in 0..count {
        let a = lo + k as f64 * width;
        let b = a + width;
        let bump = DVector::from_iterator(
            ctx.len(),
            (0..ctx.len()).map(|i| {
                if mask.get(i) && xi[i] > a && xi[i] < b {
                    (PI * (xi[i] - a) / width).sin().powi(2)
                } else {
                    0.0
                }
            }),
        );
        if bump.iter().all(|&v| v == 0.0) {
            return Err(Error::Resolution(format!("bump {k} of {count} contains no node")));
        }
        bumps.push(bump);
    }
    Ok(bumps)
}

/// `Σ_{i<=j} (-1)^i w_i` over `j + 1` disjoint bumps: a seed with `j`
/// sign changes.
pub fn oscillating_seed(ctx: &ProblemContext, mask: &NodeMask, j: usize) -> Result<GridFunction> {
    let bumps = disjoint_bumps(ctx, mask, j + 1)?;
    Ok(bumps
        .iter()
        .enumerate()
        .fold(DVector::zeros(ctx.len()), |acc, (i, w)| if i % 2 == 0 { acc + w } else { acc - w }))
}
