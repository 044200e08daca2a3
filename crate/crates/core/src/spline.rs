//! Scalar B-spline kernels and the tensor-product stencils built from them.
//!
//! Velocity uses the C¹ multiquadratic B-spline centred on cell centres and
//! pressure uses the multilinear hat function centred on grid nodes. Both
//! kernels take the offset in grid units, `(x - x_i) / dx`.

use crate::error::Result;
use crate::grid::GridDesc;
use crate::Vec2;

/// Kernel value and its derivative with respect to the grid-normalized offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSample {
    pub value: f64,
    pub derivative: f64,
}

impl KernelSample {
    const ZERO: KernelSample = KernelSample {
        value: 0.0,
        derivative: 0.0,
    };
}

/// Quadratic B-spline kernel, supported on `(-3/2, 3/2)`.
#[inline]
pub fn quad_kernel(eta: f64) -> KernelSample {
    if eta > -1.5 && eta < -0.5 {
        let s = eta + 1.5;
        KernelSample {
            value: 0.5 * s * s,
            derivative: s,
        }
    } else if (-0.5..=0.5).contains(&eta) {
        KernelSample {
            value: 0.75 - eta * eta,
            derivative: -2.0 * eta,
        }
    } else if eta > 0.5 && eta < 1.5 {
        let s = eta - 1.5;
        KernelSample {
            value: 0.5 * s * s,
            derivative: s,
        }
    } else {
        KernelSample::ZERO
    }
}

/// Linear hat kernel, supported on `(-1, 1)`.
#[inline]
pub fn lin_kernel(nu: f64) -> KernelSample {
    if nu > -1.0 && nu < 0.0 {
        KernelSample {
            value: 1.0 + nu,
            derivative: 1.0,
        }
    } else if (0.0..1.0).contains(&nu) {
        KernelSample {
            value: 1.0 - nu,
            derivative: -1.0,
        }
    } else {
        KernelSample::ZERO
    }
}

/// Tensor-product weights of an `S x S` stencil.
///
/// `weights[a][b]` belongs to index `(base[0] + a, base[1] + b)`; for the
/// quadratic stencil the indices are cells, for the linear stencil nodes.
/// Gradients are per unit length.
#[derive(Clone, Copy, Debug)]
pub struct StencilWeights2D<const S: usize> {
    pub base: [usize; 2],
    pub weights: [[f64; S]; S],
    pub gradients: [[Vec2; S]; S],
}

pub type QuadStencil = StencilWeights2D<3>;
pub type LinStencil = StencilWeights2D<2>;

impl<const S: usize> StencilWeights2D<S> {
    fn from_axes(base: [usize; 2], wx: [KernelSample; S], wy: [KernelSample; S], dx: f64) -> Self {
        let inv_dx = 1.0 / dx;
        let mut weights = [[0.0; S]; S];
        let mut gradients = [[Vec2::zeros(); S]; S];
        for a in 0..S {
            for b in 0..S {
                weights[a][b] = wx[a].value * wy[b].value;
                gradients[a][b] = Vec2::new(
                    wx[a].derivative * wy[b].value * inv_dx,
                    wx[a].value * wy[b].derivative * inv_dx,
                );
            }
        }
        Self {
            base,
            weights,
            gradients,
        }
    }

    /// Iterates `(i, j, weight, gradient)` over the stencil.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64, Vec2)> + '_ {
        (0..S).flat_map(move |a| {
            (0..S).map(move |b| {
                (
                    self.base[0] + a,
                    self.base[1] + b,
                    self.weights[a][b],
                    self.gradients[a][b],
                )
            })
        })
    }
}

/// Weights of the nine multiquadratic basis functions that are nonzero at `x`.
pub fn velocity_stencil(x: Vec2, grid: &GridDesc) -> Result<QuadStencil> {
    grid.check_velocity_region(x)?;
    let mut base = [0usize; 2];
    let mut axes = [[KernelSample::ZERO; 3]; 2];
    for axis in 0..2 {
        let n = grid.cells[axis];
        // position in cell-centre index units, kept inside the checked region
        let xi = ((x[axis] - grid.origin[axis]) / grid.dx - 0.5).clamp(0.5, n as f64 - 1.5);
        // nearest centre; exact half offsets round toward negative infinity
        let centre = ((xi - 0.5).ceil() as usize).clamp(1, n - 2);
        base[axis] = centre - 1;
        for k in 0..3 {
            axes[axis][k] = quad_kernel(xi - (centre - 1 + k) as f64);
        }
    }
    Ok(QuadStencil::from_axes(base, axes[0], axes[1], grid.dx))
}

/// Weights of the four multilinear basis functions that are nonzero at `x`.
pub fn pressure_stencil(x: Vec2, grid: &GridDesc) -> Result<LinStencil> {
    grid.check_node_region(x)?;
    let mut base = [0usize; 2];
    let mut axes = [[KernelSample::ZERO; 2]; 2];
    for axis in 0..2 {
        let n = grid.cells[axis];
        let zeta = ((x[axis] - grid.origin[axis]) / grid.dx).clamp(0.0, n as f64);
        let cell = (zeta.floor() as usize).min(n - 1);
        base[axis] = cell;
        for k in 0..2 {
            axes[axis][k] = lin_kernel(zeta - (cell + k) as f64);
        }
    }
    Ok(LinStencil::from_axes(base, axes[0], axes[1], grid.dx))
}

/// Jump of the quadratic kernel's derivative across `eta`, estimated from the
/// one-sided samples at `eta ± eps` and `eta ± 2 eps`.
///
/// The raw difference `d(eta + eps) - d(eta - eps)` also contains the smooth
/// `O(eps)` variation of the derivative; extrapolating the two sample widths to
/// zero removes it, which is exact for piecewise-quadratic kernels.
pub fn derivative_jump(eta: f64, eps: f64) -> f64 {
    let diff = |e: f64| quad_kernel(eta + e).derivative - quad_kernel(eta - e).derivative;
    2.0 * diff(eps) - diff(2.0 * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridDesc {
        GridDesc::new([12, 9], 0.1, Vec2::new(-0.3, 0.2)).unwrap()
    }

    #[test]
    fn quad_kernel_values() {
        assert_eq!(quad_kernel(0.0).value, 0.75);
        let edge = quad_kernel(1.5);
        assert_eq!(edge.value, 0.0);
        assert_eq!(edge.derivative, 0.0);
        assert_eq!(quad_kernel(0.5).value, 0.5);
        // left limit of the outer branch at the knot
        let below = quad_kernel(0.5 + 1e-15);
        assert!((below.value - 0.5).abs() < 1e-14);
        assert_eq!(quad_kernel(-1.0).value, 0.125);
        assert_eq!(quad_kernel(1.0).value, 0.125);
    }

    #[test]
    fn lin_kernel_values() {
        assert_eq!(lin_kernel(0.0).value, 1.0);
        assert_eq!(lin_kernel(-1.0).value, 0.0);
        assert_eq!(lin_kernel(0.25).value, 0.75);
        assert_eq!(lin_kernel(-0.25).value, 0.75);
        assert_eq!(lin_kernel(1.0).value, 0.0);
    }

    #[test]
    fn quad_kernel_is_c1_at_knots() {
        let eps = 1e-6;
        for knot in [-1.5, -0.5, 0.5, 1.5] {
            let jump = derivative_jump(knot, eps);
            assert!(jump.abs() <= 1e-9, "knot {knot}: jump {jump:e}");
            // value continuity: both one-sided samples approach the knot value
            let v = quad_kernel(knot).value;
            for side in [-eps, eps] {
                assert!((quad_kernel(knot + side).value - v).abs() <= 2.0 * eps);
            }
        }
    }

    #[test]
    fn quad_kernel_derivative_matches_finite_difference() {
        let h = 1e-6;
        for i in 0..200 {
            let eta = -1.6 + 3.2 * (i as f64 + 0.37) / 200.0;
            let fd = (quad_kernel(eta + h).value - quad_kernel(eta - h).value) / (2.0 * h);
            assert!((fd - quad_kernel(eta).derivative).abs() < 1e-6, "eta {eta}");
        }
    }

    #[test]
    fn stencil_at_cell_center() {
        let g = grid();
        let s = velocity_stencil(g.cell_center(4, 5), &g).unwrap();
        assert_eq!(s.base, [3, 4]);
        let axis = [0.125, 0.75, 0.125];
        for a in 0..3 {
            for b in 0..3 {
                assert!((s.weights[a][b] - axis[a] * axis[b]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pressure_stencil_at_node_and_center() {
        let g = grid();
        let s = pressure_stencil(g.node(3, 2), &g).unwrap();
        let total: f64 = s
            .iter()
            .filter(|&(i, j, _, _)| i == 3 && j == 2)
            .map(|t| t.2)
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
        for (i, j, w, _) in s.iter() {
            if (i, j) != (3, 2) {
                assert!(w.abs() < 1e-14);
            }
        }
        let c = pressure_stencil(g.cell_center(3, 2), &g).unwrap();
        for (_, _, w, _) in c.iter() {
            assert!((w - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity_random_points() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (lo, hi) = g.velocity_region();
        let (nlo, nhi) = g.node_region();
        for _ in 0..1_000_000 {
            let x = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            let s = velocity_stencil(x, &g).unwrap();
            let sum: f64 = s.weights.iter().flatten().sum();
            assert!((sum - 1.0).abs() <= 1e-14, "quadratic sum {sum}");
            let gsum: Vec2 = s.gradients.iter().flatten().sum();
            assert!(gsum.norm() <= 1e-13 / g.dx);

            let y = Vec2::new(rng.gen_range(nlo.x..nhi.x), rng.gen_range(nlo.y..nhi.y));
            let p = pressure_stencil(y, &g).unwrap();
            let psum: f64 = p.weights.iter().flatten().sum();
            assert!((psum - 1.0).abs() <= 1e-14, "linear sum {psum}");
        }
    }

    #[test]
    fn stencil_gradient_matches_central_difference() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (lo, hi) = g.velocity_region();
        let h = 1e-5 * g.dx;
        for _ in 0..500 {
            let x = Vec2::new(
                rng.gen_range(lo.x + 2.0 * h..hi.x - 2.0 * h),
                rng.gen_range(lo.y + 2.0 * h..hi.y - 2.0 * h),
            );
            let s = velocity_stencil(x, &g).unwrap();
            for axis in 0..2 {
                let mut e = Vec2::zeros();
                e[axis] = h;
                let basis_at = |p: Vec2, i: usize, j: usize| -> f64 {
                    let t = velocity_stencil(p, &g).unwrap();
                    let w = t.iter().find(|q| q.0 == i && q.1 == j).map_or(0.0, |q| q.2);
                    w
                };
                for (i, j, _, grad) in s.iter() {
                    let fd = (basis_at(x + e, i, j) - basis_at(x - e, i, j)) / (2.0 * h);
                    // O(h²) truncation plus cancellation error of the difference
                    assert!(
                        (fd - grad[axis]).abs() < 1e-6 / g.dx,
                        "fd {fd} vs {}",
                        grad[axis]
                    );
                }
            }
        }
    }

    #[test]
    fn out_of_region_reports_axis() {
        let g = grid();
        let err = velocity_stencil(Vec2::new(0.0, g.origin.y), &g).unwrap_err();
        match err {
            crate::Error::OutOfDomain { axis, .. } => assert_eq!(axis, 1),
            other => panic!("unexpected {other}"),
        }
    }
}
