//! Oracles shared by the integration tests.

use localtime_lab::{Grid, ScaledKernel};

/// RK4 for `(k, k')` from `a` to every node of `grid`, `substeps` steps per interval.
pub fn rk4_shoot(grid: &Grid, kernel: &ScaledKernel, lambda: f64, substeps: usize) -> Vec<f64> {
    // stage abscissae at step ends are nudged inside the step so a jump of the
    // kernel that sits on a step boundary is seen from the correct side
    let rhs = |x: f64, y: [f64; 2]| [y[1], 2.0 * (lambda + kernel.eval(x)) * y[0]];
    let step = grid.h() / substeps as f64;
    let mut y = [0.0, 1.0];
    let mut out = vec![0.0];
    for i in 0..grid.intervals() {
        let x0 = grid.x(i);
        for s in 0..substeps {
            let x = x0 + s as f64 * step;
            let k1 = rhs(x.next_up(), y);
            let k2 = rhs(x + 0.5 * step, [y[0] + 0.5 * step * k1[0], y[1] + 0.5 * step * k1[1]]);
            let k3 = rhs(x + 0.5 * step, [y[0] + 0.5 * step * k2[0], y[1] + 0.5 * step * k2[1]]);
            let k4 = rhs((x + step).next_down(), [y[0] + step * k3[0], y[1] + step * k3[1]]);
            for j in 0..2 {
                y[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        out.push(y[0]);
    }
    out
}

pub fn sup_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}
