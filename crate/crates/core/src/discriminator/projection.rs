//! Euclidean projections onto the parameter constraint sets.

use crate::linalg::norm2;

/// Radial projection onto `{ v : ||v||_2 <= radius }`.
pub fn project_l2_ball(v: &mut [f64], radius: f64) {
    let n = norm2(v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
        // Rounding can leave the norm one ulp outside; the result must be a
        // fixed point of the projection.
        while norm2(v) > radius {
            v.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
        }
    }
}

/// Euclidean projection onto `{ w : ||w||_1 <= radius }` by the sort-based
/// threshold search (Duchi, Shalev-Shwartz, Singer, Chandra 2008).
pub fn project_l1_ball(w: &mut [f64], radius: f64) {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        w.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j as f64 + 1.0);
        if uj > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in w.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
    while w.iter().map(|x| x.abs()).sum::<f64>() > radius {
        w.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
    }
}
