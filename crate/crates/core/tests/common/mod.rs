//! Radial shooting oracle for `−u″ − ((N−1)/r)u′ = |u|^{p−1}u`, `u′(0) = 0`,
//! `u(R) = 0` with `u > 0` on `[0, R)`.

#![allow(dead_code)]

/// Start radius for the series expansion at the origin.
const R0: f64 = 1e-4;

fn rhs(n: f64, p: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    [
        y[1],
        -(n - 1.0) / r * y[1] - y[0].abs().powf(p - 1.0) * y[0],
    ]
}

fn rk4(n: f64, p: f64, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = rhs(n, p, r, y);
    let k2 = rhs(n, p, r + h / 2.0, add(y, k1, h / 2.0));
    let k3 = rhs(n, p, r + h / 2.0, add(y, k2, h / 2.0));
    let k4 = rhs(n, p, r + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Taylor start `u = c − c^p r²/(2N) + p c^{2p−1} r⁴/(8N(N+2))`.
fn start(n: f64, p: f64, c: f64) -> [f64; 2] {
    let a = c.powf(p) / (2.0 * n);
    let b = p * c.powf(2.0 * p - 1.0) / (8.0 * n * (n + 2.0));
    [
        c - a * R0 * R0 + b * R0.powi(4),
        -2.0 * a * R0 + 4.0 * b * R0.powi(3),
    ]
}

/// Integrates from the origin with `steps` RK4 steps per unit radius and
/// records `u` at each requested radius (ascending). Returns `None` once
/// `u` changes sign before the last radius.
fn profile(n: f64, p: f64, c: f64, radii: &[f64], steps: usize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(radii.len());
    let mut r = R0;
    let mut y = start(n, p, c);
    let hmax = 1.0 / steps as f64;
    for &target in radii {
        if target <= R0 {
            out.push(c);
            continue;
        }
        while r < target {
            let h = hmax.min(target - r);
            y = rk4(n, p, r, y, h);
            r += h;
            if y[0] < 0.0 && r < target {
                return None;
            }
        }
        r = target;
        out.push(y[0]);
    }
    Some(out)
}

/// Central value `u(0)` of the positive solution on the ball of radius
/// `radius`, by bisection on the sign of `u(radius)`.
pub fn central_value(n: u32, p: f64, radius: f64) -> f64 {
    let (n, steps) = (n as f64, 20_000);
    let hits_early = |c: f64| match profile(n, p, c, &[radius], steps) {
        None => true,
        Some(v) => v[0] < 0.0,
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while !hits_early(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hits_early(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Oracle values at the given radii (ascending, inside `[0, radius)`).
pub fn shooting_profile(n: u32, p: f64, radius: f64, radii: &[f64]) -> Vec<f64> {
    let c = central_value(n, p, radius);
    profile(n as f64, p, c, radii, 20_000).expect("oracle profile stays positive")
}
