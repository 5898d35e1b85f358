//! One-dimensional Gauss rules on the unit interval `[0, 1]`.

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    // Derivative from the three-term relation; not valid at |x| = 1, never evaluated there.
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre points and weights on `[0, 1]`, ascending. Exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss–Lobatto points and weights on `[0, 1]`, ascending, endpoints included (`n >= 2`).
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Gauss-Lobatto rule needs at least two points");
    let deg = n - 1;
    let degf = deg as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * i as f64 / degf).cos();
        if i > 0 && i < deg {
            // Newton on P'_deg, using (1 - x²) P'' = 2x P' - deg(deg+1) P.
            for _ in 0..100 {
                let (p, dp) = legendre(deg, x);
                let d2p = (2.0 * x * dp - degf * (degf + 1.0) * p) / (1.0 - x * x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
        }
        let p = if i == 0 {
            if deg % 2 == 0 { 1.0 } else { -1.0 }
        } else if i == deg {
            1.0
        } else {
            legendre(deg, x).0
        };
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / (degf * (degf + 1.0) * p * p);
    }
    (nodes, weights)
}
