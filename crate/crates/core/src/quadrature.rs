//! Quadrature on the unit interval and the reference simplices.
//!
//! All rules are returned as `(points, weights)` on the reference element
//! `[0,1]` or `{x, y >= 0, x + y <= 1}` with weights summing to the reference
//! measure.

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` on `[-1, 1]` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (x * x - 1.0).abs() < 1e-300 {
        // endpoint derivative: P_n'(±1) = (±1)^{n-1} n(n+1)/2
        x.powi(n as i32 - 1) * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Gauss rule on `[0, 1]` exact for polynomials of the given degree.
pub fn interval_rule(degree: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    (x.into_iter().map(|p| vec![p]).collect(), w)
}

/// Rule on the reference triangle exact for polynomials of the given degree.
///
/// Degrees up to 5 use the symmetric 7-point Radon rule; higher degrees use
/// a collapsed (Duffy) tensor Gauss rule.
pub fn triangle_rule(degree: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if degree <= 5 {
        return radon7();
    }
    let n = (degree + 2).div_ceil(2);
    let (g, w) = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for (u, wu) in g.iter().zip(&w) {
        for (v, wv) in g.iter().zip(&w) {
            pts.push(vec![*u, v * (1.0 - u)]);
            wts.push(wu * wv * (1.0 - u));
        }
    }
    (pts, wts)
}

fn radon7() -> (Vec<Vec<f64>>, Vec<f64>) {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 2400.0;
    let wb = (155.0 + s15) / 2400.0;
    let third = 1.0 / 3.0;
    let pts = vec![
        vec![third, third],
        vec![a, a],
        vec![1.0 - 2.0 * a, a],
        vec![a, 1.0 - 2.0 * a],
        vec![b, b],
        vec![1.0 - 2.0 * b, b],
        vec![b, 1.0 - 2.0 * b],
    ];
    let wts = vec![9.0 / 80.0, wa, wa, wa, wb, wb, wb];
    (pts, wts)
}

/// Rule on the reference `d`-simplex exact for the given degree.
pub fn simplex_rule(dim: usize, degree: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    match dim {
        1 => interval_rule(degree),
        2 => triangle_rule(degree),
        _ => unimplemented!("quadrature on {dim}-simplices"),
    }
}
