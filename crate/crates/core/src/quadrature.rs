//! Quadrature rules on the reference triangle and on edges.
//!
//! Triangle rules are built from tensor-product Gauss-Legendre points through
//! the Duffy (collapsed square) map, which keeps all weights positive and
//! makes the exactness degree a constructive property: a rule requested for
//! degree `q` integrates every monomial `x^a y^b` with `a + b <= q` exactly.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.

/// Quadrature rule on the reference triangle.
///
/// Points are stored in barycentric coordinates `(l1, l2, l3)` with
/// `l1 = 1 - x - y`, `l2 = x`, `l3 = y`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl Quadrature {
    /// Gauss rule on the reference triangle exact for total degree `q`.
    pub fn triangle(q: usize) -> Self {
        // Duffy map (u,v) in [0,1]^2 -> (x,y) = (u, v(1-u)); the Jacobian
        // (1-u) raises the u-degree by one, hence the +2 below.
        let g = (q + 2).div_ceil(2);
        let (nodes, weights) = gauss_legendre_unit(g);
        let mut pts = Vec::with_capacity(g * g);
        let mut wts = Vec::with_capacity(g * g);
        for (iu, &u) in nodes.iter().enumerate() {
            for (iv, &v) in nodes.iter().enumerate() {
                let x = u;
                let y = v * (1.0 - u);
                pts.push([1.0 - x - y, x, y]);
                wts.push(weights[iu] * weights[iv] * (1.0 - u));
            }
        }
        Self {
            points: pts,
            weights: wts,
            degree: q,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate a function given in reference coordinates (x, y).
    pub fn integrate_ref(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }
}

/// Gauss-Legendre rule on `[0,1]` with `g` points (exact for degree `2g-1`).
///
/// Nodes are found by Newton iteration on the Legendre polynomial, seeded
/// with the Chebyshev approximation; this is accurate to machine precision
/// for any practical `g`.
pub fn gauss_legendre_unit(g: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(g >= 1);
    let mut nodes = vec![0.0; g];
    let mut weights = vec![0.0; g];
    let n = g;
    for k in 0..n {
        // Seed on [-1, 1].
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1,1] -> [0,1].
        nodes[n - 1 - k] = 0.5 * (x + 1.0);
        weights[n - 1 - k] = 0.5 * w;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x` via the
/// three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature on a straight facet, given its two endpoints; returns physical
/// points and weights (exact for degree `q` along the edge).
pub fn facet_rule(a: [f64; 2], b: [f64; 2], q: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let g = (q + 2) / 2;
    let (nodes, weights) = gauss_legendre_unit(g.max(1));
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let pts = nodes
        .iter()
        .map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        .collect();
    let wts = weights.iter().map(|&w| w * len).collect();
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for g in 1..=8 {
            let (x, w) = gauss_legendre_unit(g);
            assert_eq!(x.len(), g);
            // Exact up to degree 2g-1 on [0,1]: integral of t^p is 1/(p+1).
            for p in 0..(2 * g) {
                let quad: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(p as i32))
                    .sum();
                assert!(
                    (quad - 1.0 / (p as f64 + 1.0)).abs() < 1e-14,
                    "g={g} p={p} got {quad}"
                );
            }
        }
    }

    #[test]
    fn triangle_rule_weights_positive_and_sum_to_area() {
        for q in [1usize, 2, 3, 5, 7, 8, 9] {
            let rule = Quadrature::triangle(q);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-14, "q={q} sum={total}");
        }
    }

    #[test]
    fn triangle_rule_exactness_by_monomials() {
        for q in [1usize, 2, 3, 5, 7, 9] {
            let rule = Quadrature::triangle(q);
            for a in 0..=q as u32 {
                for b in 0..=(q as u32 - a) {
                    let quad = rule.integrate_ref(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    let exact = monomial_exact(a, b);
                    assert!(
                        (quad - exact).abs() < 1e-14,
                        "q={q} monomial x^{a} y^{b}: {quad} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn facet_rule_integrates_along_edge() {
        // Edge from (0,0) to (3,4) has length 5; integrate x along it.
        let (pts, wts) = facet_rule([0.0, 0.0], [3.0, 4.0], 3);
        let quad: f64 = pts.iter().zip(&wts).map(|(p, w)| w * p[0]).sum();
        // x = 3t, ds = 5 dt, integral = 15/2.
        assert!((quad - 7.5).abs() < 1e-13);
    }
}
