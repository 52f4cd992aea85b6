//! Indicator functions of centered inclusions and their Fourier coefficients,
//! both over the unit cube and over transverse slices x_l = const.
//!
//! Convention: χ̂(g) = ∫ χ(x) e^{−2πi g·x} dx over the unit cell (or unit
//! square for slices).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64 as C64;

use crate::special::jinc;

/// Inclusion primitive centered at (½, ½, ½).
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Primitive {
    Box { width: [f64; 3] },
    Ellipsoid { diam: [f64; 3] },
    Empty,
}

/// Transverse axes (a, b), a < b, for the distinguished axis l.
pub fn transverse_axes(l: usize) -> (usize, usize) {
    match l {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => panic!("axis index must be 0, 1 or 2, got {l}"),
    }
}

fn sign(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// ∫ over the centered interval of width w of e^{−2πigx}.
fn interval_ft(g: i64, w: f64) -> f64 {
    if g == 0 {
        w
    } else {
        let a = PI * g as f64;
        sign(g) * (a * w).sin() / a
    }
}

/// (sin z − z cos z)/z³, with its series near zero.
fn ball_kernel(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0
    } else {
        (z.sin() - z * z.cos()) / (z * z * z)
    }
}

impl Primitive {
    pub fn volume(&self) -> f64 {
        match self {
            Primitive::Box { width } => width.iter().product(),
            Primitive::Ellipsoid { diam } => PI * diam.iter().product::<f64>() / 6.0,
            Primitive::Empty => 0.0,
        }
    }

    pub fn contains(&self, y: &Vector3<f64>) -> bool {
        match self {
            Primitive::Box { width } => (0..3).all(|i| (y[i] - 0.5).abs() <= width[i] / 2.0),
            Primitive::Ellipsoid { diam } => {
                let mut q = 0.0;
                for i in 0..3 {
                    let t = 2.0 * (y[i] - 0.5) / diam[i];
                    q += t * t;
                }
                q <= 1.0
            }
            Primitive::Empty => false,
        }
    }

    pub fn ft3(&self, g: [i64; 3]) -> C64 {
        match self {
            Primitive::Box { width } => {
                C64::from(interval_ft(g[0], width[0]) * interval_ft(g[1], width[1]) * interval_ft(g[2], width[2]))
            }
            Primitive::Ellipsoid { diam } => {
                let k = ((diam[0] * g[0] as f64).powi(2)
                    + (diam[1] * g[1] as f64).powi(2)
                    + (diam[2] * g[2] as f64).powi(2))
                .sqrt();
                let z = PI * k;
                let vol = diam.iter().product::<f64>();
                // d1d2d3 (sin z − z cos z)/(2π² k³) = d1d2d3 π/2 · kernel(z)
                C64::from(sign(g[0] + g[1] + g[2]) * vol * PI / 2.0 * ball_kernel(z))
            }
            Primitive::Empty => C64::new(0.0, 0.0),
        }
    }

    /// Slice transform at x_l for every h in [−H, H]², row-major in
    /// (h_a, h_b).
    pub fn ft2_slice(&self, l: usize, x: f64, big_h: i64) -> Vec<C64> {
        let side = (2 * big_h + 1) as usize;
        let mut out = vec![C64::new(0.0, 0.0); side * side];
        let (a, b) = transverse_axes(l);
        match self {
            Primitive::Box { width } => {
                if (x - 0.5).abs() > width[l] / 2.0 {
                    return out;
                }
                let fa: Vec<f64> = (-big_h..=big_h).map(|g| interval_ft(g, width[a])).collect();
                let fb: Vec<f64> = (-big_h..=big_h).map(|g| interval_ft(g, width[b])).collect();
                for i in 0..side {
                    for j in 0..side {
                        out[i * side + j] = C64::from(fa[i] * fb[j]);
                    }
                }
            }
            Primitive::Ellipsoid { diam } => {
                let t = 2.0 * (x - 0.5) / diam[l];
                let s2 = 1.0 - t * t;
                if s2 <= 0.0 {
                    return out;
                }
                let s = s2.sqrt();
                let (ra, rb) = (diam[a] * s / 2.0, diam[b] * s / 2.0);
                let area = PI * ra * rb;
                for (i, ga) in (-big_h..=big_h).enumerate() {
                    for (j, gb) in (-big_h..=big_h).enumerate() {
                        let kappa = 2.0 * PI * ((ra * ga as f64).powi(2) + (rb * gb as f64).powi(2)).sqrt();
                        out[i * side + j] = C64::from(sign(ga + gb) * area * jinc(kappa));
                    }
                }
            }
            Primitive::Empty => {}
        }
        out
    }

    /// Positions along x_l where the slice transform is not smooth.
    pub fn breakpoints(&self, l: usize) -> Vec<f64> {
        match self {
            Primitive::Box { width } => vec![0.5 - width[l] / 2.0, 0.5 + width[l] / 2.0],
            Primitive::Ellipsoid { diam } => vec![0.5 - diam[l] / 2.0, 0.5 + diam[l] / 2.0],
            Primitive::Empty => vec![],
        }
    }
}

/// ∫ over the interval [v/M, (v+1)/M] of e^{−2πigx}.
pub(crate) fn voxel_factor(g: i64, v: usize, m: usize) -> C64 {
    let mf = m as f64;
    if g == 0 {
        return C64::from(1.0 / mf);
    }
    let a = PI * g as f64;
    let phase = -2.0 * a * (v as f64 + 0.5) / mf;
    C64::from_polar((a / mf).sin() / a, phase)
}

// --- remapped geometry: {x : A x mod 1 ∈ primitive} ---

/// Exact slice transform of the remapped primitive.
pub(crate) fn remapped_slice(prim: &Primitive, map: &Matrix3<f64>, l: usize, x: f64, big_h: i64) -> Vec<C64> {
    match prim {
        Primitive::Box { width } => remapped_box_slice(width, map, l, x, big_h),
        Primitive::Ellipsoid { diam } => remapped_ellipsoid_slice(diam, map, l, x, big_h),
        Primitive::Empty => vec![C64::new(0.0, 0.0); ((2 * big_h + 1) * (2 * big_h + 1)) as usize],
    }
}

/// Breakpoints of the remapped primitive along x_l, in [0, 1].
pub(crate) fn remapped_breakpoints(prim: &Primitive, map: &Matrix3<f64>, inv: &Matrix3<f64>, l: usize) -> Vec<f64> {
    let det = map.determinant().abs().round().max(1.0) as i64;
    let mut out = Vec::new();
    let c = Vector3::new(0.5, 0.5, 0.5);
    let mut push = |v: f64| out.push(v.rem_euclid(1.0));
    for m0 in 0..det {
        for m1 in 0..det {
            for m2 in 0..det {
                let m = Vector3::new(m0 as f64, m1 as f64, m2 as f64);
                match prim {
                    Primitive::Box { width } => {
                        for corner in 0..8 {
                            let off = Vector3::from_fn(|i, _| {
                                let s = if corner >> i & 1 == 1 { 0.5 } else { -0.5 };
                                s * width[i]
                            });
                            push((inv * (c + off + m))[l]);
                        }
                    }
                    Primitive::Ellipsoid { diam } => {
                        let qinv = Matrix3::from_diagonal(&Vector3::from_fn(|i, _| diam[i] * diam[i] / 4.0));
                        let ext = (inv * qinv * inv.transpose())[(l, l)].sqrt();
                        let center = (inv * (c + m))[l];
                        push(center - ext);
                        push(center + ext);
                    }
                    Primitive::Empty => {}
                }
            }
        }
    }
    out
}

type Poly = Vec<Vector2<f64>>;

/// Keeps the part of `poly` where n·u ≥ c.
fn clip(poly: &Poly, n: &Vector2<f64>, c: f64) -> Poly {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let fp = n.dot(&p) - c;
        let fq = n.dot(&q) - c;
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

fn poly_area(poly: &Poly) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += p.x * q.y - q.x * p.y;
    }
    s / 2.0
}

/// ∫_P e^{−ik·u} du for a counter-clockwise polygon, via the divergence
/// theorem edge by edge.
fn polygon_ft(poly: &Poly, k: &Vector2<f64>, area: f64) -> C64 {
    let k2 = k.norm_squared();
    if k2 == 0.0 {
        return C64::from(area);
    }
    let mut s = C64::new(0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let e = poly[(i + 1) % poly.len()] - p;
        let z = k.dot(&e);
        let phi = if z.abs() < 1e-8 {
            C64::new(1.0, -z / 2.0)
        } else {
            (C64::from(1.0) - C64::from_polar(1.0, -z)) / C64::new(0.0, z)
        };
        s += C64::from(k.x * e.y - k.y * e.x) * C64::from_polar(1.0, -k.dot(&p)) * phi;
    }
    s * C64::new(0.0, 1.0 / k2)
}

fn remapped_box_slice(width: &[f64; 3], map: &Matrix3<f64>, l: usize, x: f64, big_h: i64) -> Vec<C64> {
    let side = (2 * big_h + 1) as usize;
    let mut out = vec![C64::new(0.0, 0.0); side * side];
    let (a, b) = transverse_axes(l);
    let square: Poly = vec![
        Vector2::new(0.0, 0.0),
        Vector2::new(1.0, 0.0),
        Vector2::new(1.0, 1.0),
        Vector2::new(0.0, 1.0),
    ];
    // Strip i: lo_i ≤ α_i·u + β_i − n_i ≤ hi_i.
    let mut ranges = Vec::with_capacity(3);
    for i in 0..3 {
        let alpha = Vector2::new(map[(i, a)], map[(i, b)]);
        let beta = map[(i, l)] * x;
        let lo = 0.5 - width[i] / 2.0;
        let hi = 0.5 + width[i] / 2.0;
        let corners = [0.0, alpha.x, alpha.y, alpha.x + alpha.y];
        let lmin = corners.iter().cloned().fold(f64::INFINITY, f64::min) + beta;
        let lmax = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + beta;
        let n_lo = (lmin - hi).ceil() as i64;
        let n_hi = (lmax - lo).floor() as i64;
        ranges.push((alpha, beta, lo, hi, n_lo, n_hi));
    }
    let mut pieces: Vec<(Poly, f64)> = Vec::new();
    let (r0, r1, r2) = (&ranges[0], &ranges[1], &ranges[2]);
    for n0 in r0.4..=r0.5 {
        for n1 in r1.4..=r1.5 {
            for n2 in r2.4..=r2.5 {
                let mut poly = square.clone();
                for (r, n) in [(r0, n0), (r1, n1), (r2, n2)] {
                    let (alpha, beta, lo, hi, _, _) = *r;
                    let shift = n as f64 - beta;
                    poly = clip(&poly, &alpha, lo + shift);
                    if poly.len() < 3 {
                        break;
                    }
                    poly = clip(&poly, &(-alpha), -(hi + shift));
                    if poly.len() < 3 {
                        break;
                    }
                }
                if poly.len() >= 3 {
                    let area = poly_area(&poly);
                    if area > 1e-15 {
                        pieces.push((poly, area));
                    }
                }
            }
        }
    }
    for (i, ga) in (-big_h..=big_h).enumerate() {
        for (j, gb) in (-big_h..=big_h).enumerate() {
            let k = Vector2::new(2.0 * PI * ga as f64, 2.0 * PI * gb as f64);
            out[i * side + j] = pieces.iter().map(|(p, area)| polygon_ft(p, &k, *area)).sum();
        }
    }
    out
}

fn remapped_ellipsoid_slice(diam: &[f64; 3], map: &Matrix3<f64>, l: usize, x: f64, big_h: i64) -> Vec<C64> {
    let side = (2 * big_h + 1) as usize;
    let mut out = vec![C64::new(0.0, 0.0); side * side];
    if diam.iter().any(|d| *d <= 0.0) {
        return out;
    }
    let (a, b) = transverse_axes(l);
    let q = Matrix3::from_diagonal(&Vector3::from_fn(|i, _| 4.0 / (diam[i] * diam[i])));
    let pa: Vector3<f64> = map.column(a).into();
    let pb: Vector3<f64> = map.column(b).into();
    let pl: Vector3<f64> = map.column(l).into();
    let m2 = Matrix2::new(
        pa.dot(&(q * pa)),
        pa.dot(&(q * pb)),
        pb.dot(&(q * pa)),
        pb.dot(&(q * pb)),
    );
    let m2inv = m2.try_inverse().expect("remap matrix is invertible");
    let sqrt_det = m2.determinant().sqrt();
    // Range of integer translates m whose image can meet the slice.
    let reach = diam.iter().cloned().fold(0.0, f64::max) / 2.0 + 1.0;
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for corner in 0..8 {
        let u = Vector3::from_fn(|i, _| if corner >> i & 1 == 1 { 1.0 } else { 0.0 });
        let y = map * u;
        for i in 0..3 {
            lo[i] = lo[i].min((y[i] - 0.5 - reach).floor() as i64);
            hi[i] = hi[i].max((y[i] - 0.5 + reach).ceil() as i64);
        }
    }
    let c = Vector3::new(0.5, 0.5, 0.5);
    let mut images: Vec<(Vector2<f64>, f64)> = Vec::new();
    for m0 in lo[0]..=hi[0] {
        for m1 in lo[1]..=hi[1] {
            for m2i in lo[2]..=hi[2] {
                let m = Vector3::new(m0 as f64, m1 as f64, m2i as f64);
                let w = pl * x - c - m;
                let h = Vector2::new(pa.dot(&(q * w)), pb.dot(&(q * w)));
                let center = -(m2inv * h);
                if !(0.0..1.0).contains(&center.x) || !(0.0..1.0).contains(&center.y) {
                    continue;
                }
                let q0 = w.dot(&(q * w)) - h.dot(&(m2inv * h));
                if q0 < 1.0 {
                    images.push((center, 1.0 - q0));
                }
            }
        }
    }
    for (i, ga) in (-big_h..=big_h).enumerate() {
        for (j, gb) in (-big_h..=big_h).enumerate() {
            let k = Vector2::new(2.0 * PI * ga as f64, 2.0 * PI * gb as f64);
            let rho = k.dot(&(m2inv * k)).sqrt();
            let mut s = C64::new(0.0, 0.0);
            for (center, r2) in &images {
                let r = r2.sqrt();
                s += C64::from_polar(PI * r2 / sqrt_det * jinc(r * rho), -k.dot(center));
            }
            out[i * side + j] = s;
        }
    }
    out
}
