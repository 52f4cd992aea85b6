use faer::linalg::solvers::Solve;
use faer::{c64, Scale};

use super::system::MmSystem;
use crate::error::{Error, Result};
use crate::linalg::{expm, identity, is_finite, CMat};

/// ‖R‖ above this multiple of ‖R(0)‖ is treated as divergence.
pub const DIVERGENCE_GROWTH: f64 = 1e12;

/// Offset used to evaluate coefficients just inside a segment so that a
/// jump at a breakpoint is seen from the correct side.
const INSIDE: f64 = 1e-11;

/// One breakpoint-free interval with its number of uniform steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Segment {
    pub fn h(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    /// Grid point k of a grid clustered at both ends,
    /// x = start + L(1 − cos(πk/steps))/2. Square-root behaviour of the
    /// section at an endpoint (the pole of a curved inclusion) becomes smooth
    /// in k.
    pub fn graded(&self, k: usize) -> f64 {
        if k == self.steps {
            return self.end;
        }
        let t = std::f64::consts::PI * k as f64 / self.steps as f64;
        self.start + 0.5 * (self.end - self.start) * (1.0 - t.cos())
    }

    /// Clamps an abscissa into the open interval.
    fn inside(&self, x: f64) -> f64 {
        if self.end - self.start <= 2.0 * INSIDE {
            return 0.5 * (self.start + self.end);
        }
        x.clamp(self.start + INSIDE, self.end - INSIDE)
    }
}

/// Splits [0, 1] at the breakpoints and distributes `steps` proportionally
/// to segment length, at least `min_steps` per segment.
pub fn segments(breakpoints: &[f64], steps: usize, min_steps: usize) -> Vec<Segment> {
    let mut edges = vec![0.0];
    edges.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < 1.0));
    edges.push(1.0);
    edges
        .windows(2)
        .map(|w| {
            let n = ((w[1] - w[0]) * steps as f64).round() as usize;
            Segment {
                start: w[0],
                end: w[1],
                steps: n.max(min_steps),
            }
        })
        .collect()
}

/// Riccati right-hand side −R Q0 (I + αR) = −P − αPR with P = RQ0.
fn riccati(r: &CMat, q: &CMat, alpha: c64) -> CMat {
    let p = r * q;
    let pr = &p * r;
    -(p + pr * Scale(alpha))
}

/// R_α(1) = (M0(1) − αI)⁻¹ by classical RK4 on
/// R′ = −R Q0 (I + αR), R(0) = (1 − α)⁻¹ I, with steps aligned to the
/// breakpoints of the cell along the integration axis.
pub fn integrate_resolvent(sys: &MmSystem, alpha: c64, steps: usize) -> Result<CMat> {
    if (alpha - c64::new(1.0, 0.0)).norm() < 1e-12 {
        return Err(Error::InvalidArgument("the shift α must differ from 1".into()));
    }
    let n = 2 * sys.half_side();
    let mut r = identity(n) * Scale(c64::new(1.0, 0.0) / (c64::new(1.0, 0.0) - alpha));
    let r0 = r.norm_l2();
    for seg in segments(sys.breakpoints(), steps, 1) {
        let h = seg.h();
        let hh = c64::new(h, 0.0);
        let half = c64::new(0.5 * h, 0.0);
        let mut q_start = sys.q0(seg.inside(seg.start))?;
        for k in 0..seg.steps {
            let x = seg.start + k as f64 * h;
            let q_mid = sys.q0(seg.inside(x + 0.5 * h))?;
            let q_end = sys.q0(seg.inside(x + h))?;
            let k1 = riccati(&r, &q_start, alpha);
            let k2 = riccati(&(&r + &k1 * Scale(half)), &q_mid, alpha);
            let k3 = riccati(&(&r + &k2 * Scale(half)), &q_mid, alpha);
            let k4 = riccati(&(&r + &k3 * Scale(hh)), &q_end, alpha);
            r += (k1 + k2 * Scale(c64::new(2.0, 0.0)) + k3 * Scale(c64::new(2.0, 0.0)) + k4)
                * Scale(c64::new(h / 6.0, 0.0));
            let growth = r.norm_l2() / r0;
            if !(growth <= DIVERGENCE_GROWTH) {
                return Err(Error::Divergence {
                    x: x + h,
                    growth,
                    alpha,
                });
            }
            q_start = q_end;
        }
    }
    Ok(r)
}

fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// exp(Ω) over [x, x + h] with the sixth-order Magnus expansion on three
/// Gauss–Legendre nodes (Blanes, Casas and Ros form).
fn magnus_step(sys: &MmSystem, seg: &Segment, x: f64, h: f64) -> Result<CMat> {
    let d = 15f64.sqrt() / 10.0;
    let q1 = sys.q0(seg.inside(x + (0.5 - d) * h))?;
    let q2 = sys.q0(seg.inside(x + 0.5 * h))?;
    let q3 = sys.q0(seg.inside(x + (0.5 + d) * h))?;
    let r = |v: f64| Scale(c64::new(v, 0.0));
    let a1 = &q2 * r(h);
    let a2 = (&q3 - &q1) * r(15f64.sqrt() * h / 3.0);
    let a3 = (&q3 - &q2 * r(2.0) + &q1) * r(10.0 * h / 3.0);
    let c1 = commutator(&a1, &a2);
    let c2 = commutator(&a1, &(&a3 * r(2.0) + &c1)) * r(-1.0 / 60.0);
    let lhs = &a1 * r(-20.0) - &a3 + &c1;
    let rhs = &a2 + &c2;
    let omega = a1 + &a3 * r(1.0 / 12.0) + commutator(&lhs, &rhs) * r(1.0 / 240.0);
    Ok(expm(omega.as_ref()))
}

/// R_α(1) by sixth-order Magnus steps applied to the resolvent as a Möbius map:
/// with M ← E M, R = (M − α)⁻¹ becomes R (E + α(E − I)R)⁻¹. Exact for
/// coefficients constant between breakpoints and unconditionally stable,
/// unlike RK4 whose step must satisfy h·ρ(Q0) ≲ 2.8.
pub fn integrate_resolvent_magnus(sys: &MmSystem, alpha: c64, steps: usize) -> Result<CMat> {
    if (alpha - c64::new(1.0, 0.0)).norm() < 1e-12 {
        return Err(Error::InvalidArgument("the shift α must differ from 1".into()));
    }
    let n = 2 * sys.half_side();
    let mut r = identity(n) * Scale(c64::new(1.0, 0.0) / (c64::new(1.0, 0.0) - alpha));
    let r0 = r.norm_l2();
    for seg in segments(sys.breakpoints(), steps, 1) {
        // Constant coefficients: one propagator serves every uniform step.
        let fixed = if sys.piecewise_constant() {
            let q = sys.q0(seg.inside(0.5 * (seg.start + seg.end)))?;
            Some(expm((&q * Scale(c64::new(seg.h(), 0.0))).as_ref()))
        } else {
            None
        };
        for k in 0..seg.steps {
            let (x, h) = match fixed {
                Some(_) => (seg.start + k as f64 * seg.h(), seg.h()),
                None => (seg.graded(k), seg.graded(k + 1) - seg.graded(k)),
            };
            let step;
            let e = match &fixed {
                Some(e) => e,
                None => {
                    step = magnus_step(sys, &seg, x, h)?;
                    &step
                }
            };
            let x_mat = e + (e - identity(n)) * &r * Scale(alpha);
            // R X⁻¹ = (X⁻ᵀ Rᵀ)ᵀ.
            let next = x_mat.transpose().partial_piv_lu().solve(r.transpose());
            if !is_finite(next.as_ref()) {
                return Err(Error::Divergence {
                    x: x + h,
                    growth: f64::INFINITY,
                    alpha,
                });
            }
            r = next.transpose().to_owned();
            let growth = r.norm_l2() / r0;
            if !(growth <= DIVERGENCE_GROWTH) {
                return Err(Error::Divergence {
                    x: x + h,
                    growth,
                    alpha,
                });
            }
        }
    }
    Ok(r)
}

/// M0(1) as an ordered product of sixth-order Magnus steps, exact for
/// coefficients that are constant between breakpoints. Meant for small N;
/// the matricant grows exponentially with the truncation.
pub fn monodromy_direct(sys: &MmSystem, substeps: usize) -> Result<CMat> {
    let n = 2 * sys.half_side();
    let mut m = identity(n);
    for seg in segments(sys.breakpoints(), substeps, 1) {
        let h = seg.h();
        let fixed = if sys.piecewise_constant() {
            let q = sys.q0(seg.inside(0.5 * (seg.start + seg.end)))?;
            Some(expm((&q * Scale(c64::new(h, 0.0))).as_ref()))
        } else {
            None
        };
        for k in 0..seg.steps {
            let x = seg.start + k as f64 * h;
            m = match &fixed {
                Some(e) => e * &m,
                None => magnus_step(sys, &seg, x, h)? * &m,
            };
            let norm = m.norm_l2();
            if !is_finite(m.as_ref()) || norm > 1e150 {
                return Err(Error::MonodromyOverflow { norm });
            }
        }
    }
    Ok(m)
}

/// Ξ′ = Q0 Ξ integrated by RK4 on the breakpoint-aligned grid, with `visit`
/// called at every grid point (segment index, x, Ξ(x), Q0 parts at x from
/// inside the segment). Each segment gets an even number of steps.
pub(crate) fn propagate(
    sys: &MmSystem,
    xi0: &CMat,
    steps: usize,
    mut visit: impl FnMut(&Segment, usize, &CMat, &super::system::Q0Parts) -> Result<()>,
) -> Result<CMat> {
    let mut xi = xi0.clone();
    for mut seg in segments(sys.breakpoints(), steps, 2) {
        seg.steps += seg.steps % 2;
        let h = seg.h();
        let half = c64::new(0.5 * h, 0.0);
        let mut p_start = sys.parts(seg.inside(seg.start))?;
        visit(&seg, 0, &xi, &p_start)?;
        for k in 0..seg.steps {
            let x = seg.start + k as f64 * h;
            let q_mid = sys.q0(seg.inside(x + 0.5 * h))?;
            let p_end = sys.parts(seg.inside(x + h))?;
            let k1 = &p_start.q0 * &xi;
            let k2 = &q_mid * (&xi + &k1 * Scale(half));
            let k3 = &q_mid * (&xi + &k2 * Scale(half));
            let k4 = &p_end.q0 * (&xi + &k3 * Scale(c64::new(h, 0.0)));
            xi += (k1 + k2 * Scale(c64::new(2.0, 0.0)) + k3 * Scale(c64::new(2.0, 0.0)) + k4)
                * Scale(c64::new(h / 6.0, 0.0));
            visit(&seg, k + 1, &xi, &p_end)?;
            p_start = p_end;
        }
    }
    Ok(xi)
}
