//! Powell's conjugate-direction minimizer with bracketed Brent line searches.
//!
//! Follows the classic direction-set scheme: line-minimize along each
//! direction in turn, then replace the direction of largest decrease by the
//! net displacement when the extrapolation test allows it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLD: f64 = 1.618_034;
const CGOLD: f64 = 0.381_966_0;
const GLIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const ZEPS: f64 = 1e-10;
const BRENT_MAX_ITER: usize = 100;
const BRACKET_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowellOptions {
    /// Relative decrease below which an iteration counts as converged.
    pub ftol: f64,
    pub max_iter: usize,
    /// Relative tolerance of each Brent line search.
    pub line_tol: f64,
    /// Largest single bracket-expansion step.
    pub max_step: f64,
}

impl Default for PowellOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-4,
            max_iter: 100,
            line_tol: 1e-4,
            max_step: TAU,
        }
    }
}

impl PowellOptions {
    pub fn validate(&self) -> Result<()> {
        // negated so NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.ftol >= 0.0) || !(self.line_tol > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig(format!("bad Powell tolerances: {self:?}")));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("Powell max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Objective<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Objective<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let value = (self.f)(x);
        self.evaluations += 1;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective {
                value,
                evaluation: self.evaluations,
            });
        }
        Ok(value)
    }

    fn along(&mut self, p: &[f64], dir: &[f64], t: f64, buf: &mut Vec<f64>) -> Result<f64> {
        buf.clear();
        buf.extend(p.iter().zip(dir).map(|(pi, di)| pi + t * di));
        let x = std::mem::take(buf);
        let v = self.eval(&x);
        *buf = x;
        v
    }
}

/// Minimize `f` from `x0`. Returns the best point found and its value, which
/// is never above `f(x0)`.
pub fn powell_minimize<F>(f: F, x0: &[f64], opts: &PowellOptions) -> Result<PowellResult>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot minimize over zero dimensions".into()));
    }
    let mut obj = Objective { f, evaluations: 0 };
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })
        .collect();
    let mut p = x0.to_vec();
    let mut fret = obj.eval(&p)?;
    let mut pt = p.clone();
    let mut iterations = 0;
    let mut buf = Vec::with_capacity(n);

    loop {
        let fp = fret;
        let mut ibig = 0;
        let mut del = 0.0;
        for (i, dir) in dirs.iter_mut().enumerate() {
            let before = fret;
            fret = line_minimize(&mut obj, &mut p, dir, fret, opts, &mut buf)?;
            if before - fret > del {
                del = before - fret;
                ibig = i;
            }
        }
        iterations += 1;
        if fp - fret <= opts.ftol * (fp.abs() + fret.abs()) / 2.0 + 1e-12 {
            return Ok(PowellResult {
                x: p,
                fx: fret,
                iterations,
                evaluations: obj.evaluations,
                converged: true,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(PowellResult {
                x: p,
                fx: fret,
                iterations,
                evaluations: obj.evaluations,
                converged: false,
            });
        }
        let extrapolated: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| 2.0 * a - b).collect();
        let mut net: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| a - b).collect();
        pt.clone_from(&p);
        let fptt = obj.eval(&extrapolated)?;
        if fptt < fp {
            let t = 2.0 * (fp - 2.0 * fret + fptt) * (fp - fret - del).powi(2)
                - del * (fp - fptt).powi(2);
            if t < 0.0 {
                fret = line_minimize(&mut obj, &mut p, &mut net, fret, opts, &mut buf)?;
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = net;
            }
        }
    }
}

/// Minimize along `dir` from `p` (where the value is `f0`). On improvement,
/// moves `p` and rescales `dir` by the step taken; otherwise leaves both alone.
fn line_minimize<F: FnMut(&[f64]) -> f64>(
    obj: &mut Objective<F>,
    p: &mut [f64],
    dir: &mut [f64],
    f0: f64,
    opts: &PowellOptions,
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let mut f1d = |t: f64| obj.along(p, dir, t, buf);
    let bracket = bracket_minimum(&mut f1d, 0.0, 1.0, f0, opts.max_step)?;
    let (t, ft) = brent(&mut f1d, bracket, opts.line_tol)?;
    if ft < f0 && t != 0.0 {
        for (pi, di) in p.iter_mut().zip(dir.iter_mut()) {
            *di *= t;
            *pi += *di;
        }
        Ok(ft)
    } else {
        Ok(f0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Bracket {
    a: f64,
    b: f64,
    c: f64,
    fb: f64,
}

/// Downhill bracket search from `a` and `b`, with parabolic extrapolation
/// capped at `GLIMIT` times the current interval and at `max_step` per move.
fn bracket_minimum<G: FnMut(f64) -> Result<f64>>(
    f: &mut G,
    mut a: f64,
    mut b: f64,
    fa0: f64,
    max_step: f64,
) -> Result<Bracket> {
    let mut fa = fa0;
    let mut fb = f(b)?;
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let cap = |from: f64, to: f64| from + (to - from).clamp(-max_step, max_step);
    let mut c = cap(b, b + GOLD * (b - a));
    let mut fc = f(c)?;
    let mut rounds = 0;
    while fb > fc && rounds < BRACKET_MAX_ITER {
        rounds += 1;
        let r = (b - a) * (fb - fc);
        let q = (b - c) * (fb - fa);
        let denom = 2.0 * (q - r).abs().max(TINY).copysign(q - r);
        let mut u = b - ((b - c) * q - (b - a) * r) / denom;
        let ulim = cap(b, b + GLIMIT * (c - b));
        let fu;
        if (b - u) * (u - c) > 0.0 {
            let fu_try = f(u)?;
            if fu_try < fc {
                return Ok(Bracket { a: b, b: u, c, fb: fu_try });
            } else if fu_try > fb {
                return Ok(Bracket { a, b, c: u, fb });
            }
            u = cap(c, c + GOLD * (c - b));
            fu = f(u)?;
        } else if (c - u) * (u - ulim) > 0.0 {
            let fu_try = f(u)?;
            if fu_try < fc {
                b = c;
                c = u;
                u = cap(c, c + GOLD * (c - b));
                fb = fc;
                fc = fu_try;
                fu = f(u)?;
            } else {
                fu = fu_try;
            }
        } else if (u - ulim) * (ulim - c) >= 0.0 {
            u = ulim;
            fu = f(u)?;
        } else {
            u = cap(c, c + GOLD * (c - b));
            fu = f(u)?;
        }
        a = b;
        b = c;
        c = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    let _ = fa;
    Ok(Bracket { a, b, c, fb })
}

/// Brent's parabolic/golden-section minimizer inside a bracket whose middle
/// point value is already known.
fn brent<G: FnMut(f64) -> Result<f64>>(f: &mut G, br: Bracket, tol: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = if br.a < br.c { (br.a, br.c) } else { (br.c, br.a) };
    let (mut x, mut w, mut v) = (br.b, br.b, br.b);
    let (mut fx, mut fw, mut fv) = (br.fb, br.fb, br.fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..BRENT_MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x) {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            } else {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
            }
        } else {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2);
        let r = powell_minimize(f, &[0.0, 0.0], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] + 2.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = powell_minimize(f, &[-1.2, 1.0], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-2 && (r.x[1] - 1.0).abs() < 1e-2, "{r:?}");
        assert!(r.iterations <= 50, "{r:?}");
    }

    #[test]
    fn constant_objective_stops_after_one_iteration() {
        let r = powell_minimize(|_: &[f64]| 3.5, &[0.3, 0.7, 1.1], &PowellOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![0.3, 0.7, 1.1]);
        assert_eq!(r.fx, 3.5);
        assert!(r.converged);
    }

    #[test]
    fn non_finite_value_aborts() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        assert!(matches!(
            powell_minimize(f, &[0.0], &PowellOptions::default()),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn never_worse_than_start_on_noisy_objective() {
        use rand::Rng;
        let mut rng = crate::seed::rng(3);
        let mut f0 = None;
        let f = |x: &[f64]| {
            let v = x.iter().map(|a| a.sin()).sum::<f64>() + rng.gen_range(-0.3..0.3);
            f0.get_or_insert(v);
            v
        };
        let r = powell_minimize(f, &[1.0, 2.0, 3.0], &PowellOptions::default()).unwrap();
        assert!(r.fx <= f0.unwrap());
    }

    #[test]
    fn periodic_objective_finds_a_trough() {
        let f = |x: &[f64]| x.iter().map(|a| a.cos()).sum::<f64>();
        let r = powell_minimize(f, &[0.3; 6], &PowellOptions::default()).unwrap();
        assert!((r.fx + 6.0).abs() < 1e-6, "{r:?}");
    }
}
