//! Dormand–Prince 5(4) with PI step-size control and 5th-order dense output.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants.
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

const MAX_STEPS: usize = 10_000_000;

/// Tolerances for [`solve`].
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

/// Integrate `dz/dt = f(z)` from `t0` with `z0`, calling `sample(t, z)` at
/// each requested output time in `times` (ascending, all in `[t0, t1]`).
pub fn solve<F, S>(
    mut f: F,
    z0: &[f64],
    t0: f64,
    t1: f64,
    times: &[f64],
    tol: &Tolerances,
    mut sample: S,
) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
    S: FnMut(f64, &[f64]),
{
    let n = z0.len();
    let mut y = z0.to_vec();
    let mut y1 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut k = [(); 7].map(|_| vec![0.0; n]);
    let mut rc = [(); 5].map(|_| vec![0.0; n]);
    let mut out = vec![0.0; n];
    let mut next = 0;
    while next < times.len() && times[next] <= t0 {
        sample(times[next], &y);
        next += 1;
    }

    f(&y, &mut k[0]);
    check(&k[0], t0)?;
    let max_step = tol.max_step.min(t1 - t0);
    let (k0, rest) = k.split_at_mut(1);
    let mut h = initial_step(&mut f, &y, &k0[0], t0, t1, tol, &mut rest[0], &mut ys)?.min(max_step);
    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0;

    while t < t1 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Integration {
                t,
                reason: "too many steps".into(),
            });
        }
        if 0.1 * h.abs() <= t.abs() * f64::EPSILON {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        stage(&mut ys, &y, h, &[(A21, &k[0])]);
        f(&ys, &mut k[1]);
        stage(&mut ys, &y, h, &[(A31, &k[0]), (A32, &k[1])]);
        f(&ys, &mut k[2]);
        stage(&mut ys, &y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        f(&ys, &mut k[3]);
        stage(&mut ys, &y, h, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
        f(&ys, &mut k[4]);
        stage(
            &mut ys,
            &y,
            h,
            &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
        );
        f(&ys, &mut k[5]);
        stage(
            &mut y1,
            &y,
            h,
            &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])],
        );
        f(&y1, &mut k[6]);
        check(&k[6], t + h)?;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sk = tol.atol + tol.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sk).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Integration {
                t,
                reason: "non-finite error estimate".into(),
            });
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            facold = err.max(1e-4);
            let t_new = if last { t1 } else { t + h };

            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rc[0][i] = y[i];
                rc[1][i] = ydiff;
                rc[2][i] = bspl;
                rc[3][i] = ydiff - h * k[6][i] - bspl;
                rc[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            while next < times.len() && times[next] <= t_new {
                let theta = (times[next] - t) / h;
                let theta1 = 1.0 - theta;
                for i in 0..n {
                    out[i] = rc[0][i]
                        + theta * (rc[1][i] + theta1 * (rc[2][i] + theta * (rc[3][i] + theta1 * rc[4][i])));
                }
                sample(times[next], &out);
                next += 1;
            }

            y.copy_from_slice(&y1);
            k.swap(0, 6);
            t = t_new;
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            h = h_new.min(max_step);
            last_rejected = false;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Ok(())
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (a, k) in terms {
            s += a * k[i];
        }
        *o = y[i] + h * s;
    }
}

fn check(dz: &[f64], t: f64) -> Result<()> {
    if dz.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration {
            t,
            reason: "non-finite state".into(),
        })
    }
}

/// Starting step size from the size of the solution and its derivatives.
#[allow(clippy::too_many_arguments)]
fn initial_step<F: FnMut(&[f64], &mut [f64])>(
    f: &mut F,
    y: &[f64],
    f0: &[f64],
    t0: f64,
    t1: f64,
    tol: &Tolerances,
    f1: &mut [f64],
    y1: &mut [f64],
) -> Result<f64> {
    let n = y.len() as f64;
    let sk = |i: usize| tol.atol + tol.rtol * y[i].abs();
    let dnf: f64 = f0.iter().enumerate().map(|(i, v)| (v / sk(i)).powi(2)).sum::<f64>() / n;
    let dny: f64 = y.iter().enumerate().map(|(i, v)| (v / sk(i)).powi(2)).sum::<f64>() / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(tol.max_step).min(t1 - t0);
    for i in 0..y.len() {
        y1[i] = y[i] + h * f0[i];
    }
    f(y1, f1);
    check(f1, t0 + h)?;
    let der2: f64 = (0..y.len())
        .map(|i| ((f1[i] - f0[i]) / sk(i)).powi(2))
        .sum::<f64>();
    let der2 = (der2 / n).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(tol.max_step))
}
