//! Method-of-lines integration of `du/dt = L_h u + f`, `u(0) = g`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DataSet, FieldExpr, GridFunction, SampledField};
use crate::operator::{Evaluator, Scheme};
use crate::validate::{ValidationReport, Witness};

/// Uniform time grid with an integer number of steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    t_final: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Smallest number of equal steps no longer than `dt_max` covering `[0, t_final]`.
    pub fn new(t_final: f64, dt_max: f64) -> Result<Self> {
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time must be >= 0 (got {t_final})"
            )));
        }
        if !(dt_max > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be > 0 (got {dt_max})")));
        }
        if t_final == 0.0 {
            return Ok(Self {
                t_final,
                dt: 0.0,
                steps: 0,
            });
        }
        let steps = if dt_max.is_finite() {
            ((t_final / dt_max) * (1.0 - 1e-14)).ceil().max(1.0) as usize
        } else {
            1
        };
        Ok(Self::with_steps(t_final, steps))
    }

    pub fn with_steps(t_final: f64, steps: usize) -> Self {
        let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
        Self { t_final, dt, steps }
    }

    /// Default step `min(cfl_bound, h²/4)`.
    pub fn default_for(scheme: &Scheme, t_final: f64) -> Result<Self> {
        let h = scheme.h();
        let bound = cfl_bound(
            scheme,
            &crate::fields::time_samples(t_final, crate::fields::TIME_SAMPLES),
        );
        Self::new(t_final, bound.min(h * h / 4.0))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps {
            self.t_final
        } else {
            step as f64 * self.dt
        }
    }

    /// Step index closest to `t` (clamped to the grid).
    pub fn nearest_step(&self, t: f64) -> usize {
        if self.steps == 0 {
            return 0;
        }
        ((t / self.dt).round().max(0.0) as usize).min(self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            _ => Err(Error::InvalidArgument(format!("unknown integrator '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParabolicSolution {
    pub final_state: GridFunction,
    /// `(time, state)` pairs in increasing time order.
    pub snapshots: Vec<(f64, GridFunction)>,
    pub integrator: Integrator,
    pub grid: TimeGrid,
}

/// `1 / (h⁻² Σ_λ sup χ_λ + sup c)` over the given times; `+∞` if the denominator vanishes.
pub fn cfl_bound(scheme: &Scheme, t_samples: &[f64]) -> f64 {
    let h = scheme.h();
    let mut worst: f64 = 0.0;
    for &t in t_samples {
        let grids = scheme.sample(t);
        let rates: f64 = grids.rates(h).iter().map(|g| g.max().max(0.0)).sum();
        worst = worst.max(rates / (h * h) + grids.c.max().max(0.0));
    }
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Integrate from `u(0) = g` to `t_final`, recording states at the steps
/// nearest to each requested snapshot time.
pub fn solve_parabolic(
    scheme: &Scheme,
    data: &DataSet,
    grid: &TimeGrid,
    integrator: Integrator,
    snapshot_times: &[f64],
) -> Result<ParabolicSolution> {
    if integrator == Integrator::Euler && grid.steps() > 0 {
        let times = crate::fields::time_samples(grid.t_final(), crate::fields::TIME_SAMPLES);
        let bound = cfl_bound(scheme, &times);
        if grid.dt() > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt: grid.dt(), bound });
        }
    }
    let lat = *scheme.lattice();
    let mut u = data.g.sample(0.0, &lat).into_values();
    let mut wanted: Vec<(usize, f64)> = snapshot_times.iter().map(|&t| (grid.nearest_step(t), t)).collect();
    wanted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    wanted.dedup_by_key(|w| w.0);
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let mut record = |step: usize, u: &[f64], snaps: &mut Vec<(f64, GridFunction)>| {
        while let Some(&&(s, _)) = next.peek() {
            if s != step {
                break;
            }
            snaps.push((grid.time(step), GridFunction::from_vec_unchecked(lat, u.to_vec())));
            next.next();
        }
    };
    record(0, &u, &mut snapshots);

    let mut ev = Evaluator::new(scheme, &data.f);
    let len = u.len();
    let dt = grid.dt();
    let mut k1 = vec![0.0; len];
    let (mut k2, mut k3, mut k4, mut tmp) = match integrator {
        Integrator::Rk4 => (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]),
        Integrator::Euler => (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
    };
    for step in 0..grid.steps() {
        let t = grid.time(step);
        match integrator {
            Integrator::Euler => {
                ev.rhs(t, &u, &mut k1);
                for (ui, ki) in u.iter_mut().zip(&k1) {
                    *ui += dt * ki;
                }
            }
            Integrator::Rk4 => {
                let half = 0.5 * dt;
                ev.rhs(t, &u, &mut k1);
                axpy_into(&mut tmp, &u, half, &k1);
                ev.rhs(t + half, &tmp, &mut k2);
                axpy_into(&mut tmp, &u, half, &k2);
                ev.rhs(t + half, &tmp, &mut k3);
                axpy_into(&mut tmp, &u, dt, &k3);
                ev.rhs(t + dt, &tmp, &mut k4);
                let w = dt / 6.0;
                for i in 0..len {
                    u[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: step + 1,
                time: grid.time(step + 1),
            });
        }
        record(step + 1, &u, &mut snapshots);
    }
    Ok(ParabolicSolution {
        final_state: GridFunction::from_vec_unchecked(lat, u),
        snapshots,
        integrator,
        grid: *grid,
    })
}

fn axpy_into(out: &mut [f64], base: &[f64], a: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + a * d;
    }
}

/// Check `sup u(t) <= sup g₊ + sup_{[0,t]} sup f₊ / reaction_floor` at every snapshot and
/// at the final time, plus `u >= 0` when `f, g >= 0` at the nodes.
pub fn verify_max_principle(
    run: &ParabolicSolution,
    scheme: &Scheme,
    data: &DataSet,
    reaction_floor: f64,
) -> Result<ValidationReport> {
    if !(reaction_floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reaction_floor must be positive (got {reaction_floor})"
        )));
    }
    let lat = *scheme.lattice();
    let g = data.g.sample(0.0, &lat);
    let g_plus = g.max().max(0.0);
    let f_field = SampledField::new(&data.f, &lat);

    let mut states: Vec<(f64, &GridFunction)> = run.snapshots.iter().map(|(t, u)| (*t, u)).collect();
    states.push((run.grid.t_final(), &run.final_state));
    states.sort_by(|a, b| a.0.total_cmp(&b.0));

    // running sup of f₊ and min of f over the step times
    let mut buf = vec![0.0; lat.len()];
    let mut f_plus: f64 = 0.0;
    let mut f_min = f64::INFINITY;
    let mut step = 0usize;
    let mut advance_to = |t: f64, f_plus: &mut f64, f_min: &mut f64| {
        while step <= run.grid.steps() && run.grid.time(step) <= t * (1.0 + 1e-14) + 1e-300 {
            f_field.fill(run.grid.time(step), &mut buf);
            for &v in &buf {
                *f_plus = f_plus.max(v);
                *f_min = f_min.min(v);
            }
            step += 1;
            if f_field.is_static() {
                // a static field needs one evaluation
                step = run.grid.steps() + 1;
            }
        }
    };

    let nonnegative_data = g.min() >= 0.0;
    let mut margin = f64::INFINITY;
    let mut scale: f64 = 1.0;
    let mut witness = Witness::default();
    for (t, u) in states {
        advance_to(t, &mut f_plus, &mut f_min);
        let bound = g_plus + f_plus / reaction_floor;
        scale = scale.max(bound.abs());
        let i = u.argmax();
        let slack = bound - u.values()[i];
        if slack < margin {
            margin = slack;
            witness =
                Witness::at_node(&lat, i, t).with_detail(format!("sup u = {:e}, bound = {bound:e}", u.values()[i]));
        }
        if nonnegative_data && f_min >= 0.0 {
            let j = u.argmin();
            let low = u.values()[j];
            if low < margin {
                margin = low;
                witness = Witness::at_node(&lat, j, t).with_detail(format!("u = {low:e} < 0 with f, g >= 0"));
            }
        }
    }
    let tolerance = 1e-12 * scale;
    Ok(ValidationReport::new("max_principle", margin, tolerance, witness))
}

/// Write a grid function as CSV to `path`.
pub fn write_snapshot(u: &GridFunction, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    u.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Closed-form reference for a manufactured run, sampled at `t`.
pub fn exact_at(u0: &FieldExpr, t: f64, scheme: &Scheme) -> GridFunction {
    u0.sample(t, scheme.lattice())
}
