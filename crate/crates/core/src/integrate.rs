//! Fixed-step classical Runge–Kutta integration of the ramped system.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{check_eps_t, ramped_rhs, PhaseState, SystemSpec};
use crate::ramp::RampSpec;

/// Default number of steps per `ε` time unit.
pub const DEFAULT_KAPPA: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationConfig {
    pub step: f64,
    pub direction: Direction,
    pub store_trajectory: bool,
}

impl IntegrationConfig {
    pub fn new(step: f64, direction: Direction) -> Self {
        IntegrationConfig {
            step,
            direction,
            store_trajectory: false,
        }
    }

    pub fn storing(mut self) -> Self {
        self.store_trajectory = true;
        self
    }
}

/// Integration output; without `store_trajectory` only the endpoints are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub eps: f64,
    pub t_ramp: f64,
}

impl Trajectory {
    pub fn first(&self) -> &PhaseState {
        &self.samples[0]
    }

    pub fn last(&self) -> &PhaseState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// CSV with header `t,q_1..q_D,p_1..p_D`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dim = self.first().q.len();
        let mut w = crate::report::csv_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("q_{i}")));
        header.extend((1..=dim).map(|i| format!("p_{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.q.iter().chain(&s.p).map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, eps: f64, t_ramp: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let dim = (r.headers()?.len() - 1) / 2;
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(s, "not a number")))
                .collect::<Result<Vec<_>>>()?;
            samples.push(PhaseState::new(
                vals[1..=dim].to_vec(),
                vals[dim + 1..].to_vec(),
                vals[0],
            ));
        }
        Ok(Trajectory {
            samples,
            eps,
            t_ramp,
        })
    }
}

/// `ε / κ`.
pub fn default_step(eps: f64, kappa: usize) -> f64 {
    eps / kappa.max(1) as f64
}

/// Number of steps and the nominal step from `t0` to `t1`; the last step is
/// shortened to land on `t1` exactly.
fn step_plan(t0: f64, t1: f64, dt: f64) -> usize {
    let span = (t1 - t0).abs();
    let ratio = span / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Classical RK4 on a flat real state from `t0` to `t1` (either order).
/// `on_sample` is called with every accepted state, including the initial one.
pub(crate) fn rk4_fixed<F, S>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    dt: f64,
    mut y: Vec<f64>,
    mut on_sample: S,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("step", format!("must be positive, got {dt}")));
    }
    on_sample(t0, &y);
    if t0 == t1 {
        return Ok(y);
    }
    let n = y.len();
    let steps = step_plan(t0, t1, dt);
    let signed = if t1 > t0 { dt } else { -dt };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let ta = t0 + step as f64 * signed;
        let tb = if step + 1 == steps {
            t1
        } else {
            t0 + (step + 1) as f64 * signed
        };
        let h = tb - ta;
        let tm = ta + 0.5 * h;
        rhs(ta, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(tm, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(tm, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(tb, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence { step, t: tb });
        }
        on_sample(tb, &y);
    }
    Ok(y)
}

/// Integrates the ramped system from `init` to the opposite end of `[0, T]`.
pub fn integrate_ramped(
    sys: &SystemSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    init: &PhaseState,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    check_eps_t(eps, t_ramp)?;
    sys.check_len(&init.q)?;
    sys.check_len(&init.p)?;
    if !init.is_finite() {
        return Err(Error::invalid("init", "initial state must be finite"));
    }
    let (expected_start, end) = match cfg.direction {
        Direction::Forward => (0.0, t_ramp),
        Direction::Backward => (t_ramp, 0.0),
    };
    if (init.t - expected_start).abs() > 1e-12 * t_ramp {
        return Err(Error::invalid(
            "init",
            format!(
                "{:?} integration must start at t = {expected_start}, got {}",
                cfg.direction, init.t
            ),
        ));
    }
    let d = sys.dim();
    let mut y = Vec::with_capacity(2 * d);
    y.extend_from_slice(&init.q);
    y.extend_from_slice(&init.p);
    let mut grad = vec![0.0; d];
    let mut samples = Vec::new();
    let store = cfg.store_trajectory;
    let to_state = |t: f64, y: &[f64]| PhaseState::new(y[..d].to_vec(), y[d..].to_vec(), t);
    let y_end = rk4_fixed(
        |t, y, dy| ramped_rhs(sys, ramp, eps, t_ramp, t, y, dy, &mut grad),
        expected_start,
        end,
        cfg.step,
        y,
        |t, y| {
            if store || samples.is_empty() {
                samples.push(to_state(t, y));
            }
        },
    )?;
    if !store {
        samples.push(to_state(end, &y_end));
    }
    Ok(Trajectory {
        samples,
        eps,
        t_ramp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;
    use crate::ramp::make_poly_ramp;
    use crate::vecops::{distance, norm};

    #[test]
    fn default_steps() {
        assert_eq!(default_step(0.1, 20), 0.005);
        assert_eq!(default_step(0.05, 10), 0.005);
        assert_eq!(default_step(0.0125, 20), 0.000625);
    }

    #[test]
    fn step_plan_lands_on_endpoint() {
        assert_eq!(step_plan(0.0, 1.0, 0.005), 200);
        assert_eq!(step_plan(1.0, 0.0, 0.3), 4);
        let mut ts = Vec::new();
        rk4_fixed(|_, _, dy| dy.fill(0.0), 0.0, 1.0, 0.3, vec![0.0], |t, _| ts.push(t)).unwrap();
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rotation_preserves_momentum_norm() {
        let sys = SystemSpec::new(2, PotentialSpec::Zero).unwrap();
        let eps = 0.1;
        let init = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0], 0.0);
        let cfg = IntegrationConfig::new(default_step(eps, DEFAULT_KAPPA), Direction::Forward);
        let traj = integrate_ramped(&sys, &make_poly_ramp(2), eps, 1.0, &init, &cfg).unwrap();
        assert!((norm(&traj.last().p) - 1.0).abs() < 1e-6);
        assert_eq!(traj.last().t, 1.0);
        assert_eq!(traj.samples.len(), 2);
    }

    #[test]
    fn round_trip_returns_initial_state() {
        let sys = SystemSpec::new(2, PotentialSpec::QuadQuartic { lambda: 1.0 }).unwrap();
        let ramp = make_poly_ramp(2);
        let eps = 0.1;
        let dt = default_step(eps, 200);
        let init = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0);
        let fwd = integrate_ramped(&sys, &ramp, eps, 1.0, &init, &IntegrationConfig::new(dt, Direction::Forward)).unwrap();
        let back = integrate_ramped(
            &sys,
            &ramp,
            eps,
            1.0,
            fwd.last(),
            &IntegrationConfig::new(dt, Direction::Backward),
        )
        .unwrap();
        let end = back.last();
        assert_eq!(end.t, 0.0);
        assert!(distance(&end.q, &init.q) < 1e-8);
        assert!(distance(&end.p, &init.p) < 1e-8);
    }

    #[test]
    fn stored_trajectory_is_monotone() {
        let sys = SystemSpec::new(2, PotentialSpec::Quadratic).unwrap();
        let init = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0);
        let cfg = IntegrationConfig::new(0.01, Direction::Backward).storing();
        let traj = integrate_ramped(&sys, &make_poly_ramp(1), 0.1, 1.0, &init, &cfg).unwrap();
        assert_eq!(traj.samples.len(), 101);
        assert!(traj.samples.windows(2).all(|w| w[1].t < w[0].t));
        assert_eq!(traj.last().t, 0.0);
    }

    #[test]
    fn wrong_start_time_is_rejected() {
        let sys = SystemSpec::new(2, PotentialSpec::Quadratic).unwrap();
        let init = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.5);
        let cfg = IntegrationConfig::new(0.01, Direction::Forward);
        assert!(integrate_ramped(&sys, &make_poly_ramp(1), 0.1, 1.0, &init, &cfg).is_err());
    }

    #[test]
    fn blow_up_reports_step() {
        // strongly repulsive quartic with a huge step
        let sys = SystemSpec::new(2, PotentialSpec::QuadQuartic { lambda: -50.0 }).unwrap();
        let init = PhaseState::new(vec![3.0, 0.0], vec![0.0, 0.0], 0.0);
        let cfg = IntegrationConfig::new(0.05, Direction::Forward);
        let err = integrate_ramped(&sys, &make_poly_ramp(0), 0.01, 1.0, &init, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let sys = SystemSpec::new(2, PotentialSpec::Quadratic).unwrap();
        let init = PhaseState::new(vec![1.0, 0.5], vec![0.1, 0.0], 0.0);
        let cfg = IntegrationConfig::new(0.05, Direction::Forward).storing();
        let traj = integrate_ramped(&sys, &make_poly_ramp(1), 0.1, 1.0, &init, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,q_1,q_2,p_1,p_2\n"));
        assert!(!text.contains('\r'));
        let back = Trajectory::read_csv(&buf[..], 0.1, 1.0).unwrap();
        assert_eq!(back, traj);
    }
}
