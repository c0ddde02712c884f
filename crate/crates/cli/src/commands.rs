use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;

use optbal::bvp::{shooting_solve, ShootingConfig};
use optbal::diagnostics::{fit_algebraic_rate, sweep, FitOutcome, RateModel, SweepOptions};
use optbal::integrate::{default_step, DEFAULT_KAPPA};
use optbal::nudging::{balance_trace, run_nudging, NudgingConfig, DEFAULT_MAX_ITER, DEFAULT_RTOL};
use optbal::oracle::{oscillator_balanced_pt, oscillator_exact_slow, oscillator_nudge, OscillatorNudgeConfig};
use optbal::report::{fit_rows, sweep_rows, write_table, BvpRow, OracleRow};
use optbal::series::slow_manifold_point;
use optbal::{OscillatorSpec, PotentialSpec, RampSpec, SystemSpec};

use crate::config::Config;
use crate::plot::{rate_plot_svg, PlotSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SystemKind {
    Toy,
    Oscillator,
}

/// Settings shared by every subcommand.
struct Setup {
    system: SystemKind,
    sys: SystemSpec,
    t_ramp: f64,
    ramps: Vec<RampSpec>,
    order_n: usize,
    max_iter: usize,
    rtol: f64,
    alpha: f64,
    kappa: usize,
    q_star: Vec<f64>,
    initial_guess: InitialGuess,
    modes: OscillatorSpec,
    theta_star: f64,
    out_dir: PathBuf,
}

enum InitialGuess {
    Zero,
    Leading,
    Explicit(Vec<f64>),
}

pub fn parse_modes(s: &str) -> Result<OscillatorSpec> {
    let mut modes = Vec::new();
    for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        let bad = || anyhow!("malformed mode `{item}`, expected `k:re` or `k:re:im`");
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let k: i32 = parts[0].parse().map_err(|_| bad())?;
        let re: f64 = parts[1].parse().map_err(|_| bad())?;
        let im: f64 = match parts.get(2) {
            Some(p) => p.parse().map_err(|_| bad())?,
            None => 0.0,
        };
        modes.push((k, Complex64::new(re, im)));
    }
    if modes.is_empty() {
        bail!("mode list is empty");
    }
    Ok(OscillatorSpec::new(modes))
}

impl Setup {
    fn from_config(c: &Config) -> Result<Self> {
        for (key, line) in c.unknown_keys() {
            eprintln!("warning: line {line}: unknown key `{key}` ignored");
        }
        let system = match c.get_or("system", "toy".to_string())?.as_str() {
            "toy" => SystemKind::Toy,
            "oscillator" => SystemKind::Oscillator,
            other => return Err(c.value_error("system", format!("expected `toy` or `oscillator`, got `{other}`")).into()),
        };
        let potential: PotentialSpec = c.get_or("potential", PotentialSpec::QuadQuartic { lambda: 1.0 })?;
        let dim: usize = c.get_or("dim", 2)?;
        let sys = SystemSpec::new(dim, potential).map_err(|e| c.value_error("dim", e.to_string()))?;
        let ramps = c
            .list::<RampSpec>("ramp")?
            .unwrap_or_else(|| vec![optbal::ramp::make_poly_ramp(2)]);
        if ramps.is_empty() {
            return Err(c.value_error("ramp", "empty ramp list").into());
        }
        let q_star = match c.list::<f64>("basepoint")? {
            Some(q) => q,
            None => {
                let mut q = vec![0.0; dim];
                q[0] = 1.0;
                q
            }
        };
        if system == SystemKind::Toy && q_star.len() != dim {
            return Err(c
                .value_error("basepoint", format!("expected {dim} components, got {}", q_star.len()))
                .into());
        }
        let initial_guess = match c.raw("initial_guess").map(|r| r.0) {
            None | Some("zero") => InitialGuess::Zero,
            Some("leading") => InitialGuess::Leading,
            Some(_) => InitialGuess::Explicit(c.list::<f64>("initial_guess")?.unwrap_or_default()),
        };
        let modes = match c.raw("modes") {
            Some((s, _)) => parse_modes(s).map_err(|e| c.value_error("modes", e.to_string()))?,
            None => OscillatorSpec::single_mode(),
        };
        // accepted for config compatibility; no command draws random numbers
        let _seed: u64 = c.get_or("seed", 42)?;
        Ok(Setup {
            system,
            sys,
            t_ramp: c.get_or("T", 1.0)?,
            ramps,
            order_n: c.get_or("order_n", 2)?,
            max_iter: c.get_or("max_iter", DEFAULT_MAX_ITER)?,
            rtol: c.get_or("rtol", DEFAULT_RTOL)?,
            alpha: c.get_or("alpha", 1.0)?,
            kappa: c.get_or("kappa", DEFAULT_KAPPA)?,
            q_star,
            initial_guess,
            modes,
            theta_star: c.get_or("theta_star", 0.0)?,
            out_dir: c.get_or("out_dir", PathBuf::from("."))?,
        })
    }

    fn eps_list(c: &Config) -> Result<Vec<f64>> {
        if let Some(list) = c.list::<f64>("epsilon_list")? {
            if list.is_empty() {
                return Err(c.value_error("epsilon_list", "empty list").into());
            }
            return Ok(list);
        }
        Ok(vec![c.require::<f64>("epsilon")?])
    }

    fn single_ramp(&self) -> Result<&RampSpec> {
        match self.ramps.as_slice() {
            [r] => Ok(r),
            _ => bail!("`run` needs exactly one ramp, got {}", self.ramps.len()),
        }
    }

    fn nudging_config(&self, eps: f64, ramp: &RampSpec) -> Result<NudgingConfig> {
        let mut cfg = NudgingConfig::new(eps, self.t_ramp, ramp.clone(), self.q_star.clone());
        cfg.max_iter = self.max_iter;
        cfg.rtol = self.rtol;
        cfg.alpha = self.alpha;
        cfg.step = default_step(eps, self.kappa);
        match &self.initial_guess {
            InitialGuess::Zero => {}
            InitialGuess::Leading => cfg = cfg.with_leading_order_guess(&self.sys)?,
            InitialGuess::Explicit(p) => cfg.p0 = p.clone(),
        }
        Ok(cfg)
    }

    fn oscillator_config(&self, eps: f64) -> Result<OscillatorNudgeConfig> {
        let mut cfg = OscillatorNudgeConfig::new(eps, self.t_ramp, self.theta_star);
        cfg.max_iter = self.max_iter;
        cfg.rtol = self.rtol;
        cfg.alpha = self.alpha;
        cfg.step = default_step(eps, self.kappa);
        match &self.initial_guess {
            InitialGuess::Zero => {}
            InitialGuess::Leading => bail!("`initial_guess = leading` is not available for the oscillator"),
            InitialGuess::Explicit(p) => match p.as_slice() {
                [re] => cfg.p0 = Complex64::new(*re, 0.0),
                [re, im] => cfg.p0 = Complex64::new(*re, *im),
                _ => bail!("oscillator initial guess takes `re` or `re, im`"),
            },
        }
        Ok(cfg)
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("cannot create {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

pub fn run(config: &Path) -> Result<()> {
    let c = Config::load(config)?;
    let setup = Setup::from_config(&c)?;
    let eps = c.require::<f64>("epsilon")?;
    let ramp = setup.single_ramp()?;
    let path = setup.output("trace.csv")?;
    let (balance, last_update, plateau_index, iterations, converged) = match setup.system {
        SystemKind::Toy => {
            let cfg = setup.nudging_config(eps, ramp)?;
            let res = run_nudging(&setup.sys, &cfg)?;
            let bal = balance_trace(&setup.sys, &cfg, &res, setup.order_n)?;
            res.write_trace_csv(create(&path)?, Some(&bal))?;
            let last = res.update_norms.last().copied().unwrap_or(0.0);
            (*bal.last().unwrap_or(&0.0), last, res.plateau_index, res.cycles(), res.converged)
        }
        SystemKind::Oscillator => {
            let cfg = setup.oscillator_config(eps)?;
            let res = oscillator_nudge(&setup.modes, ramp, &cfg)?;
            let g = oscillator_exact_slow(&setup.modes, eps, setup.theta_star)?;
            let bal: Vec<f64> = res.iterates.iter().map(|p| (p - g).norm()).collect();
            res.write_trace_csv(create(&path)?, Some(&bal))?;
            let last = res.update_norms.last().copied().unwrap_or(0.0);
            (*bal.last().unwrap_or(&0.0), last, res.plateau_index, res.cycles(), res.converged)
        }
    };
    println!(
        "final_residual={balance:e} update_norm={last_update:e} plateau_index={plateau_index} iterations={iterations} converged={converged}"
    );
    Ok(())
}

pub fn sweep_cmd(config: &Path) -> Result<()> {
    let c = Config::load(config)?;
    let setup = Setup::from_config(&c)?;
    if setup.system != SystemKind::Toy {
        bail!("`sweep` runs the toy model; use `oracle-check` for the oscillator");
    }
    let eps_list = Setup::eps_list(&c)?;
    let base = setup.nudging_config(eps_list[0], &setup.ramps[0])?;
    let cells = eps_list.len() * setup.ramps.len();
    let machine = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut opts = SweepOptions::new();
    opts.kappa = setup.kappa;
    opts.workers = Some(c.get::<usize>("workers")?.unwrap_or(cells.min(machine)).max(1));
    let res = sweep(&setup.sys, &base, &eps_list, &setup.ramps, setup.order_n, &opts)?;
    for cell in res.cells.iter().filter(|c| !c.succeeded()) {
        eprintln!(
            "warning: cell eps={} ramp={} failed: {}",
            cell.eps,
            cell.ramp,
            cell.error.as_deref().unwrap_or("")
        );
    }
    if !res.cells.iter().any(|c| c.succeeded()) {
        bail!("every sweep cell failed");
    }
    write_table(create(&setup.output("sweep.csv")?)?, &sweep_rows(&res))?;
    write_table(create(&setup.output("fit.csv")?)?, &fit_rows(&res))?;
    let model = if setup.ramps[0].is_exponential() {
        RateModel::Exponential
    } else {
        RateModel::Algebraic
    };
    let series: Vec<PlotSeries> = res
        .fits
        .iter()
        .map(|f| PlotSeries {
            label: f.ramp.clone(),
            points: res
                .cells_for(&f.ramp)
                .filter(|c| c.succeeded())
                .map(|c| (c.eps, c.balance_residual))
                .collect(),
            fit: match &f.outcome {
                FitOutcome::Fitted(fit) => Some(fit.clone()),
                FitOutcome::Skipped(_) => None,
            },
        })
        .collect();
    fs::write(setup.output("sweep.svg")?, rate_plot_svg(&series, model, setup.t_ramp))?;
    for f in &res.fits {
        match &f.outcome {
            FitOutcome::Fitted(fit) => println!(
                "{}: {} rate {:.4} intercept {:.4} r2 {:.4}",
                f.ramp,
                fit.model,
                fit.rate(),
                fit.intercept,
                fit.r_squared
            ),
            FitOutcome::Skipped(why) => println!("{}: fit skipped ({why})", f.ramp),
        }
    }
    Ok(())
}

pub fn oracle_check(config: &Path) -> Result<()> {
    let c = Config::load(config)?;
    let setup = Setup::from_config(&c)?;
    let eps_list = Setup::eps_list(&c)?;
    let mut rows = Vec::new();
    for ramp in &setup.ramps {
        let mut pts = Vec::new();
        for &eps in &eps_list {
            let pt = oscillator_balanced_pt(&setup.modes, ramp, eps, setup.t_ramp, setup.theta_star)?;
            let g = oscillator_exact_slow(&setup.modes, eps, setup.theta_star)?;
            let abs_error = (pt - g).norm();
            pts.push((eps, abs_error));
            rows.push(OracleRow {
                eps,
                ramp: ramp.to_string(),
                abs_error,
                predicted_order: ramp.order().map(|n| n + 1),
            });
        }
        if let Ok(fit) = fit_algebraic_rate(&pts) {
            println!("{ramp}: empirical order {:.3}", fit.slope);
        }
    }
    write_table(create(&setup.output("oracle.csv")?)?, &rows)?;
    Ok(())
}

pub fn bvp_compare(config: &Path) -> Result<()> {
    let c = Config::load(config)?;
    let setup = Setup::from_config(&c)?;
    if setup.system != SystemKind::Toy {
        bail!("`bvp-compare` runs the toy model");
    }
    let eps_list = Setup::eps_list(&c)?;
    let mut rows = Vec::new();
    for ramp in &setup.ramps {
        for &eps in &eps_list {
            let cfg = setup.nudging_config(eps, ramp)?;
            let nudged = run_nudging(&setup.sys, &cfg)?;
            let mut shoot = ShootingConfig::new(eps, setup.t_ramp, ramp.clone(), setup.q_star.clone());
            shoot.step = cfg.step;
            if let Some(tol) = c.get("newton_tol")? {
                shoot.newton_tol = tol;
            }
            if let Some(max) = c.get("newton_max")? {
                shoot.newton_max = max;
            }
            let sol = shooting_solve(&setup.sys, &shoot)?;
            let diff = optbal::vecops::distance(&sol.p_t, &nudged.final_value);
            rows.push(BvpRow {
                eps,
                t_ramp: setup.t_ramp,
                ramp: ramp.to_string(),
                shoot_nudge_diff: diff,
                plateau_norm: nudged.plateau_residual(),
            });
            let g = slow_manifold_point(&setup.sys, setup.order_n, eps, &setup.q_star)?;
            println!(
                "eps={eps} ramp={ramp}: |shoot - nudge| = {diff:e}, plateau {:e}, |shoot - G_{}| = {:e}",
                nudged.plateau_residual(),
                setup.order_n,
                optbal::vecops::distance(&sol.p_t, &g)
            );
        }
    }
    write_table(create(&setup.output("bvp.csv")?)?, &rows)?;
    Ok(())
}
