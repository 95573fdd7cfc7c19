use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use serde_json::json;
use supplyplan::formulations::{solve_ro_box, solve_ro_ell, solve_sp, solve_trsocp, solve_ws, Solved, Strategy};
use supplyplan::framework::{
    box_for, evpi_for, format_cost, in_sample_stability, monte_carlo_validation, parse_columns, plan_methods,
    run_comparison, stress_worst_case, CompareConfig, CostBand, DemandRange, Plans,
};
use supplyplan::generate::{generate, GenConfig};
use supplyplan::solver::{SolverConfig, Status};
use supplyplan::supply::Instance;
use supplyplan::uncertainty::{
    estimate_gamma, load_scenarios, omega_for_epsilon, write_matrix, EllipseParams, GammaMode, ScenarioSet,
};
use supplyplan::{Error, Result};

use crate::{
    CompareArgs, CostBandArg, DataArgs, EvpiArgs, GammaModeArg, GenArgs, ModelArg, MonteCarloArgs, OmegaArgs, PlanArgs,
    SolveArgs, SolveOpts, StabilityArgs, StrategyArg, StressArgs,
};

const DEFAULT_OMEGA: f64 = 2.75;
const DEFAULT_SIGMA: f64 = 0.2;

impl DataArgs {
    fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(DEFAULT_SIGMA)
    }
}

fn load(data: &DataArgs) -> Result<(Instance, ScenarioSet)> {
    let inst = Instance::load(&data.instance)?;
    for w in inst.warnings() {
        log::warn!("{w}");
    }
    let scens = load_scenarios(
        &inst,
        &data.demand_csv,
        data.cost_csv.as_deref(),
        data.sigma.unwrap_or(0.0),
        data.seed,
    )?;
    scens.check_against(&inst)?;
    Ok((inst, scens))
}

impl OmegaArgs {
    fn resolve(&self) -> Result<Option<f64>> {
        match (self.omega, self.epsilon) {
            (Some(o), None) if o >= 0.0 && o.is_finite() => Ok(Some(o)),
            (Some(o), None) => Err(Error::Parameter(format!(
                "omega must be finite and nonnegative, got {o}"
            ))),
            (None, Some(e)) => omega_for_epsilon(e).map(Some),
            (None, None) => Ok(None),
            (Some(_), Some(_)) => Err(Error::Parameter("give either --omega or --epsilon, not both".into())),
        }
    }
}

impl SolveOpts {
    fn relax(&self) -> bool {
        !self.integer
    }

    fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Monolithic => Strategy::Monolithic,
            StrategyArg::Decomposed => Strategy::Decomposed,
        }
    }
}

fn cost_band(arg: CostBandArg, sigma: f64) -> CostBand {
    match arg {
        CostBandArg::Prefix => CostBand::Prefix,
        CostBandArg::Sigma => CostBand::Sigma(sigma),
    }
}

fn prefix_len(tau: Option<usize>, scens: &ScenarioSet) -> Result<usize> {
    let tau = tau.unwrap_or(scens.len());
    if tau == 0 || tau > scens.len() {
        return Err(Error::Parameter(format!("--tau {tau} outside 1..={}", scens.len())));
    }
    Ok(tau)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn status_code(s: Status) -> ExitCode {
    match s {
        Status::Optimal => ExitCode::SUCCESS,
        Status::Infeasible => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::Sp => "sp",
        ModelArg::RoBox => "ro-box",
        ModelArg::RoEll => "ro-ell",
        ModelArg::Trsocp => "trsocp",
        ModelArg::Ws => "ws",
    }
}

pub fn solve(a: SolveArgs) -> Result<ExitCode> {
    let omega = a.omega.resolve()?;
    let needs_omega = matches!(a.model, ModelArg::RoEll | ModelArg::Trsocp);
    if needs_omega && omega.is_none() {
        return Err(Error::Parameter(format!(
            "--model {} needs --omega or --epsilon",
            model_name(a.model)
        )));
    }
    let (inst, scens) = load(&a.data)?;
    let tau = prefix_len(a.tau, &scens)?;
    let prefix = scens.prefix(tau)?;
    let cfg = SolverConfig::default();
    let relax = a.opts.relax();
    let band = cost_band(a.cost_band, a.data.sigma());
    let solved: Solved = match a.model {
        ModelArg::Sp => solve_sp(&inst, &prefix, relax, a.opts.strategy(), &cfg)?,
        ModelArg::RoBox => solve_ro_box(&inst, &box_for(&inst, &scens, tau, band)?, relax, &cfg)?,
        ModelArg::RoEll => {
            let bp = box_for(&inst, &scens, tau, band)?;
            let ell = EllipseParams {
                omega: omega.expect("checked"),
                b_dev: bp.b_dev.clone(),
            };
            solve_ro_ell(&inst, &bp, &ell, &cfg)?
        }
        ModelArg::Trsocp => {
            let bp = box_for(&inst, &scens, tau, band)?;
            solve_trsocp(&inst, &prefix, &bp, omega.expect("checked"), a.opts.strategy(), &cfg)?
        }
        ModelArg::Ws => {
            if a.scenario == 0 || a.scenario > scens.len() {
                return Err(Error::Parameter(format!(
                    "--scenario {} outside 1..={}",
                    a.scenario,
                    scens.len()
                )));
            }
            let s = a.scenario - 1;
            solve_ws(&inst, &scens.demands[s], &scens.costs[s], relax, &cfg)?
        }
    };

    let doc = json!({
        "model": model_name(a.model),
        "status": solved.status.to_string(),
        "objective": solved.objective.is_finite().then_some(solved.objective),
        "omega": if needs_omega { omega } else { None },
        "w": solved.w,
        "gap": solved.gap,
        "values": solved.named_values(&inst),
    });
    let mut f = create(&a.out, "solution.json")?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f)?;
    f.flush()?;

    println!("model: {}", model_name(a.model));
    if let Some(o) = omega.filter(|_| needs_omega) {
        println!("omega: {o:.6}");
    }
    println!("status: {}", solved.status);
    println!("objective: {}", format_cost(solved.objective));
    println!("solution: {}", a.out.join("solution.json").display());
    Ok(status_code(solved.status))
}

fn compare_config(
    methods: &str,
    omega: &OmegaArgs,
    opts: &SolveOpts,
    band: CostBandArg,
    sigma: f64,
) -> Result<CompareConfig> {
    Ok(CompareConfig {
        columns: parse_columns(methods)?,
        omega: omega.resolve()?.unwrap_or(DEFAULT_OMEGA),
        relax: opts.relax(),
        cost_band: cost_band(band, sigma),
        strategy: opts.strategy(),
        solver: SolverConfig::default(),
    })
}

pub fn compare(a: CompareArgs) -> Result<ExitCode> {
    let cfg = compare_config(&a.methods, &a.omega, &a.opts, a.cost_band, a.data.sigma())?;
    let (inst, scens) = load(&a.data)?;
    if scens.len() < 2 {
        return Err(Error::Parameter("compare needs at least two scenarios".into()));
    }
    let sbar = a.sbar.unwrap_or(scens.len() / 2);
    let report = run_comparison(&inst, &scens, sbar, &cfg)?;

    let mut f = create(&a.out, "report.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    let mut f = create(&a.out, "plot.csv")?;
    report.write_plot_csv(&mut f)?;
    f.flush()?;
    let mut f = create(&a.out, "timing.csv")?;
    report.write_timing_csv(&mut f)?;
    f.flush()?;

    report.write_csv(io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

pub fn gen(a: GenArgs) -> Result<ExitCode> {
    let g = generate(&GenConfig {
        suppliers: a.suppliers,
        destinations: a.destinations,
        scenarios: a.scenarios,
        sigma: a.sigma,
        seed: a.seed,
        q: a.q,
        alpha: a.alpha,
        outlier_capacity: a.outlier_capacity,
    })?;
    for w in g.instance.warnings() {
        log::warn!("{w}");
    }
    let mut f = create(&a.out, "instance.json")?;
    writeln!(f, "{}", g.instance.to_json_string()?)?;
    f.flush()?;
    let ids = g.instance.destination_ids();
    write_matrix(create(&a.out, "demands.csv")?, &ids, &g.demands)?;
    write_matrix(create(&a.out, "costs.csv")?, &ids, &g.costs)?;
    println!(
        "wrote {} suppliers, {} destinations, {} arcs, {} scenarios to {}",
        g.instance.suppliers.len(),
        g.instance.num_destinations(),
        g.instance.num_arcs(),
        g.demands.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("`{t}` is not a scenario count")))
        })
        .collect()
}

pub fn stability(a: StabilityArgs) -> Result<ExitCode> {
    let s_list = parse_list(&a.s_list)?;
    let (inst, scens) = load(&a.data)?;
    let range = DemandRange::from_scenarios(&scens);
    let curve = in_sample_stability(
        &inst,
        &range,
        a.data.sigma(),
        &s_list,
        a.data.seed,
        a.opts.relax(),
        a.opts.strategy(),
        &SolverConfig::default(),
    )?;
    let mut f = create(&a.out, "stability.csv")?;
    curve.write_csv(&mut f)?;
    f.flush()?;
    curve.write_csv(io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

struct Planned {
    inst: Instance,
    plans: Plans,
    d_bar: Vec<f64>,
    gamma: Vec<f64>,
    cfg: CompareConfig,
}

fn plan(a: &PlanArgs) -> Result<Planned> {
    let cfg = compare_config(&a.methods, &a.omega, &a.opts, a.cost_band, a.data.sigma())?;
    let (inst, scens) = load(&a.data)?;
    let tau = prefix_len(a.tau, &scens)?;
    let mode = match a.gamma_mode {
        GammaModeArg::Relative => GammaMode::Relative,
        GammaModeArg::Absolute => GammaMode::Absolute,
    };
    let (d_bar, gamma) = estimate_gamma(&scens, tau, mode)?;
    let plans = plan_methods(&inst, &scens, tau, &cfg)?;
    for (m, p) in &plans.plans {
        if p.status != Status::Optimal {
            log::warn!("{m} planning ended with status {}", p.status);
        }
    }
    Ok(Planned {
        inst,
        plans,
        d_bar,
        gamma,
        cfg,
    })
}

pub fn montecarlo(a: MonteCarloArgs) -> Result<ExitCode> {
    let p = plan(&a.plan)?;
    let report = monte_carlo_validation(
        &p.inst,
        &p.plans,
        &p.d_bar,
        &p.gamma,
        &p.inst.b_bar(),
        a.plan.data.sigma(),
        a.n,
        a.plan.data.seed,
        &p.cfg,
    )?;
    let mut f = create(&a.plan.out, "montecarlo.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    for c in &report.columns {
        if let Some(mean) = report.mean(*c) {
            println!(
                "{c}: mean {} ({} infinite)",
                format_cost(mean),
                report.infinite_count(*c)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn stress(a: StressArgs) -> Result<ExitCode> {
    let p = plan(&a.plan)?;
    let report = stress_worst_case(
        &p.inst,
        &p.plans,
        &p.d_bar,
        &p.gamma,
        &p.inst.b_bar(),
        a.plan.data.sigma(),
        &p.cfg,
    )?;
    let mut f = create(&a.plan.out, "stress.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    report.write_csv(io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

pub fn evpi(a: EvpiArgs) -> Result<ExitCode> {
    let (inst, scens) = load(&a.data)?;
    let e = evpi_for(
        &inst,
        &scens,
        a.opts.relax(),
        a.opts.strategy(),
        &SolverConfig::default(),
    )?;
    let mut f = create(&a.out, "evpi.csv")?;
    writeln!(f, "quantity,value")?;
    for (key, v) in [("sp", e.sp), ("expected_ws", e.expected_ws), ("evpi", e.evpi)] {
        writeln!(f, "{key},{}", format_cost(v))?;
    }
    writeln!(f)?;
    writeln!(f, "scenario,ws")?;
    for (s, w) in e.ws.iter().enumerate() {
        writeln!(f, "{},{}", s + 1, format_cost(*w))?;
    }
    f.flush()?;
    println!("sp: {}", format_cost(e.sp));
    println!("expected_ws: {}", format_cost(e.expected_ws));
    println!("evpi: {}", format_cost(e.evpi));
    Ok(ExitCode::SUCCESS)
}
