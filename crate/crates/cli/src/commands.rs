use std::fs;
use std::path::PathBuf;

use selfish_core::delay::{analyze, DelayParams};
use selfish_core::evaluate::{evaluate_policy_with, BoundaryRule};
use selfish_core::optimizer::{find_optimal, profit_threshold, sweep, ThresholdConfig, SWEEP_HEADER};
use selfish_core::simulator::{simulate_batch, simulate_policy, SimConfig};
use selfish_core::{build_base_model, MiningParams, OptimizeConfig, Policy, PolicyFile, Variant};
use serde::Serialize;

use crate::args::{
    BoundaryArg, DelayArgs, EvaluateArgs, OptimizeArgs, PolicyArgs, RenderArgs, SimulateArgs,
    SweepArgs, ThresholdArgs,
};
use crate::output::OutputDir;
use crate::CliError;

pub fn optimize(args: &OptimizeArgs) -> Result<(), CliError> {
    let params = MiningParams::new(args.alpha, args.gamma, args.variant.into())?;
    let mut cfg = OptimizeConfig::new(params, args.truncation).with_eps(args.eps, args.eps_prime);
    cfg.compensation = args.compensation.into();
    cfg.validate()?;
    let report = find_optimal(&cfg)?;

    let mut out = OutputDir::create(&args.out.out)?;
    out.write_json("bounds.json", &report)?;
    let file = PolicyFile {
        params: Some(params),
        policy: report.policy.clone(),
    };
    out.write("policy.json", &(file.to_json() + "\n"))?;
    out.finish("optimize", args, vec![], vec![])?;
    println!("lower_bound {:.6}", report.lower_bound);
    println!("upper_bound {:.6}", report.upper_bound);
    Ok(())
}

pub fn threshold(args: &ThresholdArgs) -> Result<(), CliError> {
    let mut cfg = ThresholdConfig::new(args.gamma, args.variant.into());
    cfg.truncation = args.truncation;
    cfg.eps = args.eps;
    cfg.alpha_tol = args.alpha_tol;
    let report = profit_threshold(&cfg)?;

    let mut out = OutputDir::create(&args.out.out)?;
    out.write_json("threshold.json", &report)?;
    out.finish("threshold", args, vec![], vec![])?;
    println!("threshold {:.6}", report.threshold());
    if report.undecided > 0 {
        eprintln!(
            "note: {} probes were inconclusive; the threshold is a lower bound",
            report.undecided
        );
    }
    Ok(())
}

pub fn sweep_grid(args: &SweepArgs) -> Result<(), CliError> {
    let rows = sweep(&args.alphas, &args.gammas, args.variant.into(), args.truncation, args.eps);
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
        if let Some(e) = &row.error {
            eprintln!("alpha={} gamma={}: {e}", row.alpha, row.gamma);
        }
    }
    let mut out = OutputDir::create(&args.out.out)?;
    out.write("sweep.csv", &csv)?;
    out.finish("sweep", args, vec![], vec![])?;
    println!("{} rows, {} failed", rows.len(), rows.iter().filter(|r| r.error.is_some()).count());
    Ok(())
}

struct LoadedPolicy {
    policy: Policy,
    params: MiningParams,
    name: String,
    input: Option<PathBuf>,
    default_boundary: BoundaryRule,
}

fn flag_params(args: &PolicyArgs, what: &str) -> Result<MiningParams, CliError> {
    let (Some(alpha), Some(gamma)) = (args.alpha, args.gamma) else {
        return Err(CliError::Usage(format!("{what} needs --alpha and --gamma")));
    };
    let variant = args.variant.map(Variant::from).unwrap_or_default();
    Ok(MiningParams::new(alpha, gamma, variant)?)
}

fn load_policy(args: &PolicyArgs) -> Result<LoadedPolicy, CliError> {
    match args.policy.as_str() {
        "honest" => Ok(LoadedPolicy {
            policy: Policy::honest(args.truncation)?,
            params: flag_params(args, "the honest policy")?,
            name: "honest".into(),
            input: None,
            default_boundary: BoundaryRule::ForcedAdopt,
        }),
        "sm1" => Ok(LoadedPolicy {
            policy: Policy::sm1(args.truncation)?,
            params: flag_params(args, "the sm1 policy")?,
            name: "sm1".into(),
            input: None,
            default_boundary: BoundaryRule::Sm1Tail,
        }),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read policy file {path}: {e}")))?;
            let file = PolicyFile::from_json(&text)?;
            let params = match file.params {
                None => flag_params(args, "a policy file without parameters")?,
                Some(stored) => {
                    let requested = MiningParams::new(
                        args.alpha.unwrap_or(stored.alpha()),
                        args.gamma.unwrap_or(stored.gamma()),
                        args.variant.map(Variant::from).unwrap_or(stored.variant()),
                    )?;
                    if requested != stored && !args.force {
                        return Err(CliError::Usage(format!(
                            "policy was computed for alpha={} gamma={} variant={}; pass --force to use it elsewhere",
                            stored.alpha(),
                            stored.gamma(),
                            stored.variant()
                        )));
                    }
                    requested
                }
            };
            Ok(LoadedPolicy {
                policy: file.policy,
                params,
                name: path.to_string(),
                input: Some(PathBuf::from(path)),
                default_boundary: BoundaryRule::ForcedAdopt,
            })
        }
    }
}

fn boundary_rule(flag: Option<BoundaryArg>, loaded: &LoadedPolicy) -> BoundaryRule {
    flag.map(BoundaryRule::from).unwrap_or(loaded.default_boundary)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let loaded = load_policy(&args.policy)?;
    let boundary = boundary_rule(args.boundary, &loaded);
    let mut cfg = SimConfig::new(loaded.params, loaded.policy, args.rounds, args.seed);
    cfg.boundary = boundary;

    let mut out = OutputDir::create(&args.out.out)?;
    let seeds: Vec<u64>;
    if args.replicas <= 1 {
        let result = simulate_policy(&cfg)?;
        out.write_json("simulate.json", &result)?;
        println!("rev {:.6} stderr {:.3e}", result.rev, result.stderr);
        seeds = vec![args.seed];
    } else {
        let batch = simulate_batch(&cfg, args.replicas, args.seed_stride)?;
        out.write("simulate.csv", &batch.to_csv())?;
        out.write_json("simulate.json", &batch)?;
        println!("mean_rev {:.6} std_rev {:.3e}", batch.mean_rev, batch.std_rev);
        seeds = batch.replicas.iter().map(|r| r.seed).collect();
    }
    out.finish("simulate", args, loaded.input.into_iter().collect(), seeds)?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    policy: &'a str,
    params: MiningParams,
    truncation: u32,
    boundary: BoundaryRule,
    attacker_rate: f64,
    honest_rate: f64,
    rev: f64,
    epoch_length: f64,
    reachable_states: usize,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let loaded = load_policy(&args.policy)?;
    let boundary = boundary_rule(args.boundary, &loaded);
    let model = build_base_model(&loaded.params, loaded.policy.truncation())?;
    let ev = evaluate_policy_with(&model, &loaded.policy, boundary)?;

    let mut out = OutputDir::create(&args.out.out)?;
    out.write_json(
        "evaluate.json",
        &EvaluateOutput {
            policy: &loaded.name,
            params: loaded.params,
            truncation: loaded.policy.truncation(),
            boundary,
            attacker_rate: ev.attacker_rate,
            honest_rate: ev.honest_rate,
            rev: ev.rev,
            epoch_length: ev.epoch_length,
            reachable_states: ev.reachable_states,
        },
    )?;
    out.finish("evaluate", args, loaded.input.into_iter().collect(), vec![])?;
    println!("rev {:.6}", ev.rev);
    Ok(())
}

pub fn render(args: &RenderArgs) -> Result<(), CliError> {
    let loaded = load_policy(&args.policy)?;
    let table = loaded.policy.render_table(&loaded.params, args.view)?;
    print!("{table}");
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write("policy_table.txt", &table)?;
        out.finish("render", args, loaded.input.into_iter().collect(), vec![])?;
    }
    Ok(())
}

pub fn delay(args: &DelayArgs) -> Result<(), CliError> {
    let params = DelayParams::new(args.alpha, args.lambda, args.d_ah, args.d_ha)?;
    let report = analyze(&params, args.rho, args.k_cap)?;
    let json = serde_json::to_string(&report).expect("report serialises");

    let mut out = OutputDir::create(&args.out.out)?;
    out.write("delay.json", &(json.clone() + "\n"))?;
    out.finish("delay", args, vec![], vec![])?;
    println!("{json}");
    Ok(())
}
