//! The `verify` subcommand: run the exact-identity suite over random
//! cases and report worst residuals.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use rand::Rng;

use rotatest::model::ModelSpec;
use rotatest::rng::RngFactory;
use rotatest::rotation::{build_reference_basis, RotationBundle};
use rotatest::verify::run_invariant_suite;

#[derive(Args)]
pub struct VerifyArgs {
    /// Master seed (falls back to ROTATEST_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random cases.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Write the first case's rotation bundle as JSON to this path.
    #[arg(long)]
    dump: Option<PathBuf>,
}

pub fn run(args: VerifyArgs) -> ExitCode {
    let seed = args.seed.or_else(crate::env_seed).unwrap_or(0);
    let factory = RngFactory::new(seed);
    let models = ModelSpec::all_builtin();

    if let Some(path) = &args.dump {
        if let Err(msg) = dump_first_case(&factory, &models, path) {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    }

    let outcome = match run_invariant_suite(args.cases, &factory, &models) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let r = outcome.max_residuals;
    let tol = outcome.tolerances;
    println!(
        "invariant suite: {} cases (seed {seed}, redraws {})",
        outcome.cases_run, outcome.redraws
    );
    println!("  orthonormal scores   |O_A^T O_A - I|   {:.3e}  [tol {:.1e}]", r.score_orthonormality, tol.identity);
    println!("  rotation mapping     |U L B - A|       {:.3e}  [tol {:.1e}]", r.rotation_map, tol.identity);
    println!("  unitarity            |U^T D U - D|     {:.3e}  [tol {:.1e}]", r.unitarity, tol.identity);
    println!("  score centering      |1^T D M|         {:.3e}  [tol {:.1e}]", r.score_centering, tol.identity);
    println!("  probability sum      |sum p - 1|       {:.3e}  [tol {:.1e}]", r.prob_sum, tol.prob_sum);
    println!("  m=1 closed form      action gap        {:.3e}  [tol {:.1e}]", r.closed_form, tol.identity);
    println!("  indicator centring   |<p, w>|          {:.3e}  [tol {:.1e}]", r.process_centring, tol.identity);

    if outcome.pass() {
        println!("PASS");
        ExitCode::SUCCESS
    } else {
        println!("FAIL: {} cases out of tolerance", outcome.failures.len());
        for case in &outcome.failures {
            println!(
                "  case {} (attempt {}): model={} m={} theta={:.6} x={:?}",
                case.case_index, case.attempt, case.model, case.m, case.theta, case.x_vec
            );
        }
        ExitCode::from(1)
    }
}

/// Rebuild the suite's first case deterministically and dump its bundle.
fn dump_first_case(
    factory: &RngFactory,
    models: &[ModelSpec],
    path: &PathBuf,
) -> Result<(), String> {
    let model = &models[0];
    let mut rng = factory.verification(0, 0);
    let (lo, hi) = model.theta_interval();
    let theta = (model.theta0() + rng.random_range(-0.25..0.25)).clamp(lo, hi);
    let x = rng.random_range(0.0..2.0);
    let basis = build_reference_basis(1);
    let bundle = RotationBundle::build(model, &[x], theta, &basis).map_err(|e| e.to_string())?;
    std::fs::write(path, bundle.dump_json())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}
