use std::path::PathBuf;

use basin_forge::ode_system::{build_field, choose_c, halting_point, Stage, TargetingSpec};
use basin_forge::robust_map::DEFAULT_LAMBDA;
use basin_forge::tm::TuringMachine;
use clap::Args;
use serde::Deserialize;

use crate::failure::Failure;
use crate::{overlay, read_text, required, write_file};

/// Default targeting precision for the compiled flows.
const DEFAULT_GAMMA: f64 = 1.0 / 16.0;

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct CompileArgs {
    /// JSON run manifest supplying defaults for the options below.
    #[arg(long)]
    #[serde(skip)]
    manifest: Option<PathBuf>,
    /// Machine file.
    #[arg(long)]
    machine: Option<PathBuf>,
    /// pair, six or full.
    #[arg(long)]
    stage: Option<String>,
    /// Targeting precision used to choose c.
    #[arg(long)]
    gamma: Option<f64>,
    /// Contraction factor of the robust map.
    #[arg(long)]
    lambda: Option<f64>,
    /// Use this gain instead of choosing it from gamma.
    #[arg(long)]
    c: Option<f64>,
    /// Where to write the field manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CompileArgs {
    fn resolve(self) -> Result<Self, Failure> {
        overlay!(self, machine, stage, gamma, lambda, c, out)
    }
}

pub fn run(args: CompileArgs) -> Result<(), Failure> {
    let args = args.resolve()?;
    let machine_path = required(args.machine, "machine")?;
    let machine = TuringMachine::from_json(&read_text(&machine_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", machine_path.display())))?;
    let stage_name = args.stage.unwrap_or_else(|| "full".into());
    let stage: Stage = stage_name.parse()?;
    let gamma = args.gamma.unwrap_or(DEFAULT_GAMMA);
    let lambda = args.lambda.unwrap_or(DEFAULT_LAMBDA);
    let c = match args.c {
        Some(c) => c,
        None => choose_c(&TargetingSpec::new(0.0, gamma), true)?,
    };
    let field = build_field(&machine, stage, c, lambda)?;
    let manifest = field.manifest(&machine_path.to_string_lossy(), gamma);
    let out = args.out.unwrap_or_else(|| PathBuf::from("field.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write_file(&out, text)?;

    println!("stage {stage_name}, dimension {}", stage.dimension());
    println!("c = {c:.6} (gamma = {gamma}, lambda = {lambda})");
    if stage != Stage::Pair {
        let xh = halting_point(&machine);
        let shown: Vec<String> = xh[..stage.dimension()].iter().map(|v| format!("{v}")).collect();
        println!("x_halt = ({})", shown.join(", "));
    }
    println!("wrote {}", out.display());
    Ok(())
}
