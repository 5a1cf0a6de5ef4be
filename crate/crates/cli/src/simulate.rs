use std::fmt::Write as _;
use std::path::PathBuf;

use basin_forge::integrator::analysis::TrackingOptions;
use basin_forge::integrator::track_against_discrete;
use basin_forge::ode_system::{FieldManifest, Stage};
use basin_forge::tm::TuringMachine;
use clap::Args;
use serde::Deserialize;

use crate::failure::Failure;
use crate::sweep::{family_member, Family};
use crate::{overlay, read_json, read_text, required, resolve_near, write_file};

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// JSON run manifest supplying defaults for the options below.
    #[arg(long)]
    #[serde(skip)]
    manifest: Option<PathBuf>,
    /// Field manifest written by `compile` (stage full).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Input word, as a base-b number.
    #[arg(long)]
    w: Option<u64>,
    /// Added to every coordinate of the initial state.
    #[arg(long)]
    offset: Option<f64>,
    /// Integration time limit.
    #[arg(long)]
    t_max: Option<f64>,
    /// Machine steps to compare against when the machine does not halt.
    #[arg(long)]
    k_max: Option<u64>,
    /// Integrator step budget.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Perturb the field with a random member of this family.
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV of clock-integer deviations.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimulateArgs {
    fn resolve(self) -> Result<Self, Failure> {
        overlay!(self, field, w, offset, t_max, k_max, max_steps, family, alpha, seed, out)
    }
}

pub fn run(args: SimulateArgs) -> Result<(), Failure> {
    let args = args.resolve()?;
    let field_path = required(args.field, "field")?;
    let manifest: FieldManifest = read_json(&field_path)?;
    if manifest.stage != Stage::Full {
        return Err(Failure::invalid("simulate needs a full-stage field manifest"));
    }
    let machine_path = resolve_near(manifest.machine.as_ref(), &field_path);
    let machine = TuringMachine::from_json(&read_text(&machine_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", machine_path.display())))?;
    let mut field = manifest.build(&machine)?;
    let seed = args.seed.unwrap_or(0);
    if let Some(family) = args.family {
        let alpha = required(args.alpha, "alpha")?;
        field = field.perturb(family_member(family, alpha, 7, seed))?;
    }
    let w = required(args.w, "w")?;
    let mut opts = TrackingOptions {
        offset: [args.offset.unwrap_or(0.0); 7],
        t_max: args.t_max.unwrap_or(200.0),
        ..TrackingOptions::default()
    };
    if let Some(n) = args.max_steps {
        opts.tol.max_steps = n;
    }
    let rep = track_against_discrete(&field, &machine, w, args.k_max.unwrap_or(1000), &opts)?;

    if let Some(out) = &args.out {
        let mut csv = format!(
            "# basin-forge simulate machine={} w={w} seed={seed} family={} alpha={}\nk,deviation\n",
            manifest.machine,
            args.family.map_or("none", Family::name),
            args.alpha.unwrap_or(0.0),
        );
        for (k, d) in &rep.deviations {
            let _ = writeln!(csv, "{k},{d:e}");
        }
        write_file(out, csv)?;
    }
    let steps = rep.steps_to_halt.map_or_else(|| "none".into(), |s| s.to_string());
    let r = opts.entry_radius;
    let tail = match rep.entry_time {
        Some(t) => format!("entered B(x_halt,{r}) at t≈{t:.3}; verdict IN"),
        None => format!("did not enter B(x_halt,{r}) by t={:.1}; verdict NOT_YET", rep.t_end),
    };
    println!(
        "w={w} steps_to_halt={steps} max_deviation={:.3e} {tail}",
        rep.max_deviation
    );
    Ok(())
}
