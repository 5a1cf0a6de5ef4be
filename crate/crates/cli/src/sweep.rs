use std::fmt::Write as _;
use std::path::PathBuf;

use basin_forge::integrator::PerturbationSpec;
use basin_forge::robust_map::{
    basin_membership, find_sink, PerturbedMap, RobustMap, Verdict, DEFAULT_LAMBDA,
};
use basin_forge::tm::TuringMachine;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::failure::Failure;
use crate::{overlay, read_text, required, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Sinusoidal,
    GaussianTail,
    Bump,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Sinusoidal => "sinusoidal",
            Self::GaussianTail => "gaussian_tail",
            Self::Bump => "bump",
        }
    }
}

/// The member of `family` drawn from `seed`: random weights and phases
/// on every component.
pub fn family_member(family: Family, alpha: f64, dim: usize, seed: u64) -> PerturbationSpec {
    let base = match family {
        Family::Constant => PerturbationSpec::constant(alpha, dim),
        Family::Sinusoidal => PerturbationSpec::sinusoidal(alpha, dim),
        Family::GaussianTail => PerturbationSpec::gaussian_tail(alpha, dim),
        Family::Bump => PerturbationSpec::bump(alpha, vec![0.0; dim], 1.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    base.randomized(&mut rng, &vec![true; dim], 0.0)
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// JSON run manifest supplying defaults for the options below.
    #[arg(long)]
    #[serde(skip)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long)]
    w_min: Option<u64>,
    #[arg(long)]
    w_max: Option<u64>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Tracking radius; the perturbation must satisfy δ ≤ (1 − λ)ε.
    #[arg(long)]
    eps: Option<f64>,
    /// Oracle step budget; the map gets ten times the oracle's steps.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn resolve(self) -> Result<Self, Failure> {
        overlay!(self, machine, w_min, w_max, family, alpha, seed, lambda, eps, budget, out)
    }
}

pub fn run(args: SweepArgs) -> Result<(), Failure> {
    let args = args.resolve()?;
    let machine_path = required(args.machine, "machine")?;
    let machine = TuringMachine::from_json(&read_text(&machine_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", machine_path.display())))?;
    let lambda = args.lambda.unwrap_or(DEFAULT_LAMBDA);
    let family = args.family.unwrap_or(Family::Constant);
    let alpha = args.alpha.unwrap_or(0.0);
    let seed = args.seed.unwrap_or(0);
    let eps = args.eps.unwrap_or(0.2);
    let budget = args.budget.unwrap_or(1000);
    let (w_min, w_max) = (args.w_min.unwrap_or(0), args.w_max.unwrap_or(20));
    if w_min > w_max {
        return Err(Failure::invalid("--w-min exceeds --w-max"));
    }

    let base = RobustMap::new(machine.clone(), lambda)?;
    let xh = base.halting_point();
    let g = PerturbedMap::new(base, family_member(family, alpha, 3, seed));
    if !g.within_budget(eps) {
        return Err(Failure::invalid(format!(
            "perturbation outside budget: delta = {:.3e}, theta = {:.3e}, need delta <= {:.3e} and lambda + theta < 1",
            g.delta(),
            g.theta(),
            (1.0 - lambda) * eps
        )));
    }
    let sink = find_sink(&g, xh, 1e-12)?;

    let mut csv = format!(
        "# basin-forge sweep machine={} seed={seed} family={} alpha={alpha} lambda={lambda} eps={eps}\n\
         w,oracle_halted,oracle_steps,verdict,map_steps,agrees\n",
        machine_path.display(),
        family.name(),
    );
    let mut agree = 0;
    for w in w_min..=w_max {
        let oracle = machine.run(w, budget);
        let j_max = 10 * oracle.steps_used.max(1) as usize;
        let m = basin_membership(&g, sink.point, w, eps, j_max);
        let ok = (m.verdict == Verdict::In) == oracle.halted;
        agree += usize::from(ok);
        let verdict = match m.verdict {
            Verdict::In => "IN",
            Verdict::NotYet => "NOT_YET",
            Verdict::Escaped => "ESCAPED",
        };
        let _ = writeln!(
            csv,
            "{w},{},{},{verdict},{},{ok}",
            oracle.halted, oracle.steps_used, m.steps
        );
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("sweep.csv"));
    write_file(&out, csv)?;
    let n = w_max - w_min + 1;
    println!(
        "sweep w={w_min}..={w_max}: {agree}/{n} verdicts match the oracle; sink at ({:.4}, {:.4}, {:.4}); wrote {}",
        sink.point[0],
        sink.point[1],
        sink.point[2],
        out.display()
    );
    Ok(())
}
