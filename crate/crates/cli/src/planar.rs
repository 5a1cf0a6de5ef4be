use std::fmt::Write as _;
use std::path::PathBuf;

use basin_forge::planar::{compute_basin, BasinOptions, CellLabel, PlanarField};
use clap::Args;
use serde::Deserialize;

use crate::failure::Failure;
use crate::{overlay, read_text, required, write_file};

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarArgs {
    /// JSON run manifest supplying defaults for the options below.
    #[arg(long)]
    #[serde(skip)]
    manifest: Option<PathBuf>,
    /// Planar field manifest.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Target sink, counted from 1 in order of increasing x.
    #[arg(long)]
    sink: Option<usize>,
    /// Accuracy: the margin band has width 1/k.
    #[arg(short = 'k', long = "k")]
    k: Option<u32>,
    /// Grid level (2^level cells per side); defaults to cells ≤ 1/(4k).
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Newton seeds per axis for the equilibrium search.
    #[arg(long)]
    seed_resolution: Option<usize>,
    /// PGM output; the legend, stable manifolds and annuli go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PlanarArgs {
    fn resolve(self) -> Result<Self, Failure> {
        overlay!(self, field, sink, k, level, t_max, seed_resolution, out)
    }
}

pub fn run(args: PlanarArgs) -> Result<(), Failure> {
    let args = args.resolve()?;
    let field_path = required(args.field, "field")?;
    let field = PlanarField::from_json(&read_text(&field_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", field_path.display())))?;
    let sink = args.sink.unwrap_or(1);
    if sink == 0 {
        return Err(Failure::invalid("--sink counts from 1"));
    }
    let mut opts = BasinOptions::new(args.k.unwrap_or(8));
    opts.level = args.level;
    if let Some(t) = args.t_max {
        opts.t_max = t;
    }
    if let Some(s) = args.seed_resolution {
        opts.seed_resolution = s;
    }
    let inward = field.boundary_check(360);
    if !inward.points_inward() {
        eprintln!(
            "note: field is not inward-pointing on the boundary ({} of {} samples, max <f(x),x> = {:.3e})",
            inward.violations, inward.samples, inward.worst
        );
    }
    let rep = compute_basin(&field, sink - 1, &opts)?;
    let raster = &rep.raster;

    let out = args.out.unwrap_or_else(|| PathBuf::from("basin.pgm"));
    write_file(&out, raster.to_pgm())?;
    let legend = serde_json::json!({
        "field": field.name(),
        "k": opts.k,
        "t_max": opts.t_max,
        "classified": rep.classified,
        "timeouts": rep.timeouts,
        "raster": raster.legend(),
        "equilibria": rep.inventory.equilibria,
        "annuli": rep.inventory.annuli.iter().map(|a| serde_json::json!({
            "kind": a.kind,
            "section_radius": a.section_radius,
            "return_derivative": a.return_derivative,
            "period": a.period,
            "margin": a.margin,
        })).collect::<Vec<_>>(),
    });
    let legend_path = out.with_extension("json");
    write_file(&legend_path, serde_json::to_string_pretty(&legend).expect("serializable") + "\n")?;

    let mut gamma_csv = String::from("curve,x,y\n");
    for (i, g) in rep.gammas.iter().enumerate() {
        for p in g {
            let _ = writeln!(gamma_csv, "{i},{:e},{:e}", p[0], p[1]);
        }
    }
    write_file(&out.with_extension("gamma.csv"), gamma_csv)?;
    let mut annuli_csv = String::from("annulus,boundary,x,y\n");
    for (i, a) in rep.inventory.annuli.iter().enumerate() {
        for (name, curve) in [("inner", &a.inner), ("outer", &a.outer)] {
            for p in curve {
                let _ = writeln!(annuli_csv, "{i},{name},{:e},{:e}", p[0], p[1]);
            }
        }
    }
    write_file(&out.with_extension("annuli.csv"), annuli_csv)?;

    let target = rep.inventory.sinks()[sink - 1].equilibrium;
    let n = raster.side();
    println!(
        "planar {}: {n}x{n} cells, {} sinks, target ({:.6}, {:.6}): {} target cells, {} margin, {} excluded, {} timeouts; wrote {} and {}",
        field.name(),
        rep.inventory.psi_n(),
        target[0],
        target[1],
        raster.count(|l| l == CellLabel::Sink(sink - 1)),
        raster.count(|l| l == CellLabel::Margin),
        raster.count(|l| l == CellLabel::ExcludedB),
        rep.timeouts,
        out.display(),
        legend_path.display(),
    );
    Ok(())
}
