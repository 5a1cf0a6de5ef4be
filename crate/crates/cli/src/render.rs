use std::path::PathBuf;

use clap::Args;

use crate::failure::Failure;

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// PGM raster written by `planar`.
    #[arg(long)]
    input: PathBuf,
    /// PNG output; defaults to the input with a .png extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: RenderArgs) -> Result<(), Failure> {
    let img = image::open(&args.input).map_err(|e| Failure::io(&args.input, e))?;
    let out = args.out.unwrap_or_else(|| args.input.with_extension("png"));
    img.save_with_format(&out, image::ImageFormat::Png).map_err(|e| Failure::io(&out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}
