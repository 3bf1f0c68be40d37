//! Writes every figure's CSV data and the manifest into a directory
//! (first argument, default `figures`).

use std::path::PathBuf;

use exploration_eq::cli::{write_figures, FigureSet};

fn main() -> exploration_eq::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "figures".into());
    let manifest = write_figures(&dir, FigureSet::All, Some(1.8), Some(2.5), 401)?;
    for fig in &manifest.figures {
        println!("{}: {} ({} series)", fig.id, fig.title, fig.series.len());
    }
    println!("manifest: {}", dir.join("manifest.json").display());
    Ok(())
}
