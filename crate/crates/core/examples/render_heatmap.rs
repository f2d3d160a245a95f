// Turning a heatmap CSV into an SVG.

use mcfdd::cli::render::{heatmap_svg, parse_heatmap};

pub fn run_example() -> mcfdd::Result<String> {
    let csv = "condition,NM,CF,RL\nNM,0.92,0.05,0.03\nCF-SL4,0.04,0.90,0.06\nRL-SL4,0.10,0.02,0.88\n";
    let map = parse_heatmap(csv, None)?;
    let svg = heatmap_svg(&map, "predictive mean");
    let path = std::env::temp_dir().join("mcfdd-heatmap.svg");
    std::fs::write(&path, &svg)?;
    println!("{}×{} heatmap → {}", map.row_labels.len(), map.col_labels.len(), path.display());
    Ok(svg)
}

fn main() -> mcfdd::Result<()> {
    run_example().map(drop)
}
