//! Writes the synthetic 56-node test network and its node bounds.
//!
//! cargo run -p spreadguard --example synthetic -- data

use std::path::PathBuf;

use spreadguard::allocate::NodeBounds;
use spreadguard::io::{write_edge_list, write_node_params};
use spreadguard::netgraph::{random_strongly_connected, scale_to_radius};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let g = scale_to_radius(&random_strongly_connected(56, 1843, 56)?, 9.46)?;
    let bounds = vec![NodeBounds::new(4.2e-3, 2.1e-2, 0.1, 0.5)?; g.node_count()];
    std::fs::write(dir.join("synthetic56_edges.csv"), write_edge_list(&g))?;
    std::fs::write(dir.join("synthetic56_params.csv"), write_node_params(&g, &bounds))?;
    println!("wrote {} nodes, {} edges to {}", g.node_count(), g.edge_count(), dir.display());
    Ok(())
}
