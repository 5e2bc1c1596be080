//! Second fundamental form, mean curvature and curvature form of each model.

use fibdirac::geometry::{compute_tensors, model_geometry, tensor_table, ModelName};

fn main() {
    let n: usize = std::env::args().nth(1).map_or(8, |a| a.parse().unwrap());
    for m in ModelName::ALL {
        let g = model_geometry(m, &[n]).unwrap();
        let t = compute_tensors(&g);
        let table = tensor_table(&g, &t);
        let kmax = (0..g.grid.len())
            .flat_map(|p| (0..g.dim_base).map(move |al| (p, al)))
            .map(|(p, al)| t.k(p, al).abs())
            .fold(0.0, f64::max);
        println!(
            "{m}: {} rows, columns {:?}, max |k| {kmax:.3}, curvature {}, invariants {:.1e}",
            table.rows.len(),
            &table.columns[1..],
            t.has_curvature(),
            t.invariant_defect()
        );
    }
}
